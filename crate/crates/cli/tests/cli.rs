use std::process::{Command, Output};

fn levelk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelk"))
        .args(args)
        .env_remove("LEVELK_SEED")
        .env_remove("LEVELK_K")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn single_leaf_sample_is_one_vertex() {
    let o = levelk(&["sample", "--k", "1", "--n", "1", "--seed", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let head: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(head["config"]["seed"], 7);
    let net: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(net["n_vertices"], 1);
    assert_eq!(net["edges"].as_array().unwrap().len(), 0);
}

#[test]
fn same_seed_same_output() {
    let args = ["sample", "--k", "2", "--n", "6", "--seed", "11", "--count", "3"];
    let a = stdout(&levelk(&args));
    let b = stdout(&levelk(&args));
    assert_eq!(a, b);
    let c = stdout(&levelk(&["sample", "--k", "2", "--n", "6", "--seed", "12", "--count", "3"]));
    assert_ne!(a, c);
}

#[test]
fn jobs_do_not_change_samples() {
    let one = stdout(&levelk(&["stats", "--k", "1", "--n", "40", "--seed", "5", "--count", "4", "--jobs", "1"]));
    let two = stdout(&levelk(&["stats", "--k", "1", "--n", "40", "--seed", "5", "--count", "4", "--jobs", "3"]));
    assert_eq!(one, two);
}

#[test]
fn counts_start_with_known_values() {
    let o = levelk(&["counts", "--k", "1", "--max-n", "4"]);
    assert_eq!(stdout(&o), "n,count\n1,1\n2,3\n3,36\n4,723\n");
}

#[test]
fn bruteforce_matches_counts() {
    let o = levelk(&["bruteforce", "--k", "2", "--n", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 18);
}

#[test]
fn missing_seed_is_a_usage_error() {
    let o = levelk(&["sample", "--k", "1", "--n", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn zero_level_is_rejected() {
    let o = levelk(&["counts", "--k", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("levelk-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("counts.conf");
    std::fs::write(&path, "k = 2\nmax_n = 3\n").unwrap();
    let from_file = stdout(&levelk(&["counts", "--config", path.to_str().unwrap()]));
    assert_eq!(from_file, "n,count\n1,1\n2,18\n3,1143\n");
    let overridden = stdout(&levelk(&["counts", "--config", path.to_str().unwrap(), "--k", "1"]));
    assert_eq!(overridden, "n,count\n1,1\n2,3\n3,36\n");
}

#[test]
fn quick_verify_passes() {
    let o = levelk(&["verify", "--criteria", "1,3"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(o.status.success(), "{text}");
}
