//! Flat `key = value` config files merged under command-line flags.
//!
//! Precedence, highest first: flags, `LEVELK_*` environment variables,
//! the config file, built-in defaults.

use std::fs;

/// Reads `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn env_name(key: &str) -> String {
    format!("LEVELK_{}", key.replace('-', "_").to_uppercase())
}

/// Splices config entries into the argument list right after the
/// subcommand, so that later (user) flags override them. Entries shadowed
/// by an environment variable are dropped.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut injected = Vec::new();
    for (key, value) in parse(&text)? {
        if std::env::var_os(env_name(&key)).is_some() {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value);
            }
        }
    }
    // the subcommand is the first argument after the program name
    let at = 2.min(rest.len());
    rest.splice(at..at, injected);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let got = parse("# run\nk = 2\n\nmax_n=10\n").unwrap();
        assert_eq!(got, vec![("k".into(), "2".into()), ("max-n".into(), "10".into())]);
        assert!(parse("oops").is_err());
    }

    #[test]
    fn config_values_come_before_user_flags() {
        let dir = std::env::temp_dir().join(format!("levelk-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "k = 2\nquick = true\n").unwrap();
        let args: Vec<String> = ["levelk", "counts", "--config", path.to_str().unwrap(), "--k", "1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let got = expand_args(args).unwrap();
        assert_eq!(got, vec!["levelk", "counts", "--k", "2", "--quick", "--k", "1"]);
    }
}
