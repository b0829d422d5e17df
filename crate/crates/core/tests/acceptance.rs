//! Runs every acceptance criterion and prints one pass/fail line each.
//!
//! `LEVELK_CRITERIA=1,4` restricts the run; `LEVELK_STRICT=1` turns any
//! failing criterion into a nonzero exit status.

use std::time::Instant;

use levelk_core::parallel::default_jobs;
use levelk_core::verify::{run, VerifyConfig, CRITERIA};

fn main() {
    let selected: Vec<usize> = match std::env::var("LEVELK_CRITERIA") {
        Ok(list) => list.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        Err(_) => (1..=CRITERIA).collect(),
    };
    let strict = std::env::var("LEVELK_STRICT").is_ok_and(|v| v == "1");
    let cfg = VerifyConfig { jobs: default_jobs(), ..VerifyConfig::default() };
    let mut failed = 0;
    for id in selected {
        let start = Instant::now();
        let outcome = run(id, &cfg);
        println!("{} [{:.1}s]", outcome.line(), start.elapsed().as_secs_f64());
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("acceptance: {failed} criteria failed");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
