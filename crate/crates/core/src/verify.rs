//! The acceptance checks, shared by the `verify` subcommand and the
//! acceptance test target.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::Serialize;

use crate::bruteforce::{chi_square, enumerate_decorated_trees, enumerate_networks, enumerate_raw, DEFAULT_BUDGET};
use crate::constants::{derive_constants, ConstantsConfig};
use crate::generators::{enumerate_generators, tabulate_generators};
use crate::heads::head_weight_series;
use crate::network::{DecoratedTree, Network};
use crate::offspring::{abs_f64, extrapolate_inverse_n, normalized_counts};
use crate::parallel::{parallel_map, stream_rng};
use crate::sampler::{LevelSampler, SampledNetwork};
use crate::series::{labelled_count, solve_network_series};
use crate::stats::{
    directed_heights, excursion_moment, fit_line, log_survival, mean_stderr, neighborhood_census,
    undirected_heights, Census, CensusScope,
};

/// Number of acceptance criteria.
pub const CRITERIA: usize = 10;

/// Criteria cheap enough for `verify --quick`.
pub const QUICK: [usize; 6] = [1, 2, 3, 4, 5, 10];

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub jobs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 20240601, jobs: 1 }
    }
}

pub fn name(id: usize) -> &'static str {
    match id {
        1 => "exact counts match brute force",
        2 => "decomposition round trip",
        3 => "criticality of the offspring law",
        4 => "sampler uniformity",
        5 => "asymptotic count constant",
        6 => "height moments",
        7 => "height tail shape",
        8 => "local limit census",
        9 => "quenched census concentration",
        10 => "structural invariants",
        _ => "unknown",
    }
}

/// Runs one criterion. Samples shared between criteria 7, 8 and 9 are
/// drawn from the same streams, so each criterion can also run alone.
pub fn run(id: usize, cfg: &VerifyConfig) -> Outcome {
    let (passed, detail) = match id {
        1 => exact_counts(),
        2 => round_trip(),
        3 => criticality(),
        4 => uniformity(cfg),
        5 => count_constant(),
        6 => height_moments(cfg),
        7 => height_tail(cfg),
        8 => local_census(cfg),
        9 => concentration(cfg),
        10 => invariants(cfg),
        _ => (false, format!("no criterion {id}")),
    };
    Outcome { id, name: name(id), passed, detail }
}

fn fail(e: impl std::fmt::Display) -> (bool, String) {
    (false, format!("error: {e}"))
}

fn series_counts(k: usize, max_n: usize) -> Vec<BigUint> {
    let t = tabulate_generators(k, &enumerate_generators(k).expect("generators")).expect("table");
    let n = solve_network_series(&head_weight_series(&t, max_n + 1).series).expect("fixpoint");
    (0..=max_n).map(|i| if i == 0 { BigUint::default() } else { labelled_count(&n, i) }).collect()
}

fn exact_counts() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=2 {
        let counts = series_counts(k, 4);
        for n in 1..=4 {
            let universe = match enumerate_networks(k, n, DEFAULT_BUDGET) {
                Ok(u) => u,
                Err(e) => return fail(e),
            };
            let same = BigUint::from(universe.len()) == counts[n];
            // second, independent route on raw digraphs where feasible
            let raw = if n <= 3 {
                match enumerate_raw(k, n, DEFAULT_BUDGET) {
                    Ok(r) => Some(r.codes() == universe.codes()),
                    Err(e) => return fail(e),
                }
            } else {
                None
            };
            ok &= same && raw.unwrap_or(true);
            parts.push(format!(
                "k={k} n={n}: series {} trees {}{}",
                counts[n],
                universe.len(),
                match raw {
                    Some(true) => " raw=same",
                    Some(false) => " raw=DIFFERENT",
                    None => "",
                }
            ));
        }
    }
    (ok, parts.join("; "))
}

fn round_trip() -> (bool, String) {
    let mut checked_nets = 0usize;
    let mut checked_trees = 0usize;
    let mut failures = 0usize;
    for k in 1..=2 {
        for n in 1..=4 {
            let universe = match enumerate_networks(k, n, DEFAULT_BUDGET) {
                Ok(u) => u,
                Err(e) => return fail(e),
            };
            for net in &universe.networks {
                checked_nets += 1;
                match DecoratedTree::decompose(net) {
                    Ok(t) if t.to_network().canonical_code() == net.canonical_code() => {}
                    _ => failures += 1,
                }
            }
            let trees = match enumerate_decorated_trees(k, n, DEFAULT_BUDGET) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            for t in &trees {
                checked_trees += 1;
                match DecoratedTree::decompose(&t.to_network()) {
                    Ok(back) if back.same_unordered(t) => {}
                    _ => failures += 1,
                }
            }
        }
    }
    (
        failures == 0,
        format!("{checked_nets} networks and {checked_trees} decorated trees, {failures} failures"),
    )
}

fn criticality() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=2 {
        let s = match LevelSampler::new(k) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let bound = abs_f64(&s.model.mean_defect) + s.model.tail_mean;
        ok &= bound <= 1e-10;
        parts.push(format!("k={k}: |E xi - 1| <= {bound:.2e}"));
    }
    (ok, parts.join("; "))
}

fn uniformity(cfg: &VerifyConfig) -> (bool, String) {
    let s = match LevelSampler::new(1) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2usize, 3] {
        let universe = match enumerate_networks(1, n, DEFAULT_BUDGET) {
            Ok(u) => u,
            Err(e) => return fail(e),
        };
        let draws = 100_000;
        let codes = parallel_map(draws, cfg.jobs, |i| {
            let mut rng = stream_rng(cfg.seed, (4 << 48) + ((n as u64) << 32) + i as u64);
            s.sample_network(n, &mut rng, 100_000).map(|x| x.network.canonical_code())
        });
        let codes: Vec<Vec<u64>> = match codes.into_iter().collect() {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match chi_square(&codes, &universe) {
            Ok(p) => {
                ok &= p > 1e-3;
                parts.push(format!("n={n}: {} classes, p = {p:.4}", universe.len()));
            }
            Err(e) => return fail(e),
        }
    }
    (ok, parts.join("; "))
}

fn count_constant() -> (bool, String) {
    let ns = [30usize, 40, 50];
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=2 {
        let s = match LevelSampler::new(k) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let weights = s.model.weights.with_order(50);
        let series = match solve_network_series(&weights.series) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let values = match normalized_counts(&series, &s.model.rho, &ns) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        let spread = (max - min) / min;
        let limit = extrapolate_inverse_n(&ns, &values);
        let a_k = s.model.asymptotic_constant();
        let rel = (limit - a_k).abs() / a_k;
        ok &= spread < 0.05 && rel < 0.10;
        parts.push(format!(
            "k={k}: values {:.6}/{:.6}/{:.6} spread {:.2}%, extrapolated {limit:.6} vs a_k {a_k:.6} ({:.2}%)",
            values[0],
            values[1],
            values[2],
            100.0 * spread,
            100.0 * rel
        ));
    }
    (ok, parts.join("; "))
}

/// `f(i, network)` for networks `0..count` of the shared k = 1 stream at
/// leaf count `n`; networks are dropped as soon as `f` is done with them.
fn shared_map<T, F>(s: &LevelSampler, cfg: &VerifyConfig, n: usize, count: usize, f: F) -> Result<Vec<T>, String>
where
    T: Send,
    F: Fn(usize, SampledNetwork) -> T + Sync,
{
    let budget = s.default_max_rejections(n);
    parallel_map(count, cfg.jobs, |i| {
        let mut rng = stream_rng(cfg.seed, (7 << 48) + ((n as u64) << 32) + i as u64);
        s.sample_network(n, &mut rng, budget).map(|x| f(i, x)).map_err(|e| e.to_string())
    })
    .into_iter()
    .collect()
}

fn height(net: &Network) -> usize {
    directed_heights(net).into_iter().max().unwrap_or(0)
}

fn height_moments(cfg: &VerifyConfig) -> (bool, String) {
    let s = match LevelSampler::new(1) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let ccfg = ConstantsConfig { seed: cfg.seed, jobs: cfg.jobs, ..ConstantsConfig::default() };
    let c = match derive_constants(&s, &ccfg) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let b_k = c.b_k.value;
    let target1 = excursion_moment(1);
    let target2 = excursion_moment(2);
    let mut gaps = Vec::new();
    let mut parts = vec![format!(
        "b = {:.4} +- {:.4} (closed form {:.4}), E eta = {:.4}, b_k = {b_k:.4}",
        c.b.value,
        c.b.uncertainty(),
        c.b_closed_form.value,
        c.e_eta.value
    )];
    let mut second = 0.0;
    for n in [500usize, 2000] {
        let budget = s.default_max_rejections(n);
        let hs = parallel_map(2000, cfg.jobs, |i| {
            let mut rng = stream_rng(cfg.seed, (6 << 48) + ((n as u64) << 32) + i as u64);
            s.sample_network(n, &mut rng, budget).map(|x| height(&x.network) as f64)
        });
        let hs: Vec<f64> = match hs.into_iter().collect() {
            Ok(h) => h,
            Err(e) => return fail(e),
        };
        let scaled: Vec<f64> = hs.iter().map(|h| b_k * h / (n as f64).sqrt()).collect();
        let (m1, se1) = mean_stderr(&scaled);
        let (m2, _) = mean_stderr(&scaled.iter().map(|x| x * x).collect::<Vec<_>>());
        gaps.push((m1 - target1).abs() / target1);
        second = (m2 - target2).abs() / target2;
        parts.push(format!(
            "n={n}: first {m1:.4} +- {se1:.4} (gap {:.2}%), second {m2:.4} (gap {:.2}%)",
            100.0 * gaps.last().unwrap(),
            100.0 * second
        ));
    }
    let ok = gaps[1] <= 0.15 && gaps[1] < gaps[0] && second <= 0.20;
    (ok, parts.join("; "))
}

fn height_tail(cfg: &VerifyConfig) -> (bool, String) {
    let s = match LevelSampler::new(1) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let n = 2000;
    let hs = match shared_map(&s, cfg, n, 10_000, |_, x| height(&x.network)) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let points = log_survival(&hs, 30);
    if points.len() < 3 {
        return (false, format!("only {} survival points", points.len()));
    }
    let x: Vec<f64> = points.iter().map(|p| (p.0 * p.0) as f64 / n as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = fit_line(&x, &y);
    // the same fit restricted to heights above the median, for reference
    let mut sorted = hs.clone();
    sorted.sort_unstable();
    let median = sorted[sorted.len() / 2];
    let upper: Vec<usize> = (0..points.len()).filter(|&i| points[i].0 >= median).collect();
    let tail_fit = fit_line(
        &upper.iter().map(|&i| x[i]).collect::<Vec<_>>(),
        &upper.iter().map(|&i| y[i]).collect::<Vec<_>>(),
    );
    let ok = fit.slope < 0.0 && fit.r_squared >= 0.9;
    (
        ok,
        format!(
            "{} thresholds (H up to {}): slope {:.4}, R^2 {:.4}; above the median height {median}: slope {:.4}, R^2 {:.4}",
            points.len(),
            points.last().unwrap().0,
            fit.slope,
            fit.r_squared,
            tail_fit.slope,
            tail_fit.r_squared
        ),
    )
}

fn local_census(cfg: &VerifyConfig) -> (bool, String) {
    let s = match LevelSampler::new(1) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let radius = 1;
    let draws = 100_000;
    let cap = 1_000_000;
    let vertex_limit = parallel_map(draws, cfg.jobs, |i| {
        let mut rng = stream_rng(cfg.seed, (8 << 48) + i as u64);
        s.sample_vertex_limit(radius, &mut rng, cap).map(|v| v.ball_code(radius))
    });
    let root_limit = parallel_map(draws, cfg.jobs, |i| {
        let mut rng = stream_rng(cfg.seed, (8 << 48) + (1 << 32) + i as u64);
        s.sample_root_limit(radius, &mut rng, cap).map(|v| v.ball_code(radius))
    });
    let mut vertex_ref = Census::new(radius);
    let mut root_ref = Census::new(radius);
    for code in vertex_limit {
        match code {
            Ok(c) => vertex_ref.add(c),
            Err(e) => return fail(e),
        }
    }
    for code in root_limit {
        match code {
            Ok(c) => root_ref.add(c),
            Err(e) => return fail(e),
        }
    }
    let mut tv = BTreeMap::new();
    for n in [1000usize, 2000] {
        let per_network = shared_map(&s, cfg, n, 10_000, |i, x| {
            let vertices = (i < 200).then(|| neighborhood_census(&x.network, radius, CensusScope::Vertices));
            (x.network.ball_code(x.network.root(), radius), vertices)
        });
        let per_network = match per_network {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let mut vertex = Census::new(radius);
        let mut root = Census::new(radius);
        for (code, vertices) in per_network {
            root.add(code);
            if let Some(v) = vertices {
                vertex.merge(&v);
            }
        }
        tv.insert(n, (vertex.tv(&vertex_ref), root.tv(&root_ref)));
    }
    let (v1, r1) = tv[&1000];
    let (v2, r2) = tv[&2000];
    let ok = v2 <= 0.05 && r2 <= 0.05 && v2 < v1 && r2 < r1;
    (
        ok,
        format!(
            "vertex census TV {v2:.4} at n=2000 ({v1:.4} at n=1000); root census TV {r2:.4} at n=2000 ({r1:.4} at n=1000); {} vertex classes, {} root classes",
            vertex_ref.counts.len(),
            root_ref.counts.len()
        ),
    )
}

fn concentration(cfg: &VerifyConfig) -> (bool, String) {
    let s = match LevelSampler::new(1) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let censuses = match shared_map(&s, cfg, 2000, 50, |_, x| {
        neighborhood_census(&x.network, 1, CensusScope::Vertices)
    }) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let mut classes: Vec<Vec<u64>> = censuses.iter().flat_map(|c| c.counts.keys().cloned()).collect();
    classes.sort();
    classes.dedup();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut failing = Vec::new();
    for code in &classes {
        let f: Vec<f64> = censuses.iter().map(|c| c.frequency(code)).collect();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        if mean < 0.01 {
            continue;
        }
        checked += 1;
        let sd = (f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (f.len() - 1) as f64).sqrt();
        let cv = sd / mean;
        worst = worst.max(cv);
        if cv > 0.1 {
            failing.push(format!("mean {mean:.4} cv {cv:.3}"));
        }
    }
    (
        failing.is_empty(),
        format!(
            "{checked} classes with mean frequency >= 0.01, largest CV {worst:.3}{}",
            if failing.is_empty() { String::new() } else { format!("; above 0.1: {}", failing.join(", ")) }
        ),
    )
}

fn invariants(cfg: &VerifyConfig) -> (bool, String) {
    let grid: Vec<(usize, usize)> =
        (1..=3).flat_map(|k| [1usize, 2, 3, 5, 10, 30, 100, 300].map(|n| (k, n))).collect();
    let per_cell = 10_000usize.div_ceil(grid.len());
    let mut total = 0;
    let mut violations = Vec::new();
    for (ci, &(k, n)) in grid.iter().enumerate() {
        let s = match LevelSampler::new(k) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let budget = s.default_max_rejections(n);
        let found = parallel_map(per_cell, cfg.jobs, |i| {
            let mut rng = stream_rng(cfg.seed, (10 << 48) + ((ci as u64) << 32) + i as u64);
            let x = match s.sample_network(n, &mut rng, budget) {
                Ok(x) => x,
                Err(e) => return Some(e.to_string()),
            };
            let net = &x.network;
            if let Err(e) = net.validate_level_k(k) {
                return Some(format!("not level-{k}: {e:?}"));
            }
            let h = directed_heights(net);
            let g = undirected_heights(net);
            if (0..net.n_vertices()).any(|v| g[v] > h[v]) {
                return Some("undirected height above directed height".into());
            }
            if net.n_vertices() > 4 * n * (k + 1) {
                return Some(format!("{} vertices", net.n_vertices()));
            }
            if let Some((d, size)) = x.head_sizes().into_iter().find(|&(d, size)| size > 2 * (d + k)) {
                return Some(format!("head with {d} leaves has {size} vertices"));
            }
            if x.tree.n_vertices() > 2 * n - 1 {
                return Some(format!("tree with {} vertices", x.tree.n_vertices()));
            }
            None
        });
        total += per_cell;
        violations.extend(found.into_iter().flatten().map(|v| format!("k={k} n={n}: {v}")));
    }
    let detail = format!(
        "{total} networks over {} (k, n) cells, {} violations{}",
        grid.len(),
        violations.len(),
        violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
    );
    (violations.is_empty(), detail)
}
