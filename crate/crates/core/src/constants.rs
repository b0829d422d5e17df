//! Derived constants: path lengths through a typical head, the surplus rate,
//! and the height scaling constant of the conditioned tree.

use serde::Serialize;
use thiserror::Error;

use crate::heads::HeadError;
use crate::network::Network;
use crate::offspring::abs_f64;
use crate::parallel::{parallel_map, stream_rng};
use crate::sampler::{LevelSampler, SamplerError};
use crate::stats::{directed_heights, mean_stderr, undirected_heights, weighted_intercept};

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error("Monte-Carlo budget too small: {0}")]
    Budget(String),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// A value with its uncertainty and how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub method: String,
}

impl Estimate {
    pub fn exact(value: f64, abs_error: f64, method: &str) -> Self {
        Estimate { value, abs_error: Some(abs_error), stderr: None, method: method.into() }
    }

    pub fn statistical(value: f64, stderr: f64, method: &str) -> Self {
        Estimate { value, abs_error: None, stderr: Some(stderr), method: method.into() }
    }

    /// Combined one-sigma uncertainty.
    pub fn uncertainty(&self) -> f64 {
        self.abs_error.unwrap_or(0.0) + self.stderr.unwrap_or(0.0)
    }

    /// `self / other` with first-order error propagation.
    fn ratio(&self, other: &Estimate, method: &str) -> Estimate {
        let value = self.value / other.value;
        let rel = self.uncertainty() / self.value.abs() + other.uncertainty() / other.value.abs();
        Estimate::statistical(value, value.abs() * rel, method)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstantsConfig {
    /// Heads on at most this many leaves are averaged exactly.
    pub d_exact: usize,
    /// Random heads drawn for the degrees beyond `d_exact`.
    pub head_samples: usize,
    /// Leaf counts of the trees used to estimate the height constant.
    pub tree_sizes: Vec<usize>,
    /// Trees sampled at each of those sizes.
    pub trees_per_size: Vec<usize>,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            d_exact: 8,
            head_samples: 20_000,
            tree_sizes: vec![1000, 4000, 16000],
            trees_per_size: vec![2000, 600, 200],
            seed: 1,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub k: usize,
    pub t0: Estimate,
    pub rho: Estimate,
    pub p0: Estimate,
    pub var_xi: Estimate,
    pub a_k: Estimate,
    /// Shortest directed path from a head's root to a uniform leaf, under the
    /// size-biased outdegree.
    pub e_eta: Estimate,
    /// Same with undirected paths.
    pub e_eta_prime: Estimate,
    /// Longest directed path from a head's root to a uniform leaf.
    pub e_eta_dprime: Estimate,
    /// Expected surplus of the head at a vertex with unbiased outdegree.
    pub e_kappa: Estimate,
    pub b: Estimate,
    pub b_closed_form: Estimate,
    /// `|b - b_closed_form|` exceeds three standard errors.
    pub b_disagrees: bool,
    pub b_k: Estimate,
    pub b_k_prime: Estimate,
    pub b_k_dprime: Estimate,
}

impl Constants {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constants serialize")
    }
}

/// Mean over the head's leaves of the shortest directed, shortest
/// undirected and longest directed path length from its root.
pub fn head_path_means(head: &Network) -> [f64; 3] {
    let dir = directed_heights(head);
    let undir = undirected_heights(head);
    let longest = head.depths();
    let leaves = head.leaf_labels();
    let m = leaves.len() as f64;
    let mut out = [0.0; 3];
    for (v, _) in leaves {
        out[0] += dir[v] as f64;
        out[1] += undir[v] as f64;
        out[2] += longest[v] as f64;
    }
    out.map(|x| x / m)
}

/// Exact means of [`head_path_means`] over a uniform head on `d` leaves.
pub fn exact_head_path_means(sampler: &LevelSampler, d: usize) -> Result<[f64; 3], ConstantsError> {
    let mut acc = [0.0; 3];
    let mut total = 0.0;
    sampler.heads.for_each_shape(d, |w, net| {
        let w = w as f64;
        let m = head_path_means(net);
        for i in 0..3 {
            acc[i] += w * m[i];
        }
        total += w;
    })?;
    Ok(acc.map(|x| x / total))
}

/// Size-biased averages of the three head path lengths: exact up to
/// `d_exact` leaves, Monte Carlo beyond.
pub fn path_constants(sampler: &LevelSampler, cfg: &ConstantsConfig) -> Result<[Estimate; 3], ConstantsError> {
    let pmf = &sampler.model.pmf;
    let top = (pmf.len() - 1).min(sampler.heads.d_max());
    let biased: Vec<f64> = (0..=top).map(|d| d as f64 * pmf[d]).collect();
    let norm: f64 = biased.iter().sum();
    let tail = sampler.model.tail_mean;
    let mut value = [0.0; 3];
    let mut var = [0.0; 3];
    let exact_top = cfg.d_exact.min(top);
    for d in 2..=exact_top {
        let m = exact_head_path_means(sampler, d)?;
        for i in 0..3 {
            value[i] += biased[d] / norm * m[i];
        }
    }
    let mc_degrees: Vec<usize> = (exact_top + 1..=top).filter(|&d| biased[d] > 0.0).collect();
    if !mc_degrees.is_empty() {
        let mc_mass: f64 = mc_degrees.iter().map(|&d| biased[d]).sum();
        if cfg.head_samples < 2 * mc_degrees.len() {
            return Err(ConstantsError::Budget(format!(
                "{} head samples for {} degrees",
                cfg.head_samples,
                mc_degrees.len()
            )));
        }
        let per_degree: Vec<usize> = mc_degrees
            .iter()
            .map(|&d| ((cfg.head_samples as f64 * biased[d] / mc_mass) as usize).max(2))
            .collect();
        let results = parallel_map(mc_degrees.len(), cfg.jobs, |i| {
            let d = mc_degrees[i];
            let mut rng = stream_rng(cfg.seed, (1 << 40) + d as u64);
            let draws: Result<Vec<[f64; 3]>, HeadError> = (0..per_degree[i])
                .map(|_| sampler.heads.sample(d, &mut rng).map(|h| head_path_means(&h.network)))
                .collect();
            draws
        });
        for (i, r) in results.into_iter().enumerate() {
            let draws = r?;
            let w = biased[mc_degrees[i]] / norm;
            for j in 0..3 {
                let xs: Vec<f64> = draws.iter().map(|m| m[j]).collect();
                let (mean, se) = mean_stderr(&xs);
                value[j] += w * mean;
                var[j] += (w * se).powi(2);
            }
        }
    }
    // a head on d leaves has at most 2(d + k) vertices, so paths through the
    // omitted degrees are short compared with their tiny mass
    let tail_bound = 2.0 * tail * (top as f64 + sampler.k() as f64);
    let method = format!("exact over heads with <= {exact_top} leaves, Monte Carlo beyond");
    Ok([0, 1, 2].map(|i| Estimate {
        value: value[i],
        abs_error: Some(tail_bound),
        stderr: Some(var[i].sqrt()),
        method: method.clone(),
    }))
}

/// Mean tree height over `sqrt(n)` at each requested leaf count, with
/// standard errors.
pub fn tree_height_ratios(
    sampler: &LevelSampler,
    cfg: &ConstantsConfig,
) -> Result<Vec<(usize, f64, f64)>, ConstantsError> {
    let mut out = Vec::new();
    for (si, (&n, &count)) in cfg.tree_sizes.iter().zip(&cfg.trees_per_size).enumerate() {
        if count < 2 {
            return Err(ConstantsError::Budget(format!("{count} trees at n = {n}")));
        }
        let budget = sampler.default_max_rejections(n);
        let heights = parallel_map(count, cfg.jobs, |i| {
            let mut rng = stream_rng(cfg.seed, ((2 + si as u64) << 40) + i as u64);
            sampler
                .sample_conditioned_tree(n, &mut rng, budget)
                .map(|t| t.height() as f64 / (n as f64).sqrt())
        });
        let heights: Vec<f64> = heights.into_iter().collect::<Result<_, _>>()?;
        let (mean, se) = mean_stderr(&heights);
        out.push((n, mean, se));
    }
    Ok(out)
}

/// `b` from the extrapolated ratio `E[H(tree)] / sqrt(n)`, fitted as
/// `c + beta / sqrt(n)`, so that `b H / sqrt(n)` has the mean of the
/// excursion maximum.
pub fn height_constant(points: &[(usize, f64, f64)]) -> Estimate {
    let x: Vec<f64> = points.iter().map(|p| 1.0 / (p.0 as f64).sqrt()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let se: Vec<f64> = points.iter().map(|p| p.2).collect();
    let (c, c_se) = if points.len() >= 2 {
        let (c, c_se, _) = weighted_intercept(&x, &y, &se);
        (c, c_se)
    } else {
        (y[0], se[0])
    };
    let target = crate::stats::excursion_moment(1);
    let b = target / c;
    Estimate::statistical(b, b * c_se / c, "regression of tree heights on 1/sqrt(n), extrapolated")
}

pub fn derive_constants(sampler: &LevelSampler, cfg: &ConstantsConfig) -> Result<Constants, ConstantsError> {
    if cfg.tree_sizes.is_empty() || cfg.tree_sizes.len() != cfg.trees_per_size.len() {
        return Err(ConstantsError::Budget("tree sizes and counts must match and be nonempty".into()));
    }
    let m = &sampler.model;
    let tail = m.tail_mass + m.tail_mean;
    let t0 = Estimate::exact(m.t0_f64(), abs_f64(&m.t0_error), "certified bisection");
    let rho = Estimate::exact(m.rho_f64(), abs_f64(&m.t0_error), "t0 - H(t0), exact at t0");
    let p0 = Estimate::exact(m.p0(), tail, "1 - H(t0) / t0");
    let var_xi = Estimate::exact(m.variance, tail, "t0 H''(t0), closed form");
    let a_k = Estimate::exact(m.asymptotic_constant(), 1e-12, "sqrt(p0 / (2 pi Var)) t0");
    let e_kappa = Estimate::exact(
        sampler.mean_surplus_per_vertex()?,
        tail * 2.0 * (sampler.heads.d_max() + sampler.k()) as f64,
        "exact head surplus means under the offspring law",
    );
    let [e_eta, e_eta_prime, e_eta_dprime] = path_constants(sampler, cfg)?;
    let b = height_constant(&tree_height_ratios(sampler, cfg)?);
    let b_closed_form = Estimate::exact(m.height_constant_closed_form(), 1e-12, "(sigma / 2) sqrt(p0)");
    let b_disagrees = (b.value - b_closed_form.value).abs() > 3.0 * b.uncertainty();
    let b_k = b.ratio(&e_eta, "b / E[eta]");
    let b_k_prime = b.ratio(&e_eta_prime, "b / E[eta']");
    let b_k_dprime = b.ratio(&e_eta_dprime, "b / E[eta'']");
    Ok(Constants {
        k: sampler.k(),
        t0,
        rho,
        p0,
        var_xi,
        a_k,
        e_eta,
        e_eta_prime,
        e_eta_dprime,
        e_kappa,
        b,
        b_closed_form,
        b_disagrees,
        b_k,
        b_k_prime,
        b_k_dprime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;

    #[test]
    fn cherry_paths() {
        assert_eq!(head_path_means(&Network::cherry()), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn path_means_are_ordered_and_match_sampling() {
        let s = LevelSampler::new(1).unwrap();
        for d in 2..=5 {
            let exact = exact_head_path_means(&s, d).unwrap();
            assert!(exact[1] <= exact[0] && exact[0] <= exact[2] && exact[0] >= 1.0);
            let mut rng = stream_rng(5, d as u64);
            let draws: Vec<f64> =
                (0..20_000).map(|_| head_path_means(&s.heads.sample(d, &mut rng).unwrap().network)[0]).collect();
            let (mean, se) = mean_stderr(&draws);
            assert!((mean - exact[0]).abs() < 5.0 * se + 1e-9, "d={d}: {mean} vs {}", exact[0]);
        }
    }

    #[test]
    fn exact_and_sampled_parts_agree() {
        let s = LevelSampler::new(1).unwrap();
        let full = ConstantsConfig { d_exact: 9, ..ConstantsConfig::default() };
        let mixed = ConstantsConfig { d_exact: 5, head_samples: 40_000, ..ConstantsConfig::default() };
        let a = path_constants(&s, &full).unwrap();
        let b = path_constants(&s, &mixed).unwrap();
        for i in 0..3 {
            assert!((a[i].value - b[i].value).abs() < 5.0 * (a[i].uncertainty() + b[i].uncertainty()) + 1e-6);
        }
        assert!(a[1].value <= a[0].value && a[0].value >= 1.0);
    }

    #[test]
    fn height_constant_from_exact_points() {
        let target = crate::stats::excursion_moment(1);
        let pts: Vec<(usize, f64, f64)> =
            [100usize, 400, 1600].iter().map(|&n| (n, 2.0 + 3.0 / (n as f64).sqrt(), 0.01)).collect();
        let b = height_constant(&pts);
        assert!((b.value - target / 2.0).abs() < 1e-9);
    }

    #[test]
    fn small_budget_is_rejected() {
        let s = LevelSampler::new(1).unwrap();
        let cfg = ConstantsConfig { d_exact: 3, head_samples: 1, ..ConstantsConfig::default() };
        assert!(matches!(path_constants(&s, &cfg), Err(ConstantsError::Budget(_))));
    }
}
