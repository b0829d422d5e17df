//! The critical offspring law obtained by tilting the head series at the
//! point where its derivative equals one, and the exact counting identities
//! built on it.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use thiserror::Error;

use crate::heads::HeadWeights;
use crate::series::{labelled_count, solve_fixpoint, Series, SeriesError};

/// Truncation threshold for the probability mass left out of the table.
pub const TAIL_MASS: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OffspringError {
    #[error("no bracket for the critical point below radius 1")]
    NoBracket,
    #[error("size {n} exceeds the series order {order}")]
    OrderExceeded { n: usize, order: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// An interval `[lo, hi]` known to contain the critical point.
#[derive(Clone, Debug, PartialEq)]
pub struct RootBracket {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RootBracket {
    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / BigRational::from_integer(BigInt::from(2))
    }

    pub fn half_width(&self) -> BigRational {
        (&self.hi - &self.lo) / BigRational::from_integer(BigInt::from(2))
    }
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `10^-digits` as an exact rational.
pub fn decimal_tolerance(digits: u32) -> BigRational {
    BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), digits as usize))
}

/// Bisection for `H'(t) = 1` using the certified tail bounds of the
/// truncated series. Stops early, returning the current bracket, once the
/// truncation error no longer decides the sign at the midpoint.
pub fn solve_t0(h: &Series, tol: &BigRational) -> Result<RootBracket, OffspringError> {
    let d = h.derivative();
    let one = BigRational::one();
    let radius = BigRational::one();
    // Sign of H'(t) - 1 when certified: Some(true) above, Some(false) below.
    let side = |t: &BigRational| -> Option<bool> {
        match d.eval_exact(t, &radius) {
            Ok((s, tail)) if &s - &tail > one => Some(true),
            Ok((s, tail)) if &s + &tail < one => Some(false),
            Ok(_) => None,
            Err(_) => Some(true),
        }
    };
    let mut lo = BigRational::zero();
    let mut hi = half();
    let mut step = half();
    while side(&hi) != Some(true) {
        step *= half();
        hi = &one - &step;
        if step < *tol {
            return Err(OffspringError::NoBracket);
        }
    }
    while &hi - &lo > *tol {
        let mid = (&lo + &hi) * half();
        match side(&mid) {
            Some(true) => hi = mid,
            Some(false) => lo = mid,
            None => break,
        }
    }
    Ok(RootBracket { lo, hi })
}

/// Bisection for `H'(t) = 1` on the exact closed form of the full series.
pub fn solve_t0_closed(w: &HeadWeights, tol: &BigRational) -> Result<RootBracket, OffspringError> {
    let one = BigRational::one();
    let mut lo = BigRational::zero();
    let mut hi = half();
    let mut step = half();
    while w.derivative_closed(&hi) <= one {
        step *= half();
        hi = &one - &step;
        if step < *tol {
            return Err(OffspringError::NoBracket);
        }
    }
    while &hi - &lo > *tol {
        let mid = (&lo + &hi) * half();
        if w.derivative_closed(&mid) > one {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RootBracket { lo, hi })
}

/// The offspring law `P(xi = l) = h(l) t0^(l-1)` for `l >= 1`, with the
/// remaining mass at zero, tabulated up to the point where the omitted tail
/// falls below [`TAIL_MASS`].
#[derive(Clone, Debug)]
pub struct OffspringModel {
    pub k: usize,
    pub t0: BigRational,
    pub t0_error: BigRational,
    /// `H(t0)`
    pub h_t0: BigRational,
    /// `t0 - H(t0)`
    pub rho: BigRational,
    /// Exact `E[xi] - 1 = H'(t0) - 1` at the stored `t0`.
    pub mean_defect: BigRational,
    /// `pmf[l] = P(xi = l)` for `l` up to the truncation point.
    pub pmf: Vec<f64>,
    /// Probability of `xi` beyond the table (exact, rounded up).
    pub tail_mass: f64,
    /// Contribution of the omitted tail to `E[xi]` (exact, rounded up).
    pub tail_mean: f64,
    pub variance: f64,
    /// The head weights, extended to cover the tabulated support.
    pub weights: HeadWeights,
    alias: WeightedAliasIndex<f64>,
    biased_alias: WeightedAliasIndex<f64>,
}

impl OffspringModel {
    /// Solves for `t0` to within `tol` and tabulates the law.
    pub fn build(weights: &HeadWeights, tol: &BigRational) -> Result<Self, OffspringError> {
        let bracket = solve_t0_closed(weights, tol)?;
        Ok(Self::at(weights, &bracket))
    }

    /// Tabulates the law at the midpoint of a bracket.
    pub fn at(weights: &HeadWeights, bracket: &RootBracket) -> Self {
        let t0 = bracket.midpoint();
        let h_t0 = weights.eval_closed(&t0);
        let dh = weights.derivative_closed(&t0);
        let d2h = weights.second_derivative_closed(&t0);
        let mass_total = &h_t0 / &t0;
        let threshold = BigRational::from_float(TAIL_MASS).expect("finite");
        let mut order = weights.series.order().max(16);
        let mut w = weights.clone();
        let (mut exact, tail_mass, tail_mean) = loop {
            if w.series.order() < order {
                w = weights.with_order(order);
            }
            let mut exact = vec![BigRational::zero(); 2];
            let mut mass = BigRational::zero();
            let mut mean = BigRational::zero();
            let mut power = BigRational::one();
            let mut done = None;
            for l in 2..=order {
                power *= &t0;
                let p = w.h(l) * &power;
                mass += &p;
                mean += &p * BigRational::from_integer(BigInt::from(l));
                exact.push(p);
                let tail_mass = &mass_total - &mass;
                let tail_mean = &dh - &mean;
                if l >= 4 && tail_mass < threshold && tail_mean < threshold {
                    done = Some((tail_mass, tail_mean));
                    break;
                }
            }
            match done {
                Some((a, b)) => break (exact, a, b),
                None => order *= 2,
            }
        };
        exact[0] = BigRational::one() - &mass_total;
        let pmf: Vec<f64> = exact.iter().map(to_f64).collect();
        let variance = &t0 * &d2h + &dh - &dh * &dh;
        let alias = WeightedAliasIndex::new(pmf.clone()).expect("valid offspring weights");
        let biased: Vec<f64> = pmf.iter().enumerate().map(|(i, p)| i as f64 * p).collect();
        let biased_alias = WeightedAliasIndex::new(biased).expect("valid size-biased weights");
        OffspringModel {
            k: weights.k,
            rho: &t0 - &h_t0,
            mean_defect: dh - BigRational::one(),
            t0_error: bracket.half_width(),
            t0,
            h_t0,
            pmf,
            tail_mass: up(&tail_mass),
            tail_mean: up(&tail_mean),
            variance: to_f64(&variance),
            weights: w,
            alias,
            biased_alias,
        }
    }

    pub fn t0_f64(&self) -> f64 {
        to_f64(&self.t0)
    }

    pub fn rho_f64(&self) -> f64 {
        to_f64(&self.rho)
    }

    pub fn p0(&self) -> f64 {
        self.pmf[0]
    }

    /// Largest tabulated offspring count.
    pub fn support_max(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `sum l P(xi = l)` over the table.
    pub fn truncated_mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(l, p)| l as f64 * p).sum()
    }

    /// `P(xi_hat = i) = i P(xi = i)`.
    pub fn size_biased_pmf(&self) -> Vec<f64> {
        self.pmf.iter().enumerate().map(|(i, p)| i as f64 * p).collect()
    }

    /// `sqrt(P(xi = 0) / (2 pi Var xi)) t0`, the constant of the counting
    /// asymptotics.
    pub fn asymptotic_constant(&self) -> f64 {
        (self.p0() / (2.0 * std::f64::consts::PI * self.variance)).sqrt() * self.t0_f64()
    }

    /// `(sigma / 2) sqrt(p0)`: the height scaling of vertex-conditioned trees
    /// translated to leaf conditioning.
    pub fn height_constant_closed_form(&self) -> f64 {
        self.variance.sqrt() / 2.0 * self.p0().sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }

    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.biased_alias.sample(rng)
    }

    /// Exact rational law of `xi` at a rational tilt `t` (which need not be
    /// critical): `h(l) t^(l-1)` for `l >= 2` and the rest at zero.
    pub fn rational_law(weights: &HeadWeights, t: &BigRational) -> (BigRational, Series) {
        let order = weights.series.order();
        let mut coeffs = vec![BigRational::zero(); order + 1];
        let mut power = BigRational::one();
        for (l, c) in coeffs.iter_mut().enumerate().skip(2) {
            power = if l == 2 { t.clone() } else { power * t };
            *c = weights.h(l) * &power;
        }
        let mass_total = weights.eval_closed(t) / t;
        (BigRational::one() - mass_total, Series::from_coeffs(coeffs, order))
    }
}

fn up(x: &BigRational) -> f64 {
    let v = to_f64(x);
    if v.is_finite() { v.next_up() } else { v }
}

/// `n! [z^n] N`, the number of networks on `n` labelled leaves.
pub fn exact_count(network_series: &Series, n: usize) -> Result<BigUint, OffspringError> {
    if n > network_series.order() {
        return Err(OffspringError::OrderExceeded { n, order: network_series.order() });
    }
    Ok(labelled_count(network_series, n))
}

/// Probability generating function of the leaf count of a Galton-Watson tree
/// with offspring law `h(l) t^(l-1)` (plus mass at zero), from
/// `Z = P(xi = 0) z + sum_l P(xi = l) Z^l`.
pub fn leaf_count_series(weights: &HeadWeights, t: &BigRational) -> Result<Series, OffspringError> {
    let (p0, law) = OffspringModel::rational_law(weights, t);
    Ok(solve_fixpoint(&p0, &law)?)
}

/// The count route through the tree: `n! P(L = n) t (t - H(t))^(-n)`.
pub fn count_via_leaf_law(
    leaf_series: &Series,
    weights: &HeadWeights,
    t: &BigRational,
    n: usize,
) -> Result<BigRational, OffspringError> {
    if n > leaf_series.order() {
        return Err(OffspringError::OrderExceeded { n, order: leaf_series.order() });
    }
    let rho = t - weights.eval_closed(t);
    let mut f = BigRational::one();
    for i in 2..=n {
        f *= BigRational::from_integer(BigInt::from(i));
    }
    Ok(leaf_series.coeff(n) * t * num_traits::pow(rho.recip(), n) * f)
}

/// `N(k,n) rho^n n^(3/2) / n!` for each requested `n`.
pub fn normalized_counts(
    network_series: &Series,
    rho: &BigRational,
    ns: &[usize],
) -> Result<Vec<f64>, OffspringError> {
    ns.iter()
        .map(|&n| {
            if n > network_series.order() {
                return Err(OffspringError::OrderExceeded { n, order: network_series.order() });
            }
            let scaled = network_series.coeff(n) * num_traits::pow(rho.clone(), n);
            Ok(to_f64(&scaled) * (n as f64).powf(1.5))
        })
        .collect()
}

/// Extrapolates `s_n = a + c / n` through the last two points.
pub fn extrapolate_inverse_n(ns: &[usize], values: &[f64]) -> f64 {
    let m = ns.len();
    assert!(m >= 2 && values.len() == m);
    let (n1, n2) = (ns[m - 2] as f64, ns[m - 1] as f64);
    let (s1, s2) = (values[m - 2], values[m - 1]);
    (n2 * s2 - n1 * s1) / (n2 - n1)
}

/// `|x - 1|` as a float, for criticality reports.
pub fn abs_f64(x: &BigRational) -> f64 {
    to_f64(&x.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{enumerate_generators, tabulate_generators};
    use crate::heads::head_weight_series;
    use crate::series::solve_network_series;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn weights(k: usize, order: usize) -> HeadWeights {
        head_weight_series(&tabulate_generators(k, &enumerate_generators(k).unwrap()).unwrap(), order)
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn toy_series_root_matches_quadratic_formula() {
        // H = z^2/2 + z^3, H' = z + 3z^2 = 1 at (sqrt(13) - 1) / 6
        let h = Series::from_coeffs(vec![r(0, 1), r(0, 1), r(1, 2), r(1, 1)], 12);
        let b = solve_t0(&h, &decimal_tolerance(20)).unwrap();
        let expected = (13f64.sqrt() - 1.0) / 6.0;
        assert!((to_f64(&b.midpoint()) - expected).abs() < 1e-15);
        assert!(to_f64(&b.lo) <= expected && expected <= to_f64(&b.hi));
        let coarse = solve_t0(&h, &decimal_tolerance(8)).unwrap();
        let fine = solve_t0(&h, &decimal_tolerance(9)).unwrap();
        assert!(to_f64(&(coarse.midpoint() - fine.midpoint()).abs()) <= 1e-8);
    }

    #[test]
    fn level_one_critical_point() {
        let w = weights(1, 64);
        let closed = solve_t0_closed(&w, &decimal_tolerance(30)).unwrap();
        let t0 = to_f64(&closed.midpoint());
        // frozen from an independent high-precision solve
        assert!((t0 - 0.219_223_593_595_585).abs() < 1e-14);
        // the truncated-series route at two orders agrees with the closed form
        let s64 = solve_t0(&w.series, &decimal_tolerance(14)).unwrap();
        let s128 = solve_t0(&w.with_order(128).series, &decimal_tolerance(14)).unwrap();
        assert!((to_f64(&s64.midpoint()) - t0).abs() < 1e-10);
        assert!((to_f64(&s128.midpoint()) - t0).abs() < 1e-10);
        let m = OffspringModel::at(&w, &closed);
        // t0 - H(t0) is exactly 1/8 at level one
        assert!((m.rho_f64() - 0.125).abs() < 1e-25);
        assert!((m.p0() - 0.570_194).abs() < 1e-6);
        assert!((m.variance - 1.528_35).abs() < 1e-5);
        assert!((m.asymptotic_constant() - 0.053_419_2).abs() < 1e-6);
    }

    #[test]
    fn laws_are_critical_for_every_level() {
        for k in 1..=3 {
            let m = OffspringModel::build(&weights(k, 64), &decimal_tolerance(30)).unwrap();
            assert_eq!(m.pmf[1], 0.0);
            assert!(m.tail_mass < TAIL_MASS && m.tail_mean < TAIL_MASS);
            assert!(abs_f64(&m.mean_defect) < 1e-25);
            assert!((m.truncated_mean() + m.tail_mean - 1.0).abs() < 1e-10);
            let total: f64 = m.pmf.iter().sum();
            assert!((total + m.tail_mass - 1.0).abs() < 1e-12);
            let hat: f64 = m.size_biased_pmf().iter().sum();
            assert!((hat - 1.0).abs() < 1e-10);
            assert!(m.rho.is_positive());
            // P(xi = 0) = 1 - H(t0)/t0
            assert!((m.p0() - (1.0 - to_f64(&(&m.h_t0 / &m.t0)))).abs() < 1e-15);
            // variance from the table agrees with the closed form
            let second: f64 = m.pmf.iter().enumerate().map(|(l, p)| (l * l) as f64 * p).sum();
            assert!((second - 1.0 - m.variance).abs() < 1e-9);
        }
    }

    #[test]
    fn leaf_law_route_reproduces_counts_exactly() {
        let w = weights(2, 14);
        let n_series = solve_network_series(&w.series).unwrap();
        for t in [r(1, 5), r(3, 10), r(2_192_236, 10_000_000)] {
            let z = leaf_count_series(&w, &t).unwrap();
            for n in 1..=14 {
                let via_tree = count_via_leaf_law(&z, &w, &t, n).unwrap();
                let direct = BigRational::from_integer(exact_count(&n_series, n).unwrap().into());
                assert_eq!(via_tree, direct, "n = {n}");
            }
        }
        assert!(exact_count(&n_series, 15).is_err());
        assert_eq!(exact_count(&n_series, 1).unwrap(), BigUint::one());
    }

    #[test]
    fn sampling_follows_the_table() {
        let m = OffspringModel::build(&weights(1, 64), &decimal_tolerance(30)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 200_000;
        let mut counts = vec![0usize; m.pmf.len()];
        let mut hat_counts = vec![0usize; m.pmf.len()];
        for _ in 0..draws {
            counts[m.sample(&mut rng)] += 1;
            hat_counts[m.sample_size_biased(&mut rng)] += 1;
        }
        assert_eq!(counts[1] + hat_counts[0] + hat_counts[1], 0);
        let p0 = counts[0] as f64 / draws as f64;
        assert!((p0 - m.p0()).abs() < 4.0 * (m.p0() * (1.0 - m.p0()) / draws as f64).sqrt());
        let hat = m.size_biased_pmf();
        let h2 = hat_counts[2] as f64 / draws as f64;
        assert!((h2 - hat[2]).abs() < 4.0 * (hat[2] * (1.0 - hat[2]) / draws as f64).sqrt());
    }

    #[test]
    fn normalized_counts_approach_the_constant() {
        let w = weights(1, 50);
        let m = OffspringModel::build(&w, &decimal_tolerance(30)).unwrap();
        let n_series = solve_network_series(&w.series).unwrap();
        let ns = [30, 40, 50];
        let s = normalized_counts(&n_series, &m.rho, &ns).unwrap();
        let a = extrapolate_inverse_n(&ns, &s);
        assert!((a - m.asymptotic_constant()).abs() / m.asymptotic_constant() < 0.02);
    }
}
