//! Truncated formal power series with exact rational coefficients.
//!
//! A [`Series`] of order `M` stores the coefficients of `z^0 ..= z^M`. All
//! binary operations require equal orders; mixing orders is an error rather
//! than a silent truncation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("inner series of a composition must have zero constant term")]
    NonzeroConstant,
    #[error("invalid head series: {0}")]
    InvalidHeadSeries(String),
    #[error("fixpoint did not converge within {0} rounds")]
    NonConvergence(usize),
    #[error("evaluation point {t} is not inside the usable radius {radius}")]
    OutsideRadius { t: f64, radius: f64 },
    #[error("malformed coefficient string {0:?}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Series {
    coeffs: Vec<BigRational>,
}

/// Result of evaluating a truncated series at a point: the partial sum and a
/// bound on the omitted tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub tail_bound: f64,
}

fn zero_vec(order: usize) -> Vec<BigRational> {
    vec![BigRational::zero(); order + 1]
}

impl Series {
    pub fn zero(order: usize) -> Self {
        Series { coeffs: zero_vec(order) }
    }

    pub fn one(order: usize) -> Self {
        Self::monomial(BigRational::one(), 0, order)
    }

    /// The identity series `z`.
    pub fn z(order: usize) -> Self {
        Self::monomial(BigRational::one(), 1, order)
    }

    pub fn monomial(c: BigRational, power: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if power <= order {
            s.coeffs[power] = c;
        }
        s
    }

    /// Builds a series from its leading coefficients; missing ones are zero
    /// and extra ones are dropped.
    pub fn from_coeffs(mut coeffs: Vec<BigRational>, order: usize) -> Self {
        coeffs.resize(order + 1, BigRational::zero());
        Series { coeffs }
    }

    pub fn from_integers(values: &[i64], order: usize) -> Self {
        Self::from_coeffs(
            values.iter().map(|&v| BigRational::from_integer(v.into())).collect(),
            order,
        )
    }

    /// `1/(1-z)`.
    pub fn geometric(order: usize) -> Self {
        Series { coeffs: vec![BigRational::one(); order + 1] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> &BigRational {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, i: usize, c: BigRational) {
        self.coeffs[i] = c;
    }

    fn check(&self, other: &Series) -> Result<(), SeriesError> {
        if self.order() != other.order() {
            return Err(SeriesError::OrderMismatch(self.order(), other.order()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check(other)?;
        Ok(Series {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check(other)?;
        Ok(Series {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, c: &BigRational) -> Series {
        Series { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    pub fn mul(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Series) -> Series {
        let m = self.order();
        let mut out = zero_vec(m);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs[..=m - i].iter().enumerate() {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        Series { coeffs: out }
    }

    pub fn pow(&self, e: usize) -> Series {
        let mut acc = Series::one(self.order());
        for _ in 0..e {
            acc = acc.mul_unchecked(self);
        }
        acc
    }

    /// `self(inner(z))` by Horner's scheme. `inner` must have no constant term.
    pub fn compose(&self, inner: &Series) -> Result<Series, SeriesError> {
        self.check(inner)?;
        if !inner.coeffs[0].is_zero() {
            return Err(SeriesError::NonzeroConstant);
        }
        let m = self.order();
        let mut acc = Series::monomial(self.coeffs[m].clone(), 0, m);
        for i in (0..m).rev() {
            acc = acc.mul_unchecked(inner);
            acc.coeffs[0] += &self.coeffs[i];
        }
        Ok(acc)
    }

    /// Formal derivative; the result has order `M - 1`.
    pub fn derivative(&self) -> Series {
        let m = self.order();
        if m == 0 {
            return Series::zero(0);
        }
        let coeffs = (1..=m)
            .map(|i| &self.coeffs[i] * BigRational::from_integer(BigInt::from(i)))
            .collect();
        Series { coeffs }
    }

    /// Changes the order, dropping or zero-filling coefficients.
    pub fn with_order(&self, order: usize) -> Series {
        Series::from_coeffs(self.coeffs.clone(), order)
    }

    /// Growth rate used for tail estimates: the largest ratio between
    /// consecutive nonzero trailing coefficients, floored by `1/radius`.
    fn tail_ratio(&self, radius: &BigRational) -> (BigRational, BigRational) {
        let m = self.order();
        let window = (m / 4).clamp(2, 8).min(m);
        let floor = if radius.is_positive() { radius.recip() } else { BigRational::zero() };
        let mut ratio = floor;
        for i in m - window..m {
            let a = self.coeffs[i].abs();
            let b = self.coeffs[i + 1].abs();
            if !a.is_zero() && !b.is_zero() {
                let r = b / a;
                if r > ratio {
                    ratio = r;
                }
            }
        }
        // Dominating constant at index M: max |a_i| r^(M-i) over the window.
        let mut lead = BigRational::zero();
        let mut scale = BigRational::one();
        for i in (m - window..=m).rev() {
            let c = self.coeffs[i].abs() * &scale;
            if c > lead {
                lead = c;
            }
            scale *= &ratio;
        }
        (ratio, lead)
    }

    /// Exact partial sum at a rational point together with a rational bound
    /// on the tail, assuming coefficients keep growing at most geometrically
    /// with the trailing ratio.
    pub fn eval_exact(
        &self,
        t: &BigRational,
        radius: &BigRational,
    ) -> Result<(BigRational, BigRational), SeriesError> {
        let (ratio, lead) = self.tail_ratio(radius);
        let rt = &ratio * t.abs();
        if t.is_negative() || rt >= BigRational::one() {
            return Err(SeriesError::OutsideRadius {
                t: t.to_f64().unwrap_or(f64::NAN),
                radius: ratio.recip().to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut sum = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            sum = sum * t + c;
        }
        let tail = if lead.is_zero() {
            BigRational::zero()
        } else {
            lead * num_traits::pow(t.clone(), self.order()) * &rt / (BigRational::one() - &rt)
        };
        Ok((sum, tail))
    }

    /// Floating point evaluation with a tail bound; see [`Series::eval_exact`].
    pub fn eval(&self, t: f64, radius: f64) -> Result<Evaluation, SeriesError> {
        let rr = BigRational::from_float(radius).ok_or(SeriesError::OutsideRadius { t, radius })?;
        let (ratio, lead) = self.tail_ratio(&rr);
        let ratio = ratio.to_f64().unwrap_or(f64::INFINITY);
        let rt = ratio * t;
        if !(0.0..1.0).contains(&rt) || t < 0.0 {
            return Err(SeriesError::OutsideRadius { t, radius });
        }
        let mut value = 0.0;
        for c in self.coeffs.iter().rev() {
            value = value * t + c.to_f64().unwrap_or(f64::NAN);
        }
        let lead = lead.to_f64().unwrap_or(f64::INFINITY);
        let tail_bound = if lead == 0.0 {
            0.0
        } else {
            lead * t.powi(self.order() as i32) * rt / (1.0 - rt)
        };
        Ok(Evaluation { value, tail_bound })
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| format!("{}/{}", c.numer(), c.denom())).collect()
    }

    pub fn from_strings(items: &[String]) -> Result<Series, SeriesError> {
        let coeffs = items
            .iter()
            .map(|s| parse_rational(s).ok_or_else(|| SeriesError::Parse(s.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        if coeffs.is_empty() {
            return Err(SeriesError::Parse(String::new()));
        }
        let order = coeffs.len() - 1;
        Ok(Series::from_coeffs(coeffs, order))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_strings()).expect("string vector serializes")
    }

    pub fn from_json(text: &str) -> Result<Series, SeriesError> {
        let items: Vec<String> =
            serde_json::from_str(text).map_err(|e| SeriesError::Parse(e.to_string()))?;
        Self::from_strings(&items)
    }
}

pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n, d))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

/// Solves `N = z + H(N)` for the network generating function given the head
/// series `H` (which must start at `z^2`).
///
/// This is the fixpoint iteration `N <- z + H(N)` organised so that round `n`
/// settles the coefficient of `z^n`: once `[z^1..z^(n-1)] N` are final, the
/// coefficient `[z^n] H(N)` depends only on them. Powers of `N` are kept
/// incrementally, so the whole solve is cubic in the order.
pub fn solve_network_series(h: &Series) -> Result<Series, SeriesError> {
    solve_fixpoint(&BigRational::one(), h)
}

/// Solves `Y = c z + H(Y)` with `H` starting at `z^2`; the network series is
/// the case `c = 1`, the leaf-count generating function of a Galton-Watson
/// tree the case `c = P(no offspring)`.
pub fn solve_fixpoint(c: &BigRational, h: &Series) -> Result<Series, SeriesError> {
    let m = h.order();
    if !h.coeff(0).is_zero() || (m >= 1 && !h.coeff(1).is_zero()) {
        return Err(SeriesError::InvalidHeadSeries(
            "constant and linear coefficients must vanish".into(),
        ));
    }
    let mut n = zero_vec(m);
    if m >= 1 {
        n[1] = c.clone();
    }
    // pows[d][j] = [z^j] N^d, filled column by column.
    let mut pows: Vec<Vec<BigRational>> = vec![zero_vec(m); m + 1];
    if m >= 1 {
        pows[1][1] = c.clone();
    }
    for col in 2..=m {
        for d in 2..=col {
            let mut acc = BigRational::zero();
            for a in 1..=col - d + 1 {
                if !n[a].is_zero() && !pows[d - 1][col - a].is_zero() {
                    acc += &n[a] * &pows[d - 1][col - a];
                }
            }
            pows[d][col] = acc;
        }
        let mut c = BigRational::zero();
        for d in 2..=col {
            if !h.coeff(d).is_zero() {
                c += h.coeff(d) * &pows[d][col];
            }
        }
        n[col] = c.clone();
        pows[1][col] = c;
    }
    let n = Series { coeffs: n };
    let residual = n.sub(&Series::z(m).scale(c))?.sub(&h.compose(&n)?)?;
    if !residual.coeffs.iter().all(Zero::is_zero) {
        return Err(SeriesError::NonConvergence(m));
    }
    Ok(n)
}

/// `N - z - H(N)`, which vanishes up to the order for the true solution.
pub fn fixpoint_residual(h: &Series, n: &Series) -> Result<Series, SeriesError> {
    let composed = h.compose(n)?;
    n.sub(&Series::z(n.order()))?.sub(&composed)
}

/// `n! [z^n] N` as an integer (the labelled count).
pub fn labelled_count(n: &Series, size: usize) -> num_bigint::BigUint {
    let mut f = BigRational::from_integer(BigInt::one());
    for i in 2..=size {
        f *= BigRational::from_integer(BigInt::from(i));
    }
    let v = n.coeff(size) * f;
    assert!(v.is_integer(), "labelled count is not an integer");
    v.to_integer().to_biguint().expect("labelled counts are nonnegative")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn z_over_one_minus_z(m: usize) -> Series {
        let mut s = Series::geometric(m);
        s.set_coeff(0, BigRational::zero());
        s
    }

    #[test]
    fn product_of_geometric_tails() {
        let a = z_over_one_minus_z(4);
        let p = a.mul(&a).unwrap();
        assert_eq!(p, Series::from_integers(&[0, 0, 1, 2, 3], 4));
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let a = Series::z(4);
        let b = Series::z(5);
        assert_eq!(a.add(&b), Err(SeriesError::OrderMismatch(4, 5)));
        assert!(a.mul(&b).is_err());
        assert!(a.compose(&b).is_err());
    }

    #[test]
    fn compose_square_with_geometric_tail() {
        let f = Series::monomial(BigRational::one(), 2, 5);
        let g = z_over_one_minus_z(5);
        // (z/(1-z))^2 = sum (n-1) z^n
        assert_eq!(f.compose(&g).unwrap(), Series::from_integers(&[0, 0, 1, 2, 3, 4], 5));
    }

    #[test]
    fn compose_rejects_constant_inner() {
        let f = Series::z(3);
        assert_eq!(f.compose(&Series::one(3)), Err(SeriesError::NonzeroConstant));
    }

    #[test]
    fn derivative_lowers_order() {
        let s = Series::from_integers(&[1, 2, 3, 4], 3);
        let d = s.derivative();
        assert_eq!(d.order(), 2);
        assert_eq!(d, Series::from_integers(&[2, 6, 12], 2));
    }

    #[test]
    fn geometric_evaluation_has_tight_tail() {
        let s = Series::geometric(50);
        let e = s.eval(0.5, 1.0).unwrap();
        assert!((e.value - 2.0).abs() < 1e-15 + e.tail_bound);
        assert!(e.tail_bound > 0.0 && e.tail_bound < 1e-14);
        assert!(2.0 - e.value <= e.tail_bound * (1.0 + 1e-9));
    }

    #[test]
    fn evaluation_outside_radius_fails() {
        let s = Series::geometric(20);
        assert!(s.eval(1.2, 1.0).is_err());
    }

    #[test]
    fn tail_bound_shrinks_with_order() {
        let mut last = f64::INFINITY;
        for m in [20, 40, 80] {
            let e = Series::geometric(m).pow(2).eval(0.3, 1.0).unwrap();
            assert!(e.tail_bound < last);
            last = e.tail_bound;
        }
    }

    #[test]
    fn binary_trees_from_cherry_series() {
        let h = Series::monomial(r(1, 2), 2, 8);
        let n = solve_network_series(&h).unwrap();
        // Labelled rooted binary trees: (2n-3)!!
        let expected = [1u64, 1, 3, 15, 105, 945, 10395];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(labelled_count(&n, i + 1), (*e).into());
        }
    }

    #[test]
    fn invalid_head_series_rejected() {
        let h = Series::z(5);
        assert!(matches!(solve_network_series(&h), Err(SeriesError::InvalidHeadSeries(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = Series::from_coeffs(vec![r(0, 1), r(3, 2), r(-5, 7)], 2);
        assert_eq!(Series::from_json(&s.to_json()).unwrap(), s);
        assert_eq!(s.to_strings()[1], "3/2");
    }
}
