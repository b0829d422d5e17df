//! Head structures: the cherry and the simple networks obtained by blowing up
//! generator edges into paths with pendant leaves.
//!
//! A labelled head built from generator `g` is an assignment of leaf labels to
//! the sinks of `g`, of label sequences to its plain edges, and of unordered
//! pairs of label sequences (not both empty) to its multi-edge pairs. Two
//! assignments give the same network iff they differ by an automorphism of
//! `g`, so counts and sampling go through Burnside's lemma: the pairs
//! `(automorphism, fixed assignment)` are sampled uniformly, which makes the
//! orbit uniform. An automorphism fixes an assignment only if it fixes every
//! sink and pair and the plain edges it moves carry empty sequences.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::generators::{Generator, GeneratorTable};
use crate::network::{Adjacency, Network};
use crate::series::Series;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeadError {
    #[error("head structures need at least 2 leaves, got {0}")]
    DegreeTooSmall(usize),
    #[error("degree {d} exceeds the prepared maximum {max}")]
    DegreeTooLarge { d: usize, max: usize },
    #[error("enumeration budget of {0} structures exceeded")]
    BudgetExceeded(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HeadKind {
    Cherry,
    Simple {
        generator: usize,
        /// Subdivision count per plain edge.
        subdivisions: Vec<usize>,
        /// Subdivision counts of the two paths of each multi-edge pair.
        pair_splits: Vec<(usize, usize)>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadStructure {
    pub network: Network,
    pub kind: HeadKind,
}

impl HeadStructure {
    pub fn cherry() -> Self {
        HeadStructure { network: Network::cherry(), kind: HeadKind::Cherry }
    }

    pub fn n_leaves(&self) -> usize {
        self.network.n_leaves()
    }
}

/// Number of vertices a head adds beyond its root and its leaves.
pub fn head_surplus(h: &Network) -> usize {
    h.n_vertices() - 1 - h.n_leaves()
}

/// One Burnside term of the head series:
/// `coeff * z^sinks (1-z)^(-plain) P(z)^pairs` with
/// `P(z) = z/(1-z) + z^2/(2(1-z)^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTerm {
    pub coeff: BigRational,
    pub sinks: usize,
    pub plain: usize,
    pub pairs: usize,
}

/// The exponential generating series of head structures, `h(d) = H(k,d)/d!`.
#[derive(Clone, Debug)]
pub struct HeadWeights {
    pub k: usize,
    pub series: Series,
    pub terms: Vec<WeightTerm>,
    /// Coefficient of `z` in the term sum; removed from the series because a
    /// blob with a single exit is not allowed.
    pub linear: BigRational,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Series of `z^a (2 - z)^l (1 - z)^(-m)` to the given order.
fn term_series(a: usize, l: usize, m: usize, order: usize) -> Series {
    let mut poly = vec![BigInt::zero(); l + 1];
    for (b, c) in poly.iter_mut().enumerate() {
        let sign = if b % 2 == 0 { 1 } else { -1 };
        *c = binomial(l, b) * (BigInt::one() << (l - b)) * sign;
    }
    let mut coeffs = vec![BigRational::zero(); order + 1];
    for n in a..=order {
        let mut acc = BigInt::zero();
        for (b, c) in poly.iter().enumerate() {
            if b > n - a {
                break;
            }
            let r = n - a - b;
            let g = if m == 0 {
                if r == 0 { BigInt::one() } else { BigInt::zero() }
            } else {
                binomial(r + m - 1, m - 1)
            };
            acc += c * g;
        }
        coeffs[n] = BigRational::from_integer(acc);
    }
    Series::from_coeffs(coeffs, order)
}

fn grouped_terms(table: &GeneratorTable, identity_only: bool) -> Vec<WeightTerm> {
    let mut grouped: BTreeMap<(usize, usize, usize), BigRational> = BTreeMap::new();
    for e in &table.entries {
        let w = BigRational::new(BigInt::one(), BigInt::from(e.automorphism_order));
        if identity_only {
            *grouped.entry((e.sinks, e.plain, e.pairs)).or_insert_with(BigRational::zero) += &w;
            continue;
        }
        for fixed in &e.fixing_terms {
            *grouped.entry((e.sinks, fixed.len(), e.pairs)).or_insert_with(BigRational::zero) += &w;
        }
    }
    grouped
        .into_iter()
        .map(|((sinks, plain, pairs), coeff)| WeightTerm { coeff, sinks, plain, pairs })
        .collect()
}

fn sum_terms(terms: &[WeightTerm], order: usize) -> Series {
    let mut s = Series::zero(order);
    for t in terms {
        let scale = &t.coeff / BigRational::from_integer(BigInt::one() << t.pairs);
        let part = term_series(t.sinks + t.pairs, t.pairs, t.plain + 2 * t.pairs, order).scale(&scale);
        s = s.add(&part).expect("equal orders");
    }
    s
}

/// The head weight series of level k up to `order`, with the cherry term
/// `z^2/2` and the Burnside correction for generator symmetries.
pub fn head_weight_series(table: &GeneratorTable, order: usize) -> HeadWeights {
    let terms = grouped_terms(table, false);
    let mut series = sum_terms(&terms, order);
    let linear = if order >= 1 { series.coeff(1).clone() } else { BigRational::zero() };
    if order >= 1 {
        series.set_coeff(1, BigRational::zero());
    }
    if order >= 2 {
        let c2 = series.coeff(2) + BigRational::new(BigInt::one(), BigInt::from(2));
        series.set_coeff(2, c2);
    }
    HeadWeights { k: table.k, series, terms, linear }
}

/// The master sum taken literally, `z^2/2 + sum G/(i! j! l!) z^i (1-z)^(-j) P^l`,
/// without symmetry correction or removal of single-exit blobs. Kept to show
/// where it disagrees with the corrected series.
pub fn uncorrected_head_series(table: &GeneratorTable, order: usize) -> Series {
    let terms = grouped_terms(table, true);
    let mut series = sum_terms(&terms, order);
    if order >= 2 {
        let c2 = series.coeff(2) + BigRational::new(BigInt::one(), BigInt::from(2));
        series.set_coeff(2, c2);
    }
    series
}

impl HeadWeights {
    /// The same series recomputed to another truncation order.
    pub fn with_order(&self, order: usize) -> HeadWeights {
        let mut series = sum_terms(&self.terms, order);
        if order >= 1 {
            series.set_coeff(1, BigRational::zero());
        }
        if order >= 2 {
            let c2 = series.coeff(2) + BigRational::new(BigInt::one(), BigInt::from(2));
            series.set_coeff(2, c2);
        }
        HeadWeights { k: self.k, series, terms: self.terms.clone(), linear: self.linear.clone() }
    }

    pub fn h(&self, d: usize) -> &BigRational {
        self.series.coeff(d)
    }

    /// Exact value of the full (untruncated) series at a rational point
    /// `0 < t < 1`, from the closed form of each term.
    pub fn eval_closed(&self, t: &BigRational) -> BigRational {
        let one = BigRational::one();
        let inv = (&one - t).recip();
        let p = (rat(2) * t - t * t) * &inv * &inv / rat(2);
        let mut acc = t * t / rat(2) - &self.linear * t;
        for term in &self.terms {
            acc += &term.coeff
                * num_traits::pow(t.clone(), term.sinks)
                * num_traits::pow(inv.clone(), term.plain)
                * num_traits::pow(p.clone(), term.pairs);
        }
        acc
    }

    /// Exact derivative of the full series at `0 < t < 1`.
    pub fn derivative_closed(&self, t: &BigRational) -> BigRational {
        let one = BigRational::one();
        let inv = (&one - t).recip();
        let p = (rat(2) * t - t * t) * &inv * &inv / rat(2);
        let dlog_p = t.recip() - (rat(2) - t).recip() + rat(2) * &inv;
        let mut acc = t.clone() - &self.linear;
        for term in &self.terms {
            let f = &term.coeff
                * num_traits::pow(t.clone(), term.sinks)
                * num_traits::pow(inv.clone(), term.plain)
                * num_traits::pow(p.clone(), term.pairs);
            let dlog = rat(term.sinks as i64) * t.recip()
                + rat(term.plain as i64) * &inv
                + rat(term.pairs as i64) * &dlog_p;
            acc += f * dlog;
        }
        acc
    }

    /// Exact second derivative of the full series at `0 < t < 1`.
    pub fn second_derivative_closed(&self, t: &BigRational) -> BigRational {
        let one = BigRational::one();
        let inv = (&one - t).recip();
        let p = (rat(2) * t - t * t) * &inv * &inv / rat(2);
        let rt = t.recip();
        let r2 = (rat(2) - t).recip();
        let dlog_p = &rt - &r2 + rat(2) * &inv;
        let d2log_p = -(&rt * &rt) - &r2 * &r2 + rat(2) * &inv * &inv;
        let mut acc = one;
        for term in &self.terms {
            let f = &term.coeff
                * num_traits::pow(t.clone(), term.sinks)
                * num_traits::pow(inv.clone(), term.plain)
                * num_traits::pow(p.clone(), term.pairs);
            let s = rat(term.sinks as i64);
            let j = rat(term.plain as i64);
            let l = rat(term.pairs as i64);
            let dlog = &s * &rt + &j * &inv + &l * &dlog_p;
            let d2log = -(&s * &rt * &rt) + &j * &inv * &inv + &l * &d2log_p;
            acc += f * (&dlog * &dlog + d2log);
        }
        acc
    }

    /// `{"k": k, "h": {"d": "num/den", ...}}` for the nonzero coefficients.
    pub fn to_json(&self) -> String {
        let h: BTreeMap<usize, String> = self
            .series
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(d, c)| (d, format!("{}/{}", c.numer(), c.denom())))
            .collect();
        serde_json::json!({ "k": self.k, "h": h }).to_string()
    }
}

/// Generator data prepared for building heads.
#[derive(Clone, Debug)]
struct Shape {
    n_vertices: usize,
    sinks: Vec<usize>,
    plain: Vec<(usize, usize)>,
    pairs: Vec<(usize, usize)>,
}

impl Shape {
    fn new(g: &Generator) -> Self {
        Shape { n_vertices: g.n_vertices, sinks: g.sinks(), plain: g.plain_edges(), pairs: g.pairs() }
    }

    /// Head network for the given subdivision counts; leaves are numbered
    /// sinks first, then along plain edges, then along pair paths, and leaf
    /// number `t` receives label `labels[t]`.
    fn build(&self, subdivisions: &[usize], splits: &[(usize, usize)], labels: &[u32]) -> Network {
        let mut children: Vec<Adjacency> = vec![Adjacency::new(); self.n_vertices];
        let mut lab = vec![0u32; self.n_vertices];
        let mut next_leaf = 0usize;
        let mut attach_leaf = |children: &mut Vec<Adjacency>, lab: &mut Vec<u32>, parent: usize| {
            children.push(Adjacency::new());
            lab.push(labels[next_leaf]);
            next_leaf += 1;
            let id = children.len() as u32 - 1;
            children[parent].push(id);
        };
        for &s in &self.sinks {
            attach_leaf(&mut children, &mut lab, s);
        }
        let mut path = |children: &mut Vec<Adjacency>, lab: &mut Vec<u32>, u: usize, v: usize, m: usize| {
            let mut prev = u;
            for _ in 0..m {
                children.push(Adjacency::new());
                lab.push(0);
                let x = children.len() - 1;
                children[prev].push(x as u32);
                attach_leaf(children, lab, x);
                prev = x;
            }
            children[prev].push(v as u32);
        };
        for (&(u, v), &m) in self.plain.iter().zip(subdivisions) {
            path(&mut children, &mut lab, u, v, m);
        }
        for (&(u, v), &(a, b)) in self.pairs.iter().zip(splits) {
            path(&mut children, &mut lab, u, v, a);
            path(&mut children, &mut lab, u, v, b);
        }
        Network::from_adjacency(children, lab).expect("generator blow-ups are valid networks")
    }
}

/// Suffix tables for distributing `r` subdivision leaves over `a` plain edges
/// (weight 1 per size) followed by `b` pairs (weight `m + 1` per size `m >= 1`).
#[derive(Clone, Debug)]
struct Compositions {
    max_r: usize,
    /// table[a][b][r]
    table: Vec<Vec<Vec<u128>>>,
}

impl Compositions {
    fn new(max_a: usize, max_b: usize, max_r: usize) -> Self {
        let mut table = vec![vec![vec![0u128; max_r + 1]; max_b + 1]; max_a + 1];
        table[0][0][0] = 1;
        for b in 1..=max_b {
            for r in 0..=max_r {
                let mut acc = 0u128;
                for m in 1..=r {
                    acc = acc
                        .checked_add((m as u128 + 1).checked_mul(table[0][b - 1][r - m]).expect("overflow"))
                        .expect("composition count overflow");
                }
                table[0][b][r] = acc;
            }
        }
        for a in 1..=max_a {
            for b in 0..=max_b {
                let mut acc = 0u128;
                for r in 0..=max_r {
                    acc = acc.checked_add(table[a - 1][b][r]).expect("composition count overflow");
                    table[a][b][r] = acc;
                }
            }
        }
        Compositions { max_r, table }
    }

    fn count(&self, a: usize, b: usize, r: usize) -> u128 {
        if r > self.max_r {
            return 0;
        }
        self.table[a][b][r]
    }

    /// Samples sizes for `a` plain slots then `b` pair slots summing to `r`.
    fn sample<R: Rng + ?Sized>(&self, a: usize, b: usize, mut r: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let mut plain = Vec::with_capacity(a);
        for s in (0..a).rev() {
            let total = self.table[s + 1][b][r];
            let mut u = rng.random_range(0..total);
            let mut pick = r;
            for m in 0..=r {
                let w = self.table[s][b][r - m];
                if u < w {
                    pick = m;
                    break;
                }
                u -= w;
            }
            plain.push(pick);
            r -= pick;
        }
        let mut pairs = Vec::with_capacity(b);
        for s in (0..b).rev() {
            let total = self.table[0][s + 1][r];
            let mut u = rng.random_range(0..total);
            let mut pick = r;
            for m in 1..=r {
                let w = (m as u128 + 1) * self.table[0][s][r - m];
                if u < w {
                    pick = m;
                    break;
                }
                u -= w;
            }
            pairs.push(pick);
            r -= pick;
        }
        debug_assert_eq!(r, 0);
        (plain, pairs)
    }
}

#[derive(Clone, Debug)]
struct Term {
    generator: usize,
    fixed_plain: Vec<usize>,
    /// scale / (2^pairs |Aut|)
    factor: u128,
}

#[derive(Clone, Debug, Default)]
struct DegreeLaw {
    /// Cumulative weights over [cherry, terms...].
    cumulative: Vec<u128>,
    /// Same, each weight multiplied by the surplus of the resulting heads.
    surplus_cumulative: Vec<u128>,
}

/// Exact counting and uniform sampling of heads for every degree up to a
/// prepared maximum.
#[derive(Clone, Debug)]
pub struct HeadCatalog {
    pub k: usize,
    generators: Vec<Generator>,
    shapes: Vec<Shape>,
    terms: Vec<Term>,
    scale: u128,
    compositions: Compositions,
    laws: Vec<DegreeLaw>,
}

fn pick(cumulative: &[u128], u: u128) -> usize {
    cumulative.partition_point(|&c| c <= u)
}

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |a, b| a * b)
}

impl HeadCatalog {
    pub fn new(table: &GeneratorTable, d_max: usize) -> Self {
        let d_max = d_max.max(2);
        let generators: Vec<Generator> = table.entries.iter().map(|e| e.generator.clone()).collect();
        let shapes: Vec<Shape> = generators.iter().map(Shape::new).collect();
        let max_pairs = table.entries.iter().map(|e| e.pairs).max().unwrap_or(0);
        let max_plain = table.entries.iter().map(|e| e.plain).max().unwrap_or(0);
        let lcm = table.entries.iter().fold(1u128, |l, e| l.lcm(&(e.automorphism_order as u128)));
        let scale = lcm << (max_pairs + 1);
        let mut terms = Vec::new();
        for (gi, e) in table.entries.iter().enumerate() {
            for fixed in &e.fixing_terms {
                terms.push(Term {
                    generator: gi,
                    fixed_plain: fixed.clone(),
                    factor: scale / ((1u128 << e.pairs) * e.automorphism_order as u128),
                });
            }
        }
        let compositions = Compositions::new(max_plain, max_pairs, d_max);
        let mut laws = vec![DegreeLaw::default(); d_max + 1];
        for (d, law) in laws.iter_mut().enumerate().skip(2) {
            let mut acc = if d == 2 { scale / 2 } else { 0 };
            let mut sacc = 0u128;
            law.cumulative.push(acc);
            law.surplus_cumulative.push(sacc);
            for t in &terms {
                let e = &table.entries[t.generator];
                let w = if d >= e.sinks {
                    compositions.count(t.fixed_plain.len(), e.pairs, d - e.sinks) * t.factor
                } else {
                    0
                };
                let surplus = (e.generator.n_vertices + d - e.sinks - 1) as u128;
                acc = acc.checked_add(w).expect("head weight overflow");
                sacc = sacc.checked_add(w * surplus).expect("head weight overflow");
                law.cumulative.push(acc);
                law.surplus_cumulative.push(sacc);
            }
        }
        HeadCatalog { k: table.k, generators, shapes, terms, scale, compositions, laws }
    }

    pub fn d_max(&self) -> usize {
        self.laws.len() - 1
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    fn law(&self, d: usize) -> Result<&DegreeLaw, HeadError> {
        if d < 2 {
            return Err(HeadError::DegreeTooSmall(d));
        }
        self.laws.get(d).ok_or(HeadError::DegreeTooLarge { d, max: self.d_max() })
    }

    /// `|H[d]|`, the number of labelled heads on `d` leaves.
    pub fn count(&self, d: usize) -> Result<BigUint, HeadError> {
        let law = self.law(d)?;
        let total = BigUint::from(*law.cumulative.last().unwrap());
        let (q, r) = (factorial(d) * total).div_rem(&BigUint::from(self.scale));
        assert!(r.is_zero(), "labelled head count is not an integer");
        Ok(q)
    }

    /// Mean surplus of a uniform head on `d` leaves.
    pub fn mean_surplus(&self, d: usize) -> Result<f64, HeadError> {
        let law = self.law(d)?;
        let total = *law.cumulative.last().unwrap() as f64;
        Ok(*law.surplus_cumulative.last().unwrap() as f64 / total)
    }

    /// Uniform head structure on `d` leaves.
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Result<HeadStructure, HeadError> {
        let law = self.law(d)?;
        let u = rng.random_range(0..*law.cumulative.last().unwrap());
        Ok(self.build_choice(pick(&law.cumulative, u), d, rng))
    }

    /// Head on `d` leaves drawn with probability proportional to its surplus.
    pub fn sample_surplus_biased<R: Rng + ?Sized>(
        &self,
        d: usize,
        rng: &mut R,
    ) -> Result<HeadStructure, HeadError> {
        let law = self.law(d)?;
        let total = *law.surplus_cumulative.last().unwrap();
        if total == 0 {
            return Err(HeadError::DegreeTooSmall(d));
        }
        let u = rng.random_range(0..total);
        Ok(self.build_choice(pick(&law.surplus_cumulative, u), d, rng))
    }

    fn build_choice<R: Rng + ?Sized>(&self, choice: usize, d: usize, rng: &mut R) -> HeadStructure {
        let mut labels: Vec<u32> = (1..=d as u32).collect();
        labels.shuffle(rng);
        if choice == 0 {
            let network = Network::from_edges(3, &[(0, 1), (0, 2)], &[(1, labels[0]), (2, labels[1])])
                .expect("cherry is valid");
            return HeadStructure { network, kind: HeadKind::Cherry };
        }
        let term = &self.terms[choice - 1];
        let shape = &self.shapes[term.generator];
        let r = d - shape.sinks.len();
        let (fixed_sizes, pair_sizes) =
            self.compositions.sample(term.fixed_plain.len(), shape.pairs.len(), r, rng);
        let mut subdivisions = vec![0usize; shape.plain.len()];
        for (&idx, &m) in term.fixed_plain.iter().zip(&fixed_sizes) {
            subdivisions[idx] = m;
        }
        let pair_splits: Vec<(usize, usize)> = pair_sizes
            .iter()
            .map(|&m| {
                let a = rng.random_range(0..=m);
                (a, m - a)
            })
            .collect();
        let network = shape.build(&subdivisions, &pair_splits, &labels);
        HeadStructure {
            network,
            kind: HeadKind::Simple { generator: term.generator, subdivisions, pair_splits },
        }
    }

    /// Number of weighted shapes [`HeadCatalog::for_each_shape`] visits for `d`.
    pub fn shape_count(&self, d: usize) -> Result<u128, HeadError> {
        self.law(d)?;
        let mut total = u128::from(d == 2);
        for term in &self.terms {
            let shape = &self.shapes[term.generator];
            if d < shape.sinks.len() {
                continue;
            }
            let a = term.fixed_plain.len();
            let b = shape.pairs.len();
            // pair slots of size m carry weight m + 1, one per split
            total += self.compositions.count(a, b, d - shape.sinks.len());
        }
        Ok(total)
    }

    /// Visits every unlabelled head shape on `d` leaves (leaves labelled in
    /// construction order) with its integer weight; a uniform labelled head
    /// has the shape of a weight-proportional draw. Weights sum to the same
    /// total used by [`HeadCatalog::sample`].
    pub fn for_each_shape<F: FnMut(u128, &Network)>(&self, d: usize, mut visit: F) -> Result<(), HeadError> {
        self.law(d)?;
        let labels: Vec<u32> = (1..=d as u32).collect();
        if d == 2 {
            visit(self.scale / 2, &Network::cherry());
        }
        for term in &self.terms {
            let shape = &self.shapes[term.generator];
            if d < shape.sinks.len() {
                continue;
            }
            let r = d - shape.sinks.len();
            let slots = term.fixed_plain.len() + shape.pairs.len();
            let mut sizes = vec![0usize; slots];
            let mut emit = |sizes: &[usize]| {
                let (fixed, pairs) = sizes.split_at(term.fixed_plain.len());
                let mut subdivisions = vec![0usize; shape.plain.len()];
                for (&idx, &m) in term.fixed_plain.iter().zip(fixed) {
                    subdivisions[idx] = m;
                }
                let mut splits: Vec<(usize, usize)> = pairs.iter().map(|&m| (0, m)).collect();
                loop {
                    let net = shape.build(&subdivisions, &splits, &labels);
                    visit(term.factor, &net);
                    // odometer over the splits of every pair
                    let mut i = 0;
                    while i < splits.len() {
                        if splits[i].0 < pairs[i] {
                            splits[i].0 += 1;
                            splits[i].1 = pairs[i] - splits[i].0;
                            break;
                        }
                        splits[i] = (0, pairs[i]);
                        i += 1;
                    }
                    if i == splits.len() {
                        break;
                    }
                }
            };
            distribute(&mut sizes, 0, r, term.fixed_plain.len(), &mut emit);
        }
        Ok(())
    }

    /// Every labelled head on `d` leaves, found by building all blow-ups under
    /// all labellings and removing isomorphic duplicates.
    pub fn enumerate(&self, d: usize, budget: usize) -> Result<Vec<HeadStructure>, HeadError> {
        enumerate_heads(&self.generators, d, budget)
    }
}

/// Calls `emit` for every assignment of sizes summing to `r`, slots before
/// `plain` taking any size and later slots (pairs) at least 1.
fn distribute<F: FnMut(&[usize])>(sizes: &mut [usize], slot: usize, r: usize, plain: usize, emit: &mut F) {
    if slot == sizes.len() {
        if r == 0 {
            emit(sizes);
        }
        return;
    }
    let min = if slot < plain { 0 } else { 1 };
    for m in min..=r {
        sizes[slot] = m;
        distribute(sizes, slot + 1, r - m, plain, emit);
    }
    sizes[slot] = 0;
}

fn compositions_of(total: usize, parts: usize, min: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in min..=total {
        for mut rest in compositions_of(total - first, parts - 1, min) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut perm: Vec<u32> = (1..=n as u32).collect();
    loop {
        out.push(perm.clone());
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

/// All labelled heads on `d` leaves for the given generators (plus the cherry
/// when `d = 2`), deduplicated up to label-preserving isomorphism.
pub fn enumerate_heads(gens: &[Generator], d: usize, budget: usize) -> Result<Vec<HeadStructure>, HeadError> {
    if d < 2 {
        return Err(HeadError::DegreeTooSmall(d));
    }
    let perms = permutations(d);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut built = 0usize;
    let mut push = |h: HeadStructure, out: &mut Vec<HeadStructure>| -> Result<(), HeadError> {
        built += 1;
        if built > budget {
            return Err(HeadError::BudgetExceeded(budget));
        }
        if seen.insert(h.network.canonical_code()) {
            out.push(h);
        }
        Ok(())
    };
    if d == 2 {
        push(HeadStructure::cherry(), &mut out)?;
    }
    for (gi, g) in gens.iter().enumerate() {
        let shape = Shape::new(g);
        let Some(r) = d.checked_sub(shape.sinks.len()) else { continue };
        let slots = shape.plain.len() + shape.pairs.len();
        for comp in compositions_of(r, slots, 0) {
            let (plain, pairs) = comp.split_at(shape.plain.len());
            if pairs.iter().any(|&m| m == 0) {
                continue;
            }
            let split_choices: Vec<Vec<(usize, usize)>> = pairs
                .iter()
                .fold(vec![Vec::new()], |acc, &m| {
                    let mut next = Vec::new();
                    for prefix in &acc {
                        for a in 0..=m {
                            let mut p = prefix.clone();
                            p.push((a, m - a));
                            next.push(p);
                        }
                    }
                    next
                });
            for splits in &split_choices {
                for labels in &perms {
                    let network = shape.build(plain, splits, labels);
                    let kind = HeadKind::Simple {
                        generator: gi,
                        subdivisions: plain.to_vec(),
                        pair_splits: splits.clone(),
                    };
                    push(HeadStructure { network, kind }, &mut out)?;
                }
            }
        }
    }
    Ok(out)
}

/// `h` as floating point values, for diagnostics.
pub fn weights_f64(h: &HeadWeights) -> Vec<f64> {
    h.series.coeffs().iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use crate::generators::{enumerate_generators, tabulate_generators};
    use crate::series::labelled_count;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(k: usize) -> GeneratorTable {
        tabulate_generators(k, &enumerate_generators(k).unwrap()).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn empty_table_gives_cherry_only() {
        let empty = tabulate_generators(1, &[]).unwrap();
        let h = head_weight_series(&empty, 6);
        assert_eq!(h.series, Series::monomial(r(1, 2), 2, 6));
    }

    #[test]
    fn level_one_weights() {
        let h = head_weight_series(&table(1), 8);
        assert!(h.h(0).is_zero() && h.h(1).is_zero());
        assert_eq!(h.h(2), &r(3, 2));
        assert_eq!(h.h(3), &r(3, 2));
        assert_eq!(h.h(4), &r(2, 1));
    }

    #[test]
    fn level_two_weights_are_integral_counts() {
        let h = head_weight_series(&table(2), 10);
        for d in 2..=10 {
            let count = h.h(d) * BigRational::from_integer(BigInt::from(factorial(d)));
            assert!(count.is_integer(), "d={d}");
        }
    }

    #[test]
    fn uncorrected_sum_is_not_a_counting_series() {
        let s = uncorrected_head_series(&table(2), 6);
        let fractional = (2..=6).any(|d| {
            !(s.coeff(d) * BigRational::from_integer(BigInt::from(factorial(d)))).is_integer()
        });
        assert!(fractional);
    }

    #[test]
    fn catalog_counts_match_series() {
        for k in 1..=3 {
            let t = table(k);
            let h = head_weight_series(&t, 14);
            let cat = HeadCatalog::new(&t, 14);
            for d in 2..=14 {
                let from_series = labelled_count(&h.series, d);
                assert_eq!(cat.count(d).unwrap(), from_series, "k={k} d={d}");
            }
        }
    }

    #[test]
    fn enumeration_matches_series() {
        for k in 1..=2 {
            let t = table(k);
            let h = head_weight_series(&t, 6);
            let gens: Vec<Generator> = t.entries.iter().map(|e| e.generator.clone()).collect();
            for d in 2..=4 {
                let heads = enumerate_heads(&gens, d, 1_000_000).unwrap();
                assert_eq!(BigUint::from(heads.len()), labelled_count(&h.series, d), "k={k} d={d}");
                for hs in &heads {
                    assert!(hs.network.is_head_structure(k));
                    assert!(hs.network.n_vertices() <= 2 * (d + k));
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_series() {
        let h = head_weight_series(&table(2), 200);
        let t = r(3, 10);
        let (partial, tail) = h.series.eval_exact(&t, &BigRational::one()).unwrap();
        let exact = h.eval_closed(&t);
        let diff = (exact - partial).abs();
        assert!(diff <= tail);
        let (dpartial, dtail) = h.series.derivative().eval_exact(&t, &BigRational::one()).unwrap();
        assert!((h.derivative_closed(&t) - dpartial).abs() <= dtail);
    }

    #[test]
    fn budget_is_enforced() {
        let gens = enumerate_generators(1).unwrap();
        assert_eq!(enumerate_heads(&gens, 4, 10), Err(HeadError::BudgetExceeded(10)));
        assert_eq!(enumerate_heads(&gens, 1, 10), Err(HeadError::DegreeTooSmall(1)));
    }

    #[test]
    fn minimal_level_one_head_surplus() {
        let gens = enumerate_generators(1).unwrap();
        let heads = enumerate_heads(&gens, 2, 100).unwrap();
        let simple: Vec<_> = heads.iter().filter(|h| !h.network.is_cherry()).collect();
        assert_eq!(simple.len(), 2);
        for h in simple {
            assert_eq!(h.network.n_vertices(), 5);
            assert_eq!(head_surplus(&h.network), 2);
        }
        assert_eq!(head_surplus(&Network::cherry()), 0);
    }

    #[test]
    fn samples_are_valid_heads() {
        let t = table(3);
        let cat = HeadCatalog::new(&t, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 2..=30 {
            for _ in 0..20 {
                let h = cat.sample(d, &mut rng).unwrap();
                assert_eq!(h.n_leaves(), d);
                assert!(h.network.is_head_structure(3));
                assert!(h.network.n_vertices() <= 2 * (d + 3));
                let b = cat.sample_surplus_biased(d, &mut rng).unwrap();
                assert!(head_surplus(&b.network) > 0);
            }
        }
        assert!(cat.sample(1, &mut rng).is_err());
        assert!(cat.sample(31, &mut rng).is_err());
    }

    /// Pearson chi-square of sampled heads against the enumerated universe.
    fn uniformity_p_value(k: usize, d: usize, draws: usize, seed: u64) -> f64 {
        let t = table(k);
        let cat = HeadCatalog::new(&t, d);
        let universe = cat.enumerate(d, 1_000_000).unwrap();
        let index: BTreeMap<Vec<u64>, usize> =
            universe.iter().enumerate().map(|(i, h)| (h.network.canonical_code(), i)).collect();
        assert_eq!(index.len(), universe.len());
        let mut counts = vec![0usize; universe.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..draws {
            let h = cat.sample(d, &mut rng).unwrap();
            counts[index[&h.network.canonical_code()]] += 1;
        }
        let expected = draws as f64 / counts.len() as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let dof = (counts.len() - 1) as f64;
        statrs::function::gamma::gamma_ur(dof / 2.0, stat / 2.0)
    }

    #[test]
    fn sampling_is_uniform_over_enumerated_heads() {
        assert!(uniformity_p_value(1, 2, 20_000, 11) > 1e-3);
        assert!(uniformity_p_value(1, 3, 40_000, 12) > 1e-3);
        assert!(uniformity_p_value(2, 3, 60_000, 13) > 1e-3);
    }

    #[test]
    fn weights_fit_in_fixed_width_up_to_large_degrees() {
        let cat = HeadCatalog::new(&table(3), 150);
        assert!(cat.count(150).unwrap() > BigUint::zero());
    }

    #[test]
    fn second_derivative_matches_series() {
        let h = head_weight_series(&table(2), 200);
        let t = r(1, 4);
        let (partial, tail) = h.series.derivative().derivative().eval_exact(&t, &BigRational::one()).unwrap();
        assert!((h.second_derivative_closed(&t) - partial).abs() <= tail);
    }

    #[test]
    fn shape_weights_sum_to_sampling_total() {
        for k in 1..=2 {
            let t = table(k);
            let cat = HeadCatalog::new(&t, 7);
            for d in 2..=7 {
                let mut total = 0u128;
                let mut visits = 0u128;
                cat.for_each_shape(d, |w, net| {
                    assert_eq!(net.n_leaves(), d);
                    total += w;
                    visits += 1;
                })
                .unwrap();
                assert_eq!(visits, cat.shape_count(d).unwrap());
                let labelled = factorial(d) * BigUint::from(total) / BigUint::from(cat.scale);
                assert_eq!(labelled, cat.count(d).unwrap());
            }
        }
    }
}
