//! Uniform random level-k networks: a Galton-Watson tree conditioned on its
//! number of leaves, a uniform head structure at every inner vertex, a
//! uniform leaf labelling, then the blow-up.

mod limits;
mod plane;

pub use limits::{LocalView, MarkedTree};
pub use plane::{NotATree, PlaneTree};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::generators::{enumerate_generators, tabulate_generators, GeneratorError, GeneratorTable};
use crate::heads::{head_weight_series, HeadCatalog, HeadError, HeadStructure};
use crate::network::{BlowUp, DecoratedTree, Network, TreeNode};
use crate::offspring::{decimal_tolerance, OffspringError, OffspringModel};

/// Default truncation order of the head series.
pub const DEFAULT_ORDER: usize = 64;
/// Default precision of the critical point, in decimal digits.
pub const DEFAULT_DIGITS: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("no tree with {n} leaves after {attempts} attempts")]
    RejectionsExhausted { n: usize, attempts: usize },
    #[error("tree exceeded {0} vertices")]
    TooLarge(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Offspring(#[from] OffspringError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleConfig {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub max_rejections: usize,
    pub local_depth: usize,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n == 0 {
            return Err(SamplerError::Config("n must be at least 1".into()));
        }
        if self.max_rejections == 0 {
            return Err(SamplerError::Config("max_rejections must be at least 1".into()));
        }
        Ok(())
    }
}

/// A sampled network together with the decorated tree it came from.
#[derive(Clone, Debug)]
pub struct SampledNetwork {
    pub tree: PlaneTree,
    pub decorated: DecoratedTree,
    pub network: Network,
    /// Network vertex of each tree vertex (preorder index).
    pub vertex_of_node: Vec<u32>,
    /// Surplus vertices contributed by each tree vertex's decoration.
    pub surplus: Vec<Vec<u32>>,
}

impl SampledNetwork {
    /// `(outdegree, head vertex count)` for every inner tree vertex.
    pub fn head_sizes(&self) -> Vec<(usize, usize)> {
        self.decorated
            .nodes()
            .iter()
            .filter_map(|n| n.head.as_ref().map(|h| (n.children.len(), h.n_vertices())))
            .collect()
    }
}

/// Everything needed to sample level-k objects.
#[derive(Clone, Debug)]
pub struct LevelSampler {
    pub table: GeneratorTable,
    pub model: OffspringModel,
    pub heads: HeadCatalog,
}

impl LevelSampler {
    pub fn new(k: usize) -> Result<Self, SamplerError> {
        let table = tabulate_generators(k, &enumerate_generators(k)?)?;
        let weights = head_weight_series(&table, DEFAULT_ORDER);
        let model = OffspringModel::build(&weights, &decimal_tolerance(DEFAULT_DIGITS))?;
        let heads = HeadCatalog::new(&table, model.support_max());
        Ok(LevelSampler { table, model, heads })
    }

    pub fn k(&self) -> usize {
        self.table.k
    }

    /// Ten times the expected number of plain rejection attempts for `n`
    /// leaves, from `P(L = n) ~ sqrt(p0 / (2 pi Var)) n^(-3/2)`.
    pub fn default_max_rejections(&self, n: usize) -> usize {
        let m = &self.model;
        let c = (m.p0() / (2.0 * std::f64::consts::PI * m.variance)).sqrt();
        (10.0 * (n as f64).powf(1.5) / c).ceil() as usize + 100
    }

    /// An unconditioned Galton-Watson tree, abandoned beyond `max_vertices`.
    pub fn sample_gw_tree<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_vertices: usize,
    ) -> Result<PlaneTree, SamplerError> {
        let mut degrees = Vec::new();
        let mut open = 1usize;
        while open > 0 {
            if degrees.len() >= max_vertices {
                return Err(SamplerError::TooLarge(max_vertices));
            }
            let d = self.model.sample(rng);
            degrees.push(d as u32);
            open = open + d - 1;
        }
        Ok(PlaneTree::from_degrees_unchecked(degrees))
    }

    /// Plain rejection: grow unconditioned trees in preorder and abort as
    /// soon as the leaves found plus the open slots exceed `n`. Returns the
    /// tree and the number of attempts used.
    pub fn sample_conditioned_tree_naive<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        max_rejections: usize,
    ) -> Result<(PlaneTree, usize), SamplerError> {
        if n == 0 {
            return Err(SamplerError::Config("n must be at least 1".into()));
        }
        let mut degrees = Vec::new();
        'attempt: for attempt in 1..=max_rejections {
            degrees.clear();
            let mut open = 1usize;
            let mut leaves = 0usize;
            while open > 0 {
                let d = self.model.sample(rng);
                degrees.push(d as u32);
                open = open + d - 1;
                if d == 0 {
                    leaves += 1;
                }
                // every open slot ends in at least one leaf
                if leaves + open > n {
                    continue 'attempt;
                }
            }
            if leaves == n {
                return Ok((PlaneTree::from_degrees_unchecked(degrees), attempt));
            }
        }
        Err(SamplerError::RejectionsExhausted { n, attempts: max_rejections })
    }

    /// Exact sampler for the tree conditioned on `n` leaves: draw i.i.d.
    /// outdegrees until the `n`-th zero, accept iff the sum of `d - 1` is
    /// `-1`, and rotate to the unique valid preorder sequence. Every cyclic
    /// class with `n` zeros has exactly `n` rotations ending in a zero, so the
    /// accepted tree has probability proportional to `P(tau = T)`.
    pub fn sample_conditioned_tree<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        max_rejections: usize,
    ) -> Result<PlaneTree, SamplerError> {
        if n == 0 {
            return Err(SamplerError::Config("n must be at least 1".into()));
        }
        let target = (n - 1) as i64;
        let mut word: Vec<u32> = Vec::with_capacity(3 * n);
        'attempt: for _ in 0..max_rejections {
            word.clear();
            let mut zeros = 0usize;
            // sum of (d - 1) over the nonzero entries
            let mut excess = 0i64;
            while zeros < n {
                let d = self.model.sample(rng);
                word.push(d as u32);
                if d == 0 {
                    zeros += 1;
                } else {
                    excess += d as i64 - 1;
                    if excess > target {
                        continue 'attempt;
                    }
                }
            }
            if excess == target {
                return Ok(PlaneTree::from_cyclic_shift(&word).expect("sum of d - 1 is -1"));
            }
        }
        Err(SamplerError::RejectionsExhausted { n, attempts: max_rejections })
    }

    /// A uniform head on the outdegree of every inner vertex.
    pub fn decorate<R: Rng + ?Sized>(
        &self,
        tree: &PlaneTree,
        rng: &mut R,
    ) -> Result<Vec<Option<HeadStructure>>, SamplerError> {
        tree.degrees()
            .iter()
            .map(|&d| if d == 0 { Ok(None) } else { self.heads.sample(d as usize, rng).map(Some) })
            .collect::<Result<_, _>>()
            .map_err(SamplerError::from)
    }

    /// A uniform level-k network on the labels `1..=n`.
    pub fn sample_network<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        max_rejections: usize,
    ) -> Result<SampledNetwork, SamplerError> {
        let tree = self.sample_conditioned_tree(n, rng, max_rejections)?;
        let heads = self.decorate(&tree, rng)?;
        let mut labels: Vec<u32> = (1..=n as u32).collect();
        labels.shuffle(rng);
        Ok(assemble(tree, heads, &labels))
    }
}

/// Blows up a plane tree with the given decorations; leaf `i` in preorder
/// receives `labels[i]`.
pub(crate) fn assemble(tree: PlaneTree, heads: Vec<Option<HeadStructure>>, labels: &[u32]) -> SampledNetwork {
    let children = tree.children();
    let mut next_leaf = 0;
    let nodes: Vec<TreeNode> = children
        .into_iter()
        .zip(heads)
        .map(|(cs, head)| match head {
            Some(h) => TreeNode::internal(cs, h.network),
            None => {
                next_leaf += 1;
                TreeNode::leaf(labels[next_leaf - 1])
            }
        })
        .collect();
    let decorated = DecoratedTree::new_unchecked(true, nodes);
    let BlowUp { network, vertex_of_node, surplus } = decorated.blow_up();
    SampledNetwork { tree, decorated, network, vertex_of_node, surplus }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::leaf_count_series;
    use num_traits::ToPrimitive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn p_value(observed: &[usize], probs: &[f64]) -> f64 {
        let total: usize = observed.iter().sum();
        let stat: f64 = observed
            .iter()
            .zip(probs)
            .map(|(&o, &p)| {
                let e = p * total as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        let dof = (observed.len() - 1) as f64;
        statrs::function::gamma::gamma_ur(dof / 2.0, stat / 2.0)
    }

    /// All plane trees with `n` leaves and no vertex of outdegree 1, with
    /// their probability under the offspring law.
    fn plane_trees(s: &LevelSampler, n: usize) -> Vec<(PlaneTree, f64)> {
        fn grow(prefix: &mut Vec<u32>, open: usize, leaves: usize, n: usize, max_d: usize, out: &mut Vec<Vec<u32>>) {
            if open == 0 {
                if leaves == n {
                    out.push(prefix.clone());
                }
                return;
            }
            if leaves + open > n {
                return;
            }
            for d in std::iter::once(0).chain(2..=max_d) {
                prefix.push(d as u32);
                grow(prefix, open + d - 1, leaves + usize::from(d == 0), n, max_d, out);
                prefix.pop();
            }
        }
        let mut words = Vec::new();
        grow(&mut Vec::new(), 1, 0, n, n, &mut words);
        words
            .into_iter()
            .map(|w| {
                let p = w.iter().map(|&d| s.model.pmf[d as usize]).product();
                (PlaneTree::from_degrees(w).unwrap(), p)
            })
            .collect()
    }

    #[test]
    fn both_conditioned_samplers_follow_the_exact_law() {
        let s = LevelSampler::new(1).unwrap();
        for n in [3usize, 4] {
            let universe = plane_trees(&s, n);
            let total: f64 = universe.iter().map(|x| x.1).sum();
            let probs: Vec<f64> = universe.iter().map(|x| x.1 / total).collect();
            let index: BTreeMap<PlaneTree, usize> =
                universe.iter().enumerate().map(|(i, x)| (x.0.clone(), i)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let mut naive = vec![0usize; universe.len()];
            let mut walk = vec![0usize; universe.len()];
            for _ in 0..30_000 {
                let (t, _) = s.sample_conditioned_tree_naive(n, &mut rng, 100_000).unwrap();
                naive[index[&t]] += 1;
                let t = s.sample_conditioned_tree(n, &mut rng, 100_000).unwrap();
                walk[index[&t]] += 1;
            }
            assert!(p_value(&naive, &probs) > 1e-3, "naive n={n}");
            assert!(p_value(&walk, &probs) > 1e-3, "walk n={n}");
        }
    }

    #[test]
    fn unconditioned_leaf_counts_follow_the_leaf_law() {
        let s = LevelSampler::new(1).unwrap();
        let z = leaf_count_series(&s.model.weights.with_order(8), &s.model.t0).unwrap();
        let mut probs: Vec<f64> = (1..=6).map(|n| z.coeff(n).to_f64().unwrap()).collect();
        probs.push(1.0 - probs.iter().sum::<f64>());
        let mut counts = vec![0usize; 7];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1_000_000 {
            // the leaf count of the first 7-leaf prefix decides the class
            let mut open = 1usize;
            let mut leaves = 0usize;
            while open > 0 && leaves + open <= 6 {
                let d = s.model.sample(&mut rng);
                open = open + d - 1;
                leaves += usize::from(d == 0);
            }
            counts[if open == 0 { leaves - 1 } else { 6 }] += 1;
        }
        assert!(p_value(&counts, &probs) > 1e-3);
    }

    #[test]
    fn conditioned_trees_have_n_leaves_and_bounded_size() {
        let s = LevelSampler::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1usize, 2, 5, 50, 500] {
            for _ in 0..20 {
                let t = s.sample_conditioned_tree(n, &mut rng, s.default_max_rejections(n)).unwrap();
                assert_eq!(t.n_leaves(), n);
                assert!(t.n_vertices() < 2 * n);
            }
        }
        assert_eq!(s.sample_conditioned_tree(1, &mut rng, 10).unwrap(), PlaneTree::single_vertex());
    }

    #[test]
    fn sampled_networks_are_valid() {
        for k in 1..=3 {
            let s = LevelSampler::new(k).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            for n in [1usize, 2, 3, 10, 200] {
                let x = s.sample_network(n, &mut rng, s.default_max_rejections(n)).unwrap();
                assert_eq!(x.network.n_leaves(), n);
                assert!(x.network.is_level_k(k));
                assert!(x.network.n_vertices() <= 4 * n * (k + 1));
                let back = DecoratedTree::decompose(&x.network).unwrap();
                assert!(back.same_unordered(&x.decorated));
            }
        }
        let s = LevelSampler::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let one = s.sample_network(1, &mut rng, 10).unwrap();
        assert_eq!(one.network, Network::trivial());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let s = LevelSampler::new(1).unwrap();
        let a = s.sample_network(100, &mut ChaCha8Rng::seed_from_u64(5), 100_000).unwrap();
        let b = s.sample_network(100, &mut ChaCha8Rng::seed_from_u64(5), 100_000).unwrap();
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn rejects_bad_configs() {
        let c = SampleConfig { k: 1, n: 0, seed: 1, max_rejections: 5, local_depth: 1 };
        assert!(c.validate().is_err());
        let c = SampleConfig { n: 3, max_rejections: 0, ..c };
        assert!(c.validate().is_err());
        let s = LevelSampler::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            s.sample_conditioned_tree(1000, &mut rng, 1),
            Err(SamplerError::RejectionsExhausted { n: 1000, attempts: 1 })
        ));
    }
}
