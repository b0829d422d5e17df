//! Exhaustive enumeration of level-k networks on tiny leaf sets.
//!
//! Two independent routes. The first assembles decorated trees from set
//! partitions and enumerated heads and blows them up. The second grows raw
//! binary DAGs vertex by vertex, keeps those passing the level-k check, and
//! never touches the decomposition code.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::canon::ColoredDigraph;
use crate::generators::{enumerate_generators, GeneratorError};
use crate::heads::{enumerate_heads, HeadError, HeadStructure};
use crate::network::{DecoratedTree, Network, TreeNode};

/// Default cap on constructed candidates.
pub const DEFAULT_BUDGET: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BruteForceError {
    #[error("more than {0} candidates constructed")]
    BudgetExceeded(usize),
    #[error("raw digraph enumeration supports n <= {max}, got {n}")]
    TooManyLeaves { n: usize, max: usize },
    #[error("sample {0} is not in the universe")]
    OutsideUniverse(usize),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

/// All labelled level-k networks on `{1..n}`, one per isomorphism class.
#[derive(Clone, Debug)]
pub struct Universe {
    pub k: usize,
    pub n: usize,
    pub networks: Vec<Network>,
    index: HashMap<Vec<u64>, usize>,
}

impl Universe {
    pub fn from_networks(k: usize, n: usize, networks: impl IntoIterator<Item = Network>) -> Self {
        let mut u = Universe { k, n, networks: Vec::new(), index: HashMap::new() };
        for net in networks {
            let code = net.canonical_code();
            if !u.index.contains_key(&code) {
                u.index.insert(code, u.networks.len());
                u.networks.push(net);
            }
        }
        u
    }

    pub fn len(&self) -> usize {
        self.networks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }

    /// Position of the class with this canonical code.
    pub fn position(&self, code: &[u64]) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn codes(&self) -> BTreeSet<Vec<u64>> {
        self.index.keys().cloned().collect()
    }

    /// One network per line.
    pub fn to_json_lines(&self) -> String {
        self.networks.iter().map(|n| n.to_json() + "\n").collect()
    }
}

fn set_partitions(items: &[u32]) -> Vec<Vec<Vec<u32>>> {
    let Some((&first, rest)) = items.split_first() else {
        return vec![Vec::new()];
    };
    let mut out = Vec::new();
    for p in set_partitions(rest) {
        // first joins an existing block or opens a new one
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i].insert(0, first);
            out.push(q);
        }
        let mut q = p;
        q.insert(0, vec![first]);
        out.push(q);
    }
    out
}

/// Decorated trees as node lists rooted at index 0.
fn decorated_trees(
    labels: &[u32],
    heads: &HashMap<usize, Vec<HeadStructure>>,
    built: &mut usize,
    budget: usize,
) -> Result<Vec<Vec<TreeNode>>, BruteForceError> {
    if labels.len() == 1 {
        return Ok(vec![vec![TreeNode::leaf(labels[0])]]);
    }
    let mut out = Vec::new();
    for mut blocks in set_partitions(labels) {
        if blocks.len() < 2 {
            continue;
        }
        blocks.sort();
        let subs: Vec<Vec<Vec<TreeNode>>> = blocks
            .iter()
            .map(|b| decorated_trees(b, heads, built, budget))
            .collect::<Result<_, _>>()?;
        let mut choice = vec![0usize; blocks.len()];
        loop {
            for head in &heads[&blocks.len()] {
                *built += 1;
                if *built > budget {
                    return Err(BruteForceError::BudgetExceeded(budget));
                }
                let mut nodes = vec![TreeNode::internal(Vec::new(), head.network.clone())];
                let mut children = Vec::with_capacity(blocks.len());
                for (b, &c) in choice.iter().enumerate() {
                    let offset = nodes.len();
                    children.push(offset);
                    nodes.extend(subs[b][c].iter().map(|t| TreeNode {
                        children: t.children.iter().map(|x| x + offset).collect(),
                        ..t.clone()
                    }));
                }
                nodes[0].children = children;
                out.push(nodes);
            }
            // odometer over sub-tree choices
            let mut i = 0;
            while i < choice.len() {
                choice[i] += 1;
                if choice[i] < subs[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
    }
    Ok(out)
}

/// Universe built from decorated trees: set partitions of the labels,
/// every labelled head on each block count, recursively, then blown up.
pub fn enumerate_networks(k: usize, n: usize, budget: usize) -> Result<Universe, BruteForceError> {
    let gens = enumerate_generators(k)?;
    let mut heads = HashMap::new();
    for d in 2..=n.max(2) {
        heads.insert(d, enumerate_heads(&gens, d, budget)?);
    }
    let labels: Vec<u32> = (1..=n as u32).collect();
    let mut built = 0;
    let trees = if n == 0 { Vec::new() } else { decorated_trees(&labels, &heads, &mut built, budget)? };
    let networks = trees.into_iter().map(|nodes| DecoratedTree::new_unchecked(false, nodes).to_network());
    Ok(Universe::from_networks(k, n, networks))
}

/// Every decorated tree with leaves `{1..n}`, as used by the round-trip
/// checks.
pub fn enumerate_decorated_trees(k: usize, n: usize, budget: usize) -> Result<Vec<DecoratedTree>, BruteForceError> {
    let gens = enumerate_generators(k)?;
    let mut heads = HashMap::new();
    for d in 2..=n.max(2) {
        heads.insert(d, enumerate_heads(&gens, d, budget)?);
    }
    let labels: Vec<u32> = (1..=n as u32).collect();
    let mut built = 0;
    Ok(decorated_trees(&labels, &heads, &mut built, budget)?
        .into_iter()
        .map(|nodes| DecoratedTree::new_unchecked(false, nodes))
        .collect())
}

/// Largest leaf count accepted by [`enumerate_raw`].
pub const RAW_MAX_LEAVES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum RawKind {
    Tree,
    Reticulation,
    Leaf,
}

struct RawSearch {
    k: usize,
    parents: Vec<Vec<usize>>,
    open: Vec<usize>,
    /// Ordering key of each placed vertex.
    keys: Vec<(usize, Vec<usize>, RawKind)>,
    remaining: [usize; 3],
    found: HashMap<Vec<u64>, Network>,
    built: usize,
    budget: usize,
}

impl RawSearch {
    fn extend(&mut self) -> Result<(), BruteForceError> {
        if self.remaining.iter().all(|&r| r == 0) {
            self.record()?;
            return Ok(());
        }
        let placed = self.parents.len();
        for kind in [RawKind::Tree, RawKind::Reticulation, RawKind::Leaf] {
            if self.remaining[kind as usize] == 0 {
                continue;
            }
            let choices: Vec<Vec<usize>> = if kind == RawKind::Reticulation {
                (0..placed)
                    .flat_map(|p| (0..p).map(move |q| vec![p, q]))
                    .filter(|ps| ps.iter().all(|&x| self.open[x] > 0))
                    .collect()
            } else {
                (0..placed).filter(|&p| self.open[p] > 0).map(|p| vec![p]).collect()
            };
            for ps in choices {
                let key = (ps[0], ps.clone(), kind);
                if self.keys.last().is_some_and(|last| *last > key) {
                    continue;
                }
                for &p in &ps {
                    self.open[p] -= 1;
                }
                self.parents.push(ps.clone());
                self.open.push(match kind {
                    RawKind::Tree => 2,
                    RawKind::Reticulation => 1,
                    RawKind::Leaf => 0,
                });
                self.keys.push(key);
                self.remaining[kind as usize] -= 1;
                let r = self.extend();
                self.remaining[kind as usize] += 1;
                self.keys.pop();
                self.open.pop();
                self.parents.pop();
                for &p in &ps {
                    self.open[p] += 1;
                }
                r?;
            }
        }
        Ok(())
    }

    fn record(&mut self) -> Result<(), BruteForceError> {
        self.built += 1;
        if self.built > self.budget {
            return Err(BruteForceError::BudgetExceeded(self.budget));
        }
        if self.open.iter().any(|&o| o > 0) {
            return Ok(());
        }
        let mut edges = Vec::new();
        for (v, ps) in self.parents.iter().enumerate() {
            edges.extend(ps.iter().map(|&p| (p, v)));
        }
        let mut labels = Vec::new();
        for v in 0..self.parents.len() {
            if self.keys[v].2 == RawKind::Leaf && v > 0 {
                labels.push((v, labels.len() as u32 + 1));
            }
        }
        let Ok(net) = Network::from_edges(self.parents.len(), &edges, &labels) else {
            return Ok(());
        };
        if net.is_level_k(self.k) {
            self.found.entry(unlabelled_code(&net)).or_insert(net);
        }
        Ok(())
    }
}

/// Canonical code of the network with its leaf labels forgotten.
pub fn unlabelled_code(net: &Network) -> Vec<u64> {
    let colors = (0..net.n_vertices()).map(|v| u64::from(net.label(v).is_some())).collect();
    let mut g = ColoredDigraph::new(colors);
    for (s, d) in net.edges() {
        g.add_edge(s, d, 1);
    }
    g.canonical().code
}

/// The same network with label `l` replaced by `perm[l - 1]`.
pub fn relabel(net: &Network, perm: &[u32]) -> Network {
    let labels: Vec<(usize, u32)> = net.leaf_labels().into_iter().map(|(v, l)| (v, perm[l as usize - 1])).collect();
    Network::from_edges(net.n_vertices(), &net.edges(), &labels).expect("relabelling keeps validity")
}

fn permutations(n: usize) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n as u32);
            out.push(q);
        }
    }
    out
}

/// Universe built from raw binary DAGs: vertices are added one at a time
/// below already placed vertices, in nondecreasing order of
/// (latest parent, parents, kind), for every admissible number of
/// reticulations; survivors of the level-k check are deduplicated without
/// labels and then given every labelling.
pub fn enumerate_raw(k: usize, n: usize, budget: usize) -> Result<Universe, BruteForceError> {
    if n > RAW_MAX_LEAVES {
        return Err(BruteForceError::TooManyLeaves { n, max: RAW_MAX_LEAVES });
    }
    if n <= 1 {
        let nets = (n == 1).then(Network::trivial);
        return Ok(Universe::from_networks(k, n, nets));
    }
    let mut found = HashMap::new();
    let mut built = 0;
    // every reticulation sits in a block of one of at most n - 1 heads
    for r in 0..=k * (n - 1) {
        let mut search = RawSearch {
            k,
            parents: vec![Vec::new()],
            open: vec![2],
            keys: vec![(0, Vec::new(), RawKind::Tree)],
            remaining: [n + r - 2, r, n],
            found: std::mem::take(&mut found),
            built,
            budget,
        };
        search.extend()?;
        built = search.built;
        found = search.found;
    }
    let perms = permutations(n);
    let labelled = found.into_values().flat_map(|net| perms.iter().map(move |p| relabel(&net, p)).collect::<Vec<_>>());
    Ok(Universe::from_networks(k, n, labelled))
}

/// Pearson chi-square p-value of sample codes against the uniform law on
/// the universe.
pub fn chi_square(samples: &[Vec<u64>], universe: &Universe) -> Result<f64, BruteForceError> {
    let mut counts = vec![0usize; universe.len()];
    for (i, code) in samples.iter().enumerate() {
        let pos = universe.position(code).ok_or(BruteForceError::OutsideUniverse(i))?;
        counts[pos] += 1;
    }
    Ok(chi_square_uniform(&counts))
}

/// Pearson chi-square p-value of counts against equal expected counts.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    if counts.len() < 2 {
        return 1.0;
    }
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    if stat <= 0.0 {
        return 1.0;
    }
    let dof = (counts.len() - 1) as f64;
    statrs::function::gamma::gamma_ur(dof / 2.0, stat / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{labelled_count, solve_network_series};
    use crate::generators::tabulate_generators;
    use crate::heads::head_weight_series;

    fn series_count(k: usize, n: usize) -> u64 {
        let t = tabulate_generators(k, &enumerate_generators(k).unwrap()).unwrap();
        let s = solve_network_series(&head_weight_series(&t, 8).series).unwrap();
        labelled_count(&s, n).try_into().unwrap()
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52];
        for (n, &b) in bell.iter().enumerate() {
            let items: Vec<u32> = (1..=n as u32).collect();
            assert_eq!(set_partitions(&items).len(), b);
        }
    }

    #[test]
    fn tiny_universes() {
        assert_eq!(enumerate_networks(1, 1, DEFAULT_BUDGET).unwrap().len(), 1);
        assert_eq!(enumerate_raw(1, 1, DEFAULT_BUDGET).unwrap().len(), 1);
        for k in 1..=2 {
            for n in 2..=3 {
                let a = enumerate_networks(k, n, DEFAULT_BUDGET).unwrap();
                assert_eq!(a.len() as u64, series_count(k, n), "k={k} n={n}");
                let b = enumerate_raw(k, n, DEFAULT_BUDGET).unwrap();
                assert_eq!(a.codes(), b.codes(), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn counts_grow_with_the_level() {
        for n in 2..=3 {
            let one = enumerate_networks(1, n, DEFAULT_BUDGET).unwrap();
            let two = enumerate_networks(2, n, DEFAULT_BUDGET).unwrap();
            assert!(one.len() <= two.len());
            assert!(one.codes().is_subset(&two.codes()));
        }
    }

    #[test]
    fn raw_route_rejects_large_n() {
        assert!(matches!(enumerate_raw(1, 4, 10), Err(BruteForceError::TooManyLeaves { .. })));
    }

    #[test]
    fn chi_square_extremes() {
        assert!(chi_square_uniform(&[1000, 1000, 1000]) > 0.99);
        assert!(chi_square_uniform(&[3000, 0, 0]) < 1e-12);
        let u = enumerate_networks(1, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(chi_square(&[vec![0]], &u), Err(BruteForceError::OutsideUniverse(0)));
    }
}
