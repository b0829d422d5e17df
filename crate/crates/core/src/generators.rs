//! Generators: the small acyclic multigraphs whose blow-ups are exactly the
//! simple level-k networks.
//!
//! A generator has one root (indegree 0, outdegree 2), tree vertices (1,2),
//! reticulations (2,1) and reticulation sinks (2,0). With `r` reticulations of
//! which `r1` have a child, degree counting forces `2r - r1 - 2` tree vertices,
//! so a level-k generator has at most `3k - 1` vertices.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::ColoredDigraph;
use crate::network::{Adjacency, Network};

pub const K_MAX: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("level {0} is outside the supported range 1..={K_MAX}")]
    LevelOutOfRange(usize),
    #[error("generator list contains duplicates")]
    Duplicate,
}

/// Edges are `(source, destination, multiplicity)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Generator {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize, u8)>,
}

impl Generator {
    pub fn new(n_vertices: usize, mut edges: Vec<(usize, usize, u8)>) -> Self {
        edges.sort_unstable();
        Generator { n_vertices, edges }
    }

    pub fn indegree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == v).map(|e| e.2 as usize).sum()
    }

    pub fn outdegree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == v).map(|e| e.2 as usize).sum()
    }

    pub fn root(&self) -> Option<usize> {
        let roots: Vec<usize> = (0..self.n_vertices).filter(|&v| self.indegree(v) == 0).collect();
        (roots.len() == 1).then(|| roots[0])
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.n_vertices).filter(|&v| self.outdegree(v) == 0).collect()
    }

    pub fn plain_edges(&self) -> Vec<(usize, usize)> {
        self.edges.iter().filter(|e| e.2 == 1).map(|e| (e.0, e.1)).collect()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().filter(|e| e.2 == 2).map(|e| (e.0, e.1)).collect()
    }

    pub fn reticulation_count(&self) -> usize {
        (0..self.n_vertices).filter(|&v| self.indegree(v) == 2).count()
    }

    /// `(i, j, l)`: sinks, plain edges, multi-edge pairs.
    pub fn profile(&self) -> (usize, usize, usize) {
        (self.sinks().len(), self.plain_edges().len(), self.pairs().len())
    }

    fn colored(&self) -> ColoredDigraph {
        let mut g = ColoredDigraph::new(vec![0; self.n_vertices]);
        for &(s, d, m) in &self.edges {
            g.add_edge(s, d, m as u64);
        }
        g
    }

    pub fn canonical_code(&self) -> Vec<u64> {
        self.colored().canonical().code
    }

    /// Isomorphic copy with vertices in canonical order.
    pub fn canonicalize(&self) -> Generator {
        let c = self.colored().canonical();
        let mut pos = vec![0; self.n_vertices];
        for (p, &v) in c.order.iter().enumerate() {
            pos[v] = p;
        }
        Generator::new(
            self.n_vertices,
            self.edges.iter().map(|&(s, d, m)| (pos[s], pos[d], m)).collect(),
        )
    }

    /// Vertex automorphisms preserving edge multiplicities.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        self.colored().automorphisms()
    }

    fn is_acyclic(&self) -> bool {
        let mut indeg = vec![0usize; self.n_vertices];
        for &(_, d, _) in &self.edges {
            indeg[d] += 1;
        }
        let mut stack: Vec<usize> = (0..self.n_vertices).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &(s, d, _) in &self.edges {
                if s == v {
                    indeg[d] -= 1;
                    if indeg[d] == 0 {
                        stack.push(d);
                    }
                }
            }
        }
        seen == self.n_vertices
    }

    /// Two-vertex-connectivity of the underlying multigraph: connected, and
    /// (with three or more vertices) no cut vertex.
    fn is_biconnected(&self) -> bool {
        let n = self.n_vertices;
        if n == 2 {
            return self.edges.iter().map(|e| e.2 as usize).sum::<usize>() >= 2;
        }
        let mut adj = vec![Vec::new(); n];
        for &(s, d, _) in &self.edges {
            adj[s].push(d);
            adj[d].push(s);
        }
        let connected_without = |skip: usize| {
            let start = (0..n).find(|&v| v != skip).unwrap();
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut stack = vec![start];
            let mut count = 1;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if w != skip && !seen[w] {
                        seen[w] = true;
                        count += 1;
                        stack.push(w);
                    }
                }
            }
            count == if skip < n { n - 1 } else { n }
        };
        connected_without(usize::MAX) && (0..n).all(connected_without)
    }

    /// Blows up every edge once: each plain edge and both edges of each pair
    /// get one subdivision vertex carrying a pendant leaf, and each sink gets
    /// a pendant leaf.
    pub fn blow_up_once(&self) -> Option<Network> {
        let mut children: Vec<Adjacency> = vec![Adjacency::new(); self.n_vertices];
        let mut labels = vec![0u32; self.n_vertices];
        let mut next_label = 1u32;
        let mut add_leaf = |children: &mut Vec<Adjacency>, labels: &mut Vec<u32>, parent: usize| {
            children.push(Adjacency::new());
            labels.push(next_label);
            next_label += 1;
            let leaf = children.len() - 1;
            children[parent].push(leaf as u32);
        };
        for v in self.sinks() {
            add_leaf(&mut children, &mut labels, v);
        }
        for &(s, d, m) in &self.edges {
            for _ in 0..m {
                children.push(Adjacency::new());
                labels.push(0);
                let x = children.len() - 1;
                children[s].push(x as u32);
                children[x].push(d as u32);
                add_leaf(&mut children, &mut labels, x);
            }
        }
        Network::from_adjacency(children, labels).ok()
    }

    /// Checks every generator condition for level `k`, including that the
    /// once-blown-up network is a simple level-k network.
    pub fn is_valid(&self, k: usize) -> bool {
        let n = self.n_vertices;
        if n < 2 {
            return false;
        }
        let mut seen = BTreeSet::new();
        for &(s, d, m) in &self.edges {
            if s >= n || d >= n || s == d || !(1..=2).contains(&m) || !seen.insert((s, d)) {
                return false;
            }
            if seen.contains(&(d, s)) {
                return false;
            }
        }
        if !self.is_acyclic() {
            return false;
        }
        let Some(root) = self.root() else { return false };
        if self.outdegree(root) != 2 {
            return false;
        }
        for v in (0..n).filter(|&v| v != root) {
            match (self.indegree(v), self.outdegree(v)) {
                (1, 2) | (2, 1) | (2, 0) | (1, 0) => {}
                _ => return false,
            }
        }
        if self.reticulation_count() > k || !self.is_biconnected() {
            return false;
        }
        match self.blow_up_once() {
            Some(net) => net.is_simple() && net.is_level_k(k),
            None => false,
        }
    }
}

/// Vertex-type counts still to be placed during the search.
#[derive(Clone, Copy)]
struct TypeBudget {
    tree: usize,
    retic: usize,
    sink: usize,
}

struct Search {
    k: usize,
    reverse: bool,
    found: BTreeMap<Vec<u64>, Generator>,
    capacity: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl Search {
    fn run(&mut self, budget: TypeBudget) {
        let remaining = budget.tree + budget.retic + budget.sink;
        if remaining == 0 {
            self.finish();
            return;
        }
        let free: usize = self.capacity.iter().sum();
        let demand = budget.tree + 2 * (budget.retic + budget.sink);
        if free == 0 || free > demand {
            return;
        }
        let mut kinds: Vec<(usize, usize)> = Vec::new();
        if budget.tree > 0 {
            kinds.push((1, 2));
        }
        if budget.retic > 0 {
            kinds.push((2, 1));
        }
        if budget.sink > 0 {
            kinds.push((2, 0));
        }
        if self.reverse {
            kinds.reverse();
        }
        for (indeg, outdeg) in kinds {
            let mut next = budget;
            match (indeg, outdeg) {
                (1, 2) => next.tree -= 1,
                (2, 1) => next.retic -= 1,
                _ => next.sink -= 1,
            }
            let v = self.capacity.len();
            let mut parent_sets: Vec<Vec<usize>> = Vec::new();
            let cands: Vec<usize> = (0..v).filter(|&u| self.capacity[u] > 0).collect();
            if indeg == 1 {
                parent_sets.extend(cands.iter().map(|&u| vec![u]));
            } else {
                for (a, &u) in cands.iter().enumerate() {
                    for &w in &cands[a..] {
                        if u != w || self.capacity[u] >= 2 {
                            parent_sets.push(vec![u, w]);
                        }
                    }
                }
            }
            if self.reverse {
                parent_sets.reverse();
            }
            for ps in parent_sets {
                for &p in &ps {
                    self.capacity[p] -= 1;
                    self.edges.push((p, v));
                }
                self.capacity.push(outdeg);
                self.run(next);
                self.capacity.pop();
                for &p in &ps {
                    self.capacity[p] += 1;
                    self.edges.pop();
                }
            }
        }
    }

    fn finish(&mut self) {
        let mut mult: BTreeMap<(usize, usize), u8> = BTreeMap::new();
        for &e in &self.edges {
            *mult.entry(e).or_default() += 1;
        }
        let g = Generator::new(
            self.capacity.len(),
            mult.into_iter().map(|((s, d), m)| (s, d, m)).collect(),
        );
        if !g.is_valid(self.k) {
            return;
        }
        let code = g.canonical_code();
        self.found.entry(code).or_insert_with(|| g.canonicalize());
    }
}

fn enumerate_with_order(k: usize, reverse: bool) -> Result<Vec<Generator>, GeneratorError> {
    if !(1..=K_MAX).contains(&k) {
        return Err(GeneratorError::LevelOutOfRange(k));
    }
    let mut search =
        Search { k, reverse, found: BTreeMap::new(), capacity: Vec::new(), edges: Vec::new() };
    for r in 1..=k {
        for r1 in 0..=r {
            let Some(t) = (2 * r).checked_sub(r1 + 2) else { continue };
            search.capacity = vec![2];
            search.edges.clear();
            search.run(TypeBudget { tree: t, retic: r1, sink: r - r1 });
        }
    }
    Ok(search.found.into_values().collect())
}

/// All level-k generators up to isomorphism, in canonical form, sorted by
/// canonical code.
pub fn enumerate_generators(k: usize) -> Result<Vec<Generator>, GeneratorError> {
    enumerate_with_order(k, false)
}

/// Same enumeration with every choice visited in reverse order; used to check
/// that the result does not depend on search order.
pub fn enumerate_generators_reversed(k: usize) -> Result<Vec<Generator>, GeneratorError> {
    enumerate_with_order(k, true)
}

/// One generator with its symmetry data.
#[derive(Clone, Debug)]
pub struct GeneratorEntry {
    pub generator: Generator,
    pub sinks: usize,
    pub plain: usize,
    pub pairs: usize,
    pub automorphism_order: usize,
    /// Number of distinct labellings of sinks, plain edges and pairs.
    pub labelled_count: u64,
    /// For each automorphism fixing every sink and every pair: which plain
    /// edges (indices into `generator.plain_edges()`) it fixes.
    pub fixing_terms: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct GeneratorTable {
    pub k: usize,
    pub entries: Vec<GeneratorEntry>,
}

fn factorial_u64(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Symmetry data and labelled counts `i! j! l! / |Aut|` for each generator.
pub fn tabulate_generators(k: usize, gens: &[Generator]) -> Result<GeneratorTable, GeneratorError> {
    let mut codes = BTreeSet::new();
    let mut entries = Vec::with_capacity(gens.len());
    for g in gens {
        if !codes.insert(g.canonical_code()) {
            return Err(GeneratorError::Duplicate);
        }
        let (i, j, l) = g.profile();
        let autos = g.automorphisms();
        let sinks = g.sinks();
        let plain = g.plain_edges();
        let pairs = g.pairs();
        let mut fixing_terms = Vec::new();
        for a in &autos {
            let fixes_sinks = sinks.iter().all(|&v| a[v] == v);
            let fixes_pairs = pairs.iter().all(|&(s, d)| a[s] == s && a[d] == d);
            if fixes_sinks && fixes_pairs {
                let fixed: Vec<usize> = plain
                    .iter()
                    .enumerate()
                    .filter(|(_, &(s, d))| a[s] == s && a[d] == d)
                    .map(|(idx, _)| idx)
                    .collect();
                fixing_terms.push(fixed);
            }
        }
        let labellings = factorial_u64(i) * factorial_u64(j) * factorial_u64(l);
        entries.push(GeneratorEntry {
            generator: g.clone(),
            sinks: i,
            plain: j,
            pairs: l,
            automorphism_order: autos.len(),
            labelled_count: labellings / autos.len() as u64,
            fixing_terms,
        });
    }
    Ok(GeneratorTable { k, entries })
}

impl GeneratorTable {
    /// `(i, j, l) -> G(k, i, j, l)`.
    pub fn counts(&self) -> BTreeMap<(usize, usize, usize), u64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry((e.sinks, e.plain, e.pairs)).or_default() += e.labelled_count;
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,i,j,l,count\n");
        for ((i, j, l), c) in self.counts() {
            s.push_str(&format!("{},{i},{j},{l},{c}\n", self.k));
        }
        s
    }

    pub fn generators_json(&self) -> String {
        let gens: Vec<&Generator> = self.entries.iter().map(|e| &e.generator).collect();
        serde_json::to_string(&gens).expect("generators serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_has_single_generator() {
        let gens = enumerate_generators(1).unwrap();
        assert_eq!(gens.len(), 1);
        let g = &gens[0];
        assert_eq!(g.n_vertices, 2);
        assert_eq!(g.profile(), (1, 0, 1));
        let table = tabulate_generators(1, &gens).unwrap();
        assert_eq!(table.entries[0].automorphism_order, 1);
        assert_eq!(table.counts().get(&(1, 0, 1)), Some(&1));
    }

    #[test]
    fn level_counts_match_known_catalogue() {
        assert_eq!(enumerate_generators(2).unwrap().len(), 5);
        let start = std::time::Instant::now();
        let g3 = enumerate_generators(3).unwrap();
        eprintln!("k=3: {} generators in {:?}", g3.len(), start.elapsed());
        assert_eq!(g3.len(), 70);
    }

    #[test]
    fn out_of_range_level() {
        assert_eq!(enumerate_generators(0), Err(GeneratorError::LevelOutOfRange(0)));
        assert_eq!(enumerate_generators(4), Err(GeneratorError::LevelOutOfRange(4)));
    }

    #[test]
    fn search_order_does_not_matter() {
        for k in 1..=2 {
            let a: Vec<_> = enumerate_generators(k).unwrap().iter().map(|g| g.canonical_code()).collect();
            let b: BTreeSet<_> =
                enumerate_generators_reversed(k).unwrap().iter().map(|g| g.canonical_code()).collect();
            assert_eq!(a.into_iter().collect::<BTreeSet<_>>(), b);
        }
    }

    #[test]
    fn invalid_generators_rejected() {
        let cyclic = Generator::new(3, vec![(0, 1, 1), (1, 2, 1), (2, 1, 1), (0, 2, 1)]);
        assert!(!cyclic.is_valid(3));
        // level-2 generator: two tree vertices both feeding two sinks
        let g2 = Generator::new(5, vec![(0, 1, 1), (0, 2, 1), (1, 3, 1), (1, 4, 1), (2, 3, 1), (2, 4, 1)]);
        assert!(g2.is_valid(2));
        assert!(!g2.is_valid(1));
        // root with edges to two distinct sinks has indegree-1 sinks
        let two_sinks = Generator::new(3, vec![(0, 1, 1), (0, 2, 1)]);
        assert!(!two_sinks.is_valid(3));
    }

    #[test]
    fn level_two_network_needs_level_two() {
        let g2 = Generator::new(5, vec![(0, 1, 1), (0, 2, 1), (1, 3, 1), (1, 4, 1), (2, 3, 1), (2, 4, 1)]);
        let net = g2.blow_up_once().unwrap();
        assert!(!net.is_level_k(1));
        assert!(net.is_level_k(2));
    }

    #[test]
    fn duplicates_rejected_and_empty_table() {
        let gens = enumerate_generators(1).unwrap();
        let doubled: Vec<_> = gens.iter().chain(gens.iter()).cloned().collect();
        assert_eq!(tabulate_generators(1, &doubled).unwrap_err(), GeneratorError::Duplicate);
        assert!(tabulate_generators(1, &[]).unwrap().counts().is_empty());
    }

    #[test]
    fn every_output_is_valid_and_tables_grow_with_level() {
        let t1 = tabulate_generators(1, &enumerate_generators(1).unwrap()).unwrap().counts();
        let g2 = enumerate_generators(2).unwrap();
        assert!(g2.iter().all(|g| g.is_valid(2)));
        let t2 = tabulate_generators(2, &g2).unwrap().counts();
        for (key, c) in &t1 {
            assert!(t2.get(key).copied().unwrap_or(0) >= *c);
        }
    }

    #[test]
    fn json_export() {
        let table = tabulate_generators(1, &enumerate_generators(1).unwrap()).unwrap();
        assert_eq!(table.generators_json(), r#"[{"n_vertices":2,"edges":[[0,1,2]]}]"#);
        assert_eq!(table.to_csv(), "k,i,j,l,count\n1,1,0,1,1\n");
    }
}
