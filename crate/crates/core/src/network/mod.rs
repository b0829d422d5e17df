//! Binary rooted phylogenetic networks with labelled leaves.
//!
//! Vertices are numbered `0..n_vertices`. Leaves carry the labels `1..=n`.
//! A network with a single vertex (one labelled root, no edges) is allowed.

mod blocks;
mod tree;

pub use blocks::{Block, Blocks};
pub use tree::{BlowUp, DecomposeError, DecoratedTree, TreeNode};

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::canon::ColoredDigraph;

pub type Adjacency = SmallVec<[u32; 2]>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("network has no vertices")]
    Empty,
    #[error("edge ({0}, {1}) refers to a missing vertex")]
    VertexOutOfRange(usize, usize),
    #[error("self loop at vertex {0}")]
    SelfLoop(usize),
    #[error("parallel edges between {0} and {1}")]
    ParallelEdge(usize, usize),
    #[error("directed cycle through vertex {0}")]
    Cycle(usize),
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("vertex {vertex} has invalid degrees (in {indeg}, out {outdeg})")]
    BadDegree { vertex: usize, indeg: usize, outdeg: usize },
    #[error("leaf labels: {0}")]
    Labels(String),
    #[error("vertex {0} does not have outdegree 2")]
    NotBinaryVertex(usize),
    #[error("malformed network JSON: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertexKind {
    Root,
    Tree,
    Reticulation,
    Leaf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    children: Vec<Adjacency>,
    parents: Vec<Adjacency>,
    root: u32,
    /// Leaf label per vertex, 0 for internal vertices.
    labels: Vec<u32>,
    /// Vertex carrying label `i + 1`.
    leaf_of_label: Vec<u32>,
}

/// First violated level condition, naming the offending block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelViolation {
    pub block: usize,
    pub vertices: Vec<usize>,
    pub reason: ViolationReason,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationReason {
    TooManyReticulations { found: usize, k: usize },
    TooFewBridgeSources { found: usize },
}

impl fmt::Display for LevelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            ViolationReason::TooManyReticulations { found, k } => write!(
                f,
                "block {} {:?} has {found} reticulations (level {k} allows at most {k})",
                self.block, self.vertices
            ),
            ViolationReason::TooFewBridgeSources { found } => write!(
                f,
                "block {} {:?} has {found} bridge sources (needs at least 2)",
                self.block, self.vertices
            ),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    n_vertices: usize,
    root: usize,
    edges: Vec<[usize; 2]>,
    leaf_labels: BTreeMap<usize, u32>,
}

impl Network {
    /// Builds and validates a network from an edge list and `(vertex, label)`
    /// pairs for the leaves.
    pub fn from_edges(
        n_vertices: usize,
        edges: &[(usize, usize)],
        leaf_labels: &[(usize, u32)],
    ) -> Result<Network, NetworkError> {
        if n_vertices == 0 {
            return Err(NetworkError::Empty);
        }
        let mut children = vec![Adjacency::new(); n_vertices];
        let mut parents = vec![Adjacency::new(); n_vertices];
        for &(s, d) in edges {
            if s >= n_vertices || d >= n_vertices {
                return Err(NetworkError::VertexOutOfRange(s, d));
            }
            if s == d {
                return Err(NetworkError::SelfLoop(s));
            }
            if children[s].contains(&(d as u32)) {
                return Err(NetworkError::ParallelEdge(s, d));
            }
            if children[s].len() >= 2 || parents[d].len() >= 2 {
                let (v, i, o) = if children[s].len() >= 2 {
                    (s, parents[s].len(), children[s].len() + 1)
                } else {
                    (d, parents[d].len() + 1, children[d].len())
                };
                return Err(NetworkError::BadDegree { vertex: v, indeg: i, outdeg: o });
            }
            children[s].push(d as u32);
            parents[d].push(s as u32);
        }
        let mut labels = vec![0u32; n_vertices];
        for &(v, l) in leaf_labels {
            if v >= n_vertices {
                return Err(NetworkError::Labels(format!("vertex {v} out of range")));
            }
            if l == 0 || labels[v] != 0 {
                return Err(NetworkError::Labels(format!("bad label {l} at vertex {v}")));
            }
            labels[v] = l;
        }
        Self::assemble(children, parents, labels)
    }

    fn assemble(
        children: Vec<Adjacency>,
        parents: Vec<Adjacency>,
        labels: Vec<u32>,
    ) -> Result<Network, NetworkError> {
        let n_vertices = children.len();
        let roots: Vec<usize> = (0..n_vertices).filter(|&v| parents[v].is_empty()).collect();
        if roots.len() != 1 {
            return Err(NetworkError::RootCount(roots.len()));
        }
        let root = roots[0];
        for v in 0..n_vertices {
            let (i, o) = (parents[v].len(), children[v].len());
            let ok = match (i, o) {
                (0, 2) => true,
                (0, 0) => n_vertices == 1,
                (1, 2) | (2, 1) | (1, 0) => true,
                _ => false,
            };
            if !ok {
                return Err(NetworkError::BadDegree { vertex: v, indeg: i, outdeg: o });
            }
            if o == 2 && children[v][0] == children[v][1] {
                return Err(NetworkError::ParallelEdge(v, children[v][0] as usize));
            }
        }
        let leaves: Vec<usize> = (0..n_vertices).filter(|&v| children[v].is_empty()).collect();
        let mut leaf_of_label = vec![u32::MAX; leaves.len()];
        for v in 0..n_vertices {
            let l = labels[v];
            if l == 0 {
                continue;
            }
            if !children[v].is_empty() {
                return Err(NetworkError::Labels(format!("internal vertex {v} is labelled")));
            }
            let idx = l as usize - 1;
            if idx >= leaves.len() || leaf_of_label[idx] != u32::MAX {
                return Err(NetworkError::Labels(format!(
                    "label {l} is duplicated or outside 1..={}",
                    leaves.len()
                )));
            }
            leaf_of_label[idx] = v as u32;
        }
        if leaf_of_label.iter().any(|&v| v == u32::MAX) {
            return Err(NetworkError::Labels("some leaf is unlabelled".into()));
        }
        let net = Network { children, parents, root: root as u32, labels, leaf_of_label };
        if net.topological_order().len() != n_vertices {
            let stuck = (0..n_vertices)
                .find(|&v| !net.parents[v].is_empty())
                .unwrap_or(0);
            return Err(NetworkError::Cycle(stuck));
        }
        Ok(net)
    }

    pub(crate) fn from_adjacency(
        children: Vec<Adjacency>,
        labels: Vec<u32>,
    ) -> Result<Network, NetworkError> {
        let mut parents = vec![Adjacency::new(); children.len()];
        for (s, cs) in children.iter().enumerate() {
            for &d in cs {
                parents[d as usize].push(s as u32);
            }
        }
        Self::assemble(children, parents, labels)
    }

    /// The trivial network: one vertex labelled 1.
    pub fn trivial() -> Network {
        Network::from_edges(1, &[], &[(0, 1)]).expect("trivial network is valid")
    }

    /// The cherry with leaves labelled 1 and 2.
    pub fn cherry() -> Network {
        Network::from_edges(3, &[(0, 1), (0, 2)], &[(1, 1), (2, 2)]).expect("cherry is valid")
    }

    pub fn n_vertices(&self) -> usize {
        self.children.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_of_label.len()
    }

    pub fn n_edges(&self) -> usize {
        self.children.iter().map(|c| c.len()).sum()
    }

    pub fn root(&self) -> usize {
        self.root as usize
    }

    pub fn children(&self, v: usize) -> &[u32] {
        &self.children[v]
    }

    pub fn parents(&self, v: usize) -> &[u32] {
        &self.parents[v]
    }

    pub fn label(&self, v: usize) -> Option<u32> {
        match self.labels[v] {
            0 => None,
            l => Some(l),
        }
    }

    pub fn leaf_with_label(&self, label: u32) -> usize {
        self.leaf_of_label[label as usize - 1] as usize
    }

    pub fn kind(&self, v: usize) -> VertexKind {
        match (self.parents[v].len(), self.children[v].len()) {
            (0, _) => VertexKind::Root,
            (_, 0) => VertexKind::Leaf,
            (2, _) => VertexKind::Reticulation,
            _ => VertexKind::Tree,
        }
    }

    pub fn reticulation_count(&self) -> usize {
        self.parents.iter().filter(|p| p.len() == 2).count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (s, cs) in self.children.iter().enumerate() {
            for &d in cs {
                out.push((s, d as usize));
            }
        }
        out
    }

    pub fn leaf_labels(&self) -> Vec<(usize, u32)> {
        self.leaf_of_label.iter().enumerate().map(|(i, &v)| (v as usize, i as u32 + 1)).collect()
    }

    /// Kahn order; shorter than `n_vertices` iff there is a cycle.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.n_vertices();
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c as usize] -= 1;
                if indeg[c as usize] == 0 {
                    queue.push_back(c as usize);
                }
            }
        }
        order
    }

    pub fn blocks(&self) -> Blocks {
        Blocks::compute(&self.children)
    }

    /// Checks both block conditions of level-k networks.
    pub fn validate_level_k(&self, k: usize) -> Result<(), LevelViolation> {
        self.validate_with_blocks(k, &self.blocks())
    }

    pub fn validate_with_blocks(&self, k: usize, blocks: &Blocks) -> Result<(), LevelViolation> {
        let mut bridge_source = vec![false; self.n_vertices()];
        for b in &blocks.blocks {
            if b.is_bridge() {
                bridge_source[blocks.edges[b.edges[0] as usize].0 as usize] = true;
            }
        }
        for (i, b) in blocks.blocks.iter().enumerate() {
            if b.vertices.len() < 3 {
                continue;
            }
            let vertices = || b.vertices.iter().map(|&v| v as usize).collect();
            let retics = b.vertices.iter().filter(|&&v| self.parents[v as usize].len() == 2).count();
            if retics > k {
                return Err(LevelViolation {
                    block: i,
                    vertices: vertices(),
                    reason: ViolationReason::TooManyReticulations { found: retics, k },
                });
            }
            let sources = b.vertices.iter().filter(|&&v| bridge_source[v as usize]).count();
            if sources < 2 {
                return Err(LevelViolation {
                    block: i,
                    vertices: vertices(),
                    reason: ViolationReason::TooFewBridgeSources { found: sources },
                });
            }
        }
        Ok(())
    }

    pub fn is_level_k(&self, k: usize) -> bool {
        self.validate_level_k(k).is_ok()
    }

    /// Whether the forward-reachable sets of the two children of `v` are
    /// disjoint.
    pub fn split_test(&self, v: usize) -> Result<bool, NetworkError> {
        let cs = &self.children[v];
        if cs.len() != 2 {
            return Err(NetworkError::NotBinaryVertex(v));
        }
        let n = self.n_vertices();
        let mut seen = vec![0u8; n];
        for (tag, &start) in [1u8, 2u8].iter().zip(cs.iter()) {
            let mut stack = vec![start as usize];
            while let Some(x) = stack.pop() {
                if seen[x] & tag != 0 {
                    continue;
                }
                if seen[x] != 0 {
                    return Ok(false);
                }
                seen[x] |= tag;
                stack.extend(self.children[x].iter().map(|&c| c as usize));
            }
        }
        Ok(true)
    }

    /// True for the cherry network on two leaves.
    pub fn is_cherry(&self) -> bool {
        self.n_vertices() == 3 && self.n_leaves() == 2
    }

    /// Whether the root block together with its outgoing bridges and their
    /// endpoints is the whole network (and the root does not split).
    pub fn is_simple(&self) -> bool {
        self.is_simple_with_blocks(&self.blocks())
    }

    fn is_simple_with_blocks(&self, blocks: &Blocks) -> bool {
        let r = self.root();
        if self.children[r].len() != 2 {
            return false;
        }
        let b = blocks.block_of(r, 0);
        if b.is_bridge() || blocks.block_index_of(r, 1) != blocks.block_index_of(r, 0) {
            return false;
        }
        let mut inside = vec![false; self.n_vertices()];
        for &v in &b.vertices {
            inside[v as usize] = true;
        }
        (0..self.n_vertices()).all(|v| {
            inside[v]
                || (self.children[v].is_empty()
                    && self.parents[v].len() == 1
                    && inside[self.parents[v][0] as usize])
        })
    }

    /// Whether the network is a head structure of level k: the cherry, or a
    /// simple level-k network.
    pub fn is_head_structure(&self, k: usize) -> bool {
        if self.is_cherry() {
            return true;
        }
        let blocks = self.blocks();
        self.is_simple_with_blocks(&blocks) && self.validate_with_blocks(k, &blocks).is_ok()
    }

    fn colored_digraph(&self) -> ColoredDigraph {
        let mut g = ColoredDigraph::new(self.labels.iter().map(|&l| l as u64).collect());
        for (s, d) in self.edges() {
            g.add_edge(s, d, 1);
        }
        g
    }

    /// Isomorphism-invariant code; two networks get the same code iff they are
    /// isomorphic by a map preserving leaf labels.
    pub fn canonical_code(&self) -> Vec<u64> {
        self.colored_digraph().canonical().code
    }

    /// Undirected distances from `center`, explored up to `radius`; `None`
    /// marks vertices further away.
    pub fn undirected_distances(&self, center: usize, radius: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_vertices()];
        dist[center] = Some(0);
        let mut queue = VecDeque::from([center]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            if d == radius {
                continue;
            }
            for &w in self.children[v].iter().chain(&self.parents[v]) {
                if dist[w as usize].is_none() {
                    dist[w as usize] = Some(d + 1);
                    queue.push_back(w as usize);
                }
            }
        }
        dist
    }

    /// Vertices within undirected distance `radius` of `center`.
    pub fn ball(&self, center: usize, radius: usize) -> Vec<usize> {
        let dist = self.undirected_distances(center, radius);
        (0..self.n_vertices()).filter(|&v| dist[v].is_some()).collect()
    }

    /// Isomorphism code of the directed subgraph induced on the radius-`radius`
    /// ball around `center`, rooted at `center`. Leaf labels are ignored; the
    /// centre is coloured by its vertex kind in the whole network.
    pub fn ball_code(&self, center: usize, radius: usize) -> Vec<u64> {
        let ball = self.ball(center, radius);
        let mut index = BTreeMap::new();
        for (i, &v) in ball.iter().enumerate() {
            index.insert(v, i);
        }
        let colors = ball
            .iter()
            .map(|&v| if v == center { 1 + self.kind(v) as u64 } else { 0 })
            .collect();
        let mut g = ColoredDigraph::new(colors);
        for (i, &v) in ball.iter().enumerate() {
            for &c in &self.children[v] {
                if let Some(&j) = index.get(&(c as usize)) {
                    g.add_edge(i, j, 1);
                }
            }
        }
        g.canonical().code
    }

    /// Number of label-preserving automorphisms.
    pub fn automorphism_count(&self) -> usize {
        self.colored_digraph().automorphisms().len()
    }

    /// Longest directed distance from the root for every vertex.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.n_vertices()];
        for v in self.topological_order() {
            for &c in &self.children[v] {
                depth[c as usize] = depth[c as usize].max(depth[v] + 1);
            }
        }
        depth
    }

    /// Vertices renumbered by (depth, old id); returns the new network and the
    /// map old id -> new id.
    pub fn canonical_numbering(&self) -> (Network, Vec<usize>) {
        let depth = self.depths();
        let mut order: Vec<usize> = (0..self.n_vertices()).collect();
        order.sort_by_key(|&v| (depth[v], v));
        let mut new_id = vec![0usize; order.len()];
        for (i, &v) in order.iter().enumerate() {
            new_id[v] = i;
        }
        let mut children = vec![Adjacency::new(); order.len()];
        let mut labels = vec![0u32; order.len()];
        for &v in &order {
            let mut cs: Adjacency = self.children[v].iter().map(|&c| new_id[c as usize] as u32).collect();
            cs.sort_unstable();
            children[new_id[v]] = cs;
            labels[new_id[v]] = self.labels[v];
        }
        let net = Network::from_adjacency(children, labels).expect("renumbering keeps validity");
        (net, new_id)
    }

    pub fn to_json(&self) -> String {
        let (net, _) = self.canonical_numbering();
        let mut edges: Vec<[usize; 2]> = net.edges().into_iter().map(|(s, d)| [s, d]).collect();
        edges.sort_unstable();
        let doc = NetworkJson {
            n_vertices: net.n_vertices(),
            root: net.root(),
            edges,
            leaf_labels: net.leaf_labels().into_iter().collect(),
        };
        serde_json::to_string(&doc).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Network, NetworkError> {
        let doc: NetworkJson =
            serde_json::from_str(text).map_err(|e| NetworkError::Json(e.to_string()))?;
        let edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
        let labels: Vec<(usize, u32)> = doc.leaf_labels.into_iter().collect();
        let net = Network::from_edges(doc.n_vertices, &edges, &labels)?;
        if net.root() != doc.root {
            return Err(NetworkError::Json(format!(
                "declared root {} but vertex {} has indegree 0",
                doc.root,
                net.root()
            )));
        }
        Ok(net)
    }

    /// DOT rendering; reticulations are drawn as boxes, leaves show labels.
    pub fn to_dot(&self) -> String {
        let (net, _) = self.canonical_numbering();
        let mut s = String::from("digraph network {\n");
        for v in 0..net.n_vertices() {
            let attrs = match net.kind(v) {
                VertexKind::Leaf => {
                    format!("shape=plaintext, label=\"{}\"", net.labels[v])
                }
                VertexKind::Reticulation => "shape=box, label=\"\"".to_string(),
                VertexKind::Root => "shape=doublecircle, label=\"\"".to_string(),
                VertexKind::Tree => "shape=circle, label=\"\"".to_string(),
            };
            s.push_str(&format!("  v{v} [{attrs}];\n"));
        }
        for (a, b) in net.edges() {
            s.push_str(&format!("  v{a} -> v{b};\n"));
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Level-1 blob: root -> a -> r, root -> r, with leaves under a and r.
    pub(crate) fn triangle() -> Network {
        Network::from_edges(
            5,
            &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 4)],
            &[(3, 1), (4, 2)],
        )
        .unwrap()
    }

    #[test]
    fn cherry_and_trivial_are_level_one() {
        assert!(Network::cherry().is_level_k(1));
        assert!(Network::trivial().is_level_k(1));
        assert_eq!(Network::trivial().n_leaves(), 1);
    }

    #[test]
    fn rejects_malformed_inputs() {
        assert_eq!(Network::from_edges(0, &[], &[]), Err(NetworkError::Empty));
        assert!(matches!(
            Network::from_edges(3, &[(0, 1), (0, 1)], &[]),
            Err(NetworkError::ParallelEdge(0, 1))
        ));
        assert!(matches!(
            Network::from_edges(3, &[(0, 1), (1, 2), (2, 0)], &[]),
            Err(NetworkError::RootCount(0))
        ));
        // tree vertex with a single child
        assert!(matches!(
            Network::from_edges(3, &[(0, 1), (1, 2)], &[(2, 1)]),
            Err(NetworkError::BadDegree { .. })
        ));
        // missing label
        assert!(matches!(
            Network::from_edges(3, &[(0, 1), (0, 2)], &[(1, 1)]),
            Err(NetworkError::Labels(_))
        ));
    }

    #[test]
    fn split_behaviour() {
        assert!(Network::cherry().split_test(0).unwrap());
        let t = triangle();
        assert!(!t.split_test(0).unwrap());
        assert!(t.split_test(3).is_err());
    }

    #[test]
    fn triangle_is_simple_head() {
        let t = triangle();
        assert!(t.is_simple());
        assert!(t.is_head_structure(1));
        assert!(!Network::cherry().is_simple());
    }

    #[test]
    fn blob_with_single_bridge_source_fails() {
        // Three reticulations funnel into one exit, so only one vertex of the
        // blob is the source of a bridge.
        let net = Network::from_edges(
            7,
            &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 5), (4, 5), (5, 6)],
            &[(6, 1)],
        )
        .unwrap();
        let err = net.validate_level_k(3).unwrap_err();
        assert_eq!(err.reason, ViolationReason::TooFewBridgeSources { found: 1 });
        let err = net.validate_level_k(2).unwrap_err();
        assert_eq!(err.reason, ViolationReason::TooManyReticulations { found: 3, k: 2 });
        assert!(err.to_string().contains("3 reticulations"));
    }

    #[test]
    fn json_round_trip_and_dot() {
        let t = triangle();
        let j = t.to_json();
        let back = Network::from_json(&j).unwrap();
        assert_eq!(back.to_json(), j);
        assert_eq!(back.canonical_code(), t.canonical_code());
        let dot = t.to_dot();
        assert!(dot.contains("shape=box"));
        assert_eq!(Network::trivial().to_json(), r#"{"n_vertices":1,"root":0,"edges":[],"leaf_labels":{"0":1}}"#);
    }

    #[test]
    fn labelled_isomorphism() {
        let a = Network::from_edges(3, &[(0, 1), (0, 2)], &[(1, 1), (2, 2)]).unwrap();
        let b = Network::from_edges(3, &[(0, 2), (0, 1)], &[(1, 2), (2, 1)]).unwrap();
        assert_eq!(a.canonical_code(), b.canonical_code());
    }
}
