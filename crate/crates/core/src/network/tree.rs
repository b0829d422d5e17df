//! Decorated trees and the bijection between them and networks.
//!
//! A decorated tree is a rooted tree whose leaves carry the network's leaf
//! labels and whose internal vertices each carry a head structure: a network
//! whose leaves are labelled `1..=d`, label `i` standing for the `i`-th child.

use thiserror::Error;

use super::{Adjacency, Network, NetworkError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecomposeError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("the structure hanging from vertex {0} is not a head structure")]
    NotAHead(usize),
    #[error("malformed decorated tree: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub children: Vec<usize>,
    /// Leaf label (leaves only).
    pub label: Option<u32>,
    /// Decoration (internal vertices only).
    pub head: Option<Network>,
}

impl TreeNode {
    pub fn leaf(label: u32) -> Self {
        TreeNode { children: Vec::new(), label: Some(label), head: None }
    }

    pub fn internal(children: Vec<usize>, head: Network) -> Self {
        TreeNode { children, label: None, head: Some(head) }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Node 0 is the root. `plane` records whether child order is meaningful.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoratedTree {
    plane: bool,
    nodes: Vec<TreeNode>,
}

/// Result of blowing up a decorated tree, with provenance: the network vertex
/// of every tree node and the surplus vertices each decoration contributed
/// (in head-vertex order).
#[derive(Clone, Debug)]
pub struct BlowUp {
    pub network: Network,
    pub vertex_of_node: Vec<u32>,
    pub surplus: Vec<Vec<u32>>,
}

impl DecoratedTree {
    /// Validates the tree shape, labels and decorations. With `k = Some(..)`
    /// every decoration must be a level-k head structure.
    pub fn new(plane: bool, nodes: Vec<TreeNode>, k: Option<usize>) -> Result<Self, DecomposeError> {
        let t = DecoratedTree { plane, nodes };
        t.check(k)?;
        Ok(t)
    }

    pub(crate) fn new_unchecked(plane: bool, nodes: Vec<TreeNode>) -> Self {
        DecoratedTree { plane, nodes }
    }

    pub fn single_leaf() -> Self {
        DecoratedTree { plane: true, nodes: vec![TreeNode::leaf(1)] }
    }

    fn check(&self, k: Option<usize>) -> Result<(), DecomposeError> {
        let bad = |m: String| Err(DecomposeError::Malformed(m));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut parent_seen = vec![false; self.nodes.len()];
        parent_seen[0] = true;
        let mut labels = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                if c >= self.nodes.len() || parent_seen[c] {
                    return bad(format!("node {c} has several parents or is out of range"));
                }
                parent_seen[c] = true;
            }
            if node.is_leaf() {
                match node.label {
                    Some(l) if node.head.is_none() => labels.push(l),
                    _ => return bad(format!("leaf node {i} needs a label and no decoration")),
                }
                continue;
            }
            if node.children.len() < 2 || node.label.is_some() {
                return bad(format!("internal node {i} needs outdegree >= 2 and no label"));
            }
            let Some(head) = &node.head else {
                return bad(format!("internal node {i} lacks a decoration"));
            };
            if head.n_leaves() != node.children.len() {
                return bad(format!("decoration of node {i} has the wrong number of leaves"));
            }
            if !head.is_head_structure(k.unwrap_or(usize::MAX)) {
                return Err(DecomposeError::NotAHead(i));
            }
        }
        if parent_seen.iter().any(|s| !s) {
            return bad("some node is unreachable from the root".into());
        }
        labels.sort_unstable();
        if labels.iter().enumerate().any(|(i, &l)| l as usize != i + 1) {
            return bad("leaf labels are not 1..=n".into());
        }
        Ok(())
    }

    pub fn is_plane(&self) -> bool {
        self.plane
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Node ids in depth-first preorder, children visited in stored order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(t) = stack.pop() {
            order.push(t);
            stack.extend(self.nodes[t].children.iter().rev());
        }
        order
    }

    /// Replaces every internal node by its decoration, identifying the head's
    /// root with the node and head leaf `i` with the node's `i`-th child.
    pub fn blow_up(&self) -> BlowUp {
        let mut node_vertex = vec![u32::MAX; self.nodes.len()];
        let mut surplus = vec![Vec::new(); self.nodes.len()];
        let mut children: Vec<Adjacency> = vec![Adjacency::new()];
        let mut labels: Vec<u32> = vec![0];
        node_vertex[0] = 0;
        let mut stack = vec![0usize];
        let mut hv: Vec<u32> = Vec::new();
        while let Some(t) = stack.pop() {
            let v = node_vertex[t];
            let node = &self.nodes[t];
            if node.is_leaf() {
                labels[v as usize] = node.label.expect("leaf nodes are labelled");
                continue;
            }
            let head = node.head.as_ref().expect("internal nodes are decorated");
            hv.clear();
            hv.resize(head.n_vertices(), u32::MAX);
            hv[head.root()] = v;
            for (i, &c) in node.children.iter().enumerate() {
                let id = children.len() as u32;
                children.push(Adjacency::new());
                labels.push(0);
                node_vertex[c] = id;
                hv[head.leaf_with_label(i as u32 + 1)] = id;
            }
            for x in 0..head.n_vertices() {
                if hv[x] == u32::MAX {
                    let id = children.len() as u32;
                    children.push(Adjacency::new());
                    labels.push(0);
                    hv[x] = id;
                    surplus[t].push(id);
                }
            }
            for x in 0..head.n_vertices() {
                for &c in head.children(x) {
                    children[hv[x] as usize].push(hv[c as usize]);
                }
            }
            stack.extend(node.children.iter().rev());
        }
        let network = Network::from_adjacency(children, labels)
            .expect("blowing up a valid decorated tree gives a valid network");
        BlowUp { network, vertex_of_node: node_vertex, surplus }
    }

    pub fn to_network(&self) -> Network {
        self.blow_up().network
    }

    /// Inverse of [`DecoratedTree::blow_up`]. Children are ordered by the
    /// smallest leaf label below them and the result is marked unordered.
    pub fn decompose(net: &Network) -> Result<DecoratedTree, DecomposeError> {
        if net.n_vertices() == 1 {
            return Ok(DecoratedTree { plane: false, nodes: vec![TreeNode::leaf(1)] });
        }
        let blocks = net.blocks();
        let n = net.n_vertices();
        let mut min_label = vec![u32::MAX; n];
        for &v in net.topological_order().iter().rev() {
            min_label[v] = match net.label(v) {
                Some(l) => l,
                None => net.children(v).iter().map(|&c| min_label[c as usize]).min().unwrap_or(u32::MAX),
            };
        }
        let mut nodes: Vec<TreeNode> = vec![TreeNode::leaf(0)];
        let mut stack = vec![(net.root(), 0usize)];
        let mut head_index = vec![u32::MAX; n];
        while let Some((r, t)) = stack.pop() {
            if let Some(l) = net.label(r) {
                nodes[t] = TreeNode::leaf(l);
                continue;
            }
            let cs = net.children(r);
            if cs.len() != 2 {
                return Err(NetworkError::NotBinaryVertex(r).into());
            }
            let bridge0 = blocks.block_of(r, 0).is_bridge();
            let bridge1 = blocks.block_of(r, 1).is_bridge();
            let (head, mut kids) = if bridge0 && bridge1 {
                (Network::cherry(), vec![cs[0] as usize, cs[1] as usize])
            } else if bridge0 || bridge1 {
                return Err(DecomposeError::NotAHead(r));
            } else {
                let bi = blocks.block_index_of(r, 0);
                if blocks.block_index_of(r, 1) != bi {
                    return Err(DecomposeError::NotAHead(r));
                }
                let block = &blocks.blocks[bi];
                let mut kids = Vec::new();
                for &x in &block.vertices {
                    for (i, &c) in net.children(x as usize).iter().enumerate() {
                        if blocks.block_index_of(x as usize, i) != bi {
                            if !blocks.block_of(x as usize, i).is_bridge() {
                                return Err(DecomposeError::NotAHead(r));
                            }
                            kids.push(c as usize);
                        }
                    }
                }
                kids.sort_by_key(|&c| min_label[c]);
                head_index[r] = 0;
                let mut next = 1u32;
                for &x in &block.vertices {
                    if x as usize != r {
                        head_index[x as usize] = next;
                        next += 1;
                    }
                }
                for &c in &kids {
                    head_index[c] = next;
                    next += 1;
                }
                let size = next as usize;
                let mut hc = vec![Adjacency::new(); size];
                let mut hl = vec![0u32; size];
                for &x in &block.vertices {
                    for &c in net.children(x as usize) {
                        hc[head_index[x as usize] as usize].push(head_index[c as usize]);
                    }
                }
                for (i, &c) in kids.iter().enumerate() {
                    hl[head_index[c] as usize] = i as u32 + 1;
                }
                for &x in &block.vertices {
                    head_index[x as usize] = u32::MAX;
                }
                for &c in &kids {
                    head_index[c] = u32::MAX;
                }
                let head = Network::from_adjacency(hc, hl)?;
                if !head.is_head_structure(usize::MAX) {
                    return Err(DecomposeError::NotAHead(r));
                }
                (head, kids)
            };
            kids.sort_by_key(|&c| min_label[c]);
            let mut ids = Vec::with_capacity(kids.len());
            for &c in &kids {
                ids.push(nodes.len());
                nodes.push(TreeNode::leaf(0));
                stack.push((c, *ids.last().unwrap()));
            }
            nodes[t] = TreeNode::internal(ids, head);
        }
        Ok(DecoratedTree { plane: false, nodes })
    }

    /// Key identifying the tree up to reordering children (decorations are
    /// relabelled to follow the reordering and compared up to isomorphism).
    pub fn canonical_key(&self) -> Vec<u64> {
        let order = self.preorder();
        let mut min_label = vec![u32::MAX; self.nodes.len()];
        let mut keys: Vec<Vec<u64>> = vec![Vec::new(); self.nodes.len()];
        for &t in order.iter().rev() {
            let node = &self.nodes[t];
            if node.is_leaf() {
                let l = node.label.unwrap_or(0);
                min_label[t] = l;
                keys[t] = vec![1, l as u64];
                continue;
            }
            let mut perm: Vec<usize> = (0..node.children.len()).collect();
            perm.sort_by_key(|&i| min_label[node.children[i]]);
            min_label[t] = min_label[node.children[perm[0]]];
            let mut new_label = vec![0u32; perm.len()];
            for (j, &i) in perm.iter().enumerate() {
                new_label[i] = j as u32 + 1;
            }
            let head = node.head.as_ref().expect("internal nodes are decorated");
            let code = head.relabel_leaves(&new_label).canonical_code();
            let mut key = vec![2, code.len() as u64];
            key.extend(code);
            for &i in &perm {
                key.extend(std::mem::take(&mut keys[node.children[i]]));
            }
            key.push(3);
            keys[t] = key;
        }
        std::mem::take(&mut keys[0])
    }

    /// Equality as unordered decorated trees.
    pub fn same_unordered(&self, other: &DecoratedTree) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}

impl Network {
    /// Copy with leaf label `l` replaced by `new_label[l - 1]`.
    pub fn relabel_leaves(&self, new_label: &[u32]) -> Network {
        let labels = self
            .labels
            .iter()
            .map(|&l| if l == 0 { 0 } else { new_label[l as usize - 1] })
            .collect();
        Network::from_adjacency(self.children.clone(), labels).expect("relabelling keeps validity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::triangle;

    fn cherry_tree() -> DecoratedTree {
        DecoratedTree::new(
            true,
            vec![TreeNode::internal(vec![1, 2], Network::cherry()), TreeNode::leaf(2), TreeNode::leaf(1)],
            Some(1),
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_blows_up_to_trivial() {
        let net = DecoratedTree::single_leaf().to_network();
        assert_eq!(net.n_vertices(), 1);
        assert_eq!(net.label(0), Some(1));
    }

    #[test]
    fn cherry_tree_gives_cherry() {
        let net = cherry_tree().to_network();
        assert!(net.is_cherry());
        let back = DecoratedTree::decompose(&net).unwrap();
        assert!(back.same_unordered(&cherry_tree()));
        assert_eq!(back.n_nodes(), 3);
    }

    #[test]
    fn head_is_its_own_decomposition() {
        let t = triangle();
        let d = DecoratedTree::decompose(&t).unwrap();
        assert_eq!(d.n_nodes(), 3);
        assert!(d.nodes()[0].head.as_ref().unwrap().is_simple());
        assert_eq!(d.to_network().canonical_code(), t.canonical_code());
    }

    #[test]
    fn nested_round_trip() {
        // triangle head whose first leaf is a cherry over {1, 3}
        let nodes = vec![
            TreeNode::internal(vec![1, 2], triangle()),
            TreeNode::internal(vec![3, 4], Network::cherry()),
            TreeNode::leaf(2),
            TreeNode::leaf(3),
            TreeNode::leaf(1),
        ];
        let d = DecoratedTree::new(true, nodes, Some(1)).unwrap();
        let blown = d.blow_up();
        assert_eq!(blown.network.n_vertices(), 7);
        assert_eq!(blown.surplus[0].len(), 2);
        assert!(blown.network.is_level_k(1));
        let back = DecoratedTree::decompose(&blown.network).unwrap();
        assert!(back.same_unordered(&d));
        assert_eq!(back.to_network().canonical_code(), blown.network.canonical_code());
    }

    #[test]
    fn malformed_trees_rejected() {
        let unary = vec![TreeNode::internal(vec![1], Network::cherry()), TreeNode::leaf(1)];
        assert!(DecoratedTree::new(true, unary, None).is_err());
        let bad_labels = vec![
            TreeNode::internal(vec![1, 2], Network::cherry()),
            TreeNode::leaf(1),
            TreeNode::leaf(3),
        ];
        assert!(DecoratedTree::new(true, bad_labels, None).is_err());
    }
}
