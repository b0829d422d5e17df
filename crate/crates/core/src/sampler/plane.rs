//! Plane trees stored as their preorder outdegree sequence.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("outdegree sequence is not the preorder sequence of a tree")]
pub struct NotATree;

/// A rooted plane tree. Vertex `i` is the `i`-th vertex in depth-first
/// preorder (children visited left to right); `degrees[i]` is its outdegree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaneTree {
    degrees: Vec<u32>,
}

impl PlaneTree {
    /// Accepts exactly the sequences whose partial sums of `degree - 1` stay
    /// nonnegative until the last entry, where they reach `-1`.
    pub fn from_degrees(degrees: Vec<u32>) -> Result<Self, NotATree> {
        let mut open: i64 = 1;
        for (i, &d) in degrees.iter().enumerate() {
            if open <= 0 {
                return Err(NotATree);
            }
            open += d as i64 - 1;
            if open == 0 && i + 1 != degrees.len() {
                return Err(NotATree);
            }
        }
        if open != 0 {
            return Err(NotATree);
        }
        Ok(PlaneTree { degrees })
    }

    pub(crate) fn from_degrees_unchecked(degrees: Vec<u32>) -> Self {
        debug_assert!(PlaneTree::from_degrees(degrees.clone()).is_ok());
        PlaneTree { degrees }
    }

    pub fn single_vertex() -> Self {
        PlaneTree { degrees: vec![0] }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn n_vertices(&self) -> usize {
        self.degrees.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.degrees.iter().filter(|&&d| d == 0).count()
    }

    /// Children of every vertex, left to right.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children: Vec<Vec<usize>> =
            self.degrees.iter().map(|&d| Vec::with_capacity(d as usize)).collect();
        let mut stack: Vec<usize> = Vec::new();
        for (v, &d) in self.degrees.iter().enumerate() {
            if let Some(&p) = stack.last() {
                children[p].push(v);
                if children[p].len() == self.degrees[p] as usize {
                    stack.pop();
                }
            }
            if d > 0 {
                stack.push(v);
            }
        }
        children
    }

    /// Parent of every vertex (`None` for the root).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.degrees.len()];
        for (p, cs) in self.children().iter().enumerate() {
            for &c in cs {
                parent[c] = Some(p);
            }
        }
        parent
    }

    /// Depth of every vertex.
    pub fn heights(&self) -> Vec<u32> {
        let mut heights = vec![0u32; self.degrees.len()];
        // remaining[j]: unvisited children of the j-th vertex on the stack
        let mut remaining: Vec<(u32, u32)> = Vec::new();
        for (v, &d) in self.degrees.iter().enumerate() {
            if let Some(top) = remaining.last_mut() {
                top.1 -= 1;
                heights[v] = top.0 + 1;
                if top.1 == 0 {
                    remaining.pop();
                }
            }
            if d > 0 {
                remaining.push((heights[v], d));
            }
        }
        heights
    }

    pub fn height(&self) -> u32 {
        self.heights().into_iter().max().unwrap_or(0)
    }

    /// The unique cyclic rotation of a sequence with `sum(d - 1) = -1` that
    /// is a valid preorder sequence: start right after the first minimum of
    /// the partial sums.
    pub fn from_cyclic_shift(word: &[u32]) -> Result<Self, NotATree> {
        let total: i64 = word.iter().map(|&d| d as i64 - 1).sum();
        if total != -1 || word.is_empty() {
            return Err(NotATree);
        }
        let mut sum = 0i64;
        let mut min = i64::MAX;
        let mut at = 0;
        for (i, &d) in word.iter().enumerate() {
            sum += d as i64 - 1;
            if sum < min {
                min = sum;
                at = i;
            }
        }
        let start = (at + 1) % word.len();
        let mut degrees = Vec::with_capacity(word.len());
        degrees.extend_from_slice(&word[start..]);
        degrees.extend_from_slice(&word[..start]);
        Ok(PlaneTree::from_degrees_unchecked(degrees))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validates_preorder_sequences() {
        assert!(PlaneTree::from_degrees(vec![2, 0, 0]).is_ok());
        assert!(PlaneTree::from_degrees(vec![0]).is_ok());
        assert!(PlaneTree::from_degrees(vec![0, 0]).is_err());
        assert!(PlaneTree::from_degrees(vec![2, 0]).is_err());
        assert!(PlaneTree::from_degrees(vec![]).is_err());
    }

    #[test]
    fn children_and_heights() {
        let t = PlaneTree::from_degrees(vec![2, 2, 0, 0, 0]).unwrap();
        assert_eq!(t.children(), vec![vec![1, 4], vec![2, 3], vec![], vec![], vec![]]);
        assert_eq!(t.heights(), vec![0, 1, 2, 2, 1]);
        assert_eq!(t.height(), 2);
        assert_eq!(t.parents(), vec![None, Some(0), Some(1), Some(1), Some(0)]);
        assert_eq!(t.n_leaves(), 3);
    }

    proptest! {
        #[test]
        fn exactly_one_rotation_is_a_tree(raw in proptest::collection::vec(0u32..4, 1..30)) {
            // force sum(d - 1) = -1 by appending leaves or trimming
            let mut word = raw;
            let mut total: i64 = word.iter().map(|&d| d as i64 - 1).sum();
            while total > -1 {
                word.push(0);
                total -= 1;
            }
            while total < -1 {
                word.push(2);
                total += 1;
            }
            let valid = (0..word.len())
                .filter(|&s| {
                    let mut w = word[s..].to_vec();
                    w.extend_from_slice(&word[..s]);
                    PlaneTree::from_degrees(w).is_ok()
                })
                .count();
            prop_assert_eq!(valid, 1);
            let t = PlaneTree::from_cyclic_shift(&word).unwrap();
            prop_assert_eq!(t.n_vertices(), word.len());
            let heights = t.heights();
            let parents = t.parents();
            for v in 1..t.n_vertices() {
                prop_assert_eq!(heights[v], heights[parents[v].unwrap()] + 1);
            }
        }
    }
}
