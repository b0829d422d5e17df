//! Local limits: the size-biased spine tree, the neighbourhood of the root in
//! the infinite network, and the neighbourhood of a uniform vertex.
//!
//! Limit objects are infinite, so only a finite piece is built. Tree
//! vertices within a depth margin are decorated; deeper ones are left as
//! undecorated boundary leaves. Blowing up a tree never shortens a tree path
//! by more than one step per head, and every network vertex lies in the head
//! of one tree vertex, so a margin of one tree step beyond the requested
//! network radius keeps the ball exact.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::{LevelSampler, PlaneTree, SamplerError};
use crate::network::{BlowUp, DecoratedTree, Network, TreeNode};

/// A plane tree with one distinguished vertex (preorder index).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkedTree {
    pub tree: PlaneTree,
    pub marked: usize,
}

/// A finite piece of a limit network around a distinguished vertex.
#[derive(Clone, Debug)]
pub struct LocalView {
    pub network: Network,
    pub center: usize,
}

impl LocalView {
    pub fn ball_code(&self, radius: usize) -> Vec<u64> {
        self.network.ball_code(self.center, radius)
    }
}

/// Tree under construction; node 0 is the root.
struct Draft<'a> {
    sampler: &'a LevelSampler,
    children: Vec<Vec<usize>>,
    heads: Vec<Option<Network>>,
    max_nodes: usize,
}

impl<'a> Draft<'a> {
    fn new(sampler: &'a LevelSampler, max_nodes: usize) -> Self {
        Draft { sampler, children: Vec::new(), heads: Vec::new(), max_nodes }
    }

    fn alloc(&mut self) -> Result<usize, SamplerError> {
        if self.children.len() >= self.max_nodes {
            return Err(SamplerError::TooLarge(self.max_nodes));
        }
        self.children.push(Vec::new());
        self.heads.push(None);
        Ok(self.children.len() - 1)
    }

    /// Decorated inner node with a uniform head on `d` leaves.
    fn inner<R: Rng + ?Sized>(&mut self, d: usize, rng: &mut R) -> Result<usize, SamplerError> {
        let v = self.alloc()?;
        self.heads[v] = Some(self.sampler.heads.sample(d, rng)?.network);
        Ok(v)
    }

    /// Galton-Watson subtree whose vertices at relative depth at most
    /// `budget` are expanded; deeper vertices become boundary leaves.
    fn fringe<R: Rng + ?Sized>(&mut self, budget: i64, rng: &mut R) -> Result<usize, SamplerError> {
        if budget < 0 {
            return self.alloc();
        }
        let d = self.sampler.model.sample(rng);
        if d == 0 {
            return self.alloc();
        }
        let v = self.inner(d, rng)?;
        for _ in 0..d {
            let c = self.fringe(budget - 1, rng)?;
            self.children[v].push(c);
        }
        Ok(v)
    }

    /// Children to the right of each spine child, given as
    /// `(node, count, budget)` from the top of the spine down.
    fn append_right_siblings<R: Rng + ?Sized>(
        &mut self,
        pending: &[(usize, usize, i64)],
        rng: &mut R,
    ) -> Result<(), SamplerError> {
        for &(v, count, budget) in pending.iter().rev() {
            for _ in 0..count {
                let c = self.fringe(budget, rng)?;
                self.children[v].push(c);
            }
        }
        Ok(())
    }

    fn finish(self) -> BlowUp {
        let mut label = 0u32;
        let nodes: Vec<TreeNode> = self
            .children
            .into_iter()
            .zip(self.heads)
            .map(|(cs, head)| match head {
                Some(h) => TreeNode::internal(cs, h),
                None => {
                    label += 1;
                    TreeNode::leaf(label)
                }
            })
            .collect();
        DecoratedTree::new_unchecked(true, nodes).blow_up()
    }
}

impl LevelSampler {
    /// The size-biased spine tree truncated at spine length `depth`: spine
    /// vertices have size-biased outdegree and a uniform spine child, all
    /// other vertices are unconditioned. The marked vertex is the spine end.
    pub fn sample_spine_tree<R: Rng + ?Sized>(
        &self,
        depth: usize,
        rng: &mut R,
        max_vertices: usize,
    ) -> Result<MarkedTree, SamplerError> {
        let mut degrees = Vec::new();
        let mut after: Vec<usize> = Vec::with_capacity(depth);
        let push_gw = |degrees: &mut Vec<u32>, rng: &mut R| -> Result<(), SamplerError> {
            let room = max_vertices.saturating_sub(degrees.len());
            let t = self.sample_gw_tree(rng, room).map_err(|_| SamplerError::TooLarge(max_vertices))?;
            degrees.extend_from_slice(t.degrees());
            Ok(())
        };
        for _ in 0..depth {
            let d = self.model.sample_size_biased(rng);
            let s = rng.random_range(0..d);
            degrees.push(d as u32);
            for _ in 0..s {
                push_gw(&mut degrees, rng)?;
            }
            after.push(d - 1 - s);
        }
        let marked = degrees.len();
        push_gw(&mut degrees, rng)?;
        for &count in after.iter().rev() {
            for _ in 0..count {
                push_gw(&mut degrees, rng)?;
            }
        }
        Ok(MarkedTree { tree: PlaneTree::from_degrees_unchecked(degrees), marked })
    }

    /// Finite piece of the infinite limit network seen from its root, exact
    /// within undirected network distance `radius` of the root.
    pub fn sample_root_limit<R: Rng + ?Sized>(
        &self,
        radius: usize,
        rng: &mut R,
        max_vertices: usize,
    ) -> Result<LocalView, SamplerError> {
        let mut draft = Draft::new(self, max_vertices);
        let last = radius as i64 + 1;
        // spine vertex j sits at tree depth j; decorate up to depth radius + 1
        let mut parent: Option<(usize, usize)> = None;
        let mut pending: Vec<(usize, usize, i64)> = Vec::new();
        for j in 0..=last {
            let d = self.model.sample_size_biased(rng);
            let v = draft.inner(d, rng)?;
            attach(&mut draft, parent, v);
            let s = rng.random_range(0..d);
            for _ in 0..s {
                let c = draft.fringe(last - j - 1, rng)?;
                draft.children[v].push(c);
            }
            parent = Some((v, s));
            pending.push((v, d - 1 - s, last - j - 1));
        }
        let boundary = draft.alloc()?;
        attach(&mut draft, parent, boundary);
        draft.append_right_siblings(&pending, rng)?;
        let x = draft.finish();
        Ok(LocalView { center: x.vertex_of_node[0] as usize, network: x.network })
    }

    /// Finite piece of the limit network seen from a uniform vertex, exact
    /// within undirected network distance `radius` of that vertex.
    ///
    /// The distinguished vertex is either a tree vertex (the leaf side of
    /// its parent's head) or a surplus vertex of a head. The first head above
    /// it has outdegree `d` with probability proportional to
    /// `P(xi = d) (d + E[surplus | d])`; given `d`, it is a tree child with
    /// probability `d / (d + E[surplus | d])` and the head is uniform, and
    /// otherwise the head is surplus-biased and the vertex is a uniform
    /// surplus vertex of it. Further ancestors are size-biased with a uniform
    /// spine child.
    pub fn sample_vertex_limit<R: Rng + ?Sized>(
        &self,
        radius: usize,
        rng: &mut R,
        max_vertices: usize,
    ) -> Result<LocalView, SamplerError> {
        let law = self.first_parent_law()?;
        let d1 = law.degrees[law.alias.sample(rng)];
        let mean_surplus = self.heads.mean_surplus(d1)?;
        let on_leaf = rng.random::<f64>() * (d1 as f64 + mean_surplus) < d1 as f64;
        let head1 = if on_leaf { self.heads.sample(d1, rng)? } else { self.heads.sample_surplus_biased(d1, rng)? };
        let leaf_slot = rng.random_range(0..d1);

        let levels = radius + 1;
        // ancestors a_2 .. a_{radius+1}: (outdegree, spine position)
        let mut ancestors = Vec::with_capacity(levels - 1);
        for _ in 1..levels {
            let d = self.model.sample_size_biased(rng);
            ancestors.push((d, rng.random_range(0..d)));
        }

        let mut draft = Draft::new(self, max_vertices);
        let r = radius as i64;
        let mut parent: Option<(usize, usize)> = None; // (node, insert position)
        let mut pending: Vec<(usize, usize, i64)> = Vec::new();
        // build from the top ancestor a_{levels} down to a_2
        for j in (2..=levels).rev() {
            let (d, s) = ancestors[j - 2];
            let v = draft.inner(d, rng)?;
            attach(&mut draft, parent, v);
            for _ in 0..s {
                let c = draft.fringe(r - j as i64, rng)?;
                draft.children[v].push(c);
            }
            parent = Some((v, s));
            pending.push((v, d - 1 - s, r - j as i64));
        }
        let a1 = draft.alloc()?;
        draft.heads[a1] = Some(head1.network);
        attach(&mut draft, parent, a1);
        let mut u_node = None;
        for c in 0..d1 {
            let child = if on_leaf && c == leaf_slot {
                let u = draft.fringe(r + 1, rng)?;
                u_node = Some(u);
                u
            } else {
                draft.fringe(r - 1, rng)?
            };
            draft.children[a1].push(child);
        }
        draft.append_right_siblings(&pending, rng)?;
        let x = draft.finish();
        let center = match u_node {
            Some(u) => x.vertex_of_node[u] as usize,
            None => *x.surplus[a1].choose(rng).expect("surplus-biased heads have surplus") as usize,
        };
        Ok(LocalView { network: x.network, center })
    }

    fn first_parent_law(&self) -> Result<FirstParentLaw, SamplerError> {
        let mut degrees = Vec::new();
        let mut weights = Vec::new();
        for d in 2..self.model.pmf.len().min(self.heads.d_max() + 1) {
            let w = self.model.pmf[d] * (d as f64 + self.heads.mean_surplus(d)?);
            if w > 0.0 {
                degrees.push(d);
                weights.push(w);
            }
        }
        let alias = WeightedAliasIndex::new(weights).map_err(|e| SamplerError::Config(e.to_string()))?;
        Ok(FirstParentLaw { degrees, alias })
    }

    /// `E[kappa]`: expected surplus of the head at a root of outdegree `xi`.
    pub fn mean_surplus_per_vertex(&self) -> Result<f64, SamplerError> {
        let mut total = 0.0;
        for d in 2..self.model.pmf.len().min(self.heads.d_max() + 1) {
            total += self.model.pmf[d] * self.heads.mean_surplus(d)?;
        }
        Ok(total)
    }
}

struct FirstParentLaw {
    degrees: Vec<usize>,
    alias: WeightedAliasIndex<f64>,
}

/// Places `v` as the spine child of `parent` (appended after the siblings
/// already drawn to its left).
fn attach(draft: &mut Draft<'_>, parent: Option<(usize, usize)>, v: usize) {
    if let Some((p, s)) = parent {
        debug_assert_eq!(draft.children[p].len(), s);
        draft.children[p].push(v);
    }
}
