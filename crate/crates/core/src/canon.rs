//! Canonical forms and automorphism groups of small vertex-coloured,
//! edge-weighted digraphs.
//!
//! The search refines an ordered partition by neighbourhood signatures and
//! branches on every vertex of the first non-singleton cell. Each discrete
//! leaf yields a code; the canonical code is the least one. Graphs handled
//! here are small (generators, tiny networks, neighbourhood balls).

use std::cmp::Ordering;

#[derive(Clone, Debug, Default)]
pub struct ColoredDigraph {
    colors: Vec<u64>,
    out: Vec<Vec<(usize, u64)>>,
    inn: Vec<Vec<(usize, u64)>>,
}

/// A canonical code plus the vertex order that produced it:
/// `order[p]` is the vertex placed at canonical position `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canonical {
    pub code: Vec<u64>,
    pub order: Vec<usize>,
}

impl ColoredDigraph {
    pub fn new(colors: Vec<u64>) -> Self {
        let n = colors.len();
        ColoredDigraph { colors, out: vec![Vec::new(); n], inn: vec![Vec::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// Adds an edge of the given weight. Repeated calls for the same ordered
    /// pair add separate entries; callers encode multiplicity as weight.
    pub fn add_edge(&mut self, s: usize, d: usize, weight: u64) {
        self.out[s].push((d, weight));
        self.inn[d].push((s, weight));
    }

    fn code_for(&self, order: &[usize]) -> Vec<u64> {
        let n = self.len();
        let mut pos = vec![0usize; n];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }
        let mut edges: Vec<(u64, u64, u64)> = Vec::new();
        for (s, list) in self.out.iter().enumerate() {
            for &(d, w) in list {
                edges.push((pos[s] as u64, pos[d] as u64, w));
            }
        }
        edges.sort_unstable();
        let mut code = Vec::with_capacity(2 + n + 3 * edges.len());
        code.push(n as u64);
        code.extend(order.iter().map(|&v| self.colors[v]));
        code.push(edges.len() as u64);
        for (s, d, w) in edges {
            code.extend([s, d, w]);
        }
        code
    }

    fn signature(&self, v: usize, cell_of: &[usize]) -> Vec<u64> {
        let mut sig: Vec<u64> = self.out[v]
            .iter()
            .map(|&(u, w)| ((cell_of[u] as u64) << 20) | w)
            .collect();
        sig.sort_unstable();
        let mut back: Vec<u64> =
            self.inn[v].iter().map(|&(u, w)| ((cell_of[u] as u64) << 20) | w).collect();
        back.sort_unstable();
        sig.push(u64::MAX);
        sig.extend(back);
        sig
    }

    /// Splits cells by neighbourhood signatures until stable.
    fn refine(&self, cells: &mut Vec<Vec<usize>>) {
        let mut cell_of = vec![0usize; self.len()];
        loop {
            for (ci, c) in cells.iter().enumerate() {
                for &v in c {
                    cell_of[v] = ci;
                }
            }
            let mut changed = false;
            let mut next = Vec::with_capacity(cells.len());
            for c in cells.iter() {
                if c.len() == 1 {
                    next.push(c.clone());
                    continue;
                }
                let mut keyed: Vec<(Vec<u64>, usize)> =
                    c.iter().map(|&v| (self.signature(v, &cell_of), v)).collect();
                keyed.sort();
                let mut start = 0;
                for i in 1..=keyed.len() {
                    if i == keyed.len() || keyed[i].0 != keyed[start].0 {
                        next.push(keyed[start..i].iter().map(|x| x.1).collect());
                        start = i;
                    }
                }
                if next.last().map(Vec::len) != Some(c.len()) {
                    changed = true;
                }
            }
            *cells = next;
            if !changed {
                return;
            }
        }
    }

    fn initial_cells(&self) -> Vec<Vec<usize>> {
        let key = |x: usize| {
            let weight = |l: &Vec<(usize, u64)>| l.iter().map(|e| e.1).sum::<u64>();
            (self.colors[x], weight(&self.inn[x]), weight(&self.out[x]))
        };
        let mut vs: Vec<usize> = (0..self.len()).collect();
        vs.sort_by_key(|&v| key(v));
        let mut cells: Vec<Vec<usize>> = Vec::new();
        for v in vs {
            match cells.last_mut() {
                Some(c) if key(c[0]) == key(v) => c.push(v),
                _ => cells.push(vec![v]),
            }
        }
        cells
    }

    /// Collects every discrete leaf of the search tree.
    fn search(&self, mut cells: Vec<Vec<usize>>, leaves: &mut Vec<Canonical>, best_only: bool) {
        self.refine(&mut cells);
        let target = cells.iter().position(|c| c.len() > 1);
        match target {
            None => {
                let order: Vec<usize> = cells.iter().map(|c| c[0]).collect();
                let code = self.code_for(&order);
                if best_only {
                    match leaves.first() {
                        Some(b) if b.code <= code => {}
                        _ => {
                            leaves.clear();
                            leaves.push(Canonical { code, order });
                        }
                    }
                } else {
                    leaves.push(Canonical { code, order });
                }
            }
            Some(t) => {
                for i in 0..cells[t].len() {
                    let mut branch = Vec::with_capacity(cells.len() + 1);
                    branch.extend_from_slice(&cells[..t]);
                    let v = cells[t][i];
                    let rest: Vec<usize> =
                        cells[t].iter().copied().filter(|&u| u != v).collect();
                    branch.push(vec![v]);
                    branch.push(rest);
                    branch.extend_from_slice(&cells[t + 1..]);
                    self.search(branch, leaves, best_only);
                }
            }
        }
    }

    pub fn canonical(&self) -> Canonical {
        if self.is_empty() {
            return Canonical { code: vec![0, 0], order: Vec::new() };
        }
        let mut leaves = Vec::new();
        self.search(self.initial_cells(), &mut leaves, true);
        leaves.pop().expect("search reaches at least one leaf")
    }

    /// All colour- and weight-preserving automorphisms as vertex maps
    /// (`perm[v]` is the image of `v`). The identity is always included.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        if self.is_empty() {
            return vec![Vec::new()];
        }
        let mut leaves = Vec::new();
        self.search(self.initial_cells(), &mut leaves, false);
        let best = leaves
            .iter()
            .min_by(|a, b| a.code.cmp(&b.code))
            .expect("nonempty search")
            .clone();
        let mut autos: Vec<Vec<usize>> = leaves
            .iter()
            .filter(|l| l.code.cmp(&best.code) == Ordering::Equal)
            .map(|l| {
                let mut perm = vec![0; self.len()];
                for (p, &v) in best.order.iter().enumerate() {
                    perm[v] = l.order[p];
                }
                perm
            })
            .collect();
        autos.sort();
        autos.dedup();
        autos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn directed_cycle(n: usize) -> ColoredDigraph {
        let mut g = ColoredDigraph::new(vec![0; n]);
        for i in 0..n {
            g.add_edge(i, (i + 1) % n, 1);
        }
        g
    }

    #[test]
    fn cycle_has_rotation_group() {
        assert_eq!(directed_cycle(5).automorphisms().len(), 5);
    }

    #[test]
    fn relabelled_graphs_share_code() {
        let mut a = ColoredDigraph::new(vec![1, 0, 0, 0]);
        a.add_edge(0, 1, 1);
        a.add_edge(0, 2, 1);
        a.add_edge(1, 3, 2);
        let mut b = ColoredDigraph::new(vec![0, 0, 1, 0]);
        b.add_edge(2, 3, 1);
        b.add_edge(2, 0, 1);
        b.add_edge(3, 1, 2);
        assert_eq!(a.canonical().code, b.canonical().code);
        let mut c = ColoredDigraph::new(vec![0, 0, 1, 0]);
        c.add_edge(2, 3, 1);
        c.add_edge(2, 0, 1);
        c.add_edge(3, 1, 1);
        assert_ne!(a.canonical().code, c.canonical().code);
    }

    #[test]
    fn colours_break_symmetry() {
        let mut g = ColoredDigraph::new(vec![0, 0, 0]);
        g.add_edge(0, 1, 1);
        g.add_edge(0, 2, 1);
        assert_eq!(g.automorphisms().len(), 2);
        let mut h = ColoredDigraph::new(vec![0, 1, 2]);
        h.add_edge(0, 1, 1);
        h.add_edge(0, 2, 1);
        assert_eq!(h.automorphisms().len(), 1);
    }

    /// Brute force over all permutations as an independent check.
    fn brute_automorphism_count(g: &ColoredDigraph) -> usize {
        let n = g.len();
        let mut edges: Vec<(usize, usize, u64)> = Vec::new();
        for (s, l) in g.out.iter().enumerate() {
            for &(d, w) in l {
                edges.push((s, d, w));
            }
        }
        edges.sort();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut count = 0;
        loop {
            let ok = (0..n).all(|v| g.colors[v] == g.colors[perm[v]]) && {
                let mut mapped: Vec<_> = edges.iter().map(|&(s, d, w)| (perm[s], perm[d], w)).collect();
                mapped.sort();
                mapped == edges
            };
            if ok {
                count += 1;
            }
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
        count
    }

    #[test]
    fn automorphism_counts_match_permutation_search() {
        // complete bipartite orientation K_{2,3}
        let mut g = ColoredDigraph::new(vec![0; 5]);
        for s in 0..2 {
            for d in 2..5 {
                g.add_edge(s, d, 1);
            }
        }
        assert_eq!(g.automorphisms().len(), brute_automorphism_count(&g));
        assert_eq!(g.automorphisms().len(), 12);
        let c = directed_cycle(6);
        assert_eq!(c.automorphisms().len(), brute_automorphism_count(&c));
    }
}
