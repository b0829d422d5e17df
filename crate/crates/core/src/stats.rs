//! Heights, height processes, neighbourhood censuses and reference values
//! for the scaling limits.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::network::{DecoratedTree, Network};

/// Shortest directed distance from the root to every vertex.
pub fn directed_heights(net: &Network) -> Vec<usize> {
    let mut dist = vec![usize::MAX; net.n_vertices()];
    dist[net.root()] = 0;
    let mut queue = VecDeque::from([net.root()]);
    while let Some(v) = queue.pop_front() {
        for &c in net.children(v) {
            let c = c as usize;
            if dist[c] == usize::MAX {
                dist[c] = dist[v] + 1;
                queue.push_back(c);
            }
        }
    }
    debug_assert!(dist.iter().all(|&d| d != usize::MAX), "every vertex is reachable from the root");
    dist
}

/// Graph distance from the root to every vertex, ignoring orientation.
pub fn undirected_heights(net: &Network) -> Vec<usize> {
    net.undirected_distances(net.root(), usize::MAX)
        .into_iter()
        .map(|d| d.expect("networks are connected"))
        .collect()
}

/// Length of the longest directed path from the root.
pub fn longest_directed_path(net: &Network) -> usize {
    net.depths().into_iter().max().unwrap_or(0)
}

/// Network vertices in the depth-first order of the decomposition tree,
/// each tree vertex followed by the surplus vertices of its head.
pub fn special_order(tree: &DecoratedTree, vertex_of_node: &[u32], surplus: &[Vec<u32>]) -> Vec<usize> {
    let mut order = Vec::with_capacity(vertex_of_node.len() + surplus.iter().map(Vec::len).sum::<usize>());
    for t in tree.preorder() {
        order.push(vertex_of_node[t] as usize);
        order.extend(surplus[t].iter().map(|&v| v as usize));
    }
    order
}

/// Leaves of the network in the depth-first order of the decomposition tree.
pub fn leaf_order(tree: &DecoratedTree, vertex_of_node: &[u32]) -> Vec<usize> {
    tree.preorder()
        .into_iter()
        .filter(|&t| tree.nodes()[t].is_leaf())
        .map(|t| vertex_of_node[t] as usize)
        .collect()
}

/// Heights read off in the given vertex order.
pub fn height_process(heights: &[usize], order: &[usize]) -> Vec<usize> {
    order.iter().map(|&v| heights[v]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CensusScope {
    Vertices,
    Leaves,
    Root,
}

/// Counts of isomorphism classes of radius-`radius` balls.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Census {
    pub radius: usize,
    pub counts: BTreeMap<Vec<u64>, u64>,
    pub total: u64,
}

impl Census {
    pub fn new(radius: usize) -> Self {
        Census { radius, counts: BTreeMap::new(), total: 0 }
    }

    pub fn add(&mut self, code: Vec<u64>) {
        *self.counts.entry(code).or_default() += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Census) {
        assert_eq!(self.radius, other.radius, "censuses of different radii");
        for (code, &c) in &other.counts {
            *self.counts.entry(code.clone()).or_default() += c;
        }
        self.total += other.total;
    }

    pub fn frequency(&self, code: &[u64]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(code).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn frequencies(&self) -> BTreeMap<Vec<u64>, f64> {
        self.counts.keys().map(|c| (c.clone(), self.frequency(c))).collect()
    }

    /// Total variation distance between the two empirical laws.
    pub fn tv(&self, other: &Census) -> f64 {
        let mut keys: Vec<&Vec<u64>> = self.counts.keys().chain(other.counts.keys()).collect();
        keys.sort();
        keys.dedup();
        0.5 * keys.iter().map(|k| (self.frequency(k) - other.frequency(k)).abs()).sum::<f64>()
    }

    /// `{"radius", "total", "classes": {code: frequency}}`, codes written as
    /// dot-separated integers.
    pub fn to_json(&self) -> serde_json::Value {
        let classes: serde_json::Map<String, serde_json::Value> = self
            .counts
            .iter()
            .map(|(code, &c)| {
                let key = code.iter().map(u64::to_string).collect::<Vec<_>>().join(".");
                (key, serde_json::json!(c as f64 / self.total.max(1) as f64))
            })
            .collect();
        serde_json::json!({ "radius": self.radius, "total": self.total, "classes": classes })
    }
}

/// Census of radius-`radius` balls around every vertex, every leaf, or the
/// root only.
pub fn neighborhood_census(net: &Network, radius: usize, scope: CensusScope) -> Census {
    let mut census = Census::new(radius);
    match scope {
        CensusScope::Root => census.add(net.ball_code(net.root(), radius)),
        CensusScope::Vertices => {
            for v in 0..net.n_vertices() {
                census.add(net.ball_code(v, radius));
            }
        }
        CensusScope::Leaves => {
            for (v, _) in net.leaf_labels() {
                census.add(net.ball_code(v, radius));
            }
        }
    }
    census
}

pub fn census_tv(a: &Census, b: &Census) -> f64 {
    a.tv(b)
}

/// Riemann zeta at an integer `p >= 2`: a partial sum plus an
/// Euler-Maclaurin tail.
pub fn zeta(p: u32) -> f64 {
    assert!(p >= 2, "zeta diverges at p = {p}");
    let s = p as f64;
    let n = 20usize;
    let partial: f64 = (1..n).map(|j| (j as f64).powf(-s)).sum();
    let x = n as f64;
    // Bernoulli terms B2/2!, B4/4!, B6/6!, B8/8!
    let b = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    let mut rising = s; // s (s+1) ... (s + 2j - 2)
    for (j, bj) in b.iter().enumerate() {
        tail += bj * rising * x.powf(-s - (2 * j + 1) as f64);
        rising *= (s + (2 * j + 1) as f64) * (s + (2 * j + 2) as f64);
    }
    partial + tail
}

/// `E[(sup e)^p]` for the normalized Brownian excursion `e`.
pub fn excursion_moment(p: u32) -> f64 {
    assert!(p >= 1, "moments start at p = 1");
    if p == 1 {
        return (std::f64::consts::PI / 2.0).sqrt();
    }
    let pf = p as f64;
    2f64.powf(-pf / 2.0) * pf * (pf - 1.0) * statrs::function::gamma::gamma(pf / 2.0) * zeta(p)
}

/// Undirected distance between `a` and `b`, by BFS from both ends.
pub fn pair_distance(net: &Network, a: usize, b: usize) -> usize {
    if a == b {
        return 0;
    }
    let n = net.n_vertices();
    let mut side = vec![0u8; n];
    let mut dist = vec![0usize; n];
    side[a] = 1;
    side[b] = 2;
    let mut frontiers = [vec![a], vec![b]];
    loop {
        // expand the smaller frontier by one layer
        let s = if frontiers[0].len() <= frontiers[1].len() { 0 } else { 1 };
        let mine = s as u8 + 1;
        let mut next = Vec::new();
        let mut best = usize::MAX;
        for &v in &frontiers[s] {
            for &w in net.children(v).iter().chain(net.parents(v)) {
                let w = w as usize;
                if side[w] == 0 {
                    side[w] = mine;
                    dist[w] = dist[v] + 1;
                    next.push(w);
                } else if side[w] != mine {
                    best = best.min(dist[v] + 1 + dist[w]);
                }
            }
        }
        if best != usize::MAX {
            return best;
        }
        assert!(!next.is_empty(), "networks are connected");
        frontiers[s] = next;
    }
}

/// Distances between `pairs` independent uniform pairs of vertices.
pub fn distance_profile<R: Rng + ?Sized>(net: &Network, pairs: usize, rng: &mut R) -> Vec<usize> {
    let n = net.n_vertices();
    (0..pairs)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            pair_distance(net, a, b)
        })
        .collect()
}

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit { slope, intercept: my - slope * mx, r_squared }
}

/// Weighted least squares for `y = c + beta x` with per-point standard
/// errors; returns `(c, stderr of c, beta)`.
pub fn weighted_intercept(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64, f64) {
    let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let swx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    let swxx: f64 = w.iter().zip(x).map(|(a, b)| a * b * b).sum();
    let swy: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let swxy: f64 = w.iter().zip(x).zip(y).map(|((a, b), c)| a * b * c).sum();
    let det = sw * swxx - swx * swx;
    let beta = (sw * swxy - swx * swy) / det;
    let c = (swxx * swy - swx * swxy) / det;
    (c, (swxx / det).sqrt(), beta)
}

/// Empirical survival points `(x, log P(H > x))` restricted to thresholds
/// exceeded by at least `min_survivors` samples.
pub fn log_survival(samples: &[usize], min_survivors: usize) -> Vec<(usize, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let total = sorted.len() as f64;
    let max = sorted.last().copied().unwrap_or(0);
    (0..=max)
        .filter_map(|x| {
            let above = sorted.len() - sorted.partition_point(|&h| h <= x);
            (above >= min_survivors).then(|| (x, (above as f64 / total).ln()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::LevelSampler;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every directed path from the root, by exhaustive search.
    fn all_path_lengths(net: &Network) -> (Vec<usize>, usize) {
        let mut shortest = vec![usize::MAX; net.n_vertices()];
        let mut longest = 0;
        let mut stack = vec![(net.root(), 0usize)];
        while let Some((v, d)) = stack.pop() {
            shortest[v] = shortest[v].min(d);
            longest = longest.max(d);
            for &c in net.children(v) {
                stack.push((c as usize, d + 1));
            }
        }
        (shortest, longest)
    }

    /// All-pairs undirected distances by Floyd-Warshall.
    fn floyd(net: &Network) -> Vec<Vec<usize>> {
        let n = net.n_vertices();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (v, row) in d.iter_mut().enumerate() {
            row[v] = 0;
        }
        for (a, b) in net.edges() {
            d[a][b] = 1;
            d[b][a] = 1;
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][m] + d[m][j] < d[i][j] {
                        d[i][j] = d[i][m] + d[m][j];
                    }
                }
            }
        }
        d
    }

    fn small_networks() -> Vec<Network> {
        let mut out = vec![Network::trivial(), Network::cherry()];
        for k in 1..=2 {
            let s = LevelSampler::new(k).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            while out.len() < 40 * k {
                let n = rng.random_range(2..6);
                let x = s.sample_network(n, &mut rng, 100_000).unwrap();
                if x.network.n_vertices() <= 12 {
                    out.push(x.network);
                }
            }
        }
        out
    }

    #[test]
    fn cherry_heights() {
        let c = Network::cherry();
        assert_eq!(directed_heights(&c), vec![0, 1, 1]);
        assert_eq!(undirected_heights(&c), vec![0, 1, 1]);
        assert_eq!(longest_directed_path(&c), 1);
        assert_eq!(longest_directed_path(&Network::trivial()), 0);
        let mut d = distance_profile(&c, 0, &mut ChaCha8Rng::seed_from_u64(0));
        d.extend([pair_distance(&c, 0, 1), pair_distance(&c, 0, 2), pair_distance(&c, 1, 2)]);
        assert_eq!(d, vec![1, 1, 2]);
    }

    #[test]
    fn reticulation_takes_the_shorter_route() {
        // root -> a -> r, root -> b -> c -> r
        let net = Network::from_edges(
            9,
            &[(0, 1), (0, 2), (1, 4), (2, 3), (3, 4), (1, 5), (2, 6), (3, 7), (4, 8)],
            &[(5, 1), (6, 2), (7, 3), (8, 4)],
        )
        .unwrap();
        assert_eq!(directed_heights(&net)[4], 2);
        assert_eq!(net.depths()[4], 3);
    }

    #[test]
    fn heights_match_exhaustive_oracles() {
        for net in small_networks() {
            let (shortest, longest) = all_path_lengths(&net);
            let h = directed_heights(&net);
            let g = undirected_heights(&net);
            assert_eq!(h, shortest);
            assert_eq!(longest_directed_path(&net), longest);
            let fw = floyd(&net);
            assert_eq!(g, fw[net.root()]);
            for a in 0..net.n_vertices() {
                for b in 0..net.n_vertices() {
                    assert_eq!(pair_distance(&net, a, b), fw[a][b]);
                }
                assert!(g[a] <= h[a]);
            }
        }
    }

    #[test]
    fn height_process_in_special_order() {
        let s = LevelSampler::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 7, 100] {
            let x = s.sample_network(n, &mut rng, 1_000_000).unwrap();
            let order = special_order(&x.decorated, &x.vertex_of_node, &x.surplus);
            let mut sorted = order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..x.network.n_vertices()).collect::<Vec<_>>());
            let h = directed_heights(&x.network);
            let process = height_process(&h, &order);
            assert_eq!(process[0], 0);
            assert_eq!(process.len(), x.network.n_vertices());
            assert_eq!(leaf_order(&x.decorated, &x.vertex_of_node).len(), n);
        }
    }

    #[test]
    fn census_of_the_cherry() {
        let c = Network::cherry();
        let all = neighborhood_census(&c, 1, CensusScope::Vertices);
        assert_eq!(all.counts.len(), 2);
        assert_eq!(all.total, 3);
        let zero = neighborhood_census(&c, 0, CensusScope::Vertices);
        assert_eq!(zero.counts.len(), 2);
        assert_eq!(neighborhood_census(&c, 1, CensusScope::Leaves).total, 2);
        assert_eq!(all.tv(&all), 0.0);
        let root = neighborhood_census(&c, 0, CensusScope::Root);
        let leaves = neighborhood_census(&c, 0, CensusScope::Leaves);
        assert_eq!(root.tv(&leaves), 1.0);
    }

    #[test]
    fn excursion_moments() {
        assert!((excursion_moment(1) - 1.2533141373155).abs() < 1e-12);
        let pi2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((excursion_moment(2) - pi2).abs() < 1e-12);
        assert!((zeta(3) - 1.2020569031595942).abs() < 1e-13);
        let expected = 2f64.powf(-1.5) * 6.0 * (std::f64::consts::PI.sqrt() / 2.0) * zeta(3);
        assert!((excursion_moment(3) - expected).abs() < 1e-12);
        assert!((zeta(4) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn regression_helpers() {
        let f = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let (c, _, beta) = weighted_intercept(&[1.0, 0.5, 0.25], &[3.0, 2.5, 2.25], &[0.1, 0.1, 0.1]);
        assert!((c - 2.0).abs() < 1e-12 && (beta - 1.0).abs() < 1e-12);
        let surv = log_survival(&[1, 2, 3, 4], 2);
        assert_eq!(surv.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sampled_distances_obey_the_triangle_inequality(seed in any::<u64>(), n in 2usize..40) {
            let s = LevelSampler::new(1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = s.sample_network(n, &mut rng, 1_000_000).unwrap();
            let net = &x.network;
            let h = directed_heights(net);
            let g = undirected_heights(net);
            let top = longest_directed_path(net);
            for v in 0..net.n_vertices() {
                prop_assert!(g[v] <= h[v] && h[v] <= top);
            }
            let m = net.n_vertices();
            for _ in 0..20 {
                let (a, b, c) = (rng.random_range(0..m), rng.random_range(0..m), rng.random_range(0..m));
                let ab = pair_distance(net, a, b);
                prop_assert_eq!(ab, pair_distance(net, b, a));
                prop_assert!(pair_distance(net, a, c) <= ab + pair_distance(net, b, c));
            }
        }
    }
}
