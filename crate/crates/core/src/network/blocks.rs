//! Biconnected components of the undirected shadow of a digraph.

use smallvec::SmallVec;

/// Blocks of the undirected shadow. Edge ids follow the order "by source
/// vertex, then by position in the source's child list".
#[derive(Clone, Debug)]
pub struct Blocks {
    out_start: Vec<u32>,
    pub edges: Vec<(u32, u32)>,
    pub edge_block: Vec<u32>,
    pub blocks: Vec<Block>,
}

#[derive(Clone, Debug, Default)]
pub struct Block {
    pub vertices: Vec<u32>,
    pub edges: Vec<u32>,
}

impl Block {
    pub fn is_bridge(&self) -> bool {
        self.edges.len() == 1
    }
}

const NONE: u32 = u32::MAX;

impl Blocks {
    pub fn compute(children: &[SmallVec<[u32; 2]>]) -> Blocks {
        let n = children.len();
        let mut out_start = Vec::with_capacity(n + 1);
        let mut edges = Vec::new();
        for (s, cs) in children.iter().enumerate() {
            out_start.push(edges.len() as u32);
            for &d in cs {
                edges.push((s as u32, d));
            }
        }
        out_start.push(edges.len() as u32);

        // Undirected adjacency in CSR form: (neighbour, edge id).
        let mut deg = vec![0u32; n + 1];
        for &(s, d) in &edges {
            deg[s as usize] += 1;
            deg[d as usize] += 1;
        }
        let mut start = vec![0u32; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + deg[v];
        }
        let mut fill = start.clone();
        let mut adj = vec![(0u32, 0u32); 2 * edges.len()];
        for (e, &(s, d)) in edges.iter().enumerate() {
            adj[fill[s as usize] as usize] = (d, e as u32);
            fill[s as usize] += 1;
            adj[fill[d as usize] as usize] = (s, e as u32);
            fill[d as usize] += 1;
        }

        let mut disc = vec![0u32; n];
        let mut low = vec![0u32; n];
        let mut timer = 1u32;
        let mut estack: Vec<u32> = Vec::new();
        let mut edge_block = vec![NONE; edges.len()];
        let mut blocks: Vec<Block> = Vec::new();
        let mut frames: Vec<(u32, u32, u32)> = Vec::new();
        let mut mark = vec![NONE; n];

        for s in 0..n {
            if disc[s] != 0 || deg[s] == 0 {
                continue;
            }
            disc[s] = timer;
            low[s] = timer;
            timer += 1;
            frames.push((s as u32, NONE, start[s]));
            while let Some(top) = frames.last_mut() {
                let (v, pe, idx) = *top;
                let v = v as usize;
                if idx < start[v + 1] {
                    top.2 += 1;
                    let (w, e) = adj[idx as usize];
                    if e == pe {
                        continue;
                    }
                    let w = w as usize;
                    if disc[w] == 0 {
                        estack.push(e);
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        frames.push((w as u32, e, start[w]));
                    } else if disc[w] < disc[v] {
                        estack.push(e);
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    frames.pop();
                    if let Some(&(u, _, _)) = frames.last() {
                        let u = u as usize;
                        low[u] = low[u].min(low[v]);
                        if low[v] >= disc[u] {
                            let id = blocks.len() as u32;
                            let mut block = Block::default();
                            loop {
                                let e = estack.pop().expect("tree edge is on the stack");
                                edge_block[e as usize] = id;
                                block.edges.push(e);
                                let (a, b) = edges[e as usize];
                                for x in [a, b] {
                                    if mark[x as usize] != id {
                                        mark[x as usize] = id;
                                        block.vertices.push(x);
                                    }
                                }
                                if e == pe {
                                    break;
                                }
                            }
                            block.vertices.sort_unstable();
                            block.edges.sort_unstable();
                            blocks.push(block);
                        }
                    }
                }
            }
        }
        Blocks { out_start, edges, edge_block, blocks }
    }

    /// Id of the edge from `s` to its `i`-th child.
    pub fn edge_id(&self, s: usize, i: usize) -> u32 {
        self.out_start[s] + i as u32
    }

    pub fn block_of(&self, s: usize, i: usize) -> &Block {
        &self.blocks[self.edge_block[self.edge_id(s, i) as usize] as usize]
    }

    pub fn block_index_of(&self, s: usize, i: usize) -> usize {
        self.edge_block[self.edge_id(s, i) as usize] as usize
    }

    pub fn is_bridge_edge(&self, e: u32) -> bool {
        self.blocks[self.edge_block[e as usize] as usize].is_bridge()
    }
}
