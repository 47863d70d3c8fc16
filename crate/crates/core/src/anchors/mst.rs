//! Minimum spanning trees over skeleton pixels.

use alloc::vec;
use alloc::vec::Vec;

use crate::camera::Pixel;
use crate::nn::NnIndex;
use crate::point::Point3;

/// Up to this many nodes the tree is computed exactly with dense Prim.
pub const DENSE_LIMIT: usize = 4096;
/// Candidate neighbors per node for the sparse path.
pub const CANDIDATE_K: usize = 12;

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    sets: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], sets: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.sets -= 1;
        true
    }

    pub fn count(&self) -> usize {
        self.sets
    }
}

/// MST over pixels with Euclidean pixel distances as weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonGraph {
    pub nodes: Vec<Pixel>,
    /// `(i, j, weight)` with `i < j`, sorted by `(i, j)`.
    pub edges: Vec<(usize, usize, f64)>,
    pub degree: Vec<usize>,
}

impl SkeletonGraph {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }
}

/// Minimum spanning tree of the complete Euclidean graph over `pixels`.
///
/// Small inputs use dense Prim (exact). Larger ones run Kruskal over each
/// pixel's 12 nearest neighbors and fall back to dense Prim if the
/// candidate graph is disconnected.
pub fn build_mst(pixels: &[Pixel]) -> SkeletonGraph {
    let nodes = pixels.to_vec();
    let edges = if nodes.len() <= DENSE_LIMIT {
        dense_prim(&nodes)
    } else {
        sparse_kruskal(&nodes).unwrap_or_else(|| dense_prim(&nodes))
    };
    finish(nodes, edges)
}

fn finish(nodes: Vec<Pixel>, mut edges: Vec<(usize, usize, f64)>) -> SkeletonGraph {
    for e in &mut edges {
        if e.0 > e.1 {
            core::mem::swap(&mut e.0, &mut e.1);
        }
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut degree = vec![0; nodes.len()];
    for &(i, j, _) in &edges {
        degree[i] += 1;
        degree[j] += 1;
    }
    SkeletonGraph { nodes, edges, degree }
}

fn dense_prim(nodes: &[Pixel]) -> Vec<(usize, usize, f64)> {
    let n = nodes.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    key[0] = 0.0;
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || key[v] < key[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((parent[u], u, key[u]));
        }
        for v in 0..n {
            if !in_tree[v] {
                let w = nodes[u].distance(nodes[v]);
                if w < key[v] {
                    key[v] = w;
                    parent[v] = u;
                }
            }
        }
    }
    edges
}

fn sparse_kruskal(nodes: &[Pixel]) -> Option<Vec<(usize, usize, f64)>> {
    let pts: Vec<Point3> = nodes.iter().map(|p| Point3::new(p.col as f64, p.row as f64, 0.0)).collect();
    let index = NnIndex::build(&pts).ok()?;
    let mut candidates = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        for nb in index.k_nearest(*p, CANDIDATE_K + 1) {
            if nb.index != i {
                let (a, b) = (i.min(nb.index), i.max(nb.index));
                candidates.push((nodes[a].distance(nodes[b]), a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    candidates.dedup_by(|x, y| x.1 == y.1 && x.2 == y.2);
    let mut uf = UnionFind::new(nodes.len());
    let mut edges = Vec::with_capacity(nodes.len() - 1);
    for (w, a, b) in candidates {
        if uf.union(a, b) {
            edges.push((a, b, w));
        }
    }
    (uf.count() == 1).then_some(edges)
}
