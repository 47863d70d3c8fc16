//! Exact nearest-neighbor queries over a static point set.
//!
//! A balanced kd-tree stored implicitly in a permutation array: the median
//! of each range is the splitting node, split axis is the axis of largest
//! spread. All distance comparisons use [`Point3::distance_squared`] and ties
//! go to the lowest point index, so results equal an exhaustive scan exactly.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::point::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Point3>,
    perm: Vec<u32>,
    /// Split axis for the node stored at each position of `perm`.
    axes: Vec<u8>,
}

/// Result of a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub point: Point3,
    pub distance: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2.total_cmp(&o.d2).then(self.index.cmp(&o.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl NnIndex {
    pub fn build(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty point set".into()));
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::InvalidInput("point set too large to index".into()));
        }
        let mut perm: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = vec![0u8; points.len()];
        build_range(points, &mut perm, &mut axes, 0, points.len());
        Ok(Self { points: points.to_vec(), perm, axes })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Closest indexed point (lowest index among equidistant ones).
    pub fn nearest(&self, q: Point3) -> Neighbor {
        let mut best = Candidate { d2: f64::INFINITY, index: u32::MAX };
        self.nearest_range(q, 0, self.points.len(), &mut best);
        let index = best.index as usize;
        Neighbor { index, point: self.points[index], distance: libm::sqrt(best.d2) }
    }

    fn nearest_range(&self, q: Point3, lo: usize, hi: usize, best: &mut Candidate) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.perm[lo..hi] {
                let c = Candidate { d2: q.distance_squared(self.points[i as usize]), index: i };
                if c < *best {
                    *best = c;
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = self.perm[mid];
        let axis = self.axes[mid] as usize;
        let p = self.points[node as usize];
        let c = Candidate { d2: q.distance_squared(p), index: node };
        if c < *best {
            *best = c;
        }
        let diff = q.axis(axis) - p.axis(axis);
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.nearest_range(q, near.0, near.1, best);
        if diff * diff <= best.d2 {
            self.nearest_range(q, far.0, far.1, best);
        }
    }

    /// The `k` closest points ordered by (distance, index).
    pub fn k_nearest(&self, q: Point3, k: usize) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_range(q, k, 0, self.points.len(), &mut heap);
        let mut found = heap.into_sorted_vec();
        found.truncate(k);
        found
            .into_iter()
            .map(|c| Neighbor {
                index: c.index as usize,
                point: self.points[c.index as usize],
                distance: libm::sqrt(c.d2),
            })
            .collect()
    }

    fn knn_range(&self, q: Point3, k: usize, lo: usize, hi: usize, heap: &mut BinaryHeap<Candidate>) {
        let offer = |c: Candidate, heap: &mut BinaryHeap<Candidate>| {
            if heap.len() < k {
                heap.push(c);
            } else if heap.peek().is_some_and(|worst| c < *worst) {
                heap.pop();
                heap.push(c);
            }
        };
        if hi - lo <= LEAF_SIZE {
            for &i in &self.perm[lo..hi] {
                offer(Candidate { d2: q.distance_squared(self.points[i as usize]), index: i }, heap);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = self.perm[mid];
        let axis = self.axes[mid] as usize;
        let p = self.points[node as usize];
        offer(Candidate { d2: q.distance_squared(p), index: node }, heap);
        let diff = q.axis(axis) - p.axis(axis);
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.knn_range(q, k, near.0, near.1, heap);
        let bound = if heap.len() < k { f64::INFINITY } else { heap.peek().map_or(f64::INFINITY, |c| c.d2) };
        if diff * diff <= bound {
            self.knn_range(q, k, far.0, far.1, heap);
        }
    }

    /// Indices of all points within `radius` (inclusive), ascending.
    pub fn within_radius(&self, q: Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i| out.push(i));
        out.sort_unstable();
        out
    }

    /// Number of points within `radius` (inclusive).
    pub fn count_within(&self, q: Point3, radius: f64) -> usize {
        let mut n = 0;
        self.for_each_within(q, radius, |_| n += 1);
        n
    }

    /// Calls `f` for every point within `radius` (inclusive), in tree order.
    pub fn for_each_within(&self, q: Point3, radius: f64, mut f: impl FnMut(usize)) {
        let r2 = radius * radius;
        self.radius_range(q, r2, 0, self.points.len(), &mut f);
    }

    fn radius_range(&self, q: Point3, r2: f64, lo: usize, hi: usize, f: &mut impl FnMut(usize)) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.perm[lo..hi] {
                if q.distance_squared(self.points[i as usize]) <= r2 {
                    f(i as usize);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = self.perm[mid] as usize;
        let axis = self.axes[mid] as usize;
        let p = self.points[node];
        if q.distance_squared(p) <= r2 {
            f(node);
        }
        let diff = q.axis(axis) - p.axis(axis);
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius_range(q, r2, lo, mid, f);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius_range(q, r2, mid + 1, hi, f);
        }
    }
}

fn build_range(points: &[Point3], perm: &mut [u32], axes: &mut [u8], lo: usize, hi: usize) {
    if hi - lo <= LEAF_SIZE {
        return;
    }
    let axis = widest_axis(points, &perm[lo..hi]);
    let mid = lo + (hi - lo) / 2;
    perm[lo..hi].select_nth_unstable_by(mid - lo, |a, b| {
        points[*a as usize]
            .axis(axis)
            .total_cmp(&points[*b as usize].axis(axis))
            .then(a.cmp(b))
    });
    axes[mid] = axis as u8;
    build_range(points, perm, axes, lo, mid);
    build_range(points, perm, axes, mid + 1, hi);
}

fn widest_axis(points: &[Point3], idx: &[u32]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx {
        let p = points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p.axis(a));
            hi[a] = hi[a].max(p.axis(a));
        }
    }
    let spread = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    if spread[0] >= spread[1] && spread[0] >= spread[2] {
        0
    } else if spread[1] >= spread[2] {
        1
    } else {
        2
    }
}
