//! Initial keypoints, topology and rest lengths from the first segmented
//! frame.
//!
//! Index layout is canonical so that repeated initializations (and the
//! synthetic ground truth) agree:
//! - chain: keypoint 0 is the leaf with the lexicographically smallest
//!   position, the last keypoint is the other leaf;
//! - tree: branches ending in a leaf come first, ordered by their leaf's
//!   position, each listed leaf first with interior keypoints running toward
//!   the junction; then interiors of junction-to-junction branches; junctions
//!   last;
//! - grid: keypoint `r * cols + c`; the lexicographically smallest corner is
//!   (0, 0) and its neighboring corner with the larger x is (0, cols - 1).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::anchors::{detect_1d_anchors, detect_2d_anchors, fps, AnchorDetection, AnchorParams, Branch};
use crate::camera::CameraModel;
use crate::classify::{classify_report, ClassifyParams};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::nn::NnIndex;
use crate::point::Point3;
use crate::segmentation::SegmentedFrame;
use crate::solver::{gauss_seidel_solve, SolveDiagnostics, SolverParams};
use crate::topology::{grid_edges, AnchorRole, AnchorSlot, KeypointSet, ObjectClass, Topology};

/// Chains up to this many points are ordered exactly.
pub const EXACT_ORDER_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct InitParams {
    /// Keypoint count for curve-like objects.
    pub num_keypoints: usize,
    /// Grid rows and columns for sheets.
    pub grid_shape: (usize, usize),
    pub classify: ClassifyParams,
    pub anchors: AnchorParams,
    pub solver: SolverParams,
    /// Skip classification and use this class.
    pub force_class: Option<ObjectClass>,
    /// Sheets: hold every boundary grid keypoint to the contour rather than
    /// only the four corners.
    pub boundary_anchors: bool,
}

impl Default for InitParams {
    fn default() -> Self {
        Self {
            num_keypoints: 15,
            grid_shape: (8, 8),
            classify: ClassifyParams::default(),
            anchors: AnchorParams::default(),
            solver: SolverParams::initialization(),
            force_class: None,
            boundary_anchors: true,
        }
    }
}

/// FPS warm start: the anchors followed by `n_total - anchors.len()` cloud
/// points chosen by farthest point sampling seeded from the anchors.
pub fn warm_start_1d(cloud: &PointCloud, anchors: &[Point3], n_total: usize) -> Result<Vec<Point3>> {
    if n_total <= anchors.len() {
        return Err(Error::InvalidInput(format!(
            "{n_total} keypoints requested but {} are anchors",
            anchors.len()
        )));
    }
    if cloud.len() < n_total {
        return Err(Error::InvalidInput(format!("cloud has {} points, fewer than {n_total}", cloud.len())));
    }
    let picks = fps(&cloud.points, n_total - anchors.len(), anchors)?;
    let mut out = anchors.to_vec();
    out.extend(picks.into_iter().map(|i| cloud.points[i]));
    Ok(out)
}

fn sq(points: &[Point3], a: usize, b: usize) -> f64 {
    points[a].distance_squared(points[b])
}

/// Sum of squared consecutive distances along `order`.
pub fn chain_cost(points: &[Point3], order: &[usize]) -> f64 {
    order.windows(2).map(|w| sq(points, w[0], w[1])).sum()
}

/// Order of `points` from one leaf to the other minimising the sum of
/// squared consecutive distances.
///
/// Exact (Held-Karp) for at most [`EXACT_ORDER_LIMIT`] points. Larger inputs
/// use greedy nearest-neighbor construction refined by 2-opt, which is a
/// heuristic with no optimality guarantee.
pub fn order_chain(points: &[Point3], leaves: [Point3; 2]) -> Result<Vec<usize>> {
    let find = |q: Point3| points.iter().position(|p| *p == q);
    let (Some(s), Some(e)) = (find(leaves[0]), find(leaves[1])) else {
        return Err(Error::InvalidInput("leaf anchors are not members of the point list".into()));
    };
    let e = if s == e {
        points.iter().enumerate().position(|(i, p)| i != s && *p == leaves[1]).ok_or_else(|| {
            Error::InvalidInput("both leaves refer to the same point".into())
        })?
    } else {
        e
    };
    Ok(order_between(points, s, e))
}

fn order_between(points: &[Point3], s: usize, e: usize) -> Vec<usize> {
    let interior: Vec<usize> = (0..points.len()).filter(|&i| i != s && i != e).collect();
    let mut order = vec![s];
    if points.len() <= EXACT_ORDER_LIMIT {
        order.extend(held_karp(points, s, e, &interior));
    } else {
        order.extend(greedy_two_opt(points, s, e, &interior));
    }
    order.push(e);
    order
}

fn held_karp(points: &[Point3], s: usize, e: usize, interior: &[usize]) -> Vec<usize> {
    let m = interior.len();
    if m == 0 {
        return Vec::new();
    }
    let full = (1usize << m) - 1;
    let mut cost = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![u8::MAX; (full + 1) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = sq(points, s, interior[j]);
    }
    for mask in 1..=full {
        for j in (0..m).filter(|j| mask & (1 << j) != 0) {
            let c = cost[mask * m + j];
            if !c.is_finite() {
                continue;
            }
            for k in (0..m).filter(|k| mask & (1 << k) == 0) {
                let next = mask | (1 << k);
                let nc = c + sq(points, interior[j], interior[k]);
                if nc < cost[next * m + k] {
                    cost[next * m + k] = nc;
                    parent[next * m + k] = j as u8;
                }
            }
        }
    }
    let mut last = 0;
    let mut best = f64::INFINITY;
    for j in 0..m {
        let c = cost[full * m + j] + sq(points, interior[j], e);
        if c < best {
            best = c;
            last = j;
        }
    }
    let mut rev = Vec::with_capacity(m);
    let mut mask = full;
    let mut j = last;
    loop {
        rev.push(interior[j]);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    rev.reverse();
    rev
}

fn greedy_two_opt(points: &[Point3], s: usize, e: usize, interior: &[usize]) -> Vec<usize> {
    let mut left: Vec<usize> = interior.to_vec();
    let mut path = vec![s];
    while !left.is_empty() {
        let cur = *path.last().expect("non-empty path");
        let mut best = 0;
        for k in 1..left.len() {
            if sq(points, cur, left[k]) < sq(points, cur, left[best]) {
                best = k;
            }
        }
        path.push(left.remove(best));
    }
    path.push(e);
    let n = path.len();
    loop {
        let mut improved = false;
        for i in 1..n - 2 {
            for k in i + 1..n - 1 {
                let delta = sq(points, path[i - 1], path[k]) + sq(points, path[i], path[k + 1])
                    - sq(points, path[i - 1], path[i])
                    - sq(points, path[k], path[k + 1]);
                if delta < -1e-15 {
                    path[i..=k].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    path[1..n - 1].to_vec()
}

/// Tree topology from per-branch keypoint sequences: consecutive indices in
/// each sequence are joined, and edges are grouped by branch.
pub fn build_1d_topology(branches: &[Vec<usize>], num_keypoints: usize, anchors: Vec<AnchorSlot>) -> Result<Topology> {
    let edges = branches
        .iter()
        .enumerate()
        .flat_map(|(g, seq)| seq.windows(2).map(move |w| ((w[0], w[1]), g)));
    Topology::new(ObjectClass::OneDim, num_keypoints, edges, anchors, None)
}

/// Sets every edge's rest length to the mean measured length of its group.
pub fn compute_rest_lengths(x: &[Point3], topology: &Topology) -> Topology {
    let groups = topology.edge_groups.iter().copied().max().map_or(0, |g| g + 1);
    let mut sum = vec![0.0; groups];
    let mut count = vec![0usize; groups];
    for (&(i, j), &g) in topology.edges.iter().zip(&topology.edge_groups) {
        sum[g] += x[i].distance(x[j]);
        count[g] += 1;
    }
    let mut out = topology.clone();
    out.rest_lengths = topology.edge_groups.iter().map(|&g| sum[g] / count[g] as f64).collect();
    out
}

/// Splits `total` edges over branches in proportion to their lengths
/// (largest remainder), giving each branch at least `min_edges`.
pub fn allocate_edges(lengths: &[f64], total: usize, min_edges: usize) -> Result<Vec<usize>> {
    let b = lengths.len();
    if b == 0 || total < b * min_edges {
        return Err(Error::InvalidInput(format!(
            "{total} edges cannot cover {b} branches with at least {min_edges} each"
        )));
    }
    let sum: f64 = lengths.iter().sum();
    let quota: Vec<f64> = if sum > 0.0 {
        lengths.iter().map(|l| total as f64 * l / sum).collect()
    } else {
        vec![total as f64 / b as f64; b]
    };
    let mut alloc: Vec<usize> = quota.iter().map(|q| crate::fmath::floor(*q) as usize).collect();
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&x, &y| (quota[y] - alloc[y] as f64).total_cmp(&(quota[x] - alloc[x] as f64)).then(x.cmp(&y)));
    let assigned: usize = alloc.iter().sum();
    for &k in order.iter().cycle().take(total - assigned) {
        alloc[k] += 1;
    }
    while let Some(short) = (0..b).find(|&k| alloc[k] < min_edges) {
        let donor = (0..b)
            .filter(|&k| alloc[k] > min_edges)
            .max_by(|&x, &y| (alloc[x] as f64 - quota[x]).total_cmp(&(alloc[y] as f64 - quota[y])).then(y.cmp(&x)))
            .expect("total covers the minimum");
        alloc[donor] -= 1;
        alloc[short] += 1;
    }
    Ok(alloc)
}

/// Result of [`initialize`].
#[derive(Debug, Clone)]
pub struct InitResult {
    pub class: ObjectClass,
    pub keypoints: KeypointSet,
    pub topology: Topology,
    pub detection: AnchorDetection,
    /// Anchor positions parallel to `topology.anchors`.
    pub anchor_positions: Vec<Point3>,
    pub solve: SolveDiagnostics,
}

/// Classification, anchor detection, warm start, topology, rest lengths and
/// a solve, on the first segmented frame.
pub fn initialize(seg: &SegmentedFrame, cam: &CameraModel, params: &InitParams) -> Result<InitResult> {
    let cloud = &seg.cloud;
    let class = match params.force_class {
        Some(c) => c,
        None => classify_report(cloud, &params.classify)?.class,
    };
    let (detection, x0, topology) = match class {
        ObjectClass::OneDim => {
            let det = detect_1d_anchors(cloud, cam, &params.anchors)?;
            let (x0, topo) = init_curve(cloud, &det, params.num_keypoints)?;
            (det, x0, topo)
        }
        ObjectClass::TwoDim => {
            let det = detect_2d_anchors(cloud, cam, &params.anchors)?;
            let (x0, topo) = init_grid_2d(&det, params.grid_shape)?;
            if params.boundary_anchors {
                let (rows, cols) = params.grid_shape;
                let slots =
                    grid_boundary(rows, cols).into_iter().map(|index| AnchorSlot { index, role: AnchorRole::Contour }).collect();
                let topo = Topology::new(ObjectClass::TwoDim, rows * cols, grid_edges(rows, cols), slots, Some((rows, cols)))?;
                (boundary_detection(&det, params.grid_shape)?, x0.positions, topo)
            } else {
                (det, x0.positions, topo)
            }
        }
    };
    let topology = compute_rest_lengths(&x0, &topology);
    let anchor_positions: Vec<Point3> = topology.anchors.iter().map(|a| x0[a.index]).collect();
    let index = NnIndex::build(&cloud.points)?;
    let (keypoints, solve) = gauss_seidel_solve(
        &KeypointSet::new(x0, seg.frame_index),
        &index,
        &topology,
        &anchor_positions,
        &params.solver,
    )?;
    Ok(InitResult { class, keypoints, topology, detection, anchor_positions, solve })
}

/// Warm start and topology for a chain or a tree of chains.
pub fn init_curve(cloud: &PointCloud, det: &AnchorDetection, n: usize) -> Result<(Vec<Point3>, Topology)> {
    let by_position = |ids: &mut Vec<usize>| ids.sort_by(|&a, &b| det.positions[a].lex_cmp(&det.positions[b]));
    let mut leaves = det.indices_of(AnchorRole::Leaf);
    let mut junctions = det.indices_of(AnchorRole::Junction);
    by_position(&mut leaves);
    by_position(&mut junctions);

    if junctions.is_empty() {
        if leaves.len() != 2 {
            return Err(Error::TopologyFailed(format!("{} leaves without any junction", leaves.len())));
        }
        let ends = [det.positions[leaves[0]], det.positions[leaves[1]]];
        let warm = warm_start_1d(cloud, &ends, n)?;
        let order = order_between(&warm, 0, 1);
        let x: Vec<Point3> = order.iter().map(|&i| warm[i]).collect();
        let topo = build_1d_topology(
            &[(0..n).collect()],
            n,
            vec![AnchorSlot { index: 0, role: AnchorRole::Leaf }, AnchorSlot { index: n - 1, role: AnchorRole::Leaf }],
        )?;
        return Ok((x, topo));
    }

    let anchor_count = leaves.len() + junctions.len();
    if det.branches.len() + 1 != anchor_count {
        return Err(Error::TopologyFailed(format!(
            "{} skeleton branches between {anchor_count} anchors do not form a tree",
            det.branches.len()
        )));
    }
    // Canonical branch order, each branch oriented leaf → junction or lower → higher junction.
    let rank = |a: usize| {
        leaves.iter().position(|&l| l == a).map(|p| (0, p)).unwrap_or_else(|| {
            (1, junctions.iter().position(|&j| j == a).expect("anchor is a leaf or a junction"))
        })
    };
    let mut branches: Vec<(usize, usize, &Branch)> = det
        .branches
        .iter()
        .map(|b| {
            let (a, c) = (b.ends[0], b.ends[1]);
            if rank(a) <= rank(c) { (a, c, b) } else { (c, a, b) }
        })
        .collect();
    branches.sort_by_key(|(a, c, _)| (rank(*a), rank(*c)));

    let lengths: Vec<f64> = branches.iter().map(|(_, _, b)| b.arc_length()).collect();
    let edges = allocate_edges(&lengths, n - 1, 2)?;
    let interior_total: usize = edges.iter().map(|e| e - 1).sum();
    if interior_total + anchor_count != n {
        return Err(Error::TopologyFailed("keypoint allocation does not add up".into()));
    }

    // Cloud points go to the branch whose skeleton polyline is closest.
    let mut members: Vec<Vec<Point3>> = vec![Vec::new(); branches.len()];
    for p in &cloud.points {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, (_, _, b)) in branches.iter().enumerate() {
            let d = b.distance_to(*p);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        members[best].push(*p);
    }

    let mut index_of_anchor = vec![usize::MAX; det.len()];
    let mut x: Vec<Point3> = Vec::with_capacity(n);
    let mut interiors: Vec<Vec<usize>> = Vec::with_capacity(branches.len());
    for (k, &(a, c, _)) in branches.iter().enumerate() {
        let (pa, pc) = (det.positions[a], det.positions[c]);
        let m = edges[k] - 1;
        if members[k].len() < m {
            return Err(Error::InvalidInput(format!("branch {k} has {} points for {m} keypoints", members[k].len())));
        }
        let picks = fps(&members[k], m, &[pa, pc])?;
        let mut local = vec![pa, pc];
        local.extend(picks.iter().map(|&i| members[k][i]));
        let order = order_between(&local, 0, 1);
        if rank(a).0 == 0 {
            index_of_anchor[a] = x.len();
            x.push(pa);
        }
        let ids: Vec<usize> = order[1..order.len() - 1]
            .iter()
            .map(|&i| {
                x.push(local[i]);
                x.len() - 1
            })
            .collect();
        interiors.push(ids);
    }
    for &j in &junctions {
        index_of_anchor[j] = x.len();
        x.push(det.positions[j]);
    }
    let sequences: Vec<Vec<usize>> = branches
        .iter()
        .zip(&interiors)
        .map(|(&(a, c, _), ids)| {
            let mut seq = vec![index_of_anchor[a]];
            seq.extend(ids);
            seq.push(index_of_anchor[c]);
            seq
        })
        .collect();
    let mut slots: Vec<AnchorSlot> = leaves
        .iter()
        .map(|&l| AnchorSlot { index: index_of_anchor[l], role: AnchorRole::Leaf })
        .chain(junctions.iter().map(|&j| AnchorSlot { index: index_of_anchor[j], role: AnchorRole::Junction }))
        .collect();
    slots.sort_by_key(|s| s.index);
    let topo = build_1d_topology(&sequences, n, slots)?;
    Ok((x, topo))
}

/// The four detected contour anchors with the largest summed pairwise
/// distance, in cyclic order around the sheet.
fn pick_corners(det: &AnchorDetection) -> Result<[usize; 4]> {
    let mut ids = det.indices_of(AnchorRole::Contour);
    if ids.is_empty() {
        ids = (0..det.len()).collect();
    }
    if ids.len() < 4 {
        return Err(Error::InvalidInput(format!("{} contour anchors, need 4 corners", ids.len())));
    }
    let p = |i: usize| det.positions[i];
    let mut best = [ids[0], ids[1], ids[2], ids[3]];
    let mut best_spread = f64::NEG_INFINITY;
    let k = ids.len();
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                for d in c + 1..k {
                    let q = [ids[a], ids[b], ids[c], ids[d]];
                    let mut spread = 0.0;
                    for x in 0..4 {
                        for y in x + 1..4 {
                            spread += p(q[x]).distance(p(q[y]));
                        }
                    }
                    if spread > best_spread {
                        best_spread = spread;
                        best = q;
                    }
                }
            }
        }
    }
    let cyclic = if det.contour_positions.len() == det.len() {
        let mut q = best;
        q.sort_by_key(|&i| det.contour_positions[i]);
        q
    } else {
        let [a, b, c, d] = best;
        let perimeter = |q: [usize; 4]| (0..4).map(|i| p(q[i]).distance(p(q[(i + 1) % 4]))).sum::<f64>();
        let options = [[a, b, c, d], [a, b, d, c], [a, c, b, d]];
        let mut pick = options[0];
        for o in &options[1..] {
            if perimeter(*o) < perimeter(pick) {
                pick = *o;
            }
        }
        pick
    };
    Ok(cyclic)
}

/// Point at arc-length fraction `t` along `path`.
fn along(path: &[Point3], cumulative: &[f64], t: f64) -> Point3 {
    let total = *cumulative.last().expect("non-empty path");
    if total <= 0.0 {
        return path[0];
    }
    let target = t * total;
    let k = cumulative.partition_point(|&c| c < target).clamp(1, path.len() - 1);
    let span = cumulative[k] - cumulative[k - 1];
    let f = if span > 0.0 { (target - cumulative[k - 1]) / span } else { 0.0 };
    path[k - 1].lerp(path[k], f)
}

/// Grid keypoints from four corner anchors.
///
/// Boundary keypoints are spaced by arc length along the detected contour
/// between adjacent corners (straight lines when no contour is attached);
/// interior keypoints are the bilinear interpolation of the corners.
pub fn init_grid_2d(det: &AnchorDetection, grid_shape: (usize, usize)) -> Result<(KeypointSet, Topology)> {
    let (rows, cols) = grid_shape;
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidInput(format!("grid {rows}x{cols} is smaller than 2x2")));
    }
    let cyc = pick_corners(det)?;
    let p = |i: usize| det.positions[i];
    let start = (0..4).min_by(|&a, &b| p(cyc[a]).lex_cmp(&p(cyc[b])).then(a.cmp(&b))).expect("four corners");
    let (next, prev) = (cyc[(start + 1) % 4], cyc[(start + 3) % 4]);
    let (c0c, cr0) = if p(next).x > p(prev).x || (p(next).x == p(prev).x && p(next).lex_cmp(&p(prev)).is_gt()) {
        (next, prev)
    } else {
        (prev, next)
    };
    let c00 = cyc[start];
    let crc = cyc[(start + 2) % 4];
    let corners = [c00, c0c, cr0, crc];
    let [p00, p0c, pr0, prc] = corners.map(p);

    let mut x = vec![Point3::ORIGIN; rows * cols];
    for r in 0..rows {
        let v = r as f64 / (rows - 1) as f64;
        for c in 0..cols {
            let u = c as f64 / (cols - 1) as f64;
            x[r * cols + c] = p00 * ((1.0 - u) * (1.0 - v)) + p0c * (u * (1.0 - v)) + pr0 * ((1.0 - u) * v) + prc * (u * v);
        }
    }

    if det.contour_positions.len() == det.len() && !det.contour.is_empty() {
        let sides: [(usize, usize, Vec<usize>); 4] = [
            (c00, c0c, (0..cols).collect()),
            (cr0, crc, (0..cols).map(|c| (rows - 1) * cols + c).collect()),
            (c00, cr0, (0..rows).map(|r| r * cols).collect()),
            (c0c, crc, (0..rows).map(|r| r * cols + cols - 1).collect()),
        ];
        for (a, b, ids) in sides {
            let path = contour_path(det, a, b, &corners);
            let mut cumulative = vec![0.0];
            for w in path.windows(2) {
                cumulative.push(cumulative.last().unwrap() + w[0].distance(w[1]));
            }
            let last = ids.len() - 1;
            for (k, &id) in ids.iter().enumerate().take(last).skip(1) {
                x[id] = along(&path, &cumulative, k as f64 / last as f64);
            }
        }
    }

    let slots = vec![
        AnchorSlot { index: 0, role: AnchorRole::Contour },
        AnchorSlot { index: cols - 1, role: AnchorRole::Contour },
        AnchorSlot { index: (rows - 1) * cols, role: AnchorRole::Contour },
        AnchorSlot { index: rows * cols - 1, role: AnchorRole::Contour },
    ];
    let topo = Topology::new(ObjectClass::TwoDim, rows * cols, grid_edges(rows, cols), slots, Some(grid_shape))?;
    Ok((KeypointSet::new(x, 0), topo))
}

/// Indices of the outermost rows and columns of a grid, ascending.
pub fn grid_boundary(rows: usize, cols: usize) -> Vec<usize> {
    (0..rows * cols).filter(|i| i / cols == 0 || i / cols == rows - 1 || i % cols == 0 || i % cols == cols - 1).collect()
}

/// One contour anchor per boundary grid keypoint, placed as
/// [`init_grid_2d`] places them, in [`grid_boundary`] order.
pub fn boundary_detection(det: &AnchorDetection, grid_shape: (usize, usize)) -> Result<AnchorDetection> {
    let (x, _) = init_grid_2d(det, grid_shape)?;
    let ids = grid_boundary(grid_shape.0, grid_shape.1);
    Ok(AnchorDetection {
        positions: ids.iter().map(|&i| x.positions[i]).collect(),
        roles: vec![AnchorRole::Contour; ids.len()],
        ..Default::default()
    })
}

/// Contour points from anchor `a` to anchor `b`, going the way around that
/// avoids the other corners.
fn contour_path(det: &AnchorDetection, a: usize, b: usize, corners: &[usize; 4]) -> Vec<Point3> {
    let len = det.contour.len();
    let (pa, pb) = (det.contour_positions[a], det.contour_positions[b]);
    let forward_span = (pb + len - pa) % len;
    let others: Vec<usize> = corners.iter().filter(|&&c| c != a && c != b).map(|&c| det.contour_positions[c]).collect();
    let inside_forward = |q: usize| {
        let off = (q + len - pa) % len;
        off > 0 && off < forward_span
    };
    let forward = !others.iter().any(|&q| inside_forward(q));
    let steps = if forward { forward_span } else { len - forward_span };
    let mut path = Vec::with_capacity(steps + 1);
    path.push(det.positions[a]);
    for s in 1..steps {
        let q = if forward { (pa + s) % len } else { (pa + len - s) % len };
        path.push(det.contour[q]);
    }
    path.push(det.positions[b]);
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_order_by_x() {
        let xs = [0.3, 0.0, 0.5, 0.1, 0.4, 0.2];
        let pts: Vec<Point3> = xs.iter().map(|&x| Point3::new(x, 0.0, 0.0)).collect();
        let order = order_chain(&pts, [pts[1], pts[2]]).unwrap();
        assert_eq!(order, vec![1, 3, 5, 0, 4, 2]);
        let big: Vec<Point3> = (0..40).map(|i| Point3::new(((i * 17) % 40) as f64, 0.0, 0.0)).collect();
        let s = big.iter().position(|p| p.x == 0.0).unwrap();
        let e = big.iter().position(|p| p.x == 39.0).unwrap();
        let order = order_chain(&big, [big[s], big[e]]).unwrap();
        assert!(order.windows(2).all(|w| big[w[0]].x < big[w[1]].x));
    }

    #[test]
    fn two_points_and_missing_leaf() {
        let pts = [Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(order_chain(&pts, [pts[0], pts[1]]).unwrap(), vec![0, 1]);
        assert!(order_chain(&pts, [pts[0], Point3::new(2.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn rest_lengths_are_group_means() {
        let x = [Point3::ORIGIN, Point3::new(0.04, 0.0, 0.0), Point3::new(0.1, 0.0, 0.0)];
        let t = compute_rest_lengths(&x, &Topology::chain(3).unwrap());
        assert!(t.rest_lengths.iter().all(|d| (d - 0.05).abs() < 1e-15));
    }

    #[test]
    fn y_topology_counts() {
        let seqs = vec![vec![0, 1, 2, 3, 12], vec![4, 5, 6, 7, 12], vec![8, 9, 10, 11, 12]];
        let t = build_1d_topology(&seqs, 13, vec![]).unwrap();
        assert_eq!(t.edges.len(), 12);
        assert_eq!(t.degrees()[12], 3);
    }

    #[test]
    fn allocation_is_proportional_with_minimum() {
        assert_eq!(allocate_edges(&[0.24, 0.2, 0.16], 15, 2).unwrap(), vec![6, 5, 4]);
        assert_eq!(allocate_edges(&[1.0, 0.01], 6, 2).unwrap(), vec![4, 2]);
        assert!(allocate_edges(&[1.0, 1.0], 3, 2).is_err());
    }

    fn square_detection(points: [Point3; 4]) -> AnchorDetection {
        AnchorDetection { positions: points.to_vec(), roles: vec![AnchorRole::Contour; 4], ..Default::default() }
    }

    #[test]
    fn unit_square_grids() {
        let det = square_detection([
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ]);
        let (x, t) = init_grid_2d(&det, (3, 3)).unwrap();
        assert_eq!(x.positions[4], Point3::new(0.5, 0.5, 0.0));
        assert_eq!(x.positions[0], Point3::ORIGIN);
        assert_eq!(x.positions[2], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(t.edges.len(), 12);
        let (x, t) = init_grid_2d(&det, (2, 2)).unwrap();
        assert_eq!(t.edges.len(), 4);
        let mut got = x.positions.clone();
        got.sort_by(|a, b| a.lex_cmp(b));
        let mut want = det.positions.clone();
        want.sort_by(|a, b| a.lex_cmp(b));
        assert_eq!(got, want);
        let three = AnchorDetection { positions: det.positions[..3].to_vec(), roles: vec![AnchorRole::Contour; 3], ..Default::default() };
        assert!(matches!(init_grid_2d(&three, (3, 3)), Err(Error::InvalidInput(_))));
    }
}
