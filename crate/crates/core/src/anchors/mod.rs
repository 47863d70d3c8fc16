//! Anchor detection: leaves and junctions of curve-like objects from the
//! skeleton of their image-plane footprint, contour anchors of sheets from
//! their outer boundary.

mod contour;
mod fps;
mod mst;
mod skeleton;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use contour::trace_boundary;
pub use fps::fps;
pub use mst::{build_mst, SkeletonGraph, UnionFind, CANDIDATE_K, DENSE_LIMIT};
pub use skeleton::skeletonize;

use crate::camera::{CameraModel, Pixel, Projector};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::point::Point3;
use crate::topology::AnchorRole;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AnchorParams {
    /// Dilation applied to the projected footprint to close sampling gaps.
    pub dilation_px: usize,
    /// Junction pixels closer than this are merged into one junction.
    pub merge_radius_px: f64,
    /// Skeleton pixels are lifted through the nearest object pixel within this radius.
    pub lift_search_px: usize,
    /// Leaf-to-junction skeleton branches shorter than this are thinning
    /// artifacts and get pruned.
    pub spur_length_px: f64,
    pub num_contour_anchors: usize,
}

impl Default for AnchorParams {
    fn default() -> Self {
        Self { dilation_px: 1, merge_radius_px: 5.0, lift_search_px: 3, spur_length_px: 10.0, num_contour_anchors: 4 }
    }
}

impl AnchorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.merge_radius_px >= 0.0) || !(self.spur_length_px >= 0.0) || self.num_contour_anchors == 0 {
            return Err(Error::Config(format!("invalid anchor parameters: {self:?}")));
        }
        Ok(())
    }
}

/// Skeleton path between two anchors of a curve-like object.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Anchor indices at the two ends, `ends[0] < ends[1]`.
    pub ends: [usize; 2],
    /// Lifted skeleton path from `ends[0]` to `ends[1]`, anchor positions included.
    pub polyline: Vec<Point3>,
}

impl Branch {
    pub fn arc_length(&self) -> f64 {
        self.polyline.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Distance from `p` to the closest segment of the polyline.
    pub fn distance_to(&self, p: Point3) -> f64 {
        match self.polyline.len() {
            0 => f64::INFINITY,
            1 => p.distance(self.polyline[0]),
            _ => self
                .polyline
                .windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

pub(crate) fn point_segment_distance(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(a + ab * t)
}

/// Anchors detected in one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnchorDetection {
    pub positions: Vec<Point3>,
    pub roles: Vec<AnchorRole>,
    /// Image location each anchor was detected at.
    pub pixels: Vec<Pixel>,
    /// Curve-like objects only: skeleton paths between anchors.
    pub branches: Vec<Branch>,
    /// Sheets only: the lifted outer boundary, in tracing order.
    pub contour: Vec<Point3>,
    /// Sheets only: position of each anchor within `contour`.
    pub contour_positions: Vec<usize>,
}

impl AnchorDetection {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn indices_of(&self, role: AnchorRole) -> Vec<usize> {
        (0..self.roles.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn count(&self, role: AnchorRole) -> usize {
        self.roles.iter().filter(|r| **r == role).count()
    }
}

/// Projects the cloud into the image and dilates the hit pixels.
pub fn rasterize_mask(cloud: &PointCloud, cam: &CameraModel, dilation_px: usize) -> Result<BinaryMask> {
    if cloud.is_empty() {
        return Err(Error::DetectionFailed("empty cloud".into()));
    }
    let proj = Projector::new(cam);
    let mut mask = BinaryMask::new(cam.width, cam.height);
    let mut hits = 0usize;
    for p in &cloud.points {
        if let Some((px, _)) = proj.pixel(*p) {
            mask.set(px, true);
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::DetectionFailed("every cloud point projects outside the image".into()));
    }
    Ok(if dilation_px > 0 { mask.dilate(dilation_px) } else { mask })
}

/// Which cloud point each image pixel shows: the point's own pixel when the
/// cloud was lifted from depth, its projection otherwise (nearest to the
/// camera wins).
#[derive(Debug, Clone)]
pub struct ObjectPixelMap {
    width: usize,
    height: usize,
    owner: Vec<u32>,
}

const NO_OWNER: u32 = u32::MAX;

impl ObjectPixelMap {
    pub fn new(cloud: &PointCloud, cam: &CameraModel) -> Self {
        let mut owner = vec![NO_OWNER; cam.width * cam.height];
        if let Some(pixels) = cloud.pixel_index.as_ref().filter(|p| p.len() == cloud.len()) {
            for (i, px) in pixels.iter().enumerate() {
                if (px.col as usize) < cam.width && (px.row as usize) < cam.height {
                    let slot = &mut owner[px.row as usize * cam.width + px.col as usize];
                    if *slot == NO_OWNER {
                        *slot = i as u32;
                    }
                }
            }
        } else {
            let proj = Projector::new(cam);
            let mut depth = vec![f64::INFINITY; owner.len()];
            for (i, p) in cloud.points.iter().enumerate() {
                if let Some((px, z)) = proj.pixel(*p) {
                    let k = px.row as usize * cam.width + px.col as usize;
                    if z < depth[k] {
                        depth[k] = z;
                        owner[k] = i as u32;
                    }
                }
            }
        }
        Self { width: cam.width, height: cam.height, owner }
    }

    /// Cloud index of the object pixel closest to `px` within `radius`
    /// pixels (ties to the smaller row, then column).
    pub fn lookup(&self, px: Pixel, radius: usize) -> Option<usize> {
        let r = radius as i64;
        let mut best: Option<(i64, usize)> = None;
        for dr in -r..=r {
            for dc in -r..=r {
                let d2 = dr * dr + dc * dc;
                if d2 > r * r {
                    continue;
                }
                let (row, col) = (px.row as i64 + dr, px.col as i64 + dc);
                if row < 0 || col < 0 || row >= self.height as i64 || col >= self.width as i64 {
                    continue;
                }
                let o = self.owner[row as usize * self.width + col as usize];
                if o != NO_OWNER && best.is_none_or(|(bd, _)| d2 < bd) {
                    best = Some((d2, o as usize));
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Removes leaf-to-junction branches shorter than `max_len` pixels and
/// returns the surviving adjacency (removed nodes empty).
///
/// Spurs go one at a time, shortest first. Pruning them all at once would
/// also cut a genuine end segment that happens to meet a one-pixel spur
/// close to the tip, shortening the branch.
fn prune_spurs(graph: &SkeletonGraph, max_len: f64) -> (Vec<Vec<usize>>, Vec<bool>) {
    let mut adj = graph.adjacency();
    let mut alive = vec![true; graph.nodes.len()];
    if max_len <= 0.0 {
        return (adj, alive);
    }
    loop {
        let mut shortest: Option<(f64, Vec<usize>)> = None;
        for leaf in 0..adj.len() {
            if !alive[leaf] || adj[leaf].len() != 1 {
                continue;
            }
            let mut path = vec![leaf];
            let mut length = 0.0;
            let (mut prev, mut cur) = (leaf, adj[leaf][0]);
            loop {
                length += graph.nodes[prev].distance(graph.nodes[cur]);
                if adj[cur].len() != 2 || length >= max_len {
                    break;
                }
                path.push(cur);
                let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
                prev = cur;
                cur = next;
            }
            if adj[cur].len() >= 3 && length < max_len && shortest.as_ref().is_none_or(|(l, _)| length < *l) {
                shortest = Some((length, path));
            }
        }
        let Some((_, path)) = shortest else {
            return (adj, alive);
        };
        for &n in &path {
            alive[n] = false;
            for m in core::mem::take(&mut adj[n]) {
                adj[m].retain(|&x| x != n);
            }
        }
    }
}

/// Thinning erodes a thick strand's end by up to its width, so the skeleton
/// leaf sits short of the strand end. The tip is the footprint pixel farthest
/// from the leaf among those connected to it ahead of the leaf (the end
/// direction comes from the last skeleton pixels); stepping back from the
/// tip by the local half width lands on the centerline end.
fn extend_leaf(mask: &BinaryMask, nodes: &[Pixel], adj: &[Vec<usize>], leaf: usize) -> Pixel {
    const TAIL_PX: usize = 12;
    let (mut prev, mut cur) = (leaf, adj[leaf][0]);
    for _ in 1..TAIL_PX {
        if adj[cur].len() != 2 {
            break;
        }
        let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
        prev = cur;
        cur = next;
    }
    let (lr, lc) = (nodes[leaf].row as i64, nodes[leaf].col as i64);
    let (dr, dc) = ((lr - nodes[cur].row as i64) as f64, (lc - nodes[cur].col as i64) as f64);
    let norm = crate::fmath::sqrt(dr * dr + dc * dc);
    if norm == 0.0 {
        return nodes[leaf];
    }
    let (dr, dc) = (dr / norm, dc / norm);
    let reach = |(ur, uc): (f64, f64)| {
        let mut s = 0.0;
        while mask.get_signed(lr + crate::fmath::round(ur * (s + 0.5)) as i64, lc + crate::fmath::round(uc * (s + 0.5)) as i64) {
            s += 0.5;
        }
        s
    };
    let half_width = (reach((-dc, dr)) + reach((dc, -dr))) / 2.0;

    // Flood fill of the footprint ahead of the leaf, within a window.
    let radius = (6.0 * half_width) as i64 + 4;
    let side = 2 * radius + 1;
    let mut seen = vec![false; (side * side) as usize];
    let ahead = |r: i64, c: i64| ((r - lr) as f64) * dr + ((c - lc) as f64) * dc >= -1.0;
    let mut stack = vec![(lr, lc)];
    seen[(radius * side + radius) as usize] = true;
    let (mut tip, mut tip_d2) = ((lr, lc), 0);
    while let Some((r, c)) = stack.pop() {
        let d2 = (r - lr) * (r - lr) + (c - lc) * (c - lc);
        if d2 > tip_d2 || (d2 == tip_d2 && (r, c) < tip) {
            (tip, tip_d2) = ((r, c), d2);
        }
        for (nr, nc) in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
            let (wr, wc) = (nr - lr + radius, nc - lc + radius);
            if wr < 0 || wc < 0 || wr >= side || wc >= side {
                continue;
            }
            let k = (wr * side + wc) as usize;
            if !seen[k] && mask.get_signed(nr, nc) && ahead(nr, nc) {
                seen[k] = true;
                stack.push((nr, nc));
            }
        }
    }
    let dist = crate::fmath::sqrt(tip_d2 as f64);
    if dist <= half_width {
        return nodes[leaf];
    }
    // Step back towards the leaf, staying on the footprint.
    let mut back = half_width;
    while back < dist {
        let f = 1.0 - back / dist;
        let r = lr + crate::fmath::round((tip.0 - lr) as f64 * f) as i64;
        let c = lc + crate::fmath::round((tip.1 - lc) as f64 * f) as i64;
        if mask.get_signed(r, c) {
            return Pixel::new(r as u32, c as u32);
        }
        back += 0.5;
    }
    nodes[leaf]
}

/// Leaves and junctions of a curve-like object.
///
/// Footprint → thinning → pixel MST → spur pruning → degree 1 is a leaf,
/// degree ≥ 3 a junction (clusters within `merge_radius_px` merged to their
/// centroid pixel) → lifting through the nearest object pixel. Anchors are
/// ordered leaves first, then junctions; branches carry the lifted skeleton
/// path between consecutive anchors of the tree.
pub fn detect_1d_anchors(cloud: &PointCloud, cam: &CameraModel, params: &AnchorParams) -> Result<AnchorDetection> {
    params.validate()?;
    let mask = rasterize_mask(cloud, cam, params.dilation_px)?;
    let skel = skeletonize(&mask);
    let graph = build_mst(&skel.pixels());
    if graph.nodes.len() < 2 {
        return Err(Error::DetectionFailed("skeleton has fewer than two pixels".into()));
    }
    let (adj, alive) = prune_spurs(&graph, params.spur_length_px);
    let n = graph.nodes.len();

    // Junction clusters by single linkage.
    let junction_nodes: Vec<usize> = (0..n).filter(|&i| alive[i] && adj[i].len() >= 3).collect();
    let mut uf = UnionFind::new(junction_nodes.len());
    for a in 0..junction_nodes.len() {
        for b in a + 1..junction_nodes.len() {
            if graph.nodes[junction_nodes[a]].distance(graph.nodes[junction_nodes[b]]) <= params.merge_radius_px {
                uf.union(a, b);
            }
        }
    }
    let mut cluster_of_root: Vec<Option<usize>> = vec![None; junction_nodes.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (k, &node) in junction_nodes.iter().enumerate() {
        let root = uf.find(k);
        let id = *cluster_of_root[root].get_or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[id].push(node);
    }

    let map = ObjectPixelMap::new(cloud, cam);
    let lift = |px: Pixel| map.lookup(px, params.lift_search_px).map(|i| cloud.points[i]);

    let mut det = AnchorDetection::default();
    let mut anchor_of = vec![None; n];
    for i in (0..n).filter(|&i| alive[i] && adj[i].len() == 1) {
        let end = extend_leaf(&mask, &graph.nodes, &adj, i);
        if let Some(p) = lift(end).or_else(|| lift(graph.nodes[i])) {
            anchor_of[i] = Some(det.positions.len());
            det.positions.push(p);
            det.roles.push(AnchorRole::Leaf);
            det.pixels.push(end);
        }
    }
    for members in &clusters {
        let (sr, sc) = members.iter().fold((0.0, 0.0), |(r, c), &m| {
            (r + graph.nodes[m].row as f64, c + graph.nodes[m].col as f64)
        });
        let k = members.len() as f64;
        let center = Pixel::new(crate::fmath::round(sr / k) as u32, crate::fmath::round(sc / k) as u32);
        let closest = members
            .iter()
            .copied()
            .min_by(|&a, &b| graph.nodes[a].distance(center).total_cmp(&graph.nodes[b].distance(center)))
            .expect("non-empty cluster");
        if let Some(p) = lift(center).or_else(|| lift(graph.nodes[closest])) {
            let id = det.positions.len();
            for &m in members {
                anchor_of[m] = Some(id);
            }
            det.positions.push(p);
            det.roles.push(AnchorRole::Junction);
            det.pixels.push(center);
        }
    }
    let leaves = det.count(AnchorRole::Leaf);
    if leaves < 2 {
        return Err(Error::DetectionFailed(format!("found {leaves} skeleton leaves, need at least 2")));
    }

    // Walk from every anchor node along each incident skeleton path.
    for start in 0..n {
        let Some(a) = anchor_of[start] else { continue };
        for &first in &adj[start] {
            if anchor_of[first] == Some(a) {
                continue;
            }
            let mut pixels = vec![start, first];
            let (mut prev, mut cur) = (start, first);
            while anchor_of[cur].is_none() && adj[cur].len() == 2 {
                let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
                prev = cur;
                cur = next;
                pixels.push(cur);
            }
            let Some(b) = anchor_of[cur] else { continue };
            if a >= b {
                continue;
            }
            let mut polyline = vec![det.positions[a]];
            polyline.extend(pixels[1..pixels.len() - 1].iter().filter_map(|&i| lift(graph.nodes[i])));
            polyline.push(det.positions[b]);
            det.branches.push(Branch { ends: [a, b], polyline });
        }
    }
    Ok(det)
}

/// Contour anchors of a sheet: outer boundary of the largest footprint
/// region, lifted to 3D, then farthest point sampling seeded at the boundary
/// point farthest from the cloud centroid.
pub fn detect_2d_anchors(cloud: &PointCloud, cam: &CameraModel, params: &AnchorParams) -> Result<AnchorDetection> {
    params.validate()?;
    let mask = rasterize_mask(cloud, cam, params.dilation_px)?.largest_component();
    let boundary = trace_boundary(&mask);
    if boundary.is_empty() {
        return Err(Error::DetectionFailed("footprint has no region".into()));
    }
    let map = ObjectPixelMap::new(cloud, cam);
    let search = params.lift_search_px.max(params.dilation_px + 1);
    let mut contour = Vec::with_capacity(boundary.len());
    let mut contour_pixels = Vec::with_capacity(boundary.len());
    for px in boundary {
        if let Some(i) = map.lookup(px, search) {
            contour.push(cloud.points[i]);
            contour_pixels.push(px);
        }
    }
    let k = params.num_contour_anchors;
    if contour.len() < k {
        return Err(Error::DetectionFailed(format!("only {} lifted boundary points for {k} anchors", contour.len())));
    }
    let centroid = cloud.centroid().expect("non-empty cloud");
    let mut seed = 0;
    for (i, p) in contour.iter().enumerate() {
        if p.distance_squared(centroid) > contour[seed].distance_squared(centroid) {
            seed = i;
        }
    }
    let mut picks = vec![seed];
    picks.extend(fps(&contour, k - 1, &[contour[seed]])?);
    let mut det = AnchorDetection::default();
    for &i in &picks {
        det.positions.push(contour[i]);
        det.roles.push(AnchorRole::Contour);
        det.pixels.push(contour_pixels[i]);
    }
    det.contour_positions = picks;
    det.contour = contour;
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::{Mat3, Rigid};

    fn camera() -> CameraModel {
        CameraModel::new(100.0, 100.0, 49.5, 49.5, 100, 100, Rigid::IDENTITY).unwrap()
    }

    #[test]
    fn single_point_rasterizes_to_one_pixel_or_a_block() {
        let cam = camera();
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 1.0)]);
        let m = rasterize_mask(&cloud, &cam, 0).unwrap();
        assert_eq!(m.count(), 1);
        assert_eq!(rasterize_mask(&cloud, &cam, 1).unwrap().count(), 9);
        let behind = PointCloud::new(vec![Point3::new(0.0, 0.0, -1.0)]);
        assert!(matches!(rasterize_mask(&behind, &cam, 1), Err(Error::DetectionFailed(_))));
    }

    fn sheet(cam: &CameraModel, rot: f64) -> PointCloud {
        let r = Mat3::rotation_z(rot);
        let mut pts = Vec::new();
        for i in 0..=120 {
            for j in 0..=120 {
                let p = Point3::new(-0.15 + 0.3 * i as f64 / 120.0, -0.15 + 0.3 * j as f64 / 120.0, 0.0);
                pts.push(r.apply(p) + Point3::new(0.0, 0.0, 1.0));
            }
        }
        let _ = cam;
        PointCloud::new(pts)
    }

    #[test]
    fn square_sheet_contour_anchors_are_corners() {
        let cam = camera();
        let det = detect_2d_anchors(&sheet(&cam, 0.3), &cam, &AnchorParams::default()).unwrap();
        let r = Mat3::rotation_z(0.3);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                let corner = r.apply(Point3::new(0.15 * sx, 0.15 * sy, 0.0)) + Point3::new(0.0, 0.0, 1.0);
                let d = det.positions.iter().map(|p| p.distance(corner)).fold(f64::INFINITY, f64::min);
                assert!(d < 0.015, "corner {corner:?} missed by {d}");
            }
        }
    }

    #[test]
    fn straight_rope_has_two_leaves() {
        let cam = camera();
        let mut pts = Vec::new();
        for i in 0..=300 {
            for w in -2..=2 {
                pts.push(Point3::new(-0.2 + 0.4 * i as f64 / 300.0, 0.002 * w as f64, 1.0));
            }
        }
        let det = detect_1d_anchors(&PointCloud::new(pts), &cam, &AnchorParams::default()).unwrap();
        assert_eq!(det.count(AnchorRole::Leaf), 2);
        assert_eq!(det.count(AnchorRole::Junction), 0);
        assert_eq!(det.branches.len(), 1);
        let mut xs: Vec<f64> = det.positions.iter().map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 0.2).abs() < 0.02 && (xs[1] - 0.2).abs() < 0.02, "{xs:?}");
        assert!((det.branches[0].arc_length() - 0.4).abs() < 0.05);
    }
}
