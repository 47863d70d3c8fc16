//! Object isolation: depth differencing against a static reference frame,
//! exclusion-cloud filtering, DBSCAN, and largest-cluster selection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::camera::{is_valid_depth, lift_depth_masked, CameraModel, DepthFrame};
use crate::cloud::PointCloud;
use crate::error::{Error, Result, Stage};
use crate::mask::BinaryMask;
use crate::fmath;
use crate::nn::NnIndex;
use crate::point::Point3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SegmentationParams {
    /// Minimum depth decrease (m) for a pixel to count as new geometry.
    pub diff_threshold: f64,
    /// Points closer than this (m) to any exclusion point are dropped.
    pub exclusion_radius: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Lift every `stride`-th row and column only.
    pub stride: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self { diff_threshold: 0.02, exclusion_radius: 0.03, dbscan_eps: 0.02, dbscan_min_pts: 8, stride: 1 }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.diff_threshold, self.exclusion_radius, self.dbscan_eps];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.dbscan_min_pts == 0 || self.stride == 0 {
            return Err(Error::Config(format!("segmentation parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Segmented object cloud for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedFrame {
    pub cloud: PointCloud,
    pub frame_index: usize,
}

/// Pixels where new geometry appears in front of the reference scene:
/// current is valid, and the reference is invalid or deeper by more than
/// `threshold`.
pub fn depth_difference_mask(current: &DepthFrame, reference: &DepthFrame, threshold: f64) -> Result<BinaryMask> {
    if !current.same_shape(reference) {
        return Err(Error::Config(format!(
            "current frame is {}x{} but reference is {}x{}",
            current.width, current.height, reference.width, reference.height
        )));
    }
    let data = current
        .depth
        .iter()
        .zip(&reference.depth)
        .map(|(&c, &r)| is_valid_depth(c) && (!is_valid_depth(r) || (c as f64) < r as f64 - threshold))
        .collect();
    Ok(BinaryMask::from_data(current.width, current.height, data))
}

/// Drops points within `radius` of any exclusion point (strictly farther survive).
pub fn filter_exclusion(cloud: &PointCloud, exclusion: &PointCloud, radius: f64) -> PointCloud {
    if exclusion.is_empty() || cloud.is_empty() {
        return cloud.clone();
    }
    let index = NnIndex::build(&exclusion.points).expect("non-empty exclusion cloud");
    cloud.retain_by(|_, p| index.count_within(*p, radius) == 0)
}

/// DBSCAN output. Cluster ids follow the lowest core point index of each cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster id per point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    /// Point indices per cluster, ascending.
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

/// Uniform grid with cell size `eps` for fixed-radius queries: points
/// sorted by cell key, cells located by binary search.
struct RadiusGrid<'a> {
    points: &'a [Point3],
    eps: f64,
    keys: Vec<[i64; 3]>,
    order: Vec<usize>,
}

impl<'a> RadiusGrid<'a> {
    fn new(points: &'a [Point3], eps: f64) -> Self {
        let cell = |p: &Point3| [fmath::floor(p.x / eps) as i64, fmath::floor(p.y / eps) as i64, fmath::floor(p.z / eps) as i64];
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by_key(|&i| (cell(&points[i]), i));
        let keys = order.iter().map(|&i| cell(&points[i])).collect();
        Self { points, eps, keys, order }
    }

    /// Visits every point within `eps` of point `i` (itself included) until
    /// `f` returns false.
    fn visit(&self, i: usize, mut f: impl FnMut(usize) -> bool) {
        let p = self.points[i];
        let c = [fmath::floor(p.x / self.eps) as i64, fmath::floor(p.y / self.eps) as i64, fmath::floor(p.z / self.eps) as i64];
        let r2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let lo_key = [c[0] + dx, c[1] + dy, c[2] - 1];
                let hi_key = [c[0] + dx, c[1] + dy, c[2] + 1];
                let lo = self.keys.partition_point(|k| *k < lo_key);
                let hi = self.keys.partition_point(|k| *k <= hi_key);
                for &j in &self.order[lo..hi] {
                    if p.distance_squared(self.points[j]) <= r2 && !f(j) {
                        return;
                    }
                }
            }
        }
    }
}

/// Density-based clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Clusters are the connected components
/// of core points under the `eps` relation; a border point joins the cluster
/// of its nearest core neighbor, which keeps the result independent of
/// input order.
pub fn dbscan(cloud: &PointCloud, eps: f64, min_pts: usize) -> Clustering {
    let n = cloud.len();
    let grid = RadiusGrid::new(&cloud.points, eps);
    let is_core: Vec<bool> = (0..n)
        .map(|i| {
            let mut count = 0;
            grid.visit(i, |_| {
                count += 1;
                count < min_pts
            });
            count >= min_pts
        })
        .collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if !is_core[start] || labels[start].is_some() {
            continue;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        labels[start] = Some(id);
        stack.push(start);
        while let Some(i) = stack.pop() {
            members.push(i);
            grid.visit(i, |j| {
                if is_core[j] && labels[j].is_none() {
                    labels[j] = Some(id);
                    stack.push(j);
                }
                true
            });
        }
        clusters.push(members);
    }

    for i in 0..n {
        if is_core[i] {
            continue;
        }
        let p = cloud.points[i];
        let mut nearest: Option<usize> = None;
        grid.visit(i, |j| {
            if is_core[j] {
                let closer = nearest.is_none_or(|b| {
                    let pb = cloud.points[b];
                    p.distance_squared(cloud.points[j])
                        .total_cmp(&p.distance_squared(pb))
                        .then(cloud.points[j].lex_cmp(&pb))
                        .is_lt()
                });
                if closer {
                    nearest = Some(j);
                }
            }
            true
        });
        if let Some(j) = nearest {
            let id = labels[j].expect("core points are labelled");
            labels[i] = Some(id);
            clusters[id].push(i);
        }
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    let noise = (0..n).filter(|&i| labels[i].is_none()).collect();
    Clustering { labels, clusters, noise }
}

/// Points of the largest cluster (lowest cluster id on ties).
pub fn largest_cluster(cloud: &PointCloud, clustering: &Clustering) -> Result<PointCloud> {
    let mut best: Option<usize> = None;
    for (id, c) in clustering.clusters.iter().enumerate() {
        if best.is_none_or(|b| c.len() > clustering.clusters[b].len()) {
            best = Some(id);
        }
    }
    let best = best.ok_or(Error::SegmentationFailed(Stage::Clustering))?;
    Ok(cloud.select(&clustering.clusters[best]))
}

/// Full segmentation of one frame: difference mask, lifting, exclusion
/// filter, DBSCAN, largest cluster.
pub fn segment_frame(
    current: &DepthFrame,
    reference: &DepthFrame,
    cam: &CameraModel,
    exclusion: &PointCloud,
    params: &SegmentationParams,
    frame_index: usize,
) -> Result<SegmentedFrame> {
    params.validate()?;
    let mask = depth_difference_mask(current, reference, params.diff_threshold)?;
    if mask.is_empty() {
        return Err(Error::SegmentationFailed(Stage::Differencing));
    }
    let lifted = lift_depth_masked(current, cam, Some(&mask), params.stride)?;
    if lifted.is_empty() {
        return Err(Error::SegmentationFailed(Stage::Lifting));
    }
    let kept = filter_exclusion(&lifted, exclusion, params.exclusion_radius);
    if kept.is_empty() {
        return Err(Error::SegmentationFailed(Stage::ExclusionFilter));
    }
    let clustering = dbscan(&kept, params.dbscan_eps, params.dbscan_min_pts);
    let cloud = largest_cluster(&kept, &clustering)?;
    Ok(SegmentedFrame { cloud, frame_index })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: usize, h: usize, f: impl Fn(usize, usize) -> f32) -> DepthFrame {
        let depth = (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).map(|(r, c)| f(r, c)).collect();
        DepthFrame::new(w, h, depth, 0.0).unwrap()
    }

    #[test]
    fn identical_frames_give_empty_mask() {
        let f = frame(8, 6, |r, c| 1.0 + 0.01 * (r + c) as f32);
        assert!(depth_difference_mask(&f, &f, 0.02).unwrap().is_empty());
    }

    #[test]
    fn object_in_front_of_background_is_selected() {
        let reference = frame(10, 10, |_, _| 1.5);
        let inside = |r: usize, c: usize| (3..7).contains(&r) && (2..5).contains(&c);
        let current = frame(10, 10, |r, c| if inside(r, c) { 0.8 } else { 1.5 });
        let mask = depth_difference_mask(&current, &reference, 0.02).unwrap();
        for r in 0..10 {
            for c in 0..10 {
                assert_eq!(mask.get(crate::Pixel::new(r as u32, c as u32)), inside(r, c));
            }
        }
        assert_eq!(mask.count(), 12);
    }

    #[test]
    fn newly_valid_pixel_is_selected_and_receding_pixel_is_not() {
        let reference = frame(2, 1, |_, c| if c == 0 { 0.0 } else { 1.0 });
        let current = frame(2, 1, |_, _| 1.2);
        let mask = depth_difference_mask(&current, &reference, 0.02).unwrap();
        assert_eq!(mask.data(), &[true, false]);
    }

    #[test]
    fn exclusion_examples() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(filter_exclusion(&cloud, &PointCloud::default(), 0.1), cloud);
        let excl = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.05)]);
        let out = filter_exclusion(&cloud, &excl, 0.1);
        assert_eq!(out.points, vec![Point3::new(1.0, 0.0, 0.0)]);
    }

    #[test]
    fn dbscan_two_groups() {
        let mut pts = Vec::new();
        for g in 0..2 {
            for i in 0..20 {
                pts.push(Point3::new(g as f64 * 0.5 + i as f64 * 0.005, 0.0, 0.0));
            }
        }
        let c = dbscan(&PointCloud::new(pts), 0.02, 4);
        assert_eq!(c.clusters.len(), 2);
        assert!(c.clusters.iter().all(|m| m.len() == 20));
        assert!(c.noise.is_empty());
    }

    #[test]
    fn dbscan_sparse_points_are_noise_and_blob_is_one_cluster() {
        let sparse: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let c = dbscan(&PointCloud::new(sparse), 0.5, 2);
        assert!(c.clusters.is_empty());
        assert_eq!(c.noise.len(), 10);
        let blob: Vec<Point3> = (0..27).map(|i| Point3::new((i % 3) as f64, ((i / 3) % 3) as f64, (i / 9) as f64) * 0.01).collect();
        let c = dbscan(&PointCloud::new(blob), 0.02, 4);
        assert_eq!(c.clusters.len(), 1);
        assert!(c.noise.is_empty());
    }

    #[test]
    fn largest_cluster_tie_breaks_to_lowest_id() {
        let cloud = PointCloud::new((0..8).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect());
        let clustering = Clustering {
            labels: vec![Some(0); 8],
            clusters: vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]],
            noise: vec![],
        };
        assert_eq!(largest_cluster(&cloud, &clustering).unwrap().points[0], Point3::ORIGIN);
        let sizes = Clustering {
            labels: vec![],
            clusters: vec![vec![0; 5], vec![1; 9], vec![2; 3]],
            noise: vec![],
        };
        assert_eq!(largest_cluster(&cloud, &sizes).unwrap().len(), 9);
        let none = Clustering { labels: vec![], clusters: vec![], noise: vec![] };
        assert_eq!(largest_cluster(&cloud, &none), Err(Error::SegmentationFailed(Stage::Clustering)));
    }
}
