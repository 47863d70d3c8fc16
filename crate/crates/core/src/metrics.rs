//! Evaluation metrics: edge-length error, keypoint-to-cloud Chamfer
//! distance and F-score, plus per-sequence aggregates. Results are in
//! millimetres and percent.

use alloc::format;

use crate::error::{Error, Result};
use crate::fmath;
use crate::nn::NnIndex;
use crate::point::Point3;
use crate::topology::Topology;

/// Recall is computed on at most this many cloud points (every k-th point).
pub const RECALL_SAMPLE_LIMIT: usize = 5000;
pub const DEFAULT_TAU_MM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameMetrics {
    pub edge_rmse_mm: f64,
    pub chamfer_mm: f64,
    pub fscore_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SequenceMetrics {
    pub frames: usize,
    pub mean_edge_rmse_mm: f64,
    pub mean_chamfer_mm: f64,
    pub mean_fscore_pct: f64,
    /// Percentage of frames with edge RMSE below the edge threshold.
    pub edge_below_pct: f64,
    /// Percentage of frames with Chamfer distance below the Chamfer threshold.
    pub chamfer_below_pct: f64,
}

/// Root mean square of `|xi - xj| - d` over all edges, in mm.
pub fn edge_rmse(x: &[Point3], topology: &Topology) -> f64 {
    if topology.edges.is_empty() {
        return 0.0;
    }
    let sum: f64 = topology
        .edges
        .iter()
        .zip(&topology.rest_lengths)
        .map(|(&(i, j), d)| {
            let e = x[i].distance(x[j]) - d;
            e * e
        })
        .sum();
    fmath::sqrt(sum / topology.edges.len() as f64) * 1000.0
}

/// Mean distance from each keypoint to its nearest cloud point, in mm
/// (keypoint to cloud only).
pub fn chamfer(x: &[Point3], cloud: &NnIndex) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|p| cloud.nearest(*p).distance).sum::<f64>() / x.len() as f64 * 1000.0
}

/// F-score in percent at threshold `tau_mm` (inclusive): precision is the
/// fraction of keypoints within `tau` of the cloud, recall the fraction of
/// cloud points within `tau` of some keypoint.
pub fn fscore(x: &[Point3], cloud: &NnIndex, tau_mm: f64) -> f64 {
    if x.is_empty() || cloud.is_empty() {
        return 0.0;
    }
    let tau = tau_mm / 1000.0;
    let precision = x.iter().filter(|p| cloud.nearest(**p).distance <= tau).count() as f64 / x.len() as f64;
    let keypoints = NnIndex::build(x).expect("non-empty keypoints");
    let stride = cloud.len().div_ceil(RECALL_SAMPLE_LIMIT);
    let sample = cloud.points().iter().step_by(stride);
    let total = cloud.len().div_ceil(stride);
    let hits = sample.filter(|q| keypoints.nearest(**q).distance <= tau).count();
    let recall = hits as f64 / total as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        200.0 * precision * recall / (precision + recall)
    }
}

pub fn frame_metrics(x: &[Point3], topology: &Topology, cloud: &NnIndex, tau_mm: f64) -> FrameMetrics {
    FrameMetrics {
        edge_rmse_mm: edge_rmse(x, topology),
        chamfer_mm: chamfer(x, cloud),
        fscore_pct: fscore(x, cloud, tau_mm),
    }
}

pub fn aggregate(frames: &[FrameMetrics], edge_thresh_mm: f64, chamfer_thresh_mm: f64) -> Result<SequenceMetrics> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("no frames to aggregate".into()));
    }
    let n = frames.len() as f64;
    let mean = |f: fn(&FrameMetrics) -> f64| frames.iter().map(f).sum::<f64>() / n;
    let pct = |pred: &dyn Fn(&FrameMetrics) -> bool| 100.0 * frames.iter().filter(|m| pred(m)).count() as f64 / n;
    let out = SequenceMetrics {
        frames: frames.len(),
        mean_edge_rmse_mm: mean(|m| m.edge_rmse_mm),
        mean_chamfer_mm: mean(|m| m.chamfer_mm),
        mean_fscore_pct: mean(|m| m.fscore_pct),
        edge_below_pct: pct(&|m| m.edge_rmse_mm < edge_thresh_mm),
        chamfer_below_pct: pct(&|m| m.chamfer_mm < chamfer_thresh_mm),
    };
    if !out.mean_edge_rmse_mm.is_finite() || !out.mean_chamfer_mm.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite metrics: {out:?}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn edge_error_of_one_long_edge() {
        let mut t = Topology::chain(2).unwrap();
        t.rest_lengths = vec![0.1];
        let x = [Point3::ORIGIN, Point3::new(0.103, 0.0, 0.0)];
        assert!((edge_rmse(&x, &t) - 3.0).abs() < 1e-9);
        let exact = [Point3::ORIGIN, Point3::new(0.1, 0.0, 0.0)];
        assert_eq!(edge_rmse(&exact, &t), 0.0);
    }

    #[test]
    fn chamfer_of_one_raised_keypoint() {
        let plane: Vec<Point3> = (0..400).map(|i| Point3::new((i % 20) as f64 * 0.01, (i / 20) as f64 * 0.01, 0.0)).collect();
        let idx = NnIndex::build(&plane).unwrap();
        let mut x: Vec<Point3> = plane[..10].to_vec();
        x[3].z = 0.01;
        assert!((chamfer(&x, &idx) - 1.0).abs() < 1e-9);
        assert_eq!(chamfer(&plane[..10], &idx), 0.0);
    }

    #[test]
    fn fscore_examples() {
        let cloud: Vec<Point3> = (0..4).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let idx = NnIndex::build(&cloud).unwrap();
        assert_eq!(fscore(&cloud, &idx, 10.0), 100.0);
        assert_eq!(fscore(&[Point3::new(0.0, 5.0, 0.0)], &idx, 10.0), 0.0);
        let half = [cloud[0], cloud[1]];
        assert!((fscore(&half, &idx, 10.0) - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_examples() {
        let m = |e, c| FrameMetrics { edge_rmse_mm: e, chamfer_mm: c, fscore_pct: 50.0 };
        let s = aggregate(&[m(3.0, 8.0), m(3.0, 12.0)], 5.0, 10.0).unwrap();
        assert_eq!(s.edge_below_pct, 100.0);
        assert_eq!(s.chamfer_below_pct, 50.0);
        let one = aggregate(&[m(4.0, 7.0)], 5.0, 10.0).unwrap();
        assert_eq!((one.mean_edge_rmse_mm, one.mean_chamfer_mm), (4.0, 7.0));
        assert!(aggregate(&[], 5.0, 10.0).is_err());
    }
}
