//! Frame-to-frame keypoint propagation with anchor re-detection and a
//! symmetric moving average over the finished trajectory.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::anchors::AnchorDetection;
use crate::assign::min_cost_assignment;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::nn::NnIndex;
use crate::point::Point3;
use crate::solver::{gauss_seidel_solve, SolveDiagnostics, SolverParams};
use crate::topology::{AnchorRole, KeypointSet, Topology};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrackingParams {
    pub solver: SolverParams,
    /// Odd number of frames in the moving average; 1 disables smoothing.
    pub smoothing_window: usize,
    /// Detections farther than this (m) from an anchor's previous position are not matched to it.
    pub anchor_match_max_dist: f64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self { solver: SolverParams::tracking(), smoothing_window: 5, anchor_match_max_dist: 0.05 }
    }
}

impl TrackingParams {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::Config(format!("smoothing window must be odd, got {}", self.smoothing_window)));
        }
        if !(self.anchor_match_max_dist > 0.0) {
            return Err(Error::Config("anchor match distance must be positive".into()));
        }
        Ok(())
    }
}

/// What the tracker sees in one frame. `cloud` is `None` when segmentation
/// failed; `detection` is `None` when anchor detection failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame_index: usize,
    pub timestamp: f64,
    pub cloud: Option<PointCloud>,
    pub detection: Option<AnchorDetection>,
    /// Why the frame is degraded, if it is.
    pub failure: Option<Error>,
}

/// Anchor positions resolved for one frame, parallel to `topology.anchors`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorMatch {
    pub positions: Vec<Point3>,
    /// False where no detection was close enough and the previous position was kept.
    pub matched: Vec<bool>,
}

impl AnchorMatch {
    pub fn unmatched(&self) -> usize {
        self.matched.iter().filter(|m| !**m).count()
    }
}

/// Assigns detections to anchor slots role by role, minimising the total
/// distance to the previous anchor positions. Pairs farther apart than
/// `max_dist` are rejected and the slot keeps its previous position.
pub fn match_anchors(detected: &AnchorDetection, topology: &Topology, previous: &[Point3], max_dist: f64) -> AnchorMatch {
    let mut out = AnchorMatch { positions: previous.to_vec(), matched: vec![false; previous.len()] };
    for role in [AnchorRole::Leaf, AnchorRole::Junction, AnchorRole::Contour] {
        let slots: Vec<usize> = (0..topology.anchors.len()).filter(|&k| topology.anchors[k].role == role).collect();
        let dets = detected.indices_of(role);
        if slots.is_empty() || dets.is_empty() {
            continue;
        }
        // Gated pairs all cost the same, so they never steer the assignment.
        let gate_cost = 2.0 * max_dist;
        let cost: Vec<Vec<f64>> = slots
            .iter()
            .map(|&s| {
                dets.iter()
                    .map(|&d| {
                        let dist = previous[s].distance(detected.positions[d]);
                        if dist <= max_dist { dist } else { gate_cost }
                    })
                    .collect()
            })
            .collect();
        for (row, col) in min_cost_assignment(&cost).into_iter().enumerate() {
            if let Some(col) = col {
                let p = detected.positions[dets[col]];
                if previous[slots[row]].distance(p) <= max_dist {
                    out.positions[slots[row]] = p;
                    out.matched[slots[row]] = true;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameDiagnostics {
    /// The frame had no usable cloud; keypoints were carried forward.
    pub skipped: bool,
    /// Anchor detection failed; every anchor kept its previous position.
    pub detection_failed: bool,
    pub unmatched_anchors: usize,
    pub solve: SolveDiagnostics,
    pub message: Option<alloc::string::String>,
}

impl FrameDiagnostics {
    pub fn flagged(&self) -> bool {
        self.skipped || self.detection_failed || self.unmatched_anchors > 0
    }
}

/// One tracked frame before smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub keypoints: KeypointSet,
    pub anchors: AnchorMatch,
    pub diagnostics: FrameDiagnostics,
}

/// Solves one frame warm-started from the previous keypoints.
pub fn track_frame(
    x_prev: &KeypointSet,
    previous_anchors: &[Point3],
    obs: &Observation,
    topology: &Topology,
    params: &TrackingParams,
) -> Result<FrameResult> {
    x_prev.check(topology)?;
    let mut diagnostics = FrameDiagnostics {
        message: obs.failure.as_ref().map(|e| format!("{e}")),
        ..Default::default()
    };
    let carried = |diagnostics: FrameDiagnostics| FrameResult {
        keypoints: KeypointSet::new(x_prev.positions.clone(), obs.frame_index),
        anchors: AnchorMatch { positions: previous_anchors.to_vec(), matched: vec![false; previous_anchors.len()] },
        diagnostics,
    };
    let Some(cloud) = obs.cloud.as_ref().filter(|c| !c.is_empty()) else {
        diagnostics.skipped = true;
        diagnostics.unmatched_anchors = previous_anchors.len();
        return Ok(carried(diagnostics));
    };
    let anchors = match &obs.detection {
        Some(det) => match_anchors(det, topology, previous_anchors, params.anchor_match_max_dist),
        None => {
            diagnostics.detection_failed = true;
            AnchorMatch { positions: previous_anchors.to_vec(), matched: vec![false; previous_anchors.len()] }
        }
    };
    diagnostics.unmatched_anchors = anchors.unmatched();
    let index = NnIndex::build(&cloud.points)?;
    let warm = KeypointSet::new(x_prev.positions.clone(), obs.frame_index);
    let (keypoints, solve) = gauss_seidel_solve(&warm, &index, topology, &anchors.positions, &params.solver)?;
    diagnostics.solve = solve;
    Ok(FrameResult { keypoints, anchors, diagnostics })
}

/// Tracked sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Smoothed keypoints, one set per frame.
    pub keypoints: Vec<KeypointSet>,
    /// Solver output before smoothing.
    pub raw_keypoints: Vec<KeypointSet>,
    /// Anchor positions used in each frame, parallel to `topology.anchors`.
    pub anchor_positions: Vec<Vec<Point3>>,
    pub topology: Topology,
    pub diagnostics: Vec<FrameDiagnostics>,
    pub timestamps: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn flagged_frames(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.flagged()).count()
    }
}

/// Mean over the symmetric window `[t - w, t + w]`, `w = (window - 1) / 2`,
/// shrunk near the ends to the widest symmetric window that fits.
pub fn temporal_smooth(frames: &[KeypointSet], window: usize) -> Result<Vec<KeypointSet>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Config(format!("smoothing window must be odd, got {window}")));
    }
    let t_len = frames.len();
    let n = frames.first().map_or(0, KeypointSet::len);
    if frames.iter().any(|f| f.len() != n) {
        return Err(Error::InvalidInput("frames differ in keypoint count".into()));
    }
    let w = (window - 1) / 2;
    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let half = w.min(t).min(t_len - 1 - t);
        let span = &frames[t - half..=t + half];
        let positions = (0..n)
            .map(|i| {
                let coord = |axis: usize| {
                    let first = span[0].positions[i].axis(axis);
                    // Identical samples average to themselves exactly.
                    if span.iter().all(|f| f.positions[i].axis(axis) == first) {
                        first
                    } else {
                        span.iter().map(|f| f.positions[i].axis(axis)).sum::<f64>() / span.len() as f64
                    }
                };
                Point3::new(coord(0), coord(1), coord(2))
            })
            .collect();
        out.push(KeypointSet::new(positions, frames[t].frame_index));
    }
    Ok(out)
}

/// Tracks frames `1..` from the initial solution on frame 0, then smooths.
/// `observations[0]` describes the initialization frame.
pub fn track_sequence(
    x1: &KeypointSet,
    anchors1: &[Point3],
    observations: &[Observation],
    topology: &Topology,
    params: &TrackingParams,
) -> Result<Trajectory> {
    params.validate()?;
    x1.check(topology)?;
    if observations.is_empty() {
        return Err(Error::InvalidInput("no frames to track".into()));
    }
    let mut raw = vec![KeypointSet::new(x1.positions.clone(), observations[0].frame_index)];
    let mut anchor_positions = vec![anchors1.to_vec()];
    let mut diagnostics = vec![FrameDiagnostics::default()];
    for obs in &observations[1..] {
        let prev = raw.last().expect("at least one frame");
        let prev_anchors = anchor_positions.last().expect("at least one frame");
        let r = track_frame(prev, prev_anchors, obs, topology, params)?;
        raw.push(r.keypoints);
        anchor_positions.push(r.anchors.positions);
        diagnostics.push(r.diagnostics);
    }
    let keypoints = temporal_smooth(&raw, params.smoothing_window)?;
    let timestamps = observations.iter().map(|o| o.timestamp).collect();
    Ok(Trajectory { keypoints, raw_keypoints: raw, anchor_positions, topology: topology.clone(), diagnostics, timestamps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Vec<KeypointSet> {
        values.iter().enumerate().map(|(t, v)| KeypointSet::new(vec![Point3::new(*v, 0.0, 0.0)], t)).collect()
    }

    #[test]
    fn impulse_is_divided_by_window() {
        let out = temporal_smooth(&series(&[0.0, 0.0, 1.0, 0.0, 0.0]), 3).unwrap();
        assert_eq!(out[2].positions[0].x, 1.0 / 3.0);
        assert_eq!(out[0].positions[0].x, 0.0);
        let spike = temporal_smooth(&series(&[0.0, 0.0, 0.009, 0.0, 0.0]), 3).unwrap();
        assert!((spike[2].positions[0].x - 0.003).abs() < 1e-15);
    }

    #[test]
    fn constants_and_window_one_are_fixed() {
        let c = series(&[0.1; 7]);
        assert_eq!(temporal_smooth(&c, 5).unwrap(), c);
        let v = series(&[0.3, -1.0, 2.5, 0.7]);
        assert_eq!(temporal_smooth(&v, 1).unwrap(), v);
        assert!(temporal_smooth(&v, 4).is_err());
    }

    #[test]
    fn boundary_frames_shrink_symmetrically() {
        let out = temporal_smooth(&series(&[0.0, 3.0, 6.0, 0.0, 0.0]), 5).unwrap();
        assert_eq!(out[0].positions[0].x, 0.0);
        assert_eq!(out[1].positions[0].x, 3.0);
        assert_eq!(out[2].positions[0].x, 9.0 / 5.0);
    }

    #[test]
    fn swapped_detections_keep_indices() {
        let topo = crate::topology::Topology::chain(3).unwrap();
        let prev = [Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)];
        let det = AnchorDetection {
            positions: vec![Point3::new(1.01, 0.0, 0.0), Point3::new(0.01, 0.0, 0.0)],
            roles: vec![AnchorRole::Leaf; 2],
            ..Default::default()
        };
        let m = match_anchors(&det, &topo, &prev, 0.05);
        assert_eq!(m.positions, vec![Point3::new(0.01, 0.0, 0.0), Point3::new(1.01, 0.0, 0.0)]);
        assert_eq!(m.unmatched(), 0);
        let far = AnchorDetection { positions: vec![Point3::new(0.5, 0.0, 0.0)], roles: vec![AnchorRole::Leaf], ..Default::default() };
        let m = match_anchors(&far, &topo, &prev, 0.05);
        assert_eq!(m.positions, prev.to_vec());
        assert_eq!(m.unmatched(), 2);
    }

    #[test]
    fn empty_frame_carries_previous_keypoints() {
        let mut topo = crate::topology::Topology::chain(3).unwrap();
        topo.rest_lengths = vec![0.1, 0.1];
        let x = KeypointSet::new(vec![Point3::ORIGIN, Point3::new(0.1, 0.0, 0.0), Point3::new(0.2, 0.0, 0.0)], 0);
        let obs = Observation { frame_index: 1, timestamp: 0.1, cloud: None, detection: None, failure: None };
        let anchors = [x.positions[0], x.positions[2]];
        let r = track_frame(&x, &anchors, &obs, &topo, &TrackingParams::default()).unwrap();
        assert_eq!(r.keypoints.positions, x.positions);
        assert!(r.diagnostics.skipped);
    }
}
