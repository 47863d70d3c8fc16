//! End-to-end run over a depth sequence: segment every frame, initialize on
//! the first, detect anchors on the rest, track and smooth.

use alloc::vec::Vec;

use crate::anchors::{detect_1d_anchors, detect_2d_anchors, AnchorDetection};
use crate::camera::{CameraModel, DepthFrame};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::init::{boundary_detection, initialize, InitParams, InitResult};
use crate::segmentation::{segment_frame, SegmentationParams, SegmentedFrame};
use crate::topology::ObjectClass;
use crate::tracking::{track_sequence, Observation, TrackingParams, Trajectory};

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineConfig {
    pub segmentation: SegmentationParams,
    pub init: InitParams,
    pub tracking: TrackingParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.init.classify.validate()?;
        self.init.anchors.validate()?;
        self.init.solver.validate()?;
        self.tracking.validate()
    }
}

/// Depth frames of one sequence with the static reference frame and the
/// per-frame exclusion clouds (empty clouds when there are no distractors).
#[derive(Debug, Clone, Copy)]
pub struct SequenceInput<'a> {
    pub camera: &'a CameraModel,
    pub reference: &'a DepthFrame,
    pub frames: &'a [DepthFrame],
    pub exclusions: &'a [PointCloud],
}

impl SequenceInput<'_> {
    fn exclusion(&self, t: usize) -> PointCloud {
        self.exclusions.get(t).cloned().unwrap_or_default()
    }
}

/// Anchors for an already classified object.
pub fn detect_anchors(
    cloud: &PointCloud,
    cam: &CameraModel,
    class: ObjectClass,
    params: &InitParams,
) -> Result<AnchorDetection> {
    match class {
        ObjectClass::OneDim => detect_1d_anchors(cloud, cam, &params.anchors),
        ObjectClass::TwoDim => {
            let det = detect_2d_anchors(cloud, cam, &params.anchors)?;
            if params.boundary_anchors {
                boundary_detection(&det, params.grid_shape).map_err(|e| Error::DetectionFailed(alloc::format!("{e}")))
            } else {
                Ok(det)
            }
        }
    }
}

/// Segmentation and anchor detection for one frame, degraded rather than
/// failed: a segmentation error leaves `cloud` empty, a detection error
/// leaves `detection` empty.
pub fn observe(segmented: Result<SegmentedFrame>, timestamp: f64, frame_index: usize, cam: &CameraModel, class: ObjectClass, params: &InitParams) -> Observation {
    match segmented {
        Err(e) => Observation { frame_index, timestamp, cloud: None, detection: None, failure: Some(e) },
        Ok(seg) => {
            let (detection, failure) = match detect_anchors(&seg.cloud, cam, class, params) {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e)),
            };
            Observation { frame_index, timestamp, cloud: Some(seg.cloud), detection, failure }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub init: InitResult,
    pub trajectory: Trajectory,
    /// Segmented clouds per frame (`None` where segmentation failed).
    pub clouds: Vec<Option<PointCloud>>,
}

/// Segments every frame.
pub fn segment_all(input: &SequenceInput, params: &SegmentationParams) -> Vec<Result<SegmentedFrame>> {
    (0..input.frames.len())
        .map(|t| segment_frame(&input.frames[t], input.reference, input.camera, &input.exclusion(t), params, t))
        .collect()
}

/// Runs initialization on the first frame and tracking over the rest, from
/// precomputed segmentations (one per frame).
pub fn run_segmented(
    input: &SequenceInput,
    segmented: Vec<Result<SegmentedFrame>>,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.validate()?;
    if segmented.is_empty() || segmented.len() != input.frames.len() {
        return Err(Error::InvalidInput("need one segmentation per frame and at least one frame".into()));
    }
    let mut segmented = segmented.into_iter();
    let first = segmented.next().expect("non-empty")?;
    let init = initialize(&first, input.camera, &config.init)?;
    let mut observations = Vec::with_capacity(input.frames.len());
    observations.push(Observation {
        frame_index: 0,
        timestamp: input.frames[0].timestamp,
        cloud: Some(first.cloud),
        detection: Some(init.detection.clone()),
        failure: None,
    });
    for (t, seg) in segmented.enumerate() {
        let t = t + 1;
        observations.push(observe(seg, input.frames[t].timestamp, t, input.camera, init.class, &config.init));
    }
    let trajectory = track_sequence(&init.keypoints, &init.anchor_positions, &observations, &init.topology, &config.tracking)?;
    let clouds = observations.into_iter().map(|o| o.cloud).collect();
    Ok(PipelineOutput { init, trajectory, clouds })
}

/// Full pipeline, sequentially.
pub fn run(input: &SequenceInput, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let segmented = segment_all(input, &config.segmentation);
    run_segmented(input, segmented, config)
}
