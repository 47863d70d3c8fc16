//! JSON documents produced by the pipeline commands.

use std::path::Path;

use keytrace_core::init::InitResult;
use keytrace_core::metrics::{FrameMetrics, SequenceMetrics};
use keytrace_core::solver::SolveDiagnostics;
use keytrace_core::synth::TruthReport;
use keytrace_core::tracking::{FrameDiagnostics, Trajectory};
use keytrace_core::{KeypointSet, ObjectClass, Point3, Topology};
use serde::{Deserialize, Serialize};

use crate::config::{Config, EvalParams};
use crate::error::{CliError, CliResult};
use crate::formats::{check_version, read_json, FORMAT_VERSION};

pub const TOOL: &str = "keytrace";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of `config`.
    pub config_sha256: String,
}

impl Provenance {
    pub fn for_config(config: &Config) -> Self {
        Self { tool: TOOL.into(), tool_version: env!("CARGO_PKG_VERSION").into(), config_sha256: config.digest() }
    }
}

/// Output of `init`: topology and keypoints on the first frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitFile {
    pub version: u32,
    pub class: ObjectClass,
    pub topology: Topology,
    pub keypoints: Vec<Point3>,
    /// Positions of the anchor slots, parallel to `topology.anchors`.
    pub anchor_positions: Vec<Point3>,
    pub solve: SolveDiagnostics,
    pub provenance: Provenance,
    pub config: Config,
}

impl InitFile {
    pub fn new(init: &InitResult, config: &Config) -> Self {
        Self {
            version: FORMAT_VERSION,
            class: init.class,
            topology: init.topology.clone(),
            keypoints: init.keypoints.positions.clone(),
            anchor_positions: init.anchor_positions.clone(),
            solve: init.solve,
            provenance: Provenance::for_config(config),
            config: config.clone(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let f: Self = read_json(path)?;
        check_version(path, f.version)?;
        f.topology.validate_structure().map_err(|e| CliError::format(path, "topology", e.to_string()))?;
        if f.keypoints.len() != f.topology.num_keypoints {
            return Err(CliError::format(path, "keypoints", "length differs from topology.num_keypoints"));
        }
        if f.anchor_positions.len() != f.topology.anchors.len() {
            return Err(CliError::format(path, "anchor_positions", "length differs from topology.anchors"));
        }
        if !f.keypoints.iter().chain(&f.anchor_positions).all(Point3::is_finite) {
            return Err(CliError::format(path, "keypoints", "non-finite coordinate"));
        }
        Ok(f)
    }

    pub fn keypoint_set(&self) -> KeypointSet {
        KeypointSet::new(self.keypoints.clone(), 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFrame {
    pub frame: usize,
    pub timestamp: f64,
    /// Smoothed output.
    pub keypoints: Vec<Point3>,
    /// Solver output before smoothing.
    pub raw_keypoints: Vec<Point3>,
    pub anchors: Vec<Point3>,
    pub flagged: bool,
    pub diagnostics: FrameDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub version: u32,
    pub topology: Topology,
    pub frames: Vec<TrajectoryFrame>,
    pub provenance: Provenance,
    pub config: Config,
}

impl TrajectoryFile {
    pub fn new(traj: &Trajectory, config: &Config) -> Self {
        let frames = (0..traj.len())
            .map(|t| TrajectoryFrame {
                frame: traj.keypoints[t].frame_index,
                timestamp: traj.timestamps[t],
                keypoints: traj.keypoints[t].positions.clone(),
                raw_keypoints: traj.raw_keypoints[t].positions.clone(),
                anchors: traj.anchor_positions[t].clone(),
                flagged: traj.diagnostics[t].flagged(),
                diagnostics: traj.diagnostics[t].clone(),
            })
            .collect();
        Self {
            version: FORMAT_VERSION,
            topology: traj.topology.clone(),
            frames,
            provenance: Provenance::for_config(config),
            config: config.clone(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let f: Self = read_json(path)?;
        check_version(path, f.version)?;
        f.topology.validate_structure().map_err(|e| CliError::format(path, "topology", e.to_string()))?;
        let n = f.topology.num_keypoints;
        let na = f.topology.anchors.len();
        for (t, fr) in f.frames.iter().enumerate() {
            if fr.keypoints.len() != n || fr.raw_keypoints.len() != n {
                return Err(CliError::format(path, format!("frames[{t}].keypoints"), "length differs from topology.num_keypoints"));
            }
            if fr.anchors.len() != na {
                return Err(CliError::format(path, format!("frames[{t}].anchors"), "length differs from topology.anchors"));
            }
        }
        if f.frames.is_empty() {
            return Err(CliError::format(path, "frames", "trajectory has no frames"));
        }
        Ok(f)
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let set = |f: &TrajectoryFrame, x: &[Point3]| KeypointSet::new(x.to_vec(), f.frame);
        Trajectory {
            keypoints: self.frames.iter().map(|f| set(f, &f.keypoints)).collect(),
            raw_keypoints: self.frames.iter().map(|f| set(f, &f.raw_keypoints)).collect(),
            anchor_positions: self.frames.iter().map(|f| f.anchors.clone()).collect(),
            topology: self.topology.clone(),
            diagnostics: self.frames.iter().map(|f| f.diagnostics.clone()).collect(),
            timestamps: self.frames.iter().map(|f| f.timestamp).collect(),
        }
    }
}

/// One row of the metric time series. Cloud-based metrics are absent when
/// no sequence was given or the frame failed to segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: usize,
    pub edge_rmse_mm: f64,
    pub chamfer_mm: Option<f64>,
    pub fscore_pct: Option<f64>,
    pub truth_error_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub params: EvalParams,
    /// Aggregate over frames with a segmented cloud.
    pub summary: Option<SequenceMetrics>,
    pub mean_edge_rmse_mm: f64,
    pub truth: Option<TruthReport>,
    pub frames: Vec<FrameReport>,
}

impl MetricsReport {
    /// Plot-ready time series; missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("frame,edge_rmse_mm,chamfer_mm,fscore_pct\n");
        for f in &self.frames {
            s.push_str(&format!("{},{},{},{}\n", f.frame, f.edge_rmse_mm, opt(f.chamfer_mm), opt(f.fscore_pct)));
        }
        s
    }

    pub fn frame_metrics(&self) -> Vec<FrameMetrics> {
        self.frames
            .iter()
            .filter_map(|f| {
                Some(FrameMetrics { edge_rmse_mm: f.edge_rmse_mm, chamfer_mm: f.chamfer_mm?, fscore_pct: f.fscore_pct? })
            })
            .collect()
    }
}
