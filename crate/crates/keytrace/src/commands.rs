//! The subcommands, callable in-process.

use std::path::Path;

use keytrace_core::init::initialize;
use keytrace_core::metrics::{aggregate, edge_rmse, frame_metrics};
use keytrace_core::pipeline::observe;
use keytrace_core::synth::{default_camera, evaluate_against_truth, gen_sequence, SynthConfig};
use keytrace_core::tracking::{track_sequence, Observation};
use keytrace_core::NnIndex;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::files::{FrameReport, InitFile, MetricsReport, TrajectoryFile};
use crate::formats::{write_bytes, write_cloud, write_json, DepthEncoding, FORMAT_VERSION};
use crate::sequence::{load_sequence, read_ground_truth, write_sequence};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentEntry {
    pub frame: usize,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cloud: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub version: u32,
    pub frames: Vec<SegmentEntry>,
}

/// Segments every frame into `out/cloud/NNNNNN.cloud` and writes
/// `out/segmentation.json`. Frames that fail to segment are listed with the
/// failing stage instead of a cloud.
pub fn segment(sequence: &Path, config: &Config, out: &Path) -> CliResult<SegmentReport> {
    let seq = load_sequence(sequence)?;
    let segmented = seq.segment_all(&config.segmentation);
    let mut frames = Vec::with_capacity(segmented.len());
    for (t, r) in segmented.into_iter().enumerate() {
        frames.push(match r {
            Ok(seg) => {
                let rel = format!("cloud/{t:06}.cloud");
                write_cloud(&out.join(&rel), &seg.cloud)?;
                SegmentEntry { frame: t, points: seg.cloud.len(), cloud: Some(rel), error: None }
            }
            Err(e) => SegmentEntry { frame: t, points: 0, cloud: None, error: Some(e.to_string()) },
        });
    }
    let report = SegmentReport { version: FORMAT_VERSION, frames };
    write_json(&out.join("segmentation.json"), &report)?;
    Ok(report)
}

/// Initializes on the first frame of the sequence.
pub fn init(sequence: &Path, config: &Config, out: &Path) -> CliResult<InitFile> {
    let seq = load_sequence(sequence)?;
    let seg = seq.segment(0, &config.segmentation)?;
    let result = initialize(&seg, &seq.camera, &config.init)?;
    let file = InitFile::new(&result, config);
    write_json(out, &file)?;
    Ok(file)
}

/// Tracks frames `1..` from an initialization file.
pub fn track(sequence: &Path, init_path: &Path, config: &Config, out: &Path) -> CliResult<TrajectoryFile> {
    let seq = load_sequence(sequence)?;
    let init = InitFile::read(init_path)?;
    let cam = &seq.camera;
    let observations: Vec<Observation> = (0..seq.len())
        .into_par_iter()
        .map(|t| {
            let ts = seq.frames[t].timestamp;
            if t == 0 {
                // The tracker only reads the index and timestamp of the initialization frame.
                return Observation { frame_index: 0, timestamp: ts, cloud: None, detection: None, failure: None };
            }
            observe(seq.segment(t, &config.segmentation), ts, t, cam, init.class, &config.init)
        })
        .collect();
    let traj = track_sequence(&init.keypoint_set(), &init.anchor_positions, &observations, &init.topology, &config.tracking)
        .map_err(|e| match e.stage() {
            Some(_) => CliError::from(e),
            None => CliError::Stage { stage: "tracking", source: e },
        })?;
    let file = TrajectoryFile::new(&traj, config);
    write_json(out, &file)?;
    Ok(file)
}

/// Scores a trajectory against the segmented clouds of its sequence and/or
/// a ground-truth file; writes `metrics.json` and `metrics.csv` into `out`.
pub fn eval(
    trajectory: &Path,
    sequence: Option<&Path>,
    ground_truth: Option<&Path>,
    config: &Config,
    out: &Path,
) -> CliResult<MetricsReport> {
    if sequence.is_none() && ground_truth.is_none() {
        return Err(CliError::Params("eval needs --sequence, --ground-truth or both".into()));
    }
    let file = TrajectoryFile::read(trajectory)?;
    let traj = file.to_trajectory();
    let topo = &traj.topology;
    let params = &config.eval;
    let mut frames: Vec<FrameReport> = traj
        .keypoints
        .iter()
        .map(|k| FrameReport {
            frame: k.frame_index,
            edge_rmse_mm: edge_rmse(&k.positions, topo),
            chamfer_mm: None,
            fscore_pct: None,
            truth_error_mm: None,
        })
        .collect();

    if let Some(dir) = sequence {
        let seq = load_sequence(dir)?;
        if seq.len() != traj.len() {
            return Err(CliError::Params(format!("trajectory has {} frames, sequence has {}", traj.len(), seq.len())));
        }
        // Re-segment with the parameters the trajectory was tracked with.
        let seg_params = &file.config.segmentation;
        let scored: Vec<Option<(f64, f64)>> = (0..seq.len())
            .into_par_iter()
            .map(|t| {
                let seg = seq.segment(t, seg_params).ok()?;
                let index = NnIndex::build(&seg.cloud.points).ok()?;
                let m = frame_metrics(&traj.keypoints[t].positions, topo, &index, params.fscore_tau_mm);
                Some((m.chamfer_mm, m.fscore_pct))
            })
            .collect();
        for (row, s) in frames.iter_mut().zip(scored) {
            if let Some((c, f)) = s {
                row.chamfer_mm = Some(c);
                row.fscore_pct = Some(f);
            }
        }
    }

    let truth = match ground_truth {
        Some(path) => {
            let gt = read_ground_truth(path)?;
            let report = evaluate_against_truth(&traj.keypoints, &gt)?;
            for (row, e) in frames.iter_mut().zip(&report.frame_error_mm) {
                row.truth_error_mm = Some(*e);
            }
            Some(report)
        }
        None => None,
    };

    let mean_edge_rmse_mm = frames.iter().map(|f| f.edge_rmse_mm).sum::<f64>() / frames.len() as f64;
    let mut report = MetricsReport { version: FORMAT_VERSION, params: params.clone(), summary: None, mean_edge_rmse_mm, truth, frames };
    let scored = report.frame_metrics();
    if !scored.is_empty() {
        report.summary = Some(aggregate(&scored, params.edge_threshold_mm, params.chamfer_threshold_mm)?);
    }
    write_json(&out.join("metrics.json"), &report)?;
    write_bytes(&out.join("metrics.csv"), report.to_csv().as_bytes())?;
    Ok(report)
}

/// Renders a synthetic sequence with the default camera.
pub fn synth(config: &SynthConfig, encoding: DepthEncoding, out: &Path) -> CliResult<()> {
    let seq = gen_sequence(config, &default_camera())?;
    write_sequence(out, &seq, encoding)
}
