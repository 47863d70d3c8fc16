//! Sequence directories: a `manifest.json` naming the camera, the static
//! reference depth frame and per-frame depth and exclusion files, all with
//! paths relative to the directory. Synthetic sequences additionally carry
//! `ground_truth.json`.

use std::path::{Path, PathBuf};

use keytrace_core::segmentation::{segment_frame, SegmentationParams, SegmentedFrame};
use keytrace_core::synth::{GroundTruth, SynthConfig, SynthSequence};
use keytrace_core::{CameraModel, DepthFrame, KeypointSet, Point3, PointCloud, Topology};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{check_version, read_cloud, read_depth, read_json, write_cloud, write_depth, write_json, DepthEncoding, FORMAT_VERSION};

pub const MANIFEST: &str = "manifest.json";
pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const UNITS: &str = "meters";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub depth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub version: u32,
    pub units: String,
    pub frame_rate: f64,
    pub frame_count: usize,
    pub camera: CameraModel,
    pub reference: String,
    pub frames: Vec<FrameEntry>,
}

/// A sequence read fully into memory. `exclusions` has one (possibly
/// empty) cloud per frame.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub manifest: SequenceManifest,
    pub camera: CameraModel,
    pub reference: DepthFrame,
    pub frames: Vec<DepthFrame>,
    pub exclusions: Vec<PointCloud>,
}

impl SequenceManifest {
    /// Structural checks that do not touch the referenced files.
    pub fn check(&self, path: &Path) -> CliResult<()> {
        check_version(path, self.version)?;
        if self.units != UNITS {
            return Err(CliError::format(path, "units", format!("expected \"{UNITS}\", found \"{}\"", self.units)));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(CliError::format(path, "frame_rate", "must be positive"));
        }
        if self.frame_count == 0 {
            return Err(CliError::format(path, "frame_count", "must be at least 1"));
        }
        if self.frame_count != self.frames.len() {
            return Err(CliError::format(
                path,
                "frame_count",
                format!("declares {} frames but {} are listed", self.frame_count, self.frames.len()),
            ));
        }
        self.camera.validate().map_err(|e| CliError::format(path, "camera", e.to_string()))
    }
}

fn resolve(dir: &Path, manifest: &Path, field: &str, rel: &str) -> CliResult<PathBuf> {
    let p = dir.join(rel);
    if !p.is_file() {
        return Err(CliError::format(manifest, field, format!("referenced file {} does not exist", p.display())));
    }
    Ok(p)
}

fn check_dims(manifest: &Path, field: &str, frame: &DepthFrame, cam: &CameraModel) -> CliResult<()> {
    if frame.width != cam.width || frame.height != cam.height {
        return Err(CliError::format(
            manifest,
            field,
            format!("depth frame is {}x{}, camera is {}x{}", frame.width, frame.height, cam.width, cam.height),
        ));
    }
    Ok(())
}

pub fn load_sequence(dir: &Path) -> CliResult<Sequence> {
    let mpath = dir.join(MANIFEST);
    let manifest: SequenceManifest = read_json(&mpath)?;
    manifest.check(&mpath)?;
    let cam = manifest.camera.clone();
    let reference = read_depth(&resolve(dir, &mpath, "reference", &manifest.reference)?)?;
    check_dims(&mpath, "reference", &reference, &cam)?;
    let mut paths = Vec::with_capacity(manifest.frames.len());
    for (t, f) in manifest.frames.iter().enumerate() {
        let depth = resolve(dir, &mpath, &format!("frames[{t}].depth"), &f.depth)?;
        let excl = match &f.exclusion {
            Some(rel) => Some(resolve(dir, &mpath, &format!("frames[{t}].exclusion"), rel)?),
            None => None,
        };
        paths.push((depth, excl));
    }
    let loaded: Vec<CliResult<(DepthFrame, PointCloud)>> = paths
        .par_iter()
        .map(|(depth, excl)| {
            let frame = read_depth(depth)?;
            let cloud = match excl {
                Some(p) => read_cloud(p)?,
                None => PointCloud::default(),
            };
            Ok((frame, cloud))
        })
        .collect();
    let mut frames = Vec::with_capacity(loaded.len());
    let mut exclusions = Vec::with_capacity(loaded.len());
    for (t, r) in loaded.into_iter().enumerate() {
        let (frame, cloud) = r?;
        check_dims(&mpath, &format!("frames[{t}].depth"), &frame, &cam)?;
        frames.push(frame);
        exclusions.push(cloud);
    }
    Ok(Sequence { manifest, camera: cam, reference, frames, exclusions })
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn segment(&self, t: usize, params: &SegmentationParams) -> keytrace_core::Result<SegmentedFrame> {
        segment_frame(&self.frames[t], &self.reference, &self.camera, &self.exclusions[t], params, t)
    }

    /// Segments all frames in parallel; results are in frame order.
    pub fn segment_all(&self, params: &SegmentationParams) -> Vec<keytrace_core::Result<SegmentedFrame>> {
        (0..self.len()).into_par_iter().map(|t| self.segment(t, params)).collect()
    }
}

/// `ground_truth.json`: true keypoints per frame plus the labeled object
/// and arm point sets stored as cloud files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub version: u32,
    pub synth: SynthConfig,
    pub topology: Topology,
    pub keypoints: Vec<Vec<Point3>>,
    pub object_clouds: Vec<String>,
    pub arm_clouds: Vec<String>,
}

pub fn read_ground_truth(path: &Path) -> CliResult<GroundTruth> {
    let file: GroundTruthFile = read_json(path)?;
    check_version(path, file.version)?;
    let n = file.keypoints.len();
    if file.object_clouds.len() != n || file.arm_clouds.len() != n {
        return Err(CliError::format(path, "object_clouds", "one object and one arm cloud per frame required"));
    }
    if let Some(t) = file.keypoints.iter().position(|k| k.len() != file.topology.num_keypoints) {
        return Err(CliError::format(path, format!("keypoints[{t}]"), "length differs from topology.num_keypoints"));
    }
    let dir = path.parent().unwrap_or(Path::new(""));
    let load = |field: &str, names: &[String]| -> CliResult<Vec<Vec<Point3>>> {
        names
            .iter()
            .enumerate()
            .map(|(t, rel)| Ok(read_cloud(&resolve(dir, path, &format!("{field}[{t}]"), rel)?)?.points))
            .collect()
    };
    Ok(GroundTruth {
        keypoints: file.keypoints.into_iter().enumerate().map(|(t, k)| KeypointSet::new(k, t)).collect(),
        topology: file.topology,
        object_points: load("object_clouds", &file.object_clouds)?,
        arm_points: load("arm_clouds", &file.arm_clouds)?,
    })
}

/// Writes a synthetic sequence, its manifest and its ground truth.
pub fn write_sequence(dir: &Path, seq: &SynthSequence, encoding: DepthEncoding) -> CliResult<()> {
    let ext = match encoding {
        DepthEncoding::F32Meters => "f32",
        DepthEncoding::U16Millimeters => "u16",
    };
    let reference = format!("reference.{ext}");
    write_depth(&dir.join(&reference), &seq.reference, encoding)?;
    let entries: Vec<CliResult<FrameEntry>> = seq
        .frames
        .par_iter()
        .enumerate()
        .map(|(t, frame)| {
            let depth = format!("depth/{t:06}.{ext}");
            write_depth(&dir.join(&depth), frame, encoding)?;
            let exclusion = match seq.exclusions.get(t) {
                Some(c) if !c.is_empty() => {
                    let rel = format!("exclusion/{t:06}.cloud");
                    write_cloud(&dir.join(&rel), c)?;
                    Some(rel)
                }
                _ => None,
            };
            Ok(FrameEntry { depth, exclusion })
        })
        .collect();
    let frames = entries.into_iter().collect::<CliResult<Vec<_>>>()?;
    let manifest = SequenceManifest {
        version: FORMAT_VERSION,
        units: UNITS.into(),
        frame_rate: seq.config.frame_rate,
        frame_count: frames.len(),
        camera: seq.camera.clone(),
        reference,
        frames,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;

    let truth = &seq.truth;
    let mut object_clouds = Vec::with_capacity(truth.object_points.len());
    let mut arm_clouds = Vec::with_capacity(truth.arm_points.len());
    for (t, (obj, arm)) in truth.object_points.iter().zip(&truth.arm_points).enumerate() {
        let o = format!("truth/object_{t:06}.cloud");
        let a = format!("truth/arm_{t:06}.cloud");
        write_cloud(&dir.join(&o), &PointCloud::new(obj.clone()))?;
        write_cloud(&dir.join(&a), &PointCloud::new(arm.clone()))?;
        object_clouds.push(o);
        arm_clouds.push(a);
    }
    let file = GroundTruthFile {
        version: FORMAT_VERSION,
        synth: seq.config.clone(),
        topology: truth.topology.clone(),
        keypoints: truth.keypoints.iter().map(|k| k.positions.clone()).collect(),
        object_clouds,
        arm_clouds,
    };
    write_json(&dir.join(GROUND_TRUTH), &file)
}
