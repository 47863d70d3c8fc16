//! On-disk formats.
//!
//! Depth frames are raw little-endian grids with a JSON sidecar next to them
//! (`<file>.json`); point clouds are a `u32` count followed by three `f32`
//! per point, little-endian; everything else is JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use keytrace_core::{DepthFrame, Point3, PointCloud};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Version written into every JSON document; readers reject other versions.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthEncoding {
    /// `f32` meters; values ≤ 0 or non-finite are invalid.
    F32Meters,
    /// `u16` millimeters; 0 is invalid.
    U16Millimeters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSidecar {
    pub width: usize,
    pub height: usize,
    pub encoding: DepthEncoding,
    pub timestamp: f64,
}

pub fn sidecar_path(depth: &Path) -> PathBuf {
    let mut s = depth.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_depth(path: &Path, frame: &DepthFrame, encoding: DepthEncoding) -> CliResult<()> {
    let mut bytes = Vec::with_capacity(frame.depth.len() * 4);
    match encoding {
        DepthEncoding::F32Meters => {
            for d in &frame.depth {
                bytes.extend_from_slice(&d.to_le_bytes());
            }
        }
        DepthEncoding::U16Millimeters => {
            for &d in &frame.depth {
                let mm = if keytrace_core::camera::is_valid_depth(d) { (d as f64 * 1000.0).round().clamp(0.0, 65535.0) as u16 } else { 0 };
                bytes.extend_from_slice(&mm.to_le_bytes());
            }
        }
    }
    write_bytes(path, &bytes)?;
    let sidecar = DepthSidecar { width: frame.width, height: frame.height, encoding, timestamp: frame.timestamp };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn read_depth(path: &Path) -> CliResult<DepthFrame> {
    let side_path = sidecar_path(path);
    let side: DepthSidecar = read_json(&side_path)?;
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let n = side.width * side.height;
    let depth: Vec<f32> = match side.encoding {
        DepthEncoding::F32Meters => {
            expect_len(path, bytes.len(), n * 4)?;
            bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
        }
        DepthEncoding::U16Millimeters => {
            expect_len(path, bytes.len(), n * 2)?;
            bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as f32 / 1000.0).collect()
        }
    };
    DepthFrame::new(side.width, side.height, depth, side.timestamp)
        .map_err(|e| CliError::format(&side_path, "width", e.to_string()))
}

fn expect_len(path: &Path, got: usize, want: usize) -> CliResult<()> {
    if got != want {
        return Err(CliError::format(path, "data", format!("expected {want} bytes, found {got}")));
    }
    Ok(())
}

pub fn encode_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(4 + cloud.len() * 12);
    bytes.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for p in &cloud.points {
        for v in [p.x, p.y, p.z] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    bytes
}

pub fn decode_cloud(path: &Path, bytes: &[u8]) -> CliResult<PointCloud> {
    if bytes.len() < 4 {
        return Err(CliError::format(path, "count", "file shorter than the count header"));
    }
    let n = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    expect_len(path, bytes.len() - 4, n * 12)?;
    let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
    let points = bytes[4..]
        .chunks_exact(12)
        .map(|c| Point3::new(f(&c[0..4]), f(&c[4..8]), f(&c[8..12])))
        .collect::<Vec<_>>();
    if !points.iter().all(Point3::is_finite) {
        return Err(CliError::format(path, "points", "non-finite coordinate"));
    }
    Ok(PointCloud::new(points))
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> CliResult<()> {
    write_bytes(path, &encode_cloud(cloud))
}

pub fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_cloud(path, &bytes)
}

/// Rounds every coordinate through `f32`, as a cloud file would.
pub fn quantize_cloud(cloud: &PointCloud) -> PointCloud {
    let q = |v: f64| v as f32 as f64;
    let points = cloud.points.iter().map(|p| Point3::new(q(p.x), q(p.y), q(p.z))).collect();
    PointCloud { points, pixel_index: cloud.pixel_index.clone() }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_bytes(path, to_json(value).as_bytes())
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "<document>".to_string() } else { field };
        CliError::format(path, field, e.inner().to_string())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(path, &text)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

pub fn check_version(path: &Path, version: u32) -> CliResult<()> {
    if version != FORMAT_VERSION {
        return Err(CliError::format(path, "version", format!("unsupported version {version}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}
