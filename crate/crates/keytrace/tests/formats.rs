use std::fs;
use std::path::Path;

use keytrace::config::Config;
use keytrace::error::{CliError, EXIT_INPUT};
use keytrace::files::{InitFile, TrajectoryFile};
use keytrace::formats::*;
use keytrace::sequence::{load_sequence, read_ground_truth, write_sequence, MANIFEST};
use keytrace_core::pipeline::{run, SequenceInput};
use keytrace_core::synth::{default_camera, gen_sequence, SynthConfig, SynthSequence};
use keytrace_core::{DepthFrame, Point3, PointCloud};
use proptest::prelude::*;

fn short_rope() -> SynthSequence {
    let cfg = SynthConfig { frames: 6, ..SynthConfig::rope() };
    gen_sequence(&cfg, &default_camera()).unwrap()
}

#[test]
fn f32_depth_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let frame = DepthFrame::new(3, 2, vec![0.5, 0.0, f32::NAN, 1.25, 0.001, 7.0], 0.125).unwrap();
    let path = dir.path().join("d.f32");
    write_depth(&path, &frame, DepthEncoding::F32Meters).unwrap();
    let back = read_depth(&path).unwrap();
    assert_eq!((back.width, back.height, back.timestamp), (3, 2, 0.125));
    for (a, b) in frame.depth.iter().zip(&back.depth) {
        assert!(a.to_bits() == b.to_bits());
    }
}

#[test]
fn u16_depth_rounds_to_millimeters_and_zeroes_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let frame = DepthFrame::new(4, 1, vec![0.8004, f32::NAN, -1.0, 1.2344], 0.0).unwrap();
    let path = dir.path().join("d.u16");
    write_depth(&path, &frame, DepthEncoding::U16Millimeters).unwrap();
    assert_eq!(fs::read(&path).unwrap().len(), 8);
    let back = read_depth(&path).unwrap();
    assert_eq!(back.depth, vec![0.8, 0.0, 0.0, 1.234]);
}

#[test]
fn depth_size_mismatch_names_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.f32");
    write_depth(&path, &DepthFrame::new(2, 2, vec![1.0; 4], 0.0).unwrap(), DepthEncoding::F32Meters).unwrap();
    fs::write(&path, [0u8; 12]).unwrap();
    match read_depth(&path) {
        Err(CliError::Format { field, .. }) => assert_eq!(field, "data"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn cloud_layout_is_count_then_le_floats() {
    let cloud = PointCloud::new(vec![Point3::new(1.0, -2.0, 0.5)]);
    let bytes = encode_cloud(&cloud);
    let mut want = 1u32.to_le_bytes().to_vec();
    for v in [1.0f32, -2.0, 0.5] {
        want.extend_from_slice(&v.to_le_bytes());
    }
    assert_eq!(bytes, want);
    let truncated = decode_cloud(Path::new("x"), &bytes[..10]);
    assert!(matches!(truncated, Err(CliError::Format { .. })));
}

proptest! {
    #[test]
    fn cloud_round_trip_equals_f32_quantization(pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.0f64..5.0), 0..60)) {
        let cloud = PointCloud::new(pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect());
        let back = decode_cloud(Path::new("p"), &encode_cloud(&cloud)).unwrap();
        prop_assert_eq!(back.points, quantize_cloud(&cloud).points);
    }

    #[test]
    fn json_floats_round_trip_bit_exactly(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
        let pts: Vec<Point3> = v.chunks(3).map(|c| Point3::new(c[0], c.get(1).copied().unwrap_or(0.0), c.get(2).copied().unwrap_or(0.0))).collect();
        let back: Vec<Point3> = parse_json(Path::new("j"), &to_json(&pts)).unwrap();
        prop_assert_eq!(back, pts);
    }
}

#[test]
fn sequence_directory_round_trips() {
    let seq = short_rope();
    let dir = tempfile::tempdir().unwrap();
    write_sequence(dir.path(), &seq, DepthEncoding::F32Meters).unwrap();
    let loaded = load_sequence(dir.path()).unwrap();
    assert_eq!(loaded.camera, seq.camera);
    assert_eq!(loaded.frames.len(), seq.frames.len());
    for (a, b) in loaded.frames.iter().zip(&seq.frames) {
        assert_eq!(a.timestamp, b.timestamp);
        assert!(a.depth.iter().zip(&b.depth).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    for (a, b) in loaded.exclusions.iter().zip(&seq.exclusions) {
        assert_eq!(a.points, quantize_cloud(b).points);
    }
    let gt = read_ground_truth(&dir.path().join("ground_truth.json")).unwrap();
    assert_eq!(gt.keypoints, seq.truth.keypoints);
    assert_eq!(gt.topology, seq.truth.topology);
    assert_eq!(gt.object_points.len(), seq.frames.len());
}

fn corrupt_manifest(edit: impl FnOnce(&mut serde_json::Value)) -> CliError {
    let seq = short_rope();
    let dir = tempfile::tempdir().unwrap();
    write_sequence(dir.path(), &seq, DepthEncoding::U16Millimeters).unwrap();
    let path = dir.path().join(MANIFEST);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    edit(&mut v);
    fs::write(&path, v.to_string()).unwrap();
    load_sequence(dir.path()).unwrap_err()
}

fn field_of(e: &CliError) -> &str {
    assert_eq!(e.exit_code(), EXIT_INPUT);
    match e {
        CliError::Format { field, .. } => field,
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn manifest_errors_name_the_field() {
    let e = corrupt_manifest(|v| v["frame_count"] = 99.into());
    assert_eq!(field_of(&e), "frame_count");
    let e = corrupt_manifest(|v| v["units"] = "millimeters".into());
    assert_eq!(field_of(&e), "units");
    let e = corrupt_manifest(|v| v["version"] = 7.into());
    assert_eq!(field_of(&e), "version");
    let e = corrupt_manifest(|v| v["frames"][2]["depth"] = "missing.u16".into());
    assert_eq!(field_of(&e), "frames[2].depth");
    let e = corrupt_manifest(|v| v["camera"]["fx"] = "wide".into());
    assert_eq!(field_of(&e), "camera.fx");
    let e = corrupt_manifest(|v| v["camera"]["fx"] = (-1.0).into());
    assert_eq!(field_of(&e), "camera");
    let e = corrupt_manifest(|v| {
        v.as_object_mut().unwrap().remove("frame_rate");
    });
    assert_eq!(field_of(&e), "<document>");
}

#[test]
fn trajectory_and_init_files_round_trip() {
    let seq = short_rope();
    let input = SequenceInput { camera: &seq.camera, reference: &seq.reference, frames: &seq.frames, exclusions: &seq.exclusions };
    let config = Config::default();
    let out = run(&input, &config.pipeline()).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let tf = TrajectoryFile::new(&out.trajectory, &config);
    let path = dir.path().join("t.json");
    write_json(&path, &tf).unwrap();
    let back = TrajectoryFile::read(&path).unwrap();
    assert_eq!(back, tf);
    assert_eq!(back.to_trajectory(), out.trajectory);
    assert_eq!(back.provenance.config_sha256, config.digest());
    assert_eq!(back.provenance.config_sha256.len(), 64);

    let init = InitFile::new(&out.init, &config);
    let ipath = dir.path().join("i.json");
    write_json(&ipath, &init).unwrap();
    assert_eq!(InitFile::read(&ipath).unwrap(), init);
}

#[test]
fn config_file_overlays_defaults_and_rejects_unknown_keys() {
    let p = Path::new("c.json");
    let c: Config = parse_json(p, r#"{"tracking": {"smoothing_window": 3}}"#).unwrap();
    assert_eq!(c.tracking.smoothing_window, 3);
    assert_eq!(c.tracking.solver.iterations, 30);
    assert_eq!(c.init.solver.iterations, 200);
    match parse_json::<Config>(p, r#"{"trackng": {}}"#) {
        Err(CliError::Format { .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    let c = Config::default();
    let d = Config { tracking: keytrace_core::tracking::TrackingParams { smoothing_window: 1, ..Default::default() }, ..Default::default() };
    assert_ne!(c.digest(), d.digest());
}
