//! Synthetic depth sequences with exact ground truth.
//!
//! Objects are kinematic: a rope is a tube around a centerline whose heading
//! and elevation angles are cubic splines over arc length (so the length is
//! exactly preserved under any motion), a branched rope is three such
//! centerlines leaving a common junction, and a cloth is a square sheet with
//! an isometric cylindrical fold. Surfaces are sampled densely and z-buffered
//! in front of a background plane. The reference frame shows the background
//! with the object resting on it in its first-frame layout, the way the
//! object lies on the table before being picked up. Two small boxes near the
//! grasp points stand in for robot arms and are returned as exclusion clouds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::camera::{CameraModel, DepthFrame, Pixel, Projector};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fmath::{ceil, cos, round, sin};
use crate::init::{allocate_edges, compute_rest_lengths};
use crate::point::{Mat3, Point3, Rigid};
use crate::topology::{grid_edges, AnchorRole, AnchorSlot, KeypointSet, ObjectClass, Topology};

/// World height of the background plane (m); objects move around z = 0.
pub const BACKGROUND_Z: f64 = -0.5;
const SAMPLE_SPACING: f64 = 0.001;
const CENTERLINE_STEP: f64 = 0.0005;
const ARM_SIDE: f64 = 0.03;
const ARM_STANDOFF: f64 = 0.06;
/// Branch lengths of the branched rope relative to its size.
pub const BRANCH_SCALE: [f64; 3] = [1.2, 1.0, 0.8];
/// Branch headings of the branched rope before yaw (radians).
pub const BRANCH_HEADINGS: [f64; 3] = [200.0 * PI / 180.0, 340.0 * PI / 180.0, PI / 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ObjectKind {
    Rope,
    Bdlo,
    Cloth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Motion {
    Static,
    Translate,
    Swing,
    Fold,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthConfig {
    pub kind: ObjectKind,
    /// Rope length, branched-rope scale (branches are 1.2, 1.0 and 0.8 times
    /// this), or cloth side length, in meters.
    pub size: f64,
    pub motion: Motion,
    pub speed: f64,
    pub frames: usize,
    pub frame_rate: f64,
    /// Standard deviation of additive depth noise (m).
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// Ground-truth keypoint count for ropes.
    pub num_keypoints: usize,
    pub grid_shape: (usize, usize),
    pub tube_radius: f64,
    /// In-plane rotation of the object (rad).
    pub yaw: f64,
    /// Object center in the plane (m).
    pub offset: [f64; 2],
    /// Amplitude of the centerline wiggle (rad).
    pub bend: f64,
    /// Uniform curling (rad of heading change from middle to end).
    pub curl: f64,
    /// Amplitude of the out-of-plane arch (rad).
    pub lift: f64,
    pub arms: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::rope()
    }
}

impl SynthConfig {
    pub fn rope() -> Self {
        Self {
            kind: ObjectKind::Rope,
            size: 0.5,
            motion: Motion::Swing,
            speed: 1.0,
            frames: 100,
            frame_rate: 30.0,
            noise_sigma: 0.0015,
            rng_seed: 0,
            num_keypoints: 15,
            grid_shape: (8, 8),
            tube_radius: 0.004,
            yaw: 0.1,
            offset: [0.0, 0.0],
            bend: 0.5,
            curl: 0.0,
            lift: 0.3,
            arms: true,
        }
    }

    pub fn bdlo() -> Self {
        Self { kind: ObjectKind::Bdlo, size: 0.2, num_keypoints: 16, bend: 0.3, lift: 0.2, ..Self::rope() }
    }

    pub fn cloth() -> Self {
        Self { kind: ObjectKind::Cloth, size: 0.3, yaw: PI / 6.0, bend: 0.0, lift: 0.0, ..Self::rope() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.size, self.speed, self.frame_rate, self.tube_radius];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("sizes, speed and frame rate must be positive: {self:?}")));
        }
        if self.frames < 2 {
            return Err(Error::Config("a sequence needs at least two frames".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise sigma must be non-negative".into()));
        }
        match self.kind {
            ObjectKind::Rope if self.num_keypoints < 2 => Err(Error::Config("a rope needs at least 2 keypoints".into())),
            ObjectKind::Bdlo if self.num_keypoints < 7 => {
                Err(Error::Config("a branched rope needs at least 7 keypoints".into()))
            }
            ObjectKind::Cloth if self.grid_shape.0 < 2 || self.grid_shape.1 < 2 => {
                Err(Error::Config("cloth grid must be at least 2x2".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn object_class(&self) -> ObjectClass {
        match self.kind {
            ObjectKind::Cloth => ObjectClass::TwoDim,
            _ => ObjectClass::OneDim,
        }
    }
}

/// 320x240 camera 0.8 m above the origin, looking down with a slight tilt.
pub fn default_camera() -> CameraModel {
    let tilt = 0.14;
    let rotation = Mat3::rotation_x(PI + tilt);
    let axis = rotation.apply(Point3::new(0.0, 0.0, 1.0));
    let center = axis * -0.8;
    CameraModel::new(320.0, 320.0, 159.5, 119.5, 320, 240, Rigid::new(rotation, center)).expect("valid default camera")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub keypoints: Vec<KeypointSet>,
    /// True topology; rest lengths measured on the first frame.
    pub topology: Topology,
    /// Object points per frame: noise-free lifted object pixels.
    pub object_points: Vec<Vec<Point3>>,
    /// Distractor points per frame, as seen by the camera.
    pub arm_points: Vec<Vec<Point3>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub config: SynthConfig,
    pub camera: CameraModel,
    pub reference: DepthFrame,
    pub frames: Vec<DepthFrame>,
    pub exclusions: Vec<PointCloud>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    yaw: f64,
    offset: Point3,
    bend: f64,
    curl: f64,
    lift: f64,
    fold: f64,
}

fn pose_at(cfg: &SynthConfig, t: usize) -> Pose {
    let mut pose = Pose {
        yaw: cfg.yaw,
        offset: Point3::new(cfg.offset[0], cfg.offset[1], 0.0),
        bend: cfg.bend,
        curl: cfg.curl,
        lift: cfg.lift,
        fold: 0.0,
    };
    let tau = t as f64 / cfg.frame_rate;
    let w = 2.0 * PI / 3.0 * cfg.speed;
    match cfg.motion {
        Motion::Static => {}
        Motion::Translate => {
            let step = 0.002 * cfg.speed;
            let k = t as f64 - (cfg.frames - 1) as f64 / 2.0;
            pose.offset += Point3::new(0.8 * step * k, 0.6 * step * k, 0.0);
        }
        Motion::Swing => {
            let s = sin(w * tau);
            pose.offset += Point3::new(0.04 * s, 0.02 * sin(2.0 * w * tau), 0.02 * (1.0 - cos(w * tau)));
            match cfg.kind {
                ObjectKind::Cloth => {
                    pose.yaw += 0.15 * s;
                    pose.fold = 0.3 * (1.0 - cos(w * tau)) / 2.0;
                }
                _ => {
                    pose.yaw += 0.25 * s;
                    pose.bend *= 1.0 + 0.5 * sin(w * tau + 1.0);
                    pose.lift += 0.15 * sin(w * tau + 2.0);
                }
            }
        }
        Motion::Fold => {
            let p = (cfg.speed * t as f64 / (cfg.frames - 1) as f64).min(1.0);
            let p = (1.0 - cos(PI * p)) / 2.0;
            match cfg.kind {
                ObjectKind::Rope => {
                    pose.curl += 1.2 * p;
                    pose.lift += 0.2 * p;
                }
                ObjectKind::Bdlo => pose.curl += 0.8 * p,
                ObjectKind::Cloth => pose.fold = PI / 3.0 * p,
            }
        }
    }
    pose
}

/// Natural cubic spline through equally spaced knots over `[0, length]`.
struct Spline {
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(length: f64, y: &[f64]) -> Self {
        let n = y.len() - 1;
        let h = length / n as f64;
        let mut m = vec![0.0; n + 1];
        if n >= 2 {
            // Thomas algorithm on M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]) / h^2.
            let k = n - 1;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
                let denom = 4.0 - if i > 0 { c[i - 1] } else { 0.0 };
                c[i] = 1.0 / denom;
                d[i] = (rhs - if i > 0 { d[i - 1] } else { 0.0 }) / denom;
            }
            for i in (0..k).rev() {
                m[i + 1] = d[i] - if i + 1 < k { c[i] * m[i + 2] } else { 0.0 };
            }
        }
        Self { h, y: y.to_vec(), m }
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.y.len() - 1;
        let i = ((s / self.h) as usize).min(n - 1);
        let (a, b) = (i as f64 * self.h, (i + 1) as f64 * self.h);
        let (ta, tb) = (b - s, s - a);
        let h = self.h;
        self.m[i] * ta * ta * ta / (6.0 * h)
            + self.m[i + 1] * tb * tb * tb / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * ta
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * tb
    }
}

/// Centerline starting at `start`, sampled every `length / steps` of arc length.
fn integrate_centerline(start: Point3, length: f64, heading: &[f64], elevation: &[f64]) -> Vec<Point3> {
    let steps = ceil(length / CENTERLINE_STEP).max(2.0) as usize;
    let steps = steps + steps % 2;
    let h = length / steps as f64;
    let (phi, psi) = (Spline::new(length, heading), Spline::new(length, elevation));
    let mut pts = Vec::with_capacity(steps + 1);
    let mut p = start;
    pts.push(p);
    for k in 0..steps {
        let s = (k as f64 + 0.5) * h;
        let (a, e) = (phi.eval(s), psi.eval(s));
        p += Point3::new(cos(e) * cos(a), cos(e) * sin(a), sin(e)) * h;
        pts.push(p);
    }
    pts
}

/// Point at arc length `s` along a uniformly sampled polyline of total `length`.
fn at_arc_length(line: &[Point3], length: f64, s: f64) -> Point3 {
    let segs = line.len() - 1;
    let x = (s / length * segs as f64).clamp(0.0, segs as f64);
    let i = (x as usize).min(segs - 1);
    line[i].lerp(line[i + 1], x - i as f64)
}

const WIGGLE: [f64; 5] = [0.6, -0.4, 0.0, 0.5, -0.3];
const CURL: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
const ARCH: [f64; 5] = [1.0, 0.5, 0.0, -0.5, -1.0];
const BRANCH_WIGGLE: [[f64; 5]; 3] =
    [[0.0, 0.4, -0.3, 0.2, 0.5], [0.0, -0.3, 0.4, -0.2, -0.4], [0.0, 0.3, 0.3, -0.4, 0.2]];
const BRANCH_CURL: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const BRANCH_DROOP: [f64; 5] = [0.0, -0.2, -0.4, -0.4, -0.3];

/// Dense centerlines of a curve-like object at one pose. Ropes give one
/// line from one end to the other; branched ropes give one line per branch,
/// each starting at the junction.
fn centerlines(cfg: &SynthConfig, pose: &Pose) -> Vec<(f64, Vec<Point3>)> {
    match cfg.kind {
        ObjectKind::Rope => {
            let l = cfg.size;
            let heading: Vec<f64> =
                (0..5).map(|k| pose.yaw + pose.bend * WIGGLE[k] + pose.curl * CURL[k]).collect();
            let elevation: Vec<f64> = (0..5).map(|k| pose.lift * ARCH[k]).collect();
            let line = integrate_centerline(Point3::ORIGIN, l, &heading, &elevation);
            let shift = pose.offset - line[line.len() / 2];
            vec![(l, line.into_iter().map(|p| p + shift).collect())]
        }
        ObjectKind::Bdlo => (0..3)
            .map(|b| {
                let l = cfg.size * BRANCH_SCALE[b];
                let sign = if b == 1 { -1.0 } else { 1.0 };
                let heading: Vec<f64> = (0..5)
                    .map(|k| {
                        pose.yaw + BRANCH_HEADINGS[b] + pose.bend * BRANCH_WIGGLE[b][k] + sign * pose.curl * BRANCH_CURL[k]
                    })
                    .collect();
                let elevation: Vec<f64> = (0..5).map(|k| pose.lift * BRANCH_DROOP[k]).collect();
                (l, integrate_centerline(pose.offset, l, &heading, &elevation))
            })
            .collect(),
        ObjectKind::Cloth => Vec::new(),
    }
}

/// Cloth surface point at material coordinates `(u, v)` in `[0, 1]^2`.
fn cloth_point(cfg: &SynthConfig, pose: &Pose, u: f64, v: f64) -> Point3 {
    let a = cfg.size;
    let (x, y) = ((u - 0.5) * a, (v - 0.5) * a);
    let width = 0.04;
    let theta = pose.fold;
    let (fx, fz) = if x <= 0.0 || theta <= 1e-9 {
        (x, 0.0)
    } else {
        let rho = width / theta;
        if x <= width {
            (rho * sin(x / rho), rho * (1.0 - cos(x / rho)))
        } else {
            (rho * sin(theta) + (x - width) * cos(theta), rho * (1.0 - cos(theta)) + (x - width) * sin(theta))
        }
    };
    Mat3::rotation_z(pose.yaw).apply(Point3::new(fx, y, fz)) + pose.offset
}

/// Per-frame geometry needed for rendering and ground truth.
struct FrameGeometry {
    surface: Vec<Point3>,
    /// Grasp points with their outward directions.
    grasps: Vec<(Point3, Point3)>,
    lines: Vec<(f64, Vec<Point3>)>,
}

fn tube_surface(line: &[Point3], radius: f64, out: &mut Vec<Point3>, caps: [bool; 2]) {
    let stride = (round(SAMPLE_SPACING / CENTERLINE_STEP) as usize).max(1);
    let ring = (ceil(2.0 * PI * radius / (0.8 * SAMPLE_SPACING)) as usize).max(8);
    let frame = |i: usize| {
        let (a, b) = (line[i.saturating_sub(1)], line[(i + 1).min(line.len() - 1)]);
        let t = (b - a).normalized().unwrap_or(Point3::new(1.0, 0.0, 0.0));
        let up = if t.z.abs() < 0.9 { Point3::new(0.0, 0.0, 1.0) } else { Point3::new(0.0, 1.0, 0.0) };
        let n1 = t.cross(up).normalized().expect("non-parallel up vector");
        (t, n1, t.cross(n1))
    };
    let mut i = 0;
    loop {
        let (_, n1, n2) = frame(i);
        for k in 0..ring {
            let a = 2.0 * PI * k as f64 / ring as f64;
            out.push(line[i] + (n1 * cos(a) + n2 * sin(a)) * radius);
        }
        if i == line.len() - 1 {
            break;
        }
        i = (i + stride).min(line.len() - 1);
    }
    for (end, &cap) in [0, line.len() - 1].iter().zip(&caps) {
        if !cap {
            continue;
        }
        let (t, n1, n2) = frame(*end);
        let outward = if *end == 0 { -t } else { t };
        let rings = (ceil(PI / 2.0 * radius / SAMPLE_SPACING) as usize).max(2);
        for j in 1..=rings {
            let polar = PI / 2.0 * j as f64 / rings as f64;
            let r = radius * cos(polar);
            let count = (ceil(2.0 * PI * r / (0.8 * SAMPLE_SPACING)) as usize).max(1);
            for k in 0..count {
                let a = 2.0 * PI * k as f64 / count as f64;
                out.push(line[*end] + (n1 * cos(a) + n2 * sin(a)) * r + outward * (radius * sin(polar)));
            }
        }
    }
}

fn sphere_surface(center: Point3, radius: f64, out: &mut Vec<Point3>) {
    let rings = (ceil(PI * radius / SAMPLE_SPACING) as usize).max(4);
    for j in 0..=rings {
        let polar = PI * j as f64 / rings as f64;
        let r = radius * sin(polar);
        let count = (ceil(2.0 * PI * r / (0.8 * SAMPLE_SPACING)) as usize).max(1);
        for k in 0..count {
            let a = 2.0 * PI * k as f64 / count as f64;
            out.push(center + Point3::new(r * cos(a), r * sin(a), radius * cos(polar)));
        }
    }
}

fn geometry(cfg: &SynthConfig, t: usize) -> FrameGeometry {
    let pose = pose_at(cfg, t);
    let mut surface = Vec::new();
    let mut grasps = Vec::new();
    let lines = centerlines(cfg, &pose);
    match cfg.kind {
        ObjectKind::Rope => {
            let line = &lines[0].1;
            tube_surface(line, cfg.tube_radius, &mut surface, [true, true]);
            let n = line.len();
            grasps.push((line[0], (line[0] - line[1]).normalized().unwrap_or_default()));
            grasps.push((line[n - 1], (line[n - 1] - line[n - 2]).normalized().unwrap_or_default()));
        }
        ObjectKind::Bdlo => {
            for (b, (_, line)) in lines.iter().enumerate() {
                tube_surface(line, cfg.tube_radius, &mut surface, [false, true]);
                if b < 2 {
                    let n = line.len();
                    grasps.push((line[n - 1], (line[n - 1] - line[n - 2]).normalized().unwrap_or_default()));
                }
            }
            sphere_surface(pose.offset, cfg.tube_radius, &mut surface);
        }
        ObjectKind::Cloth => {
            let steps = ceil(cfg.size / SAMPLE_SPACING) as usize;
            for i in 0..=steps {
                for j in 0..=steps {
                    surface.push(cloth_point(cfg, &pose, i as f64 / steps as f64, j as f64 / steps as f64));
                }
            }
            let center = cloth_point(cfg, &pose, 0.5, 0.5);
            for v in [0.0, 1.0] {
                let corner = cloth_point(cfg, &pose, 1.0, v);
                grasps.push((corner, (corner - center).normalized().unwrap_or_default()));
            }
        }
    }
    FrameGeometry { surface, grasps, lines }
}

fn box_surface(center: Point3, side: f64, spacing: f64) -> Vec<Point3> {
    let k = ceil(side / spacing) as usize;
    let h = side / 2.0;
    let mut pts = Vec::new();
    for i in 0..=k {
        for j in 0..=k {
            let (a, b) = (-h + side * i as f64 / k as f64, -h + side * j as f64 / k as f64);
            for s in [-h, h] {
                pts.push(center + Point3::new(s, a, b));
                pts.push(center + Point3::new(a, s, b));
                pts.push(center + Point3::new(a, b, s));
            }
        }
    }
    pts
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Label {
    None,
    Background,
    Object,
    Arm,
}

struct Raster {
    depth: Vec<f64>,
    label: Vec<Label>,
}

fn background(cam: &CameraModel) -> Raster {
    let mut depth = vec![0.0; cam.pixel_count()];
    let mut label = vec![Label::None; cam.pixel_count()];
    let world = cam.world_from_camera;
    for row in 0..cam.height {
        for col in 0..cam.width {
            let ray = world.rotation.apply(Point3::new((col as f64 - cam.cx) / cam.fx, (row as f64 - cam.cy) / cam.fy, 1.0));
            if ray.z < 0.0 {
                let z = (BACKGROUND_Z - world.translation.z) / ray.z;
                if z > 0.0 {
                    depth[row * cam.width + col] = z;
                    label[row * cam.width + col] = Label::Background;
                }
            }
        }
    }
    Raster { depth, label }
}

/// Splats points into the raster; returns false if any point is out of view.
fn splat(raster: &mut Raster, proj: &Projector, width: usize, points: &[Point3], label: Label) -> bool {
    let mut all_visible = true;
    for p in points {
        match proj.pixel(*p) {
            Some((px, z)) => {
                let k = px.row as usize * width + px.col as usize;
                if raster.label[k] == Label::None || z < raster.depth[k] {
                    raster.depth[k] = z;
                    raster.label[k] = label;
                }
            }
            None => all_visible = false,
        }
    }
    all_visible
}

fn to_frame(raster: &Raster, cam: &CameraModel, timestamp: f64, noise: Option<(&mut ChaCha8Rng, Normal<f64>)>) -> DepthFrame {
    let mut depth: Vec<f32> = raster.depth.iter().map(|d| *d as f32).collect();
    if let Some((rng, normal)) = noise {
        for (d, l) in depth.iter_mut().zip(&raster.label) {
            if *l != Label::None {
                *d = (*d as f64 + rng.sample(normal)) as f32;
            }
        }
    }
    DepthFrame::new(cam.width, cam.height, depth, timestamp).expect("raster matches camera")
}

/// Keypoints at uniform arc length (curves) or grid coordinates (cloth)
/// for one frame, in canonical index order.
struct KeypointLayout {
    /// Curves: per branch, arc-length positions measured from the branch
    /// start, in keypoint order. Rope has one branch.
    curve: Vec<Vec<(usize, f64)>>,
    /// Index of the junction keypoint, branched rope only.
    junction: Option<usize>,
    /// Cloth: material coordinates per keypoint.
    grid: Vec<(f64, f64)>,
    topology: Topology,
}

fn layout(cfg: &SynthConfig, first: &FrameGeometry) -> Result<KeypointLayout> {
    match cfg.kind {
        ObjectKind::Rope => {
            let n = cfg.num_keypoints;
            let (l, line) = &first.lines[0];
            let reversed = line[line.len() - 1].lex_cmp(&line[0]).is_lt();
            let s: Vec<(usize, f64)> = (0..n)
                .map(|j| {
                    let s = j as f64 * l / (n - 1) as f64;
                    (j, if reversed { l - s } else { s })
                })
                .collect();
            Ok(KeypointLayout { curve: vec![s], junction: None, grid: Vec::new(), topology: Topology::chain(n)? })
        }
        ObjectKind::Bdlo => {
            let n = cfg.num_keypoints;
            let lengths: Vec<f64> = first.lines.iter().map(|(l, _)| *l).collect();
            let edges = allocate_edges(&lengths, n - 1, 2)?;
            let mut order: Vec<usize> = (0..3).collect();
            let leaf = |b: usize| *first.lines[b].1.last().expect("non-empty branch");
            order.sort_by(|&a, &b| leaf(a).lex_cmp(&leaf(b)));
            let junction = n - 1;
            let mut curve = vec![Vec::new(); 3];
            let mut sequences = Vec::new();
            let mut slots = Vec::new();
            let mut next = 0;
            for &b in &order {
                let l = lengths[b];
                let e = edges[b];
                let mut seq = Vec::new();
                for j in 0..e {
                    curve[b].push((next, l * (1.0 - j as f64 / e as f64)));
                    seq.push(next);
                    if j == 0 {
                        slots.push(AnchorSlot { index: next, role: AnchorRole::Leaf });
                    }
                    next += 1;
                }
                seq.push(junction);
                sequences.push(seq);
            }
            slots.push(AnchorSlot { index: junction, role: AnchorRole::Junction });
            let topology = crate::init::build_1d_topology(&sequences, n, slots)?;
            Ok(KeypointLayout { curve, junction: Some(junction), grid: Vec::new(), topology })
        }
        ObjectKind::Cloth => {
            let (rows, cols) = cfg.grid_shape;
            let pose = pose_at(cfg, 0);
            let uv = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let world: Vec<Point3> = uv.iter().map(|&(u, v)| cloth_point(cfg, &pose, u, v)).collect();
            let start = (0..4).min_by(|&a, &b| world[a].lex_cmp(&world[b])).expect("four corners");
            let (n1, n2) = ((start + 1) % 4, (start + 3) % 4);
            let (along_row, along_col) = if world[n1].x > world[n2].x { (n1, n2) } else { (n2, n1) };
            let o = uv[start];
            let du = (uv[along_row].0 - o.0, uv[along_row].1 - o.1);
            let dv = (uv[along_col].0 - o.0, uv[along_col].1 - o.1);
            let mut grid = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                let b = r as f64 / (rows - 1) as f64;
                for c in 0..cols {
                    let a = c as f64 / (cols - 1) as f64;
                    grid.push((o.0 + a * du.0 + b * dv.0, o.1 + a * du.1 + b * dv.1));
                }
            }
            let slots = [0, cols - 1, (rows - 1) * cols, rows * cols - 1]
                .into_iter()
                .map(|index| AnchorSlot { index, role: AnchorRole::Contour })
                .collect();
            let topology = Topology::new(ObjectClass::TwoDim, rows * cols, grid_edges(rows, cols), slots, Some((rows, cols)))?;
            Ok(KeypointLayout { curve: Vec::new(), junction: None, grid, topology })
        }
    }
}

fn keypoints_for(cfg: &SynthConfig, t: usize, geo: &FrameGeometry, layout: &KeypointLayout) -> Vec<Point3> {
    let n = layout.topology.num_keypoints;
    let mut x = vec![Point3::ORIGIN; n];
    match cfg.kind {
        ObjectKind::Cloth => {
            let pose = pose_at(cfg, t);
            for (i, &(u, v)) in layout.grid.iter().enumerate() {
                x[i] = cloth_point(cfg, &pose, u, v);
            }
        }
        _ => {
            for (b, entries) in layout.curve.iter().enumerate() {
                let (l, line) = &geo.lines[b];
                for &(i, s) in entries {
                    x[i] = at_arc_length(line, *l, s);
                }
            }
            if let Some(j) = layout.junction {
                x[j] = geo.lines[0].1[0];
            }
        }
    }
    x
}

/// Generates a full sequence. Deterministic in `config` (the noise stream
/// is seeded by `rng_seed`).
pub fn gen_sequence(config: &SynthConfig, cam: &CameraModel) -> Result<SynthSequence> {
    config.validate()?;
    cam.validate()?;
    let proj = Projector::new(cam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let normal = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::Config(format!("{e}")))?;
    let noisy = config.noise_sigma > 0.0;
    let base = background(cam);

    let first = geometry(config, 0);
    let layout = layout(config, &first)?;

    let mut reference = Raster { depth: base.depth.clone(), label: base.label.clone() };
    let lowest = first.surface.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let resting: Vec<Point3> =
        first.surface.iter().map(|p| Point3::new(p.x, p.y, p.z - lowest + BACKGROUND_Z)).collect();
    splat(&mut reference, &proj, cam.width, &resting, Label::Object);
    let reference = to_frame(&reference, cam, 0.0, noisy.then_some((&mut rng, normal)));

    let mut frames = Vec::with_capacity(config.frames);
    let mut exclusions = Vec::with_capacity(config.frames);
    let mut truth_kp = Vec::with_capacity(config.frames);
    let mut object_points = Vec::with_capacity(config.frames);
    let mut arm_points = Vec::with_capacity(config.frames);
    for t in 0..config.frames {
        let geo = if t == 0 { None } else { Some(geometry(config, t)) };
        let geo = geo.as_ref().unwrap_or(&first);
        let mut raster = Raster { depth: base.depth.clone(), label: base.label.clone() };
        if !splat(&mut raster, &proj, cam.width, &geo.surface, Label::Object) {
            return Err(Error::Generation(format!("object leaves the camera view at frame {t}")));
        }
        let mut exclusion = Vec::new();
        if config.arms {
            for &(grasp, out) in &geo.grasps {
                let center = grasp + out * ARM_STANDOFF;
                let dense = box_surface(center, ARM_SIDE, SAMPLE_SPACING * 1.5);
                let visible: Vec<Point3> = dense.iter().copied().filter(|p| proj.pixel(*p).is_some()).collect();
                splat(&mut raster, &proj, cam.width, &visible, Label::Arm);
                exclusion.extend(box_surface(center, ARM_SIDE, 0.005));
            }
        }
        let lifted = |label: Label| -> Vec<Point3> {
            (0..cam.pixel_count())
                .filter(|&k| raster.label[k] == label)
                .map(|k| cam.lift_pixel(Pixel::new((k / cam.width) as u32, (k % cam.width) as u32), raster.depth[k]))
                .collect()
        };
        object_points.push(lifted(Label::Object));
        arm_points.push(lifted(Label::Arm));
        let timestamp = t as f64 / config.frame_rate;
        frames.push(to_frame(&raster, cam, timestamp, noisy.then_some((&mut rng, normal))));
        exclusions.push(PointCloud::new(exclusion));
        truth_kp.push(KeypointSet::new(keypoints_for(config, t, geo, &layout), t));
    }
    let topology = compute_rest_lengths(&truth_kp[0].positions, &layout.topology);
    Ok(SynthSequence {
        config: config.clone(),
        camera: cam.clone(),
        reference,
        frames,
        exclusions,
        truth: GroundTruth { keypoints: truth_kp, topology, object_points, arm_points },
    })
}

/// Dense centerlines of a curve-like object at frame `t` (empty for cloth).
pub fn centerlines_at(config: &SynthConfig, t: usize) -> Vec<Vec<Point3>> {
    centerlines(config, &pose_at(config, t)).into_iter().map(|(_, l)| l).collect()
}

/// Sampled object surface at frame `t`, before rendering.
pub fn surface_at(config: &SynthConfig, t: usize) -> Vec<Point3> {
    geometry(config, t).surface
}

/// Comparison of a tracked trajectory with ground truth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruthReport {
    /// Mean keypoint-to-truth distance per frame (mm).
    pub frame_error_mm: Vec<f64>,
    /// Per frame: the minimum-total-distance assignment of tracked to true
    /// keypoints is not the identity, i.e. some indices are permuted.
    pub swapped: Vec<bool>,
    /// Number of frames with a swap.
    pub swap_count: usize,
    /// Per frame: keypoints whose nearest true keypoint has another index.
    /// Unlike a swap this also counts drift beyond half the keypoint spacing.
    pub nearest_mismatch: Vec<usize>,
    /// Frames where an anchor keypoint is nearest to a different true anchor.
    pub anchor_swap_count: usize,
    pub mean_error_mm: f64,
}

/// Per-frame error against ground truth and index-swap counts.
pub fn evaluate_against_truth(keypoints: &[KeypointSet], truth: &GroundTruth) -> Result<TruthReport> {
    if keypoints.len() != truth.keypoints.len() {
        return Err(Error::InvalidInput(format!(
            "trajectory has {} frames, ground truth {}",
            keypoints.len(),
            truth.keypoints.len()
        )));
    }
    let anchor_ids: Vec<usize> = truth.topology.anchors.iter().map(|a| a.index).collect();
    let mut report = TruthReport {
        frame_error_mm: Vec::with_capacity(keypoints.len()),
        swapped: Vec::with_capacity(keypoints.len()),
        swap_count: 0,
        nearest_mismatch: Vec::with_capacity(keypoints.len()),
        anchor_swap_count: 0,
        mean_error_mm: 0.0,
    };
    for (x, gt) in keypoints.iter().zip(&truth.keypoints) {
        if x.len() != gt.len() {
            return Err(Error::InvalidInput(format!("{} keypoints against {} true keypoints", x.len(), gt.len())));
        }
        let n = x.len().max(1) as f64;
        let err = x.positions.iter().zip(&gt.positions).map(|(a, b)| a.distance(*b)).sum::<f64>() / n * 1000.0;
        let nearest_in = |p: Point3, candidates: &mut dyn Iterator<Item = usize>| {
            candidates
                .min_by(|&a, &b| p.distance_squared(gt.positions[a]).total_cmp(&p.distance_squared(gt.positions[b])).then(a.cmp(&b)))
        };
        let mismatched = (0..x.len()).filter(|&i| nearest_in(x.positions[i], &mut (0..gt.len())) != Some(i)).count();
        let cost: Vec<Vec<f64>> =
            x.positions.iter().map(|p| gt.positions.iter().map(|q| p.distance(*q)).collect()).collect();
        let swapped = crate::assign::min_cost_assignment(&cost).iter().enumerate().any(|(i, m)| *m != Some(i));
        let anchor_swapped =
            anchor_ids.iter().any(|&k| nearest_in(x.positions[k], &mut anchor_ids.iter().copied()) != Some(k));
        report.frame_error_mm.push(err);
        report.swapped.push(swapped);
        report.nearest_mismatch.push(mismatched);
        report.swap_count += swapped as usize;
        report.anchor_swap_count += anchor_swapped as usize;
    }
    report.mean_error_mm = report.frame_error_mm.iter().sum::<f64>() / report.frame_error_mm.len().max(1) as f64;
    Ok(report)
}

/// Distance from `p` to a polyline.
pub fn distance_to_polyline(p: Point3, line: &[Point3]) -> f64 {
    line.windows(2).map(|w| crate::anchors::point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(mut cfg: SynthConfig, frames: usize) -> SynthConfig {
        cfg.frames = frames;
        cfg
    }

    #[test]
    fn static_rope_truth_is_constant() {
        let cfg = SynthConfig { motion: Motion::Static, ..short(SynthConfig::rope(), 3) };
        let seq = gen_sequence(&cfg, &default_camera()).unwrap();
        assert_eq!(seq.truth.keypoints[0].positions, seq.truth.keypoints[2].positions);
        assert_eq!(seq.truth.topology.edges.len(), 14);
    }

    #[test]
    fn translate_moves_by_the_step() {
        let cfg = SynthConfig { motion: Motion::Translate, speed: 2.5, ..short(SynthConfig::rope(), 4) };
        let seq = gen_sequence(&cfg, &default_camera()).unwrap();
        let step = Point3::new(0.8 * 0.005, 0.6 * 0.005, 0.0);
        for t in 1..4 {
            for (a, b) in seq.truth.keypoints[t - 1].positions.iter().zip(&seq.truth.keypoints[t].positions) {
                assert!((*b - *a - step).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn spline_interpolates_knots() {
        let s = Spline::new(4.0, &[0.0, 1.0, -1.0, 2.0, 0.5]);
        for (k, y) in [0.0, 1.0, -1.0, 2.0, 0.5].iter().enumerate() {
            assert!((s.eval(k as f64) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn centerline_length_is_preserved() {
        let cfg = SynthConfig::rope();
        for t in [0, 20, 45] {
            let line = &centerlines_at(&cfg, t)[0];
            let len: f64 = line.windows(2).map(|w| w[0].distance(w[1])).sum();
            assert!((len - cfg.size).abs() < 1e-9, "{len}");
        }
    }

    #[test]
    fn off_screen_object_is_rejected() {
        let cfg = SynthConfig { offset: [2.0, 0.0], ..short(SynthConfig::rope(), 2) };
        assert!(matches!(gen_sequence(&cfg, &default_camera()), Err(Error::Generation(_))));
    }

    #[test]
    fn truth_against_itself() {
        let cfg = SynthConfig { noise_sigma: 0.0, ..short(SynthConfig::cloth(), 3) };
        let seq = gen_sequence(&cfg, &default_camera()).unwrap();
        let r = evaluate_against_truth(&seq.truth.keypoints, &seq.truth).unwrap();
        assert_eq!(r.swap_count, 0);
        assert_eq!(r.mean_error_mm, 0.0);
        let mut swapped = seq.truth.keypoints.clone();
        for f in &mut swapped {
            f.positions.swap(0, 1);
        }
        assert_eq!(evaluate_against_truth(&swapped, &seq.truth).unwrap().swap_count, 3);
    }
}
