//! Pinhole camera, depth frames, and depth-to-cloud lifting.
//!
//! Pixel `(row, col)` has image coordinates `(u, v) = (col, row)`; depth is
//! the camera-frame z coordinate, not the ray length.

use alloc::format;
use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fmath;
use crate::mask::BinaryMask;
use crate::point::{Point3, Rigid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pixel {
    pub row: u32,
    pub col: u32,
}

impl Pixel {
    #[inline]
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    /// Euclidean distance in pixels.
    #[inline]
    pub fn distance(self, o: Pixel) -> f64 {
        let dr = self.row as f64 - o.row as f64;
        let dc = self.col as f64 - o.col as f64;
        fmath::sqrt(dr * dr + dc * dc)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_from_camera: Rigid,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        world_from_camera: Rigid,
    ) -> Result<Self> {
        let cam = Self { fx, fy, cx, cy, width, height, world_from_camera };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be non-zero".into()));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::Config(format!("cx={} outside (0, {})", self.cx, self.width)));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::Config(format!("cy={} outside (0, {})", self.cy, self.height)));
        }
        let ortho = self.world_from_camera.rotation.orthonormality_error();
        if !(ortho <= 1e-9) {
            return Err(Error::Config(format!("extrinsic rotation not orthonormal (err {ortho:e})")));
        }
        if !self.world_from_camera.translation.is_finite() {
            return Err(Error::Config("extrinsic translation not finite".into()));
        }
        Ok(())
    }

    pub fn camera_from_world(&self) -> Rigid {
        self.world_from_camera.inverse()
    }

    /// Camera-frame point for pixel `(row, col)` at depth `z`.
    #[inline]
    pub fn back_project(&self, row: f64, col: f64, z: f64) -> Point3 {
        Point3::new((col - self.cx) * z / self.fx, (row - self.cy) * z / self.fy, z)
    }

    /// World-frame point for pixel `(row, col)` at depth `z`.
    #[inline]
    pub fn lift_pixel(&self, px: Pixel, z: f64) -> Point3 {
        self.world_from_camera.apply(self.back_project(px.row as f64, px.col as f64, z))
    }

    /// Camera center in the world frame.
    pub fn center(&self) -> Point3 {
        self.world_from_camera.translation
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    fn check_frame(&self, frame: &DepthFrame) -> Result<()> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::Config(format!(
                "depth frame is {}x{} but camera is {}x{}",
                frame.width, frame.height, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Projects camera-frame points; reuses the inverted extrinsic across calls.
#[derive(Debug, Clone)]
pub struct Projector<'a> {
    cam: &'a CameraModel,
    camera_from_world: Rigid,
}

impl<'a> Projector<'a> {
    pub fn new(cam: &'a CameraModel) -> Self {
        Self { cam, camera_from_world: cam.camera_from_world() }
    }

    /// Subpixel `(u, v)` and camera-frame depth, or `None` when out of view.
    #[inline]
    pub fn project(&self, p: Point3) -> Option<(f64, f64, f64)> {
        let pc = self.camera_from_world.apply(p);
        if !(pc.z > 0.0) {
            return None;
        }
        let u = self.cam.fx * pc.x / pc.z + self.cam.cx;
        let v = self.cam.fy * pc.y / pc.z + self.cam.cy;
        let col = fmath::round(u);
        let row = fmath::round(v);
        if col < 0.0 || row < 0.0 || col >= self.cam.width as f64 || row >= self.cam.height as f64 {
            return None;
        }
        Some((u, v, pc.z))
    }

    #[inline]
    pub fn pixel(&self, p: Point3) -> Option<(Pixel, f64)> {
        self.project(p).map(|(u, v, z)| {
            (Pixel::new(fmath::round(v) as u32, fmath::round(u) as u32), z)
        })
    }
}

/// Subpixel image coordinates `(u, v)` of a world point, or `None` when the
/// point is behind the camera or its nearest pixel lies outside the image.
pub fn project_point(p: Point3, cam: &CameraModel) -> Option<(f64, f64)> {
    Projector::new(cam).project(p).map(|(u, v, _)| (u, v))
}

/// Nearest pixel of a world point, when in view.
pub fn project_to_pixel(p: Point3, cam: &CameraModel) -> Option<Pixel> {
    Projector::new(cam).pixel(p).map(|(px, _)| px)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major camera-frame z in meters; `<= 0` or non-finite is invalid.
    pub depth: Vec<f32>,
    pub timestamp: f64,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, depth: Vec<f32>, timestamp: f64) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::Config(format!(
                "depth buffer has {} values, expected {}x{}",
                depth.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, depth, timestamp })
    }

    /// Frame with every pixel invalid.
    pub fn empty(width: usize, height: usize, timestamp: f64) -> Self {
        Self { width, height, depth: alloc::vec![0.0; width * height], timestamp }
    }

    #[inline]
    pub fn index(&self, px: Pixel) -> usize {
        px.row as usize * self.width + px.col as usize
    }

    #[inline]
    pub fn pixel_at(&self, index: usize) -> Pixel {
        Pixel::new((index / self.width) as u32, (index % self.width) as u32)
    }

    /// Valid depth at a pixel.
    #[inline]
    pub fn get(&self, px: Pixel) -> Option<f64> {
        if px.row as usize >= self.height || px.col as usize >= self.width {
            return None;
        }
        let d = self.depth[self.index(px)];
        is_valid_depth(d).then_some(d as f64)
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| is_valid_depth(**d)).count()
    }

    pub fn same_shape(&self, other: &DepthFrame) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[inline]
pub fn is_valid_depth(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

/// Lifts every valid pixel to a world-frame point, recording pixel provenance.
pub fn lift_depth(frame: &DepthFrame, cam: &CameraModel) -> Result<PointCloud> {
    lift_depth_masked(frame, cam, None, 1)
}

/// Lifts valid pixels selected by `mask` (all when `None`), visiting every
/// `stride`-th row and column.
pub fn lift_depth_masked(
    frame: &DepthFrame,
    cam: &CameraModel,
    mask: Option<&BinaryMask>,
    stride: usize,
) -> Result<PointCloud> {
    cam.check_frame(frame)?;
    if let Some(m) = mask {
        if m.width() != frame.width || m.height() != frame.height {
            return Err(Error::Config("mask dimensions differ from depth frame".into()));
        }
    }
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for row in (0..frame.height).step_by(stride) {
        for col in (0..frame.width).step_by(stride) {
            let idx = row * frame.width + col;
            if let Some(m) = mask {
                if !m.get_index(idx) {
                    continue;
                }
            }
            let d = frame.depth[idx];
            if !is_valid_depth(d) {
                continue;
            }
            let px = Pixel::new(row as u32, col as u32);
            points.push(cam.lift_pixel(px, d as f64));
            pixels.push(px);
        }
    }
    Ok(PointCloud::with_pixels(points, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Mat3;
    use alloc::vec;

    fn unit_cam(w: usize, h: usize) -> CameraModel {
        CameraModel::new(1.0, 1.0, 0.5, 0.5, w, h, Rigid::IDENTITY).unwrap()
    }

    #[test]
    fn single_pixel_back_projection() {
        let cam = unit_cam(1, 1);
        let frame = DepthFrame::new(1, 1, vec![1.0], 0.0).unwrap();
        let cloud = lift_depth(&frame, &cam).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0], Point3::new(-0.5, -0.5, 1.0));
        assert_eq!(cloud.pixel_index.as_deref(), Some(&[Pixel::new(0, 0)][..]));
    }

    #[test]
    fn invalid_depths_are_skipped() {
        let cam = unit_cam(2, 2);
        let frame = DepthFrame::new(2, 2, vec![0.0, -1.0, f32::NAN, f32::INFINITY], 0.0).unwrap();
        assert!(lift_depth(&frame, &cam).unwrap().is_empty());
    }

    #[test]
    fn two_by_two_matches_hand_back_projection() {
        let rot = Mat3::rotation_z(core::f64::consts::FRAC_PI_2);
        let t = Point3::new(1.0, 2.0, 3.0);
        let cam = CameraModel::new(2.0, 4.0, 0.5, 1.5, 2, 2, Rigid::new(rot, t)).unwrap();
        let frame = DepthFrame::new(2, 2, vec![1.0, 2.0, 0.5, 4.0], 0.0).unwrap();
        let cloud = lift_depth(&frame, &cam).unwrap();
        // Camera-frame points ((u-cx)z/fx, (v-cy)z/fy, z), then rotate 90° about z: (x,y,z) -> (-y,x,z).
        let expected_cam = [
            (-0.25, -0.375, 1.0),
            (0.5, -0.75, 2.0),
            (-0.125, -0.0625, 0.5),
            (1.0, -0.5, 4.0),
        ];
        for (p, (x, y, z)) in cloud.points.iter().zip(expected_cam) {
            let expected = Point3::new(-y + 1.0, x + 2.0, z + 3.0);
            assert!(p.distance(expected) < 1e-9, "{p:?} vs {expected:?}");
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let cam = unit_cam(2, 2);
        let frame = DepthFrame::new(1, 1, vec![1.0], 0.0).unwrap();
        assert!(matches!(lift_depth(&frame, &cam), Err(Error::Config(_))));
    }

    #[test]
    fn behind_camera_and_outside_bounds_are_out_of_view() {
        let cam = CameraModel::new(100.0, 100.0, 32.0, 24.0, 64, 48, Rigid::IDENTITY).unwrap();
        assert_eq!(project_point(Point3::new(0.0, 0.0, -1.0), &cam), None);
        assert_eq!(project_point(Point3::new(0.0, 0.0, 0.0), &cam), None);
        // u = 100 * x / 1 + 32 = 64 + 10
        assert_eq!(project_point(Point3::new(0.42, 0.0, 1.0), &cam), None);
        let (u, v) = project_point(Point3::new(0.0, 0.0, 1.0), &cam).unwrap();
        assert_eq!((u, v), (32.0, 24.0));
    }

    #[test]
    fn camera_invariants_are_checked() {
        assert!(CameraModel::new(0.0, 1.0, 0.5, 0.5, 1, 1, Rigid::IDENTITY).is_err());
        assert!(CameraModel::new(1.0, 1.0, 1.5, 0.5, 1, 1, Rigid::IDENTITY).is_err());
        let skew = Rigid::new(Mat3([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), Point3::ORIGIN);
        assert!(CameraModel::new(1.0, 1.0, 0.5, 0.5, 1, 1, skew).is_err());
    }
}
