//! Points, rotations and rigid transforms in the world frame (meters).

use core::cmp::Ordering;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::fmath;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Component along axis 0, 1 or 2.
    #[inline]
    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        fmath::sqrt(self.norm_squared())
    }

    /// Squared distance. Every nearest-neighbor routine in the crate uses
    /// this exact expression so that results compare bit-for-bit.
    #[inline]
    pub fn distance_squared(self, o: Point3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(self, o: Point3) -> f64 {
        fmath::sqrt(self.distance_squared(o))
    }

    /// Unit vector, or `None` for (near) zero length.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        if n > 1e-15 {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn lerp(self, o: Point3, t: f64) -> Point3 {
        self + (o - self) * t
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Lexicographic order on (x, y, z). Used for canonical index assignment.
    pub fn lex_cmp(&self, o: &Point3) -> Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.z.total_cmp(&o.z))
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    #[inline]
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Point3 {
    #[inline]
    fn sub_assign(&mut self, o: Point3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Mean of a non-empty point set.
pub fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let mut sum = Point3::ORIGIN;
    for p in points {
        sum += *p;
    }
    Some(sum / points.len() as f64)
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rotation_x(angle: f64) -> Mat3 {
        let (s, c) = (fmath::sin(angle), fmath::cos(angle));
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rotation_y(angle: f64) -> Mat3 {
        let (s, c) = (fmath::sin(angle), fmath::cos(angle));
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rotation_z(angle: f64) -> Mat3 {
        let (s, c) = (fmath::sin(angle), fmath::cos(angle));
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rodrigues rotation about a (not necessarily unit) axis.
    pub fn from_axis_angle(axis: Point3, angle: f64) -> Mat3 {
        let Some(k) = axis.normalized() else {
            return Mat3::IDENTITY;
        };
        let (s, c) = (fmath::sin(angle), fmath::cos(angle));
        let t = 1.0 - c;
        Mat3([
            [t * k.x * k.x + c, t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y],
            [t * k.x * k.y + s * k.z, t * k.y * k.y + c, t * k.y * k.z - s * k.x],
            [t * k.x * k.z - s * k.y, t * k.y * k.z + s * k.x, t * k.z * k.z + c],
        ])
    }

    #[inline]
    pub fn apply(&self, p: Point3) -> Point3 {
        let m = &self.0;
        Point3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
        )
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[c][r];
            }
        }
        Mat3(out)
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[r][k] * o.0[k][c]).sum();
            }
        }
        Mat3(out)
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.transpose().mul_mat(self);
        let mut worst: f64 = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max(fmath::abs(rtr.0[r][c] - target));
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl Default for Mat3 {
    fn default() -> Self {
        Mat3::IDENTITY
    }
}

/// Rigid transform `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rigid {
    pub rotation: Mat3,
    pub translation: Point3,
}

impl Rigid {
    pub const IDENTITY: Rigid = Rigid { rotation: Mat3::IDENTITY, translation: Point3::ORIGIN };

    pub fn new(rotation: Mat3, translation: Point3) -> Self {
        Self { rotation, translation }
    }

    #[inline]
    pub fn apply(&self, p: Point3) -> Point3 {
        self.rotation.apply(p) + self.translation
    }

    pub fn inverse(&self) -> Rigid {
        let rt = self.rotation.transpose();
        Rigid { rotation: rt, translation: -rt.apply(self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Rigid) -> Rigid {
        Rigid {
            rotation: self.rotation.mul_mat(&other.rotation),
            translation: self.apply(other.translation),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rigid_inverse_round_trips() {
        let t = Rigid::new(
            Mat3::from_axis_angle(Point3::new(0.3, -1.0, 0.5), 0.7),
            Point3::new(0.1, -0.2, 0.9),
        );
        let p = Point3::new(0.4, 0.5, -0.6);
        let back = t.inverse().apply(t.apply(p));
        assert!(back.distance(p) < 1e-12);
        assert!(t.rotation.orthonormality_error() < 1e-12);
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lex_order_breaks_ties_on_later_axes() {
        let a = Point3::new(0.0, 1.0, 0.0);
        let b = Point3::new(0.0, 2.0, -1.0);
        assert_eq!(a.lex_cmp(&b), Ordering::Less);
        assert_eq!(b.lex_cmp(&a), Ordering::Greater);
    }
}
