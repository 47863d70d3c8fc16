//! Curve vs surface classification from local covariance eigenvalues.
//!
//! A curve is locally line-like (λ2/λ1 ≈ 0); a surface is locally planar
//! (λ2/λ1 ≈ 1). The decision uses the median λ2/λ1 over random seeds.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fmath;
use crate::nn::NnIndex;
use crate::point::Point3;
use crate::topology::ObjectClass;

/// Neighborhoods with fewer points are skipped.
pub const MIN_NEIGHBORHOOD: usize = 4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ClassifyParams {
    pub num_seeds: usize,
    pub radius: f64,
    pub ratio_threshold: f64,
    pub rng_seed: u64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self { num_seeds: 32, radius: 0.03, ratio_threshold: 0.25, rng_seed: 0 }
    }
}

impl ClassifyParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_seeds == 0
            || !(self.radius > 0.0)
            || !(self.ratio_threshold > 0.0 && self.ratio_threshold < 1.0)
        {
            return Err(Error::Config(format!("invalid classification parameters: {self:?}")));
        }
        Ok(())
    }
}

/// Covariance eigenvalues sorted descending, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalues {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl Eigenvalues {
    pub fn ratio21(&self) -> f64 {
        if self.l1 > 0.0 {
            self.l2 / self.l1
        } else {
            0.0
        }
    }

    pub fn ratio32(&self) -> f64 {
        if self.l2 > 0.0 {
            self.l3 / self.l2
        } else {
            0.0
        }
    }
}

/// Population covariance (1/n) of a point set.
pub fn covariance(points: &[Point3]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mean = crate::point::centroid(points).unwrap_or_default();
    let mut c = [[0.0; 3]; 3];
    for p in points {
        let d = (*p - mean).to_array();
        for r in 0..3 {
            for k in r..3 {
                c[r][k] += d[r] * d[k];
            }
        }
    }
    for r in 0..3 {
        for k in r..3 {
            c[r][k] /= n;
            c[k][r] = c[r][k];
        }
    }
    c
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations,
/// returned descending.
pub fn symmetric_eigenvalues(m: [[f64; 3]; 3]) -> [f64; 3] {
    let mut a = m;
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (fmath::abs(theta) + fmath::sqrt(theta * theta + 1.0));
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / fmath::sqrt(t * t + 1.0);
            let s = t * c;
            // A <- Jᵀ A J with J the rotation in the (p, q) plane.
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Eigenvalues of the covariance of the cloud points within `radius` of
/// `seed`; `None` when the neighborhood is degenerate (< 4 points).
pub fn local_eigenvalues(index: &NnIndex, seed: Point3, radius: f64) -> Option<Eigenvalues> {
    let neighborhood: Vec<Point3> =
        index.within_radius(seed, radius).into_iter().map(|i| index.points()[i]).collect();
    if neighborhood.len() < MIN_NEIGHBORHOOD {
        return None;
    }
    let [l1, l2, l3] = symmetric_eigenvalues(covariance(&neighborhood));
    Some(Eigenvalues { l1: l1.max(0.0), l2: l2.max(0.0), l3: l3.max(0.0) })
}

/// Diagnostics of one classification.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyReport {
    pub class: ObjectClass,
    pub median_ratio21: f64,
    pub median_ratio32: f64,
    pub valid_seeds: usize,
    pub seed_indices: Vec<usize>,
}

/// Seed point indices drawn deterministically from `rng_seed`.
pub fn sample_seeds(n: usize, params: &ClassifyParams) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    (0..params.num_seeds).map(|_| rng.random_range(0..n)).collect()
}

pub fn classify_object(cloud: &PointCloud, params: &ClassifyParams) -> Result<ObjectClass> {
    classify_report(cloud, params).map(|r| r.class)
}

/// Classification with the given seed points (used for equivariance checks).
pub fn classify_with_seeds(cloud: &PointCloud, seeds: &[Point3], params: &ClassifyParams) -> Result<ClassifyReport> {
    params.validate()?;
    if cloud.len() < MIN_NEIGHBORHOOD {
        return Err(Error::ClassificationFailed(format!("cloud has only {} points", cloud.len())));
    }
    let index = NnIndex::build(&cloud.points)?;
    let mut r21 = Vec::with_capacity(seeds.len());
    let mut r32 = Vec::with_capacity(seeds.len());
    for seed in seeds {
        if let Some(ev) = local_eigenvalues(&index, *seed, params.radius) {
            r21.push(ev.ratio21());
            r32.push(ev.ratio32());
        }
    }
    let valid = r21.len();
    if valid == 0 || valid * 2 < seeds.len() {
        return Err(Error::ClassificationFailed(format!(
            "{} of {} seed neighborhoods are degenerate at radius {} m",
            seeds.len() - valid,
            seeds.len(),
            params.radius
        )));
    }
    let median_ratio21 = median(&mut r21);
    let median_ratio32 = median(&mut r32);
    let class = if median_ratio21 < params.ratio_threshold { ObjectClass::OneDim } else { ObjectClass::TwoDim };
    Ok(ClassifyReport { class, median_ratio21, median_ratio32, valid_seeds: valid, seed_indices: Vec::new() })
}

pub fn classify_report(cloud: &PointCloud, params: &ClassifyParams) -> Result<ClassifyReport> {
    params.validate()?;
    if cloud.len() < MIN_NEIGHBORHOOD {
        return Err(Error::ClassificationFailed(format!("cloud has only {} points", cloud.len())));
    }
    let seed_indices = sample_seeds(cloud.len(), params);
    let seeds: Vec<Point3> = seed_indices.iter().map(|&i| cloud.points[i]).collect();
    let mut report = classify_with_seeds(cloud, &seeds, params)?;
    report.seed_indices = seed_indices;
    Ok(report)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_are_rank_one() {
        let pts: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64 * 0.001, 0.0, 0.0)).collect();
        let idx = NnIndex::build(&pts).unwrap();
        let ev = local_eigenvalues(&idx, Point3::new(0.01, 0.0, 0.0), 1.0).unwrap();
        assert!(ev.l2 / ev.l1 < 1e-6);
        assert!(ev.l3 < 1e-15);
    }

    #[test]
    fn square_grid_is_rank_two_and_isotropic() {
        let pts: Vec<Point3> =
            (0..121).map(|i| Point3::new((i % 11) as f64 * 0.001, (i / 11) as f64 * 0.001, 0.0)).collect();
        let idx = NnIndex::build(&pts).unwrap();
        let ev = local_eigenvalues(&idx, Point3::new(0.005, 0.005, 0.0), 1.0).unwrap();
        assert!(ev.l3 / ev.l2 < 1e-6);
        assert!((ev.l2 / ev.l1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_neighborhood_is_degenerate() {
        let pts = [Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let idx = NnIndex::build(&pts).unwrap();
        assert_eq!(local_eigenvalues(&idx, Point3::ORIGIN, 10.0), None);
    }

    #[test]
    fn mostly_degenerate_seeds_fail() {
        let pts: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let r = classify_object(&PointCloud::new(pts), &ClassifyParams::default());
        assert!(matches!(r, Err(Error::ClassificationFailed(_))));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
