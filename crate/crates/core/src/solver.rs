//! Gauss-Seidel projection solver for the keypoint problem: hold adjacent
//! keypoints at their rest lengths, keep every free keypoint on the observed
//! cloud and every anchor at its detected position.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::NnIndex;
use crate::point::Point3;
use crate::topology::{KeypointSet, Topology};

/// Pairs closer than this are treated as coincident by [`project_edge`].
pub const DEGENERATE_EDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SolverParams {
    pub iterations: usize,
    pub use_anchor: bool,
    pub use_edge: bool,
    pub use_projection: bool,
    /// Stop early once no keypoint moves more than this in a sweep; `None` runs all sweeps.
    pub convergence_tol: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self::tracking()
    }
}

impl SolverParams {
    pub fn tracking() -> Self {
        Self { iterations: 30, use_anchor: true, use_edge: true, use_projection: true, convergence_tol: Some(1e-5) }
    }

    pub fn initialization() -> Self {
        Self { iterations: 200, ..Self::tracking() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("solver needs at least one iteration".into()));
        }
        if let Some(tol) = self.convergence_tol {
            if !(tol >= 0.0) {
                return Err(Error::Config(format!("invalid convergence tolerance {tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveDiagnostics {
    pub sweeps: usize,
    /// Largest `| |xi - xj| - d |` over edges after the last sweep (m).
    pub max_edge_residual: f64,
    pub degenerate_edges: usize,
}

/// Moves both endpoints along their connecting line by half the length
/// error each, so the pair ends at distance `d` with its midpoint kept.
/// Coincident points are split along +x. The flag reports that case.
pub fn project_edge(xi: Point3, xj: Point3, d: f64) -> (Point3, Point3, bool) {
    let delta = xj - xi;
    let len = delta.norm();
    let mid = (xi + xj) * 0.5;
    if len < DEGENERATE_EDGE {
        let half = Point3::new(d * 0.5, 0.0, 0.0);
        return (mid - half, mid + half, true);
    }
    if len == d {
        return (xi, xj, false);
    }
    let dir = delta / len;
    let half = dir * (d * 0.5);
    (mid - half, mid + half, false)
}

/// Sum of squared edge-length errors: the quantity the projections trade off
/// against the cloud and anchor constraints.
pub fn objective(x: &[Point3], topology: &Topology) -> f64 {
    topology
        .edges
        .iter()
        .zip(&topology.rest_lengths)
        .map(|(&(i, j), d)| {
            let e = x[i].distance(x[j]) - d;
            e * e
        })
        .sum()
}

pub fn max_edge_residual(x: &[Point3], topology: &Topology) -> f64 {
    topology
        .edges
        .iter()
        .zip(&topology.rest_lengths)
        .map(|(&(i, j), d)| crate::fmath::abs(x[i].distance(x[j]) - d))
        .fold(0.0, f64::max)
}

/// Runs the projection sweeps from `x0`.
///
/// Each sweep applies, in order: edge projection over all edges in stored
/// order, updating in place; nearest-cloud projection of every non-anchor
/// keypoint; reset of anchors to `anchor_positions` (parallel to
/// `topology.anchors`). Anchors are also placed before the first sweep.
/// With `use_anchor` off there are no anchors: every keypoint is projected
/// to the cloud and none is reset.
pub fn gauss_seidel_solve(
    x0: &KeypointSet,
    cloud: &NnIndex,
    topology: &Topology,
    anchor_positions: &[Point3],
    params: &SolverParams,
) -> Result<(KeypointSet, SolveDiagnostics)> {
    params.validate()?;
    x0.check(topology)?;
    if anchor_positions.len() != topology.anchors.len() {
        return Err(Error::InvalidInput(format!(
            "{} anchor positions for {} anchor slots",
            anchor_positions.len(),
            topology.anchors.len()
        )));
    }
    let mut x = x0.positions.clone();
    let mut free = alloc::vec![true; x.len()];
    if params.use_anchor {
        for (slot, p) in topology.anchors.iter().zip(anchor_positions) {
            free[slot.index] = false;
            x[slot.index] = *p;
        }
    }
    let mut diag = SolveDiagnostics::default();
    let mut before: Vec<Point3> = x.clone();
    for _ in 0..params.iterations {
        before.copy_from_slice(&x);
        if params.use_edge {
            for (&(i, j), &d) in topology.edges.iter().zip(&topology.rest_lengths) {
                let (a, b, degenerate) = project_edge(x[i], x[j], d);
                x[i] = a;
                x[j] = b;
                diag.degenerate_edges += degenerate as usize;
            }
        }
        if params.use_projection {
            for (p, _) in x.iter_mut().zip(&free).filter(|(_, f)| **f) {
                *p = cloud.nearest(*p).point;
            }
        }
        if params.use_anchor {
            for (slot, p) in topology.anchors.iter().zip(anchor_positions) {
                x[slot.index] = *p;
            }
        }
        diag.sweeps += 1;
        if let Some(tol) = params.convergence_tol {
            let moved = x.iter().zip(&before).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max);
            if moved < tol {
                break;
            }
        }
    }
    diag.max_edge_residual = max_edge_residual(&x, topology);
    Ok((KeypointSet::new(x, x0.frame_index), diag))
}
