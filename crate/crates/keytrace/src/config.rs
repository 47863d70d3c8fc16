//! Effective run configuration: defaults, then an optional JSON file, then
//! command-line flags.

use std::path::Path;

use clap::{Args, ValueEnum};
use keytrace_core::init::InitParams;
use keytrace_core::pipeline::PipelineConfig;
use keytrace_core::segmentation::SegmentationParams;
use keytrace_core::tracking::TrackingParams;
use keytrace_core::ObjectClass;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::formats::{read_json, to_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    /// Distance threshold of the F-score.
    pub fscore_tau_mm: f64,
    /// Frames with edge RMSE below this count towards `E<`.
    pub edge_threshold_mm: f64,
    /// Frames with Chamfer distance below this count towards `F<`.
    pub chamfer_threshold_mm: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { fscore_tau_mm: 10.0, edge_threshold_mm: 5.0, chamfer_threshold_mm: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub segmentation: SegmentationParams,
    pub init: InitParams,
    pub tracking: TrackingParams,
    pub eval: EvalParams,
}

impl Config {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            segmentation: self.segmentation.clone(),
            init: self.init.clone(),
            tracking: self.tracking.clone(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.pipeline().validate()?;
        let e = &self.eval;
        if [e.fscore_tau_mm, e.edge_threshold_mm, e.chamfer_threshold_mm].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::Params(format!("evaluation thresholds must be positive: {e:?}")));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(to_json(self).as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    OneDim,
    TwoDim,
}

impl From<ClassArg> for ObjectClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::OneDim => ObjectClass::OneDim,
            ClassArg::TwoDim => ObjectClass::TwoDim,
        }
    }
}

/// Every pipeline parameter as an optional flag; set flags override the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// JSON config supplying any subset of the parameters.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,

    #[arg(long, value_name = "M", help_heading = "Segmentation")]
    pub diff_threshold: Option<f64>,
    #[arg(long, value_name = "M", help_heading = "Segmentation")]
    pub exclusion_radius: Option<f64>,
    #[arg(long, value_name = "M", help_heading = "Segmentation")]
    pub dbscan_eps: Option<f64>,
    #[arg(long, value_name = "N", help_heading = "Segmentation")]
    pub dbscan_min_pts: Option<usize>,
    /// Lift every n-th pixel row and column.
    #[arg(long, value_name = "N", help_heading = "Segmentation")]
    pub stride: Option<usize>,

    /// Keypoint count for curve-like objects.
    #[arg(long, value_name = "N", help_heading = "Initialization")]
    pub num_keypoints: Option<usize>,
    #[arg(long, value_name = "N", help_heading = "Initialization")]
    pub grid_rows: Option<usize>,
    #[arg(long, value_name = "N", help_heading = "Initialization")]
    pub grid_cols: Option<usize>,
    #[arg(long, value_enum, help_heading = "Initialization")]
    pub force_class: Option<ClassArg>,
    #[arg(long, value_name = "N", help_heading = "Initialization")]
    pub classify_seeds: Option<usize>,
    #[arg(long, value_name = "M", help_heading = "Initialization")]
    pub classify_radius: Option<f64>,
    #[arg(long, value_name = "R", help_heading = "Initialization")]
    pub ratio_threshold: Option<f64>,
    #[arg(long, value_name = "SEED", help_heading = "Initialization")]
    pub classify_rng_seed: Option<u64>,
    #[arg(long, value_name = "PX", help_heading = "Initialization")]
    pub dilation_px: Option<usize>,
    #[arg(long, value_name = "PX", help_heading = "Initialization")]
    pub merge_radius_px: Option<f64>,
    #[arg(long, value_name = "PX", help_heading = "Initialization")]
    pub lift_search_px: Option<usize>,
    #[arg(long, value_name = "PX", help_heading = "Initialization")]
    pub spur_length_px: Option<f64>,
    #[arg(long, value_name = "N", help_heading = "Initialization")]
    pub contour_anchors: Option<usize>,
    #[arg(long, value_name = "N", help_heading = "Initialization")]
    pub init_iterations: Option<usize>,
    /// Sheets: anchor only the four grid corners instead of the whole boundary.
    #[arg(long, help_heading = "Initialization")]
    pub corner_anchors: bool,

    /// Solver sweeps per tracked frame.
    #[arg(long, value_name = "N", help_heading = "Tracking")]
    pub iterations: Option<usize>,
    /// Early-stop displacement (m); 0 runs every sweep.
    #[arg(long, value_name = "M", help_heading = "Tracking")]
    pub convergence_tol: Option<f64>,
    /// Moving-average window (odd); 1 disables smoothing.
    #[arg(long, value_name = "N", help_heading = "Tracking")]
    pub window: Option<usize>,
    #[arg(long, value_name = "M", help_heading = "Tracking")]
    pub anchor_match_dist: Option<f64>,
    /// Skip edge-length projection while tracking.
    #[arg(long, help_heading = "Tracking")]
    pub no_edge: bool,
    /// Skip nearest-cloud-point projection while tracking.
    #[arg(long, help_heading = "Tracking")]
    pub no_projection: bool,
    /// Skip anchor resets while tracking.
    #[arg(long, help_heading = "Tracking")]
    pub no_anchor: bool,

    #[arg(long, value_name = "MM", help_heading = "Evaluation")]
    pub fscore_tau_mm: Option<f64>,
    #[arg(long, value_name = "MM", help_heading = "Evaluation")]
    pub edge_threshold_mm: Option<f64>,
    #[arg(long, value_name = "MM", help_heading = "Evaluation")]
    pub chamfer_threshold_mm: Option<f64>,
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ParamArgs {
    /// Defaults, overlaid by the config file, overlaid by flags.
    pub fn resolve(&self) -> CliResult<Config> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => Config::default(),
        };
        self.apply(&mut c);
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&self, c: &mut Config) {
        let s = &mut c.segmentation;
        set(&mut s.diff_threshold, self.diff_threshold);
        set(&mut s.exclusion_radius, self.exclusion_radius);
        set(&mut s.dbscan_eps, self.dbscan_eps);
        set(&mut s.dbscan_min_pts, self.dbscan_min_pts);
        set(&mut s.stride, self.stride);

        let i = &mut c.init;
        set(&mut i.num_keypoints, self.num_keypoints);
        set(&mut i.grid_shape.0, self.grid_rows);
        set(&mut i.grid_shape.1, self.grid_cols);
        if let Some(class) = self.force_class {
            i.force_class = Some(class.into());
        }
        set(&mut i.classify.num_seeds, self.classify_seeds);
        set(&mut i.classify.radius, self.classify_radius);
        set(&mut i.classify.ratio_threshold, self.ratio_threshold);
        set(&mut i.classify.rng_seed, self.classify_rng_seed);
        set(&mut i.anchors.dilation_px, self.dilation_px);
        set(&mut i.anchors.merge_radius_px, self.merge_radius_px);
        set(&mut i.anchors.lift_search_px, self.lift_search_px);
        set(&mut i.anchors.spur_length_px, self.spur_length_px);
        set(&mut i.anchors.num_contour_anchors, self.contour_anchors);
        set(&mut i.solver.iterations, self.init_iterations);
        i.boundary_anchors &= !self.corner_anchors;

        let t = &mut c.tracking;
        set(&mut t.solver.iterations, self.iterations);
        if let Some(tol) = self.convergence_tol {
            t.solver.convergence_tol = (tol > 0.0).then_some(tol);
        }
        set(&mut t.smoothing_window, self.window);
        set(&mut t.anchor_match_max_dist, self.anchor_match_dist);
        t.solver.use_edge &= !self.no_edge;
        t.solver.use_projection &= !self.no_projection;
        t.solver.use_anchor &= !self.no_anchor;

        let e = &mut c.eval;
        set(&mut e.fscore_tau_mm, self.fscore_tau_mm);
        set(&mut e.edge_threshold_mm, self.edge_threshold_mm);
        set(&mut e.chamfer_threshold_mm, self.chamfer_threshold_mm);
    }
}

pub fn load_config(path: &Path) -> CliResult<Config> {
    read_json(path)
}
