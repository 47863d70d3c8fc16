//! Topology-consistent 3D keypoint extraction and tracking for deformable
//! objects observed by a single depth camera.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation over in-memory frames; file formats, the CLI and any IO live
//! in the companion `keytrace` crate.
//!
//! The pipeline, in order:
//!
//! 1. [`segmentation`]: depth differencing against a static reference,
//!    exclusion-cloud filtering, DBSCAN, largest cluster.
//! 2. [`classify`]: curve-like (1D) vs surface-like (2D) from local
//!    covariance eigenvalue ratios.
//! 3. [`anchors`]: leaf/junction anchors from a projected skeleton and its
//!    minimum spanning tree, or contour anchors for sheets.
//! 4. [`init`]: warm start, topology recovery and rest lengths.
//! 5. [`solver`]: Gauss-Seidel projection (edge lengths, nearest cloud
//!    point, anchor reset).
//! 6. [`tracking`]: warm-started per-frame solves, anchor correspondence and
//!    a symmetric moving average.
//!
//! [`metrics`] scores trajectories and [`synth`] renders ground-truth
//! sequences used throughout the test suites.
#![no_std]

extern crate alloc;

mod fmath;

pub mod anchors;
pub mod assign;
pub mod camera;
pub mod classify;
pub mod cloud;
pub mod error;
pub mod init;
pub mod mask;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod point;
pub mod segmentation;
pub mod solver;
pub mod synth;
pub mod topology;
pub mod tracking;

pub use camera::{lift_depth, project_point, project_to_pixel, CameraModel, DepthFrame, Pixel};
pub use cloud::PointCloud;
pub use error::{Error, Result, Stage};
pub use mask::BinaryMask;
pub use nn::NnIndex;
pub use point::{Mat3, Point3, Rigid};
pub use topology::{AnchorRole, AnchorSlot, KeypointSet, ObjectClass, Topology};
