//! Landmark-based patient-to-image registration and catheter guidance for
//! ventriculostomy, with a simulated acquisition front end.
//!
//! The pipeline mirrors a handheld AR navigation workflow:
//!
//! 1. [`acquisition`] simulates aiming a phone camera at seven facial
//!    landmarks and reading depth off the head surface.
//! 2. [`registration`] fits the model→world similarity transform and reports
//!    the landmark RMSE; [`registration::icp_refine`] handles dense,
//!    correspondence-free alignment.
//! 3. [`guidance`] places the burr-hole entry point, computes target
//!    registration error and turns a tracked marker pose into a catheter tip
//!    with live distance-to-ventricle feedback.
//! 4. [`session`] is the explicit state machine tying these steps together,
//!    and [`service`] exposes it over HTTP.
//!
//! [`simulation`] runs the whole pipeline as a Monte Carlo study and [`io`]
//! reads and writes meshes, scenarios and reports.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod cli;
pub mod geometry;
pub mod guidance;
pub mod io;
pub mod registration;
pub mod service;
pub mod session;
pub mod simulation;

pub use geometry::{Point3, Vec3};
