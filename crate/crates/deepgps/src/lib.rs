//! Weakly-supervised 2D positioning from inter-position distance constraints.
//!
//! This crate trains a position-regression MLP without ground-truth position
//! labels: the only supervision is the wheel-encoder distance measured between
//! observations taken along straight-line robot trajectories. It also carries
//! the surrounding workbench — world simulation, trajectory data collection
//! for landmark-distance and 2D-lidar observations, classical baselines
//! (nonlinear least-squares positioning, classical MDS, PCA+KNN retrieval),
//! and trajectory-error evaluation with rigid alignment.
//!
//! Modules mirror the workbench stages:
//!
//! - [`env`] — 2D worlds (landmark fields, occupancy-grid rooms) and the ray
//!   casting / line-of-sight queries the simulator needs.
//! - [`collect`] — trajectory simulation and observation capture producing
//!   [`collect::ConstraintGraph`] datasets.
//! - [`net`] — a from-scratch differentiable MLP with Adam.
//! - [`losses`] — the distance-constraint objectives and batch construction.
//! - [`train`] — the training loop tying the three together.
//! - [`baselines`] — explicit nonlinear-least-squares positioning, classical
//!   MDS, and PCA+KNN.
//! - [`eval`] — rigid alignment, absolute-trajectory-error statistics, error
//!   grids, and robustness sweep harnesses.

pub mod baselines;
pub mod collect;
pub mod env;
pub mod eval;
pub mod losses;
pub mod net;
pub mod train;

pub use env::Point2;
