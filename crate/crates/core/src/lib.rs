//! Ricci DeTurck flow laboratory.
//!
//! Discrete tensor calculus on periodic grids, the Ricci DeTurck flow in
//! h-form, drift heat kernels on the evolving background, the DeTurck
//! diffeomorphisms, and the scalar-curvature ladder experiments built on them.

// index loops mirror the tensor notation; `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod deturck_flow;
pub mod diffeo_flow;
pub mod error;
pub mod grid_tensor;
pub mod gromov_experiment;
pub mod heat_kernel;

pub use error::{LabError, Result};
