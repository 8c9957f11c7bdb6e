//! Discrete fields on a flat periodic box and the finite-difference machinery.

pub mod diff;
pub mod field;
pub mod grid;
pub mod metric;
pub mod snapshot;

pub use diff::{ball_infimum, ball_nodes, mixed_partial, partial_derivative, resample, sup_derivative_norm, sup_norm};
pub use field::{pair_index, sym_index, Rank, TensorField};
pub use grid::{Grid, MAX_DIM};
pub use metric::{sym_eigen_range, MetricField};
pub use snapshot::{read_snapshot, write_snapshot};
