//! Scalar-curvature lower bounds under `C⁰` limits, checked along the flow.

pub mod constants;
pub mod family;
pub mod ladder;
pub mod theorem;

pub use constants::{derive_constants, LadderConstants};
pub use family::{cutoff, glue_to_euclidean, make_family, smooth_step, FamilyKind, FamilyMember, MetricFamily};
pub use ladder::{
    calibrate, ladder_experiment, ladder_on_trajectory, run_ladder, Calibration, LadderReport, LadderRow,
    LadderSettings, LadderVerdict,
};
pub use theorem::{verify_theorem, Stage, StageResult, TheoremSettings, TheoremVerdict};
