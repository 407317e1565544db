//! Railway station energy management: receding-horizon EV peak shaving, a
//! cost-minimizing storage and grid dispatch MILP, and the scenario pipeline
//! that compares the optimized station with a grid-only reference.
//!
//! All optimization runs on the embedded simplex and branch-and-bound
//! solver in [`solver`].

// Range checks are written as `!(x >= 0.0)` so NaN fails them; the dense
// numeric loops index several arrays in step.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ems;
pub mod ev;
pub mod pipeline;
pub mod scenario;
pub mod solver;

pub use ems::{EmsError, EmsParams, EmsSolution, EssParams};
pub use ev::{ChargingMode, ChargingProfile, EvError, LineLimit, LineLimitScope};
pub use pipeline::{
    parse_config, CaseSelection, Experiment, ExperimentConfig, PipelineError, PolicySelection,
    Report,
};
pub use scenario::{EvSession, PvParams, Scenario, ScenarioError, TimeGrid};
pub use solver::{LinearModel, LpSolution, MilpOptions, MilpSolution, MilpStatus, SolverError};
