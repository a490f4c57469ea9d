//! Tight bounds on the probability of necessity and sufficiency (PNS), Wald
//! margins propagated through the bound arms, sample-size planning, and a
//! validation harness built on binary structural causal models.
//!
//! The modules layer bottom-up:
//!
//! - [`bounds`]: the max/min envelope over experimental and observational data.
//! - [`ci`]: Wald margins per term, per arm, and the worst-case budget.
//! - [`planner`]: inverts the margin formulas into sample sizes.
//! - [`scm`]: the 20-confounder model family, presets and random generation.
//! - [`oracle`]: exact distributions by enumerating all 2^22 exogenous states.
//! - [`sampler`]: finite experimental/observational samples and estimators.
//! - [`experiment`]: Monte Carlo replications and the error-vs-size sweep.

pub mod bounds;
pub mod ci;
mod error;
pub mod experiment;
pub mod oracle;
pub mod planner;
pub mod sampler;
pub mod scm;
pub mod seed;

pub use bounds::{pns_bounds, ExperimentalDist, ObservationalDist, PnsBounds};
pub use ci::{ConfidenceSpec, MarginReport};
pub use error::{Error, Result, TreatmentArm};
pub use experiment::{
    Experiment, ExperimentReport, ReplicationOutcome, ReplicationResult, SweepRow,
};
pub use oracle::{informer, TrueDistributions};
pub use planner::SamplePlan;
pub use sampler::{CellCounts, EstimatedDistributions, SampleBatch, SampleKind};
pub use scm::{ExogenousState, Preset, ScmModel};
