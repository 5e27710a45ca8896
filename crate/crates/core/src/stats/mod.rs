//! Seeded Monte Carlo experiments and the statistics behind them.
//!
//! Every experiment is a pure function of its parameters and a master seed.
//! Trial `i` draws from its own stream, so results do not depend on how the
//! trials were scheduled.

pub mod chisq;
mod experiments;
mod report;
mod suite;

pub use experiments::*;
pub use report::{Check, Expectation, ExperimentReport, Relation, SampleTable};
pub use suite::{run_suite, Overrides, Profile, Suite};
