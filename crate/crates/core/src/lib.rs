//! Discrete-time extremum seeking under unknown bounded time-varying
//! measurement delays, with closed-form stability certificates.
//!
//! - [`plant`]: quadratic maps, delay models and the delayed measurement
//! - [`dither`]: sinusoidal dithers, gain schedules and averaging remainders
//! - [`estimator`]: the unbiased and classical loops
//! - [`bounds`]: remainder bounds, bound chains and stability predicates
//! - [`feasibility`]: maximal step-size searches

pub mod bounds;
pub mod dither;
pub mod estimator;
pub mod feasibility;
pub mod plant;

pub use bounds::{BoundChain, BoundInputs, DelayRegime, FeasibilityVerdict, PredicateOptions};
pub use dither::{DitherConfig, GainSchedule};
pub use estimator::{EsRunConfig, Trajectory, Variant};
pub use plant::{DelayKind, DelayModel, QuadraticMap, UncertaintyBounds};
