//! Configuration screening by performance-envelope racing.
//!
//! The toolkit evaluates a space of algorithm configurations against a
//! geometric schedule of virtual-time checkpoints. Fully evaluated
//! configurations define a *cutoff line* (their pointwise worst-case
//! quality envelope); a candidate run whose quality rises above the
//! cutoff line by more than a margin is terminated early. Racing all
//! configurations this way returns an approximation of the top fraction
//! at a fraction of the full-evaluation cost.
//!
//! Modules:
//!
//! - [`profiles`] — checkpoint schedules, raw objective traces,
//!   normalization into `[0, 1]` quality, monotone performance profiles,
//!   rank percentiles.
//! - [`envelope`] — cutoff lines, top-fraction selection, margin
//!   policies and violation tests.
//! - [`racing`] — pool seeding, racing passes with early termination,
//!   the virtual-cost ledger.
//! - [`metrics`] — speedup and overlap accuracy measures, figure-series
//!   export, experiment summary rows.
//! - [`evaluators`] — the evaluator contract plus trace replay, a
//!   seeded synthetic generator, and a component-machine metaheuristic
//!   for facility-location instances.
//! - [`io`] — file formats: quality-matrix CSV with JSON meta sidecar,
//!   racing-result and truth JSON, figure-series CSV, instance JSON.
//!
//! All time in this crate is virtual (checkpoint ticks/milliseconds),
//! never wall-clock, so every race and ledger is exactly reproducible
//! from its seed.

pub mod envelope;
mod error;
pub mod evaluators;
pub mod io;
pub mod metrics;
pub mod profiles;
pub mod racing;

pub use error::{Error, Result};
