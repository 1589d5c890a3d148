//! Configuration evaluators: the contract the racer consumes, plus
//! three ways to fulfil it — quality-matrix replay, a seeded synthetic
//! generator, and a component-machine metaheuristic on facility-location
//! instances.

mod cmcs;
mod replay;
mod splp;
mod synthetic;

pub use cmcs::{
    cmcs_evaluator, cmcs_trace, default_library, enumerate_cmcs_configurations, CmcsConfiguration,
    CmcsEvaluator, Component,
};
pub use replay::ReplayEvaluator;
pub use splp::{generate_splp_instance, splp_objective, SplpInstance};
pub use synthetic::{generate_synthetic, SyntheticParams};

use crate::profiles::{CheckpointSchedule, ConfigId};
use crate::Result;

/// Supplies configuration runs to the racer.
///
/// Implementations must be deterministic (the same configuration id
/// yields the same full profile on every rerun) and per-run monotone
/// (quality never increases along checkpoints).
pub trait Evaluator {
    fn schedule(&self) -> &CheckpointSchedule;

    /// All configuration ids, ascending.
    fn config_ids(&self) -> Vec<ConfigId>;

    fn config_count(&self) -> usize {
        self.config_ids().len()
    }

    /// Starts a fresh run of one configuration. Runs are resumable
    /// checkpoint by checkpoint and restartable from scratch.
    fn start_run(&self, config: ConfigId) -> Result<Box<dyn ProfileRun + '_>>;
}

/// One in-progress run, advanced a checkpoint at a time.
pub trait ProfileRun {
    /// Advances to the next checkpoint and returns the quality there.
    /// Called at most `schedule().len()` times per run.
    fn next_checkpoint(&mut self) -> Result<f64>;
}
