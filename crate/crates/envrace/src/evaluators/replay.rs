//! Replays a stored quality matrix through the evaluator contract.
//!
//! Replay makes exhaustive ground truth cheap: racing a replayed matrix
//! with violation disabled must return exactly the matrix's top
//! fraction, and the virtual-cost ledger depends only on checkpoint
//! times, never on how fast the replay itself is.

use crate::evaluators::{Evaluator, ProfileRun};
use crate::profiles::{CheckpointSchedule, ConfigId, QualityMatrix};
use crate::{Error, Result};

/// Evaluator backed by a fully materialized [`QualityMatrix`].
#[derive(Debug, Clone, Copy)]
pub struct ReplayEvaluator<'m> {
    matrix: &'m QualityMatrix,
}

impl<'m> ReplayEvaluator<'m> {
    pub fn new(matrix: &'m QualityMatrix) -> Self {
        ReplayEvaluator { matrix }
    }

    pub fn matrix(&self) -> &'m QualityMatrix {
        self.matrix
    }
}

impl Evaluator for ReplayEvaluator<'_> {
    fn schedule(&self) -> &CheckpointSchedule {
        self.matrix.schedule()
    }

    fn config_ids(&self) -> Vec<ConfigId> {
        self.matrix.config_ids()
    }

    fn config_count(&self) -> usize {
        self.matrix.len()
    }

    fn start_run(&self, config: ConfigId) -> Result<Box<dyn ProfileRun + '_>> {
        let profile = self.matrix.profile(config)?;
        Ok(Box::new(ReplayRun {
            config,
            values: profile.quality(),
            cursor: 0,
        }))
    }
}

pub(crate) struct ReplayRun<'a> {
    config: ConfigId,
    values: &'a [f64],
    cursor: usize,
}

impl<'a> ReplayRun<'a> {
    pub(crate) fn new(config: ConfigId, values: &'a [f64]) -> Self {
        ReplayRun {
            config,
            values,
            cursor: 0,
        }
    }
}

impl ProfileRun for ReplayRun<'_> {
    fn next_checkpoint(&mut self) -> Result<f64> {
        let Some(&q) = self.values.get(self.cursor) else {
            return Err(Error::Evaluator {
                config: self.config,
                message: format!("run advanced past its {} checkpoints", self.values.len()),
            });
        };
        self.cursor += 1;
        Ok(q)
    }
}
