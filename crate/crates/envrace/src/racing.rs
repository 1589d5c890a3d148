//! The racing heuristic: seed a pool of fully evaluated configurations,
//! race everything else against the pool's cutoff line with early
//! termination, then give the early-terminated configurations a second
//! pass against the matured cutoff.
//!
//! A full run costs the final checkpoint time; a terminated run costs
//! only the time of the checkpoint where it was cut. Every cost is
//! virtual, so identical inputs produce bit-identical results.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::{pool_capacity, violates, worst_case_envelope, CutoffLine, MarginPolicy};
use crate::evaluators::Evaluator;
use crate::profiles::{CheckpointSchedule, ConfigId, PerformanceProfile};
use crate::{Error, Result};

/// Knobs of one racing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RacingParams {
    /// Fraction of configurations seeded into the pool (and the pool's
    /// capacity thereafter).
    pub pool_fraction: f64,
    pub margin: MarginPolicy,
    pub seed: u64,
    pub candidate_order: CandidateOrder,
    /// Total passes; pass `p > 1` re-races what pass `p - 1` terminated.
    pub passes: u32,
    /// Record every cutoff update into the result.
    #[serde(default)]
    pub record_cutoff_history: bool,
}

impl RacingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pool_fraction > 0.0 && self.pool_fraction <= 1.0) {
            return Err(Error::InvalidFraction(self.pool_fraction));
        }
        if self.passes < 1 {
            return Err(Error::InvalidParams("passes must be at least 1".into()));
        }
        self.margin.validate()
    }
}

impl Default for RacingParams {
    fn default() -> Self {
        RacingParams {
            pool_fraction: 0.01,
            margin: MarginPolicy::default(),
            seed: 0,
            candidate_order: CandidateOrder::IdOrder,
            passes: 2,
            record_cutoff_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrder {
    /// Ascending configuration id; the reproducible default.
    IdOrder,
    /// Shuffled with the run's seeded generator.
    Shuffled,
}

/// Fixed-capacity set of fully evaluated configurations. From the end
/// of seeding onward its size always equals its capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    members: Vec<PerformanceProfile>,
    capacity: usize,
}

impl Pool {
    fn new(members: Vec<PerformanceProfile>, capacity: usize) -> Self {
        debug_assert_eq!(members.len(), capacity);
        Pool { members, capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[PerformanceProfile] {
        &self.members
    }

    pub fn contains(&self, config: ConfigId) -> bool {
        self.members.iter().any(|p| p.config_id() == config)
    }

    /// Members sorted by `(final_quality, id)` — best first.
    pub fn ranked_entries(&self) -> Vec<PoolEntry> {
        let mut entries: Vec<PoolEntry> = self
            .members
            .iter()
            .map(|p| PoolEntry {
                config_id: p.config_id(),
                final_quality: p.final_quality(),
            })
            .collect();
        entries.sort_by(|a, b| {
            a.final_quality
                .total_cmp(&b.final_quality)
                .then(a.config_id.cmp(&b.config_id))
        });
        entries
    }

    /// Exact envelope of the current members, recomputed from scratch:
    /// evicting a bad member can lower the line, which an incremental
    /// max-merge cannot express.
    pub fn envelope(&self) -> CutoffLine {
        worst_case_envelope(self.members.iter()).expect("pool is never empty")
    }

    /// Adds a completed profile, then evicts the member with the worst
    /// final quality (ties evict the larger id). Returns the evicted id;
    /// a newcomer worse than everyone bounces straight back out.
    fn insert_and_evict(&mut self, profile: PerformanceProfile) -> ConfigId {
        self.members.push(profile);
        let worst = self
            .members
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                a.final_quality()
                    .total_cmp(&b.final_quality())
                    .then(a.config_id().cmp(&b.config_id()))
            })
            .map(|(i, _)| i)
            .expect("pool is never empty");
        self.members.swap_remove(worst).config_id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub config_id: ConfigId,
    pub final_quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Terminated,
}

/// Ledger entry for one run attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub config_id: ConfigId,
    /// 1-based; seeding runs are part of pass 1.
    pub pass: u32,
    pub status: RunStatus,
    /// Termination checkpoint, or the final index when completed.
    pub stop_checkpoint: usize,
    /// Always the schedule time of `stop_checkpoint`.
    pub virtual_cost_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffTrigger {
    Seeding,
    Completion,
}

/// One cutoff-line update: the pool it was recomputed from and the line
/// itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffEvent {
    pub trigger: CutoffTrigger,
    pub pass: u32,
    pub config_id: Option<ConfigId>,
    pub pool: Vec<ConfigId>,
    pub cutoff: CutoffLine,
}

/// Everything a racing run produced: the approximated top fraction, the
/// per-run ledger and the total virtual cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RacingResult {
    pub params: RacingParams,
    pub schedule: CheckpointSchedule,
    pub config_count: usize,
    /// Final pool sorted by `(final_quality, id)` — best first.
    pub pool: Vec<PoolEntry>,
    pub outcomes: Vec<RunOutcome>,
    pub total_virtual_cost_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_history: Option<Vec<CutoffEvent>>,
}

impl RacingResult {
    pub fn pool_ids(&self) -> Vec<ConfigId> {
        self.pool.iter().map(|e| e.config_id).collect()
    }
}

/// A racing run aborted by an evaluator failure; carries the ledger of
/// everything already paid for.
#[derive(Debug, thiserror::Error)]
#[error("racing aborted: {source}")]
pub struct RacingAbort {
    #[source]
    pub source: Error,
    pub outcomes: Vec<RunOutcome>,
}

/// Draws `ceil(pool_fraction * N)` distinct configurations uniformly,
/// runs each to the full budget and builds the initial cutoff line as
/// their combined worst-case envelope. Seed runs are appended to
/// `outcomes` as pass-1 completions.
pub fn seed_pool<E: Evaluator + ?Sized>(
    evaluator: &E,
    params: &RacingParams,
    rng: &mut ChaCha8Rng,
    outcomes: &mut Vec<RunOutcome>,
) -> Result<(Pool, CutoffLine)> {
    params.validate()?;
    let ids = evaluator.config_ids();
    if ids.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let capacity = pool_capacity(ids.len(), params.pool_fraction);
    let mut seed_ids: Vec<ConfigId> = rand::seq::index::sample(rng, ids.len(), capacity)
        .into_iter()
        .map(|i| ids[i])
        .collect();
    seed_ids.sort_unstable();

    let mut members = Vec::with_capacity(capacity);
    for &id in &seed_ids {
        let profile = run_full(evaluator, id)?;
        members.push(profile);
        outcomes.push(RunOutcome {
            config_id: id,
            pass: 1,
            status: RunStatus::Completed,
            stop_checkpoint: evaluator.schedule().final_index(),
            virtual_cost_ms: evaluator.schedule().full_budget_ms(),
        });
    }
    let pool = Pool::new(members, capacity);
    let cutoff = pool.envelope();
    Ok((pool, cutoff))
}

/// Races `candidates` in order against the current cutoff line.
///
/// Each candidate advances checkpoint by checkpoint; at every checkpoint
/// before the final one its partial profile is tested against the
/// margin. A violation terminates the run at that checkpoint's cost. A
/// run reaching the final checkpoint joins the pool, the worst member
/// (by final quality, ties evict the larger id) leaves, and the cutoff
/// line is recomputed from the new pool. Returns the terminated ids in
/// raced order.
#[allow(clippy::too_many_arguments)]
pub fn race_pass<E: Evaluator + ?Sized>(
    candidates: &[ConfigId],
    pool: &mut Pool,
    cutoff: &mut CutoffLine,
    evaluator: &E,
    params: &RacingParams,
    pass: u32,
    outcomes: &mut Vec<RunOutcome>,
    mut history: Option<&mut Vec<CutoffEvent>>,
) -> Result<Vec<ConfigId>> {
    let schedule = evaluator.schedule();
    let final_k = schedule.final_index();
    let mut terminated = Vec::new();

    for &id in candidates {
        let mut run = evaluator.start_run(id)?;
        let mut partial = Vec::with_capacity(schedule.len());
        let mut stopped = None;
        for k in 0..schedule.len() {
            partial.push(run.next_checkpoint()?);
            if k < final_k && violates(&partial, cutoff, &params.margin, k)? {
                stopped = Some(k);
                break;
            }
        }
        match stopped {
            Some(k) => {
                outcomes.push(RunOutcome {
                    config_id: id,
                    pass,
                    status: RunStatus::Terminated,
                    stop_checkpoint: k,
                    virtual_cost_ms: schedule.time_ms(k),
                });
                terminated.push(id);
            }
            None => {
                outcomes.push(RunOutcome {
                    config_id: id,
                    pass,
                    status: RunStatus::Completed,
                    stop_checkpoint: final_k,
                    virtual_cost_ms: schedule.full_budget_ms(),
                });
                let profile = PerformanceProfile::new(id, partial)?;
                pool.insert_and_evict(profile);
                *cutoff = pool.envelope();
                if let Some(h) = history.as_mut() {
                    h.push(CutoffEvent {
                        trigger: CutoffTrigger::Completion,
                        pass,
                        config_id: Some(id),
                        pool: pool.ranked_entries().iter().map(|e| e.config_id).collect(),
                        cutoff: cutoff.clone(),
                    });
                }
            }
        }
    }
    Ok(terminated)
}

/// Runs the full heuristic: seeding, a first pass over every untested
/// configuration, then (with `passes >= 2`) further passes over exactly
/// the configurations the previous pass terminated, in the same relative
/// order, continuing from the matured pool and cutoff. Reruns restart
/// from scratch and pay their full virtual cost again.
pub fn run_racing<E: Evaluator + ?Sized>(
    evaluator: &E,
    params: &RacingParams,
) -> Result<RacingResult, RacingAbort> {
    let mut outcomes = Vec::new();
    match run_racing_inner(evaluator, params, &mut outcomes) {
        Ok(result) => Ok(result),
        Err(source) => Err(RacingAbort { source, outcomes }),
    }
}

fn run_racing_inner<E: Evaluator + ?Sized>(
    evaluator: &E,
    params: &RacingParams,
    outcomes: &mut Vec<RunOutcome>,
) -> Result<RacingResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (mut pool, mut cutoff) = seed_pool(evaluator, params, &mut rng, outcomes)?;
    let mut history = params.record_cutoff_history.then(Vec::new);
    if let Some(h) = history.as_mut() {
        h.push(CutoffEvent {
            trigger: CutoffTrigger::Seeding,
            pass: 1,
            config_id: None,
            pool: pool.ranked_entries().iter().map(|e| e.config_id).collect(),
            cutoff: cutoff.clone(),
        });
    }

    let seeded: BTreeSet<ConfigId> = pool.members().iter().map(|p| p.config_id()).collect();
    let mut candidates: Vec<ConfigId> = evaluator
        .config_ids()
        .into_iter()
        .filter(|id| !seeded.contains(id))
        .collect();
    if params.candidate_order == CandidateOrder::Shuffled {
        candidates.shuffle(&mut rng);
    }

    for pass in 1..=params.passes {
        if candidates.is_empty() {
            break;
        }
        candidates = race_pass(
            &candidates,
            &mut pool,
            &mut cutoff,
            evaluator,
            params,
            pass,
            outcomes,
            history.as_mut(),
        )?;
    }

    let total = outcomes.iter().map(|o| o.virtual_cost_ms).sum();
    Ok(RacingResult {
        params: params.clone(),
        schedule: evaluator.schedule().clone(),
        config_count: evaluator.config_count(),
        pool: pool.ranked_entries(),
        outcomes: std::mem::take(outcomes),
        total_virtual_cost_ms: total,
        cutoff_history: history,
    })
}

fn run_full<E: Evaluator + ?Sized>(evaluator: &E, id: ConfigId) -> Result<PerformanceProfile> {
    let schedule_len = evaluator.schedule().len();
    let mut run = evaluator.start_run(id)?;
    let mut values = Vec::with_capacity(schedule_len);
    for _ in 0..schedule_len {
        values.push(run.next_checkpoint()?);
    }
    PerformanceProfile::new(id, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::top_fraction;
    use crate::evaluators::ReplayEvaluator;
    use crate::profiles::QualityMatrix;

    fn profile(id: u32, q: &[f64]) -> PerformanceProfile {
        PerformanceProfile::new(ConfigId(id), q.to_vec()).unwrap()
    }

    fn matrix(rows: &[(u32, &[f64])]) -> QualityMatrix {
        let count = rows[0].1.len();
        QualityMatrix::new(
            CheckpointSchedule::new(1, count).unwrap(),
            rows.iter().map(|(id, q)| profile(*id, q)).collect(),
        )
        .unwrap()
    }

    /// Hand-simulated five-config fixture: pool {3, 4}, candidates
    /// [0, 1, 2], multiplicative 1.2 margin over a 1/2/4 ms schedule.
    ///
    /// Trace, computed step by step before the implementation existed:
    /// cutoff starts at [0.6, 0.4, 0.35] (thresholds 0.72 / 0.48).
    /// - c0 = [0.9, ..]: 0.9 > 0.72, terminated at checkpoint 0, 1 ms.
    /// - c1 = [0.4, 0.35, 0.3]: survives both tests, completes (4 ms),
    ///   joins the pool; finals are c3 = 0.35, c4 = 0.2, c1 = 0.3, so c3
    ///   is evicted and the cutoff drops to [0.6, 0.35, 0.3].
    /// - c2 = [0.8, ..]: 0.8 > 0.72, terminated at checkpoint 0, 1 ms.
    #[test]
    fn race_pass_matches_the_hand_simulation() {
        let m = matrix(&[
            (0, &[0.9, 0.5, 0.1]),
            (1, &[0.4, 0.35, 0.3]),
            (2, &[0.8, 0.7, 0.6]),
            (3, &[0.5, 0.4, 0.35]),
            (4, &[0.6, 0.3, 0.2]),
        ]);
        let eval = ReplayEvaluator::new(&m);
        let mut pool = Pool::new(
            vec![
                m.profile(ConfigId(3)).unwrap().clone(),
                m.profile(ConfigId(4)).unwrap().clone(),
            ],
            2,
        );
        let mut cutoff = pool.envelope();
        assert_eq!(cutoff.values(), &[0.6, 0.4, 0.35]);

        let params = RacingParams {
            pool_fraction: 0.4,
            ..RacingParams::default()
        };
        let mut outcomes = Vec::new();
        let terminated = race_pass(
            &[ConfigId(0), ConfigId(1), ConfigId(2)],
            &mut pool,
            &mut cutoff,
            &eval,
            &params,
            1,
            &mut outcomes,
            None,
        )
        .unwrap();

        assert_eq!(terminated, vec![ConfigId(0), ConfigId(2)]);
        assert_eq!(cutoff.values(), &[0.6, 0.35, 0.3]);
        assert_eq!(
            pool.ranked_entries()
                .iter()
                .map(|e| e.config_id)
                .collect::<Vec<_>>(),
            vec![ConfigId(4), ConfigId(1)]
        );
        assert_eq!(
            outcomes,
            vec![
                RunOutcome {
                    config_id: ConfigId(0),
                    pass: 1,
                    status: RunStatus::Terminated,
                    stop_checkpoint: 0,
                    virtual_cost_ms: 1,
                },
                RunOutcome {
                    config_id: ConfigId(1),
                    pass: 1,
                    status: RunStatus::Completed,
                    stop_checkpoint: 2,
                    virtual_cost_ms: 4,
                },
                RunOutcome {
                    config_id: ConfigId(2),
                    pass: 1,
                    status: RunStatus::Terminated,
                    stop_checkpoint: 0,
                    virtual_cost_ms: 1,
                },
            ]
        );
    }

    #[test]
    fn candidate_identical_to_a_pool_member_survives() {
        // Never strictly above the envelope, so it completes; the pool
        // then churns purely on final quality (tie evicts the larger id).
        let m = matrix(&[(0, &[0.5, 0.2, 0.1]), (1, &[0.5, 0.2, 0.1])]);
        let eval = ReplayEvaluator::new(&m);
        let mut pool = Pool::new(vec![m.profile(ConfigId(1)).unwrap().clone()], 1);
        let mut cutoff = pool.envelope();
        let params = RacingParams::default();
        let mut outcomes = Vec::new();
        let terminated = race_pass(
            &[ConfigId(0)],
            &mut pool,
            &mut cutoff,
            &eval,
            &params,
            1,
            &mut outcomes,
            None,
        )
        .unwrap();
        assert!(terminated.is_empty());
        assert_eq!(outcomes[0].status, RunStatus::Completed);
        // Equal finals: the larger id (1) is evicted.
        assert_eq!(pool.ranked_entries()[0].config_id, ConfigId(0));
    }

    #[test]
    fn seed_pool_sizes_and_costs() {
        // Single config: ceil(0.01 * 1) = 1, the pool is that config.
        let m = matrix(&[(0, &[0.5, 0.2, 0.1])]);
        let eval = ReplayEvaluator::new(&m);
        let params = RacingParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut outcomes = Vec::new();
        let (pool, cutoff) = seed_pool(&eval, &params, &mut rng, &mut outcomes).unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(cutoff.values(), m.profile(ConfigId(0)).unwrap().quality());
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].virtual_cost_ms, 4);
    }

    #[test]
    fn seed_pool_of_400_configs_costs_four_full_runs() {
        let schedule = CheckpointSchedule::default();
        let profiles: Vec<PerformanceProfile> = (0..400)
            .map(|i| {
                let v = i as f64 / 400.0;
                PerformanceProfile::new(ConfigId(i), vec![v; schedule.len()]).unwrap()
            })
            .collect();
        let m = QualityMatrix::new(schedule, profiles).unwrap();
        let eval = ReplayEvaluator::new(&m);
        let params = RacingParams {
            seed: 9,
            ..RacingParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut outcomes = Vec::new();
        let (pool, _) = seed_pool(&eval, &params, &mut rng, &mut outcomes).unwrap();
        assert_eq!(pool.len(), 4);
        assert_eq!(outcomes.iter().map(|o| o.virtual_cost_ms).sum::<u64>(), 4 * 1024);
    }

    #[test]
    fn uniform_matrix_races_with_no_terminations() {
        let schedule = CheckpointSchedule::default();
        let profiles: Vec<PerformanceProfile> = (0..8)
            .map(|i| PerformanceProfile::new(ConfigId(i), vec![0.5; schedule.len()]).unwrap())
            .collect();
        let m = QualityMatrix::new(schedule, profiles).unwrap();
        let eval = ReplayEvaluator::new(&m);
        let result = run_racing(&eval, &RacingParams::default()).unwrap();
        assert!(result
            .outcomes
            .iter()
            .all(|o| o.status == RunStatus::Completed));
        assert!(result.outcomes.iter().all(|o| o.pass == 1));
        assert_eq!(result.total_virtual_cost_ms, 8 * 1024);
    }

    #[test]
    fn racing_is_deterministic() {
        let m = matrix(&[
            (0, &[0.9, 0.5, 0.1]),
            (1, &[0.4, 0.35, 0.3]),
            (2, &[0.8, 0.7, 0.6]),
            (3, &[0.5, 0.4, 0.35]),
            (4, &[0.6, 0.3, 0.2]),
        ]);
        let eval = ReplayEvaluator::new(&m);
        let params = RacingParams {
            pool_fraction: 0.4,
            seed: 17,
            record_cutoff_history: true,
            ..RacingParams::default()
        };
        let a = run_racing(&eval, &params).unwrap();
        let b = run_racing(&eval, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn margin_off_recovers_the_exact_top_fraction() {
        let m = matrix(&[
            (0, &[0.9, 0.5, 0.1]),
            (1, &[0.4, 0.35, 0.3]),
            (2, &[0.8, 0.7, 0.6]),
            (3, &[0.5, 0.4, 0.35]),
            (4, &[0.6, 0.3, 0.2]),
        ]);
        let eval = ReplayEvaluator::new(&m);
        let params = RacingParams {
            pool_fraction: 0.4,
            margin: MarginPolicy::Off,
            seed: 3,
            ..RacingParams::default()
        };
        let result = run_racing(&eval, &params).unwrap();
        assert_eq!(result.pool_ids(), top_fraction(&m, 0.4).unwrap());
        assert_eq!(result.total_virtual_cost_ms, 5 * 4);
    }

    #[test]
    fn cutoff_history_entries_match_recomputed_envelopes() {
        let m = matrix(&[
            (0, &[0.9, 0.5, 0.1]),
            (1, &[0.4, 0.35, 0.3]),
            (2, &[0.8, 0.7, 0.6]),
            (3, &[0.5, 0.4, 0.35]),
            (4, &[0.6, 0.3, 0.2]),
        ]);
        let eval = ReplayEvaluator::new(&m);
        let params = RacingParams {
            pool_fraction: 0.4,
            seed: 5,
            record_cutoff_history: true,
            ..RacingParams::default()
        };
        let result = run_racing(&eval, &params).unwrap();
        for event in result.cutoff_history.as_deref().unwrap() {
            let recomputed = worst_case_envelope(
                event
                    .pool
                    .iter()
                    .map(|&id| m.profile(id).unwrap()),
            )
            .unwrap();
            assert_eq!(event.cutoff, recomputed);
        }
    }

    #[test]
    fn empty_evaluator_is_rejected_with_empty_ledger() {
        let m = matrix(&[(0, &[0.5, 0.2])]);
        let eval = ReplayEvaluator::new(&m);
        let params = RacingParams {
            pool_fraction: 0.0,
            ..RacingParams::default()
        };
        let abort = run_racing(&eval, &params).unwrap_err();
        assert!(matches!(abort.source, Error::InvalidFraction(_)));
        assert!(abort.outcomes.is_empty());
    }
}
