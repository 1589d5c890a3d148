//! A three-slot component machine over facility-location local search.
//!
//! A configuration holds three component slots plus deterministic
//! transition maps: after applying the current slot's component to the
//! incumbent, control moves to `on_improve[slot]` if the objective
//! strictly improved and to `on_fail[slot]` otherwise. Execution starts
//! at slot 0; one component application costs one virtual tick, and the
//! best-so-far objective is recorded at tick counts equal to the
//! checkpoint times.
//!
//! "Meaningful" configurations are those whose three slots are all
//! reachable from slot 0 through the transition graph, deduplicated to
//! a canonical form under relabeling of slots 1 and 2 (slot 0 is the
//! start and cannot be relabeled).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluators::replay::ReplayRun;
use crate::evaluators::splp::SplpState;
use crate::evaluators::{Evaluator, ProfileRun, SplpInstance};
use crate::profiles::{normalize, CheckpointSchedule, ConfigId, QualityMatrix, RawTraceSet};
use crate::{Error, Result};

/// Local-search and perturbation components over an SPLP open set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    /// Opens the first closed facility (random scan start) that improves.
    OpenFirstImprovement,
    /// Closes the first open facility (random scan start) that improves.
    CloseFirstImprovement,
    /// Applies the best improving (close, open) exchange, scanning all pairs.
    SwapBestImprovement,
    /// Opens a uniformly random closed facility, improving or not.
    RandomOpen,
    /// Closes a uniformly random open facility, improving or not.
    RandomClose,
    /// Three random exchanges in one application.
    MultiSwapPerturbation,
}

/// The fixed default library, in enumeration order.
pub fn default_library() -> Vec<Component> {
    vec![
        Component::OpenFirstImprovement,
        Component::CloseFirstImprovement,
        Component::SwapBestImprovement,
        Component::RandomOpen,
        Component::RandomClose,
        Component::MultiSwapPerturbation,
    ]
}

/// One C-space element: three component slots with deterministic
/// success/failure transitions. Slot 0 is the start slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CmcsConfiguration {
    pub components: [Component; 3],
    pub on_improve: [usize; 3],
    pub on_fail: [usize; 3],
}

impl CmcsConfiguration {
    /// All three slots reachable from slot 0.
    pub fn is_meaningful(&self) -> bool {
        let mut seen = [false; 3];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for t in [self.on_improve[s], self.on_fail[s]] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen.iter().all(|&v| v)
    }

    /// The same machine with slots 1 and 2 relabeled.
    pub fn relabeled(&self) -> Self {
        const PI: [usize; 3] = [0, 2, 1];
        let mut components = [self.components[0]; 3];
        let mut on_improve = [0; 3];
        let mut on_fail = [0; 3];
        for s in 0..3 {
            components[PI[s]] = self.components[s];
            on_improve[PI[s]] = PI[self.on_improve[s]];
            on_fail[PI[s]] = PI[self.on_fail[s]];
        }
        CmcsConfiguration {
            components,
            on_improve,
            on_fail,
        }
    }

    /// Lexicographically no larger than its relabeling.
    pub fn is_canonical(&self) -> bool {
        self.key() <= self.relabeled().key()
    }

    fn key(&self) -> ([Component; 3], [usize; 3], [usize; 3]) {
        (self.components, self.on_improve, self.on_fail)
    }
}

/// Every meaningful, canonical configuration over `library`, in
/// lexicographic order of (components, on_improve, on_fail). The count
/// is `216 * L^3` for a library of `L` distinct components.
pub fn enumerate_cmcs_configurations(library: &[Component]) -> Result<Vec<CmcsConfiguration>> {
    if library.is_empty() {
        return Err(Error::InvalidParams("component library is empty".into()));
    }
    let mut lib = library.to_vec();
    lib.sort_unstable();
    lib.dedup();

    let mut out = Vec::new();
    let slots: Vec<[usize; 3]> = (0..27)
        .map(|i| [i / 9, (i / 3) % 3, i % 3])
        .collect();
    for &c0 in &lib {
        for &c1 in &lib {
            for &c2 in &lib {
                for on_improve in &slots {
                    for on_fail in &slots {
                        let cfg = CmcsConfiguration {
                            components: [c0, c1, c2],
                            on_improve: *on_improve,
                            on_fail: *on_fail,
                        };
                        if cfg.is_meaningful() && cfg.is_canonical() {
                            out.push(cfg);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One machine execution on one instance.
struct MachineRun<'a> {
    state: SplpState<'a>,
    config: &'a CmcsConfiguration,
    rng: ChaCha8Rng,
    slot: usize,
    best: f64,
}

impl<'a> MachineRun<'a> {
    fn new(instance: &'a SplpInstance, config: &'a CmcsConfiguration, seed: u64) -> Self {
        let state = SplpState::all_open(instance);
        let best = state.objective();
        MachineRun {
            state,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            slot: 0,
            best,
        }
    }

    fn best(&self) -> f64 {
        self.best
    }

    /// One component application: one virtual tick.
    fn tick(&mut self) {
        let before = self.state.objective();
        self.apply(self.config.components[self.slot]);
        let after = self.state.objective();
        if after < self.best {
            self.best = after;
        }
        self.slot = if after < before {
            self.config.on_improve[self.slot]
        } else {
            self.config.on_fail[self.slot]
        };
    }

    fn apply(&mut self, component: Component) {
        match component {
            Component::OpenFirstImprovement => {
                let n = self.state.facilities();
                let start = self.rng.random_range(0..n);
                for i in 0..n {
                    let f = (start + i) % n;
                    if !self.state.is_open(f) && self.state.open_delta(f) < 0.0 {
                        self.state.apply_open(f);
                        return;
                    }
                }
            }
            Component::CloseFirstImprovement => {
                if self.state.open_count() < 2 {
                    return;
                }
                let n = self.state.facilities();
                let start = self.rng.random_range(0..n);
                for i in 0..n {
                    let f = (start + i) % n;
                    if self.state.is_open(f) && self.state.close_delta(f) < 0.0 {
                        self.state.apply_close(f);
                        return;
                    }
                }
            }
            Component::SwapBestImprovement => {
                let mut best_move: Option<(f64, usize, usize)> = None;
                for out in 0..self.state.facilities() {
                    if !self.state.is_open(out) {
                        continue;
                    }
                    for in_ in 0..self.state.facilities() {
                        if self.state.is_open(in_) {
                            continue;
                        }
                        let delta = self.state.swap_delta(out, in_);
                        if delta < 0.0 && best_move.is_none_or(|(d, _, _)| delta < d) {
                            best_move = Some((delta, out, in_));
                        }
                    }
                }
                if let Some((_, out, in_)) = best_move {
                    self.state.apply_open(in_);
                    self.state.apply_close(out);
                }
            }
            Component::RandomOpen => {
                let closed: Vec<usize> = (0..self.state.facilities())
                    .filter(|&f| !self.state.is_open(f))
                    .collect();
                if closed.is_empty() {
                    return;
                }
                let f = closed[self.rng.random_range(0..closed.len())];
                self.state.apply_open(f);
            }
            Component::RandomClose => {
                if self.state.open_count() < 2 {
                    return;
                }
                let open = self.state.open_facilities();
                let f = open[self.rng.random_range(0..open.len())];
                self.state.apply_close(f);
            }
            Component::MultiSwapPerturbation => {
                for _ in 0..3 {
                    let closed: Vec<usize> = (0..self.state.facilities())
                        .filter(|&f| !self.state.is_open(f))
                        .collect();
                    if closed.is_empty() || self.state.open_count() < 2 {
                        continue;
                    }
                    let open = self.state.open_facilities();
                    let out = open[self.rng.random_range(0..open.len())];
                    let in_ = closed[self.rng.random_range(0..closed.len())];
                    self.state.apply_open(in_);
                    self.state.apply_close(out);
                }
            }
        }
    }
}

/// Per-run seed, split from the instance seed and the configuration
/// index with a splitmix64 finalizer.
fn run_seed(instance_seed: u64, config_index: u32) -> u64 {
    splitmix64(instance_seed ^ (config_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Best-so-far objective of one run sampled at the schedule's tick counts.
fn trace_run(
    instance: &SplpInstance,
    config: &CmcsConfiguration,
    config_index: u32,
    times: &[u64],
) -> Vec<f64> {
    let mut run = MachineRun::new(instance, config, run_seed(instance.seed, config_index));
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    let budget = *times.last().expect("schedule is never empty");
    for tick in 1..=budget {
        run.tick();
        while next < times.len() && times[next] == tick {
            out.push(run.best());
            next += 1;
        }
    }
    out
}

/// Runs every configuration's machine on every instance and collects
/// the raw best-so-far objective traces. Runs are independent and
/// evaluated in parallel; configuration `i` gets id `i`.
pub fn cmcs_trace(
    instances: &[SplpInstance],
    configs: &[CmcsConfiguration],
    schedule: &CheckpointSchedule,
) -> Result<RawTraceSet> {
    if instances.is_empty() || configs.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let times = schedule.times_ms();
    let objective: Vec<Vec<Vec<f64>>> = configs
        .par_iter()
        .enumerate()
        .map(|(ci, config)| {
            instances
                .iter()
                .map(|instance| trace_run(instance, config, ci as u32, &times))
                .collect()
        })
        .collect();
    RawTraceSet::new(
        schedule.clone(),
        (0..instances.len()).map(|i| format!("instance-{i}")).collect(),
        (0..configs.len()).map(|i| ConfigId(i as u32)).collect(),
        objective,
    )
}

/// Evaluator backed by the normalized traces of a configuration set.
#[derive(Debug, Clone)]
pub struct CmcsEvaluator {
    matrix: QualityMatrix,
}

impl CmcsEvaluator {
    pub fn matrix(&self) -> &QualityMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> QualityMatrix {
        self.matrix
    }
}

/// Traces all (configuration, instance) runs, normalizes the objectives
/// into `[0, 1]` quality and wraps the result for the racer.
pub fn cmcs_evaluator(
    instances: &[SplpInstance],
    configs: &[CmcsConfiguration],
    schedule: &CheckpointSchedule,
) -> Result<CmcsEvaluator> {
    let matrix = normalize(&cmcs_trace(instances, configs, schedule)?)?;
    Ok(CmcsEvaluator { matrix })
}

impl Evaluator for CmcsEvaluator {
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
        Ok(Box::new(ReplayRun::new(config, profile.quality())))
    }
}
