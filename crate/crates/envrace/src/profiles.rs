//! Checkpoint schedules, raw objective traces, quality normalization and
//! monotone performance profiles.
//!
//! A *performance profile* is a configuration's best-so-far solution
//! quality sampled at geometric virtual-time checkpoints, scaled into
//! `[0, 1]` per instance and averaged over instances. Quality 0 means
//! the configuration matched the best solution any configuration found
//! on every instance within the full budget; quality 1 means it matched
//! the worst.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identifier of one configuration (the C-space element).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ConfigId(pub u32);

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for ConfigId {
    fn from(id: u32) -> Self {
        ConfigId(id)
    }
}

/// Geometric checkpoint schedule: `times[k] = base_time_ms << k`.
///
/// The final checkpoint carries the full run budget; everything before
/// it is a short-run observation point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointSchedule {
    base_time_ms: u64,
    count: usize,
}

impl CheckpointSchedule {
    pub const DEFAULT_BASE_MS: u64 = 1;
    pub const DEFAULT_COUNT: usize = 11;

    /// At least two checkpoints (one short, one final); times must fit in u64.
    pub fn new(base_time_ms: u64, count: usize) -> Result<Self> {
        if base_time_ms == 0 {
            return Err(Error::InvalidSchedule("base time must be positive".into()));
        }
        if count < 2 {
            return Err(Error::InvalidSchedule(format!(
                "need at least 2 checkpoints, got {count}"
            )));
        }
        if count > 48 || base_time_ms.checked_mul(1u64 << (count - 1)).is_none() {
            return Err(Error::InvalidSchedule(format!(
                "schedule of {count} doublings from {base_time_ms} ms overflows"
            )));
        }
        Ok(CheckpointSchedule {
            base_time_ms,
            count,
        })
    }

    /// Reconstructs a schedule from explicit times, enforcing the
    /// strictly-doubling invariant.
    pub fn from_times(times: &[u64]) -> Result<Self> {
        let Some(&base) = times.first() else {
            return Err(Error::InvalidSchedule("no checkpoint times".into()));
        };
        for (k, w) in times.windows(2).enumerate() {
            if w[1] != w[0].saturating_mul(2) {
                return Err(Error::InvalidSchedule(format!(
                    "time {} at checkpoint {} is not double its predecessor {}",
                    w[1],
                    k + 1,
                    w[0]
                )));
            }
        }
        CheckpointSchedule::new(base, times.len())
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn base_time_ms(&self) -> u64 {
        self.base_time_ms
    }

    /// Virtual time of checkpoint `k`.
    pub fn time_ms(&self, k: usize) -> u64 {
        debug_assert!(k < self.count);
        self.base_time_ms << k
    }

    pub fn times_ms(&self) -> Vec<u64> {
        (0..self.count).map(|k| self.time_ms(k)).collect()
    }

    pub fn final_index(&self) -> usize {
        self.count - 1
    }

    /// Full budget of one run: the final checkpoint time.
    pub fn full_budget_ms(&self) -> u64 {
        self.time_ms(self.count - 1)
    }
}

impl Default for CheckpointSchedule {
    /// 1, 2, 4, ..., 1024 virtual milliseconds.
    fn default() -> Self {
        CheckpointSchedule {
            base_time_ms: Self::DEFAULT_BASE_MS,
            count: Self::DEFAULT_COUNT,
        }
    }
}

/// Raw best-so-far objective values (minimization, arbitrary scale) for
/// every configuration on every instance at every checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTraceSet {
    schedule: CheckpointSchedule,
    instances: Vec<String>,
    configs: Vec<ConfigId>,
    /// `objective[config][instance][checkpoint]`
    objective: Vec<Vec<Vec<f64>>>,
}

impl RawTraceSet {
    /// All three index dimensions must be dense and per-run traces
    /// non-increasing (best-so-far recording).
    pub fn new(
        schedule: CheckpointSchedule,
        instances: Vec<String>,
        configs: Vec<ConfigId>,
        objective: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if instances.is_empty() || configs.is_empty() {
            return Err(Error::EmptyTraceSet);
        }
        if objective.len() != configs.len() {
            return Err(Error::InvalidParams(format!(
                "objective has {} config rows, expected {}",
                objective.len(),
                configs.len()
            )));
        }
        for (c, per_instance) in objective.iter().enumerate() {
            if per_instance.len() != instances.len() {
                return Err(Error::InvalidParams(format!(
                    "config {} has {} instance traces, expected {}",
                    configs[c],
                    per_instance.len(),
                    instances.len()
                )));
            }
            for (i, trace) in per_instance.iter().enumerate() {
                if trace.len() != schedule.len() {
                    return Err(Error::ProfileLengthMismatch {
                        config: configs[c],
                        got: trace.len(),
                        want: schedule.len(),
                    });
                }
                for (k, w) in trace.windows(2).enumerate() {
                    if w[1] > w[0] {
                        return Err(Error::NonMonotoneTrace {
                            config: configs[c],
                            instance: instances[i].clone(),
                            checkpoint: k + 1,
                        });
                    }
                }
            }
        }
        let mut seen = configs.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateConfig(w[0]));
        }
        Ok(RawTraceSet {
            schedule,
            instances,
            configs,
            objective,
        })
    }

    pub fn schedule(&self) -> &CheckpointSchedule {
        &self.schedule
    }

    pub fn instances(&self) -> &[String] {
        &self.instances
    }

    pub fn configs(&self) -> &[ConfigId] {
        &self.configs
    }

    pub fn objective(&self, config_index: usize, instance_index: usize) -> &[f64] {
        &self.objective[config_index][instance_index]
    }
}

/// One configuration's normalized quality at every checkpoint.
///
/// Values lie in `[0, 1]` and are monotone non-increasing (best-so-far).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceProfile {
    config_id: ConfigId,
    quality: Vec<f64>,
}

impl PerformanceProfile {
    /// Rejects values outside `[0, 1]` or any increase along checkpoints.
    pub fn new(config_id: ConfigId, quality: Vec<f64>) -> Result<Self> {
        for (k, &v) in quality.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::QualityOutOfRange {
                    config: config_id,
                    checkpoint: k,
                    value: v,
                });
            }
        }
        if let Some(k) = first_increase(&quality) {
            return Err(Error::NonMonotoneProfile {
                config: config_id,
                checkpoint: k,
            });
        }
        Ok(PerformanceProfile { config_id, quality })
    }

    /// Validates the `[0, 1]` range and forces monotonicity via
    /// [`enforce_monotone`].
    pub fn enforced(config_id: ConfigId, quality: Vec<f64>) -> Result<Self> {
        for (k, &v) in quality.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::QualityOutOfRange {
                    config: config_id,
                    checkpoint: k,
                    value: v,
                });
            }
        }
        Ok(PerformanceProfile {
            config_id,
            quality: enforce_monotone(&quality),
        })
    }

    pub fn config_id(&self) -> ConfigId {
        self.config_id
    }

    pub fn quality(&self) -> &[f64] {
        &self.quality
    }

    pub fn len(&self) -> usize {
        self.quality.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quality.is_empty()
    }

    /// Quality at the final checkpoint: the L-space value.
    pub fn final_quality(&self) -> f64 {
        *self.quality.last().expect("profile is never empty")
    }

    pub(crate) fn set_quality(&mut self, k: usize, value: f64) {
        self.quality[k] = value;
    }
}

fn first_increase(values: &[f64]) -> Option<usize> {
    values.windows(2).position(|w| w[1] > w[0]).map(|k| k + 1)
}

/// Running minimum: `out[k] = min(values[0..=k])`. Idempotent; the
/// identity on already-monotone input.
pub fn enforce_monotone(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// All configurations' profiles over one shared schedule.
///
/// Checkpoints before the last form the S-space (short-run results);
/// the final checkpoint is the L-space (long-run results). Profiles are
/// kept sorted by configuration id.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityMatrix {
    schedule: CheckpointSchedule,
    profiles: Vec<PerformanceProfile>,
}

impl QualityMatrix {
    pub fn new(schedule: CheckpointSchedule, mut profiles: Vec<PerformanceProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        for p in &profiles {
            if p.len() != schedule.len() {
                return Err(Error::ProfileLengthMismatch {
                    config: p.config_id(),
                    got: p.len(),
                    want: schedule.len(),
                });
            }
        }
        profiles.sort_by_key(|p| p.config_id());
        if let Some(w) = profiles.windows(2).find(|w| w[0].config_id() == w[1].config_id()) {
            return Err(Error::DuplicateConfig(w[0].config_id()));
        }
        Ok(QualityMatrix { schedule, profiles })
    }

    pub fn schedule(&self) -> &CheckpointSchedule {
        &self.schedule
    }

    /// Sorted by configuration id.
    pub fn profiles(&self) -> &[PerformanceProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn config_ids(&self) -> Vec<ConfigId> {
        self.profiles.iter().map(|p| p.config_id()).collect()
    }

    pub fn profile(&self, config: ConfigId) -> Result<&PerformanceProfile> {
        self.profiles
            .binary_search_by_key(&config, |p| p.config_id())
            .map(|i| &self.profiles[i])
            .map_err(|_| Error::UnknownConfig(config))
    }
}

/// Which cells feed each instance's min/max when scaling objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizeBounds {
    /// Pool the bounds over all configurations *and* all checkpoints:
    /// quality 0/1 refers to the best/worst solution seen anywhere
    /// within the full budget. The default.
    #[default]
    AllCheckpoints,
    /// Bounds over final-checkpoint values only; earlier objectives may
    /// exceed the upper bound and are clamped to quality 1.
    FinalOnly,
}

/// Scales objectives into `[0, 1]` per instance and averages over
/// instances, yielding one monotone profile per configuration.
///
/// Per instance, the best (minimum) objective maps to 0 and the worst
/// (maximum) to 1. A zero-range instance (all values equal) maps to 0
/// everywhere: every configuration did as well as any other.
pub fn normalize(raw: &RawTraceSet) -> Result<QualityMatrix> {
    normalize_with(raw, NormalizeBounds::AllCheckpoints)
}

/// [`normalize`] with an explicit bounds rule.
pub fn normalize_with(raw: &RawTraceSet, bounds: NormalizeBounds) -> Result<QualityMatrix> {
    let n_instances = raw.instances.len();
    let n_checkpoints = raw.schedule.len();

    // Per-instance bounds over every configuration.
    let mut lo = vec![f64::INFINITY; n_instances];
    let mut hi = vec![f64::NEG_INFINITY; n_instances];
    for per_instance in &raw.objective {
        for (i, trace) in per_instance.iter().enumerate() {
            match bounds {
                NormalizeBounds::AllCheckpoints => {
                    for &v in trace {
                        lo[i] = lo[i].min(v);
                        hi[i] = hi[i].max(v);
                    }
                }
                NormalizeBounds::FinalOnly => {
                    let v = trace[n_checkpoints - 1];
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
            }
        }
    }

    let mut profiles = Vec::with_capacity(raw.configs.len());
    for (c, per_instance) in raw.objective.iter().enumerate() {
        let mut quality = vec![0.0; n_checkpoints];
        for (i, trace) in per_instance.iter().enumerate() {
            let range = hi[i] - lo[i];
            for (k, &v) in trace.iter().enumerate() {
                let scaled = if range > 0.0 {
                    ((v - lo[i]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                quality[k] += scaled;
            }
        }
        for q in &mut quality {
            *q /= n_instances as f64;
        }
        profiles.push(PerformanceProfile::new(raw.configs[c], quality)?);
    }
    QualityMatrix::new(raw.schedule.clone(), profiles)
}

/// Percentage of configurations strictly better than `config` at
/// checkpoint `k`; ties share the lower rank. In `[0, 100)`.
pub fn rank_percentile(matrix: &QualityMatrix, config: ConfigId, k: usize) -> Result<f64> {
    if k >= matrix.schedule.len() {
        return Err(Error::CheckpointOutOfRange {
            index: k,
            count: matrix.schedule.len(),
        });
    }
    let own = matrix.profile(config)?.quality()[k];
    let better = matrix
        .profiles
        .iter()
        .filter(|p| p.quality()[k] < own)
        .count();
    Ok(100.0 * better as f64 / matrix.len() as f64)
}
