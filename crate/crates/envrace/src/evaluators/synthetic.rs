//! Seeded synthetic quality matrices with a controllable link between
//! short-run and long-run performance.
//!
//! Construction, per configuration `c` over the default 11-checkpoint
//! schedule (checkpoint index `k`):
//!
//! 1. Draw `z1, z2` independent standard normals from one ChaCha8
//!    stream seeded by `params.seed` (per configuration: `z1`, `z2`,
//!    then one noise normal per checkpoint, in that order).
//! 2. Final quality `F_c = Phi(z1)` (uniform marginal on `[0, 1]`).
//! 3. Convergence rate `r_c = RATE_MIN + (RATE_MAX - RATE_MIN) *
//!    Phi(-rho * z1 + sqrt(1 - rho^2) * z2)` — a Gaussian copula giving
//!    `r_c` rank correlation `~rho` with `(1 - F_c)`: the better a
//!    configuration ends, the faster it tends to converge.
//! 4. `quality_c(t_k) = clamp01(F_c + (1 - F_c) * exp(-r_c * k) +
//!    eps_{c,k} * sigma)`, then the running minimum.
//!
//! Exactly one configuration attains the minimum final quality; ties
//! are perturbed deterministically by one-ulp nudges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::profiles::{
    enforce_monotone, CheckpointSchedule, ConfigId, PerformanceProfile, QualityMatrix,
};
use crate::{Error, Result};

/// Slowest and fastest convergence rates the copula maps onto.
pub const RATE_MIN: f64 = 0.1;
pub const RATE_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub configs: usize,
    /// Rank correlation between early and final performance, in [-1, 1].
    pub correlation: f64,
    /// Per-checkpoint Gaussian noise scale, >= 0.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.configs < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 configurations, got {}",
                self.configs
            )));
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return Err(Error::InvalidParams(format!(
                "correlation {} is outside [-1, 1]",
                self.correlation
            )));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::InvalidParams(format!(
                "noise must be finite and non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Generates a quality matrix over the default schedule.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<QualityMatrix> {
    params.validate()?;
    let schedule = CheckpointSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut profiles = Vec::with_capacity(params.configs);
    for c in 0..params.configs {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (f_final, rate) = copula_marginals(z1, z2, params.correlation);
        let noise: Vec<f64> = (0..schedule.len())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let values = profile_values(f_final, rate, &noise, params.noise);
        profiles.push(PerformanceProfile::new(
            ConfigId(c as u32),
            enforce_monotone(&values),
        )?);
    }
    ensure_unique_min_final(&mut profiles);
    QualityMatrix::new(schedule, profiles)
}

/// Maps a correlated normal pair to (final quality, rate).
pub(crate) fn copula_marginals(z1: f64, z2: f64, rho: f64) -> (f64, f64) {
    let f_final = std_normal_cdf(z1);
    let z_rate = -rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2;
    let rate = RATE_MIN + (RATE_MAX - RATE_MIN) * std_normal_cdf(z_rate);
    (f_final, rate)
}

/// The raw (pre-monotone) curve: `clamp01(F + (1 - F) e^{-r k} + eps_k sigma)`.
pub(crate) fn profile_values(f_final: f64, rate: f64, noise: &[f64], sigma: f64) -> Vec<f64> {
    noise
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            (f_final + (1.0 - f_final) * (-rate * k as f64).exp() + eps * sigma).clamp(0.0, 1.0)
        })
        .collect()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Deterministic tie-break so exactly one configuration attains the
/// minimum final quality. The winner is the tied profile with the
/// smallest id; every other tied profile has its trailing flat segment
/// nudged up by successive ulps (capped by the preceding checkpoint so
/// monotonicity survives). If the whole matrix sits at quality 1 the
/// winner is nudged down instead.
pub(crate) fn ensure_unique_min_final(profiles: &mut [PerformanceProfile]) {
    let min_final = profiles
        .iter()
        .map(|p| p.final_quality())
        .fold(f64::INFINITY, f64::min);
    let mut tied: Vec<usize> = (0..profiles.len())
        .filter(|&i| profiles[i].final_quality() == min_final)
        .collect();
    if tied.len() <= 1 {
        return;
    }
    tied.sort_by_key(|&i| profiles[i].config_id());

    if min_final == 1.0 {
        // Every profile is flat at 1; lower the winner one ulp.
        let winner = &mut profiles[tied[0]];
        for k in 0..winner.len() {
            winner.set_quality(k, 1.0_f64.next_down());
        }
        return;
    }

    let mut target = min_final;
    for &idx in &tied[1..] {
        target = target.next_up().min(1.0);
        let profile = &mut profiles[idx];
        // The flat tail holding the old minimum.
        let mut start = profile.len();
        while start > 0 && profile.quality()[start - 1] == min_final {
            start -= 1;
        }
        // Cap by the value just before the tail; it is strictly above
        // min_final, so the final stays off the minimum either way.
        let cap = if start == 0 {
            1.0
        } else {
            profile.quality()[start - 1]
        };
        let value = target.min(cap);
        for k in start..profile.len() {
            profile.set_quality(k, value);
        }
    }
}
