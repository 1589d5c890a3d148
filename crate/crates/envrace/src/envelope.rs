//! Cutoff lines (worst-case quality envelopes over configuration sets)
//! and margin-based violation tests.
//!
//! Quality 1 is bad, so the worst case over a set is the pointwise
//! maximum of its profiles. A candidate run whose partial profile rises
//! strictly above the cutoff line by more than the margin at any
//! non-final checkpoint is deemed unpromising.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::profiles::{ConfigId, PerformanceProfile, QualityMatrix};
use crate::{Error, Result};

/// Per-checkpoint worst-case quality envelope over a configuration set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffLine {
    values: Vec<f64>,
}

impl CutoffLine {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pointwise maximum over a non-empty set of equal-length profiles.
pub fn worst_case_envelope<'a, I>(profiles: I) -> Result<CutoffLine>
where
    I: IntoIterator<Item = &'a PerformanceProfile>,
{
    let mut iter = profiles.into_iter();
    let first = iter.next().ok_or(Error::EmptyProfileSet)?;
    let mut values = first.quality().to_vec();
    for p in iter {
        if p.len() != values.len() {
            return Err(Error::ProfileLengthMismatch {
                config: p.config_id(),
                got: p.len(),
                want: values.len(),
            });
        }
        for (v, &q) in values.iter_mut().zip(p.quality()) {
            *v = v.max(q);
        }
    }
    Ok(CutoffLine { values })
}

/// Number of configurations a fraction selects: `ceil(fraction * n)`,
/// clamped to `1..=n`. A tiny slack guards against ceil jumping a step
/// on inexact products like `0.01 * 400`.
pub fn pool_capacity(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// The `ceil(fraction * N)` configurations with the smallest final
/// quality, ties broken by smaller id; sorted by `(final_quality, id)`.
pub fn top_fraction(matrix: &QualityMatrix, fraction: f64) -> Result<Vec<ConfigId>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let mut order: Vec<&PerformanceProfile> = matrix.profiles().iter().collect();
    order.sort_by(|a, b| {
        a.final_quality()
            .total_cmp(&b.final_quality())
            .then(a.config_id().cmp(&b.config_id()))
    });
    let take = pool_capacity(matrix.len(), fraction);
    Ok(order[..take].iter().map(|p| p.config_id()).collect())
}

/// Envelope of the top fraction: `worst_case_envelope(top_fraction(..))`.
pub fn exact_cutoff_line(matrix: &QualityMatrix, fraction: f64) -> Result<CutoffLine> {
    let top = top_fraction(matrix, fraction)?;
    worst_case_envelope(top.iter().map(|&id| {
        matrix
            .profile(id)
            .expect("top_fraction only returns known ids")
    }))
}

/// Rule translating "rises above the cutoff line by more than the
/// margin" into a termination threshold.
///
/// The multiplicative default scales the cutoff value by 1.2. Because a
/// zero cutoff value is then exceedable by any positive quality, an
/// optional absolute floor can lift the threshold to at least `floor`.
/// The additive mode offsets the cutoff value instead. `Off` disables
/// termination entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MarginPolicy {
    Multiplicative {
        factor: f64,
        #[serde(default)]
        floor: f64,
    },
    Additive {
        offset: f64,
    },
    Off,
}

impl MarginPolicy {
    pub const DEFAULT_FACTOR: f64 = 1.2;

    pub fn multiplicative(factor: f64) -> Self {
        MarginPolicy::Multiplicative { factor, floor: 0.0 }
    }

    pub fn additive(offset: f64) -> Self {
        MarginPolicy::Additive { offset }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginPolicy::Multiplicative { factor, floor } => {
                if !(factor > 1.0) || !factor.is_finite() {
                    return Err(Error::InvalidMargin(format!(
                        "multiplicative factor must be a finite value > 1, got {factor}"
                    )));
                }
                if !(floor >= 0.0) {
                    return Err(Error::InvalidMargin(format!(
                        "floor must be non-negative, got {floor}"
                    )));
                }
                Ok(())
            }
            MarginPolicy::Additive { offset } => {
                if !(offset > 0.0) || !offset.is_finite() {
                    return Err(Error::InvalidMargin(format!(
                        "additive offset must be a finite value > 0, got {offset}"
                    )));
                }
                Ok(())
            }
            MarginPolicy::Off => Ok(()),
        }
    }

    /// Termination threshold for a given cutoff value; `None` when
    /// termination is disabled.
    pub fn threshold(&self, cutoff_value: f64) -> Option<f64> {
        match *self {
            MarginPolicy::Multiplicative { factor, floor } => {
                Some((factor * cutoff_value).max(floor))
            }
            MarginPolicy::Additive { offset } => Some(cutoff_value + offset),
            MarginPolicy::Off => None,
        }
    }
}

impl Default for MarginPolicy {
    fn default() -> Self {
        MarginPolicy::multiplicative(Self::DEFAULT_FACTOR)
    }
}

impl FromStr for MarginPolicy {
    type Err = Error;

    /// `x<factor>` (multiplicative), `+<offset>` (additive) or `off`.
    fn from_str(s: &str) -> Result<Self> {
        let policy = if s.eq_ignore_ascii_case("off") {
            MarginPolicy::Off
        } else if let Some(rest) = s.strip_prefix('x') {
            let factor: f64 = rest
                .parse()
                .map_err(|_| Error::InvalidMargin(format!("cannot parse factor in `{s}`")))?;
            MarginPolicy::multiplicative(factor)
        } else if let Some(rest) = s.strip_prefix('+') {
            let offset: f64 = rest
                .parse()
                .map_err(|_| Error::InvalidMargin(format!("cannot parse offset in `{s}`")))?;
            MarginPolicy::additive(offset)
        } else {
            return Err(Error::InvalidMargin(format!(
                "expected `x<factor>`, `+<offset>` or `off`, got `{s}`"
            )));
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for MarginPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MarginPolicy::Multiplicative { factor, floor } if floor == 0.0 => {
                write!(f, "x{factor}")
            }
            MarginPolicy::Multiplicative { factor, floor } => {
                write!(f, "x{factor} (floor {floor})")
            }
            MarginPolicy::Additive { offset } => write!(f, "+{offset}"),
            MarginPolicy::Off => write!(f, "off"),
        }
    }
}

/// Does a partial profile rise strictly above the cutoff line by more
/// than the margin at checkpoint `k`?
///
/// `k` must not be the final checkpoint: completed runs are never
/// terminated at the finish line.
pub fn violates(
    partial: &[f64],
    cutoff: &CutoffLine,
    policy: &MarginPolicy,
    k: usize,
) -> Result<bool> {
    if k >= cutoff.len() {
        return Err(Error::CheckpointOutOfRange {
            index: k,
            count: cutoff.len(),
        });
    }
    if k == cutoff.len() - 1 {
        return Err(Error::FinalCheckpointViolation(k));
    }
    if k >= partial.len() {
        return Err(Error::PartialProfileTooShort {
            defined: partial.len(),
            index: k,
        });
    }
    Ok(match policy.threshold(cutoff.value_at(k)) {
        Some(threshold) => partial[k] > threshold,
        None => false,
    })
}
