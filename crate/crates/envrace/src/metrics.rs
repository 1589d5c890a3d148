//! Accuracy and cost measures for racing runs, figure-series export and
//! repeated-experiment summary rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{exact_cutoff_line, top_fraction};
use crate::evaluators::ReplayEvaluator;
use crate::profiles::{rank_percentile, CheckpointSchedule, ConfigId, QualityMatrix};
use crate::racing::{run_racing, PoolEntry, RacingParams, RacingResult};
use crate::{Error, Result};

/// Ground truth from exhaustively evaluating every configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    matrix: QualityMatrix,
    summary: TruthSummary,
}

impl TruthTable {
    pub fn build(matrix: QualityMatrix, pool_fraction: f64) -> Result<Self> {
        let summary = TruthSummary::from_matrix(&matrix, pool_fraction)?;
        Ok(TruthTable { matrix, summary })
    }

    pub fn matrix(&self) -> &QualityMatrix {
        &self.matrix
    }

    pub fn summary(&self) -> &TruthSummary {
        &self.summary
    }

    pub fn true_best(&self) -> ConfigId {
        self.summary.true_best
    }

    pub fn true_top_ids(&self) -> Vec<ConfigId> {
        self.summary.true_top.iter().map(|e| e.config_id).collect()
    }
}

/// The serializable part of a [`TruthTable`]: the true best
/// configuration and the true top set, without the full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub config_count: usize,
    pub schedule: CheckpointSchedule,
    pub pool_fraction: f64,
    pub true_best: ConfigId,
    /// Sorted by `(final_quality, id)` — best first.
    pub true_top: Vec<PoolEntry>,
}

impl TruthSummary {
    pub fn from_matrix(matrix: &QualityMatrix, pool_fraction: f64) -> Result<Self> {
        let top = top_fraction(matrix, pool_fraction)?;
        let true_top: Vec<PoolEntry> = top
            .iter()
            .map(|&id| PoolEntry {
                config_id: id,
                final_quality: matrix.profile(id).expect("known id").final_quality(),
            })
            .collect();
        Ok(TruthSummary {
            config_count: matrix.len(),
            schedule: matrix.schedule().clone(),
            pool_fraction,
            true_best: true_top[0].config_id,
            true_top,
        })
    }

    pub fn true_top_ids(&self) -> Vec<ConfigId> {
        self.true_top.iter().map(|e| e.config_id).collect()
    }
}

fn check_consistent(result: &RacingResult, truth: &TruthSummary) -> Result<()> {
    if result.schedule != truth.schedule || result.config_count != truth.config_count {
        return Err(Error::ScheduleMismatch {
            left: format!(
                "racing result ({} configs, {} checkpoints)",
                result.config_count,
                result.schedule.len()
            ),
            right: format!(
                "truth table ({} configs, {} checkpoints)",
                truth.config_count,
                truth.schedule.len()
            ),
        });
    }
    Ok(())
}

/// Full-evaluation cost over the heuristic's cost:
/// `N * full_budget / total_virtual_cost`.
pub fn speedup(result: &RacingResult, truth: &TruthSummary) -> Result<f64> {
    check_consistent(result, truth)?;
    let full = truth.config_count as u64 * truth.schedule.full_budget_ms();
    Ok(full as f64 / result.total_virtual_cost_ms as f64)
}

/// Did the pool capture the true best configuration?
pub fn overlap_top(result: &RacingResult, truth: &TruthSummary) -> bool {
    result.pool.iter().any(|e| e.config_id == truth.true_best)
}

/// Percentage of the true top set present in the final pool.
pub fn overlap_fraction(result: &RacingResult, truth: &TruthSummary) -> f64 {
    let top: std::collections::BTreeSet<ConfigId> =
        truth.true_top.iter().map(|e| e.config_id).collect();
    let hit = result
        .pool
        .iter()
        .filter(|e| top.contains(&e.config_id))
        .count();
    100.0 * hit as f64 / top.len() as f64
}

/// One long-format figure row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub time_ms: u64,
    pub series: String,
    pub value: f64,
}

/// Series label suffix for a fraction: `0.01` becomes `1`, `0.015`
/// becomes `1.5`.
pub fn percent_label(fraction: f64) -> String {
    let pct = fraction * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}", pct.round() as i64)
    } else {
        let s = format!("{pct:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Per-checkpoint series data: the top configuration's profile, each
/// requested exact cutoff line, and the rank percentiles of the sets
/// defining them (the top configuration's rank, and the worst member
/// rank within each top-fraction set).
///
/// Rows are emitted time-major; per time: `top_pp`, each `cutoff_<pct>`,
/// `rank_top`, each `rank_cutoff_<pct>`.
pub fn figure_data(matrix: &QualityMatrix, fractions: &[f64]) -> Result<Vec<FigureRow>> {
    let top_id = top_fraction(matrix, 1.0)?[0];
    let top_profile = matrix.profile(top_id)?;

    let mut cutoffs = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let label = percent_label(fraction);
        let line = exact_cutoff_line(matrix, fraction)?;
        let members = top_fraction(matrix, fraction)?;
        cutoffs.push((label, line, members));
    }

    let schedule = matrix.schedule();
    let mut rows = Vec::new();
    for k in 0..schedule.len() {
        let time_ms = schedule.time_ms(k);
        rows.push(FigureRow {
            time_ms,
            series: "top_pp".into(),
            value: top_profile.quality()[k],
        });
        for (label, line, _) in &cutoffs {
            rows.push(FigureRow {
                time_ms,
                series: format!("cutoff_{label}"),
                value: line.value_at(k),
            });
        }
        rows.push(FigureRow {
            time_ms,
            series: "rank_top".into(),
            value: rank_percentile(matrix, top_id, k)?,
        });
        for (label, _, members) in &cutoffs {
            let mut worst_rank = 0.0_f64;
            for &id in members {
                worst_rank = worst_rank.max(rank_percentile(matrix, id, k)?);
            }
            rows.push(FigureRow {
                time_ms,
                series: format!("rank_cutoff_{label}"),
                value: worst_rank,
            });
        }
    }
    Ok(rows)
}

/// Accuracy/cost summary over repeated racing runs — the shape of one
/// experiment-table row: configuration count, mean speedup, how often
/// the true best was found, and the mean top-set overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub configs: usize,
    pub repetitions: u32,
    pub mean_speedup: f64,
    pub overlap_top_pct: f64,
    pub mean_overlap_pct: f64,
}

/// Races the matrix `repetitions` times with derived seeds
/// (`params.seed + i` for repetition `i`) and aggregates the metrics.
/// Repetitions run in parallel; aggregation is in repetition order.
pub fn experiment_table(
    matrix: &QualityMatrix,
    params: &RacingParams,
    repetitions: u32,
) -> Result<ExperimentRow> {
    if repetitions == 0 {
        return Err(Error::InvalidParams("repetitions must be at least 1".into()));
    }
    let truth = TruthSummary::from_matrix(matrix, params.pool_fraction)?;
    let per_rep: Vec<(f64, bool, f64)> = (0..repetitions)
        .into_par_iter()
        .map(|i| {
            let mut rep_params = params.clone();
            rep_params.seed = params.seed.wrapping_add(i as u64);
            let result =
                run_racing(&ReplayEvaluator::new(matrix), &rep_params).map_err(|a| a.source)?;
            Ok((
                speedup(&result, &truth)?,
                overlap_top(&result, &truth),
                overlap_fraction(&result, &truth),
            ))
        })
        .collect::<Result<_>>()?;

    let n = repetitions as f64;
    let mut speedup_sum = 0.0;
    let mut top_hits = 0u32;
    let mut overlap_sum = 0.0;
    for &(s, top, ov) in &per_rep {
        speedup_sum += s;
        top_hits += u32::from(top);
        overlap_sum += ov;
    }
    Ok(ExperimentRow {
        configs: matrix.len(),
        repetitions,
        mean_speedup: speedup_sum / n,
        overlap_top_pct: 100.0 * top_hits as f64 / n,
        mean_overlap_pct: overlap_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::MarginPolicy;
    use crate::profiles::PerformanceProfile;

    fn matrix(rows: &[(u32, &[f64])]) -> QualityMatrix {
        let count = rows[0].1.len();
        QualityMatrix::new(
            CheckpointSchedule::new(1, count).unwrap(),
            rows.iter()
                .map(|(id, q)| PerformanceProfile::new(ConfigId(*id), q.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn result_with(
        truth: &TruthSummary,
        pool_ids: &[u32],
        total: u64,
    ) -> RacingResult {
        RacingResult {
            params: RacingParams::default(),
            schedule: truth.schedule.clone(),
            config_count: truth.config_count,
            pool: pool_ids
                .iter()
                .map(|&id| PoolEntry {
                    config_id: ConfigId(id),
                    final_quality: 0.0,
                })
                .collect(),
            outcomes: vec![],
            total_virtual_cost_ms: total,
            cutoff_history: None,
        }
    }

    #[test]
    fn speedup_is_one_when_nothing_terminated() {
        let m = matrix(&[(0, &[0.5, 0.5]), (1, &[0.5, 0.5])]);
        let truth = TruthSummary::from_matrix(&m, 0.5).unwrap();
        let r = result_with(&truth, &[0], 2 * 2);
        assert_eq!(speedup(&r, &truth).unwrap(), 1.0);
    }

    #[test]
    fn speedup_matches_the_ledger_arithmetic() {
        // Four configs on the default schedule, 3136 ms ledger.
        let schedule = CheckpointSchedule::default();
        let profiles: Vec<PerformanceProfile> = (0..4)
            .map(|i| PerformanceProfile::new(ConfigId(i), vec![0.5; schedule.len()]).unwrap())
            .collect();
        let m = QualityMatrix::new(schedule, profiles).unwrap();
        let truth = TruthSummary::from_matrix(&m, 0.01).unwrap();
        let r = result_with(&truth, &[0], 3136);
        assert_eq!(speedup(&r, &truth).unwrap(), 4096.0 / 3136.0);
    }

    #[test]
    fn speedup_rejects_mismatched_inputs() {
        let m = matrix(&[(0, &[0.5, 0.5]), (1, &[0.5, 0.5])]);
        let truth = TruthSummary::from_matrix(&m, 0.5).unwrap();
        let mut r = result_with(&truth, &[0], 4);
        r.config_count = 3;
        assert!(matches!(
            speedup(&r, &truth),
            Err(Error::ScheduleMismatch { .. })
        ));
    }

    #[test]
    fn overlap_measures() {
        let m = matrix(&[
            (0, &[0.1, 0.1]),
            (1, &[0.2, 0.2]),
            (2, &[0.3, 0.3]),
            (3, &[0.4, 0.4]),
            (4, &[0.5, 0.5]),
            (5, &[0.6, 0.6]),
            (6, &[0.7, 0.7]),
            (7, &[0.8, 0.8]),
        ]);
        let truth = TruthSummary::from_matrix(&m, 0.5).unwrap();
        assert_eq!(truth.true_best, ConfigId(0));
        assert_eq!(
            truth.true_top_ids(),
            vec![ConfigId(0), ConfigId(1), ConfigId(2), ConfigId(3)]
        );

        let exact = result_with(&truth, &[0, 1, 2, 3], 1);
        assert!(overlap_top(&exact, &truth));
        assert_eq!(overlap_fraction(&exact, &truth), 100.0);

        // {a, b, c, d} vs truth {a, b, c, e}: 75%.
        let off_by_one = result_with(&truth, &[0, 1, 2, 4], 1);
        assert_eq!(overlap_fraction(&off_by_one, &truth), 75.0);

        let missing_best = result_with(&truth, &[1, 2, 3, 4], 1);
        assert!(!overlap_top(&missing_best, &truth));
    }

    #[test]
    fn overlap_full_implies_top_found() {
        let m = matrix(&[(0, &[0.1, 0.1]), (1, &[0.2, 0.2])]);
        let truth = TruthSummary::from_matrix(&m, 0.5).unwrap();
        let r = result_with(&truth, &[0], 1);
        assert_eq!(overlap_fraction(&r, &truth), 100.0);
        assert!(overlap_top(&r, &truth));
    }

    #[test]
    fn figure_data_of_a_single_config_matrix() {
        let m = matrix(&[(3, &[0.8, 0.5, 0.2])]);
        let rows = figure_data(&m, &[0.01]).unwrap();
        let top: Vec<f64> = series(&rows, "top_pp");
        assert_eq!(top, vec![0.8, 0.5, 0.2]);
        assert_eq!(series(&rows, "cutoff_1"), vec![0.8, 0.5, 0.2]);
        assert!(series(&rows, "rank_top").iter().all(|&r| r == 0.0));
        assert!(series(&rows, "rank_cutoff_1").iter().all(|&r| r == 0.0));
    }

    fn series(rows: &[FigureRow], name: &str) -> Vec<f64> {
        rows.iter()
            .filter(|r| r.series == name)
            .map(|r| r.value)
            .collect()
    }

    #[test]
    fn figure_data_cross_checks_against_direct_calls() {
        let m = matrix(&[
            (0, &[0.9, 0.5, 0.10]),
            (1, &[0.4, 0.35, 0.30]),
            (2, &[0.8, 0.7, 0.60]),
            (3, &[0.5, 0.4, 0.35]),
            (4, &[0.6, 0.3, 0.20]),
        ]);
        let rows = figure_data(&m, &[0.4, 0.8]).unwrap();
        let line40 = exact_cutoff_line(&m, 0.4).unwrap();
        assert_eq!(series(&rows, "cutoff_40"), line40.values());
        let line80 = exact_cutoff_line(&m, 0.8).unwrap();
        assert_eq!(series(&rows, "cutoff_80"), line80.values());
        // Top config is 0 (final 0.10).
        for (k, &r) in series(&rows, "rank_top").iter().enumerate() {
            assert_eq!(r, rank_percentile(&m, ConfigId(0), k).unwrap());
        }
        let members = top_fraction(&m, 0.4).unwrap();
        for (k, &r) in series(&rows, "rank_cutoff_40").iter().enumerate() {
            let want = members
                .iter()
                .map(|&id| rank_percentile(&m, id, k).unwrap())
                .fold(0.0, f64::max);
            assert_eq!(r, want);
        }
    }

    #[test]
    fn figure_data_reproduces_published_series_points() {
        // A two-profile matrix built from published figure data: the top
        // configuration's profile and its 1% cutoff line (which
        // dominates it pointwise, so the fraction-1.0 envelope is the
        // cutoff series itself).
        let top = [
            0.528224027675535,
            0.290393145803977,
            0.146396592104967,
            0.083294403867031,
            0.0270881975827215,
            0.0148850994105934,
            0.00597226719078368,
            0.00372378429767797,
            0.00177145164047716,
            0.00142228006715113,
            0.000100898174527227,
        ];
        let cutoff = [
            0.935431148010446,
            0.898058772483269,
            0.894458366803756,
            0.894458366803756,
            0.766057434160886,
            0.204886098440359,
            0.101287400234949,
            0.0385895630887643,
            0.00801767385429572,
            0.0064128552689275,
            0.00177013160892996,
        ];
        let m = QualityMatrix::new(
            CheckpointSchedule::default(),
            vec![
                PerformanceProfile::new(ConfigId(0), top.to_vec()).unwrap(),
                PerformanceProfile::new(ConfigId(1), cutoff.to_vec()).unwrap(),
            ],
        )
        .unwrap();
        let rows = figure_data(&m, &[1.0]).unwrap();
        let top_series = series(&rows, "top_pp");
        assert_eq!(top_series[0], 0.528224027675535);
        let cutoff_series = series(&rows, "cutoff_100");
        assert_eq!(cutoff_series[5], 0.204886098440359);
        assert_eq!(cutoff_series[10], 0.00177013160892996);
        // The best-final configuration has rank 0 at the final checkpoint.
        assert_eq!(*series(&rows, "rank_top").last().unwrap(), 0.0);
    }

    #[test]
    fn percent_labels() {
        assert_eq!(percent_label(0.01), "1");
        assert_eq!(percent_label(0.05), "5");
        assert_eq!(percent_label(1.0), "100");
        assert_eq!(percent_label(0.015), "1.5");
        assert_eq!(percent_label(0.001), "0.1");
    }

    #[test]
    fn experiment_on_a_uniform_matrix_is_lossless() {
        let schedule = CheckpointSchedule::default();
        let profiles: Vec<PerformanceProfile> = (0..10)
            .map(|i| PerformanceProfile::new(ConfigId(i), vec![0.5; schedule.len()]).unwrap())
            .collect();
        let m = QualityMatrix::new(schedule, profiles).unwrap();
        let row = experiment_table(&m, &RacingParams::default(), 1).unwrap();
        assert_eq!(row.mean_speedup, 1.0);
        assert_eq!(row.overlap_top_pct, 100.0);
        assert_eq!(row.mean_overlap_pct, 100.0);
    }

    #[test]
    fn experiment_row_matches_per_run_recomputation() {
        let m = matrix(&[
            (0, &[0.9, 0.5, 0.10]),
            (1, &[0.4, 0.35, 0.30]),
            (2, &[0.8, 0.7, 0.60]),
            (3, &[0.5, 0.4, 0.35]),
            (4, &[0.6, 0.3, 0.20]),
            (5, &[0.7, 0.6, 0.50]),
        ]);
        let params = RacingParams {
            pool_fraction: 0.34,
            margin: MarginPolicy::multiplicative(1.2),
            seed: 5,
            ..RacingParams::default()
        };
        let reps = 7;
        let row = experiment_table(&m, &params, reps).unwrap();

        let truth = TruthSummary::from_matrix(&m, params.pool_fraction).unwrap();
        let mut speedup_sum = 0.0;
        let mut hits = 0;
        let mut overlap_sum = 0.0;
        for i in 0..reps {
            let mut p = params.clone();
            p.seed = params.seed.wrapping_add(i as u64);
            let r = run_racing(&ReplayEvaluator::new(&m), &p).unwrap();
            speedup_sum += speedup(&r, &truth).unwrap();
            hits += u32::from(overlap_top(&r, &truth));
            overlap_sum += overlap_fraction(&r, &truth);
        }
        assert_eq!(row.mean_speedup, speedup_sum / reps as f64);
        assert_eq!(row.overlap_top_pct, 100.0 * hits as f64 / reps as f64);
        assert_eq!(row.mean_overlap_pct, overlap_sum / reps as f64);
    }

}
