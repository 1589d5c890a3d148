//! Simple Plant Location Problem instances: choose facilities to open,
//! minimizing opening costs plus each customer's cheapest open service
//! cost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Opening-cost range for generated instances (integral values).
pub const OPEN_COST_RANGE: std::ops::RangeInclusive<u32> = 80..=120;
/// Service-cost range for generated instances (integral values).
pub const SERVICE_COST_RANGE: std::ops::RangeInclusive<u32> = 1..=100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplpInstance {
    pub open_cost: Vec<f64>,
    /// `service_cost[facility][customer]`
    pub service_cost: Vec<Vec<f64>>,
    /// Provenance; also seeds the solver runs on this instance.
    pub seed: u64,
}

impl SplpInstance {
    pub fn new(open_cost: Vec<f64>, service_cost: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if open_cost.is_empty() {
            return Err(Error::InvalidParams("instance has no facilities".into()));
        }
        if service_cost.len() != open_cost.len() {
            return Err(Error::InvalidParams(format!(
                "{} service rows for {} facilities",
                service_cost.len(),
                open_cost.len()
            )));
        }
        let customers = service_cost[0].len();
        if customers == 0 {
            return Err(Error::InvalidParams("instance has no customers".into()));
        }
        for row in &service_cost {
            if row.len() != customers {
                return Err(Error::InvalidParams("ragged service-cost matrix".into()));
            }
        }
        let all_costs = open_cost.iter().chain(service_cost.iter().flatten());
        for &c in all_costs {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidParams(format!("negative or non-finite cost {c}")));
            }
        }
        Ok(SplpInstance {
            open_cost,
            service_cost,
            seed,
        })
    }

    pub fn facilities(&self) -> usize {
        self.open_cost.len()
    }

    pub fn customers(&self) -> usize {
        self.service_cost[0].len()
    }
}

/// Uniform integral costs — opening in [`OPEN_COST_RANGE`], service in
/// [`SERVICE_COST_RANGE`] — drawn from a ChaCha8 stream seeded by `seed`
/// (opening costs first, then service costs facility-major).
pub fn generate_splp_instance(
    facilities: usize,
    customers: usize,
    seed: u64,
) -> Result<SplpInstance> {
    if facilities == 0 || customers == 0 {
        return Err(Error::InvalidParams(
            "need at least one facility and one customer".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let open_cost: Vec<f64> = (0..facilities)
        .map(|_| rng.random_range(OPEN_COST_RANGE) as f64)
        .collect();
    let service_cost: Vec<Vec<f64>> = (0..facilities)
        .map(|_| {
            (0..customers)
                .map(|_| rng.random_range(SERVICE_COST_RANGE) as f64)
                .collect()
        })
        .collect();
    SplpInstance::new(open_cost, service_cost, seed)
}

/// Objective of an open set: sum of opening costs plus, per customer,
/// the cheapest open service cost.
pub fn splp_objective(instance: &SplpInstance, open: &[usize]) -> Result<f64> {
    if open.is_empty() {
        return Err(Error::InvalidParams("open set is empty".into()));
    }
    for &f in open {
        if f >= instance.facilities() {
            return Err(Error::InvalidParams(format!(
                "facility index {f} out of range ({} facilities)",
                instance.facilities()
            )));
        }
    }
    let opening: f64 = open.iter().map(|&f| instance.open_cost[f]).sum();
    let service: f64 = (0..instance.customers())
        .map(|c| {
            open.iter()
                .map(|&f| instance.service_cost[f][c])
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(opening + service)
}

/// Incremental open-set state with per-customer best/second-best open
/// facilities, so move deltas are cheap to evaluate.
///
/// Costs are integral-valued f64s, so all delta arithmetic is exact.
#[derive(Debug, Clone)]
pub(crate) struct SplpState<'a> {
    instance: &'a SplpInstance,
    open: Vec<bool>,
    open_count: usize,
    /// Cheapest open facility per customer (smallest index on ties).
    best: Vec<usize>,
    /// Second-cheapest open facility per customer; `usize::MAX` when
    /// fewer than two facilities are open.
    second: Vec<usize>,
    objective: f64,
}

const NO_FACILITY: usize = usize::MAX;

impl<'a> SplpState<'a> {
    /// Starts from the all-open solution.
    pub(crate) fn all_open(instance: &'a SplpInstance) -> Self {
        let facilities = instance.facilities();
        let customers = instance.customers();
        let mut state = SplpState {
            instance,
            open: vec![true; facilities],
            open_count: facilities,
            best: vec![NO_FACILITY; customers],
            second: vec![NO_FACILITY; customers],
            objective: 0.0,
        };
        let mut total: f64 = instance.open_cost.iter().sum();
        for c in 0..customers {
            let (best, second) = state.scan_best_two(c, NO_FACILITY);
            state.best[c] = best;
            state.second[c] = second;
            total += instance.service_cost[best][c];
        }
        state.objective = total;
        state
    }

    pub(crate) fn objective(&self) -> f64 {
        self.objective
    }

    pub(crate) fn open_count(&self) -> usize {
        self.open_count
    }

    pub(crate) fn facilities(&self) -> usize {
        self.open.len()
    }

    pub(crate) fn is_open(&self, f: usize) -> bool {
        self.open[f]
    }

    pub(crate) fn open_facilities(&self) -> Vec<usize> {
        (0..self.open.len()).filter(|&f| self.open[f]).collect()
    }

    fn service(&self, f: usize, c: usize) -> f64 {
        self.instance.service_cost[f][c]
    }

    /// Best and second-best open facilities for customer `c`, skipping
    /// `excluded`. Ties resolve to the smaller index.
    fn scan_best_two(&self, c: usize, excluded: usize) -> (usize, usize) {
        let mut best = NO_FACILITY;
        let mut second = NO_FACILITY;
        for f in 0..self.open.len() {
            if !self.open[f] || f == excluded {
                continue;
            }
            let cost = self.service(f, c);
            if best == NO_FACILITY || cost < self.service(best, c) {
                second = best;
                best = f;
            } else if second == NO_FACILITY || cost < self.service(second, c) {
                second = f;
            }
        }
        (best, second)
    }

    /// Objective change from opening closed facility `f`.
    pub(crate) fn open_delta(&self, f: usize) -> f64 {
        debug_assert!(!self.open[f]);
        let mut delta = self.instance.open_cost[f];
        for c in 0..self.best.len() {
            let gain = self.service(self.best[c], c) - self.service(f, c);
            if gain > 0.0 {
                delta -= gain;
            }
        }
        delta
    }

    /// Objective change from closing open facility `f`. Requires at
    /// least two open facilities.
    pub(crate) fn close_delta(&self, f: usize) -> f64 {
        debug_assert!(self.open[f] && self.open_count >= 2);
        let mut delta = -self.instance.open_cost[f];
        for c in 0..self.best.len() {
            if self.best[c] == f {
                delta += self.service(self.second[c], c) - self.service(f, c);
            }
        }
        delta
    }

    /// Objective change from closing `out` and opening `in_` in one move.
    pub(crate) fn swap_delta(&self, out: usize, in_: usize) -> f64 {
        debug_assert!(self.open[out] && !self.open[in_]);
        let mut delta = self.instance.open_cost[in_] - self.instance.open_cost[out];
        for c in 0..self.best.len() {
            let old = self.service(self.best[c], c);
            let surviving = if self.best[c] == out {
                if self.second[c] == NO_FACILITY {
                    f64::INFINITY
                } else {
                    self.service(self.second[c], c)
                }
            } else {
                old
            };
            delta += surviving.min(self.service(in_, c)) - old;
        }
        delta
    }

    pub(crate) fn apply_open(&mut self, f: usize) {
        debug_assert!(!self.open[f]);
        self.open[f] = true;
        self.open_count += 1;
        self.objective += self.instance.open_cost[f];
        for c in 0..self.best.len() {
            let cost = self.service(f, c);
            if self.best[c] == NO_FACILITY || cost < self.service(self.best[c], c) {
                self.objective += cost
                    - if self.best[c] == NO_FACILITY {
                        0.0
                    } else {
                        self.service(self.best[c], c)
                    };
                self.second[c] = self.best[c];
                self.best[c] = f;
            } else if self.second[c] == NO_FACILITY || cost < self.service(self.second[c], c) {
                self.second[c] = f;
            }
        }
    }

    pub(crate) fn apply_close(&mut self, f: usize) {
        debug_assert!(self.open[f] && self.open_count >= 2);
        self.open[f] = false;
        self.open_count -= 1;
        self.objective -= self.instance.open_cost[f];
        for c in 0..self.best.len() {
            if self.best[c] == f {
                self.objective += self.service(self.second[c], c) - self.service(f, c);
                let (best, second) = self.scan_best_two(c, NO_FACILITY);
                self.best[c] = best;
                self.second[c] = second;
            } else if self.second[c] == f {
                let (_, second) = self.scan_best_two(c, NO_FACILITY);
                self.second[c] = second;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_2x3() -> SplpInstance {
        SplpInstance::new(
            vec![5.0, 7.0],
            vec![vec![2.0, 9.0, 4.0], vec![3.0, 1.0, 6.0]],
            0,
        )
        .unwrap()
    }

    #[test]
    fn objective_of_single_open_facility_is_open_cost_plus_row_sum() {
        let inst = fixture_2x3();
        assert_eq!(splp_objective(&inst, &[0]).unwrap(), 5.0 + 2.0 + 9.0 + 4.0);
        assert_eq!(splp_objective(&inst, &[1]).unwrap(), 7.0 + 3.0 + 1.0 + 6.0);
    }

    #[test]
    fn objective_of_hand_computed_fixture() {
        let inst = fixture_2x3();
        // 5 + 7 opening, then per-customer minima 2, 1, 4.
        assert_eq!(splp_objective(&inst, &[0, 1]).unwrap(), 19.0);
    }

    #[test]
    fn objective_rejects_empty_and_out_of_range_sets() {
        let inst = fixture_2x3();
        assert!(splp_objective(&inst, &[]).is_err());
        assert!(splp_objective(&inst, &[2]).is_err());
    }

    #[test]
    fn generator_is_seed_deterministic() {
        let a = generate_splp_instance(6, 9, 31).unwrap();
        let b = generate_splp_instance(6, 9, 31).unwrap();
        assert_eq!(a, b);
        let c = generate_splp_instance(6, 9, 32).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.facilities(), 6);
        assert_eq!(a.customers(), 9);
        for &cost in &a.open_cost {
            assert!((80.0..=120.0).contains(&cost));
            assert_eq!(cost.fract(), 0.0);
        }
        for &cost in a.service_cost.iter().flatten() {
            assert!((1.0..=100.0).contains(&cost));
        }
    }

    #[test]
    fn incremental_deltas_agree_with_the_direct_objective() {
        let inst = generate_splp_instance(8, 12, 5).unwrap();
        let mut state = SplpState::all_open(&inst);
        assert_eq!(
            state.objective(),
            splp_objective(&inst, &state.open_facilities()).unwrap()
        );

        // Close three facilities, checking the delta each time.
        for f in [2, 5, 0] {
            let predicted = state.objective() + state.close_delta(f);
            state.apply_close(f);
            assert_eq!(state.objective(), predicted);
            assert_eq!(
                state.objective(),
                splp_objective(&inst, &state.open_facilities()).unwrap()
            );
        }

        // Reopen one, checking the open delta.
        let predicted = state.objective() + state.open_delta(5);
        state.apply_open(5);
        assert_eq!(state.objective(), predicted);
        assert_eq!(
            state.objective(),
            splp_objective(&inst, &state.open_facilities()).unwrap()
        );

        // Swap delta equals applying close + open.
        let (out, in_) = (5, 2);
        let predicted = state.objective() + state.swap_delta(out, in_);
        state.apply_open(in_);
        state.apply_close(out);
        assert_eq!(state.objective(), predicted);
        assert_eq!(
            state.objective(),
            splp_objective(&inst, &state.open_facilities()).unwrap()
        );
    }
}
