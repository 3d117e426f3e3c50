//! Seeded outage-rate experiments.
//!
//! Each trial draws one fading realization, numbers the relays, and runs the
//! selectors at every SNR point of the sweep. Trial `i` reads only its own
//! random substream, keyed by `(base_seed, i)`, so the same draws are reused
//! across SNR points, numbering schemes and nested relay pools, and results do
//! not depend on the number of worker threads.

pub mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rate_model::{build_capacity_matrix, full_mask, SnrConfig};
use crate::scenario::{draw_channel_powers, fading_params, renumber, FadingParams, NumberingScheme, Topology, TrialRng};
use crate::selector::{equal_time_select, recursive_select, RejectCounts};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Optimized,
    EqualTime,
    Both,
}

impl Mode {
    pub fn optimized(self) -> bool {
        matches!(self, Mode::Optimized | Mode::Both)
    }

    pub fn equal_time(self) -> bool {
        matches!(self, Mode::EqualTime | Mode::Both)
    }
}

/// Outcome of one fading realization at one SNR. Fields for a selector that
/// did not run are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub rate_optimized: Option<f64>,
    pub rate_equal_time: Option<f64>,
    pub active_relays_optimized: Option<usize>,
    pub active_relays_equal_time: Option<usize>,
    /// Rejected subsets seen by the optimized search.
    pub reject_counters: RejectCounts,
    pub pruned: u64,
}

/// Everything that fixes the random draws and selector runs of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub topology: Topology,
    pub scheme: NumberingScheme,
    pub n_trials: usize,
    pub base_seed: u64,
    pub mode: Mode,
}

/// Worker threads; `0` uses all available cores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Parallelism(pub usize);

struct Prepared<'a> {
    setup: &'a TrialSetup,
    params: FadingParams,
}

impl<'a> Prepared<'a> {
    fn new(setup: &'a TrialSetup) -> Result<Self> {
        if setup.n_trials < 1 {
            return Err(Error::invalid("need at least one trial"));
        }
        if !setup.scheme.supports(&setup.topology) {
            return Err(Error::invalid(format!(
                "{} numbering does not apply to a {:?} layout",
                setup.scheme.name(),
                setup.topology.layout()
            )));
        }
        Ok(Self {
            setup,
            params: fading_params(&setup.topology)?,
        })
    }

    /// One realization evaluated at every SNR point.
    fn trial(&self, index: usize, snrs: &[SnrConfig]) -> Result<Vec<TrialRecord>> {
        let setup = self.setup;
        let rng = TrialRng::new(setup.base_seed, index as u64);
        let powers = draw_channel_powers(&self.params, &rng);
        let mask = full_mask(powers.size());
        snrs.iter()
            .map(|&snr| {
                let caps = build_capacity_matrix(&powers, &mask, snr)?;
                // Fresh generator per SNR point: random numbering is the same across the sweep.
                let order = renumber(setup.scheme, &setup.topology, &caps, &mut rng.auxiliary())?;
                let caps = caps.renumbered(&order)?;
                let mut record = TrialRecord {
                    rate_optimized: None,
                    rate_equal_time: None,
                    active_relays_optimized: None,
                    active_relays_equal_time: None,
                    reject_counters: RejectCounts::default(),
                    pruned: 0,
                };
                if setup.mode.optimized() {
                    let out = recursive_select(&caps)?;
                    record.rate_optimized = Some(out.best.rate);
                    record.active_relays_optimized = Some(out.best.subset.len());
                    record.reject_counters = out.rejects;
                    record.pruned = out.candidates_pruned;
                }
                if setup.mode.equal_time() {
                    let out = equal_time_select(&caps)?;
                    record.rate_equal_time = Some(out.best.rate);
                    record.active_relays_equal_time = Some(out.best.subset.len());
                }
                Ok(record)
            })
            .collect()
    }

    /// Records indexed `[trial][snr]`, in trial order.
    fn run(&self, snrs: &[SnrConfig], parallelism: Parallelism) -> Result<Vec<Vec<TrialRecord>>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism.0)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            (0..self.setup.n_trials)
                .into_par_iter()
                .map(|i| self.trial(i, snrs))
                .collect()
        })
    }
}

/// Runs every trial of `setup` at a single SNR.
pub fn run_trials(setup: &TrialSetup, snr: SnrConfig, parallelism: Parallelism) -> Result<Vec<TrialRecord>> {
    let per_trial = Prepared::new(setup)?.run(&[snr], parallelism)?;
    Ok(per_trial.into_iter().map(|mut v| v.remove(0)).collect())
}

/// Empirical outage rate: the `ceil(epsilon * n)`-th smallest sample.
pub fn outage_rate(samples: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("outage target must lie in (0, 1), got {epsilon}")));
    }
    let k = (epsilon * samples.len() as f64).ceil() as usize;
    if k < 1 {
        return Err(Error::InsufficientSamples {
            samples: samples.len(),
            epsilon,
        });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("rate samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Outage rate and mean number of active relays across an SNR sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCurve {
    pub snr_db: Vec<f64>,
    pub snr_grid: Vec<f64>,
    pub outage_rate: Vec<f64>,
    pub avg_active: Vec<f64>,
    pub n_trials: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub optimized: Option<OutageCurve>,
    pub equal_time: Option<OutageCurve>,
    /// Rejected subsets over all trials and SNR points (optimized search).
    pub reject_counters: RejectCounts,
    pub pruned_subsets: u64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Runs the experiment once per trial across the whole SNR grid and
/// aggregates per SNR point.
pub fn sweep(
    setup: &TrialSetup,
    snr_grid_db: &[f64],
    epsilon: f64,
    parallelism: Parallelism,
) -> Result<SweepResult> {
    if snr_grid_db.is_empty() {
        return Err(Error::invalid("SNR grid is empty"));
    }
    if !((epsilon * setup.n_trials as f64).ceil() >= 1.0) || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InsufficientSamples {
            samples: setup.n_trials,
            epsilon,
        });
    }
    let snrs = snr_grid_db
        .iter()
        .map(|&db| SnrConfig::from_db(db))
        .collect::<Result<Vec<_>>>()?;
    let records = Prepared::new(setup)?.run(&snrs, parallelism)?;

    let curve = |rate: fn(&TrialRecord) -> Option<f64>, active: fn(&TrialRecord) -> Option<usize>| -> Result<OutageCurve> {
        let mut outage = Vec::with_capacity(snrs.len());
        let mut avg_active = Vec::with_capacity(snrs.len());
        for s in 0..snrs.len() {
            let rates: Vec<f64> = records.iter().filter_map(|r| rate(&r[s])).collect();
            outage.push(outage_rate(&rates, epsilon)?);
            let total: usize = records.iter().filter_map(|r| active(&r[s])).sum();
            avg_active.push(total as f64 / records.len() as f64);
        }
        Ok(OutageCurve {
            snr_db: snr_grid_db.to_vec(),
            snr_grid: snrs.iter().map(|s| s.linear()).collect(),
            outage_rate: outage,
            avg_active,
            n_trials: setup.n_trials,
            epsilon,
        })
    };

    let optimized = if setup.mode.optimized() {
        Some(curve(|r| r.rate_optimized, |r| r.active_relays_optimized)?)
    } else {
        None
    };
    let equal_time = if setup.mode.equal_time() {
        Some(curve(|r| r.rate_equal_time, |r| r.active_relays_equal_time)?)
    } else {
        None
    };
    let mut reject_counters = RejectCounts::default();
    let mut pruned_subsets = 0;
    for r in records.iter().flatten() {
        reject_counters.add(&r.reject_counters);
        pruned_subsets += r.pruned;
    }
    Ok(SweepResult {
        optimized,
        equal_time,
        reject_counters,
        pruned_subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{linear_topology, Layout};

    fn setup(topology: Topology, n_trials: usize, mode: Mode) -> TrialSetup {
        TrialSetup {
            topology,
            scheme: NumberingScheme::AverageDescending,
            n_trials,
            base_seed: 42,
            mode,
        }
    }

    #[test]
    fn outage_rate_examples() {
        let samples: Vec<f64> = (1..=1000).map(f64::from).rev().collect();
        assert_eq!(outage_rate(&samples, 1e-2).unwrap(), 10.0);
        let big: Vec<f64> = (0..60_000).map(|i| ((i * 7919) % 60_000) as f64).collect();
        assert_eq!(outage_rate(&big, 1e-3).unwrap(), 59.0);
        assert_eq!(outage_rate(&[2.5; 7], 0.3).unwrap(), 2.5);
        assert!(matches!(outage_rate(&[], 0.5), Err(Error::InsufficientSamples { .. })));
        assert!(outage_rate(&[1.0], 0.0).is_err());
        assert!(outage_rate(&[1.0, f64::NAN], 0.5).is_err());
    }

    #[test]
    fn trials_are_deterministic_and_dominated() {
        let s = setup(linear_topology(3), 200, Mode::Both);
        let snr = SnrConfig::from_db(5.0).unwrap();
        let a = run_trials(&s, snr, Parallelism(1)).unwrap();
        let b = run_trials(&s, snr, Parallelism(4)).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert!(r.rate_optimized.unwrap() >= r.rate_equal_time.unwrap() - 1e-12);
            assert!(r.rate_equal_time.unwrap() >= 0.0);
            assert!(r.active_relays_optimized.unwrap() <= 3);
        }
    }

    #[test]
    fn mode_selects_selectors() {
        let s = setup(linear_topology(2), 10, Mode::EqualTime);
        let recs = run_trials(&s, SnrConfig::new(1.0).unwrap(), Parallelism(1)).unwrap();
        assert!(recs.iter().all(|r| r.rate_optimized.is_none() && r.rate_equal_time.is_some()));
        let out = sweep(&s, &[0.0], 0.1, Parallelism(1)).unwrap();
        assert!(out.optimized.is_none() && out.equal_time.is_some());
    }

    #[test]
    fn sweep_is_monotone_in_snr_and_pool() {
        let grid = [0.0, 5.0, 10.0];
        // Pools {r1} and {r1, r2} share relay 1 and every common link draw.
        let one = Topology::new(vec![[0.0, 0.0], [0.5, 0.1], [1.0, 0.0]], 2.5, Layout::Custom).unwrap();
        let two = Topology::new(vec![[0.0, 0.0], [0.5, 0.1], [0.7, -0.1], [1.0, 0.0]], 2.5, Layout::Custom).unwrap();
        let mk = |t: Topology| TrialSetup {
            scheme: NumberingScheme::InstantaneousSourceRelay,
            ..setup(t, 500, Mode::Both)
        };
        let a = sweep(&mk(one), &grid, 0.02, Parallelism(0)).unwrap();
        let b = sweep(&mk(two), &grid, 0.02, Parallelism(0)).unwrap();
        let (ao, bo) = (a.optimized.unwrap(), b.optimized.unwrap());
        let ae = a.equal_time.unwrap();
        for s in 0..grid.len() {
            assert!(bo.outage_rate[s] >= ao.outage_rate[s]);
            assert!(ao.outage_rate[s] >= ae.outage_rate[s]);
            if s > 0 {
                assert!(ao.outage_rate[s] >= ao.outage_rate[s - 1]);
            }
        }
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let s = setup(linear_topology(1), 10, Mode::Both);
        assert!(sweep(&s, &[], 0.1, Parallelism(1)).is_err());
        assert!(sweep(&s, &[0.0], 0.01, Parallelism(1)).is_ok());
        assert!(sweep(&s, &[0.0], 0.0, Parallelism(1)).is_err());
        let random = TrialSetup {
            topology: crate::scenario::random_topology(4, 1).unwrap(),
            ..s
        };
        assert!(sweep(&random, &[0.0], 0.1, Parallelism(1)).is_err());
    }
}
