//! Monte Carlo replication harness: estimate PNS bounds from finite samples
//! many times and compare them against the exact bounds.
//!
//! Replication `i` under master seed `s` draws its experimental batch with
//! seed `derive_seed(derive_seed(s, i), 0)` and its observational batch with
//! `derive_seed(derive_seed(s, i), 1)`. Every grid point of a sweep reuses the
//! same master seed, so replication `i` at a smaller size sees a prefix of the
//! individuals it sees at a larger size.
//!
//! CSV column contracts:
//!
//! - replications: `rep,m,n,est_lower,est_upper,true_lower,true_upper,err_lower,err_upper,consistent,contains_true_pns`
//!   (a failed replication has every value column after `n` empty)
//! - sweep: `size,reps,mean_err_lower,mean_err_upper,frac_contains,frac_consistent,failed_reps`

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{pns_bounds, PnsBounds};
use crate::ci::{wald_margin, ConfidenceSpec};
use crate::error::{Error, Result};
use crate::oracle::{informer, TrueDistributions};
use crate::sampler::{draw_experimental, draw_observational, estimate};
use crate::scm::ScmModel;
use crate::seed::derive_seed;

/// Slack when testing whether the true PNS lies in an estimated interval.
pub const CONTAINMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub rep: u64,
    pub m: u64,
    pub n: u64,
    pub est_lower: f64,
    pub est_upper: f64,
    pub true_lower: f64,
    pub true_upper: f64,
    pub err_lower: f64,
    pub err_upper: f64,
    pub consistent: bool,
    pub contains_true_pns: bool,
}

impl ReplicationResult {
    pub fn max_err(&self) -> f64 {
        self.err_lower.max(self.err_upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplicationOutcome {
    Completed(ReplicationResult),
    /// An experimental arm was empty; the estimator is undefined.
    Failed {
        rep: u64,
        m: u64,
        n: u64,
    },
}

impl ReplicationOutcome {
    pub fn completed(&self) -> Option<&ReplicationResult> {
        match self {
            ReplicationOutcome::Completed(r) => Some(r),
            ReplicationOutcome::Failed { .. } => None,
        }
    }

    fn row(&self) -> ReplicationRow {
        match *self {
            ReplicationOutcome::Completed(r) => ReplicationRow {
                rep: r.rep,
                m: r.m,
                n: r.n,
                est_lower: Some(r.est_lower),
                est_upper: Some(r.est_upper),
                true_lower: Some(r.true_lower),
                true_upper: Some(r.true_upper),
                err_lower: Some(r.err_lower),
                err_upper: Some(r.err_upper),
                consistent: Some(r.consistent),
                contains_true_pns: Some(r.contains_true_pns),
            },
            ReplicationOutcome::Failed { rep, m, n } => ReplicationRow {
                rep,
                m,
                n,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct ReplicationRow {
    rep: u64,
    m: u64,
    n: u64,
    est_lower: Option<f64>,
    est_upper: Option<f64>,
    true_lower: Option<f64>,
    true_upper: Option<f64>,
    err_lower: Option<f64>,
    err_upper: Option<f64>,
    consistent: Option<bool>,
    contains_true_pns: Option<bool>,
}

impl ReplicationRow {
    fn outcome(self) -> Result<ReplicationOutcome> {
        let fields = (
            self.est_lower,
            self.est_upper,
            self.true_lower,
            self.true_upper,
            self.err_lower,
            self.err_upper,
            self.consistent,
            self.contains_true_pns,
        );
        match fields {
            (Some(el), Some(eu), Some(tl), Some(tu), Some(errl), Some(erru), Some(c), Some(k)) => {
                Ok(ReplicationOutcome::Completed(ReplicationResult {
                    rep: self.rep,
                    m: self.m,
                    n: self.n,
                    est_lower: el,
                    est_upper: eu,
                    true_lower: tl,
                    true_upper: tu,
                    err_lower: errl,
                    err_upper: erru,
                    consistent: c,
                    contains_true_pns: k,
                }))
            }
            (None, None, None, None, None, None, None, None) => Ok(ReplicationOutcome::Failed {
                rep: self.rep,
                m: self.m,
                n: self.n,
            }),
            _ => Err(Error::Domain(format!(
                "replication row {} is partially filled",
                self.rep
            ))),
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: u64,
    pub reps: u64,
    pub mean_err_lower: f64,
    pub mean_err_upper: f64,
    pub frac_contains: f64,
    pub frac_consistent: f64,
    pub failed_reps: u64,
}

impl SweepRow {
    /// Aggregate one grid point. Means and fractions are over completed
    /// replications, summed in replication order.
    pub fn aggregate(size: u64, outcomes: &[ReplicationOutcome]) -> Self {
        let done: Vec<&ReplicationResult> = outcomes.iter().filter_map(|o| o.completed()).collect();
        let k = done.len() as f64;
        let mean = |f: fn(&ReplicationResult) -> f64| done.iter().map(|r| f(r)).sum::<f64>() / k;
        let frac =
            |f: fn(&ReplicationResult) -> bool| done.iter().filter(|r| f(r)).count() as f64 / k;
        SweepRow {
            size,
            reps: outcomes.len() as u64,
            mean_err_lower: mean(|r| r.err_lower),
            mean_err_upper: mean(|r| r.err_upper),
            frac_contains: frac(|r| r.contains_true_pns),
            frac_consistent: frac(|r| r.consistent),
            failed_reps: (outcomes.len() - done.len()) as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub model: String,
    pub master_seed: u64,
    pub reps: u64,
    pub sizes: Vec<(u64, u64)>,
    pub rows: Vec<SweepRow>,
    /// Every replication, grouped by grid point in grid order.
    pub replications: Vec<ReplicationOutcome>,
}

impl ExperimentReport {
    pub fn write_replications_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_replications_csv(&self.replications, writer)
    }

    pub fn write_sweep_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Completed replications at grid size `size`.
    pub fn completed_at(&self, size: u64) -> impl Iterator<Item = &ReplicationResult> {
        self.replications
            .iter()
            .filter_map(|o| o.completed())
            .filter(move |r| r.m == size && r.n == size)
    }
}

pub fn write_replications_csv<W: Write>(outcomes: &[ReplicationOutcome], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in outcomes {
        w.serialize(o.row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_replications_csv<R: Read>(reader: R) -> Result<Vec<ReplicationOutcome>> {
    csv::Reader::from_reader(reader)
        .deserialize::<ReplicationRow>()
        .map(|row| row?.outcome())
        .collect()
}

pub fn read_sweep_csv<R: Read>(reader: R) -> Result<Vec<SweepRow>> {
    Ok(csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<_, csv::Error>>()?)
}

/// Recompute the sweep aggregates from per-replication rows, one row per
/// distinct `m` in order of first appearance.
pub fn aggregate_replications(outcomes: &[ReplicationOutcome]) -> Vec<SweepRow> {
    let size_of = |o: &ReplicationOutcome| match *o {
        ReplicationOutcome::Completed(r) => r.m,
        ReplicationOutcome::Failed { m, .. } => m,
    };
    let mut sizes: Vec<u64> = Vec::new();
    for o in outcomes {
        let s = size_of(o);
        if !sizes.contains(&s) {
            sizes.push(s);
        }
    }
    sizes
        .into_iter()
        .map(|s| {
            let group: Vec<ReplicationOutcome> = outcomes
                .iter()
                .copied()
                .filter(|o| size_of(o) == s)
                .collect();
            SweepRow::aggregate(s, &group)
        })
        .collect()
}

/// Single-parameter Wald coverage of P(y_x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldCoverage {
    pub m: u64,
    pub reps: u64,
    pub failed_reps: u64,
    /// Intervals built with the treated-arm count, the estimator's actual
    /// denominator.
    pub coverage_arm_count: f64,
    /// Intervals built with the whole experimental pool size `m`.
    pub coverage_pool_count: f64,
}

/// A model together with its exact distributions.
#[derive(Debug, Clone)]
pub struct Experiment {
    model: ScmModel,
    truth: TrueDistributions,
    true_bounds: PnsBounds,
}

impl Experiment {
    /// Runs the exhaustive oracle once.
    pub fn new(model: ScmModel) -> Self {
        let truth = informer(&model);
        Self::with_truth(model, truth)
    }

    pub fn with_truth(model: ScmModel, truth: TrueDistributions) -> Self {
        Self {
            model,
            true_bounds: truth.bounds(),
            truth,
        }
    }

    pub fn model(&self) -> &ScmModel {
        &self.model
    }

    pub fn truth(&self) -> &TrueDistributions {
        &self.truth
    }

    pub fn true_bounds(&self) -> &PnsBounds {
        &self.true_bounds
    }

    fn replicate(&self, m: u64, n: u64, rep: u64, master_seed: u64) -> Result<ReplicationOutcome> {
        let rep_seed = derive_seed(master_seed, rep);
        let exp_batch = draw_experimental(&self.model, m, derive_seed(rep_seed, 0))?;
        let obs_batch = draw_observational(&self.model, n, derive_seed(rep_seed, 1))?;
        let est = match estimate(&exp_batch, &obs_batch) {
            Ok(est) => est,
            Err(Error::EmptyArm { .. }) => return Ok(ReplicationOutcome::Failed { rep, m, n }),
            Err(e) => return Err(e),
        };
        let b = pns_bounds(&est.exp_hat, &est.obs_hat);
        let t = &self.true_bounds;
        Ok(ReplicationOutcome::Completed(ReplicationResult {
            rep,
            m,
            n,
            est_lower: b.lower,
            est_upper: b.upper,
            true_lower: t.lower,
            true_upper: t.upper,
            err_lower: (b.lower - t.lower).abs(),
            err_upper: (b.upper - t.upper).abs(),
            consistent: b.consistent,
            contains_true_pns: b.contains(self.truth.true_pns, CONTAINMENT_TOL),
        }))
    }

    /// `reps` independent replications at sizes (m, n), in replication order.
    /// Only invalid arguments are errors; an empty experimental arm is
    /// recorded as a failed replication.
    pub fn run_replications(
        &self,
        m: u64,
        n: u64,
        reps: u64,
        master_seed: u64,
    ) -> Result<Vec<ReplicationOutcome>> {
        if reps == 0 {
            return Err(Error::InvalidCount { name: "reps" });
        }
        if m == 0 || n == 0 {
            return Err(Error::InvalidCount {
                name: "sample size",
            });
        }
        (0..reps)
            .into_par_iter()
            .map(|rep| self.replicate(m, n, rep, master_seed))
            .collect()
    }

    /// Replications at m = n = size for each grid size.
    pub fn error_sweep(
        &self,
        grid: &[u64],
        reps: u64,
        master_seed: u64,
    ) -> Result<ExperimentReport> {
        if grid.is_empty() {
            return Err(Error::Domain("size grid must not be empty".into()));
        }
        let mut rows = Vec::with_capacity(grid.len());
        let mut replications = Vec::with_capacity(grid.len() * reps as usize);
        for &size in grid {
            let outcomes = self.run_replications(size, size, reps, master_seed)?;
            rows.push(SweepRow::aggregate(size, &outcomes));
            replications.extend(outcomes);
        }
        Ok(ExperimentReport {
            model: self.model.name.clone(),
            master_seed,
            reps,
            sizes: grid.iter().map(|&s| (s, s)).collect(),
            rows,
            replications,
        })
    }

    /// How often the Wald interval for P(y_x) covers the true value, using the
    /// experimental batches of the replication scheme above.
    pub fn wald_coverage(
        &self,
        m: u64,
        reps: u64,
        master_seed: u64,
        conf: &ConfidenceSpec,
    ) -> Result<WaldCoverage> {
        if reps == 0 {
            return Err(Error::InvalidCount { name: "reps" });
        }
        let truth = self.truth.exp.p_y_do_x();
        let hits: Vec<Option<(bool, bool)>> = (0..reps)
            .into_par_iter()
            .map(|rep| -> Result<_> {
                let seed = derive_seed(derive_seed(master_seed, rep), 0);
                let counts = draw_experimental(&self.model, m, seed)?.counts();
                let treated = counts.treated();
                if treated == 0 || counts.control() == 0 {
                    return Ok(None);
                }
                let p_hat = counts.n11 as f64 / treated as f64;
                let err = (p_hat - truth).abs();
                Ok(Some((
                    err <= wald_margin(p_hat, treated, conf)?,
                    err <= wald_margin(p_hat, m, conf)?,
                )))
            })
            .collect::<Result<_>>()?;
        let done: Vec<(bool, bool)> = hits.iter().flatten().copied().collect();
        let k = done.len() as f64;
        Ok(WaldCoverage {
            m,
            reps,
            failed_reps: reps - done.len() as u64,
            coverage_arm_count: done.iter().filter(|h| h.0).count() as f64 / k,
            coverage_pool_count: done.iter().filter(|h| h.1).count() as f64 / k,
        })
    }
}
