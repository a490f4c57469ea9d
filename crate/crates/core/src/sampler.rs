//! Finite experimental and observational samples from an [`ScmModel`], and
//! the frequency estimators built on them.
//!
//! Draw `j` of a batch with seed `s` uses ChaCha8 keyed by `s` on stream `j`,
//! consuming uniforms in the order u_z[0..20], u_x, u_y and, for experimental
//! draws, the treatment coin. A batch is a pure function of (model, size, seed).

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{ExperimentalDist, ObservationalDist};
use crate::error::{Error, Result, TreatmentArm};
use crate::scm::{ExogenousState, ScmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Experimental,
    Observational,
}

impl std::str::FromStr for SampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experimental" => Ok(SampleKind::Experimental),
            "observational" => Ok(SampleKind::Observational),
            other => Err(Error::Domain(format!(
                "unknown sample kind `{other}` (expected experimental or observational)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    pub kind: SampleKind,
    /// (x, y) per individual.
    pub pairs: Vec<(bool, bool)>,
    pub seed: u64,
}

/// Sidecar metadata written next to a batch CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub kind: SampleKind,
    pub seed: u64,
    pub size: u64,
}

/// Counts of (x, y) pairs. `n10` is x = 1, y = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    pub fn treated(&self) -> u64 {
        self.n11 + self.n10
    }

    pub fn control(&self) -> u64 {
        self.n01 + self.n00
    }
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn counts(&self) -> CellCounts {
        let mut c = CellCounts::default();
        for &(x, y) in &self.pairs {
            match (x, y) {
                (true, true) => c.n11 += 1,
                (true, false) => c.n10 += 1,
                (false, true) => c.n01 += 1,
                (false, false) => c.n00 += 1,
            }
        }
        c
    }

    pub fn meta(&self) -> BatchMeta {
        BatchMeta {
            kind: self.kind,
            seed: self.seed,
            size: self.pairs.len() as u64,
        }
    }

    /// CSV with header `x,y`, one 0/1 row per individual.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y"])?;
        for &(x, y) in &self.pairs {
            w.write_record([bit(x), bit(y)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn draw_state(model: &ScmModel, rng: &mut ChaCha8Rng) -> ExogenousState {
    let mut u_z = 0u32;
    for (i, &t) in model.theta_z.iter().enumerate() {
        if rng.random::<f64>() < t {
            u_z |= 1 << i;
        }
    }
    let u_x = rng.random::<f64>() < model.theta_x;
    let u_y = rng.random::<f64>() < model.theta_y;
    ExogenousState { u_x, u_y, u_z }
}

fn draw_batch(model: &ScmModel, size: u64, seed: u64, kind: SampleKind) -> Result<SampleBatch> {
    if size == 0 {
        return Err(Error::InvalidCount {
            name: "sample size",
        });
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..size)
        .into_par_iter()
        .map(|j| {
            let mut rng = base.clone();
            rng.set_stream(j);
            let s = draw_state(model, &mut rng);
            let x = match kind {
                SampleKind::Experimental => rng.random::<f64>() < 0.5,
                SampleKind::Observational => model.f_x(s.u_z, s.u_x),
            };
            (x, model.f_y(x, s.u_z, s.u_y))
        })
        .collect();
    Ok(SampleBatch { kind, pairs, seed })
}

/// Randomized experiment: X ~ Bernoulli(0.5) regardless of U_X and Z.
pub fn draw_experimental(model: &ScmModel, m: u64, seed: u64) -> Result<SampleBatch> {
    draw_batch(model, m, seed, SampleKind::Experimental)
}

/// Natural assignment: X = f_X(M_X, U_X).
pub fn draw_observational(model: &ScmModel, n: u64, seed: u64) -> Result<SampleBatch> {
    draw_batch(model, n, seed, SampleKind::Observational)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedDistributions {
    pub exp_hat: ExperimentalDist,
    pub obs_hat: ObservationalDist,
    pub m: u64,
    pub n: u64,
    /// Experimental individuals with x = 1.
    pub n_treated: u64,
}

impl EstimatedDistributions {
    /// Frequency estimates: P(y_x) within each experimental arm, P(x, y)
    /// over all observational individuals.
    pub fn from_counts(experimental: &CellCounts, observational: &CellCounts) -> Result<Self> {
        let treated = experimental.treated();
        let control = experimental.control();
        if treated == 0 {
            return Err(Error::EmptyArm {
                arm: TreatmentArm::Treated,
            });
        }
        if control == 0 {
            return Err(Error::EmptyArm {
                arm: TreatmentArm::Control,
            });
        }
        let n = observational.total();
        if n == 0 {
            return Err(Error::InvalidCount {
                name: "observational sample size",
            });
        }
        let exp_hat = ExperimentalDist::new(
            experimental.n11 as f64 / treated as f64,
            experimental.n01 as f64 / control as f64,
        )?;
        let nf = n as f64;
        let obs_hat = ObservationalDist::new(
            observational.n11 as f64 / nf,
            observational.n10 as f64 / nf,
            observational.n01 as f64 / nf,
            observational.n00 as f64 / nf,
        )?;
        Ok(Self {
            exp_hat,
            obs_hat,
            m: experimental.total(),
            n,
            n_treated: treated,
        })
    }

    pub fn n_control(&self) -> u64 {
        self.m - self.n_treated
    }
}

pub fn estimate(
    exp_batch: &SampleBatch,
    obs_batch: &SampleBatch,
) -> Result<EstimatedDistributions> {
    if exp_batch.kind != SampleKind::Experimental || obs_batch.kind != SampleKind::Observational {
        return Err(Error::Domain(
            "estimate expects an experimental batch followed by an observational batch".into(),
        ));
    }
    EstimatedDistributions::from_counts(&exp_batch.counts(), &obs_batch.counts())
}
