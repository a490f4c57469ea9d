//! Exact ("informer") distributions of an [`ScmModel`] by enumerating all
//! 2^22 exogenous states.
//!
//! States are visited as a 22-bit counter (u_z low, then u_x, then u_y) split
//! into fixed chunks. Each chunk keeps Neumaier-compensated partial sums, and
//! chunks are merged in counter order. The result is bit-identical for any
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{pns_bounds, ExperimentalDist, ObservationalDist, PnsBounds};
use crate::scm::{
    outcome_rule, outcome_value, treatment_rule, ScmModel, NUM_CONFOUNDERS, NUM_EXOGENOUS, Z_MASK,
};

const NUM_STATES: u32 = 1 << NUM_EXOGENOUS;
const CHUNK_BITS: u32 = 16;

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueDistributions {
    pub exp: ExperimentalDist,
    pub obs: ObservationalDist,
    /// P(y_x, y'_{x'}) under the model.
    pub true_pns: f64,
}

impl TrueDistributions {
    pub fn bounds(&self) -> PnsBounds {
        pns_bounds(&self.exp, &self.obs)
    }
}

/// Which accumulators an enumeration should fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleFields {
    pub experimental: bool,
    pub observational: bool,
    pub true_pns: bool,
    /// P(Y = 1) accumulated directly rather than from the cells.
    pub marginal_y: bool,
}

impl OracleFields {
    pub const ALL: OracleFields = OracleFields {
        experimental: true,
        observational: true,
        true_pns: true,
        marginal_y: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PartialTrueDistributions {
    pub exp: Option<ExperimentalDist>,
    pub obs: Option<ObservationalDist>,
    pub true_pns: Option<f64>,
    pub marginal_y: Option<f64>,
}

#[derive(Clone, Copy, Default)]
struct Accumulators {
    y_do_x: CompensatedSum,
    y_do_xprime: CompensatedSum,
    /// (x, y) cells indexed by 2x + y.
    cells: [CompensatedSum; 4],
    pns: CompensatedSum,
    y: CompensatedSum,
}

impl Accumulators {
    fn merge(&mut self, other: &Accumulators) {
        self.y_do_x.merge(&other.y_do_x);
        self.y_do_xprime.merge(&other.y_do_xprime);
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        self.pns.merge(&other.pns);
        self.y.merge(&other.y);
    }
}

/// Per-confounder-vector quantities shared by the four (u_x, u_y) combinations.
struct ConfounderTable {
    weight: Vec<f64>,
    m_x: Vec<f64>,
    m_y: Vec<f64>,
}

impl ConfounderTable {
    fn new(model: &ScmModel) -> Self {
        let len = 1usize << NUM_CONFOUNDERS;
        let mut weight = vec![0.0; len];
        let mut m_x = vec![0.0; len];
        let mut m_y = vec![0.0; len];
        weight
            .par_iter_mut()
            .zip(m_x.par_iter_mut())
            .zip(m_y.par_iter_mut())
            .enumerate()
            .for_each(|(z, ((w, mx), my))| {
                let z = z as u32;
                let mut p = 1.0;
                for (i, &t) in model.theta_z.iter().enumerate() {
                    p *= if (z >> i) & 1 == 1 { t } else { 1.0 - t };
                }
                *w = p;
                *mx = model.m_x(z);
                *my = model.m_y(z);
            });
        Self { weight, m_x, m_y }
    }
}

fn enumerate_chunk(
    model: &ScmModel,
    table: &ConfounderTable,
    fields: OracleFields,
    chunk: u32,
) -> Accumulators {
    let mut acc = Accumulators::default();
    let start = chunk << CHUNK_BITS;
    let end = start + (1 << CHUNK_BITS);
    for index in start..end {
        let z = (index & Z_MASK) as usize;
        let u_x = (index >> NUM_CONFOUNDERS) & 1 == 1;
        let u_y = (index >> (NUM_CONFOUNDERS + 1)) & 1 == 1;
        let px = if u_x {
            model.theta_x
        } else {
            1.0 - model.theta_x
        };
        let py = if u_y {
            model.theta_y
        } else {
            1.0 - model.theta_y
        };
        let w = table.weight[z] * px * py;
        if w == 0.0 {
            continue;
        }
        let m_y = table.m_y[z];
        let y1 = outcome_rule(outcome_value(model.c, true, m_y, u_y));
        let y0 = outcome_rule(outcome_value(model.c, false, m_y, u_y));
        if fields.experimental {
            if y1 {
                acc.y_do_x.add(w);
            }
            if y0 {
                acc.y_do_xprime.add(w);
            }
        }
        if fields.true_pns && y1 && !y0 {
            acc.pns.add(w);
        }
        if fields.observational || fields.marginal_y {
            let x = treatment_rule(table.m_x[z], u_x);
            let y = if x { y1 } else { y0 };
            if fields.observational {
                acc.cells[2 * usize::from(x) + usize::from(y)].add(w);
            }
            if fields.marginal_y && y {
                acc.y.add(w);
            }
        }
    }
    acc
}

/// Enumerate only the requested quantities.
pub fn informer_sparse(model: &ScmModel, fields: OracleFields) -> PartialTrueDistributions {
    let table = ConfounderTable::new(model);
    let chunks: Vec<Accumulators> = (0..NUM_STATES >> CHUNK_BITS)
        .into_par_iter()
        .map(|chunk| enumerate_chunk(model, &table, fields, chunk))
        .collect();
    let mut total = Accumulators::default();
    for chunk in &chunks {
        total.merge(chunk);
    }

    let unit = |v: f64| v.clamp(0.0, 1.0);
    PartialTrueDistributions {
        exp: fields.experimental.then(|| {
            ExperimentalDist::new(unit(total.y_do_x.value()), unit(total.y_do_xprime.value()))
                .expect("clamped to [0, 1]")
        }),
        obs: fields.observational.then(|| {
            let c = total.cells.map(|c| unit(c.value()));
            // cells indexed 2x + y: [x'y', x'y, xy', xy]
            ObservationalDist::new(c[3], c[2], c[1], c[0]).expect("enumerated cells are normalized")
        }),
        true_pns: fields.true_pns.then(|| unit(total.pns.value())),
        marginal_y: fields.marginal_y.then(|| unit(total.y.value())),
    }
}

/// Exact experimental and observational distributions and the true PNS.
pub fn informer(model: &ScmModel) -> TrueDistributions {
    let p = informer_sparse(model, OracleFields::ALL);
    TrueDistributions {
        exp: p.exp.expect("requested"),
        obs: p.obs.expect("requested"),
        true_pns: p.true_pns.expect("requested"),
    }
}
