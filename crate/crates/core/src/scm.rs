//! Binary structural causal model with 20 independent binary confounders.
//!
//! ```text
//! Z_i = U_Zi                          i = 1..20
//! X   = 1  iff  M_X + U_X > 0.5
//! Y   = 1  iff  0 < C X + M_Y + U_Y < 1  or  1 < C X + M_Y + U_Y < 2
//! ```
//!
//! `M_X = a . Z` and `M_Y = b . Z`. Every exogenous variable is Bernoulli and
//! all comparisons are strict, so a value landing exactly on a threshold falls
//! in the "0" branch.
//!
//! Confounder vectors are packed into the low 20 bits of a `u32`, bit `i`
//! holding `Z_{i+1}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CONFOUNDERS: usize = 20;
pub const NUM_EXOGENOUS: usize = NUM_CONFOUNDERS + 2;
pub const Z_MASK: u32 = (1 << NUM_CONFOUNDERS) - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct ScmModel {
    pub name: String,
    /// Coefficients of M_X.
    pub a: [f64; NUM_CONFOUNDERS],
    /// Coefficients of M_Y.
    pub b: [f64; NUM_CONFOUNDERS],
    pub c: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub theta_z: [f64; NUM_CONFOUNDERS],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
    theta_x: f64,
    theta_y: f64,
    theta_z: Vec<f64>,
}

impl TryFrom<RawModel> for ScmModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        fn exactly_20(field: &str, v: Vec<f64>) -> Result<[f64; NUM_CONFOUNDERS]> {
            let len = v.len();
            v.try_into().map_err(|_| {
                Error::InvalidModel(format!(
                    "`{field}` must have exactly {NUM_CONFOUNDERS} entries, got {len}"
                ))
            })
        }
        let model = ScmModel {
            name: raw.name,
            a: exactly_20("a", raw.a)?,
            b: exactly_20("b", raw.b)?,
            c: raw.c,
            theta_x: raw.theta_x,
            theta_y: raw.theta_y,
            theta_z: exactly_20("theta_z", raw.theta_z)?,
        };
        model.validate()?;
        Ok(model)
    }
}

/// The fixed models shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Model1,
    Model2,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Model1, Preset::Model2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Model1 => "model1",
            Preset::Model2 => "model2",
        }
    }

    /// The preset's model file, as shipped.
    pub fn json(self) -> &'static str {
        match self {
            Preset::Model1 => include_str!("../data/model1.json"),
            Preset::Model2 => include_str!("../data/model2.json"),
        }
    }

    pub fn model(self) -> ScmModel {
        ScmModel::from_json(self.json()).expect("shipped preset files are valid")
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model1" => Ok(Preset::Model1),
            "model2" => Ok(Preset::Model2),
            other => Err(Error::Domain(format!(
                "unknown preset `{other}` (expected model1 or model2)"
            ))),
        }
    }
}

/// One individual: the 22 exogenous bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExogenousState {
    pub u_x: bool,
    pub u_y: bool,
    /// Z_1..Z_20 in bits 0..19.
    pub u_z: u32,
}

impl ExogenousState {
    /// Decode the enumeration counter: u_z in the low 20 bits, then u_x, then u_y.
    pub fn from_index(index: u32) -> Self {
        debug_assert!(index < 1 << NUM_EXOGENOUS);
        Self {
            u_z: index & Z_MASK,
            u_x: (index >> NUM_CONFOUNDERS) & 1 == 1,
            u_y: (index >> (NUM_CONFOUNDERS + 1)) & 1 == 1,
        }
    }

    pub fn index(&self) -> u32 {
        (self.u_z & Z_MASK)
            | (u32::from(self.u_x) << NUM_CONFOUNDERS)
            | (u32::from(self.u_y) << (NUM_CONFOUNDERS + 1))
    }
}

/// `coeffs . z`, accumulated in ascending index order.
#[inline]
pub fn dot_bits(coeffs: &[f64; NUM_CONFOUNDERS], z: u32) -> f64 {
    let mut acc = 0.0;
    for (i, &w) in coeffs.iter().enumerate() {
        if (z >> i) & 1 == 1 {
            acc += w;
        }
    }
    acc
}

/// Treatment rule given the already-evaluated M_X.
#[inline]
pub fn treatment_rule(m_x: f64, u_x: bool) -> bool {
    m_x + f64::from(u8::from(u_x)) > 0.5
}

/// Outcome rule applied to `v = C x + M_Y + U_Y`.
#[inline]
pub fn outcome_rule(v: f64) -> bool {
    (v > 0.0 && v < 1.0) || (v > 1.0 && v < 2.0)
}

/// `C x + M_Y + U_Y`, always summed in this order.
#[inline]
pub fn outcome_value(c: f64, x: bool, m_y: f64, u_y: bool) -> f64 {
    let cx = if x { c } else { 0.0 };
    cx + m_y + f64::from(u8::from(u_y))
}

impl ScmModel {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .a
            .iter()
            .chain(&self.b)
            .chain(std::iter::once(&self.c))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        let thetas = self.theta_z.iter().chain([&self.theta_x, &self.theta_y]);
        for &t in thetas {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidModel(format!(
                    "Bernoulli parameter {t} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn m_x(&self, z: u32) -> f64 {
        dot_bits(&self.a, z)
    }

    pub fn m_y(&self, z: u32) -> f64 {
        dot_bits(&self.b, z)
    }

    pub fn f_x(&self, z: u32, u_x: bool) -> bool {
        treatment_rule(self.m_x(z), u_x)
    }

    pub fn f_y(&self, x: bool, z: u32, u_y: bool) -> bool {
        outcome_rule(outcome_value(self.c, x, self.m_y(z), u_y))
    }

    /// Probability weight of one exogenous state.
    pub fn weight(&self, state: &ExogenousState) -> f64 {
        let bern = |theta: f64, bit: bool| if bit { theta } else { 1.0 - theta };
        let mut w = 1.0;
        for (i, &t) in self.theta_z.iter().enumerate() {
            w *= bern(t, (state.u_z >> i) & 1 == 1);
        }
        w * bern(self.theta_x, state.u_x) * bern(self.theta_y, state.u_y)
    }

    /// Random model: coefficients and C uniform on [-1, 1], Bernoulli
    /// parameters uniform on [0, 1]. Draw order is a, b, c, theta_z,
    /// theta_x, theta_y from ChaCha8 seeded with `seed`.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs =
            || -> [f64; NUM_CONFOUNDERS] { std::array::from_fn(|_| rng.random_range(-1.0..=1.0)) };
        let a = coeffs();
        let b = coeffs();
        let c = rng.random_range(-1.0..=1.0);
        let theta_z = std::array::from_fn(|_| rng.random_range(0.0..=1.0));
        let theta_x = rng.random_range(0.0..=1.0);
        let theta_y = rng.random_range(0.0..=1.0);
        ScmModel {
            name: format!("random-{seed}"),
            a,
            b,
            c,
            theta_x,
            theta_y,
            theta_z,
        }
    }
}
