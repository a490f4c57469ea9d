//! Tight bounds on PNS = P(y_x, y'_{x'}) from experimental and observational data.
//!
//! The lower bound is the max over four arms and the upper bound the min over
//! four arms. Arm values are kept unclamped so finite-sample error analysis can
//! see how far an estimate strays outside [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of the observational cells.
pub const NORMALIZATION_TOL: f64 = 1e-9;

fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

/// Causal effects P(y_x) and P(y_{x'}) from a randomized experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExperimental")]
pub struct ExperimentalDist {
    p_y_given_do_x: f64,
    p_y_given_do_xprime: f64,
}

#[derive(Deserialize)]
struct RawExperimental {
    p_y_given_do_x: f64,
    p_y_given_do_xprime: f64,
}

impl TryFrom<RawExperimental> for ExperimentalDist {
    type Error = Error;

    fn try_from(raw: RawExperimental) -> Result<Self> {
        ExperimentalDist::new(raw.p_y_given_do_x, raw.p_y_given_do_xprime)
    }
}

impl ExperimentalDist {
    pub fn new(p_y_given_do_x: f64, p_y_given_do_xprime: f64) -> Result<Self> {
        Ok(Self {
            p_y_given_do_x: check_probability("p_y_given_do_x", p_y_given_do_x)?,
            p_y_given_do_xprime: check_probability("p_y_given_do_xprime", p_y_given_do_xprime)?,
        })
    }

    /// P(y_x).
    pub fn p_y_do_x(&self) -> f64 {
        self.p_y_given_do_x
    }

    /// P(y_{x'}).
    pub fn p_y_do_xprime(&self) -> f64 {
        self.p_y_given_do_xprime
    }

    /// P(y'_{x'}) = 1 - P(y_{x'}).
    pub fn p_yprime_do_xprime(&self) -> f64 {
        1.0 - self.p_y_given_do_xprime
    }
}

/// Joint observational cells of (X, Y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawObservational")]
pub struct ObservationalDist {
    p_xy: f64,
    p_xy_prime: f64,
    p_xprime_y: f64,
    p_xprime_yprime: f64,
}

#[derive(Deserialize)]
struct RawObservational {
    p_xy: f64,
    p_xy_prime: f64,
    p_xprime_y: f64,
    p_xprime_yprime: f64,
}

impl TryFrom<RawObservational> for ObservationalDist {
    type Error = Error;

    fn try_from(raw: RawObservational) -> Result<Self> {
        ObservationalDist::new(
            raw.p_xy,
            raw.p_xy_prime,
            raw.p_xprime_y,
            raw.p_xprime_yprime,
        )
    }
}

impl ObservationalDist {
    pub fn new(p_xy: f64, p_xy_prime: f64, p_xprime_y: f64, p_xprime_yprime: f64) -> Result<Self> {
        let dist = Self {
            p_xy: check_probability("p_xy", p_xy)?,
            p_xy_prime: check_probability("p_xy_prime", p_xy_prime)?,
            p_xprime_y: check_probability("p_xprime_y", p_xprime_y)?,
            p_xprime_yprime: check_probability("p_xprime_yprime", p_xprime_yprime)?,
        };
        let sum = dist.sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(dist)
    }

    pub fn p_xy(&self) -> f64 {
        self.p_xy
    }

    pub fn p_xy_prime(&self) -> f64 {
        self.p_xy_prime
    }

    pub fn p_xprime_y(&self) -> f64 {
        self.p_xprime_y
    }

    pub fn p_xprime_yprime(&self) -> f64 {
        self.p_xprime_yprime
    }

    /// P(y), always derived from the cells.
    pub fn p_y(&self) -> f64 {
        self.p_xy + self.p_xprime_y
    }

    pub fn sum(&self) -> f64 {
        self.p_xy + self.p_xy_prime + self.p_xprime_y + self.p_xprime_yprime
    }
}

/// The PNS interval together with the raw arm values behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnsBounds {
    pub lower: f64,
    pub upper: f64,
    /// `[0, P(y_x)-P(y_x'), P(y)-P(y_x'), P(y_x)-P(y)]`
    pub lower_arms: [f64; 4],
    /// `[P(y_x), P(y'_x'), P(x,y)+P(x',y'), P(y_x)-P(y_x')+P(x,y')+P(x',y)]`
    pub upper_arms: [f64; 4],
    /// False when the raw max arm exceeds the raw min arm; the interval is
    /// then data-inconsistent rather than a valid bound.
    pub consistent: bool,
}

impl PnsBounds {
    pub fn raw_lower(&self) -> f64 {
        self.lower_arms
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn raw_upper(&self) -> f64 {
        self.upper_arms
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Whether `value` lies in `[lower - tol, upper + tol]`.
    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lower - tol && value <= self.upper + tol
    }
}

pub fn lower_arms(exp: &ExperimentalDist, obs: &ObservationalDist) -> [f64; 4] {
    let p_y = obs.p_y();
    [
        0.0,
        exp.p_y_do_x() - exp.p_y_do_xprime(),
        p_y - exp.p_y_do_xprime(),
        exp.p_y_do_x() - p_y,
    ]
}

pub fn upper_arms(exp: &ExperimentalDist, obs: &ObservationalDist) -> [f64; 4] {
    [
        exp.p_y_do_x(),
        exp.p_yprime_do_xprime(),
        obs.p_xy() + obs.p_xprime_yprime(),
        exp.p_y_do_x() - exp.p_y_do_xprime() + obs.p_xy_prime() + obs.p_xprime_y(),
    ]
}

/// Tight bounds on PNS from an experimental and an observational distribution.
pub fn pns_bounds(exp: &ExperimentalDist, obs: &ObservationalDist) -> PnsBounds {
    let lower_arms = lower_arms(exp, obs);
    let upper_arms = upper_arms(exp, obs);
    let raw_lower = lower_arms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw_upper = upper_arms.iter().copied().fold(f64::INFINITY, f64::min);
    PnsBounds {
        lower: raw_lower.clamp(0.0, 1.0),
        upper: raw_upper.clamp(0.0, 1.0),
        lower_arms,
        upper_arms,
        consistent: raw_lower <= raw_upper,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp(a: f64, b: f64) -> ExperimentalDist {
        ExperimentalDist::new(a, b).unwrap()
    }

    fn obs(a: f64, b: f64, c: f64, d: f64) -> ObservationalDist {
        ObservationalDist::new(a, b, c, d).unwrap()
    }

    #[test]
    fn perfect_effect_forces_pns_one() {
        let b = pns_bounds(&exp(1.0, 0.0), &obs(0.5, 0.0, 0.0, 0.5));
        assert_eq!(b.lower, 1.0);
        assert_eq!(b.upper, 1.0);
        assert!(b.consistent);
    }

    #[test]
    fn zero_effect() {
        let b = pns_bounds(&exp(0.5, 0.5), &obs(0.25, 0.25, 0.25, 0.25));
        assert_eq!(b.lower_arms, [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.upper_arms, [0.5, 0.5, 0.5, 0.5]);
        assert_eq!(b.lower, 0.0);
        assert_eq!(b.upper, 0.5);
        assert!(b.consistent);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(
            ExperimentalDist::new(1.2, 0.0),
            Err(Error::InvalidProbability {
                name: "p_y_given_do_x",
                ..
            })
        ));
        assert!(ExperimentalDist::new(0.2, f64::NAN).is_err());
        assert!(matches!(
            ObservationalDist::new(0.5, 0.5, 0.5, 0.0),
            Err(Error::NotNormalized { .. })
        ));
        assert!(ObservationalDist::new(0.25, 0.25, 0.25, 0.25 + 5e-10).is_ok());
    }

    #[test]
    fn deserialization_validates() {
        let ok: ObservationalDist = serde_json::from_str(
            r#"{"p_xy":0.1,"p_xy_prime":0.2,"p_xprime_y":0.3,"p_xprime_yprime":0.4}"#,
        )
        .unwrap();
        assert_eq!(ok.p_y(), 0.1 + 0.3);
        assert!(serde_json::from_str::<ExperimentalDist>(
            r#"{"p_y_given_do_x":-0.1,"p_y_given_do_xprime":0.3}"#
        )
        .is_err());
    }

    #[test]
    fn inverted_estimates_flagged_not_rejected() {
        // P(y_x) - P(y_x') = 0.6 but P(x,y) + P(x',y') = 0.2.
        let b = pns_bounds(&exp(0.8, 0.2), &obs(0.1, 0.4, 0.4, 0.1));
        assert!(!b.consistent);
        assert!(b.raw_lower() > b.raw_upper());
        assert!((b.lower - 0.6).abs() < 1e-15);
        assert!((b.upper - 0.2).abs() < 1e-15);
    }

    #[test]
    fn clamps_envelope_but_keeps_raw_arms() {
        // An upper arm can go negative only through rounding in estimates; fake
        // it with a large negative effect.
        let b = pns_bounds(&exp(0.0, 1.0), &obs(0.0, 0.5, 0.5, 0.0));
        assert_eq!(b.upper_arms[3], -1.0 + 0.5 + 0.5);
        assert_eq!(b.upper, 0.0);
        assert_eq!(b.lower_arms[1], -1.0);
        assert_eq!(b.lower, 0.0);
    }

    /// Joint distribution over (X, Y_1, Y_0) on a lattice of step 1/100,
    /// stored as integer counts summing to 100. Index = 4x + 2y1 + y0.
    fn marginals(j: &[u32; 8]) -> (ExperimentalDist, ObservationalDist, u32) {
        let c = |x: usize, y1: usize, y0: usize| j[4 * x + 2 * y1 + y0];
        let p_y1 = c(0, 1, 0) + c(0, 1, 1) + c(1, 1, 0) + c(1, 1, 1);
        let p_y0 = c(0, 0, 1) + c(0, 1, 1) + c(1, 0, 1) + c(1, 1, 1);
        let xy = c(1, 1, 0) + c(1, 1, 1);
        let xyp = c(1, 0, 0) + c(1, 0, 1);
        let xpy = c(0, 0, 1) + c(0, 1, 1);
        let xpyp = c(0, 0, 0) + c(0, 1, 0);
        let pns = c(0, 1, 0) + c(1, 1, 0);
        let f = |k: u32| k as f64 / 100.0;
        (
            exp(f(p_y1), f(p_y0)),
            obs(f(xy), f(xyp), f(xpy), f(xpyp)),
            pns,
        )
    }

    /// Min and max PNS (in lattice units) over every joint on the 1/100
    /// lattice that reproduces the given marginals.
    fn brute_force_pns_range(j: &[u32; 8]) -> (u32, u32) {
        let c = |x: usize, y1: usize, y0: usize| j[4 * x + 2 * y1 + y0] as i64;
        let p_y1 = c(0, 1, 0) + c(0, 1, 1) + c(1, 1, 0) + c(1, 1, 1);
        let p_y0 = c(0, 0, 1) + c(0, 1, 1) + c(1, 0, 1) + c(1, 1, 1);
        let xy = c(1, 1, 0) + c(1, 1, 1);
        let xyp = c(1, 0, 0) + c(1, 0, 1);
        let xpy = c(0, 0, 1) + c(0, 1, 1);
        let xpyp = c(0, 0, 0) + c(0, 1, 0);
        // Free cells: a=(1,1,1) in [0,xy], b=(1,0,1) in [0,xyp],
        // d=(0,1,0) in [0,xpyp], c=(0,1,1) in [0,xpy].
        // Experimental constraints pin c and b given a and d.
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for a in 0..=xy {
            for d in 0..=xpyp {
                let cc = p_y1 - xy - d;
                let b = p_y0 - xpy - a;
                if !(0..=xpy).contains(&cc) || !(0..=xyp).contains(&b) {
                    continue;
                }
                let pns = (xy - a) + d;
                lo = lo.min(pns);
                hi = hi.max(pns);
            }
        }
        assert!(lo <= hi, "the generating joint itself is feasible");
        (lo as u32, hi as u32)
    }

    fn lattice_joint() -> impl Strategy<Value = [u32; 8]> {
        // Seven cut points in [0, 100] give an 8-cell composition of 100.
        proptest::collection::vec(0u32..=100, 7).prop_map(|mut cuts| {
            cuts.sort_unstable();
            let mut j = [0u32; 8];
            let mut prev = 0;
            for (i, &cut) in cuts.iter().enumerate() {
                j[i] = cut - prev;
                prev = cut;
            }
            j[7] = 100 - prev;
            j
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn bounds_are_tight_against_lattice_enumeration(j in lattice_joint()) {
            let (e, o, pns) = marginals(&j);
            let b = pns_bounds(&e, &o);
            let (lo, hi) = brute_force_pns_range(&j);
            prop_assert!(b.consistent);
            prop_assert!(b.contains(pns as f64 / 100.0, 1e-12));
            prop_assert!((b.lower - lo as f64 / 100.0).abs() < 1e-12);
            prop_assert!((b.upper - hi as f64 / 100.0).abs() < 1e-12);
        }

        #[test]
        fn arms_finite_and_envelope_in_unit_interval(
            pyx in 0.0..=1.0f64, pyxp in 0.0..=1.0f64,
            w in proptest::array::uniform4(0.0..1.0f64),
        ) {
            let total: f64 = w.iter().sum::<f64>().max(1e-9);
            let o = ObservationalDist::new(w[0] / total, w[1] / total, w[2] / total, 1.0 - (w[0] + w[1] + w[2]) / total).unwrap();
            let b = pns_bounds(&exp(pyx, pyxp), &o);
            prop_assert!(b.lower_arms.iter().chain(&b.upper_arms).all(|v| v.is_finite()));
            prop_assert!((0.0..=1.0).contains(&b.lower));
            prop_assert!((0.0..=1.0).contains(&b.upper));
            if b.consistent {
                prop_assert!(b.lower <= b.upper);
            }
        }

        #[test]
        fn relabeling_maps_interval_onto_itself(j in lattice_joint()) {
            let (e, o, _) = marginals(&j);
            // x <-> x' and y <-> y'
            let relabel = |e: &ExperimentalDist, o: &ObservationalDist| {
                (
                    exp(1.0 - e.p_y_do_xprime(), 1.0 - e.p_y_do_x()),
                    obs(o.p_xprime_yprime(), o.p_xprime_y(), o.p_xy_prime(), o.p_xy()),
                )
            };
            let b = pns_bounds(&e, &o);
            let (e1, o1) = relabel(&e, &o);
            let b1 = pns_bounds(&e1, &o1);
            prop_assert!((b.lower - b1.lower).abs() < 1e-12);
            prop_assert!((b.upper - b1.upper).abs() < 1e-12);
            let (e2, o2) = relabel(&e1, &o1);
            let b2 = pns_bounds(&e2, &o2);
            prop_assert!((b.lower - b2.lower).abs() < 1e-12);
            prop_assert!((b.upper - b2.upper).abs() < 1e-12);
        }
    }
}
