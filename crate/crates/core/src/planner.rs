//! Sample sizes that guarantee a target margin of error.
//!
//! Sizes start from the closed-form ceiling and are then nudged one step at a
//! time against the margin functions in [`crate::ci`], so that a plan is always
//! adequate and minimal as measured by the same arithmetic that reports margins.

use serde::{Deserialize, Serialize};

use crate::ci::{worst_case_arm_margin, ConfidenceSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    /// Every arm of the bounds, with worst-case margin z (1/sqrt(m) + 1/sqrt(n)).
    FullBounds,
    /// A sum or difference of `terms` Bernoulli proportions from one pool.
    KTerm,
    /// One Bernoulli proportion.
    SingleTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// Experimental sample size.
    pub m: u64,
    /// Observational sample size.
    pub n: u64,
    pub alpha: f64,
    pub z: f64,
    pub epsilon: f64,
    pub kind: PlanKind,
    /// Number of Bernoulli terms the plan budgets for.
    pub terms: u32,
    /// Margin achieved at (m, n).
    pub achieved_margin: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "target margin epsilon must lie in (0, 1), got {epsilon}"
        )))
    }
}

/// Smallest count at which `adequate` holds, searching from `start`.
/// `adequate` must be monotone in the count.
fn minimal_count(start: f64, adequate: impl Fn(u64) -> bool) -> u64 {
    let mut k = if start.is_finite() && start >= 1.0 {
        start.ceil() as u64
    } else {
        1
    };
    while k > 1 && adequate(k - 1) {
        k -= 1;
    }
    while !adequate(k) {
        k += 1;
    }
    k
}

/// Margin of `terms` worst-case Bernoulli terms estimated from `count` samples.
pub fn k_term_margin(terms: u32, count: u64, conf: &ConfidenceSpec) -> Result<f64> {
    Ok(terms as f64 * crate::ci::worst_case_term_margin(count, conf)?)
}

/// Equal allocation m = n for the full bounds: ceil((2z / epsilon)^2).
pub fn plan_equal(conf: &ConfidenceSpec, epsilon: f64) -> Result<SamplePlan> {
    check_epsilon(epsilon)?;
    let z = conf.z();
    let margin = |k: u64| worst_case_arm_margin(k, k, conf).expect("count is positive");
    let m = minimal_count((2.0 * z / epsilon).powi(2), |k| margin(k) <= epsilon);
    Ok(SamplePlan {
        m,
        n: m,
        alpha: conf.alpha(),
        z,
        epsilon,
        kind: PlanKind::FullBounds,
        terms: 4,
        achieved_margin: margin(m),
    })
}

/// Size for an expression of `terms` worst-case terms: ceil((k z / (2 epsilon))^2).
///
/// The same size is reported for both pools.
pub fn plan_k_term(terms: u32, conf: &ConfidenceSpec, epsilon: f64) -> Result<SamplePlan> {
    check_epsilon(epsilon)?;
    if terms == 0 {
        return Err(Error::InvalidCount { name: "k" });
    }
    let z = conf.z();
    let margin = |k: u64| k_term_margin(terms, k, conf).expect("count is positive");
    let m = minimal_count((terms as f64 * z / (2.0 * epsilon)).powi(2), |k| {
        margin(k) <= epsilon
    });
    Ok(SamplePlan {
        m,
        n: m,
        alpha: conf.alpha(),
        z,
        epsilon,
        kind: if terms == 1 {
            PlanKind::SingleTerm
        } else {
            PlanKind::KTerm
        },
        terms,
        achieved_margin: margin(m),
    })
}

/// Feasible region for unequal allocation: sqrt(1/m) + sqrt(1/n) <= threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConstraint {
    /// epsilon / z
    pub threshold: f64,
    pub alpha: f64,
    pub z: f64,
    pub epsilon: f64,
}

pub fn plan_constraint(conf: &ConfidenceSpec, epsilon: f64) -> Result<PlanConstraint> {
    check_epsilon(epsilon)?;
    Ok(PlanConstraint {
        threshold: epsilon / conf.z(),
        alpha: conf.alpha(),
        z: conf.z(),
        epsilon,
    })
}

impl PlanConstraint {
    fn conf(&self) -> ConfidenceSpec {
        ConfidenceSpec::with_z(self.alpha, self.z).expect("validated on construction")
    }

    /// Whether the worst-case margin at (m, n) is within epsilon.
    pub fn is_adequate(&self, m: u64, n: u64) -> bool {
        m > 0
            && n > 0
            && worst_case_arm_margin(m, n, &self.conf()).expect("counts checked") <= self.epsilon
    }

    /// Smallest observational size that pairs with a fixed experimental size,
    /// or `None` when `m` alone already uses up the budget.
    pub fn min_n_given_m(&self, m: u64) -> Option<u64> {
        if m == 0 {
            return None;
        }
        let remaining = self.threshold - (1.0 / m as f64).sqrt();
        if remaining <= 0.0 {
            return None;
        }
        Some(minimal_count((1.0 / remaining).powi(2), |n| {
            self.is_adequate(m, n)
        }))
    }
}
