//! Wald margins of error for Bernoulli proportions and their propagation
//! through the PNS bound arms.
//!
//! Every arm is a signed sum of experimental terms (estimated from `m`
//! samples) and observational terms (estimated from `n` samples). An arm's
//! margin is the sum of its term margins. Each term margin is at most
//! `z / (2 sqrt(count))`, and no arm has more than two terms per pool. That
//! gives the worst case `z (1/sqrt(m) + 1/sqrt(n))`.

use serde::{Deserialize, Serialize};

use crate::bounds::{ExperimentalDist, ObservationalDist};
use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_32: f64 = 5.656_854_249_492_381;

/// Standard normal CDF.
///
/// W. J. Cody's rational Chebyshev approximations (ACM TOMS 715), accurate to
/// roughly double precision in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    const A: [f64; 5] = [
        2.235_252_035_460_683_9,
        161.028_231_068_555_88,
        1_067.689_485_460_371,
        18_154.981_253_343_56,
        0.065_682_337_918_207_45,
    ];
    const B: [f64; 4] = [
        47.202_581_904_688_24,
        976.098_551_737_776_7,
        10_260.932_208_618_978,
        45_507.789_335_026_73,
    ];
    const C: [f64; 9] = [
        0.398_941_512_088_134_66,
        8.883_149_794_388_376,
        93.506_656_132_177_86,
        597.270_276_394_800_3,
        2_494.537_585_290_372_7,
        6_848.190_450_536_283,
        11_602.651_437_647_35,
        9_842.714_838_383_978,
        1.076_557_677_372_019_2e-8,
    ];
    const D: [f64; 8] = [
        22.266_688_044_328_116,
        235.387_901_782_625,
        1_519.377_599_407_554_8,
        6_485.558_298_266_761,
        18_615.571_640_885_098,
        34_900.952_721_145_98,
        38_912.003_286_093_27,
        19_685.429_676_859_99,
    ];
    const P: [f64; 6] = [
        0.215_898_534_057_957,
        0.127_401_161_160_247_36,
        0.022_235_277_870_649_807,
        0.001_421_619_193_227_893_5,
        2.911_287_495_116_879_2e-5,
        0.023_073_441_764_940_173,
    ];
    const Q: [f64; 5] = [
        1.284_260_096_144_911,
        0.468_238_212_480_865_1,
        0.065_988_137_868_928_55,
        0.003_782_396_332_027_582_4,
        7.297_515_550_839_662e-5,
    ];

    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.674_489_75 {
        let (mut num, mut den) = (0.0, 0.0);
        if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            num = A[4] * xsq;
            den = xsq;
            for i in 0..3 {
                num = (num + A[i]) * xsq;
                den = (den + B[i]) * xsq;
            }
        }
        return 0.5 + x * (num + A[3]) / (den + B[3]);
    }

    let tail = if y <= SQRT_32 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        let r = (num + C[7]) / (den + D[7]);
        split_exp(y) * r
    } else {
        let xsq = 1.0 / (x * x);
        let mut num = P[5] * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + P[i]) * xsq;
            den = (den + Q[i]) * xsq;
        }
        let r = xsq * (num + P[4]) / (den + Q[4]);
        split_exp(y) * (FRAC_1_SQRT_2PI - r) / y
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `exp(-y^2 / 2)` evaluated in two pieces to limit cancellation error.
fn split_exp(y: f64) -> f64 {
    let head = (y * 16.0).trunc() / 16.0;
    let del = (y - head) * (y + head);
    (-head * head * 0.5).exp() * (-del * 0.5).exp()
}

/// Standard normal quantile.
///
/// Acklam's rational approximation (relative error about 1.2e-9) followed by
/// one Newton step against [`normal_cdf`].
pub fn inverse_normal_cdf(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires 0 < q < 1, got {q}"
        )));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let tail = |p: f64| {
        let t = (-2.0 * p.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };
    let mut x = if q < P_LOW {
        tail(q)
    } else if q <= 1.0 - P_LOW {
        let t = q - 0.5;
        let r = t * t;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * t
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - q)
    };

    // Newton on Phi(x) = q. In the upper tail work with the complement so the
    // residual does not cancel.
    let pdf = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
    if pdf > 0.0 {
        let residual = if q > 0.5 {
            (1.0 - q) - normal_cdf(-x)
        } else {
            normal_cdf(x) - q
        };
        x -= residual / pdf;
    }
    Ok(x)
}

/// Confidence level as alpha plus the two-sided critical value z_{1-alpha/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSpec {
    alpha: f64,
    z: f64,
}

impl ConfidenceSpec {
    /// Table value of z at alpha = 0.05.
    pub const Z_ROUNDED_95: f64 = 1.96;

    /// z computed as the standard normal quantile at 1 - alpha/2.
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            z: inverse_normal_cdf(1.0 - alpha / 2.0)?,
        })
    }

    /// Override z, e.g. with the rounded table value 1.96.
    pub fn with_z(alpha: f64, z: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!(
                "z must be positive and finite, got {z}"
            )));
        }
        Ok(Self { alpha, z })
    }

    /// alpha = 0.05 with z = 1.96.
    pub fn rounded_95() -> Self {
        Self {
            alpha: 0.05,
            z: Self::Z_ROUNDED_95,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn z(&self) -> f64 {
        self.z
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn check_count(name: &'static str, count: u64) -> Result<()> {
    if count == 0 {
        Err(Error::InvalidCount { name })
    } else {
        Ok(())
    }
}

/// `z * sqrt(p_hat (1 - p_hat) / count)`.
pub fn wald_margin(p_hat: f64, count: u64, conf: &ConfidenceSpec) -> Result<f64> {
    check_count("count", count)?;
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::InvalidProbability {
            name: "p_hat",
            value: p_hat,
        });
    }
    Ok(conf.z * (p_hat * (1.0 - p_hat) / count as f64).sqrt())
}

/// Supremum of [`wald_margin`] over `p_hat`, reached at 1/2: `(z/2) sqrt(1/count)`.
pub fn worst_case_term_margin(count: u64, conf: &ConfidenceSpec) -> Result<f64> {
    check_count("count", count)?;
    Ok(conf.z / 2.0 * (1.0 / count as f64).sqrt())
}

/// Worst-case margin of any bound arm: `z (sqrt(1/m) + sqrt(1/n))`.
pub fn worst_case_arm_margin(m: u64, n: u64, conf: &ConfidenceSpec) -> Result<f64> {
    check_count("m", m)?;
    check_count("n", n)?;
    Ok(conf.z * ((1.0 / m as f64).sqrt() + (1.0 / n as f64).sqrt()))
}

/// Per-arm margins, in the same arm order as [`crate::PnsBounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub per_arm_margins_lower: [f64; 4],
    pub per_arm_margins_upper: [f64; 4],
    pub worst_case_margin: f64,
    pub m: u64,
    pub n: u64,
}

impl MarginReport {
    pub fn max_arm_margin(&self) -> f64 {
        self.per_arm_margins_lower
            .iter()
            .chain(&self.per_arm_margins_upper)
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Wald margin of each bound arm.
///
/// Experimental terms use count `m`, observational terms (including P(y),
/// which counts as one proportion) use count `n`.
pub fn arm_margins(
    exp_hat: &ExperimentalDist,
    obs_hat: &ObservationalDist,
    m: u64,
    n: u64,
    conf: &ConfidenceSpec,
) -> Result<MarginReport> {
    check_count("m", m)?;
    check_count("n", n)?;
    let e = |p: f64| wald_margin(p, m, conf);
    // P(y) is a sum of two cells and may exceed 1 by an ulp.
    let o = |p: f64| wald_margin(p.clamp(0.0, 1.0), n, conf);

    let y_x = e(exp_hat.p_y_do_x())?;
    let y_xp = e(exp_hat.p_y_do_xprime())?;
    let y = o(obs_hat.p_y())?;
    let xy = o(obs_hat.p_xy())?;
    let xyp = o(obs_hat.p_xy_prime())?;
    let xpy = o(obs_hat.p_xprime_y())?;
    let xpyp = o(obs_hat.p_xprime_yprime())?;

    Ok(MarginReport {
        per_arm_margins_lower: [0.0, y_x + y_xp, y + y_xp, y_x + y],
        // P(y'_x') = 1 - P(y_x') has the same Wald margin as P(y_x').
        per_arm_margins_upper: [y_x, y_xp, xy + xpyp, y_x + y_xp + xyp + xpy],
        worst_case_margin: worst_case_arm_margin(m, n, conf)?,
        m,
        n,
    })
}
