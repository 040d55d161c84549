//! Binary response curves (logit, probit, complementary log-log), their
//! densities and quantiles, and the locally D-optimal two-point design.
//!
//! All curves are written in terms of the linear predictor `eta = a*x + b`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Which response curve links the factor to the success probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logit,
    Probit,
    Cloglog,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logit, ModelKind::Probit, ModelKind::Cloglog];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logit => "logit",
            ModelKind::Probit => "probit",
            ModelKind::Cloglog => "cloglog",
        }
    }

    /// Success probability `F(eta)`. No argument checking.
    pub(crate) fn prob(self, eta: f64) -> f64 {
        match self {
            ModelKind::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            ModelKind::Probit => 0.5 * libm::erfc(-eta * FRAC_1_SQRT_2),
            ModelKind::Cloglog => -(-eta.exp()).exp_m1(),
        }
    }

    /// `1 - F(eta)`, computed without cancellation.
    pub(crate) fn complement(self, eta: f64) -> f64 {
        match self {
            ModelKind::Logit | ModelKind::Probit => self.prob(-eta),
            ModelKind::Cloglog => (-eta.exp()).exp(),
        }
    }

    /// `ln F(eta)`.
    pub(crate) fn ln_prob(self, eta: f64) -> f64 {
        match self {
            ModelKind::Logit => -ln1p_exp(-eta),
            ModelKind::Probit => ln_normal_cdf(eta),
            ModelKind::Cloglog => {
                let e = eta.exp();
                if e < 1e-8 {
                    // 1 - exp(-e) = e (1 - e/2 + ...)
                    eta + (-0.5 * e).ln_1p()
                } else {
                    (-(-e).exp_m1()).ln()
                }
            }
        }
    }

    /// `ln(1 - F(eta))`.
    pub(crate) fn ln_complement(self, eta: f64) -> f64 {
        match self {
            ModelKind::Logit => -ln1p_exp(eta),
            ModelKind::Probit => ln_normal_cdf(-eta),
            ModelKind::Cloglog => -eta.exp(),
        }
    }

    /// Density `dF/deta`.
    pub(crate) fn density(self, eta: f64) -> f64 {
        match self {
            ModelKind::Logit => {
                let e = (-eta.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            ModelKind::Probit => INV_SQRT_2PI * (-0.5 * eta * eta).exp(),
            ModelKind::Cloglog => (eta - eta.exp()).exp(),
        }
    }

    /// `f / (F (1 - F))`, the factor turning a residual `k - n F` into a score.
    pub(crate) fn score_ratio(self, eta: f64) -> f64 {
        match self {
            ModelKind::Logit => 1.0,
            ModelKind::Probit => {
                let denom = self.prob(eta) * self.complement(eta);
                if denom > 0.0 {
                    self.density(eta) / denom
                } else {
                    0.0
                }
            }
            ModelKind::Cloglog => {
                let e = eta.exp();
                if e < 1e-8 {
                    1.0
                } else if e.is_infinite() {
                    0.0
                } else {
                    e / -(-e).exp_m1()
                }
            }
        }
    }

    /// Per-observation Fisher weight `f^2 / (F (1 - F))`.
    ///
    /// Clamped to zero when `F (1 - F)` underflows in the far tails.
    pub(crate) fn fisher_weight(self, eta: f64) -> f64 {
        let f = self.density(eta);
        if f == 0.0 {
            return 0.0;
        }
        let w = match self {
            ModelKind::Logit => f,
            ModelKind::Probit => {
                let denom = self.prob(eta) * self.complement(eta);
                if denom > 0.0 {
                    f * f / denom
                } else {
                    0.0
                }
            }
            ModelKind::Cloglog => f * self.score_ratio(eta),
        };
        if w.is_finite() {
            w
        } else {
            0.0
        }
    }

    /// Derivative of `ln w(eta)` where `w` is the Fisher weight.
    fn d_ln_weight(self, eta: f64) -> f64 {
        match self {
            ModelKind::Logit => 1.0 - 2.0 * self.prob(eta),
            ModelKind::Probit => {
                let f = self.density(eta);
                -2.0 * eta - f / self.prob(eta) + f / self.complement(eta)
            }
            ModelKind::Cloglog => {
                let e = eta.exp();
                2.0 * (1.0 - e) - e / e.exp_m1() + e
            }
        }
    }

    fn quantile_unchecked(self, p: f64) -> f64 {
        match self {
            ModelKind::Logit => (p / (1.0 - p)).ln(),
            ModelKind::Probit => normal_quantile(p),
            ModelKind::Cloglog => (-(-p).ln_1p()).ln(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(ModelKind::Logit),
            "probit" => Ok(ModelKind::Probit),
            "cloglog" => Ok(ModelKind::Cloglog),
            other => invalid(format!("unknown model `{other}` (expected logit, probit or cloglog)")),
        }
    }
}

/// Slope `a` and intercept `b` of the linear predictor `a*x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub a: f64,
    pub b: f64,
}

impl LinkParams {
    /// Curves are increasing in x, so the slope must be positive.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return invalid(format!("link parameters must be finite (a={a}, b={b})"));
        }
        if a <= 0.0 {
            return invalid(format!("slope must be positive, got a={a}"));
        }
        Ok(Self { a, b })
    }

    pub fn canonical() -> Self {
        Self { a: 1.0, b: 0.0 }
    }

    #[inline]
    pub fn eta(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

/// The two equal-weight support points of the locally D-optimal design on the
/// canonical scale (`a = 1`, `b = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalDesignPoints {
    pub z1: f64,
    pub z2: f64,
    pub p1: f64,
    pub p2: f64,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() {
        Ok(())
    } else {
        invalid(format!("linear predictor must be finite, got {eta}"))
    }
}

/// Response probability `F(eta)`.
pub fn cdf(model: ModelKind, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(model.prob(eta))
}

/// Density `dF/deta`.
pub fn pdf(model: ModelKind, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(model.density(eta))
}

/// Inverse of [`cdf`] on the open unit interval.
pub fn quantile(model: ModelKind, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("probability must lie in (0, 1), got {p}"));
    }
    Ok(model.quantile_unchecked(p))
}

/// Maps a canonical level `z` back to the factor scale: `x = (z - b) / a`.
pub fn canonical_to_factor(z: f64, params: &LinkParams) -> Result<f64> {
    if !(params.a > 0.0) || !params.a.is_finite() || !params.b.is_finite() {
        return invalid(format!("slope must be positive and finite, got a={}", params.a));
    }
    Ok((z - params.b) / params.a)
}

const DESIGN_BOX: f64 = 10.0;

// Objective: ln det of the equal-weight two-point information matrix, up to a constant.
fn design_objective(model: ModelKind, z1: f64, z2: f64) -> f64 {
    let gap = z2 - z1;
    if gap <= 0.0 {
        return f64::NEG_INFINITY;
    }
    model.fisher_weight(z1).ln() + model.fisher_weight(z2).ln() + 2.0 * gap.ln()
}

fn design_gradient(model: ModelKind, z1: f64, z2: f64) -> [f64; 2] {
    let g = 2.0 / (z2 - z1);
    [model.d_ln_weight(z1) - g, model.d_ln_weight(z2) + g]
}

fn design_hessian(model: ModelKind, z1: f64, z2: f64) -> [[f64; 2]; 2] {
    const H: f64 = 1e-5;
    let second = |z: f64| (model.d_ln_weight(z + H) - model.d_ln_weight(z - H)) / (2.0 * H);
    let c = 2.0 / ((z2 - z1) * (z2 - z1));
    [[second(z1) - c, c], [c, second(z2) - c]]
}

fn maximize_design(model: ModelKind, start: (f64, f64)) -> Option<(f64, f64, f64)> {
    let (mut z1, mut z2) = start;
    let mut value = design_objective(model, z1, z2);
    for _ in 0..200 {
        let g = design_gradient(model, z1, z2);
        if g[0].abs().max(g[1].abs()) < 1e-13 {
            return Some((z1, z2, value));
        }
        let h = design_hessian(model, z1, z2);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        // Newton direction when the Hessian is negative definite, gradient ascent otherwise.
        let dir = if h[0][0] < 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            g
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let n1 = (z1 + t * dir[0]).clamp(-DESIGN_BOX, DESIGN_BOX);
            let n2 = (z2 + t * dir[1]).clamp(-DESIGN_BOX, DESIGN_BOX);
            let v = design_objective(model, n1, n2);
            if v.is_finite() && v >= value {
                moved = n1 != z1 || n2 != z2;
                z1 = n1;
                z2 = n2;
                value = v;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            let g = design_gradient(model, z1, z2);
            return (g[0].abs().max(g[1].abs()) < 1e-9).then_some((z1, z2, value));
        }
    }
    None
}

/// Locally D-optimal equal-weight two-point design for the canonical model,
/// found by numerically maximizing the log determinant of the information
/// matrix over `-10 <= z1 < z2 <= 10`.
pub fn d_optimal_canonical(model: ModelKind) -> Result<CanonicalDesignPoints> {
    let starts = [(-2.0, 1.0), (-1.0, 2.0), (-3.0, 0.5)];
    let best = starts
        .iter()
        .filter_map(|&s| maximize_design(model, s))
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or_else(|| {
            Error::NumericalFailure(format!("D-optimal design search did not converge for {model}"))
        })?;
    let (z1, z2, _) = best;
    Ok(CanonicalDesignPoints {
        z1,
        z2,
        p1: model.prob(z1),
        p2: model.prob(z2),
    })
}

/// `ln(1 + exp(x))` without overflow.
fn ln1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln Phi(x)` with an asymptotic expansion in the far lower tail.
fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// Standard normal quantile: Acklam's rational approximation polished by one
/// Halley step against the erfc-based cdf.
fn normal_quantile(p: f64) -> f64 {
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
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (-p).ln_1p()).sqrt())
    };
    // Halley refinement; work in the smaller tail to keep the residual accurate.
    let e = if x <= 0.0 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2) - p
    } else {
        (1.0 - p) - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
