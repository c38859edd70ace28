//! Parametric density families and their weighted maximum-likelihood fits.
//!
//! Every family exposes two things: the log-density of a parameter value at a
//! point, and the exact minimizer over parameters of the cross entropy
//! `-sum_z w(z) log g(z) / sum_z w(z)` of a weighted subsample.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::WeightedSample;

pub const DEFAULT_ALPHA: f64 = 0.005;
pub const DEFAULT_LAMBDA_CAP: f64 = 1e8;
pub const DEFAULT_SIGMA2_FLOOR_SCALE: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian,
    BiExp,
    Bernoulli,
}

impl FamilyKind {
    pub fn id(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::BiExp => "biexp",
            FamilyKind::Bernoulli => "bernoulli",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(FamilyKind::Gaussian),
            "biexp" => Ok(FamilyKind::BiExp),
            "bernoulli" => Ok(FamilyKind::Bernoulli),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

/// Family choice plus hyperparameters, before it is bound to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    /// Bounds the bi-exponential side weight to `[alpha, 1 - alpha]`.
    pub alpha: f64,
    /// Upper bound on bi-exponential rates.
    pub lambda_cap: f64,
    /// Gaussian variance floor, relative to the squared sample range.
    pub sigma2_floor_scale: f64,
    /// Whether assignments containing a degenerate class may be selected.
    pub allow_degenerate: bool,
}

impl FamilyConfig {
    pub fn new(kind: FamilyKind) -> Self {
        Self {
            kind,
            alpha: DEFAULT_ALPHA,
            lambda_cap: DEFAULT_LAMBDA_CAP,
            sigma2_floor_scale: DEFAULT_SIGMA2_FLOOR_SCALE,
            allow_degenerate: false,
        }
    }

    /// Resolves sample-dependent hyperparameters and checks that the sample
    /// lies in the family's support.
    pub fn bind(&self, w: &WeightedSample) -> Result<Family> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!("alpha must lie in (0, 0.5), got {}", self.alpha)));
        }
        if !(self.lambda_cap > 0.0) {
            return Err(Error::Config(format!("lambda_cap must be positive, got {}", self.lambda_cap)));
        }
        if !(self.sigma2_floor_scale >= 0.0) {
            return Err(Error::Config("sigma2_floor_scale must be non-negative".into()));
        }
        if self.kind == FamilyKind::Bernoulli {
            if let Some(&z) = w.values().iter().find(|&&z| z != 0.0 && z != 1.0) {
                return Err(Error::NotBinary(z));
            }
        }
        let range = w.range();
        Ok(Family {
            kind: self.kind,
            alpha: self.alpha,
            lambda_cap: self.lambda_cap,
            sigma2_floor: self.sigma2_floor_scale * range * range + 1e-300,
            allow_degenerate: self.allow_degenerate,
        })
    }
}

/// A density family ready for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub kind: FamilyKind,
    pub alpha: f64,
    pub lambda_cap: f64,
    pub sigma2_floor: f64,
    pub allow_degenerate: bool,
}

impl Family {
    pub fn gaussian(sigma2_floor: f64) -> Self {
        Self {
            kind: FamilyKind::Gaussian,
            alpha: DEFAULT_ALPHA,
            lambda_cap: DEFAULT_LAMBDA_CAP,
            sigma2_floor,
            allow_degenerate: false,
        }
    }

    pub fn biexp(alpha: f64, lambda_cap: f64) -> Self {
        Self { kind: FamilyKind::BiExp, alpha, lambda_cap, sigma2_floor: 1e-300, allow_degenerate: false }
    }

    pub fn bernoulli() -> Self {
        Self {
            kind: FamilyKind::Bernoulli,
            alpha: DEFAULT_ALPHA,
            lambda_cap: DEFAULT_LAMBDA_CAP,
            sigma2_floor: 1e-300,
            allow_degenerate: false,
        }
    }

    pub fn with_degenerate(mut self, allow: bool) -> Self {
        self.allow_degenerate = allow;
        self
    }

    pub fn log_density(&self, params: &Params, z: f64) -> f64 {
        params.log_density(z)
    }

    /// Checks `params` against this family's parameter set.
    pub fn validate(&self, params: &Params) -> Result<()> {
        match (self.kind, params) {
            (FamilyKind::Gaussian, Params::Gaussian(p)) => {
                if p.mu.is_finite() && p.sigma2 >= self.sigma2_floor && p.sigma2.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!("{p:?}")))
                }
            }
            (FamilyKind::BiExp, Params::BiExp(p)) => {
                let ok = p.a_left <= p.a_right
                    && p.p >= self.alpha
                    && p.p <= 1.0 - self.alpha
                    && p.lambda_left > 0.0
                    && p.lambda_left <= self.lambda_cap
                    && p.lambda_right > 0.0
                    && p.lambda_right <= self.lambda_cap;
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!("{p:?}")))
                }
            }
            (FamilyKind::Bernoulli, Params::Bernoulli(p)) => {
                let ok = (0.0..=1.0).contains(&p.mu0)
                    && (0.0..=1.0).contains(&p.mu1)
                    && (p.mu0 + p.mu1 - 1.0).abs() <= 1e-12;
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!("{p:?}")))
                }
            }
            (kind, p) => Err(Error::InvalidParams(format!("{p:?} is not a {kind} parameter"))),
        }
    }

    /// Minimizes the weighted cross entropy over the family's parameters.
    pub fn fit_weighted(&self, sub: &WeightedSubsample<'_>) -> Result<ClassFit> {
        let mass = sub.mass();
        if !(mass > 0.0) {
            return Err(Error::EmptyClass);
        }
        match self.kind {
            FamilyKind::Gaussian => Ok(fit_gaussian(sub, mass, self.sigma2_floor)),
            FamilyKind::BiExp => Ok(fit_biexp(sub, mass, self.alpha, self.lambda_cap)),
            FamilyKind::Bernoulli => fit_bernoulli(sub, mass),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma2: f64,
}

/// Two exponential tails: mass `p` decaying to the right of `a_right`,
/// mass `1 - p` decaying to the left of `a_left`. The open interval
/// `(a_left, a_right)` has zero density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiExpParams {
    pub p: f64,
    pub a_left: f64,
    pub a_right: f64,
    pub lambda_left: f64,
    pub lambda_right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliParams {
    pub mu0: f64,
    pub mu1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Params {
    Gaussian(GaussianParams),
    #[serde(rename = "biexp")]
    BiExp(BiExpParams),
    Bernoulli(BernoulliParams),
}

impl Params {
    /// `log g(z)`; `-inf` exactly where the density vanishes.
    pub fn log_density(&self, z: f64) -> f64 {
        match *self {
            Params::Gaussian(GaussianParams { mu, sigma2 }) => {
                let d = z - mu;
                -0.5 * (LN_2PI + sigma2.ln() + d * d / sigma2)
            }
            Params::BiExp(b) => {
                let right = if z >= b.a_right {
                    b.p.ln() + b.lambda_right.ln() - b.lambda_right * (z - b.a_right)
                } else {
                    f64::NEG_INFINITY
                };
                let left = if z <= b.a_left {
                    (1.0 - b.p).ln() + b.lambda_left.ln() - b.lambda_left * (b.a_left - z)
                } else {
                    f64::NEG_INFINITY
                };
                log_add(right, left)
            }
            Params::Bernoulli(BernoulliParams { mu0, mu1 }) => {
                if z == 0.0 {
                    mu0.ln()
                } else if z == 1.0 {
                    mu1.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    let lo = a.min(b);
    hi + (lo - hi).exp().ln_1p()
}

/// Non-negative weights over sorted sample values; zero weights are ignored.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSubsample<'a> {
    values: &'a [f64],
    weights: &'a [f64],
}

impl<'a> WeightedSubsample<'a> {
    pub fn new(values: &'a [f64], weights: &'a [f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::ValueSetMismatch { assignment: weights.len(), sample: values.len() });
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidAssignment("subsample values must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidAssignment("subsample weights must be finite and non-negative".into()));
        }
        Ok(Self { values, weights })
    }

    pub(crate) fn new_unchecked(values: &'a [f64], weights: &'a [f64]) -> Self {
        Self { values, weights }
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn weights(&self) -> &'a [f64] {
        self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn support(&self) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.values.iter().copied().zip(self.weights.iter().copied()).filter(|&(_, w)| w > 0.0)
    }
}

/// Result of the inner minimization for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassFit {
    pub params: Params,
    /// Attained minimum of the cross entropy.
    pub cross_entropy: f64,
    /// A variance floor or rate cap was binding.
    pub degenerate: bool,
}

fn fit_gaussian(sub: &WeightedSubsample<'_>, mass: f64, floor: f64) -> ClassFit {
    let mean = sub.support().map(|(z, w)| w * z).sum::<f64>() / mass;
    let var = sub
        .support()
        .map(|(z, w)| {
            let d = z - mean;
            w * d * d
        })
        .sum::<f64>()
        / mass;
    let degenerate = !(var > floor);
    let sigma2 = if degenerate { floor } else { var };
    let cross_entropy = 0.5 * (LN_2PI + sigma2.ln() + var / sigma2);
    ClassFit { params: Params::Gaussian(GaussianParams { mu: mean, sigma2 }), cross_entropy, degenerate }
}

fn fit_bernoulli(sub: &WeightedSubsample<'_>, mass: f64) -> Result<ClassFit> {
    let mut m1 = 0.0;
    for (z, w) in sub.support() {
        if z == 1.0 {
            m1 += w;
        } else if z != 0.0 {
            return Err(Error::NotBinary(z));
        }
    }
    let mu1 = m1 / mass;
    let mu0 = 1.0 - mu1;
    let cross_entropy = -(xlogx(mu0) + xlogx(mu1));
    Ok(ClassFit { params: Params::Bernoulli(BernoulliParams { mu0, mu1 }), cross_entropy, degenerate: false })
}

pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Cost `-sum_side w log(lambda exp(-lambda * dist))` of one tail with mass
/// `w` and mean distance `d` from its anchor, at the optimal rate.
fn side_cost(w: f64, d: f64, cap: f64) -> (f64, f64, bool) {
    if w <= 0.0 {
        return (0.0, 1.0, false);
    }
    let d = d.max(0.0);
    if d * cap <= 1.0 {
        (w * (-cap.ln() + cap * d), cap, true)
    } else {
        (w * (1.0 + d.ln()), 1.0 / d, false)
    }
}

/// Exact fit by enumerating every left/right split of the sorted support.
///
/// For a fixed split the optimal anchors sit on the innermost points of each
/// side, the optimal rates are the reciprocal mean distances (capped), and
/// the optimal side weight is the right-hand mass clipped to the allowed
/// interval.
fn fit_biexp(sub: &WeightedSubsample<'_>, mass: f64, alpha: f64, cap: f64) -> ClassFit {
    let pts: Vec<(f64, f64)> = sub.support().map(|(z, w)| (z, w / mass)).collect();
    let m = pts.len();
    let (lo, hi) = (pts[0].0, pts[m - 1].0);
    // prefix sums measured from the lowest point, suffix sums from the highest,
    // so a side holding one value gets an exactly zero mean distance
    let mut cw = vec![0.0; m + 1];
    let mut cs = vec![0.0; m + 1];
    let mut sw = vec![0.0; m + 1];
    let mut ss = vec![0.0; m + 1];
    for (i, &(z, w)) in pts.iter().enumerate() {
        cw[i + 1] = cw[i] + w;
        cs[i + 1] = cs[i] + w * (z - lo);
    }
    for (i, &(z, w)) in pts.iter().enumerate().rev() {
        sw[i] = sw[i + 1] + w;
        ss[i] = ss[i + 1] + w * (hi - z);
    }

    let mut best: Option<(f64, usize, f64, f64, bool)> = None;
    for k in 0..=m {
        let wl = cw[k];
        let wr = sw[k];
        let (cost_l, lam_l, deg_l) = if k > 0 {
            side_cost(wl, ((pts[k - 1].0 - lo) * wl - cs[k]) / wl, cap)
        } else {
            (0.0, 1.0, false)
        };
        let (cost_r, lam_r, deg_r) = if k < m {
            side_cost(wr, ((hi - pts[k].0) * wr - ss[k]) / wr, cap)
        } else {
            (0.0, 1.0, false)
        };
        let p = wr.clamp(alpha, 1.0 - alpha);
        let value = -(wl * (1.0 - p).ln() + wr * p.ln()) + cost_l + cost_r;
        if best.is_none_or(|b| value < b.0) {
            best = Some((value, k, lam_l, lam_r, deg_l || deg_r));
        }
    }
    let (value, k, lambda_left, lambda_right, degenerate) = best.expect("support is non-empty");
    let p = sw[k].clamp(alpha, 1.0 - alpha);
    let (a_left, a_right) = match (k > 0, k < m) {
        (true, true) => (pts[k - 1].0, pts[k].0),
        (true, false) => (pts[m - 1].0, pts[m - 1].0 + 1.0),
        (false, true) => (pts[0].0 - 1.0, pts[0].0),
        (false, false) => unreachable!("support is non-empty"),
    };
    ClassFit {
        params: Params::BiExp(BiExpParams { p, a_left, a_right, lambda_left, lambda_right }),
        cross_entropy: value,
        degenerate,
    }
}
