//! Entropy kernels and the mixing-entropy criterion.
//!
//! All logarithms are natural. The convention `0 log 0 = 0` applies
//! throughout, so zero-weight classes never contribute.

use serde::Serialize;

use crate::error::Result;
use crate::family::{xlogx, Family, Params, WeightedSubsample};
use crate::sample::{decomposition_from_assignment, soft_from_hard, Decomposition, HardAssignment, ProbVector, WeightedSample};

/// Mixing entropy `H(nu) + sum_x nu(x) min_theta H(G_x || g_theta)` with its parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionValue {
    pub value: f64,
    /// Minimized cross entropy per class; `0` for empty classes.
    pub per_class_cross_entropy: Vec<f64>,
    pub nu_entropy: f64,
    pub nu: Vec<f64>,
    /// Fitted parameters per class; `None` for empty classes.
    pub params: Vec<Option<Params>>,
    /// Some class hit a variance floor or rate cap.
    pub degenerate: bool,
}

impl CriterionValue {
    /// Whether this value may be selected as a minimum under `family`'s rules.
    pub fn admissible(&self, family: &Family) -> bool {
        family.allow_degenerate || !self.degenerate
    }

    pub fn occupied(&self) -> usize {
        self.nu.iter().filter(|&&v| v > 0.0).count()
    }
}

pub fn shannon_entropy(nu: &ProbVector) -> f64 {
    -nu.as_slice().iter().map(|&p| xlogx(p)).sum::<f64>()
}

/// `-sum_z g(z) log density(z)`; `+inf` when `g` puts mass on a zero-density point.
pub fn cross_entropy(g: &[f64], values: &[f64], params: &Params) -> f64 {
    let mut acc = 0.0;
    for (&gz, &z) in g.iter().zip(values) {
        if gz > 0.0 {
            let ld = params.log_density(z);
            if ld == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            acc -= gz * ld;
        }
    }
    acc
}

/// Mixing entropy of a decomposition, minimizing each class's cross entropy
/// over the family.
pub fn mixing_entropy(d: &Decomposition, w: &WeightedSample, family: &Family) -> Result<CriterionValue> {
    let r = d.r();
    let nu_entropy = shannon_entropy(&d.nu);
    let mut per_class = vec![0.0; r];
    let mut params = vec![None; r];
    let mut degenerate = false;
    let mut value = nu_entropy;
    for x in 0..r {
        let nux = d.nu[x];
        if d.empty[x] || nux <= 0.0 {
            continue;
        }
        let fit = family.fit_weighted(&WeightedSubsample::new_unchecked(w.values(), &d.components[x]))?;
        per_class[x] = fit.cross_entropy;
        params[x] = Some(fit.params);
        degenerate |= fit.degenerate;
        value += nux * fit.cross_entropy;
    }
    Ok(CriterionValue {
        value,
        per_class_cross_entropy: per_class,
        nu_entropy,
        nu: d.nu.as_slice().to_vec(),
        params,
        degenerate,
    })
}

/// Criterion of a hard classification together with its classification
/// log-likelihood `l_n = -n * value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentScore {
    pub criterion: CriterionValue,
    pub classification_loglik: f64,
}

pub fn criterion_of_assignment(h: &HardAssignment, w: &WeightedSample, family: &Family) -> Result<AssignmentScore> {
    let d = decomposition_from_assignment(&soft_from_hard(h), w)?;
    let criterion = mixing_entropy(&d, w, family)?;
    let classification_loglik = -(w.n() as f64) * criterion.value;
    Ok(AssignmentScore { criterion, classification_loglik })
}
