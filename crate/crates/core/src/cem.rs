//! E-step, C-step and M-step, and the iteration loop that alternates them.
//!
//! The loop supports two flavours that differ only in what the M-step is fed:
//! the classification flavour refits on the MAP hardening `[phi]` (the CEM
//! algorithm), the expectation flavour refits on the soft posterior `phi`
//! (plain EM). Both harden every new posterior and score the hard
//! assignment with the mixing-entropy criterion.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::entropy::{criterion_of_assignment, mixing_entropy, CriterionValue};
use crate::error::{Error, Result};
use crate::family::{Family, Params};
use crate::sample::{decomposition_from_assignment, soft_from_hard, HardAssignment, ProbVector, SoftAssignment, WeightedSample};
use crate::search::FitResult;

/// Strict-improvement threshold for the best criterion value.
pub const IMPROVEMENT_EPS: f64 = 1e-12;
/// Slack allowed on monotonicity checks.
pub const MONOTONE_TOL: f64 = 1e-9;

/// Mixture weights and per-class parameters. Classes with zero weight carry
/// no parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelState {
    pub nu: ProbVector,
    pub params: Vec<Option<Params>>,
}

impl ModelState {
    pub fn new(nu: ProbVector, params: Vec<Params>) -> Result<Self> {
        if nu.len() != params.len() {
            return Err(Error::InvalidParams(format!("{} weights but {} parameter sets", nu.len(), params.len())));
        }
        Ok(Self { nu, params: params.into_iter().map(Some).collect() })
    }

    pub fn r(&self) -> usize {
        self.nu.len()
    }

    pub(crate) fn from_criterion(c: &CriterionValue) -> Self {
        Self { nu: ProbVector::with_tolerance(c.nu.clone(), 1e-9).expect("class masses form a distribution"), params: c.params.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerMode {
    /// Refit on the hard MAP assignment.
    Cem,
    /// Refit on the soft posterior.
    Em,
}

impl std::str::FromStr for InnerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cem" => Ok(InnerMode::Cem),
            "em" => Ok(InnerMode::Em),
            other => Err(Error::Config(format!("unknown inner mode '{other}' (expected em or cem)"))),
        }
    }
}

/// Posterior class probabilities, computed in log space.
pub fn e_step(state: &ModelState, w: &WeightedSample, family: &Family) -> Result<SoftAssignment> {
    let r = state.r();
    let log_nu: Vec<f64> = state.nu.as_slice().iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    let mut phi = Vec::with_capacity(w.len() * r);
    let mut row = vec![0.0; r];
    for &z in w.values() {
        let mut hi = f64::NEG_INFINITY;
        for x in 0..r {
            row[x] = match &state.params[x] {
                Some(p) if log_nu[x] > f64::NEG_INFINITY => log_nu[x] + family.log_density(p, z),
                _ => f64::NEG_INFINITY,
            };
            hi = hi.max(row[x]);
        }
        if hi == f64::NEG_INFINITY {
            return Err(Error::UnexplainablePoint { value: z });
        }
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - hi).exp();
            total += *v;
        }
        phi.extend(row.iter().map(|v| v / total));
    }
    Ok(SoftAssignment::from_rows_unchecked(r, phi))
}

/// MAP hardening; ties go to the smallest class index.
pub fn c_step(s: &SoftAssignment) -> HardAssignment {
    let labels = s
        .rows()
        .map(|row| {
            let mut best = 0;
            for (x, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = x;
                }
            }
            best
        })
        .collect();
    HardAssignment::new(s.r(), labels).expect("labels are in range")
}

/// Refits weights and parameters to an assignment; returns the attained
/// mixing entropy. Empty classes get zero weight and no parameters.
pub fn m_step(s: &SoftAssignment, w: &WeightedSample, family: &Family) -> Result<(ModelState, CriterionValue)> {
    let d = decomposition_from_assignment(s, w)?;
    let c = mixing_entropy(&d, w, family)?;
    Ok((ModelState { nu: d.nu, params: c.params.clone() }, c))
}

/// `-Q(state; previous) / n` for the posterior `phi` of the previous state.
pub fn intermediate_criterion(phi: &SoftAssignment, state: &ModelState, w: &WeightedSample) -> f64 {
    let n = w.n() as f64;
    let mut acc = 0.0;
    for (i, row) in phi.rows().enumerate() {
        let z = w.values()[i];
        let c = w.counts()[i] as f64;
        for (x, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let ld = match &state.params[x] {
                Some(params) if state.nu[x] > 0.0 => state.nu[x].ln() + params.log_density(z),
                _ => f64::NEG_INFINITY,
            };
            if ld == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            acc -= c * p * ld;
        }
    }
    acc / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    /// Criterion of the hardened posterior produced by this iteration.
    pub hard_h: f64,
    /// `-Q / n` of the refitted state against the posterior it was fitted from.
    pub q_bound: f64,
    pub occupancy: usize,
    pub admissible: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    /// Hard criterion never increases by more than `tol`.
    pub fn is_non_increasing(&self, tol: f64) -> bool {
        self.records.windows(2).all(|w| w[1].hard_h <= w[0].hard_h + tol)
    }

    /// Every hardened posterior scores at most the intermediate quantity it
    /// came from.
    pub fn bound_holds(&self, tol: f64) -> bool {
        self.records.iter().all(|r| r.hard_h <= r.q_bound + tol)
    }
}

#[derive(Debug, Clone)]
pub enum Init {
    Model(ModelState),
    Assignment(SoftAssignment),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub stop_em: usize,
    pub mode: InnerMode,
    pub max_iter: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self { stop_em: 5, mode: InnerMode::Cem, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoImprovement,
    Stationary,
    MaxIter,
}

pub(crate) struct InnerOutcome {
    pub best: Option<(HardAssignment, CriterionValue)>,
    /// Lowest admissible snapshot, whether or not it beat the reference.
    pub lowest: Option<(HardAssignment, CriterionValue)>,
    /// Occupancies of admissible snapshots tying the reference or best value.
    pub ties: BTreeSet<usize>,
    pub iterations: usize,
    pub stop: StopReason,
    pub trace: IterationTrace,
}

/// Iterates from `init` until `stop_em` consecutive iterations fail to
/// improve on `min(reference, best so far)`.
pub(crate) fn run_inner(
    init: Init,
    w: &WeightedSample,
    family: &Family,
    opts: &EngineOptions,
    reference: f64,
) -> Result<InnerOutcome> {
    let mut phi = match init {
        Init::Model(state) => e_step(&state, w, family)?,
        Init::Assignment(s) => {
            if s.len() != w.len() {
                return Err(Error::ValueSetMismatch { assignment: s.len(), sample: w.len() });
            }
            s
        }
    };
    let mut best: Option<(HardAssignment, CriterionValue)> = None;
    let mut lowest: Option<(HardAssignment, CriterionValue)> = None;
    let mut ties = BTreeSet::new();
    let mut trace = IterationTrace::default();
    let mut prev_hard: Option<HardAssignment> = None;
    let mut ind_em = 0;
    let mut iterations = 0;
    let stop = loop {
        if ind_em >= opts.stop_em {
            break StopReason::NoImprovement;
        }
        if iterations >= opts.max_iter {
            break StopReason::MaxIter;
        }
        ind_em += 1;
        iterations += 1;

        let (state, _) = match opts.mode {
            InnerMode::Em => m_step(&phi, w, family)?,
            InnerMode::Cem => m_step(&soft_from_hard(&c_step(&phi)), w, family)?,
        };
        let q_bound = intermediate_criterion(&phi, &state, w);
        let next = e_step(&state, w, family)?;
        let hard = c_step(&next);
        let score = criterion_of_assignment(&hard, w, family)?.criterion;
        let admissible = score.admissible(family);
        trace.records.push(IterationRecord { hard_h: score.value, q_bound, occupancy: hard.occupied(), admissible });

        if admissible && lowest.as_ref().is_none_or(|l| score.value < l.1.value) {
            lowest = Some((hard.clone(), score.clone()));
        }
        if admissible {
            let target = best.as_ref().map_or(reference, |b| b.1.value.min(reference));
            if score.value < target - IMPROVEMENT_EPS {
                ties.clear();
                ties.insert(hard.occupied());
                best = Some((hard.clone(), score));
                ind_em = 0;
            } else if (score.value - target).abs() <= IMPROVEMENT_EPS {
                ties.insert(hard.occupied());
            }
        }

        let stationary = match opts.mode {
            InnerMode::Cem => prev_hard.as_ref() == Some(&hard),
            InnerMode::Em => next == phi,
        };
        phi = next;
        prev_hard = Some(hard);
        if stationary {
            break StopReason::Stationary;
        }
    };
    Ok(InnerOutcome { best, lowest, ties, iterations, stop, trace })
}

/// Runs the classification loop from `init`, keeping the best hard
/// assignment seen.
pub fn run_cem(init: Init, w: &WeightedSample, family: &Family, opts: &EngineOptions) -> Result<(FitResult, IterationTrace)> {
    if opts.stop_em == 0 {
        return Err(Error::Config("stop_em must be at least 1".into()));
    }
    let r = match &init {
        Init::Model(s) => s.r(),
        Init::Assignment(s) => s.r(),
    };
    let out = run_inner(init, w, family, opts, f64::INFINITY)?;
    let (hard, criterion) = out.best.ok_or(Error::NoAdmissibleAssignment)?;
    let result = FitResult::from_best(hard, criterion, r, false, out.ties.into_iter().collect(), Vec::new(), Vec::new());
    Ok((result, out.trace))
}
