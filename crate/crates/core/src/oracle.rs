//! Exact reference solutions: exhaustive minimization on tiny samples, the
//! closed form for binary data, and the two-Gaussian split test.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{criterion_of_assignment, CriterionValue};
use crate::error::{Error, Result};
use crate::family::{xlogx, Family};
use crate::sample::{HardAssignment, ProbVector, WeightedSample, PROB_TOL};

/// Largest `r^m` the exhaustive search accepts.
pub const BRUTE_FORCE_LIMIT: u64 = 2_000_000;
/// Values within this distance of the minimum count as optimal.
pub const ARGMIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    pub min_h: f64,
    /// Canonically labelled optimal assignments, one per label-permutation class.
    pub argmin: Vec<HardAssignment>,
    /// Assignments evaluated (one per partition of the distinct values).
    pub evaluated: u64,
}

impl BruteForceResult {
    pub fn optimal_orders(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.argmin.iter().map(|h| h.occupied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

struct Best {
    min: f64,
    argmin: Vec<HardAssignment>,
    evaluated: u64,
}

impl Best {
    fn new() -> Self {
        Self { min: f64::INFINITY, argmin: Vec::new(), evaluated: 0 }
    }

    fn offer(&mut self, h: &HardAssignment, c: &CriterionValue) {
        if c.value < self.min - ARGMIN_TOL {
            self.min = c.value;
            self.argmin.clear();
            self.argmin.push(h.clone());
        } else if c.value <= self.min + ARGMIN_TOL {
            self.min = self.min.min(c.value);
            self.argmin.push(h.clone());
        }
    }

    fn merge(mut self, other: Best) -> Best {
        self.evaluated += other.evaluated;
        let min = self.min.min(other.min);
        let mut all = self.argmin;
        all.extend(other.argmin);
        Best { min, argmin: all, evaluated: self.evaluated }
    }
}

/// Extends a restricted-growth prefix to every completion, scoring each.
fn complete(
    labels: &mut Vec<usize>,
    used: usize,
    m: usize,
    r: usize,
    w: &WeightedSample,
    family: &Family,
    best: &mut Best,
) -> Result<()> {
    if labels.len() == m {
        let h = HardAssignment::new(r, labels.clone())?;
        let c = criterion_of_assignment(&h, w, family)?.criterion;
        best.evaluated += 1;
        if c.admissible(family) {
            best.offer(&h, &c);
        }
        return Ok(());
    }
    let top = (used + 1).min(r);
    for x in 0..top {
        labels.push(x);
        complete(labels, used.max(x + 1), m, r, w, family, best)?;
        labels.pop();
    }
    Ok(())
}

fn prefixes(len: usize, r: usize) -> Vec<(Vec<usize>, usize)> {
    let mut out = vec![(Vec::new(), 0usize)];
    for _ in 0..len {
        let mut next = Vec::new();
        for (p, used) in out {
            for x in 0..(used + 1).min(r) {
                let mut q = p.clone();
                q.push(x);
                next.push((q, used.max(x + 1)));
            }
        }
        out = next;
    }
    out
}

/// Global minimum of the criterion over all hard assignments of the
/// distinct values into at most `r` classes.
///
/// Label permutations are enumerated once each: labels are restricted
/// growth strings, so class blocks appear ordered by their smallest member.
pub fn brute_force_min(w: &WeightedSample, family: &Family, r: usize) -> Result<BruteForceResult> {
    if r == 0 {
        return Err(Error::Config("r must be at least 1".into()));
    }
    let m = w.len();
    let count = (r as f64).powi(m as i32);
    if count > BRUTE_FORCE_LIMIT as f64 {
        return Err(Error::EnumerationTooLarge { count, limit: BRUTE_FORCE_LIMIT });
    }
    let split = m.min(4);
    let parts: Vec<Best> = prefixes(split, r)
        .into_par_iter()
        .map(|(mut p, used)| {
            let mut best = Best::new();
            complete(&mut p, used, m, r, w, family, &mut best).map(|_| best)
        })
        .collect::<Result<_>>()?;
    let best = parts.into_iter().fold(Best::new(), Best::merge);
    if best.argmin.is_empty() {
        return Err(Error::NoAdmissibleAssignment);
    }
    let min = best.min;
    let mut argmin: Vec<HardAssignment> = Vec::new();
    for h in best.argmin {
        let v = criterion_of_assignment(&h, w, family)?.criterion.value;
        if v <= min + ARGMIN_TOL {
            argmin.push(h);
        }
    }
    argmin.sort();
    argmin.dedup();
    Ok(BruteForceResult { min_h: min, argmin, evaluated: best.evaluated })
}

/// A decomposition of a distribution on `{0, 1}`; each component is
/// `(G(0), G(1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryDecomposition {
    pub nu: Vec<f64>,
    pub components: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinarySolution {
    pub min_h: f64,
    pub optimal_decompositions: Vec<BinaryDecomposition>,
    /// Pivot index (1-based) of the optimal weights sorted decreasingly.
    pub r_nu: usize,
}

impl BinarySolution {
    /// Optimal decompositions as canonical hard labelings of the values
    /// present, listed in the order `0, 1`.
    pub fn canonical_labelings(&self, mu0: f64, mu1: f64) -> Vec<Vec<usize>> {
        let present = usize::from(mu0 > 0.0) + usize::from(mu1 > 0.0);
        let mut out: Vec<Vec<usize>> = self
            .optimal_decompositions
            .iter()
            .map(|d| if d.nu.len() == 1 { vec![0; present] } else { vec![0, 1] })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Pivot of a weight vector for target mass `mu_star` on the dominant
/// value: the first index where the cumulative weight reaches `mu_star`,
/// and the fill level of that class.
pub fn binary_pivot(nu: &[f64], mu_star: f64) -> (usize, f64) {
    let mut cum = 0.0;
    for (i, &v) in nu.iter().enumerate() {
        if cum + v >= mu_star - PROB_TOL || i + 1 == nu.len() {
            let p = if v > 0.0 { ((mu_star - cum) / v).clamp(0.0, 1.0) } else { 1.0 };
            return (i + 1, p);
        }
        cum += v;
    }
    (nu.len(), 1.0)
}

/// Minimum of the criterion for a distribution on `{0, 1}` with masses
/// `(mu0, mu1)`, with every optimal decomposition.
pub fn binary_closed_form(mu0: f64, mu1: f64) -> Result<BinarySolution> {
    if !(0.0..=1.0).contains(&mu0) || !(0.0..=1.0).contains(&mu1) || (mu0 + mu1 - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidProbVector(format!("({mu0}, {mu1}) is not a distribution on {{0, 1}}")));
    }
    let min_h = -(xlogx(mu0) + xlogx(mu1));
    let mut optimal = vec![BinaryDecomposition { nu: vec![1.0], components: vec![[mu0, mu1]] }];
    if mu0 > 0.0 && mu1 > 0.0 {
        optimal.push(BinaryDecomposition { nu: vec![mu0, mu1], components: vec![[1.0, 0.0], [0.0, 1.0]] });
        optimal.push(BinaryDecomposition { nu: vec![mu1, mu0], components: vec![[0.0, 1.0], [1.0, 0.0]] });
    }
    let mut sorted = optimal.last().map(|d| d.nu.clone()).unwrap_or_default();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let (r_nu, _) = binary_pivot(&sorted, mu0.max(mu1));
    Ok(BinarySolution { min_h, optimal_decompositions: optimal, r_nu })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianThresholdReport {
    /// `ln sigma*` of the merged component.
    pub lhs: f64,
    /// `nu1 ln(sigma1 / nu1) + nu2 ln(sigma2 / nu2)`.
    pub rhs: f64,
    pub split_is_strictly_better: bool,
    /// Variance of the two-component mixture.
    pub sigma_star2: f64,
    pub merged_entropy: f64,
    pub split_entropy: f64,
}

/// Compares fitting one Gaussian to a two-Gaussian mixture against keeping
/// the two components separate, at the population level.
pub fn gaussian_split_test(nu1: f64, mu1: f64, sigma1: f64, nu2: f64, mu2: f64, sigma2: f64) -> Result<GaussianThresholdReport> {
    let nu = ProbVector::new(vec![nu1, nu2])?;
    if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
        return Err(Error::InvalidParams(format!("standard deviations must be positive, got {sigma1} and {sigma2}")));
    }
    if !(mu1.is_finite() && mu2.is_finite()) {
        return Err(Error::InvalidParams("means must be finite".into()));
    }
    let (nu1, nu2) = (nu[0], nu[1]);
    let d = mu1 - mu2;
    let sigma_star2 = nu1 * sigma1 * sigma1 + nu2 * sigma2 * sigma2 + nu1 * nu2 * d * d;
    let lhs = 0.5 * sigma_star2.ln();
    let side = |v: f64, s: f64| if v > 0.0 { v * (s / v).ln() } else { 0.0 };
    let rhs = side(nu1, sigma1) + side(nu2, sigma2);
    let c = 0.5 * ((2.0 * std::f64::consts::PI).ln() + 1.0);
    let merged_entropy = lhs + c;
    let split_entropy = rhs + c;
    Ok(GaussianThresholdReport { lhs, rhs, split_is_strictly_better: lhs > rhs, sigma_star2, merged_entropy, split_entropy })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SQRT3: f64 = 3.464_101_615_137_754_6;

    #[test]
    fn brute_force_two_point_binary() {
        let w = WeightedSample::from_counts(vec![0.0, 1.0], vec![1, 1]).unwrap();
        let res = brute_force_min(&w, &Family::bernoulli(), 2).unwrap();
        assert!((res.min_h - std::f64::consts::LN_2).abs() < 1e-12);
        let labels: Vec<&[usize]> = res.argmin.iter().map(|h| h.labels()).collect();
        assert_eq!(labels, vec![&[0, 0][..], &[0, 1][..]]);
    }

    #[test]
    fn brute_force_single_class_is_merged() {
        let w = WeightedSample::ingest(&[0.3, 1.2, 2.2, 5.0], 0.0).unwrap();
        let fam = Family::gaussian(1e-12);
        let res = brute_force_min(&w, &fam, 1).unwrap();
        let merged = criterion_of_assignment(&HardAssignment::merged(1, 4), &w, &fam).unwrap().criterion.value;
        assert_eq!(res.min_h, merged);
        assert_eq!(res.evaluated, 1);
    }

    #[test]
    fn brute_force_binary_three_classes() {
        let w = WeightedSample::from_counts(vec![0.0, 1.0], vec![7, 3]).unwrap();
        let res = brute_force_min(&w, &Family::bernoulli(), 3).unwrap();
        assert!((res.min_h - 0.610_864_302_054_894).abs() < 1e-12);
        assert!(res.argmin.iter().all(|h| h.occupied() < 3));
    }

    #[test]
    fn brute_force_counts_set_partitions() {
        // Bell-type counts: partitions of 5 items into at most 3 blocks
        let w = WeightedSample::ingest(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.0).unwrap();
        let res = brute_force_min(&w, &Family::gaussian(1e-12).with_degenerate(true), 3).unwrap();
        assert_eq!(res.evaluated, 1 + 15 + 25);
    }

    #[test]
    fn brute_force_guard() {
        let raw: Vec<f64> = (0..30).map(f64::from).collect();
        let w = WeightedSample::ingest(&raw, 0.0).unwrap();
        assert!(matches!(
            brute_force_min(&w, &Family::gaussian(1e-12), 3),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn closed_form_examples() {
        let s = binary_closed_form(0.5, 0.5).unwrap();
        assert!((s.min_h - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(s.optimal_decompositions.len(), 3);
        assert_eq!(s.r_nu, 1);
        let s = binary_closed_form(1.0, 0.0).unwrap();
        assert_eq!(s.min_h, 0.0);
        assert_eq!(s.optimal_decompositions.len(), 1);
        let s = binary_closed_form(0.7, 0.3).unwrap();
        assert!((s.min_h - 0.610_864_302_054_894).abs() < 1e-12);
        assert!(binary_closed_form(0.7, 0.4).is_err());
    }

    #[test]
    fn pivot_definition() {
        assert_eq!(binary_pivot(&[1.0], 0.7), (1, 0.7));
        let (r, p) = binary_pivot(&[0.5, 0.3, 0.2], 0.6);
        assert_eq!(r, 2);
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(binary_pivot(&[0.7, 0.3], 0.7), (1, 1.0));
    }

    #[test]
    fn threshold_boundary_at_two_sqrt3() {
        let rep = gaussian_split_test(0.5, 0.0, 1.0, 0.5, TWO_SQRT3, 1.0).unwrap();
        assert!((rep.lhs - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((rep.lhs - rep.rhs).abs() < 1e-12);
        assert!((rep.sigma_star2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_variance_boundaries() {
        for s2 in [4.0 - 15f64.sqrt(), 4.0 + 15f64.sqrt()] {
            let rep = gaussian_split_test(0.5, 0.0, 1.0, 0.5, 0.0, s2).unwrap();
            assert!((rep.lhs - rep.rhs).abs() < 1e-12, "{s2}: {}", rep.lhs - rep.rhs);
        }
        // between the roots one Gaussian is better, outside them the split is
        assert!(!gaussian_split_test(0.5, 0.0, 1.0, 0.5, 0.0, 2.0).unwrap().split_is_strictly_better);
        assert!(gaussian_split_test(0.5, 0.0, 1.0, 0.5, 0.0, 10.0).unwrap().split_is_strictly_better);
    }

    #[test]
    fn threshold_above_boundary() {
        assert!(gaussian_split_test(0.5, 0.0, 1.0, 0.5, 1.1 * TWO_SQRT3, 1.0).unwrap().split_is_strictly_better);
        assert!(gaussian_split_test(0.5, 0.0, 1.0, 0.5, 10.0, 1.0).unwrap().split_is_strictly_better);
        assert!(!gaussian_split_test(0.5, 0.0, 1.0, 0.5, 0.9 * TWO_SQRT3, 1.0).unwrap().split_is_strictly_better);
    }

    #[test]
    fn threshold_entropies_differ_by_lhs_minus_rhs() {
        let rep = gaussian_split_test(0.3, -1.0, 0.7, 0.7, 2.5, 1.9).unwrap();
        assert!(((rep.merged_entropy - rep.split_entropy) - (rep.lhs - rep.rhs)).abs() < 1e-12);
        let h_nu = -(xlogx(0.3) + xlogx(0.7));
        let c = 0.5 * ((2.0 * std::f64::consts::PI).ln() + 1.0);
        let split = h_nu + 0.3 * (0.7f64.ln() + c) + 0.7 * (1.9f64.ln() + c);
        assert!((rep.split_entropy - split).abs() < 1e-12);
    }

    #[test]
    fn threshold_rejects_bad_input() {
        assert!(gaussian_split_test(0.5, 0.0, 0.0, 0.5, 1.0, 1.0).is_err());
        assert!(gaussian_split_test(0.6, 0.0, 1.0, 0.5, 1.0, 1.0).is_err());
    }
}
