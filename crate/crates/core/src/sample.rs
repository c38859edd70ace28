//! Empirical distributions, probability vectors and class assignments.
//!
//! A [`WeightedSample`] stores the distinct observed values in increasing
//! order together with their multiplicities, so the empirical distribution
//! puts mass `n_z / n` on each value `z`. Assignments are indexed by the
//! position of a distinct value, not by the raw observation.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for vectors built directly from user input.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance for decompositions reconstructed from assignments.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    values: Vec<f64>,
    counts: Vec<u64>,
    n: u64,
}

impl WeightedSample {
    /// Groups raw observations into distinct values.
    ///
    /// With `grouping_tolerance == 0` values are grouped by exact equality
    /// (`-0.0` and `0.0` are the same value). Otherwise each observation is
    /// rounded to the nearest multiple of the tolerance first.
    pub fn ingest(raw: &[f64], grouping_tolerance: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptySample);
        }
        if !(grouping_tolerance >= 0.0) || !grouping_tolerance.is_finite() {
            return Err(Error::InvalidTolerance(grouping_tolerance));
        }
        let mut groups: BTreeMap<OrdKey, u64> = BTreeMap::new();
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            let key = if grouping_tolerance > 0.0 {
                (value / grouping_tolerance).round() * grouping_tolerance
            } else {
                value
            };
            // normalizes -0.0
            *groups.entry(OrdKey(key + 0.0)).or_insert(0) += 1;
        }
        let (values, counts): (Vec<f64>, Vec<u64>) = groups.into_iter().map(|(k, c)| (k.0, c)).unzip();
        Ok(Self { values, counts, n: raw.len() as u64 })
    }

    /// Builds a sample from already-grouped values.
    pub fn from_counts(values: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.len() != counts.len() {
            return Err(Error::InvalidAssignment(format!(
                "{} values but {} counts",
                values.len(),
                counts.len()
            )));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidAssignment("values must be strictly increasing".into()));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidAssignment("every count must be at least 1".into()));
        }
        let n = counts.iter().sum();
        Ok(Self { values, counts, n })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of observations.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of distinct values.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.n as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// `max - min` over the distinct values.
    pub fn range(&self) -> f64 {
        self.values[self.len() - 1] - self.values[0]
    }

    /// Position of `value` among the distinct values, applying the same
    /// grouping rule as [`WeightedSample::ingest`].
    pub fn index_of(&self, value: f64, grouping_tolerance: f64) -> Option<usize> {
        let key = if grouping_tolerance > 0.0 {
            (value / grouping_tolerance).round() * grouping_tolerance
        } else {
            value
        } + 0.0;
        self.values.binary_search_by(|v| v.total_cmp(&key)).ok()
    }
}

#[derive(Debug, Clone, Copy)]
struct OrdKey(f64);

impl PartialEq for OrdKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for OrdKey {}
impl PartialOrd for OrdKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Reads one numeric value per line, taking the first comma-separated field.
/// A non-numeric first line is treated as a header; any later non-numeric
/// line is an error. Blank lines are skipped.
pub fn read_values<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').next().unwrap_or_default().trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(v) => {
                return Err(Error::Parse { line: i + 1, message: format!("non-finite value {v}") });
            }
            Err(_) if !seen_content => {}
            Err(_) => {
                return Err(Error::Parse { line: i + 1, message: format!("not a number: '{field}'") });
            }
        }
        seen_content = true;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(weights, PROB_TOL)
    }

    pub fn with_tolerance(weights: Vec<f64>, tol: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbVector("no entries".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidProbVector(format!("entry {w} is not a non-negative real")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidProbVector(format!("entries sum to {total}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(r: usize) -> Self {
        Self(vec![1.0 / r as f64; r])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&w| w > 0.0).count()
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Row-stochastic matrix `phi[value][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment {
    r: usize,
    phi: Vec<f64>,
}

impl SoftAssignment {
    /// Validates that every entry lies in `[0, 1]` and rows sum to one.
    pub fn new(r: usize, phi: Vec<f64>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidAssignment("class count must be at least 1".into()));
        }
        if phi.is_empty() || !phi.len().is_multiple_of(r) {
            return Err(Error::InvalidAssignment(format!(
                "matrix of {} entries is not a whole number of rows of width {r}",
                phi.len()
            )));
        }
        for (i, row) in phi.chunks(r).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidAssignment(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidAssignment(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { r, phi })
    }

    pub(crate) fn from_rows_unchecked(r: usize, phi: Vec<f64>) -> Self {
        debug_assert_eq!(phi.len() % r, 0);
        Self { r, phi }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of rows (distinct values).
    pub fn len(&self) -> usize {
        self.phi.len() / self.r
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.phi[i * self.r..(i + 1) * self.r]
    }

    pub fn get(&self, i: usize, x: usize) -> f64 {
        self.phi[i * self.r + x]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.phi.chunks(self.r)
    }

    pub fn is_hard(&self) -> bool {
        self.phi.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

impl From<&HardAssignment> for SoftAssignment {
    fn from(h: &HardAssignment) -> Self {
        soft_from_hard(h)
    }
}

/// One class label per distinct value, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HardAssignment {
    r: usize,
    labels: Vec<usize>,
}

impl HardAssignment {
    pub fn new(r: usize, labels: Vec<usize>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidAssignment("class count must be at least 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidAssignment("no labels".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= r) {
            return Err(Error::InvalidAssignment(format!("label {l} out of range for r = {r}")));
        }
        Ok(Self { r, labels })
    }

    /// Every value in class 0.
    pub fn merged(r: usize, len: usize) -> Self {
        Self { r, labels: vec![0; len] }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of classes holding at least one value.
    pub fn occupied(&self) -> usize {
        let mut seen = vec![false; self.r];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.into_iter().filter(|&s| s).count()
    }

    /// Relabels classes in order of first appearance, so assignments that
    /// differ only by a label permutation compare equal.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.r];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Self { r: self.r, labels }
    }

    /// Same partition viewed with `r` classes (`r` must cover every label).
    pub fn with_classes(&self, r: usize) -> Result<Self> {
        Self::new(r, self.labels.clone())
    }
}

pub fn soft_from_hard(h: &HardAssignment) -> SoftAssignment {
    let r = h.r();
    let mut phi = vec![0.0; h.len() * r];
    for (i, &l) in h.labels().iter().enumerate() {
        phi[i * r + l] = 1.0;
    }
    SoftAssignment { r, phi }
}

/// Mixture decomposition `(nu, (G_x))` of the empirical distribution.
///
/// Components with `nu(x) = 0` are stored as uniform placeholders and
/// flagged in `empty`; every criterion skips them.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub nu: ProbVector,
    pub components: Vec<Vec<f64>>,
    pub empty: Vec<bool>,
}

impl Decomposition {
    pub fn r(&self) -> usize {
        self.nu.len()
    }

    /// `sum_x nu(x) G_x(z)` for every value index.
    pub fn reconstruct(&self) -> Vec<f64> {
        let m = self.components.first().map_or(0, Vec::len);
        let mut out = vec![0.0; m];
        for (x, g) in self.components.iter().enumerate() {
            if self.empty[x] {
                continue;
            }
            for (o, gz) in out.iter_mut().zip(g) {
                *o += self.nu[x] * gz;
            }
        }
        out
    }

    /// Appends `extra` zero-weight classes.
    pub fn padded(&self, extra: usize) -> Self {
        let m = self.components.first().map_or(0, Vec::len);
        let mut nu = self.nu.as_slice().to_vec();
        let mut components = self.components.clone();
        let mut empty = self.empty.clone();
        for _ in 0..extra {
            nu.push(0.0);
            components.push(vec![1.0 / m as f64; m]);
            empty.push(true);
        }
        Self { nu: ProbVector(nu), components, empty }
    }
}

pub fn decomposition_from_assignment(s: &SoftAssignment, w: &WeightedSample) -> Result<Decomposition> {
    if s.len() != w.len() {
        return Err(Error::ValueSetMismatch { assignment: s.len(), sample: w.len() });
    }
    let r = s.r();
    let n = w.n() as f64;
    let mut mass = vec![0.0; r];
    let mut components = vec![vec![0.0; w.len()]; r];
    for (i, row) in s.rows().enumerate() {
        let c = w.counts()[i] as f64;
        for (x, &p) in row.iter().enumerate() {
            let a = c * p;
            mass[x] += a;
            components[x][i] = a;
        }
    }
    let mut empty = vec![false; r];
    for x in 0..r {
        if mass[x] > 0.0 {
            let inv = 1.0 / mass[x];
            components[x].iter_mut().for_each(|g| *g *= inv);
        } else {
            empty[x] = true;
            components[x].iter_mut().for_each(|g| *g = 1.0 / w.len() as f64);
        }
    }
    let nu = mass.into_iter().map(|m| m / n).collect();
    Ok(Decomposition { nu: ProbVector(nu), components, empty })
}
