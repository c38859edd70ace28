//! Order-recovery experiments on synthetic mixtures and per-class histograms.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{FamilyConfig, FamilyKind};
use crate::sample::WeightedSample;
use crate::search::{search, FitResult, SearchConfig};
use crate::synth::{sample, spec_r2, spec_r7, MixtureSpec};

pub const TWO_SQRT3: f64 = 3.464_101_615_137_754_6;
pub const TWO_COMPONENT_FACTORS: [f64; 5] = [0.70, 0.75, 0.9, 1.0, 1.1];
pub const SEVEN_COMPONENT_FACTORS: [f64; 4] = [0.50, 0.60, 0.70, 1.0];
pub const RUN_HEADER: [&str; 6] = ["mu_factor", "family", "seed", "r_n", "best_H", "wallclock_ms"];

/// Which synthetic layout an experiment draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    TwoComponents,
    SevenComponents,
}

impl Layout {
    pub fn spec(self, mu_star: f64) -> Result<MixtureSpec> {
        match self {
            Layout::TwoComponents => spec_r2(mu_star),
            Layout::SevenComponents => spec_r7(mu_star),
        }
    }

    pub fn default_factors(self) -> &'static [f64] {
        match self {
            Layout::TwoComponents => &TWO_COMPONENT_FACTORS,
            Layout::SevenComponents => &SEVEN_COMPONENT_FACTORS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub mu_factor: f64,
    pub family: FamilyKind,
    pub seed: u64,
    pub r_n: usize,
    pub best_h: f64,
    pub wallclock_ms: u128,
    pub order_tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub mu_factor: f64,
    pub family: FamilyKind,
    pub r_n: Vec<usize>,
    pub majority: usize,
    /// Runs agreeing with the majority.
    pub agreement: usize,
    /// Fewer than four in five runs agree.
    pub unstable: bool,
}

impl CellSummary {
    fn from_runs(mu_factor: f64, family: FamilyKind, r_n: Vec<usize>) -> Self {
        let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
        for &r in &r_n {
            *freq.entry(r).or_default() += 1;
        }
        // most frequent order; the smaller order wins a tie
        let (majority, agreement) =
            freq.iter().fold((0, 0), |best, (&r, &c)| if c > best.1 { (r, c) } else { best });
        let unstable = agreement * 5 < r_n.len() * 4;
        Self { mu_factor, family, r_n, majority, agreement, unstable }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TableReport {
    pub runs: Vec<RunRow>,
    pub cells: Vec<CellSummary>,
}

impl TableReport {
    pub fn cell(&self, mu_factor: f64, family: FamilyKind) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.mu_factor == mu_factor && c.family == family)
    }

    /// One line per run with the fixed run header.
    pub fn runs_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RUN_HEADER).expect("in-memory write");
        for r in &self.runs {
            w.write_record([
                r.mu_factor.to_string(),
                r.family.to_string(),
                r.seed.to_string(),
                r.r_n.to_string(),
                r.best_h.to_string(),
                r.wallclock_ms.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// One line per cell: per-seed orders, majority and stability flag.
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["mu_factor", "family", "r_n_by_seed", "majority_r_n", "agreement", "unstable"])
            .expect("in-memory write");
        for c in &self.cells {
            let per_seed: Vec<String> = c.r_n.iter().map(usize::to_string).collect();
            w.write_record([
                c.mu_factor.to_string(),
                c.family.to_string(),
                per_seed.join(" "),
                c.majority.to_string(),
                format!("{}/{}", c.agreement, c.r_n.len()),
                c.unstable.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Fits `n` draws of the layout at each spacing factor, once per seed.
///
/// The seed drives both the sample and the search restarts.
pub fn run_table(
    layout: Layout,
    family: &FamilyConfig,
    mu_factors: &[f64],
    n: usize,
    seeds: &[u64],
    cfg: &SearchConfig,
) -> Result<TableReport> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut report = TableReport::default();
    for &factor in mu_factors {
        let spec = layout.spec(factor * TWO_SQRT3)?;
        let mut orders = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let started = Instant::now();
            let (raw, _) = sample(&spec, n, seed)?;
            let w = WeightedSample::ingest(&raw, 0.0)?;
            let fam = family.bind(&w)?;
            let res = search(&w, &fam, &SearchConfig { seed, ..cfg.clone() })?;
            orders.push(res.r_n);
            report.runs.push(RunRow {
                mu_factor: factor,
                family: family.kind,
                seed,
                r_n: res.r_n,
                best_h: res.best_h,
                wallclock_ms: started.elapsed().as_millis(),
                order_tied: res.order_tied(),
            });
        }
        report.cells.push(CellSummary::from_runs(factor, family.kind, orders));
    }
    Ok(report)
}

pub fn run_table1(family: &FamilyConfig, mu_factors: &[f64], n: usize, seeds: &[u64], cfg: &SearchConfig) -> Result<TableReport> {
    run_table(Layout::TwoComponents, family, mu_factors, n, seeds, cfg)
}

pub fn run_table2(family: &FamilyConfig, mu_factors: &[f64], n: usize, seeds: &[u64], cfg: &SearchConfig) -> Result<TableReport> {
    run_table(Layout::SevenComponents, family, mu_factors, n, seeds, cfg)
}

/// Per-class counts over equal-width bins spanning the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassHistograms {
    pub edges: Vec<f64>,
    /// Occupied classes, in class-index order.
    pub classes: Vec<usize>,
    /// `counts[c][b]` is the count of class `classes[c]` in bin `b`.
    pub counts: Vec<Vec<u64>>,
}

impl ClassHistograms {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string()];
        header.extend(self.classes.iter().map(|c| format!("class_{}", c + 1)));
        w.write_record(&header).expect("in-memory write");
        for b in 0..self.edges.len() - 1 {
            let mut row = vec![self.edges[b].to_string(), self.edges[b + 1].to_string()];
            row.extend(self.counts.iter().map(|c| c[b].to_string()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

pub fn class_histograms(result: &FitResult, w: &WeightedSample, bins: usize) -> Result<ClassHistograms> {
    if bins == 0 {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    let labels = result.best_assignment.labels();
    if labels.len() != w.len() {
        return Err(Error::ValueSetMismatch { assignment: labels.len(), sample: w.len() });
    }
    let lo = w.values()[0];
    let width = if w.range() > 0.0 { w.range() / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut counts = vec![vec![0u64; bins]; classes.len()];
    for (i, (&z, &c)) in w.values().iter().zip(w.counts()).enumerate() {
        let b = (((z - lo) / width) as usize).min(bins - 1);
        let k = classes.binary_search(&labels[i]).expect("label listed");
        counts[k][b] += c;
    }
    Ok(ClassHistograms { edges, classes, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_and_flag() {
        let c = CellSummary::from_runs(1.0, FamilyKind::Gaussian, vec![2, 2, 1, 2, 2]);
        assert_eq!((c.majority, c.agreement, c.unstable), (2, 4, false));
        let c = CellSummary::from_runs(1.0, FamilyKind::Gaussian, vec![2, 1, 1, 2, 2]);
        assert_eq!((c.majority, c.agreement, c.unstable), (2, 3, true));
        let c = CellSummary::from_runs(1.0, FamilyKind::Gaussian, vec![2, 1]);
        assert_eq!(c.majority, 1);
    }

    #[test]
    fn runs_csv_header() {
        let r = TableReport::default();
        assert_eq!(r.runs_csv().trim(), "mu_factor,family,seed,r_n,best_H,wallclock_ms");
    }
}
