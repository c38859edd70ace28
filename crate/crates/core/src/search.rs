//! Order-growing multi-restart search for the best hard assignment.
//!
//! For `r = r_start, r_start + 1, ...` the search runs `n_init` seeded
//! restarts of the inner loop from random soft assignments. Every MAP
//! snapshot is scored; the global best is replaced only on a strict
//! improvement. After `stop_r` consecutive orders without improvement the
//! search stops, and the number of occupied classes of the best assignment
//! is reported as the estimated order `r_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cem::{run_inner, EngineOptions, Init, InnerMode, ModelState, StopReason, IMPROVEMENT_EPS};
use crate::entropy::{criterion_of_assignment, CriterionValue};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::sample::{HardAssignment, SoftAssignment, WeightedSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_init: usize,
    pub stop_em: usize,
    pub stop_r: usize,
    pub r_start: usize,
    pub r_max_guard: usize,
    pub seed: u64,
    /// What the inner loop refits on.
    pub inner: InnerMode,
    /// Hard cap on inner iterations per restart.
    pub max_iter: usize,
    /// How each restart draws its starting assignment.
    pub init: InitScheme,
    /// Samples with at most this many distinct values get their restart
    /// optima polished by single-value class moves; `0` disables it.
    pub polish_max_values: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// Every row drawn independently from the flat Dirichlet.
    Dirichlet,
    /// Nearest-center partition around `r` spread-out random centers.
    Centers,
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(InitScheme::Dirichlet),
            "centers" => Ok(InitScheme::Centers),
            other => Err(Error::Config(format!("unknown init scheme '{other}' (expected dirichlet or centers)"))),
        }
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { n_init: 20, stop_em: 5, stop_r: 2, r_start: 1, r_max_guard: 32, seed: 0, inner: InnerMode::Em, max_iter: 10_000, init: InitScheme::Centers, polish_max_values: 24 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_init", self.n_init),
            ("stop_em", self.stop_em),
            ("stop_r", self.stop_r),
            ("r_start", self.r_start),
            ("r_max_guard", self.r_max_guard),
            ("max_iter", self.max_iter),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.r_max_guard < self.r_start {
            return Err(Error::Config(format!(
                "r_max_guard ({}) is below r_start ({})",
                self.r_max_guard, self.r_start
            )));
        }
        Ok(())
    }

    fn engine(&self) -> EngineOptions {
        EngineOptions { stop_em: self.stop_em, mode: self.inner, max_iter: self.max_iter }
    }
}

/// Telemetry for one restart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartRecord {
    pub r: usize,
    pub restart: usize,
    pub iterations: usize,
    /// Best admissible criterion this restart saw, if it beat the reference.
    pub best_h: Option<f64>,
    pub stop: Option<StopReason>,
    /// Set when the restart aborted, e.g. on an unexplainable point.
    pub error: Option<String>,
}

/// Global best after finishing one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRecord {
    pub r: usize,
    pub best_h: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub best_h: f64,
    pub best_assignment: HardAssignment,
    pub model: ModelState,
    pub criterion: CriterionValue,
    /// Largest order visited.
    pub r_searched: usize,
    /// Occupied classes in the best assignment.
    pub r_n: usize,
    pub guard_hit: bool,
    /// Occupancies of assignments tying the best value; more than one entry
    /// means the order is not uniquely determined.
    pub tied_orders: Vec<usize>,
    pub restarts: Vec<RestartRecord>,
    pub levels: Vec<LevelRecord>,
}

impl FitResult {
    pub(crate) fn from_best(
        best_assignment: HardAssignment,
        criterion: CriterionValue,
        r_searched: usize,
        guard_hit: bool,
        mut tied_orders: Vec<usize>,
        restarts: Vec<RestartRecord>,
        levels: Vec<LevelRecord>,
    ) -> Self {
        let r_n = best_assignment.occupied();
        if !tied_orders.contains(&r_n) {
            tied_orders.push(r_n);
        }
        tied_orders.sort_unstable();
        tied_orders.dedup();
        Self {
            best_h: criterion.value,
            model: ModelState::from_criterion(&criterion),
            best_assignment,
            criterion,
            r_searched,
            r_n,
            guard_hit,
            tied_orders,
            restarts,
            levels,
        }
    }

    /// Whether assignments with different occupancies tie for the optimum.
    pub fn order_tied(&self) -> bool {
        self.tied_orders.len() > 1
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the stream used by restart `restart` at order `r`.
pub fn restart_seed(seed: u64, r: usize, restart: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((r as u64) << 32) | restart as u64))
}

/// Rows drawn independently from the flat Dirichlet over `r` classes.
pub fn random_initial_assignment<R: Rng + ?Sized>(r: usize, w: &WeightedSample, rng: &mut R) -> SoftAssignment {
    assert!(r >= 1, "at least one class");
    let mut phi = Vec::with_capacity(w.len() * r);
    let mut row = vec![0.0; r];
    for _ in 0..w.len() {
        if r == 1 {
            phi.push(1.0);
            continue;
        }
        let mut total = 0.0;
        for v in row.iter_mut() {
            // 1 - U lies in (0, 1], so the exponential draw is finite
            *v = -(1.0 - rng.gen::<f64>()).ln();
            total += *v;
        }
        if total > 0.0 {
            phi.extend(row.iter().map(|v| v / total));
        } else {
            phi.extend(std::iter::repeat_n(1.0 / r as f64, r));
        }
    }
    SoftAssignment::from_rows_unchecked(r, phi)
}

/// Hard partition around `r` random centers: the first drawn by weight, each
/// further one with probability proportional to weight times the squared
/// distance to the nearest center chosen so far.
pub fn random_center_assignment<R: Rng + ?Sized>(r: usize, w: &WeightedSample, rng: &mut R) -> SoftAssignment {
    assert!(r >= 1, "at least one class");
    let values = w.values();
    let weights = w.weights();
    let mut centers: Vec<f64> = Vec::with_capacity(r);
    let mut d2 = vec![f64::INFINITY; values.len()];
    for _ in 0..r {
        let score: Vec<f64> =
            if centers.is_empty() { weights.clone() } else { weights.iter().zip(&d2).map(|(w, d)| w * d).collect() };
        let total: f64 = score.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let u = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = values.len() - 1;
        for (i, s) in score.iter().enumerate() {
            acc += s;
            if u < acc {
                pick = i;
                break;
            }
        }
        let c = values[pick];
        centers.push(c);
        for (d, &z) in d2.iter_mut().zip(values) {
            *d = d.min((z - c) * (z - c));
        }
    }
    let labels = values
        .iter()
        .map(|&z| {
            let mut best = 0;
            for (x, &c) in centers.iter().enumerate() {
                if (z - c).abs() < (z - centers[best]).abs() {
                    best = x;
                }
            }
            best
        })
        .collect();
    SoftAssignment::from(&HardAssignment::new(r, labels).expect("labels below r"))
}

struct RestartOutcome {
    record: RestartRecord,
    best: Option<(HardAssignment, CriterionValue)>,
    ties: Vec<usize>,
}

/// Greedy descent over small moves: one distinct value changing class, two
/// values moving together into one class, or two values swapping classes.
/// Each sweep takes the best improving move; only admissible assignments
/// are accepted.
pub fn polish(
    start: (HardAssignment, CriterionValue),
    w: &WeightedSample,
    family: &Family,
) -> Result<(HardAssignment, CriterionValue)> {
    let (mut h, mut c) = start;
    let r = h.r();
    let m = h.len();
    loop {
        let mut moves: Vec<Vec<(usize, usize)>> = Vec::new();
        let labels = h.labels();
        for i in 0..m {
            for x in (0..r).filter(|&x| x != labels[i]) {
                moves.push(vec![(i, x)]);
                for j in i + 1..m {
                    if labels[j] != x {
                        moves.push(vec![(i, x), (j, x)]);
                    }
                }
            }
            for j in i + 1..m {
                if labels[j] != labels[i] {
                    moves.push(vec![(i, labels[j]), (j, labels[i])]);
                }
            }
        }
        let scored: Vec<Option<(HardAssignment, CriterionValue)>> = moves
            .par_iter()
            .map(|mv| {
                let mut next = labels.to_vec();
                for &(i, x) in mv {
                    next[i] = x;
                }
                let cand = HardAssignment::new(r, next)?;
                let score = criterion_of_assignment(&cand, w, family)?.criterion;
                Ok((score.admissible(family) && score.value < c.value - IMPROVEMENT_EPS).then_some((cand, score)))
            })
            .collect::<Result<_>>()?;
        // lowest value, earliest move on ties, so the result is deterministic
        let best = scored.into_iter().flatten().fold(None, |acc: Option<(HardAssignment, CriterionValue)>, cand| match acc {
            Some(a) if a.1.value <= cand.1.value => Some(a),
            _ => Some(cand),
        });
        match best {
            Some(b) => (h, c) = b,
            None => return Ok((h, c)),
        }
    }
}

fn run_restart(w: &WeightedSample, family: &Family, cfg: &SearchConfig, r: usize, restart: usize, reference: f64) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, r, restart));
    let init = match cfg.init {
        InitScheme::Dirichlet => random_initial_assignment(r, w, &mut rng),
        InitScheme::Centers => random_center_assignment(r, w, &mut rng),
    };
    let polishing = r > 1 && w.len() <= cfg.polish_max_values;
    let outcome = run_inner(Init::Assignment(init), w, family, &cfg.engine(), reference).and_then(|mut out| {
        if let (true, Some(start)) = (polishing, out.lowest.take()) {
            let (h, c) = polish(start, w, family)?;
            let target = out.best.as_ref().map_or(reference, |b| b.1.value.min(reference));
            if c.value < target - IMPROVEMENT_EPS {
                out.ties.clear();
                out.ties.insert(h.occupied());
                out.best = Some((h, c));
            } else if (c.value - target).abs() <= IMPROVEMENT_EPS {
                out.ties.insert(h.occupied());
            }
        }
        Ok(out)
    });
    match outcome {
        Ok(out) => RestartOutcome {
            record: RestartRecord {
                r,
                restart,
                iterations: out.iterations,
                best_h: out.best.as_ref().map(|b| b.1.value),
                stop: Some(out.stop),
                error: None,
            },
            best: out.best,
            ties: out.ties.into_iter().collect(),
        },
        Err(e) => RestartOutcome {
            record: RestartRecord { r, restart, iterations: 0, best_h: None, stop: None, error: Some(e.to_string()) },
            best: None,
            ties: Vec::new(),
        },
    }
}

/// Runs the order-growing search.
///
/// All restarts at one order are compared against the global best as it
/// stood when the order began, so the outcome does not depend on how the
/// restarts are scheduled across threads.
///
/// On samples with at most `polish_max_values` distinct values, each
/// restart's lowest admissible snapshot and the incumbent (padded with an
/// empty class) are refined by [`polish`].
pub fn search(w: &WeightedSample, family: &Family, cfg: &SearchConfig) -> Result<FitResult> {
    cfg.validate()?;
    let mut best: Option<(HardAssignment, CriterionValue)> = None;
    let mut ties: Vec<usize> = Vec::new();
    let mut restarts = Vec::new();
    let mut levels = Vec::new();
    let mut ind_r = 0;
    let mut r = cfg.r_start;
    let mut guard_hit = false;
    let mut r_searched = r;

    while ind_r < cfg.stop_r {
        if r > cfg.r_max_guard {
            guard_hit = true;
            break;
        }
        r_searched = r;
        let reference = best.as_ref().map_or(f64::INFINITY, |b| b.1.value);
        // every restart at a single class starts from the same assignment
        let n_restarts = if r == 1 { 1 } else { cfg.n_init };
        let outcomes: Vec<RestartOutcome> =
            (0..n_restarts).into_par_iter().map(|k| run_restart(w, family, cfg, r, k, reference)).collect();

        let mut level_best: Option<(HardAssignment, CriterionValue)> = None;
        let mut level_ties: Vec<(f64, Vec<usize>)> = Vec::new();
        for out in outcomes {
            restarts.push(out.record);
            let tie_value = out.best.as_ref().map_or(reference, |b| b.1.value);
            level_ties.push((tie_value, out.ties));
            if let Some((h, c)) = out.best {
                let replace = match &level_best {
                    None => true,
                    Some((bh, bc)) => match c.value.total_cmp(&bc.value) {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Equal => h.canonical() < bh.canonical(),
                        std::cmp::Ordering::Greater => false,
                    },
                };
                if replace {
                    level_best = Some((h, c));
                }
            }
        }

        // the incumbent with one more, empty, class is a further starting point
        if let (true, Some((bh, bc))) = (r > 1 && w.len() <= cfg.polish_max_values, &best) {
            let (h, c) = polish((bh.with_classes(r)?, bc.clone()), w, family)?;
            if c.value < reference - IMPROVEMENT_EPS {
                level_ties.push((c.value, vec![h.occupied()]));
                let replace = level_best.as_ref().is_none_or(|(lh, lc)| match c.value.total_cmp(&lc.value) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Equal => h.canonical() < lh.canonical(),
                    std::cmp::Ordering::Greater => false,
                });
                if replace {
                    level_best = Some((h, c));
                }
            }
        }

        let improved = match level_best {
            Some((h, c)) if c.value < reference - IMPROVEMENT_EPS => {
                best = Some((h, c));
                ties.clear();
                true
            }
            _ => false,
        };
        if let Some((_, c)) = &best {
            for (value, occ) in level_ties {
                if (value - c.value).abs() <= IMPROVEMENT_EPS {
                    ties.extend(occ);
                }
            }
        }
        if improved {
            ind_r = 0;
        } else {
            ind_r += 1;
        }
        levels.push(LevelRecord { r, best_h: best.as_ref().map_or(f64::INFINITY, |b| b.1.value), improved });
        r += 1;
    }

    let (h, c) = best.ok_or(Error::NoAdmissibleAssignment)?;
    Ok(FitResult::from_best(h, c, r_searched, guard_hit, ties, restarts, levels))
}
