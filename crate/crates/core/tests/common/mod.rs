#![allow(dead_code)]

use mixent::{Family, FamilyConfig, FamilyKind, HardAssignment, WeightedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Expands a weighted sample and a per-value assignment into raw
/// observations with their class.
pub fn expand(w: &WeightedSample, labels: &[usize]) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for (i, (&z, &c)) in w.values().iter().zip(w.counts()).enumerate() {
        for _ in 0..c {
            out.push((z, labels[i]));
        }
    }
    out
}

fn gaussian_max_loglik(z: &[f64], floor: f64) -> f64 {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let s2 = var.max(floor);
    z.iter().map(|v| -0.5 * (LN_2PI + s2.ln() + (v - mean) * (v - mean) / s2)).sum()
}

fn bernoulli_max_loglik(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let ones = z.iter().filter(|&&v| v == 1.0).count() as f64;
    let p1 = ones / n;
    z.iter().map(|&v| if v == 1.0 { p1.ln() } else { (1.0 - p1).ln() }).sum()
}

/// Maximum over every left/right split of the sorted distinct values, with
/// rates and side weight computed from scratch on the raw points.
fn biexp_max_loglik(z: &[f64], alpha: f64, cap: f64) -> f64 {
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let n = sorted.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=distinct.len() {
        let left: Vec<f64> = if k > 0 { sorted.iter().copied().filter(|&v| v <= distinct[k - 1]).collect() } else { vec![] };
        let right: Vec<f64> = if k < distinct.len() { sorted.iter().copied().filter(|&v| v >= distinct[k]).collect() } else { vec![] };
        let p = (right.len() as f64 / n).clamp(alpha, 1.0 - alpha);
        let mut ll = 0.0;
        if let Some(&a) = left.last() {
            let d = left.iter().map(|v| a - v).sum::<f64>() / left.len() as f64;
            let lam = if d * cap <= 1.0 { cap } else { 1.0 / d };
            ll += left.iter().map(|v| (1.0 - p).ln() + lam.ln() - lam * (a - v)).sum::<f64>();
        }
        if let Some(&a) = right.first() {
            let d = right.iter().map(|v| v - a).sum::<f64>() / right.len() as f64;
            let lam = if d * cap <= 1.0 { cap } else { 1.0 / d };
            ll += right.iter().map(|v| p.ln() + lam.ln() - lam * (v - a)).sum::<f64>();
        }
        best = best.max(ll);
    }
    best
}

/// Classification log-likelihood of a hard assignment: sum of log class
/// frequencies plus, per class, the maximised log-likelihood of its points.
pub fn classification_loglik(w: &WeightedSample, h: &HardAssignment, family: &Family) -> f64 {
    let obs = expand(w, h.labels());
    let n = obs.len() as f64;
    let mut total = 0.0;
    for x in 0..h.r() {
        let z: Vec<f64> = obs.iter().filter(|o| o.1 == x).map(|o| o.0).collect();
        if z.is_empty() {
            continue;
        }
        total += z.len() as f64 * (z.len() as f64 / n).ln();
        total += match family.kind {
            FamilyKind::Gaussian => gaussian_max_loglik(&z, family.sigma2_floor),
            FamilyKind::Bernoulli => bernoulli_max_loglik(&z),
            FamilyKind::BiExp => biexp_max_loglik(&z, family.alpha, family.lambda_cap),
        };
    }
    total
}

/// Small weighted sample with repeated values.
pub fn random_sample(rng: &mut ChaCha8Rng, kind: FamilyKind, max_len: usize) -> WeightedSample {
    let len = rng.gen_range(2..=max_len);
    let raw: Vec<f64> = (0..len)
        .map(|_| match kind {
            FamilyKind::Bernoulli => f64::from(u8::from(rng.gen::<f64>() < 0.4)),
            _ => {
                let centre = if rng.gen::<bool>() { 0.0 } else { 3.0 };
                ((centre + 2.0 * rng.gen::<f64>() - 1.0) * 4.0).round() / 4.0
            }
        })
        .collect();
    WeightedSample::ingest(&raw, 0.0).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, r: usize, len: usize) -> HardAssignment {
    HardAssignment::new(r, (0..len).map(|_| rng.gen_range(0..r)).collect()).unwrap()
}

pub fn bind(kind: FamilyKind, w: &WeightedSample, allow_degenerate: bool) -> Family {
    let mut cfg = FamilyConfig::new(kind);
    cfg.allow_degenerate = allow_degenerate;
    cfg.bind(w).unwrap()
}

/// A tiny fitting problem: at most 10 distinct values, at most 3 classes.
pub struct TinyInstance {
    pub w: WeightedSample,
    pub family: Family,
    pub r: usize,
}

/// Instances are mostly Gaussian; every fifth is bi-exponential with
/// degenerate fits allowed (a multi-point tiny class always admits a capped
/// singleton side) and every seventh is binary.
pub fn tiny_instances(count: usize, seed: u64) -> Vec<TinyInstance> {
    let mut rng = rng(seed);
    (0..count)
        .map(|i| {
            let (kind, degenerate) = if i % 7 == 6 {
                (FamilyKind::Bernoulli, false)
            } else if i % 5 == 4 {
                (FamilyKind::BiExp, true)
            } else {
                (FamilyKind::Gaussian, false)
            };
            let w = loop {
                let n = rng.gen_range(4..=14);
                let raw: Vec<f64> = (0..n)
                    .map(|_| match kind {
                        FamilyKind::Bernoulli => f64::from(u8::from(rng.gen::<f64>() < 0.35)),
                        _ => {
                            let c = [0.0, 2.0, 5.0][rng.gen_range(0..3)];
                            ((c + rng.gen::<f64>() * 1.5) * 4.0).round() / 4.0
                        }
                    })
                    .collect();
                let w = WeightedSample::ingest(&raw, 0.0).unwrap();
                if w.len() >= 2 && w.len() <= 10 {
                    break w;
                }
            };
            let family = bind(kind, &w, degenerate);
            TinyInstance { w, family, r: rng.gen_range(1..=3) }
        })
        .collect()
}
