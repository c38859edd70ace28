//! Seeded synthetic samples from finite mixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::GaussianParams;
use crate::sample::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Component {
    Gaussian { mu: f64, sigma2: f64 },
    /// Emits `1` with probability `p1`, else `0`.
    Bernoulli { p1: f64 },
}

impl From<GaussianParams> for Component {
    fn from(g: GaussianParams) -> Self {
        Component::Gaussian { mu: g.mu, sigma2: g.sigma2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub components: Vec<Component>,
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        let spec = Self { weights, components };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ProbVector::new(self.weights.clone())?;
        if self.weights.len() != self.components.len() {
            return Err(Error::InvalidParams(format!(
                "{} weights but {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        for c in &self.components {
            match *c {
                Component::Gaussian { mu, sigma2 } if mu.is_finite() && sigma2.is_finite() && sigma2 > 0.0 => {}
                Component::Bernoulli { p1 } if (0.0..=1.0).contains(&p1) => {}
                other => return Err(Error::InvalidParams(format!("invalid component {other:?}"))),
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("mixture specs serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn unit_gaussians(means: impl Iterator<Item = f64>) -> Vec<Component> {
    means.map(|mu| Component::Gaussian { mu, sigma2: 1.0 }).collect()
}

/// Equal-weight unit-variance pair with means `0` and `mu_star`.
pub fn spec_r2(mu_star: f64) -> Result<MixtureSpec> {
    if !(mu_star > 0.0 && mu_star.is_finite()) {
        return Err(Error::InvalidParams(format!("mean spacing must be positive, got {mu_star}")));
    }
    MixtureSpec::new(vec![0.5, 0.5], unit_gaussians([0.0, mu_star].into_iter()))
}

/// Seven equal-weight unit-variance components with means `0, mu_star, ..., 6 mu_star`.
pub fn spec_r7(mu_star: f64) -> Result<MixtureSpec> {
    if !(mu_star > 0.0 && mu_star.is_finite()) {
        return Err(Error::InvalidParams(format!("mean spacing must be positive, got {mu_star}")));
    }
    MixtureSpec::new(vec![1.0 / 7.0; 7], unit_gaussians((0..7).map(|k| k as f64 * mu_star)))
}

/// Standard normal draws by the Marsaglia polar method.
#[derive(Debug, Default)]
pub struct PolarNormal {
    spare: Option<f64>,
}

impl PolarNormal {
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * rng.gen::<f64>() - 1.0;
            let v = 2.0 * rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Draws `n` values; returns them with the 0-based component of each.
pub fn sample(spec: &MixtureSpec, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = PolarNormal::default();
    let mut cum = Vec::with_capacity(spec.weights.len());
    let mut acc = 0.0;
    for &w in &spec.weights {
        acc += w;
        cum.push(acc);
    }
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.gen::<f64>() * acc;
        let k = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
        let z = match spec.components[k] {
            Component::Gaussian { mu, sigma2 } => mu + sigma2.sqrt() * normal.sample(&mut rng),
            Component::Bernoulli { p1 } => f64::from(u8::from(rng.gen::<f64>() < p1)),
        };
        values.push(z);
        labels.push(k);
    }
    Ok((values, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SQRT3: f64 = 3.464_101_615_137_754_6;

    #[test]
    fn layouts() {
        let s = spec_r2(TWO_SQRT3).unwrap();
        assert_eq!(s.weights, vec![0.5, 0.5]);
        assert_eq!(s.components[1], Component::Gaussian { mu: TWO_SQRT3, sigma2: 1.0 });
        let s = spec_r7(TWO_SQRT3).unwrap();
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (k, c) in s.components.iter().enumerate() {
            assert_eq!(*c, Component::Gaussian { mu: k as f64 * TWO_SQRT3, sigma2: 1.0 });
        }
        assert!(spec_r2(0.0).is_err());
        assert!(spec_r7(-1.0).is_err());
    }

    #[test]
    fn standard_normal_mean() {
        let spec = MixtureSpec::new(vec![1.0], vec![Component::Gaussian { mu: 0.0, sigma2: 1.0 }]).unwrap();
        let (z, _) = sample(&spec, 10_000, 5).unwrap();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 4.0 / 100.0, "{mean}");
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
        assert!((var - 1.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn two_component_variance() {
        let (z, _) = sample(&spec_r2(TWO_SQRT3).unwrap(), 10_000, 1).unwrap();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
        assert!((var - 4.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn seeded_reproducibility() {
        let spec = spec_r7(2.0).unwrap();
        assert_eq!(sample(&spec, 500, 9).unwrap(), sample(&spec, 500, 9).unwrap());
        assert_ne!(sample(&spec, 500, 9).unwrap().0, sample(&spec, 500, 10).unwrap().0);
    }

    #[test]
    fn label_frequencies_within_binomial_bounds() {
        let spec = spec_r7(1.0).unwrap();
        let n = 20_000;
        let (_, labels) = sample(&spec, n, 2).unwrap();
        let p = 1.0 / 7.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for k in 0..7 {
            let c = labels.iter().filter(|&&l| l == k).count() as f64;
            assert!((c - n as f64 * p).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn bernoulli_samples_are_binary() {
        let spec = MixtureSpec::new(vec![1.0], vec![Component::Bernoulli { p1: 0.3 }]).unwrap();
        let (z, _) = sample(&spec, 1000, 0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn toml_round_trip() {
        let spec = spec_r7(1.5).unwrap();
        assert_eq!(MixtureSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        assert!(MixtureSpec::from_toml("weights = [0.5]\n[[components]]\nkind = \"gaussian\"\nmu = 0.0\nsigma2 = -1.0\n").is_err());
    }
}
