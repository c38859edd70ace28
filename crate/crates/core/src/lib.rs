//! Clustering by minimum mixing entropy.
//!
//! A sample is explained as a mixture of components from a parametric
//! family. The criterion charges the entropy of the class weights plus the
//! weighted cross entropy of each class against its best-fitting density, so
//! adding classes pays off only when the components are genuinely distinct.
//! Minimizing it over hard assignments selects the number of classes.
//!
//! ```
//! use mixent::{search, FamilyConfig, FamilyKind, SearchConfig, WeightedSample};
//!
//! let (raw, _) = mixent::synth::sample(&mixent::synth::spec_r2(10.0).unwrap(), 200, 4).unwrap();
//! let w = WeightedSample::ingest(&raw, 0.0).unwrap();
//! let family = FamilyConfig::new(FamilyKind::Gaussian).bind(&w).unwrap();
//! let fit = search(&w, &family, &SearchConfig { n_init: 4, ..SearchConfig::default() }).unwrap();
//! assert!(fit.r_n >= 2);
//! ```

pub mod cem;
pub mod config;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod family;
pub mod oracle;
pub mod sample;
pub mod search;
pub mod synth;

pub use cem::{c_step, e_step, m_step, run_cem, EngineOptions, Init, InnerMode, IterationTrace, ModelState};
pub use config::ConfigFile;
pub use entropy::{criterion_of_assignment, mixing_entropy, AssignmentScore, CriterionValue};
pub use error::{Error, Result};
pub use family::{Family, FamilyConfig, FamilyKind, Params};
pub use oracle::{binary_closed_form, brute_force_min, gaussian_split_test, BinarySolution, GaussianThresholdReport};
pub use sample::{decomposition_from_assignment, soft_from_hard, HardAssignment, ProbVector, SoftAssignment, WeightedSample};
pub use search::{search, FitResult, SearchConfig};
