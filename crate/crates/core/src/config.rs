//! Flat key-value configuration files.
//!
//! ```toml
//! family = "gaussian"
//! n_init = 20
//! stop_em = 5
//! stop_r = 2
//! seed = 0
//! ```
//!
//! Every key is optional; missing keys keep their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cem::InnerMode;
use crate::error::{Error, Result};
use crate::family::{FamilyConfig, FamilyKind};
use crate::search::{InitScheme, SearchConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub family: Option<FamilyKind>,
    pub alpha: Option<f64>,
    pub lambda_cap: Option<f64>,
    pub sigma2_floor_scale: Option<f64>,
    pub allow_degenerate: Option<bool>,
    pub grouping_tolerance: Option<f64>,
    pub n_init: Option<usize>,
    pub stop_em: Option<usize>,
    pub stop_r: Option<usize>,
    pub r_start: Option<usize>,
    pub r_max_guard: Option<usize>,
    pub seed: Option<u64>,
    pub inner: Option<InnerMode>,
    pub max_iter: Option<usize>,
    pub init: Option<InitScheme>,
    pub polish_max_values: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn search_config(&self, mut base: SearchConfig) -> SearchConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { base.$f = v; } )* };
        }
        take!(n_init, stop_em, stop_r, r_start, r_max_guard, seed, inner, max_iter, init, polish_max_values);
        base
    }

    /// Family settings; `fallback` is used when the file names no family.
    pub fn family_config(&self, fallback: FamilyKind) -> FamilyConfig {
        let mut f = FamilyConfig::new(self.family.unwrap_or(fallback));
        if let Some(v) = self.alpha {
            f.alpha = v;
        }
        if let Some(v) = self.lambda_cap {
            f.lambda_cap = v;
        }
        if let Some(v) = self.sigma2_floor_scale {
            f.sigma2_floor_scale = v;
        }
        if let Some(v) = self.allow_degenerate {
            f.allow_degenerate = v;
        }
        f
    }
}
