//! Run configuration (TOML). Every section and key is optional; missing keys
//! take the defaults below. Unknown keys are rejected with their full path.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nelson_fk::grid::{GridConfig, GridSpec};
use nelson_fk::mc::{Execution, McConfig};
use nelson_fk::oracle::OracleConfig;
use nelson_fk::{Cutoff, ModelParams, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub model: ModelSection,
    pub grid: GridConfig,
    pub levy: LevySection,
    pub mc: McSection,
    pub oracle: OracleConfig,
    pub scan: ScanSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub m_p: f64,
    pub m_b: f64,
    pub g: f64,
    /// Number or `"inf"`.
    pub lambda: Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevySection {
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub seed: u64,
    pub t: Vec<f64>,
    pub xi: Vec<Vec2>,
    /// Cutoffs of a `sweep`, ascending; the last is the reference.
    pub lambdas: Vec<Cutoff>,
    /// Grid edge standing in for `Λ = ∞` when `grid.r_max` is unset.
    pub infinite_radius: f64,
    pub sequential: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: "default".into(),
            model: ModelSection::default(),
            grid: GridConfig {
                radial: 16,
                angular: 16,
                ..GridConfig::default()
            },
            levy: LevySection::default(),
            mc: McSection::default(),
            oracle: OracleConfig::default(),
            scan: ScanSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            m_p: 1.0,
            m_b: 1.0,
            g: 0.3,
            lambda: Cutoff::Finite(1.0),
        }
    }
}

impl Default for LevySection {
    fn default() -> Self {
        Self { eps: 1e-2 }
    }
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 1000,
            seed: 1,
            t: vec![1.0],
            xi: vec![[0.0, 0.0]],
            lambdas: vec![Cutoff::Finite(1.0), Cutoff::Finite(2.0), Cutoff::Finite(4.0), Cutoff::Infinite],
            infinite_radius: 16.0,
            sequential: false,
        }
    }
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0, 2.0, 4.0],
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e| ConfigError(format!("syntax: {e}")))?;
        let cfg: Self = serde_path_to_error::deserialize(toml::Value::Table(table))
            .map_err(|e| ConfigError(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| Err(ConfigError(format!("at `{key}`: {msg}")));
        self.params().map_err(|e| ConfigError(format!("at `model`: {e}")))?;
        if !(self.levy.eps > 0.0 && self.levy.eps.is_finite()) {
            return bad("levy.eps", "must be finite and > 0");
        }
        if self.mc.n_paths == 0 {
            return bad("mc.n_paths", "must be > 0");
        }
        if self.mc.t.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return bad("mc.t", "times must be finite and >= 0");
        }
        if self.mc.lambdas.windows(2).any(|w| w[1].as_f64() <= w[0].as_f64()) {
            return bad("mc.lambdas", "must be strictly ascending");
        }
        if self.scan.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("scan.lambdas", "must be finite and > 0");
        }
        Ok(())
    }

    pub fn params(&self) -> nelson_fk::Result<ModelParams> {
        let m = &self.model;
        if m.g == 0.0 {
            ModelParams::free_field(m.m_p, m.m_b, m.lambda)
        } else {
            ModelParams::new(m.m_p, m.m_b, m.g, m.lambda)
        }
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            n_paths: self.mc.n_paths,
            seed: self.mc.seed,
            eps: self.levy.eps,
            exec: if self.mc.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
        }
    }

    /// Momentum grid with panel breaks at every cutoff in `cutoffs`.
    pub fn grid_for(&self, cutoffs: &[Cutoff]) -> nelson_fk::Result<Arc<GridSpec>> {
        GridSpec::for_cutoffs(&self.grid, &self.params()?, cutoffs, self.mc.infinite_radius)
    }

    /// SHA-256 of the canonical JSON form (defaults filled in).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
