use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sphere_ot::fields::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GeometryCheck,
    EntropyVerify,
    Talagrand,
    Lichnerowicz,
    W1Green,
    JacobiCheck,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::GeometryCheck => "geometry-check",
            Command::EntropyVerify => "entropy-verify",
            Command::Talagrand => "talagrand",
            Command::Lichnerowicz => "lichnerowicz",
            Command::W1Green => "w1-green",
            Command::JacobiCheck => "jacobi-check",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Everything one run needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub grid: Option<GridSpec>,
    pub dim: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub epsilon_list: Vec<f64>,
    pub tau_list: Vec<f64>,
    /// random pairs for geometry-check and w1-green
    pub samples: usize,
    pub psi_lmax: usize,
    pub psi_amplitude: f64,
    pub u_lmax: usize,
    pub u_amplitude: f64,
    pub psi_path: Option<PathBuf>,
    pub u_path: Option<PathBuf>,
    pub mu_path: Option<PathBuf>,
    pub nu_path: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            grid: None,
            dim: 2,
            seed: 0,
            tolerances: BTreeMap::new(),
            epsilon_list: Vec::new(),
            tau_list: Vec::new(),
            samples: 0,
            psi_lmax: 4,
            psi_amplitude: 1.0,
            u_lmax: 3,
            u_amplitude: 0.3,
            psi_path: None,
            u_path: None,
            mu_path: None,
            nu_path: None,
            output: None,
            format: Format::Json,
        }
    }
}

pub const DEFAULT_TOLERANCES: [(&str, f64); 9] = [
    ("geometry", 1e-10),
    ("hessian", 1e-10),
    ("entropy", 1e-3),
    ("split", 1e-10),
    ("talagrand", 1e-6),
    ("lichnerowicz", 0.05),
    ("sum-rule", 0.01),
    ("duality", 1e-3),
    ("jacobi", 1e-8),
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<sphere_ot::Error> for ConfigError {
    fn from(e: sphere_ot::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = read_json(path)?;
        // relative input paths are taken from the config's directory
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.psi_path, &mut cfg.u_path, &mut cfg.mu_path, &mut cfg.nu_path].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances
            .get(key)
            .copied()
            .or_else(|| DEFAULT_TOLERANCES.iter().find(|(k, _)| *k == key).map(|(_, v)| *v))
            .expect("every tolerance key has a default")
    }

    pub fn grid_or(&self, n_colat: usize, n_lon: usize) -> GridSpec {
        self.grid.unwrap_or(match self.dim {
            2 => GridSpec::gauss_legendre(n_colat, n_lon),
            _ => GridSpec::gauss_legendre_s3(n_colat / 4, n_lon / 4),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=3).contains(&self.dim) {
            return Err(ConfigError(format!("dimension {} is not supported (2 or 3)", self.dim)));
        }
        for (k, v) in &self.tolerances {
            if !DEFAULT_TOLERANCES.iter().any(|(d, _)| d == k) {
                return Err(ConfigError(format!("unknown tolerance '{k}'")));
            }
            if !(*v > 0.0 && v.is_finite()) {
                return Err(ConfigError(format!("tolerance '{k}' must be positive, got {v}")));
            }
        }
        if let Some(g) = &self.grid {
            if g.dim != self.dim {
                return Err(ConfigError(format!("grid is for S^{} but dim is {}", g.dim, self.dim)));
            }
            g.validate()?;
        }
        for e in &self.epsilon_list {
            if !(*e > 0.0 && e.is_finite()) {
                return Err(ConfigError(format!("epsilon {e} must be positive")));
            }
        }
        for t in &self.tau_list {
            if !(*t > 0.0 && t.is_finite()) {
                return Err(ConfigError(format!("tau {t} must be positive")));
            }
        }
        if self.psi_amplitude < 0.0 || self.u_amplitude < 0.0 {
            return Err(ConfigError("field amplitudes must be non-negative".into()));
        }
        for p in [&self.psi_path, &self.u_path, &self.mu_path, &self.nu_path].into_iter().flatten() {
            if !p.exists() {
                return Err(ConfigError(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
