use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Gaussian-mixture groups with random feature weights.
    Synthetic,
    /// Two groups split out of a CSV table.
    Real,
    /// Point mass against a huge uniform support with a random cross table.
    Adversarial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub weights: u64,
    pub data: u64,
    pub trials: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            weights: seed,
            data: seed,
            trials: seed,
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::all(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// JSON table schema, see `xgroup_core::ingest::TableSchema`.
    pub schema: PathBuf,
    pub group_column: String,
    /// Rows whose group column takes one of these values form group 0.
    pub first_group: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub deltas: Vec<f64>,
    pub epsilon: f64,
    pub rho: f64,
    pub u_var: f64,
    pub dim: usize,
    pub components: usize,
    pub n_trials: usize,
    pub seeds: Seeds,
    pub out: PathBuf,
    pub repeats: usize,
    /// Fixed per-group sample size instead of the budget implied by delta.
    pub samples: Option<usize>,
    /// Largest eager simple table; beyond it the simple learner runs lazily.
    pub materialize_limit: u64,
    pub parallel: bool,
    /// Support size of the uniform group in adversarial mode.
    pub support: usize,
    /// Outer draws of the rare-probability estimate.
    pub rare_outer: usize,
    /// Inner draws per unit of `1/delta`.
    pub rare_inner_factor: f64,
    pub dataset: Option<DatasetConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Synthetic,
            deltas: vec![0.1, 0.01, 0.001],
            epsilon: 0.1,
            rho: 12.0,
            u_var: 2.0,
            dim: 20,
            components: 16,
            n_trials: 1000,
            seeds: Seeds::default(),
            out: PathBuf::from("results"),
            repeats: 1,
            samples: None,
            materialize_limit: 10_000_000,
            parallel: false,
            support: 1_000_000,
            rare_outer: 200,
            rare_inner_factor: 50.0,
            dataset: None,
        }
    }
}

fn open_unit(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be a finite value > 0, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> CliResult<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be >= 1")))
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.deltas.is_empty() {
            return Err(CliError::Config("delta grid is empty".into()));
        }
        for d in &self.deltas {
            open_unit("delta", *d)?;
        }
        open_unit("epsilon", self.epsilon)?;
        positive("rho", self.rho)?;
        positive("u_var", self.u_var)?;
        positive("rare_inner_factor", self.rare_inner_factor)?;
        if self.rare_inner_factor < 10.0 {
            return Err(CliError::Config(format!(
                "rare_inner_factor must be >= 10, got {}",
                self.rare_inner_factor
            )));
        }
        at_least_one("dim", self.dim)?;
        at_least_one("components", self.components)?;
        at_least_one("n_trials", self.n_trials)?;
        at_least_one("repeats", self.repeats)?;
        at_least_one("rare_outer", self.rare_outer)?;
        if let Some(n) = self.samples {
            at_least_one("samples", n)?;
        }
        match self.mode {
            Mode::Real if self.dataset.is_none() => {
                return Err(CliError::Config("real mode needs a dataset section".into()));
            }
            Mode::Real => {
                let ds = self.dataset.as_ref().expect("checked above");
                if ds.first_group.is_empty() {
                    return Err(CliError::Config("dataset.first_group is empty".into()));
                }
            }
            Mode::Adversarial if self.support < 2 => {
                return Err(CliError::Config("support must be >= 2".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Per-group sample size at `delta`.
    pub fn sample_size(&self, delta: f64) -> CliResult<usize> {
        match self.samples {
            Some(n) => Ok(n),
            None => Ok(xgroup_core::sample_budget(delta)?),
        }
    }

    pub fn rare_inner(&self, delta: f64) -> usize {
        (self.rare_inner_factor / delta).ceil() as usize
    }
}
