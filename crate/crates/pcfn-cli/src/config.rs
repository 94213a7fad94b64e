//! Run configuration: an optional TOML file with strictly validated keys,
//! overridden by command-line flags, resolved to concrete values before any
//! work starts, and archived verbatim in the run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// On-disk schema; unknown keys anywhere are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    precision: Option<Precision>,
    #[serde(default)]
    data: FileData,
    #[serde(default)]
    model: FileModel,
    #[serde(default)]
    train: FileTrain,
    #[serde(default)]
    eval: FileEval,
    #[serde(default)]
    grid: FileGrid,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileData {
    n_points: Option<usize>,
    radii: Option<Vec<f64>>,
    clouds_per_radius: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    global_feature: Option<usize>,
    input_dim: Option<usize>,
    n_cfd: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTrain {
    batch_size: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEval {
    stencil_k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileGrid {
    global_features: Option<Vec<usize>>,
    batch_sizes: Option<Vec<usize>>,
    epochs: Option<usize>,
    memory_budget_mb: Option<u64>,
}

/// Command-line overrides shared by every command; flags beat file values.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct CommonArgs {
    /// Structured config file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directory holding manifest.toml.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Run directory for all outputs.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Points per cloud.
    #[arg(long, value_name = "N")]
    pub points: Option<usize>,
    #[arg(long = "global-feature", value_name = "G")]
    pub global_feature: Option<usize>,
    #[arg(long = "batch-size", value_name = "B")]
    pub batch_size: Option<usize>,
    #[arg(long, value_name = "E")]
    pub epochs: Option<usize>,
    #[arg(long, value_name = "F")]
    pub lr: Option<f64>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    #[arg(long = "stencil-k", value_name = "K")]
    pub stencil_k: Option<usize>,
}

/// Fully resolved configuration, archived as `config.resolved`.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub precision: Precision,
    pub data: ResolvedData,
    pub model: ResolvedModel,
    pub train: ResolvedTrain,
    pub eval: ResolvedEval,
    pub grid: ResolvedGrid,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedData {
    pub n_points: usize,
    pub radii: Vec<f64>,
    pub clouds_per_radius: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedModel {
    pub global_feature: usize,
    pub input_dim: usize,
    pub n_cfd: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedTrain {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedEval {
    pub stencil_k: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedGrid {
    pub global_features: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub epochs: usize,
    pub memory_budget_mb: Option<u64>,
}

fn default_radii() -> Vec<f64> {
    (0..9).map(|i| 0.4 + 0.1 * i as f64).collect()
}

impl Resolved {
    /// defaults < config file < command-line flags.
    pub fn from_sources(args: &CommonArgs) -> Result<Self, CliError> {
        let file: FileConfig = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let resolved = Self {
            seed: args.seed.or(file.seed).unwrap_or(0),
            precision: args
                .precision
                .or(file.precision)
                .unwrap_or(Precision::F64),
            data: ResolvedData {
                n_points: args.points.or(file.data.n_points).unwrap_or(256),
                radii: file.data.radii.unwrap_or_else(default_radii),
                clouds_per_radius: file.data.clouds_per_radius.unwrap_or(4),
            },
            model: ResolvedModel {
                global_feature: args
                    .global_feature
                    .or(file.model.global_feature)
                    .unwrap_or(128),
                input_dim: file.model.input_dim.unwrap_or(2),
                n_cfd: file.model.n_cfd.unwrap_or(3),
            },
            train: ResolvedTrain {
                batch_size: args.batch_size.or(file.train.batch_size).unwrap_or(8),
                epochs: args.epochs.or(file.train.epochs).unwrap_or(500),
                learning_rate: args.lr.or(file.train.learning_rate).unwrap_or(5e-4),
            },
            eval: ResolvedEval {
                stencil_k: args.stencil_k.or(file.eval.stencil_k).unwrap_or(12),
            },
            grid: ResolvedGrid {
                global_features: file
                    .grid
                    .global_features
                    .unwrap_or_else(|| vec![64, 128, 256]),
                batch_sizes: file.grid.batch_sizes.unwrap_or_else(|| vec![4, 8]),
                epochs: args.epochs.or(file.grid.epochs).unwrap_or(60),
                memory_budget_mb: file.grid.memory_budget_mb,
            },
        };
        resolved.validate()?;
        Ok(resolved)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.data.n_points == 0 {
            return Err(CliError::Config("points must be >= 1".into()));
        }
        if self.data.radii.is_empty() || self.data.radii.iter().any(|&r| !(r > 0.0)) {
            return Err(CliError::Config("radii must be positive".into()));
        }
        if self.train.batch_size < 2 {
            return Err(CliError::Config("batch-size must be >= 2".into()));
        }
        if !(self.train.learning_rate > 0.0) {
            return Err(CliError::Config("lr must be positive".into()));
        }
        if self.eval.stencil_k < 6 {
            return Err(CliError::Config("stencil-k must be >= 6".into()));
        }
        Ok(())
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))?;
        std::fs::write(dir.join("config.resolved"), text)?;
        Ok(())
    }
}
