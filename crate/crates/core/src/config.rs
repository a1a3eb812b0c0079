//! Experiment configuration, read from TOML (or JSON by extension).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::{CellNumerics, ReactionScheme};
use crate::error::{KppError, Result};
use crate::frontsim::{FrontNumerics, PlanOptions, DEFAULT_BOUNDARY_THRESHOLD, DEFAULT_NODE_BUDGET, DEFAULT_STRIDE};
use crate::profiles::{self, InitialData};
use crate::reaction::{self, Nonlinearity, TableReaction};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionConfig {
    Fisher,
    PeriodicFisher {
        amplitude: f64,
        #[serde(default = "one")]
        period: f64,
    },
    /// Long-format CSV with columns `x,u,f`.
    Table {
        path: PathBuf,
        period: f64,
    },
}

impl ReactionConfig {
    /// Relative table paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Nonlinearity> {
        match self {
            ReactionConfig::Fisher => Ok(reaction::make_fisher()),
            ReactionConfig::PeriodicFisher { amplitude, period } => reaction::make_periodic_fisher(*amplitude, *period),
            ReactionConfig::Table { path, period } => Ok(Nonlinearity::from_table(TableReaction::from_csv(
                &base.join(path),
                *period,
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Algebraic {
        alpha: f64,
        #[serde(default = "one")]
        plateau: f64,
    },
    Stretched {
        beta: f64,
        #[serde(default = "one")]
        plateau: f64,
    },
    LogAlgebraic {
        alpha: f64,
        gamma: f64,
        #[serde(default = "one")]
        plateau: f64,
    },
    Constant {
        value: f64,
    },
    /// CSV with columns `x,u0`.
    Table {
        path: PathBuf,
    },
}

impl ProfileConfig {
    pub fn build(&self, base: &Path) -> Result<InitialData> {
        match self {
            ProfileConfig::Algebraic { alpha, plateau } => profiles::make_algebraic(*alpha, *plateau),
            ProfileConfig::Stretched { beta, plateau } => profiles::make_stretched(*beta, *plateau),
            ProfileConfig::LogAlgebraic { alpha, gamma, plateau } => {
                profiles::make_log_algebraic(*alpha, *gamma, *plateau)
            }
            ProfileConfig::Constant { value } => profiles::make_constant(*value),
            ProfileConfig::Table { path } => profiles::load_table(&base.join(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Cell grid size `N`.
    pub cell_nodes: usize,
    /// Grid size for the stand-alone eigenvalue.
    pub eigen_nodes: usize,
    pub dt: f64,
    /// Line spacing; defaults to 0.25 for homogeneous and `L/32` for periodic reactions.
    pub dx: Option<f64>,
    pub stride: usize,
    pub x_left: f64,
    /// Overrides the planned right end.
    pub x_right: Option<f64>,
    pub safety: f64,
    pub node_budget: usize,
    pub boundary_threshold: f64,
    pub mean_tol: f64,
    /// Start level `1/n` of the global solution.
    pub global_n: f64,
    pub global_t_max: f64,
    pub scheme: ReactionScheme,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            cell_nodes: 64,
            eigen_nodes: crate::spectral::DEFAULT_NODES,
            dt: 1e-3,
            dx: None,
            stride: DEFAULT_STRIDE,
            x_left: crate::frontsim::DEFAULT_X_LEFT,
            x_right: None,
            safety: crate::frontsim::DEFAULT_SAFETY,
            node_budget: DEFAULT_NODE_BUDGET,
            boundary_threshold: DEFAULT_BOUNDARY_THRESHOLD,
            mean_tol: crate::cell::DEFAULT_MEAN_TOL,
            global_n: 1e8,
            global_t_max: 15.0,
            scheme: ReactionScheme::Rk4,
        }
    }
}

impl NumericsConfig {
    pub fn cell(&self) -> CellNumerics {
        CellNumerics {
            nodes: self.cell_nodes,
            dt: self.dt,
            stride: 1,
            scheme: self.scheme,
        }
    }

    pub fn front(&self) -> FrontNumerics {
        FrontNumerics {
            dt: self.dt,
            stride: self.stride,
            boundary_threshold: self.boundary_threshold,
            scheme: self.scheme,
        }
    }

    pub fn dx_for(&self, f: &Nonlinearity) -> f64 {
        self.dx.unwrap_or(if f.is_homogeneous() {
            crate::frontsim::DEFAULT_DX
        } else {
            f.period() / 32.0
        })
    }

    pub fn plan(&self, f: &Nonlinearity) -> PlanOptions {
        PlanOptions {
            safety: self.safety,
            dx: self.dx_for(f),
            x_left: self.x_left,
            node_budget: self.node_budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    HomLevelsets,
    MeanLevelsets,
    Flatness,
    BmtRate,
    RatioLimit,
    Globalsol,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::HomLevelsets => "hom_levelsets",
            ExperimentKind::MeanLevelsets => "mean_levelsets",
            ExperimentKind::Flatness => "flatness",
            ExperimentKind::BmtRate => "bmt_rate",
            ExperimentKind::RatioLimit => "ratio_limit",
            ExperimentKind::Globalsol => "globalsol",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Horizon,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_levels() -> Vec<f64> {
    vec![0.5]
}

fn default_eps() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub reaction: ReactionConfig,
    pub initial_data: Option<ProfileConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    /// Main horizon `T`.
    pub horizon: Option<f64>,
    /// Horizons for rate fits, ratio sequences and flatness pairs.
    #[serde(default)]
    pub horizons: Vec<f64>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Ratio or rate tolerance; experiment-specific default when absent.
    pub tolerance: Option<f64>,
    /// Flatness cells `n_lo..=n_hi`.
    pub cells: Option<(i64, i64)>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub sweep: Option<SweepConfig>,
    /// Directory relative paths resolve against (the config file's directory).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| KppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| KppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KppError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KppError::Config(msg));
        if let Some(t) = self.horizon {
            if !(t > 0.0) {
                return bad(format!("horizon must be positive, got {t}"));
            }
        }
        if let Some(t) = self.horizons.iter().find(|t| !(**t > 0.0)) {
            return bad(format!("horizons must be positive, got {t}"));
        }
        if let Some(m) = self.levels.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return bad(format!("levels must lie in (0, 1), got {m}"));
        }
        let n = &self.numerics;
        if !(n.dt > 0.0) || n.stride == 0 || n.cell_nodes < 8 || n.eigen_nodes < 8 {
            return bad("numerics need dt > 0, stride >= 1, cell_nodes >= 8 and eigen_nodes >= 8".into());
        }
        if n.dx.is_some_and(|dx| !(dx > 0.0)) {
            return bad("dx must be positive".into());
        }
        let needs_profile = matches!(
            self.experiment,
            ExperimentKind::Simulate
                | ExperimentKind::HomLevelsets
                | ExperimentKind::MeanLevelsets
                | ExperimentKind::Flatness
        );
        if needs_profile && self.initial_data.is_none() {
            return bad(format!("experiment {} needs [initial_data]", self.experiment.name()));
        }
        let needs_horizon = matches!(
            self.experiment,
            ExperimentKind::Simulate | ExperimentKind::HomLevelsets | ExperimentKind::MeanLevelsets
        );
        if needs_horizon && self.horizon.is_none() {
            return bad(format!("experiment {} needs horizon", self.experiment.name()));
        }
        let needs_horizons = match self.experiment {
            ExperimentKind::BmtRate => 3,
            ExperimentKind::RatioLimit => 1,
            ExperimentKind::Flatness => 2,
            _ => 0,
        };
        if self.horizons.len() < needs_horizons {
            return bad(format!(
                "experiment {} needs at least {needs_horizons} horizons",
                self.experiment.name()
            ));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep values are empty".into());
            }
        }
        Ok(())
    }

    pub fn build_reaction(&self) -> Result<Nonlinearity> {
        self.reaction.build(&self.base_dir)
    }

    pub fn build_profile(&self) -> Result<InitialData> {
        match &self.initial_data {
            Some(p) => p.build(&self.base_dir),
            None => Err(KppError::Config("missing [initial_data]".into())),
        }
    }
}
