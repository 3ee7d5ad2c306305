//! Experiment configuration, loaded from TOML and overridable from the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlation::EstimatorKind;
use crate::diffnet::check_grid;
use crate::error::{Error, Result};
use crate::jgl::{PenaltyParams, Weighting};
use crate::synthetic::SyntheticScenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    SynthSweep,
    Fit,
    Bootstrap,
    Fdr,
    Grid,
    Serve,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SynthSweep => "synth_sweep",
            Mode::Fit => "fit",
            Mode::Bootstrap => "bootstrap",
            Mode::Fdr => "fdr",
            Mode::Grid => "grid",
            Mode::Serve => "serve",
        }
    }
}

/// A synthetic scenario without its seed; seeds come from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub p: usize,
    pub m: usize,
    pub p_move: f64,
    #[serde(rename = "k", alias = "K")]
    pub n_conditions: usize,
    pub n_per_condition: usize,
    /// Sample every condition from one network (no true differences).
    #[serde(default)]
    pub null: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let d = SyntheticScenario::desk(0);
        ScenarioConfig {
            p: d.p,
            m: d.m,
            p_move: d.p_move,
            n_conditions: d.n_conditions,
            n_per_condition: d.n_per_condition,
            null: false,
        }
    }
}

impl ScenarioConfig {
    pub fn with_seed(&self, seed: u64) -> SyntheticScenario {
        SyntheticScenario {
            p: self.p,
            m: self.m,
            p_move: self.p_move,
            n_conditions: self.n_conditions,
            n_per_condition: self.n_per_condition,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub label: String,
    pub path: PathBuf,
}

impl InputFile {
    /// Parses `label=path`, or a bare path labelled by its file stem.
    pub fn parse(s: &str) -> Result<Self> {
        let (label, path) = match s.split_once('=') {
            Some((l, p)) => (l.trim().to_string(), PathBuf::from(p.trim())),
            None => {
                let path = PathBuf::from(s.trim());
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| Error::Config(format!("cannot derive a label from `{s}`")))?
                    .to_string();
                (stem, path)
            }
        };
        if label.is_empty() || path.as_os_str().is_empty() {
            return Err(Error::Config(format!("input `{s}` must look like label=path")));
        }
        Ok(InputFile { label, path })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub weighting: Weighting,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = PenaltyParams::default();
        SolverConfig {
            rho: d.rho,
            tol: d.tol,
            max_iters: d.max_iters,
            weighting: d.weighting,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_bootstraps: usize,
    /// Frequency cutoffs for the precision-recall curve against ground truth.
    pub cutoff_grid: Vec<f64>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_bootstraps: 100,
            cutoff_grid: (0..=100).map(|i| i as f64 / 100.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdrConfig {
    pub n_splits: usize,
}

impl Default for FdrConfig {
    fn default() -> Self {
        FdrConfig { n_splits: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Splits for the per-cell FDR estimate; 0 leaves `fdr_hat` empty.
    pub fdr_splits: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { fdr_splits: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
    /// Grid artifact to serve; defaults to `grid.json` in the output directory.
    pub artifact: Option<PathBuf>,
    /// Directory of a static web client served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            bind: "127.0.0.1:8080".into(),
            artifact: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub inputs: Vec<InputFile>,
    #[serde(default = "default_lambda1_grid")]
    pub lambda1_grid: Vec<f64>,
    #[serde(default = "default_lambda2_grid")]
    pub lambda2_grid: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub fdr: FdrConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub serve: ServeConfig,
}

fn default_lambda1_grid() -> Vec<f64> {
    vec![0.2, 0.4, 0.6]
}

fn default_lambda2_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    /// The desk-scale synthetic sweep.
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::default(),
            scenario: Some(ScenarioConfig::default()),
            inputs: Vec::new(),
            lambda1_grid: default_lambda1_grid(),
            lambda2_grid: default_lambda2_grid(),
            solver: SolverConfig::default(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
            estimator: EstimatorKind::default(),
            bootstrap: BootstrapConfig::default(),
            fdr: FdrConfig::default(),
            grid: GridConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

/// Command-line values that replace their config-file counterparts.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
    pub lambda1_grid: Option<Vec<f64>>,
    pub lambda2_grid: Option<Vec<f64>>,
    pub bind: Option<String>,
    pub inputs: Option<Vec<InputFile>>,
    pub artifact: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.mode {
            self.mode = v;
        }
        if let Some(v) = o.seeds {
            self.seeds = v;
        }
        if let Some(v) = o.output_dir {
            self.output_dir = v;
        }
        if let Some(v) = o.lambda1_grid {
            self.lambda1_grid = v;
        }
        if let Some(v) = o.lambda2_grid {
            self.lambda2_grid = v;
        }
        if let Some(v) = o.bind {
            self.serve.bind = v;
        }
        if let Some(v) = o.inputs {
            self.inputs = v;
        }
        if let Some(v) = o.artifact {
            self.serve.artifact = Some(v);
        }
        if let Some(v) = o.static_dir {
            self.serve.static_dir = Some(v);
        }
    }

    /// Solver settings at the given penalties.
    pub fn penalty(&self, lambda1: f64, lambda2: f64) -> PenaltyParams {
        PenaltyParams {
            lambda1,
            lambda2,
            rho: self.solver.rho,
            max_iters: self.solver.max_iters,
            tol: self.solver.tol,
            weighting: self.solver.weighting,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.mode == Mode::Serve {
            return Ok(());
        }
        check_grid(&self.lambda1_grid, 0.0, f64::MAX, "lambda1").map_err(cfg)?;
        check_grid(&self.lambda2_grid, 0.0, 1.0, "lambda2").map_err(cfg)?;
        self.penalty(self.lambda1_grid[0], 0.0).validate().map_err(cfg)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.scenario.is_none() && self.inputs.is_empty() {
            return Err(Error::Config("give a scenario or input files".into()));
        }
        if let Some(s) = &self.scenario {
            s.with_seed(0).validate().map_err(cfg)?;
        }
        if self.inputs.len() == 1 {
            return Err(Error::Config("need at least two input files".into()));
        }
        let mut labels: Vec<&str> = self.inputs.iter().map(|i| i.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("input labels must be unique".into()));
        }
        match self.mode {
            Mode::SynthSweep if self.scenario.is_none() => {
                Err(Error::Config("synth_sweep needs a scenario".into()))
            }
            Mode::Bootstrap if self.bootstrap.n_bootstraps == 0 => {
                Err(Error::Config("bootstrap.n_bootstraps must be positive".into()))
            }
            Mode::Bootstrap => check_grid(&self.bootstrap.cutoff_grid, 0.0, f64::MAX, "cutoff").map_err(cfg),
            Mode::Fdr if self.fdr.n_splits == 0 => Err(Error::Config("fdr.n_splits must be positive".into())),
            _ => Ok(()),
        }
    }

    /// SHA-256 over the settings that determine artifact contents. Output
    /// location and serving options are left out.
    pub fn hash(&self) -> String {
        let mut view = self.clone();
        view.output_dir = PathBuf::new();
        view.serve = ServeConfig::default();
        view.mode = Mode::default();
        let json = serde_json::to_vec(&view).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
