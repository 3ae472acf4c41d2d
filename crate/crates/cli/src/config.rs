//! Experiment configuration: defaults, then a TOML or JSON file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use ldpgamma_core::learners::{Task, TaskConfig, DEFAULT_C0};
use ldpgamma_core::ldp::RandomizerKind;
use serde::{Deserialize, Serialize};

/// What a simulation asks of the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Learn,
    Refute,
}

/// Which matrix of a class the norm commands act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// `W`, one row per concept.
    Concept,
    /// `D`, one row per ordered pair of concepts.
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskArg {
    Agnostic,
    Realizable,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Agnostic => Task::Agnostic,
            TaskArg::Realizable => Task::Realizable,
        }
    }
}

/// Every effective setting of a run. Echoed into each artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Zoo spec such as `thresholds:8`, or a path to a class JSON file.
    pub class: String,
    pub task: TaskArg,
    pub mode: Mode,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub theta: f64,
    /// Sample size; the formula is used when absent.
    pub n: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub randomizer: String,
    pub c0: f64,
    pub out: Option<PathBuf>,
    /// Concept labeling generated data; uniformly random labels when absent.
    pub target: Option<String>,
    /// Probability of flipping each generated label.
    pub label_noise: f64,
    /// Distribution JSON; overrides `target`.
    pub distribution: Option<PathBuf>,
    /// Dataset CSV with columns `point,label`; simulate only.
    pub data: Option<PathBuf>,
    /// Matrix JSON for `gamma2` and `audit`, in place of the class.
    pub matrix: Option<PathBuf>,
    pub matrix_kind: MatrixKind,
    pub transcript: Option<PathBuf>,
    pub answers: Option<PathBuf>,
    /// Sweep grid; an empty list means the scalar setting.
    pub epsilons: Vec<f64>,
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    /// Fill `runtime_ms`; off by default so reruns stay byte-identical.
    pub record_runtime: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            class: "thresholds:4".into(),
            task: TaskArg::Agnostic,
            mode: Mode::Learn,
            alpha: 0.1,
            beta: 0.1,
            epsilon: 1.0,
            theta: 0.0,
            n: None,
            trials: 1,
            seed: 0,
            randomizer: RandomizerKind::CoordRr.name().into(),
            c0: DEFAULT_C0,
            out: None,
            target: None,
            label_noise: 0.0,
            distribution: None,
            data: None,
            matrix: None,
            matrix_kind: MatrixKind::Concept,
            transcript: None,
            answers: None,
            epsilons: Vec::new(),
            alphas: Vec::new(),
            ns: Vec::new(),
            record_runtime: false,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; `.json` is parsed as JSON, anything else as TOML.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))
        }
    }

    pub fn randomizer_kind(&self) -> Result<RandomizerKind> {
        Ok(RandomizerKind::parse(&self.randomizer)?)
    }

    pub fn task_config(&self) -> Result<TaskConfig> {
        self.task_config_at(self.alpha, self.epsilon)
    }

    /// The task settings with `alpha` and `epsilon` replaced, for grid points.
    pub fn task_config_at(&self, alpha: f64, epsilon: f64) -> Result<TaskConfig> {
        let mut cfg = TaskConfig::new(alpha, self.beta, epsilon).with_theta(self.theta);
        cfg.c0 = self.c0;
        cfg.randomizer = self.randomizer_kind()?;
        cfg.validate(self.task.into())?;
        Ok(cfg)
    }

    /// Checks the settings every command shares.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.n == Some(0) || self.ns.contains(&0) {
            bail!("sample size must be at least 1");
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            bail!("label_noise must lie in [0, 1/2], got {}", self.label_noise);
        }
        self.randomizer_kind()?;
        Ok(())
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML or JSON file with any of the settings below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Zoo spec (thresholds:N, points:N, parities:K, conjunctions:K, negation-closure(..)) or class JSON path.
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// coord-rr or laplace-l1.
    #[arg(long)]
    pub randomizer: Option<String>,
    #[arg(long)]
    pub c0: Option<f64>,
    /// Output file; JSON goes to standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub label_noise: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub distribution: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub matrix_kind: Option<MatrixKind>,
    /// Transcript CSV destination (simulate).
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    /// Answers JSON destination (simulate).
    #[arg(long, value_name = "FILE")]
    pub answers: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub record_runtime: bool,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = v;
        })*
    };
}

macro_rules! overlay_opt {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if $args.$field.is_some() {
            $cfg.$field = $args.$field.clone();
        })*
    };
}

impl CommonArgs {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let args = self;
        overlay!(
            cfg, args, class, task, mode, alpha, beta, epsilon, theta, trials, seed, randomizer, c0, label_noise,
            matrix_kind, epsilons, alphas, ns
        );
        overlay_opt!(cfg, args, n, out, target, distribution, data, matrix, transcript, answers);
        if self.record_runtime {
            cfg.record_runtime = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "alpha = 0.2\nclass = \"points:3\"\ntrials = 5\n").unwrap();
        let args = CommonArgs { config: Some(path), alpha: Some(0.3), ..Default::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.alpha, cfg.class.as_str(), cfg.trials), (0.3, "points:3", 5));
    }

    #[test]
    fn json_config_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"epsilons": [0.5, 1.0], "task": "realizable"}"#).unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.epsilons, vec![0.5, 1.0]);
        assert_eq!(cfg.task, TaskArg::Realizable);
    }

    #[test]
    fn unknown_keys_and_zero_trials_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("alpah = 0.1").is_err());
        let args = CommonArgs { trials: Some(0), ..Default::default() };
        assert!(args.resolve().is_err());
        let args = CommonArgs { randomizer: Some("noise-free".into()), ..Default::default() };
        assert!(args.resolve().is_err());
    }
}
