//! Experiment configuration: a key=value file merged with command-line
//! overrides, validated into an [`ExperimentConfig`] whose every field
//! (defaults included) is echoed into `summary.json`.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ExactGrowth,
    MeasurementAdaptive,
    MeasurementNonadaptive,
}

impl Mode {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "exact-growth" | "grow" => Ok(Mode::ExactGrowth),
            "measurement-adaptive" | "adaptive" => Ok(Mode::MeasurementAdaptive),
            "measurement-nonadaptive" | "nonadaptive" => Ok(Mode::MeasurementNonadaptive),
            other => bail!("unknown mode `{other}`"),
        }
    }

    pub fn is_measurement(self) -> bool {
        matches!(self, Mode::MeasurementAdaptive | Mode::MeasurementNonadaptive)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::ExactGrowth => "exact-growth",
            Mode::MeasurementAdaptive => "measurement-adaptive",
            Mode::MeasurementNonadaptive => "measurement-nonadaptive",
        };
        write!(f, "{name}")
    }
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub fixture: PathBuf,
    pub mode: Mode,
    pub seed: u64,
    /// Ansatz block count.
    pub k: usize,
    /// Maximum subspace size for growth runs.
    pub m_max: usize,
    /// Variance of the random parameter initialization.
    pub init_sigma2: f64,
    /// Central finite-difference step for the optimizer gradient.
    pub fd_step: f64,
    /// Objective-call budget per added state.
    pub max_calls: usize,
    /// Overlap-eigenvalue cutoff; defaults depend on the mode.
    pub cutoff: f64,
    /// Shots per measurement batch.
    pub batch: u64,
    /// Total shot budget for measurement runs.
    pub budget: u64,
    /// Sample count for the 2-sigma error bar.
    pub n_boot: usize,
    /// Monte Carlo sample count for the scheduler.
    pub mc_samples: usize,
    /// Checkpoint file required by measurement modes.
    pub checkpoint: Option<PathBuf>,
    /// Warn when any |S_ij| estimate exceeds this.
    pub max_overlap_warn: f64,
    /// Force both intrinsic sigmas to zero (noise-free trajectories).
    pub zero_noise: bool,
}

/// Raw settings before validation; every field optional so the config file
/// and the flags can each contribute.
#[derive(Clone, Debug, Default)]
pub struct ConfigOverlay {
    pub fixture: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub m_max: Option<usize>,
    pub init_sigma2: Option<f64>,
    pub fd_step: Option<f64>,
    pub max_calls: Option<usize>,
    pub cutoff: Option<f64>,
    pub batch: Option<u64>,
    pub budget: Option<u64>,
    pub n_boot: Option<usize>,
    pub mc_samples: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub max_overlap_warn: Option<f64>,
    pub zero_noise: Option<bool>,
}

impl ConfigOverlay {
    /// Parse a `key = value` file. `#` starts a comment; unknown keys are
    /// rejected so typos surface immediately.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut overlay = ConfigOverlay::default();
        for (line_no, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", line_no + 1))?;
            overlay
                .set(key.trim(), value.trim())
                .with_context(|| format!("line {}", line_no + 1))?;
        }
        Ok(overlay)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "fixture" => self.fixture = Some(PathBuf::from(value)),
            "mode" => self.mode = Some(Mode::parse(value)?),
            "seed" => self.seed = Some(value.parse().context("seed")?),
            "k" => self.k = Some(value.parse().context("k")?),
            "m_max" => self.m_max = Some(value.parse().context("m_max")?),
            "init_sigma2" => self.init_sigma2 = Some(value.parse().context("init_sigma2")?),
            "fd_step" => self.fd_step = Some(value.parse().context("fd_step")?),
            "max_calls" => self.max_calls = Some(value.parse().context("max_calls")?),
            "cutoff" => self.cutoff = Some(value.parse().context("cutoff")?),
            "batch" => self.batch = Some(value.parse().context("batch")?),
            "budget" => self.budget = Some(value.parse().context("budget")?),
            "n_boot" => self.n_boot = Some(value.parse().context("n_boot")?),
            "mc_samples" => self.mc_samples = Some(value.parse().context("mc_samples")?),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "max_overlap_warn" => {
                self.max_overlap_warn = Some(value.parse().context("max_overlap_warn")?)
            }
            "zero_noise" => self.zero_noise = Some(value.parse().context("zero_noise")?),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Apply `self` on top of `base` (set fields win).
    pub fn over(self, base: ConfigOverlay) -> ConfigOverlay {
        ConfigOverlay {
            fixture: self.fixture.or(base.fixture),
            mode: self.mode.or(base.mode),
            seed: self.seed.or(base.seed),
            k: self.k.or(base.k),
            m_max: self.m_max.or(base.m_max),
            init_sigma2: self.init_sigma2.or(base.init_sigma2),
            fd_step: self.fd_step.or(base.fd_step),
            max_calls: self.max_calls.or(base.max_calls),
            cutoff: self.cutoff.or(base.cutoff),
            batch: self.batch.or(base.batch),
            budget: self.budget.or(base.budget),
            n_boot: self.n_boot.or(base.n_boot),
            mc_samples: self.mc_samples.or(base.mc_samples),
            checkpoint: self.checkpoint.or(base.checkpoint),
            max_overlap_warn: self.max_overlap_warn.or(base.max_overlap_warn),
            zero_noise: self.zero_noise.or(base.zero_noise),
        }
    }

    /// Validate and fill defaults. The cutoff default is mode-dependent:
    /// exact solves use 1e-8, noise-sampled solves the looser 1e-6.
    pub fn finalize(self) -> Result<ExperimentConfig> {
        let mode = self.mode.unwrap_or(Mode::ExactGrowth);
        let fixture = self
            .fixture
            .ok_or_else(|| anyhow!("missing required field `fixture`"))?;
        let seed = self
            .seed
            .ok_or_else(|| anyhow!("missing required field `seed`"))?;
        let cutoff = self.cutoff.unwrap_or(if mode.is_measurement() {
            1e-6
        } else {
            1e-8
        });
        let config = ExperimentConfig {
            fixture,
            mode,
            seed,
            k: self.k.unwrap_or(1),
            m_max: self.m_max.unwrap_or(1),
            init_sigma2: self.init_sigma2.unwrap_or(1e-4),
            fd_step: self.fd_step.unwrap_or(1e-6),
            max_calls: self.max_calls.unwrap_or(5000),
            cutoff,
            batch: self.batch.unwrap_or(100_000),
            budget: self.budget.unwrap_or(100_000_000),
            n_boot: self.n_boot.unwrap_or(200),
            mc_samples: self.mc_samples.unwrap_or(200),
            checkpoint: self.checkpoint,
            max_overlap_warn: self.max_overlap_warn.unwrap_or(0.99),
            zero_noise: self.zero_noise.unwrap_or(false),
        };
        for (name, positive) in [
            ("k", config.k > 0),
            ("m_max", config.m_max > 0),
            ("max_calls", config.max_calls > 0),
            ("n_boot", config.n_boot > 1),
            ("mc_samples", config.mc_samples > 1),
        ] {
            if !positive {
                bail!("field `{name}` must be positive");
            }
        }
        if !(config.init_sigma2 > 0.0) {
            bail!("field `init_sigma2` must be positive");
        }
        if !(config.fd_step > 0.0) {
            bail!("field `fd_step` must be positive");
        }
        if !(config.cutoff > 0.0) {
            bail!("field `cutoff` must be positive");
        }
        if config.batch == 0 {
            bail!("field `batch` must be positive");
        }
        if config.mode.is_measurement() {
            if config.checkpoint.is_none() {
                bail!("missing required field `checkpoint` (measurement modes replay a states checkpoint)");
            }
            if config.budget == 0 {
                bail!("field `budget` must be positive");
            }
        }
        Ok(config)
    }
}
