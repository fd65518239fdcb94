//! Experiment configuration: CLI flags resolved against defaults, optionally
//! overridden by a JSON config file.

use phaselab_core::measure::OmegaSpec;
use phaselab_core::solver::SolveOptions;
use phaselab_core::{Error, MeasurementKind, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Which measurement kinds an experiment covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindChoice {
    Amplitude,
    Intensity,
    Both,
}

impl KindChoice {
    pub fn kinds(self) -> Vec<MeasurementKind> {
        match self {
            KindChoice::Amplitude => vec![MeasurementKind::Amplitude],
            KindChoice::Intensity => vec![MeasurementKind::Intensity],
            KindChoice::Both => vec![MeasurementKind::Amplitude, MeasurementKind::Intensity],
        }
    }
}

/// Corruption-fraction grid `start, start+step, ..., <= stop`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SGrid {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let s = self.start + k as f64 * self.step;
            if s > self.stop + 1e-12 {
                break;
            }
            out.push((s * 1e12).round() / 1e12);
            k += 1;
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.start)
            || !(0.0..=1.0).contains(&self.stop)
            || self.step <= 0.0
            || self.stop < self.start
        {
            return Err(Error::Domain(format!(
                "s grid must satisfy 0 <= start <= stop <= 1 with positive step, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Solver overrides accepted from config files.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iters: Option<usize>,
    pub step_init: Option<f64>,
    pub step_decay: Option<f64>,
    pub restarts: Option<usize>,
    pub tol_obj: Option<f64>,
    pub tol_step: Option<f64>,
}

impl SolverOverrides {
    pub fn apply(&self, base: SolveOptions) -> SolveOptions {
        SolveOptions {
            max_iters: self.max_iters.unwrap_or(base.max_iters),
            step_init: self.step_init.unwrap_or(base.step_init),
            step_decay: self.step_decay.unwrap_or(base.step_decay),
            restarts: self.restarts.unwrap_or(base.restarts),
            tol_obj: self.tol_obj.unwrap_or(base.tol_obj),
            tol_step: self.tol_step.unwrap_or(base.tol_step),
            seed: base.seed,
        }
    }
}

/// JSON config file; every field is optional and overrides the
/// corresponding flag.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kind: Option<KindChoice>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub s_grid: Option<SGrid>,
    pub seeds: Option<Vec<u64>>,
    pub noise: Option<OmegaSpec>,
    pub output_dir: Option<PathBuf>,
    pub quick: Option<bool>,
    pub deterministic: Option<bool>,
    pub solver: Option<SolverOverrides>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Domain(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Domain(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: KindChoice,
    pub n: usize,
    pub m: usize,
    pub s_grid: SGrid,
    pub seeds: Vec<u64>,
    pub noise: OmegaSpec,
    pub output_dir: Option<PathBuf>,
    pub quick: bool,
    pub deterministic: bool,
    pub solver: SolverOverrides,
}

impl ExperimentConfig {
    /// Desk-scale defaults: `n = 5`, `m = 500 n` (`100 n` under `--quick`),
    /// ten seeds, no dense noise, fractions `0.02..=0.40` in steps of 0.02.
    pub fn resolve(flags: Flags, file: Option<ConfigFile>) -> Result<Self> {
        let file = file.unwrap_or_default();
        let quick = file.quick.unwrap_or(flags.quick);
        let n = file.n.or(flags.n).unwrap_or(5);
        let m_default = if quick { 100 * n } else { 500 * n };
        let m = file.m.or(flags.m).unwrap_or(m_default);
        let s_grid = file.s_grid.unwrap_or(SGrid {
            start: flags.s_start.unwrap_or(0.02),
            stop: flags.s_stop.unwrap_or(0.40),
            step: flags.s_step.unwrap_or(0.02),
        });
        let seeds = file
            .seeds
            .or(flags.seeds)
            .unwrap_or_else(|| (0..10).collect());
        let cfg = ExperimentConfig {
            kind: file.kind.or(flags.kind).unwrap_or(KindChoice::Both),
            n,
            m,
            s_grid,
            seeds,
            noise: file.noise.or(flags.noise).unwrap_or(OmegaSpec::None),
            output_dir: file.output_dir.or(flags.out),
            quick,
            deterministic: file.deterministic.unwrap_or(flags.deterministic),
            solver: file.solver.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.s_grid.validate()?;
        if self.n < 1 || self.m < self.n {
            return Err(Error::Domain(format!(
                "need m >= n >= 1, got n={}, m={}",
                self.n, self.m
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Domain("at least one seed is required".to_string()));
        }
        Ok(())
    }
}

/// Raw flag values collected by the CLI before resolution.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub kind: Option<KindChoice>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub s_start: Option<f64>,
    pub s_stop: Option<f64>,
    pub s_step: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub noise: Option<OmegaSpec>,
    pub out: Option<PathBuf>,
    pub quick: bool,
    pub deterministic: bool,
}

/// Parses the `--noise` flag: `none`, `uniform:SIGMA` or `gaussian:SIGMA`.
pub fn parse_noise(text: &str) -> Result<OmegaSpec> {
    if text == "none" {
        return Ok(OmegaSpec::None);
    }
    let (name, value) = text
        .split_once(':')
        .ok_or_else(|| Error::Domain(format!("noise spec '{text}' is not none|uniform:S|gaussian:S")))?;
    let sigma: f64 = value
        .parse()
        .map_err(|_| Error::Domain(format!("invalid noise level '{value}'")))?;
    if sigma < 0.0 {
        return Err(Error::Domain("noise level must be nonnegative".to_string()));
    }
    match name {
        "uniform" => Ok(OmegaSpec::Uniform { sigma }),
        "gaussian" => Ok(OmegaSpec::Gaussian { sigma }),
        _ => Err(Error::Domain(format!("unknown noise kind '{name}'"))),
    }
}
