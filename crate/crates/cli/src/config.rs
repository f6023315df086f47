//! Run configuration: an optional TOML or JSON file merged with command line
//! flags, flags taking precedence.

use std::path::{Path, PathBuf};

use cauchy_source::experiments::{MultiConfig, SweepConfig, ThetaMode};
use cauchy_source::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Vtk,
}

/// Either a number or the keyword `scheduled`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ThetaSetting {
    Value(f64),
    Keyword(String),
}

impl ThetaSetting {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("scheduled") {
            return Ok(ThetaSetting::Keyword("scheduled".into()));
        }
        s.parse::<f64>()
            .map(ThetaSetting::Value)
            .map_err(|_| format!("expected a number or 'scheduled', got {s:?}"))
    }

    fn resolve(&self) -> Result<ThetaMode> {
        match self {
            ThetaSetting::Value(v) => Ok(ThetaMode::Fixed(*v)),
            ThetaSetting::Keyword(k) if k.eq_ignore_ascii_case("scheduled") => Ok(ThetaMode::Scheduled),
            ThetaSetting::Keyword(k) => Err(Error::InvalidArgument(format!(
                "theta must be a number or \"scheduled\", got {k:?}"
            ))),
        }
    }
}

/// Settings for `run`; every field is optional so that a file and the flags
/// can be layered.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub example: Option<u8>,
    pub levels: Option<Vec<usize>>,
    pub fine_level: Option<usize>,
    pub level: Option<usize>,
    pub measurements: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub theta: Option<ThetaSetting>,
    pub rho_coeff: Option<f64>,
    pub tau1_coeff: Option<f64>,
    pub tau2_coeff: Option<f64>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Vec<Format>>,
}

impl RunSettings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("config file {}: {e}", path.display())))
        }
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overridden_by(self, other: RunSettings) -> RunSettings {
        RunSettings {
            example: other.example.or(self.example),
            levels: other.levels.or(self.levels),
            fine_level: other.fine_level.or(self.fine_level),
            level: other.level.or(self.level),
            measurements: other.measurements.or(self.measurements),
            seed: other.seed.or(self.seed),
            theta: other.theta.or(self.theta),
            rho_coeff: other.rho_coeff.or(self.rho_coeff),
            tau1_coeff: other.tau1_coeff.or(self.tau1_coeff),
            tau2_coeff: other.tau2_coeff.or(self.tau2_coeff),
            max_iter: other.max_iter.or(self.max_iter),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Exports {
    pub csv: bool,
    pub json: bool,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "example")]
pub enum Experiment {
    #[serde(rename = "1")]
    Sweep(SweepConfig),
    #[serde(rename = "2")]
    Multi(MultiConfig),
}

/// Fully resolved parameters of a `run`, echoed in the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub experiment: Experiment,
    pub out: PathBuf,
    pub exports: Exports,
}

pub const DEFAULT_OUT: &str = "results";

impl RunConfig {
    pub fn resolve(s: RunSettings) -> Result<Self> {
        let exports = match &s.format {
            None => Exports {
                csv: true,
                json: true,
                vtk: false,
            },
            Some(list) => Exports {
                csv: list.contains(&Format::Csv),
                json: list.contains(&Format::Json),
                vtk: list.contains(&Format::Vtk),
            },
        };
        let theta = s.theta.as_ref().map(ThetaSetting::resolve).transpose()?;
        let experiment = match s.example.unwrap_or(1) {
            1 => {
                if s.level.is_some() || s.measurements.is_some() {
                    return Err(Error::InvalidArgument(
                        "level and measurement families apply to example 2 only".into(),
                    ));
                }
                let d = SweepConfig::default();
                let cfg = SweepConfig {
                    levels: s.levels.unwrap_or(d.levels),
                    fine_level: s.fine_level.unwrap_or(d.fine_level),
                    seed: s.seed.unwrap_or(d.seed),
                    theta: theta.unwrap_or(d.theta),
                    rho_coeff: s.rho_coeff.unwrap_or(d.rho_coeff),
                    tau1_coeff: s.tau1_coeff.unwrap_or(d.tau1_coeff),
                    tau2_coeff: s.tau2_coeff.unwrap_or(d.tau2_coeff),
                    max_iter: s.max_iter.unwrap_or(d.max_iter),
                };
                cfg.validate()?;
                Experiment::Sweep(cfg)
            }
            2 => {
                if s.levels.is_some() {
                    return Err(Error::InvalidArgument(
                        "example 2 runs on a single level; use level instead of levels".into(),
                    ));
                }
                let d = MultiConfig::default();
                let theta = match theta {
                    None => d.theta,
                    Some(ThetaMode::Fixed(t)) => t,
                    Some(ThetaMode::Scheduled) => {
                        return Err(Error::InvalidArgument(
                            "example 2 needs a fixed theta".into(),
                        ))
                    }
                };
                let cfg = MultiConfig {
                    level: s.level.unwrap_or(d.level),
                    fine_level: s.fine_level.unwrap_or(d.fine_level),
                    theta,
                    families: s.measurements.unwrap_or(d.families),
                    seed: s.seed.unwrap_or(d.seed),
                    rho_coeff: s.rho_coeff.unwrap_or(d.rho_coeff),
                    tau1_coeff: s.tau1_coeff.unwrap_or(d.tau1_coeff),
                    tau2_coeff: s.tau2_coeff.unwrap_or(d.tau2_coeff),
                    max_iter: s.max_iter.unwrap_or(d.max_iter),
                };
                validate_multi(&cfg)?;
                Experiment::Multi(cfg)
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown example {other}; expected 1 or 2"
                )))
            }
        };
        Ok(Self {
            command: "run",
            experiment,
            out: s.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            exports,
        })
    }
}

fn validate_multi(cfg: &MultiConfig) -> Result<()> {
    if cfg.level == 0 || cfg.fine_level == 0 || cfg.fine_level % cfg.level != 0 {
        return Err(Error::InvalidArgument(format!(
            "level {} does not divide the fine level {}",
            cfg.level, cfg.fine_level
        )));
    }
    if !(cfg.theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {}", cfg.theta)));
    }
    if !(cfg.rho_coeff > 0.0 && cfg.tau1_coeff > 0.0 && cfg.tau2_coeff > 0.0) {
        return Err(Error::InvalidArgument("coefficients must be positive".into()));
    }
    if cfg.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be positive".into()));
    }
    if cfg.families.is_empty() {
        return Err(Error::InvalidArgument("no measurement families given".into()));
    }
    for &i in &cfg.families {
        cauchy_source::experiments::measurement_family(i)?;
    }
    Ok(())
}
