//! Experiment configuration files.
//!
//! A file is TOML with one mandatory section:
//!
//! ```toml
//! [scenario]
//! kind = "bottleneck-room"   # or calibration-corridor, periodic-corridor
//! seed = 7
//! dyad_fraction = 0.5
//! ```
//!
//! Optional keys of `[scenario]` are `population`, `steps`, `warmup_steps`
//! and `window_steps`; omitted ones take the defaults of the scenario kind.
//! Further optional sections: `[weights]`, `[model]`,
//! `[calibration-corridor]`, `[periodic-corridor]`, `[bottleneck-room]`,
//! `[sweep]` and `[campaign]`. Unknown keys are rejected.
//!
//! [`Config::to_toml`] writes every value explicitly, so the output of a
//! run can be fed back in to repeat it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calibration::SweepSpec;
use crate::engine::ModelParams;
use crate::error::Error;
use crate::scenarios::{
    BottleneckRoom, CalibrationCorridor, PeriodicCorridor, ScenarioConfig, ScenarioKind,
};
use crate::weights::Weights;

/// A problem with a configuration file, located when possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Repetitions and parameter lists for the multi-run experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Campaign {
    pub replicas: u32,
    /// Target densities of the fundamental diagram, p/m².
    pub densities: Vec<f64>,
    /// Bottleneck openings, meters.
    pub widths: Vec<f64>,
    pub dyad_fractions: Vec<f64>,
}

impl Default for Campaign {
    fn default() -> Self {
        Campaign {
            replicas: 3,
            densities: vec![0.5, 1.0, 1.5, 2.0, 3.0],
            widths: vec![2.0, 3.0, 4.0],
            dyad_fractions: vec![0.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub sweep: Option<SweepSpec>,
    pub campaign: Campaign,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    kind: ScenarioKind,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    population: Option<usize>,
    #[serde(default)]
    dyad_fraction: Option<f64>,
    #[serde(default)]
    steps: Option<u64>,
    #[serde(default)]
    warmup_steps: Option<u64>,
    #[serde(default)]
    window_steps: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileRepr {
    scenario: ScenarioSection,
    #[serde(default)]
    weights: Option<Weights>,
    #[serde(default)]
    model: Option<ModelParams>,
    #[serde(default)]
    calibration_corridor: Option<CalibrationCorridor>,
    #[serde(default)]
    periodic_corridor: Option<PeriodicCorridor>,
    #[serde(default)]
    bottleneck_room: Option<BottleneckRoom>,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    #[serde(default)]
    campaign: Option<Campaign>,
}

/// Keys whose names may appear in validation messages, for locating them.
const KEYS: &[&str] = &[
    "dyad_fraction",
    "warmup_steps",
    "window_steps",
    "population",
    "target_density",
    "bottleneck_width",
    "room_side",
    "strip_depth",
    "kappa_g",
    "kappa_ob",
    "kappa_s",
    "kappa_c",
    "kappa_d",
    "kappa_ov",
    "delta",
    "replicas",
    "friction",
    "repulsion_radius",
    "width",
    "length",
];

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn line_of_key(src: &str, key: &str) -> Option<usize> {
    src.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn locate(src: &str, message: String) -> ConfigError {
    let line = KEYS
        .iter()
        .filter(|k| message.contains(*k))
        .find_map(|k| line_of_key(src, k));
    ConfigError { line, message }
}

impl Config {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Config {
            scenario,
            sweep: None,
            campaign: Campaign::default(),
        }
    }

    /// Parses and validates a configuration file.
    pub fn parse(src: &str) -> Result<Config, ConfigError> {
        let repr: FileRepr = toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(src, s.start)),
            message: e.message().trim().to_string(),
        })?;
        let sec = repr.scenario;
        let mut cfg = ScenarioConfig::default_for(sec.kind);
        if let Some(w) = repr.weights {
            cfg.weights = w;
        }
        if let Some(m) = repr.model {
            cfg.model = m;
        }
        if let Some(c) = repr.calibration_corridor {
            cfg.calibration_corridor = c;
        }
        if let Some(p) = repr.periodic_corridor {
            cfg.periodic_corridor = p;
            if sec.kind == ScenarioKind::PeriodicCorridor {
                cfg.population = cfg.periodic_corridor.population();
            }
        }
        if let Some(b) = repr.bottleneck_room {
            cfg.bottleneck_room = b;
        }
        cfg.seed = sec.seed.unwrap_or(cfg.seed);
        cfg.population = sec.population.unwrap_or(cfg.population);
        cfg.dyad_fraction = sec.dyad_fraction.unwrap_or(cfg.dyad_fraction);
        cfg.steps = sec.steps.unwrap_or(cfg.steps);
        cfg.warmup_steps = sec.warmup_steps.unwrap_or(cfg.warmup_steps);
        cfg.window_steps = sec.window_steps.unwrap_or(cfg.window_steps);

        let config = Config {
            scenario: cfg,
            sweep: repr.sweep,
            campaign: repr.campaign.unwrap_or_default(),
        };
        config.validate().map_err(|e| locate(src, e.to_string()))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.scenario.validate()?;
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if self.campaign.replicas == 0 {
            return Err(Error::InvalidConfig(
                "campaign replicas must be at least 1".into(),
            ));
        }
        for &f in &self.campaign.dyad_fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!(
                    "campaign dyad_fraction {f} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Every setting written out explicitly.
    pub fn to_toml(&self) -> String {
        let s = &self.scenario;
        let repr = FileRepr {
            scenario: ScenarioSection {
                kind: s.kind,
                seed: Some(s.seed),
                population: Some(s.population),
                dyad_fraction: Some(s.dyad_fraction),
                steps: Some(s.steps),
                warmup_steps: Some(s.warmup_steps),
                window_steps: Some(s.window_steps),
            },
            weights: Some(s.weights),
            model: Some(s.model),
            calibration_corridor: Some(s.calibration_corridor.clone()),
            periodic_corridor: Some(s.periodic_corridor.clone()),
            bottleneck_room: Some(s.bottleneck_room.clone()),
            sweep: self.sweep.clone(),
            campaign: Some(self.campaign.clone()),
        };
        toml::to_string(&repr).expect("configuration serializes")
    }
}
