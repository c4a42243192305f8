//! Shared run configuration: a human-editable TOML tree whose values are
//! the published defaults. Command-line flags override file values, and
//! every override is logged at startup so a run log pins the effective
//! configuration.

use mimir_core::classify::{
    ClassifierConfig, Penalty, Strategy, DEFAULT_CAP, DEFAULT_FOLDS, DEFAULT_MAX_ITERS,
    DEFAULT_SEED,
};
use mimir_core::corpus::MAX_ATTEMPTS;
use mimir_core::mirror::MirrorWeights;
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Fixture,
    Proxy,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportKind::Fixture => write!(f, "fixture"),
            TransportKind::Proxy => write!(f, "proxy"),
        }
    }
}

impl FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixture" => Ok(TransportKind::Fixture),
            "proxy" => Ok(TransportKind::Proxy),
            other => Err(format!("unknown transport {other:?} (fixture|proxy)")),
        }
    }
}

/// Where crawl timestamps come from. `Auto` resolves to a fixed counter
/// for fixture runs (reproducible snapshots) and the system clock for
/// proxy runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    Auto,
    Fixed,
    System,
}

impl fmt::Display for ClockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClockKind::Auto => write!(f, "auto"),
            ClockKind::Fixed => write!(f, "fixed"),
            ClockKind::System => write!(f, "system"),
        }
    }
}

impl FromStr for ClockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ClockKind::Auto),
            "fixed" => Ok(ClockKind::Fixed),
            "system" => Ok(ClockKind::System),
            other => Err(format!("unknown clock {other:?} (auto|fixed|system)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorConfig {
    pub scheme_weight: f64,
    pub content_weight: f64,
    pub threshold: f64,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        let defaults = MirrorWeights::default();
        MirrorConfig {
            scheme_weight: defaults.scheme_weight,
            content_weight: defaults.content_weight,
            threshold: defaults.threshold,
        }
    }
}

impl MirrorConfig {
    pub fn weights(&self) -> Result<MirrorWeights, CliError> {
        MirrorWeights::new(self.scheme_weight, self.content_weight, self.threshold)
            .map_err(|e| CliError::Usage(format!("--weights/--threshold: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierFileConfig {
    pub cap: usize,
    pub folds: usize,
    pub seed: u64,
    pub penalty: String,
    pub c: f64,
    pub strategy: String,
    pub grid_search: bool,
    pub max_iters: usize,
    pub beta: f64,
}

impl Default for ClassifierFileConfig {
    fn default() -> Self {
        ClassifierFileConfig {
            cap: DEFAULT_CAP,
            folds: DEFAULT_FOLDS,
            seed: DEFAULT_SEED,
            penalty: "l1".to_string(),
            c: 1.0,
            strategy: Strategy::Multinomial.to_string(),
            grid_search: true,
            max_iters: DEFAULT_MAX_ITERS,
            beta: 1.0,
        }
    }
}

impl ClassifierFileConfig {
    /// Builds the training configuration for a concrete class list.
    pub fn classifier_config(&self, classes: Vec<String>) -> Result<ClassifierConfig, CliError> {
        Ok(ClassifierConfig {
            penalty: parse_penalty(&self.penalty)?,
            c: self.c,
            classes,
            cap: self.cap,
            folds: self.folds,
            beta: self.beta,
            seed: self.seed,
            max_iters: self.max_iters,
            strategy: Strategy::from_str(&self.strategy)
                .map_err(|e| CliError::Usage(format!("--strategy: {e}")))?,
            grid_search: self.grid_search,
        })
    }
}

pub fn parse_penalty(s: &str) -> Result<Penalty, CliError> {
    match s {
        "none" => Ok(Penalty::None),
        "l1" => Ok(Penalty::L1),
        "l2" => Ok(Penalty::L2),
        other => match other.strip_prefix("elasticnet:").map(str::parse::<f64>) {
            Some(Ok(mix)) if (0.0..=1.0).contains(&mix) => Ok(Penalty::ElasticNet(mix)),
            _ => Err(CliError::Usage(format!(
                "--penalty: unknown penalty {other:?} (none|l1|l2|elasticnet:MIX)"
            ))),
        },
    }
}

/// The full configuration tree with published defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub workers: usize,
    pub timeout_secs: u64,
    pub max_attempts: u8,
    pub rng_seed: u64,
    pub transport: TransportKind,
    pub proxy_endpoint: String,
    pub fixture_root: PathBuf,
    pub clock: ClockKind,
    pub mirror: MirrorConfig,
    pub classifier: ClassifierFileConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            workers: 4,
            timeout_secs: 30,
            max_attempts: MAX_ATTEMPTS,
            rng_seed: 42,
            transport: TransportKind::Fixture,
            proxy_endpoint: "127.0.0.1:9050".to_string(),
            fixture_root: PathBuf::from("corpus"),
            clock: ClockKind::Auto,
            mirror: MirrorConfig::default(),
            classifier: ClassifierFileConfig::default(),
        }
    }
}

/// The TOML shape: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    workers: Option<usize>,
    timeout_secs: Option<u64>,
    max_attempts: Option<u8>,
    rng_seed: Option<u64>,
    transport: Option<TransportKind>,
    proxy_endpoint: Option<String>,
    fixture_root: Option<PathBuf>,
    clock: Option<ClockKind>,
    #[serde(default)]
    mirror: MirrorFile,
    #[serde(default)]
    classifier: ClassifierFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MirrorFile {
    scheme_weight: Option<f64>,
    content_weight: Option<f64>,
    threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierFile {
    cap: Option<usize>,
    folds: Option<usize>,
    seed: Option<u64>,
    penalty: Option<String>,
    c: Option<f64>,
    strategy: Option<String>,
    grid_search: Option<bool>,
    max_iters: Option<usize>,
    beta: Option<f64>,
}

impl Config {
    /// Defaults, overlaid with `path` when given. A malformed or unknown
    /// key is a usage error.
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let mut config = Config::default();
        let Some(path) = path else {
            return Ok(config);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        let file: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        macro_rules! overlay {
            ($($field:ident),+) => {
                $(if let Some(value) = file.$field {
                    config.$field = value;
                })+
            };
        }
        overlay!(
            workers,
            timeout_secs,
            max_attempts,
            rng_seed,
            transport,
            proxy_endpoint,
            fixture_root,
            clock
        );
        macro_rules! overlay_sub {
            ($section:ident: $($field:ident),+) => {
                $(if let Some(value) = file.$section.$field {
                    config.$section.$field = value;
                })+
            };
        }
        overlay_sub!(mirror: scheme_weight, content_weight, threshold);
        overlay_sub!(
            classifier: cap,
            folds,
            seed,
            penalty,
            c,
            strategy,
            grid_search,
            max_iters,
            beta
        );
        Ok(config)
    }

    /// Apply one flag override, logging when it changes a configured value.
    pub fn set<T: PartialEq + fmt::Display>(name: &str, slot: &mut T, flag: Option<T>) {
        if let Some(value) = flag {
            if *slot != value {
                log::info!("--{name} overrides configured {slot} with {value}");
            }
            *slot = value;
        }
    }
}
