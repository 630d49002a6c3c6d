//! Experiment configuration: profile defaults overridden by a TOML document
//! whose keys mirror the config fields.

use anyhow::{bail, Context, Result};
use dmf_core::channel::PowerMap;
use dmf_core::dsp::SystemParams;
use dmf_core::neural::TrainConfig;
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Built-in parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Desk-scale: 300 epochs, 12 samples/symbol, 95-tap filters.
    Ci,
    /// Full-scale: 1000 epochs, 24 samples/symbol, 191-tap filters.
    Paper,
}

impl FromStr for Profile {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ci" => Ok(Self::Ci),
            "paper" => Ok(Self::Paper),
            other => bail!("unknown profile `{other}` (expected `ci` or `paper`)"),
        }
    }
}

/// Training granularity across the bandwidth grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One model per normalized-cutoff condition.
    PerCondition,
    /// A single model trained across the whole cutoff grid.
    Pooled,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::PerCondition => write!(f, "per-condition"),
            Mode::Pooled => write!(f, "pooled"),
        }
    }
}

impl FromStr for Mode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-condition" => Ok(Self::PerCondition),
            "pooled" => Ok(Self::Pooled),
            other => bail!("unknown mode `{other}` (expected `per-condition` or `pooled`)"),
        }
    }
}

/// The evaluation power axis: either direct SNRs or dBm values mapped
/// through the [`PowerMap`].
#[derive(Debug, Clone, PartialEq)]
pub enum PowerAxis {
    SnrDb(Vec<f64>),
    PowerDbm(Vec<f64>),
}

impl PowerAxis {
    pub fn len(&self) -> usize {
        match self {
            PowerAxis::SnrDb(v) | PowerAxis::PowerDbm(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(power_dbm, snr_db)` of the j-th grid point.
    pub fn point(&self, j: usize, map: &PowerMap) -> (Option<f64>, f64) {
        match self {
            PowerAxis::SnrDb(v) => (None, v[j]),
            PowerAxis::PowerDbm(v) => (
                Some(v[j]),
                dmf_core::channel::power_dbm_to_snr_db(v[j], map),
            ),
        }
    }
}

/// Everything a sweep needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    pub omega_n: Vec<f64>,
    pub power_axis: PowerAxis,
    pub channel_taps: usize,
    pub train: TrainConfig,
    pub power_map: PowerMap,
    pub modulation_order: u32,
    pub mode: Mode,
    pub seed: u64,
    /// Channel SNR used while training each condition.
    pub train_snr_db: f64,
    pub out_dir: PathBuf,
}

pub const OMEGA_SWEEP: [f64; 8] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.9];

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (system, epochs) = match profile {
            Profile::Ci => (SystemParams::ci(), 300),
            Profile::Paper => (SystemParams::paper(), 1000),
        };
        let power_axis = match profile {
            Profile::Ci => PowerAxis::SnrDb(vec![5.0, 15.0, 25.0]),
            Profile::Paper => {
                PowerAxis::PowerDbm((0..7).map(|i| -25.0 + 5.0 * i as f64).collect())
            }
        };
        Self {
            system,
            omega_n: OMEGA_SWEEP.to_vec(),
            power_axis,
            channel_taps: 101,
            train: TrainConfig {
                epochs,
                ..TrainConfig::default()
            },
            power_map: PowerMap::default(),
            modulation_order: 4,
            mode: Mode::PerCondition,
            seed: 7,
            train_snr_db: 25.0,
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate().context("system parameters")?;
        self.train.validate().context("training parameters")?;
        if self.omega_n.is_empty() {
            bail!("omega_n grid is empty");
        }
        for &w in &self.omega_n {
            if !(w > 0.0 && w <= 1.0) {
                bail!("omega_n value {w} outside (0, 1]");
            }
        }
        if self.power_axis.is_empty() {
            bail!("power/SNR grid is empty");
        }
        if self.channel_taps == 0 || self.channel_taps % 2 == 0 {
            bail!("channel_taps must be odd, got {}", self.channel_taps);
        }
        if !matches!(self.modulation_order, 4 | 16) {
            bail!(
                "modulation_order must be 4 or 16, got {}",
                self.modulation_order
            );
        }
        if !(self.power_map.slope_db_per_db > 0.0) {
            bail!("power_map slope must be positive");
        }
        Ok(())
    }

    /// Applies a TOML document on top of this configuration.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let raw: RawConfig = toml::from_str(text).context("parsing config file")?;
        if let Some(v) = raw.seed {
            self.seed = v;
        }
        if let Some(v) = raw.modulation_order {
            self.modulation_order = v;
        }
        if let Some(v) = raw.mode {
            self.mode = v.parse()?;
        }
        if let Some(v) = raw.out_dir {
            self.out_dir = PathBuf::from(v);
        }
        if let Some(v) = raw.train_snr_db {
            self.train_snr_db = v;
        }
        if let Some(v) = raw.omega_n {
            self.omega_n = v;
        }
        if let Some(v) = raw.channel_taps {
            self.channel_taps = v;
        }
        match (raw.snr_db, raw.power_dbm) {
            (Some(_), Some(_)) => bail!("config sets both snr_db and power_dbm; pick one axis"),
            (Some(v), None) => self.power_axis = PowerAxis::SnrDb(v),
            (None, Some(v)) => self.power_axis = PowerAxis::PowerDbm(v),
            (None, None) => {}
        }
        if let Some(sys) = raw.system {
            let s = &mut self.system;
            if let Some(v) = sys.sample_rate_hz {
                s.sample_rate_hz = v;
            }
            if let Some(v) = sys.bandwidth_hz {
                s.bandwidth_hz = v;
            }
            if let Some(v) = sys.carrier_hz {
                s.carrier_hz = v;
            }
            if let Some(v) = sys.rolloff {
                s.rolloff = v;
            }
            if let Some(v) = sys.span_symbols {
                s.span_symbols = v;
            }
            if let Some(v) = sys.samples_per_symbol {
                s.samples_per_symbol = v;
            }
            s.filter_length = sys.filter_length.unwrap_or_else(|| {
                SystemParams::filter_length_for(s.span_symbols, s.samples_per_symbol)
            });
        }
        if let Some(pm) = raw.power_map {
            if let Some(v) = pm.p_ref_dbm {
                self.power_map.p_ref_dbm = v;
            }
            if let Some(v) = pm.snr_ref_db {
                self.power_map.snr_ref_db = v;
            }
            if let Some(v) = pm.slope_db_per_db {
                self.power_map.slope_db_per_db = v;
            }
        }
        if let Some(t) = raw.train {
            let c = &mut self.train;
            if let Some(v) = t.learning_rate {
                c.learning_rate = v;
            }
            if let Some(v) = t.beta1 {
                c.beta1 = v;
            }
            if let Some(v) = t.beta2 {
                c.beta2 = v;
            }
            if let Some(v) = t.epsilon {
                c.epsilon = v;
            }
            if let Some(v) = t.lambda_s1 {
                c.lambda_s1 = v;
            }
            if let Some(v) = t.lambda_s2 {
                c.lambda_s2 = v;
            }
            if let Some(v) = t.epochs {
                c.epochs = v;
            }
            if let Some(v) = t.symbols_per_epoch {
                c.symbols_per_epoch = v;
            }
            if let Some(v) = t.standardizer_warmup {
                c.standardizer_warmup = v;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        let mut cfg = Self::for_profile(profile);
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_toml(&text)?;
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    modulation_order: Option<u32>,
    mode: Option<String>,
    out_dir: Option<String>,
    train_snr_db: Option<f64>,
    omega_n: Option<Vec<f64>>,
    snr_db: Option<Vec<f64>>,
    power_dbm: Option<Vec<f64>>,
    channel_taps: Option<usize>,
    system: Option<RawSystem>,
    power_map: Option<RawPowerMap>,
    train: Option<RawTrain>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    sample_rate_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    carrier_hz: Option<f64>,
    rolloff: Option<f64>,
    span_symbols: Option<usize>,
    samples_per_symbol: Option<usize>,
    filter_length: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPowerMap {
    p_ref_dbm: Option<f64>,
    snr_ref_db: Option<f64>,
    slope_db_per_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    learning_rate: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    lambda_s1: Option<f64>,
    lambda_s2: Option<f64>,
    epochs: Option<usize>,
    symbols_per_epoch: Option<usize>,
    standardizer_warmup: Option<usize>,
}
