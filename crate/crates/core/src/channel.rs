//! Digital emulation of the bandwidth-limited loopback: FIR band limitation
//! plus additive white Gaussian noise behind a single `Channel` trait, so a
//! hardware back-end can replace the simulator without touching callers.

use crate::dsp::{fir_apply, lowpass_design};
use crate::error::{Error, Result};
use crate::signal::RealSignal;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One channel condition.
///
/// `omega_n` expresses the low-pass cutoff as a fraction of the system
/// bandwidth: the cutoff sits at `omega_n * bandwidth_hz`, so the sweep set
/// {0.5 … 0.9} slices through the occupied band regardless of the
/// oversampling factor. Noise is disabled with `snr_db = f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub omega_n: f64,
    pub taps: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub bandwidth_hz: f64,
}

impl ChannelConfig {
    pub fn new(omega_n: f64, snr_db: f64, seed: u64, bandwidth_hz: f64) -> Self {
        Self {
            omega_n,
            taps: 101,
            snr_db,
            seed,
            bandwidth_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_n > 0.0 && self.omega_n <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "omega_n must lie in (0, 1], got {}",
                self.omega_n
            )));
        }
        if self.taps % 2 == 0 || self.taps == 0 {
            return Err(Error::InvalidParameter(format!(
                "channel filter tap count must be odd, got {}",
                self.taps
            )));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "channel bandwidth must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Maps received power in dBm to an electrical SNR in dB.
///
/// Stands in for the optical power sweep; only the monotone mapping matters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMap {
    pub p_ref_dbm: f64,
    pub snr_ref_db: f64,
    pub slope_db_per_db: f64,
}

impl Default for PowerMap {
    fn default() -> Self {
        Self {
            p_ref_dbm: -10.0,
            snr_ref_db: 20.0,
            slope_db_per_db: 2.0,
        }
    }
}

/// `snr = snr_ref + slope * (p - p_ref)`.
pub fn power_dbm_to_snr_db(p_dbm: f64, map: &PowerMap) -> f64 {
    map.snr_ref_db + map.slope_db_per_db * (p_dbm - map.p_ref_dbm)
}

/// Same-mode convolution with the windowed-sinc low-pass cut at
/// `omega_n * bandwidth_hz`.
pub fn apply_bandwidth_limit(signal: &RealSignal, cfg: &ChannelConfig) -> Result<RealSignal> {
    cfg.validate()?;
    let cutoff_norm = 2.0 * cfg.omega_n * cfg.bandwidth_hz / signal.sample_rate_hz();
    if cutoff_norm > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "cutoff {} Hz exceeds Nyquist at f_s = {}",
            cfg.omega_n * cfg.bandwidth_hz,
            signal.sample_rate_hz()
        )));
    }
    let taps = lowpass_design(cfg.taps, cutoff_norm)?;
    fir_apply(signal, &taps)
}

/// Adds zero-mean Gaussian noise at variance `signal_power / 10^(snr/10)`.
///
/// Deterministic for a given seed; the generator is instantiated per call.
pub fn add_awgn(signal: &RealSignal, snr_db: f64, seed: u64) -> Result<RealSignal> {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(signal.clone());
    }
    let power = signal.mean_power();
    if power == 0.0 {
        return Err(Error::ZeroPower("cannot scale noise to an all-zero signal"));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| {
        Error::InvalidParameter(format!("invalid noise deviation {sigma}: {e}"))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = signal
        .samples()
        .iter()
        .map(|x| x + normal.sample(&mut rng))
        .collect();
    Ok(RealSignal::from_valid(samples, signal.sample_rate_hz()))
}

/// Transmission medium contract; implement it to swap in hardware I/O.
pub trait Channel {
    fn transmit(&self, tx: &RealSignal, cfg: &ChannelConfig) -> Result<RealSignal>;
}

/// The simulated loopback: band limitation followed by receiver-side noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedChannel;

impl Channel for SimulatedChannel {
    fn transmit(&self, tx: &RealSignal, cfg: &ChannelConfig) -> Result<RealSignal> {
        let limited = apply_bandwidth_limit(tx, cfg)?;
        add_awgn(&limited, cfg.snr_db, cfg.seed)
    }
}
