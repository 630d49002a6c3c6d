//! Deterministic signal-processing primitives: SRRC basis, CAP filter pair,
//! modulation, normalization, analytic envelope, FIR filtering,
//! synchronization, PSD and symbol-rate resampling.

use crate::error::{Error, Result};
use crate::fft::{fft_in_place, ifft_in_place};
use crate::par::fill_indexed;
use crate::signal::{ComplexSignal, RealSignal};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Physical-layer geometry of one simulation profile.
///
/// The carrier sits at half the system bandwidth and the filter length
/// follows `L = 2*floor(span*sps/2) - 1`, which keeps the taps odd and
/// center-symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub sample_rate_hz: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub rolloff: f64,
    pub span_symbols: usize,
    pub samples_per_symbol: usize,
    pub filter_length: usize,
}

impl SystemParams {
    /// Filter length construction rule shared by all profiles.
    pub fn filter_length_for(span_symbols: usize, samples_per_symbol: usize) -> usize {
        2 * (span_symbols * samples_per_symbol / 2) - 1
    }

    /// Full-scale profile: 1.233 GS/s, 100 MHz band, 24 samples per symbol,
    /// 191-tap pulse filters.
    pub fn paper() -> Self {
        Self {
            sample_rate_hz: 1.233e9,
            bandwidth_hz: 100e6,
            carrier_hz: 50e6,
            rolloff: 0.25,
            span_symbols: 8,
            samples_per_symbol: 24,
            filter_length: Self::filter_length_for(8, 24),
        }
    }

    /// Desk-scale profile: identical band geometry at half the sample rate,
    /// 12 samples per symbol, 95-tap pulse filters.
    pub fn ci() -> Self {
        Self {
            sample_rate_hz: 616.5e6,
            bandwidth_hz: 100e6,
            carrier_hz: 50e6,
            rolloff: 0.25,
            span_symbols: 8,
            samples_per_symbol: 12,
            filter_length: Self::filter_length_for(8, 12),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rolloff > 0.0 && self.rolloff < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rolloff must lie in (0, 1), got {}",
                self.rolloff
            )));
        }
        if self.samples_per_symbol < 2 {
            return Err(Error::InvalidParameter(format!(
                "samples_per_symbol must be >= 2, got {}",
                self.samples_per_symbol
            )));
        }
        if self.span_symbols < 2 {
            return Err(Error::InvalidParameter(format!(
                "span_symbols must be >= 2, got {}",
                self.span_symbols
            )));
        }
        if !(self.sample_rate_hz > 0.0) || !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "sample rate and bandwidth must be positive".into(),
            ));
        }
        let rel = (self.carrier_hz - 0.5 * self.bandwidth_hz).abs() / self.bandwidth_hz;
        if rel > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "carrier must sit at half the bandwidth: f_c={} B={}",
                self.carrier_hz, self.bandwidth_hz
            )));
        }
        let expect = Self::filter_length_for(self.span_symbols, self.samples_per_symbol);
        if self.filter_length != expect {
            return Err(Error::InvalidParameter(format!(
                "filter_length {} inconsistent with span*sps rule (expected {expect})",
                self.filter_length
            )));
        }
        if self.carrier_hz >= self.sample_rate_hz / 2.0 {
            return Err(Error::InvalidParameter(
                "carrier at or above Nyquist".into(),
            ));
        }
        Ok(())
    }

    /// Builds the nominal transmit filter pair for this geometry.
    pub fn nominal_pair(&self) -> Result<CapFilterPair> {
        self.validate()?;
        let basis = srrc_taps(self.rolloff, self.samples_per_symbol, self.span_symbols)?;
        CapFilterPair::from_basis(
            &basis,
            self.carrier_hz,
            self.sample_rate_hz,
            self.samples_per_symbol,
        )
    }
}

/// Square-root raised cosine pulse evaluated at `u = n/sps` symbol offsets,
/// in units of `1/sqrt(T_s)`. The removable singularities at `u = 0` and
/// `4*beta*|u| = 1` take their analytic limits.
fn srrc_point(u: f64, beta: f64) -> f64 {
    if u.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if ((4.0 * beta * u).abs() - 1.0).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return (beta / 2f64.sqrt())
            * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = ((1.0 - beta) * PI * u).sin() + 4.0 * beta * u * ((1.0 + beta) * PI * u).cos();
    let den = PI * u * (1.0 - (4.0 * beta * u).powi(2));
    num / den
}

/// Square-root raised cosine taps: odd length, symmetric, unit energy.
pub fn srrc_taps(rolloff: f64, sps: usize, span_symbols: usize) -> Result<Vec<f64>> {
    if !(rolloff > 0.0 && rolloff < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rolloff must lie in (0, 1), got {rolloff}"
        )));
    }
    if sps < 2 {
        return Err(Error::InvalidParameter(format!(
            "samples per symbol must be >= 2, got {sps}"
        )));
    }
    if span_symbols < 2 {
        return Err(Error::InvalidParameter(format!(
            "span must be >= 2 symbols, got {span_symbols}"
        )));
    }
    let len = SystemParams::filter_length_for(span_symbols, sps);
    let half = (len as i64 - 1) / 2;
    let norm = 1.0 / (sps as f64).sqrt();
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| norm * srrc_point(n as f64 / sps as f64, rolloff))
        .collect();
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    let scale = 1.0 / energy.sqrt();
    for t in &mut taps {
        *t *= scale;
    }
    Ok(taps)
}

/// In-phase/quadrature transmit filter pair carrying the pulse-locked carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct CapFilterPair {
    p: Vec<f64>,
    p_b: Vec<f64>,
    samples_per_symbol: usize,
    carrier_hz: f64,
    sample_rate_hz: f64,
    combined_energy: f64,
}

impl CapFilterPair {
    /// `p[n] = b[n]·cos(2π f_c n t_s)`, `p_b[n] = b[n]·sin(2π f_c n t_s)`
    /// with `n` measured from the center tap.
    pub fn from_basis(
        basis: &[f64],
        carrier_hz: f64,
        sample_rate_hz: f64,
        samples_per_symbol: usize,
    ) -> Result<Self> {
        if basis.is_empty() || basis.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "basis must have odd length, got {}",
                basis.len()
            )));
        }
        if let Some(i) = basis.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("basis tap {i}")));
        }
        if !(carrier_hz > 0.0) || carrier_hz >= sample_rate_hz / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "carrier {carrier_hz} Hz must lie in (0, f_s/2) at f_s = {sample_rate_hz}"
            )));
        }
        let half = (basis.len() as i64 - 1) / 2;
        let theta = 2.0 * PI * carrier_hz / sample_rate_hz;
        let mut p = Vec::with_capacity(basis.len());
        let mut p_b = Vec::with_capacity(basis.len());
        for (i, &b) in basis.iter().enumerate() {
            let n = (i as i64 - half) as f64;
            p.push(b * (theta * n).cos());
            p_b.push(b * (theta * n).sin());
        }
        let ep: f64 = p.iter().map(|v| v * v).sum();
        let eb: f64 = p_b.iter().map(|v| v * v).sum();
        // Hilbert-pair orthogonality; vacuous for an all-zero basis.
        if ep > 0.0 && eb > 0.0 {
            let dot: f64 = p.iter().zip(&p_b).map(|(a, b)| a * b).sum();
            let ratio = dot.abs() / (ep * eb).sqrt();
            if ratio >= 1e-2 {
                return Err(Error::NonOrthogonalPair(ratio));
            }
        }
        Ok(Self {
            p,
            p_b,
            samples_per_symbol,
            carrier_hz,
            sample_rate_hz,
            combined_energy: ep + eb,
        })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_b(&self) -> &[f64] {
        &self.p_b
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Σp² + Σp_b², recorded at construction.
    pub fn combined_energy(&self) -> f64 {
        self.combined_energy
    }

    /// Time-reversed taps, i.e. the conventional matched filters.
    pub fn matched_taps(&self) -> (Vec<f64>, Vec<f64>) {
        let mut p = self.p.clone();
        let mut p_b = self.p_b.clone();
        p.reverse();
        p_b.reverse();
        (p, p_b)
    }
}

/// CAP transmit waveform `x[n] = √2 Σ_k s_I[k]·p[n−k·sps] − s_Q[k]·p_b[n−k·sps]`.
///
/// Output length is `(K−1)·sps + L`.
pub fn cap_modulate(symbols: &[Complex64], pair: &CapFilterPair) -> Result<RealSignal> {
    if symbols.is_empty() {
        return Err(Error::TooShort("symbol stream is empty".into()));
    }
    let sps = pair.samples_per_symbol;
    let l = pair.len();
    let k_count = symbols.len();
    let out_len = (k_count - 1) * sps + l;
    let p = pair.p();
    let p_b = pair.p_b();
    let root2 = 2f64.sqrt();
    let mut out = vec![0.0f64; out_len];
    fill_indexed(&mut out, |n| {
        // symbols whose pulse support covers sample n
        let k_min = (n + 1).saturating_sub(l).div_ceil(sps);
        let k_max = (n / sps).min(k_count - 1);
        let mut acc = 0.0;
        let mut k = k_min;
        while k <= k_max {
            let j = n - k * sps;
            acc += symbols[k].re * p[j] - symbols[k].im * p_b[j];
            k += 1;
        }
        root2 * acc
    });
    Ok(RealSignal::from_valid(out, pair.sample_rate_hz))
}

/// Rescales to unit mean power: `(1/N)·Σx² = 1`.
pub fn normalize_unit_power(signal: &RealSignal) -> Result<RealSignal> {
    let mp = signal.mean_power();
    if mp == 0.0 {
        return Err(Error::ZeroPower("cannot normalize an all-zero signal"));
    }
    let scale = 1.0 / mp.sqrt();
    let samples = signal.samples().iter().map(|x| x * scale).collect();
    Ok(RealSignal::from_valid(samples, signal.sample_rate_hz()))
}

/// Analytic signal via the frequency-domain construction: keep DC (and
/// Nyquist for even lengths), double positive frequencies, zero the rest.
pub fn analytic_signal(signal: &RealSignal) -> Result<ComplexSignal> {
    let n = signal.len();
    if n < 4 {
        return Err(Error::TooShort(format!(
            "analytic signal needs >= 4 samples, got {n}"
        )));
    }
    let mut buf: Vec<Complex64> = signal
        .samples()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    fft_in_place(&mut buf);
    let half = n / 2;
    if n % 2 == 0 {
        for v in buf.iter_mut().take(half).skip(1) {
            *v *= 2.0;
        }
        for v in buf.iter_mut().skip(half + 1) {
            *v = Complex64::new(0.0, 0.0);
        }
    } else {
        for v in buf.iter_mut().take(half + 1).skip(1) {
            *v *= 2.0;
        }
        for v in buf.iter_mut().skip(half + 1) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    ifft_in_place(&mut buf);
    Ok(ComplexSignal::from_valid(buf, signal.sample_rate_hz()))
}

/// Magnitude of the analytic signal.
pub fn analytic_envelope(signal: &RealSignal) -> Result<Vec<f64>> {
    Ok(analytic_signal(signal)?
        .samples()
        .iter()
        .map(|c| c.norm())
        .collect())
}

pub(crate) fn analytic_envelope_slice(samples: &[f64]) -> Result<Vec<f64>> {
    analytic_envelope(&RealSignal::from_valid(samples.to_vec(), 1.0))
}

/// Full linear convolution trimmed to "same" length, aligned to the taps'
/// group-delay center `(L_t − 1)/2`.
pub fn fir_apply(signal: &RealSignal, taps: &[f64]) -> Result<RealSignal> {
    if taps.is_empty() {
        return Err(Error::InvalidParameter("taps must be nonempty".into()));
    }
    let x = signal.samples();
    let n = x.len();
    let lt = taps.len();
    let delay = (lt - 1) / 2;
    let mut out = vec![0.0f64; n];
    fill_indexed(&mut out, |i| {
        let m = i + delay; // index into the full convolution
        let j_lo = (m + 1).saturating_sub(n);
        let j_hi = m.min(lt - 1);
        let mut acc = 0.0;
        let mut j = j_lo;
        while j <= j_hi {
            acc += taps[j] * x[m - j];
            j += 1;
        }
        acc
    });
    Ok(RealSignal::from_valid(out, signal.sample_rate_hz()))
}

/// Hamming-windowed sinc low-pass with cutoff `cutoff_norm · f_s/2` and
/// unity DC gain.
pub fn lowpass_design(num_taps: usize, cutoff_norm: f64) -> Result<Vec<f64>> {
    if num_taps == 0 || num_taps % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "tap count must be odd, got {num_taps}"
        )));
    }
    if !(cutoff_norm > 0.0 && cutoff_norm <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "normalized cutoff must lie in (0, 1], got {cutoff_norm}"
        )));
    }
    let center = (num_taps - 1) as f64 / 2.0;
    let sinc = |x: f64| {
        if x.abs() < 1e-12 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        }
    };
    let mut taps: Vec<f64> = (0..num_taps)
        .map(|i| {
            let m = i as f64 - center;
            let w = if num_taps == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * i as f64 / (num_taps - 1) as f64).cos()
            };
            cutoff_norm * sinc(cutoff_norm * m) * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(taps)
}

/// Integer delay recovered by maximizing `|Σ_n x[n]·y[n+τ]|` over
/// `τ ∈ [0, min(max_lag, len(y) − len(x))]`.
pub fn sync_offset(tx: &RealSignal, rx: &RealSignal, max_lag: usize) -> Result<usize> {
    let x = tx.samples();
    let y = rx.samples();
    if y.len() < x.len() {
        return Err(Error::TooShort(format!(
            "received signal ({}) shorter than reference ({})",
            y.len(),
            x.len()
        )));
    }
    let lag_hi = max_lag.min(y.len() - x.len());
    let mut corr = vec![0.0f64; lag_hi + 1];
    fill_indexed(&mut corr, |tau| {
        x.iter()
            .zip(&y[tau..tau + x.len()])
            .map(|(a, b)| a * b)
            .sum()
    });
    let mut best = 0usize;
    let mut best_val = 0.0f64;
    for (tau, &c) in corr.iter().enumerate() {
        if c.abs() > best_val {
            best_val = c.abs();
            best = tau;
        }
    }
    if best_val == 0.0 {
        return Err(Error::DegenerateSync);
    }
    Ok(best)
}

/// One-sided power spectrum over bins `m = 0 … N/2 − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    /// Bin center frequencies `f[m] = m·f_s/N`.
    pub freq_hz: Vec<f64>,
    /// Normalized power, ΣP̃ = 1 for any input with nonzero windowed energy.
    pub power: Vec<f64>,
}

/// Raw (unnormalized) one-sided Hann-windowed periodogram.
pub(crate) fn psd_raw(samples: &[f64], sample_rate_hz: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::TooShort(format!(
            "PSD needs >= 8 samples, got {n}"
        )));
    }
    let mut buf: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos());
            Complex64::new(x * w, 0.0)
        })
        .collect();
    fft_in_place(&mut buf);
    let bins = n / 2;
    let freq: Vec<f64> = (0..bins).map(|m| m as f64 * sample_rate_hz / n as f64).collect();
    let power: Vec<f64> = buf[..bins].iter().map(|c| c.norm_sqr()).collect();
    Ok((freq, power))
}

/// Hann-windowed one-sided PSD normalized to unit total power.
///
/// A signal whose windowed content is identically zero yields an all-zero
/// spectrum instead of dividing by zero.
pub fn psd_hanning(signal: &RealSignal) -> Result<Psd> {
    let (freq_hz, mut power) = psd_raw(signal.samples(), signal.sample_rate_hz())?;
    let total: f64 = power.iter().sum();
    if total > 0.0 {
        for p in &mut power {
            *p /= total;
        }
    }
    Ok(Psd { freq_hz, power })
}

/// Picks samples at `offset, offset+sps, offset+2·sps, …`.
pub fn downsample_symbols<T: Copy>(samples: &[T], sps: usize, offset: usize) -> Result<Vec<T>> {
    if sps == 0 {
        return Err(Error::InvalidParameter("sps must be positive".into()));
    }
    if offset >= sps {
        return Err(Error::InvalidParameter(format!(
            "offset {offset} out of range for sps {sps}"
        )));
    }
    Ok(samples.iter().skip(offset).step_by(sps).copied().collect())
}
