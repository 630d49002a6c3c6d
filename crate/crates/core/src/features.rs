//! 16-feature channel-state extractor with K=4 segment averaging and a
//! freezable standardizer for network input.

use crate::dsp::{analytic_envelope_slice, psd_raw};
use crate::error::{Error, Result};
use crate::signal::RealSignal;

pub const FEATURE_COUNT: usize = 16;

/// CSV column order of the feature vector.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "rms",
    "variance",
    "skewness",
    "excess_kurtosis",
    "mean_envelope",
    "spectral_centroid",
    "spectral_spread",
    "spectral_rolloff",
    "spectral_flatness",
    "spectral_entropy",
    "bandwidth_3db",
    "papr",
    "peak_power",
    "autocorr_symbol",
    "autocorr_lag1",
    "envelope_crest",
];

/// The 16 named scalars describing a received waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub rms: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub mean_envelope: f64,
    pub spectral_centroid: f64,
    pub spectral_spread: f64,
    pub spectral_rolloff: f64,
    pub spectral_flatness: f64,
    pub spectral_entropy: f64,
    pub bandwidth_3db: f64,
    pub papr: f64,
    pub peak_power: f64,
    pub autocorr_symbol: f64,
    pub autocorr_lag1: f64,
    pub envelope_crest: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.rms,
            self.variance,
            self.skewness,
            self.excess_kurtosis,
            self.mean_envelope,
            self.spectral_centroid,
            self.spectral_spread,
            self.spectral_rolloff,
            self.spectral_flatness,
            self.spectral_entropy,
            self.bandwidth_3db,
            self.papr,
            self.peak_power,
            self.autocorr_symbol,
            self.autocorr_lag1,
            self.envelope_crest,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            rms: v[0],
            variance: v[1],
            skewness: v[2],
            excess_kurtosis: v[3],
            mean_envelope: v[4],
            spectral_centroid: v[5],
            spectral_spread: v[6],
            spectral_rolloff: v[7],
            spectral_flatness: v[8],
            spectral_entropy: v[9],
            bandwidth_3db: v[10],
            papr: v[11],
            peak_power: v[12],
            autocorr_symbol: v[13],
            autocorr_lag1: v[14],
            envelope_crest: v[15],
        }
    }

    pub fn csv_header() -> String {
        FEATURE_NAMES.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.as_array()
            .iter()
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Time-domain statistics of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub rms: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub mean_envelope: f64,
}

/// Frequency-domain statistics of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    pub centroid: f64,
    pub spread: f64,
    pub rolloff: f64,
    pub flatness: f64,
    pub entropy: f64,
    pub bandwidth_3db: f64,
}

/// Signal-quality metrics of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityFeatures {
    pub papr: f64,
    pub peak_power: f64,
    pub autocorr_symbol: f64,
    pub autocorr_lag1: f64,
    pub envelope_crest: f64,
}

const SEGMENTS: usize = 4;
const PSD_FLOOR: f64 = 1e-12;

/// rms/variance from central moments, skewness `m3/m2^1.5`, excess kurtosis
/// `m4/m2^2 - 3`, and the mean analytic envelope.
pub fn time_features(segment: &[f64]) -> Result<TimeFeatures> {
    let env = analytic_envelope_slice(segment)?;
    time_features_with_env(segment, &env, 0)
}

pub(crate) fn time_features_with_env(
    segment: &[f64],
    envelope: &[f64],
    segment_index: usize,
) -> Result<TimeFeatures> {
    let n = segment.len() as f64;
    let mean = segment.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in segment {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::DegenerateSegment {
            feature: "variance",
            segment: segment_index,
        });
    }
    let mean_envelope = envelope.iter().sum::<f64>() / n;
    Ok(TimeFeatures {
        rms: m2.sqrt(),
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        mean_envelope,
    })
}

/// Spectral descriptors computed from the Hann-windowed one-sided PSD.
pub fn spectral_features(segment: &[f64], sample_rate_hz: f64) -> Result<SpectralFeatures> {
    let (freq, power) = psd_raw(segment, sample_rate_hz)?;
    spectral_from_psd(&freq, &power)
}

/// Spectral descriptors from an already-computed one-sided PSD.
///
/// `power` may be raw or normalized; flatness uses the raw values floored at
/// 1e-12 while the remaining descriptors use the normalized distribution.
pub fn spectral_from_psd(freq_hz: &[f64], power: &[f64]) -> Result<SpectralFeatures> {
    if freq_hz.len() != power.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} frequencies vs {} power bins",
            freq_hz.len(),
            power.len()
        )));
    }
    let bins = power.len();
    if bins < 2 {
        return Err(Error::TooShort("PSD needs at least 2 bins".into()));
    }
    let total: f64 = power.iter().sum();
    let pnorm: Vec<f64> = if total > 0.0 {
        power.iter().map(|p| p / total).collect()
    } else {
        vec![0.0; bins]
    };

    let centroid: f64 = freq_hz.iter().zip(&pnorm).map(|(f, p)| f * p).sum();
    let spread = freq_hz
        .iter()
        .zip(&pnorm)
        .map(|(f, p)| (f - centroid) * (f - centroid) * p)
        .sum::<f64>()
        .max(0.0)
        .sqrt();

    // smallest frequency below which 85% of the energy is concentrated
    let mut cum = 0.0;
    let mut rolloff = freq_hz[bins - 1];
    for (f, p) in freq_hz.iter().zip(&pnorm) {
        cum += p;
        if cum >= 0.85 {
            rolloff = *f;
            break;
        }
    }

    // geometric over arithmetic mean of the raw PSD, floored
    let log_mean = power
        .iter()
        .map(|p| p.max(PSD_FLOOR).ln())
        .sum::<f64>()
        / bins as f64;
    let arith = power.iter().map(|p| p.max(PSD_FLOOR)).sum::<f64>() / bins as f64;
    let flatness = log_mean.exp() / arith;

    // Shannon entropy with the 0*log0 := 0 convention
    let entropy = -pnorm
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>();

    // highest frequency where the 3-bin-smoothed PSD still holds half its peak
    let smooth = |m: usize| {
        let lo = m.saturating_sub(1);
        let hi = (m + 1).min(bins - 1);
        pnorm[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
    };
    let peak = (0..bins).map(smooth).fold(0.0f64, f64::max);
    let mut bandwidth_3db = 0.0;
    if peak > 0.0 {
        for m in (0..bins).rev() {
            if smooth(m) >= peak / 2.0 {
                bandwidth_3db = freq_hz[m];
                break;
            }
        }
    }

    Ok(SpectralFeatures {
        centroid,
        spread,
        rolloff,
        flatness,
        entropy,
        bandwidth_3db,
    })
}

/// Autocorrelation at `lag` normalized by the zero-lag energy, so that
/// `R_xx[0] = 1`.
pub fn normalized_autocorr(segment: &[f64], lag: usize) -> Result<f64> {
    if segment.len() <= lag {
        return Err(Error::TooShort(format!(
            "autocorrelation lag {lag} needs more than {lag} samples"
        )));
    }
    let energy: f64 = segment.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(Error::ZeroPower("autocorrelation of an all-zero segment"));
    }
    let num: f64 = segment
        .iter()
        .zip(&segment[lag..])
        .map(|(a, b)| a * b)
        .sum();
    Ok(num / energy)
}

/// PAPR, peak power, symbol-lag and lag-1 autocorrelation, envelope crest.
pub fn quality_features(segment: &[f64], sps: usize) -> Result<QualityFeatures> {
    let env = analytic_envelope_slice(segment)?;
    quality_features_with_env(segment, &env, sps, 0)
}

pub(crate) fn quality_features_with_env(
    segment: &[f64],
    envelope: &[f64],
    sps: usize,
    segment_index: usize,
) -> Result<QualityFeatures> {
    if segment.len() <= sps {
        return Err(Error::TooShort(format!(
            "segment of {} samples cannot host symbol lag {sps}",
            segment.len()
        )));
    }
    let n = segment.len() as f64;
    let peak_power = segment.iter().map(|x| x * x).fold(0.0f64, f64::max);
    let mean_power = segment.iter().map(|x| x * x).sum::<f64>() / n;
    if mean_power == 0.0 {
        return Err(Error::DegenerateSegment {
            feature: "papr",
            segment: segment_index,
        });
    }
    let mean_env = envelope.iter().sum::<f64>() / n;
    let max_env = envelope.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(QualityFeatures {
        papr: peak_power / mean_power,
        peak_power,
        autocorr_symbol: normalized_autocorr(segment, sps)?,
        autocorr_lag1: normalized_autocorr(segment, 1)?,
        envelope_crest: max_env / mean_env,
    })
}

/// Permutation-invariant mean of the four per-segment values.
fn segment_mean(values: [f64; SEGMENTS]) -> f64 {
    let mut v = values;
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / SEGMENTS as f64
}

/// Extracts the 16-feature vector: the mean-removed signal is split into four
/// equal contiguous segments (tail remainder dropped), each segment yields all
/// 16 features, and the four vectors are averaged.
pub fn extract_features(signal: &RealSignal, sps: usize) -> Result<FeatureVector> {
    let min_len = SEGMENTS * 8.max(sps + 1);
    if signal.len() < min_len {
        return Err(Error::TooShort(format!(
            "feature extraction needs >= {min_len} samples, got {}",
            signal.len()
        )));
    }
    let seg_len = signal.len() / SEGMENTS;
    let used = &signal.samples()[..SEGMENTS * seg_len];
    // mean removal over the retained samples; combining the per-segment sums
    // in sorted order keeps the result independent of segment order
    let quarter_sums: [f64; SEGMENTS] = std::array::from_fn(|k| {
        used[k * seg_len..(k + 1) * seg_len].iter().sum::<f64>()
    });
    let mean = segment_mean(quarter_sums) / seg_len as f64;
    let centered: Vec<f64> = used.iter().map(|x| x - mean).collect();

    let mut per_segment = Vec::with_capacity(SEGMENTS);
    for k in 0..SEGMENTS {
        let seg = &centered[k * seg_len..(k + 1) * seg_len];
        let env = analytic_envelope_slice(seg)?;
        let t = time_features_with_env(seg, &env, k)?;
        let s = spectral_features(seg, signal.sample_rate_hz())?;
        let q = quality_features_with_env(seg, &env, sps, k)?;
        per_segment.push([
            t.rms,
            t.variance,
            t.skewness,
            t.excess_kurtosis,
            t.mean_envelope,
            s.centroid,
            s.spread,
            s.rolloff,
            s.flatness,
            s.entropy,
            s.bandwidth_3db,
            q.papr,
            q.peak_power,
            q.autocorr_symbol,
            q.autocorr_lag1,
            q.envelope_crest,
        ]);
    }

    let mut avg = [0.0f64; FEATURE_COUNT];
    for (i, slot) in avg.iter_mut().enumerate() {
        *slot = segment_mean([
            per_segment[0][i],
            per_segment[1][i],
            per_segment[2][i],
            per_segment[3][i],
        ]);
    }
    Ok(FeatureVector::from_array(avg))
}

/// Per-feature mean/stddev scaler, mutable while warming up and immutable
/// once frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStandardizer {
    count: u64,
    mean: [f64; FEATURE_COUNT],
    m2: [f64; FEATURE_COUNT],
    std: [f64; FEATURE_COUNT],
    frozen: bool,
}

impl Default for FeatureStandardizer {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureStandardizer {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: [0.0; FEATURE_COUNT],
            m2: [0.0; FEATURE_COUNT],
            std: [0.0; FEATURE_COUNT],
            frozen: false,
        }
    }

    /// Identity scaling (mean 0, stddev 1), already frozen.
    pub fn identity() -> Self {
        Self {
            count: 0,
            mean: [0.0; FEATURE_COUNT],
            m2: [0.0; FEATURE_COUNT],
            std: [1.0; FEATURE_COUNT],
            frozen: true,
        }
    }

    /// Rebuilds a frozen standardizer from stored statistics.
    pub fn from_stats(mean: [f64; FEATURE_COUNT], std: [f64; FEATURE_COUNT]) -> Result<Self> {
        if std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::StandardizerFreeze(
                "stored stddev must be positive".into(),
            ));
        }
        Ok(Self {
            count: 0,
            mean,
            m2: [0.0; FEATURE_COUNT],
            std,
            frozen: true,
        })
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn mean(&self) -> &[f64; FEATURE_COUNT] {
        &self.mean
    }

    pub fn std(&self) -> &[f64; FEATURE_COUNT] {
        &self.std
    }

    /// Welford update; ignored after freezing.
    pub fn accumulate(&mut self, features: &FeatureVector) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let v = features.as_array();
        for i in 0..FEATURE_COUNT {
            let delta = v[i] - self.mean[i];
            self.mean[i] += delta / self.count as f64;
            self.m2[i] += delta * (v[i] - self.mean[i]);
        }
    }

    /// Locks the statistics. Requires at least two samples and a strictly
    /// positive variance on every feature.
    pub fn freeze(&mut self) -> Result<()> {
        if self.frozen {
            return Ok(());
        }
        if self.count < 2 {
            return Err(Error::StandardizerFreeze(format!(
                "need >= 2 accumulated vectors, got {}",
                self.count
            )));
        }
        for i in 0..FEATURE_COUNT {
            let var = self.m2[i] / (self.count - 1) as f64;
            if !(var > 0.0) {
                return Err(Error::StandardizerFreeze(format!(
                    "feature `{}` has zero variance over the warm-up set",
                    FEATURE_NAMES[i]
                )));
            }
            self.std[i] = var.sqrt();
        }
        self.frozen = true;
        Ok(())
    }

    /// Per-feature `(f - mean)/stddev`; requires a frozen standardizer.
    pub fn standardize(&self, features: &FeatureVector) -> Result<[f64; FEATURE_COUNT]> {
        if !self.frozen {
            return Err(Error::UnfrozenStandardizer);
        }
        let v = features.as_array();
        let mut out = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            out[i] = (v[i] - self.mean[i]) / self.std[i];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sig(v: Vec<f64>) -> RealSignal {
        RealSignal::new(v, 1.0).unwrap()
    }

    #[test]
    fn alternating_sequence_moments() {
        let seg: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let t = time_features(&seg).unwrap();
        assert_relative_eq!(t.rms, 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.variance, 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.skewness, 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.excess_kurtosis, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn mirroring_negates_skewness_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seg: Vec<f64> = (0..256).map(|_| rng.gen::<f64>().powi(2)).collect();
        let neg: Vec<f64> = seg.iter().map(|v| -v).collect();
        let a = time_features(&seg).unwrap();
        let b = time_features(&neg).unwrap();
        assert_relative_eq!(a.skewness, -b.skewness, epsilon = 1e-9);
        assert_relative_eq!(a.rms, b.rms, epsilon = 1e-12);
        assert_relative_eq!(a.variance, b.variance, epsilon = 1e-12);
        assert_relative_eq!(a.excess_kurtosis, b.excess_kurtosis, epsilon = 1e-9);
    }

    #[test]
    fn gaussian_sample_has_near_zero_excess_kurtosis() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let seg: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
        let t = time_features(&seg).unwrap();
        assert!(t.excess_kurtosis.abs() < 0.02, "{}", t.excess_kurtosis);
    }

    #[test]
    fn zero_variance_segment_is_rejected_by_name() {
        let seg = vec![3.0; 32];
        match time_features(&seg) {
            Err(Error::DegenerateSegment { feature, .. }) => assert_eq!(feature, "variance"),
            other => panic!("expected degenerate-segment error, got {other:?}"),
        }
    }

    #[test]
    fn single_bin_psd_degenerates_cleanly() {
        let freq: Vec<f64> = (0..8).map(|m| m as f64 * 10.0).collect();
        let mut power = vec![0.0; 8];
        power[3] = 5.0;
        let s = spectral_from_psd(&freq, &power).unwrap();
        assert_relative_eq!(s.entropy, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.centroid, 30.0, epsilon = 1e-12);
        assert_relative_eq!(s.spread, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.rolloff, 30.0, epsilon = 1e-12);
        assert!(s.flatness < 1e-3, "{}", s.flatness);
    }

    #[test]
    fn uniform_psd_hits_flat_spectrum_identities() {
        let bins = 128;
        let freq: Vec<f64> = (0..bins).map(|m| m as f64).collect();
        let power = vec![0.25; bins];
        let s = spectral_from_psd(&freq, &power).unwrap();
        assert_relative_eq!(s.entropy, (bins as f64).log2(), epsilon = 1e-9);
        assert_relative_eq!(s.flatness, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.bandwidth_3db, freq[bins - 1], epsilon = 1e-12);
    }

    #[test]
    fn impulse_has_flat_hann_psd() {
        // Hann-windowed impulse at the segment center -> constant |FFT|^2
        let n = 256;
        let mut x = vec![0.0; n];
        x[n / 2] = 1.0;
        let (freq, power) = psd_raw(&x, 1.0).unwrap();
        let s = spectral_from_psd(&freq, &power).unwrap();
        assert_relative_eq!(s.entropy, ((n / 2) as f64).log2(), epsilon = 1e-6);
        assert_relative_eq!(s.flatness, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn filtered_noise_rolls_off_earlier_than_white_noise() {
        use crate::channel::{apply_bandwidth_limit, ChannelConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..4096).map(|_| rng.gen::<f64>() - 0.5).collect();
        let white = sig(x);
        let cfg = ChannelConfig {
            omega_n: 0.5,
            taps: 101,
            snr_db: f64::INFINITY,
            seed: 0,
            bandwidth_hz: 0.25, // cutoff 0.5*0.25*2 = 0.25 cycles/sample at fs=1
        };
        let filtered = apply_bandwidth_limit(&white, &cfg).unwrap();
        let sw = spectral_features(white.samples(), 1.0).unwrap();
        let sf = spectral_features(filtered.samples(), 1.0).unwrap();
        assert!(sf.rolloff < sw.rolloff);
    }

    #[test]
    fn impulse_quality_metrics() {
        let n = 64;
        let mut seg = vec![0.0; n];
        seg[n / 2] = 1.0;
        let q = quality_features(&seg, 8).unwrap();
        assert_relative_eq!(q.papr, n as f64, epsilon = 1e-9);
        assert_relative_eq!(q.peak_power, 1.0, epsilon = 1e-12);
        assert_relative_eq!(q.autocorr_lag1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn autocorr_at_zero_lag_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let seg: Vec<f64> = (0..128).map(|_| rng.gen::<f64>() - 0.5).collect();
        assert_relative_eq!(normalized_autocorr(&seg, 0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sinusoid_papr_and_crest() {
        // integer periods per quarter segment
        let n = 1024;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 32.0 * i as f64 / n as f64).cos())
            .collect();
        let f = extract_features(&sig(x), 8).unwrap();
        assert!((f.papr - 2.0).abs() / 2.0 < 0.02, "papr {}", f.papr);
        assert!((f.envelope_crest - 1.0).abs() < 1e-3, "crest {}", f.envelope_crest);
    }

    #[test]
    fn identical_segments_average_to_single_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let quarter: Vec<f64> = (0..200).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut full = Vec::new();
        for _ in 0..4 {
            full.extend_from_slice(&quarter);
        }
        let f = extract_features(&sig(full), 8).unwrap();
        // whole-signal mean removal leaves each quarter identical
        let mean: f64 = quarter.iter().sum::<f64>() / quarter.len() as f64;
        let centered: Vec<f64> = quarter.iter().map(|v| v - mean).collect();
        let env = analytic_envelope_slice(&centered).unwrap();
        let t = time_features_with_env(&centered, &env, 0).unwrap();
        assert_eq!(f.rms, t.rms);
        assert_eq!(f.excess_kurtosis, t.excess_kurtosis);
        let q = quality_features_with_env(&centered, &env, 8, 0).unwrap();
        assert_eq!(f.papr, q.papr);
    }

    #[test]
    fn segment_permutation_leaves_features_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let quarters: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..200).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let build = |order: [usize; 4]| {
            let mut v = Vec::new();
            for k in order {
                v.extend_from_slice(&quarters[k]);
            }
            extract_features(&sig(v), 8).unwrap()
        };
        let a = build([0, 1, 2, 3]);
        let b = build([2, 0, 3, 1]);
        // permuting the segments must not change the average at all
        assert_eq!(a.as_array(), b.as_array());
    }

    #[test]
    fn white_noise_feature_sanity() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..1 << 16).map(|_| normal.sample(&mut rng)).collect();
        let f = extract_features(&sig(x), 12).unwrap();
        assert!(f.excess_kurtosis.abs() < 0.1, "{}", f.excess_kurtosis);
        assert!(f.skewness.abs() < 0.1, "{}", f.skewness);
        assert!(f.spectral_flatness > 0.0 && f.spectral_flatness <= 1.0);
        assert!(f.papr >= 1.0);
        assert!(f.envelope_crest >= 1.0);
        assert!(f.autocorr_symbol.abs() <= 1.0);
        assert!(f.autocorr_lag1.abs() <= 1.0);
    }

    #[test]
    fn amplitude_scaling_behavior() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x: Vec<f64> = (0..2048).map(|_| rng.gen::<f64>() - 0.5).collect();
        let a = 3.7;
        let xs: Vec<f64> = x.iter().map(|v| a * v).collect();
        let f1 = extract_features(&sig(x), 8).unwrap();
        let f2 = extract_features(&sig(xs), 8).unwrap();
        let rel = |u: f64, v: f64| (u - v).abs() / v.abs().max(1e-300);
        // invariants
        assert!(rel(f1.papr, f2.papr) < 1e-9);
        assert!(rel(f1.spectral_flatness, f2.spectral_flatness) < 1e-9);
        assert!(rel(f1.spectral_entropy, f2.spectral_entropy) < 1e-9);
        assert!(rel(f1.spectral_centroid, f2.spectral_centroid) < 1e-9);
        assert!(rel(f1.spectral_spread, f2.spectral_spread) < 1e-9);
        assert_eq!(f1.spectral_rolloff, f2.spectral_rolloff);
        assert_eq!(f1.bandwidth_3db, f2.bandwidth_3db);
        assert!(rel(f1.autocorr_symbol, f2.autocorr_symbol) < 1e-9);
        assert!(rel(f1.autocorr_lag1, f2.autocorr_lag1) < 1e-9);
        assert!(rel(f1.envelope_crest, f2.envelope_crest) < 1e-9);
        assert!(rel(f1.skewness, f2.skewness) < 1e-9);
        assert!(rel(f1.excess_kurtosis, f2.excess_kurtosis) < 1e-9);
        // scale by a
        assert!(rel(a * f1.rms, f2.rms) < 1e-9);
        assert!(rel(a * f1.mean_envelope, f2.mean_envelope) < 1e-9);
        // scale by a^2
        assert!(rel(a * a * f1.variance, f2.variance) < 1e-9);
        assert!(rel(a * a * f1.peak_power, f2.peak_power) < 1e-9);
    }

    #[test]
    fn circular_shift_leaves_spectral_features_nearly_unchanged() {
        // periodic content: spectral features are shift-invariant
        let n = 1024;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                (2.0 * PI * 16.0 * i as f64 / n as f64).sin()
                    + 0.5 * (2.0 * PI * 48.0 * i as f64 / n as f64).cos()
            })
            .collect();
        let mut shifted = x.clone();
        shifted.rotate_left(137);
        let a = spectral_features(&x, 1.0).unwrap();
        let b = spectral_features(&shifted, 1.0).unwrap();
        assert_relative_eq!(a.centroid, b.centroid, max_relative = 1e-6);
        assert_relative_eq!(a.spread, b.spread, max_relative = 1e-6);
        assert_relative_eq!(a.entropy, b.entropy, max_relative = 1e-6);
        assert_eq!(a.rolloff, b.rolloff);
    }

    #[test]
    fn standardizer_contract() {
        let mut s = FeatureStandardizer::new();
        let f1 = FeatureVector::from_array([1.0; 16]);
        let mut arr = [3.0; 16];
        arr[0] = 5.0;
        let f2 = FeatureVector::from_array(arr);
        assert!(s.standardize(&f1).is_err());
        s.accumulate(&f1);
        s.accumulate(&f2);
        s.freeze().unwrap();

        let mean = *s.mean();
        let std = *s.std();
        let at_mean = s.standardize(&FeatureVector::from_array(mean)).unwrap();
        assert!(at_mean.iter().all(|v| v.abs() < 1e-12));

        let mut plus = mean;
        for i in 0..16 {
            plus[i] += std[i];
        }
        let at_plus = s.standardize(&FeatureVector::from_array(plus)).unwrap();
        assert!(at_plus.iter().all(|v| (v - 1.0).abs() < 1e-12));

        // affine map: double application is not idempotent
        let once = s.standardize(&f2).unwrap();
        let twice = s.standardize(&FeatureVector::from_array(once)).unwrap();
        assert_ne!(once, twice);
    }

    #[test]
    fn standardizer_freeze_requires_spread() {
        let mut s = FeatureStandardizer::new();
        let f = FeatureVector::from_array([1.0; 16]);
        s.accumulate(&f);
        assert!(s.freeze().is_err()); // only one sample
        s.accumulate(&f);
        assert!(s.freeze().is_err()); // zero variance
    }

    #[test]
    fn csv_row_has_sixteen_columns_in_order() {
        assert_eq!(FeatureVector::csv_header().split(',').count(), 16);
        let f = FeatureVector::from_array(std::array::from_fn(|i| i as f64));
        let row = f.to_csv_row();
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 16);
        assert!(cols[3].starts_with("3."));
    }
}
