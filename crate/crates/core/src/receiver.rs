//! Demodulation back-ends: QAM mapping/demapping, matched-filter
//! demodulation, normalized EVM reporting and the conventional-filter
//! fallback selector.

use crate::error::{Error, Result};
use crate::par::fill_indexed;
use crate::signal::{qam_axis_levels, RealSignal, SymbolStream};
use num_complex::Complex64;
use std::fmt;

/// Gray code per axis index (00, 01, 11, 10 for four levels).
fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn bits_per_axis(order: u32) -> usize {
    match order {
        4 => 1,
        16 => 2,
        _ => unreachable!("order validated upstream"),
    }
}

/// Gray-coded square M-QAM mapping onto the unit-average-power alphabet.
///
/// Each symbol consumes `log2(M)` bits, the first half selecting the
/// in-phase level (MSB first), the second half the quadrature level.
pub fn qam_map(bits: &[bool], order: u32) -> Result<SymbolStream> {
    let levels = qam_axis_levels(order)?;
    let bpa = bits_per_axis(order);
    let bps = 2 * bpa;
    if bits.is_empty() || bits.len() % bps != 0 {
        return Err(Error::InvalidParameter(format!(
            "bit count {} is not a positive multiple of {bps}",
            bits.len()
        )));
    }
    // label -> level index, inverting the Gray code
    let mut level_of_label = vec![0usize; levels.len()];
    for (idx, slot) in level_of_label.iter_mut().enumerate() {
        *slot = idx;
    }
    let mut by_label = vec![0usize; levels.len()];
    for (idx, _) in levels.iter().enumerate() {
        by_label[gray(idx)] = idx;
    }
    let axis_value = |chunk: &[bool]| {
        let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        levels[by_label[label]]
    };
    let symbols = bits
        .chunks(bps)
        .map(|c| Complex64::new(axis_value(&c[..bpa]), axis_value(&c[bpa..])))
        .collect();
    SymbolStream::new(symbols, order)
}

/// Nearest-point decision with inverse Gray mapping.
///
/// A value exactly between two levels resolves to the lexicographically
/// smaller bit label.
pub fn qam_demap(symbols: &[Complex64], order: u32) -> Result<Vec<bool>> {
    let levels = qam_axis_levels(order)?;
    let bpa = bits_per_axis(order);
    let decide_axis = |v: f64| -> usize {
        let mut best_label = usize::MAX;
        let mut best_dist = f64::INFINITY;
        for (idx, l) in levels.iter().enumerate() {
            let label = gray(idx);
            let d = (v - l).abs();
            if d < best_dist || (d == best_dist && label < best_label) {
                best_dist = d;
                best_label = label;
            }
        }
        best_label
    };
    let mut bits = Vec::with_capacity(symbols.len() * 2 * bpa);
    for s in symbols {
        for label in [decide_axis(s.re), decide_axis(s.im)] {
            for k in (0..bpa).rev() {
                bits.push((label >> k) & 1 == 1);
            }
        }
    }
    Ok(bits)
}

/// Index of symbol `k`'s sampling instant in full-convolution coordinates.
pub(crate) fn symbol_instant(tau: usize, filter_len: usize, sps: usize, k: usize) -> usize {
    tau + filter_len - 1 + k * sps
}

/// Matched-filter demodulation: `s_I` from the in-phase filter, `s_Q` from
/// the negated quadrature filter, both sampled at the symbol instants
/// `tau + group-delay center + k·sps` of the same-mode filtered signal.
///
/// Outputs keep the raw correlation scale; EVM reporting and bit decisions
/// are gain-invariant, and the training loss learns the scale.
pub fn demodulate(
    rx: &RealSignal,
    p: &[f64],
    p_b: &[f64],
    sps: usize,
    tau: usize,
    k_symbols: usize,
) -> Result<Vec<Complex64>> {
    let l = p.len();
    if l == 0 || l != p_b.len() {
        return Err(Error::ShapeMismatch(format!(
            "filter lengths {l} and {}",
            p_b.len()
        )));
    }
    if k_symbols == 0 {
        return Err(Error::TooShort("no symbols requested".into()));
    }
    let x = rx.samples();
    let last = symbol_instant(tau, l, sps, k_symbols - 1);
    if last >= x.len() {
        return Err(Error::TooShort(format!(
            "rx of {} samples cannot host {k_symbols} symbols at tau={tau} (needs {})",
            x.len(),
            last + 1
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); k_symbols];
    fill_indexed(&mut out, |k| {
        let m = symbol_instant(tau, l, sps, k);
        let window = &x[m + 1 - l..=m];
        // Neumaier-compensated dot products: the training loss differentiates
        // through these samples, so they are kept accurate to ~1 ulp
        let mut si = 0.0;
        let mut si_c = 0.0;
        let mut sq = 0.0;
        let mut sq_c = 0.0;
        for (j, w) in window.iter().rev().enumerate() {
            let a = p[j] * w;
            let t = si + a;
            si_c += if si.abs() >= a.abs() { (si - t) + a } else { (a - t) + si };
            si = t;
            let b = p_b[j] * w;
            let u = sq + b;
            sq_c += if sq.abs() >= b.abs() { (sq - u) + b } else { (b - u) + sq };
            sq = u;
        }
        Complex64::new(si + si_c, -(sq + sq_c))
    });
    Ok(out)
}

/// Picks the intra-symbol timing offset maximizing the mean demodulated
/// magnitude over a pilot frame.
pub fn pick_timing(
    rx: &RealSignal,
    p: &[f64],
    p_b: &[f64],
    sps: usize,
    tau: usize,
    pilot_symbols: usize,
) -> Result<usize> {
    if sps == 0 {
        return Err(Error::InvalidParameter("sps must be positive".into()));
    }
    // one symbol of headroom so every candidate offset fits
    let k = pilot_symbols.max(2) - 1;
    let mut best = 0usize;
    let mut best_mag = f64::NEG_INFINITY;
    for t0 in 0..sps {
        let symbols = demodulate(rx, p, p_b, sps, tau + t0, k)?;
        let mag = symbols.iter().map(|s| s.norm()).sum::<f64>() / k as f64;
        if mag > best_mag {
            best_mag = mag;
            best = t0;
        }
    }
    Ok(best)
}

/// Gain-fitted error vector magnitude in percent.
///
/// Fits the single complex gain minimizing `Σ|g·ŝ − s_ref|²`, then reports
/// `100·sqrt(Σ|g·ŝ − s_ref|² / Σ|s_ref|²)`.
pub fn evm_percent(received: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if received.len() != reference.len() || received.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} received vs {} reference symbols",
            received.len(),
            reference.len()
        )));
    }
    let ref_power: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if ref_power == 0.0 {
        return Err(Error::ZeroPower("reference symbols have zero power"));
    }
    let rx_power: f64 = received.iter().map(|s| s.norm_sqr()).sum();
    let gain = if rx_power > 0.0 {
        received
            .iter()
            .zip(reference)
            .map(|(r, s)| s * r.conj())
            .sum::<Complex64>()
            / rx_power
    } else {
        Complex64::new(0.0, 0.0)
    };
    let err: f64 = received
        .iter()
        .zip(reference)
        .map(|(r, s)| (gain * r - s).norm_sqr())
        .sum();
    Ok(100.0 * (err / ref_power).sqrt())
}

/// Which demodulator the system ends up using.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Conventional,
    Nn,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Conventional => write!(f, "conventional"),
            Selection::Nn => write!(f, "nn"),
        }
    }
}

/// The learned receiver is used only when it strictly wins; ties fall back
/// to the conventional matched filter.
pub fn select_receiver(evm_nn_pct: f64, evm_conventional_pct: f64) -> Selection {
    if evm_nn_pct < evm_conventional_pct {
        Selection::Nn
    } else {
        Selection::Conventional
    }
}

/// Per-condition EVM outcome for both receivers plus the fallback decision.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmReport {
    pub omega_n: f64,
    pub power_dbm: Option<f64>,
    pub snr_db: f64,
    pub evm_conventional_pct: f64,
    pub evm_nn_pct: f64,
    pub selected: Selection,
    pub correction_norm_ratio: f64,
}

impl EvmReport {
    pub fn csv_header() -> &'static str {
        "omega_n,power_dbm,snr_db,evm_conv_pct,evm_nn_pct,selected,correction_norm_ratio"
    }

    pub fn to_csv_row(&self) -> String {
        let power = self
            .power_dbm
            .map(|p| format!("{p:.4}"))
            .unwrap_or_default();
        format!(
            "{},{},{:.4},{:.6},{:.6},{},{:.6}",
            self.omega_n,
            power,
            self.snr_db,
            self.evm_conventional_pct,
            self.evm_nn_pct,
            self.selected,
            self.correction_norm_ratio
        )
    }

    /// EVM of the receiver the selector picked.
    pub fn system_evm_pct(&self) -> f64 {
        match self.selected {
            Selection::Conventional => self.evm_conventional_pct,
            Selection::Nn => self.evm_nn_pct,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qam4_constellation_points() {
        let s = 1.0 / 2f64.sqrt();
        let stream = qam_map(&[false, false, false, true, true, false, true, true], 4).unwrap();
        let pts = stream.symbols();
        assert_relative_eq!(pts[0].re, -s, epsilon = 1e-12);
        assert_relative_eq!(pts[0].im, -s, epsilon = 1e-12);
        assert_relative_eq!(pts[1].re, -s, epsilon = 1e-12);
        assert_relative_eq!(pts[1].im, s, epsilon = 1e-12);
        assert_relative_eq!(pts[2].re, s, epsilon = 1e-12);
        assert_relative_eq!(pts[2].im, -s, epsilon = 1e-12);
        assert_relative_eq!(pts[3].re, s, epsilon = 1e-12);
        assert_relative_eq!(pts[3].im, s, epsilon = 1e-12);
    }

    #[test]
    fn alphabet_has_unit_average_power() {
        for order in [4u32, 16] {
            let bpa = bits_per_axis(order);
            let bps = 2 * bpa;
            let count = 1usize << bps;
            let mut bits = Vec::new();
            for v in 0..count {
                for k in (0..bps).rev() {
                    bits.push((v >> k) & 1 == 1);
                }
            }
            let stream = qam_map(&bits, order).unwrap();
            let power: f64 =
                stream.symbols().iter().map(|s| s.norm_sqr()).sum::<f64>() / count as f64;
            assert_relative_eq!(power, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gray_labels_differ_in_one_bit_between_adjacent_levels() {
        for side in [2usize, 4] {
            for i in 0..side - 1 {
                let diff = gray(i) ^ gray(i + 1);
                assert_eq!(diff.count_ones(), 1);
            }
        }
    }

    #[test]
    fn map_demap_roundtrip_is_exhaustive() {
        for order in [4u32, 16] {
            let bps = 2 * bits_per_axis(order);
            for len in (bps..=16).step_by(bps) {
                for v in 0..(1usize << len) {
                    let bits: Vec<bool> = (0..len).rev().map(|k| (v >> k) & 1 == 1).collect();
                    let stream = qam_map(&bits, order).unwrap();
                    let back = qam_demap(stream.symbols(), order).unwrap();
                    assert_eq!(bits, back, "order {order} len {len} value {v}");
                }
            }
        }
    }

    #[test]
    fn demap_tie_breaks_toward_smaller_label() {
        // midpoint of the two 4-QAM levels is zero
        let bits = qam_demap(&[Complex64::new(0.0, 0.0)], 4).unwrap();
        assert_eq!(bits, vec![false, false]);

        // 16-QAM: midpoint between levels +1 and +3 (labels 11 and 10)
        let levels = qam_axis_levels(16).unwrap();
        let mid = 0.5 * (levels[2] + levels[3]);
        let bits = qam_demap(&[Complex64::new(mid, levels[0])], 16).unwrap();
        assert_eq!(&bits[..2], &[true, false]); // label 10 beats 11
    }

    #[test]
    fn demap_covers_the_whole_plane() {
        let far = [
            Complex64::new(1e6, -1e6),
            Complex64::new(-3.0, 0.1),
            Complex64::new(f64::MIN_POSITIVE, 0.0),
        ];
        for order in [4u32, 16] {
            let bits = qam_demap(&far, order).unwrap();
            assert_eq!(bits.len(), far.len() * 2 * bits_per_axis(order));
        }
    }

    #[test]
    fn evm_is_invariant_to_complex_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reference: Vec<Complex64> = (0..512)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        for phi in [0.0, 0.7, 2.4] {
            let g = 2.7 * Complex64::new(0.0, phi).exp();
            let scaled: Vec<Complex64> = reference.iter().map(|s| g * s).collect();
            let evm = evm_percent(&scaled, &reference).unwrap();
            assert!(evm < 1e-9, "phi={phi}: {evm}");
        }
    }

    #[test]
    fn evm_of_uniform_offset_is_ten_percent() {
        // zero-mean unit-power reference with a 0.1-magnitude constant offset
        let s = 1.0 / 2f64.sqrt();
        let mut reference = Vec::new();
        for _ in 0..256 {
            reference.push(Complex64::new(s, s));
            reference.push(Complex64::new(-s, -s));
        }
        let received: Vec<Complex64> =
            reference.iter().map(|v| v + Complex64::new(0.1, 0.0)).collect();
        let evm = evm_percent(&received, &reference).unwrap();
        assert!((evm - 10.0).abs() < 0.1, "evm {evm}");
    }

    #[test]
    fn evm_of_uncorrelated_symbols_is_near_hundred() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reference: Vec<Complex64> = (0..4096)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let received: Vec<Complex64> = (0..4096)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let evm = evm_percent(&received, &reference).unwrap();
        assert!((evm - 100.0).abs() < 5.0, "evm {evm}");
    }

    #[test]
    fn selector_prefers_conventional_on_ties() {
        assert_eq!(select_receiver(20.0, 30.0), Selection::Nn);
        assert_eq!(select_receiver(30.0, 20.0), Selection::Conventional);
        assert_eq!(select_receiver(25.0, 25.0), Selection::Conventional);
    }

    #[test]
    fn report_row_has_seven_columns() {
        let report = EvmReport {
            omega_n: 0.5,
            power_dbm: None,
            snr_db: 25.0,
            evm_conventional_pct: 40.0,
            evm_nn_pct: 20.0,
            selected: Selection::Nn,
            correction_norm_ratio: 0.3,
        };
        assert_eq!(EvmReport::csv_header().split(',').count(), 7);
        assert_eq!(report.to_csv_row().split(',').count(), 7);
        assert_eq!(report.system_evm_pct(), 20.0);
    }
}
