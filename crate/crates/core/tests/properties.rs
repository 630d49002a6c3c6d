//! Property tests over the spec-level invariants.

use dmf_core::dsp::{cap_modulate, normalize_unit_power, SystemParams};
use dmf_core::features::spectral_from_psd;
use dmf_core::neural::deform_filters;
use dmf_core::receiver::{evm_percent, qam_demap, qam_map};
use num_complex::Complex64;
use proptest::prelude::*;

fn tiny_pair() -> dmf_core::dsp::CapFilterPair {
    SystemParams {
        sample_rate_hz: 1e6,
        bandwidth_hz: 4e5,
        carrier_hz: 2e5,
        rolloff: 0.25,
        span_symbols: 8,
        samples_per_symbol: 4,
        filter_length: 31,
    }
    .nominal_pair()
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modulation_is_linear(
        a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..24),
        b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..24),
    ) {
        let n = a.len().min(b.len());
        let pair = tiny_pair();
        let to_c = |v: &[(f64, f64)]| -> Vec<Complex64> {
            v.iter().take(n).map(|&(re, im)| Complex64::new(re, im)).collect()
        };
        let sa = to_c(&a);
        let sb = to_c(&b);
        let sum: Vec<Complex64> = sa.iter().zip(&sb).map(|(x, y)| x + y).collect();
        let xa = cap_modulate(&sa, &pair).unwrap();
        let xb = cap_modulate(&sb, &pair).unwrap();
        let xs = cap_modulate(&sum, &pair).unwrap();
        for ((u, v), w) in xa.samples().iter().zip(xb.samples()).zip(xs.samples()) {
            prop_assert!((u + v - w).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_is_idempotent(
        samples in proptest::collection::vec(-100.0f64..100.0, 8..512),
    ) {
        prop_assume!(samples.iter().any(|&v| v != 0.0));
        let signal = dmf_core::RealSignal::new(samples, 1.0).unwrap();
        let once = normalize_unit_power(&signal).unwrap();
        prop_assert!((once.mean_power() - 1.0).abs() < 1e-12);
        let twice = normalize_unit_power(&once).unwrap();
        for (x, y) in once.samples().iter().zip(twice.samples()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_entropy_stays_in_bounds(
        power in proptest::collection::vec(0.0f64..10.0, 4..256),
    ) {
        prop_assume!(power.iter().sum::<f64>() > 0.0);
        let freq: Vec<f64> = (0..power.len()).map(|m| m as f64).collect();
        let s = spectral_from_psd(&freq, &power).unwrap();
        let bound = (power.len() as f64).log2();
        prop_assert!(s.entropy >= 0.0 && s.entropy <= bound + 1e-9);
        prop_assert!(s.flatness >= 0.0 && s.flatness <= 1.0 + 1e-12);
    }

    #[test]
    fn qam_roundtrip_random_bits(seed in any::<u64>(), order in prop_oneof![Just(4u32), Just(16u32)]) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let bps = if order == 4 { 2 } else { 4 };
        let bits: Vec<bool> = (0..bps * 64).map(|_| rng.gen()).collect();
        let stream = qam_map(&bits, order).unwrap();
        prop_assert_eq!(qam_demap(stream.symbols(), order).unwrap(), bits);
    }

    #[test]
    fn evm_ignores_complex_gain(
        symbols in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8..128),
        mag in 0.1f64..5.0,
        phase in 0.0f64..6.28,
    ) {
        let reference: Vec<Complex64> = symbols
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        prop_assume!(reference.iter().map(|s| s.norm_sqr()).sum::<f64>() > 1e-6);
        let g = mag * Complex64::new(0.0, phase).exp();
        let scaled: Vec<Complex64> = reference.iter().map(|s| g * s).collect();
        prop_assert!(evm_percent(&scaled, &reference).unwrap() < 1e-9);
    }

    #[test]
    fn deformation_conserves_energy(
        correction in proptest::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 31),
    ) {
        let pair = tiny_pair();
        let delta: Vec<Complex64> = correction
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        let deformed = deform_filters(&pair, &delta).unwrap();
        let energy: f64 = deformed.p.iter().chain(&deformed.p_b).map(|v| v * v).sum();
        prop_assert!((energy - pair.combined_energy()).abs() / pair.combined_energy() < 1e-9);
    }
}
