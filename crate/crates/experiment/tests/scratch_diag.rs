//! temporary diagnostic - removed before ship
use dmf_experiment::config::{ExperimentConfig, PowerAxis, Profile};
use dmf_experiment::harness::{derive_seed, generate_frame, ChainContext};
use dmf_core::neural::evm_loss;
use dmf_core::receiver::{demodulate, evm_percent};
use num_complex::Complex64;

#[test]
fn probe_conventional_gain_and_loss() {
    let mut cfg = ExperimentConfig::for_profile(Profile::Paper);
    cfg.power_axis = PowerAxis::SnrDb(vec![25.0]);
    let ctx = ChainContext::new(&cfg).unwrap();
    for omega in [0.5, 0.65, 0.9] {
        let frame = generate_frame(
            &cfg, &ctx, omega, 25.0, 10_000,
            derive_seed(7, 3, 0), derive_seed(7, 4, 0),
        )
        .unwrap();
        let s = demodulate(
            &frame.rx, &ctx.matched_p, &ctx.matched_pb,
            cfg.system.samples_per_symbol, 0, frame.reference.len(),
        )
        .unwrap();
        let rxp: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        let g: Complex64 = s
            .iter()
            .zip(&frame.reference)
            .map(|(r, sr)| sr * r.conj())
            .sum::<Complex64>()
            / rxp;
        let loss = evm_loss(&s, &frame.reference).unwrap();
        let evm = evm_percent(&s, &frame.reference).unwrap();
        // decompose: loss = |1-1/g... instead report power ratio and fit residual
        println!(
            "omega {omega}: conv demod gain-fit g = {:.4}+{:.4}j (|g|={:.4}), eq24 loss {:.4}, fitted EVM {:.2}%",
            g.re, g.im, g.norm(), loss, evm
        );
    }
}
