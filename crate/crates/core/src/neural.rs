//! Two-layer residual MLP mapping standardized features to complex
//! matched-filter corrections, the energy-conserving filter deformation, the
//! EVM + smoothness training loss, analytic backpropagation through the whole
//! receiver chain, and Adam.

use crate::dsp::CapFilterPair;
use crate::error::{Error, Result};
use crate::features::FEATURE_COUNT;
use crate::par::fill_indexed;
use crate::receiver::{demodulate, symbol_instant};
use crate::signal::RealSignal;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest power of two that is >= the filter length.
pub fn hidden_dim(filter_len: usize) -> usize {
    filter_len.next_power_of_two()
}

/// Trainable weights of the correction network.
///
/// Layout is row-major: `w1` is `H x 16`, `w2` is `2L x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    hidden_dim: usize,
    filter_len: usize,
}

impl MlpParams {
    pub fn zeros(filter_len: usize) -> Self {
        let h = hidden_dim(filter_len);
        Self {
            w1: vec![0.0; h * FEATURE_COUNT],
            b1: vec![0.0; h],
            w2: vec![0.0; 2 * filter_len * h],
            b2: vec![0.0; 2 * filter_len],
            hidden_dim: h,
            filter_len,
        }
    }

    /// He-uniform first layer, uniform output layer scaled by `output_gain`,
    /// zero biases.
    pub fn random_init(filter_len: usize, seed: u64, output_gain: f64) -> Self {
        let mut params = Self::zeros(filter_len);
        let h = params.hidden_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim1 = (6.0 / FEATURE_COUNT as f64).sqrt();
        for w in &mut params.w1 {
            *w = rng.gen_range(-lim1..lim1);
        }
        let lim2 = output_gain * (6.0 / h as f64).sqrt();
        if lim2 > 0.0 {
            for w in &mut params.w2 {
                *w = rng.gen_range(-lim2..lim2);
            }
        }
        params
    }

    /// Training start point: the output layer is scaled down so the initial
    /// correction is negligible and the receiver starts at the conventional
    /// matched filter.
    pub fn residual_init(filter_len: usize, seed: u64) -> Self {
        Self::random_init(filter_len, seed, 1e-3)
    }

    /// Clears `w2` and `b2`, forcing a zero correction for any input.
    pub fn zero_output_layer(&mut self) {
        self.w2.iter_mut().for_each(|w| *w = 0.0);
        self.b2.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    /// `16H + H + 2LH + 2L`.
    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn assert_same_shape(&self, other: &Self) -> Result<()> {
        if self.hidden_dim != other.hidden_dim || self.filter_len != other.filter_len {
            return Err(Error::ShapeMismatch(format!(
                "params (L={}, H={}) vs (L={}, H={})",
                self.filter_len, self.hidden_dim, other.filter_len, other.hidden_dim
            )));
        }
        Ok(())
    }
}

/// Pre-activations, hidden activations and raw output of one forward pass.
struct ForwardState {
    z1: Vec<f64>,
    h: Vec<f64>,
    y: Vec<f64>,
}

fn forward_full(params: &MlpParams, f_std: &[f64]) -> ForwardState {
    let hdim = params.hidden_dim;
    let out_dim = 2 * params.filter_len;
    let mut z1 = vec![0.0; hdim];
    for i in 0..hdim {
        let row = &params.w1[i * FEATURE_COUNT..(i + 1) * FEATURE_COUNT];
        let mut acc = params.b1[i];
        for (w, f) in row.iter().zip(f_std) {
            acc += w * f;
        }
        z1[i] = acc;
    }
    let h: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
    let mut y = vec![0.0; out_dim];
    fill_indexed(&mut y, |l| {
        let row = &params.w2[l * hdim..(l + 1) * hdim];
        let mut acc = params.b2[l];
        for (w, hv) in row.iter().zip(&h) {
            acc += w * hv;
        }
        acc
    });
    ForwardState { z1, h, y }
}

/// `h = ReLU(W1 f + b1)`, `y = W2 h + b2`, recombined as
/// `Δh[l] = y[l] + j·y[L+l]`.
pub fn forward(params: &MlpParams, f_std: &[f64]) -> Result<Vec<Complex64>> {
    if f_std.len() != FEATURE_COUNT {
        return Err(Error::ShapeMismatch(format!(
            "feature vector has {} entries, expected {FEATURE_COUNT}",
            f_std.len()
        )));
    }
    let l = params.filter_len;
    let state = forward_full(params, f_std);
    Ok((0..l)
        .map(|i| Complex64::new(state.y[i], state.y[l + i]))
        .collect())
}

/// Matched filters after applying a correction, rescaled so the pair's
/// combined energy matches the nominal pair exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedFilterPair {
    pub p: Vec<f64>,
    pub p_b: Vec<f64>,
    pub correction_norm: f64,
}

/// Raw deformation quantities shared by the forward pass and the adjoint.
struct Deformation {
    raw_p: Vec<f64>,
    raw_pb: Vec<f64>,
    energy_nominal: f64,
    energy_raw: f64,
    scale: f64,
}

fn deform_core(nominal: &CapFilterPair, delta: &[Complex64]) -> Result<Deformation> {
    let l = nominal.len();
    if delta.len() != l {
        return Err(Error::ShapeMismatch(format!(
            "correction of length {} vs filter length {l}",
            delta.len()
        )));
    }
    let (q, r) = nominal.matched_taps();
    let raw_p: Vec<f64> = q.iter().zip(delta).map(|(v, d)| v + d.re).collect();
    let raw_pb: Vec<f64> = r.iter().zip(delta).map(|(v, d)| v + d.im).collect();
    // both energies via the same compensated summation so a zero correction
    // gives scale == 1 bit-exactly and the scale stays accurate to ~1 ulp
    let energy_of = |a: &[f64], b: &[f64]| -> f64 {
        compensated_sum(a.iter().chain(b).map(|v| v * v))
    };
    let energy_nominal = energy_of(&q, &r);
    let energy_raw = energy_of(&raw_p, &raw_pb);
    if energy_raw == 0.0 {
        return Err(Error::ZeroEnergyPair);
    }
    let scale = (energy_nominal / energy_raw).sqrt();
    Ok(Deformation {
        raw_p,
        raw_pb,
        energy_nominal,
        energy_raw,
        scale,
    })
}

/// `p̂ = scale·(p[-l] + Re Δh)`, `p̂_b = scale·(p_b[-l] + Im Δh)` with the
/// scale chosen to conserve the nominal pair's combined energy.
pub fn deform_filters(
    nominal: &CapFilterPair,
    delta: &[Complex64],
) -> Result<DeformedFilterPair> {
    let d = deform_core(nominal, delta)?;
    let correction_norm = delta.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(DeformedFilterPair {
        p: d.raw_p.iter().map(|v| d.scale * v).collect(),
        p_b: d.raw_pb.iter().map(|v| d.scale * v).collect(),
        correction_norm,
    })
}

/// Neumaier-compensated sum; keeps the loss reproducible enough for
/// finite-difference verification.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean squared symbol error `(1/K)·Σ|ŝ - s|²`.
pub fn evm_loss(received: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if received.len() != reference.len() || received.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} received vs {} reference symbols",
            received.len(),
            reference.len()
        )));
    }
    let k = received.len() as f64;
    Ok(compensated_sum(
        received
            .iter()
            .zip(reference)
            .map(|(r, s)| (r - s).norm_sqr()),
    ) / k)
}

fn smoothness_of(p: &[f64], p_b: &[f64]) -> (f64, f64) {
    let first = compensated_sum(
        p.windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .chain(p_b.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0]))),
    );
    let curve = |w: &[f64]| {
        let e = w[2] - 2.0 * w[1] + w[0];
        e * e
    };
    let second = compensated_sum(p.windows(3).map(curve).chain(p_b.windows(3).map(curve)));
    (first, second)
}

/// First- and second-difference energies summed over both filters.
pub fn smoothness_losses(pair: &DeformedFilterPair) -> Result<(f64, f64)> {
    if pair.p.len() < 3 {
        return Err(Error::TooShort(format!(
            "smoothness terms need >= 3 taps, got {}",
            pair.p.len()
        )));
    }
    Ok(smoothness_of(&pair.p, &pair.p_b))
}

/// Training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lambda_s1: f64,
    pub lambda_s2: f64,
    pub epochs: usize,
    pub symbols_per_epoch: usize,
    pub standardizer_warmup: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lambda_s1: 1e-3,
            lambda_s2: 1e-4,
            epochs: 1000,
            symbols_per_epoch: 10_000,
            standardizer_warmup: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::InvalidParameter(
                "beta1 and beta2 must be below 1".into(),
            ));
        }
        if self.lambda_s1 < 0.0 || self.lambda_s2 < 0.0 {
            return Err(Error::InvalidParameter(
                "smoothness weights must be nonnegative".into(),
            ));
        }
        if self.epochs == 0 || self.symbols_per_epoch == 0 {
            return Err(Error::InvalidParameter(
                "epochs and symbols_per_epoch must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `evm + λ_s1·s1 + λ_s2·s2`.
pub fn total_loss(evm: f64, s1: f64, s2: f64, cfg: &TrainConfig) -> f64 {
    evm + cfg.lambda_s1 * s1 + cfg.lambda_s2 * s2
}

/// Loss terms of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub evm: f64,
    pub s1: f64,
    pub s2: f64,
}

/// Evaluates the full training loss for the given parameters: forward,
/// deformation, matched-filter demodulation at `(sps, tau)` and the weighted
/// loss of the resulting symbols.
#[allow(clippy::too_many_arguments)]
pub fn chain_loss(
    params: &MlpParams,
    f_std: &[f64],
    nominal: &CapFilterPair,
    rx: &RealSignal,
    reference: &[Complex64],
    sps: usize,
    tau: usize,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let delta = forward(params, f_std)?;
    let pair = deform_filters(nominal, &delta)?;
    let symbols = demodulate(rx, &pair.p, &pair.p_b, sps, tau, reference.len())?;
    let evm = evm_loss(&symbols, reference)?;
    let (s1, s2) = smoothness_losses(&pair)?;
    Ok(LossBreakdown {
        total: total_loss(evm, s1, s2, cfg),
        evm,
        s1,
        s2,
    })
}

/// Exact analytic gradient of the total loss with respect to every network
/// parameter, propagated through the output split, the energy-normalized
/// deformation, the receive convolution, symbol-rate sampling and the loss
/// terms. Returns the same loss values as [`chain_loss`].
#[allow(clippy::too_many_arguments)]
pub fn backward(
    params: &MlpParams,
    f_std: &[f64],
    nominal: &CapFilterPair,
    rx: &RealSignal,
    reference: &[Complex64],
    sps: usize,
    tau: usize,
    cfg: &TrainConfig,
) -> Result<(MlpParams, LossBreakdown)> {
    if f_std.len() != FEATURE_COUNT {
        return Err(Error::ShapeMismatch(format!(
            "feature vector has {} entries, expected {FEATURE_COUNT}",
            f_std.len()
        )));
    }
    let l = params.filter_len;
    let hdim = params.hidden_dim;
    let k_count = reference.len();

    let state = forward_full(params, f_std);
    let delta: Vec<Complex64> = (0..l)
        .map(|i| Complex64::new(state.y[i], state.y[l + i]))
        .collect();
    let d = deform_core(nominal, &delta)?;
    let p_hat: Vec<f64> = d.raw_p.iter().map(|v| d.scale * v).collect();
    let p_hat_b: Vec<f64> = d.raw_pb.iter().map(|v| d.scale * v).collect();

    let symbols = demodulate(rx, &p_hat, &p_hat_b, sps, tau, k_count)?;
    let evm = evm_loss(&symbols, reference)?;
    let (s1, s2) = smoothness_of(&p_hat, &p_hat_b);
    let loss = LossBreakdown {
        total: total_loss(evm, s1, s2, cfg),
        evm,
        s1,
        s2,
    };

    // dL/ds for the mean squared symbol error
    let inv_k = 2.0 / k_count as f64;
    let g_re: Vec<f64> = symbols
        .iter()
        .zip(reference)
        .map(|(r, s)| inv_k * (r.re - s.re))
        .collect();
    let g_im: Vec<f64> = symbols
        .iter()
        .zip(reference)
        .map(|(r, s)| inv_k * (r.im - s.im))
        .collect();

    // adjoint of the sampled convolution: correlate symbol gradients with rx
    let x = rx.samples();
    let mut evm_gp = vec![0.0f64; l];
    let mut evm_gpb = vec![0.0f64; l];
    fill_indexed(&mut evm_gp, |j| {
        let base = symbol_instant(tau, l, sps, 0) - j;
        let mut acc = 0.0;
        for (k, g) in g_re.iter().enumerate() {
            acc += g * x[base + k * sps];
        }
        acc
    });
    // s_Q is the negated quadrature convolution
    fill_indexed(&mut evm_gpb, |j| {
        let base = symbol_instant(tau, l, sps, 0) - j;
        let mut acc = 0.0;
        for (k, g) in g_im.iter().enumerate() {
            acc += g * x[base + k * sps];
        }
        -acc
    });

    // smoothness gradients on the post-normalization taps
    let smooth_grad = |taps: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let n = taps.len();
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        let diff = |i: usize| taps[i] - taps[i - 1];
        let curv = |i: usize| taps[i] - 2.0 * taps[i - 1] + taps[i - 2];
        for j in 0..n {
            let mut acc = 0.0;
            if j >= 1 {
                acc += diff(j);
            }
            if j + 1 < n {
                acc -= diff(j + 1);
            }
            g1[j] = 2.0 * acc;

            let mut acc2 = 0.0;
            if j >= 2 {
                acc2 += curv(j);
            }
            if j + 1 < n && j >= 1 {
                acc2 -= 2.0 * curv(j + 1);
            }
            if j + 2 < n {
                acc2 += curv(j + 2);
            }
            g2[j] = 2.0 * acc2;
        }
        (g1, g2)
    };
    let (s1_gp, s2_gp) = smooth_grad(&p_hat);
    let (s1_gpb, s2_gpb) = smooth_grad(&p_hat_b);

    // total gradient w.r.t. the normalized taps
    let gp_hat: Vec<f64> = (0..l)
        .map(|j| evm_gp[j] + cfg.lambda_s1 * s1_gp[j] + cfg.lambda_s2 * s2_gp[j])
        .collect();
    let gpb_hat: Vec<f64> = (0..l)
        .map(|j| evm_gpb[j] + cfg.lambda_s1 * s1_gpb[j] + cfg.lambda_s2 * s2_gpb[j])
        .collect();

    // energy-normalization Jacobian: p̂ = c·a with c = sqrt(E0/E(a,b)), so
    // dL/da = c·dL/dp̂ − (c·S/E)·a where S = <dL/dp̂, a> + <dL/dp̂_b, b>
    let s_proj: f64 = gp_hat
        .iter()
        .zip(&d.raw_p)
        .map(|(g, a)| g * a)
        .chain(gpb_hat.iter().zip(&d.raw_pb).map(|(g, b)| g * b))
        .sum();
    let coef = d.scale * s_proj / d.energy_raw;
    let mut g_y = vec![0.0f64; 2 * l];
    for j in 0..l {
        g_y[j] = d.scale * gp_hat[j] - coef * d.raw_p[j];
        g_y[l + j] = d.scale * gpb_hat[j] - coef * d.raw_pb[j];
    }

    // back through the linear layers
    let mut grads = MlpParams::zeros(l);
    grads.b2.copy_from_slice(&g_y);
    fill_indexed(&mut grads.w2, |idx| {
        let (row, col) = (idx / hdim, idx % hdim);
        g_y[row] * state.h[col]
    });
    let mut g_h = vec![0.0f64; hdim];
    fill_indexed(&mut g_h, |i| {
        let mut acc = 0.0;
        for (row, g) in g_y.iter().enumerate() {
            acc += params.w2[row * hdim + i] * g;
        }
        acc
    });
    let g_z1: Vec<f64> = g_h
        .iter()
        .zip(&state.z1)
        .map(|(g, &z)| if z > 0.0 { *g } else { 0.0 })
        .collect();
    grads.b1.copy_from_slice(&g_z1);
    for i in 0..hdim {
        for (j, f) in f_std.iter().enumerate() {
            grads.w1[i * FEATURE_COUNT + j] = g_z1[i] * f;
        }
    }
    let _ = d.energy_nominal; // retained for clarity of the scale definition
    Ok((grads, loss))
}

/// First/second-moment accumulators and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(filter_len: usize) -> Self {
        Self {
            m: MlpParams::zeros(filter_len),
            v: MlpParams::zeros(filter_len),
            t: 0,
        }
    }
}

fn adam_update_block(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &TrainConfig,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Standard bias-corrected Adam update.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    params.assert_same_shape(grads)?;
    params.assert_same_shape(&state.m)?;
    state.t += 1;
    let bias1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(state.t as i32);
    adam_update_block(
        &mut params.w1,
        &grads.w1,
        &mut state.m.w1,
        &mut state.v.w1,
        cfg,
        bias1,
        bias2,
    );
    adam_update_block(
        &mut params.b1,
        &grads.b1,
        &mut state.m.b1,
        &mut state.v.b1,
        cfg,
        bias1,
        bias2,
    );
    adam_update_block(
        &mut params.w2,
        &grads.w2,
        &mut state.m.w2,
        &mut state.v.w2,
        cfg,
        bias1,
        bias2,
    );
    adam_update_block(
        &mut params.b2,
        &grads.b2,
        &mut state.m.b2,
        &mut state.v.b2,
        cfg,
        bias1,
        bias2,
    );
    Ok(())
}
