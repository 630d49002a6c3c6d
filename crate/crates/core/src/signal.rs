//! Sampled-waveform and symbol-stream containers.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// A real-valued sampled waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl RealSignal {
    /// Validates finiteness, non-emptiness and a positive sample rate.
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooShort("signal must hold at least one sample".into()));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {i} of real signal")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Internal constructor for samples already known to be finite.
    pub(crate) fn from_valid(samples: Vec<f64>, sample_rate_hz: f64) -> Self {
        debug_assert!(!samples.is_empty());
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power (1/N)·Σx².
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }
}

/// A complex-valued sampled waveform (e.g. the analytic signal).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooShort("signal must hold at least one sample".into()));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite(format!("sample {i} of complex signal")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub(crate) fn from_valid(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-axis amplitude levels of the unit-average-power square M-QAM alphabet.
///
/// Levels are the odd integers ±1, ±3, … scaled so the complex constellation
/// has unit mean power.
pub fn qam_axis_levels(modulation_order: u32) -> Result<Vec<f64>> {
    let side = match modulation_order {
        4 => 2usize,
        16 => 4usize,
        m => {
            return Err(Error::InvalidParameter(format!(
                "modulation order must be 4 or 16, got {m}"
            )))
        }
    };
    // E[I^2] = (side^2 - 1)/3 for odd-integer levels; complex power doubles it.
    let scale = (2.0 * (side * side - 1) as f64 / 3.0).sqrt();
    Ok((0..side)
        .map(|i| (2.0 * i as f64 - (side - 1) as f64) / scale)
        .collect())
}

/// A block of mapped QAM symbols.
///
/// Invariant: every symbol is a member of the unit-average-power M-QAM
/// alphabet, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    symbols: Vec<Complex64>,
    modulation_order: u32,
}

impl SymbolStream {
    pub fn new(symbols: Vec<Complex64>, modulation_order: u32) -> Result<Self> {
        let levels = qam_axis_levels(modulation_order)?;
        let on_axis = |v: f64| levels.iter().any(|l| (l - v).abs() < 1e-9);
        if let Some(i) = symbols
            .iter()
            .position(|s| !on_axis(s.re) || !on_axis(s.im))
        {
            return Err(Error::InvalidParameter(format!(
                "symbol {i} is not a point of the {modulation_order}-QAM alphabet"
            )));
        }
        Ok(Self {
            symbols,
            modulation_order,
        })
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn modulation_order(&self) -> u32 {
        self.modulation_order
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}
