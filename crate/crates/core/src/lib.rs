//! Carrier-less amplitude/phase (CAP) modem simulator with a deformable
//! matched-filter receiver.
//!
//! The crate covers the full digital chain: square-root raised cosine pulse
//! shaping, CAP modulation onto an orthogonal filter pair, a bandwidth-limited
//! AWGN channel model, a 16-feature channel-state extractor, a two-layer
//! residual MLP that predicts complex corrections to the matched-filter pair,
//! analytic backpropagation through the receiver, and EVM-based reporting
//! with a conventional-filter fallback.
//!
//! All operations are pure functions of their inputs. Data-parallel inner
//! loops run on rayon when the `parallel` feature (default) is enabled and
//! fall back to sequential execution otherwise; results are bit-identical in
//! both modes.

pub mod channel;
pub mod dsp;
pub mod error;
pub mod features;
pub mod neural;
pub mod receiver;
pub mod signal;

mod fft;
mod par;

pub use error::{Error, Result};
pub use signal::{ComplexSignal, RealSignal, SymbolStream};
