//! Simulator and exact analysis for a round-trip QKD protocol that encodes
//! phase differences in the detection time of a time-binned polarization
//! qudit.
//!
//! The state and optics layers are generic over the scalar type
//! ([`Scalar`]: `f32` or `f64`). Sampling, the protocol layer and the run
//! harness work in `f64`; the aliases below name the `f64` instantiations.

pub mod channel;
pub mod closed_form;
pub mod error;
pub mod harness;
pub mod optics;
pub mod oracle;
pub mod protocol;
pub mod qudit;
pub mod rng;
pub mod scalar;
pub mod simulation;

pub use error::{QkdError, Result};
pub use scalar::Scalar;

/// Double-precision qudit.
pub type State = qudit::TimeBinnedState<f64>;
pub type Jones = qudit::JonesVector<f64>;
pub type JonesMat = qudit::JonesMatrix<f64>;
pub type Amplitudes = optics::DetectorAmplitudes<f64>;
pub type Table = oracle::DecisionTable<f64>;
pub type Distribution = oracle::OutcomeDistribution<f64>;
pub type ExactOracle = oracle::Oracle<f64>;

/// Single-precision qudit.
pub type StateF32 = qudit::TimeBinnedState<f32>;
pub type ExactOracleF32 = oracle::Oracle<f32>;
