//! Analysis toolkit for two-level-system (TLS) loss, frequency shifts and
//! ringdown in high-Q bulk acoustic resonators.
//!
//! Modules follow the measurement chain: reflection fits of single
//! resonances ([`resonance`]), phenomenological loss models and their joint
//! fits ([`tls_loss`]), the microscopic susceptibility picture
//! ([`tls_micro`]), time-domain ringdown ([`ringdown`]), equivalent-circuit
//! extraction by vector fitting ([`circuit_id`]), amplifier chain
//! calibration ([`calib`]) and synthetic data generation ([`synth`]).

pub mod calib;
pub mod circuit_id;
pub mod consts;
pub mod error;
pub mod fit;
pub mod io;
pub mod ode;
pub mod quad;
pub mod resonance;
pub mod ringdown;
pub mod special;
pub mod synth;
pub mod tls_loss;
pub mod tls_micro;
pub mod units;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
