//! Predictive runtime monitoring for sampled black-box dynamical systems.
//!
//! The monitor keeps the latest `l + 1` evenly spaced samples, estimates the
//! first `l` time derivatives of every state dimension with backward
//! differences, and extrapolates the resulting degree-`l` Taylor polynomial
//! over the next `h` sampling instants. A safety level is evaluated on every
//! predicted state; a negative level is a predicted violation.
//!
//! Modules, bottom-up:
//!
//! - [`numdiff`]: backward-difference derivative estimates and their error bound.
//! - [`taylor`]: approximated Taylor polynomials, prediction, prediction error bound.
//! - [`monitor`]: the streaming monitor and safety specifications.
//! - [`baseline`]: time-to-collision, i.e. the degree-1 monitor.
//! - [`sim`]: analytic and RK4-integrated ground-truth trajectories.
//! - [`metrics`]: confusion counts, lead time, distance error, RMSE by lookahead.
//! - [`io`]: CSV formats shared with the command-line front end.

pub mod baseline;
pub mod error;
pub mod io;
pub mod metrics;
pub mod monitor;
pub mod numdiff;
pub mod sim;
pub mod taylor;

pub use error::{Error, Result};
pub use monitor::{Monitor, MonitorConfig, MonitorVerdict, SafetySpec};
pub use taylor::{PredictionSet, Sample, Stencil, TaylorModel};

/// Largest supported Taylor degree / derivative order.
pub const MAX_DEGREE: usize = 32;
