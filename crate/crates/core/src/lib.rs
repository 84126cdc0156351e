//! Numerical experiments on the quantum limits of a laser used as a shared
//! clock.
//!
//! * [`fock`]: truncated Fock-space states and canonical phase statistics.
//! * [`laserdyn`]: master equation of a damped laser mode with noiseless gain,
//!   its stationary state and linewidth.
//! * [`tracking`]: Monte Carlo phase locking to a diffusing beam (adaptive
//!   homodyne loop and dual-quadrature baseline).
//! * [`sync`]: splitting one laser among `M` parties, plus closed-form limits.
//! * [`channel`]: the phase-space lattice basis and the fully decohering
//!   channel it defines.

pub mod channel;
pub mod error;
pub mod fock;
pub mod laserdyn;
mod quad;
pub mod sync;
pub mod tracking;

pub use error::{Error, Result};
pub use num_complex;

/// Library version, echoed into experiment sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
