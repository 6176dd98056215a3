//! Link-level Monte Carlo simulator for uplink non-orthogonal multiple access.
//!
//! Users' polar-coded QPSK streams are placed on a shared OFDM resource grid
//! through scheme-specific signatures, passed through fading channels and
//! separated again by SIC or message-passing receivers. The [`sim`] module
//! ties the chain together and measures block error rates.

pub mod channel;
pub mod error;
pub mod grid;
mod linalg;
pub mod ofdm;
pub mod polar;
pub mod qpsk;
pub mod receiver;
pub mod rng;
pub mod schemes;
pub mod sim;

pub use error::{Error, Result};
