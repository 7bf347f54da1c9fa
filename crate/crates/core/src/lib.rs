//! Simulation of a damped, driven Kerr (Duffing-type) oscillator from three
//! angles: classical mean-field dynamics, the Lindblad master equation in a
//! truncated Fock basis (time evolution and Liouvillian spectrum), and the
//! truncated-Wigner Langevin approximation between the two.
//!
//! All dynamics run in the frame rotating at the drive frequency ν. Times are
//! in the same units as `1/ω`; outputs written by the runner use units of the
//! natural period `T = 2π/ω`.

pub mod basins;
pub mod classical;
pub mod error;
pub mod export;
pub mod fock;
pub mod langevin;
pub mod liouvillian;
pub mod params;
pub mod runner;

pub use error::{Error, Result};
pub use params::OscillatorParams;
