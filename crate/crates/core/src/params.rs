//! Physical constants of the driven, damped Kerr oscillator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oscillator frequency ω, Kerr nonlinearity g, friction γ, drive amplitude ε
/// and drive frequency ν. Detuning Δω = ω − ν is always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub omega: f64,
    pub g: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub nu: f64,
}

impl Default for OscillatorParams {
    /// ω = 1, g = 0.02, γ = 0.04, ε = 0.16 at ν = 1.2 (inside the bistable window).
    fn default() -> Self {
        Self {
            omega: 1.0,
            g: 0.02,
            gamma: 0.04,
            epsilon: 0.16,
            nu: 1.2,
        }
    }
}

impl OscillatorParams {
    pub fn new(omega: f64, g: f64, gamma: f64, epsilon: f64, nu: f64) -> Result<Self> {
        let p = Self {
            omega,
            g,
            gamma,
            epsilon,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    /// The default parameter set at another drive frequency.
    pub fn standard(nu: f64) -> Self {
        Self {
            nu,
            ..Self::default()
        }
    }

    pub fn with_nu(self, nu: f64) -> Self {
        Self { nu, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: &str) -> Error {
            Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            }
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(bad("omega", "must be finite and > 0"));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(bad("nu", "must be finite and > 0"));
        }
        if !self.g.is_finite() {
            return Err(bad("g", "must be finite"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(bad("gamma", "must be finite and ≥ 0"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(bad("epsilon", "must be finite and ≥ 0"));
        }
        Ok(())
    }

    #[inline]
    pub fn detuning(&self) -> f64 {
        self.omega - self.nu
    }

    /// Time unit T = 2π/ω.
    #[inline]
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Classical relaxation period T_γ = 2π/γ.
    #[inline]
    pub fn relaxation_period(&self) -> f64 {
        2.0 * PI / self.gamma
    }
}
