//! Utility weights and the dispersion-driven balance of group members.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the aggregated utility, plus the dispersion threshold
/// `delta` (meters) that drives the balance between goal and cohesion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub kappa_g: f64,
    pub kappa_ob: f64,
    pub kappa_s: f64,
    pub kappa_c: f64,
    pub kappa_d: f64,
    pub kappa_ov: f64,
    pub delta: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            kappa_g: 6.0,
            kappa_ob: 5.0,
            kappa_s: 80.0,
            kappa_c: 12.0,
            kappa_d: 14.0,
            kappa_ov: 0.0,
            delta: 7.0 * DELTA_UNIT_M,
        }
    }
}

/// Physical size of one unit of the `delta` lattice used by calibration
/// sweeps. Chosen so that the calibrated point `delta = 7` is a 0.1 m
/// dispersion threshold, half the dispersion of two adjacent partners.
pub const DELTA_UNIT_M: f64 = 0.1 / 7.0;

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("kappa_g", self.kappa_g),
            ("kappa_ob", self.kappa_ob),
            ("kappa_s", self.kappa_s),
            ("kappa_c", self.kappa_c),
            ("kappa_d", self.kappa_d),
            ("kappa_ov", self.kappa_ov),
            ("delta", self.delta),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Steepness of the balance sigmoid, per meter of dispersion.
pub const BALANCE_SHARPNESS: f64 = 4.0;

/// Logistic balance factor in `[0, 1]`: near 0 for a compact group, 1/2 at
/// `dispersion == delta`, approaching 1 as the group falls apart.
pub fn balance_factor(dispersion: f64, delta: f64) -> f64 {
    1.0 / (1.0 + (-BALANCE_SHARPNESS * (dispersion - delta)).exp())
}

/// Effective weights of a group member. Cohesion grows with dispersion
/// while goal attraction and direction inertia are inhibited by the same
/// factor; the remaining coefficients pass through.
pub fn balance_weights(base: &Weights, dispersion: f64) -> Weights {
    debug_assert!(dispersion >= 0.0);
    let b = balance_factor(dispersion, base.delta);
    Weights {
        kappa_c: base.kappa_c * b,
        kappa_g: base.kappa_g * (1.0 - b),
        kappa_d: base.kappa_d * (1.0 - b),
        ..*base
    }
}
