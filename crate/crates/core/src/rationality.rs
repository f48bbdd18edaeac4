//! Mapping bounded-rationality parameters to a CCE slack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedRationalityParams {
    /// Discount / commitment factor, in `[0, 1)`.
    pub gamma_m: f64,
    /// Subjective utility perturbation, `‖u_i − ũ_i‖_∞`.
    pub gamma_s: f64,
    /// Procedural slack: utility an agent may leave on the table.
    pub gamma_p: f64,
    /// `‖u_i‖_∞`.
    pub u_inf: f64,
}

impl BoundedRationalityParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma_m, self.gamma_s, self.gamma_p, self.u_inf];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bounded-rationality parameters"));
        }
        if !(0.0..1.0).contains(&self.gamma_m) {
            return Err(Error::param("gamma_m must lie in [0, 1)"));
        }
        if self.gamma_s < 0.0 || self.gamma_p < 0.0 || self.u_inf < 0.0 {
            return Err(Error::param("gamma_s, gamma_p and u_inf must be nonnegative"));
        }
        Ok(())
    }
}

/// `ε_i = max{ ‖u_i‖_∞ / (1 − γ_m), γ_s, 2γ_p }`.
///
/// The myopia term is kept as stated even though it is nonzero at
/// `γ_m = 0`.
pub fn epsilon_from_bounded_rationality(p: &BoundedRationalityParams) -> Result<f64> {
    p.validate()?;
    let myopia = p.u_inf / (1.0 - p.gamma_m);
    Ok(myopia.max(p.gamma_s).max(2.0 * p.gamma_p))
}
