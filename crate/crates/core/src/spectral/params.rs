use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure, Result};

/// Mass, harmonic rigidity and inverse temperature of a single oscillator.
///
/// Together they fix the operator `A = -m d²/dτ² + a²` on the circle of
/// length `beta`, whose inverse is the covariance of the bridge measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    #[serde(rename = "m")]
    pub mass: f64,
    #[serde(rename = "a")]
    pub rigidity: f64,
    pub beta: f64,
}

impl OscillatorParams {
    pub fn new(mass: f64, rigidity: f64, beta: f64) -> Result<Self> {
        let p = Self {
            mass,
            rigidity,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.mass > 0.0 && self.mass.is_finite(),
            InvalidParameter,
            "mass must be positive, got {}",
            self.mass
        );
        ensure!(
            self.rigidity > 0.0 && self.rigidity.is_finite(),
            InvalidParameter,
            "rigidity must be positive, got {}",
            self.rigidity
        );
        ensure!(
            self.beta > 0.0 && self.beta.is_finite(),
            InvalidParameter,
            "beta must be positive, got {}",
            self.beta
        );
        Ok(())
    }

    /// Same mass and temperature, rigidity replaced so that `a² -> a² + shift`.
    pub fn with_shifted_rigidity(&self, shift: f64) -> Result<Self> {
        Self::new(self.mass, (self.rigidity * self.rigidity + shift).sqrt(), self.beta)
    }

    /// Eigenvalue of `A` for mode `n`.
    #[inline]
    pub fn lambda(&self, n: i64) -> f64 {
        spectrum(n, self)
    }

    /// Exponential decay rate `a / sqrt(m)` of the Green function.
    pub fn decay_rate(&self) -> f64 {
        self.rigidity / self.mass.sqrt()
    }
}

/// `λ_n = (2πn/β)²·m + a²`.
#[inline]
pub fn spectrum(n: i64, p: &OscillatorParams) -> f64 {
    let k = 2.0 * PI * n as f64 / p.beta;
    k * k * p.mass + p.rigidity * p.rigidity
}

/// Real trigonometric eigenfunction `φ_n(τ)` of `A`, orthonormal in `L²(S_β)`.
///
/// `n = 0` is the constant, `n > 0` a cosine and `n < 0` a negative sine.
#[inline]
pub fn eigenfunction(n: i64, tau: f64, beta: f64) -> f64 {
    if n == 0 {
        (1.0 / beta).sqrt()
    } else {
        let arg = 2.0 * PI * n.unsigned_abs() as f64 * tau / beta;
        let norm = (2.0 / beta).sqrt();
        if n > 0 {
            norm * arg.cos()
        } else {
            -norm * arg.sin()
        }
    }
}

/// Uniform sup bound `κ_∞ = (2/β)^{1/2}` of the eigenfunctions.
pub fn kappa_inf(beta: f64) -> f64 {
    (2.0 / beta).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_values() {
        let p = OscillatorParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(spectrum(0, &p), 1.0);
        let p = OscillatorParams::new(1.0, 1.0, 2.0 * PI).unwrap();
        assert!((spectrum(1, &p) - 2.0).abs() < 1e-14);
        let p = OscillatorParams::new(2.0, 0.5, 1.0).unwrap();
        let expected = 32.0 * PI * PI + 0.25;
        assert!((spectrum(-2, &p) - expected).abs() < 1e-12 * expected);
        assert_eq!(spectrum(-2, &p), spectrum(2, &p));
    }

    #[test]
    fn eigenfunction_values() {
        assert!((eigenfunction(0, 0.3, 4.0) - 0.5).abs() < 1e-15);
        assert!((eigenfunction(1, 0.0, 2.0) - 1.0).abs() < 1e-15);
        assert!(eigenfunction(-1, 0.0, 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(OscillatorParams::new(0.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, -1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, f64::NAN).is_err());
    }
}
