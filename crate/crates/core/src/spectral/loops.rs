use serde::{Deserialize, Serialize};

use super::grid::CircleGrid;
use super::params::{eigenfunction, OscillatorParams};
use crate::error::{ensure, Result};

/// A loop on `S_β` given by its coefficients against `φ_n`, `|n| ≤ N`.
///
/// Coefficients are stored in mode order `n = -N, …, N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralLoop {
    coeffs: Vec<f64>,
}

impl SpectralLoop {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; 2 * n_modes + 1],
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        ensure!(
            coeffs.len() % 2 == 1,
            InvalidParameter,
            "a loop needs an odd number of coefficients, got {}",
            coeffs.len()
        );
        Ok(Self { coeffs })
    }

    /// The single eigenfunction `φ_n` in a basis of `n_modes` modes.
    pub fn mode(n: i64, n_modes: usize) -> Self {
        let mut l = Self::zeros(n_modes);
        l.set(n, 1.0);
        l
    }

    /// Constant loop with value `value` (coefficient `value·√β` on `φ_0`).
    pub fn constant(value: f64, beta: f64, n_modes: usize) -> Self {
        let mut l = Self::zeros(n_modes);
        l.set(0, value * beta.sqrt());
        l
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    #[inline]
    pub fn index_of(&self, n: i64) -> Option<usize> {
        let nm = self.n_modes() as i64;
        (n.abs() <= nm).then(|| (n + nm) as usize)
    }

    /// Coefficient of `φ_n`, zero outside the truncation.
    pub fn coeff(&self, n: i64) -> f64 {
        self.index_of(n).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set(&mut self, n: i64, value: f64) {
        let i = self
            .index_of(n)
            .unwrap_or_else(|| panic!("mode {n} outside truncation {}", self.n_modes()));
        self.coeffs[i] = value;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let nm = self.n_modes() as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - nm, c))
    }

    /// Point evaluation `Σ c_n φ_n(τ)`.
    pub fn eval(&self, tau: f64, beta: f64) -> f64 {
        self.modes().map(|(n, c)| c * eigenfunction(n, tau, beta)).sum()
    }

    /// Values on every grid point.
    pub fn synthesize(&self, grid: &CircleGrid) -> Vec<f64> {
        grid.points().iter().map(|&t| self.eval(t, grid.beta())).collect()
    }

    /// Rectangle-rule projection of grid values onto `φ_n`, `|n| ≤ n_modes`.
    ///
    /// Exact for trigonometric polynomials of degree `N` once `M ≥ 2N + 1`.
    pub fn analyze(values: &[f64], grid: &CircleGrid, n_modes: usize) -> Self {
        let h = grid.spacing();
        let nm = n_modes as i64;
        let coeffs = (-nm..=nm)
            .map(|n| {
                h * values
                    .iter()
                    .zip(grid.points())
                    .map(|(v, &t)| v * eigenfunction(n, t, grid.beta()))
                    .sum::<f64>()
            })
            .collect();
        Self { coeffs }
    }

    /// Euclidean norm of the coefficient vector (the `L²` norm by Parseval).
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Mode-wise multiplication by `λ_n`, i.e. `A` applied in spectral form.
    pub fn apply_operator(&self, p: &OscillatorParams) -> Self {
        Self {
            coeffs: self.modes().map(|(n, c)| p.lambda(n) * c).collect(),
        }
    }

    /// Pad with zeros or truncate to a new number of modes.
    pub fn resized(&self, n_modes: usize) -> Self {
        let mut out = Self::zeros(n_modes);
        for (n, c) in self.modes() {
            if n.unsigned_abs() as usize <= n_modes {
                out.set(n, c);
            }
        }
        out
    }

    pub fn axpy(&mut self, alpha: f64, other: &SpectralLoop) {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }
}

/// Summation method for [`partial_sums`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialSumKind {
    Fourier,
    Cesaro,
}

/// Fourier partial sum `S_K f` or Cesàro (Fejér) mean `M_K f = (K+1)⁻¹ Σ_{L≤K} S_L f`.
///
/// The result keeps the mode count of `f`; modes above `K` are zeroed.
pub fn partial_sums(f: &SpectralLoop, k: usize, kind: PartialSumKind) -> SpectralLoop {
    let k = k as i64;
    let coeffs = f
        .modes()
        .map(|(n, c)| {
            let an = n.abs();
            if an > k {
                0.0
            } else {
                match kind {
                    PartialSumKind::Fourier => c,
                    PartialSumKind::Cesaro => c * (k + 1 - an) as f64 / (k + 1) as f64,
                }
            }
        })
        .collect();
    SpectralLoop { coeffs }
}

/// Spectral coefficients of the Green function `𝔊_τ = A⁻¹δ_τ`, `|n| ≤ cutoff`.
pub fn green_loop(tau: f64, p: &OscillatorParams, cutoff: usize) -> SpectralLoop {
    let nm = cutoff as i64;
    SpectralLoop {
        coeffs: (-nm..=nm)
            .map(|n| eigenfunction(n, tau, p.beta) / p.lambda(n))
            .collect(),
    }
}

/// Resolvent smoothing `(1 + K⁻¹A)⁻¹ 𝔊_τ` of the Green function.
pub fn yosida(tau: f64, k: f64, p: &OscillatorParams, cutoff: usize) -> Result<SpectralLoop> {
    ensure!(k >= 1.0, InvalidParameter, "Yosida parameter must be ≥ 1, got {k}");
    let g = green_loop(tau, p, cutoff);
    Ok(SpectralLoop {
        coeffs: g
            .modes()
            .map(|(n, c)| c / (1.0 + p.lambda(n) / k))
            .collect(),
    })
}
