use super::grid::CircleGrid;
use super::params::{eigenfunction, OscillatorParams};
use crate::error::{ensure, Result};

/// Precomputed eigenfunction table for fast synthesis and projection on a
/// fixed grid: the discretization every lattice computation shares.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    params: OscillatorParams,
    grid: CircleGrid,
    n_modes: usize,
    lambdas: Vec<f64>,
    /// Row-major `(2N+1) × M` table of `φ_n(τ_j)`.
    phi: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(params: OscillatorParams, n_modes: usize, n_points: usize) -> Result<Self> {
        params.validate()?;
        ensure!(
            n_points > 2 * n_modes,
            InvalidParameter,
            "grid of {n_points} points cannot resolve {n_modes} modes"
        );
        let grid = CircleGrid::new(params.beta, n_points)?;
        let nm = n_modes as i64;
        let lambdas = (-nm..=nm).map(|n| params.lambda(n)).collect();
        let mut phi = Vec::with_capacity((2 * n_modes + 1) * n_points);
        for n in -nm..=nm {
            phi.extend(grid.points().iter().map(|&t| eigenfunction(n, t, params.beta)));
        }
        Ok(Self {
            params,
            grid,
            n_modes,
            lambdas,
            phi,
        })
    }

    pub fn params(&self) -> &OscillatorParams {
        &self.params
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_coeffs(&self) -> usize {
        2 * self.n_modes + 1
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Row of `φ_n` on the grid for coefficient index `i`.
    #[inline]
    pub fn phi_row(&self, i: usize) -> &[f64] {
        let m = self.n_points();
        &self.phi[i * m..(i + 1) * m]
    }

    pub fn synthesize_into(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.n_coeffs());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (o, &f) in out.iter_mut().zip(self.phi_row(i)) {
                    *o += c * f;
                }
            }
        }
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_points()];
        self.synthesize_into(coeffs, &mut out);
        out
    }

    /// Quadrature inner product `(f, φ_n)` for every mode.
    pub fn project_into(&self, values: &[f64], out: &mut [f64]) {
        let h = self.grid.spacing();
        for (i, o) in out.iter_mut().enumerate() {
            *o = h * values.iter().zip(self.phi_row(i)).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_coeffs()];
        self.project_into(values, &mut out);
        out
    }

    /// Half the Gaussian quadratic form, `Σ λ_n c_n² / 2`.
    pub fn quadratic_form(&self, coeffs: &[f64]) -> f64 {
        0.5 * coeffs
            .iter()
            .zip(&self.lambdas)
            .map(|(c, l)| l * c * c)
            .sum::<f64>()
    }
}
