use crate::error::{ensure, Result};

/// Uniform grid `τ_j = jβ/M` on the circle `S_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleGrid {
    beta: f64,
    tau: Vec<f64>,
}

impl CircleGrid {
    pub fn new(beta: f64, n_points: usize) -> Result<Self> {
        ensure!(n_points > 0, InvalidParameter, "grid needs at least one point");
        ensure!(beta > 0.0, InvalidParameter, "beta must be positive");
        let h = beta / n_points as f64;
        let tau = (0..n_points).map(|j| j as f64 * h).collect();
        Ok(Self { beta, tau })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_points(&self) -> usize {
        self.tau.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.tau
    }

    /// Rectangle-rule weight `β/M`.
    pub fn spacing(&self) -> f64 {
        self.beta / self.tau.len() as f64
    }

    /// Geodesic distance `ρ(τ,τ') = min(|τ-τ'|, β-|τ-τ'|)`.
    pub fn distance(&self, t1: f64, t2: f64) -> f64 {
        circle_distance(t1, t2, self.beta)
    }

    /// Rectangle-rule integral of grid values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.tau.len());
        self.spacing() * values.iter().sum::<f64>()
    }
}

pub fn circle_distance(t1: f64, t2: f64, beta: f64) -> f64 {
    let d = (t1 - t2).rem_euclid(beta);
    d.min(beta - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_uniform_and_increasing() {
        let g = CircleGrid::new(2.0, 16).unwrap();
        assert!(g.points().windows(2).all(|w| (w[1] - w[0] - 0.125).abs() < 1e-15));
        assert_eq!(g.points()[0], 0.0);
    }

    #[test]
    fn distance_is_symmetric_and_bounded() {
        let g = CircleGrid::new(3.0, 8).unwrap();
        for &a in g.points() {
            for &b in g.points() {
                let d = g.distance(a, b);
                assert_eq!(d, g.distance(b, a));
                assert!(d <= 1.5 + 1e-15);
            }
        }
        assert!((g.distance(0.1, 2.9) - 0.2).abs() < 1e-12);
    }
}
