use serde::{Deserialize, Serialize};

use super::grid::CircleGrid;
use super::loops::SpectralLoop;
use super::params::OscillatorParams;
use crate::error::{ensure, Result};

/// Loop norms. `Hoelder` is the grid-Hölder norm: sup plus the largest
/// difference quotient over grid pairs, which under-estimates the continuum
/// seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum LoopNormKind {
    Sup,
    Lr(f64),
    Hoelder(f64),
    /// `(Σ λ_n^α c_n²)^{1/2}`.
    Sobolev(f64),
}

pub fn loop_norm(
    f: &SpectralLoop,
    p: &OscillatorParams,
    grid: &CircleGrid,
    kind: LoopNormKind,
) -> Result<f64> {
    match kind {
        LoopNormKind::Sobolev(alpha) => {
            ensure!(
                (0.0..0.5).contains(&alpha),
                InvalidParameter,
                "Sobolev index must lie in [0, 1/2), got {alpha}"
            );
            Ok(sobolev_norm(f, p, alpha))
        }
        _ => grid_norm(&f.synthesize(grid), grid, kind),
    }
}

/// Norms that only need grid values (everything except `Sobolev`).
pub fn grid_norm(values: &[f64], grid: &CircleGrid, kind: LoopNormKind) -> Result<f64> {
    match kind {
        LoopNormKind::Sup => Ok(sup(values)),
        LoopNormKind::Lr(r) => {
            ensure!(r >= 1.0, InvalidParameter, "L^r needs r ≥ 1, got {r}");
            let s: f64 = values.iter().map(|v| v.abs().powf(r)).sum();
            Ok((grid.spacing() * s).powf(1.0 / r))
        }
        LoopNormKind::Hoelder(alpha) => {
            ensure!(
                (0.0..0.5).contains(&alpha),
                InvalidParameter,
                "Hölder index must lie in [0, 1/2), got {alpha}"
            );
            Ok(sup(values) + holder_seminorm(values, grid, alpha))
        }
        LoopNormKind::Sobolev(_) => Err(crate::Error::InvalidParameter(
            "Sobolev norms need spectral coefficients".into(),
        )),
    }
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `max_{i≠j} |f_i - f_j| / ρ(τ_i,τ_j)^α` over grid pairs.
///
/// On a uniform grid `ρ` only depends on the index offset, so the power is
/// computed once per offset.
pub fn holder_seminorm(values: &[f64], grid: &CircleGrid, alpha: f64) -> f64 {
    let m = values.len();
    let h = grid.spacing();
    let mut best = 0.0f64;
    for off in 1..=m / 2 {
        let inv = (off as f64 * h).powf(-alpha);
        let mut local = 0.0f64;
        for i in 0..m {
            let d = (values[i] - values[(i + off) % m]).abs();
            local = local.max(d);
        }
        best = best.max(local * inv);
    }
    best
}

pub fn sobolev_norm(f: &SpectralLoop, p: &OscillatorParams, alpha: f64) -> f64 {
    f.modes()
        .map(|(n, c)| p.lambda(n).powf(alpha) * c * c)
        .sum::<f64>()
        .sqrt()
}
