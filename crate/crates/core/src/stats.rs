//! Monte Carlo error estimates for correlated series.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const DEFAULT_BATCHES: usize = 50;

/// Mean with a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self { mean, se: 0.0 }
    }

    /// `(self - other)` assuming independence.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate {
            mean: self.mean - other.mean,
            se: self.se.hypot(other.se),
        }
    }

    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.se)
    }
}

/// `stat / se`, with `0/0 = 0` and `x/0 = ±∞`.
pub fn z_score(stat: f64, se: f64) -> f64 {
    if stat == 0.0 {
        0.0
    } else if se == 0.0 {
        stat.signum() * f64::INFINITY
    } else {
        stat / se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Batch-means estimate with `n_batches` contiguous batches; a leftover
/// tail shorter than one batch is dropped from the error but kept in the mean.
pub fn batch_means(xs: &[f64], n_batches: usize) -> Result<Estimate> {
    ensure!(n_batches >= 2, InvalidParameter, "need at least two batches");
    ensure!(
        xs.len() >= 2 * n_batches,
        InsufficientData,
        "{} samples cannot fill {n_batches} batches",
        xs.len()
    );
    let b = xs.len() / n_batches;
    let means: Vec<f64> = xs[..b * n_batches].chunks(b).map(mean).collect();
    let mu = mean(&means);
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    Ok(Estimate {
        mean: mean(xs),
        se: (var / n_batches as f64).sqrt(),
    })
}

pub fn batch_means_default(xs: &[f64]) -> Result<Estimate> {
    batch_means(xs, DEFAULT_BATCHES)
}

/// Integrated autocorrelation time `1 + 2Σρ(t)` with Sokal's automatic
/// window (smallest `W ≥ c·τ(W)`, `c = 5`).
pub fn tau_int(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let mu = mean(xs);
    let c0 = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..n / 2 {
        let ct = xs[..n - t]
            .iter()
            .zip(&xs[t..])
            .map(|(a, b)| (a - mu) * (b - mu))
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0 / n as f64)
}

/// Paired-sample estimate of `E[x] - E[y]` with batch means on the differences.
pub fn paired_difference(x: &[f64], y: &[f64]) -> Result<Estimate> {
    ensure!(x.len() == y.len(), InvalidParameter, "paired series differ in length");
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    batch_means_default(&d)
}

/// Weighted least-squares line through `(x_i, y_i)` with `y`-errors `s_i`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn weighted_line_fit(x: &[f64], y: &[f64], s: &[f64]) -> Result<LineFit> {
    ensure!(x.len() == y.len() && y.len() == s.len(), InvalidParameter, "fit arrays differ in length");
    ensure!(x.len() >= 2, InsufficientData, "need at least two points for a line");
    let w: Vec<f64> = s.iter().map(|&e| if e > 0.0 { 1.0 / (e * e) } else { 1e30 }).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    ensure!(det > 0.0, Domain, "degenerate abscissae in line fit");
    let slope = (sw * sxy - sx * sy) / det;
    Ok(LineFit {
        slope,
        intercept: (sy - slope * sx) / sw,
        slope_se: (sw / det).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = phi * x + z;
                x
            })
            .collect()
    }

    #[test]
    fn iid_batch_error_matches_naive() {
        let xs = ar1(0.0, 100_000, 1);
        let e = batch_means_default(&xs).unwrap();
        let naive = (1.0 / xs.len() as f64).sqrt();
        assert!((e.se / naive - 1.0).abs() < 0.3);
        assert!((tau_int(&xs) - 1.0).abs() < 0.1);
    }

    #[test]
    fn ar1_autocorrelation_time() {
        // τ = (1+φ)/(1-φ)
        let phi = 0.8;
        let xs = ar1(phi, 400_000, 2);
        let t = tau_int(&xs);
        assert!((t - 9.0).abs() < 1.0, "{t}");
        let e = batch_means_default(&xs).unwrap();
        let var = 1.0 / (1.0 - phi * phi);
        let expect = (var * 9.0 / xs.len() as f64).sqrt();
        assert!((e.se / expect - 1.0).abs() < 0.35, "{} vs {expect}", e.se);
    }

    #[test]
    fn too_short_series_is_rejected() {
        assert!(matches!(
            batch_means_default(&[1.0; 20]),
            Err(crate::Error::InsufficientData(_))
        ));
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = weighted_line_fit(&x, &y, &[0.1; 4]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    }
}
