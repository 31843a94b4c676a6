use serde::{Deserialize, Serialize};

use super::chain::SampleStore;
use crate::error::{ensure, Result};
use crate::interaction::Model;
use crate::spectral::eigenfunction;
use crate::stats::{batch_means_default, Estimate};

/// Polynomial local observable `A(q) = Σ_j a_j q^j` (constant term first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyObservable {
    pub coeffs: Vec<f64>,
}

impl PolyObservable {
    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    pub fn q() -> Self {
        Self::power(1)
    }

    pub fn power(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * q + a)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&a| a != 0.0).unwrap_or(0)
    }
}

pub fn check_ordered(taus: &[f64], beta: f64) -> Result<()> {
    ensure!(
        taus.windows(2).all(|w| w[0] <= w[1]),
        Domain,
        "imaginary times must be ordered, got {taus:?}"
    );
    ensure!(
        taus.iter().all(|&t| (0.0..=beta).contains(&t)),
        Domain,
        "imaginary times must lie in [0, β]"
    );
    Ok(())
}

/// Monte Carlo Matsubara function `E[Π_i A_i(ω_{k_i}(τ_i))]`.
///
/// Each sample is averaged over `shifts` equispaced rigid time translations,
/// which leave the measure invariant and reduce the variance.
pub fn matsubara(
    model: &Model,
    samples: &SampleStore,
    observables: &[(usize, PolyObservable)],
    taus: &[f64],
    shifts: usize,
) -> Result<Estimate> {
    let beta = model.params().beta;
    check_ordered(taus, beta)?;
    ensure!(
        observables.len() == taus.len(),
        InvalidParameter,
        "{} observables for {} times",
        observables.len(),
        taus.len()
    );
    for (site, _) in observables {
        model.check_site(*site)?;
    }
    if observables.iter().all(|(_, a)| a.degree() == 0) {
        let c: f64 = observables.iter().map(|(_, a)| a.eval(0.0)).product();
        return Ok(Estimate::exact(c));
    }
    let shifts = shifts.max(1);
    let nm = model.n_modes() as i64;
    // φ tables at every shifted time
    let tables: Vec<Vec<Vec<f64>>> = taus
        .iter()
        .map(|&t| {
            (0..shifts)
                .map(|j| {
                    let tt = t + beta * j as f64 / shifts as f64;
                    (-nm..=nm).map(|n| eigenfunction(n, tt, beta)).collect()
                })
                .collect()
        })
        .collect();
    let mut series = Vec::with_capacity(samples.len());
    for i in 0..samples.len() {
        let mut acc = 0.0;
        for j in 0..shifts {
            let mut prod = 1.0;
            for ((site, a), table) in observables.iter().zip(&tables) {
                let c = samples.site_coeffs(i, *site);
                let q: f64 = c.iter().zip(&table[j]).map(|(x, f)| x * f).sum();
                prod *= a.eval(q);
            }
            acc += prod;
        }
        series.push(acc / shifts as f64);
    }
    batch_means_default(&series)
}
