use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::{check_v_assumptions, j_seminorm, k3_threshold, k3_threshold_moments, Model, VAssumptionReport, WeightSystem};
use crate::spectral::green_continuum;

/// Sampling of the one-site potential used to fit `K_1..K_4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub q_range: (f64, f64),
    pub samples: usize,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            q_range: (-10.0, 10.0),
            samples: 2001,
        }
    }
}

/// Smallness parameters of the moment bounds, each flagged `< 1`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionConstants {
    pub q: f64,
    /// `Ξ_{Q-1} = K_1 [1 + (Q-1) K_2] Tr A⁻¹`.
    pub xi_q: f64,
    pub xi_0: f64,
    /// `|||𝒥||| K_3 (M_2 + M_1 Tr A⁻¹) / (1 - Ξ_0)`.
    pub theta0: f64,
    /// `K_3 M_2 |||𝒥|||`.
    pub theta0_prime: f64,
    pub k3_threshold: f64,
    pub k3_threshold_moments: f64,
    pub trace_inv: f64,
    pub k1: f64,
    pub k2: f64,
    /// `None` when inequality (iii) has no finite constant on the range.
    pub k3: Option<f64>,
    pub m1: f64,
    pub m2: f64,
    pub order_r: usize,
    /// `||J||_0`, the plain row sum of pair strengths.
    pub j_norm0: f64,
    /// `|||𝒥||| = 2||J||_0` as used in the lattice instantiation.
    pub j_calligraphic: f64,
    /// Exact row sum `Σ_j J̃_{k,j} + ||J||_0` of the matrix `𝒥`.
    pub j_calligraphic_exact: f64,
    pub xi_ok: bool,
    pub theta0_ok: bool,
    pub theta0_prime_ok: bool,
    /// `K_3 < K_3^{(0)}`.
    pub k3_ok: bool,
}

impl ConditionConstants {
    pub fn all_ok(&self) -> bool {
        self.xi_ok && self.theta0_ok && self.theta0_prime_ok
    }
}

fn fitted(report: &VAssumptionReport, name: &str) -> Result<f64> {
    report.k(name).ok_or_else(|| {
        Error::Dependency(format!(
            "coercivity inequality ({name}) has no feasible constant on [{}, {}]",
            report.q_min, report.q_max
        ))
    })
}

/// Condition constants for the moment order `q ≥ 1`.
pub fn condition_constants(model: &Model, q: f64, options: ConditionOptions) -> Result<ConditionConstants> {
    crate::error::ensure!(q >= 1.0, InvalidParameter, "moment order Q must be ≥ 1, got {q}");
    let coupling = &model.spec().coupling;
    let order_r = coupling.order();
    let report = check_v_assumptions(model.potential(), options.q_range, options.samples, order_r)?;
    let k1 = fitted(&report, "i")?;
    let k2 = fitted(&report, "ii")?;
    let trace_inv = model.params().beta * green_continuum(0.0, model.params());

    let j = j_seminorm(coupling, model.geometry().extent.len(), WeightSystem::Exponential { delta: 0.0 }, 1e-12)?;
    let j_norm0 = j.upper();
    let j_calligraphic = 2.0 * j_norm0;
    let j_calligraphic_exact = j.tilde_row_sum + j_norm0;
    let m = 3.0 * 2f64.powi(order_r as i32);

    let xi_0 = k1 * trace_inv;
    let xi_q = k1 * (1.0 + (q - 1.0) * k2) * trace_inv;
    let k3 = report.k("iii");
    let (theta0, theta0_prime) = if j_calligraphic == 0.0 {
        (0.0, 0.0)
    } else {
        let k3 = k3.ok_or_else(|| fitted(&report, "iii").unwrap_err())?;
        let t0 = if xi_0 < 1.0 {
            j_calligraphic * k3 * (m + m * trace_inv) / (1.0 - xi_0)
        } else {
            f64::INFINITY
        };
        (t0, k3 * m * j_calligraphic)
    };
    let k3_thr = k3_threshold(order_r, j_norm0);
    Ok(ConditionConstants {
        q,
        xi_q,
        xi_0,
        theta0,
        theta0_prime,
        k3_threshold: k3_thr,
        k3_threshold_moments: k3_threshold_moments(order_r, j_norm0),
        trace_inv,
        k1,
        k2,
        k3,
        m1: m,
        m2: m,
        order_r,
        j_norm0,
        j_calligraphic,
        j_calligraphic_exact,
        xi_ok: xi_q < 1.0,
        theta0_ok: theta0 < 1.0,
        theta0_prime_ok: theta0_prime < 1.0,
        k3_ok: k3.is_some_and(|k| k < k3_thr) || j_norm0 == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{BoundaryMode, CouplingSpec, LatticeGeometry, ModelSpec, OneSitePotential};
    use crate::spectral::OscillatorParams;

    fn chain(j: f64, pot: OneSitePotential) -> Model {
        stiff_chain(j, pot, 1.0)
    }

    fn stiff_chain(j: f64, pot: OneSitePotential, rigidity: f64) -> Model {
        let spec = ModelSpec {
            coupling: CouplingSpec::HarmonicNn { j },
            lattice: LatticeGeometry::chain(4, BoundaryMode::Zero),
            ..ModelSpec::single_site(OscillatorParams::new(1.0, rigidity, 1.0).unwrap(), pot, 2)
        };
        Model::new(spec).unwrap()
    }

    #[test]
    fn decoupled_preset_is_trivial() {
        let m = Model::preset("decoupled").unwrap();
        let c = condition_constants(&m, 2.0, ConditionOptions::default()).unwrap();
        assert_eq!((c.xi_q, c.theta0, c.theta0_prime), (0.0, 0.0, 0.0));
        assert!(c.k3_threshold.is_infinite() && c.k3_threshold_moments.is_infinite());
        assert!(c.all_ok() && c.trace_inv.is_finite());
    }

    #[test]
    fn model_one_threshold() {
        let c = condition_constants(&chain(1.0, OneSitePotential::quartic(1.0)), 1.0, ConditionOptions::default()).unwrap();
        assert_eq!(c.order_r, 2);
        assert_eq!(c.j_norm0, 2.0);
        assert!((c.k3_threshold - 0.25).abs() < 1e-15);
        assert!((c.k3_threshold_moments - 1.0 / 48.0).abs() < 1e-15);
        // 3·2^R with R = 2
        assert_eq!(c.m2, 12.0);
        // Θ_0' = 6 K_3 2^R ||J||_0 in the lattice form
        assert!((c.theta0_prime - 6.0 * c.k3.unwrap() * 4.0 * 2.0).abs() < 1e-12);
        assert_eq!(c.j_calligraphic_exact, 4.0 * 2.0 + 2.0);
        // K_1 = 1 and Tr A⁻¹ ≈ 1.082: the Θ_0 relation has no finite value
        assert!(c.xi_0 > 1.0 && c.theta0.is_infinite() && !c.theta0_ok);
    }

    #[test]
    fn xi_is_affine_in_q() {
        let m = chain(1.0, OneSitePotential::quartic(1.0));
        let xs: Vec<f64> = (1..=5)
            .map(|q| condition_constants(&m, q as f64, ConditionOptions::default()).unwrap().xi_q)
            .collect();
        let d = xs[1] - xs[0];
        assert!(d >= 0.0);
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - d).abs() <= 1e-12 * xs[4].abs().max(1.0));
        }
    }

    #[test]
    fn theta_grows_with_coupling() {
        let pot = OneSitePotential::quartic(1.0);
        let ts: Vec<f64> = [0.0, 0.1, 0.5, 1.0, 2.0]
            .iter()
            .map(|&j| condition_constants(&stiff_chain(j, pot.clone(), 2.0), 1.0, ConditionOptions::default()).unwrap().theta0)
            .collect();
        assert!(ts.windows(2).all(|w| w[1] >= w[0]), "{ts:?}");
        assert_eq!(ts[0], 0.0);
        assert!(ts[4].is_finite() && ts[4] > ts[1]);
    }

    #[test]
    fn infeasible_k3_is_a_dependency_error() {
        // without a one-site potential nothing controls the pair growth
        let m = chain(0.5, OneSitePotential::zero());
        assert!(matches!(condition_constants(&m, 1.0, ConditionOptions::default()), Err(Error::Dependency(_))));
    }
}
