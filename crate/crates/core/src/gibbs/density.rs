use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::interaction::{action, nemytskii_f, LatticeState, Model};

/// Shift `θ·e_k ⊗ φ_n`: site `site`, mode `mode`, magnitude `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftDirection {
    pub site: usize,
    pub mode: i64,
    #[serde(default = "one")]
    pub theta: f64,
}

fn one() -> f64 {
    1.0
}

impl ShiftDirection {
    pub fn new(site: usize, mode: i64, theta: f64) -> Self {
        Self { site, mode, theta }
    }

    pub fn unit(site: usize, mode: i64) -> Self {
        Self::new(site, mode, 1.0)
    }

    pub fn scaled(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        model.check_site(self.site)?;
        ensure!(
            self.mode.unsigned_abs() as usize <= model.n_modes(),
            Domain,
            "mode {} exceeds the truncation N = {}",
            self.mode,
            model.n_modes()
        );
        Ok(())
    }

    pub fn coeff_index(&self, model: &Model) -> usize {
        (self.mode + model.n_modes() as i64) as usize
    }
}

/// Gaussian part `Σ_k Σ_n λ_n c_{k,n}² / 2`.
pub fn gaussian_energy(model: &Model, state: &LatticeState) -> f64 {
    (0..model.n_sites())
        .map(|i| model.basis().quadratic_form(state.site_coeffs(i)))
        .sum()
}

/// Log of the unnormalized density of the truncated Gibbs kernel in the
/// flat coefficient coordinates: `-Σλc²/2 - action`.
pub fn log_density(model: &Model, state: &LatticeState) -> f64 {
    -gaussian_energy(model, state) - action(model, state)
}

/// Partial logarithmic derivative `b_i = -λ_n c_{k,n} - (F_k, φ_n)`.
pub fn logderiv_b(model: &Model, state: &LatticeState, dir: ShiftDirection) -> Result<f64> {
    dir.validate(model)?;
    let idx = dir.coeff_index(model);
    let c = state.site_coeffs(dir.site)[idx];
    let f = nemytskii_f(model, state, dir.site)?;
    let h = model.basis().grid().spacing();
    let proj = h * f.iter().zip(model.basis().phi_row(idx)).map(|(a, b)| a * b).sum::<f64>();
    Ok(-model.basis().lambdas()[idx] * c - proj)
}

/// All `b_{k,n}` for one site in mode order.
pub fn logderiv_site(model: &Model, state: &LatticeState, site: usize) -> Result<Vec<f64>> {
    let f = nemytskii_f(model, state, site)?;
    let proj = model.basis().project(&f);
    Ok(proj
        .iter()
        .zip(state.site_coeffs(site))
        .zip(model.basis().lambdas())
        .map(|((p, c), l)| -l * c - p)
        .collect())
}

/// The three factors of the shift cocycle, as logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleFactors {
    pub gaussian: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl CocycleFactors {
    pub fn log_total(&self) -> f64 {
        self.gaussian + self.potential + self.interaction
    }
}

/// `log a_{θh}(ω)` split into the reference-measure, one-site and pair factors.
pub fn cocycle_factors(model: &Model, state: &LatticeState, dir: ShiftDirection) -> Result<CocycleFactors> {
    dir.validate(model)?;
    let idx = dir.coeff_index(model);
    let theta = dir.theta;
    let lam = model.basis().lambdas()[idx];
    let c = state.site_coeffs(dir.site)[idx];
    let gaussian = -theta * lam * c - 0.5 * theta * theta * lam;
    if theta == 0.0 {
        return Ok(CocycleFactors {
            gaussian,
            potential: 0.0,
            interaction: 0.0,
        });
    }
    let h = model.basis().grid().spacing();
    let x = state.site_values(dir.site);
    let phi = model.basis().phi_row(idx);
    let v = model.potential();
    let potential = -h * x
        .iter()
        .zip(phi)
        .map(|(&q, &f)| v.value(q + theta * f) - v.value(q))
        .sum::<f64>();
    let w = model.pair_potential();
    let mut interaction = 0.0;
    for l in &model.neighbourhood().links[dir.site] {
        let y = model.partner_values(state, l.partner);
        let d: f64 = x
            .iter()
            .zip(phi)
            .zip(y)
            .map(|((&a, &f), &b)| w.value(a + theta * f - b) - w.value(a - b))
            .sum();
        interaction -= l.strength * h * d;
    }
    Ok(CocycleFactors {
        gaussian,
        potential,
        interaction,
    })
}

/// `log a_{θh}(ω)`; safe where the cocycle itself would overflow.
pub fn log_rn_cocycle(model: &Model, state: &LatticeState, dir: ShiftDirection) -> Result<f64> {
    Ok(cocycle_factors(model, state, dir)?.log_total())
}

/// Radon–Nikodym density `a_{θh}(ω) = dμ(· - θh)/dμ` evaluated at `ω`.
pub fn rn_cocycle(model: &Model, state: &LatticeState, dir: ShiftDirection) -> Result<f64> {
    Ok(log_rn_cocycle(model, state, dir)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{CouplingSpec, LatticeGeometry, BoundaryMode, ModelSpec, OneSitePotential};
    use crate::spectral::OscillatorParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(pot: OneSitePotential, n: usize) -> Model {
        Model::new(ModelSpec::single_site(OscillatorParams::new(1.0, 1.0, 1.0).unwrap(), pot, n)).unwrap()
    }

    fn coupled() -> Model {
        let spec = ModelSpec {
            coupling: CouplingSpec::PolyPairNn {
                coeffs: vec![0.0, 0.3, 0.0, 0.05],
            },
            lattice: LatticeGeometry::chain(3, BoundaryMode::Zero),
            ..ModelSpec::single_site(
                OscillatorParams::new(0.7, 1.3, 1.5).unwrap(),
                OneSitePotential::double_well(-1.0, 0.4),
                4,
            )
        };
        Model::new(spec).unwrap()
    }

    #[test]
    fn density_examples() {
        let m = single(OneSitePotential::zero(), 3);
        assert_eq!(log_density(&m, &LatticeState::zeros(&m)), 0.0);
        let mut s = LatticeState::zeros(&m);
        s.shift(&m, 0, 2, 0.6);
        let lam = m.params().lambda(2);
        assert!((log_density(&m, &s) + lam * 0.36 / 2.0).abs() < 1e-12);
        let b = logderiv_b(&m, &LatticeState::zeros(&m), ShiftDirection::unit(0, 1)).unwrap();
        assert_eq!(b, 0.0);
        let mut s = LatticeState::zeros(&m);
        s.shift(&m, 0, -1, 1.0);
        let b = logderiv_b(&m, &s, ShiftDirection::unit(0, -1)).unwrap();
        assert!((b + m.params().lambda(-1)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_cocycle_closed_form() {
        let m = single(OneSitePotential::zero(), 3);
        let mut s = LatticeState::zeros(&m);
        let (c, theta, n) = (0.4, 0.3, 2);
        s.shift(&m, 0, n, c);
        let lam = m.params().lambda(n);
        let a = rn_cocycle(&m, &s, ShiftDirection::new(0, n, theta)).unwrap();
        assert!((a - (-theta * lam * c - theta * theta * lam / 2.0).exp()).abs() < 1e-14);
        assert_eq!(rn_cocycle(&m, &s, ShiftDirection::new(0, n, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn cocycle_is_exponentiated_density_difference() {
        let m = coupled();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let s = LatticeState::bridge(&m, &mut rng);
            let dir = ShiftDirection::new(rng.random_range(0..3), rng.random_range(-4..=4), rng.random_range(-0.5..0.5));
            let mut t = s.clone();
            t.shift(&m, dir.site, dir.mode, dir.theta);
            let want = log_density(&m, &t) - log_density(&m, &s);
            let got = log_rn_cocycle(&m, &s, dir).unwrap();
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn cocycle_composition() {
        let m = coupled();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let s = LatticeState::bridge(&m, &mut rng);
            let d = ShiftDirection::new(1, rng.random_range(-4..=4), 0.0);
            let (t1, t2) = (rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
            let mut shifted = s.clone();
            shifted.shift(&m, d.site, d.mode, t1);
            let lhs = rn_cocycle(&m, &s, d.scaled(t1 + t2)).unwrap();
            let rhs = rn_cocycle(&m, &s, d.scaled(t1)).unwrap() * rn_cocycle(&m, &shifted, d.scaled(t2)).unwrap();
            assert!(((lhs - rhs) / lhs).abs() < 1e-10);
        }
    }

    #[test]
    fn logderiv_matches_finite_differences() {
        let m = single(OneSitePotential::quartic(1.0), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let s = LatticeState::bridge(&m, &mut rng);
            for n in -4..=4 {
                let b = logderiv_b(&m, &s, ShiftDirection::unit(0, n)).unwrap();
                let eps = 1e-5;
                let (mut up, mut dn) = (s.clone(), s.clone());
                up.shift(&m, 0, n, eps);
                dn.shift(&m, 0, n, -eps);
                let fd = (log_density(&m, &up) - log_density(&m, &dn)) / (2.0 * eps);
                assert!((fd - b).abs() <= 1e-6 * b.abs().max(1.0), "mode {n}: {fd} vs {b}");
                // derivative of the log-cocycle at θ = 0
                let dl = (log_rn_cocycle(&m, &s, ShiftDirection::new(0, n, eps)).unwrap()
                    - log_rn_cocycle(&m, &s, ShiftDirection::new(0, n, -eps)).unwrap())
                    / (2.0 * eps);
                assert!((dl - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn site_logderivs_agree_with_single() {
        let m = coupled();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = LatticeState::bridge(&m, &mut rng);
        let all = logderiv_site(&m, &s, 2).unwrap();
        for (i, n) in (-4..=4).enumerate() {
            let b = logderiv_b(&m, &s, ShiftDirection::unit(2, n)).unwrap();
            assert!((b - all[i]).abs() < 1e-12 * b.abs().max(1.0));
        }
        assert!(logderiv_b(&m, &s, ShiftDirection::unit(0, 5)).is_err());
    }
}
