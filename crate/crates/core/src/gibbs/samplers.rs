use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::interaction::{local_action, nemytskii_into, LatticeState, Model};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteOrder {
    #[default]
    Lexicographic,
    Random,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn add(&mut self, other: AcceptStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

fn site_sequence<R: Rng + ?Sized>(n: usize, order: SiteOrder, rng: &mut R) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    if order == SiteOrder::Random {
        v.shuffle(rng);
    }
    v
}

/// One pCN sweep: each site in turn proposes `√(1-s²)·ω_k + s·ξ` with `ξ` a
/// fresh bridge draw, accepted with `min(1, e^{-ΔS})` where `S` is the action.
pub fn pcn_sweep<R: Rng + ?Sized>(
    model: &Model,
    state: &mut LatticeState,
    step: f64,
    order: SiteOrder,
    rng: &mut R,
) -> AcceptStats {
    let basis = model.basis();
    let keep = (1.0 - step * step).max(0.0).sqrt();
    let mut prop = vec![0.0; model.n_coeffs()];
    let mut vals = vec![0.0; model.n_points()];
    let mut stats = AcceptStats::default();
    for site in site_sequence(model.n_sites(), order, rng) {
        for ((p, &c), &lam) in prop.iter_mut().zip(state.site_coeffs(site)).zip(basis.lambdas()) {
            let z: f64 = rng.sample(StandardNormal);
            *p = keep * c + step * z / lam.sqrt();
        }
        basis.synthesize_into(&prop, &mut vals);
        let delta = local_action(model, state, site, &vals) - local_action(model, state, site, state.site_values(site));
        let u: f64 = rng.random();
        stats.proposed += 1;
        if delta <= 0.0 || u.ln() < -delta {
            state.set_site_with_values(site, &prop, &vals);
            stats.accepted += 1;
        }
    }
    stats
}

/// One Strang step of `dc = -½(λc + ∂_c S) dt + dW` for every coefficient:
/// exact OU flow over `dt/2`, drift kick of `dt/2·∂_c S`, exact OU flow over `dt/2`.
///
/// With `noise = false` the OU halves only contract, leaving a gradient flow.
pub fn langevin_sweep<R: Rng + ?Sized>(
    model: &Model,
    state: &mut LatticeState,
    dt: f64,
    noise: bool,
    rng: &mut R,
) -> Result<()> {
    ensure!(dt > 0.0 && dt.is_finite(), StepSize, "Langevin step must be positive, got {dt}");
    let basis = model.basis();
    let lams = basis.lambdas();
    let decay: Vec<f64> = lams.iter().map(|l| (-l * dt / 4.0).exp()).collect();
    let sd: Vec<f64> = lams.iter().map(|l| ((1.0 - (-l * dt / 2.0).exp()) / l).sqrt()).collect();
    let ns = model.n_sites();
    let nc = model.n_coeffs();

    let ou = |state: &mut LatticeState, rng: &mut R| {
        let mut c = state.coeffs().to_vec();
        for (i, x) in c.iter_mut().enumerate() {
            let j = i % nc;
            *x *= decay[j];
            if noise {
                let z: f64 = rng.sample(StandardNormal);
                *x += sd[j] * z;
            }
        }
        c
    };

    let c = ou(state, rng);
    *state = LatticeState::from_coeffs(model, c)?;
    // drift from the state after the first half-step, all sites at once
    let mut grad = vec![0.0; ns * nc];
    let mut f = vec![0.0; model.n_points()];
    for site in 0..ns {
        nemytskii_into(model, state, site, state.site_values(site), &mut f);
        basis.project_into(&f, &mut grad[site * nc..(site + 1) * nc]);
    }
    ensure!(
        grad.iter().all(|g| g.is_finite()),
        StepSize,
        "drift overflowed at dt = {dt}; reduce the step"
    );
    let mut c: Vec<f64> = state.coeffs().iter().zip(&grad).map(|(x, g)| x - 0.5 * dt * g).collect();
    *state = LatticeState::from_coeffs(model, std::mem::take(&mut c))?;
    let c = ou(state, rng);
    *state = LatticeState::from_coeffs(model, c)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::log_density;
    use crate::interaction::{ModelSpec, OneSitePotential};
    use crate::spectral::OscillatorParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(pot: OneSitePotential, n: usize) -> Model {
        Model::new(ModelSpec::single_site(OscillatorParams::new(1.0, 1.0, 1.0).unwrap(), pot, n)).unwrap()
    }

    /// `log q(x → y)` for the pCN proposal at one site, up to a constant.
    fn log_proposal(model: &Model, x: &[f64], y: &[f64], s: f64) -> f64 {
        let keep = (1.0 - s * s).sqrt();
        -x.iter()
            .zip(y)
            .zip(model.basis().lambdas())
            .map(|((a, b), l)| l * (b - keep * a).powi(2))
            .sum::<f64>()
            / (2.0 * s * s)
    }

    #[test]
    fn pcn_detailed_balance() {
        let m = Model::preset("model1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = 0.4;
        for _ in 0..200 {
            let x = LatticeState::bridge(&m, &mut rng);
            let mut y = x.clone();
            let site = rng.random_range(0..m.n_sites());
            let other = LatticeState::bridge(&m, &mut rng);
            y.set_site(&m, site, other.site_coeffs(site));
            let da = local_action(&m, &x, site, y.site_values(site)) - local_action(&m, &x, site, x.site_values(site));
            let acc_xy = (-da).min(0.0);
            let acc_yx = da.min(0.0);
            let lhs = log_density(&m, &x) + log_proposal(&m, x.site_coeffs(site), y.site_coeffs(site), s) + acc_xy;
            let rhs = log_density(&m, &y) + log_proposal(&m, y.site_coeffs(site), x.site_coeffs(site), s) + acc_yx;
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn pcn_acceptance_limits() {
        let m = single(OneSitePotential::zero(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = LatticeState::zeros(&m);
        let mut acc = AcceptStats::default();
        for _ in 0..500 {
            acc.add(pcn_sweep(&m, &mut st, 1.0, SiteOrder::Lexicographic, &mut rng));
        }
        assert_eq!(acc.rate(), 1.0);

        let m = single(OneSitePotential::quartic(1.0), 4);
        let mut st = LatticeState::bridge(&m, &mut rng);
        let mut acc = AcceptStats::default();
        for _ in 0..500 {
            acc.add(pcn_sweep(&m, &mut st, 1e-4, SiteOrder::Random, &mut rng));
        }
        assert!(acc.rate() > 0.99);
    }

    #[test]
    fn langevin_gaussian_variances() {
        let m = single(OneSitePotential::zero(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = LatticeState::zeros(&m);
        let dt = 0.5;
        let n = 100_000;
        let mut series = vec![vec![]; 5];
        for _ in 0..n {
            langevin_sweep(&m, &mut st, dt, true, &mut rng).unwrap();
            for (i, c) in st.site_coeffs(0).iter().enumerate() {
                series[i].push(c * c);
            }
        }
        for (i, s) in series.iter().enumerate() {
            let e = crate::stats::batch_means_default(s).unwrap();
            let want = 1.0 / m.basis().lambdas()[i];
            assert!((e.mean - want).abs() < 5.0 * e.se, "mode {i}: {} ± {} vs {want}", e.mean, e.se);
        }
    }

    #[test]
    fn ou_half_step_preserves_the_gaussian_exactly() {
        // stationarity of N(0, 1/λ) under x ↦ e^{-λdt/4}x + σξ
        let m = single(OneSitePotential::zero(), 3);
        for (i, &l) in m.basis().lambdas().iter().enumerate() {
            for dt in [1e-3, 0.1, 2.0] {
                let d = (-l * dt / 4.0).exp();
                let var = (1.0 - (-l * dt / 2.0).exp()) / l;
                assert!((d * d / l + var - 1.0 / l).abs() < 1e-15, "mode {i}");
            }
        }
    }

    #[test]
    fn noiseless_flow_decreases_energy() {
        let m = single(OneSitePotential::polynomial(vec![0.0, 0.5, 0.0, 1.0]), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut st = LatticeState::bridge(&m, &mut rng);
        let mut last = -log_density(&m, &st);
        for _ in 0..100 {
            langevin_sweep(&m, &mut st, 0.01, false, &mut rng).unwrap();
            let e = -log_density(&m, &st);
            assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn langevin_rejects_bad_step() {
        let m = single(OneSitePotential::zero(), 2);
        let mut st = LatticeState::zeros(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(langevin_sweep(&m, &mut st, 0.0, true, &mut rng).is_err());
        let m = single(OneSitePotential::quartic(1.0), 2);
        let mut st = LatticeState::zeros(&m);
        st.shift(&m, 0, 0, 1e120);
        assert!(matches!(
            langevin_sweep(&m, &mut st, 0.1, true, &mut rng),
            Err(crate::Error::StepSize(_))
        ));
    }
}
