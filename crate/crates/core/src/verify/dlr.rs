use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::identities::check_samples;
use super::verdict::{TestVerdict, VerifyContext};
use crate::error::{ensure, Result};
use crate::gibbs::{pcn_sweep, PolyObservable, SampleStore, SiteOrder};
use crate::interaction::{BoundaryMode, LatticeGeometry, LatticeState, Model};
use crate::spectral::eigenfunction;
use crate::stats::paired_difference;

/// `A(ω_k(τ))` at a site of the outer volume, `τ = frac·β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointObservable {
    pub site: usize,
    pub frac: f64,
    pub poly: PolyObservable,
}

impl PointObservable {
    pub fn square(site: usize) -> Self {
        Self {
            site,
            frac: 0.0,
            poly: PolyObservable::power(2),
        }
    }

    pub fn eval(&self, model: &Model, state: &LatticeState) -> f64 {
        let beta = model.params().beta;
        let n = model.n_modes() as i64;
        let q: f64 = state
            .site_coeffs(self.site)
            .iter()
            .zip(-n..=n)
            .map(|(c, m)| c * eigenfunction(m, self.frac * beta, beta))
            .sum();
        self.poly.eval(q)
    }
}

/// Block to redraw: a box inside the sampled volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubVolume {
    pub extent: Vec<usize>,
    pub origin: Vec<i64>,
}

/// Inner sampler used to redraw the block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedrawConfig {
    pub sweeps: usize,
    pub step: f64,
}

impl Default for RedrawConfig {
    fn default() -> Self {
        Self { sweeps: 10, step: 0.5 }
    }
}

/// Consistency of the kernels: draws from the outer kernel have their
/// `block` redrawn from the inner kernel with the rest of the draw as
/// boundary; observables must keep their distribution. One verdict per
/// observable on the before/after difference of means.
pub fn dlr_test(
    model: &Model,
    block: &SubVolume,
    samples: &SampleStore,
    observables: &[PointObservable],
    redraw: RedrawConfig,
    ctx: VerifyContext,
) -> Result<Vec<TestVerdict>> {
    check_samples(samples)?;
    for o in observables {
        model.check_site(o.site)?;
    }
    ensure!(redraw.sweeps >= 1, InvalidParameter, "redraw needs at least one sweep");
    let mut sub = LatticeGeometry::new(block.extent.clone(), BoundaryMode::Zero);
    sub.origin = Some(block.origin.clone());
    sub.validate()?;
    let block_sites: Vec<usize> = sub.sites().iter().map(|s| model.site_index(s)).collect::<Result<_>>()?;
    let whole = block_sites.len() == model.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut before = vec![Vec::with_capacity(samples.len()); observables.len()];
    let mut after = before.clone();
    for i in 0..samples.len() {
        let mut state = samples.state(model, i)?;
        for (o, b) in observables.iter().zip(before.iter_mut()) {
            b.push(o.eval(model, &state));
        }
        if whole {
            for _ in 0..redraw.sweeps {
                pcn_sweep(model, &mut state, redraw.step, SiteOrder::Lexicographic, &mut rng);
            }
        } else {
            let inner = model.restricted(block.extent.clone(), block.origin.clone(), &state)?;
            let coeffs: Vec<f64> = block_sites.iter().flat_map(|&s| state.site_coeffs(s).to_vec()).collect();
            let mut local = LatticeState::from_coeffs(&inner, coeffs)?;
            for _ in 0..redraw.sweeps {
                pcn_sweep(&inner, &mut local, redraw.step, SiteOrder::Lexicographic, &mut rng);
            }
            for (j, &s) in block_sites.iter().enumerate() {
                state.set_site_with_values(s, local.site_coeffs(j), local.site_values(j));
            }
        }
        for (o, a) in observables.iter().zip(after.iter_mut()) {
            a.push(o.eval(model, &state));
        }
    }
    observables
        .iter()
        .zip(before.iter().zip(&after))
        .map(|(o, (b, a))| {
            let est = paired_difference(a, b)?;
            let inside = block_sites.contains(&o.site);
            Ok(TestVerdict::two_sided(
                format!("dlr[site={}{}]:{:?}@{}", o.site, if inside { ",in" } else { ",out" }, o.poly.coeffs, o.frac),
                "dlr",
                est,
                samples.len(),
                ctx.threshold,
            )
            .with_context(ctx.seed, model.hash()))
        })
        .collect()
}
