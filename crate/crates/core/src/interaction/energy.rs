use super::lattice::Partner;
use super::model::{LatticeState, Model};
use crate::error::Result;

/// `∫ V(ω(τ)) dτ` by the rectangle rule.
pub fn potential_energy(model: &Model, values: &[f64]) -> f64 {
    let v = model.potential();
    if v.is_zero() {
        return 0.0;
    }
    model.basis().grid().spacing() * values.iter().map(|&q| v.value(q)).sum::<f64>()
}

fn pair_energy(model: &Model, x: &[f64], y: &[f64]) -> f64 {
    let w = model.pair_potential();
    model.basis().grid().spacing() * x.iter().zip(y).map(|(a, b)| w.value(a - b)).sum::<f64>()
}

/// Interaction energy plus one-site potentials, without the Gaussian part.
///
/// Bonds inside the volume are listed from both ends, so they carry half
/// weight per listing; bonds to frozen outside loops carry full weight.
pub fn action(model: &Model, state: &LatticeState) -> f64 {
    let mut total = 0.0;
    for (i, links) in model.neighbourhood().links.iter().enumerate() {
        let x = state.site_values(i);
        total += potential_energy(model, x);
        for l in links {
            let y = model.partner_values(state, l.partner);
            let e = l.strength * pair_energy(model, x, y);
            total += match l.partner {
                Partner::Inner(_) => 0.5 * e,
                Partner::Outer(_) => e,
            };
        }
    }
    total
}

/// The part of the action that depends on site `site`, evaluated with the
/// site's grid values replaced by `values`.
pub fn local_action(model: &Model, state: &LatticeState, site: usize, values: &[f64]) -> f64 {
    let mut total = potential_energy(model, values);
    for l in &model.neighbourhood().links[site] {
        let y = model.partner_values(state, l.partner);
        total += l.strength * pair_energy(model, values, y);
    }
    total
}

/// Pointwise drift `F_k = V'(ω_k) + Σ_j J_{kj} w'(ω_k - ω_j)` on the grid.
pub fn nemytskii_f(model: &Model, state: &LatticeState, site: usize) -> Result<Vec<f64>> {
    model.check_site(site)?;
    let mut out = vec![0.0; model.n_points()];
    nemytskii_into(model, state, site, state.site_values(site), &mut out);
    Ok(out)
}

/// Drift for site `site` with its own values replaced by `x`.
pub(crate) fn nemytskii_into(model: &Model, state: &LatticeState, site: usize, x: &[f64], out: &mut [f64]) {
    let v = model.potential();
    for (o, &q) in out.iter_mut().zip(x) {
        *o = v.d1(q);
    }
    let w = model.pair_potential();
    for l in &model.neighbourhood().links[site] {
        let y = model.partner_values(state, l.partner);
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
            *o += l.strength * w.d1(a - b);
        }
    }
}

/// Gradient of the action in the mode coefficients of `site`: `(F_k, φ_n)` by quadrature.
pub fn action_gradient(model: &Model, state: &LatticeState, site: usize) -> Result<Vec<f64>> {
    let f = nemytskii_f(model, state, site)?;
    Ok(model.basis().project(&f))
}

/// `(V'(ω_k), ω_k)`, or `(F_k(ω), ω_k)` when `with_coupling` is set.
pub fn coercivity_l(model: &Model, state: &LatticeState, site: usize, with_coupling: bool) -> Result<f64> {
    model.check_site(site)?;
    let x = state.site_values(site);
    let h = model.basis().grid().spacing();
    let f = if with_coupling {
        nemytskii_f(model, state, site)?
    } else {
        x.iter().map(|&q| model.potential().d1(q)).collect()
    };
    Ok(h * f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
}
