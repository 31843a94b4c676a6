use rayon::prelude::*;
use serde::Serialize;

use super::catalog::{resolve_all, TestFunction};
use super::verdict::{TestVerdict, VerifyContext};
use crate::error::{ensure, Result};
use crate::gibbs::{log_rn_cocycle, logderiv_site, SampleStore, ShiftDirection};
use crate::interaction::Model;
use crate::stats::{batch_means_default, Estimate};

pub const MIN_SAMPLES: usize = 100;

pub(crate) fn check_samples(samples: &SampleStore) -> Result<()> {
    ensure!(
        samples.len() >= MIN_SAMPLES,
        InsufficientData,
        "{} samples, need at least {MIN_SAMPLES}",
        samples.len()
    );
    Ok(())
}

/// Per-sample values of `rows` series, computed in parallel and returned in
/// sample order.
fn series<F>(samples: &SampleStore, rows: usize, per_sample: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let per: Vec<Vec<f64>> = (0..samples.len()).into_par_iter().map(per_sample).collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(per.len()); rows];
    for row in per {
        for (o, v) in out.iter_mut().zip(row) {
            o.push(v);
        }
    }
    Ok(out)
}

/// Integration by parts `E[∂_h f] + E[f·b_h] = 0`, one verdict per
/// (direction, function) in direction-major order.
pub fn ibp_test(
    model: &Model,
    samples: &SampleStore,
    directions: &[ShiftDirection],
    fns: &[TestFunction],
    ctx: VerifyContext,
) -> Result<Vec<TestVerdict>> {
    check_samples(samples)?;
    for d in directions {
        d.validate(model)?;
    }
    let resolved = resolve_all(model, fns);
    let mut sites: Vec<usize> = directions.iter().map(|d| d.site).collect();
    sites.sort_unstable();
    sites.dedup();
    let rows = directions.len() * resolved.len();
    let data = series(samples, rows, |i| {
        let state = samples.state(model, i)?;
        let b: Vec<Vec<f64>> = sites.iter().map(|&s| logderiv_site(model, &state, s)).collect::<Result<_>>()?;
        let mut row = Vec::with_capacity(rows);
        for d in directions {
            let bs = &b[sites.binary_search(&d.site).expect("site listed")];
            let bh = d.theta * bs[d.coeff_index(model)];
            for f in &resolved {
                let (v, dv) = f.value_and_derivative(model, state.coeffs(), *d);
                row.push(dv + v * bh);
            }
        }
        Ok(row)
    })?;
    let mut out = Vec::with_capacity(rows);
    for (di, d) in directions.iter().enumerate() {
        for (fi, f) in resolved.iter().enumerate() {
            let est = batch_means_default(&data[di * resolved.len() + fi])?;
            out.push(
                TestVerdict::two_sided(format!("ibp[{},{}]:{}", d.site, d.mode, f.name), "ibp", est, samples.len(), ctx.threshold)
                    .with_context(ctx.seed, model.hash()),
            );
        }
    }
    Ok(out)
}

/// Both sides of the quasi-invariance identity `E[f·a_{θh}] = E[f(· - θh)]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowEstimate {
    pub shifted_weight: Estimate,
    pub translated: Estimate,
    pub difference: Estimate,
}

/// `f·e^{log a}` without overflowing when `log a` is large and `f` small.
fn weighted(f: f64, log_a: f64) -> f64 {
    if f == 0.0 {
        0.0
    } else if log_a.abs() < 500.0 {
        f * log_a.exp()
    } else {
        f.signum() * (log_a + f.abs().ln()).exp()
    }
}

pub fn flow_estimates(model: &Model, samples: &SampleStore, dir: ShiftDirection, fns: &[TestFunction]) -> Result<Vec<FlowEstimate>> {
    check_samples(samples)?;
    dir.validate(model)?;
    let resolved = resolve_all(model, fns);
    let nf = resolved.len();
    let data = series(samples, 3 * nf, |i| {
        let state = samples.state(model, i)?;
        let la = log_rn_cocycle(model, &state, dir)?;
        let mut row = Vec::with_capacity(3 * nf);
        for f in &resolved {
            let lhs = weighted(f.value(state.coeffs()), la);
            let rhs = f.shifted(model, state.coeffs(), dir, -1.0);
            ensure!(lhs.is_finite(), Domain, "shift cocycle overflows at sample {i} (log a = {la:.3e})");
            row.extend([lhs, rhs, lhs - rhs]);
        }
        Ok(row)
    })?;
    (0..nf)
        .map(|fi| {
            Ok(FlowEstimate {
                shifted_weight: batch_means_default(&data[3 * fi])?,
                translated: batch_means_default(&data[3 * fi + 1])?,
                difference: batch_means_default(&data[3 * fi + 2])?,
            })
        })
        .collect()
}

/// Quasi-invariance under the shift `θh`, one verdict per function.
pub fn flow_test(
    model: &Model,
    samples: &SampleStore,
    dir: ShiftDirection,
    fns: &[TestFunction],
    ctx: VerifyContext,
) -> Result<Vec<TestVerdict>> {
    let est = flow_estimates(model, samples, dir, fns)?;
    Ok(est
        .iter()
        .zip(fns)
        .map(|(e, f)| {
            TestVerdict::two_sided(
                format!("flow[{},{},θ={}]:{}", dir.site, dir.mode, dir.theta, f.name),
                "flow",
                e.difference,
                samples.len(),
                ctx.threshold,
            )
            .with_context(ctx.seed, model.hash())
        })
        .collect())
}
