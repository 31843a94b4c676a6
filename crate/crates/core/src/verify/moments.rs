use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::identities::check_samples;
use super::verdict::{Sidedness, TestVerdict, VerifyContext};
use crate::error::{ensure, Result};
use crate::gibbs::SampleStore;
use crate::interaction::{coercivity_l, nemytskii_f, Model};
use crate::spectral::{eigenfunction, g_constant, green_series, grid_norm, LoopNormKind, OscillatorParams};
use crate::stats::{batch_means_default, weighted_line_fit, Estimate};

/// Per-site loop functional whose `Q`-th moment is tracked across volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentQuantity {
    /// Grid-Hölder norm `|ω_k|_{C^α}` (sup plus grid seminorm).
    Hoelder,
    /// `|ω_k|_{W^{2,α}} = (Σ λ_n^α c_n²)^{1/2}`.
    Sobolev,
    /// `|∫ V'(ω_k) ω_k dτ|`.
    Coercivity,
    /// `|F_k(ω)|_{L¹}` including the pair forces.
    DriftL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub quantity: MomentQuantity,
    pub q: f64,
    pub alpha: f64,
}

impl MomentSpec {
    pub fn new(quantity: MomentQuantity, q: f64, alpha: f64) -> Self {
        Self { quantity, q, alpha }
    }

    fn label(&self) -> String {
        format!("{:?}[Q={},α={}]", self.quantity, self.q, self.alpha).to_lowercase()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub n_sites: usize,
    pub quantity: MomentQuantity,
    pub q: f64,
    pub alpha: f64,
    pub site: Vec<i64>,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentSuiteReport {
    pub rows: Vec<MomentRow>,
    pub verdicts: Vec<TestVerdict>,
}

/// `E[X^Q]` of every spec at every site of one volume, spec-major.
pub fn site_moments(model: &Model, samples: &SampleStore, specs: &[MomentSpec]) -> Result<Vec<Vec<Estimate>>> {
    check_samples(samples)?;
    for s in specs {
        ensure!(s.q >= 1.0, InvalidParameter, "moment order Q must be ≥ 1, got {}", s.q);
        ensure!((0.0..0.5).contains(&s.alpha), InvalidParameter, "α must lie in [0, 1/2), got {}", s.alpha);
    }
    let ns = model.n_sites();
    let grid = model.basis().grid();
    let h = grid.spacing();
    let lams = model.basis().lambdas();
    let per: Vec<Vec<f64>> = (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let state = samples.state(model, i)?;
            let mut row = Vec::with_capacity(specs.len() * ns);
            for s in specs {
                for k in 0..ns {
                    let x = match s.quantity {
                        MomentQuantity::Hoelder => grid_norm(state.site_values(k), grid, LoopNormKind::Hoelder(s.alpha))?,
                        MomentQuantity::Sobolev => state
                            .site_coeffs(k)
                            .iter()
                            .zip(lams)
                            .map(|(c, l)| l.powf(s.alpha) * c * c)
                            .sum::<f64>()
                            .sqrt(),
                        MomentQuantity::Coercivity => coercivity_l(model, &state, k, false)?.abs(),
                        MomentQuantity::DriftL1 => h * nemytskii_f(model, &state, k)?.iter().map(|f| f.abs()).sum::<f64>(),
                    };
                    row.push(x.powf(s.q));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![];
    for si in 0..specs.len() {
        let mut sites = vec![];
        for k in 0..ns {
            let xs: Vec<f64> = per.iter().map(|r| r[si * ns + k]).collect();
            sites.push(batch_means_default(&xs)?);
        }
        out.push(sites);
    }
    Ok(out)
}

/// Moments over a nested volume ladder with the "no systematic growth"
/// verdict: the largest per-site moment of each volume may exceed the
/// running maximum of the smaller volumes by at most `3·max relative SE`.
pub fn moment_suite(ladder: &[(&Model, &SampleStore)], specs: &[MomentSpec], ctx: VerifyContext) -> Result<MomentSuiteReport> {
    ensure!(!ladder.is_empty(), InvalidParameter, "empty volume ladder");
    for w in ladder.windows(2) {
        let (small, big) = (w[0].0.geometry(), w[1].0.geometry());
        ensure!(
            small.sites().iter().all(|s| big.contains(s)),
            InvalidParameter,
            "volume ladder is not nested"
        );
    }
    let mut rows = vec![];
    let mut per_volume = vec![];
    for (model, samples) in ladder {
        let est = site_moments(model, samples, specs)?;
        for (s, sites) in specs.iter().zip(&est) {
            for (site, e) in model.sites().iter().zip(sites) {
                rows.push(MomentRow {
                    n_sites: model.n_sites(),
                    quantity: s.quantity,
                    q: s.q,
                    alpha: s.alpha,
                    site: site.clone(),
                    mean: e.mean,
                    se: e.se,
                });
            }
        }
        per_volume.push(est);
    }
    let n = ladder.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    let hash = ladder.last().map(|(m, _)| m.hash().to_string()).unwrap_or_default();
    let mut verdicts = vec![];
    for (si, s) in specs.iter().enumerate() {
        // largest site moment per volume
        let tops: Vec<Estimate> = per_volume
            .iter()
            .map(|v| *v[si].iter().max_by(|a, b| a.mean.total_cmp(&b.mean)).expect("nonempty volume"))
            .collect();
        let rel = tops
            .iter()
            .map(|e| if e.mean > 0.0 { e.se / e.mean } else { 0.0 })
            .fold(0.0f64, f64::max);
        let bound = 1.0 + 3.0 * rel;
        let mut running = tops[0].mean;
        let mut worst = 0.0f64;
        for e in &tops[1..] {
            let ratio = if running > 0.0 {
                e.mean / running
            } else if e.mean > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(ratio);
            running = running.max(e.mean);
        }
        verdicts.push(
            TestVerdict::bounded(format!("moments:{}", s.label()), "moment-bound", worst, rel, bound, Sidedness::Upper, n)
                .with_context(ctx.seed, &hash),
        );
    }
    Ok(MomentSuiteReport { rows, verdicts })
}

/// `n` log-spaced values in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Coefficient-space vectors `φ_n(t_j + ρ) - φ_n(t_j)` for `shifts` equispaced `t_j`.
fn increment_rows(model: &Model, rho: f64, shifts: usize) -> Vec<Vec<f64>> {
    let beta = model.params().beta;
    let n = model.n_modes() as i64;
    (0..shifts)
        .map(|j| {
            let t = beta * j as f64 / shifts as f64;
            (-n..=n).map(|m| eigenfunction(m, t + rho, beta) - eigenfunction(m, t, beta)).collect()
        })
        .collect()
}

/// `E[(ω_k(τ+ρ) - ω_k(τ))^{2Q}]` for each `ρ`, averaged over `shifts` rigid
/// time translations per sample.
pub fn structure_moments(model: &Model, samples: &SampleStore, site: usize, q: u32, rhos: &[f64], shifts: usize) -> Result<Vec<Estimate>> {
    check_samples(samples)?;
    model.check_site(site)?;
    let shifts = shifts.max(1);
    let rows: Vec<Vec<Vec<f64>>> = rhos.iter().map(|&r| increment_rows(model, r, shifts)).collect();
    let per: Vec<Vec<f64>> = (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let c = samples.site_coeffs(i, site);
            rows.iter()
                .map(|rs| {
                    rs.iter()
                        .map(|d| d.iter().zip(c).map(|(a, b)| a * b).sum::<f64>().powi(2 * q as i32))
                        .sum::<f64>()
                        / shifts as f64
                })
                .collect()
        })
        .collect();
    rhos.iter()
        .enumerate()
        .map(|(r, &rho)| {
            if rho == 0.0 {
                return Ok(Estimate::exact(0.0));
            }
            let xs: Vec<f64> = per.iter().map(|p| p[r]).collect();
            batch_means_default(&xs)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StructurePoint {
    pub rho: f64,
    pub q: u32,
    pub moment: Estimate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderFit {
    pub q: u32,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    /// Allowed shortfall below `Q`: `max(3·slope_se, Q/10)`.
    pub margin: f64,
    pub pass: bool,
}

/// Which normalization of the Green function bound `𝔤` the constants use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenConvention {
    /// `𝔤` as written next to the closed form.
    ClosedForm,
    /// `2𝔤`, matching the eigen-series.
    Series,
}

/// Moment-bound constants `E ω^{2Q} ≤ C` and `E (Δω)^{2Q} ≤ ΔC·ρ^Q`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KolmogorovConstants {
    pub q: u32,
    pub convention: GreenConvention,
    pub g: f64,
    /// `E|F_k|_{L¹}^{2Q}` as fed into both constants.
    pub drift_moment: f64,
    pub c: f64,
    pub delta_c: f64,
}

/// `C = (4g)^Q [(4Q)^Q + g^Q I]` and
/// `ΔC = (4g a/√m)^Q [(8Q)^Q + (g aβ/√m)^Q I]` with `I = E|F_k|_{L¹}^{2Q}`.
pub fn kolmogorov_constants(p: &OscillatorParams, q: u32, drift_moment: f64) -> Vec<KolmogorovConstants> {
    let qf = q as f64;
    let r = p.rigidity / p.mass.sqrt();
    [GreenConvention::ClosedForm, GreenConvention::Series]
        .into_iter()
        .map(|convention| {
            let g = match convention {
                GreenConvention::ClosedForm => g_constant(p),
                GreenConvention::Series => 2.0 * g_constant(p),
            };
            KolmogorovConstants {
                q,
                convention,
                g,
                drift_moment,
                c: (4.0 * g).powf(qf) * ((4.0 * qf).powf(qf) + g.powf(qf) * drift_moment),
                delta_c: (4.0 * g * r).powf(qf) * ((8.0 * qf).powf(qf) + (g * r * p.beta).powf(qf) * drift_moment),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub site: usize,
    pub points: Vec<StructurePoint>,
    pub fits: Vec<HolderFit>,
    /// Printed only; the verdicts compare slopes.
    pub constants: Vec<KolmogorovConstants>,
    pub verdicts: Vec<TestVerdict>,
}

/// Fits `log E[(Δω)^{2Q}]` against `log ρ`; the moment bound `≲ ρ^Q`
/// predicts a slope of at least `Q`.
pub fn holder_scaling(
    model: &Model,
    samples: &SampleStore,
    site: usize,
    qs: &[u32],
    rhos: &[f64],
    shifts: usize,
    ctx: VerifyContext,
) -> Result<HolderReport> {
    let beta = model.params().beta;
    ensure!(qs.iter().all(|q| (1..=2).contains(q)), InvalidParameter, "Q must be 1 or 2");
    ensure!(
        rhos.iter().all(|&r| r > 0.0 && r <= 0.5 * beta),
        Domain,
        "time separations must lie in (0, β/2]"
    );
    let lo = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rhos.iter().cloned().fold(0.0, f64::max);
    ensure!(
        rhos.len() >= 3 && hi / lo >= 10f64.powf(1.5),
        Domain,
        "separations must span at least 1.5 decades with 3 points (got {lo}..{hi})"
    );
    let mut points = vec![];
    let mut fits = vec![];
    let mut verdicts = vec![];
    let mut constants = vec![];
    let specs: Vec<MomentSpec> = qs.iter().map(|&q| MomentSpec::new(MomentQuantity::DriftL1, 2.0 * q as f64, 0.0)).collect();
    let drift = site_moments(model, samples, &specs)?;
    for (&q, d) in qs.iter().zip(&drift) {
        constants.extend(kolmogorov_constants(model.params(), q, d[site].mean));
    }
    for &q in qs {
        let est = structure_moments(model, samples, site, q, rhos, shifts)?;
        ensure!(est.iter().all(|e| e.mean > 0.0), Domain, "non-positive structure moment");
        let x: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = est.iter().map(|e| e.mean.ln()).collect();
        let s: Vec<f64> = est.iter().map(|e| e.se / e.mean).collect();
        let fit = weighted_line_fit(&x, &y, &s)?;
        let margin = (3.0 * fit.slope_se).max(0.1 * q as f64);
        let v = TestVerdict::bounded(
            format!("holder[site={site},Q={q}]"),
            "kolmogorov",
            fit.slope,
            fit.slope_se,
            q as f64 - margin,
            Sidedness::Lower,
            samples.len(),
        )
        .with_context(ctx.seed, model.hash());
        fits.push(HolderFit {
            q,
            slope: fit.slope,
            slope_se: fit.slope_se,
            intercept: fit.intercept,
            margin,
            pass: v.pass,
        });
        verdicts.push(v);
        points.extend(rhos.iter().zip(&est).map(|(&rho, &moment)| StructurePoint { rho, q, moment }));
    }
    Ok(HolderReport {
        site,
        points,
        fits,
        constants,
        verdicts,
    })
}

/// `E[(Δω)²] = 2(𝔊(0) - 𝔊(ρ))` for the mode-truncated Gaussian loop.
pub fn gaussian_increment_variance(model: &Model, rho: f64) -> f64 {
    let p = model.params();
    let n = model.n_modes();
    2.0 * (green_series(0.0, p, n) - green_series(rho, p, n))
}

/// Wick check `E[(Δω)⁴] = 3(E[(Δω)²])²` against the series value of the
/// second moment, one verdict per separation. Gaussian decoupled models only.
pub fn wick_check(model: &Model, samples: &SampleStore, site: usize, rhos: &[f64], shifts: usize, ctx: VerifyContext) -> Result<Vec<TestVerdict>> {
    ensure!(
        model.potential().is_zero() && model.spec().coupling.is_decoupled(),
        Domain,
        "the Wick identity check needs a Gaussian decoupled model"
    );
    let fourth = structure_moments(model, samples, site, 2, rhos, shifts)?;
    Ok(rhos
        .iter()
        .zip(&fourth)
        .map(|(&rho, e)| {
            let g2 = gaussian_increment_variance(model, rho);
            let diff = Estimate {
                mean: e.mean - 3.0 * g2 * g2,
                se: e.se,
            };
            TestVerdict::two_sided(format!("wick[site={site},ρ={rho:.4}]"), "wick", diff, samples.len(), ctx.threshold)
                .with_context(ctx.seed, model.hash())
        })
        .collect())
}
