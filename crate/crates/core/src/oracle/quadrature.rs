use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::gibbs::{log_density, logderiv_b, ShiftDirection};
use crate::interaction::{action, LatticeState, Model};

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the weight `e^{-x²}`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    // ascending order
    x.reverse();
    w.reverse();
    (x, w)
}

pub const MAX_QUADRATURE_POINTS: usize = 10_000_000;

/// Rule order override for one Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeOrder {
    pub mode: i64,
    pub order: usize,
}

/// Tensor Gauss–Hermite rule over all coefficients of a tiny model: `order`
/// nodes per coefficient unless a mode has its own entry in `mode_orders`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub order: usize,
    #[serde(default)]
    pub mode_orders: Vec<ModeOrder>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::new(20)
    }
}

impl QuadratureSpec {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            mode_orders: vec![],
        }
    }

    pub fn with_mode_order(mut self, mode: i64, order: usize) -> Self {
        self.mode_orders.retain(|m| m.mode != mode);
        self.mode_orders.push(ModeOrder { mode, order });
        self
    }

    pub fn order_for(&self, mode: i64) -> usize {
        self.mode_orders.iter().find(|m| m.mode == mode).map_or(self.order, |m| m.order)
    }

    /// Total grid size for `model`.
    pub fn n_points(&self, model: &Model) -> f64 {
        let n = model.n_modes() as i64;
        let per_site: f64 = (-n..=n).map(|k| self.order_for(k) as f64).product();
        per_site.powi(model.n_sites() as i32)
    }

    /// Base order 20 with the zero mode, which carries nearly all of the
    /// non-Gaussian weight, raised as far as the point budget allows (≤ 60).
    pub fn auto(model: &Model) -> Self {
        let base = Self::new(20);
        let mut best = base.clone();
        for order in (20..=60).step_by(4) {
            let s = base.clone().with_mode_order(0, order);
            if s.n_points(model) <= MAX_QUADRATURE_POINTS as f64 {
                best = s;
            }
        }
        best
    }
}

/// Shrink of the scaled Hermite width as a function of marginal kurtosis:
/// 1 for a Gaussian, down to ½ for platykurtic (quartic-dominated) marginals.
fn width_factor(kurtosis: f64) -> f64 {
    if !kurtosis.is_finite() {
        return 1.0;
    }
    (1.0 - 0.5 * (3.0 - kurtosis) / 0.4).clamp(0.5, 1.0)
}

/// Exact expectations under the truncated Gibbs density by tensor quadrature.
///
/// Coefficient `c_i` is integrated as `c_i = μ_i + s_i x`. Pilot passes,
/// starting from the bare Gaussian scales `s_i = (2/λ_i)^{1/2}`, estimate each
/// marginal's mean, variance and kurtosis; the final rule is centred on the
/// mean with a width set by the variance and narrowed for flat-topped
/// marginals. Gaussian models keep `s_i = (2/λ_i)^{1/2}` and are integrated exactly.
pub struct QuadratureOracle<'m> {
    model: &'m Model,
    /// Nodes and weights per axis.
    rules: Vec<(Vec<f64>, Vec<f64>)>,
    center: Vec<f64>,
    scale: Vec<f64>,
    dim: usize,
    log_z: f64,
}

impl<'m> QuadratureOracle<'m> {
    pub fn new(model: &'m Model, spec: QuadratureSpec) -> Result<Self> {
        let n = model.n_modes() as i64;
        let min_order = (-n..=n).map(|k| spec.order_for(k)).min().unwrap_or(spec.order);
        ensure!(min_order >= 20, InvalidParameter, "quadrature order must be ≥ 20, got {min_order}");
        ensure!(
            model.n_sites() <= 2 && model.n_modes() <= 2,
            Capacity,
            "quadrature oracle handles at most 2 sites and N ≤ 2 (got {} sites, N = {})",
            model.n_sites(),
            model.n_modes()
        );
        let dim = model.n_sites() * model.n_coeffs();
        let points = spec.n_points(model);
        ensure!(
            points <= MAX_QUADRATURE_POINTS as f64,
            Capacity,
            "{dim} coefficients need {points:.2e} points, above the limit of {MAX_QUADRATURE_POINTS}"
        );
        let nc = model.n_coeffs();
        let rules = (0..dim).map(|d| gauss_hermite(spec.order_for((d % nc) as i64 - n))).collect();
        let scale: Vec<f64> = (0..dim).map(|d| (2.0 / model.basis().lambdas()[d % nc]).sqrt()).collect();
        let mut o = Self {
            model,
            rules,
            center: vec![0.0; dim],
            scale,
            dim,
            log_z: 0.0,
        };
        let base = o.scale.clone();
        for _ in 0..2 {
            let p = o.expect(4 * dim, |s, out| {
                for (i, &c) in s.coeffs().iter().enumerate() {
                    out[4 * i] = c;
                    out[4 * i + 1] = c * c;
                    out[4 * i + 2] = c * c * c;
                    out[4 * i + 3] = c * c * c * c;
                }
            });
            for i in 0..dim {
                let (m1, m2, m3, m4) = (p[4 * i], p[4 * i + 1], p[4 * i + 2], p[4 * i + 3]);
                let var = m2 - m1 * m1;
                let central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
                if var.is_finite() && var > 0.0 {
                    o.center[i] = m1;
                    let s = (2.0 * var).sqrt() * width_factor(central4 / (var * var));
                    // within rounding of the Gaussian width, keep it exactly
                    o.scale[i] = if ((s - base[i]) / base[i]).abs() < 1e-9 { base[i] } else { s };
                }
            }
        }
        let (sums, shift) = o.raw_sums(1, |_, out| out[0] = 1.0);
        o.log_z = sums[0].ln() + shift + o.scale.iter().map(|s| s.ln()).sum::<f64>();
        Ok(o)
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn n_points(&self) -> usize {
        self.rules.iter().map(|r| r.0.len()).product()
    }

    /// `log Z` of the truncated density `exp(-Σλc²/2 - action)`.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// `Σ_grid Π w_j e^{x_j²} ρ(c) f(c)` scaled by `e^{-shift}`, parallel over
    /// the first axis and reduced in a fixed order.
    fn raw_sums<F>(&self, n_out: usize, f: F) -> (Vec<f64>, f64)
    where
        F: Fn(&LatticeState, &mut [f64]) + Sync,
    {
        let dim = self.dim;
        let (ns, nc) = (self.model.n_sites(), self.model.n_coeffs());
        let lams = self.model.basis().lambdas();
        // log-integrand at the centre fixes the overflow shift
        let shift = {
            let mut st = LatticeState::zeros(self.model);
            for site in 0..ns {
                st.set_site(self.model, site, &self.center[site * nc..(site + 1) * nc]);
            }
            log_density(self.model, &st)
        };
        // per-axis log weights and coordinates, precomputed
        let axes: Vec<Vec<(f64, f64)>> = (0..dim)
            .map(|d| {
                let (x, w) = &self.rules[d];
                x.iter()
                    .zip(w)
                    .map(|(&x, &w)| {
                        let c = self.center[d] + self.scale[d] * x;
                        (c, w.ln() + x * x - 0.5 * lams[d % nc] * c * c)
                    })
                    .collect()
            })
            .collect();
        let rest: usize = axes[1..].iter().map(|a| a.len()).product();
        let partial: Vec<Vec<f64>> = (0..axes[0].len())
            .into_par_iter()
            .map(|first| {
                let mut acc = vec![0.0; n_out];
                let mut out = vec![0.0; n_out];
                let mut idx = vec![0usize; dim];
                idx[0] = first;
                let mut coeffs = vec![0.0; dim];
                let mut state = LatticeState::zeros(self.model);
                for _ in 0..rest {
                    let mut logw = -shift;
                    for d in 0..dim {
                        let (c, lw) = axes[d][idx[d]];
                        coeffs[d] = c;
                        logw += lw;
                    }
                    for site in 0..ns {
                        state.set_site(self.model, site, &coeffs[site * nc..(site + 1) * nc]);
                    }
                    let weight = (logw - action(self.model, &state)).exp();
                    f(&state, &mut out);
                    for (a, o) in acc.iter_mut().zip(&out) {
                        *a += weight * o;
                    }
                    // odometer over axes 1..dim
                    for d in (1..dim).rev() {
                        idx[d] += 1;
                        if idx[d] < axes[d].len() {
                            break;
                        }
                        idx[d] = 0;
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![0.0; n_out];
        for p in partial {
            for (t, x) in total.iter_mut().zip(p) {
                *t += x;
            }
        }
        (total, shift)
    }

    /// Expectations `E[f_j]` for `n_out` functionals computed in one pass.
    pub fn expect<F>(&self, n_out: usize, f: F) -> Vec<f64>
    where
        F: Fn(&LatticeState, &mut [f64]) + Sync,
    {
        let (mut sums, _) = self.raw_sums(n_out + 1, |s, out| {
            out[0] = 1.0;
            f(s, &mut out[1..]);
        });
        let z = sums.remove(0);
        sums.iter().map(|x| x / z).collect()
    }

    /// `E[c_i]` and `E[c_i c_j]` over all coefficients in state order.
    pub fn moments(&self) -> QuadratureMoments {
        let d = self.dim;
        let vals = self.expect(d + d * d, |s, out| {
            let c = s.coeffs();
            out[..d].copy_from_slice(c);
            for i in 0..d {
                for j in 0..d {
                    out[d + i * d + j] = c[i] * c[j];
                }
            }
        });
        QuadratureMoments {
            log_z: self.log_z,
            mean: vals[..d].to_vec(),
            second: vals[d..].to_vec(),
            dim: d,
            n_points: self.n_points(),
        }
    }

    /// `∫(∂_h f)ρ + ∫ f b_h ρ` normalized by `Z`, with its scale.
    pub fn ibp_residual<F>(&self, dir: ShiftDirection, f: F) -> Result<IbpResidual>
    where
        F: Fn(&LatticeState) -> (f64, f64) + Sync,
    {
        dir.validate(self.model)?;
        let model = self.model;
        let v = self.expect(4, |s, out| {
            let (fv, df) = f(s);
            let b = logderiv_b(model, s, dir).unwrap_or(f64::NAN);
            out[0] = df;
            out[1] = fv * b;
            out[2] = df.abs();
            out[3] = (fv * b).abs();
        });
        ensure!(v.iter().all(|x| x.is_finite()), Domain, "non-finite integrand in IbP residual");
        let residual = v[0] + v[1];
        let scale = v[2].max(v[3]);
        Ok(IbpResidual {
            derivative_term: v[0],
            drift_term: v[1],
            residual,
            scale,
            relative: if scale > 0.0 { residual.abs() / scale } else { residual.abs() },
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureMoments {
    pub log_z: f64,
    pub mean: Vec<f64>,
    /// Row-major `E[c_i c_j]`.
    pub second: Vec<f64>,
    pub dim: usize,
    pub n_points: usize,
}

impl QuadratureMoments {
    pub fn second(&self, i: usize, j: usize) -> f64 {
        self.second[i * self.dim + j]
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IbpResidual {
    pub derivative_term: f64,
    pub drift_term: f64,
    pub residual: f64,
    /// `max(E|∂f|, E|f b|)`.
    pub scale: f64,
    pub relative: f64,
}

/// Convenience wrapper: moments for a model at the given rule.
pub fn quadrature_moments(model: &Model, spec: QuadratureSpec) -> Result<QuadratureMoments> {
    Ok(QuadratureOracle::new(model, spec)?.moments())
}

/// `E[ω_k(0)²]` for every site.
pub fn quadrature_omega0_sq(model: &Model, spec: QuadratureSpec) -> Result<Vec<f64>> {
    let o = QuadratureOracle::new(model, spec)?;
    let n = model.n_sites();
    Ok(o.expect(n, |s, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = s.site_values(i)[0].powi(2);
        }
    }))
}
