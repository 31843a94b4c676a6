use serde::Serialize;

use super::potential::OneSitePotential;
use crate::error::{ensure, Result};

/// Fitted constant pair `(K, L)` for one inequality, or a witness where it fails.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityFit {
    pub name: &'static str,
    pub k: f64,
    pub l: f64,
    pub feasible: bool,
    /// Point at which the defect keeps growing toward the end of the range.
    pub witness: Option<f64>,
}

/// Sandwich bounds `K_V⁻¹|q|^{P-l} - C_V ≤ (sgn q)^l V^{(l)}(q) ≤ K_V|q|^{P-l} + C_V`.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichFit {
    pub degree: usize,
    pub k_v: f64,
    pub c_v: f64,
    pub feasible: bool,
    pub witness: Option<f64>,
}

/// Numerical certificate of the coercivity and growth inequalities over a finite range.
#[derive(Debug, Clone, Serialize)]
pub struct VAssumptionReport {
    pub q_min: f64,
    pub q_max: f64,
    pub samples: usize,
    pub order_r: usize,
    pub growth_order: Option<usize>,
    pub sandwich: Option<SandwichFit>,
    /// Fits for (i)–(iv) in order, then the growth bound (v) with `(K_0, L_0)`.
    pub inequalities: Vec<InequalityFit>,
    pub feasible: bool,
}

impl VAssumptionReport {
    pub fn fit(&self, name: &str) -> Option<&InequalityFit> {
        self.inequalities.iter().find(|f| f.name == name)
    }

    pub fn k(&self, name: &str) -> Option<f64> {
        self.fit(name).filter(|f| f.feasible).map(|f| f.k)
    }
}

const K_LADDER: usize = 40;

/// For `L(K) = max_q g(q, K)`, doubles `K` from 1 until the maximum is no
/// longer pushed to the ends of the range. Returns the fit or a witness.
fn ladder(name: &'static str, qs: &[f64], g: impl Fn(f64, f64) -> f64) -> InequalityFit {
    let n = qs.len();
    let band = (n / 20).max(1);
    let mut k = 1.0;
    let mut last_witness = qs[0];
    for _ in 0..K_LADDER {
        let vals: Vec<f64> = qs.iter().map(|&q| g(q, k)).collect();
        let (imax, &vmax) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty grid");
        let inner_max = vals[band..n - band].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = vmax.abs().max(1.0);
        if vmax <= inner_max + 1e-9 * scale {
            return InequalityFit {
                name,
                k,
                l: vmax.max(0.0),
                feasible: true,
                witness: None,
            };
        }
        last_witness = qs[imax];
        k *= 2.0;
    }
    InequalityFit {
        name,
        k: f64::INFINITY,
        l: f64::INFINITY,
        feasible: false,
        witness: Some(last_witness),
    }
}

/// Checks the coercivity inequalities (i)–(iv), the growth bound (v) and,
/// for polynomials, the sandwich bounds, on `samples` equispaced points.
///
/// `order_r` is the growth order of the pair interaction entering (iii) and (v).
/// A vanishing potential satisfies every inequality with `K = 0`.
pub fn check_v_assumptions(
    pot: &OneSitePotential,
    q_range: (f64, f64),
    samples: usize,
    order_r: usize,
) -> Result<VAssumptionReport> {
    ensure!(samples >= 100, InvalidParameter, "need at least 100 samples, got {samples}");
    ensure!(q_range.0 < q_range.1, InvalidParameter, "empty range {q_range:?}");
    let (a, b) = q_range;
    let qs: Vec<f64> = (0..samples)
        .map(|i| a + (b - a) * i as f64 / (samples - 1) as f64)
        .collect();
    let r = order_r as i32;

    let inequalities = if pot.is_zero() {
        ["i", "ii", "iii", "iv", "v"]
            .into_iter()
            .map(|name| InequalityFit {
                name,
                k: 0.0,
                l: 0.0,
                feasible: name != "iii" && name != "iv",
                witness: None,
            })
            .collect()
    } else {
        let d1 = |q: f64| pot.d1(q);
        let d2 = |q: f64| pot.d2(q);
        vec![
            ladder("i", &qs, |q, k| d1(q).abs() + d2(q).abs() - k * d1(q) * q),
            ladder("ii", &qs, |q, k| (d2(q) * q).abs() - k * d1(q) * q),
            ladder("iii", &qs, |q, k| q.abs().powi(r) - k * d1(q) * q),
            ladder("iv", &qs, |q, k| q * q - k * d1(q) * q),
            ladder("v", &qs, |q, k| d2(q).abs() - k * (d1(q).abs() + q.abs().powi(r - 1))),
        ]
    };

    let sandwich = pot.polynomial_coeffs().map(|(c0, cs)| sandwich_fit(&qs, c0, &cs, pot));
    let feasible = inequalities.iter().all(|f| f.feasible) && sandwich.as_ref().is_none_or(|s| s.feasible);
    Ok(VAssumptionReport {
        q_min: a,
        q_max: b,
        samples,
        order_r,
        growth_order: pot.growth_order(),
        sandwich,
        inequalities,
        feasible,
    })
}

fn sandwich_fit(qs: &[f64], _c0: f64, cs: &[f64], pot: &OneSitePotential) -> SandwichFit {
    let p = cs.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1);
    if p <= 2 || p % 2 == 1 || cs[p - 1] <= 0.0 {
        // not of confining even degree above 2: report the first sample as witness
        let w = qs.iter().cloned().fold(f64::NAN, |acc, q| {
            if acc.is_nan() || pot.value(q) < pot.value(acc) {
                q
            } else {
                acc
            }
        });
        return SandwichFit {
            degree: p,
            k_v: f64::INFINITY,
            c_v: f64::INFINITY,
            feasible: false,
            witness: Some(w),
        };
    }
    let lead = cs[p - 1];
    // leading coefficients of (sgn q)^l V^(l) are lead·P!/(P-l)!
    let k_v = (0..=2)
        .map(|l| {
            let c = lead * ((p - l + 1)..=p).product::<usize>() as f64;
            2.0 * c.max(1.0 / c)
        })
        .fold(1.0f64, f64::max);
    let mut c_v = 0.0f64;
    for &q in qs {
        for l in 0..=2u8 {
            let s = if q < 0.0 && l % 2 == 1 { -1.0 } else { 1.0 };
            let v = s * pot.eval(q, l);
            let pw = q.abs().powi((p - l as usize) as i32);
            c_v = c_v.max(pw / k_v - v).max(v - k_v * pw);
        }
    }
    SandwichFit {
        degree: p,
        k_v,
        c_v,
        feasible: true,
        witness: None,
    }
}
