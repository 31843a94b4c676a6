use serde::{Deserialize, Serialize};

use crate::gibbs::ShiftDirection;
use crate::interaction::{LatticeState, Model};
use crate::spectral::eigenfunction;

pub const CATALOG_VERSION: u32 = 1;

/// A linear feature of the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// Coefficient `c_{k,n}`; the mode is clamped to the model truncation.
    Coeff { site: usize, mode: i64 },
    /// Loop value `ω_k(τ)` at `τ = frac·β`.
    Point { site: usize, frac: f64 },
}

/// Outer function applied to the feature combination `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `cos(freq·u + phase)`.
    Cos { freq: f64, phase: f64 },
    /// `exp(-u²/2w²)`.
    Gauss { width: f64 },
    /// `u` itself (unbounded; only for closed-form checks).
    Identity,
}

impl Shape {
    pub fn value_and_slope(&self, u: f64) -> (f64, f64) {
        match *self {
            Shape::Cos { freq, phase } => {
                let a = freq * u + phase;
                (a.cos(), -freq * a.sin())
            }
            Shape::Gauss { width } => {
                let g = (-0.5 * u * u / (width * width)).exp();
                (g, -u / (width * width) * g)
            }
            Shape::Identity => (u, 1.0),
        }
    }
}

/// `f(ω) = shape(Σ_i w_i·feature_i(ω) + offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub name: String,
    pub shape: Shape,
    pub terms: Vec<(f64, Feature)>,
    #[serde(default)]
    pub offset: f64,
}

impl TestFunction {
    pub fn new(name: &str, shape: Shape, terms: Vec<(f64, Feature)>, offset: f64) -> Self {
        Self {
            name: name.into(),
            shape,
            terms,
            offset,
        }
    }

    /// Resolves the features against `model`: `u = g·c + offset` over all coefficients.
    pub fn resolve(&self, model: &Model) -> ResolvedFunction {
        let nc = model.n_coeffs();
        let n = model.n_modes() as i64;
        let beta = model.params().beta;
        let mut g = vec![0.0; model.n_sites() * nc];
        for &(w, feat) in &self.terms {
            match feat {
                Feature::Coeff { site, mode } => {
                    let s = site % model.n_sites();
                    let m = mode.clamp(-n, n);
                    g[s * nc + (m + n) as usize] += w;
                }
                Feature::Point { site, frac } => {
                    let s = site % model.n_sites();
                    for m in -n..=n {
                        g[s * nc + (m + n) as usize] += w * eigenfunction(m, frac * beta, beta);
                    }
                }
            }
        }
        ResolvedFunction {
            name: self.name.clone(),
            shape: self.shape,
            gradient: g,
            offset: self.offset,
        }
    }
}

/// A test function reduced to a shape of one linear form in the coefficients.
#[derive(Debug, Clone)]
pub struct ResolvedFunction {
    pub name: String,
    pub shape: Shape,
    pub gradient: Vec<f64>,
    pub offset: f64,
}

impl ResolvedFunction {
    pub fn form(&self, coeffs: &[f64]) -> f64 {
        self.offset + self.gradient.iter().zip(coeffs).map(|(g, c)| g * c).sum::<f64>()
    }

    pub fn value(&self, coeffs: &[f64]) -> f64 {
        self.shape.value_and_slope(self.form(coeffs)).0
    }

    /// `(f(ω), ∂_h f(ω))` for the shift `h = θ·e_k ⊗ φ_n`.
    pub fn value_and_derivative(&self, model: &Model, coeffs: &[f64], dir: ShiftDirection) -> (f64, f64) {
        let (v, s) = self.shape.value_and_slope(self.form(coeffs));
        (v, s * dir.theta * self.gradient[self.index(model, dir)])
    }

    /// `f(ω + t·h)`.
    pub fn shifted(&self, model: &Model, coeffs: &[f64], dir: ShiftDirection, t: f64) -> f64 {
        let u = self.form(coeffs) + t * dir.theta * self.gradient[self.index(model, dir)];
        self.shape.value_and_slope(u).0
    }

    fn index(&self, model: &Model, dir: ShiftDirection) -> usize {
        dir.site * model.n_coeffs() + dir.coeff_index(model)
    }

    pub fn eval_state(&self, state: &LatticeState) -> f64 {
        self.value(state.coeffs())
    }
}

fn coeff(site: usize, mode: i64) -> Feature {
    Feature::Coeff { site, mode }
}

fn point(site: usize, frac: f64) -> Feature {
    Feature::Point { site, frac }
}

fn cos(freq: f64, phase: f64) -> Shape {
    Shape::Cos { freq, phase }
}

fn sin(freq: f64) -> Shape {
    Shape::Cos {
        freq,
        phase: -std::f64::consts::FRAC_PI_2,
    }
}

fn gauss(width: f64) -> Shape {
    Shape::Gauss { width }
}

/// The fixed battery of 20 bounded smooth test functions: cosines and
/// Gaussians of low-order coefficients and of pointwise loop values.
pub fn catalog() -> Vec<TestFunction> {
    let f = TestFunction::new;
    vec![
        f("cos_c0", cos(1.0, 0.0), vec![(1.0, coeff(0, 0))], 0.0),
        f("sin_c0", sin(1.0), vec![(1.0, coeff(0, 0))], 0.0),
        f("cos_2c0_p", cos(2.0, 0.3), vec![(1.0, coeff(0, 0))], 0.0),
        f("gauss_c0", gauss(1.0), vec![(1.0, coeff(0, 0))], 0.0),
        f("gauss_c0_off", gauss(0.5), vec![(1.0, coeff(0, 0))], -0.2),
        f("cos_c1", cos(1.0, 0.0), vec![(1.0, coeff(0, 1))], 0.0),
        f("sin_cm1", sin(1.0), vec![(1.0, coeff(0, -1))], 0.0),
        f("gauss_c1", gauss(0.3), vec![(1.0, coeff(0, 1))], 0.0),
        f("cos_3cm1_p", cos(3.0, 0.7), vec![(1.0, coeff(0, -1))], 0.0),
        f("sin_c2", sin(2.0), vec![(1.0, coeff(0, 2))], 0.0),
        f("gauss_cm2", gauss(0.2), vec![(1.0, coeff(0, -2))], 0.0),
        f("cos_c0_c1", cos(1.0, 0.0), vec![(1.0, coeff(0, 0)), (1.0, coeff(0, 1))], 0.0),
        f("sin_c0_cm1", sin(1.0), vec![(1.0, coeff(0, 0)), (-0.5, coeff(0, -1))], 0.0),
        f("gauss_c1_c2", gauss(0.4), vec![(1.0, coeff(0, 1)), (1.0, coeff(0, 2))], 0.0),
        f("cos_w0", cos(1.0, 0.0), vec![(1.0, point(0, 0.0))], 0.0),
        f("sin_wq", sin(1.0), vec![(1.0, point(0, 0.25))], 0.0),
        f("gauss_wh", gauss(0.7), vec![(1.0, point(0, 0.5))], 0.0),
        f("cos_2w_p", cos(2.0, 0.5), vec![(1.0, point(0, 0.1))], 0.0),
        f("sin_dw", sin(1.0), vec![(1.0, point(0, 0.0)), (-1.0, point(1, 1.0 / 3.0))], 0.0),
        f("gauss_mix", gauss(1.0), vec![(1.0, point(0, 0.6)), (0.5, coeff(0, 0))], 0.0),
    ]
}

/// `c_{k,n}` itself, for the Gaussian closed-form check.
pub fn coefficient_function(site: usize, mode: i64) -> TestFunction {
    TestFunction::new(&format!("c[{site},{mode}]"), Shape::Identity, vec![(1.0, coeff(site, mode))], 0.0)
}

/// Resolves the whole catalog against a model.
pub fn resolve_all(model: &Model, fns: &[TestFunction]) -> Vec<ResolvedFunction> {
    fns.iter().map(|f| f.resolve(model)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{ModelSpec, OneSitePotential};
    use crate::spectral::OscillatorParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> Model {
        Model::new(ModelSpec::single_site(OscillatorParams::new(1.0, 1.0, 1.0).unwrap(), OneSitePotential::quartic(1.0), 2)).unwrap()
    }

    #[test]
    fn catalog_is_fixed() {
        let c = catalog();
        assert_eq!(c.len(), 20);
        let mut names: Vec<_> = c.iter().map(|f| f.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 20);
        // everything in the battery is bounded
        assert!(c.iter().all(|f| f.shape != Shape::Identity));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = LatticeState::bridge(&m, &mut rng);
        for f in catalog() {
            let r = f.resolve(&m);
            for mode in -2..=2 {
                let dir = ShiftDirection::new(0, mode, 0.7);
                let (v, d) = r.value_and_derivative(&m, s.coeffs(), dir);
                assert_eq!(v, r.eval_state(&s));
                let eps = 1e-6;
                let mut up = s.clone();
                up.shift(&m, 0, mode, 0.7 * eps);
                let mut dn = s.clone();
                dn.shift(&m, 0, mode, -0.7 * eps);
                let fd = (r.eval_state(&up) - r.eval_state(&dn)) / (2.0 * eps);
                assert!((fd - d).abs() < 1e-7, "{} mode {mode}: {fd} vs {d}", f.name);
                assert!((r.shifted(&m, s.coeffs(), dir, 1.0) - r.eval_state(&{
                    let mut t = s.clone();
                    t.shift(&m, 0, mode, 0.7);
                    t
                }))
                .abs()
                    < 1e-12);
            }
        }
    }

    #[test]
    fn point_features_read_loop_values() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = LatticeState::bridge(&m, &mut rng);
        let f = TestFunction::new("w0", Shape::Identity, vec![(1.0, point(0, 0.0))], 0.0).resolve(&m);
        // the first grid point is τ = 0
        assert!((f.eval_state(&s) - s.site_values(0)[0]).abs() < 1e-12);
        let c = coefficient_function(0, 1).resolve(&m);
        assert_eq!(c.eval_state(&s), s.coeffs()[3]);
    }
}
