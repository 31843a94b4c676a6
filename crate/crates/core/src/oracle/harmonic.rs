use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::interaction::{BoundaryMode, CouplingSpec, Model};
use crate::spectral::{green_continuum, green_series, OscillatorParams};

/// One row of the exact covariance table of a harmonic periodic lattice.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceEntry {
    pub site_a: Vec<i64>,
    pub site_b: Vec<i64>,
    pub delta_tau: f64,
    pub value: f64,
}

/// Decomposition of a quadratic periodic model into independent momentum modes.
#[derive(Debug, Clone, Serialize)]
pub struct HarmonicLattice {
    /// Lattice momenta `p` with `p_i = 2πj_i/L_i`.
    pub momenta: Vec<Vec<f64>>,
    /// Effective `a²` per momentum: `a² + 2v_2 + κ(p)`.
    pub rigidity_sq: Vec<f64>,
    #[serde(skip)]
    params: OscillatorParams,
    #[serde(skip)]
    sites: Vec<Vec<i64>>,
    /// Series cutoff (`None`: continuum Green function).
    pub cutoff: Option<usize>,
}

impl HarmonicLattice {
    /// `cutoff = Some(N)` reproduces the mode-truncated measure; `None` the continuum.
    pub fn new(model: &Model, cutoff: Option<usize>) -> Result<Self> {
        ensure!(
            matches!(model.geometry().boundary, BoundaryMode::Periodic),
            Domain,
            "harmonic covariance needs a periodic box"
        );
        let (c0, v) = model
            .potential()
            .polynomial_coeffs()
            .ok_or_else(|| Error::Domain("potential is not polynomial".into()))?;
        let _ = c0;
        ensure!(
            v.iter().enumerate().all(|(i, &b)| b == 0.0 || i == 1),
            Domain,
            "potential must be purely quadratic, got coefficients {v:?}"
        );
        let v2 = v.get(1).copied().unwrap_or(0.0);
        let w = model.spec().coupling.pair_coeffs();
        ensure!(
            matches!(model.spec().coupling, CouplingSpec::None) || w.iter().enumerate().all(|(i, &b)| b == 0.0 || i == 1),
            Domain,
            "pair interaction must be quadratic"
        );
        let b2 = w.get(1).copied().unwrap_or(0.0);
        let geom = model.geometry();
        let bonds: Vec<(Vec<i64>, f64)> = if model.spec().coupling.is_decoupled() {
            vec![]
        } else {
            model.spec().coupling.bonds(geom.d).into_iter().map(|b| (b.offset, b.strength)).collect()
        };
        let a2 = model.params().rigidity.powi(2);
        let mut momenta = vec![];
        let mut rigidity_sq = vec![];
        for idx in 0..geom.n_sites() {
            let mut rem = idx;
            let mut p = vec![0.0; geom.d];
            for i in (0..geom.d).rev() {
                let l = geom.extent[i];
                p[i] = 2.0 * std::f64::consts::PI * (rem % l) as f64 / l as f64;
                rem /= l;
            }
            // κ(p) = Σ_r J_r·2b_2·(1 - cos p·r)
            let kappa: f64 = bonds
                .iter()
                .map(|(r, j)| {
                    let dot: f64 = r.iter().zip(&p).map(|(a, b)| *a as f64 * b).sum();
                    j * 2.0 * b2 * (1.0 - dot.cos())
                })
                .sum();
            rigidity_sq.push(a2 + 2.0 * v2 + kappa);
            momenta.push(p);
        }
        ensure!(rigidity_sq.iter().all(|&r| r > 0.0), Domain, "quadratic form is not positive");
        Ok(Self {
            momenta,
            rigidity_sq,
            params: *model.params(),
            sites: model.sites().to_vec(),
            cutoff,
        })
    }

    fn green(&self, delta: f64, r2: f64) -> f64 {
        let p = OscillatorParams {
            rigidity: r2.sqrt(),
            ..self.params
        };
        match self.cutoff {
            Some(n) => green_series(delta, &p, n),
            None => green_continuum(delta, &p),
        }
    }

    /// `E[ω_k(τ)ω_j(τ')] = |Λ|⁻¹ Σ_p cos(p·(k-j)) 𝔊_p(τ-τ')`.
    pub fn covariance(&self, k: usize, j: usize, delta_tau: f64) -> f64 {
        let diff: Vec<f64> = self.sites[k].iter().zip(&self.sites[j]).map(|(a, b)| (a - b) as f64).collect();
        let n = self.momenta.len() as f64;
        self.momenta
            .iter()
            .zip(&self.rigidity_sq)
            .map(|(p, &r2)| {
                let dot: f64 = p.iter().zip(&diff).map(|(a, b)| a * b).sum();
                dot.cos() * self.green(delta_tau, r2)
            })
            .sum::<f64>()
            / n
    }

    pub fn table(&self, taus: &[f64]) -> Vec<CovarianceEntry> {
        let mut out = vec![];
        for k in 0..self.sites.len() {
            for j in 0..self.sites.len() {
                for &t in taus {
                    out.push(CovarianceEntry {
                        site_a: self.sites[k].clone(),
                        site_b: self.sites[j].clone(),
                        delta_tau: t,
                        value: self.covariance(k, j, t),
                    });
                }
            }
        }
        out
    }
}

/// Exact covariance table for a harmonic periodic model.
pub fn harmonic_lattice_cov(model: &Model, taus: &[f64], cutoff: Option<usize>) -> Result<Vec<CovarianceEntry>> {
    Ok(HarmonicLattice::new(model, cutoff)?.table(taus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{LatticeGeometry, ModelSpec, OneSitePotential};
    use crate::oracle::{QuadratureOracle, QuadratureSpec};

    fn ring(len: usize, j: f64, n: usize) -> Model {
        let spec = ModelSpec {
            coupling: CouplingSpec::HarmonicNn { j },
            lattice: LatticeGeometry::chain(len, BoundaryMode::Periodic),
            ..ModelSpec::single_site(OscillatorParams::new(1.0, 1.0, 1.0).unwrap(), OneSitePotential::zero(), n)
        };
        Model::new(spec).unwrap()
    }

    #[test]
    fn decoupled_is_diagonal() {
        let m = ring(3, 0.0, 4);
        let h = HarmonicLattice::new(&m, None).unwrap();
        let g = green_continuum(0.2, m.params());
        assert!((h.covariance(1, 1, 0.2) - g).abs() < 1e-12);
        assert!(h.covariance(0, 2, 0.2).abs() < 1e-12);
    }

    #[test]
    fn coupling_lowers_equal_time_variance() {
        let free = HarmonicLattice::new(&ring(4, 0.0, 4), None).unwrap().covariance(0, 0, 0.0);
        let tied = HarmonicLattice::new(&ring(4, 1.0, 4), None).unwrap().covariance(0, 0, 0.0);
        assert!(tied < free);
    }

    #[test]
    fn two_site_ring_mode_average() {
        let m = ring(2, 1.0, 0);
        let h = HarmonicLattice::new(&m, Some(0)).unwrap();
        assert!((h.rigidity_sq[1] - 9.0).abs() < 1e-12);
        let p = *m.params();
        let want = 0.5 * (green_series(0.0, &p, 0) + green_series(0.0, &p.with_shifted_rigidity(8.0).unwrap(), 0));
        assert!((h.covariance(0, 0, 0.0) - want).abs() < 1e-12);
        // brute-force quadrature of the same truncated two-site measure
        let o = QuadratureOracle::new(&m, QuadratureSpec::new(40)).unwrap();
        let v = o.expect(2, |s, out| {
            out[0] = s.site_values(0)[0].powi(2);
            out[1] = s.site_values(0)[0] * s.site_values(1)[0];
        });
        assert!((v[0] - want).abs() < 1e-10, "{} vs {want}", v[0]);
        assert!((v[1] - h.covariance(0, 1, 0.0)).abs() < 1e-10);
    }

    #[test]
    fn rejects_anharmonic_or_open() {
        assert!(HarmonicLattice::new(&Model::preset("model1").unwrap(), None).is_err());
        let mut spec = ModelSpec::preset("model1-harmonic-ring-L4").unwrap();
        spec.potential = OneSitePotential::quartic(1.0);
        assert!(HarmonicLattice::new(&Model::new(spec).unwrap(), None).is_err());
        assert!(HarmonicLattice::new(&Model::preset("model1-harmonic-ring-L4").unwrap(), None).is_ok());
    }
}
