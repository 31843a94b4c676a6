use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::gibbs::{check_ordered, PolyObservable};
use crate::interaction::OneSitePotential;
use crate::spectral::OscillatorParams;

/// Harmonic-oscillator eigenbasis of `p²/2m + a²q²/2`, truncated to `dim` states.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub dim: usize,
    pub params: OscillatorParams,
    /// Position operator in the truncated basis.
    pub q_matrix: DMatrix<f64>,
}

/// `q` on `dim` levels: `⟨n-1|q|n⟩ = (n / 2a√m)^{1/2}`.
fn position(dim: usize, p: &OscillatorParams) -> DMatrix<f64> {
    let scale = 1.0 / (2.0 * p.rigidity * p.mass.sqrt());
    let mut q = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        let v = (n as f64 * scale).sqrt();
        q[(n - 1, n)] = v;
        q[(n, n - 1)] = v;
    }
    q
}

impl HermiteBasis {
    pub fn new(dim: usize, params: OscillatorParams) -> Result<Self> {
        ensure!(dim >= 2, InvalidParameter, "basis needs at least two states");
        params.validate()?;
        Ok(Self {
            dim,
            params,
            q_matrix: position(dim, &params),
        })
    }

    /// Ground-state `⟨0|q²|0⟩ = 1/(2a√m)`.
    pub fn ground_q2(&self) -> f64 {
        1.0 / (2.0 * self.params.rigidity * self.params.mass.sqrt())
    }

    /// Matrix of a polynomial in `q`, exact within the truncated space: the
    /// powers are formed in a padded basis and cut back afterwards.
    pub fn poly_matrix(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let deg = coeffs.len().saturating_sub(1);
        let big = self.dim + deg;
        let q = position(big, &self.params);
        let mut out = DMatrix::zeros(big, big);
        let mut pow = DMatrix::identity(big, big);
        for (k, &c) in coeffs.iter().enumerate() {
            if k > 0 {
                pow = &pow * &q;
            }
            if c != 0.0 {
                out += &pow * c;
            }
        }
        out.view((0, 0), (self.dim, self.dim)).into_owned()
    }

    /// `H = ω(n + ½) + V(q)` with `ω = a/√m`.
    pub fn hamiltonian(&self, pot: &OneSitePotential) -> Result<DMatrix<f64>> {
        let (c0, cs) = pot
            .polynomial_coeffs()
            .ok_or_else(|| Error::Domain("exact diagonalization needs a polynomial potential".into()))?;
        let mut coeffs = vec![c0];
        coeffs.extend(cs);
        let mut h = self.poly_matrix(&coeffs);
        let w = self.params.decay_rate();
        for n in 0..self.dim {
            h[(n, n)] += w * (n as f64 + 0.5);
        }
        Ok(h)
    }
}

/// Spectral data of a diagonalized Hamiltonian.
pub struct EdSolution {
    pub basis: HermiteBasis,
    pub energies: DVector<f64>,
    pub vectors: DMatrix<f64>,
    /// Share of `Tr e^{-βH}` carried by the top 10% of levels.
    pub tail_weight: f64,
}

impl EdSolution {
    pub fn solve(pot: &OneSitePotential, params: OscillatorParams, dim: usize) -> Result<Self> {
        let basis = HermiteBasis::new(dim, params)?;
        let h = basis.hamiltonian(pot)?;
        let eig = SymmetricEigen::new(h);
        // sort ascending
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        let beta = params.beta;
        let e0 = energies[0];
        let boltz: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = boltz.iter().sum();
        let top = dim - dim.div_ceil(10);
        let tail_weight = boltz[top..].iter().sum::<f64>() / z;
        Ok(Self {
            basis,
            energies,
            vectors,
            tail_weight,
        })
    }

    /// Γ(τ_0,…,τ_n) = Tr[e^{-(β-τ_n+τ_0)H} A_0 e^{-(τ_1-τ_0)H} A_1 ⋯ A_n] / Z.
    pub fn matsubara(&self, observables: &[PolyObservable], taus: &[f64]) -> Result<f64> {
        let beta = self.basis.params.beta;
        check_ordered(taus, beta)?;
        ensure!(observables.len() == taus.len() && !taus.is_empty(), InvalidParameter, "one observable per time");
        let e0 = self.energies[0];
        let prop = |t: f64| DVector::from_iterator(self.energies.len(), self.energies.iter().map(|e| (-t * (e - e0)).exp()));
        let ops: Vec<DMatrix<f64>> = observables
            .iter()
            .map(|a| self.vectors.transpose() * self.basis.poly_matrix(&a.coeffs) * &self.vectors)
            .collect();
        // M = A_0 D(τ_1-τ_0) A_1 ⋯ D(τ_n-τ_{n-1}) A_n, then Tr[D(β-τ_n+τ_0) M]
        let mut m = ops[0].clone();
        for i in 1..ops.len() {
            let d = prop(taus[i] - taus[i - 1]);
            for (c, mut col) in m.column_iter_mut().enumerate() {
                col *= d[c];
            }
            m = &m * &ops[i];
        }
        let d = prop(beta - taus[taus.len() - 1] + taus[0]);
        let z: f64 = prop(beta).sum();
        Ok((0..m.nrows()).map(|i| d[i] * m[(i, i)]).sum::<f64>() / z)
    }
}

pub const ED_DEFAULT_DIM: usize = 60;
const ED_MAX_DIM: usize = 1920;

/// ED Matsubara value with the basis-size certificate.
#[derive(Debug, Clone, Serialize)]
pub struct EdReport {
    pub value: f64,
    pub dim: usize,
    pub tail_weight: f64,
    /// `|Γ(2·dim) - Γ(dim)|`.
    pub doubling_change: f64,
    pub ground_energy: f64,
}

/// Matsubara function by exact diagonalization, doubling the basis from
/// `dim` until the top-10% trace tail is below 1e-10 and doubling changes
/// the value by less than 1e-8.
pub fn ed_matsubara(
    pot: &OneSitePotential,
    params: OscillatorParams,
    dim: usize,
    observables: &[PolyObservable],
    taus: &[f64],
) -> Result<EdReport> {
    let mut d = dim.max(2);
    let mut sol = EdSolution::solve(pot, params, d)?;
    let mut value = sol.matsubara(observables, taus)?;
    loop {
        let next = EdSolution::solve(pot, params, 2 * d)?;
        let nv = next.matsubara(observables, taus)?;
        let change = (nv - value).abs();
        if sol.tail_weight < 1e-10 && change < 1e-8 * value.abs().max(1.0) {
            return Ok(EdReport {
                value,
                dim: d,
                tail_weight: sol.tail_weight,
                doubling_change: change,
                ground_energy: sol.energies[0],
            });
        }
        d *= 2;
        ensure!(
            d <= ED_MAX_DIM,
            BasisSize,
            "no convergence up to {ED_MAX_DIM} basis states (last change {change:.2e}, tail {:.2e})",
            next.tail_weight
        );
        sol = next;
        value = nv;
    }
}
