//! Exact references for tiny systems: tensor quadrature of the truncated
//! density, exact diagonalization of the one-site Hamiltonian, and the
//! momentum-space solution of harmonic periodic lattices.

mod ed;
mod harmonic;
mod quadrature;

pub use ed::{ed_matsubara, EdReport, EdSolution, HermiteBasis, ED_DEFAULT_DIM};
pub use harmonic::{harmonic_lattice_cov, CovarianceEntry, HarmonicLattice};
pub use quadrature::{
    gauss_hermite, quadrature_moments, quadrature_omega0_sq, IbpResidual, QuadratureMoments,
    ModeOrder, QuadratureOracle, QuadratureSpec, MAX_QUADRATURE_POINTS,
};
