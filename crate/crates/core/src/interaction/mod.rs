//! Potentials, couplings, lattice geometry and the energy functionals of a
//! finite-volume model.

mod assumptions;
mod coupling;
mod energy;
mod lattice;
mod model;
mod potential;

pub use assumptions::{check_v_assumptions, InequalityFit, SandwichFit, VAssumptionReport};
pub use coupling::{
    cube_offsets, j_seminorm, k3_threshold, k3_threshold_moments, Bond, CouplingSpec, Envelope,
    JSeminorm, ManyBodyFamily, ManyBodySeminorms, WeightSystem,
};
pub use energy::{action, action_gradient, coercivity_l, local_action, nemytskii_f, potential_energy};
pub(crate) use energy::nemytskii_into;
pub use lattice::{
    BoundaryLoop, BoundaryMode, BoundarySource, LatticeGeometry, Link, Neighbourhood, Partner,
};
pub use model::{Discretization, LatticeState, Model, ModelSpec, PRESET_NAMES};
pub use potential::OneSitePotential;
