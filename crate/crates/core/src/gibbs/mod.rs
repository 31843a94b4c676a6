//! Finite-volume Gibbs kernels of the truncated model: log-densities, shift
//! cocycles, logarithmic derivatives, and the pCN and Langevin samplers.

mod chain;
mod density;
mod matsubara;
mod samplers;

pub use chain::{
    collect_samples, default_observables, read_record, run_chain, write_record, Chain, ChainConfig,
    ChainReport, Checkpoint, ObservableSummary, SampleStore, SamplerKind, DEFAULT_OBSERVABLE_NAMES,
};
pub use density::{
    cocycle_factors, gaussian_energy, log_density, log_rn_cocycle, logderiv_b, logderiv_site, rn_cocycle,
    CocycleFactors, ShiftDirection,
};
pub use matsubara::{check_ordered, matsubara, PolyObservable};
pub use samplers::{langevin_sweep, pcn_sweep, AcceptStats, SiteOrder};
