//! Single-loop spectral machinery on the circle `S_β`.
//!
//! Loops are truncated expansions in the real trigonometric eigenbasis of
//! `A = -m d²/dτ² + a²`. The Gaussian bridge measure is diagonal in that
//! basis, so it is sampled exactly mode by mode; everything pointwise
//! (potentials, norms) goes through a uniform synthesis grid.

mod basis;
mod bridge;
mod green;
mod grid;
mod loops;
mod norms;
mod params;

pub use basis::SpectralBasis;
pub use bridge::{fill_bridge, sample_bridge};
pub use green::{
    g_constant, green, green_closed_form, green_continuum, green_discrepancy, green_series,
    trace_power, GreenDiscrepancy, GreenMethod, TraceReport,
};
pub use grid::{circle_distance, CircleGrid};
pub use loops::{green_loop, partial_sums, yosida, PartialSumKind, SpectralLoop};
pub use norms::{grid_norm, holder_seminorm, loop_norm, sobolev_norm, LoopNormKind};
pub use params::{eigenfunction, kappa_inf, spectrum, OscillatorParams};
