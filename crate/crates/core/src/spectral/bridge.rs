use rand::Rng;
use rand_distr::StandardNormal;

use super::loops::SpectralLoop;
use super::params::OscillatorParams;

/// Exact draw from the mode-truncated oscillator bridge: independent
/// centered Gaussian coefficients with variance `λ_n⁻¹`.
pub fn sample_bridge<R: Rng + ?Sized>(p: &OscillatorParams, n_modes: usize, rng: &mut R) -> SpectralLoop {
    let mut out = SpectralLoop::zeros(n_modes);
    fill_bridge(p, out.coeffs_mut(), rng);
    out
}

/// In-place variant over a coefficient slice in mode order `-N..=N`.
pub fn fill_bridge<R: Rng + ?Sized>(p: &OscillatorParams, coeffs: &mut [f64], rng: &mut R) {
    let nm = (coeffs.len() / 2) as i64;
    for (i, c) in coeffs.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        *c = z / p.lambda(i as i64 - nm).sqrt();
    }
}
