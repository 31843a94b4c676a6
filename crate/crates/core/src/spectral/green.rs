use serde::Serialize;
use std::f64::consts::PI;

use super::grid::circle_distance;
use super::params::{spectrum, OscillatorParams};
use crate::error::{ensure, Result};

/// How to evaluate the Green function `𝔊(τ,τ')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreenMethod {
    /// `Σ_{|n|≤cutoff} λ_n⁻¹ φ_n(τ)φ_n(τ')`.
    Series { cutoff: usize },
    /// The two-exponential expression `(𝔤/2)(e^{-ω(β-|Δ|)} + e^{-ω|Δ|})` with
    /// `𝔤 = [2a√m(1 - e^{-ωβ})]⁻¹`, taken literally.
    ClosedForm,
}

/// Green function of `A` on the circle.
///
/// The series is authoritative. The literal closed form evaluates to half
/// the series limit; see [`green_discrepancy`].
pub fn green(tau: f64, tau2: f64, p: &OscillatorParams, method: GreenMethod) -> Result<f64> {
    match method {
        GreenMethod::Series { cutoff } => {
            ensure!(cutoff >= 1, InvalidParameter, "series cutoff must be ≥ 1");
            Ok(green_series(tau - tau2, p, cutoff))
        }
        GreenMethod::ClosedForm => Ok(green_closed_form(tau - tau2, p)),
    }
}

/// Series form, as a function of the separation `τ - τ'` (it is translation invariant).
pub fn green_series(delta: f64, p: &OscillatorParams, cutoff: usize) -> f64 {
    let beta = p.beta;
    let w = 2.0 * PI * delta / beta;
    // sum from the smallest terms up
    let tail: f64 = (1..=cutoff as i64)
        .rev()
        .map(|n| (n as f64 * w).cos() / spectrum(n, p))
        .sum();
    1.0 / (beta * spectrum(0, p)) + 2.0 / beta * tail
}

/// The constant `𝔤 = [2a√m(1 - e^{-aβ/√m})]⁻¹`.
pub fn g_constant(p: &OscillatorParams) -> f64 {
    let w = p.decay_rate();
    1.0 / (2.0 * p.rigidity * p.mass.sqrt() * (1.0 - (-w * p.beta).exp()))
}

pub fn green_closed_form(delta: f64, p: &OscillatorParams) -> f64 {
    let w = p.decay_rate();
    let d = delta.rem_euclid(p.beta);
    0.5 * g_constant(p) * ((-w * (p.beta - d)).exp() + (-w * d).exp())
}

/// Continuum limit of the series, `cosh(ω(β/2 - ρ)) / (2a√m sinh(ωβ/2))`.
///
/// Equal to twice [`green_closed_form`].
pub fn green_continuum(delta: f64, p: &OscillatorParams) -> f64 {
    let w = p.decay_rate();
    let rho = circle_distance(delta, 0.0, p.beta);
    (w * (p.beta / 2.0 - rho)).cosh() / (2.0 * p.rigidity * p.mass.sqrt() * (w * p.beta / 2.0).sinh())
}

/// Side-by-side values of the two Green-function forms at one pair of points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GreenDiscrepancy {
    pub tau: f64,
    pub tau2: f64,
    pub cutoff: usize,
    pub series: f64,
    pub closed_form: f64,
    /// `series / closed_form`; close to 2 for every parameter set.
    pub ratio: f64,
}

pub fn green_discrepancy(
    tau: f64,
    tau2: f64,
    p: &OscillatorParams,
    cutoff: usize,
) -> Result<GreenDiscrepancy> {
    let series = green(tau, tau2, p, GreenMethod::Series { cutoff })?;
    let closed_form = green(tau, tau2, p, GreenMethod::ClosedForm)?;
    Ok(GreenDiscrepancy {
        tau,
        tau2,
        cutoff,
        series,
        closed_form,
        ratio: series / closed_form,
    })
}

/// Truncated trace `Σ_{|n|≤cutoff} λ_n^{α-1}` with an integral-test tail bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceReport {
    pub alpha: f64,
    pub cutoff: usize,
    pub value: f64,
    /// Upper bound on the omitted `Σ_{|n|>cutoff}` part.
    pub tail_bound: f64,
}

impl TraceReport {
    /// Truncated value plus tail bound: an upper bound on the full trace.
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

pub fn trace_power(alpha: f64, p: &OscillatorParams, cutoff: usize) -> Result<TraceReport> {
    ensure!(
        alpha < 0.5,
        Divergence,
        "Tr A^(α-1) diverges for α = {alpha} ≥ 1/2"
    );
    let e = alpha - 1.0;
    let tail: f64 = (1..=cutoff as i64).rev().map(|n| spectrum(n, p).powf(e)).sum();
    let value = spectrum(0, p).powf(e) + 2.0 * tail;
    // λ_n ≥ m(2πn/β)², so Σ_{n>K} λ_n^{α-1} ≤ ∫_K^∞ (c x²)^{α-1} dx
    let c = p.mass * (2.0 * PI / p.beta).powi(2);
    let tail_bound = if cutoff == 0 {
        f64::INFINITY
    } else {
        2.0 * c.powf(e) * (cutoff as f64).powf(2.0 * alpha - 1.0) / (1.0 - 2.0 * alpha)
    };
    Ok(TraceReport {
        alpha,
        cutoff,
        value,
        tail_bound,
    })
}
