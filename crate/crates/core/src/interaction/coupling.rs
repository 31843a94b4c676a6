use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Decay envelope of an infinite-range pair matrix `J_{k,j} = j0·env(|k-j|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `(1 + r)^{-p}`.
    Polynomial { p: f64 },
    /// `e^{-δ r}`.
    Exponential { delta: f64 },
}

impl Envelope {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Self::Polynomial { p } => (1.0 + r).powf(-p),
            Self::Exponential { delta } => (-delta * r).exp(),
        }
    }
}

/// Pair interactions `W_{k,j}(q, q') = J_{k,j}·w(q - q')` with `w` an even polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSpec {
    None,
    /// `J(q - q')²` between nearest neighbours.
    HarmonicNn { j: f64 },
    /// Nearest-neighbour `w(q - q')` with `w = Σ_l b_l x^l`, only even `l` nonzero.
    PolyPairNn { coeffs: Vec<f64> },
    /// `J_{k,j} = j0·env(|k-j|)` for `0 < |k-j|_∞ ≤ cutoff`, with pair potential `w`.
    PairMatrix {
        j0: f64,
        envelope: Envelope,
        cutoff: usize,
        #[serde(default = "square")]
        pair_coeffs: Vec<f64>,
    },
}

fn square() -> Vec<f64> {
    vec![0.0, 1.0]
}

/// Weights for the lattice seminorms: `(1+|k|)^p` or `e^{δ|k|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSystem {
    Polynomial { p: f64 },
    Exponential { delta: f64 },
}

impl WeightSystem {
    pub fn weight(&self, dist: f64) -> f64 {
        match *self {
            Self::Polynomial { p } => (1.0 + dist).powf(p),
            Self::Exponential { delta } => (delta * dist).exp(),
        }
    }

    /// Constant `C` with `γ(|k-j|) ≤ C·γ(|k|)·γ(|j|)`: 1 for exponential
    /// weights, and 1 for polynomial weights as well since `1+|k-j| ≤ (1+|k|)(1+|j|)`.
    pub fn submultiplicativity_constant(&self) -> f64 {
        1.0
    }
}

/// One translation-invariant bond: lattice offset and strength.
#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub offset: Vec<i64>,
    pub strength: f64,
}

impl CouplingSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::None => Ok(()),
            Self::HarmonicNn { j } => {
                ensure!(*j >= 0.0 && j.is_finite(), InvalidParameter, "coupling J must be ≥ 0, got {j}");
                Ok(())
            }
            Self::PolyPairNn { coeffs } => validate_pair_poly(coeffs),
            Self::PairMatrix {
                j0,
                envelope,
                cutoff,
                pair_coeffs,
            } => {
                ensure!(*j0 >= 0.0, InvalidParameter, "pair matrix amplitude must be ≥ 0");
                ensure!(*cutoff >= 1, InvalidParameter, "pair matrix needs a truncation radius ≥ 1");
                match *envelope {
                    Envelope::Polynomial { p } => {
                        ensure!(p > 0.0, InvalidParameter, "polynomial envelope needs p > 0")
                    }
                    Envelope::Exponential { delta } => {
                        ensure!(delta > 0.0, InvalidParameter, "exponential envelope needs δ > 0")
                    }
                }
                validate_pair_poly(pair_coeffs)
            }
        }
    }

    /// Pair potential `w` as `[b_1, b_2, …]`.
    pub fn pair_coeffs(&self) -> Vec<f64> {
        match self {
            Self::None => vec![],
            Self::HarmonicNn { .. } => square(),
            Self::PolyPairNn { coeffs } => coeffs.clone(),
            Self::PairMatrix { pair_coeffs, .. } => pair_coeffs.clone(),
        }
    }

    /// Growth order `R` of `W`.
    pub fn order(&self) -> usize {
        match self {
            Self::None => 2,
            _ => self
                .pair_coeffs()
                .iter()
                .rposition(|&b| b != 0.0)
                .map_or(2, |i| (i + 1).max(2)),
        }
    }

    /// Interaction radius in the sup-norm on offsets.
    pub fn range(&self) -> usize {
        match self {
            Self::None => 0,
            Self::HarmonicNn { .. } | Self::PolyPairNn { .. } => 1,
            Self::PairMatrix { cutoff, .. } => *cutoff,
        }
    }

    pub fn is_decoupled(&self) -> bool {
        match self {
            Self::None => true,
            Self::HarmonicNn { j } => *j == 0.0,
            Self::PolyPairNn { coeffs } => coeffs.iter().all(|&c| c == 0.0),
            Self::PairMatrix { j0, pair_coeffs, .. } => *j0 == 0.0 || pair_coeffs.iter().all(|&c| c == 0.0),
        }
    }

    /// Pair strength as a function of the offset (before truncation).
    pub fn strength(&self, offset: &[i64]) -> f64 {
        let l1: i64 = offset.iter().map(|x| x.abs()).sum();
        let linf = offset.iter().map(|x| x.abs()).max().unwrap_or(0);
        if linf == 0 {
            return 0.0;
        }
        match self {
            Self::None => 0.0,
            Self::HarmonicNn { j } => {
                if l1 == 1 {
                    *j
                } else {
                    0.0
                }
            }
            Self::PolyPairNn { .. } => {
                if l1 == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::PairMatrix { j0, envelope, .. } => j0 * envelope.eval(euclid(offset)),
        }
    }

    /// All bonds with nonzero strength inside the truncation window, both signs of each offset.
    pub fn bonds(&self, dim: usize) -> Vec<Bond> {
        let r = self.range() as i64;
        cube_offsets(dim, r)
            .into_iter()
            .filter_map(|offset| {
                let s = self.strength(&offset);
                (s != 0.0).then_some(Bond { offset, strength: s })
            })
            .collect()
    }

    /// Seminorm `sup_k Σ_j J_{k,j}·γ(|k-j|)` with the truncation tail bound.
    pub fn seminorm(&self, dim: usize, weights: WeightSystem, tolerance: f64) -> Result<JSeminorm> {
        j_seminorm(self, dim, weights, tolerance)
    }
}

fn validate_pair_poly(coeffs: &[f64]) -> Result<()> {
    ensure!(
        coeffs.iter().all(|c| c.is_finite()),
        InvalidParameter,
        "pair potential coefficients must be finite"
    );
    for (i, &c) in coeffs.iter().enumerate() {
        ensure!(
            (i + 1) % 2 == 0 || c == 0.0,
            InvalidParameter,
            "pair potential must be even in q - q' (odd power {} has coefficient {c})",
            i + 1
        );
    }
    Ok(())
}

fn euclid(offset: &[i64]) -> f64 {
    (offset.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt()
}

/// Every nonzero offset with `|r|_∞ ≤ radius`, in lexicographic order.
pub fn cube_offsets(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-radius..=radius).map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out.retain(|v| v.iter().any(|&x| x != 0));
    out
}

/// Pair-coupling seminorms over the truncation window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JSeminorm {
    /// `||J||_γ = sup_k Σ_j J_{k,j} γ(|k-j|)` over the window.
    pub value: f64,
    /// Upper bound on the part beyond the truncation radius.
    pub tail_bound: f64,
    /// `|||J_2|||_γ = sup_k Σ_j J_{k,j} (γ(0) + γ(|k-j|))`.
    pub triple: f64,
    /// Row sum of `J̃_{k,j} = 2^R J_{k,j}`.
    pub tilde_row_sum: f64,
}

impl JSeminorm {
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

pub fn j_seminorm(c: &CouplingSpec, dim: usize, weights: WeightSystem, tolerance: f64) -> Result<JSeminorm> {
    let bonds = c.bonds(dim);
    let mut value = 0.0;
    let mut raw = 0.0;
    let mut triple = 0.0;
    for b in &bonds {
        let w = weights.weight(euclid(&b.offset));
        value += b.strength * w;
        raw += b.strength;
        triple += b.strength * (weights.weight(0.0) + w);
    }
    let tail_bound = match c {
        CouplingSpec::PairMatrix {
            j0, envelope, cutoff, ..
        } => envelope_tail(*j0, *envelope, *cutoff, dim, weights, tolerance)?,
        _ => 0.0,
    };
    let r = c.order() as i32;
    Ok(JSeminorm {
        value,
        tail_bound,
        triple,
        tilde_row_sum: 2f64.powi(r) * raw,
    })
}

/// Bound on `Σ_{|r|_∞ > cutoff} j0·env(|r|)·γ(|r|)` by sup-norm shells:
/// `(2n+1)^d - (2n-1)^d` points with `n ≤ |r| ≤ √d·n`.
fn envelope_tail(
    j0: f64,
    env: Envelope,
    cutoff: usize,
    dim: usize,
    weights: WeightSystem,
    tolerance: f64,
) -> Result<f64> {
    let d = dim as i32;
    let sd = (dim as f64).sqrt();
    let shell = |n: f64| {
        let count = (2.0 * n + 1.0).powi(d) - (2.0 * n - 1.0).powi(d);
        count * j0 * env.eval(n) * weights.weight(sd * n)
    };
    // decide convergence from the asymptotic rate of the summand
    let converges = match (env, weights) {
        (Envelope::Exponential { delta }, WeightSystem::Exponential { delta: w }) => delta > w * sd,
        (Envelope::Exponential { .. }, WeightSystem::Polynomial { .. }) => true,
        (Envelope::Polynomial { .. }, WeightSystem::Exponential { delta }) => delta == 0.0,
        (Envelope::Polynomial { p }, WeightSystem::Polynomial { p: q }) => p - q > dim as f64,
    };
    ensure!(
        converges || j0 == 0.0,
        Divergence,
        "coupling envelope {env:?} is not summable against weights {weights:?} in d = {dim}"
    );
    let mut total = 0.0;
    let mut n = cutoff as f64 + 1.0;
    let max_terms = 10_000_000usize;
    for _ in 0..max_terms {
        let t = shell(n);
        total += t;
        if t <= 1e-17 * total.max(1e-300) || t == 0.0 {
            break;
        }
        n += 1.0;
    }
    // polynomial tails: add the integral remainder beyond the last shell
    if let (Envelope::Polynomial { p }, WeightSystem::Polynomial { p: q }) = (env, weights) {
        let k = p - q - (dim as f64 - 1.0);
        let c = j0 * 2.0 * dim as f64 * 3f64.powi(d - 1) * sd.max(1.0).powf(q.max(0.0)) * 2f64.powf(q.max(0.0));
        total += c * n.powf(1.0 - k) / (k - 1.0);
    }
    ensure!(
        total <= tolerance || j0 == 0.0,
        Divergence,
        "truncation tail bound {total:.3e} exceeds tolerance {tolerance:.3e}; raise the cutoff"
    );
    Ok(total)
}

/// `K_3^{(0)} = (2^{R-2}·R·||J||_0)⁻¹`; `+∞` for a decoupled system.
pub fn k3_threshold(order_r: usize, j_norm0: f64) -> f64 {
    if j_norm0 == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (2f64.powi(order_r as i32 - 2) * order_r as f64 * j_norm0)
}

/// The alternative smallness threshold `K_3 < (3R·2^R·||J||_0)⁻¹` used for
/// the a priori moment estimates.
pub fn k3_threshold_moments(order_r: usize, j_norm0: f64) -> f64 {
    if j_norm0 == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (3.0 * order_r as f64 * 2f64.powi(order_r as i32) * j_norm0)
}

/// Explicit many-body family with `J_{k_1..k_M} ∝ exp(-2σ Σ_{pairs} |k_a - k_b|)`,
/// used only to exercise the many-body seminorm identities.
#[derive(Debug, Clone, Copy)]
pub struct ManyBodyFamily {
    pub sigma: f64,
    pub order_r: f64,
    pub dim: usize,
}

/// `||J_M||_p` and `|||J_M|||_p` at the origin (the family is translation invariant).
#[derive(Debug, Clone, Copy)]
pub struct ManyBodySeminorms {
    pub norm: f64,
    pub triple: f64,
}

impl ManyBodyFamily {
    pub fn coefficient(&self, sites: &[Vec<i64>]) -> f64 {
        let mut s = 0.0;
        for a in 0..sites.len() {
            for b in a + 1..sites.len() {
                let diff: Vec<i64> = sites[a].iter().zip(&sites[b]).map(|(x, y)| x - y).collect();
                s += euclid(&diff);
            }
        }
        let m = sites.len() as f64;
        m * m * self.order_r * (-2.0 * self.sigma * s).exp()
    }

    /// Enumerates `{k_2..k_M}` in a window of sup-radius `radius` around `k_1 = 0`.
    pub fn seminorms(&self, m: usize, p: f64, radius: i64) -> ManyBodySeminorms {
        let pts = cube_offsets(self.dim, radius);
        let origin = vec![0i64; self.dim];
        let mut norm = 0.0;
        let mut triple = 0.0;
        let mut idx: Vec<usize> = (0..m - 1).collect();
        if m - 1 > pts.len() {
            return ManyBodySeminorms { norm: 0.0, triple: 0.0 };
        }
        loop {
            let mut sites = vec![origin.clone()];
            sites.extend(idx.iter().map(|&i| pts[i].clone()));
            let jv = self.coefficient(&sites);
            let dists: Vec<f64> = sites.iter().map(|s| euclid(s)).collect();
            norm += jv * (1.0 + dists.iter().sum::<f64>()).powf(p);
            triple += jv * dists.iter().map(|d| (1.0 + d).powf(p)).sum::<f64>();
            // next combination
            let k = idx.len();
            let mut i = k;
            while i > 0 && idx[i - 1] == pts.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
        ManyBodySeminorms { norm, triple }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn nearest_neighbour_row_sums() {
        let c = CouplingSpec::HarmonicNn { j: 1.0 };
        let s0 = c.seminorm(1, WeightSystem::Polynomial { p: 0.0 }, 1e-8).unwrap();
        assert_eq!(s0.value, 2.0);
        let s1 = c.seminorm(1, WeightSystem::Polynomial { p: 1.0 }, 1e-8).unwrap();
        assert_eq!(s1.value, 4.0);
        assert_eq!(s0.triple, 2.0 * s0.value);
        assert_eq!(s0.tilde_row_sum, 4.0 * 2.0);
        let s2d = c.seminorm(2, WeightSystem::Polynomial { p: 0.0 }, 1e-8).unwrap();
        assert_eq!(s2d.value, 4.0);
    }

    #[test]
    fn exponential_envelope_geometric_series() {
        let c = CouplingSpec::PairMatrix {
            j0: 1.0,
            envelope: Envelope::Exponential { delta: 2.0 },
            cutoff: 40,
            pair_coeffs: square(),
        };
        let s = c.seminorm(1, WeightSystem::Exponential { delta: 1.0 }, 1e-6).unwrap();
        let exact = 2.0 / (E - 1.0);
        assert!((s.value - exact).abs() < 1e-12);
        assert!(s.value <= exact && exact <= s.upper() + 1e-15);
        let short = CouplingSpec::PairMatrix {
            j0: 1.0,
            envelope: Envelope::Exponential { delta: 2.0 },
            cutoff: 5,
            pair_coeffs: square(),
        };
        let s = short.seminorm(1, WeightSystem::Exponential { delta: 1.0 }, 1.0).unwrap();
        assert!(s.value < exact && s.upper() >= exact - 1e-15);
    }

    #[test]
    fn nonsummable_envelope_is_rejected() {
        let c = CouplingSpec::PairMatrix {
            j0: 1.0,
            envelope: Envelope::Polynomial { p: 1.5 },
            cutoff: 10,
            pair_coeffs: square(),
        };
        assert!(matches!(
            c.seminorm(1, WeightSystem::Polynomial { p: 1.0 }, 1e-3),
            Err(crate::Error::Divergence(_))
        ));
        let c = CouplingSpec::PairMatrix {
            j0: 1.0,
            envelope: Envelope::Exponential { delta: 0.5 },
            cutoff: 2,
            pair_coeffs: square(),
        };
        // summable, but the truncated tail is far above the tolerance
        assert!(matches!(
            c.seminorm(1, WeightSystem::Polynomial { p: 0.0 }, 1e-6),
            Err(crate::Error::Divergence(_))
        ));
    }

    #[test]
    fn seminorm_nondecreasing_in_p() {
        let c = CouplingSpec::PairMatrix {
            j0: 0.7,
            envelope: Envelope::Exponential { delta: 3.0 },
            cutoff: 4,
            pair_coeffs: square(),
        };
        let mut last = 0.0;
        for p in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let s = c.seminorm(2, WeightSystem::Polynomial { p }, 1.0).unwrap();
            assert!(s.value >= last);
            assert!((s.triple - (s.value + c.seminorm(2, WeightSystem::Polynomial { p: 0.0 }, 1.0).unwrap().value)).abs() < 1e-12);
            last = s.value;
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(k3_threshold(2, 2.0), 0.25);
        assert_eq!(k3_threshold(4, 1.0), 1.0 / 16.0);
        assert_eq!(k3_threshold(2, 0.0), f64::INFINITY);
        assert!(k3_threshold_moments(2, 2.0) < k3_threshold(2, 2.0));
    }

    #[test]
    fn order_and_validation() {
        assert_eq!(CouplingSpec::HarmonicNn { j: 1.0 }.order(), 2);
        assert_eq!(CouplingSpec::PolyPairNn { coeffs: vec![0.0, 1.0, 0.0, 0.5] }.order(), 4);
        assert!(CouplingSpec::PolyPairNn { coeffs: vec![1.0] }.validate().is_err());
        assert!(CouplingSpec::HarmonicNn { j: -1.0 }.validate().is_err());
    }

    #[test]
    fn weights_are_submultiplicative() {
        for w in [WeightSystem::Polynomial { p: 2.5 }, WeightSystem::Exponential { delta: 0.7 }] {
            let c = w.submultiplicativity_constant();
            for k in -6i64..=6 {
                for j in -6i64..=6 {
                    let lhs = w.weight((k - j).abs() as f64);
                    let rhs = c * w.weight(k.abs() as f64) * w.weight(j.abs() as f64);
                    assert!(lhs <= rhs * (1.0 + 1e-12));
                    assert!(w.weight(k.abs() as f64) >= 1.0);
                }
            }
        }
    }

    #[test]
    fn many_body_seminorm_equivalence() {
        let fam = ManyBodyFamily {
            sigma: 0.5,
            order_r: 2.0,
            dim: 1,
        };
        for m in 2..=4 {
            let s0 = fam.seminorms(m, 0.0, 6);
            assert!((s0.triple - m as f64 * s0.norm).abs() < 1e-12 * s0.triple);
            for p in [1.0, 2.0] {
                let s = fam.seminorms(m, p, 6);
                let mf = m as f64;
                assert!(s.triple / mf <= s.norm * (1.0 + 1e-12));
                assert!(s.norm <= mf.powf(p - 1.0) * s.triple * (1.0 + 1e-12));
            }
        }
    }
}
