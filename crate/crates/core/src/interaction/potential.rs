use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// One-site anharmonic potential `V`.
///
/// Polynomial coefficients start at the linear term: `coeffs[l-1] = b_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OneSitePotential {
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    /// `scale·(e^{λq} + e^{-λq})`.
    ExpPair {
        lambda: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Sum {
        terms: Vec<OneSitePotential>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for OneSitePotential {
    fn default() -> Self {
        Self::zero()
    }
}

impl OneSitePotential {
    pub fn zero() -> Self {
        Self::Polynomial {
            coeffs: vec![],
            constant: 0.0,
        }
    }

    /// `b_1 q + b_2 q² + …` from `[b_1, b_2, …]`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::Polynomial {
            coeffs,
            constant: 0.0,
        }
    }

    /// `coeff·q⁴`.
    pub fn quartic(coeff: f64) -> Self {
        Self::polynomial(vec![0.0, 0.0, 0.0, coeff])
    }

    pub fn double_well(quadratic: f64, quartic: f64) -> Self {
        Self::polynomial(vec![0.0, quadratic, 0.0, quartic])
    }

    /// Value (`order = 0`) or derivative (`order = 1, 2`).
    pub fn eval(&self, q: f64, order: u8) -> f64 {
        match self {
            Self::Polynomial { coeffs, constant } => {
                let k = order as usize;
                // Horner over b_l·l!/(l-k)!·q^{l-k}, l = k..=deg
                let mut acc = 0.0;
                for (idx, &b) in coeffs.iter().enumerate().rev() {
                    let l = idx + 1;
                    if l < k {
                        break;
                    }
                    let falling: usize = (l + 1 - k..=l).product();
                    acc = acc * q + b * falling as f64;
                }
                match k {
                    // the loop stops at l = 1, one power of q short
                    0 => acc * q + constant,
                    _ => acc,
                }
            }
            Self::ExpPair { lambda, scale } => {
                let (a, b) = ((lambda * q).exp(), (-lambda * q).exp());
                match order {
                    0 => scale * (a + b),
                    1 => scale * lambda * (a - b),
                    _ => scale * lambda * lambda * (a + b),
                }
            }
            Self::Sum { terms } => terms.iter().map(|t| t.eval(q, order)).sum(),
        }
    }

    #[inline]
    pub fn value(&self, q: f64) -> f64 {
        self.eval(q, 0)
    }

    #[inline]
    pub fn d1(&self, q: f64) -> f64 {
        self.eval(q, 1)
    }

    #[inline]
    pub fn d2(&self, q: f64) -> f64 {
        self.eval(q, 2)
    }

    /// Growth order `P`: the degree, or `None` for exponential growth.
    pub fn growth_order(&self) -> Option<usize> {
        match self {
            Self::Polynomial { coeffs, .. } => {
                Some(coeffs.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1))
            }
            Self::ExpPair { .. } => None,
            Self::Sum { terms } => terms
                .iter()
                .map(|t| t.growth_order())
                .try_fold(0, |acc, p| p.map(|p| acc.max(p))),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Polynomial { coeffs, constant } => *constant == 0.0 && coeffs.iter().all(|&b| b == 0.0),
            Self::ExpPair { scale, .. } => *scale == 0.0,
            Self::Sum { terms } => terms.iter().all(|t| t.is_zero()),
        }
    }

    /// Coefficients `[b_1, b_2, …]` when this is a plain polynomial (sums of polynomials fold in).
    pub fn polynomial_coeffs(&self) -> Option<(f64, Vec<f64>)> {
        match self {
            Self::Polynomial { coeffs, constant } => Some((*constant, coeffs.clone())),
            Self::ExpPair { .. } => None,
            Self::Sum { terms } => {
                let mut c0 = 0.0;
                let mut out: Vec<f64> = vec![];
                for t in terms {
                    let (k, cs) = t.polynomial_coeffs()?;
                    c0 += k;
                    if cs.len() > out.len() {
                        out.resize(cs.len(), 0.0);
                    }
                    for (o, c) in out.iter_mut().zip(cs) {
                        *o += c;
                    }
                }
                Some((c0, out))
            }
        }
    }

    /// Checks the structural requirements of a confining potential: each
    /// polynomial piece has even degree with a positive leading coefficient
    /// (or vanishes), each exponential pair has `λ ≠ 0` and positive scale.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Polynomial { coeffs, constant } => {
                ensure!(
                    constant.is_finite() && coeffs.iter().all(|b| b.is_finite()),
                    InvalidParameter,
                    "polynomial coefficients must be finite"
                );
                if let Some(p) = self.growth_order().filter(|&p| p > 0) {
                    ensure!(
                        p % 2 == 0 && coeffs[p - 1] > 0.0,
                        InvalidParameter,
                        "polynomial potential needs even degree and positive leading coefficient (degree {p}, leading {})",
                        coeffs[p - 1]
                    );
                }
                Ok(())
            }
            Self::ExpPair { lambda, scale } => {
                ensure!(*lambda != 0.0 && lambda.is_finite(), InvalidParameter, "exponential pair needs λ ≠ 0");
                ensure!(*scale > 0.0, InvalidParameter, "exponential pair needs positive scale");
                Ok(())
            }
            Self::Sum { terms } => {
                // a sum only needs its dominant polynomial part to be confining
                for t in terms {
                    if let Self::ExpPair { .. } = t {
                        t.validate()?;
                    }
                }
                if let Some((c0, cs)) = self.polynomial_coeffs() {
                    Self::Polynomial { coeffs: cs, constant: c0 }.validate()?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_values() {
        let v = OneSitePotential::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(v.eval(2.0, 0), 16.0);
        assert_eq!(v.eval(2.0, 1), 32.0);
        assert_eq!(v.eval(2.0, 2), 48.0);
        assert_eq!(v.growth_order(), Some(4));
    }

    #[test]
    fn exp_pair_values() {
        let v = OneSitePotential::ExpPair { lambda: 1.0, scale: 1.0 };
        assert_eq!(v.eval(0.0, 2), 2.0);
        assert_eq!(v.eval(0.0, 1), 0.0);
        assert_eq!(v.growth_order(), None);
    }

    #[test]
    fn validation() {
        assert!(OneSitePotential::quartic(1.0).validate().is_ok());
        assert!(OneSitePotential::zero().validate().is_ok());
        assert!(OneSitePotential::polynomial(vec![1.0]).validate().is_err());
        assert!(OneSitePotential::polynomial(vec![0.0, 0.0, 0.0, -1.0]).validate().is_err());
        let s = OneSitePotential::Sum {
            terms: vec![OneSitePotential::double_well(-5.0, 1.0), OneSitePotential::polynomial(vec![0.3])],
        };
        assert!(s.validate().is_ok());
        assert_eq!(s.polynomial_coeffs().unwrap().1, vec![0.3, -5.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            b in prop::collection::vec(-2.0f64..2.0, 6),
            lam in 0.2f64..1.5,
            q in -2.0f64..2.0,
        ) {
            let v = OneSitePotential::Sum {
                terms: vec![
                    OneSitePotential::polynomial(b),
                    OneSitePotential::ExpPair { lambda: lam, scale: 0.5 },
                ],
            };
            for order in 0..2u8 {
                let h = 1e-5;
                let fd = (v.eval(q + h, order) - v.eval(q - h, order)) / (2.0 * h);
                let exact = v.eval(q, order + 1);
                let scale = exact.abs().max(1.0);
                prop_assert!((fd - exact).abs() <= 1e-6 * scale, "order {}: {} vs {}", order, fd, exact);
            }
        }
    }
}
