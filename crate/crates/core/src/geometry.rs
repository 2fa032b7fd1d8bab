//! Separable Legendre potentials and the Bregman machinery built on them.
//!
//! Two geometries are supported:
//!
//! * `Euclidean`: `h(x) = ½‖x‖²` on all of `ℝⁿ`. Every Bregman construction
//!   collapses to its classical counterpart (`D_h(x, y) = ½‖x - y‖²`, the
//!   mirror step is a plain gradient step).
//! * `Burg`: `h(x) = -Σ log xᵢ` on the open positive orthant. Here
//!   `∇h(x) = ∇h*(x) = -1/x` and `∇²h(x) = diag(1/x²)`.
//!
//! Both potentials have diagonal Hessians, so `(∇²h)⁻¹ v` is exact and cheap.

use crate::error::{Error, Result};

/// Smallest coordinate accepted as "strictly positive" by the Burg geometry.
pub const DOMAIN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialKind {
    Euclidean,
    Burg,
}

impl PotentialKind {
    pub fn name(self) -> &'static str {
        match self {
            PotentialKind::Euclidean => "euclidean",
            PotentialKind::Burg => "burg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Some(PotentialKind::Euclidean),
            "burg" => Some(PotentialKind::Burg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegendrePotential {
    kind: PotentialKind,
    dimension: usize,
}

impl LegendrePotential {
    pub fn new(kind: PotentialKind, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::parameter("potential dimension must be positive"));
        }
        Ok(Self { kind, dimension })
    }

    pub fn euclidean(dimension: usize) -> Self {
        Self::new(PotentialKind::Euclidean, dimension).expect("positive dimension")
    }

    pub fn burg(dimension: usize) -> Self {
        Self::new(PotentialKind::Burg, dimension).expect("positive dimension")
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Same geometry on a space of a different dimension.
    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        Self::new(self.kind, dimension)
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dimension {
            return Err(Error::shape(format!(
                "{what} has length {} but the potential has dimension {}",
                v.len(),
                self.dimension
            )));
        }
        Ok(())
    }

    /// Index of the first coordinate outside the interior of `dom(h)`.
    pub fn first_outside(&self, x: &[f64]) -> Option<usize> {
        match self.kind {
            PotentialKind::Euclidean => x.iter().position(|v| !v.is_finite()),
            PotentialKind::Burg => x
                .iter()
                .position(|&v| !(v.is_finite() && v >= DOMAIN_FLOOR)),
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && self.first_outside(x).is_none()
    }

    fn check_interior(&self, x: &[f64], what: &str) -> Result<()> {
        self.check_len(x, what)?;
        match self.first_outside(x) {
            None => Ok(()),
            Some(i) => Err(Error::domain(format!(
                "{what}[{i}] = {} is outside int dom(h) for the {} potential",
                x[i],
                self.kind.name()
            ))),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_interior(x, "x")?;
        Ok(match self.kind {
            PotentialKind::Euclidean => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            PotentialKind::Burg => -x.iter().map(|v| v.ln()).sum::<f64>(),
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_interior(x, "x")?;
        Ok(match self.kind {
            PotentialKind::Euclidean => x.to_vec(),
            PotentialKind::Burg => x.iter().map(|v| -1.0 / v).collect(),
        })
    }

    /// `∇h*`, the inverse of [`grad`](Self::grad).
    pub fn conj_grad(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z, "z")?;
        match self.kind {
            PotentialKind::Euclidean => {
                if let Some(i) = z.iter().position(|v| !v.is_finite()) {
                    return Err(Error::domain(format!("z[{i}] is not finite")));
                }
                Ok(z.to_vec())
            }
            PotentialKind::Burg => {
                if let Some(i) = z.iter().position(|&v| !(v.is_finite() && v < 0.0)) {
                    return Err(Error::domain(format!(
                        "z[{i}] = {} is outside dom(grad h*) = negative orthant",
                        z[i]
                    )));
                }
                Ok(z.iter().map(|v| -1.0 / v).collect())
            }
        }
    }

    /// `(∇²h(y))⁻¹ v`.
    pub fn hess_inv_apply(&self, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_interior(y, "y")?;
        self.check_len(v, "v")?;
        Ok(match self.kind {
            PotentialKind::Euclidean => v.to_vec(),
            PotentialKind::Burg => y.iter().zip(v).map(|(y, v)| y * y * v).collect(),
        })
    }

    /// `D_h(x, y) = h(x) - h(y) - <∇h(y), x - y>`.
    ///
    /// Returns [`Error::InfiniteDivergence`] when `x` is outside `dom(h)`
    /// and [`Error::Domain`] when `y` is not interior.
    pub fn bregman_div(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_len(x, "x")?;
        self.check_interior(y, "y")?;
        if let Some(index) = self.first_outside(x) {
            return Err(Error::InfiniteDivergence { index });
        }
        Ok(match self.kind {
            PotentialKind::Euclidean => {
                0.5 * x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
            PotentialKind::Burg => x
                .iter()
                .zip(y)
                .map(|(a, b)| {
                    // r - 1 - ln r written to stay accurate for r near 1
                    let t = (a - b) / b;
                    t - t.ln_1p()
                })
                .sum(),
        })
    }

    /// `∇h*(∇h(x) - τu)`.
    pub fn mirror_step(&self, x: &[f64], u: &[f64], tau: f64) -> Result<Vec<f64>> {
        self.check_interior(x, "x")?;
        self.check_len(u, "u")?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::parameter(format!("step size must be positive, got {tau}")));
        }
        match self.kind {
            PotentialKind::Euclidean => Ok(x.iter().zip(u).map(|(x, u)| x - tau * u).collect()),
            PotentialKind::Burg => x
                .iter()
                .zip(u)
                .enumerate()
                .map(|(i, (x, u))| {
                    let denom = 1.0 + tau * x * u;
                    if denom > 0.0 && denom.is_finite() {
                        Ok(x / denom)
                    } else {
                        Err(Error::MirrorDomain { index: i, value: denom })
                    }
                })
                .collect(),
        }
    }
}
