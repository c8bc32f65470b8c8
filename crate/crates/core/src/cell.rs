//! Cell geometry, spectral parameter and quasimomentum.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One period of the high-contrast graph: stiff edges e1, e3 with
/// coefficients `a1`, `a3`, soft edge e2 with coefficient eps².
/// Lengths are relative, `l1 + l2 + l3 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CellSpec", into = "CellSpec")]
pub struct CellParams {
    a1: f64,
    a3: f64,
    l1: f64,
    l2: f64,
    l3: f64,
    eps: f64,
}

/// Wire form of [`CellParams`]; `l3` is derived on load.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CellSpec {
    pub a1: f64,
    pub a3: f64,
    pub l1: f64,
    pub l2: f64,
    pub eps: f64,
}

impl TryFrom<CellSpec> for CellParams {
    type Error = Error;
    fn try_from(s: CellSpec) -> Result<Self> {
        make_cell(s.a1, s.a3, s.l1, s.l2, s.eps)
    }
}

impl From<CellParams> for CellSpec {
    fn from(c: CellParams) -> Self {
        CellSpec {
            a1: c.a1,
            a3: c.a3,
            l1: c.l1,
            l2: c.l2,
            eps: c.eps,
        }
    }
}

pub fn make_cell(a1: f64, a3: f64, l1: f64, l2: f64, eps: f64) -> Result<CellParams> {
    let positive = |field, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::domain(field, format!("must be positive and finite, got {v}")))
        }
    };
    positive("a1", a1)?;
    positive("a3", a3)?;
    positive("l1", l1)?;
    positive("l2", l2)?;
    positive("eps", eps)?;
    if l1 + l2 >= 1.0 {
        return Err(Error::domain("l2", format!("l1 + l2 = {} must be < 1", l1 + l2)));
    }
    if eps > 1.0 {
        return Err(Error::domain("eps", format!("must lie in (0, 1], got {eps}")));
    }
    Ok(CellParams {
        a1,
        a3,
        l1,
        l2,
        l3: 1.0 - l1 - l2,
        eps,
    })
}

impl CellParams {
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a3(&self) -> f64 {
        self.a3
    }
    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn l3(&self) -> f64 {
        self.l3
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Total stiff length l1 + l3, the δ′ coupling of the limit model.
    pub fn stiff_len(&self) -> f64 {
        self.l1 + self.l3
    }

    pub fn with_eps(&self, eps: f64) -> Result<CellParams> {
        make_cell(self.a1, self.a3, self.l1, self.l2, eps)
    }

    /// The common stiff coefficient, for code that needs a1 = a3.
    pub fn stiffness(&self) -> Result<f64> {
        if (self.a1 - self.a3).abs() > 1e-12 * self.a1.max(self.a3) {
            return Err(Error::domain(
                "a3",
                format!("equal stiff coefficients required, got a1 = {}, a3 = {}", self.a1, self.a3),
            ));
        }
        Ok(self.a1)
    }
}

/// Spectral parameter z with k = √z on the branch arg k ∈ [0, π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub z: Complex64,
    pub k: Complex64,
}

pub fn spectral_point(z: Complex64) -> SpectralPoint {
    SpectralPoint { z, k: branch(z.sqrt()) }
}

fn branch(k: Complex64) -> Complex64 {
    if k.im < 0.0 || (k.im == 0.0 && k.re < 0.0) {
        -k
    } else {
        // clears a possible -0.0 imaginary part
        Complex64::new(k.re, k.im + 0.0)
    }
}

impl SpectralPoint {
    /// Point with the given k, moved onto the branch if needed.
    pub fn from_k(k: Complex64) -> SpectralPoint {
        SpectralPoint { z: k * k, k: branch(k) }
    }

    pub fn real(z: f64) -> SpectralPoint {
        spectral_point(Complex64::new(z, 0.0))
    }

    pub fn conj(&self) -> SpectralPoint {
        spectral_point(self.z.conj())
    }
}

/// Fibre parameter t ∈ [0, 2π/ε) together with τ = εt ∈ [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quasimomentum {
    pub t: f64,
    pub tau: f64,
    pub eps: f64,
}

impl Quasimomentum {
    pub fn from_tau(tau: f64, eps: f64) -> Quasimomentum {
        let tau = tau.rem_euclid(TAU);
        Quasimomentum { t: tau / eps, tau, eps }
    }

    pub fn from_t(t: f64, eps: f64) -> Quasimomentum {
        Self::from_tau(eps * t, eps)
    }

    pub(crate) fn check(&self, c: &CellParams) -> Result<()> {
        if (self.eps - c.eps).abs() > 1e-14 * c.eps {
            return Err(Error::domain(
                "t",
                format!("quasimomentum built for eps = {}, cell has eps = {}", self.eps, c.eps),
            ));
        }
        Ok(())
    }
}

/// e^{iθ} for real θ.
pub(crate) fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}
