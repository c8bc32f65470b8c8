//! Closed-form M-matrices of the fibre operator, the modified graph and the
//! parameterising matrix B̃(z), with their small-ε expansions.
//!
//! The corner block of M₁ in the expansion of (M̃ − B̃)⁻¹ comes from a hand
//! expansion in the basis e0 = (q̄, 0, 1)/√2, e1 = (q̄, 0, −1)/√2, q = e^{iεl3 t},
//! in which the stiff 2×2 block is diagonal to O(ε³):
//!
//! ```text
//! S00 = εzc/2 + ε³σ,  S11 = −2A/ε,  A = a(1/l1 + 1/l3),  σ = z²(l1³ + l3³)/(24a)
//! ζ = z²c²/(4A),  κ = 2[σ(D + zc) + zcζ/2]/(zcD)
//! μ00 = 2[ζ − (D + zc)κ]/(zcD),  μ11 = −1/(2A),  μ01 = μ10 = zc/(2AD)
//! M₁|corners = μ00 e0e0* + μ11 e1e1* + μ01 (e0e1* + e1e0*)
//! ```
//! with c = l1 + l3. The remainder in the corners is O(ε²) (observed O(ε³)).

use std::f64::consts::TAU;

use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::cell::{cis, CellParams, Quasimomentum, SpectralPoint};
use crate::error::{Error, Result};
use crate::grid::EdgeId;
use crate::triple::{checked_sin, weight_soft, MMatrix3};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Expansion A ≈ ε⁻¹ m_minus1 + m_0 + ε m_1 of an inverse M-matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MAsymptotics {
    pub m_minus1: MMatrix3,
    pub m_0: MMatrix3,
    pub m_1: MMatrix3,
    pub valid_for: String,
}

impl MAsymptotics {
    pub fn evaluate(&self, eps: f64) -> MMatrix3 {
        self.m_minus1 / Complex64::from(eps) + self.m_0 + self.m_1 * Complex64::from(eps)
    }
}

fn cot_csc(theta: Complex64, edge: EdgeId) -> Result<(Complex64, Complex64)> {
    let s = checked_sin(theta, edge)?;
    Ok((theta.cos() / s, s.inv()))
}

/// Phase e^{i lj τ} = e^{i εlj t}, reduced before exponentiation.
fn ph(l: f64, tau: f64) -> Complex64 {
    cis((l * tau).rem_euclid(TAU))
}

/// M-matrix of the fibre operator on the period-ε cell (plain continuity,
/// soft coefficient ε²).
pub fn m1(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<MMatrix3> {
    q.check(c)?;
    let (k, eps, tau) = (sp.k, c.eps(), q.tau);
    let (ra1, ra3) = (c.a1().sqrt(), c.a3().sqrt());
    let (cot1, csc1) = cot_csc(k * (eps * c.l1() / ra1), EdgeId::E1)?;
    // soft edge: √a2 = ε, argument k·εl2/ε = k l2
    let (cot2, csc2) = cot_csc(k * c.l2(), EdgeId::E2)?;
    let (cot3, csc3) = cot_csc(k * (eps * c.l3() / ra3), EdgeId::E3)?;
    let (p1, p2, p3) = (ph(c.l1(), tau), ph(c.l2(), tau), ph(c.l3(), tau));
    let d1 = ra1 * k * cot1;
    let d2 = eps * k * cot2;
    let d3 = ra3 * k * cot3;
    let o1 = ra1 * k * csc1;
    let o2 = eps * k * csc2;
    let o3 = ra3 * k * csc3;
    Ok(MMatrix3::new(
        -d1 - d3,
        o1 * p1,
        o3 * p3.conj(),
        o1 * p1.conj(),
        -d1 - d2,
        o2 * p2,
        o3 * p3,
        o2 * p2.conj(),
        -d2 - d3,
    ))
}

/// M-matrix of the rescaled fibre operator, soft edge [0, l2] with weights
/// ε^{-1/2} at its ends. The weights exactly compensate the rescaling, so
/// this coincides entrywise with [`m1`].
pub fn m2(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<MMatrix3> {
    q.check(c)?;
    let (k, eps, tau) = (sp.k, c.eps(), q.tau);
    let (ra1, ra3) = (c.a1().sqrt(), c.a3().sqrt());
    let (cot1, csc1) = cot_csc(k * (eps * c.l1() / ra1), EdgeId::E1)?;
    let (cot2, csc2) = cot_csc(k * c.l2(), EdgeId::E2)?;
    let (cot3, csc3) = cot_csc(k * (eps * c.l3() / ra3), EdgeId::E3)?;
    // the soft edge sees the rescaled shift τ over length l2
    let w2 = ph(c.l2(), tau);
    let soft_diag = -k * cot2;
    let soft_off = k * csc2;
    let mut m = MMatrix3::zeros();
    m[(0, 0)] = -ra1 * k * cot1 - ra3 * k * cot3;
    m[(1, 1)] = -ra1 * k * cot1 + eps * soft_diag;
    m[(2, 2)] = eps * soft_diag - ra3 * k * cot3;
    m[(0, 1)] = ra1 * k * csc1 * ph(c.l1(), tau);
    m[(1, 0)] = ra1 * k * csc1 * ph(c.l1(), tau).conj();
    m[(0, 2)] = ra3 * k * csc3 * ph(c.l3(), tau).conj();
    m[(2, 0)] = ra3 * k * csc3 * ph(c.l3(), tau);
    m[(1, 2)] = eps * soft_off * w2;
    m[(2, 1)] = eps * soft_off * w2.conj();
    Ok(m)
}

/// B̃(z) of the modified graph: the energy-dependent coupling between the
/// stiff cycle (vertex 3) and the soft loop (vertex 2).
pub fn btilde(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<MMatrix3> {
    q.check(c)?;
    let z = sp.z;
    let cl = c.stiff_len();
    let w_soft = weight_soft(c, q.tau);
    let s = c.eps().sqrt();
    let mut b = MMatrix3::zeros();
    b[(1, 1)] = -2.0 * z * cl;
    b[(1, 2)] = s * z * cl * w_soft;
    b[(2, 1)] = s * z * cl * w_soft.conj();
    Ok(b)
}

/// M̃(z) − B̃(z) for the modified graph; requires a1 = a3.
pub fn mtilde_minus_b(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<MMatrix3> {
    q.check(c)?;
    let a = c.stiffness()?;
    let (k, z, eps, tau) = (sp.k, sp.z, c.eps(), q.tau);
    let ra = a.sqrt();
    let cl = c.stiff_len();
    let (cot1, csc1) = cot_csc(k * (eps * c.l1() / ra), EdgeId::E1)?;
    let (cot3, csc3) = cot_csc(k * (eps * c.l3() / ra), EdgeId::E3)?;
    let s2 = checked_sin(k * c.l2(), EdgeId::E2)?;
    let qd = ph(c.l3(), tau);
    let diag = -ra * k * (cot1 + cot3);
    let off = ra * k * (csc1 + csc3);
    let soft = 2.0 * k * (tau.cos() - (k * c.l2()).cos()) / s2 + 2.0 * z * cl;
    let p = ph(cl, tau);
    let s = eps.sqrt();
    let mut m = MMatrix3::zeros();
    m[(0, 0)] = diag;
    m[(2, 2)] = diag;
    m[(0, 2)] = off * qd.conj();
    m[(2, 0)] = off * qd;
    m[(1, 1)] = soft;
    m[(1, 2)] = -s * z * cl * p.conj();
    m[(2, 1)] = -s * z * cl * p;
    Ok(m)
}

/// D(k) = k²(l1+l3) − 2k cot kl2 + 2k cos τ / sin kl2.
pub fn dispersion_denominator(k: Complex64, tau: f64, c: &CellParams) -> Result<Complex64> {
    let s = checked_sin(k * c.l2(), EdgeId::E2)?;
    let kl = k * c.l2();
    Ok(k * k * c.stiff_len() + 2.0 * k * (tau.cos() - kl.cos()) / s)
}

/// Leading term of det M1 as ε → 0:
/// (l1 l3 ε)⁻¹ a1 a3 k (2 csc kl2 cos τ + k(l1+l3) − 2 cot kl2).
pub fn det_m1_asymptotic(sp: &SpectralPoint, tau: f64, c: &CellParams) -> Result<Complex64> {
    let k = sp.k;
    if k.norm() == 0.0 {
        return Err(Error::domain("z", "k = 0 is excluded"));
    }
    let kl = k * c.l2();
    let s = checked_sin(kl, EdgeId::E2)?;
    let factor = 2.0 * tau.cos() / s + k * c.stiff_len() - 2.0 * kl.cos() / s;
    Ok(c.a1() * c.a3() / (c.l1() * c.l3() * c.eps()) * k * factor)
}

fn checked_d(sp: &SpectralPoint, tau: f64, c: &CellParams) -> Result<Complex64> {
    let d = dispersion_denominator(sp.k, tau, c)?;
    if d.norm() < 1e-8 {
        return Err(Error::NearSingularDispersion(d.norm()));
    }
    Ok(d)
}

/// (M2)⁻¹ = ε⁻¹ D(k)⁻¹ v v* + O(ε) with v = (e^{iεl1t}, 1, e^{iε(l1+l3)t}).
pub fn m2_inverse_asymptotics(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<MAsymptotics> {
    q.check(c)?;
    let d = checked_d(sp, q.tau, c)?;
    let v = phases_vector(q, c);
    Ok(MAsymptotics {
        m_minus1: v * v.adjoint() / d,
        m_0: MMatrix3::zeros(),
        m_1: MMatrix3::zeros(),
        valid_for: "z away from the zeros of D and sin(k l2), remainder O(eps)".into(),
    })
}

/// v = (e^{iεl1t}, 1, e^{iε(l1+l3)t}); v v* has eigenvalue 3 on v.
pub fn phases_vector(q: &Quasimomentum, c: &CellParams) -> nalgebra::Vector3<Complex64> {
    nalgebra::Vector3::new(ph(c.l1(), q.tau), Complex64::new(1.0, 0.0), ph(c.stiff_len(), q.tau))
}

/// (M̃ − B̃)⁻¹ = ε⁻¹M₋₁ + M₀ + εM₁ + O(ε²), M₁ supported on the corners.
pub fn mtb_inverse_asymptotics(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<MAsymptotics> {
    q.check(c)?;
    let a = c.stiffness()?;
    let d = checked_d(sp, q.tau, c)?;
    let (z, eps, tau) = (sp.z, c.eps(), q.tau);
    if z.norm() == 0.0 {
        return Err(Error::domain("z", "z = 0 is excluded"));
    }
    let cl = c.stiff_len();
    let zc = z * cl;
    let qd = ph(c.l3(), tau);
    let lead = zc.inv() + d.inv();
    let mut m_minus1 = MMatrix3::zeros();
    m_minus1[(0, 0)] = lead;
    m_minus1[(2, 2)] = lead;
    m_minus1[(0, 2)] = lead * qd.conj();
    m_minus1[(2, 0)] = lead * qd;

    let r = eps.sqrt().recip();
    let mut m_0 = MMatrix3::zeros();
    m_0[(0, 1)] = r * ph(c.l1(), tau) / d;
    m_0[(1, 0)] = r * ph(c.l1(), tau).conj() / d;
    m_0[(1, 1)] = d.inv();
    m_0[(1, 2)] = r * ph(cl, tau).conj() / d;
    m_0[(2, 1)] = r * ph(cl, tau) / d;

    let big_a = a * (c.l1().recip() + c.l3().recip());
    let sigma = z * z * (c.l1().powi(3) + c.l3().powi(3)) / (24.0 * a);
    let zeta = zc * zc / (4.0 * big_a);
    let kap = 2.0 * (sigma * (d + zc) + zc * zeta / 2.0) / (zc * d);
    let mu00 = 2.0 / (zc * d) * (zeta - (d + zc) * kap);
    let mu11 = Complex64::from(-0.5 / big_a);
    let mu01 = zc / (2.0 * big_a * d);
    let one = Complex64::new(1.0, 0.0);
    let corner = Matrix2::new(one, qd.conj(), qd, one) * (mu00 / 2.0)
        + Matrix2::new(one, -qd.conj(), -qd, one) * (mu11 / 2.0)
        + Matrix2::new(one, C0, C0, -one) * mu01;
    let mut m_1 = MMatrix3::zeros();
    m_1[(0, 0)] = corner[(0, 0)];
    m_1[(0, 2)] = corner[(0, 1)];
    m_1[(2, 0)] = corner[(1, 0)];
    m_1[(2, 2)] = corner[(1, 1)];
    Ok(MAsymptotics {
        m_minus1,
        m_0,
        m_1,
        valid_for: "a1 = a3, z != 0, z away from the zeros of D and sin(k l2); corner remainder O(eps^2)".into(),
    })
}

/// Smallest eigenvalue of Im M = (M − M*)/(2i).
pub fn im_part_min_eigenvalue(m: &MMatrix3) -> f64 {
    let im = (m - m.adjoint()) / Complex64::new(0.0, 2.0);
    // symmetrise away rounding before the Hermitian solver
    let im = (im + im.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(im).eigenvalues.min()
}
