//! Resolvents as matrices on Gauss–Legendre nodes, in coordinates where the
//! Euclidean norm is the L² norm (entries carry √w on both sides). Finite-rank
//! parts are smooth and integrate to machine precision; the Dirichlet blocks
//! are identical in every operator on the same edge and cancel exactly.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cell::{CellParams, Quasimomentum, SpectralPoint};
use crate::error::{Error, Result};
use crate::grid::gauss_legendre;
use crate::mmatrix::btilde;
use crate::resolvent::{chi_e1, chi_e3, hom_boundary_det, hom_boundary_matrix, opnorm, psi_scale};
use crate::triple::{weight_soft, EdgeKernel, MMatrix3, Triple, TripleKind};

/// `m` Gauss nodes on each of the three edges.
#[derive(Debug, Clone)]
pub struct NodalGrid {
    pub m: usize,
    pub nodes: [Vec<f64>; 3],
    pub sqrt_w: [Vec<f64>; 3],
}

impl NodalGrid {
    pub fn new(lengths: [f64; 3], m: usize) -> NodalGrid {
        let mk = |j: usize| {
            let (x, w) = gauss_legendre(m, lengths[j]);
            (x, w.into_iter().map(f64::sqrt).collect::<Vec<_>>())
        };
        let (x0, w0) = mk(0);
        let (x1, w1) = mk(1);
        let (x2, w2) = mk(2);
        NodalGrid {
            m,
            nodes: [x0, x1, x2],
            sqrt_w: [w0, w1, w2],
        }
    }

    pub fn dim(&self) -> usize {
        3 * self.m
    }

    fn offset(&self, edge: usize) -> usize {
        edge * self.m
    }
}

/// Block-diagonal Dirichlet part of a resolvent.
pub fn dirichlet_map(triple: &Triple, sp: &SpectralPoint, grid: &NodalGrid) -> Result<DMatrix<Complex64>> {
    let n = grid.dim();
    let mut r: DMatrix<Complex64> = DMatrix::zeros(n, n);
    for (j, e) in triple.edges.iter().enumerate() {
        let ker = EdgeKernel::new(e, sp)?;
        let o = grid.offset(j);
        let (x, sw) = (&grid.nodes[j], &grid.sqrt_w[j]);
        for a in 0..grid.m {
            for b in 0..grid.m {
                r[(o + a, o + b)] = sw[a] * ker.green(x[a], x[b]) * sw[b];
            }
        }
    }
    Ok(r)
}

/// γ(z)(B − M)⁻¹Γ1R_∞, the finite-rank part of the Krein formula.
pub fn krein_finite_rank(
    triple: &Triple,
    sp: &SpectralPoint,
    b: &MMatrix3,
    grid: &NodalGrid,
) -> Result<DMatrix<Complex64>> {
    let n = grid.dim();
    let mut gam: DMatrix<Complex64> = DMatrix::zeros(n, 3);
    let mut g1: DMatrix<Complex64> = DMatrix::zeros(3, n);
    for (j, e) in triple.edges.iter().enumerate() {
        let ker = EdgeKernel::new(e, sp)?;
        let o = grid.offset(j);
        let (vs, ve) = (e.start.vertex, e.end.vertex);
        let (ws, we) = (e.start.weight, e.end.weight);
        for a in 0..grid.m {
            let (x, sw) = (grid.nodes[j][a], grid.sqrt_w[j][a]);
            gam[(o + a, vs)] += sw * ker.phi_start(x) / ws;
            gam[(o + a, ve)] += sw * ker.phi_end(x) / we;
            g1[(vs, o + a)] += sw * ker.flux_start(x) / ws.conj();
            g1[(ve, o + a)] += sw * ker.flux_end(x) / we.conj();
        }
    }
    let bm = b - triple.m_matrix(sp)?;
    let det = bm.determinant();
    if det.norm() < 1e-10 * bm.norm().powi(3) {
        return Err(Error::SingularDenominator { z: sp.z, det: det.norm() });
    }
    let lu = bm.lu();
    let bm_inv = lu.try_inverse().ok_or(Error::SingularDenominator { z: sp.z, det: det.norm() })?;
    let inv: DMatrix<Complex64> = DMatrix::from_iterator(3, 3, bm_inv.iter().cloned());
    Ok(gam * (inv * g1))
}

/// ψψ*/z on the stiff nodes.
pub fn corrector_map(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams, grid: &NodalGrid) -> Result<DMatrix<Complex64>> {
    let psi = psi_vector(q, c, grid);
    Ok(&psi * psi.adjoint() / sp.z)
}

/// ψ in weighted coordinates, zero on e2.
/// ⟨R_D ψ, ψ⟩ in closed form: on a stiff edge ψ is the gauge phase times a
/// constant, and a(−w″) − zw = 1 with w(0) = w(L) = 0 integrates to
/// −(L − 2tan(κL/2)/κ)/z.
pub fn stiff_dirichlet_psi(triple: &Triple, sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<Complex64> {
    let s2 = psi_scale(q, c).norm_sqr();
    let mut total = Complex64::new(0.0, 0.0);
    for e in [&triple.edges[0], &triple.edges[2]] {
        let ker = EdgeKernel::new(e, sp)?;
        let u = ker.kappa * e.len / 2.0;
        let defect = if u.norm() < 0.02 {
            let u2 = u * u;
            -e.len * u2 * (1.0 / 3.0 + u2 * (2.0 / 15.0 + u2 * (17.0 / 315.0 + u2 * 62.0 / 2835.0)))
        } else {
            e.len - 2.0 * u.tan() / ker.kappa
        };
        total += -defect / sp.z;
    }
    Ok(s2 * total)
}

pub fn psi_vector(q: &Quasimomentum, c: &CellParams, grid: &NodalGrid) -> nalgebra::DVector<Complex64> {
    let s = psi_scale(q, c);
    let mut v: nalgebra::DVector<Complex64> = nalgebra::DVector::zeros(grid.dim());
    for a in 0..grid.m {
        v[a] = s * grid.sqrt_w[0][a] * chi_e1(grid.nodes[0][a], q);
        v[grid.offset(2) + a] = s * grid.sqrt_w[2][a] * chi_e3(grid.nodes[2][a], q, c);
    }
    v
}

/// Ψ: (f1, f2, f3) ↦ (f2, ⟨f_stiff, ψ⟩), an (m+1) × 3m matrix.
pub fn psi_map(q: &Quasimomentum, c: &CellParams, grid: &NodalGrid) -> DMatrix<Complex64> {
    let m = grid.m;
    let psi = psi_vector(q, c, grid);
    let mut p: DMatrix<Complex64> = DMatrix::zeros(m + 1, grid.dim());
    for a in 0..m {
        p[(a, grid.offset(1) + a)] = Complex64::new(1.0, 0.0);
    }
    for j in 0..grid.dim() {
        p[(m, j)] = psi[j].conj();
    }
    p
}

/// (A_hom − z)⁻¹ on the soft nodes of `grid` plus one scalar coordinate.
pub fn hom_map(sp: &SpectralPoint, tau: f64, c: &CellParams, grid: &NodalGrid) -> Result<DMatrix<Complex64>> {
    let m = grid.m;
    let ker = EdgeKernel::from_parts(crate::grid::EdgeId::E2, c.l2(), 1.0, tau, tau * c.l2(), sp)?;
    let w = weight_soft(c, tau);
    if hom_boundary_det(sp, tau, c)? < 1e-12 {
        return Err(Error::SingularDenominator { z: sp.z, det: 0.0 });
    }
    let bm: Matrix2<Complex64> = hom_boundary_matrix(sp, tau, c)?;
    let inv = bm.try_inverse().ok_or(Error::SingularDenominator { z: sp.z, det: 0.0 })?;
    let (x, sw) = (&grid.nodes[1], &grid.sqrt_w[1]);
    let sc = c.stiff_len().sqrt();
    let mut r: DMatrix<Complex64> = DMatrix::zeros(m + 1, m + 1);
    for a in 0..m {
        for b in 0..m {
            r[(a, b)] = sw[a] * ker.green(x[a], x[b]) * sw[b];
        }
    }
    // boundary values (α, β') = inv · (0, −G f − √c β_f)
    let mut h: nalgebra::DVector<Complex64> = nalgebra::DVector::zeros(m + 1);
    for a in 0..m {
        h[a] = sw[a] * (inv[(0, 1)] * ker.phi_start(x[a]) + inv[(1, 1)] * ker.phi_end(x[a]));
    }
    h[m] = sc * inv[(0, 1)];
    let mut row: nalgebra::DVector<Complex64> = nalgebra::DVector::zeros(m + 1);
    for b in 0..m {
        row[b] = -sw[b] * (ker.flux_start(x[b]) + w * ker.flux_end(x[b]));
    }
    row[m] = Complex64::new(-sc, 0.0);
    Ok(r + h * row.transpose())
}

/// The three resolvent-difference norms at one (ε, τ, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSet {
    /// ‖ΦR_AΦ* − R_Ã − C‖
    pub thm41: f64,
    /// ‖ΦR_AΦ* − R_Ã‖, the same without the corrector
    pub thm41_uncorrected: f64,
    /// ‖Ψ(R_Ã + C)Ψ* − R_hom‖
    pub thm54: f64,
    /// ‖ΦR_AΦ* − Ψ*R_homΨ‖
    pub cor55: f64,
}

pub fn estimate_norms(sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams, m: usize) -> Result<NormSet> {
    if sp.z.norm() == 0.0 {
        return Err(Error::domain("z", "z = 0 is excluded"));
    }
    let orig = Triple::new(TripleKind::Rescaled, c, q)?;
    let modi = Triple::new(TripleKind::Modified, c, q)?;
    let grid = NodalGrid::new(orig.lengths(), m);
    let dir = dirichlet_map(&orig, sp, &grid)?;
    let fa = krein_finite_rank(&orig, sp, &MMatrix3::zeros(), &grid)?;
    let ft = krein_finite_rank(&modi, sp, &btilde(sp, q, c)?, &grid)?;
    let corr = corrector_map(sp, q, c, &grid)?;
    let psi = psi_map(q, c, &grid);
    let hom = hom_map(sp, q.tau, c, &grid)?;

    // the Dirichlet blocks of R_A and R_Ã coincide
    let diff = &fa - &ft;
    let thm41_uncorrected = opnorm(&diff)?;
    let thm41 = opnorm(&(&diff - &corr))?;
    let rt = &dir + &ft;
    let mut proj = &psi * (&rt + &corr) * psi.adjoint();
    // quadrature of ⟨R_D ψ, ψ⟩ sees the kink of the stiff Green function
    let quad = (psi.row(m) * &dir * psi.row(m).adjoint())[(0, 0)];
    proj[(m, m)] += stiff_dirichlet_psi(&orig, sp, q, c)? - quad;
    let thm54 = opnorm(&(proj - &hom))?;
    let ra = &dir + &fa;
    let cor55 = opnorm(&(ra - psi.adjoint() * hom * &psi))?;
    Ok(NormSet {
        thm41,
        thm41_uncorrected,
        thm54,
        cor55,
    })
}
