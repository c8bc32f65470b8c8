//! Resolvents on sampled functions: the Dirichlet decoupling, γ(z), the
//! Krein formula, the rank-one corrector and the homogenised resolvent.

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;

use crate::cell::{cis, CellParams, Quasimomentum, SpectralPoint};
use crate::error::{Error, Result};
use crate::grid::{EdgeFunction, EdgeId, StateVector};
use crate::mmatrix::btilde;
use crate::triple::{weight_soft, BoundaryData, EdgeKernel, MMatrix3, Triple, TripleKind};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Element (u, β) of L²(e2) ⊕ ℂ.
#[derive(Debug, Clone, PartialEq)]
pub struct HomState {
    pub u: EdgeFunction,
    pub beta: Complex64,
}

impl HomState {
    pub fn norm(&self) -> f64 {
        (self.u.norm().powi(2) + self.beta.norm_sqr()).sqrt()
    }

    pub fn inner(&self, other: &HomState) -> Result<Complex64> {
        Ok(self.u.inner(&other.u)? + self.beta * other.beta.conj())
    }

    /// Residual of u(0) = w_soft u(l2) = β/√(l1+l3).
    pub fn domain_residual(&self, tau: f64, c: &CellParams) -> f64 {
        let w = weight_soft(c, tau);
        let b = self.beta / c.stiff_len().sqrt();
        (self.u.start() - w * self.u.end()).norm().max((self.u.start() - b).norm())
    }
}

/// The stiff profile 𝒳 and its normalisation ψ on e1 ⊕ e3.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffProfile {
    pub chi: [EdgeFunction; 2],
    pub psi: [EdgeFunction; 2],
}

/// 𝒳(x) = e^{−itx} on e1 and e^{it(εl3 − x)} on e3, as functions.
pub fn chi_e1(x: f64, q: &Quasimomentum) -> Complex64 {
    cis(-q.tau * (x / q.eps))
}

pub fn chi_e3(x: f64, q: &Quasimomentum, c: &CellParams) -> Complex64 {
    cis(q.tau * (c.l3() - x / q.eps))
}

/// ψ = e^{iεl1 t} 𝒳 / √(ε(l1+l3)), unit norm in L²(e1) ⊕ L²(e3).
pub fn psi_scale(q: &Quasimomentum, c: &CellParams) -> Complex64 {
    cis(q.tau * c.l1()) / (c.eps() * c.stiff_len()).sqrt()
}

impl StiffProfile {
    pub fn new(q: &Quasimomentum, c: &CellParams, n: usize) -> Result<StiffProfile> {
        q.check(c)?;
        let eps = c.eps();
        let chi1 = EdgeFunction::from_fn(EdgeId::E1, eps * c.l1(), n, |x| chi_e1(x, q));
        let chi3 = EdgeFunction::from_fn(EdgeId::E3, eps * c.l3(), n, |x| chi_e3(x, q, c));
        let s = psi_scale(q, c);
        let psi = [chi1.scale(s), chi3.scale(s)];
        Ok(StiffProfile { chi: [chi1, chi3], psi })
    }

    pub fn psi_norm(&self) -> f64 {
        (self.psi[0].norm().powi(2) + self.psi[1].norm().powi(2)).sqrt()
    }

    /// ⟨f_stiff, ψ⟩.
    pub fn coefficient(&self, f: &StateVector) -> Result<Complex64> {
        Ok(f.edges[0].inner(&self.psi[0])? + f.edges[2].inner(&self.psi[1])?)
    }
}

/// (A_D − z)⁻¹ f on one edge for a((1/i)d/dx + t)², Dirichlet at both ends.
pub fn dirichlet_resolvent_edge(f: &EdgeFunction, sp: &SpectralPoint, t: f64, a: f64) -> Result<EdgeFunction> {
    let ker = EdgeKernel::from_parts(f.edge(), f.length(), a, t, t * f.length(), sp)?;
    Ok(ker.dirichlet_apply(f))
}

/// (A_∞ − z)⁻¹ on every edge of the graph.
pub fn dirichlet_decoupling(triple: &Triple, f: &StateVector, sp: &SpectralPoint) -> Result<StateVector> {
    triple.check_lengths(f)?;
    let ks = triple.kernels(sp)?;
    Ok(StateVector {
        edges: [0, 1, 2].map(|j| ks[j].dirichlet_apply(&f.edges[j])),
    })
}

/// The element of ker(A_max − z) with Γ0-trace `bd`.
pub fn gamma_solution(
    bd: &BoundaryData,
    sp: &SpectralPoint,
    q: &Quasimomentum,
    c: &CellParams,
    kind: TripleKind,
    n: usize,
) -> Result<StateVector> {
    Triple::new(kind, c, q)?.gamma_solution(bd, sp, n)
}

fn solve3(a: &MMatrix3, rhs: &BoundaryData, z: Complex64) -> Result<BoundaryData> {
    let det = a.determinant();
    let scale = a.norm().powi(3).max(f64::MIN_POSITIVE);
    if det.norm() < 1e-10 * scale {
        return Err(Error::SingularDenominator { z, det: det.norm() });
    }
    a.lu().solve(rhs).ok_or(Error::SingularDenominator { z, det: det.norm() })
}

/// R_B f = R_∞ f + γ(z)(B(z) − M(z))⁻¹ Γ1 R_∞ f on the chosen graph.
pub fn krein_resolvent(
    f: &StateVector,
    sp: &SpectralPoint,
    q: &Quasimomentum,
    c: &CellParams,
    kind: TripleKind,
    b: impl Fn(&SpectralPoint) -> Result<MMatrix3>,
) -> Result<StateVector> {
    let triple = Triple::new(kind, c, q)?;
    let r_inf = dirichlet_decoupling(&triple, f, sp)?;
    let g1 = triple.gamma1_dirichlet(f, sp)?;
    let bm = b(sp)? - triple.m_matrix(sp)?;
    let coef = solve3(&bm, &g1, sp.z)?;
    let ks = triple.kernels(sp)?;
    let mut out = r_inf;
    for j in 0..3 {
        let id = EdgeId::ALL[j];
        out.edges[j] = out.edges[j].map_samples(|x, u| u + triple.gamma_at(&ks[j], id, &coef, x));
    }
    Ok(out)
}

/// Resolvent of the rescaled fibre operator Φ A Φ*.
pub fn fibre_resolvent(f: &StateVector, sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<StateVector> {
    krein_resolvent(f, sp, q, c, TripleKind::Rescaled, |_| Ok(MMatrix3::zeros()))
}

/// Generalised resolvent of the modified-graph operator, B = B̃(z).
pub fn modified_resolvent(f: &StateVector, sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<StateVector> {
    krein_resolvent(f, sp, q, c, TripleKind::Modified, |s| btilde(s, q, c))
}

/// C f = z⁻¹⟨f, ψ⟩ψ on the stiff edges, zero on e2.
pub fn corrector_apply(f: &StateVector, sp: &SpectralPoint, q: &Quasimomentum, c: &CellParams) -> Result<StateVector> {
    if sp.z.norm() == 0.0 {
        return Err(Error::domain("z", "the corrector is undefined at z = 0"));
    }
    let n1 = f.edges[0].n();
    if f.edges[2].n() != n1 {
        return Err(Error::GridMismatch("stiff edges need equal grids".into()));
    }
    let prof = StiffProfile::new(q, c, n1)?;
    if !prof.psi[0].same_grid(&f.edges[0]) || !prof.psi[1].same_grid(&f.edges[2]) {
        return Err(Error::GridMismatch("state is not on the rescaled stiff edges".into()));
    }
    let s = prof.coefficient(f)? / sp.z;
    Ok(StateVector {
        edges: [
            prof.psi[0].scale(s),
            EdgeFunction::zeros(EdgeId::E2, f.edges[1].length(), f.edges[1].n()),
            prof.psi[1].scale(s),
        ],
    })
}

fn soft_kernel(sp: &SpectralPoint, tau: f64, c: &CellParams) -> Result<EdgeKernel> {
    EdgeKernel::from_parts(EdgeId::E2, c.l2(), 1.0, tau, tau * c.l2(), sp)
}

/// Boundary system for (u(0), u(l2)) of the homogenised problem:
/// u(0) − w_soft u(l2) = 0 and ∂ₙu(0) + w_soft ∂ₙu(l2) + z(l1+l3)u(0) = rhs.
pub fn hom_boundary_matrix(sp: &SpectralPoint, tau: f64, c: &CellParams) -> Result<Matrix2<Complex64>> {
    let ker = soft_kernel(sp, tau, c)?;
    let w = weight_soft(c, tau);
    let zc = sp.z * c.stiff_len();
    Ok(Matrix2::new(
        Complex64::new(1.0, 0.0),
        -w,
        ker.dn_start_of_start() + w * ker.dn_end_of_start() + zc,
        ker.dn_start_of_end() + w * ker.dn_end_of_end(),
    ))
}

/// det of [`hom_boundary_matrix`] divided by its row norms.
pub fn hom_boundary_det(sp: &SpectralPoint, tau: f64, c: &CellParams) -> Result<f64> {
    let m = hom_boundary_matrix(sp, tau, c)?;
    let r0 = (m[(0, 0)].norm_sqr() + m[(0, 1)].norm_sqr()).sqrt();
    let r1 = (m[(1, 0)].norm_sqr() + m[(1, 1)].norm_sqr()).sqrt();
    Ok(m.determinant().norm() / (r0 * r1))
}

/// (A_hom − z)⁻¹ on L²(e2) ⊕ ℂ.
pub fn hom_resolvent(rhs: &HomState, sp: &SpectralPoint, tau: f64, c: &CellParams) -> Result<HomState> {
    if (rhs.u.length() - c.l2()).abs() > 1e-12 * c.l2() {
        return Err(Error::GridMismatch(format!("soft edge length {} != l2 = {}", rhs.u.length(), c.l2())));
    }
    let ker = soft_kernel(sp, tau, c)?;
    let w = weight_soft(c, tau);
    let m = hom_boundary_matrix(sp, tau, c)?;
    if hom_boundary_det(sp, tau, c)? < 1e-12 {
        return Err(Error::SingularDenominator {
            z: sp.z,
            det: m.determinant().norm(),
        });
    }
    let g = rhs.u.integrate_against(|y| ker.flux_start(y) + w * ker.flux_end(y));
    let sc = c.stiff_len().sqrt();
    let b = Vector2::new(C0, -g - sc * rhs.beta);
    let ab = m.lu().solve(&b).ok_or(Error::SingularDenominator {
        z: sp.z,
        det: m.determinant().norm(),
    })?;
    let rd = ker.dirichlet_apply(&rhs.u);
    let u = rd.map_samples(|x, v| v + ab[0] * ker.phi_start(x) + ab[1] * ker.phi_end(x));
    Ok(HomState { u, beta: sc * ab[0] })
}

/// A_hom applied by second-order finite differences (for checks only).
pub fn hom_apply(s: &HomState, tau: f64, c: &CellParams) -> HomState {
    let u = s.u.samples();
    let n = s.u.n();
    let h = s.u.h();
    let i = Complex64::new(0.0, 1.0);
    let d1 = |j: usize| -> Complex64 {
        if j == 0 {
            (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
        } else if j == n {
            (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h)
        } else {
            (u[j + 1] - u[j - 1]) / (2.0 * h)
        }
    };
    let d2 = |j: usize| -> Complex64 {
        let j = j.clamp(1, n - 1);
        (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (h * h)
    };
    let out: Vec<Complex64> = (0..=n)
        .map(|j| {
            let v = if j == 0 {
                2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]
            } else if j == n {
                2.0 * u[n] - 5.0 * u[n - 1] + 4.0 * u[n - 2] - u[n - 3]
            } else {
                Complex64::new(0.0, 0.0)
            };
            let second = if j == 0 || j == n { v / (h * h) } else { d2(j) };
            // ((1/i)d/dx + τ)²u = −u'' − 2iτu' + τ²u
            -second - 2.0 * i * tau * d1(j) + tau * tau * u[j]
        })
        .collect();
    let w = weight_soft(c, tau);
    let du0 = d1(0) + i * tau * u[0];
    let dul = d1(n) + i * tau * u[n];
    let beta = -(du0 - w * dul) / c.stiff_len().sqrt();
    HomState {
        u: EdgeFunction::from_samples(EdgeId::E2, s.u.length(), out).expect("same grid"),
        beta,
    }
}

/// Largest singular value of `lhs − rhs` (both in weighted coordinates).
pub fn opnorm_diff(lhs: &DMatrix<Complex64>, rhs: &DMatrix<Complex64>) -> Result<f64> {
    if lhs.shape() != rhs.shape() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", lhs.shape(), rhs.shape())));
    }
    opnorm(&(lhs - rhs))
}

/// Operator 2-norm: dense SVD up to 1024, power iteration on DᴴD beyond.
pub fn opnorm(d: &DMatrix<Complex64>) -> Result<f64> {
    if d.nrows() == 0 || d.ncols() == 0 {
        return Ok(0.0);
    }
    if d.nrows().max(d.ncols()) <= 1024 {
        return Ok(d.clone().svd(false, false).singular_values.max());
    }
    power_norm(d, 1e-8, 5000)
}

/// σ_max by power iteration on DᴴD from a fixed deterministic start.
pub fn power_norm(d: &DMatrix<Complex64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = d.ncols();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()));
    let nv = v.norm();
    if nv == 0.0 {
        return Ok(0.0);
    }
    v /= Complex64::from(nv);
    let mut prev = 0.0;
    for _ in 0..max_iter {
        let w = d.adjoint() * (d * &v);
        let lam = w.norm();
        if lam == 0.0 {
            return Ok(0.0);
        }
        v = w / Complex64::from(lam);
        if (lam - prev).abs() <= tol * lam {
            return Ok(lam.sqrt());
        }
        prev = lam;
    }
    Err(Error::NonConvergence { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::make_cell;
    use crate::fd::FdFibre;
    use crate::mmatrix::m2;

    fn c1(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dirichlet_edge_matches_finite_differences() {
        // second-order centred scheme for (−d² − 2it d + t²)u − zu = f, Dirichlet rows
        let (n, len, t) = (512usize, 0.5, 3.0);
        let sp = SpectralPoint::from_k(c1(1.0, 1.0));
        let f = EdgeFunction::from_fn(EdgeId::E2, len, n, |x| c1((4.0 * x).cos(), x * x));
        let u = dirichlet_resolvent_edge(&f, &sp, t, 1.0).unwrap();
        let h = len / n as f64;
        let i = c1(0.0, 1.0);
        let mut a = DMatrix::<Complex64>::zeros(n - 1, n - 1);
        let mut b = nalgebra::DVector::<Complex64>::zeros(n - 1);
        for r in 0..n - 1 {
            a[(r, r)] = c1(2.0 / (h * h) + t * t, 0.0) - sp.z;
            if r > 0 {
                a[(r, r - 1)] = c1(-1.0 / (h * h), 0.0) + i * t / h;
            }
            if r + 1 < n - 1 {
                a[(r, r + 1)] = c1(-1.0 / (h * h), 0.0) - i * t / h;
            }
            b[r] = f.samples()[r + 1];
        }
        let v = a.lu().solve(&b).unwrap();
        let mut full = vec![C0; n + 1];
        for r in 0..n - 1 {
            full[r + 1] = v[r];
        }
        let fd = EdgeFunction::from_samples(EdgeId::E2, len, full).unwrap();
        let err = u.try_add(&fd, c1(-1.0, 0.0)).unwrap().norm() / fd.norm();
        assert!(err <= 5e-4, "{err}");
        assert!(u.start().norm() < 1e-10 && u.end().norm() < 1e-10);
    }

    #[test]
    fn gamma_columns_reproduce_m_matrix() {
        let c = make_cell(1.0, 1.0, 0.25, 0.5, 0.1).unwrap();
        let q = Quasimomentum::from_t(5.0, 0.1);
        let sp = SpectralPoint::from_k(c1(1.2, 0.3));
        let triple = Triple::new(TripleKind::Rescaled, &c, &q).unwrap();
        let ks = triple.kernels(&sp).unwrap();
        let m = m2(&sp, &q, &c).unwrap();
        for v in 0..3 {
            let mut bd = BoundaryData::zeros();
            bd[v] = c1(1.0, 0.0);
            // Γ1 of the closed-form solution: Σ conj(w)⁻¹ ∂ₙu at each endpoint
            let mut g1 = BoundaryData::zeros();
            for (j, e) in triple.edges.iter().enumerate() {
                let a0 = bd[e.start.vertex] / e.start.weight;
                let a1 = bd[e.end.vertex] / e.end.weight;
                g1[e.start.vertex] += (a0 * ks[j].dn_start_of_start() + a1 * ks[j].dn_start_of_end()) / e.start.weight.conj();
                g1[e.end.vertex] += (a0 * ks[j].dn_end_of_start() + a1 * ks[j].dn_end_of_end()) / e.end.weight.conj();
            }
            for r in 0..3 {
                assert!((g1[r] - m[(r, v)]).norm() < 1e-9 * (1.0 + m[(r, v)].norm()));
            }
        }
        let zero = gamma_solution(&BoundaryData::zeros(), &sp, &q, &c, TripleKind::Rescaled, 32).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    fn test_rhs(x: f64, j: usize) -> Complex64 {
        match j {
            0 => c1((3.0 * x).cos(), x),
            1 => c1(x.exp(), -0.5 * (2.0 * x).sin()),
            _ => c1(1.0 + x * x, 0.0),
        }
    }

    fn krein_vs_fd(n: usize) -> f64 {
        let c = make_cell(1.0, 1.0, 0.25, 0.5, 0.1).unwrap();
        let q = Quasimomentum::from_t(5.0, 0.1);
        let sp = spectral_point(c1(-1.0, 0.0));
        let triple = Triple::new(TripleKind::Rescaled, &c, &q).unwrap();
        let fd = FdFibre::new(&triple, n).unwrap();
        let u_fd = fd
            .solve(sp.z, [&|x| test_rhs(x, 0), &|x| test_rhs(x, 1), &|x| test_rhs(x, 2)])
            .unwrap();
        let ls = triple.lengths();
        let f = StateVector::new(
            EdgeFunction::from_fn(EdgeId::E1, ls[0], fd.ns[0], |x| test_rhs(x, 0)),
            EdgeFunction::from_fn(EdgeId::E2, ls[1], fd.ns[1], |x| test_rhs(x, 1)),
            EdgeFunction::from_fn(EdgeId::E3, ls[2], fd.ns[2], |x| test_rhs(x, 2)),
        )
        .unwrap();
        let u = fibre_resolvent(&f, &sp, &q, &c).unwrap();
        (&u - &u_fd).norm() / u.norm()
    }

    use crate::cell::spectral_point;

    #[test]
    fn krein_matches_finite_difference_cycle() {
        let e1 = krein_vs_fd(128);
        let e2 = krein_vs_fd(256);
        assert!(e2 < 1e-4, "{e2}");
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn corrector_properties() {
        let c = make_cell(1.0, 1.0, 0.25, 0.5, 0.125).unwrap();
        let q = Quasimomentum::from_tau(1.0, 0.125);
        let sp = spectral_point(c1(-2.0, 1.0));
        let prof = StiffProfile::new(&q, &c, 64).unwrap();
        assert!((prof.psi_norm() - 1.0).abs() < 1e-10);
        let f = StateVector::new(prof.psi[0].clone(), EdgeFunction::zeros(EdgeId::E2, 0.5, 64), prof.psi[1].clone()).unwrap();
        let out = corrector_apply(&f, &sp, &q, &c).unwrap();
        let want = f.scale(sp.z.inv());
        assert!((&out - &want).norm() < 1e-10);
        // stiff part orthogonal to ψ: e3 component rescaled so the two contributions cancel
        let g = StateVector::new(
            prof.psi[0].clone(),
            EdgeFunction::from_fn(EdgeId::E2, 0.5, 64, |x| c1(x, 1.0)),
            prof.psi[1].scale(c1(-c.l1() / c.l3(), 0.0)),
        )
        .unwrap();
        assert!(corrector_apply(&g, &sp, &q, &c).unwrap().norm() < 1e-10);
        assert!(corrector_apply(&f, &SpectralPoint::real(0.0), &q, &c).is_err());
    }

    fn random_hom(seed: u64, n: usize) -> HomState {
        let s = seed as f64;
        HomState {
            u: EdgeFunction::from_fn(EdgeId::E2, 0.5, n, |x| c1((s * x + 1.0).sin(), (s + 2.0) * x * (0.5 - x))),
            beta: c1(0.3 * s, -1.0),
        }
    }

    #[test]
    fn hom_resolvent_inverts_and_is_symmetric() {
        let c = make_cell(1.0, 1.0, 0.25, 0.5, 0.1).unwrap();
        let tau = 0.7;
        let sp = spectral_point(c1(-1.0, 0.0));
        let f = random_hom(1, 1024);
        let u = hom_resolvent(&f, &sp, tau, &c).unwrap();
        assert!(u.domain_residual(tau, &c) < 1e-9);
        let au = hom_apply(&u, tau, &c);
        let mut r = au.u.try_add(&u.u, -sp.z).unwrap().try_add(&f.u, c1(-1.0, 0.0)).unwrap();
        // drop the one-sided boundary stencils
        r = r.map_samples(|x, v| if !(0.02..=0.48).contains(&x) { C0 } else { v });
        assert!(r.norm() / f.u.norm() < 1e-4, "{}", r.norm());
        assert!((au.beta - sp.z * u.beta - f.beta).norm() < 1e-3);

        let g = random_hom(2, 256);
        let f = random_hom(3, 256);
        let lhs = hom_resolvent(&f, &sp, tau, &c).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&hom_resolvent(&g, &sp, tau, &c).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn opnorm_examples() {
        let a = DMatrix::from_fn(50, 50, |i, j| c1(((i * 7 + j * 3) as f64).sin(), ((i + 2 * j) as f64).cos()));
        assert!(opnorm_diff(&a, &a).unwrap() < 1e-12);
        let v = nalgebra::DVector::from_fn(20, |i, _| c1(i as f64, 1.0));
        let w = nalgebra::DVector::from_fn(20, |i, _| c1(1.0, -(i as f64).sqrt()));
        let r1 = &v * w.adjoint();
        assert!((opnorm(&r1).unwrap() - v.norm() * w.norm()).abs() < 1e-9 * v.norm() * w.norm());
        let dense = opnorm(&a).unwrap();
        let pw = power_norm(&a, 1e-12, 100_000).unwrap();
        assert!((dense - pw).abs() < 1e-8 * dense);
        assert!(opnorm_diff(&a, &DMatrix::zeros(3, 3)).is_err());
    }
}
