//! Three-edge graphs with weighted vertex matching and the objects of their
//! boundary triple: Γ0 u = w·u at each endpoint, Γ1 u = Σ conj(w)⁻¹ ∂ₙu with
//! ∂ = a(d/dx + i m). Every M-matrix and resolvent in the crate is assembled
//! from the per-edge closed forms in [`EdgeKernel`].

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cell::{cis, CellParams, Quasimomentum, SpectralPoint};
use crate::error::{Error, Result};
use crate::grid::{EdgeFunction, EdgeId, StateVector};

pub type MMatrix3 = Matrix3<Complex64>;
pub type BoundaryData = Vector3<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Which graph (and triple) an operator lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripleKind {
    /// Period-ε cell, soft coefficient ε², plain continuity.
    Unscaled,
    /// Soft edge stretched to length l2; its endpoints carry weight ε^{-1/2}.
    Rescaled,
    /// Stiff cycle plus a detached soft loop, coupled only through B̃(z).
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub vertex: usize,
    pub weight: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeData {
    pub id: EdgeId,
    pub len: f64,
    pub a: f64,
    /// Magnetic shift m in a((1/i)d/dx + m)².
    pub m: f64,
    /// m·len, kept separately so it is formed from τ rather than from a large t.
    pub ml: f64,
    pub start: Endpoint,
    pub end: Endpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub kind: TripleKind,
    pub edges: [EdgeData; 3],
}

impl Triple {
    pub fn new(kind: TripleKind, c: &CellParams, q: &Quasimomentum) -> Result<Triple> {
        q.check(c)?;
        let (eps, tau, t) = (c.eps(), q.tau, q.t);
        let ep = |vertex, weight| Endpoint { vertex, weight };
        let stiff1 = |start, end| EdgeData {
            id: EdgeId::E1,
            len: eps * c.l1(),
            a: c.a1(),
            m: t,
            ml: tau * c.l1(),
            start,
            end,
        };
        let stiff3 = |start, end| EdgeData {
            id: EdgeId::E3,
            len: eps * c.l3(),
            a: c.a3(),
            m: t,
            ml: tau * c.l3(),
            start,
            end,
        };
        let edges = match kind {
            TripleKind::Unscaled => [
                stiff1(ep(0, C1), ep(1, C1)),
                EdgeData {
                    id: EdgeId::E2,
                    len: eps * c.l2(),
                    a: eps * eps,
                    m: t,
                    ml: tau * c.l2(),
                    start: ep(1, C1),
                    end: ep(2, C1),
                },
                stiff3(ep(2, C1), ep(0, C1)),
            ],
            TripleKind::Rescaled => {
                let w = Complex64::new(eps.sqrt().recip(), 0.0);
                [
                    stiff1(ep(0, C1), ep(1, C1)),
                    soft_edge(c, tau, ep(1, w), ep(2, w)),
                    stiff3(ep(2, C1), ep(0, C1)),
                ]
            }
            TripleKind::Modified => {
                c.stiffness()?;
                let w_soft = weight_soft(c, tau);
                [
                    stiff1(ep(0, C1), ep(2, w_soft.conj())),
                    soft_edge(c, tau, ep(1, C1), ep(1, w_soft)),
                    stiff3(ep(2, C1), ep(0, C1)),
                ]
            }
        };
        Ok(Triple { kind, edges })
    }

    pub fn kernel(&self, id: EdgeId, sp: &SpectralPoint) -> Result<EdgeKernel> {
        EdgeKernel::new(&self.edges[id.index()], sp)
    }

    pub fn kernels(&self, sp: &SpectralPoint) -> Result<[EdgeKernel; 3]> {
        Ok([
            self.kernel(EdgeId::E1, sp)?,
            self.kernel(EdgeId::E2, sp)?,
            self.kernel(EdgeId::E3, sp)?,
        ])
    }

    /// M(z) assembled edge by edge from the Dirichlet-to-Neumann pieces.
    pub fn m_matrix(&self, sp: &SpectralPoint) -> Result<MMatrix3> {
        let mut m = MMatrix3::zeros();
        for e in &self.edges {
            let ker = EdgeKernel::new(e, sp)?;
            let (i, j) = (e.start.vertex, e.end.vertex);
            let (ws, we) = (e.start.weight, e.end.weight);
            m[(i, i)] += ker.dn_start_of_start() / ws.norm_sqr();
            m[(j, j)] += ker.dn_end_of_end() / we.norm_sqr();
            m[(i, j)] += ker.dn_start_of_end() / (ws.conj() * we);
            m[(j, i)] += ker.dn_end_of_start() / (we.conj() * ws);
        }
        Ok(m)
    }

    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.edges[j].len)
    }

    /// γ(z)φ evaluated at x on edge `id`.
    pub fn gamma_at(&self, ker: &EdgeKernel, id: EdgeId, phi: &BoundaryData, x: f64) -> Complex64 {
        let e = &self.edges[id.index()];
        phi[e.start.vertex] / e.start.weight * ker.phi_start(x)
            + phi[e.end.vertex] / e.end.weight * ker.phi_end(x)
    }

    /// γ(z)φ sampled on an `n`-interval grid of each edge.
    pub fn gamma_solution(&self, phi: &BoundaryData, sp: &SpectralPoint, n: usize) -> Result<StateVector> {
        let ks = self.kernels(sp)?;
        let mk = |j: usize| {
            let id = EdgeId::ALL[j];
            EdgeFunction::from_fn(id, self.edges[j].len, n, |x| self.gamma_at(&ks[j], id, phi, x))
        };
        Ok(StateVector {
            edges: [mk(0), mk(1), mk(2)],
        })
    }

    /// Γ1 (A_∞ − z)⁻¹ f, i.e. γ(z̄)* f, by quadrature against the flux kernels.
    pub fn gamma1_dirichlet(&self, f: &StateVector, sp: &SpectralPoint) -> Result<BoundaryData> {
        self.check_lengths(f)?;
        let mut out = BoundaryData::zeros();
        for (j, e) in self.edges.iter().enumerate() {
            let ker = EdgeKernel::new(e, sp)?;
            let fj = &f.edges[j];
            out[e.start.vertex] += fj.integrate_against(|y| ker.flux_start(y)) / e.start.weight.conj();
            out[e.end.vertex] += fj.integrate_against(|y| ker.flux_end(y)) / e.end.weight.conj();
        }
        Ok(out)
    }

    /// Γ0 of a sampled function: weighted endpoint values.
    /// Returns the trace and the spread between endpoints sharing a vertex.
    pub fn gamma0(&self, u: &StateVector) -> (BoundaryData, f64) {
        let mut seen: [Vec<Complex64>; 3] = Default::default();
        for (j, e) in self.edges.iter().enumerate() {
            seen[e.start.vertex].push(e.start.weight * u.edges[j].start());
            seen[e.end.vertex].push(e.end.weight * u.edges[j].end());
        }
        let mut out = BoundaryData::zeros();
        let mut spread: f64 = 0.0;
        for v in 0..3 {
            let vals = &seen[v];
            if vals.is_empty() {
                continue;
            }
            out[v] = vals[0];
            for w in &vals[1..] {
                spread = spread.max((w - vals[0]).norm());
            }
        }
        (out, spread)
    }

    pub(crate) fn check_lengths(&self, f: &StateVector) -> Result<()> {
        for (e, g) in self.edges.iter().zip(&f.edges) {
            if (e.len - g.length()).abs() > 1e-12 * e.len {
                return Err(Error::GridMismatch(format!(
                    "{} has length {}, graph expects {}",
                    e.id,
                    g.length(),
                    e.len
                )));
            }
        }
        Ok(())
    }
}

fn soft_edge(c: &CellParams, tau: f64, start: Endpoint, end: Endpoint) -> EdgeData {
    EdgeData {
        id: EdgeId::E2,
        len: c.l2(),
        a: 1.0,
        m: tau,
        ml: tau * c.l2(),
        start,
        end,
    }
}

/// w_soft = e^{−i(l1+l3)τ}.
pub fn weight_soft(c: &CellParams, tau: f64) -> Complex64 {
    cis(-(c.stiff_len() * tau).rem_euclid(TAU))
}

/// sin θ, or a pole error when θ sits on πℤ.
pub(crate) fn checked_sin(theta: Complex64, edge: EdgeId) -> Result<Complex64> {
    let s = theta.sin();
    if s.norm() < 1e-12 * theta.norm().max(1.0) {
        return Err(Error::Pole { edge, theta });
    }
    Ok(s)
}

/// Closed-form pieces for one edge: −a(d/dx + im)²u = z u on [0, len].
#[derive(Debug, Clone, Copy)]
pub struct EdgeKernel {
    pub len: f64,
    pub a: f64,
    pub m: f64,
    pub ml: f64,
    pub k: Complex64,
    /// κ = k/√a.
    pub kappa: Complex64,
    pub sin_kl: Complex64,
    pub cos_kl: Complex64,
}

impl EdgeKernel {
    pub fn new(e: &EdgeData, sp: &SpectralPoint) -> Result<Self> {
        Self::from_parts(e.id, e.len, e.a, e.m, e.ml, sp)
    }

    pub fn from_parts(id: EdgeId, len: f64, a: f64, m: f64, ml: f64, sp: &SpectralPoint) -> Result<Self> {
        let kappa = sp.k / a.sqrt();
        let theta = kappa * len;
        let sin_kl = checked_sin(theta, id)?;
        Ok(EdgeKernel {
            len,
            a,
            m,
            ml,
            k: sp.k,
            kappa,
            sin_kl,
            cos_kl: theta.cos(),
        })
    }

    fn sqrt_a_k(&self) -> Complex64 {
        self.a.sqrt() * self.k
    }

    /// e^{-imx}: the phase is split so large m with small x stays accurate.
    fn phase(&self, x: f64) -> Complex64 {
        cis(-self.ml * (x / self.len))
    }

    /// Solution with u(0) = 1, u(len) = 0.
    pub fn phi_start(&self, x: f64) -> Complex64 {
        self.phase(x) * (self.kappa * (self.len - x)).sin() / self.sin_kl
    }

    /// Solution with u(0) = 0, u(len) = 1.
    pub fn phi_end(&self, x: f64) -> Complex64 {
        self.phase(x) * cis(self.ml) * (self.kappa * x).sin() / self.sin_kl
    }

    pub fn dn_start_of_start(&self) -> Complex64 {
        -self.sqrt_a_k() * self.cos_kl / self.sin_kl
    }
    pub fn dn_end_of_start(&self) -> Complex64 {
        self.sqrt_a_k() * cis(-self.ml) / self.sin_kl
    }
    pub fn dn_start_of_end(&self) -> Complex64 {
        self.sqrt_a_k() * cis(self.ml) / self.sin_kl
    }
    pub fn dn_end_of_end(&self) -> Complex64 {
        -self.sqrt_a_k() * self.cos_kl / self.sin_kl
    }

    /// ∂ₙ(R f)(0) = ∫ flux_start(y) f(y) dy for the Dirichlet resolvent R.
    pub fn flux_start(&self, y: f64) -> Complex64 {
        (self.kappa * (self.len - y)).sin() / self.sin_kl / self.phase(y)
    }

    /// ∂ₙ(R f)(len) = ∫ flux_end(y) f(y) dy.
    pub fn flux_end(&self, y: f64) -> Complex64 {
        cis(-self.ml) * (self.kappa * y).sin() / self.sin_kl / self.phase(y)
    }

    /// Dirichlet Green function of a((1/i)d/dx + m)² − z.
    pub fn green(&self, x: f64, y: f64) -> Complex64 {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let g = (self.kappa * lo).sin() * (self.kappa * (self.len - hi)).sin() / (self.sqrt_a_k() * self.sin_kl);
        g * self.phase(x) / self.phase(y)
    }

    /// (A_D − z)⁻¹ f on the uniform grid of `f`, by fourth-order cumulative
    /// integration of the split Green function.
    pub fn dirichlet_apply(&self, f: &EdgeFunction) -> EdgeFunction {
        let n = f.n();
        let x = f.nodes();
        let g: Vec<Complex64> = f.samples().iter().zip(&x).map(|(v, &y)| v / self.phase(y)).collect();
        let left: Vec<Complex64> = x.iter().zip(&g).map(|(&y, g)| (self.kappa * y).sin() * g).collect();
        let right: Vec<Complex64> = x
            .iter()
            .zip(&g)
            .map(|(&y, g)| (self.kappa * (self.len - y)).sin() * g)
            .collect();
        let cl = cumulative(&left, f.h());
        let cr = cumulative(&right, f.h());
        let total_r = cr[n];
        let denom = self.sqrt_a_k() * self.sin_kl;
        let samples = (0..=n)
            .map(|i| {
                let xi = x[i];
                let v = (self.kappa * (self.len - xi)).sin() * cl[i] + (self.kappa * xi).sin() * (total_r - cr[i]);
                if i == 0 || i == n {
                    C0
                } else {
                    self.phase(xi) * v / denom
                }
            })
            .collect();
        EdgeFunction::from_samples(f.edge(), f.length(), samples).expect("same grid")
    }
}

/// Running integral ∫_0^{x_i} on a uniform grid with local cubic panels.
pub fn cumulative(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len() - 1;
    let mut out = vec![C0; n + 1];
    if n < 3 {
        for i in 0..n {
            out[i + 1] = out[i] + (v[i] + v[i + 1]) * (h / 2.0);
        }
        return out;
    }
    for i in 0..n {
        let piece = if i == 0 {
            v[0] * 9.0 + v[1] * 19.0 - v[2] * 5.0 + v[3]
        } else if i == n - 1 {
            v[n - 3] - v[n - 2] * 5.0 + v[n - 1] * 19.0 + v[n] * 9.0
        } else {
            (v[i] + v[i + 1]) * 13.0 - v[i - 1] - v[i + 2]
        };
        out[i + 1] = out[i] + piece * (h / 24.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{make_cell, spectral_point};
    use approx::assert_abs_diff_eq;

    #[test]
    fn cumulative_is_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let v: Vec<Complex64> = (0..=n).map(|i| Complex64::new((i as f64 * h).exp(), 0.0)).collect();
            let c = cumulative(&v, h);
            (0..=n)
                .map(|i| (c[i].re - ((i as f64 * h).exp() - 1.0)).abs())
                .fold(0.0, f64::max)
        };
        let r = err(32) / err(64);
        assert!(r > 12.0, "ratio {r}");
    }

    #[test]
    fn unscaled_and_rescaled_share_m() {
        let c = make_cell(1.0, 1.0, 0.25, 0.5, 0.1).unwrap();
        let q = Quasimomentum::from_t(5.0, 0.1);
        let sp = spectral_point(Complex64::new(-1.0, 0.3));
        let a = Triple::new(TripleKind::Unscaled, &c, &q).unwrap().m_matrix(&sp).unwrap();
        let b = Triple::new(TripleKind::Rescaled, &c, &q).unwrap().m_matrix(&sp).unwrap();
        assert_abs_diff_eq!((a - b).norm() / a.norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn green_vanishes_at_ends() {
        let sp = spectral_point(Complex64::new(2.0, 1.0));
        let k = EdgeKernel::from_parts(EdgeId::E2, 0.5, 1.0, 3.0, 1.5, &sp).unwrap();
        assert!(k.green(0.0, 0.2).norm() < 1e-15);
        assert!(k.green(0.5, 0.2).norm() < 1e-15);
        assert!((k.green(0.1, 0.3) - k.green(0.3, 0.1) * cis(2.0 * 3.0 * 0.2)).norm() < 1e-14);
    }
}
