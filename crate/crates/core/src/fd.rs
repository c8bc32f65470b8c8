//! Finite-difference discretisation of a fibre operator on the cycle, used as
//! an independent check of the Krein formula. Each edge carries a P1 grid with
//! a Peierls phase e^{imh} per link; vertex unknowns are shared and endpoint
//! values are recovered as vertex value / weight. The mass matrix is lumped.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::cell::cis;
use crate::error::{Error, Result};
use crate::grid::{EdgeFunction, StateVector};
use crate::triple::Triple;

const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone)]
pub struct FdFibre {
    /// Intervals per edge.
    pub ns: [usize; 3],
    stiffness: DMatrix<Complex64>,
    mass: Vec<f64>,
    /// Unknown index of node i on edge j.
    idx: [Vec<usize>; 3],
    /// Node value = coef · unknown.
    coef: [Vec<Complex64>; 3],
    lengths: [f64; 3],
}

impl FdFibre {
    /// `n` intervals on the longest edge; others get the same spacing (at least 4).
    pub fn new(triple: &Triple, n: usize) -> Result<FdFibre> {
        if n < 4 {
            return Err(Error::domain("n", "need at least 4 intervals"));
        }
        let lengths = triple.lengths();
        let lmax = lengths.iter().cloned().fold(0.0, f64::max);
        let ns = lengths.map(|l| ((n as f64 * l / lmax).round() as usize).max(4));
        let dim = 3 + ns.iter().map(|m| m - 1).sum::<usize>();
        let mut stiffness = DMatrix::zeros(dim, dim);
        let mut mass = vec![0.0; dim];
        let mut base = 3;
        let mut idx: [Vec<usize>; 3] = Default::default();
        let mut coef: [Vec<Complex64>; 3] = Default::default();
        for (j, e) in triple.edges.iter().enumerate() {
            let m = ns[j];
            let h = e.len / m as f64;
            let mut ix = vec![e.start.vertex];
            ix.extend(base..base + m - 1);
            ix.push(e.end.vertex);
            base += m - 1;
            let mut cf = vec![C1; m + 1];
            cf[0] = C1 / e.start.weight;
            cf[m] = C1 / e.end.weight;
            let ph = cis(e.ml / m as f64);
            for i in 0..m {
                let loc = [cf[i], -ph * cf[i + 1]];
                let ids = [ix[i], ix[i + 1]];
                for r in 0..2 {
                    for s in 0..2 {
                        stiffness[(ids[r], ids[s])] += e.a / h * loc[r].conj() * loc[s];
                    }
                }
            }
            for i in 0..=m {
                let w = if i == 0 || i == m { h / 2.0 } else { h };
                mass[ix[i]] += w * cf[i].norm_sqr();
            }
            idx[j] = ix;
            coef[j] = cf;
        }
        Ok(FdFibre {
            ns,
            stiffness,
            mass,
            idx,
            coef,
            lengths,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Grid nodes of edge j.
    pub fn nodes(&self, j: usize) -> Vec<f64> {
        let m = self.ns[j];
        (0..=m).map(|i| self.lengths[j] * i as f64 / m as f64).collect()
    }

    /// (A − z)⁻¹f with f given pointwise on each edge.
    pub fn solve(&self, z: Complex64, f: [&dyn Fn(f64) -> Complex64; 3]) -> Result<StateVector> {
        let n = self.dim();
        let mut rhs = DVector::zeros(n);
        for j in 0..3 {
            let m = self.ns[j];
            let h = self.lengths[j] / m as f64;
            for (i, x) in self.nodes(j).into_iter().enumerate() {
                let w = if i == 0 || i == m { h / 2.0 } else { h };
                rhs[self.idx[j][i]] += w * self.coef[j][i].conj() * f[j](x);
            }
        }
        let mut a = self.stiffness.clone();
        for i in 0..n {
            a[(i, i)] -= z * self.mass[i];
        }
        let u = a
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularDenominator { z, det: 0.0 })?;
        let edge = |j: usize| {
            let s = (0..=self.ns[j]).map(|i| self.coef[j][i] * u[self.idx[j][i]]).collect();
            EdgeFunction::from_samples(crate::grid::EdgeId::ALL[j], self.lengths[j], s)
        };
        StateVector::new(edge(0)?, edge(1)?, edge(2)?)
    }

    /// Eigenvalues of the discrete operator, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let s: Vec<f64> = self.mass.iter().map(|m| m.sqrt().recip()).collect();
        let h = DMatrix::from_fn(n, n, |r, c| self.stiffness[(r, c)] * (s[r] * s[c]));
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}
