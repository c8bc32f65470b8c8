//! Sampled functions on the three edges and their quadrature.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_N: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeId {
    E1,
    E2,
    E3,
}

impl EdgeId {
    pub const ALL: [EdgeId; 3] = [EdgeId::E1, EdgeId::E2, EdgeId::E3];

    pub fn index(self) -> usize {
        match self {
            EdgeId::E1 => 0,
            EdgeId::E2 => 1,
            EdgeId::E3 => 2,
        }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.index() + 1)
    }
}

/// Composite Simpson weights on `n` uniform intervals of width `h`.
/// Odd `n` closes with a 3/8 panel; `n = 1` falls back to the trapezoid.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 1, "need at least one interval");
    let mut w = vec![0.0; n + 1];
    if n == 1 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    let (simpson_end, tail) = if n % 2 == 0 { (n, false) } else { (n - 3, true) };
    for i in (0..simpson_end).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if tail {
        let s = n - 3;
        for (j, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[s + j] += 3.0 * h / 8.0 * c;
        }
    }
    w
}

/// Gauss–Legendre nodes and weights mapped to [0, len], nodes ascending.
pub fn gauss_legendre(m: usize, len: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(m.max(2)).expect("degree >= 2");
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
        .into_iter()
        .map(|(x, w)| (0.5 * len * (x + 1.0), 0.5 * len * w))
        .unzip()
}

/// Complex samples of a function on one edge, on `n + 1` uniform nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction {
    edge: EdgeId,
    length: f64,
    samples: Vec<Complex64>,
    weights: Vec<f64>,
}

impl EdgeFunction {
    pub fn from_samples(edge: EdgeId, length: f64, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::GridMismatch("an edge grid needs at least 2 nodes".into()));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::domain("length", format!("must be positive, got {length}")));
        }
        let n = samples.len() - 1;
        let weights = simpson_weights(n, length / n as f64);
        Ok(EdgeFunction {
            edge,
            length,
            samples,
            weights,
        })
    }

    pub fn from_fn(edge: EdgeId, length: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        let h = length / n as f64;
        let samples = (0..=n).map(|i| f(i as f64 * h)).collect();
        Self::from_samples(edge, length, samples).expect("valid grid")
    }

    pub fn zeros(edge: EdgeId, length: f64, n: usize) -> Self {
        Self::from_fn(edge, length, n, |_| Complex64::new(0.0, 0.0))
    }

    pub fn edge(&self) -> EdgeId {
        self.edge
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.samples.len() - 1
    }
    pub fn h(&self) -> f64 {
        self.length / self.n() as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n()).map(|i| self.x(i)).collect()
    }
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn start(&self) -> Complex64 {
        self.samples[0]
    }
    pub fn end(&self) -> Complex64 {
        self.samples[self.n()]
    }

    pub fn same_grid(&self, other: &EdgeFunction) -> bool {
        self.samples.len() == other.samples.len()
            && (self.length - other.length).abs() <= 1e-14 * self.length.max(other.length)
    }

    fn check_grid(&self, other: &EdgeFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}: length {} with {} intervals vs length {} with {} intervals",
                self.edge,
                self.length,
                self.n(),
                other.length,
                other.n()
            )))
        }
    }

    /// Same grid, new values.
    pub fn map_samples(&self, f: impl Fn(f64, Complex64) -> Complex64) -> EdgeFunction {
        let h = self.h();
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &u)| f(i as f64 * h, u))
            .collect();
        EdgeFunction {
            samples,
            ..self.clone()
        }
    }

    /// ∫ u conj(v).
    pub fn inner(&self, other: &EdgeFunction) -> Result<Complex64> {
        self.check_grid(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .zip(&self.weights)
            .map(|((u, v), w)| u * v.conj() * *w)
            .sum())
    }

    /// ∫ g u for an explicit kernel g sampled on the same nodes.
    pub fn integrate_against(&self, g: impl Fn(f64) -> Complex64) -> Complex64 {
        let h = self.h();
        self.samples
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(i, (u, w))| g(i as f64 * h) * u * *w)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.samples
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| u.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn try_add(&self, other: &EdgeFunction, scale: Complex64) -> Result<EdgeFunction> {
        self.check_grid(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(u, v)| u + scale * v)
            .collect();
        Ok(EdgeFunction {
            samples,
            ..self.clone()
        })
    }

    pub fn scale(&self, s: Complex64) -> EdgeFunction {
        self.map_samples(|_, u| s * u)
    }
}

/// Element of L²(e1) ⊕ L²(e2) ⊕ L²(e3).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub edges: [EdgeFunction; 3],
}

impl StateVector {
    pub fn new(e1: EdgeFunction, e2: EdgeFunction, e3: EdgeFunction) -> Result<Self> {
        for (f, id) in [&e1, &e2, &e3].iter().zip(EdgeId::ALL) {
            if f.edge() != id {
                return Err(Error::GridMismatch(format!("expected {id}, got {}", f.edge())));
            }
        }
        Ok(StateVector { edges: [e1, e2, e3] })
    }

    pub fn from_fns(
        lengths: [f64; 3],
        n: usize,
        f: [&dyn Fn(f64) -> Complex64; 3],
    ) -> StateVector {
        let mk = |j: usize| EdgeFunction::from_fn(EdgeId::ALL[j], lengths[j], n, f[j]);
        StateVector {
            edges: [mk(0), mk(1), mk(2)],
        }
    }

    pub fn zeros(lengths: [f64; 3], n: usize) -> StateVector {
        let z = |_: f64| Complex64::new(0.0, 0.0);
        Self::from_fns(lengths, n, [&z, &z, &z])
    }

    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.edges[j].length())
    }

    pub fn edge(&self, id: EdgeId) -> &EdgeFunction {
        &self.edges[id.index()]
    }

    pub fn norm(&self) -> f64 {
        self.edges.iter().map(|e| e.norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn try_add(&self, other: &StateVector, scale: Complex64) -> Result<StateVector> {
        Ok(StateVector {
            edges: [
                self.edges[0].try_add(&other.edges[0], scale)?,
                self.edges[1].try_add(&other.edges[1], scale)?,
                self.edges[2].try_add(&other.edges[2], scale)?,
            ],
        })
    }

    pub fn scale(&self, s: Complex64) -> StateVector {
        StateVector {
            edges: [0, 1, 2].map(|j| self.edges[j].scale(s)),
        }
    }
}

/// Quadrature surrogate of the L² inner product, linear in `u`.
pub fn inner(u: &StateVector, v: &StateVector) -> Result<Complex64> {
    let mut s = Complex64::new(0.0, 0.0);
    for (a, b) in u.edges.iter().zip(&v.edges) {
        s += a.inner(b)?;
    }
    Ok(s)
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        self.try_add(rhs, Complex64::new(1.0, 0.0)).expect("matching grids")
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        self.try_add(rhs, Complex64::new(-1.0, 0.0)).expect("matching grids")
    }
}

impl Mul<Complex64> for &StateVector {
    type Output = StateVector;
    fn mul(self, s: Complex64) -> StateVector {
        self.scale(s)
    }
}
