//! Truncated Gelfand transform on ℝ, the soft-edge dilation Φ_ε and the
//! identification Ψ^(t) of the effective space with L²(e2) ⊕ ℂ.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{cis, CellParams, Quasimomentum};
use crate::error::{Error, Result};
use crate::grid::{EdgeFunction, EdgeId, StateVector};
use crate::resolvent::{HomState, StiffProfile};

/// Samples of a function on ℝ at x = ε(first_cell + j/n_per_cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFunction {
    pub eps: f64,
    pub n_per_cell: usize,
    pub first_cell: i64,
    pub values: Vec<Complex64>,
}

impl LineFunction {
    pub fn from_fn(eps: f64, n_per_cell: usize, cells: std::ops::Range<i64>, f: impl Fn(f64) -> Complex64) -> LineFunction {
        let count = (cells.end - cells.start).max(0) as usize * n_per_cell;
        let values = (0..count)
            .map(|j| f(eps * (cells.start as f64 + j as f64 / n_per_cell as f64)))
            .collect();
        LineFunction {
            eps,
            n_per_cell,
            first_cell: cells.start,
            values,
        }
    }

    pub fn cells(&self) -> usize {
        self.values.len() / self.n_per_cell
    }

    pub fn x(&self, j: usize) -> f64 {
        self.eps * (self.first_cell as f64 + j as f64 / self.n_per_cell as f64)
    }

    /// Rectangle-rule L² norm.
    pub fn norm(&self) -> f64 {
        let h = self.eps / self.n_per_cell as f64;
        (h * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Value at cell n, node i, zero outside the stored range.
    fn at(&self, n: i64, i: usize) -> Complex64 {
        let c = n - self.first_cell;
        if c < 0 || c as usize >= self.cells() {
            return Complex64::new(0.0, 0.0);
        }
        self.values[c as usize * self.n_per_cell + i]
    }
}

/// Û(y, ϰ) on a grid of Q × Q′, rows indexed by y, scaled by ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GelfandSample {
    pub eps: f64,
    /// Truncation: cells −N..=N.
    pub truncation: i64,
    pub n_per_cell: usize,
    pub n_kappa: usize,
    pub values: Vec<Complex64>,
}

impl GelfandSample {
    pub fn get(&self, i: usize, m: usize) -> Complex64 {
        self.values[i * self.n_kappa + m]
    }

    /// L² norm over [0, ε) × [0, 2π/ε) with rectangle rules.
    pub fn norm(&self) -> f64 {
        let dx = self.eps / self.n_per_cell as f64;
        let dt = TAU / (self.eps * self.n_kappa as f64);
        (dx * dt * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Largest supported truncation N.
pub const MAX_TRUNCATION: i64 = 64;

fn check_support(u: &LineFunction, n: i64) -> Result<()> {
    for (j, v) in u.values.iter().enumerate() {
        let cell = u.first_cell + (j / u.n_per_cell) as i64;
        if *v != Complex64::new(0.0, 0.0) && (cell < -n || cell > n) {
            return Err(Error::SupportExceedsWindow);
        }
    }
    Ok(())
}

/// Û(y, ϰ) = (2π)^{−1/2} Σ_{|n| ≤ N} U(y + n) e^{−iϰ(y + n)}.
pub fn gelfand(u: &LineFunction, n: i64, n_kappa: usize) -> Result<GelfandSample> {
    if u.eps != 1.0 {
        return Err(Error::domain("eps", "use gelfand_scaled for ε ≠ 1"));
    }
    gelfand_scaled(u, n, n_kappa)
}

/// û(x, t) = (ε/2π)^{1/2} Σ_{|n| ≤ N} u(x + εn) e^{−it(x + εn)} on
/// x ∈ [0, ε), t ∈ [0, 2π/ε).
pub fn gelfand_scaled(u: &LineFunction, n: i64, n_kappa: usize) -> Result<GelfandSample> {
    if !(0..=MAX_TRUNCATION).contains(&n) || n_kappa == 0 {
        return Err(Error::domain("truncation", format!("need 0 ≤ N ≤ {MAX_TRUNCATION} and at least one ϰ sample")));
    }
    check_support(u, n)?;
    let eps = u.eps;
    let pre = (eps / TAU).sqrt();
    let rows: Vec<Vec<Complex64>> = (0..u.n_per_cell)
        .into_par_iter()
        .map(|i| {
            let x = eps * i as f64 / u.n_per_cell as f64;
            (0..n_kappa)
                .map(|m| {
                    let t = TAU * m as f64 / (eps * n_kappa as f64);
                    let s: Complex64 = (-n..=n).map(|c| u.at(c, i) * cis(-t * (x + eps * c as f64))).sum();
                    pre * s
                })
                .collect()
        })
        .collect();
    Ok(GelfandSample {
        eps,
        truncation: n,
        n_per_cell: u.n_per_cell,
        n_kappa,
        values: rows.into_iter().flatten().collect(),
    })
}

/// u(x + εn) = (ε/2π)^{1/2} ∫ û(x, t) e^{it(x + εn)} dt, cells −N..=N.
pub fn inverse_gelfand(g: &GelfandSample) -> LineFunction {
    let (eps, n) = (g.eps, g.truncation);
    let pre = (eps / TAU).sqrt();
    let dt = TAU / (eps * g.n_kappa as f64);
    let cells: Vec<i64> = (-n..=n).collect();
    let values: Vec<Complex64> = cells
        .par_iter()
        .flat_map_iter(|&c| {
            (0..g.n_per_cell).map(move |i| {
                let x = eps * i as f64 / g.n_per_cell as f64;
                let s: Complex64 = (0..g.n_kappa)
                    .map(|m| {
                        let t = TAU * m as f64 / (eps * g.n_kappa as f64);
                        g.get(i, m) * cis(t * (x + eps * c as f64))
                    })
                    .sum();
                pre * dt * s
            })
        })
        .collect();
    LineFunction {
        eps,
        n_per_cell: g.n_per_cell,
        first_cell: -n,
        values,
    }
}

/// Φ_ε: identity on e1, e3 and (F_ε u)(x) = √ε u(εx) on e2.
pub fn phi_eps(u: &StateVector, c: &CellParams) -> Result<StateVector> {
    let e2 = &u.edges[1];
    let want = c.eps() * c.l2();
    if (e2.length() - want).abs() > 1e-12 * want {
        return Err(Error::GridMismatch(format!("soft edge length {} != εl2 = {want}", e2.length())));
    }
    let s = c.eps().sqrt();
    let f = EdgeFunction::from_samples(EdgeId::E2, c.l2(), e2.samples().iter().map(|v| v * s).collect())?;
    StateVector::new(u.edges[0].clone(), f, u.edges[2].clone())
}

pub fn phi_eps_inverse(u: &StateVector, c: &CellParams) -> Result<StateVector> {
    let e2 = &u.edges[1];
    if (e2.length() - c.l2()).abs() > 1e-12 * c.l2() {
        return Err(Error::GridMismatch(format!("soft edge length {} != l2 = {}", e2.length(), c.l2())));
    }
    let s = c.eps().sqrt().recip();
    let f = EdgeFunction::from_samples(EdgeId::E2, c.eps() * c.l2(), e2.samples().iter().map(|v| v * s).collect())?;
    StateVector::new(u.edges[0].clone(), f, u.edges[2].clone())
}

/// Remainder (relative to ‖u‖) above which Ψ^(t) refuses the input.
const EFFECTIVE_REJECT: f64 = 1e-6;
/// Remainder above which the input is projected with a warning.
const EFFECTIVE_WARN: f64 = 1e-8;

/// Ψ^(t): βψ ⊕ u2 ↦ (u2, β).
pub fn psi_t(u: &StateVector, q: &Quasimomentum, c: &CellParams) -> Result<HomState> {
    let prof = StiffProfile::new(q, c, u.edges[0].n())?;
    if !prof.psi[0].same_grid(&u.edges[0]) || !prof.psi[1].same_grid(&u.edges[2]) {
        return Err(Error::GridMismatch("stiff edges do not match the rescaled cell".into()));
    }
    let beta = prof.coefficient(u)?;
    let r1 = u.edges[0].try_add(&prof.psi[0], -beta)?;
    let r3 = u.edges[2].try_add(&prof.psi[1], -beta)?;
    let rem = (r1.norm().powi(2) + r3.norm().powi(2)).sqrt();
    let scale = u.norm().max(f64::MIN_POSITIVE);
    if rem > EFFECTIVE_REJECT * scale {
        return Err(Error::NotInEffectiveSpace(rem / scale));
    }
    if rem > EFFECTIVE_WARN * scale {
        log::warn!("projecting onto the effective space, stiff remainder {:.2e}", rem / scale);
    }
    Ok(HomState {
        u: u.edges[1].clone(),
        beta,
    })
}

/// (Ψ^(t))*: (u2, β) ↦ βψ ⊕ u2 with `n_stiff` intervals on each stiff edge.
pub fn psi_t_adjoint(h: &HomState, q: &Quasimomentum, c: &CellParams, n_stiff: usize) -> Result<StateVector> {
    let prof = StiffProfile::new(q, c, n_stiff)?;
    StateVector::new(prof.psi[0].scale(h.beta), h.u.clone(), prof.psi[1].scale(h.beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::make_cell;

    fn bump(x: f64) -> Complex64 {
        // smooth, supported in (−1.5, 2.5)
        let y = (x - 0.5) / 2.0;
        if y.abs() >= 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((-1.0 / (1.0 - y * y)).exp(), 0.3 * x * (-1.0 / (1.0 - y * y)).exp())
        }
    }

    #[test]
    fn single_cell_is_a_phase() {
        let u = LineFunction::from_fn(1.0, 16, 0..1, |x| Complex64::new(1.0 + x, 0.0));
        let g = gelfand(&u, 2, 8).unwrap();
        for i in 0..16 {
            for m in 0..8 {
                let (y, k) = (i as f64 / 16.0, TAU * m as f64 / 8.0);
                let want = u.values[i] * cis(-k * y) / TAU.sqrt();
                assert!((g.get(i, m) - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn plancherel_and_roundtrip() {
        let u = LineFunction::from_fn(1.0, 64, -2..3, bump);
        let g = gelfand(&u, 2, 16).unwrap();
        assert!((g.norm() - u.norm()).abs() < 1e-12);
        let back = inverse_gelfand(&g);
        let err: f64 = back.values.iter().zip(&u.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(gelfand(&u, 1, 16).is_err());
    }

    #[test]
    fn scaled_at_one_matches() {
        let u = LineFunction::from_fn(1.0, 8, -1..2, bump);
        assert_eq!(gelfand(&u, 1, 8).unwrap(), gelfand_scaled(&u, 1, 8).unwrap());
        let z = GelfandSample {
            eps: 1.0,
            truncation: 1,
            n_per_cell: 4,
            n_kappa: 4,
            values: vec![Complex64::new(0.0, 0.0); 16],
        };
        assert!(inverse_gelfand(&z).norm() == 0.0);
    }

    #[test]
    fn phi_eps_is_unitary() {
        let c = make_cell(1.0, 1.0, 0.25, 0.5, 0.125).unwrap();
        let lens = [0.125 * 0.25, 0.125 * 0.5, 0.125 * 0.25];
        let u = StateVector::from_fns(lens, 64, [&|x: f64| Complex64::new(x, 1.0), &|x: f64| Complex64::new(x.cos(), x), &|_| Complex64::new(2.0, 0.0)]);
        let p = phi_eps(&u, &c).unwrap();
        assert!((p.norm() - u.norm()).abs() < 1e-12 * u.norm());
        let back = phi_eps_inverse(&p, &c).unwrap();
        assert!((&back - &u).norm() < 1e-12);
        assert!(phi_eps(&p, &c).is_err());
    }

    #[test]
    fn psi_identification() {
        let c = make_cell(1.0, 1.0, 0.25, 0.5, 0.125).unwrap();
        let q = Quasimomentum::from_tau(2.0, 0.125);
        let prof = StiffProfile::new(&q, &c, 64).unwrap();
        let u = StateVector::new(prof.psi[0].clone(), EdgeFunction::zeros(EdgeId::E2, 0.5, 64), prof.psi[1].clone()).unwrap();
        let h = psi_t(&u, &q, &c).unwrap();
        assert!((h.beta - 1.0).norm() < 1e-12 && h.u.norm() == 0.0);
        let w = StateVector::new(prof.psi[0].clone(), EdgeFunction::zeros(EdgeId::E2, 0.5, 64), prof.psi[1].scale(Complex64::new(-1.0, 0.0))).unwrap();
        assert!(matches!(psi_t(&w, &q, &c), Err(Error::NotInEffectiveSpace(_))));
    }
}
