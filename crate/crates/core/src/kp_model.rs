//! The δ′-type limit: the loop operator A′_hom(τ′), its unitary equivalence
//! with A_hom at τ = τ′ − π, the substitutions that carry it to the
//! whole-line Kronig–Penney form, and that form's transfer matrix.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{cis, CellParams};
use crate::error::{Error, Result};
use crate::grid::{gauss_legendre, EdgeFunction, EdgeId};
use crate::resolvent::HomState;
use crate::spectra::{bracket_roots, find_roots, hausdorff, non_bloch_eigenvalues, DispersionRelation, LimitModel, RelationKind};
use crate::triple::checked_sin;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Loop of length l2 with δ′ coupling of strength `coupling` and weight
/// e^{−i coupling τ′} on its right endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPrimeCell {
    pub coupling: f64,
    pub l2: f64,
    pub tau_prime: f64,
}

impl DeltaPrimeCell {
    pub fn new(c: &CellParams, tau_prime: f64) -> DeltaPrimeCell {
        DeltaPrimeCell {
            coupling: c.stiff_len(),
            l2: c.l2(),
            tau_prime: tau_prime.rem_euclid(TAU),
        }
    }

    pub fn weight(&self) -> Complex64 {
        cis(-self.coupling * self.tau_prime)
    }
}

/// −l2⁻² U″ = zU on ℝ with U(n+0) − U(n−0) = (coupling/l2) U′(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WholeLineKP {
    pub l2: f64,
    pub coupling: f64,
}

impl WholeLineKP {
    pub fn new(l2: f64, coupling: f64) -> Result<WholeLineKP> {
        if !(l2 > 0.0 && l2 <= 1.0) {
            return Err(Error::domain("l2", format!("{l2} is not in (0, 1]")));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::domain("coupling", format!("{coupling} must be finite and non-negative")));
        }
        Ok(WholeLineKP { l2, coupling })
    }

    pub fn from_cell(c: &CellParams) -> WholeLineKP {
        WholeLineKP {
            l2: c.l2(),
            coupling: c.stiff_len(),
        }
    }

    pub fn stiffness(&self) -> f64 {
        self.l2.powi(-2)
    }

    pub fn jump_coupling(&self) -> f64 {
        self.coupling / self.l2
    }
}

fn dp_relation(c: &CellParams, tau_prime: f64) -> DispersionRelation {
    DispersionRelation::new(RelationKind::DeltaprimeBloch, *c, tau_prime)
}

fn hom_relation(c: &CellParams, tau: f64) -> DispersionRelation {
    DispersionRelation::new(RelationKind::HomBloch, *c, tau)
}

fn check_root(rel: &DispersionRelation, k: f64) -> Result<()> {
    let r = rel.eval(Complex64::new(k, 0.0))?.norm();
    if r > 1e-8 {
        return Err(Error::NotARoot { k, residual: r });
    }
    Ok(())
}

/// v(x) = e^{−iτ′x}(cos k(l2 − x) + e^{iτ′} cos kx)/sin kl2 and its ∂ = d/dx + iτ′.
fn dp_closed_form(k: f64, tau_prime: f64, l2: f64, s: f64, x: f64) -> (Complex64, Complex64) {
    let ph = cis(-tau_prime * x);
    let e = cis(tau_prime);
    let v = ph * ((k * (l2 - x)).cos() + e * (k * x).cos()) / s;
    let dv = ph * k * ((k * (l2 - x)).sin() - e * (k * x).sin()) / s;
    (v, dv)
}

/// Bloch eigenfunction of A′_hom(τ′) at a root k of the δ′ relation.
pub fn dp_bloch_eigenfunction(k: f64, tau_prime: f64, c: &CellParams, n: usize) -> Result<EdgeFunction> {
    let rel = dp_relation(c, tau_prime);
    check_root(&rel, k)?;
    let l2 = c.l2();
    let s = checked_sin(Complex64::new(k * l2, 0.0), EdgeId::E2)?.re;
    Ok(EdgeFunction::from_fn(EdgeId::E2, l2, n, |x| dp_closed_form(k, tau_prime, l2, s, x).0))
}

/// Residuals of the two δ′ vertex conditions for the closed-form v at k.
pub fn dp_condition_residuals(k: f64, tau_prime: f64, c: &CellParams) -> Result<(f64, f64)> {
    let l2 = c.l2();
    let s = checked_sin(Complex64::new(k * l2, 0.0), EdgeId::E2)?.re;
    let cell = DeltaPrimeCell::new(c, tau_prime);
    let (v0, d0) = dp_closed_form(k, tau_prime, l2, s, 0.0);
    let (vl, dl) = dp_closed_form(k, tau_prime, l2, s, l2);
    let w = cell.weight();
    let r1 = (v0 + w * vl - cell.coupling * d0).norm();
    let r2 = (d0 + w * dl).norm();
    Ok((r1, r2))
}

/// Bloch eigenvector ū(k) = (u(1, e^{i(l1+l3)τ}; ·), √(l1+l3)) of A_hom at τ.
pub fn hom_bloch_eigenvector(k: f64, tau: f64, c: &CellParams, n: usize) -> Result<HomState> {
    let rel = hom_relation(c, tau);
    check_root(&rel, k)?;
    let l2 = c.l2();
    let s = checked_sin(Complex64::new(k * l2, 0.0), EdgeId::E2)?.re;
    let e = cis(tau);
    let u = EdgeFunction::from_fn(EdgeId::E2, l2, n, |x| cis(-tau * x) * ((k * (l2 - x)).sin() + e * (k * x).sin()) / s);
    Ok(HomState {
        u,
        beta: Complex64::new(c.stiff_len().sqrt(), 0.0),
    })
}

/// ‖ū(k)‖² = (l1+l3)/2 + l2(1 − cos τ cos kl2)/sin² kl2.
pub fn hom_norm_formula(k: f64, tau: f64, c: &CellParams) -> f64 {
    let s = (k * c.l2()).sin();
    c.stiff_len() / 2.0 + c.l2() * (1.0 - tau.cos() * (k * c.l2()).cos()) / (s * s)
}

/// ‖v(·; k)‖² = (l1+l3)/2 + l2(1 + cos τ′ cos kl2)/sin² kl2.
pub fn dp_norm_formula(k: f64, tau_prime: f64, c: &CellParams) -> f64 {
    dp_norm_formula_with(k, tau_prime, c.stiff_len(), c.l2())
}

pub fn dp_norm_formula_with(k: f64, tau_prime: f64, coupling: f64, l2: f64) -> f64 {
    let s = (k * l2).sin();
    coupling / 2.0 + l2 * (1.0 + tau_prime.cos() * (k * l2).cos()) / (s * s)
}

const NORM_NODES: usize = 128;

/// ∫|f|² over [0, len] with Gauss–Legendre nodes.
fn gauss_norm_sq(len: f64, f: impl Fn(f64) -> Complex64) -> f64 {
    let (x, w) = gauss_legendre(NORM_NODES, len);
    x.iter().zip(&w).map(|(&x, &w)| w * f(x).norm_sqr()).sum()
}

/// ‖ū(k)‖² by quadrature of the closed form.
pub fn hom_norm_quadrature(k: f64, tau: f64, c: &CellParams) -> f64 {
    let (l2, s, e) = (c.l2(), (k * c.l2()).sin(), cis(tau));
    gauss_norm_sq(l2, |x| cis(-tau * x) * ((k * (l2 - x)).sin() + e * (k * x).sin()) / s) + c.stiff_len()
}

/// ‖v(·; k)‖² by quadrature of the closed form.
pub fn dp_norm_quadrature(k: f64, tau_prime: f64, c: &CellParams) -> f64 {
    let (l2, s) = (c.l2(), (k * c.l2()).sin());
    gauss_norm_sq(l2, |x| dp_closed_form(k, tau_prime, l2, s, x).0)
}

/// Largest deviation between the first component of ū(k) with cos ↔ sin,
/// sin ↦ −cos swapped and e^{iπx} v(x; k) at τ′ = τ + π.
pub fn swap_residual(k: f64, tau: f64, c: &CellParams) -> f64 {
    let (l2, s) = (c.l2(), (k * c.l2()).sin());
    let cc = c.stiff_len();
    let bracket_u = Complex64::new(-k * cc / 2.0, tau.sin() / s);
    let bracket_v = Complex64::new(k * cc / 2.0, -tau.sin() / s);
    // e^{−iτ′x} is not 2π-periodic in τ′ on [0, l2], so τ′ = τ + π unreduced
    let tp = tau + PI;
    (0..=64)
        .map(|i| {
            let x = l2 * i as f64 / 64.0;
            // swapped first component: cos ↦ sin, sin ↦ −cos
            let swapped = cis(-tau * x) * ((k * x).sin() - bracket_u * (k * x).cos());
            let vform = cis(-PI * x) * cis(-tau * x) * ((k * x).sin() + bracket_v * (k * x).cos());
            let direct = dp_closed_form(k, tp, l2, s, x).0;
            (swapped * cis(-PI * x) - vform).norm().max((vform - direct).norm())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub tau: f64,
    pub tau_prime: f64,
    pub hom_roots: Vec<f64>,
    pub dp_roots: Vec<f64>,
    pub bloch_distance: f64,
    pub hom_non_bloch: Vec<f64>,
    pub dp_non_bloch: Vec<f64>,
    pub non_bloch_distance: f64,
    /// Per shared root: max of |hom formula − δ′ formula| and each formula
    /// against quadrature, relative to the norm.
    pub norm_residuals: Vec<f64>,
    pub max_swap_residual: f64,
    pub pass: bool,
}

/// Compare A_hom at τ with A′_hom at τ + π on a k-window.
pub fn unitary_equivalence_check(tau: f64, c: &CellParams, window: (f64, f64)) -> Result<EquivalenceReport> {
    unitary_equivalence_check_scaled(tau, c, window, 1.0)
}

/// As [`unitary_equivalence_check`] with the δ′ coupling multiplied by `scale`.
pub fn unitary_equivalence_check_scaled(
    tau: f64,
    c: &CellParams,
    window: (f64, f64),
    scale: f64,
) -> Result<EquivalenceReport> {
    let tau = tau.rem_euclid(TAU);
    let tau_prime = (tau + PI).rem_euclid(TAU);
    let dp_coupling = c.stiff_len() * scale;
    let hom_roots = find_roots(&hom_relation(c, tau), window)?;
    let dp_roots = find_roots(&dp_relation(c, tau_prime).with_coupling(dp_coupling)?, window)?;
    let bloch_distance = hausdorff(&hom_roots, &dp_roots);
    let hom_non_bloch = non_bloch_eigenvalues(LimitModel::Hom, tau, c, window);
    let dp_non_bloch = non_bloch_eigenvalues(LimitModel::Deltaprime, tau_prime, c, window);
    let non_bloch_distance = hausdorff(&hom_non_bloch, &dp_non_bloch);
    let mut norm_residuals = Vec::new();
    let mut max_swap_residual: f64 = 0.0;
    if hom_roots.len() == dp_roots.len() {
        for (&k, &kd) in hom_roots.iter().zip(&dp_roots) {
            let h = hom_norm_formula(k, tau, c);
            let d = dp_norm_formula_with(kd, tau_prime, dp_coupling, c.l2());
            let hq = hom_norm_quadrature(k, tau, c);
            let dq = dp_norm_quadrature(kd, tau_prime, c);
            let r = [(h - d).abs(), (h - hq).abs(), (d - dq).abs()]
                .into_iter()
                .fold(0.0, f64::max)
                / h.abs().max(1.0);
            norm_residuals.push(r);
            max_swap_residual = max_swap_residual.max(swap_residual(k, tau, c));
        }
    }
    let max_norm = norm_residuals.iter().cloned().fold(0.0, f64::max);
    let pass = hom_roots.len() == dp_roots.len()
        && bloch_distance < 1e-8
        && hom_non_bloch.len() == dp_non_bloch.len()
        && non_bloch_distance < 1e-8
        && max_norm < 1e-10
        && max_swap_residual < 1e-10;
    Ok(EquivalenceReport {
        tau,
        tau_prime,
        hom_roots,
        dp_roots,
        bloch_distance,
        hom_non_bloch,
        dp_non_bloch,
        non_bloch_distance,
        norm_residuals,
        max_swap_residual,
        pass,
    })
}

/// ũ(y) = e^{i l2 y τ′} u(l2 y) followed by v(y) = e^{−iτ̃y} ũ(y), τ̃ = τ′ + π.
pub fn to_kp_form(u: &EdgeFunction, tau_prime: f64, c: &CellParams) -> Result<EdgeFunction> {
    if (u.length() - c.l2()).abs() > 1e-12 * c.l2() {
        return Err(Error::GridMismatch(format!("expected a function on [0, {}], got length {}", c.l2(), u.length())));
    }
    let tt = (tau_prime + PI).rem_euclid(TAU);
    let l2 = c.l2();
    let n = u.n();
    let s = u
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let y = i as f64 / n as f64;
            cis(l2 * y * tau_prime - tt * y) * v
        })
        .collect();
    EdgeFunction::from_samples(EdgeId::E2, 1.0, s)
}

/// Inverse of [`to_kp_form`].
pub fn from_kp_form(v: &EdgeFunction, tau_prime: f64, c: &CellParams) -> Result<EdgeFunction> {
    if (v.length() - 1.0).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!("expected a function on [0, 1], got length {}", v.length())));
    }
    let tt = (tau_prime + PI).rem_euclid(TAU);
    let l2 = c.l2();
    let n = v.n();
    let s = v
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let y = i as f64 / n as f64;
            cis(tt * y - l2 * y * tau_prime) * w
        })
        .collect();
    EdgeFunction::from_samples(EdgeId::E2, l2, s)
}

pub fn substitution_roundtrip(u: &EdgeFunction, tau_prime: f64, c: &CellParams) -> Result<EdgeFunction> {
    from_kp_form(&to_kp_form(u, tau_prime, c)?, tau_prime, c)
}

/// One-sided fourth-order derivative at either end of a sampled function.
fn end_derivatives(f: &EdgeFunction) -> Result<(Complex64, Complex64)> {
    let s = f.samples();
    let n = f.n();
    if n < 4 {
        return Err(Error::GridMismatch("need at least 4 intervals".into()));
    }
    let h = f.h();
    let c = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
    let d0: Complex64 = (0..5).map(|j| s[j] * c[j]).sum::<Complex64>() / h;
    let dn: Complex64 = -(0..5).map(|j| s[n - j] * c[j]).sum::<Complex64>() / h;
    Ok((d0, dn))
}

/// Residuals of the two conditions on [0, 1]:
/// v(1) − v(0) = −(coupling/l2)(d/dy + iτ̃)v(0) and (d/dy + iτ̃)v(1) = (d/dy + iτ̃)v(0).
pub fn kp_condition_residuals(v: &EdgeFunction, tau_tilde: f64, kp: &WholeLineKP) -> Result<(f64, f64)> {
    let (d0, d1) = end_derivatives(v)?;
    let p0 = d0 + I * tau_tilde * v.start();
    let p1 = d1 + I * tau_tilde * v.end();
    Ok(((v.end() - v.start() + kp.jump_coupling() * p0).norm(), (p1 - p0).norm()))
}

/// Transfer matrix over one period acting on (U, U′), jump applied after
/// free propagation: T = J R.
pub fn transfer_matrix(z: f64, kp: &WholeLineKP) -> Matrix2<f64> {
    let kappa = Complex64::new(z, 0.0).sqrt() * kp.l2;
    let cos = kappa.cos().re;
    // sin κ/κ and κ sin κ are even in κ, hence real for z < 0 too
    let sinc = if kappa.norm() < 1e-8 { 1.0 } else { (kappa.sin() / kappa).re };
    let ksin = (kappa * kappa.sin()).re;
    let r = Matrix2::new(cos, sinc, -ksin, cos);
    let j = Matrix2::new(1.0, kp.jump_coupling(), 0.0, 1.0);
    j * r
}

/// Bloch phase θ(z) = arccos(tr T/2) inside bands.
pub fn bloch_phase(z: f64, kp: &WholeLineKP) -> Option<f64> {
    let h = transfer_matrix(z, kp).trace() / 2.0;
    if h.abs() <= 1.0 {
        Some(h.acos())
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholeLineBands {
    pub z_window: (f64, f64),
    /// Closed z-intervals where |tr T| ≤ 2, clipped to the window.
    pub bands: Vec<(f64, f64)>,
    pub gaps: Vec<(f64, f64)>,
}

const BAND_SCAN: usize = 20_000;

/// Bands {z : |tr T(z)| ≤ 2} in a z-window with z ≥ 0, scanning in k = √z.
/// Band edges are zeros of (tr T/2)² − 1, refined by bisection; touching
/// bands are merged.
pub fn wholeline_band_function(kp: &WholeLineKP, z_window: (f64, f64)) -> Result<WholeLineBands> {
    let (zlo, zhi) = z_window;
    if !(zlo < zhi && zhi > 0.0) {
        return Err(Error::domain("z_window", format!("({zlo}, {zhi}) is empty")));
    }
    let g = |k: f64| -> Result<f64> {
        let h = transfer_matrix(k * k, kp).trace() / 2.0;
        Ok(h * h - 1.0)
    };
    let (klo, khi) = (zlo.max(0.0).sqrt(), zhi.sqrt());
    let scan = BAND_SCAN * ((khi - klo) * kp.l2).ceil().max(1.0) as usize;
    let edges = bracket_roots(&g, (klo, khi), scan)?;
    let mut pts = vec![klo];
    pts.extend(edges);
    pts.push(khi);
    let mut bands: Vec<(f64, f64)> = Vec::new();
    for w in pts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        if g(0.5 * (w[0] + w[1]))? <= 0.0 {
            match bands.last_mut() {
                Some(last) if (last.1 - w[0]).abs() < 1e-12 => last.1 = w[1],
                _ => bands.push((w[0], w[1])),
            }
        }
    }
    let bands: Vec<(f64, f64)> = bands.into_iter().map(|(a, b)| (a * a, b * b)).collect();
    let gaps = bands.windows(2).map(|w| (w[0].1, w[1].0)).collect();
    Ok(WholeLineBands {
        z_window: (zlo.max(0.0), zhi),
        bands,
        gaps,
    })
}

/// Characteristic function of the fibre problem on [0, 1] at τ̃: the two
/// conditions applied to v = e^{−iτ̃y}(A cos κy + B sin κy/κ), κ = l2 k,
/// give a 2×2 system whose determinant times e^{iτ̃} is real.
pub fn kp_fibre_characteristic(k: f64, tau_tilde: f64, kp: &WholeLineKP) -> f64 {
    let kappa = kp.l2 * k;
    let (cs, sn) = (kappa.cos(), kappa.sin());
    let sinc = if kappa.abs() < 1e-8 { 1.0 } else { sn / kappa };
    let e = cis(-tau_tilde);
    let g = kp.jump_coupling();
    // w(y) = A cos κy + B sin κy/κ; w′(0) = B
    let m = Matrix2::new(e * cs - 1.0, e * sinc + g, -e * kappa * sn, e * cs - 1.0);
    (m.determinant() * cis(tau_tilde)).re
}

/// Union over τ̃ of the fibre spectra from `samples` values of τ̃ in [0, 2π),
/// as z-intervals in the window. Interior samples fix each band's extent;
/// roots at τ̃ ∈ {0, π} (and z = 0) extend the nearest band.
pub fn tau_sweep_bands(kp: &WholeLineKP, z_window: (f64, f64), samples: usize) -> Result<Vec<(f64, f64)>> {
    let (zlo, zhi) = z_window;
    let k_ext = 1.5 * zhi.sqrt();
    let window = (0.0, k_ext);
    let scan = 4096 * (k_ext * kp.l2).ceil().max(1.0) as usize;
    let taus: Vec<f64> = (0..samples).map(|j| TAU * j as f64 / samples as f64).collect();
    let roots: Vec<(f64, Vec<f64>)> = taus
        .par_iter()
        .map(|&t| Ok((t, bracket_roots(&|k| Ok(kp_fibre_characteristic(k, t, kp)), window, scan)?)))
        .collect::<Result<_>>()?;
    let is_edge = |t: f64| t.abs() < 1e-12 || (t - PI).abs() < 1e-12;
    let mut bands: Vec<(f64, f64)> = Vec::new();
    for (t, rs) in &roots {
        if is_edge(*t) || *t > PI {
            continue;
        }
        for (b, &k) in rs.iter().enumerate() {
            if b == bands.len() {
                bands.push((k, k));
            } else {
                bands[b].0 = bands[b].0.min(k);
                bands[b].1 = bands[b].1.max(k);
            }
        }
    }
    let mut edge_roots: Vec<f64> = vec![0.0];
    for (t, rs) in &roots {
        if is_edge(*t) {
            edge_roots.extend(rs);
        }
    }
    for k in edge_roots {
        let dist = |b: &(f64, f64)| if k < b.0 { b.0 - k } else if k > b.1 { k - b.1 } else { 0.0 };
        if let Some(b) = bands.iter_mut().min_by(|x, y| dist(x).total_cmp(&dist(y))) {
            b.0 = b.0.min(k);
            b.1 = b.1.max(k);
        }
    }
    bands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in bands.into_iter().map(|(a, b)| (a * a, b * b)) {
        let (a, b) = (a.max(zlo), b.min(zhi));
        if a > b {
            continue;
        }
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1e-9 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    Ok(merged)
}

/// Hausdorff distance between two finite unions of closed intervals.
pub fn interval_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn dist(x: f64, s: &[(f64, f64)]) -> f64 {
        s.iter()
            .map(|&(lo, hi)| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }
    fn one_sided(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
        let mut cands: Vec<f64> = a.iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
        // the farthest point of an interval of a may sit mid-gap of b
        for w in b.windows(2) {
            let m = 0.5 * (w[0].1 + w[1].0);
            if a.iter().any(|&(lo, hi)| m >= lo && m <= hi) {
                cands.push(m);
            }
        }
        cands.into_iter().map(|x| dist(x, b)).fold(0.0, f64::max)
    }
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    one_sided(a, b).max(one_sided(b, a))
}
