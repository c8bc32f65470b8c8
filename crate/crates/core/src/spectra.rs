//! Dispersion relations, real root isolation, band structures and the set
//! S^(t) that spectral parameters of the convergence sweeps must avoid.
//!
//! Root-finding never works on a relation with poles directly. Each relation
//! has a regularised real form, entire in k, with the same zeros away from
//! the poles:
//!
//! | kind | regularised form |
//! |---|---|
//! | limit | 2cos τ + k c sin kl2 − 2cos kl2 |
//! | hom Bloch | −sin kl2 · relation (equals the limit form) |
//! | δ′ Bloch | −sin kl2 · relation |
//! | fibre det | ε l1 l3 /(a1 a3 k) · sin kl2 · det M1 |
//! | z-dependent | −sin kľ1 sin kľ2 · det(M̌ − B̌) / k² |
//!
//! with c = l1 + l3. Values at removable points (sin = 0) come from symmetric
//! extrapolation. Zeros of the Bloch forms at sin kl2 = 0 are non-Bloch and
//! are dropped from the Bloch lists.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{cis, CellParams, Quasimomentum, SpectralPoint};
use crate::error::{Error, Result};
use crate::grid::EdgeId;
use crate::mmatrix::m1;
use crate::triple::checked_sin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    #[serde(rename = "limit_CC")]
    LimitCc,
    #[serde(rename = "fibre_detM1")]
    FibreDetM1,
    HomBloch,
    DeltaprimeBloch,
    ZdepCheck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRelation {
    pub kind: RelationKind,
    pub cell: CellParams,
    /// τ, or τ′ for the δ′ relation.
    pub tau: f64,
    /// ľ1 / l2 for the z-dependent check.
    pub split: f64,
    /// Strength l1 + l3 of the stiff coupling; ignored by the fibre determinant.
    pub coupling: f64,
}

/// Scan density per unit of (window length × max |k|) beyond the base count.
const SCAN_BASE: usize = 4096;
const SCAN_UNIT: f64 = 100.0;
/// Distance from a removable point below which extrapolation is used.
const NEAR_POLE: f64 = 1e-5;
const EXTRAP_STEP: f64 = 2e-3;

impl DispersionRelation {
    pub fn new(kind: RelationKind, cell: CellParams, tau: f64) -> DispersionRelation {
        DispersionRelation {
            kind,
            cell,
            tau,
            split: 0.5,
            coupling: cell.stiff_len(),
        }
    }

    /// Replace the coupling l1 + l3 by another value.
    pub fn with_coupling(mut self, coupling: f64) -> Result<DispersionRelation> {
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::domain("coupling", format!("{coupling} is not a finite non-negative number")));
        }
        self.coupling = coupling;
        Ok(self)
    }

    pub fn with_split(mut self, split: f64) -> Result<DispersionRelation> {
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::domain("split", format!("{split} is not in (0, 1)")));
        }
        self.split = split;
        Ok(self)
    }

    fn stiff(&self) -> f64 {
        self.coupling
    }

    /// The relation itself, with poles reported as errors.
    pub fn eval(&self, k: Complex64) -> Result<Complex64> {
        let c = &self.cell;
        let (l2, tau) = (c.l2(), self.tau);
        match self.kind {
            RelationKind::LimitCc => Ok(2.0 * tau.cos() + k * self.stiff() * (k * l2).sin() - 2.0 * (k * l2).cos()),
            RelationKind::HomBloch => {
                let s = checked_sin(k * l2, EdgeId::E2)?;
                Ok(2.0 * (k * l2).cos() / s - 2.0 * tau.cos() / s - k * self.stiff())
            }
            RelationKind::DeltaprimeBloch => {
                let s = checked_sin(k * l2, EdgeId::E2)?;
                Ok(2.0 * (k * l2).cos() / s + 2.0 * tau.cos() / s - k * self.stiff())
            }
            RelationKind::FibreDetM1 => {
                let q = Quasimomentum::from_tau(tau, c.eps());
                Ok(m1(&SpectralPoint::from_k(k), &q, c)?.determinant())
            }
            RelationKind::ZdepCheck => Ok(self.zdep_matrix(k)?.determinant()),
        }
    }

    /// M̌ − B̌ on the two-edge cycle of lengths ľ1 + ľ2 = l2, τ̌ = τ/l2.
    pub fn zdep_matrix(&self, k: Complex64) -> Result<Matrix2<Complex64>> {
        let c = &self.cell;
        let (la, lb) = (self.split * c.l2(), (1.0 - self.split) * c.l2());
        let tc = self.tau / c.l2();
        let sa = checked_sin(k * la, EdgeId::E1)?;
        let sb = checked_sin(k * lb, EdgeId::E2)?;
        let d = -(k * la).cos() / sa - (k * lb).cos() / sb;
        let o12 = cis(tc * la) / sa + cis(-tc * lb) / sb;
        let o21 = cis(-tc * la) / sa + cis(tc * lb) / sb;
        let z = k * k;
        Ok(Matrix2::new(k * d + self.stiff() * z, k * o12, k * o21, k * d))
    }

    fn removable_points_near(&self, k: f64) -> bool {
        let c = &self.cell;
        let near = |len: f64| (k * len).sin().abs() < NEAR_POLE;
        match self.kind {
            RelationKind::LimitCc | RelationKind::HomBloch | RelationKind::DeltaprimeBloch => false,
            RelationKind::FibreDetM1 => near(c.l2()) || k.abs() < NEAR_POLE,
            RelationKind::ZdepCheck => {
                near(self.split * c.l2()) || near((1.0 - self.split) * c.l2()) || k.abs() < NEAR_POLE
            }
        }
    }

    fn regularised_direct(&self, k: f64) -> Result<f64> {
        let c = &self.cell;
        let l2 = c.l2();
        let kc = Complex64::new(k, 0.0);
        let cc = |cos_tau: f64| 2.0 * cos_tau + k * self.stiff() * (k * l2).sin() - 2.0 * (k * l2).cos();
        Ok(match self.kind {
            RelationKind::LimitCc | RelationKind::HomBloch => cc(self.tau.cos()),
            RelationKind::DeltaprimeBloch => cc(-self.tau.cos()),
            RelationKind::FibreDetM1 => {
                let det = self.eval(kc)?;
                let scale = c.eps() * c.l1() * c.l3() / (c.a1() * c.a3() * k);
                (det * (scale * (k * l2).sin())).re
            }
            RelationKind::ZdepCheck => {
                let (la, lb) = (self.split * l2, (1.0 - self.split) * l2);
                let det = self.eval(kc)?;
                (-det * ((k * la).sin() * (k * lb).sin() / (k * k))).re
            }
        })
    }

    /// Real, pole-free form used for root isolation (table in the module doc).
    pub fn regularised(&self, k: f64) -> Result<f64> {
        if !self.removable_points_near(k) {
            return self.regularised_direct(k);
        }
        // even extrapolation from k ± jδ, j = 1, 2, 3; error O(δ⁶)
        let d = EXTRAP_STEP;
        let g = |j: f64| -> Result<f64> {
            Ok(0.5 * (self.regularised_direct(k - j * d)? + self.regularised_direct(k + j * d)?))
        };
        Ok(1.5 * g(1.0)? - 0.6 * g(2.0)? + 0.1 * g(3.0)?)
    }

    fn bloch_filtered(&self) -> bool {
        matches!(self.kind, RelationKind::HomBloch | RelationKind::DeltaprimeBloch)
    }
}

/// Value of the relation at k; poles are errors.
pub fn eval_relation(rel: &DispersionRelation, k: Complex64) -> Result<Complex64> {
    rel.eval(k)
}

fn check_window(window: (f64, f64)) -> Result<()> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && hi > 0.0) {
        return Err(Error::domain("k_window", format!("({lo}, {hi}] is not a nonempty window in k > 0")));
    }
    Ok(())
}

fn bisect(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// One Newton step with a central-difference slope, kept only if it helps.
fn newton_polish(f: &dyn Fn(f64) -> Result<f64>, k: f64) -> Result<f64> {
    let h = 1e-6 * k.abs().max(1.0);
    let slope = (f(k + h)? - f(k - h)?) / (2.0 * h);
    let fk = f(k)?;
    if slope == 0.0 || fk == 0.0 {
        return Ok(k);
    }
    let next = k - fk / slope;
    if (next - k).abs() < h && f(next)?.abs() < fk.abs() {
        Ok(next)
    } else {
        Ok(k)
    }
}

/// Golden-section minimum of |f| on [a, b].
fn min_abs(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1)?.abs(), f(x2)?.abs());
    for _ in 0..120 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?.abs();
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?.abs();
        }
    }
    Ok(0.5 * (a + b))
}

/// Residual below which a tangential zero is reported as a double root.
const DOUBLE_ROOT_TOL: f64 = 1e-10;
/// Sign changes whose bisection limit is larger than this are poles.
const POLE_REJECT: f64 = 1e-6;

/// Number of scan subintervals for a window.
pub fn scan_count(window: (f64, f64)) -> usize {
    let (lo, hi) = window;
    let scale = ((hi - lo) * lo.abs().max(hi.abs()) / SCAN_UNIT).ceil().max(1.0);
    SCAN_BASE * scale as usize
}

/// Real roots in (lo, hi], ascending.
pub fn find_roots(rel: &DispersionRelation, window: (f64, f64)) -> Result<Vec<f64>> {
    find_roots_with(rel, window, scan_count(window))
}

pub fn find_roots_with(rel: &DispersionRelation, window: (f64, f64), n: usize) -> Result<Vec<f64>> {
    check_window(window)?;
    let (lo, hi) = window;
    let l2 = rel.cell.l2();
    if rel.bloch_filtered() {
        for e in [lo, hi] {
            if e > 0.0 && (e * l2).sin().abs() < 1e-12 * (e * l2).abs().max(1.0) {
                return Err(Error::WindowAtPole(e));
            }
        }
    }
    let mut roots = bracket_roots(&|k| rel.regularised(k), window, n)?;
    if rel.bloch_filtered() {
        roots.retain(|&r| (r * l2).sin().abs() > 1e-8);
    }
    Ok(roots)
}

/// Real zeros of a continuous f in (lo, hi]: sign changes on an n-point scan
/// refined by bisection and one Newton step, plus tangential zeros found as
/// local minima of |f| below the double-root tolerance. For lo ≤ 0 the scan
/// starts just above 0.
pub fn bracket_roots(f: &dyn Fn(f64) -> Result<f64>, window: (f64, f64), n: usize) -> Result<Vec<f64>> {
    check_window(window)?;
    let (lo, hi) = window;
    let start = if lo <= 0.0 { 1e-7 * hi } else { lo };
    let xs: Vec<f64> = (0..=n).map(|i| start + (hi - start) * i as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..n {
        let (a, b, fa, fb) = (xs[i], xs[i + 1], fs[i], fs[i + 1]);
        if fa == 0.0 {
            if a > lo {
                roots.push(a);
            }
            continue;
        }
        if (fa < 0.0) != (fb < 0.0) && fb != 0.0 {
            let r = newton_polish(f, bisect(f, a, b, fa)?)?;
            if f(r)?.abs() <= POLE_REJECT {
                roots.push(r);
            }
        }
        if i > 0
            && (fs[i - 1] < 0.0) == (fa < 0.0)
            && (fb < 0.0) == (fa < 0.0)
            && fa.abs() <= fs[i - 1].abs()
            && fa.abs() <= fb.abs()
        {
            let r = min_abs(f, xs[i - 1], b)?;
            if f(r)?.abs() < DOUBLE_ROOT_TOL {
                roots.push(r);
            }
        }
    }
    if fs[n] == 0.0 {
        roots.push(xs[n]);
    }
    roots.retain(|&r| r > lo && r <= hi);
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10 * a.abs().max(1.0));
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitModel {
    Hom,
    Deltaprime,
}

fn tau_class(tau: f64) -> Option<bool> {
    let t = tau.rem_euclid(TAU);
    if t < 1e-12 || TAU - t < 1e-12 {
        Some(true)
    } else if (t - PI).abs() < 1e-12 {
        Some(false)
    } else {
        None
    }
}

/// Eigenvalues invisible to the M-matrix: k = πm/l2 at τ ∈ {0, π} only.
/// m = 0 (k = 0) is included when the window contains it.
pub fn non_bloch_eigenvalues(model: LimitModel, tau: f64, c: &CellParams, window: (f64, f64)) -> Vec<f64> {
    let Some(at_zero) = tau_class(tau) else {
        return Vec::new();
    };
    let even = match model {
        LimitModel::Hom => at_zero,
        LimitModel::Deltaprime => !at_zero,
    };
    let (lo, hi) = window;
    let step = PI / c.l2();
    let m_max = (hi / step).floor().max(0.0) as usize;
    (0..=m_max)
        .filter(|m| (m % 2 == 0) == even)
        .map(|m| m as f64 * step)
        .filter(|&k| k > lo && k <= hi)
        .collect()
}

/// Max over both sets of the distance to the other; 0 for two empty sets.
pub fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let d = |x: f64, s: &[f64]| s.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
    let ab = a.iter().map(|&x| d(x, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|&x| d(x, a)).fold(0.0, f64::max);
    ab.max(ba)
}

/// S^(t) up to Re z = z_max: limit roots as z = k², the Dirichlet
/// eigenvalues (πm/l2)² of the soft edge, and 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionSet {
    pub tau: f64,
    pub rho: f64,
    pub z_max: f64,
    pub points: Vec<f64>,
}

impl ExclusionSet {
    pub fn distance(&self, z: Complex64) -> f64 {
        self.points
            .iter()
            .map(|&p| (z - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn admits(&self, z: Complex64) -> bool {
        self.distance(z) >= self.rho
    }

    /// Nearest point of the set to z.
    pub fn nearest(&self, z: Complex64) -> f64 {
        self.points
            .iter()
            .cloned()
            .min_by(|a, b| (z - a).norm().total_cmp(&(z - b).norm()))
            .unwrap_or(0.0)
    }
}

pub fn exclusion_set(c: &CellParams, tau: f64, z_max: f64, rho: f64) -> Result<ExclusionSet> {
    if !(rho > 0.0) {
        return Err(Error::domain("rho", "must be positive"));
    }
    let k_max = (z_max.max(0.0) + rho).sqrt() + 1.0;
    let rel = DispersionRelation::new(RelationKind::LimitCc, *c, tau);
    let mut points: Vec<f64> = find_roots(&rel, (0.0, k_max))?.into_iter().map(|k| k * k).collect();
    let step = PI / c.l2();
    let mut m = 1;
    while m as f64 * step <= k_max {
        points.push((m as f64 * step).powi(2));
        m += 1;
    }
    points.push(0.0);
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup();
    Ok(ExclusionSet { tau, rho, z_max, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZdepReport {
    pub pass: bool,
    pub split: f64,
    pub distance: f64,
    pub zdep_roots: Vec<f64>,
    pub limit_roots: Vec<f64>,
}

/// Zeros of det(M̌ − B̌) against the limit relation, default split l2/2.
pub fn zdep_spectrum_check(tau: f64, c: &CellParams, window: (f64, f64)) -> Result<ZdepReport> {
    zdep_spectrum_check_split(tau, c, window, 0.5)
}

pub fn zdep_spectrum_check_split(tau: f64, c: &CellParams, window: (f64, f64), split: f64) -> Result<ZdepReport> {
    let z = DispersionRelation::new(RelationKind::ZdepCheck, *c, tau).with_split(split)?;
    let l = DispersionRelation::new(RelationKind::LimitCc, *c, tau);
    let zdep_roots = find_roots(&z, window)?;
    let limit_roots = find_roots(&l, window)?;
    let distance = hausdorff(&zdep_roots, &limit_roots);
    Ok(ZdepReport {
        pass: zdep_roots.len() == limit_roots.len() && distance < 1e-8,
        split,
        distance,
        zdep_roots,
        limit_roots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub kind: RelationKind,
    pub k_window: (f64, f64),
    pub tau_grid: Vec<f64>,
    pub roots_per_tau: Vec<Vec<f64>>,
    /// (τ, k) pairs, hom and δ′ models only.
    pub non_bloch: Vec<(f64, f64)>,
    /// Spectral gaps as z-intervals.
    pub gaps: Vec<(f64, f64)>,
}

impl BandStructure {
    /// Largest |regularised relation| over all reported roots.
    pub fn max_residual(&self, c: &CellParams) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (tau, roots) in self.tau_grid.iter().zip(&self.roots_per_tau) {
            let rel = DispersionRelation::new(self.kind, *c, *tau);
            for &k in roots {
                worst = worst.max(rel.regularised(k)?.abs());
            }
        }
        Ok(worst)
    }

    /// One row per τ: `tau,count,roots,non_bloch`, lists joined by `;`.
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(|k| k.to_string()).collect::<Vec<_>>().join(";");
        w.write_record(["tau", "count", "roots", "non_bloch"]).map_err(io_err)?;
        for (tau, roots) in self.tau_grid.iter().zip(&self.roots_per_tau) {
            let nb = join(&mut self.non_bloch.iter().filter(|(t, _)| t == tau).map(|(_, k)| *k));
            let row = [tau.to_string(), roots.len().to_string(), join(&mut roots.iter().copied()), nb];
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// τ_j = 2πj/n, j = 0..n.
pub fn uniform_tau_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// `kind,lo,hi` rows for band and gap intervals.
pub fn write_intervals_csv(bands: &[(f64, f64)], gaps: &[(f64, f64)], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "lo", "hi"]).map_err(io_err)?;
    for (kind, list) in [("band", bands), ("gap", gaps)] {
        for (a, b) in list {
            w.write_record([kind.to_string(), a.to_string(), b.to_string()]).map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Band intervals in k: every band runs from a τ ∈ {0, π} root to the next
/// and contains a τ = π/2 root.
pub fn band_intervals(kind: RelationKind, c: &CellParams, window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let roots = |tau: f64| find_roots(&DispersionRelation::new(kind, *c, tau), window);
    let mut edges = vec![window.0.max(0.0), window.1];
    edges.extend(roots(0.0)?);
    edges.extend(roots(PI)?);
    if matches!(kind, RelationKind::HomBloch | RelationKind::DeltaprimeBloch) {
        let model = if kind == RelationKind::HomBloch { LimitModel::Hom } else { LimitModel::Deltaprime };
        edges.extend(non_bloch_eigenvalues(model, 0.0, c, window));
        edges.extend(non_bloch_eigenvalues(model, PI, c, window));
    }
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mid = roots(PI / 2.0)?;
    let mut bands: Vec<(f64, f64)> = Vec::new();
    for w in edges.windows(2) {
        if mid.iter().any(|&m| m > w[0] && m < w[1]) {
            match bands.last_mut() {
                Some(last) if (last.1 - w[0]).abs() < 1e-12 => last.1 = w[1],
                _ => bands.push((w[0], w[1])),
            }
        }
    }
    Ok(bands)
}

/// Gaps between consecutive k-bands, as z-intervals.
pub fn gaps_from_bands(bands: &[(f64, f64)]) -> Vec<(f64, f64)> {
    bands
        .windows(2)
        .filter(|w| w[1].0 - w[0].1 > 1e-12)
        .map(|w| (w[0].1 * w[0].1, w[1].0 * w[1].0))
        .collect()
}

pub fn band_structure(kind: RelationKind, c: &CellParams, tau_grid: &[f64], window: (f64, f64)) -> Result<BandStructure> {
    check_window(window)?;
    let roots_per_tau = tau_grid
        .par_iter()
        .map(|&tau| find_roots(&DispersionRelation::new(kind, *c, tau), window))
        .collect::<Result<Vec<_>>>()?;
    let model = match kind {
        RelationKind::HomBloch => Some(LimitModel::Hom),
        RelationKind::DeltaprimeBloch => Some(LimitModel::Deltaprime),
        _ => None,
    };
    let non_bloch = match model {
        Some(m) => tau_grid
            .iter()
            .flat_map(|&tau| non_bloch_eigenvalues(m, tau, c, window).into_iter().map(move |k| (tau, k)))
            .collect(),
        None => Vec::new(),
    };
    let gaps = gaps_from_bands(&band_intervals(kind, c, window)?);
    Ok(BandStructure {
        kind,
        k_window: window,
        tau_grid: tau_grid.to_vec(),
        roots_per_tau,
        non_bloch,
        gaps,
    })
}

/// Hausdorff distance between fibre det-M1 zeros at ε and the limit zeros,
/// maximised over the τ samples.
pub fn fibre_limit_distance(c: &CellParams, taus: &[f64], window: (f64, f64)) -> Result<f64> {
    let ds = taus
        .par_iter()
        .map(|&tau| {
            let f = find_roots(&DispersionRelation::new(RelationKind::FibreDetM1, *c, tau), window)?;
            let l = find_roots(&DispersionRelation::new(RelationKind::LimitCc, *c, tau), window)?;
            Ok(hausdorff(&f, &l))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ds.into_iter().fold(0.0, f64::max))
}
