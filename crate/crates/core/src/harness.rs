//! Convergence sweeps over ε and their CSV/JSON reports.
//!
//! Cells (ε, τ, z) run in parallel and are gathered back in the order
//! ε descending, τ ascending, z lexicographic, so output is bit-stable.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{make_cell, spectral_point, CellParams, Quasimomentum};
use crate::error::{Error, Result};
use crate::nystrom::{estimate_norms, NormSet};
use crate::spectra::{exclusion_set, find_roots, hausdorff, DispersionRelation, RelationKind};

/// Fitted slopes outside this window fail.
pub const SLOPE_WINDOW: (f64, f64) = (1.6, 2.4);
/// Minimum number of ε values for a slope fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Cell with ε left open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellTemplate {
    pub a1: f64,
    pub a3: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Default for CellTemplate {
    fn default() -> Self {
        CellTemplate {
            a1: 1.0,
            a3: 1.0,
            l1: 0.25,
            l2: 0.5,
        }
    }
}

impl CellTemplate {
    pub fn at(&self, eps: f64) -> Result<CellParams> {
        make_cell(self.a1, self.a3, self.l1, self.l2, eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub cell: CellTemplate,
    pub eps_list: Vec<f64>,
    pub tau_samples: Vec<f64>,
    pub z_samples: Vec<Complex64>,
    /// Distance to the exclusion set; 0.05·diam(K) when absent.
    pub rho: Option<f64>,
    /// Nodes per edge of the reference run used for the error budget.
    pub grid_n: usize,
    /// Nodes per edge of the measured run.
    pub basis_cutoff: usize,
    /// k-window of the spectral study.
    pub k_window: (f64, f64),
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            cell: CellTemplate::default(),
            eps_list: (3..=7).map(|p| 0.5f64.powi(p)).collect(),
            tau_samples: vec![0.0, PI / 2.0, PI, 1.5 * PI],
            z_samples: vec![Complex64::new(-1.0, 0.0)],
            rho: None,
            grid_n: 64,
            basis_cutoff: 48,
            k_window: (0.1, 20.0),
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<SweepConfig> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// K is the bounding box of the z samples and the origin.
    pub fn diam_k(&self) -> f64 {
        let (mut lo, mut hi) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for z in &self.z_samples {
            lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        (hi - lo).norm()
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(0.05 * self.diam_k())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.eps_list.is_empty() || self.tau_samples.is_empty() || self.z_samples.is_empty() {
            return cfg("eps_list, tau_samples and z_samples must be non-empty".into());
        }
        if self.eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return cfg("eps_list entries must be positive".into());
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return cfg("eps_list must be strictly decreasing".into());
        }
        if self.tau_samples.iter().any(|t| !t.is_finite()) {
            return cfg("tau_samples must be finite".into());
        }
        if self.z_samples.iter().any(|z| !z.is_finite() || z.norm() == 0.0) {
            return cfg("z samples must be finite and non-zero".into());
        }
        if self.basis_cutoff < 4 || self.grid_n <= self.basis_cutoff {
            return cfg(format!("need 4 ≤ basis_cutoff < grid_n, got {} and {}", self.basis_cutoff, self.grid_n));
        }
        let (k0, k1) = self.k_window;
        if !(k0 >= 0.0 && k1 > k0) {
            return cfg(format!("k_window ({k0}, {k1}) is empty"));
        }
        let rho = self.rho();
        if !(rho > 0.0) {
            return cfg(format!("rho = {rho} must be positive"));
        }
        let c = self.cell.at(self.eps_list[0])?;
        let z_max = self.z_samples.iter().map(|z| z.re).fold(0.0, f64::max) + 1.0;
        for &tau in &self.tau_samples {
            let s = exclusion_set(&c, tau, z_max, rho)?;
            for z in &self.z_samples {
                if !s.admits(*z) {
                    return cfg(format!(
                        "z = {z} lies within rho = {rho} of the exclusion set at tau = {tau} (nearest point {})",
                        s.nearest(*z)
                    ));
                }
            }
        }
        Ok(())
    }

    fn ordered_taus(&self) -> Vec<f64> {
        let mut t = self.tau_samples.clone();
        t.sort_by(f64::total_cmp);
        t
    }

    fn ordered_zs(&self) -> Vec<Complex64> {
        let mut z = self.z_samples.clone();
        z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub tau: f64,
    pub z: Complex64,
    pub norms: Option<NormSet>,
    /// |norm(basis_cutoff) − norm(grid_n)| for thm41, thm54, cor55.
    pub budget_residual: Option<[f64; 3]>,
    pub error: Option<String>,
    /// Index into [`SweepResult::slopes`].
    pub window_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// exp(intercept), descriptive only.
    pub prefactor: f64,
    /// RMS residual of log norm.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through (ln x, ln y); `None` below [`MIN_FIT_POINTS`].
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < MIN_FIT_POINTS || n != x.len() {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / nf).sqrt();
    Some(SlopeFit {
        slope,
        intercept,
        prefactor: intercept.exp(),
        residual,
        points: n,
    })
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Fits for one (τ, z) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub tau: f64,
    pub z: Complex64,
    pub thm41: Option<SlopeFit>,
    pub thm41_uncorrected: Option<SlopeFit>,
    pub thm54: Option<SlopeFit>,
    pub cor55: Option<SlopeFit>,
    /// Strict decrease of thm41, thm54, cor55 along ε.
    pub monotone: [bool; 3],
    pub pass: bool,
}

impl SlopeSummary {
    pub fn in_window(f: &Option<SlopeFit>) -> bool {
        f.is_some_and(|f| (SLOPE_WINDOW.0..=SLOPE_WINDOW.1).contains(&f.slope))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<SlopeSummary>,
    /// Largest budget residual over all cells, per estimate.
    pub budget_residual: [f64; 3],
    /// Smallest norm measured in the sweep, per estimate.
    pub min_norm: [Option<f64>; 3],
    /// Every budget residual at least 10× below the smallest norm of its estimate.
    pub budget_ok: bool,
}

impl SweepResult {
    pub fn pass(&self) -> bool {
        self.budget_ok && self.rows.iter().all(|r| r.error.is_none()) && self.slopes.iter().all(|s| s.pass)
    }

    fn row_flags(&self, r: &SweepRow) -> String {
        let mut f = Vec::new();
        if r.error.is_some() {
            f.push("error");
        }
        if !self.budget_ok {
            f.push("budget");
        }
        if let Some(s) = self.slopes.get(r.window_id) {
            if s.thm41.is_none() {
                f.push("noslope");
            } else if !s.pass {
                f.push("fail");
            }
            if s.monotone.iter().any(|m| !m) {
                f.push("nonmonotone");
            }
        }
        if f.is_empty() {
            "ok".into()
        } else {
            f.join(";")
        }
    }
}

fn estimates(n: &NormSet) -> [f64; 3] {
    [n.thm41, n.thm54, n.cor55]
}

fn budget(n: &NormSet, refined: &NormSet) -> [f64; 3] {
    let (a, b) = (estimates(n), estimates(refined));
    [0, 1, 2].map(|i| (a[i] - b[i]).abs())
}

fn run_cell(cfg: &SweepConfig, eps: f64, tau: f64, z: Complex64, window_id: usize) -> SweepRow {
    let run = || -> Result<(NormSet, [f64; 3])> {
        let c = cfg.cell.at(eps)?;
        let q = Quasimomentum::from_tau(tau, eps);
        let sp = spectral_point(z);
        let n = estimate_norms(&sp, &q, &c, cfg.basis_cutoff)?;
        let r = estimate_norms(&sp, &q, &c, cfg.grid_n)?;
        Ok((n, budget(&n, &r)))
    };
    let (norms, budget_residual, error) = match run() {
        Ok((n, b)) => (Some(n), Some(b), None),
        Err(e) => (None, None, Some(format!("eps = {eps}, tau = {tau}, z = {z}: {e}"))),
    };
    SweepRow {
        eps,
        tau,
        z,
        norms,
        budget_residual,
        error,
        window_id,
    }
}

pub fn run_convergence(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let (taus, zs) = (cfg.ordered_taus(), cfg.ordered_zs());
    let pairs: Vec<(f64, Complex64)> = taus.iter().flat_map(|&t| zs.iter().map(move |&z| (t, z))).collect();
    let cells: Vec<(f64, f64, Complex64, usize)> = cfg
        .eps_list
        .iter()
        .flat_map(|&e| pairs.iter().enumerate().map(move |(w, &(t, z))| (e, t, z, w)))
        .collect();
    let rows: Vec<SweepRow> = cells.par_iter().map(|&(e, t, z, w)| run_cell(cfg, e, t, z, w)).collect();

    let slopes = pairs
        .iter()
        .enumerate()
        .map(|(w, &(tau, z))| {
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.window_id == w).collect();
            let eps: Vec<f64> = mine.iter().map(|r| r.eps).collect();
            let series = |f: fn(&NormSet) -> f64| -> Option<Vec<f64>> { mine.iter().map(|r| r.norms.as_ref().map(f)).collect() };
            let fit = |f: fn(&NormSet) -> f64| series(f).and_then(|v| fit_loglog(&eps, &v));
            let mono = |f: fn(&NormSet) -> f64| series(f).is_some_and(|v| strictly_decreasing(&v));
            let monotone = [mono(|n| n.thm41), mono(|n| n.thm54), mono(|n| n.cor55)];
            let (thm41, thm54, cor55) = (fit(|n| n.thm41), fit(|n| n.thm54), fit(|n| n.cor55));
            let pass = [&thm41, &thm54, &cor55].iter().all(|f| SlopeSummary::in_window(f)) && monotone.iter().all(|m| *m);
            SlopeSummary {
                tau,
                z,
                thm41,
                thm41_uncorrected: fit(|n| n.thm41_uncorrected),
                thm54,
                cor55,
                monotone,
                pass,
            }
        })
        .collect();

    let budget_residual = [0, 1, 2].map(|i| rows.iter().filter_map(|r| r.budget_residual).map(|b| b[i]).fold(0.0, f64::max));
    let min_norm = [0, 1, 2].map(|i| rows.iter().filter_map(|r| r.norms.as_ref()).map(|n| estimates(n)[i]).reduce(f64::min));
    let budget_ok = rows.iter().all(|r| r.norms.is_some())
        && (0..3).all(|i| min_norm[i].map_or(true, |m| budget_residual[i] * 10.0 <= m));
    Ok(SweepResult {
        rows,
        slopes,
        budget_residual,
        min_norm,
        budget_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub eps: f64,
    /// Hausdorff distance per τ sample, `None` when both root sets are empty.
    pub per_tau: Vec<Option<f64>>,
    /// Maximum over τ, `None` when no τ produced roots.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    pub k_window: (f64, f64),
    pub taus: Vec<f64>,
    pub rows: Vec<SpectralRow>,
    pub monotone: bool,
    pub slope: Option<SlopeFit>,
    /// No roots in the window at some ε.
    pub empty: bool,
}

/// Hausdorff distance between fibre det-M1 zeros and limit zeros in the
/// configured k-window, per ε.
pub fn run_spectral_convergence(cfg: &SweepConfig) -> Result<SpectralTable> {
    cfg.validate()?;
    let taus = cfg.ordered_taus();
    let cells: Vec<(f64, f64)> = cfg.eps_list.iter().flat_map(|&e| taus.iter().map(move |&t| (e, t))).collect();
    let per: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(eps, tau)| {
            let c = cfg.cell.at(eps)?;
            let f = find_roots(&DispersionRelation::new(RelationKind::FibreDetM1, c, tau), cfg.k_window)?;
            let l = find_roots(&DispersionRelation::new(RelationKind::LimitCc, c, tau), cfg.k_window)?;
            Ok(match (f.is_empty(), l.is_empty()) {
                (true, true) => None,
                (false, false) => Some(hausdorff(&f, &l)),
                _ => Some(f64::INFINITY),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SpectralRow> = cfg
        .eps_list
        .iter()
        .zip(per.chunks(taus.len()))
        .map(|(&eps, d)| SpectralRow {
            eps,
            per_tau: d.to_vec(),
            distance: d.iter().flatten().cloned().reduce(f64::max),
        })
        .collect();
    let empty = rows.iter().any(|r| r.distance.is_none());
    let dist: Option<Vec<f64>> = rows.iter().map(|r| r.distance).collect();
    let monotone = dist.as_ref().is_some_and(|d| strictly_decreasing(d));
    let slope = dist.and_then(|d| fit_loglog(&cfg.eps_list, &d));
    Ok(SpectralTable {
        k_window: cfg.k_window,
        taus,
        rows,
        monotone,
        slope,
        empty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 9] = [
    "eps",
    "tau",
    "re_z",
    "im_z",
    "norm_thm41",
    "norm_thm54",
    "norm_cor55",
    "slope_window_id",
    "flags",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(format!("csv: {e}"))
}

/// Writes the sweep as CSV (one row per cell) or as a JSON document.
pub fn emit(result: &SweepResult, format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, result).map_err(|e| Error::Io(format!("json: {e}")))?;
            writeln!(out).map_err(|e| Error::Io(e.to_string()))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for r in &result.rows {
                let num = |f: fn(&NormSet) -> f64| r.norms.as_ref().map(|n| format!("{:e}", f(n))).unwrap_or_default();
                w.write_record([
                    format!("{}", r.eps),
                    format!("{}", r.tau),
                    format!("{}", r.z.re),
                    format!("{}", r.z.im),
                    num(|n| n.thm41),
                    num(|n| n.thm54),
                    num(|n| n.cor55),
                    r.window_id.to_string(),
                    result.row_flags(r),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::Io(e.to_string()))
        }
    }
}

/// Spectral table as `eps,distance` rows or a JSON document.
pub fn emit_spectral(table: &SpectralTable, format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, table).map_err(|e| Error::Io(format!("json: {e}")))?;
            writeln!(out).map_err(|e| Error::Io(e.to_string()))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["eps", "distance"]).map_err(csv_err)?;
            for r in &table.rows {
                w.write_record([r.eps.to_string(), r.distance.map(|d| format!("{d:e}")).unwrap_or_default()])
                    .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::Io(e.to_string()))
        }
    }
}

pub fn parse_json(text: &str) -> Result<SweepResult> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("json: {e}")))
}
