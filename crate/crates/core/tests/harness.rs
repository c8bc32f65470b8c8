use std::f64::consts::PI;

use homog_core::harness::*;
use homog_core::Error;
use num_complex::Complex64;

fn small() -> SweepConfig {
    SweepConfig {
        tau_samples: vec![PI / 2.0],
        ..SweepConfig::default()
    }
}

fn render(r: &SweepResult, f: Format) -> Vec<u8> {
    let mut out = Vec::new();
    emit(r, f, &mut out).unwrap();
    out
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = small();
    let (a, b) = (run_convergence(&cfg).unwrap(), run_convergence(&cfg).unwrap());
    assert_eq!(render(&a, Format::Csv), render(&b, Format::Csv));
    assert_eq!(render(&a, Format::Json), render(&b, Format::Json));
}

#[test]
fn slopes_in_window_monotone_and_stable() {
    let cfg = small();
    let full = run_convergence(&cfg).unwrap();
    assert!(full.pass());
    let s = &full.slopes[0];
    assert!(s.monotone.iter().all(|m| *m));
    let trimmed = run_convergence(&SweepConfig {
        eps_list: cfg.eps_list[1..].to_vec(),
        ..cfg.clone()
    })
    .unwrap();
    let t = &trimmed.slopes[0];
    for (a, b) in [(&s.thm41, &t.thm41), (&s.thm54, &t.thm54), (&s.cor55, &t.cor55)] {
        let (a, b) = (a.unwrap().slope, b.unwrap().slope);
        assert!((a - b).abs() < 0.2, "{a} vs {b}");
    }
    // the corrector carries the whole first-order term
    assert!(s.thm41_uncorrected.unwrap().slope.abs() < 0.5);
}

#[test]
fn single_eps_gives_norms_without_slopes() {
    let r = run_convergence(&SweepConfig {
        eps_list: vec![0.125],
        ..small()
    })
    .unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].norms.is_some());
    assert!(r.slopes[0].thm41.is_none() && !r.pass());
    let csv = String::from_utf8(render(&r, Format::Csv)).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with("noslope"));
}

#[test]
fn dirichlet_point_is_rejected() {
    let z = (PI / 0.5).powi(2);
    let cfg = SweepConfig {
        z_samples: vec![Complex64::new(z, 0.0)],
        ..small()
    };
    match run_convergence(&cfg) {
        Err(Error::Config(m)) => assert!(m.contains("exclusion"), "{m}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SweepConfig { eps_list: vec![], ..small() },
        SweepConfig { eps_list: vec![0.1, 0.2], ..small() },
        SweepConfig { z_samples: vec![Complex64::new(0.0, 0.0)], ..small() },
        SweepConfig { basis_cutoff: 64, ..small() },
        SweepConfig { k_window: (3.0, 1.0), ..small() },
    ];
    for cfg in bad {
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn csv_and_json_layout() {
    let r = run_convergence(&small()).unwrap();
    let csv = String::from_utf8(render(&r, Format::Csv)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 5);
    assert!(body.iter().all(|l| l.split(',').count() == 9));
    let eps: Vec<f64> = body.iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(eps.windows(2).all(|w| w[0] > w[1]));
    let back = parse_json(std::str::from_utf8(&render(&r, Format::Json)).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn empty_result_is_header_only() {
    let r = SweepResult {
        rows: vec![],
        slopes: vec![],
        budget_residual: [0.0; 3],
        min_norm: [None; 3],
        budget_ok: true,
    };
    let csv = String::from_utf8(render(&r, Format::Csv)).unwrap();
    assert_eq!(csv.trim_end(), CSV_HEADER.join(","));
}

#[test]
fn rows_are_ordered_eps_tau_z() {
    let cfg = SweepConfig {
        eps_list: vec![0.25, 0.125],
        tau_samples: vec![PI, 0.5],
        z_samples: vec![Complex64::new(-1.0, 1.0), Complex64::new(-2.0, 0.0), Complex64::new(-1.0, -1.0)],
        ..SweepConfig::default()
    };
    let r = run_convergence(&cfg).unwrap();
    let key: Vec<(f64, f64, f64, f64)> = r.rows.iter().map(|r| (-r.eps, r.tau, r.z.re, r.z.im)).collect();
    let mut sorted = key.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(key, sorted);
    assert_eq!(r.rows.len(), 12);
}

#[test]
fn toml_config_parses() {
    let cfg = SweepConfig::from_toml(
        r#"
eps_list = [0.125, 0.0625, 0.03125, 0.015625]
tau_samples = [0.0, 1.0]
z_samples = [[-1.0, 0.0], [-2.0, 0.5]]
basis_cutoff = 32

[cell]
a1 = 1.0
a3 = 2.0
l1 = 0.25
l2 = 0.5
"#,
    )
    .unwrap();
    assert_eq!(cfg.z_samples[1], Complex64::new(-2.0, 0.5));
    assert_eq!(cfg.cell.a3, 2.0);
    assert_eq!(cfg.grid_n, 64);
    assert!((cfg.rho() - 0.05 * cfg.diam_k()).abs() < 1e-15);
    assert!(SweepConfig::from_toml("unknown = 1").is_err());
}

#[test]
fn spectral_table_reruns_and_converges() {
    let cfg = SweepConfig::default();
    let a = run_spectral_convergence(&cfg).unwrap();
    assert_eq!(a, run_spectral_convergence(&cfg).unwrap());
    assert!(!a.empty && a.monotone);
    assert!(a.slope.unwrap().slope > 1.6);
}

#[test]
fn rootless_window_is_flagged() {
    let t = run_spectral_convergence(&SweepConfig {
        k_window: (0.1, 0.3),
        ..SweepConfig::default()
    })
    .unwrap();
    assert!(t.empty && t.slope.is_none());
}

#[test]
fn loglog_fit_recovers_power_law() {
    let x: Vec<f64> = (1..=5).map(|p| 0.5f64.powi(p)).collect();
    let y: Vec<f64> = x.iter().map(|e| 3.0 * e * e).collect();
    let f = fit_loglog(&x, &y).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12 && (f.prefactor - 3.0).abs() < 1e-10 && f.residual < 1e-12);
    assert!(fit_loglog(&x[..3], &y[..3]).is_none());
}
