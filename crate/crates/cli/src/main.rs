use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use homog_core::harness::{emit, emit_spectral, run_convergence, run_spectral_convergence, Format, SlopeFit, SweepConfig};
use homog_core::kp_model::{unitary_equivalence_check_scaled, wholeline_band_function, WholeLineKP};
use homog_core::mmatrix::{btilde, im_part_min_eigenvalue, m1, m2, mtilde_minus_b};
use homog_core::spectra::{band_intervals, band_structure, gaps_from_bands, uniform_tau_grid, write_intervals_csv, RelationKind};
use homog_core::transforms::{gelfand_scaled, inverse_gelfand, LineFunction};
use homog_core::{make_cell, spectral_point, CellParams, Quasimomentum};
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "homog", version, about = "Fibre spectra, M-matrices and convergence sweeps for a high-contrast periodic graph")]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roots of a dispersion relation on a τ grid.
    Bands(BandsArgs),
    /// Band and gap intervals in z.
    Spectrum(SpectrumArgs),
    /// Entries of a 3×3 boundary matrix at one point.
    Mmatrix(MmatrixArgs),
    /// Resolvent-convergence sweep.
    Converge(ConvergeArgs),
    /// Compare the homogenised model with its δ′ counterpart at τ + π.
    KpCheck(KpCheckArgs),
    /// Gelfand transform of a wave packet and back.
    GelfandDemo(GelfandArgs),
}

#[derive(Args)]
struct CellArgs {
    #[arg(long)]
    l1: f64,
    #[arg(long)]
    l2: f64,
    /// Stiffness of both stiff edges.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandModel {
    Limit,
    Hom,
    Deltaprime,
    Fibre,
}

#[derive(Args)]
struct BandsArgs {
    #[command(flatten)]
    cell: CellArgs,
    #[arg(long, value_enum, default_value = "limit")]
    model: BandModel,
    #[arg(long, default_value_t = 64)]
    tau_grid: usize,
    #[arg(long, default_value_t = 0.1)]
    k_min: f64,
    #[arg(long, default_value_t = 20.0)]
    k_max: f64,
    /// Period; required by the fibre model.
    #[arg(long)]
    eps: Option<f64>,
    /// Single fibre parameter t instead of a τ grid (fibre model).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumModel {
    Limit,
    Hom,
    Deltaprime,
    /// Whole-line Kronig–Penney model via the transfer matrix.
    Kp,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 0.25)]
    l1: f64,
    #[arg(long, default_value_t = 0.5)]
    l2: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, value_enum, default_value = "limit")]
    model: SpectrumModel,
    #[arg(long, default_value_t = 100.0)]
    z_max: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    M1,
    M2,
    Btilde,
    Mtb,
}

#[derive(Args)]
struct MmatrixArgs {
    #[arg(long, default_value_t = 0.25)]
    l1: f64,
    #[arg(long, default_value_t = 0.5)]
    l2: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Spectral parameter as `re` or `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "-1")]
    z: Complex64,
    #[arg(long, value_enum, default_value = "m1")]
    which: Which,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ConvergeArgs {
    /// TOML sweep configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutFormat,
    /// Emit the fibre-vs-limit root distance table instead of norms.
    #[arg(long)]
    spectral: bool,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    tau: Option<Vec<f64>>,
    /// Spectral parameter `re` or `re,im`; repeat for several.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z: Vec<Complex64>,
    #[arg(long)]
    basis_cutoff: Option<usize>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KpCheckArgs {
    #[arg(long, default_value_t = PI / 2.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.25)]
    l1: f64,
    #[arg(long, default_value_t = 0.5)]
    l2: f64,
    #[arg(long, default_value_t = 20.0)]
    k_max: f64,
    #[arg(long, hide = true, default_value_t = 1.0)]
    corrupt_coupling: f64,
}

#[derive(Args)]
struct GelfandArgs {
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 4)]
    truncation: i64,
    #[arg(long, default_value_t = 64)]
    n_per_cell: usize,
    #[arg(long, default_value_t = 64)]
    n_kappa: usize,
    /// Width of the Gaussian packet in periods.
    #[arg(long, default_value_t = 1.0)]
    width: f64,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected re or re,im, got '{s}'")),
    }
}

fn usage_exit(kind: ErrorKind, msg: &str) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cell(l1: f64, l2: f64, a: f64, eps: f64) -> homog_core::Result<CellParams> {
    make_cell(a, a, l1, l2, eps)
}

fn bands(args: BandsArgs) -> anyhow::Result<ExitCode> {
    let kind = match args.model {
        BandModel::Limit => RelationKind::LimitCc,
        BandModel::Hom => RelationKind::HomBloch,
        BandModel::Deltaprime => RelationKind::DeltaprimeBloch,
        BandModel::Fibre => RelationKind::FibreDetM1,
    };
    let eps = match (args.model, args.eps) {
        (BandModel::Fibre, None) => usage_exit(ErrorKind::MissingRequiredArgument, "--model fibre requires --eps"),
        (_, e) => e.unwrap_or(0.1),
    };
    if args.t.is_some() && !matches!(args.model, BandModel::Fibre) {
        usage_exit(ErrorKind::ArgumentConflict, "--t only applies to --model fibre");
    }
    let c = cell(args.cell.l1, args.cell.l2, args.cell.a, eps)?;
    let taus = match args.t {
        Some(t) => vec![Quasimomentum::from_t(t, eps).tau],
        None => uniform_tau_grid(args.tau_grid),
    };
    let bs = band_structure(kind, &c, &taus, (args.k_min, args.k_max))?;
    let mut out = output(&args.out)?;
    bs.write_csv(&mut out)?;
    out.flush()?;
    log::info!("{} rows, {} gaps", bs.tau_grid.len(), bs.gaps.len());
    Ok(ExitCode::SUCCESS)
}

fn spectrum(args: SpectrumArgs) -> anyhow::Result<ExitCode> {
    let c = cell(args.l1, args.l2, args.a, 0.1)?;
    let (bands, gaps) = match args.model {
        SpectrumModel::Kp => {
            let wb = wholeline_band_function(&WholeLineKP::from_cell(&c), (0.0, args.z_max))?;
            (wb.bands, wb.gaps)
        }
        m => {
            let kind = match m {
                SpectrumModel::Limit => RelationKind::LimitCc,
                SpectrumModel::Hom => RelationKind::HomBloch,
                _ => RelationKind::DeltaprimeBloch,
            };
            let kb = band_intervals(kind, &c, (0.0, args.z_max.sqrt()))?;
            let gaps = gaps_from_bands(&kb);
            (kb.iter().map(|(a, b)| (a * a, b * b)).collect(), gaps)
        }
    };
    let mut out = output(&args.out)?;
    write_intervals_csv(&bands, &gaps, &mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn mmatrix(args: MmatrixArgs) -> anyhow::Result<ExitCode> {
    let c = cell(args.l1, args.l2, args.a, args.eps)?;
    let q = Quasimomentum::from_tau(args.tau, args.eps);
    let sp = spectral_point(args.z);
    let m = match args.which {
        Which::M1 => m1(&sp, &q, &c)?,
        Which::M2 => m2(&sp, &q, &c)?,
        Which::Btilde => btilde(&sp, &q, &c)?,
        Which::Mtb => mtilde_minus_b(&sp, &q, &c)?,
    };
    let mut out = output(&None)?;
    writeln!(out, "row,col,re,im")?;
    for i in 0..3 {
        for j in 0..3 {
            writeln!(out, "{i},{j},{},{}", m[(i, j)].re, m[(i, j)].im)?;
        }
    }
    out.flush()?;
    let det = m.determinant();
    eprintln!("det = {} {:+}i, min eig Im = {:e}", det.re, det.im, im_part_min_eigenvalue(&m));
    Ok(ExitCode::SUCCESS)
}

fn converge(args: ConvergeArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            SweepConfig::from_toml(&text)?
        }
        None => SweepConfig::default(),
    };
    if let Some(e) = args.eps {
        cfg.eps_list = e;
    }
    if let Some(t) = args.tau {
        cfg.tau_samples = t;
    }
    if !args.z.is_empty() {
        cfg.z_samples = args.z;
    }
    if let Some(n) = args.basis_cutoff {
        cfg.basis_cutoff = n;
    }
    if let Some(n) = args.grid_n {
        cfg.grid_n = n;
    }
    let format = match args.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let mut out = output(&args.out)?;
    if args.spectral {
        let t = run_spectral_convergence(&cfg)?;
        emit_spectral(&t, format, &mut out)?;
        out.flush()?;
        eprintln!(
            "spectral: slope {} monotone {}{}",
            fmt_slope(&t.slope),
            t.monotone,
            if t.empty { " (no roots in window)" } else { "" }
        );
        return Ok(if t.monotone && !t.empty { ExitCode::SUCCESS } else { ExitCode::from(1) });
    }
    let r = run_convergence(&cfg)?;
    emit(&r, format, &mut out)?;
    out.flush()?;
    for s in &r.slopes {
        eprintln!(
            "slopes tau={} z={}: thm41 {} (uncorrected {}) thm54 {} cor55 {} {}",
            s.tau,
            s.z,
            fmt_slope(&s.thm41),
            fmt_slope(&s.thm41_uncorrected),
            fmt_slope(&s.thm54),
            fmt_slope(&s.cor55),
            if s.pass { "pass" } else { "FAIL" }
        );
    }
    if !r.budget_ok {
        eprintln!("discretisation budget violated: residuals {:?}", r.budget_residual);
    }
    for row in r.rows.iter().filter_map(|row| row.error.as_ref()) {
        eprintln!("{row}");
    }
    Ok(if r.pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn fmt_slope(f: &Option<SlopeFit>) -> String {
    f.map_or("-".into(), |f| format!("{:.4}", f.slope))
}

fn kp_check(args: KpCheckArgs) -> anyhow::Result<ExitCode> {
    let c = cell(args.l1, args.l2, 1.0, 0.1)?;
    let r = unitary_equivalence_check_scaled(args.tau, &c, (0.1, args.k_max), args.corrupt_coupling)?;
    let mut out = output(&None)?;
    let list = |v: &[f64]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";");
    writeln!(out, "tau,{}", r.tau)?;
    writeln!(out, "tau_prime,{}", r.tau_prime)?;
    writeln!(out, "bloch_roots,{}", r.hom_roots.len())?;
    writeln!(out, "bloch_distance,{:e}", r.bloch_distance)?;
    writeln!(out, "non_bloch_hom,{}", list(&r.hom_non_bloch))?;
    writeln!(out, "non_bloch_deltaprime,{}", list(&r.dp_non_bloch))?;
    writeln!(out, "non_bloch_distance,{:e}", r.non_bloch_distance)?;
    writeln!(out, "max_norm_residual,{:e}", r.norm_residuals.iter().copied().fold(0.0, f64::max))?;
    writeln!(out, "result,{}", if r.pass { "pass" } else { "fail" })?;
    out.flush()?;
    Ok(if r.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn gelfand_demo(args: GelfandArgs) -> anyhow::Result<ExitCode> {
    let n = args.truncation;
    let (eps, w) = (args.eps, args.width * args.eps);
    let packet = |x: f64| {
        let y = x / w;
        if y.abs() < 8.0 {
            Complex64::from_polar((-y * y).exp(), 3.0 * x / eps)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let u = LineFunction::from_fn(eps, args.n_per_cell, -n..n + 1, packet);
    let g = gelfand_scaled(&u, n, args.n_kappa)?;
    let back = inverse_gelfand(&g);
    let roundtrip = back.values.iter().zip(&u.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let defect = (g.norm() - u.norm()).abs() / u.norm();
    let mut out = output(&None)?;
    writeln!(out, "quantity,value")?;
    writeln!(out, "norm_line,{}", u.norm())?;
    writeln!(out, "norm_transform,{}", g.norm())?;
    writeln!(out, "unitarity_defect,{defect:e}")?;
    writeln!(out, "roundtrip_error,{roundtrip:e}")?;
    out.flush()?;
    Ok(if defect < 1e-10 && roundtrip < 1e-10 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(core) = e.downcast_ref::<homog_core::Error>() {
        return if core.is_validation() { 2 } else { 3 };
    }
    if e.downcast_ref::<io::Error>().is_some() {
        return 2;
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            usage_exit(ErrorKind::InvalidValue, "--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let run = match cli.command {
        Command::Bands(a) => bands(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Mmatrix(a) => mmatrix(a),
        Command::Converge(a) => converge(a),
        Command::KpCheck(a) => kp_check(a),
        Command::GelfandDemo(a) => gelfand_demo(a),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
