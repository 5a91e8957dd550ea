//! `uhspec` — spectrum scans, hyperbolicity certificates, Green's kernels, bounded
//! witnesses, finite-section eigenvalues and cross-phase comparisons.
//!
//! Exit codes: 0 success (including a failed certificate), 1 usage or config error,
//! 2 numerical inconsistency, 3 I/O error.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use uhspec::green::verify_inverse_seeded;
use uhspec::models::phase_sources;
use uhspec::scanner::default_energy_range;
use uhspec::uhdetect::{certify_with, CertifyOptions};
use uhspec::*;

use config::{Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical inconsistency: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "uhspec", version, about = "Spectrum/resolvent classification of 1D discrete Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration (flags take precedence).
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Potential family with default parameters: constant, periodic, almost_mathieu, sturmian, random_iid.
    #[arg(long, global = true, value_parser = config::parse_family)]
    model: Option<Family>,
    /// Energy for certify, green and witness.
    #[arg(long = "E", global = true, allow_hyphen_values = true)]
    energy: Option<f64>,
    /// Energy range `a,b` for scan and compare.
    #[arg(long = "E-range", global = true, allow_hyphen_values = true, value_parser = config::parse_range)]
    e_range: Option<(f64, f64)>,
    /// Grid step for scan and compare.
    #[arg(long, global = true, allow_hyphen_values = true)]
    step: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    depth: Option<i64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    window: Option<i64>,
    /// Output artifact (CSV, or JSON where noted; `.json` selects JSON for scan).
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Classify an energy grid and assemble bands (CSV, or JSON for a `.json` path).
    Scan,
    /// Try to certify uniform hyperbolicity at one energy (JSON).
    Certify,
    /// Build the Green's kernel at a certified energy (CSV).
    Green,
    /// Bounded-witness search at one energy (JSON).
    Witness,
    /// Eigenvalues of the centered finite section (CSV).
    Eig,
    /// Scan several hull phases and check pairwise band inclusion (JSON).
    Compare,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let ok = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(Overrides {
        model: cli.model,
        energy: cli.energy,
        e_range: cli.e_range,
        step: cli.step,
        depth: cli.depth,
        window: cli.window,
        out: cli.out.clone(),
        parallelism: cli.parallelism,
        seed: cli.seed,
    })?;
    let spec = cfg.resolve()?.clone();
    match cli.command {
        Command::Scan => cmd_scan(&cfg, &spec),
        Command::Certify => cmd_certify(&cfg, &spec),
        Command::Green => cmd_green(&cfg, &spec),
        Command::Witness => cmd_witness(&cfg, &spec),
        Command::Eig => cmd_eig(&cfg, &spec),
        Command::Compare => cmd_compare(&cfg, &spec),
    }
}

/// The source at the model's first listed phase (or its base point).
fn base_source(spec: &HullSpec) -> Result<SourceF64, CliError> {
    let model_err = |e: ModelError| CliError::Usage(format!("model: {e}"));
    let phase = match spec.phases.first() {
        Some(&p) => spec.phase(p).map_err(model_err)?,
        None => Phase::Shift(0),
    };
    make_source(spec, phase).map_err(model_err)
}

fn echo(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(cfg: &RunConfig, summary: &mut String, contents: impl FnOnce() -> String) -> Result<(), CliError> {
    if let Some(path) = &cfg.out {
        write_atomic(path, contents().as_bytes())?;
        let _ = writeln!(summary, "wrote {}", path.display());
    }
    Ok(())
}

fn csv_with_config(cfg: &RunConfig, body: &str) -> String {
    format!("# {}\n{body}", echo(cfg))
}

fn json_artifact(cfg: &RunConfig, result: Value) -> String {
    let mut s = serde_json::to_string_pretty(&json!({ "config": echo(cfg), "result": result })).expect("json");
    s.push('\n');
    s
}

fn header(cfg: &RunConfig, spec: &HullSpec, what: &str) -> String {
    format!(
        "{what}  model {} {}  depth {}  window {}\n",
        spec.family,
        spec.params,
        cfg.settings.depth,
        cfg.settings.window
    )
}

fn cmd_scan(cfg: &RunConfig, spec: &HullSpec) -> Result<String, CliError> {
    let src = base_source(spec)?;
    let range = cfg.e_range.unwrap_or_else(|| default_energy_range(&src));
    let report = scan(&src, range, cfg.grid_step, &cfg.settings)?;
    let mut s = header(cfg, spec, "scan");
    let count = |l: Label| report.points.iter().filter(|p| p.label == l).count();
    let refined = report.points.iter().filter(|p| p.refined).count();
    let _ = writeln!(
        s,
        "E in [{}, {}] step {}: {} grid + {refined} refined points; resolvent {}, spectrum {}, inconclusive {}",
        range.0,
        range.1,
        cfg.grid_step,
        report.points.len() - refined,
        count(Label::Resolvent),
        count(Label::Spectrum),
        count(Label::Inconclusive)
    );
    let _ = writeln!(s, "{} band(s), edges resolved to {:.2e}:", report.bands.len(), report.edge_resolution);
    for (a, b) in &report.bands {
        let _ = writeln!(s, "  [{a:.6}, {b:.6}]");
    }
    let json_out = cfg.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    emit(cfg, &mut s, || {
        if json_out {
            json_artifact(cfg, serde_json::to_value(&report).expect("report serializes"))
        } else {
            csv_with_config(cfg, &report.to_csv())
        }
    })?;
    Ok(s)
}

fn cmd_certify(cfg: &RunConfig, spec: &HullSpec) -> Result<String, CliError> {
    let src = base_source(spec)?;
    let opts = CertifyOptions {
        tol_growth: cfg.settings.tol_growth,
        inv_tol: cfg.settings.inv_tol,
        contraction_max: cfg.settings.contraction_max,
    };
    let window = Interval::symmetric(cfg.settings.window);
    let outcome = certify_with(&src, cfg.energy, window, cfg.settings.depth, &opts).map_err(numerical)?;
    let mut s = header(cfg, spec, &format!("certify at E = {}", cfg.energy));
    let result = match &outcome {
        Ok(c) => {
            let _ = writeln!(
                s,
                "CERTIFIED: lambda {:.6}, c {:.3e}, gap {:.6} rad, beta {:.4e}, contraction {:.3e}",
                c.lambda, c.c_const, c.gap_gamma, c.beta, c.contraction_const
            );
            let _ = writeln!(
                s,
                "  max invariance error {:.2e}, max Cauchy residual {:.2e}",
                c.max_invariance_error, c.max_cauchy_residual
            );
            json!({ "certified": true, "certificate": c })
        }
        Err(report) => {
            let _ = writeln!(s, "{report}");
            let _ = writeln!(s, "  {}", report.details);
            json!({ "certified": false, "failure": report })
        }
    };
    emit(cfg, &mut s, || json_artifact(cfg, result))?;
    Ok(s)
}

fn cmd_green(cfg: &RunConfig, spec: &HullSpec) -> Result<String, CliError> {
    let src = base_source(spec)?;
    let window = Interval::symmetric(cfg.green_half_width);
    let depth = cfg.settings.depth;
    let opts = CertifyOptions {
        tol_growth: cfg.settings.tol_growth,
        inv_tol: cfg.settings.inv_tol,
        contraction_max: cfg.settings.contraction_max,
    };
    let mut s = header(cfg, spec, &format!("green at E = {}", cfg.energy));
    let cert = match certify_with(&src, cfg.energy, window.expand(depth), depth, &opts).map_err(numerical)? {
        Ok(c) => c,
        Err(report) => {
            // Not an error: the energy is simply not certified as resolvent.
            let _ = writeln!(s, "{report}; no kernel is built at uncertified energies");
            return Ok(s);
        }
    };
    let kernel = build_kernel(&src, cfg.energy, &cert, window).map_err(numerical)?;
    let residual = verify_inverse_seeded(&src, cfg.energy, &kernel, cfg.trials, cfg.seed.unwrap_or(0x5eed))
        .map_err(numerical)?;
    let _ = writeln!(
        s,
        "kernel on [{}, {}]: G(0,0) = {:.10}, decay rate {:.6} (|G(p,q)| ≲ {:.3e}·rate^|p−q|)",
        window.lo,
        window.hi,
        kernel.g(0, 0),
        kernel.decay_rate,
        kernel.decay_const
    );
    let _ = writeln!(
        s,
        "  inverse residual {:.2e} over {} trials, norm bound {:.6}, Wronskian drift {:.2e}",
        residual,
        cfg.trials,
        operator_norm_bound(&kernel),
        kernel.wronskian_drift
    );
    emit(cfg, &mut s, || csv_with_config(cfg, &kernel.to_csv(cfg.green_radius)))?;
    Ok(s)
}

fn cmd_witness(cfg: &RunConfig, spec: &HullSpec) -> Result<String, CliError> {
    let src = base_source(spec)?;
    let st = &cfg.settings;
    let w = bounded_witness_search(&src, cfg.energy, Interval::symmetric(st.witness_half_width), st.depth, st.angle_grid)
        .map_err(numerical)?;
    let threshold = (st.witness_poly_bound * st.depth as f64).ln();
    let mut s = header(cfg, spec, &format!("witness at E = {}", cfg.energy));
    let _ = writeln!(
        s,
        "max log-norm {:.6} at site {}, angle {:.10}; {} the spectrum threshold log({}·{}) = {:.4}",
        w.max_log_norm,
        w.site,
        w.direction.angle(),
        if w.max_log_norm <= threshold { "within" } else { "above" },
        st.witness_poly_bound,
        st.depth,
        threshold
    );
    emit(cfg, &mut s, || json_artifact(cfg, json!({ "threshold": threshold, "witness": w })))?;
    Ok(s)
}

fn cmd_eig(cfg: &RunConfig, spec: &HullSpec) -> Result<String, CliError> {
    let src = base_source(spec)?;
    let sec = FiniteSection::centered(&src, 0, cfg.section_size).map_err(numerical)?;
    let ev = eigenvalues(&sec, 0.0);
    let m = src.bound();
    let outside = ev.iter().filter(|&&e| e < -m - 2.0 || e > m + 2.0).count();
    let mut s = header(cfg, spec, "eig");
    let support = sec.support();
    let _ = writeln!(
        s,
        "{} eigenvalues of the section on [{}, {}] in [{:.6}, {:.6}]; {} outside [−M−2, M+2] = [{}, {}]",
        ev.len(),
        support.lo,
        support.hi,
        ev.first().copied().unwrap_or(f64::NAN),
        ev.last().copied().unwrap_or(f64::NAN),
        outside,
        -m - 2.0,
        m + 2.0
    );
    emit(cfg, &mut s, || {
        let mut body = String::from("index,eigenvalue\n");
        for (i, e) in ev.iter().enumerate() {
            let _ = writeln!(body, "{i},{e}");
        }
        csv_with_config(cfg, &body)
    })?;
    Ok(s)
}

fn cmd_compare(cfg: &RunConfig, spec: &HullSpec) -> Result<String, CliError> {
    let model_err = |e: ModelError| CliError::Usage(format!("model: {e}"));
    let sources = if spec.phases.len() >= 2 {
        phase_sources::<f64>(spec).map_err(model_err)?
    } else {
        hull_samples::<f64>(spec, cfg.phase_count).map_err(model_err)?
    };
    let range = cfg.e_range.expect("resolved");
    let reports = sources
        .iter()
        .map(|src| scan(src, range, cfg.grid_step, &cfg.settings))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pairs = Vec::new();
    let mut failing = Vec::new();
    for (i, x) in reports.iter().enumerate() {
        for (j, omega) in reports.iter().enumerate() {
            if i == j {
                continue;
            }
            let r = inclusion_check(x, omega, cfg.eps)?;
            if !r.included {
                failing.push((i, j, r.violations.len()));
            }
            pairs.push(json!({ "x": i, "omega": j, "included": r.included, "violations": r.violations }));
        }
    }
    let mut s = header(cfg, spec, &format!("compare {} phases", reports.len()));
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(s, "  phase {i}: {} band(s)  {}", r.bands.len(), r.model);
    }
    if failing.is_empty() {
        let _ = writeln!(s, "inclusion within eps {} holds for all {} ordered pairs", cfg.eps, pairs.len());
    } else {
        let _ = writeln!(s, "inclusion within eps {} FAILS for (x, omega, violations): {failing:?}", cfg.eps);
    }
    let result = json!({
        "phases": reports.iter().map(|r| json!({ "model": r.model, "bands": r.bands })).collect::<Vec<_>>(),
        "pairs": pairs,
    });
    emit(cfg, &mut s, || json_artifact(cfg, result))?;
    Ok(s)
}
