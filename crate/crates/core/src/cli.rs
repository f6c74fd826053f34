//! Command-line driver: `reduce`, `compare`, `verify`, `impulse`, `gramians`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::bench_io::{
    self, DeviationNorms, GridSummary, MethodReport, MetricsBlock, PlotGrid, Report, RunConfig, SystemBundle,
    SystemSource, SystemSummary,
};
use crate::gramians::{compute_gramian_set, trace_identities};
use crate::linalg::{self, Mat};
use crate::optimality::{
    kronecker_conditions, relative_gap, relative_gap_scalars, projection_deviations, Mode, OptimalityReport,
    EXPLICIT_CAP,
};
use crate::reduction::{irka, tl_irka, InitialGuess, Method, ReductionRun};
use crate::system::{self, ErrorTrace, LtiSystem};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "tlmor", version, about = "Time-limited H2 model order reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random-init IRKA followed by TL-IRKA; writes report files.
    Reduce(RunArgs),
    /// Run both methods from a shared IRKA start and print a metrics table.
    Compare(RunArgs),
    /// Run the invariant checks on the configured system.
    Verify(VerifyArgs),
    /// Write impulse responses of the full model and the TL-IRKA error.
    Impulse(RunArgs),
    /// Write the six time-limited Gramians as Matrix Market files.
    Gramians(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// RunConfig JSON; flags given on the command line take precedence.
    #[arg(long, value_name = "JSON")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires_all = ["b", "c"], conflicts_with = "gen_heat")]
    pub a: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires_all = ["a", "c"])]
    pub b: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires_all = ["a", "b"])]
    pub c: Option<PathBuf>,
    /// Use the synthetic heat system of this order.
    #[arg(long, value_name = "N")]
    pub gen_heat: Option<usize>,
    #[arg(long, value_name = "R")]
    pub order: Option<usize>,
    #[arg(long, value_name = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FLOAT")]
    pub tol: Option<f64>,
    #[arg(long, value_name = "K")]
    pub max_iter: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Number of impulse-response samples.
    #[arg(long, value_name = "COUNT")]
    pub plot_grid: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Test hook: perturb P_T before the trace identities are checked.
    #[arg(long, hide = true)]
    pub corrupt_gramian: bool,
}

impl RunArgs {
    /// Merge the config file (if any) with the flags and validate.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let (Some(a), Some(b), Some(c)) = (&self.a, &self.b, &self.c) {
            cfg.source = Some(SystemSource::Files {
                a: a.clone(),
                b: b.clone(),
                c: c.clone(),
            });
        }
        if let Some(n) = self.gen_heat {
            let diffusivity = match cfg.source {
                Some(SystemSource::Heat { diffusivity, .. }) => diffusivity,
                _ => bench_io::HEAT_DIFFUSIVITY,
            };
            cfg.source = Some(SystemSource::Heat { n, diffusivity });
        }
        if let Some(r) = self.order {
            cfg.order = r;
        }
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tol {
            cfg.tolerance = t;
        }
        if let Some(k) = self.max_iter {
            cfg.max_iterations = k;
        }
        if let Some(dir) = &self.out {
            cfg.output_dir = dir.clone();
        }
        if let Some(count) = self.plot_grid {
            cfg.plot_grid = PlotGrid { count, ..cfg.plot_grid };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    VerifyFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 2,
            Status::VerifyFailed => 3,
        }
    }
}

/// Parse `std::env::args`, run, and map the outcome to an exit code.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own code 2 would collide with "not converged".
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Status> {
    match &cli.command {
        Command::Reduce(args) => cmd_reduce(&args.resolve()?, out),
        Command::Compare(args) => cmd_compare(&args.resolve()?, out),
        Command::Verify(args) => cmd_verify(&args.run.resolve()?, args.corrupt_gramian, out),
        Command::Impulse(args) => cmd_impulse(&args.resolve()?, out),
        Command::Gramians(args) => cmd_gramians(&args.resolve()?, out),
    }
}

/// Random-init IRKA, then TL-IRKA started from its result.
struct Study {
    bundle: SystemBundle,
    irka: ReductionRun,
    tl: ReductionRun,
}

impl Study {
    fn run(cfg: &RunConfig) -> Result<Self> {
        let bundle = cfg.load_system()?;
        let sys = &bundle.system;
        let opts = cfg.options();
        let irka = irka(sys, cfg.order, InitialGuess::Random { seed: cfg.seed }, &opts)?;
        log_iterations(&irka);
        let tl = tl_irka(sys, cfg.order, cfg.horizon, &irka.reduced, &opts)?;
        log_iterations(&tl);
        Ok(Self { bundle, irka, tl })
    }

    fn full(&self) -> &LtiSystem {
        &self.bundle.system
    }

    fn status(&self, methods: &[Method]) -> Status {
        let converged = methods.iter().all(|m| self.run_for(*m).converged);
        if converged {
            Status::Ok
        } else {
            Status::NotConverged
        }
    }

    fn run_for(&self, method: Method) -> &ReductionRun {
        match method {
            Method::Irka => &self.irka,
            Method::TlIrka => &self.tl,
        }
    }
}

fn log_iterations(run: &ReductionRun) {
    for rec in &run.iterations {
        eprintln!(
            "{} iteration {:>3}: change {:.3e}{}",
            run.method,
            rec.iteration,
            rec.convergence,
            if rec.hurwitz { "" } else { " (not Hurwitz)" }
        );
    }
    if !run.converged {
        eprintln!("{}: no convergence after {} iterations", run.method, run.iterations.len());
    }
}

fn summarize(full: &LtiSystem, run: &ReductionRun, cfg: &RunConfig) -> Result<(MethodReport, ErrorTrace)> {
    let red = &run.reduced;
    let projection = (run.method == Method::TlIrka).then_some(&run.projection);
    let opt = OptimalityReport::evaluate(full, red, cfg.horizon, projection)?;
    let deviation_norms = opt.deviations.as_ref().map(|d| DeviationNorms {
        e_c: d.e_c.norm(),
        e_b: d.e_b.norm(),
        e_lambda_max: d.e_lambda().iter().fold(0.0, |m, z| m.max(z.norm())),
    });
    let trace = system::error_trace(full, red.base(), &cfg.plot_grid.times(cfg.horizon))?;
    let h2t = system::h2t_norm_squared_of_error(full, red.base(), cfg.horizon)?.sqrt();
    let report = MethodReport {
        method: run.method,
        converged: run.converged,
        hurwitz: !run.degraded(),
        seed: run.seed,
        horizon: run.horizon,
        iterations: run.iterations.clone(),
        eigenvalues: red.eigenvalues().iter().map(|z| (z.re, z.im)).collect(),
        metrics: MetricsBlock {
            e_c: opt.metrics.e_c,
            e_b: opt.metrics.e_b,
            e_lambda: opt.metrics.e_lambda,
        },
        deviation_norms,
        h2t_error: h2t,
        max_impulse_error: trace.max_absolute_until(cfg.horizon),
        wall_clock_seconds: run.elapsed_seconds,
    };
    Ok((report, trace))
}

fn write_study(study: &Study, cfg: &RunConfig, methods: &[Method]) -> Result<Vec<MethodReport>> {
    let full = study.full();
    let mut reports = Vec::with_capacity(methods.len());
    let mut traces = Vec::with_capacity(methods.len());
    for &m in methods {
        let (report, trace) = summarize(full, study.run_for(m), cfg)?;
        reports.push(report);
        traces.push((m, trace));
    }
    let report = Report {
        config: cfg.clone(),
        system: SystemSummary {
            label: full.label().to_string(),
            n: full.n(),
            m: full.m(),
            p: full.p(),
            checksum: study.bundle.checksum.clone(),
            source: Some(study.bundle.source.clone()),
        },
        impulse_grid: GridSummary {
            samples: cfg.plot_grid.count,
            t_end: cfg.plot_grid.horizon_factor * cfg.horizon,
        },
        methods: reports,
    };
    let trace_refs: Vec<(&str, &ErrorTrace)> = traces.iter().map(|(m, t)| (m.name(), t)).collect();
    let spectra: Vec<(&str, &[linalg::C64])> = methods
        .iter()
        .map(|&m| (m.name(), study.run_for(m).reduced.eigenvalues()))
        .collect();
    bench_io::write_report(&cfg.output_dir, &report, &trace_refs, &spectra)?;
    Ok(report.methods)
}

fn io_err(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn cmd_reduce(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status> {
    let study = Study::run(cfg)?;
    let methods = if cfg.methods.is_empty() { vec![Method::TlIrka] } else { cfg.methods.clone() };
    for report in write_study(&study, cfg, &methods)? {
        let state = if report.converged { "converged" } else { "did not converge" };
        writeln!(out, "{}: {} after {} iterations", report.method, state, report.iterations.len()).map_err(io_err)?;
    }
    Ok(study.status(&methods))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6e}"))
}

fn cmd_compare(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status> {
    let study = Study::run(cfg)?;
    let methods = [Method::Irka, Method::TlIrka];
    let reports = write_study(&study, cfg, &methods)?;
    let impulse = format!("max|eps| on [0,{}]", cfg.horizon);
    writeln!(out, "{:<8} {:>13} {:>13} {:>13} {:>22}", "Method", "E_c", "E_b", "E_lambda", impulse).map_err(io_err)?;
    for r in &reports {
        writeln!(
            out,
            "{:<8} {:>13} {:>13} {:>13} {:>22}",
            r.method.to_string(),
            fmt_metric(r.metrics.e_c),
            fmt_metric(r.metrics.e_b),
            fmt_metric(r.metrics.e_lambda),
            format!("{:.6e}", r.max_impulse_error)
        )
        .map_err(io_err)?;
    }
    Ok(study.status(&methods))
}

fn cmd_impulse(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status> {
    let study = Study::run(cfg)?;
    let full = study.full();
    let times = cfg.plot_grid.times(cfg.horizon);
    let responses = system::impulse_response(full, &times)?;
    let trace = system::error_trace(full, study.tl.reduced.base(), &times)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let written = [
        bench_io::write_response_csv(dir.join("impulse_full.csv"), &times, &responses)?,
        bench_io::write_trace_csv(dir.join("impulse_tlirka.csv"), &trace)?,
    ];
    for path in written {
        writeln!(out, "{}", path.display()).map_err(io_err)?;
    }
    Ok(study.status(&[Method::Irka, Method::TlIrka]))
}

fn cmd_gramians(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status> {
    let study = Study::run(cfg)?;
    let set = compute_gramian_set(study.full(), study.tl.reduced.base(), cfg.horizon)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let named: [(&str, &Mat); 6] = [
        ("P_T", &set.p),
        ("P2_T", &set.p2),
        ("Phat_T", &set.phat),
        ("Q_T", &set.q),
        ("Q2_T", &set.q2),
        ("Qhat_T", &set.qhat),
    ];
    for (name, m) in named {
        let path = dir.join(format!("{name}.mtx"));
        bench_io::write_matrix_market(&path, m)?;
        writeln!(out, "{}", path.display()).map_err(io_err)?;
    }
    Ok(study.status(&[Method::Irka, Method::TlIrka]))
}

/// One line of `verify` output.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    /// `None` for a check that does not apply to this instance.
    pub passed: Option<bool>,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: Some(passed),
            detail,
        }
    }

    fn skipped(name: impl Into<String>, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: None,
            detail,
        }
    }
}

pub const TRACE_TOL: f64 = 1e-8;
pub const IDENTITY_TOL: f64 = 1e-6;
pub const DUAL_PATH_TOL: f64 = 1e-9;
pub const DUAL_PATH_LIMIT: usize = 1000;
/// Differences below this fraction of the condition terms count as roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Relative agreement, or agreement at roundoff level against `scale`.
fn agrees(gap: f64, diff: f64, scale: f64, tol: f64) -> bool {
    gap <= tol || diff <= ROUNDOFF_FLOOR * scale
}

fn deterministic_input(m: usize, samples: usize) -> Mat {
    Mat::from_fn(m, samples, |j, k| {
        let s = k as f64 / (samples - 1) as f64;
        (std::f64::consts::TAU * (j + 1) as f64 * s).cos() + 0.5
    })
}

/// The invariant suite used by `verify`.
pub fn verification_checks(
    full: &LtiSystem,
    tl: &ReductionRun,
    horizon: f64,
    corrupt_gramian: bool,
) -> Result<Vec<CheckOutcome>> {
    let red = &tl.reduced;
    let mut checks = Vec::new();

    let mut set = compute_gramian_set(full, red.base(), horizon)?;
    if corrupt_gramian {
        set.p *= 1.01;
    }
    let names = ["trace identity P/Q", "trace identity Phat/Qhat", "trace identity P2/Q2"];
    for (name, pair) in names.iter().zip(trace_identities(full, red.base(), &set)) {
        let gap = pair.relative_gap();
        checks.push(CheckOutcome::new(*name, gap <= TRACE_TOL, format!("relative gap {gap:.3e}")));
    }

    let direct = kronecker_conditions(full, red, horizon, Mode::Direct)?;
    let dev = projection_deviations(full, red, &tl.projection, horizon)?;
    let (cd, bd, ld) = (direct.c_difference(), direct.b_difference(), direct.lambda_difference());
    let el = dev.e_lambda();
    let lambda_scale = direct
        .lambda_lhs
        .iter()
        .chain(&direct.lambda_rhs)
        .fold(0.0f64, |m, z| m.max(z.norm()));
    let lambda_diff = el.iter().zip(&ld).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    let rows = [
        (
            "projection identity E_c",
            relative_gap(&dev.e_c, &cd),
            (&dev.e_c - &cd).norm(),
            direct.c_lhs.norm().max(direct.c_rhs.norm()),
        ),
        (
            "projection identity E_b",
            relative_gap(&dev.e_b, &bd),
            (&dev.e_b - &bd).norm(),
            direct.b_lhs.norm().max(direct.b_rhs.norm()),
        ),
        ("projection identity E_lambda", relative_gap_scalars(&el, &ld), lambda_diff, lambda_scale),
    ];
    for (name, gap, diff, scale) in rows {
        checks.push(CheckOutcome::new(
            name,
            agrees(gap, diff, scale, IDENTITY_TOL),
            format!("relative gap {gap:.3e}"),
        ));
    }

    let nr = full.n() * red.order();
    if nr <= DUAL_PATH_LIMIT && nr <= EXPLICIT_CAP {
        let explicit = kronecker_conditions(full, red, horizon, Mode::Explicit)?;
        let gap = [
            relative_gap(&direct.c_lhs, &explicit.c_lhs),
            relative_gap(&direct.c_rhs, &explicit.c_rhs),
            relative_gap(&direct.b_lhs, &explicit.b_lhs),
            relative_gap(&direct.b_rhs, &explicit.b_rhs),
            relative_gap_scalars(&direct.lambda_lhs, &explicit.lambda_lhs),
            relative_gap_scalars(&direct.lambda_rhs, &explicit.lambda_rhs),
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
        checks.push(CheckOutcome::new(
            "direct vs explicit Kronecker",
            gap <= DUAL_PATH_TOL,
            format!("relative gap {gap:.3e}"),
        ));
    } else {
        checks.push(CheckOutcome::skipped(
            "direct vs explicit Kronecker",
            format!("n*r = {nr} exceeds {DUAL_PATH_LIMIT}"),
        ));
    }

    let u = deterministic_input(full.m(), 401);
    let bound = system::output_error_bound_check(full, red.base(), horizon, &u)?;
    checks.push(CheckOutcome::new(
        "output error bound",
        bound.holds(),
        format!("max error {:.3e} <= bound {:.3e}", bound.lhs, bound.rhs),
    ));
    if full.stability().is_hurwitz && red.base().stability().is_hurwitz {
        let tl_norm = system::h2t_norm_squared_of_error(full, red.base(), horizon)?;
        let inf_norm = system::h2_norm_squared_of_error(full, red.base())?;
        let slack = 1e-9 * inf_norm.max(f64::MIN_POSITIVE);
        checks.push(CheckOutcome::new(
            "time-limited bound below H2 bound",
            tl_norm <= inf_norm + slack,
            format!("{:.3e} <= {:.3e}", tl_norm.sqrt(), inf_norm.sqrt()),
        ));
    } else {
        checks.push(CheckOutcome::skipped(
            "time-limited bound below H2 bound",
            "a model is not Hurwitz".to_string(),
        ));
    }
    Ok(checks)
}

fn cmd_verify(cfg: &RunConfig, corrupt_gramian: bool, out: &mut dyn Write) -> Result<Status> {
    let study = Study::run(cfg)?;
    let checks = verification_checks(study.full(), &study.tl, cfg.horizon, corrupt_gramian)?;
    let mut all = true;
    for c in &checks {
        let tag = match c.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        all &= c.passed != Some(false);
        writeln!(out, "{tag} {:<36} {}", c.name, c.detail).map_err(io_err)?;
    }
    Ok(if all { Status::Ok } else { Status::VerifyFailed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("tlmor").chain(args.iter().copied()))
    }

    #[test]
    fn flags_override_defaults() {
        let cli = parse(&["reduce", "--gen-heat", "20", "--order", "3", "--seed", "7", "--plot-grid", "50"]).unwrap();
        let Command::Reduce(args) = cli.command else { panic!() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.order, 3);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.plot_grid.count, 50);
        assert_eq!(
            cfg.source,
            Some(SystemSource::Heat {
                n: 20,
                diffusivity: bench_io::HEAT_DIFFUSIVITY
            })
        );
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"source": {"kind": "heat", "n": 30, "diffusivity": 0.5}, "order": 4, "seed": 3}"#,
        )
        .unwrap();
        let cli = parse(&["compare", "--config", path.to_str().unwrap(), "--gen-heat", "40", "--seed", "9"]).unwrap();
        let Command::Compare(args) = cli.command else { panic!() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.order, 4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.source, Some(SystemSource::Heat { n: 40, diffusivity: 0.5 }));
    }

    #[test]
    fn rejects_bad_invocations() {
        assert!(parse(&["reduce", "--bogus"]).is_err());
        assert!(parse(&["reduce", "--a", "A.mtx"]).is_err());
        assert!(parse(&["reduce", "--a", "A", "--b", "B", "--c", "C", "--gen-heat", "5"]).is_err());
        assert!(parse(&[]).is_err());
        let cli = parse(&["verify", "--gen-heat", "10", "--horizon", "0"]).unwrap();
        let Command::Verify(args) = cli.command else { panic!() };
        assert!(matches!(args.run.resolve(), Err(Error::Validation(_))));
    }

    #[test]
    fn default_seed_is_zero() {
        let cli = parse(&["reduce", "--gen-heat", "10"]).unwrap();
        let Command::Reduce(args) = cli.command else { panic!() };
        assert_eq!(args.resolve().unwrap().seed, 0);
    }

    #[test]
    fn metric_formatting() {
        assert_eq!(fmt_metric(None), "undefined");
        assert_eq!(fmt_metric(Some(0.0)), "0.000000e0");
    }
}
