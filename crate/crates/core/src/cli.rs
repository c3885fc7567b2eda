//! Command-line front end.
//!
//! Only the products gamma*t, gamma*T and delta*t matter, so times may be in
//! any unit as long as gamma and the detuning use its inverse.
//!
//! Exit codes: 0 success, 2 invalid arguments (no output file is written),
//! 3 numerical or optimization failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evolution::{dephase_evolve, drho_ddelta, DephasingParams, CONVENTION};
use crate::fisher::{qfi, qfi_uncertainty, SectorBasis, SymmetricQfiProfile};
use crate::optimize::{
    fig3_scan, fig4_curve, minimize_qfi_uncertainty, optimize_symmetric_coeffs, Method,
    OptimizerConfig, PhaseLock, SymmetricOptimum, MAX_IONS, MIN_IONS,
};
use crate::qstate::{DensityMatrix, SymmetricFamilyState, MAX_QUBITS};
use crate::ramsey::{
    check_optimum_regime, improvement_pct, reference_limit, signal_ghz, signal_uncorrelated,
    Scheme, PIPELINE_MAX_QUBITS,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "clocksim",
    version,
    about = "Frequency-standard precision with dephased ion registers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ramsey signal P(t) of the uncorrelated or GHZ scheme.
    Signal(SignalArgs),
    /// Frequency uncertainty of both schemes along a shot-time grid.
    Scan(ScanArgs),
    /// Best symmetric-family preparations for a range of ion counts.
    Optimize(OptimizeArgs),
    /// Quantum Fisher information of a preparation after dephasing.
    Qfi(QfiArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Flat key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long = "t-min")]
    t_min: Option<f64>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    #[arg(long = "t-steps")]
    t_steps: Option<usize>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SignalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "uncorrelated")]
    scheme: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    detuning: f64,
    /// Shot times, comma separated. Alternative to the --t-min/--t-max/--t-steps grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ScanArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(
        long = "total-time",
        default_value_t = 100.0,
        allow_negative_numbers = true
    )]
    total_time: f64,
    /// Fixed detuning for both columns. By default the phase is locked to
    /// delta t = pi/2 (uncorrelated) and n delta t = pi/2 (GHZ).
    #[arg(long, allow_negative_numbers = true)]
    detuning: Option<f64>,
    #[arg(long = "t-min", default_value_t = 0.01, allow_negative_numbers = true)]
    t_min: f64,
    #[arg(long = "t-max", default_value_t = 1.0, allow_negative_numbers = true)]
    t_max: f64,
    #[arg(long = "t-steps", default_value_t = 100)]
    t_steps: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct OptimizeArgs {
    #[arg(long = "n-min")]
    n_min: usize,
    #[arg(long = "n-max")]
    n_max: usize,
    /// gen-ramsey, qfi or both.
    #[arg(long, default_value = "both")]
    method: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(
        long = "total-time",
        default_value_t = 100.0,
        allow_negative_numbers = true
    )]
    total_time: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long = "tol-obj", default_value_t = 1e-10)]
    tol_obj: f64,
    #[arg(long = "tol-x", default_value_t = 1e-9)]
    tol_x: f64,
    #[arg(long = "max-iter", default_value_t = 2000)]
    max_iter: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct QfiArgs {
    #[arg(long)]
    n: usize,
    /// uncorrelated or ghz; alternatively give --coeffs.
    #[arg(long)]
    scheme: Option<String>,
    /// Symmetric-family coefficients a_0..a_{n/2}, separated by ';' or ','.
    #[arg(long, allow_negative_numbers = true)]
    coeffs: Option<String>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    detuning: f64,
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    #[arg(
        long = "total-time",
        default_value_t = 100.0,
        allow_negative_numbers = true
    )]
    total_time: f64,
    /// Also minimize the uncertainty over the shot time.
    #[arg(long = "optimize-t")]
    optimize_t: bool,
    #[command(flatten)]
    out: OutputArgs,
}

/// Failure of a command: exit code plus a one-line reason.
#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_invalid_argument() {
            EXIT_INVALID
        } else {
            EXIT_NUMERICAL
        };
        let message = match &e {
            Error::InvalidArgument(m)
            | Error::SingularPoint(m)
            | Error::DegenerateState(m)
            | Error::NoInformation(m)
            | Error::SingularOutcome(m)
            | Error::Bracketing(m)
            | Error::OptimizationFailure(m) => m.clone(),
        };
        Failure {
            code,
            kind: e.kind(),
            message,
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        kind: "invalid-argument",
        message: message.into(),
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// Rendered report plus the exit code to return after writing it.
struct Report {
    body: String,
    code: i32,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Reports go to the output file or stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match run_inner(args) {
        Ok(code) => code,
        Err(f) => {
            eprintln!(
                "error: {}: {}",
                f.kind,
                f.message.lines().next().unwrap_or("")
            );
            f.code
        }
    }
}

fn run_inner(args: Vec<OsString>) -> CmdResult<i32> {
    let args = merge_config_file(args)?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(EXIT_OK);
            }
            let text = e.to_string();
            let line: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            return Err(usage(
                line.join(" ").trim_start_matches("error: ").to_string(),
            ));
        }
    };
    let pool = thread_pool()?;
    let (out, report) = pool.install(|| execute(&cli.command))?;
    write_output(out, &report.body)?;
    Ok(report.code)
}

fn thread_pool() -> CmdResult<rayon::ThreadPool> {
    let threads = match std::env::var("CLOCKSIM_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            usage(format!(
                "CLOCKSIM_THREADS must be a non-negative integer, got '{v}'"
            ))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure {
            code: EXIT_NUMERICAL,
            kind: "thread-pool",
            message: e.to_string(),
        })
}

/// Splices the entries of a `--config` file in front of the subcommand's own
/// flags, so that flags given explicitly override the file.
fn merge_config_file(args: Vec<OsString>) -> CmdResult<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(iter.next().ok_or_else(|| usage("--config needs a file"))?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = fs::read_to_string(&path).map_err(|e| {
        usage(format!(
            "cannot read config file {}: {e}",
            PathBuf::from(&path).display()
        ))
    })?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key == "config" {
            return Err(usage("config files cannot include other config files"));
        }
        match value.trim() {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            v => injected.push(OsString::from(format!("--{key}={v}"))),
        }
    }
    let subcommands: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let pos = rest
        .iter()
        .position(|a| subcommands.iter().any(|s| a.to_string_lossy() == *s))
        .ok_or_else(|| usage("a subcommand is required"))?;
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

fn write_output(out: &OutputArgs, body: &str) -> CmdResult<()> {
    match &out.output {
        Some(path) => fs::write(path, body)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| usage(format!("cannot write to stdout: {e}")))
        }
    }
}

fn execute(cmd: &Command) -> CmdResult<(&OutputArgs, Report)> {
    Ok(match cmd {
        Command::Signal(a) => (&a.out, cmd_signal(a)?),
        Command::Scan(a) => (&a.out, cmd_scan(a)?),
        Command::Optimize(a) => (&a.out, cmd_optimize(a)?),
        Command::Qfi(a) => (&a.out, cmd_qfi(a)?),
    })
}

/// 17 significant digits, `nan` for missing values.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn csv_preamble(params: &[(&str, String)]) -> String {
    let mut line = String::from("#");
    for (k, v) in params {
        let _ = write!(line, " {k}={v};");
    }
    let _ = writeln!(line, " convention: {CONVENTION}");
    line
}

fn json_report(command: &str, parameters: Value, body: Value) -> String {
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "convention": CONVENTION,
        "parameters": parameters,
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

fn check_finite(name: &str, v: f64) -> CmdResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be finite")))
    }
}

fn check_non_negative(name: &str, v: f64) -> CmdResult<()> {
    check_finite(name, v)?;
    if v < 0.0 {
        return Err(usage(format!("--{name} must be >= 0, got {v}")));
    }
    Ok(())
}

fn linear_grid(t_min: f64, t_max: f64, steps: usize) -> CmdResult<Vec<f64>> {
    check_finite("t-min", t_min)?;
    check_finite("t-max", t_max)?;
    if steps == 0 {
        return Err(usage("--t-steps must be at least 1"));
    }
    if t_max < t_min {
        return Err(usage("--t-max must not be below --t-min"));
    }
    if steps == 1 {
        return Ok(vec![t_min]);
    }
    let h = (t_max - t_min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                t_max
            } else {
                t_min + h * i as f64
            }
        })
        .collect())
}

fn cmd_signal(a: &SignalArgs) -> CmdResult<Report> {
    let scheme: Scheme = a.scheme.parse()?;
    if !matches!(scheme, Scheme::Uncorrelated | Scheme::Ghz) {
        return Err(usage(format!(
            "signal supports the uncorrelated and ghz schemes, not {scheme}"
        )));
    }
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    check_non_negative("gamma", a.gamma)?;
    check_finite("detuning", a.detuning)?;
    let grid = &a.grid;
    let ts = match (a.t.is_empty(), grid.t_min, grid.t_max, grid.t_steps) {
        (false, None, None, None) => a.t.clone(),
        (true, Some(lo), Some(hi), Some(steps)) => linear_grid(lo, hi, steps)?,
        _ => {
            return Err(usage(
                "give either --t or all of --t-min, --t-max, --t-steps",
            ))
        }
    };
    for &t in &ts {
        check_non_negative("t", t)?;
    }
    let p = |t: f64| match scheme {
        Scheme::Ghz => signal_ghz(a.n, a.detuning, t, a.gamma),
        _ => signal_uncorrelated(a.detuning, t, a.gamma),
    };
    let body = match a.out.format {
        Format::Csv => {
            let mut s = csv_preamble(&[("n", a.n.to_string())]);
            s.push_str("t,delta,gamma,scheme,P\n");
            for &t in &ts {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    fmt_float(t),
                    fmt_float(a.detuning),
                    fmt_float(a.gamma),
                    scheme,
                    fmt_float(p(t))
                );
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = ts
                .iter()
                .map(|&t| json!({"t": t, "delta": a.detuning, "gamma": a.gamma, "scheme": scheme, "P": p(t)}))
                .collect();
            json_report(
                "signal",
                json!({"n": a.n, "scheme": scheme, "gamma": a.gamma, "detuning": a.detuning}),
                json!({ "rows": rows }),
            )
        }
    };
    Ok(Report {
        body,
        code: EXIT_OK,
    })
}

fn cmd_scan(a: &ScanArgs) -> CmdResult<Report> {
    check_finite("gamma", a.gamma)?;
    check_finite("total-time", a.total_time)?;
    if !(a.t_min.is_finite() && a.t_min > 0.0) {
        return Err(usage(format!("--t-min must be positive, got {}", a.t_min)));
    }
    let grid = linear_grid(a.t_min, a.t_max, a.t_steps)?;
    let lock = match a.detuning {
        Some(d) => {
            check_finite("detuning", d)?;
            PhaseLock::Fixed(d)
        }
        None => PhaseLock::Optimal,
    };
    let rows = fig3_scan(a.n, a.gamma, a.total_time, &grid, lock)?;
    for r in &rows {
        if r.delta_omega_uncorrelated.is_nan() || r.delta_omega_ghz.is_nan() {
            eprintln!(
                "warning: singular point at t={}, value set to nan",
                fmt_float(r.t)
            );
        }
    }
    let detuning = a.detuning.map_or("locked".to_string(), fmt_float);
    let body = match a.out.format {
        Format::Csv => {
            let mut s = csv_preamble(&[
                ("n", a.n.to_string()),
                ("gamma", fmt_float(a.gamma)),
                ("total_time", fmt_float(a.total_time)),
                ("detuning", detuning),
            ]);
            s.push_str("t,delta_omega_uncorrelated,delta_omega_ghz\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_float(r.t),
                    fmt_float(r.delta_omega_uncorrelated),
                    fmt_float(r.delta_omega_ghz)
                );
            }
            s
        }
        Format::Json => json_report(
            "scan",
            json!({"n": a.n, "gamma": a.gamma, "total_time": a.total_time, "detuning": a.detuning}),
            json!({ "rows": rows }),
        ),
    };
    Ok(Report {
        body,
        code: EXIT_OK,
    })
}

/// Outcome of one (n, method) cell of an optimize run.
struct OptimizeCell {
    n: usize,
    method: Method,
    outcome: Result<SymmetricOptimum>,
}

fn cmd_optimize(a: &OptimizeArgs) -> CmdResult<Report> {
    let methods: Vec<Method> = match a.method.as_str() {
        "both" => vec![Method::GenRamsey, Method::Qfi],
        m => vec![m.parse()?],
    };
    if a.n_min > a.n_max {
        return Err(usage("--n-min must not exceed --n-max"));
    }
    if a.n_min < MIN_IONS || a.n_max > MAX_IONS {
        return Err(usage(format!(
            "the ion count range must lie within {MIN_IONS}..={MAX_IONS}"
        )));
    }
    check_finite("gamma", a.gamma)?;
    check_finite("total-time", a.total_time)?;
    let cfg = OptimizerConfig {
        restarts: a.restarts,
        seed: a.seed,
        tol_obj: a.tol_obj,
        tol_x: a.tol_x,
        max_iter: a.max_iter,
    };
    cfg.validate()?;
    check_optimum_regime(a.total_time, a.gamma)?;

    let cells: Vec<OptimizeCell> = if methods.len() == 2 {
        fig4_curve(a.n_min..=a.n_max, a.gamma, a.total_time, &cfg)?
            .into_iter()
            .flat_map(|entry| {
                let n = entry.n;
                match entry.outcome {
                    Ok(p) => vec![
                        OptimizeCell {
                            n,
                            method: Method::GenRamsey,
                            outcome: Ok(p.genramsey),
                        },
                        OptimizeCell {
                            n,
                            method: Method::Qfi,
                            outcome: Ok(p.qfi),
                        },
                    ],
                    Err(e) => methods
                        .iter()
                        .map(|&method| OptimizeCell {
                            n,
                            method,
                            outcome: Err(e.clone()),
                        })
                        .collect(),
                }
            })
            .collect()
    } else {
        (a.n_min..=a.n_max)
            .map(|n| OptimizeCell {
                n,
                method: methods[0],
                outcome: optimize_symmetric_coeffs(n, a.gamma, a.total_time, methods[0], &cfg),
            })
            .collect()
    };

    let succeeded = cells.iter().filter(|c| c.outcome.is_ok()).count();
    for c in &cells {
        if let Err(e) = &c.outcome {
            eprintln!(
                "warning: n={} method={} failed: {}: {}",
                c.n,
                c.method,
                e.kind(),
                e
            );
        }
    }
    let code = if succeeded > 0 {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    };
    let body = match a.out.format {
        Format::Csv => {
            let mut s = csv_preamble(&[
                ("gamma", fmt_float(a.gamma)),
                ("total_time", fmt_float(a.total_time)),
                ("seed", a.seed.to_string()),
                ("restarts", a.restarts.to_string()),
            ]);
            s.push_str("n,method,improvement_pct,t_opt,coeffs\n");
            for c in &cells {
                match &c.outcome {
                    Ok(o) => {
                        let coeffs: Vec<String> = o.coeffs.iter().map(|&x| fmt_float(x)).collect();
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{}",
                            c.n,
                            c.method,
                            fmt_float(o.improvement_pct),
                            fmt_float(o.t_opt),
                            coeffs.join(";")
                        );
                    }
                    Err(_) => {
                        let _ = writeln!(s, "{},{},nan,nan,status=failed", c.n, c.method);
                    }
                }
            }
            s
        }
        Format::Json => {
            let points: Vec<Value> = cells
                .iter()
                .map(|c| match &c.outcome {
                    Ok(o) => json!({"n": c.n, "method": c.method, "status": "ok", "optimum": o}),
                    Err(e) => json!({"n": c.n, "method": c.method, "status": "failed",
                                     "error": {"kind": e.kind(), "message": e.to_string()}}),
                })
                .collect();
            json_report(
                "optimize",
                json!({"n_min": a.n_min, "n_max": a.n_max, "method": a.method, "gamma": a.gamma,
                       "total_time": a.total_time, "optimizer": cfg}),
                json!({ "points": points }),
            )
        }
    };
    Ok(Report { body, code })
}

fn parse_coeffs(s: &str) -> CmdResult<Vec<f64>> {
    s.split([';', ','])
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad coefficient '{v}'")))
        })
        .collect()
}

fn cmd_qfi(a: &QfiArgs) -> CmdResult<Report> {
    if !(1..=MAX_QUBITS).contains(&a.n) {
        return Err(usage(format!("--n must lie in 1..={MAX_QUBITS}")));
    }
    let state = match (&a.scheme, &a.coeffs) {
        (Some(s), None) => match s.parse::<Scheme>()? {
            Scheme::Uncorrelated => SymmetricFamilyState::uncorrelated(a.n)?,
            Scheme::Ghz => SymmetricFamilyState::ghz(a.n)?,
            other => return Err(usage(format!("--scheme {other} needs explicit --coeffs"))),
        },
        (None, Some(c)) => SymmetricFamilyState::normalized(a.n, &parse_coeffs(c)?)?,
        _ => return Err(usage("give exactly one of --scheme and --coeffs")),
    };
    check_non_negative("gamma", a.gamma)?;
    check_finite("detuning", a.detuning)?;
    check_finite("total-time", a.total_time)?;
    if let Some(t) = a.t {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage("--t must be positive"));
        }
        if t > a.total_time {
            return Err(usage("--t must not exceed --total-time"));
        }
    } else if !a.optimize_t {
        return Err(usage("give --t, --optimize-t, or both"));
    }
    if a.t.is_some() && a.n > PIPELINE_MAX_QUBITS {
        return Err(usage(format!(
            "fixed-t reports use dense matrices, limited to n <= {PIPELINE_MAX_QUBITS}"
        )));
    }
    if a.optimize_t {
        check_optimum_regime(a.total_time, a.gamma)?;
    }

    let mut fields = serde_json::Map::new();
    let mut csv_cols: Vec<(&str, f64)> = Vec::new();
    if let Some(t) = a.t {
        let rho0 = DensityMatrix::from(&state.to_state());
        let p = DephasingParams::new(a.detuning, a.gamma, t)?;
        let r = qfi(&dephase_evolve(&rho0, &p), &drho_ddelta(&rho0, &p))?;
        let unc = qfi_uncertainty(r.qfi, a.total_time, t)?;
        fields.insert("t".into(), json!(t));
        fields.insert("qfi".into(), json!(r.qfi));
        fields.insert("classical_fi".into(), json!(r.classical_fi_check));
        fields.insert("qfi_uncertainty".into(), json!(unc));
        csv_cols.extend([
            ("t", t),
            ("qfi", r.qfi),
            ("classical_fi", r.classical_fi_check),
            ("qfi_uncertainty", unc),
        ]);
    }
    if a.optimize_t {
        let sectors = SectorBasis::new(a.n);
        let profile = SymmetricQfiProfile::new(&sectors, &state);
        let (t_opt, unc) = minimize_qfi_uncertainty(
            |t| profile.qfi(a.gamma, t),
            a.n,
            a.total_time,
            a.gamma,
            &OptimizerConfig::default(),
        )?;
        let reference = reference_limit(a.n, a.total_time, a.gamma);
        fields.insert(
            "optimized".into(),
            json!({"t_opt": t_opt, "qfi_uncertainty": unc, "reference": reference,
                   "improvement_pct": improvement_pct(unc, reference)}),
        );
        csv_cols.extend([
            ("t_opt", t_opt),
            ("qfi_uncertainty_opt", unc),
            ("reference", reference),
        ]);
    }

    let body = match a.out.format {
        Format::Csv => {
            let mut s = csv_preamble(&[
                ("n", a.n.to_string()),
                ("gamma", fmt_float(a.gamma)),
                ("detuning", fmt_float(a.detuning)),
                ("total_time", fmt_float(a.total_time)),
            ]);
            let mut header: Vec<&str> = csv_cols.iter().map(|c| c.0).collect();
            header.push("coeffs");
            let mut values: Vec<String> = csv_cols.iter().map(|c| fmt_float(c.1)).collect();
            values.push(
                state
                    .coeffs()
                    .iter()
                    .map(|&x| fmt_float(x))
                    .collect::<Vec<_>>()
                    .join(";"),
            );
            let _ = writeln!(s, "{}\n{}", header.join(","), values.join(","));
            s
        }
        Format::Json => json_report(
            "qfi",
            json!({"n": a.n, "coeffs": state.coeffs(), "gamma": a.gamma, "detuning": a.detuning,
                   "total_time": a.total_time, "t": a.t, "optimize_t": a.optimize_t}),
            Value::Object(fields),
        ),
    };
    Ok(Report {
        body,
        code: EXIT_OK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, -7.0, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn grid_endpoints() {
        let g = linear_grid(0.1, 0.3, 3).unwrap();
        assert_eq!(g, vec![0.1, 0.2, 0.3]);
        assert_eq!(linear_grid(0.5, 0.5, 1).unwrap(), vec![0.5]);
        assert!(linear_grid(0.5, 0.4, 3).is_err());
        assert!(linear_grid(0.1, 0.3, 0).is_err());
    }

    #[test]
    fn config_entries_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "# comment\nn = 3\ngamma=0.5\noptimize_t=true\nverbose=false\n",
        )
        .unwrap();
        let args: Vec<OsString> = [
            "clocksim",
            "qfi",
            "--config",
            path.to_str().unwrap(),
            "--n",
            "4",
        ]
        .iter()
        .map(OsString::from)
        .collect();
        let merged = merge_config_file(args).unwrap();
        let merged: Vec<String> = merged
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            merged,
            [
                "clocksim",
                "qfi",
                "--n=3",
                "--gamma=0.5",
                "--optimize-t",
                "--n",
                "4"
            ]
        );
        let cli = Cli::try_parse_from(&merged).unwrap();
        match cli.command {
            Command::Qfi(q) => {
                assert_eq!(q.n, 4);
                assert_eq!(q.gamma, 0.5);
                assert!(q.optimize_t);
            }
            other => panic!("parsed {other:?}"),
        }
    }
}
