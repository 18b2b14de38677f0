//! Command-line front end.
//!
//! Every command prints one artifact (CSV or JSON) to stdout, or writes it
//! to `--out`. A relative `--out` is resolved against `$EPR_HBT_OUTPUT_DIR`
//! when that variable is set; with the variable set and no `--out`, the
//! artifact goes to `<dir>/<command>.<ext>`.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid flags,
//! 3 unphysical parameters, 4 oracle tolerance failure, 5 fit failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Error;
use crate::experiment::{
    decide_entanglement, fit_visibility, simulate_fringe_counts, uniform_phases, CountRecord,
};
use crate::fock::{hbt_correlation_exact, moment_exact, oracle_state, DEFAULT_TAIL_TOL};
use crate::hbt::{hbt_correlation, visibility, witness_mean, CLASSICAL_BOUND};
use crate::hom::{dip_scan, linspace};
use crate::moments::{fourth_order_set, OperatorWord};
use crate::state::{classify, pure_mc, EprParams, StateClass, PURITY_TOL};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "EPR_HBT_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_FLAGS: i32 = 2;
pub const EXIT_UNPHYSICAL: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;
pub const EXIT_FIT: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "epr-hbt",
    version,
    about = "Second-order interference of continuous-variable EPR states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separability class, visibility and witness mean of one state (JSON).
    Classify {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Visibility as a function of |mc| from 0 to the pure-state value.
    VisibilityScan {
        #[arg(long, allow_negative_numbers = true)]
        nbar: f64,
        /// Number of grid points; the border point |mc| = nbar is always added.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Coincidence probability p(T) across the HOM dip. Without --mc/--mc2
    /// the border (|mc| = nbar) and pure curves are both emitted.
    HomDip {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 601)]
        steps: usize,
        #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
        t_min: f64,
        #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
        t_max: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// HBT witness mean and verdict (JSON).
    Witness {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Closed forms against the truncated Fock-space oracle (JSON). Without
    /// --nbar the standard six-state grid is checked.
    OracleCheck {
        #[command(flatten)]
        state: OptionalStateArgs,
        /// Number of phase differences on [0, 2 pi).
        #[arg(long, default_value_t = 12)]
        phases: usize,
        #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
        tail_tol: f64,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Poisson-sampled fringe counts, fitted visibility and verdict.
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        /// Number of phase differences on [0, 2 pi).
        #[arg(long, default_value_t = 24)]
        phases: usize,
        #[arg(long, default_value_t = 1e4)]
        mean_counts: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        k_sigma: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct StateArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub nbar: f64,
    /// Correlation |mc| (repeatable for hom-dip).
    #[arg(long, allow_negative_numbers = true, conflicts_with = "mc2")]
    pub mc: Vec<f64>,
    /// Squared correlation |mc|^2 (repeatable for hom-dip).
    #[arg(long)]
    pub mc2: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OptionalStateArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub nbar: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "mc2")]
    pub mc: Vec<f64>,
    #[arg(long)]
    pub mc2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID_FLAGS,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unphysical { .. } => EXIT_UNPHYSICAL,
            Error::InvalidParameter(_) | Error::DegenerateState | Error::EmptyInput(_) => {
                EXIT_INVALID_FLAGS
            }
            Error::ParseWord(_) | Error::NotNormalOrdered(_) | Error::WordTooLong { .. } => {
                EXIT_INVALID_FLAGS
            }
            Error::Truncation(_) | Error::Consistency(_) => EXIT_ORACLE,
            Error::Fit(_) => EXIT_FIT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// One emitted file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub extension: &'static str,
    pub contents: String,
}

/// What a command produced: the main artifact, an optional companion
/// (written next to `--out`, or to stderr when printing to stdout), and the
/// exit code to report after emitting them.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub primary: Artifact,
    pub companion: Option<Artifact>,
    pub code: i32,
}

impl Outcome {
    fn ok(primary: Artifact) -> Self {
        Self {
            primary,
            companion: None,
            code: EXIT_OK,
        }
    }
}

fn csv(contents: String) -> Artifact {
    Artifact {
        extension: "csv",
        contents,
    }
}

fn json_artifact(value: &Value) -> Artifact {
    let mut contents = serde_json::to_string_pretty(value).expect("JSON values serialize");
    contents.push('\n');
    Artifact {
        extension: "json",
        contents,
    }
}

/// Rounds to 12 significant digits, then prints the shortest decimal
/// that reads back to the rounded value.
pub fn format_sig12(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// CSV with header `setting,expected_rate,counts`.
pub fn count_records_csv(records: &[CountRecord]) -> String {
    let mut out = String::from("setting,expected_rate,counts\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_sig12(r.setting),
            format_sig12(r.expected_rate),
            r.counts
        );
    }
    out
}

fn check_finite(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::invalid(format!(
            "--{name} must be finite, got {x}"
        )))
    }
}

fn params_list(nbar: f64, mc: &[f64], mc2: &[f64]) -> Result<Vec<EprParams>, CliError> {
    check_finite("nbar", nbar)?;
    if nbar < 0.0 {
        return Err(CliError::invalid(format!(
            "--nbar must be >= 0, got {nbar}"
        )));
    }
    let mut out = Vec::new();
    for &m in mc {
        out.push(EprParams::real(nbar, check_finite("mc", m)?)?);
    }
    for &m2 in mc2 {
        if m2 < 0.0 {
            return Err(CliError::invalid(format!("--mc2 must be >= 0, got {m2}")));
        }
        out.push(EprParams::from_mc_squared(nbar, check_finite("mc2", m2)?)?);
    }
    Ok(out)
}

fn single_params(state: &StateArgs) -> Result<EprParams, CliError> {
    let list = params_list(state.nbar, &state.mc, &state.mc2)?;
    match list.as_slice() {
        [one] => Ok(*one),
        [] => Err(CliError::invalid("one of --mc or --mc2 is required")),
        _ => Err(CliError::invalid(
            "this command takes a single --mc or --mc2 value",
        )),
    }
}

fn json_only(output: &OutputArgs) -> Result<(), CliError> {
    match output.format {
        Some(Format::Csv) => Err(CliError::invalid("this command only emits JSON")),
        _ => Ok(()),
    }
}

fn opt(x: Result<f64, Error>) -> Value {
    x.map(Value::from).unwrap_or(Value::Null)
}

fn run_classify(state: &StateArgs, output: &OutputArgs) -> Result<Outcome, CliError> {
    json_only(output)?;
    let params = single_params(state)?;
    let class = classify(&params, PURITY_TOL)?;
    let physical = class != StateClass::Unphysical;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "nbar": params.nbar(),
        "mc": params.mc_abs(),
        "class": class.to_string(),
        "pure_mc": pure_mc(params.nbar())?,
        "visibility": if physical { opt(visibility(&params)) } else { Value::Null },
        "witness_mean": if physical { opt(witness_mean(&params).map(|w| w.value)) } else { Value::Null },
    });
    Ok(Outcome {
        primary: json_artifact(&value),
        companion: None,
        code: if physical { EXIT_OK } else { EXIT_UNPHYSICAL },
    })
}

/// `|mc|` grid on `[0, pure_mc]` with the separability border inserted.
pub fn visibility_grid(nbar: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps < 2 {
        return Err(CliError::invalid(format!(
            "--steps must be >= 2, got {steps}"
        )));
    }
    let top = pure_mc(nbar)?;
    let mut grid = linspace(0.0, top, steps);
    if !grid.contains(&nbar) {
        let pos = grid.partition_point(|&m| m < nbar);
        grid.insert(pos, nbar);
    }
    Ok(grid)
}

fn run_visibility_scan(nbar: f64, steps: usize, output: &OutputArgs) -> Result<Outcome, CliError> {
    check_finite("nbar", nbar)?;
    if nbar <= 0.0 {
        return Err(CliError::invalid(format!(
            "--nbar must be > 0 for a scan, got {nbar}"
        )));
    }
    let grid = visibility_grid(nbar, steps)?;
    let values = grid
        .iter()
        .map(|&m| visibility(&EprParams::real(nbar, m)?))
        .collect::<Result<Vec<_>, Error>>()?;
    let top = pure_mc(nbar)?;

    let artifact = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# schema_version={SCHEMA_VERSION}");
            let _ = writeln!(out, "# nbar={nbar}");
            let _ = writeln!(out, "# pure_mc={top}");
            let _ = writeln!(out, "# classical_bound={CLASSICAL_BOUND}");
            let _ = writeln!(out, "# separability_border_mc={nbar}");
            out.push_str("mc,visibility\n");
            for (m, v) in grid.iter().zip(&values) {
                let _ = writeln!(out, "{m},{v}");
            }
            csv(out)
        }
        Format::Json => json_artifact(&json!({
            "schema_version": SCHEMA_VERSION,
            "nbar": nbar,
            "pure_mc": top,
            "classical_bound": CLASSICAL_BOUND,
            "separability_border_mc": nbar,
            "mc": grid,
            "visibility": values,
        })),
    };
    Ok(Outcome::ok(artifact))
}

fn run_hom_dip(
    state: &StateArgs,
    steps: usize,
    t_min: f64,
    t_max: f64,
    output: &OutputArgs,
) -> Result<Outcome, CliError> {
    check_finite("t-min", t_min)?;
    check_finite("t-max", t_max)?;
    if t_min >= t_max {
        return Err(CliError::invalid(format!(
            "need --t-min < --t-max, got {t_min} >= {t_max}"
        )));
    }
    if steps < 2 {
        return Err(CliError::invalid(format!(
            "--steps must be >= 2, got {steps}"
        )));
    }
    let mut list = params_list(state.nbar, &state.mc, &state.mc2)?;
    if list.is_empty() {
        list = vec![
            EprParams::real(state.nbar, state.nbar)?,
            EprParams::pure(state.nbar)?,
        ];
    }
    let curves = list
        .iter()
        .map(|p| dip_scan(p, t_min, t_max, steps))
        .collect::<Result<Vec<_>, Error>>()?;

    let artifact = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("T");
            if list.len() == 1 {
                out.push_str(",p");
            } else {
                for p in &list {
                    let _ = write!(out, ",p_mc={}", p.mc_abs());
                }
            }
            out.push('\n');
            for (i, t) in curves[0].times.iter().enumerate() {
                let _ = write!(out, "{t}");
                for c in &curves {
                    let _ = write!(out, ",{}", c.values[i]);
                }
                out.push('\n');
            }
            csv(out)
        }
        Format::Json => json_artifact(&json!({
            "schema_version": SCHEMA_VERSION,
            "nbar": state.nbar,
            "curves": list.iter().zip(&curves).map(|(p, c)| json!({
                "mc": p.mc_abs(),
                "T": c.times,
                "p": c.values,
            })).collect::<Vec<_>>(),
        })),
    };
    Ok(Outcome::ok(artifact))
}

fn run_witness(state: &StateArgs, output: &OutputArgs) -> Result<Outcome, CliError> {
    json_only(output)?;
    let params = single_params(state)?;
    let report = witness_mean(&params)?;
    Ok(Outcome::ok(json_artifact(&json!({
        "schema_version": SCHEMA_VERSION,
        "nbar": params.nbar(),
        "mc": params.mc_abs(),
        "value": report.value,
        "verdict": report.verdict,
    }))))
}

/// The six states covering separable, border, mixed-entangled and pure cases.
pub fn oracle_grid() -> Vec<EprParams> {
    [
        (1.0, 0.0),
        (1.0, 1.0),
        (1.0, 1.2),
        (1.0, 2f64.sqrt()),
        (0.1, 0.1),
        (0.1, 0.11f64.sqrt()),
    ]
    .iter()
    .map(|&(n, m)| EprParams::real(n, m).expect("grid values are valid"))
    .collect()
}

fn relative_error(analytic: f64, exact: f64) -> f64 {
    let diff = (analytic - exact).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / analytic.abs().max(1e-12)
    }
}

fn run_oracle_check(
    state: &OptionalStateArgs,
    phases: usize,
    tail_tol: f64,
    tolerance: f64,
    output: &OutputArgs,
) -> Result<Outcome, CliError> {
    json_only(output)?;
    if phases == 0 {
        return Err(CliError::invalid("--phases must be >= 1"));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(CliError::invalid(format!(
            "--tail-tol must lie in (0, 1), got {tail_tol}"
        )));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(CliError::invalid(format!(
            "--tolerance must be > 0, got {tolerance}"
        )));
    }
    let list = match state.nbar {
        None if state.mc.is_empty() && state.mc2.is_empty() => oracle_grid(),
        None => return Err(CliError::invalid("--mc/--mc2 need --nbar")),
        Some(nbar) => {
            let list = params_list(nbar, &state.mc, &state.mc2)?;
            if list.is_empty() {
                return Err(CliError::invalid(
                    "one of --mc or --mc2 is required with --nbar",
                ));
            }
            list
        }
    };

    let words = [
        ("<ad ad a a>", "ad ad a a"),
        ("<bd bd b b>", "bd bd b b"),
        ("<ad bd a b>", "ad bd a b"),
    ];
    let mut checks = Vec::new();
    let mut max_err = 0.0f64;
    for params in &list {
        params.ensure_physical()?;
        let fock = oracle_state(params, tail_tol)?;
        let f = fourth_order_set(params)?;
        let mut push = |quantity: String, analytic: f64, exact: f64| {
            let err = relative_error(analytic, exact);
            max_err = max_err.max(err);
            checks.push(json!({
                "nbar": params.nbar(),
                "mc": params.mc_abs(),
                "quantity": quantity,
                "analytic": analytic,
                "exact": exact,
                "rel_error": err,
            }));
        };
        for ((label, word), analytic) in words.iter().zip([f.aa, f.bb, f.ab]) {
            let w: OperatorWord = word.parse()?;
            push(label.to_string(), analytic, moment_exact(&fock, &w)?.re);
        }
        for dphi in uniform_phases(phases) {
            let analytic = hbt_correlation(params, dphi, 0.0)?;
            let exact = hbt_correlation_exact(&fock, dphi, 0.0)?;
            push(format!("hbt(dphi={dphi})"), analytic, exact);
        }
    }
    let passed = max_err <= tolerance;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "tail_tol": tail_tol,
        "tolerance": tolerance,
        "checks": checks,
        "max_rel_error": max_err,
        "passed": passed,
    });
    Ok(Outcome {
        primary: json_artifact(&value),
        companion: None,
        code: if passed { EXIT_OK } else { EXIT_ORACLE },
    })
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    state: &StateArgs,
    phases: usize,
    mean_counts: f64,
    seed: u64,
    k_sigma: f64,
    output: &OutputArgs,
) -> Result<Outcome, CliError> {
    let params = single_params(state)?;
    if phases < 3 {
        return Err(CliError::invalid(format!(
            "--phases must be >= 3, got {phases}"
        )));
    }
    if !(mean_counts.is_finite() && mean_counts > 0.0) {
        return Err(CliError::invalid(format!(
            "--mean-counts must be > 0, got {mean_counts}"
        )));
    }
    if !(k_sigma.is_finite() && k_sigma > 0.0) {
        return Err(CliError::invalid(format!(
            "--k-sigma must be > 0, got {k_sigma}"
        )));
    }
    let run = simulate_fringe_counts(&params, &uniform_phases(phases), mean_counts, seed)?;
    let estimate = fit_visibility(&run)?;
    let verdict = decide_entanglement(&estimate, k_sigma)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "nbar": params.nbar(),
        "mc": params.mc_abs(),
        "true_visibility": visibility(&params)?,
        "mean_counts": mean_counts,
        "k_sigma": k_sigma,
        "estimate": estimate,
        "verdict": verdict,
    });
    let outcome = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => Outcome {
            primary: csv(count_records_csv(&run.records)),
            companion: Some(json_artifact(&summary)),
            code: EXIT_OK,
        },
        Format::Json => {
            let mut all = summary;
            all["records"] = serde_json::to_value(&run.records).expect("records serialize");
            Outcome::ok(json_artifact(&all))
        }
    };
    Ok(outcome)
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Classify { .. } => "classify",
        Command::VisibilityScan { .. } => "visibility-scan",
        Command::HomDip { .. } => "hom-dip",
        Command::Witness { .. } => "witness",
        Command::OracleCheck { .. } => "oracle-check",
        Command::Simulate { .. } => "simulate",
    }
}

fn output_args(command: &Command) -> &OutputArgs {
    match command {
        Command::Classify { output, .. }
        | Command::VisibilityScan { output, .. }
        | Command::HomDip { output, .. }
        | Command::Witness { output, .. }
        | Command::OracleCheck { output, .. }
        | Command::Simulate { output, .. } => output,
    }
}

/// Runs a parsed command without touching the filesystem.
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Classify { state, output } => run_classify(state, output),
        Command::VisibilityScan {
            nbar,
            steps,
            output,
        } => run_visibility_scan(*nbar, *steps, output),
        Command::HomDip {
            state,
            steps,
            t_min,
            t_max,
            output,
        } => run_hom_dip(state, *steps, *t_min, *t_max, output),
        Command::Witness { state, output } => run_witness(state, output),
        Command::OracleCheck {
            state,
            phases,
            tail_tol,
            tolerance,
            output,
        } => run_oracle_check(state, *phases, *tail_tol, *tolerance, output),
        Command::Simulate {
            state,
            phases,
            mean_counts,
            seed,
            k_sigma,
            output,
        } => run_simulate(state, *phases, *mean_counts, *seed, *k_sigma, output),
    }
}

/// Where the primary artifact goes, or `None` for stdout.
pub fn resolve_output(
    out: Option<&Path>,
    env_dir: Option<&Path>,
    default_name: &str,
) -> Option<PathBuf> {
    match (out, env_dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(dir.join(default_name)),
        (None, None) => None,
    }
}

fn companion_path(primary: &Path, extension: &str) -> PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    primary.with_file_name(format!("{stem}.summary.{extension}"))
}

fn emit(command: &Command, outcome: &Outcome) -> std::io::Result<()> {
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    let default_name = format!("{}.{}", command_name(command), outcome.primary.extension);
    match resolve_output(
        output_args(command).out.as_deref(),
        env_dir.as_deref(),
        &default_name,
    ) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, &outcome.primary.contents)?;
            if let Some(extra) = &outcome.companion {
                std::fs::write(companion_path(&path, extra.extension), &extra.contents)?;
            }
        }
        None => {
            print!("{}", outcome.primary.contents);
            if let Some(extra) = &outcome.companion {
                eprint!("{}", extra.contents);
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command, emits its artifacts and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID_FLAGS
            } else {
                EXIT_OK
            };
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => match emit(&cli.command, &outcome) {
            Ok(()) => outcome.code,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILURE
            }
        },
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
