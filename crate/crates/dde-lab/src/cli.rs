//! Command-line surface: every analysis in the crate as a reproducible,
//! file-emitting subcommand.
//!
//! Conventions shared by all subcommands:
//!
//! - Every run writes its fully resolved configuration next to its output
//!   (`<output>.config.json`, or `config.json` inside a sweep directory), so
//!   any artifact can be regenerated from the sidecar alone.
//! - All floating-point output is formatted with 15 significant digits and
//!   lowercase e-notation (see [`crate::format::sig15`]), in CSV fields and
//!   JSON numbers alike; two runs with identical configuration and seed
//!   produce byte-identical files.
//! - Exit codes: `0` success; `2` invalid configuration (machine-readable
//!   JSON error report on stderr); `3` domain error propagated from the
//!   numerics (report on stderr); `1` I/O failure.
//! - `DDE_LAB_THREADS` bounds the worker pool used by ensemble probes.
//! - Grid arguments use `START:END:N` = `N` uniform subdivisions, `N + 1`
//!   points including both endpoints.  Sweep configs instead give explicit
//!   point counts (see [`AxisSpec`]).

use crate::dde_solver::{
    default_ensemble, estimate_hc_report, integrate, probe_global_stability, History, Verdict,
};
use crate::format::sig15;
use crate::fundamental_solution::{decay_envelope, fundamental_exact, fundamental_numeric};
use crate::quasipoly::{linspace, roots_in_strips, QuasiPoly};
use crate::scalar_maps::{attractor_interval, check_hypotheses, Nonlinearity};
use crate::stability_regions::{chart, classify_point, RegionLabel};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

const PRECISION_DIGITS: u32 = 15;

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or flag values; exit code 2.
    Config(String),
    /// Valid configuration outside the numerical domain; exit code 3.
    Domain(String),
    /// Filesystem failure; exit code 1.
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Domain(_) => "domain",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn domain_err(err: impl std::fmt::Display) -> CliError {
    CliError::Domain(err.to_string())
}

fn io_err(context: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {err}"))
}

// ---------------------------------------------------------------------------
// Flag value types
// ---------------------------------------------------------------------------

/// `START:END:N`: `N` uniform subdivisions (N + 1 points, both endpoints
/// included).
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid '{s}' must have the form START:END:N"));
        }
        let start: f64 = parts[0]
            .parse()
            .map_err(|e| format!("grid start '{}': {e}", parts[0]))?;
        let end: f64 = parts[1]
            .parse()
            .map_err(|e| format!("grid end '{}': {e}", parts[1]))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|e| format!("grid count '{}': {e}", parts[2]))?;
        if !start.is_finite() || !end.is_finite() || !(end > start) {
            return Err(format!("grid '{s}' needs finite START < END"));
        }
        if n == 0 {
            return Err(format!("grid '{s}' needs at least one subdivision"));
        }
        Ok(GridSpec { start, end, n })
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.end, self.n + 1)
    }
}

/// `LO:HI` window.
#[derive(Clone, Debug)]
pub struct WindowSpec {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for WindowSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 2 {
            return Err(format!("window '{s}' must have the form LO:HI"));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|e| format!("window low end '{}': {e}", parts[0]))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|e| format!("window high end '{}': {e}", parts[1]))?;
        if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
            return Err(format!("window '{s}' needs finite LO < HI"));
        }
        Ok(WindowSpec { lo, hi })
    }
}

/// Feedback families selectable on the command line.  Only the canonical
/// `-tanh` feedback is exposed; the named population models enter through
/// the library's normalization API rather than the CLI.
#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum FamilyArg {
    Tanh,
}

impl FamilyArg {
    fn nonlinearity(&self) -> Nonlinearity {
        match self {
            FamilyArg::Tanh => Nonlinearity::tanh(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FamilyArg::Tanh => "tanh",
        }
    }
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum FundMethod {
    Exact,
    Numeric,
    Both,
}

// ---------------------------------------------------------------------------
// Command definitions
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "dde-lab",
    version,
    about = "Numerical laboratory for x'(t) = -x(t) + zeta f(x(t - h))",
    disable_help_subcommand = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Stability-chart curves nu1, nu2, nu3 over a mu grid (CSV).
    Chart(ChartArgs),
    /// Characteristic roots in the lowest strips, dominant root marked (JSON).
    Spectrum(SpectrumArgs),
    /// Fundamental solution v(t) by exact recurrence and/or integration (CSV).
    Fundsol(FundsolArgs),
    /// Decay-envelope constant for the fundamental solution (JSON).
    Envelope(EnvelopeArgs),
    /// One trajectory from a prescribed initial history (CSV).
    Simulate(SimulateArgs),
    /// Ensemble global-stability probe at one parameter point (JSON).
    Probe(ProbeArgs),
    /// Probe every cell of a parameter grid; reports plus summary (directory).
    Sweep(SweepArgs),
    /// Attracting interval / 2-cycle of the map x -> zeta f(x) (JSON).
    Attractor(AttractorArgs),
    /// Check the structural feedback hypotheses on a window (JSON).
    Hypotheses(HypothesesArgs),
    /// Bisect for the empirical global-stability delay threshold (JSON).
    Hc(HcArgs),
}

#[derive(Args, Debug)]
pub struct ChartArgs {
    /// Grid of mu = 1/zeta values, START:END:N (domain [0, 1)).
    #[arg(long = "mu-grid")]
    pub mu_grid: GridSpec,
    /// Output CSV path (header `mu,nu1,nu2,nu3`).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// Delay h (>= 1 for strip-confined root finding).
    #[arg(long = "h")]
    pub h: f64,
    /// Gain zeta.
    #[arg(long)]
    pub zeta: f64,
    /// Highest strip index; strips 0..=kmax are searched.
    #[arg(long, default_value_t = 2)]
    pub kmax: usize,
    /// Residual tolerance for accepted roots.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output JSON path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct FundsolArgs {
    /// Delay h.
    #[arg(long = "h")]
    pub h: f64,
    /// Gain of the delayed term (v' = -v - zeta v(t - h)).
    #[arg(long, default_value_t = 1.0)]
    pub zeta: f64,
    /// Final time.
    #[arg(long = "t-end")]
    pub t_end: f64,
    /// Number of output subdivisions (N + 1 rows).
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Which evaluation path(s) to tabulate.
    #[arg(long, value_enum, default_value_t = FundMethod::Both)]
    pub method: FundMethod,
    /// Integration tolerance for the numeric path.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output CSV path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnvelopeArgs {
    /// Delay h.
    #[arg(long = "h")]
    pub h: f64,
    /// Gain of the delayed term.
    #[arg(long, default_value_t = 1.0)]
    pub zeta: f64,
    /// Envelope exponent divisor alpha (> 2); rate = pi^2/(alpha h^3).
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f64,
    /// Time horizon for the supremum (default 3 h^3).
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    /// Integration tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Output JSON path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Gain zeta.
    #[arg(long)]
    pub zeta: f64,
    /// Delay h.
    #[arg(long = "h")]
    pub h: f64,
    /// Initial history: const:V | ramp:A:B | sin:AMP:CYCLES | noise:AMP.
    #[arg(long, default_value = "const:1")]
    pub history: String,
    /// Final time.
    #[arg(long = "t-end")]
    pub t_end: f64,
    /// Integration tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Number of output subdivisions (N + 1 rows).
    #[arg(long, default_value_t = 2000)]
    pub grid: usize,
    /// Seed for `noise:` histories.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Feedback family.
    #[arg(long, value_enum, default_value_t = FamilyArg::Tanh)]
    pub family: FamilyArg,
    /// Output CSV path (header `t,x`).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Gain zeta.
    #[arg(long)]
    pub zeta: f64,
    /// Delay h.
    #[arg(long = "h")]
    pub h: f64,
    /// Seed for the rough ensemble members.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integration horizon (default: chosen from the predicted decay rate).
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Convergence amplitude threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Feedback family.
    #[arg(long, value_enum, default_value_t = FamilyArg::Tanh)]
    pub family: FamilyArg,
    /// Output JSON path (probe report).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Sweep configuration JSON (see the shipped sweep_config schema).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (per-cell reports under cells/, plus summary.csv).
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Allow grids above 10^4 cells and overwrite a directory holding a
    /// different sweep.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct AttractorArgs {
    /// Gain zeta.
    #[arg(long)]
    pub zeta: f64,
    /// Cycle residual tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Feedback family.
    #[arg(long, value_enum, default_value_t = FamilyArg::Tanh)]
    pub family: FamilyArg,
    /// Output JSON path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct HypothesesArgs {
    /// Feedback family.
    #[arg(long, value_enum, default_value_t = FamilyArg::Tanh)]
    pub family: FamilyArg,
    /// Sampling window LO:HI.
    #[arg(long, default_value = "-5:5")]
    pub window: WindowSpec,
    /// Number of sample points.
    #[arg(long, default_value_t = 20001)]
    pub samples: usize,
    /// Output JSON path (hypothesis report).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct HcArgs {
    /// Gain zeta.
    #[arg(long)]
    pub zeta: f64,
    /// Lower delay bracket (must converge).
    #[arg(long = "h-lo")]
    pub h_lo: f64,
    /// Upper delay bracket (must not converge).
    #[arg(long = "h-hi")]
    pub h_hi: f64,
    /// Number of bisection steps.
    #[arg(long = "n-bisect", default_value_t = 8)]
    pub n_bisect: usize,
    /// Seed for the rough ensemble members.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integration horizon per probe (default: rate-based).
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Convergence amplitude threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Feedback family.
    #[arg(long, value_enum, default_value_t = FamilyArg::Tanh)]
    pub family: FamilyArg,
    /// Output JSON path (threshold report).
    #[arg(short, long)]
    pub output: PathBuf,
}

// ---------------------------------------------------------------------------
// Sweep configuration
// ---------------------------------------------------------------------------

/// One sweep axis: `points` values spaced evenly from `start` to `end`
/// inclusive (`points = 1` requires `start == end`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl AxisSpec {
    fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        if !self.start.is_finite() || !self.end.is_finite() {
            return Err(config_err(format!("{name}: endpoints must be finite")));
        }
        match self.points {
            0 => Err(config_err(format!("{name}: empty grid (points = 0)"))),
            1 => {
                if self.start == self.end {
                    Ok(vec![self.start])
                } else {
                    Err(config_err(format!(
                        "{name}: points = 1 requires start == end"
                    )))
                }
            }
            p => {
                if !(self.end > self.start) {
                    return Err(config_err(format!("{name}: need start < end")));
                }
                Ok(linspace(self.start, self.end, p))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub seed: u64,
}

/// Probe horizon policy: `"auto"` (rate-based per cell) or `{"fixed": T}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TEndPolicy {
    Auto,
    Fixed(f64),
}

impl Default for TEndPolicy {
    fn default() -> Self {
        TEndPolicy::Auto
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Feedback family; only "tanh" is supported.
    pub nonlinearity: String,
    pub zeta_grid: AxisSpec,
    pub h_grid: AxisSpec,
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub t_end_policy: TEndPolicy,
    /// Convergence amplitude threshold (default 1e-6).
    #[serde(default = "default_sweep_tol")]
    pub tol: f64,
}

fn default_sweep_tol() -> f64 {
    1e-6
}

const SWEEP_CELL_CAP: usize = 10_000;

/// Per-cell ensemble seed: decorrelate cells by mixing the grid index with
/// the golden-ratio increment.
fn cell_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

/// JSON formatter: pretty-printed, with every `f64` rendered by
/// [`crate::format::sig15`] (15 significant digits, lowercase e-notation).
pub struct Sig15Formatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl Sig15Formatter {
    pub fn new() -> Self {
        Sig15Formatter {
            pretty: serde_json::ser::PrettyFormatter::new(),
        }
    }
}

impl Default for Sig15Formatter {
    fn default() -> Self {
        Self::new()
    }
}

impl serde_json::ser::Formatter for Sig15Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            writer.write_all(sig15(value).as_bytes())
        } else {
            // JSON has no non-finite numbers.
            writer.write_all(b"null")
        }
    }

    fn begin_array<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_array(w)
    }

    fn end_array<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_array(w)
    }

    fn begin_array_value<W>(&mut self, w: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_array_value(w, first)
    }

    fn end_array_value<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_array_value(w)
    }

    fn begin_object<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object(w)
    }

    fn end_object<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_object(w)
    }

    fn begin_object_key<W>(&mut self, w: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object_key(w, first)
    }

    fn begin_object_value<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object_value(w)
    }

    fn end_object_value<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_object_value(w)
    }
}

/// Serialize `value` as pretty JSON with 15-significant-digit floats,
/// trailing newline included.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig15Formatter::new());
    value
        .serialize(&mut ser)
        .map_err(|e| io_err("serializing JSON", e))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| io_err("encoding JSON", e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = to_json_string(value)?;
    fs::write(path, text).map_err(|e| io_err(&format!("writing {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(&format!("writing {}", path.display()), e))
}

/// The resolved-run sidecar written next to every output.
#[derive(Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub output: String,
    pub seed: u64,
    pub precision: u32,
    pub version: &'static str,
}

fn run_config(
    subcommand: &'static str,
    parameters: BTreeMap<String, serde_json::Value>,
    output: &Path,
    seed: u64,
) -> RunConfig {
    RunConfig {
        subcommand,
        parameters,
        output: output.display().to_string(),
        seed,
        precision: PRECISION_DIGITS,
        version: env!("CARGO_PKG_VERSION"),
    }
}

/// `<output>.config.json` for single-file outputs.
fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_os_string();
    name.push(".config.json");
    PathBuf::from(name)
}

fn write_sidecar(
    subcommand: &'static str,
    parameters: BTreeMap<String, serde_json::Value>,
    output: &Path,
    seed: u64,
) -> Result<(), CliError> {
    write_json(
        &sidecar_path(output),
        &run_config(subcommand, parameters, output, seed),
    )
}

fn require_positive(value: f64, name: &str) -> Result<(), CliError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(config_err(format!("{name} = {value}, need 0 < {name} < inf")));
    }
    Ok(())
}

fn require_tol(tol: f64) -> Result<(), CliError> {
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(config_err(format!("tol = {tol}, need 0 < tol <= 0.1")));
    }
    Ok(())
}

/// The serde name of a region label (e.g. `ProvedGlobal_Nu2`).
fn label_name(label: RegionLabel) -> String {
    match serde_json::to_value(label) {
        Ok(serde_json::Value::String(s)) => s,
        _ => format!("{label:?}"),
    }
}

fn parse_history(spec: &str, seed: u64) -> Result<(History, serde_json::Value), CliError> {
    let num = |s: &str, what: &str| -> Result<f64, CliError> {
        let v: f64 = s
            .parse()
            .map_err(|e| config_err(format!("history {what} '{s}': {e}")))?;
        if !v.is_finite() {
            return Err(config_err(format!("history {what} '{s}' must be finite")));
        }
        Ok(v)
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["const", v] => {
            let v = num(v, "value")?;
            Ok((History::Constant(v), json!({ "kind": "const", "value": v })))
        }
        ["ramp", a, b] => {
            let start = num(a, "start")?;
            let end = num(b, "end")?;
            Ok((
                History::Ramp { start, end },
                json!({ "kind": "ramp", "start": start, "end": end }),
            ))
        }
        ["sin", amp, cycles] => {
            let amplitude = num(amp, "amplitude")?;
            let cycles: u32 = cycles
                .parse()
                .map_err(|e| config_err(format!("history cycles '{cycles}': {e}")))?;
            Ok((
                History::Sinusoid { amplitude, cycles },
                json!({ "kind": "sin", "amplitude": amplitude, "cycles": cycles }),
            ))
        }
        ["noise", amp] => {
            let amplitude = num(amp, "amplitude")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..33).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
            let history = History::sampled(values).map_err(domain_err)?;
            Ok((
                history,
                json!({ "kind": "noise", "amplitude": amplitude, "nodes": 33 }),
            ))
        }
        _ => Err(config_err(format!(
            "history '{spec}' must be const:V | ramp:A:B | sin:AMP:CYCLES | noise:AMP"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Entry point and dispatch
// ---------------------------------------------------------------------------

/// Parse arguments, execute, and return the process exit code.
pub fn run() -> i32 {
    init_thread_pool();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let report = json!({ "error": "config", "message": e.to_string() });
            eprintln!("{report}");
            return 2;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.message() });
            eprintln!("{report}");
            e.exit_code()
        }
    }
}

/// Bound the worker pool by `DDE_LAB_THREADS` if set.  Building the global
/// pool can fail only when one already exists, which is fine.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("DDE_LAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Chart(args) => cmd_chart(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Fundsol(args) => cmd_fundsol(args),
        Command::Envelope(args) => cmd_envelope(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Attractor(args) => cmd_attractor(args),
        Command::Hypotheses(args) => cmd_hypotheses(args),
        Command::Hc(args) => cmd_hc(args),
    }
}

fn cmd_chart(args: ChartArgs) -> Result<(), CliError> {
    let mus = args.mu_grid.points();
    let rows = chart(&mus).map_err(domain_err)?;
    let mut csv = String::from("mu,nu1,nu2,nu3\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            sig15(row.mu),
            sig15(row.nu1),
            sig15(row.nu2),
            sig15(row.nu3)
        );
    }
    write_text(&args.output, &csv)?;
    let params = BTreeMap::from([(
        "mu_grid".to_string(),
        json!({ "start": args.mu_grid.start, "end": args.mu_grid.end, "n": args.mu_grid.n }),
    )]);
    write_sidecar("chart", params, &args.output, 0)
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), CliError> {
    require_positive(args.h, "h")?;
    require_positive(args.zeta, "zeta")?;
    require_tol(args.tol)?;
    let p = QuasiPoly::new(args.h, args.zeta);
    let spectrum = roots_in_strips(&p, args.kmax, args.tol).map_err(domain_err)?;
    write_json(&args.output, &spectrum)?;
    let params = BTreeMap::from([
        ("h".to_string(), json!(args.h)),
        ("zeta".to_string(), json!(args.zeta)),
        ("kmax".to_string(), json!(args.kmax)),
        ("tol".to_string(), json!(args.tol)),
    ]);
    write_sidecar("spectrum", params, &args.output, 0)
}

fn cmd_fundsol(args: FundsolArgs) -> Result<(), CliError> {
    require_positive(args.h, "h")?;
    require_positive(args.zeta, "zeta")?;
    require_positive(args.t_end, "t-end")?;
    require_tol(args.tol)?;
    if args.grid == 0 {
        return Err(config_err("grid needs at least one subdivision"));
    }
    let ts: Vec<f64> = (0..=args.grid)
        .map(|i| args.t_end * i as f64 / args.grid as f64)
        .collect();

    let exact = match args.method {
        FundMethod::Exact | FundMethod::Both => {
            Some(fundamental_exact(args.h, args.zeta, args.t_end).map_err(domain_err)?)
        }
        FundMethod::Numeric => None,
    };
    let numeric = match args.method {
        FundMethod::Numeric | FundMethod::Both => Some(
            fundamental_numeric(args.h, args.zeta, args.t_end, args.tol).map_err(domain_err)?,
        ),
        FundMethod::Exact => None,
    };

    let mut csv = String::new();
    match (&exact, &numeric) {
        (Some(ex), Some(num)) => {
            csv.push_str("t,v_exact,v_numeric\n");
            for &t in &ts {
                let ve = ex.eval(t).map_err(domain_err)?;
                let _ = writeln!(csv, "{},{},{}", sig15(t), sig15(ve), sig15(num.value(t)));
            }
        }
        (Some(ex), None) => {
            csv.push_str("t,v\n");
            for &t in &ts {
                let ve = ex.eval(t).map_err(domain_err)?;
                let _ = writeln!(csv, "{},{}", sig15(t), sig15(ve));
            }
        }
        (None, Some(num)) => {
            csv.push_str("t,v\n");
            for &t in &ts {
                let _ = writeln!(csv, "{},{}", sig15(t), sig15(num.value(t)));
            }
        }
        (None, None) => unreachable!("method always selects at least one path"),
    }
    write_text(&args.output, &csv)?;
    let params = BTreeMap::from([
        ("h".to_string(), json!(args.h)),
        ("zeta".to_string(), json!(args.zeta)),
        ("t_end".to_string(), json!(args.t_end)),
        ("grid".to_string(), json!(args.grid)),
        (
            "method".to_string(),
            json!(match args.method {
                FundMethod::Exact => "exact",
                FundMethod::Numeric => "numeric",
                FundMethod::Both => "both",
            }),
        ),
        ("tol".to_string(), json!(args.tol)),
    ]);
    write_sidecar("fundsol", params, &args.output, 0)
}

fn cmd_envelope(args: EnvelopeArgs) -> Result<(), CliError> {
    require_positive(args.h, "h")?;
    require_positive(args.zeta, "zeta")?;
    require_tol(args.tol)?;
    let t_max = args.t_max.unwrap_or(3.0 * args.h.powi(3));
    require_positive(t_max, "t-max")?;
    let report =
        decay_envelope(args.h, args.zeta, args.alpha, t_max, args.tol).map_err(domain_err)?;
    write_json(&args.output, &report)?;
    let params = BTreeMap::from([
        ("h".to_string(), json!(args.h)),
        ("zeta".to_string(), json!(args.zeta)),
        ("alpha".to_string(), json!(args.alpha)),
        ("t_max".to_string(), json!(t_max)),
        ("tol".to_string(), json!(args.tol)),
    ]);
    write_sidecar("envelope", params, &args.output, 0)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    require_positive(args.zeta, "zeta")?;
    require_positive(args.h, "h")?;
    require_positive(args.t_end, "t-end")?;
    require_tol(args.tol)?;
    if args.grid == 0 {
        return Err(config_err("grid needs at least one subdivision"));
    }
    let (history, history_json) = parse_history(&args.history, args.seed)?;
    let nl = args.family.nonlinearity();
    let traj = integrate(&nl, args.zeta, args.h, &history, args.t_end, args.tol)
        .map_err(domain_err)?;
    let mut csv = String::from("t,x\n");
    for i in 0..=args.grid {
        let t = args.t_end * i as f64 / args.grid as f64;
        let _ = writeln!(csv, "{},{}", sig15(t), sig15(traj.value(t)));
    }
    write_text(&args.output, &csv)?;
    let params = BTreeMap::from([
        ("zeta".to_string(), json!(args.zeta)),
        ("h".to_string(), json!(args.h)),
        ("history".to_string(), history_json),
        ("t_end".to_string(), json!(args.t_end)),
        ("tol".to_string(), json!(args.tol)),
        ("grid".to_string(), json!(args.grid)),
        ("family".to_string(), json!(args.family.name())),
    ]);
    write_sidecar("simulate", params, &args.output, args.seed)
}

fn cmd_probe(args: ProbeArgs) -> Result<(), CliError> {
    require_positive(args.zeta, "zeta")?;
    require_positive(args.h, "h")?;
    require_tol(args.tol)?;
    if let Some(t) = args.t_end {
        require_positive(t, "t-end")?;
    }
    let nl = args.family.nonlinearity();
    let ensemble = default_ensemble(args.seed);
    let report = probe_global_stability(&nl, args.zeta, args.h, &ensemble, args.t_end, args.tol)
        .map_err(domain_err)?;
    write_json(&args.output, &report)?;
    let params = BTreeMap::from([
        ("zeta".to_string(), json!(args.zeta)),
        ("h".to_string(), json!(args.h)),
        (
            "t_end".to_string(),
            args.t_end.map_or(json!("auto"), |t| json!(t)),
        ),
        ("tol".to_string(), json!(args.tol)),
        ("family".to_string(), json!(args.family.name())),
        ("ensemble".to_string(), json!("default-16")),
    ]);
    write_sidecar("probe", params, &args.output, args.seed)
}

fn cmd_attractor(args: AttractorArgs) -> Result<(), CliError> {
    require_positive(args.zeta, "zeta")?;
    if !(args.tol > 0.0) {
        return Err(config_err(format!("tol = {}, need tol > 0", args.tol)));
    }
    let nl = args.family.nonlinearity();
    let interval = attractor_interval(&nl, args.zeta, args.tol).map_err(domain_err)?;
    write_json(&args.output, &interval)?;
    let params = BTreeMap::from([
        ("zeta".to_string(), json!(args.zeta)),
        ("tol".to_string(), json!(args.tol)),
        ("family".to_string(), json!(args.family.name())),
    ]);
    write_sidecar("attractor", params, &args.output, 0)
}

fn cmd_hypotheses(args: HypothesesArgs) -> Result<(), CliError> {
    if args.samples < 100 {
        return Err(config_err(format!(
            "samples = {}, need at least 100 for a meaningful check",
            args.samples
        )));
    }
    let nl = args.family.nonlinearity();
    let report = check_hypotheses(&nl, (args.window.lo, args.window.hi), args.samples);
    write_json(&args.output, &report)?;
    let params = BTreeMap::from([
        ("family".to_string(), json!(args.family.name())),
        (
            "window".to_string(),
            json!({ "lo": args.window.lo, "hi": args.window.hi }),
        ),
        ("samples".to_string(), json!(args.samples)),
    ]);
    write_sidecar("hypotheses", params, &args.output, 0)
}

fn cmd_hc(args: HcArgs) -> Result<(), CliError> {
    require_positive(args.zeta, "zeta")?;
    require_positive(args.h_lo, "h-lo")?;
    require_positive(args.h_hi, "h-hi")?;
    require_tol(args.tol)?;
    let nl = args.family.nonlinearity();
    let seed = args.seed;
    let report = estimate_hc_report(
        &nl,
        args.zeta,
        args.h_lo,
        args.h_hi,
        &move |_h| default_ensemble(seed),
        args.t_end,
        args.tol,
        args.n_bisect,
    )
    .map_err(domain_err)?;
    write_json(&args.output, &report)?;
    let params = BTreeMap::from([
        ("zeta".to_string(), json!(args.zeta)),
        ("h_lo".to_string(), json!(args.h_lo)),
        ("h_hi".to_string(), json!(args.h_hi)),
        ("n_bisect".to_string(), json!(args.n_bisect)),
        (
            "t_end".to_string(),
            args.t_end.map_or(json!("auto"), |t| json!(t)),
        ),
        ("tol".to_string(), json!(args.tol)),
        ("family".to_string(), json!(args.family.name())),
    ]);
    write_sidecar("hc", params, &args.output, args.seed)
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ResumeMarker {
    digest: String,
    completed: usize,
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let raw = fs::read_to_string(&args.config)
        .map_err(|e| io_err(&format!("reading {}", args.config.display()), e))?;
    let cfg: SweepConfig = serde_json::from_str(&raw)
        .map_err(|e| config_err(format!("parsing {}: {e}", args.config.display())))?;

    if cfg.nonlinearity != "tanh" {
        return Err(config_err(format!(
            "nonlinearity '{}' is not supported (only \"tanh\")",
            cfg.nonlinearity
        )));
    }
    require_tol(cfg.tol).map_err(|_| config_err(format!("tol = {}, need 0 < tol <= 0.1", cfg.tol)))?;
    let zetas = cfg.zeta_grid.values("zeta_grid")?;
    let hs = cfg.h_grid.values("h_grid")?;
    if zetas.iter().any(|&z| !(z > 0.0)) {
        return Err(config_err("zeta_grid: all values must be positive"));
    }
    if hs.iter().any(|&h| !(h > 0.0)) {
        return Err(config_err("h_grid: all values must be positive"));
    }
    if let TEndPolicy::Fixed(t) = cfg.t_end_policy {
        if !(t > 0.0) || !t.is_finite() {
            return Err(config_err(format!(
                "t_end_policy.fixed = {t}, need 0 < t < inf"
            )));
        }
    }
    let n_cells = zetas.len() * hs.len();
    if n_cells > SWEEP_CELL_CAP && !args.force {
        return Err(config_err(format!(
            "grid has {n_cells} cells (cap {SWEEP_CELL_CAP}); pass --force to proceed"
        )));
    }

    // Canonical digest of the parsed config ties the resume marker to the
    // sweep it belongs to.
    let canonical =
        serde_json::to_string(&cfg).map_err(|e| io_err("serializing sweep config", e))?;
    let digest = format!("{:016x}", fnv1a64(canonical.as_bytes()));

    let cells_dir = args.out_dir.join("cells");
    let marker_path = args.out_dir.join(".resume.json");

    let start_index = match fs::read_to_string(&marker_path) {
        Ok(text) => {
            let marker: ResumeMarker = serde_json::from_str(&text)
                .map_err(|e| config_err(format!("parsing resume marker: {e}")))?;
            if marker.digest == digest {
                marker.completed.min(n_cells)
            } else if args.force {
                0
            } else {
                return Err(config_err(format!(
                    "{} holds a partial sweep with a different configuration \
                     (digest {} vs {digest}); pass --force to overwrite",
                    args.out_dir.display(),
                    marker.digest
                )));
            }
        }
        Err(_) => 0, // no marker: fresh (or completed) directory; rerun fully
    };
    if start_index == 0 {
        // Fresh start: drop any stale cells from earlier configurations.
        let _ = fs::remove_dir_all(&cells_dir);
        let _ = fs::remove_file(&marker_path);
    }
    fs::create_dir_all(&cells_dir)
        .map_err(|e| io_err(&format!("creating {}", cells_dir.display()), e))?;

    // Resolved-run sidecar.
    let params = BTreeMap::from([
        (
            "config".to_string(),
            serde_json::to_value(&cfg).map_err(|e| io_err("serializing sweep config", e))?,
        ),
        (
            "config_path".to_string(),
            json!(args.config.display().to_string()),
        ),
        ("force".to_string(), json!(args.force)),
        ("digest".to_string(), json!(digest)),
    ]);
    write_json(
        &args.out_dir.join("config.json"),
        &run_config("sweep", params, &args.out_dir, cfg.ensemble.seed),
    )?;

    let nl = Nonlinearity::tanh();
    let mut summary_rows: Vec<String> = Vec::with_capacity(n_cells);

    for index in 0..n_cells {
        let zeta = zetas[index / hs.len()];
        let h = hs[index % hs.len()];
        let classification = classify_point(zeta, h).map_err(domain_err)?;
        let label = classification.label;
        let cell_path = cells_dir.join(format!("cell_{index:04}.json"));

        let verdict_name: String = if index < start_index {
            // Already computed in a previous (resumed) run; reread the stored
            // report instead of recomputing.
            let text = fs::read_to_string(&cell_path)
                .map_err(|e| io_err(&format!("reading {}", cell_path.display()), e))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| config_err(format!("parsing {}: {e}", cell_path.display())))?;
            value
                .get("verdict")
                .and_then(|v| v.as_str())
                .ok_or_else(|| {
                    config_err(format!("{} has no verdict field", cell_path.display()))
                })?
                .to_string()
        } else {
            let ensemble = default_ensemble(cell_seed(cfg.ensemble.seed, index));
            let t_end = match cfg.t_end_policy {
                TEndPolicy::Auto => None,
                TEndPolicy::Fixed(t) => Some(t),
            };
            let report = probe_global_stability(&nl, zeta, h, &ensemble, t_end, cfg.tol)
                .map_err(|e| {
                    CliError::Domain(format!("cell {index} (zeta = {zeta}, h = {h}): {e}"))
                })?;
            write_json(&cell_path, &report)?;
            let marker = ResumeMarker {
                digest: digest.clone(),
                completed: index + 1,
            };
            write_json(&marker_path, &marker)?;
            report.verdict.to_string()
        };

        let proved = matches!(
            label,
            RegionLabel::AbsolutelyStable
                | RegionLabel::ProvedGlobalNu2
                | RegionLabel::ProvedGlobalNu3
                | RegionLabel::ProvedGlobalNearCritical
        );
        let flag = if proved && verdict_name == Verdict::SomeDiverged.to_string() {
            "FATAL"
        } else {
            ""
        };
        summary_rows.push(format!(
            "{},{},{},{},{},{},{}",
            sig15(zeta),
            sig15(h),
            sig15(classification.mu),
            sig15(classification.nu),
            label_name(label),
            verdict_name,
            flag
        ));
    }

    let mut summary = String::from("zeta,h,mu,nu,label,verdict,flag\n");
    for row in &summary_rows {
        summary.push_str(row);
        summary.push('\n');
    }
    write_text(&args.out_dir.join("summary.csv"), &summary)?;
    let _ = fs::remove_file(&marker_path);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses_and_validates() {
        let g: GridSpec = "0:0.99:100".parse().expect("valid grid");
        let pts = g.points();
        assert_eq!(pts.len(), 101, "N subdivisions give N + 1 points");
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[100], 0.99, "endpoint is exact");
        assert!("1:2".parse::<GridSpec>().is_err(), "two fields rejected");
        assert!("2:1:10".parse::<GridSpec>().is_err(), "reversed endpoints rejected");
        assert!("0:1:0".parse::<GridSpec>().is_err(), "zero subdivisions rejected");
    }

    #[test]
    fn window_spec_parses_negative_endpoints() {
        let w: WindowSpec = "-5:5".parse().expect("valid window");
        assert_eq!((w.lo, w.hi), (-5.0, 5.0));
        assert!("5:-5".parse::<WindowSpec>().is_err());
    }

    #[test]
    fn history_specs_parse() {
        let (h, _) = parse_history("const:2.5", 0).expect("const parses");
        assert!(matches!(h, History::Constant(v) if v == 2.5));
        let (h, _) = parse_history("ramp:-1:1", 0).expect("ramp parses");
        assert!(matches!(h, History::Ramp { start, end } if start == -1.0 && end == 1.0));
        let (h, _) = parse_history("sin:5:3", 0).expect("sin parses");
        assert!(matches!(h, History::Sinusoid { amplitude, cycles } if amplitude == 5.0 && cycles == 3));
        let (h, _) = parse_history("noise:1", 42).expect("noise parses");
        match h {
            History::Sampled(v) => assert_eq!(v.len(), 33),
            other => panic!("expected sampled noise, got {other:?}"),
        }
        assert!(parse_history("wavelet:1", 0).is_err(), "unknown kind rejected");
        assert!(parse_history("const:abc", 0).is_err(), "non-numeric rejected");
    }

    #[test]
    fn noise_history_is_seed_deterministic() {
        let v = |seed| match parse_history("noise:1", seed).expect("parses").0 {
            History::Sampled(v) => v,
            _ => unreachable!(),
        };
        assert_eq!(v(7), v(7), "same seed, same samples");
        assert_ne!(v(7), v(8), "different seed, different samples");
    }

    #[test]
    fn json_floats_use_fifteen_significant_digits() {
        let text = to_json_string(&json!({ "x": 0.1, "n": 3 })).expect("serializes");
        assert!(
            text.contains("1.00000000000000e-1"),
            "float field should be sig15-formatted, got: {text}"
        );
        assert!(text.contains("\"n\": 3"), "integers stay plain, got: {text}");
        assert!(text.ends_with('\n'), "trailing newline");
    }

    #[test]
    fn sidecar_path_appends_suffix() {
        assert_eq!(
            sidecar_path(Path::new("out/chart.csv")),
            PathBuf::from("out/chart.csv.config.json")
        );
    }

    #[test]
    fn fnv_digest_is_stable() {
        // Reference value for the canonical FNV-1a 64-bit test vector.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn cell_seed_mixes_index() {
        assert_eq!(cell_seed(1, 0), 1);
        assert_ne!(cell_seed(1, 1), cell_seed(1, 2));
        assert_eq!(cell_seed(5, 3), cell_seed(5, 3), "deterministic");
    }
}
