//! Command-line experiment driver. Every run writes one CSV table preceded by
//! `# key=value` lines that record the full configuration, so a file is
//! enough to replay the run that produced it.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::bitkit::{BitString, Rng, RNG_ALGORITHM};
use crate::error::GhrError;
use crate::{bounds, classical, coupling, ghr, mc, qsmp};

#[derive(Debug, Parser)]
#[command(name = "ghrlab", version, about = "Gap Hamming Relation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// The experiment to run.
#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Estimate Pr[ℵ(X, Y)] for uniform inputs.
    AlephEstimate(ExperimentArgs),
    /// Success rate of the quantum protocol on uniform inputs.
    ProtocolSuccess(ExperimentArgs),
    /// Exact failure probability of the protocol per input.
    ProtocolFailureExact(ExperimentArgs),
    /// Success rate of the shared-randomness tGHR baseline.
    BaselineTghr(ExperimentArgs),
    /// Exact independence check of the weight coupling for every s.
    CouplingVerify(ExperimentArgs),
    /// Check every concentration bound against exact or sampled tails.
    BoundsValidate(ExperimentArgs),
    /// Run the disjointness reduction on every instance.
    ReductionDemo(ExperimentArgs),
    /// Relative weights of distance sets under a rectangle.
    RectSpectrum(ExperimentArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AlephEstimate(_) => "aleph-estimate",
            Command::ProtocolSuccess(_) => "protocol-success",
            Command::ProtocolFailureExact(_) => "protocol-failure-exact",
            Command::BaselineTghr(_) => "baseline-tghr",
            Command::CouplingVerify(_) => "coupling-verify",
            Command::BoundsValidate(_) => "bounds-validate",
            Command::ReductionDemo(_) => "reduction-demo",
            Command::RectSpectrum(_) => "rect-spectrum",
        }
    }

    fn args(&self) -> &ExperimentArgs {
        match self {
            Command::AlephEstimate(a)
            | Command::ProtocolSuccess(a)
            | Command::ProtocolFailureExact(a)
            | Command::BaselineTghr(a)
            | Command::CouplingVerify(a)
            | Command::BoundsValidate(a)
            | Command::ReductionDemo(a)
            | Command::RectSpectrum(a) => a,
        }
    }
}

/// Flags shared by every subcommand; unset values take per-command defaults.
#[derive(Clone, Debug, Default, Args)]
pub struct ExperimentArgs {
    /// String length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte-Carlo trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Protocol repetitions or baseline sample count.
    #[arg(long)]
    pub t: Option<usize>,
    /// Tolerance for exact checks.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Rectangle family: full, parity_even or prefix_zeros(m).
    #[arg(long, default_value = "full")]
    pub rect: RectChoice,
    #[arg(long, default_value_t = 6)]
    pub c1: usize,
    #[arg(long, default_value_t = 8)]
    pub c2: usize,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Enumerate inputs exactly instead of sampling.
    #[arg(long)]
    pub exhaustive: bool,
}

/// A named rectangle family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RectChoice {
    #[default]
    Full,
    ParityEven,
    PrefixZeros(usize),
}

impl RectChoice {
    pub fn build(self, n: usize) -> crate::Result<classical::RectangleSpec> {
        match self {
            RectChoice::Full => Ok(classical::RectangleSpec::full(n)),
            RectChoice::ParityEven => classical::RectangleSpec::parity_even(n),
            RectChoice::PrefixZeros(m) => classical::RectangleSpec::prefix_zeros(n, m),
        }
    }
}

impl fmt::Display for RectChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RectChoice::Full => f.write_str("full"),
            RectChoice::ParityEven => f.write_str("parity_even"),
            RectChoice::PrefixZeros(m) => write!(f, "prefix_zeros({m})"),
        }
    }
}

impl FromStr for RectChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "full" => Ok(RectChoice::Full),
            "parity_even" => Ok(RectChoice::ParityEven),
            other => other
                .strip_prefix("prefix_zeros(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|m| m.trim().parse().ok())
                .map(RectChoice::PrefixZeros)
                .ok_or_else(|| format!("unknown rectangle family {other:?}; use full, parity_even or prefix_zeros(m)")),
        }
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: &'static str,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub t: Option<usize>,
    pub tol: f64,
    pub rect: RectChoice,
    pub c1: usize,
    pub c2: usize,
    pub out: Option<PathBuf>,
    pub exhaustive: bool,
}

impl ExperimentConfig {
    pub fn resolve(command: &Command) -> Self {
        let a = command.args();
        let name = command.name();
        let (n, trials) = match command {
            Command::AlephEstimate(_) | Command::ProtocolSuccess(_) => (256, 200),
            Command::ProtocolFailureExact(_) => (4, 200),
            Command::BaselineTghr(_) => (1024, 500),
            Command::CouplingVerify(_) => (6, 0),
            Command::BoundsValidate(_) => (256, 10_000),
            Command::ReductionDemo(_) => (16, 1000),
            Command::RectSpectrum(_) => (4, 100_000),
        };
        let t = match command {
            Command::BaselineTghr(_) => Some(a.t.unwrap_or(256)),
            _ => a.t,
        };
        Self {
            command: name,
            n: a.n.unwrap_or(n),
            trials: a.trials.unwrap_or(trials),
            seed: a.seed,
            t,
            tol: a.tol,
            rect: a.rect,
            c1: a.c1,
            c2: a.c2,
            out: a.out.clone(),
            exhaustive: a.exhaustive,
        }
    }

    /// `# key=value` lines. The output path is left out so reruns into
    /// different files stay byte-identical.
    pub fn header_lines(&self) -> Vec<String> {
        let t = self.t.map_or_else(|| "default".to_string(), |t| t.to_string());
        vec![
            format!("# ghrlab={}", env!("CARGO_PKG_VERSION")),
            format!("# command={}", self.command),
            format!("# n={}", self.n),
            format!("# trials={}", self.trials),
            format!("# seed={}", self.seed),
            format!("# t={t}"),
            format!("# tol={}", format_real(self.tol)),
            format!("# rect={}", self.rect),
            format!("# c1={}", self.c1),
            format!("# c2={}", self.c2),
            format!("# exhaustive={}", self.exhaustive),
            format!("# rng={RNG_ALGORITHM}"),
            "# format=csv".to_string(),
        ]
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl From<GhrError> for CliError {
    fn from(e: GhrError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invariant(_) | CliError::Io(_) => 1,
        }
    }
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i128),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => f.write_str(&format_real(*v)),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(s) if s.contains([',', '"', '\n', '\r']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Twelve significant digits, `%g` style: fixed notation for exponents in
/// `[-5, 12)`, scientific otherwise, trailing zeros removed.
pub fn format_real(x: f64) -> String {
    const DIGITS: usize = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS as i32).contains(&exp) {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// A schema plus rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub schema: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(schema: &[&'static str]) -> Self {
        Self { schema: schema.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.schema.len(), "row does not match schema");
        self.rows.push(row);
    }
}

/// Writes the header comments, the schema line and every row.
pub fn write_csv(table: &Table, header: &[String], out: &mut dyn Write) -> io::Result<()> {
    let mut w = io::BufWriter::new(out);
    for line in header {
        writeln!(w, "{line}")?;
    }
    writeln!(w, "{}", table.schema.join(","))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

/// Result of one experiment: the table and any invariant violation found.
struct Outcome {
    table: Table,
    violation: Option<String>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self { table, violation: None }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_trials(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    Ok(())
}

fn aleph_estimate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut table = Table::new(&["n", "trials", "seed", "estimate", "stderr"]);
    if cfg.exhaustive {
        let exact = ghr::aleph_probability_exhaustive(cfg.n)?;
        table.push(vec![cfg.n.into(), exact.total.into(), cfg.seed.into(), exact.value().into(), 0.0.into()]);
    } else {
        require_trials(cfg)?;
        let est = ghr::estimate_aleph_probability(cfg.n, cfg.trials, &Rng::new(cfg.seed))?;
        table.push(vec![cfg.n.into(), est.trials.into(), cfg.seed.into(), est.mean.into(), est.stderr.into()]);
    }
    Ok(Outcome::ok(table))
}

fn protocol_success(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (log_n, _) = ghr::require_power_of_four(cfg.n)?;
    let t = cfg.t.unwrap_or(log_n as usize);
    let mut table = Table::new(&["n", "trials", "seed", "t", "estimate", "stderr"]);
    if cfg.exhaustive {
        if cfg.t.is_some_and(|t| t != log_n as usize) {
            return Err(usage("--exhaustive evaluates the log n copy protocol; drop --t"));
        }
        let exact = qsmp::success_probability_exhaustive(cfg.n)?;
        let pairs = 1u64 << (2 * cfg.n);
        table.push(vec![
            cfg.n.into(),
            pairs.into(),
            cfg.seed.into(),
            t.into(),
            exact.to_f64().unwrap_or(f64::NAN).into(),
            0.0.into(),
        ]);
    } else {
        require_trials(cfg)?;
        let est = qsmp::estimate_success(cfg.n, cfg.trials, Some(t), &Rng::new(cfg.seed))?;
        table.push(vec![cfg.n.into(), est.trials.into(), cfg.seed.into(), t.into(), est.mean.into(), est.stderr.into()]);
    }
    Ok(Outcome::ok(table))
}

fn protocol_failure_exact(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    ghr::require_power_of_four(cfg.n)?;
    let cap = qsmp::failure_cap(cfg.n)?;
    let inputs: Vec<(BitString, BitString)> = if cfg.exhaustive {
        if cfg.n > 4 {
            return Err(usage(format!("--exhaustive needs n = 4, got {}", cfg.n)));
        }
        ghr::all_pairs(cfg.n).collect()
    } else {
        require_trials(cfg)?;
        let n = cfg.n;
        mc::map_trials(&Rng::new(cfg.seed), cfg.trials, |r| (BitString::random(n, r), BitString::random(n, r)))
    };
    let n3 = (cfg.n as f64).powi(3);
    let results: Vec<_> = inputs
        .par_iter()
        .map(|(x, y)| {
            let table = ghr::delta_table(x, y).expect("shape validated");
            (table.aleph(), table.aleph_statistic(), qsmp::failure_from_table(&table))
        })
        .collect();
    let mut table = Table::new(&["input", "aleph", "inside_mass", "failure"]);
    let mut violation = None;
    for (i, (aleph, stat, failure)) in results.into_iter().enumerate() {
        if failure > cap && violation.is_none() {
            violation = Some(format!("input {i} fails with probability above the ℵ cap"));
        }
        table.push(vec![
            i.into(),
            aleph.into(),
            (stat as f64 / n3).into(),
            failure.to_f64().unwrap_or(f64::NAN).into(),
        ]);
    }
    Ok(Outcome { table, violation })
}

fn baseline_tghr(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    require_trials(cfg)?;
    let t = cfg.t.expect("resolved default");
    let est = classical::estimate_baseline_success(cfg.n, t, cfg.trials, &Rng::new(cfg.seed))?;
    let mut table = Table::new(&["n", "t", "trials", "seed", "estimate", "stderr"]);
    table.push(vec![cfg.n.into(), t.into(), est.trials.into(), cfg.seed.into(), est.mean.into(), est.stderr.into()]);
    Ok(Outcome::ok(table))
}

fn coupling_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let reports = coupling::verify_all(cfg.n, cfg.tol)?;
    let mut table = Table::new(&["s", "max_tv", "pass"]);
    let mut failures = 0;
    for (s, r) in reports {
        failures += !r.pass as usize;
        table.push(vec![s.to_string().into(), r.max_tv.into(), r.pass.into()]);
    }
    let violation = (failures > 0).then(|| format!("{failures} strings s fail the independence check"));
    Ok(Outcome { table, violation })
}

fn bounds_validate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    require_trials(cfg)?;
    let n = cfg.n;
    if n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let t_values: Vec<f64> = [1, 2, 3].iter().map(|k| (k * n) as f64 / 16.0).collect();
    let reports = [
        ("hoeffding", bounds::hoeffding_dominance(10..=400, 0.25)),
        ("relaxed_chernoff", bounds::chernoff_dominance(10..=400)),
        ("relaxed_chernoff_dependent", bounds::seesaw_dominance((10..=400).step_by(10), &[0.5, 0.9])?),
        ("window_lower", bounds::window_lower_report(bounds::calibration_grid(), bounds::CALIBRATED_C_TERM)),
        ("shift_xor", bounds::shift_xor_tail_check(n, &t_values, cfg.trials, &Rng::new(cfg.seed))?),
    ];
    let mut table = Table::new(&["suite", "points", "violations", "max_ratio", "pass"]);
    let mut failed = Vec::new();
    for (name, r) in &reports {
        if !r.pass {
            failed.push(*name);
        }
        table.push(vec![(*name).into(), r.points.len().into(), r.violations().into(), r.max_ratio().into(), r.pass.into()]);
    }
    let violation = (!failed.is_empty()).then(|| format!("bound suites failed: {}", failed.join(", ")));
    Ok(Outcome { table, violation })
}

fn set_label(set: &[usize]) -> String {
    set.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";")
}

fn reduction_demo(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    require_trials(cfg)?;
    let params = classical::XiParams::new(cfg.c1, cfg.c2, cfg.n)?;
    let rect = cfg.rect.build(cfg.n)?;
    let instances = classical::all_instances(params.l());
    let root = Rng::new(cfg.seed);
    let mut table = Table::new(&["x", "y", "intersection", "distance", "accept_rate"]);
    let mut violation = None;
    for (idx, inst) in instances.iter().enumerate() {
        let stream = root.child(idx as u64);
        let runs = mc::map_trials(&stream, cfg.trials, |r| {
            let t = classical::reduction_xi(inst, params, &rect, r).expect("validated");
            (t.padded_distance(), t.final_distance(), t.accepted)
        });
        let (distance, _, _) = runs[0];
        let expected = match inst.intersection_size() {
            0 => Some(cfg.c2),
            1 => Some(cfg.c1),
            _ => None,
        };
        if violation.is_none() {
            if runs.iter().any(|&(d3, d5, _)| d3 != d5 || d3 != distance) {
                violation = Some(format!("instance {idx}: masking changed the distance"));
            } else if expected.is_some_and(|e| e != distance) {
                violation = Some(format!("instance {idx}: distance {distance} breaks the dichotomy"));
            }
        }
        let accepted = runs.iter().filter(|r| r.2).count();
        table.push(vec![
            set_label(inst.x()).into(),
            set_label(inst.y()).into(),
            inst.intersection_size().into(),
            distance.into(),
            (accepted as f64 / cfg.trials as f64).into(),
        ]);
    }
    Ok(Outcome { table, violation })
}

fn rect_spectrum(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let rect = cfg.rect.build(cfg.n)?;
    let exact = cfg.exhaustive || cfg.n <= 16;
    if cfg.exhaustive && cfg.n > 16 {
        return Err(usage(format!("--exhaustive needs n <= 16, got {}", cfg.n)));
    }
    let rng = Rng::new(cfg.seed);
    let mode = if exact {
        classical::WeightMode::Exact
    } else {
        require_trials(cfg)?;
        classical::WeightMode::MonteCarlo { trials: cfg.trials, rng: &rng }
    };
    let mut table = Table::new(&["set", "rw"]);
    for row in classical::spectrum(&rect, mode)? {
        table.push(vec![row.label().into(), row.rw.into()]);
    }
    Ok(Outcome::ok(table))
}

fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match command {
        Command::AlephEstimate(_) => aleph_estimate(cfg),
        Command::ProtocolSuccess(_) => protocol_success(cfg),
        Command::ProtocolFailureExact(_) => protocol_failure_exact(cfg),
        Command::BaselineTghr(_) => baseline_tghr(cfg),
        Command::CouplingVerify(_) => coupling_verify(cfg),
        Command::BoundsValidate(_) => bounds_validate(cfg),
        Command::ReductionDemo(_) => reduction_demo(cfg),
        Command::RectSpectrum(_) => rect_spectrum(cfg),
    }
}

/// Runs a parsed command and writes its CSV; the error carries the exit code.
pub fn dispatch(command: &Command) -> Result<(), CliError> {
    let cfg = ExperimentConfig::resolve(command);
    let outcome = mc::with_thread_cap(mc::thread_cap_from_env(), || execute(command, &cfg))?;
    let header = cfg.header_lines();
    match &cfg.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            write_csv(&outcome.table, &header, &mut file)?;
        }
        None => write_csv(&outcome.table, &header, &mut io::stdout().lock())?,
    }
    match outcome.violation {
        Some(msg) => Err(CliError::Invariant(msg)),
        None => Ok(()),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ghrlab: {e}");
            e.exit_code()
        }
    }
}
