//! Command-line front end. [`run`] parses arguments, dispatches to the
//! library and writes the report; the binary is a thin shell around it.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage error, 3 census guard.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::algebra::{analyze, build_rees, fiber_proof, AlgebraReport, CayleyTable, ReesSpec};
use crate::counting::{pmf_table, CountBreakdown, PmfTable};
use crate::montecarlo::{
    band_check, block_rng, chi_square_gof, simulate, summary_json, trace_csv, BandCheck, SamplerKind,
    SimulationConfig, BLOCK_SIZE, DEFAULT_RESOLUTION,
};
use crate::numerics::{to_scientific, ExactCount, ExactProb, Rounding};
use crate::oracle::{
    census, census_with_checkpoints, line_pmf_table, CensusReport, Guard, LINE_DISTRIBUTION_MAX_ORDER,
};
use crate::squares::{sample_uniform, EnSquare};

/// Environment variable overriding the census guard.
pub const GUARD_ENV: &str = "EQUISQUARE_GUARD_N";

const CHECKPOINT_EVERY: u64 = 10_000_000;

#[derive(Debug, Parser)]
#[command(name = "equisquare", version, about = "Equi-n-square counting, census, simulation and algebra")]
pub struct Cli {
    /// Output format. Each command picks its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Significant digits for decimal renderings of probabilities.
    #[arg(long, global = true, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..=200))]
    pub digits: u32,
    /// Leave the wall-clock metadata out of JSON reports.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// The order, given positionally or as `--n`.
#[derive(Debug, Clone, Args)]
pub struct Order {
    #[arg(value_name = "N")]
    pos: Option<u32>,
    #[arg(long = "n", value_name = "N", conflicts_with = "pos")]
    flag: Option<u32>,
}

impl Order {
    fn get(&self, min: u32) -> Result<u32, CliError> {
        let n = self
            .pos
            .or(self.flag)
            .ok_or_else(|| CliError::Usage("the order N is required".into()))?;
        if n < min {
            return Err(CliError::Usage(format!("order must be at least {min}, got {n}")));
        }
        Ok(n)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact |Ωₙ|, |Σₙ|, S(n) and P(consecutive).
    Count {
        #[command(flatten)]
        order: Order,
        /// Include every inclusion-exclusion term.
        #[arg(long)]
        breakdown: bool,
    },
    /// Exact distribution of the consecutive-line count Xₙ.
    Pmf {
        #[command(flatten)]
        order: Order,
        /// List every x instead of pooling x ≥ 3.
        #[arg(long)]
        full: bool,
        /// Use the inclusion-exclusion distribution (n ≤ 7) instead of the closed form.
        #[arg(long)]
        exact: bool,
    },
    /// Draw uniform random equi-n-squares.
    Sample {
        #[command(flatten)]
        order: Order,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of squares.
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Monte Carlo estimate of the distribution of Xₙ with band checks.
    Simulate {
        #[command(flatten)]
        order: Order,
        #[arg(long, default_value_t = 1_000_000)]
        iterations: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write the running-frequency trace as CSV to this file.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        trace_resolution: u64,
        #[arg(long, value_enum, default_value_t = Sampler::Uniform)]
        sampler: Sampler,
        /// Check against the inclusion-exclusion distribution (n ≤ 7) instead of the closed form.
        #[arg(long)]
        exact_reference: bool,
    },
    /// Exhaustive tally over every equi-n-square.
    Census {
        #[command(flatten)]
        order: Order,
        /// Allow orders above the guard.
        #[arg(long)]
        force: bool,
    },
    /// Cayley-table analysis and Rees matrix constructions.
    Algebra {
        #[command(subcommand)]
        action: AlgebraCommand,
    },
    /// Reproduction tables.
    Report {
        #[command(subcommand)]
        action: ReportCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampler {
    Uniform,
    SkipFirstStep,
}

#[derive(Debug, Subcommand)]
pub enum AlgebraCommand {
    /// Analyze a Cayley table given in square text format (file or stdin).
    Analyze {
        #[arg(value_name = "PATH")]
        path: Option<PathBuf>,
    },
    /// Build the Rees matrix semigroup M[G; I, Λ; P] and analyze it.
    Rees {
        /// `cyclic:K` or a path to a group Cayley table.
        #[arg(long)]
        group: String,
        #[arg(long = "i")]
        i_size: usize,
        #[arg(long = "lambda")]
        lambda_size: usize,
        /// Sandwich matrix rows (one per λ) separated by `;`, entries by `,`,
        /// as 1-based group elements. Defaults to the identity everywhere.
        #[arg(long)]
        sandwich: Option<String>,
        /// Also print the constructed table.
        #[arg(long)]
        show_table: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// CSV of P(consecutive) for n = 2..8 and of |Σₙ|, S(n), |Σₙ|/S(n) for n = 2..9.
    Tables,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Guard(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Guard(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Guard(m) | CliError::Compute(m) => m,
        }
    }
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Reports go to `out`, diagnostics and progress to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let arguments: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, &arguments, err) {
        Ok(text) => {
            if out.write_all(text.as_bytes()).is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message().replace('\n', " "));
            e.exit_code()
        }
    }
}

/// Wraps a payload with the command metadata. Keys come out sorted because
/// `serde_json` maps are ordered.
pub fn bundle(name: &str, arguments: &[String], seed: Option<u64>, payload: Value, deterministic: bool) -> Value {
    let mut v = json!({
        "command": {
            "name": name,
            "version": env!("CARGO_PKG_VERSION"),
            "arguments": arguments,
            "seed": seed.map(|s| s.to_string()),
        },
        "payload": payload,
    });
    if !deterministic {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        v["metadata"] = json!({ "generated_unix": now.to_string() });
    }
    v
}

fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn execute(cli: &Cli, arguments: &[String], err: &mut dyn Write) -> Result<String, CliError> {
    let digits = cli.digits as usize;
    let det = cli.deterministic;
    match &cli.command {
        Command::Count { order, breakdown } => {
            let n = order.get(2)?;
            let b = CountBreakdown::compute(n);
            Ok(match cli.format.unwrap_or(Format::Table) {
                Format::Json => render_json(&bundle("count", arguments, None, breakdown_to_json(&b), det)),
                Format::Csv => count_csv(&b, *breakdown, digits),
                Format::Table => count_table(&b, *breakdown, digits),
            })
        }
        Command::Pmf { order, full, exact } => {
            let n = order.get(2)?;
            let table = if *exact {
                line_table(n)?
            } else {
                pmf_table(n).map_err(compute)?
            };
            Ok(match cli.format.unwrap_or(Format::Table) {
                Format::Json => render_json(&bundle("pmf", arguments, None, pmf_to_json(&table, digits), det)),
                Format::Csv => pmf_csv(&table, *full, digits),
                Format::Table => pmf_text(&table, *full, digits),
            })
        }
        Command::Sample { order, seed, count } => {
            let n = order.get(1)?;
            let squares = sample_squares(n as usize, *seed, *count);
            Ok(match cli.format.unwrap_or(Format::Table) {
                Format::Json => {
                    let list: Vec<Value> = squares
                        .iter()
                        .map(|s| json!({ "cells": s.cells(), "x": s.line_statistic().x }))
                        .collect();
                    let payload = json!({ "n": n, "seed": seed.to_string(), "squares": list });
                    render_json(&bundle("sample", arguments, Some(*seed), payload, det))
                }
                Format::Csv => {
                    let mut s = String::from("index,x,cells\n");
                    for (i, sq) in squares.iter().enumerate() {
                        let cells: Vec<String> = sq.cells().iter().map(u8::to_string).collect();
                        s.push_str(&format!("{i},{},{}\n", sq.line_statistic().x, cells.join(" ")));
                    }
                    s
                }
                Format::Table => squares.iter().map(|s| format!("{}\n", s.to_text())).collect::<String>(),
            })
        }
        Command::Simulate {
            order,
            iterations,
            seed,
            workers,
            trace,
            trace_resolution,
            sampler,
            exact_reference,
        } => {
            let n = order.get(2)?;
            if *iterations == 0 {
                return Err(CliError::Usage("iterations must be positive".into()));
            }
            if *workers == 0 {
                return Err(CliError::Usage("workers must be positive".into()));
            }
            if *trace_resolution == 0 {
                return Err(CliError::Usage("trace resolution must be positive".into()));
            }
            let cfg = SimulationConfig {
                sampler: match sampler {
                    Sampler::Uniform => SamplerKind::Uniform,
                    Sampler::SkipFirstStep => SamplerKind::SkipFirstStep,
                },
                trace_resolution: trace.as_ref().map(|_| *trace_resolution),
                ..SimulationConfig::new(n, *iterations, *seed, *workers)
            };
            let output = simulate(&cfg);
            if let Some(path) = trace {
                std::fs::write(path, trace_csv(&output.trace))
                    .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))?;
            }
            let (reference, source) = if *exact_reference {
                (line_table(n)?, "inclusion-exclusion")
            } else {
                reference_pmf(n)?
            };
            let checks = band_check(&output.stats, &reference).map_err(compute)?;
            let chi = chi_square_gof(&output.stats, &reference, 5.0).ok();
            Ok(match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    let mut payload = summary_json(&output.stats, &checks);
                    payload["reference"] = json!(source);
                    payload["chi_square"] = match &chi {
                        Some(c) => json!({
                            "statistic": c.statistic,
                            "degrees_of_freedom": c.degrees_of_freedom,
                            "p_value": c.p_value,
                        }),
                        None => Value::Null,
                    };
                    let mut v = bundle("simulate", arguments, Some(*seed), payload, det);
                    if !det {
                        v["metadata"]["elapsed_seconds"] = json!(output.stats.elapsed);
                    }
                    render_json(&v)
                }
                Format::Csv => checks_csv(&output.stats.counts, &checks, digits),
                Format::Table => {
                    let mut s = format!(
                        "n = {n}, N = {}, seed = {seed}, workers = {workers}, reference = {source}\n",
                        output.stats.iterations
                    );
                    s.push_str(&checks_csv(&output.stats.counts, &checks, digits).replace(',', "\t"));
                    if let Some(c) = chi {
                        s.push_str(&format!(
                            "chi-square {:.4} on {} df, p = {:.6e}\n",
                            c.statistic, c.degrees_of_freedom, c.p_value
                        ));
                    }
                    s
                }
            })
        }
        Command::Census { order, force } => {
            let n = order.get(1)?;
            let mut guard = guard_from_env()?;
            if *force {
                guard.limit = guard.limit.max(n as usize);
            }
            if n as usize > guard.limit {
                return Err(CliError::Guard(format!(
                    "census of order {n} exceeds the guard ({}); pass --force or set {GUARD_ENV}",
                    guard.limit
                )));
            }
            let report = if n >= 4 {
                census_with_checkpoints(n as usize, &guard, CHECKPOINT_EVERY, |done| {
                    let _ = writeln!(err, "census: {done} squares visited");
                })
            } else {
                census(n as usize, &guard)
            }
            .map_err(compute)?;
            Ok(match cli.format.unwrap_or(Format::Json) {
                Format::Json => render_json(&bundle("census", arguments, None, report.to_json(), det)),
                Format::Csv => census_csv(&report),
                Format::Table => census_csv(&report).replace(',', "\t"),
            })
        }
        Command::Algebra { action } => {
            let (report, table, show) = match action {
                AlgebraCommand::Analyze { path } => {
                    let text = match path {
                        Some(p) => std::fs::read_to_string(p)
                            .map_err(|e| CliError::Compute(format!("cannot read {}: {e}", p.display())))?,
                        None => {
                            let mut s = String::new();
                            std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(compute)?;
                            s
                        }
                    };
                    let t = CayleyTable::parse(&text).map_err(compute)?;
                    (analyze(&t), t, false)
                }
                AlgebraCommand::Rees {
                    group,
                    i_size,
                    lambda_size,
                    sandwich,
                    show_table,
                } => {
                    let spec = rees_spec(group, *i_size, *lambda_size, sandwich.as_deref())?;
                    let t = build_rees(&spec).map_err(compute)?;
                    (analyze(&t), t, *show_table)
                }
            };
            Ok(match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    let mut payload = report.to_json();
                    if show {
                        payload["table"] = json!(table.to_text());
                    }
                    render_json(&bundle("algebra", arguments, None, payload, det))
                }
                Format::Csv | Format::Table => {
                    let mut s = algebra_text(&report, &table);
                    if show {
                        s.push_str(&table.to_text());
                        if !s.ends_with('\n') {
                            s.push('\n');
                        }
                    }
                    s
                }
            })
        }
        Command::Report { action } => match action {
            ReportCommand::Tables => Ok(report_tables(digits)),
        },
    }
}

fn guard_from_env() -> Result<Guard, CliError> {
    match std::env::var(GUARD_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Guard::with_limit)
            .map_err(|_| CliError::Usage(format!("{GUARD_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(Guard::default()),
    }
}

/// The distribution simulations are checked against. At `n = 2` the closed
/// form does not describe `X₂` (it assigns negative mass to `x = 1`), so the
/// census of the six squares is used instead.
pub fn reference_pmf(n: u32) -> Result<(PmfTable, &'static str), CliError> {
    if n == 2 {
        let c = census(2, &Guard::default()).map_err(compute)?;
        return Ok((c.pmf_table(), "census"));
    }
    Ok((pmf_table(n).map_err(compute)?, "formula"))
}

fn line_table(n: u32) -> Result<PmfTable, CliError> {
    if n as usize > LINE_DISTRIBUTION_MAX_ORDER {
        return Err(CliError::Usage(format!(
            "the exact distribution is available for n <= {LINE_DISTRIBUTION_MAX_ORDER}"
        )));
    }
    line_pmf_table(n as usize).map_err(compute)
}

/// `count` squares from the same block streams the simulator uses.
pub fn sample_squares(n: usize, seed: u64, count: u64) -> Vec<EnSquare> {
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut block = 0;
    while (out.len() as u64) < count {
        let mut rng = block_rng(seed, block);
        let take = (count - out.len() as u64).min(BLOCK_SIZE);
        for _ in 0..take {
            out.push(sample_uniform(n, &mut rng));
        }
        block += 1;
    }
    out
}

fn sci(c: &ExactCount) -> String {
    c.to_scientific(6).to_string()
}

fn prob_sig(p: &ExactProb, digits: usize) -> String {
    to_scientific(p.as_rational(), digits, Rounding::HalfEven).positional()
}

fn count_rows(b: &CountBreakdown, breakdown: bool) -> Vec<(&'static str, &ExactCount)> {
    let mut rows = vec![("omega", &b.omega), ("sigma", &b.sigma), ("s_asymptotic", &b.s_asymptotic)];
    if breakdown {
        rows.extend([
            ("r", &b.r),
            ("m_term", &b.m_term),
            ("rc", &b.rc),
            ("rcc", &b.rcc),
            ("rrcc", &b.rrcc),
        ]);
    }
    rows
}

fn count_csv(b: &CountBreakdown, breakdown: bool, digits: usize) -> String {
    let mut s = String::from("quantity,exact,approx\n");
    s.push_str(&format!("n,{},{}\n", b.n, b.n));
    for (name, c) in count_rows(b, breakdown) {
        s.push_str(&format!("{name},{},{}\n", c.value(), sci(c)));
    }
    let ratio = b.sigma_ratio();
    s.push_str(&format!("sigma_ratio,{ratio},{}\n", prob_sig(&ratio, digits)));
    s.push_str(&format!(
        "prob_consecutive,{},{}\n",
        b.prob_consecutive,
        prob_sig(&b.prob_consecutive, digits)
    ));
    s
}

fn count_table(b: &CountBreakdown, breakdown: bool, digits: usize) -> String {
    let label = |k: &str| match k {
        "omega" => "|Omega_n|",
        "sigma" => "|Sigma_n|",
        "s_asymptotic" => "S(n)",
        "r" => "|R|",
        "m_term" => "M (middle row and column)",
        "rc" => "|R_i C_i|",
        "rcc" => "|R_i C_i C_i'|",
        "rrcc" => "|R_i R_i' C_i C_i'|",
        _ => "",
    };
    let mut s = format!("{:<28}{}\n", "n", b.n);
    for (name, c) in count_rows(b, breakdown) {
        s.push_str(&format!("{:<28}{}  ({})\n", label(name), c.value(), sci(c)));
    }
    let ratio = b.sigma_ratio();
    s.push_str(&format!("{:<28}{}  ({})\n", "|Sigma_n|/S(n)", ratio, prob_sig(&ratio, digits)));
    let p = &b.prob_consecutive;
    s.push_str(&format!(
        "{:<28}{}  ({}, {})\n",
        "P(consecutive)",
        p,
        prob_sig(p, digits),
        p.to_scientific(6)
    ));
    s
}

pub fn breakdown_to_json(b: &CountBreakdown) -> Value {
    json!({
        "n": b.n,
        "omega": b.omega.value().to_string(),
        "sigma": b.sigma.value().to_string(),
        "s_asymptotic": b.s_asymptotic.value().to_string(),
        "r": b.r.value().to_string(),
        "m_term": b.m_term.value().to_string(),
        "rc": b.rc.value().to_string(),
        "rcc": b.rcc.value().to_string(),
        "rrcc": b.rrcc.value().to_string(),
        "sigma_ratio": b.sigma_ratio().to_string(),
        "prob_consecutive": b.prob_consecutive.to_string(),
    })
}

fn parse_count(v: &Value, key: &str) -> Option<ExactCount> {
    v.get(key)?.as_str()?.parse().ok().map(ExactCount::new)
}

/// Parses `a/b` or an integer.
pub fn parse_prob(s: &str) -> Option<ExactProb> {
    let (a, b) = s.split_once('/').unwrap_or((s, "1"));
    ExactProb::new(
        a.trim().parse::<num_bigint::BigInt>().ok()?,
        b.trim().parse::<num_bigint::BigInt>().ok()?,
    )
    .ok()
}

pub fn breakdown_from_json(v: &Value) -> Option<CountBreakdown> {
    let s_asymptotic = parse_count(v, "s_asymptotic")?;
    Some(CountBreakdown {
        n: v.get("n")?.as_u64()? as u32,
        omega: parse_count(v, "omega")?,
        sigma: parse_count(v, "sigma")?,
        r: parse_count(v, "r")?,
        m_term: parse_count(v, "m_term")?,
        rc: parse_count(v, "rc")?,
        rcc: parse_count(v, "rcc")?,
        rrcc: parse_count(v, "rrcc")?,
        s_asymptotic_ln: s_asymptotic.ln(),
        s_asymptotic,
        prob_consecutive: parse_prob(v.get("prob_consecutive")?.as_str()?)?,
    })
}

/// Rows `(label, probability)`: every `x`, or `0, 1, 2, ≥3`.
fn pmf_rows(t: &PmfTable, full: bool) -> Vec<(String, ExactProb)> {
    if full {
        t.entries.iter().enumerate().map(|(x, p)| (x.to_string(), p.clone())).collect()
    } else {
        let mut rows: Vec<_> = (0..3).map(|x| (x.to_string(), t.get(x))).collect();
        rows.push((">=3".to_string(), t.tail(3)));
        rows
    }
}

fn pmf_csv(t: &PmfTable, full: bool, digits: usize) -> String {
    let mut s = String::from("x,probability,fraction\n");
    for (x, p) in pmf_rows(t, full) {
        s.push_str(&format!("{x},{},{p}\n", prob_sig(&p, digits)));
    }
    s
}

fn pmf_text(t: &PmfTable, full: bool, digits: usize) -> String {
    let mut s = format!("n = {}\n", t.n);
    for (x, p) in pmf_rows(t, full) {
        s.push_str(&format!("P(X = {x:<3}) = {:<22}{p}\n", prob_sig(&p, digits)).replace("= >=", ">="));
    }
    s
}

pub fn pmf_to_json(t: &PmfTable, digits: usize) -> Value {
    let entries: BTreeMap<String, Value> = t
        .entries
        .iter()
        .enumerate()
        .map(|(x, p)| (x.to_string(), json!({ "fraction": p.to_string(), "decimal": prob_sig(p, digits) })))
        .collect();
    json!({
        "n": t.n,
        "entries": entries,
        "tail_zero_from": t.tail_zero_from,
    })
}

pub fn pmf_from_json(v: &Value) -> Option<PmfTable> {
    let map = v.get("entries")?.as_object()?;
    let mut pairs: Vec<(usize, ExactProb)> = map
        .iter()
        .map(|(k, e)| Some((k.parse().ok()?, parse_prob(e.get("fraction")?.as_str()?)?)))
        .collect::<Option<_>>()?;
    pairs.sort_by_key(|(x, _)| *x);
    if pairs.iter().enumerate().any(|(i, (x, _))| i != *x) {
        return None;
    }
    Some(PmfTable {
        n: v.get("n")?.as_u64()? as u32,
        entries: pairs.into_iter().map(|(_, p)| p).collect(),
        tail_zero_from: v.get("tail_zero_from")?.as_u64()? as u32,
    })
}

/// Parses the `x,probability,fraction` CSV back into `(label, probability)`.
pub fn pmf_rows_from_csv(text: &str) -> Option<Vec<(String, ExactProb)>> {
    let mut lines = text.lines();
    if lines.next()? != "x,probability,fraction" {
        return None;
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut f = l.split(',');
            let x = f.next()?.to_string();
            let _decimal = f.next()?;
            Some((x, parse_prob(f.next()?)?))
        })
        .collect()
}

fn checks_csv(counts: &BTreeMap<usize, u64>, checks: &[BandCheck], digits: usize) -> String {
    let mut s = String::from("x,count,empirical,exact,band,within\n");
    for c in checks {
        let count: u64 = match c.bucket {
            crate::montecarlo::Bucket::Exactly(x) => counts.get(&x).copied().unwrap_or(0),
            crate::montecarlo::Bucket::AtLeast(x) => counts.range(x..).map(|(_, v)| v).sum(),
        };
        let exact = if c.exact.is_zero() {
            "0".to_string()
        } else {
            prob_sig(&c.exact, digits)
        };
        s.push_str(&format!(
            "{},{count},{},{exact},{:.3e},{}\n",
            c.bucket.label(),
            c.empirical.to_f64(),
            c.band_halfwidth,
            c.within
        ));
    }
    s
}

fn census_csv(r: &CensusReport) -> String {
    let mut s = String::from("statistic,value,count\n");
    s.push_str(&format!("total,,{}\n", r.total));
    for (x, c) in &r.by_x {
        s.push_str(&format!("x,{x},{c}\n"));
    }
    for (y, c) in &r.by_y {
        s.push_str(&format!("y,{y},{c}\n"));
    }
    s.push_str(&format!("row_consecutive,,{}\n", r.row_consecutive));
    s.push_str(&format!("row_and_col,,{}\n", r.row_and_col));
    s.push_str(&format!("latin,,{}\n", r.latin));
    s
}

fn rees_spec(group: &str, i_size: usize, lambda_size: usize, sandwich: Option<&str>) -> Result<ReesSpec, CliError> {
    let g = if let Some(k) = group.strip_prefix("cyclic:") {
        let k: usize = k
            .parse()
            .map_err(|_| CliError::Usage(format!("bad cyclic group order in {group:?}")))?;
        if k == 0 {
            return Err(CliError::Usage("cyclic group order must be positive".into()));
        }
        CayleyTable::cyclic(k)
    } else {
        let text = std::fs::read_to_string(group)
            .map_err(|e| CliError::Usage(format!("--group must be cyclic:K or a readable file ({e})")))?;
        CayleyTable::parse(&text).map_err(compute)?
    };
    if i_size == 0 || lambda_size == 0 {
        return Err(CliError::Usage("--i and --lambda must be positive".into()));
    }
    match sandwich {
        None => ReesSpec::with_identity_sandwich(g, i_size, lambda_size).map_err(compute),
        Some(s) => {
            let rows: Vec<Vec<usize>> = s
                .split(';')
                .map(|row| row.split(',').map(|e| e.trim().parse::<usize>()).collect())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("cannot parse sandwich matrix {s:?}")))?;
            ReesSpec::new(g, i_size, lambda_size, rows).map_err(compute)
        }
    }
}

fn algebra_text(r: &AlgebraReport, t: &CayleyTable) -> String {
    let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let proof = fiber_proof(t);
    let mut s = format!("order                  {}\n", r.order);
    s.push_str(&format!("equi-n-square          {}\n", r.is_equi_n_square));
    s.push_str(&format!("latin                  {}\n", r.is_latin));
    s.push_str(&format!("associative            {}\n", r.is_associative));
    s.push_str(&format!("left identity-like     {}\n", list(&r.left_identity_like)));
    s.push_str(&format!("right identity-like    {}\n", list(&r.right_identity_like)));
    let rev: Vec<String> = r
        .reverse_identity_like
        .iter()
        .map(|(i, side)| format!("{i}{}", if *side == crate::algebra::Side::Left { "L" } else { "R" }))
        .collect();
    s.push_str(&format!("reverse identity-like  {}\n", rev.join(" ")));
    let fibers: Vec<String> = proof.fiber_sizes.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    s.push_str(&format!("fiber sizes            {}\n", fibers.join(" ")));
    s
}

/// Significant digits each row is shown with in the short columns.
const TABLE1_SIG: [(u32, usize); 7] = [(2, 1), (3, 8), (4, 8), (5, 8), (6, 7), (7, 7), (8, 5)];
/// `(n, significant digits for counts, decimal places for the ratio)`.
const TABLE2_SHORT: [(u32, usize, usize); 8] = [
    (2, 1, 3),
    (3, 3, 3),
    (4, 3, 3),
    (5, 3, 3),
    (6, 4, 4),
    (7, 5, 5),
    (8, 6, 6),
    (9, 6, 8),
];

/// Table 1 (`P(consecutive)` for `n = 2..8`) and Table 2 (`|Σₙ|`, `S(n)`,
/// their ratio for `n = 2..9`) as two CSV blocks separated by a blank line.
/// The `short` columns use the per-row precision of the published tables;
/// the ratio's short column is truncated, every other rounding is half-even.
pub fn report_tables(digits: usize) -> String {
    let mut s = String::from("n,probability_fraction,probability,probability_short\n");
    for (n, sig) in TABLE1_SIG {
        let p = CountBreakdown::compute(n).prob_consecutive;
        let short = to_scientific(p.as_rational(), sig, Rounding::HalfEven);
        let short = if short.exponent < -3 { short.to_string() } else { short.positional() };
        s.push_str(&format!("{n},{p},{},{short}\n", prob_sig(&p, digits)));
    }
    s.push('\n');
    s.push_str("n,sigma,s_asymptotic,sigma_short,s_asymptotic_short,ratio_fraction,ratio,ratio_short\n");
    for (n, sig, places) in TABLE2_SHORT {
        let b = CountBreakdown::compute(n);
        let short = |c: &ExactCount| {
            if n <= 3 {
                c.value().to_string()
            } else {
                c.to_scientific(sig).to_string()
            }
        };
        let ratio = b.sigma_ratio();
        s.push_str(&format!(
            "{n},{},{},{},{},{ratio},{},{}\n",
            b.sigma.value(),
            b.s_asymptotic.value(),
            short(&b.sigma),
            short(&b.s_asymptotic),
            prob_sig(&ratio, digits),
            crate::numerics::to_decimal_with(ratio.as_rational(), places, Rounding::TowardZero)
        ));
    }
    s
}
