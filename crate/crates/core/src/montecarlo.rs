//! Seeded Monte Carlo estimate of the distribution of `Xₙ`.
//!
//! Samples are split into fixed blocks of [`BLOCK_SIZE`]. Block `b` draws
//! from ChaCha8 seeded with the master seed on stream `b`, so the sample
//! sequence depends only on `(n, iterations, seed)`. Workers take contiguous
//! runs of blocks (worker `k` gets `⌈blocks/workers⌉` or the remainder) and
//! their tallies are summed at the end; the worker count never changes the
//! result.

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::BigUint;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::counting::PmfTable;
use crate::numerics::ExactProb;
use crate::squares::{consecutive_line_count, shuffle, shuffle_skipping_first_step, EnSquare};

/// Samples per RNG stream.
pub const BLOCK_SIZE: u64 = 1 << 16;

/// Default spacing of running-trace rows.
pub const DEFAULT_RESOLUTION: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("need at least 2 cells after pooling, got {0}")]
    InsufficientCells(usize),
    #[error("order mismatch: samples are order {stats}, table is order {pmf}")]
    OrderMismatch { stats: u32, pmf: u32 },
    #[error("invalid simulation document: {0}")]
    Schema(String),
}

/// Which shuffle draws each square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    #[default]
    Uniform,
    /// Biased mutant; see [`shuffle_skipping_first_step`].
    SkipFirstStep,
}

impl SamplerKind {
    fn apply(self, cells: &mut [u8], rng: &mut ChaCha8Rng) {
        match self {
            SamplerKind::Uniform => shuffle(cells, rng),
            SamplerKind::SkipFirstStep => shuffle_skipping_first_step(cells, rng),
        }
    }
}

/// The RNG for block `block` under `master_seed`.
pub fn block_rng(master_seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(block);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: u32,
    pub iterations: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub sampler: SamplerKind,
    /// Record running tallies every this many samples.
    pub trace_resolution: Option<u64>,
}

impl SimulationConfig {
    pub fn new(n: u32, iterations: u64, master_seed: u64, workers: usize) -> Self {
        Self {
            n,
            iterations,
            master_seed,
            workers,
            sampler: SamplerKind::Uniform,
            trace_resolution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    pub n: u32,
    pub iterations: u64,
    pub master_seed: u64,
    pub workers: usize,
    /// Tally of `Xₙ` values.
    pub counts: BTreeMap<usize, u64>,
    /// Wall-clock seconds; not part of any deterministic output.
    pub elapsed: f64,
}

impl SampleStats {
    pub fn count(&self, x: usize) -> u64 {
        self.counts.get(&x).copied().unwrap_or(0)
    }

    pub fn count_at_least(&self, x: usize) -> u64 {
        self.counts.range(x..).map(|(_, v)| v).sum()
    }
}

/// One row of the running trace: after `iteration` samples, the fraction
/// with `Xₙ = x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: u64,
    pub x: usize,
    pub empirical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub stats: SampleStats,
    pub trace: Vec<TracePoint>,
}

struct BlockResult {
    counts: Vec<u64>,
    // (samples drawn within the block, tallies so far)
    snapshots: Vec<(u64, Vec<u64>)>,
}

fn run_block(cfg: &SimulationConfig, block: u64, max_x: usize) -> BlockResult {
    let n = cfg.n as usize;
    let start = block * BLOCK_SIZE;
    let len = BLOCK_SIZE.min(cfg.iterations - start);
    let base = EnSquare::sorted(n).cells().to_vec();
    let mut cells = base.clone();
    let mut rng = block_rng(cfg.master_seed, block);
    let mut counts = vec![0u64; max_x + 1];
    let mut snapshots = Vec::new();
    for k in 0..len {
        cells.copy_from_slice(&base);
        cfg.sampler.apply(&mut cells, &mut rng);
        counts[consecutive_line_count(&cells, n)] += 1;
        if let Some(res) = cfg.trace_resolution {
            if (start + k + 1) % res == 0 {
                snapshots.push((k + 1, counts.clone()));
            }
        }
    }
    BlockResult { counts, snapshots }
}

/// Contiguous block ranges per worker.
fn worker_quotas(blocks: u64, workers: usize) -> Vec<std::ops::Range<u64>> {
    let per = blocks.div_ceil(workers as u64).max(1);
    (0..workers as u64)
        .map(|k| (k * per).min(blocks)..((k + 1) * per).min(blocks))
        .collect()
}

pub fn simulate(cfg: &SimulationConfig) -> SimulationOutput {
    assert!(cfg.n >= 1, "order must be positive");
    assert!(cfg.iterations >= 1, "need at least one sample");
    assert!(cfg.workers >= 1, "need at least one worker");
    if let Some(r) = cfg.trace_resolution {
        assert!(r >= 1, "trace resolution must be positive");
    }
    let started = Instant::now();
    let max_x = 2 * cfg.n as usize;
    let blocks = cfg.iterations.div_ceil(BLOCK_SIZE);
    let quotas = worker_quotas(blocks, cfg.workers);
    let mut results: Vec<(u64, BlockResult)> = std::thread::scope(|scope| {
        let handles: Vec<_> = quotas
            .into_iter()
            .map(|range| {
                scope.spawn(move || {
                    range
                        .map(|b| (b, run_block(cfg, b, max_x)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    results.sort_by_key(|(b, _)| *b);

    let mut totals = vec![0u64; max_x + 1];
    let mut trace = Vec::new();
    for (block, result) in &results {
        for (iter_in_block, snap) in &result.snapshots {
            let t = block * BLOCK_SIZE + iter_in_block;
            for x in 0..=max_x {
                let c = totals[x] + snap[x];
                trace.push(TracePoint {
                    iteration: t,
                    x,
                    empirical: c as f64 / t as f64,
                });
            }
        }
        for (t, c) in totals.iter_mut().zip(&result.counts) {
            *t += c;
        }
    }
    let counts = totals
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(x, &c)| (x, c))
        .collect();
    SimulationOutput {
        stats: SampleStats {
            n: cfg.n,
            iterations: cfg.iterations,
            master_seed: cfg.master_seed,
            workers: cfg.workers,
            counts,
            elapsed: started.elapsed().as_secs_f64(),
        },
        trace,
    }
}

pub fn run_simulation(n: u32, iterations: u64, master_seed: u64, workers: usize) -> SampleStats {
    assert!(n >= 2, "order must be at least 2");
    simulate(&SimulationConfig::new(n, iterations, master_seed, workers)).stats
}

/// A value or tail range of `Xₙ` being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bucket {
    Exactly(usize),
    AtLeast(usize),
}

impl Bucket {
    pub fn label(&self) -> String {
        match self {
            Bucket::Exactly(x) => x.to_string(),
            Bucket::AtLeast(x) => format!(">={x}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.strip_prefix(">=") {
            Some(rest) => rest.parse().ok().map(Bucket::AtLeast),
            None => s.parse().ok().map(Bucket::Exactly),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandCheck {
    pub bucket: Bucket,
    pub empirical: ExactProb,
    pub exact: ExactProb,
    pub band_halfwidth: f64,
    pub within: bool,
}

/// `max(5·√(p(1−p)/N), 0.01·p)`.
pub fn band_halfwidth(p: f64, iterations: u64) -> f64 {
    let s = 5.0 * (p * (1.0 - p) / iterations as f64).sqrt();
    s.max(0.01 * p)
}

fn check_bucket(bucket: Bucket, observed: u64, exact: ExactProb, iterations: u64) -> BandCheck {
    let empirical = ExactProb::ratio(&BigUint::from(observed), &BigUint::from(iterations));
    let (band_halfwidth, within) = if exact.is_zero() {
        (0.0, observed == 0)
    } else if !exact.is_probability() {
        (f64::NAN, false)
    } else {
        let p = exact.to_f64();
        let h = band_halfwidth(p, iterations);
        let diff = (&empirical - &exact).to_f64().abs();
        (h, diff <= h)
    };
    BandCheck {
        bucket,
        empirical,
        exact,
        band_halfwidth,
        within,
    }
}

/// One check per support value. For `n ∈ {3, 4, 5}` values from 3 up are
/// pooled into a single `≥ 3` bucket. Observed values outside the support
/// get their own check against probability zero.
pub fn band_check(stats: &SampleStats, pmf: &PmfTable) -> Result<Vec<BandCheck>, MonteCarloError> {
    if stats.n != pmf.n {
        return Err(MonteCarloError::OrderMismatch {
            stats: stats.n,
            pmf: pmf.n,
        });
    }
    let top = pmf.support_max() as usize;
    let pooled = matches!(stats.n, 3..=5);
    let mut checks = Vec::new();
    if pooled {
        for x in 0..3 {
            checks.push(check_bucket(Bucket::Exactly(x), stats.count(x), pmf.get(x as u32), stats.iterations));
        }
        checks.push(check_bucket(
            Bucket::AtLeast(3),
            stats.count_at_least(3),
            pmf.tail(3),
            stats.iterations,
        ));
    } else {
        for x in 0..=top {
            checks.push(check_bucket(Bucket::Exactly(x), stats.count(x), pmf.get(x as u32), stats.iterations));
        }
        for (&x, &c) in stats.counts.range(top + 1..) {
            checks.push(check_bucket(Bucket::Exactly(x), c, ExactProb::zero(), stats.iterations));
        }
    }
    Ok(checks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Cells after pooling.
    pub cells: Vec<Bucket>,
}

/// Pearson statistic of observed counts against expected counts, with
/// `cells − 1` degrees of freedom.
pub fn pearson(observed: &[u64], expected: &[f64]) -> Result<(f64, usize, f64), MonteCarloError> {
    assert_eq!(observed.len(), expected.len());
    if observed.len() < 2 {
        return Err(MonteCarloError::InsufficientCells(observed.len()));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok((statistic, dof, dist.sf(statistic)))
}

/// Pearson goodness of fit against the exact distribution. Cells whose
/// expected count is below `min_expected` are pooled into the upper tail.
pub fn chi_square_gof(
    stats: &SampleStats,
    pmf: &PmfTable,
    min_expected: f64,
) -> Result<ChiSquare, MonteCarloError> {
    if stats.n != pmf.n {
        return Err(MonteCarloError::OrderMismatch {
            stats: stats.n,
            pmf: pmf.n,
        });
    }
    let n_samples = stats.iterations as f64;
    let top = pmf
        .support_max()
        .max(stats.counts.keys().next_back().copied().unwrap_or(0) as u32) as usize;
    let expected: Vec<f64> = (0..=top).map(|x| pmf.get(x as u32).to_f64() * n_samples).collect();
    let observed: Vec<u64> = (0..=top).map(|x| stats.count(x)).collect();

    // Grow the tail downward until it carries enough expectation.
    let mut tail_start = top + 1;
    let mut tail_expected = 0.0;
    while tail_start > 0 && tail_expected < min_expected {
        tail_start -= 1;
        tail_expected += expected[tail_start];
    }
    let mut cells = Vec::new();
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut tail_obs: u64 = observed[tail_start..].iter().sum();
    for x in 0..tail_start {
        if expected[x] < min_expected {
            tail_obs += observed[x];
            tail_expected += expected[x];
        } else {
            cells.push(Bucket::Exactly(x));
            obs.push(observed[x]);
            exp.push(expected[x]);
        }
    }
    cells.push(if tail_start == top {
        Bucket::Exactly(top)
    } else {
        Bucket::AtLeast(tail_start)
    });
    obs.push(tail_obs);
    exp.push(tail_expected);
    if cells.len() < 2 {
        return Err(MonteCarloError::InsufficientCells(cells.len()));
    }
    let (statistic, degrees_of_freedom, p_value) = pearson(&obs, &exp)?;
    Ok(ChiSquare {
        statistic,
        degrees_of_freedom,
        p_value,
        cells,
    })
}

/// Summary document with sorted keys; counts and rationals as strings.
pub fn summary_json(stats: &SampleStats, checks: &[BandCheck]) -> Value {
    let counts: serde_json::Map<String, Value> = stats
        .counts
        .iter()
        .map(|(x, c)| (x.to_string(), Value::String(c.to_string())))
        .collect();
    let checks: Vec<Value> = checks
        .iter()
        .map(|c| {
            json!({
                "x": c.bucket.label(),
                "empirical": c.empirical.to_string(),
                "exact": c.exact.to_string(),
                "band": c.band_halfwidth,
                "within": c.within,
            })
        })
        .collect();
    json!({
        "n": stats.n,
        "iterations": stats.iterations.to_string(),
        "seed": stats.master_seed.to_string(),
        "workers": stats.workers,
        "counts": counts,
        "checks": checks,
    })
}

fn parse_rational(s: &str) -> Option<ExactProb> {
    let (a, b) = s.split_once('/').unwrap_or((s, "1"));
    ExactProb::new(
        a.parse::<num_bigint::BigInt>().ok()?,
        b.parse::<num_bigint::BigInt>().ok()?,
    )
    .ok()
}

/// Inverse of [`summary_json`]. `elapsed` is not serialized and comes back
/// as zero.
pub fn parse_summary(v: &Value) -> Result<(SampleStats, Vec<BandCheck>), MonteCarloError> {
    let bad = |what: &str| MonteCarloError::Schema(what.to_string());
    let str_u64 = |key: &str| -> Result<u64, MonteCarloError> {
        v.get(key)
            .and_then(Value::as_str)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(key))
    };
    let counts = v
        .get("counts")
        .and_then(Value::as_object)
        .ok_or_else(|| bad("counts"))?
        .iter()
        .map(|(k, c)| {
            Ok((
                k.parse().map_err(|_| bad("counts key"))?,
                c.as_str().and_then(|s| s.parse().ok()).ok_or_else(|| bad("count"))?,
            ))
        })
        .collect::<Result<_, MonteCarloError>>()?;
    let stats = SampleStats {
        n: v.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as u32,
        iterations: str_u64("iterations")?,
        master_seed: str_u64("seed")?,
        workers: v.get("workers").and_then(Value::as_u64).ok_or_else(|| bad("workers"))? as usize,
        counts,
        elapsed: 0.0,
    };
    let checks = v
        .get("checks")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("checks"))?
        .iter()
        .map(|c| {
            Ok(BandCheck {
                bucket: c.get("x").and_then(Value::as_str).and_then(Bucket::parse).ok_or_else(|| bad("x"))?,
                empirical: c.get("empirical").and_then(Value::as_str).and_then(parse_rational).ok_or_else(|| bad("empirical"))?,
                exact: c.get("exact").and_then(Value::as_str).and_then(parse_rational).ok_or_else(|| bad("exact"))?,
                band_halfwidth: c.get("band").and_then(Value::as_f64).unwrap_or(f64::NAN),
                within: c.get("within").and_then(Value::as_bool).ok_or_else(|| bad("within"))?,
            })
        })
        .collect::<Result<_, MonteCarloError>>()?;
    Ok((stats, checks))
}

/// Running trace as CSV with header `iteration,x,empirical`.
pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut s = String::from("iteration,x,empirical\n");
    for p in trace {
        s.push_str(&format!("{},{},{}\n", p.iteration, p.x, p.empirical));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::pmf_table;

    #[test]
    fn quotas_cover_blocks() {
        assert_eq!(worker_quotas(10, 3), vec![0..4, 4..8, 8..10]);
        assert_eq!(worker_quotas(2, 4), vec![0..1, 1..2, 2..2, 2..2]);
        assert_eq!(worker_quotas(1, 1), vec![0..1]);
    }

    #[test]
    fn counts_sum_to_iterations() {
        let s = run_simulation(4, 150_001, 7, 3);
        assert_eq!(s.counts.values().sum::<u64>(), 150_001);
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let a = run_simulation(3, 200_000, 11, 1);
        let b = run_simulation(3, 200_000, 11, 8);
        let c = run_simulation(3, 200_000, 11, 5);
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.counts, c.counts);
        let d = run_simulation(3, 200_000, 12, 1);
        assert_ne!(a.counts, d.counts);
    }

    #[test]
    fn order_two_support() {
        let s = run_simulation(2, 10_000, 3, 2);
        assert!(s.counts.keys().all(|&x| x == 2 || x == 4));
    }

    #[test]
    fn band_rule() {
        assert_eq!(band_halfwidth(0.5, 100), 0.25);
        let p = 0.0863048063048;
        let h = band_halfwidth(p, 100_000_000);
        assert_eq!(h, (5.0 * (p * (1.0 - p) / 1e8).sqrt()).max(0.01 * p));
        assert_eq!(h, 0.01 * p);
    }

    #[test]
    fn zero_probability_needs_zero_count() {
        let zero = check_bucket(Bucket::Exactly(5), 0, ExactProb::zero(), 100);
        assert!(zero.within);
        assert_eq!(zero.band_halfwidth, 0.0);
        assert!(!check_bucket(Bucket::Exactly(5), 1, ExactProb::zero(), 100).within);
    }

    #[test]
    fn band_check_pools_tail_for_small_orders() {
        let s = run_simulation(5, 100_000, 1, 2);
        let t = pmf_table(5).unwrap();
        let checks = band_check(&s, &t).unwrap();
        let labels: Vec<String> = checks.iter().map(|c| c.bucket.label()).collect();
        assert_eq!(labels, vec!["0", "1", "2", ">=3"]);
        let tail = ExactProb::one() - t.get(0) - t.get(1) - t.get(2);
        assert_eq!(checks[3].exact, tail);
        let six = run_simulation(6, 1000, 1, 1);
        let checks = band_check(&six, &pmf_table(6).unwrap()).unwrap();
        assert_eq!(checks.len(), 7);
        assert!(band_check(&six, &t).is_err());
    }

    #[test]
    fn pooling_matches_hand_computation() {
        let stats = SampleStats {
            n: 9,
            iterations: 100,
            master_seed: 0,
            workers: 1,
            counts: BTreeMap::from([(0, 48), (1, 33), (2, 14), (3, 5)]),
            elapsed: 0.0,
        };
        let probs = [(1, 2), (3, 10), (3, 20), (1, 20)];
        let mut entries: Vec<ExactProb> = probs.iter().map(|&(a, b)| ExactProb::new(a, b).unwrap()).collect();
        entries.resize(10, ExactProb::zero());
        let table = PmfTable {
            n: 9,
            entries,
            tail_zero_from: 4,
        };
        let chi = chi_square_gof(&stats, &table, 10.0).unwrap();
        assert_eq!(chi.cells, vec![Bucket::Exactly(0), Bucket::Exactly(1), Bucket::AtLeast(2)]);
        assert_eq!(chi.degrees_of_freedom, 2);
        assert!((chi.statistic - (4.0 / 50.0 + 9.0 / 30.0 + 1.0 / 20.0)).abs() < 1e-12);
        assert!(matches!(
            chi_square_gof(&stats, &table, 1000.0),
            Err(MonteCarloError::InsufficientCells(1))
        ));
    }

    #[test]
    fn trace_rows() {
        let mut cfg = SimulationConfig::new(3, 100_000, 5, 4);
        cfg.trace_resolution = Some(10_000);
        let out = simulate(&cfg);
        assert_eq!(out.trace.len(), 10 * 7);
        let last: Vec<&TracePoint> = out.trace.iter().filter(|p| p.iteration == 100_000).collect();
        for p in last {
            assert_eq!(p.empirical, out.stats.count(p.x) as f64 / 100_000.0);
        }
        let csv = trace_csv(&out.trace);
        assert!(csv.starts_with("iteration,x,empirical\n10000,0,"));
        // Trace is independent of the worker split.
        cfg.workers = 1;
        assert_eq!(simulate(&cfg).trace, out.trace);
    }

    #[test]
    fn summary_round_trip() {
        let s = run_simulation(3, 20_000, 9, 2);
        let checks = band_check(&s, &pmf_table(3).unwrap()).unwrap();
        let v = summary_json(&s, &checks);
        let (back, back_checks) = parse_summary(&v).unwrap();
        assert_eq!(back.counts, s.counts);
        assert_eq!(back.iterations, s.iterations);
        assert_eq!(back_checks, checks);
    }
}
