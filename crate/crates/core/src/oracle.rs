//! Exhaustive enumeration of all equi-n-squares of small order.
//!
//! This is the ground truth for the closed forms in [`crate::counting`]. It
//! deliberately does no symmetry reduction: every arrangement of the
//! multiset is visited once, in lexicographic order of the flat cell
//! sequence, by an in-place multiset successor step.
//!
//! |Ω₃| = 1680 is instant. |Ω₄| = 63 063 000 takes a while and must be
//! requested explicitly through [`Guard`]; |Ω₅| ≈ 6.2·10¹⁴ is out of reach.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::counting::PmfTable;
use crate::numerics::{binomial, factorial_unsigned, ExactProb};
use crate::squares::{line_orientation, EnSquare};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("order {n} exceeds the enumeration guard limit {limit}; |Ω_{n}| is too large to visit by default")]
    GuardExceeded { n: usize, limit: usize },
    #[error("row index {i} out of range 1..={n}")]
    RowIndex { i: usize, n: usize },
    #[error("invalid census document: {0}")]
    Schema(String),
}

/// Largest order the enumerator will visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guard {
    pub limit: usize,
}

impl Default for Guard {
    fn default() -> Self {
        Self { limit: 3 }
    }
}

impl Guard {
    pub fn with_limit(limit: usize) -> Self {
        Self { limit }
    }

    fn check(&self, n: usize) -> Result<(), OracleError> {
        if n > self.limit || n == 0 {
            return Err(OracleError::GuardExceeded {
                n,
                limit: self.limit,
            });
        }
        Ok(())
    }
}

/// Rearranges `v` into its lexicographic successor. Returns `false` (and
/// leaves `v` sorted ascending) when `v` was the last arrangement.
pub fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.reverse();
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Visits every square of order `n` in lexicographic order. The slice
/// passed to `visit` is reused between calls.
pub fn enumerate_all<F: FnMut(&[u8])>(n: usize, guard: &Guard, visit: F) -> Result<u64, OracleError> {
    guard.check(n)?;
    Ok(enumerate_with_prefix(n, &[], visit))
}

/// Visits every square whose first cells equal `prefix`, in lexicographic
/// order. A prefix that overuses a symbol yields no squares.
pub fn enumerate_with_prefix<F: FnMut(&[u8])>(n: usize, prefix: &[u8], mut visit: F) -> u64 {
    let mut remaining = vec![n; n + 1];
    for &s in prefix {
        if s == 0 || s as usize > n || remaining[s as usize] == 0 {
            return 0;
        }
        remaining[s as usize] -= 1;
    }
    let mut cells = prefix.to_vec();
    for (s, &k) in remaining.iter().enumerate().skip(1) {
        cells.extend(std::iter::repeat_n(s as u8, k));
    }
    let split = prefix.len();
    let mut visited = 0u64;
    loop {
        visit(&cells);
        visited += 1;
        if !next_permutation(&mut cells[split..]) {
            return visited;
        }
    }
}

/// All first rows, in lexicographic order: every word of length `n` over
/// `1..=n` (no symbol can exceed its multiplicity within a single row).
pub fn first_row_prefixes(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut word = vec![1u8; n];
    loop {
        out.push(word.clone());
        let mut k = n;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if (word[k] as usize) < n {
                word[k] += 1;
                word[k + 1..].fill(1);
                break;
            }
        }
    }
}

/// Exact tallies over all of `Ωₙ`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CensusReport {
    pub n: usize,
    pub total: u64,
    /// Number of squares with each value of `Xₙ`.
    pub by_x: BTreeMap<usize, u64>,
    /// Number of squares with each value of `Yₙ`.
    pub by_y: BTreeMap<usize, u64>,
    /// `|R|`
    pub row_consecutive: u64,
    /// `|R ∩ C|`
    pub row_and_col: u64,
    pub latin: u64,
}

impl CensusReport {
    fn empty(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    fn record(&mut self, cells: &[u8]) {
        let n = self.n;
        let mut rows = 0usize;
        let mut cols = 0usize;
        let mut y = 0usize;
        let mut seen = vec![0u32; n + 1];
        let mut stamp = 0u32;
        for r in 0..n {
            let row = &cells[r * n..(r + 1) * n];
            rows += usize::from(line_orientation(row.iter().copied(), n).is_some());
            stamp += 1;
            y += usize::from(row.iter().all(|&v| std::mem::replace(&mut seen[v as usize], stamp) != stamp));
        }
        for c in 0..n {
            let col = cells.iter().skip(c).step_by(n).copied();
            cols += usize::from(line_orientation(col.clone(), n).is_some());
            stamp += 1;
            y += usize::from(col.into_iter().all(|v| std::mem::replace(&mut seen[v as usize], stamp) != stamp));
        }
        self.total += 1;
        *self.by_x.entry(rows + cols).or_default() += 1;
        *self.by_y.entry(y).or_default() += 1;
        self.row_consecutive += u64::from(rows > 0);
        self.row_and_col += u64::from(rows > 0 && cols > 0);
        self.latin += u64::from(y == 2 * n);
    }

    /// Field-wise sum of two partial reports over disjoint parts of `Ωₙ`.
    pub fn merge(mut self, other: &CensusReport) -> CensusReport {
        assert_eq!(self.n, other.n, "merging censuses of different orders");
        self.total += other.total;
        for (&k, &v) in &other.by_x {
            *self.by_x.entry(k).or_default() += v;
        }
        for (&k, &v) in &other.by_y {
            *self.by_y.entry(k).or_default() += v;
        }
        self.row_consecutive += other.row_consecutive;
        self.row_and_col += other.row_and_col;
        self.latin += other.latin;
        self
    }

    /// `|Σₙ|` as counted: squares with `Xₙ ≥ 1`.
    pub fn consecutive(&self) -> u64 {
        self.by_x.range(1..).map(|(_, v)| v).sum()
    }

    pub fn by_x_at_least(&self, x: usize) -> u64 {
        self.by_x.range(x..).map(|(_, v)| v).sum()
    }

    /// The observed distribution of `Xₙ` as exact frequencies over
    /// `x ∈ {0, …, max(n, 4, largest observed x)}`.
    pub fn pmf_table(&self) -> PmfTable {
        let top = self
            .by_x
            .keys()
            .next_back()
            .copied()
            .unwrap_or(0)
            .max(self.n.max(4));
        let total = BigUint::from(self.total.max(1));
        let entries: Vec<ExactProb> = (0..=top)
            .map(|x| ExactProb::ratio(&self.by_x.get(&x).copied().unwrap_or(0).into(), &total))
            .collect();
        let tail_zero_from = entries.iter().rposition(|p| !p.is_zero()).map_or(0, |i| i as u32 + 1);
        PmfTable {
            n: self.n as u32,
            entries,
            tail_zero_from,
        }
    }

    /// Canonical JSON: sorted keys, counts as decimal strings.
    pub fn to_json(&self) -> Value {
        let map = |m: &BTreeMap<usize, u64>| -> Value {
            Value::Object(
                m.iter()
                    .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
                    .collect(),
            )
        };
        json!({
            "n": self.n,
            "total": self.total.to_string(),
            "by_x": map(&self.by_x),
            "by_y": map(&self.by_y),
            "row_consecutive": self.row_consecutive.to_string(),
            "row_and_col": self.row_and_col.to_string(),
            "latin": self.latin.to_string(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, OracleError> {
        let bad = |what: &str| OracleError::Schema(what.to_string());
        let count = |key: &str| -> Result<u64, OracleError> {
            v.get(key)
                .and_then(Value::as_str)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(key))
        };
        let map = |key: &str| -> Result<BTreeMap<usize, u64>, OracleError> {
            v.get(key)
                .and_then(Value::as_object)
                .ok_or_else(|| bad(key))?
                .iter()
                .map(|(k, c)| {
                    let k = k.parse().map_err(|_| bad(key))?;
                    let c = c.as_str().and_then(|s| s.parse().ok()).ok_or_else(|| bad(key))?;
                    Ok((k, c))
                })
                .collect()
        };
        Ok(Self {
            n: v.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as usize,
            total: count("total")?,
            by_x: map("by_x")?,
            by_y: map("by_y")?,
            row_consecutive: count("row_consecutive")?,
            row_and_col: count("row_and_col")?,
            latin: count("latin")?,
        })
    }
}

pub fn census(n: usize, guard: &Guard) -> Result<CensusReport, OracleError> {
    let mut report = CensusReport::empty(n);
    enumerate_all(n, guard, |cells| report.record(cells))?;
    Ok(report)
}

/// Census split by first row across the rayon pool; merges to the same
/// report as [`census`].
pub fn census_partitioned(n: usize, guard: &Guard) -> Result<CensusReport, OracleError> {
    guard.check(n)?;
    Ok(first_row_prefixes(n)
        .par_iter()
        .map(|prefix| {
            let mut part = CensusReport::empty(n);
            enumerate_with_prefix(n, prefix, |cells| part.record(cells));
            part
        })
        .reduce(|| CensusReport::empty(n), |a, b| a.merge(&b)))
}

/// Sequential census reporting the running visit count every `every`
/// squares.
pub fn census_with_checkpoints<F: FnMut(u64)>(
    n: usize,
    guard: &Guard,
    every: u64,
    mut checkpoint: F,
) -> Result<CensusReport, OracleError> {
    let mut report = CensusReport::empty(n);
    enumerate_all(n, guard, |cells| {
        report.record(cells);
        if every > 0 && report.total % every == 0 {
            checkpoint(report.total);
        }
    })?;
    Ok(report)
}

/// Counts of the lemma-level subsets for one row/column index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetCounts {
    pub n: usize,
    /// 1-based index.
    pub i: usize,
    /// `|Rᵢ|`
    pub row: u64,
    /// `|Rᵢ ∩ Cᵢ|`
    pub row_col: u64,
    /// `|Rᵢ ∩ Cᵢ ∩ Cᵢ′|`
    pub row_col_col: u64,
    /// `|Rᵢ ∩ Rᵢ′ ∩ Cᵢ ∩ Cᵢ′|`
    pub row_row_col_col: u64,
    /// `|R_mid ∩ C|` for the middle row; 0 when `n` is even.
    pub middle_row_and_col: u64,
}

pub fn census_subsets(n: usize, i: usize, guard: &Guard) -> Result<SubsetCounts, OracleError> {
    if i == 0 || i > n {
        return Err(OracleError::RowIndex { i, n });
    }
    let a = i - 1;
    let b = n - i;
    let mut out = SubsetCounts {
        n,
        i,
        row: 0,
        row_col: 0,
        row_col_col: 0,
        row_row_col_col: 0,
        middle_row_and_col: 0,
    };
    let mut row_ok = vec![false; n];
    let mut col_ok = vec![false; n];
    enumerate_all(n, guard, |cells| {
        for r in 0..n {
            row_ok[r] = line_orientation(cells[r * n..(r + 1) * n].iter().copied(), n).is_some();
        }
        for c in 0..n {
            col_ok[c] = line_orientation(cells.iter().skip(c).step_by(n).copied(), n).is_some();
        }
        let r_i = row_ok[a];
        let rc = r_i && col_ok[a];
        let rcc = rc && col_ok[b];
        let rrcc = rcc && row_ok[b];
        out.row += u64::from(r_i);
        out.row_col += u64::from(rc);
        out.row_col_col += u64::from(rcc);
        out.row_row_col_col += u64::from(rrcc);
        if n % 2 == 1 && row_ok[n / 2] && col_ok.iter().any(|&c| c) {
            out.middle_row_and_col += 1;
        }
    })?;
    Ok(out)
}

/// Collects every square of order `n` (for `n ≤ 3` in practice).
pub fn all_squares(n: usize, guard: &Guard) -> Result<Vec<EnSquare>, OracleError> {
    let mut out = Vec::new();
    enumerate_all(n, guard, |cells| {
        out.push(EnSquare::from_cells(n, cells.to_vec()).expect("enumerator yields valid squares"))
    })?;
    Ok(out)
}

/// Largest order [`line_distribution`] accepts (it walks `3^{2n}` line
/// assignments).
pub const LINE_DISTRIBUTION_MAX_ORDER: usize = 7;

struct LineSweep {
    n: usize,
    grid: Vec<u8>,
    used: Vec<usize>,
    /// `(number of forced lines, free cells, sorted remaining symbol counts)`
    /// to multiplicity.
    shapes: HashMap<(usize, usize, Vec<usize>), u64>,
}

impl LineSweep {
    fn visit(&mut self, line: usize, forced: usize, filled: usize) {
        let n = self.n;
        if line == 2 * n {
            let mut rem: Vec<usize> = self.used[1..].iter().map(|&u| n - u).collect();
            rem.sort_unstable();
            *self.shapes.entry((forced, n * n - filled, rem)).or_default() += 1;
            return;
        }
        self.visit(line + 1, forced, filled);
        // At n = 1 both readings are the same line.
        let orientations: &[bool] = if n == 1 { &[false] } else { &[false, true] };
        for &reverse in orientations {
            let mut written = Vec::with_capacity(n);
            let mut ok = true;
            for j in 0..n {
                let cell = if line < n { line * n + j } else { j * n + (line - n) };
                let v = if reverse { n - j } else { j + 1 } as u8;
                match self.grid[cell] {
                    0 if self.used[v as usize] < n => {
                        self.grid[cell] = v;
                        self.used[v as usize] += 1;
                        written.push(cell);
                    }
                    w if w == v => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                self.visit(line + 1, forced + 1, filled + written.len());
            }
            for cell in written {
                self.used[self.grid[cell] as usize] -= 1;
                self.grid[cell] = 0;
            }
        }
    }
}

/// Exact distribution of `Xₙ` as counts, without enumerating squares.
///
/// For each assignment of "not forced / forward / reverse" to the `2n` lines
/// the squares containing all forced lines number `f! / ∏ (n − uₛ)!` (free
/// cells `f`, symbol `s` already used `uₛ` times), or zero if forced lines
/// clash. Summing by the number `k` of forced lines gives `Sₖ`, and
/// `#{X = x} = Σₖ (−1)^{k−x} C(k, x) Sₖ`.
pub fn line_distribution(n: usize) -> Result<BTreeMap<usize, BigUint>, OracleError> {
    if n == 0 || n > LINE_DISTRIBUTION_MAX_ORDER {
        return Err(OracleError::GuardExceeded {
            n,
            limit: LINE_DISTRIBUTION_MAX_ORDER,
        });
    }
    let mut sweep = LineSweep {
        n,
        grid: vec![0; n * n],
        used: vec![0; n + 1],
        shapes: HashMap::new(),
    };
    sweep.visit(0, 0, 0);
    let mut s = vec![BigUint::zero(); 2 * n + 1];
    for ((k, free, rem), mult) in sweep.shapes {
        let denom = rem.iter().fold(BigUint::one(), |acc, &r| acc * factorial_unsigned(r));
        s[k] += factorial_unsigned(free) / denom * mult;
    }
    let mut out = BTreeMap::new();
    for x in 0..=2 * n {
        let mut v = BigInt::zero();
        for (k, sk) in s.iter().enumerate().skip(x) {
            let term = BigInt::from(binomial(k as i64, x as i64) * sk);
            if (k - x) % 2 == 0 {
                v += term;
            } else {
                v -= term;
            }
        }
        let v = v.to_biguint().expect("inclusion-exclusion yields a count");
        if !v.is_zero() {
            out.insert(x, v);
        }
    }
    Ok(out)
}

/// [`line_distribution`] as exact probabilities over
/// `x ∈ {0, …, max(n, 4, largest x)}`.
pub fn line_pmf_table(n: usize) -> Result<PmfTable, OracleError> {
    let d = line_distribution(n)?;
    let total: BigUint = d.values().sum();
    let top = d.keys().next_back().copied().unwrap_or(0).max(n.max(4));
    let entries: Vec<ExactProb> = (0..=top)
        .map(|x| d.get(&x).map_or_else(ExactProb::zero, |c| ExactProb::ratio(c, &total)))
        .collect();
    let tail_zero_from = entries.iter().rposition(|p| !p.is_zero()).map_or(0, |i| i as u32 + 1);
    Ok(PmfTable {
        n: n as u32,
        entries,
        tail_zero_from,
    })
}
