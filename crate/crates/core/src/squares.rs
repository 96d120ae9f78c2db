//! The equi-n-square type, its line statistics, and uniform sampling.
//!
//! Cells are stored row-major in one flat buffer with symbols `1..=n`.

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::RngCore;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SquareError {
    #[error("order must be between 1 and 255, got {0}")]
    Order(usize),
    #[error("expected {expected} cells, got {got}")]
    Length { expected: usize, got: usize },
    #[error("symbol {symbol} at cell {index} is outside 1..={n}")]
    SymbolRange { symbol: i64, index: usize, n: usize },
    #[error("symbol {symbol} occurs {count} times")]
    MultisetViolation { symbol: u8, count: usize },
    #[error("malformed square text: {0}")]
    Parse(String),
}

/// An `n × n` arrangement of the multiset `{1ⁿ, 2ⁿ, …, nⁿ}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnSquare {
    n: usize,
    cells: Vec<u8>,
}

impl EnSquare {
    /// Validates `cells` (row-major) as an equi-n-square.
    pub fn new(n: usize, cells: &[i64]) -> Result<Self, SquareError> {
        if n == 0 || n > 255 {
            return Err(SquareError::Order(n));
        }
        if cells.len() != n * n {
            return Err(SquareError::Length {
                expected: n * n,
                got: cells.len(),
            });
        }
        let mut out = Vec::with_capacity(n * n);
        for (index, &symbol) in cells.iter().enumerate() {
            if symbol < 1 || symbol > n as i64 {
                return Err(SquareError::SymbolRange { symbol, index, n });
            }
            out.push(symbol as u8);
        }
        Self::from_cells(n, out)
    }

    pub fn from_cells(n: usize, cells: Vec<u8>) -> Result<Self, SquareError> {
        if n == 0 || n > 255 {
            return Err(SquareError::Order(n));
        }
        if cells.len() != n * n {
            return Err(SquareError::Length {
                expected: n * n,
                got: cells.len(),
            });
        }
        let mut counts = vec![0usize; n + 1];
        for (index, &s) in cells.iter().enumerate() {
            if s == 0 || s as usize > n {
                return Err(SquareError::SymbolRange {
                    symbol: s.into(),
                    index,
                    n,
                });
            }
            counts[s as usize] += 1;
        }
        if let Some((symbol, &count)) = counts.iter().enumerate().skip(1).find(|(_, &c)| c != n) {
            return Err(SquareError::MultisetViolation {
                symbol: symbol as u8,
                count,
            });
        }
        Ok(Self { n, cells })
    }

    /// The sorted multiset `1…1 2…2 … n…n`, which is also the
    /// lexicographically first square.
    pub fn sorted(n: usize) -> Self {
        assert!((1..=255).contains(&n), "order out of range");
        let cells = (1..=n as u8).flat_map(|v| std::iter::repeat_n(v, n)).collect();
        Self { n, cells }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.n + col]
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.cells[r * self.n..(r + 1) * self.n]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = u8> + Clone + '_ {
        self.cells.iter().skip(c).step_by(self.n).copied()
    }

    /// Quarter turn clockwise.
    pub fn rotate90(&self) -> Self {
        let n = self.n;
        let mut cells = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                cells[c * n + (n - 1 - r)] = self.get(r, c);
            }
        }
        Self { n, cells }
    }

    /// Mirror across the vertical axis (columns reversed).
    pub fn reflect_vertical(&self) -> Self {
        let cells = self
            .cells
            .chunks(self.n)
            .flat_map(|row| row.iter().rev().copied())
            .collect();
        Self { n: self.n, cells }
    }

    /// Mirror across the horizontal axis (rows reversed).
    pub fn reflect_horizontal(&self) -> Self {
        let cells = self.cells.chunks(self.n).rev().flatten().copied().collect();
        Self { n: self.n, cells }
    }

    pub fn line_statistic(&self) -> LineStatistic {
        line_statistic(self)
    }

    pub fn is_latin(&self) -> bool {
        is_latin(self)
    }

    pub fn permutation_line_count(&self) -> usize {
        permutation_line_count(self)
    }

    /// Text form: the order on the first line, then one row per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for row in self.cells.chunks(self.n) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for EnSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Parses the order line followed by `n` rows of integers.
pub fn parse_grid(s: &str) -> Result<(usize, Vec<i64>), SquareError> {
    let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
    let head = lines
        .next()
        .ok_or_else(|| SquareError::Parse("missing order line".into()))?;
    let n: usize = head
        .parse()
        .map_err(|_| SquareError::Parse(format!("bad order line {head:?}")))?;
    let mut cells = Vec::with_capacity(n * n);
    for (r, line) in lines.enumerate() {
        if r >= n {
            return Err(SquareError::Parse(format!("more than {n} rows")));
        }
        let row: Vec<i64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| SquareError::Parse(format!("bad integer {t:?}"))))
            .collect::<Result<_, _>>()?;
        if row.len() != n {
            return Err(SquareError::Parse(format!(
                "row {} has {} entries, expected {n}",
                r + 1,
                row.len()
            )));
        }
        cells.extend(row);
    }
    if cells.len() != n * n {
        return Err(SquareError::Parse(format!("expected {n} rows")));
    }
    Ok((n, cells))
}

impl FromStr for EnSquare {
    type Err = SquareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, cells) = parse_grid(s)?;
        EnSquare::new(n, &cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    /// Reads `1, 2, …, n`.
    Forward,
    /// Reads `n, …, 2, 1`.
    Reverse,
}

/// The consecutive lines of a square; `x` is the value of `Xₙ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineStatistic {
    pub x: usize,
    /// `(row index, orientation)`, 0-based, ascending.
    pub consecutive_rows: Vec<(usize, Orientation)>,
    pub consecutive_cols: Vec<(usize, Orientation)>,
}

/// Orientation of a line if it is consecutive. At `n = 1` the single
/// symbol reads as forward.
pub fn line_orientation(line: impl Iterator<Item = u8> + Clone, n: usize) -> Option<Orientation> {
    if line.clone().zip(1..=n).all(|(v, k)| v as usize == k) {
        Some(Orientation::Forward)
    } else if line.zip((1..=n).rev()).all(|(v, k)| v as usize == k) {
        Some(Orientation::Reverse)
    } else {
        None
    }
}

pub fn line_statistic(s: &EnSquare) -> LineStatistic {
    let n = s.n;
    let consecutive_rows: Vec<_> = (0..n)
        .filter_map(|r| line_orientation(s.row(r).iter().copied(), n).map(|o| (r, o)))
        .collect();
    let consecutive_cols: Vec<_> = (0..n)
        .filter_map(|c| line_orientation(s.column(c), n).map(|o| (c, o)))
        .collect();
    LineStatistic {
        x: consecutive_rows.len() + consecutive_cols.len(),
        consecutive_rows,
        consecutive_cols,
    }
}

/// `Xₙ` alone, without allocation, on a row-major cell buffer.
#[inline]
pub fn consecutive_line_count(cells: &[u8], n: usize) -> usize {
    let top = n as u8 + 1;
    let mut x = 0;
    for r in 0..n {
        let row = &cells[r * n..(r + 1) * n];
        let first = row[0];
        if first == 1 {
            if row.iter().enumerate().all(|(j, &v)| v as usize == j + 1) {
                x += 1;
            }
        } else if first as usize == n && row.iter().enumerate().all(|(j, &v)| v == top - 1 - j as u8) {
            x += 1;
        }
    }
    for c in 0..n {
        let first = cells[c];
        if first == 1 {
            if (0..n).all(|j| cells[j * n + c] as usize == j + 1) {
                x += 1;
            }
        } else if first as usize == n && (0..n).all(|j| cells[j * n + c] == top - 1 - j as u8) {
            x += 1;
        }
    }
    x
}

fn is_permutation(line: impl Iterator<Item = u8>, n: usize) -> bool {
    let mut seen = vec![false; n + 1];
    for v in line {
        if std::mem::replace(&mut seen[v as usize], true) {
            return false;
        }
    }
    true
}

/// `Yₙ`: rows plus columns that are permutations of `1..=n`.
pub fn permutation_line_count(s: &EnSquare) -> usize {
    let n = s.n;
    (0..n)
        .filter(|&r| is_permutation(s.row(r).iter().copied(), n))
        .count()
        + (0..n).filter(|&c| is_permutation(s.column(c), n)).count()
}

pub fn is_latin(s: &EnSquare) -> bool {
    permutation_line_count(s) == 2 * s.n
}

/// Draws a uniform integer in `0..bound` without modulo bias
/// (multiply-shift with rejection).
#[inline]
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, bound: u32) -> u32 {
    debug_assert!(bound > 0);
    let mut m = u64::from(rng.next_u32()) * u64::from(bound);
    let mut low = m as u32;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            m = u64::from(rng.next_u32()) * u64::from(bound);
            low = m as u32;
        }
    }
    (m >> 32) as u32
}

/// Fisher–Yates: for `i` from the end down to 1, swap `i` with a uniform
/// index in `0..=i`.
pub fn shuffle<R: RngCore + ?Sized>(cells: &mut [u8], rng: &mut R) {
    for i in (1..cells.len()).rev() {
        let j = uniform_below(rng, i as u32 + 1) as usize;
        cells.swap(i, j);
    }
}

/// Deliberately biased shuffle that skips the first swap, so the last cell
/// is never moved. Only useful for checking that goodness-of-fit tests catch
/// a broken sampler.
pub fn shuffle_skipping_first_step<R: RngCore + ?Sized>(cells: &mut [u8], rng: &mut R) {
    let len = cells.len();
    if len < 2 {
        return;
    }
    shuffle(&mut cells[..len - 1], rng);
}

/// A uniform square: the sorted multiset shuffled.
pub fn sample_uniform<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> EnSquare {
    let mut s = EnSquare::sorted(n);
    shuffle(&mut s.cells, rng);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn sq(n: usize, cells: &[i64]) -> EnSquare {
        EnSquare::new(n, cells).unwrap()
    }

    fn ce4s() -> EnSquare {
        sq(4, &[1, 2, 3, 4, 2, 4, 1, 3, 3, 3, 2, 2, 4, 4, 1, 1])
    }

    fn cyclic5() -> EnSquare {
        let cells: Vec<i64> = (0..5)
            .flat_map(|r| (0..5).map(move |c| ((r + c) % 5 + 1) as i64))
            .collect();
        sq(5, &cells)
    }

    #[test]
    fn make_square_cases() {
        assert!(EnSquare::new(3, &[1, 2, 1, 3, 3, 1, 3, 2, 2]).is_ok());
        assert_eq!(
            EnSquare::new(2, &[1, 1, 1, 2]),
            Err(SquareError::MultisetViolation { symbol: 1, count: 3 })
        );
        assert!(EnSquare::new(1, &[1]).is_ok());
        assert!(matches!(
            EnSquare::new(2, &[1, 0, 2, 2]),
            Err(SquareError::SymbolRange { symbol: 0, .. })
        ));
        assert!(matches!(
            EnSquare::new(2, &[1, 3, 2, 2]),
            Err(SquareError::SymbolRange { symbol: 3, .. })
        ));
        assert!(matches!(EnSquare::new(2, &[1, 2, 2]), Err(SquareError::Length { .. })));
    }

    #[test]
    fn statistic_of_example_ce4s() {
        let st = ce4s().line_statistic();
        assert_eq!(st.x, 3);
        assert_eq!(st.consecutive_rows, vec![(0, Orientation::Forward)]);
        assert_eq!(
            st.consecutive_cols,
            vec![(0, Orientation::Forward), (3, Orientation::Reverse)]
        );
    }

    #[test]
    fn statistic_small_cases() {
        assert_eq!(sq(3, &[1, 2, 1, 3, 3, 1, 3, 2, 2]).line_statistic().x, 0);
        assert_eq!(sq(2, &[1, 2, 2, 1]).line_statistic().x, 4);
        let one = sq(1, &[1]).line_statistic();
        assert_eq!(one.x, 2);
        assert_eq!(one.consecutive_rows, vec![(0, Orientation::Forward)]);
    }

    #[test]
    fn latin_checks() {
        let c = cyclic5();
        assert!(c.is_latin());
        assert_eq!(c.permutation_line_count(), 10);
        assert_eq!(c.line_statistic().x, 2);
        let e = sq(3, &[1, 2, 1, 3, 3, 1, 3, 2, 2]);
        assert!(!e.is_latin());
        assert_eq!(e.permutation_line_count(), 0);
        let two = sq(2, &[1, 2, 2, 1]);
        assert!(two.is_latin());
        assert_eq!(two.permutation_line_count(), 4);
    }

    #[test]
    fn text_round_trip() {
        let s = ce4s();
        assert_eq!(s.to_text(), "4\n1 2 3 4\n2 4 1 3\n3 3 2 2\n4 4 1 1\n");
        assert_eq!(s.to_text().parse::<EnSquare>().unwrap(), s);
        assert!("2\n1 2\n".parse::<EnSquare>().is_err());
        assert!("x\n".parse::<EnSquare>().is_err());
    }

    #[test]
    fn sample_order_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_uniform(1, &mut rng), sq(1, &[1]));
    }

    #[test]
    fn uniform_below_is_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut hits = [0u32; 7];
        for _ in 0..70_000 {
            hits[uniform_below(&mut rng, 7) as usize] += 1;
        }
        assert!(hits.iter().all(|&h| (9_500..10_500).contains(&h)), "{hits:?}");
    }

    #[test]
    fn order_two_frequencies() {
        // 600 000 draws over the 6 squares of order 2: each within
        // 5 standard deviations of 100 000.
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
        let mut seen: HashMap<Vec<u8>, u64> = HashMap::new();
        let mut buf = EnSquare::sorted(2).cells;
        let base = buf.clone();
        for _ in 0..600_000 {
            buf.copy_from_slice(&base);
            shuffle(&mut buf, &mut rng);
            *seen.entry(buf.clone()).or_default() += 1;
        }
        assert_eq!(seen.len(), 6);
        let tol = 5.0 * (100_000.0f64 * 5.0 / 6.0).sqrt();
        for (k, &v) in &seen {
            assert!((v as f64 - 100_000.0).abs() <= tol, "{k:?}: {v}");
        }
    }

    fn naive_x(s: &EnSquare) -> usize {
        let n = s.n();
        let mut x = 0;
        for i in 0..n {
            let mut row_f = true;
            let mut row_r = true;
            let mut col_f = true;
            let mut col_r = true;
            for j in 0..n {
                let want_f = (j + 1) as u8;
                let want_r = (n - j) as u8;
                row_f &= s.get(i, j) == want_f;
                row_r &= s.get(i, j) == want_r;
                col_f &= s.get(j, i) == want_f;
                col_r &= s.get(j, i) == want_r;
            }
            x += usize::from(row_f || row_r) + usize::from(col_f || col_r);
        }
        x
    }

    fn biased_square(n: usize, seed: u64) -> EnSquare {
        // Plant a few consecutive lines so the comparison covers x > 0.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = sample_uniform(n, &mut rng);
        if seed % 3 == 0 {
            let mut cells = EnSquare::sorted(n).cells;
            for (j, c) in cells.iter_mut().enumerate() {
                *c = (j % n + 1) as u8;
            }
            if seed % 2 == 0 {
                cells[..n].reverse();
            }
            s = EnSquare::from_cells(n, cells).unwrap();
        }
        s
    }

    #[test]
    fn fast_and_naive_statistics_agree() {
        for n in 2..=8usize {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            for k in 0..12_500u64 {
                let s = if k % 50 == 0 {
                    biased_square(n, k)
                } else {
                    sample_uniform(n, &mut rng)
                };
                let x = naive_x(&s);
                assert_eq!(consecutive_line_count(s.cells(), n), x);
                assert_eq!(s.line_statistic().x, x);
            }
        }
    }

    proptest! {
        #[test]
        fn symmetries_preserve_x(n in 1usize..=7, seed in any::<u64>()) {
            let s = biased_square(n, seed);
            let x = s.line_statistic().x;
            prop_assert_eq!(s.rotate90().line_statistic().x, x);
            prop_assert_eq!(s.reflect_vertical().line_statistic().x, x);
            prop_assert_eq!(s.reflect_horizontal().line_statistic().x, x);
            prop_assert_eq!(s.rotate90().rotate90().rotate90().rotate90(), s);
        }

        #[test]
        fn no_line_is_both_orientations(n in 2usize..=7, seed in any::<u64>()) {
            let st = biased_square(n, seed).line_statistic();
            prop_assert_eq!(st.x, st.consecutive_rows.len() + st.consecutive_cols.len());
        }

        #[test]
        fn latin_iff_all_lines_permutations(n in 1usize..=5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sample_uniform(n, &mut rng);
            prop_assert_eq!(s.is_latin(), s.permutation_line_count() == 2 * n);
            if s.is_latin() {
                // Only identity or reversal lines can be consecutive.
                for (r, _) in s.line_statistic().consecutive_rows {
                    prop_assert!(line_orientation(s.row(r).iter().copied(), n).is_some());
                }
            }
        }
    }
}
