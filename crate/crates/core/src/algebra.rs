//! Cayley tables of finite magmas and the Rees matrix construction.
//!
//! Elements are `1..=n` at the API boundary, matching the square format.
//! A table is an equi-n-square exactly when every fiber of the
//! multiplication map has size `n`.
//!
//! Rees matrix semigroups `M(G; I, Λ; P)` here are the construction without
//! zero: every sandwich entry is an element of `G`. Elements `(i, g, λ)` are
//! numbered `1..=|I|·|G|·|Λ|` in lexicographic order of `(i, g, λ)`, and
//! `(i, g, λ)(j, t, μ) = (i, g·p_{λ,j}·t, μ)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::squares::{parse_grid, EnSquare, SquareError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("table entry {value} at ({row}, {col}) outside 1..={order}")]
    EntryRange { row: usize, col: usize, value: i64, order: usize },
    #[error("table needs {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("not a group: {0}")]
    InvalidGroup(String),
    #[error("sandwich matrix must be {rows}×{cols} with entries in 1..={order}")]
    Sandwich { rows: usize, cols: usize, order: usize },
    #[error("element {0} out of range")]
    Element(usize),
    #[error(transparent)]
    Square(#[from] SquareError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CayleyTable {
    order: usize,
    // 0-based products, row-major.
    table: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl CayleyTable {
    /// Builds a table from 1-based entries, row `a` holding `a∘b`.
    pub fn new(order: usize, entries: &[i64]) -> Result<Self, AlgebraError> {
        if entries.len() != order * order || order == 0 {
            return Err(AlgebraError::Shape {
                expected: order * order,
                got: entries.len(),
            });
        }
        let table = entries
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if v < 1 || v as usize > order {
                    Err(AlgebraError::EntryRange {
                        row: k / order + 1,
                        col: k % order + 1,
                        value: v,
                        order,
                    })
                } else {
                    Ok(v as usize - 1)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            order,
            table,
            labels: None,
        })
    }

    fn from_zero_based(order: usize, table: Vec<usize>) -> Self {
        debug_assert!(table.iter().all(|&v| v < order));
        Self {
            order,
            table,
            labels: None,
        }
    }

    pub fn from_square(s: &EnSquare) -> Self {
        Self::from_zero_based(s.n(), s.cells().iter().map(|&v| v as usize - 1).collect())
    }

    /// The table as a square, if it is an equi-n-square.
    pub fn to_square(&self) -> Option<EnSquare> {
        let cells = self.table.iter().map(|&v| (v + 1) as u8).collect();
        EnSquare::from_cells(self.order, cells).ok()
    }

    /// `Z_n` under addition, element `k` standing for residue `k − 1`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1, "empty group");
        let table = (0..n).flat_map(|a| (0..n).map(move |b| (a + b) % n)).collect();
        Self::from_zero_based(n, table)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.order);
        self.labels = Some(labels);
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `a∘b` with 1-based elements.
    pub fn get(&self, a: usize, b: usize) -> usize {
        self.mul(a - 1, b - 1) + 1
    }

    #[inline]
    fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    /// Entries as 1-based values, row-major.
    pub fn entries(&self) -> Vec<usize> {
        self.table.iter().map(|v| v + 1).collect()
    }

    /// Swaps two cells (1-based coordinates). Mostly for building mutants.
    pub fn swap_cells(&mut self, a: (usize, usize), b: (usize, usize)) {
        let n = self.order;
        self.table.swap((a.0 - 1) * n + a.1 - 1, (b.0 - 1) * n + b.1 - 1);
    }

    /// Exhaustive check of `(a∘b)∘c = a∘(b∘c)`.
    pub fn is_associative(&self) -> bool {
        let n = self.order;
        (0..n).into_par_iter().all(|a| {
            (0..n).all(|b| {
                let ab = self.mul(a, b);
                (0..n).all(|c| self.mul(ab, c) == self.mul(a, self.mul(b, c)))
            })
        })
    }

    /// Number of pairs `(a, b)` with `a∘b = c`, for each element `c`.
    pub fn fiber_sizes(&self) -> BTreeMap<usize, usize> {
        let mut sizes: BTreeMap<usize, usize> = (1..=self.order).map(|c| (c, 0)).collect();
        for &v in &self.table {
            *sizes.get_mut(&(v + 1)).expect("entry in range") += 1;
        }
        sizes
    }

    pub fn is_equi_n_square(&self) -> bool {
        self.fiber_sizes().values().all(|&s| s == self.order)
    }

    fn line_is_permutation(&self, line: impl Iterator<Item = usize>) -> bool {
        let mut seen = vec![false; self.order];
        line.into_iter().all(|v| !std::mem::replace(&mut seen[v], true))
    }

    fn row(&self, a: usize) -> impl Iterator<Item = usize> + Clone + '_ {
        self.table[a * self.order..(a + 1) * self.order].iter().copied()
    }

    fn col(&self, b: usize) -> impl Iterator<Item = usize> + Clone + '_ {
        self.table.iter().skip(b).step_by(self.order).copied()
    }

    /// Every row and column is a permutation.
    pub fn is_latin(&self) -> bool {
        (0..self.order).all(|k| self.line_is_permutation(self.row(k)) && self.line_is_permutation(self.col(k)))
    }

    /// Left and right multiplication by every element are bijections,
    /// checked by solving `a∘x = b` and `y∘a = b` for all `a, b`.
    pub fn is_quasigroup(&self) -> bool {
        let n = self.order;
        (0..n).all(|a| {
            (0..n).all(|b| {
                (0..n).filter(|&x| self.mul(a, x) == b).count() == 1
                    && (0..n).filter(|&y| self.mul(y, a) == b).count() == 1
            })
        })
    }

    /// Two-sided identity, 1-based.
    pub fn identity(&self) -> Option<usize> {
        let n = self.order;
        (0..n)
            .find(|&e| (0..n).all(|x| self.mul(e, x) == x && self.mul(x, e) == x))
            .map(|e| e + 1)
    }

    pub fn is_loop(&self) -> bool {
        self.is_latin() && self.identity().is_some()
    }

    /// Checks the group axioms: associativity, a two-sided identity, and
    /// two-sided inverses.
    pub fn validate_group(&self) -> Result<(), AlgebraError> {
        if !self.is_associative() {
            return Err(AlgebraError::InvalidGroup("operation is not associative".into()));
        }
        let e = self
            .identity()
            .ok_or_else(|| AlgebraError::InvalidGroup("no two-sided identity".into()))?
            - 1;
        let n = self.order;
        for a in 0..n {
            if !(0..n).any(|b| self.mul(a, b) == e && self.mul(b, a) == e) {
                return Err(AlgebraError::InvalidGroup(format!("element {} has no inverse", a + 1)));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.order);
        for row in self.table.chunks(self.order) {
            let line: Vec<String> = row.iter().map(|v| (v + 1).to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, AlgebraError> {
        let (n, cells) = parse_grid(text)?;
        Self::new(n, &cells)
    }
}

fn forward(line: impl Iterator<Item = usize>) -> bool {
    line.enumerate().all(|(k, v)| k == v)
}

fn reverse(line: impl Iterator<Item = usize>, n: usize) -> bool {
    line.enumerate().all(|(k, v)| v == n - 1 - k)
}

/// Which multiplication a line corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    /// Row `i`: left multiplication `x ↦ i∘x`.
    Left,
    /// Column `i`: right multiplication `x ↦ x∘i`.
    Right,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Whether reversal composed with multiplication by `i` is the identity map:
/// row `i` (left) or column `i` (right) reads `n, n−1, …, 1`.
pub fn reverse_identity_check(t: &CayleyTable, i: usize, side: Side) -> Result<bool, AlgebraError> {
    if i == 0 || i > t.order {
        return Err(AlgebraError::Element(i));
    }
    Ok(match side {
        Side::Left => reverse(t.row(i - 1), t.order),
        Side::Right => reverse(t.col(i - 1), t.order),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgebraReport {
    pub order: usize,
    pub is_equi_n_square: bool,
    pub is_latin: bool,
    pub is_associative: bool,
    /// Elements whose row reads `1, …, n` (left multiplication is identity).
    pub left_identity_like: Vec<usize>,
    /// Elements whose column reads `1, …, n`.
    pub right_identity_like: Vec<usize>,
    /// Elements whose row or column reads `n, …, 1`.
    pub reverse_identity_like: Vec<(usize, Side)>,
    pub fiber_sizes: BTreeMap<usize, usize>,
}

impl AlgebraReport {
    pub fn has_identity_like(&self) -> bool {
        !self.left_identity_like.is_empty()
            || !self.right_identity_like.is_empty()
            || !self.reverse_identity_like.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let fibers: serde_json::Map<String, Value> = self
            .fiber_sizes
            .iter()
            .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
            .collect();
        let reverse: Vec<Value> = self
            .reverse_identity_like
            .iter()
            .map(|(e, s)| json!({"element": e, "side": s.name()}))
            .collect();
        json!({
            "order": self.order,
            "is_equi_n_square": self.is_equi_n_square,
            "is_latin": self.is_latin,
            "is_associative": self.is_associative,
            "left_identity_like": self.left_identity_like,
            "right_identity_like": self.right_identity_like,
            "reverse_identity_like": reverse,
            "fiber_sizes": fibers,
        })
    }

    pub fn from_json(v: &Value) -> Option<Self> {
        let elems = |key: &str| -> Option<Vec<usize>> {
            v.get(key)?
                .as_array()?
                .iter()
                .map(|e| e.as_u64().map(|e| e as usize))
                .collect()
        };
        let reverse_identity_like = v
            .get("reverse_identity_like")?
            .as_array()?
            .iter()
            .map(|e| {
                let side = match e.get("side")?.as_str()? {
                    "left" => Side::Left,
                    "right" => Side::Right,
                    _ => return None,
                };
                Some((e.get("element")?.as_u64()? as usize, side))
            })
            .collect::<Option<_>>()?;
        let fiber_sizes = v
            .get("fiber_sizes")?
            .as_object()?
            .iter()
            .map(|(k, c)| Some((k.parse().ok()?, c.as_str()?.parse().ok()?)))
            .collect::<Option<_>>()?;
        Some(Self {
            order: v.get("order")?.as_u64()? as usize,
            is_equi_n_square: v.get("is_equi_n_square")?.as_bool()?,
            is_latin: v.get("is_latin")?.as_bool()?,
            is_associative: v.get("is_associative")?.as_bool()?,
            left_identity_like: elems("left_identity_like")?,
            right_identity_like: elems("right_identity_like")?,
            reverse_identity_like,
            fiber_sizes,
        })
    }
}

pub fn analyze(t: &CayleyTable) -> AlgebraReport {
    let n = t.order;
    let fiber_sizes = t.fiber_sizes();
    let mut reverse_identity_like = Vec::new();
    for k in 0..n {
        if reverse(t.row(k), n) {
            reverse_identity_like.push((k + 1, Side::Left));
        }
        if reverse(t.col(k), n) {
            reverse_identity_like.push((k + 1, Side::Right));
        }
    }
    // A 1×1 line reads forward and backward; count it once, as forward.
    if n == 1 {
        reverse_identity_like.clear();
    }
    AlgebraReport {
        order: n,
        is_equi_n_square: fiber_sizes.values().all(|&s| s == n),
        is_latin: t.is_latin(),
        is_associative: t.is_associative(),
        left_identity_like: (0..n).filter(|&k| forward(t.row(k))).map(|k| k + 1).collect(),
        right_identity_like: (0..n).filter(|&k| forward(t.col(k))).map(|k| k + 1).collect(),
        reverse_identity_like,
        fiber_sizes,
    }
}

/// Inputs to `M(G; I, Λ; P)`. `sandwich[λ][i]` is `p_{λ,i}` as a 1-based
/// element of `G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReesSpec {
    pub group: CayleyTable,
    pub i_size: usize,
    pub lambda_size: usize,
    pub sandwich: Vec<Vec<usize>>,
}

impl ReesSpec {
    pub fn new(
        group: CayleyTable,
        i_size: usize,
        lambda_size: usize,
        sandwich: Vec<Vec<usize>>,
    ) -> Result<Self, AlgebraError> {
        let spec = Self {
            group,
            i_size,
            lambda_size,
            sandwich,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Every sandwich entry equal to the group identity.
    pub fn with_identity_sandwich(group: CayleyTable, i_size: usize, lambda_size: usize) -> Result<Self, AlgebraError> {
        group.validate_group()?;
        let e = group.identity().expect("validated group has identity");
        Self::new(group, i_size, lambda_size, vec![vec![e; i_size]; lambda_size])
    }

    pub fn validate(&self) -> Result<(), AlgebraError> {
        self.group.validate_group()?;
        let g = self.group.order();
        let shape_ok = self.i_size >= 1
            && self.lambda_size >= 1
            && self.sandwich.len() == self.lambda_size
            && self
                .sandwich
                .iter()
                .all(|row| row.len() == self.i_size && row.iter().all(|&p| (1..=g).contains(&p)));
        if !shape_ok {
            return Err(AlgebraError::Sandwich {
                rows: self.lambda_size,
                cols: self.i_size,
                order: g,
            });
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.i_size * self.group.order() * self.lambda_size
    }

    /// 0-based flat index of `(i, g, λ)` (all 0-based).
    pub fn index(&self, i: usize, g: usize, lambda: usize) -> usize {
        (i * self.group.order() + g) * self.lambda_size + lambda
    }

    fn triple(&self, k: usize) -> (usize, usize, usize) {
        let lambda = k % self.lambda_size;
        let rest = k / self.lambda_size;
        (rest / self.group.order(), rest % self.group.order(), lambda)
    }
}

pub fn build_rees(spec: &ReesSpec) -> Result<CayleyTable, AlgebraError> {
    spec.validate()?;
    let n = spec.order();
    let g = &spec.group;
    let mut table = Vec::with_capacity(n * n);
    for a in 0..n {
        let (i, x, lambda) = spec.triple(a);
        for b in 0..n {
            let (j, t, mu) = spec.triple(b);
            let p = spec.sandwich[lambda][j] - 1;
            table.push(spec.index(i, g.mul(g.mul(x, p), t), mu));
        }
    }
    let labels = (0..n)
        .map(|k| {
            let (i, x, lambda) = spec.triple(k);
            format!("({},{},{})", i + 1, x + 1, lambda + 1)
        })
        .collect();
    Ok(CayleyTable::from_zero_based(n, table).with_labels(labels))
}

/// Evidence that a table has all fibers of size equal to its order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberProof {
    pub order: usize,
    pub fiber_sizes: BTreeMap<usize, usize>,
    pub all_fibers_equal_order: bool,
    pub is_associative: bool,
    /// When false alongside a passing fiber check, the table witnesses an
    /// associative equi-n-square that is not Latin.
    pub is_latin: bool,
}

pub fn fiber_proof(t: &CayleyTable) -> FiberProof {
    let fiber_sizes = t.fiber_sizes();
    FiberProof {
        order: t.order(),
        all_fibers_equal_order: fiber_sizes.values().all(|&s| s == t.order()),
        fiber_sizes,
        is_associative: t.is_associative(),
        is_latin: t.is_latin(),
    }
}

pub fn verify_completely_simple(spec: &ReesSpec) -> Result<FiberProof, AlgebraError> {
    Ok(fiber_proof(&build_rees(spec)?))
}

/// Every Latin Cayley table of order `n` (feasible for `n ≤ 3`).
pub fn latin_tables(n: usize) -> Vec<CayleyTable> {
    let cells = n * n;
    let total = n.pow(cells as u32);
    (0..total)
        .filter_map(|mut code| {
            let table: Vec<usize> = (0..cells)
                .map(|_| {
                    let v = code % n;
                    code /= n;
                    v
                })
                .collect();
            let t = CayleyTable::from_zero_based(n, table);
            t.is_latin().then_some(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(n: usize, entries: &[i64]) -> CayleyTable {
        CayleyTable::new(n, entries).unwrap()
    }

    fn ce4s() -> CayleyTable {
        table(4, &[1, 2, 3, 4, 2, 4, 1, 3, 3, 3, 2, 2, 4, 4, 1, 1])
    }

    fn cyclic5_square() -> CayleyTable {
        let e: Vec<i64> = (0..5).flat_map(|r| (0..5).map(move |c| ((r + c) % 5 + 1) as i64)).collect();
        table(5, &e)
    }

    fn left_zero_band() -> CayleyTable {
        table(2, &[1, 1, 2, 2])
    }

    #[test]
    fn analyze_cyclic_latin_square() {
        let r = analyze(&cyclic5_square());
        assert!(r.is_latin);
        assert!(r.is_equi_n_square);
        assert_eq!(r.left_identity_like, vec![1]);
    }

    #[test]
    fn analyze_left_zero_band() {
        let r = analyze(&left_zero_band());
        assert!(r.is_equi_n_square);
        assert!(r.is_associative);
        assert!(!r.is_latin);
        assert_eq!(r.fiber_sizes, BTreeMap::from([(1, 2), (2, 2)]));
    }

    #[test]
    fn analyze_ce4s() {
        let r = analyze(&ce4s());
        assert!(r.is_equi_n_square);
        assert_eq!(r.left_identity_like, vec![1]);
        assert_eq!(r.right_identity_like, vec![1]);
        assert_eq!(r.reverse_identity_like, vec![(4, Side::Right)]);
    }

    #[test]
    fn reverse_identity_cases() {
        assert!(reverse_identity_check(&ce4s(), 4, Side::Right).unwrap());
        assert!(!reverse_identity_check(&ce4s(), 1, Side::Left).unwrap());
        assert!(!reverse_identity_check(&left_zero_band(), 1, Side::Left).unwrap());
        assert!(reverse_identity_check(&ce4s(), 5, Side::Left).is_err());
    }

    #[test]
    fn perturbed_table_is_not_equi() {
        let mut e = ce4s().entries().into_iter().map(|v| v as i64).collect::<Vec<_>>();
        e[5] = 1;
        assert!(!analyze(&table(4, &e)).is_equi_n_square);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(matches!(CayleyTable::new(2, &[1, 3, 1, 1]), Err(AlgebraError::EntryRange { .. })));
        assert!(matches!(CayleyTable::new(2, &[1, 1, 1]), Err(AlgebraError::Shape { .. })));
    }

    #[test]
    fn group_validation() {
        for n in 1..=6 {
            assert!(CayleyTable::cyclic(n).validate_group().is_ok());
        }
        assert!(left_zero_band().validate_group().is_err());
        // A Latin loop that is not associative (order 5).
        let nonassoc = table(5, &[1, 2, 3, 4, 5, 2, 1, 4, 5, 3, 3, 5, 1, 2, 4, 4, 3, 5, 1, 2, 5, 4, 2, 3, 1]);
        assert!(nonassoc.is_loop());
        assert!(matches!(nonassoc.validate_group(), Err(AlgebraError::InvalidGroup(_))));
    }

    #[test]
    fn rees_witness() {
        let spec = ReesSpec::with_identity_sandwich(CayleyTable::cyclic(2), 2, 1).unwrap();
        let t = build_rees(&spec).unwrap();
        assert_eq!(t.order(), 4);
        // (i, g, 1)(j, h, 1) = (i, g + h, 1).
        assert_eq!(t.entries(), vec![1, 2, 1, 2, 2, 1, 2, 1, 3, 4, 3, 4, 4, 3, 4, 3]);
        let r = analyze(&t);
        assert!(r.is_equi_n_square && r.is_associative && !r.is_latin);
        assert!(r.fiber_sizes.values().all(|&s| s == 4));
        assert_eq!(t.labels().unwrap()[2], "(2,1,1)");
    }

    #[test]
    fn rees_degenerate_cases() {
        let trivial = build_rees(&ReesSpec::with_identity_sandwich(CayleyTable::cyclic(1), 1, 1).unwrap()).unwrap();
        assert_eq!(trivial.order(), 1);
        assert!(trivial.validate_group().is_ok());
        let z3 = build_rees(&ReesSpec::with_identity_sandwich(CayleyTable::cyclic(3), 1, 1).unwrap()).unwrap();
        assert_eq!(z3.entries(), CayleyTable::cyclic(3).entries());
        assert!(analyze(&z3).is_latin);
    }

    #[test]
    fn rees_rejects_non_group() {
        let spec = ReesSpec {
            group: left_zero_band(),
            i_size: 1,
            lambda_size: 1,
            sandwich: vec![vec![1]],
        };
        assert!(matches!(build_rees(&spec), Err(AlgebraError::InvalidGroup(_))));
        assert!(matches!(
            ReesSpec::new(CayleyTable::cyclic(2), 2, 1, vec![vec![1]]),
            Err(AlgebraError::Sandwich { .. })
        ));
    }

    #[test]
    fn corrupted_witness_fails_fiber_check() {
        let spec = ReesSpec::with_identity_sandwich(CayleyTable::cyclic(2), 2, 1).unwrap();
        assert!(verify_completely_simple(&spec).unwrap().all_fibers_equal_order);
        // Swapping two cells permutes entries and cannot move a fiber size.
        let mut swapped = build_rees(&spec).unwrap();
        swapped.swap_cells((1, 1), (3, 1));
        assert!(fiber_proof(&swapped).all_fibers_equal_order);
        assert!(!fiber_proof(&swapped).is_associative);
        // Overwriting one cell moves one pair between two fibers.
        let mut e: Vec<i64> = build_rees(&spec).unwrap().entries().into_iter().map(|v| v as i64).collect();
        e[0] = 2;
        let proof = fiber_proof(&table(4, &e));
        assert!(!proof.all_fibers_equal_order);
        assert_eq!(proof.fiber_sizes, BTreeMap::from([(1, 3), (2, 5), (3, 4), (4, 4)]));
    }

    fn random_spec(rng: &mut ChaCha8Rng) -> ReesSpec {
        let g = 2 + (rng.next_u32() % 3) as usize;
        let i = 1 + (rng.next_u32() % 3) as usize;
        let l = 1 + (rng.next_u32() % 3) as usize;
        let sandwich = (0..l)
            .map(|_| (0..i).map(|_| 1 + (rng.next_u32() as usize % g)).collect())
            .collect();
        ReesSpec::new(CayleyTable::cyclic(g), i, l, sandwich).unwrap()
    }

    #[test]
    fn random_rees_semigroups() {
        let mut rng = ChaCha8Rng::seed_from_u64(1729);
        for _ in 0..50 {
            let spec = random_spec(&mut rng);
            let proof = verify_completely_simple(&spec).unwrap();
            assert!(proof.all_fibers_equal_order);
            assert!(proof.is_associative);
            assert_eq!(proof.is_latin, spec.i_size == 1 && spec.lambda_size == 1);
        }
    }

    #[test]
    fn latin_iff_quasigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut latin_seen = 0;
        for k in 0..10_000 {
            let n = 2 + k % 4;
            let t = if k % 10 == 0 {
                // Permuted cyclic tables keep a healthy share of Latin cases.
                let shift = rng.next_u32() as usize % n;
                CayleyTable::from_zero_based(n, (0..n * n).map(|c| (c / n + c % n + shift) % n).collect())
            } else {
                CayleyTable::from_zero_based(n, (0..n * n).map(|_| rng.next_u32() as usize % n).collect())
            };
            latin_seen += usize::from(t.is_latin());
            assert_eq!(t.is_latin(), t.is_quasigroup());
        }
        assert!(latin_seen > 1000);
    }

    #[test]
    fn identity_like_iff_consecutive_for_squares() {
        use crate::oracle::{all_squares, Guard};
        for n in 2..=3 {
            for s in all_squares(n, &Guard::default()).unwrap() {
                let r = analyze(&CayleyTable::from_square(&s));
                assert!(r.is_equi_n_square);
                assert_eq!(r.has_identity_like(), s.line_statistic().x > 0);
            }
        }
    }

    #[test]
    fn loop_share_respects_markov_bound() {
        let expect = [(1usize, 1usize), (2, 2), (3, 12)];
        for (n, count) in expect {
            let tables = latin_tables(n);
            assert_eq!(tables.len(), count);
            let loops = tables.iter().filter(|t| t.is_loop()).count();
            let fact: usize = (1..=n).product();
            // loops / count ≤ n / n!
            assert!(loops * fact <= n * count, "n={n} loops={loops}");
        }
    }

    #[test]
    fn text_and_json_round_trip() {
        let t = ce4s();
        assert_eq!(CayleyTable::parse(&t.to_text()).unwrap(), t);
        let r = analyze(&t);
        assert_eq!(AlgebraReport::from_json(&r.to_json()).unwrap(), r);
    }
}
