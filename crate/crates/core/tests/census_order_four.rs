//! Full enumeration of Ω₄ (63 063 000 squares) against the closed forms and
//! the inclusion-exclusion distribution.

use num_bigint::{BigInt, BigUint};

use equisquare::counting::{count_all, count_consecutive, count_row_consecutive, pmf_count};
use equisquare::oracle::{census_partitioned, line_distribution, Guard};

#[test]
fn order_four_census() {
    let c = census_partitioned(4, &Guard::with_limit(4)).unwrap();
    assert_eq!(BigInt::from(c.total), count_all(4).to_bigint());
    assert_eq!(BigInt::from(c.consecutive()), count_consecutive(4).to_bigint());
    assert_eq!(BigInt::from(c.row_consecutive), count_row_consecutive(4).to_bigint());
    assert_eq!(2 * c.row_consecutive - c.row_and_col, c.consecutive());
    assert_eq!(c.latin, 576);

    let ie = line_distribution(4).unwrap();
    let by_x: Vec<(usize, BigUint)> = c.by_x.iter().map(|(&k, &v)| (k, BigUint::from(v))).collect();
    assert_eq!(by_x, ie.into_iter().collect::<Vec<_>>());

    // The closed-form distribution agrees at x = 0 and on x ≥ 3 but moves
    // 144 squares from x = 1 to x = 2.
    let observed = |x: usize| BigInt::from(c.by_x.get(&x).copied().unwrap_or(0));
    let diff: Vec<BigInt> = (0..=8).map(|x| pmf_count(4, x as u32) - observed(x)).collect();
    assert_eq!(diff, [0, -144, 144, 0, 0, 0, 0, 0, 0].map(BigInt::from));
}
