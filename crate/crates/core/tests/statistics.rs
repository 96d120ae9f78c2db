//! Goodness-of-fit tests of the sampler and the simulator against the
//! census and the exact distribution.

use rayon::prelude::*;

use equisquare::counting::pmf_table;
use equisquare::montecarlo::{
    band_check, band_halfwidth, block_rng, chi_square_gof, pearson, run_simulation, Bucket, BLOCK_SIZE,
};
use equisquare::numerics::ExactProb;
use equisquare::oracle::{all_squares, census, Guard};
use equisquare::squares::sample_uniform;

const SEEDS: [u64; 3] = [5, 271_828, 8_675_309];

fn code(cells: &[u8], n: usize) -> usize {
    cells.iter().fold(0, |acc, &c| acc * (n + 1) + c as usize)
}

/// Tallies `iterations` sampled squares over the census ordering of `Ωₙ`.
fn tally(n: usize, seed: u64, iterations: u64) -> Vec<u64> {
    let squares = all_squares(n, &Guard::default()).unwrap();
    let mut index = vec![usize::MAX; (n + 1).pow((n * n) as u32)];
    for (i, s) in squares.iter().enumerate() {
        index[code(s.cells(), n)] = i;
    }
    let blocks = iterations.div_ceil(BLOCK_SIZE);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let take = (iterations - b * BLOCK_SIZE).min(BLOCK_SIZE);
            let mut counts = vec![0u64; squares.len()];
            for _ in 0..take {
                let s = sample_uniform(n, &mut rng);
                counts[index[code(s.cells(), n)]] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; squares.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn uniform_p_value(n: usize, seed: u64, iterations: u64) -> (f64, usize) {
    let observed = tally(n, seed, iterations);
    let expected = vec![iterations as f64 / observed.len() as f64; observed.len()];
    let (_, df, p) = pearson(&observed, &expected).unwrap();
    (p, df)
}

#[test]
fn sampler_uniform_over_omega_two() {
    for seed in SEEDS {
        let (p, df) = uniform_p_value(2, seed, 600_000);
        assert_eq!(df, 5);
        assert!(p > 0.001 && p < 0.999, "seed {seed}: p = {p}");
    }
}

#[test]
fn sampler_uniform_over_omega_three() {
    for seed in SEEDS {
        let (p, df) = uniform_p_value(3, seed, 1_680_000);
        assert_eq!(df, 1679);
        assert!(p > 0.001 && p < 0.999, "seed {seed}: p = {p}");
    }
}

#[test]
fn sampler_uniform_over_omega_three_long_run() {
    let (p, _) = uniform_p_value(3, 2024, 16_800_000);
    assert!(p > 0.001 && p < 0.999, "p = {p}");
}

#[test]
fn order_two_fit_against_census_distribution() {
    let reference = census(2, &Guard::default()).unwrap().pmf_table();
    for seed in SEEDS {
        let stats = run_simulation(2, 600_000, seed, 4);
        assert_eq!(stats.counts.keys().copied().collect::<Vec<_>>(), vec![2, 4]);
        let chi = chi_square_gof(&stats, &reference, 5.0).unwrap();
        assert_eq!(chi.degrees_of_freedom, 1);
        assert_eq!(chi.cells, vec![Bucket::Exactly(2), Bucket::Exactly(4)]);
        assert!(chi.p_value > 0.001 && chi.p_value < 0.999, "seed {seed}: p = {}", chi.p_value);
    }
}

#[test]
fn order_two_small_run_lies_in_bands() {
    let reference = census(2, &Guard::default()).unwrap().pmf_table();
    let stats = run_simulation(2, 10_000, 17, 2);
    assert!(stats.counts.keys().all(|&x| x == 2 || x == 4));
    assert!(band_check(&stats, &reference).unwrap().iter().all(|c| c.within));
}

// One standard error at N = 10⁶ is about 2.9·10⁻⁴, so a fixed 3·10⁻⁴
// tolerance holds for only about 70% of seeds even with an exact sampler.
// Each seed is held to the 5σ band; the pooled estimate over all three to
// the tighter tolerance.
#[test]
fn order_four_consecutive_rate_converges() {
    let p = 0.090005867;
    let n_samples = 1_000_000;
    let mut nonzero = 0;
    for seed in SEEDS {
        let stats = run_simulation(4, n_samples, seed, 4);
        let p_hat = 1.0 - stats.count(0) as f64 / n_samples as f64;
        assert!((p_hat - p).abs() < band_halfwidth(p, n_samples), "seed {seed}: {p_hat}");
        nonzero += n_samples - stats.count(0);
    }
    let pooled = nonzero as f64 / (3 * n_samples) as f64;
    assert!((pooled - p).abs() < 3e-4, "pooled {pooled}");
}

#[test]
fn order_three_zero_bucket_in_band() {
    let t = pmf_table(3).unwrap();
    let stats = run_simulation(3, 1_000_000, 3, 4);
    let checks = band_check(&stats, &t).unwrap();
    assert_eq!(checks[0].bucket, Bucket::Exactly(0));
    assert!(checks[0].within);
    assert_eq!(checks[0].exact.to_decimal(12), "0.509523809524");
}

#[test]
fn order_five_tail_bucket_and_band_width() {
    let t = pmf_table(5).unwrap();
    let stats = run_simulation(5, 1000, 0, 1);
    let checks = band_check(&stats, &t).unwrap();
    assert_eq!(checks.len(), 4);
    assert_eq!(checks[3].bucket, Bucket::AtLeast(3));
    let rest = t.get(0) + t.get(1) + t.get(2);
    assert_eq!(checks[3].exact, ExactProb::one() - rest);
    assert!((checks[3].exact.to_f64() - 7.1510797707e-8).abs() < 1e-17);

    let p: f64 = 0.0863048063048;
    let expected = (5.0 * (p * (1.0 - p) / 1e8).sqrt()).max(0.01 * p);
    assert_eq!(band_halfwidth(p, 100_000_000), expected);
    assert!((expected - 0.000863048063048).abs() < 1e-15);
}
