//! Exact counting, exhaustive census, Monte Carlo simulation and Cayley-table
//! algebra for equi-n-squares: `n × n` arrays holding each of `1..=n` exactly
//! `n` times, and the consecutive ones among them, which have a row or column
//! reading `1, 2, …, n` or `n, …, 2, 1`.

pub mod algebra;
pub mod cli;
pub mod counting;
pub mod montecarlo;
pub mod numerics;
pub mod oracle;
pub mod squares;

pub use counting::{CountBreakdown, LatinBounds, PmfTable};
pub use numerics::{ExactCount, ExactProb, LogApprox};
pub use squares::{EnSquare, LineStatistic, Orientation};
