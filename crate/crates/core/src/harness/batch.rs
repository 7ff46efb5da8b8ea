//! Independent runs fanned out over seeds.
//!
//! With the `parallel` feature the runs are distributed by rayon; without
//! it they execute one after another. Results come back in input order
//! either way, and each run owns all of its state, so outputs are
//! identical between the two modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::closed_loop::{run_closed_loop, ClosedLoopRun};
use super::config::ExperimentConfig;
use crate::error::Result;

/// Applies `f` to every item, in parallel when the feature is enabled.
pub fn map_runs<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always sequential; the reference the parallel path is compared with.
pub fn map_runs_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

pub fn run_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Vec<Result<ClosedLoopRun>> {
    map_runs(seeds, |s| run_closed_loop(&cfg.clone().with_seed(*s)))
}

/// Parses `a..b` (half open) or `a..=b`.
pub fn parse_seed_range(s: &str) -> Option<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (u64, u64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (a <= b).then(|| (a..=b).collect());
    }
    let (a, b) = s.split_once("..")?;
    let (a, b): (u64, u64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (a < b).then(|| (a..b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..3"), Some(vec![0, 1, 2]));
        assert_eq!(parse_seed_range("2..=4"), Some(vec![2, 3, 4]));
        assert_eq!(parse_seed_range("3..3"), None);
        assert_eq!(parse_seed_range("x..3"), None);
        assert_eq!(parse_seed_range("7"), None);
    }

    #[test]
    fn parallel_matches_sequential() {
        let xs: Vec<u64> = (0..64).collect();
        let f = |x: &u64| x.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
        assert_eq!(map_runs(&xs, f), map_runs_sequential(&xs, f));
    }
}
