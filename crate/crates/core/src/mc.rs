//! Monte-Carlo plumbing: per-trial child streams and order-preserving
//! parallel evaluation.
//!
//! Trial `i` always runs on `rng.child(i)`, so results never depend on the
//! number of worker threads.

use rayon::prelude::*;

use crate::bitkit::Rng;

/// Runs `trials` independent Bernoulli trials and counts the successes.
pub fn count_successes<F>(rng: &Rng, trials: u64, trial: F) -> u64
where
    F: Fn(&mut Rng) -> bool + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut rng.child(i)) as u64)
        .sum()
}

/// Evaluates `trials` independent trials and returns their results in trial
/// order.
pub fn map_trials<T, F>(rng: &Rng, trials: u64, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut rng.child(i)))
        .collect()
}

/// Reads the `GHRLAB_THREADS` cap, if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var("GHRLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
}

/// Runs `f` inside a rayon pool capped at `threads` workers (or the global
/// pool when `None`).
pub fn with_thread_cap<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("failed to build thread pool")
            .install(f),
    }
}

/// Pearson's statistic `Σ (O - E)² / E` over cells with positive expectation.
pub fn chi_square_statistic(observed: &[u64], expected_probs: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(expected_probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Upper critical value of the chi-square law with `df` degrees of freedom
/// at level 0.001 (Wilson–Hilferty cube approximation, accurate to a few
/// percent for `df >= 3`).
pub fn chi_square_critical_001(df: usize) -> f64 {
    const Z_0001: f64 = 3.090_232;
    let k = df as f64;
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + Z_0001 * c.sqrt()).powi(3)
}
