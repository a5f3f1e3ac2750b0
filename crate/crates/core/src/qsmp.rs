//! The quantum simultaneous-message protocol for GHR.
//!
//! Alice and Bob send `log n` copies of `|φ_x⟩ = n^{-1/2} Σ (-1)^{x_i} |i⟩`
//! and `|φ_y⟩`; the referee measures each copy of `|φ_x⟩|φ_y⟩` in the basis
//! `{|u_j^s⟩}`. The outcome law has the closed form
//! `Pr[(j, s)] = 4 (Δ_{j,s}(x, y) - n/2)² / n³ = (2Δ - n)² / n³`, so the
//! protocol is simulated by exact sampling from integer weights over `n³`.
//! Explicit real state vectors exist only as a small-n cross-check.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use rand::Rng as _;

use crate::bitkit::{fourier_pattern_index, BitString, Rng};
use crate::error::{GhrError, Result};
use crate::ghr::{
    all_pairs, delta_table, ghr_is_valid_with_table, require_power_of_four, AnswerSequence,
    DeltaTable, McEstimate, TransformIndex,
};
use crate::mc;
use crate::rational::{binomial_upper_tail_exact, to_f64};

/// A real state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<f64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<f64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a * b).sum()
    }

    /// `self ⊗ other`, with index `i * dim(other) + k`.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        StateVector { amplitudes }
    }
}

/// `|φ_z⟩ = n^{-1/2} Σ_i (-1)^{z_i} |i⟩`.
pub fn phi_vector(z: &BitString) -> StateVector {
    let amp = 1.0 / (z.len() as f64).sqrt();
    StateVector::new(z.iter().map(|b| if b { -amp } else { amp }).collect())
}

/// `|u_j^s⟩ = n^{-1/2} Σ_i (-1)^{τ_s(i)} |i⟩|σ_j(i)⟩` in dimension `n²`.
pub fn u_vector(t: TransformIndex, n: usize) -> Result<StateVector> {
    require_power_of_four(n)?;
    let t = TransformIndex::new(t.j, t.s, n)?;
    let tau = fourier_pattern_index(t.s, n)?;
    let amp = 1.0 / (n as f64).sqrt();
    let mut amplitudes = vec![0.0; n * n];
    for i in 0..n {
        let target = (i + t.j) % n;
        amplitudes[i * n + target] = if tau.get(i) { -amp } else { amp };
    }
    Ok(StateVector::new(amplitudes))
}

/// The exact law of one referee measurement: integer weights `(2Δ - n)²`
/// over the common denominator `n³`, row-major in `(j, s)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeDistribution {
    n: usize,
    weights: Vec<u64>,
    cumulative: Vec<u64>,
    in_window_weight: u64,
}

impl OutcomeDistribution {
    pub fn from_table(table: &DeltaTable) -> Self {
        let n = table.n();
        let weights: Vec<u64> = table
            .iter()
            .map(|(_, d)| {
                let v = (2 * d).abs_diff(n) as u64;
                v * v
            })
            .collect();
        let cumulative = weights
            .iter()
            .scan(0u64, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Self { n, weights, cumulative, in_window_weight: table.aleph_statistic() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n³`.
    pub fn denominator(&self) -> u64 {
        (self.n as u64).pow(3)
    }

    pub fn weight(&self, t: TransformIndex) -> u64 {
        self.weights[(t.j - 1) * self.n + t.s]
    }

    pub fn prob_exact(&self, t: TransformIndex) -> Ratio<u64> {
        Ratio::new(self.weight(t), self.denominator())
    }

    pub fn prob(&self, t: TransformIndex) -> f64 {
        self.weight(t) as f64 / self.denominator() as f64
    }

    /// Sum of the integer weights; equals [`Self::denominator`].
    pub fn total_weight(&self) -> u64 {
        *self.cumulative.last().unwrap_or(&0)
    }

    pub fn max_weight(&self) -> u64 {
        self.weights.iter().copied().max().unwrap_or(0)
    }

    /// Probability mass on outcomes whose `Δ` is inside the window, as a
    /// numerator over `n³`.
    pub fn in_window_weight(&self) -> u64 {
        self.in_window_weight
    }

    pub fn iter(&self) -> impl Iterator<Item = (TransformIndex, u64)> + '_ {
        let n = self.n;
        self.weights
            .iter()
            .enumerate()
            .map(move |(k, &w)| (TransformIndex { j: k / n + 1, s: k % n }, w))
    }

    /// Draws one outcome with probability exactly `weight / n³`.
    pub fn sample(&self, rng: &mut Rng) -> TransformIndex {
        let r = rng.random_range(0..self.total_weight());
        let k = self.cumulative.partition_point(|&c| c <= r);
        TransformIndex { j: k / self.n + 1, s: k % self.n }
    }
}

pub fn outcome_distribution(x: &BitString, y: &BitString) -> Result<OutcomeDistribution> {
    Ok(OutcomeDistribution::from_table(&delta_table(x, y)?))
}

/// `|(⟨φ_x| ⊗ ⟨φ_y|) |u_j^s⟩|²` from explicit vectors.
pub fn outcome_probability_from_states(x: &BitString, y: &BitString, t: TransformIndex) -> Result<f64> {
    let joint = phi_vector(x).tensor(&phi_vector(y));
    let amp = joint.dot(&u_vector(t, x.len())?);
    Ok(amp * amp)
}

/// One run of the protocol: `log n` independent measurement outcomes.
pub fn run_protocol(x: &BitString, y: &BitString, rng: &mut Rng) -> Result<AnswerSequence> {
    let dist = outcome_distribution(x, y)?;
    Ok(sample_answer(&dist, rng))
}

fn sample_answer(dist: &OutcomeDistribution, rng: &mut Rng) -> AnswerSequence {
    let n = dist.n();
    let log_n = n.trailing_zeros() as usize;
    let entries = (0..log_n).map(|_| dist.sample(rng)).collect();
    AnswerSequence::new(entries, n).expect("sampled entries are in range")
}

/// The constant-copy variant: measure `t` copies, then output the `t`
/// outcomes repeated `⌈log n / t⌉` times with the last copy trimmed.
pub fn run_protocol_trep(x: &BitString, y: &BitString, t: usize, rng: &mut Rng) -> Result<AnswerSequence> {
    if t == 0 {
        return Err(GhrError::InvalidParameter("repetition count t must be at least 1".into()));
    }
    let dist = outcome_distribution(x, y)?;
    Ok(sample_answer_trep(&dist, t, rng))
}

fn sample_answer_trep(dist: &OutcomeDistribution, t: usize, rng: &mut Rng) -> AnswerSequence {
    let n = dist.n();
    let log_n = n.trailing_zeros() as usize;
    let measured: Vec<_> = (0..t).map(|_| dist.sample(rng)).collect();
    let entries = measured.iter().copied().cycle().take(log_n).collect();
    AnswerSequence::new(entries, n).expect("sampled entries are in range")
}

/// Exact failure probability of [`run_protocol`] on `(x, y)`: zero when
/// `¬ℵ(x, y)`, otherwise `P[Bin(log n, p) > log n / 2]` with `p` the
/// in-window mass.
pub fn failure_probability_exact_ratio(x: &BitString, y: &BitString) -> Result<BigRational> {
    let table = delta_table(x, y)?;
    Ok(failure_from_table(&table))
}

pub(crate) fn failure_from_table(table: &DeltaTable) -> BigRational {
    if !table.aleph() {
        return BigRational::from_integer(BigInt::from(0));
    }
    let n = table.n();
    let log_n = n.trailing_zeros() as usize;
    binomial_upper_tail_exact(log_n, log_n / 2, table.aleph_statistic(), (n as u64).pow(3))
}

pub fn failure_probability_exact(x: &BitString, y: &BitString) -> Result<f64> {
    Ok(to_f64(&failure_probability_exact_ratio(x, y)?))
}

/// `P[Bin(log n, 4/9) > log n / 2]`, the worst case allowed by `ℵ`.
pub fn failure_cap(n: usize) -> Result<BigRational> {
    let (log_n, _) = require_power_of_four(n)?;
    let log_n = log_n as usize;
    Ok(binomial_upper_tail_exact(log_n, log_n / 2, 4, 9))
}

/// Exact success probability averaged over all `4ⁿ` inputs.
pub fn success_probability_exhaustive(n: usize) -> Result<BigRational> {
    require_power_of_four(n)?;
    if n > 4 {
        return Err(GhrError::InvalidParameter(format!("exhaustive mode needs n = 4, got {n}")));
    }
    let mut failure = BigRational::from_integer(BigInt::from(0));
    let mut total = 0i64;
    for (x, y) in all_pairs(n) {
        failure += failure_probability_exact_ratio(&x, &y)?;
        total += 1;
    }
    Ok(BigRational::from_integer(BigInt::from(1)) - failure / BigInt::from(total))
}

/// End-to-end success rate over fresh uniform inputs. `repetitions = None`
/// runs the `log n`-copy protocol; `Some(t)` the `t`-copy variant.
pub fn estimate_success(n: usize, trials: u64, repetitions: Option<usize>, rng: &Rng) -> Result<McEstimate> {
    require_power_of_four(n)?;
    if trials == 0 {
        return Err(GhrError::InvalidParameter("trials must be positive".into()));
    }
    if repetitions == Some(0) {
        return Err(GhrError::InvalidParameter("repetition count t must be at least 1".into()));
    }
    let hits = mc::count_successes(rng, trials, |r| {
        let x = BitString::random(n, r);
        let y = BitString::random(n, r);
        let table = delta_table(&x, &y).expect("shape validated");
        let dist = OutcomeDistribution::from_table(&table);
        let ans = match repetitions {
            None => sample_answer(&dist, r),
            Some(t) => sample_answer_trep(&dist, t, r),
        };
        ghr_is_valid_with_table(&table, &ans)
    });
    Ok(McEstimate::from_count(hits, trials, rng.seed()))
}
