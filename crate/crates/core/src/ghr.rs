//! The problem layer: transformed distances `Δ_{j,s}`, the typicality
//! predicate `ℵ`, and validity checkers for GHD, tGHR and GHR.
//!
//! Everything here is exact integer arithmetic. The in-window statistic is
//! kept scaled by four, as `Σ (2Δ - n)²`, so that neither the window
//! `[n/2 - √n/2, n/2 + √n/2]` nor the `n³/9` threshold needs floating point.

use std::fmt;

use rayon::prelude::*;

use crate::bitkit::{fourier_pattern_index, log2_exact, BitString, Rng};
use crate::error::{GhrError, Result};
use crate::mc;

/// Checks the standing shape assumption `n > 1`, `2 | log n` and returns
/// `(log n, √n)`.
pub fn require_power_of_four(n: usize) -> Result<(u32, usize)> {
    let log_n = log2_exact(n).map_err(|_| GhrError::NotPowerOfFour(n))?;
    if n < 4 || log_n % 2 != 0 {
        return Err(GhrError::NotPowerOfFour(n));
    }
    Ok((log_n, 1usize << (log_n / 2)))
}

fn check_pair(x: &BitString, y: &BitString) -> Result<(u32, usize)> {
    if x.len() != y.len() {
        return Err(GhrError::LengthMismatch { left: x.len(), right: y.len() });
    }
    require_power_of_four(x.len())
}

/// One allowed transformation `(j, s)`: flip by `τ_s`, then shift by `σ_j`.
///
/// `j` is 1-based in `1..=n`; the frequency `s` is stored as an index in
/// `0..n`, i.e. the `log n`-bit string read most significant bit first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransformIndex {
    pub j: usize,
    pub s: usize,
}

impl TransformIndex {
    pub fn new(j: usize, s: usize, n: usize) -> Result<Self> {
        log2_exact(n)?;
        if j == 0 || j > n {
            return Err(GhrError::ShiftOutOfRange { j, n });
        }
        if s >= n {
            return Err(GhrError::InvalidParameter(format!("frequency {s} out of range for n = {n}")));
        }
        Ok(Self { j, s })
    }

    /// Builds the index from a `log n`-bit frequency string.
    pub fn from_bits(j: usize, s: &BitString, n: usize) -> Result<Self> {
        let log_n = log2_exact(n)? as usize;
        if s.len() != log_n {
            return Err(GhrError::LengthMismatch { left: s.len(), right: log_n });
        }
        Self::new(j, s.to_index_msb(), n)
    }

    pub fn s_bits(&self, n: usize) -> BitString {
        BitString::from_index_msb(self.s, n.trailing_zeros() as usize)
    }

    /// Renders as `j:s` with `s` in binary, e.g. `2:10`.
    pub fn display(&self, n: usize) -> impl fmt::Display {
        format!("{}:{}", self.j, self.s_bits(n))
    }
}

/// `Δ_{j,s}(x, y) = |σ_j(τ_s ⊕ x) ⊕ y|`, computed directly.
pub fn delta(x: &BitString, y: &BitString, t: TransformIndex) -> Result<usize> {
    let n = x.len();
    check_pair(x, y)?;
    if t.j == 0 || t.j > n || t.s >= n {
        return Err(GhrError::InvalidParameter(format!("transform ({}, {}) invalid for n = {n}", t.j, t.s)));
    }
    Ok(naive_delta(x, y, t.j, t.s))
}

fn naive_delta(x: &BitString, y: &BitString, j: usize, s: usize) -> usize {
    let n = x.len();
    let tau = fourier_pattern_index(s, n).expect("n validated");
    tau.xor_unchecked(x).rotate(j % n).distance_unchecked(y)
}

/// How [`delta_table_with`] evaluates the `n²` distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeltaBackend {
    /// One flip, shift and popcount per entry: `O(n³ / 64)`.
    Naive,
    /// Walsh–Hadamard correlation per shift: `O(n² log n)`.
    #[default]
    Correlation,
}

/// All `n²` distances `Δ_{j,s}(x, y)`, row-major in `(j, s)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaTable {
    n: usize,
    values: Vec<u32>,
}

impl DeltaTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `Δ_{j,s}` for `j` in `1..=n` and frequency index `s` in `0..n`.
    pub fn get(&self, j: usize, s: usize) -> usize {
        assert!((1..=self.n).contains(&j) && s < self.n);
        self.values[(j - 1) * self.n + s] as usize
    }

    pub fn at(&self, t: TransformIndex) -> usize {
        self.get(t.j, t.s)
    }

    /// `(transform, Δ)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (TransformIndex, usize)> + '_ {
        let n = self.n;
        self.values.iter().enumerate().map(move |(k, &v)| {
            (TransformIndex { j: k / n + 1, s: k % n }, v as usize)
        })
    }

    /// `Σ_{j,s} (2Δ - n)²`; equals `n³` for every input pair.
    pub fn parseval_sum(&self) -> u128 {
        let n = self.n as i64;
        self.values
            .iter()
            .map(|&d| {
                let v = 2 * d as i64 - n;
                (v * v) as u128
            })
            .sum()
    }

    /// Whether `Δ` lies in `[n/2 - √n/2, n/2 + √n/2]` (both ends inclusive).
    pub fn in_window(&self, delta: usize) -> bool {
        let root = self.n.isqrt();
        (2 * delta).abs_diff(self.n) <= root
    }

    /// The scaled in-window statistic `Σ_{in window} (2Δ - n)²`.
    pub fn aleph_statistic(&self) -> u64 {
        self.values
            .iter()
            .map(|&d| d as usize)
            .filter(|&d| self.in_window(d))
            .map(|d| {
                let v = (2 * d).abs_diff(self.n) as u64;
                v * v
            })
            .sum()
    }

    /// `ℵ`: the unscaled in-window sum is at most `n³ / 9`.
    pub fn aleph(&self) -> bool {
        aleph_from_statistic(self.aleph_statistic(), self.n)
    }
}

pub(crate) fn aleph_from_statistic(statistic: u64, n: usize) -> bool {
    let n = n as u128;
    9 * statistic as u128 <= 4 * n * n * n
}

pub fn delta_table(x: &BitString, y: &BitString) -> Result<DeltaTable> {
    delta_table_with(x, y, DeltaBackend::default())
}

pub fn delta_table_with(x: &BitString, y: &BitString, backend: DeltaBackend) -> Result<DeltaTable> {
    check_pair(x, y)?;
    let n = x.len();
    let rows: Vec<Vec<u32>> = match backend {
        DeltaBackend::Naive => (1..=n)
            .into_par_iter()
            .map(|j| (0..n).map(|s| naive_delta(x, y, j, s) as u32).collect())
            .collect(),
        DeltaBackend::Correlation => (1..=n)
            .into_par_iter()
            .map(|j| correlation_row(x, y, j))
            .collect(),
    };
    Ok(DeltaTable { n, values: rows.concat() })
}

/// Row `j` of the table through one Walsh–Hadamard transform.
///
/// `|σ_j(τ_s ⊕ x) ⊕ y| = |τ_s ⊕ w|` with `w = x ⊕ σ_j⁻¹(y)`, and
/// `Σ_i (-1)^{τ_s(i) ⊕ w(i)}` is the Walsh coefficient of `(-1)^w` at `s`.
fn correlation_row(x: &BitString, y: &BitString, j: usize) -> Vec<u32> {
    let n = x.len();
    let w = x.xor_unchecked(&y.rotate(n - j % n));
    let mut signs: Vec<i32> = w.iter().map(|b| if b { -1 } else { 1 }).collect();
    fwht(&mut signs);
    signs.into_iter().map(|c| ((n as i32 - c) / 2) as u32).collect()
}

/// In-place unnormalised Walsh–Hadamard transform in natural order:
/// `out[s] = Σ_i (-1)^{⟨s,i⟩} in[i]`.
pub fn fwht(data: &mut [i32]) {
    let n = data.len();
    assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in data.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// The scaled statistic `Σ (2Δ - n)²` over in-window entries.
pub fn aleph_statistic(x: &BitString, y: &BitString) -> Result<u64> {
    Ok(delta_table(x, y)?.aleph_statistic())
}

pub fn aleph(x: &BitString, y: &BitString) -> Result<bool> {
    Ok(delta_table(x, y)?.aleph())
}

/// A candidate GHR answer: exactly `log n` transform indices, repeats
/// allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerSequence {
    entries: Vec<TransformIndex>,
}

impl AnswerSequence {
    pub fn new(entries: Vec<TransformIndex>, n: usize) -> Result<Self> {
        let log_n = log2_exact(n)? as usize;
        if entries.len() != log_n {
            return Err(GhrError::AnswerLength { got: entries.len(), expected: log_n });
        }
        for t in &entries {
            TransformIndex::new(t.j, t.s, n)?;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TransformIndex] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Validity of `ans` for `GHR(x, y)`: always valid when `¬ℵ(x, y)`, otherwise
/// at least `log n / 2` entries must have `Δ` outside the window.
pub fn ghr_is_valid(x: &BitString, y: &BitString, ans: &AnswerSequence) -> Result<bool> {
    let (log_n, _) = check_pair(x, y)?;
    if ans.len() != log_n as usize {
        return Err(GhrError::AnswerLength { got: ans.len(), expected: log_n as usize });
    }
    let table = delta_table(x, y)?;
    Ok(ghr_is_valid_with_table(&table, ans))
}

pub(crate) fn ghr_is_valid_with_table(table: &DeltaTable, ans: &AnswerSequence) -> bool {
    if !table.aleph() {
        return true;
    }
    let outside = ans.entries().iter().filter(|&&t| !table.in_window(table.at(t))).count();
    2 * outside >= ans.len()
}

/// Membership in tGHR: `|τ ⊕ x ⊕ y| ≤ n/2 - √n`.
pub fn tghr_is_valid(x: &BitString, y: &BitString, tau: &BitString) -> Result<bool> {
    let d = x.xor(y)?.distance(tau)?;
    Ok(tghr_distance_ok(d, x.len()))
}

/// `w ≤ n/2 - √n` in integers: `2w ≤ n` and `4n ≤ (n - 2w)²`.
pub(crate) fn tghr_distance_ok(w: usize, n: usize) -> bool {
    if 2 * w > n {
        return false;
    }
    let gap = (n - 2 * w) as u128;
    4 * n as u128 <= gap * gap
}

/// Value of the partial function `GHD_d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GhdValue {
    Zero,
    One,
    Undefined,
}

pub fn ghd_value(x: &BitString, y: &BitString, d: usize) -> Result<GhdValue> {
    let w = x.distance(y)?;
    let n = x.len();
    if d == 0 || 2 * d > n {
        return Err(GhrError::InvalidParameter(format!("gap d = {d} outside 1..=n/2 for n = {n}")));
    }
    Ok(if 2 * w >= n + 2 * d {
        GhdValue::One
    } else if 2 * w + 2 * d <= n {
        GhdValue::Zero
    } else {
        GhdValue::Undefined
    })
}

/// A Monte-Carlo proportion with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub trials: u64,
    pub stderr: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_count(successes: u64, trials: u64, seed: u64) -> Self {
        assert!(trials > 0, "estimate needs at least one trial");
        let mean = successes as f64 / trials as f64;
        Self { mean, trials, stderr: (mean * (1.0 - mean) / trials as f64).sqrt(), seed }
    }
}

/// An exactly enumerated proportion `hits / total`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactProportion {
    pub hits: u64,
    pub total: u64,
}

impl ExactProportion {
    pub fn value(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

/// Every input pair of length `n`, in lexicographic order of `(x, y)` as
/// integers. Only sensible for tiny `n`.
pub fn all_pairs(n: usize) -> impl Iterator<Item = (BitString, BitString)> {
    assert!(n <= 16, "exhaustive enumeration is limited to n <= 16");
    let size = 1u64 << n;
    (0..size).flat_map(move |a| {
        (0..size).map(move |b| (BitString::from_u64(a, n), BitString::from_u64(b, n)))
    })
}

/// `Pr[ℵ(X, Y)]` for uniform `(X, Y)`, by enumerating all `4ⁿ` pairs.
pub fn aleph_probability_exhaustive(n: usize) -> Result<ExactProportion> {
    require_power_of_four(n)?;
    if n > 8 {
        return Err(GhrError::InvalidParameter(format!("exhaustive mode needs n <= 8, got {n}")));
    }
    let pairs: Vec<_> = all_pairs(n).collect();
    let hits = pairs
        .par_iter()
        .map(|(x, y)| delta_table(x, y).map(|t| t.aleph() as u64))
        .sum::<Result<u64>>()?;
    Ok(ExactProportion { hits, total: pairs.len() as u64 })
}

/// Monte-Carlo estimate of `Pr[ℵ(X, Y)]` over uniform pairs.
pub fn estimate_aleph_probability(n: usize, trials: u64, rng: &Rng) -> Result<McEstimate> {
    require_power_of_four(n)?;
    if trials == 0 {
        return Err(GhrError::InvalidParameter("trials must be positive".into()));
    }
    let hits = mc::count_successes(rng, trials, |r| {
        let x = BitString::random(n, r);
        let y = BitString::random(n, r);
        delta_table(&x, &y).expect("shape validated").aleph()
    });
    Ok(McEstimate::from_count(hits, trials, rng.seed()))
}
