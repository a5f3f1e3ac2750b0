//! Concentration-bound calculators, exact binomial oracles and the
//! validators that check the calculators against them.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bitkit::{BitString, Rng};
use crate::error::{invalid, Result};
use crate::mc;
use crate::rational::binomial_row;

/// One checked grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundPoint {
    pub label: String,
    pub bound: f64,
    /// Exact or empirical value the bound must dominate.
    pub observed: f64,
    /// Standard error of `observed` (zero when exact).
    pub stderr: f64,
    pub satisfied: bool,
}

/// Whether the bound sits above or below the value it is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundKind {
    #[default]
    Upper,
    Lower,
}

/// Outcome of checking a bound over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub grid: String,
    pub kind: BoundKind,
    pub points: Vec<BoundPoint>,
    pub pass: bool,
}

impl BoundReport {
    pub fn new(grid: impl Into<String>, points: Vec<BoundPoint>) -> Self {
        Self::with_kind(grid, BoundKind::Upper, points)
    }

    pub fn with_kind(grid: impl Into<String>, kind: BoundKind, points: Vec<BoundPoint>) -> Self {
        let pass = points.iter().all(|p| p.satisfied);
        Self { grid: grid.into(), kind, points, pass }
    }

    pub fn violations(&self) -> usize {
        self.points.iter().filter(|p| !p.satisfied).count()
    }

    /// Tightness: the largest `observed / bound` for upper bounds and
    /// `bound / observed` for lower bounds. Values above 1 mean a violation.
    pub fn max_ratio(&self) -> f64 {
        self.points
            .iter()
            .filter_map(|p| match self.kind {
                BoundKind::Upper => (p.bound > 0.0).then(|| p.observed / p.bound),
                BoundKind::Lower => (p.observed > 0.0).then(|| p.bound / p.observed),
            })
            .fold(0.0, f64::max)
    }
}

fn cap(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Calculators

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentKind {
    /// `P[|X| ≥ t] ≤ E|X| / t`.
    Markov,
    /// `P[|X - EX| ≥ t] ≤ Var X / t²`.
    Chebyshev,
}

pub fn markov_chebyshev_bound(kind: MomentKind, moment: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    if !(moment >= 0.0) {
        return Err(invalid(format!("moment must be nonnegative, got {moment}")));
    }
    Ok(cap(match kind {
        MomentKind::Markov => moment / t,
        MomentKind::Chebyshev => moment / (t * t),
    }))
}

/// `2 exp(-2t² / Σ (b_i - a_i)²)`, capped at 1.
pub fn hoeffding_bound(ranges: &[(f64, f64)], t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("t must be nonnegative, got {t}")));
    }
    if let Some(&(a, b)) = ranges.iter().find(|(a, b)| !(b >= a)) {
        return Err(invalid(format!("range ({a}, {b}) has b < a")));
    }
    let spread: f64 = ranges.iter().map(|(a, b)| (b - a) * (b - a)).sum();
    if spread == 0.0 {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    Ok(cap(2.0 * (-2.0 * t * t / spread).exp()))
}

/// Hoeffding for `m` variables in `[0, 1]`.
pub fn hoeffding_unit(m: usize, t: f64) -> Result<f64> {
    hoeffding_bound(&vec![(0.0, 1.0); m], t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    /// `P[Σ X_i ≤ a - t]` given `Σ E[X_i | past] ≥ a`.
    Lower,
    /// `P[Σ X_i ≥ a + t]` given `Σ E[X_i | past] ≤ a`.
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChernoffForm {
    /// `e^{-t²/2a}` (lower) and `e^{-t²/(2a+t)}` (upper).
    Exp,
    /// `(μ/A)^A ((m-μ)/(m-A))^{m-A}` with `μ = a` and `A = a ∓ t`.
    Ratio { m: f64 },
}

/// The relaxed Chernoff bound, capped at 1.
pub fn relaxed_chernoff_bound(tail: Tail, a: f64, t: f64, form: ChernoffForm) -> Result<f64> {
    if !(a >= 0.0) || !(t >= 0.0) {
        return Err(invalid(format!("need a, t >= 0, got a = {a}, t = {t}")));
    }
    match form {
        ChernoffForm::Exp => {
            if t == 0.0 {
                return Ok(1.0);
            }
            let denom = match tail {
                Tail::Lower => 2.0 * a,
                Tail::Upper => 2.0 * a + t,
            };
            Ok(cap((-t * t / denom).exp()))
        }
        ChernoffForm::Ratio { m } => {
            let big_a = match tail {
                Tail::Lower => a - t,
                Tail::Upper => a + t,
            };
            if big_a < 0.0 || big_a > m {
                // the event is empty
                return Ok(0.0);
            }
            chernoff_ratio(m, a, big_a)
        }
    }
}

fn xlogy_ratio(x: f64, num: f64, den: f64) -> f64 {
    // x ln(num / den) with 0 ln(anything) = 0
    if x == 0.0 {
        0.0
    } else {
        x * (num / den).ln()
    }
}

/// `(μ/A)^A ((m-μ)/(m-A))^{m-A}` with `0⁰ = 1`, capped at 1.
pub fn chernoff_ratio(m: f64, mu: f64, big_a: f64) -> Result<f64> {
    if !(0.0 <= mu && mu <= m && 0.0 <= big_a && big_a <= m) {
        return Err(invalid(format!("need 0 <= mu, A <= m; got m = {m}, mu = {mu}, A = {big_a}")));
    }
    let log = xlogy_ratio(big_a, mu, big_a) + xlogy_ratio(m - big_a, m - mu, m - big_a);
    Ok(cap(log.exp()))
}

// ---------------------------------------------------------------------------
// Exact binomial oracle

/// `Σ_{k=a}^{b} C(m, k) / 2^m` as an exact rational.
pub fn exact_binomial_window(m: usize, a: usize, b: usize) -> Result<BigRational> {
    if a > b || b > m {
        return Err(invalid(format!("need 0 <= a <= b <= m, got a = {a}, b = {b}, m = {m}")));
    }
    let row = binomial_row(m);
    let num: BigUint = row[a..=b].iter().sum();
    Ok(BigRational::new(BigInt::from(num), BigInt::from(1) << m))
}

/// Masses and cumulative sums of `Binomial(m, ½)` rounded once from exact
/// integers, for bulk tail queries.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    m: usize,
    pmf: Vec<f64>,
    // cdf[k] = P[S < k]
    cdf: Vec<f64>,
}

fn big_ratio_f64(num: &BigUint, shift: usize) -> f64 {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(1) << shift).to_f64().unwrap_or(f64::NAN)
}

impl BinomialTable {
    pub fn new(m: usize) -> Self {
        let row = binomial_row(m);
        let pmf = row.iter().map(|c| big_ratio_f64(c, m)).collect();
        let mut cdf = Vec::with_capacity(m + 2);
        let mut acc = BigUint::zero();
        cdf.push(0.0);
        for c in &row {
            acc += c;
            cdf.push(big_ratio_f64(&acc, m));
        }
        Self { m, pmf, cdf }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.pmf[k]
    }

    /// `P[a ≤ S ≤ b]`.
    pub fn window(&self, a: usize, b: usize) -> f64 {
        self.cdf[b + 1] - self.cdf[a]
    }

    /// `P[S ≤ k]`.
    pub fn lower_tail(&self, k: usize) -> f64 {
        self.cdf[k.min(self.m) + 1]
    }

    /// `P[S ≥ k]`.
    pub fn upper_tail(&self, k: usize) -> f64 {
        if k > self.m {
            0.0
        } else {
            1.0 - self.cdf[k]
        }
    }

    /// `P[|S - m/2| ≥ t]`.
    pub fn two_sided(&self, t: f64) -> f64 {
        let half = self.m as f64 / 2.0;
        (0..=self.m).filter(|&k| (k as f64 - half).abs() >= t).map(|k| self.pmf[k]).sum()
    }
}

// ---------------------------------------------------------------------------
// Window lower bound

/// Correction constant calibrated on `m ∈ {50, 52, …, 500}` with windows
/// inside `m/2 ± √m`. Negative: the uncorrected bound already holds there
/// with room to spare. Sound only on that range.
pub const CALIBRATED_C_TERM: f64 = -4.029_742;

/// `√(2/πm)(b-a) - √(8/(9πm³))((b-m/2)³ - (a-m/2)³) - c_term/m`.
pub fn binomial_window_lower(m: usize, a: usize, b: usize, c_term: f64) -> Result<f64> {
    if !m.is_multiple_of(2) {
        return Err(invalid(format!("m = {m} must be even")));
    }
    if a >= b || b > m {
        return Err(invalid(format!("need 0 <= a < b <= m, got a = {a}, b = {b}, m = {m}")));
    }
    let mf = m as f64;
    let pi = std::f64::consts::PI;
    let (da, db) = (a as f64 - mf / 2.0, b as f64 - mf / 2.0);
    Ok((2.0 / (pi * mf)).sqrt() * (b - a) as f64 - (8.0 / (9.0 * pi * mf.powi(3))).sqrt() * (db.powi(3) - da.powi(3))
        - c_term / mf)
}

/// Windows `[a, b]` with `a < b` inside `m/2 ± √m`.
fn calibration_windows(m: usize) -> Vec<(usize, usize)> {
    let r = (m as f64).sqrt();
    let half = m as f64 / 2.0;
    let lo = (half - r).ceil().max(0.0) as usize;
    let hi = ((half + r).floor() as usize).min(m);
    (lo..=hi).flat_map(|a| (a + 1..=hi).map(move |b| (a, b))).collect()
}

/// Smallest `c` making the window bound hold on the calibration grid for
/// the given (even) `m` values: `max m · (bound(c = 0) - exact)`.
pub fn calibrate_c_term(ms: impl IntoIterator<Item = usize>) -> Result<f64> {
    let ms: Vec<usize> = ms.into_iter().collect();
    if ms.iter().any(|m| m % 2 != 0) {
        return Err(invalid("calibration needs even m"));
    }
    let worst = ms
        .par_iter()
        .map(|&m| {
            let table = BinomialTable::new(m);
            calibration_windows(m)
                .into_iter()
                .map(|(a, b)| {
                    let base = binomial_window_lower(m, a, b, 0.0).expect("valid window");
                    m as f64 * (base - table.window(a, b))
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(worst)
}

/// The default calibration grid.
pub fn calibration_grid() -> impl Iterator<Item = usize> {
    (50..=500).step_by(2)
}

/// Checks the window bound with `c_term` on the calibration grid.
pub fn window_lower_report(ms: impl IntoIterator<Item = usize>, c_term: f64) -> BoundReport {
    let ms: Vec<usize> = ms.into_iter().collect();
    let points = ms
        .par_iter()
        .flat_map_iter(|&m| {
            let table = BinomialTable::new(m);
            calibration_windows(m).into_iter().map(move |(a, b)| {
                let bound = binomial_window_lower(m, a, b, c_term).expect("valid window");
                let exact = table.window(a, b);
                BoundPoint {
                    label: format!("m={m};a={a};b={b}"),
                    bound,
                    observed: exact,
                    stderr: 0.0,
                    // a lower bound: satisfied when it does not exceed the exact value
                    satisfied: bound <= exact,
                }
            })
        })
        .collect();
    BoundReport::with_kind(format!("window lower bound, c = {c_term}"), BoundKind::Lower, points)
}

// ---------------------------------------------------------------------------
// Dominance suites

fn tail_point(label: String, bound: f64, exact: f64) -> BoundPoint {
    BoundPoint { label, bound, observed: exact, stderr: 0.0, satisfied: exact <= bound }
}

/// Exact `P[|S - m/2| ≥ t]` for `S ~ Binomial(m, ½)` against Hoeffding with
/// unit ranges, over `t ∈ {1..⌊m · t_frac⌋}`.
pub fn hoeffding_dominance(ms: impl IntoIterator<Item = usize>, t_frac: f64) -> BoundReport {
    let ms: Vec<usize> = ms.into_iter().collect();
    let points = ms
        .par_iter()
        .flat_map_iter(|&m| {
            let table = BinomialTable::new(m);
            let t_max = (m as f64 * t_frac).floor() as usize;
            (1..=t_max).map(move |t| {
                let bound = hoeffding_unit(m, t as f64).expect("valid");
                tail_point(format!("m={m};t={t}"), bound, table.two_sided(t as f64))
            })
        })
        .collect();
    BoundReport::new(format!("hoeffding, t <= {t_frac} m"), points)
}

/// Exact lower and upper tails of `Binomial(m, ½)` around `a = m/2` against
/// both relaxed Chernoff forms, over `t ∈ {1..⌊m/4⌋}`.
pub fn chernoff_dominance(ms: impl IntoIterator<Item = usize>) -> BoundReport {
    let ms: Vec<usize> = ms.into_iter().collect();
    let points = ms
        .par_iter()
        .flat_map_iter(|&m| {
            let table = BinomialTable::new(m);
            let a = m as f64 / 2.0;
            (1..=m / 4).flat_map(move |t| {
                let tf = t as f64;
                // S ≤ a - t and S ≥ a + t on the integers
                let lower = table.lower_tail((a - tf).floor() as usize);
                let upper = table.upper_tail((a + tf).ceil() as usize);
                let form = |tail, form| relaxed_chernoff_bound(tail, a, tf, form).expect("valid");
                let ratio = ChernoffForm::Ratio { m: m as f64 };
                [
                    tail_point(format!("m={m};t={t};lower;exp"), form(Tail::Lower, ChernoffForm::Exp), lower),
                    tail_point(format!("m={m};t={t};upper;exp"), form(Tail::Upper, ChernoffForm::Exp), upper),
                    tail_point(format!("m={m};t={t};lower;ratio"), form(Tail::Lower, ratio), lower),
                    tail_point(format!("m={m};t={t};upper;ratio"), form(Tail::Upper, ratio), upper),
                ]
            })
        })
        .collect();
    BoundReport::new("relaxed chernoff on binomial, t <= m/4", points)
}

/// Exact law of `Σ X_i` for a dependent 0/1 process whose conditional means
/// always sum to `m/2`: `X_1` is a fair coin, then for each pair
/// `(X_{2k}, X_{2k+1})` both depend on `X_{2k-1}` through means
/// `½ ± δ(2X_{2k-1} - 1)/2` with opposite signs; an even `m` ends with one
/// more fair coin.
pub fn seesaw_distribution(m: usize, delta: f64) -> Result<Vec<f64>> {
    if m == 0 || !(0.0..=1.0).contains(&delta) {
        return Err(invalid(format!("need m >= 1 and delta in [0, 1], got m = {m}, delta = {delta}")));
    }
    // dist[b][s]: last odd bit b, running sum s
    let mut dist = vec![vec![0.0; m + 1]; 2];
    dist[0][0] = 0.5;
    dist[1][1] = 0.5;
    let pairs = (m - 1) / 2;
    for _ in 0..pairs {
        let mut next = vec![vec![0.0; m + 1]; 2];
        for b in 0..2 {
            let sign = if b == 1 { 1.0 } else { -1.0 };
            let p_even = 0.5 + delta * sign / 2.0;
            let p_odd = 0.5 - delta * sign / 2.0;
            for s in 0..=m {
                let w = dist[b][s];
                if w == 0.0 {
                    continue;
                }
                for (xe, pe) in [(0, 1.0 - p_even), (1, p_even)] {
                    for (xo, po) in [(0, 1.0 - p_odd), (1, p_odd)] {
                        next[xo][s + xe + xo] += w * pe * po;
                    }
                }
            }
        }
        dist = next;
    }
    let mut sums: Vec<f64> = (0..=m).map(|s| dist[0][s] + dist[1][s]).collect();
    if m.is_multiple_of(2) {
        let mut shifted = vec![0.0; m + 1];
        for s in 0..m {
            shifted[s] += sums[s] / 2.0;
            shifted[s + 1] += sums[s] / 2.0;
        }
        sums = shifted;
    }
    Ok(sums)
}

/// Both exp forms against the exact tails of the dependent process.
pub fn seesaw_dominance(ms: impl IntoIterator<Item = usize>, deltas: &[f64]) -> Result<BoundReport> {
    let mut points = Vec::new();
    for m in ms {
        for &delta in deltas {
            let law = seesaw_distribution(m, delta)?;
            let a = m as f64 / 2.0;
            for t in 1..=m / 4 {
                let tf = t as f64;
                let lower: f64 = law.iter().enumerate().filter(|(s, _)| *s as f64 <= a - tf).map(|(_, p)| p).sum();
                let upper: f64 = law.iter().enumerate().filter(|(s, _)| *s as f64 >= a + tf).map(|(_, p)| p).sum();
                let lb = relaxed_chernoff_bound(Tail::Lower, a, tf, ChernoffForm::Exp)?;
                let ub = relaxed_chernoff_bound(Tail::Upper, a, tf, ChernoffForm::Exp)?;
                points.push(tail_point(format!("m={m};delta={delta};t={t};lower"), lb, lower));
                points.push(tail_point(format!("m={m};delta={delta};t={t};upper"), ub, upper));
            }
        }
    }
    Ok(BoundReport::new("relaxed chernoff on a dependent process", points))
}

// ---------------------------------------------------------------------------
// Empirical validators

/// `min(1, 4 e^{-t²/2n})`.
pub fn shift_xor_bound(n: usize, t: f64) -> f64 {
    cap(4.0 * (-t * t / (2.0 * n as f64)).exp())
}

/// For each shift `i ∈ [n-1]` and a random `s`, the empirical frequency of
/// `||A ⊕ σ_i(A) ⊕ s| - n/2| ≥ t` over uniform `A` against
/// `4 e^{-t²/2n}`. A point passes when the frequency is at most the bound
/// plus three standard errors.
pub fn shift_xor_tail_check(n: usize, t_values: &[f64], trials: u64, rng: &Rng) -> Result<BoundReport> {
    if n < 2 {
        return Err(invalid(format!("need n >= 2, got {n}")));
    }
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let half = n as f64 / 2.0;
    let mut points = Vec::new();
    for i in 1..n {
        let stream = rng.child(i as u64);
        let s = BitString::random(n, &mut stream.clone());
        let deviations = mc::map_trials(&stream, trials, |r| {
            let a = BitString::random(n, r);
            let w = a.xor_unchecked(&a.rotate(i)).distance_unchecked(&s);
            (w as f64 - half).abs()
        });
        for &t in t_values {
            let hits = deviations.iter().filter(|&&d| d >= t).count();
            let freq = hits as f64 / trials as f64;
            let stderr = (freq * (1.0 - freq) / trials as f64).sqrt();
            let bound = shift_xor_bound(n, t);
            points.push(BoundPoint {
                label: format!("i={i};t={t}"),
                bound,
                observed: freq,
                stderr,
                satisfied: freq <= bound + 3.0 * stderr,
            });
        }
    }
    Ok(BoundReport::new(format!("shift-xor tail, n = {n}, {trials} trials per shift"), points))
}

/// Given pairs `(f(a), μ(a))` on a finite support where `f` and `μ` are
/// oppositely ordered (`(f(a₁) - f(a₂))(μ(a₁) - μ(a₂)) ≤ 0` for every pair),
/// reports whether `E_μ[f] ≤ E_uniform[f]`.
pub fn anticorrelated_expectation_holds(values: &[(f64, f64)]) -> Result<bool> {
    if values.is_empty() {
        return Err(invalid("empty support"));
    }
    if values.iter().any(|&(_, p)| !(p >= 0.0)) {
        return Err(invalid("mu has a negative or NaN mass"));
    }
    let total: f64 = values.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("mu sums to {total}, not 1")));
    }
    for (k, &(f1, m1)) in values.iter().enumerate() {
        for &(f2, m2) in &values[k + 1..] {
            if (f1 - f2) * (m1 - m2) > 0.0 {
                return Err(invalid(format!("pair (f={f1}, mu={m1}), (f={f2}, mu={m2}) breaks anti-monotonicity")));
            }
        }
    }
    let e_mu: f64 = values.iter().map(|(f, p)| f * p).sum();
    let e_unif: f64 = values.iter().map(|(f, _)| f).sum::<f64>() / values.len() as f64;
    Ok(e_mu <= e_unif + 1e-12 * (1.0 + e_unif.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{big_ratio, to_f64};
    use crate::bitkit::Rng;
    use proptest::prelude::*;

    #[test]
    fn moment_examples() {
        assert_eq!(markov_chebyshev_bound(MomentKind::Markov, 1.0, 2.0).unwrap(), 0.5);
        assert_eq!(markov_chebyshev_bound(MomentKind::Chebyshev, 1.0, 2.0).unwrap(), 0.25);
        assert_eq!(markov_chebyshev_bound(MomentKind::Markov, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(markov_chebyshev_bound(MomentKind::Markov, 5.0, 1.0).unwrap(), 1.0);
        assert!(markov_chebyshev_bound(MomentKind::Markov, 1.0, 0.0).is_err());
    }

    #[test]
    fn hoeffding_examples() {
        let v = hoeffding_unit(100, 20.0).unwrap();
        assert!((v - 2.0 * (-8.0f64).exp()).abs() < 1e-15);
        assert!((v - 6.71e-4).abs() < 1e-6);
        assert_eq!(hoeffding_bound(&[(0.0, 3.0), (-1.0, 1.0)], 0.0).unwrap(), 1.0);
        assert!(hoeffding_bound(&[(1.0, 0.0)], 1.0).is_err());
    }

    #[test]
    fn chernoff_examples() {
        let v = relaxed_chernoff_bound(Tail::Upper, 10.0, 10.0, ChernoffForm::Exp).unwrap();
        assert!((v - (-100.0f64 / 30.0).exp()).abs() < 1e-15);
        assert!((v - 0.03567).abs() < 1e-5);
        assert_eq!(relaxed_chernoff_bound(Tail::Lower, 10.0, 0.0, ChernoffForm::Exp).unwrap(), 1.0);
        // ratio form at A = mu is 1, and 0^0 = 1 at the edges
        assert_eq!(chernoff_ratio(10.0, 4.0, 4.0).unwrap(), 1.0);
        assert!((chernoff_ratio(10.0, 5.0, 10.0).unwrap() - 0.5f64.powi(10)).abs() < 1e-15);
        assert!((chernoff_ratio(10.0, 5.0, 0.0).unwrap() - 0.5f64.powi(10)).abs() < 1e-15);
        let ratio = ChernoffForm::Ratio { m: 10.0 };
        assert_eq!(relaxed_chernoff_bound(Tail::Upper, 5.0, 6.0, ratio).unwrap(), 0.0);
        assert!(relaxed_chernoff_bound(Tail::Upper, -1.0, 1.0, ChernoffForm::Exp).is_err());
    }

    #[test]
    fn ratio_form_is_at_most_exp_form() {
        for m in [20usize, 50, 100] {
            let a = m as f64 / 2.0;
            for t in 1..=m / 4 {
                for tail in [Tail::Lower, Tail::Upper] {
                    let r = relaxed_chernoff_bound(tail, a, t as f64, ChernoffForm::Ratio { m: m as f64 }).unwrap();
                    let e = relaxed_chernoff_bound(tail, a, t as f64, ChernoffForm::Exp).unwrap();
                    assert!(r <= e + 1e-15, "m={m} t={t} {tail:?}");
                }
            }
        }
    }

    #[test]
    fn exact_window_examples() {
        assert_eq!(exact_binomial_window(4, 3, 4).unwrap(), big_ratio(5, 16));
        assert_eq!(exact_binomial_window(37, 0, 37).unwrap(), big_ratio(1, 1));
        let v = to_f64(&exact_binomial_window(100, 45, 55).unwrap());
        assert!((v - 0.7288).abs() < 1e-4);
        assert!(exact_binomial_window(4, 3, 2).is_err());
        assert!(exact_binomial_window(4, 0, 5).is_err());
    }

    #[test]
    fn exact_windows_partition() {
        for m in [1usize, 7, 30] {
            for a in 1..=m {
                for b in a..m {
                    let total = exact_binomial_window(m, a, b).unwrap()
                        + exact_binomial_window(m, b + 1, m).unwrap()
                        + exact_binomial_window(m, 0, a - 1).unwrap();
                    assert_eq!(total, big_ratio(1, 1));
                }
            }
        }
    }

    #[test]
    fn table_matches_exact() {
        let t = BinomialTable::new(60);
        for (a, b) in [(0, 60), (25, 35), (30, 30), (0, 10)] {
            let exact = to_f64(&exact_binomial_window(60, a, b).unwrap());
            assert!((t.window(a, b) - exact).abs() < 1e-15);
        }
        assert!((t.lower_tail(29) + t.upper_tail(30) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_lower_examples() {
        let v = binomial_window_lower(100, 45, 55, 0.0).unwrap();
        assert!((v - 0.665).abs() < 1e-3, "{v}");
        assert!(v <= to_f64(&exact_binomial_window(100, 45, 55).unwrap()));
        let thin = binomial_window_lower(100, 50, 51, 2.0).unwrap();
        assert!(thin <= to_f64(&exact_binomial_window(100, 50, 51).unwrap()));
        assert!(binomial_window_lower(99, 40, 50, 0.0).is_err());
        assert!(binomial_window_lower(100, 50, 50, 0.0).is_err());
    }

    #[test]
    fn calibration_reproduces_the_shipped_constant() {
        let c = calibrate_c_term(calibration_grid()).unwrap();
        assert!(c <= CALIBRATED_C_TERM, "{c}");
        assert!(CALIBRATED_C_TERM - c < 1e-5);
        assert!(window_lower_report(calibration_grid(), CALIBRATED_C_TERM).pass);
        // a slightly smaller constant breaks the bound at the worst point
        assert!(!window_lower_report([50usize], c - 1e-3).pass);
    }

    #[test]
    fn seesaw_process_is_normalised_and_dominated() {
        for m in [5usize, 6, 40] {
            for delta in [0.0, 0.5, 1.0] {
                let law = seesaw_distribution(m, delta).unwrap();
                assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let mean: f64 = law.iter().enumerate().map(|(s, p)| s as f64 * p).sum();
                assert!((mean - m as f64 / 2.0).abs() < 1e-9);
            }
        }
        // delta = 0 is a fair binomial
        let law = seesaw_distribution(12, 0.0).unwrap();
        let table = BinomialTable::new(12);
        assert!(law.iter().enumerate().all(|(k, p)| (p - table.pmf(k)).abs() < 1e-15));
        assert!(seesaw_dominance([20usize, 61, 120], &[0.5, 0.9]).unwrap().pass);
    }

    #[test]
    fn small_dominance_suites_pass() {
        assert!(hoeffding_dominance((10..=40).step_by(3), 0.5).pass);
        assert!(chernoff_dominance((10..=40).step_by(3)).pass);
    }

    #[test]
    fn shift_xor_report() {
        let rng = Rng::new(4);
        let r = shift_xor_tail_check(32, &[0.0, 4.0, 8.0], 500, &rng).unwrap();
        assert!(r.pass);
        assert_eq!(r.points.len(), 31 * 3);
        assert!(r.points.iter().filter(|p| p.label.ends_with("t=0")).all(|p| p.bound == 1.0 && p.observed == 1.0));
        assert_eq!(r, shift_xor_tail_check(32, &[0.0, 4.0, 8.0], 500, &rng).unwrap());
        assert!(shift_xor_tail_check(1, &[1.0], 10, &rng).is_err());
    }

    #[test]
    fn anticorrelation_examples() {
        let uniform = [(1.0, 0.25), (2.0, 0.25), (5.0, 0.25), (9.0, 0.25)];
        assert!(anticorrelated_expectation_holds(&uniform).unwrap());
        let constant = [(3.0, 0.1), (3.0, 0.1), (3.0, 0.8)];
        assert!(anticorrelated_expectation_holds(&constant).unwrap());

        let support: Vec<f64> = (-2..=2).map(|a| a as f64).collect();
        let weights: Vec<f64> = support.iter().map(|a| 4.0 - a * a + 1.0).collect();
        let total: f64 = weights.iter().sum();
        let pairs: Vec<(f64, f64)> = support.iter().zip(&weights).map(|(a, w)| (a * a, w / total)).collect();
        assert!(anticorrelated_expectation_holds(&pairs).unwrap());
        let e_mu: f64 = pairs.iter().map(|(f, p)| f * p).sum();
        assert!(e_mu < 2.0);

        assert!(anticorrelated_expectation_holds(&[(1.0, 0.7), (2.0, 0.4)]).is_err());
        assert!(anticorrelated_expectation_holds(&[(1.0, -0.5), (2.0, 1.5)]).is_err());
        assert!(anticorrelated_expectation_holds(&[(1.0, 0.2), (2.0, 0.8)]).is_err());
    }

    proptest! {
        #[test]
        fn calculators_are_capped_and_monotone(m in 1usize..300, a in 0.5f64..200.0, t1 in 0.0f64..100.0, dt in 0.0f64..50.0) {
            let t2 = t1 + dt;
            let h1 = hoeffding_unit(m, t1).unwrap();
            let h2 = hoeffding_unit(m, t2).unwrap();
            prop_assert!((0.0..=1.0).contains(&h1) && h2 <= h1);
            for tail in [Tail::Lower, Tail::Upper] {
                let c1 = relaxed_chernoff_bound(tail, a, t1, ChernoffForm::Exp).unwrap();
                let c2 = relaxed_chernoff_bound(tail, a, t2, ChernoffForm::Exp).unwrap();
                prop_assert!((0.0..=1.0).contains(&c1) && c2 <= c1);
                let mf = (2.0 * a).ceil();
                let r1 = relaxed_chernoff_bound(tail, a, t1, ChernoffForm::Ratio { m: mf }).unwrap();
                let r2 = relaxed_chernoff_bound(tail, a, t2, ChernoffForm::Ratio { m: mf }).unwrap();
                prop_assert!((0.0..=1.0).contains(&r1) && r2 <= r1 + 1e-12);
            }
            if t1 > 0.0 {
                for kind in [MomentKind::Markov, MomentKind::Chebyshev] {
                    let b1 = markov_chebyshev_bound(kind, a, t1).unwrap();
                    let b2 = markov_chebyshev_bound(kind, a, t2).unwrap();
                    prop_assert!((0.0..=1.0).contains(&b1) && b2 <= b1);
                }
            }
            prop_assert!(shift_xor_bound(m.max(2), t2) <= shift_xor_bound(m.max(2), t1));
        }

        #[test]
        fn anticorrelated_distributions_never_exceed_uniform(raw in proptest::collection::vec((0u32..20, 1u32..50), 1..8)) {
            // sort f ascending and mu descending to satisfy the hypothesis
            let mut fs: Vec<f64> = raw.iter().map(|(f, _)| *f as f64).collect();
            let mut ws: Vec<f64> = raw.iter().map(|(_, w)| *w as f64).collect();
            fs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            fs.dedup();
            ws.sort_by(|a, b| b.partial_cmp(a).unwrap());
            ws.dedup();
            let k = fs.len().min(ws.len());
            let total: f64 = ws[..k].iter().sum();
            let pairs: Vec<(f64, f64)> = (0..k).map(|i| (fs[i], ws[i] / total)).collect();
            prop_assert!(anticorrelated_expectation_holds(&pairs).unwrap());
        }
    }
}
