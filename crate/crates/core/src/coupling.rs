//! A coupling that makes `|A ⊕ Ã ⊕ s|` exactly `Binomial(n, ½)` and
//! independent of `|A|` for uniform `A`.
//!
//! Coordinates carrying the majority bit of `s` are `a_1 < a_2 < …`, the rest
//! `b_1 < b_2 < …`, and `d = (#a - #b) / 2`. Stage 1 tosses `Ã` on
//! `a_1..a_{2d}` one bit at a time; stage 2 handles the pairs
//! `(a_{2d+i}, b_i)` through an auxiliary coin `Z_i`. Every rule depends
//! only on the weight `k` of the untouched part of `A` and on how many
//! coordinates `n_rem` remain, so conditioned on `|A|` the untouched part is
//! a uniform weight-`k` string and the exact law follows by a dynamic
//! program over `(k, w)`.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use rayon::prelude::*;

use crate::bitkit::{BitString, Rng};
use crate::bounds::{BoundPoint, BoundReport};
use crate::error::{invalid, Result};
use crate::mc;
use crate::rational::{bernoulli, binomial_row};

/// Which stage-2 rule is used. `ZForcedZero` never fires `Z_i` and exists to
/// show that the independence check can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CouplingVariant {
    #[default]
    Faithful,
    ZForcedZero,
}

/// `Pr[Ã_{a_i} = 1]` given the remaining weight `k`, remaining length `n_rem`
/// and the bit `A_{a_i}`.
pub fn stage1_probability(k: u64, n_rem: u64, a_bit: bool) -> Ratio<u64> {
    if a_bit && 2 * k > n_rem {
        Ratio::new(2 * k - n_rem, 2 * k)
    } else if !a_bit && 2 * k < n_rem {
        // 1 - n / (2n - 2k)
        Ratio::new(n_rem - 2 * k, 2 * (n_rem - k))
    } else {
        Ratio::new(0, 1)
    }
}

/// `Pr[Z_i = 1]` given the remaining weight `k`, remaining length `n_rem`
/// and whether `A_{a_{2d+i}} = A_{b_i}`.
pub fn stage2_probability(k: u64, n_rem: u64, bits_equal: bool) -> Ratio<u64> {
    let gap = n_rem.abs_diff(2 * k);
    let q = gap * gap;
    let pairs = n_rem * (n_rem - 1);
    let mixed = 4 * k * (n_rem - k);
    if q < n_rem && !bits_equal {
        // 1 - n(n-1) / (4k(n-k))
        Ratio::new(mixed - pairs, mixed)
    } else if q > n_rem && bits_equal {
        // 1 - n(n-1) / (2n(n-1) - 4k(n-k))
        Ratio::new(pairs - mixed, 2 * pairs - mixed)
    } else {
        Ratio::new(0, 1)
    }
}

fn z_probability(variant: CouplingVariant, k: u64, n_rem: u64, bits_equal: bool) -> Ratio<u64> {
    match variant {
        CouplingVariant::Faithful => stage2_probability(k, n_rem, bits_equal),
        CouplingVariant::ZForcedZero => Ratio::new(0, 1),
    }
}

/// Coordinate layout derived from `s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingLayout {
    pub d: usize,
    /// `a_1..a_{2d}`.
    pub stage1: Vec<usize>,
    /// `(a_{2d+i}, b_i)`.
    pub pairs: Vec<(usize, usize)>,
}

impl CouplingLayout {
    pub fn new(s: &BitString) -> Result<Self> {
        let n = s.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(invalid(format!("coupling needs even n >= 2, got {n}")));
        }
        let majority = 2 * s.weight() >= n;
        let a: Vec<usize> = (0..n).filter(|&i| s.get(i) == majority).collect();
        let b: Vec<usize> = (0..n).filter(|&i| s.get(i) != majority).collect();
        let d = (a.len() - b.len()) / 2;
        let stage1 = a[..2 * d].to_vec();
        let pairs = a[2 * d..].iter().copied().zip(b).collect();
        Ok(Self { d, stage1, pairs })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingTranscript {
    pub a: BitString,
    pub s: BitString,
    pub layout: CouplingLayout,
    /// `k_0, k_1, …`: weight of the untouched part of `A` before each step.
    pub weights: Vec<usize>,
    pub z: Vec<bool>,
    pub a_tilde: BitString,
}

impl CouplingTranscript {
    pub fn d(&self) -> usize {
        self.layout.d
    }

    /// `|A ⊕ Ã ⊕ s|`.
    pub fn output_weight(&self) -> usize {
        self.a.xor_unchecked(&self.a_tilde).distance_unchecked(&self.s)
    }
}

/// Samples `Ã` given `A` and `s`; every threshold is an exact rational.
pub fn sample_a_tilde(a: &BitString, s: &BitString, rng: &mut Rng) -> Result<CouplingTranscript> {
    sample_a_tilde_with(a, s, CouplingVariant::Faithful, rng)
}

pub fn sample_a_tilde_with<R: RngCore + ?Sized>(
    a: &BitString,
    s: &BitString,
    variant: CouplingVariant,
    rng: &mut R,
) -> Result<CouplingTranscript> {
    if a.len() != s.len() {
        return Err(crate::GhrError::LengthMismatch { left: a.len(), right: s.len() });
    }
    let layout = CouplingLayout::new(s)?;
    let n = s.len();
    let mut a_tilde = BitString::zeros(n);
    let mut k = a.weight();
    let mut n_rem = n;
    let mut weights = vec![k];
    for &c in &layout.stage1 {
        let bit = a.get(c);
        if bernoulli(rng, stage1_probability(k as u64, n_rem as u64, bit)) {
            a_tilde.set(c, true);
        }
        k -= bit as usize;
        n_rem -= 1;
        weights.push(k);
    }
    let mut z = Vec::with_capacity(layout.pairs.len());
    for &(ca, cb) in &layout.pairs {
        let (xa, xb) = (a.get(ca), a.get(cb));
        let fire = bernoulli(rng, z_probability(variant, k as u64, n_rem as u64, xa == xb));
        if fire {
            let target = if rng.next_u64() & 1 == 0 { cb } else { ca };
            a_tilde.set(target, true);
        }
        z.push(fire);
        k -= xa as usize + xb as usize;
        n_rem -= 2;
        weights.push(k);
    }
    Ok(CouplingTranscript { a: a.clone(), s: s.clone(), layout, weights, z, a_tilde })
}

fn big(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn frac(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `(Ã_a, Ã_b)` options and their probabilities for one stage-2 pair.
fn stage2_options(p_fire: &BigRational) -> [((bool, bool), BigRational); 3] {
    let half = p_fire / BigInt::from(2);
    [((false, false), BigRational::one() - p_fire), ((false, true), half.clone()), ((true, false), half)]
}

/// Exact table `P[|A ⊕ Ã ⊕ s| = w | |A| = k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledDistTable {
    pub n: usize,
    pub s: BitString,
    /// `rows[k][w]`.
    pub rows: Vec<Vec<BigRational>>,
}

impl CoupledDistTable {
    /// Total-variation distance of each row from `Binomial(n, ½)`.
    pub fn tv_from_binomial(&self) -> Vec<BigRational> {
        let target = binomial_masses(self.n);
        self.rows
            .iter()
            .map(|row| {
                let sum: BigRational = row.iter().zip(&target).map(|(p, q)| (p - q).abs()).sum();
                sum / BigInt::from(2)
            })
            .collect()
    }
}

fn binomial_masses(n: usize) -> Vec<BigRational> {
    let den = BigInt::from(1) << n;
    binomial_row(n).into_iter().map(|c| BigRational::new(BigInt::from(c), den.clone())).collect()
}

/// Exact dynamic program over all `A` of each weight and all stage
/// randomness (`n ≤ 12`).
pub fn exact_coupled_distribution(s: &BitString) -> Result<CoupledDistTable> {
    exact_coupled_distribution_with(s, CouplingVariant::Faithful)
}

pub fn exact_coupled_distribution_with(s: &BitString, variant: CouplingVariant) -> Result<CoupledDistTable> {
    let n = s.len();
    if n > 12 {
        return Err(invalid(format!("exact coupling table supports n <= 12, got {n}")));
    }
    let layout = CouplingLayout::new(s)?;
    let rows = (0..=n).map(|k0| coupled_row(s, &layout, k0, variant)).collect();
    Ok(CoupledDistTable { n, s: s.clone(), rows })
}

fn coupled_row(s: &BitString, layout: &CouplingLayout, k0: usize, variant: CouplingVariant) -> Vec<BigRational> {
    let n = s.len();
    // state[k][w]: k = weight still untouched, w = output weight so far
    let mut state = vec![vec![BigRational::zero(); n + 1]; n + 1];
    state[k0][0] = BigRational::one();
    let mut n_rem = n;
    for &c in &layout.stage1 {
        let sb = s.get(c);
        let mut next = vec![vec![BigRational::zero(); n + 1]; n + 1];
        for k in 0..=n {
            for w in 0..=n {
                let p = &state[k][w];
                if p.is_zero() {
                    continue;
                }
                for bit in [false, true] {
                    let pa = if bit { frac(k, n_rem) } else { frac(n_rem - k, n_rem) };
                    if pa.is_zero() {
                        continue;
                    }
                    let pt = big(stage1_probability(k as u64, n_rem as u64, bit));
                    let k2 = k - bit as usize;
                    for (t, pt) in [(true, pt.clone()), (false, BigRational::one() - pt)] {
                        if pt.is_zero() {
                            continue;
                        }
                        let out = (bit ^ t ^ sb) as usize;
                        next[k2][w + out] += p * &pa * pt;
                    }
                }
            }
        }
        state = next;
        n_rem -= 1;
    }
    for &(ca, cb) in &layout.pairs {
        let (sa, sb) = (s.get(ca), s.get(cb));
        let denom = n_rem * (n_rem - 1);
        let mut next = vec![vec![BigRational::zero(); n + 1]; n + 1];
        for k in 0..=n {
            let zeros = n_rem.saturating_sub(k);
            let patterns = [
                ((true, true), k * k.saturating_sub(1)),
                ((false, false), zeros * zeros.saturating_sub(1)),
                ((true, false), k * zeros),
                ((false, true), k * zeros),
            ];
            for w in 0..=n {
                let p = &state[k][w];
                if p.is_zero() {
                    continue;
                }
                for ((xa, xb), count) in patterns {
                    if count == 0 {
                        continue;
                    }
                    let pa = frac(count, denom);
                    let fire = big(z_probability(variant, k as u64, n_rem as u64, xa == xb));
                    let k2 = k - xa as usize - xb as usize;
                    for ((ta, tb), pt) in stage2_options(&fire) {
                        if pt.is_zero() {
                            continue;
                        }
                        let out = (xa ^ ta ^ sa) as usize + (xb ^ tb ^ sb) as usize;
                        next[k2][w + out] += p * &pa * pt;
                    }
                }
            }
        }
        state = next;
        n_rem -= 2;
    }
    state.swap_remove(0)
}

/// Exact law of `Ã` for a fixed `A`, as `(Ã, probability)` sorted by `Ã`.
pub fn a_tilde_distribution(a: &BitString, s: &BitString) -> Result<Vec<(BitString, BigRational)>> {
    if a.len() != s.len() {
        return Err(crate::GhrError::LengthMismatch { left: a.len(), right: s.len() });
    }
    let layout = CouplingLayout::new(s)?;
    let n = s.len();
    let mut branches = vec![(BitString::zeros(n), BigRational::one())];
    let mut k = a.weight();
    let mut n_rem = n;
    for &c in &layout.stage1 {
        let p1 = big(stage1_probability(k as u64, n_rem as u64, a.get(c)));
        branches = branches
            .into_iter()
            .flat_map(|(t, p)| {
                let mut on = t.clone();
                on.set(c, true);
                [(on, &p * &p1), (t, &p * (BigRational::one() - &p1))]
            })
            .filter(|(_, p)| !p.is_zero())
            .collect();
        k -= a.get(c) as usize;
        n_rem -= 1;
    }
    for &(ca, cb) in &layout.pairs {
        let fire = big(stage2_probability(k as u64, n_rem as u64, a.get(ca) == a.get(cb)));
        let options = stage2_options(&fire);
        branches = branches
            .into_iter()
            .flat_map(|(t, p)| {
                options.clone().map(|((ta, tb), q)| {
                    let mut t2 = t.clone();
                    t2.set(ca, ta);
                    t2.set(cb, tb);
                    (t2, &p * q)
                })
            })
            .filter(|(_, p)| !p.is_zero())
            .collect();
        k -= a.get(ca) as usize + a.get(cb) as usize;
        n_rem -= 2;
    }
    let mut merged: std::collections::BTreeMap<String, (BitString, BigRational)> = Default::default();
    for (t, p) in branches {
        merged
            .entry(t.to_string())
            .and_modify(|e| e.1 += &p)
            .or_insert((t, p));
    }
    Ok(merged.into_values().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndependenceReport {
    pub max_tv: f64,
    pub pass: bool,
}

pub fn verify_independence(s: &BitString, tol: f64) -> Result<IndependenceReport> {
    verify_independence_with(s, tol, CouplingVariant::Faithful)
}

pub fn verify_independence_with(s: &BitString, tol: f64, variant: CouplingVariant) -> Result<IndependenceReport> {
    let table = exact_coupled_distribution_with(s, variant)?;
    let max_tv = table.tv_from_binomial().into_iter().max().unwrap_or_else(BigRational::zero);
    let max_tv = max_tv.to_f64().unwrap_or(f64::NAN);
    Ok(IndependenceReport { max_tv, pass: max_tv <= tol })
}

/// Runs [`verify_independence`] on every `s ∈ {0,1}ⁿ`, in index order.
pub fn verify_all(n: usize, tol: f64) -> Result<Vec<(BitString, IndependenceReport)>> {
    if n > 12 {
        return Err(invalid(format!("exhaustive coupling check supports n <= 12, got {n}")));
    }
    (0..1u64 << n)
        .into_par_iter()
        .map(|v| {
            let s = BitString::from_index_msb(v as usize, n);
            verify_independence(&s, tol).map(|r| (s, r))
        })
        .collect()
}

/// The weight-tail bound `4 e^{ln n - t/(4 ln n)} + 2 e^{-t²n / (224 t n ln n + 2048 d² ln n)}`.
pub fn weight_tail_bound(n: usize, d: usize, t: f64) -> f64 {
    let nf = n as f64;
    let ln = nf.ln();
    let df = d as f64;
    let first = 4.0 * (ln - t / (4.0 * ln)).exp();
    let denom = 224.0 * t * nf * ln + 2048.0 * df * df * ln;
    let second = if denom == 0.0 { 2.0 } else { 2.0 * (-t * t * nf / denom).exp() };
    first + second
}

/// Empirical `Pr[|Ã| ≥ 16d²/n + t]` over uniform `A` against
/// [`weight_tail_bound`].
pub fn weight_tail_check(s: &BitString, t_values: &[f64], trials: u64, rng: &Rng) -> Result<BoundReport> {
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let layout = CouplingLayout::new(s)?;
    let n = s.len();
    let d = layout.d;
    let weights = mc::map_trials(rng, trials, |r| {
        let a = BitString::random(n, r);
        sample_a_tilde(&a, s, r).expect("layout validated").a_tilde.weight()
    });
    let shift = 16.0 * (d * d) as f64 / n as f64;
    let points = t_values
        .iter()
        .map(|&t| {
            let hits = weights.iter().filter(|&&w| w as f64 >= shift + t).count();
            let freq = hits as f64 / trials as f64;
            let bound = weight_tail_bound(n, d, t);
            BoundPoint {
                label: format!("d={d};t={t}"),
                bound,
                observed: freq,
                stderr: (freq * (1.0 - freq) / trials as f64).sqrt(),
                satisfied: freq <= bound,
            }
        })
        .collect();
    Ok(BoundReport::new(format!("coupling weight tail, n = {n}, {trials} trials"), points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{chi_square_critical_001, chi_square_statistic};
    use crate::rational::big_ratio;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn stage_probabilities_balance() {
        // each stage-1 rule makes A ⊕ Ã a fair coin
        for n_rem in 1u64..20 {
            for k in 0..=n_rem {
                let p1 = Ratio::new(k, n_rem);
                let flip1 = Ratio::new(1, 1) - stage1_probability(k, n_rem, true);
                let flip0 = stage1_probability(k, n_rem, false);
                assert_eq!(p1 * flip1 + (Ratio::new(1, 1) - p1) * flip0, Ratio::new(1, 2), "k={k} n={n_rem}");
            }
        }
        // each stage-2 rule makes A_a ⊕ A_b ⊕ Z a fair coin
        for n_rem in 2u64..20 {
            for k in 0..=n_rem {
                let unequal = Ratio::new(2 * k * (n_rem - k), n_rem * (n_rem - 1));
                let p = unequal * (Ratio::new(1, 1) - stage2_probability(k, n_rem, false))
                    + (Ratio::new(1, 1) - unequal) * stage2_probability(k, n_rem, true);
                assert_eq!(p, Ratio::new(1, 2), "k={k} n={n_rem}");
            }
        }
    }

    #[test]
    fn layout_examples() {
        let l = CouplingLayout::new(&bs("110100")).unwrap();
        assert_eq!(l.d, 0);
        assert!(l.stage1.is_empty());
        assert_eq!(l.pairs, vec![(0, 2), (1, 4), (3, 5)]);
        let l = CouplingLayout::new(&bs("111010")).unwrap();
        assert_eq!((l.d, l.stage1.clone()), (1, vec![0, 1]));
        assert_eq!(l.pairs, vec![(2, 3), (4, 5)]);
        // minority ones: the zero coordinates play the a role
        let l = CouplingLayout::new(&bs("0001")).unwrap();
        assert_eq!((l.d, l.stage1.clone(), l.pairs.clone()), (1, vec![0, 1], vec![(2, 3)]));
        assert!(CouplingLayout::new(&bs("101")).is_err());
    }

    #[test]
    fn hand_example_equal_weight() {
        let dist = a_tilde_distribution(&bs("10"), &bs("10")).unwrap();
        let got: Vec<_> = dist.iter().map(|(t, p)| (t.to_string(), p.clone())).collect();
        assert_eq!(
            got,
            vec![("00".into(), big_ratio(1, 2)), ("01".into(), big_ratio(1, 4)), ("10".into(), big_ratio(1, 4))]
        );
        let mut fired = 0;
        let mut rng = Rng::new(3);
        for _ in 0..4000 {
            let t = sample_a_tilde(&bs("10"), &bs("10"), &mut rng).unwrap();
            assert_eq!(t.d(), 0);
            fired += t.z[0] as usize;
        }
        assert!((fired as f64 / 4000.0 - 0.5).abs() < 0.04);
    }

    #[test]
    fn hand_example_equal_bits() {
        let s = bs("10");
        let a = bs("00");
        let mut law = vec![big_ratio(0, 1); 3];
        for (t, p) in a_tilde_distribution(&a, &s).unwrap() {
            law[a.xor(&t).unwrap().distance(&s).unwrap()] += p;
        }
        assert_eq!(law, vec![big_ratio(1, 4), big_ratio(1, 2), big_ratio(1, 4)]);
    }

    #[test]
    fn two_bit_table() {
        let table = exact_coupled_distribution(&bs("10")).unwrap();
        for row in &table.rows {
            assert_eq!(row, &vec![big_ratio(1, 4), big_ratio(1, 2), big_ratio(1, 4)]);
        }
        let r = verify_independence(&bs("10"), 1e-9).unwrap();
        assert_eq!(r.max_tv, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn zero_d_touches_only_pairs() {
        let s = bs("1100");
        let mut rng = Rng::new(9);
        for _ in 0..100 {
            let a = BitString::random(4, &mut rng);
            let t = sample_a_tilde(&a, &s, &mut rng).unwrap();
            assert!(t.layout.stage1.is_empty());
            assert_eq!(t.z.len(), 2);
            assert_eq!(t.weights.len(), 3);
            for (i, &(ca, cb)) in t.layout.pairs.iter().enumerate() {
                let touched = t.a_tilde.get(ca) as usize + t.a_tilde.get(cb) as usize;
                assert_eq!(touched, t.z[i] as usize);
            }
        }
    }

    #[test]
    fn independence_for_every_s_small_n() {
        for n in [2usize, 4, 6, 8] {
            for (s, r) in verify_all(n, 1e-9).unwrap() {
                assert!(r.pass && r.max_tv == 0.0, "s = {s}");
            }
        }
        let table = exact_coupled_distribution(&BitString::zeros(8)).unwrap();
        let target = binomial_masses(8);
        for row in &table.rows {
            assert_eq!(row, &target);
            assert_eq!(row.iter().sum::<BigRational>(), big_ratio(1, 1));
        }
    }

    #[test]
    fn forcing_z_to_zero_breaks_independence() {
        let mut broken = 0;
        for v in 0..64usize {
            let s = BitString::from_index_msb(v, 6);
            let r = verify_independence_with(&s, 1e-9, CouplingVariant::ZForcedZero).unwrap();
            if !r.pass && 2 * s.weight() != 6 {
                broken += 1;
            }
        }
        assert!(broken > 0);
    }

    #[test]
    fn sampler_matches_exact_table() {
        let mut rng = Rng::new(44);
        let s = BitString::random(6, &mut rng);
        let table = exact_coupled_distribution(&s).unwrap();
        let weights = binomial_masses(6);
        let mut probs = Vec::new();
        for k in 0..=6 {
            for w in 0..=6 {
                probs.push((&weights[k] * &table.rows[k][w]).to_f64().unwrap());
            }
        }
        let root = Rng::new(45);
        let outcomes = mc::map_trials(&root, 100_000, |r| {
            let a = BitString::random(6, r);
            let t = sample_a_tilde(&a, &s, r).unwrap();
            a.weight() * 7 + t.output_weight()
        });
        let mut counts = vec![0u64; 49];
        outcomes.into_iter().for_each(|c| counts[c] += 1);
        let support = probs.iter().filter(|&&p| p > 0.0).count();
        let chi = chi_square_statistic(&counts, &probs);
        assert!(chi < chi_square_critical_001(support - 1), "chi2 = {chi}");
    }

    #[test]
    fn weight_tail_never_exceeds_bound() {
        let rng = Rng::new(6);
        for s in ["11111100", "1111111111110000", "10101010"] {
            let r = weight_tail_check(&bs(s), &[0.0, 1.0, 2.0, 4.0, 8.0], 2000, &rng).unwrap();
            assert!(r.pass);
        }
        assert!(weight_tail_bound(1024, 4, 5000.0) < 1.0);
    }
}
