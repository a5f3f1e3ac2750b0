//! Exact-arithmetic helpers shared by the oracles: binomial rows, exact
//! binomial tails, rational-threshold coin flips.

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

/// `C(m, 0), …, C(m, m)`.
pub fn binomial_row(m: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(m + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for k in 0..m {
        c = c * BigUint::from(m - k) / BigUint::from(k + 1);
        row.push(c.clone());
    }
    row
}

/// `C(m, k)` as an exact integer.
pub fn binomial(m: usize, k: usize) -> BigUint {
    if k > m {
        return BigUint::zero();
    }
    let k = k.min(m - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(m - i) / BigUint::from(i + 1))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn big_ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// `P[Bin(trials, p) > threshold]` for `p = num / den`, exactly.
pub fn binomial_upper_tail_exact(trials: usize, threshold: usize, num: u64, den: u64) -> BigRational {
    assert!(den > 0 && num <= den);
    let p = BigUint::from(num);
    let q = BigUint::from(den - num);
    let row = binomial_row(trials);
    let mut acc = BigUint::zero();
    for (k, c) in row.iter().enumerate().skip(threshold + 1) {
        acc += c * p.pow(k as u32) * q.pow((trials - k) as u32);
    }
    BigRational::new(acc.into(), BigUint::from(den).pow(trials as u32).into())
}

/// Flips a coin that lands heads with probability exactly `p`, by comparing a
/// 64-bit uniform draw against `p · 2⁶⁴`.
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: Ratio<u64>) -> bool {
    let (num, den) = (*p.numer() as u128, *p.denom() as u128);
    if num == 0 {
        return false;
    }
    if num >= den {
        return true;
    }
    let u = rng.next_u64() as u128;
    u * den < num << 64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitkit::Rng;

    #[test]
    fn binomial_rows() {
        let row: Vec<u64> = binomial_row(4).iter().map(|c| c.to_u64().unwrap()).collect();
        assert_eq!(row, vec![1, 4, 6, 4, 1]);
        assert_eq!(binomial(10, 3), BigUint::from(120u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
        let total: BigUint = binomial_row(60).iter().sum();
        assert_eq!(total, BigUint::one() << 60);
    }

    #[test]
    fn upper_tail_small_cases() {
        // P[Bin(2, 1/2) > 1] = 1/4
        assert_eq!(binomial_upper_tail_exact(2, 1, 1, 2), big_ratio(1, 4));
        assert_eq!(binomial_upper_tail_exact(5, 5, 1, 3), big_ratio(0, 1));
        assert_eq!(binomial_upper_tail_exact(3, 0, 0, 7), big_ratio(0, 1));
    }

    #[test]
    fn bernoulli_edge_cases_and_frequency() {
        let mut rng = Rng::new(1);
        assert!(!bernoulli(&mut rng, Ratio::new_raw(0, 3)));
        assert!(bernoulli(&mut rng, Ratio::new_raw(3, 3)));
        let hits = (0..40_000).filter(|_| bernoulli(&mut rng, Ratio::new(1, 4))).count();
        let f = hits as f64 / 40_000.0;
        assert!((f - 0.25).abs() < 0.01, "{f}");
    }
}
