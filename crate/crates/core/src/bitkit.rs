//! Bit-string algebra: weights, XOR, cyclic shifts, Fourier patterns and
//! seeded sampling.
//!
//! Positions are 0-based in the API. The text form writes position 0 first,
//! so the character at offset `i` of `"0110"` is bit `i` (the 1-based
//! position `i + 1` used in the mathematical notation).

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{GhrError, Result};

const WORD_BITS: usize = 64;

/// A fixed-length packed bit vector.
///
/// Bit `i` lives in word `i / 64` at bit offset `i % 64`; bits past `len`
/// are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

fn word_count(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; word_count(len)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut out = Self { words: vec![!0; word_count(len)], len };
        out.clear_tail();
        out
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % WORD_BITS == 0 {
                words.push(0);
            }
            if b {
                words[len / WORD_BITS] |= 1 << (len % WORD_BITS);
            }
            len += 1;
        }
        Self { words, len }
    }

    /// Builds a string from the low `len` bits of `value`, bit `i` of the
    /// integer becoming position `i`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD_BITS, "from_u64 supports at most 64 bits");
        let mut out = Self::zeros(len);
        if len > 0 {
            out.words[0] = value;
            out.clear_tail();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Hamming weight `|x|`.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        self.check_len(other)?;
        Ok(self.xor_unchecked(other))
    }

    pub(crate) fn xor_unchecked(&self, other: &BitString) -> BitString {
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect();
        BitString { words, len: self.len }
    }

    /// `|self ⊕ other|` without materialising the XOR.
    pub fn distance(&self, other: &BitString) -> Result<usize> {
        self.check_len(other)?;
        Ok(self.distance_unchecked(other))
    }

    pub(crate) fn distance_unchecked(&self, other: &BitString) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// The cyclic shift `σ_j`: 1-based position `i` moves to `i + j`, wrapping
    /// past `n`. `j` ranges over `1..=n`; `j = n` is the identity.
    pub fn cyclic_shift(&self, j: usize) -> Result<BitString> {
        if j == 0 || j > self.len {
            return Err(GhrError::ShiftOutOfRange { j, n: self.len });
        }
        Ok(self.rotate(j % self.len))
    }

    /// Moves bit `i` to `(i + r) mod n` for any `r`.
    pub(crate) fn rotate(&self, r: usize) -> BitString {
        let n = self.len;
        if n == 0 {
            return self.clone();
        }
        let r = r % n;
        if r == 0 {
            return self.clone();
        }
        // out = (x << r) | (x >> (n - r)) on an n-bit register
        let mut out = self.shl(r);
        let hi = self.shr(n - r);
        for (o, h) in out.words.iter_mut().zip(&hi.words) {
            *o |= h;
        }
        out
    }

    fn shl(&self, r: usize) -> BitString {
        let mut out = BitString::zeros(self.len);
        let (ws, bs) = (r / WORD_BITS, r % WORD_BITS);
        let nw = self.words.len();
        for k in (ws..nw).rev() {
            let src = k - ws;
            let mut v = self.words[src] << bs;
            if bs != 0 && src > 0 {
                v |= self.words[src - 1] >> (WORD_BITS - bs);
            }
            out.words[k] = v;
        }
        out.clear_tail();
        out
    }

    fn shr(&self, r: usize) -> BitString {
        let mut out = BitString::zeros(self.len);
        let (ws, bs) = (r / WORD_BITS, r % WORD_BITS);
        let nw = self.words.len();
        for k in 0..nw.saturating_sub(ws) {
            let src = k + ws;
            let mut v = self.words[src] >> bs;
            if bs != 0 && src + 1 < nw {
                v |= self.words[src + 1] << (WORD_BITS - bs);
            }
            out.words[k] = v;
        }
        out
    }

    /// Uniform random string; every bit is an independent fair coin.
    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> BitString {
        let mut out = BitString::zeros(len);
        for w in out.words.iter_mut() {
            *w = rng.next_u64();
        }
        out.clear_tail();
        out
    }

    /// Interprets the string as a binary number written most significant bit
    /// first (`"10"` is 2).
    pub fn to_index_msb(&self) -> usize {
        assert!(self.len < usize::BITS as usize, "too long for an index");
        self.iter().fold(0usize, |acc, b| (acc << 1) | b as usize)
    }

    /// Inverse of [`BitString::to_index_msb`].
    pub fn from_index_msb(value: usize, len: usize) -> BitString {
        BitString::from_bits((0..len).rev().map(|k| (value >> k) & 1 == 1))
    }

    fn check_len(&self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(GhrError::LengthMismatch { left: self.len, right: other.len });
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = GhrError;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GhrError::Parse(format!("unexpected character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::from_bits)
    }
}

/// `⟨s, v⟩`: parity of the bitwise AND.
pub fn inner_mod2(s: u64, v: u64) -> u8 {
    ((s & v).count_ones() & 1) as u8
}

/// Base-2 logarithm of a power of two.
pub fn log2_exact(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(GhrError::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros())
}

/// The Fourier pattern `τ_s` of length `n` for a frequency given as an index
/// in `0..n`. Position `i` (0-based) carries `⟨s, i⟩`, i.e. the 1-based
/// position `i + 1` is embedded as `i`.
pub fn fourier_pattern_index(s: usize, n: usize) -> Result<BitString> {
    log2_exact(n)?;
    if s >= n {
        return Err(GhrError::InvalidParameter(format!("frequency {s} out of range for n = {n}")));
    }
    Ok(BitString::from_bits((0..n).map(|i| inner_mod2(s as u64, i as u64) == 1)))
}

/// `τ_s` for a frequency written as a `log n`-bit string (most significant
/// bit first).
pub fn fourier_pattern(s: &BitString, n: usize) -> Result<BitString> {
    let log_n = log2_exact(n)? as usize;
    if s.len() != log_n {
        return Err(GhrError::LengthMismatch { left: s.len(), right: log_n });
    }
    fourier_pattern_index(s.to_index_msb(), n)
}

/// Identifier of the generator family written into experiment metadata.
pub const RNG_ALGORITHM: &str = "chacha20/stream-split";

/// Replayable random stream.
///
/// Backed by ChaCha20. Child streams are keyed from the first 32 bytes of the
/// parent key's keystream on stream `index + 1`; the parent itself draws from
/// stream 0, so parent and children never share keystream.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    key: [u8; 32],
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let key = ChaCha20Rng::seed_from_u64(seed).get_seed();
        Self::from_key(seed, key)
    }

    fn from_key(seed: u64, key: [u8; 32]) -> Self {
        Self { seed, key, inner: ChaCha20Rng::from_seed(key) }
    }

    /// Root seed this stream descends from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Child stream `index`. Depends only on the parent key, not on how much
    /// of the parent stream has been consumed.
    pub fn child(&self, index: u64) -> Rng {
        let mut kdf = ChaCha20Rng::from_seed(self.key);
        kdf.set_stream(index.wrapping_add(1));
        let mut key = [0u8; 32];
        kdf.fill_bytes(&mut key);
        Rng::from_key(self.seed, key)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn naive_shift(x: &BitString, j: usize) -> BitString {
        let n = x.len();
        let mut out = BitString::zeros(n);
        for i in 1..=n {
            let target = if i + j <= n { i + j } else { i + j - n };
            out.set(target - 1, x.get(i - 1));
        }
        out
    }

    #[test]
    fn weight_examples() {
        assert_eq!(bs("0000").weight(), 0);
        assert_eq!(bs("1111").weight(), 4);
        assert_eq!(bs("1010").weight(), 2);
    }

    #[test]
    fn xor_examples() {
        assert_eq!(bs("1010").xor(&bs("0000")).unwrap(), bs("1010"));
        assert_eq!(bs("1010").xor(&bs("1010")).unwrap(), bs("0000"));
        assert_eq!(bs("1100").xor(&bs("0101")).unwrap(), bs("1001"));
        assert_eq!(
            bs("10").xor(&bs("101")),
            Err(GhrError::LengthMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn shift_examples() {
        assert_eq!(bs("1000").cyclic_shift(4).unwrap(), bs("1000"));
        assert_eq!(bs("1000").cyclic_shift(1).unwrap(), bs("0100"));
        assert_eq!(bs("0110").cyclic_shift(2).unwrap(), bs("1001"));
        assert_eq!(naive_shift(&bs("0110"), 2), bs("1001"));
        assert!(matches!(bs("0110").cyclic_shift(0), Err(GhrError::ShiftOutOfRange { .. })));
        assert!(matches!(bs("0110").cyclic_shift(5), Err(GhrError::ShiftOutOfRange { .. })));
    }

    #[test]
    fn inner_mod2_examples() {
        assert_eq!(inner_mod2(0b00, 0b11), 0);
        assert_eq!(inner_mod2(0b11, 0b11), 0);
        assert_eq!(inner_mod2(0b01, 0b11), 1);
    }

    #[test]
    fn fourier_pattern_examples() {
        assert_eq!(fourier_pattern(&bs("00"), 4).unwrap(), bs("0000"));
        assert_eq!(fourier_pattern(&bs("01"), 4).unwrap(), bs("0101"));
        assert_eq!(fourier_pattern(&bs("11"), 4).unwrap(), bs("0110"));
        assert_eq!(fourier_pattern(&bs("10"), 4).unwrap(), bs("0011"));
        assert_eq!(fourier_pattern(&bs("00"), 6), Err(GhrError::NotPowerOfTwo(6)));
    }

    #[test]
    fn fourier_patterns_pairwise_half_distance() {
        for n in [2usize, 4, 8, 16, 64, 256] {
            let pats: Vec<_> = (0..n).map(|s| fourier_pattern_index(s, n).unwrap()).collect();
            for a in 0..n {
                for b in (a + 1)..n {
                    assert_eq!(pats[a].distance(&pats[b]).unwrap(), n / 2, "n={n} s={a},{b}");
                }
            }
        }
    }

    #[test]
    fn packed_ops_match_naive_reference() {
        let mut rng = Rng::new(99);
        for n in [4usize, 16, 64, 256, 100, 65, 1] {
            for _ in 0..1000 {
                let x = BitString::random(n, &mut rng);
                let y = BitString::random(n, &mut rng);
                let naive_w = x.iter().filter(|&b| b).count();
                assert_eq!(x.weight(), naive_w);
                let z = x.xor(&y).unwrap();
                for i in 0..n {
                    assert_eq!(z.get(i), x.get(i) ^ y.get(i));
                }
                let j = 1 + (rng.next_u64() as usize) % n;
                assert_eq!(x.cyclic_shift(j).unwrap(), naive_shift(&x, j));
            }
        }
    }

    #[test]
    fn text_round_trip_and_msb_index() {
        let x = bs("0110100111");
        assert_eq!(x.to_string(), "0110100111");
        assert_eq!(bs("10").to_index_msb(), 2);
        assert_eq!(BitString::from_index_msb(1, 2), bs("01"));
        assert!("01x".parse::<BitString>().is_err());
    }

    #[test]
    fn rng_determinism_and_children() {
        let a = BitString::random(4, &mut Rng::new(7));
        let b = BitString::random(4, &mut Rng::new(7));
        assert_eq!(a, b);

        let mut parent = Rng::new(11);
        let c0 = parent.child(3).next_u64();
        parent.next_u64();
        assert_eq!(parent.child(3).next_u64(), c0);
        assert_ne!(parent.child(4).next_u64(), c0);
        assert_ne!(Rng::new(11).next_u64(), c0);
    }

    #[test]
    fn random_weight_concentrates() {
        let mut rng = Rng::new(5);
        let x = BitString::random(10_000, &mut rng);
        assert!((4000..=6000).contains(&x.weight()));

        let ones = (0..10_000u64)
            .filter(|&seed| BitString::random(1, &mut Rng::new(seed)).get(0))
            .count();
        let frac = ones as f64 / 10_000.0;
        assert!((0.45..=0.55).contains(&frac), "fraction of ones {frac}");
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_bits(max: usize) -> impl Strategy<Value = BitString> {
        proptest::collection::vec(any::<bool>(), 1..max).prop_map(BitString::from_bits)
    }

    proptest! {
        #[test]
        fn shift_composition(x in arb_bits(200), j1 in 1usize..1000, j2 in 1usize..1000) {
            let n = x.len();
            let (j1, j2) = (1 + (j1 - 1) % n, 1 + (j2 - 1) % n);
            let lhs = x.cyclic_shift(j1).unwrap().cyclic_shift(j2).unwrap();
            let rhs = x.cyclic_shift((j1 + j2 - 1) % n + 1).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn xor_weight_parity((x, y) in (1usize..200).prop_flat_map(|n| (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
        ))) {
            let (x, y) = (BitString::from_bits(x), BitString::from_bits(y));
            let xy = x.xor(&y).unwrap().weight();
            prop_assert_eq!(xy, y.xor(&x).unwrap().weight());
            prop_assert_eq!((x.weight() + y.weight()) % 2, xy % 2);
        }

        #[test]
        fn ops_preserve_length(x in arb_bits(300), j in 1usize..1000) {
            let n = x.len();
            prop_assert_eq!(x.cyclic_shift(1 + (j - 1) % n).unwrap().len(), n);
            prop_assert_eq!(x.xor(&x).unwrap().len(), n);
        }
    }
}
