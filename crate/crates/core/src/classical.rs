//! Classical side: the shared-randomness tGHR baseline, relative weights of
//! distance sets under rectangles, and the randomized reduction `Ξ` from small
//! set-disjointness instances to rectangle membership.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;

use crate::bitkit::{BitString, Rng};
use crate::error::{invalid, GhrError, Result};
use crate::ghr::{tghr_distance_ok, McEstimate};
use crate::mc;
use crate::rational::{binomial_row, to_f64};

// ---------------------------------------------------------------------------
// tGHR baseline

/// Result of one run of the shared-randomness baseline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselineOutcome {
    pub tau: BitString,
    /// 0-based index of the chosen shared sample.
    pub index: usize,
    pub valid: bool,
}

/// Both parties read `Z_1..Z_t` from the shared stream. Alice announces the
/// index of the sample closest to `x` (lowest index on ties) and Bob outputs
/// `Z_{i₀} ⊕ y`.
pub fn tghr_baseline(x: &BitString, y: &BitString, t: usize, shared: &mut Rng) -> Result<BaselineOutcome> {
    if t == 0 {
        return Err(invalid("baseline needs at least one shared sample"));
    }
    if x.len() != y.len() {
        return Err(GhrError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    let mut best: Option<(usize, usize, BitString)> = None;
    for i in 0..t {
        let z = BitString::random(n, shared);
        let d = z.distance_unchecked(x);
        if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
            best = Some((d, i, z));
        }
    }
    let (_, index, z) = best.expect("t >= 1");
    let tau = z.xor_unchecked(y);
    let valid = tghr_distance_ok(tau.distance_unchecked(&x.xor_unchecked(y)), n);
    Ok(BaselineOutcome { tau, index, valid })
}

/// Success rate of the baseline over fresh uniform inputs.
pub fn estimate_baseline_success(n: usize, t: usize, trials: u64, rng: &Rng) -> Result<McEstimate> {
    if n == 0 || t == 0 || trials == 0 {
        return Err(invalid("baseline estimate needs n, t and trials positive"));
    }
    let hits = mc::count_successes(rng, trials, |r| {
        let x = BitString::random(n, r);
        let y = BitString::random(n, r);
        tghr_baseline(&x, &y, t, r).expect("validated").valid
    });
    Ok(McEstimate::from_count(hits, trials, rng.seed()))
}

// ---------------------------------------------------------------------------
// Rectangles

type Predicate = Arc<dyn Fn(&BitString) -> bool + Send + Sync>;

/// How membership in `A` and `B` is decided.
#[derive(Clone)]
pub enum RectFamily {
    /// `A = B = {0,1}ⁿ`.
    Full,
    /// `A = B` = even-weight strings.
    ParityEven,
    /// `A = B` = strings whose first `m` positions are zero.
    PrefixZeros(usize),
    /// Explicit sets, as membership tables indexed by `Σ z_i 2^i`.
    Explicit { a: Vec<bool>, b: Vec<bool> },
    /// Arbitrary predicates.
    Predicates { a: Predicate, b: Predicate },
}

impl fmt::Debug for RectFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RectFamily::Full => f.write_str("Full"),
            RectFamily::ParityEven => f.write_str("ParityEven"),
            RectFamily::PrefixZeros(m) => write!(f, "PrefixZeros({m})"),
            RectFamily::Explicit { a, b } => write!(
                f,
                "Explicit(|A|={}, |B|={})",
                a.iter().filter(|&&v| v).count(),
                b.iter().filter(|&&v| v).count()
            ),
            RectFamily::Predicates { .. } => f.write_str("Predicates"),
        }
    }
}

/// A combinatorial rectangle `A × B ⊆ {0,1}ⁿ × {0,1}ⁿ` together with its
/// uniform density.
#[derive(Clone, Debug)]
pub struct RectangleSpec {
    n: usize,
    family: RectFamily,
    density: f64,
}

/// Largest `n` for which explicit membership tables are built.
pub const MAX_EXPLICIT_N: usize = 20;

fn index_of(z: &BitString) -> usize {
    z.words().first().copied().unwrap_or(0) as usize
}

impl RectangleSpec {
    pub fn full(n: usize) -> Self {
        Self { n, family: RectFamily::Full, density: 1.0 }
    }

    pub fn parity_even(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("parity rectangle needs n >= 1"));
        }
        Ok(Self { n, family: RectFamily::ParityEven, density: 0.25 })
    }

    pub fn prefix_zeros(n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(invalid(format!("prefix length {m} exceeds n = {n}")));
        }
        let density = 0.25f64.powi(m as i32);
        Ok(Self { n, family: RectFamily::PrefixZeros(m), density })
    }

    /// Builds a rectangle from explicit member lists.
    pub fn from_sets(n: usize, a: &[BitString], b: &[BitString]) -> Result<Self> {
        if n > MAX_EXPLICIT_N {
            return Err(invalid(format!("explicit sets need n <= {MAX_EXPLICIT_N}")));
        }
        let table = |set: &[BitString]| -> Result<Vec<bool>> {
            let mut t = vec![false; 1 << n];
            for z in set {
                if z.len() != n {
                    return Err(GhrError::LengthMismatch { left: z.len(), right: n });
                }
                t[index_of(z)] = true;
            }
            Ok(t)
        };
        Self::from_tables(n, table(a)?, table(b)?)
    }

    fn from_tables(n: usize, a: Vec<bool>, b: Vec<bool>) -> Result<Self> {
        let ca = a.iter().filter(|&&v| v).count();
        let cb = b.iter().filter(|&&v| v).count();
        if ca == 0 || cb == 0 {
            return Err(GhrError::EmptyRectangle);
        }
        let density = (ca as f64 / (1u64 << n) as f64) * (cb as f64 / (1u64 << n) as f64);
        Ok(Self { n, family: RectFamily::Explicit { a, b }, density })
    }

    /// Builds a rectangle from predicates, measuring its density by
    /// enumeration (`n ≤ MAX_EXPLICIT_N`).
    pub fn from_predicates(
        n: usize,
        a: impl Fn(&BitString) -> bool + Send + Sync + 'static,
        b: impl Fn(&BitString) -> bool + Send + Sync + 'static,
    ) -> Result<Self> {
        if n > MAX_EXPLICIT_N {
            return Err(invalid(format!(
                "density of a predicate rectangle needs n <= {MAX_EXPLICIT_N}; use from_predicates_with_density"
            )));
        }
        let count = |p: &dyn Fn(&BitString) -> bool| (0..1u64 << n).filter(|&v| p(&BitString::from_u64(v, n))).count();
        let (ca, cb) = (count(&a), count(&b));
        if ca == 0 || cb == 0 {
            return Err(GhrError::EmptyRectangle);
        }
        let density = (ca as f64 / (1u64 << n) as f64) * (cb as f64 / (1u64 << n) as f64);
        Ok(Self { n, family: RectFamily::Predicates { a: Arc::new(a), b: Arc::new(b) }, density })
    }

    /// Predicate rectangle with a caller-supplied density.
    pub fn from_predicates_with_density(
        n: usize,
        a: impl Fn(&BitString) -> bool + Send + Sync + 'static,
        b: impl Fn(&BitString) -> bool + Send + Sync + 'static,
        density: f64,
    ) -> Result<Self> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(invalid(format!("density {density} outside (0, 1]")));
        }
        Ok(Self { n, family: RectFamily::Predicates { a: Arc::new(a), b: Arc::new(b) }, density })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &RectFamily {
        &self.family
    }

    /// `U[{0,1}^{2n}](A × B)`.
    pub fn density(&self) -> f64 {
        self.density
    }

    /// `μ_{A×B} = log₂(n / density)`.
    pub fn mu(&self) -> f64 {
        (self.n as f64 / self.density).log2()
    }

    pub fn contains_a(&self, z: &BitString) -> bool {
        match &self.family {
            RectFamily::Full => true,
            RectFamily::ParityEven => z.weight().is_multiple_of(2),
            RectFamily::PrefixZeros(m) => (0..*m).all(|i| !z.get(i)),
            RectFamily::Explicit { a, .. } => a[index_of(z)],
            RectFamily::Predicates { a, .. } => a(z),
        }
    }

    pub fn contains_b(&self, z: &BitString) -> bool {
        match &self.family {
            RectFamily::Explicit { b, .. } => b[index_of(z)],
            RectFamily::Predicates { b, .. } => b(z),
            _ => self.contains_a(z),
        }
    }

    pub fn contains(&self, x: &BitString, y: &BitString) -> bool {
        self.contains_a(x) && self.contains_b(y)
    }

    /// Membership tables of `A` and `B` (`n ≤ MAX_EXPLICIT_N`).
    pub fn tables(&self) -> Result<(Vec<bool>, Vec<bool>)> {
        if let RectFamily::Explicit { a, b } = &self.family {
            return Ok((a.clone(), b.clone()));
        }
        if self.n > MAX_EXPLICIT_N {
            return Err(invalid(format!("exact mode needs n <= {MAX_EXPLICIT_N}, got {}", self.n)));
        }
        let strings: Vec<BitString> = (0..1u64 << self.n).map(|v| BitString::from_u64(v, self.n)).collect();
        let a = strings.iter().map(|z| self.contains_a(z)).collect();
        let b = strings.iter().map(|z| self.contains_b(z)).collect();
        Ok((a, b))
    }

    fn sample_side(&self, side_a: bool, rng: &mut Rng) -> Result<BitString> {
        let n = self.n;
        let mut z = BitString::random(n, rng);
        match &self.family {
            RectFamily::Full => {}
            RectFamily::ParityEven => {
                if z.weight() % 2 == 1 {
                    z.flip(n - 1);
                }
            }
            RectFamily::PrefixZeros(m) => (0..*m).for_each(|i| z.set(i, false)),
            _ => {
                const MAX_ATTEMPTS: usize = 1 << 20;
                let member = |z: &BitString| if side_a { self.contains_a(z) } else { self.contains_b(z) };
                let mut attempts = 1;
                while !member(&z) {
                    if attempts == MAX_ATTEMPTS {
                        return Err(invalid("rejection sampling found no member of the rectangle"));
                    }
                    z = BitString::random(n, rng);
                    attempts += 1;
                }
            }
        }
        Ok(z)
    }

    /// Draws `(X, Y)` uniformly from `A × B`.
    pub fn sample(&self, rng: &mut Rng) -> Result<(BitString, BitString)> {
        Ok((self.sample_side(true, rng)?, self.sample_side(false, rng)?))
    }
}

/// How relative weights are evaluated.
#[derive(Clone, Copy, Debug)]
pub enum WeightMode<'a> {
    Exact,
    MonteCarlo { trials: u64, rng: &'a Rng },
}

fn fwht_i64(data: &mut [i64]) {
    let mut h = 1;
    while h < data.len() {
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

/// `#{(a, b) ∈ A × B : |a ⊕ b| = k}` for `k = 0..=n`, via an XOR
/// convolution of the membership tables.
pub fn distance_counts(rect: &RectangleSpec) -> Result<Vec<u64>> {
    let n = rect.n();
    if n > 16 {
        return Err(invalid(format!("exact distance counts need n <= 16, got {n}")));
    }
    let (a, b) = rect.tables()?;
    let mut fa: Vec<i64> = a.iter().map(|&v| v as i64).collect();
    let mut fb: Vec<i64> = b.iter().map(|&v| v as i64).collect();
    fwht_i64(&mut fa);
    fwht_i64(&mut fb);
    let mut conv: Vec<i64> = fa.iter().zip(&fb).map(|(p, q)| p * q).collect();
    fwht_i64(&mut conv);
    let size = 1i64 << n;
    let mut counts = vec![0u64; n + 1];
    for (z, c) in conv.into_iter().enumerate() {
        counts[z.count_ones() as usize] += (c / size) as u64;
    }
    Ok(counts)
}

fn normalize_set(set: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.iter().any(|&k| k > n) {
        return Err(invalid(format!("distance set {set:?} has values above n = {n}")));
    }
    if s.is_empty() {
        return Err(GhrError::ZeroUniformMass);
    }
    Ok(s)
}

/// `Pr_uniform[|X ⊕ Y| ∈ set] = Σ C(n, k) / 2ⁿ`, exactly.
pub fn uniform_mass(n: usize, set: &[usize]) -> Result<BigRational> {
    let set = normalize_set(set, n)?;
    let row = binomial_row(n);
    let num: BigInt = set.iter().map(|&k| BigInt::from(row[k].clone())).sum();
    Ok(BigRational::new(num, BigInt::from(1) << n))
}

/// Exact relative weight `Pr_{A×B}[|X⊕Y| ∈ set] / Pr_uniform[|X⊕Y| ∈ set]`.
pub fn relative_weight_exact(rect: &RectangleSpec, set: &[usize]) -> Result<BigRational> {
    let set = normalize_set(set, rect.n())?;
    let counts = distance_counts(rect)?;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(GhrError::EmptyRectangle);
    }
    let hits: u64 = set.iter().map(|&k| counts[k]).sum();
    let rect_mass = BigRational::new(BigInt::from(hits), BigInt::from(total));
    Ok(rect_mass / uniform_mass(rect.n(), &set)?)
}

/// Relative weight of a distance set under a rectangle.
pub fn relative_weight(rect: &RectangleSpec, set: &[usize], mode: WeightMode<'_>) -> Result<f64> {
    match mode {
        WeightMode::Exact => Ok(to_f64(&relative_weight_exact(rect, set)?)),
        WeightMode::MonteCarlo { trials, rng } => {
            if trials == 0 {
                return Err(invalid("trials must be positive"));
            }
            let set = normalize_set(set, rect.n())?;
            let mut member = vec![false; rect.n() + 1];
            set.iter().for_each(|&k| member[k] = true);
            // surface sampling failures before the parallel loop
            rect.sample(&mut rng.child(u64::MAX))?;
            let hits = mc::count_successes(rng, trials, |r| {
                let (x, y) = rect.sample(r).expect("rectangle sampled above");
                member[x.distance_unchecked(&y)]
            });
            let unif = to_f64(&uniform_mass(rect.n(), &set)?);
            Ok(hits as f64 / trials as f64 / unif)
        }
    }
}

/// One row of a relative-weight spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    pub set: Vec<usize>,
    pub rw: f64,
}

impl SpectrumRow {
    /// `"k"` for singletons, `"k;k+1"` for pairs.
    pub fn label(&self) -> String {
        self.set.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")
    }
}

/// Relative weights of every singleton `{k}` followed by every adjacent
/// pair `{k, k+1}`.
pub fn spectrum(rect: &RectangleSpec, mode: WeightMode<'_>) -> Result<Vec<SpectrumRow>> {
    let n = rect.n();
    let sets = (0..=n).map(|k| vec![k]).chain((0..n).map(|k| vec![k, k + 1]));
    sets.map(|set| Ok(SpectrumRow { rw: relative_weight(rect, &set, mode)?, set })).collect()
}

// ---------------------------------------------------------------------------
// Reduction Ξ

/// A set-disjointness instance: `x, y ⊆ [4l-1]` with `|x| = |y| = l`
/// (1-based, sorted).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DisjointnessInstance {
    l: usize,
    x: Vec<usize>,
    y: Vec<usize>,
}

impl DisjointnessInstance {
    pub fn new(l: usize, x: &[usize], y: &[usize]) -> Result<Self> {
        if l == 0 {
            return Err(invalid("l must be at least 1"));
        }
        let ground = 4 * l - 1;
        let check = |set: &[usize]| -> Result<Vec<usize>> {
            let mut s = set.to_vec();
            s.sort_unstable();
            s.dedup();
            if s.len() != l || s.len() != set.len() {
                return Err(invalid(format!("subset {set:?} must have exactly {l} distinct elements")));
            }
            if s.iter().any(|&e| e == 0 || e > ground) {
                return Err(invalid(format!("subset {set:?} leaves the ground set [1, {ground}]")));
            }
            Ok(s)
        };
        Ok(Self { l, x: check(x)?, y: check(y)? })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn ground_size(&self) -> usize {
        4 * self.l - 1
    }

    pub fn x(&self) -> &[usize] {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn intersection_size(&self) -> usize {
        self.x.iter().filter(|e| self.y.binary_search(e).is_ok()).count()
    }

    pub fn is_disjoint(&self) -> bool {
        self.intersection_size() == 0
    }
}

fn subsets(ground: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, ground: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for e in start..=ground {
            cur.push(e);
            rec(e + 1, ground, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, ground, size, &mut Vec::new(), &mut out);
    out
}

/// Every `l`-subset of `[4l-1]`, in lexicographic order.
pub fn all_subsets(l: usize) -> Vec<Vec<usize>> {
    subsets(4 * l - 1, l)
}

/// Every instance at size `l`.
pub fn all_instances(l: usize) -> Vec<DisjointnessInstance> {
    let sets = all_subsets(l);
    sets.iter()
        .flat_map(|x| sets.iter().map(move |y| DisjointnessInstance { l, x: x.clone(), y: y.clone() }))
        .collect()
}

/// Target distances and string length for `Ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XiParams {
    pub c1: usize,
    pub c2: usize,
    pub n: usize,
}

impl XiParams {
    /// Checks `c1 < c2`, `2 | (c2 - c1)`, `3 c2 ≤ 4 c1` and that `n` holds
    /// every segment.
    pub fn new(c1: usize, c2: usize, n: usize) -> Result<Self> {
        if c1 >= c2 {
            return Err(invalid(format!("need c1 < c2, got c1 = {c1}, c2 = {c2}")));
        }
        if !(c2 - c1).is_multiple_of(2) {
            return Err(invalid(format!("c2 - c1 = {} must be even", c2 - c1)));
        }
        if 3 * c2 > 4 * c1 {
            return Err(invalid(format!("need 3 c2 <= 4 c1, got c1 = {c1}, c2 = {c2}")));
        }
        let p = Self { c1, c2, n };
        let needed = c2 + p.ground() * p.copies();
        if n < needed {
            return Err(invalid(format!("n = {n} too small, the layout needs n >= {needed}")));
        }
        Ok(p)
    }

    /// `l = ⌊c2 / (4 (c2 - c1))⌋`.
    pub fn l(&self) -> usize {
        self.c2 / (4 * self.gap())
    }

    fn gap(&self) -> usize {
        self.c2 - self.c1
    }

    fn ground(&self) -> usize {
        4 * self.l() - 1
    }

    /// Number of copies `(c2 - c1) / 2` in step 2.
    pub fn copies(&self) -> usize {
        self.gap() / 2
    }

    /// Length of the block-encoded, repeated strings `X₂, Y₂`.
    pub fn encoded_len(&self) -> usize {
        3 * self.ground() * self.copies()
    }

    /// Lengths of Bob's one- and zero-padding in step 3.
    pub fn bob_padding(&self) -> (usize, usize) {
        let ones = self.c2 - self.ground() * self.gap();
        let zeros = self.n - self.c2 - self.ground() * self.copies();
        (ones, zeros)
    }

    /// Length of Alice's zero padding.
    pub fn alice_padding(&self) -> usize {
        self.n - self.encoded_len()
    }
}

/// The fresh randomness of one `Ξ` run: a permutation of `[n]` (`perm[i]` is
/// the image of position `i`) and a mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XiRandomness {
    pub perm: Vec<usize>,
    pub mask: BitString,
}

impl XiRandomness {
    pub fn sample(n: usize, rng: &mut Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mask = BitString::random(n, rng);
        Self { perm, mask }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XiTranscript {
    pub instance: DisjointnessInstance,
    pub params: XiParams,
    pub x: [BitString; 5],
    pub y: [BitString; 5],
    pub randomness: XiRandomness,
    pub accepted: bool,
}

impl XiTranscript {
    /// `|X₃ ⊕ Y₃|`.
    pub fn padded_distance(&self) -> usize {
        self.x[2].distance_unchecked(&self.y[2])
    }

    /// `|X₅ ⊕ Y₅|`.
    pub fn final_distance(&self) -> usize {
        self.x[4].distance_unchecked(&self.y[4])
    }
}

fn encode(ground: usize, set: &[usize], one: [bool; 3], zero: [bool; 3]) -> BitString {
    BitString::from_bits((1..=ground).flat_map(|i| if set.binary_search(&i).is_ok() { one } else { zero }))
}

fn repeat(z: &BitString, copies: usize) -> BitString {
    BitString::from_bits((0..copies).flat_map(|_| z.iter()))
}

fn concat(parts: &[&BitString]) -> BitString {
    BitString::from_bits(parts.iter().flat_map(|p| p.iter()))
}

fn permute(z: &BitString, perm: &[usize]) -> BitString {
    let mut out = BitString::zeros(z.len());
    for (i, &p) in perm.iter().enumerate() {
        out.set(p, z.get(i));
    }
    out
}

/// Runs `Ξ` with the given randomness.
///
/// Layout, left to right: `X₁` is `4l-1` blocks of three bits (`010` for
/// members of `x`, `100` otherwise) and `Y₁` likewise (`010` for members of
/// `y`, `001` otherwise); `X₂, Y₂` are `(c2-c1)/2` copies; `X₃` appends
/// zeros up to length `n`, while `Y₃` appends `1^{c2-(4l-1)(c2-c1)}` and then
/// zeros. Then `X₄ = S(X₃)`, `X₅ = T ⊕ X₄`, and the same for `Y`.
pub fn reduction_xi_with(
    inst: &DisjointnessInstance,
    params: XiParams,
    rect: &RectangleSpec,
    randomness: XiRandomness,
) -> Result<XiTranscript> {
    let XiParams { n, .. } = params;
    if params.l() != inst.l() {
        return Err(invalid(format!("instance has l = {}, parameters give l = {}", inst.l(), params.l())));
    }
    if rect.n() != n || randomness.mask.len() != n || randomness.perm.len() != n {
        return Err(invalid(format!("rectangle and randomness must live on n = {n}")));
    }
    let mut seen = vec![false; n];
    for &p in &randomness.perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(invalid("perm is not a permutation"));
        }
    }
    let ground = inst.ground_size();
    let x1 = encode(ground, inst.x(), [false, true, false], [true, false, false]);
    let y1 = encode(ground, inst.y(), [false, true, false], [false, false, true]);
    let x2 = repeat(&x1, params.copies());
    let y2 = repeat(&y1, params.copies());
    let x3 = concat(&[&x2, &BitString::zeros(params.alice_padding())]);
    let (ones, zeros) = params.bob_padding();
    let y3 = concat(&[&y2, &BitString::ones(ones), &BitString::zeros(zeros)]);
    debug_assert_eq!((x3.len(), y3.len()), (n, n));
    let x4 = permute(&x3, &randomness.perm);
    let y4 = permute(&y3, &randomness.perm);
    let x5 = x4.xor_unchecked(&randomness.mask);
    let y5 = y4.xor_unchecked(&randomness.mask);
    let accepted = rect.contains(&x5, &y5);
    Ok(XiTranscript {
        instance: inst.clone(),
        params,
        x: [x1, x2, x3, x4, x5],
        y: [y1, y2, y3, y4, y5],
        randomness,
        accepted,
    })
}

/// Runs `Ξ` with fresh randomness from `rng`.
pub fn reduction_xi(
    inst: &DisjointnessInstance,
    params: XiParams,
    rect: &RectangleSpec,
    rng: &mut Rng,
) -> Result<XiTranscript> {
    let randomness = XiRandomness::sample(params.n, rng);
    reduction_xi_with(inst, params, rect, randomness)
}

/// Accepts iff `k` independent runs of `Ξ` all accept.
pub fn xi_k_repetition(
    inst: &DisjointnessInstance,
    k: usize,
    params: XiParams,
    rect: &RectangleSpec,
    rng: &mut Rng,
) -> Result<bool> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut all = true;
    for _ in 0..k {
        all &= reduction_xi(inst, params, rect, rng)?.accepted;
    }
    Ok(all)
}
