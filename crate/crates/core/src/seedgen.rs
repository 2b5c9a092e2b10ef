//! Sparse ternary seed vectors and the exact combinatorics of their overlap.
//!
//! A seed vector in dimension `d` has `m` coordinates equal to `+1/sqrt(2m)`,
//! `m` equal to `-1/sqrt(2m)` and the rest zero, so it is a unit vector by
//! construction. Seeds are derived from a hash of the term and a global seed,
//! which makes them reproducible without storing a lookup table.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Term weighting used inside clique vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    TfIdf,
    Uniform,
}

impl Weighting {
    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Weighting::TfIdf => 0,
            Weighting::Uniform => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Weighting::TfIdf),
            1 => Some(Weighting::Uniform),
            _ => None,
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tf-idf" | "tfidf" => Ok(Weighting::TfIdf),
            "uniform" => Ok(Weighting::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown weighting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub dim: usize,
    /// Number of positive (and of negative) coordinates in each seed.
    pub m: usize,
    pub global_seed: u64,
    pub weighting: Weighting,
}

impl SpaceConfig {
    pub fn new(dim: usize, m: usize, global_seed: u64, weighting: Weighting) -> Result<Self> {
        check_shape(dim, m)?;
        Ok(SpaceConfig {
            dim,
            m,
            global_seed,
            weighting,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_shape(self.dim, self.m)
    }

    /// Fraction of non-zero coordinates, `2m/d`.
    pub fn density(&self) -> f64 {
        (2 * self.m) as f64 / self.dim as f64
    }
}

/// Seeds must stay sparse: `d >= 2`, `m >= 1` and `2m <= d/2`.
fn check_shape(dim: usize, m: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidConfig(format!("dimension must be >= 2, got {dim}")));
    }
    if m < 1 {
        return Err(Error::InvalidConfig("m must be >= 1".into()));
    }
    if 4 * m > dim {
        return Err(Error::InvalidConfig(format!(
            "seeds too dense: 2m = {} exceeds d/2 = {}",
            2 * m,
            dim / 2
        )));
    }
    if dim > u32::MAX as usize {
        return Err(Error::InvalidConfig("dimension exceeds u32".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedVector {
    dim: u32,
    positive: Vec<u32>,
    negative: Vec<u32>,
}

impl SeedVector {
    /// Draws `2m` distinct coordinates by rejection; the first `m` drawn
    /// become positive, the rest negative.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize, m: usize) -> SeedVector {
        let mut drawn: Vec<u32> = Vec::with_capacity(2 * m);
        if m <= 8 {
            while drawn.len() < 2 * m {
                let idx = rng.random_range(0..dim as u32);
                if !drawn.contains(&idx) {
                    drawn.push(idx);
                }
            }
        } else {
            let mut taken = vec![0u64; dim.div_ceil(64)];
            while drawn.len() < 2 * m {
                let idx = rng.random_range(0..dim as u32);
                let (word, bit) = (idx as usize / 64, idx % 64);
                if taken[word] & (1 << bit) == 0 {
                    taken[word] |= 1 << bit;
                    drawn.push(idx);
                }
            }
        }
        let mut negative = drawn.split_off(m);
        let mut positive = drawn;
        positive.sort_unstable();
        negative.sort_unstable();
        SeedVector {
            dim: dim as u32,
            positive,
            negative,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn m(&self) -> usize {
        self.positive.len()
    }

    pub fn positive(&self) -> &[u32] {
        &self.positive
    }

    pub fn negative(&self) -> &[u32] {
        &self.negative
    }

    /// Magnitude of each non-zero coordinate, `1/sqrt(2m)`.
    pub fn magnitude(&self) -> f64 {
        1.0 / ((2 * self.m()) as f64).sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.add_scaled_to(1.0, &mut out);
        out
    }

    /// `out += weight * self`.
    pub fn add_scaled_to(&self, weight: f64, out: &mut [f64]) {
        let w = weight * self.magnitude();
        for &i in &self.positive {
            out[i as usize] += w;
        }
        for &i in &self.negative {
            out[i as usize] -= w;
        }
    }

    /// Scalar product in units of `1/(2m)`: an integer in `[-2m, 2m]`.
    pub fn dot_steps(&self, other: &SeedVector) -> Result<i64> {
        if self.dim != other.dim || self.m() != other.m() {
            return Err(Error::domain(format!(
                "seed shapes differ: (d={}, m={}) vs (d={}, m={})",
                self.dim,
                self.m(),
                other.dim,
                other.m()
            )));
        }
        let same = intersect_count(&self.positive, &other.positive)
            + intersect_count(&self.negative, &other.negative);
        let opposite = intersect_count(&self.positive, &other.negative)
            + intersect_count(&self.negative, &other.positive);
        Ok(same as i64 - opposite as i64)
    }
}

fn intersect_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Exact sparse scalar product of two seeds.
pub fn seed_dot(a: &SeedVector, b: &SeedVector) -> Result<f64> {
    Ok(a.dot_steps(b)? as f64 / (2 * a.m()) as f64)
}

/// 64-bit FNV-1a over the global seed, salt and term bytes, finished with
/// the SplitMix64 mixer. Stable across platforms and releases.
pub fn seed_hash(global_seed: u64, salt: u32, term: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let bytes = global_seed
        .to_le_bytes()
        .into_iter()
        .chain(salt.to_le_bytes())
        .chain(term.bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    splitmix64(h)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed vector for `term`. A pure function of the term bytes, the global
/// seed, `d` and `m`.
pub fn make_seed(term: &str, config: &SpaceConfig) -> SeedVector {
    make_seed_salted(term, 0, config)
}

/// Same as [`make_seed`] with an explicit collision salt.
pub fn make_seed_salted(term: &str, salt: u32, config: &SpaceConfig) -> SeedVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_hash(config.global_seed, salt, term));
    SeedVector::sample(&mut rng, config.dim, config.m)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of distinct seed vectors, `C(d, 2m) * C(2m, m)`.
pub fn n_seed(dim: usize, m: usize) -> Result<BigUint> {
    if 2 * m > dim {
        return Err(Error::domain(format!("2m = {} exceeds d = {dim}", 2 * m)));
    }
    Ok(binomial(dim as u64, 2 * m as u64) * binomial(2 * m as u64, m as u64))
}

/// `num / den` as a float, without overflowing on huge operands.
pub(crate) fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries ~64 significant bits.
    let shift = 64 + den.bits() as i64 - num.bits() as i64;
    let q = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let mut x = q.to_f64().unwrap_or(f64::INFINITY);
    let mut e = -shift;
    // Apply the exponent in steps so intermediate powers stay finite.
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        x *= 2f64.powi(step as i32);
        e -= step;
    }
    x
}

/// Law for the number `v` of shared non-zero coordinates of two random seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapLaw {
    /// `C(2m,v) p^v (1-p)^(2m-v)` with `p = 2m/d`: each of the 2m non-zero
    /// slots of one seed independently hits the support of the other.
    Binomial,
    /// `C(2m,v) C(d-2m,2m-v) / C(d,2m)`: the exact law when both supports
    /// are drawn without replacement, as [`SeedVector::sample`] does.
    Hypergeometric,
}

impl std::str::FromStr for OverlapLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binomial" => Ok(OverlapLaw::Binomial),
            "hypergeometric" | "exact" => Ok(OverlapLaw::Hypergeometric),
            other => Err(Error::InvalidConfig(format!("unknown overlap law {other:?}"))),
        }
    }
}

fn check_overlap(v: usize, m: usize) -> Result<()> {
    if v > 2 * m {
        return Err(Error::domain(format!("overlap {v} exceeds 2m = {}", 2 * m)));
    }
    Ok(())
}

/// Binomial overlap probability.
pub fn p_overlap(v: usize, dim: usize, m: usize) -> Result<f64> {
    check_shape(dim, m)?;
    check_overlap(v, m)?;
    let n = 2 * m;
    let p = n as f64 / dim as f64;
    let c = binomial(n as u64, v as u64).to_f64().unwrap_or(f64::INFINITY);
    Ok(c * p.powi(v as i32) * (1.0 - p).powi((n - v) as i32))
}

/// Exact overlap probability for supports drawn without replacement.
pub fn p_overlap_exact(v: usize, dim: usize, m: usize) -> Result<f64> {
    check_shape(dim, m)?;
    check_overlap(v, m)?;
    let n = 2 * m as u64;
    let d = dim as u64;
    let v = v as u64;
    let num = binomial(n, v) * binomial(d - n, n - v);
    Ok(ratio_to_f64(&num, &binomial(d, n)))
}

pub fn overlap_probability(law: OverlapLaw, v: usize, dim: usize, m: usize) -> Result<f64> {
    match law {
        OverlapLaw::Binomial => p_overlap(v, dim, m),
        OverlapLaw::Hypergeometric => p_overlap_exact(v, dim, m),
    }
}

/// Probability that an overlap of `v` coordinates yields the scalar
/// `s/(2m)`: `C(v, (v+s)/2) 2^-v`, zero when `v+s` is odd.
pub fn p_scalar(v: usize, s: i64) -> Result<f64> {
    let vi = v as i64;
    if s.abs() > vi {
        return Err(Error::domain(format!("|s| = {} exceeds overlap {v}", s.abs())));
    }
    if (vi + s) % 2 != 0 {
        return Ok(0.0);
    }
    let q = ((vi + s) / 2) as u64;
    let num = binomial(v as u64, q);
    Ok(ratio_to_f64(&num, &(BigUint::one() << v)))
}
