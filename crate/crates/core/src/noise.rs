//! Scalar-product noise of random seed vectors: the theoretical
//! distribution, Monte Carlo samples, tail statistics of a real term, and
//! a binomial-band comparison between theory and samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::rank;
use crate::seedgen::{overlap_probability, p_scalar, OverlapLaw, SeedVector};
use crate::space::SemanticSpace;

/// Bin width for continuous similarity histograms.
pub const CONTINUOUS_BIN_WIDTH: f64 = 0.002;
/// Seeds summed per synthetic term vector in composite mode.
pub const COMPOSITE_SEEDS: usize = 5;
/// Width of the acceptance band, in binomial standard errors.
pub const BAND_STANDARD_ERRORS: f64 = 4.0;
/// Reference Gaussian emitted alongside reports; never used to pass/fail.
pub const GAUSSIAN_REFERENCE_STD: f64 = 0.063;

const CHUNK: usize = 1 << 15;

/// Distribution of `<s_a|s_b>` over the lattice `s/(2m)`, `s = -2m..=2m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub dim: usize,
    pub m: usize,
    pub law: OverlapLaw,
    /// `probs[s + 2m]`.
    pub probs: Vec<f64>,
}

/// `P(s) = sum over v >= |s| of P_overlap(v) P_scalar(v, s)`.
pub fn theoretical_pmf(dim: usize, m: usize, law: OverlapLaw) -> Result<Pmf> {
    let n = 2 * m;
    let overlaps = (0..=n)
        .map(|v| overlap_probability(law, v, dim, m))
        .collect::<Result<Vec<_>>>()?;
    let mut probs = vec![0.0; 2 * n + 1];
    for (v, &pv) in overlaps.iter().enumerate() {
        for s in -(v as i64)..=v as i64 {
            probs[(s + n as i64) as usize] += pv * p_scalar(v, s)?;
        }
    }
    Ok(Pmf { dim, m, law, probs })
}

impl Pmf {
    pub fn steps(&self) -> i64 {
        2 * self.m as i64
    }

    pub fn prob(&self, s: i64) -> f64 {
        let n = self.steps();
        if s.abs() > n {
            return 0.0;
        }
        self.probs[(s + n) as usize]
    }

    /// `(value, probability)` pairs in ascending value order.
    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.steps();
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| ((i as i64 - n) as f64 / n as f64, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(x, p)| x * p).sum()
    }

    pub fn std(&self) -> f64 {
        let mean = self.mean();
        self.support()
            .map(|(x, p)| (x - mean) * (x - mean) * p)
            .sum::<f64>()
            .sqrt()
    }
}

/// Fixed-width histogram. Values outside the range land in the edge bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, width: f64, bins: usize) -> Self {
        Histogram {
            lo,
            width,
            counts: vec![0; bins],
        }
    }

    /// One bin per lattice point `s/(2m)`, centered on it.
    pub fn lattice(m: usize) -> Self {
        let n = 2 * m;
        let width = 1.0 / n as f64;
        Histogram::new(-1.0 - width / 2.0, width, 2 * n + 1)
    }

    /// Bins of [`CONTINUOUS_BIN_WIDTH`] centered on multiples of it, covering [-1, 1].
    pub fn continuous() -> Self {
        let w = CONTINUOUS_BIN_WIDTH;
        let half = (1.0 / w).round() as usize;
        Histogram::new(-(half as f64) * w - w / 2.0, w, 2 * half + 1)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.width
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.bins() as f64
    }

    /// Bin containing `x`, or `None` outside the histogram's range.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let pos = ((x - self.lo) / self.width).floor();
        (pos >= 0.0 && (pos as usize) < self.bins()).then_some(pos as usize)
    }

    pub fn add(&mut self, x: f64) {
        let bin = self
            .bin_of(x)
            .unwrap_or(if x < self.lo { 0 } else { self.bins() - 1 });
        self.counts[bin] += 1;
    }

    fn merge(&mut self, other: &Histogram) {
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total();
        if n == 0 {
            return vec![0.0; self.bins()];
        }
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Dot product of two random seeds.
    Seed,
    /// Dot product of two normalized sums of [`COMPOSITE_SEEDS`] seeds.
    Composite,
}

impl std::str::FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seed" => Ok(SampleMode::Seed),
            "composite" => Ok(SampleMode::Composite),
            other => Err(Error::domain(format!("unknown sample mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSample {
    pub mode: SampleMode,
    pub histogram: Histogram,
    pub sample_count: u64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn mean_std(&self) -> (f64, f64) {
        if self.n == 0 {
            return (0.0, 0.0);
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        (mean, (self.sum_sq / n - mean * mean).max(0.0).sqrt())
    }
}

/// Sparse sum of `count` random seeds, normalized, sorted by index.
fn composite_vector(rng: &mut ChaCha8Rng, dim: usize, m: usize, count: usize) -> Vec<(u32, f64)> {
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(2 * m * count);
    for _ in 0..count {
        let s = SeedVector::sample(rng, dim, m);
        let w = s.magnitude();
        entries.extend(s.positive().iter().map(|&i| (i, w)));
        entries.extend(s.negative().iter().map(|&i| (i, -w)));
    }
    entries.sort_unstable_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
    for (i, x) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += x,
            _ => merged.push((i, x)),
        }
    }
    let norm = merged.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    if norm > 0.0 {
        merged.iter_mut().for_each(|e| e.1 /= norm);
    }
    merged
}

fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

fn sample_chunk(
    dim: usize,
    m: usize,
    mode: SampleMode,
    rng_seed: u64,
    chunk: usize,
    count: usize,
) -> (Histogram, Moments) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(chunk as u64);
    let mut moments = Moments::default();
    let n = (2 * m) as i64;
    let hist = match mode {
        SampleMode::Seed => {
            let mut h = Histogram::lattice(m);
            for _ in 0..count {
                let a = SeedVector::sample(&mut rng, dim, m);
                let b = SeedVector::sample(&mut rng, dim, m);
                let steps = a.dot_steps(&b).expect("same shape");
                h.counts[(steps + n) as usize] += 1;
                moments.push(steps as f64 / n as f64);
            }
            h
        }
        SampleMode::Composite => {
            let mut h = Histogram::continuous();
            for _ in 0..count {
                let a = composite_vector(&mut rng, dim, m, COMPOSITE_SEEDS);
                let b = composite_vector(&mut rng, dim, m, COMPOSITE_SEEDS);
                let x = sparse_dot(&a, &b);
                h.add(x);
                moments.push(x);
            }
            h
        }
    };
    (hist, moments)
}

/// Draws `n_samples` random dot products. Work is split into fixed chunks,
/// each with its own stream of the seeded generator, so the result does
/// not depend on the degree of parallelism.
pub fn sample_seed_noise(
    dim: usize,
    m: usize,
    mode: SampleMode,
    n_samples: u64,
    rng_seed: u64,
) -> Result<NoiseSample> {
    crate::seedgen::SpaceConfig::new(dim, m, 0, crate::seedgen::Weighting::Uniform)?;
    let n_samples = n_samples as usize;
    let chunks: Vec<(usize, usize)> = (0..n_samples.div_ceil(CHUNK))
        .map(|c| (c, CHUNK.min(n_samples - c * CHUNK)))
        .collect();
    let run = |&(c, count): &(usize, usize)| sample_chunk(dim, m, mode, rng_seed, c, count);
    #[cfg(feature = "parallel")]
    let parts: Vec<(Histogram, Moments)> = {
        use rayon::prelude::*;
        chunks.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(Histogram, Moments)> = chunks.iter().map(run).collect();

    let mut histogram = match mode {
        SampleMode::Seed => Histogram::lattice(m),
        SampleMode::Composite => Histogram::continuous(),
    };
    let mut moments = Moments::default();
    for (h, mo) in &parts {
        histogram.merge(h);
        moments.merge(mo);
    }
    let (mean, std) = moments.mean_std();
    Ok(NoiseSample {
        mode,
        histogram,
        sample_count: moments.n,
        mean,
        std,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailNoise {
    pub term: String,
    pub start_rank: usize,
    pub histogram: Histogram,
    pub sample_count: u64,
    pub mean: f64,
    pub std: f64,
}

/// Similarities of the neighbors of `term` ranked in
/// `[start_rank, start_rank + count)`; rank 0 is the best match.
pub fn tail_noise(space: &SemanticSpace, term: &str, start_rank: usize, count: usize) -> Result<TailNoise> {
    let id = space.resolve(term)?;
    let end = start_rank
        .checked_add(count)
        .filter(|&e| e <= space.n_terms())
        .ok_or_else(|| {
            Error::domain(format!(
                "ranks {start_rank}..{start_rank}+{count} exceed {} terms",
                space.n_terms()
            ))
        })?;
    let query: Vec<f64> = space.vector(id)?.iter().map(|&x| f64::from(x)).collect();
    let ranked = rank(space, &query, space.n_terms());
    if end > ranked.len() {
        return Err(Error::domain(format!(
            "only {} queryable terms for ranks up to {end}",
            ranked.len()
        )));
    }
    let mut histogram = Histogram::continuous();
    let mut moments = Moments::default();
    for &(_, s) in &ranked[start_rank..end] {
        histogram.add(s);
        moments.push(s);
    }
    let (mean, std) = moments.mean_std();
    Ok(TailNoise {
        term: space.lexicon().terms()[id as usize].clone(),
        start_rank,
        histogram,
        sample_count: moments.n,
        mean,
        std,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDeviation {
    pub center: f64,
    pub theoretical: f64,
    pub empirical: f64,
    pub abs_deviation: f64,
    /// Allowed deviation for this bin.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub sample_count: u64,
    pub bins: Vec<BinDeviation>,
    pub max_abs_deviation: f64,
    /// Largest deviation in units of the bin's band.
    pub worst_band_ratio: f64,
    pub pass: bool,
}

/// Bin-by-bin comparison of two distributions over the same bins.
///
/// A bin passes when `|p_emp - p_th| <= 4 sqrt(q (1 - q) / n)` with
/// `q = max(p_th, p_emp)`, so a single count in a bin of vanishing
/// theoretical mass is judged by its own sampling error.
pub fn compare_probabilities(
    centers: &[f64],
    theoretical: &[f64],
    empirical: &[f64],
    sample_count: u64,
) -> Result<Comparison> {
    if theoretical.len() != empirical.len() || centers.len() != theoretical.len() {
        return Err(Error::domain(format!(
            "binning mismatch: {} theoretical vs {} empirical bins",
            theoretical.len(),
            empirical.len()
        )));
    }
    if sample_count == 0 {
        return Err(Error::domain("no samples to compare"));
    }
    let n = sample_count as f64;
    let mut max_abs = 0.0f64;
    let mut worst = 0.0f64;
    let bins: Vec<BinDeviation> = centers
        .iter()
        .zip(theoretical.iter().zip(empirical))
        .map(|(&center, (&pt, &pe))| {
            let dev = (pe - pt).abs();
            let q = pt.max(pe).clamp(0.0, 1.0);
            let band = BAND_STANDARD_ERRORS * (q * (1.0 - q) / n).sqrt();
            max_abs = max_abs.max(dev);
            let ratio = if band > 0.0 {
                dev / band
            } else if dev > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(ratio);
            BinDeviation {
                center,
                theoretical: pt,
                empirical: pe,
                abs_deviation: dev,
                band,
            }
        })
        .collect();
    Ok(Comparison {
        sample_count,
        bins,
        max_abs_deviation: max_abs,
        worst_band_ratio: worst,
        pass: worst <= 1.0,
    })
}

/// Theoretical mass collected into the bins of `hist`. Fails if any
/// support point with non-zero mass lies outside the histogram.
pub fn bin_pmf(pmf: &Pmf, hist: &Histogram) -> Result<Vec<f64>> {
    let mut out = vec![0.0; hist.bins()];
    for (x, p) in pmf.support() {
        match hist.bin_of(x) {
            Some(b) => out[b] += p,
            None if p == 0.0 => {}
            None => {
                return Err(Error::domain(format!(
                    "binning mismatch: support point {x} outside [{}, {})",
                    hist.lo,
                    hist.hi()
                )))
            }
        }
    }
    Ok(out)
}

/// Compares a theoretical pmf against a sampled histogram.
pub fn compare(theoretical: &Pmf, empirical: &Histogram) -> Result<Comparison> {
    let binned = bin_pmf(theoretical, empirical)?;
    let centers: Vec<f64> = (0..empirical.bins()).map(|b| empirical.center(b)).collect();
    compare_probabilities(&centers, &binned, &empirical.probabilities(), empirical.total())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub dim: usize,
    pub m: usize,
    pub law: OverlapLaw,
    pub mode: SampleMode,
    pub rng_seed: u64,
    pub sample_count: u64,
    /// `(value, probability)` on the lattice `s/(2m)`.
    pub theoretical_pmf: Vec<(f64, f64)>,
    pub theoretical_std: f64,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    pub histogram: Histogram,
    pub max_abs_deviation: f64,
    /// Band verdict; only meaningful in seed mode, where samples live on
    /// the lattice of the theoretical pmf.
    pub band_pass: Option<bool>,
    pub gaussian_reference_std: f64,
}

impl NoiseReport {
    pub fn generate(
        dim: usize,
        m: usize,
        mode: SampleMode,
        n_samples: u64,
        rng_seed: u64,
        law: OverlapLaw,
    ) -> Result<NoiseReport> {
        let pmf = theoretical_pmf(dim, m, law)?;
        let sample = sample_seed_noise(dim, m, mode, n_samples, rng_seed)?;
        let (max_abs_deviation, band_pass) = if sample.sample_count == 0 {
            (0.0, None)
        } else {
            let cmp = compare(&pmf, &sample.histogram)?;
            (
                cmp.max_abs_deviation,
                (mode == SampleMode::Seed).then_some(cmp.pass),
            )
        };
        Ok(NoiseReport {
            dim,
            m,
            law,
            mode,
            rng_seed,
            sample_count: sample.sample_count,
            theoretical_pmf: pmf.support().collect(),
            theoretical_std: pmf.std(),
            empirical_mean: sample.mean,
            empirical_std: sample.std,
            histogram: sample.histogram,
            max_abs_deviation,
            band_pass,
            gaussian_reference_std: GAUSSIAN_REFERENCE_STD,
        })
    }

    /// `bin_center,theoretical_p,empirical_p`, one row per histogram bin.
    pub fn to_csv(&self) -> String {
        let pmf = Pmf {
            dim: self.dim,
            m: self.m,
            law: self.law,
            probs: self.theoretical_pmf.iter().map(|p| p.1).collect(),
        };
        let theory = bin_pmf(&pmf, &self.histogram).unwrap_or_else(|_| vec![0.0; self.histogram.bins()]);
        let emp = self.histogram.probabilities();
        let mut out = String::from("bin_center,theoretical_p,empirical_p\n");
        for b in 0..self.histogram.bins() {
            out.push_str(&format!(
                "{:.6},{:.9e},{:.9e}\n",
                self.histogram.center(b),
                theory[b],
                emp[b]
            ));
        }
        out
    }

    /// Reference Gaussian mass per bin (midpoint rule), for overlays.
    pub fn gaussian_reference(&self) -> Vec<(f64, f64)> {
        let s = self.gaussian_reference_std;
        let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
        (0..self.histogram.bins())
            .map(|b| {
                let x = self.histogram.center(b);
                (x, self.histogram.width * norm * (-0.5 * (x / s).powi(2)).exp())
            })
            .collect()
    }
}
