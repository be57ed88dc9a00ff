//! Reproducible random streams and the two samplers the simulation needs.
//!
//! Every random quantity in a run is drawn from a [`RandomStream`] derived
//! from the master seed and a short integer path naming the work unit
//! (scenario key, instance, repetition, annotator, purpose). Derivation is a
//! pure function of `(seed, path)`, so results do not depend on which thread
//! evaluates which unit or in which order.
//!
//! Derivation folds the path into a 64-bit key with the SplitMix64 finalizer.
//! The key seeds a xoshiro256++ generator (state expanded with SplitMix64, as
//! `rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64` does).

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Maximum number of elements in a derivation path.
pub const MAX_PATH_DEPTH: usize = 8;

/// Tolerance on the sum of a [`ProbabilityVector`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Smallest supported label count.
pub const MIN_LABELS: usize = 3;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(master_seed: u64, path: &[u64]) -> u64 {
    let mut h = mix64(master_seed.wrapping_add(GOLDEN_GAMMA));
    for (depth, &elem) in path.iter().enumerate() {
        let salt = GOLDEN_GAMMA.wrapping_mul(depth as u64 + 2);
        h = mix64(h ^ mix64(elem.wrapping_add(salt)));
    }
    mix64(h ^ path.len() as u64)
}

/// A single-owner random generator identified by `(master seed, path)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: Xoshiro256PlusPlus,
    master_seed: u64,
    path: [u64; MAX_PATH_DEPTH],
    depth: usize,
}

/// Derives the stream for `path` under `master_seed`.
///
/// Panics if `path` is longer than [`MAX_PATH_DEPTH`].
pub fn derive_stream(master_seed: u64, path: &[u64]) -> RandomStream {
    assert!(
        path.len() <= MAX_PATH_DEPTH,
        "derivation path has {} elements, at most {MAX_PATH_DEPTH} allowed",
        path.len()
    );
    let mut stored = [0u64; MAX_PATH_DEPTH];
    stored[..path.len()].copy_from_slice(path);
    RandomStream {
        rng: Xoshiro256PlusPlus::seed_from_u64(derive_key(master_seed, path)),
        master_seed,
        path: stored,
        depth: path.len(),
    }
}

impl RandomStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path[..self.depth]
    }

    /// Fresh stream whose path is this stream's path extended by `suffix`.
    /// Independent of how many values have been drawn from `self`.
    pub fn child(&self, suffix: &[u64]) -> RandomStream {
        let depth = self.depth + suffix.len();
        assert!(depth <= MAX_PATH_DEPTH, "derivation path too deep ({depth})");
        let mut path = self.path;
        path[self.depth..depth].copy_from_slice(suffix);
        derive_stream(self.master_seed, &path[..depth])
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `[0, n)`. `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// A distribution over `r ≥ 3` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates `entries` as a simplex vector: finite, non-negative, summing
    /// to one within [`SIMPLEX_TOL`], and of length at least [`MIN_LABELS`].
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::check_shape(&entries)?;
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ProbabilityVector(entries))
    }

    /// Accepts non-negative finite weights with a positive total and divides
    /// them by their sum.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        Self::check_shape(&weights)?;
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::invalid(format!("weights sum to {sum}")));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(ProbabilityVector(weights))
    }

    /// Uniform distribution over `r` labels.
    pub fn uniform(r: usize) -> Result<Self> {
        Self::from_weights(vec![1.0; r])
    }

    fn check_shape(entries: &[f64]) -> Result<()> {
        if entries.len() < MIN_LABELS {
            return Err(Error::invalid(format!(
                "probability vector has {} entries, need at least {MIN_LABELS}",
                entries.len()
            )));
        }
        if let Some((i, p)) = entries
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::invalid(format!("entry {i} is {p}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, label: usize) -> f64 {
        self.0[label]
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = c;
            }
        }
        best
    }
}

/// ln of a Gamma(shape, 1) variate (Marsaglia–Tsang).
///
/// Works in log space so that tiny shapes, whose variates underflow `f64`,
/// still produce usable Dirichlet draws.
fn ln_gamma_variate(stream: &mut RandomStream, shape: f64) -> f64 {
    if shape < 1.0 {
        // G(a) = G(a + 1) * U^(1/a)
        let u: f64 = stream.sample(Open01);
        return ln_gamma_variate(stream, shape + 1.0) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = stream.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = stream.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// Draws from Dirichlet(`params`) by normalizing independent Gamma(α_c, 1)
/// variates.
pub fn sample_dirichlet(stream: &mut RandomStream, params: &[f64]) -> Result<ProbabilityVector> {
    if params.len() < MIN_LABELS {
        return Err(Error::invalid(format!(
            "Dirichlet needs at least {MIN_LABELS} parameters, got {}",
            params.len()
        )));
    }
    if let Some((i, a)) = params
        .iter()
        .enumerate()
        .find(|(_, a)| !(a.is_finite() && **a > 0.0))
    {
        return Err(Error::invalid(format!("Dirichlet parameter {i} is {a}")));
    }
    Ok(ProbabilityVector(dirichlet_weights(stream, params)?))
}

/// Dirichlet draw that also accepts zero parameters, which yield zero
/// weight (the limit of a vanishing concentration). At least one parameter
/// must be positive.
pub(crate) fn dirichlet_weights(stream: &mut RandomStream, params: &[f64]) -> Result<Vec<f64>> {
    if let Some((i, a)) = params
        .iter()
        .enumerate()
        .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
    {
        return Err(Error::invalid(format!("Dirichlet parameter {i} is {a}")));
    }
    if params.iter().all(|&a| a == 0.0) {
        return Err(Error::invalid("all Dirichlet parameters are zero"));
    }
    let mut out: Vec<f64> = params
        .iter()
        .map(|&a| {
            if a > 0.0 {
                ln_gamma_variate(stream, a)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in out.iter_mut() {
        *v = (*v - top).exp();
        sum += *v;
    }
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(out)
}

/// Draws a label with probability `p(c)`. Zero-probability labels are never
/// returned.
pub fn sample_categorical(stream: &mut RandomStream, p: &ProbabilityVector) -> usize {
    let u = stream.uniform();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (c, &pc) in p.as_slice().iter().enumerate() {
        if pc > 0.0 {
            acc += pc;
            last_positive = c;
            if u < acc {
                return c;
            }
        }
    }
    // u landed in the rounding gap above the cumulative sum
    last_positive
}
