//! Error of an aggregation scheme estimated from repeated runs, and its split
//! into squared bias and variance (Kohavi–Wolpert style, 0-1 loss).
//!
//! With `f_i(c)` the fraction of the `m` repetitions in which instance `i`
//! was aggregated to `c`, and `c*_i` its true label:
//!
//! ```text
//! error    = 1/n · Σ_i (1 − f_i(c*_i))
//! bias²    = 1/2n · Σ_i [(1 − f_i(c*_i))² + Σ_{c≠c*_i} f_i(c)²]
//! variance = 1/2n · Σ_i (1 − Σ_c f_i(c)²)
//! ```
//!
//! and `bias² + variance = error` holds identically.

use serde::Serialize;

use crate::error::{Error, Result};

/// Label counts per instance over `m` repetitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u32>,
    n: usize,
    r: usize,
    m: u32,
}

impl FrequencyTable {
    /// Builds a table from precomputed counts (row-major, `n × r`). Every row
    /// must sum to the same positive `m`.
    pub fn from_counts(counts: Vec<u32>, r: usize) -> Result<Self> {
        if r == 0 || !counts.len().is_multiple_of(r) {
            return Err(Error::contract(format!(
                "{} counts do not form rows of length {r}",
                counts.len()
            )));
        }
        let n = counts.len() / r;
        let mut m = None;
        for (i, row) in counts.chunks(r).enumerate() {
            let total: u32 = row.iter().sum();
            if total == 0 || m.is_some_and(|m| m != total) {
                return Err(Error::contract(format!(
                    "instance {i} has {total} repetitions, expected {}",
                    m.unwrap_or(1)
                )));
            }
            m = Some(total);
        }
        Ok(FrequencyTable {
            counts,
            n,
            r,
            m: m.unwrap_or(1),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m as usize
    }

    pub fn counts(&self, instance: usize) -> &[u32] {
        &self.counts[instance * self.r..(instance + 1) * self.r]
    }

    pub fn frequency(&self, instance: usize, label: usize) -> f64 {
        self.counts(instance)[label] as f64 / self.m as f64
    }

    fn check_truths(&self, truths: &[usize]) -> Result<()> {
        if truths.len() != self.n {
            return Err(Error::contract(format!(
                "{} true labels for {} instances",
                truths.len(),
                self.n
            )));
        }
        if let Some(t) = truths.iter().find(|&&t| t >= self.r) {
            return Err(Error::contract(format!(
                "true label {t} outside [0, {})",
                self.r
            )));
        }
        Ok(())
    }
}

/// Counts how often each label was produced per instance. `estimates[i][k]`
/// is the aggregated label of instance `i` in repetition `k`.
pub fn frequencies(estimates: &[Vec<usize>], r: usize) -> Result<FrequencyTable> {
    let m = estimates.first().map_or(0, Vec::len);
    if m == 0 {
        return Err(Error::contract("need at least one instance and one repetition"));
    }
    let mut counts = vec![0u32; estimates.len() * r];
    for (i, row) in estimates.iter().enumerate() {
        if row.len() != m {
            return Err(Error::contract(format!(
                "instance {i} has {} repetitions, expected {m}",
                row.len()
            )));
        }
        for &c in row {
            if c >= r {
                return Err(Error::contract(format!("label {c} outside [0, {r})")));
            }
            counts[i * r + c] += 1;
        }
    }
    FrequencyTable::from_counts(counts, r)
}

pub fn estimate_error(freqs: &FrequencyTable, truths: &[usize]) -> Result<f64> {
    freqs.check_truths(truths)?;
    let total: f64 = truths
        .iter()
        .enumerate()
        .map(|(i, &t)| 1.0 - freqs.frequency(i, t))
        .sum();
    Ok(total / freqs.n as f64)
}

/// Returns `(bias_squared, variance)`.
pub fn decompose(freqs: &FrequencyTable, truths: &[usize]) -> Result<(f64, f64)> {
    freqs.check_truths(truths)?;
    let mut bias = 0.0;
    let mut variance = 0.0;
    for (i, &t) in truths.iter().enumerate() {
        let mut sq_sum = 0.0;
        let mut miss_sq = 0.0;
        for c in 0..freqs.r {
            let f = freqs.frequency(i, c);
            sq_sum += f * f;
            if c != t {
                miss_sq += f * f;
            }
        }
        let miss = 1.0 - freqs.frequency(i, t);
        bias += miss * miss + miss_sq;
        variance += 1.0 - sq_sum;
    }
    let scale = 2.0 * freqs.n as f64;
    Ok((bias / scale, variance / scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub error: f64,
    pub bias_squared: f64,
    pub variance: f64,
    pub n: usize,
    pub m: usize,
    /// Fraction of aggregations decided by a random tie-break.
    pub tie_rate: f64,
}

impl ErrorReport {
    pub fn new(freqs: &FrequencyTable, truths: &[usize], tie_rate: f64) -> Result<Self> {
        let error = estimate_error(freqs, truths)?;
        let (bias_squared, variance) = decompose(freqs, truths)?;
        Ok(ErrorReport {
            error,
            bias_squared,
            variance,
            n: freqs.n(),
            m: freqs.m(),
            tie_rate,
        })
    }
}
