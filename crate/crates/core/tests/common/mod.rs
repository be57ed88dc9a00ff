//! Shared fixtures for integration tests.

#![allow(dead_code)]

use std::fmt::Write as _;

use crowdcand::sampling::{derive_stream, RandomStream};
use rand::Rng;
use rand_distr::StandardNormal;

/// Class-probability table drawn from a one-dimensional Gaussian mixture with
/// known parameters, so the posteriors are exact.
pub struct SyntheticPosteriors {
    pub csv: String,
    pub n: usize,
    pub r: usize,
    /// Fraction of rows whose posterior argmax is not the generating class.
    pub bayes_mismatch: f64,
}

/// `n` points from an equal-weight mixture of `N(means[c], sd²)`.
pub fn gaussian_mixture_posteriors(seed: u64, n: usize, means: &[f64], sd: f64) -> SyntheticPosteriors {
    let r = means.len();
    let mut stream: RandomStream = derive_stream(seed, &[0xFEED]);
    let mut csv = String::from("instance_id,true_label");
    for c in 0..r {
        write!(csv, ",p_{c}").unwrap();
    }
    csv.push('\n');
    let mut mismatches = 0;
    for i in 0..n {
        let class = stream.index(r);
        let z: f64 = stream.sample(StandardNormal);
        let x = means[class] + sd * z;
        let log_lik: Vec<f64> = means
            .iter()
            .map(|mu| -0.5 * ((x - mu) / sd).powi(2))
            .collect();
        let top = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_lik.iter().map(|v| (v - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let post: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let argmax = (0..r)
            .reduce(|a, b| if post[b] > post[a] { b } else { a })
            .unwrap();
        if argmax != class {
            mismatches += 1;
        }
        write!(csv, "{i},{class}").unwrap();
        for p in &post {
            write!(csv, ",{p}").unwrap();
        }
        csv.push('\n');
    }
    SyntheticPosteriors {
        csv,
        n,
        r,
        bayes_mismatch: mismatches as f64 / n as f64,
    }
}
