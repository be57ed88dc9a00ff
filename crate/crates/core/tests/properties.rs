use std::collections::HashMap;

use crowdcand::annotators::{generate_candidate_set, AnnotationRound, BehaviorProfile, CandidateSet};
use crowdcand::experiment::{run_scenario, ScenarioConfig};
use crowdcand::sampling::{derive_stream, sample_categorical, ProbabilityVector};
use crowdcand::voting::{tally_candidate, tally_full};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson statistic over cells with expected count ≥ 5; the rest are pooled.
/// Returns `(statistic, degrees of freedom)`.
fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, usize) {
    let mut cells = Vec::new();
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= 5.0 {
            cells.push((o as f64, e));
        } else {
            pooled_o += o as f64;
            pooled_e += e;
        }
    }
    if pooled_e > 0.0 {
        cells.push((pooled_o, pooled_e));
    }
    let stat = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, cells.len() - 1)
}

fn critical(df: usize) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(0.999)
}

#[test]
fn categorical_frequencies_chi_square() {
    let dists: [&[f64]; 5] = [
        &[0.5, 0.3, 0.2],
        &[0.25, 0.25, 0.25, 0.25],
        &[0.01, 0.09, 0.4, 0.5],
        &[0.7, 0.0, 0.1, 0.2, 0.0],
        &[0.05, 0.15, 0.2, 0.1, 0.3, 0.2],
    ];
    let n = 100_000u64;
    for (k, p) in dists.iter().enumerate() {
        let pv = ProbabilityVector::new(p.to_vec()).unwrap();
        let mut stream = derive_stream(40, &[k as u64]);
        let mut counts = vec![0u64; p.len()];
        for _ in 0..n {
            counts[sample_categorical(&mut stream, &pv)] += 1;
        }
        for (c, &q) in p.iter().enumerate() {
            if q == 0.0 {
                assert_eq!(counts[c], 0, "zero-probability label drawn");
            }
        }
        let expected: Vec<f64> = p.iter().map(|q| q * n as f64).collect();
        let (stat, df) = chi_square(&counts, &expected);
        assert!(stat < critical(df), "distribution {k}: χ² = {stat:.2} on {df} df");
    }
}

/// Exact law of the candidate set by enumerating every draw sequence.
fn exact_set_law(b: &[f64], s: usize) -> HashMap<u64, f64> {
    let r = b.len();
    let mut law = HashMap::new();
    for seq in 0..r.pow(s as u32) {
        let (mut x, mut p, mut mask) = (seq, 1.0, 0u64);
        for _ in 0..s {
            p *= b[x % r];
            mask |= 1 << (x % r);
            x /= r;
        }
        *law.entry(mask).or_insert(0.0) += p;
    }
    law
}

#[test]
fn candidate_set_law_matches_enumeration() {
    let behaviors: [&[f64]; 4] = [
        &[0.6, 0.3, 0.1],
        &[0.2, 0.2, 0.6],
        &[0.4, 0.3, 0.2, 0.1],
        &[0.25, 0.25, 0.25, 0.25],
    ];
    let n = 100_000u64;
    for (k, b) in behaviors.iter().enumerate() {
        let profile = BehaviorProfile::new(ProbabilityVector::new(b.to_vec()).unwrap());
        for s in 1..=3 {
            let law = exact_set_law(b, s);
            let total: f64 = law.values().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let masks: Vec<u64> = law.keys().copied().collect();
            let mut counts = vec![0u64; masks.len()];
            let mut stream = derive_stream(41, &[k as u64, s as u64]);
            for _ in 0..n {
                let set = generate_candidate_set(&mut stream, &profile, s).unwrap();
                assert!(set.len() <= s);
                let cell = masks.iter().position(|&m| m == set.mask()).expect("impossible set");
                counts[cell] += 1;
            }
            let expected: Vec<f64> = masks.iter().map(|m| law[m] * n as f64).collect();
            let (stat, df) = chi_square(&counts, &expected);
            assert!(stat < critical(df), "behavior {k}, s = {s}: χ² = {stat:.2} on {df} df");
        }
    }
}

fn round_strategy() -> impl Strategy<Value = (usize, Vec<Vec<usize>>, Vec<usize>)> {
    (3usize..=10).prop_flat_map(|r| {
        let sets = proptest::collection::vec(
            proptest::collection::btree_set(0..r, 1..=r).prop_map(|s| s.into_iter().collect()),
            1..12,
        );
        let perm = Just((0..r).collect::<Vec<_>>()).prop_shuffle();
        (Just(r), sets, perm)
    })
}

fn to_round(sets: &[Vec<usize>]) -> AnnotationRound {
    AnnotationRound::new(sets.iter().map(|s| CandidateSet::new(s).unwrap()).collect()).unwrap()
}

proptest! {
    #[test]
    fn relabeling_permutes_scores((r, sets, perm) in round_strategy()) {
        let permuted: Vec<Vec<usize>> = sets.iter().map(|s| s.iter().map(|&c| perm[c]).collect()).collect();
        let a = tally_candidate(&to_round(&sets), r).unwrap();
        let b = tally_candidate(&to_round(&permuted), r).unwrap();
        for (c, &pc) in perm.iter().enumerate() {
            prop_assert_eq!(a.score(c), b.score(pc));
        }
        let leaders: Vec<usize> = {
            let mut v: Vec<usize> = a.leaders().iter().map(|&c| perm[c]).collect();
            v.sort();
            v
        };
        prop_assert_eq!(leaders, b.leaders());
    }

    #[test]
    fn scores_sum_to_annotator_count((r, sets, _perm) in round_strategy()) {
        let t = tally_candidate(&to_round(&sets), r).unwrap();
        prop_assert_eq!(t.total(), num_rational::Ratio::from_integer(sets.len() as u128));
    }

    #[test]
    fn singleton_rounds_agree((r, sets, _perm) in round_strategy()) {
        let singles: Vec<Vec<usize>> = sets.iter().map(|s| vec![s[0]]).collect();
        let round = to_round(&singles);
        prop_assert_eq!(tally_candidate(&round, r).unwrap(), tally_full(&round, r).unwrap());
    }
}

#[test]
fn eight_labels_full_needs_more_annotators() {
    // r = 8, alpha = 0.5, beta0 = 4: candidate voting with s = 2 and five
    // annotators is not matched by full voting with eight or fewer
    let target = run_scenario(&ScenarioConfig::case_a(8, 0.5, 4.0, 5, 2, 0)).unwrap().error;
    for l in 3..=8 {
        let full = run_scenario(&ScenarioConfig::case_a(8, 0.5, 4.0, l, 1, 0)).unwrap().error;
        assert!(full >= target, "l = {l}: full {full:.4} < candidate {target:.4}");
    }
}

#[test]
fn candidate_error_falls_with_annotators() {
    let errors: Vec<f64> = [2, 5, 10, 20]
        .iter()
        .map(|&l| run_scenario(&ScenarioConfig::case_a(8, 0.5, 4.0, l, 3, 5)).unwrap().error)
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}
