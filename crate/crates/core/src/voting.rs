//! Full and candidate voting.
//!
//! Candidate voting gives each annotator one unit of vote mass, split evenly
//! over its candidate set; the label with the largest total wins. With
//! singleton sets this is plain majority voting. Scores are kept as exact
//! rationals over a common denominator so ties are detected exactly.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::annotators::{AnnotationRound, MAX_LABELS};
use crate::error::{Error, Result};
use crate::sampling::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Full,
    Candidate,
}

impl Scheme {
    /// Full voting for single-label rounds, candidate voting otherwise.
    pub fn natural_for(s: usize) -> Scheme {
        if s == 1 {
            Scheme::Full
        } else {
            Scheme::Candidate
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Full => "full",
            Scheme::Candidate => "candidate",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scheme::Full),
            "candidate" => Ok(Scheme::Candidate),
            other => Err(Error::invalid(format!("unknown voting scheme `{other}`"))),
        }
    }
}

/// Per-label scores `numerators[c] / denominator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    numerators: Vec<u128>,
    denominator: u128,
}

impl VoteTally {
    pub fn r(&self) -> usize {
        self.numerators.len()
    }

    pub fn score(&self, label: usize) -> Ratio<u128> {
        Ratio::new(self.numerators[label], self.denominator)
    }

    pub fn scores(&self) -> Vec<Ratio<u128>> {
        (0..self.r()).map(|c| self.score(c)).collect()
    }

    /// Sum of all scores; equals the number of annotators.
    pub fn total(&self) -> Ratio<u128> {
        Ratio::new(self.numerators.iter().sum(), self.denominator)
    }

    /// Labels attaining the maximum score, in increasing order.
    pub fn leaders(&self) -> Vec<usize> {
        let top = self.numerators.iter().copied().max().unwrap_or(0);
        (0..self.r())
            .filter(|&c| self.numerators[c] == top)
            .collect()
    }

    /// Builds a tally from explicit non-negative rational scores.
    pub fn from_scores(scores: &[Ratio<u128>]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::contract("tally has no labels"));
        }
        let denominator = scores
            .iter()
            .try_fold(1u128, |acc, s| checked_lcm(acc, *s.denom()))
            .ok_or_else(|| Error::invalid("score denominators overflow"))?;
        let numerators = scores
            .iter()
            .map(|s| s.numer().checked_mul(denominator / s.denom()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::invalid("scores overflow"))?;
        Ok(VoteTally {
            numerators,
            denominator,
        })
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn checked_lcm(a: u128, b: u128) -> Option<u128> {
    (a / gcd(a, b)).checked_mul(b)
}

fn check_labels(round: &AnnotationRound, r: usize) -> Result<()> {
    if r == 0 || r > MAX_LABELS {
        return Err(Error::invalid(format!(
            "r = {r} outside [1, {MAX_LABELS}]"
        )));
    }
    if let Some(set) = round.sets().iter().find(|s| s.max_label() >= r) {
        return Err(Error::contract(format!(
            "candidate set {set:?} has labels outside [0, {r})"
        )));
    }
    Ok(())
}

/// Majority-vote counts. Every set in the round must be a singleton.
pub fn tally_full(round: &AnnotationRound, r: usize) -> Result<VoteTally> {
    check_labels(round, r)?;
    let mut numerators = vec![0u128; r];
    for set in round.sets() {
        if !set.is_singleton() {
            return Err(Error::contract(format!(
                "full voting needs single labels, got {set:?}"
            )));
        }
        numerators[set.max_label()] += 1;
    }
    Ok(VoteTally {
        numerators,
        denominator: 1,
    })
}

/// Candidate-vote scores `Σ_j 1(c ∈ S_j) / |S_j|`.
pub fn tally_candidate(round: &AnnotationRound, r: usize) -> Result<VoteTally> {
    check_labels(round, r)?;
    if round.sets().iter().any(|s| s.is_empty()) {
        return Err(Error::contract("empty candidate set"));
    }
    // set sizes are at most 64, so the lcm is at most lcm(1..=64) < 2^93
    let denominator = round
        .sets()
        .iter()
        .fold(1u128, |acc, s| checked_lcm(acc, s.len() as u128).unwrap());
    let mut numerators = vec![0u128; r];
    for set in round.sets() {
        let share = denominator / set.len() as u128;
        for c in set.labels() {
            numerators[c] = numerators[c]
                .checked_add(share)
                .ok_or_else(|| Error::invalid("vote total overflows"))?;
        }
    }
    Ok(VoteTally {
        numerators,
        denominator,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedLabel {
    pub label: usize,
    /// Every label with the maximal score; `label` is one of them.
    pub tie_set: Vec<usize>,
}

impl AggregatedLabel {
    pub fn tied(&self) -> bool {
        self.tie_set.len() > 1
    }
}

/// Picks the top-scoring label, breaking ties uniformly at random. The stream
/// is only consumed when there is a tie.
pub fn select_winner(tally: &VoteTally, stream: &mut RandomStream) -> AggregatedLabel {
    let tie_set = tally.leaders();
    let label = if tie_set.len() == 1 {
        tie_set[0]
    } else {
        tie_set[stream.index(tie_set.len())]
    };
    AggregatedLabel { label, tie_set }
}

pub fn aggregate(
    round: &AnnotationRound,
    scheme: Scheme,
    r: usize,
    stream: &mut RandomStream,
) -> Result<AggregatedLabel> {
    let tally = match scheme {
        Scheme::Full => tally_full(round, r)?,
        Scheme::Candidate => tally_candidate(round, r)?,
    };
    Ok(select_winner(&tally, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotators::CandidateSet;
    use crate::sampling::derive_stream;

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;

    fn round(sets: &[&[usize]]) -> AnnotationRound {
        AnnotationRound::new(sets.iter().map(|s| CandidateSet::new(s).unwrap()).collect())
            .unwrap()
    }

    fn q(n: u128, d: u128) -> Ratio<u128> {
        Ratio::new(n, d)
    }

    #[test]
    fn full_strict_majority() {
        let t = tally_full(&round(&[&[A], &[A], &[B]]), 3).unwrap();
        assert_eq!(t.scores(), [q(2, 1), q(1, 1), q(0, 1)]);
        let w = select_winner(&t, &mut derive_stream(0, &[]));
        assert_eq!(w.label, A);
        assert!(!w.tied());
    }

    #[test]
    fn full_three_way_tie() {
        let t = tally_full(&round(&[&[A], &[B], &[C]]), 3).unwrap();
        assert_eq!(t.leaders(), [A, B, C]);
        assert!(select_winner(&t, &mut derive_stream(0, &[])).tied());
    }

    #[test]
    fn full_unanimity() {
        let t = tally_full(&round(&[&[B][..]; 5]), 4).unwrap();
        assert_eq!(t.scores(), [q(0, 1), q(5, 1), q(0, 1), q(0, 1)]);
    }

    #[test]
    fn full_rejects_sets() {
        assert!(matches!(
            tally_full(&round(&[&[A], &[A, B]]), 3),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn labels_must_fit_r() {
        assert!(tally_full(&round(&[&[3]]), 3).is_err());
        assert!(tally_candidate(&round(&[&[0, 3]]), 3).is_err());
    }

    #[test]
    fn candidate_fractional_scores() {
        let t = tally_candidate(&round(&[&[A], &[A, B], &[B, C]]), 3).unwrap();
        assert_eq!(t.scores(), [q(3, 2), q(1, 1), q(1, 2)]);
        assert_eq!(t.total(), q(3, 1));
        let w = select_winner(&t, &mut derive_stream(0, &[]));
        assert_eq!((w.label, w.tied()), (A, false));
    }

    #[test]
    fn candidate_pair_tie() {
        let t = tally_candidate(&round(&[&[A, B], &[A, B]]), 3).unwrap();
        assert_eq!(t.scores(), [q(1, 1), q(1, 1), q(0, 1)]);
        let w = select_winner(&t, &mut derive_stream(0, &[]));
        assert_eq!(w.tie_set, [A, B]);
    }

    #[test]
    fn thirds_tie_exactly() {
        // 1/3 + 1/3 + 1/3 vs 1 would not compare equal in floating point
        let t = tally_candidate(&round(&[&[A, B, C], &[A, B, C], &[A, B, C], &[C]]), 4).unwrap();
        assert_eq!(t.score(A), q(1, 1));
        assert_eq!(t.score(C), q(2, 1));
        let t = tally_candidate(&round(&[&[A, B, C], &[A, B, C], &[A, B, C], &[C], &[A]]), 4)
            .unwrap();
        assert_eq!(t.leaders(), [A, C]);
    }

    #[test]
    fn singleton_candidate_equals_full() {
        let rd = round(&[&[C], &[A], &[C], &[B]]);
        assert_eq!(tally_candidate(&rd, 5).unwrap(), tally_full(&rd, 5).unwrap());
    }

    #[test]
    fn tie_break_is_uniform() {
        let t = VoteTally::from_scores(&[q(1, 1), q(1, 1), q(0, 1)]).unwrap();
        let n = 100_000;
        let mut s = derive_stream(12, &[]);
        let zeros = (0..n).filter(|_| select_winner(&t, &mut s).label == 0).count();
        let se = (0.25 / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn single_annotator_full_set_is_uniform() {
        let rd = round(&[&[A, B, C]]);
        let n = 90_000;
        let mut s = derive_stream(13, &[]);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[aggregate(&rd, Scheme::Candidate, 3, &mut s).unwrap().label] += 1;
        }
        let se = ((1.0 / 3.0) * (2.0 / 3.0) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 3.0 * se);
        }
    }

    #[test]
    fn unique_max_leaves_stream_untouched() {
        let t = VoteTally::from_scores(&[q(3, 2), q(1, 1), q(1, 2)]).unwrap();
        let mut used = derive_stream(1, &[]);
        let fresh = used.clone();
        select_winner(&t, &mut used);
        assert_eq!(used.uniform(), fresh.clone().uniform());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("full".parse::<Scheme>().unwrap(), Scheme::Full);
        assert_eq!("candidate".parse::<Scheme>().unwrap(), Scheme::Candidate);
        assert!("majority".parse::<Scheme>().is_err());
        assert_eq!(Scheme::natural_for(1), Scheme::Full);
        assert_eq!(Scheme::natural_for(6), Scheme::Candidate);
    }
}
