//! Simulated annotators.
//!
//! An annotator facing an instance with difficulty `d` gets a behavior
//! distribution `b ~ Dirichlet(β₀·d)`. Small `β₀` makes `b` nearly one-hot
//! (an obstinate annotator), large `β₀` pulls `b` towards `d` (a hesitant
//! one). The annotator then draws `s` labels from `b` with replacement and
//! reports the distinct ones as its candidate set.

use std::fmt;

use crate::error::{Error, Result};
use crate::sampling::{sample_categorical, ProbabilityVector, RandomStream};

/// Largest label count a candidate set can represent.
pub const MAX_LABELS: usize = 64;

const BEHAVIOR_STREAM: u64 = 0;
const DRAW_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile(ProbabilityVector);

impl BehaviorProfile {
    pub fn new(behavior: ProbabilityVector) -> Self {
        BehaviorProfile(behavior)
    }

    pub fn distribution(&self) -> &ProbabilityVector {
        &self.0
    }
}

/// Non-empty set of distinct labels below [`MAX_LABELS`], stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CandidateSet(u64);

impl CandidateSet {
    pub fn new(labels: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &c in labels {
            if c >= MAX_LABELS {
                return Err(Error::invalid(format!(
                    "label {c} exceeds the {MAX_LABELS}-label limit"
                )));
            }
            mask |= 1 << c;
        }
        if mask == 0 {
            return Err(Error::contract("candidate set is empty"));
        }
        Ok(CandidateSet(mask))
    }

    pub fn singleton(label: usize) -> Result<Self> {
        Self::new(&[label])
    }

    pub(crate) fn from_mask(mask: u64) -> Self {
        debug_assert!(mask != 0);
        CandidateSet(mask)
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_singleton(&self) -> bool {
        self.0.is_power_of_two()
    }

    pub fn contains(&self, label: usize) -> bool {
        label < MAX_LABELS && self.0 & (1 << label) != 0
    }

    /// Largest label in the set.
    pub fn max_label(&self) -> usize {
        63 - self.0.leading_zeros() as usize
    }

    /// Labels in increasing order.
    pub fn labels(&self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let c = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(c)
        })
    }
}

impl fmt::Debug for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.labels()).finish()
    }
}

/// The candidate sets collected for one instance in one repetition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRound(Vec<CandidateSet>);

impl AnnotationRound {
    pub fn new(sets: Vec<CandidateSet>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::contract("annotation round has no annotators"));
        }
        Ok(AnnotationRound(sets))
    }

    pub fn sets(&self) -> &[CandidateSet] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws `b ~ Dirichlet(β₀·d)`.
///
/// A difficulty entry that underflowed to zero gets zero behavior mass, the
/// limit of a vanishing Dirichlet parameter.
pub fn sample_behavior(
    stream: &mut RandomStream,
    difficulty: &ProbabilityVector,
    beta0: f64,
) -> Result<BehaviorProfile> {
    if !(beta0.is_finite() && beta0 > 0.0) {
        return Err(Error::invalid(format!("beta0 = {beta0}, must be > 0")));
    }
    let params: Vec<f64> = difficulty.as_slice().iter().map(|&d| beta0 * d).collect();
    if params.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("beta0 · d(c) is not finite"));
    }
    let weights = crate::sampling::dirichlet_weights(stream, &params)?;
    Ok(BehaviorProfile(ProbabilityVector::from_weights(weights)?))
}

/// `s` draws with replacement from the behavior; the distinct labels form the
/// candidate set.
pub fn generate_candidate_set(
    stream: &mut RandomStream,
    behavior: &BehaviorProfile,
    s: usize,
) -> Result<CandidateSet> {
    let r = behavior.0.len();
    if s == 0 || s > r {
        return Err(Error::invalid(format!("s = {s} violates 1 ≤ s ≤ r = {r}")));
    }
    if r > MAX_LABELS {
        return Err(Error::invalid(format!(
            "r = {r} exceeds the {MAX_LABELS}-label limit"
        )));
    }
    let mut mask = 0u64;
    for _ in 0..s {
        mask |= 1 << sample_categorical(stream, &behavior.0);
    }
    Ok(CandidateSet::from_mask(mask))
}

/// Behaviors for `l` annotators; annotator `j` uses `stream.child(&[j, 0])`.
pub fn sample_behaviors(
    stream: &RandomStream,
    difficulty: &ProbabilityVector,
    beta0: f64,
    l: usize,
) -> Result<Vec<BehaviorProfile>> {
    (0..l)
        .map(|j| {
            let mut s = stream.child(&[j as u64, BEHAVIOR_STREAM]);
            sample_behavior(&mut s, difficulty, beta0)
        })
        .collect()
}

/// One candidate set per behavior; annotator `j` draws from
/// `stream.child(&[j, 1])`.
pub fn annotate_with_behaviors(
    stream: &RandomStream,
    behaviors: &[BehaviorProfile],
    s: usize,
) -> Result<AnnotationRound> {
    let sets = behaviors
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let mut draws = stream.child(&[j as u64, DRAW_STREAM]);
            generate_candidate_set(&mut draws, b, s)
        })
        .collect::<Result<Vec<_>>>()?;
    AnnotationRound::new(sets)
}

/// `l` fresh annotators label one instance.
pub fn annotate_instance(
    stream: &RandomStream,
    difficulty: &ProbabilityVector,
    beta0: f64,
    l: usize,
    s: usize,
) -> Result<AnnotationRound> {
    if l == 0 {
        return Err(Error::invalid("l must be at least 1"));
    }
    let behaviors = sample_behaviors(stream, difficulty, beta0, l)?;
    annotate_with_behaviors(stream, &behaviors, s)
}
