//! Instance difficulties and ground-truth labels.
//!
//! Two sources are supported: fully artificial domains drawn from a symmetric
//! Dirichlet (`generate_case_a`), and domains derived from per-instance class
//! probabilities of some upstream classifier, read from a CSV file and
//! smoothed away from zero (`ingest_probabilities` + `build_case_r_dataset`).
//!
//! # Class-probability CSV
//!
//! ```text
//! instance_id,true_label,p_0,p_1,...,p_{r-1}
//! 17,2,0.05,0.15,0.8
//! ```
//!
//! UTF-8, comma separated, no quoting, one row per instance. `true_label` is
//! a 0-based index below `r`, and `r ≥ 3` is inferred from the header. Each
//! probability row must be non-negative and sum to one within `1e-6`; rows
//! inside the tolerance are renormalized. The probabilities are expected to
//! come from a classifier that did not see the instance during training
//! (held-out or cross-validated predictions); how they were produced is up to
//! the data producer.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result, RowError};
use crate::sampling::{sample_dirichlet, ProbabilityVector, RandomStream, MIN_LABELS};

/// Tolerance on the row sums of an ingested probability file.
pub const INGEST_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyProfile {
    pub difficulty: ProbabilityVector,
    pub true_label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    CaseA { alpha: f64 },
    CaseR { source: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    profiles: Vec<DifficultyProfile>,
    r: usize,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(profiles: Vec<DifficultyProfile>, provenance: Provenance) -> Result<Self> {
        let first = profiles.first().ok_or(Error::EmptyDataset)?;
        let r = first.difficulty.len();
        for (i, p) in profiles.iter().enumerate() {
            if p.difficulty.len() != r {
                return Err(Error::invalid(format!(
                    "instance {i} has {} labels, expected {r}",
                    p.difficulty.len()
                )));
            }
            if p.true_label >= r {
                return Err(Error::invalid(format!(
                    "instance {i} has true label {} outside [0, {r})",
                    p.true_label
                )));
            }
        }
        Ok(Dataset {
            profiles,
            r,
            provenance,
        })
    }

    pub fn profiles(&self) -> &[DifficultyProfile] {
        &self.profiles
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.profiles.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn truths(&self) -> Vec<usize> {
        self.profiles.iter().map(|p| p.true_label).collect()
    }
}

/// Artificial domain: `n` difficulties from Dirichlet(α, …, α) over `r`
/// labels, each labeled by its (lowest-index) argmax.
///
/// Instance `i` draws from `stream.child(&[i])`, so a prefix of a larger
/// dataset equals the smaller dataset.
pub fn generate_case_a(stream: &RandomStream, n: usize, r: usize, alpha: f64) -> Result<Dataset> {
    if r < MIN_LABELS {
        return Err(Error::invalid(format!("r = {r}, need r ≥ {MIN_LABELS}")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha = {alpha}, must be > 0")));
    }
    let params = vec![alpha; r];
    let profiles = (0..n)
        .map(|i| {
            let mut s = stream.child(&[i as u64]);
            let difficulty = sample_dirichlet(&mut s, &params)?;
            let true_label = difficulty.argmax();
            Ok(DifficultyProfile {
                difficulty,
                true_label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(profiles, Provenance::CaseA { alpha })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRow {
    pub instance_id: String,
    pub true_label: usize,
    pub probs: ProbabilityVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilityTable {
    pub r: usize,
    pub rows: Vec<ProbabilityRow>,
}

impl ClassProbabilityTable {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Fraction of rows whose most probable class is not the true label.
    /// This is the error of the upstream classifier, a floor for any voting
    /// scheme run on the derived difficulties.
    pub fn argmax_mismatch_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let wrong = self
            .rows
            .iter()
            .filter(|row| row.probs.argmax() != row.true_label)
            .count();
        wrong as f64 / self.rows.len() as f64
    }
}

/// Reads and validates a class-probability CSV file.
///
/// All offending rows are collected; the error lists them in file order.
pub fn ingest_probabilities(path: impl AsRef<Path>) -> Result<ClassProbabilityTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_probabilities(file, path)
}

/// Parses the CSV format from any reader; `path` is only used in messages.
pub fn parse_probabilities<R: Read>(reader: R, path: &Path) -> Result<ClassProbabilityTable> {
    let header_err = |message: String| Error::IngestHeader {
        path: PathBuf::from(path),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| header_err(e.to_string()))?,
        None => return Err(header_err("file is empty".into())),
    };
    let r = header.len().saturating_sub(2);
    if r < MIN_LABELS {
        return Err(header_err(format!(
            "header has {} probability columns, need at least {MIN_LABELS}",
            r
        )));
    }
    let expected: Vec<String> = ["instance_id".to_string(), "true_label".to_string()]
        .into_iter()
        .chain((0..r).map(|c| format!("p_{c}")))
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(header_err(format!(
            "header must be `{}`",
            expected.join(",")
        )));
    }

    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (k, rec) in records.enumerate() {
        // header is line 1
        let fallback_line = k + 2;
        let rec = match rec {
            Ok(rec) => rec,
            Err(e) => {
                bad.push(RowError {
                    line: fallback_line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(fallback_line);
        match parse_row(&rec, r) {
            Ok(row) => rows.push(row),
            Err(message) => bad.push(RowError { line, message }),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Ingest {
            path: PathBuf::from(path),
            rows: bad,
        });
    }
    Ok(ClassProbabilityTable { r, rows })
}

fn parse_row(rec: &csv::StringRecord, r: usize) -> std::result::Result<ProbabilityRow, String> {
    if rec.len() != r + 2 {
        return Err(format!("expected {} fields, found {}", r + 2, rec.len()));
    }
    let instance_id = rec[0].to_string();
    let true_label: usize = rec[1]
        .parse()
        .map_err(|_| format!("true_label `{}` is not a label index", &rec[1]))?;
    if true_label >= r {
        return Err(format!("true_label {true_label} outside [0, {r})"));
    }
    let probs = rec
        .iter()
        .skip(2)
        .enumerate()
        .map(|(c, field)| match field.parse::<f64>() {
            Ok(p) if p.is_finite() && p >= 0.0 => Ok(p),
            _ => Err(format!("p_{c} = `{field}` is not a probability")),
        })
        .collect::<std::result::Result<Vec<f64>, String>>()?;
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > INGEST_TOL {
        return Err(format!("probabilities sum to {sum}, expected 1"));
    }
    let probs = ProbabilityVector::from_weights(probs).map_err(|e| e.to_string())?;
    Ok(ProbabilityRow {
        instance_id,
        true_label,
        probs,
    })
}

/// Mixes class probabilities with the uniform distribution,
/// `d(c) = (r·p(c) + 1) / (2r)`, so every label keeps probability at least
/// `1/(2r)`.
pub fn smooth_probabilities(p: &ProbabilityVector, r: usize) -> Result<ProbabilityVector> {
    if p.len() != r {
        return Err(Error::invalid(format!(
            "probability vector has {} entries, expected {r}",
            p.len()
        )));
    }
    let rf = r as f64;
    let d = p
        .as_slice()
        .iter()
        .map(|&pc| (rf * pc + 1.0) / (2.0 * rf))
        .collect();
    ProbabilityVector::new(d)
}

/// Difficulties for a real-data domain. The true label is copied from the
/// table and may differ from the most probable class.
pub fn build_case_r_dataset(table: &ClassProbabilityTable, source: &str) -> Result<Dataset> {
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let profiles = table
        .rows
        .iter()
        .map(|row| {
            Ok(DifficultyProfile {
                difficulty: smooth_probabilities(&row.probs, table.r)?,
                true_label: row.true_label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        profiles,
        Provenance::CaseR {
            source: source.to_string(),
        },
    )
}
