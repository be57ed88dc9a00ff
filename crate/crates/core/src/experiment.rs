//! Scenario runner, parameter sweeps and result export.
//!
//! A scenario generates (or loads) one dataset and then, for every instance,
//! repeats annotation and voting `m` times, counting the aggregated labels.
//! The counts give the error and its bias/variance split.
//!
//! Random streams are laid out so that results are a pure function of the
//! configuration and master seed:
//!
//! | purpose       | derivation path                                   |
//! |---------------|---------------------------------------------------|
//! | ground truth  | `[0, r, alpha bits, instance]`                    |
//! | annotation    | `[1, key, instance, repetition, annotator, 0 / 1]` |
//! | tie-breaking  | `[2, key, instance, repetition]`                  |
//!
//! `key` mixes `r`, `alpha` (or a Case R tag) and `beta0`; it does not depend
//! on `l`, `s` or the voting scheme. Scenarios that differ only in those
//! therefore share ground truth, behaviors and label draws (the first `s`
//! draws of a larger `s` are the draws of the smaller one), which makes
//! comparisons between them paired. With frozen behaviors the repetition
//! element of the behavior path is replaced by `u64::MAX`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotators::{annotate_with_behaviors, sample_behaviors, MAX_LABELS};
use crate::error::{Error, Result};
use crate::evaluation::{ErrorReport, FrequencyTable};
use crate::sampling::{derive_stream, mix64, MIN_LABELS};
use crate::truthgen::{build_case_r_dataset, generate_case_a, ingest_probabilities, Dataset};
use crate::voting::{aggregate, Scheme};

pub const DEFAULT_N: usize = 500;
pub const DEFAULT_M: usize = 100;

const TRUTH_STREAM: u64 = 0;
const ANNOTATION_STREAM: u64 = 1;
const TIE_STREAM: u64 = 2;
const FROZEN_REPETITION: u64 = u64::MAX;
const CASE_R_TAG: u64 = 0x5245_414c; // "REAL"

/// Where difficulties come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CaseSpec {
    /// Artificial Dirichlet domain.
    A,
    /// Class-probability CSV file.
    R(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub case: CaseSpec,
    /// Label count. For Case R it is read from the file.
    pub r: usize,
    /// Instance count. For Case R it is read from the file.
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub s: usize,
    /// Case A only.
    pub alpha: Option<f64>,
    pub beta0: f64,
    pub scheme: Scheme,
    pub resample_behaviors: bool,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Case A scenario with the reference `n`, `m` and the natural voting
    /// scheme for `s`.
    pub fn case_a(r: usize, alpha: f64, beta0: f64, l: usize, s: usize, master_seed: u64) -> Self {
        ScenarioConfig {
            case: CaseSpec::A,
            r,
            n: DEFAULT_N,
            m: DEFAULT_M,
            l,
            s,
            alpha: Some(alpha),
            beta0,
            scheme: Scheme::natural_for(s),
            resample_behaviors: true,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_LABELS..=MAX_LABELS).contains(&self.r) {
            return Err(Error::config(
                "r",
                format!("r = {} must satisfy {MIN_LABELS} ≤ r ≤ {MAX_LABELS}", self.r),
            ));
        }
        if self.s < 1 || self.s > self.r {
            return Err(Error::config(
                "s",
                format!("s = {} violates 1 ≤ s ≤ r (r = {})", self.s, self.r),
            ));
        }
        if self.l < 1 {
            return Err(Error::config("l", "l must be at least 1"));
        }
        if self.m < 1 || self.m > u32::MAX as usize {
            return Err(Error::config("m", "m must be at least 1"));
        }
        if self.n < 1 {
            return Err(Error::config("n", "n must be at least 1"));
        }
        if !(self.beta0.is_finite() && self.beta0 > 0.0) {
            return Err(Error::config("beta0", "beta0 must be a positive real"));
        }
        match (&self.case, self.alpha) {
            (CaseSpec::A, Some(a)) if a.is_finite() && a > 0.0 => {}
            (CaseSpec::A, _) => {
                return Err(Error::config("alpha", "Case A needs a positive alpha"))
            }
            (CaseSpec::R(_), Some(_)) => {
                return Err(Error::config("alpha", "alpha is not used in Case R"))
            }
            (CaseSpec::R(_), None) => {}
        }
        if self.scheme == Scheme::Full && self.s != 1 {
            return Err(Error::config(
                "scheme",
                format!("full voting needs single labels (s = 1), got s = {}", self.s),
            ));
        }
        Ok(())
    }

    fn stream_key(&self) -> u64 {
        let alpha_part = match self.case {
            CaseSpec::A => self.alpha.unwrap_or(0.0).to_bits(),
            CaseSpec::R(_) => CASE_R_TAG,
        };
        let mut h = mix64(self.r as u64);
        h = mix64(h ^ alpha_part);
        mix64(h ^ self.beta0.to_bits())
    }
}

/// One scenario's parameters and results.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub case: String,
    pub r: usize,
    pub n: usize,
    pub m: usize,
    pub alpha: Option<f64>,
    pub beta0: f64,
    pub l: usize,
    pub s: usize,
    pub scheme: Scheme,
    pub resample_behaviors: bool,
    pub master_seed: u64,
    pub error: f64,
    pub bias_squared: f64,
    pub variance: f64,
    pub tie_rate: f64,
    /// Not exported; timing would break byte-identical output.
    pub wall_time: Duration,
}

pub const RESULTS_HEADER: [&str; 15] = [
    "case",
    "r",
    "n",
    "m",
    "alpha",
    "beta0",
    "l",
    "s",
    "scheme",
    "resample_behaviors",
    "master_seed",
    "error",
    "bias_squared",
    "variance",
    "tie_rate",
];

fn real(x: f64) -> String {
    format!("{x:.6}")
}

impl ResultRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.case.clone(),
            self.r.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.alpha.map_or_else(|| "NA".to_string(), real),
            real(self.beta0),
            self.l.to_string(),
            self.s.to_string(),
            self.scheme.to_string(),
            self.resample_behaviors.to_string(),
            self.master_seed.to_string(),
            real(self.error),
            real(self.bias_squared),
            real(self.variance),
            real(self.tie_rate),
        ]
    }

    /// Parses a record written by [`ResultRow::to_record`]. `wall_time` is
    /// not part of the record and comes back as zero.
    pub fn from_record(record: &csv::StringRecord) -> Result<Self> {
        if record.len() != RESULTS_HEADER.len() {
            return Err(Error::invalid(format!(
                "result record has {} fields, expected {}",
                record.len(),
                RESULTS_HEADER.len()
            )));
        }
        fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
            rec[i].parse().map_err(|_| {
                Error::invalid(format!("bad `{}` value `{}`", RESULTS_HEADER[i], &rec[i]))
            })
        }
        Ok(ResultRow {
            case: record[0].to_string(),
            r: num(record, 1)?,
            n: num(record, 2)?,
            m: num(record, 3)?,
            alpha: match &record[4] {
                "NA" => None,
                _ => Some(num(record, 4)?),
            },
            beta0: num(record, 5)?,
            l: num(record, 6)?,
            s: num(record, 7)?,
            scheme: record[8].parse()?,
            resample_behaviors: num(record, 9)?,
            master_seed: num(record, 10)?,
            error: num(record, 11)?,
            bias_squared: num(record, 12)?,
            variance: num(record, 13)?,
            tie_rate: num(record, 14)?,
            wall_time: Duration::ZERO,
        })
    }
}

/// Loads the dataset a scenario runs on.
pub fn load_dataset(config: &ScenarioConfig) -> Result<Dataset> {
    match &config.case {
        CaseSpec::A => {
            let alpha = config
                .alpha
                .ok_or_else(|| Error::config("alpha", "Case A needs alpha"))?;
            let stream = derive_stream(
                config.master_seed,
                &[TRUTH_STREAM, config.r as u64, alpha.to_bits()],
            );
            generate_case_a(&stream, config.n, config.r, alpha)
                .map_err(|e| e.in_step("generating ground truth"))
        }
        CaseSpec::R(path) => {
            let table =
                ingest_probabilities(path).map_err(|e| e.in_step("loading class probabilities"))?;
            build_case_r_dataset(&table, &path.display().to_string())
                .map_err(|e| e.in_step("building difficulties"))
        }
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ResultRow> {
    if config.case == CaseSpec::A {
        config.validate()?;
    }
    let dataset = load_dataset(config)?;
    run_scenario_on(config, &dataset)
}

/// Runs the annotation/voting repetitions of `config` on a prepared dataset.
/// `r` and `n` are taken from the dataset.
pub fn run_scenario_on(config: &ScenarioConfig, dataset: &Dataset) -> Result<ResultRow> {
    let start = Instant::now();
    let config = ScenarioConfig {
        r: dataset.r(),
        n: dataset.n(),
        ..config.clone()
    };
    config.validate()?;

    let key = config.stream_key();
    let seed = config.master_seed;
    let r = config.r;
    let per_instance = dataset
        .profiles()
        .par_iter()
        .enumerate()
        .map(|(i, profile)| -> Result<(Vec<u32>, u64)> {
            let i = i as u64;
            let mut counts = vec![0u32; r];
            let mut ties = 0u64;
            let frozen = if config.resample_behaviors {
                None
            } else {
                let s = derive_stream(seed, &[ANNOTATION_STREAM, key, i, FROZEN_REPETITION]);
                Some(sample_behaviors(&s, &profile.difficulty, config.beta0, config.l)?)
            };
            for rep in 0..config.m as u64 {
                let stream = derive_stream(seed, &[ANNOTATION_STREAM, key, i, rep]);
                let resampled;
                let behaviors = match &frozen {
                    Some(b) => b,
                    None => {
                        resampled =
                            sample_behaviors(&stream, &profile.difficulty, config.beta0, config.l)?;
                        &resampled
                    }
                };
                let round = annotate_with_behaviors(&stream, behaviors, config.s)?;
                let mut tie_stream = derive_stream(seed, &[TIE_STREAM, key, i, rep]);
                let winner = aggregate(&round, config.scheme, r, &mut tie_stream)?;
                counts[winner.label] += 1;
                ties += winner.tied() as u64;
            }
            Ok((counts, ties))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_step("annotating and voting"))?;

    let mut counts = Vec::with_capacity(dataset.n() * r);
    let mut ties = 0u64;
    for (c, t) in per_instance {
        counts.extend(c);
        ties += t;
    }
    let freqs = FrequencyTable::from_counts(counts, r)?;
    let tie_rate = ties as f64 / (dataset.n() * config.m) as f64;
    let report = ErrorReport::new(&freqs, &dataset.truths(), tie_rate)
        .map_err(|e| e.in_step("estimating error"))?;

    Ok(ResultRow {
        case: match config.case {
            CaseSpec::A => "A".into(),
            CaseSpec::R(_) => "R".into(),
        },
        r,
        n: config.n,
        m: config.m,
        alpha: config.alpha,
        beta0: config.beta0,
        l: config.l,
        s: config.s,
        scheme: config.scheme,
        resample_behaviors: config.resample_behaviors,
        master_seed: seed,
        error: report.error,
        bias_squared: report.bias_squared,
        variance: report.variance,
        tie_rate: report.tie_rate,
        wall_time: start.elapsed(),
    })
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_m() -> usize {
    DEFAULT_M
}

fn default_true() -> bool {
    true
}

/// Cross product of parameter lists.
///
/// Expansion order, outermost first: `r`, `alpha`, `beta0`, `l`, `s`,
/// `scheme`. When `scheme` is omitted each `s` uses its natural scheme (full
/// voting for `s = 1`, candidate voting otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub case: CaseSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub r: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    pub beta0: Vec<f64>,
    pub l: Vec<usize>,
    pub s: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Vec<Scheme>>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_true")]
    pub resample_behaviors: bool,
    #[serde(default)]
    pub master_seed: u64,
}

impl SweepSpec {
    /// Expands the spec. For Case R, `case_r_shape` carries `(r, n)` as read
    /// from the probability file.
    fn expand(&self, case_r_shape: Option<(usize, usize)>) -> Result<Vec<ScenarioConfig>> {
        fn nonempty<T>(field: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::config(field, "list must not be empty"));
            }
            Ok(())
        }
        let (rs, alphas, n): (Vec<usize>, Vec<Option<f64>>, usize) = match (&self.case, case_r_shape)
        {
            (CaseSpec::A, _) => {
                nonempty("r", &self.r)?;
                nonempty("alpha", &self.alpha)?;
                (self.r.clone(), self.alpha.iter().map(|&a| Some(a)).collect(), self.n)
            }
            (CaseSpec::R(_), Some((r, n))) => {
                if !self.r.is_empty() {
                    return Err(Error::config("r", "r is read from the probability file in Case R"));
                }
                if !self.alpha.is_empty() {
                    return Err(Error::config("alpha", "alpha is not used in Case R"));
                }
                (vec![r], vec![None], n)
            }
            (CaseSpec::R(_), None) => unreachable!("Case R expansion needs the file shape"),
        };
        nonempty("beta0", &self.beta0)?;
        nonempty("l", &self.l)?;
        nonempty("s", &self.s)?;
        if let Some(schemes) = &self.scheme {
            nonempty("scheme", schemes)?;
        }

        let mut out = Vec::new();
        for &r in &rs {
            for &alpha in &alphas {
                for &beta0 in &self.beta0 {
                    for &l in &self.l {
                        for &s in &self.s {
                            let schemes = match &self.scheme {
                                Some(v) => v.clone(),
                                None => vec![Scheme::natural_for(s)],
                            };
                            for scheme in schemes {
                                let config = ScenarioConfig {
                                    case: self.case.clone(),
                                    r,
                                    n,
                                    m: self.m,
                                    l,
                                    s,
                                    alpha,
                                    beta0,
                                    scheme,
                                    resample_behaviors: self.resample_behaviors,
                                    master_seed: self.master_seed,
                                };
                                config.validate()?;
                                out.push(config);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Validates the spec and returns its scenarios. Case R specs read the
    /// probability file to learn `r` and `n`.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        match &self.case {
            CaseSpec::A => self.expand(None),
            CaseSpec::R(_) => {
                let probe = ScenarioConfig {
                    case: self.case.clone(),
                    r: 0,
                    n: 0,
                    m: self.m,
                    l: 1,
                    s: 1,
                    alpha: None,
                    beta0: 1.0,
                    scheme: Scheme::Full,
                    resample_behaviors: true,
                    master_seed: self.master_seed,
                };
                let ds = load_dataset(&probe)?;
                self.expand(Some((ds.r(), ds.n())))
            }
        }
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Runs every scenario of the sweep. Output order follows the expansion
/// order and does not depend on `workers`.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<ResultRow>> {
    let scenarios = spec.scenarios()?;
    let pool = thread_pool(workers)?;
    pool.install(|| {
        let mut datasets: HashMap<(usize, u64), Arc<Dataset>> = HashMap::new();
        let mut rows = Vec::with_capacity(scenarios.len());
        for (idx, config) in scenarios.iter().enumerate() {
            let context = || {
                format!(
                    "scenario {idx} (r={}, alpha={:?}, beta0={}, l={}, s={})",
                    config.r, config.alpha, config.beta0, config.l, config.s
                )
            };
            let cache_key = (config.r, config.alpha.map_or(CASE_R_TAG, f64::to_bits));
            let dataset = match datasets.get(&cache_key) {
                Some(ds) => ds.clone(),
                None => {
                    let ds = Arc::new(load_dataset(config).map_err(|e| e.in_step(context()))?);
                    datasets.insert(cache_key, ds.clone());
                    ds
                }
            };
            rows.push(run_scenario_on(config, &dataset).map_err(|e| e.in_step(context()))?);
        }
        Ok(rows)
    })
}

/// Like [`run_scenario_on`] inside a pool of `workers` threads.
pub fn run_scenario_with_workers(
    config: &ScenarioConfig,
    dataset: &Dataset,
    workers: usize,
) -> Result<ResultRow> {
    thread_pool(workers)?.install(|| run_scenario_on(config, dataset))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Jsonl => "jsonl",
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    case: &'a str,
    r: usize,
    n: usize,
    m: usize,
    alpha: Option<f64>,
    beta0: f64,
    l: usize,
    s: usize,
    scheme: Scheme,
    resample_behaviors: bool,
    master_seed: u64,
    error: f64,
    bias_squared: f64,
    variance: f64,
    tie_rate: f64,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl<'a> From<&'a ResultRow> for JsonRow<'a> {
    fn from(row: &'a ResultRow) -> Self {
        JsonRow {
            case: &row.case,
            r: row.r,
            n: row.n,
            m: row.m,
            alpha: row.alpha.map(round6),
            beta0: round6(row.beta0),
            l: row.l,
            s: row.s,
            scheme: row.scheme,
            resample_behaviors: row.resample_behaviors,
            master_seed: row.master_seed,
            error: round6(row.error),
            bias_squared: round6(row.bias_squared),
            variance: round6(row.variance),
            tie_rate: round6(row.tie_rate),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W, format: ExportFormat) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<results>", e);
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(RESULTS_HEADER).map_err(|e| io_err(e.into()))?;
            for row in rows {
                w.write_record(row.to_record()).map_err(|e| io_err(e.into()))?;
            }
            w.flush().map_err(io_err)
        }
        ExportFormat::Jsonl => {
            let mut out = out;
            for row in rows {
                serde_json::to_writer(&mut out, &JsonRow::from(row))
                    .map_err(|e| io_err(e.into()))?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            out.flush().map_err(io_err)
        }
    }
}

/// Writes the rows to `destination` with a fixed column order.
pub fn export_results(rows: &[ResultRow], destination: &Path, format: ExportFormat) -> Result<()> {
    let file = create(destination)?;
    write_results(rows, file, format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(destination, source),
        other => other,
    })
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    rdr.records()
        .map(|rec| ResultRow::from_record(&rec.map_err(|e| Error::io(path, e.into()))?))
        .collect()
}

/// Horizontal axis of a curve file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveAxis {
    L,
    Beta0,
}

impl CurveAxis {
    pub fn name(&self) -> &'static str {
        match self {
            CurveAxis::L => "l",
            CurveAxis::Beta0 => "beta0",
        }
    }

    fn x(&self, row: &ResultRow) -> String {
        match self {
            CurveAxis::L => row.l.to_string(),
            CurveAxis::Beta0 => real(row.beta0),
        }
    }

    fn x_value(&self, row: &ResultRow) -> f64 {
        match self {
            CurveAxis::L => row.l as f64,
            CurveAxis::Beta0 => row.beta0,
        }
    }
}

/// Series name for a row: `s=<s>`, with the scheme appended when it is not
/// the natural one for `s`.
pub fn series_label(row: &ResultRow) -> String {
    if row.scheme == Scheme::natural_for(row.s) {
        format!("s={}", row.s)
    } else {
        format!("s={}/{}", row.s, row.scheme)
    }
}

/// Parameters that must agree within one curve panel.
#[derive(Debug, Clone, PartialEq)]
struct PanelKey {
    case: String,
    r: usize,
    n: usize,
    m: usize,
    alpha: Option<u64>,
    other_axis: u64,
    resample_behaviors: bool,
    master_seed: u64,
}

fn panel_key(row: &ResultRow, axis: CurveAxis) -> PanelKey {
    PanelKey {
        case: row.case.clone(),
        r: row.r,
        n: row.n,
        m: row.m,
        alpha: row.alpha.map(f64::to_bits),
        other_axis: match axis {
            CurveAxis::L => row.beta0.to_bits(),
            CurveAxis::Beta0 => row.l as u64,
        },
        resample_behaviors: row.resample_behaviors,
        master_seed: row.master_seed,
    }
}

pub const CURVES_HEADER: [&str; 5] = ["x", "series", "error", "bias_squared", "variance"];

/// Long-format curve table: one line per (series, x), series ordered by `s`
/// and points by `x`.
pub fn write_curves<W: Write>(rows: &[ResultRow], axis: CurveAxis, out: W) -> Result<()> {
    if let Some(first) = rows.first() {
        let key = panel_key(first, axis);
        if let Some(bad) = rows.iter().find(|r| panel_key(r, axis) != key) {
            return Err(Error::config(
                axis.name(),
                format!(
                    "rows differ in parameters other than {} and s: {:?} vs {:?}",
                    axis.name(),
                    key,
                    panel_key(bad, axis)
                ),
            ));
        }
    }
    let mut ordered: Vec<&ResultRow> = rows.iter().collect();
    ordered.sort_by(|a, b| {
        (a.s, a.scheme.as_str())
            .cmp(&(b.s, b.scheme.as_str()))
            .then(axis.x_value(a).total_cmp(&axis.x_value(b)))
    });
    for pair in ordered.windows(2) {
        if series_label(pair[0]) == series_label(pair[1]) && axis.x(pair[0]) == axis.x(pair[1]) {
            return Err(Error::config(
                axis.name(),
                format!(
                    "duplicate point x={} in series {}",
                    axis.x(pair[0]),
                    series_label(pair[0])
                ),
            ));
        }
    }
    let io_err = |e: csv::Error| Error::io("<curves>", e.into());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVES_HEADER).map_err(io_err)?;
    for row in ordered {
        w.write_record([
            axis.x(row),
            series_label(row),
            real(row.error),
            real(row.bias_squared),
            real(row.variance),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io("<curves>", e))
}

pub fn export_curves(rows: &[ResultRow], axis: CurveAxis, destination: &Path) -> Result<()> {
    // validate before touching the filesystem
    write_curves(rows, axis, std::io::sink())?;
    let file = create(destination)?;
    write_curves(rows, axis, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(destination, source),
        other => other,
    })
}

/// Splits rows into groups that each form a valid curve panel for `axis`.
/// Each group comes with a file-name suffix naming the parameters that vary
/// between groups (empty when there is a single group). Groups keep first
/// appearance order.
pub fn split_panels(rows: &[ResultRow], axis: CurveAxis) -> Vec<(String, Vec<ResultRow>)> {
    let mut groups: Vec<(PanelKey, Vec<ResultRow>)> = Vec::new();
    for row in rows {
        let key = panel_key(row, axis);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(row.clone()),
            None => groups.push((key, vec![row.clone()])),
        }
    }
    if groups.len() == 1 {
        let (_, g) = groups.pop().unwrap();
        return vec![(String::new(), g)];
    }
    let varies = |f: &dyn Fn(&PanelKey) -> String| {
        groups.iter().any(|(k, _)| f(k) != f(&groups[0].0))
    };
    let other_axis = match axis {
        CurveAxis::L => "beta0",
        CurveAxis::Beta0 => "l",
    };
    type Field<'a> = (&'a str, Box<dyn Fn(&PanelKey) -> String>);
    let fields: Vec<Field> = vec![
        ("r", Box::new(|k: &PanelKey| k.r.to_string())),
        (
            "alpha",
            Box::new(|k: &PanelKey| k.alpha.map_or("NA".into(), |b| fmt_short(f64::from_bits(b)))),
        ),
        (
            other_axis,
            Box::new(move |k: &PanelKey| match axis {
                CurveAxis::L => fmt_short(f64::from_bits(k.other_axis)),
                CurveAxis::Beta0 => k.other_axis.to_string(),
            }),
        ),
        ("n", Box::new(|k: &PanelKey| k.n.to_string())),
        ("m", Box::new(|k: &PanelKey| k.m.to_string())),
    ];
    let varying: Vec<_> = fields.into_iter().filter(|(_, f)| varies(f.as_ref())).collect();
    groups
        .into_iter()
        .enumerate()
        .map(|(idx, (key, rows))| {
            let mut suffix: String = varying
                .iter()
                .map(|(name, f)| format!("_{name}-{}", f(&key)))
                .collect();
            if suffix.is_empty() {
                suffix = format!("_panel-{idx}");
            }
            (suffix, rows)
        })
        .collect()
}

fn fmt_short(x: f64) -> String {
    x.to_string()
}
