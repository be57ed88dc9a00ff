//! Command-line front end.
//!
//! Every subcommand validates its whole input before it creates any output
//! file, so a rejected configuration leaves the output directory untouched.
//!
//! Exit codes: 0 success, 1 invalid configuration or input data, 2 I/O
//! failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::experiment::{
    export_curves, export_results, run_sweep, split_panels, CaseSpec, CurveAxis, ExportFormat,
    ResultRow, SweepSpec,
};
use crate::truthgen::ingest_probabilities;
use crate::voting::Scheme;

/// `n` and `m` of the `--fast` profile.
pub const FAST_N: usize = 100;
pub const FAST_M: usize = 20;

/// Rows listed by `ingest-check` on failure.
const MAX_REPORTED_ROWS: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "crowdcand",
    version,
    about = "Simulate crowd annotators with candidate sets and measure voting error"
)]
pub struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Master seed; overrides the seed in the configuration.
    #[arg(long, global = true, env = "CROWDCAND_SEED")]
    pub seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Format of the results table.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,

    /// Small profile for quick checks: n = 100 instances, m = 20 repetitions.
    #[arg(long, global = true)]
    pub fast: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Jsonl => ExportFormat::Jsonl,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a parameter sweep described by a JSON file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a single scenario described by a JSON file.
    Scenario {
        #[arg(long)]
        config: PathBuf,
    },
    /// Validate a class-probability CSV file and summarize it.
    IngestCheck {
        /// Path to the CSV file.
        path: PathBuf,
    },
    /// Run one of the built-in parameter grids.
    Replicate {
        #[arg(value_enum)]
        target: Target,
        /// Class-probability CSV (required for table2-grid).
        #[arg(long)]
        probs: Option<PathBuf>,
        /// Candidate-set bounds for table2-grid, e.g. `1,3,5`.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Fig2a,
    Fig2b,
    Fig2c,
    Fig3,
    Table2Grid,
}

impl Target {
    fn name(&self) -> &'static str {
        match self {
            Target::Fig2a => "fig2a",
            Target::Fig2b => "fig2b",
            Target::Fig2c => "fig2c",
            Target::Fig3 => "fig3",
            Target::Table2Grid => "table2-grid",
        }
    }
}

/// Single-scenario configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub case: CaseSpec,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    pub beta0: f64,
    pub l: usize,
    pub s: usize,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_true")]
    pub resample_behaviors: bool,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_n() -> usize {
    crate::experiment::DEFAULT_N
}

fn default_m() -> usize {
    crate::experiment::DEFAULT_M
}

fn default_true() -> bool {
    true
}

impl From<ScenarioFile> for SweepSpec {
    fn from(f: ScenarioFile) -> Self {
        SweepSpec {
            case: f.case,
            r: f.r.into_iter().collect(),
            alpha: f.alpha.into_iter().collect(),
            beta0: vec![f.beta0],
            l: vec![f.l],
            s: vec![f.s],
            scheme: f.scheme.map(|s| vec![s]),
            n: f.n,
            m: f.m,
            resample_behaviors: f.resample_behaviors,
            master_seed: f.master_seed,
        }
    }
}

/// Grid for a built-in replication target.
pub fn preset(target: Target, probs: Option<&Path>, s: Option<&[usize]>) -> Result<SweepSpec, Failure> {
    let fig2 = |r: usize, alpha: f64, s: Vec<usize>| SweepSpec {
        case: CaseSpec::A,
        r: vec![r],
        alpha: vec![alpha],
        beta0: vec![4.0],
        l: (3..=20).collect(),
        s,
        scheme: None,
        n: crate::experiment::DEFAULT_N,
        m: crate::experiment::DEFAULT_M,
        resample_behaviors: true,
        master_seed: 0,
    };
    let spec = match target {
        Target::Fig2a => fig2(32, 0.5, vec![1, 6, 11, 16]),
        Target::Fig2b => fig2(32, 10.0, vec![1, 6, 11, 16]),
        Target::Fig2c => fig2(8, 0.5, vec![1, 2, 3]),
        Target::Fig3 => SweepSpec {
            alpha: vec![0.5, 2.0, 10.0],
            beta0: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            l: vec![8],
            ..fig2(32, 0.5, vec![1, 6, 11, 16])
        },
        Target::Table2Grid => {
            let path = probs.ok_or_else(|| {
                Failure::config(
                    "table2-grid needs real-data class probabilities: pass \
                     `--probs <file.csv>` with header instance_id,true_label,p_0,...,p_{r-1} \
                     (see `crowdcand ingest-check --help`)",
                )
            })?;
            let s = match s {
                Some(s) => s.to_vec(),
                None => {
                    let table = ingest_probabilities(path).map_err(Failure::from_error)?;
                    default_table2_s(table.r)
                }
            };
            SweepSpec {
                case: CaseSpec::R(path.to_path_buf()),
                r: vec![],
                alpha: vec![],
                beta0: vec![1.0, 4.0, 16.0],
                l: vec![4, 8],
                s,
                ..fig2(0, 0.0, vec![])
            }
        }
    };
    Ok(spec)
}

/// `1, ⌈r/4⌉, ⌈r/2⌉` without duplicates.
pub fn default_table2_s(r: usize) -> Vec<usize> {
    let mut s = vec![1, r.div_ceil(4).max(2), r.div_ceil(2).max(3)];
    s.dedup();
    s.retain(|&v| v <= r);
    s
}

/// A failed invocation: message and exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn from_error(e: Error) -> Self {
        let code = if e.is_io() { 2 } else { 1 };
        let message = match e.root() {
            Error::Ingest { path, rows } => {
                let mut msg = format!(
                    "{}: {} offending row(s)",
                    path.display(),
                    rows.len()
                );
                for row in rows.iter().take(MAX_REPORTED_ROWS) {
                    msg.push_str(&format!("\n  {row}"));
                }
                if rows.len() > MAX_REPORTED_ROWS {
                    msg.push_str(&format!("\n  ... {} more", rows.len() - MAX_REPORTED_ROWS));
                }
                msg
            }
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

/// Line of the first `"field":` key in a JSON document, if any.
fn field_line(text: &str, field: &str) -> Option<usize> {
    let needle = format!("\"{field}\"");
    text.lines().enumerate().find_map(|(i, line)| {
        let pos = line.find(&needle)?;
        line[pos + needle.len()..]
            .trim_start()
            .starts_with(':')
            .then_some(i + 1)
    })
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, String), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let value = serde_json::from_str(&text).map_err(|e| {
        Failure::config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    Ok((value, text))
}

/// Attaches a line number to configuration errors that name a field.
fn config_failure(e: Error, path: &Path, text: &str) -> Failure {
    if let Error::Config { field, message } = e.root() {
        let line = field_line(text, field).unwrap_or(1);
        return Failure::config(format!("{}:{line}: `{field}`: {message}", path.display()));
    }
    Failure::from_error(e)
}

struct Options {
    out: PathBuf,
    seed: Option<u64>,
    workers: usize,
    format: ExportFormat,
    fast: bool,
}

impl Options {
    fn apply(&self, spec: &mut SweepSpec) {
        if let Some(seed) = self.seed {
            spec.master_seed = seed;
        }
        if self.fast {
            spec.n = FAST_N;
            spec.m = FAST_M;
        }
    }
}

fn write_bundle(
    opts: &Options,
    command: &str,
    spec: &SweepSpec,
    rows: &[ResultRow],
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let out = &opts.out;
    fs::create_dir_all(out).map_err(|e| Failure::from_error(Error::io(out, e)))?;
    let mut outputs = Vec::new();

    let results = out.join(format!("results.{}", opts.format.extension()));
    export_results(rows, &results, opts.format).map_err(Failure::from_error)?;
    outputs.push(file_name(&results));

    let mut axes = Vec::new();
    if spec.l.len() > 1 {
        axes.push(CurveAxis::L);
    }
    if spec.beta0.len() > 1 {
        axes.push(CurveAxis::Beta0);
    }
    if axes.is_empty() {
        axes.push(CurveAxis::L);
    }
    for axis in axes {
        for (suffix, panel) in split_panels(rows, axis) {
            let path = out.join(format!("curves_{}{suffix}.csv", axis.name()));
            export_curves(&panel, axis, &path).map_err(Failure::from_error)?;
            outputs.push(file_name(&path));
        }
    }

    let meta = json!({
        "tool": "crowdcand",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "master_seed": spec.master_seed,
        "config": spec,
        "scenarios": rows.len(),
        "ground_truth": "Case A difficulties are shared by all scenarios with equal (r, alpha, master_seed); \
                         behaviors and label draws are shared across l, s and scheme",
        "outputs": outputs,
    });
    let meta_path = out.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&meta_path, text + "\n").map_err(|e| Failure::from_error(Error::io(&meta_path, e)))?;

    writeln!(
        stdout,
        "{} scenario(s) written to {}",
        rows.len(),
        out.display()
    )
    .ok();
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run_spec(
    opts: &Options,
    command: &str,
    mut spec: SweepSpec,
    config_src: Option<(&Path, &str)>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    opts.apply(&mut spec);
    let fail = |e: Error| match config_src {
        Some((path, text)) => config_failure(e, path, text),
        None => Failure::from_error(e),
    };
    // validation (including Case R ingestion) happens before any output
    spec.scenarios().map_err(fail)?;
    let rows = run_sweep(&spec, opts.workers).map_err(fail)?;
    write_bundle(opts, command, &spec, &rows, stdout)
}

fn ingest_check(path: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let table = ingest_probabilities(path).map_err(Failure::from_error)?;
    writeln!(stdout, "file: {}", path.display()).ok();
    writeln!(stdout, "n: {}", table.n()).ok();
    writeln!(stdout, "r: {}", table.r).ok();
    writeln!(
        stdout,
        "argmax_mismatch_rate: {:.6}",
        table.argmax_mismatch_rate()
    )
    .ok();
    Ok(())
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let opts = Options {
        out: cli.out,
        seed: cli.seed,
        workers: cli.workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }),
        format: cli.format.into(),
        fast: cli.fast,
    };
    if opts.workers == 0 {
        return Err(Failure::config("--workers must be at least 1"));
    }
    match cli.command {
        Command::Sweep { config } => {
            let (spec, text): (SweepSpec, String) = read_config(&config)?;
            run_spec(&opts, "sweep", spec, Some((&config, &text)), stdout)
        }
        Command::Scenario { config } => {
            let (file, text): (ScenarioFile, String) = read_config(&config)?;
            run_spec(&opts, "scenario", file.into(), Some((&config, &text)), stdout)
        }
        Command::IngestCheck { path } => ingest_check(&path, stdout),
        Command::Replicate { target, probs, s } => {
            let spec = preset(target, probs.as_deref(), s.as_deref())?;
            run_spec(
                &opts,
                &format!("replicate {}", target.name()),
                spec,
                None,
                stdout,
            )
        }
    }
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                write!(stdout, "{text}").ok();
            } else {
                write!(stderr, "{text}").ok();
            }
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(f) => {
            writeln!(stderr, "error: {}", f.message).ok();
            f.code
        }
    }
}
