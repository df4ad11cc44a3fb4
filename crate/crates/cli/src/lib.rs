//! Subcommands behind the `abductor` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use abductor_core::corrupt::corrupt;
use abductor_core::eval::{self, match_beats, EvalSummary, RecordScore};
use abductor_core::pipeline::{interpret, InterpretConfig, InterpretOutput};
use abductor_core::signal::SignalError;
use abductor_core::{AnnotationList, SignalRecord};
use clap::{Args, Parser, Subcommand};

/// Corrects QRS beat annotations by abductive interpretation.
#[derive(Debug, Parser)]
#[command(name = "abductor", version)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interpret a record and write the corrected annotations.
    Interpret(RunConfig),
    /// Drop and insert beats in an annotation file.
    Corrupt(CorruptConfig),
    /// Score annotations against a reference.
    Eval(EvalConfig),
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Signal CSV ("fs=<hz>" header, one sample row per line).
    #[arg(long, env = "ABDUCTOR_SIGNAL")]
    pub signal: Option<PathBuf>,
    /// Input annotations ("time_ms,label").
    #[arg(long, env = "ABDUCTOR_ANN")]
    pub ann: PathBuf,
    #[arg(long, env = "ABDUCTOR_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "ABDUCTOR_FRAGMENT_MS", default_value_t = 30_000)]
    pub fragment_ms: i64,
    #[arg(long, env = "ABDUCTOR_OVERLAP_MS", default_value_t = 3_000)]
    pub overlap_ms: i64,
    /// Open-list width (defaults to the model's own).
    #[arg(long, env = "ABDUCTOR_K")]
    pub k: Option<usize>,
    /// Node expansions per fragment before the open list is cut.
    #[arg(long, env = "ABDUCTOR_BUDGET", default_value_t = 10_000)]
    pub budget: usize,
    /// Also limit each fragment's search to the fragment's duration.
    #[arg(long, env = "ABDUCTOR_REALTIME")]
    pub realtime: bool,
    #[arg(long, env = "ABDUCTOR_CHANNEL", default_value_t = 0)]
    pub channel: usize,
    /// Dyadic wavelet scale.
    #[arg(long, env = "ABDUCTOR_SCALE", default_value_t = 4)]
    pub scale: u32,
    /// Worker threads (defaults to the number of processors).
    #[arg(long, env = "ABDUCTOR_JOBS")]
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn new(ann: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        let d = InterpretConfig::default();
        RunConfig {
            signal: None,
            ann: ann.into(),
            out: out.into(),
            fragment_ms: d.fragment_ms,
            overlap_ms: d.overlap_ms,
            k: d.k,
            budget: d.budget,
            realtime: d.realtime,
            channel: 0,
            scale: d.scale,
            jobs: d.jobs,
        }
    }

    pub fn interpret_config(&self) -> InterpretConfig {
        InterpretConfig {
            fragment_ms: self.fragment_ms,
            overlap_ms: self.overlap_ms,
            k: self.k,
            budget: self.budget,
            realtime: self.realtime,
            scale: self.scale,
            jobs: self.jobs,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorruptConfig {
    #[arg(long, env = "ABDUCTOR_ANN")]
    pub ann: PathBuf,
    #[arg(long, env = "ABDUCTOR_OUT")]
    pub out: PathBuf,
    /// Spurious beats to insert, as a fraction of the input count.
    #[arg(long = "fp", env = "ABDUCTOR_FP", default_value_t = 0.0)]
    pub fp_rate: f64,
    /// Probability of dropping each beat.
    #[arg(long = "fn", env = "ABDUCTOR_FN", default_value_t = 0.0)]
    pub fn_rate: f64,
    #[arg(long, env = "ABDUCTOR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Signal whose duration bounds the spurious beats; without it the
    /// last annotation does.
    #[arg(long, env = "ABDUCTOR_SIGNAL")]
    pub signal: Option<PathBuf>,
    #[arg(long, env = "ABDUCTOR_CHANNEL", default_value_t = 0)]
    pub channel: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalConfig {
    /// Annotations to score: a file, or a directory of `<record>.csv` files.
    #[arg(long, env = "ABDUCTOR_TEST")]
    pub test: PathBuf,
    /// Reference annotations, laid out like `--test`.
    #[arg(long = "ref", env = "ABDUCTOR_REF")]
    pub reference: PathBuf,
    /// Uncorrected annotations, laid out like `--test`.
    #[arg(long, env = "ABDUCTOR_BASELINE")]
    pub baseline: Option<PathBuf>,
    #[arg(long, env = "ABDUCTOR_TOL_MS", default_value_t = eval::DEFAULT_TOLERANCE_MS)]
    pub tol_ms: i64,
    /// Also write the report as CSV.
    #[arg(long, env = "ABDUCTOR_CSV")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<abductor_core::Error> for CliError {
    fn from(e: abductor_core::Error) -> Self {
        use abductor_core::Error as E;
        match e {
            E::Signal(s) => CliError::Io(s.to_string()),
            E::Config(_) | E::Wavelet(_) | E::Rate(_) => CliError::Usage(e.to_string()),
            E::Invariant(_) | E::Model(_) => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn load_signal(path: Option<&Path>, channel: usize) -> Result<Option<Arc<SignalRecord>>, CliError> {
    path.map(|p| SignalRecord::read_csv(p, channel).map(Arc::new))
        .transpose()
        .map_err(CliError::from)
}

/// Interprets one record and writes the corrected annotations to `out`.
pub fn cmd_interpret(cfg: &RunConfig) -> Result<InterpretOutput, CliError> {
    let icfg = cfg.interpret_config();
    icfg.validate()?;
    let signal = load_signal(cfg.signal.as_deref(), cfg.channel)?;
    let ann = AnnotationList::read(&cfg.ann)?;
    let out = interpret(signal.as_ref(), &ann, &icfg)?;
    out.annotations.write(&cfg.out)?;
    log::info!(
        "{} annotations in, {} out, {} fragments",
        ann.len(),
        out.annotations.len(),
        out.fragments.len()
    );
    Ok(out)
}

/// Writes a corrupted copy of the input annotations.
pub fn cmd_corrupt(cfg: &CorruptConfig) -> Result<AnnotationList, CliError> {
    let ann = AnnotationList::read(&cfg.ann)?;
    let duration = match load_signal(cfg.signal.as_deref(), cfg.channel)? {
        Some(s) => s.duration_ms(),
        None => ann.times().last().map_or(0, |&t| t + 1),
    };
    let out = corrupt(&ann, duration, cfg.fp_rate, cfg.fn_rate, cfg.seed).map_err(abductor_core::Error::from)?;
    out.write(&cfg.out)?;
    Ok(out)
}

/// `<stem> -> path` for every `.csv` file in `dir`, or the single file.
fn record_files(path: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if path.is_dir() {
        let mut out = BTreeMap::new();
        for entry in fs::read_dir(path).map_err(io)? {
            let p = entry.map_err(io)?.path();
            if p.extension().is_some_and(|e| e == "csv") {
                if let Some(stem) = p.file_stem() {
                    out.insert(stem.to_string_lossy().into_owned(), p);
                }
            }
        }
        Ok(out)
    } else if path.is_file() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(BTreeMap::from([(stem, path.to_path_buf())]))
    } else {
        Err(CliError::Io(format!("{}: no such file or directory", path.display())))
    }
}

/// Pairs records by name; a single file on each side pairs regardless of name.
fn pair(
    test: &BTreeMap<String, PathBuf>,
    other: &BTreeMap<String, PathBuf>,
    other_name: &str,
    directories: bool,
) -> Result<Vec<PathBuf>, CliError> {
    if !directories {
        return Ok(other.values().cloned().collect());
    }
    let missing: Vec<String> = test
        .keys()
        .filter(|k| !other.contains_key(*k))
        .map(|k| format!("{k} (no {other_name})"))
        .chain(
            other
                .keys()
                .filter(|k| !test.contains_key(*k))
                .map(|k| format!("{k} (no test)")),
        )
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Io(format!("record sets differ: {}", missing.join(", "))));
    }
    Ok(other.values().cloned().collect())
}

/// Scores test (and optionally baseline) annotations against references.
pub fn cmd_eval(cfg: &EvalConfig) -> Result<EvalSummary, CliError> {
    if cfg.tol_ms < 0 {
        return Err(CliError::Usage("tolerance must be non-negative".into()));
    }
    let directories = cfg.test.is_dir();
    if cfg.reference.is_dir() != directories || cfg.baseline.as_ref().is_some_and(|b| b.is_dir() != directories) {
        return Err(CliError::Usage("--test, --ref and --baseline must all be files or all directories".into()));
    }
    let tests = record_files(&cfg.test)?;
    let refs = pair(&tests, &record_files(&cfg.reference)?, "reference", directories)?;
    let baselines = cfg
        .baseline
        .as_ref()
        .map(|b| pair(&tests, &record_files(b)?, "baseline", directories))
        .transpose()?;
    let mut rows = Vec::with_capacity(tests.len());
    for (i, (name, test_path)) in tests.iter().enumerate() {
        let reference = AnnotationList::read(&refs[i])?.times();
        let test = AnnotationList::read(test_path)?.times();
        let baseline = match &baselines {
            Some(b) => Some(match_beats(&AnnotationList::read(&b[i])?.times(), &reference, cfg.tol_ms)),
            None => None,
        };
        rows.push(RecordScore {
            record: name.clone(),
            baseline,
            after: match_beats(&test, &reference, cfg.tol_ms),
        });
    }
    let summary = eval::summarize(rows);
    if let Some(path) = &cfg.csv {
        let file = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        summary
            .write_csv(file)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(summary)
}

/// Runs a parsed command line, printing what the command reports.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Interpret(cfg) => {
            cmd_interpret(cfg)?;
        }
        Command::Corrupt(cfg) => {
            cmd_corrupt(cfg)?;
        }
        Command::Eval(cfg) => print!("{}", cmd_eval(cfg)?.table()),
    }
    Ok(())
}
