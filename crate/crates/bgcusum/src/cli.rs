//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE`, a JSON object whose keys are
//! long flag names (`{"trials": 5000, "target-arl": 500}`). Its values are
//! applied first, so flags given on the command line win. Exit codes: 0
//! alarm (or success), 10 stream ended without alarm, 1 usage error, 2 data
//! error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use bgcusum_core::n_selection::choose_n_with_sweep;
use bgcusum_core::{
    is_distinguishable, smallest_distinguishable_n, BinPartition, Detector, DetectorConfig,
    NSelectionParams,
};
use clap::{Args, Parser, Subcommand};

use crate::bench::{self, ExperimentFile, Overrides, Runner};
use crate::error::Error;
use crate::evaluation::Harness;
use crate::input::SampleReader;
use crate::model::{load_model, load_partition, read_json, save_partition, PartitionArtifact};
use crate::report::{write_csv, Row};

pub const EXIT_ALARM: i32 = 0;
pub const EXIT_NO_ALARM: i32 = 10;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bgcusum", version, about = "Binned generalized CuSum change detection")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a bin partition from an analytic model or reference samples.
    Calibrate(CalibrateArgs),
    /// Run the detector over a stream.
    Detect(DetectArgs),
    /// Smallest bin count meeting a moment-separation requirement.
    ChooseN(ChooseNArgs),
    /// Whether (or from which bin count on) two models differ on some bin.
    CheckDistinguishable(CheckArgs),
    /// Monte Carlo experiments, written as CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Samples, one per line, or a CSV file with --column; `-` is stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV column (by header name) holding the samples.
    #[arg(long)]
    pub column: Option<String>,
    /// Fail on malformed values instead of skipping them.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// JSON config whose values act as defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Analytic pre-change model (JSON).
    #[arg(long, conflicts_with = "input")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of continuous bins.
    #[arg(long)]
    pub n: usize,
    /// Where to write the partition artifact (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// JSON config whose values act as defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Partition artifact written by `calibrate`.
    #[arg(long, conflicts_with = "model")]
    pub partition: Option<PathBuf>,
    /// Analytic pre-change model, binned on the fly with --n.
    #[arg(long, requires = "n")]
    pub model: Option<PathBuf>,
    /// Number of continuous bins for --model.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub input: InputArgs,
    /// Regularization R (defaults to the bin count N).
    #[arg(long)]
    pub r: Option<f64>,
    /// Alarm threshold.
    #[arg(long)]
    pub b: f64,
    /// Stop after this many samples.
    #[arg(long)]
    pub cap: Option<u64>,
    /// Write the per-sample trace (t,x,bin,stat,lambda) as CSV to --out.
    #[arg(long, requires = "out")]
    pub trace: bool,
    /// Trace CSV with --trace, otherwise a JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChooseNArgs {
    /// JSON config whose values act as defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pre-change model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Moment order.
    #[arg(long)]
    pub k: u32,
    /// Required moment separation.
    #[arg(long)]
    pub eps: f64,
    /// Tail constant C in |x|^(k+1+xi) pdf(x) <= C.
    #[arg(long)]
    pub c: f64,
    /// Tail exponent xi.
    #[arg(long)]
    pub xi: f64,
    /// Give up beyond this many bins.
    #[arg(long, default_value_t = 1 << 20)]
    pub n_max: usize,
    /// Write the sweep (n,m_n,M_n) as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// JSON config whose values act as defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pre-change model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Post-change model (JSON).
    #[arg(long)]
    pub post_model: PathBuf,
    /// Check this bin count only.
    #[arg(long)]
    pub n: Option<usize>,
    /// Search bound when --n is not given.
    #[arg(long, default_value_t = 1024)]
    pub n_max: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON config: flag values plus an optional `experiments` list.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in suite: table1, table2, table3, prop1, smoke.
    #[arg(long)]
    pub experiment: Option<String>,
    /// Trials per experiment (overrides the suite).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed; trial i uses stream i of it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Bin count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Regularization R.
    #[arg(long)]
    pub r: Option<f64>,
    /// Fixed threshold (skips calibration).
    #[arg(long)]
    pub b: Option<f64>,
    /// Calibrate the threshold to this ARL.
    #[arg(long)]
    pub target_arl: Option<f64>,
    /// Change point (1-based).
    #[arg(long)]
    pub nu: Option<u64>,
    /// Maximum samples per trial.
    #[arg(long)]
    pub cap: Option<u64>,
    /// CSV destination (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fill the `seconds` column (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidExperiment(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<bgcusum_core::Error> for Failure {
    fn from(e: bgcusum_core::Error) -> Self {
        Error::from(e).into()
    }
}

fn write_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Error::io(path, e).into()
}

/// Parses `args` (including the program name), runs the command, and
/// returns the exit code.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(a, stdout),
        Command::Detect(a) => cmd_detect(a, stdout, stderr),
        Command::ChooseN(a) => cmd_choose_n(a, stdout),
        Command::CheckDistinguishable(a) => cmd_check(a, stdout),
        Command::Bench(a) => cmd_bench(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// Inserts the flags from a `--config` JSON object right after the
/// subcommand name, ahead of the user's own flags.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let value: serde_json::Value = read_json(&path).map_err(|e| Failure::usage(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Failure::usage(format!("{}: config must be a JSON object", path.display())))?;
    let mut injected = Vec::new();
    for (key, v) in obj {
        if key == "experiments" {
            continue;
        }
        let flag = OsString::from(format!("--{key}"));
        match v {
            serde_json::Value::Bool(true) => injected.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => {
                injected.push(flag);
                injected.push(s.into());
            }
            serde_json::Value::Number(n) => {
                injected.push(flag);
                injected.push(n.to_string().into());
            }
            _ => return Err(Failure::usage(format!("config key {key:?}: expected a scalar"))),
        }
    }
    // program name, subcommand, then config values, then the command line
    let mut out = Vec::with_capacity(args.len() + injected.len());
    let mut iter = args.into_iter();
    out.extend(iter.next());
    out.extend(iter.next());
    out.extend(injected);
    out.extend(iter);
    Ok(out)
}

fn open_input(path: &Path) -> Result<Box<dyn Read>, Failure> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin()));
    }
    let f = File::open(path).map_err(|e| Failure::from(Error::io(path, e)))?;
    Ok(Box::new(io::BufReader::new(f)))
}

fn sample_reader(args: &InputArgs) -> Result<SampleReader, Failure> {
    let path = args.input.as_deref().ok_or_else(|| Failure::usage("--input is required"))?;
    let reader = open_input(path)?;
    Ok(match &args.column {
        Some(col) => SampleReader::csv_column(reader, col, args.strict)?,
        None => SampleReader::lines(reader, args.strict),
    })
}

fn report_skipped(reader: &SampleReader, stderr: &mut dyn Write) {
    for (line, why) in reader.skipped() {
        let _ = writeln!(stderr, "warning: line {line}: {why} (skipped)");
    }
}

fn cmd_calibrate(a: CalibrateArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if a.n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let partition = match &a.model {
        Some(path) => BinPartition::from_pdf(&load_model(path)?, a.n)?,
        None => {
            let reader = sample_reader(&a.input)?;
            let mut samples = Vec::new();
            let mut reader = reader;
            for x in reader.by_ref() {
                samples.push(x?);
            }
            BinPartition::from_samples(&samples, a.n, &[], 1.0, &[])?
        }
    };
    match &a.out {
        Some(path) => {
            save_partition(path, &partition)?;
            let z = partition.boundaries();
            let _ = writeln!(stdout, "N = {}, {} boundaries, atoms = {}", a.n, z.len(), partition.atoms().len());
            if let (Some(first), Some(last)) = (z.first(), z.last()) {
                let _ = writeln!(stdout, "z_1 = {first}, z_{} = {last}", z.len());
            }
            let _ = writeln!(stdout, "wrote {}", path.display());
        }
        None => {
            let text = serde_json::to_string_pretty(&PartitionArtifact::from(&partition)).expect("plain data serializes");
            let _ = writeln!(stdout, "{text}");
        }
    }
    Ok(0)
}

fn cmd_detect(a: DetectArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let partition = match (&a.partition, &a.model, a.n) {
        (Some(p), _, _) => load_partition(p)?,
        (None, Some(m), Some(n)) => BinPartition::from_pdf(&load_model(m)?, n)?,
        _ => return Err(Failure::usage("give --partition, or --model with --n")),
    };
    let r = a.r.unwrap_or(partition.n_continuous() as f64);
    let config = DetectorConfig::new(r, a.b).map_err(|e| Failure::usage(e.to_string()))?;
    let mut reader = sample_reader(&a.input)?;
    let cap = a.cap.unwrap_or(u64::MAX);

    let mut trace = if a.trace {
        let path = a.out.as_deref().expect("clap enforces --out");
        let f = File::create(path).map_err(write_err(path))?;
        let mut w = csv::Writer::from_writer(io::BufWriter::new(f));
        w.write_record(["t", "x", "bin", "stat", "lambda"]).map_err(Error::from)?;
        Some(w)
    } else {
        None
    };

    let mut det = Detector::new(config, &partition);
    let mut alarmed = false;
    while det.state().t() < cap {
        let Some(x) = reader.next() else { break };
        let x = match x {
            Ok(x) => x,
            Err(e) => {
                report_skipped(&reader, stderr);
                return Err(e.into());
            }
        };
        let step = det.step(x);
        if let Some(w) = trace.as_mut() {
            let t = det.state().t();
            w.write_record([
                t.to_string(),
                x.to_string(),
                (step.bin + 1).to_string(),
                step.stat.to_string(),
                step.lambda.to_string(),
            ])
            .map_err(Error::from)?;
        }
        if det.alarmed() {
            alarmed = true;
            break;
        }
    }
    report_skipped(&reader, stderr);
    if let Some(mut w) = trace {
        w.flush().map_err(|e| Failure::from(Error::io("<trace>", e)))?;
    }
    let s = det.state();
    let _ = writeln!(stdout, "alarm: {}", if alarmed { "yes" } else { "no" });
    let _ = writeln!(stdout, "tau: {}", s.t());
    let _ = writeln!(stdout, "lambda: {}", s.lambda());
    let _ = writeln!(stdout, "stat: {}", s.stat());
    if let (false, Some(path)) = (a.trace, &a.out) {
        let summary = serde_json::json!({
            "alarm": alarmed,
            "tau": s.t(),
            "lambda": s.lambda(),
            "stat": s.stat(),
            "skipped": reader.skipped().len(),
        });
        std::fs::write(path, format!("{summary:#}\n")).map_err(write_err(path))?;
    }
    Ok(if alarmed { EXIT_ALARM } else { EXIT_NO_ALARM })
}

fn cmd_choose_n(a: ChooseNArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let f = load_model(&a.model)?;
    let params = NSelectionParams::new(a.k, a.eps, a.c, a.xi).map_err(|e| Failure::usage(e.to_string()))?;
    let (n, sweep) = choose_n_with_sweep(&f, &params, a.n_max)?;
    if let Some(path) = &a.out {
        let file = File::create(path).map_err(write_err(path))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["n", "m_n", "M_n"]).map_err(Error::from)?;
        for row in &sweep {
            let (lo, hi) = match row.bounds {
                Some((lo, hi)) => (lo.to_string(), hi.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([row.n.to_string(), lo, hi]).map_err(Error::from)?;
        }
        w.flush().map_err(write_err(path))?;
    }
    let _ = writeln!(stdout, "{n}");
    Ok(0)
}

fn cmd_check(a: CheckArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let f = load_model(&a.model)?;
    let g = load_model(&a.post_model)?;
    match a.n {
        Some(n) => {
            let d = is_distinguishable(&f, &g, n)?;
            let _ = writeln!(stdout, "{d}");
        }
        None => match smallest_distinguishable_n(&f, &g, a.n_max)? {
            Some(n) => {
                let _ = writeln!(stdout, "{n}");
            }
            None => {
                let _ = writeln!(stdout, "none up to {}", a.n_max);
            }
        },
    }
    Ok(0)
}

fn cmd_bench(a: BenchArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if a.trials == Some(0) {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let mut defs = match &a.experiment {
        Some(name) => bench::preset(name).ok_or_else(|| {
            Failure::usage(format!("unknown experiment {name:?}; known: {}", bench::PRESETS.join(", ")))
        })?,
        None => Vec::new(),
    };
    if let Some(path) = &a.config {
        let value: serde_json::Value = read_json(path)?;
        if value.get("experiments").is_some() {
            let file: ExperimentFile = serde_json::from_value(value).map_err(|source| Error::Json {
                path: path.clone(),
                source,
            })?;
            defs.extend(file.experiments);
        }
    }
    if defs.is_empty() {
        return Err(Failure::usage("bench needs --experiment or a --config with experiments"));
    }
    let harness = Harness::new(a.workers)?;
    let overrides = Overrides {
        n: a.n,
        r: a.r,
        b: a.b,
        target_arl: a.target_arl,
        nu: a.nu,
        trials: a.trials,
        cap: a.cap,
    };
    let rows: Vec<Row> = Runner::new(&harness, a.seed.unwrap_or(0)).run_all(&defs, &overrides)?;
    match &a.out {
        Some(path) => {
            let f = File::create(path).map_err(write_err(path))?;
            write_csv(io::BufWriter::new(f), &rows, a.timing)?;
        }
        None => write_csv(&mut *stdout, &rows, a.timing)?,
    }
    Ok(0)
}
