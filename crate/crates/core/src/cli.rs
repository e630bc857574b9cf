//! Command-line front end: run specifications, figure presets and result files.
//!
//! Values are resolved in three layers: command-line flags override entries
//! of a `key=value` config file, which override the preset defaults.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receivers::ReceiverKind;
use crate::signal::Modulation;
use crate::sim::{
    ber_sweep, error_floor_sweep, BerRecord, TrialPlan, DEFAULT_MAX_TRIALS, DEFAULT_MIN_BIT_ERRORS,
};

pub const CSV_HEADER: [&str; 9] = [
    "snr_db",
    "receiver",
    "k",
    "n",
    "modulation",
    "trials",
    "bits",
    "bit_errors",
    "ber",
];

/// User counts of the error-floor preset.
pub const FIG2_USER_COUNTS: [usize; 8] = [2, 4, 6, 8, 10, 12, 14, 16];

/// Receivers of the error-floor preset; AQNM-MMSE and WFQ floors sit above
/// ZF and MMSE and are left out.
pub const FIG2_RECEIVERS: [ReceiverKind; 6] = [
    ReceiverKind::Mrc,
    ReceiverKind::Zf,
    ReceiverKind::Mmse,
    ReceiverKind::Bmrc,
    ReceiverKind::Bzf,
    ReceiverKind::Bmmse,
];

const DEFAULT_SNR_STEP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// K = 2, N = 16, QPSK, -10..30 dB
    Fig1a,
    /// K = 4, N = 64, 8-PSK, -10..30 dB
    Fig1b,
    /// error floors at 30 dB for K = 2..16, N = 8K, QPSK
    Fig2,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig2 => "fig2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Monte Carlo BER simulation of linear receivers with one-bit ADCs.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "simulate", version)]
pub struct SimulateArgs {
    /// Figure preset
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Number of users
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of base-station antennas
    #[arg(long)]
    pub n: Option<usize>,
    /// Modulation: qpsk, 8psk or 16qam
    #[arg(long = "mod", value_parser = parse_modulation)]
    pub modulation: Option<Modulation>,
    /// First SNR point (dB)
    #[arg(long, allow_hyphen_values = true)]
    pub snr_start: Option<f64>,
    /// Last SNR point (dB, inclusive)
    #[arg(long, allow_hyphen_values = true)]
    pub snr_stop: Option<f64>,
    /// SNR step (dB)
    #[arg(long)]
    pub snr_step: Option<f64>,
    /// Comma-separated receivers (mrc,zf,mmse,aqnm-mmse,wfq,bmrc,bzf,bmmse) or `all`
    #[arg(long)]
    pub receivers: Option<String>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial cap per SNR point
    #[arg(long)]
    pub max_trials: Option<u64>,
    /// Bit errors to collect before a point stops early
    #[arg(long)]
    pub min_bit_errors: Option<u64>,
    /// Skip the one-bit quantizer
    #[arg(long)]
    pub unquantized: bool,
    /// Output format
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Flat key=value file with the same keys as the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_modulation(s: &str) -> std::result::Result<Modulation, String> {
    s.parse::<Modulation>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    /// BER over an SNR grid at fixed dimensions.
    Sweep(TrialPlan),
    /// Error floors over user counts; `template` carries receivers, seed and
    /// trial budget.
    ErrorFloor { ks: Vec<usize>, template: TrialPlan },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub preset: Option<Preset>,
    pub experiment: Experiment,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

impl RunSpec {
    pub fn seed(&self) -> u64 {
        match &self.experiment {
            Experiment::Sweep(p) => p.seed,
            Experiment::ErrorFloor { template, .. } => template.seed,
        }
    }

    pub fn run(&self) -> Result<Vec<BerRecord>> {
        match &self.experiment {
            Experiment::Sweep(plan) => ber_sweep(plan, self.workers),
            Experiment::ErrorFloor { ks, template } => error_floor_sweep(ks, template, self.workers),
        }
    }
}

/// Parses command-line arguments (first item is the program name) and any
/// config file they reference.
pub fn parse_run_spec<I, T>(args: I) -> Result<RunSpec>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = SimulateArgs::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    resolve(cli)
}

/// Merges a parsed command line with its config file and preset.
pub fn resolve(cli: SimulateArgs) -> Result<RunSpec> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("--config: cannot read {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => SimulateArgs::default(),
    };
    build_run_spec(merge(cli, file))
}

/// Parses a flat `key=value` file. Keys are flag names without the leading
/// dashes; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<SimulateArgs> {
    let mut argv = vec!["simulate".to_string()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Usage(format!(
                "--config line {}: expected key=value, got `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(Error::Usage(
                "--config: nested config files are not supported".into(),
            ));
        }
        if key == "unquantized" {
            match value {
                "true" | "1" | "yes" => argv.push("--unquantized".into()),
                "false" | "0" | "no" => {}
                other => {
                    return Err(Error::Usage(format!(
                        "--unquantized: expected true/false, got `{other}`"
                    )))
                }
            }
            continue;
        }
        argv.push(format!("--{key}={value}"));
    }
    SimulateArgs::try_parse_from(argv).map_err(|e| Error::Usage(format!("--config: {e}")))
}

fn merge(cli: SimulateArgs, file: SimulateArgs) -> SimulateArgs {
    SimulateArgs {
        preset: cli.preset.or(file.preset),
        k: cli.k.or(file.k),
        n: cli.n.or(file.n),
        modulation: cli.modulation.or(file.modulation),
        snr_start: cli.snr_start.or(file.snr_start),
        snr_stop: cli.snr_stop.or(file.snr_stop),
        snr_step: cli.snr_step.or(file.snr_step),
        receivers: cli.receivers.or(file.receivers),
        seed: cli.seed.or(file.seed),
        max_trials: cli.max_trials.or(file.max_trials),
        min_bit_errors: cli.min_bit_errors.or(file.min_bit_errors),
        unquantized: cli.unquantized || file.unquantized,
        format: cli.format.or(file.format),
        out: cli.out.or(file.out),
        workers: cli.workers.or(file.workers),
        config: cli.config,
    }
}

/// Parses `mrc,bzf` or `all`.
pub fn parse_receivers(list: &str) -> Result<Vec<ReceiverKind>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(ReceiverKind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let kind = ReceiverKind::from_str(token)
            .map_err(|_| Error::Usage(format!("--receivers: unknown receiver `{token}`")))?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(Error::Usage("--receivers: empty receiver list".into()));
    }
    Ok(kinds)
}

/// Inclusive grid `start, start + step, …, stop`.
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !start.is_finite() || !stop.is_finite() {
        return Err(Error::Usage("--snr-start/--snr-stop must be finite".into()));
    }
    if stop < start {
        return Err(Error::Usage(format!(
            "--snr-stop {stop} is below --snr-start {start}"
        )));
    }
    if stop == start {
        return Ok(vec![start]);
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Usage(format!("--snr-step must be positive, got {step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn build_run_spec(args: SimulateArgs) -> Result<RunSpec> {
    let kinds_override = args.receivers.as_deref().map(parse_receivers).transpose()?;
    let seed = args.seed.unwrap_or(0);
    let max_trials = args.max_trials.unwrap_or(DEFAULT_MAX_TRIALS);
    if max_trials == 0 {
        return Err(Error::Usage("--max-trials must be at least 1".into()));
    }
    let min_bit_errors = args.min_bit_errors.unwrap_or(DEFAULT_MIN_BIT_ERRORS);
    let finish = |plan: TrialPlan| {
        plan.with_seed(seed)
            .with_trials(max_trials, min_bit_errors)
            .with_quantized(!args.unquantized)
    };

    let experiment = match args.preset {
        Some(Preset::Fig2) => {
            for (flag, set) in [
                ("--k", args.k.is_some()),
                ("--n", args.n.is_some()),
                ("--mod", args.modulation.is_some()),
                ("--snr-start", args.snr_start.is_some()),
                ("--snr-stop", args.snr_stop.is_some()),
                ("--snr-step", args.snr_step.is_some()),
            ] {
                if set {
                    return Err(Error::Usage(format!(
                        "{flag} cannot be combined with --preset fig2 (N = 8K, QPSK, 30 dB are fixed)"
                    )));
                }
            }
            let kinds = kinds_override.unwrap_or_else(|| FIG2_RECEIVERS.to_vec());
            let template = TrialPlan {
                k: FIG2_USER_COUNTS[0],
                n: 8 * FIG2_USER_COUNTS[0],
                modulation: Modulation::Qpsk,
                kinds,
                snr_db_grid: vec![crate::sim::ERROR_FLOOR_SNR_DB],
                max_trials,
                min_bit_errors,
                seed,
                quantized: true,
            };
            Experiment::ErrorFloor {
                ks: FIG2_USER_COUNTS.to_vec(),
                template: finish(template),
            }
        }
        preset => {
            let (k0, n0, m0, start0, stop0, step0) = match preset {
                Some(Preset::Fig1a) => (
                    Some(2),
                    Some(16),
                    Some(Modulation::Qpsk),
                    Some(-10.0),
                    Some(30.0),
                    Some(5.0),
                ),
                Some(Preset::Fig1b) => (
                    Some(4),
                    Some(64),
                    Some(Modulation::Psk8),
                    Some(-10.0),
                    Some(30.0),
                    Some(5.0),
                ),
                _ => (None, None, None, None, None, None),
            };
            let k = args.k.or(k0).ok_or_else(|| missing("--k"))?;
            let n = args.n.or(n0).ok_or_else(|| missing("--n"))?;
            let modulation = args.modulation.or(m0).ok_or_else(|| missing("--mod"))?;
            if k == 0 {
                return Err(Error::Usage("--k must be at least 1".into()));
            }
            if n < k {
                return Err(Error::Usage(format!(
                    "--n {n} is smaller than --k {k} (need N >= K)"
                )));
            }
            let start = args.snr_start.or(start0).ok_or_else(|| missing("--snr-start"))?;
            let stop = args.snr_stop.or(stop0).unwrap_or(start);
            let step = args.snr_step.or(step0).unwrap_or(DEFAULT_SNR_STEP);
            let grid = snr_grid(start, stop, step)?;
            let kinds = kinds_override.unwrap_or_else(|| ReceiverKind::ALL.to_vec());
            let plan =
                TrialPlan::new(k, n, modulation, kinds, grid).map_err(|e| Error::Usage(e.to_string()))?;
            Experiment::Sweep(finish(plan))
        }
    };

    Ok(RunSpec {
        preset: args.preset,
        experiment,
        format: args.format.unwrap_or_default(),
        out: args.out,
        workers: args.workers.unwrap_or(0),
    })
}

fn missing(flag: &str) -> Error {
    Error::Usage(format!("{flag} is required without --preset"))
}

/// Run metadata for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub git_describe: String,
    pub timestamp: String,
}

impl RunMeta {
    pub fn now(seed: u64) -> Self {
        Self {
            seed,
            git_describe: git_describe().to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

pub fn git_describe() -> &'static str {
    option_env!("ONEBIT_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

#[derive(Serialize)]
struct JsonReport<'a> {
    meta: &'a RunMeta,
    records: &'a [BerRecord],
}

/// Records ordered by receiver (declaration order), then SNR, then K.
pub fn sorted_records(records: &[BerRecord]) -> Vec<BerRecord> {
    let mut out = records.to_vec();
    out.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.k.cmp(&b.k))
    });
    out
}

fn format_snr(snr_db: f64) -> String {
    // avoid "-0"
    format!("{}", if snr_db == 0.0 { 0.0 } else { snr_db })
}

/// BER with six significant digits, e.g. `3.00000e-4`.
pub fn format_ber(ber: f64) -> String {
    format!("{ber:.5e}")
}

pub fn write_csv<W: Write>(records: &[BerRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in sorted_records(records) {
        w.write_record([
            format_snr(r.snr_db),
            r.kind.token().to_string(),
            r.k.to_string(),
            r.n.to_string(),
            r.modulation.token().to_string(),
            r.trials.to_string(),
            r.bits.to_string(),
            r.bit_errors.to_string(),
            format_ber(r.ber),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_csv(records: &[BerRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
}

pub fn render_json(records: &[BerRecord], meta: &RunMeta) -> Result<String> {
    let sorted = sorted_records(records);
    Ok(serde_json::to_string_pretty(&JsonReport {
        meta,
        records: &sorted,
    })?)
}

/// Parses a results CSV back into records; `ber` is recomputed from counts.
pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<BerRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected CSV header {header:?}")));
    }
    let bad = |field: &str, value: &str| Error::InvalidConfig(format!("bad {field} `{value}`"));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let parse_u = |i: usize| field(i).parse::<u64>().map_err(|_| bad(CSV_HEADER[i], field(i)));
        let snr_db = field(0).parse::<f64>().map_err(|_| bad("snr_db", field(0)))?;
        let kind = ReceiverKind::from_str(field(1)).map_err(|_| bad("receiver", field(1)))?;
        let modulation = Modulation::from_str(field(4)).map_err(|_| bad("modulation", field(4)))?;
        let record = BerRecord::new(
            snr_db,
            kind,
            parse_u(2)? as usize,
            parse_u(3)? as usize,
            modulation,
            parse_u(5)?,
            parse_u(7)?,
        );
        if record.bits != parse_u(6)? {
            return Err(bad("bits", field(6)));
        }
        out.push(record);
    }
    Ok(out)
}

/// Writes `records` to `path` (or standard output). Nothing is created when
/// `records` is empty.
pub fn emit_results(
    records: &[BerRecord],
    format: OutputFormat,
    path: Option<&Path>,
    meta: &RunMeta,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to write".into()));
    }
    let text = match format {
        OutputFormat::Csv => render_csv(records)?,
        OutputFormat::Json => render_json(records, meta)? + "\n",
    };
    match path {
        Some(p) => File::create(p)?.write_all(text.as_bytes())?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs a resolved spec end to end.
pub fn execute(spec: &RunSpec) -> Result<Vec<BerRecord>> {
    let records = spec.run()?;
    let meta = RunMeta::now(spec.seed());
    emit_results(&records, spec.format, spec.out.as_deref(), &meta)?;
    Ok(records)
}

/// Process exit status for an error: 2 for usage errors, 1 otherwise.
pub fn exit_status(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => 2,
        _ => 1,
    }
}
