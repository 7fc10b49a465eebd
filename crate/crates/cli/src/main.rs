//! `loadcast`: trace ingestion, network training, simulation and the
//! experiment suite from the command line.
//!
//! Exit status is 0 on success, 1 when a command fails and 2 on bad usage.

mod plot;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use loadcast::ann::ModelDocument;
use loadcast::experiments::{
    self, builtin_cases, case_seed, load_catalog, run_case, run_suite, save_catalog, synth, CaseStatus,
    CaseTraining, DataCatalog, SynthKind,
};
use loadcast::trace::{self, MatchCalendar, PipelineOptions, RecordLayout, TraceFormat};
use loadcast::train::save_attempt_log;
use loadcast::{CaseConfig, LoopMode, Prediction, SplitSpec, SynthProfile, TimeSeries, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "loadcast", version, about = "Web workload forecasting with time-delay neural networks")]
struct Cli {
    /// Worker threads for parallel stages (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a directory of trace files into per-file epoch-requests tables.
    Ingest(IngestArgs),
    /// Count the requests in one trace file.
    Count(CountArgs),
    /// Sum per-file request counts into a day-requests table.
    AggregateDays(AggregateArgs),
    /// Train a network on a series and save the model.
    Train(TrainArgs),
    /// Run a saved model over a series.
    Simulate(SimulateArgs),
    /// Run one case or the whole experiment suite.
    Experiment(ExperimentArgs),
    /// Generate a synthetic workload.
    Synth(SynthArgs),
    /// Write a prediction table and a gnuplot script for it.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long, value_enum, default_value = "binary")]
    format: FormatArg,
    /// Byte offset of the timestamp within a binary record.
    #[arg(long, default_value_t = 0)]
    timestamp_offset: usize,
    /// Timestamp width in bytes (4 or 8).
    #[arg(long, default_value_t = 4)]
    timestamp_width: usize,
    /// Binary record size in bytes.
    #[arg(long, default_value_t = trace::RECORD_SIZE)]
    record_size: usize,
}

impl LayoutArgs {
    fn layout(&self) -> RecordLayout {
        RecordLayout {
            record_size: self.record_size,
            timestamp_offset: self.timestamp_offset,
            timestamp_width: self.timestamp_width,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Binary,
    Text,
}

impl From<FormatArg> for TraceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Binary => TraceFormat::Binary,
            FormatArg::Text => TraceFormat::Text,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Directory holding wc_day<D>_<P>[.gz] trace files.
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory for the .count.txt outputs.
    #[arg(long = "out")]
    output: PathBuf,
    /// Manifest path (default: <out>/manifest.tsv).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    layout: LayoutArgs,
}

#[derive(Args)]
struct CountArgs {
    file: PathBuf,
    /// Also write the per-second request table here.
    #[arg(long)]
    epochs: Option<PathBuf>,
    #[command(flatten)]
    layout: LayoutArgs,
}

#[derive(Args)]
struct AggregateArgs {
    /// Manifest written by `ingest`.
    #[arg(long, conflicts_with = "counts_dir", required_unless_present = "counts_dir")]
    manifest: Option<PathBuf>,
    /// Directory of .count.txt tables to sum instead of a manifest.
    #[arg(long)]
    counts_dir: Option<PathBuf>,
    /// DAY/MATCHES table (default: the 1998 tournament calendar).
    #[arg(long)]
    calendar: Option<PathBuf>,
    #[arg(long, default_value_t = 92)]
    days: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LoopArg {
    Open,
    Closed,
}

impl From<LoopArg> for LoopMode {
    fn from(l: LoopArg) -> Self {
        match l {
            LoopArg::Open => LoopMode::Open,
            LoopArg::Closed => LoopMode::Closed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Lm,
    Incremental,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum ScaleArg {
    Normalized,
    Original,
}

#[derive(Args)]
struct TrainArgs {
    /// day-requests or epoch-requests table.
    #[arg(long)]
    data: PathBuf,
    /// Model output (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Hidden layer sizes.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    hidden: Vec<usize>,
    /// Delays of the series itself.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    delays: Vec<usize>,
    /// Exogenous column (MATCHES or ISMATCH in day tables).
    #[arg(long, requires = "x_delays")]
    x_column: Option<String>,
    #[arg(long, value_delimiter = ',', requires = "x_column")]
    x_delays: Option<Vec<usize>>,
    /// Train/validation/test percentages.
    #[arg(long, default_value = "70/15/15")]
    split: String,
    #[arg(long, value_enum, default_value = "lm")]
    algorithm: AlgorithmArg,
    /// Loop mode used to simulate after training.
    #[arg(long = "loop", value_enum, default_value = "open")]
    loop_mode: LoopArg,
    #[arg(long, default_value_t = experiments::DEFAULT_ATTEMPTS)]
    attempts: usize,
    /// Use only the first N points.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write the per-attempt log (CSV) here.
    #[arg(long)]
    attempt_log: Option<PathBuf>,
    /// Write the post-training prediction table here.
    #[arg(long)]
    prediction: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "normalized")]
    scale: ScaleArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the loop mode stored in the model.
    #[arg(long = "loop", value_enum)]
    loop_mode: Option<LoopArg>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_enum, default_value = "normalized")]
    scale: ScaleArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Builtin,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Run the builtin case catalog.
    #[arg(long, value_enum, conflicts_with = "catalog")]
    suite: Option<SuiteArg>,
    /// Case catalog (JSON) to run instead of the builtin one.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Run only these case ids.
    #[arg(long = "case", value_delimiter = ',')]
    cases: Vec<String>,
    /// Dataset directory; synthetic data is used when absent.
    #[arg(long, env = "LOADCAST_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Results CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for model and prediction files.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Write the case catalog (JSON) here and exit.
    #[arg(long)]
    export_catalog: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    WorldcupDays,
    Day6Seconds,
    Day66Seconds,
}

impl From<ProfileArg> for SynthKind {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::WorldcupDays => SynthKind::WorldcupDays,
            ProfileArg::Day6Seconds => SynthKind::Day6Seconds,
            ProfileArg::Day66Seconds => SynthKind::Day66Seconds,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, required_unless_present = "data_dir")]
    profile: Option<ProfileArg>,
    #[arg(long, requires = "profile")]
    out: Option<PathBuf>,
    /// Write all three datasets the builtin cases use into this directory.
    #[arg(long, conflicts_with_all = ["profile", "out"])]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    length: Option<usize>,
    /// Also write the match calendar (day profile only).
    #[arg(long)]
    calendar: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Prediction table written by `train`, `simulate` or `experiment`.
    #[arg(long)]
    prediction: PathBuf,
    /// Output prefix; writes <prefix>.tsv and <prefix>.gp.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    title: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

/// The error chain on one line, dropping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Ingest(a) => ingest(a, cli.jobs),
        Command::Count(a) => count(a),
        Command::AggregateDays(a) => aggregate(a),
        Command::Train(a) => train(a),
        Command::Simulate(a) => simulate(a),
        Command::Experiment(a) => experiment(a),
        Command::Synth(a) => synthesize(a),
        Command::PlotData(a) => plot_data(a),
    }
}

fn ingest(a: IngestArgs, jobs: Option<usize>) -> Result<()> {
    if !a.input.is_dir() {
        bail!("input directory {} does not exist", a.input.display());
    }
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let options = PipelineOptions {
        format: a.layout.format.into(),
        layout: a.layout.layout(),
        jobs,
    };
    let manifest = trace::run_pipeline(&a.input, &a.output, &options)?;
    let manifest_path = a.manifest.unwrap_or_else(|| a.output.join("manifest.tsv"));
    manifest.save(&manifest_path)?;
    let failed: Vec<_> = manifest.failures().collect();
    for f in &failed {
        eprintln!("{}: {}", f.input.display(), f.error.as_deref().unwrap_or(""));
    }
    eprintln!(
        "{} files, {} failed, manifest {}",
        manifest.entries.len(),
        failed.len(),
        manifest_path.display()
    );
    if !failed.is_empty() {
        bail!("{} of {} trace files could not be read", failed.len(), manifest.entries.len());
    }
    Ok(())
}

fn count(a: CountArgs) -> Result<()> {
    let format = a.layout.format.into();
    let layout = a.layout.layout();
    let total = match &a.epochs {
        Some(out) => {
            let series = trace::try_count_duplicates(trace::stream_epochs_with(&a.file, format, layout)?)?;
            series.save(out)?;
            series.total_requests()
        }
        None => trace::count_requests_with(&a.file, format, layout)?,
    };
    println!("{total}");
    Ok(())
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let counts: Vec<(String, u64)> = match (&a.manifest, &a.counts_dir) {
        (Some(m), _) => {
            let manifest = trace::Manifest::load(m)?;
            if let Some(bad) = manifest.failures().next() {
                bail!("manifest {} lists a failed file: {}", m.display(), bad.input.display());
            }
            manifest.file_counts()
        }
        (None, Some(dir)) => {
            let mut counts = Vec::new();
            for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
                let path = entry?.path();
                let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
                if name.ends_with(".count.txt") {
                    counts.push((name, trace::EpochRequestsSeries::load(&path)?.total_requests()));
                }
            }
            counts.sort();
            counts
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let calendar = match &a.calendar {
        Some(path) => MatchCalendar::load(path)?,
        None => synth::worldcup_calendar(),
    };
    let days = trace::aggregate_days(&counts, &calendar, a.days)?;
    days.save(&a.out)?;
    println!("{}", days.total_requests());
    Ok(())
}

fn write_prediction(outcome_prediction: &Prediction, scale: ScaleArg, network: &loadcast::Network, out: &Path) -> Result<()> {
    let prediction = match scale {
        ScaleArg::Normalized => outcome_prediction.clone(),
        ScaleArg::Original => {
            let params = network.target_norm.context("model has no normalization parameters")?;
            outcome_prediction.to_original(&params)?
        }
    };
    prediction.save(out)?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let data = TimeSeries::load(&a.data)?;
    let split: SplitSpec = a.split.parse()?;
    let config = CaseConfig {
        id: "custom".into(),
        description: format!("trained on {}", a.data.display()),
        data_ref: data.name.clone(),
        limit: a.limit,
        hidden_layers: a.hidden,
        y_delays: a.delays,
        x_delays: a.x_delays,
        exogenous_column: a.x_column,
        split,
        training: match a.algorithm {
            AlgorithmArg::Lm => CaseTraining::Lm,
            AlgorithmArg::Incremental => CaseTraining::Incremental,
        },
        loop_mode: a.loop_mode.into(),
        source_model: None,
        attempts: a.attempts,
    };
    let outcome = run_case(&config, &data, a.seed, None)?;
    let mut doc = outcome.model_document();
    doc.case_id = None;
    doc.save(&a.out)?;
    if let Some(path) = &a.attempt_log {
        save_attempt_log(path, &outcome.result.attempt_log)?;
    }
    if let Some(path) = &a.prediction {
        write_prediction(&outcome.prediction, a.scale, &outcome.network, path)?;
    }
    println!("complete_mse\t{}\nr\t{}", outcome.result.complete_mse, outcome.result.r);
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let doc = ModelDocument::load(&a.model)?;
    let net = doc.network;
    let data = TimeSeries::load(&a.data)?;
    let config = CaseConfig {
        id: "simulate".into(),
        description: format!("{} over {}", a.model.display(), a.data.display()),
        data_ref: data.name.clone(),
        limit: a.limit,
        hidden_layers: net.layers[..net.layers.len() - 1].iter().map(|l| l.neurons()).collect(),
        y_delays: net.y_delays.clone(),
        x_delays: net.x_delays.clone(),
        exogenous_column: net.exogenous_column.clone(),
        split: SplitSpec::default(),
        training: CaseTraining::None,
        loop_mode: a.loop_mode.map(Into::into).unwrap_or(net.loop_mode),
        source_model: Some(a.model.display().to_string()),
        attempts: 1,
    };
    let outcome = run_case(&config, &data, doc.seed.unwrap_or(DEFAULT_SEED), Some(&net))?;
    write_prediction(&outcome.prediction, a.scale, &outcome.network, &a.out)?;
    println!("complete_mse\t{}\nr\t{}", outcome.result.complete_mse, outcome.result.r);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut cases = match &a.catalog {
        Some(path) => load_catalog(path)?,
        None => builtin_cases(),
    };
    if let Some(path) = &a.export_catalog {
        save_catalog(path, &cases)?;
        return Ok(());
    }
    if !a.cases.is_empty() {
        for id in &a.cases {
            if !cases.iter().any(|c| &c.id == id) {
                bail!("unknown case {id}");
            }
        }
        // Keep the source of any selected simulation-only case.
        let mut wanted: Vec<String> = a.cases.clone();
        for c in &cases {
            if let (true, Some(src)) = (a.cases.contains(&c.id), &c.source_model) {
                wanted.push(src.clone());
            }
        }
        cases.retain(|c| wanted.contains(&c.id));
    }
    let catalog = match &a.data_dir {
        Some(dir) => {
            if !dir.is_dir() {
                bail!("data directory {} does not exist", dir.display());
            }
            DataCatalog::from_dir(dir)?
        }
        None => {
            eprintln!("no --data-dir given, using synthetic data (seed {})", a.seed);
            DataCatalog::synthetic(a.seed)?
        }
    };
    let report = run_suite(&cases, &catalog, a.seed)?;
    for entry in &report.entries {
        match &entry.status {
            CaseStatus::Completed(o) => eprintln!(
                "{:<5} mse {:.6} r {:.5} seed {}",
                entry.config.id,
                o.result.complete_mse,
                o.result.r,
                case_seed(&entry.config.id, a.seed)
            ),
            CaseStatus::Skipped(why) => eprintln!("{:<5} skipped: {why}", entry.config.id),
            CaseStatus::Failed(why) => eprintln!("{:<5} failed: {why}", entry.config.id),
        }
    }
    match &a.out {
        Some(path) => report.save_csv(path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write_csv(&mut lock)?;
            lock.flush()?;
        }
    }
    if let Some(dir) = &a.models {
        report.save_artifacts(dir)?;
    }
    Ok(())
}

fn synthesize(a: SynthArgs) -> Result<()> {
    if let Some(dir) = &a.data_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (kind, offset, file) in [
            (SynthKind::WorldcupDays, 0, format!("{}.tsv", experiments::DAY_REQUESTS)),
            (SynthKind::Day6Seconds, 1, format!("{}.count.txt", experiments::DAY6_FILE)),
            (SynthKind::Day66Seconds, 2, format!("{}.count.txt", experiments::DAY66_FILE)),
        ] {
            // Same per-dataset seeds as the in-memory synthetic catalog.
            let profile = SynthProfile::new(kind, a.seed.wrapping_add(offset));
            write_profile(&profile, &dir.join(file))?;
        }
        synth::worldcup_calendar().save(&dir.join("calendar.tsv"))?;
        return Ok(());
    }
    let (Some(kind), Some(out)) = (a.profile, &a.out) else {
        bail!("--profile and --out are required without --data-dir");
    };
    let mut profile = SynthProfile::new(kind.into(), a.seed);
    if let Some(n) = a.length {
        profile = profile.with_length(n);
    }
    write_profile(&profile, out)?;
    if let Some(path) = &a.calendar {
        synth::worldcup_calendar().save(path)?;
    }
    Ok(())
}

fn write_profile(profile: &SynthProfile, out: &Path) -> Result<()> {
    match profile.kind {
        SynthKind::WorldcupDays => synth::synth_day_requests(profile)?.save(out)?,
        _ => synth::synth_epoch_requests(profile)?.save(out)?,
    }
    Ok(())
}

fn plot_data(a: PlotArgs) -> Result<()> {
    let prediction = Prediction::load(&a.prediction)?;
    if prediction.is_empty() {
        bail!("prediction {} has no rows", a.prediction.display());
    }
    let tsv = a.out.with_extension("tsv");
    let script = a.out.with_extension("gp");
    let png = a.out.with_extension("png");
    prediction.save(&tsv)?;
    let file_name = |p: &Path| p.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let title = a.title.unwrap_or_else(|| file_name(&a.prediction));
    let text = plot::gnuplot_script(&prediction, &file_name(&tsv), &title, &file_name(&png));
    fs::write(&script, text).with_context(|| format!("writing {}", script.display()))?;
    println!("{}", script.display());
    Ok(())
}
