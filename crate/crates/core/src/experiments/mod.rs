//! The thirteen-case experiment catalog, the case runner and the suite driver.

pub mod synth;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{LoopMode, ModelDocument, Network, NetworkShape};
use crate::error::{Error, Result};
use crate::series::{delay_embed, split_blocks, NormalizationParams, SplitSpec, TimeSeries, UNIT_RANGE};
use crate::simulate::{corr_r, mse, simulate_closed_loop_dataset, simulate_open_loop, Prediction, SplitLabel};
use crate::train::{train_with_restarts, AttemptRecord, StopReason, TrainConfig, TrainReport};

pub use synth::{synth_day_requests, synth_epoch_requests, synth_series, SynthKind, SynthProfile};

pub const DAY_REQUESTS: &str = "day-requests";
pub const DAY6_FILE: &str = "wc_day6_1";
pub const DAY66_FILE: &str = "wc_day66_10";
pub const DEFAULT_ATTEMPTS: usize = 5;
pub const RESULTS_HEADER: [&str; 9] = [
    "case",
    "description",
    "complete_mse",
    "r",
    "train_mse",
    "val_mse",
    "test_mse",
    "seed",
    "stop_reason",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTraining {
    Lm,
    Incremental,
    /// Simulation only, with the network of `source_model`.
    None,
}

fn default_attempts() -> usize {
    DEFAULT_ATTEMPTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub id: String,
    pub description: String,
    pub data_ref: String,
    /// Use only the first `limit` points of the data.
    #[serde(default)]
    pub limit: Option<usize>,
    pub hidden_layers: Vec<usize>,
    pub y_delays: Vec<usize>,
    #[serde(default)]
    pub x_delays: Option<Vec<usize>>,
    #[serde(default)]
    pub exogenous_column: Option<String>,
    pub split: SplitSpec,
    pub training: CaseTraining,
    pub loop_mode: LoopMode,
    #[serde(default)]
    pub source_model: Option<String>,
    #[serde(default = "default_attempts")]
    pub attempts: usize,
}

impl CaseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::config(format!("case {}: {msg}", self.id)));
        if (self.training == CaseTraining::None) != self.source_model.is_some() {
            return bad("simulation-only cases, and only those, name a source model");
        }
        if self.x_delays.is_some() != self.exogenous_column.is_some() {
            return bad("x delays and an exogenous column go together");
        }
        if self.y_delays.is_empty() || self.y_delays.contains(&0) {
            return bad("y delays must be positive");
        }
        if self.hidden_layers.contains(&0) {
            return bad("every hidden layer needs at least one neuron");
        }
        if let Some(x) = &self.x_delays {
            if x.is_empty() || x.contains(&0) {
                return bad("x delays must be positive");
            }
            let max_y = self.y_delays.iter().max().copied().unwrap_or(0);
            if self.loop_mode == LoopMode::Closed && x.iter().any(|&d| d > max_y) {
                return bad("closed-loop x delays may not exceed the largest y delay");
            }
        }
        if self.attempts == 0 {
            return bad("at least one attempt is required");
        }
        if self.limit == Some(0) {
            return bad("limit must be positive");
        }
        self.split.validate()
    }

    fn train_config(&self) -> Option<TrainConfig> {
        match self.training {
            CaseTraining::Lm => Some(TrainConfig::default()),
            CaseTraining::Incremental => Some(TrainConfig::incremental()),
            CaseTraining::None => None,
        }
    }
}

fn base_case() -> CaseConfig {
    CaseConfig {
        id: "D1".into(),
        description: "FTDNN; Batch training mode; day-requests data (92 points); \
                      training/validation/testing distribution: 70%/15%/15% (contiguous data); \
                      Delays = 1:2, i.e. inputs = y(t-1) and y(t-2); one-step ahead prediction; \
                      hiddenLayerSize = 10; one hidden layer"
            .into(),
        data_ref: DAY_REQUESTS.into(),
        limit: None,
        hidden_layers: vec![10],
        y_delays: vec![1, 2],
        x_delays: None,
        exogenous_column: None,
        split: SplitSpec::new(0.70, 0.15, 0.15),
        training: CaseTraining::Lm,
        loop_mode: LoopMode::Open,
        source_model: None,
        attempts: DEFAULT_ATTEMPTS,
    }
}

fn variant(id: &str, description: &str, edit: impl FnOnce(&mut CaseConfig)) -> CaseConfig {
    let mut case = base_case();
    case.id = id.into();
    case.description = description.into();
    edit(&mut case);
    case
}

/// The thirteen published cases in catalog order; case S12 comes as the
/// two configs S12a and S12b.
pub fn builtin_cases() -> Vec<CaseConfig> {
    let narx = |column: &'static str| {
        move |c: &mut CaseConfig| {
            c.exogenous_column = Some(column.into());
            c.x_delays = Some(vec![1, 2]);
            c.loop_mode = LoopMode::Closed;
        }
    };
    vec![
        base_case(),
        variant("D2", "Same as D1 except: hiddenLayerSize = 30", |c| c.hidden_layers = vec![30]),
        variant("D3", "Same as D1 except: two hidden layers", |c| c.hidden_layers = vec![10, 10]),
        variant(
            "D4",
            "Same as D1 except: training/validation/testing distribution: 80%/10%/10%",
            |c| c.split = SplitSpec::new(0.80, 0.10, 0.10),
        ),
        variant(
            "D5",
            "Same as D1 except: training/validation/testing distribution: 60%/20%/20%",
            |c| c.split = SplitSpec::new(0.60, 0.20, 0.20),
        ),
        variant("D6", "Same as D1 except: hiddenLayerSize = 1", |c| c.hidden_layers = vec![1]),
        variant("D7", "Same as D1 except: Incremental (adapt) training mode", |c| {
            c.training = CaseTraining::Incremental
        }),
        variant("D8", "Same as D1 except: Delays = 1:7", |c| c.y_delays = (1..=7).collect()),
        variant(
            "D9",
            "Same as D1 except: NAR network. Delays = 2:3, i.e. inputs = y(t-2) and y(t-3). \
             2-step ahead prediction. (closed-loop)",
            |c| {
                c.y_delays = vec![2, 3];
                c.loop_mode = LoopMode::Closed;
            },
        ),
        variant(
            "D10",
            "Same as D1 except: NARX network. Exogenous input is `MATCHES'. \
             Uses open-loop for training and closed-loop for simulation.",
            narx("MATCHES"),
        ),
        variant(
            "D11",
            "Same as D1 except: NARX network. Exogenous input is `ISMATCH'. \
             Uses open-loop for training and closed-loop for simulation.",
            narx("ISMATCH"),
        ),
        variant(
            "S12a",
            "Same as D1 except: Data is Seconds data beginning 1000 points of wc_day6_1.gz.count.txt \
             epoch-request data file",
            |c| {
                c.data_ref = DAY6_FILE.into();
                c.limit = Some(1000);
            },
        ),
        variant(
            "S12b",
            "Same as S12a except Simulation only. Network from S12a is used for simulation. \
             Complete day 6 data.",
            |c| {
                c.data_ref = DAY6_FILE.into();
                c.training = CaseTraining::None;
                c.source_model = Some("S12a".into());
            },
        ),
        variant(
            "S13",
            "Same as S12a except: Data is Seconds data beginning 1000 points of wc_day66_10.gz.count.txt \
             epoch-request file",
            |c| {
                c.data_ref = DAY66_FILE.into();
                c.limit = Some(1000);
            },
        ),
    ]
}

pub fn save_catalog(path: &Path, cases: &[CaseConfig]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(cases)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_catalog(path: &Path) -> Result<Vec<CaseConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cases: Vec<CaseConfig> = serde_json::from_str(&text)?;
    for case in &cases {
        case.validate()?;
    }
    Ok(cases)
}

/// FNV-1a of the case id, so each case's seed is independent of the others.
pub fn case_seed(case_id: &str, suite_seed: u64) -> u64 {
    let hash = case_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    });
    hash ^ suite_seed
}

/// Metrics of one case on the normalized scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub description: String,
    pub complete_mse: f64,
    pub r: f64,
    /// Train, validation and test MSE; `None` for simulation-only cases.
    pub per_split_mse: Option<[f64; 3]>,
    pub seed: u64,
    pub stop_reason: Option<StopReason>,
    pub attempt_log: Vec<AttemptRecord>,
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub result: CaseResult,
    pub network: Network,
    pub prediction: Prediction,
    pub report: Option<TrainReport>,
}

impl CaseOutcome {
    pub fn model_document(&self) -> ModelDocument {
        let mut doc = ModelDocument::new(self.network.clone());
        doc.case_id = Some(self.result.case_id.clone());
        doc.seed = Some(self.result.seed);
        doc.training = self.report.clone();
        doc.attempts = self.result.attempt_log.clone();
        doc
    }
}

/// Normalizes, embeds, splits, trains with restarts (or reuses `source`),
/// simulates in the configured loop mode and scores the result.
///
/// Simulation-only cases reuse the source network's normalization so the
/// network sees inputs on the scale it was trained on.
pub fn run_case(
    config: &CaseConfig,
    data: &TimeSeries,
    base_seed: u64,
    source: Option<&Network>,
) -> Result<CaseOutcome> {
    config.validate()?;
    let series = match config.limit {
        Some(n) => data.head(n),
        None => data.clone(),
    };
    let exogenous = match &config.exogenous_column {
        Some(column) => Some((column.as_str(), series.exogenous(column)?.to_vec())),
        None => None,
    };

    let (target_norm, exogenous_norm) = match (config.training, source) {
        (CaseTraining::None, Some(net)) => {
            let target = net
                .target_norm
                .ok_or_else(|| Error::config("source network carries no normalization"))?;
            let exo = match (&exogenous, net.exogenous_norm) {
                (Some(_), Some(p)) => Some(p),
                (Some((_, x)), None) => Some(NormalizationParams::fit(x, UNIT_RANGE)?),
                (None, _) => None,
            };
            (target, exo)
        }
        (CaseTraining::None, None) => {
            return Err(Error::config(format!("case {} needs its source network", config.id)))
        }
        _ => (
            NormalizationParams::fit(&series.values, UNIT_RANGE)?,
            match &exogenous {
                Some((_, x)) => Some(NormalizationParams::fit(x, UNIT_RANGE)?),
                None => None,
            },
        ),
    };
    let mut scaled = series.clone();
    scaled.values.iter_mut().for_each(|v| *v = target_norm.apply(*v));
    if let (Some((column, _)), Some(p)) = (&exogenous, exogenous_norm) {
        if let Some(x) = scaled.exogenous.get_mut(*column) {
            x.iter_mut().for_each(|v| *v = p.apply(*v));
        }
    }

    let (y_delays, x_delays) = match source {
        Some(net) if config.training == CaseTraining::None => (net.y_delays.clone(), net.x_delays.clone()),
        _ => (config.y_delays.clone(), config.x_delays.clone()),
    };
    let exo_spec = match (&config.exogenous_column, &x_delays) {
        (Some(column), Some(delays)) => Some((column.as_str(), delays.as_slice())),
        _ => None,
    };
    let dataset = delay_embed(&scaled, &y_delays, exo_spec)?;

    let (network, splits, report, attempt_log) = match config.train_config() {
        Some(train_config) => {
            let splits = split_blocks(dataset.len(), &config.split)?;
            let shape = NetworkShape::for_dataset(&dataset, &config.hidden_layers);
            let outcome = train_with_restarts(&shape, &dataset, &splits, &train_config, config.attempts, base_seed)?;
            let mut network = outcome.network;
            network.exogenous_column = config.exogenous_column.clone();
            network.target_norm = Some(target_norm);
            network.exogenous_norm = exogenous_norm;
            network.loop_mode = config.loop_mode;
            (network, Some(splits), Some(outcome.report), outcome.attempts)
        }
        None => {
            let mut network = source.expect("checked above").clone();
            network.loop_mode = config.loop_mode;
            (network, None, None, Vec::new())
        }
    };

    let prediction = match config.loop_mode {
        LoopMode::Open => simulate_open_loop(&network, &dataset)?,
        LoopMode::Closed => {
            let x = match &config.exogenous_column {
                Some(column) => Some(scaled.exogenous(column)?),
                None => None,
            };
            simulate_closed_loop_dataset(&network, &dataset, &scaled.values, x)?
        }
    };
    let prediction = match &splits {
        Some(s) => prediction.with_splits(s),
        None => prediction,
    };

    let (targets, outputs) = (prediction.targets(), prediction.outputs());
    let complete_mse = mse(&targets, &outputs)?;
    let r = corr_r(&targets, &outputs)?;
    let per_split_mse = match splits {
        Some(_) => {
            let part = |label| prediction.mse_for(label).unwrap_or(f64::NAN);
            Some([part(SplitLabel::Train), part(SplitLabel::Val), part(SplitLabel::Test)])
        }
        None => None,
    };

    Ok(CaseOutcome {
        result: CaseResult {
            case_id: config.id.clone(),
            description: config.description.clone(),
            complete_mse,
            r,
            per_split_mse,
            seed: base_seed,
            stop_reason: report.as_ref().map(|r| r.stop_reason),
            attempt_log,
        },
        network,
        prediction,
        report,
    })
}

#[derive(Debug, Clone)]
enum DataSource {
    File(PathBuf),
    Memory(TimeSeries),
}

/// Named datasets available to the suite, loaded on demand.
#[derive(Debug, Clone, Default)]
pub struct DataCatalog {
    sources: BTreeMap<String, DataSource>,
}

impl DataCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, series: TimeSeries) {
        self.sources.insert(name.into(), DataSource::Memory(series));
    }

    pub fn insert_file(&mut self, name: impl Into<String>, path: PathBuf) {
        self.sources.insert(name.into(), DataSource::File(path));
    }

    /// Indexes `day-requests.tsv` and every `*.count.txt` in `dir`. Count
    /// files are named by the part of the file name before the first dot.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut catalog = DataCatalog::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == format!("{DAY_REQUESTS}.tsv") {
                catalog.insert_file(DAY_REQUESTS, entry.path());
            } else if name.ends_with(".count.txt") {
                let stem = name.split('.').next().unwrap_or_default().to_string();
                catalog.insert_file(stem, entry.path());
            }
        }
        Ok(catalog)
    }

    /// Synthetic stand-ins for the three datasets the builtin cases use.
    pub fn synthetic(seed: u64) -> Result<Self> {
        let mut catalog = DataCatalog::new();
        for (name, kind, offset) in [
            (DAY_REQUESTS, SynthKind::WorldcupDays, 0),
            (DAY6_FILE, SynthKind::Day6Seconds, 1),
            (DAY66_FILE, SynthKind::Day66Seconds, 2),
        ] {
            let profile = SynthProfile::new(kind, seed.wrapping_add(offset));
            let mut series = synth_series(&profile)?;
            series.name = name.to_string();
            catalog.insert(name, series);
        }
        Ok(catalog)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.sources.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sources.keys().map(String::as_str)
    }

    /// `Ok(None)` when the catalog has no dataset of that name.
    pub fn load(&self, name: &str) -> Result<Option<TimeSeries>> {
        match self.sources.get(name) {
            None => Ok(None),
            Some(DataSource::Memory(series)) => Ok(Some(series.clone())),
            Some(DataSource::File(path)) => TimeSeries::load(path).map(Some),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CaseStatus {
    Completed(Box<CaseOutcome>),
    Skipped(String),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub config: CaseConfig,
    pub seed: u64,
    pub status: CaseStatus,
}

impl SuiteEntry {
    pub fn outcome(&self) -> Option<&CaseOutcome> {
        match &self.status {
            CaseStatus::Completed(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
}

fn run_entry(config: &CaseConfig, catalog: &DataCatalog, seed: u64, source: Option<&Network>) -> CaseStatus {
    let data = match catalog.load(&config.data_ref) {
        Ok(Some(data)) => data,
        Ok(None) => return CaseStatus::Skipped(format!("dataset {} not available", config.data_ref)),
        Err(e) => return CaseStatus::Failed(e.to_string()),
    };
    match run_case(config, &data, seed, source) {
        Ok(outcome) => CaseStatus::Completed(Box::new(outcome)),
        Err(e) => CaseStatus::Failed(e.to_string()),
    }
}

/// Runs every case, independent ones in parallel, then the cases that reuse
/// another case's network. Entries come back in `configs` order; a missing
/// dataset or failed source case turns into a skip record.
pub fn run_suite(configs: &[CaseConfig], catalog: &DataCatalog, suite_seed: u64) -> Result<SuiteReport> {
    let mut ids = std::collections::BTreeSet::new();
    for config in configs {
        config.validate()?;
        if !ids.insert(config.id.as_str()) {
            return Err(Error::config(format!("duplicate case id {}", config.id)));
        }
    }
    for config in configs {
        if let Some(src) = &config.source_model {
            match configs.iter().find(|c| &c.id == src) {
                None => return Err(Error::config(format!("case {} names unknown source {src}", config.id))),
                Some(c) if c.source_model.is_some() => {
                    return Err(Error::config(format!("source case {src} must itself be trained")))
                }
                Some(_) => {}
            }
        }
    }

    let first: Vec<Option<CaseStatus>> = configs
        .par_iter()
        .map(|config| {
            config
                .source_model
                .is_none()
                .then(|| run_entry(config, catalog, case_seed(&config.id, suite_seed), None))
        })
        .collect();

    let second: Vec<Option<CaseStatus>> = configs
        .par_iter()
        .map(|config| {
            let src = config.source_model.as_ref()?;
            let idx = configs.iter().position(|c| &c.id == src)?;
            let seed = case_seed(&config.id, suite_seed);
            Some(match &first[idx] {
                Some(CaseStatus::Completed(outcome)) => run_entry(config, catalog, seed, Some(&outcome.network)),
                _ => CaseStatus::Skipped(format!("source case {src} did not complete")),
            })
        })
        .collect();

    let entries = configs
        .iter()
        .zip(first.into_iter().zip(second))
        .map(|(config, (a, b))| SuiteEntry {
            config: config.clone(),
            seed: case_seed(&config.id, suite_seed),
            status: a.or(b).expect("every case runs in one stage"),
        })
        .collect();
    Ok(SuiteReport { entries })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SuiteReport {
    /// Results table, one row per case. Skipped and failed cases keep their
    /// row with empty metrics and the reason in `stop_reason`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RESULTS_HEADER)?;
        for entry in &self.entries {
            let id = entry.config.id.as_str();
            let desc = entry.config.description.as_str();
            let seed = entry.seed.to_string();
            let record: Vec<String> = match &entry.status {
                CaseStatus::Completed(outcome) => {
                    let r = &outcome.result;
                    let split = |i: usize| fmt_opt(r.per_split_mse.map(|s| s[i]));
                    vec![
                        id.into(),
                        desc.into(),
                        r.complete_mse.to_string(),
                        r.r.to_string(),
                        split(0),
                        split(1),
                        split(2),
                        seed,
                        r.stop_reason.map(|s| s.to_string()).unwrap_or_else(|| "simulation".into()),
                    ]
                }
                CaseStatus::Skipped(reason) | CaseStatus::Failed(reason) => {
                    let kind = if matches!(entry.status, CaseStatus::Skipped(_)) { "skipped" } else { "failed" };
                    let mut row = vec![id.to_string(), desc.to_string()];
                    row.extend(std::iter::repeat(String::new()).take(5));
                    row.push(seed);
                    row.push(format!("{kind}: {reason}"));
                    row
                }
            };
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(Path::new("<results>"), e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Writes `<id>.json` (model) and `<id>.prediction.tsv` for every
    /// completed case.
    pub fn save_artifacts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for entry in &self.entries {
            if let Some(outcome) = entry.outcome() {
                let id = &outcome.result.case_id;
                outcome.model_document().save(&dir.join(format!("{id}.json")))?;
                outcome.prediction.save(&dir.join(format!("{id}.prediction.tsv")))?;
            }
        }
        Ok(())
    }

    pub fn completed(&self) -> impl Iterator<Item = &CaseOutcome> {
        self.entries.iter().filter_map(SuiteEntry::outcome)
    }
}
