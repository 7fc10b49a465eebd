//! Batch Levenberg-Marquardt, per-row incremental training and the
//! restart protocol that keeps the best of several initializations.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::linalg::Cholesky;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{error_jacobian, init_weights, Network, NetworkShape, Workspace};
use crate::error::{Error, Result};
use crate::series::{Splits, SupervisedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Batch Levenberg-Marquardt.
    #[default]
    Lm,
    /// One gradient-with-momentum update per training row.
    Incremental,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lm" => Ok(Algorithm::Lm),
            "incremental" | "adapt" => Ok(Algorithm::Incremental),
            other => Err(Error::config(format!("unknown training algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub max_epochs: usize,
    pub mu_init: f64,
    pub mu_inc: f64,
    pub mu_dec: f64,
    pub mu_max: f64,
    pub max_validation_failures: usize,
    pub min_gradient: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub passes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::Lm,
            max_epochs: 1000,
            mu_init: 0.001,
            mu_inc: 10.0,
            mu_dec: 0.1,
            mu_max: 1e10,
            max_validation_failures: 6,
            min_gradient: 1e-7,
            learning_rate: 0.01,
            momentum: 0.9,
            passes: 100,
        }
    }
}

impl TrainConfig {
    pub fn incremental() -> Self {
        TrainConfig {
            algorithm: Algorithm::Incremental,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.mu_init, self.mu_inc, self.mu_dec, self.mu_max, self.min_gradient];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("mu parameters and min_gradient must be positive"));
        }
        if !(self.mu_dec < 1.0 && 1.0 < self.mu_inc) {
            return Err(Error::config("need mu_dec < 1 < mu_inc"));
        }
        if self.max_epochs == 0 || self.passes == 0 || self.max_validation_failures == 0 {
            return Err(Error::config("epoch, pass and validation-failure limits must be positive"));
        }
        // A zero rate is allowed: it freezes the weights, which is a useful control.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    Validation,
    Gradient,
    MuMax,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max-epochs",
            StopReason::Validation => "validation",
            StopReason::Gradient => "gradient",
            StopReason::MuMax => "mu-max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_mse: f64,
    /// `None` when there is no validation block.
    pub val_mse: Option<f64>,
}

/// Per-epoch history of one run. Entry 0 is the untrained network; every
/// later entry follows one accepted update (or one pass for incremental).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_history: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    pub final_mu: Option<f64>,
    pub seed: Option<u64>,
}

/// Tracks the best epoch by validation MSE (training MSE without a
/// validation block) and counts consecutive non-improving epochs.
struct BestTracker {
    epoch: usize,
    metric: f64,
    params: Vec<f64>,
    failures: usize,
}

impl BestTracker {
    fn new(record: &EpochRecord, params: Vec<f64>) -> Self {
        BestTracker {
            epoch: 0,
            metric: record.val_mse.unwrap_or(record.train_mse),
            params,
            failures: 0,
        }
    }

    /// Returns true when the epoch improved on the best so far.
    fn observe(&mut self, epoch: usize, record: &EpochRecord, params: &[f64]) -> bool {
        let metric = record.val_mse.unwrap_or(record.train_mse);
        if metric < self.metric {
            self.epoch = epoch;
            self.metric = metric;
            self.params.clear();
            self.params.extend_from_slice(params);
            self.failures = 0;
            true
        } else {
            self.failures += 1;
            false
        }
    }
}

fn check_inputs(network: &Network, dataset: &SupervisedDataset, splits: &Splits) -> Result<()> {
    if splits.train.is_empty() {
        return Err(Error::config("training block is empty"));
    }
    if splits.len() > dataset.len() {
        return Err(Error::config(format!(
            "splits cover {} rows but the dataset has {}",
            splits.len(),
            dataset.len()
        )));
    }
    network.check_width(dataset)
}

fn record(net: &Network, dataset: &SupervisedDataset, splits: &Splits) -> Result<EpochRecord> {
    Ok(EpochRecord {
        train_mse: net.mse(dataset, splits.train.clone())?.unwrap_or(0.0),
        val_mse: net.mse(dataset, splits.val.clone())?,
    })
}

/// Batch Levenberg-Marquardt with validation early stopping.
///
/// Each epoch solves `(JᵀJ + μI) Δ = Jᵀe` on the training block, where `J`
/// is the Jacobian of the errors `e = target - output`, and tries the step
/// `w - Δ`. A step is kept only if it lowers the training SSE (then
/// `μ ← μ·mu_dec`); otherwise `μ ← μ·mu_inc` and the step is recomputed,
/// until `μ` exceeds `mu_max`. The returned weights are those of the best
/// validation epoch.
pub fn train_lm(
    network: &Network,
    dataset: &SupervisedDataset,
    splits: &Splits,
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    check_inputs(network, dataset, splits)?;

    let mut net = network.clone();
    let mut weights = DVector::from_vec(net.params());
    let n_params = weights.len();
    let mut mu = config.mu_init;

    let (mut jac, mut err) = error_jacobian(&net, dataset, splits.train.clone())?;
    let mut sse = err.norm_squared();
    let first = record(&net, dataset, splits)?;
    let mut history = vec![first];
    let mut best = BestTracker::new(&first, weights.as_slice().to_vec());
    let mut stop = StopReason::MaxEpochs;

    'epochs: for epoch in 1..=config.max_epochs {
        let gradient = jac.tr_mul(&err);
        if 2.0 * gradient.norm() < config.min_gradient {
            stop = StopReason::Gradient;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        loop {
            let mut system = jtj.clone();
            for i in 0..n_params {
                system[(i, i)] += mu;
            }
            if let Some(chol) = Cholesky::new(system) {
                let candidate = &weights - chol.solve(&gradient);
                net.set_params(candidate.as_slice())?;
                let candidate_sse = net.sse(dataset, splits.train.clone())?;
                if candidate_sse.is_finite() && candidate_sse < sse {
                    weights = candidate;
                    sse = candidate_sse;
                    mu = (mu * config.mu_dec).max(f64::MIN_POSITIVE);
                    break;
                }
            }
            mu *= config.mu_inc;
            if mu > config.mu_max {
                net.set_params(weights.as_slice())?;
                stop = StopReason::MuMax;
                break 'epochs;
            }
        }

        (jac, err) = error_jacobian(&net, dataset, splits.train.clone())?;
        let rec = record(&net, dataset, splits)?;
        history.push(rec);
        if !best.observe(epoch, &rec, weights.as_slice())
            && rec.val_mse.is_some()
            && best.failures >= config.max_validation_failures
        {
            stop = StopReason::Validation;
            break;
        }
    }

    net.set_params(&best.params)?;
    Ok((
        net,
        TrainReport {
            epoch_history: history,
            stop_reason: stop,
            best_epoch: best.epoch,
            final_mu: Some(mu),
            seed: None,
        },
    ))
}

/// Incremental training: every training row, in order, applies
/// `Δw = momentum·Δw_prev - learning_rate·∇(e²)`. Validation MSE is recorded
/// after each pass and the best pass's weights are returned.
pub fn train_incremental(
    network: &Network,
    dataset: &SupervisedDataset,
    splits: &Splits,
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    check_inputs(network, dataset, splits)?;

    let mut net = network.clone();
    let mut weights = net.params();
    let mut velocity = vec![0.0; weights.len()];
    let mut grad = vec![0.0; weights.len()];
    let mut ws = Workspace::new(&net);

    let first = record(&net, dataset, splits)?;
    let mut history = vec![first];
    let mut best = BestTracker::new(&first, weights.clone());

    for pass in 1..=config.passes {
        for row in splits.train.clone() {
            let e = net.error_gradient(&dataset.inputs[row], dataset.targets[row], &mut ws, &mut grad);
            if !e.is_finite() {
                return Err(Error::Divergence { pass, row });
            }
            for ((w, v), g) in weights.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * 2.0 * e * g;
                *w += *v;
            }
            if weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Divergence { pass, row });
            }
            net.set_params(&weights)?;
        }
        let rec = record(&net, dataset, splits)?;
        if !rec.train_mse.is_finite() {
            return Err(Error::Divergence { pass, row: splits.train.end - 1 });
        }
        history.push(rec);
        best.observe(pass, &rec, &weights);
    }

    net.set_params(&best.params)?;
    Ok((
        net,
        TrainReport {
            epoch_history: history,
            stop_reason: StopReason::MaxEpochs,
            best_epoch: best.epoch,
            final_mu: None,
            seed: None,
        },
    ))
}

pub fn train(
    network: &Network,
    dataset: &SupervisedDataset,
    splits: &Splits,
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    match config.algorithm {
        Algorithm::Lm => train_lm(network, dataset, splits, config),
        Algorithm::Incremental => train_incremental(network, dataset, splits, config),
    }
}

/// One initialization in the restart protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// 1-based.
    pub attempt: usize,
    pub seed: u64,
    pub complete_mse: Option<f64>,
    pub stop_reason: Option<StopReason>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub network: Network,
    pub report: TrainReport,
    pub attempts: Vec<AttemptRecord>,
    /// Index into `attempts` of the kept network.
    pub kept: usize,
}

/// Index of the smallest value; ties go to the earlier attempt.
pub fn select_best(complete_mse: &[f64]) -> Option<usize> {
    complete_mse
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// Initializes and trains `attempts` networks (seeds `base_seed`,
/// `base_seed + 1`, ...) and keeps the one with the lowest open-loop MSE over
/// all rows.
pub fn train_with_restarts(
    shape: &NetworkShape,
    dataset: &SupervisedDataset,
    splits: &Splits,
    config: &TrainConfig,
    attempts: usize,
    base_seed: u64,
) -> Result<RestartOutcome> {
    if attempts == 0 {
        return Err(Error::config("at least one attempt is required"));
    }
    config.validate()?;
    let all_rows = 0..dataset.len();
    let runs: Vec<(u64, Result<(Network, TrainReport, f64)>)> = (0..attempts)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(k as u64);
            let run = init_weights(shape, seed).and_then(|net| {
                let (trained, mut report) = train(&net, dataset, splits, config)?;
                report.seed = Some(seed);
                let mse = trained.mse(dataset, all_rows.clone())?.unwrap_or(f64::INFINITY);
                Ok((trained, report, mse))
            });
            (seed, run)
        })
        .collect();

    let log: Vec<AttemptRecord> = runs
        .iter()
        .enumerate()
        .map(|(k, (seed, run))| match run {
            Ok((_, report, mse)) => AttemptRecord {
                attempt: k + 1,
                seed: *seed,
                complete_mse: Some(*mse),
                stop_reason: Some(report.stop_reason),
                error: None,
            },
            Err(e) => AttemptRecord {
                attempt: k + 1,
                seed: *seed,
                complete_mse: None,
                stop_reason: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let scores: Vec<f64> = log.iter().map(|a| a.complete_mse.unwrap_or(f64::NAN)).collect();

    match select_best(&scores) {
        Some(kept) => {
            let (network, report, _) = runs.into_iter().nth(kept).unwrap().1?;
            Ok(RestartOutcome {
                network,
                report,
                attempts: log,
                kept,
            })
        }
        None => Err(runs
            .into_iter()
            .find_map(|(_, r)| r.err())
            .unwrap_or_else(|| Error::config("every attempt produced a non-finite error"))),
    }
}

pub const ATTEMPT_LOG_HEADER: [&str; 4] = ["attempt", "seed", "complete_mse", "stop_reason"];

pub fn write_attempt_log<W: Write>(out: W, attempts: &[AttemptRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ATTEMPT_LOG_HEADER)?;
    for a in attempts {
        let reason = match (&a.stop_reason, &a.error) {
            (Some(r), _) => r.to_string(),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => String::new(),
        };
        w.write_record([
            a.attempt.to_string(),
            a.seed.to_string(),
            a.complete_mse.map(|m| m.to_string()).unwrap_or_default(),
            reason,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_attempt_log(path: &Path, attempts: &[AttemptRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_attempt_log(&mut out, attempts)?;
    out.flush().map_err(|e| Error::io(path, e))
}
