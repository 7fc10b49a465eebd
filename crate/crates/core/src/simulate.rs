//! Open-loop and closed-loop simulation, and the MSE / R metrics.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ann::{Network, Workspace};
use crate::error::{Error, Result};
use crate::series::{NormalizationParams, Splits, SupervisedDataset};
use crate::tsv;

pub const PREDICTION_HEADER: [&str; 4] = ["INDEX", "TARGET", "OUTPUT", "SPLIT"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Val,
    Test,
    /// Simulation of data the network was not trained on.
    Sim,
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLabel::Train => "train",
            SplitLabel::Val => "val",
            SplitLabel::Test => "test",
            SplitLabel::Sim => "sim",
        })
    }
}

impl std::str::FromStr for SplitLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "val" => Ok(SplitLabel::Val),
            "test" => Ok(SplitLabel::Test),
            "sim" => Ok(SplitLabel::Sim),
            other => Err(Error::config(format!("unknown split label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Normalized,
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub index: i64,
    pub target: f64,
    pub output: f64,
    pub split: SplitLabel,
}

/// Targets and network outputs, aligned row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub rows: Vec<PredictionRow>,
    pub scale: Scale,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.output).collect()
    }

    /// Relabels rows by position according to `splits`.
    pub fn with_splits(mut self, splits: &Splits) -> Self {
        for (i, row) in self.rows.iter_mut().enumerate() {
            row.split = splits.label(i);
        }
        self
    }

    /// Relabels every row as `sim`.
    pub fn as_simulation(mut self) -> Self {
        self.rows.iter_mut().for_each(|r| r.split = SplitLabel::Sim);
        self
    }

    /// Maps targets and outputs back to original units.
    pub fn to_original(&self, params: &NormalizationParams) -> Result<Prediction> {
        params.validate()?;
        if self.scale == Scale::Original {
            return Ok(self.clone());
        }
        Ok(Prediction {
            rows: self
                .rows
                .iter()
                .map(|r| PredictionRow {
                    target: params.invert(r.target),
                    output: params.invert(r.output),
                    ..*r
                })
                .collect(),
            scale: Scale::Original,
        })
    }

    /// MSE over the rows carrying `label`, if any.
    pub fn mse_for(&self, label: SplitLabel) -> Option<f64> {
        let (t, o): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| r.split == label)
            .map(|r| (r.target, r.output))
            .unzip();
        mse(&t, &o).ok()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = tsv::create(path)?;
        w.write_record(PREDICTION_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.index.to_string(),
                r.target.to_string(),
                r.output.to_string(),
                r.split.to_string(),
            ])?;
        }
        tsv::finish(path, w)
    }

    /// Loads a prediction table. The scale is not recorded in the file and is
    /// reported as normalized.
    pub fn load(path: &Path) -> Result<Prediction> {
        let table = tsv::read_expecting(path, &PREDICTION_HEADER)?;
        let rows = table
            .rows
            .iter()
            .map(|(line, rec)| {
                Ok(PredictionRow {
                    index: tsv::field(path, *line, rec, 0)?,
                    target: tsv::field(path, *line, rec, 1)?,
                    output: tsv::field(path, *line, rec, 2)?,
                    split: tsv::field(path, *line, rec, 3)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Prediction {
            rows,
            scale: Scale::Normalized,
        })
    }
}

/// One-step-ahead outputs using the actual delayed values of every row.
/// Rows are labelled `sim`; see [`Prediction::with_splits`].
pub fn simulate_open_loop(network: &Network, dataset: &SupervisedDataset) -> Result<Prediction> {
    network.check_width(dataset)?;
    let outputs = network.forward_rows(&dataset.inputs)?;
    Ok(Prediction {
        rows: dataset
            .target_indices
            .iter()
            .zip(&dataset.targets)
            .zip(outputs)
            .map(|((&index, &target), output)| PredictionRow {
                index,
                target,
                output,
                split: SplitLabel::Sim,
            })
            .collect(),
        scale: Scale::Normalized,
    })
}

/// Iterated prediction that feeds the network's own outputs back as the
/// delayed `y` inputs.
///
/// `priming` holds the `max(y_delays)` values preceding the first step.
/// `exogenous`, required exactly when the network has x taps, is aligned to
/// the whole timeline: `priming.len() + steps` actual values, priming
/// positions first. Returns the `steps` outputs in order.
pub fn simulate_closed_loop(
    network: &Network,
    priming: &[f64],
    steps: usize,
    exogenous: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let p = network.max_y_delay();
    if priming.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: priming.len(),
        });
    }
    let x = match (&network.x_delays, exogenous) {
        (Some(delays), Some(x)) => {
            if x.len() < p + steps {
                return Err(Error::config(format!(
                    "closed loop needs {} exogenous values, got {}",
                    p + steps,
                    x.len()
                )));
            }
            if delays.iter().any(|&d| d > p) {
                return Err(Error::config("exogenous delays may not exceed the largest y delay"));
            }
            Some((delays, x))
        }
        (None, None) => None,
        (Some(_), None) => return Err(Error::config("network expects exogenous input")),
        (None, Some(_)) => return Err(Error::config("network takes no exogenous input")),
    };

    let mut history = priming.to_vec();
    history.reserve(steps);
    let mut input = Vec::with_capacity(network.input_width);
    let mut ws = Workspace::new(network);
    for t in p..p + steps {
        input.clear();
        input.extend(network.y_delays.iter().map(|&d| history[t - d]));
        if let Some((delays, x)) = x {
            input.extend(delays.iter().map(|&d| x[t - d]));
        }
        history.push(network.forward_with(&input, &mut ws));
    }
    Ok(history.split_off(p))
}

/// Closed-loop counterpart of [`simulate_open_loop`]: primes with the actual
/// values just before the dataset's first target, then runs one step per row.
pub fn simulate_closed_loop_dataset(
    network: &Network,
    dataset: &SupervisedDataset,
    series_values: &[f64],
    series_exogenous: Option<&[f64]>,
) -> Result<Prediction> {
    network.check_width(dataset)?;
    let p = network.max_y_delay();
    let start = dataset.offset;
    if series_values.len() != start + dataset.len() {
        return Err(Error::LengthMismatch {
            left: series_values.len(),
            right: start + dataset.len(),
        });
    }
    let priming = &series_values[start - p..start];
    let exogenous = series_exogenous.map(|x| &x[start - p..]);
    let outputs = simulate_closed_loop(network, priming, dataset.len(), exogenous)?;
    Ok(Prediction {
        rows: dataset
            .target_indices
            .iter()
            .zip(&dataset.targets)
            .zip(outputs)
            .map(|((&index, &target), output)| PredictionRow {
                index,
                target,
                output,
                split: SplitLabel::Sim,
            })
            .collect(),
        scale: Scale::Normalized,
    })
}

/// Mean squared error `(1/N) Σ (t_i - a_i)²`.
pub fn mse(targets: &[f64], outputs: &[f64]) -> Result<f64> {
    if targets.len() != outputs.len() {
        return Err(Error::LengthMismatch {
            left: targets.len(),
            right: outputs.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::EmptySeries);
    }
    let sse: f64 = targets.iter().zip(outputs).map(|(t, a)| (t - a) * (t - a)).sum();
    Ok(sse / targets.len() as f64)
}

/// Pearson correlation between targets and outputs.
pub fn corr_r(targets: &[f64], outputs: &[f64]) -> Result<f64> {
    if targets.len() != outputs.len() {
        return Err(Error::LengthMismatch {
            left: targets.len(),
            right: outputs.len(),
        });
    }
    if targets.len() < 2 {
        return Err(Error::config("correlation needs at least two points"));
    }
    let n = targets.len() as f64;
    let mt = targets.iter().sum::<f64>() / n;
    let mo = outputs.iter().sum::<f64>() / n;
    let (mut sto, mut stt, mut soo) = (0.0, 0.0, 0.0);
    for (t, o) in targets.iter().zip(outputs) {
        let (dt, dout) = (t - mt, o - mo);
        sto += dt * dout;
        stt += dt * dt;
        soo += dout * dout;
    }
    if stt == 0.0 || soo == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sto / (stt.sqrt() * soo.sqrt())).clamp(-1.0, 1.0))
}
