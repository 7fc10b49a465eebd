//! Layered feed-forward networks with tapped-delay inputs.
//!
//! Hidden layers use a sigmoid transfer, the output layer is a single linear
//! neuron. Parameters flatten layer by layer: weights row-major (one row per
//! neuron), then that layer's biases. Jacobians and serialized models use the
//! same order.

use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{delay_set, NormalizationParams, SupervisedDataset};
use crate::train::{AttemptRecord, TrainReport};

/// Net input beyond which the sigmoid is returned as exactly 0 or 1.
const SIGMOID_SATURATION: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    /// Logistic `1 / (1 + e^-x)`.
    Sigmoid,
    /// Hyperbolic tangent, for sensitivity checks against the logistic form.
    Tanh,
    Linear,
}

impl Transfer {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transfer::Sigmoid => {
                if x > SIGMOID_SATURATION {
                    1.0
                } else if x < -SIGMOID_SATURATION {
                    0.0
                } else {
                    1.0 / (1.0 + (-x).exp())
                }
            }
            Transfer::Tanh => x.tanh(),
            Transfer::Linear => x,
        }
    }

    /// Derivative expressed through the transfer's output `y = f(x)`.
    #[inline]
    fn slope_at_output(self, y: f64) -> f64 {
        match self {
            Transfer::Sigmoid => y * (1.0 - y),
            Transfer::Tanh => 1.0 - y * y,
            Transfer::Linear => 1.0,
        }
    }

    /// Output range for inputs over the whole real line.
    fn output_range(self) -> (f64, f64) {
        match self {
            Transfer::Sigmoid => (0.0, 1.0),
            Transfer::Tanh => (-1.0, 1.0),
            Transfer::Linear => (0.0, 1.0),
        }
    }
}

impl std::str::FromStr for Transfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" | "logsig" => Ok(Transfer::Sigmoid),
            "tanh" | "tansig" => Ok(Transfer::Tanh),
            "linear" | "purelin" => Ok(Transfer::Linear),
            other => Err(Error::config(format!("unknown transfer {other:?}"))),
        }
    }
}

pub fn transfer(kind: Transfer, x: f64) -> f64 {
    kind.apply(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// One row per neuron.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub transfer: Transfer,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>, transfer: Transfer) -> Result<Self> {
        let layer = Layer { weights, biases, transfer };
        layer.validate()?;
        Ok(layer)
    }

    fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::config("layer has no neurons"));
        }
        if self.weights.len() != self.biases.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                got: self.biases.len(),
            });
        }
        let width = self.weights[0].len();
        if width == 0 {
            return Err(Error::config("layer has no inputs"));
        }
        if let Some(row) = self.weights.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension {
                expected: width,
                got: row.len(),
            });
        }
        let finite = self.weights.iter().flatten().chain(&self.biases).all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("layer has non-finite parameters"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.weights[0].len()
    }

    pub fn neurons(&self) -> usize {
        self.biases.len()
    }

    pub fn param_count(&self) -> usize {
        self.neurons() * (self.inputs() + 1)
    }

    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        if inputs.len() != self.inputs() {
            return Err(Error::Dimension {
                expected: self.inputs(),
                got: inputs.len(),
            });
        }
        let mut out = Vec::with_capacity(self.neurons());
        self.forward_into(inputs, &mut out);
        Ok(out)
    }

    #[inline]
    fn forward_into(&self, inputs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.iter().zip(&self.biases).map(|(row, b)| {
            let net = row.iter().zip(inputs).map(|(w, x)| w * x).sum::<f64>() + b;
            self.transfer.apply(net)
        }));
    }
}

pub fn layer_forward(layer: &Layer, inputs: &[f64]) -> Result<Vec<f64>> {
    layer.forward(inputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopMode {
    /// Delayed inputs are actual past values.
    #[default]
    Open,
    /// Delayed outputs are fed back in place of actual past values.
    Closed,
}

/// Topology: tapped delays, hidden layer sizes and the hidden transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub y_delays: Vec<usize>,
    #[serde(default)]
    pub x_delays: Option<Vec<usize>>,
    pub hidden: Vec<usize>,
    pub hidden_transfer: Transfer,
}

impl NetworkShape {
    pub fn new(y_delays: &[usize], hidden: &[usize]) -> Self {
        NetworkShape {
            y_delays: delay_set(y_delays),
            x_delays: None,
            hidden: hidden.to_vec(),
            hidden_transfer: Transfer::Sigmoid,
        }
    }

    pub fn with_x_delays(mut self, x_delays: &[usize]) -> Self {
        self.x_delays = Some(delay_set(x_delays));
        self
    }

    /// Shape matching a dataset's delay taps.
    pub fn for_dataset(dataset: &SupervisedDataset, hidden: &[usize]) -> Self {
        NetworkShape {
            y_delays: dataset.y_delays.clone(),
            x_delays: dataset.x_delays.clone(),
            hidden: hidden.to_vec(),
            hidden_transfer: Transfer::Sigmoid,
        }
    }

    pub fn input_width(&self) -> usize {
        self.y_delays.len() + self.x_delays.as_ref().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        if self.y_delays.is_empty() || self.y_delays.contains(&0) {
            return Err(Error::config("y delays must be a non-empty set of positive integers"));
        }
        if matches!(&self.x_delays, Some(x) if x.is_empty()) {
            return Err(Error::config("x delays must not be empty"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden layers need at least one neuron"));
        }
        if self.hidden_transfer == Transfer::Linear && !self.hidden.is_empty() {
            return Err(Error::config("hidden layers must use a sigmoid-type transfer"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub input_width: usize,
    pub y_delays: Vec<usize>,
    #[serde(default)]
    pub x_delays: Option<Vec<usize>>,
    #[serde(default)]
    pub exogenous_column: Option<String>,
    #[serde(default)]
    pub target_norm: Option<NormalizationParams>,
    #[serde(default)]
    pub exogenous_norm: Option<NormalizationParams>,
    #[serde(default)]
    pub loop_mode: LoopMode,
}

impl Network {
    /// Wraps layers with default taps `y(t-1) .. y(t-R)`.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let input_width = layers.first().map(Layer::inputs).unwrap_or(0);
        let net = Network {
            layers,
            input_width,
            y_delays: (1..=input_width).collect(),
            x_delays: None,
            exogenous_column: None,
            target_norm: None,
            exogenous_norm: None,
            loop_mode: LoopMode::Open,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_delays(mut self, y_delays: &[usize], x_delays: Option<&[usize]>) -> Result<Self> {
        self.y_delays = delay_set(y_delays);
        self.x_delays = x_delays.map(delay_set);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::config("network has no layers")),
        };
        for layer in &self.layers {
            layer.validate()?;
        }
        if first.inputs() != self.input_width {
            return Err(Error::Dimension {
                expected: self.input_width,
                got: first.inputs(),
            });
        }
        for pair in self.layers.windows(2) {
            if pair[1].inputs() != pair[0].neurons() {
                return Err(Error::Dimension {
                    expected: pair[0].neurons(),
                    got: pair[1].inputs(),
                });
            }
        }
        if last.neurons() != 1 || last.transfer != Transfer::Linear {
            return Err(Error::config("output layer must be a single linear neuron"));
        }
        let taps = self.y_delays.len() + self.x_delays.as_ref().map_or(0, Vec::len);
        if taps != self.input_width {
            return Err(Error::Dimension {
                expected: self.input_width,
                got: taps,
            });
        }
        Ok(())
    }

    pub fn max_y_delay(&self) -> usize {
        self.y_delays.iter().copied().max().unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter().flatten());
            out.extend(&layer.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().flatten() {
                *w = it.next().unwrap();
            }
            for b in &mut layer.biases {
                *b = it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.input_width {
            return Err(Error::Dimension {
                expected: self.input_width,
                got: input.len(),
            });
        }
        let mut ws = Workspace::new(self);
        Ok(self.forward_with(input, &mut ws))
    }

    /// Unchecked forward pass reusing caller-owned buffers.
    pub(crate) fn forward_with(&self, input: &[f64], ws: &mut Workspace) -> f64 {
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(input);
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(k + 1);
            layer.forward_into(&done[k], &mut rest[0]);
        }
        ws.acts[self.layers.len()][0]
    }

    /// Outputs for many rows; dimensions checked once.
    pub fn forward_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut ws = Workspace::new(self);
        rows.iter()
            .map(|row| {
                if row.len() != self.input_width {
                    return Err(Error::Dimension {
                        expected: self.input_width,
                        got: row.len(),
                    });
                }
                Ok(self.forward_with(row, &mut ws))
            })
            .collect()
    }

    /// Error `target - output` for one row and its derivative with respect to
    /// every parameter, written into `grad`, by reverse accumulation.
    pub(crate) fn error_gradient(&self, input: &[f64], target: f64, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        let output = self.forward_with(input, ws);
        let n_layers = self.layers.len();
        // d(error)/d(output) = -1; the output transfer is linear.
        ws.deltas[n_layers - 1].clear();
        ws.deltas[n_layers - 1].push(-1.0);

        let mut end = grad.len();
        for k in (0..n_layers).rev() {
            let layer = &self.layers[k];
            let start = end - layer.param_count();
            let inputs = &ws.acts[k];
            let (w_grad, b_grad) = grad[start..end].split_at_mut(layer.neurons() * layer.inputs());
            for (i, &d) in ws.deltas[k].iter().enumerate() {
                let row = &mut w_grad[i * inputs.len()..(i + 1) * inputs.len()];
                for (g, x) in row.iter_mut().zip(inputs) {
                    *g = d * x;
                }
                b_grad[i] = d;
            }
            if k > 0 {
                let below = self.layers[k - 1].transfer;
                let (lower, upper) = ws.deltas.split_at_mut(k);
                let next = &mut lower[k - 1];
                next.clear();
                next.extend(inputs.iter().enumerate().map(|(j, &a)| {
                    let back: f64 = layer.weights.iter().zip(&upper[0]).map(|(row, d)| row[j] * d).sum();
                    back * below.slope_at_output(a)
                }));
            }
            end = start;
        }
        target - output
    }

    /// Sum of squared errors over `rows` of `dataset`.
    pub fn sse(&self, dataset: &SupervisedDataset, rows: Range<usize>) -> Result<f64> {
        check_rows(dataset, &rows)?;
        self.check_width(dataset)?;
        let mut ws = Workspace::new(self);
        Ok(rows
            .map(|r| {
                let e = dataset.targets[r] - self.forward_with(&dataset.inputs[r], &mut ws);
                e * e
            })
            .sum())
    }

    /// Mean squared error over `rows`; zero-length ranges give `None`.
    pub fn mse(&self, dataset: &SupervisedDataset, rows: Range<usize>) -> Result<Option<f64>> {
        let n = rows.len();
        let sse = self.sse(dataset, rows)?;
        Ok((n > 0).then(|| sse / n as f64))
    }

    pub(crate) fn check_width(&self, dataset: &SupervisedDataset) -> Result<()> {
        if dataset.width() != self.input_width {
            return Err(Error::Dimension {
                expected: self.input_width,
                got: dataset.width(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}

pub fn network_forward(network: &Network, input: &[f64]) -> Result<f64> {
    network.forward(input)
}

fn check_rows(dataset: &SupervisedDataset, rows: &Range<usize>) -> Result<()> {
    if rows.start > rows.end || rows.end > dataset.len() {
        return Err(Error::config(format!(
            "row range {rows:?} outside dataset of {} rows",
            dataset.len()
        )));
    }
    Ok(())
}

/// Per-layer activation and delta buffers reused across rows.
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(net: &Network) -> Self {
        let mut acts = vec![Vec::with_capacity(net.input_width)];
        acts.extend(net.layers.iter().map(|l| Vec::with_capacity(l.neurons())));
        let deltas = net.layers.iter().map(|l| Vec::with_capacity(l.neurons())).collect();
        Workspace { acts, deltas }
    }
}

/// Error vector `e[r] = target[r] - output[r]` over `rows` and its Jacobian
/// `J[r][p] = de[r]/dp`, one row per dataset row.
pub fn error_jacobian(
    network: &Network,
    dataset: &SupervisedDataset,
    rows: Range<usize>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_rows(dataset, &rows)?;
    network.check_width(dataset)?;
    let n_params = network.param_count();
    let mut jac = DMatrix::zeros(rows.len(), n_params);
    let mut err = DVector::zeros(rows.len());
    let mut ws = Workspace::new(network);
    let mut grad = vec![0.0; n_params];
    for (i, r) in rows.enumerate() {
        err[i] = network.error_gradient(&dataset.inputs[r], dataset.targets[r], &mut ws, &mut grad);
        for (p, g) in grad.iter().enumerate() {
            jac[(i, p)] = *g;
        }
    }
    Ok((jac, err))
}

/// Nguyen-Widrow initialization.
///
/// Each sigmoid layer of H neurons over R inputs gets random weight
/// directions of magnitude `0.7 * H^(1/R)` and biases spread evenly across
/// that magnitude, so the neurons' active regions tile the input range.
/// The first layer's inputs are taken to lie in `[0, 1]`, deeper layers' in
/// the previous transfer's output range. The linear output layer is drawn
/// uniformly from `[-0.5, 0.5]`.
pub fn init_weights(shape: &NetworkShape, seed: u64) -> Result<Network> {
    shape.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(shape.hidden.len() + 1);
    let mut inputs = shape.input_width();
    let mut input_range = (0.0, 1.0);
    for &neurons in &shape.hidden {
        layers.push(nguyen_widrow(&mut rng, neurons, inputs, input_range, shape.hidden_transfer));
        inputs = neurons;
        input_range = shape.hidden_transfer.output_range();
    }
    let weights = vec![(0..inputs).map(|_| rng.gen_range(-0.5..=0.5)).collect()];
    let biases = vec![rng.gen_range(-0.5..=0.5)];
    layers.push(Layer::new(weights, biases, Transfer::Linear)?);

    let mut net = Network::from_layers(layers)?;
    net.y_delays = shape.y_delays.clone();
    net.x_delays = shape.x_delays.clone();
    net.validate()?;
    Ok(net)
}

fn nguyen_widrow(
    rng: &mut ChaCha8Rng,
    neurons: usize,
    inputs: usize,
    (lo, hi): (f64, f64),
    transfer: Transfer,
) -> Layer {
    let magnitude = 0.7 * (neurons as f64).powf(1.0 / inputs as f64);
    let mut weights = Vec::with_capacity(neurons);
    let mut biases = Vec::with_capacity(neurons);
    for i in 0..neurons {
        let dir = loop {
            let v: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        // Weights and bias in centered coordinates z in [-1, 1]^R.
        let w_z: Vec<f64> = dir.iter().map(|d| magnitude * d).collect();
        let b_z = if neurons == 1 {
            0.0
        } else {
            let spread = -1.0 + 2.0 * i as f64 / (neurons - 1) as f64;
            magnitude * spread * w_z[0].signum()
        };
        // Map x in [lo, hi] onto z: z = (2x - (lo + hi)) / (hi - lo).
        let scale = 2.0 / (hi - lo);
        let shift = (lo + hi) / (hi - lo);
        weights.push(w_z.iter().map(|w| w * scale).collect());
        biases.push(b_z - w_z.iter().sum::<f64>() * shift);
    }
    Layer {
        weights,
        biases,
        transfer,
    }
}

/// A trained network on disk, with its provenance and training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    #[serde(default)]
    pub case_id: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub network: Network,
    #[serde(default)]
    pub training: Option<TrainReport>,
    #[serde(default)]
    pub attempts: Vec<AttemptRecord>,
}

impl ModelDocument {
    pub const FORMAT: &'static str = "loadcast-model/1";

    pub fn new(network: Network) -> Self {
        ModelDocument {
            format: Self::FORMAT.to_string(),
            case_id: None,
            seed: None,
            network,
            training: None,
            attempts: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != Self::FORMAT {
            return Err(Error::config(format!("unsupported model format {:?}", doc.format)));
        }
        doc.network.validate()?;
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
