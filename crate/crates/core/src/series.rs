//! Time series, normalization, delay embedding and contiguous splits.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::SplitLabel;
use crate::trace::{DayRequestsSeries, EpochRequestsSeries, DAY_HEADER, EPOCH_HEADER};
use crate::tsv;

/// Default normalization target range.
pub const UNIT_RANGE: (f64, f64) = (0.0, 1.0);

/// Ordered request counts with optional aligned exogenous columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub indices: Vec<i64>,
    pub values: Vec<f64>,
    pub exogenous: BTreeMap<String, Vec<f64>>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, indices: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: indices.len(),
                right: values.len(),
            });
        }
        if let Some(w) = indices.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "indices must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(TimeSeries {
            name: name.into(),
            indices,
            values,
            exogenous: BTreeMap::new(),
        })
    }

    /// Series indexed `1..=n`.
    pub fn from_values(name: impl Into<String>, values: Vec<f64>) -> Self {
        let indices = (1..=values.len() as i64).collect();
        TimeSeries {
            name: name.into(),
            indices,
            values,
            exogenous: BTreeMap::new(),
        }
    }

    pub fn with_exogenous(mut self, column: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                left: self.values.len(),
                right: values.len(),
            });
        }
        self.exogenous.insert(column.into(), values);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn exogenous(&self, column: &str) -> Result<&[f64]> {
        self.exogenous
            .get(column)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))
    }

    /// The first `n` points (all of them when `n` exceeds the length).
    pub fn head(&self, n: usize) -> TimeSeries {
        let n = n.min(self.len());
        TimeSeries {
            name: self.name.clone(),
            indices: self.indices[..n].to_vec(),
            values: self.values[..n].to_vec(),
            exogenous: self
                .exogenous
                .iter()
                .map(|(k, v)| (k.clone(), v[..n].to_vec()))
                .collect(),
        }
    }

    /// Loads a `day-requests` or `epoch-requests` table, chosen by header.
    /// The series is named after the file name up to its first dot.
    pub fn load(path: &Path) -> Result<TimeSeries> {
        let header = tsv::read(path)?.header;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default()
            .split('.')
            .next()
            .unwrap_or_default()
            .to_string();
        if header == DAY_HEADER {
            DayRequestsSeries::load(path)?.to_time_series(&name)
        } else if header == EPOCH_HEADER {
            EpochRequestsSeries::load(path)?.to_time_series(&name, false)
        } else {
            Err(tsv::table_error(
                path,
                1,
                format!("unrecognized header {:?}", header.join("\t")),
            ))
        }
    }
}

/// Affine map from the observed range onto `[target_lo, target_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub observed_min: f64,
    pub observed_max: f64,
    pub target_lo: f64,
    pub target_hi: f64,
    /// Set when the observed series was constant; every value then maps to
    /// the middle of the target range.
    #[serde(default)]
    pub degenerate: bool,
}

impl NormalizationParams {
    pub fn fit(values: &[f64], (lo, hi): (f64, f64)) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NormalizationParams(format!("target range ({lo}, {hi}) is empty")));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidSeries("non-finite value".into()));
        }
        Ok(NormalizationParams {
            observed_min: min,
            observed_max: max,
            target_lo: lo,
            target_hi: hi,
            degenerate: max == min,
        })
    }

    /// Identity map on `[0, 1]`.
    pub fn identity() -> Self {
        NormalizationParams {
            observed_min: 0.0,
            observed_max: 1.0,
            target_lo: 0.0,
            target_hi: 1.0,
            degenerate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.observed_min, self.observed_max, self.target_lo, self.target_hi];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::NormalizationParams("non-finite field".into()));
        }
        if !(self.target_lo < self.target_hi) {
            return Err(Error::NormalizationParams("target_lo must be below target_hi".into()));
        }
        if self.degenerate != (self.observed_max == self.observed_min) || self.observed_max < self.observed_min {
            return Err(Error::NormalizationParams(format!(
                "observed range [{}, {}] inconsistent with degenerate={}",
                self.observed_min, self.observed_max, self.degenerate
            )));
        }
        Ok(())
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.degenerate {
            return 0.5 * (self.target_lo + self.target_hi);
        }
        self.target_lo + (v - self.observed_min) * self.scale()
    }

    pub fn invert(&self, v: f64) -> f64 {
        if self.degenerate {
            return self.observed_min;
        }
        self.observed_min + (v - self.target_lo) / self.scale()
    }

    /// Normalized units per original unit.
    pub fn scale(&self) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        (self.target_hi - self.target_lo) / (self.observed_max - self.observed_min)
    }
}

pub fn normalize(series: &TimeSeries, range: (f64, f64)) -> Result<(TimeSeries, NormalizationParams)> {
    let params = NormalizationParams::fit(&series.values, range)?;
    let mut out = series.clone();
    out.values.iter_mut().for_each(|v| *v = params.apply(*v));
    Ok((out, params))
}

pub fn denormalize(series: &TimeSeries, params: &NormalizationParams) -> Result<TimeSeries> {
    params.validate()?;
    let mut out = series.clone();
    out.values.iter_mut().for_each(|v| *v = params.invert(*v));
    Ok(out)
}

/// Delay-embedded rows `y(t) ~ [y(t-d) for d in y_delays] ++ [x(t-d) for d in x_delays]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub target_indices: Vec<i64>,
    pub y_delays: Vec<usize>,
    pub x_delays: Option<Vec<usize>>,
    pub exogenous_column: Option<String>,
    /// Series position of the first target, i.e. the largest delay.
    pub offset: usize,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.y_delays.len() + self.x_delays.as_ref().map_or(0, Vec::len)
    }
}

/// Sorted, de-duplicated delay set.
pub fn delay_set(delays: &[usize]) -> Vec<usize> {
    let mut d = delays.to_vec();
    d.sort_unstable();
    d.dedup();
    d
}

pub fn delay_embed(
    series: &TimeSeries,
    y_delays: &[usize],
    exogenous: Option<(&str, &[usize])>,
) -> Result<SupervisedDataset> {
    let y_delays = delay_set(y_delays);
    if y_delays.is_empty() || y_delays[0] == 0 {
        return Err(Error::config("y delays must be a non-empty set of positive integers"));
    }
    let (x_values, x_delays, column) = match exogenous {
        Some((column, delays)) => {
            let delays = delay_set(delays);
            if delays.is_empty() {
                return Err(Error::config("x delays must not be empty"));
            }
            (Some(series.exogenous(column)?), Some(delays), Some(column.to_string()))
        }
        None => (None, None, None),
    };
    let max_delay = y_delays
        .iter()
        .chain(x_delays.iter().flatten())
        .copied()
        .max()
        .unwrap_or(0);
    if max_delay >= series.len() {
        return Err(Error::DelayTooLarge {
            max_delay,
            len: series.len(),
        });
    }

    let y = &series.values;
    let rows = series.len() - max_delay;
    let mut inputs = Vec::with_capacity(rows);
    for t in max_delay..series.len() {
        let mut row: Vec<f64> = y_delays.iter().map(|&d| y[t - d]).collect();
        if let (Some(x), Some(xd)) = (x_values, &x_delays) {
            row.extend(xd.iter().map(|&d| x[t - d]));
        }
        inputs.push(row);
    }
    Ok(SupervisedDataset {
        inputs,
        targets: y[max_delay..].to_vec(),
        target_indices: series.indices[max_delay..].to_vec(),
        y_delays,
        x_delays,
        exogenous_column: column,
        offset: max_delay,
    })
}

/// Train/validation/test fractions of contiguous blocks, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitSpec {
    pub const fn new(train: f64, val: f64, test: f64) -> Self {
        SplitSpec { train, val, test }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::config(format!("split fractions must be non-negative: {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split fractions must sum to 1: {self:?}")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::new(0.70, 0.15, 0.15)
    }
}

impl std::str::FromStr for SplitSpec {
    type Err = Error;

    /// Parses `70/15/15` (percentages) or `0.7/0.15/0.15`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split('/')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config(format!("bad split {s:?}")))?;
        let [a, b, c] = parts[..] else {
            return Err(Error::config(format!("split needs three parts: {s:?}")));
        };
        let total = a + b + c;
        let spec = if (total - 100.0).abs() < 1e-6 {
            SplitSpec::new(a / 100.0, b / 100.0, c / 100.0)
        } else {
            SplitSpec::new(a, b, c)
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Row ranges of the three blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    /// Every row in the training block, no validation or test.
    pub fn train_only(n: usize) -> Self {
        Splits {
            train: 0..n,
            val: n..n,
            test: n..n,
        }
    }

    pub fn len(&self) -> usize {
        self.test.end
    }

    pub fn is_empty(&self) -> bool {
        self.test.end == 0
    }

    pub fn label(&self, row: usize) -> SplitLabel {
        if self.train.contains(&row) {
            SplitLabel::Train
        } else if self.val.contains(&row) {
            SplitLabel::Val
        } else {
            SplitLabel::Test
        }
    }
}

/// Contiguous split: `floor` for train and validation, remainder to test.
pub fn split_blocks(n_rows: usize, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if n_rows < 3 {
        return Err(Error::config(format!("need at least 3 rows to split, got {n_rows}")));
    }
    // The epsilon keeps e.g. 0.7 * 1000 from flooring to 699.
    let block = |f: f64| (f * n_rows as f64 + 1e-9).floor() as usize;
    let n_train = block(spec.train).min(n_rows);
    let n_val = block(spec.val).min(n_rows - n_train);
    let splits = Splits {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n_rows,
    };
    if splits.train.is_empty() || splits.val.is_empty() || splits.test.is_empty() {
        return Err(Error::config(format!(
            "split {spec:?} of {n_rows} rows leaves an empty block"
        )));
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(s: &Splits) -> (usize, usize, usize) {
        (s.train.len(), s.val.len(), s.test.len())
    }

    #[test]
    fn normalize_endpoints() {
        let s = TimeSeries::from_values("s", vec![0.0, 50.0, 100.0]);
        let (n, p) = normalize(&s, UNIT_RANGE).unwrap();
        assert_eq!(n.values, vec![0.0, 0.5, 1.0]);
        assert!(!p.degenerate);
        assert_eq!(denormalize(&n, &p).unwrap().values, s.values);
    }

    #[test]
    fn normalize_constant() {
        let s = TimeSeries::from_values("s", vec![7.0; 3]);
        let (n, p) = normalize(&s, UNIT_RANGE).unwrap();
        assert_eq!(n.values, vec![0.5; 3]);
        assert!(p.degenerate);
        assert_eq!(denormalize(&n, &p).unwrap().values, vec![7.0; 3]);
    }

    #[test]
    fn normalize_errors() {
        let s = TimeSeries::from_values("s", vec![]);
        assert!(matches!(normalize(&s, UNIT_RANGE), Err(Error::EmptySeries)));
        let bad = NormalizationParams { target_lo: 1.0, target_hi: 0.0, ..NormalizationParams::identity() };
        assert!(denormalize(&TimeSeries::from_values("s", vec![1.0]), &bad).is_err());
    }

    #[test]
    fn identity_params() {
        let s = TimeSeries::from_values("s", vec![0.25, -3.0, 9.5]);
        assert_eq!(denormalize(&s, &NormalizationParams::identity()).unwrap(), s);
    }

    #[test]
    fn embed_basic() {
        let s = TimeSeries::from_values("s", vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let d = delay_embed(&s, &[1, 2], None).unwrap();
        assert_eq!(d.inputs, vec![vec![2.0, 1.0], vec![3.0, 2.0], vec![4.0, 3.0]]);
        assert_eq!(d.targets, vec![3.0, 4.0, 5.0]);
        assert_eq!(d.target_indices, vec![3, 4, 5]);

        let d = delay_embed(&s, &[2, 3], None).unwrap();
        assert_eq!(d.inputs, vec![vec![2.0, 1.0], vec![3.0, 2.0]]);
        assert_eq!(d.targets, vec![4.0, 5.0]);
    }

    #[test]
    fn embed_exogenous_matches_hand_oracle() {
        let y = vec![10.0, 11.0, 12.0, 13.0, 14.0, 15.0];
        let x = vec![0.0, 2.0, 2.0, 3.0, 0.0, 1.0];
        let s = TimeSeries::from_values("s", y.clone()).with_exogenous("MATCHES", x.clone()).unwrap();
        let d = delay_embed(&s, &[1, 2], Some(("MATCHES", &[1, 2]))).unwrap();
        let mut expected = Vec::new();
        for t in 2..6 {
            expected.push(vec![y[t - 1], y[t - 2], x[t - 1], x[t - 2]]);
        }
        assert_eq!(d.inputs, expected);
        assert_eq!(d.width(), 4);
    }

    #[test]
    fn embed_errors() {
        let s = TimeSeries::from_values("s", vec![1.0, 2.0, 3.0]);
        assert!(matches!(delay_embed(&s, &[3], None), Err(Error::DelayTooLarge { max_delay: 3, len: 3 })));
        assert!(matches!(delay_embed(&s, &[1], Some(("ISMATCH", &[1]))), Err(Error::UnknownColumn(_))));
        assert!(delay_embed(&s, &[0, 1], None).is_err());
    }

    #[test]
    fn split_sizes() {
        let s = split_blocks(92, &SplitSpec::new(0.70, 0.15, 0.15)).unwrap();
        assert_eq!(sizes(&s), (64, 13, 15));
        let s = split_blocks(92, &SplitSpec::new(0.80, 0.10, 0.10)).unwrap();
        assert_eq!(sizes(&s), (73, 9, 10));
        let s = split_blocks(1000, &SplitSpec::new(0.70, 0.15, 0.15)).unwrap();
        assert_eq!(sizes(&s), (700, 150, 150));
    }

    #[test]
    fn split_errors() {
        assert!(split_blocks(2, &SplitSpec::default()).is_err());
        assert!(split_blocks(5, &SplitSpec::new(0.9, 0.05, 0.05)).is_err());
        assert!(split_blocks(100, &SplitSpec::new(0.5, 0.5, 0.5)).is_err());
    }

    #[test]
    fn split_parsing() {
        assert_eq!("70/15/15".parse::<SplitSpec>().unwrap(), SplitSpec::new(0.7, 0.15, 0.15));
        assert_eq!("0.6/0.2/0.2".parse::<SplitSpec>().unwrap(), SplitSpec::new(0.6, 0.2, 0.2));
        assert!("70/15".parse::<SplitSpec>().is_err());
    }

    proptest! {
        #[test]
        fn normalize_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let s = TimeSeries::from_values("s", values.clone());
            let (n, p) = normalize(&s, UNIT_RANGE).unwrap();
            let back = denormalize(&n, &p).unwrap();
            let span = p.observed_max - p.observed_min;
            for (a, b) in back.values.iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * span.max(1.0));
            }
        }

        #[test]
        fn embedding_inverts(values in prop::collection::vec(-100f64..100.0, 10..60),
                             delays in prop::collection::btree_set(1usize..6, 1..4)) {
            let s = TimeSeries::from_values("s", values.clone());
            let delays: Vec<usize> = delays.into_iter().collect();
            let d = delay_embed(&s, &delays, None).unwrap();
            prop_assert_eq!(d.len(), values.len() - d.offset);
            let mut rebuilt = values[..d.offset].to_vec();
            rebuilt.extend_from_slice(&d.targets);
            prop_assert_eq!(rebuilt, values);
        }

        #[test]
        fn splits_partition(n in 3usize..5000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let spec = SplitSpec::new(lo, hi - lo, 1.0 - hi);
            if let Ok(s) = split_blocks(n, &spec) {
                prop_assert_eq!(s.train.start, 0);
                prop_assert_eq!(s.train.end, s.val.start);
                prop_assert_eq!(s.val.end, s.test.start);
                prop_assert_eq!(s.test.end, n);
                prop_assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
            }
        }
    }
}
