//! Reference implementations the library is checked against. Each one is
//! written from the definitions, without calling the code under test.
//! Shared by this crate's integration tests and the CLI acceptance run.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use loadcast::ann::{Layer, LoopMode, Network, Transfer};
use loadcast::experiments::{builtin_cases, CaseConfig, CaseTraining};
use loadcast::series::SupervisedDataset;
use rand::Rng;

/// Big-endian 20-byte record: timestamp, client, object, size, then the four code bytes.
pub fn encode_record(timestamp: u32, client: u32, object: u32, size: u32, codes: [u8; 4]) -> Vec<u8> {
    let mut out = Vec::with_capacity(20);
    for word in [timestamp, client, object, size] {
        for shift in [24, 16, 8, 0] {
            out.push((word >> shift) as u8);
        }
    }
    out.extend_from_slice(&codes);
    out
}

/// Multiset count by sorting, as (epoch, count) ascending.
pub fn brute_force_counts(epochs: &[u32]) -> Vec<(u32, u64)> {
    let mut sorted = epochs.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(u32, u64)> = Vec::new();
    for e in sorted {
        match out.last_mut() {
            Some((last, n)) if *last == e => *n += 1,
            _ => out.push((e, 1)),
        }
    }
    out
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Forward pass by explicit loops over the layer weights.
pub fn forward(net: &Network, input: &[f64]) -> f64 {
    let mut a = input.to_vec();
    for layer in &net.layers {
        let mut next = Vec::with_capacity(layer.weights.len());
        for (row, b) in layer.weights.iter().zip(&layer.biases) {
            let mut s = 0.0;
            for (w, x) in row.iter().zip(&a) {
                s += w * x;
            }
            s += b;
            next.push(match layer.transfer {
                Transfer::Sigmoid => logistic(s),
                Transfer::Tanh => s.tanh(),
                Transfer::Linear => s,
            });
        }
        a = next;
    }
    a[0]
}

/// Random network with sigmoid hidden layers, weights in `[-scale, scale]`.
pub fn random_network<R: Rng>(rng: &mut R, y_delays: &[usize], x_delays: Option<&[usize]>, hidden: &[usize], scale: f64) -> Network {
    let width = y_delays.len() + x_delays.map_or(0, <[usize]>::len);
    let mut sizes = vec![width];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(k, pair)| {
            let transfer = if k + 2 == sizes.len() { Transfer::Linear } else { Transfer::Sigmoid };
            let weights = (0..pair[1])
                .map(|_| (0..pair[0]).map(|_| rng.gen_range(-scale..=scale)).collect())
                .collect();
            let biases = (0..pair[1]).map(|_| rng.gen_range(-scale..=scale)).collect();
            Layer::new(weights, biases, transfer).unwrap()
        })
        .collect();
    Network::from_layers(layers).unwrap().with_delays(y_delays, x_delays).unwrap()
}

/// Central-difference Jacobian of `e = target - output`, one row per dataset row.
pub fn fd_jacobian(net: &Network, ds: &SupervisedDataset, h: f64) -> Vec<Vec<f64>> {
    let base = net.params();
    let mut jac = vec![vec![0.0; base.len()]; ds.len()];
    let mut probe = net.clone();
    for p in 0..base.len() {
        let mut plus = base.clone();
        plus[p] += h;
        let mut minus = base.clone();
        minus[p] -= h;
        probe.set_params(&plus).unwrap();
        let e_plus: Vec<f64> = (0..ds.len()).map(|r| ds.targets[r] - forward(&probe, &ds.inputs[r])).collect();
        probe.set_params(&minus).unwrap();
        for r in 0..ds.len() {
            let e_minus = ds.targets[r] - forward(&probe, &ds.inputs[r]);
            jac[r][p] = (e_plus[r] - e_minus) / (2.0 * h);
        }
    }
    jac
}

/// Relative error with the denominator floored at `floor`, so entries near
/// zero are compared on an absolute scale.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Closed-loop history stepped by hand: `history` starts as the priming
/// values and every step appends the network's output for the row built from
/// that history and the exogenous timeline.
pub fn closed_loop(net: &Network, priming: &[f64], steps: usize, x: Option<&[f64]>) -> Vec<f64> {
    let mut history = priming.to_vec();
    for _ in 0..steps {
        let t = history.len();
        let mut input = Vec::new();
        for &d in &net.y_delays {
            input.push(history[t - d]);
        }
        if let (Some(xd), Some(x)) = (&net.x_delays, x) {
            for &d in xd {
                input.push(x[t - d]);
            }
        }
        history.push(forward(net, &input));
    }
    history[priming.len()..].to_vec()
}

pub fn mse(t: &[f64], a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..t.len() {
        s += (t[i] - a[i]) * (t[i] - a[i]);
    }
    s / t.len() as f64
}

/// Pearson correlation from centred sums.
pub fn pearson(t: &[f64], a: &[f64]) -> f64 {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let ma = a.iter().sum::<f64>() / n;
    let (mut sta, mut stt, mut saa) = (0.0, 0.0, 0.0);
    for i in 0..t.len() {
        sta += (t[i] - mt) * (a[i] - ma);
        stt += (t[i] - mt) * (t[i] - mt);
        saa += (a[i] - ma) * (a[i] - ma);
    }
    sta / (stt * saa).sqrt()
}

fn field_value(c: &CaseConfig, field: &str) -> String {
    let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    match field {
        "kind" => match (c.exogenous_column.is_some(), c.loop_mode) {
            (true, _) => "narx".into(),
            (false, LoopMode::Closed) => "nar".into(),
            (false, LoopMode::Open) => "ftdnn".into(),
        },
        "training" => match c.training {
            CaseTraining::Lm => "lm".into(),
            CaseTraining::Incremental => "incremental".into(),
            CaseTraining::None => "none".into(),
        },
        "data_ref" => c.data_ref.clone(),
        "split" => format!("{:.2}/{:.2}/{:.2}", c.split.train, c.split.val, c.split.test),
        "y_delays" => list(&c.y_delays),
        "x_delays" => c.x_delays.as_deref().map(list).unwrap_or_else(|| "-".into()),
        "exogenous_column" => c.exogenous_column.clone().unwrap_or_else(|| "-".into()),
        "loop_mode" => match c.loop_mode {
            LoopMode::Open => "open".into(),
            LoopMode::Closed => "closed".into(),
        },
        "hidden_layers" => list(&c.hidden_layers),
        "limit" => c.limit.map(|n| n.to_string()).unwrap_or_else(|| "-".into()),
        "source_model" => c.source_model.clone().unwrap_or_else(|| "-".into()),
        other => panic!("unknown catalog field {other}"),
    }
}

/// `needle` occurs in `hay` without a letter or digit glued to either end,
/// so "= 1" does not match inside "= 10".
fn contains_phrase(hay: &str, needle: &str) -> bool {
    hay.match_indices(needle).any(|(i, m)| {
        let before = hay[..i].chars().next_back();
        let after = hay[i + m.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

const FIELDS: [&str; 11] = [
    "kind",
    "training",
    "data_ref",
    "split",
    "y_delays",
    "x_delays",
    "exogenous_column",
    "loop_mode",
    "hidden_layers",
    "limit",
    "source_model",
];

/// Compares the builtin catalog with the transcribed case table at `path`
/// (columns CASE, PARENT, TEXT, FIELD, VALUE). A case's expected fields are
/// its parent's with the listed overrides; each TEXT must appear verbatim in
/// the descriptions of exactly the cases that list it. Returns one message
/// per mismatch.
pub fn catalog_mismatches(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).expect("catalog fixture");
    let rows: Vec<Vec<&str>> = text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split('\t').collect()).collect();
    let cases = builtin_cases();
    let mut problems = Vec::new();

    let mut order: Vec<&str> = Vec::new();
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    let mut overrides: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
    let mut texts: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &rows {
        let [case, par, txt, field, value] = r[..] else {
            problems.push(format!("malformed fixture row {r:?}"));
            continue;
        };
        if !order.contains(&case) {
            order.push(case);
        }
        parent.insert(case, par);
        overrides.entry(case).or_default().push((field, value));
        let owners = texts.entry(txt).or_default();
        if !owners.contains(&case) {
            owners.push(case);
        }
    }

    let ids: Vec<&str> = cases.iter().map(|c| c.id.as_str()).collect();
    if ids != order {
        problems.push(format!("case order {ids:?} differs from table {order:?}"));
    }
    let numbered: std::collections::BTreeSet<&str> = ids.iter().map(|id| id.trim_end_matches(['a', 'b'])).collect();
    if numbered.len() != 13 {
        problems.push(format!("{} numbered cases, expected 13", numbered.len()));
    }

    let mut expected: BTreeMap<&str, BTreeMap<&str, String>> = BTreeMap::new();
    for case in &order {
        let mut fields: BTreeMap<&str, String> = match parent[case] {
            "-" => BTreeMap::new(),
            p => expected.get(p).cloned().unwrap_or_default(),
        };
        for (f, v) in &overrides[case] {
            fields.insert(f, v.to_string());
        }
        expected.insert(case, fields);
    }
    for (case, fields) in &expected {
        let Some(config) = cases.iter().find(|c| c.id == *case) else {
            problems.push(format!("{case}: missing from the builtin catalog"));
            continue;
        };
        for field in FIELDS {
            let got = field_value(config, field);
            let want = fields.get(field).cloned().unwrap_or_else(|| "-".into());
            if got != want {
                problems.push(format!("{case}.{field}: catalog has {got}, table has {want}"));
            }
        }
    }
    for (txt, owners) in &texts {
        let holders: Vec<&str> = cases.iter().filter(|c| contains_phrase(&c.description, txt)).map(|c| c.id.as_str()).collect();
        let mut want = owners.clone();
        want.sort_unstable();
        let mut got = holders.clone();
        got.sort_unstable();
        if got != want {
            problems.push(format!("text {txt:?} found in {holders:?}, expected {owners:?}"));
        }
    }
    problems
}
