use std::fmt::Write as _;
use std::ops::Range;

use loadcast::{Prediction, SplitLabel};

/// Contiguous runs of one split label, as 1-based plot steps (inclusive).
pub fn split_ranges(prediction: &Prediction) -> Vec<(SplitLabel, Range<usize>)> {
    let mut out: Vec<(SplitLabel, Range<usize>)> = Vec::new();
    for (i, row) in prediction.rows.iter().enumerate() {
        let step = i + 1;
        match out.last_mut() {
            Some((label, range)) if *label == row.split => range.end = step,
            _ => out.push((row.split, step..step)),
        }
    }
    out
}

fn shade(label: SplitLabel) -> Option<&'static str> {
    match label {
        SplitLabel::Train => Some("#9b59b6"),
        SplitLabel::Val => Some("#3498db"),
        SplitLabel::Test => Some("#e74c3c"),
        SplitLabel::Sim => None,
    }
}

/// Gnuplot script drawing targets (dashed blue) against outputs (solid
/// green) over the prediction TSV, with one shaded band per split block.
/// Step 1 on the x axis is the first predicted point.
pub fn gnuplot_script(prediction: &Prediction, data_file: &str, title: &str, png: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size 1200,600");
    let _ = writeln!(s, "set output '{png}'");
    let _ = writeln!(s, "set datafile separator '\\t'");
    let _ = writeln!(s, "set title '{}'", title.replace('\'', "''"));
    let _ = writeln!(s, "set xlabel 'Step'");
    let _ = writeln!(s, "set ylabel 'Requests'");
    let _ = writeln!(s, "set key top left");
    let _ = writeln!(s, "set xrange [1:{}]", prediction.len().max(2));
    for (n, (label, range)) in split_ranges(prediction).iter().enumerate() {
        if let Some(color) = shade(*label) {
            let _ = writeln!(
                s,
                "set object {} rect from {}, graph 0 to {}, graph 1 fc rgb '{color}' fs transparent solid 0.12 noborder behind",
                n + 1,
                range.start as f64 - 0.5,
                range.end as f64 + 0.5,
            );
            let _ = writeln!(
                s,
                "set label {} '{label}' at {}, graph 0.97",
                n + 1,
                range.start,
            );
        }
    }
    let _ = writeln!(
        s,
        "plot '{data_file}' skip 1 using ($0+1):2 with lines dt 2 lw 2 lc rgb 'blue' title 'Targets', \\"
    );
    let _ = writeln!(
        s,
        "     '' skip 1 using ($0+1):3 with lines lw 2 lc rgb 'forest-green' title 'Outputs'"
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use loadcast::simulate::{PredictionRow, Scale};

    fn prediction(labels: &[SplitLabel]) -> Prediction {
        Prediction {
            rows: labels
                .iter()
                .enumerate()
                .map(|(i, &split)| PredictionRow {
                    index: i as i64 + 3,
                    target: 0.0,
                    output: 0.0,
                    split,
                })
                .collect(),
            scale: Scale::Normalized,
        }
    }

    #[test]
    fn ranges_follow_blocks() {
        use SplitLabel::*;
        let p = prediction(&[Train, Train, Train, Val, Test, Test]);
        assert_eq!(split_ranges(&p), vec![(Train, 1..3), (Val, 4..4), (Test, 5..6)]);
    }

    #[test]
    fn script_shades_each_block() {
        use SplitLabel::*;
        let p = prediction(&[Train, Train, Val, Test]);
        let script = gnuplot_script(&p, "d1.tsv", "D1", "d1.png");
        assert_eq!(script.matches("rect from").count(), 3);
        assert!(script.contains("plot 'd1.tsv'"));
        let sim = gnuplot_script(&prediction(&[Sim, Sim]), "x.tsv", "x", "x.png");
        assert!(!sim.contains("rect"));
    }
}
