//! Trace ingestion: binary/text trace files to `epoch-requests` and
//! `day-requests` data sets.

mod pipeline;
mod record;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::tsv;

pub use pipeline::{run_pipeline, Manifest, ManifestEntry, PipelineOptions};
pub use record::{
    count_requests, count_requests_with, decode_record, decode_record_at, stream_epochs,
    stream_epochs_with, EpochStream, RecordLayout, TraceFormat, TraceRecord, RECORD_SIZE,
};

pub const EPOCH_HEADER: [&str; 2] = ["EPOCH", "REQUESTS"];
pub const DAY_HEADER: [&str; 4] = ["DAY", "REQUESTS", "MATCHES", "ISMATCH"];
pub const CALENDAR_HEADER: [&str; 2] = ["DAY", "MATCHES"];

/// Exogenous column names carried by day-level series.
pub const MATCHES: &str = "MATCHES";
pub const ISMATCH: &str = "ISMATCH";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochCount {
    pub epoch: u32,
    pub requests: u64,
}

/// Requests per second. Only observed epochs appear, so every count is at
/// least one and epochs are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpochRequestsSeries {
    pub rows: Vec<EpochCount>,
}

/// Counts the multiplicity of every epoch. Input order does not matter.
pub fn count_duplicates<I: IntoIterator<Item = u32>>(epochs: I) -> EpochRequestsSeries {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for epoch in epochs {
        *counts.entry(epoch).or_default() += 1;
    }
    EpochRequestsSeries {
        rows: counts
            .into_iter()
            .map(|(epoch, requests)| EpochCount { epoch, requests })
            .collect(),
    }
}

/// Like [`count_duplicates`] but over a fallible stream, stopping at the first error.
pub fn try_count_duplicates<I: IntoIterator<Item = Result<u32>>>(
    epochs: I,
) -> Result<EpochRequestsSeries> {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for epoch in epochs {
        *counts.entry(epoch?).or_default() += 1;
    }
    Ok(EpochRequestsSeries {
        rows: counts
            .into_iter()
            .map(|(epoch, requests)| EpochCount { epoch, requests })
            .collect(),
    })
}

impl EpochRequestsSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_requests(&self) -> u64 {
        self.rows.iter().map(|r| r.requests).sum()
    }

    /// Converts to a time series indexed by epoch second. With `fill_gaps`,
    /// seconds between the first and last observed epoch with no requests are
    /// inserted as zeros.
    pub fn to_time_series(&self, name: &str, fill_gaps: bool) -> Result<TimeSeries> {
        let mut indices = Vec::with_capacity(self.rows.len());
        let mut values = Vec::with_capacity(self.rows.len());
        let mut prev: Option<u32> = None;
        for row in &self.rows {
            if fill_gaps {
                if let Some(p) = prev {
                    for missing in p + 1..row.epoch {
                        indices.push(i64::from(missing));
                        values.push(0.0);
                    }
                }
            }
            indices.push(i64::from(row.epoch));
            values.push(row.requests as f64);
            prev = Some(row.epoch);
        }
        TimeSeries::new(name, indices, values)
    }

    pub fn write_tsv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = tsv::writer(out);
        w.write_record(EPOCH_HEADER)?;
        for row in &self.rows {
            w.write_record([row.epoch.to_string(), row.requests.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_tsv(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table = tsv::read_expecting(path, &EPOCH_HEADER)?;
        let mut rows = Vec::with_capacity(table.rows.len());
        for (line, rec) in &table.rows {
            let epoch: u32 = tsv::field(path, *line, rec, 0)?;
            let requests: u64 = tsv::field(path, *line, rec, 1)?;
            if let Some(prev) = rows.last().map(|r: &EpochCount| r.epoch) {
                if epoch <= prev {
                    return Err(tsv::table_error(path, *line, "epochs must be strictly increasing".into()));
                }
            }
            rows.push(EpochCount { epoch, requests });
        }
        Ok(EpochRequestsSeries { rows })
    }
}

/// Number of matches played per day. Days absent from the calendar had none.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchCalendar {
    pub entries: BTreeMap<u32, u32>,
}

impl MatchCalendar {
    pub fn matches(&self, day: u32) -> u32 {
        self.entries.get(&day).copied().unwrap_or(0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table = tsv::read_expecting(path, &CALENDAR_HEADER)?;
        let mut entries = BTreeMap::new();
        for (line, rec) in &table.rows {
            let day: u32 = tsv::field(path, *line, rec, 0)?;
            let matches: u32 = tsv::field(path, *line, rec, 1)?;
            entries.insert(day, matches);
        }
        Ok(MatchCalendar { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = tsv::create(path)?;
        w.write_record(CALENDAR_HEADER)?;
        for (day, matches) in &self.entries {
            w.write_record([day.to_string(), matches.to_string()])?;
        }
        tsv::finish(path, w)
    }
}

impl FromIterator<(u32, u32)> for MatchCalendar {
    fn from_iter<T: IntoIterator<Item = (u32, u32)>>(iter: T) -> Self {
        MatchCalendar {
            entries: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayRow {
    pub day: u32,
    pub requests: u64,
    pub matches: u32,
    pub is_match: u8,
}

/// Requests per day over a contiguous `1..=N` day range.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DayRequestsSeries {
    pub rows: Vec<DayRow>,
}

impl DayRequestsSeries {
    pub fn total_requests(&self) -> u64 {
        self.rows.iter().map(|r| r.requests).sum()
    }

    /// Request counts indexed by day, with `MATCHES` and `ISMATCH` as
    /// exogenous columns.
    pub fn to_time_series(&self, name: &str) -> Result<TimeSeries> {
        let indices = self.rows.iter().map(|r| i64::from(r.day)).collect();
        let values = self.rows.iter().map(|r| r.requests as f64).collect();
        TimeSeries::new(name, indices, values)?
            .with_exogenous(MATCHES, self.rows.iter().map(|r| f64::from(r.matches)).collect())?
            .with_exogenous(ISMATCH, self.rows.iter().map(|r| f64::from(r.is_match)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = tsv::create(path)?;
        w.write_record(DAY_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.day.to_string(),
                r.requests.to_string(),
                r.matches.to_string(),
                r.is_match.to_string(),
            ])?;
        }
        tsv::finish(path, w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table = tsv::read_expecting(path, &DAY_HEADER)?;
        let mut rows = Vec::with_capacity(table.rows.len());
        for (line, rec) in &table.rows {
            let row = DayRow {
                day: tsv::field(path, *line, rec, 0)?,
                requests: tsv::field(path, *line, rec, 1)?,
                matches: tsv::field(path, *line, rec, 2)?,
                is_match: tsv::field(path, *line, rec, 3)?,
            };
            if row.day as usize != rows.len() + 1 {
                return Err(tsv::table_error(path, *line, format!("expected day {}", rows.len() + 1)));
            }
            if row.is_match != u8::from(row.matches >= 1) {
                return Err(tsv::table_error(path, *line, "ISMATCH disagrees with MATCHES".into()));
            }
            rows.push(row);
        }
        Ok(DayRequestsSeries { rows })
    }
}

/// Parses `wc_day<D>_<P>` (with any trailing `.ext`) into `(D, P)`.
pub fn parse_trace_name(name: &str) -> Result<(u32, u32)> {
    let bad = || Error::TraceFileName(name.to_string());
    let base = Path::new(name)
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(bad)?;
    let rest = base.strip_prefix("wc_day").ok_or_else(bad)?;
    let (day, rest) = split_digits(rest).ok_or_else(bad)?;
    let rest = rest.strip_prefix('_').ok_or_else(bad)?;
    let (part, rest) = split_digits(rest).ok_or_else(bad)?;
    if !(rest.is_empty() || rest.starts_with('.')) || day == 0 {
        return Err(bad());
    }
    Ok((day, part))
}

fn split_digits(s: &str) -> Option<(u32, &str)> {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let n = s[..end].parse().ok()?;
    Some((n, &s[end..]))
}

/// Sums per-file request counts into days `1..=total_days`, filling match
/// columns from the calendar.
pub fn aggregate_days(
    file_counts: &[(String, u64)],
    calendar: &MatchCalendar,
    total_days: u32,
) -> Result<DayRequestsSeries> {
    if total_days == 0 {
        return Err(Error::config("total_days must be positive"));
    }
    let mut requests = vec![0u64; total_days as usize];
    for (name, count) in file_counts {
        let (day, _) = parse_trace_name(name)?;
        if day > total_days {
            return Err(Error::DayOutOfRange { day, total_days });
        }
        requests[day as usize - 1] += count;
    }
    let rows = (1..=total_days)
        .zip(requests)
        .map(|(day, requests)| {
            let matches = calendar.matches(day);
            DayRow {
                day,
                requests,
                matches,
                is_match: u8::from(matches >= 1),
            }
        })
        .collect();
    Ok(DayRequestsSeries { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sample_row() {
        let series = count_duplicates(std::iter::repeat(898207201).take(145));
        assert_eq!(series.rows, vec![EpochCount { epoch: 898207201, requests: 145 }]);
    }

    #[test]
    fn duplicates_unordered() {
        let got = count_duplicates([7, 5, 7, 9, 5, 5]);
        let pairs: Vec<_> = got.rows.iter().map(|r| (r.epoch, r.requests)).collect();
        assert_eq!(pairs, vec![(5, 3), (7, 2), (9, 1)]);
        assert!(count_duplicates(std::iter::empty()).is_empty());
    }

    #[test]
    fn trace_names() {
        assert_eq!(parse_trace_name("wc_day38_2.gz").unwrap(), (38, 2));
        assert_eq!(parse_trace_name("/x/y/wc_day6_1").unwrap(), (6, 1));
        assert_eq!(parse_trace_name("wc_day66_10.gz.count.txt").unwrap(), (66, 10));
        for bad in ["wc_day_1", "day6_1", "wc_day6", "wc_day0_1", "wc_day6_1x", "wc_day6-1"] {
            assert!(parse_trace_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn aggregate_sample_day() {
        let cal: MatchCalendar = [(46, 2)].into_iter().collect();
        let days = aggregate_days(&[("wc_day46_1".into(), 50_395_084)], &cal, 92).unwrap();
        assert_eq!(days.rows.len(), 92);
        assert_eq!(
            days.rows[45],
            DayRow { day: 46, requests: 50_395_084, matches: 2, is_match: 1 }
        );
    }

    #[test]
    fn aggregate_split_day() {
        let counts = [("wc_day38_1.gz".to_string(), 6_999_999), ("wc_day38_2.gz".to_string(), 188_042)];
        let days = aggregate_days(&counts, &MatchCalendar::default(), 92).unwrap();
        assert_eq!(days.rows[37].requests, 7_188_041);
        assert_eq!(days.total_requests(), 7_188_041);
    }

    #[test]
    fn aggregate_filler_days() {
        let cal: MatchCalendar = [(3, 1)].into_iter().collect();
        let days = aggregate_days(&[], &cal, 4).unwrap();
        let got: Vec<_> = days.rows.iter().map(|r| (r.day, r.requests, r.matches, r.is_match)).collect();
        assert_eq!(got, vec![(1, 0, 0, 0), (2, 0, 0, 0), (3, 0, 1, 1), (4, 0, 0, 0)]);
    }

    #[test]
    fn aggregate_errors() {
        let cal = MatchCalendar::default();
        assert!(matches!(
            aggregate_days(&[("access.log".into(), 1)], &cal, 4),
            Err(Error::TraceFileName(name)) if name == "access.log"
        ));
        assert!(matches!(
            aggregate_days(&[("wc_day5_1".into(), 1)], &cal, 4),
            Err(Error::DayOutOfRange { day: 5, total_days: 4 })
        ));
    }

    #[test]
    fn gap_filling_is_opt_in() {
        let series = count_duplicates([10, 10, 13]);
        let plain = series.to_time_series("s", false).unwrap();
        assert_eq!(plain.values, vec![2.0, 1.0]);
        let filled = series.to_time_series("s", true).unwrap();
        assert_eq!(filled.indices, vec![10, 11, 12, 13]);
        assert_eq!(filled.values, vec![2.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn tsv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wc_day6_1.count.txt");
        let series = count_duplicates([898207202, 898207201, 898207201]);
        series.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "EPOCH\tREQUESTS\n898207201\t2\n898207202\t1\n");
        assert_eq!(EpochRequestsSeries::load(&path).unwrap(), series);

        let cal: MatchCalendar = [(2, 3)].into_iter().collect();
        let days = aggregate_days(&[("wc_day1_1".into(), 9)], &cal, 3).unwrap();
        let path = dir.path().join("day-requests.tsv");
        days.save(&path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "DAY\tREQUESTS\tMATCHES\tISMATCH\n1\t9\t0\t0\n2\t0\t3\t1\n3\t0\t0\t0\n"
        );
        assert_eq!(DayRequestsSeries::load(&path).unwrap(), days);

        let path = dir.path().join("calendar.tsv");
        cal.save(&path).unwrap();
        assert_eq!(MatchCalendar::load(&path).unwrap(), cal);
    }

    #[test]
    fn day_table_rejects_inconsistent_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        std::fs::write(&path, "DAY\tREQUESTS\tMATCHES\tISMATCH\n1\t5\t2\t0\n").unwrap();
        assert!(matches!(DayRequestsSeries::load(&path), Err(Error::Table { line: 2, .. })));
    }
}
