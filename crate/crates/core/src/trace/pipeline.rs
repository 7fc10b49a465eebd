use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{parse_trace_name, stream_epochs_with, try_count_duplicates, RecordLayout, TraceFormat};
use crate::error::{Error, Result};
use crate::tsv;

pub const MANIFEST_HEADER: [&str; 4] = ["INPUT", "OUTPUT", "RECORDS", "ERROR"];
const COUNT_SUFFIX: &str = ".count.txt";

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub format: TraceFormat,
    pub layout: RecordLayout,
    /// Worker cap; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub records: Option<u64>,
    pub error: Option<String>,
}

/// Per-file outcome of a pipeline run, ordered by (day, part, file name).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn failures(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.error.is_some())
    }

    /// `(input file name, record count)` for every successful file, the shape
    /// [`super::aggregate_days`] consumes.
    pub fn file_counts(&self) -> Vec<(String, u64)> {
        self.entries
            .iter()
            .filter_map(|e| {
                let name = e.input.file_name()?.to_string_lossy().into_owned();
                Some((name, e.records?))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = tsv::create(path)?;
        w.write_record(MANIFEST_HEADER)?;
        for e in &self.entries {
            w.write_record([
                e.input.display().to_string(),
                e.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                e.records.map(|n| n.to_string()).unwrap_or_default(),
                e.error.clone().unwrap_or_default(),
            ])?;
        }
        tsv::finish(path, w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table = tsv::read_expecting(path, &MANIFEST_HEADER)?;
        let mut entries = Vec::with_capacity(table.rows.len());
        for (line, rec) in &table.rows {
            let get = |i: usize| rec.get(i).unwrap_or("").to_string();
            let records = match get(2).as_str() {
                "" => None,
                _ => Some(tsv::field(path, *line, rec, 2)?),
            };
            let non_empty = |s: String| (!s.is_empty()).then_some(s);
            entries.push(ManifestEntry {
                input: PathBuf::from(get(0)),
                output: non_empty(get(1)).map(PathBuf::from),
                records,
                error: non_empty(get(3)),
            });
        }
        Ok(Manifest { entries })
    }
}

/// Converts every `wc_day<D>_<P>[.ext]` trace file in `input_dir` into
/// `wc_day<D>_<P>.count.txt` in `output_dir`.
///
/// A bad file is recorded in the manifest and does not stop the others.
pub fn run_pipeline(input_dir: &Path, output_dir: &Path, options: &PipelineOptions) -> Result<Manifest> {
    options.layout.validate()?;
    let mut inputs = Vec::new();
    for entry in std::fs::read_dir(input_dir).map_err(|e| Error::io(input_dir, e))? {
        let entry = entry.map_err(|e| Error::io(input_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(COUNT_SUFFIX) || !entry.path().is_file() {
            continue;
        }
        if let Ok((day, part)) = parse_trace_name(&name) {
            inputs.push((day, part, name, entry.path()));
        }
    }
    inputs.sort();
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let process = || -> Vec<ManifestEntry> {
        inputs
            .par_iter()
            .map(|(day, part, _, input)| {
                let output = output_dir.join(format!("wc_day{day}_{part}{COUNT_SUFFIX}"));
                match process_file(input, &output, options) {
                    Ok(records) => ManifestEntry {
                        input: input.clone(),
                        output: Some(output),
                        records: Some(records),
                        error: None,
                    },
                    Err(e) => ManifestEntry {
                        input: input.clone(),
                        output: None,
                        records: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    };

    let entries = match options.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::config(e.to_string()))?
            .install(process),
        None => process(),
    };
    Ok(Manifest { entries })
}

fn process_file(input: &Path, output: &Path, options: &PipelineOptions) -> Result<u64> {
    let stream = stream_epochs_with(input, options.format, options.layout)?;
    let series = try_count_duplicates(stream)?;
    series.save(output)?;
    Ok(series.total_requests())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::EpochRequestsSeries;

    fn write_records(path: &Path, stamps: &[u32]) {
        let mut bytes = Vec::new();
        for &ts in stamps {
            bytes.extend_from_slice(&ts.to_be_bytes());
            bytes.extend_from_slice(&[0u8; 16]);
        }
        std::fs::write(path, bytes).unwrap();
    }

    #[test]
    fn one_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (input, out) = (dir.path().join("in"), dir.path().join("out"));
        std::fs::create_dir(&input).unwrap();
        write_records(&input.join("wc_day6_1"), &[10, 10, 11]);
        std::fs::write(input.join("README"), "not a trace").unwrap();

        let manifest = run_pipeline(&input, &out, &PipelineOptions::default()).unwrap();
        assert_eq!(manifest.entries.len(), 1);
        assert_eq!(manifest.entries[0].records, Some(3));
        let series = EpochRequestsSeries::load(&out.join("wc_day6_1.count.txt")).unwrap();
        assert_eq!(series.total_requests(), 3);
        assert_eq!(manifest.file_counts(), vec![("wc_day6_1".to_string(), 3)]);
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = run_pipeline(dir.path(), &dir.path().join("out"), &PipelineOptions::default()).unwrap();
        assert!(manifest.entries.is_empty());
    }

    #[test]
    fn corrupt_file_does_not_abort() {
        let dir = tempfile::tempdir().unwrap();
        write_records(&dir.path().join("wc_day1_1"), &[1, 2]);
        std::fs::write(dir.path().join("wc_day1_2"), [0u8; 21]).unwrap();
        let out = dir.path().join("out");
        let manifest = run_pipeline(dir.path(), &out, &PipelineOptions { jobs: Some(2), ..Default::default() }).unwrap();
        assert_eq!(manifest.entries.len(), 2);
        assert_eq!(manifest.failures().count(), 1);
        assert!(manifest.entries[1].error.as_deref().unwrap().contains("not a multiple"));

        let path = out.join("manifest.tsv");
        manifest.save(&path).unwrap();
        assert_eq!(Manifest::load(&path).unwrap(), manifest);
    }

    #[test]
    fn missing_input_dir() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_pipeline(&dir.path().join("nope"), dir.path(), &PipelineOptions::default()).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
