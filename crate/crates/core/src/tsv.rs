//! Tab-separated table helpers shared by the file formats.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) struct Table {
    pub header: Vec<String>,
    /// (1-based line number, fields)
    pub rows: Vec<(usize, csv::StringRecord)>,
}

pub(crate) fn read(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let header = reader
        .headers()
        .map_err(|e| table_error(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            table_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, record));
    }
    Ok(Table { header, rows })
}

/// Reads a table and insists on an exact header.
pub(crate) fn read_expecting(path: &Path, expected: &[&str]) -> Result<Table> {
    let table = read(path)?;
    if table.header != expected {
        return Err(table_error(
            path,
            1,
            format!("expected header {:?}, found {:?}", expected.join("\t"), table.header.join("\t")),
        ));
    }
    Ok(table)
}

pub(crate) fn field<T: FromStr>(path: &Path, line: usize, record: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = record
        .get(i)
        .ok_or_else(|| table_error(path, line, format!("missing column {}", i + 1)))?;
    raw.parse()
        .map_err(|_| table_error(path, line, format!("cannot parse {raw:?} in column {}", i + 1)))
}

pub(crate) fn table_error(path: &Path, line: usize, message: String) -> Error {
    Error::Table {
        path: path.to_path_buf(),
        line,
        message,
    }
}

pub(crate) fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().delimiter(b'\t').from_writer(out)
}

pub(crate) fn create(path: &Path) -> Result<csv::Writer<std::io::BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(writer(std::io::BufWriter::new(file)))
}

pub(crate) fn finish<W: Write>(path: &Path, w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}
