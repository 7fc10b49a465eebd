use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size of one binary trace record on the wire.
pub const RECORD_SIZE: usize = 20;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];
const READ_BUFFER: usize = 1 << 16;

/// One decoded binary log entry.
///
/// Wire layout, all big-endian: timestamp, client id, object id, size (4 bytes
/// each), then method, status, type and server (1 byte each).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceRecord {
    pub timestamp: u32,
    pub client_id: u32,
    pub object_id: u32,
    pub size: u32,
    pub method: u8,
    pub status: u8,
    pub doc_type: u8,
    pub server: u8,
}

impl TraceRecord {
    pub fn to_bytes(&self) -> [u8; RECORD_SIZE] {
        let mut out = [0u8; RECORD_SIZE];
        out[0..4].copy_from_slice(&self.timestamp.to_be_bytes());
        out[4..8].copy_from_slice(&self.client_id.to_be_bytes());
        out[8..12].copy_from_slice(&self.object_id.to_be_bytes());
        out[12..16].copy_from_slice(&self.size.to_be_bytes());
        out[16] = self.method;
        out[17] = self.status;
        out[18] = self.doc_type;
        out[19] = self.server;
        out
    }
}

/// Decodes a record found at the start of a stream.
pub fn decode_record(block: &[u8]) -> Result<TraceRecord> {
    decode_record_at(block, 0)
}

/// Decodes a record; `offset` is the block's position in its file and only
/// feeds the error message.
pub fn decode_record_at(block: &[u8], offset: u64) -> Result<TraceRecord> {
    if block.len() != RECORD_SIZE {
        return Err(Error::TruncatedRecord {
            offset,
            len: block.len(),
            expected: RECORD_SIZE,
        });
    }
    let word = |i: usize| u32::from_be_bytes([block[i], block[i + 1], block[i + 2], block[i + 3]]);
    Ok(TraceRecord {
        timestamp: word(0),
        client_id: word(4),
        object_id: word(8),
        size: word(12),
        method: block[16],
        status: block[17],
        doc_type: block[18],
        server: block[19],
    })
}

/// Where the timestamp lives inside a binary record.
///
/// Only the timestamp is consumed, so this is all that needs adjusting if a
/// trace source uses a different record layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordLayout {
    pub record_size: usize,
    pub timestamp_offset: usize,
    /// 4 or 8 bytes, big-endian.
    pub timestamp_width: usize,
}

impl Default for RecordLayout {
    fn default() -> Self {
        RecordLayout {
            record_size: RECORD_SIZE,
            timestamp_offset: 0,
            timestamp_width: 4,
        }
    }
}

impl RecordLayout {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.timestamp_width, 4 | 8) {
            return Err(Error::config(format!(
                "timestamp width must be 4 or 8 bytes, got {}",
                self.timestamp_width
            )));
        }
        if self.timestamp_offset + self.timestamp_width > self.record_size {
            return Err(Error::config(format!(
                "timestamp field [{}, {}) does not fit a {}-byte record",
                self.timestamp_offset,
                self.timestamp_offset + self.timestamp_width,
                self.record_size
            )));
        }
        Ok(())
    }

    fn timestamp(&self, record: &[u8]) -> Result<u32> {
        let field = &record[self.timestamp_offset..self.timestamp_offset + self.timestamp_width];
        match self.timestamp_width {
            4 => Ok(u32::from_be_bytes(field.try_into().unwrap())),
            _ => {
                let wide = u64::from_be_bytes(field.try_into().unwrap());
                u32::try_from(wide)
                    .map_err(|_| Error::config(format!("timestamp {wide} exceeds 32 bits")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    /// Fixed-size binary records, optionally gzip-compressed.
    #[default]
    Binary,
    /// One decimal epoch per line, optionally gzip-compressed.
    Text,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(TraceFormat::Binary),
            "text" => Ok(TraceFormat::Text),
            other => Err(Error::config(format!("unknown trace format {other:?}"))),
        }
    }
}

/// Streaming iterator over the epochs of one trace file.
///
/// Memory use is a fixed read buffer plus one record, independent of the
/// file size.
pub struct EpochStream {
    path: PathBuf,
    reader: Box<dyn BufRead + Send>,
    format: TraceFormat,
    layout: RecordLayout,
    record: Vec<u8>,
    line: String,
    offset: u64,
    line_no: usize,
    done: bool,
}

/// Opens `path` and streams one epoch per record (or line) in file order.
pub fn stream_epochs(path: impl AsRef<Path>, format: TraceFormat) -> Result<EpochStream> {
    stream_epochs_with(path, format, RecordLayout::default())
}

pub fn stream_epochs_with(
    path: impl AsRef<Path>,
    format: TraceFormat,
    layout: RecordLayout,
) -> Result<EpochStream> {
    layout.validate()?;
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut raw = BufReader::with_capacity(READ_BUFFER, file);
    let head = raw.fill_buf().map_err(|e| Error::io(&path, e))?;
    let reader: Box<dyn BufRead + Send> = if head.starts_with(&GZIP_MAGIC) {
        Box::new(BufReader::with_capacity(READ_BUFFER, MultiGzDecoder::new(raw)))
    } else {
        Box::new(raw)
    };
    Ok(EpochStream {
        path,
        reader,
        format,
        layout,
        record: vec![0; layout.record_size],
        line: String::new(),
        offset: 0,
        line_no: 0,
        done: false,
    })
}

impl EpochStream {
    pub fn path(&self) -> &Path {
        &self.path
    }

    fn next_binary(&mut self) -> Option<Result<u32>> {
        let mut filled = 0;
        while filled < self.record.len() {
            match self.reader.read(&mut self.record[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            }
        }
        if filled == 0 {
            return None;
        }
        if filled < self.record.len() {
            return Some(Err(Error::PayloadLength {
                path: self.path.clone(),
                len: self.offset + filled as u64,
                record_size: self.layout.record_size,
            }));
        }
        self.offset += filled as u64;
        Some(self.layout.timestamp(&self.record))
    }

    fn next_text(&mut self) -> Option<Result<u32>> {
        loop {
            self.line.clear();
            match self.reader.read_line(&mut self.line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            }
            self.line_no += 1;
            let trimmed = self.line.trim();
            if trimmed.is_empty() {
                continue;
            }
            return Some(trimmed.parse::<u32>().map_err(|_| Error::TextLine {
                path: self.path.clone(),
                line: self.line_no,
                content: trimmed.to_string(),
            }));
        }
    }
}

impl Iterator for EpochStream {
    type Item = Result<u32>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match self.format {
            TraceFormat::Binary => self.next_binary(),
            TraceFormat::Text => self.next_text(),
        };
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Number of requests (records or lines) in a trace file.
pub fn count_requests(path: impl AsRef<Path>, format: TraceFormat) -> Result<u64> {
    count_requests_with(path, format, RecordLayout::default())
}

pub fn count_requests_with(
    path: impl AsRef<Path>,
    format: TraceFormat,
    layout: RecordLayout,
) -> Result<u64> {
    let mut n = 0u64;
    for epoch in stream_epochs_with(path, format, layout)? {
        epoch?;
        n += 1;
    }
    Ok(n)
}
