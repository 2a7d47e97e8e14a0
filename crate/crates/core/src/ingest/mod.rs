//! Matrix and label file formats, plus PCA reduction.
//!
//! Binary matrix layout (all little-endian):
//!
//! | offset | size  | field                      |
//! |--------|-------|----------------------------|
//! | 0      | 4     | magic `b"TSDS"`            |
//! | 4      | 2     | version, `1`               |
//! | 6      | 2     | reserved, `0`              |
//! | 8      | 8     | rows `n` (u64)             |
//! | 16     | 8     | cols `d` (u64)             |
//! | 24     | 4·n·d | row-major IEEE-754 `f32`   |
//!
//! Files not starting with the magic are parsed as headerless CSV, one row per line.

mod pca;

pub use pca::{apply_pca, fit_pca, PcaModel};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::{EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TSDS";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a binary or CSV matrix, detected by the leading magic bytes.
pub fn load_embedding_matrix(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::BinaryFormat {
            path: path.to_path_buf(),
            offset: e.utf8_error().valid_up_to() as u64,
            message: "neither TSDS magic nor UTF-8 CSV".into(),
        })?;
        parse_csv(path, &text)
    }
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let fail = |offset: usize, message: String| Error::BinaryFormat {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(bytes.len(), "truncated header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(fail(4, format!("unsupported version {version}")));
    }
    let reserved = u16::from_le_bytes([bytes[6], bytes[7]]);
    if reserved != 0 {
        return Err(fail(6, format!("reserved field is {reserved}, expected 0")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if cols == 0 {
        return Err(fail(16, "column count must be at least 1".into()));
    }
    let payload_len = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| fail(8, format!("{rows} x {cols} is too large")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(fail(
            bytes.len(),
            format!(
                "payload ends early: {rows} x {cols} needs {payload_len} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > payload_len {
        return Err(fail(
            HEADER_LEN + payload_len,
            format!(
                "{} trailing bytes after payload",
                payload.len() - payload_len
            ),
        ));
    }
    let mut data = Vec::with_capacity(payload_len / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(fail(HEADER_LEN + 4 * i, format!("non-finite value {v}")));
        }
        data.push(v);
    }
    EmbeddingMatrix::new(rows as usize, cols as usize, data)
}

fn parse_csv(path: &Path, text: &str) -> Result<EmbeddingMatrix> {
    let fail = |line: usize, message: String| Error::TextFormat {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut cols = 0;
    let mut rows = 0;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            return Err(fail(line_no, "blank line".into()));
        }
        let start = data.len();
        for field in line.split(',') {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| fail(line_no, format!("cannot parse {field:?} as a float")))?;
            if !v.is_finite() {
                return Err(fail(line_no, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
        let width = data.len() - start;
        if rows == 0 {
            cols = width;
        } else if width != cols {
            return Err(fail(
                line_no,
                format!("row has {width} columns, expected {cols}"),
            ));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(fail(1, "empty CSV has no column count".into()));
    }
    EmbeddingMatrix::new(rows, cols, data)
}

/// Writes the binary format; loading the file reproduces `matrix` bit-exactly.
pub fn write_embedding_matrix(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&0u16.to_le_bytes())?;
        out.write_all(&(matrix.rows() as u64).to_le_bytes())?;
        out.write_all(&(matrix.cols() as u64).to_le_bytes())?;
        for v in matrix.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}

/// Writes headerless CSV using the shortest round-tripping decimal for each entry.
pub fn write_embedding_csv(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(matrix.as_slice().len() * 10);
    for row in matrix.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&format!("{v:?}"));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Reads one non-negative integer label per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let labels = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line.trim_end_matches('\r');
            line.trim().parse::<u32>().map_err(|_| Error::TextFormat {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("{line:?} is not a non-negative integer label"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelVector::new(labels))
}

pub fn write_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(labels.len() * 2);
    for l in labels.as_slice() {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}
