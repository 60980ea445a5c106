//! Recording ingestion and file helpers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// One channel of one recording file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecording {
    pub file: PathBuf,
    pub channel: usize,
    pub samples: Vec<f64>,
    pub sampling_rate: f64,
    pub fault_class: usize,
    pub load_tag: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct ManifestEntry {
    pub file: PathBuf,
    pub channel: usize,
    pub fault_class: usize,
    pub load_tag: String,
}

/// Parse a manifest CSV with header `file,channel,fault_class,load_tag`.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    let expected = ["file", "channel", "fault_class", "load_tag"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: format!("manifest header must be {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (k, row) in reader.deserialize::<ManifestEntry>().enumerate() {
        out.push(row.map_err(|e| parse_err(path, k + 2, e))?);
    }
    Ok(out)
}

fn parse_err(path: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        msg: e.to_string(),
    }
}

/// Read one channel from a data file. `.bin`/`.f64` files are raw
/// little-endian `f64` (single channel); anything else is CSV with one row
/// per sample and one column per channel. Returns the samples with NaN rows
/// removed, and the number removed.
pub fn read_channel(path: &Path, channel: usize) -> Result<(Vec<f64>, usize)> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let raw: Vec<f64> = if ext == "bin" || ext == "f64" {
        if channel != 0 {
            return Err(Error::invalid(format!(
                "{}: binary files hold a single channel, asked for channel {channel}",
                path.display()
            )));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 8 != 0 {
            return Err(parse_err(
                path,
                0,
                format!("{} bytes is not a whole number of f64 values", bytes.len()),
            ));
        }
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect()
    } else {
        let text = read_to_string(path)?;
        let mut values = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let field = line
                .split(',')
                .nth(channel)
                .ok_or_else(|| parse_err(path, k + 1, format!("no column {channel}")))?;
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, k + 1, format!("cannot parse {field:?} as a number")))?;
            values.push(v);
        }
        values
    };
    let before = raw.len();
    let samples: Vec<f64> = raw.into_iter().filter(|v| !v.is_nan()).collect();
    let dropped = before - samples.len();
    Ok((samples, dropped))
}

/// Load every manifest entry. Paths are relative to the manifest's directory.
pub fn load_recordings(manifest_path: &Path, sampling_rate: f64, class_count: usize) -> Result<Vec<RawRecording>> {
    if !(sampling_rate > 0.0) {
        return Err(Error::invalid(format!(
            "sampling rate must be positive, got {sampling_rate}"
        )));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let entries = read_manifest(manifest_path)?;
    let mut out = Vec::with_capacity(entries.len());
    for (k, entry) in entries.into_iter().enumerate() {
        if entry.fault_class >= class_count {
            return Err(Error::Parse {
                path: manifest_path.into(),
                line: k + 2,
                msg: format!("fault_class {} outside 0..{class_count}", entry.fault_class),
            });
        }
        let file = base.join(&entry.file);
        let (samples, dropped) = read_channel(&file, entry.channel)?;
        if dropped > 0 {
            log::warn!("{}: dropped {dropped} NaN samples", file.display());
        }
        if samples.is_empty() {
            return Err(Error::invalid(format!(
                "{}: no samples after NaN removal",
                file.display()
            )));
        }
        out.push(RawRecording {
            file,
            channel: entry.channel,
            samples,
            sampling_rate,
            fault_class: entry.fault_class,
            load_tag: entry.load_tag,
        });
    }
    Ok(out)
}
