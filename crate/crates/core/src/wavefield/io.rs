//! Wavefield containers: annotated CSV and the `LWF1` binary layout.
//!
//! CSV: `# key=value` lines, a header row `t,<x_0>,<x_1>,...` holding the
//! positions in metres, then one row per time sample.
//!
//! LWF1 (little endian): magic `LWF1`, `u64` n_times, `u64` n_positions,
//! `f64` path length, `u64` metadata byte count, metadata as `key=value`
//! lines, then times, positions and the time-major sample matrix as `f64`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Wavefield;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LWF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavefieldFormat {
    #[default]
    Csv,
    Bin,
}

pub fn save_wavefield(path: &Path, w: &Wavefield, format: WavefieldFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_wavefield(&mut out, w, format)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Loads either container; the format is recognised by the magic bytes.
pub fn load_wavefield(path: &Path) -> Result<Wavefield> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_wavefield(BufReader::new(file), &path.display().to_string())
}

pub fn write_wavefield<W: Write>(out: W, w: &Wavefield, format: WavefieldFormat) -> Result<()> {
    match format {
        WavefieldFormat::Csv => write_csv(out, w),
        WavefieldFormat::Bin => write_bin(out, w),
    }
}

pub fn read_wavefield<R: Read>(mut input: R, source_name: &str) -> Result<Wavefield> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(source_name, e))?;
    if bytes.starts_with(MAGIC) {
        read_bin(&bytes, source_name)
    } else {
        read_csv(&bytes, source_name)
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<wavefield>", e)
}

fn write_csv<W: Write>(mut out: W, w: &Wavefield) -> Result<()> {
    writeln!(out, "# sample_rate_hz={}", w.sample_rate()).map_err(io_err)?;
    writeln!(out, "# path_length_m={}", w.path_length).map_err(io_err)?;
    writeln!(out, "# n_times={}", w.n_times()).map_err(io_err)?;
    writeln!(out, "# n_positions={}", w.n_positions()).map_err(io_err)?;
    for (k, v) in &w.meta {
        writeln!(out, "# {k}={v}").map_err(io_err)?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut row: Vec<String> = Vec::with_capacity(w.n_positions() + 1);
    row.push("t".into());
    row.extend(w.positions().iter().map(|x| x.to_string()));
    wtr.write_record(&row).map_err(csv_err)?;
    let nx = w.n_positions();
    for (it, t) in w.times().iter().enumerate() {
        row.clear();
        row.push(t.to_string());
        row.extend(
            w.data()[it * nx..(it + 1) * nx]
                .iter()
                .map(|v| v.to_string()),
        );
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// Header keys written by this module rather than carried as metadata.
const RESERVED: [&str; 4] = ["sample_rate_hz", "path_length_m", "n_times", "n_positions"];

fn read_csv(bytes: &[u8], source_name: &str) -> Result<Wavefield> {
    let parse_err = |location: String, message: String| Error::Parse {
        source_name: source_name.to_string(),
        location,
        message,
    };
    let text = std::str::from_utf8(bytes)
        .map_err(|e| parse_err(format!("byte {}", e.valid_up_to()), "invalid UTF-8".into()))?;

    let mut header = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        let (k, v) = rest
            .trim()
            .split_once('=')
            .ok_or_else(|| parse_err(format!("line {}", i + 1), "expected `# key=value`".into()))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
    }
    let path_length: f64 = header
        .get("path_length_m")
        .ok_or_else(|| Error::MissingColumn("path_length_m".into()))?
        .parse()
        .map_err(|e| parse_err("header".into(), format!("path_length_m: {e}")))?;

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let cols = rdr.headers().map_err(csv_err_in(source_name))?.clone();
    if cols.get(0).map(str::trim) != Some("t") {
        return Err(Error::MissingColumn("t".into()));
    }
    if cols.len() < 2 {
        return Err(Error::MissingColumn("x".into()));
    }
    let positions = cols
        .iter()
        .skip(1)
        .enumerate()
        .map(|(j, s)| {
            s.trim().parse::<f64>().map_err(|e| {
                parse_err(
                    "header row".into(),
                    format!("position column {}: {e}", j + 1),
                )
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut times = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err_in(source_name))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let mut fields = rec.iter();
        let mut num = |col: &str| -> Result<f64> {
            let s = fields.next().ok_or_else(|| {
                parse_err(format!("line {line}"), format!("missing column {col}"))
            })?;
            s.trim()
                .parse()
                .map_err(|e| parse_err(format!("line {line}"), format!("column {col}: {e}")))
        };
        times.push(num("t")?);
        for j in 0..positions.len() {
            data.push(num(&format!("x{j}"))?);
        }
    }
    let mut w = Wavefield::new(times, positions, data, path_length)?;
    w.meta = header
        .into_iter()
        .filter(|(k, _)| !RESERVED.contains(&k.as_str()))
        .collect();
    Ok(w)
}

fn csv_err(e: csv::Error) -> Error {
    csv_err_in("<wavefield>")(e)
}

fn csv_err_in(source_name: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse {
        source_name: source_name.to_string(),
        location: e
            .position()
            .map(|p| format!("line {}", p.line()))
            .unwrap_or_else(|| "?".into()),
        message: e.to_string(),
    }
}

fn write_bin<W: Write>(mut out: W, w: &Wavefield) -> Result<()> {
    let meta: String = w.meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    out.write_all(MAGIC).map_err(io_err)?;
    out.write_all(&(w.n_times() as u64).to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&(w.n_positions() as u64).to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&w.path_length.to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&(meta.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    out.write_all(meta.as_bytes()).map_err(io_err)?;
    for v in w.times().iter().chain(w.positions()).chain(w.data()) {
        out.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

/// Bounds-checked little-endian cursor reporting byte offsets in errors.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    source_name: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Parse {
                source_name: self.source_name.to_string(),
                location: format!("byte {}", self.pos),
                message: format!("truncated file while reading {what}"),
            }),
        }
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Parse {
            source_name: self.source_name.to_string(),
            location: format!("byte {}", self.pos),
            message: format!("{what} count overflows"),
        })?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn read_bin(bytes: &[u8], source_name: &str) -> Result<Wavefield> {
    let mut c = Cursor {
        bytes,
        pos: MAGIC.len(),
        source_name,
    };
    let nt = c.u64("n_times")? as usize;
    let nx = c.u64("n_positions")? as usize;
    let path_length = f64::from_bits(c.u64("path length")?);
    let meta_len = c.u64("metadata length")? as usize;
    let meta_at = c.pos;
    let meta = std::str::from_utf8(c.take(meta_len, "metadata")?).map_err(|_| Error::Parse {
        source_name: source_name.to_string(),
        location: format!("byte {meta_at}"),
        message: "metadata is not UTF-8".into(),
    })?;
    let times = c.f64s(nt, "times")?;
    let positions = c.f64s(nx, "positions")?;
    let data = c.f64s(nt.saturating_mul(nx), "samples")?;
    if c.pos != bytes.len() {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            location: format!("byte {}", c.pos),
            message: format!("{} trailing bytes", bytes.len() - c.pos),
        });
    }
    let mut w = Wavefield::new(times, positions, data, path_length)?;
    w.meta = meta
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    Ok(w)
}
