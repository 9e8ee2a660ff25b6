//! Per-chunk trace CSV: `t_seconds,rms_amplitude,hr_bpm,multiplier`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// One row per emitted chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Playback time of the chunk start, seconds.
    pub t: f64,
    pub rms_amplitude: f64,
    /// Heart rate behind this chunk's multiplier; `None` before the first
    /// reading arrived.
    pub hr_bpm: Option<f64>,
    pub multiplier: f64,
}

pub const TRACE_HEADER: [&str; 4] = ["t_seconds", "rms_amplitude", "hr_bpm", "multiplier"];

pub fn write_trace<W: Write>(writer: W, records: &[TraceRecord]) -> io::Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(TRACE_HEADER)?;
    for r in records {
        wtr.write_record([
            r.t.to_string(),
            r.rms_amplitude.to_string(),
            r.hr_bpm.map(|v| v.to_string()).unwrap_or_default(),
            r.multiplier.to_string(),
        ])?;
    }
    wtr.flush()
}

pub fn save_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> io::Result<()> {
    write_trace(BufWriter::new(File::create(path)?), records)
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

pub fn read_trace<R: Read>(reader: R) -> io::Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if !header.iter().eq(TRACE_HEADER) {
        return Err(invalid(format!(
            "unexpected trace header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> io::Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| invalid(format!("line {line}: bad `{}` value", TRACE_HEADER[k])))
        };
        let hr_bpm = match rec.get(2) {
            Some("") => None,
            _ => Some(num(2)?),
        };
        out.push(TraceRecord {
            t: num(0)?,
            rms_amplitude: num(1)?,
            hr_bpm,
            multiplier: num(3)?,
        });
    }
    Ok(out)
}

pub fn load_trace(path: impl AsRef<Path>) -> io::Result<Vec<TraceRecord>> {
    read_trace(BufReader::new(File::open(path)?))
}
