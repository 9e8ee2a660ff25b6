//! Replay CSV: header `t_seconds,bpm`, one sample per LF-terminated line.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! recorded file replays to bit-identical samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{is_valid_bpm, HeartRateSample, MonotoneGuard, SourceError};

pub const REPLAY_HEADER: [&str; 2] = ["t_seconds", "bpm"];

pub fn read_replay(path: impl AsRef<Path>) -> Result<Vec<HeartRateSample>, SourceError> {
    parse_replay(BufReader::new(File::open(path)?))
}

pub fn parse_replay<R: Read>(reader: R) -> Result<Vec<HeartRateSample>, SourceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let malformed = |line: usize, reason: String| SourceError::MalformedReplayRow { line, reason };

    match records.next() {
        Some(Ok(header)) if header.iter().eq(REPLAY_HEADER) => {}
        Some(Ok(header)) => {
            return Err(malformed(
                1,
                format!(
                    "expected header `t_seconds,bpm`, found `{}`",
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            ))
        }
        Some(Err(e)) => return Err(malformed(1, e.to_string())),
        None => return Err(malformed(1, "missing header".into())),
    }

    let mut guard = MonotoneGuard::default();
    let mut samples = Vec::new();
    for (idx, record) in records.enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.len() != 2 {
            return Err(malformed(
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let field = |i: usize, name: &str| -> Result<f64, SourceError> {
            record[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("bad {name} `{}`", &record[i])))
        };
        let t = field(0, "t_seconds")?;
        let bpm = field(1, "bpm")?;
        if t < 0.0 {
            return Err(malformed(line, format!("negative timestamp {t}")));
        }
        if !is_valid_bpm(bpm) {
            return Err(malformed(line, format!("bpm {bpm} out of range")));
        }
        guard.check(t)?;
        samples.push(HeartRateSample {
            t,
            bpm,
            rr_intervals: Vec::new(),
        });
    }
    Ok(samples)
}

pub fn write_replay<W: Write, I>(writer: W, samples: I) -> Result<usize, SourceError>
where
    I: IntoIterator<Item = HeartRateSample>,
{
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(REPLAY_HEADER).map_err(csv_io)?;
    let mut n = 0;
    for s in samples {
        wtr.write_record([s.t.to_string(), s.bpm.to_string()])
            .map_err(csv_io)?;
        n += 1;
    }
    wtr.flush()?;
    Ok(n)
}

/// Write a sample sequence as a replay CSV. Returns the number of rows.
pub fn record_stream<I>(samples: I, path: impl AsRef<Path>) -> Result<usize, SourceError>
where
    I: IntoIterator<Item = HeartRateSample>,
{
    let file = BufWriter::new(File::create(path)?);
    write_replay(file, samples)
}

fn csv_io(e: csv::Error) -> SourceError {
    SourceError::Io(e.into())
}
