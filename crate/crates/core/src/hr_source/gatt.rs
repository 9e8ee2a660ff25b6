//! Heart Rate Measurement characteristic (0x2A37) payload decoding.
//!
//! Layout, little-endian throughout:
//!
//! - byte 0: flags
//!   - bit 0: heart rate format (0 = u8, 1 = u16)
//!   - bits 1-2: sensor contact status (ignored here)
//!   - bit 3: energy expended present (u16, skipped)
//!   - bit 4: RR intervals present (u16 each, 1/1024 s units)
//! - heart rate value
//! - optional energy expended
//! - optional RR intervals until end of payload

use super::{BPM_MAX, BPM_MIN};
use thiserror::Error;

const FLAG_HR_U16: u8 = 0x01;
const FLAG_ENERGY: u8 = 0x08;
const FLAG_RR: u8 = 0x10;

/// RR intervals are transmitted in units of 1/1024 s.
pub const RR_UNITS_PER_SECOND: f64 = 1024.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("truncated heart rate payload: {len} bytes, flags require at least {needed}")]
    TruncatedPayload { len: usize, needed: usize },
    #[error("heart rate {0} bpm outside the accepted ({BPM_MIN}, {BPM_MAX}) range")]
    BpmOutOfRange(u16),
}

/// Decoded heart rate measurement, before a timestamp is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct HrMeasurement {
    pub bpm: u16,
    /// Inter-beat intervals in seconds.
    pub rr_intervals: Vec<f64>,
}

/// Decode a raw 0x2A37 notification or read value.
///
/// Never panics; every byte sequence maps to a measurement or a typed error.
pub fn parse_hr_measurement(payload: &[u8]) -> Result<HrMeasurement, PayloadError> {
    let len = payload.len();
    let Some((&flags, body)) = payload.split_first() else {
        return Err(PayloadError::TruncatedPayload { len, needed: 2 });
    };

    let hr_bytes = if flags & FLAG_HR_U16 != 0 { 2 } else { 1 };
    let energy_bytes = if flags & FLAG_ENERGY != 0 { 2 } else { 0 };
    let needed = 1 + hr_bytes + energy_bytes;
    if len < needed {
        return Err(PayloadError::TruncatedPayload { len, needed });
    }

    let bpm = match hr_bytes {
        1 => u16::from(body[0]),
        _ => u16::from_le_bytes([body[0], body[1]]),
    };
    let tail = &body[hr_bytes + energy_bytes..];

    let rr_intervals = if flags & FLAG_RR != 0 {
        if tail.len() % 2 != 0 {
            return Err(PayloadError::TruncatedPayload {
                len,
                needed: len + 1,
            });
        }
        tail.chunks_exact(2)
            .map(|b| f64::from(u16::from_le_bytes([b[0], b[1]])) / RR_UNITS_PER_SECOND)
            .collect()
    } else {
        Vec::new()
    };

    if !(f64::from(bpm) > BPM_MIN && f64::from(bpm) < BPM_MAX) {
        return Err(PayloadError::BpmOutOfRange(bpm));
    }

    Ok(HrMeasurement { bpm, rr_intervals })
}
