//! RIFF/WAVE codec for 16-bit PCM and 32-bit IEEE float, 1–2 channels.
//!
//! 16-bit samples map to `x / 32768`, so full-scale negative is exactly -1.0
//! and full-scale positive is 32767/32768. Encoding rounds `x * 32768` and
//! saturates.

use std::fs;
use std::path::Path;

use super::{AudioClip, AudioError};

const TAG_PCM: u16 = 1;
const TAG_FLOAT: u16 = 3;
const TAG_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavFormat {
    #[default]
    Pcm16,
    Float32,
}

impl WavFormat {
    fn bits(self) -> u16 {
        match self {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        }
    }

    fn tag(self) -> u16 {
        match self {
            WavFormat::Pcm16 => TAG_PCM,
            WavFormat::Float32 => TAG_FLOAT,
        }
    }
}

pub fn decode_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    decode_wav_bytes(&fs::read(path)?)
}

fn corrupt(msg: impl Into<String>) -> AudioError {
    AudioError::CorruptFile(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Fmt {
    format: WavFormat,
    channels: usize,
    sample_rate: u32,
}

fn parse_fmt(body: &[u8]) -> Result<Fmt, AudioError> {
    if body.len() < 16 {
        return Err(corrupt(format!(
            "fmt chunk too short ({} bytes)",
            body.len()
        )));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    if tag == TAG_EXTENSIBLE {
        if body.len() < 40 {
            return Err(corrupt("WAVE_FORMAT_EXTENSIBLE fmt chunk too short"));
        }
        // first two bytes of the subformat GUID carry the format tag
        tag = u16_at(body, 24);
    }
    let format = match (tag, bits) {
        (TAG_PCM, 16) => WavFormat::Pcm16,
        (TAG_FLOAT, 32) => WavFormat::Float32,
        (t, b) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "format tag {t} with {b} bits per sample"
            )))
        }
    };
    if !(1..=2).contains(&channels) {
        return Err(AudioError::UnsupportedFormat(format!(
            "{channels} channels"
        )));
    }
    if sample_rate == 0 {
        return Err(corrupt("zero sample rate"));
    }
    if u32::from(block_align) != u32::from(channels) * u32::from(bits) / 8 {
        return Err(corrupt(format!(
            "block align {block_align} inconsistent with format"
        )));
    }
    Ok(Fmt {
        format,
        channels: channels.into(),
        sample_rate,
    })
}

pub fn decode_wav_bytes(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(corrupt("missing RIFF header"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::UnsupportedFormat(
            "RIFF file is not WAVE".into(),
        ));
    }

    let mut fmt = None;
    let mut data = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let end = start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                corrupt(format!(
                    "chunk `{}` runs past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        pos = end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| corrupt("missing fmt chunk"))?;
    let data = data.ok_or_else(|| corrupt("missing data chunk"))?;

    let bytes_per_sample = usize::from(fmt.format.bits() / 8);
    let frame_bytes = bytes_per_sample * fmt.channels;
    if data.len() % frame_bytes != 0 {
        return Err(corrupt(format!(
            "data length {} is not a whole number of {frame_bytes}-byte frames",
            data.len()
        )));
    }
    let frames = data.len() / frame_bytes;
    let mut channels = vec![Vec::with_capacity(frames); fmt.channels];
    for (i, sample) in data.chunks_exact(bytes_per_sample).enumerate() {
        let v = match fmt.format {
            WavFormat::Pcm16 => f32::from(i16::from_le_bytes([sample[0], sample[1]])) / 32768.0,
            WavFormat::Float32 => {
                let v = f32::from_le_bytes([sample[0], sample[1], sample[2], sample[3]]);
                if !v.is_finite() {
                    return Err(corrupt(format!("non-finite sample at index {i}")));
                }
                v.clamp(-1.0, 1.0)
            }
        };
        channels[i % fmt.channels].push(v);
    }
    AudioClip::new(fmt.sample_rate, channels)
}

fn quantize(x: f32) -> i16 {
    if x.is_nan() {
        return 0;
    }
    (f64::from(x) * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav_bytes(clip: &AudioClip, format: WavFormat) -> Vec<u8> {
    let channels = clip.channel_count() as u16;
    let bits = format.bits();
    let block_align = channels * bits / 8;
    let data_len = clip.len_frames() * usize::from(block_align);
    // PCM uses the 16-byte fmt body; non-PCM formats carry cbSize = 0.
    let fmt_len: u32 = match format {
        WavFormat::Pcm16 => 16,
        WavFormat::Float32 => 18,
    };
    let riff_len = 4 + (8 + fmt_len) + 8 + data_len as u32;

    let mut out = Vec::with_capacity(riff_len as usize + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_len.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&fmt_len.to_le_bytes());
    out.extend_from_slice(&format.tag().to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz() * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    if format == WavFormat::Float32 {
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..clip.len_frames() {
        for ch in clip.channels() {
            match format {
                WavFormat::Pcm16 => out.extend_from_slice(&quantize(ch[i]).to_le_bytes()),
                WavFormat::Float32 => out.extend_from_slice(&ch[i].to_le_bytes()),
            }
        }
    }
    out
}

pub fn encode_wav(
    clip: &AudioClip,
    path: impl AsRef<Path>,
    format: WavFormat,
) -> Result<(), AudioError> {
    fs::write(path, encode_wav_bytes(clip, format))?;
    Ok(())
}
