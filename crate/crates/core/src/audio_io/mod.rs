//! PCM clips, WAV decode/encode, and chunk sinks.

mod sink;
mod wav;

use std::io;

use thiserror::Error;

pub use sink::{
    default_backend, open_sink, ChunkSink, DeviceSink, FileSink, MemorySink, PlaybackBackend,
    SinkKind, DEFAULT_QUEUE_DEPTH,
};
pub use wav::{decode_wav, decode_wav_bytes, encode_wav, encode_wav_bytes, WavFormat};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV file: {0}")]
    CorruptFile(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("audio device unavailable: {0}")]
    DeviceUnavailable(String),
    #[error("sink already closed")]
    SinkClosed,
    #[error("sample rate mismatch: clip is {clip} Hz, sink expects {sink} Hz")]
    SampleRateMismatch { clip: u32, sink: u32 },
    #[error("chunk has {got} channels, sink expects {expected}")]
    ChannelMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Decoded source material, stored planar (one `Vec` per channel).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    sample_rate_hz: u32,
    channels: Vec<Vec<f32>>,
}

impl AudioClip {
    pub fn new(sample_rate_hz: u32, channels: Vec<Vec<f32>>) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidClip(
                "sample rate must be positive".into(),
            ));
        }
        if !(1..=2).contains(&channels.len()) {
            return Err(AudioError::InvalidClip(format!(
                "expected 1 or 2 channels, got {}",
                channels.len()
            )));
        }
        if channels.iter().any(|c| c.len() != channels[0].len()) {
            return Err(AudioError::InvalidClip("channel lengths differ".into()));
        }
        Ok(Self {
            sample_rate_hz,
            channels,
        })
    }

    pub fn mono(sample_rate_hz: u32, samples: Vec<f32>) -> Result<Self, AudioError> {
        Self::new(sample_rate_hz, vec![samples])
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> &[f32] {
        &self.channels[index]
    }

    pub fn len_frames(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.len_frames() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Append a chunk's frames; channel counts must match.
    pub fn extend_from_chunk(&mut self, chunk: &AudioChunk) -> Result<(), AudioError> {
        if chunk.channel_count() != self.channel_count() {
            return Err(AudioError::ChannelMismatch {
                got: chunk.channel_count(),
                expected: self.channel_count(),
            });
        }
        for (dst, src) in self.channels.iter_mut().zip(chunk.channels()) {
            dst.extend_from_slice(src);
        }
        Ok(())
    }
}

/// Fixed-size block of output frames, planar.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioChunk {
    channels: Vec<Vec<f32>>,
}

impl AudioChunk {
    pub fn silent(channels: usize, frames: usize) -> Self {
        Self {
            channels: vec![vec![0.0; frames]; channels],
        }
    }

    pub fn from_channels(channels: Vec<Vec<f32>>) -> Self {
        debug_assert!(channels.iter().all(|c| c.len() == channels[0].len()));
        Self { channels }
    }

    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [Vec<f32>] {
        &mut self.channels
    }

    /// Interleaved copy, frame-major.
    pub fn interleaved(&self) -> Vec<f32> {
        let n = self.frames();
        let mut out = Vec::with_capacity(n * self.channel_count());
        for i in 0..n {
            for c in &self.channels {
                out.push(c[i]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(44100, vec![]).is_err());
        assert!(AudioClip::new(44100, vec![vec![0.0]; 3]).is_err());
        assert!(AudioClip::new(44100, vec![vec![0.0; 2], vec![0.0; 3]]).is_err());
        assert!(AudioClip::new(0, vec![vec![0.0]]).is_err());
        let c = AudioClip::new(44100, vec![vec![0.0; 10], vec![0.0; 10]]).unwrap();
        assert_eq!(c.len_frames(), 10);
        assert_eq!(c.channel_count(), 2);
    }

    #[test]
    fn five_minute_38_second_clip_frame_count() {
        // 5 min 38 s at 44.1 kHz
        let frames = (5 * 60 + 38) * 44_100;
        assert_eq!(frames, 14_905_800);
        let clip = AudioClip::mono(44_100, vec![0.0; frames]).unwrap();
        assert_eq!(clip.len_frames(), 14_905_800);
        assert_eq!(clip.duration_s(), 338.0);
    }

    #[test]
    fn interleave() {
        let ch = AudioChunk::from_channels(vec![vec![1.0, 2.0], vec![-1.0, -2.0]]);
        assert_eq!(ch.interleaved(), vec![1.0, -1.0, 2.0, -2.0]);
    }
}
