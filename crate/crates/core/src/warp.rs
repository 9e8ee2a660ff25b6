//! Buffer-level time warp.
//!
//! Each output chunk of `N` frames consumes `M = round(N * tempo)` source
//! frames. For `M >= N` the chunk is a nearest-neighbour decimation of those
//! frames; for `M < N` the frames are spread through the chunk at
//! `floor(j * N / M)` with exact zeros in between. Channels are warped
//! identically and never mixed.

use thiserror::Error;

use crate::audio_io::{AudioChunk, AudioClip};

pub const DEFAULT_CHUNK_FRAMES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpError {
    #[error("source exhausted")]
    AlreadyFinished,
    #[error("tempo {0} consumes no source frames")]
    InvalidTempo(f64),
    #[error("chunk size must be positive")]
    ZeroChunk,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpState {
    /// Next source frame to consume.
    pub src_pos: usize,
    pub chunk_frames: usize,
    pub finished: bool,
}

impl WarpState {
    pub fn new(chunk_frames: usize) -> Result<Self, WarpError> {
        if chunk_frames == 0 {
            return Err(WarpError::ZeroChunk);
        }
        Ok(Self {
            src_pos: 0,
            chunk_frames,
            finished: false,
        })
    }
}

/// `round(chunk_frames * tempo)`, rounding halves up.
pub fn frames_to_consume(chunk_frames: usize, tempo: f64) -> Result<usize, WarpError> {
    let m = (chunk_frames as f64 * tempo + 0.5).floor();
    if !(m.is_finite() && m >= 1.0) {
        return Err(WarpError::InvalidTempo(tempo));
    }
    Ok(m as usize)
}

/// Maps `m` consumed frames onto one output chunk. `consumed` holds the
/// frames actually available (at most `m`); missing frames read as zero.
pub trait WarpKernel {
    fn warp(&self, consumed: &[f32], m: usize, out: &mut [f32]);
}

/// Nearest-neighbour decimation for speedup, zero interspersal for slowdown.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveWarp;

impl WarpKernel for NaiveWarp {
    fn warp(&self, consumed: &[f32], m: usize, out: &mut [f32]) {
        let n = out.len();
        if m >= n {
            for (i, o) in out.iter_mut().enumerate() {
                *o = consumed.get(i * m / n).copied().unwrap_or(0.0);
            }
        } else {
            out.fill(0.0);
            for (j, &x) in consumed.iter().enumerate() {
                out[j * n / m] = x;
            }
        }
    }
}

pub fn warp_chunk(
    source: &AudioClip,
    state: &mut WarpState,
    tempo: f64,
) -> Result<AudioChunk, WarpError> {
    warp_chunk_with(&NaiveWarp, source, state, tempo)
}

/// Render the next chunk at `tempo` and advance `state`.
///
/// Sets `finished` once the source is used up; the final chunk is
/// zero-padded.
pub fn warp_chunk_with<K: WarpKernel + ?Sized>(
    kernel: &K,
    source: &AudioClip,
    state: &mut WarpState,
    tempo: f64,
) -> Result<AudioChunk, WarpError> {
    let len = source.len_frames();
    if state.finished || state.src_pos >= len {
        state.finished = true;
        return Err(WarpError::AlreadyFinished);
    }
    let n = state.chunk_frames;
    let m = frames_to_consume(n, tempo)?;
    let end = state.src_pos.saturating_add(m).min(len);

    let mut chunk = AudioChunk::silent(source.channel_count(), n);
    for (src, out) in source.channels().iter().zip(chunk.channels_mut()) {
        kernel.warp(&src[state.src_pos..end], m, out);
    }
    state.src_pos = end;
    state.finished = end >= len;
    Ok(chunk)
}

/// Warp the whole clip with one tempo per chunk.
///
/// Stops when the source is used up or `tempo_trace` runs out, whichever is
/// first.
pub fn render_offline<I>(
    source: &AudioClip,
    tempo_trace: I,
    chunk_frames: usize,
) -> Result<AudioClip, WarpError>
where
    I: IntoIterator<Item = f64>,
{
    let mut state = WarpState::new(chunk_frames)?;
    let mut out = AudioClip::new(
        source.sample_rate_hz(),
        vec![Vec::new(); source.channel_count()],
    )
    .expect("channel layout copied from a valid clip");
    if source.len_frames() == 0 {
        return Ok(out);
    }
    for tempo in tempo_trace {
        let chunk = warp_chunk(source, &mut state, tempo)?;
        out.extend_from_chunk(&chunk).expect("same channel count");
        if state.finished {
            break;
        }
    }
    Ok(out)
}

/// [`render_offline`] at a fixed tempo.
pub fn render_constant(
    source: &AudioClip,
    tempo: f64,
    chunk_frames: usize,
) -> Result<AudioClip, WarpError> {
    render_offline(source, std::iter::repeat(tempo), chunk_frames)
}
