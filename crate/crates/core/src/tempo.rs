//! Heart rate to tempo multiplier.
//!
//! The current heart rate is placed within the min–max range of its trailing
//! window (`n` in `[0, 1]`, 0.5 when the window is flat) and mapped through
//! `base * (1 + gain * (n - 0.5))`, clipped to `[clip_lo, clip_hi]`. With the
//! defaults the endpoints land exactly on the clip bounds.

use thiserror::Error;

use crate::signal::{WindowStats, DEFAULT_WINDOW_S};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid tempo parameters: {0}")]
pub struct TempoParamsError(pub String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoParams {
    /// Multiplier for a heart rate in the middle of its window.
    pub base: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
    /// Sensitivity of the multiplier to the normalized heart rate.
    pub gain: f64,
    /// Trailing window for normalization, seconds.
    pub window_s: f64,
    /// Windows narrower than this (BPM) count as flat.
    pub flat_eps: f64,
}

impl Default for TempoParams {
    fn default() -> Self {
        Self {
            base: 1.25,
            clip_lo: 1.0,
            clip_hi: 1.5,
            gain: 0.4,
            window_s: DEFAULT_WINDOW_S,
            flat_eps: 0.5,
        }
    }
}

impl TempoParams {
    pub fn validate(&self) -> Result<(), TempoParamsError> {
        let all_finite = [
            self.base,
            self.clip_lo,
            self.clip_hi,
            self.gain,
            self.window_s,
            self.flat_eps,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(TempoParamsError("all parameters must be finite".into()));
        }
        if self.clip_lo >= self.clip_hi {
            return Err(TempoParamsError(format!(
                "clip range [{}, {}] is empty",
                self.clip_lo, self.clip_hi
            )));
        }
        if self.clip_lo <= 0.0 {
            return Err(TempoParamsError(format!(
                "clip_lo must be positive, got {}",
                self.clip_lo
            )));
        }
        if !(self.clip_lo <= self.base && self.base <= self.clip_hi) {
            return Err(TempoParamsError(format!(
                "base {} outside clip range [{}, {}]",
                self.base, self.clip_lo, self.clip_hi
            )));
        }
        if self.gain < 0.0 {
            return Err(TempoParamsError(format!(
                "gain must be >= 0, got {}",
                self.gain
            )));
        }
        if self.window_s <= 0.0 {
            return Err(TempoParamsError(format!(
                "window must be positive, got {}",
                self.window_s
            )));
        }
        if self.flat_eps < 0.0 {
            return Err(TempoParamsError(format!(
                "flat_eps must be >= 0, got {}",
                self.flat_eps
            )));
        }
        Ok(())
    }
}

/// A multiplier decided at one control instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoCommand {
    pub multiplier: f64,
    pub at_t: f64,
}

/// Position of `hr_now` within the window's range, in `[0, 1]`.
pub fn normalize(hr_now: f64, stats: &WindowStats, flat_eps: f64) -> f64 {
    let range = stats.max_bpm - stats.min_bpm;
    if range.is_nan() || range < flat_eps || range <= 0.0 {
        return 0.5;
    }
    ((hr_now - stats.min_bpm) / range).clamp(0.0, 1.0)
}

/// Clipped multiplier for normalized heart rate `n`. Total over all reals;
/// NaN maps to `base`.
pub fn map_tempo(n: f64, params: &TempoParams) -> f64 {
    let n = if n.is_nan() { 0.5 } else { n };
    let raw = params.base * (1.0 + params.gain * (n - 0.5));
    raw.clamp(params.clip_lo, params.clip_hi)
}

pub fn command(hr_now: f64, stats: &WindowStats, params: &TempoParams, at_t: f64) -> TempoCommand {
    TempoCommand {
        multiplier: map_tempo(normalize(hr_now, stats, params.flat_eps), params),
        at_t,
    }
}
