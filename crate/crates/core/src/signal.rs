//! Uniform resampling of non-uniform heart-rate samples and trailing-window
//! statistics.
//!
//! Grid point `i` sits at `start_t + i / rate_hz`, where `start_t` is the first
//! sample's timestamp. A grid point is attributed to the first segment whose
//! right end it does not pass (within [`GRID_TOLERANCE_S`]); batch and
//! incremental paths share that rule, so they agree bit for bit.

use std::collections::VecDeque;

use thiserror::Error;

use crate::hr_source::HeartRateSample;

pub const DEFAULT_GRID_RATE_HZ: f64 = 55.0;
pub const DEFAULT_WINDOW_S: f64 = 5.0;

/// Slack when deciding whether a grid point has been reached by a sample.
pub const GRID_TOLERANCE_S: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("no samples to interpolate")]
    EmptyInput,
    #[error("timestamps not strictly increasing: {next} s after {prev} s")]
    NonMonotoneTimestamps { prev: f64, next: f64 },
    #[error("no grid points in window")]
    EmptyWindow,
    #[error("grid rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("window length must be positive and finite, got {0}")]
    InvalidWindow(f64),
}

#[inline]
pub fn grid_time(start_t: f64, index: u64, rate_hz: f64) -> f64 {
    start_t + index as f64 / rate_hz
}

/// Linear interpolation between two samples, never leaving `[min, max]` of
/// their values.
#[inline]
fn lerp(t0: f64, v0: f64, t1: f64, v1: f64, t: f64) -> f64 {
    let frac = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    let v = v0 + (v1 - v0) * frac;
    v.clamp(v0.min(v1), v0.max(v1))
}

fn check_rate(rate_hz: f64) -> Result<(), SignalError> {
    if rate_hz.is_finite() && rate_hz > 0.0 {
        Ok(())
    } else {
        Err(SignalError::InvalidRate(rate_hz))
    }
}

fn check_monotone(samples: &[HeartRateSample]) -> Result<(), SignalError> {
    for w in samples.windows(2) {
        if w[1].t <= w[0].t {
            return Err(SignalError::NonMonotoneTimestamps {
                prev: w[0].t,
                next: w[1].t,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformHrSeries {
    pub rate_hz: f64,
    pub start_t: f64,
    pub values: Vec<f64>,
}

impl UniformHrSeries {
    pub fn new(rate_hz: f64, start_t: f64) -> Self {
        Self {
            rate_hz,
            start_t,
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        grid_time(self.start_t, index as u64, self.rate_hz)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.time_at(i), v))
    }
}

/// Resample `samples` onto a uniform grid spanning the first to the last
/// sample.
pub fn interpolate(
    samples: &[HeartRateSample],
    rate_hz: f64,
) -> Result<UniformHrSeries, SignalError> {
    check_rate(rate_hz)?;
    let (first, last) = match samples {
        [] => return Err(SignalError::EmptyInput),
        [f, .., l] => (f, l),
        [f] => (f, f),
    };
    check_monotone(samples)?;

    let mut series = UniformHrSeries::new(rate_hz, first.t);
    if samples.len() == 1 {
        series.values.push(first.bpm);
        return Ok(series);
    }
    let mut seg = 0;
    for i in 0.. {
        let g = grid_time(first.t, i, rate_hz);
        if g > last.t + GRID_TOLERANCE_S {
            break;
        }
        while seg + 2 < samples.len() && g > samples[seg + 1].t + GRID_TOLERANCE_S {
            seg += 1;
        }
        let (a, b) = (&samples[seg], &samples[seg + 1]);
        series.values.push(lerp(a.t, a.bpm, b.t, b.bpm, g));
    }
    Ok(series)
}

/// Resample over an explicit `[start_t, end_t]` span, holding the first and
/// last values constant outside the sampled interval.
pub fn interpolate_range(
    samples: &[HeartRateSample],
    rate_hz: f64,
    start_t: f64,
    end_t: f64,
) -> Result<UniformHrSeries, SignalError> {
    check_rate(rate_hz)?;
    if samples.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    check_monotone(samples)?;
    let first = &samples[0];
    let last = &samples[samples.len() - 1];

    let mut series = UniformHrSeries::new(rate_hz, start_t);
    for i in 0.. {
        let g = grid_time(start_t, i, rate_hz);
        if g > end_t + GRID_TOLERANCE_S {
            break;
        }
        let v = if g <= first.t {
            first.bpm
        } else if g >= last.t {
            last.bpm
        } else {
            // first index with t >= g; g is strictly inside, so 1..len-1
            let j = samples.partition_point(|s| s.t < g);
            let (a, b) = (&samples[j - 1], &samples[j]);
            lerp(a.t, a.bpm, b.t, b.bpm, g)
        };
        series.values.push(v);
    }
    Ok(series)
}

/// Streaming form of [`interpolate`]: grid points are emitted as soon as a
/// sample reaches them.
#[derive(Debug, Clone)]
pub struct IncrementalInterpolator {
    rate_hz: f64,
    start_t: Option<f64>,
    prev: Option<(f64, f64)>,
    next_index: u64,
}

impl IncrementalInterpolator {
    pub fn new(rate_hz: f64) -> Result<Self, SignalError> {
        check_rate(rate_hz)?;
        Ok(Self {
            rate_hz,
            start_t: None,
            prev: None,
            next_index: 0,
        })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn start_t(&self) -> Option<f64> {
        self.start_t
    }

    /// Accept one sample and call `emit(t, bpm)` for each grid point it
    /// completes. On error nothing is emitted and the state is unchanged.
    pub fn push<F>(&mut self, t: f64, bpm: f64, mut emit: F) -> Result<usize, SignalError>
    where
        F: FnMut(f64, f64),
    {
        let Some((t0, v0)) = self.prev else {
            self.start_t = Some(t);
            self.prev = Some((t, bpm));
            self.next_index = 1;
            emit(t, bpm);
            return Ok(1);
        };
        if t <= t0 {
            return Err(SignalError::NonMonotoneTimestamps { prev: t0, next: t });
        }
        let start = self.start_t.unwrap_or(t0);
        let mut n = 0;
        loop {
            let g = grid_time(start, self.next_index, self.rate_hz);
            if g > t + GRID_TOLERANCE_S {
                break;
            }
            emit(g, lerp(t0, v0, t, bpm, g));
            self.next_index += 1;
            n += 1;
        }
        self.prev = Some((t, bpm));
        Ok(n)
    }
}

/// A [`UniformHrSeries`] grown one sample at a time.
#[derive(Debug, Clone)]
pub struct StreamingSeries {
    interp: IncrementalInterpolator,
    series: UniformHrSeries,
}

impl StreamingSeries {
    pub fn new(rate_hz: f64) -> Result<Self, SignalError> {
        Ok(Self {
            interp: IncrementalInterpolator::new(rate_hz)?,
            series: UniformHrSeries::new(rate_hz, 0.0),
        })
    }

    /// Returns the number of grid points appended.
    pub fn push_incremental(&mut self, sample: &HeartRateSample) -> Result<usize, SignalError> {
        let values = &mut self.series.values;
        let n = self
            .interp
            .push(sample.t, sample.bpm, |_, v| values.push(v))?;
        if let Some(start) = self.interp.start_t() {
            self.series.start_t = start;
        }
        Ok(n)
    }

    pub fn series(&self) -> &UniformHrSeries {
        &self.series
    }

    pub fn into_series(self) -> UniformHrSeries {
        self.series
    }
}

/// Min / max / mean over a trailing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub window_s: f64,
    pub min_bpm: f64,
    pub max_bpm: f64,
    pub mean_bpm: f64,
    pub count: usize,
}

/// Sliding window over `(t, value)` points covering `(now - window_s, now]`,
/// where `now` is the newest point. Min and max come from monotone deques,
/// the mean from a running sum that is periodically recomputed to shed
/// rounding drift. All updates are amortized O(1).
#[derive(Debug, Clone)]
pub struct WindowTracker {
    window_s: f64,
    points: VecDeque<(f64, f64)>,
    min_q: VecDeque<(f64, f64)>,
    max_q: VecDeque<(f64, f64)>,
    sum: f64,
    evicted_since_resum: usize,
}

impl WindowTracker {
    pub fn new(window_s: f64) -> Result<Self, SignalError> {
        if !(window_s.is_finite() && window_s > 0.0) {
            return Err(SignalError::InvalidWindow(window_s));
        }
        Ok(Self {
            window_s,
            points: VecDeque::new(),
            min_q: VecDeque::new(),
            max_q: VecDeque::new(),
            sum: 0.0,
            evicted_since_resum: 0,
        })
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Add a point. Times must be non-decreasing.
    pub fn push(&mut self, t: f64, value: f64) {
        self.points.push_back((t, value));
        self.sum += value;
        while self.min_q.back().is_some_and(|&(_, v)| v >= value) {
            self.min_q.pop_back();
        }
        self.min_q.push_back((t, value));
        while self.max_q.back().is_some_and(|&(_, v)| v <= value) {
            self.max_q.pop_back();
        }
        self.max_q.push_back((t, value));
        self.evict(t);
    }

    /// Drop points at or before `now - window_s`.
    pub fn evict(&mut self, now: f64) {
        let cutoff = now - self.window_s;
        while let Some(&(t, v)) = self.points.front() {
            if t > cutoff {
                break;
            }
            self.points.pop_front();
            self.sum -= v;
            self.evicted_since_resum += 1;
        }
        while self.min_q.front().is_some_and(|&(t, _)| t <= cutoff) {
            self.min_q.pop_front();
        }
        while self.max_q.front().is_some_and(|&(t, _)| t <= cutoff) {
            self.max_q.pop_front();
        }
        if self.evicted_since_resum >= self.points.len().max(64) {
            self.sum = self.points.iter().map(|&(_, v)| v).sum();
            self.evicted_since_resum = 0;
        }
    }

    pub fn stats(&self) -> Option<WindowStats> {
        let (&(_, min), &(_, max)) = (self.min_q.front()?, self.max_q.front()?);
        let count = self.points.len();
        let mean = (self.sum / count as f64).clamp(min, max);
        Some(WindowStats {
            window_s: self.window_s,
            min_bpm: min,
            max_bpm: max,
            mean_bpm: mean,
            count,
        })
    }
}

/// Statistics over the grid points of `series` with `t` in
/// `(now_t - window_s, now_t]`.
pub fn window_stats(
    series: &UniformHrSeries,
    now_t: f64,
    window_s: f64,
) -> Result<WindowStats, SignalError> {
    let mut tracker = WindowTracker::new(window_s)?;
    let cutoff = now_t - window_s;
    let n = series.len();
    let in_window = |i: usize| {
        let t = series.time_at(i);
        t > cutoff && t <= now_t
    };

    // Estimate the first index inside the window, then settle it exactly.
    let guess = ((cutoff - series.start_t) * series.rate_hz).floor();
    let mut i = if guess.is_finite() && guess > 0.0 {
        (guess as usize).min(n)
    } else {
        0
    };
    while i > 0 && series.time_at(i - 1) > cutoff {
        i -= 1;
    }
    while i < n && series.time_at(i) <= cutoff {
        i += 1;
    }
    while i < n && in_window(i) {
        tracker.push(series.time_at(i), series.values[i]);
        i += 1;
    }
    tracker.evict(now_t);
    tracker.stats().ok_or(SignalError::EmptyWindow)
}

/// Latest heart-rate reading together with its trailing-window statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrView {
    /// Grid time of the latest point.
    pub t: f64,
    pub hr_bpm: f64,
    pub stats: WindowStats,
}

/// Incremental uniform series plus its trailing window: the sensor-side state
/// the engine and the loop simulator both maintain.
#[derive(Debug, Clone)]
pub struct HrTracker {
    interp: IncrementalInterpolator,
    window: WindowTracker,
    latest: Option<(f64, f64)>,
    grid_points: u64,
}

impl HrTracker {
    pub fn new(rate_hz: f64, window_s: f64) -> Result<Self, SignalError> {
        Ok(Self {
            interp: IncrementalInterpolator::new(rate_hz)?,
            window: WindowTracker::new(window_s)?,
            latest: None,
            grid_points: 0,
        })
    }

    /// Returns the number of grid points the sample completed.
    pub fn push(&mut self, sample: &HeartRateSample) -> Result<usize, SignalError> {
        let window = &mut self.window;
        let latest = &mut self.latest;
        let n = self.interp.push(sample.t, sample.bpm, |t, v| {
            window.push(t, v);
            *latest = Some((t, v));
        })?;
        self.grid_points += n as u64;
        Ok(n)
    }

    /// Total grid points emitted so far; changes exactly when the view does.
    pub fn grid_points(&self) -> u64 {
        self.grid_points
    }

    pub fn view(&self) -> Option<HrView> {
        let (t, hr_bpm) = self.latest?;
        Some(HrView {
            t,
            hr_bpm,
            stats: self.window.stats()?,
        })
    }
}
