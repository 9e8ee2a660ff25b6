//! Heart-rate acquisition: BLE GATT sensors, replay CSV files and a synthetic
//! random walk, all delivered as [`HeartRateSample`]s.
//!
//! Offline consumers pull samples synchronously through [`sample_iter`]. Live
//! consumers call [`open_stream`], which runs the source on its own thread and
//! hands samples over an unbounded channel so the source never waits on its
//! reader.

pub mod ble;
mod gatt;
mod replay;
mod synthetic;

use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use gatt::{parse_hr_measurement, HrMeasurement, PayloadError, RR_UNITS_PER_SECOND};
pub use replay::{parse_replay, read_replay, record_stream, write_replay, REPLAY_HEADER};
pub use synthetic::{SyntheticParams, SyntheticSource};

/// Readings at or below this are rejected as sensor glitches.
pub const BPM_MIN: f64 = 20.0;
/// Readings at or above this are rejected as sensor glitches.
pub const BPM_MAX: f64 = 250.0;

pub const DEFAULT_QUERY_RATE_HZ: f64 = 55.0;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("heart rate {0} bpm outside the accepted ({BPM_MIN}, {BPM_MAX}) range")]
    BpmOutOfRange(f64),
    #[error("BLE adapter unavailable: {0}")]
    AdapterUnavailable(String),
    #[error("device not found: {0}")]
    DeviceNotFound(String),
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("malformed replay row {line}: {reason}")]
    MalformedReplayRow { line: usize, reason: String },
    #[error("timestamps not strictly increasing: {next} s after {prev} s")]
    NonMonotoneTimestamps { prev: f64, next: f64 },
    #[error("invalid sensor configuration: {0}")]
    InvalidConfig(String),
    #[error("BLE sources cannot be read offline")]
    OfflineUnsupported,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One timestamped heart-rate reading.
#[derive(Debug, Clone, PartialEq)]
pub struct HeartRateSample {
    /// Seconds since stream start.
    pub t: f64,
    pub bpm: f64,
    /// Inter-beat intervals in seconds, when the sensor reports them.
    pub rr_intervals: Vec<f64>,
}

impl HeartRateSample {
    /// Build a sample, rejecting out-of-range readings and invalid times.
    pub fn new(t: f64, bpm: f64) -> Result<Self, SourceError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(SourceError::InvalidConfig(format!("bad timestamp {t}")));
        }
        if !is_valid_bpm(bpm) {
            return Err(SourceError::BpmOutOfRange(bpm));
        }
        Ok(Self {
            t,
            bpm,
            rr_intervals: Vec::new(),
        })
    }

    pub fn with_rr(mut self, rr_intervals: Vec<f64>) -> Self {
        self.rr_intervals = rr_intervals;
        self
    }
}

pub fn is_valid_bpm(bpm: f64) -> bool {
    bpm > BPM_MIN && bpm < BPM_MAX
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Ble,
    Replay,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub kind: SourceKind,
    /// BLE address, replay path, or a free-form label for synthetic sources.
    pub address_or_path: String,
    /// Polling rate for BLE sensors without notifications, and the sample
    /// rate of the synthetic source.
    pub query_rate_hz: f64,
    /// Replay time compression: recorded timestamps are divided by this.
    pub replay_speed: f64,
    /// Pace live streams against the wall clock. Offline reads ignore this.
    pub realtime: bool,
    pub synthetic: SyntheticParams,
    /// BLE adapter name, if more than one is present.
    pub adapter: Option<String>,
}

impl SensorConfig {
    fn with_kind(kind: SourceKind, address_or_path: impl Into<String>) -> Self {
        Self {
            kind,
            address_or_path: address_or_path.into(),
            query_rate_hz: DEFAULT_QUERY_RATE_HZ,
            replay_speed: 1.0,
            realtime: true,
            synthetic: SyntheticParams::default(),
            adapter: None,
        }
    }

    pub fn replay(path: impl Into<String>) -> Self {
        Self::with_kind(SourceKind::Replay, path)
    }

    pub fn synthetic(params: SyntheticParams) -> Self {
        let mut cfg = Self::with_kind(SourceKind::Synthetic, format!("sim:{}", params.seed));
        cfg.synthetic = params;
        cfg
    }

    pub fn ble(address: impl Into<String>) -> Self {
        Self::with_kind(SourceKind::Ble, address)
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if !(self.query_rate_hz.is_finite() && self.query_rate_hz > 0.0) {
            return Err(SourceError::InvalidConfig(format!(
                "query rate must be positive, got {}",
                self.query_rate_hz
            )));
        }
        if !(self.replay_speed.is_finite() && self.replay_speed > 0.0) {
            return Err(SourceError::InvalidConfig(format!(
                "replay speed must be positive, got {}",
                self.replay_speed
            )));
        }
        if self.kind == SourceKind::Synthetic {
            self.synthetic.validate()?;
        }
        Ok(())
    }
}

pub type SampleIter = Box<dyn Iterator<Item = Result<HeartRateSample, SourceError>> + Send>;

/// Synchronous, unpaced sample sequence for offline use.
///
/// Replay timestamps are divided by `replay_speed`. Synthetic sources are
/// unbounded; callers decide when to stop pulling.
pub fn sample_iter(config: &SensorConfig) -> Result<SampleIter, SourceError> {
    config.validate()?;
    match config.kind {
        SourceKind::Replay => {
            let speed = config.replay_speed;
            let samples = read_replay(&config.address_or_path)?;
            Ok(Box::new(samples.into_iter().map(move |mut s| {
                s.t /= speed;
                Ok(s)
            })))
        }
        SourceKind::Synthetic => Ok(Box::new(
            SyntheticSource::new(config.synthetic.clone(), config.query_rate_hz)?.map(Ok),
        )),
        SourceKind::Ble => Err(SourceError::OfflineUnsupported),
    }
}

/// Start a live source on its own thread.
pub fn open_stream(config: &SensorConfig) -> Result<HrStream, SourceError> {
    config.validate()?;
    match config.kind {
        SourceKind::Ble => {
            let central = ble::default_central(config.adapter.as_deref())?;
            ble::open_ble_stream(central, config)
        }
        _ => Ok(HrStream::from_iter(sample_iter(config)?, config.realtime)),
    }
}

/// Rejects samples whose timestamp does not strictly increase.
#[derive(Debug, Default, Clone)]
pub struct MonotoneGuard {
    last: Option<f64>,
}

impl MonotoneGuard {
    pub fn check(&mut self, t: f64) -> Result<(), SourceError> {
        if let Some(prev) = self.last {
            if t <= prev {
                return Err(SourceError::NonMonotoneTimestamps { prev, next: t });
            }
        }
        self.last = Some(t);
        Ok(())
    }
}

/// Result of a non-blocking poll on an [`HrStream`].
#[derive(Debug)]
pub enum Poll {
    Sample(HeartRateSample),
    /// The source failed; the stream is over.
    Error(SourceError),
    /// Nothing new yet.
    Pending,
    /// The source finished cleanly.
    Ended,
}

/// Receiving end of a live heart-rate source.
///
/// Errors are delivered in-band as a final `Err` item; the stream is over
/// after one.
pub struct HrStream {
    rx: Receiver<Result<HeartRateSample, SourceError>>,
    stop: Arc<AtomicBool>,
}

impl HrStream {
    /// Spawn `worker` on its own thread. The worker should return once the
    /// stop flag is raised or the sender fails.
    pub fn spawn<F>(worker: F) -> Self
    where
        F: FnOnce(Sender<Result<HeartRateSample, SourceError>>, Arc<AtomicBool>) + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        thread::Builder::new()
            .name("hr-source".into())
            .spawn(move || worker(tx, flag))
            .expect("spawn heart-rate source thread");
        Self { rx, stop }
    }

    /// Stream a pre-built sample sequence, optionally paced so each sample is
    /// released at its own timestamp.
    pub fn from_iter(samples: SampleIter, realtime: bool) -> Self {
        Self::spawn(move |tx, stop| {
            let epoch = Instant::now();
            let mut guard = MonotoneGuard::default();
            for item in samples {
                if stop.load(Ordering::Relaxed) {
                    return;
                }
                let item = item.and_then(|s| guard.check(s.t).map(|_| s));
                if let Ok(s) = &item {
                    if realtime && !sleep_until(epoch + Duration::from_secs_f64(s.t), &stop) {
                        return;
                    }
                }
                let failed = item.is_err();
                if tx.send(item).is_err() || failed {
                    return;
                }
            }
        })
    }

    pub fn try_next(&self) -> Poll {
        match self.rx.try_recv() {
            Ok(Ok(s)) => Poll::Sample(s),
            Ok(Err(e)) => Poll::Error(e),
            Err(TryRecvError::Empty) => Poll::Pending,
            Err(TryRecvError::Disconnected) => Poll::Ended,
        }
    }

    pub fn next_timeout(&self, timeout: Duration) -> Poll {
        match self.rx.recv_timeout(timeout) {
            Ok(Ok(s)) => Poll::Sample(s),
            Ok(Err(e)) => Poll::Error(e),
            Err(RecvTimeoutError::Timeout) => Poll::Pending,
            Err(RecvTimeoutError::Disconnected) => Poll::Ended,
        }
    }

    /// Ask the source thread to finish.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

impl Iterator for HrStream {
    type Item = Result<HeartRateSample, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.rx.recv().ok()
    }
}

impl Drop for HrStream {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Sleep until `deadline` in short slices. Returns false if stopped early.
pub(crate) fn sleep_until(deadline: Instant, stop: &AtomicBool) -> bool {
    const SLICE: Duration = Duration::from_millis(20);
    loop {
        if stop.load(Ordering::Relaxed) {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        thread::sleep((deadline - now).min(SLICE));
    }
}

/// Convenience for tests and tools: write samples to a replay file.
pub fn record_to_path(
    samples: &[HeartRateSample],
    path: impl AsRef<Path>,
) -> Result<usize, SourceError> {
    record_stream(samples.iter().cloned(), path)
}
