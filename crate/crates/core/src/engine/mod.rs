//! Sensor → uniform series → tempo → warp → sink.
//!
//! At every chunk boundary the renderer takes the freshest heart-rate view,
//! derives one multiplier for the whole chunk, warps the chunk, hands it to
//! the sink and appends a [`TraceRecord`]. If the view has not advanced since
//! the previous chunk (sensor stalled or lost) the previous multiplier is
//! held.
//!
//! Offline runs read samples synchronously and key them to playback time
//! (`chunk * N / sample_rate`), so they are fully deterministic. Live runs
//! keep the sensor on its own thread and exchange a small snapshot that the
//! audio side reads without blocking.

mod snapshot;
mod trace;

use std::iter::Peekable;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use thiserror::Error;

use crate::audio_io::{
    decode_wav, open_sink, AudioChunk, AudioClip, AudioError, ChunkSink, SinkKind,
};
use crate::hr_source::{self, HrStream, Poll, SampleIter, SensorConfig, SourceError, SourceKind};
use crate::signal::{HrTracker, HrView, SignalError, DEFAULT_GRID_RATE_HZ};
use crate::tempo::{self, TempoParams, TempoParamsError};
use crate::warp::{warp_chunk, WarpError, WarpState, DEFAULT_CHUNK_FRAMES};

pub use snapshot::{snapshot_pair, SnapshotReader, SnapshotWriter};
pub use trace::{load_trace, read_trace, save_trace, write_trace, TraceRecord, TRACE_HEADER};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tempo(#[from] TempoParamsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error("failed to write trace")]
    Trace(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    /// Synchronous, frame-clocked, deterministic.
    Offline,
    /// Sensor on its own thread. With `pace`, a non-realtime sink is fed at
    /// playback rate against the wall clock.
    Live { pace: bool },
}

/// Parameters of the render loop itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    pub tempo: TempoParams,
    pub chunk_frames: usize,
    pub grid_rate_hz: f64,
    /// Stop after this many chunks even if the source has audio left.
    pub max_chunks: Option<usize>,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            tempo: TempoParams::default(),
            chunk_frames: DEFAULT_CHUNK_FRAMES,
            grid_rate_hz: DEFAULT_GRID_RATE_HZ,
            max_chunks: None,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.tempo.validate()?;
        if self.chunk_frames == 0 {
            return Err(EngineError::Config("chunk size must be positive".into()));
        }
        if !(self.grid_rate_hz.is_finite() && self.grid_rate_hz > 0.0) {
            return Err(EngineError::Config(format!(
                "grid rate must be positive, got {}",
                self.grid_rate_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub input: PathBuf,
    pub render: RenderSettings,
    pub source: SensorConfig,
    pub sink: SinkKind,
    pub trace_path: Option<PathBuf>,
    pub mode: EngineMode,
    /// Required output rate; must equal the clip's rate when set.
    pub output_rate_hz: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub chunks: usize,
    pub frames: u64,
    pub duration_s: f64,
    pub trace_path: Option<PathBuf>,
    /// The sensor failed during the run and the multiplier was held.
    pub sensor_lost: bool,
}

/// Result of the render loop, before anything is written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutcome {
    pub trace: Vec<TraceRecord>,
    pub frames: u64,
    pub sensor_lost: bool,
}

/// Root-mean-square over every sample of every channel; 0 for an empty chunk.
pub fn compute_rms(chunk: &AudioChunk) -> f64 {
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for ch in chunk.channels() {
        for &x in ch {
            sum += f64::from(x) * f64::from(x);
        }
        n += ch.len();
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// What the sensor side publishes: the latest view and a counter that moves
/// whenever the view does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSnapshot {
    pub version: u64,
    pub view: Option<HrView>,
    pub lost: bool,
}

impl SensorSnapshot {
    const EMPTY: Self = Self {
        version: 0,
        view: None,
        lost: false,
    };
}

/// Turns sensor snapshots into per-chunk multipliers, holding the previous
/// value while the snapshot is unchanged.
#[derive(Debug, Clone)]
pub struct ChunkController {
    params: TempoParams,
    seen_version: u64,
    multiplier: f64,
    hr_bpm: Option<f64>,
}

impl ChunkController {
    pub fn new(params: TempoParams) -> Self {
        Self {
            multiplier: params.base,
            params,
            seen_version: 0,
            hr_bpm: None,
        }
    }

    /// Multiplier and heart rate for the chunk starting at `at_t`.
    pub fn update(&mut self, snap: &SensorSnapshot, at_t: f64) -> (f64, Option<f64>) {
        if snap.version != self.seen_version {
            if let Some(view) = snap.view {
                self.multiplier =
                    tempo::command(view.hr_bpm, &view.stats, &self.params, at_t).multiplier;
                self.hr_bpm = Some(view.hr_bpm);
            }
            self.seen_version = snap.version;
        }
        (self.multiplier, self.hr_bpm)
    }
}

/// The audio-side loop shared by offline and live runs. `snapshot_at` is
/// asked for the sensor state once per chunk, before the chunk is rendered.
fn render_loop<F>(
    clip: &AudioClip,
    settings: &RenderSettings,
    sink: &mut dyn ChunkSink,
    stop: &AtomicBool,
    pace: bool,
    mut snapshot_at: F,
) -> Result<RenderOutcome, EngineError>
where
    F: FnMut(f64) -> SensorSnapshot,
{
    let sr = f64::from(clip.sample_rate_hz());
    let n = settings.chunk_frames;
    let mut warp = WarpState::new(n)?;
    let mut control = ChunkController::new(settings.tempo);
    let mut trace = Vec::new();
    let mut sensor_lost = false;
    let started = Instant::now();

    if clip.len_frames() == 0 {
        warp.finished = true;
    }
    while !warp.finished && !stop.load(Ordering::Relaxed) {
        if settings.max_chunks.is_some_and(|m| trace.len() >= m) {
            break;
        }
        let k = trace.len();
        let at_t = (k * n) as f64 / sr;
        let snap = snapshot_at(at_t);
        if snap.lost && !sensor_lost {
            warn!("heart-rate sensor lost at t = {at_t:.3} s; holding multiplier");
            sensor_lost = true;
        }
        let (multiplier, hr_bpm) = control.update(&snap, at_t);
        let chunk = warp_chunk(clip, &mut warp, multiplier)?;
        if pace {
            let due = started + Duration::from_secs_f64(at_t);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        sink.write(&chunk)?;
        trace.push(TraceRecord {
            t: at_t,
            rms_amplitude: compute_rms(&chunk),
            hr_bpm,
            multiplier,
        });
    }
    Ok(RenderOutcome {
        frames: sink.frames_written(),
        trace,
        sensor_lost,
    })
}

/// Deterministic run: samples are pulled from `samples` up to each chunk's
/// playback time. A source that stops producing (or fails) simply stops
/// advancing the view.
pub fn run_offline(
    clip: &AudioClip,
    samples: SampleIter,
    sink: &mut dyn ChunkSink,
    settings: &RenderSettings,
    stop: &AtomicBool,
) -> Result<RenderOutcome, EngineError> {
    settings.validate()?;
    let mut feed = OfflineFeed {
        samples: samples.peekable(),
        tracker: HrTracker::new(settings.grid_rate_hz, settings.tempo.window_s)?,
        lost: false,
    };
    render_loop(clip, settings, sink, stop, false, |t| feed.advance_to(t))
}

struct OfflineFeed {
    samples: Peekable<SampleIter>,
    tracker: HrTracker,
    lost: bool,
}

impl OfflineFeed {
    fn advance_to(&mut self, t: f64) -> SensorSnapshot {
        while !self.lost {
            match self.samples.peek() {
                Some(Ok(s)) if s.t <= t => {}
                Some(Ok(_)) | None => break,
                Some(Err(_)) => {
                    if let Some(Err(e)) = self.samples.next() {
                        warn!("heart-rate source failed: {e}");
                    }
                    self.lost = true;
                    break;
                }
            }
            let Some(Ok(sample)) = self.samples.next() else {
                break;
            };
            if let Err(e) = self.tracker.push(&sample) {
                warn!("dropping heart-rate sample: {e}");
            }
        }
        SensorSnapshot {
            version: self.tracker.grid_points(),
            view: self.tracker.view(),
            lost: self.lost,
        }
    }
}

/// Real-time run: `stream` is drained on a sensor thread that maintains the
/// uniform series and publishes snapshots; this thread renders audio and
/// only ever reads the latest snapshot.
pub fn run_live(
    clip: &AudioClip,
    stream: HrStream,
    sink: &mut dyn ChunkSink,
    settings: &RenderSettings,
    stop: &AtomicBool,
    pace: bool,
) -> Result<RenderOutcome, EngineError> {
    settings.validate()?;
    let mut tracker = HrTracker::new(settings.grid_rate_hz, settings.tempo.window_s)?;
    let (writer, mut reader) = snapshot_pair(SensorSnapshot::EMPTY);
    let sensor_stop = Arc::new(AtomicBool::new(false));
    let sensor_flag = Arc::clone(&sensor_stop);

    let sensor = thread::Builder::new()
        .name("hr-ingest".into())
        .spawn(move || {
            while !sensor_flag.load(Ordering::Relaxed) {
                match stream.next_timeout(Duration::from_millis(50)) {
                    Poll::Sample(s) => match tracker.push(&s) {
                        Ok(0) => {}
                        Ok(_) => writer.publish(SensorSnapshot {
                            version: tracker.grid_points(),
                            view: tracker.view(),
                            lost: false,
                        }),
                        Err(e) => debug!("dropping heart-rate sample: {e}"),
                    },
                    Poll::Pending => {}
                    Poll::Error(e) => {
                        warn!("heart-rate source failed: {e}");
                        writer.publish(SensorSnapshot {
                            version: tracker.grid_points(),
                            view: tracker.view(),
                            lost: true,
                        });
                        break;
                    }
                    Poll::Ended => break,
                }
            }
            stream.stop();
        })
        .expect("spawn heart-rate ingest thread");

    let pace = pace && !sink.is_realtime();
    let outcome = render_loop(clip, settings, sink, stop, pace, |_| reader.read());
    sensor_stop.store(true, Ordering::Relaxed);
    let _ = sensor.join();
    outcome
}

/// Decode the input, run the configured source into the configured sink,
/// write the trace. `stop` requests a graceful early finish.
pub fn run_with_stop(config: &EngineConfig, stop: &AtomicBool) -> Result<RunSummary, EngineError> {
    config.render.validate()?;
    config.source.validate()?;
    let clip = decode_wav(&config.input)?;
    if let Some(rate) = config.output_rate_hz {
        if rate != clip.sample_rate_hz() {
            return Err(AudioError::SampleRateMismatch {
                clip: clip.sample_rate_hz(),
                sink: rate,
            }
            .into());
        }
    }

    let outcome = match config.mode {
        EngineMode::Offline => {
            if config.source.kind == SourceKind::Ble {
                return Err(EngineError::Config("a BLE source needs live mode".into()));
            }
            let samples = hr_source::sample_iter(&config.source)?;
            let mut sink = open_sink(&config.sink, clip.sample_rate_hz(), clip.channel_count())?;
            let out = run_offline(&clip, samples, sink.as_mut(), &config.render, stop)?;
            sink.close()?;
            out
        }
        EngineMode::Live { pace } => {
            let mut sink = open_sink(&config.sink, clip.sample_rate_hz(), clip.channel_count())?;
            let stream = hr_source::open_stream(&config.source)?;
            let out = run_live(&clip, stream, sink.as_mut(), &config.render, stop, pace)?;
            sink.close()?;
            out
        }
    };

    if let Some(path) = &config.trace_path {
        save_trace(path, &outcome.trace)?;
    }
    Ok(RunSummary {
        chunks: outcome.trace.len(),
        frames: outcome.frames,
        duration_s: outcome.frames as f64 / f64::from(clip.sample_rate_hz()),
        trace_path: config.trace_path.clone(),
        sensor_lost: outcome.sensor_lost,
    })
}

pub fn run(config: &EngineConfig) -> Result<RunSummary, EngineError> {
    run_with_stop(config, &AtomicBool::new(false))
}
