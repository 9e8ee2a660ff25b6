//! Heart-rate driven tempo control for streaming audio.
//!
//! Heart-rate readings arrive from a BLE sensor, a replay file or a synthetic
//! random walk ([`hr_source`]). They are resampled onto a uniform grid with
//! trailing-window statistics ([`signal`]), normalized into a bounded tempo
//! multiplier ([`tempo`]) and applied to audio one chunk at a time by a naive
//! decimate / zero-intersperse warp ([`warp`]). The [`engine`] wires these
//! together in real time or offline and records a per-chunk trace; [`figure`]
//! renders that trace as a three-panel SVG. [`loop_sim`] closes the loop with a
//! toy heart model driven by the same controller.

pub mod audio_io;
pub mod engine;
pub mod figure;
pub mod hr_source;
pub mod loop_sim;
pub mod signal;
pub mod tempo;
pub mod warp;

pub use audio_io::{decode_wav, encode_wav, AudioChunk, AudioClip, WavFormat};
pub use engine::{compute_rms, EngineConfig, RunSummary, TraceRecord};
pub use hr_source::{HeartRateSample, SensorConfig, SourceKind};
pub use signal::{interpolate, UniformHrSeries, WindowStats};
pub use tempo::{map_tempo, normalize, TempoCommand, TempoParams};
pub use warp::{render_offline, warp_chunk, WarpState};
