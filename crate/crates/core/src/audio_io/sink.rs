use std::path::PathBuf;
use std::sync::mpsc::{self, SyncSender};
use std::thread::{self, JoinHandle};

use super::{encode_wav, AudioChunk, AudioClip, AudioError, WavFormat};

/// Chunks buffered between the renderer and the device, including the one
/// being played. At 1024 frames and 44.1 kHz this is about 93 ms.
pub const DEFAULT_QUEUE_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum SinkKind {
    Device { queue_depth: usize },
    File { path: PathBuf, format: WavFormat },
}

/// Ordered consumer of rendered chunks.
pub trait ChunkSink: Send {
    fn write(&mut self, chunk: &AudioChunk) -> Result<(), AudioError>;
    /// Flush and release. Later writes fail with [`AudioError::SinkClosed`].
    fn close(&mut self) -> Result<(), AudioError>;
    fn frames_written(&self) -> u64;
    /// True when `write` blocks at playback rate, so the caller need not pace.
    fn is_realtime(&self) -> bool {
        false
    }
}

pub fn open_sink(
    kind: &SinkKind,
    sample_rate_hz: u32,
    channels: usize,
) -> Result<Box<dyn ChunkSink>, AudioError> {
    match kind {
        SinkKind::File { path, format } => Ok(Box::new(FileSink::new(
            path.clone(),
            *format,
            sample_rate_hz,
            channels,
        )?)),
        SinkKind::Device { queue_depth } => {
            let backend = default_backend(sample_rate_hz, channels)?;
            Ok(Box::new(DeviceSink::new(backend, *queue_depth)))
        }
    }
}

/// Accumulates chunks in memory and writes a WAV file on close.
#[derive(Debug)]
pub struct FileSink {
    path: PathBuf,
    format: WavFormat,
    clip: Option<AudioClip>,
    frames: u64,
}

impl FileSink {
    pub fn new(
        path: PathBuf,
        format: WavFormat,
        sample_rate_hz: u32,
        channels: usize,
    ) -> Result<Self, AudioError> {
        let clip = AudioClip::new(sample_rate_hz, vec![Vec::new(); channels])?;
        Ok(Self {
            path,
            format,
            clip: Some(clip),
            frames: 0,
        })
    }
}

impl ChunkSink for FileSink {
    fn write(&mut self, chunk: &AudioChunk) -> Result<(), AudioError> {
        let clip = self.clip.as_mut().ok_or(AudioError::SinkClosed)?;
        clip.extend_from_chunk(chunk)?;
        self.frames += chunk.frames() as u64;
        Ok(())
    }

    fn close(&mut self) -> Result<(), AudioError> {
        let clip = self.clip.take().ok_or(AudioError::SinkClosed)?;
        encode_wav(&clip, &self.path, self.format)
    }

    fn frames_written(&self) -> u64 {
        self.frames
    }
}

/// Collects chunks into an in-memory clip.
#[derive(Debug)]
pub struct MemorySink {
    clip: AudioClip,
    closed: bool,
}

impl MemorySink {
    pub fn new(sample_rate_hz: u32, channels: usize) -> Result<Self, AudioError> {
        Ok(Self {
            clip: AudioClip::new(sample_rate_hz, vec![Vec::new(); channels])?,
            closed: false,
        })
    }

    pub fn clip(&self) -> &AudioClip {
        &self.clip
    }

    pub fn into_clip(self) -> AudioClip {
        self.clip
    }
}

impl ChunkSink for MemorySink {
    fn write(&mut self, chunk: &AudioChunk) -> Result<(), AudioError> {
        if self.closed {
            return Err(AudioError::SinkClosed);
        }
        self.clip.extend_from_chunk(chunk)
    }

    fn close(&mut self) -> Result<(), AudioError> {
        if std::mem::replace(&mut self.closed, true) {
            return Err(AudioError::SinkClosed);
        }
        Ok(())
    }

    fn frames_written(&self) -> u64 {
        self.clip.len_frames() as u64
    }
}

/// Platform audio output. `play` blocks until the device has taken the
/// chunk.
pub trait PlaybackBackend: Send {
    fn play(&mut self, chunk: &AudioChunk) -> Result<(), AudioError>;
}

/// The platform's default output device. This build has no platform audio
/// backend, so this always reports [`AudioError::DeviceUnavailable`].
pub fn default_backend(
    sample_rate_hz: u32,
    channels: usize,
) -> Result<Box<dyn PlaybackBackend>, AudioError> {
    Err(AudioError::DeviceUnavailable(format!(
        "no audio output backend compiled into this build ({sample_rate_hz} Hz, {channels} ch requested)"
    )))
}

/// Hands chunks, in order, to a playback thread through a bounded queue.
pub struct DeviceSink {
    tx: Option<SyncSender<AudioChunk>>,
    worker: Option<JoinHandle<Result<(), AudioError>>>,
    frames: u64,
}

impl DeviceSink {
    pub fn new(mut backend: Box<dyn PlaybackBackend>, queue_depth: usize) -> Self {
        // One chunk lives in the backend while the rest wait in the channel.
        let (tx, rx) = mpsc::sync_channel::<AudioChunk>(queue_depth.max(1) - 1);
        let worker = thread::Builder::new()
            .name("audio-out".into())
            .spawn(move || {
                for chunk in rx {
                    backend.play(&chunk)?;
                }
                Ok(())
            })
            .expect("spawn audio output thread");
        Self {
            tx: Some(tx),
            worker: Some(worker),
            frames: 0,
        }
    }

    fn join(&mut self) -> Result<(), AudioError> {
        match self.worker.take() {
            Some(h) => h.join().unwrap_or_else(|_| {
                Err(AudioError::DeviceUnavailable(
                    "audio thread panicked".into(),
                ))
            }),
            None => Ok(()),
        }
    }
}

impl ChunkSink for DeviceSink {
    fn write(&mut self, chunk: &AudioChunk) -> Result<(), AudioError> {
        let tx = self.tx.as_ref().ok_or(AudioError::SinkClosed)?;
        if tx.send(chunk.clone()).is_err() {
            // playback thread gone; surface its error
            self.tx = None;
            self.join()?;
            return Err(AudioError::DeviceUnavailable("playback stopped".into()));
        }
        self.frames += chunk.frames() as u64;
        Ok(())
    }

    fn close(&mut self) -> Result<(), AudioError> {
        if self.tx.take().is_none() && self.worker.is_none() {
            return Err(AudioError::SinkClosed);
        }
        self.join()
    }

    fn frames_written(&self) -> u64 {
        self.frames
    }

    fn is_realtime(&self) -> bool {
        true
    }
}

impl Drop for DeviceSink {
    fn drop(&mut self) {
        self.tx = None;
        let _ = self.join();
    }
}
