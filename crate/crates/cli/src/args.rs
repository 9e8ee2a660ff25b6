use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heartwarp::audio_io::{WavFormat, DEFAULT_QUEUE_DEPTH};
use heartwarp::hr_source::ble::ADAPTER_ENV;
use heartwarp::loop_sim::DEFAULT_DT_S;

#[derive(Debug, Parser)]
#[command(
    name = "heartwarp",
    version,
    about = "Heart-rate driven tempo warping for streaming audio"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List nearby sensors advertising the Heart Rate Service.
    Scan(ScanArgs),
    /// Play a clip live, warped by a heart-rate source.
    Play(PlayArgs),
    /// Render a clip offline to a WAV file, deterministically.
    Render(RenderArgs),
    /// Simulate the closed music/heart loop.
    Simulate(SimulateArgs),
    /// Draw a three-panel figure from a trace CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Scan duration in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub timeout: f64,
    #[arg(long, env = ADAPTER_ENV)]
    pub adapter: Option<String>,
}

/// Where heart-rate samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceChoice {
    Ble(String),
    Replay(PathBuf),
    Sim(u64),
}

impl FromStr for SourceChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        match (kind, rest) {
            ("ble", Some(addr)) if !addr.is_empty() => Ok(Self::Ble(addr.to_string())),
            ("replay", Some(path)) if !path.is_empty() => Ok(Self::Replay(path.into())),
            ("sim", None) => Ok(Self::Sim(0)),
            ("sim", Some(seed)) => seed
                .parse()
                .map(Self::Sim)
                .map_err(|_| format!("invalid seed `{seed}`")),
            _ => Err("expected ble:<addr>, replay:<path> or sim[:seed]".into()),
        }
    }
}

/// `lo:hi`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipRange(pub f64, pub f64);

impl FromStr for ClipRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
        Ok(Self(parse(lo)?, parse(hi)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Pcm16,
    Float,
}

impl From<FormatArg> for WavFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Pcm16 => WavFormat::Pcm16,
            FormatArg::Float => WavFormat::Float32,
        }
    }
}

#[derive(Debug, Args)]
pub struct TempoArgs {
    /// Multiplier at mid-window heart rate.
    #[arg(long, default_value_t = 1.25)]
    pub base: f64,
    /// Multiplier bounds.
    #[arg(long, default_value = "1.0:1.5")]
    pub clip: ClipRange,
    /// Sensitivity to the normalized heart rate.
    #[arg(long, default_value_t = 0.4)]
    pub gain: f64,
    /// Trailing window for normalization, seconds.
    #[arg(long, default_value_t = 5.0)]
    pub window: f64,
    /// Window range (BPM) below which the heart rate counts as flat.
    #[arg(long, default_value_t = 0.5)]
    pub flat_eps: f64,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Replay CSV; shorthand for `--source replay:<path>`.
    #[arg(long, conflicts_with = "source")]
    pub hr: Option<PathBuf>,
    /// Heart-rate source: ble:<addr>, replay:<path> or sim[:seed].
    #[arg(long, default_value = "sim")]
    pub source: SourceChoice,
    /// Replay time compression.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Starting BPM of the simulated source.
    #[arg(long, default_value_t = 70.0)]
    pub sim_bpm: f64,
    /// Random-walk scale of the simulated source, BPM per sqrt(s).
    #[arg(long, default_value_t = 1.0)]
    pub sim_drift: f64,
    #[arg(long, env = ADAPTER_ENV)]
    pub adapter: Option<String>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Input WAV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output frames per chunk.
    #[arg(long, default_value_t = 1024)]
    pub chunk: usize,
    /// Uniform heart-rate grid, Hz.
    #[arg(long, default_value_t = 55.0)]
    pub grid_rate: f64,
    /// Per-chunk trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Pcm16)]
    pub format: FormatArg,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub tempo: TempoArgs,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Write to this WAV instead of (or when there is no) audio device.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the audio device; requires --out.
    #[arg(long, requires = "out")]
    pub no_device: bool,
    /// Chunks buffered ahead of the device.
    #[arg(long, default_value_t = DEFAULT_QUEUE_DEPTH)]
    pub queue: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Output WAV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Resting heart rate, BPM.
    #[arg(long, default_value_t = 70.0)]
    pub hr0: f64,
    /// BPM shift per unit of tempo above 1.
    #[arg(long, default_value_t = 20.0)]
    pub beta: f64,
    /// Relaxation time constant, seconds.
    #[arg(long, default_value_t = 30.0)]
    pub tau: f64,
    /// Noise scale, BPM per sqrt(s).
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulated time, seconds.
    #[arg(long, default_value_t = 300.0)]
    pub duration: f64,
    /// Integration step, seconds.
    #[arg(long, default_value_t = DEFAULT_DT_S)]
    pub dt: f64,
    /// Trajectory CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated coupling gains; prints one summary row per gain
    /// instead of a trajectory.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub beta_sweep: Option<Vec<f64>>,
    #[command(flatten)]
    pub tempo: TempoArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// SVG output.
    #[arg(long)]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn source_specs() {
        assert_eq!("sim".parse(), Ok(SourceChoice::Sim(0)));
        assert_eq!("sim:42".parse(), Ok(SourceChoice::Sim(42)));
        assert_eq!(
            "ble:AA:BB:CC:DD:EE:FF".parse(),
            Ok(SourceChoice::Ble("AA:BB:CC:DD:EE:FF".into()))
        );
        assert_eq!(
            "replay:a/b.csv".parse(),
            Ok(SourceChoice::Replay("a/b.csv".into()))
        );
        assert!("sim:x".parse::<SourceChoice>().is_err());
        assert!("ble:".parse::<SourceChoice>().is_err());
        assert!("file.csv".parse::<SourceChoice>().is_err());
    }

    #[test]
    fn clip_ranges() {
        assert_eq!("1:1.5".parse(), Ok(ClipRange(1.0, 1.5)));
        assert!("1.5".parse::<ClipRange>().is_err());
        assert!("a:b".parse::<ClipRange>().is_err());
    }
}
