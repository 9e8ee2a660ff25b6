mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use heartwarp::audio_io::{AudioError, SinkKind};
use heartwarp::engine::{self, EngineConfig, EngineError, EngineMode, RenderSettings, RunSummary};
use heartwarp::hr_source::{ble, SensorConfig, SourceKind, SyntheticParams};
use heartwarp::loop_sim::{self, HeartModelParams};
use heartwarp::{figure, TempoParams};
use log::warn;

use args::{Cli, Command, EngineArgs, SourceChoice, TempoArgs};

static STOP: AtomicBool = AtomicBool::new(false);

enum Failure {
    /// Bad flags or flag combinations; nothing was started.
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = ctrlc::set_handler(|| STOP.store(true, Ordering::Relaxed)) {
        warn!("interrupt handler not installed: {e}");
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Scan(a) => scan(a),
        Command::Play(a) => play(a),
        Command::Render(a) => render(a),
        Command::Simulate(a) => simulate(a),
        Command::Plot(a) => plot(a),
    }
}

fn scan(a: args::ScanArgs) -> Result<(), Failure> {
    if !(a.timeout.is_finite() && a.timeout > 0.0) {
        return Err(usage(format!(
            "--timeout must be positive, got {}",
            a.timeout
        )));
    }
    let mut central = ble::default_central(a.adapter.as_deref())?;
    let devices =
        ble::scan_heart_rate_devices(central.as_mut(), Duration::from_secs_f64(a.timeout))?;
    let mut out = io::stdout().lock();
    for d in devices {
        writeln!(out, "{}\t{}", d.address, d.name)?;
    }
    Ok(())
}

fn tempo_params(a: &TempoArgs) -> Result<TempoParams, Failure> {
    let p = TempoParams {
        base: a.base,
        clip_lo: a.clip.0,
        clip_hi: a.clip.1,
        gain: a.gain,
        window_s: a.window,
        flat_eps: a.flat_eps,
    };
    p.validate().map_err(|e| usage(e.to_string()))?;
    Ok(p)
}

fn engine_config(
    a: &EngineArgs,
    sink: SinkKind,
    mode: EngineMode,
) -> Result<EngineConfig, Failure> {
    let render = RenderSettings {
        tempo: tempo_params(&a.tempo)?,
        chunk_frames: a.chunk,
        grid_rate_hz: a.grid_rate,
        max_chunks: None,
    };
    render.validate().map_err(|e| usage(e.to_string()))?;

    let s = &a.source;
    let choice = match &s.hr {
        Some(path) => SourceChoice::Replay(path.clone()),
        None => s.source.clone(),
    };
    let mut source = match choice {
        SourceChoice::Ble(addr) => SensorConfig::ble(addr),
        SourceChoice::Replay(path) => SensorConfig::replay(path.to_string_lossy()),
        SourceChoice::Sim(seed) => SensorConfig::synthetic(SyntheticParams {
            seed,
            start_bpm: s.sim_bpm,
            drift: s.sim_drift,
            ..SyntheticParams::default()
        }),
    };
    source.replay_speed = s.speed;
    source.adapter = s.adapter.clone();
    source.validate().map_err(|e| usage(e.to_string()))?;
    if mode == EngineMode::Offline && source.kind == SourceKind::Ble {
        return Err(usage("a BLE source can only drive `play`"));
    }

    Ok(EngineConfig {
        input: a.input.clone(),
        render,
        source,
        sink,
        trace_path: a.trace.clone(),
        mode,
        output_rate_hz: None,
    })
}

fn report(verb: &str, s: &RunSummary, out: Option<&std::path::Path>) {
    let dest = out
        .map(|p| format!(" -> {}", p.display()))
        .unwrap_or_default();
    println!("{verb} {} chunks, {:.3} s{dest}", s.chunks, s.duration_s);
    if let Some(t) = &s.trace_path {
        println!("trace {}", t.display());
    }
    if s.sensor_lost {
        println!("sensor lost during run; multiplier was held");
    }
}

fn render(a: args::RenderArgs) -> Result<(), Failure> {
    let sink = SinkKind::File {
        path: a.out.clone(),
        format: a.engine.format.into(),
    };
    let config = engine_config(&a.engine, sink, EngineMode::Offline)?;
    let summary = engine::run_with_stop(&config, &STOP)
        .with_context(|| format!("rendering {}", config.input.display()))?;
    report("rendered", &summary, Some(&a.out));
    Ok(())
}

fn play(a: args::PlayArgs) -> Result<(), Failure> {
    if a.queue == 0 {
        return Err(usage("--queue must be at least 1"));
    }
    let file_sink = a.out.as_ref().map(|path| SinkKind::File {
        path: path.clone(),
        format: a.engine.format.into(),
    });
    let mode = EngineMode::Live { pace: true };
    let sink = match (&file_sink, a.no_device) {
        (Some(f), true) => f.clone(),
        _ => SinkKind::Device {
            queue_depth: a.queue,
        },
    };
    let mut config = engine_config(&a.engine, sink, mode)?;

    let summary = match engine::run_with_stop(&config, &STOP) {
        Err(EngineError::Audio(AudioError::DeviceUnavailable(why))) if file_sink.is_some() => {
            warn!("audio device unavailable ({why}); writing to file instead");
            config.sink = file_sink.clone().expect("checked above");
            engine::run_with_stop(&config, &STOP)
        }
        other => other,
    }
    .with_context(|| format!("playing {}", config.input.display()))?;
    let dest = match config.sink {
        SinkKind::File { ref path, .. } => Some(path.as_path()),
        SinkKind::Device { .. } => None,
    };
    report("played", &summary, dest);
    Ok(())
}

fn simulate(a: args::SimulateArgs) -> Result<(), Failure> {
    let tempo = tempo_params(&a.tempo)?;
    let heart = HeartModelParams {
        hr0: a.hr0,
        beta: a.beta,
        tau: a.tau,
        sigma: a.sigma,
        seed: a.seed,
    };
    heart.validate().map_err(|e| usage(e.to_string()))?;
    if !(a.duration.is_finite() && a.duration > 0.0) {
        return Err(usage(format!(
            "--duration must be positive, got {}",
            a.duration
        )));
    }
    if !(a.dt.is_finite() && a.dt > 0.0 && a.dt <= a.duration) {
        return Err(usage(format!(
            "--dt must be in (0, duration], got {}",
            a.dt
        )));
    }

    let mut out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    if let Some(betas) = &a.beta_sweep {
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(usage("--beta-sweep values must be finite"));
        }
        let rows = loop_sim::sweep_coupling(&heart, &tempo, betas, a.duration, a.dt)?;
        writeln!(out, "beta,hr_min,hr_max,bounded,final_hr,final_multiplier")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.beta, r.hr_min, r.hr_max, r.bounded, r.final_hr, r.final_multiplier
            )?;
        }
    } else {
        let traj = loop_sim::simulate_loop(&heart, &tempo, a.duration, a.dt)?;
        loop_sim::write_trajectory(&mut out, &traj)?;
    }
    out.flush()?;
    Ok(())
}

fn plot(a: args::PlotArgs) -> Result<(), Failure> {
    let records = engine::load_trace(&a.trace)
        .with_context(|| format!("reading trace {}", a.trace.display()))?;
    figure::save_figure(&a.out, &records)?;
    println!("figure {} ({} chunks)", a.out.display(), records.len());
    Ok(())
}
