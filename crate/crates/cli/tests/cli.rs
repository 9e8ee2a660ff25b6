use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heartwarp::audio_io::{encode_wav, AudioClip, WavFormat};

fn heartwarp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heartwarp"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("run heartwarp")
}

fn code(args: &[&str]) -> i32 {
    heartwarp(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    wav: PathBuf,
}

impl Fixture {
    fn new(seconds: f64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("clip.wav");
        let n = (seconds * 44100.0) as usize;
        let clip = AudioClip::mono(
            44100,
            (0..n).map(|i| 0.3 * (i as f32 * 0.05).sin()).collect(),
        )
        .unwrap();
        encode_wav(&clip, &wav, WavFormat::Pcm16).unwrap();
        Self { dir, wav }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn replay(&self, name: &str, rows: &[(f64, f64)]) -> PathBuf {
        let p = self.path(name);
        let body: String = rows.iter().map(|(t, b)| format!("{t},{b}\n")).collect();
        std::fs::write(&p, format!("t_seconds,bpm\n{body}")).unwrap();
        p
    }
}

fn multipliers(trace: &Path) -> Vec<f64> {
    std::fs::read_to_string(trace)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn constant_replay_renders_at_base_tempo() {
    let fx = Fixture::new(4.0);
    let hr = fx.replay(
        "flat.csv",
        &(0..20).map(|i| (i as f64 * 0.5, 70.0)).collect::<Vec<_>>(),
    );
    let (out, trace) = (fx.path("o.wav"), fx.path("t.csv"));
    let res = heartwarp(&[
        "render",
        "--input",
        s(&fx.wav),
        "--hr",
        s(&hr),
        "--out",
        s(&out),
        "--trace",
        s(&trace),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let m = multipliers(&trace);
    assert!(!m.is_empty());
    assert!(m.iter().all(|&x| x == 1.25));
}

#[test]
fn render_twice_is_identical() {
    let fx = Fixture::new(3.0);
    let hr = fx.replay(
        "ramp.csv",
        &(0..40)
            .map(|i| (i as f64 * 0.1, 60.0 + i as f64))
            .collect::<Vec<_>>(),
    );
    let mut runs = Vec::new();
    for i in 0..2 {
        let (out, trace) = (fx.path(&format!("o{i}.wav")), fx.path(&format!("t{i}.csv")));
        assert_eq!(
            code(&[
                "render",
                "--input",
                s(&fx.wav),
                "--hr",
                s(&hr),
                "--out",
                s(&out),
                "--trace",
                s(&trace)
            ]),
            0
        );
        runs.push((std::fs::read(out).unwrap(), std::fs::read(trace).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
    let m = multipliers(&fx.path("t0.csv"));
    assert!(m.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(*m.last().unwrap(), 1.5);
}

#[test]
fn tempo_flags_reach_the_engine() {
    let fx = Fixture::new(2.0);
    let hr = fx.replay("flat.csv", &[(0.0, 80.0), (5.0, 80.0)]);
    let trace = fx.path("t.csv");
    let res = heartwarp(&[
        "render",
        "--input",
        s(&fx.wav),
        "--hr",
        s(&hr),
        "--out",
        s(&fx.path("o.wav")),
        "--trace",
        s(&trace),
        "--base",
        "1.1",
        "--clip",
        "0.9:1.2",
        "--chunk",
        "512",
        "--format",
        "float",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(multipliers(&trace).iter().all(|&x| x == 1.1));
    let second_t: f64 = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(second_t, 512.0 / 44100.0);
}

#[test]
fn plot_of_three_rows_has_three_panels() {
    let fx = Fixture::new(0.1);
    let trace = fx.path("t.csv");
    std::fs::write(
        &trace,
        "t_seconds,rms_amplitude,hr_bpm,multiplier\n0,0.1,70,1.25\n0.5,0.2,72,1.3\n1,0.15,71,1.28\n",
    )
    .unwrap();
    let svg = fx.path("f.svg");
    assert_eq!(code(&["plot", "--trace", s(&trace), "--out", s(&svg)]), 0);
    let text = std::fs::read_to_string(svg).unwrap();
    assert_eq!(text.matches("class=\"panel\"").count(), 3);
    assert_eq!(text.matches("data-x-min=\"0.000000\"").count(), 3);
    assert_eq!(text.matches("data-x-max=\"1.000000\"").count(), 3);
    assert_eq!(text.matches("data-points=\"3\"").count(), 3);
}

#[test]
fn simulate_writes_a_trajectory() {
    let fx = Fixture::new(0.1);
    let out = fx.path("loop.csv");
    assert_eq!(
        code(&[
            "simulate",
            "--beta",
            "10",
            "--sigma",
            "0",
            "--duration",
            "10",
            "--dt",
            "0.1",
            "--out",
            s(&out)
        ]),
        0
    );
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("t_seconds,hr_bpm,multiplier\n"));
    assert_eq!(text.lines().count(), 102);

    let sweep = heartwarp(&["simulate", "--beta-sweep", "0,10", "--duration", "5"]);
    assert!(sweep.status.success());
    assert_eq!(String::from_utf8(sweep.stdout).unwrap().lines().count(), 3);
}

#[test]
fn play_without_a_device_writes_the_file() {
    let fx = Fixture::new(0.3);
    let hr = fx.replay("flat.csv", &[(0.0, 70.0)]);
    let (out, trace) = (fx.path("o.wav"), fx.path("t.csv"));
    let res = heartwarp(&[
        "play",
        "--input",
        s(&fx.wav),
        "--hr",
        s(&hr),
        "--no-device",
        "--out",
        s(&out),
        "--trace",
        s(&trace),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let clip = heartwarp::decode_wav(&out).unwrap();
    assert_eq!(clip.len_frames() % 1024, 0);
    assert_eq!(multipliers(&trace).len() * 1024, clip.len_frames());
}

#[test]
fn usage_errors_exit_2() {
    let fx = Fixture::new(0.1);
    let w = s(&fx.wav);
    let o = fx.path("o.wav");
    let o = s(&o);
    for args in [
        vec!["render"],
        vec!["frobnicate"],
        vec!["render", "--input", w, "--out", o, "--clip", "1.5:1.0"],
        vec!["render", "--input", w, "--out", o, "--clip", "1.5"],
        vec!["render", "--input", w, "--out", o, "--base", "2.0"],
        vec!["render", "--input", w, "--out", o, "--gain", "-1"],
        vec!["render", "--input", w, "--out", o, "--chunk", "0"],
        vec!["render", "--input", w, "--out", o, "--window", "0"],
        vec!["render", "--input", w, "--out", o, "--speed", "0"],
        vec!["render", "--input", w, "--out", o, "--source", "bogus"],
        vec!["render", "--input", w, "--out", o, "--source", "ble:AA:BB"],
        vec![
            "render", "--input", w, "--out", o, "--hr", "x.csv", "--source", "sim",
        ],
        vec!["play", "--input", w, "--no-device"],
        vec!["simulate", "--tau", "0"],
        vec!["simulate", "--hr0", "500"],
        vec!["scan", "--timeout", "-1"],
    ] {
        assert_eq!(code(&args), 2, "{args:?}");
    }
    assert!(!Path::new(o).exists());
}

#[test]
fn runtime_errors_exit_1() {
    let fx = Fixture::new(0.1);
    let o = fx.path("o.wav");
    assert_eq!(
        code(&[
            "render",
            "--input",
            s(&fx.path("missing.wav")),
            "--out",
            s(&o)
        ]),
        1
    );
    let bad = fx.path("bad.wav");
    std::fs::write(&bad, b"not a wav file at all").unwrap();
    assert_eq!(code(&["render", "--input", s(&bad), "--out", s(&o)]), 1);
    let hr = fx.replay("bad.csv", &[(1.0, 70.0), (0.5, 71.0)]);
    assert_eq!(
        code(&[
            "render",
            "--input",
            s(&fx.wav),
            "--hr",
            s(&hr),
            "--out",
            s(&o)
        ]),
        1
    );
    assert_eq!(
        code(&[
            "plot",
            "--trace",
            s(&fx.path("none.csv")),
            "--out",
            s(&fx.path("f.svg"))
        ]),
        1
    );
    // no audio device or BLE adapter in this build
    assert_eq!(code(&["play", "--input", s(&fx.wav)]), 1);
}

#[test]
fn scan_without_an_adapter_fails_with_a_message() {
    let res = heartwarp(&["scan", "--timeout", "0.1"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("adapter"));
}
