//! Closed-loop toy model: tempo pulls heart rate, heart rate drives tempo.
//!
//! The heart is a first-order relaxation toward `hr0 + beta * (tempo - 1)`
//! with time constant `tau`, plus Gaussian noise (Euler–Maruyama). It is an
//! exploration tool, not a physiological model. The controller side is the
//! shipped one: samples go through [`HrTracker`] and [`tempo::command`]
//! exactly as in the engine.

use std::io::{self, Write};
use std::path::Path;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::hr_source::HeartRateSample;
use crate::signal::{HrTracker, SignalError};
use crate::tempo::{self, TempoParams, TempoParamsError};

pub const HR_FLOOR_BPM: f64 = 30.0;
pub const HR_CEIL_BPM: f64 = 220.0;
pub const DEFAULT_DT_S: f64 = 1.0 / 55.0;

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("invalid heart model: {0}")]
    Model(String),
    #[error(transparent)]
    Tempo(#[from] TempoParamsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeartModelParams {
    /// Resting heart rate, BPM.
    pub hr0: f64,
    /// BPM shift per unit of tempo above 1.
    pub beta: f64,
    /// Relaxation time constant, seconds.
    pub tau: f64,
    /// Noise scale, BPM per sqrt(second).
    pub sigma: f64,
    pub seed: u64,
}

impl Default for HeartModelParams {
    fn default() -> Self {
        Self {
            hr0: 70.0,
            beta: 20.0,
            tau: 30.0,
            sigma: 0.5,
            seed: 0,
        }
    }
}

impl HeartModelParams {
    pub fn validate(&self) -> Result<(), LoopError> {
        let bad = |m: String| Err(LoopError::Model(m));
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite".into());
        }
        if !(HR_FLOOR_BPM..=HR_CEIL_BPM).contains(&self.hr0) {
            return bad(format!(
                "hr0 {} outside [{HR_FLOOR_BPM}, {HR_CEIL_BPM}]",
                self.hr0
            ));
        }
        Ok(())
    }
}

/// One Euler–Maruyama step, clamped to `[30, 220]` BPM.
///
/// A standard normal is drawn on every call, even with `sigma = 0`, so the
/// random stream does not depend on the noise level.
pub fn step_heart<R: Rng + ?Sized>(
    hr: f64,
    tempo: f64,
    dt: f64,
    params: &HeartModelParams,
    rng: &mut R,
) -> f64 {
    let target = params.hr0 + params.beta * (tempo - 1.0);
    let z: f64 = rng.sample(StandardNormal);
    let next = hr + dt * (target - hr) / params.tau + params.sigma * dt.sqrt() * z;
    next.clamp(HR_FLOOR_BPM, HR_CEIL_BPM)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPoint {
    pub t: f64,
    pub hr_bpm: f64,
    pub multiplier: f64,
}

/// Run the loop for `duration_s` with step `dt`, starting at `hr0`.
///
/// At each step the current heart rate is fed to the tracker (grid rate
/// `1/dt`), the controller picks a multiplier, and the heart is advanced
/// under that multiplier.
pub fn simulate_loop(
    heart: &HeartModelParams,
    tempo_params: &TempoParams,
    duration_s: f64,
    dt: f64,
) -> Result<Vec<LoopPoint>, LoopError> {
    heart.validate()?;
    tempo_params.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(LoopError::Model(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= duration_s) {
        return Err(LoopError::Model(format!(
            "dt must be in (0, duration], got {dt}"
        )));
    }

    let steps = (duration_s / dt).round() as usize;
    let mut tracker = HrTracker::new(1.0 / dt, tempo_params.window_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(heart.seed);
    let mut hr = heart.hr0;
    let mut out = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * dt;
        tracker.push(&HeartRateSample {
            t,
            bpm: hr,
            rr_intervals: Vec::new(),
        })?;
        let multiplier = match tracker.view() {
            Some(v) => tempo::command(v.hr_bpm, &v.stats, tempo_params, t).multiplier,
            None => tempo_params.base,
        };
        out.push(LoopPoint {
            t,
            hr_bpm: hr,
            multiplier,
        });
        hr = step_heart(hr, multiplier, dt, heart, &mut rng);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub beta: f64,
    pub hr_min: f64,
    pub hr_max: f64,
    /// Heart rate stayed inside `[30, 220]` for the whole run.
    pub bounded: bool,
    pub final_hr: f64,
    pub final_multiplier: f64,
}

/// Simulate once per coupling gain, in parallel.
pub fn sweep_coupling(
    heart: &HeartModelParams,
    tempo_params: &TempoParams,
    betas: &[f64],
    duration_s: f64,
    dt: f64,
) -> Result<Vec<SweepResult>, LoopError> {
    thread::scope(|scope| {
        let handles: Vec<_> = betas
            .iter()
            .map(|&beta| {
                let params = HeartModelParams {
                    beta,
                    ..heart.clone()
                };
                scope.spawn(move || {
                    let traj = simulate_loop(&params, tempo_params, duration_s, dt)?;
                    let (lo, hi) = traj
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                            (lo.min(p.hr_bpm), hi.max(p.hr_bpm))
                        });
                    let last = traj[traj.len() - 1];
                    Ok(SweepResult {
                        beta,
                        hr_min: lo,
                        hr_max: hi,
                        bounded: lo >= HR_FLOOR_BPM && hi <= HR_CEIL_BPM,
                        final_hr: last.hr_bpm,
                        final_multiplier: last.multiplier,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

pub const TRAJECTORY_HEADER: [&str; 3] = ["t_seconds", "hr_bpm", "multiplier"];

pub fn write_trajectory<W: Write>(writer: W, points: &[LoopPoint]) -> io::Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(TRAJECTORY_HEADER)?;
    for p in points {
        wtr.write_record([
            p.t.to_string(),
            p.hr_bpm.to_string(),
            p.multiplier.to_string(),
        ])?;
    }
    wtr.flush()
}

pub fn save_trajectory(path: impl AsRef<Path>, points: &[LoopPoint]) -> io::Result<()> {
    write_trajectory(io::BufWriter::new(std::fs::File::create(path)?), points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(beta: f64) -> HeartModelParams {
        HeartModelParams {
            beta,
            sigma: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = quiet(20.0);
        assert_eq!(step_heart(70.0, 1.0, DEFAULT_DT_S, &p, &mut rng), 70.0);
    }

    #[test]
    fn relaxes_toward_tempo_set_point() {
        // Integrate the deterministic recurrence at tempo 1.5 for 20 tau.
        let p = quiet(20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hr = p.hr0;
        let steps = (20.0 * p.tau / DEFAULT_DT_S) as usize;
        for _ in 0..steps {
            hr = step_heart(hr, 1.5, DEFAULT_DT_S, &p, &mut rng);
        }
        assert!((hr - 80.0).abs() < 0.1, "{hr}");
    }

    #[test]
    fn clamped_range() {
        let p = HeartModelParams {
            beta: 1e6,
            ..quiet(0.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(step_heart(200.0, 1.5, 1.0, &p, &mut rng), HR_CEIL_BPM);
        assert_eq!(step_heart(40.0, 0.0, 1.0, &p, &mut rng), HR_FLOOR_BPM);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = HeartModelParams {
            sigma: 2.0,
            seed: 11,
            ..Default::default()
        };
        let a = simulate_loop(&p, &TempoParams::default(), 60.0, DEFAULT_DT_S).unwrap();
        let b = simulate_loop(&p, &TempoParams::default(), 60.0, DEFAULT_DT_S).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 60 * 55 + 1);
    }

    #[test]
    fn uncoupled_quiet_loop_sits_at_base() {
        let traj = simulate_loop(&quiet(0.0), &TempoParams::default(), 30.0, DEFAULT_DT_S).unwrap();
        assert!(traj
            .iter()
            .all(|p| p.hr_bpm == 70.0 && p.multiplier == 1.25));
    }

    #[test]
    fn invalid_inputs() {
        let tp = TempoParams::default();
        let bad_tau = HeartModelParams {
            tau: 0.0,
            ..Default::default()
        };
        assert!(simulate_loop(&bad_tau, &tp, 1.0, 0.1).is_err());
        assert!(simulate_loop(&HeartModelParams::default(), &tp, 0.0, 0.1).is_err());
        assert!(simulate_loop(&HeartModelParams::default(), &tp, 1.0, 0.0).is_err());
        let neg_sigma = HeartModelParams {
            sigma: -1.0,
            ..Default::default()
        };
        assert!(simulate_loop(&neg_sigma, &tp, 1.0, 0.1).is_err());
    }

    #[test]
    fn trajectory_csv() {
        let mut buf = Vec::new();
        write_trajectory(
            &mut buf,
            &[LoopPoint {
                t: 0.0,
                hr_bpm: 70.0,
                multiplier: 1.25,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t_seconds,hr_bpm,multiplier\n0,70,1.25\n"
        );
    }
}
