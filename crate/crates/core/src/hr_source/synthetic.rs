use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{is_valid_bpm, HeartRateSample, SourceError};

/// Bounded Gaussian random walk, reflected at `[lo_bpm, hi_bpm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub seed: u64,
    pub start_bpm: f64,
    /// Walk scale in BPM per sqrt(second). Zero gives a constant stream.
    pub drift: f64,
    pub lo_bpm: f64,
    pub hi_bpm: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            seed: 0,
            start_bpm: 70.0,
            drift: 1.0,
            lo_bpm: 55.0,
            hi_bpm: 110.0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |msg: String| Err(SourceError::InvalidConfig(msg));
        if !(self.drift.is_finite() && self.drift >= 0.0) {
            return bad(format!("drift must be >= 0, got {}", self.drift));
        }
        if !(is_valid_bpm(self.lo_bpm) && is_valid_bpm(self.hi_bpm) && self.lo_bpm < self.hi_bpm) {
            return bad(format!(
                "walk bounds [{}, {}] must be ordered and inside the valid bpm range",
                self.lo_bpm, self.hi_bpm
            ));
        }
        if !(self.start_bpm >= self.lo_bpm && self.start_bpm <= self.hi_bpm) {
            return bad(format!("start bpm {} outside walk bounds", self.start_bpm));
        }
        Ok(())
    }
}

/// Endless deterministic sample sequence at a fixed rate, starting at t = 0.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    params: SyntheticParams,
    rate_hz: f64,
    rng: ChaCha8Rng,
    index: u64,
    bpm: f64,
}

impl SyntheticSource {
    pub fn new(params: SyntheticParams, rate_hz: f64) -> Result<Self, SourceError> {
        params.validate()?;
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(SourceError::InvalidConfig(format!(
                "rate must be positive, got {rate_hz}"
            )));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            bpm: params.start_bpm,
            params,
            rate_hz,
            index: 0,
        })
    }

    fn reflect(&self, mut x: f64) -> f64 {
        let (lo, hi) = (self.params.lo_bpm, self.params.hi_bpm);
        while x < lo || x > hi {
            if x > hi {
                x = 2.0 * hi - x;
            }
            if x < lo {
                x = 2.0 * lo - x;
            }
        }
        x
    }
}

impl Iterator for SyntheticSource {
    type Item = HeartRateSample;

    fn next(&mut self) -> Option<HeartRateSample> {
        if self.index > 0 && self.params.drift > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let step = self.params.drift * (1.0 / self.rate_hz).sqrt() * z;
            self.bpm = self.reflect(self.bpm + step);
        }
        let t = self.index as f64 / self.rate_hz;
        self.index += 1;
        Some(HeartRateSample {
            t,
            bpm: self.bpm,
            rr_intervals: Vec::new(),
        })
    }
}
