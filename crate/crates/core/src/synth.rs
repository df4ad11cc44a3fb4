//! Synthetic ECG records: Gaussian QRS bumps over a flat, lightly noisy baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signal::SignalRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sampling_rate: f64,
    /// Peak height of a QRS bump, in ADC units.
    pub amplitude: f64,
    /// Standard deviation of a QRS bump.
    pub width_ms: f64,
    /// Half-width of the uniform baseline noise, in ADC units.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sampling_rate: 250.0,
            amplitude: 1000.0,
            width_ms: 10.0,
            noise: 5.0,
            seed: 0,
        }
    }
}

/// A record of `duration_ms` with one QRS bump centred on each beat time.
pub fn ecg(beats: &[i64], duration_ms: i64, cfg: &SynthConfig) -> SignalRecord {
    let n = (duration_ms as f64 * cfg.sampling_rate / 1000.0).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reach = 6.0 * cfg.width_ms;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * 1000.0 / cfg.sampling_rate;
        let mut v = 0.0;
        for &b in beats {
            let d = t - b as f64;
            if d.abs() <= reach {
                v += cfg.amplitude * (-0.5 * (d / cfg.width_ms).powi(2)).exp();
            }
        }
        if cfg.noise > 0.0 {
            v += rng.random_range(-cfg.noise..=cfg.noise);
        }
        samples.push(v.round() as i32);
    }
    SignalRecord::new(cfg.sampling_rate, samples).expect("positive sampling rate")
}

/// Beat times `start, start + rr, ...` strictly before `duration_ms`.
pub fn regular_beats(start: i64, rr: i64, duration_ms: i64) -> Vec<i64> {
    (0..)
        .map(|i| start + i * rr)
        .take_while(|&t| t < duration_ms)
        .collect()
}
