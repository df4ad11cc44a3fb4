//! Observation procedures over the raw ECG.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::interval::{Interval, TimePoint};
use crate::model::{ObservationProcedure, ProcedureInput};
use crate::signal::{SignalError, SignalRecord};

use super::wavelet::{self, BadScale};

/// Fraction of the median reference energy a beat must reach.
pub const ENERGY_FRACTION: f64 = 0.10;
/// Multiple of the wavelet noise variance used when there are no references.
pub const NOISE_FLOOR_FACTOR: f64 = 4.0;
/// Half-width of the neighbourhood searched for the energy peak of a reference beat.
pub const REFERENCE_RADIUS_MS: i64 = 100;
/// Half-width of the neighbourhood around a located QRS that must carry energy.
pub const QRS_ENERGY_RADIUS_MS: i64 = 25;

/// A record plus its wavelet energy and the acceptance threshold for beats,
/// restricted to the time extent of the fragment being interpreted.
#[derive(Debug, Clone)]
pub struct SignalContext {
    record: Arc<SignalRecord>,
    energy: Arc<Vec<f64>>,
    threshold: f64,
    extent: Interval,
}

impl SignalContext {
    /// Whole-record context. The threshold starts at the noise fallback;
    /// call [`SignalContext::calibrate`] once reference beats are known.
    pub fn new(record: Arc<SignalRecord>, scale: u32) -> Result<Self, BadScale> {
        let energy = Arc::new(wavelet::energy(record.samples(), scale)?);
        let extent = Interval::new(0, record.duration_ms()).expect("non-negative duration");
        let mut ctx = SignalContext {
            record,
            energy,
            threshold: 0.0,
            extent,
        };
        ctx.threshold = ctx.noise_floor();
        Ok(ctx)
    }

    pub fn record(&self) -> &SignalRecord {
        &self.record
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn extent(&self) -> Interval {
        self.extent
    }

    /// Same record and energy, narrower extent.
    pub fn restrict(&self, extent: Interval) -> SignalContext {
        SignalContext {
            extent: self.extent.intersect(&extent).unwrap_or(Interval::point(self.extent.lower())),
            ..self.clone()
        }
    }

    /// `NOISE_FLOOR_FACTOR` times the variance of the detail signal over the
    /// first second; the energy is the squared detail so this is its mean.
    fn noise_floor(&self) -> f64 {
        let n = (self.record.sampling_rate().round() as usize).min(self.energy.len());
        if n == 0 {
            return 0.0;
        }
        NOISE_FLOOR_FACTOR * self.energy[..n].iter().sum::<f64>() / n as f64
    }

    /// Sets the threshold to `ENERGY_FRACTION` of the median peak energy
    /// near the reference beats that fall inside the extent.
    pub fn calibrate(&mut self, references: &[TimePoint]) {
        let mut peaks: Vec<f64> = references
            .iter()
            .filter(|t| self.extent.contains(t.ms()))
            .filter_map(|&t| {
                let w = Interval::new(t.ms() - REFERENCE_RADIUS_MS, t.ms() + REFERENCE_RADIUS_MS).ok()?;
                self.peak_energy(w).map(|(_, e)| e)
            })
            .collect();
        if peaks.is_empty() {
            self.threshold = self.noise_floor();
            return;
        }
        peaks.sort_by(f64::total_cmp);
        let mid = peaks.len() / 2;
        let median = if peaks.len().is_multiple_of(2) {
            (peaks[mid - 1] + peaks[mid]) / 2.0
        } else {
            peaks[mid]
        };
        self.threshold = ENERGY_FRACTION * median;
    }

    /// Sample index range whose times lie in `w`, clipped to the record.
    fn index_range(&self, w: Interval) -> Option<(usize, usize)> {
        let fs = self.record.sampling_rate();
        let len = self.record.len();
        if len == 0 {
            return None;
        }
        let lo = ((w.lower().max(0) as f64) * fs / 1000.0).ceil() as usize;
        let hi = ((w.upper().min(self.record.duration_ms()) as f64) * fs / 1000.0).floor() as usize;
        let hi = hi.min(len - 1);
        (lo <= hi).then_some((lo, hi))
    }

    /// Earliest index of maximum energy within `w`.
    fn peak_energy(&self, w: Interval) -> Option<(usize, f64)> {
        let (lo, hi) = self.index_range(w)?;
        let mut best = (lo, self.energy[lo]);
        for i in lo + 1..=hi {
            if self.energy[i] > best.1 {
                best = (i, self.energy[i]);
            }
        }
        Some(best)
    }

    fn check_within(&self, w: Interval) -> Result<(), SignalError> {
        let full = Interval::new(0, self.record.duration_ms()).expect("duration");
        if full.contains_interval(&w) {
            Ok(())
        } else {
            Err(SignalError::OutOfRange {
                begin: w.lower(),
                end: w.upper(),
                duration: self.record.duration_ms(),
            })
        }
    }
}

/// Beat annotation procedure: the instant of maximum wavelet energy in
/// `window`, or `None` when that energy is below the threshold.
pub fn pi_beatann(ctx: &SignalContext, window: Interval) -> Result<Option<TimePoint>, SignalError> {
    ctx.check_within(window)?;
    Ok(ctx
        .peak_energy(window)
        .filter(|&(_, e)| e > ctx.threshold)
        .map(|(i, _)| ctx.record.time_of(i)))
}

/// Most frequent amplitude; ties go to the smaller amplitude.
pub fn mode(samples: &[i32]) -> Option<i32> {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_default() += 1;
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(i32, usize)>, (v, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((v, c)),
        })
        .map(|(v, _)| v)
}

/// Earliest index maximising `|x - mode(x)|`.
pub fn max_deviation_index(samples: &[i32]) -> Option<usize> {
    let baseline = i64::from(mode(samples)?);
    let mut best = (0usize, -1i64);
    for (i, &s) in samples.iter().enumerate() {
        let dev = (i64::from(s) - baseline).abs();
        if dev > best.1 {
            best = (i, dev);
        }
    }
    Some(best.0)
}

/// QRS procedure: the instant in `window` where the signal deviates most
/// from its mode over that window.
pub fn pi_qrs(record: &SignalRecord, window: Interval) -> Result<TimePoint, SignalError> {
    let full = Interval::new(0, record.duration_ms()).expect("duration");
    if !full.contains_interval(&window) {
        return Err(SignalError::OutOfRange {
            begin: window.lower(),
            end: window.upper(),
            duration: record.duration_ms(),
        });
    }
    let fs = record.sampling_rate();
    let lo = (window.lower() as f64 * fs / 1000.0).ceil() as usize;
    let hi = ((window.upper() as f64 * fs / 1000.0).floor() as usize).min(record.len().saturating_sub(1));
    if record.is_empty() || lo > hi {
        return Err(SignalError::OutOfRange {
            begin: window.lower(),
            end: window.upper(),
            duration: record.duration_ms(),
        });
    }
    let i = max_deviation_index(&record.samples()[lo..=hi]).expect("non-empty window");
    Ok(record.time_of(lo + i))
}

/// Conjectures a beat annotation from the signal alone.
#[derive(Debug, Clone)]
pub struct BeatAnnProcedure {
    pub signal: Option<Arc<SignalContext>>,
}

impl ObservationProcedure for BeatAnnProcedure {
    fn observe(&self, input: &ProcedureInput<'_>) -> Option<(TimePoint, TimePoint)> {
        let ctx = self.signal.as_ref()?;
        let window = input.window.intersect(&ctx.extent)?;
        let t = pi_beatann(ctx, window).ok()??;
        Some((t, t))
    }
}

/// Locates the QRS complex for a beat annotation. Without a signal the
/// annotation time is kept as is. With a signal, a location whose
/// neighbourhood carries no beat-level wavelet energy is rejected.
#[derive(Debug, Clone)]
pub struct QrsProcedure {
    pub signal: Option<Arc<SignalContext>>,
}

impl ObservationProcedure for QrsProcedure {
    fn observe(&self, input: &ProcedureInput<'_>) -> Option<(TimePoint, TimePoint)> {
        let &(ann, _) = input.evidence.first()?;
        let Some(ctx) = self.signal.as_ref() else {
            return input.window.contains(ann.ms()).then_some((ann, ann));
        };
        let window = input.window.intersect(&ctx.extent)?;
        let t = pi_qrs(&ctx.record, window).ok()?;
        let around = Interval::new(t.ms() - QRS_ENERGY_RADIUS_MS, t.ms() + QRS_ENERGY_RADIUS_MS).ok()?;
        let (_, e) = ctx.peak_energy(around)?;
        (e > ctx.threshold).then_some((t, t))
    }
}
