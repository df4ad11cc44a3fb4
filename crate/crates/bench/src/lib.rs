//! Deterministic inputs shared by the benchmarks.

use std::sync::Arc;

use abductor_core::corrupt::corrupt;
use abductor_core::ecg_kb::{self, SignalContext, BEAT_ANN};
use abductor_core::model::Observation;
use abductor_core::synth::{self, SynthConfig};
use abductor_core::{AnnotationList, Interval, SignalRecord, StpNetwork, TimePoint};

pub const RR_MS: i64 = 800;

/// A regular record with its true beats.
pub fn record(duration_ms: i64) -> (Arc<SignalRecord>, Vec<i64>) {
    let beats = synth::regular_beats(400, RR_MS, duration_ms);
    let rec = synth::ecg(&beats, duration_ms, &SynthConfig::default());
    (Arc::new(rec), beats)
}

/// Beat annotations with 5% spurious and 2% missing beats.
pub fn noisy_annotations(beats: &[i64], duration_ms: i64, seed: u64) -> AnnotationList {
    let truth = AnnotationList::from_times(beats.iter().copied());
    corrupt(&truth, duration_ms, 0.05, 0.02, seed).expect("valid rates")
}

/// Model and observations for one fragment starting at 0.
pub fn fragment_problem(duration_ms: i64, seed: u64) -> (ecg_kb::EcgModel, Vec<Observation>) {
    let (rec, beats) = record(duration_ms);
    let ann = noisy_annotations(&beats, duration_ms, seed);
    let times: Vec<TimePoint> = ann.times().into_iter().map(TimePoint).collect();
    let mut ctx = SignalContext::new(rec, 4).expect("valid scale");
    ctx.calibrate(&times);
    let kb = ecg_kb::build_model_with_signal(Some(Arc::new(ctx)));
    let obs = times.into_iter().map(|t| Observation::instant(BEAT_ANN, t)).collect();
    (kb, obs)
}

/// A consistent chain `x_i + [700, 900] = x_{i+1}` with a looser skip
/// constraint every few variables, so closure has work to do.
pub fn chain_network(n: usize) -> StpNetwork {
    let mut net = StpNetwork::with_variables(n);
    for i in 0..n.saturating_sub(1) {
        net.set_constraint(i, i + 1, Interval::closed(700, 900)).expect("in range");
        if i % 3 == 0 && i + 3 < n {
            net.set_constraint(i, i + 3, Interval::closed(2200, 2600)).expect("in range");
        }
    }
    net
}
