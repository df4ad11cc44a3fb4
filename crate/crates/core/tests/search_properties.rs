use std::sync::Arc;

use abductor_core::ecg_kb::{self, SignalContext, BEAT_ANN, EXTRASYSTOLE, NORMAL_RHYTHM, QRS};
use abductor_core::model::{AbstractionModel, Observation};
use abductor_core::search::{Focus, Interpretation, Move, Successors};
use abductor_core::synth::{self, SynthConfig};
use abductor_core::{pe_kbfs, InterpretationProblem, SearchBudget, TimePoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obs(q: abductor_core::ObservableId, times: &[i64]) -> Vec<Observation> {
    times.iter().map(|&t| Observation::instant(q, TimePoint(t))).collect()
}

fn kb_with_signal(spikes: &[i64], duration: i64, refs: &[i64]) -> ecg_kb::EcgModel {
    let rec = Arc::new(synth::ecg(spikes, duration, &SynthConfig::default()));
    let mut ctx = SignalContext::new(rec, 4).unwrap();
    ctx.calibrate(&refs.iter().map(|&t| TimePoint(t)).collect::<Vec<_>>());
    ecg_kb::build_model_with_signal(Some(Arc::new(ctx)))
}

fn apply_first(m: &AbstractionModel, i: &Interpretation, pred: impl Fn(&Move) -> bool) -> Interpretation {
    let mv = i.moves(m).into_iter().find(|mv| pred(mv)).expect("move available");
    i.apply(m, &mv).expect("move applies")
}

fn subsume_of(i: &Interpretation, t: i64) -> impl Fn(&Move) -> bool + '_ {
    move |mv| matches!(mv, Move::Subsume { observation, .. } if i.observation(*observation).begin == TimePoint(t))
}

#[test]
fn extrasystole_interpretation_counts() {
    let kb = kb_with_signal(&[0, 800, 1300, 2400], 3000, &[0, 800, 1300, 1600, 2400]);
    let problem = InterpretationProblem {
        model: &kb.model,
        observations: obs(BEAT_ANN, &[0, 800, 1300, 1600, 2400]),
    };
    let out = pe_kbfs(&problem, kb.model.default_k(), &SearchBudget::default());
    out.interpretation.verify().unwrap();
    assert_eq!(out.valuation.coverage_ratio(), (8, 9));
    assert!((out.valuation.simplicity() - 1.0 / 6.0).abs() < 1e-12);
    let hyps = out.interpretation.hypotheses();
    assert_eq!(hyps.iter().filter(|h| h.instance.grammar().hypothesis() == EXTRASYSTOLE).count(), 1);
    assert_eq!(ecg_kb::emit_annotations(&out.interpretation).times(), vec![0, 800, 1300, 2400]);
}

#[test]
fn premature_slot_only_admits_the_early_beat() {
    let kb = ecg_kb::build_model();
    let m = &kb.model;
    let root = Interpretation::new(m, obs(QRS, &[0, 800, 1300, 1600]));
    assert_eq!(root.focus(), Some(Focus::Observation(0)));
    let abduced = root.moves(m).iter().filter(|mv| matches!(mv, Move::Abduce { .. })).count();
    assert_eq!(abduced, 4);
    let es = apply_first(m, &root, |mv| matches!(mv, Move::Abduce { pattern: 5, .. }));
    let es = apply_first(m, &es, subsume_of(&es, 800));
    let moves = es.moves(m);
    let subsumable: Vec<i64> = moves
        .iter()
        .filter_map(|mv| match mv {
            Move::Subsume { observation, .. } => Some(es.observation(*observation).begin.ms()),
            _ => None,
        })
        .collect();
    assert_eq!(subsumable, vec![1300]);
    let late = Move::Subsume {
        candidate: es.hypotheses()[0].instance.next_findings().candidates[0].clone(),
        observation: 3,
    };
    assert!(es.apply(m, &late).is_none());
    let first_deduce = moves.iter().position(|mv| matches!(mv, Move::Deduce { .. })).unwrap();
    assert!(moves[..first_deduce].iter().all(|mv| matches!(mv, Move::Subsume { .. })));
}

#[test]
fn flat_signal_makes_deduction_a_dead_end() {
    let kb = kb_with_signal(&[0, 800, 1600], 4000, &[0, 800, 1600]);
    let m = &kb.model;
    let root = Interpretation::new(m, obs(QRS, &[0, 800, 1600]));
    let mut i = apply_first(m, &root, |mv| matches!(mv, Move::Abduce { pattern: 2, .. }));
    for t in [800, 1600] {
        i = apply_first(m, &i, subsume_of(&i, t));
    }
    let qrs = apply_first(m, &i, |mv| matches!(mv, Move::Deduce { .. }));
    let beat = qrs.moves(m).into_iter().find(|mv| matches!(mv, Move::Deduce { .. })).unwrap();
    assert!(qrs.apply(m, &beat).is_none());
}

#[test]
fn deduction_recovers_a_missing_beat() {
    let kb = kb_with_signal(&[0, 800, 1600, 2400], 4000, &[0, 800, 1600]);
    let m = &kb.model;
    let root = Interpretation::new(m, obs(QRS, &[0, 800, 1600]));
    let mut i = apply_first(m, &root, |mv| matches!(mv, Move::Abduce { pattern: 2, .. }));
    for t in [800, 1600] {
        i = apply_first(m, &i, subsume_of(&i, t));
    }
    let qrs = apply_first(m, &i, |mv| matches!(mv, Move::Deduce { .. }));
    let done = apply_first(m, &qrs, |mv| matches!(mv, Move::Deduce { .. }));
    let rhythm = &done.hypotheses()[0];
    assert_eq!(rhythm.instance.grammar().hypothesis(), NORMAL_RHYTHM);
    assert_eq!(rhythm.evidence.len(), 4);
    let t = done.observation(rhythm.evidence[3]).begin.ms();
    assert!((t - 2400).abs() <= 4, "{t}");
    assert_eq!(done.focus(), Some(Focus::Finding(0)));
    done.verify().unwrap();
}

#[test]
fn qrs_outside_rhythms_is_not_reported() {
    let kb = ecg_kb::build_model();
    let m = &kb.model;
    let root = Interpretation::new(m, obs(BEAT_ANN, &[0]));
    let qrs = apply_first(m, &root, |mv| matches!(mv, Move::Abduce { .. }));
    let done = qrs.finalize(m).unwrap();
    assert!(ecg_kb::emit_annotations(&done).is_empty());
    assert!(ecg_kb::emit_annotations(&root).is_empty());
}

#[test]
fn search_is_deterministic() {
    let kb = kb_with_signal(&[400, 1200, 2000, 2800, 3600], 4500, &[400, 1200, 2800, 3100, 3600]);
    let problem = InterpretationProblem {
        model: &kb.model,
        observations: obs(BEAT_ANN, &[400, 1200, 2800, 3100, 3600]),
    };
    let a = pe_kbfs(&problem, 4, &SearchBudget::default());
    let b = pe_kbfs(&problem, 4, &SearchBudget::default());
    assert_eq!(a.valuation, b.valuation);
    assert_eq!(a.stats, b.stats);
    assert_eq!(
        ecg_kb::emit_annotations(&a.interpretation),
        ecg_kb::emit_annotations(&b.interpretation)
    );
    assert_eq!(ecg_kb::emit_annotations(&a.interpretation).times(), vec![400, 1200, 2000, 2800, 3600]);
}

fn beat_times() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::btree_set(0i64..6000, 0..9).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_walks_keep_invariants(times in beat_times(), seed in 0u64..1000) {
        let kb = ecg_kb::build_model();
        let m = &kb.model;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut node = Interpretation::new(m, obs(BEAT_ANN, &times));
        for _ in 0..60 {
            let valid: Vec<(Move, Interpretation)> = node
                .moves(m)
                .into_iter()
                .filter_map(|mv| node.apply(m, &mv).map(|c| (mv, c)))
                .collect();
            if valid.is_empty() {
                break;
            }
            let (mv, child) = valid[rng.random_range(0..valid.len())].clone();
            prop_assert!(child.verify().is_ok());
            if matches!(mv, Move::Subsume { .. }) {
                let (c0, d0) = node.valuation().coverage_ratio();
                let (c1, d1) = child.valuation().coverage_ratio();
                prop_assert!(c1 * d0.max(1) >= c0 * d1.max(1) || d0 == 0);
            }
            node = child;
        }
    }

    #[test]
    fn search_results_verify(times in beat_times()) {
        let kb = ecg_kb::build_model();
        let problem = InterpretationProblem { model: &kb.model, observations: obs(BEAT_ANN, &times) };
        let out = pe_kbfs(&problem, 4, &SearchBudget { expansions: 300, wall_clock: None });
        prop_assert!(out.interpretation.verify().is_ok());
        prop_assert_eq!(out.valuation, out.interpretation.valuation());
        let emitted = ecg_kb::emit_annotations(&out.interpretation).times();
        prop_assert!(emitted.iter().all(|t| times.contains(t)));
    }

    #[test]
    fn successor_streams_are_resumable(times in beat_times()) {
        let kb = ecg_kb::build_model();
        let m = &kb.model;
        let root = Interpretation::new(m, obs(BEAT_ANN, &times));
        let mut stream = Successors::new(root.clone());
        let mut n = 0;
        while stream.next_successor(m).is_some() {
            n += 1;
        }
        let direct = root.moves(m).iter().filter(|mv| root.apply(m, mv).is_some()).count();
        prop_assert_eq!(n, direct);
    }
}
