//! Knowledge base for beat annotation correction: beat annotations are
//! abstracted into QRS complexes, and QRS complexes into rhythms.

pub mod procedures;
pub mod wavelet;

use std::sync::Arc;

use crate::interval::{Interval, INF, NEG_INF};
use crate::search::Interpretation;
use crate::signal::AnnotationList;
use crate::model::{
    AbstractionModel, ConstraintGenerator, Descriptor, Endpoint, GeneratorInput, ModelError, Observable,
    ObservableId, PatternGrammar, TemporalConstraint,
};

pub use procedures::{pi_beatann, pi_qrs, BeatAnnProcedure, QrsProcedure, SignalContext};

pub const BEAT_ANN: ObservableId = ObservableId(0);
pub const QRS: ObservableId = ObservableId(1);
pub const NORMAL_RHYTHM: ObservableId = ObservableId(2);
pub const BRADYCARDIA: ObservableId = ObservableId(3);
pub const TACHYCARDIA: ObservableId = ObservableId(4);
pub const EXTRASYSTOLE: ObservableId = ObservableId(5);

/// Maximum distance between a beat annotation and its QRS.
pub const ANNOTATION_TOLERANCE: Interval = Interval::closed(-150, 150);
/// Allowed distance between the first two beats of an extrasystole.
pub const EXTRASYSTOLE_FIRST_RR: Interval = Interval::closed(200, 2000);
/// Shortest admissible premature interval.
pub const MIN_PREMATURE_RR: i64 = 200;
/// No two beats are closer than this, so a conjectured beat may not be
/// placed next to an existing one.
pub const REFRACTORY_MS: i64 = 200;

/// RR band of a regular rhythm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhythmParams {
    pub name: &'static str,
    pub observable: ObservableId,
    pub rr_interval: Interval,
}

pub const NORMAL_RR: RhythmParams = RhythmParams {
    name: "NormalRhythm",
    observable: NORMAL_RHYTHM,
    rr_interval: Interval::closed(475, 1333),
};
pub const BRADYCARDIA_RR: RhythmParams = RhythmParams {
    name: "Bradycardia",
    observable: BRADYCARDIA,
    rr_interval: Interval::closed(1000, 2000),
};
pub const TACHYCARDIA_RR: RhythmParams = RhythmParams {
    name: "Tachycardia",
    observable: TACHYCARDIA,
    rr_interval: Interval::closed(200, 600),
};

pub const RHYTHMS: [RhythmParams; 3] = [NORMAL_RR, BRADYCARDIA_RR, TACHYCARDIA_RR];

/// The six observables, in id order.
pub fn observables() -> Vec<Observable> {
    vec![
        Observable::new("BeatAnn", true).with_min_separation(REFRACTORY_MS),
        Observable::new("QRS", true).with_min_separation(REFRACTORY_MS),
        Observable::new("NormalRhythm", false),
        Observable::new("Bradycardia", false),
        Observable::new("Tachycardia", false),
        Observable::new("Extrasystole", false),
    ]
}

/// Whether `q` is one of the rhythm observables whose evidence is reported.
pub fn is_rhythm(q: ObservableId) -> bool {
    (NORMAL_RHYTHM.0..=EXTRASYSTOLE.0).contains(&q.0)
}

fn floor_mul(x: i64, num: i64, den: i64) -> i64 {
    (x * num).div_euclid(den)
}

fn ceil_mul(x: i64, num: i64, den: i64) -> i64 {
    -(-x * num).div_euclid(den)
}

/// `L(from, to) = [lower, upper]`; when the range is empty two contradicting
/// constraints are emitted so the extension is rejected by propagation.
fn bounded(from: Endpoint, to: Endpoint, lower: i64, upper: i64) -> Vec<TemporalConstraint> {
    match Interval::new(lower, upper) {
        Ok(iv) => vec![TemporalConstraint::new(from, to, iv)],
        Err(_) => vec![
            TemporalConstraint::new(from, to, Interval::new(lower, INF).expect("lower bound")),
            TemporalConstraint::new(from, to, Interval::new(NEG_INF, upper).expect("upper bound")),
        ],
    }
}

fn pin_begin(label: &str) -> ConstraintGenerator {
    ConstraintGenerator::fixed(
        label,
        Descriptor {
            constraints: vec![TemporalConstraint::new(Endpoint::Begin(0), Endpoint::HypBegin, Interval::ZERO)],
            end_anchor: None,
        },
    )
}

fn rr(prior: &[(crate::interval::TimePoint, crate::interval::TimePoint)], a: usize, b: usize) -> i64 {
    prior[b].0 - prior[a].0
}

/// `[l2n]`: the new RR stays in the band and within half of the previous RR,
/// and the hypothesis ends at the newest beat.
fn rhythm_step(band: Interval) -> ConstraintGenerator {
    ConstraintGenerator::new("l2n", move |input: &GeneratorInput<'_>| {
        let n = input.ordinal;
        let mut constraints = Vec::new();
        if n >= 2 && input.prior.len() >= n {
            let prev = rr(input.prior, n - 2, n - 1);
            let lo = band.lower().max(ceil_mul(prev, 1, 2));
            let hi = band.upper().min(floor_mul(prev, 3, 2));
            constraints.extend(bounded(Endpoint::Begin(n - 1), Endpoint::Begin(n), lo, hi));
        }
        Descriptor {
            constraints,
            end_anchor: Some((Endpoint::Begin(n), Interval::ZERO)),
        }
    })
}

fn rhythm_grammar(params: &RhythmParams, obs: &[Observable]) -> Result<PatternGrammar, ModelError> {
    let mut g = PatternGrammar::builder(params.name, params.observable);
    let h = g.nonterminal("H", false);
    let a = g.nonterminal("A", false);
    let b = g.nonterminal("B", false);
    let first_rr = ConstraintGenerator::fixed(
        "l21",
        Descriptor {
            constraints: vec![TemporalConstraint::new(
                Endpoint::Begin(0),
                Endpoint::Begin(1),
                params.rr_interval,
            )],
            end_anchor: None,
        },
    );
    g.production(h, QRS, Some(pin_begin("l20")), Some(a));
    g.production(a, QRS, Some(first_rr), Some(b));
    g.production(b, QRS, Some(rhythm_step(params.rr_interval)), Some(b));
    g.production(b, QRS, Some(rhythm_step(params.rr_interval)), None);
    g.build(obs)
}

fn extrasystole_grammar(obs: &[Observable]) -> Result<PatternGrammar, ModelError> {
    let mut g = PatternGrammar::builder("Extrasystole", EXTRASYSTOLE);
    let h = g.nonterminal("H", false);
    let c = g.nonterminal("C", false);
    let d = g.nonterminal("D", false);
    let e = g.nonterminal("E", false);
    let first = ConstraintGenerator::fixed(
        "l51",
        Descriptor {
            constraints: vec![TemporalConstraint::new(
                Endpoint::Begin(0),
                Endpoint::Begin(1),
                EXTRASYSTOLE_FIRST_RR,
            )],
            end_anchor: None,
        },
    );
    let premature = ConstraintGenerator::new("l52", |input: &GeneratorInput<'_>| {
        let mut constraints = Vec::new();
        if input.prior.len() >= 2 {
            let rr0 = rr(input.prior, 0, 1);
            constraints = bounded(
                Endpoint::Begin(1),
                Endpoint::Begin(2),
                MIN_PREMATURE_RR,
                floor_mul(rr0, 9, 10),
            );
        }
        Descriptor {
            constraints,
            end_anchor: None,
        }
    });
    let pause = ConstraintGenerator::new("l53", |input: &GeneratorInput<'_>| {
        let mut constraints = Vec::new();
        if input.prior.len() >= 3 {
            let rr0 = rr(input.prior, 0, 1);
            let rr1 = rr(input.prior, 1, 2);
            constraints.extend(bounded(
                Endpoint::Begin(1),
                Endpoint::Begin(3),
                ceil_mul(rr0, 17, 10),
                floor_mul(rr0, 23, 10),
            ));
            constraints.extend(bounded(
                Endpoint::Begin(2),
                Endpoint::Begin(3),
                ceil_mul(rr1, 5, 4),
                4 * rr1,
            ));
        }
        Descriptor {
            constraints,
            end_anchor: Some((Endpoint::Begin(3), Interval::ZERO)),
        }
    });
    g.production(h, QRS, Some(pin_begin("l50")), Some(c));
    g.production(c, QRS, Some(first), Some(d));
    g.production(d, QRS, Some(premature), Some(e));
    g.production(e, QRS, Some(pause), None);
    g.build(obs)
}

/// The abstraction model for beat correction. Pattern order is fixed:
/// annotation, QRS, the three regular rhythms, extrasystole.
#[derive(Debug, Clone)]
pub struct EcgModel {
    pub model: AbstractionModel,
    pub signal: Option<Arc<SignalContext>>,
}

impl EcgModel {
    pub fn model(&self) -> &AbstractionModel {
        &self.model
    }
}

/// The model without a signal: beats cannot be conjectured and QRS
/// complexes stay at their annotation times.
pub fn build_model() -> EcgModel {
    build_model_with_signal(None)
}

pub fn build_model_with_signal(signal: Option<Arc<SignalContext>>) -> EcgModel {
    let obs = observables();
    let annotation = {
        let mut g = PatternGrammar::builder("BeatAnnotation", BEAT_ANN);
        g.nonterminal("H", true);
        g.procedure(Arc::new(BeatAnnProcedure { signal: signal.clone() }));
        g.build(&obs).expect("annotation grammar")
    };
    let qrs = {
        let mut g = PatternGrammar::builder("QRS", QRS);
        let h = g.nonterminal("H", false);
        let l1 = ConstraintGenerator::fixed(
            "l1",
            Descriptor {
                constraints: vec![TemporalConstraint::new(
                    Endpoint::HypBegin,
                    Endpoint::Begin(0),
                    ANNOTATION_TOLERANCE,
                )],
                end_anchor: None,
            },
        );
        g.production(h, BEAT_ANN, Some(l1), None);
        g.procedure(Arc::new(QrsProcedure { signal: signal.clone() }));
        g.build(&obs).expect("QRS grammar")
    };
    let mut patterns = vec![annotation, qrs];
    for r in &RHYTHMS {
        patterns.push(rhythm_grammar(r, &obs).expect("rhythm grammar"));
    }
    patterns.push(extrasystole_grammar(&obs).expect("extrasystole grammar"));
    let model = AbstractionModel::new(obs, patterns).expect("acyclic knowledge base");
    EcgModel { model, signal }
}

/// One `N` annotation per QRS observation that some rhythm hypothesis
/// uses as evidence.
pub fn emit_annotations(interp: &Interpretation) -> AnnotationList {
    AnnotationList::from_times(
        interp
            .abstracted_observations(QRS, is_rhythm)
            .into_iter()
            .map(|o| o.begin.ms()),
    )
}
