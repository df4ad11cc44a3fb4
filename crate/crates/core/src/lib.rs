//! Abductive interpretation of time-stamped observations, applied to the
//! correction of QRS beat annotations.
//!
//! The [`model`] module defines observables and the attributed regular
//! grammars that generate abstraction patterns; [`stp`] checks their temporal
//! constraints; [`search`] looks for the best interpretation of a set of
//! observations; [`ecg_kb`] is the beat/rhythm knowledge base and
//! [`pipeline`] runs it over whole records.

pub mod corrupt;
pub mod ecg_kb;
pub mod eval;
pub mod interval;
pub mod model;
pub mod pipeline;
pub mod search;
pub mod signal;
pub mod stp;
pub mod synth;

pub use ecg_kb::{build_model, build_model_with_signal, EcgModel, SignalContext};
pub use interval::{Interval, TimePoint};
pub use model::{AbstractionModel, AbstractionPattern, Observable, ObservableId, Observation, PatternGrammar};
pub use pipeline::{interpret, InterpretConfig, InterpretOutput};
pub use search::{pe_kbfs, Interpretation, InterpretationProblem, SearchBudget, SearchOutcome, Valuation};
pub use signal::{Annotation, AnnotationList, SignalRecord};
pub use stp::StpNetwork;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Wavelet(#[from] ecg_kb::wavelet::BadScale),
    #[error(transparent)]
    Invariant(#[from] search::InvariantViolation),
    #[error(transparent)]
    Rate(#[from] corrupt::BadRate),
    #[error("invalid configuration: {0}")]
    Config(String),
}
