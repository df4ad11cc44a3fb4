//! Record-level interpretation: split into overlapping fragments, search
//! each one independently, merge the corrected annotations.

use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;

use crate::ecg_kb::{self, SignalContext, BEAT_ANN};
use crate::interval::{Interval, TimePoint};
use crate::model::Observation;
use crate::search::{pe_kbfs, InterpretationProblem, SearchBudget};
use crate::signal::{AnnotationList, SignalRecord};
use crate::Error;

/// Output annotations closer than this are treated as duplicates.
pub const MERGE_WINDOW_MS: i64 = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpretConfig {
    pub fragment_ms: i64,
    pub overlap_ms: i64,
    /// Open-list width; the model's default when `None`.
    pub k: Option<usize>,
    pub budget: usize,
    /// Also stop refining a fragment once its own duration has elapsed.
    pub realtime: bool,
    pub scale: u32,
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
}

impl Default for InterpretConfig {
    fn default() -> Self {
        InterpretConfig {
            fragment_ms: 30_000,
            overlap_ms: 3_000,
            k: None,
            budget: crate::search::DEFAULT_EXPANSIONS,
            realtime: false,
            scale: 4,
            jobs: None,
        }
    }
}

impl InterpretConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.overlap_ms < 0 || self.fragment_ms <= self.overlap_ms {
            return bad("fragment length must exceed the overlap, and the overlap must be non-negative");
        }
        if self.budget == 0 {
            return bad("the expansion budget must be positive");
        }
        if self.k == Some(0) {
            return bad("k must be at least 1");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1");
        }
        if self.scale < 2 || !self.scale.is_power_of_two() {
            return bad("the wavelet scale must be a power of two >= 2");
        }
        Ok(())
    }
}

/// Per-fragment search summary.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentReport {
    pub begin: i64,
    pub end: i64,
    pub annotations_in: usize,
    pub annotations_out: usize,
    pub coverage: f64,
    pub simplicity: f64,
    pub expansions: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct InterpretOutput {
    pub annotations: AnnotationList,
    pub fragments: Vec<FragmentReport>,
}

/// `[begin, end]` windows of `fragment_ms` advancing by `fragment_ms - overlap_ms`
/// until `extent` is reached.
pub fn fragments(extent: i64, fragment_ms: i64, overlap_ms: i64) -> Vec<(i64, i64)> {
    let step = fragment_ms - overlap_ms;
    assert!(step > 0, "fragment must exceed overlap");
    let mut out = Vec::new();
    if extent <= 0 {
        return out;
    }
    let mut begin = 0;
    loop {
        let end = (begin + fragment_ms).min(extent);
        out.push((begin, end));
        if end >= extent {
            return out;
        }
        begin += step;
    }
}

/// Sorted union keeping the earlier of any two times within `MERGE_WINDOW_MS`.
pub fn merge(mut times: Vec<i64>) -> Vec<i64> {
    times.sort_unstable();
    let mut out: Vec<i64> = Vec::with_capacity(times.len());
    for t in times {
        if out.last().is_none_or(|&last| t - last > MERGE_WINDOW_MS) {
            out.push(t);
        }
    }
    out
}

/// Corrects `annotations`. Without a signal no beat can be conjectured or
/// relocated, so the output is the subset of annotations that fit a rhythm.
pub fn interpret(
    signal: Option<&Arc<SignalRecord>>,
    annotations: &AnnotationList,
    cfg: &InterpretConfig,
) -> Result<InterpretOutput, Error> {
    cfg.validate()?;
    let times = annotations.times();
    let extent = match signal {
        Some(s) => s.duration_ms(),
        None => times.last().map_or(0, |&t| t + 1),
    };
    let context = signal
        .map(|s| SignalContext::new(Arc::clone(s), cfg.scale))
        .transpose()?;
    let windows = fragments(extent, cfg.fragment_ms, cfg.overlap_ms);
    let run = |&(begin, end): &(i64, i64)| -> Result<(Vec<i64>, FragmentReport), Error> {
        let last = end == extent;
        let local: Vec<i64> = times
            .iter()
            .copied()
            .filter(|&t| t >= begin && (t < end || (last && t <= end)))
            .collect();
        let ctx = context.as_ref().map(|c| {
            let mut c = c.restrict(Interval::new(begin, end).expect("ordered fragment"));
            c.calibrate(&local.iter().map(|&t| TimePoint(t)).collect::<Vec<_>>());
            Arc::new(c)
        });
        let kb = ecg_kb::build_model_with_signal(ctx);
        let problem = InterpretationProblem {
            model: &kb.model,
            observations: local
                .iter()
                .map(|&t| Observation::instant(BEAT_ANN, TimePoint(t)))
                .collect(),
        };
        let budget = SearchBudget {
            expansions: cfg.budget,
            wall_clock: cfg.realtime.then(|| Duration::from_millis((end - begin) as u64)),
        };
        let k = cfg.k.unwrap_or_else(|| kb.model.default_k());
        let outcome = pe_kbfs(&problem, k, &budget);
        outcome.interpretation.verify()?;
        let out: Vec<i64> = ecg_kb::emit_annotations(&outcome.interpretation)
            .times()
            .into_iter()
            .filter(|&t| (0..=extent).contains(&t))
            .collect();
        let report = FragmentReport {
            begin,
            end,
            annotations_in: local.len(),
            annotations_out: out.len(),
            coverage: outcome.valuation.coverage(),
            simplicity: outcome.valuation.simplicity(),
            expansions: outcome.stats.expansions,
            truncated: outcome.stats.truncated,
        };
        log::info!(
            "fragment [{begin}, {end}] ms: {} -> {} beats, coverage {:.4}, simplicity {:.4}, {} expansions",
            report.annotations_in,
            report.annotations_out,
            report.coverage,
            report.simplicity,
            report.expansions
        );
        Ok((out, report))
    };
    let results: Vec<Result<(Vec<i64>, FragmentReport), Error>> = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| windows.par_iter().map(run).collect()),
        None => windows.par_iter().map(run).collect(),
    };
    let mut all = Vec::new();
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let (out, report) = r?;
        all.extend(out);
        reports.push(report);
    }
    Ok(InterpretOutput {
        annotations: AnnotationList::from_times(merge(all)),
        fragments: reports,
    })
}
