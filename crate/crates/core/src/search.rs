//! Interpretations and the partial-expansion K-best-first search over them.
//!
//! An [`Interpretation`] is a set of abstraction hypotheses plus a stack of
//! foci. The top of the stack drives the next inference: an observation is
//! abduced into a new hypothesis (or skipped), a pending finding is either
//! subsumed by an existing observation, deduced through a lower pattern, or
//! the hypothesis owning it is closed.

use std::cmp::{Ordering, Reverse};
use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::interval::{Interval, TimePoint};
use crate::model::{
    AbstractionModel, AbstractionPattern, Candidate, Endpoint, Observation, ObservableId, ProcedureInput,
};

pub type ObsId = usize;
pub type HypId = usize;

/// What the next inference step works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Focus {
    Observation(ObsId),
    /// The next finding of a hypothesis.
    Finding(HypId),
}

#[derive(Debug, Clone)]
pub struct Hypothesis {
    /// Index into the model's pattern list.
    pub pattern: usize,
    pub instance: AbstractionPattern,
    /// The conjectured observation `o^H`.
    pub observation: ObsId,
    /// Matched observation per finding, in finding order.
    pub evidence: Vec<ObsId>,
    /// Admissible absolute times for the hypothesis begin.
    pub window: Interval,
    /// Set when this hypothesis was deduced for finding `k` of another one.
    pub parent: Option<(HypId, usize)>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct ObsState {
    abstracted_by: Option<HypId>,
    resolved: bool,
    skipped: bool,
}

/// `<1 - C, 1/S>` kept as exact integers: the uncovered and total counts
/// of observations to explain, and the number of conjectured observations.
#[derive(Debug, Clone, Copy)]
pub struct Valuation {
    uncovered: u64,
    domain: u64,
    conjectured: u64,
}

impl Valuation {
    /// Uncovered fraction; zero when there is nothing to explain.
    pub fn one_minus_coverage(&self) -> f64 {
        if self.domain == 0 {
            0.0
        } else {
            self.uncovered as f64 / self.domain as f64
        }
    }

    pub fn inverse_simplicity(&self) -> f64 {
        (1 + self.conjectured) as f64
    }

    pub fn coverage(&self) -> f64 {
        1.0 - self.one_minus_coverage()
    }

    pub fn simplicity(&self) -> f64 {
        1.0 / self.inverse_simplicity()
    }

    pub fn is_full_coverage(&self) -> bool {
        self.uncovered == 0
    }

    /// `(covered, domain)`; `(0, 0)` when there is nothing to explain.
    pub fn coverage_ratio(&self) -> (u64, u64) {
        (self.domain - self.uncovered, self.domain)
    }

    pub fn conjectured(&self) -> u64 {
        self.conjectured
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> Ordering {
        let frac = |v: &Valuation| {
            if v.domain == 0 {
                (0u128, 1u128)
            } else {
                (u128::from(v.uncovered), u128::from(v.domain))
            }
        };
        let (a, b) = frac(self);
        let (c, d) = frac(other);
        (a * d)
            .cmp(&(c * b))
            .then(self.conjectured.cmp(&other.conjectured))
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Valuation {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Valuation {}

/// One inference step applicable to an interpretation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    Abduce { pattern: usize, candidate: Candidate },
    Skip,
    Subsume { candidate: Candidate, observation: ObsId },
    Deduce { candidate: Candidate, pattern: usize },
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("interpretation invariant violated: {0}")]
pub struct InvariantViolation(pub String);

#[derive(Debug, Clone)]
pub struct Interpretation {
    initial: Arc<[Observation]>,
    conjectured: Vec<Observation>,
    states: Vec<ObsState>,
    hyps: Vec<Arc<Hypothesis>>,
    focus: Vec<Focus>,
    domain: u64,
    covered: u64,
}

impl Interpretation {
    /// The trivial interpretation, focused on the earliest observation that
    /// needs explaining.
    pub fn new(model: &AbstractionModel, mut observations: Vec<Observation>) -> Self {
        observations.sort_by_key(|o| (o.begin, o.end, o.observable));
        let domain = observations.iter().filter(|o| model.in_domain(o.observable)).count() as u64;
        let states = vec![
            ObsState {
                resolved: true,
                ..ObsState::default()
            };
            observations.len()
        ];
        let mut interp = Interpretation {
            initial: observations.into(),
            conjectured: Vec::new(),
            states,
            hyps: Vec::new(),
            focus: Vec::new(),
            domain,
            covered: 0,
        };
        let first = interp
            .observation_ids()
            .filter(|&o| model.in_domain(interp.observation(o).observable))
            .min_by_key(|&o| {
                let ob = interp.observation(o);
                (ob.begin, Reverse(model.level(ob.observable)), o)
            });
        if let Some(o) = first {
            interp.focus.push(Focus::Observation(o));
        }
        interp
    }

    pub fn num_observations(&self) -> usize {
        self.states.len()
    }

    pub fn observation_ids(&self) -> std::ops::Range<ObsId> {
        0..self.states.len()
    }

    pub fn observation(&self, id: ObsId) -> &Observation {
        let n = self.initial.len();
        if id < n {
            &self.initial[id]
        } else {
            &self.conjectured[id - n]
        }
    }

    pub fn is_initial(&self, id: ObsId) -> bool {
        id < self.initial.len()
    }

    /// Whether the observation has concrete times. Conjectured observations
    /// become resolved when their hypothesis closes.
    pub fn is_resolved(&self, id: ObsId) -> bool {
        self.states[id].resolved
    }

    pub fn abstracted_by(&self, id: ObsId) -> Option<HypId> {
        self.states[id].abstracted_by
    }

    pub fn hypotheses(&self) -> &[Arc<Hypothesis>] {
        &self.hyps
    }

    pub fn focus(&self) -> Option<Focus> {
        self.focus.last().copied()
    }

    pub fn valuation(&self) -> Valuation {
        Valuation {
            uncovered: self.domain - self.covered,
            domain: self.domain,
            conjectured: self.conjectured.len() as u64,
        }
    }

    fn observation_mut(&mut self, id: ObsId) -> &mut Observation {
        let n = self.initial.len();
        &mut self.conjectured[id - n]
    }

    fn hyp_mut(&mut self, h: HypId) -> &mut Hypothesis {
        Arc::make_mut(&mut self.hyps[h])
    }

    fn conjecture(&mut self, model: &AbstractionModel, q: ObservableId) -> ObsId {
        self.conjectured.push(Observation {
            observable: q,
            values: vec![0.0; model.observable(q).attributes.len()],
            begin: TimePoint::ZERO,
            end: TimePoint::ZERO,
        });
        self.states.push(ObsState::default());
        if model.in_domain(q) {
            self.domain += 1;
        }
        self.states.len() - 1
    }

    fn mark_abstracted(&mut self, model: &AbstractionModel, o: ObsId, h: HypId) {
        self.states[o].abstracted_by = Some(h);
        if model.in_domain(self.observation(o).observable) {
            self.covered += 1;
        }
    }

    fn pins(&self, hyp: &Hypothesis) -> Vec<Option<(TimePoint, TimePoint)>> {
        hyp.evidence
            .iter()
            .map(|&o| self.states[o].resolved.then(|| self.observation(o).span()))
            .collect()
    }

    /// Times of every matched finding; `None` while any is still pending.
    fn resolved_prior(&self, hyp: &Hypothesis) -> Option<Vec<(TimePoint, TimePoint)>> {
        self.pins(hyp).into_iter().collect()
    }

    /// Absolute admissible times for the begin of the finding that `cand`
    /// would add to hypothesis `h`.
    pub fn slot_window(&self, h: HypId, cand: &Candidate) -> Option<Interval> {
        let hyp = &self.hyps[h];
        let prior = self.resolved_prior(hyp)?;
        let inst = hyp.instance.extend(cand, &prior).ok()?;
        let mut pins: Vec<_> = prior.into_iter().map(Some).collect();
        pins.push(None);
        let bounds = inst.anchored_bounds(&pins, hyp.window)?;
        Some(bounds[Endpoint::Begin(pins.len() - 1).var()])
    }

    /// Every move available at the current focus, in the order they are tried.
    pub fn moves(&self, model: &AbstractionModel) -> Vec<Move> {
        match self.focus() {
            None => Vec::new(),
            Some(Focus::Observation(o)) => {
                let q = self.observation(o).observable;
                let mut moves = Vec::new();
                for (pattern, g) in model.patterns().iter().enumerate() {
                    for candidate in AbstractionPattern::init(g).next_findings().candidates {
                        if candidate.observable == q {
                            moves.push(Move::Abduce { pattern, candidate });
                        }
                    }
                }
                moves.push(Move::Skip);
                moves
            }
            Some(Focus::Finding(h)) => {
                let next = self.hyps[h].instance.next_findings();
                let mut subsumes = Vec::new();
                let mut deduces = Vec::new();
                for cand in &next.candidates {
                    let Some(window) = self.slot_window(h, cand) else {
                        continue;
                    };
                    let mut matches: Vec<ObsId> = self
                        .observation_ids()
                        .filter(|&o| {
                            let st = &self.states[o];
                            let ob = self.observation(o);
                            st.resolved
                                && st.abstracted_by.is_none()
                                && ob.observable == cand.observable
                                && window.contains(ob.begin.ms())
                        })
                        .collect();
                    matches.sort_by_key(|&o| (self.observation(o).begin, o));
                    subsumes.extend(matches.into_iter().map(|observation| Move::Subsume {
                        candidate: cand.clone(),
                        observation,
                    }));
                    for (pattern, g) in model.patterns().iter().enumerate() {
                        if g.hypothesis() == cand.observable {
                            deduces.push(Move::Deduce {
                                candidate: cand.clone(),
                                pattern,
                            });
                        }
                    }
                }
                let mut moves = subsumes;
                moves.extend(deduces);
                if next.can_terminate {
                    moves.push(Move::Close);
                }
                moves
            }
        }
    }

    /// The successor produced by `mv`, or `None` if it is inconsistent.
    pub fn apply(&self, model: &AbstractionModel, mv: &Move) -> Option<Interpretation> {
        let mut next = self.clone();
        match (mv, self.focus()?) {
            (Move::Abduce { pattern, candidate }, Focus::Observation(o)) => {
                next.abduce(model, o, *pattern, candidate)?
            }
            (Move::Skip, Focus::Observation(o)) => {
                next.states[o].skipped = true;
                next.focus.pop();
                next.advance_focus(model);
            }
            (Move::Subsume { candidate, observation }, Focus::Finding(h)) => {
                next.subsume(model, h, candidate, *observation)?
            }
            (Move::Deduce { candidate, pattern }, Focus::Finding(h)) => {
                next.deduce(model, h, candidate, *pattern)?
            }
            (Move::Close, Focus::Finding(h)) => {
                if !self.hyps[h].instance.is_complete() {
                    return None;
                }
                next.close(model, h, true)?
            }
            _ => return None,
        }
        Some(next)
    }

    fn abduce(&mut self, model: &AbstractionModel, o: ObsId, pattern: usize, cand: &Candidate) -> Option<()> {
        let grammar = model.patterns().get(pattern)?;
        if cand.observable != self.observation(o).observable || self.states[o].abstracted_by.is_some() {
            return None;
        }
        let inst = AbstractionPattern::init(grammar).extend(cand, &[]).ok()?;
        inst.anchored_bounds(&[Some(self.observation(o).span())], Interval::UNBOUNDED)?;
        let x = self.conjecture(model, grammar.hypothesis());
        self.hyps.push(Arc::new(Hypothesis {
            pattern,
            instance: inst,
            observation: x,
            evidence: vec![o],
            window: Interval::UNBOUNDED,
            parent: None,
            closed: false,
        }));
        let h = self.hyps.len() - 1;
        self.mark_abstracted(model, o, h);
        self.focus.pop();
        self.focus.push(Focus::Finding(h));
        self.after_match(model, h, true)
    }

    fn subsume(&mut self, model: &AbstractionModel, h: HypId, cand: &Candidate, o: ObsId) -> Option<()> {
        let st = self.states.get(o)?;
        if !st.resolved || st.abstracted_by.is_some() || self.observation(o).observable != cand.observable {
            return None;
        }
        let hyp = Arc::clone(&self.hyps[h]);
        let prior = self.resolved_prior(&hyp)?;
        let inst = hyp.instance.extend(cand, &prior).ok()?;
        let mut pins: Vec<_> = prior.into_iter().map(Some).collect();
        pins.push(Some(self.observation(o).span()));
        inst.anchored_bounds(&pins, hyp.window)?;
        let hm = self.hyp_mut(h);
        hm.instance = inst;
        hm.evidence.push(o);
        self.mark_abstracted(model, o, h);
        self.after_match(model, h, true)
    }

    fn deduce(&mut self, model: &AbstractionModel, h: HypId, cand: &Candidate, pattern: usize) -> Option<()> {
        let grammar = Arc::clone(model.patterns().get(pattern)?);
        if grammar.hypothesis() != cand.observable {
            return None;
        }
        let hyp = Arc::clone(&self.hyps[h]);
        let prior = self.resolved_prior(&hyp)?;
        let k = prior.len();
        let inst = hyp.instance.extend(cand, &prior).ok()?;
        let mut pins: Vec<_> = prior.into_iter().map(Some).collect();
        pins.push(None);
        let bounds = inst.anchored_bounds(&pins, hyp.window)?;
        let slot = bounds[Endpoint::Begin(k).var()];
        let x = self.conjecture(model, cand.observable);
        let hm = self.hyp_mut(h);
        hm.instance = inst;
        hm.evidence.push(x);
        self.mark_abstracted(model, x, h);
        self.hyps.push(Arc::new(Hypothesis {
            pattern,
            instance: AbstractionPattern::init(&grammar),
            observation: x,
            evidence: Vec::new(),
            window: slot,
            parent: Some((h, k)),
            closed: false,
        }));
        let g = self.hyps.len() - 1;
        self.focus.push(Focus::Finding(g));
        self.after_match(model, g, true)
    }

    /// Closes `h` automatically once its grammar predicts nothing more.
    fn after_match(&mut self, model: &AbstractionModel, h: HypId, advance: bool) -> Option<()> {
        let next = self.hyps[h].instance.next_findings();
        if !next.candidates.is_empty() {
            Some(())
        } else if next.can_terminate {
            self.close(model, h, advance)
        } else {
            None
        }
    }

    /// Observes `o^H` from the evidence, checks it against the pattern and
    /// the parent hypothesis, and moves the focus on.
    fn close(&mut self, model: &AbstractionModel, h: HypId, advance: bool) -> Option<()> {
        if self.focus() != Some(Focus::Finding(h)) {
            return None;
        }
        let hyp = Arc::clone(&self.hyps[h]);
        let prior = self.resolved_prior(&hyp)?;
        let pins: Vec<_> = prior.iter().copied().map(Some).collect();
        let bounds = hyp.instance.anchored_bounds(&pins, hyp.window)?;
        let begin_window = bounds[Endpoint::HypBegin.var()];
        let (b, e) = match hyp.instance.grammar().procedure() {
            Some(proc_) => proc_.observe(&ProcedureInput {
                evidence: &prior,
                window: begin_window,
            })?,
            None => {
                let end = bounds[Endpoint::HypEnd.var()];
                if !begin_window.lower_bounded() || !end.lower_bounded() {
                    return None;
                }
                (TimePoint(begin_window.lower()), TimePoint(end.lower()))
            }
        };
        let check = hyp.instance.anchored_bounds(&pins, Interval::point(b.ms()))?;
        if b > e || !check[Endpoint::HypEnd.var()].contains(e.ms()) {
            return None;
        }
        let q = hyp.instance.grammar().hypothesis();
        let x = hyp.observation;
        let observable = model.observable(q);
        if observable.instantaneous && b != e {
            return None;
        }
        if let Some(sep) = observable.min_separation {
            let crowded = self.observation_ids().any(|o| {
                o != x && self.states[o].resolved && {
                    let other = self.observation(o);
                    other.observable == q && (other.begin - b).abs() < sep
                }
            });
            if crowded {
                return None;
            }
        }
        let obs = self.observation_mut(x);
        obs.begin = b;
        obs.end = e;
        self.states[x].resolved = true;
        self.hyp_mut(h).closed = true;
        self.focus.pop();
        if let Some((p, _)) = hyp.parent {
            let parent = Arc::clone(&self.hyps[p]);
            parent.instance.anchored_bounds(&self.pins(&parent), parent.window)?;
            return self.after_match(model, p, advance);
        }
        if advance {
            if model.in_domain(self.observation(x).observable) && self.states[x].abstracted_by.is_none() {
                self.focus.push(Focus::Observation(x));
            } else {
                self.advance_focus(model);
            }
        }
        Some(())
    }

    /// With nothing left on the stack, focuses the earliest unexplained
    /// observation of the highest abstraction level.
    fn advance_focus(&mut self, model: &AbstractionModel) {
        if !self.focus.is_empty() {
            return;
        }
        let next = self
            .observation_ids()
            .filter(|&o| {
                let st = &self.states[o];
                st.resolved && !st.skipped && st.abstracted_by.is_none() && model.in_domain(self.observation(o).observable)
            })
            .min_by_key(|&o| {
                let ob = self.observation(o);
                (Reverse(model.level(ob.observable)), ob.begin, o)
            });
        if let Some(o) = next {
            self.focus.push(Focus::Observation(o));
        }
    }

    /// Whether every hypothesis still awaiting findings could stop here.
    pub fn is_finalizable(&self) -> bool {
        self.focus.iter().all(|f| match *f {
            Focus::Observation(_) => true,
            Focus::Finding(h) => self.hyps[h].instance.is_complete(),
        })
    }

    /// Closes every open hypothesis without exploring further; `None` if
    /// one of them cannot be observed.
    pub fn finalize(&self, model: &AbstractionModel) -> Option<Interpretation> {
        if !self.is_finalizable() {
            return None;
        }
        let mut done = self.clone();
        while let Some(f) = done.focus() {
            match f {
                Focus::Observation(_) => {
                    done.focus.pop();
                }
                Focus::Finding(h) => {
                    if !done.hyps[h].instance.is_complete() {
                        return None;
                    }
                    done.close(model, h, false)?;
                }
            }
        }
        Some(done)
    }

    /// Resolved observations of `q` matched as evidence of a hypothesis whose
    /// observable satisfies `by`, in time order.
    pub fn abstracted_observations(
        &self,
        q: ObservableId,
        by: impl Fn(ObservableId) -> bool,
    ) -> Vec<&Observation> {
        let mut out: Vec<&Observation> = self
            .observation_ids()
            .filter(|&o| {
                let ob = self.observation(o);
                ob.observable == q
                    && self.states[o].resolved
                    && self.states[o]
                        .abstracted_by
                        .is_some_and(|h| by(self.hyps[h].instance.grammar().hypothesis()))
            })
            .map(|o| self.observation(o))
            .collect();
        out.sort_by_key(|o| (o.begin, o.end));
        out
    }

    /// Evidence disjointness and, for every closed hypothesis, that the
    /// observed times satisfy its pattern network.
    pub fn verify(&self) -> Result<(), InvariantViolation> {
        let fail = |msg: String| Err(InvariantViolation(msg));
        let mut seen = vec![false; self.states.len()];
        for (h, hyp) in self.hyps.iter().enumerate() {
            for &o in &hyp.evidence {
                if std::mem::replace(&mut seen[o], true) {
                    return fail(format!("observation {o} is evidence twice"));
                }
                if self.states[o].abstracted_by != Some(h) {
                    return fail(format!("observation {o} is evidence of hypothesis {h} but not marked"));
                }
            }
            if !hyp.closed {
                continue;
            }
            let x = self.observation(hyp.observation);
            if !hyp.window.contains(x.begin.ms()) {
                return fail(format!("hypothesis {h} begins outside its window"));
            }
            let mut assignment = vec![Some(x.begin), Some(x.end)];
            for &o in &hyp.evidence {
                if !self.states[o].resolved {
                    return fail(format!("closed hypothesis {h} has pending evidence {o}"));
                }
                let ob = self.observation(o);
                assignment.push(Some(ob.begin));
                assignment.push(Some(ob.end));
            }
            match hyp.instance.network().check_solution(&assignment) {
                Ok(true) => {}
                _ => return fail(format!("hypothesis {h} violates its temporal constraints")),
            }
        }
        for (o, st) in self.states.iter().enumerate() {
            if st.abstracted_by.is_some() && !seen[o] {
                return fail(format!("observation {o} is marked abstracted without being evidence"));
            }
        }
        Ok(())
    }
}

/// Resumable successor stream of one interpretation.
#[derive(Debug, Clone)]
pub struct Successors {
    interpretation: Interpretation,
    moves: Option<Vec<Move>>,
    next: usize,
}

impl Successors {
    pub fn new(interpretation: Interpretation) -> Self {
        Successors {
            interpretation,
            moves: None,
            next: 0,
        }
    }

    pub fn interpretation(&self) -> &Interpretation {
        &self.interpretation
    }

    /// The next consistent successor, skipping moves that fail.
    pub fn next_successor(&mut self, model: &AbstractionModel) -> Option<Interpretation> {
        let moves = self
            .moves
            .get_or_insert_with(|| self.interpretation.moves(model));
        while self.next < moves.len() {
            let mv = &moves[self.next];
            self.next += 1;
            if let Some(s) = self.interpretation.apply(model, mv) {
                return Some(s);
            }
        }
        None
    }
}

/// Expansion limits. After `expansions` node expansions, or once the wall
/// clock passes `wall_clock`, the open list is cut to the K best nodes on
/// every sweep; the search stops outright at `HARD_LIMIT_FACTOR` times the
/// expansion budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub expansions: usize,
    pub wall_clock: Option<Duration>,
}

pub const DEFAULT_EXPANSIONS: usize = 10_000;
pub const HARD_LIMIT_FACTOR: usize = 4;

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            expansions: DEFAULT_EXPANSIONS,
            wall_clock: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expansions: usize,
    pub generated: usize,
    pub exhausted: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub interpretation: Interpretation,
    pub valuation: Valuation,
    pub stats: SearchStats,
}

/// Observations to interpret under a model.
#[derive(Debug, Clone)]
pub struct InterpretationProblem<'m> {
    pub model: &'m AbstractionModel,
    pub observations: Vec<Observation>,
}

/// Partial-expansion K-best-first search. Returns the first finalizable
/// interpretation with full coverage, otherwise the best finalizable one
/// seen, ordered by valuation and then by discovery order.
pub fn pe_kbfs(problem: &InterpretationProblem<'_>, k: usize, budget: &SearchBudget) -> SearchOutcome {
    let model = problem.model;
    let k = k.max(1);
    let start = Instant::now();
    let root = Interpretation::new(model, problem.observations.clone());
    let mut stats = SearchStats::default();
    let mut best = root.finalize(model).map(|f| (f.valuation(), f)).expect("the root is finalizable");
    if best.0.is_full_coverage() {
        return SearchOutcome {
            valuation: best.0,
            interpretation: best.1,
            stats,
        };
    }

    let mut nodes: Vec<Option<Successors>> = vec![Some(Successors::new(root.clone()))];
    let mut open: BTreeSet<(Valuation, Reverse<usize>, usize)> = BTreeSet::new();
    let mut seq = 0usize;
    open.insert((root.valuation(), Reverse(seq), 0));
    let hard_limit = budget.expansions.saturating_mul(HARD_LIMIT_FACTOR).max(1);

    'search: while !open.is_empty() {
        let over_time = budget.wall_clock.is_some_and(|w| start.elapsed() > w);
        if stats.expansions >= budget.expansions || over_time {
            stats.truncated = true;
            while open.len() > k {
                let last = *open.iter().next_back().expect("non-empty");
                open.remove(&last);
                nodes[last.2] = None;
            }
            if stats.expansions >= hard_limit {
                break;
            }
        }
        let batch: Vec<_> = open.iter().take(k).copied().collect();
        for key in batch {
            open.remove(&key);
            let mut node = nodes[key.2].take().expect("open node is stored");
            stats.expansions += 1;
            let Some(child) = node.next_successor(model) else {
                stats.exhausted += 1;
                continue;
            };
            stats.generated += 1;
            let val = child.valuation();
            if val < best.0 {
                if let Some(done) = child.finalize(model) {
                    best = (done.valuation(), done);
                    if best.0.is_full_coverage() {
                        break 'search;
                    }
                }
            }
            seq += 1;
            nodes[key.2] = Some(node);
            open.insert((val, Reverse(seq), key.2));
            seq += 1;
            nodes.push(Some(Successors::new(child)));
            open.insert((val, Reverse(seq), nodes.len() - 1));
        }
    }
    log::debug!(
        "search: {} expansions, {} generated, coverage {:.3}, {} conjectures",
        stats.expansions,
        stats.generated,
        best.0.coverage(),
        best.0.conjectured()
    );
    SearchOutcome {
        valuation: best.0,
        interpretation: best.1,
        stats,
    }
}
