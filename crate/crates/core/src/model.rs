//! Observables, observations, pattern grammars and abstraction patterns.
//!
//! A [`PatternGrammar`] is a regular grammar whose terminals are observables
//! annotated with temporal descriptors. Walking its productions one finding at
//! a time builds an [`AbstractionPattern`]: the hypothesis variables plus two
//! variables per finding, constrained by whatever each descriptor emits.
//! Descriptors may depend on the concrete times of the evidence already
//! matched, which is why they are evaluated at extension time.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::interval::{Interval, TimePoint};
use crate::stp::{StpNetwork, VarId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate observable name `{0}`")]
    DuplicateObservable(String),
    #[error("unknown observable id {0}")]
    UnknownObservable(usize),
    #[error("grammar `{grammar}`: {reason}")]
    MalformedGrammar { grammar: String, reason: String },
    #[error("abstraction relation is cyclic through `{0}`")]
    CyclicAbstraction(String),
    #[error("observation of `{observable}` is invalid: {reason}")]
    InvalidObservation { observable: String, reason: String },
    #[error("no production at the cursor generates the requested finding")]
    NoSuchProduction,
    #[error("expected times for {expected} prior findings, got {got}")]
    EvidenceMismatch { expected: usize, got: usize },
    #[error("the extended pattern network is infeasible")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObservableId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observable {
    pub name: String,
    pub attributes: Vec<String>,
    pub instantaneous: bool,
    /// Two distinct observations of this observable cannot begin closer
    /// than this; conjectures that would are rejected.
    pub min_separation: Option<i64>,
}

impl Observable {
    pub fn new(name: impl Into<String>, instantaneous: bool) -> Self {
        Observable {
            name: name.into(),
            attributes: Vec::new(),
            instantaneous,
            min_separation: None,
        }
    }

    pub fn with_min_separation(mut self, ms: i64) -> Self {
        self.min_separation = Some(ms);
        self
    }

    pub fn with_attributes(mut self, attrs: &[&str]) -> Self {
        self.attributes = attrs.iter().map(|a| a.to_string()).collect();
        self
    }
}

/// A concrete occurrence of an observable. `values` is aligned with the
/// observable's attribute list.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub observable: ObservableId,
    pub values: Vec<f64>,
    pub begin: TimePoint,
    pub end: TimePoint,
}

impl Observation {
    /// An attribute-less observation with `begin == end`.
    pub fn instant(observable: ObservableId, t: TimePoint) -> Self {
        Observation {
            observable,
            values: Vec::new(),
            begin: t,
            end: t,
        }
    }

    pub fn span(&self) -> (TimePoint, TimePoint) {
        (self.begin, self.end)
    }
}

/// Variables of a pattern network, named by role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    HypBegin,
    HypEnd,
    Begin(usize),
    End(usize),
}

impl Endpoint {
    pub fn var(self) -> VarId {
        match self {
            Endpoint::HypBegin => 0,
            Endpoint::HypEnd => 1,
            Endpoint::Begin(k) => 2 + 2 * k,
            Endpoint::End(k) => 3 + 2 * k,
        }
    }
}

/// `L(from, to) = interval`, i.e. `to - from` lies in `interval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalConstraint {
    pub from: Endpoint,
    pub to: Endpoint,
    pub interval: Interval,
}

impl TemporalConstraint {
    pub fn new(from: Endpoint, to: Endpoint, interval: Interval) -> Self {
        TemporalConstraint { from, to, interval }
    }
}

/// Output of a temporal descriptor. `end_anchor` ties the hypothesis end to
/// one endpoint and replaces any anchor set by an earlier finding, so that a
/// repeating production can keep moving the end of the hypothesis forward.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Descriptor {
    pub constraints: Vec<TemporalConstraint>,
    pub end_anchor: Option<(Endpoint, Interval)>,
}

/// What a descriptor may look at: the ordinal of the finding being added and
/// the observed times of every earlier finding.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorInput<'a> {
    pub ordinal: usize,
    pub prior: &'a [(TimePoint, TimePoint)],
}

type GeneratorFn = dyn Fn(&GeneratorInput<'_>) -> Descriptor + Send + Sync;

/// A named, deterministic temporal descriptor `[l]`.
#[derive(Clone)]
pub struct ConstraintGenerator {
    label: Arc<str>,
    eval: Arc<GeneratorFn>,
}

impl ConstraintGenerator {
    pub fn new(
        label: &str,
        eval: impl Fn(&GeneratorInput<'_>) -> Descriptor + Send + Sync + 'static,
    ) -> Self {
        ConstraintGenerator {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    /// A descriptor that ignores evidence times.
    pub fn fixed(label: &str, descriptor: Descriptor) -> Self {
        Self::new(label, move |_| descriptor.clone())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn evaluate(&self, input: &GeneratorInput<'_>) -> Descriptor {
        (self.eval)(input)
    }
}

impl fmt::Debug for ConstraintGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.label)
    }
}

#[derive(Debug, Clone)]
pub struct Production {
    pub observable: ObservableId,
    pub descriptor: Option<ConstraintGenerator>,
    /// Non-terminal reached after this production; `None` ends the string.
    pub next: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct NonTerminal {
    pub name: String,
    pub productions: Vec<Production>,
    /// `C -> lambda`.
    pub accepts_empty: bool,
}

/// Input to an observation procedure: evidence times in finding order and
/// the admissible interval for the hypothesis begin, relative to the origin.
#[derive(Debug, Clone, Copy)]
pub struct ProcedureInput<'a> {
    pub evidence: &'a [(TimePoint, TimePoint)],
    pub window: Interval,
}

/// Computes the hypothesis observation from its evidence. Returning `None`
/// means the hypothesis cannot be observed and the branch is abandoned.
pub trait ObservationProcedure: Send + Sync + fmt::Debug {
    fn observe(&self, input: &ProcedureInput<'_>) -> Option<(TimePoint, TimePoint)>;
}

#[derive(Debug, Clone)]
pub struct PatternGrammar {
    name: String,
    hypothesis: ObservableId,
    hypothesis_span: Interval,
    nonterminals: Vec<NonTerminal>,
    instantaneous: Vec<bool>,
    procedure: Option<Arc<dyn ObservationProcedure>>,
}

/// Builds a grammar; non-terminal 0 is the initial symbol `H`.
#[derive(Debug)]
pub struct GrammarBuilder {
    name: String,
    hypothesis: ObservableId,
    hypothesis_span: Option<Interval>,
    nonterminals: Vec<NonTerminal>,
    procedure: Option<Arc<dyn ObservationProcedure>>,
}

impl GrammarBuilder {
    pub fn nonterminal(&mut self, name: &str, accepts_empty: bool) -> usize {
        self.nonterminals.push(NonTerminal {
            name: name.to_string(),
            productions: Vec::new(),
            accepts_empty,
        });
        self.nonterminals.len() - 1
    }

    pub fn production(
        &mut self,
        from: usize,
        observable: ObservableId,
        descriptor: Option<ConstraintGenerator>,
        next: Option<usize>,
    ) -> &mut Self {
        self.nonterminals[from].productions.push(Production {
            observable,
            descriptor,
            next,
        });
        self
    }

    pub fn hypothesis_span(&mut self, span: Interval) -> &mut Self {
        self.hypothesis_span = Some(span);
        self
    }

    pub fn procedure(&mut self, p: Arc<dyn ObservationProcedure>) -> &mut Self {
        self.procedure = Some(p);
        self
    }

    pub fn build(self, observables: &[Observable]) -> Result<PatternGrammar, ModelError> {
        let malformed = |reason: String| ModelError::MalformedGrammar {
            grammar: self.name.clone(),
            reason,
        };
        let hyp = observables
            .get(self.hypothesis.0)
            .ok_or(ModelError::UnknownObservable(self.hypothesis.0))?;
        if self.nonterminals.is_empty() {
            return Err(malformed("no initial symbol".into()));
        }
        let mut reachable = vec![false; self.nonterminals.len()];
        let mut stack = vec![0];
        while let Some(nt) = stack.pop() {
            if std::mem::replace(&mut reachable[nt], true) {
                continue;
            }
            for p in &self.nonterminals[nt].productions {
                if p.observable.0 >= observables.len() {
                    return Err(ModelError::UnknownObservable(p.observable.0));
                }
                if p.observable == self.hypothesis {
                    return Err(malformed(format!("terminal `{}` equals the hypothesis", hyp.name)));
                }
                if let Some(next) = p.next {
                    if next >= self.nonterminals.len() {
                        return Err(malformed(format!("production targets missing non-terminal {next}")));
                    }
                    stack.push(next);
                }
            }
        }
        if let Some(i) = reachable.iter().position(|r| !r) {
            return Err(malformed(format!(
                "non-terminal `{}` is unreachable",
                self.nonterminals[i].name
            )));
        }
        let span = self.hypothesis_span.unwrap_or(if hyp.instantaneous {
            Interval::ZERO
        } else {
            Interval::NON_NEGATIVE
        });
        Ok(PatternGrammar {
            name: self.name,
            hypothesis: self.hypothesis,
            hypothesis_span: span,
            nonterminals: self.nonterminals,
            instantaneous: observables.iter().map(|o| o.instantaneous).collect(),
            procedure: self.procedure,
        })
    }
}

impl PatternGrammar {
    pub fn builder(name: &str, hypothesis: ObservableId) -> GrammarBuilder {
        GrammarBuilder {
            name: name.to_string(),
            hypothesis,
            hypothesis_span: None,
            nonterminals: Vec::new(),
            procedure: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn hypothesis(&self) -> ObservableId {
        self.hypothesis
    }

    pub fn nonterminals(&self) -> &[NonTerminal] {
        &self.nonterminals
    }

    pub fn procedure(&self) -> Option<&Arc<dyn ObservationProcedure>> {
        self.procedure.as_ref()
    }

    /// Every observable that some production generates.
    pub fn finding_observables(&self) -> BTreeSet<ObservableId> {
        self.nonterminals
            .iter()
            .flat_map(|nt| nt.productions.iter().map(|p| p.observable))
            .collect()
    }

    /// Observables that can appear as the first finding.
    pub fn initial_observables(&self) -> BTreeSet<ObservableId> {
        self.nonterminals[0].productions.iter().map(|p| p.observable).collect()
    }

    fn is_instantaneous(&self, q: ObservableId) -> bool {
        self.instantaneous.get(q.0).copied().unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum CursorState {
    At(usize),
    Done,
}

/// A slot predicted by the grammar: which observable, under which descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub observable: ObservableId,
    pub descriptor: Option<Arc<str>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NextFindings {
    pub candidates: Vec<Candidate>,
    /// The evidence so far already spells a word of the grammar.
    pub can_terminate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Finding {
    pub observable: ObservableId,
    pub ordinal: usize,
    pub begin_var: VarId,
    pub end_var: VarId,
}

/// A partially or fully generated abstraction pattern.
#[derive(Debug, Clone)]
pub struct AbstractionPattern {
    grammar: Arc<PatternGrammar>,
    findings: Vec<Finding>,
    constraints: Vec<TemporalConstraint>,
    end_anchor: Option<(Endpoint, Interval)>,
    cursor: Vec<CursorState>,
}

impl AbstractionPattern {
    /// Rule 1: only the hypothesis variables, no findings.
    pub fn init(grammar: &Arc<PatternGrammar>) -> Self {
        AbstractionPattern {
            grammar: Arc::clone(grammar),
            findings: Vec::new(),
            constraints: vec![TemporalConstraint::new(
                Endpoint::HypBegin,
                Endpoint::HypEnd,
                grammar.hypothesis_span,
            )],
            end_anchor: None,
            cursor: vec![CursorState::At(0)],
        }
    }

    pub fn grammar(&self) -> &Arc<PatternGrammar> {
        &self.grammar
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }

    pub fn num_variables(&self) -> usize {
        2 + 2 * self.findings.len()
    }

    pub fn next_findings(&self) -> NextFindings {
        let mut candidates: Vec<Candidate> = Vec::new();
        let mut can_terminate = false;
        for state in &self.cursor {
            match *state {
                CursorState::Done => can_terminate = true,
                CursorState::At(nt) => {
                    let nt = &self.grammar.nonterminals[nt];
                    can_terminate |= nt.accepts_empty;
                    for p in &nt.productions {
                        let c = Candidate {
                            observable: p.observable,
                            descriptor: p.descriptor.as_ref().map(|d| Arc::clone(&d.label)),
                        };
                        if !candidates.contains(&c) {
                            candidates.push(c);
                        }
                    }
                }
            }
        }
        NextFindings {
            candidates,
            can_terminate,
        }
    }

    /// Whether the findings generated so far form a word of the grammar.
    pub fn is_complete(&self) -> bool {
        self.next_findings().can_terminate
    }

    /// Rules 2 and 3: appends one finding for `candidate` and intersects the
    /// constraints its descriptor yields for the given prior evidence times.
    pub fn extend(
        &self,
        candidate: &Candidate,
        prior: &[(TimePoint, TimePoint)],
    ) -> Result<AbstractionPattern, ModelError> {
        let k = self.findings.len();
        if prior.len() != k {
            return Err(ModelError::EvidenceMismatch {
                expected: k,
                got: prior.len(),
            });
        }
        let mut fired: Vec<&Production> = Vec::new();
        let mut cursor: Vec<CursorState> = Vec::new();
        for state in &self.cursor {
            if let CursorState::At(nt) = *state {
                for p in &self.grammar.nonterminals[nt].productions {
                    let label = p.descriptor.as_ref().map(|d| &d.label);
                    if p.observable == candidate.observable && label == candidate.descriptor.as_ref() {
                        fired.push(p);
                        cursor.push(p.next.map_or(CursorState::Done, CursorState::At));
                    }
                }
            }
        }
        let Some(first) = fired.first() else {
            return Err(ModelError::NoSuchProduction);
        };
        cursor.sort();
        cursor.dedup();

        let mut next = self.clone();
        next.cursor = cursor;
        next.findings.push(Finding {
            observable: candidate.observable,
            ordinal: k,
            begin_var: Endpoint::Begin(k).var(),
            end_var: Endpoint::End(k).var(),
        });
        let duration = if self.grammar.is_instantaneous(candidate.observable) {
            Interval::ZERO
        } else {
            Interval::NON_NEGATIVE
        };
        next.constraints
            .push(TemporalConstraint::new(Endpoint::Begin(k), Endpoint::End(k), duration));
        match &first.descriptor {
            Some(gen) => {
                let d = gen.evaluate(&GeneratorInput { ordinal: k, prior });
                next.constraints.extend(d.constraints);
                if d.end_anchor.is_some() {
                    next.end_anchor = d.end_anchor;
                }
            }
            None => {
                // Omitted descriptor: the new finding starts strictly after
                // every endpoint of the earlier findings.
                for j in 0..k {
                    for from in [Endpoint::Begin(j), Endpoint::End(j)] {
                        next.constraints.push(TemporalConstraint::new(
                            from,
                            Endpoint::Begin(k),
                            Interval::at_least(1),
                        ));
                    }
                }
            }
        }
        if next.network().propagate_from(0).is_err() {
            return Err(ModelError::Infeasible);
        }
        Ok(next)
    }

    /// The pattern network `N_P`.
    pub fn network(&self) -> StpNetwork {
        let mut net = StpNetwork::with_variables(self.num_variables());
        let anchor = self
            .end_anchor
            .map(|(from, iv)| TemporalConstraint::new(from, Endpoint::HypEnd, iv));
        for c in self.constraints.iter().chain(anchor.iter()) {
            net.set_constraint(c.from.var(), c.to.var(), c.interval)
                .expect("pattern constraints reference pattern variables");
        }
        net
    }

    /// Absolute bounds for every pattern variable when the matched findings
    /// are pinned to their observed times and the hypothesis begin is
    /// restricted to `hypothesis_window`. `None` if that is inconsistent.
    pub fn anchored_bounds(
        &self,
        pins: &[Option<(TimePoint, TimePoint)>],
        hypothesis_window: Interval,
    ) -> Option<Vec<Interval>> {
        let mut net = self.network();
        let origin = net.add_variable();
        let pin = |net: &mut StpNetwork, e: Endpoint, t: TimePoint| {
            net.set_constraint(origin, e.var(), Interval::point(t.ms()))
                .expect("pattern variable");
        };
        net.set_constraint(origin, Endpoint::HypBegin.var(), hypothesis_window)
            .expect("pattern variable");
        for (k, p) in pins.iter().enumerate().take(self.findings.len()) {
            if let Some((b, e)) = *p {
                pin(&mut net, Endpoint::Begin(k), b);
                pin(&mut net, Endpoint::End(k), e);
            }
        }
        let mut bounds = net.propagate_from(origin).ok()?;
        bounds.pop();
        Some(bounds)
    }
}

/// Observables, patterns and the abstraction relation they induce.
#[derive(Debug, Clone)]
pub struct AbstractionModel {
    observables: Vec<Observable>,
    patterns: Vec<Arc<PatternGrammar>>,
    relation: Vec<(ObservableId, ObservableId)>,
    levels: Vec<usize>,
}

impl AbstractionModel {
    pub fn new(observables: Vec<Observable>, patterns: Vec<PatternGrammar>) -> Result<Self, ModelError> {
        let mut names = BTreeSet::new();
        for o in &observables {
            if !names.insert(o.name.as_str()) {
                return Err(ModelError::DuplicateObservable(o.name.clone()));
            }
        }
        let patterns: Vec<Arc<PatternGrammar>> = patterns.into_iter().map(Arc::new).collect();
        let relation = induced_relation(&patterns);
        let levels = abstraction_levels(&observables, &relation)?;
        Ok(AbstractionModel {
            observables,
            patterns,
            relation,
            levels,
        })
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn observable(&self, id: ObservableId) -> &Observable {
        &self.observables[id.0]
    }

    pub fn observable_id(&self, name: &str) -> Option<ObservableId> {
        self.observables.iter().position(|o| o.name == name).map(ObservableId)
    }

    pub fn patterns(&self) -> &[Arc<PatternGrammar>] {
        &self.patterns
    }

    /// Pairs `(q_i, q_j)` meaning "q_j abstracts q_i", sorted and distinct.
    pub fn abstraction_relation(&self) -> &[(ObservableId, ObservableId)] {
        &self.relation
    }

    /// 0 for observables that abstract nothing, else one more than the
    /// highest level they abstract.
    pub fn level(&self, q: ObservableId) -> usize {
        self.levels[q.0]
    }

    /// Whether observations of `q` need explaining (q is some pattern's finding).
    pub fn in_domain(&self, q: ObservableId) -> bool {
        self.relation.iter().any(|&(lo, _)| lo == q)
    }

    /// The largest number of distinct observables abstracting one observable.
    pub fn default_k(&self) -> usize {
        (0..self.observables.len())
            .map(|q| self.relation.iter().filter(|&&(lo, _)| lo.0 == q).count())
            .max()
            .unwrap_or(0)
            .max(1)
    }

    /// Builds a checked observation of `q`.
    pub fn observation(
        &self,
        q: ObservableId,
        values: Vec<f64>,
        begin: TimePoint,
        end: TimePoint,
    ) -> Result<Observation, ModelError> {
        let obs = self
            .observables
            .get(q.0)
            .ok_or(ModelError::UnknownObservable(q.0))?;
        let invalid = |reason: &str| ModelError::InvalidObservation {
            observable: obs.name.clone(),
            reason: reason.to_string(),
        };
        if values.len() != obs.attributes.len() {
            return Err(invalid("attribute count mismatch"));
        }
        if begin > end {
            return Err(invalid("begins after it ends"));
        }
        if obs.instantaneous && begin != end {
            return Err(invalid("instantaneous observable with non-zero duration"));
        }
        Ok(Observation {
            observable: q,
            values,
            begin,
            end,
        })
    }
}

fn induced_relation(patterns: &[Arc<PatternGrammar>]) -> Vec<(ObservableId, ObservableId)> {
    let mut rel = BTreeSet::new();
    for p in patterns {
        for q in p.finding_observables() {
            rel.insert((q, p.hypothesis()));
        }
    }
    rel.into_iter().collect()
}

/// Longest-path levels over the relation; fails on any cycle.
fn abstraction_levels(
    observables: &[Observable],
    relation: &[(ObservableId, ObservableId)],
) -> Result<Vec<usize>, ModelError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        q: usize,
        relation: &[(ObservableId, ObservableId)],
        marks: &mut [Mark],
        levels: &mut [usize],
        observables: &[Observable],
    ) -> Result<usize, ModelError> {
        match marks[q] {
            Mark::Done => return Ok(levels[q]),
            Mark::Active => return Err(ModelError::CyclicAbstraction(observables[q].name.clone())),
            Mark::New => {}
        }
        marks[q] = Mark::Active;
        let mut level = 0;
        for &(lo, hi) in relation {
            if hi.0 == q {
                level = level.max(1 + visit(lo.0, relation, marks, levels, observables)?);
            }
        }
        marks[q] = Mark::Done;
        levels[q] = level;
        Ok(level)
    }
    for &(a, b) in relation {
        for id in [a, b] {
            if id.0 >= observables.len() {
                return Err(ModelError::UnknownObservable(id.0));
            }
        }
    }
    let mut marks = vec![Mark::New; observables.len()];
    let mut levels = vec![0; observables.len()];
    for q in 0..observables.len() {
        visit(q, relation, &mut marks, &mut levels, observables)?;
    }
    Ok(levels)
}
