//! Simple Temporal Problems.
//!
//! A network stores at most one interval per unordered variable pair. The
//! interval for `(i, j)` bounds `T_j - T_i`; querying `(j, i)` returns the
//! reversed interval. Consistency is decided on the distance graph: an edge
//! `i -> j` of weight `upper` and an edge `j -> i` of weight `-lower` per
//! constraint, with the network consistent iff that graph has no negative
//! cycle.
//!
//! Two solvers share the graph. The all-pairs distance matrix is computed by
//! Floyd-Warshall on the first dense query and then kept current by an
//! O(n^2) update on every later tightening. [`StpNetwork::propagate_from`]
//! runs Bellman-Ford from a single variable and never builds the matrix,
//! which is what the search uses on its larger, sparse pattern networks.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::interval::{sat_add, Interval, TimePoint, INF};

pub type VarId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StpError {
    #[error("unknown temporal variable {0}")]
    UnknownVariable(VarId),
    #[error("the temporal network is inconsistent")]
    Inconsistent,
    #[error("no value assigned to temporal variable {0}")]
    MissingAssignment(VarId),
}

#[derive(Debug, Clone)]
struct DistanceMatrix {
    n: usize,
    d: Vec<i64>,
}

impl DistanceMatrix {
    fn at(&self, i: usize, j: usize) -> i64 {
        self.d[i * self.n + j]
    }

    fn floyd_warshall(n: usize, edges: impl Iterator<Item = (usize, usize, i64)>) -> Self {
        let mut d = vec![INF; n * n];
        for i in 0..n {
            d[i * n + i] = 0;
        }
        for (i, j, w) in edges {
            let slot = &mut d[i * n + j];
            *slot = (*slot).min(w);
        }
        for k in 0..n {
            for i in 0..n {
                let dik = d[i * n + k];
                if dik >= INF {
                    continue;
                }
                for j in 0..n {
                    let via = sat_add(dik, d[k * n + j]);
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                    }
                }
            }
        }
        DistanceMatrix { n, d }
    }

    /// Relaxes every pair through a new edge `i -> j` of weight `w`.
    fn tighten(&mut self, i: usize, j: usize, w: i64) {
        if w >= self.at(i, j) {
            return;
        }
        let n = self.n;
        let to_i: Vec<i64> = (0..n).map(|a| self.at(a, i)).collect();
        let from_j: Vec<i64> = (0..n).map(|b| self.at(j, b)).collect();
        for a in 0..n {
            if to_i[a] >= INF {
                continue;
            }
            let head = sat_add(to_i[a], w);
            for b in 0..n {
                let via = sat_add(head, from_j[b]);
                if via < self.d[a * n + b] {
                    self.d[a * n + b] = via;
                }
            }
        }
    }

    fn add_variable(&mut self) {
        let n = self.n + 1;
        let mut d = vec![INF; n * n];
        for i in 0..self.n {
            d[i * n..i * n + self.n].copy_from_slice(&self.d[i * self.n..(i + 1) * self.n]);
        }
        d[n * n - 1] = 0;
        self.n = n;
        self.d = d;
    }

    fn has_negative_cycle(&self) -> bool {
        (0..self.n).any(|i| self.at(i, i) < 0)
    }
}

/// A Simple Temporal Problem over variables `0..n`.
#[derive(Debug, Clone, Default)]
pub struct StpNetwork {
    n: usize,
    constraints: BTreeMap<(VarId, VarId), Interval>,
    infeasible: bool,
    apsp: OnceLock<DistanceMatrix>,
}

impl StpNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_variables(n: usize) -> Self {
        StpNetwork {
            n,
            ..Self::default()
        }
    }

    pub fn add_variable(&mut self) -> VarId {
        let id = self.n;
        self.n += 1;
        if let Some(m) = self.apsp.get_mut() {
            m.add_variable();
        }
        id
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    fn check_var(&self, v: VarId) -> Result<(), StpError> {
        if v < self.n {
            Ok(())
        } else {
            Err(StpError::UnknownVariable(v))
        }
    }

    /// Intersects `L(i, j)` with `c`. An empty intersection leaves the
    /// network flagged infeasible rather than failing.
    pub fn set_constraint(&mut self, i: VarId, j: VarId, c: Interval) -> Result<(), StpError> {
        self.check_var(i)?;
        self.check_var(j)?;
        if i == j {
            if !c.contains(0) {
                self.infeasible = true;
            }
            return Ok(());
        }
        let (key, c) = if i < j { ((i, j), c) } else { ((j, i), c.reverse()) };
        let merged = match self.constraints.get(&key) {
            Some(old) => old.intersect(&c),
            None => Some(c),
        };
        match merged {
            Some(m) => {
                self.constraints.insert(key, m);
                if let Some(apsp) = self.apsp.get_mut() {
                    let (a, b) = key;
                    if m.upper_bounded() {
                        apsp.tighten(a, b, m.upper());
                    }
                    if m.lower_bounded() {
                        apsp.tighten(b, a, -m.lower());
                    }
                    if apsp.has_negative_cycle() {
                        self.infeasible = true;
                    }
                }
            }
            None => self.infeasible = true,
        }
        Ok(())
    }

    /// The stored interval for `T_j - T_i`, unbounded when nothing is stored.
    pub fn constraint(&self, i: VarId, j: VarId) -> Interval {
        if i == j {
            return Interval::ZERO;
        }
        if i < j {
            self.constraints.get(&(i, j)).copied().unwrap_or_default()
        } else {
            self.constraints
                .get(&(j, i))
                .map(Interval::reverse)
                .unwrap_or_default()
        }
    }

    /// Stored constraints as `(i, j, L(i, j))` with `i < j`.
    pub fn constraints(&self) -> impl Iterator<Item = (VarId, VarId, Interval)> + '_ {
        self.constraints.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    /// True once some tightening produced an empty interval or a detected
    /// negative cycle. A network that is not flagged may still be
    /// inconsistent until a consistency query runs.
    pub fn is_infeasible(&self) -> bool {
        self.infeasible
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        self.constraints.iter().flat_map(|(&(i, j), c)| {
            let fwd = c.upper_bounded().then_some((i, j, c.upper()));
            let back = c.lower_bounded().then_some((j, i, -c.lower()));
            fwd.into_iter().chain(back)
        })
    }

    fn matrix(&self) -> &DistanceMatrix {
        self.apsp
            .get_or_init(|| DistanceMatrix::floyd_warshall(self.n, self.edges()))
    }

    pub fn is_consistent(&self) -> bool {
        !self.infeasible && !self.matrix().has_negative_cycle()
    }

    /// The tightest interval for `T_j - T_i` implied by the whole network.
    pub fn minimal_interval(&self, i: VarId, j: VarId) -> Result<Interval, StpError> {
        self.check_var(i)?;
        self.check_var(j)?;
        if !self.is_consistent() {
            return Err(StpError::Inconsistent);
        }
        let m = self.matrix();
        Interval::new(-m.at(j, i), m.at(i, j)).map_err(|_| StpError::Inconsistent)
    }

    /// Whether `assignment` (indexed by variable) satisfies every stored
    /// constraint. Variables not mentioned by any constraint may be `None`.
    pub fn check_solution(&self, assignment: &[Option<TimePoint>]) -> Result<bool, StpError> {
        if self.infeasible {
            return Ok(false);
        }
        let value = |v: VarId| {
            assignment
                .get(v)
                .copied()
                .flatten()
                .ok_or(StpError::MissingAssignment(v))
        };
        for (&(i, j), c) in &self.constraints {
            let d = value(j)? - value(i)?;
            if !c.contains(d) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Single-source bounds: for every variable `x`, the tightest interval
    /// for `T_x - T_source`. Runs Bellman-Ford forwards and backwards over
    /// the sparse edge list and also rejects negative cycles unreachable from
    /// the source.
    pub fn propagate_from(&self, source: VarId) -> Result<Vec<Interval>, StpError> {
        self.check_var(source)?;
        if self.infeasible {
            return Err(StpError::Inconsistent);
        }
        let edges: Vec<(usize, usize, i64)> = self.edges().collect();
        if !bellman_ford(self.n, &edges, None).1 {
            return Err(StpError::Inconsistent);
        }
        let (upper, _) = bellman_ford(self.n, &edges, Some(source));
        let reversed: Vec<(usize, usize, i64)> = edges.iter().map(|&(i, j, w)| (j, i, w)).collect();
        let (to_source, _) = bellman_ford(self.n, &reversed, Some(source));
        upper
            .into_iter()
            .zip(to_source)
            .map(|(hi, back)| {
                Interval::new(if back >= INF { -INF } else { -back }, hi)
                    .map_err(|_| StpError::Inconsistent)
            })
            .collect()
    }
}

/// Returns distances and `false` if a negative cycle was found. With no
/// source every vertex starts at 0, which is a virtual source joined to all.
fn bellman_ford(n: usize, edges: &[(usize, usize, i64)], source: Option<usize>) -> (Vec<i64>, bool) {
    let mut dist = match source {
        Some(s) => {
            let mut d = vec![INF; n];
            d[s] = 0;
            d
        }
        None => vec![0; n],
    };
    for round in 0..=n {
        let mut changed = false;
        for &(i, j, w) in edges {
            if dist[i] >= INF {
                continue;
            }
            let via = sat_add(dist[i], w);
            if via < dist[j] {
                dist[j] = via;
                changed = true;
            }
        }
        if !changed {
            return (dist, true);
        }
        if round == n {
            return (dist, false);
        }
    }
    (dist, true)
}
