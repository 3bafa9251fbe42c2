//! Refinement distances over recursively specified trace metrics.
//!
//! A [`TraceMetric`] packages the one-step distance iterator `F` of a trace
//! distance over the extended nonnegative reals: the discrete metric
//! (`rest` if the labels are related, infinite otherwise), the point-wise
//! metric (`max(d, rest)`) and the discounting metric (`d + lambda * rest`).
//! All three are recursively separating on discrete, set and closed-interval
//! labels: a one-step distance of zero forces label refinement.
//!
//! Refinement distances replace the universal and existential quantifiers of
//! Boolean refinement by suprema and infima and take the least fixed point
//! of the resulting equations, computed by value iteration from the all-zero
//! table. The empty supremum is zero and the empty infimum is infinite.
//! Discrete and point-wise values live in a finite set, so iteration becomes
//! stationary and the result is exact; discounting stops once the remaining
//! geometric tail is below the requested tolerance.

use std::collections::BTreeSet;

use crate::labels::{self, Extended, Label, LabelStructure, SyncOp};
use crate::model::{Aa, Dmts, NuExpr, State, System, Tran};
use crate::refine::{self};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricKind {
    Discrete,
    Pointwise,
    Discounting { lambda: f64 },
}

/// A recursively specified trace distance over the extended nonnegative
/// reals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceMetric {
    pub kind: MetricKind,
}

impl TraceMetric {
    pub fn discrete() -> TraceMetric {
        TraceMetric { kind: MetricKind::Discrete }
    }

    pub fn pointwise() -> TraceMetric {
        TraceMetric { kind: MetricKind::Pointwise }
    }

    pub fn discounting(lambda: f64) -> Result<TraceMetric> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::invalid("lambda", format!("discount factor {lambda} must lie in [0,1)")));
        }
        Ok(TraceMetric { kind: MetricKind::Discounting { lambda } })
    }

    /// All implemented metrics are recursively separating: a zero one-step
    /// distance forces label refinement and a zero tail.
    pub fn recursively_separating(&self) -> bool {
        true
    }

    /// The quantale morphism into the extended reals; the identity for all
    /// implemented metrics.
    pub fn eval(&self, v: Extended) -> Extended {
        v
    }

    /// The distance iterator `F(a, b, rest)`.
    pub fn step(&self, a: &Label, b: &Label, rest: Extended, ls: &LabelStructure) -> Result<Extended> {
        Ok(match self.kind {
            MetricKind::Discrete => {
                if labels::refines(a, b, ls)? {
                    rest
                } else {
                    Extended::POS_INF
                }
            }
            MetricKind::Pointwise => labels::distance(a, b, ls)?.max(rest),
            MetricKind::Discounting { lambda } => {
                labels::distance(a, b, ls)?.saturating_add(scale(lambda, rest))
            }
        })
    }
}

fn scale(lambda: f64, v: Extended) -> Extended {
    if lambda == 0.0 {
        Extended::ZERO
    } else if v == Extended::POS_INF {
        Extended::POS_INF
    } else {
        Extended::new(lambda * v.value())
    }
}

/// The computed distance table between two state sets.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    pub left_states: Vec<String>,
    pub right_states: Vec<String>,
    pub entries: Vec<Vec<Extended>>,
    pub converged: bool,
    /// Bound on the distance between the reported entries and the least
    /// fixed point; zero for exact (stationary) results.
    pub error_bound: Extended,
}

impl DistanceTable {
    pub fn get(&self, s1: State, s2: State) -> Extended {
        self.entries[s1][s2]
    }

    /// The alpha-slice of the table: all pairs within distance `alpha`.
    /// These slices form a family of refinement relations indexed by the
    /// threshold; slicing at the reported top-level value contains the
    /// initial pairing.
    pub fn threshold_relation(&self, alpha: Extended) -> BTreeSet<(State, State)> {
        let mut out = BTreeSet::new();
        for (s1, row) in self.entries.iter().enumerate() {
            for (s2, v) in row.iter().enumerate() {
                if *v <= alpha {
                    out.insert((s1, s2));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pairs: Vec<serde_json::Value> = self
            .entries
            .iter()
            .enumerate()
            .flat_map(|(s1, row)| {
                row.iter().enumerate().map(move |(s2, v)| (s1, s2, *v))
            })
            .map(|(s1, s2, v)| {
                serde_json::json!({
                    "left": self.left_states[s1],
                    "right": self.right_states[s2],
                    "value": v,
                })
            })
            .collect();
        serde_json::json!({
            "pairs": pairs,
            "converged": self.converged,
            "error_bound": self.error_bound,
        })
    }
}

const MAX_ROUNDS: usize = 200_000;

/// Value iteration on a table whose per-pair update is `rhs`.
fn iterate_table(
    n1: usize,
    n2: usize,
    metric: &TraceMetric,
    tol: f64,
    rhs: impl Fn(State, State, &[Vec<Extended>]) -> Extended,
) -> Result<(Vec<Vec<Extended>>, Extended)> {
    let mut cur = vec![vec![Extended::ZERO; n2]; n1];
    for _ in 0..MAX_ROUNDS {
        let mut next = vec![vec![Extended::ZERO; n2]; n1];
        let mut delta = 0.0f64;
        let mut infinity_changed = false;
        for s1 in 0..n1 {
            for s2 in 0..n2 {
                let v = rhs(s1, s2, &cur);
                next[s1][s2] = v;
                let old = cur[s1][s2];
                match (old.is_finite(), v.is_finite()) {
                    (true, true) => delta = delta.max((v.value() - old.value()).abs()),
                    (true, false) | (false, true) => infinity_changed = true,
                    (false, false) => {}
                }
            }
        }
        let done = match metric.kind {
            // Finitely many values: iterate to exact stationarity.
            MetricKind::Discrete | MetricKind::Pointwise => next == cur,
            MetricKind::Discounting { lambda } => {
                let tail = if lambda == 0.0 { 0.0 } else { delta * lambda / (1.0 - lambda) };
                !infinity_changed && tail <= tol
            }
        };
        if done {
            let bound = match metric.kind {
                MetricKind::Discrete | MetricKind::Pointwise => Extended::ZERO,
                MetricKind::Discounting { lambda } => {
                    Extended::new(if lambda == 0.0 { 0.0 } else { delta * lambda / (1.0 - lambda) })
                }
            };
            return Ok((next, bound));
        }
        cur = next;
    }
    Err(Error::Budget("distance iteration did not converge".into()))
}

fn sup(values: impl Iterator<Item = Extended>) -> Extended {
    values.fold(Extended::ZERO, Extended::max)
}

fn inf(values: impl Iterator<Item = Extended>) -> Extended {
    values.fold(Extended::POS_INF, Extended::min)
}

/// Distance matrix and refinement matrix between two label universes.
struct StepTable {
    left: Vec<Label>,
    right: Vec<Label>,
    // step[i][j] as a function of `rest` is determined by these two.
    dist: Vec<Vec<Extended>>,
    leq: Vec<Vec<bool>>,
    metric: TraceMetric,
}

impl StepTable {
    fn new(left: BTreeSet<Label>, right: BTreeSet<Label>, metric: &TraceMetric, ls: &LabelStructure) -> Result<StepTable> {
        let left: Vec<Label> = left.into_iter().collect();
        let right: Vec<Label> = right.into_iter().collect();
        let mut dist = vec![vec![Extended::ZERO; right.len()]; left.len()];
        let mut leq = vec![vec![false; right.len()]; left.len()];
        for (i, a) in left.iter().enumerate() {
            for (j, b) in right.iter().enumerate() {
                dist[i][j] = labels::distance(a, b, ls)?;
                leq[i][j] = labels::refines(a, b, ls)?;
            }
        }
        Ok(StepTable { left, right, dist, leq, metric: *metric })
    }

    fn left_index(&self, l: &Label) -> usize {
        self.left.binary_search(l).unwrap()
    }

    fn right_index(&self, l: &Label) -> usize {
        self.right.binary_search(l).unwrap()
    }

    fn step(&self, a1: usize, a2: usize, rest: Extended) -> Extended {
        match self.metric.kind {
            MetricKind::Discrete => {
                if self.leq[a1][a2] {
                    rest
                } else {
                    Extended::POS_INF
                }
            }
            MetricKind::Pointwise => self.dist[a1][a2].max(rest),
            MetricKind::Discounting { lambda } => self.dist[a1][a2].saturating_add(scale(lambda, rest)),
        }
    }
}

fn initial_aggregate(table: &[Vec<Extended>], init1: &BTreeSet<State>, init2: &BTreeSet<State>) -> Extended {
    sup(init1.iter().map(|s1| inf(init2.iter().map(|s2| table[*s1][*s2]))))
}

/// Lifted refinement distance between two DMTS.
pub fn distance_dmts(
    d1: &Dmts,
    d2: &Dmts,
    metric: &TraceMetric,
    ls: &LabelStructure,
    tol: f64,
) -> Result<(Extended, DistanceTable)> {
    let labels1: BTreeSet<Label> = d1
        .may
        .iter()
        .map(|(_, a, _)| a.clone())
        .chain(d1.must.iter().flat_map(|(_, n)| n.iter().map(|(a, _)| a.clone())))
        .collect();
    let labels2: BTreeSet<Label> = d2
        .may
        .iter()
        .map(|(_, a, _)| a.clone())
        .chain(d2.must.iter().flat_map(|(_, n)| n.iter().map(|(a, _)| a.clone())))
        .collect();
    let steps = StepTable::new(labels1, labels2, metric, ls)?;
    let n1 = d1.states.len();
    let n2 = d2.states.len();
    let may1 = per_state_moves(n1, d1.may.iter(), |l| steps.left_index(l));
    let may2 = per_state_moves(n2, d2.may.iter(), |l| steps.right_index(l));
    let musts1 = per_state_sets(n1, d1.must.iter(), |l| steps.left_index(l));
    let musts2 = per_state_sets(n2, d2.must.iter(), |l| steps.right_index(l));

    let (entries, error_bound) = iterate_table(n1, n2, metric, tol, |s1, s2, cur| {
        let may_part = sup(may1[s1].iter().map(|&(a1, t1)| {
            inf(may2[s2].iter().map(|&(a2, t2)| steps.step(a1, a2, cur[t1][t2])))
        }));
        let must_part = sup(musts2[s2].iter().map(|m2| {
            inf(musts1[s1].iter().map(|m1| {
                sup(m1.iter().map(|&(a1, t1)| {
                    inf(m2.iter().map(|&(a2, t2)| steps.step(a1, a2, cur[t1][t2])))
                }))
            }))
        }));
        may_part.max(must_part)
    })?;
    let value = initial_aggregate(&entries, &d1.initial, &d2.initial);
    Ok((
        value,
        DistanceTable {
            left_states: d1.states.clone(),
            right_states: d2.states.clone(),
            entries,
            converged: true,
            error_bound,
        },
    ))
}

/// Lifted refinement distance between two acceptance automata.
pub fn distance_aa(
    a1: &Aa,
    a2: &Aa,
    metric: &TraceMetric,
    ls: &LabelStructure,
    tol: f64,
) -> Result<(Extended, DistanceTable)> {
    let collect = |a: &Aa| -> BTreeSet<Label> {
        a.tran.iter().filter_map(Tran::sets).flatten().flatten().map(|(l, _)| l.clone()).collect()
    };
    let steps = StepTable::new(collect(a1), collect(a2), metric, ls)?;
    let n1 = a1.states.len();
    let n2 = a2.states.len();
    let tran1 = indexed_tran(a1, |l| steps.left_index(l));
    let tran2 = indexed_tran(a2, |l| steps.right_index(l));

    let (entries, error_bound) = iterate_table(n1, n2, metric, tol, |s1, s2, cur| {
        match (&tran1[s1], &tran2[s2]) {
            (_, None) => Extended::ZERO,
            (None, Some(_)) => Extended::POS_INF,
            (Some(m1s), Some(m2s)) => sup(m1s.iter().map(|m1| {
                inf(m2s.iter().map(|m2| {
                    let fwd = sup(m1.iter().map(|&(a1, t1)| {
                        inf(m2.iter().map(|&(a2, t2)| steps.step(a1, a2, cur[t1][t2])))
                    }));
                    let bwd = sup(m2.iter().map(|&(a2, t2)| {
                        inf(m1.iter().map(|&(a1, t1)| steps.step(a1, a2, cur[t1][t2])))
                    }));
                    fwd.max(bwd)
                }))
            })),
        }
    })?;
    let value = initial_aggregate(&entries, &a1.initial, &a2.initial);
    Ok((
        value,
        DistanceTable {
            left_states: a1.states.clone(),
            right_states: a2.states.clone(),
            entries,
            converged: true,
            error_bound,
        },
    ))
}

/// Lifted refinement distance between two normal-form expressions.
pub fn distance_nu(
    n1: &NuExpr,
    n2: &NuExpr,
    metric: &TraceMetric,
    ls: &LabelStructure,
    tol: f64,
) -> Result<(Extended, DistanceTable)> {
    let collect = |n: &NuExpr| -> BTreeSet<Label> {
        n.boxes
            .iter()
            .flatten()
            .map(|(l, _)| l.clone())
            .chain(n.diamond.iter().flatten().flatten().map(|(l, _)| l.clone()))
            .collect()
    };
    let steps = StepTable::new(collect(n1), collect(n2), metric, ls)?;
    let v1 = n1.vars.len();
    let v2 = n2.vars.len();
    let boxes1: Vec<Vec<(usize, State)>> =
        n1.boxes.iter().map(|es| es.iter().map(|(l, y)| (steps.left_index(l), *y)).collect()).collect();
    let boxes2: Vec<Vec<(usize, State)>> =
        n2.boxes.iter().map(|es| es.iter().map(|(l, y)| (steps.right_index(l), *y)).collect()).collect();
    let dia1: Vec<Vec<Vec<(usize, State)>>> = n1
        .diamond
        .iter()
        .map(|sets| sets.iter().map(|n| n.iter().map(|(l, y)| (steps.left_index(l), *y)).collect()).collect())
        .collect();
    let dia2: Vec<Vec<Vec<(usize, State)>>> = n2
        .diamond
        .iter()
        .map(|sets| sets.iter().map(|n| n.iter().map(|(l, y)| (steps.right_index(l), *y)).collect()).collect())
        .collect();

    let (entries, error_bound) = iterate_table(v1, v2, metric, tol, |x1, x2, cur| {
        let box_part = sup(boxes1[x1].iter().map(|&(a1, y1)| {
            inf(boxes2[x2].iter().map(|&(a2, y2)| steps.step(a1, a2, cur[y1][y2])))
        }));
        let dia_part = sup(dia2[x2].iter().map(|m2| {
            inf(dia1[x1].iter().map(|m1| {
                sup(m1.iter().map(|&(a1, y1)| {
                    inf(m2.iter().map(|&(a2, y2)| steps.step(a1, a2, cur[y1][y2])))
                }))
            }))
        }));
        box_part.max(dia_part)
    })?;
    let value = initial_aggregate(&entries, &n1.initial, &n2.initial);
    Ok((
        value,
        DistanceTable {
            left_states: n1.vars.clone(),
            right_states: n2.vars.clone(),
            entries,
            converged: true,
            error_bound,
        },
    ))
}

fn per_state_moves<'a>(
    n: usize,
    edges: impl Iterator<Item = &'a (State, Label, State)>,
    idx: impl Fn(&Label) -> usize,
) -> Vec<Vec<(usize, State)>> {
    let mut out = vec![Vec::new(); n];
    for (s, a, t) in edges {
        out[*s].push((idx(a), *t));
    }
    out
}

fn per_state_sets<'a>(
    n: usize,
    musts: impl Iterator<Item = &'a (State, BTreeSet<(Label, State)>)>,
    idx: impl Fn(&Label) -> usize,
) -> Vec<Vec<Vec<(usize, State)>>> {
    let mut out = vec![Vec::new(); n];
    for (s, set) in musts {
        out[*s].push(set.iter().map(|(a, t)| (idx(a), *t)).collect());
    }
    out
}

fn indexed_tran(a: &Aa, idx: impl Fn(&Label) -> usize) -> Vec<Option<Vec<Vec<(usize, State)>>>> {
    a.tran
        .iter()
        .map(|t| match t {
            Tran::Universal => None,
            Tran::Sets(sets) => {
                Some(sets.iter().map(|m| m.iter().map(|(l, t)| (idx(l), *t)).collect()).collect())
            }
        })
        .collect()
}

/// Refinement distance between two systems of the same formalism. Plain
/// transition systems are embedded as DMTS first.
pub fn refinement_distance(
    s1: &System,
    s2: &System,
    metric: &TraceMetric,
    ls: &LabelStructure,
    tol: f64,
) -> Result<(Extended, DistanceTable)> {
    match (s1, s2) {
        (System::Lts(i1), System::Lts(i2)) => {
            distance_dmts(&crate::model::lts_to_dmts(i1), &crate::model::lts_to_dmts(i2), metric, ls, tol)
        }
        (System::Dmts(d1), System::Dmts(d2)) => distance_dmts(d1, d2, metric, ls, tol),
        (System::Aa(a1), System::Aa(a2)) => distance_aa(a1, a2, metric, ls, tol),
        (System::Nu(n1), System::Nu(n2)) => distance_nu(n1, n2, metric, ls, tol),
        _ => Err(Error::StructureMismatch(format!(
            "distance needs systems of one formalism, got {} and {}",
            s1.formalism(),
            s2.formalism()
        ))),
    }
}

/// Verdict of a relaxed membership query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Membership {
    pub holds: bool,
    /// The computed distance lies within the tolerance of the threshold,
    /// so the verdict is only as trustworthy as the iteration bound.
    pub near_threshold: bool,
}

/// Is the implementation within distance `alpha` of the specification?
pub fn implements_within(
    i: &crate::model::Lts,
    s: &System,
    alpha: Extended,
    metric: &TraceMetric,
    ls: &LabelStructure,
    tol: f64,
) -> Result<Membership> {
    if alpha < Extended::ZERO {
        return Err(Error::invalid("alpha", "relaxation must be nonnegative"));
    }
    let embedded = crate::model::embed_lts(i, s.formalism());
    let (value, _) = refinement_distance(&embedded, s, metric, ls, tol)?;
    let near = value.is_finite()
        && alpha.is_finite()
        && (value.value() - alpha.value()).abs() <= tol;
    Ok(Membership { holds: value <= alpha, near_threshold: near })
}

/// Bounded thorough refinement distance: sup over enumerated implementations
/// of the left of the inf over enumerated implementations of the right.
pub fn thorough_distance_bounded(
    d1: &Dmts,
    d2: &Dmts,
    metric: &TraceMetric,
    ls: &LabelStructure,
    alphabet: &[Label],
    max_states: usize,
    budget: u64,
    tol: f64,
) -> Result<(Extended, bool)> {
    let left = refine::implementations(d1, ls, alphabet, max_states, budget)?;
    let right = refine::implementations(d2, ls, alphabet, max_states, budget)?;
    let right_dmts: Vec<Dmts> = right.systems.iter().map(crate::model::lts_to_dmts).collect();
    let mut value = Extended::ZERO;
    for i1 in &left.systems {
        let e1 = crate::model::lts_to_dmts(i1);
        let mut best = Extended::POS_INF;
        for e2 in &right_dmts {
            let (v, _) = distance_dmts(&e1, e2, metric, ls, tol)?;
            best = best.min(v);
            if best == Extended::ZERO {
                break;
            }
        }
        value = value.max(best);
    }
    Ok((value, left.truncated || right.truncated))
}

/// A uniform bound on the distance between synchronized labels, lifted to
/// distances between composed systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompositionBound {
    Add,
    Max,
}

impl CompositionBound {
    pub fn apply(&self, a: Extended, b: Extended) -> Extended {
        match self {
            CompositionBound::Add => a.saturating_add(b),
            CompositionBound::Max => a.max(b),
        }
    }
}

/// The composition bound for a metric/synchronization pair. Supported:
/// discounting and point-wise under interval addition (the bound is the
/// quantale addition) and the discrete metric under CSP synchronization
/// (the bound is the maximum). Other combinations are rejected rather than
/// guessed.
pub fn composition_bound(metric: &TraceMetric, sync: SyncOp) -> Result<CompositionBound> {
    match (metric.kind, sync) {
        (MetricKind::Discounting { .. }, SyncOp::Plus) | (MetricKind::Pointwise, SyncOp::Plus) => {
            Ok(CompositionBound::Add)
        }
        (MetricKind::Discrete, SyncOp::Csp) => Ok(CompositionBound::Max),
        (kind, sync) => Err(Error::Capability(format!(
            "no composition bound is established for {kind:?} under {sync} synchronization"
        ))),
    }
}
