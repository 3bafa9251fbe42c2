//! Compositional operators: disjunction, conjunction, structural
//! composition, quotient, consistency pruning and the lattice bounds.
//!
//! Disjunction and conjunction work on DMTS, composition and quotient on
//! acceptance automata. The quotient is a power-set construction over
//! dividend/divisor state pairs: a quotient state `{s3.1/s1.1, ...}`
//! guarantees that composing it with each `s1.i` conforms to `s3.i`. Since
//! label sets are infinite for weighted structures, the quotient draws its
//! edge labels from a finite candidate set built out of label residuals,
//! never-synchronizing pieces and per-action top labels, closed under
//! conjunction; candidates with identical synchronization behavior against
//! the divisor collapse to their maximal representatives.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::labels::{self, Label, LabelStructure};
use crate::model::{Aa, Dmts, EdgeSet, State, Tran};
use crate::{Error, Result};

/// Disjoint union: either operand's behavior is acceptable.
pub fn disjoin(d1: &Dmts, d2: &Dmts) -> Dmts {
    let mut states = d1.states.clone();
    let offset = states.len();
    for name in &d2.states {
        states.push(fresh_name(&states, name));
    }
    let mut may = d1.may.clone();
    let mut must = d1.must.clone();
    for (s, a, t) in &d2.may {
        may.insert((s + offset, a.clone(), t + offset));
    }
    for (s, n) in &d2.must {
        must.insert((s + offset, n.iter().map(|(a, t)| (a.clone(), t + offset)).collect()));
    }
    let initial = d1
        .initial
        .iter()
        .copied()
        .chain(d2.initial.iter().map(|s| s + offset))
        .collect();
    Dmts { states, initial, may, must }
}

/// Worklist discovery of product states.
struct Explorer {
    index: BTreeMap<(State, State), State>,
    names: Vec<String>,
    queue: VecDeque<(State, State)>,
}

impl Explorer {
    fn new() -> Explorer {
        Explorer { index: BTreeMap::new(), names: Vec::new(), queue: VecDeque::new() }
    }

    fn discover(&mut self, p: (State, State), name: impl Fn((State, State)) -> String) -> State {
        if let Some(&i) = self.index.get(&p) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name(p));
        self.index.insert(p, i);
        self.queue.push_back(p);
        i
    }
}

fn fresh_name(taken: &[String], base: &str) -> String {
    if !taken.iter().any(|n| n == base) {
        return base.to_string();
    }
    let mut k = 2;
    loop {
        let cand = format!("{base}~{k}");
        if !taken.iter().any(|n| n == &cand) {
            return cand;
        }
        k += 1;
    }
}

/// Conjunction: the product construction over defined label conjunctions,
/// restricted to states reachable from the initial products.
pub fn conjoin(d1: &Dmts, d2: &Dmts, ls: &LabelStructure) -> Result<Dmts> {
    let memo = LabelOps::new(ls);
    let mut exp = Explorer::new();
    let mut initial = BTreeSet::new();
    for s1 in &d1.initial {
        for s2 in &d2.initial {
            initial.insert(exp.discover((*s1, *s2), |(a, b)| format!("({}&{})", d1.states[a], d2.states[b])));
        }
    }
    let mut may = BTreeSet::new();
    let mut must = BTreeSet::new();
    while let Some((s1, s2)) = exp.queue.pop_front() {
        let here = exp.index[&(s1, s2)];
        let may1: Vec<(&Label, State)> = d1.may_from(s1).collect();
        let may2: Vec<(&Label, State)> = d2.may_from(s2).collect();
        for (a1, t1) in &may1 {
            for (a2, t2) in &may2 {
                if let Some(c) = memo.conj(a1, a2)? {
                    let target =
                        exp.discover((*t1, *t2), |(a, b)| format!("({}&{})", d1.states[a], d2.states[b]));
                    may.insert((here, c, target));
                }
            }
        }
        for n1 in d1.musts_of(s1) {
            let mut set = EdgeSet::new();
            for (a1, t1) in n1 {
                for (a2, t2) in &may2 {
                    if let Some(c) = memo.conj(a1, a2)? {
                        let target =
                            exp.discover((*t1, *t2), |(a, b)| format!("({}&{})", d1.states[a], d2.states[b]));
                        set.insert((c, target));
                    }
                }
            }
            must.insert((here, set));
        }
        for n2 in d2.musts_of(s2) {
            let mut set = EdgeSet::new();
            for (a2, t2) in n2 {
                for (a1, t1) in &may1 {
                    if let Some(c) = memo.conj(a1, a2)? {
                        let target =
                            exp.discover((*t1, *t2), |(a, b)| format!("({}&{})", d1.states[a], d2.states[b]));
                        set.insert((c, target));
                    }
                }
            }
            must.insert((here, set));
        }
    }
    Ok(Dmts { states: exp.names, initial, may, must })
}

/// Default bound on product or quotient state spaces.
pub const STATE_BUDGET: usize = 10_000;

/// Structural composition of acceptance automata under the structure's
/// synchronization operator, restricted to reachable product states.
pub fn compose(a1: &Aa, a2: &Aa, ls: &LabelStructure) -> Result<Aa> {
    compose_with(a1, a2, ls, STATE_BUDGET)
}

pub fn compose_with(a1: &Aa, a2: &Aa, ls: &LabelStructure, state_budget: usize) -> Result<Aa> {
    let memo = LabelOps::new(ls);
    let mut index: BTreeMap<(State, State), State> = BTreeMap::new();
    let mut states: Vec<String> = Vec::new();
    let mut queue: VecDeque<(State, State)> = VecDeque::new();
    let mut initial = BTreeSet::new();
    for s1 in &a1.initial {
        for s2 in &a2.initial {
            let i = states.len();
            index.insert((*s1, *s2), i);
            states.push(format!("({}|{})", a1.states[*s1], a2.states[*s2]));
            queue.push_back((*s1, *s2));
            initial.insert(i);
        }
    }
    let mut tran: Vec<Option<Tran>> = Vec::new();
    while let Some((s1, s2)) = queue.pop_front() {
        let here = index[&(s1, s2)];
        let (m1s, m2s) = match (&a1.tran[s1], &a2.tran[s2]) {
            (Tran::Sets(x), Tran::Sets(y)) => (x, y),
            _ => {
                return Err(Error::Capability(
                    "composition with a universal transition constraint is not supported".into(),
                ))
            }
        };
        let mut members = BTreeSet::new();
        for m1 in m1s {
            for m2 in m2s {
                let mut composed = EdgeSet::new();
                for (x1, t1) in m1 {
                    for (x2, t2) in m2 {
                        if let Some(c) = memo.sync(x1, x2)? {
                            let target = *index.entry((*t1, *t2)).or_insert_with(|| {
                                let i = states.len();
                                states.push(format!("({}|{})", a1.states[*t1], a2.states[*t2]));
                                queue.push_back((*t1, *t2));
                                i
                            });
                            composed.insert((c, target));
                        }
                    }
                }
                members.insert(composed);
            }
        }
        if states.len() > state_budget {
            return Err(Error::Budget(format!("composition exceeds {state_budget} states")));
        }
        if tran.len() <= here {
            tran.resize(states.len().max(here + 1), None);
        }
        tran[here] = Some(Tran::Sets(members));
    }
    tran.resize(states.len(), None);
    let tran = tran
        .into_iter()
        .map(|t| t.unwrap_or(Tran::Sets(BTreeSet::new())))
        .collect();
    Ok(Aa { states, initial, tran })
}

/// The bottom (unsatisfiable) and top (universal) specifications.
pub fn lattice_bounds(_ls: &LabelStructure) -> (Aa, Aa) {
    let bottom = Aa { states: vec![], initial: BTreeSet::new(), tran: vec![] };
    let top = Aa {
        states: vec!["top".into()],
        initial: BTreeSet::from([0]),
        tran: vec![Tran::Universal],
    };
    (bottom, top)
}

/// Knobs for the quotient construction.
#[derive(Clone, Debug)]
pub struct QuotientOptions {
    /// Rewrite the divisor so that the members of each transition constraint
    /// are pairwise disjoint, by tagging member targets. The rewritten
    /// states are refinement-equivalent to the originals; disjointness is
    /// what makes the quotient adjunction exact.
    pub split_divisor: bool,
    /// Bound on the number of candidate edges per quotient state; admissible
    /// edge sets are enumerated as subsets of them.
    pub max_support: usize,
    pub max_states: usize,
    pub max_candidates: usize,
}

impl Default for QuotientOptions {
    fn default() -> Self {
        QuotientOptions { split_divisor: true, max_support: 16, max_states: STATE_BUDGET, max_candidates: 256 }
    }
}

/// The quotient automaton plus, per state, the dividend/divisor pairs it
/// tracks (with the divisor's original state names).
#[derive(Clone, Debug)]
pub struct QuotientOutput {
    pub aa: Aa,
    pub pairs: Vec<BTreeSet<(String, String)>>,
}

impl QuotientOutput {
    /// States whose pair set contains the given dividend/divisor pair.
    pub fn states_tracking(&self, dividend: &str, divisor: &str) -> Vec<State> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, ps)| ps.iter().any(|(d3, d1)| d3 == dividend && d1 == divisor))
            .map(|(s, _)| s)
            .collect()
    }
}

/// The quotient `dividend / divisor`: the most permissive specification
/// whose composition with the divisor refines the dividend.
pub fn quotient(dividend: &Aa, divisor: &Aa, ls: &LabelStructure) -> Result<QuotientOutput> {
    quotient_with(dividend, divisor, ls, &QuotientOptions::default())
}

pub fn quotient_with(
    dividend: &Aa,
    divisor: &Aa,
    ls: &LabelStructure,
    opts: &QuotientOptions,
) -> Result<QuotientOutput> {
    if divisor.tran.iter().any(Tran::is_universal) {
        return Err(Error::Capability("quotient by a divisor with universal constraints is not supported".into()));
    }
    let (divisor, divisor_origin) = if opts.split_divisor {
        split_divisor(divisor)
    } else {
        (divisor.clone(), divisor.states.clone())
    };
    let memo = LabelOps::new(ls);

    // A quotient state is a set of (dividend, divisor) state pairs;
    // dividend states with universal constraints are unconstrained and
    // dropped from the set.
    let norm = |pairs: BTreeSet<(State, State)>| -> BTreeSet<(State, State)> {
        pairs.into_iter().filter(|(s3, _)| !dividend.tran[*s3].is_universal()).collect()
    };

    let s0 = norm(
        dividend
            .initial
            .iter()
            .flat_map(|s3| divisor.initial.iter().map(move |s1| (*s3, *s1)))
            .collect(),
    );

    let mut index: BTreeMap<BTreeSet<(State, State)>, State> = BTreeMap::new();
    let mut states: Vec<String> = Vec::new();
    let mut state_pairs: Vec<BTreeSet<(State, State)>> = Vec::new();
    let mut queue: VecDeque<BTreeSet<(State, State)>> = VecDeque::new();
    index.insert(s0.clone(), 0);
    states.push(quotient_state_name(&s0, dividend, &divisor));
    state_pairs.push(s0.clone());
    queue.push_back(s0);

    let mut tran: Vec<Option<Tran>> = Vec::new();
    while let Some(q) = queue.pop_front() {
        let here = index[&q];
        let pairs: Vec<(State, State)> = q.iter().copied().collect();

        // All divisor and dividend moves of the constituent pairs. Move
        // lists keep the pair index for the consistency conditions.
        let mut divisor_moves: Vec<(usize, Label, State)> = Vec::new();
        let mut dividend_moves: Vec<Vec<(Label, State)>> = Vec::new();
        for (i, (s3, s1)) in pairs.iter().enumerate() {
            for (a1, t1) in divisor.moves_of(*s1) {
                divisor_moves.push((i, a1, t1));
            }
            dividend_moves.push(dividend.moves_of(*s3).into_iter().collect());
        }

        let candidates = candidate_labels(&divisor_moves, &dividend_moves, &memo, ls, opts)?;

        // Permissible labels: no synchronization with a divisor move may
        // escape every dividend bound.
        let mut permissible: Vec<Label> = Vec::new();
        'cand: for a2 in candidates {
            for (i, a1, _) in &divisor_moves {
                if let Some(c) = memo.sync(a1, &a2)? {
                    let ok = dividend_moves[*i].iter().any(|(a3, _)| memo.leq(&c, a3).unwrap_or(false));
                    if !ok {
                        continue 'cand;
                    }
                }
            }
            permissible.push(a2);
        }
        let permissible = collapse_by_behavior(permissible, &divisor_moves, &memo)?;

        // Candidate edges: for each permissible label, every assignment of
        // dividend successors to the synchronizing divisor moves.
        let mut support: Vec<(Label, BTreeSet<(State, State)>)> = Vec::new();
        for a2 in &permissible {
            let mut synced: Vec<(usize, Label, State, Label)> = Vec::new(); // (pair, a1, t1, a1*a2)
            for (i, a1, t1) in &divisor_moves {
                if let Some(c) = memo.sync(a1, a2)? {
                    synced.push((*i, a1.clone(), *t1, c));
                }
            }
            let mut targets: BTreeSet<BTreeSet<(State, State)>> = BTreeSet::new();
            let mut partial: Vec<BTreeSet<(State, State)>> = vec![BTreeSet::new()];
            for (i, _, t1, c) in &synced {
                let options: BTreeSet<State> = dividend_moves[*i]
                    .iter()
                    .filter(|(a3, _)| memo.leq(c, a3).unwrap_or(false))
                    .map(|(_, t3)| *t3)
                    .collect();
                let mut next = Vec::new();
                for t in &partial {
                    for t3 in &options {
                        let mut grown = t.clone();
                        grown.insert((*t3, *t1));
                        next.push(grown);
                    }
                }
                partial = next;
                if partial.len() > 4 * opts.max_support {
                    return Err(Error::Budget(format!(
                        "quotient state {} has more than {} next-state assignments for {a2}",
                        states[here],
                        4 * opts.max_support
                    )));
                }
            }
            targets.extend(partial.into_iter().map(norm));
            for t in targets {
                support.push((a2.clone(), t));
            }
        }
        support.sort();
        support.dedup();
        if support.len() > opts.max_support {
            return Err(Error::Budget(format!(
                "quotient state {} needs {} candidate edges; the support budget is {}",
                states[here],
                support.len(),
                opts.max_support
            )));
        }

        // Intern target states.
        let mut target_index: Vec<State> = Vec::new();
        for (_, t) in &support {
            let id = match index.get(t) {
                Some(&i) => i,
                None => {
                    let i = states.len();
                    if i >= opts.max_states {
                        return Err(Error::Budget(format!("quotient exceeds {} states", opts.max_states)));
                    }
                    index.insert(t.clone(), i);
                    states.push(quotient_state_name(t, dividend, &divisor));
                    state_pairs.push(t.clone());
                    queue.push_back(t.clone());
                    i
                }
            };
            target_index.push(id);
        }

        // Admissible edge sets: those whose synchronization with any member
        // of any constituent divisor constraint stays inside some member of
        // the corresponding dividend constraint.
        let divisor_members: Vec<Vec<Vec<(Label, State)>>> = pairs
            .iter()
            .map(|(_, s1)| match &divisor.tran[*s1] {
                Tran::Universal => unreachable!("rejected above"),
                Tran::Sets(sets) => sets.iter().map(|m| m.iter().cloned().collect()).collect(),
            })
            .collect();
        let dividend_members: Vec<Vec<Vec<(Label, State)>>> = pairs
            .iter()
            .map(|(s3, _)| match &dividend.tran[*s3] {
                Tran::Universal => Vec::new(),
                Tran::Sets(sets) => sets.iter().map(|m| m.iter().cloned().collect()).collect(),
            })
            .collect();

        let mut members = BTreeSet::new();
        'subset: for mask in 0u32..(1u32 << support.len()) {
            let chosen: Vec<usize> = (0..support.len()).filter(|e| mask & (1 << e) != 0).collect();
            for (i, _) in pairs.iter().enumerate() {
                for m1 in &divisor_members[i] {
                    // triangle(M, M1): composed dividend obligations.
                    let mut tri: Vec<(Label, State)> = Vec::new();
                    for &e in &chosen {
                        let (a2, t) = &support[e];
                        for (a1, t1) in m1 {
                            if let Some(c) = memo.sync(a1, a2)? {
                                for (t3, u1) in t {
                                    if u1 == t1 {
                                        tri.push((c.clone(), *t3));
                                    }
                                }
                            }
                        }
                    }
                    let ok = dividend_members[i].iter().any(|m3| {
                        tri.iter().all(|(b, t3)| {
                            m3.iter().any(|(a3, u3)| u3 == t3 && memo.leq(b, a3).unwrap_or(false))
                        }) && m3.iter().all(|(a3, u3)| {
                            tri.iter().any(|(b, t3)| t3 == u3 && memo.leq(b, a3).unwrap_or(false))
                        })
                    });
                    if !ok {
                        continue 'subset;
                    }
                }
            }
            members.insert(
                chosen.iter().map(|&e| (support[e].0.clone(), target_index[e])).collect::<EdgeSet>(),
            );
        }
        if tran.len() <= here {
            tran.resize(here + 1, None);
        }
        tran[here] = Some(Tran::Sets(members));
    }
    tran.resize(states.len(), None);
    let tran: Vec<Tran> = tran.into_iter().map(|t| t.unwrap_or(Tran::Sets(BTreeSet::new()))).collect();

    let pairs_named: Vec<BTreeSet<(String, String)>> = state_pairs
        .iter()
        .map(|ps| {
            ps.iter()
                .map(|(s3, s1)| (dividend.states[*s3].clone(), divisor_origin[*s1].clone()))
                .collect()
        })
        .collect();
    Ok(QuotientOutput {
        aa: Aa { states, initial: BTreeSet::from([0]), tran },
        pairs: pairs_named,
    })
}

fn quotient_state_name(pairs: &BTreeSet<(State, State)>, dividend: &Aa, divisor: &Aa) -> String {
    if pairs.is_empty() {
        return "{}".to_string();
    }
    let body: Vec<String> = pairs
        .iter()
        .map(|(s3, s1)| format!("{}/{}", dividend.states[*s3], divisor.states[*s1]))
        .collect();
    format!("{{{}}}", body.join(","))
}

/// Tags the targets of each constraint member with the member's index, so
/// members become pairwise disjoint. Every tagged state is refinement
/// equivalent to its original. Returns the rewritten automaton and, per new
/// state, the original state name.
fn split_divisor(a: &Aa) -> (Aa, Vec<String>) {
    let overlapping = a.tran.iter().any(|t| match t {
        Tran::Universal => false,
        Tran::Sets(sets) => {
            let members: Vec<&EdgeSet> = sets.iter().collect();
            members
                .iter()
                .enumerate()
                .any(|(i, m)| members[i + 1..].iter().any(|m2| m.intersection(m2).next().is_some()))
        }
    });
    if !overlapping {
        return (a.clone(), a.states.clone());
    }
    let mut index: BTreeMap<(State, usize), State> = BTreeMap::new();
    let mut states: Vec<String> = Vec::new();
    let mut origin: Vec<String> = Vec::new();
    let mut underlying: Vec<State> = Vec::new();
    let mut queue: VecDeque<(State, usize)> = VecDeque::new();
    let mut initial = BTreeSet::new();
    for s0 in &a.initial {
        let i = states.len();
        index.insert((*s0, 0), i);
        states.push(format!("({}@0)", a.states[*s0]));
        origin.push(a.states[*s0].clone());
        underlying.push(*s0);
        queue.push_back((*s0, 0));
        initial.insert(i);
    }
    let mut tran: Vec<Option<Tran>> = Vec::new();
    while let Some((s, tag)) = queue.pop_front() {
        let here = index[&(s, tag)];
        let members = match &a.tran[s] {
            Tran::Universal => unreachable!("universal divisors are rejected before splitting"),
            Tran::Sets(sets) => sets,
        };
        let mut new_members = BTreeSet::new();
        for (k, m) in members.iter().enumerate() {
            let mut tagged = EdgeSet::new();
            for (lab, t) in m {
                let target = *index.entry((*t, k)).or_insert_with(|| {
                    let i = states.len();
                    states.push(format!("({}@{k})", a.states[*t]));
                    origin.push(a.states[*t].clone());
                    underlying.push(*t);
                    queue.push_back((*t, k));
                    i
                });
                tagged.insert((lab.clone(), target));
            }
            new_members.insert(tagged);
        }
        if tran.len() <= here {
            tran.resize(here + 1, None);
        }
        tran[here] = Some(Tran::Sets(new_members));
    }
    tran.resize(states.len(), None);
    let tran = tran.into_iter().map(|t| t.unwrap_or(Tran::Sets(BTreeSet::new()))).collect();
    (Aa { states, initial, tran }, origin)
}

/// The label candidates for one quotient state: per-action tops, residuals
/// of every divisor/dividend label pair, never-synchronizing pieces of each
/// divisor label, closed under pairwise conjunction.
fn candidate_labels(
    divisor_moves: &[(usize, Label, State)],
    dividend_moves: &[Vec<(Label, State)>],
    memo: &LabelOps,
    ls: &LabelStructure,
    opts: &QuotientOptions,
) -> Result<Vec<Label>> {
    let mut cands: BTreeSet<Label> = labels::action_tops(ls).into_iter().collect();
    for (i, a1, _) in divisor_moves {
        for avoid in labels::avoiders(a1, ls) {
            cands.insert(avoid);
        }
        for (a3, _) in &dividend_moves[*i] {
            cands.extend(labels::residuals(a1, a3, ls)?);
        }
    }
    // Close under conjunction so candidates can satisfy several divisor
    // constraints at once.
    loop {
        let snapshot: Vec<Label> = cands.iter().cloned().collect();
        let before = cands.len();
        for (i, a) in snapshot.iter().enumerate() {
            for b in &snapshot[i + 1..] {
                if let Some(c) = memo.conj(a, b)? {
                    cands.insert(c);
                }
            }
        }
        if cands.len() > opts.max_candidates {
            return Err(Error::Budget(format!(
                "quotient label candidates exceed {}",
                opts.max_candidates
            )));
        }
        if cands.len() == before {
            break;
        }
    }
    Ok(cands.into_iter().collect())
}

/// Groups permissible labels by how they synchronize with each divisor move
/// and keeps only the maximal labels of each group; smaller labels with the
/// same synchronization behavior add nothing to the quotient.
fn collapse_by_behavior(
    permissible: Vec<Label>,
    divisor_moves: &[(usize, Label, State)],
    memo: &LabelOps,
) -> Result<Vec<Label>> {
    let mut groups: BTreeMap<Vec<Option<Label>>, Vec<Label>> = BTreeMap::new();
    for a2 in permissible {
        let mut key = Vec::with_capacity(divisor_moves.len());
        for (_, a1, _) in divisor_moves {
            key.push(memo.sync(a1, &a2)?);
        }
        groups.entry(key).or_default().push(a2);
    }
    let mut out = Vec::new();
    for (_, group) in groups {
        'member: for a in &group {
            for b in &group {
                if a != b && memo.leq(a, b)? && !memo.leq(b, a)? {
                    continue 'member;
                }
            }
            out.push(a.clone());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Deletes edge sets referencing inconsistent states (empty constraints),
/// propagates to a fixed point, then drops unreachable states. Initial
/// states are kept even when inconsistent; [`prune_detailed`] names them.
pub fn prune_inconsistent(a: &Aa) -> Aa {
    prune_detailed(a).aa
}

#[derive(Clone, Debug)]
pub struct PruneResult {
    pub aa: Aa,
    /// Initial states left without any admissible edge set: the pruned
    /// specification is unimplementable from them.
    pub unsatisfiable_initials: Vec<String>,
}

pub fn prune_detailed(a: &Aa) -> PruneResult {
    let mut tran = a.tran.clone();
    loop {
        let bad: BTreeSet<State> = tran
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_empty())
            .map(|(s, _)| s)
            .collect();
        let mut changed = false;
        for t in tran.iter_mut() {
            if let Tran::Sets(sets) = t {
                let keep: BTreeSet<EdgeSet> = sets
                    .iter()
                    .filter(|m| m.iter().all(|(_, target)| !bad.contains(target)))
                    .cloned()
                    .collect();
                if keep.len() != sets.len() {
                    *sets = keep;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    // Reachability over the surviving edge sets.
    let mut seen: BTreeSet<State> = a.initial.clone();
    let mut work: Vec<State> = a.initial.iter().copied().collect();
    while let Some(s) = work.pop() {
        if let Tran::Sets(sets) = &tran[s] {
            for (_, t) in sets.iter().flatten() {
                if seen.insert(*t) {
                    work.push(*t);
                }
            }
        }
    }
    let kept: Vec<State> = seen.into_iter().collect();
    let remap: BTreeMap<State, State> = kept.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let states = kept.iter().map(|s| a.states[*s].clone()).collect();
    let initial = a.initial.iter().map(|s| remap[s]).collect();
    let new_tran = kept
        .iter()
        .map(|s| match &tran[*s] {
            Tran::Universal => Tran::Universal,
            Tran::Sets(sets) => Tran::Sets(
                sets.iter()
                    .map(|m| m.iter().map(|(lab, t)| (lab.clone(), remap[t])).collect())
                    .collect(),
            ),
        })
        .collect();
    let aa = Aa { states, initial, tran: new_tran };
    let unsatisfiable_initials = aa
        .initial
        .iter()
        .filter(|s| aa.tran[**s].is_empty())
        .map(|s| aa.states[*s].clone())
        .collect();
    PruneResult { aa, unsatisfiable_initials }
}

/// Memoized label operations over one structure.
struct LabelOps<'a> {
    ls: &'a LabelStructure,
    leq: RefCell<BTreeMap<(Label, Label), bool>>,
    conj: RefCell<BTreeMap<(Label, Label), Option<Label>>>,
    sync: RefCell<BTreeMap<(Label, Label), Option<Label>>>,
}

impl<'a> LabelOps<'a> {
    fn new(ls: &'a LabelStructure) -> LabelOps<'a> {
        LabelOps { ls, leq: RefCell::default(), conj: RefCell::default(), sync: RefCell::default() }
    }

    fn leq(&self, a: &Label, b: &Label) -> Result<bool> {
        if let Some(v) = self.leq.borrow().get(&(a.clone(), b.clone())) {
            return Ok(*v);
        }
        let v = labels::refines(a, b, self.ls)?;
        self.leq.borrow_mut().insert((a.clone(), b.clone()), v);
        Ok(v)
    }

    fn conj(&self, a: &Label, b: &Label) -> Result<Option<Label>> {
        if let Some(v) = self.conj.borrow().get(&(a.clone(), b.clone())) {
            return Ok(v.clone());
        }
        let v = labels::conjoin(a, b, self.ls)?;
        self.conj.borrow_mut().insert((a.clone(), b.clone()), v.clone());
        Ok(v)
    }

    fn sync(&self, a: &Label, b: &Label) -> Result<Option<Label>> {
        if let Some(v) = self.sync.borrow().get(&(a.clone(), b.clone())) {
            return Ok(v.clone());
        }
        let v = labels::synchronize(a, b, self.ls)?;
        self.sync.borrow_mut().insert((a.clone(), b.clone()), v.clone());
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{Interval, SyncOp};
    use crate::model::{dmts_to_aa, embed_lts, Formalism, Lts, System};
    use crate::refine::{refines_aa, refines_dmts};

    fn bare(s: &str) -> Label {
        Label::discrete(s)
    }

    fn w(a: &str, lo: f64, hi: f64) -> Label {
        Label::weighted(a, Interval::closed(lo, hi))
    }

    fn may_only(structure_states: &[&str], init: &[State], edges: &[(State, Label, State)]) -> Dmts {
        Dmts {
            states: structure_states.iter().map(|s| s.to_string()).collect(),
            initial: init.iter().copied().collect(),
            may: edges.iter().cloned().collect(),
            must: BTreeSet::new(),
        }
    }

    #[test]
    fn conjunction_with_disjoint_intervals_is_empty() {
        // One may-edge [0,1] against one may-edge [3,4]: no common
        // refinement, so the conjunction has no edges at all.
        let ls = LabelStructure::weighted(["a".into()], SyncOp::Csp);
        let d1 = may_only(&["p0", "p1"], &[0], &[(0, w("a", 0.0, 1.0), 1)]);
        let d2 = may_only(&["q0", "q1"], &[0], &[(0, w("a", 3.0, 4.0), 1)]);
        let c = conjoin(&d1, &d2, &ls).unwrap();
        assert_eq!(c.initial.len(), 1);
        assert!(c.may.is_empty());
        assert!(c.must.is_empty());
    }

    #[test]
    fn conjunction_vs_composition_on_mismatched_musts() {
        // Two single-must systems over different labels: conjunction is
        // inconsistent, composition is a consistent deadlock.
        let ls = LabelStructure::discrete(["a".into(), "b".into()]);
        let d1 = Dmts {
            states: vec!["s1".into(), "s2".into()],
            initial: BTreeSet::from([0]),
            may: BTreeSet::from([(0, bare("a"), 1)]),
            must: BTreeSet::from([(0, EdgeSet::from([(bare("a"), 1)]))]),
        };
        let d2 = Dmts {
            states: vec!["t1".into(), "t2".into()],
            initial: BTreeSet::from([0]),
            may: BTreeSet::from([(0, bare("b"), 1)]),
            must: BTreeSet::from([(0, EdgeSet::from([(bare("b"), 1)]))]),
        };
        let conj = conjoin(&d1, &d2, &ls).unwrap();
        let conj_aa = dmts_to_aa(&conj).unwrap();
        assert!(conj_aa.tran[0].is_empty(), "conjunction should be inconsistent");

        let comp = compose(&dmts_to_aa(&d1).unwrap(), &dmts_to_aa(&d2).unwrap(), &ls).unwrap();
        assert_eq!(comp.tran[0], Tran::Sets(BTreeSet::from([EdgeSet::new()])));
    }

    #[test]
    fn composition_adds_intervals() {
        let ls = LabelStructure::weighted(["a".into()], SyncOp::Plus);
        let i1 = Lts {
            states: vec!["x0".into(), "x1".into()],
            initial: 0,
            transitions: BTreeSet::from([(0, w("a", 1.0, 1.0), 1)]),
        };
        let i2 = Lts {
            states: vec!["y0".into(), "y1".into()],
            initial: 0,
            transitions: BTreeSet::from([(0, w("a", 3.0, 3.0), 1)]),
        };
        let (System::Aa(a1), System::Aa(a2)) = (embed_lts(&i1, Formalism::Aa), embed_lts(&i2, Formalism::Aa)) else {
            unreachable!()
        };
        let c = compose(&a1, &a2, &ls).unwrap();
        let moves = c.moves_of(0);
        assert_eq!(moves.len(), 1);
        assert!(moves.contains(&(w("a", 4.0, 4.0), 1)));
    }

    #[test]
    fn disjoin_is_a_join() {
        let ls = LabelStructure::discrete(["a".into(), "b".into()]);
        let d1 = may_only(&["s", "t"], &[0], &[(0, bare("a"), 1)]);
        let d2 = may_only(&["s", "t"], &[0], &[(0, bare("b"), 1)]);
        let both = disjoin(&d1, &d2);
        assert_eq!(both.states.len(), 4);
        assert!(refines_dmts(&d1, &both, &ls).unwrap().holds);
        assert!(refines_dmts(&d2, &both, &ls).unwrap().holds);
        // Bottom is a unit.
        let bottom = Dmts { states: vec![], initial: BTreeSet::new(), may: BTreeSet::new(), must: BTreeSet::new() };
        let same = disjoin(&bottom, &d1);
        assert!(refines_dmts(&same, &d1, &ls).unwrap().holds);
        assert!(refines_dmts(&d1, &same, &ls).unwrap().holds);
    }

    #[test]
    fn conjoining_with_itself_is_an_equivalence() {
        let ls = LabelStructure::weighted(["req", "grant", "work", "idle"].map(String::from), SyncOp::Csp);
        let d = crate::model::tests::request_grant();
        let c = conjoin(&d, &d, &ls).unwrap();
        assert!(refines_dmts(&c, &d, &ls).unwrap().holds);
        assert!(refines_dmts(&d, &c, &ls).unwrap().holds);
    }

    #[test]
    fn lattice_bound_refinements() {
        let ls = LabelStructure::discrete(["a".into()]);
        let (bottom, top) = lattice_bounds(&ls);
        let some = dmts_to_aa(&may_only(&["s"], &[0], &[(0, bare("a"), 0)])).unwrap();
        assert!(refines_aa(&bottom, &some, &ls).unwrap().holds);
        assert!(refines_aa(&some, &top, &ls).unwrap().holds);
        assert!(refines_aa(&bottom, &top, &ls).unwrap().holds);
        assert!(!refines_aa(&top, &bottom, &ls).unwrap().holds);
    }

    #[test]
    fn pruning_removes_doomed_members() {
        // s's only member references an inconsistent state t.
        let ls = LabelStructure::discrete(["a".into()]);
        let a = Aa {
            states: vec!["s".into(), "t".into()],
            initial: BTreeSet::from([0]),
            tran: vec![
                Tran::Sets(BTreeSet::from([EdgeSet::from([(bare("a"), 1)])])),
                Tran::Sets(BTreeSet::new()),
            ],
        };
        let pruned = prune_detailed(&a);
        assert_eq!(pruned.aa.states, vec!["s".to_string()]);
        assert!(pruned.aa.tran[0].is_empty());
        assert_eq!(pruned.unsatisfiable_initials, vec!["s".to_string()]);
        let _ = ls;
    }

    #[test]
    fn pruning_is_identity_on_consistent_automata() {
        let d = crate::model::tests::request_grant();
        let a = dmts_to_aa(&d).unwrap();
        assert_eq!(prune_inconsistent(&a), a);
    }

    #[test]
    fn pruning_preserves_the_implementation_semantics() {
        let ls = LabelStructure::discrete(["a".into(), "b".into()]);
        // A consistent branch plus a doomed one.
        let a = Aa {
            states: vec!["s".into(), "dead".into(), "ok".into()],
            initial: BTreeSet::from([0]),
            tran: vec![
                Tran::Sets(BTreeSet::from([
                    EdgeSet::from([(bare("a"), 2)]),
                    EdgeSet::from([(bare("b"), 1)]),
                ])),
                Tran::Sets(BTreeSet::new()),
                Tran::Sets(BTreeSet::from([EdgeSet::new()])),
            ],
        };
        let pruned = prune_inconsistent(&a);
        assert_eq!(pruned.states.len(), 2);
        // Pruning only removes members, so the pruned automaton refines the
        // original. The converse modal refinement fails here (the doomed
        // b-member has no surviving match), but no implementation could use
        // that member, so the implementation sets still agree.
        assert!(refines_aa(&pruned, &a, &ls).unwrap().holds);
        assert!(!refines_aa(&a, &pruned, &ls).unwrap().holds);
        let alphabet = [bare("a"), bare("b")];
        let budget = crate::refine::ENUMERATION_BUDGET;
        let da = crate::model::aa_to_dmts(&a, 1000).unwrap();
        let dp = crate::model::aa_to_dmts(&pruned, 1000).unwrap();
        let of_a = crate::refine::implementations(&da, &ls, &alphabet, 2, budget).unwrap();
        let of_p = crate::refine::implementations(&dp, &ls, &alphabet, 2, budget).unwrap();
        assert_eq!(of_a.systems, of_p.systems);
        assert!(!of_a.systems.is_empty());
    }

    #[test]
    fn quotient_with_empty_divisor_initials_is_universal() {
        let ls = LabelStructure::discrete(["a".into()]);
        let some = dmts_to_aa(&may_only(&["s"], &[0], &[(0, bare("a"), 0)])).unwrap();
        let empty = Aa { states: vec!["u".into()], initial: BTreeSet::new(), tran: vec![Tran::Sets(BTreeSet::new())] };
        let q = quotient(&some, &empty, &ls).unwrap();
        assert_eq!(q.aa.states[0], "{}");
        assert!(q.pairs[0].is_empty());
        // The empty quotient state accepts every subset of its top edges.
        let Tran::Sets(members) = &q.aa.tran[0] else { panic!() };
        assert!(members.contains(&EdgeSet::new()));
        assert!(members.len() >= 2);
        // Everything refines it.
        assert!(refines_aa(&some, &q.aa, &ls).unwrap().holds);
    }

    /// Quotient adjunction on a small discrete example.
    #[test]
    fn quotient_solves_composition_equations() {
        let ls = LabelStructure::discrete(["a".into(), "b".into()]);
        // dividend: must a then must b; divisor: must a.
        let s = Dmts {
            states: vec!["s0".into(), "s1".into(), "s2".into()],
            initial: BTreeSet::from([0]),
            may: BTreeSet::from([(0, bare("a"), 1), (1, bare("b"), 2)]),
            must: BTreeSet::from([
                (0, EdgeSet::from([(bare("a"), 1)])),
                (1, EdgeSet::from([(bare("b"), 2)])),
            ]),
        };
        let t = Dmts {
            states: vec!["t0".into(), "t1".into()],
            initial: BTreeSet::from([0]),
            may: BTreeSet::from([(0, bare("a"), 1), (1, bare("b"), 1)]),
            must: BTreeSet::from([
                (0, EdgeSet::from([(bare("a"), 1)])),
                (1, EdgeSet::from([(bare("b"), 1)])),
            ]),
        };
        let s_aa = dmts_to_aa(&s).unwrap();
        let t_aa = dmts_to_aa(&t).unwrap();
        let q = quotient(&s_aa, &t_aa, &ls).unwrap();
        let composed = compose(&t_aa, &q.aa, &ls).unwrap();
        assert!(refines_aa(&composed, &s_aa, &ls).unwrap().holds);
    }
}
