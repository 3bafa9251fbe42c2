//! Boolean modal refinement, fixed-point model checking, and brute-force
//! implementation enumeration for desk-scale thorough-refinement checks.
//!
//! Refinement is decided by pruning: start from the full relation between
//! the two state sets and repeatedly delete pairs that violate a defining
//! clause of the respective refinement until nothing changes. The surviving
//! relation is the greatest refinement; the verdict only needs every initial
//! left state to keep an initial right partner.

use std::collections::BTreeSet;

use crate::labels::{self, Label, LabelStructure};
use crate::model::{Aa, Dmts, Lts, NuExpr, State, Tran};
use crate::{Error, Result};

/// Result of a refinement check: the verdict, the greatest refinement
/// relation restricted to pairs reachable from the initial pairing, and on
/// failure the first offending initial pair with the clause it broke.
#[derive(Clone, Debug)]
pub struct RefinementWitness {
    pub holds: bool,
    pub relation: BTreeSet<(State, State)>,
    pub failure: Option<Failure>,
}

/// Why a refinement check failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub left: State,
    pub right: Option<State>,
    /// Which clause was violated: `may`, `must`, `tran`, `box`, `diamond`
    /// or `initial`.
    pub clause: &'static str,
}

/// Precomputed refinement between the label universes of two systems.
struct LabelMatrix {
    left: Vec<Label>,
    right: Vec<Label>,
    leq: Vec<Vec<bool>>,
}

impl LabelMatrix {
    fn new(left: BTreeSet<Label>, right: BTreeSet<Label>, ls: &LabelStructure) -> Result<LabelMatrix> {
        let left: Vec<Label> = left.into_iter().collect();
        let right: Vec<Label> = right.into_iter().collect();
        let mut leq = vec![vec![false; right.len()]; left.len()];
        for (i, a) in left.iter().enumerate() {
            for (j, b) in right.iter().enumerate() {
                leq[i][j] = labels::refines(a, b, ls)?;
            }
        }
        Ok(LabelMatrix { left, right, leq })
    }

    fn left_index(&self, l: &Label) -> usize {
        self.left.binary_search(l).unwrap()
    }

    fn right_index(&self, l: &Label) -> usize {
        self.right.binary_search(l).unwrap()
    }
}

type Move = (usize, State); // (label index, target)

fn moves_match(m1: &[Move], m2: &[Move], leq: &[Vec<bool>], r: &[Vec<bool>]) -> bool {
    m1.iter().all(|&(a1, t1)| m2.iter().any(|&(a2, t2)| leq[a1][a2] && r[t1][t2]))
        && m2.iter().all(|&(a2, t2)| m1.iter().any(|&(a1, t1)| leq[a1][a2] && r[t1][t2]))
}

/// Shared pruning engine. `violated` reports the broken clause for a pair
/// under the current relation, or `None`.
fn prune_to_fixpoint(
    n1: usize,
    n2: usize,
    init1: &BTreeSet<State>,
    init2: &BTreeSet<State>,
    mut violated: impl FnMut(State, State, &[Vec<bool>]) -> Option<&'static str>,
) -> (Vec<Vec<bool>>, bool, Option<Failure>) {
    let mut r = vec![vec![true; n2]; n1];
    let mut failure: Option<Failure> = None;
    loop {
        let mut changed = false;
        for s1 in 0..n1 {
            for s2 in 0..n2 {
                if !r[s1][s2] {
                    continue;
                }
                if let Some(clause) = violated(s1, s2, &r) {
                    r[s1][s2] = false;
                    changed = true;
                    if failure.is_none() && init1.contains(&s1) && init2.contains(&s2) {
                        failure = Some(Failure { left: s1, right: Some(s2), clause });
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut holds = true;
    for s1 in init1 {
        if !init2.iter().any(|s2| r[*s1][*s2]) {
            holds = false;
            if failure.is_none() {
                failure = Some(Failure { left: *s1, right: None, clause: "initial" });
            }
            break;
        }
    }
    (r, holds, if holds { None } else { failure })
}

/// Restricts a relation to pairs reachable from the initial pairing along
/// matched steps.
fn reachable_pairs(
    r: &[Vec<bool>],
    init1: &BTreeSet<State>,
    init2: &BTreeSet<State>,
    steps: impl Fn(State, State, &[Vec<bool>]) -> Vec<(State, State)>,
) -> BTreeSet<(State, State)> {
    let mut seen = BTreeSet::new();
    let mut work: Vec<(State, State)> = init1
        .iter()
        .flat_map(|s1| init2.iter().map(move |s2| (*s1, *s2)))
        .filter(|(s1, s2)| r[*s1][*s2])
        .collect();
    while let Some((s1, s2)) = work.pop() {
        if !seen.insert((s1, s2)) {
            continue;
        }
        for (t1, t2) in steps(s1, s2, r) {
            if r[t1][t2] && !seen.contains(&(t1, t2)) {
                work.push((t1, t2));
            }
        }
    }
    seen
}

/// Modal refinement of DMTS: may-edges match forward, disjunctive musts
/// match backward, labels compare by refinement.
pub fn refines_dmts(d1: &Dmts, d2: &Dmts, ls: &LabelStructure) -> Result<RefinementWitness> {
    let matrix = LabelMatrix::new(
        d1.may.iter().map(|(_, a, _)| a.clone()).chain(d1.must.iter().flat_map(|(_, n)| n.iter().map(|(a, _)| a.clone()))).collect(),
        d2.may.iter().map(|(_, a, _)| a.clone()).chain(d2.must.iter().flat_map(|(_, n)| n.iter().map(|(a, _)| a.clone()))).collect(),
        ls,
    )?;
    let n1 = d1.states.len();
    let n2 = d2.states.len();
    let may1 = per_state_moves(n1, d1.may.iter(), |l| matrix.left_index(l));
    let may2 = per_state_moves(n2, d2.may.iter(), |l| matrix.right_index(l));
    let musts1 = per_state_sets(n1, d1.must.iter(), |l| matrix.left_index(l));
    let musts2 = per_state_sets(n2, d2.must.iter(), |l| matrix.right_index(l));
    let leq = &matrix.leq;

    let (r, holds, failure) = prune_to_fixpoint(n1, n2, &d1.initial, &d2.initial, |s1, s2, r| {
        let may_ok = may1[s1]
            .iter()
            .all(|&(a1, t1)| may2[s2].iter().any(|&(a2, t2)| leq[a1][a2] && r[t1][t2]));
        if !may_ok {
            return Some("may");
        }
        let must_ok = musts2[s2].iter().all(|n2| {
            musts1[s1].iter().any(|n1| {
                n1.iter().all(|&(a1, t1)| n2.iter().any(|&(a2, t2)| leq[a1][a2] && r[t1][t2]))
            })
        });
        if !must_ok {
            return Some("must");
        }
        None
    });
    let relation = reachable_pairs(&r, &d1.initial, &d2.initial, |s1, s2, r| {
        let mut out = Vec::new();
        for &(a1, t1) in &may1[s1] {
            for &(a2, t2) in &may2[s2] {
                if leq[a1][a2] && r[t1][t2] {
                    out.push((t1, t2));
                }
            }
        }
        out
    });
    Ok(RefinementWitness { holds, relation, failure })
}

/// Modal refinement of acceptance automata: every admissible edge set on the
/// left is matched, in both directions, by an admissible edge set on the
/// right.
pub fn refines_aa(a1: &Aa, a2: &Aa, ls: &LabelStructure) -> Result<RefinementWitness> {
    let collect = |a: &Aa| -> BTreeSet<Label> {
        a.tran
            .iter()
            .filter_map(Tran::sets)
            .flatten()
            .flatten()
            .map(|(l, _)| l.clone())
            .collect()
    };
    let matrix = LabelMatrix::new(collect(a1), collect(a2), ls)?;
    let n1 = a1.states.len();
    let n2 = a2.states.len();
    let tran1 = indexed_tran(a1, |l| matrix.left_index(l));
    let tran2 = indexed_tran(a2, |l| matrix.right_index(l));
    let leq = &matrix.leq;

    let (r, holds, failure) = prune_to_fixpoint(n1, n2, &a1.initial, &a2.initial, |s1, s2, r| {
        match (&tran1[s1], &tran2[s2]) {
            // A universal right constraint admits a mirror of any left set.
            (_, None) => None,
            (None, Some(_)) => Some("tran"),
            (Some(m1s), Some(m2s)) => {
                let ok = m1s
                    .iter()
                    .all(|m1| m2s.iter().any(|m2| moves_match(m1, m2, leq, r)));
                if ok {
                    None
                } else {
                    Some("tran")
                }
            }
        }
    });
    let relation = reachable_pairs(&r, &a1.initial, &a2.initial, |s1, s2, r| {
        let (Some(m1s), Some(m2s)) = (&tran1[s1], &tran2[s2]) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for m1 in m1s {
            for m2 in m2s {
                for &(x1, t1) in m1 {
                    for &(x2, t2) in m2 {
                        if leq[x1][x2] && r[t1][t2] {
                            out.push((t1, t2));
                        }
                    }
                }
            }
        }
        out
    });
    Ok(RefinementWitness { holds, relation, failure })
}

/// Modal refinement of normal-form nu-calculus expressions over the box and
/// diamond tables.
pub fn refines_nu(n1: &NuExpr, n2: &NuExpr, ls: &LabelStructure) -> Result<RefinementWitness> {
    let collect = |n: &NuExpr| -> BTreeSet<Label> {
        n.boxes
            .iter()
            .flatten()
            .map(|(l, _)| l.clone())
            .chain(n.diamond.iter().flatten().flatten().map(|(l, _)| l.clone()))
            .collect()
    };
    let matrix = LabelMatrix::new(collect(n1), collect(n2), ls)?;
    let v1 = n1.vars.len();
    let v2 = n2.vars.len();
    let boxes1: Vec<Vec<Move>> = n1.boxes.iter().map(|es| es.iter().map(|(l, y)| (matrix.left_index(l), *y)).collect()).collect();
    let boxes2: Vec<Vec<Move>> = n2.boxes.iter().map(|es| es.iter().map(|(l, y)| (matrix.right_index(l), *y)).collect()).collect();
    let dia1: Vec<Vec<Vec<Move>>> = n1
        .diamond
        .iter()
        .map(|sets| sets.iter().map(|n| n.iter().map(|(l, y)| (matrix.left_index(l), *y)).collect()).collect())
        .collect();
    let dia2: Vec<Vec<Vec<Move>>> = n2
        .diamond
        .iter()
        .map(|sets| sets.iter().map(|n| n.iter().map(|(l, y)| (matrix.right_index(l), *y)).collect()).collect())
        .collect();
    let leq = &matrix.leq;

    let (r, holds, failure) = prune_to_fixpoint(v1, v2, &n1.initial, &n2.initial, |x1, x2, r| {
        let box_ok = boxes1[x1]
            .iter()
            .all(|&(a1, y1)| boxes2[x2].iter().any(|&(a2, y2)| leq[a1][a2] && r[y1][y2]));
        if !box_ok {
            return Some("box");
        }
        let dia_ok = dia2[x2].iter().all(|m2| {
            dia1[x1].iter().any(|m1| {
                m1.iter().all(|&(a1, y1)| m2.iter().any(|&(a2, y2)| leq[a1][a2] && r[y1][y2]))
            })
        });
        if !dia_ok {
            return Some("diamond");
        }
        None
    });
    let relation = reachable_pairs(&r, &n1.initial, &n2.initial, |x1, x2, r| {
        let mut out = Vec::new();
        for &(a1, y1) in &boxes1[x1] {
            for &(a2, y2) in &boxes2[x2] {
                if leq[a1][a2] && r[y1][y2] {
                    out.push((y1, y2));
                }
            }
        }
        out
    });
    Ok(RefinementWitness { holds, relation, failure })
}

fn per_state_moves<'a>(
    n: usize,
    edges: impl Iterator<Item = &'a (State, Label, State)>,
    idx: impl Fn(&Label) -> usize,
) -> Vec<Vec<Move>> {
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
) -> Vec<Vec<Vec<Move>>> {
    let mut out = vec![Vec::new(); n];
    for (s, set) in musts {
        out[*s].push(set.iter().map(|(a, t)| (idx(a), *t)).collect());
    }
    out
}

/// `None` encodes a universal constraint.
fn indexed_tran(a: &Aa, idx: impl Fn(&Label) -> usize) -> Vec<Option<Vec<Vec<Move>>>> {
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

/// Does the implementation satisfy the normal-form expression?
///
/// Computes the greatest fixed point of the equation system by iteration
/// from the full assignment. A state satisfies a variable when every diamond
/// obligation is realized by some transition below one of its branches, and
/// every transition is covered by some box entry up to label refinement.
pub fn models(i: &Lts, nu: &NuExpr, ls: &LabelStructure) -> Result<bool> {
    let matrix = LabelMatrix::new(
        i.transitions.iter().map(|(_, a, _)| a.clone()).collect(),
        nu.boxes
            .iter()
            .flatten()
            .map(|(l, _)| l.clone())
            .chain(nu.diamond.iter().flatten().flatten().map(|(l, _)| l.clone()))
            .collect(),
        ls,
    )?;
    let ns = i.states.len();
    let nv = nu.vars.len();
    let trans = per_state_moves(ns, i.transitions.iter(), |l| matrix.left_index(l));
    let boxes: Vec<Vec<Move>> = nu.boxes.iter().map(|es| es.iter().map(|(l, y)| (matrix.right_index(l), *y)).collect()).collect();
    let dia: Vec<Vec<Vec<Move>>> = nu
        .diamond
        .iter()
        .map(|sets| sets.iter().map(|n| n.iter().map(|(l, y)| (matrix.right_index(l), *y)).collect()).collect())
        .collect();
    let leq = &matrix.leq;

    // sigma[x][s]: state s satisfies variable x under the current assignment.
    let mut sigma = vec![vec![true; ns]; nv];
    loop {
        let mut changed = false;
        for x in 0..nv {
            for s in 0..ns {
                if !sigma[x][s] {
                    continue;
                }
                let dia_ok = dia[x].iter().all(|branches| {
                    branches.iter().any(|&(a, y)| {
                        trans[s].iter().any(|&(b, t)| leq[b][a] && sigma[y][t])
                    })
                });
                let box_ok = trans[s].iter().all(|&(b, t)| {
                    boxes[x].iter().any(|&(a, y)| leq[b][a] && sigma[y][t])
                });
                if !(dia_ok && box_ok) {
                    sigma[x][s] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(nu.initial.iter().any(|x0| sigma[*x0][i.initial]))
}

/// Result of a bounded enumeration: possibly truncated by the budget.
#[derive(Clone, Debug)]
pub struct Enumerated {
    pub systems: Vec<Lts>,
    pub truncated: bool,
}

/// Default number of candidate transition sets examined by enumeration.
pub const ENUMERATION_BUDGET: u64 = 1 << 22;

/// Enumerates, up to isomorphism, every LTS over the given implementation
/// labels with at most `max_states` reachable states. Candidates beyond the
/// iteration budget are skipped and flagged.
pub fn enumerate_lts(alphabet: &[Label], max_states: usize, budget: u64) -> Enumerated {
    let mut systems = Vec::new();
    let mut truncated = false;
    let la = alphabet.len();
    let mut used: u64 = 0;
    for k in 1..=max_states {
        let bits = k * k * la;
        if bits >= 63 || used.saturating_add(1u64 << bits) > budget {
            truncated = true;
            break;
        }
        used += 1u64 << bits;
        for mask in 0u64..(1 << bits) {
            let mut transitions = BTreeSet::new();
            for s in 0..k {
                for t in 0..k {
                    for a in 0..la {
                        if mask & (1 << ((s * k + t) * la + a)) != 0 {
                            transitions.insert((s, alphabet[a].clone(), t));
                        }
                    }
                }
            }
            if !all_reachable(k, &transitions) || !is_canonical(k, la, mask) {
                continue;
            }
            let states = (0..k).map(|s| format!("q{s}")).collect();
            systems.push(Lts { states, initial: 0, transitions });
        }
    }
    Enumerated { systems, truncated }
}

fn all_reachable(k: usize, transitions: &BTreeSet<(State, Label, State)>) -> bool {
    let mut seen = vec![false; k];
    let mut work = vec![0];
    seen[0] = true;
    while let Some(s) = work.pop() {
        for (src, _, t) in transitions {
            if *src == s && !seen[*t] {
                seen[*t] = true;
                work.push(*t);
            }
        }
    }
    seen.into_iter().all(|b| b)
}

/// A candidate is canonical when no relabeling of its non-initial states
/// yields a smaller transition mask.
fn is_canonical(k: usize, la: usize, mask: u64) -> bool {
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        let mut mapped: u64 = 0;
        for s in 0..k {
            for t in 0..k {
                for a in 0..la {
                    if mask & (1 << ((s * k + t) * la + a)) != 0 {
                        mapped |= 1 << ((perm[s] * k + perm[t]) * la + a);
                    }
                }
            }
        }
        if mapped < mask {
            return false;
        }
        // Next permutation fixing state 0.
        if !next_permutation(&mut perm[1..]) {
            return true;
        }
    }
}

fn next_permutation(xs: &mut [usize]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

/// Enumerates the implementations of a DMTS over the given implementation
/// labels, up to the state bound.
pub fn implementations(
    d: &Dmts,
    ls: &LabelStructure,
    alphabet: &[Label],
    max_states: usize,
    budget: u64,
) -> Result<Enumerated> {
    for a in alphabet {
        if !labels::is_implementation(a, ls)? {
            return Err(Error::invalid("alphabet", format!("{a} is not an implementation label")));
        }
    }
    let all = enumerate_lts(alphabet, max_states, budget);
    let mut systems = Vec::new();
    for i in all.systems {
        let e = crate::model::lts_to_dmts(&i);
        if refines_dmts(&e, d, ls)?.holds {
            systems.push(i);
        }
    }
    Ok(Enumerated { systems, truncated: all.truncated })
}

/// A Boolean verdict that is only sound over the enumerated universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundedVerdict {
    pub holds: bool,
    pub truncated: bool,
}

/// Bounded thorough refinement: does every enumerated implementation of
/// `d1` implement `d2`?
pub fn thorough_refines_bounded(
    d1: &Dmts,
    d2: &Dmts,
    ls: &LabelStructure,
    alphabet: &[Label],
    max_states: usize,
    budget: u64,
) -> Result<BoundedVerdict> {
    let impls = implementations(d1, ls, alphabet, max_states, budget)?;
    for i in &impls.systems {
        let e = crate::model::lts_to_dmts(i);
        if !refines_dmts(&e, d2, ls)?.holds {
            return Ok(BoundedVerdict { holds: false, truncated: impls.truncated });
        }
    }
    Ok(BoundedVerdict { holds: true, truncated: impls.truncated })
}
