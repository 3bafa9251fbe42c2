//! System representations and the structural translations between them.
//!
//! Four system kinds share one universe of implementations:
//!
//! * [`Lts`] — plain labeled transition systems, the implementations.
//! * [`Dmts`] — disjunctive modal transition systems: may-edges plus
//!   disjunctive must-sets, at least one branch of each must being required.
//! * [`Aa`] — acceptance automata: per state a set of admissible
//!   outgoing-edge sets; an implementation picks one member per state.
//! * [`NuExpr`] — normal-form modal nu-calculus equation systems, stored as
//!   per-variable diamond obligations and box entries.
//!
//! The translations [`dmts_to_aa`], [`aa_to_dmts`], [`dmts_to_nu`] and
//! [`nu_to_dmts`] preserve and reflect modal refinement; [`embed_lts`] maps
//! an implementation into any of the three specification formalisms.
//! `aa_to_dmts` can grow exponentially and takes a state budget.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::labels::{self, Label, LabelStructure};
use crate::{Error, Result};

pub type State = usize;
/// A set of labeled moves, used both for acceptance-set members and
/// disjunctive must-sets.
pub type EdgeSet = BTreeSet<(Label, State)>;

/// A labeled transition system over implementation labels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lts {
    pub states: Vec<String>,
    pub initial: State,
    pub transitions: BTreeSet<(State, Label, State)>,
}

/// A disjunctive modal transition system.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dmts {
    pub states: Vec<String>,
    pub initial: BTreeSet<State>,
    pub may: BTreeSet<(State, Label, State)>,
    /// Disjunctive must-sets; `(s, N)` requires at least one move of `N`.
    pub must: BTreeSet<(State, EdgeSet)>,
}

/// The transition constraint of one acceptance-automaton state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tran {
    /// Every edge set over the whole label set is admissible. Kept
    /// intensional; only the lattice top uses it.
    Universal,
    Sets(BTreeSet<EdgeSet>),
}

impl Tran {
    pub fn sets(&self) -> Option<&BTreeSet<EdgeSet>> {
        match self {
            Tran::Universal => None,
            Tran::Sets(s) => Some(s),
        }
    }

    pub fn is_universal(&self) -> bool {
        matches!(self, Tran::Universal)
    }

    /// No admissible edge set at all: the inconsistent constraint.
    pub fn is_empty(&self) -> bool {
        matches!(self, Tran::Sets(s) if s.is_empty())
    }
}

/// A (non-deterministic) acceptance automaton.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Aa {
    pub states: Vec<String>,
    pub initial: BTreeSet<State>,
    /// One transition constraint per state, indexed like `states`.
    pub tran: Vec<Tran>,
}

/// A normal-form nu-calculus equation system.
///
/// `diamond[x]` collects the disjunctive diamond obligations of variable
/// `x`; `boxes[x]` the box entries `(a, y)`. A transition of a model must be
/// covered by some box entry up to label refinement, so absent actions are
/// refused.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NuExpr {
    pub vars: Vec<String>,
    pub initial: BTreeSet<State>,
    pub diamond: Vec<BTreeSet<EdgeSet>>,
    pub boxes: Vec<EdgeSet>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formalism {
    Lts,
    Dmts,
    Aa,
    Nu,
}

impl fmt::Display for Formalism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formalism::Lts => write!(f, "lts"),
            Formalism::Dmts => write!(f, "dmts"),
            Formalism::Aa => write!(f, "aa"),
            Formalism::Nu => write!(f, "nu"),
        }
    }
}

/// Any of the four system kinds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum System {
    Lts(Lts),
    Dmts(Dmts),
    Aa(Aa),
    Nu(NuExpr),
}

impl System {
    pub fn formalism(&self) -> Formalism {
        match self {
            System::Lts(_) => Formalism::Lts,
            System::Dmts(_) => Formalism::Dmts,
            System::Aa(_) => Formalism::Aa,
            System::Nu(_) => Formalism::Nu,
        }
    }

    pub fn state_names(&self) -> &[String] {
        match self {
            System::Lts(s) => &s.states,
            System::Dmts(s) => &s.states,
            System::Aa(s) => &s.states,
            System::Nu(s) => &s.vars,
        }
    }
}

/// A named collection of systems over one label structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub structure: LabelStructure,
    pub systems: std::collections::BTreeMap<String, System>,
}

impl SpecDocument {
    pub fn get(&self, name: &str) -> Result<&System> {
        self.systems
            .get(name)
            .ok_or_else(|| Error::invalid("reference", format!("no system named `{name}`")))
    }
}

impl Lts {
    pub fn transitions_from(&self, s: State) -> impl Iterator<Item = (&Label, State)> {
        self.transitions.iter().filter(move |(src, _, _)| *src == s).map(|(_, a, t)| (a, *t))
    }
}

impl Dmts {
    pub fn may_from(&self, s: State) -> impl Iterator<Item = (&Label, State)> {
        self.may.iter().filter(move |(src, _, _)| *src == s).map(|(_, a, t)| (a, *t))
    }

    pub fn musts_of(&self, s: State) -> impl Iterator<Item = &EdgeSet> {
        self.must.iter().filter(move |(src, _)| *src == s).map(|(_, n)| n)
    }
}

impl Aa {
    /// All `(label, target)` moves occurring in some member of `Tran(s)`.
    pub fn moves_of(&self, s: State) -> BTreeSet<(Label, State)> {
        match &self.tran[s] {
            Tran::Universal => BTreeSet::new(),
            Tran::Sets(sets) => sets.iter().flatten().cloned().collect(),
        }
    }
}

/// One broken well-formedness rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

/// Outcome of validating a system against its label structure.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Whether the system is an implementation (single initial state,
    /// implementation labels only, and the implementation shape of its
    /// formalism).
    pub is_implementation: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_indices(n: usize, idx: impl IntoIterator<Item = State>, subject: &str, out: &mut Vec<Violation>) {
    for i in idx {
        if i >= n {
            out.push(Violation { subject: subject.to_string(), rule: format!("state index {i} out of range") });
        }
    }
}

fn check_label(label: &Label, ls: &LabelStructure, subject: String, out: &mut Vec<Violation>) {
    if let Err(e) = ls.check_label(label) {
        out.push(Violation { subject, rule: e.to_string() });
    }
}

/// Validates any system: type invariants, label-structure membership and
/// the implementation classification of its formalism.
pub fn validate(sys: &System, ls: &LabelStructure) -> ValidationReport {
    match sys {
        System::Lts(i) => validate_lts(i, ls),
        System::Dmts(d) => validate_dmts(d, ls),
        System::Aa(a) => validate_aa(a, ls),
        System::Nu(n) => validate_nu(n, ls),
    }
}

pub fn validate_lts(i: &Lts, ls: &LabelStructure) -> ValidationReport {
    let mut v = Vec::new();
    let n = i.states.len();
    check_indices(n, [i.initial], "initial", &mut v);
    for (s, a, t) in &i.transitions {
        let subject = format!("transition {} -{a}-> {}", name(&i.states, *s), name(&i.states, *t));
        check_indices(n, [*s, *t], &subject, &mut v);
        check_label(a, ls, subject.clone(), &mut v);
        match labels::is_implementation(a, ls) {
            Ok(true) => {}
            Ok(false) => v.push(Violation { subject, rule: format!("label {a} is not an implementation label") }),
            Err(_) => {}
        }
    }
    let is_implementation = v.is_empty();
    ValidationReport { violations: v, is_implementation }
}

pub fn validate_dmts(d: &Dmts, ls: &LabelStructure) -> ValidationReport {
    let mut v = Vec::new();
    let n = d.states.len();
    check_indices(n, d.initial.iter().copied(), "initial", &mut v);
    for (s, a, t) in &d.may {
        let subject = format!("may {} -{a}-> {}", name(&d.states, *s), name(&d.states, *t));
        check_indices(n, [*s, *t], &subject, &mut v);
        check_label(a, ls, subject, &mut v);
    }
    for (s, set) in &d.must {
        for (a, t) in set {
            let subject = format!("must of {} with branch ({a}, {})", name(&d.states, *s), name(&d.states, *t));
            check_indices(n, [*s, *t], &subject, &mut v);
            check_label(a, ls, subject.clone(), &mut v);
            // Syntactic consistency: some may-edge to the same target with a
            // coarser label.
            let covered = d.may_from(*s).any(|(b, u)| {
                u == *t && labels::refines(a, b, ls).unwrap_or(false)
            });
            if !covered {
                v.push(Violation { subject, rule: "must branch is not covered by any may edge".into() });
            }
        }
    }
    let is_implementation = v.is_empty()
        && d.initial.len() == 1
        && d.may.iter().all(|(_, a, _)| labels::is_implementation(a, ls).unwrap_or(false))
        && d.must
            == d.may
                .iter()
                .map(|(s, a, t)| (*s, EdgeSet::from([(a.clone(), *t)])))
                .collect();
    ValidationReport { violations: v, is_implementation }
}

pub fn validate_aa(a: &Aa, ls: &LabelStructure) -> ValidationReport {
    let mut v = Vec::new();
    let n = a.states.len();
    check_indices(n, a.initial.iter().copied(), "initial", &mut v);
    if a.tran.len() != n {
        v.push(Violation {
            subject: "tran".into(),
            rule: format!("{} constraints for {} states", a.tran.len(), n),
        });
    }
    for (s, tran) in a.tran.iter().enumerate() {
        if let Tran::Sets(sets) = tran {
            for m in sets {
                for (lab, t) in m {
                    let subject = format!("tran of {} with move ({lab}, {})", name(&a.states, s), name(&a.states, *t));
                    check_indices(n, [*t], &subject, &mut v);
                    check_label(lab, ls, subject, &mut v);
                }
            }
        }
    }
    let is_implementation = v.is_empty()
        && a.initial.len() == 1
        && a.tran.iter().all(|t| match t {
            Tran::Universal => false,
            Tran::Sets(sets) => {
                sets.len() == 1
                    && sets.iter().flatten().all(|(lab, _)| labels::is_implementation(lab, ls).unwrap_or(false))
            }
        });
    ValidationReport { violations: v, is_implementation }
}

pub fn validate_nu(nu: &NuExpr, ls: &LabelStructure) -> ValidationReport {
    let mut v = Vec::new();
    let n = nu.vars.len();
    check_indices(n, nu.initial.iter().copied(), "initial", &mut v);
    if nu.diamond.len() != n || nu.boxes.len() != n {
        v.push(Violation { subject: "tables".into(), rule: "diamond/box tables must cover every variable".into() });
    }
    for (x, sets) in nu.diamond.iter().enumerate() {
        for set in sets {
            for (a, y) in set {
                let subject = format!("diamond of {} with ({a}, {})", name(&nu.vars, x), name(&nu.vars, *y));
                check_indices(n, [*y], &subject, &mut v);
                check_label(a, ls, subject.clone(), &mut v);
                // Every diamond obligation needs a covering box entry, the
                // analogue of DMTS syntactic consistency.
                let covered = nu.boxes[x]
                    .iter()
                    .any(|(b, z)| *z == *y && labels::refines(a, b, ls).unwrap_or(false));
                if !covered {
                    v.push(Violation { subject, rule: "diamond obligation is not covered by any box entry".into() });
                }
            }
        }
    }
    for (x, entries) in nu.boxes.iter().enumerate() {
        for (a, y) in entries {
            let subject = format!("box of {} with ({a}, {})", name(&nu.vars, x), name(&nu.vars, *y));
            check_indices(n, [*y], &subject, &mut v);
            check_label(a, ls, subject, &mut v);
        }
    }
    let is_implementation = v.is_empty()
        && nu.initial.len() == 1
        && nu.boxes.iter().all(|es| es.iter().all(|(a, _)| labels::is_implementation(a, ls).unwrap_or(false)))
        && nu
            .diamond
            .iter()
            .enumerate()
            .all(|(x, sets)| {
                *sets == nu.boxes[x].iter().map(|p| EdgeSet::from([p.clone()])).collect::<BTreeSet<_>>()
            });
    ValidationReport { violations: v, is_implementation }
}

fn name(names: &[String], s: State) -> &str {
    names.get(s).map(String::as_str).unwrap_or("?")
}

/// Translates a DMTS to an acceptance automaton over the same states.
///
/// `Tran(s)` consists of the subsets of the may-moves of `s` that intersect
/// every must-set of `s`.
pub fn dmts_to_aa(d: &Dmts) -> Result<Aa> {
    const MAX_DEGREE: usize = 16;
    let mut tran = Vec::with_capacity(d.states.len());
    for s in 0..d.states.len() {
        let moves: Vec<(Label, State)> = d.may_from(s).map(|(a, t)| (a.clone(), t)).collect();
        if moves.len() > MAX_DEGREE {
            return Err(Error::Budget(format!(
                "state {} has {} may edges; acceptance translation enumerates subsets of at most {MAX_DEGREE}",
                d.states[s],
                moves.len()
            )));
        }
        let musts: Vec<&EdgeSet> = d.musts_of(s).collect();
        let mut sets = BTreeSet::new();
        for mask in 0u32..(1 << moves.len()) {
            let m: EdgeSet = moves
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, mv)| mv.clone())
                .collect();
            if musts.iter().all(|n| n.iter().any(|p| m.contains(p))) {
                sets.insert(m);
            }
        }
        tran.push(Tran::Sets(sets));
    }
    Ok(Aa { states: d.states.clone(), initial: d.initial.clone(), tran })
}

/// Default state budget for [`aa_to_dmts`].
pub const DMTS_STATE_BUDGET: usize = 100_000;

/// Translates an acceptance automaton to a DMTS.
///
/// States are pairs of an origin state and one member of its constraint, so
/// equal members at different states stay distinct. The state space can grow
/// exponentially; translation aborts once `budget` states exist.
pub fn aa_to_dmts(a: &Aa, budget: usize) -> Result<Dmts> {
    let mut states = Vec::new();
    let mut index = std::collections::BTreeMap::new(); // (origin, member) -> state
    for (s, tran) in a.tran.iter().enumerate() {
        let sets = match tran {
            Tran::Universal => {
                return Err(Error::Capability(
                    "cannot expand a universal transition constraint into a DMTS".into(),
                ))
            }
            Tran::Sets(sets) => sets,
        };
        for (k, m) in sets.iter().enumerate() {
            index.insert((s, m.clone()), states.len());
            states.push(format!("{}#{k}", a.states[s]));
            if states.len() > budget {
                return Err(Error::Budget(format!("DMTS translation exceeds {budget} states")));
            }
        }
    }
    let mut initial = BTreeSet::new();
    for s0 in &a.initial {
        if let Tran::Sets(sets) = &a.tran[*s0] {
            for m in sets {
                initial.insert(index[&(*s0, m.clone())]);
            }
        }
    }
    let mut must = BTreeSet::new();
    let mut may = BTreeSet::new();
    for ((_, m), d_state) in &index {
        for (lab, t) in m {
            let branches: EdgeSet = match &a.tran[*t] {
                Tran::Universal => unreachable!("rejected above"),
                Tran::Sets(sets) => sets.iter().map(|m2| (lab.clone(), index[&(*t, m2.clone())])).collect(),
            };
            for (_, target) in &branches {
                may.insert((*d_state, lab.clone(), *target));
            }
            must.insert((*d_state, branches));
        }
    }
    Ok(Dmts { states, initial, may, must })
}

/// Copies a DMTS into nu-calculus tables: musts become diamond obligations,
/// may-edges become box entries.
pub fn dmts_to_nu(d: &Dmts) -> NuExpr {
    let n = d.states.len();
    let mut diamond = vec![BTreeSet::new(); n];
    let mut boxes = vec![EdgeSet::new(); n];
    for (s, set) in &d.must {
        diamond[*s].insert(set.clone());
    }
    for (s, a, t) in &d.may {
        boxes[*s].insert((a.clone(), *t));
    }
    NuExpr { vars: d.states.clone(), initial: d.initial.clone(), diamond, boxes }
}

/// The inverse table copy. Fails when a diamond obligation has no covering
/// box entry, since the resulting DMTS would be syntactically inconsistent.
pub fn nu_to_dmts(nu: &NuExpr, ls: &LabelStructure) -> Result<Dmts> {
    let report = validate_nu(nu, ls);
    if !report.is_valid() {
        return Err(Error::invalid("nu expression", report.violations[0].to_string()));
    }
    let mut may = BTreeSet::new();
    let mut must = BTreeSet::new();
    for (x, entries) in nu.boxes.iter().enumerate() {
        for (a, y) in entries {
            may.insert((x, a.clone(), *y));
        }
    }
    for (x, sets) in nu.diamond.iter().enumerate() {
        for set in sets {
            must.insert((x, set.clone()));
        }
    }
    Ok(Dmts { states: nu.vars.clone(), initial: nu.initial.clone(), may, must })
}

/// Embeds an implementation into the given specification formalism.
pub fn embed_lts(i: &Lts, target: Formalism) -> System {
    match target {
        Formalism::Lts => System::Lts(i.clone()),
        Formalism::Dmts => System::Dmts(lts_to_dmts(i)),
        Formalism::Aa => {
            let mut tran = Vec::with_capacity(i.states.len());
            for s in 0..i.states.len() {
                let m: EdgeSet = i.transitions_from(s).map(|(a, t)| (a.clone(), t)).collect();
                tran.push(Tran::Sets(BTreeSet::from([m])));
            }
            System::Aa(Aa { states: i.states.clone(), initial: BTreeSet::from([i.initial]), tran })
        }
        Formalism::Nu => {
            let n = i.states.len();
            let mut diamond = vec![BTreeSet::new(); n];
            let mut boxes = vec![EdgeSet::new(); n];
            for (s, a, t) in &i.transitions {
                diamond[*s].insert(EdgeSet::from([(a.clone(), *t)]));
                boxes[*s].insert((a.clone(), *t));
            }
            System::Nu(NuExpr { vars: i.states.clone(), initial: BTreeSet::from([i.initial]), diamond, boxes })
        }
    }
}

pub fn lts_to_dmts(i: &Lts) -> Dmts {
    Dmts {
        states: i.states.clone(),
        initial: BTreeSet::from([i.initial]),
        may: i.transitions.clone(),
        must: i.transitions.iter().map(|(s, a, t)| (*s, EdgeSet::from([(a.clone(), *t)]))).collect(),
    }
}

/// Extracts the LTS from an implementation-shaped system.
pub fn system_to_lts(sys: &System, ls: &LabelStructure) -> Result<Lts> {
    let report = validate(sys, ls);
    if !report.is_implementation {
        return Err(Error::Capability("only implementation-shaped systems convert to an LTS".into()));
    }
    Ok(match sys {
        System::Lts(i) => i.clone(),
        System::Dmts(d) => Lts {
            states: d.states.clone(),
            initial: *d.initial.iter().next().unwrap(),
            transitions: d.may.clone(),
        },
        System::Aa(a) => {
            let mut transitions = BTreeSet::new();
            for (s, tran) in a.tran.iter().enumerate() {
                if let Tran::Sets(sets) = tran {
                    for (lab, t) in sets.iter().flatten() {
                        transitions.insert((s, lab.clone(), *t));
                    }
                }
            }
            Lts { states: a.states.clone(), initial: *a.initial.iter().next().unwrap(), transitions }
        }
        System::Nu(nu) => {
            let mut transitions = BTreeSet::new();
            for (x, entries) in nu.boxes.iter().enumerate() {
                for (a, y) in entries {
                    transitions.insert((x, a.clone(), *y));
                }
            }
            Lts { states: nu.vars.clone(), initial: *nu.initial.iter().next().unwrap(), transitions }
        }
    })
}
