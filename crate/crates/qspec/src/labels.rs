//! The structured-label algebra.
//!
//! Labels come in three kinds: plain symbols (`grant`), symbols carrying a
//! weight interval (`grant[0,5]`, `send(2,3]`), and finite sets of symbols
//! (`{a,b,c}`). A [`LabelStructure`] fixes the kind, the alphabet, an
//! optional refinement preorder on symbols and the synchronization operator
//! used by structural composition and quotient.
//!
//! The operations here are the atoms everything else is built from:
//! [`refines`] (the label preorder), [`conjoin`] (partial greatest lower
//! bound), [`synchronize`] (partial parallel composition), [`distance`]
//! (an asymmetric hemimetric) and [`residuals`] (maximal labels that
//! synchronize under a bound, backing the quotient construction).
//!
//! Weighted structures may mix bare symbols with weighted labels; the two
//! variants are unrelated under refinement and never synchronize with each
//! other, while bare symbols compare and compose by equality.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Symbol = String;

/// An extended real, totally ordered, with `-0.0` normalized away.
///
/// Used both for interval endpoints (any extended real) and quantale values
/// (nonnegative extended reals). NaN is rejected at every construction site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extended(f64);

impl Extended {
    pub const NEG_INF: Extended = Extended(f64::NEG_INFINITY);
    pub const POS_INF: Extended = Extended(f64::INFINITY);
    pub const ZERO: Extended = Extended(0.0);

    pub fn new(v: f64) -> Extended {
        assert!(!v.is_nan(), "extended reals exclude NaN");
        Extended(if v == 0.0 { 0.0 } else { v })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// Saturating addition: infinite summands absorb.
    pub fn saturating_add(self, other: Extended) -> Extended {
        if self.0 == f64::INFINITY || other.0 == f64::INFINITY {
            Extended::POS_INF
        } else if self.0 == f64::NEG_INFINITY || other.0 == f64::NEG_INFINITY {
            Extended::NEG_INF
        } else {
            Extended::new(self.0 + other.0)
        }
    }
}

impl Eq for Extended {}

impl Ord for Extended {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            write!(f, "inf")
        } else if self.0 == f64::NEG_INFINITY {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

// JSON keeps infinities readable as strings; finite values stay numbers.
impl Serialize for Extended {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_nan() => Err(D::Error::custom("NaN is not an extended real")),
            Raw::Num(v) => Ok(Extended::new(v)),
            Raw::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(Extended::POS_INF),
                "-inf" => Ok(Extended::NEG_INF),
                other => Err(D::Error::custom(format!("bad extended real `{other}`"))),
            },
        }
    }
}

/// One endpoint of an interval: a value plus an open/closed flag.
type Bound = (Extended, bool);

/// Does a lower bound `outer` admit everything a lower bound `inner` admits?
fn lower_contains(outer: Bound, inner: Bound) -> bool {
    inner.0 > outer.0 || (inner.0 == outer.0 && (!outer.1 || inner.1))
}

/// Does an upper bound `outer` admit everything an upper bound `inner` admits?
fn upper_contains(outer: Bound, inner: Bound) -> bool {
    inner.0 < outer.0 || (inner.0 == outer.0 && (!outer.1 || inner.1))
}

/// A nonempty weight interval with open or closed endpoints.
///
/// Infinite endpoints are always open. A point interval has both endpoints
/// closed and finite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Extended,
    pub hi: Extended,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn new(lo: Extended, hi: Extended, lo_open: bool, hi_open: bool) -> Result<Interval> {
        let lo_open = lo_open || lo == Extended::NEG_INF;
        let hi_open = hi_open || hi == Extended::POS_INF;
        let iv = Interval { lo, hi, lo_open, hi_open };
        if iv.is_empty() {
            return Err(Error::invalid("interval", format!("{iv} is empty")));
        }
        if lo == Extended::POS_INF || hi == Extended::NEG_INF {
            return Err(Error::invalid("interval", format!("{iv} has inverted endpoints")));
        }
        Ok(iv)
    }

    pub fn closed(lo: f64, hi: f64) -> Interval {
        Interval::new(Extended::new(lo), Extended::new(hi), false, false).unwrap()
    }

    pub fn point(x: f64) -> Interval {
        Interval::closed(x, x)
    }

    /// The whole real line.
    pub fn full() -> Interval {
        Interval { lo: Extended::NEG_INF, hi: Extended::POS_INF, lo_open: true, hi_open: true }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi && !self.lo_open && !self.hi_open && self.lo.is_finite()
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    fn lower(&self) -> Bound {
        (self.lo, self.lo_open)
    }

    fn upper(&self) -> Bound {
        (self.hi, self.hi_open)
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        lower_contains(other.lower(), self.lower()) && upper_contains(other.upper(), self.upper())
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_open) = if self.lo > other.lo {
            self.lower()
        } else if other.lo > self.lo {
            other.lower()
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_open) = if self.hi < other.hi {
            self.upper()
        } else if other.hi < self.hi {
            other.upper()
        } else {
            (self.hi, self.hi_open || other.hi_open)
        };
        let iv = Interval { lo, hi, lo_open, hi_open };
        if iv.is_empty() {
            None
        } else {
            Some(iv)
        }
    }

    /// Minkowski sum. A sum endpoint is attained only when both summand
    /// endpoints are.
    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.saturating_add(other.lo),
            hi: self.hi.saturating_add(other.hi),
            lo_open: self.lo_open || other.lo_open,
            hi_open: self.hi_open || other.hi_open,
        }
    }

    /// Pointwise maximum `{max(x,y)}`. The lower endpoint is attained only
    /// when both are, the upper when either is.
    pub fn max_sync(&self, other: &Interval) -> Interval {
        let (lo, lo_open) = if self.lo > other.lo {
            self.lower()
        } else if other.lo > self.lo {
            other.lower()
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_open) = if self.hi > other.hi {
            self.upper()
        } else if other.hi > self.hi {
            other.upper()
        } else {
            (self.hi, self.hi_open && other.hi_open)
        };
        Interval { lo, hi, lo_open, hi_open }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

/// A structured label value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Label {
    Discrete { name: Symbol },
    Weighted { action: Symbol, interval: Interval },
    Set { members: BTreeSet<Symbol> },
}

impl Label {
    pub fn discrete(name: impl Into<Symbol>) -> Label {
        Label::Discrete { name: name.into() }
    }

    pub fn weighted(action: impl Into<Symbol>, interval: Interval) -> Label {
        Label::Weighted { action: action.into(), interval }
    }

    pub fn set<I: IntoIterator<Item = S>, S: Into<Symbol>>(members: I) -> Label {
        Label::Set { members: members.into_iter().map(Into::into).collect() }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Discrete { name } => write!(f, "{name}"),
            Label::Weighted { action, interval } => write!(f, "{action}{interval}"),
            Label::Set { members } => {
                write!(f, "{{")?;
                for (i, m) in members.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Discrete,
    Weighted,
    Set,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelKind::Discrete => write!(f, "discrete"),
            LabelKind::Weighted => write!(f, "weighted"),
            LabelKind::Set => write!(f, "set"),
        }
    }
}

/// The label synchronization operator used by composition and quotient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncOp {
    /// Defined only on equal labels, yielding that label.
    Csp,
    /// Interval addition on equal actions.
    Plus,
    /// Componentwise interval maximum on equal actions.
    Max,
    /// Interval intersection, i.e. synchronization by conjunction.
    Cap,
}

impl fmt::Display for SyncOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyncOp::Csp => write!(f, "csp"),
            SyncOp::Plus => write!(f, "plus"),
            SyncOp::Max => write!(f, "max"),
            SyncOp::Cap => write!(f, "cap"),
        }
    }
}

/// The algebra a set of labels lives in: kind, alphabet, symbol preorder
/// (discrete kind only) and synchronization operator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStructure {
    pub kind: LabelKind,
    pub alphabet: BTreeSet<Symbol>,
    /// Reflexive-transitive closure of the declared `a <= b` facts.
    pub order: BTreeSet<(Symbol, Symbol)>,
    pub sync: SyncOp,
}

impl LabelStructure {
    /// Builds and validates a structure. `order` lists the declared facts;
    /// the closure is computed here. Fails on non-alphabet symbols, cycles
    /// (antisymmetry) and kind/sync combinations that make no sense.
    pub fn new(
        kind: LabelKind,
        alphabet: impl IntoIterator<Item = Symbol>,
        order: impl IntoIterator<Item = (Symbol, Symbol)>,
        sync: SyncOp,
    ) -> Result<LabelStructure> {
        let alphabet: BTreeSet<Symbol> = alphabet.into_iter().collect();
        let declared: Vec<(Symbol, Symbol)> = order.into_iter().collect();
        if kind != LabelKind::Discrete && !declared.is_empty() {
            return Err(Error::invalid("structure", "a symbol order is only meaningful for discrete labels"));
        }
        for (a, b) in &declared {
            for s in [a, b] {
                if !alphabet.contains(s) {
                    return Err(Error::invalid("structure", format!("order uses `{s}` which is not in the alphabet")));
                }
            }
        }
        match (kind, sync) {
            (LabelKind::Discrete, SyncOp::Csp) => {}
            (LabelKind::Discrete, other) => {
                return Err(Error::invalid(
                    "structure",
                    format!("discrete labels synchronize by csp, not {other}"),
                ));
            }
            (LabelKind::Set, SyncOp::Plus | SyncOp::Max) => {
                return Err(Error::invalid("structure", format!("set labels do not support {sync} synchronization")));
            }
            _ => {}
        }

        // Reflexive-transitive closure over the alphabet.
        let mut closure: BTreeSet<(Symbol, Symbol)> =
            alphabet.iter().map(|s| (s.clone(), s.clone())).collect();
        closure.extend(declared);
        loop {
            let mut grew = false;
            let snapshot: Vec<_> = closure.iter().cloned().collect();
            for (a, b) in &snapshot {
                for (c, d) in &snapshot {
                    if b == c && closure.insert((a.clone(), d.clone())) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        for (a, b) in &closure {
            if a != b && closure.contains(&(b.clone(), a.clone())) {
                return Err(Error::invalid("structure", format!("order is not antisymmetric: {a} <= {b} <= {a}")));
            }
        }
        Ok(LabelStructure { kind, alphabet, order: closure, sync })
    }

    /// An unstructured discrete alphabet with equality refinement.
    pub fn discrete(alphabet: impl IntoIterator<Item = Symbol>) -> LabelStructure {
        LabelStructure::new(LabelKind::Discrete, alphabet, [], SyncOp::Csp).unwrap()
    }

    /// A weighted structure over the given actions.
    pub fn weighted(alphabet: impl IntoIterator<Item = Symbol>, sync: SyncOp) -> LabelStructure {
        LabelStructure::new(LabelKind::Weighted, alphabet, [], sync).unwrap()
    }

    pub fn symbol_leq(&self, a: &Symbol, b: &Symbol) -> bool {
        a == b || self.order.contains(&(a.clone(), b.clone()))
    }

    /// Pairs of symbols whose set of common lower bounds has several maximal
    /// elements, so conjunction is undefined for them and the greatest-lower-
    /// bound law cannot hold. Loaders surface these as warnings.
    pub fn conjunction_warnings(&self) -> Vec<(Symbol, Symbol)> {
        if self.kind != LabelKind::Discrete {
            return Vec::new();
        }
        let mut out = Vec::new();
        for a in &self.alphabet {
            for b in &self.alphabet {
                if a < b && self.maximal_lower_bounds(a, b).len() > 1 {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    fn maximal_lower_bounds(&self, a: &Symbol, b: &Symbol) -> Vec<Symbol> {
        let lower: Vec<&Symbol> = self
            .alphabet
            .iter()
            .filter(|c| self.symbol_leq(c, a) && self.symbol_leq(c, b))
            .collect();
        lower
            .iter()
            .filter(|c| !lower.iter().any(|d| d != *c && self.symbol_leq(c, d)))
            .map(|c| (*c).clone())
            .collect()
    }

    /// Checks that a label is expressible in this structure.
    pub fn check_label(&self, label: &Label) -> Result<()> {
        let bad = |msg: String| Err(Error::KindMismatch(msg));
        match (self.kind, label) {
            (LabelKind::Discrete, Label::Discrete { name }) | (LabelKind::Weighted, Label::Discrete { name }) => {
                if self.alphabet.contains(name) {
                    Ok(())
                } else {
                    bad(format!("symbol `{name}` is not in the alphabet"))
                }
            }
            (LabelKind::Weighted, Label::Weighted { action, .. }) => {
                if self.alphabet.contains(action) {
                    Ok(())
                } else {
                    bad(format!("action `{action}` is not in the alphabet"))
                }
            }
            (LabelKind::Set, Label::Set { members }) => {
                if members.is_empty() {
                    return Err(Error::invalid("label", "set labels must be nonempty"));
                }
                match members.iter().find(|m| !self.alphabet.contains(*m)) {
                    None => Ok(()),
                    Some(m) => bad(format!("set member `{m}` is not in the alphabet")),
                }
            }
            (kind, label) => bad(format!("label {label} does not fit a {kind} structure")),
        }
    }

    fn check_pair(&self, a: &Label, b: &Label) -> Result<()> {
        self.check_label(a)?;
        self.check_label(b)
    }
}

/// Label refinement: `a` is less permissive than `b`.
pub fn refines(a: &Label, b: &Label, ls: &LabelStructure) -> Result<bool> {
    ls.check_pair(a, b)?;
    Ok(match (a, b) {
        (Label::Discrete { name: x }, Label::Discrete { name: y }) => match ls.kind {
            LabelKind::Discrete => ls.symbol_leq(x, y),
            _ => x == y,
        },
        (Label::Weighted { action: u, interval: i }, Label::Weighted { action: v, interval: j }) => {
            u == v && i.subset_of(j)
        }
        (Label::Set { members: x }, Label::Set { members: y }) => x.is_subset(y),
        _ => false,
    })
}

/// Is `a` an implementation label, i.e. without any strict refinement?
pub fn is_implementation(a: &Label, ls: &LabelStructure) -> Result<bool> {
    ls.check_label(a)?;
    Ok(match a {
        Label::Discrete { name } => match ls.kind {
            LabelKind::Discrete => !ls
                .alphabet
                .iter()
                .any(|b| b != name && ls.symbol_leq(b, name)),
            _ => true,
        },
        Label::Weighted { interval, .. } => interval.is_point(),
        Label::Set { members } => members.len() == 1,
    })
}

/// Partial conjunction: the greatest lower bound when one exists.
pub fn conjoin(a: &Label, b: &Label, ls: &LabelStructure) -> Result<Option<Label>> {
    ls.check_pair(a, b)?;
    Ok(match (a, b) {
        (Label::Discrete { name: x }, Label::Discrete { name: y }) => {
            if x == y {
                Some(a.clone())
            } else if ls.kind == LabelKind::Discrete {
                let mut maxima = ls.maximal_lower_bounds(x, y);
                if maxima.len() == 1 {
                    Some(Label::discrete(maxima.pop().unwrap()))
                } else {
                    None
                }
            } else {
                None
            }
        }
        (Label::Weighted { action: u, interval: i }, Label::Weighted { action: v, interval: j }) => {
            if u == v {
                i.intersect(j).map(|iv| Label::weighted(u.clone(), iv))
            } else {
                None
            }
        }
        (Label::Set { members: x }, Label::Set { members: y }) => {
            let inter: BTreeSet<Symbol> = x.intersection(y).cloned().collect();
            if inter.is_empty() {
                None
            } else {
                Some(Label::Set { members: inter })
            }
        }
        _ => None,
    })
}

/// Partial label synchronization under the structure's operator.
pub fn synchronize(a: &Label, b: &Label, ls: &LabelStructure) -> Result<Option<Label>> {
    ls.check_pair(a, b)?;
    match ls.sync {
        SyncOp::Csp => Ok(if a == b { Some(a.clone()) } else { None }),
        SyncOp::Cap => conjoin(a, b, ls),
        SyncOp::Plus | SyncOp::Max => Ok(match (a, b) {
            (Label::Weighted { action: u, interval: i }, Label::Weighted { action: v, interval: j })
                if u == v =>
            {
                let iv = if ls.sync == SyncOp::Plus { i.add(j) } else { i.max_sync(j) };
                Some(Label::weighted(u.clone(), iv))
            }
            // Bare symbols act as pure synchronization actions.
            (Label::Discrete { name: x }, Label::Discrete { name: y }) if x == y => Some(a.clone()),
            _ => None,
        }),
    }
}

/// The asymmetric label distance: 0 whenever `a` refines `b`, the sup-inf
/// endpoint excess on weighted labels with equal actions, and infinite
/// everywhere else.
pub fn distance(a: &Label, b: &Label, ls: &LabelStructure) -> Result<Extended> {
    ls.check_pair(a, b)?;
    match (a, b) {
        (Label::Weighted { action: u, interval: i }, Label::Weighted { action: v, interval: j }) => {
            if u != v {
                return Ok(Extended::POS_INF);
            }
            // sup_{x in i} inf_{y in j} |x - y| = max(lo_j - lo_i, hi_i - hi_j, 0),
            // with doubly-infinite endpoints contributing nothing.
            let lo_term = if j.lo == Extended::NEG_INF {
                f64::NEG_INFINITY
            } else {
                j.lo.value() - i.lo.value()
            };
            let hi_term = if i.hi == Extended::POS_INF && j.hi == Extended::POS_INF {
                f64::NEG_INFINITY
            } else {
                i.hi.value() - j.hi.value()
            };
            Ok(Extended::new(lo_term.max(hi_term).max(0.0)))
        }
        _ => Ok(if refines(a, b, ls)? { Extended::ZERO } else { Extended::POS_INF }),
    }
}

/// The maximal labels `x` such that `a1 (.) x` is defined and refines `a3`,
/// where `(.)` is the structure's synchronization operator. Empty when no
/// such label exists.
pub fn residuals(a1: &Label, a3: &Label, ls: &LabelStructure) -> Result<BTreeSet<Label>> {
    ls.check_pair(a1, a3)?;
    let mut out = BTreeSet::new();
    match ls.sync {
        SyncOp::Csp => {
            if refines(a1, a3, ls)? {
                out.insert(a1.clone());
            }
        }
        SyncOp::Plus => match (a1, a3) {
            (Label::Weighted { action: u, interval: i1 }, Label::Weighted { action: v, interval: i3 })
                if u == v =>
            {
                if let Some(iv) = plus_residual(i1, i3) {
                    out.insert(Label::weighted(u.clone(), iv));
                }
            }
            (Label::Discrete { .. }, _) => {
                if refines(a1, a3, ls)? {
                    out.insert(a1.clone());
                }
            }
            _ => {}
        },
        SyncOp::Max => match (a1, a3) {
            (Label::Weighted { action: u, interval: i1 }, Label::Weighted { action: v, interval: i3 })
                if u == v =>
            {
                if let Some(iv) = max_residual(i1, i3) {
                    out.insert(Label::weighted(u.clone(), iv));
                }
            }
            (Label::Discrete { .. }, _) => {
                if refines(a1, a3, ls)? {
                    out.insert(a1.clone());
                }
            }
            _ => {}
        },
        SyncOp::Cap => match (a1, a3) {
            (Label::Weighted { action: u, interval: i1 }, Label::Weighted { action: v, interval: i3 })
                if u == v =>
            {
                if let Some(iv) = cap_residual(i1, i3) {
                    out.insert(Label::weighted(u.clone(), iv));
                }
            }
            (Label::Discrete { .. }, _) => {
                // Bare labels and discrete structures: conjunction-style sync.
                for name in &ls.alphabet {
                    let cand = Label::discrete(name.clone());
                    if ls.check_label(&cand).is_err() {
                        continue;
                    }
                    if let Some(c) = conjoin(a1, &cand, ls)? {
                        if refines(&c, a3, ls)? {
                            out.insert(cand);
                        }
                    }
                }
                retain_maximal(&mut out, ls)?;
            }
            (Label::Set { members: m1 }, Label::Set { members: m3 }) => {
                if m1.intersection(m3).next().is_some() {
                    // a3 together with everything a1 cannot see.
                    let mut members: BTreeSet<Symbol> = m3.clone();
                    members.extend(ls.alphabet.iter().filter(|s| !m1.contains(*s)).cloned());
                    out.insert(Label::Set { members });
                }
            }
            _ => {}
        },
    }
    Ok(out)
}

/// Maximal labels that never synchronize with `a1`. These complement
/// [`residuals`] as quotient label candidates: a label that cannot
/// synchronize cannot violate consistency either.
pub(crate) fn avoiders(a1: &Label, ls: &LabelStructure) -> Vec<Label> {
    let mut out = Vec::new();
    match (ls.sync, a1) {
        (SyncOp::Cap, Label::Weighted { action, interval }) => {
            // The two interval pieces strictly outside `interval`.
            if interval.lo != Extended::NEG_INF {
                let piece =
                    Interval { lo: Extended::NEG_INF, hi: interval.lo, lo_open: true, hi_open: !interval.lo_open };
                if !piece.is_empty() {
                    out.push(Label::weighted(action.clone(), piece));
                }
            }
            if interval.hi != Extended::POS_INF {
                let piece =
                    Interval { lo: interval.hi, hi: Extended::POS_INF, lo_open: !interval.hi_open, hi_open: true };
                if !piece.is_empty() {
                    out.push(Label::weighted(action.clone(), piece));
                }
            }
        }
        (SyncOp::Cap, Label::Set { members }) => {
            let rest: BTreeSet<Symbol> =
                ls.alphabet.iter().filter(|s| !members.contains(*s)).cloned().collect();
            if !rest.is_empty() {
                out.push(Label::Set { members: rest });
            }
        }
        (SyncOp::Csp, Label::Set { members }) => {
            // Any set other than a1 itself; Γ and the one-symbol-poked sets
            // cover all of them maximally.
            if *members != ls.alphabet {
                out.push(Label::Set { members: ls.alphabet.clone() });
            } else {
                for s in &ls.alphabet {
                    let mut m = ls.alphabet.clone();
                    m.remove(s);
                    if !m.is_empty() {
                        out.push(Label::Set { members: m });
                    }
                }
            }
        }
        _ => {}
    }
    out
}

/// The most permissive labels of the structure, one per alphabet symbol
/// (plus the bare variants in weighted structures). Every in-structure label
/// refines one of these.
pub(crate) fn action_tops(ls: &LabelStructure) -> Vec<Label> {
    match ls.kind {
        LabelKind::Discrete => ls.alphabet.iter().map(|s| Label::discrete(s.clone())).collect(),
        LabelKind::Weighted => {
            let mut out = Vec::new();
            for s in &ls.alphabet {
                out.push(Label::discrete(s.clone()));
                out.push(Label::weighted(s.clone(), Interval::full()));
            }
            out
        }
        LabelKind::Set => {
            if ls.alphabet.is_empty() {
                Vec::new()
            } else {
                vec![Label::Set { members: ls.alphabet.clone() }]
            }
        }
    }
}

fn retain_maximal(set: &mut BTreeSet<Label>, ls: &LabelStructure) -> Result<()> {
    let items: Vec<Label> = set.iter().cloned().collect();
    let mut keep = BTreeSet::new();
    'outer: for a in &items {
        for b in &items {
            if a != b && refines(a, b, ls)? && !refines(b, a, ls)? {
                continue 'outer;
            }
        }
        keep.insert(a.clone());
    }
    *set = keep;
    Ok(())
}

/// Maximal `x` with `i1 + x` contained in `i3`, if nonempty.
fn plus_residual(i1: &Interval, i3: &Interval) -> Option<Interval> {
    let (lo, lo_open) = if i3.lo == Extended::NEG_INF {
        (Extended::NEG_INF, true)
    } else if i1.lo == Extended::NEG_INF {
        // No finite shift brings an unbounded-below interval above a bound.
        return None;
    } else {
        (Extended::new(i3.lo.value() - i1.lo.value()), i3.lo_open && !i1.lo_open)
    };
    let (hi, hi_open) = if i3.hi == Extended::POS_INF {
        (Extended::POS_INF, true)
    } else if i1.hi == Extended::POS_INF {
        return None;
    } else {
        (Extended::new(i3.hi.value() - i1.hi.value()), i3.hi_open && !i1.hi_open)
    };
    let iv = Interval { lo, hi, lo_open, hi_open };
    if iv.is_empty() {
        None
    } else {
        Some(iv)
    }
}

/// Maximal `x` with `max(i1, x)` contained in `i3`, if any.
fn max_residual(i1: &Interval, i3: &Interval) -> Option<Interval> {
    // The composed upper bound is at least i1's, so i3 must admit it.
    if !upper_contains(i3.upper(), i1.upper()) {
        return None;
    }
    // Largest upper bound for x: i3's own, keeping its openness. When the
    // values coincide and i3 is open, the admission check above forces i1
    // open too, and x must then stay open to keep the maximum unattained.
    let (hi, hi_open) = i3.upper();
    // Lower bound: if i1 already lifts the composition above i3's lower
    // bound, x is unconstrained below; otherwise x must carry it.
    let (lo, lo_open) = if lower_contains(i3.lower(), i1.lower()) {
        (Extended::NEG_INF, true)
    } else if i3.lo == i1.lo {
        // Equal values, i3 open, i1 closed: max attains the value unless x
        // forces openness.
        (i3.lo, true)
    } else {
        (i3.lo, i3.lo_open)
    };
    let iv = Interval { lo, hi, lo_open, hi_open };
    if iv.is_empty() {
        None
    } else {
        Some(iv)
    }
}

/// Maximal `x` with `i1 ∩ x` nonempty and contained in `i3`.
fn cap_residual(i1: &Interval, i3: &Interval) -> Option<Interval> {
    i1.intersect(i3)?;
    let (lo, lo_open) = if lower_contains(i3.lower(), i1.lower()) {
        (Extended::NEG_INF, true)
    } else {
        i3.lower()
    };
    let (hi, hi_open) = if upper_contains(i3.upper(), i1.upper()) {
        (Extended::POS_INF, true)
    } else {
        i3.upper()
    };
    let iv = Interval { lo, hi, lo_open, hi_open };
    if iv.is_empty() {
        None
    } else {
        Some(iv)
    }
}
