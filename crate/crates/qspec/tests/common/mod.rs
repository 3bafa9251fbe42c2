//! Shared fixtures for the integration suites: seeded random system
//! generation and loading of the example files.

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use qspec::labels::{Interval, Label, LabelStructure, SyncOp};
use qspec::model::{Aa, Dmts, EdgeSet, SpecDocument, Tran};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn load(name: &str) -> SpecDocument {
    let body = std::fs::read_to_string(data_path(name)).unwrap();
    qspec::cli::parse_spec(&body).unwrap()
}

pub fn discrete_structure(n_labels: usize) -> (LabelStructure, Vec<Label>) {
    let symbols: Vec<String> = (0..n_labels).map(|i| format!("l{i}")).collect();
    let labels = symbols.iter().map(|s| Label::discrete(s.clone())).collect();
    (LabelStructure::discrete(symbols), labels)
}

/// A weighted structure over two actions with a pool of small closed
/// intervals: two point labels first (usable as an implementation
/// alphabet), then nesting and partially overlapping intervals so that
/// label distances take zero, finite positive and infinite values.
/// Closed endpoints keep every implemented metric recursively separating
/// (zero distance implies refinement).
pub fn weighted_structure(sync: SyncOp, n_labels: usize) -> (LabelStructure, Vec<Label>) {
    let ls = LabelStructure::weighted(["a".into(), "b".into()], sync);
    let pool: Vec<Label> = [
        ("a", 0.0, 0.0),
        ("b", 0.0, 0.0),
        ("a", 0.0, 2.0),
        ("a", 1.0, 4.0),
        ("b", 1.0, 2.0),
        ("a", 3.0, 3.0),
        ("a", 2.0, 5.0),
        ("b", 0.0, 2.0),
    ]
    .into_iter()
    .take(n_labels.max(1))
    .map(|(u, lo, hi)| Label::weighted(u, Interval::closed(lo, hi)))
    .collect();
    (ls, pool)
}

/// A random DMTS whose must-sets are drawn literally from its may-moves,
/// the regime in which the acceptance translation is exact.
pub fn random_dmts(rng: &mut ChaCha8Rng, pool: &[Label], max_states: usize) -> Dmts {
    let n = rng.gen_range(1..=max_states);
    let states = (0..n).map(|i| format!("s{i}")).collect();
    let mut initial = BTreeSet::from([0]);
    if n > 1 && rng.gen_bool(0.25) {
        initial.insert(rng.gen_range(1..n));
    }
    let mut may = BTreeSet::new();
    for s in 0..n {
        for _ in 0..rng.gen_range(0..=2) {
            let label = pool[rng.gen_range(0..pool.len())].clone();
            let t = rng.gen_range(0..n);
            may.insert((s, label, t));
        }
    }
    let mut must = BTreeSet::new();
    for s in 0..n {
        let moves: Vec<(Label, usize)> =
            may.iter().filter(|(src, _, _)| *src == s).map(|(_, a, t)| (a.clone(), *t)).collect();
        if moves.is_empty() || rng.gen_bool(0.4) {
            continue;
        }
        let k = rng.gen_range(1..=moves.len().min(2));
        let mut set = EdgeSet::new();
        for _ in 0..k {
            let (a, t) = moves[rng.gen_range(0..moves.len())].clone();
            set.insert((a, t));
        }
        must.insert((s, set));
    }
    Dmts { states, initial, may, must }
}

/// A random acceptance automaton with a single initial state. States with
/// an empty constraint set (no admissible edge set at all) are possible.
pub fn random_aa(rng: &mut ChaCha8Rng, pool: &[Label], max_states: usize) -> Aa {
    random_aa_members(rng, pool, max_states, 0)
}

/// Like [`random_aa`] but every state keeps at least one admissible edge
/// set, so the automaton has no inconsistent states. Distance equalities
/// across the quotient need this: an unimplementable state absorbs any
/// remaining distance on the composition side, which no admissible edge
/// set of the quotient can imitate.
pub fn random_consistent_aa(rng: &mut ChaCha8Rng, pool: &[Label], max_states: usize) -> Aa {
    random_aa_members(rng, pool, max_states, 1)
}

fn random_aa_members(rng: &mut ChaCha8Rng, pool: &[Label], max_states: usize, min_members: usize) -> Aa {
    let n = rng.gen_range(1..=max_states);
    let states = (0..n).map(|i| format!("q{i}")).collect();
    let mut tran = Vec::with_capacity(n);
    for _ in 0..n {
        let members = rng.gen_range(min_members..=2);
        let mut sets = BTreeSet::new();
        for _ in 0..members {
            let moves = rng.gen_range(0..=2);
            let mut m = EdgeSet::new();
            for _ in 0..moves {
                let label = pool[rng.gen_range(0..pool.len())].clone();
                m.insert((label, rng.gen_range(0..n)));
            }
            sets.insert(m);
        }
        tran.push(Tran::Sets(sets));
    }
    Aa { states, initial: BTreeSet::from([0]), tran }
}
