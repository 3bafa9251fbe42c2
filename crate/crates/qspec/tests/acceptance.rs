//! The acceptance suite: one test per criterion, each printing a pass line
//! with its runtime against the stated budget.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use qspec::labels::{Extended, SyncOp};
use qspec::model::{
    aa_to_dmts, dmts_to_aa, dmts_to_nu, lts_to_dmts, system_to_lts, Dmts, System, DMTS_STATE_BUDGET,
};
use qspec::ops;
use qspec::quant::{self, TraceMetric};
use qspec::refine::{self, ENUMERATION_BUDGET};

use common::{discrete_structure, load, random_aa, random_dmts, rng, weighted_structure};

fn finish(criterion: &str, started: Instant, limit_s: f64) {
    let dt = started.elapsed().as_secs_f64();
    println!("criterion {criterion}: PASS ({dt:.2}s < {limit_s}s)");
    assert!(dt < limit_s, "criterion {criterion} exceeded its {limit_s}s budget ({dt:.2}s)");
}

fn dmts<'a>(doc: &'a qspec::model::SpecDocument, name: &str) -> &'a Dmts {
    match doc.get(name).unwrap() {
        System::Dmts(d) => d,
        other => panic!("{name} is a {}", other.formalism()),
    }
}

#[test]
fn criterion_1_vending_refinement() {
    let t0 = Instant::now();
    let with_beer = load("vending.qs");
    let w = refine::refines_dmts(dmts(&with_beer, "t"), dmts(&with_beer, "s"), &with_beer.structure).unwrap();
    assert!(w.holds, "the priced machine should refine the coarse one");

    let without = load("vending_nobeer.qs");
    let w = refine::refines_dmts(dmts(&without, "t"), dmts(&without, "s"), &without.structure).unwrap();
    assert!(!w.holds, "dropping the beer fact must break the refinement");
    finish("1 (vending refinement)", t0, 1.0);
}

#[test]
fn criterion_2_request_grant_implementations() {
    let t0 = Instant::now();
    let doc = load("grants.qs");
    let ls = &doc.structure;
    let System::Nu(spec) = doc.get("spec_nu").unwrap() else { panic!() };
    let i1 = system_to_lts(doc.get("i1").unwrap(), ls).unwrap();
    let i2 = system_to_lts(doc.get("i2").unwrap(), ls).unwrap();
    assert!(refine::models(&i1, spec, ls).unwrap());
    assert!(!refine::models(&i2, spec, ls).unwrap());
    // The hand-written equation system is equivalent to the DMTS's tables.
    let from_dmts = dmts_to_nu(dmts(&doc, "x"));
    assert!(refine::refines_nu(&from_dmts, spec, ls).unwrap().holds);
    assert!(refine::refines_nu(spec, &from_dmts, ls).unwrap().holds);
    let w = refine::refines_dmts(dmts(&doc, "xprime"), dmts(&doc, "x"), ls).unwrap();
    assert!(!w.holds);
    finish("2 (request-grant implementations)", t0, 1.0);
}

#[test]
fn criterion_3_discounting_distance() {
    let t0 = Instant::now();
    let doc = load("grants.qs");
    let ls = &doc.structure;
    let x = dmts(&doc, "x");
    let xp = dmts(&doc, "xprime");
    for lambda in [0.5, 0.9, 0.99] {
        let m = TraceMetric::discounting(lambda).unwrap();
        let expect = lambda / (1.0 - lambda);
        for (a, b) in [(x, xp), (xp, x)] {
            let (v, _) = quant::distance_dmts(a, b, &m, ls, 1e-9).unwrap();
            assert!(
                (v.value() - expect).abs() < 1e-6,
                "lambda {lambda}: got {v}, expected {expect}"
            );
        }
    }
    finish("3 (discounting distance)", t0, 1.0);
}

#[test]
fn criterion_4_conjunction_defect() {
    let t0 = Instant::now();
    let doc = load("interval_conjunction.qs");
    let ls = &doc.structure;
    let i = system_to_lts(doc.get("impl").unwrap(), ls).unwrap();
    let ie = lts_to_dmts(&i);
    let d1 = dmts(&doc, "d1");
    let d2 = dmts(&doc, "d2");
    let m = TraceMetric::pointwise();
    let one = Extended::new(1.0);
    let (v1, _) = quant::distance_dmts(&ie, d1, &m, ls, 1e-9).unwrap();
    let (v2, _) = quant::distance_dmts(&ie, d2, &m, ls, 1e-9).unwrap();
    assert_eq!(v1, one);
    assert_eq!(v2, one);
    let conj = ops::conjoin(d1, d2, ls).unwrap();
    let (vc, _) = quant::distance_dmts(&ie, &conj, &m, ls, 1e-9).unwrap();
    assert_eq!(vc, Extended::POS_INF);

    for (spec, expect) in [(d1, true), (d2, true), (&conj, false)] {
        let verdict =
            quant::implements_within(&i, &System::Dmts(spec.clone()), one, &m, ls, 1e-9).unwrap();
        assert_eq!(verdict.holds, expect);
    }
    finish("4 (conjunction defect)", t0, 1.0);
}

#[test]
fn criterion_5_deadline_quotient() {
    let t0 = Instant::now();
    let doc = load("deadline_quotient.qs");
    let ls = &doc.structure;
    assert_eq!(ls.sync, SyncOp::Cap);
    let s = dmts_to_aa(dmts(&doc, "s")).unwrap();
    let t = dmts_to_aa(dmts(&doc, "t")).unwrap();
    let q = ops::quotient(&s, &t, ls).unwrap();

    // Before pruning, states tracking the pair (s2, t2) do appear...
    assert!(!q.states_tracking("s2", "t2").is_empty());
    let name_tracks: std::collections::BTreeMap<&str, bool> = q
        .aa
        .states
        .iter()
        .zip(&q.pairs)
        .map(|(name, pairs)| (name.as_str(), pairs.iter().any(|(d3, d1)| d3 == "s2" && d1 == "t2")))
        .collect();
    // ... but pruning leaves no consistent reachable state tracking it.
    let pruned = ops::prune_detailed(&q.aa);
    assert!(pruned.unsatisfiable_initials.is_empty(), "the quotient must stay satisfiable");
    for (idx, name) in pruned.aa.states.iter().enumerate() {
        if !pruned.aa.tran[idx].is_empty() {
            assert!(
                !name_tracks[name.as_str()],
                "consistent state {name} still tracks the unguaranteeable pair s2/t2"
            );
        }
    }

    // Composing the divisor with the quotient refines the dividend.
    let composed = ops::compose(&t, &q.aa, ls).unwrap();
    assert!(refine::refines_aa(&composed, &s, ls).unwrap().holds);
    // The pruned quotient works just as well.
    let composed = ops::compose(&t, &pruned.aa, ls).unwrap();
    assert!(refine::refines_aa(&composed, &s, ls).unwrap().holds);
    finish("5 (deadline quotient)", t0, 5.0);
}

#[test]
fn criterion_6_translation_invariance() {
    let t0 = Instant::now();
    let mut r = rng(601);
    let (dls, dpool) = discrete_structure(3);
    let (wls, wpool_full) = weighted_structure(SyncOp::Csp, 8);
    // Three same-action labels with nesting and partial overlap.
    let wpool = [wpool_full[0].clone(), wpool_full[2].clone(), wpool_full[3].clone()];
    let metrics = [
        TraceMetric::discrete(),
        TraceMetric::pointwise(),
        TraceMetric::discounting(0.9).unwrap(),
    ];
    let mut checked = 0;
    for case in 0..200 {
        let (ls, pool) = if case % 2 == 0 { (&dls, &dpool[..]) } else { (&wls, &wpool[..]) };
        let d1 = random_dmts(&mut r, pool, 6);
        let d2 = random_dmts(&mut r, pool, 6);
        let a1 = dmts_to_aa(&d1).unwrap();
        let a2 = dmts_to_aa(&d2).unwrap();
        let n1 = dmts_to_nu(&d1);
        let n2 = dmts_to_nu(&d2);
        let b1 = aa_to_dmts(&a1, DMTS_STATE_BUDGET).unwrap();
        let b2 = aa_to_dmts(&a2, DMTS_STATE_BUDGET).unwrap();

        let base = refine::refines_dmts(&d1, &d2, ls).unwrap().holds;
        assert_eq!(base, refine::refines_aa(&a1, &a2, ls).unwrap().holds, "case {case}: acceptance verdict differs");
        assert_eq!(base, refine::refines_nu(&n1, &n2, ls).unwrap().holds, "case {case}: nu verdict differs");
        assert_eq!(base, refine::refines_dmts(&b1, &b2, ls).unwrap().holds, "case {case}: expanded verdict differs");

        for (mi, m) in metrics.iter().enumerate() {
            let (vd, _) = quant::distance_dmts(&d1, &d2, m, ls, 1e-9).unwrap();
            let (va, _) = quant::distance_aa(&a1, &a2, m, ls, 1e-9).unwrap();
            let (vn, _) = quant::distance_nu(&n1, &n2, m, ls, 1e-9).unwrap();
            let (vb, _) = quant::distance_dmts(&b1, &b2, m, ls, 1e-9).unwrap();
            for (tag, v) in [("aa", va), ("nu", vn), ("expanded", vb)] {
                if mi < 2 {
                    assert_eq!(vd, v, "case {case} metric {mi} via {tag}: {vd} vs {v}");
                } else {
                    assert_eq!(vd.is_finite(), v.is_finite(), "case {case} via {tag}: {vd} vs {v}");
                    if vd.is_finite() {
                        assert!((vd.value() - v.value()).abs() < 1e-6, "case {case} via {tag}: {vd} vs {v}");
                    }
                }
            }
        }
        checked += 1;
    }
    assert_eq!(checked, 200);
    finish("6 (translation invariance)", t0, 120.0);
}

#[test]
fn criterion_7_quotient_adjunction() {
    let t0 = Instant::now();
    let mut r = rng(701);
    let (dls, dpool) = discrete_structure(2);

    // Discrete CSP triples: the Boolean adjunction and the discrete
    // distance version. Samples exceeding the quotient's support budget are
    // skipped and resampled; the budget is defined behavior.
    let mut done = 0;
    let mut attempts = 0;
    while done < 100 {
        attempts += 1;
        assert!(attempts < 1000, "too many samples rejected by budget");
        let a1 = random_aa(&mut r, &dpool, 4);
        let a2 = random_aa(&mut r, &dpool, 4);
        let a3 = random_aa(&mut r, &dpool, 4);
        let q = match ops::quotient(&a3, &a1, &dls) {
            Ok(q) => q,
            Err(qspec::Error::Budget(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let composed = ops::compose(&a1, &a2, &dls).unwrap();
        let lhs = refine::refines_aa(&composed, &a3, &dls).unwrap().holds;
        let rhs = refine::refines_aa(&a2, &q.aa, &dls).unwrap().holds;
        assert_eq!(lhs, rhs, "Boolean adjunction failed on sample {attempts}");

        let m = TraceMetric::discrete();
        let (vl, _) = quant::distance_aa(&composed, &a3, &m, &dls, 1e-9).unwrap();
        let (vr, _) = quant::distance_aa(&a2, &q.aa, &m, &dls, 1e-9).unwrap();
        assert_eq!(vl, vr, "discrete distance adjunction failed on sample {attempts}");
        done += 1;
    }

    // Weighted triples under interval addition. The corpus keeps every
    // operand consistent (no state with an empty constraint set) and builds
    // the dividend as a composition, so the quotient problems are solvable
    // ones: an unimplementable state absorbs any remaining distance on the
    // composition side, which no admissible quotient edge set can imitate.
    // The distance from the composition can never exceed the distance into
    // the quotient, and on this corpus the two agree.
    let (wls, wpool) = weighted_structure(SyncOp::Plus, 6);
    let m = TraceMetric::discounting(0.9).unwrap();
    let mut done = 0;
    let mut attempts = 0;
    while done < 50 {
        attempts += 1;
        assert!(attempts < 1000, "too many samples rejected by budget");
        let a1 = common::random_consistent_aa(&mut r, &wpool, 2);
        let a2 = common::random_consistent_aa(&mut r, &wpool, 3);
        let b = common::random_consistent_aa(&mut r, &wpool, 2);
        let a3 = ops::compose(&a1, &b, &wls).unwrap();
        let q = match ops::quotient(&a3, &a1, &wls) {
            Ok(q) => q,
            Err(qspec::Error::Budget(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let composed = ops::compose(&a1, &a2, &wls).unwrap();
        let (vl, _) = quant::distance_aa(&composed, &a3, &m, &wls, 1e-9).unwrap();
        let (vr, _) = quant::distance_aa(&a2, &q.aa, &m, &wls, 1e-9).unwrap();
        assert!(
            vl <= vr || (vl.value() - vr.value()) < 1e-6,
            "sample {attempts}: composed distance {vl} exceeds quotient distance {vr}"
        );
        assert_eq!(vl.is_finite(), vr.is_finite(), "sample {attempts}: {vl} vs {vr}");
        if vl.is_finite() {
            assert!((vl.value() - vr.value()).abs() < 1e-6, "sample {attempts}: {vl} vs {vr}");
        }
        done += 1;
    }
    finish("7 (quotient adjunction)", t0, 300.0);
}

#[test]
fn criterion_8_lattice_and_soundness_laws() {
    let t0 = Instant::now();
    let mut r = rng(801);
    let (dls, dpool) = discrete_structure(2);
    let metrics = [
        TraceMetric::discrete(),
        TraceMetric::pointwise(),
        TraceMetric::discounting(0.9).unwrap(),
    ];

    // Disjunction equalities and the conjunction lower bound (both Boolean
    // and quantitative), on discrete and weighted corpora.
    let (wls, wpool_full) = weighted_structure(SyncOp::Csp, 8);
    let wpool = &[
        wpool_full[0].clone(),
        wpool_full[2].clone(),
        wpool_full[3].clone(),
        wpool_full[4].clone(),
    ][..];
    for case in 0..60 {
        let (ls, pool) = if case % 2 == 0 { (&dls, &dpool[..]) } else { (&wls, wpool) };
        let d1 = random_dmts(&mut r, pool, 4);
        let d2 = random_dmts(&mut r, pool, 4);
        let d3 = random_dmts(&mut r, pool, 4);
        let or12 = ops::disjoin(&d1, &d2);
        let and23 = ops::conjoin(&d2, &d3, ls).unwrap();

        let mr = |a: &Dmts, b: &Dmts| refine::refines_dmts(a, b, ls).unwrap().holds;
        assert_eq!(mr(&or12, &d3), mr(&d1, &d3) && mr(&d2, &d3));
        assert_eq!(mr(&d1, &and23), mr(&d1, &d2) && mr(&d1, &d3));

        for (mi, m) in metrics.iter().enumerate() {
            let dist = |a: &Dmts, b: &Dmts| quant::distance_dmts(a, b, m, ls, 1e-9).unwrap().0;
            let left = dist(&or12, &d3);
            let right = dist(&d1, &d3).max(dist(&d2, &d3));
            if mi < 2 {
                assert_eq!(left, right, "disjunction distance equality failed");
            } else {
                assert_eq!(left.is_finite(), right.is_finite());
                if left.is_finite() {
                    assert!((left.value() - right.value()).abs() < 2e-6);
                }
            }
            let conj = dist(&d1, &and23);
            let bound = dist(&d1, &d2).max(dist(&d1, &d3));
            assert!(
                conj >= bound || (conj.is_finite() && (conj.value() - bound.value()).abs() < 2e-6),
                "conjunction bound failed: {conj} < {bound}"
            );

            // Refinement forces distance zero; zero forces refinement for
            // these recursively separating metrics.
            let v = dist(&d1, &d2);
            assert_eq!(v <= Extended::new(1e-7), mr(&d1, &d2), "separation failed for metric {mi}: {v}");
        }
    }

    // Theorem 4's implementation-set laws by enumeration.
    for _ in 0..10 {
        let d1 = random_dmts(&mut r, &dpool, 2);
        let d2 = random_dmts(&mut r, &dpool, 2);
        let impls = |d: &Dmts| {
            refine::implementations(d, &dls, &dpool, 3, ENUMERATION_BUDGET).unwrap().systems
        };
        let union: BTreeSet<_> = impls(&d1).into_iter().chain(impls(&d2)).collect();
        let of_or: BTreeSet<_> = impls(&ops::disjoin(&d1, &d2)).into_iter().collect();
        assert_eq!(of_or, union);
        let inter: BTreeSet<_> = impls(&d1)
            .into_iter()
            .collect::<BTreeSet<_>>()
            .intersection(&impls(&d2).into_iter().collect())
            .cloned()
            .collect();
        let of_and: BTreeSet<_> = impls(&ops::conjoin(&d1, &d2, &dls).unwrap()).into_iter().collect();
        assert_eq!(of_and, inter);
    }

    // Relaxed semantics: disjunction is exact, conjunction only sound.
    {
        let (ls, pool) = (&wls, wpool);
        // Enumerate implementations over the two point labels of the pool.
        let alphabet = [wpool_full[0].clone(), wpool_full[1].clone()];
        let m = TraceMetric::pointwise();
        let alpha = Extended::new(1.0);
        for _ in 0..6 {
            let d1 = random_dmts(&mut r, pool, 2);
            let d2 = random_dmts(&mut r, pool, 2);
            let all = refine::enumerate_lts(&alphabet, 2, ENUMERATION_BUDGET);
            assert!(!all.truncated);
            let within = |d: &Dmts, i: &qspec::model::Lts| {
                quant::implements_within(i, &System::Dmts(d.clone()), alpha, &m, ls, 1e-9)
                    .unwrap()
                    .holds
            };
            let or12 = ops::disjoin(&d1, &d2);
            let and12 = ops::conjoin(&d1, &d2, ls).unwrap();
            for i in &all.systems {
                let in1 = within(&d1, i);
                let in2 = within(&d2, i);
                assert_eq!(within(&or12, i), in1 || in2, "relaxed disjunction semantics");
                if within(&and12, i) {
                    assert!(in1 && in2, "relaxed conjunction soundness");
                }
            }
        }
    }

    // Thorough distance is bounded by modal distance (and thorough
    // refinement follows from modal refinement) at desk scale.
    let m = TraceMetric::pointwise();
    for case in 0..8 {
        let d1 = random_dmts(&mut r, &dpool, 3);
        let d2 = random_dmts(&mut r, &dpool, 3);
        let (md, _) = quant::distance_dmts(&d1, &d2, &m, &dls, 1e-9).unwrap();
        let (thd, truncated) =
            quant::thorough_distance_bounded(&d1, &d2, &m, &dls, &dpool, 3, ENUMERATION_BUDGET, 1e-9).unwrap();
        assert!(!truncated);
        assert!(thd <= md, "case {case}: thorough {thd} exceeds modal {md}");
        if refine::refines_dmts(&d1, &d2, &dls).unwrap().holds {
            let verdict =
                refine::thorough_refines_bounded(&d1, &d2, &dls, &dpool, 3, ENUMERATION_BUDGET).unwrap();
            assert!(verdict.holds, "modal refinement must imply bounded thorough refinement");
            assert_eq!(thd, Extended::ZERO);
        }
    }

    // The composition bound for discounting under interval addition.
    let (wls, wpool) = weighted_structure(SyncOp::Plus, 6);
    let m = TraceMetric::discounting(0.9).unwrap();
    let p = quant::composition_bound(&m, SyncOp::Plus).unwrap();
    for case in 0..30 {
        let s1 = random_aa(&mut r, &wpool, 3);
        let s2 = random_aa(&mut r, &wpool, 3);
        let s3 = random_aa(&mut r, &wpool, 3);
        let s4 = random_aa(&mut r, &wpool, 3);
        let left = ops::compose(&s1, &s2, &wls).unwrap();
        let right = ops::compose(&s3, &s4, &wls).unwrap();
        let (v, _) = quant::distance_aa(&left, &right, &m, &wls, 1e-9).unwrap();
        let (v13, _) = quant::distance_aa(&s1, &s3, &m, &wls, 1e-9).unwrap();
        let (v24, _) = quant::distance_aa(&s2, &s4, &m, &wls, 1e-9).unwrap();
        let bound = p.apply(v13, v24);
        assert!(
            v <= bound || (v.is_finite() && bound.is_finite() && v.value() <= bound.value() + 1e-6),
            "case {case}: composed distance {v} above bound {bound}"
        );
    }
    finish("8 (lattice and soundness laws)", t0, 600.0);
}
