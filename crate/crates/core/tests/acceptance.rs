//! Acceptance suite: one pass/fail line per criterion, exact-arithmetic
//! oracles throughout. Criterion 11 repeats criteria 1-10 with identical
//! seeds and demands byte-identical JSON reports.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde_json::{json, Value};

use circle_rgg::error::CircleError;
use circle_rgg::exact::{parse_quad, rat, QuadScalar};
use circle_rgg::geometry::{short_arc, Arc, Circle};
use circle_rgg::iso::{
    certificate, insert_class, non_iso_evidence, run_back_and_forth, verify_certificate,
    verify_partial_iso, ClassBackAndForth,
};
use circle_rgg::oracle::{GraphOracle, VertexId};
use circle_rgg::recovery::{Budgets, Recovery};

fn oracle(l: &str, p: (i64, i64), seed: u64) -> GraphOracle {
    let circle = Circle::new(parse_quad(l).unwrap()).unwrap();
    GraphOracle::new(circle, rat(p.0, p.1), seed).unwrap()
}

fn q(n: i64, d: i64) -> QuadScalar {
    QuadScalar::from_rational(rat(n, d))
}

// ----------------------------------------------------------------------
// 1. Unit threshold + edge density on a 500-vertex snapshot
// ----------------------------------------------------------------------
fn c01_unit_threshold() -> Result<Value, CircleError> {
    let mut o = oracle("7/2", (1, 2), 101);
    let l = o.circle().circumference().clone();
    for i in 0..500 {
        o.insert(l.mul_rat(&rat(i, 500)))?;
    }
    let snap = o.snapshot(None)?;
    let one = QuadScalar::one();
    let ids = snap.ids().to_vec();
    let mut unit_pairs = 0u64;
    let mut edges = 0u64;
    let mut bad_edges = 0u64;
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let d = snap.point_of(ids[i])?.dist(snap.point_of(ids[j])?)?;
            let adj = snap.adjacent(ids[i], ids[j])?;
            if adj && d >= one {
                bad_edges += 1;
            }
            if d < one {
                unit_pairs += 1;
                if adj {
                    edges += 1;
                }
            }
        }
    }
    let n = unit_pairs as f64;
    let dev = (edges as f64 - 0.5 * n).abs();
    let three_sigma = 3.0 * (n * 0.25).sqrt();
    Ok(json!({
        "pass": bad_edges == 0 && dev <= three_sigma,
        "unit_pairs": unit_pairs,
        "edges": edges,
        "edges_beyond_unit": bad_edges,
        "deviation": dev,
        "three_sigma": three_sigma,
    }))
}

// ----------------------------------------------------------------------
// 2. Graph distance = floor(||u-v||) + 1 on densified snapshots
// ----------------------------------------------------------------------
/// Insert `hops - 1` helper vertices near the ideal equally-spaced positions
/// on the short arc between u and v, so that a path of exactly `hops` edges
/// exists. Each helper sits within slack/(4*hops) of its ideal spot, which
/// keeps every hop strictly below 1; only an unlucky edge coin can force a
/// resample.
fn bridge_pair(
    o: &mut GraphOracle,
    u: VertexId,
    v: VertexId,
    hops: i64,
    stream: &mut u64,
) -> Result<bool, CircleError> {
    let pu = o.point(u)?.clone();
    let pv = o.point(v)?.clone();
    let arc = short_arc(&pu, &pv)?;
    let slack = &QuadScalar::from_int(hops) - arc.length();
    let w = slack.mul_rat(&rat(1, 4 * hops));
    let start_is_u = arc.start().pos() == pu.pos();
    for _ in 0..16 {
        let mut chain = vec![if start_is_u { u } else { v }];
        for i in 1..hops {
            let ideal = arc.at(&rat(i, hops));
            let sub = Arc::new(
                arc.circle(),
                ideal.pos() - &w,
                w.mul_rat(&rat(2, 1)),
                false,
                false,
            )?;
            chain.push(o.sample_vertex_in_arc(&sub, *stream)?);
            *stream += 1;
        }
        chain.push(if start_is_u { v } else { u });
        let mut good = true;
        for e in chain.windows(2) {
            good &= o.adjacent(e[0], e[1])?;
        }
        if good {
            return Ok(true);
        }
    }
    Ok(false)
}

fn c02_floor_dist() -> Result<Value, CircleError> {
    let mut o = oracle("13/2", (99, 100), 202);
    o.insert(QuadScalar::zero())?;
    o.densify(&q(1, 12), 0)?;
    let base = o.snapshot(None)?;
    let ids = base.ids().to_vec();
    let one = QuadScalar::one();

    let mut all_pairs: Vec<(VertexId, VertexId)> = Vec::new();
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            all_pairs.push((ids[i], ids[j]));
        }
    }
    let mut rng = o.stream("acceptance-2", 0);
    all_pairs.shuffle(&mut rng);

    let mut far_checked = 0;
    let mut near_checked = 0;
    let mut failures = 0;
    let mut bridged: Vec<(VertexId, VertexId, i64)> = Vec::new();
    let mut stream = 1u64 << 20;
    for &(u, v) in &all_pairs {
        let d = base.point_of(u)?.dist(base.point_of(v)?)?;
        let bfs = base.graph_distance(u, v)?;
        if d >= one && far_checked < 100 {
            far_checked += 1;
            let hops: i64 = i64::try_from(d.floor() + 1).expect("small floor");
            let expected: Option<u64> = hops.try_into().map(Some).unwrap_or(None);
            match bfs {
                b if b == expected => {}
                Some(b) if Some(b) > expected => {
                    // The base pool lacks witnesses near the ideal relay
                    // positions (hop windows can be arbitrarily narrow when
                    // d sits just under an integer). BFS >= floor(d)+1 holds
                    // on any pool; densify the arc and re-verify the upper
                    // bound below.
                    if bridge_pair(&mut o, u, v, hops, &mut stream)? {
                        bridged.push((u, v, hops));
                    } else {
                        failures += 1;
                    }
                }
                _ => failures += 1,
            }
        } else if d < one && !d.is_zero() && near_checked < 100 {
            near_checked += 1;
            match bfs {
                Some(1) | Some(2) => {}
                Some(b) if b > 2 => {
                    if bridge_pair(&mut o, u, v, 2, &mut stream)? {
                        bridged.push((u, v, 2));
                    } else {
                        failures += 1;
                    }
                }
                _ => failures += 1,
            }
        }
        if far_checked >= 100 && near_checked >= 100 {
            break;
        }
    }
    if !bridged.is_empty() {
        let dense = o.snapshot(None)?;
        for &(u, v, hops) in &bridged {
            let expected: Option<u64> = hops.try_into().map(Some).unwrap_or(None);
            if dense.graph_distance(u, v)? != expected {
                failures += 1;
            }
        }
    }
    Ok(json!({
        "pass": failures == 0 && far_checked == 100,
        "pool": ids.len(),
        "far_pairs": far_checked,
        "near_pairs": near_checked,
        "bridged": bridged.len(),
        "failures": failures,
    }))
}

// ----------------------------------------------------------------------
// 3. alpha recovery: |alpha_hat - 2/L| <= 3/64, exact bracket
// ----------------------------------------------------------------------
fn c03_alpha() -> Result<Value, CircleError> {
    let mut results = Vec::new();
    let mut pass = true;
    for (idx, l) in ["5/2", "3", "4", "2+1*sqrt2"].iter().enumerate() {
        let mut o = oracle(l, (19, 20), 303 + idx as u64);
        o.insert(QuadScalar::zero())?;
        let mut r = Recovery::new(&mut o, Budgets::default());
        let alpha = r.estimate_alpha(64)?;
        let alpha_q = QuadScalar::from_rational(alpha.clone());
        let two_over_l = QuadScalar::from_int(2)
            .div(r.oracle().circle().circumference())?;
        let diff = &alpha_q - &two_over_l;
        let ok = diff <= q(3, 64) && diff >= q(-3, 64);
        pass &= ok;
        results.push(json!({
            "L": l,
            "alpha_hat": alpha.to_string(),
            "in_bracket": ok,
        }));
    }
    Ok(json!({ "pass": pass, "per_l": results }))
}

// ----------------------------------------------------------------------
// 4. Arc recovery equals geometric short-arc membership, 50 pairs/regime
// ----------------------------------------------------------------------
fn c04_arc_recovery() -> Result<Value, CircleError> {
    let regimes = [("7/2", (1i64, 4i64), 404u64), ("5/2", (1, 8), 405), ("23/10", (1, 12), 406)];
    let mut per_regime = Vec::new();
    let mut pass = true;
    for (l, gap, seed) in regimes {
        let mut o = oracle(l, (19, 20), seed);
        o.insert(QuadScalar::zero())?;
        o.densify(&q(gap.0, gap.1), 0)?;

        let ids: Vec<VertexId> = o.ids().collect();
        let mut adjacent_pairs = Vec::new();
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                if o.adjacent(ids[i], ids[j])? {
                    adjacent_pairs.push((ids[i], ids[j]));
                }
            }
        }
        let mut rng = o.stream("acceptance-4", 0);
        adjacent_pairs.shuffle(&mut rng);
        adjacent_pairs.truncate(50);

        let mut correct = 0;
        let mut budget_flagged = 0;
        let mut wrong = 0;
        for &(u, v) in &adjacent_pairs {
            // fresh oracle per pair (same seed, so the same base pool):
            // recovery helpers from one pair then never inflate the next
            // pair's call-time pool
            let mut fresh = oracle(l, (19, 20), seed);
            fresh.insert(QuadScalar::zero())?;
            fresh.densify(&q(gap.0, gap.1), 0)?;
            let pa = fresh.point(u)?.clone();
            let pb = fresh.point(v)?.clone();
            let arc = short_arc(&pa, &pb)?;
            let expected: BTreeSet<VertexId> = ids
                .iter()
                .copied()
                .filter(|&w| arc.contains(fresh.point(w).unwrap()))
                .collect();
            let mut r = Recovery::new(&mut fresh, Budgets::default());
            match r.recover_arc(u, v) {
                Ok(got) if got == expected => correct += 1,
                Ok(_) => wrong += 1,
                Err(CircleError::BudgetExhausted { .. }) => budget_flagged += 1,
                Err(e) => return Err(e),
            }
        }
        let ok = correct == adjacent_pairs.len() && adjacent_pairs.len() == 50;
        pass &= ok;
        per_regime.push(json!({
            "L": l,
            "pairs": adjacent_pairs.len(),
            "correct": correct,
            "budget_flagged": budget_flagged,
            "wrong": wrong,
        }));
    }
    Ok(json!({ "pass": pass, "per_regime": per_regime }))
}

// ----------------------------------------------------------------------
// 5. Good paths: good, winding k, minimal length
// ----------------------------------------------------------------------
fn c05_good_paths() -> Result<Value, CircleError> {
    let mut cases: Vec<(&str, i64, u64)> = Vec::new();
    for j in [3i64, 5, 7, 9, 11, 13] {
        cases.push(("7/2", j, 1));
        cases.push(("2+1*sqrt2", j, 1));
    }
    for j in [4i64, 6, 8, 10, 12] {
        cases.push(("7/2", j, 2));
        cases.push(("2+1*sqrt2", j, 2));
    }
    cases.push(("7/2", 8, 3));
    cases.push(("2+1*sqrt2", 8, 3));
    cases.push(("7/2", 12, 3));
    cases.truncate(25);

    let mut checked = 0;
    let mut failures = Vec::new();
    for (idx, (l, j, k)) in cases.iter().enumerate() {
        let mut o = oracle(l, (19, 20), 500 + idx as u64);
        let u = o.insert(QuadScalar::zero())?;
        let v = o.insert(q(*j, 16))?;
        let ell = q(*j, 16);
        let total = &ell
            + &o.circle()
                .circumference()
                .mul_rat(&rat(*k as i64, 1));
        let minimal: u64 = (total.floor() + 1i64).try_into().unwrap();

        let mut r = Recovery::new(&mut o, Budgets::default());
        let path = r.build_good_path(u, v, *k)?;
        let cert = r.certify_good_path(&path, *k)?;
        checked += 1;
        if !(cert.holds() && cert.winding == *k && cert.length as u64 == minimal) {
            failures.push(json!({ "L": l, "j": j, "k": k, "cert": format!("{cert:?}") }));
        }
    }
    Ok(json!({
        "pass": failures.is_empty() && checked == 25,
        "checked": checked,
        "failures": failures,
    }))
}

// ----------------------------------------------------------------------
// 6. Distance sequences equal floor(||u-v|| + kL) for k <= 25
// ----------------------------------------------------------------------
fn c06_distance_sequences() -> Result<Value, CircleError> {
    let mut checked = 0;
    let mut failures = 0;
    for (l, seed) in [("3", 601u64), ("2+1*sqrt2", 602)] {
        let mut o = oracle(l, (19, 20), seed);
        let u = o.insert(QuadScalar::zero())?;
        let mut pairs = Vec::new();
        for j in 1..=14i64 {
            let v = o.insert(q(j, 20))?;
            if o.adjacent(u, v)? {
                pairs.push((v, q(j, 20)));
            }
        }
        pairs.truncate(10);
        let big_l = o.circle().circumference().clone();
        let mut r = Recovery::new(&mut o, Budgets::default());
        for (v, ell) in pairs {
            let got = r.recover_distance_sequence(u, v, 25)?;
            let expected: Vec<u64> = (1..=25u64)
                .map(|k| {
                    let total = &ell + &big_l.mul_rat(&rat(k as i64, 1));
                    total.floor().try_into().unwrap()
                })
                .collect();
            checked += 1;
            if got != expected {
                failures += 1;
            }
        }
    }
    Ok(json!({
        "pass": failures == 0 && checked == 20,
        "checked": checked,
        "failures": failures,
    }))
}

// ----------------------------------------------------------------------
// 7. Irrational distance recovery: containment, width < 1/100, nesting
// ----------------------------------------------------------------------
fn c07_irrational_distance() -> Result<Value, CircleError> {
    let mut o = oracle("2+1*sqrt2", (19, 20), 707);
    let u = o.insert(QuadScalar::zero())?;
    let mut pairs = Vec::new();
    for j in 1..=24i64 {
        let v = o.insert(q(j, 32))?;
        if o.adjacent(u, v)? {
            pairs.push((v, q(j, 32)));
        }
    }
    pairs.truncate(20);
    let n_pairs = pairs.len();

    let mut r = Recovery::new(&mut o, Budgets::default());
    let hundredth = q(1, 100);
    let mut failures = 0;
    let mut max_width = QuadScalar::zero();
    for (v, exact) in &pairs {
        let interval = r.recover_distance_irrational(u, *v, 200)?;
        let width = interval.width();
        if !(interval.contains(exact) && width < hundredth) {
            failures += 1;
        }
        if width > max_width {
            max_width = width;
        }
    }
    let mut nesting_ok = true;
    for (v, exact) in pairs.iter().take(3) {
        let i50 = r.recover_distance_irrational(u, *v, 50)?;
        let i100 = r.recover_distance_irrational(u, *v, 100)?;
        let i200 = r.recover_distance_irrational(u, *v, 200)?;
        nesting_ok &= i100.contained_in(&i50)
            && i200.contained_in(&i100)
            && i50.contains(exact)
            && i100.contains(exact);
    }
    Ok(json!({
        "pass": failures == 0 && nesting_ok && n_pairs == 20,
        "pairs": n_pairs,
        "failures": failures,
        "max_width": max_width.to_f64(),
        "nesting_ok": nesting_ok,
    }))
}

// ----------------------------------------------------------------------
// 8. Back-and-forth runs, invariants re-verify, certificate verifies
// ----------------------------------------------------------------------
fn seeded_idf(l: &str, p: (i64, i64), seed: u64, extra: usize) -> Result<GraphOracle, CircleError> {
    let circle = Circle::new(parse_quad(l).unwrap()).unwrap();
    let mut o = GraphOracle::new(circle.clone(), rat(p.0, p.1), seed)?.with_idf()?;
    o.insert(QuadScalar::zero())?;
    let almost_full = circle
        .circumference()
        .mul_rat(&rat((1 << 20) - 1, 1 << 20));
    let arc = circle_rgg::geometry::Arc::new(
        &circle,
        QuadScalar::zero(),
        almost_full,
        false,
        false,
    )?;
    for i in 0..extra {
        o.sample_vertex_in_arc(&arc, i as u64)?;
    }
    Ok(o)
}

fn c08_back_and_forth() -> Result<Value, CircleError> {
    let combos = [
        ("5/2", (1i64, 2i64), (1i64, 2i64), 801u64, 802u64),
        ("5/2", (3, 10), (7, 10), 803, 804),
        ("7/2", (1, 2), (1, 2), 805, 806),
        ("7/2", (3, 10), (7, 10), 807, 808),
    ];
    let mut runs = Vec::new();
    let mut pass = true;
    for (l, p, p2, sg, sh) in combos {
        let mut g = seeded_idf(l, p, sg, 4)?;
        let mut h = seeded_idf(l, p2, sh, 4)?;
        let iso = run_back_and_forth(&mut g, &mut h, 200, Budgets::default())?;
        verify_partial_iso(&g, &h, &iso)?;
        let cert = certificate(&g, &h, &iso)?;
        let independent = verify_certificate(&cert).is_ok();
        pass &= independent && iso.len() >= 9;
        runs.push(json!({
            "L": l,
            "p": format!("{}/{}", p.0, p.1),
            "p2": format!("{}/{}", p2.0, p2.1),
            "pairs": iso.len(),
            "certificate_verifies": independent,
        }));
    }
    Ok(json!({ "pass": pass, "runs": runs }))
}

// ----------------------------------------------------------------------
// 9. Q ∩ S_L class variant: exact +i/m translation, re-verification
// ----------------------------------------------------------------------
fn c09_class_variant() -> Result<Value, CircleError> {
    // origin classes are forced onto each other by f(0)=0, so scan for a
    // seed pair whose origin-class adjacency patterns agree
    let p = (99i64, 100i64);
    let build_g = || -> Result<GraphOracle, CircleError> {
        let mut g = oracle("5/2", p, 901);
        for rep in [q(1, 8), q(1, 4), q(3, 8)] {
            insert_class(&mut g, rep)?;
        }
        Ok(g)
    };
    let build_h = |seed: u64| -> Result<GraphOracle, CircleError> {
        let mut h = oracle("5/2", p, seed);
        for rep in [q(1, 16), q(5, 16)] {
            insert_class(&mut h, rep)?;
        }
        Ok(h)
    };
    let mut chosen = None;
    for seed_h in 902..1000u64 {
        let mut g = build_g()?;
        let mut h = build_h(seed_h)?;
        match ClassBackAndForth::new(&mut g, &mut h, Budgets::default()) {
            Ok(_) => {
                chosen = Some(seed_h);
                break;
            }
            Err(CircleError::InvariantViolation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let seed_h = chosen.ok_or_else(|| {
        CircleError::InsufficientDensity("no compatible class seed in range".into())
    })?;

    let mut g = build_g()?;
    let mut h = build_h(seed_h)?;
    let mut bf = ClassBackAndForth::new(&mut g, &mut h, Budgets::default())?;
    bf.run(50)?;
    let reps = bf.rep_pairs().to_vec();
    bf.verify()?;

    // exact translation check: f(s + i/m) = f(s) + i/m for every class
    let half = q(1, 2);
    let mut translation_ok = true;
    for &(gu, hv) in &reps {
        let s = g.point(gu)?.pos().clone();
        let t = h.point(hv)?.pos().clone();
        for i in 0..5i64 {
            let member = g.circle().point(&s + &half.mul_rat(&rat(i, 1)).clone());
            let image = h.circle().point(&t + &half.mul_rat(&rat(i, 1)).clone());
            translation_ok &= g.lookup(&member).is_some() && h.lookup(&image).is_some();
        }
    }
    Ok(json!({
        "pass": translation_ok && reps.len() >= 6,
        "seed_h": seed_h,
        "class_pairs": reps.len(),
        "translation_exact": translation_ok,
    }))
}

// ----------------------------------------------------------------------
// 10. Irrational non-isomorphism evidence
// ----------------------------------------------------------------------
fn c10_non_iso() -> Result<Value, CircleError> {
    let g = oracle("2+1*sqrt2", (1, 2), 1001);
    let h = oracle("2+1*sqrt2", (1, 2), 1002);
    let report = non_iso_evidence(&g, &h, 20, 50)?;
    let worst = report
        .candidates
        .iter()
        .filter_map(|c| c.first_disagreement)
        .max();
    Ok(json!({
        "pass": report.all_disagree,
        "candidates": report.candidates.len(),
        "worst_first_disagreement": worst,
    }))
}

// ----------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Result<Value, CircleError>);

const CRITERIA: &[Criterion] = &[
    ("unit threshold + edge density", c01_unit_threshold),
    ("graph distance = floor(d) + 1", c02_floor_dist),
    ("alpha recovery bracket", c03_alpha),
    ("arc recovery vs geometry", c04_arc_recovery),
    ("good paths: winding + minimal length", c05_good_paths),
    ("distance sequences", c06_distance_sequences),
    ("irrational distance intervals", c07_irrational_distance),
    ("back-and-forth + certificates", c08_back_and_forth),
    ("class variant exact translation", c09_class_variant),
    ("non-isomorphism evidence", c10_non_iso),
];

fn run_all() -> Vec<(usize, &'static str, Result<Value, CircleError>)> {
    CRITERIA
        .iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let start = std::time::Instant::now();
            let out = f();
            eprintln!("  [criterion {} took {:.1?}]", i + 1, start.elapsed());
            (i + 1, *name, out)
        })
        .collect()
}

#[test]
fn acceptance() {
    let first = run_all();
    let mut all_pass = true;
    let mut reports = Vec::new();
    for (i, name, result) in &first {
        let (pass, report) = match result {
            Ok(v) => (v["pass"].as_bool().unwrap_or(false), v.to_string()),
            Err(e) => (false, format!("{{\"error\":\"{e}\"}}")),
        };
        println!(
            "criterion {i:2}: {} — {name}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            println!("  report: {report}");
        }
        all_pass &= pass;
        reports.push(report);
    }

    // 11: byte-identical reports on repetition with identical seeds
    let second = run_all();
    let mut deterministic = true;
    for ((_, _, a), (_, _, b)) in first.iter().zip(&second) {
        let sa = match a {
            Ok(v) => v.to_string(),
            Err(e) => e.to_string(),
        };
        let sb = match b {
            Ok(v) => v.to_string(),
            Err(e) => e.to_string(),
        };
        deterministic &= sa == sb;
    }
    println!(
        "criterion 11: {} — determinism (byte-identical reports)",
        if deterministic { "PASS" } else { "FAIL" }
    );
    all_pass &= deterministic;

    assert!(all_pass, "acceptance criteria failed; see lines above");
}
