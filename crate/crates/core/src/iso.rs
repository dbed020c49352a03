//! Back-and-forth isomorphism construction for rational L.
//!
//! For rational L = l/m and integer-distance-free vertex sets containing 0,
//! two graphs in G_{L,idf} are isomorphic; the construction maps each vertex
//! v = q_v/m + r_v to an image with the same q and the same relative order
//! of residues r (an extended step-isometry), choosing images inside the
//! candidate interval I = q_s/m + (a, b) by rejection sampling against the
//! required adjacency pattern.
//!
//! Also provided: the equivalence-class variant for Q ∩ S_L (whole classes
//! v + (1/m){0,..,l-1} map at once by an exact +i/m translation), JSON
//! certificates with independent re-verification, and disagreement evidence
//! against candidate isometries when L is irrational.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::CircleError;
use crate::exact::{parse_quad, parse_rational, rat, QuadScalar, Rational};
use crate::geometry::{qr_decompose, Arc, Circle, CirclePoint};
use crate::oracle::{GraphOracle, VertexId};
use crate::recovery::Budgets;

/// The back-and-forth state f_n: S_n -> S'_n with step-isometry bookkeeping.
#[derive(Debug, Clone)]
pub struct PartialIso {
    pairs: Vec<(VertexId, VertexId)>,
    fwd: BTreeMap<VertexId, VertexId>,
    bwd: BTreeMap<VertexId, VertexId>,
    qr_src: BTreeMap<VertexId, (BigInt, QuadScalar)>,
    qr_dst: BTreeMap<VertexId, (BigInt, QuadScalar)>,
    steps: usize,
}

impl PartialIso {
    pub fn pairs(&self) -> &[(VertexId, VertexId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn image(&self, u: VertexId) -> Option<VertexId> {
        self.fwd.get(&u).copied()
    }

    pub fn preimage(&self, v: VertexId) -> Option<VertexId> {
        self.bwd.get(&v).copied()
    }
}

/// Builder owning both oracles for the duration of a run.
pub struct BackAndForth<'a> {
    g: &'a mut GraphOracle,
    h: &'a mut GraphOracle,
    iso: PartialIso,
    budgets: Budgets,
    stream: u64,
    m: BigInt,
}

impl<'a> BackAndForth<'a> {
    /// Both oracles must be in idf mode on the same rational circle, with
    /// vertex 0 at position 0 (the designated origin).
    pub fn new(
        g: &'a mut GraphOracle,
        h: &'a mut GraphOracle,
        budgets: Budgets,
    ) -> Result<Self, CircleError> {
        if g.circle() != h.circle() {
            return Err(CircleError::MismatchedCircumference);
        }
        let (_, m) = g
            .circle()
            .rational_parts()
            .ok_or(CircleError::IrrationalCircumference)?;
        if g.idf_m().is_none() || h.idf_m().is_none() {
            return Err(CircleError::Usage(
                "both oracles must be in idf mode".into(),
            ));
        }
        for o in [&*g, &*h] {
            if o.is_empty() || !o.point(VertexId(0))?.pos().is_zero() {
                return Err(CircleError::Usage(
                    "vertex 0 must sit at position 0 in both pools".into(),
                ));
            }
        }
        let origin_qr = (BigInt::from(0), QuadScalar::zero());
        let mut iso = PartialIso {
            pairs: vec![(VertexId(0), VertexId(0))],
            fwd: BTreeMap::new(),
            bwd: BTreeMap::new(),
            qr_src: BTreeMap::new(),
            qr_dst: BTreeMap::new(),
            steps: 0,
        };
        iso.fwd.insert(VertexId(0), VertexId(0));
        iso.bwd.insert(VertexId(0), VertexId(0));
        iso.qr_src.insert(VertexId(0), origin_qr.clone());
        iso.qr_dst.insert(VertexId(0), origin_qr);
        Ok(BackAndForth {
            g,
            h,
            iso,
            budgets,
            stream: 0,
            m,
        })
    }

    pub fn iso(&self) -> &PartialIso {
        &self.iso
    }

    pub fn into_iso(self) -> PartialIso {
        self.iso
    }

    fn next_stream(&mut self) -> u64 {
        self.stream += 1;
        self.stream
    }

    fn oracles(&mut self, forward: bool) -> (&mut GraphOracle, &mut GraphOracle) {
        if forward {
            (&mut *self.g, &mut *self.h)
        } else {
            (&mut *self.h, &mut *self.g)
        }
    }

    /// Candidate interval I = q_s/m + (a, b) for the next image of s:
    /// a is the largest image residue among mapped vertices with smaller
    /// residue, b the smallest among those with larger residue (default 1/m).
    /// Any integer-distance-free point of I extends the step-isometry.
    pub fn candidate_interval(&self, s: VertexId) -> Result<Arc, CircleError> {
        self.interval(s, true)
    }

    fn interval(&self, s: VertexId, forward: bool) -> Result<Arc, CircleError> {
        let src = if forward { &*self.g } else { &*self.h };
        if (forward && self.iso.fwd.contains_key(&s))
            || (!forward && self.iso.bwd.contains_key(&s))
        {
            return Err(CircleError::Usage("vertex already mapped".into()));
        }
        let (q_s, r_s) = qr_decompose(src.point(s)?, &self.m)?;
        let mut a = QuadScalar::zero();
        let mut b = QuadScalar::from_rational(Rational::new(BigInt::one(), self.m.clone()));
        for &(u, v) in &self.iso.pairs {
            let (su, tv) = if forward { (u, v) } else { (v, u) };
            let r_u = if forward {
                &self.iso.qr_src[&su].1
            } else {
                &self.iso.qr_dst[&su].1
            };
            let r_fu = if forward {
                &self.iso.qr_dst[&tv].1
            } else {
                &self.iso.qr_src[&tv].1
            };
            if *r_u == r_s {
                return Err(CircleError::InvariantViolation(
                    "residue collision with a mapped vertex (idf violation)".into(),
                ));
            }
            if *r_u < r_s {
                if *r_fu > a {
                    a = r_fu.clone();
                }
            } else if *r_fu < b {
                b = r_fu.clone();
            }
        }
        let width = &b - &a;
        if !width.is_positive() {
            return Err(CircleError::InvariantViolation(
                "empty candidate interval".into(),
            ));
        }
        let start = QuadScalar::from_rational(Rational::new(q_s, self.m.clone())) + a;
        Arc::new(src.circle(), start, width, false, false)
    }

    /// Map s forward into the second oracle; already-mapped vertices are
    /// skipped (returning their existing image).
    pub fn forth_step(&mut self, s: VertexId) -> Result<VertexId, CircleError> {
        if let Some(v) = self.iso.image(s) {
            return Ok(v);
        }
        self.step(s, true)
    }

    /// Find a preimage for t in the first oracle; mirror of `forth_step`.
    pub fn back_step(&mut self, t: VertexId) -> Result<VertexId, CircleError> {
        if let Some(u) = self.iso.preimage(t) {
            return Ok(u);
        }
        self.step(t, false)
    }

    fn step(&mut self, s: VertexId, forward: bool) -> Result<VertexId, CircleError> {
        let arc = self.interval(s, forward)?;

        // required adjacency pattern over the mapped image side; images
        // farther than 1 + |I| from the interval midpoint cannot be adjacent
        // to any candidate and are dropped from the non-adjacency list
        let mid = arc.midpoint();
        let reach = QuadScalar::one() + arc.length().mul_rat(&rat(1, 2));
        let mut need_adj: Vec<CirclePoint> = Vec::new();
        let mut need_non: Vec<CirclePoint> = Vec::new();
        {
            let (src, dst) = if forward {
                (&*self.g, &*self.h)
            } else {
                (&*self.h, &*self.g)
            };
            for &(u, v) in &self.iso.pairs {
                let (su, tv) = if forward { (u, v) } else { (v, u) };
                let image = dst.point(tv)?.clone();
                if src.adjacent(s, su)? {
                    need_adj.push(image);
                } else if mid.dist(&image)? < reach {
                    need_non.push(image);
                }
            }
        }

        let qr_s = {
            let src = if forward { &*self.g } else { &*self.h };
            qr_decompose(src.point(s)?, &self.m)?
        };
        let scale = self.budgets.scale;
        let trial_cap = self.budgets.trial_cap;
        let stream = self.next_stream();
        let label = if forward { "iso-forth" } else { "iso-back" };
        let budget = {
            let dst = if forward { &*self.h } else { &*self.g };
            dst.witness_budget(need_adj.len(), need_non.len(), scale)
                .min(trial_cap)
        };
        let mut found = None;
        {
            let (_, dst) = self.oracles(forward);
            let mut rng = dst.stream(label, stream);
            for _ in 0..budget {
                let cand = dst.sample_position_in_arc(&arc, &mut rng);
                if dst.lookup(&cand).is_some() {
                    continue;
                }
                if need_adj.iter().any(|a| !dst.adjacent_points(&cand, a)) {
                    continue;
                }
                if need_non.iter().any(|b| dst.adjacent_points(&cand, b)) {
                    continue;
                }
                match dst.insert(cand.pos().clone()) {
                    Ok(id) => {
                        found = Some(id);
                        break;
                    }
                    Err(CircleError::DuplicatePosition) | Err(CircleError::Usage(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
        let id = found.ok_or_else(|| CircleError::BudgetExhausted {
            what: format!("back-and-forth step for vertex {s}"),
            tried: budget,
        })?;
        let qr_new = {
            let dst = if forward { &*self.h } else { &*self.g };
            qr_decompose(dst.point(id)?, &self.m)?
        };
        debug_assert_eq!(qr_new.0, qr_s.0);
        let (pair, su, tv) = if forward {
            ((s, id), s, id)
        } else {
            ((id, s), id, s)
        };
        let (qr_src_entry, qr_dst_entry) = if forward {
            (qr_s, qr_new)
        } else {
            (qr_new, qr_s)
        };
        self.iso.pairs.push(pair);
        self.iso.fwd.insert(su, tv);
        self.iso.bwd.insert(tv, su);
        self.iso.qr_src.insert(su, qr_src_entry);
        self.iso.qr_dst.insert(tv, qr_dst_entry);
        self.iso.steps += 1;
        verify_partial_iso(self.g, self.h, &self.iso)?;
        Ok(id)
    }

    /// N rounds of forth + back over the interleaved pool enumerations
    /// (insertion order); exhausted enumerations contribute skips.
    pub fn run(&mut self, rounds: usize) -> Result<(), CircleError> {
        for n in 1..=rounds {
            if n < self.g.len() {
                self.forth_step(VertexId(n))?;
            }
            if n < self.h.len() {
                self.back_step(VertexId(n))?;
            }
        }
        verify_partial_iso(self.g, self.h, &self.iso)
    }
}

/// Run N back-and-forth rounds and return the resulting partial isomorphism.
pub fn run_back_and_forth(
    g: &mut GraphOracle,
    h: &mut GraphOracle,
    rounds: usize,
    budgets: Budgets,
) -> Result<PartialIso, CircleError> {
    let mut bf = BackAndForth::new(g, h, budgets)?;
    bf.run(rounds)?;
    Ok(bf.into_iso())
}

/// Full quadratic re-check of both invariants: f(0) = 0, exact q equality
/// and residue-order preservation, and adjacency equivalence on all pairs.
pub fn verify_partial_iso(
    g: &GraphOracle,
    h: &GraphOracle,
    iso: &PartialIso,
) -> Result<(), CircleError> {
    let (_, m) = g
        .circle()
        .rational_parts()
        .ok_or(CircleError::IrrationalCircumference)?;
    if iso.image(VertexId(0)) != Some(VertexId(0)) {
        return Err(CircleError::InvariantViolation("f(0) != 0".into()));
    }
    let mut qr: Vec<((BigInt, QuadScalar), (BigInt, QuadScalar))> = Vec::new();
    for &(u, v) in iso.pairs() {
        let qu = qr_decompose(g.point(u)?, &m)?;
        let qv = qr_decompose(h.point(v)?, &m)?;
        if qu.0 != qv.0 {
            return Err(CircleError::InvariantViolation(format!(
                "q mismatch on pair ({u}, {v})"
            )));
        }
        qr.push((qu, qv));
    }
    for i in 0..iso.len() {
        for j in (i + 1)..iso.len() {
            let (u1, v1) = iso.pairs()[i];
            let (u2, v2) = iso.pairs()[j];
            if (qr[i].0 .1 < qr[j].0 .1) != (qr[i].1 .1 < qr[j].1 .1) {
                return Err(CircleError::InvariantViolation(format!(
                    "residue order broken on pairs ({u1},{v1}), ({u2},{v2})"
                )));
            }
            if g.adjacent(u1, u2)? != h.adjacent(v1, v2)? {
                return Err(CircleError::InvariantViolation(format!(
                    "adjacency mismatch on pairs ({u1},{v1}), ({u2},{v2})"
                )));
            }
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Certificates
// ----------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertPair {
    pub u: usize,
    pub pos_u: String,
    pub q: String,
    pub r: String,
    pub v: usize,
    pub pos_v: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertChecks {
    pub pairs: usize,
    pub adjacency_checks: usize,
    pub step_isometry: bool,
}

/// Self-contained record of a finished run: enough to replay both adjacency
/// oracles (pure functions of seed and positions) and re-check every pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsoCertificate {
    pub schema_version: u32,
    pub l: String,
    pub ell: String,
    pub m: String,
    pub seed_g: u64,
    pub seed_h: u64,
    pub p_g: String,
    pub p_h: String,
    pub pairs: Vec<CertPair>,
    pub checks: CertChecks,
}

pub fn certificate(
    g: &GraphOracle,
    h: &GraphOracle,
    iso: &PartialIso,
) -> Result<IsoCertificate, CircleError> {
    let (ell, m) = g
        .circle()
        .rational_parts()
        .ok_or(CircleError::IrrationalCircumference)?;
    let mut pairs = Vec::with_capacity(iso.len());
    for &(u, v) in iso.pairs() {
        let pu = g.point(u)?;
        let pv = h.point(v)?;
        let (q, r) = qr_decompose(pu, &m)?;
        pairs.push(CertPair {
            u: u.0,
            pos_u: pu.pos().encode(),
            q: q.to_string(),
            r: r.encode(),
            v: v.0,
            pos_v: pv.pos().encode(),
        });
    }
    let n = pairs.len();
    Ok(IsoCertificate {
        schema_version: 1,
        l: g.circle().circumference().encode(),
        ell: ell.to_string(),
        m: m.to_string(),
        seed_g: g.seed(),
        seed_h: h.seed(),
        p_g: g.p().to_string(),
        p_h: h.p().to_string(),
        pairs,
        checks: CertChecks {
            pairs: n,
            adjacency_checks: n * n.saturating_sub(1) / 2,
            step_isometry: true,
        },
    })
}

/// Re-verify a certificate from scratch: fresh oracles are rebuilt from the
/// recorded seeds and every claim (positions, q/r fields, residue order,
/// adjacency equivalence) is re-checked exactly.
pub fn verify_certificate(cert: &IsoCertificate) -> Result<(), CircleError> {
    let l = parse_quad(&cert.l)?;
    let circle = Circle::new(l)?;
    let (ell, m) = circle
        .rational_parts()
        .ok_or(CircleError::IrrationalCircumference)?;
    if ell.to_string() != cert.ell || m.to_string() != cert.m {
        return Err(CircleError::InvariantViolation(
            "certificate l/m does not match L".into(),
        ));
    }
    let g = GraphOracle::new(circle.clone(), parse_rational(&cert.p_g)?, cert.seed_g)?;
    let h = GraphOracle::new(circle.clone(), parse_rational(&cert.p_h)?, cert.seed_h)?;

    let mut src: Vec<CirclePoint> = Vec::with_capacity(cert.pairs.len());
    let mut dst: Vec<CirclePoint> = Vec::with_capacity(cert.pairs.len());
    for pair in &cert.pairs {
        let pu = circle.point(QuadScalar::decode(&pair.pos_u)?);
        let pv = circle.point(QuadScalar::decode(&pair.pos_v)?);
        let (qu, ru) = qr_decompose(&pu, &m)?;
        let (qv, _) = qr_decompose(&pv, &m)?;
        if qu.to_string() != pair.q || ru.encode() != pair.r {
            return Err(CircleError::InvariantViolation(format!(
                "recorded q/r do not match position for vertex {}",
                pair.u
            )));
        }
        if qu != qv {
            return Err(CircleError::InvariantViolation(format!(
                "q mismatch on pair ({}, {})",
                pair.u, pair.v
            )));
        }
        src.push(pu);
        dst.push(pv);
    }
    if src.is_empty() || !src[0].pos().is_zero() || !dst[0].pos().is_zero() {
        return Err(CircleError::InvariantViolation(
            "certificate does not map origin to origin".into(),
        ));
    }
    for i in 0..src.len() {
        for j in (i + 1)..src.len() {
            let ri = qr_decompose(&src[i], &m)?.1;
            let rj = qr_decompose(&src[j], &m)?.1;
            let si = qr_decompose(&dst[i], &m)?.1;
            let sj = qr_decompose(&dst[j], &m)?.1;
            if (ri < rj) != (si < sj) {
                return Err(CircleError::InvariantViolation(format!(
                    "residue order broken at certificate rows {i}, {j}"
                )));
            }
            if g.adjacent_points(&src[i], &src[j]) != h.adjacent_points(&dst[i], &dst[j]) {
                return Err(CircleError::InvariantViolation(format!(
                    "adjacency mismatch at certificate rows {i}, {j}"
                )));
            }
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Q ∩ S_L: equivalence classes map by exact +i/m translation
// ----------------------------------------------------------------------

/// Insert the whole class rep + (1/m){0,..,l-1} and return the l ids.
pub fn insert_class(
    o: &mut GraphOracle,
    rep: QuadScalar,
) -> Result<Vec<VertexId>, CircleError> {
    let (ell, m) = o
        .circle()
        .rational_parts()
        .ok_or(CircleError::IrrationalCircumference)?;
    let ell: u64 = ell
        .try_into()
        .map_err(|_| CircleError::Usage("l too large".into()))?;
    let m_i64: i64 = m
        .try_into()
        .map_err(|_| CircleError::Usage("m too large".into()))?;
    let mut ids = Vec::with_capacity(ell as usize);
    for i in 0..ell {
        let pos = &rep + &QuadScalar::from_rational(rat(i as i64, m_i64));
        ids.push(o.insert(pos)?);
    }
    Ok(ids)
}

/// Class-variant builder: vertex pools are closed under +1/m shifts and the
/// map is prescribed on one representative per class via f(s+i/m)=f(s)+i/m.
pub struct ClassBackAndForth<'a> {
    g: &'a mut GraphOracle,
    h: &'a mut GraphOracle,
    rep_pairs: Vec<(VertexId, VertexId)>,
    budgets: Budgets,
    stream: u64,
    ell: u64,
    m: i64,
}

impl<'a> ClassBackAndForth<'a> {
    /// Requires both pools to already contain the origin class [0] with
    /// matching internal adjacency pattern (the identity on [0] is forced by
    /// f(0)=0); a mismatch is reported so different seeds can be chosen.
    pub fn new(
        g: &'a mut GraphOracle,
        h: &'a mut GraphOracle,
        budgets: Budgets,
    ) -> Result<Self, CircleError> {
        if g.circle() != h.circle() {
            return Err(CircleError::MismatchedCircumference);
        }
        let (ell, m) = g
            .circle()
            .rational_parts()
            .ok_or(CircleError::IrrationalCircumference)?;
        let ell: u64 = ell
            .try_into()
            .map_err(|_| CircleError::Usage("l too large".into()))?;
        let m: i64 = m
            .try_into()
            .map_err(|_| CircleError::Usage("m too large".into()))?;
        for o in [&mut *g, &mut *h] {
            if o.lookup(&o.circle().point(QuadScalar::zero())).is_none() {
                insert_class(o, QuadScalar::zero())?;
            }
        }
        let mut bf = ClassBackAndForth {
            g,
            h,
            rep_pairs: Vec::new(),
            budgets,
            stream: 0,
            ell,
            m,
        };
        let zero = QuadScalar::zero();
        let gz = bf.g.lookup(&bf.g.circle().point(zero.clone())).unwrap();
        let hz = bf.h.lookup(&bf.h.circle().point(zero.clone())).unwrap();
        if !bf.class_pattern_matches(&zero, &zero)? {
            return Err(CircleError::InvariantViolation(
                "origin classes disagree internally; pick different seeds".into(),
            ));
        }
        bf.rep_pairs.push((gz, hz));
        Ok(bf)
    }

    pub fn rep_pairs(&self) -> &[(VertexId, VertexId)] {
        &self.rep_pairs
    }

    fn shift(&self, base: &QuadScalar, i: u64) -> QuadScalar {
        base + &QuadScalar::from_rational(rat(i as i64, self.m))
    }

    /// Within-class adjacency pattern equality between [s] in G and [t] in G'.
    fn class_pattern_matches(
        &self,
        s: &QuadScalar,
        t: &QuadScalar,
    ) -> Result<bool, CircleError> {
        for i in 0..self.ell {
            for j in (i + 1)..self.ell {
                let gu = self.g.circle().point(self.shift(s, i));
                let gv = self.g.circle().point(self.shift(s, j));
                let hu = self.h.circle().point(self.shift(t, i));
                let hv = self.h.circle().point(self.shift(t, j));
                if self.g.adjacent_points(&gu, &gv) != self.h.adjacent_points(&hu, &hv) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Cross-class constraints of a candidate class [t] against all mapped
    /// classes, mirroring adjacency of [s] against the mapped preimages.
    fn cross_pattern_matches(
        &self,
        s: &QuadScalar,
        t: &QuadScalar,
        forward: bool,
    ) -> Result<bool, CircleError> {
        for &(gu, hv) in &self.rep_pairs {
            let (src_rep, dst_rep) = if forward {
                (self.g.point(gu)?.pos().clone(), self.h.point(hv)?.pos().clone())
            } else {
                (self.h.point(hv)?.pos().clone(), self.g.point(gu)?.pos().clone())
            };
            let (src, dst): (&GraphOracle, &GraphOracle) = if forward {
                (self.g, self.h)
            } else {
                (self.h, self.g)
            };
            for i in 0..self.ell {
                for j in 0..self.ell {
                    let su = src.circle().point(self.shift(s, i));
                    let sv = src.circle().point(self.shift(&src_rep, j));
                    let tu = dst.circle().point(self.shift(t, i));
                    let tv = dst.circle().point(self.shift(&dst_rep, j));
                    if src.adjacent_points(&su, &sv) != dst.adjacent_points(&tu, &tv) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Candidate interval in (0, 1/m) for the image of representative s:
    /// images must preserve the order of representatives.
    fn rep_interval(&self, s: &QuadScalar, forward: bool) -> Result<Arc, CircleError> {
        let mut a = QuadScalar::zero();
        let mut b = QuadScalar::from_rational(rat(1, self.m));
        for &(gu, hv) in &self.rep_pairs {
            let (u, fu) = if forward {
                (self.g.point(gu)?.pos().clone(), self.h.point(hv)?.pos().clone())
            } else {
                (self.h.point(hv)?.pos().clone(), self.g.point(gu)?.pos().clone())
            };
            if &u == s {
                return Err(CircleError::Usage("representative already mapped".into()));
            }
            if &u < s {
                if fu > a {
                    a = fu;
                }
            } else if fu < b {
                b = fu;
            }
        }
        let width = &b - &a;
        if !width.is_positive() {
            return Err(CircleError::InvariantViolation(
                "empty class candidate interval".into(),
            ));
        }
        let circle = self.g.circle();
        Arc::new(circle, a, width, false, false)
    }

    /// Map the whole class of representative s (a pool vertex in (0, 1/m));
    /// on success the l image vertices are inserted and the image
    /// representative id is returned. Skips already-mapped representatives.
    pub fn forth_step_classes(&mut self, s: VertexId) -> Result<VertexId, CircleError> {
        self.class_step(s, true)
    }

    pub fn back_step_classes(&mut self, t: VertexId) -> Result<VertexId, CircleError> {
        self.class_step(t, false)
    }

    fn class_step(&mut self, s: VertexId, forward: bool) -> Result<VertexId, CircleError> {
        for &(gu, hv) in &self.rep_pairs {
            if forward && gu == s {
                return Ok(hv);
            }
            if !forward && hv == s {
                return Ok(gu);
            }
        }
        let s_pos = {
            let src = if forward { &*self.g } else { &*self.h };
            src.point(s)?.pos().clone()
        };
        let one_over_m = QuadScalar::from_rational(rat(1, self.m));
        if !s_pos.is_positive() || s_pos >= one_over_m {
            return Err(CircleError::Usage(
                "class representatives must lie in (0, 1/m)".into(),
            ));
        }
        let arc = self.rep_interval(&s_pos, forward)?;

        // budget from the source-side pattern: each pair of class members
        // within unit distance is one Bernoulli constraint on the image
        let (n_adj, n_non) = {
            let src = if forward { &*self.g } else { &*self.h };
            let one = QuadScalar::one();
            let mut n_adj = 0usize;
            let mut n_non = 0usize;
            let mut tally = |u: &CirclePoint, v: &CirclePoint| -> Result<(), CircleError> {
                if u.dist(v)? < one {
                    if src.adjacent_points(u, v) {
                        n_adj += 1;
                    } else {
                        n_non += 1;
                    }
                }
                Ok(())
            };
            for i in 0..self.ell {
                for j in (i + 1)..self.ell {
                    let u = src.circle().point(self.shift(&s_pos, i));
                    let v = src.circle().point(self.shift(&s_pos, j));
                    tally(&u, &v)?;
                }
            }
            for &(gu, hv) in &self.rep_pairs {
                let rep = if forward {
                    self.g.point(gu)?.pos().clone()
                } else {
                    self.h.point(hv)?.pos().clone()
                };
                for i in 0..self.ell {
                    for j in 0..self.ell {
                        let u = src.circle().point(self.shift(&s_pos, i));
                        let v = src.circle().point(self.shift(&rep, j));
                        tally(&u, &v)?;
                    }
                }
            }
            (n_adj, n_non)
        };
        let dst_for_budget = if forward { &*self.h } else { &*self.g };
        let budget = dst_for_budget
            .witness_budget(n_adj.min(400), n_non.min(40), self.budgets.scale)
            .min(self.budgets.trial_cap);

        self.stream += 1;
        let label = if forward { "class-forth" } else { "class-back" };
        let mut rng = {
            let dst = if forward { &*self.h } else { &*self.g };
            dst.stream(label, self.stream)
        };
        for _ in 0..budget {
            let cand = {
                let dst = if forward { &*self.h } else { &*self.g };
                dst.sample_position_in_arc(&arc, &mut rng)
            };
            let t_pos = cand.pos().clone();
            {
                let dst = if forward { &*self.h } else { &*self.g };
                if dst.lookup(&cand).is_some() {
                    continue;
                }
            }
            let (within, cross) = if forward {
                (
                    self.class_pattern_matches(&s_pos, &t_pos)?,
                    self.cross_pattern_matches(&s_pos, &t_pos, true)?,
                )
            } else {
                (
                    self.class_pattern_matches(&t_pos, &s_pos)?,
                    self.cross_pattern_matches(&s_pos, &t_pos, false)?,
                )
            };
            if !within || !cross {
                continue;
            }
            let dst = if forward { &mut *self.h } else { &mut *self.g };
            let ids = match insert_class(dst, t_pos) {
                Ok(ids) => ids,
                Err(CircleError::DuplicatePosition) => continue,
                Err(e) => return Err(e),
            };
            let rep_id = ids[0];
            let pair = if forward { (s, rep_id) } else { (rep_id, s) };
            self.rep_pairs.push(pair);
            return Ok(rep_id);
        }
        Err(CircleError::BudgetExhausted {
            what: format!("class step for representative {s}"),
            tried: budget,
        })
    }

    /// N rounds over the representative enumerations (pool order, positions
    /// in (0, 1/m)); exhausted enumerations contribute skips.
    pub fn run(&mut self, rounds: usize) -> Result<(), CircleError> {
        let one_over_m = QuadScalar::from_rational(rat(1, self.m));
        for n in 1..=rounds {
            let fwd_rep = nth_rep(self.g, &one_over_m, n);
            if let Some(s) = fwd_rep {
                self.forth_step_classes(s)?;
            }
            let bwd_rep = nth_rep(self.h, &one_over_m, n);
            if let Some(t) = bwd_rep {
                self.back_step_classes(t)?;
            }
        }
        self.verify()
    }

    /// Exact re-verification: every class maps by +i/m translation (by
    /// construction) and the full bipartite adjacency pattern over all
    /// mapped class members agrees between the two graphs.
    pub fn verify(&self) -> Result<(), CircleError> {
        for (idx, &(gu, hv)) in self.rep_pairs.iter().enumerate() {
            let s = self.g.point(gu)?.pos().clone();
            let t = self.h.point(hv)?.pos().clone();
            for i in 0..self.ell {
                let gs = self.g.circle().point(self.shift(&s, i));
                let ht = self.h.circle().point(self.shift(&t, i));
                if self.g.lookup(&gs).is_none() || self.h.lookup(&ht).is_none() {
                    return Err(CircleError::InvariantViolation(format!(
                        "class member missing from pool at rep pair {idx}, shift {i}"
                    )));
                }
            }
            if !self.class_pattern_matches(&s, &t)? {
                return Err(CircleError::InvariantViolation(format!(
                    "within-class adjacency mismatch at rep pair {idx}"
                )));
            }
        }
        for a in 0..self.rep_pairs.len() {
            for b in (a + 1)..self.rep_pairs.len() {
                let (gu, hv) = self.rep_pairs[a];
                let (gw, hx) = self.rep_pairs[b];
                let su = self.g.point(gu)?.pos().clone();
                let sw = self.g.point(gw)?.pos().clone();
                let tu = self.h.point(hv)?.pos().clone();
                let tx = self.h.point(hx)?.pos().clone();
                for i in 0..self.ell {
                    for j in 0..self.ell {
                        let g1 = self.g.circle().point(self.shift(&su, i));
                        let g2 = self.g.circle().point(self.shift(&sw, j));
                        let h1 = self.h.circle().point(self.shift(&tu, i));
                        let h2 = self.h.circle().point(self.shift(&tx, j));
                        if self.g.adjacent_points(&g1, &g2)
                            != self.h.adjacent_points(&h1, &h2)
                        {
                            return Err(CircleError::InvariantViolation(format!(
                                "cross-class adjacency mismatch at rep pairs {a}, {b}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The n-th representative (pool order) with position in (0, 1/m), if any.
fn nth_rep(o: &GraphOracle, one_over_m: &QuadScalar, n: usize) -> Option<VertexId> {
    o.ids()
        .filter(|&v| {
            let pos = o.point(v).expect("pool id").pos();
            pos.is_positive() && pos < one_over_m
        })
        .nth(n - 1)
}

// ----------------------------------------------------------------------
// Irrational L: disagreement evidence against candidate isometries
// ----------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateReport {
    pub rotation: String,
    pub reflect: bool,
    pub first_disagreement: Option<usize>,
    pub disagreements: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonIsoReport {
    pub candidates: Vec<CandidateReport>,
    pub all_disagree: bool,
}

/// For each candidate isometry f(x) = c ± x (rotations composed with an
/// optional reflection), sample unit-distance pairs and compare adjacency in
/// G with adjacency of the images in G'. Any fixed isometry between two
/// independent samples disagrees on each unit-distance pair with probability
/// p(1-p') + p'(1-p).
pub fn non_iso_evidence(
    g: &GraphOracle,
    h: &GraphOracle,
    candidates: usize,
    trials: usize,
) -> Result<NonIsoReport, CircleError> {
    if g.circle() != h.circle() {
        return Err(CircleError::MismatchedCircumference);
    }
    let circle = g.circle().clone();
    let l = circle.circumference().clone();
    let rotations = candidates.div_ceil(2).max(1);
    let almost_full = l.mul_rat(&rat((1 << 24) - 1, 1 << 24));
    let full_arc = Arc::new(&circle, QuadScalar::zero(), almost_full, false, false)?;
    let unit_arc = Arc::new(&circle, QuadScalar::zero(), QuadScalar::one(), false, false)?;

    let mut out = Vec::with_capacity(candidates);
    for c in 0..candidates {
        let reflect = c % 2 == 1;
        let rotation = l.mul_rat(&rat((c / 2) as i64, rotations as i64));
        let mut rng = g.stream("non-iso", c as u64);
        let mut first = None;
        let mut count = 0usize;
        for t in 0..trials {
            let pu = g.sample_position_in_arc(&full_arc, &mut rng);
            let d = g.sample_position_in_arc(&unit_arc, &mut rng);
            let pv = pu.translate(d.pos());
            let fu = apply_isometry(&circle, &rotation, reflect, &pu);
            let fv = apply_isometry(&circle, &rotation, reflect, &pv);
            if g.adjacent_points(&pu, &pv) != h.adjacent_points(&fu, &fv) {
                count += 1;
                if first.is_none() {
                    first = Some(t);
                }
            }
        }
        out.push(CandidateReport {
            rotation: rotation.encode(),
            reflect,
            first_disagreement: first,
            disagreements: count,
            trials,
        });
    }
    let all = out.iter().all(|c| c.first_disagreement.is_some());
    Ok(NonIsoReport {
        candidates: out,
        all_disagree: all,
    })
}

fn apply_isometry(
    circle: &Circle,
    rotation: &QuadScalar,
    reflect: bool,
    p: &CirclePoint,
) -> CirclePoint {
    if reflect {
        circle.point(rotation - p.pos())
    } else {
        circle.point(rotation + p.pos())
    }
}
