//! The lazy infinite random geometric graph G_{L,S,p}.
//!
//! The vertex pool is a growable ordered set of circle points. Adjacency is
//! a pure function of the seed and the canonical encodings of the two
//! positions, so any interleaving of insertions and queries gives identical
//! answers and the graph can be densified on demand.
//!
//! Hash contract (bit-exact): let `enc(x)` be the canonical QuadScalar text
//! encoding of the position of `x`. For distinct positions u, v let
//!
//! ```text
//! h = first 8 bytes, big-endian, of SHA-256( seed_be8 || "|" || min(enc(u),enc(v)) || "|" || max(enc(u),enc(v)) )
//! ```
//!
//! The pair is an edge iff `||u-v|| < 1` exactly and `h / 2^64 < p` exactly
//! (rational comparison, no floating point).

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CircleError;
use crate::exact::{rat, QuadScalar, Rational};
use crate::geometry::{is_integer_distance_free, qr_decompose, Arc, Circle, CirclePoint};

/// Stable identifier of a vertex in one oracle's pool (its insertion index).
#[derive(
    Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize,
)]
pub struct VertexId(pub usize);

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Lazy oracle for G_{L,S,p}.
pub struct GraphOracle {
    circle: Circle,
    p: Rational,
    seed: u64,
    vertices: Vec<CirclePoint>,
    by_enc: HashMap<String, VertexId>,
    /// Some(m) when integer-distance-free insertion is enforced (L = l/m).
    idf_m: Option<BigInt>,
    /// residue encodings seen so far, for O(1) idf checks
    residues: HashSet<String>,
    /// add a sqrt2-multiple perturbation to sampled positions
    irrational_offset: bool,
}

impl GraphOracle {
    pub fn new(circle: Circle, p: Rational, seed: u64) -> Result<Self, CircleError> {
        if !p.is_positive() || p >= Rational::one() {
            return Err(CircleError::Usage(format!("p must lie in (0,1), got {p}")));
        }
        Ok(GraphOracle {
            circle,
            p,
            seed,
            vertices: Vec::new(),
            by_enc: HashMap::new(),
            idf_m: None,
            residues: HashSet::new(),
            irrational_offset: false,
        })
    }

    /// Enforce integer-distance-free insertion. Requires rational L.
    pub fn with_idf(mut self) -> Result<Self, CircleError> {
        let (_, m) = self
            .circle
            .rational_parts()
            .ok_or(CircleError::IrrationalCircumference)?;
        if !self.vertices.is_empty() {
            return Err(CircleError::Usage(
                "idf mode must be set before inserting vertices".into(),
            ));
        }
        self.idf_m = Some(m);
        Ok(self)
    }

    pub fn with_irrational_offset(mut self) -> Self {
        self.irrational_offset = true;
        self
    }

    pub fn circle(&self) -> &Circle {
        &self.circle
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn idf_m(&self) -> Option<&BigInt> {
        self.idf_m.as_ref()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len()).map(VertexId)
    }

    pub fn point(&self, v: VertexId) -> Result<&CirclePoint, CircleError> {
        self.vertices.get(v.0).ok_or(CircleError::UnknownVertex(v.0))
    }

    pub fn lookup(&self, pos: &CirclePoint) -> Option<VertexId> {
        self.by_enc.get(&pos.pos().encode()).copied()
    }

    /// Insert a vertex at an explicit position. Rejects duplicates and, in
    /// idf mode, integer-distance violations (exact residue check).
    pub fn insert(&mut self, pos: QuadScalar) -> Result<VertexId, CircleError> {
        let pt = self.circle.point(pos);
        let enc = pt.pos().encode();
        if self.by_enc.contains_key(&enc) {
            return Err(CircleError::DuplicatePosition);
        }
        if let Some(m) = self.idf_m.clone() {
            let (_, r) = qr_decompose(&pt, &m)?;
            let renc = r.encode();
            if !self.residues.insert(renc) {
                return Err(CircleError::Usage(
                    "insertion would violate integer-distance-freeness".into(),
                ));
            }
        }
        let id = VertexId(self.vertices.len());
        self.by_enc.insert(enc, id);
        self.vertices.push(pt);
        Ok(id)
    }

    /// Keyed 64-bit edge hash over the canonical pair encoding.
    fn edge_hash(&self, enc_u: &str, enc_v: &str) -> u64 {
        let (lo, hi) = if enc_u <= enc_v { (enc_u, enc_v) } else { (enc_v, enc_u) };
        let mut h = Sha256::new();
        h.update(self.seed.to_be_bytes());
        h.update(b"|");
        h.update(lo.as_bytes());
        h.update(b"|");
        h.update(hi.as_bytes());
        let digest = h.finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Adjacency as a pure function of two positions: false at or beyond unit
    /// distance, otherwise a seeded Bernoulli(p) decided by the edge hash.
    pub fn adjacent_points(&self, u: &CirclePoint, v: &CirclePoint) -> bool {
        if u.pos() == v.pos() {
            return false;
        }
        let d = u.dist(v).expect("same circle");
        if d >= QuadScalar::one() {
            return false;
        }
        let h = self.edge_hash(&u.pos().encode(), &v.pos().encode());
        // edge iff h / 2^64 < p, decided exactly
        BigInt::from(h) * self.p.denom() < self.p.numer() * (BigInt::one() << 64u32)
    }

    pub fn adjacent(&self, u: VertexId, v: VertexId) -> Result<bool, CircleError> {
        let pu = self.point(u)?.clone();
        let pv = self.point(v)?;
        Ok(self.adjacent_points(&pu, pv))
    }

    /// Named deterministic randomness stream derived from the oracle seed.
    pub fn stream(&self, label: &str, stream: u64) -> ChaCha12Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_be_bytes());
        h.update(b"#");
        h.update(label.as_bytes());
        h.update(b"#");
        h.update(stream.to_be_bytes());
        let digest = h.finalize();
        ChaCha12Rng::from_seed(digest.into())
    }

    /// Draw a position strictly inside the arc: a dyadic fraction of the arc
    /// length, optionally nudged by a sqrt2 multiple to force an irrational
    /// coordinate.
    pub fn sample_position_in_arc(&self, arc: &Arc, rng: &mut ChaCha12Rng) -> CirclePoint {
        // depth grows with retries elsewhere; 24 bits is plenty per draw
        let depth: u32 = 24;
        let den = 1u64 << depth;
        let j = rng.gen_range(1..den - 1);
        let t = rat(j as i64, den as i64);
        // len * t, plus len * sqrt2 / 2^(depth+2) in irrational-offset mode
        // (t + sqrt2/2^(depth+2) stays inside (0, 1)); multiplying by sqrt2
        // just swaps coefficients: (a + b sqrt2) sqrt2 = 2b + a sqrt2
        let len = arc.length();
        let mut scaled = len.mul_rat(&t);
        if self.irrational_offset {
            let root_len = QuadScalar::new(
                len.sqrt2_part().clone() + len.sqrt2_part(),
                len.rational_part().clone(),
            );
            scaled = scaled + root_len.mul_rat(&rat(1, (den as i64) << 2));
        }
        let pos = arc.start().pos() + &scaled;
        // Snap to a dyadic grid fine enough to stay strictly inside the open
        // arc: the draw keeps clearance at least len / 2^24 on each side and
        // snapping moves the value down by under (1 + sqrt2) / 2^m. Without
        // this, positions derived from positions accumulate unbounded
        // denominators and exact arithmetic slows to a crawl.
        let len_f = arc.length().to_f64();
        let m = if len_f.is_finite() && len_f > 0.0 {
            (27 - len_f.log2().floor() as i64).clamp(27, 2048) as u32
        } else {
            2048
        };
        arc.circle().point(pos.snap_dyadic(m))
    }

    /// Insert a fresh vertex strictly inside the arc. In idf mode, rejects
    /// and resamples on integer-distance violations.
    pub fn sample_vertex_in_arc(
        &mut self,
        arc: &Arc,
        stream: u64,
    ) -> Result<VertexId, CircleError> {
        if !arc.length().is_positive() {
            return Err(CircleError::Usage("arc must have positive length".into()));
        }
        let mut rng = self.stream("arc-sample", stream);
        const RETRIES: u32 = 512;
        for _ in 0..RETRIES {
            let cand = self.sample_position_in_arc(arc, &mut rng);
            match self.insert(cand.pos().clone()) {
                Ok(id) => return Ok(id),
                Err(CircleError::DuplicatePosition) => continue,
                Err(CircleError::Usage(_)) => continue, // idf rejection
                Err(e) => return Err(e),
            }
        }
        Err(CircleError::BudgetExhausted {
            what: "sample_vertex_in_arc".into(),
            tried: RETRIES as u64,
        })
    }

    /// Default witness budget: 64 expected geometric waiting times for the
    /// event "adjacent to all of A, none of B".
    pub fn witness_budget(&self, a_len: usize, b_len: usize, scale: f64) -> u64 {
        use num_traits::ToPrimitive;
        let p = self.p.to_f64().unwrap_or(0.5);
        let succ = p.powi(a_len as i32) * (1.0 - p).powi(b_len as i32);
        let base = if succ <= 0.0 { f64::MAX } else { 64.0 / succ };
        let scaled = base * scale;
        if scaled >= u64::MAX as f64 {
            u64::MAX
        } else {
            scaled.ceil() as u64
        }
    }

    /// Search for a fresh vertex within `eps` of s, adjacent to all of A and
    /// none of B (the rejection sampler behind geometric existential
    /// closure). Expected trials (p^|A| (1-p)^|B|)^-1.
    pub fn gec_witness(
        &mut self,
        s: VertexId,
        a: &[VertexId],
        b: &[VertexId],
        eps: &QuadScalar,
        budget: u64,
    ) -> Result<VertexId, CircleError> {
        if !eps.is_positive() {
            return Err(CircleError::Usage("eps must be positive".into()));
        }
        let sp = self.point(s)?.clone();
        let mut a_pts = Vec::with_capacity(a.len());
        let mut b_pts = Vec::with_capacity(b.len());
        for &u in a {
            if b.contains(&u) {
                return Err(CircleError::Usage("A and B must be disjoint".into()));
            }
            a_pts.push(self.point(u)?.clone());
        }
        for &u in b {
            b_pts.push(self.point(u)?.clone());
        }
        let one = QuadScalar::one();
        for pt in a_pts.iter().chain(b_pts.iter()) {
            let d = sp.dist(pt)?;
            if &d + eps >= one {
                return Err(CircleError::Usage(
                    "eps-ball does not stay within unit distance of A and B".into(),
                ));
            }
        }
        let arc = Arc::new(
            &self.circle,
            sp.pos() - &eps.clone(),
            eps.mul_rat(&rat(2, 1)),
            false,
            false,
        )?;
        let mut rng = self.stream("gec-witness", s.0 as u64);
        for trial in 0..budget {
            let cand = self.sample_position_in_arc(&arc, &mut rng);
            if self.by_enc.contains_key(&cand.pos().encode()) {
                continue;
            }
            if let Some(m) = &self.idf_m {
                let (_, r) = qr_decompose(&cand, m)?;
                if self.residues.contains(&r.encode()) {
                    continue;
                }
            }
            let ok_a = a_pts.iter().all(|pt| self.adjacent_points(&cand, pt));
            if !ok_a {
                continue;
            }
            let ok_b = b_pts.iter().all(|pt| !self.adjacent_points(&cand, pt));
            if !ok_b {
                continue;
            }
            let _ = trial;
            return self.insert(cand.pos().clone());
        }
        Err(CircleError::BudgetExhausted { what: "gec_witness".into(), tried: budget })
    }

    /// Insert vertices until every cyclic gap between consecutive pool points
    /// is strictly below `gap`.
    pub fn densify(&mut self, gap: &QuadScalar, stream: u64) -> Result<(), CircleError> {
        if !gap.is_positive() {
            return Err(CircleError::Usage("gap must be positive".into()));
        }
        if self.vertices.is_empty() {
            self.insert(QuadScalar::zero())?;
        }
        let mut round = 0u64;
        loop {
            let mut positions: Vec<QuadScalar> =
                self.vertices.iter().map(|p| p.pos().clone()).collect();
            positions.sort();
            let n = positions.len();
            let mut widest: Option<(QuadScalar, QuadScalar)> = None; // (start, len)
            for i in 0..n {
                let cur = &positions[i];
                let next = &positions[(i + 1) % n];
                let len = if i + 1 == n {
                    self.circle.circumference() - cur + next.clone()
                } else {
                    next - cur
                };
                if widest.as_ref().map_or(true, |(_, w)| &len > w) {
                    widest = Some((cur.clone(), len));
                }
            }
            let (start, len) = widest.expect("nonempty pool");
            if &len < gap {
                return Ok(());
            }
            // sample inside the middle half of the widest gap
            let arc = Arc::new(
                &self.circle,
                &start + &len.mul_rat(&rat(1, 4)),
                len.mul_rat(&rat(1, 2)),
                false,
                false,
            )?;
            self.sample_vertex_in_arc(&arc, stream.wrapping_add(round))?;
            round += 1;
        }
    }

    pub fn is_integer_distance_free_pool(&self) -> Result<bool, CircleError> {
        match &self.idf_m {
            Some(m) => is_integer_distance_free(&self.vertices, m),
            None => Err(CircleError::IrrationalCircumference),
        }
    }

    /// Immutable induced subgraph with all pairwise adjacencies resolved.
    pub fn snapshot(&self, subset: Option<&[VertexId]>) -> Result<SnapshotGraph, CircleError> {
        let ids: Vec<VertexId> = match subset {
            Some(s) => {
                for &v in s {
                    self.point(v)?;
                }
                s.to_vec()
            }
            None => self.ids().collect(),
        };
        let pts: Vec<CirclePoint> =
            ids.iter().map(|&v| self.vertices[v.0].clone()).collect();
        let n = ids.len();
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let e = self.adjacent_points(&pts[i], &pts[j]);
                adj[i][j] = e;
                adj[j][i] = e;
            }
        }
        Ok(SnapshotGraph {
            circle: self.circle.clone(),
            p: self.p.clone(),
            seed: self.seed,
            ids,
            points: pts,
            adj,
        })
    }
}

/// Immutable finite induced subgraph.
#[derive(Clone)]
pub struct SnapshotGraph {
    circle: Circle,
    p: Rational,
    seed: u64,
    ids: Vec<VertexId>,
    points: Vec<CirclePoint>,
    adj: Vec<Vec<bool>>,
}

impl SnapshotGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn circle(&self) -> &Circle {
        &self.circle
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn point_of(&self, v: VertexId) -> Result<&CirclePoint, CircleError> {
        self.local_index(v).map(|i| &self.points[i])
    }

    fn local_index(&self, v: VertexId) -> Result<usize, CircleError> {
        self.ids
            .iter()
            .position(|&u| u == v)
            .ok_or(CircleError::UnknownVertex(v.0))
    }

    pub fn adjacent(&self, u: VertexId, v: VertexId) -> Result<bool, CircleError> {
        let i = self.local_index(u)?;
        let j = self.local_index(v)?;
        Ok(self.adj[i][j])
    }

    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::new();
        for i in 0..self.ids.len() {
            for j in (i + 1)..self.ids.len() {
                if self.adj[i][j] {
                    out.push((self.ids[i], self.ids[j]));
                }
            }
        }
        out
    }

    /// BFS shortest-path length; None when disconnected.
    pub fn graph_distance(&self, u: VertexId, v: VertexId) -> Result<Option<u64>, CircleError> {
        let src = self.local_index(u)?;
        let dst = self.local_index(v)?;
        if src == dst {
            return Ok(Some(0));
        }
        let mut dist = vec![u64::MAX; self.ids.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(i) = queue.pop_front() {
            for j in 0..self.ids.len() {
                if self.adj[i][j] && dist[j] == u64::MAX {
                    dist[j] = dist[i] + 1;
                    if j == dst {
                        return Ok(Some(dist[j]));
                    }
                    queue.push_back(j);
                }
            }
        }
        Ok(None)
    }

    /// JSON export: {L, p, seed, vertices:[{id,pos}], edges:[[id,id]]}.
    pub fn to_json(&self) -> serde_json::Value {
        let vertices: Vec<serde_json::Value> = self
            .ids
            .iter()
            .zip(&self.points)
            .map(|(id, pt)| {
                serde_json::json!({ "id": id.0, "pos": pt.pos().encode() })
            })
            .collect();
        let edges: Vec<[usize; 2]> =
            self.edges().iter().map(|(u, v)| [u.0, v.0]).collect();
        serde_json::json!({
            "L": self.circle.circumference().encode(),
            "p": format!("{}/{}", self.p.numer(), self.p.denom()),
            "seed": self.seed,
            "vertices": vertices,
            "edges": edges,
        })
    }

    /// DOT export with circular layout coordinates (f64 for rendering only).
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph snapshot {\n  layout=neato;\n  node [shape=point];\n");
        let l = self.circle.circumference().to_f64();
        for (id, pt) in self.ids.iter().zip(&self.points) {
            let theta = pt.pos().to_f64() / l * std::f64::consts::TAU;
            let _ = writeln!(
                out,
                "  v{} [pos=\"{:.4},{:.4}!\"];",
                id.0,
                theta.cos() * 3.0,
                theta.sin() * 3.0
            );
        }
        for (u, v) in self.edges() {
            let _ = writeln!(out, "  v{} -- v{};", u.0, v.0);
        }
        out.push_str("}\n");
        out
    }
}
