//! Geometry of the circle S_L = R/LZ: reduction mod L, circle distance,
//! directed arcs, shorter arcs, cyclic ordering, q/r decomposition and
//! integer-distance-free checks.
//!
//! This module is the geometric ground truth that the graph-theoretic
//! recovery procedures are tested against.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::CircleError;
use crate::exact::{QuadScalar, Rational};

/// A circle of circumference L > 2.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Circle {
    l: QuadScalar,
}

impl std::fmt::Debug for Circle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Circle(L={})", self.l)
    }
}

impl Circle {
    pub fn new(l: QuadScalar) -> Result<Self, CircleError> {
        if l <= QuadScalar::from_int(2) {
            return Err(CircleError::Usage(format!(
                "circumference must exceed 2, got {l}"
            )));
        }
        Ok(Circle { l })
    }

    pub fn circumference(&self) -> &QuadScalar {
        &self.l
    }

    pub fn half(&self) -> QuadScalar {
        self.l.mul_rat(&crate::exact::rat(1, 2))
    }

    /// If L is rational, return (l, m) with L = l/m irreducible.
    pub fn rational_parts(&self) -> Option<(BigInt, BigInt)> {
        self.l
            .as_rational()
            .map(|r| (r.numer().clone(), r.denom().clone()))
    }

    /// Reduce a real value to its representative in [0, L).
    pub fn reduce(&self, x: &QuadScalar) -> QuadScalar {
        // almost every caller passes a value within one turn of [0, L);
        // handle those with comparisons alone, division only as fallback
        if !x.is_negative() {
            if x < &self.l {
                return x.clone();
            }
            let shifted = x - &self.l;
            if shifted < self.l {
                return shifted;
            }
        } else {
            let shifted = x + &self.l;
            if !shifted.is_negative() {
                return shifted;
            }
        }
        let k = x.div(&self.l).expect("L > 2").floor();
        let r = x - &self.l.mul_rat(&Rational::from(k));
        debug_assert!(!r.is_negative() && r < self.l);
        r
    }

    pub fn point(&self, x: QuadScalar) -> CirclePoint {
        CirclePoint { circle: self.clone(), pos: self.reduce(&x) }
    }
}

/// A point of S_L, stored as its representative in [0, L).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CirclePoint {
    circle: Circle,
    pos: QuadScalar,
}

impl std::fmt::Debug for CirclePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.pos)
    }
}

impl CirclePoint {
    pub fn pos(&self) -> &QuadScalar {
        &self.pos
    }

    pub fn circle(&self) -> &Circle {
        &self.circle
    }

    pub fn translate(&self, d: &QuadScalar) -> CirclePoint {
        self.circle.point(&self.pos + d)
    }

    fn check_same_circle(&self, other: &CirclePoint) -> Result<(), CircleError> {
        if self.circle != other.circle {
            return Err(CircleError::MismatchedCircumference);
        }
        Ok(())
    }

    /// Circle distance ||u - v|| = min{|u-v|, L - |u-v|}, in [0, L/2].
    pub fn dist(&self, other: &CirclePoint) -> Result<QuadScalar, CircleError> {
        self.check_same_circle(other)?;
        let fwd = self.circle.reduce(&(&other.pos - &self.pos));
        let bwd = self.circle.circumference() - &fwd;
        Ok(if fwd <= bwd { fwd } else { bwd })
    }

    /// Length of the positively-oriented arc from self to other, in [0, L).
    pub fn forward_gap(&self, other: &CirclePoint) -> Result<QuadScalar, CircleError> {
        self.check_same_circle(other)?;
        Ok(self.circle.reduce(&(&other.pos - &self.pos)))
    }
}

/// A directed arc of S_L: the positively-oriented sweep of `len` starting at
/// `start`. Endpoint closure is explicit because open arcs (a,b) and closed
/// shorter arcs A_{a,b} both occur.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    circle: Circle,
    start: QuadScalar,
    len: QuadScalar,
    closed_start: bool,
    closed_end: bool,
}

impl std::fmt::Debug for Arc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lb = if self.closed_start { '[' } else { '(' };
        let rb = if self.closed_end { ']' } else { ')' };
        write!(f, "{}{}, +{}{}", lb, self.start, self.len, rb)
    }
}

impl Arc {
    pub fn new(
        circle: &Circle,
        start: QuadScalar,
        len: QuadScalar,
        closed_start: bool,
        closed_end: bool,
    ) -> Result<Self, CircleError> {
        if len.is_negative() || &len >= circle.circumference() {
            return Err(CircleError::Usage(format!(
                "arc length must lie in [0, L), got {len}"
            )));
        }
        Ok(Arc {
            circle: circle.clone(),
            start: circle.reduce(&start),
            len,
            closed_start,
            closed_end,
        })
    }

    /// The positively-oriented open arc (a, b).
    pub fn open(a: &CirclePoint, b: &CirclePoint) -> Result<Self, CircleError> {
        let len = a.forward_gap(b)?;
        Arc::new(a.circle(), a.pos().clone(), len, false, false)
    }

    pub fn circle(&self) -> &Circle {
        &self.circle
    }

    pub fn length(&self) -> &QuadScalar {
        &self.len
    }

    pub fn start(&self) -> CirclePoint {
        self.circle.point(self.start.clone())
    }

    pub fn end(&self) -> CirclePoint {
        self.circle.point(&self.start + &self.len)
    }

    pub fn midpoint(&self) -> CirclePoint {
        self.circle
            .point(&self.start + &self.len.mul_rat(&crate::exact::rat(1, 2)))
    }

    /// Position at parameter t in [0, 1] along the arc.
    pub fn at(&self, t: &Rational) -> CirclePoint {
        self.circle.point(&self.start + &self.len.mul_rat(t))
    }

    pub fn contains(&self, p: &CirclePoint) -> bool {
        if p.circle() != &self.circle {
            return false;
        }
        let off = self.circle.reduce(&(p.pos() - &self.start));
        match off.sign() {
            Ordering::Equal => self.closed_start || (self.closed_end && self.len.is_zero()),
            _ => match off.cmp(&self.len) {
                Ordering::Less => true,
                Ordering::Equal => self.closed_end,
                Ordering::Greater => false,
            },
        }
    }
}

/// The shorter closed arc between a and b (the geometric A_{a,b} carrier).
///
/// Errors when a and b are antipodal, where "shorter" is ill-defined; the
/// recovery procedures only ever use this for ||a-b|| < 1 < L/2.
pub fn short_arc(a: &CirclePoint, b: &CirclePoint) -> Result<Arc, CircleError> {
    let fwd = a.forward_gap(b)?;
    let bwd = a.circle().circumference() - &fwd;
    match fwd.cmp(&bwd) {
        Ordering::Less | Ordering::Equal if fwd.is_zero() => {
            Arc::new(a.circle(), a.pos().clone(), QuadScalar::zero(), true, true)
        }
        Ordering::Less => Arc::new(a.circle(), a.pos().clone(), fwd, true, true),
        Ordering::Greater => Arc::new(a.circle(), b.pos().clone(), bwd, true, true),
        Ordering::Equal => Err(CircleError::AntipodalAmbiguity),
    }
}

/// Ground truth for A_{a,b}: the points of `pool` in the shorter closed arc
/// between a and b, endpoints included.
pub fn short_arc_points(
    a: &CirclePoint,
    b: &CirclePoint,
    pool: &[CirclePoint],
) -> Result<Vec<CirclePoint>, CircleError> {
    let arc = short_arc(a, b)?;
    Ok(pool.iter().filter(|p| arc.contains(p)).cloned().collect())
}

/// Direction of the shorter arc from a to b: positive (anti-clockwise) or not.
fn short_dir_positive(a: &CirclePoint, b: &CirclePoint) -> Result<bool, CircleError> {
    let fwd = a.forward_gap(b)?;
    if fwd.is_zero() {
        return Err(CircleError::CoincidentPoints);
    }
    match fwd.cmp(&a.circle().half()) {
        Ordering::Less => Ok(true),
        Ordering::Greater => Ok(false),
        Ordering::Equal => Err(CircleError::AntipodalAmbiguity),
    }
}

/// True iff moving a -> b -> c along shorter arcs keeps one direction,
/// i.e. A_{a,b} and A_{b,c} meet exactly in {b} on the continuum.
pub fn cyclically_ordered(
    a: &CirclePoint,
    b: &CirclePoint,
    c: &CirclePoint,
) -> Result<bool, CircleError> {
    if a == b || b == c || a == c {
        return Err(CircleError::CoincidentPoints);
    }
    let d1 = short_dir_positive(a, b)?;
    let d2 = short_dir_positive(b, c)?;
    if d1 != d2 {
        return Ok(false);
    }
    // same direction: the closed arcs share more than {b} only if together
    // they wrap past the start, i.e. lengths sum to >= L
    let len1 = a.dist(b)?;
    let len2 = b.dist(c)?;
    Ok(&len1 + &len2 < *a.circle().circumference())
}

/// Decompose v = q/m + r with q in {0,..,l-1} and 0 <= r < 1/m, for a circle
/// of rational circumference L = l/m irreducible.
pub fn qr_decompose(v: &CirclePoint, m: &BigInt) -> Result<(BigInt, QuadScalar), CircleError> {
    let (ell, den) = v
        .circle()
        .rational_parts()
        .ok_or(CircleError::IrrationalCircumference)?;
    if &den != m {
        return Err(CircleError::Usage(format!(
            "m = {m} is not the irreducible denominator of L = {ell}/{den}"
        )));
    }
    if !ell.gcd(m).is_one() {
        return Err(CircleError::Usage("L = l/m must be irreducible".into()));
    }
    let q = v.pos().mul_rat(&Rational::from(m.clone())).floor();
    debug_assert!(!q.is_negative() && q < ell);
    let r = v.pos() - &QuadScalar::from_rational(Rational::new(q.clone(), m.clone()));
    Ok((q, r))
}

/// True iff no two points are at a distance that is a multiple of 1/m.
/// Equivalent to all residues r_v being pairwise distinct.
pub fn is_integer_distance_free(
    points: &[CirclePoint],
    m: &BigInt,
) -> Result<bool, CircleError> {
    let m_rat = Rational::from(m.clone());
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].dist(&points[j])?;
            let scaled = d.mul_rat(&m_rat);
            if let Some(r) = scaled.as_rational() {
                if r.denom().is_one() {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn circle(n: i64, d: i64) -> Circle {
        Circle::new(QuadScalar::from_rational(rat(n, d))).unwrap()
    }

    fn pt(c: &Circle, n: i64, d: i64) -> CirclePoint {
        c.point(QuadScalar::from_rational(rat(n, d)))
    }

    #[test]
    fn rejects_small_circumference() {
        assert!(Circle::new(QuadScalar::from_int(2)).is_err());
        assert!(Circle::new(QuadScalar::from_rational(rat(5, 2))).is_ok());
    }

    #[test]
    fn dist_examples() {
        let c = circle(7, 2);
        let u = pt(&c, 0, 1);
        let v = pt(&c, 3, 1);
        assert_eq!(u.dist(&v).unwrap(), QuadScalar::from_rational(rat(1, 2)));
        assert_eq!(u.dist(&u).unwrap(), QuadScalar::zero());

        // L = 2 + sqrt2: dist(0, 2) = sqrt2 since L - 2 = sqrt2 < 2
        let ci = Circle::new(QuadScalar::from_int(2) + QuadScalar::sqrt2()).unwrap();
        let a = ci.point(QuadScalar::zero());
        let b = ci.point(QuadScalar::from_int(2));
        assert_eq!(a.dist(&b).unwrap(), QuadScalar::sqrt2());
    }

    #[test]
    fn dist_requires_same_circle() {
        let u = pt(&circle(7, 2), 0, 1);
        let v = pt(&circle(3, 1), 0, 1);
        assert!(matches!(
            u.dist(&v),
            Err(CircleError::MismatchedCircumference)
        ));
    }

    #[test]
    fn short_arc_points_examples() {
        let c = circle(3, 1);
        let a = pt(&c, 0, 1);
        let b = pt(&c, 1, 2);
        let pool = vec![pt(&c, 0, 1), pt(&c, 1, 4), pt(&c, 1, 2), pt(&c, 2, 1)];
        let got = short_arc_points(&a, &b, &pool).unwrap();
        assert_eq!(got, vec![pt(&c, 0, 1), pt(&c, 1, 4), pt(&c, 1, 2)]);

        // degenerate arc
        assert_eq!(short_arc_points(&a, &a, &pool).unwrap(), vec![a.clone()]);

        // short arc crossing 0: L = 5/2, a = 12/5, b = 1/5
        let c = circle(5, 2);
        let a = pt(&c, 12, 5);
        let b = pt(&c, 1, 5);
        let pool = vec![pt(&c, 0, 1), pt(&c, 12, 5), pt(&c, 1, 5), pt(&c, 1, 1)];
        let got = short_arc_points(&a, &b, &pool).unwrap();
        assert_eq!(got, vec![pt(&c, 0, 1), pt(&c, 12, 5), pt(&c, 1, 5)]);
    }

    #[test]
    fn short_arc_antipodal_rejected() {
        let c = circle(3, 1);
        let a = pt(&c, 0, 1);
        let b = pt(&c, 3, 2);
        assert!(matches!(
            short_arc(&a, &b),
            Err(CircleError::AntipodalAmbiguity)
        ));
    }

    #[test]
    fn cyclic_order_examples() {
        let c = circle(10, 1);
        let p0 = pt(&c, 0, 1);
        assert!(cyclically_ordered(&p0, &pt(&c, 1, 2), &pt(&c, 1, 1)).unwrap());
        assert!(!cyclically_ordered(&p0, &pt(&c, 1, 2), &pt(&c, 1, 4)).unwrap());

        let c = circle(5, 2);
        assert!(cyclically_ordered(&pt(&c, 0, 1), &pt(&c, 9, 10), &pt(&c, 9, 5)).unwrap());

        assert!(matches!(
            cyclically_ordered(&p0, &p0, &p0),
            Err(CircleError::CoincidentPoints)
        ));
    }

    #[test]
    fn qr_examples() {
        let c = circle(5, 2);
        let m = BigInt::from(2);
        let (q, r) = qr_decompose(&pt(&c, 13, 10), &m).unwrap();
        assert_eq!(q, BigInt::from(2));
        assert_eq!(r, QuadScalar::from_rational(rat(3, 10)));

        let (q, r) = qr_decompose(&pt(&c, 0, 1), &m).unwrap();
        assert_eq!(q, BigInt::from(0));
        assert!(r.is_zero());

        let c = circle(7, 2);
        let (q, r) = qr_decompose(&pt(&c, 9, 4), &m).unwrap();
        assert_eq!(q, BigInt::from(4));
        assert_eq!(r, QuadScalar::from_rational(rat(1, 4)));

        // roundtrip: q/m + r reduces back to v
        let v = pt(&c, 9, 4);
        let (q, r) = qr_decompose(&v, &m).unwrap();
        let back = c.point(QuadScalar::from_rational(Rational::new(q, m)) + r);
        assert_eq!(back, v);
    }

    #[test]
    fn qr_requires_rational_l() {
        let ci = Circle::new(QuadScalar::from_int(2) + QuadScalar::sqrt2()).unwrap();
        let v = ci.point(QuadScalar::zero());
        assert!(matches!(
            qr_decompose(&v, &BigInt::from(2)),
            Err(CircleError::IrrationalCircumference)
        ));
    }

    #[test]
    fn idf_examples() {
        let c = circle(5, 2);
        let m = BigInt::from(2);
        let pts = vec![pt(&c, 0, 1), pt(&c, 1, 2)];
        assert!(!is_integer_distance_free(&pts, &m).unwrap());

        let single = vec![pt(&c, 0, 1)];
        assert!(is_integer_distance_free(&single, &m).unwrap());

        let pts = vec![pt(&c, 0, 1), pt(&c, 1, 3), pt(&c, 8, 7)];
        assert!(is_integer_distance_free(&pts, &m).unwrap());
    }
}
