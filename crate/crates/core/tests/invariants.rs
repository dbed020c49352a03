//! Property-based invariants for the exact scalar field, circle geometry
//! and the adjacency oracle. Every check is decided in exact arithmetic.

use num_bigint::BigInt;
use num_traits::Signed;
use proptest::prelude::*;

use circle_rgg::exact::{parse_quad, rat, QuadScalar, Rational};
use circle_rgg::geometry::{qr_decompose, short_arc, Arc, Circle};
use circle_rgg::oracle::GraphOracle;

fn circles() -> impl Strategy<Value = Circle> {
    prop::sample::select(vec!["5/2", "3", "7/2", "13/2", "2+1*sqrt2"])
        .prop_map(|l| Circle::new(parse_quad(l).unwrap()).unwrap())
}

fn quads() -> impl Strategy<Value = QuadScalar> {
    (-2000i64..2000, 1i64..64, -200i64..200, 1i64..64)
        .prop_map(|(an, ad, bn, bd)| QuadScalar::new(rat(an, ad), rat(bn, bd)))
}

fn small_quads() -> impl Strategy<Value = QuadScalar> {
    (-64i64..64, 1i64..32, -8i64..8, 1i64..32)
        .prop_map(|(an, ad, bn, bd)| QuadScalar::new(rat(an, ad), rat(bn, bd)))
}

proptest! {
    #[test]
    fn reduce_lands_in_fundamental_domain(c in circles(), x in quads()) {
        let r = c.reduce(&x);
        prop_assert!(!r.is_negative());
        prop_assert!(&r < c.circumference());
        prop_assert_eq!(c.reduce(&r), r.clone());
        // shifting by whole turns does not change the representative
        let shifted = &x + &c.circumference().mul_rat(&rat(3, 1));
        prop_assert_eq!(c.reduce(&shifted), r);
    }

    #[test]
    fn dist_is_a_metric_bounded_by_half(c in circles(), x in quads(), y in quads(), z in quads()) {
        let px = c.point(x);
        let py = c.point(y);
        let pz = c.point(z);
        let dxy = px.dist(&py).unwrap();
        prop_assert_eq!(&dxy, &py.dist(&px).unwrap());
        prop_assert!(!dxy.is_negative());
        prop_assert!(dxy <= c.half());
        prop_assert!(px.dist(&px).unwrap().is_zero());
        let dxz = px.dist(&pz).unwrap();
        let dyz = py.dist(&pz).unwrap();
        prop_assert!(dxz <= &dxy + &dyz);
    }

    #[test]
    fn forward_gaps_complement_to_a_full_turn(c in circles(), x in quads(), y in quads()) {
        let px = c.point(x);
        let py = c.point(y);
        let fwd = px.forward_gap(&py).unwrap();
        let bwd = py.forward_gap(&px).unwrap();
        if px == py {
            prop_assert!(fwd.is_zero() && bwd.is_zero());
        } else {
            prop_assert_eq!(&fwd + &bwd, c.circumference().clone());
        }
    }

    #[test]
    fn floor_brackets_the_value(x in quads()) {
        let f = x.floor();
        let lo = QuadScalar::from_rational(Rational::from(f.clone()));
        let hi = QuadScalar::from_rational(Rational::from(f + 1));
        prop_assert!(lo <= x);
        prop_assert!(x < hi);
    }

    #[test]
    fn encoding_roundtrips(x in quads()) {
        prop_assert_eq!(QuadScalar::decode(&x.encode()).unwrap(), x);
    }

    #[test]
    fn ordering_agrees_with_difference_sign(x in quads(), y in quads()) {
        let ord = x.cmp(&y);
        prop_assert_eq!(ord, (&x - &y).sign());
        prop_assert_eq!(ord.reverse(), y.cmp(&x));
    }

    #[test]
    fn snap_dyadic_moves_down_by_less_than_the_grid(x in quads(), m in 4u32..64) {
        let s = x.snap_dyadic(m);
        prop_assert!(s <= x);
        let gap = &x - &s;
        let bound = QuadScalar::new(rat(1, 1), rat(1, 1))
            .mul_rat(&Rational::new(BigInt::from(1), BigInt::from(1) << m));
        prop_assert!(gap < bound);
    }

    #[test]
    fn arc_membership_matches_forward_gap(c in circles(), s in quads(), t in quads(), x in quads()) {
        let start = c.reduce(&s);
        let len = c.reduce(&t).mul_rat(&rat(1, 2));
        let arc = Arc::new(&c, start.clone(), len.clone(), true, true).unwrap();
        let p = c.point(x);
        let gap = arc.start().forward_gap(&p).unwrap();
        prop_assert_eq!(arc.contains(&p), gap <= len);
    }

    #[test]
    fn short_arc_length_is_the_distance(c in circles(), x in quads(), y in quads()) {
        let px = c.point(x);
        let py = c.point(y);
        let d = px.dist(&py).unwrap();
        if d < c.half() {
            let arc = short_arc(&px, &py).unwrap();
            prop_assert_eq!(arc.length().clone(), d);
            prop_assert!(arc.contains(&px) && arc.contains(&py));
        }
    }

    #[test]
    fn qr_decomposition_recomposes(x in quads()) {
        let c = Circle::new(QuadScalar::from_rational(rat(5, 2))).unwrap();
        let m = BigInt::from(2);
        let v = c.point(x);
        let (q, r) = qr_decompose(&v, &m).unwrap();
        prop_assert!(!q.is_negative() && q < BigInt::from(5));
        prop_assert!(!r.is_negative());
        prop_assert!(r < QuadScalar::from_rational(rat(1, 2)));
        let back = QuadScalar::from_rational(Rational::new(q, m)) + r;
        prop_assert_eq!(back, v.pos().clone());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn edges_are_symmetric_and_unit_bounded(seed in 0u64..1000, xs in prop::collection::vec(small_quads(), 2..10)) {
        let c = Circle::new(parse_quad("7/2").unwrap()).unwrap();
        let mut o = GraphOracle::new(c, rat(1, 2), seed).unwrap();
        let mut ids = Vec::new();
        for x in xs {
            if let Ok(id) = o.insert(x) {
                ids.push(id);
            }
        }
        let one = QuadScalar::one();
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let e = o.adjacent(ids[i], ids[j]).unwrap();
                prop_assert_eq!(e, o.adjacent(ids[j], ids[i]).unwrap());
                let d = o.point(ids[i]).unwrap().dist(o.point(ids[j]).unwrap()).unwrap();
                if e {
                    prop_assert!(d < one);
                }
                if d >= one {
                    prop_assert!(!e);
                }
            }
        }
    }
}
