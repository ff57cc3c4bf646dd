mod common;

use std::collections::BTreeSet;

use common::*;
use modtower::arith::Rational;
use modtower::cm::{class_polynomial, cm_from_elliptic, elliptic_from_cm, reduce_form, reduced_forms, tp_pair};
use modtower::halfplane::HalfPlanePoint;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use proptest::prelude::*;

fn discriminant(bound: i64) -> impl Strategy<Value = i64> {
    (3..=bound).prop_map(|d| -d).prop_filter("disc = 0, 1 mod 4", |d| d.rem_euclid(4) <= 1)
}

fn is_square(q: &Rational) -> bool {
    let root = |n: &BigInt| {
        let r = n.sqrt();
        &r * &r == *n
    };
    q.is_positive() && root(q.numer()) && root(q.denom())
}

fn cm_point() -> impl Strategy<Value = HalfPlanePoint> {
    (discriminant(100), any::<prop::sample::Index>()).prop_map(|(d, i)| {
        let forms = reduced_forms(d).unwrap();
        forms[i.index(forms.len())].point()
    })
}

#[test]
fn round_trip_all_forms() {
    for d in 3..=200i64 {
        let disc = -d;
        if disc.rem_euclid(4) > 1 {
            continue;
        }
        for f in reduced_forms(disc).unwrap() {
            let e = elliptic_from_cm(f.form).unwrap();
            let (tau, back) = cm_from_elliptic(&e).unwrap();
            assert_eq!(tau, f.point());
            assert_eq!(back, f);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn disc_differs_by_square(e in elliptic()) {
        let (_, cm) = cm_from_elliptic(&e).unwrap();
        let tr = e.trace();
        let raw = &tr * &tr - Rational::from_integer(4.into()) * e.det();
        prop_assert!(is_square(&(raw / Rational::from_integer(cm.disc.into()))));
    }

    #[test]
    fn reduction_is_stable(a in 1i64..30, b in -30i64..30, c in 1i64..30) {
        prop_assume!(b * b - 4 * a * c < 0);
        let r = reduce_form(a, b, c);
        prop_assert_eq!(reduce_form(r.0, r.1, r.2), r);
        prop_assert_eq!(r.1 * r.1 - 4 * r.0 * r.2, b * b - 4 * a * c);
    }

    #[test]
    fn tp_mirror_symmetry(s1 in cm_point(), s2 in cm_point()) {
        let pairs = tp_pair(&s1, &s2).unwrap();
        prop_assert!(pairs.contains(&(s1.clone(), s2.clone())));
        let mirrored: BTreeSet<String> = tp_pair(&s1.mirror(), &s2.mirror())
            .unwrap()
            .iter()
            .map(|(a, b)| format!("{a}|{b}"))
            .collect();
        let expected: BTreeSet<String> = pairs
            .iter()
            .map(|(a, b)| format!("{}|{}", a.mirror(), b.mirror()))
            .collect();
        prop_assert_eq!(mirrored, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn degree_is_class_number(disc in discriminant(60)) {
        let h = class_polynomial(disc).unwrap();
        prop_assert_eq!(h.degree, reduced_forms(disc).unwrap().len());
        prop_assert_eq!(h.coefficients[0].to_i64(), Some(1));
    }
}
