#![allow(dead_code)]

use modtower::arith::{int, rat, Rational};
use modtower::group::{Classification, Generator, GroupElement, Letter, Word};
use modtower::halfplane::HalfPlanePoint;
use proptest::prelude::*;

pub fn rational() -> impl Strategy<Value = Rational> {
    (-12i64..=12, 1i64..=6).prop_map(|(n, d)| rat(n, d))
}

pub fn positive_rational() -> impl Strategy<Value = Rational> {
    (1i64..=12, 1i64..=6).prop_map(|(n, d)| rat(n, d))
}

pub fn gl2plus() -> impl Strategy<Value = GroupElement> {
    (rational(), rational(), rational(), rational())
        .prop_filter_map("det > 0", |(a, b, c, d)| GroupElement::new(a, b, c, d).ok())
}

pub fn small_integral() -> impl Strategy<Value = GroupElement> {
    (-6i64..=6, -6i64..=6, -6i64..=6, -6i64..=6)
        .prop_filter_map("det > 0", |(a, b, c, d)| GroupElement::from_ints(a, b, c, d).ok())
}

pub fn letter() -> impl Strategy<Value = Letter> {
    let exp = prop_oneof![-3i64..=-1, 1i64..=3];
    let gen = prop_oneof![
        Just(Generator::S),
        Just(Generator::T),
        Just(Generator::Neg),
        positive_rational().prop_map(Generator::D),
    ];
    (gen, exp).prop_map(|(g, e)| Letter::new(g, e))
}

pub fn word() -> impl Strategy<Value = Word> {
    prop::collection::vec(letter(), 0..8).prop_map(|ls| Word::new(ls).expect("valid letters"))
}

/// A product of `S` and `T^k` letters, so an element of SL2(Z).
pub fn sl2z() -> impl Strategy<Value = GroupElement> {
    prop::collection::vec((any::<bool>(), -4i64..=4), 0..10).prop_map(|steps| {
        steps.into_iter().fold(GroupElement::identity(), |acc, (s, k)| {
            let step = if s { GroupElement::s() } else { GroupElement::t().pow(k) };
            acc.mul(&step)
        })
    })
}

pub fn elliptic() -> impl Strategy<Value = GroupElement> {
    let integral = small_integral().prop_filter("elliptic", |g| g.classify() == Classification::Elliptic);
    (integral, positive_rational()).prop_map(|(g, r)| g.scale_by(&r).expect("nonzero"))
}

pub fn point() -> impl Strategy<Value = HalfPlanePoint> {
    (prop::sample::select(vec![1u64, 2, 3, 5, 7, 11, 15]), rational(), positive_rational())
        .prop_map(|(d, x, y)| HalfPlanePoint::new(d, x, y).expect("y > 0"))
}

pub fn unit_mod(m: u32) -> impl Strategy<Value = u32> {
    let units: Vec<u32> = (1..=m.max(1)).filter(|&x| num_integer::gcd(x, m) == 1).collect();
    prop::sample::select(units)
}

pub fn one() -> Rational {
    int(1)
}
