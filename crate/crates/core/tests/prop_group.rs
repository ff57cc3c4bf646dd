mod common;

use common::*;
use modtower::arith::int;
use modtower::group::{decompose_gl2plus, word_decompose_sl2, Classification, GroupElement};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn word_concat_is_product(w1 in word(), w2 in word(), w3 in word()) {
        let (a, b, c) = (w1.eval(), w2.eval(), w3.eval());
        prop_assert_eq!(w1.concat(&w2).eval(), a.mul(&b));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(w1.inverse().eval(), a.inv());
        prop_assert_eq!(a.mul(&a.inv()), GroupElement::identity());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn diagonal_relations(q in positive_rational(), r in positive_rational(), n in 1i64..=12) {
        let dq = GroupElement::d(&q).unwrap();
        let dr = GroupElement::d(&r).unwrap();
        prop_assert_eq!(dq.mul(&dr), GroupElement::d(&(&q * &r)).unwrap());
        let s = GroupElement::s();
        prop_assert_eq!(s.mul(&dq), dq.inv().mul(&s).scale_by(&q).unwrap());
        let dn = GroupElement::d(&int(n)).unwrap();
        prop_assert_eq!(dn.mul(&GroupElement::t()), GroupElement::t().pow(n).mul(&dn));
        prop_assert_eq!(dn.mul(&GroupElement::t_minus().pow(n)), GroupElement::t_minus().mul(&dn));
    }

    #[test]
    fn classify_forms_agree(g in gl2plus()) {
        let tr = g.trace();
        let by_trace = &tr * &tr < int(4) * g.det();
        let dma = g.d_entry() - g.a();
        let by_disc = &dma * &dma < int(-4) * g.b() * g.c();
        prop_assert_eq!(by_trace, by_disc);
        prop_assert_eq!(g.elliptic_by_discriminant(), by_disc);
        prop_assert_eq!(g.classify() == Classification::Elliptic, by_trace && !g.is_central());
    }

    #[test]
    fn involution_is_automorphism(g in gl2plus(), h in gl2plus()) {
        prop_assert_eq!(g.mul(&h).involution(), g.involution().mul(&h.involution()));
        prop_assert_eq!(g.involution().classify(), g.classify());
        prop_assert_eq!(g.involution().involution(), g.clone());
    }

    #[test]
    fn sl2_decomposition_round_trips(g in sl2z()) {
        let w = word_decompose_sl2(&g).unwrap();
        prop_assert_eq!(w.eval(), g);
    }

    #[test]
    fn gl2plus_decomposition_reassembles(g in gl2plus()) {
        prop_assert_eq!(decompose_gl2plus(&g).reassemble(), g);
    }

    #[test]
    fn literal_round_trips(g in gl2plus(), w in word()) {
        prop_assert_eq!(g.to_literal().parse::<GroupElement>().unwrap(), g);
        let back: modtower::group::Word = w.to_string().parse().unwrap();
        prop_assert_eq!(back, w);
    }
}
