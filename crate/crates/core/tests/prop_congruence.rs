mod common;

use common::*;
use modtower::arith::prime_factors;
use modtower::congruence::{
    enumerate, in_gamma, orbit_id, pr_map, reduce_mod, reduce_to_fundamental_domain, sl2_order,
    stabilizer_of_rep, ModMatrix,
};
use modtower::group::GroupElement;
use modtower::halfplane::act;
use proptest::prelude::*;

/// A product of conjugates of `T^N` and `T_-^N`, hence in Gamma(N).
fn in_kernel(n: u32) -> impl Strategy<Value = GroupElement> {
    prop::collection::vec((sl2z(), any::<bool>(), -2i64..=2), 1..4).prop_map(move |parts| {
        parts.into_iter().fold(GroupElement::identity(), |acc, (w, low, k)| {
            let base = if low { GroupElement::t_minus() } else { GroupElement::t() };
            let x = w.mul(&base.pow(k * n as i64)).mul(&w.inv());
            acc.mul(&x)
        })
    })
}

fn level_and_kernel() -> impl Strategy<Value = (u32, GroupElement)> {
    (1u32..=8).prop_flat_map(|n| (Just(n), in_kernel(n)))
}

fn stabilizer(tau: &modtower::halfplane::HalfPlanePoint) -> Vec<GroupElement> {
    let (g, rep) = reduce_to_fundamental_domain(tau);
    stabilizer_of_rep(&rep)
        .into_iter()
        .map(|h| g.inv().mul(&h).mul(&g))
        .collect()
}

#[test]
fn orders_match_formula() {
    for n in 1..=24u32 {
        let mut expected = (n as u64).pow(3) as f64;
        let mut ps = prime_factors(n as u64);
        ps.dedup();
        for p in ps {
            expected *= 1.0 - 1.0 / (p * p) as f64;
        }
        assert_eq!(sl2_order(n).unwrap() as u64, expected.round() as u64, "N = {n}");
        assert_eq!(enumerate(n).unwrap().len(), sl2_order(n).unwrap());
    }
}

#[test]
fn kernel_exhaustive_small() {
    for n in 1..=6u32 {
        for a in -4i64..=4 {
            for b in -4i64..=4 {
                for c in -4i64..=4 {
                    for d in -4i64..=4 {
                        if a * d - b * c != 1 {
                            continue;
                        }
                        let g = GroupElement::from_ints(a, b, c, d).unwrap();
                        assert_eq!(in_gamma(&g, n), reduce_mod(&g, n).unwrap().is_identity());
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn kernel_characterization(g in sl2z(), (n, k) in level_and_kernel()) {
        prop_assert_eq!(in_gamma(&g, n), reduce_mod(&g, n).unwrap().is_identity());
        prop_assert!(in_gamma(&k, n));
        prop_assert!(reduce_mod(&k, n).unwrap().is_identity());
    }

    #[test]
    fn reduction_is_homomorphism(g in sl2z(), h in sl2z(), n in 1u32..=30) {
        let lhs = reduce_mod(&g.mul(&h), n).unwrap();
        let rhs = reduce_mod(&g, n).unwrap().mul(&reduce_mod(&h, n).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn fibre_formula(tau in point(), gamma in sl2z(), n in 1u32..=4) {
        let moved = act(&gamma, &tau);
        let same_label = orbit_id(&moved, n).unwrap() == orbit_id(&tau, n).unwrap();
        // gamma' in Gamma(N) with gamma' tau = gamma tau iff gamma Stab(tau) meets Gamma(N)
        let exists = stabilizer(&tau).iter().any(|h| in_gamma(&gamma.mul(h), n));
        prop_assert_eq!(same_label, exists);
    }

    #[test]
    fn labels_invariant_under_kernel(tau in point(), (n, k) in level_and_kernel()) {
        prop_assert_eq!(orbit_id(&act(&k, &tau), n).unwrap(), orbit_id(&tau, n).unwrap());
    }

    #[test]
    fn reduction_idempotent_and_orbit_constant(tau in point(), gamma in sl2z()) {
        let (g, rep) = reduce_to_fundamental_domain(&tau);
        prop_assert_eq!(act(&g, &tau), rep.clone());
        let (g2, rep2) = reduce_to_fundamental_domain(&rep);
        prop_assert_eq!(&rep2, &rep);
        prop_assert!(g2.is_central());
        prop_assert_eq!(reduce_to_fundamental_domain(&act(&gamma, &tau)).1, rep);
    }

    #[test]
    fn tower_identity(tau in point(), n in 1u32..=12) {
        let top = orbit_id(&tau, n).unwrap();
        for m in modtower::arith::divisors(n as u64) {
            let m = m as u32;
            prop_assert_eq!(pr_map(&top, m).unwrap(), orbit_id(&tau, m).unwrap());
        }
    }

    #[test]
    fn labels_separate_points(tau in point(), sigma in point()) {
        prop_assume!(reduce_to_fundamental_domain(&tau).1 != reduce_to_fundamental_domain(&sigma).1);
        prop_assert!(orbit_id(&tau, 1).unwrap() != orbit_id(&sigma, 1).unwrap());
    }

    #[test]
    fn mod_matrix_group_laws(n in 2u32..=12, i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>()) {
        let all = enumerate(n).unwrap();
        let (x, y) = (all[i.index(all.len())], all[j.index(all.len())]);
        prop_assert!(x.mul(&x.inv()).is_identity());
        prop_assert_eq!(x.mul(&y).det(), 1 % n);
        prop_assert_eq!(x.mul(&y).inv(), y.inv().mul(&x.inv()));
        let _: &ModMatrix = &x;
    }
}
