mod common;

use common::*;
use modtower::congruence::in_gamma;
use modtower::exec::Exec;
use modtower::group::GroupElement;
use modtower::halfplane::act;
use modtower::hecke::{component_count, correspondence_degree, same_hecke_orbit, CorrespondenceDescriptor};
use proptest::prelude::*;

/// Primitive integral matrices of determinant 2 or 3.
fn small_det() -> impl Strategy<Value = GroupElement> {
    (-3i64..=3, -3i64..=3, -3i64..=3, -3i64..=3).prop_filter_map("det in {2, 3}, primitive", |(a, b, c, d)| {
        let det = a * d - b * c;
        let g = num_integer::gcd(num_integer::gcd(a, b), num_integer::gcd(c, d));
        ((det == 2 || det == 3) && g == 1).then(|| GroupElement::from_ints(a, b, c, d).unwrap())
    })
}

fn kernel_element(n: u32) -> impl Strategy<Value = GroupElement> {
    (sl2z(), -1i64..=1, any::<bool>()).prop_map(move |(w, k, low)| {
        let base = if low { GroupElement::t_minus() } else { GroupElement::t() };
        w.mul(&base.pow(k * n as i64)).mul(&w.inv())
    })
}

fn degrees(g: &GroupElement, n: u32) -> (u64, u64) {
    let desc = CorrespondenceDescriptor::new(g, n).unwrap();
    let r = correspondence_degree(&desc, Exec::default());
    (r.left, r.right)
}

#[test]
fn classical_degrees() {
    for p in [2i64, 3, 5] {
        let g = GroupElement::from_ints(p, 0, 0, 1).unwrap();
        assert_eq!(degrees(&g, 1), (p as u64 + 1, p as u64 + 1));
        let c = component_count(&CorrespondenceDescriptor::new(&g, 1).unwrap(), Exec::default()).unwrap();
        assert_eq!(c.count, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn double_coset_invariance(
        g in small_det(),
        (n, k1, k2) in (1u32..=2).prop_flat_map(|n| (Just(n), kernel_element(n), kernel_element(n))),
    ) {
        prop_assert!(in_gamma(&k1, n) && in_gamma(&k2, n));
        prop_assert_eq!(degrees(&k1.mul(&g).mul(&k2), n), degrees(&g, n));
    }

    #[test]
    fn transpose_symmetry(g in small_det(), n in 1u32..=2) {
        let (l, r) = degrees(&g, n);
        let (l2, r2) = degrees(&g.adjugate(), n);
        prop_assert_eq!((l, r), (r2, l2));
    }

    #[test]
    fn components_bounded_by_phi(g in small_det(), n in 1u32..=3) {
        let desc = CorrespondenceDescriptor::new(&g, n).unwrap();
        let c = component_count(&desc, Exec::default()).unwrap();
        prop_assert!(c.count <= c.phi);
        if c.exact {
            let mut wider = desc.clone();
            wider.modulus *= 3;
            let c3 = component_count(&wider, Exec::default()).unwrap();
            prop_assert_eq!(c3.count, c.count);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn hecke_orbit_is_equivalence(a in point(), b in point(), c in point()) {
        prop_assert!(same_hecke_orbit(&a, &a).same);
        let ab = same_hecke_orbit(&a, &b);
        prop_assert_eq!(ab.same, same_hecke_orbit(&b, &a).same);
        if ab.same && same_hecke_orbit(&b, &c).same {
            prop_assert!(same_hecke_orbit(&a, &c).same);
        }
        if let Some(w) = &ab.witness {
            prop_assert_eq!(&act(w, &a), &b);
        }
    }
}
