//! Principal congruence subgroups, the finite groups SL2(Z/N), reduction to
//! the standard fundamental domain and canonical labels for points of the
//! level-N quotient `Gamma(N) \ H`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::arith::{ext_gcd, floor_half_up, gcd, int, Rational};
use crate::exec::Exec;
use crate::group::GroupElement;
use crate::halfplane::{act, HalfPlanePoint};

pub type Level = u32;

pub const DEFAULT_ENUM_BOUND: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CongruenceError {
    #[error("{0} is not in SL2(Z): entries must be integers and the determinant 1")]
    NotInSL2Z(Box<GroupElement>),
    #[error("level {level} exceeds the enumeration bound {bound}")]
    BoundExceeded { level: u64, bound: u32 },
    #[error("{m} does not divide {n}")]
    NotDivisor { m: u32, n: u32 },
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("matrix {entries:?} does not have determinant 1 mod {n}")]
    NotUnimodular { n: u32, entries: [i64; 4] },
}

fn check_level(n: u32) -> Result<(), CongruenceError> {
    if n == 0 {
        Err(CongruenceError::ZeroLevel)
    } else {
        Ok(())
    }
}

pub fn check_bound(level: u64, bound: u32) -> Result<(), CongruenceError> {
    if level > bound as u64 {
        Err(CongruenceError::BoundExceeded { level, bound })
    } else {
        Ok(())
    }
}

/// An element of SL2(Z/N). Entries are stored as residues in `0..N`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModMatrix {
    n: u32,
    e: [u32; 4],
}

impl ModMatrix {
    pub fn new(n: u32, entries: [i64; 4]) -> Result<Self, CongruenceError> {
        check_level(n)?;
        let e = entries.map(|x| x.rem_euclid(n as i64) as u32);
        let m = ModMatrix { n, e };
        if m.det() != 1 % n {
            return Err(CongruenceError::NotUnimodular { n, entries });
        }
        Ok(m)
    }

    /// Caller guarantees reduced entries and unit determinant.
    pub(crate) fn raw(n: u32, e: [u32; 4]) -> Self {
        ModMatrix { n, e }
    }

    pub fn identity(n: u32) -> Self {
        ModMatrix::raw(n, [1 % n, 0, 0, 1 % n])
    }

    pub fn level(&self) -> u32 {
        self.n
    }

    pub fn entries(&self) -> [u32; 4] {
        self.e
    }

    pub fn det(&self) -> u32 {
        let n = self.n as u64;
        let [a, b, c, d] = self.e.map(|x| x as u64);
        ((a * d + n * n - (b * c) % n) % n) as u32
    }

    pub fn mul(&self, o: &ModMatrix) -> ModMatrix {
        assert_eq!(self.n, o.n, "level mismatch");
        let n = self.n as u64;
        let [a, b, c, d] = self.e.map(|x| x as u64);
        let [p, q, r, s] = o.e.map(|x| x as u64);
        ModMatrix::raw(
            self.n,
            [
                ((a * p + b * r) % n) as u32,
                ((a * q + b * s) % n) as u32,
                ((c * p + d * r) % n) as u32,
                ((c * q + d * s) % n) as u32,
            ],
        )
    }

    pub fn inv(&self) -> ModMatrix {
        let n = self.n;
        let [a, b, c, d] = self.e;
        ModMatrix::raw(n, [d, (n - b) % n, (n - c) % n, a])
    }

    pub fn neg(&self) -> ModMatrix {
        let n = self.n;
        ModMatrix::raw(n, self.e.map(|x| (n - x) % n))
    }

    pub fn is_identity(&self) -> bool {
        *self == ModMatrix::identity(self.n)
    }

    /// Reduction to a divisor level.
    pub fn reduce(&self, m: u32) -> Result<ModMatrix, CongruenceError> {
        check_level(m)?;
        if self.n % m != 0 {
            return Err(CongruenceError::NotDivisor { m, n: self.n });
        }
        Ok(ModMatrix::raw(m, self.e.map(|x| x % m)))
    }

    pub fn to_literal(&self) -> String {
        format!("{},{},{},{}", self.e[0], self.e[1], self.e[2], self.e[3])
    }
}

impl fmt::Display for ModMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.e;
        write!(f, "[[{a},{b}],[{c},{d}]] mod {}", self.n)
    }
}

impl fmt::Debug for ModMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for ModMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.e.serialize(ser)
    }
}

fn big_mod(x: &BigInt, n: u32) -> u32 {
    let r = x % BigInt::from(n);
    let r = if r.is_negative() { r + BigInt::from(n) } else { r };
    r.to_u32().expect("residue fits")
}

pub fn reduce_mod(g: &GroupElement, n: u32) -> Result<ModMatrix, CongruenceError> {
    check_level(n)?;
    if !g.is_sl2z() {
        return Err(CongruenceError::NotInSL2Z(Box::new(g.clone())));
    }
    let e = g.integer_entries().expect("integral");
    Ok(ModMatrix::raw(n, [&e[0], &e[1], &e[2], &e[3]].map(|x| big_mod(x, n))))
}

/// Membership in Gamma(N): integral, determinant 1, congruent to I mod N.
pub fn in_gamma(g: &GroupElement, n: u32) -> bool {
    reduce_mod(g, n).map(|m| m.is_identity()).unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Enumeration with an at-most-once cache

type Cell = Arc<OnceLock<Arc<Vec<ModMatrix>>>>;

struct EnumCache {
    cells: HashMap<u32, Cell>,
    populations: HashMap<u32, usize>,
}

fn cache() -> &'static Mutex<EnumCache> {
    static CACHE: OnceLock<Mutex<EnumCache>> = OnceLock::new();
    CACHE.get_or_init(|| {
        Mutex::new(EnumCache {
            cells: HashMap::new(),
            populations: HashMap::new(),
        })
    })
}

fn compute_sl2(n: u32) -> Vec<ModMatrix> {
    let rows = Exec::default().map_range(n as u64, |a| {
        let mut out = Vec::new();
        let a = a as u32;
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let m = ModMatrix::raw(n, [a, b, c, d]);
                    if m.det() == 1 % n {
                        out.push(m);
                    }
                }
            }
        }
        out
    });
    let v: Vec<ModMatrix> = rows.into_iter().flatten().collect();
    cache()
        .lock()
        .expect("enumeration cache poisoned")
        .populations
        .entry(n)
        .and_modify(|c| *c += 1)
        .or_insert(1);
    v
}

/// All of SL2(Z/N) in lexicographic order, memoized per level.
pub fn enumerate_bounded(n: u32, bound: u32) -> Result<Arc<Vec<ModMatrix>>, CongruenceError> {
    check_level(n)?;
    check_bound(n as u64, bound)?;
    let cell = {
        let mut guard = cache().lock().expect("enumeration cache poisoned");
        guard.cells.entry(n).or_default().clone()
    };
    Ok(cell.get_or_init(|| Arc::new(compute_sl2(n))).clone())
}

pub fn enumerate(n: u32) -> Result<Arc<Vec<ModMatrix>>, CongruenceError> {
    enumerate_bounded(n, DEFAULT_ENUM_BOUND)
}

pub fn sl2_order_bounded(n: u32, bound: u32) -> Result<usize, CongruenceError> {
    Ok(enumerate_bounded(n, bound)?.len())
}

pub fn sl2_order(n: u32) -> Result<usize, CongruenceError> {
    sl2_order_bounded(n, DEFAULT_ENUM_BOUND)
}

/// How many times the enumeration of level `n` has been computed.
pub fn cache_populations(n: u32) -> usize {
    cache()
        .lock()
        .expect("enumeration cache poisoned")
        .populations
        .get(&n)
        .copied()
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Lifting

/// An integral determinant-one matrix reducing to `m`.
pub fn lift_sl2(m: &ModMatrix) -> GroupElement {
    let n = m.n as i64;
    if n == 1 {
        return GroupElement::identity();
    }
    let [a, b, c, d] = m.e.map(|x| x as i64);
    let mut c1 = c;
    let mut d1 = d;
    if gcd(c1, d1) != 1 {
        if c1 == 0 {
            c1 = n;
        }
        // gcd(c, d, N) = 1, so some d + kN is coprime to c1.
        let mut k = 0;
        while gcd(c1, d + k * n) != 1 {
            k += 1;
        }
        d1 = d + k * n;
    }
    let (_, x, y) = ext_gcd(d1, c1);
    let (a0, b0) = (x, -y);
    let u = ((b as i128 * a0 as i128 - a as i128 * b0 as i128).rem_euclid(n as i128)) as i64;
    let base = GroupElement::from_ints(a0, b0, c1, d1).expect("det 1");
    GroupElement::t().pow(u).mul(&base)
}

// ---------------------------------------------------------------------------
// Fundamental domain

pub fn in_fundamental_domain(tau: &HalfPlanePoint) -> bool {
    let x = tau.x();
    let half = Rational::new(1.into(), 2.into());
    let r = tau.norm_sq();
    *x >= -half.clone() && *x < half && r >= int(1) && (r != int(1) || !x.is_positive())
}

/// Returns `(gamma, rep)` with `rep = gamma . tau` in the standard
/// fundamental domain: `-1/2 <= Re < 1/2`, `|rep| >= 1`, and `Re <= 0` on the
/// unit circle.
pub fn reduce_to_fundamental_domain(tau: &HalfPlanePoint) -> (GroupElement, HalfPlanePoint) {
    let s = GroupElement::s();
    let mut gamma = GroupElement::identity();
    let mut cur = tau.clone();
    loop {
        let k = floor_half_up(cur.x());
        if !k.is_zero() {
            let shift = GroupElement::new(int(1), -Rational::from_integer(k), int(0), int(1))
                .expect("det 1");
            cur = act(&shift, &cur);
            gamma = shift.mul(&gamma);
        }
        if cur.norm_sq() < int(1) {
            cur = act(&s, &cur);
            gamma = s.mul(&gamma);
        } else {
            break;
        }
    }
    if cur.norm_sq().is_one() && cur.x().is_positive() {
        cur = act(&s, &cur);
        gamma = s.mul(&gamma);
    }
    debug_assert!(in_fundamental_domain(&cur));
    (gamma, cur)
}

/// The stabilizer of a fundamental-domain representative in SL2(Z).
pub fn stabilizer_of_rep(rep: &HalfPlanePoint) -> Vec<GroupElement> {
    let gen = if *rep == HalfPlanePoint::i() {
        GroupElement::s()
    } else if *rep == HalfPlanePoint::rho() {
        GroupElement::s().mul(&GroupElement::t())
    } else {
        GroupElement::neg_identity()
    };
    let mut out = vec![GroupElement::identity()];
    let mut cur = gen.clone();
    while !cur.is_central() || cur.a().is_negative() {
        out.push(cur.clone());
        cur = cur.mul(&gen);
    }
    out
}

// ---------------------------------------------------------------------------
// Orbit labels

/// A point of `Gamma(N) \ H`: the fundamental-domain representative of its
/// SL2(Z)-orbit plus a coset label in SL2(Z/N), minimized over the
/// representative's stabilizer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct LevelOrbit {
    #[serde(rename = "N")]
    pub n: u32,
    pub rep: HalfPlanePoint,
    pub coset: ModMatrix,
}

fn canonical_coset(h: &ModMatrix, stab: &[ModMatrix]) -> ModMatrix {
    stab.iter()
        .map(|s| h.mul(s))
        .min()
        .expect("stabilizer contains the identity")
}

fn stab_mod(rep: &HalfPlanePoint, n: u32) -> Vec<ModMatrix> {
    stabilizer_of_rep(rep)
        .iter()
        .map(|g| reduce_mod(g, n).expect("integral stabilizer"))
        .collect()
}

pub fn orbit_id_bounded(tau: &HalfPlanePoint, n: u32, bound: u32) -> Result<LevelOrbit, CongruenceError> {
    check_level(n)?;
    check_bound(n as u64, bound)?;
    let (gamma0, rep) = reduce_to_fundamental_domain(tau);
    let h = reduce_mod(&gamma0.inv(), n)?;
    let coset = canonical_coset(&h, &stab_mod(&rep, n));
    Ok(LevelOrbit { n, rep, coset })
}

pub fn orbit_id(tau: &HalfPlanePoint, n: u32) -> Result<LevelOrbit, CongruenceError> {
    orbit_id_bounded(tau, n, DEFAULT_ENUM_BOUND)
}

/// The image of a level-N orbit at level `m | N`.
pub fn pr_map(o: &LevelOrbit, m: u32) -> Result<LevelOrbit, CongruenceError> {
    check_level(m)?;
    let h = o.coset.reduce(m)?;
    let coset = canonical_coset(&h, &stab_mod(&o.rep, m));
    Ok(LevelOrbit {
        n: m,
        rep: o.rep.clone(),
        coset,
    })
}

/// A point of H in the orbit described by the label: `lift(coset) . rep`.
pub fn orbit_point(o: &LevelOrbit) -> HalfPlanePoint {
    act(&lift_sl2(&o.coset), &o.rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn m(a: i64, b: i64, c: i64, d: i64) -> GroupElement {
        GroupElement::from_ints(a, b, c, d).unwrap()
    }

    fn p(s: &str) -> HalfPlanePoint {
        s.parse().unwrap()
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduce_mod(&GroupElement::t(), 2).unwrap().entries(), [1, 1, 0, 1]);
        assert!(reduce_mod(&GroupElement::neg_identity(), 2).unwrap().is_identity());
        assert!(matches!(
            reduce_mod(&GroupElement::d(&int(2)).unwrap(), 3),
            Err(CongruenceError::NotInSL2Z(_))
        ));
    }

    #[test]
    fn gamma_membership() {
        assert!(in_gamma(&m(1, 2, 0, 1), 2));
        assert!(!in_gamma(&GroupElement::t(), 2));
        assert!(in_gamma(&GroupElement::neg_identity(), 2));
        assert!(!in_gamma(&GroupElement::neg_identity(), 3));
        assert!(!in_gamma(&GroupElement::d(&rat(1, 2)).unwrap(), 2));
    }

    #[test]
    fn small_orders() {
        assert_eq!(sl2_order(1).unwrap(), 1);
        assert_eq!(sl2_order(2).unwrap(), 6);
        assert_eq!(sl2_order(6).unwrap(), sl2_order(2).unwrap() * sl2_order(3).unwrap());
        assert_eq!(sl2_order(6).unwrap(), 144);
        assert!(matches!(sl2_order(25), Err(CongruenceError::BoundExceeded { .. })));
        assert_eq!(sl2_order_bounded(25, 30).unwrap(), 15000);
        assert!(matches!(sl2_order(0), Err(CongruenceError::ZeroLevel)));
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_sl2(&ModMatrix::identity(7)), GroupElement::identity());
        let w = ModMatrix::new(2, [0, 1, 1, 0]).unwrap();
        assert_eq!(lift_sl2(&w), GroupElement::s());
        for n in 1..=12 {
            for x in enumerate(n).unwrap().iter() {
                let g = lift_sl2(x);
                assert!(g.is_sl2z());
                assert_eq!(reduce_mod(&g, n).unwrap(), *x, "n={n}");
            }
        }
    }

    #[test]
    fn fundamental_domain_examples() {
        let (g, r) = reduce_to_fundamental_domain(&p("2+i"));
        assert_eq!(r, HalfPlanePoint::i());
        assert_eq!(g, GroupElement::t().pow(-2));
        let (g, r) = reduce_to_fundamental_domain(&p("1/2i"));
        assert_eq!((g, r), (GroupElement::s(), p("2i")));
        let (_, r) = reduce_to_fundamental_domain(&p("1/2+1/2√-3"));
        assert_eq!(r, HalfPlanePoint::rho());
        let (_, r) = reduce_to_fundamental_domain(&p("7/25+24/25i"));
        assert_eq!(r, p("-7/25+24/25i"));
    }

    #[test]
    fn stabilizers() {
        assert_eq!(stabilizer_of_rep(&HalfPlanePoint::i()).len(), 4);
        assert_eq!(stabilizer_of_rep(&HalfPlanePoint::rho()).len(), 6);
        assert_eq!(stabilizer_of_rep(&p("2i")).len(), 2);
        for tau in [HalfPlanePoint::i(), HalfPlanePoint::rho(), p("2i")] {
            for g in stabilizer_of_rep(&tau) {
                assert_eq!(act(&g, &tau), tau);
            }
        }
    }

    #[test]
    fn orbit_examples() {
        let i = HalfPlanePoint::i();
        assert_eq!(orbit_id(&i, 2).unwrap(), orbit_id(&p("2+i"), 2).unwrap());
        assert_ne!(orbit_id(&i, 2).unwrap(), orbit_id(&p("1+i"), 2).unwrap());
        assert_eq!(orbit_id(&p("1+i"), 1).unwrap(), orbit_id(&i, 1).unwrap());
        assert_ne!(orbit_id(&p("2i"), 1).unwrap(), orbit_id(&i, 1).unwrap());
        let tau = p("1/3+1/2√-7");
        let o = orbit_id(&tau, 12).unwrap();
        assert_eq!(pr_map(&o, 12).unwrap(), o);
        assert_eq!(pr_map(&o, 3).unwrap(), orbit_id(&tau, 3).unwrap());
        assert_eq!(
            pr_map(&pr_map(&o, 6).unwrap(), 3).unwrap(),
            pr_map(&o, 3).unwrap()
        );
        assert!(matches!(pr_map(&o, 5), Err(CongruenceError::NotDivisor { .. })));
        assert!(matches!(orbit_id(&tau, 30), Err(CongruenceError::BoundExceeded { .. })));
    }

    #[test]
    fn orbit_point_round_trip() {
        let tau = p("2/7+1/3√-5");
        for n in [1, 2, 5, 12] {
            let o = orbit_id(&tau, n).unwrap();
            assert_eq!(orbit_id(&orbit_point(&o), n).unwrap(), o);
        }
    }

    /// `N^3 prod_{p | N} (1 - p^-2)`.
    fn sl2_order_formula(n: u32) -> u64 {
        let n = n as u64;
        crate::arith::prime_factors(n)
            .into_iter()
            .fold(n * n * n, |acc, p| acc / (p * p) * (p * p - 1))
    }

    #[test]
    fn order_formula_matches_enumeration() {
        for n in 1..=24 {
            assert_eq!(sl2_order(n).unwrap() as u64, sl2_order_formula(n), "n={n}");
        }
    }

    #[test]
    fn json_shape() {
        let o = orbit_id(&HalfPlanePoint::i(), 3).unwrap();
        let v = serde_json::to_value(&o).unwrap();
        assert_eq!(v["N"], 3);
        assert_eq!(v["rep"]["D"], 1);
        assert!(v["coset"].is_array());
    }

}
