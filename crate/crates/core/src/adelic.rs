//! Truncated elements of `Delta(Q+) . SL2(A_f)`: an exact positive rational
//! diagonal part `d_q` together with a compatible family of SL2(Z/m) layers
//! for every divisor `m` of a precision modulus `M`.
//!
//! Also the rigidity solver: given images `s'`, `t'` of the generators that
//! satisfy the constraint system
//!
//! ```text
//! s' d_{-1} = d'_{-1} s',   s'^2 = -I,   d_n t' = t'^n d_n (all n),   (s't')^3 = +-I
//! ```
//!
//! it recovers the unit `lambda` with `t' = d_lambda t d_lambda^-1` and
//! `s' = +-d_lambda s d_lambda^-1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::arith::{divisors, gcd, mod_inv, units_mod, Rational};
use crate::congruence::{enumerate_bounded, CongruenceError, ModMatrix, DEFAULT_ENUM_BOUND};
use crate::exec::Exec;
use crate::group::{format_rational, GroupElement};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdelicError {
    #[error("modulus {modulus} is not usable: {reason}")]
    BadModulus { modulus: u32, reason: String },
    #[error("precision mismatch: {left} vs {right}")]
    PrecisionMismatch { left: u32, right: u32 },
    #[error("{value} is not a unit mod {modulus}")]
    NotUnit { value: i64, modulus: u32 },
    #[error("inconsistent at layer {layer}: {equation} fails")]
    Inconsistent { layer: u32, equation: String },
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
}

/// A residue in `(Z/M)^x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TruncatedUnit {
    #[serde(rename = "M")]
    m: u32,
    value: u32,
}

impl TruncatedUnit {
    pub fn new(value: i64, m: u32) -> Result<Self, AdelicError> {
        if m == 0 {
            return Err(CongruenceError::ZeroLevel.into());
        }
        let v = value.rem_euclid(m as i64);
        if gcd(v, m as i64) != 1 && m != 1 {
            return Err(AdelicError::NotUnit { value, modulus: m });
        }
        Ok(TruncatedUnit { m, value: v as u32 })
    }

    pub fn one(m: u32) -> Self {
        TruncatedUnit { m, value: 1 % m }
    }

    pub fn modulus(&self) -> u32 {
        self.m
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn mul(&self, o: &TruncatedUnit) -> Result<TruncatedUnit, AdelicError> {
        if self.m != o.m {
            return Err(AdelicError::PrecisionMismatch { left: self.m, right: o.m });
        }
        let v = (self.value as u64 * o.value as u64 % self.m as u64) as u32;
        Ok(TruncatedUnit { m: self.m, value: v })
    }

    pub fn inv(&self) -> TruncatedUnit {
        let v = mod_inv(self.value as i64, self.m as i64).expect("unit") as u32;
        TruncatedUnit { m: self.m, value: v }
    }

    fn residue(&self, m: u32) -> u64 {
        (self.value % m) as u64
    }
}

impl fmt::Display for TruncatedUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.value, self.m)
    }
}

/// `d_q . h` truncated at precision `M`: `h` is kept as its reductions modulo
/// every divisor of `M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedAdelic {
    m: u32,
    q: Rational,
    layers: BTreeMap<u32, ModMatrix>,
}

fn residue_of(x: &Rational, m: u32) -> Option<u32> {
    let md = BigInt::from(m);
    let den = x.denom().mod_floor(&md).to_i64().expect("small");
    let inv = mod_inv(den, m as i64)?;
    let num = x.numer().mod_floor(&md).to_i64().expect("small");
    Some(((num as i128 * inv as i128).rem_euclid(m as i128)) as u32)
}

fn rational_is_unit(x: &Rational, m: u32) -> bool {
    m == 1 || (residue_of(x, m).is_some() && residue_of(&x.recip(), m).is_some())
}

impl TruncatedAdelic {
    /// Builds the family from its top layer by reduction.
    pub fn from_top(q: Rational, top: ModMatrix) -> Self {
        let m = top.level();
        let layers = divisors(m as u64)
            .into_iter()
            .map(|d| (d as u32, top.reduce(d as u32).expect("divisor")))
            .collect();
        TruncatedAdelic { m, q, layers }
    }

    /// Arbitrary layers, not checked for compatibility.
    pub fn from_layers(m: u32, q: Rational, layers: BTreeMap<u32, ModMatrix>) -> Self {
        TruncatedAdelic { m, q, layers }
    }

    pub fn precision(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> &Rational {
        &self.q
    }

    pub fn layers(&self) -> &BTreeMap<u32, ModMatrix> {
        &self.layers
    }

    pub fn layer(&self, m: u32) -> Option<&ModMatrix> {
        self.layers.get(&m)
    }

    pub fn top(&self) -> &ModMatrix {
        self.layers.get(&self.m).expect("top layer present")
    }

    /// `(d_q1 h1)(d_q2 h2) = d_{q1 q2} (d_q2^-1 h1 d_q2) h2`.
    pub fn mul(&self, o: &TruncatedAdelic) -> Result<TruncatedAdelic, AdelicError> {
        if self.m != o.m {
            return Err(AdelicError::PrecisionMismatch { left: self.m, right: o.m });
        }
        let q2 = &o.q;
        let mut layers = BTreeMap::new();
        for (&m, h1) in &self.layers {
            let h2 = o.layers.get(&m).ok_or(AdelicError::PrecisionMismatch {
                left: self.m,
                right: o.m,
            })?;
            let conj = conj_diag(h1, q2, m).ok_or_else(|| AdelicError::BadModulus {
                modulus: m,
                reason: format!("{} is not a unit", format_rational(q2)),
            })?;
            layers.insert(m, conj.mul(h2));
        }
        Ok(TruncatedAdelic {
            m: self.m,
            q: &self.q * q2,
            layers,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

/// `d_q^-1 X d_q = [[a, b/q], [c q, d]]` modulo `m`.
fn conj_diag(x: &ModMatrix, q: &Rational, m: u32) -> Option<ModMatrix> {
    if m == 1 {
        return Some(*x);
    }
    let qr = residue_of(q, m)? as u64;
    let qi = residue_of(&q.recip(), m)? as u64;
    let [a, b, c, d] = x.entries();
    let mm = m as u64;
    Some(ModMatrix::raw(
        m,
        [a, ((b as u64 * qi) % mm) as u32, ((c as u64 * qr) % mm) as u32, d],
    ))
}

impl Serialize for TruncatedAdelic {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            #[serde(rename = "M")]
            m: u32,
            q: String,
            layers: BTreeMap<String, &'a ModMatrix>,
        }
        Repr {
            m: self.m,
            q: format_rational(&self.q),
            layers: self.layers.iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
        .serialize(ser)
    }
}

/// Embeds `g = d_q h` with `q = det g` and `h = d_q^-1 g` in SL2(Q).
pub fn embed_rational(g: &GroupElement, m: u32) -> Result<TruncatedAdelic, AdelicError> {
    if m == 0 {
        return Err(CongruenceError::ZeroLevel.into());
    }
    let q = g.det();
    if !rational_is_unit(&q, m) {
        return Err(AdelicError::BadModulus {
            modulus: m,
            reason: format!("det {} is not a unit", format_rational(&q)),
        });
    }
    let [a, b, c, d] = g.entries();
    let h = [a / &q, b / &q, c.clone(), d.clone()];
    let mut top = [0u32; 4];
    for (slot, x) in top.iter_mut().zip(h.iter()) {
        *slot = residue_of(x, m).ok_or_else(|| AdelicError::BadModulus {
            modulus: m,
            reason: format!("denominator of {} shares a factor with {m}", format_rational(x)),
        })?;
    }
    Ok(TruncatedAdelic::from_top(q, ModMatrix::raw(m, top)))
}

/// Conjugates every layer by `d_lambda`: `X -> d_lambda X d_lambda^-1`.
///
/// The twist law `g^(mu lambda) = (d_lambda^-1 g d_lambda)^mu` corresponds to
/// calling this with `lambda^-1`.
pub fn conj_by_unit(x: &TruncatedAdelic, lambda: &TruncatedUnit) -> Result<TruncatedAdelic, AdelicError> {
    if x.m != lambda.m {
        return Err(AdelicError::PrecisionMismatch { left: x.m, right: lambda.m });
    }
    let layers = x
        .layers
        .iter()
        .map(|(&m, h)| {
            let mm = m as u64;
            let l = lambda.residue(m);
            let li = mod_inv(l as i64, m as i64).expect("unit") as u64;
            let [a, b, c, d] = h.entries();
            let out = ModMatrix::raw(
                m,
                [a, ((b as u64 * l) % mm) as u32, ((c as u64 * li) % mm) as u32, d],
            );
            (m, out)
        })
        .collect();
    Ok(TruncatedAdelic {
        m: x.m,
        q: x.q.clone(),
        layers,
    })
}

/// CRT compatibility: every layer has determinant 1 and reduces to every
/// stored layer of a dividing modulus.
pub fn check_compatibility(x: &TruncatedAdelic) -> bool {
    x.layers.iter().all(|(&m, h)| {
        h.level() == m
            && h.det() == 1 % m
            && x.layers
                .iter()
                .filter(|(&k, _)| m % k == 0)
                .all(|(&k, low)| h.reduce(k).map(|r| r == *low).unwrap_or(false))
    })
}

// ---------------------------------------------------------------------------
// Rigidity

type Raw = [u64; 4];

fn rmul(x: &Raw, y: &Raw, m: u64) -> Raw {
    [
        (x[0] * y[0] + x[1] * y[2]) % m,
        (x[0] * y[1] + x[1] * y[3]) % m,
        (x[2] * y[0] + x[3] * y[2]) % m,
        (x[2] * y[1] + x[3] * y[3]) % m,
    ]
}

fn raw(x: &ModMatrix) -> Raw {
    x.entries().map(|v| v as u64)
}

fn neg_i(m: u64) -> Raw {
    [(m - 1) % m, 0, 0, (m - 1) % m]
}

fn id(m: u64) -> Raw {
    [1 % m, 0, 0, 1 % m]
}

fn order(x: &Raw, m: u64) -> u64 {
    let mut cur = *x;
    let mut k = 1;
    while cur != id(m) {
        cur = rmul(&cur, x, m);
        k += 1;
    }
    k
}

/// The equations of the constraint system, in the order they are checked.
pub const EQ_S_SQUARE: &str = "s'^2 = -I";
pub const EQ_S_REFLECT: &str = "s' d_{-1} = d'_{-1} s'";
pub const EQ_SHEAR: &str = "d_n t' = t'^n d_n";
pub const EQ_CUBE: &str = "(s't')^3 = +-I";

fn check_s(s: &Raw, m: u64) -> Option<&'static str> {
    if rmul(s, s, m) != neg_i(m) {
        return Some(EQ_S_SQUARE);
    }
    // s' diag(-1,1) = diag(1,-1) s'  <=>  2a = 2d = 0
    if (2 * s[0]) % m != 0 || (2 * s[3]) % m != 0 {
        return Some(EQ_S_REFLECT);
    }
    None
}

fn check_t(t: &Raw, m: u64) -> Option<&'static str> {
    let period = (m / m.gcd(&order(t, m))) * order(t, m);
    let mut power = id(m);
    for n in 1..=period {
        power = rmul(&power, t, m);
        let dn = [n % m, 0, 0, 1 % m];
        if rmul(&dn, t, m) != rmul(&power, &dn, m) {
            return Some(EQ_SHEAR);
        }
    }
    None
}

/// `Some(+1)` for `+I`, `Some(-1)` for `-I`; at `m <= 2` the two coincide
/// and `-1` is reported.
fn cube_sign(s: &Raw, t: &Raw, m: u64) -> Option<i8> {
    let st = rmul(s, t, m);
    let cube = rmul(&rmul(&st, &st, m), &st, m);
    if cube == neg_i(m) {
        Some(-1)
    } else if cube == id(m) {
        Some(1)
    } else {
        None
    }
}

fn first_violation(s: &Raw, t: &Raw, m: u64) -> Option<&'static str> {
    check_s(s, m)
        .or_else(|| check_t(t, m))
        .or_else(|| cube_sign(s, t, m).is_none().then_some(EQ_CUBE))
}

/// `d_lambda s d_lambda^-1 = [[0, -lambda], [lambda^-1, 0]]`.
pub fn conj_s(lambda: u64, m: u64) -> Raw {
    let li = mod_inv(lambda as i64, m as i64).expect("unit") as u64;
    [0, (m - lambda % m) % m, li % m, 0]
}

/// `d_lambda t d_lambda^-1 = [[1, lambda], [0, 1]]`.
pub fn conj_t(lambda: u64, m: u64) -> Raw {
    [1 % m, lambda % m, 0, 1 % m]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RigiditySolution {
    pub lambda: TruncatedUnit,
    /// `+1` when `s' = d_lambda s d_lambda^-1`, `-1` when `s'` is its negative.
    pub s_sign: i8,
    /// The sign of `(s't')^3` at the top layer.
    pub cube_sign: i8,
    /// Set when the cube is `+I`, the form used by the rigidity equations,
    /// while `(st)^3 = -I` in SL2(Z).
    pub sign_discrepancy: bool,
}

/// Recovers `lambda` from images of `s` and `t`, checking the constraint
/// system at every layer.
pub fn solve_lambda(s_img: &TruncatedAdelic, t_img: &TruncatedAdelic) -> Result<RigiditySolution, AdelicError> {
    if s_img.m != t_img.m {
        return Err(AdelicError::PrecisionMismatch {
            left: s_img.m,
            right: t_img.m,
        });
    }
    let big_m = s_img.m;
    for (&m, s_layer) in s_img.layers.iter().rev() {
        let t_layer = t_img.layers.get(&m).ok_or(AdelicError::PrecisionMismatch {
            left: s_img.m,
            right: t_img.m,
        })?;
        if let Some(eq) = first_violation(&raw(s_layer), &raw(t_layer), m as u64) {
            return Err(AdelicError::Inconsistent {
                layer: m,
                equation: eq.to_string(),
            });
        }
    }
    let mm = big_m as u64;
    let top_s = raw(s_img.top());
    let top_t = raw(t_img.top());
    let lambda_raw = top_t[1];
    let lambda = TruncatedUnit::new(lambda_raw as i64, big_m).map_err(|_| AdelicError::Inconsistent {
        layer: big_m,
        equation: "t' = d_lambda t d_lambda^-1 with lambda a unit".into(),
    })?;
    let mut s_sign = None;
    for (&m, s_layer) in &s_img.layers {
        let mu = m as u64;
        let l = lambda.residue(m);
        if raw(&t_img.layers[&m]) != conj_t(l, mu) {
            return Err(AdelicError::Inconsistent {
                layer: m,
                equation: "t' = d_lambda t d_lambda^-1".into(),
            });
        }
        let plus = conj_s(l, mu);
        let minus = rmul(&neg_i(mu), &plus, mu);
        let sl = raw(s_layer);
        if m == big_m {
            s_sign = if sl == plus {
                Some(1)
            } else if sl == minus {
                Some(-1)
            } else {
                None
            };
        } else if sl != plus && sl != minus {
            return Err(AdelicError::Inconsistent {
                layer: m,
                equation: "s' = +-d_lambda s d_lambda^-1".into(),
            });
        }
    }
    let s_sign = s_sign.ok_or_else(|| AdelicError::Inconsistent {
        layer: big_m,
        equation: "s' = +-d_lambda s d_lambda^-1".into(),
    })?;
    let cube_sign = cube_sign(&top_s, &top_t, mm).expect("checked above");
    Ok(RigiditySolution {
        lambda,
        s_sign,
        cube_sign,
        sign_discrepancy: cube_sign == 1 && mm > 2,
    })
}

/// The pair `(d_lambda s d_lambda^-1, d_lambda t d_lambda^-1)` at precision `M`.
pub fn conjugated_generators(lambda: &TruncatedUnit) -> (TruncatedAdelic, TruncatedAdelic) {
    let m = lambda.m;
    let s = embed_rational(&GroupElement::s(), m).expect("integral");
    let t = embed_rational(&GroupElement::t(), m).expect("integral");
    (
        conj_by_unit(&s, lambda).expect("same precision"),
        conj_by_unit(&t, lambda).expect("same precision"),
    )
}

/// All single-layer solutions `(s', t')` of the constraint system at level `m`.
pub fn claim_solutions(m: u32, bound: u32, exec: Exec) -> Result<Vec<(ModMatrix, ModMatrix)>, AdelicError> {
    let all = enumerate_bounded(m, bound)?;
    let mm = m as u64;
    let s_ok: Vec<bool> = exec.map(&all, |x| check_s(&raw(x), mm).is_none());
    let t_ok: Vec<bool> = exec.map(&all, |x| check_t(&raw(x), mm).is_none());
    let ss: Vec<ModMatrix> = all.iter().zip(&s_ok).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
    let ts: Vec<ModMatrix> = all.iter().zip(&t_ok).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
    let pairs = exec.map(&ss, |s| {
        ts.iter()
            .filter(|t| cube_sign(&raw(s), &raw(t), mm).is_some())
            .map(|t| (*s, *t))
            .collect::<Vec<_>>()
    });
    Ok(pairs.into_iter().flatten().collect())
}

/// Whether `(s', t')` is `(+-d_lambda s d_lambda^-1, d_lambda t d_lambda^-1)`
/// for some unit `lambda`.
pub fn in_conjugation_family(s: &ModMatrix, t: &ModMatrix) -> bool {
    let m = s.level() as u64;
    units_mod(m).into_iter().any(|l| {
        let plus = conj_s(l, m);
        raw(t) == conj_t(l, m) && (raw(s) == plus || raw(s) == rmul(&neg_i(m), &plus, m))
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassificationReport {
    pub level: u32,
    /// Solutions of the system at this single layer.
    pub single_layer_solutions: usize,
    /// Single-layer solutions outside the family; nonzero only at even levels,
    /// where 2 is a zero divisor.
    pub single_layer_outside: usize,
    /// Solutions that are reductions of solutions at level `2m`, i.e.
    /// truncations of a deeper compatible family.
    pub liftable_solutions: usize,
    pub family_size: usize,
    /// Liftable solutions outside the family; rigidity says there are none.
    pub outside_family: Vec<(ModMatrix, ModMatrix)>,
    /// Liftable solutions with `(s't')^3 = -I`, and with `+I` (`m > 2`).
    pub minus_branch: usize,
    pub plus_branch: usize,
}

impl ClassificationReport {
    pub fn passed(&self) -> bool {
        self.outside_family.is_empty() && self.liftable_solutions == self.family_size
    }
}

/// Classifies every solution at level `m` that extends to level `2m`.
pub fn classify_claim_solutions(m: u32, bound: u32, exec: Exec) -> Result<ClassificationReport, AdelicError> {
    let here = claim_solutions(m, bound, exec)?;
    let deeper = claim_solutions(2 * m, bound, exec)?;
    let lifted: BTreeSet<(ModMatrix, ModMatrix)> = deeper
        .iter()
        .map(|(s, t)| (s.reduce(m).expect("divisor"), t.reduce(m).expect("divisor")))
        .collect();
    let liftable: Vec<&(ModMatrix, ModMatrix)> = here.iter().filter(|p| lifted.contains(p)).collect();
    let outside_family = liftable
        .iter()
        .filter(|(s, t)| !in_conjugation_family(s, t))
        .map(|p| **p)
        .collect();
    let mm = m as u64;
    let family: BTreeSet<(Raw, Raw)> = units_mod(mm)
        .into_iter()
        .flat_map(|l| {
            let plus = conj_s(l, mm);
            [
                (plus, conj_t(l, mm)),
                (rmul(&neg_i(mm), &plus, mm), conj_t(l, mm)),
            ]
        })
        .collect();
    let (mut minus_branch, mut plus_branch) = (0, 0);
    for (s, t) in &liftable {
        match cube_sign(&raw(s), &raw(t), mm) {
            Some(-1) => minus_branch += 1,
            _ => plus_branch += 1,
        }
    }
    Ok(ClassificationReport {
        level: m,
        single_layer_solutions: here.len(),
        single_layer_outside: here.iter().filter(|(s, t)| !in_conjugation_family(s, t)).count(),
        liftable_solutions: liftable.len(),
        family_size: family.len(),
        outside_family,
        minus_branch,
        plus_branch,
    })
}

pub fn classify_claim_solutions_default(m: u32) -> Result<ClassificationReport, AdelicError> {
    classify_claim_solutions(m, DEFAULT_ENUM_BOUND, Exec::default())
}
