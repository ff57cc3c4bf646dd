//! CM points: discriminants, reduced forms, class polynomials and the
//! two-branch `tp` relation on the upper half-plane.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::arith::Rational;
use crate::group::GroupElement;
use crate::halfplane::{fixed_point, point_field, HalfPlanePoint, PointError};
use crate::numeric::{elementary_symmetric, j_numeric, FixedComplex, JValue, NumericError, MAX_PRECISION_BITS};

pub const DEFAULT_FORM_BOUND: u64 = 10_000;
pub const CLASS_POLY_BOUND: u64 = 200;
pub const PRECISION_LADDER: [u32; 4] = [80, 160, 320, MAX_PRECISION_BITS];
/// Nearest-integer distance accepted when recognising a coefficient.
pub const ROUNDING_TOLERANCE_LOG2: i32 = -20;
/// Certified error bound required on every coefficient.
pub const CERTIFIED_BOUND_LOG2: i32 = -21;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmError {
    #[error(transparent)]
    Point(#[from] PointError),
    #[error("form ({a}, {b}, {c}) is not positive definite primitive")]
    NotImaginary { a: i64, b: i64, c: i64 },
    #[error("{0} is not a negative discriminant (must be < 0 and = 0 or 1 mod 4)")]
    BadDiscriminant(i64),
    #[error("|disc| = {disc} exceeds the bound {bound}")]
    BoundExceeded { disc: i64, bound: u64 },
    #[error("coefficients not certified at {bits} bits (error bound 2^{log2_bound:.1}, worst distance 2^{log2_distance:.1})")]
    PrecisionInsufficient {
        bits: u32,
        log2_bound: f64,
        log2_distance: f64,
    },
    #[error("{0} is not a CM point")]
    NotCm(String),
    #[error("entries too large for a machine discriminant")]
    TooLarge,
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Reduced primitive positive definite form `a x^2 + b x y + c y^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CmData {
    pub disc: i64,
    pub form: (i64, i64, i64),
}

impl CmData {
    /// The root of `a x^2 + b x + c` in the upper half-plane.
    pub fn point(&self) -> HalfPlanePoint {
        let (a, b, _) = self.form;
        let two_a = BigInt::from(2 * a);
        HalfPlanePoint::new(
            self.disc.unsigned_abs(),
            Rational::new(BigInt::from(-b), two_a.clone()),
            Rational::new(BigInt::from(1), two_a),
        )
        .expect("a > 0 and disc < 0")
    }
}

fn check_disc(disc: i64) -> Result<(), CmError> {
    if disc >= 0 || disc.rem_euclid(4) > 1 {
        return Err(CmError::BadDiscriminant(disc));
    }
    Ok(())
}

/// Gauss reduction of a positive definite form.
pub fn reduce_form(a: i64, b: i64, c: i64) -> (i64, i64, i64) {
    let (mut a, mut b, mut c) = (a as i128, b as i128, c as i128);
    let disc = b * b - 4 * a * c;
    loop {
        if b > a || b <= -a {
            let k = Integer::div_floor(&(a - b), &(2 * a));
            b += 2 * a * k;
            c = (b * b - disc) / (4 * a);
        }
        if a > c {
            (a, b, c) = (c, -b, a);
            continue;
        }
        if a == c && b < 0 {
            b = -b;
        }
        break;
    }
    (a as i64, b as i64, c as i64)
}

pub fn cm_from_elliptic(e: &GroupElement) -> Result<(HalfPlanePoint, CmData), CmError> {
    let tau = fixed_point(e)?;
    Ok((tau.clone(), cm_of_point(&tau)?))
}

/// Discriminant and reduced form of a point of the upper half-plane; every
/// such point with rational coordinates is CM.
pub fn cm_of_point(tau: &HalfPlanePoint) -> Result<CmData, CmError> {
    let (_, [a, b, c]) = point_field(tau);
    let disc = &b * &b - BigInt::from(4) * &a * &c;
    let small = |x: &BigInt| x.to_i64().ok_or(CmError::TooLarge);
    let (a, b, c, disc) = (small(&a)?, small(&b)?, small(&c)?, small(&disc)?);
    Ok(CmData {
        disc,
        form: reduce_form(a, b, c),
    })
}

/// `[[-b, -2c], [2a, b]]` divided by its content.
pub fn elliptic_from_cm(form: (i64, i64, i64)) -> Result<GroupElement, CmError> {
    let (a, b, c) = form;
    let disc = b as i128 * b as i128 - 4 * a as i128 * c as i128;
    if a <= 0 || disc >= 0 {
        return Err(CmError::NotImaginary { a, b, c });
    }
    let g = [-b, -2 * c, 2 * a, b].iter().fold(0i64, |acc, x| acc.gcd(x));
    Ok(GroupElement::from_ints(-b / g, -2 * c / g, 2 * a / g, b / g).expect("det = -disc > 0"))
}

pub fn reduced_forms(disc: i64) -> Result<Vec<CmData>, CmError> {
    reduced_forms_bounded(disc, DEFAULT_FORM_BOUND)
}

pub fn reduced_forms_bounded(disc: i64, bound: u64) -> Result<Vec<CmData>, CmError> {
    check_disc(disc)?;
    if disc.unsigned_abs() > bound {
        return Err(CmError::BoundExceeded { disc, bound });
    }
    let n = disc.abs();
    let mut out = Vec::new();
    let mut a = 1;
    while 3 * a * a <= n {
        for b in -a..=a {
            if (b * b - disc) % (4 * a) != 0 {
                continue;
            }
            let c = (b * b - disc) / (4 * a);
            if c < a || a.gcd(&b).gcd(&c) != 1 {
                continue;
            }
            if b < 0 && (b == -a || a == c) {
                continue;
            }
            out.push(CmData { disc, form: (a, b, c) });
        }
        a += 1;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Certified integer recognition

/// Monic integer polynomial, coefficients in descending degree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassPolynomial {
    pub disc: i64,
    pub degree: usize,
    #[serde(serialize_with = "ser_big_ints")]
    pub coefficients: Vec<BigInt>,
    pub precision_bits: u32,
    pub log2_error_bound: f64,
}

pub fn ser_big_ints<S: Serializer>(xs: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    let nums: Vec<serde_json::Number> = xs
        .iter()
        .map(|x| serde_json::Number::from_str(&x.to_string()).expect("integer literal"))
        .collect();
    nums.serialize(s)
}

impl ClassPolynomial {
    pub fn to_literal(&self) -> String {
        poly_literal(&self.coefficients)
    }
}

pub fn poly_literal(coeffs: &[BigInt]) -> String {
    let deg = coeffs.len().saturating_sub(1);
    let mut out = String::new();
    for (i, c) in coeffs.iter().enumerate() {
        let p = deg - i;
        if c.is_zero() && !(p == 0 && out.is_empty()) {
            continue;
        }
        let sign = if c.is_negative() { "-" } else { "+" };
        let mag = c.abs();
        let body = match (p, mag == BigInt::from(1)) {
            (0, _) => mag.to_string(),
            (1, true) => "x".into(),
            (1, false) => format!("{mag}x"),
            (_, true) => format!("x^{p}"),
            (_, false) => format!("{mag}x^{p}"),
        };
        if out.is_empty() {
            out = if c.is_negative() { format!("-{body}") } else { body };
        } else {
            out.push_str(&format!(" {sign} {body}"));
        }
    }
    out
}

/// Coefficients of `prod (x - j(tau_k))`, certified integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Certified {
    pub coefficients: Vec<BigInt>,
    pub bits: u32,
    pub log2_bound: f64,
    pub log2_distance: f64,
}

const EXTRA_BITS: u32 = 32;

fn certify_at(points: &[HalfPlanePoint], bits: u32) -> Result<Result<Certified, CmError>, CmError> {
    let js: Vec<JValue> = points
        .iter()
        .map(|p| j_numeric(p, bits))
        .collect::<Result<_, _>>()?;
    let work = bits + EXTRA_BITS;
    let shift = BigInt::from(1) << EXTRA_BITS;
    let vals: Vec<FixedComplex> = js
        .iter()
        .map(|j| {
            let mut v = FixedComplex::from_j(j).scale_int(&shift);
            v.bits = work;
            v
        })
        .collect();
    let e = elementary_symmetric(&vals, work);
    let h = js.len() as f64;
    // input error 2^-bits per value; each e_i moves by at most
    // prod(1 + |j_k|) * 2h * 2^-bits, plus h^2 truncations at 2^-work
    let log_prod: f64 = js.iter().map(|j| (1.0 + j.abs_bound()).log2()).sum();
    let input = log_prod + (2.0 * h).log2() - bits as f64;
    let arith = (2.0 * h * h + 2.0).log2() + log_prod - work as f64;
    let log2_bound = input.max(arith) + 1.0;

    let mut coefficients = Vec::with_capacity(e.len());
    let mut worst = f64::NEG_INFINITY;
    for (i, ei) in e.iter().enumerate() {
        let (n, dist, im) = ei.nearest_integer();
        let d = dist.max(im);
        let ld = if d.is_zero() {
            f64::NEG_INFINITY
        } else {
            d.bits() as f64 - work as f64
        };
        worst = worst.max(ld);
        coefficients.push(if i % 2 == 0 { n } else { -n });
    }
    if log2_bound > CERTIFIED_BOUND_LOG2 as f64 || worst > ROUNDING_TOLERANCE_LOG2 as f64 {
        return Ok(Err(CmError::PrecisionInsufficient {
            bits,
            log2_bound,
            log2_distance: worst,
        }));
    }
    Ok(Ok(Certified {
        coefficients,
        bits,
        log2_bound,
        log2_distance: worst,
    }))
}

/// `prod (x - j(tau))` over the points, escalating precision from
/// `start_bits` along the ladder until every coefficient rounds with a
/// certified margin.
pub fn certified_product(points: &[HalfPlanePoint], start_bits: u32) -> Result<Certified, CmError> {
    let mut last = None;
    let ladder = PRECISION_LADDER.iter().copied().filter(|&b| b >= start_bits);
    for bits in std::iter::once(start_bits).chain(ladder) {
        if last.as_ref().is_some_and(|e: &CmError| matches!(e, CmError::PrecisionInsufficient { bits: b, .. } if *b >= bits)) {
            continue;
        }
        match certify_at(points, bits)? {
            Ok(c) => return Ok(c),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(CmError::Numeric(NumericError::PrecisionOutOfRange(start_bits))))
}

pub fn class_polynomial(disc: i64) -> Result<ClassPolynomial, CmError> {
    class_polynomial_from(disc, PRECISION_LADDER[0])
}

pub fn class_polynomial_from(disc: i64, start_bits: u32) -> Result<ClassPolynomial, CmError> {
    check_disc(disc)?;
    if disc.unsigned_abs() > CLASS_POLY_BOUND {
        return Err(CmError::BoundExceeded {
            disc,
            bound: CLASS_POLY_BOUND,
        });
    }
    let forms = reduced_forms(disc)?;
    let points: Vec<HalfPlanePoint> = forms.iter().map(CmData::point).collect();
    let c = certified_product(&points, start_bits)?;
    Ok(ClassPolynomial {
        disc,
        degree: forms.len(),
        coefficients: c.coefficients,
        precision_bits: c.bits,
        log2_error_bound: c.log2_bound,
    })
}

/// Images of `tau` under the `p + 1` classical coset representatives of
/// `SL2(Z) diag(1, p) SL2(Z)`: `(tau + b) / p` and `p tau`.
pub fn hecke_images(tau: &HalfPlanePoint, p: u64) -> Vec<HalfPlanePoint> {
    let p_r = Rational::from_integer(BigInt::from(p));
    let mut out: Vec<HalfPlanePoint> = (0..p)
        .map(|b| {
            HalfPlanePoint::new(
                tau.field(),
                (tau.x() + Rational::from_integer(BigInt::from(b))) / &p_r,
                tau.y() / &p_r,
            )
            .expect("positive imaginary part")
        })
        .collect();
    out.push(HalfPlanePoint::new(tau.field(), tau.x() * &p_r, tau.y() * &p_r).expect("positive imaginary part"));
    out
}

/// Integrality of the symmetric functions of `j` over the `p`-Hecke images of
/// every reduced form of `disc`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeckeSymmetric {
    pub disc: i64,
    pub p: u64,
    pub values: usize,
    #[serde(serialize_with = "ser_big_ints")]
    pub coefficients: Vec<BigInt>,
    pub precision_bits: u32,
    pub log2_distance: f64,
}

pub fn hecke_symmetric(disc: i64, p: u64) -> Result<HeckeSymmetric, CmError> {
    let forms = reduced_forms(disc)?;
    let points: Vec<HalfPlanePoint> = forms
        .iter()
        .flat_map(|f| hecke_images(&f.point(), p))
        .collect();
    let c = certified_product(&points, PRECISION_LADDER[1])?;
    Ok(HeckeSymmetric {
        disc,
        p,
        values: points.len(),
        coefficients: c.coefficients,
        precision_bits: c.bits,
        log2_distance: c.log2_distance,
    })
}

// ---------------------------------------------------------------------------
// tp

/// Fixed point of the `d_{-1}`-conjugate of the elliptic element fixing `s`.
pub fn conjugate_point(s: &HalfPlanePoint) -> Result<HalfPlanePoint, CmError> {
    let cm = cm_of_point(s)?;
    let (_, [a, b, c]) = point_field(s);
    let form = (
        a.to_i64().ok_or(CmError::TooLarge)?,
        b.to_i64().ok_or(CmError::TooLarge)?,
        c.to_i64().ok_or(CmError::TooLarge)?,
    );
    let g = elliptic_from_cm(form).map_err(|_| CmError::NotCm(s.to_string()))?;
    debug_assert!(cm.disc < 0);
    Ok(fixed_point(&g.involution())?)
}

pub fn tp_pair(s1: &HalfPlanePoint, s2: &HalfPlanePoint) -> Result<Vec<(HalfPlanePoint, HalfPlanePoint)>, CmError> {
    let first = (s1.clone(), s2.clone());
    let second = (conjugate_point(s1)?, conjugate_point(s2)?);
    Ok(if first == second {
        vec![first]
    } else {
        vec![first, second]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: i64, b: i64, c: i64, d: i64) -> GroupElement {
        GroupElement::from_ints(a, b, c, d).unwrap()
    }

    fn p(s: &str) -> HalfPlanePoint {
        s.parse().unwrap()
    }

    fn ints(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn from_elliptic() {
        let (tau, cm) = cm_from_elliptic(&GroupElement::s()).unwrap();
        assert_eq!((tau, cm.disc, cm.form), (HalfPlanePoint::i(), -4, (1, 0, 1)));
        let st = GroupElement::s().mul(&GroupElement::t());
        let (tau, cm) = cm_from_elliptic(&st).unwrap();
        assert_eq!(cm.disc, -3);
        assert_eq!(cm.form, (1, 1, 1));
        assert_eq!(tau.field(), 3);
        let (tau, cm) = cm_from_elliptic(&m(1, -2, 1, -1)).unwrap();
        assert_eq!((tau, cm.disc, cm.form), (p("1+i"), -4, (1, 0, 1)));
        assert!(cm_from_elliptic(&GroupElement::t()).is_err());
        assert!(cm_from_elliptic(&GroupElement::identity()).is_err());
    }

    #[test]
    fn to_elliptic() {
        assert_eq!(elliptic_from_cm((1, 0, 1)).unwrap(), GroupElement::s());
        let e = elliptic_from_cm((1, 1, 1)).unwrap();
        assert_eq!(e, m(-1, -2, 2, 1));
        assert_eq!(fixed_point(&e).unwrap(), p("-1/2+1/2√-3"));
        let e = elliptic_from_cm((1, -2, 2)).unwrap();
        assert_eq!(e, m(1, -2, 1, -1));
        assert_eq!(fixed_point(&e).unwrap(), p("1+i"));
        assert!(matches!(elliptic_from_cm((1, 3, 1)), Err(CmError::NotImaginary { .. })));
    }

    #[test]
    fn forms() {
        let f = |d| reduced_forms(d).unwrap().into_iter().map(|c| c.form).collect::<Vec<_>>();
        assert_eq!(f(-4), vec![(1, 0, 1)]);
        assert_eq!(f(-3), vec![(1, 1, 1)]);
        assert_eq!(f(-15), vec![(1, 1, 4), (2, 1, 2)]);
        assert_eq!(f(-20), vec![(1, 0, 5), (2, 2, 3)]);
        assert_eq!(f(-23).len(), 3);
        assert_eq!(f(-71).len(), 7);
        assert!(matches!(reduced_forms(-5), Err(CmError::BadDiscriminant(-5))));
        assert!(matches!(reduced_forms(4), Err(CmError::BadDiscriminant(4))));
        assert!(matches!(reduced_forms(-10_003), Err(CmError::BoundExceeded { .. })));
    }

    #[test]
    fn gauss_reduction() {
        assert_eq!(reduce_form(1, -2, 2), (1, 0, 1));
        assert_eq!(reduce_form(2, -1, 2), (2, 1, 2));
        assert_eq!(reduce_form(4, 1, 1), (1, 1, 4));
        assert_eq!(reduce_form(1, -1, 4), (1, 1, 4));
        assert_eq!(reduce_form(7, 13, 7), (1, 1, 7));
        assert_eq!(reduce_form(7, -13, 7), (1, 1, 7));
    }

    #[test]
    fn small_class_polynomials() {
        let h4 = class_polynomial(-4).unwrap();
        assert_eq!(h4.coefficients, ints(&[1, -1728]));
        assert_eq!(h4.to_literal(), "x - 1728");
        assert_eq!(class_polynomial(-3).unwrap().coefficients, ints(&[1, 0]));
        let h15 = class_polynomial(-15).unwrap();
        assert_eq!(h15.degree, 2);
        assert_eq!(h15.coefficients, ints(&[1, 191025, -121287375]));
        assert_eq!(class_polynomial(-7).unwrap().coefficients, ints(&[1, 3375]));
        assert_eq!(class_polynomial(-8).unwrap().coefficients, ints(&[1, -8000]));
    }

    #[test]
    fn class_polynomial_json() {
        let h = class_polynomial(-15).unwrap();
        let v = serde_json::to_value(&h).unwrap();
        assert_eq!(v["degree"], 2);
        assert_eq!(v["coefficients"].to_string(), "[1,191025,-121287375]");
        let big = class_polynomial(-23).unwrap();
        let text = serde_json::to_string(&big).unwrap();
        assert!(text.contains(&big.coefficients[3].to_string()));
    }

    #[test]
    fn class_polynomial_bounds() {
        assert!(matches!(class_polynomial(-203), Err(CmError::BoundExceeded { .. })));
        assert!(matches!(class_polynomial(-6), Err(CmError::BadDiscriminant(-6))));
    }

    #[test]
    fn hecke_shadow_integral() {
        for disc in [-3, -4, -7, -15] {
            for p in [2, 3] {
                let r = hecke_symmetric(disc, p).unwrap();
                assert_eq!(r.values, reduced_forms(disc).unwrap().len() * (p as usize + 1));
                assert_eq!(r.coefficients[0], BigInt::from(1));
            }
        }
    }

    #[test]
    fn tp_examples() {
        let i = HalfPlanePoint::i();
        let rho = HalfPlanePoint::rho();
        assert_eq!(tp_pair(&i, &i).unwrap(), vec![(i.clone(), i.clone())]);
        assert_eq!(
            tp_pair(&i, &rho).unwrap(),
            vec![(i.clone(), rho.clone()), (i.clone(), p("1/2+1/2√-3"))]
        );
        assert_eq!(
            tp_pair(&p("1+i"), &rho).unwrap(),
            vec![(p("1+i"), rho.clone()), (p("-1+i"), p("1/2+1/2√-3"))]
        );
    }

    #[test]
    fn conjugate_point_is_mirror() {
        for s in ["1/3+2/5√-7", "-4+√-2", "5/2+1/2√-3"] {
            assert_eq!(conjugate_point(&p(s)).unwrap(), p(s).mirror());
        }
    }
}
