//! Exact points of the upper half-plane with coordinates in an imaginary
//! quadratic field, and the Möbius action of GL2+(Q) on them.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{gcd_all, int, lcm_of_denominators, squarefree_split, Rational};
use crate::group::{format_rational, parse_rational, Classification, GroupElement, GroupError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PointError {
    #[error("imaginary part must be positive, got {0}")]
    NotInUpperHalfPlane(String),
    #[error("D must be a positive integer, got {0}")]
    BadDiscriminant(String),
    #[error("not elliptic: {0} is central and fixes every point")]
    CentralNotElliptic(Box<GroupElement>),
    #[error("not elliptic: {0} has tr^2 >= 4 det and no fixed point in the upper half-plane")]
    NotElliptic(Box<GroupElement>),
    #[error("square-free part of {0} is too large to factor")]
    Unfactorable(String),
    #[error("cannot parse point {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// `x + y * sqrt(-D)` with `D` square-free and `y > 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HalfPlanePoint {
    d: u64,
    x: Rational,
    y: Rational,
}

impl HalfPlanePoint {
    /// Builds `x + y*sqrt(-d)`, absorbing square factors of `d` into `y`.
    pub fn new(d: u64, x: Rational, y: Rational) -> Result<Self, PointError> {
        if d == 0 {
            return Err(PointError::BadDiscriminant("0".into()));
        }
        if !y.is_positive() {
            return Err(PointError::NotInUpperHalfPlane(format_rational(&y)));
        }
        let (f, core) = squarefree_split(&BigUint::from(d))
            .ok_or_else(|| PointError::Unfactorable(d.to_string()))?;
        let y = y * Rational::from_integer(BigInt::from(f));
        Ok(HalfPlanePoint { d: core, x, y })
    }

    pub fn i() -> Self {
        HalfPlanePoint { d: 1, x: int(0), y: int(1) }
    }

    /// `rho = (-1 + sqrt(-3)) / 2`.
    pub fn rho() -> Self {
        HalfPlanePoint {
            d: 3,
            x: Rational::new((-1).into(), 2.into()),
            y: Rational::new(1.into(), 2.into()),
        }
    }

    pub fn field(&self) -> u64 {
        self.d
    }

    pub fn x(&self) -> &Rational {
        &self.x
    }

    pub fn y(&self) -> &Rational {
        &self.y
    }

    /// `|tau|^2 = x^2 + D y^2`.
    pub fn norm_sq(&self) -> Rational {
        &self.x * &self.x + int(self.d as i64) * &self.y * &self.y
    }

    /// Imaginary part squared, `D y^2`.
    pub fn im_sq(&self) -> Rational {
        int(self.d as i64) * &self.y * &self.y
    }

    /// `x + y sqrt(-D) -> -x + y sqrt(-D)`, the image under `z -> -conj(z)`.
    pub fn mirror(&self) -> Self {
        HalfPlanePoint {
            d: self.d,
            x: -self.x.clone(),
            y: self.y.clone(),
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        let x = self.x.to_f64().unwrap_or(f64::NAN);
        let y = self.y.to_f64().unwrap_or(f64::NAN) * (self.d as f64).sqrt();
        (x, y)
    }

    pub fn to_literal(&self) -> String {
        let coeff = if self.y.is_one() {
            String::new()
        } else {
            format_rational(&self.y)
        };
        if self.x.is_zero() {
            format!("{coeff}√-{}", self.d)
        } else {
            format!("{}+{coeff}√-{}", format_rational(&self.x), self.d)
        }
    }

    /// Like `to_literal`, with `i` in place of `√-1`.
    pub fn to_short(&self) -> String {
        let lit = self.to_literal();
        if self.d == 1 {
            lit.replace("√-1", "i")
        } else {
            lit
        }
    }
}

impl fmt::Display for HalfPlanePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

impl fmt::Debug for HalfPlanePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

fn parse_err(input: &str, reason: &str) -> PointError {
    PointError::Parse {
        input: input.to_string(),
        reason: reason.to_string(),
    }
}

impl FromStr for HalfPlanePoint {
    type Err = PointError;

    /// Accepts `x+y√-D` (also `sqrt-D` or `sqrt(-D)`), with `x` and `y`
    /// optional, and the Gaussian shorthand `x+yi`.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let mut s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        s = s
            .replace('−', "-")
            .replace("sqrt(-", "√-")
            .replace("sqrt-", "√-")
            .replace(['*', ')'], "");
        if !s.contains('√') {
            match s.strip_suffix('i') {
                Some(rest) => s = format!("{rest}√-1"),
                None => return Err(parse_err(input, "expected x+y√-D or x+yi")),
            }
        }
        let (prefix, d_str) = s
            .split_once("√-")
            .ok_or_else(|| parse_err(input, "expected √-D"))?;
        let d: u64 = d_str
            .parse()
            .map_err(|_| parse_err(input, "D must be a positive integer"))?;
        // The y coefficient starts at the last sign not at position 0 and
        // not inside a fraction.
        let split = prefix
            .char_indices()
            .filter(|&(i, c)| i > 0 && (c == '+' || c == '-'))
            .map(|(i, _)| i)
            .next_back();
        let (x_str, y_str) = match split {
            Some(i) => (&prefix[..i], &prefix[i..]),
            None => ("", prefix),
        };
        let x = if x_str.is_empty() {
            int(0)
        } else {
            parse_rational(x_str).map_err(|_| parse_err(input, "bad real part"))?
        };
        let y_str = y_str.strip_prefix('+').unwrap_or(y_str);
        let y = match y_str {
            "" => int(1),
            "-" => int(-1),
            other => parse_rational(other).map_err(|_| parse_err(input, "bad imaginary coefficient"))?,
        };
        HalfPlanePoint::new(d, x, y)
    }
}

#[derive(Serialize, Deserialize)]
struct PointJson {
    #[serde(rename = "D")]
    d: u64,
    x: String,
    y: String,
}

impl Serialize for HalfPlanePoint {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        PointJson {
            d: self.d,
            x: format_rational(&self.x),
            y: format_rational(&self.y),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for HalfPlanePoint {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let p = PointJson::deserialize(de)?;
        let x = parse_rational(&p.x).map_err(serde::de::Error::custom)?;
        let y = parse_rational(&p.y).map_err(serde::de::Error::custom)?;
        HalfPlanePoint::new(p.d, x, y).map_err(serde::de::Error::custom)
    }
}

/// `(a tau + b) / (c tau + d)`, computed by rationalizing the denominator.
pub fn act(g: &GroupElement, tau: &HalfPlanePoint) -> HalfPlanePoint {
    let [a, b, c, d] = g.entries();
    let dd = int(tau.d as i64);
    let re_num = a * &tau.x + b;
    let re_den = c * &tau.x + d;
    let norm = &re_den * &re_den + &dd * c * c * &tau.y * &tau.y;
    let x = (&re_num * &re_den + a * c * &tau.y * &tau.y * &dd) / &norm;
    let y = &tau.y * g.det() / &norm;
    debug_assert!(y.is_positive());
    HalfPlanePoint { d: tau.d, x, y }
}

pub fn fixes(g: &GroupElement, tau: &HalfPlanePoint) -> bool {
    &act(g, tau) == tau
}

fn require_elliptic(e: &GroupElement) -> Result<(), PointError> {
    match e.classify() {
        Classification::Elliptic => Ok(()),
        Classification::Central => Err(PointError::CentralNotElliptic(Box::new(e.clone()))),
        Classification::NonElliptic => Err(PointError::NotElliptic(Box::new(e.clone()))),
    }
}

/// The root of `c x^2 + (d - a) x - b = 0` in the upper half-plane.
pub fn fixed_point(e: &GroupElement) -> Result<HalfPlanePoint, PointError> {
    require_elliptic(e)?;
    let [a, b, c, d] = e.entries();
    assert!(!c.is_zero(), "elliptic element with c = 0");
    let diff = d - a;
    let disc = &diff * &diff + int(4) * b * c;
    debug_assert!(disc.is_negative());
    // sqrt(|disc|) = sqrt(p q) / q = f sqrt(D) / q
    let mag = -disc;
    let pq = (mag.numer() * mag.denom()).to_biguint().expect("positive");
    let (f, core) = squarefree_split(&pq).ok_or_else(|| PointError::Unfactorable(pq.to_string()))?;
    let x = (a - d) / (int(2) * c);
    let y = Rational::new(BigInt::from(f), mag.denom() * BigInt::from(2)) / c.abs();
    Ok(HalfPlanePoint { d: core, x, y })
}

/// Whether `g` commutes with the elliptic `e`.
pub fn in_stabilizer(g: &GroupElement, e: &GroupElement) -> Result<bool, PointError> {
    require_elliptic(e)?;
    Ok(g.mul(e) == e.mul(g))
}

/// The primitive integral minimal polynomial `(a, b, c)` of `tau`, `a > 0`.
pub fn point_field(tau: &HalfPlanePoint) -> (u64, [BigInt; 3]) {
    // (X - x)^2 + D y^2
    let coeffs = [int(1), -int(2) * &tau.x, tau.norm_sq()];
    let l = lcm_of_denominators(coeffs.iter());
    let ints: Vec<BigInt> = coeffs
        .iter()
        .map(|q| (q * Rational::from_integer(l.clone())).to_integer())
        .collect();
    let g = gcd_all(ints.iter());
    (tau.d, [&ints[0] / &g, &ints[1] / &g, &ints[2] / &g])
}
