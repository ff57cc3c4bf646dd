//! Certified numerical evaluation of the modular `j`-function.
//!
//! Numbers are fixed-point binary fractions `v / 2^w` with `v` a big integer.
//! `j = E4^3 / Delta` is evaluated from the integer `q`-series
//!
//! ```text
//! E4      = 1 + 240 sum sigma_3(n) q^n
//! Delta/q = prod (1 - q^n)^24
//! ```
//!
//! after moving `tau` into the standard fundamental domain, so that
//! `|q| <= exp(-pi sqrt 3) < 0.0044`. Coefficients of both series are bounded
//! by `291 n^6`, so once consecutive terms shrink by half the tail past `K` is
//! at most `2 * 291 (K+1)^6 |q|^(K+1)`.

use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::congruence::reduce_to_fundamental_domain;
use crate::halfplane::HalfPlanePoint;

pub const MAX_PRECISION_BITS: u32 = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("precision {0} bits is outside 1..={MAX_PRECISION_BITS}")]
    PrecisionOutOfRange(u32),
}

/// Complex fixed-point value scaled by `2^w`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Cx {
    re: BigInt,
    im: BigInt,
}

impl Cx {
    fn real(re: BigInt) -> Self {
        Cx { re, im: BigInt::zero() }
    }

    fn add(&self, o: &Cx) -> Cx {
        Cx {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    fn mul(&self, o: &Cx, w: u32) -> Cx {
        Cx {
            re: (&self.re * &o.re - &self.im * &o.im) >> w,
            im: (&self.re * &o.im + &self.im * &o.re) >> w,
        }
    }

    fn div(&self, o: &Cx, w: u32) -> Cx {
        let den = &o.re * &o.re + &o.im * &o.im;
        Cx {
            re: ((&self.re * &o.re + &self.im * &o.im) << w) / &den,
            im: ((&self.im * &o.re - &self.re * &o.im) << w) / &den,
        }
    }

    fn scale_int(&self, k: &BigInt) -> Cx {
        Cx {
            re: &self.re * k,
            im: &self.im * k,
        }
    }
}

fn atan_inv(k: u64, w: u32) -> BigInt {
    let k = BigInt::from(k);
    let k2 = &k * &k;
    let mut power = (BigInt::one() << w) / &k;
    let mut sum = BigInt::zero();
    let mut n = 0u64;
    while !power.is_zero() {
        let term = &power / BigInt::from(2 * n + 1);
        if n % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &k2;
        n += 1;
    }
    sum
}

/// `pi * 2^w`, by Machin's formula.
fn pi_fixed(w: u32) -> BigInt {
    let g = 16;
    let v = BigInt::from(16) * atan_inv(5, w + g) - BigInt::from(4) * atan_inv(239, w + g);
    v >> g
}

fn sqrt_fixed(d: u64, w: u32) -> BigInt {
    let v = BigUint::from(d) << (2 * w);
    BigInt::from_biguint(Sign::Plus, v.sqrt())
}

fn rational_fixed(num: &BigInt, den: &BigInt, w: u32) -> BigInt {
    (num << w) / den
}

/// `exp(z)` by argument halving, a Taylor series and repeated squaring.
fn exp_fixed(z: &Cx, w: u32, halvings: u32) -> Cx {
    let u = Cx {
        re: &z.re >> halvings,
        im: &z.im >> halvings,
    };
    let one = BigInt::one() << w;
    let mut sum = Cx::real(one.clone());
    let mut term = Cx::real(one);
    let mut n = 1u64;
    loop {
        term = term.mul(&u, w);
        term.re /= n;
        term.im /= n;
        if term.re.is_zero() && term.im.is_zero() {
            break;
        }
        sum = sum.add(&term);
        n += 1;
    }
    for _ in 0..halvings {
        sum = sum.mul(&sum, w);
    }
    sum
}

// ---------------------------------------------------------------------------
// Series tables

fn sigma3(n: u64) -> u64 {
    let mut s = 0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            s += d * d * d;
            let e = n / d;
            if e != d {
                s += e * e * e;
            }
        }
        d += 1;
    }
    s
}

fn poly_mul_trunc(a: &[BigInt], b: &[BigInt], len: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of `prod (1 - q^n)^24` up to degree `len - 1`.
fn delta_series(len: usize) -> Vec<BigInt> {
    // Euler: prod (1 - q^n) = sum_k (-1)^k q^(k(3k-1)/2)
    let mut eta = vec![BigInt::zero(); len];
    let mut k: i64 = 0;
    loop {
        let mut any = false;
        for kk in [k, -k] {
            let e = kk * (3 * kk - 1) / 2;
            if (e as usize) < len {
                any = true;
                if kk == k || k != 0 {
                    eta[e as usize] = if kk.rem_euclid(2) == 0 { BigInt::one() } else { -BigInt::one() };
                }
            }
        }
        if !any {
            break;
        }
        k += 1;
    }
    let p2 = poly_mul_trunc(&eta, &eta, len);
    let p4 = poly_mul_trunc(&p2, &p2, len);
    let p8 = poly_mul_trunc(&p4, &p4, len);
    let p16 = poly_mul_trunc(&p8, &p8, len);
    poly_mul_trunc(&p16, &p8, len)
}

struct SeriesTables {
    e4: Vec<BigInt>,
    delta: Vec<BigInt>,
}

/// Lazily grown, shared read-only coefficient tables.
fn tables(len: usize) -> Arc<SeriesTables> {
    static CACHE: OnceLock<Mutex<Option<Arc<SeriesTables>>>> = OnceLock::new();
    let cell = CACHE.get_or_init(|| Mutex::new(None));
    let mut guard = cell.lock().expect("series cache poisoned");
    if let Some(t) = guard.as_ref() {
        if t.e4.len() >= len {
            return t.clone();
        }
    }
    let len = len.max(guard.as_ref().map_or(0, |t| 2 * t.e4.len())).max(64);
    let mut e4 = vec![BigInt::one()];
    e4.extend((1..len as u64).map(|n| BigInt::from(240u64 * sigma3(n))));
    let t = Arc::new(SeriesTables {
        e4,
        delta: delta_series(len),
    });
    *guard = Some(t.clone());
    t
}

fn horner(coeffs: &[BigInt], q: &Cx, w: u32) -> Cx {
    let mut acc = Cx::real(BigInt::zero());
    for c in coeffs.iter().rev() {
        acc = acc.mul(q, w);
        acc.re += c << w;
    }
    acc
}

// ---------------------------------------------------------------------------
// j

/// `j(tau)` rounded to `bits` fractional bits, with the absolute error
/// guaranteed below `2^-bits`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JValue {
    pub bits: u32,
    #[serde(serialize_with = "ser_big")]
    pub re_scaled: BigInt,
    #[serde(serialize_with = "ser_big")]
    pub im_scaled: BigInt,
    pub re: f64,
    pub im: f64,
    pub terms: usize,
}

fn ser_big<S: serde::Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn to_f64_scaled(v: &BigInt, bits: u32) -> f64 {
    let shift = v.bits().saturating_sub(60);
    let top = (v >> shift).to_f64().unwrap_or(0.0);
    top * 2f64.powi(shift as i32 - bits as i32)
}

fn round_shift(v: &BigInt, by: u32) -> BigInt {
    if by == 0 {
        return v.clone();
    }
    let half = BigInt::one() << (by - 1);
    (v + half) >> by
}

impl JValue {
    pub fn abs_bound(&self) -> f64 {
        self.re.abs() + self.im.abs() + 1.0
    }
}

/// Bits in `log2 |1/q|` for `q = exp(2 pi i tau)`, rounded up.
fn log2_inv_q(tau: &HalfPlanePoint) -> u32 {
    let (_, im) = tau.to_f64();
    (2.0 * std::f64::consts::PI * im / std::f64::consts::LN_2).ceil() as u32 + 1
}

/// Smallest `K` with `2 * 291 (K+1)^6 |q|^(K+1) <= 2^-w`, given
/// `|q| <= 2^-l`.
fn truncation(l: u32, w: u32) -> usize {
    let mut k = 1usize;
    loop {
        let n = (k + 1) as f64;
        let log_tail = (582f64).log2() + 6.0 * n.log2() - n * l as f64;
        if log_tail <= -(w as f64) {
            return k;
        }
        k += 1;
    }
}

pub fn j_numeric(tau: &HalfPlanePoint, bits: u32) -> Result<JValue, NumericError> {
    if bits == 0 || bits > MAX_PRECISION_BITS {
        return Err(NumericError::PrecisionOutOfRange(bits));
    }
    let (_, rep) = reduce_to_fundamental_domain(tau);
    let l = log2_inv_q(&rep) - 1;
    let (_, im) = rep.to_f64();
    let z_abs = 2.0 * std::f64::consts::PI * (0.5 + im);
    let halvings = (z_abs.log2().ceil().max(0.0) as u32) + 2;
    let w = bits + 2 * (l + 1) + halvings + 48;
    let k = truncation(l, w);

    let pi = pi_fixed(w);
    let two_pi = &pi << 1;
    // 2 pi i tau = -2 pi y sqrt(D) + 2 pi i x
    let sqrt_d = sqrt_fixed(rep.field(), w);
    let y = rational_fixed(rep.y().numer(), rep.y().denom(), w);
    let x = rational_fixed(rep.x().numer(), rep.x().denom(), w);
    let im_tau = (&y * &sqrt_d) >> w;
    let scaled: BigInt = &two_pi * &im_tau;
    let z = Cx {
        re: -(scaled >> w),
        im: (&two_pi * &x) >> w,
    };
    let q = exp_fixed(&z, w, halvings);

    let t = tables(k + 1);
    let e4 = horner(&t.e4[..=k], &q, w);
    let dq = horner(&t.delta[..=k], &q, w);
    let e4_cubed = e4.mul(&e4, w).mul(&e4, w);
    let j = e4_cubed.div(&dq.mul(&q, w), w);
    let re = round_shift(&j.re, w - bits);
    let im_s = round_shift(&j.im, w - bits);
    Ok(JValue {
        bits,
        re: to_f64_scaled(&re, bits),
        im: to_f64_scaled(&im_s, bits),
        re_scaled: re,
        im_scaled: im_s,
        terms: k + 1,
    })
}

/// A complex number carried as `bits`-scaled integers, used for products of
/// `j`-values.
#[derive(Clone, Debug)]
pub struct FixedComplex {
    pub bits: u32,
    pub re: BigInt,
    pub im: BigInt,
}

impl FixedComplex {
    pub fn from_j(j: &JValue) -> Self {
        FixedComplex {
            bits: j.bits,
            re: j.re_scaled.clone(),
            im: j.im_scaled.clone(),
        }
    }

    pub fn from_int(n: &BigInt, bits: u32) -> Self {
        FixedComplex {
            bits,
            re: n << bits,
            im: BigInt::zero(),
        }
    }

    pub fn add(&self, o: &FixedComplex) -> FixedComplex {
        FixedComplex {
            bits: self.bits,
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    pub fn neg(&self) -> FixedComplex {
        FixedComplex {
            bits: self.bits,
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// Product, exact before the final shift.
    pub fn mul(&self, o: &FixedComplex) -> FixedComplex {
        let c = Cx {
            re: self.re.clone(),
            im: self.im.clone(),
        }
        .mul(
            &Cx {
                re: o.re.clone(),
                im: o.im.clone(),
            },
            self.bits,
        );
        FixedComplex {
            bits: self.bits,
            re: c.re,
            im: c.im,
        }
    }

    /// Nearest integer to the real part and the distance to it, plus
    /// `|im|`, both scaled by `2^bits`.
    pub fn nearest_integer(&self) -> (BigInt, BigInt, BigInt) {
        let one = BigInt::one() << self.bits;
        let half = &one >> 1;
        let n: BigInt = Integer::div_floor(&(&self.re + &half), &one);
        let dist = (&self.re - &n * &one).abs();
        (n, dist, self.im.abs())
    }

    pub fn scale_int(&self, k: &BigInt) -> FixedComplex {
        let c = Cx {
            re: self.re.clone(),
            im: self.im.clone(),
        }
        .scale_int(k);
        FixedComplex {
            bits: self.bits,
            re: c.re,
            im: c.im,
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (to_f64_scaled(&self.re, self.bits), to_f64_scaled(&self.im, self.bits))
    }
}

/// Elementary symmetric polynomials `e_0 = 1, e_1, ..., e_n` of the values,
/// with signs so that `prod (x - v_k) = sum_i (-1)^i e_i x^(n-i)`.
pub fn elementary_symmetric(values: &[FixedComplex], bits: u32) -> Vec<FixedComplex> {
    let mut e = vec![FixedComplex::from_int(&BigInt::one(), bits)];
    for v in values {
        let mut next = e.clone();
        next.push(FixedComplex::from_int(&BigInt::zero(), bits));
        for i in 1..next.len() {
            next[i] = e.get(i).cloned().unwrap_or_else(|| FixedComplex::from_int(&BigInt::zero(), bits))
                .add(&e[i - 1].mul(v));
        }
        e = next;
    }
    e
}
