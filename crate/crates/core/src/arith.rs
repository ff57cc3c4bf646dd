//! Small integer helpers shared by the exact modules: extended gcd,
//! modular inverses, factorisation of small moduli and square-free parts.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Returns `(g, x, y)` with `a*x + b*y = g = gcd(a, b) >= 0`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a as i128, b as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (old_r, old_s, old_t) = (-old_r, -old_s, -old_t);
    }
    (old_r as i64, old_s as i64, old_t as i64)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Inverse of `a` modulo `m`, if it exists. `m = 1` maps everything to 0.
pub fn mod_inv(a: i64, m: i64) -> Option<i64> {
    if m == 1 {
        return Some(0);
    }
    let (g, x, _) = ext_gcd(a.rem_euclid(m), m);
    (g == 1).then(|| x.rem_euclid(m))
}

/// Distinct prime factors of `n`, ascending.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

pub fn euler_phi(n: u64) -> u64 {
    prime_factors(n)
        .into_iter()
        .fold(n, |acc, p| acc / p * (p - 1))
}

pub fn units_mod(n: u64) -> Vec<u64> {
    if n == 1 {
        return vec![0];
    }
    (1..n).filter(|&a| a.gcd(&n) == 1).collect()
}

pub fn is_squarefree(n: u64) -> bool {
    if n == 0 {
        return false;
    }
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Trial division limit used by [`squarefree_split`]; inputs whose cube root
/// exceeds this are rejected.
const TRIAL_LIMIT: u64 = 1 << 22;

/// Splits `n > 0` as `f^2 * core` with `core` square-free.
///
/// Returns `None` when `n` is too large to factor by trial division up to its
/// cube root (`n >= 2^66`).
pub fn squarefree_split(n: &BigUint) -> Option<(BigUint, u64)> {
    assert!(!n.is_zero(), "square-free split of zero");
    let cube_root = n.cbrt();
    if cube_root > BigUint::from(TRIAL_LIMIT) {
        return None;
    }
    let limit = cube_root.to_u64().unwrap_or(TRIAL_LIMIT) + 1;
    let mut rest = n.clone();
    let mut square = BigUint::one();
    let mut core = 1u64;
    let mut p = 2u64;
    while p <= limit {
        let bp = BigUint::from(p);
        let mut e = 0u32;
        while (&rest % &bp).is_zero() {
            rest /= &bp;
            e += 1;
        }
        if e > 0 {
            square *= bp.pow(e / 2);
            if e % 2 == 1 {
                core *= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    // `rest` has no prime factor below the cube root of n, so it is 1, a
    // prime, a product of two distinct primes, or a prime square.
    if !rest.is_one() {
        let r = rest.sqrt();
        if &r * &r == rest {
            square *= r;
        } else {
            core = core.checked_mul(rest.to_u64()?)?;
        }
    }
    Some((square, core))
}

/// Integer content (gcd of numerators after clearing denominators) helpers.
pub fn lcm_of_denominators<'a>(xs: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    xs.into_iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

pub fn gcd_all<'a>(xs: impl IntoIterator<Item = &'a BigInt>) -> BigInt {
    xs.into_iter().fold(BigInt::zero(), |acc, x| acc.gcd(x))
}

/// Floor of `x + 1/2`, i.e. nearest integer with ties rounded up.
pub fn floor_half_up(x: &Rational) -> BigInt {
    (x + rat(1, 2)).floor().to_integer()
}

pub fn to_i64(x: &BigInt) -> Option<i64> {
    x.to_i64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_gcd_bezout() {
        for a in -30i64..30 {
            for b in -30i64..30 {
                let (g, x, y) = ext_gcd(a, b);
                assert_eq!(a * x + b * y, g);
                assert_eq!(g, gcd(a, b));
            }
        }
    }

    #[test]
    fn inverses() {
        assert_eq!(mod_inv(3, 8), Some(3));
        assert_eq!(mod_inv(2, 4), None);
        assert_eq!(mod_inv(5, 1), Some(0));
    }

    #[test]
    fn phi_and_units_agree() {
        for n in 1..60u64 {
            assert_eq!(euler_phi(n) as usize, units_mod(n).len(), "n={n}");
        }
    }

    #[test]
    fn squarefree_split_small() {
        for n in 1u64..2000 {
            let (f, c) = squarefree_split(&BigUint::from(n)).unwrap();
            assert!(is_squarefree(c));
            assert_eq!(&f * &f * BigUint::from(c), BigUint::from(n));
        }
        let big = BigUint::from(1_000_003u64) * BigUint::from(1_000_003u64) * BigUint::from(6u64);
        assert_eq!(squarefree_split(&big), Some((BigUint::from(1_000_003u64), 6)));
    }

    #[test]
    fn rounding_conventions() {
        assert_eq!(floor_half_up(&rat(1, 2)), BigInt::from(1));
        assert_eq!(floor_half_up(&rat(-1, 2)), BigInt::from(0));
        assert_eq!(floor_half_up(&rat(7, 3)), BigInt::from(2));
    }

    #[test]
    fn divisor_lists() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(prime_factors(360), vec![2, 3, 5]);
    }
}
