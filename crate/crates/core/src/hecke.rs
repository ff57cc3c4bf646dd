//! Hecke correspondences on `Y(N) x Y(N)`.
//!
//! Degrees are subgroup indices inside `Gamma(N) / Gamma(M)` for a working
//! modulus `M` divisible by `N m`, `m = det g`: since `g Gamma(Nm) adj(g)`
//! lies in `m Gamma(N)`, membership of `gamma` in `g^-1 Gamma(N) g` only
//! depends on `gamma mod Nm`.
//!
//! Components are compared through a finite model of each curve over the
//! SL2(Z)-orbit of a generic base point `tau0`: the curve
//! `{(Gamma(N) h tau0, Gamma(N) y h tau0)}` becomes the set of label pairs
//! `(+-h mod N, (H, +-gamma mod N))`, where `y h = gamma H` with `H` in
//! Hermite normal form.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::arith::{gcd, mod_inv, units_mod, Rational};
use crate::congruence::{check_bound, enumerate_bounded, lift_sl2, CongruenceError, ModMatrix, DEFAULT_ENUM_BOUND};
use crate::exec::Exec;
use crate::group::{format_rational, GroupElement};
use crate::halfplane::{act, HalfPlanePoint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeckeError {
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
    #[error("entries of the primitive representative are too large: {0}")]
    TooLarge(Box<GroupElement>),
}

/// `g` normalized to a primitive integral matrix, a level and a working
/// modulus `N * det g`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorrespondenceDescriptor {
    pub g: GroupElement,
    #[serde(rename = "N")]
    pub n: u32,
    pub modulus: u32,
    #[serde(skip)]
    entries: [i64; 4],
    #[serde(skip)]
    det: u32,
}

impl CorrespondenceDescriptor {
    pub fn new(g: &GroupElement, n: u32) -> Result<Self, HeckeError> {
        Self::with_bound(g, n, DEFAULT_ENUM_BOUND)
    }

    /// Fails with `BoundExceeded` when `N * det` exceeds `bound`.
    pub fn with_bound(g: &GroupElement, n: u32, bound: u32) -> Result<Self, HeckeError> {
        if n == 0 {
            return Err(CongruenceError::ZeroLevel.into());
        }
        let (_, p) = g.primitive_part();
        let prim = GroupElement::from_big_ints(&p).expect("positive determinant");
        let det = &p[0] * &p[3] - &p[1] * &p[2];
        let det_u = det.to_u64().ok_or_else(|| HeckeError::TooLarge(Box::new(prim.clone())))?;
        let modulus = (n as u64).saturating_mul(det_u);
        check_bound(modulus, bound)?;
        let entries = prim.small_entries().ok_or_else(|| HeckeError::TooLarge(Box::new(prim.clone())))?;
        Ok(CorrespondenceDescriptor {
            g: prim,
            n,
            modulus: modulus as u32,
            entries,
            det: det_u as u32,
        })
    }

    pub fn det(&self) -> u32 {
        self.det
    }

    fn adj_entries(&self) -> [i64; 4] {
        let [a, b, c, d] = self.entries;
        [d, -b, -c, a]
    }
}

// ---------------------------------------------------------------------------
// Degrees

fn imul(x: &[i64; 4], y: &[i64; 4], m: i64) -> [i64; 4] {
    let r = |v: i128| v.rem_euclid(m as i128) as i64;
    let [a, b, c, d] = x.map(|v| v as i128);
    let [p, q, s, t] = y.map(|v| v as i128);
    [r(a * p + b * s), r(a * q + b * t), r(c * p + d * s), r(c * q + d * t)]
}

/// Solutions of `u x = r (mod k)` in `0..k`.
fn solve_linear(u: i64, r: i64, k: i64) -> Vec<i64> {
    let g = gcd(u.rem_euclid(k), k);
    let r = r.rem_euclid(k);
    if r % g != 0 {
        return Vec::new();
    }
    let k1 = k / g;
    let base = if k1 == 1 {
        0
    } else {
        ((r / g) as i128 * mod_inv((u / g).rem_euclid(k1), k1).expect("coprime") as i128).rem_euclid(k1 as i128)
            as i64
    };
    (0..g).map(|j| base + j * k1).collect()
}

/// Elements `I + N X` of the kernel of SL2(Z/M) -> SL2(Z/N), for each value
/// of the first coordinate of `X`.
fn kernel_slice(n: i64, k: i64, x1: i64) -> Vec<[i64; 4]> {
    let m = n * k;
    let mut out = Vec::new();
    for x2 in 0..k {
        for x3 in 0..k {
            // det(I + N X) = 1 (mod M)  <=>  x4 (1 + N x1) = N x2 x3 - x1 (mod K)
            for x4 in solve_linear(1 + n * x1, n * x2 * x3 - x1, k) {
                out.push([
                    (1 + n * x1) % m,
                    (n * x2) % m,
                    (n * x3) % m,
                    (1 + n * x4) % m,
                ]);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeStep {
    pub modulus: u32,
    pub kernel_size: u64,
    pub left: u64,
    pub right: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeReport {
    pub left: u64,
    pub right: u64,
    pub modulus: u32,
    pub stable: bool,
    pub trace: Vec<DegreeStep>,
}

fn degree_at(desc: &CorrespondenceDescriptor, modulus: u32, exec: Exec) -> DegreeStep {
    let n = desc.n as i64;
    let k = modulus as i64 / n;
    let nm = desc.modulus as i64;
    let m = desc.det as i64;
    let g = desc.entries;
    let adj = desc.adj_entries();
    let scalar = [m % nm, 0, 0, m % nm];
    let counts = exec.map_range(k as u64, |x1| {
        let mut total = 0u64;
        let (mut left, mut right) = (0u64, 0u64);
        for gamma in kernel_slice(n, k, x1 as i64) {
            total += 1;
            if imul(&imul(&g, &gamma, nm), &adj, nm) == scalar {
                left += 1;
            }
            if imul(&imul(&adj, &gamma, nm), &g, nm) == scalar {
                right += 1;
            }
        }
        (total, left, right)
    });
    let (total, left, right) = counts
        .into_iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    DegreeStep {
        modulus,
        kernel_size: total,
        left: total / left,
        right: total / right,
    }
}

/// `([Gamma(N) : Gamma(N) ^ g^-1 Gamma(N) g], [Gamma(N) : Gamma(N) ^ g Gamma(N) g^-1])`,
/// recomputed at `Nm`, `2Nm`, `4Nm` until two consecutive values agree.
pub fn correspondence_degree(desc: &CorrespondenceDescriptor, exec: Exec) -> DegreeReport {
    let mut trace = vec![degree_at(desc, desc.modulus, exec)];
    let mut stable = false;
    let mut modulus = desc.modulus;
    while trace.len() < 3 {
        modulus *= 2;
        trace.push(degree_at(desc, modulus, exec));
        let l = trace.len();
        let same = |a: &DegreeStep, b: &DegreeStep| a.left == b.left && a.right == b.right;
        if l >= 3 && same(&trace[l - 1], &trace[l - 2]) && same(&trace[l - 2], &trace[l - 3]) {
            stable = true;
        }
    }
    let first = &trace[0];
    DegreeReport {
        left: first.left,
        right: first.right,
        modulus: desc.modulus,
        stable,
        trace,
    }
}

// ---------------------------------------------------------------------------
// Components

/// Row-style Hermite normal form `(a, b, d)` of a full-rank sublattice of
/// `Z^2`: basis rows `(a, b)`, `(0, d)`, `a, d > 0`, `0 <= b < d`.
pub fn hermite_form(gens: &[[i64; 2]]) -> (i64, i64, i64) {
    let mut rows: Vec<[i64; 2]> = gens.to_vec();
    // Euclid on the first column.
    loop {
        rows.retain(|r| r[0] != 0 || r[1] != 0);
        let nonzero: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][0] != 0).collect();
        if nonzero.len() <= 1 {
            break;
        }
        let pivot = *nonzero
            .iter()
            .min_by_key(|&&i| rows[i][0].abs())
            .expect("nonempty");
        let p = rows[pivot];
        for &i in &nonzero {
            if i != pivot {
                let q = rows[i][0].div_euclid(p[0]);
                rows[i] = [rows[i][0] - q * p[0], rows[i][1] - q * p[1]];
            }
        }
    }
    let top = *rows.iter().find(|r| r[0] != 0).expect("full rank");
    let (mut a, mut b) = (top[0], top[1]);
    let d = rows
        .iter()
        .filter(|r| r[0] == 0)
        .fold(0i64, |acc, r| gcd(acc, r[1]));
    assert!(d > 0, "lattice not of full rank");
    if a < 0 {
        a = -a;
        b = -b;
    }
    (a, b.rem_euclid(d), d)
}

fn pm_canonical(x: ModMatrix) -> ModMatrix {
    x.min(x.neg())
}

pub type SecondLabel = ((i64, i64, i64), ModMatrix);
pub type ComponentLabels = BTreeSet<(ModMatrix, SecondLabel)>;

/// The class of `y` (mod `N m`, determinant `m`) in `Gamma(N) \ M_2(Z)_det=m`,
/// up to sign.
fn second_label(y: &[i64; 4], n: u32, m: i64, nm: i64) -> SecondLabel {
    let (a, b, d) = hermite_form(&[[y[0], y[1]], [y[2], y[3]], [m, 0], [0, m]]);
    debug_assert_eq!(a * d, m, "lattice index");
    let adj_h = [d, -b, 0, a];
    let prod = imul(y, &adj_h, nm);
    debug_assert!(prod.iter().all(|v| v % m == 0));
    let nn = n as i64;
    let gamma = prod.map(|v| (v / m).rem_euclid(nn));
    let gm = ModMatrix::new(n, gamma).expect("unimodular mod N");
    ((a, b, d), pm_canonical(gm))
}

/// `d_mu^-1 g d_mu = [[a, b / mu], [c mu, d]]` modulo `modulus`, for a lift
/// of `mu` that is a unit modulo `modulus`.
fn twisted(desc: &CorrespondenceDescriptor, mu: u64, modulus: u32) -> [i64; 4] {
    let n = desc.n as i64;
    let mm = modulus as i64;
    let mut lift = mu as i64;
    while gcd(lift, mm) != 1 {
        lift += n;
    }
    let inv = mod_inv(lift, mm).expect("unit");
    let [a, b, c, d] = desc.entries;
    [a.rem_euclid(mm), (b as i128 * inv as i128).rem_euclid(mm as i128) as i64,
     (c as i128 * lift as i128).rem_euclid(mm as i128) as i64, d.rem_euclid(mm)]
}

/// The finite model of `C^mu_{g,N}` at working modulus `modulus`
/// (a multiple of `N m`).
pub fn component_labels(
    desc: &CorrespondenceDescriptor,
    mu: u64,
    modulus: u32,
    exec: Exec,
) -> Result<ComponentLabels, HeckeError> {
    let hs = enumerate_bounded(modulus, modulus.max(DEFAULT_ENUM_BOUND))?;
    let y = twisted(desc, mu, modulus);
    let m = desc.det as i64;
    let nm = modulus as i64;
    let n = desc.n;
    let pairs = exec.map(&hs, |h| {
        let he = h.entries().map(|v| v as i64);
        let yh = imul(&y, &he, nm);
        let first = pm_canonical(h.reduce(n).expect("divisor"));
        (first, second_label(&yh, n, m, nm))
    });
    Ok(pairs.into_iter().collect())
}

/// Right action of `k` (an element of SL2(Z/modulus)) on a label. The second
/// factor is acted on through its representative `lift(gamma) H`.
pub fn act_on_label(
    desc: &CorrespondenceDescriptor,
    label: &(ModMatrix, SecondLabel),
    k: &ModMatrix,
) -> (ModMatrix, SecondLabel) {
    let nm = k.level() as i64;
    let n = desc.n;
    let m = desc.det as i64;
    let (first, ((a, b, d), gamma)) = label;
    let first = pm_canonical(first.mul(&k.reduce(n).expect("divisor")));
    let lift = lift_sl2(gamma).small_entries().expect("small lift");
    let rep = imul(&lift, &[*a, *b, 0, *d], nm);
    let ke = k.entries().map(|v| v as i64);
    (first, second_label(&imul(&rep, &ke, nm), n, m, nm))
}

/// The orbit of `start` under SL2(Z/modulus), generated by `s` and `t`.
pub fn label_orbit(
    desc: &CorrespondenceDescriptor,
    start: &(ModMatrix, SecondLabel),
    modulus: u32,
) -> ComponentLabels {
    let gens = [
        ModMatrix::new(modulus, [0, -1, 1, 0]).expect("unimodular"),
        ModMatrix::new(modulus, [1, 1, 0, 1]).expect("unimodular"),
    ];
    let mut seen: ComponentLabels = BTreeSet::from([*start]);
    let mut frontier = vec![*start];
    while let Some(x) = frontier.pop() {
        for k in &gens {
            let y = act_on_label(desc, &x, k);
            if seen.insert(y) {
                frontier.push(y);
            }
        }
    }
    seen
}

/// Sizes of the fibres of a label set over its first and second factors.
/// Only the first is a fibre of the curve: the model covers a single
/// SL2(Z)-orbit in the first factor.
pub fn fibre_sizes(labels: &ComponentLabels) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut over_first: BTreeMap<&ModMatrix, usize> = BTreeMap::new();
    let mut over_second: BTreeMap<&SecondLabel, usize> = BTreeMap::new();
    for (a, b) in labels {
        *over_first.entry(a).or_default() += 1;
        *over_second.entry(b).or_default() += 1;
    }
    (
        over_first.into_values().collect(),
        over_second.into_values().collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentReport {
    pub count: usize,
    pub exact: bool,
    pub phi: usize,
    /// Residues `mu mod N` grouped by equal components.
    pub classes: Vec<Vec<u64>>,
    pub modulus: u32,
    pub trace: Vec<(u32, usize)>,
}

fn partition(desc: &CorrespondenceDescriptor, modulus: u32, exec: Exec) -> Result<Vec<Vec<u64>>, HeckeError> {
    let mut by_set: Vec<(ComponentLabels, Vec<u64>)> = Vec::new();
    for mu in units_mod(desc.n as u64) {
        let labels = component_labels(desc, mu, modulus, exec)?;
        match by_set.iter_mut().find(|(s, _)| *s == labels) {
            Some((_, v)) => v.push(mu),
            None => by_set.push((labels, vec![mu])),
        }
    }
    Ok(by_set.into_iter().map(|(_, v)| v).collect())
}

/// Number of distinct curves `C^mu_{g,N}`, `mu` in `(Z/N)^x`. `exact` is set
/// when the partition of residues is unchanged at twice the modulus;
/// otherwise `count` is only an upper bound.
pub fn component_count(desc: &CorrespondenceDescriptor, exec: Exec) -> Result<ComponentReport, HeckeError> {
    let base = partition(desc, desc.modulus, exec)?;
    let doubled = partition(desc, desc.modulus * 2, exec)?;
    Ok(ComponentReport {
        count: base.len(),
        exact: base == doubled,
        phi: units_mod(desc.n as u64).len(),
        trace: vec![(desc.modulus, base.len()), (desc.modulus * 2, doubled.len())],
        classes: base,
        modulus: desc.modulus,
    })
}

// ---------------------------------------------------------------------------
// Hecke orbits

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeckeOrbitResult {
    pub same: bool,
    pub field1: u64,
    pub field2: u64,
    pub witness: Option<GroupElement>,
}

/// Two quadratic points are related by GL2+(Q) iff they lie in the same
/// field; the witness is `[[y2/y1, x2 - (y2/y1) x1], [0, 1]]`.
pub fn same_hecke_orbit(tau1: &HalfPlanePoint, tau2: &HalfPlanePoint) -> HeckeOrbitResult {
    let (f1, f2) = (tau1.field(), tau2.field());
    let witness = (f1 == f2).then(|| {
        let r = tau2.y() / tau1.y();
        let shift = tau2.x() - &r * tau1.x();
        let g = GroupElement::new(r, shift, Rational::zero(), Rational::one()).expect("ratio of positives");
        debug_assert_eq!(&act(&g, tau1), tau2);
        g
    });
    HeckeOrbitResult {
        same: witness.is_some(),
        field1: f1,
        field2: f2,
        witness,
    }
}

/// Small-height search for `g` with `g . tau1 = tau2`: integer entries in
/// `-h..=h`. Used as an independent cross-check of [`same_hecke_orbit`].
pub fn search_witness(tau1: &HalfPlanePoint, tau2: &HalfPlanePoint, h: i64) -> Option<GroupElement> {
    for a in -h..=h {
        for b in -h..=h {
            for c in -h..=h {
                for d in -h..=h {
                    if a * d - b * c <= 0 {
                        continue;
                    }
                    let g = GroupElement::from_ints(a, b, c, d).expect("positive det");
                    if &act(&g, tau1) == tau2 {
                        return Some(g);
                    }
                }
            }
        }
    }
    None
}

pub fn describe(desc: &CorrespondenceDescriptor) -> String {
    format!(
        "g = {} (det {}), N = {}, modulus {}",
        desc.g,
        format_rational(&desc.g.det()),
        desc.n,
        desc.modulus
    )
}
