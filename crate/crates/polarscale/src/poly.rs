//! Exact polynomials over Q (integer numerators over one common denominator), the
//! f_m sequence, Sturm chains, Bernstein positivity and certified a_m, μ_m.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::Point;

#[derive(Clone, PartialEq, Eq)]
pub struct RationalPoly {
    num: Vec<BigInt>,
    den: BigInt,
}

fn trim(v: &mut Vec<BigInt>) {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
}

fn content(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
}

/// p(x) ↦ p(x + 1), in place.
fn taylor_shift_one(c: &mut [BigInt]) {
    let n = c.len();
    for i in 0..n.saturating_sub(1) {
        for j in (i..n - 1).rev() {
            let t = c[j + 1].clone();
            c[j] += t;
        }
    }
}

fn negate_odd(c: &mut [BigInt]) {
    c.iter_mut().skip(1).step_by(2).for_each(|x| *x = -std::mem::take(x));
}

/// p(x) ↦ p(1 − x).
fn reflect_ints(c: &[BigInt]) -> Vec<BigInt> {
    let mut v = c.to_vec();
    taylor_shift_one(&mut v);
    negate_odd(&mut v);
    v
}

fn mul_ints(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn add_scaled(a: &[BigInt], sa: &BigInt, b: &[BigInt], sb: &BigInt) -> Vec<BigInt> {
    let n = a.len().max(b.len());
    let z = BigInt::zero();
    let mut v: Vec<BigInt> = (0..n).map(|i| a.get(i).unwrap_or(&z) * sa + b.get(i).unwrap_or(&z) * sb).collect();
    trim(&mut v);
    v
}

/// Σ c_k p^k q^{d−k} for r = p/q, q > 0: the value times q^d, same sign as p(r).
fn eval_scaled(c: &[BigInt], r: &BigRational) -> BigInt {
    let (p, q) = (r.numer(), r.denom());
    let Some(top) = c.last() else { return BigInt::zero() };
    let dyadic = q.is_one() || (q.trailing_zeros() == Some(q.bits() - 1));
    let shift = q.bits() - 1;
    let mut acc = top.clone();
    let mut qpow = BigInt::one();
    for (i, ck) in c.iter().rev().skip(1).enumerate() {
        acc *= p;
        if dyadic {
            acc += ck << (shift * (i as u64 + 1));
        } else {
            qpow *= q;
            acc += ck * &qpow;
        }
    }
    acc
}

fn sign_at(c: &[BigInt], r: &BigRational) -> Sign {
    eval_scaled(c, r).sign()
}

impl RationalPoly {
    pub fn new(num: Vec<BigInt>, den: BigInt) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Constraint("zero denominator".into()));
        }
        let mut p = RationalPoly { num, den };
        p.canonicalize();
        Ok(p)
    }

    fn from_parts(num: Vec<BigInt>, den: BigInt) -> Self {
        let mut p = RationalPoly { num, den };
        p.canonicalize();
        p
    }

    fn canonicalize(&mut self) {
        trim(&mut self.num);
        if self.num.is_empty() {
            self.den = BigInt::one();
            return;
        }
        let g = content(&self.num).gcd(&self.den);
        let g = if self.den.is_negative() { -g } else { g };
        if !g.is_one() {
            self.num.iter_mut().for_each(|c| *c /= &g);
            self.den /= &g;
        }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::from_parts(coeffs.iter().map(|&c| BigInt::from(c)).collect(), BigInt::one())
    }

    pub fn from_rationals(coeffs: &[BigRational]) -> Self {
        let den = coeffs.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        let num = coeffs.iter().map(|c| c.numer() * (&den / c.denom())).collect();
        Self::from_parts(num, den)
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_parts(vec![c.numer().clone()], c.denom().clone())
    }

    pub fn x() -> Self {
        Self::from_i64(&[0, 1])
    }

    pub fn zero() -> Self {
        Self::from_i64(&[])
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.num.len().checked_sub(1)
    }

    /// Integer numerator coefficients, lowest degree first.
    pub fn numer(&self) -> &[BigInt] {
        &self.num
    }

    pub fn denom(&self) -> &BigInt {
        &self.den
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        BigRational::new(self.num.get(k).cloned().unwrap_or_default(), self.den.clone())
    }

    pub fn coeffs(&self) -> Vec<BigRational> {
        (0..self.num.len()).map(|k| self.coeff(k)).collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        let l = self.den.lcm(&o.den);
        Self::from_parts(add_scaled(&self.num, &(&l / &self.den), &o.num, &(&l / &o.den)), l)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let l = self.den.lcm(&o.den);
        Self::from_parts(add_scaled(&self.num, &(&l / &self.den), &o.num, &-(&l / &o.den)), l)
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::from_parts(mul_ints(&self.num, &o.num), &self.den * &o.den)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::from_parts(self.num.iter().map(|x| x * c.numer()).collect(), &self.den * c.denom())
    }

    pub fn derivative(&self) -> Self {
        let num = self.num.iter().enumerate().skip(1).map(|(k, c)| c * BigInt::from(k)).collect();
        Self::from_parts(num, self.den.clone())
    }

    /// p(q(z)) by Horner.
    pub fn compose(&self, q: &Self) -> Self {
        let mut acc = Self::zero();
        for c in self.coeffs().into_iter().rev() {
            acc = acc.mul(q).add(&Self::constant(c));
        }
        acc
    }

    /// p(1 − z).
    pub fn reflect(&self) -> Self {
        Self::from_parts(reflect_ints(&self.num), self.den.clone())
    }

    /// p(z²).
    pub fn square_arg(&self) -> Self {
        let mut num = vec![BigInt::zero(); 2 * self.num.len()];
        for (k, c) in self.num.iter().enumerate() {
            num[2 * k] = c.clone();
        }
        Self::from_parts(num, self.den.clone())
    }

    pub fn eval(&self, r: &BigRational) -> BigRational {
        let d = self.num.len().saturating_sub(1) as i32;
        BigRational::new(eval_scaled(&self.num, r), self.den.clone()) / BigRational::from(r.denom().clone()).pow(d)
    }

    pub fn eval_f64(&self, z: f64) -> f64 {
        BigRational::from_float(z).map(|r| ratio_f64(&self.eval(&r))).unwrap_or(f64::NAN)
    }

    /// p(z) ↦ (p(z²) + p(1 − (1 − z)²)) / 2.
    pub fn polar_iterate(&self) -> Self {
        let sq = self.square_arg();
        let other = self.reflect().square_arg().reflect();
        let s = sq.add(&other);
        Self::from_parts(s.num, s.den * 2)
    }

    pub fn is_symmetric(&self) -> bool {
        self.reflect() == *self
    }

    /// For symmetric p, the R with p(z) = R(4z(1 − z)).
    pub fn symmetric_reduction(&self) -> Result<Self> {
        if !self.is_symmetric() {
            return Err(Error::Constraint("polynomial is not symmetric about ½".into()));
        }
        if self.num.len() <= 1 {
            return Ok(self.clone());
        }
        let d = self.num.len() - 1;
        // 2^d p((1 + s)/2) is even in s; s² = 1 − v
        let mut a: Vec<BigInt> = self.num.iter().enumerate().map(|(k, c)| c << (d - k)).collect();
        taylor_shift_one(&mut a);
        debug_assert!(a.iter().skip(1).step_by(2).all(|c| c.is_zero()));
        let mut e: Vec<BigInt> = a.into_iter().step_by(2).collect();
        taylor_shift_one(&mut e);
        negate_odd(&mut e);
        Ok(Self::from_parts(e, &self.den << d))
    }
}

impl fmt::Debug for RationalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?})/{}", self.num.iter().map(|c| c.to_string()).collect::<Vec<_>>(), self.den)
    }
}

pub fn ratio_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// f₀ = z(1 − z)
pub fn f0() -> RationalPoly {
    RationalPoly::from_i64(&[0, 1, -1])
}

/// f₀, f₁, …, f_m.
pub fn f_sequence(m: u32) -> Vec<RationalPoly> {
    let mut out = vec![f0()];
    for _ in 0..m {
        let next = out.last().unwrap().polar_iterate();
        out.push(next);
    }
    out
}

/// Integer coefficients of 2^m f_m.
pub fn fm_integer_coeffs(m: u32) -> Vec<BigInt> {
    let f = f_sequence(m).pop().unwrap();
    let scale = (BigInt::one() << m) / f.denom();
    f.numer().iter().map(|c| c * &scale).collect()
}

/// Exact quotient by (x − r) for a root r.
fn deflate_root(c: &[BigInt], r: &BigRational) -> Vec<BigInt> {
    let p = RationalPoly::from_parts(c.to_vec(), BigInt::one());
    let mut out = vec![BigRational::zero(); c.len() - 1];
    let mut carry = BigRational::zero();
    for k in (1..c.len()).rev() {
        carry = carry * r + p.coeff(k);
        out[k - 1] = carry.clone();
    }
    let q = RationalPoly::from_rationals(&out);
    let g = content(&q.num);
    q.num.iter().map(|x| x / &g).collect()
}

fn primitive_positive(mut v: Vec<BigInt>) -> Vec<BigInt> {
    trim(&mut v);
    let g = content(&v);
    if !g.is_zero() && !g.is_one() {
        v.iter_mut().for_each(|c| *c /= &g);
    }
    v
}

/// lc(b)^{deg a − deg b + 1} · a mod b.
fn prem(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut r = a.to_vec();
    let lb = b.last().unwrap().clone();
    let mut steps = 0usize;
    let delta = a.len() - b.len();
    while r.len() >= b.len() && !r.is_empty() {
        let lr = r.last().unwrap().clone();
        let k = r.len() - b.len();
        r.iter_mut().for_each(|c| *c *= &lb);
        for (j, bj) in b.iter().enumerate() {
            r[k + j] -= &lr * bj;
        }
        r.pop();
        trim(&mut r);
        steps += 1;
    }
    if steps < delta + 1 {
        let f = num_traits::pow(lb, delta + 1 - steps);
        r.iter_mut().for_each(|c| *c *= &f);
    }
    r
}

fn exact_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    assert!(r.is_zero(), "inexact subresultant division");
    q
}

/// Sturm chain p, p′, −rem, … with every member a positive multiple of the classical one.
/// Built from the subresultant sequence, whose members are those of the chain up to sign
/// and scale; the signs are tracked alongside.
pub fn sturm_chain(p: &[BigInt]) -> Vec<Vec<BigInt>> {
    let p0 = primitive_positive(p.to_vec());
    let p1 = primitive_positive(RationalPoly::from_parts(p0.clone(), BigInt::one()).derivative().num);
    if p1.is_empty() {
        return vec![p0];
    }
    let mut rs = vec![p0, p1];
    let mut signs = vec![1i8, 1];
    let mut psi = BigInt::from(-1);
    let d = |v: &Vec<BigInt>| v.len() - 1;
    let mut beta: BigInt = if (d(&rs[0]) - d(&rs[1]) + 1) % 2 == 0 { 1.into() } else { (-1).into() };
    loop {
        let n = rs.len();
        let (prev, cur) = (&rs[n - 2], &rs[n - 1]);
        let delta = d(prev) - d(cur);
        let gamma = cur.last().unwrap().clone();
        let raw = prem(prev, cur);
        if raw.is_empty() {
            break;
        }
        let next: Vec<BigInt> = raw.iter().map(|c| exact_div(c, &beta)).collect();
        // sign of the factor relating `next` to rem(prev, cur)
        let gsign = if gamma.is_negative() && (delta + 1) % 2 == 1 { -1 } else { 1 };
        let bsign = if beta.is_negative() { -1 } else { 1 };
        let s = -signs[n - 2] * gsign * bsign;
        // update ψ and β for the following step
        let neg_gamma = -&gamma;
        psi = if delta == 1 {
            neg_gamma.clone()
        } else {
            exact_div(&num_traits::pow(neg_gamma.clone(), delta), &num_traits::pow(psi.clone(), delta - 1))
        };
        beta = &neg_gamma * num_traits::pow(psi.clone(), d(cur) - (next.len() - 1));
        rs.push(next);
        signs.push(s);
    }
    rs.into_iter()
        .zip(signs)
        .map(|(r, s)| if s < 0 { r.into_iter().map(|c| -c).collect() } else { r })
        .collect()
}

fn variations(chain: &[Vec<BigInt>], r: &BigRational) -> usize {
    let signs: Vec<Sign> = chain.iter().map(|c| sign_at(c, r)).filter(|s| *s != Sign::NoSign).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn sturm_count_ints(p: &[BigInt], lo: &BigRational, hi: &BigRational) -> usize {
    let mut q = p.to_vec();
    let mut extra = 0;
    while sign_at(&q, lo) == Sign::NoSign {
        q = deflate_root(&q, lo);
    }
    while sign_at(&q, hi) == Sign::NoSign {
        q = deflate_root(&q, hi);
        extra = 1;
    }
    if q.len() <= 1 {
        return extra;
    }
    let chain = sturm_chain(&q);
    variations(&chain, lo) - variations(&chain, hi) + extra
}

/// Number of distinct real roots of p in (lo, hi].
pub fn sturm_root_count(p: &RationalPoly, lo: &BigRational, hi: &BigRational) -> Result<usize> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if lo >= hi {
        return Err(Error::BadInterval { a: ratio_f64(lo), b: ratio_f64(hi) });
    }
    Ok(sturm_count_ints(&p.num, lo, hi))
}

/// Disjoint rational intervals (lo, hi] each holding exactly one root of p in (lo, hi].
pub fn isolate_roots(p: &RationalPoly, lo: &BigRational, hi: &BigRational) -> Result<Vec<(BigRational, BigRational)>> {
    let total = sturm_root_count(p, lo, hi)?;
    let chain = sturm_chain(&p.num);
    let count = |a: &BigRational, b: &BigRational| {
        if sign_at(&p.num, a) == Sign::NoSign || sign_at(&p.num, b) == Sign::NoSign {
            sturm_count_ints(&p.num, a, b)
        } else {
            variations(&chain, a) - variations(&chain, b)
        }
    };
    let mut out = Vec::new();
    let mut stack = vec![(lo.clone(), hi.clone(), total)];
    while let Some((a, b, k)) = stack.pop() {
        match k {
            0 => {}
            1 => out.push((a, b)),
            _ => {
                let mid = (&a + &b) / BigRational::from_integer(2.into());
                let left = count(&a, &mid);
                stack.push((mid.clone(), b, k - left));
                stack.push((a, mid, left));
            }
        }
    }
    out.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(out)
}

/// Bernstein coefficients on [0, 1] times binomials: the coefficients of
/// (1 + x)^d p(x / (1 + x)).
fn bernstein_scaled(c: &[BigInt]) -> Vec<BigInt> {
    let mut r: Vec<BigInt> = c.iter().rev().cloned().collect();
    taylor_shift_one(&mut r);
    r.reverse();
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Positivity {
    Positive,
    /// found a point in [0, 1] where p ≤ 0
    Fails,
    Undecided,
}

/// Decides p > 0 on [0, 1] by Bernstein sign patterns with bisection down to `max_depth`.
/// Returns the verdict and the number of subintervals examined.
pub fn bernstein_positive(p: &[BigInt], max_depth: u32) -> (Positivity, usize) {
    let mut c = p.to_vec();
    trim(&mut c);
    if c.is_empty() {
        return (Positivity::Fails, 0);
    }
    let mut stack = vec![(c, 0u32)];
    let mut visited = 0;
    while let Some((c, depth)) = stack.pop() {
        visited += 1;
        let b = bernstein_scaled(&c);
        if !b[0].is_positive() || !b.last().unwrap().is_positive() {
            return (Positivity::Fails, visited);
        }
        if b.iter().all(|x| x.is_positive()) {
            continue;
        }
        if depth >= max_depth {
            return (Positivity::Undecided, visited);
        }
        let d = c.len() - 1;
        // left half: 2^d p(t/2); right half: the same shifted by one
        let left: Vec<BigInt> = c.iter().enumerate().map(|(k, x)| x << (d - k)).collect();
        let mut right = left.clone();
        taylor_shift_one(&mut right);
        let (l, r) = (primitive_positive(left), primitive_positive(right));
        stack.push((r, depth + 1));
        stack.push((l, depth + 1));
    }
    (Positivity::Positive, visited)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMethod {
    Sturm,
    Bernstein,
    /// f64 branch and bound with leafwise enclosures widened far past rounding error
    IntervalBranchBound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedBound {
    pub lo: BigRational,
    pub hi: BigRational,
    pub method: CertMethod,
    /// argument where the upper end was evaluated
    pub argmin: f64,
    /// Sturm roots found in the reduced certificate polynomial (0 when certified)
    pub roots: usize,
    pub boxes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundSummary {
    pub lo: f64,
    pub hi: f64,
    pub lo_exact: String,
    pub hi_exact: String,
    pub method: CertMethod,
    pub argmin: f64,
    pub roots: usize,
    pub boxes: usize,
}

impl CertifiedBound {
    pub fn lo_f64(&self) -> f64 {
        ratio_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        ratio_f64(&self.hi)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo_f64() + self.hi_f64())
    }

    pub fn width(&self) -> f64 {
        ratio_f64(&(&self.hi - &self.lo))
    }

    /// Whether x lies within tol of the enclosure.
    pub fn near(&self, x: f64, tol: f64) -> bool {
        x >= self.lo_f64() - tol && x <= self.hi_f64() + tol
    }

    pub fn summary(&self) -> BoundSummary {
        BoundSummary {
            lo: self.lo_f64(),
            hi: self.hi_f64(),
            lo_exact: self.lo.to_string(),
            hi_exact: self.hi.to_string(),
            method: self.method,
            argmin: self.argmin,
            roots: self.roots,
            boxes: self.boxes,
        }
    }
}

/// f_m(z) for f₀ = z(1 − z) evaluated through the 2^m endpoints.
pub fn fm_value(m: u32, z: f64) -> f64 {
    fn go(p: Point, k: u32) -> f64 {
        if k == 0 {
            p.z * p.w
        } else {
            0.5 * (go(p.t0(), k - 1) + go(p.t1(), k - 1))
        }
    }
    go(Point::new(z), m)
}

fn ratio_value(m: u32, z: f64) -> f64 {
    fm_value(m + 1, z) / fm_value(m, z)
}

/// Numerical minimizer of f_{m+1}/f_m on (0, ½]; the ratio is symmetric about ½.
fn locate_min(m: u32) -> f64 {
    let mut grid: Vec<f64> = (1..=400).map(|k| 0.5 * k as f64 / 400.0).collect();
    grid.extend((1..=300).map(|k| (-(k as f64) * 0.04).exp2() * 1e-1));
    grid.retain(|z| *z > 0.0 && *z <= 0.5);
    grid.sort_by(f64::total_cmp);
    let vals: Vec<f64> = grid.par_iter().map(|&z| ratio_value(m, z)).collect();
    let i = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let (mut a, mut b) = (if i == 0 { 0.0 } else { grid[i - 1] }, grid[(i + 1).min(grid.len() - 1)]);
    if i == grid.len() - 1 {
        return 0.5;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if ratio_value(m, c) < ratio_value(m, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let z = 0.5 * (a + b);
    if ratio_value(m, 0.5) <= ratio_value(m, z) {
        0.5
    } else {
        z
    }
}

/// Largest m handled by the exact Sturm pipeline for a_m and concavity.
pub const STURM_MAX_LEVEL: u32 = 6;
const WIDEN: f64 = 1e-9;

/// a_m = inf over (0, 1) of f_{m+1}/f_m for f₀ = z(1 − z), enclosed to `precision`.
pub fn infimum_ratio(m: u32, precision: f64) -> Result<CertifiedBound> {
    let method = if m <= STURM_MAX_LEVEL { CertMethod::Sturm } else { CertMethod::IntervalBranchBound };
    infimum_ratio_with(m, precision, method)
}

pub fn infimum_ratio_with(m: u32, precision: f64, method: CertMethod) -> Result<CertifiedBound> {
    if !(precision > 1e-12) {
        return Err(Error::Precision(format!("precision {precision} below the supported 1e-12")));
    }
    match method {
        CertMethod::IntervalBranchBound => interval_infimum(m, precision),
        _ => exact_infimum(m, precision, method),
    }
}

fn exact_infimum(m: u32, precision: f64, method: CertMethod) -> Result<CertifiedBound> {
    let fs = f_sequence(m + 1);
    let (fm, fn1) = (fs[m as usize].symmetric_reduction()?, fs[m as usize + 1].symmetric_reduction()?);
    // both vanish at v = 0; divide by v
    let a: Vec<BigInt> = fn1.num[1..].to_vec();
    let b: Vec<BigInt> = fm.num[1..].to_vec();
    let zstar = locate_min(m);
    let v = rational(4.0 * zstar * (1.0 - zstar));
    let (av, bv) = (
        BigRational::new(eval_scaled(&a, &v), fn1.den.clone()),
        BigRational::new(eval_scaled(&b, &v), fm.den.clone()),
    );
    // equal degrees are not guaranteed, so rescale by the v-denominator powers
    let da = a.len() as i32 - 1;
    let db = b.len() as i32 - 1;
    let vd = BigRational::from(v.denom().clone());
    let hi = (av / vd.pow(da)) / (bv / vd.pow(db));
    let scale = BigInt::one() << 60u32;
    let lo_target = rational(ratio_f64(&hi) - 0.5 * precision);
    let lo = BigRational::new((lo_target * BigRational::from(scale.clone())).floor().to_integer(), scale);
    // S = A·den_m·q − p·den_{m+1}·B must stay positive on [0, 1]
    let s = add_scaled(&a, &(&fm.den * lo.denom()), &b, &-(&fn1.den * lo.numer()));
    let zero = BigRational::zero();
    let one = BigRational::one();
    let positive_at_zero = s.first().is_some_and(|c| c.is_positive());
    let (roots, boxes) = match method {
        CertMethod::Sturm => (sturm_count_ints(&s, &zero, &one), 1),
        _ => match bernstein_positive(&s, 40) {
            (Positivity::Positive, n) => (0, n),
            (_, n) => (1, n),
        },
    };
    let fm_positive = sturm_count_ints(&b, &zero, &one) == 0 && b[0].is_positive();
    if roots != 0 || !positive_at_zero || !fm_positive {
        return Err(Error::Precision(format!("certificate for a_{m} failed ({roots} roots)")));
    }
    Ok(CertifiedBound { lo, hi, method, argmin: zstar, roots, boxes })
}

/// Enclosure of f_m(z)/z for z ∈ [z1, z2]: each word contributes (φ(z)/z)·(1 − φ(z)), and
/// φ(z)/z is the product of the per-step factors x (for t₁) and 1 + w (for t₀).
fn enclose_scaled(m: u32, z1: f64, z2: f64) -> (f64, f64) {
    fn go(lo: Point, hi: Point, flo: f64, fhi: f64, k: u32) -> (f64, f64) {
        if k == 0 {
            return (flo * hi.w, fhi * lo.w);
        }
        let a = go(lo.t0(), hi.t0(), flo * (1.0 + hi.w), fhi * (1.0 + lo.w), k - 1);
        let b = go(lo.t1(), hi.t1(), flo * lo.z, fhi * hi.z, k - 1);
        (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))
    }
    let (lo, hi) = go(Point::new(z1), Point::new(z2), 1.0, 1.0, m);
    (lo * (1.0 - WIDEN), hi * (1.0 + WIDEN))
}

#[derive(PartialEq)]
struct Cell {
    bound: f64,
    z1: f64,
    z2: f64,
}

impl Eq for Cell {}

impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound)
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

const MAX_CELLS: usize = 2_000_000;

fn interval_infimum(m: u32, precision: f64) -> Result<CertifiedBound> {
    let zstar = locate_min(m);
    let hi = ratio_value(m, zstar) * (1.0 + WIDEN);
    let target = hi - 0.5 * precision;
    let cell = |z1: f64, z2: f64| {
        let (num, _) = enclose_scaled(m + 1, z1, z2);
        let (_, den) = enclose_scaled(m, z1, z2);
        Cell { bound: num / den, z1, z2 }
    };
    let mut heap: BinaryHeap<Cell> = (0..64).map(|k| cell(k as f64 / 128.0, (k + 1) as f64 / 128.0)).collect();
    let mut boxes = heap.len();
    while heap.peek().is_some_and(|c| c.bound < target) {
        // split the worst cells in parallel batches
        let batch: Vec<Cell> = (0..256).map_while(|_| heap.pop().filter(|c| c.bound < target)).collect();
        let mut hit = false;
        let kids: Vec<Cell> = batch
            .par_iter()
            .flat_map_iter(|c| {
                let mid = 0.5 * (c.z1 + c.z2);
                [cell(c.z1, mid), cell(mid, c.z2)]
            })
            .collect();
        for c in &batch {
            if c.z2 - c.z1 < 1e-15 {
                hit = true;
            }
        }
        boxes += kids.len();
        heap.extend(kids);
        if hit || boxes > MAX_CELLS {
            return Err(Error::Precision(format!("a_{m}: enclosure did not close after {boxes} cells")));
        }
    }
    let lo = heap.peek().map(|c| c.bound).unwrap_or(target).min(hi);
    let scale = BigInt::one() << 60u32;
    let lo_r = BigRational::new((rational(lo.max(target)) * BigRational::from(scale.clone())).floor().to_integer(), scale);
    Ok(CertifiedBound { lo: lo_r, hi: rational(hi), method: CertMethod::IntervalBranchBound, argmin: zstar, roots: 0, boxes })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcavityCert {
    pub m: u32,
    pub concave: bool,
    pub method: CertMethod,
    /// degree of the reduced second-derivative polynomial in v = 4z(1 − z)
    pub degree: usize,
    /// distinct roots of f_m″ found in [0, 1]
    pub roots: usize,
    pub subdivisions: usize,
}

/// Decides f_m″ ≤ 0 on [0, 1] exactly. Sturm counting for m ≤ 6, Bernstein signs above.
pub fn certify_concavity_detail(m: u32) -> Result<ConcavityCert> {
    let f = f_sequence(m).pop().unwrap();
    let g = f.derivative().derivative().symmetric_reduction()?;
    let neg: Vec<BigInt> = g.num.iter().map(|c| -c).collect();
    let degree = neg.len().saturating_sub(1);
    if m <= STURM_MAX_LEVEL {
        let (zero, one) = (BigRational::zero(), BigRational::one());
        let gp = RationalPoly::from_parts(neg.clone(), BigInt::one());
        let roots = isolate_roots(&gp, &zero, &one)?;
        // −f″ must be ≥ 0 at 0 and between consecutive roots
        let mut samples = vec![zero.clone()];
        let mut prev = zero.clone();
        for (a, b) in &roots {
            samples.push((&prev + a) / BigRational::from_integer(2.into()));
            prev = b.clone();
        }
        samples.push((&prev + &one) / BigRational::from_integer(2.into()));
        samples.push(one);
        let concave = samples.iter().all(|s| sign_at(&neg, s) != Sign::Minus);
        return Ok(ConcavityCert { m, concave, method: CertMethod::Sturm, degree, roots: roots.len(), subdivisions: 0 });
    }
    let (verdict, subdivisions) = bernstein_positive(&neg, 30);
    match verdict {
        Positivity::Undecided => Err(Error::Precision(format!("concavity of f_{m} undecided"))),
        v => Ok(ConcavityCert {
            m,
            concave: v == Positivity::Positive,
            method: CertMethod::Bernstein,
            degree,
            roots: 0,
            subdivisions,
        }),
    }
}

pub fn certify_concavity(m: u32) -> Result<bool> {
    Ok(certify_concavity_detail(m)?.concave)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuBound {
    pub m: u32,
    pub lo: f64,
    pub hi: f64,
    pub a_m: BoundSummary,
    pub concavity: ConcavityCert,
}

impl MuBound {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// μ_m = −1/log₂ a_m for a suitable m.
pub fn mu_lower(m: u32, precision: f64) -> Result<MuBound> {
    let concavity = certify_concavity_detail(m)?;
    if !concavity.concave {
        return Err(Error::NotSuitable(m));
    }
    let a = infimum_ratio(m, precision)?;
    let mu = |x: f64| -1.0 / x.log2();
    Ok(MuBound { m, lo: mu(a.lo_f64()) * (1.0 - 1e-12), hi: mu(a.hi_f64()) * (1.0 + 1e-12), a_m: a.summary(), concavity })
}

/// sup over (0, 1) of f_{m+1}/f_m for the polynomial start f₀ = z(1 − z): certified to be
/// the limit value 1 at the ends by showing f_m − f_{m+1} ≥ 0 with roots only at 0 and 1.
pub fn polynomial_sup_is_one(m: u32) -> Result<bool> {
    let fs = f_sequence(m + 1);
    let diff = fs[m as usize].sub(&fs[m as usize + 1]).symmetric_reduction()?;
    let mut c = diff.num.clone();
    while c.first().is_some_and(|x| x.is_zero()) {
        c.remove(0);
    }
    if c.is_empty() {
        return Ok(true);
    }
    let (zero, one) = (BigRational::zero(), BigRational::one());
    Ok(c[0].is_positive() && sturm_count_ints(&c, &zero, &one) == 0)
}
