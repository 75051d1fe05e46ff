//! Certified suprema for test functions g(z) = P(z)·z^α(1 − z)^β with P(z) = az² + bz + c:
//! the BEC ratios b_m = sup f_{m+1}/f_m and the universal constant L_g, plus the empirical
//! decay check they imply for an arbitrary channel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bec;
use crate::channel::BmsChannel;
use crate::construction::for_each_subchannel;
use crate::error::{Error, Result};
use crate::maps::Point;
use crate::numeric::{Interval, KahanSum};

/// Largest m accepted by [`sup_ratio_bec`]; each enclosure walks 2^{m+1} words.
pub const MAX_LEVEL: u32 = 12;
const WIDEN: f64 = 1e-9;
const MAX_CELLS: usize = 4_000_000;
const BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl TestFunction {
    pub fn new(a: f64, b: f64, c: f64, alpha: f64, beta: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(a) || !ok(b) || !(c > 0.0 && c.is_finite()) {
            return Err(Error::Constraint(format!("need a, b ≥ 0 and c > 0, got ({a}, {b}, {c})")));
        }
        if !(alpha > 0.0 && alpha <= 4.0) || !(beta > 0.0 && beta <= 4.0) {
            return Err(Error::Constraint(format!("exponents must lie in (0, 4], got ({alpha}, {beta})")));
        }
        Ok(TestFunction { a, b, c, alpha, beta })
    }

    /// (z(1 − z))^d
    pub fn power(d: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 1.0, d, d)
    }

    /// (az² + bz + c)(z(1 − z))^d
    pub fn poly(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(a, b, c, d, d)
    }

    /// z^α(1 − z)^β
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 1.0, alpha, beta)
    }

    /// (8z² + 5z + 19)(z(1 − z))^{3/4}/20, the function behind the channel-independent rate.
    pub fn universal() -> Self {
        TestFunction { a: 0.4, b: 0.25, c: 0.95, alpha: 0.75, beta: 0.75 }
    }

    #[inline]
    pub fn prefactor(&self, z: f64) -> f64 {
        (self.a * z + self.b) * z + self.c
    }

    /// P is increasing on [0, ∞) because a, b ≥ 0.
    pub fn prefactor_range(&self, z: Interval) -> Interval {
        Interval { lo: self.prefactor(z.lo), hi: self.prefactor(z.hi) }
    }

    #[inline]
    pub fn eval_point(&self, p: Point) -> f64 {
        self.prefactor(p.z) * p.z.powf(self.alpha) * p.w.powf(self.beta)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.eval_point(Point::new(z))
    }

    /// Certified enclosure of max g on [0, 1].
    pub fn sup(&self) -> Result<SupEnclosure> {
        let upper = |c: &Span| {
            let z = Interval::new(c.z1, c.z2);
            (self.prefactor_range(z) * z.powf(self.alpha) * z.complement().powf(self.beta)).widen(WIDEN).hi
        };
        let point = |c: &Span| self.eval(c.mid());
        let (lo, hi, best, cells) = branch_and_bound(Span::unit(128), upper, point, Span::bisect, 1e-8, "sup g")?;
        Ok(SupEnclosure { lo, hi, argmax: best.mid(), argmax_t: None, cells, resolution: best.width() })
    }
}

fn parse_num(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a number: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?);
            if q == 0.0 {
                return Err(bad());
            }
            Ok(p / q)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `pow:d`, `poly:a,b,c;d=x`, `beta:α,β` or `univ`; numbers may be written p/q.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "univ" {
            return Ok(Self::universal());
        }
        let (kind, rest) = s.split_once(':').ok_or_else(|| Error::Parse(format!("test function {s:?} has no kind prefix")))?;
        match kind {
            "pow" => Self::power(parse_num(rest)?),
            "beta" => {
                let (a, b) = rest.split_once(',').ok_or_else(|| Error::Parse(format!("beta needs two exponents: {rest:?}")))?;
                Self::beta(parse_num(a)?, parse_num(b)?)
            }
            "poly" => {
                let (co, d) = rest.split_once(";d=").ok_or_else(|| Error::Parse(format!("poly needs ';d=': {rest:?}")))?;
                let v = co.split(',').map(parse_num).collect::<Result<Vec<_>>>()?;
                let [a, b, c] = v[..] else {
                    return Err(Error::Parse(format!("poly needs three coefficients: {co:?}")));
                };
                Self::poly(a, b, c, parse_num(d)?)
            }
            _ => Err(Error::Parse(format!("unknown test function kind {kind:?}"))),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let plain = self.a == 0.0 && self.b == 0.0 && self.c == 1.0;
        match (plain, self.alpha == self.beta) {
            (true, true) => write!(f, "pow:{}", self.alpha),
            (true, false) => write!(f, "beta:{},{}", self.alpha, self.beta),
            (false, true) => write!(f, "poly:{},{},{};d={}", self.a, self.b, self.c, self.alpha),
            (false, false) => write!(f, "poly:{},{},{};alpha={},beta={}", self.a, self.b, self.c, self.alpha, self.beta),
        }
    }
}

/// Enclosure [lo, hi] of a supremum. `lo` is attained at a sampled point, `hi` bounds every
/// remaining branch-and-bound cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupEnclosure {
    pub lo: f64,
    pub hi: f64,
    pub argmax: f64,
    /// position along the y-interval (0 at z√(2 − z²), 1 at z(2 − z)) for L_g
    pub argmax_t: Option<f64>,
    pub cells: usize,
    /// width of the cell holding the best sample
    pub resolution: f64,
}

impl SupEnclosure {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn log2_mid(&self) -> f64 {
        self.mid().log2()
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Span {
    z1: f64,
    z2: f64,
}

impl Span {
    fn unit(k: usize) -> Vec<Span> {
        (0..k).map(|i| Span { z1: i as f64 / k as f64, z2: (i + 1) as f64 / k as f64 }).collect()
    }

    fn mid(&self) -> f64 {
        0.5 * (self.z1 + self.z2)
    }

    fn width(&self) -> f64 {
        self.z2 - self.z1
    }

    fn bisect(&self) -> Option<[Span; 2]> {
        let m = self.mid();
        (self.width() > 1e-14).then_some([Span { z1: self.z1, z2: m }, Span { z1: m, z2: self.z2 }])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Cell2 {
    z1: f64,
    z2: f64,
    t1: f64,
    t2: f64,
}

impl Cell2 {
    fn bisect(&self) -> Option<[Cell2; 2]> {
        let (dz, dt) = (self.z2 - self.z1, self.t2 - self.t1);
        if dz.max(dt) < 1e-13 {
            return None;
        }
        Some(if dz >= dt {
            let m = 0.5 * (self.z1 + self.z2);
            [Cell2 { z2: m, ..*self }, Cell2 { z1: m, ..*self }]
        } else {
            let m = 0.5 * (self.t1 + self.t2);
            [Cell2 { t2: m, ..*self }, Cell2 { t1: m, ..*self }]
        })
    }
}

struct Node<R> {
    bound: f64,
    region: R,
}

impl<R> PartialEq for Node<R> {
    fn eq(&self, o: &Self) -> bool {
        self.bound == o.bound
    }
}

impl<R> Eq for Node<R> {}

impl<R> PartialOrd for Node<R> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<R> Ord for Node<R> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.bound.total_cmp(&o.bound)
    }
}

/// Best-first maximization. Returns (best sample, max remaining upper bound, region of the
/// best sample, cells visited).
fn branch_and_bound<R, B, P, S>(init: Vec<R>, upper: B, point: P, split: S, precision: f64, what: &str) -> Result<(f64, f64, R, usize)>
where
    R: Copy + Send + Sync,
    B: Fn(&R) -> f64 + Sync,
    P: Fn(&R) -> f64 + Sync,
    S: Fn(&R) -> Option<[R; 2]> + Sync,
{
    if !(precision > 0.0) {
        return Err(Error::Precision(format!("{what}: precision must be positive")));
    }
    let score = |r: &R| (upper(r), point(r));
    let mut best = (f64::NEG_INFINITY, init[0]);
    let mut heap = BinaryHeap::new();
    let mut cells = 0;
    let push = |heap: &mut BinaryHeap<Node<R>>, best: &mut (f64, R), scored: Vec<(R, (f64, f64))>| {
        for (r, (u, v)) in scored {
            if v > best.0 {
                *best = (v, r);
            }
            heap.push(Node { bound: u, region: r });
        }
    };
    let first: Vec<(R, (f64, f64))> = init.par_iter().map(|r| (*r, score(r))).collect();
    cells += first.len();
    push(&mut heap, &mut best, first);
    loop {
        let top = heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
        if top <= best.0 + precision {
            return Ok((best.0, top.max(best.0), best.1, cells));
        }
        let batch: Vec<R> = (0..BATCH)
            .map_while(|_| match heap.peek() {
                Some(n) if n.bound > best.0 + precision => heap.pop().map(|n| n.region),
                _ => None,
            })
            .collect();
        let kids: Option<Vec<[R; 2]>> = batch.iter().map(&split).collect();
        let kids = kids.ok_or_else(|| Error::Precision(format!("{what}: cells shrank to rounding level before closing")))?;
        let scored: Vec<(R, (f64, f64))> = kids.par_iter().flat_map_iter(|k| k.iter().map(|r| (*r, score(r)))).collect();
        cells += scored.len();
        push(&mut heap, &mut best, scored);
        if cells > MAX_CELLS {
            return Err(Error::Precision(format!("{what}: no closure within {MAX_CELLS} cells")));
        }
    }
}

/// f_m(z)/(z^α(1 − z)^β) enclosed over [z1, z2]. Along each word the ratios φ(z)/z and
/// (1 − φ(z))/(1 − z) are products of per-step factors, monotone in z.
fn scaled_fm(g: &TestFunction, m: u32, z1: f64, z2: f64) -> Interval {
    fn go(g: &TestFunction, lo: Point, hi: Point, zf: Interval, wf: Interval, k: u32) -> Interval {
        if k == 0 {
            return g.prefactor_range(Interval::hull(lo.z, hi.z)) * zf.powf(g.alpha) * wf.powf(g.beta);
        }
        let a = go(g, lo.t0(), hi.t0(), zf * Interval::hull(1.0 + hi.w, 1.0 + lo.w), wf * Interval::hull(hi.w, lo.w), k - 1);
        let b = go(g, lo.t1(), hi.t1(), zf * Interval::hull(lo.z, hi.z), wf * Interval::hull(1.0 + lo.z, 1.0 + hi.z), k - 1);
        (a + b).scale(0.5)
    }
    go(g, Point::new(z1), Point::new(z2), Interval::point(1.0), Interval::point(1.0), m).widen(WIDEN)
}

/// f_m(z) by direct evaluation of the 2^m leaves.
pub fn fm_value(g: &TestFunction, m: u32, z: f64) -> f64 {
    fn go(g: &TestFunction, p: Point, k: u32) -> f64 {
        if k == 0 {
            g.eval_point(p)
        } else {
            0.5 * (go(g, p.t0(), k - 1) + go(g, p.t1(), k - 1))
        }
    }
    go(g, Point::new(z), m)
}

/// b_m = sup over (0, 1) of f_{m+1}/f_m with f₀ = g.
pub fn sup_ratio_bec(g: &TestFunction, m: u32, precision: f64) -> Result<SupEnclosure> {
    if m > MAX_LEVEL {
        return Err(Error::LevelCap { n: m, cap: MAX_LEVEL });
    }
    let upper = |c: &Span| scaled_fm(g, m + 1, c.z1, c.z2).hi / scaled_fm(g, m, c.z1, c.z2).lo;
    let point = |c: &Span| fm_value(g, m + 1, c.mid()) / fm_value(g, m, c.mid());
    let (lo, hi, best, cells) = branch_and_bound(Span::unit(128), upper, point, Span::bisect, precision, "b_m")?;
    Ok(SupEnclosure { lo, hi, argmax: best.mid(), argmax_t: None, cells, resolution: best.width() })
}

/// b₀ for z^α(1 − z)^β from the one-variable form sup [z^α(1+z)^β + (2−z)^α(1−z)^β]/2,
/// by grid plus golden-section refinement (not certified; a cross-check for [`sup_ratio_bec`]).
pub fn b0_closed_form(alpha: f64, beta: f64) -> f64 {
    let f = |z: f64| 0.5 * (z.powf(alpha) * (1.0 + z).powf(beta) + (2.0 - z).powf(alpha) * (1.0 - z).powf(beta));
    let n: usize = 20_000;
    let k = (0..=n).max_by(|&i, &j| f(i as f64 / n as f64).total_cmp(&f(j as f64 / n as f64))).unwrap();
    let (mut a, mut b) = ((k.saturating_sub(1)) as f64 / n as f64, ((k + 1).min(n)) as f64 / n as f64);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b)).max(f(k as f64 / n as f64))
}

/// Ratio (g(z²) + g(y))/(2g(z)) with y = z·[(1 − t)√(2 − z²) + t(2 − z)], written through
/// y/z and (1 − y)/(1 − z) so that the powers of z and 1 − z cancel.
fn lg_point(g: &TestFunction, z: f64, t: f64) -> f64 {
    let w = 1.0 - z;
    let pz = g.prefactor(z);
    let first = g.prefactor(z * z) / pz * z.powf(g.alpha) * (1.0 + z).powf(g.beta);
    let s = (1.0 + w * (1.0 + z)).sqrt();
    let yz = (1.0 - t) * s + t * (1.0 + w);
    let yw = (1.0 - t) * w * (1.0 + z) * (1.0 + z) / (1.0 + z * s) + t * w;
    let second = g.prefactor((z * yz).min(1.0)) / pz * yz.powf(g.alpha) * yw.powf(g.beta);
    0.5 * (first + second)
}

fn lg_upper(g: &TestFunction, c: &Cell2) -> f64 {
    let one = Interval::point(1.0);
    let z = Interval::new(c.z1, c.z2);
    let w = z.complement();
    let t = Interval::new(c.t1, c.t2);
    let u = t.complement();
    let pz = g.prefactor_range(z);
    let first = g.prefactor_range(z * z) / pz * z.powf(g.alpha) * (one + z).powf(g.beta);
    let s = (one + w * (one + z)).sqrt();
    let yz = u * s + t * (one + w);
    let yw = u * (w * (one + z) * (one + z) / (one + z * s)) + t * w;
    let second = g.prefactor_range((z * yz).clamp_unit()) / pz * yz.powf(g.alpha) * yw.powf(g.beta);
    (first + second).scale(0.5).widen(WIDEN).hi
}

/// L_g: sup of (g(z²) + g(y))/(2g(z)) over z ∈ (0, 1), y ∈ [z√(2 − z²), z(2 − z)].
pub fn compute_lg(g: &TestFunction, precision: f64) -> Result<SupEnclosure> {
    let init: Vec<Cell2> = Span::unit(64).into_iter().map(|s| Cell2 { z1: s.z1, z2: s.z2, t1: 0.0, t2: 1.0 }).collect();
    let upper = |c: &Cell2| lg_upper(g, c);
    let point = |c: &Cell2| lg_point(g, 0.5 * (c.z1 + c.z2), 0.5 * (c.t1 + c.t2));
    let (lo, hi, best, cells) = branch_and_bound(init, upper, point, Cell2::bisect, precision, "L_g")?;
    Ok(SupEnclosure {
        lo,
        hi,
        argmax: 0.5 * (best.z1 + best.z2),
        argmax_t: Some(0.5 * (best.t1 + best.t2)),
        cells,
        resolution: (best.z2 - best.z1).max(best.t2 - best.t1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: u32,
    pub expectation: f64,
    pub bound: f64,
    /// mean quantization entropy added along the paths of level n (0 for the exact BEC)
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub g: String,
    pub lg: f64,
    /// constant c in E[g(Z_n)] ≤ c·L_g^n
    pub scale: f64,
    /// output-alphabet cap used by density evolution, None for the exact BEC path
    pub support: Option<usize>,
    pub rows: Vec<DecayRow>,
    pub violations: usize,
}

/// Checks E[g(Z_n)] ≤ c·L_g^n for n = 0…n_max, with c = sup g unless given. BEC
/// expectations are exact; other channels go through density evolution with `support`
/// output points.
pub fn verify_universal_decay(w: &BmsChannel, g: &TestFunction, lg: f64, scale: Option<f64>, n_max: u32, support: usize) -> Result<DecayReport> {
    let scale = match scale {
        Some(c) => c,
        None => g.sup()?.hi,
    };
    let (means, slack, support) = match w {
        BmsChannel::Bec(z) => {
            let means = (0..=n_max)
                .map(|n| bec::expectation_of_test(|z, w| g.eval_point(Point { z, w }), *z, n))
                .collect::<Result<Vec<_>>>()?;
            (means, vec![0.0; n_max as usize + 1], None)
        }
        _ => {
            let mut sums: Vec<(KahanSum, KahanSum)> = (0..=n_max).map(|_| (KahanSum::new(), KahanSum::new())).collect();
            for_each_subchannel(w, n_max, support, |n, r| {
                let s = &mut sums[n as usize];
                s.0.add(g.eval(r.z));
                s.1.add(r.delta_h);
            })?;
            let size = |n: usize| (1u64 << n) as f64;
            let means = sums.iter().enumerate().map(|(n, s)| s.0.value() / size(n)).collect();
            let slack = sums.iter().enumerate().map(|(n, s)| s.1.value() / size(n)).collect();
            (means, slack, Some(support))
        }
    };
    let rows: Vec<DecayRow> = (0..=n_max)
        .map(|n| {
            let (e, s) = (means[n as usize], slack[n as usize]);
            let bound = scale * lg.powi(n as i32);
            DecayRow { n, expectation: e, bound, slack: s, holds: e <= bound * (1.0 + 1e-12) + s }
        })
        .collect();
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(DecayReport { g: g.to_string(), lg, scale, support, rows, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_roundtrip() {
        let g: TestFunction = "poly:0.4,0.25,0.95;d=3/4".parse().unwrap();
        assert_eq!(g, TestFunction::universal());
        let p: TestFunction = "pow:2/3".parse().unwrap();
        assert!((p.alpha - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(p.to_string().parse::<TestFunction>().unwrap(), p);
        assert!("beta:0.5".parse::<TestFunction>().is_err());
        assert!("pow:-1".parse::<TestFunction>().is_err());
        assert!("poly:1,2;d=1/2".parse::<TestFunction>().is_err());
    }

    #[test]
    fn quadratic_ratio_is_one() {
        // f₀ = z(1 − z): the ratio tends to 1 at the ends, so b_m = 1
        let g = TestFunction::power(1.0).unwrap();
        for m in [0, 3] {
            let b = sup_ratio_bec(&g, m, 1e-6).unwrap();
            assert!(b.contains(1.0, 1e-6), "{b:?}");
        }
    }

    #[test]
    fn b0_agrees_with_closed_form() {
        for (a, b) in [(2.0 / 3.0, 2.0 / 3.0), (0.5, 0.8), (0.7, 0.6)] {
            let g = TestFunction::beta(a, b).unwrap();
            let e = sup_ratio_bec(&g, 0, 1e-7).unwrap();
            assert!(e.contains(b0_closed_form(a, b), 1e-7), "{a} {b}: {e:?}");
        }
        let e = sup_ratio_bec(&TestFunction::power(2.0 / 3.0).unwrap(), 0, 1e-6).unwrap();
        assert!((e.mid() - 0.8312).abs() < 1e-3);
    }

    #[test]
    fn enclosure_contains_samples() {
        let g = TestFunction::universal();
        for m in [0, 2, 5] {
            for k in 0..40 {
                let (z1, z2) = (k as f64 / 40.0, (k + 1) as f64 / 40.0);
                let e = scaled_fm(&g, m, z1, z2);
                for j in 0..=8 {
                    let z = z1 + (z2 - z1) * j as f64 / 8.0;
                    if z > 0.0 && z < 1.0 {
                        let v = fm_value(&g, m, z) / (z.powf(0.75) * (1.0 - z).powf(0.75));
                        assert!(v >= e.lo && v <= e.hi, "m={m} z={z}");
                    }
                }
            }
        }
    }

    #[test]
    fn lg_point_endpoints_match_direct_formula() {
        let g = TestFunction::universal();
        for &z in &[0.05, 0.3, 0.7, 0.95] {
            let direct = |y: f64| (g.eval(z * z) + g.eval(y)) / (2.0 * g.eval(z));
            assert!((lg_point(&g, z, 1.0) - direct(z * (2.0 - z))).abs() < 1e-12);
            assert!((lg_point(&g, z, 0.0) - direct(z * (2.0 - z * z).sqrt())).abs() < 1e-12);
            let c = Cell2 { z1: z - 0.01, z2: z + 0.01, t1: 0.2, t2: 0.6 };
            assert!(lg_upper(&g, &c) >= lg_point(&g, z, 0.4));
        }
    }

    #[test]
    fn lg_dominates_bec_ratio() {
        let g = TestFunction::power(0.75).unwrap();
        let l = compute_lg(&g, 1e-5).unwrap();
        let b = sup_ratio_bec(&g, 0, 1e-5).unwrap();
        assert!(l.hi >= b.lo - 1e-5);
        assert!(l.width() <= 1e-5);
    }

    #[test]
    fn decay_holds_on_bec() {
        let g = TestFunction::universal();
        let w = BmsChannel::Bec(0.5);
        let r = verify_universal_decay(&w, &g, 2f64.powf(-0.2), None, 10, 0).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.rows[0].expectation, g.eval(0.5));
    }
}
