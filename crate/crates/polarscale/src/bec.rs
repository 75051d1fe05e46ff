//! BEC Bhattacharyya process: exact statistics of Z_n, the discretized polar
//! operator T_L with its spectrum, and the fixed-point profile q(z).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::Point;
use crate::numeric::{linear_fit, KahanSum};

pub const DEFAULT_LEVEL_CAP: u32 = 40;
/// Hard ceiling for `prob_in_interval_capped`; above this the preimage table gets too large.
pub const MAX_LEVEL: u32 = 48;
/// Levels up to here are evaluated by (pruned) enumeration of all 2^n endpoints.
pub const ENUMERATION_MAX: u32 = 26;
const TABLE_MAX: u32 = 22;
const PAR_DEPTH: u32 = 12;

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::BadInterval { a, b });
    }
    Ok(())
}

fn check_z(z: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::OutOfRange { name: "z", value: z });
    }
    Ok(())
}

#[inline]
fn inside(p: Point, a: f64, b: f64) -> bool {
    p.z >= a && p.z <= b
}

/// Smallest and largest value reachable from `p` in `k` steps (all t₁, all t₀).
fn reach(p: Point, k: u32) -> (Point, Point) {
    let (mut lo, mut hi) = (p, p);
    for _ in 0..k {
        lo = lo.t1();
        hi = hi.t0();
    }
    (lo, hi)
}

/// Number of the 2^k continuations of `p` that end in [a, b].
fn count_paths(p: Point, k: u32, a: f64, b: f64) -> u64 {
    if k == 0 {
        return inside(p, a, b) as u64;
    }
    let (lo, hi) = reach(p, k);
    if inside(lo, a, b) && inside(hi, a, b) {
        return 1 << k;
    }
    if hi.z < a || lo.z > b {
        return 0;
    }
    if k > PAR_DEPTH {
        let (x, y) = rayon::join(|| count_paths(p.t1(), k - 1, a, b), || count_paths(p.t0(), k - 1, a, b));
        x + y
    } else {
        count_paths(p.t1(), k - 1, a, b) + count_paths(p.t0(), k - 1, a, b)
    }
}

/// Sorted preimage endpoints φ_w⁻¹(a), φ_w⁻¹(b) over all words w of length n. The number
/// of words mapping x into [a, b] is #{lo ≤ x} − #{hi < x}.
#[derive(Clone, Debug)]
pub struct PreimageTable {
    pub n: u32,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn all_preimages(y: f64, n: u32) -> Vec<f64> {
    let mut cur = vec![Point::new(y)];
    for _ in 0..n {
        cur = cur.par_iter().flat_map_iter(|&p| [p.t0_inv(), p.t1_inv()]).collect();
    }
    let mut out: Vec<f64> = cur.into_iter().map(|p| p.z).collect();
    out.par_sort_unstable_by(f64::total_cmp);
    out
}

impl PreimageTable {
    pub fn new(n: u32, a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        if n > 26 {
            return Err(Error::LevelCap { n, cap: 26 });
        }
        Ok(PreimageTable { n, lo: all_preimages(a, n), hi: all_preimages(b, n) })
    }

    pub fn count(&self, x: f64) -> u64 {
        let le = self.lo.partition_point(|&v| v <= x);
        let lt = self.hi.partition_point(|&v| v < x);
        (le - lt) as u64
    }

    /// Pr(Z_n ∈ [a, b] | Z₀ = x).
    pub fn prob(&self, x: f64) -> f64 {
        self.count(x) as f64 / (self.n as f64).exp2()
    }
}

/// Forward enumeration down to depth `k` left, finishing each branch with the table.
fn count_with_table(p: Point, k: u32, a: f64, b: f64, table: &PreimageTable) -> u64 {
    let total = k + table.n;
    let (lo, hi) = reach(p, total);
    if inside(lo, a, b) && inside(hi, a, b) {
        return 1 << total;
    }
    if hi.z < a || lo.z > b {
        return 0;
    }
    if k == 0 {
        return table.count(p.z);
    }
    if k > PAR_DEPTH {
        let (x, y) = rayon::join(
            || count_with_table(p.t1(), k - 1, a, b, table),
            || count_with_table(p.t0(), k - 1, a, b, table),
        );
        x + y
    } else {
        count_with_table(p.t1(), k - 1, a, b, table) + count_with_table(p.t0(), k - 1, a, b, table)
    }
}

/// Exact count of level-n endpoints in [a, b], out of 2^n.
pub fn count_in_interval(z: f64, a: f64, b: f64, n: u32) -> Result<u64> {
    check_z(z)?;
    check_interval(a, b)?;
    if n > MAX_LEVEL {
        return Err(Error::LevelCap { n, cap: MAX_LEVEL });
    }
    if n <= ENUMERATION_MAX {
        return Ok(count_paths(Point::new(z), n, a, b));
    }
    let back = (n / 2).min(TABLE_MAX);
    let table = PreimageTable::new(back, a, b)?;
    Ok(count_with_table(Point::new(z), n - back, a, b, &table))
}

pub fn prob_in_interval(z: f64, a: f64, b: f64, n: u32) -> Result<f64> {
    prob_in_interval_capped(z, a, b, n, DEFAULT_LEVEL_CAP)
}

pub fn prob_in_interval_capped(z: f64, a: f64, b: f64, n: u32, cap: u32) -> Result<f64> {
    if n > cap.min(MAX_LEVEL) {
        return Err(Error::LevelCap { n, cap: cap.min(MAX_LEVEL) });
    }
    Ok(count_in_interval(z, a, b, n)? as f64 / (n as f64).exp2())
}

/// (n, (1/n)·log₂ Pr(Z_n ∈ [a, b] | Z₀ = z)) for each requested level.
pub fn log_prob_curve(z: f64, a: f64, b: f64, levels: &[u32]) -> Result<Vec<(u32, f64)>> {
    levels
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| Ok((n, prob_in_interval_capped(z, a, b, n, MAX_LEVEL)?.log2() / n as f64)))
        .collect()
}

/// The 2^n endpoints of Z_n in word-index order (first step is the most significant bit,
/// bit 0 = t₀, bit 1 = t₁).
pub fn leaf_values(z: f64, n: u32) -> Result<Vec<Point>> {
    check_z(z)?;
    if n > ENUMERATION_MAX {
        return Err(Error::LevelCap { n, cap: ENUMERATION_MAX });
    }
    let mut cur = vec![Point::new(z)];
    for _ in 0..n {
        cur = cur.par_iter().flat_map_iter(|&p| [p.t0(), p.t1()]).collect();
    }
    Ok(cur)
}

fn mean_of<F: Fn(f64, f64) -> f64 + Sync>(f: &F, p: Point, k: u32) -> f64 {
    if k == 0 {
        return f(p.z, p.w);
    }
    if k > PAR_DEPTH {
        let (x, y) = rayon::join(|| mean_of(f, p.t0(), k - 1), || mean_of(f, p.t1(), k - 1));
        0.5 * (x + y)
    } else {
        0.5 * (mean_of(f, p.t0(), k - 1) + mean_of(f, p.t1(), k - 1))
    }
}

/// E[f(Z_n) | Z₀ = z] over all 2^n endpoints, with `f` taking (z, 1 − z). Pairwise
/// summation down the tree, so the result does not depend on the thread count.
pub fn expectation_of_test<F: Fn(f64, f64) -> f64 + Sync>(f: F, z: f64, n: u32) -> Result<f64> {
    check_z(z)?;
    if n > DEFAULT_LEVEL_CAP {
        return Err(Error::LevelCap { n, cap: DEFAULT_LEVEL_CAP });
    }
    Ok(mean_of(&f, Point::new(z), n))
}

/// T_L with L grid points x_i = i/(L − 1); column j carries ½ at the grid images of x_j²
/// and 2x_j − x_j² (a single 1 when they coincide).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseOperator {
    pub dim: usize,
    pub cols: Vec<[(u32, f64); 2]>,
}

pub fn build_operator(l: usize) -> Result<SparseOperator> {
    if l < 10 {
        return Err(Error::TooSmall(l));
    }
    if l > u32::MAX as usize {
        return Err(Error::TooLarge(l));
    }
    let m = (l - 1) as u64;
    let cols = (0..=m)
        .map(|j| {
            let lo = (j * j / m) as u32;
            let hi = (m - (m - j) * (m - j) / m) as u32;
            if lo == hi {
                [(lo, 1.0), (hi, 0.0)]
            } else {
                [(lo, 0.5), (hi, 0.5)]
            }
        })
        .collect();
    Ok(SparseOperator { dim: l, cols })
}

impl SparseOperator {
    /// Rows of column j paired with their nonzero values.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cols[j].iter().filter(|e| e.1 != 0.0).map(|&(r, v)| (r as usize, v))
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.column(j).filter(|e| e.0 == i).map(|e| e.1).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for j in 0..self.dim {
            for (i, v) in self.column(j) {
                d[i][j] += v;
            }
        }
        d
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|j| self.column(j).map(|e| e.1).sum()).collect()
    }

    /// g ↦ gT, i.e. (gT)_j = Σ_i g_i T(i, j).
    pub fn apply_left(&self, g: &[f64]) -> Vec<f64> {
        self.cols.par_iter().map(|c| c.iter().map(|&(r, v)| v * g[r as usize]).sum()).collect()
    }

    /// v ↦ Tv.
    pub fn apply_right(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, c) in self.cols.iter().enumerate() {
            for &(r, x) in c {
                out[r as usize] += x * v[j];
            }
        }
        out
    }
}

pub const EIG_MAX_DIM: usize = 16000;
pub const EIG_TOL: f64 = 1e-6;
pub const EIG_MAX_ITER: usize = 100_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub dim: usize,
    /// The eigenvalue 1 is double: constants and x are fixed left vectors.
    pub unit_multiplicity: usize,
    /// λ₂, λ₃, … in decreasing modulus.
    pub subdominant: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl Spectrum {
    /// All eigenvalues found, starting with the double 1.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![1.0; self.unit_multiplicity];
        v.extend(&self.subdominant);
        v
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).collect::<KahanSum>().value()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
    n
}

struct Deflation {
    lambda: f64,
    left: Vec<f64>,
    right: Vec<f64>,
    scale: f64,
}

/// Power iteration on `step` restricted to the interior (the boundary entries span the
/// complement of the two unit eigenvectors), with Wielandt deflation of found pairs.
fn power<F: Fn(&[f64]) -> Vec<f64>>(
    step: F,
    dim: usize,
    found: &[Deflation],
    left_side: bool,
    seed: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let mut g: Vec<f64> = (0..dim)
        .map(|i| {
            let x = i as f64 / (dim - 1) as f64;
            x * (1.0 - x) * (1.0 + seed * x)
        })
        .collect();
    normalize(&mut g);
    let (mut prev, mut prev_delta) = (f64::NAN, f64::NAN);
    for it in 1..=EIG_MAX_ITER {
        let mut h = step(&g);
        h[0] = 0.0;
        h[dim - 1] = 0.0;
        for d in found {
            let (u, w) = if left_side { (&d.right, &d.left) } else { (&d.left, &d.right) };
            let c = d.lambda * dot(&g, u) / d.scale;
            h.iter_mut().zip(w).for_each(|(a, b)| *a -= c * b);
        }
        let lambda = dot(&h, &g);
        normalize(&mut h);
        g = h;
        let delta = (lambda - prev).abs();
        if it > 20 {
            let r = (delta / prev_delta).min(0.999);
            if delta / (1.0 - r) < EIG_TOL * 1e-2 {
                return Ok((lambda, g, it));
            }
        }
        prev = lambda;
        prev_delta = delta;
    }
    Err(Error::NoConvergence(EIG_MAX_ITER))
}

/// The double unit eigenvalue plus the next `k` eigenvalues of T_L.
pub fn subdominant_eigenvalues(l: usize, k: usize) -> Result<Spectrum> {
    if l > EIG_MAX_DIM {
        return Err(Error::TooLarge(l));
    }
    let op = build_operator(l)?;
    let mut found: Vec<Deflation> = Vec::new();
    let mut iterations = Vec::new();
    for idx in 0..k {
        let seed = 0.37 + idx as f64;
        let (lambda, left, it) = power(|g| op.apply_left(g), l, &found, true, seed)?;
        let (_, right, _) = power(|v| op.apply_right(v), l, &found, false, seed)?;
        let scale = dot(&left, &right);
        if scale.abs() < 1e-12 {
            return Err(Error::NoConvergence(it));
        }
        iterations.push(it);
        found.push(Deflation { lambda, left, right, scale });
    }
    Ok(Spectrum { dim: l, unit_multiplicity: 2, subdominant: found.iter().map(|d| d.lambda).collect(), iterations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QStart {
    /// indicator of [¼, ¾]
    Indicator,
    /// 4z(1 − z)
    Parabola,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QProfile {
    /// number of grid intervals; z_i = i / intervals
    pub intervals: usize,
    pub q: Vec<f64>,
    /// 1/μ = 1 − log₂ q̂(½)
    pub rate: f64,
    pub qhat_half: f64,
    pub iterations: usize,
    pub last_change: f64,
}

impl QProfile {
    pub fn mu(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn z(&self, i: usize) -> f64 {
        i as f64 / self.intervals as f64
    }

    /// Piecewise-linear value at any z ∈ [0, 1].
    pub fn eval(&self, z: f64) -> f64 {
        let x = z.clamp(0.0, 1.0) * self.intervals as f64;
        let i = (x.floor() as usize).min(self.intervals - 1);
        let t = x - i as f64;
        self.q[i] * (1.0 - t) + self.q[i + 1] * t
    }
}

pub const Q_MAX_ITER: usize = 10_000;

/// Fixed point of q ↦ (q(z²) + q(1 − (1 − z)²)) / q̂(½). `grid` is rounded up to an even
/// number of intervals so that ½ is a grid node.
pub fn iterate_q(grid: usize, tol: f64, start: QStart) -> Result<QProfile> {
    if grid < 10_000 {
        return Err(Error::TooSmall(grid));
    }
    let m = grid + grid % 2;
    let mu = m as u64;
    // interpolation node and weight for x_i² and 1 − (1 − x_i)², exact in integers
    let taps: Vec<[(u32, f64); 2]> = (0..=mu)
        .into_par_iter()
        .map(|i| {
            let s = i * i;
            let c = (mu - i) * (mu - i);
            let (a, fa) = (s / mu, (s % mu) as f64 / m as f64);
            let (b, fb) = if c.is_multiple_of(mu) { (mu - c / mu, 0.0) } else { (mu - c / mu - 1, 1.0 - (c % mu) as f64 / m as f64) };
            [(a as u32, fa), (b as u32, fb)]
        })
        .collect();
    let mut q: Vec<f64> = (0..=m)
        .map(|i| {
            let z = i as f64 / m as f64;
            match start {
                QStart::Indicator => ((0.25..=0.75).contains(&z) as u8) as f64,
                QStart::Parabola => 4.0 * z * (1.0 - z),
            }
        })
        .collect();
    let interp = |q: &[f64], (k, t): (u32, f64)| {
        let k = k as usize;
        if t == 0.0 {
            q[k]
        } else {
            q[k] * (1.0 - t) + q[k + 1] * t
        }
    };
    for it in 1..=Q_MAX_ITER {
        let hat: Vec<f64> = taps.par_iter().map(|t| interp(&q, t[0]) + interp(&q, t[1])).collect();
        let half = hat[m / 2];
        if half <= 0.0 {
            return Err(Error::DegenerateFit("q̂(½) vanished".into()));
        }
        let next: Vec<f64> = hat.par_iter().map(|v| v / half).collect();
        let change = next.par_iter().zip(&q).map(|(a, b)| (a - b).abs()).reduce(|| 0.0, f64::max);
        q = next;
        if change <= tol {
            return Ok(QProfile { intervals: m, q, rate: 1.0 - half.log2(), qhat_half: half, iterations: it, last_change: change });
        }
    }
    Err(Error::NoConvergence(Q_MAX_ITER))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CFit {
    pub a: f64,
    pub b: f64,
    pub n: u32,
    pub c: f64,
    /// root-mean-square of 2^{n/μ}p_n − c·q over the sample points
    pub rms_residual: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

/// Least-squares c with 2^{n/μ}·p_n(z, a, b) ≈ c·q(z) over z = k/200.
pub fn fit_c_ab(profile: &QProfile, a: f64, b: f64, n: u32) -> Result<CFit> {
    check_interval(a, b)?;
    let table = PreimageTable::new(n, a, b)?;
    let scale = (n as f64 * profile.rate).exp2();
    let samples: Vec<(f64, f64, f64)> = (1..200)
        .map(|k| {
            let z = k as f64 / 200.0;
            (z, scale * table.prob(z), profile.eval(z))
        })
        .collect();
    let sqq: f64 = samples.iter().map(|s| s.2 * s.2).sum();
    if sqq <= 0.0 {
        return Err(Error::DegenerateFit("q vanishes on the sample".into()));
    }
    let c = samples.iter().map(|s| s.1 * s.2).sum::<f64>() / sqq;
    let rms = (samples.iter().map(|s| (s.1 - c * s.2).powi(2)).sum::<f64>() / samples.len() as f64).sqrt();
    Ok(CFit { a, b, n, c, rms_residual: rms, samples })
}

/// Slope of log₂ Pr against n over the given levels, an estimate of −1/μ.
pub fn decay_slope(curve: &[(u32, f64)]) -> Option<f64> {
    let x: Vec<f64> = curve.iter().map(|c| c.0 as f64).collect();
    let y: Vec<f64> = curve.iter().map(|c| c.1 * c.0 as f64).collect();
    linear_fit(&x, &y).map(|f| f.0)
}
