//! Random compositions of t₀(z) = 2z − z² and t₁(z) = z², their inverses,
//! threshold points and the ergodic interval-length exponent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// A point of [0, 1] stored together with its complement so that both ends keep
/// full relative precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub z: f64,
    pub w: f64,
}

impl Point {
    pub fn new(z: f64) -> Self {
        Point { z, w: 1.0 - z }
    }

    /// Keeps the smaller coordinate as computed and rebuilds the larger one from it.
    #[inline]
    fn settle(z: f64, w: f64) -> Self {
        if z <= w {
            Point { z, w: 1.0 - z }
        } else {
            Point { z: 1.0 - w, w }
        }
    }

    /// t₀(z) = 1 − (1 − z)²
    #[inline]
    pub fn t0(self) -> Self {
        Point::settle(self.z * (1.0 + self.w), self.w * self.w)
    }

    /// t₁(z) = z²
    #[inline]
    pub fn t1(self) -> Self {
        Point::settle(self.z * self.z, self.w * (1.0 + self.z))
    }

    #[inline]
    pub fn apply(self, bit: u8) -> Self {
        if bit == 0 {
            self.t0()
        } else {
            self.t1()
        }
    }

    /// t₀⁻¹(y) = 1 − √(1 − y)
    #[inline]
    pub fn t0_inv(self) -> Self {
        let s = self.w.sqrt();
        Point::settle(self.z / (1.0 + s), s)
    }

    /// t₁⁻¹(y) = √y
    #[inline]
    pub fn t1_inv(self) -> Self {
        let s = self.z.sqrt();
        Point::settle(s, self.w / (1.0 + s))
    }

    #[inline]
    pub fn apply_inv(self, bit: u8) -> Self {
        if bit == 0 {
            self.t0_inv()
        } else {
            self.t1_inv()
        }
    }

    /// Order comparison using whichever representation is more accurate.
    #[inline]
    pub fn le(self, other: Point) -> bool {
        if self.z <= 0.5 || other.z <= 0.5 {
            self.z <= other.z
        } else {
            self.w >= other.w
        }
    }

    /// `other − self` for `self ≤ other`.
    #[inline]
    pub fn gap_to(self, other: Point) -> f64 {
        if self.z <= 0.5 {
            other.z - self.z
        } else {
            self.w - other.w
        }
    }
}

/// Bit sequence (b₁, …, b_n); the composition applies t_{b₁} first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapWord(pub Vec<u8>);

impl MapWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The word whose bits are the binary digits of `index`, most significant first.
    pub fn from_index(index: u64, n: u32) -> Self {
        MapWord((0..n).rev().map(|k| ((index >> k) & 1) as u8).collect())
    }

    pub fn random(rng: &mut impl Rng, n: usize) -> Self {
        MapWord((0..n).map(|_| rng.random::<bool>() as u8).collect())
    }
}

pub fn apply_word_point(w: &MapWord, z: Point) -> Point {
    w.0.iter().fold(z, |p, &b| p.apply(b))
}

pub fn apply_word(w: &MapWord, z: f64) -> f64 {
    apply_word_point(w, Point::new(z)).z
}

pub fn preimage_point(w: &MapWord, y: Point) -> Point {
    w.0.iter().rev().fold(y, |p, &b| p.apply_inv(b))
}

/// φ⁻¹ applied to both ends of [a, b].
pub fn preimage_interval(w: &MapWord, a: f64, b: f64) -> (f64, f64) {
    (preimage_point(w, Point::new(a)).z, preimage_point(w, Point::new(b)).z)
}

/// Reproducible Bernoulli(½) source: sample `i` of run `seed` is its own ChaCha stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub z: f64,
    /// Width of the region where φ stays within `tol` of neither 0 nor 1.
    pub window: f64,
}

/// Locates the crossing φ(z) = ½ for a random word of length `n`.
pub fn threshold_point(rs: RngStream, n: usize, tol: f64) -> Result<ThresholdPoint> {
    let word = MapWord::random(&mut rs.rng(), n);
    threshold_of_word(&word, tol)
}

pub fn threshold_of_word(word: &MapWord, tol: f64) -> Result<ThresholdPoint> {
    let lo = preimage_point(word, Point::new(tol));
    let hi = preimage_point(word, Point::new(1.0 - tol));
    let window = lo.gap_to(hi);
    if window > tol {
        return Err(Error::NotPolarized(word.len()));
    }
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if apply_word_point(word, Point::new(mid)).z < 0.5 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(ThresholdPoint { z: 0.5 * (a + b), window })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSample {
    pub n: usize,
    pub tol: f64,
    /// threshold points of the polarized words, in sample order
    pub points: Vec<f64>,
    pub not_polarized: usize,
    /// Kolmogorov–Smirnov distance of `points` from U[0, 1]
    pub ks: f64,
}

/// sup_x |F_n(x) − x| for the empirical distribution of `xs` ⊂ [0, 1].
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

pub fn threshold_sample(n: usize, samples: usize, tol: f64, seed: u64) -> Result<ThresholdSample> {
    if samples == 0 {
        return Err(Error::TooSmall(0));
    }
    let found: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| match threshold_point(RngStream::new(seed, i), n, tol) {
            Ok(t) => Ok(Some(t.z)),
            Err(Error::NotPolarized(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let points: Vec<f64> = found.iter().flatten().copied().collect();
    let ks = ks_uniform(&points);
    Ok(ThresholdSample { n, tol, not_polarized: samples - points.len(), points, ks })
}

/// log₂ of the preimage length of [a, b] after each inverse step, using the exact
/// difference quotients √b − √a = (b − a)/(√a + √b) so that no cancellation occurs.
fn log_lengths(word: &MapWord, a: f64, b: f64) -> Vec<f64> {
    let (mut pa, mut pb) = (Point::new(a), Point::new(b));
    let mut log_len = (b - a).log2();
    let mut out = Vec::with_capacity(word.len());
    for &bit in word.0.iter().rev() {
        let denom = if bit == 1 { pa.z.sqrt() + pb.z.sqrt() } else { pa.w.sqrt() + pb.w.sqrt() };
        log_len -= denom.log2();
        pa = pa.apply_inv(bit);
        pb = pb.apply_inv(bit);
        out.push(log_len);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLength {
    pub n: usize,
    pub samples: usize,
    /// Mean of (1/n)·log₂(φ⁻¹(b) − φ⁻¹(a)).
    pub mean: f64,
    pub stderr: f64,
    /// Mean per-step increment of log₂ length between depths n/2 and n; free of the
    /// O(1) start-up transient that biases `mean` at finite n.
    pub slope: f64,
    pub slope_stderr: f64,
    /// Mean of (1/n)·log₂ E[length] minus `mean`; never negative (Jensen).
    pub jensen_gap: f64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

pub fn estimate_log_length(n: usize, samples: usize, a: f64, b: f64, seed: u64) -> Result<LogLength> {
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::BadInterval { a, b });
    }
    if n < 2 || samples < 2 {
        return Err(Error::TooSmall(n.min(samples)));
    }
    let half = n / 2;
    let per: Vec<(f64, f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let word = MapWord::random(&mut RngStream::new(seed, i).rng(), n);
            let ll = log_lengths(&word, a, b);
            let last = ll[n - 1];
            (last / n as f64, (last - ll[half - 1]) / (n - half) as f64, last)
        })
        .collect();
    let means: Vec<f64> = per.iter().map(|p| p.0).collect();
    let slopes: Vec<f64> = per.iter().map(|p| p.1).collect();
    let (mean, stderr) = mean_stderr(&means);
    let (slope, slope_stderr) = mean_stderr(&slopes);
    // log-sum-exp for log₂ of the mean length
    let peak = per.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = per.iter().map(|p| (p.2 - peak).exp2()).collect::<KahanSum>().value();
    let log_mean_len = peak + (s / samples as f64).log2();
    Ok(LogLength { n, samples, mean, stderr, slope, slope_stderr, jensen_gap: log_mean_len / n as f64 - mean })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicConstant {
    /// 1/(2 ln 2) − 1
    pub value: f64,
    /// ½∫₀¹ log₂ (d/dx √x) dx by quadrature
    pub term_sqrt: f64,
    /// ½∫₀¹ log₂ (d/dx (1 − √(1 − x))) dx by quadrature
    pub term_complement: f64,
}

impl ErgodicConstant {
    pub fn quadrature_sum(&self) -> f64 {
        self.term_sqrt + self.term_complement
    }
}

/// Tanh-sinh quadrature over [0, 1]; `f` receives (x, 1 − x) so endpoint singularities
/// can be evaluated without cancellation.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, h: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut acc = KahanSum::new();
    let kmax = (4.5 / h).ceil() as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let e = (2.0 * u).exp();
        // x = (1 + tanh u)/2 = e/(1+e), 1 − x = 1/(1+e)
        let (x, cx) = if u > 0.0 { (1.0 / (1.0 + 1.0 / e), 1.0 / (1.0 + e)) } else { (e / (1.0 + e), 1.0 / (1.0 + e)) };
        if x <= 0.0 || cx <= 0.0 {
            continue;
        }
        let cosh_u = u.cosh();
        let w = 0.5 * half_pi * t.cosh() / (cosh_u * cosh_u);
        acc.add(h * w * f(x, cx));
    }
    acc.value()
}

pub fn ergodic_closed_form() -> ErgodicConstant {
    let value = 1.0 / (2.0 * std::f64::consts::LN_2) - 1.0;
    // d/dx √x = 1/(2√x); d/dx (1 − √(1−x)) = 1/(2√(1−x))
    let term_sqrt = 0.5 * tanh_sinh(|x, _| -1.0 - 0.5 * x.log2(), 1.0 / 64.0);
    let term_complement = 0.5 * tanh_sinh(|_, cx| -1.0 - 0.5 * cx.log2(), 1.0 / 64.0);
    ErgodicConstant { value, term_sqrt, term_complement }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralDecay {
    pub n: usize,
    /// E[φ⁻¹(b) − φ⁻¹(a)] = ∫₀¹ Pr(Z_n ∈ [a, b]) dz
    pub expectation: f64,
    /// (1/n)·log₂ of `expectation` (log₂(b − a) at n = 0)
    pub value: f64,
    /// log₂ E_n − log₂ E_{n−1}; the bound is a liminf, so this per-step rate is what it
    /// constrains at finite n (`value` still carries the log₂(b − a)/n start-up term).
    pub rate: f64,
    pub bound: f64,
    pub exact: bool,
}

impl IntegralDecay {
    pub fn holds(&self, slack: f64) -> bool {
        self.rate >= self.bound - slack
    }
}

/// Largest depth evaluated by full word enumeration.
pub const EXACT_DECAY_MAX: usize = 26;

fn mean_length(pa: Point, pb: Point, len: f64, depth: usize) -> f64 {
    if depth == 0 {
        return len;
    }
    let l1 = len / (pa.z.sqrt() + pb.z.sqrt());
    let l0 = len / (pa.w.sqrt() + pb.w.sqrt());
    let (a1, b1, a0, b0) = (pa.t1_inv(), pb.t1_inv(), pa.t0_inv(), pb.t0_inv());
    if depth > 12 {
        let (x, y) = rayon::join(|| mean_length(a1, b1, l1, depth - 1), || mean_length(a0, b0, l0, depth - 1));
        0.5 * (x + y)
    } else {
        0.5 * (mean_length(a1, b1, l1, depth - 1) + mean_length(a0, b0, l0, depth - 1))
    }
}

/// (1/n)·log₂ ∫₀¹ Pr(Z_n ∈ [a, b]) dz, exact for n ≤ 26 and by `samples` Monte Carlo words
/// beyond.
pub fn integral_decay_check(n: usize, a: f64, b: f64, samples: usize, seed: u64) -> Result<IntegralDecay> {
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::BadInterval { a, b });
    }
    let bound = ergodic_closed_form().value;
    let (expectation, previous, exact) = if n <= EXACT_DECAY_MAX {
        let (pa, pb) = (Point::new(a), Point::new(b));
        let prev = if n == 0 { b - a } else { mean_length(pa, pb, b - a, n - 1) };
        (mean_length(pa, pb, b - a, n), prev, true)
    } else {
        let lens: Vec<(f64, f64)> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let word = MapWord::random(&mut RngStream::new(seed, i).rng(), n);
                let ll = log_lengths(&word, a, b);
                (ll[n - 1].exp2(), ll[n - 2].exp2())
            })
            .collect();
        let total = |f: fn(&(f64, f64)) -> f64| lens.iter().map(f).collect::<KahanSum>().value() / samples as f64;
        (total(|p| p.0), total(|p| p.1), false)
    };
    let value = expectation.log2() / n.max(1) as f64;
    let rate = if n == 0 { value } else { expectation.log2() - previous.log2() };
    Ok(IntegralDecay { n, expectation, value, rate, bound, exact })
}

/// Mean of φ⁻¹(b) − φ⁻¹(a) over `samples` random words, with its standard error.
pub fn sampled_mean_length(n: usize, a: f64, b: f64, samples: usize, seed: u64) -> (f64, f64) {
    let lens: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let word = MapWord::random(&mut RngStream::new(seed, i).rng(), n);
            if n == 0 {
                b - a
            } else {
                log_lengths(&word, a, b)[n - 1].exp2()
            }
        })
        .collect();
    mean_stderr(&lens)
}
