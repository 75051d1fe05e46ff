//! Small floating-point helpers shared by the analysis modules.

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Inverse of `h2` on [0, ½] by bisection.
pub fn h2_inv(h: f64, tol: f64) -> f64 {
    let h = h.clamp(0.0, 1.0);
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if h2(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<KahanSum>().value()
}

/// Ordinary least squares `y = intercept + slope * x`, returning (slope, intercept, residuals).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, Vec<f64>)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = compensated_sum(x) / n as f64;
    let my = compensated_sum(y) / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    Some((slope, intercept, res))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre quadrature of `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = KahanSum::new();
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in xs.iter().zip(&ws) {
            acc.add(w * f(mid + 0.5 * h * x) * 0.5 * h);
        }
    }
    acc.value()
}

/// Closed interval of nonnegative reals. Operations assume both operands are nonnegative,
/// which holds for every factor of the test-function ratios; rounding is absorbed by a
/// final [`Interval::widen`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi && lo >= 0.0, "bad interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    /// Smallest interval containing both values, in either order.
    pub fn hull(a: f64, b: f64) -> Self {
        Interval { lo: a.min(b), hi: a.max(b) }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn powf(self, e: f64) -> Self {
        Interval { lo: self.lo.powf(e), hi: self.hi.powf(e) }
    }

    pub fn sqrt(self) -> Self {
        Interval { lo: self.lo.sqrt(), hi: self.hi.sqrt() }
    }

    pub fn scale(self, c: f64) -> Self {
        Interval { lo: self.lo * c, hi: self.hi * c }
    }

    /// 1 − x, clamped at zero.
    pub fn complement(self) -> Self {
        Interval { lo: (1.0 - self.hi).max(0.0), hi: (1.0 - self.lo).max(0.0) }
    }

    pub fn clamp_unit(self) -> Self {
        Interval { lo: self.lo.clamp(0.0, 1.0), hi: self.hi.clamp(0.0, 1.0) }
    }

    pub fn widen(self, rel: f64) -> Self {
        Interval { lo: self.lo * (1.0 - rel), hi: self.hi * (1.0 + rel) }
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval { lo: self.lo + o.lo, hi: self.hi + o.hi }
    }
}

impl std::ops::Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        Interval { lo: self.lo * o.lo, hi: self.hi * o.hi }
    }
}

impl std::ops::Div for Interval {
    type Output = Interval;
    fn div(self, o: Interval) -> Interval {
        Interval { lo: self.lo / o.hi, hi: self.hi / o.lo }
    }
}
