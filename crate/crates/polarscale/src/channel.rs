//! Binary memoryless symmetric channels in the D-domain.
//!
//! A channel is a mixture of binary symmetric channels; each component is a point
//! mass at its D-value `x = |1 - 2ε|` in [0, 1].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, h2, KahanSum};

/// D-values closer than this are treated as one mass point.
pub const MERGE_TOL: f64 = 1e-12;

/// Entropy kernel h₂((1-x)/2).
pub fn entropy_kernel(x: f64) -> f64 {
    h2(0.5 * (1.0 - x))
}

/// Bhattacharyya kernel √(1-x²).
pub fn bhattacharyya_kernel(x: f64) -> f64 {
    (1.0 - x * x).max(0.0).sqrt()
}

/// Error-probability kernel (1-x)/2.
pub fn error_kernel(x: f64) -> f64 {
    0.5 * (1.0 - x)
}

/// Finite mixture of BSC components, sorted by D-value with duplicates merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Density {
    points: Vec<(f64, f64)>,
}

impl Density {
    /// Builds a density from `(x, p)` pairs; masses must sum to one.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for &(x, p) in &points {
            if !(0.0..=1.0).contains(&x) || x.is_nan() {
                return Err(Error::OutOfRange { name: "x", value: x });
            }
            if p < 0.0 || p.is_nan() {
                return Err(Error::OutOfRange { name: "p", value: p });
            }
        }
        let total: f64 = points.iter().map(|&(_, p)| p).collect::<KahanSum>().value();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::OutOfRange { name: "total mass", value: total });
        }
        Ok(Self::canonical(points))
    }

    /// Sorts, drops empty masses and merges D-values within `MERGE_TOL`.
    fn canonical(mut points: Vec<(f64, f64)>) -> Self {
        points.retain(|&(_, p)| p > 0.0);
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        let mut anchor = f64::NEG_INFINITY;
        for (x, p) in points {
            match out.last_mut() {
                Some(last) if x - anchor <= MERGE_TOL => {
                    let mass = last.1 + p;
                    last.0 = (last.0 * last.1 + x * p) / mass;
                    last.1 = mass;
                }
                _ => {
                    anchor = x;
                    out.push((x, p));
                }
            }
        }
        Density { points: out }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn expect(&self, kernel: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().map(|&(x, p)| p * kernel(x)).collect::<KahanSum>().value()
    }
}

impl TryFrom<Vec<(f64, f64)>> for Density {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        Density::new(v)
    }
}

impl From<Density> for Vec<(f64, f64)> {
    fn from(d: Density) -> Self {
        d.points
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BmsChannel {
    Bec(f64),
    Bsc(f64),
    Density(Density),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub h: f64,
    pub z: f64,
    pub e: f64,
    pub capacity: f64,
}

/// Slack of each relation between H, Z and E; a relation holds when its slack is ≥ 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// 2E ≥ 0
    pub two_e_nonneg: f64,
    /// H - 2E
    pub h_minus_two_e: f64,
    /// Z - H
    pub z_minus_h: f64,
    /// 1 - Z
    pub one_minus_z: f64,
    /// h₂(E) - H
    pub h2e_minus_h: f64,
    /// √(1-(1-H)²) - Z
    pub zcap_minus_z: f64,
    /// 2E - (1 - √(1-Z²))
    pub two_e_minus_floor: f64,
}

impl BoundsReport {
    pub fn min_slack(&self) -> f64 {
        [
            self.two_e_nonneg,
            self.h_minus_two_e,
            self.z_minus_h,
            self.one_minus_z,
            self.h2e_minus_h,
            self.zcap_minus_z,
            self.two_e_minus_floor,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

impl ChannelParams {
    pub fn bounds(&self) -> BoundsReport {
        let (h, z, e) = (self.h, self.z, self.e);
        BoundsReport {
            two_e_nonneg: 2.0 * e,
            h_minus_two_e: h - 2.0 * e,
            z_minus_h: z - h,
            one_minus_z: 1.0 - z,
            h2e_minus_h: h2(e) - h,
            zcap_minus_z: (1.0 - (1.0 - h) * (1.0 - h)).max(0.0).sqrt() - z,
            two_e_minus_floor: 2.0 * e - (1.0 - (1.0 - z * z).max(0.0).sqrt()),
        }
    }
}

pub fn make_bec(z: f64) -> Result<BmsChannel> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::OutOfRange { name: "z", value: z });
    }
    Ok(BmsChannel::Bec(z))
}

pub fn make_bsc(eps: f64) -> Result<BmsChannel> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::OutOfRange { name: "eps", value: eps });
    }
    Ok(BmsChannel::Bsc(eps))
}

/// Quantized BAWGN channel together with its discretization error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bawgn {
    pub sigma: f64,
    pub channel: BmsChannel,
    /// Capacity of the continuous channel, by quadrature.
    pub capacity: f64,
    /// Capacity of an upgraded quantization with the same bins; the true capacity lies
    /// between this and the capacity of `channel`.
    pub capacity_upper: f64,
}

impl Bawgn {
    pub fn quantization_error(&self) -> f64 {
        self.capacity_upper - self.channel.params().capacity
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// BPSK over additive Gaussian noise with standard deviation `sigma`, quantized to `m`
/// equal-probability bins of |D|. Each bin is represented by its conditional mean D-value,
/// which is a degradation of the continuous channel.
pub fn make_bawgn(sigma: f64, m: usize) -> Result<Bawgn> {
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::OutOfRange { name: "sigma", value: sigma });
    }
    if m < 16 {
        return Err(Error::TooSmall(m));
    }
    let s2 = sigma * sigma;
    // |Y| for Y ~ N(1, σ²)
    let cdf = |t: f64| normal_cdf((t - 1.0) / sigma) - normal_cdf((-t - 1.0) / sigma);
    let pdf = |t: f64| (normal_pdf((t - 1.0) / sigma) + normal_pdf((t + 1.0) / sigma)) / sigma;
    let d_of = |t: f64| (t / s2).tanh();
    let t_max = 1.0 + 40.0 * sigma;

    let mut cuts = Vec::with_capacity(m + 1);
    cuts.push(0.0);
    for k in 1..m {
        let target = k as f64 / m as f64;
        let (mut lo, mut hi) = (0.0, t_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        cuts.push(0.5 * (lo + hi));
    }
    cuts.push(t_max);

    let (gx, gw) = gauss_legendre(12);
    let integrate_bin = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        let panels = if b - a > 1.0 { ((b - a) * 8.0).ceil() as usize } else { 1 };
        let h = (b - a) / panels as f64;
        let mut acc = KahanSum::new();
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                let t = mid + 0.5 * h * x;
                acc.add(w * 0.5 * h * f(t) * pdf(t));
            }
        }
        acc.value()
    };

    let mass = 1.0 / m as f64;
    let mut points = Vec::with_capacity(m);
    let mut cap = KahanSum::new();
    let mut cap_up = KahanSum::new();
    for k in 0..m {
        let (a, b) = (cuts[k], cuts[k + 1]);
        let bin_mass = integrate_bin(a, b, &|_| 1.0);
        let mean_d = integrate_bin(a, b, &d_of) / bin_mass;
        points.push((mean_d.clamp(0.0, 1.0), mass));
        cap.add(integrate_bin(a, b, &|t| 1.0 - entropy_kernel(d_of(t))));
        let d_hi = if k + 1 == m { 1.0 } else { d_of(b) };
        cap_up.add(mass * (1.0 - entropy_kernel(d_hi)));
    }
    let channel = BmsChannel::Density(Density::canonical(points));
    Ok(Bawgn { sigma, channel, capacity: cap.value(), capacity_upper: cap_up.value() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct MergeCand {
    cost: f64,
    left: usize,
    right: usize,
    stamp: (u64, u64),
}

impl Eq for MergeCand {}

impl Ord for MergeCand {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then position for determinism
        other.cost.total_cmp(&self.cost).then_with(|| other.left.cmp(&self.left))
    }
}

impl PartialOrd for MergeCand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn merge_cost(a: (f64, f64), b: (f64, f64)) -> (f64, (f64, f64)) {
    let mass = a.1 + b.1;
    let x = (a.0 * a.1 + b.0 * b.1) / mass;
    let cost = mass * entropy_kernel(x) - a.1 * entropy_kernel(a.0) - b.1 * entropy_kernel(b.0);
    (cost.max(0.0), (x, mass))
}

/// Greedy adjacent merging down to at most `m` points. Returns the merged density and
/// the entropy increase.
pub fn degrade_merge_density(d: &Density, m: usize) -> (Density, f64) {
    let m = m.max(2);
    let n = d.points.len();
    if n <= m {
        return (d.clone(), 0.0);
    }
    let mut pts = d.points.clone();
    let mut alive = vec![true; n];
    let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
    let mut next: Vec<usize> = (1..=n).collect();
    let mut version = vec![0u64; n];
    let mut heap = BinaryHeap::with_capacity(2 * n);
    for i in 0..n - 1 {
        let (cost, _) = merge_cost(pts[i], pts[i + 1]);
        heap.push(MergeCand { cost, left: i, right: i + 1, stamp: (0, 0) });
    }
    let mut count = n;
    let mut dh = 0.0;
    while count > m {
        let Some(c) = heap.pop() else { break };
        if !alive[c.left] || !alive[c.right] || (version[c.left], version[c.right]) != c.stamp {
            continue;
        }
        let (cost, merged) = merge_cost(pts[c.left], pts[c.right]);
        dh += cost;
        pts[c.left] = merged;
        alive[c.right] = false;
        version[c.left] += 1;
        let nr = next[c.right];
        next[c.left] = nr;
        if nr < n {
            prev[nr] = c.left;
        }
        count -= 1;
        let pl = prev[c.left];
        if pl < n {
            let (cost, _) = merge_cost(pts[pl], pts[c.left]);
            heap.push(MergeCand { cost, left: pl, right: c.left, stamp: (version[pl], version[c.left]) });
        }
        if nr < n {
            let (cost, _) = merge_cost(pts[c.left], pts[nr]);
            heap.push(MergeCand { cost, left: c.left, right: nr, stamp: (version[c.left], version[nr]) });
        }
    }
    let out: Vec<(f64, f64)> = (0..n).filter(|&i| alive[i]).map(|i| pts[i]).collect();
    (Density { points: out }, dh)
}

fn split_density(d: &Density) -> (Density, Density) {
    let p = &d.points;
    let n = p.len();
    let mut bad = Vec::with_capacity(n * (n + 1) / 2);
    let mut good = Vec::with_capacity(n * (n + 1));
    for i in 0..n {
        let (x, px) = p[i];
        for j in i..n {
            let (y, py) = p[j];
            let w = if i == j { px * py } else { 2.0 * px * py };
            bad.push((x * y, w));
            let s = 1.0 + x * y;
            good.push((((x + y) / s).min(1.0), w * 0.5 * s));
            let t = 1.0 - x * y;
            if t > 0.0 {
                good.push((((x - y).abs() / t).min(1.0), w * 0.5 * t));
            }
        }
    }
    (Density::canonical(bad), Density::canonical(good))
}

impl BmsChannel {
    pub fn density(&self) -> Density {
        match self {
            BmsChannel::Bec(z) => Density::canonical(vec![(0.0, *z), (1.0, 1.0 - z)]),
            BmsChannel::Bsc(e) => Density::canonical(vec![((1.0 - 2.0 * e).abs(), 1.0)]),
            BmsChannel::Density(d) => d.clone(),
        }
    }

    pub fn params(&self) -> ChannelParams {
        let (h, z, e) = match self {
            BmsChannel::Bec(z) => (*z, *z, 0.5 * z),
            BmsChannel::Bsc(e) => (h2(*e), 2.0 * (e * (1.0 - e)).sqrt(), *e),
            // mass rounding can push these a few ulps past their range
            BmsChannel::Density(d) => (
                d.expect(entropy_kernel).clamp(0.0, 1.0),
                d.expect(bhattacharyya_kernel).clamp(0.0, 1.0),
                d.expect(error_kernel).clamp(0.0, 0.5),
            ),
        };
        ChannelParams { h, z, e, capacity: 1.0 - h }
    }

    /// One step of the splitting transform: (bad channel W⁰, good channel W¹).
    pub fn split(&self) -> (BmsChannel, BmsChannel) {
        match self {
            BmsChannel::Bec(z) => (BmsChannel::Bec(1.0 - (1.0 - z) * (1.0 - z)), BmsChannel::Bec(z * z)),
            other => {
                let (a, b) = split_density(&other.density());
                (BmsChannel::Density(a), BmsChannel::Density(b))
            }
        }
    }

    /// Degrading quantization to at most `m` mass points; returns the channel and δH ≥ 0.
    pub fn degrade_merge(&self, m: usize) -> (BmsChannel, f64) {
        match self {
            BmsChannel::Density(d) if d.len() > m.max(2) => {
                let (q, dh) = degrade_merge_density(d, m);
                (BmsChannel::Density(q), dh)
            }
            other => (other.clone(), 0.0),
        }
    }

    pub fn check_parameter_bounds(&self) -> BoundsReport {
        self.params().bounds()
    }

    pub fn support_len(&self) -> usize {
        match self {
            BmsChannel::Bec(_) => 2,
            BmsChannel::Bsc(_) => 1,
            BmsChannel::Density(d) => d.len(),
        }
    }
}

/// Default support cap for `bawgn:<sigma>` literals.
pub const DEFAULT_BAWGN_SUPPORT: usize = 512;

impl FromStr for BmsChannel {
    type Err = Error;

    /// `bec:<z>`, `bsc:<eps>`, `bawgn:<sigma>[:<support>]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(s.to_string());
        let mut parts = s.trim().split(':');
        let kind = parts.next().ok_or_else(bad)?.to_ascii_lowercase();
        let value: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let extra = parts.next();
        if parts.next().is_some() {
            return Err(bad());
        }
        match (kind.as_str(), extra) {
            ("bec", None) => make_bec(value),
            ("bsc", None) => make_bsc(value),
            ("bawgn", m) => {
                let m = match m {
                    Some(t) => t.parse().map_err(|_| bad())?,
                    None => DEFAULT_BAWGN_SUPPORT,
                };
                Ok(make_bawgn(value, m)?.channel)
            }
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bec_parameters() {
        let p = make_bec(0.5).unwrap().params();
        assert_eq!((p.h, p.z, p.e), (0.5, 0.5, 0.25));
        assert_eq!(make_bec(0.0).unwrap().params().h, 0.0);
        let p = make_bec(1.0).unwrap().params();
        assert_eq!((p.h, p.e), (1.0, 0.5));
        let p = make_bec(0.3).unwrap().params();
        assert_eq!((p.h, p.z, p.e), (0.3, 0.3, 0.15));
        assert!(make_bec(1.2).is_err());
    }

    #[test]
    fn bsc_parameters() {
        let p = make_bsc(0.11).unwrap().params();
        assert!(close(p.h, 0.5, 1e-3));
        // one-point density at x = 0.78
        assert!(close(p.z, (1.0 - 0.78f64 * 0.78).sqrt(), 1e-12));
        assert!(close(p.z, 0.6258, 1e-4));
        let q = BmsChannel::Density(make_bsc(0.11).unwrap().density()).params();
        assert!(close(p.z, q.z, 1e-12) && close(p.h, q.h, 1e-12));
        let p = make_bsc(0.0).unwrap().params();
        assert_eq!((p.h, p.z), (0.0, 0.0));
        assert!(close(make_bsc(0.146).unwrap().params().h, 0.6, 1e-3));
        assert!(make_bsc(0.6).is_err());
    }

    #[test]
    fn two_point_density_entropy() {
        let d = Density::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(BmsChannel::Density(d).params().h, 0.5);
    }

    #[test]
    fn density_merges_duplicates() {
        let d = Density::new(vec![(0.3, 0.25), (0.3 + 1e-14, 0.25), (0.7, 0.5)]).unwrap();
        assert_eq!(d.len(), 2);
        assert!(close(d.points()[0].1, 0.5, 1e-15));
        assert!(Density::new(vec![(0.3, 0.4)]).is_err());
    }

    #[test]
    fn bec_split_stays_exact() {
        let (a, b) = make_bec(0.5).unwrap().split();
        assert_eq!(a, BmsChannel::Bec(0.75));
        assert_eq!(b, BmsChannel::Bec(0.25));
    }

    #[test]
    fn bec_density_split_matches_exact() {
        let w = BmsChannel::Density(make_bec(0.3).unwrap().density());
        let (a, b) = w.split();
        assert!(close(a.params().h, 1.0 - 0.49, 1e-12));
        assert!(close(b.params().h, 0.09, 1e-12));
    }

    #[test]
    fn bsc_good_channel_bhattacharyya() {
        let eps = 0.07;
        let (_, b) = make_bsc(eps).unwrap().split();
        assert!(close(b.params().z, 4.0 * eps * (1.0 - eps), 1e-12));
    }

    #[test]
    fn noiseless_density() {
        let w = BmsChannel::Density(Density::new(vec![(1.0, 1.0)]).unwrap());
        let p = w.params();
        assert_eq!((p.h, p.z, p.e), (0.0, 0.0, 0.0));
        assert!(w.check_parameter_bounds().holds(0.0));
    }

    #[test]
    fn bounds_report_examples() {
        let r = make_bec(0.5).unwrap().check_parameter_bounds();
        assert_eq!(r.z_minus_h, 0.0);
        assert!(r.holds(0.0));
        let r = make_bsc(0.11).unwrap().check_parameter_bounds();
        assert!(r.h_minus_two_e > 0.27);
        assert!(r.holds(1e-12));
    }

    #[test]
    fn degrade_merge_noop_and_collapse() {
        let w = BmsChannel::Density(Density::new(vec![(0.2, 0.5), (0.9, 0.5)]).unwrap());
        assert_eq!(w.degrade_merge(4), (w.clone(), 0.0));
        let d = Density::new(vec![(0.4, 0.5), (0.4, 0.5)]).unwrap();
        assert_eq!(d.points(), &[(0.4, 1.0)]);
    }

    #[test]
    fn bawgn_capacities() {
        for (sigma, cap) in [(0.978, 0.5), (1.149, 0.4), (1.386, 0.3)] {
            let b = make_bawgn(sigma, 512).unwrap();
            let got = b.channel.params().capacity;
            assert!(close(got, cap, 0.01), "sigma {sigma}: {got}");
            assert!(close(b.capacity, cap, 0.01));
            assert!(got <= b.capacity + 1e-9 && b.capacity <= b.capacity_upper + 1e-9);
            assert!(b.quantization_error() < 0.01);
        }
        let far = make_bawgn(100.0, 64).unwrap();
        assert!(far.channel.params().capacity < 1e-3);
        assert!(make_bawgn(0.0, 64).is_err());
    }

    #[test]
    fn bawgn_tree_satisfies_bounds() {
        let w = make_bawgn(0.978, 512).unwrap().channel;
        let mut level = vec![w];
        for _ in 0..10 {
            let mut next = Vec::new();
            for c in &level {
                let (a, b) = c.split();
                next.push(a.degrade_merge(16).0);
                next.push(b.degrade_merge(16).0);
            }
            for c in &next {
                assert!(c.check_parameter_bounds().holds(1e-9));
            }
            // keep a bounded sample of the level to limit runtime
            next.truncate(8);
            level = next;
        }
    }

    #[test]
    fn literals() {
        assert_eq!("bec:0.5".parse::<BmsChannel>().unwrap(), BmsChannel::Bec(0.5));
        assert_eq!("bsc:0.11".parse::<BmsChannel>().unwrap(), BmsChannel::Bsc(0.11));
        let w: BmsChannel = "bawgn:0.978:64".parse().unwrap();
        assert_eq!(w.support_len(), 64);
        assert!("awgn:1".parse::<BmsChannel>().is_err());
        assert!("bec:x".parse::<BmsChannel>().is_err());
    }

    #[test]
    fn density_json_roundtrip() {
        let d = Density::new(vec![(0.25, 0.5), (0.75, 0.5)]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, "[[0.25,0.5],[0.75,0.5]]");
        let back: Density = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }

    fn arb_density() -> impl Strategy<Value = Density> {
        prop::collection::vec((0.0f64..=1.0, 0.01f64..1.0), 1..8).prop_map(|v| {
            let total: f64 = v.iter().map(|p| p.1).sum();
            Density::new(v.into_iter().map(|(x, p)| (x, p / total)).collect()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn split_relations_hold(d in arb_density()) {
            let w = BmsChannel::Density(d);
            let p = w.params();
            let (a, b) = w.split();
            let (pa, pb) = (a.params(), b.params());
            prop_assert!((pa.h + pb.h - 2.0 * p.h).abs() < 1e-9);
            prop_assert!((pb.z - p.z * p.z).abs() < 1e-9);
            prop_assert!(pa.z >= p.z * (2.0 - p.z * p.z).sqrt() - 1e-9);
            prop_assert!(pa.z <= 1.0 - (1.0 - p.z) * (1.0 - p.z) + 1e-9);
            prop_assert!((pa.e - 2.0 * p.e * (1.0 - p.e)).abs() < 1e-9);
            prop_assert!(pb.e >= p.e * p.e - 1e-9 && pb.e <= p.e + 1e-9);
            for c in [&w, &a, &b] {
                prop_assert!(c.check_parameter_bounds().holds(1e-9));
            }
        }

        #[test]
        fn degrade_merge_is_degrading(d in arb_density(), m in 2usize..6) {
            let w = BmsChannel::Density(d);
            let (q, dh) = w.degrade_merge(m);
            prop_assert!(q.support_len() <= m.max(w.support_len().min(m)));
            prop_assert!(dh >= 0.0);
            prop_assert!((q.params().h - w.params().h - dh).abs() < 1e-9);
            prop_assert!(q.check_parameter_bounds().holds(1e-9));
            let (again, dh2) = q.degrade_merge(m);
            prop_assert_eq!(again, q);
            prop_assert_eq!(dh2, 0.0);
        }
    }
}
