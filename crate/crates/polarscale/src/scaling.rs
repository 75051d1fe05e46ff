//! Rigorous scaling bounds: the rate cap and error floor derived from a suitable m, the
//! probability cap on small H_n, the two-stage blocklength recipe, and the auxiliary
//! inequalities those rest on. Each comes with an empirical check against exact BEC data or
//! density evolution.

use std::f64::consts::{LN_2, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bec;
use crate::channel::BmsChannel;
use crate::construction::{for_each_subchannel, selection_size, LevelTable, SelectionKey};
use crate::error::{Error, Result};
use crate::numeric::{h2_inv, KahanSum};
use crate::poly;

/// Universal decay hypothesis E[(Z_n(1 − Z_n))^α] ≤ β·2^{−ρn}.
pub const UNIVERSAL_ALPHA: f64 = 0.75;
pub const UNIVERSAL_BETA: f64 = 1.0;
pub const UNIVERSAL_RHO: f64 = 0.202;

pub fn c2() -> f64 {
    2.0 / ((SQRT_2 - 1.0) * (SQRT_2 - 1.0))
}

pub fn c3(alpha: f64) -> f64 {
    2.0 / ((1.0 - alpha) * LN_2)
}

pub fn c1(alpha: f64, beta: f64) -> f64 {
    8.0 * c2() * c3(alpha) * beta
}

/// The proof's shortcut h₂⁻¹(x) ≥ x/(8 log₂(1/x)), valid on (0, 1/√2].
pub fn h2_inv_shortcut(x: f64) -> f64 {
    x / (8.0 * (1.0 / x).log2())
}

/// Lower-bound certificate from a suitable m: E[H_n(1 − H_n)] ≥ γ·2^{−nθ} for n ≥ m with
/// θ = 1/μ_m and γ = 2^{mθ}·f_m(H(W)). The lower end of a_m is used throughout, which keeps
/// every derived quantity on the safe side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCert {
    pub m: u32,
    pub a_m: (f64, f64),
    pub mu_m: (f64, f64),
    pub capacity: f64,
    pub h: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl LowerBoundCert {
    pub fn new(w: &BmsChannel, m: u32, precision: f64) -> Result<Self> {
        let mu = poly::mu_lower(m, precision)?;
        let (a_lo, a_hi) = (mu.a_m.lo, mu.a_m.hi);
        let p = w.params();
        let theta = -a_lo.log2();
        let gamma = (m as f64 * theta).exp2() * poly::fm_value(m, p.h);
        if !(gamma > 0.0) {
            return Err(Error::Constraint(format!("γ = {gamma}: H(W) = {} is degenerate", p.h)));
        }
        Ok(LowerBoundCert { m, a_m: (a_lo, a_hi), mu_m: (mu.lo, mu.hi), capacity: p.capacity, h: p.h, gamma, theta })
    }

    pub fn rate_cap(&self, n: u32) -> f64 {
        self.capacity - self.gamma / 4.0 * (-(n as f64) * self.theta).exp2()
    }

    /// (γ²/16)·2^{n(1−2θ)}/(8(nθ + log₂(4/γ)))
    pub fn pe_floor(&self, n: u32) -> f64 {
        let n = n as f64;
        self.gamma * self.gamma / 16.0 * (n * (1.0 - 2.0 * self.theta)).exp2() / (8.0 * (n * self.theta + (4.0 / self.gamma).log2()))
    }

    /// The same floor before the h₂⁻¹ shortcut: (γ/4)·2^{n(1−θ)}·h₂⁻¹((γ/4)·2^{−nθ}).
    pub fn pe_floor_exact(&self, n: u32) -> f64 {
        let n = n as f64;
        let x = self.gamma / 4.0 * (-n * self.theta).exp2();
        self.gamma / 4.0 * (n * (1.0 - self.theta)).exp2() * h2_inv(x.min(1.0), 1e-12)
    }

    /// Split 2α = β = γ/2 of the probability cap.
    pub fn lemma6_split(&self) -> (f64, f64) {
        (self.gamma / 4.0, self.gamma / 2.0)
    }
}

/// I(W) − β·2^{−nθ}, the cap on Pr(H_n ≤ α·2^{−nθ}); requires 2α + β = γ.
pub fn lemma6_bound(capacity: f64, gamma: f64, theta: f64, alpha: f64, beta: f64, n: u32) -> Result<f64> {
    if alpha < 0.0 || beta < 0.0 || (2.0 * alpha + beta - gamma).abs() > 1e-12 * gamma.abs().max(1.0) {
        return Err(Error::Constraint(format!("need α, β ≥ 0 with 2α + β = γ, got α={alpha} β={beta} γ={gamma}")));
    }
    Ok(capacity - beta * (-(n as f64) * theta).exp2())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub n: u32,
    pub value: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub what: String,
    pub rows: Vec<CheckRow>,
    pub violations: usize,
}

impl CheckReport {
    fn new(what: impl Into<String>, rows: Vec<CheckRow>) -> Self {
        let violations = rows.iter().filter(|r| !r.holds).count();
        CheckReport { what: what.into(), rows, violations }
    }
}

/// Level means of f(H) and of the accumulated quantization entropy, for levels 0…n_max.
fn level_means<F: Fn(f64) -> f64 + Sync>(w: &BmsChannel, n_max: u32, support: usize, f: F) -> Result<(Vec<f64>, Vec<f64>)> {
    if let BmsChannel::Bec(z) = w {
        let means = (0..=n_max).map(|n| bec::expectation_of_test(|z, _| f(z), *z, n)).collect::<Result<Vec<_>>>()?;
        return Ok((means, vec![0.0; n_max as usize + 1]));
    }
    let mut sums: Vec<(KahanSum, KahanSum)> = (0..=n_max).map(|_| (KahanSum::new(), KahanSum::new())).collect();
    for_each_subchannel(w, n_max, support, |n, r| {
        sums[n as usize].0.add(f(r.h));
        sums[n as usize].1.add(r.delta_h);
    })?;
    let scale = |n: usize| (n as f64).exp2();
    Ok((
        sums.iter().enumerate().map(|(n, s)| s.0.value() / scale(n)).collect(),
        sums.iter().enumerate().map(|(n, s)| s.1.value() / scale(n)).collect(),
    ))
}

/// E[H_n(1 − H_n)] ≥ a_m^{n−m}·f_m(H(W)) for n = m…n_max. Quantization moves each H by at
/// most its accumulated δH and h(1 − h) is 1-Lipschitz, so the mean δH is the slack.
pub fn lemma5_verify(w: &BmsChannel, m: u32, n_max: u32, support: usize, precision: f64) -> Result<CheckReport> {
    let cert = LowerBoundCert::new(w, m, precision)?;
    let (means, slack) = level_means(w, n_max, support, |h| h * (1.0 - h))?;
    let fm = poly::fm_value(m, cert.h);
    let rows = (m..=n_max)
        .map(|n| {
            let (v, s) = (means[n as usize], slack[n as usize]);
            let bound = cert.a_m.0.powi((n - m) as i32) * fm;
            CheckRow { n, value: v, bound, slack: s, holds: v >= bound * (1.0 - 1e-12) - s }
        })
        .collect();
    Ok(CheckReport::new(format!("E[H_n(1-H_n)] >= a_{m}^(n-{m}) f_{m}(H)"), rows))
}

/// Exact BEC check of Pr(Z_n ≤ α·2^{−nθ}) ≤ I − β·2^{−nθ} for n = m…n_max.
pub fn lemma6_check_bec(z: f64, cert: &LowerBoundCert, alpha: f64, beta: f64, n_max: u32) -> Result<CheckReport> {
    let rows = (cert.m..=n_max)
        .map(|n| {
            let cap = lemma6_bound(cert.capacity, cert.gamma, cert.theta, alpha, beta, n)?;
            let x = alpha * (-(n as f64) * cert.theta).exp2();
            let p = bec::prob_in_interval(z, 0.0, x, n)?;
            Ok(CheckRow { n, value: p, bound: cap, slack: 0.0, holds: p <= cap + 1e-12 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::new(format!("Pr(H_n <= {alpha:.4} 2^(-n theta)) <= cap"), rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCap {
    pub n: u32,
    pub rate_cap: f64,
    pub pe_floor: f64,
    pub pe_floor_exact: f64,
    /// μ_m used for the headline N > (c/(I − R))^μ form
    pub mu: f64,
}

pub fn theorem3_rate_cap(cert: &LowerBoundCert, n: u32) -> Result<RateCap> {
    if n < cert.m {
        return Err(Error::Constraint(format!("n = {n} below the certificate level {}", cert.m)));
    }
    Ok(RateCap {
        n,
        rate_cap: cert.rate_cap(n),
        pe_floor: cert.pe_floor(n),
        pe_floor_exact: cert.pe_floor_exact(n),
        mu: 1.0 / cert.theta,
    })
}

/// Against an exhaustive E-keyed table: at every level the ⌈N·R_cap⌉ best subchannels must
/// still have Σ E above the floor, since no selection of that rate can do better.
pub fn theorem3_check(table: &LevelTable, cert: &LowerBoundCert) -> Result<CheckReport> {
    if table.key != SelectionKey::E {
        return Err(Error::Constraint("the rate cap is stated for Σ E".into()));
    }
    let rows = (cert.m.max(1)..=table.n_max())
        .map(|n| {
            let c = theorem3_rate_cap(cert, n)?;
            let k = selection_size(1 << n, c.rate_cap);
            let best = table.prefix[n as usize][k];
            Ok(CheckRow { n, value: best, bound: c.pe_floor, slack: 0.0, holds: best > c.pe_floor })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::new(format!("min sum E at rate cap > Pe floor (m={})", cert.m), rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundCert {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub capacity: f64,
    pub rate: f64,
    pub pe: f64,
    pub d: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub n0: u32,
    pub n1: u32,
    /// n₀ + n₁, the bound on log₂ N
    pub log_n: u32,
    /// smallest c₆ for which ⌈log₂(6/d) + c₆(log₂ log₂(6/d))²⌉ reaches this n₁; a property of
    /// this run, not a universal constant
    pub c6: f64,
}

const N1_SCAN_MAX: u32 = 1 << 20;

pub fn theorem4_blocklength(w: &BmsChannel, rate: f64, pe: f64, rho: f64, beta: f64, alpha: f64) -> Result<UpperBoundCert> {
    let capacity = w.params().capacity;
    blocklength_recipe(capacity, capacity - rate, pe, rho, beta, alpha)
}

/// The n₀/n₁ recipe in terms of the gap d = I(W) − R, usable for gaps below f64 resolution
/// of the rate itself.
pub fn blocklength_recipe(capacity: f64, d: f64, pe: f64, rho: f64, beta: f64, alpha: f64) -> Result<UpperBoundCert> {
    let rate = capacity - d;
    if !(d > 0.0) {
        return Err(Error::OutOfRange { name: "I(W) - R", value: d });
    }
    if !(pe > 0.0 && pe < 1.0) {
        return Err(Error::OutOfRange { name: "Pe", value: pe });
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0) || !(rho > 0.0) {
        return Err(Error::Constraint(format!("need 0 < α < 1, β > 0, ρ > 0, got ({alpha}, {beta}, {rho})")));
    }
    let (k1, k2, k3) = (c1(alpha, beta), c2(), c3(alpha));
    let n0 = ((3.0 * (1.0 + k1) * (1.0 + 2.0 * k2 * k3 * beta) / d).log2() / rho).ceil().max(1.0) as u32;
    let target = (6.0 / d).log2();
    let lead = 1.0 + (2.0 / pe).log2().log2();
    let n1 = (1..=N1_SCAN_MAX)
        .find(|&n1| n1 as f64 - (lead + ((n0 + n1) as f64).log2()) * (n1 as f64).log2() >= target)
        .ok_or(Error::NoConvergence(N1_SCAN_MAX as usize))?;
    let c6 = (n1 as f64 - target) / target.log2().powi(2);
    Ok(UpperBoundCert { alpha, beta, rho, capacity, rate, pe, d, c1: k1, c2: k2, c3: k3, n0, n1, log_n: n0 + n1, c6 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Check {
    pub bound: u32,
    /// smallest n ≤ n_max with Σ Z ≤ Pe at the requested rate
    pub found: Option<u32>,
    /// false when the bound exceeds the table depth and nothing was found
    pub verifiable: bool,
    pub holds: bool,
}

pub fn theorem4_check(table: &LevelTable, cert: &UpperBoundCert) -> Result<Theorem4Check> {
    if table.key != SelectionKey::Z {
        return Err(Error::Constraint("the blocklength bound is checked on Σ Z".into()));
    }
    let found = table.blocklength_for(cert.rate, cert.pe).n;
    let verifiable = cert.log_n <= table.n_max() || found.is_some();
    let holds = match found {
        Some(n) => n <= cert.log_n,
        None => cert.log_n > table.n_max(),
    };
    Ok(Theorem4Check { bound: cert.log_n, found, verifiable, holds })
}

/// Pr(Z_n ≤ ½) ≥ I(W) − c₁·2^{−nρ}. Quantized Z only overestimates, so the count is
/// conservative for non-BEC channels.
pub fn lemma7_check(w: &BmsChannel, n_max: u32, support: usize, alpha: f64, beta: f64, rho: f64) -> Result<CheckReport> {
    let cap = w.params().capacity;
    let k1 = c1(alpha, beta);
    let probs: Vec<f64> = match w {
        BmsChannel::Bec(z) => (0..=n_max).map(|n| bec::prob_in_interval(*z, 0.0, 0.5, n)).collect::<Result<_>>()?,
        _ => {
            let mut hits = vec![0u64; n_max as usize + 1];
            for_each_subchannel(w, n_max, support, |n, r| hits[n as usize] += u64::from(r.z <= 0.5))?;
            hits.iter().enumerate().map(|(n, &h)| h as f64 / (n as f64).exp2()).collect()
        }
    };
    let rows = probs
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let bound = cap - k1 * (-(n as f64) * rho).exp2();
            CheckRow { n: n as u32, value: p, bound, slack: 0.0, holds: p >= bound }
        })
        .collect();
    Ok(CheckReport::new("Pr(Z_n <= 1/2) >= I(W) - c1 2^(-n rho)", rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma8Check {
    pub x: f64,
    pub n: u32,
    pub samples: usize,
    pub empirical: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Monte Carlo on the extremal process X → X² (B = 1), X → 2X (B = 0), tracked as
/// A = −log₂ X; the event X_n ≤ 2^{−2^{ΣB}} is A_n ≥ 2^{ΣB}.
pub fn lemma8_check(x: f64, n: u32, samples: usize, seed: u64) -> Result<Lemma8Check> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::OutOfRange { name: "x", value: x });
    }
    if samples == 0 {
        return Err(Error::TooSmall(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0 = -x.log2();
    let mut hits = 0usize;
    for _ in 0..samples {
        let (mut a, mut ones) = (a0, 0i32);
        for _ in 0..n {
            if rng.random::<bool>() {
                a *= 2.0;
                ones += 1;
            } else {
                a -= 1.0;
            }
        }
        hits += usize::from(a >= (ones as f64).exp2());
    }
    let empirical = hits as f64 / samples as f64;
    let bound = 1.0 - c2() * x * (1.0 + (1.0 / x).log2());
    Ok(Lemma8Check { x, n, samples, empirical, bound, holds: empirical >= bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub points: usize,
    /// max of lhs − rhs over the grid; ≤ 0 means no violation
    pub max_excess: f64,
    pub argmax: f64,
    pub holds: bool,
}

fn grid_check<F: Fn(f64) -> f64>(lo: f64, hi: f64, points: usize, excess: F) -> GridCheck {
    let (mut best, mut arg) = (f64::NEG_INFINITY, lo);
    for k in 1..=points {
        let x = lo + (hi - lo) * k as f64 / points as f64;
        let e = excess(x);
        if e > best {
            (best, arg) = (e, x);
        }
    }
    GridCheck { points, max_excess: best, argmax: arg, holds: best <= 0.0 }
}

/// x·log₂(1/x) ≤ c₃(x(1 − x))^α on (0, ¾].
pub fn lemma9_check(alpha: f64, points: usize) -> GridCheck {
    let k3 = c3(alpha);
    grid_check(0.0, 0.75, points, |x| x * (1.0 / x).log2() - k3 * (x * (1.0 - x)).powf(alpha))
}

/// h₂⁻¹(x) ≥ x/(8 log₂(1/x)) on (0, 1/√2].
pub fn h2_shortcut_check(points: usize) -> GridCheck {
    grid_check(0.0, 1.0 / SQRT_2, points, |x| h2_inv_shortcut(x) - h2_inv(x, 1e-13))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxReport {
    pub lemma7: CheckReport,
    pub lemma8: Vec<Lemma8Check>,
    pub lemma9: GridCheck,
    pub h2_shortcut: GridCheck,
    pub violations: usize,
}

pub const LEMMA8_SAMPLES: usize = 100_000;
pub const GRID_POINTS: usize = 1_000_000;

pub fn aux_lemmas_check(w: &BmsChannel, n_max: u32, support: usize, seed: u64) -> Result<AuxReport> {
    let lemma7 = lemma7_check(w, n_max, support, UNIVERSAL_ALPHA, UNIVERSAL_BETA, UNIVERSAL_RHO)?;
    let lemma8 = [0.001, 0.01, 0.05, 0.1]
        .iter()
        .enumerate()
        .map(|(i, &x)| lemma8_check(x, 30, LEMMA8_SAMPLES, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let lemma9 = lemma9_check(UNIVERSAL_ALPHA, GRID_POINTS);
    let h2_shortcut = h2_shortcut_check(GRID_POINTS / 10);
    let violations = lemma7.violations
        + lemma8.iter().filter(|c| !c.holds).count()
        + usize::from(!lemma9.holds)
        + usize::from(!h2_shortcut.holds);
    Ok(AuxReport { lemma7, lemma8, lemma9, h2_shortcut, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_bec;

    #[test]
    fn constants_match_formulas() {
        assert!((c2() - 2.0 / (3.0 - 2.0 * SQRT_2)).abs() < 1e-12);
        assert!((c3(0.75) - 8.0 / LN_2).abs() < 1e-12);
        assert!((c1(0.75, 1.0) - 8.0 * c2() * c3(0.75)).abs() < 1e-9);
    }

    #[test]
    fn lemma6_constraint_enforced() {
        assert!(lemma6_bound(0.5, 1.0, 0.3, 0.3, 0.3, 4).is_err());
        let cap = lemma6_bound(0.5, 1.0, 0.3, 0.25, 0.5, 4).unwrap();
        assert!((cap - (0.5 - 0.5 * (-1.2f64).exp2())).abs() < 1e-15);
        // β = γ, α = 0 is allowed
        assert!(lemma6_bound(0.5, 1.0, 0.3, 0.0, 1.0, 4).is_ok());
    }

    #[test]
    fn lemma5_equality_at_half() {
        let w = make_bec(0.5).unwrap();
        let r = lemma5_verify(&w, 0, 1, 0, 1e-6).unwrap();
        let row = r.rows[1];
        // the bound uses the certified lower end of a₀ = ¾
        assert!((row.value - 0.1875).abs() < 1e-15);
        assert!(row.bound <= row.value && row.bound > 0.1875 - 1e-6);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn n0_steps_by_one_over_rho() {
        let w = make_bec(0.5).unwrap();
        let a = theorem4_blocklength(&w, 0.4, 0.1, 0.202, 1.0, 0.75).unwrap();
        let b = theorem4_blocklength(&w, 0.45, 0.1, 0.202, 1.0, 0.75).unwrap();
        let step = b.n0 - a.n0;
        let r: f64 = 1.0 / 0.202;
        assert!(step == r.floor() as u32 || step == r.ceil() as u32, "{step}");
        assert!(a.n1 >= 1 && a.c6 > 0.0);
    }

    #[test]
    fn recipe_slope_tends_to_one_plus_inverse_rho() {
        let n = |d: f64| blocklength_recipe(0.5, d, 0.1, 0.202, 1.0, 0.75).unwrap().log_n as f64;
        let slope = |a: f64, b: f64| (n(b) - n(a)) / (a / b).log2();
        // the log(n₀ + n₁)·log n₁ correction fades slowly, so the slope creeps down to 1 + 1/ρ
        let s: Vec<f64> = [(1e-2, 1e-8), (1e-8, 1e-30), (1e-30, 1e-100), (1e-100, 1e-300)].iter().map(|&(a, b)| slope(a, b)).collect();
        assert!(s.windows(2).all(|p| p[1] < p[0]), "{s:?}");
        assert!(s[3] > 1.0 + 1.0 / 0.202 && s[3] < 6.01, "{s:?}");
    }

    #[test]
    fn pe_floor_eventually_increasing() {
        let w = make_bec(0.5).unwrap();
        let cert = LowerBoundCert::new(&w, 4, 1e-6).unwrap();
        let f: Vec<f64> = (20..200).map(|n| cert.pe_floor(n)).collect();
        assert!(f.windows(2).all(|p| p[1] > p[0]));
        assert!(cert.pe_floor_exact(20) >= cert.pe_floor(20));
    }

    #[test]
    fn auxiliary_inequalities_hold() {
        assert!(lemma9_check(0.75, 100_000).holds);
        assert!(lemma9_check(0.5, 100_000).holds);
        assert!(h2_shortcut_check(20_000).holds);
        let l8 = lemma8_check(0.01, 30, 20_000, 7).unwrap();
        assert!(l8.holds && l8.empirical > 0.5);
        assert_eq!(lemma8_check(0.01, 30, 1000, 3).unwrap(), lemma8_check(0.01, 30, 1000, 3).unwrap());
    }
}
