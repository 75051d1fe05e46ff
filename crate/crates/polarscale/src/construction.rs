//! Polar-code construction: subchannel parameters down the splitting tree, good-index
//! selection and the two-sided block-error bound.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::BmsChannel;
use crate::error::{Error, Result};
use crate::numeric::{linear_fit, KahanSum};

pub const MAX_LEVELS: u32 = 22;
pub const DEFAULT_SUPPORT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubchannelRecord {
    /// binary digits b₁…b_n of the index, b₁ most significant; bit 1 is the good branch
    pub index: u64,
    pub h: f64,
    pub z: f64,
    pub e: f64,
    /// entropy added by quantization along the path
    pub delta_h: f64,
}

fn walk<F: FnMut(u32, SubchannelRecord)>(ch: &BmsChannel, depth: u32, index: u64, slack: f64, m: usize, levels: u32, f: &mut F) {
    let p = ch.params();
    f(depth, SubchannelRecord { index, h: p.h, z: p.z, e: p.e, delta_h: slack });
    if depth == levels {
        return;
    }
    let (bad, good) = ch.split();
    let (bad, d0) = bad.degrade_merge(m);
    let (good, d1) = good.degrade_merge(m);
    walk(&bad, depth + 1, index << 1, slack + d0, m, levels, f);
    walk(&good, depth + 1, (index << 1) | 1, slack + d1, m, levels, f);
}

/// Depth-first traversal of levels 0…n, handing each record to `f` with its level.
pub fn for_each_subchannel<F: FnMut(u32, SubchannelRecord)>(w: &BmsChannel, n: u32, m: usize, mut f: F) -> Result<()> {
    if n > MAX_LEVELS {
        return Err(Error::LevelCap { n, cap: MAX_LEVELS });
    }
    walk(w, 0, 0, 0.0, m, n, &mut f);
    Ok(())
}

/// Records for every level 0…n, each level sorted by index.
pub fn level_params(w: &BmsChannel, n: u32, m: usize) -> Result<Vec<Vec<SubchannelRecord>>> {
    let mut out: Vec<Vec<SubchannelRecord>> = (0..=n.min(MAX_LEVELS)).map(|k| Vec::with_capacity(1 << k)).collect();
    for_each_subchannel(w, n, m, |d, r| out[d as usize].push(r))?;
    for level in &mut out {
        level.sort_by_key(|r| r.index);
    }
    Ok(out)
}

/// The 2^n subchannels W_N^{(i)}; the BEC path is exact and never quantized.
pub fn subchannel_params(w: &BmsChannel, n: u32, m: usize) -> Result<Vec<SubchannelRecord>> {
    Ok(level_params(w, n, m)?.pop().unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionKey {
    E,
    Z,
    H,
}

impl SelectionKey {
    pub fn of(self, r: &SubchannelRecord) -> f64 {
        match self {
            SelectionKey::E => r.e,
            SelectionKey::Z => r.z,
            SelectionKey::H => r.h,
        }
    }
}

impl FromStr for SelectionKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e" => Ok(SelectionKey::E),
            "z" => Ok(SelectionKey::Z),
            "h" => Ok(SelectionKey::H),
            _ => Err(Error::Parse(s.into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeSelection {
    pub blocklength: u64,
    pub rate: f64,
    pub key: SelectionKey,
    /// ascending
    pub indices: Vec<u64>,
    /// max E over the selection
    pub lower: f64,
    /// Σ E over the selection
    pub upper: f64,
    pub tie_break: String,
}

/// ⌈N·R⌉, ignoring float noise just above an integer.
pub fn selection_size(n_records: usize, rate: f64) -> usize {
    ((n_records as f64 * rate - 1e-9).ceil() as usize).clamp(1, n_records)
}

pub fn good_indices(records: &[SubchannelRecord], rate: f64, key: SelectionKey) -> Result<CodeSelection> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::OutOfRange { name: "rate", value: rate });
    }
    if records.is_empty() {
        return Err(Error::TooSmall(0));
    }
    let mut order: Vec<&SubchannelRecord> = records.iter().collect();
    order.sort_by(|a, b| key.of(a).total_cmp(&key.of(b)).then(a.index.cmp(&b.index)));
    let chosen = &order[..selection_size(records.len(), rate)];
    let mut indices: Vec<u64> = chosen.iter().map(|r| r.index).collect();
    indices.sort_unstable();
    let lower = chosen.iter().map(|r| r.e).fold(0.0, f64::max);
    let upper = chosen.iter().map(|r| r.e).collect::<KahanSum>().value();
    Ok(CodeSelection {
        blocklength: records.len() as u64,
        rate,
        key,
        indices,
        lower,
        upper,
        tie_break: "lower index first".into(),
    })
}

/// Per-level key values (E unless chosen otherwise) sorted ascending with prefix sums, for
/// repeated rate queries.
#[derive(Clone, Debug)]
pub struct LevelTable {
    pub prefix: Vec<Vec<f64>>,
    pub capacity: f64,
    pub delta_h: Vec<f64>,
    pub key: SelectionKey,
}

impl LevelTable {
    pub fn new(w: &BmsChannel, n_max: u32, m: usize) -> Result<Self> {
        Self::with_key(w, n_max, m, SelectionKey::E)
    }

    pub fn with_key(w: &BmsChannel, n_max: u32, m: usize, key: SelectionKey) -> Result<Self> {
        let mut es: Vec<Vec<f64>> = (0..=n_max.min(MAX_LEVELS)).map(|k| Vec::with_capacity(1 << k)).collect();
        let mut delta_h = vec![0.0f64; es.len()];
        for_each_subchannel(w, n_max, m, |d, r| {
            es[d as usize].push(key.of(&r));
            delta_h[d as usize] = delta_h[d as usize].max(r.delta_h);
        })?;
        let prefix = es
            .into_iter()
            .map(|mut e| {
                e.sort_by(f64::total_cmp);
                let mut acc = KahanSum::new();
                std::iter::once(0.0)
                    .chain(e.iter().map(|&x| {
                        acc.add(x);
                        acc.value()
                    }))
                    .collect()
            })
            .collect();
        Ok(LevelTable { prefix, capacity: w.params().capacity, delta_h, key })
    }

    pub fn n_max(&self) -> u32 {
        self.prefix.len() as u32 - 1
    }

    /// Σ key over the ⌈2^n R⌉ best subchannels of level n.
    pub fn sum_best(&self, n: u32, rate: f64) -> f64 {
        let p = &self.prefix[n as usize];
        p[selection_size(p.len() - 1, rate)]
    }

    pub fn blocklength_for(&self, rate: f64, pe: f64) -> BlocklengthScan {
        let mut sums = Vec::new();
        let mut found = None;
        for n in 1..=self.n_max() {
            let s = self.sum_best(n, rate);
            sums.push((n, s));
            if s <= pe {
                found = Some(n);
                break;
            }
        }
        BlocklengthScan { rate, pe, n: found, sums }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlocklengthScan {
    pub rate: f64,
    pub pe: f64,
    /// smallest n ≥ 1 with Σ key ≤ Pe, if any up to n_max
    pub n: Option<u32>,
    pub sums: Vec<(u32, f64)>,
}

pub fn blocklength_for(w: &BmsChannel, rate: f64, pe: f64, n_max: u32, m: usize) -> Result<BlocklengthScan> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::OutOfRange { name: "rate", value: rate });
    }
    Ok(LevelTable::new(w, n_max, m)?.blocklength_for(rate, pe))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// (I − R, n*) for each feasible grid rate
    pub points: Vec<(f64, u32)>,
    pub infeasible: Vec<f64>,
    /// slope of log₂ N* against log₂ 1/(I − R)
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub n_max: u32,
}

/// Rates with gaps I − R spaced geometrically over [gap_min, gap_max].
pub fn gap_grid(capacity: f64, gap_min: f64, gap_max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (gap_min.ln(), gap_max.ln());
    (0..points)
        .map(|k| capacity - (a + (b - a) * k as f64 / (points.max(2) - 1) as f64).exp())
        .collect()
}

pub fn fit_scaling_exponent(table: &LevelTable, pe: f64, rates: &[f64]) -> Result<ScalingFit> {
    let i = table.capacity;
    if rates.iter().any(|&r| r >= i || r <= 0.0) {
        return Err(Error::Constraint("grid rates must lie in (0, I(W))".into()));
    }
    let mut points = Vec::new();
    let mut infeasible = Vec::new();
    for &r in rates {
        match table.blocklength_for(r, pe).n {
            Some(n) => points.push((i - r, n)),
            None => infeasible.push(i - r),
        }
    }
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} feasible grid points", points.len())));
    }
    let x: Vec<f64> = points.iter().map(|p| (1.0 / p.0).log2()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1 as f64).collect();
    let (slope, intercept, res) = linear_fit(&x, &y).ok_or_else(|| Error::DegenerateFit("flat grid".into()))?;
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    Ok(ScalingFit { points, infeasible, slope, intercept, rms_residual: rms, n_max: table.n_max() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bec::expectation_of_test;
    use crate::channel::{make_bec, make_bsc};

    #[test]
    fn bec_examples() {
        let w = make_bec(0.5).unwrap();
        let r1 = subchannel_params(&w, 1, 16).unwrap();
        assert_eq!((r1[0].h, r1[1].h), (0.75, 0.25));
        let r3 = subchannel_params(&w, 3, 16).unwrap();
        assert_eq!(r3[6].z, 0.12109375);
        assert!(r3.iter().all(|r| r.delta_h == 0.0));
        let s = good_indices(&r3, 0.25, SelectionKey::E).unwrap();
        assert_eq!(s.indices, vec![6, 7]);
        let all = good_indices(&r3, 1.0, SelectionKey::E).unwrap();
        assert_eq!(all.indices.len(), 8);
        assert!((all.upper - r3.iter().map(|r| r.e).sum::<f64>()).abs() < 1e-15);
        let one = good_indices(&r3, 0.1, SelectionKey::E).unwrap();
        assert_eq!(one.indices, vec![7]);
        assert_eq!(one.lower, one.upper);
    }

    #[test]
    fn bec_mean_z_is_martingale_mean() {
        let w = make_bec(0.3).unwrap();
        for n in [4, 10, 14] {
            let recs = subchannel_params(&w, n, 2).unwrap();
            let mean = recs.iter().map(|r| r.z).collect::<KahanSum>().value() / recs.len() as f64;
            let e = expectation_of_test(|z, _| z, 0.3, n).unwrap();
            assert!((mean - e).abs() < 1e-14);
        }
    }

    #[test]
    fn entropy_conserved_up_to_slack() {
        let w = make_bsc(0.11).unwrap();
        let h = w.params().h;
        let recs = subchannel_params(&w, 6, 16).unwrap();
        let mean = recs.iter().map(|r| r.h).sum::<f64>() / recs.len() as f64;
        let slack = recs.iter().map(|r| r.delta_h).sum::<f64>() / recs.len() as f64;
        assert!(mean >= h - 1e-12 && mean <= h + slack + 1e-12, "{mean} {h} {slack}");
    }

    #[test]
    fn selection_is_order_independent() {
        let w = make_bec(0.5).unwrap();
        let recs = subchannel_params(&w, 6, 2).unwrap();
        let mut rev = recs.clone();
        rev.reverse();
        for key in [SelectionKey::E, SelectionKey::Z, SelectionKey::H] {
            let a = good_indices(&recs, 0.4, key).unwrap();
            let b = good_indices(&rev, 0.4, key).unwrap();
            assert_eq!(a, b);
            assert!(a.lower <= a.upper);
        }
    }

    #[test]
    fn blocklength_scan() {
        let w = make_bec(0.5).unwrap();
        let t = LevelTable::new(&w, 14, 2).unwrap();
        let s = t.blocklength_for(0.25, 0.1);
        assert!(s.n.is_some_and(|n| n <= 10));
        assert_eq!(t.blocklength_for(0.25, f64::INFINITY).n, Some(1));
        assert_eq!(t.blocklength_for(0.5, 1e-3).n, None);
        // monotone in Pe and in R
        let n = |r: f64, pe: f64| t.blocklength_for(r, pe).n.unwrap_or(99);
        assert!(n(0.3, 0.01) >= n(0.3, 0.1));
        assert!(n(0.35, 0.05) >= n(0.3, 0.05));
    }

    #[test]
    fn fit_needs_three_points() {
        let w = make_bec(0.5).unwrap();
        let t = LevelTable::new(&w, 12, 2).unwrap();
        assert!(fit_scaling_exponent(&t, 0.05, &[0.3]).is_err());
        assert!(fit_scaling_exponent(&t, 0.05, &[0.6]).is_err());
    }
}
