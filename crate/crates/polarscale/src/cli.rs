//! Command-line front end. Every run prints (or writes) a JSON document holding the result
//! and a manifest from which the run can be replayed bit for bit.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bound::{self, TestFunction};
use crate::channel::BmsChannel;
use crate::construction::{self, LevelTable, SelectionKey};
use crate::poly::{self, CertMethod};
use crate::{bec, maps, scaling, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

pub const OUT_DIR_ENV: &str = "POLARSCALE_OUT";

#[derive(Parser, Debug)]
#[command(name = "polarscale", version, about = "Finite-length scaling of polar codes")]
struct Cli {
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// worker threads; results do not depend on this
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// also write <subcommand>.json and <subcommand>.csv here
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// print the CSV table instead of JSON (falls back to JSON when there is none)
    #[arg(long, global = true, conflicts_with = "json")]
    csv: bool,
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Subdominant eigenvalues of the discretized BEC operator
    Eig(EigArgs),
    /// Exact Pr(Z_n ∈ [a, b]) for the BEC
    Pn(PnArgs),
    /// Fixed point q(z) and 1/μ, optionally the c(a, b) fit
    Qfit(QfitArgs),
    /// Certified a_m = inf f_{m+1}/f_m
    Am(AmArgs),
    /// Certified b_m = sup f_{m+1}/f_m for a test function
    Bm(BmArgs),
    /// Certified L_g for a test function
    Lg(LgArgs),
    /// Lower bound on μ from a_m
    MuLower(MuArgs),
    /// Concavity certificate for f_m
    Concave(ConcaveArgs),
    /// Threshold points of random words and their KS distance to uniform
    Threshold(ThresholdArgs),
    /// Monte Carlo mean log-length of preimages
    Loglen(LoglenArgs),
    /// Decay rate of the mean preimage length
    Intdecay(IntdecayArgs),
    /// Subchannel parameters and a code selection
    Construct(ConstructArgs),
    /// Fit of log₂ N* against log₂ 1/(I − R)
    Scalingfit(ScalingfitArgs),
    /// Rate cap lower-bound certificate and its exhaustive check
    Thm3(Thm3Args),
    /// Blocklength upper-bound recipe and its check against a construction
    Thm4(Thm4Args),
    /// Auxiliary inequality checks
    Auxcheck(AuxArgs),
    /// Curve bundles for re-plotting
    Figures(FigureArgs),
}

#[derive(Args, Debug, Serialize)]
struct EigArgs {
    #[arg(short = 'L', long = "L")]
    l: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
}

#[derive(Args, Debug, Serialize)]
struct PnArgs {
    #[arg(long)]
    z: f64,
    #[arg(long, default_value_t = 0.1)]
    a: f64,
    #[arg(long, default_value_t = 0.9)]
    b: f64,
    #[arg(long)]
    n: u32,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Start {
    Indicator,
    Parabola,
}

#[derive(Args, Debug, Serialize)]
struct QfitArgs {
    #[arg(long, default_value_t = 100_000)]
    grid: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Start::Indicator)]
    start: Start,
    /// level for the c(a, b) fit; skipped when absent
    #[arg(long)]
    fit_n: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    a: f64,
    #[arg(long, default_value_t = 0.9)]
    b: f64,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Method {
    Sturm,
    Interval,
}

#[derive(Args, Debug, Serialize)]
struct AmArgs {
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 1e-4)]
    prec: f64,
    /// defaults to Sturm up to m = 6 and interval branch and bound above
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Args, Debug, Serialize)]
struct BmArgs {
    #[arg(long, value_parser = parse_test_function, default_value = "pow:2/3")]
    g: String,
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 1e-4)]
    prec: f64,
}

#[derive(Args, Debug, Serialize)]
struct LgArgs {
    #[arg(long, value_parser = parse_test_function, default_value = "univ")]
    g: String,
    #[arg(long, default_value_t = 1e-6)]
    prec: f64,
}

#[derive(Args, Debug, Serialize)]
struct MuArgs {
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 1e-4)]
    prec: f64,
}

#[derive(Args, Debug, Serialize)]
struct ConcaveArgs {
    #[arg(long)]
    m: u32,
}

#[derive(Args, Debug, Serialize)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 60)]
    depth: usize,
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct LoglenArgs {
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0.1)]
    a: f64,
    #[arg(long, default_value_t = 0.9)]
    b: f64,
}

#[derive(Args, Debug, Serialize)]
struct IntdecayArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    a: f64,
    #[arg(long, default_value_t = 0.9)]
    b: f64,
    /// Monte Carlo samples, used only above the exact-enumeration depth
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

fn parse_channel(s: &str) -> std::result::Result<String, String> {
    s.parse::<BmsChannel>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn parse_test_function(s: &str) -> std::result::Result<String, String> {
    s.parse::<TestFunction>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Key {
    E,
    Z,
    H,
}

impl From<Key> for SelectionKey {
    fn from(k: Key) -> Self {
        match k {
            Key::E => SelectionKey::E,
            Key::Z => SelectionKey::Z,
            Key::H => SelectionKey::H,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ConstructArgs {
    #[arg(long, value_parser = parse_channel)]
    channel: String,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    rate: f64,
    /// support size kept by the degrading merge after each split
    #[arg(long, default_value_t = 64)]
    quant: usize,
    #[arg(long, value_enum, default_value_t = Key::E)]
    key: Key,
}

#[derive(Args, Debug, Serialize)]
struct ScalingfitArgs {
    #[arg(long, value_parser = parse_channel, default_value = "bec:0.5")]
    channel: String,
    #[arg(long, default_value_t = 0.05)]
    pe: f64,
    /// smallest rate of the grid; I − 0.2 when absent
    #[arg(long)]
    rmin: Option<f64>,
    /// largest rate of the grid; I − 0.02 when absent
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, default_value_t = 20)]
    nmax: u32,
    #[arg(long, default_value_t = 32)]
    quant: usize,
}

#[derive(Args, Debug, Serialize)]
struct Thm3Args {
    #[arg(long, value_parser = parse_channel, default_value = "bec:0.5")]
    channel: String,
    #[arg(long, default_value_t = 10)]
    m: u32,
    /// the certificate is evaluated here and checked exhaustively for levels m…n
    #[arg(long, default_value_t = 20)]
    n: u32,
    #[arg(long, default_value_t = 1e-4)]
    prec: f64,
    #[arg(long, default_value_t = 32)]
    quant: usize,
}

#[derive(Args, Debug, Serialize)]
struct Thm4Args {
    #[arg(long, value_parser = parse_channel, default_value = "bec:0.5")]
    channel: String,
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    pe: f64,
    #[arg(long, default_value_t = scaling::UNIVERSAL_RHO)]
    rho: f64,
    #[arg(long, default_value_t = scaling::UNIVERSAL_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = scaling::UNIVERSAL_BETA)]
    beta: f64,
    /// depth of the construction the bound is checked against
    #[arg(long, default_value_t = 16)]
    nmax: u32,
    #[arg(long, default_value_t = 32)]
    quant: usize,
}

#[derive(Args, Debug, Serialize)]
struct AuxArgs {
    #[arg(long, value_parser = parse_channel, default_value = "bec:0.5")]
    channel: String,
    #[arg(long, default_value_t = 15)]
    nmax: u32,
    #[arg(long, default_value_t = 32)]
    quant: usize,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig5,
}

#[derive(Args, Debug, Serialize)]
struct FigureArgs {
    #[arg(value_enum)]
    which: Figure,
    /// deepest level plotted (fig1 default 30, fig2 default 10, fig5 fit level default 16)
    #[arg(long)]
    nmax: Option<u32>,
    #[arg(long, default_value_t = 32)]
    quant: usize,
    #[arg(long, default_value_t = 100_000)]
    grid: usize,
}

/// Everything needed to replay a run. Equal manifests (ignoring `wall_clock_s`) give
/// byte-identical `result` payloads, so `digest` doubles as a regression key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: Value,
    pub seed: u64,
    pub version: String,
    pub threads: Option<usize>,
    pub wall_clock_s: f64,
    /// FNV-1a of the compact JSON result, and of the CSV when one was produced
    pub digest: String,
    pub csv_digest: Option<String>,
}

/// Output of one subcommand before serialization.
struct Outcome {
    result: Value,
    csv: Option<String>,
    /// Some(false) turns into exit code 2
    passed: Option<bool>,
}

impl Outcome {
    fn value(result: impl Serialize) -> Result<Self> {
        Ok(Outcome { result: to_json(result)?, csv: None, passed: None })
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    fn check(mut self, passed: bool) -> Self {
        self.passed = Some(passed);
        self
    }
}

fn to_json(v: impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn csv_table<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn channel(s: &str) -> Result<BmsChannel> {
    s.parse()
}

fn test_function(s: &str) -> Result<TestFunction> {
    s.parse()
}

fn eig(a: &EigArgs) -> Result<Outcome> {
    let s = bec::subdominant_eigenvalues(a.l, a.k)?;
    Outcome::value(json!({
        "spectrum": s,
        "lambda2": s.subdominant.first(),
        "lambda3": s.subdominant.get(1),
        "tolerance": bec::EIG_TOL,
    }))
}

fn pn(a: &PnArgs) -> Result<Outcome> {
    let count = bec::count_in_interval(a.z, a.a, a.b, a.n)?;
    let p = bec::prob_in_interval(a.z, a.a, a.b, a.n)?;
    Outcome::value(json!({ "value": p, "count": count, "total": (a.n as f64).exp2(), "exact": true }))
}

fn qfit(a: &QfitArgs) -> Result<Outcome> {
    let start = match a.start {
        Start::Indicator => bec::QStart::Indicator,
        Start::Parabola => bec::QStart::Parabola,
    };
    let q = bec::iterate_q(a.grid, a.tol, start)?;
    let fit = a.fit_n.map(|n| bec::fit_c_ab(&q, a.a, a.b, n)).transpose()?;
    let curve = (0..=200).map(|k| {
        let z = k as f64 / 200.0;
        (z, q.eval(z))
    });
    let csv = csv_table(&["z", "q"], curve)?;
    Outcome::value(json!({
        "rate": q.rate,
        "mu": q.mu(),
        "qhat_half": q.qhat_half,
        "intervals": q.intervals,
        "iterations": q.iterations,
        "last_change": q.last_change,
        "tolerance": a.tol,
        "c_fit": fit.map(|f| json!({ "a": f.a, "b": f.b, "n": f.n, "c": f.c, "rms_residual": f.rms_residual })),
    }))
    .map(|o| o.with_csv(csv))
}

fn am(a: &AmArgs) -> Result<Outcome> {
    let cert = match a.method {
        None => poly::infimum_ratio(a.m, a.prec)?,
        Some(Method::Sturm) => poly::infimum_ratio_with(a.m, a.prec, CertMethod::Sturm)?,
        Some(Method::Interval) => poly::infimum_ratio_with(a.m, a.prec, CertMethod::IntervalBranchBound)?,
    };
    let s = cert.summary();
    Outcome::value(json!({
        "m": a.m,
        "interval": [s.lo, s.hi],
        "log2": [s.lo.log2(), s.hi.log2()],
        "certificate": s,
    }))
}

fn enclosure_json(e: &bound::SupEnclosure, g: &TestFunction) -> Value {
    json!({
        "g": g.to_string(),
        "interval": [e.lo, e.hi],
        "log2": [e.lo.log2(), e.hi.log2()],
        "enclosure": e,
    })
}

fn bm(a: &BmArgs) -> Result<Outcome> {
    let g = test_function(&a.g)?;
    let e = bound::sup_ratio_bec(&g, a.m, a.prec)?;
    let mut v = enclosure_json(&e, &g);
    v["m"] = json!(a.m);
    Outcome::value(v)
}

fn lg(a: &LgArgs) -> Result<Outcome> {
    let g = test_function(&a.g)?;
    let e = bound::compute_lg(&g, a.prec)?;
    Outcome::value(enclosure_json(&e, &g))
}

fn mu_lower(a: &MuArgs) -> Result<Outcome> {
    Outcome::value(poly::mu_lower(a.m, a.prec)?)
}

fn concave(a: &ConcaveArgs) -> Result<Outcome> {
    let c = poly::certify_concavity_detail(a.m)?;
    let ok = c.concave;
    Ok(Outcome::value(c)?.check(ok))
}

fn threshold(a: &ThresholdArgs, seed: u64) -> Result<Outcome> {
    let t = maps::threshold_sample(a.depth, a.samples, a.tol, seed)?;
    let csv = csv_table(&["sample", "z"], t.points.iter().enumerate())?;
    Outcome::value(json!({
        "n": t.n,
        "tol": t.tol,
        "samples": a.samples,
        "polarized": t.points.len(),
        "not_polarized": t.not_polarized,
        "ks": t.ks,
    }))
    .map(|o| o.with_csv(csv))
}

fn loglen(a: &LoglenArgs, seed: u64) -> Result<Outcome> {
    let l = maps::estimate_log_length(a.n, a.samples, a.a, a.b, seed)?;
    let e = maps::ergodic_closed_form();
    Outcome::value(json!({ "estimate": l, "closed_form": e.value, "quadrature": e.quadrature_sum() }))
}

fn intdecay(a: &IntdecayArgs, seed: u64) -> Result<Outcome> {
    let d = maps::integral_decay_check(a.n, a.a, a.b, a.samples, seed)?;
    Outcome::value(json!({ "decay": d, "holds": d.holds(0.0) }))
}

fn construct(a: &ConstructArgs) -> Result<Outcome> {
    let w = channel(&a.channel)?;
    let records = construction::subchannel_params(&w, a.n, a.quant)?;
    let sel = construction::good_indices(&records, a.rate, a.key.into())?;
    let chosen: std::collections::HashSet<u64> = sel.indices.iter().copied().collect();
    let csv = csv_table(
        &["index", "h", "z", "e", "delta_h", "selected"],
        records.iter().map(|r| (r.index, r.h, r.z, r.e, r.delta_h, chosen.contains(&r.index) as u8)),
    )?;
    let max_dh = records.iter().map(|r| r.delta_h).fold(0.0, f64::max);
    Outcome::value(json!({ "channel": w.params(), "selection": sel, "max_delta_h": max_dh })).map(|o| o.with_csv(csv))
}

fn scalingfit(a: &ScalingfitArgs) -> Result<Outcome> {
    let w = channel(&a.channel)?;
    let cap = w.params().capacity;
    let gap_max = cap - a.rmin.unwrap_or(cap - 0.2);
    let gap_min = cap - a.rmax.unwrap_or(cap - 0.02);
    if !(gap_min > 0.0 && gap_min < gap_max) {
        return Err(Error::Constraint(format!("need rmin < rmax < I(W) = {cap}")));
    }
    let table = LevelTable::new(&w, a.nmax, a.quant)?;
    let rates = construction::gap_grid(cap, gap_min, gap_max, a.points);
    let fit = construction::fit_scaling_exponent(&table, a.pe, &rates)?;
    let csv = csv_table(&["gap", "log2_inv_gap", "n_star"], fit.points.iter().map(|&(g, n)| (g, (1.0 / g).log2(), n)))?;
    Outcome::value(json!({ "fit": fit, "capacity": cap, "max_delta_h": table.delta_h.last() })).map(|o| o.with_csv(csv))
}

fn thm3(a: &Thm3Args) -> Result<Outcome> {
    let w = channel(&a.channel)?;
    let cert = scaling::LowerBoundCert::new(&w, a.m, a.prec)?;
    let cap = scaling::theorem3_rate_cap(&cert, a.n)?;
    let table = LevelTable::with_key(&w, a.n, a.quant, SelectionKey::E)?;
    let check = scaling::theorem3_check(&table, &cert)?;
    let ok = check.violations == 0;
    let csv = csv_table(&["n", "min_sum_e", "pe_floor", "slack", "holds"], check.rows.iter().map(|r| (r.n, r.value, r.bound, r.slack, r.holds)))?;
    Outcome::value(json!({
        "certificate": cert,
        "rate_cap": cap,
        "check": check,
        "formulas": {
            "theta": "-log2 a_m (lower end)",
            "gamma": "2^(m theta) f_m(H(W))",
            "rate_cap": "I(W) - gamma 2^(-n theta)",
        },
    }))
    .map(|o| o.with_csv(csv).check(ok))
}

fn thm4(a: &Thm4Args) -> Result<Outcome> {
    let w = channel(&a.channel)?;
    let cert = scaling::theorem4_blocklength(&w, a.rate, a.pe, a.rho, a.beta, a.alpha)?;
    let table = LevelTable::with_key(&w, a.nmax, a.quant, SelectionKey::Z)?;
    let check = scaling::theorem4_check(&table, &cert)?;
    let ok = check.holds;
    Outcome::value(json!({
        "certificate": cert,
        "check": check,
        "formulas": {
            "d": "I(W) - R",
            "n0": "ceil(log2(3(1 + c1)(1 + 2 c2 c3 beta) / d) / rho)",
            "n1": "least n1 with n1 - (1 + log2 log2(2/Pe) + log2(n0 + n1)) log2 n1 >= log2(6/d)",
            "log2_N": "n0 + n1",
        },
    }))
    .map(|o| o.check(ok))
}

fn auxcheck(a: &AuxArgs, seed: u64) -> Result<Outcome> {
    let w = channel(&a.channel)?;
    let r = scaling::aux_lemmas_check(&w, a.nmax, a.quant, seed)?;
    let ok = r.violations == 0;
    Ok(Outcome::value(r)?.check(ok))
}

fn figures(a: &FigureArgs) -> Result<Outcome> {
    let (lo, hi) = (0.1, 0.9);
    match a.which {
        Figure::Fig1 => {
            let levels: Vec<u32> = (1..=a.nmax.unwrap_or(30)).collect();
            let mut rows = Vec::new();
            for z in [0.5, 0.6, 0.7] {
                for (n, v) in bec::log_prob_curve(z, lo, hi, &levels)? {
                    rows.push((format!("bec:{z}"), n, v));
                }
            }
            figure_outcome(rows)
        }
        Figure::Fig2 => {
            let n_max = a.nmax.unwrap_or(10);
            let names = ["bsc:0.11", "bsc:0.146", "bsc:0.189", "bawgn:0.978", "bawgn:1.149", "bawgn:1.386"];
            let mut rows = Vec::new();
            for name in names {
                let w = channel(name)?;
                let mut inside = vec![0u64; n_max as usize + 1];
                construction::for_each_subchannel(&w, n_max, a.quant, |n, r| {
                    if (lo..=hi).contains(&r.z) {
                        inside[n as usize] += 1;
                    }
                })?;
                for n in 1..=n_max {
                    let p = inside[n as usize] as f64 / (n as f64).exp2();
                    rows.push((name.to_string(), n, p.log2() / n as f64));
                }
            }
            figure_outcome(rows)
        }
        Figure::Fig3 => {
            let q = bec::iterate_q(a.grid, 1e-10, bec::QStart::Indicator)?;
            let rows: Vec<(String, f64, f64)> = (0..=200).map(|k| k as f64 / 200.0).map(|z| ("q".to_string(), z, q.eval(z))).collect();
            let csv = csv_table(&["series", "z", "value"], &rows)?;
            Outcome::value(json!({ "points": rows.len(), "rate": q.rate, "q_half": q.eval(0.5) })).map(|o| o.with_csv(csv))
        }
        Figure::Fig5 => {
            let q = bec::iterate_q(a.grid, 1e-10, bec::QStart::Indicator)?;
            let fit = bec::fit_c_ab(&q, lo, hi, a.nmax.unwrap_or(16))?;
            let csv = csv_table(&["z", "scaled_p", "q", "c_q"], fit.samples.iter().map(|s| (s.0, s.1, s.2, fit.c * s.2)))?;
            Outcome::value(json!({ "a": fit.a, "b": fit.b, "n": fit.n, "c": fit.c, "rms_residual": fit.rms_residual }))
                .map(|o| o.with_csv(csv))
        }
    }
}

fn figure_outcome(rows: Vec<(String, u32, f64)>) -> Result<Outcome> {
    let csv = csv_table(&["series", "n", "value"], &rows)?;
    let mut series: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    series.dedup();
    Outcome::value(json!({ "series": series, "points": rows.len() })).map(|o| o.with_csv(csv))
}

fn dispatch(cmd: &Command, seed: u64) -> Result<(&'static str, Value, Outcome)> {
    macro_rules! go {
        ($name:literal, $a:expr, $call:expr) => {
            ($name, to_json($a)?, $call?)
        };
    }
    Ok(match cmd {
        Command::Eig(a) => go!("eig", a, eig(a)),
        Command::Pn(a) => go!("pn", a, pn(a)),
        Command::Qfit(a) => go!("qfit", a, qfit(a)),
        Command::Am(a) => go!("am", a, am(a)),
        Command::Bm(a) => go!("bm", a, bm(a)),
        Command::Lg(a) => go!("lg", a, lg(a)),
        Command::MuLower(a) => go!("mu-lower", a, mu_lower(a)),
        Command::Concave(a) => go!("concave", a, concave(a)),
        Command::Threshold(a) => go!("threshold", a, threshold(a, seed)),
        Command::Loglen(a) => go!("loglen", a, loglen(a, seed)),
        Command::Intdecay(a) => go!("intdecay", a, intdecay(a, seed)),
        Command::Construct(a) => go!("construct", a, construct(a)),
        Command::Scalingfit(a) => go!("scalingfit", a, scalingfit(a)),
        Command::Thm3(a) => go!("thm3", a, thm3(a)),
        Command::Thm4(a) => go!("thm4", a, thm4(a)),
        Command::Auxcheck(a) => go!("auxcheck", a, auxcheck(a, seed)),
        Command::Figures(a) => go!("figures", a, figures(a)),
    })
}

fn execute(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let (name, params, out) = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Constraint(e.to_string()))?
            .install(|| dispatch(&cli.command, cli.seed))?,
        None => dispatch(&cli.command, cli.seed)?,
    };
    let digest = format!("{:016x}", fnv1a(out.result.to_string().as_bytes()));
    let manifest = RunManifest {
        subcommand: name.into(),
        params,
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        threads: cli.threads,
        wall_clock_s: start.elapsed().as_secs_f64(),
        digest,
        csv_digest: out.csv.as_ref().map(|c| format!("{:016x}", fnv1a(c.as_bytes()))),
    };
    let doc = json!({ "manifest": manifest, "result": out.result });
    let pretty = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(dir) = &cli.out_dir {
        let io = |e: std::io::Error| Error::Constraint(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join(format!("{name}.json")), &pretty).map_err(io)?;
        if let Some(c) = &out.csv {
            std::fs::write(dir.join(format!("{name}.csv")), c).map_err(io)?;
        }
    }
    match (&out.csv, cli.csv) {
        (Some(c), true) => print!("{c}"),
        _ => println!("{pretty}"),
    }
    Ok(match out.passed {
        Some(false) => EXIT_CHECK_FAILED,
        _ => EXIT_OK,
    })
}

/// Parses `args` (program name first) and runs the subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
