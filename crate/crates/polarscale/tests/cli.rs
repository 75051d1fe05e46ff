use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polarscale"));
    c.env_remove("POLARSCALE_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn polarscale")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polarscale-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn am_zero_encloses_three_quarters() {
    let v = json(&["am", "--m", "0", "--prec", "1e-6"]);
    let iv = v["result"]["interval"].as_array().unwrap();
    let (lo, hi) = (iv[0].as_f64().unwrap(), iv[1].as_f64().unwrap());
    assert!(lo <= 0.75 && 0.75 <= hi && hi - lo <= 1e-6);
    assert_eq!(v["manifest"]["subcommand"], "am");
    assert_eq!(v["manifest"]["params"]["m"], 0);
}

#[test]
fn eig_reports_lambda2() {
    let v = json(&["eig", "--L", "1000", "--k", "3"]);
    let l2 = v["result"]["lambda2"].as_f64().unwrap();
    assert!((l2 - 0.8227).abs() < 1e-3, "{l2}");
    assert_eq!(v["result"]["spectrum"]["subdominant"].as_array().unwrap().len(), 3);
}

#[test]
fn pn_at_level_zero_is_one() {
    let v = json(&["pn", "--z", "0.5", "--a", "0.1", "--b", "0.9", "--n", "0"]);
    assert_eq!(v["result"]["value"].as_f64(), Some(1.0));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["construct", "--channel", "bec:1.5", "--n", "3", "--rate", "0.5"][..],
        &["construct", "--channel", "awgn:0.5", "--n", "3", "--rate", "0.5"],
        &["pn", "--z", "0.5", "--n", "2", "--frobnicate"],
        &["bm", "--g", "pow:", "--m", "1"],
        &["figures", "fig4"],
        &[],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one() {
    // a > b is rejected by the library, not by the parser
    let out = run(&["pn", "--z", "0.5", "--a", "0.9", "--b", "0.1", "--n", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid interval"));
}

#[test]
fn replay_is_bit_identical_and_thread_independent() {
    let args = ["threshold", "--samples", "500", "--depth", "40", "--seed", "9"];
    let a = json(&args);
    let b = json(&[&args[..], &["--threads", "2"]].concat());
    let c = json(&["threshold", "--samples", "500", "--depth", "40", "--seed", "10"]);
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["manifest"]["digest"], b["manifest"]["digest"]);
    assert_eq!(a["manifest"]["csv_digest"], b["manifest"]["csv_digest"]);
    assert_ne!(a["manifest"]["csv_digest"], c["manifest"]["csv_digest"]);
    assert_eq!(b["manifest"]["threads"], 2);
}

#[test]
fn csv_selector_prints_records() {
    let out = run(&["construct", "--channel", "bec:0.5", "--n", "3", "--rate", "0.5", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,h,z,e,delta_h,selected");
    assert_eq!(lines.len(), 9);
    let selected: usize = lines[1..].iter().filter(|l| l.ends_with(",1")).count();
    assert_eq!(selected, 4);
    // index 7 is the all-good path, z = 0.5^8
    assert!(lines[8].starts_with("7,"));
}

#[test]
fn out_dir_from_flag_and_env() {
    let dir = scratch("flag");
    let out = run(&["figures", "fig1", "--nmax", "6", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("figures.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["points"], 18);
    let csv = std::fs::read_to_string(dir.join("figures.csv")).unwrap();
    assert_eq!(csv.lines().count(), 19);
    assert!(csv.contains("bec:0.7,6,"));

    let dir = scratch("env");
    let out = bin().args(["pn", "--z", "0.3", "--n", "4"]).env("POLARSCALE_OUT", &dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("pn.json").exists());
    assert!(!dir.join("pn.csv").exists());
}

#[test]
fn check_commands_pass_on_small_instances() {
    let v = json(&["thm3", "--channel", "bec:0.5", "--m", "2", "--n", "12"]);
    assert_eq!(v["result"]["check"]["violations"], 0);
    let v = json(&["thm4", "--channel", "bec:0.5", "--rate", "0.4", "--pe", "0.1", "--nmax", "14"]);
    assert_eq!(v["result"]["check"]["holds"], true);
    assert_eq!(v["result"]["check"]["found"], 13);
    let v = json(&["concave", "--m", "5"]);
    assert_eq!(v["result"]["concave"], true);
}

#[test]
fn fig3_curve_is_normalized_at_one_half() {
    let out = run(&["figures", "fig3", "--grid", "20000", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mid = text.lines().find(|l| l.starts_with("q,0.5,")).unwrap();
    let q: f64 = mid.rsplit(',').next().unwrap().parse().unwrap();
    assert!((q - 1.0).abs() < 1e-9, "{q}");
}
