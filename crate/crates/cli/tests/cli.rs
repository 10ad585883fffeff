use std::process::Command;

use clap::Parser;
use omegaz_cli::{run, ExperimentConfig, Format, Output};
use omegaz_core::records::{without_timing, Record};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_omegaz"))
}

fn parse(args: &[&str]) -> ExperimentConfig {
    ExperimentConfig::try_parse_from(std::iter::once("omegaz").chain(args.iter().copied())).unwrap()
}

fn record(args: &[&str]) -> Record {
    match run(&parse(args)).unwrap() {
        Output::Record(r) => *r,
        Output::Moments(_) => panic!("expected a record"),
    }
}

#[test]
fn oracle_small_case_is_exact() {
    let out = bin().args(["oracle", "--N", "3", "--z", "0", "--r-max", "2"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "oracle");
    assert_eq!(v["mean_exact"], "5/6");
    assert_eq!(v["central_moments_exact"][2], "17/36");
    assert_eq!(v["formula_variance_exact"], "17/36");
    assert_eq!(v["matches_formula"], true);
}

#[test]
fn report_round_trips_sweep_moments() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    let status = bin()
        .args(["sweep", "--n", "100000", "--z", "0.5", "--r-max", "4", "--cutoff-policy", "full"])
        .arg("--output")
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let Record::Sweep(sweep) = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
    else {
        panic!("not a sweep");
    };

    // independent recomputation straight from the stored histogram
    let nf = 100000f64;
    let center = (-0.5f64).exp() * nf.ln().ln();
    let var = (1.0 - 2.0 * 0.5 * (-0.5f64).exp()) * center;
    let total: u64 = sweep.histogram.iter().map(|(_, c)| c).sum();
    let expected: Vec<f64> = (1..=4)
        .map(|r| {
            let m: f64 = sweep
                .histogram
                .iter()
                .map(|(v, c)| c as f64 * (v as f64 - center).powi(r))
                .sum::<f64>()
                / total as f64;
            m / var.powf(r as f64 / 2.0)
        })
        .collect();

    let out = bin().args(["report", "--format", "csv", "--input"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,z,r,normalized_moment,gaussian_reference,abs_error"));
    let got: Vec<f64> =
        lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(got.len(), 4);
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() <= 1e-9 * e.abs().max(1.0), "{g} vs {e}");
    }
}

#[test]
fn config_errors_exit_2_with_json() {
    for args in [
        vec!["sweep", "--n", "100", "--z", "-1"],
        vec!["sweep", "--n", "100", "--z", "0", "--cutoff-policy", "bogus"],
        vec!["model-mc", "--N", "10", "--z", "0"],
        vec!["oracle", "--N", "3", "--z", "0", "--M", "2"],
        vec!["frobnicate"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let line = String::from_utf8(out.stderr).unwrap();
        let v: Value = serde_json::from_str(line.trim()).unwrap();
        assert!(v["error"].is_string() && v["message"].is_string(), "{args:?}");
    }
}

#[test]
fn resource_caps_exit_3() {
    for args in [
        vec!["sweep", "--n", "10000000000000", "--z", "0"],
        vec!["sieve-check", "--n", "10000000000", "--z", "0", "--primes", "2"],
        vec!["model-exact", "--N", "1000000", "--z", "2"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        let v: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(v["error"], "resource-cap");
    }
}

#[test]
fn report_rejects_other_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.json");
    let status = bin()
        .args(["oracle", "--N", "5", "--z", "0", "--output"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let out = bin().args(["report", "--input"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sieve_check_linked_pair_is_zero() {
    let Record::SieveCheck(r) =
        record(&["sieve-check", "--n", "100000", "--z", "0.6931471805599453", "--primes", "3,5"])
    else {
        panic!()
    };
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].linked);
    assert_eq!(r.rows[0].count, 0);
    assert_eq!(r.rows[0].predicted, 0.0);
}

#[test]
fn model_mc_is_seed_deterministic() {
    let args = ["model-mc", "--N", "100", "--z", "0.5", "--seed", "7", "--trials", "5000"];
    let a = run(&parse(&args)).unwrap().render(Format::Json).unwrap();
    let b = run(&parse(&args)).unwrap().render(Format::Json).unwrap();
    assert_eq!(without_timing(&a).unwrap(), without_timing(&b).unwrap());
    let other = ["model-mc", "--N", "100", "--z", "0.5", "--seed", "8", "--trials", "5000"];
    let c = run(&parse(&other)).unwrap().render(Format::Json).unwrap();
    assert_ne!(without_timing(&a).unwrap(), without_timing(&c).unwrap());
}

#[test]
fn prime_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("primes.bin");
    let c = cache.to_str().unwrap();
    let a = record(&["model-exact", "--N", "50", "--z", "0.5", "--prime-cache", c]);
    assert!(cache.exists());
    let b = record(&["model-exact", "--N", "50", "--z", "0.5", "--prime-cache", c]);
    let (Record::ModelExact(a), Record::ModelExact(b)) = (a, b) else { panic!() };
    assert_eq!(a.c_n, b.c_n);
    assert_eq!(a.s2_n, b.s2_n);
}

#[test]
fn csv_formats_have_headers() {
    let cases: [(&[&str], &str); 3] = [
        (&["stein", "--N", "7", "--z", "0"], "b,cdf,phi,gap"),
        (&["sieve-check", "--n", "1000", "--z", "0", "--primes", "2,11"], "p1,p2,p3,z,n,"),
        (&["model-exact", "--N", "100", "--z", "0"], "n,z,r,normalized_moment"),
    ];
    for (args, header) in cases {
        let text = run(&parse(args)).unwrap().render(Format::Csv).unwrap();
        assert!(text.starts_with(header), "{args:?}: {text}");
    }
}
