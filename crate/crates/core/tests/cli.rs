use std::collections::HashMap;
use std::fs;
use std::process::Command;

use spherical_uniformity::cli::{run, EXIT_ERROR, EXIT_OK, EXIT_REJECT, EXIT_USAGE};
use spherical_uniformity::sphere::write_csv;
use spherical_uniformity::{sample, ModelSpec, RngSeed};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sphere-unif").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn fields(line: &str) -> HashMap<String, String> {
    line.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn config_path(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn test_command_on_null_sample() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("null.csv");
    let s = sample(&ModelSpec::Uniform { p: 80 }, 80, RngSeed::new(3, 0)).unwrap();
    write_csv(&s, fs::File::create(&data).unwrap()).unwrap();
    let (code, out, _) = call(&["test", "--data", data.to_str().unwrap(), "--alpha", "0.05"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    for l in lines {
        let f = fields(l);
        let pv: f64 = f["p_value"].parse().unwrap();
        assert!(pv > 0.0 && pv < 1.0, "{l}");
    }
}

#[test]
fn identical_rows_reject() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("same.csv");
    fs::write(&data, "1,0,0\n1,0,0\n1,0,0\n1,0,0\n").unwrap();
    let out_csv = dir.path().join("res.csv");
    let (code, out, _) = call(&[
        "--out",
        out_csv.to_str().unwrap(),
        "test",
        "--data",
        data.to_str().unwrap(),
        "--method",
        "sup_distance",
        "--exit-on-reject",
    ]);
    assert_eq!(code, EXIT_REJECT);
    let f = fields(out.trim());
    assert_eq!(f["statistic"].parse::<f64>().unwrap(), 1.0);
    assert_eq!(f["reject"], "true");
    let csv = fs::read_to_string(out_csv).unwrap();
    assert!(csv.starts_with("method,statistic,"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn non_unit_rows_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("raw.csv");
    fs::write(&data, "1,0,0\n0,1,0\n0,2,0\n").unwrap();
    let (code, _, err) = call(&["test", "--data", data.to_str().unwrap()]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("row 2"), "{err}");
    let (code, _, _) = call(&["test", "--data", data.to_str().unwrap(), "--normalize"]);
    assert_eq!(code, EXIT_OK);
}

#[test]
fn unknown_flag_is_usage_error() {
    let (code, _, err) = call(&["test", "--bogus"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"));
    let (code, out, _) = call(&["power", "--help"]);
    assert_eq!(code, EXIT_OK);
    for flag in ["--config", "--svg", "--seed", "--threads", "--out"] {
        assert!(out.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn predict_null_shift_is_alpha() {
    let (code, out, _) = call(&["predict", "--shift", "quadratic", "--tau", "0"]);
    assert_eq!(code, EXIT_OK);
    let power: f64 = fields(out.trim())["power"].parse().unwrap();
    assert!((power - 0.05).abs() <= 0.01, "{power}");
}

#[test]
fn distance_fvml_quadrature() {
    let (code, out, _) = call(&[
        "distance", "--model", "fvml", "--tau", "1", "--n", "1000", "--p", "1000", "--mode", "quadrature",
    ]);
    assert_eq!(code, EXIT_OK);
    let nd: f64 = fields(out.trim())["nd"].parse().unwrap();
    assert!((nd - 0.3989).abs() / 0.3989 < 0.10, "{nd}");
}

#[test]
fn power_is_reproducible_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    fs::write(
        &cfg,
        r#"{"n": 30, "p": 30, "reps": 200, "model_family": {"family": "fvml"},
            "signal_grid": [0.0, 1.0, 2.0, 3.0], "methods": ["sup_distance", "rayleigh"]}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let svg = dir.path().join("a.svg");
    for (path, threads) in [(&a, "1"), (&b, "2")] {
        let (code, out, _) = call(&[
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
            "power",
            "--config",
            cfg.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(fields(out.trim())["seed"], "7");
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let rates: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| l.contains(",sup_distance,"))
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 4);
    assert!(rates.windows(2).all(|w| w[1] >= w[0] - 0.03), "{rates:?}");
    assert!(rates[3] > rates[0] + 0.2);
}

#[test]
fn shipped_configs_parse() {
    for name in ["fvml_fig1.json", "watson_fig2.json"] {
        let c = spherical_uniformity::harness::load_config(config_path(name)).unwrap();
        c.validate().unwrap();
    }
}

#[test]
fn size_nulldist_calibrate_nonlocal_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n": 20, "p": 20, "reps": 200, "model_family": {"family": "watson"}}"#).unwrap();
    let (code, out, _) = call(&["size", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(fields(out.trim()).contains_key("sup_distance"));

    let (code, out, _) = call(&["nulldist", "--n", "20", "--p", "20", "--reps", "300"]);
    assert_eq!(code, EXIT_OK);
    assert!(fields(out.trim())["ks"].parse::<f64>().unwrap() < 0.1);

    let (code, out, _) = call(&["calibrate", "--n", "10", "--p", "10", "--reps", "1000"]);
    assert_eq!(code, EXIT_OK);
    assert!(fields(out.trim())["critical_value"].parse::<f64>().unwrap() > 0.0);
    let (code, _, err) = call(&["calibrate", "--n", "10", "--p", "10", "--reps", "10"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("1000"));

    let (code, out, err) = call(&["nonlocal", "--kind", "capmix", "--p", "800", "--n", "20", "--reps", "20"]);
    assert_eq!(code, EXIT_OK);
    let f = fields(out.trim());
    for m in ["sup_distance", "rayleigh", "bingham", "packing"] {
        assert!(f.contains_key(m));
    }
    assert!(err.contains("mean |R_n|"));
    let (code, _, _) = call(&["nonlocal", "--kind", "capmix", "--p", "100", "--n", "20"]);
    assert_eq!(code, EXIT_ERROR);
}

#[test]
fn binary_exit_codes_and_env_seed() {
    let bin = env!("CARGO_BIN_EXE_sphere-unif");
    let st = Command::new(bin).args(["predict", "--nope"]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_USAGE));
    let run = |env: Option<&str>| {
        let mut c = Command::new(bin);
        c.args(["predict", "--shift", "fvml", "--tau", "1", "--reps", "1000"]);
        c.env_remove("SPHERE_UNIF_SEED");
        if let Some(s) = env {
            c.env("SPHERE_UNIF_SEED", s);
        }
        let o = c.output().unwrap();
        assert!(o.status.success());
        String::from_utf8(o.stdout).unwrap()
    };
    let a = run(Some("5"));
    assert!(a.contains("seed=5"));
    assert_eq!(a, run(Some("5")));
    assert!(run(None).contains("seed=0"));
}
