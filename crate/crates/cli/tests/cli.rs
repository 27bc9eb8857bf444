use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ace_core::net::fixtures::{constant_net, decoupled_gru, linear_net, product_net, random_net};
use ace_core::regressor::RegressorDoc;
use ace_core::{Activation, Model, Network};
use tempfile::TempDir;

fn ace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ace")).args(args).output().expect("spawn ace")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn save_net(dir: &TempDir, name: &str, net: Network) -> PathBuf {
    let p = dir.path().join(name);
    Model::Mlp(net).save(&p).unwrap();
    p
}

fn save_text(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Product-net data: `x1` spans [0, 1], `x2` has mean 2.
fn product_data(dir: &TempDir) -> PathBuf {
    save_text(dir, "prod.csv", "x1,x2\n0,1\n1,3\n0.5,2\n0.25,2\n")
}

/// Data lines of a CSV, skipping `#` comments and the header.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn sweep_of_product_net_is_linear_in_alpha() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let out = dir.path().join("sweep.csv");
    let run = ace(&[
        "sweep", "--net", path_str(&net), "--data", path_str(&data), "--feature", "x1", "--num", "5", "--method",
        "exact", "--output", path_str(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let ie = column(&out, "interventional_expectation");
    assert_eq!(ie.len(), 5);
    for (got, want) in ie.iter().zip([0.0, 0.5, 1.0, 1.5, 2.0]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn oracle_and_exact_agree_on_quadratic_net() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "quad.json", random_net(&[3, 5, 1], Activation::Square, 11));
    let mut text = String::from("a,b,c\n");
    for r in 0..40 {
        let r = r as f64;
        text.push_str(&format!("{},{},{}\n", (r * 0.37).sin(), (r * 1.3).cos() * 2.0, r / 40.0));
    }
    let data = save_text(&dir, "quad.csv", &text);
    let run_with = |method: &str| {
        let out = dir.path().join(format!("{method}.csv"));
        let run = ace(&[
            "sweep", "--net", path_str(&net), "--data", path_str(&data), "--feature", "b", "--num", "7", "--method",
            method, "--output", path_str(&out),
        ]);
        assert!(run.status.success(), "{}", stderr(&run));
        column(&out, "interventional_expectation")
    };
    let (exact, oracle) = (run_with("exact"), run_with("oracle"));
    for (e, o) in exact.iter().zip(&oracle) {
        assert!((e - o).abs() < 1e-9, "{e} vs {o}");
    }
}

#[test]
fn missing_feature_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let run = ace(&[
        "sweep", "--net", path_str(&net), "--data", path_str(&data), "--num", "5", "--method", "exact", "--output",
        path_str(&dir.path().join("x.csv")),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("Usage"));
}

#[test]
fn unknown_feature_and_bad_grid_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let out = dir.path().join("x.csv");
    let unknown = ace(&[
        "sweep", "--net", path_str(&net), "--data", path_str(&data), "--feature", "nope", "--num", "5", "--method",
        "exact", "--output", path_str(&out),
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    let tiny = ace(&[
        "sweep", "--net", path_str(&net), "--data", path_str(&data), "--feature", "x1", "--num", "1", "--method",
        "exact", "--output", path_str(&out),
    ]);
    assert_eq!(tiny.status.code(), Some(2));
}

#[test]
fn file_and_parse_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let out = dir.path().join("x.csv");
    let missing = ace(&[
        "sweep", "--net", path_str(&net), "--data", "/nonexistent/data.csv", "--feature", "x1", "--num", "5",
        "--method", "exact", "--output", path_str(&out),
    ]);
    assert_eq!(missing.status.code(), Some(3));
    let garbled = save_text(&dir, "bad.json", "{\"type\": \"mlp\", \"layers\": [");
    let bad = ace(&[
        "sweep", "--net", path_str(&garbled), "--data", path_str(&data), "--feature", "x1", "--num", "5",
        "--method", "exact", "--output", path_str(&out),
    ]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains("reading network"));
}

#[test]
fn overflow_is_a_numerical_failure_naming_the_op() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "huge.json", linear_net(&[1e300, 0.0], 0.0));
    let data = save_text(&dir, "big.csv", "a,b\n1e10,0\n2e10,1\n");
    let run = ace(&[
        "sweep", "--net", path_str(&net), "--data", path_str(&data), "--feature", "b", "--num", "3", "--method",
        "exact", "--output", path_str(&dir.path().join("x.csv")),
    ]);
    assert_eq!(run.status.code(), Some(4), "{}", stderr(&run));
    assert!(stderr(&run).contains("sweep failed"));
}

#[test]
fn invalid_precision_is_ill_conditioned() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let run = ace(&[
        "ace", "--net", path_str(&net), "--data", path_str(&data), "--feature", "x1", "--num", "5", "--method",
        "exact", "--prior-precision", "-1", "--output", path_str(&dir.path().join("a.csv")),
    ]);
    assert_eq!(run.status.code(), Some(5), "{}", stderr(&run));
}

#[test]
fn ace_of_constant_net_vanishes() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "const.json", constant_net(2, 3.5));
    let data = product_data(&dir);
    let out = dir.path().join("ace.csv");
    let run = ace(&[
        "ace", "--net", path_str(&net), "--data", path_str(&data), "--feature", "x2", "--num", "10", "--method",
        "approx", "--output", path_str(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let aces = column(&out, "ace");
    assert_eq!(aces.len(), 10);
    assert!(aces.iter().all(|a| a.abs() < 1e-9), "{aces:?}");
}

#[test]
fn ace_of_product_net_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let out = dir.path().join("ace.csv");
    let run = ace(&[
        "ace", "--net", path_str(&net), "--data", path_str(&data), "--feature", "x1", "--num", "20", "--method",
        "exact", "--max-order", "4", "--alpha-at", "0", "0.3", "0.75", "1", "--output", path_str(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("# baseline=")).count(), 1);
    let baseline: f64 = text.lines().next().unwrap().trim_start_matches("# baseline=").parse().unwrap();
    assert!((baseline - 1.0).abs() < 1e-6);
    let (alphas, aces) = (column(&out, "alpha"), column(&out, "ace"));
    assert_eq!(alphas, vec![0.0, 0.3, 0.75, 1.0]);
    for (a, v) in alphas.iter().zip(&aces) {
        assert!((v - (2.0 * a - 1.0)).abs() < 1e-6, "ace({a}) = {v}");
    }
    let doc: RegressorDoc =
        serde_json::from_str(&fs::read_to_string(out.with_extension("regressor.json")).unwrap()).unwrap();
    assert_eq!(doc.order, 1);
    assert_eq!(doc.domain, [0.0, 1.0]);
}

#[test]
fn sparse_sweep_warns_about_predictive_variance() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let run = ace(&[
        "ace", "--net", path_str(&net), "--data", path_str(&data), "--feature", "x1", "--num", "3", "--method",
        "exact", "--max-order", "10", "--output", path_str(&dir.path().join("a.csv")),
    ]);
    assert!(run.status.success());
    assert!(stderr(&run).contains("high predictive variance"), "{}", stderr(&run));
}

#[test]
fn outputs_are_idempotent_and_inputs_untouched() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "quad.json", random_net(&[2, 4, 1], Activation::Tanh, 3));
    let data = product_data(&dir);
    let (net_before, data_before) = (fs::read(&net).unwrap(), fs::read(&data).unwrap());
    let run_to = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let run = Command::new(env!("CARGO_BIN_EXE_ace"))
            .env("ACE_THREADS", threads)
            .args([
                "sweep", "--net", path_str(&net), "--data", path_str(&data), "--feature", "x2", "--num", "30",
                "--method", "approx", "--output", path_str(&out),
            ])
            .output()
            .unwrap();
        assert!(run.status.success(), "{}", stderr(&run));
        fs::read(out).unwrap()
    };
    assert_eq!(run_to("a.csv", "1"), run_to("b.csv", "4"));
    assert_eq!(fs::read(&net).unwrap(), net_before);
    assert_eq!(fs::read(&data).unwrap(), data_before);
}

#[test]
fn bad_thread_count_is_rejected() {
    let run = Command::new(env!("CARGO_BIN_EXE_ace"))
        .env("ACE_THREADS", "zero")
        .args(["synth", "--n", "2", "--seed", "1", "--output", "/dev/null", "--labels", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn synth_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let gen = |tag: &str| {
        let (data, labels) = (dir.path().join(format!("s{tag}.csv")), dir.path().join(format!("l{tag}.csv")));
        let run = ace(&["synth", "--n", "1000", "--seed", "7", "--output", path_str(&data), "--labels", path_str(&labels)]);
        assert!(run.status.success(), "{}", stderr(&run));
        (fs::read(data).unwrap(), fs::read(labels).unwrap())
    };
    let first = gen("a");
    assert_eq!(first, gen("b"));
    let labels = String::from_utf8(first.1).unwrap();
    assert_eq!(labels.lines().count(), 1001);
}

#[test]
fn tau_of_decoupled_gru_is_zero() {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("gru.json");
    Model::Gru(decoupled_gru(1, 3, 5)).save(&net).unwrap();
    let (data, labels) = (dir.path().join("s.csv"), dir.path().join("l.csv"));
    assert!(ace(&["synth", "--n", "20", "--seed", "1", "--output", path_str(&data), "--labels", path_str(&labels)])
        .status
        .success());
    let run = ace(&["tau", "--net", path_str(&net), "--data", path_str(&data), "--step", "6"]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0");
}

#[test]
fn tau_rejects_feedforward_nets() {
    let dir = TempDir::new().unwrap();
    let net = save_net(&dir, "prod.json", product_net());
    let data = product_data(&dir);
    let run = ace(&["tau", "--net", path_str(&net), "--data", path_str(&data), "--step", "1"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn trained_toy_gru_saliency_concentrates_on_early_steps() {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name);
    let synth = ace(&["synth", "--n", "300", "--seed", "7", "--output", path_str(&p("s.csv")), "--labels", path_str(&p("l.csv"))]);
    assert!(synth.status.success());
    let train = ace(&[
        "train", "gru", "--data", path_str(&p("s.csv")), "--labels", path_str(&p("l.csv")), "--epochs", "200",
        "--output", path_str(&p("g.json")), "--log", path_str(&p("log.csv")),
    ]);
    assert!(train.status.success(), "{}", stderr(&train));
    assert_eq!(column(&p("log.csv"), "loss").len(), 200);
    let sal = ace(&[
        "saliency", "--net", path_str(&p("g.json")), "--data", path_str(&p("s.csv")), "--instance", "0", "--num",
        "20", "--method", "exact", "--out-step", "9", "--output", path_str(&p("sal.csv")), "--pgm",
        path_str(&p("sal.pgm")),
    ]);
    assert!(sal.status.success(), "{}", stderr(&sal));
    let map = column(&p("sal.csv"), "x");
    assert_eq!(map.len(), 10);
    let early = (map[0].abs() + map[1].abs()) / 2.0;
    let late = map[3..].iter().map(|v| v.abs()).sum::<f64>() / 7.0;
    assert!(late < 0.1 * early, "early {early}, late {late}");
    let pgm = fs::read_to_string(p("sal.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n1 10\n255\n"));
}

#[test]
fn trains_iris_classifier_with_normalized_copy() {
    let dir = TempDir::new().unwrap();
    let iris = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/iris.csv");
    let (net, norm) = (dir.path().join("iris.json"), dir.path().join("norm.csv"));
    let run = ace(&[
        "train", "mlp", "--data", iris, "--label-column", "species", "--hidden", "8", "--epochs", "50",
        "--normalize", path_str(&norm), "--output", path_str(&net),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("train accuracy"));
    let pw = column(&norm, "petal_width");
    assert_eq!(pw.len(), 150);
    assert!(pw.iter().all(|v| (0.0..=1.0).contains(v)));
    match Model::load(&net).unwrap() {
        Model::Mlp(n) => assert_eq!((n.input_dim(), n.output_dim()), (4, 3)),
        Model::Gru(_) => panic!("expected a feedforward net"),
    }
}
