use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixreg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = read_table(path);
    let j = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {h:?}"));
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Fixture {
        Fixture { dir: TempDir::new().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    fn simulate(&self, scenario: &str, n: usize) -> PathBuf {
        let out = self.path(&format!("{scenario}.csv"));
        ok(&["simulate", "--scenario", scenario, "--n", &n.to_string(), "--seed", "7", "--out", p(&out)]);
        out
    }

    fn fit(&self, data: &Path, spec: &Path, name: &str) -> PathBuf {
        let out = self.path(name);
        ok(&["fit", "--data", p(data), "--spec", p(spec), "--out", p(&out)]);
        out
    }
}

const TWO_NORMALS: &str = r#"{
  "response": "yn",
  "components": [
    {"family": "normal", "formulas": {"mean": "~1 + x", "scale": "~1"}},
    {"family": "normal", "formulas": {"mean": "~1 + x + xsq", "scale": "~1"}}
  ],
  "gating": "~1",
  "train": {"optimizer": {"name": "adam", "lr": 0.05}, "epochs": 40, "batch_size": 64, "validation_split": 0.1, "seed": 3}
}"#;

const ZINREG: &str = r#"{
  "response": "yn",
  "components": [
    {"family": "pointmass", "at": 0},
    {"family": "normal", "formulas": {"mean": "~1 + x", "scale": "~1"}}
  ],
  "train": {"optimizer": {"name": "adam", "lr": 0.05}, "epochs": 60, "batch_size": 64, "seed": 1}
}"#;

#[test]
fn simulate_fit_round_trip() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 100);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let out = fx.path("model.json");
    let msg = ok(&["fit", "--data", p(&data), "--spec", p(&spec), "--out", p(&out)]);
    let loss: f64 = msg.split_whitespace().next().unwrap().trim_start_matches("train_loss=").parse().unwrap();
    assert!(loss.is_finite(), "{msg}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["version"], 1);
    assert!(json["theta"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap().is_finite()));
}

#[test]
fn fit_is_reproducible_for_a_seed() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 60);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let a = fx.fit(&data, &spec, "a.json");
    let b = fx.fit(&data, &spec, "b.json");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn seed_flag_overrides_spec() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 60);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let a = fx.path("a.json");
    let b = fx.path("b.json");
    ok(&["fit", "--data", p(&data), "--spec", p(&spec), "--out", p(&a), "--seed", "3"]);
    ok(&["fit", "--data", p(&data), "--spec", p(&spec), "--out", p(&b), "--seed", "4"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let base = fx.fit(&data, &spec, "base.json");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(base).unwrap());
}

#[test]
fn predict_matches_in_memory_model() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 50);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let model = fx.fit(&data, &spec, "model.json");
    let pred = fx.path("pred.csv");
    ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&pred)]);

    let (header, _) = read_table(&pred);
    assert_eq!(
        header,
        ["mean_1", "mean_2", "scale_1", "scale_2", "component_mean_1", "component_mean_2", "mixture_mean"]
    );
    let fitted = mixreg_cli::commands::load_fitted(&model, &data).unwrap();
    let means = fitted.model().component_means().unwrap();
    for m in 0..2 {
        let col = column(&pred, &format!("component_mean_{}", m + 1));
        for (i, v) in col.iter().enumerate() {
            assert_eq!(v.to_bits(), means[[i, m]].to_bits(), "row {i} component {}", m + 1);
        }
    }
    let mix = column(&pred, "mixture_mean");
    let gates = fitted.model().gating_weights(&fitted.model().all_rows()).unwrap();
    for i in 0..mix.len() {
        let direct = gates[[i, 0]] * means[[i, 0]] + gates[[i, 1]] * means[[i, 1]];
        assert!((mix[i] - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }
}

#[test]
fn predict_without_response_column() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 30);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let model = fx.fit(&data, &spec, "model.json");
    let x = column(&data, "x");
    let xsq = column(&data, "xsq");
    let mut text = String::from("x,xsq\n");
    for (a, b) in x.iter().zip(&xsq) {
        text.push_str(&format!("{a},{b}\n"));
    }
    let features = fx.write("features.csv", &text);
    let (a, b) = (fx.path("a.csv"), fx.path("b.csv"));
    ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&a)]);
    ok(&["predict", "--model", p(&model), "--data", p(&features), "--out", p(&b)]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn posterior_rows_sum_to_one() {
    let fx = Fixture::new();
    let data = fx.simulate("hetero", 50);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let model = fx.fit(&data, &spec, "model.json");
    let out = fx.path("post.csv");
    ok(&["posteriors", "--model", p(&model), "--data", p(&data), "--out", p(&out)]);
    let (header, rows) = read_table(&out);
    assert_eq!(header, ["pi_1", "pi_2"]);
    assert_eq!(rows.len(), 100);
    for r in rows {
        let s: f64 = r.iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() <= 1e-10, "{r:?}");
    }
}

#[test]
fn posteriors_need_the_response() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 20);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let model = fx.fit(&data, &spec, "model.json");
    let features = fx.write("f.csv", "x,xsq\n1,1\n2,4\n");
    let out = run(&["posteriors", "--model", p(&model), "--data", p(&features), "--out", p(&fx.path("o.csv"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn zero_inflated_stats_gate() {
    let fx = Fixture::new();
    let data = fx.simulate("zeroinf", 200);
    let zeros = column(&data, "yn").iter().filter(|&&v| v == 0.0).count();
    assert_eq!(zeros, 200);
    let spec = fx.write("spec.json", ZINREG);
    let model = fx.fit(&data, &spec, "model.json");
    let out = fx.path("stats.csv");
    ok(&["stats", "--model", p(&model), "--data", p(&data), "--out", p(&out)]);
    let (header, rows) = read_table(&out);
    assert_eq!(header, ["component", "family", "gate", "posterior", "expected_response", "mean", "scale"]);
    assert_eq!(rows[0][1], "pointmass");
    assert_eq!(rows[0][5], "");
    let gate: f64 = rows[0][2].parse().unwrap();
    assert!((gate - 0.5).abs() < 0.05, "gate {gate}");
    let post: f64 = rows[0][3].parse().unwrap();
    assert!((post - 0.5).abs() < 1e-6, "posterior {post}");
}

#[test]
fn plot_data_bands() {
    let fx = Fixture::new();
    let data = fx.simulate("hetero", 40);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let model = fx.fit(&data, &spec, "model.json");
    let (plain, banded, pred) = (fx.path("plain.csv"), fx.path("bands.csv"), fx.path("pred.csv"));
    ok(&["plot-data", "--model", p(&model), "--data", p(&data), "--out", p(&plain)]);
    ok(&["plot-data", "--model", p(&model), "--data", p(&data), "--out", p(&banded), "--bands"]);
    ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&pred)]);

    assert_eq!(read_table(&plain).0, ["x", "xsq", "mean_1", "mean_2"]);
    assert_eq!(read_table(&banded).0, ["x", "xsq", "mean_1", "mean_2", "lo_1", "hi_1", "lo_2", "hi_2"]);
    for m in 1..=2 {
        let lo = column(&banded, &format!("lo_{m}"));
        let hi = column(&banded, &format!("hi_{m}"));
        let scale = column(&pred, &format!("scale_{m}"));
        for i in 0..lo.len() {
            assert!(((hi[i] - lo[i]) - 4.0 * scale[i]).abs() <= 1e-9 * (1.0 + scale[i]));
        }
    }
}

#[test]
fn simulate_is_deterministic() {
    let fx = Fixture::new();
    let a = fx.path("a.csv");
    let b = fx.path("b.csv");
    ok(&["simulate", "--scenario", "hetero", "--n", "25", "--seed", "11", "--out", p(&a)]);
    ok(&["simulate", "--scenario", "hetero", "--n", "25", "--seed", "11", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (header, rows) = read_table(&a);
    assert_eq!(header, ["x", "xsq", "yn", "true_class"]);
    assert_eq!(rows.len(), 50);
}

#[test]
fn save_load_predict_is_bit_exact() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 30);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let model = fx.fit(&data, &spec, "model.json");
    // rewrite the model through the library and predict from both copies
    let file = mixreg_cli::files::FittedModelFile::load(&model).unwrap();
    let copy = fx.path("copy.json");
    file.save(&copy).unwrap();
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&copy).unwrap());
    let (a, b) = (fx.path("a.csv"), fx.path("b.csv"));
    ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&a)]);
    ok(&["predict", "--model", p(&copy), "--data", p(&data), "--out", p(&b)]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

fn assert_error(out: &Output, code: i32) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.starts_with("error: "), "{err:?}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err:?}");
}

#[test]
fn spec_errors_exit_2() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 10);
    let missing = fx.write(
        "bad.json",
        r#"{"response":"yn","components":[{"family":"laplace","formulas":{"location":"~1"}}],
            "train":{"optimizer":{"name":"sgd","lr":0.1}}}"#,
    );
    assert_error(&run(&["fit", "--data", p(&data), "--spec", p(&missing), "--out", p(&fx.path("m.json"))]), 2);
    assert_error(&run(&["simulate", "--scenario", "nope", "--n", "5", "--out", p(&fx.path("s.csv"))]), 2);
    assert_error(&run(&["simulate", "--scenario", "npreg", "--n", "1", "--out", p(&fx.path("s.csv"))]), 2);
    assert_error(&run(&["frobnicate"]), 2);
}

#[test]
fn data_errors_exit_3() {
    let fx = Fixture::new();
    let spec = fx.write("spec.json", TWO_NORMALS);
    let no_xsq = fx.write("d.csv", "x,yn\n1,2\n2,3\n3,4\n");
    assert_error(&run(&["fit", "--data", p(&no_xsq), "--spec", p(&spec), "--out", p(&fx.path("m.json"))]), 3);
    let text = fx.write("t.csv", "x,xsq,yn\n1,1,abc\n");
    assert_error(&run(&["fit", "--data", p(&text), "--spec", p(&spec), "--out", p(&fx.path("m.json"))]), 3);
}

#[test]
fn version_mismatch_exits_5() {
    let fx = Fixture::new();
    let data = fx.simulate("npreg", 20);
    let spec = fx.write("spec.json", TWO_NORMALS);
    let model = fx.fit(&data, &spec, "model.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    json["version"] = 99.into();
    let bumped = fx.write("bumped.json", &json.to_string());
    assert_error(&run(&["predict", "--model", p(&bumped), "--data", p(&data), "--out", p(&fx.path("o.csv"))]), 5);
}

#[test]
fn non_finite_training_exits_4() {
    let fx = Fixture::new();
    // the squared residual of the last row overflows
    let data = fx.write("d.csv", "x,yn\n0,1\n1,2\n2,1e308\n");
    let spec = fx.write(
        "spec.json",
        r#"{"response":"yn","components":[{"family":"normal","formulas":{"mean":"~1","scale":"~1"}}],
            "train":{"optimizer":{"name":"sgd","lr":0.1},"epochs":5,"batch_size":8}}"#,
    );
    assert_error(&run(&["fit", "--data", p(&data), "--spec", p(&spec), "--out", p(&fx.path("m.json"))]), 4);
}
