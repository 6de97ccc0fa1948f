use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use leaflife_core::adversarial::{epsilon_sweep, sweep_to_csv};
use leaflife_core::dataset::{scan_dataset, SplitAssignment};
use leaflife_core::experiment::ExperimentConfig;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture_root() -> PathBuf {
    workspace().join("crates/core/tests/fixtures/leaves")
}

fn smoke_toml() -> PathBuf {
    workspace().join("configs/smoke.toml")
}

fn leaflife(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leaflife"))
        .args(args)
        .env_remove("LEAFLIFE_MODEL_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), stderr(&out));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `--config smoke.toml --dataset-root <fixture> --output-dir <out> --run-id <id>`
fn run_args<'a>(out: &'a Path, root: &'a Path, config: &'a Path, id: &'a str) -> Vec<&'a str> {
    vec!["--config", s(config), "--dataset-root", s(root), "--output-dir", s(out), "--run-id", id]
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = leaflife(&["badcmd"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[train]\nbatch_size = 0\n", "batch_size"),
        ("[split]\nratios = [0.5, 0.5, 0.5]\n", "split.ratios"),
        ("[train]\nlearning_rat = 0.1\n", "learning_rat"),
    ];
    for (i, (text, field)) in cases.into_iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        std::fs::write(&path, text).unwrap();
        let root = fixture_root();
        let out = leaflife(&["split", "--config", s(&path), "--dataset-root", s(&root), "--output-dir", s(dir.path())]);
        assert_eq!(out.status.code(), Some(1), "{text}");
        assert!(stderr(&out).contains(field), "{field} not in: {}", stderr(&out));
    }
}

#[test]
fn split_is_reproducible_and_guards_existing_runs() {
    let dir = tempfile::tempdir().unwrap();
    let root = fixture_root();
    let config = smoke_toml();
    let args = |id| {
        let mut a = vec!["split"];
        a.extend(run_args(dir.path(), &root, &config, id));
        a
    };
    ok(leaflife(&args("a")));
    let first = std::fs::read(dir.path().join("a/split.json")).unwrap();

    let again = leaflife(&args("a"));
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--overwrite"));

    let mut overwrite = args("a");
    overwrite.push("--overwrite");
    ok(leaflife(&overwrite));
    assert_eq!(std::fs::read(dir.path().join("a/split.json")).unwrap(), first);
    ok(leaflife(&args("b")));
    assert_eq!(std::fs::read(dir.path().join("b/split.json")).unwrap(), first);

    let split = SplitAssignment::load(dir.path().join("a/split.json")).unwrap();
    split.check_consistent(&scan_dataset(&root).unwrap()).unwrap();
    let record: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a/run.json")).unwrap()).unwrap();
    assert_eq!(record["command"], "split");

    let scan_out = ok(leaflife(&["scan", "--dataset-root", s(&root), "--output-dir", s(dir.path()), "--run-id", "s"]));
    assert!(scan_out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["total"], 30);
}

#[test]
fn sweep_csv_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let root = fixture_root();
    let config = smoke_toml();
    let mut args = vec!["sweep"];
    args.extend(run_args(dir.path(), &root, &config, "sw"));
    args.extend(["--epsilons", "0.1,0", "--epochs", "2", "--jobs", "2"]);
    ok(leaflife(&args));
    let from_cli = std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();

    let mut experiment = ExperimentConfig::load(&config).unwrap();
    experiment.dataset_root = root.clone();
    experiment.train.max_epochs = 2;
    let manifest = scan_dataset(&root).unwrap();
    let split = SplitAssignment::load(dir.path().join("sw/split.json")).unwrap();
    let mut adv = experiment.adversarial_config();
    adv.epsilons = vec![0.0, 0.1];
    let rows = epsilon_sweep(&split, &manifest, &adv).unwrap();
    assert_eq!(from_cli, sweep_to_csv(&rows).unwrap());
    assert!(from_cli.starts_with("epsilon,val_loss,val_accuracy,optimal_epochs\n0.0,"));
}

#[test]
fn train_eval_explain_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let root = fixture_root();
    let config = smoke_toml();

    let mut train = vec!["train"];
    train.extend(run_args(out, &root, &config, "t"));
    ok(leaflife(&train));
    for f in ["manifest.json", "split.json", "history.csv", "run.json", "model"] {
        assert!(out.join("t").join(f).exists(), "missing {f}");
    }
    let model = out.join("t/model");
    let split = out.join("t/split.json");

    let mut eval = vec!["eval"];
    eval.extend(run_args(out, &root, &config, "e"));
    eval.extend(["--model", s(&model), "--split", s(&split), "--model-id", "xception"]);
    ok(leaflife(&eval));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("e/report.json")).unwrap()).unwrap();
    assert_eq!(report["num_samples"], 3);
    assert_eq!(report["per_class"].as_array().unwrap().len(), 3);
    image::open(out.join("e/confusion.png")).unwrap();

    let leaf = root.join("Isariopsis Leaf Spot/leaf_02.png");
    for (id, method) in [("g", "grad-cam"), ("o", "occlusion")] {
        let mut explain = vec!["explain"];
        explain.extend(run_args(out, &root, &config, id));
        explain.extend(["--model", s(&model), "--image", s(&leaf), "--method", method, "--patch", "56", "--stride", "56"]);
        ok(leaflife(&explain));
        let heat = image::open(out.join(id).join("leaf_02_heatmap.png")).unwrap();
        assert_eq!((heat.width(), heat.height()), (224, 224));
        image::open(out.join(id).join("leaf_02_overlay.png")).unwrap();
        let side: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join(id).join("leaf_02.json")).unwrap()).unwrap();
        assert_eq!(side["method"], method.replace('-', "_"));
    }

    let bad_layer = {
        let mut a = vec!["explain"];
        a.extend(run_args(out, &root, &config, "bad"));
        a.extend(["--model", s(&model), "--image", s(&leaf), "--layer", "no_such_layer"]);
        leaflife(&a)
    };
    assert_eq!(bad_layer.status.code(), Some(1));
    assert!(stderr(&bad_layer).contains("no_such_layer"), "{}", stderr(&bad_layer));

    let report_path = out.join("e/report.json");
    let mut rep = vec!["report"];
    rep.extend(run_args(out, &root, &config, "r"));
    rep.extend(["--report", s(&report_path)]);
    let printed = ok(leaflife(&rep));
    let table = String::from_utf8(printed.stdout).unwrap();
    assert!(table.contains("| Ahmed et al. | DexNet | 94.07 |"), "{table}");
    assert!(table.contains("This work"));
    assert_eq!(std::fs::read_to_string(out.join("r/comparison.md")).unwrap(), table);
}

#[test]
fn serve_with_corrupted_model_fails_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("broken_model");
    std::fs::create_dir_all(&model).unwrap();
    std::fs::write(model.join(leaflife_core::model::METADATA_FILE), "{ not json").unwrap();
    let out = leaflife(&["serve", "--model", s(&model), "--port", "0", "--bind", "127.0.0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains(s(&model)), "{}", stderr(&out));
}

#[test]
fn dataset_root_is_required() {
    let dir = tempfile::tempdir().unwrap();
    let out = leaflife(&["scan", "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dataset_root"));
}
