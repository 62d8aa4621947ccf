use std::path::Path;
use std::process::{Command, Output};

fn vlnce(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlnce"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(
        &p,
        "seed = 3\n\
         [data]\ntrain_worlds = 2\nheldout_worlds = 1\nnodes_per_world = 5\nepisodes = 3\n\
         [train]\nepochs = 1\n\
         [predictor.model]\nd_model = 8\nnum_heads = 2\nff_dim = 16\n",
    )
    .unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = small_config(tmp.path());
    let c = cfg.to_str().unwrap();

    let o = vlnce(&out, &["gen-data", "--config", c]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("3 episodes"));

    let o = vlnce(&out, &["train", "--config", c]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("epoch   1"));

    let o = vlnce(&out, &["eval-waypoints", "--config", c]);
    assert!(o.status.success());
    let table = stdout(&o);
    assert!(table.contains("geometric") && table.contains("trained"));

    let o = vlnce(&out, &["run", "--config", c, "--planner", "greedy"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("group"));
    assert!(out.join("runs/greedy/steps.jsonl").exists());

    let o = vlnce(&out, &["run", "--config", c, "--predictor", "model", "--label", "learned"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = tmp.path().join("summary.csv");
    let o = vlnce(
        &out,
        &[
            "report",
            out.join("runs/greedy").to_str().unwrap(),
            out.join("runs/learned").to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ],
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("seed-3"));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("group,episodes"));

    let o = vlnce(&out, &["inspect", "--config", c, "--episode", "ep0001"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("instruction:"));

    let o = vlnce(&out, &["ablate", "--config", c, "--planner", "scripted"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("no-visit-info"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest-run-greedy.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["outputs"]["runs/greedy/steps.jsonl"].is_string());
}

#[test]
fn config_errors_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "merge_threshold = -1.0\n").unwrap();
    let o = vlnce(tmp.path(), &["gen-data", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("merge_threshold"));

    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let o = vlnce(tmp.path(), &["inspect", "--config", bad.to_str().unwrap(), "--show-config"]);
    assert_eq!(o.status.code(), Some(1));

    let o = vlnce(tmp.path(), &["gen-data", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vlnce(&tmp.path().join("empty"), &["run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gen-data"));
}

#[test]
fn show_config_prints_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vlnce(tmp.path(), &["inspect", "--show-config", "--seed", "9"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("seed = 9"));
    assert!(text.contains("merge_threshold = 0.5"));
}
