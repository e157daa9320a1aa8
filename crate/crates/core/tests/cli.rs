use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fedagg::cli::RunManifest;
use fedagg::data::ShardAssignment;
use fedagg::orchestration::RoundLog;

fn fedagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedagg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"
run_seed = 2
per_client = 30

[model]
kind = "logreg"

[aggregation]
strategy = "avgdiff"
epsilon = 0.5
fraction = 0.5
total_clients = 4
local_epochs = 2
local_batch = 10
rounds = 3
local_lr = 0.3

[data]
source = "synthetic"
num_examples = 200
num_classes = 2
vocab_size = 100
seed = 1
"#;

fn only_run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

fn read_logs(path: &Path) -> Vec<RoundLog> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let o = fedagg(&[
            "synth",
            "--out",
            s(p),
            "--n",
            "300",
            "--positive-rate",
            "0.058",
            "--seed",
            "7",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("class 1:"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 300);
}

#[test]
fn partition_writes_a_disjoint_shard_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let shards = dir.path().join("shards.json");
    assert!(fedagg(&["synth", "--out", s(&data), "--n", "120"]).status.success());
    let o = fedagg(&[
        "partition",
        "--in",
        s(&data),
        "--k",
        "5",
        "--per-client",
        "20",
        "--seed",
        "3",
        "--out",
        s(&shards),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: ShardAssignment = serde_json::from_str(&std::fs::read_to_string(&shards).unwrap()).unwrap();
    assert_eq!(m.shards.len(), 5);
    let mut all: Vec<usize> = m.shards.concat();
    all.extend(&m.held_out);
    all.sort_unstable();
    assert_eq!(all, (0..120).collect::<Vec<_>>());

    let o = fedagg(&[
        "partition",
        "--in",
        s(&data),
        "--k",
        "5",
        "--per-client",
        "30",
        "--out",
        s(&shards),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn partition_strict_reports_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    std::fs::write(&data, "{\"text\":\"a b\",\"label\":0}\nnot json\n").unwrap();
    let shards = dir.path().join("s.json");
    let o = fedagg(&[
        "partition",
        "--in",
        s(&data),
        "--k",
        "1",
        "--per-client",
        "1",
        "--strict",
        "--out",
        s(&shards),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("d.jsonl:2:"), "{}", stderr(&o));
    let o = fedagg(&[
        "partition",
        "--in",
        s(&data),
        "--k",
        "1",
        "--per-client",
        "1",
        "--out",
        s(&shards),
    ]);
    assert!(o.status.success());
}

#[test]
fn gradcheck_passes_every_model() {
    let o = fedagg(&["gradcheck", "--model", "all", "--seed", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    for kind in ["logreg", "mlp", "textcnn", "lstm"] {
        assert!(out.lines().any(|l| l.starts_with("PASS") && l.contains(kind)), "{out}");
    }
}

#[test]
fn gradcheck_rejects_unknown_model() {
    let o = fedagg(&["gradcheck", "--model", "transformer"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_and_replays_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("runs");
    let o = fedagg(&[
        "run",
        "--config",
        s(&config),
        "--trials",
        "2",
        "--out",
        s(&out),
        "--workers",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = only_run_dir(&out);
    for f in [
        "manifest.json",
        "trial-0.jsonl",
        "trial-1.jsonl",
        "curve.csv",
        "model-trial-0.json",
        "model-trial-1.json",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.trials, 2);
    assert_eq!(manifest.config.aggregation.rounds, 3);
    assert!(run
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .ends_with(&manifest.config_hash));
    let curve = std::fs::read_to_string(run.join("curve.csv")).unwrap();
    assert!(curve.starts_with("schema_version,round,"));
    assert_eq!(curve.lines().count(), 4);

    let replay_out = dir.path().join("replay");
    let o = fedagg(&[
        "run",
        "--config",
        s(&run.join("manifest.json")),
        "--trials",
        "2",
        "--out",
        s(&replay_out),
        "--workers",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let replay = only_run_dir(&replay_out);
    for t in ["trial-0.jsonl", "trial-1.jsonl"] {
        let a: Vec<_> = read_logs(&run.join(t)).iter().map(RoundLog::without_timing).collect();
        let b: Vec<_> = read_logs(&replay.join(t))
            .iter()
            .map(RoundLog::without_timing)
            .collect();
        assert_eq!(a, b);
    }
    assert_eq!(read_logs(&run.join("trial-0.jsonl"))[0].sampled_clients.len(), 2);
}

#[test]
fn run_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("runs");
    let o = fedagg(&[
        "run",
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--rounds",
        "2",
        "--strategy",
        "average",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = only_run_dir(&out);
    assert_eq!(read_logs(&run.join("trial-0.jsonl")).len(), 2);
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(
        manifest.config.aggregation.strategy,
        fedagg::aggregation::StrategyKind::Average
    );
}

#[test]
fn bad_configs_name_the_key_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let cases = [
        (CONFIG.replace("\"avgdiff\"", "\"fedprox\""), "strategy"),
        (CONFIG.replace("epsilon = 0.5", "epsilon = 1.5"), "epsilon"),
        (CONFIG.replace("fraction = 0.5", "fraction = 0.0"), "fraction"),
        (CONFIG.replace("rounds = 3", "rounds = 3\nmomentum = 0.9"), "momentum"),
        (CONFIG.replace("per_client = 30", "per_client = 60"), "examples"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        std::fs::write(&path, text).unwrap();
        let o = fedagg(&["run", "--config", s(&path), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", stderr(&o));
        assert!(stderr(&o).contains(key), "case {i}: {}", stderr(&o));
    }
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn cv_prints_fold_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let o = fedagg(&["cv", "--config", s(&config), "--folds", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2-fold accuracy"));
}
