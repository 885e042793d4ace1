use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"seed = 3

[dataset]
kind = "synthetic"
n_clusters = 4
per_cluster = 10
dim = 6
spread = 0.4
n_train = 120
n_val = 60
n_test = 60

[graph]
kind = "complete"
start = "medoid"

[search]
k = 1
ef = 1

[reward]
dcs_max = 40

[trainer]
epochs = 4
batch_size = 40
hidden = 16
"#;

fn simgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simgraph")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = simgraph(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn pipeline(cfg: &str, out: &Path) {
    let out = out.to_str().unwrap();
    for cmd in ["prepare", "build", "train"] {
        run_ok(&[cmd, "--config", cfg, "--out", out, "--threads", "1"]);
    }
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(&cfg, &a);
    pipeline(&cfg, &b);
    for f in ["training_log.csv", "refined.bin", "learned.bin", "policy.ckpt", "graph.bin", "data/base.fvecs"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let log = std::fs::read_to_string(a.join("training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 5);
    assert!(log.starts_with("epoch,train_mean_reward,val_mean_reward"));
}

#[test]
fn full_pipeline_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("run");
    pipeline(&cfg, &out);
    let o = out.to_str().unwrap();

    let pruned = run_ok(&["prune", "--config", &cfg, "--out", o]);
    assert!(pruned.contains("threshold"));
    assert!(out.join("pruned.bin").exists());
    let weights = std::fs::read_to_string(out.join("weights.csv")).unwrap();
    assert_eq!(weights.lines().next(), Some("src,dst,weight"));
    assert_eq!(weights.lines().count(), 1 + 40 * 39);

    run_ok(&["sweep", "--config", &cfg, "--out", o, "--ef", "1,4,40"]);
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows[0], "graph,ef,mean_dcs,recall,mean_hops");
    assert_eq!(rows.len(), 1 + 3 * 3);
    let full = rows.iter().find(|r| r.starts_with("initial,40,")).unwrap();
    assert!(full.starts_with("initial,40,40,1,"), "{full}");

    run_ok(&["hubs", "--config", &cfg, "--out", o, "--top", "5", "--graph", "initial"]);
    let hubs = std::fs::read_to_string(out.join("hubs.csv")).unwrap();
    let lines: Vec<&str> = hubs.lines().collect();
    assert_eq!(lines[0], "rank,vertex,visits,outdegree,nn_count");
    assert!(lines[1].starts_with("0,"));
    assert!(lines.len() <= 7);

    let report = run_ok(&["validate", "--config", &cfg, "--out", o]);
    assert!(!report.is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = dir.path().join("run");
    let o = o.to_str().unwrap();

    assert_eq!(simgraph(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(simgraph(&["build"]).status.code(), Some(1));
    assert_eq!(simgraph(&["build", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(simgraph(&["--help"]).status.code(), Some(0));

    let missing = simgraph(&["train", "--config", &cfg, "--out", o]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("prepare"));

    let bad = write_config(dir.path(), &CONFIG.replace("ef = 1", "ef = 0"));
    assert_eq!(simgraph(&["prepare", "--config", &bad, "--out", o]).status.code(), Some(1));

    let wild = write_config(dir.path(), &format!("{CONFIG}optimizer = \"sgd\"\nlr = 1e300\n"));
    run_ok(&["prepare", "--config", &wild, "--out", o]);
    run_ok(&["build", "--config", &wild, "--out", o]);
    let diverged = simgraph(&["train", "--config", &wild, "--out", o]);
    assert_eq!(diverged.status.code(), Some(3), "{}", String::from_utf8_lossy(&diverged.stderr));
}

#[test]
fn presets_resolve() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("v");
    let out = simgraph(&["validate", "--preset", "toy", "--out", o.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
