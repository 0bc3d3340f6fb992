//! End-to-end checks of the `kge` binary against the committed toy fixture.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kge_core::model::{ModelKind, ModelParams};
use kge_core::store::TripleStore;
use kge_core::zcount::{z_count_oracle, ZCountTable};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

fn kge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kge"))
        .args(args)
        .output()
        .expect("failed to spawn kge binary")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        stdout(output),
        stderr(output)
    );
}

#[test]
fn zcounts_matches_committed_oracle_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.tsv");
    let data = fixture_dir();
    let output = kge(&[
        "zcounts",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);

    let produced = std::fs::read_to_string(&out).unwrap();
    let golden = std::fs::read_to_string(data.join("zcounts.golden.tsv")).unwrap();
    assert_eq!(produced, golden, "z-count table drifted from the golden file");

    // the golden file itself must agree with the brute-force oracle
    let store = TripleStore::load_dir(&data).unwrap();
    let table = ZCountTable::load(&out).unwrap();
    for (i, t) in store.train().iter().enumerate() {
        assert_eq!(table.counts[i], z_count_oracle(&store, t, table.policy));
    }

    // printed stats match a recomputation
    let text = stdout(&output);
    let stats = table.stats();
    assert!(text.contains(&format!("nonzero-count       {}", stats.nonzero_count)));
    assert!(text.contains(&format!("max                 {}", stats.max)));
    // manifest written beside the table
    assert!(out.with_file_name("z.tsv.manifest.json").exists());
}

#[test]
fn zcounts_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture_dir();
    let out1 = dir.path().join("w1.tsv");
    let out8 = dir.path().join("w8.tsv");
    for (out, workers) in [(&out1, "1"), (&out8, "8")] {
        let output = kge(&[
            "zcounts",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert_success(&output);
    }
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out8).unwrap()
    );
}

#[test]
fn zcounts_missing_dataset_exits_2() {
    let output = kge(&["zcounts", "--data", "/no/such/dir", "--out", "/tmp/unused.tsv"]);
    assert_eq!(output.status.code(), Some(2));
}

fn write_toy_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("toy.conf");
    std::fs::write(
        &path,
        format!(
            "model = transe-l2\n\
             learning_rate = 0.05\n\
             batch_size = 32\n\
             negatives = 4\n\
             alpha = 1.0\n\
             gamma = 2.0\n\
             max_epochs = 12\n\
             dim = 8\n\
             seed = 7\n\
             pacing = geometric\n\
             lambda0 = auto\n\
             t_grow = 8\n\
             {extra}"
        ),
    )
    .unwrap();
    path
}

fn train_fixture(run_dir: &Path, config: &Path, extra_flags: &[&str]) -> Output {
    let data = fixture_dir();
    let mut args = vec![
        "train",
        "--config",
        config.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--compute-zcounts",
        "--out-dir",
        run_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra_flags);
    kge(&args)
}

#[test]
fn train_is_reproducible_given_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_toy_config(dir.path(), "");
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    assert_success(&train_fixture(&run_a, &config, &[]));
    assert_success(&train_fixture(&run_b, &config, &[]));
    let ckpt_a = std::fs::read(run_a.join("model.ckpt")).unwrap();
    let ckpt_b = std::fs::read(run_b.join("model.ckpt")).unwrap();
    assert_eq!(ckpt_a, ckpt_b, "same config and seed must give identical checkpoints");
}

#[test]
fn pacing_choice_is_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_toy_config(dir.path(), "");
    let run_g = dir.path().join("geometric");
    let run_l = dir.path().join("linear");
    assert_success(&train_fixture(&run_g, &config, &["--pacing", "geometric"]));
    assert_success(&train_fixture(&run_l, &config, &["--pacing", "linear"]));
    let manifest_g = std::fs::read_to_string(run_g.join("manifest.json")).unwrap();
    let manifest_l = std::fs::read_to_string(run_l.join("manifest.json")).unwrap();
    let trace = |m: &str| {
        let v: serde_json::Value = serde_json::from_str(m).unwrap();
        v["config"]["lambda_trace"].as_str().unwrap().to_string()
    };
    assert_ne!(trace(&manifest_g), trace(&manifest_l));
}

#[test]
fn no_curriculum_pins_lambda_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_toy_config(dir.path(), "");
    let run = dir.path().join("wo");
    assert_success(&train_fixture(&run, &config, &["--no-curriculum"]));
    let log = std::fs::read_to_string(run.join("epochs.log")).unwrap();
    assert!(!log.is_empty());
    for line in log.lines() {
        assert!(line.contains("lambda=1.000000"), "unexpected line: {line}");
    }
}

#[test]
fn bad_config_key_exits_1_with_key_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "learning_rat = 0.1\n").unwrap();
    let data = fixture_dir();
    let output = kge(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--compute-zcounts",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("learning_rat"));
}

#[test]
fn train_without_zcounts_source_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_toy_config(dir.path(), "");
    let data = fixture_dir();
    let output = kge(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("--compute-zcounts"));
}

/// Build a dataset that a TransE model can memorize exactly, plus the
/// checkpoint that does so.
fn perfect_setup(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("perfect");
    std::fs::create_dir_all(&data).unwrap();
    let n = 8u32;
    let train: String = (0..n).map(|i| format!("a{i}\tr\tb{i}\n")).collect();
    let test: String = (0..4).map(|i| format!("a{i}\tr\tb{i}\n")).collect();
    std::fs::write(data.join("train.txt"), &train).unwrap();
    std::fs::write(data.join("valid.txt"), "a0\tr\tb1\n").unwrap();
    std::fs::write(data.join("test.txt"), &test).unwrap();

    let store = TripleStore::load_dir(&data).unwrap();
    let mut params = ModelParams::init(
        ModelKind::TransEL2,
        store.n_entities(),
        store.n_relations(),
        2,
        1.0,
        0,
    );
    params.relation_row_mut(0).copy_from_slice(&[100.0, 0.0]);
    for i in 0..n {
        let a = store.entity_id(&format!("a{i}")).unwrap();
        let b = store.entity_id(&format!("b{i}")).unwrap();
        params
            .entity_row_mut(a)
            .copy_from_slice(&[i as f64 * 3.0, i as f64]);
        params
            .entity_row_mut(b)
            .copy_from_slice(&[100.0 + i as f64 * 3.0, i as f64]);
    }
    let ckpt = dir.join("perfect.ckpt");
    params.save(&ckpt).unwrap();
    (data, ckpt)
}

#[test]
fn eval_reports_perfect_memorization() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = perfect_setup(dir.path());
    let out = dir.path().join("eval");
    let output = kge(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["mrr"], 1.0);
    assert_eq!(report["report"]["mr"], 1.0);
    assert_eq!(report["filtered"], true);
    assert!(out.join("report.txt").exists());
}

#[test]
fn filtered_mrr_is_at_least_raw_mrr() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = perfect_setup(dir.path());
    let mrr_of = |extra: &[&str]| -> f64 {
        let out = tempfile::tempdir().unwrap();
        let out_s = out.path().join("e");
        let mut args = vec![
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out-dir",
            out_s.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let output = kge(&args);
        assert_success(&output);
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out_s.join("report.json")).unwrap(),
        )
        .unwrap();
        report["report"]["mrr"].as_f64().unwrap()
    };
    // rank the valid split, where (a0, r, b1) competes with the known
    // (a0, r, b0) unless filtering removes it
    let filtered = mrr_of(&["--split", "valid"]);
    let raw = mrr_of(&["--split", "valid", "--raw"]);
    assert!(filtered >= raw, "filtered {filtered} < raw {raw}");
}

#[test]
fn eval_auc_pr_emits_a_scalar() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = perfect_setup(dir.path());
    let out = dir.path().join("auc");
    let output = kge(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--auc-pr",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    assert!(stdout(&output).contains("auc-pr"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let auc = report["auc_pr"].as_f64().unwrap();
    assert_eq!(auc, 1.0, "memorized model should separate perfectly");
}

#[test]
fn eval_refuses_mismatched_dictionaries() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ckpt) = perfect_setup(dir.path());
    let output = kge(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        fixture_dir().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("dictionaries"));
}

#[test]
fn diagnose_dumps_one_row_per_test_triple() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_toy_config(dir.path(), "");
    let run = dir.path().join("train");
    assert_success(&train_fixture(&run, &config, &["--max-epochs", "3"]));
    let out = dir.path().join("diag");
    let data = fixture_dir();
    let output = kge(&[
        "diagnose",
        "--checkpoint",
        run.join("model.ckpt").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);

    let store = TripleStore::load_dir(&data).unwrap();
    let csv = std::fs::read_to_string(out.join("diagnostic.csv")).unwrap();
    let rows: Vec<(f64, u64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (rank, z) = l.split_once(',').unwrap();
            (rank.parse().unwrap(), z.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), store.test().len());

    // printed means must match a recomputation from the dump
    let text = stdout(&output);
    let top: Vec<f64> = rows.iter().filter(|(r, _)| *r < 10.0).map(|(_, z)| *z as f64).collect();
    if top.is_empty() {
        assert!(text.contains("top10-mean      -"));
    } else {
        let mean = top.iter().sum::<f64>() / top.len() as f64;
        assert!(text.contains(&format!("top10-mean      {mean:.3}")));
    }
}

#[test]
fn dump_dict_writes_both_dictionaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dicts");
    let output = kge(&[
        "dump-dict",
        "--data",
        fixture_dir().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output);
    let store = TripleStore::load_dir(&fixture_dir()).unwrap();
    let entities = std::fs::read_to_string(out.join("entities.tsv")).unwrap();
    assert_eq!(entities.lines().count(), store.n_entities());
    assert!(entities.lines().next().unwrap().ends_with("\t0"));
    let relations = std::fs::read_to_string(out.join("relations.tsv")).unwrap();
    assert_eq!(relations.lines().count(), store.n_relations());
}
