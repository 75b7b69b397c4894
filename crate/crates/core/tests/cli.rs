//! End-to-end tests of the `fae` binary: artifact layout, determinism,
//! metrics appending, and sweep composition.

use std::path::Path;
use std::process::{Command, Output};

fn fae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fae"))
        .args(args)
        .output()
        .expect("failed to spawn fae")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "fae failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SYNTH: &str = "n=300,blocks=4,per_block=3,noise_std=0.01,seed=7";

fn train_args<'a>(out_dir: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "train",
        "--dataset",
        SYNTH,
        "--format",
        "synth",
        "--k",
        "4",
        "--epochs",
        "120",
        "--batch",
        "32",
        "--seed",
        "5",
        "--out",
        out_dir,
    ];
    args.extend_from_slice(extra);
    args
}

#[test]
fn train_writes_all_artifacts_and_loss_descends() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap();
    assert_ok(&fae(&train_args(out_str, &[])));

    let run_dir = out.join("seed_5");
    for artifact in ["checkpoint.json", "loss.csv", "selection.csv", "metadata.json"] {
        assert!(run_dir.join(artifact).exists(), "missing {artifact}");
    }

    let loss = std::fs::read_to_string(run_dir.join("loss.csv")).unwrap();
    let rows: Vec<&str> = loss.lines().collect();
    assert_eq!(rows.len(), 121, "header + one row per epoch");
    assert!(rows[0].starts_with("epoch,full_recon,selected_recon,l1,total,val_total"));
    let val_of = |line: &str| -> f64 { line.rsplit(',').next().unwrap().parse().unwrap() };
    assert!(
        val_of(rows[120]) < val_of(rows[1]),
        "final validation total should fall below the initial one"
    );

    let meta = std::fs::read_to_string(run_dir.join("metadata.json")).unwrap();
    for needle in [
        "\"thread_count\": 1",
        "\"rng_algorithm\": \"chacha8\"",
        "\"l1_mode\": \"mean\"",
        "\"normalize\":",
        "\"split_seed\":",
        "\"crate_version\":",
    ] {
        assert!(meta.contains(needle), "metadata missing {needle}");
    }
}

#[test]
fn zero_epochs_still_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap();
    let mut args = train_args(out_str, &[]);
    let pos = args.iter().position(|a| *a == "120").unwrap();
    args[pos] = "0";
    assert_ok(&fae(&args));
    let loss = std::fs::read_to_string(out.join("seed_5/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1, "header only");
    assert!(out.join("seed_5/checkpoint.json").exists());
}

#[test]
fn repeats_write_independent_artifact_sets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap();
    assert_ok(&fae(&train_args(out_str, &["--repeats", "3"])));
    for seed in 5..8 {
        assert!(out.join(format!("seed_{seed}/checkpoint.json")).exists());
    }
    let a = std::fs::read(out.join("seed_5/checkpoint.json")).unwrap();
    let b = std::fs::read(out.join("seed_6/checkpoint.json")).unwrap();
    assert_ne!(a, b, "different seeds should differ");
}

#[test]
fn identical_invocations_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    assert_ok(&fae(&train_args(out1.to_str().unwrap(), &[])));
    assert_ok(&fae(&train_args(out2.to_str().unwrap(), &[])));
    for artifact in ["checkpoint.json", "loss.csv", "selection.csv"] {
        let a = std::fs::read(out1.join("seed_5").join(artifact)).unwrap();
        let b = std::fs::read(out2.join("seed_5").join(artifact)).unwrap();
        assert_eq!(a, b, "{artifact} differs between identical runs");
    }
}

#[test]
fn eval_appends_identical_rows_for_identical_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap();
    assert_ok(&fae(&train_args(out_str, &[])));

    let ckpt = out.join("seed_5/checkpoint.json");
    let metrics = dir.path().join("metrics.csv");
    let eval_args = [
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--dataset",
        SYNTH,
        "--format",
        "synth",
        "--trees",
        "20",
        "--out",
        metrics.to_str().unwrap(),
    ];
    assert_ok(&fae(&eval_args));
    assert_ok(&fae(&eval_args));
    let text = std::fs::read_to_string(&metrics).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], "dataset,method,k,seed,recon_mse,accuracy");
    assert_eq!(rows[1], rows[2], "identical evals must append identical rows");
    assert!(rows[1].starts_with("synth,fae,4,5,"));
}

#[test]
fn sweep_singleton_matches_train_plus_eval() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_out = dir.path().join("sweep");
    assert_ok(&fae(&[
        "sweep-k",
        "--dataset",
        SYNTH,
        "--format",
        "synth",
        "--k-list",
        "4",
        "--epochs",
        "120",
        "--batch",
        "32",
        "--seed",
        "5",
        "--trees",
        "20",
        "--out",
        sweep_out.to_str().unwrap(),
    ]));
    let sweep = std::fs::read_to_string(sweep_out.join("sweep.csv")).unwrap();
    let sweep_rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(sweep_rows.len(), 2);
    assert_eq!(sweep_rows[0], "k,recon_mse,accuracy,seed");

    // the same configuration through train + eval gives the same recon
    let train_out = dir.path().join("run");
    assert_ok(&fae(&train_args(train_out.to_str().unwrap(), &[])));
    let metrics = dir.path().join("metrics.csv");
    assert_ok(&fae(&[
        "eval",
        "--checkpoint",
        train_out.join("seed_5/checkpoint.json").to_str().unwrap(),
        "--dataset",
        SYNTH,
        "--format",
        "synth",
        "--trees",
        "20",
        "--out",
        metrics.to_str().unwrap(),
    ]));
    let eval_text = std::fs::read_to_string(&metrics).unwrap();
    let eval_recon: f64 = eval_text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(4)
        .unwrap()
        .parse()
        .unwrap();
    let sweep_recon: f64 = sweep_rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(sweep_recon.to_bits(), eval_recon.to_bits());
}

#[test]
fn hfae_writes_disjoint_groups_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_ok(&fae(&[
        "hfae",
        "--dataset",
        SYNTH,
        "--format",
        "synth",
        "--k",
        "3",
        "--h",
        "3",
        "--epochs",
        "100",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]));
    let groups = std::fs::read_to_string(out.join("seed_2/groups.csv")).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let mut per_group = std::collections::BTreeMap::new();
    for line in groups.lines().skip(1) {
        let mut it = line.split(',');
        let g: usize = it.next().unwrap().parse().unwrap();
        let f: usize = it.next().unwrap().parse().unwrap();
        assert!(seen.insert(f), "feature {f} appears twice");
        *per_group.entry(g).or_insert(0usize) += 1;
    }
    assert_eq!(per_group.len(), 3);
    assert!(per_group.values().all(|&c| c == 3));
}

#[test]
fn csv_dataset_with_labels_round_trips_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    // small labeled csv: 3 informative blocks, label from first feature
    let mut rows = String::from("a,b,c,d,e,f,label\n");
    let mut state = 9u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..80 {
        let v: Vec<f64> = (0..3).flat_map(|_| { let l = next(); vec![l, l + 0.01 * next()] }).collect();
        let label = u32::from(v[0] > 0.5);
        rows.push_str(&format!(
            "{},{},{},{},{},{},{label}\n",
            v[0], v[1], v[2], v[3], v[4], v[5]
        ));
    }
    let csv_path = dir.path().join("data.csv");
    std::fs::write(&csv_path, rows).unwrap();

    let out = dir.path().join("run");
    assert_ok(&fae(&[
        "train",
        "--dataset",
        csv_path.to_str().unwrap(),
        "--format",
        "csv",
        "--has-header",
        "--label-column",
        "label",
        "--k",
        "3",
        "--epochs",
        "50",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let metrics = dir.path().join("metrics.csv");
    assert_ok(&fae(&[
        "eval",
        "--checkpoint",
        out.join("seed_1/checkpoint.json").to_str().unwrap(),
        "--dataset",
        csv_path.to_str().unwrap(),
        "--format",
        "csv",
        "--has-header",
        "--label-column",
        "label",
        "--trees",
        "20",
        "--out",
        metrics.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&metrics).unwrap();
    let row = text.lines().nth(1).unwrap();
    let acc: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc), "accuracy column should be filled");
}

#[test]
fn preset_picks_k_from_dataset_width() {
    // synth data has 12 features -> opt1 resolves to k = 10
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_ok(&fae(&[
        "train",
        "--dataset",
        SYNTH,
        "--format",
        "synth",
        "--preset",
        "opt1",
        "--epochs",
        "10",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]));
    let ckpt = std::fs::read_to_string(out.join("seed_3/checkpoint.json")).unwrap();
    assert!(ckpt.contains("\"k\": 10"), "opt1 preset should pick k=10 for m=12");
}

#[test]
fn failures_exit_nonzero_with_message() {
    // missing file
    let out = fae(&[
        "train",
        "--dataset",
        "/nonexistent.csv",
        "--format",
        "csv",
        "--k",
        "2",
        "--out",
        "/tmp/fae-cli-err",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    // k > m
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("x");
    let out = fae(&[
        "train",
        "--dataset",
        SYNTH,
        "--format",
        "synth",
        "--k",
        "40",
        "--epochs",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("k"));
    assert!(!Path::new(&out_dir).join("seed_0/checkpoint.json").exists());
}
