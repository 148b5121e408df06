use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cluemark::io::key::read_key;
use cluemark::io::npy::{read_tensor, write_tensor};
use cluemark::{LatentDims, LatentTensor};
use tempfile::tempdir;

fn cluemark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cluemark"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn keygen_mark_extract_round_trip() {
    let dir = tempdir().unwrap();
    let key = dir.path().join("key.toml");
    let marked = dir.path().join("marked.npy");
    let base = dir.path().join("base.npy");

    let o = cluemark(&["--seed", "7", "keygen", "--out", s(&key)]);
    assert!(o.status.success(), "{o:?}");
    let (k, thr) = read_key(&key).unwrap();
    assert_eq!(k.latent_dims(), LatentDims::new(4, 64, 64));
    assert_eq!(thr, 0.01);

    let o = cluemark(&["--seed", "8", "mark", "--key", s(&key), "--out", s(&marked), "--base-out", s(&base)]);
    assert!(o.status.success(), "{o:?}");

    let o = cluemark(&["extract", "--key", s(&key), "--input", s(&marked)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "decision=true"), "{text}");
    assert!(text.lines().any(|l| l == "m_samples=512"), "{text}");
    let json: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(json["decision"], true);
    assert!(json["p_value"].as_f64().unwrap() < 1e-10);

    let o = cluemark(&["extract", "--key", s(&key), "--input", s(&base)]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
    assert!(stdout(&o).lines().any(|l| l == "decision=false"));
}

#[test]
fn fixed_seed_runs_are_bit_identical() {
    let dir = tempdir().unwrap();
    let run = |tag: &str| {
        let key = dir.path().join(format!("k{tag}.toml"));
        let out = dir.path().join(format!("m{tag}.npy"));
        assert!(cluemark(&["--seed", "3", "keygen", "--out", s(&key)]).status.success());
        assert!(cluemark(&["--seed", "4", "mark", "--key", s(&key), "--out", s(&out)]).status.success());
        (fs::read(key).unwrap(), fs::read(out).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn mark_accepts_external_latent_and_refuses_overwrite() {
    let dir = tempdir().unwrap();
    let key = dir.path().join("key.toml");
    let input = dir.path().join("in.npy");
    let out = dir.path().join("out.npy");
    assert!(cluemark(&["--seed", "1", "keygen", "--out", s(&key), "--dims", "4x16x16"]).status.success());
    let t: LatentTensor = LatentTensor::standard_normal(
        &mut cluemark::stats::seeded_stream(2),
        LatentDims::new(4, 16, 16),
    )
    .unwrap();
    write_tensor(&t, &input, false).unwrap();
    assert!(cluemark(&["--seed", "1", "mark", "--key", s(&key), "--input", s(&input), "--out", s(&out)]).status.success());
    let marked: LatentTensor = read_tensor(&out).unwrap();
    assert_eq!(marked.dims(), t.dims());

    let o = cluemark(&["--seed", "1", "mark", "--key", s(&key), "--input", s(&input), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(cluemark(&["--force", "--seed", "1", "mark", "--key", s(&key), "--input", s(&input), "--out", s(&out)])
        .status
        .success());
}

#[test]
fn errors_exit_two() {
    let dir = tempdir().unwrap();
    assert_eq!(cluemark(&["keygen", "--nope"]).status.code(), Some(2));
    assert_eq!(cluemark(&[]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    let o = cluemark(&["extract", "--key", s(&missing), "--input", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    let o = cluemark(&["--seed", "1", "keygen", "--out", s(&dir.path().join("k")), "--dims", "4x63x64"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = cluemark(&["--threshold", "2", "--seed", "1", "keygen", "--out", s(&dir.path().join("k"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rose_writes_histogram_csv() {
    let dir = tempdir().unwrap();
    let csv = dir.path().join("rose.csv");
    let o = cluemark(&["--seed", "5", "rose", "--simulate", "pancakes", "--samples", "2000", "--bins", "12", "--out", s(&csv)]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin,start,end,count"));
    let counts: Vec<u64> = lines
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts.len(), 12);
    assert_eq!(counts.iter().sum::<u64>(), 2000);
    // Pancake z-scores pile up next to 0 (≡ 1).
    let edge = counts[0] + counts[11];
    assert!(edge > 1500, "{counts:?}");

    let zfile = dir.path().join("z.txt");
    fs::write(&zfile, "0.1\n0.2\n\n0.95\n").unwrap();
    let o = cluemark(&["rose", "--input", s(&zfile), "--bins", "4"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("0,0,0.25,2"));
}

#[test]
fn experiment_subcommands_emit_tables() {
    let dir = tempdir().unwrap();
    let cov = dir.path().join("cov.csv");
    let o = cluemark(&[
        "--seed", "1", "attack", "covariance", "--n", "8", "--m", "200", "--gamma", "1,4", "--trials", "3",
        "--out", s(&cov),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&cov).unwrap();
    assert!(text.starts_with("n,m,gamma,beta,trial,label,score\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert_eq!(stdout(&o).lines().count(), 2);

    let roc = dir.path().join("roc.csv");
    let o = cluemark(&[
        "--seed", "1", "simulate", "detect-roc", "--dims", "4x16x16", "--noise", "0,0.1", "--trials", "4",
        "--out", s(&roc),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&roc).unwrap();
    assert!(text.starts_with("noise_sd,trials,auc\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn config_file_supplies_grid_and_seed() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("cov.csv");
    fs::write(
        &cfg,
        format!(
            "seed = 11\ntrials = 2\noutput_path = {:?}\n\n[covariance]\nn = [4]\nm = [50]\ngamma = [1.0]\n",
            s(&out)
        ),
    )
    .unwrap();
    let o = cluemark(&["--config", s(&cfg), "attack", "covariance"]);
    assert!(o.status.success(), "{o:?}");
    let first = fs::read_to_string(&out).unwrap();
    assert_eq!(first.lines().count(), 1 + 2 * 2);
    let o = cluemark(&["--force", "--config", s(&cfg), "attack", "covariance"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), first);

    fs::write(&cfg, "seed = 1\nbogus = 3\n").unwrap();
    assert_eq!(cluemark(&["--config", s(&cfg), "attack", "covariance"]).status.code(), Some(2));
}

#[test]
fn average_attack_over_generated_pairs() {
    let dir = tempdir().unwrap();
    let key = dir.path().join("key.toml");
    let pairs = dir.path().join("pairs");
    let cleaned = dir.path().join("cleaned");
    let table = dir.path().join("avg.csv");
    assert!(cluemark(&["--seed", "1", "keygen", "--out", s(&key), "--dims", "4x16x16"]).status.success());
    let o = cluemark(&[
        "--seed", "2", "attack", "average", "--key", s(&key), "--pairs", s(&pairs), "--out-dir", s(&cleaned),
        "--generate", "6", "--table", s(&table),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("pairs=6"), "{text}");
    assert!(cleaned.join("mean_difference.npy").exists());
    assert!(cleaned.join("cleaned_0.npy").exists());
    let csv = fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("file,statistic,p_value,label\n"));
    assert_eq!(csv.lines().count(), 1 + 12);
}
