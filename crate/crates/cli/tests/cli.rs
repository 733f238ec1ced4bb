use std::path::Path;
use std::process::{Command, Output};

fn aris(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aris"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn aris")
}

const TINY: [&str; 6] = [
    "--override",
    "episode.episodes=2",
    "--override",
    "episode.steps=5",
    "--override",
    "eval.episodes=2",
];

fn train(dir: &Path, seed: &str) -> Output {
    let mut args = vec!["train", "--seed", seed, "--out", dir.to_str().unwrap()];
    args.extend(TINY);
    aris(&args, dir.parent().unwrap())
}

#[test]
fn smoke_train_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let out = train(&run, "3");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "metrics.csv",
        "timing.csv",
        "manifest.txt",
        "checkpoints/actor.bin",
        "checkpoints/critic.bin",
        "checkpoints/actor_target.bin",
        "checkpoints/critic_target.bin",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("# metrics v1\n"));
    assert_eq!(metrics.lines().count(), 4);
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(train(&a, "11").status.success());
    assert!(train(&b, "11").status.success());
    for f in [
        "metrics.csv",
        "checkpoints/actor.bin",
        "checkpoints/critic_target.bin",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let c = tmp.path().join("c");
    assert!(train(&c, "12").status.success());
    assert_ne!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(c.join("metrics.csv")).unwrap()
    );
}

#[test]
fn eval_with_and_without_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    assert!(train(&run, "5").status.success());

    let out = aris(
        &[
            "eval",
            "--checkpoint",
            run.to_str().unwrap(),
            "--episodes",
            "2",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(run.join("eval_report.csv")).unwrap();
    assert!(report.starts_with("# eval v1\n"));
    for p in ["ddpg", "random", "mrt_random_phase", "mrt_aligned_phase"] {
        assert!(
            report.contains(&format!("\n{p},")),
            "{p} missing:\n{report}"
        );
    }

    let base = tmp.path().join("base");
    let out = aris(
        &[
            "eval",
            "--out",
            base.to_str().unwrap(),
            "--episodes",
            "2",
            "--override",
            "episode.steps=5",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(base.join("eval_report.csv")).unwrap();
    assert!(!report.contains("ddpg"));
    assert!(report.contains("mrt_aligned_phase"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = aris(&["train", "--override", "no.such.key=1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no.such.key"));

    let out = aris(&["train", "--override", "scenario.dims.K=9"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("absent.cfg");
    let out = aris(
        &["train", "--config", missing.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(4));

    let out = aris(
        &["eval", "--checkpoint", tmp.path().to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(4));

    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "scenario.dims.M = 4\nthis line has no equals\n").unwrap();
    let out = aris(&["train", "--config", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('2'));
}

#[test]
fn lenient_warns_on_unknown_key() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let mut args = vec![
        "train",
        "--lenient",
        "--out",
        run.to_str().unwrap(),
        "--override",
        "typo.key=3",
    ];
    args.extend(TINY);
    let out = aris(&args, tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo.key"));
}

#[test]
fn defaults_round_trip_through_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = aris(&["defaults"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scenario.dims.M"));
    let cfg = tmp.path().join("d.cfg");
    std::fs::write(&cfg, &text).unwrap();
    let run = tmp.path().join("run");
    let mut args = vec![
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ];
    args.extend(TINY);
    let out = aris(&args, tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn small_gradcheck_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let small = [
        "--override",
        "scenario.dims.M=2",
        "--override",
        "scenario.dims.N=4",
        "--override",
        "scenario.dims.K=1",
    ];
    let mut args = vec!["gradcheck", "--seeds", "2", "--per-tensor", "6"];
    args.extend(small);
    let out = aris(&args, tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).matches("PASS").count(),
        4
    );

    let dir = tmp.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--axis",
        "scenario.dims.N",
        "--values",
        "4,8",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend(small);
    args.extend(TINY);
    let out = aris(&args, tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.contains("scenario.dims.N,4,ddpg"));
    assert!(csv.contains("scenario.dims.N,8,ddpg"));

    let out = aris(
        &["sweep", "--axis", "scenario.inner_product", "--values", "1"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}
