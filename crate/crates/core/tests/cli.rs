mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn tradelab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tradelab"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

fn setup(dir: &Path) {
    let prices = series(&alternating_closes(90));
    let mut text = String::from("Date,Open,High,Low,Close,Volume\n");
    for bar in prices.bars() {
        text.push_str(&format!("{},{c},{c},{c},{c},1000\n", bar.date, c = bar.close));
    }
    std::fs::write(dir.join("prices.csv"), text).unwrap();
    std::fs::write(
        dir.join("exp.toml"),
        r#"dataset = "prices.csv"
seeds = [0, 1]
ma_window = 4

[env]
window = 5

[td3]
episodes = 2
warmup_episodes = 1
batch_size = 8
actor_hidden = [4]
critic_hidden = [4]

[dqn]
episodes = 2
warmup_episodes = 1
batch_size = 8
hidden = [4]
"#,
    )
    .unwrap();
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn compare_writes_reports_and_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let text = stdout(&tradelab(&["compare", "-c", "exp.toml", "-o", "run"], dir.path()));
    assert!(text.contains("td3_sign_vs_td3 return_pct"));
    assert!(text.lines().any(|l| l.starts_with("buy_hold")));
    for name in [
        "comparison.csv",
        "runs.csv",
        "ttest.csv",
        "config.resolved.toml",
        "equity_tdqn_1.csv",
    ] {
        assert!(dir.path().join("run").join(name).is_file(), "{name}");
    }
}

#[test]
fn train_then_evaluate_then_ttest() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let trained = stdout(&tradelab(
        &["train", "-c", "exp.toml", "-o", "staged", "--seeds", "0..2"],
        dir.path(),
    ));
    assert!(trained.contains("seed 1 td3"));
    assert!(dir.path().join("staged/checkpoints/td3_1.ckpt").is_file());
    stdout(&tradelab(
        &["evaluate", "-c", "exp.toml", "-o", "staged", "--seeds", "0,1"],
        dir.path(),
    ));
    let before = std::fs::read(dir.path().join("staged/ttest.csv")).unwrap();
    std::fs::remove_file(dir.path().join("staged/ttest.csv")).unwrap();
    stdout(&tradelab(&["ttest", "-o", "staged", "-c", "exp.toml"], dir.path()));
    assert_eq!(std::fs::read(dir.path().join("staged/ttest.csv")).unwrap(), before);
}

#[test]
fn strategy_flag_limits_the_table() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    stdout(&tradelab(
        &[
            "compare",
            "-c",
            "exp.toml",
            "-o",
            "bh",
            "--strategies",
            "buy_hold,mrma",
            "--seeds",
            "5",
        ],
        dir.path(),
    ));
    let table = std::fs::read_to_string(dir.path().join("bh/comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["buy_hold", "mrma"]);
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = tradelab(&["compare", "-c", "exp.toml", "--strategies", "nope"], dir.path());
    assert!(!out.status.success());
    let out = tradelab(&["compare", "-c", "missing.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
    std::fs::write(dir.path().join("empty.toml"), "dataset = \"prices.csv\"\nseeds = []\n").unwrap();
    let out = tradelab(&["compare", "-c", "empty.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let out = tradelab(&["evaluate", "-c", "exp.toml", "-o", "nothing"], dir.path());
    assert!(!out.status.success());
}
