use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn farmgame(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_farmgame"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FARMGAME_PORT")
        .env_remove("FARMGAME_DATA_DIR")
        .env_remove("FARMGAME_GAME_CONFIG")
        .env_remove("FARMGAME_TIMEOUT_MINUTES")
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

const AGENTS: &str = "RA=30,RT=30,LRA=30,LRT=30";

#[test]
fn simulate_then_analyze_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["a.jsonl", "b.jsonl"] {
        let o = farmgame(&["simulate", "--agents", AGENTS, "--seed", "11", "--out", out], d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(d.join("a.jsonl")).unwrap(), fs::read(d.join("b.jsonl")).unwrap());
    let labels = fs::read_to_string(d.join("a.labels.csv")).unwrap();
    assert_eq!(labels.lines().next(), Some("session_id,archetype"));
    assert_eq!(labels.lines().count(), 121);

    for out in ["x", "y"] {
        let o = farmgame(
            &["analyze", "--input", "a.jsonl", "--k-neighbors", "10", "--bridge-components", "--out-dir", out],
            d,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("matched accuracy"));
    }
    let x = files(&d.join("x"));
    assert_eq!(x, files(&d.join("y")));
    let names: Vec<&str> = x.iter().map(|(n, _)| n.as_str()).collect();
    for want in ["clusters.csv", "distortion_curve.csv", "embedding.csv", "embedding.svg", "fits.csv"] {
        assert!(names.contains(&want), "missing {want}: {names:?}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(farmgame(&["simulate", "--bogus"], d).status.code(), Some(2));
    assert_eq!(farmgame(&["simulate", "--agents", "XX=3"], d).status.code(), Some(2));
    assert_eq!(farmgame(&["analyze", "--input", "nope.jsonl"], d).status.code(), Some(3));
    assert_eq!(farmgame(&["analyze", "--input", "x", "--k-range", "5..2"], d).status.code(), Some(2));

    fs::write(d.join("junk.jsonl"), "{not json}\n").unwrap();
    assert_eq!(farmgame(&["analyze", "--input", "junk.jsonl"], d).status.code(), Some(4));

    let o = farmgame(&["simulate", "--agents", AGENTS, "--seed", "0", "--out", "s.jsonl"], d);
    assert!(o.status.success());
    let o = farmgame(&["analyze", "--input", "s.jsonl", "--k-neighbors", "3"], d);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bridge-components"));
}

#[test]
fn export_of_empty_data_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let o = farmgame(&["export", "--data-dir", "data"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}

#[test]
fn config_file_and_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("cfg.toml"), "[simulate]\nagents = \"RA=2,RT=2,LRA=2,LRT=2\"\nseed = 4\nout = \"c.jsonl\"\n").unwrap();
    let o = farmgame(&["--config", "cfg.toml", "simulate"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(d.join("c.jsonl")).unwrap().lines().filter(|l| l.contains("session_start")).count(), 8);

    fs::write(d.join("bad.toml"), "[simulate\n").unwrap();
    assert_eq!(farmgame(&["--config", "bad.toml", "simulate"], d).status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_farmgame"))
        .args(["export"])
        .current_dir(d)
        .env("FARMGAME_PORT", "not-a-port")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
