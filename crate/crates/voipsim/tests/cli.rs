use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use voipsim::output::METRICS_HEADER;

fn voipsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voipsim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("VOIPSIM_OUT")
        .output()
        .expect("spawn voipsim")
}

const SHORT: &str = r#"
[scenario]
name = "short"
run_length_s = 120
warm_up_s = 30
bucket_width_s = 10

[calls]
inter_arrival_mean_s = 5
duration_mean_s = 30

[[subnet]]
name = "left"
kind = "wifi"
stations = 2

[[subnet]]
name = "right"
kind = "umts"
stations = 2
"#;

fn scenario_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = voipsim(&["run", "--scenario", "no-such-scenario"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wifi-wifi"));

    let bad_key = scenario_file(dir.path(), "bad.toml", &SHORT.replace("stations = 2\n", "stations = 2\nspeed = 9\n"));
    let o = voipsim(&["run", "--scenario", bad_key.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("speed") && stderr(&o).contains("line"), "{}", stderr(&o));

    let bad_value = scenario_file(dir.path(), "warm.toml", &SHORT.replace("warm_up_s = 30", "warm_up_s = 300"));
    let o = voipsim(&["run", "--scenario", bad_value.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run_length"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn repetitions_use_consecutive_seeds_and_full_bucket_grid() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario_file(dir.path(), "short.toml", SHORT);
    let o = voipsim(&["run", "--scenario", file.to_str().unwrap(), "--seed", "5", "--reps", "3", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for seed in 5..8 {
        let run = dir.path().join(format!("res/short/seed-{seed}"));
        let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        let rows: Vec<&str> = lines.collect();
        // 120 s / 10 s windows, two directions.
        assert_eq!(rows.len(), 24);
        for row in &rows {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols.len(), 11, "{row}");
            assert_eq!(cols[0], "short");
            assert_eq!(cols[1], seed.to_string());
            assert!(cols[2] == "left->right" || cols[2] == "right->left");
        }
        let manifest = std::fs::read_to_string(run.join("manifest.toml")).unwrap();
        assert!(manifest.contains(&format!("seed = {seed}")));
        assert!(manifest.contains("cw_max = 1023") && manifest.contains("bler = 0.02"), "defaults are echoed");
    }
}

#[test]
fn same_seed_gives_identical_files_and_traces_are_optional() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario_file(dir.path(), "short.toml", SHORT);
    let f = file.to_str().unwrap();
    for out in ["a", "b"] {
        let o = voipsim(&["run", "--scenario", f, "--seed", "3", "--out", out, "--trace", "--session-log", "--jitter-pairs"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["metrics.csv", "events.txt", "paths.csv", "sessions.txt", "jitter_pairs.csv", "manifest.toml"] {
        let a = std::fs::read(dir.path().join("a/short/seed-3").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b/short/seed-3").join(name)).unwrap();
        assert!(!a.is_empty(), "{name}");
        assert_eq!(a, b, "{name}");
    }
    let events = std::fs::read_to_string(dir.path().join("a/short/seed-3/events.txt")).unwrap();
    let first: Vec<&str> = events.lines().next().unwrap().split(' ').collect();
    assert_eq!(first.len(), 4);
    assert!(first[0].parse::<u64>().is_ok() && first[1].parse::<u64>().is_ok());
    let sessions = std::fs::read_to_string(dir.path().join("a/short/seed-3/sessions.txt")).unwrap();
    assert!(sessions.contains("Ringing→Established"));

    let o = voipsim(&["run", "--scenario", f, "--seed", "4", "--out", "c"], dir.path());
    assert!(o.status.success());
    let run = dir.path().join("c/short/seed-4");
    assert!(!run.join("events.txt").exists() && !run.join("sessions.txt").exists());
    assert_ne!(
        std::fs::read(run.join("metrics.csv")).unwrap(),
        std::fs::read(dir.path().join("a/short/seed-3/metrics.csv")).unwrap()
    );
}

#[test]
fn output_directory_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario_file(dir.path(), "short.toml", SHORT);
    let o = Command::new(env!("CARGO_BIN_EXE_voipsim"))
        .args(["run", "--scenario", file.to_str().unwrap()])
        .current_dir(dir.path())
        .env("VOIPSIM_OUT", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("env-out/short/seed-1/metrics.csv").exists());
}

#[test]
fn compare_overlays_and_stacks_compatible_runs() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario_file(dir.path(), "short.toml", SHORT);
    let other = scenario_file(dir.path(), "other.toml", &SHORT.replace("name = \"short\"", "name = \"other\""));
    let wide = scenario_file(dir.path(), "wide.toml", &SHORT.replace("name = \"short\"", "name = \"wide\"").replace("bucket_width_s = 10", "bucket_width_s = 20"));
    for f in [&file, &other, &wide] {
        assert!(voipsim(&["run", "--scenario", f.to_str().unwrap(), "--out", "o"], dir.path()).status.success());
    }
    let one = voipsim(&["compare", "--mode", "overlaid", "o/short/seed-1"], dir.path());
    assert!(one.status.success());
    let original = std::fs::read_to_string(dir.path().join("o/short/seed-1/metrics.csv")).unwrap();
    assert_eq!(String::from_utf8(one.stdout).unwrap(), original);

    let o = voipsim(&["compare", "--mode", "overlaid", "-o", "merged.csv", "o/short/seed-1", "o/other/seed-1"], dir.path());
    assert!(o.status.success());
    let merged = std::fs::read_to_string(dir.path().join("merged.csv")).unwrap();
    assert_eq!(merged.lines().filter(|l| *l == METRICS_HEADER).count(), 1);
    assert_eq!(merged.lines().count(), 1 + 2 * 24);
    assert!(merged.contains("\nother,1,"));

    let stacked = voipsim(&["compare", "--mode", "stacked", "o/short/seed-1", "o/other/seed-1"], dir.path());
    let text = String::from_utf8(stacked.stdout).unwrap();
    let blocks: Vec<&str> = text.split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    assert!(blocks[0].starts_with("# scenario=short seed=1\n") && blocks[1].starts_with("# scenario=other seed=1\n"));
    let axis = |b: &str| b.lines().skip(2).map(|l| l.split(',').nth(3).unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(axis(blocks[0]), axis(blocks[1]));

    let bad = voipsim(&["compare", "--mode", "overlaid", "o/short/seed-1", "o/wide/seed-1"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("incompatible runs"), "{}", stderr(&bad));
}

#[test]
fn mos_calculator() {
    let dir = tempfile::tempdir().unwrap();
    let out = |args: &[&str]| {
        let o = voipsim(args, dir.path());
        (o.status.code(), String::from_utf8(o.stdout).unwrap())
    };
    let (code, text) = out(&["mos", "--r", "100"]);
    assert_eq!(code, Some(0));
    assert!(text.contains("MOS    4.500") && text.contains("Excellent"));
    let (_, text) = out(&["mos", "--r", "50"]);
    assert!(text.contains("MOS    2.575") && text.contains("Fair"));
    let (_, text) = out(&["mos", "--delay", "110", "--loss", "0"]);
    assert!(text.contains("delay  Good"));
    assert_eq!(out(&["mos", "--r", "120"]).0, Some(2));
    assert_ne!(out(&["mos"]).0, Some(0));
}
