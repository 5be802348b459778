use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gdm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gdm(dir, args);
    assert!(
        out.status.success(),
        "gdm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

fn simulate(dir: &Path, density: &str, out: &str) {
    ok(
        dir,
        &[
            "simulate",
            "--users",
            "6",
            "--elements",
            "7",
            "--rank",
            "2",
            "--density",
            density,
            "--seed",
            "1",
            "--out",
            out,
        ],
    );
}

#[test]
fn simulate_counts_match_density() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "0.5", "half.csv");
    simulate(dir.path(), "1.0", "full.csv");
    assert_eq!(line_count(&dir.path().join("half.csv")), 1 + 21);
    assert_eq!(line_count(&dir.path().join("full.csv")), 1 + 42);
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "0.5", "a.csv");
    simulate(dir.path(), "0.5", "b.csv");
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

const RANK_ONE: &str = "user_id,element_id,score\na,p,1\na,q,2\nb,p,2\nb,q,4\n";

#[test]
fn train_fits_rank_one_toy_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.csv"), RANK_ONE).unwrap();
    let args = |out: &'static str| ["train", "--input", "toy.csv", "--rank", "1", "--model-out", out];
    let stdout = ok(dir.path(), &args("m1.gdm"));
    ok(dir.path(), &args("m2.gdm"));
    let objective: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("final_objective="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(objective <= 1e-6);
    assert!(stdout.contains("converged=true"));
    let model = fs::read_to_string(dir.path().join("m1.gdm")).unwrap();
    assert!(model.starts_with("gdm-v1 1 2 2\n"));
    assert_eq!(model, fs::read_to_string(dir.path().join("m2.gdm")).unwrap());
}

#[test]
fn divergence_has_its_own_exit_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.csv"), RANK_ONE).unwrap();
    let out = gdm(
        dir.path(),
        &[
            "train",
            "--input",
            "toy.csv",
            "--rank",
            "1",
            "--optimizer",
            "sgd",
            "--learning-rate",
            "1e3",
            "--model-out",
            "m.gdm",
        ],
    );
    assert_eq!(out.status.code(), Some(14));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("diverged"));
    assert_eq!(
        fs::read_dir(dir.path()).unwrap().count(),
        1,
        "only the input remains"
    );
}

#[test]
fn errors_map_to_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "user_id,element_id,score\na,p,oops\n").unwrap();
    fs::write(d.join("toy.csv"), RANK_ONE).unwrap();
    fs::write(d.join("ev.csv"), "user_id,element_id,event_type\na,p,scroll\n").unwrap();
    let code = |args: &[&str]| gdm(d, args).status.code();
    let missing = code(&["train", "--input", "nope.csv", "--rank", "1", "--model-out", "m"]);
    let parse = code(&["train", "--input", "bad.csv", "--rank", "1", "--model-out", "m"]);
    let param = code(&["train", "--input", "toy.csv", "--rank", "0", "--model-out", "m"]);
    let event = code(&["aggregate", "--events", "ev.csv", "--out", "o.csv"]);
    let usage = code(&[
        "train",
        "--input",
        "toy.csv",
        "--rank",
        "1",
        "--model-out",
        "m",
        "--bogus",
    ]);
    let codes = [missing, parse, param, event, usage];
    assert!(codes.iter().all(|c| matches!(c, Some(c) if *c != 0)), "{codes:?}");
    let mut unique = codes.to_vec();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), codes.len(), "{codes:?}");
    assert_eq!(usage, Some(2));
    assert!(!d.join("m").exists() && !d.join("o.csv").exists());
}

#[test]
fn evaluate_interpolating_model_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.csv"), RANK_ONE).unwrap();
    fs::write(
        dir.path().join("m.gdm"),
        "gdm-v1 1 2 2\nu a 1.0\nu b 2.0\ng p 1.0\ng q 2.0\n",
    )
    .unwrap();
    let report = ok(dir.path(), &["evaluate", "--model", "m.gdm", "--test", "toy.csv"]);
    assert_eq!(report, "rmse=0\nmae=0\nn_test=4\n");
}

#[test]
fn assign_reads_completed_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("user_id,element_id,score,provenance\n");
    for (user, scores) in [("Ann", [1, 2, 5, 0]), ("Bob", [5, 5, 3, 1])] {
        for (g, s) in scores.iter().enumerate() {
            csv += &format!("{user},g{},{s},observed\n", g + 1);
        }
    }
    fs::write(dir.path().join("c.csv"), csv).unwrap();
    ok(dir.path(), &["assign", "--completed", "c.csv", "--out", "a.csv"]);
    assert_eq!(
        fs::read_to_string(dir.path().join("a.csv")).unwrap(),
        "user_id,element_id,score,source\nAnn,g3,5.0,observed-row\nBob,g1,5.0,observed-row\n"
    );
}

#[test]
fn assign_from_model_covers_cold_users() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("train.csv"),
        "user_id,element_id,score\na,p,1\na,q,4\nb,p,2\n",
    )
    .unwrap();
    fs::write(
        d.join("ids.csv"),
        "user_id,element_id,score\na,p,0\nb,q,0\ncold,p,0\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "train",
            "--input",
            "train.csv",
            "--rank",
            "1",
            "--ids-from",
            "ids.csv",
            "--model-out",
            "m.gdm",
        ],
    );
    ok(
        d,
        &[
            "assign",
            "--model",
            "m.gdm",
            "--input",
            "train.csv",
            "--out",
            "a.csv",
        ],
    );
    let text = fs::read_to_string(d.join("a.csv")).unwrap();
    let cold = text.lines().find(|l| l.starts_with("cold,")).unwrap();
    // popularity fallback: q has the highest mean observed score
    assert_eq!(cold, "cold,q,4.0,observed-row");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn aggregate_empty_log_gives_empty_observations() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ev.csv"), "user_id,element_id,event_type\n").unwrap();
    ok(dir.path(), &["aggregate", "--events", "ev.csv", "--out", "o.csv"]);
    assert_eq!(
        fs::read_to_string(dir.path().join("o.csv")).unwrap(),
        "user_id,element_id,score\n"
    );
}

#[test]
fn aggregate_scores_saturate() {
    let dir = tempfile::tempdir().unwrap();
    let mut log = String::from("user_id,element_id,event_type\n");
    for _ in 0..10 {
        log += "u,g,click\n";
    }
    fs::write(dir.path().join("ev.csv"), log).unwrap();
    ok(dir.path(), &["aggregate", "--events", "ev.csv", "--out", "o.csv"]);
    assert_eq!(
        fs::read_to_string(dir.path().join("o.csv")).unwrap(),
        "user_id,element_id,score\nu,g,2.5\n"
    );
}

#[test]
fn split_partitions_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "1.0", "obs.csv");
    let out = ok(
        dir.path(),
        &[
            "split",
            "--input",
            "obs.csv",
            "--train-fraction",
            "0.8",
            "--seed",
            "5",
            "--train-out",
            "tr.csv",
            "--test-out",
            "te.csv",
        ],
    );
    assert_eq!(out, "train=33\ntest=9\n");
    let mut rows: Vec<String> = ["tr.csv", "te.csv"]
        .iter()
        .flat_map(|f| {
            fs::read_to_string(dir.path().join(f))
                .unwrap()
                .lines()
                .skip(1)
                .map(String::from)
                .collect::<Vec<_>>()
        })
        .collect();
    let mut all: Vec<String> = fs::read_to_string(dir.path().join("obs.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(String::from)
        .collect();
    rows.sort();
    all.sort();
    assert_eq!(rows, all);
}

#[test]
fn bartle_simulation_from_profile_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("profiles.csv"),
        "element_id,achiever,explorer,socializer,killer\nbadge,1,0,0,0\nmap,0,1,0,0\nchat,0,0,1,0\npvp,0,0,0,1\n",
    )
    .unwrap();
    let out = ok(
        dir.path(),
        &[
            "simulate",
            "--bartle",
            "profiles.csv",
            "--achievers",
            "2",
            "--explorers",
            "1",
            "--socializers",
            "1",
            "--killers",
            "1",
            "--jitter",
            "0",
            "--density",
            "1",
            "--out",
            "obs.csv",
            "--ground-truth",
            "gt.csv",
            "--events",
            "ev.csv",
            "--events-per-unit",
            "2",
        ],
    );
    assert!(out.starts_with("users=5\nelements=4\nobservations=20\n"));
    ok(dir.path(), &["assign", "--input", "gt.csv", "--out", "a.csv"]);
    let picks: Vec<String> = fs::read_to_string(dir.path().join("a.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        picks,
        [
            "achiever1,badge",
            "achiever2,badge",
            "explorer1,map",
            "socializer1,chat",
            "killer1,pvp"
        ]
    );
}
