use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn credcomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credcomm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Two directed 5-cliques joined by one edge.
fn two_cliques(dir: &Path) {
    let mut csv = String::from("from_user,to_user\n");
    for base in [0, 5] {
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    csv.push_str(&format!("n{},n{}\n", base + i, base + j));
                }
            }
        }
    }
    csv.push_str("n4,n5\n");
    fs::write(dir.join("followers.csv"), csv).unwrap();
}

const DETECT_CONFIG: &str = r#"
[inputs]
followers = "followers.csv"

[refinement]
max_size = 10
min_size = 2
"#;

fn words(tag: &str, n: usize) -> String {
    (0..n).map(|i| format!("{tag}{} ", i % 40)).collect()
}

/// A small labelled corpus: `labels` pages of 320 words plus one page of
/// 100 words.
fn score_inputs(dir: &Path, labels: usize) {
    let mut pages = String::new();
    let mut csv = String::from("url,c1,c2,c3,c4,c5,c6,c7\n");
    for i in 0..labels {
        let on = i % 2 == 0;
        let text = words(if on { "cited" } else { "plain" }, 320);
        pages.push_str(&format!(
            "{{\"url\":\"https://l{i}.org/\",\"content\":\"{text}\",\"lang\":\"en\",\"available\":true}}\n"
        ));
        let b = u8::from(on);
        csv.push_str(&format!("https://l{i}.org/,{b},{b},{b},{b},{b},{b},{b}\n"));
    }
    pages.push_str(&format!(
        "{{\"url\":\"https://short.org/\",\"content\":\"{}\",\"lang\":\"en\",\"available\":true}}\n",
        words("cited", 100)
    ));
    fs::write(dir.join("pages.jsonl"), pages).unwrap();
    fs::write(dir.join("labels.csv"), csv).unwrap();
    fs::write(
        dir.join("run.toml"),
        r#"
[inputs]
pages = "pages.jsonl"
labels = "labels.csv"

[credibility]
folds = 3

[credibility.svm]
epochs = 50

[credibility.forest]
n_trees = 10
"#,
    )
    .unwrap();
}

#[test]
fn detect_finds_two_cliques() {
    let dir = tempfile::tempdir().unwrap();
    two_cliques(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, DETECT_CONFIG).unwrap();
    let out = credcomm(&["detect", "--config", path(&cfg)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let part = fs::read_to_string(dir.path().join("out/detect/partition.csv")).unwrap();
    let mut rows: Vec<(String, String)> = part
        .lines()
        .skip(1)
        .map(|l| {
            let (u, c) = l.split_once(',').unwrap();
            (u.to_string(), c.to_string())
        })
        .collect();
    rows.sort();
    assert_eq!(rows.len(), 10);
    let of = |u: &str| rows.iter().find(|(x, _)| x == u).unwrap().1.clone();
    for i in 1..5 {
        assert_eq!(of(&format!("n{i}")), of("n0"));
        assert_eq!(of(&format!("n{}", i + 5)), of("n5"));
    }
    assert_ne!(of("n0"), of("n5"));
    assert!(dir.path().join("out/detect/manifest.json").is_file());
}

#[test]
fn reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    two_cliques(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, DETECT_CONFIG).unwrap();
    let a_dir = dir.path().join("a");
    let b_dir = dir.path().join("b");
    for d in [&a_dir, &b_dir] {
        let out = credcomm(&["detect", "--config", path(&cfg), "--out", path(d)]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for f in ["partition.csv", "refinement.jsonl"] {
        assert_eq!(
            fs::read(a_dir.join("detect").join(f)).unwrap(),
            fs::read(b_dir.join("detect").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn empty_follower_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("followers.csv"), "from_user,to_user\n").unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, DETECT_CONFIG).unwrap();
    let out = credcomm(&["detect", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no edges"), "{}", stderr(&out));
}

#[test]
fn unknown_measure_lists_the_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "").unwrap();
    let out = credcomm(&["characterize", "--config", path(&cfg), "--measure", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bogus"), "{err}");
    assert!(
        err.contains("low_cred_pct") && err.contains("users_avg_tweets"),
        "{err}"
    );
}

#[test]
fn missing_upstream_stage_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "").unwrap();
    let out = credcomm(&["characterize", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("detect"), "{}", stderr(&out));
}

#[test]
fn too_few_labels_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    score_inputs(dir.path(), 9);
    let out = credcomm(&["score", "--config", path(&dir.path().join("run.toml"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("at least 10"), "{}", stderr(&out));
}

#[test]
fn short_pages_are_not_scored() {
    let dir = tempfile::tempdir().unwrap();
    score_inputs(dir.path(), 12);
    let out = credcomm(&["score", "--config", path(&dir.path().join("run.toml"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    let scores = fs::read_to_string(dir.path().join("out/score/scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 13);
    assert!(!scores.contains("short.org"));
}

#[test]
fn synth_output_runs_through_detect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = credcomm(&["synth", "--seed", "4", "--out", path(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = credcomm(&["detect", "--config", path(&data.join("pipeline.toml"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("manifest:"), "{stdout}");
}
