use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_epscluster"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FOUR_POINTS: &str = "x\n0\n1\n10\n11\n";

#[test]
fn hand_example_scores() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "pts.csv", FOUR_POINTS);
    let labels = write(&dir, "labels.csv", "point_id,label\n0,A\n1,A\n2,B\n3,B\n");
    let o = run(&["score", s(&data), "--labels", s(&labels)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "calinski_harabasz,300,2\ndavies_bouldin,0.1,2\n"
    );

    let o = run(&[
        "score",
        s(&data),
        "--labels",
        s(&labels),
        "--score",
        "davies-bouldin",
    ]);
    assert_eq!(stdout(&o), "davies_bouldin,0.1,2\n");
}

#[test]
fn single_cluster_score_is_an_error() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "pts.csv", FOUR_POINTS);
    let labels = write(&dir, "labels.csv", "point_id,label\n0,A\n1,A\n2,A\n3,A\n");
    let o = run(&["score", s(&data), "--labels", s(&labels)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("score undefined"));
}

#[test]
fn labels_must_cover_every_point() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "pts.csv", FOUR_POINTS);
    let labels = write(&dir, "labels.csv", "point_id,label\n0,A\n1,A\n2,B\n");
    let o = run(&["score", s(&data), "--labels", s(&labels)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("point 3 has no label"));
}

#[test]
fn empty_input_exits_with_code_two() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "empty.csv", "");
    let out = dir.path().join("tree.json");
    let o = run(&["run", s(&data), "--eps0", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "pts.csv", FOUR_POINTS);
    let out = dir.path().join("tree.json");
    for extra in [["--alpha", "1.0"], ["--kappa", "1"], ["--eps0", "-2"]] {
        let mut args = vec!["run", s(&data), "--out", s(&out), "--eps0", "1"];
        args.extend(extra);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{extra:?}: {}", stderr(&o));
    }
    let o = run(&["run", s(&data), "--out", s(&out), "--solver", "quantum"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tree.json");
    let o = run(&[
        "run",
        s(&dir.path().join("nope.csv")),
        "--eps0",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn separable_line_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "pts.csv", FOUR_POINTS);
    let tree = dir.path().join("tree.json");
    let o = run(&[
        "run",
        s(&data),
        "--eps0",
        "5",
        "--alpha",
        "1.3",
        "--kappa",
        "10",
        "--out",
        s(&tree),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stdout(&o);
    assert!(
        summary.starts_with("level,epsilon,nodes,seconds\n1,5,2,"),
        "{summary}"
    );

    let labels = dir.path().join("labels.csv");
    let o = run(&["labels", s(&tree), "--level", "1", "--out", s(&labels)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&labels).unwrap();
    let got: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(got[0], got[1]);
    assert_eq!(got[2], got[3]);
    assert_ne!(got[0], got[2]);

    let o = run(&["score", s(&data), "--labels", s(&labels)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "calinski_harabasz,300,2\ndavies_bouldin,0.1,2\n"
    );

    let o = run(&["labels", s(&tree), "--level", "0"]);
    assert_eq!(stdout(&o), "point_id,label\n0,0\n1,1\n2,2\n3,3\n");
}

#[test]
fn last_level_labels_are_all_equal_and_bad_level_lists_range() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "pts.csv", FOUR_POINTS);
    let tree = dir.path().join("tree.json");
    assert!(run(&["run", s(&data), "--eps0", "5", "--out", s(&tree)])
        .status
        .success());
    let json: String = std::fs::read_to_string(&tree).unwrap();
    let doc: serde_like::Doc = serde_like::parse(&json);
    let last = doc.n_levels - 1;

    let o = run(&["labels", s(&tree), "--level", &last.to_string()]);
    let labels: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(labels.len(), 4);
    assert!(labels.iter().all(|l| *l == labels[0]));

    let o = run(&["labels", s(&tree), "--level", "99"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains(&format!("0..={last}")),
        "{}",
        stderr(&o)
    );
}

/// Minimal field extraction so the test does not depend on a JSON crate.
mod serde_like {
    pub struct Doc {
        pub n_levels: usize,
    }

    pub fn parse(json: &str) -> Doc {
        let key = "\"n_levels\":";
        let start = json.find(key).expect("n_levels present") + key.len();
        let digits: String = json[start..]
            .chars()
            .take_while(char::is_ascii_digit)
            .collect();
        Doc {
            n_levels: digits.parse().unwrap(),
        }
    }
}

#[test]
fn grid_run_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("grid.csv");
    let o = run(&[
        "gen-grid",
        "--side",
        "4",
        "--samples-per-cell",
        "50",
        "--seed",
        "3",
        "--out",
        s(&data),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("x,y,label\n"));
    assert_eq!(text.lines().count(), 801);

    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let tree = dir.path().join(format!("tree{}.json", outputs.len()));
        let o = run(&[
            "--threads",
            threads,
            "run",
            s(&data),
            "--exclude-column",
            "label",
            "--eps0",
            "1",
            "--kappa",
            "100",
            "--seed",
            "5",
            "--out",
            s(&tree),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(std::fs::read(&tree).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);

    let tree = dir.path().join("tree0.json");
    let o = run(&["labels", s(&tree), "--clusters", "16"]);
    if o.status.success() {
        let labels: std::collections::BTreeSet<String> = stdout(&o)
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().to_string())
            .collect();
        assert_eq!(labels.len(), 16);
    } else {
        assert!(stderr(&o).contains("level sizes"));
    }

    let o = run(&[
        "score",
        s(&data),
        "--exclude-column",
        "label",
        "--tree",
        s(&tree),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("level,score_name,value,n_clusters\n"));
    assert!(out.lines().any(|l| l.contains(",calinski_harabasz,")));

    // A tree is only scored against the dataset it was built from.
    let o = run(&["score", s(&data), "--tree", s(&tree)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn auto_eps0_is_reported() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("grid.csv");
    assert!(run(&[
        "gen-grid",
        "--side",
        "3",
        "--samples-per-cell",
        "40",
        "--out",
        s(&data)
    ])
    .status
    .success());
    let tree = dir.path().join("tree.json");
    let o = run(&[
        "run",
        s(&data),
        "--exclude-column",
        "label",
        "--out",
        s(&tree),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("estimated eps0 "));
}

#[test]
fn zero_noise_grid_sits_on_cell_centres() {
    let o = run(&[
        "gen-grid",
        "--side",
        "2",
        "--samples-per-cell",
        "1",
        "--sigma",
        "0",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "x,y,label\n5,5,0\n15,5,1\n5,15,2\n15,15,3\n");
}

#[test]
fn export_qubo_writes_problem_text() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "pts.csv", "x\n0\n0.5\n10\n");
    let o = run(&["export-qubo", s(&data), "--eps", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("3 0"));
    let entries: Vec<&str> = lines.collect();
    assert!(entries.contains(&"0 0 -1"));
    assert!(entries.contains(&"0 1 1.1"));
    assert!(entries.contains(&"2 2 -1"));

    let o = run(&["export-qubo", s(&data), "--eps", "1", "--reduce"]);
    assert!(stdout(&o).starts_with("2 -1\n"), "{}", stdout(&o));

    let o = run(&["export-qubo", s(&data), "--eps", "1", "--kind", "cover"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = run(&["export-qubo", s(&data), "--eps", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
