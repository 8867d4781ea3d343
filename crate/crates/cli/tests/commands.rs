use std::path::Path;
use std::process::{Command, Output};

fn liouville(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liouville"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("LIOUVILLE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn alpha_curve_at_25_writes_csv_below_2n() {
    let dir = tempfile::tempdir().unwrap();
    let o = liouville(
        dir.path(),
        &[
            "alpha-curve",
            "--N",
            "25",
            "--a-min",
            "-6",
            "--a-max",
            "12",
            "--step",
            "0.05",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let alpha_min: f64 = line
        .split("alpha_min=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(alpha_min < 50.0, "{line}");
    let rows = data_rows(&dir.path().join("alpha_curve.csv"));
    assert_eq!(rows[0], "N,a,alpha,alpha_prime,zero_count");
    assert!(rows.len() > 361);
}

#[test]
fn count_at_level_eleven() {
    let dir = tempfile::tempdir().unwrap();
    let o = liouville(dir.path(), &["count", "--N", "11"]);
    assert!(o.status.success());
    let line = stdout(&o);
    let count: usize = line
        .split(": ")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(count >= 4, "{line}");
}

#[test]
fn invalid_parameters_give_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = liouville(dir.path(), &["alpha-curve", "--N", "-1"]);
    assert!(!o.status.success());
    let record: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"], "InvalidConfig");
    assert_eq!(record["command"], "alpha-curve");
    assert!(
        std::fs::read_dir(dir.path()).unwrap().next().is_none(),
        "nothing written before validation"
    );

    let o = liouville(dir.path(), &["n0", "--bracket", "2", "1"]);
    assert!(!o.status.success());
}

#[test]
fn unknown_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = liouville(dir.path(), &["count", "--N", "3", "--colour", "red"]);
    assert!(!o.status.success());
}

#[test]
fn json_mirrors_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "jn-curve", "--N", "10", "--a-min", "0", "--a-max", "2", "--step", "0.5",
    ];
    assert!(liouville(dir.path(), &args).status.success());
    let mut json_args = vec!["--format", "json"];
    json_args.extend(args);
    assert!(liouville(dir.path(), &json_args).status.success());
    let csv = data_rows(&dir.path().join("jn_curve.csv"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("jn_curve.json")).unwrap())
            .unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), csv.len() - 1);
    assert_eq!(json["metadata"]["config"]["N"], "10");
    for (row, line) in rows.iter().zip(&csv[1..]) {
        let j: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(row["J"].as_f64().unwrap(), j);
    }
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["c-of-n", "--n-min", "4", "--n-max", "6", "--n-step", "1"];
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_liouville"))
            .arg("--out-dir")
            .arg(dir.path())
            .args(args)
            .env("LIOUVILLE_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(dir.path().join("c_of_n.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn verify_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = liouville(dir.path(), &["verify", "--criterion", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(
        text.contains("criterion  5") && text.contains("PASS"),
        "{text}"
    );
    assert!(dir.path().join("verify.csv").exists());
}
