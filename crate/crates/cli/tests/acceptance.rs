//! Runs `metriclab full-acceptance` and reports one line per criterion.

use std::io::Write;
use std::process::Command;

#[test]
fn full_acceptance_suite() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_metriclab"))
        .args(["full-acceptance", "--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&output.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("criterion ")).collect();

    // Written straight to stderr so the harness does not swallow it.
    let mut err = std::io::stderr();
    for line in &lines {
        writeln!(err, "{line}").unwrap();
    }
    if !output.stderr.is_empty() {
        writeln!(err, "{}", String::from_utf8_lossy(&output.stderr)).unwrap();
    }

    assert_eq!(lines.len(), 12, "expected one line per criterion:\n{stdout}");
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).expect("manifest written");
    assert!(manifest.starts_with("# metriclab "));
    assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 13);
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(text.starts_with("# metriclab "));
    }

    let failed: Vec<&&str> = lines.iter().filter(|l| !l.contains(" PASS ")).collect();
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("\n"));
    assert_eq!(output.status.code(), Some(0));
}
