//! Acceptance: every command re-run with identical config and seed produces
//! byte-identical output files, and exit codes distinguish validation
//! failures from internal invariant violations.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_q2fmm")
}

fn read_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path()).unwrap(),
        );
    }
    out
}

const CONFIG: &str = r#"
[lattice]
width = 4
height = 4
electron_count = 8

[synthesis]
order_p = 0

[sweep]
widths = [4, 8, 16, 32]
p_values = [1, 2]
states = 10
trotter_steps = [2, 4]
t_total = 0.5
"#;

/// Criterion 13: byte-identical re-runs for every command.
#[test]
fn criterion_13_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("config.toml");
    std::fs::write(&config_path, CONFIG).unwrap();

    let commands: [&[&str]; 7] = [
        &["hierarchy"],
        &["energy", "--state-seed", "3"],
        &["synth"],
        &["simulate"],
        &["estimate"],
        &["outline-estimate"],
        &["sweep"],
    ];
    for args in commands {
        let mut runs = Vec::new();
        for run in 0..2 {
            let out_dir = tmp.path().join(format!("{}_{run}", args[0]));
            let status = Command::new(bin())
                .args(args)
                .arg("--config")
                .arg(&config_path)
                .arg("--seed")
                .arg("7")
                .arg("--jobs")
                .arg(if run == 0 { "1" } else { "2" })
                .arg("--out")
                .arg(&out_dir)
                .status()
                .unwrap();
            assert!(status.success(), "command {args:?} run {run} failed");
            runs.push(read_outputs(&out_dir));
        }
        assert!(!runs[0].is_empty(), "{args:?} produced no files");
        assert_eq!(
            runs[0].keys().collect::<Vec<_>>(),
            runs[1].keys().collect::<Vec<_>>(),
            "{args:?}: file sets differ"
        );
        for (name, bytes) in &runs[0] {
            assert_eq!(
                bytes, &runs[1][name],
                "{args:?}: {name} differs between runs (and across --jobs)"
            );
        }
        println!("PASS criterion 13 ({}): byte-identical re-runs", args[0]);
    }
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("bad.toml");
    std::fs::write(&config_path, "[lattice]\nwidth = 5\nheight = 5\n").unwrap();
    let status = Command::new(bin())
        .arg("hierarchy")
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // unknown config key is also a validation failure
    std::fs::write(&config_path, "[lattice]\nwidth = 4\nheight = 4\nbogus = 1\n").unwrap();
    let status = Command::new(bin())
        .arg("hierarchy")
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // malformed state string on the energy command
    let status = Command::new(bin())
        .args(["energy", "--state", "01x1"])
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn energy_reports_adjacent_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(bin())
        .args(["energy", "--state", "1100000000000000"])
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("E_exact=1"), "{text}");

    // empty state: all zeros
    let out = Command::new(bin())
        .args(["energy", "--state", "0000000000000000"])
        .arg("--out")
        .arg(tmp.path().join("out2"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("E_exact=0"), "{text}");
}

#[test]
fn simulate_reports_exact_oracle_match() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = Command::new(bin())
        .arg("simulate")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = std::fs::read_to_string(out_dir.join("simulate.txt")).unwrap();
    assert!(report.contains("ancillae restored: true"), "{report}");
    assert!(
        report.contains("max |phase error| vs quantized evaluator: 0e0"),
        "{report}"
    );
}

#[test]
fn estimate_reports_depth_monotonicity() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = Command::new(bin())
        .arg("estimate")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = std::fs::read_to_string(out_dir.join("estimate.txt")).unwrap();
    let depths: Vec<u64> = report
        .lines()
        .filter(|l| l.starts_with("depth "))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(depths.len(), 3);
    assert!(depths[0] >= depths[1] && depths[1] >= depths[2], "{depths:?}");
}

#[test]
fn sweep_writes_fit_report_with_r2_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("config.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let out_dir = tmp.path().join("out");
    let out = Command::new(bin())
        .arg("sweep")
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let fits = std::fs::read_to_string(out_dir.join("fits.txt")).unwrap();
    for form in ["sqrt(N)", "log(N)*log(Q)", "log(N)"] {
        assert!(fits.contains(form), "missing candidate {form}: {fits}");
    }
    assert!(fits.matches("r2=").count() >= 9, "{fits}");
    let csv = std::fs::read_to_string(out_dir.join("error_sweep.csv")).unwrap();
    assert!(csv.starts_with("N,p,state_seed,E_fmm,E_exact,rel_error"));
    assert!(out_dir.join("trotter_sweep.csv").exists());
}
