use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn strata(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_strata"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const COARSE: [&str; 10] = ["--n", "801", "--strip-lx", "12", "--nx", "129", "--ly", "30", "--ny", "161"];

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let o = strata(&["atlas", "--n", "2000", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("`n`"));

    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "[grid]\nlx = 20\nbogus = 1\n").unwrap();
    let o = strata(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = strata(&["atlas", "--out", out.to_str().unwrap()], &[("STRATA_THREADS", "zero")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("STRATA_THREADS"));

    let o = strata(&["frobnicate"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn gl_above_m_is_a_hypothesis_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gl");
    let mut args = vec!["run", "--potential", "gl", "--c-rel", "0.5", "--out", out.to_str().unwrap()];
    args.extend(COARSE);
    let o = strata(&args, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("(*)"));
}

fn perturb_minimizer(dir: &Path) {
    let path = dir.join("minimizer_0.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mid = lines.len() / 2 + 5;
    let cols: Vec<&str> = lines[mid].split(',').collect();
    lines[mid] = format!("{},{},{}", cols[0], cols[1], 1e3);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn atlas_solve_audit_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let atlas = tmp.path().join("atlas");
    let solve = tmp.path().join("solve");
    let o = strata(&["atlas", "--n", "801", "--out", atlas.to_str().unwrap(), "--strict"], &[("STRATA_THREADS", "2")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("(*) holds"));

    let mut args = vec!["solve", "--atlas", atlas.to_str().unwrap(), "--c-rel", "0", "--out", solve.to_str().unwrap(), "--strict"];
    args.extend(&COARSE[2..]);
    let o = strata(&args, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(solve.join("c_00/report.json").exists());
    assert!(fs::read_to_string(solve.join("summary.md")).unwrap().contains("heteroclinic"));

    let o = strata(&["audit", "--atlas", atlas.to_str().unwrap(), "--solve", solve.to_str().unwrap(), "--strict"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let audits: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(audits.as_array().unwrap().iter().any(|a| a["name"] == "c_00/energy"));

    // a corrupted minimiser breaks the L∞ audit: reported, and fatal under --strict
    perturb_minimizer(&atlas);
    let o = strata(&["audit", "--atlas", atlas.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("linf_bound[0]"));
    let o = strata(&["audit", "--atlas", atlas.to_str().unwrap(), "--strict"], &[]);
    assert_eq!(code(&o), 5);
}
