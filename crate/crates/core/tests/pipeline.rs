use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use strata_core::io::{
    parse_config, read_atlas, run_audit, run_pipeline, PipelineError, RunConfig, RunReport, FIELD_HEADER,
    METRICS_HEADER, PROFILE_HEADER,
};
use strata_core::strip2d::SolutionKind;
use strata_core::verify::AuditResult;

fn coarse(out: &Path, c_rel: &str) -> RunConfig {
    let text = format!(
        "[grid]\nn = 801\nstrip_lx = 12\nnx = 129\nly = 30\nny = 161\n[schedule]\nc_rel = {c_rel}\n[output]\nout = {}\n",
        out.display()
    );
    parse_config(&text).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn channel_pipeline_outputs_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = coarse(&out, "0, 0.5");
    let summary = run_pipeline(&cfg, 1).unwrap();
    assert!(summary.star_holds);
    assert!(summary.all_solved);
    assert!(summary.audits_passed);
    assert_eq!(summary.exit_code(true), 0);
    let kinds: Vec<SolutionKind> = summary.reports.iter().map(|r| r.solution.kind).collect();
    assert_eq!(kinds, [SolutionKind::Heteroclinic, SolutionKind::BrakeOrbit]);

    // golden headers and key names
    assert_eq!(first_line(&out.join("minimizer_0.csv")), PROFILE_HEADER);
    assert_eq!(PROFILE_HEADER, "x,q1,q2");
    for c in ["c_00", "c_01"] {
        assert_eq!(first_line(&out.join(c).join("field.csv")), "x,y,u1,u2");
        assert_eq!(first_line(&out.join(c).join("metrics.csv")), "y,V,kinetic,E,dist_minus,dist_plus");
    }
    assert_eq!(FIELD_HEADER, "x,y,u1,u2");
    assert_eq!(METRICS_HEADER, "y,V,kinetic,E,dist_minus,dist_plus");
    let hyp: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("hypothesis.json")).unwrap()).unwrap();
    for key in ["R", "mu0", "delta_bar", "w_lo", "w_hi", "delta0", "lambda0", "omega_r"] {
        assert!(hyp.get(key).is_some(), "hypothesis.json lacks {key}");
    }
    assert!(hyp["omega_r"][0].as_array().unwrap().len() == 2);
    let atlas: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("atlas.json")).unwrap()).unwrap();
    for key in ["m", "m_star", "d0", "star_holds", "cluster_count", "clusters"] {
        assert!(atlas.get(key).is_some(), "atlas.json lacks {key}");
    }
    assert_eq!(atlas["cluster_count"], 2);
    assert_eq!(atlas["clusters"][1]["file"], "minimizer_1.csv");
    assert!(atlas["clusters"][0]["action"].is_number());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("c_01/report.json")).unwrap()).unwrap();
    for key in ["c", "kind", "s_c", "t_c", "T_c", "energy_dev", "residual", "phi_c", "equipartition_gap"] {
        assert!(report.get(key).is_some(), "report.json lacks {key}");
    }
    assert_eq!(report["kind"], "brake_orbit");
    let parsed: RunReport = serde_json::from_value(report).unwrap();
    assert_eq!(parsed, summary.reports[1]);
    let audits: Vec<AuditResult> = serde_json::from_str(&fs::read_to_string(out.join("c_01/audits.json")).unwrap()).unwrap();
    assert!(audits.iter().all(|a| a.passed && a.context.contains_key("tolerance")));
    let md = fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(md.contains("| c_rel | c | kind | T_c | energy_dev | residual | φ_c |"));
    assert!(md.contains("brake_orbit"));

    // the stored atlas reloads exactly
    let (_, _, back) = read_atlas(&out).unwrap();
    assert_eq!(back.clusters.len(), 2);
    assert_eq!(back.m, atlas["m"].as_f64().unwrap());
    assert!(back.star_holds);

    // audits recomputed from files agree with the stored ones
    let again = run_audit(&out, Some(&out)).unwrap();
    let stored: Vec<AuditResult> = serde_json::from_str(&fs::read_to_string(out.join("audits.json")).unwrap()).unwrap();
    assert_eq!(&again[..stored.len()], &stored[..]);
    let level1: Vec<&AuditResult> = again.iter().filter(|a| a.name.starts_with("c_01/")).collect();
    assert_eq!(level1.len(), audits.len());
    for (a, b) in level1.iter().zip(&audits) {
        assert_eq!(a.name, format!("c_01/{}", b.name));
        assert_eq!(a.passed, b.passed);
    }

    // a rerun, sequential or concurrent, is byte-identical
    let first = snapshot(&out);
    fs::remove_dir_all(&out).unwrap();
    run_pipeline(&cfg, 2).unwrap();
    let second = snapshot(&out);
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(bytes == &second[name], "{name} differs between runs");
    }
}

#[test]
fn gl_levels_above_m_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = coarse(&tmp.path().join("gl"), "0.5");
    cfg.set("kind", "gl").unwrap();
    match run_pipeline(&cfg, 1) {
        Err(e @ PipelineError::Hypothesis(_)) => {
            assert!(e.to_string().contains("(*)"), "{e}");
            assert_eq!(e.exit_code(), 3);
        }
        other => panic!("expected a refusal, got {other:?}"),
    }
    // the atlas is still written
    assert!(tmp.path().join("gl/atlas.json").exists());
}

#[test]
fn channel_at_m_gives_a_heteroclinic_report() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_pipeline(&coarse(&tmp.path().join("m"), "0"), 1).unwrap();
    let r = &summary.reports[0].solution;
    assert_eq!(r.kind, SolutionKind::Heteroclinic);
    assert!(r.s_c.is_none() && r.t_c.is_none());
    assert!(r.endpoint_dist_minus <= r.d0 / 2.0 && r.endpoint_dist_plus <= r.d0 / 2.0);
}

#[test]
fn invalid_config_maps_to_exit_code_two() {
    let err = run_pipeline(&RunConfig { n: 2000, ..RunConfig::default() }, 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("`n`"));
}
