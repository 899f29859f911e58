//! atlas → (*) check → solve per level → classify → audit → report.

use super::config::{ConfigError, RunConfig};
use super::files::{self, read_atlas, write_atlas, write_json, write_text, FileError};
use crate::grid::{Grid1D, Grid2D};
use crate::potential::{estimate_constants, HypothesisReport, Potential, PotentialError};
use crate::profile1d::{build_atlas, AtlasOptions, HeteroclinicAtlas, ProfileError};
use crate::strip2d::{
    classify_and_extend, detect_turning, initial_field, minimize_strip, slice_metrics, ExtendOptions, Extension, Field,
    Level, SliceMetrics, SolutionKind, SolutionReport, StripError, StripOptions, StripOutcome,
};
use crate::verify::{all_passed, audit_1d, audit_2d, AuditResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Hypothesis(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{0}")]
    Other(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Hypothesis(_) => 3,
            PipelineError::NotConverged(_) => 4,
            PipelineError::File(_) | PipelineError::Other(_) => 1,
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<PotentialError> for PipelineError {
    fn from(e: PotentialError) -> Self {
        match e {
            PotentialError::Hypothesis { .. } => PipelineError::Hypothesis(e.to_string()),
            PotentialError::Parameter(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Other(e.to_string()),
        }
    }
}

impl From<ProfileError> for PipelineError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::NotConverged { .. } | ProfileError::NoDescent { .. } => PipelineError::NotConverged(e.to_string()),
            ProfileError::Atlas(_) | ProfileError::AtlasInconsistency => PipelineError::Hypothesis(e.to_string()),
            ProfileError::Grid(_) | ProfileError::Precondition(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Other(e.to_string()),
        }
    }
}

impl From<StripError> for PipelineError {
    fn from(e: StripError) -> Self {
        match e {
            StripError::StarFails { .. } => PipelineError::Hypothesis(e.to_string()),
            StripError::Polish(_) | StripError::Turning { .. } => PipelineError::NotConverged(e.to_string()),
            StripError::Grid(_) | StripError::Level { .. } => PipelineError::Config(e.to_string()),
            StripError::Profile(p) => p.into(),
            StripError::Shape(_) => PipelineError::Other(e.to_string()),
        }
    }
}

fn search_box(cfg: &RunConfig) -> [[f64; 2]; 2] {
    let b = cfg.search_box;
    [[-b, b], [-b, b]]
}

pub fn atlas_options(cfg: &RunConfig) -> AtlasOptions {
    AtlasOptions {
        lx: cfg.lx,
        n: cfg.n,
        n_starts: cfg.starts,
        seed: cfg.rng_seed(),
        el_tol: cfg.el_tol,
        cluster_eps: cfg.cluster_eps,
        ..AtlasOptions::default()
    }
}

/// Constants of the potential and the minimiser atlas.
pub fn compute_atlas(cfg: &RunConfig, pot: &Potential) -> Result<(HypothesisReport, HeteroclinicAtlas), PipelineError> {
    let hyp = estimate_constants(pot, search_box(cfg), cfg.constants_n)?;
    let atlas = build_atlas(pot, &hyp, &atlas_options(cfg))?;
    log::info!(
        "atlas: m = {:.12}, m* − m = {:.3e}, d0 = {:.4}, {} cluster(s), (*) {}",
        atlas.m,
        atlas.m_star - atlas.m,
        atlas.d0,
        atlas.clusters.len(),
        if atlas.star_holds { "holds" } else { "fails" }
    );
    Ok((hyp, atlas))
}

/// One-dimensional audits plus the boundary check on every representative.
pub fn atlas_audits(cfg: &RunConfig, atlas: &HeteroclinicAtlas, hyp: &HypothesisReport, pot: &Potential) -> Vec<AuditResult> {
    let mut out = audit_1d(atlas, hyp, pot, cfg.el_tol);
    for (k, q) in atlas.minimizers().enumerate() {
        let d = q.boundary_distance();
        out.push(AuditResult::new(
            format!("boundary[{k}]"),
            cfg.boundary_tol - d,
            0.0,
            [("distance", d)],
        ));
    }
    out
}

/// Refuse levels above `m` unless (*) holds.
pub fn check_schedule(cfg: &RunConfig, atlas: &HeteroclinicAtlas, pot: &Potential) -> Result<(), PipelineError> {
    if atlas.star_holds {
        return Ok(());
    }
    if let Some(c) = cfg.c_rel.iter().find(|c| **c > 0.0) {
        return Err(PipelineError::Hypothesis(format!(
            "hypothesis (*) fails for {}: the minimisers form {} cluster(s), not two separated components, \
             so levels c > m are refused (c_rel = {c} requested); only c_rel = 0 is available",
            pot.label(),
            atlas.clusters.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSummary {
    pub lx: f64,
    pub nx: usize,
    pub ly: f64,
    pub ny: usize,
    pub converged: bool,
    pub residual: f64,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub escalations: usize,
    pub penalty_weight: f64,
    pub constraint_ok: bool,
    pub min_interior_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolishSummary {
    pub converged: bool,
    pub residual: f64,
    pub period_half: f64,
    pub end_v: [f64; 2],
    pub secant_iterations: usize,
    pub newton_iterations: usize,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub c_rel: f64,
    #[serde(flatten)]
    pub solution: SolutionReport,
    pub strip: StripSummary,
    pub polish: Option<PolishSummary>,
    /// The returned field is a critical point to the requested tolerance.
    pub solved: bool,
    pub audits_passed: bool,
}

#[derive(Debug, Clone)]
pub struct LevelRun {
    pub level: Level,
    pub strip: StripOutcome,
    /// Slice metrics of the minimised strip.
    pub metrics: SliceMetrics,
    pub extension: Extension,
    pub audits: Vec<AuditResult>,
    pub report: RunReport,
}

pub fn default_v_tol(level: &Level) -> f64 {
    (1e-6 * (level.m_star - level.m)).max(64.0 * f64::EPSILON * level.m.abs())
}

fn extend_options(cfg: &RunConfig) -> ExtendOptions {
    ExtendOptions {
        neumann_tol: cfg.neumann_tol,
        polish_tol: cfg.polish_tol,
        ..ExtendOptions::default()
    }
}

fn strip_level(cfg: &RunConfig, atlas: &HeteroclinicAtlas, pot: &Potential, c_rel: f64) -> Result<Level, PipelineError> {
    let gx = Grid1D::new(cfg.strip_lx, cfg.nx).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(Level::new(atlas, pot, gx, c_rel, cfg.level_el_tol)?)
}

/// Classification, extension, audits and report for a minimised strip.
pub fn finish_level(
    cfg: &RunConfig,
    level: Level,
    strip: StripOutcome,
    pot: &Potential,
    c_rel: f64,
) -> Result<LevelRun, PipelineError> {
    let metrics = slice_metrics(&strip.field, &level, pot);
    let v_tol = cfg.v_tol.unwrap_or_else(|| default_v_tol(&level));
    let turning = detect_turning(&metrics, &level, v_tol)?;
    let extension = classify_and_extend(&strip.field, &turning, &level, pot, &extend_options(cfg))?;
    let audits = audit_2d(&strip.field, &extension, &level, pot);
    let polish = extension.polish.as_ref().map(|p| PolishSummary {
        converged: p.converged,
        residual: p.residual,
        period_half: p.period_half,
        end_v: p.end_v,
        secant_iterations: p.secant_iterations,
        newton_iterations: p.newton_iterations,
    });
    // For c > m the penalised stage only has to locate the turning slices;
    // brake orbits are certified by the polish instead.
    let solved = match (extension.report.kind, &polish) {
        (SolutionKind::BrakeOrbit, Some(p)) => p.converged,
        _ => strip.converged || (level.offset > 0.0 && strip.constraint_ok),
    };
    let g = strip.field.grid();
    let report = RunReport {
        c_rel,
        solution: extension.report.clone(),
        strip: StripSummary {
            lx: g.grid_x.half_length(),
            nx: g.grid_x.n(),
            ly: g.half_height(),
            ny: g.ny(),
            converged: strip.converged,
            residual: strip.residual,
            newton_iterations: strip.newton_iterations,
            cg_iterations: strip.cg_iterations,
            escalations: strip.escalations,
            penalty_weight: strip.penalty_weight,
            constraint_ok: strip.constraint_ok,
            min_interior_v: strip.min_interior_v,
        },
        polish,
        solved,
        audits_passed: all_passed(&audits),
    };
    Ok(LevelRun {
        level,
        strip,
        metrics,
        extension,
        audits,
        report,
    })
}

/// Minimise `φ_c` at `c = m + c_rel·(m* − m)` and post-process.
pub fn solve_level(cfg: &RunConfig, atlas: &HeteroclinicAtlas, pot: &Potential, c_rel: f64) -> Result<LevelRun, PipelineError> {
    let level = strip_level(cfg, atlas, pot, c_rel)?;
    let grid = Grid2D::new(level.grid_x, cfg.ly, cfg.ny).map_err(|e| PipelineError::Config(e.to_string()))?;
    let init = initial_field(&level, grid, pot)?;
    let opts = StripOptions {
        tol: cfg.strip_tol,
        constraint_tol: cfg.constraint_tol,
        ..StripOptions::default()
    };
    let strip = minimize_strip(&init, &level, pot, &opts)?;
    log::info!(
        "c_rel {c_rel}: strip converged = {}, residual {:.2e}, φ_c = {:.6e}",
        strip.converged,
        strip.residual,
        strip.phi_c
    );
    finish_level(cfg, level, strip, pot, c_rel)
}

pub fn level_dir(out: &Path, idx: usize) -> PathBuf {
    out.join(format!("c_{idx:02}"))
}

/// `field.csv` (the extended solution), `strip.csv` (the minimised strip),
/// `metrics.csv` (slices of the strip), `report.json`, `audits.json`.
pub fn write_level(dir: &Path, run: &LevelRun) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| FileError::Io { path: dir.to_path_buf(), source })?;
    write_text(&dir.join("field.csv"), &files::field_csv(&run.extension.field))?;
    write_text(&dir.join("strip.csv"), &files::field_csv(&run.strip.field))?;
    write_text(&dir.join("metrics.csv"), &files::metrics_csv(&run.metrics))?;
    write_json(&dir.join("report.json"), &run.report)?;
    write_json(&dir.join("audits.json"), &run.audits)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("∞".to_string(), |v| format!("{v:.4}"))
}

pub fn summary_markdown(pot: &Potential, atlas: &HeteroclinicAtlas, reports: &[RunReport], audits_1d: &[AuditResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# strata run\n");
    let _ = writeln!(s, "- potential: {}", pot.label());
    let _ = writeln!(s, "- m = {:.10}, m* − m = {:.3e}, d0 = {:.4}", atlas.m, atlas.m_star - atlas.m, atlas.d0);
    let _ = writeln!(
        s,
        "- clusters: {}, hypothesis (*): {}",
        atlas.clusters.len(),
        if atlas.star_holds { "holds" } else { "fails" }
    );
    let failed = audits_1d.iter().filter(|a| !a.passed).count();
    let _ = writeln!(s, "- one-dimensional audits: {} run, {} failed\n", audits_1d.len(), failed);
    if reports.is_empty() {
        return s;
    }
    let _ = writeln!(s, "| c_rel | c | kind | T_c | energy_dev | residual | φ_c | solved | audits |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
    for r in reports {
        let sol = &r.solution;
        let kind = serde_json::to_value(sol.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let _ = writeln!(
            s,
            "| {} | {:.10} | {} | {} | {:.3e} | {:.3e} | {:.6e} | {} | {} |",
            r.c_rel,
            sol.c,
            kind,
            fmt_opt(sol.period_half),
            sol.energy_dev,
            sol.residual,
            sol.phi_c,
            if r.solved { "yes" } else { "no" },
            if r.audits_passed { "pass" } else { "FAIL" }
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub out: PathBuf,
    pub star_holds: bool,
    pub reports: Vec<RunReport>,
    pub audits_passed: bool,
    pub all_solved: bool,
}

impl PipelineSummary {
    /// 4 for an unsolved level, 5 for an audit failure under `strict`.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if !self.all_solved {
            4
        } else if strict && !self.audits_passed {
            5
        } else {
            0
        }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::Other(e.to_string()))
}

/// Solve every scheduled level, `parallel_c` at a time, writing `c_XX/`.
pub fn solve_schedule(
    cfg: &RunConfig,
    atlas: &HeteroclinicAtlas,
    pot: &Potential,
    parallel_c: usize,
) -> Result<Vec<RunReport>, PipelineError> {
    check_schedule(cfg, atlas, pot)?;
    let one = |(idx, c): (usize, &f64)| -> Result<RunReport, PipelineError> {
        let run = solve_level(cfg, atlas, pot, *c)?;
        write_level(&level_dir(&cfg.out, idx), &run)?;
        Ok(run.report)
    };
    if parallel_c > 1 {
        let pool = thread_pool(parallel_c)?;
        pool.install(|| cfg.c_rel.par_iter().enumerate().map(one).collect())
    } else {
        cfg.c_rel.iter().enumerate().map(one).collect()
    }
}

fn finish(
    cfg: &RunConfig,
    pot: &Potential,
    atlas: &HeteroclinicAtlas,
    audits: &[AuditResult],
    reports: Vec<RunReport>,
) -> Result<PipelineSummary, PipelineError> {
    write_text(&cfg.out.join("summary.md"), &summary_markdown(pot, atlas, &reports, audits))?;
    Ok(PipelineSummary {
        out: cfg.out.clone(),
        star_holds: atlas.star_holds,
        audits_passed: all_passed(audits) && reports.iter().all(|r| r.audits_passed),
        all_solved: reports.iter().all(|r| r.solved),
        reports,
    })
}

fn prepare_out(cfg: &RunConfig) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&cfg.out).map_err(|source| FileError::Io { path: cfg.out.clone(), source })?;
    write_text(&cfg.out.join("run.cfg"), &cfg.serialize())?;
    Ok(())
}

/// Atlas artifacts and one-dimensional audits into `cfg.out`.
pub fn run_atlas(cfg: &RunConfig) -> Result<(Potential, HypothesisReport, HeteroclinicAtlas, Vec<AuditResult>), PipelineError> {
    cfg.validate()?;
    let pot = cfg.build_potential()?;
    prepare_out(cfg)?;
    let (hyp, atlas) = compute_atlas(cfg, &pot)?;
    write_atlas(&cfg.out, &atlas, &hyp, &pot)?;
    let audits = atlas_audits(cfg, &atlas, &hyp, &pot);
    write_json(&cfg.out.join("audits.json"), &audits)?;
    Ok((pot, hyp, atlas, audits))
}

/// The full pipeline. Atlas artifacts are written even when the schedule
/// is then refused.
pub fn run_pipeline(cfg: &RunConfig, parallel_c: usize) -> Result<PipelineSummary, PipelineError> {
    let (pot, _, atlas, audits) = run_atlas(cfg)?;
    let reports = solve_schedule(cfg, &atlas, &pot, parallel_c)?;
    finish(cfg, &pot, &atlas, &audits, reports)
}

/// Levels for a stored atlas; `cfg.out` receives `run.cfg`, `c_XX/` and `summary.md`.
pub fn run_solve(cfg: &RunConfig, atlas_dir: &Path, parallel_c: usize) -> Result<PipelineSummary, PipelineError> {
    cfg.validate()?;
    let (pot, hyp, atlas) = read_atlas(atlas_dir)?;
    prepare_out(cfg)?;
    let audits = atlas_audits(cfg, &atlas, &hyp, &pot);
    let reports = solve_schedule(cfg, &atlas, &pot, parallel_c)?;
    finish(cfg, &pot, &atlas, &audits, reports)
}

/// Recompute the audits of a stored atlas and, optionally, of the levels
/// stored under `solve_dir` (which must hold `run.cfg`). Nothing is written.
pub fn run_audit(atlas_dir: &Path, solve_dir: Option<&Path>) -> Result<Vec<AuditResult>, PipelineError> {
    let (pot, hyp, atlas) = read_atlas(atlas_dir)?;
    let cfg = match solve_dir {
        Some(d) => super::config::parse_config(&files::read_text(&d.join("run.cfg"))?)?,
        None => RunConfig::default(),
    };
    let mut out = atlas_audits(&cfg, &atlas, &hyp, &pot);
    let Some(dir) = solve_dir else {
        return Ok(out);
    };
    for idx in 0..cfg.c_rel.len() {
        let ldir = level_dir(dir, idx);
        let report: RunReport = files::read_json(&ldir.join("report.json"))?;
        let level = strip_level(&cfg, &atlas, &pot, report.c_rel)?;
        let grid = Grid2D::new(level.grid_x, report.strip.ly, report.strip.ny).map_err(|e| PipelineError::Config(e.to_string()))?;
        let field: Field = files::read_field_csv(&ldir.join("strip.csv"), grid)?;
        let metrics = slice_metrics(&field, &level, &pot);
        let v_tol = cfg.v_tol.unwrap_or_else(|| default_v_tol(&level));
        let turning = detect_turning(&metrics, &level, v_tol)?;
        let ext = classify_and_extend(&field, &turning, &level, &pot, &extend_options(&cfg))?;
        out.extend(audit_2d(&field, &ext, &level, &pot).into_iter().map(|mut a| {
            a.name = format!("c_{idx:02}/{}", a.name);
            a
        }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(all_solved: bool, audits_passed: bool) -> PipelineSummary {
        PipelineSummary { out: PathBuf::new(), star_holds: true, reports: Vec::new(), audits_passed, all_solved }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(summary(true, true).exit_code(true), 0);
        assert_eq!(summary(true, false).exit_code(false), 0);
        assert_eq!(summary(true, false).exit_code(true), 5);
        assert_eq!(summary(false, false).exit_code(true), 4);
        assert_eq!(PipelineError::Config(String::new()).exit_code(), 2);
        assert_eq!(PipelineError::from(StripError::StarFails { clusters: 1 }).exit_code(), 3);
        assert_eq!(PipelineError::from(StripError::Polish(String::new())).exit_code(), 4);
        let e = ProfileError::NotConverged { iterations: 1, residual: 1.0 };
        assert_eq!(PipelineError::from(StripError::Profile(e)).exit_code(), 4);
    }
}
