//! Configuration, artifact files and the end-to-end pipeline.

mod config;
pub mod files;
mod pipeline;

pub use config::{parse_config, seed_from_label, ConfigError, PotentialChoice, RunConfig};
pub use files::{read_atlas, write_atlas, AtlasFile, FileError, FIELD_HEADER, METRICS_HEADER, PROFILE_HEADER};
pub use pipeline::{
    atlas_audits, check_schedule, compute_atlas, default_v_tol, finish_level, level_dir, run_atlas, run_audit,
    run_pipeline, run_solve, solve_level, solve_schedule, summary_markdown, write_level, LevelRun, PipelineError,
    PipelineSummary, PolishSummary, RunReport, StripSummary,
};
