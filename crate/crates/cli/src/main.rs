use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use strata_core::io::{parse_config, run_atlas, run_audit, run_pipeline, run_solve, PipelineError, RunConfig};
use strata_core::verify::all_passed;

/// Layered solutions of −Δu + ∇W(u) = 0 in the plane, by minimisation.
#[derive(Parser)]
#[command(name = "strata", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimiser atlas and the (*) verdict.
    Atlas(Common),
    /// Solve the scheduled levels for a stored atlas.
    Solve {
        /// Directory written by `strata atlas`.
        #[arg(long)]
        atlas: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute audits of stored results and print them as JSON.
    Audit {
        #[arg(long)]
        atlas: PathBuf,
        /// Directory written by `strata solve` or `strata run`.
        #[arg(long)]
        solve: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Atlas, schedule and audits in one go.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    fields: Fields,
    /// Number of levels solved concurrently.
    #[arg(long, default_value_t = 1)]
    parallel_c: usize,
    /// Exit with status 5 when an audit fails.
    #[arg(long)]
    strict: bool,
}

/// One flag per configuration key.
#[derive(Args, Default)]
struct Fields {
    /// `gl` or `channel`.
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    delta_ch: Option<String>,
    #[arg(long)]
    eps_w: Option<String>,
    #[arg(long)]
    lx: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    strip_lx: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    ly: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    search_box: Option<String>,
    #[arg(long)]
    constants_n: Option<String>,
    #[arg(long)]
    el_tol: Option<String>,
    #[arg(long)]
    level_el_tol: Option<String>,
    #[arg(long)]
    v_tol: Option<String>,
    #[arg(long)]
    neumann_tol: Option<String>,
    #[arg(long)]
    constraint_tol: Option<String>,
    #[arg(long)]
    boundary_tol: Option<String>,
    #[arg(long)]
    cluster_eps: Option<String>,
    #[arg(long)]
    strip_tol: Option<String>,
    #[arg(long)]
    polish_tol: Option<String>,
    /// Comma-separated levels in [0, 1]; 0 means c = m.
    #[arg(long)]
    c_rel: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Fields {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("kind", &self.potential),
            ("delta_ch", &self.delta_ch),
            ("eps_w", &self.eps_w),
            ("lx", &self.lx),
            ("n", &self.n),
            ("strip_lx", &self.strip_lx),
            ("nx", &self.nx),
            ("ly", &self.ly),
            ("ny", &self.ny),
            ("starts", &self.starts),
            ("seed", &self.seed),
            ("search_box", &self.search_box),
            ("constants_n", &self.constants_n),
            ("el_tol", &self.el_tol),
            ("level_el_tol", &self.level_el_tol),
            ("v_tol", &self.v_tol),
            ("neumann_tol", &self.neumann_tol),
            ("constraint_tol", &self.constraint_tol),
            ("boundary_tol", &self.boundary_tol),
            ("cluster_eps", &self.cluster_eps),
            ("strip_tol", &self.strip_tol),
            ("polish_tol", &self.polish_tol),
            ("c_rel", &self.c_rel),
            ("out", &self.out),
        ]
    }
}

fn load_config(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    for (key, value) in common.fields.pairs() {
        if let Some(v) = value {
            let flag = key.replace('_', "-");
            cfg.set(key, v.trim())
                .map_err(|e| PipelineError::Config(format!("--{}: {e}", if key == "kind" { "potential" } else { &flag })))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<(), PipelineError> {
    let Ok(v) = std::env::var("STRATA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| PipelineError::Config(format!("STRATA_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Other(e.to_string()))
}

fn run(cli: Cli) -> Result<i32, PipelineError> {
    init_threads()?;
    match cli.command {
        Command::Atlas(common) => {
            let cfg = load_config(&common)?;
            let (_, _, atlas, audits) = run_atlas(&cfg)?;
            println!(
                "m = {:.12}  m* − m = {:.3e}  d0 = {:.4}  clusters = {}  (*) {}",
                atlas.m,
                atlas.m_star - atlas.m,
                atlas.d0,
                atlas.clusters.len(),
                if atlas.star_holds { "holds" } else { "fails" }
            );
            Ok(if common.strict && !all_passed(&audits) { 5 } else { 0 })
        }
        Command::Solve { atlas, common } => {
            let cfg = load_config(&common)?;
            let summary = run_solve(&cfg, &atlas, common.parallel_c)?;
            print_summary(&summary);
            Ok(summary.exit_code(common.strict))
        }
        Command::Run(common) => {
            let cfg = load_config(&common)?;
            let summary = run_pipeline(&cfg, common.parallel_c)?;
            print_summary(&summary);
            Ok(summary.exit_code(common.strict))
        }
        Command::Audit { atlas, solve, strict } => {
            let audits = run_audit(&atlas, solve.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&audits).map_err(|e| PipelineError::Other(e.to_string()))?);
            for a in audits.iter().filter(|a| !a.passed) {
                eprintln!("audit failed: {} (margin {:.3e})", a.name, a.margin);
            }
            Ok(if strict && !all_passed(&audits) { 5 } else { 0 })
        }
    }
}

fn print_summary(s: &strata_core::io::PipelineSummary) {
    for r in &s.reports {
        let kind = serde_json::to_value(r.solution.kind).map(|v| v.to_string()).unwrap_or_default();
        println!(
            "c_rel {:<6} {:<20} T_c {:<10} energy_dev {:.3e}  residual {:.3e}  solved {}  audits {}",
            r.c_rel,
            kind,
            r.solution.period_half.map_or("∞".into(), |t| format!("{t:.4}")),
            r.solution.energy_dev,
            r.solution.residual,
            r.solved,
            if r.audits_passed { "pass" } else { "FAIL" }
        );
    }
    println!("outputs in {}", s.out.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
