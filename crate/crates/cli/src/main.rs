use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use backaction_cli::commands::{cmd_fig2, cmd_fig3, cmd_nlevel, SCHEMAS};
use backaction_cli::config::parse_boundary;
use backaction_cli::verify::{cmd_verify, VerifyOptions};
use backaction_cli::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "backaction",
    version,
    about = "Measurement back-action feedback control: decay curves, noise sweeps and verification",
    after_help = SCHEMAS
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value config file; BACKACTION_<KEY> variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// circle | interval
    #[arg(long, global = true)]
    boundary: Option<String>,
    /// Number of trajectories.
    #[arg(long, global = true)]
    ensemble: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Mean error decay and first-passage curve of noiseless control.
    Fig2,
    /// Steady-state error against noise for three protocols.
    Fig3,
    /// Run the invariant suite; exit 1 if any check fails.
    Verify {
        /// Comma-separated subset of checks.
        #[arg(long)]
        only: Option<String>,
        /// Test hook: skip re-Hermitisation in the Hermiticity check.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// N-level control quartiles.
    Nlevel {
        /// Number of levels, 2 to 8.
        #[arg(long)]
        levels: Option<usize>,
        /// Number of trajectories.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Print the effective configuration.
    Config,
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &common.config {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        cfg.apply_text(&text)?;
    }
    cfg.apply_env(std::env::vars())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(b) = &common.boundary {
        cfg.boundary = parse_boundary(b).map_err(CliError::Config)?;
    }
    if let Some(n) = common.ensemble {
        cfg.ensemble = n;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = load(&cli.common)?;
    if let Some(t) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Fig2 => {
            let f = cmd_fig2(&cfg)?;
            match &f.rate_a {
                Ok(r) => println!("rate_a = {:.4} κ", r.rate / cfg.kappa),
                Err(e) => println!("rate_a unavailable: {e}"),
            }
            match &f.rate_b {
                Ok(r) => println!("rate_b = {:.4} κ", r.rate / cfg.kappa),
                Err(e) => println!("rate_b unavailable: {e}"),
            }
        }
        Command::Fig3 => {
            for p in cmd_fig3(&cfg)? {
                println!(
                    "γ/κ = {:.4}: dg {:.4e}, h-perp {:.4e} (k/κ = {:.3}), h-par {:.4e}",
                    p.gamma_over_kappa,
                    p.dg.0,
                    p.hperp.best_error,
                    p.hperp.best_k / cfg.kappa,
                    p.hpar.0
                );
            }
        }
        Command::Verify { only, inject_fault } => {
            cmd_verify(&cfg, only.as_deref(), VerifyOptions { inject_fault })?;
        }
        Command::Nlevel { levels, seeds } => {
            if let Some(n) = levels {
                cfg.levels = n;
            }
            if let Some(s) = seeds {
                cfg.nlevel_ensemble = s;
            }
            let q = cmd_nlevel(&cfg)?;
            if let (Some(t), Some(m)) = (q.times.last(), q.median.last()) {
                println!("median P_e at κt = {:.2}: {:.4e}", t * cfg.kappa, m);
            }
        }
        Command::Config => {
            cfg.validate()?;
            print!("{}", cfg.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
