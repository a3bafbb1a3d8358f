use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use econ_arena::aggregate::{aggregate, export, read_summary, ExportFormat};
use econ_arena::config::load_config;
use econ_arena::host::Host;
use econ_arena::log::read_runs;
use econ_arena::mock::{MockScript, MockServer};
use econ_arena::report::render_table;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "arena", version, about = "Run and evaluate agents in multi-agent economic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every session of a config and write logs to a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sessions run concurrently; overrides the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Render the first-run prompts only.
        #[arg(long)]
        dry_run: bool,
    },
    /// Summarize run logs into a table file.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Print a summary file as a terminal table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Serve scripted chat completions for offline tests.
    MockServe {
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
    },
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("ARENA_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "ok: {} environment, {} seats, {} session(s) x {} run(s), digest {}",
                cfg.environment,
                cfg.roster.len(),
                cfg.plan().len(),
                cfg.runs_per_session,
                cfg.digest()
            );
        }
        Command::Run { config, out, workers, dry_run } => {
            let cfg = load_config(&config)?;
            let host = Host::new(cfg.template_pack()?);
            if dry_run {
                let n = host.dry_run(&cfg, &out)?;
                println!("rendered prompts for {n} session(s) into {}", out.join("dry-run").display());
                return Ok(());
            }
            cfg.check_credentials()?;
            let workers = workers.unwrap_or(cfg.workers);
            let logs = host.run_experiment(&cfg, &out, workers).await?;
            let runs: usize = logs.iter().map(|l| l.runs.len()).sum();
            println!("{} session(s), {runs} run(s) written to {}", logs.len(), out.display());
        }
        Command::Aggregate { input, out, format } => {
            let read = read_runs(&input)?;
            for w in &read.warnings {
                eprintln!("warning: {w}");
            }
            let rows = aggregate(&read.records).context("aggregating run logs")?;
            let format = match format {
                Format::Csv => ExportFormat::Csv,
                Format::Json => ExportFormat::Json,
            };
            for path in export(&read.records, &rows, &out, format)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Report { input } => {
            let rows = read_summary(&input)?;
            if rows.is_empty() {
                bail!("{} has no rows", input.display());
            }
            print!("{}", render_table(&rows));
        }
        Command::MockServe { port, script, host } => {
            let script = MockScript::load(&script).with_context(|| format!("loading {}", script.display()))?;
            let server = MockServer::start(script, SocketAddr::new(host, port)).await?;
            println!("listening on http://{}", server.addr);
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = server.wait() => {}
            }
        }
    }
    Ok(())
}
