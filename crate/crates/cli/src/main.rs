mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::Output;
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "riesz",
    version,
    about = "Interaction-energy experiments on point configurations"
)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write SVG plots (2D only).
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the kernel assumptions.
    CheckKernel,
    /// Quantize the target measure into n points.
    Quantize {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Minimize the discrete energy over n points.
    Minimize {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Energies along a list of point counts.
    Trace {
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
    },
    /// Potential equalization and clustering of a configuration file.
    Diagnose { input: Option<PathBuf> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckKernel => "check-kernel",
            Command::Quantize { .. } => "quantize",
            Command::Minimize { .. } => "minimize",
            Command::Trace { .. } => "trace",
            Command::Diagnose { .. } => "diagnose",
        }
    }
}

#[derive(Serialize)]
struct RunMeta {
    command: &'static str,
    version: &'static str,
    config: Option<String>,
    seed: u64,
    threads: usize,
    started_unix_ms: u128,
    elapsed_ms: u128,
    exit_code: i32,
    error: Option<String>,
    files: Vec<String>,
}

fn run(cli: &Cli) -> (Option<Output>, u64, CliResult<()>) {
    if let Some(k) = cli.threads {
        if k == 0 {
            return (None, 0, Err(CliError::Usage("--threads must be positive".into())));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            return (None, 0, Err(CliError::Usage(format!("thread pool: {e}"))));
        }
    }
    let loaded = match config::load(cli.config.as_deref(), cli.seed) {
        Ok(l) => l,
        Err(e) => return (None, cli.seed.unwrap_or(config::DEFAULT_SEED), Err(e)),
    };
    let mut out = match Output::new(loaded.out_dir(cli.out.as_deref()), cli.svg) {
        Ok(o) => o,
        Err(e) => return (None, loaded.seed, Err(e)),
    };
    let result = match &cli.command {
        Command::CheckKernel => commands::check_kernel(&loaded, &mut out),
        Command::Quantize { n } => commands::quantize_cmd(&loaded, *n, &mut out),
        Command::Minimize { n } => commands::minimize_cmd(&loaded, *n, &mut out),
        Command::Trace { n_list } => commands::trace_cmd(&loaded, n_list.clone(), &mut out),
        Command::Diagnose { input } => commands::diagnose_cmd(&loaded, input.as_deref(), &mut out),
    };
    (Some(out), loaded.seed, result)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let clock = Instant::now();
    let (out, seed, result) = run(&cli);
    let code = result.as_ref().err().map_or(0, CliError::exit_code);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    if let Some(out) = out {
        let meta = RunMeta {
            command: cli.command.name(),
            version: env!("CARGO_PKG_VERSION"),
            config: cli.config.as_ref().map(|p| p.display().to_string()),
            seed,
            threads: rayon::current_num_threads(),
            started_unix_ms: started,
            elapsed_ms: clock.elapsed().as_millis(),
            exit_code: code,
            error: result.as_ref().err().map(ToString::to_string),
            files: out.written.iter().map(|p| p.display().to_string()).collect(),
        };
        let path = out.dir.join("run_meta.json");
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
        if let Err(e) = std::fs::write(&path, text) {
            eprintln!("error: {}: {e}", path.display());
        }
    }
    ExitCode::from(code as u8)
}
