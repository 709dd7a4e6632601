//! `homog`: command-line front end for cell-averaging homogenization studies.

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use homog_core::study::sweep::{cell_summary, prepare, run_epsilon, run_sweep_with_config};
use homog_core::study::verify::verify;
use homog_core::{emit_report, Format, RunConfig};

#[derive(Parser)]
#[command(name = "homog", version, about = "Periodic homogenization by cell averaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problems and report the homogenized matrix.
    Cell {
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oscillating, homogenized and boundary-layer solves for one epsilon.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Run the full epsilon sweep and write a convergence report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the `out` key of the configuration, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Run the sweep and every applicable check; exit status 1 on any failure.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => stdout(text),
    }
}

/// Writes to stdout; a closed pipe (`homog ... | head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e).context("writing stdout"),
        _ => Ok(()),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HOMOG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("HOMOG_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        bail!("HOMOG_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")?;
    log::debug!("using {n} worker threads");
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Cell { config, out } => {
            let spec = load(&config)?.to_spec()?;
            let (cs, _) = prepare(&spec)?;
            let chi: Vec<&[f64]> = (0..spec.dim).map(|d| cs.chi(d, 0)).collect();
            let doc = serde_json::json!({
                "summary": cell_summary(&spec, &cs),
                "chi": chi,
                "iterations": cs.solutions().iter().map(|s| s.iterations).sum::<usize>(),
            });
            write_out(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        }
        Command::Solve { config, eps } => {
            let spec = load(&config)?.to_spec()?;
            let (cs, hom) = prepare(&spec)?;
            let run = run_epsilon(&spec, &cs, &hom, eps)?;
            stdout(&format!("{}\n", serde_json::to_string_pretty(&run.row)?))?;
        }
        Command::Sweep { config, out, format } => {
            let cfg = load(&config)?;
            let spec = cfg.to_spec()?;
            let report = run_sweep_with_config(&spec, Some(&cfg))?;
            let out = out.or_else(|| cfg.out.as_ref().map(PathBuf::from));
            write_out(out.as_deref(), &emit_report(&report, format))?;
        }
        Command::Verify { config } => {
            let spec = load(&config)?.to_spec()?;
            let (_, checks) = verify(&spec)?;
            let mut text: String = checks.iter().map(|c| c.line() + "\n").collect();
            let failed = checks.iter().filter(|c| !c.passed).count();
            text.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
            stdout(&text)?;
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
