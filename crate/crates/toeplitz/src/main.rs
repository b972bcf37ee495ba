use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use toeplitz::run::{self, exit_code, Outcome, Overrides, RunError};
use toeplitz::RunConfig;

#[derive(Parser)]
#[command(name = "toeplitz", version, about = "Build and verify Toeplitz windows over residually finite groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured window and write window.txt.
    Build(Common),
    /// Check a window file against every criterion.
    Verify {
        window: PathBuf,
        /// Directory for report.json; the report goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the patch as JSON lines.
    Emit(Common),
    /// Similarity classes, fiber candidates and coverage.
    Fiber(Common),
    /// Exact Birkhoff counts and regularity per level.
    Stats(Common),
    /// Draw a Z2 patch as a PGM image.
    Render(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patch_level: Option<usize>,
    /// perf, k or ktilde.
    #[arg(long)]
    mode: Option<String>,
    /// Remove one cylinder per level in ktilde windows.
    #[arg(long)]
    strict_e_rule: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig, RunError> {
        let mut config = RunConfig::load(&self.config)?;
        let overrides = Overrides {
            cap: self.cap,
            seed: self.seed,
            patch_level: self.patch_level,
            mode: self.mode.clone(),
            strict_e_rule: self.strict_e_rule,
        };
        overrides.apply(&mut config)?;
        Ok(config)
    }
}

fn write_outcome(outcome: &Outcome, out: Option<&Path>) -> anyhow::Result<()> {
    let report = serde_json::to_string_pretty(&outcome.report)? + "\n";
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join("report.json"), report)?;
            for (name, bytes) in &outcome.files {
                std::fs::write(dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
            }
        }
        None => {
            print!("{report}");
            if !outcome.files.is_empty() {
                eprintln!("pass --out to write {}", outcome.files.iter().map(|f| f.0.as_str()).collect::<Vec<_>>().join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Verify { window, out } => {
            let result = std::fs::read_to_string(window)
                .map_err(|e| RunError::Unsupported(format!("cannot read {}: {e}", window.display())))
                .and_then(|text| run::verify(&text));
            (result, out.clone())
        }
        Command::Build(c) | Command::Emit(c) | Command::Fiber(c) | Command::Stats(c) | Command::Render(c) => {
            let result = c.config().and_then(|config| match &cli.command {
                Command::Build(_) => run::build(&config),
                Command::Emit(_) => run::emit(&config),
                Command::Fiber(_) => run::fiber(&config),
                Command::Stats(_) => run::stats(&config),
                _ => run::render(&config),
            });
            (result, c.out.clone())
        }
    };
    let code = exit_code(&result);
    match &result {
        Ok(outcome) => {
            if let Err(e) = write_outcome(outcome, out.as_deref()) {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            if !outcome.pass {
                eprintln!("verification failed");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(code as u8)
}
