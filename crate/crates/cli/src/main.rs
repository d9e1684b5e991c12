use std::io::{BufReader, IsTerminal};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trailforge::adapters::{serve_mock_lines, AdapterKind, MockBackend};
use trailforge::evalkit::{aggregate, read_ratings, render_tables, report_json};
use trailforge::fixtures::{create_project, FixtureSpec};
use trailforge::mediaio::Engine;
use trailforge::pipeline::{self, RunOptions, LAST_PHASE, PHASE_NAMES};
use trailforge::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_ADAPTER: u8 = 3;
const EXIT_PHASE: u8 = 4;

#[derive(Parser)]
#[command(name = "trailforge", version, about = "Builds movie trailers from a source film and its metadata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the pipeline for a project.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        adapters: PathBuf,
        #[arg(long, default_value_t = 0)]
        from_phase: u8,
        #[arg(long, default_value_t = LAST_PHASE)]
        to_phase: u8,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Render without music if the music adapter fails.
        #[arg(long)]
        allow_missing_music: bool,
    },
    /// Aggregate viewer ratings into mean and median tables.
    Eval {
        #[arg(long)]
        ratings: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print stream information for a media file.
    Probe { media: PathBuf },
    /// Write a synthetic demo project (movie, metadata, cue sheets, mock manifest).
    Fixture { dir: PathBuf },
    /// Serve deterministic mock responses over stdin/stdout.
    #[command(hide = true)]
    MockAdapter {
        #[arg(long)]
        kind: AdapterKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        address: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Phase { .. } | Error::DigestMismatch { .. } => EXIT_PHASE,
        Error::Adapter(_) => EXIT_ADAPTER,
        _ => EXIT_CONFIG,
    }
}

fn report(e: &Error) -> u8 {
    match e {
        Error::Phase { phase, .. } | Error::DigestMismatch { phase, .. } => {
            eprintln!("error: phase {phase} ({}): {e}", PHASE_NAMES[*phase as usize]);
        }
        _ => eprintln!("error: {e}"),
    }
    exit_code(e)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("TRAILFORGE_LOG").unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => ExitCode::from(report(&e)),
    }
}

fn dispatch(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run {
            config,
            adapters,
            from_phase,
            to_phase,
            seed,
            allow_missing_music,
        } => {
            let opts = RunOptions {
                from_phase,
                to_phase,
                seed,
                allow_missing_music,
            };
            let summary = pipeline::run(&config, &adapters, &opts)?;
            tracing::info!(executed = ?summary.executed, skipped = ?summary.skipped, "pipeline finished");
            if let Some(t) = &summary.trailer {
                println!("{}", t.display());
            }
            Ok(())
        }
        Command::Eval { ratings, json } => {
            let file = std::fs::File::open(&ratings).map_err(|e| Error::Io { path: ratings.clone(), source: e })?;
            let report = aggregate(&read_ratings(BufReader::new(file))?)?;
            print!("{}", render_tables(&report));
            let text = serde_json::to_string_pretty(&report_json(&report))?;
            match json {
                Some(path) => std::fs::write(&path, text + "\n").map_err(|e| Error::Io { path: path.clone(), source: e })?,
                None => println!("\n{text}"),
            }
            Ok(())
        }
        Command::Probe { media } => {
            let engine = Engine::discover(None, None)?;
            let (info, exact) = engine.video_duration(&media).or_else(|_| engine.probe(&media).map(|i| (i.clone(), i.duration_s)))?;
            let mut v = serde_json::to_value(&info)?;
            v["duration_s"] = exact.into();
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(())
        }
        Command::Fixture { dir } => {
            let engine = Engine::discover(None, None)?;
            let fx = create_project(&engine, &dir, &FixtureSpec::standard(), None)?;
            println!("config:   {}", fx.config.display());
            println!("adapters: {}", fx.adapters.display());
            Ok(())
        }
        Command::MockAdapter { kind, seed, address } => {
            let backend = MockBackend::new(kind, seed, address);
            serve_mock_lines(&backend, std::io::stdin().lock(), std::io::stdout().lock())
                .map_err(|e| Error::Io { path: PathBuf::from("<stdio>"), source: e })
        }
    }
}
