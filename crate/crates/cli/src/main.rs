use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heralded_cli::bundled::bundled;
use heralded_cli::scenario::WignerWindow;
use heralded_cli::{run_document, validate_document, wigner_at, CliError, ConfigDocument};

#[derive(Parser)]
#[command(
    name = "heralded",
    version,
    about = "Heralded mechanical states in cavity optomechanics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the parameter sweeps and write one CSV per output plus a manifest.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory; each scenario writes into its own subdirectory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Report regime diagnostics for every grid point without running the physics.
    Validate {
        #[command(flatten)]
        source: Source,
        /// Write `<scenario>/regime_report.csv` here instead of printing to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump a dense Wigner grid of the heralded state at one grid point.
    Wigner {
        #[command(flatten)]
        source: Source,
        /// Write `<scenario>_wigner_<index>.csv` here instead of printing to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Row-major index of the grid point.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Points per phase-space axis.
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Half-width of the square phase-space window.
        #[arg(long, default_value_t = 4.0)]
        half_width: f64,
    },
}

#[derive(Args)]
struct Source {
    /// Scenario document (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled scenario name, or a scenario within `--config`.
    #[arg(long)]
    scenario: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ConfigDocument, CliError> {
        match (&self.config, &self.scenario) {
            (Some(path), None) => ConfigDocument::load(path),
            (Some(path), Some(name)) => ConfigDocument::load(path)?.select(name),
            (None, Some(name)) => bundled(name),
            (None, None) => Err(CliError::Config(
                "give `--config PATH` or `--scenario NAME`".into(),
            )),
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { source, out, jobs } => {
            let doc = source.load()?;
            let jobs = jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .max(1);
            for summary in run_document(&doc, &out, jobs)? {
                eprintln!(
                    "{}: {} points, {} with errors -> {}",
                    summary.scenario,
                    summary.points,
                    summary.failed_points,
                    summary.dir.display()
                );
            }
        }
        Command::Validate { source, out } => {
            let doc = source.load()?;
            for table in validate_document(&doc)? {
                match &out {
                    Some(dir) => {
                        let dir = dir.join(&table.scenario);
                        std::fs::create_dir_all(&dir)?;
                        table.write_csv(std::fs::File::create(dir.join("regime_report.csv"))?)?;
                    }
                    None => {
                        println!("# {}", table.scenario);
                        table.write_csv(std::io::stdout().lock())?;
                    }
                }
                eprintln!(
                    "{}: {} of {} points inside the model's regime of validity",
                    table.scenario,
                    table.valid_points(),
                    table.reports.len()
                );
            }
        }
        Command::Wigner {
            source,
            out,
            index,
            points,
            half_width,
        } => {
            let doc = source.load()?;
            if doc.scenarios.len() != 1 {
                return Err(CliError::Config(
                    "the document holds several scenarios; pick one with `--scenario`".into(),
                ));
            }
            if points < 2 || !(half_width > 0.0 && half_width.is_finite()) {
                return Err(CliError::Config(
                    "`--points` must be ≥ 2 and `--half-width` positive".into(),
                ));
            }
            let s = &doc.scenarios[0];
            let window = WignerWindow { half_width, points };
            let p_click = match &out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let path = dir.join(format!("{}_wigner_{index}.csv", s.name));
                    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                    let p = wigner_at(s, index, &window, file)?;
                    eprintln!("wrote {}", path.display());
                    p
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    let p = wigner_at(s, index, &window, &mut stdout)?;
                    stdout.flush()?;
                    p
                }
            };
            eprintln!("{} point {index}: p_click = {p_click:.6}", s.name);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
