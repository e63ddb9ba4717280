use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noma_vlc::experiment::{run, write_outputs, ExperimentConfig, ExperimentKind, Overrides};
use noma_vlc::Error;

#[derive(Parser)]
#[command(
    name = "noma-vlc",
    version,
    about = "NOMA power allocation experiments for VLC networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV (and SVG) files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// fig2, fig3, fig4, maxmin_example or network_demo; overrides the file.
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-iteration solver traces.
        #[arg(long)]
        trace: bool,
        /// Also write wall-clock solve times to a separate file.
        #[arg(long)]
        timing: bool,
    },
    /// Validate a configuration file without running anything.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        experiment: Option<String>,
    },
}

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn parse_kind(name: Option<String>) -> Result<Option<ExperimentKind>, Error> {
    name.map(|n| n.parse()).transpose()
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Infeasible { .. } => ExitCode::from(EXIT_INFEASIBLE),
        Error::Config { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { config, experiment } => {
            let overrides = match parse_kind(experiment) {
                Ok(experiment) => Overrides {
                    experiment,
                    ..Overrides::default()
                },
                Err(e) => return fail(&e),
            };
            match ExperimentConfig::from_file(&config, &overrides) {
                Ok(cfg) => {
                    println!(
                        "{}: ok ({} trials, seed {}, output {})",
                        cfg.experiment,
                        cfg.trials,
                        cfg.seed,
                        cfg.output.dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Run {
            config,
            experiment,
            seed,
            trials,
            out,
            trace,
            timing,
        } => {
            let overrides = match parse_kind(experiment) {
                Ok(experiment) => Overrides {
                    experiment,
                    seed,
                    trials,
                    out,
                    trace,
                    timing,
                },
                Err(e) => return fail(&e),
            };
            let cfg = match ExperimentConfig::from_file(&config, &overrides) {
                Ok(cfg) => cfg,
                Err(e) => return fail(&e),
            };
            let output = match run(&cfg) {
                Ok(o) => o,
                Err(e) => return fail(&e),
            };
            let written = match write_outputs(&cfg, &output) {
                Ok(w) => w,
                Err(e) => return fail(&e),
            };
            for s in &output.summary {
                let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{} {:<6} K={} eps={} TSNR={} T={}: mean {} = {} (var {}, {}/{} feasible)",
                    s.experiment,
                    s.solver,
                    s.k,
                    s.epsilon,
                    s.tsnr_db,
                    s.qos,
                    s.statistic,
                    fmt(s.mean),
                    fmt(s.variance),
                    s.feasible,
                    s.trials
                );
            }
            for m in &output.network_summary {
                println!(
                    "{} trial {}: {} = {}",
                    output.experiment, m.trial, m.metric, m.value
                );
            }
            for p in &written {
                println!("wrote {}", p.display());
            }
            if output.any_feasible() {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: no instance was feasible");
                ExitCode::from(EXIT_INFEASIBLE)
            }
        }
    }
}
