use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use h2mor_cli::bode::write_bode;
use h2mor_cli::config::BodeGrid;
use h2mor_cli::{
    emit_bode, load_model, run_experiment, Algorithm, CliError, ExperimentConfig, Overrides,
    RomFile,
};

#[derive(Parser)]
#[command(name = "h2mor", version, about = "H2 model order reduction benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithms for every reduced degree.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// JSON model descriptor replacing the configured model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Algorithm name or comma-separated list.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        r: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write |H(iw)| and |H(iw) - H_r(iw)| on the configured frequency grid.
    Bode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rom: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output CSV; defaults to `bode_<rom file stem>.csv` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            model,
            algo,
            r,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let algorithms = algo
                .map(|a| {
                    a.split(',')
                        .map(Algorithm::parse)
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()?;
            cfg.apply(Overrides {
                model,
                algorithms,
                r,
                out,
            });
            let report = run_experiment(&cfg)?;
            for row in report.rows() {
                match &row.error {
                    Some(e) => eprintln!("{} r={}: failed: {e}", row.algorithm.name(), row.r),
                    None => eprintln!(
                        "{} r={}: {} evaluations, relative H2 error {}, converged {}",
                        row.algorithm.name(),
                        row.r,
                        row.fom_evals,
                        row.rel_h2_error
                            .map(|e| format!("{e:.3e}"))
                            .unwrap_or_else(|| "n/a".into()),
                        row.converged
                    ),
                }
            }
            println!("{}", cfg.output_path().join("summary.csv").display());
            if report.all_failed() {
                return Err(CliError::AllRunsFailed(report.runs.len()));
            }
            Ok(())
        }
        Command::Bode {
            config,
            rom,
            model,
            out,
            omega_min,
            omega_max,
            points,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(Overrides {
                model,
                ..Overrides::default()
            });
            let m = load_model(&cfg)?;
            let r = RomFile::load(&rom)?;
            let g = &cfg.bode;
            let grid = BodeGrid {
                omega_min: omega_min.unwrap_or(g.omega_min),
                omega_max: omega_max.unwrap_or(g.omega_max),
                points: points.unwrap_or(g.points),
            };
            let rows = emit_bode(&m, &r, &grid.frequencies()?)?;
            let path = match out {
                Some(p) => p,
                None => {
                    let dir = cfg.output_path();
                    std::fs::create_dir_all(&dir)
                        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                    let stem = rom
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "rom".into());
                    dir.join(format!("bode_{stem}.csv"))
                }
            };
            write_bode(&path, &rows)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
