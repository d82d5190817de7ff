use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use soliplasmon::cli::{cmd_fit, cmd_simulate, cmd_sweep, CliError, SweepArgs};

#[derive(Parser)]
#[command(name = "soliplasmon", version, about = "EPR steering witnesses in non-Hermitian soliton-plasmon dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and write the witness time series.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_path` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the first witnessing periods over a kappa grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        kappa_min: f64,
        #[arg(long)]
        kappa_max: f64,
        #[arg(long)]
        points: usize,
        /// Linear instead of geometric spacing.
        #[arg(long)]
        linear: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit T_ba(kappa) = a/kappa + b/(3 kappa^3) + c/(5 kappa^5) to a sweep CSV.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the fitted curve as `kappa,T_ba_pred`.
        #[arg(long)]
        predict: Option<PathBuf>,
        /// Report path; defaults to `<input stem>.fit.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let summary = cmd_simulate(&config, out.as_deref())?;
            println!("wrote {} ({} samples)", summary.csv_path, summary.samples);
            for p in summary.periods.ab.iter().chain(&summary.periods.ba) {
                println!(
                    "zeta_{}: [{:.6}, {:.6}] duration {:.6} peak {:.6e}",
                    p.witness, p.t_start, p.t_end, p.duration, p.peak_value
                );
            }
        }
        Command::Sweep { config, kappa_min, kappa_max, points, linear, out } => {
            let args = SweepArgs { config_path: &config, kappa_min, kappa_max, points, linear, out: out.as_deref() };
            let summary = cmd_sweep(&args)?;
            let missing = summary.rows.rows.iter().filter(|r| r.t_ba.is_none()).count();
            println!("wrote {} ({} kappa values, {missing} without T_ba)", summary.csv_path, summary.rows.rows.len());
        }
        Command::Fit { input, predict, out } => {
            let report = cmd_fit(&input, predict.as_deref(), out.as_deref())?;
            let f = report.fit;
            println!("a = {:.6} +/- {:.6}", f.a, f.stderr_a);
            println!("b = {:.6} +/- {:.6}", f.b, f.stderr_b);
            println!("c = {:.6} +/- {:.6}", f.c, f.stderr_c);
            println!("rms residual = {:.6e} over {} points", f.rms_residual, f.n_points);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
