use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evsi_cli::{cmd_solve, cmd_sweep, cmd_toy, GapError, InputError, SolveArgs, SweepArgs};
use rideshare_evsi::Mode;

#[derive(Parser)]
#[command(
    name = "evsi",
    version,
    about = "Value of sharing demand information with rideshare drivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ws,
    Sws,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one pricing problem, with (sws) or without (ws) shared information.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sws")]
        mode: ModeArg,
        /// Instance JSON, overriding the configuration.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Realization JSON, overriding the configuration.
        #[arg(long)]
        realization: Option<PathBuf>,
        /// Relative optimality gap.
        #[arg(long)]
        gap: Option<f64>,
        /// Accept a solution that stopped on a limit.
        #[arg(long)]
        allow_gap: bool,
        /// Relax integral driver flows.
        #[arg(long)]
        continuous: bool,
        /// Write the single-level problem in the solver's text format.
        #[arg(long)]
        export_problem: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Monte-Carlo estimates over the demand and supply coefficient grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per nominal demand vector.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        gap: Option<f64>,
        #[arg(long)]
        allow_gap: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// The two-scenario quadratic example.
    Toy {
        /// Grid points per unit interval.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve {
            config,
            mode,
            instance,
            realization,
            gap,
            allow_gap,
            continuous,
            export_problem,
            out_dir,
        } => {
            let args = SolveArgs {
                config,
                mode: Some(match mode {
                    ModeArg::Ws => Mode::Ws,
                    ModeArg::Sws => Mode::Sws,
                }),
                instance,
                realization,
                gap,
                allow_gap,
                export_problem,
                out_dir,
                continuous,
            };
            print!("{}", cmd_solve(&args)?.report);
        }
        Command::Sweep {
            config,
            seed,
            samples,
            gap,
            allow_gap,
            out_dir,
        } => {
            let args = SweepArgs {
                config,
                seed,
                samples,
                gap,
                allow_gap,
                out_dir,
            };
            let out = cmd_sweep(&args)?;
            println!(
                "{:>5} {:>5} {:>12} {:>12} {:>10}",
                "P", "Q", "mean ws", "mean sws", "evsi"
            );
            for s in &out.scenarios {
                println!(
                    "{:>5} {:>5} {:>12.2} {:>12.2} {:>10.2}",
                    s.demand_coef, s.supply_coef, s.mean_ws, s.mean_sws, s.evsi
                );
            }
        }
        Command::Toy { steps, out_dir } => print!("{}", cmd_toy(steps, out_dir.as_deref())?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else if e.downcast_ref::<GapError>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
