use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gfra::estimation::TableStore;
use gfra::harness::bench::{
    calibration_scan, run_diagnostics_bench, run_estimation_bench, run_failprob_bench, run_negotiation,
    run_prediction_bench,
};
use gfra::harness::emit::{emit_estimation, emit_failprob, emit_negotiation, emit_prediction, emit_run};
use gfra::harness::{build_table_cache, run_scenario, AllocScheme, Config, Format};

#[derive(Debug, Parser)]
#[command(name = "gfra", version, about = "Grant-free access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Overrides the seed of the selected experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides trials (run, bench-estimation), Monte Carlo cycles
    /// (bench-failprob) or replications (bench-prediction).
    #[arg(long, global = true)]
    trials: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Adaptive,
    Fap,
    FipMin,
    FipIde,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrated estimate-predict-allocate loop.
    Run {
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Refit ARIMA every N cycles instead of keeping it frozen.
        #[arg(long)]
        refit_every: Option<usize>,
    },
    /// Estimator accuracy over a range of user counts.
    BenchEstimation,
    /// Analytical against simulated failure probability.
    BenchFailprob,
    /// ARIMA against MASW forecasts, plus model selection.
    BenchPrediction {
        /// Skip the model-selection grid.
        #[arg(long)]
        no_diagnostics: bool,
    },
    /// δ sweep and calibration scan.
    Negotiate,
    /// Prebuild Markov tables into the output directory.
    TableCache,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            print_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(files) => {
            let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            println!("{}", serde_json::json!({ "files": files }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            print_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn print_error(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": { "kind": kind, "message": message.trim_end() } }));
}

fn tables(config: &Config) -> TableStore {
    config
        .cache_dir
        .as_deref()
        .map_or_else(TableStore::in_memory, TableStore::with_dir)
}

fn execute(cli: &Cli) -> gfra::Result<Vec<PathBuf>> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let out: &Path = &cli.out_dir;
    match &cli.command {
        Command::Run { scheme, refit_every } => {
            let cfg = &mut config.scenario;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.trials {
                cfg.trials = t;
            }
            if let Some(s) = scheme {
                cfg.scheme = match s {
                    SchemeArg::Adaptive => AllocScheme::Adaptive,
                    SchemeArg::Fap => AllocScheme::Fap,
                    SchemeArg::FipMin => AllocScheme::FipMin,
                    SchemeArg::FipIde => AllocScheme::FipIde,
                };
            }
            if refit_every.is_some() {
                cfg.refit_every = *refit_every;
            }
            let report = run_scenario(&config.scenario, &tables(&config))?;
            emit_run(&report, out, format)
        }
        Command::BenchEstimation => {
            let cfg = &mut config.estimation;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.trials {
                cfg.trials = t;
            }
            let bench = run_estimation_bench(&config.estimation, &tables(&config))?;
            emit_estimation(&bench, &config.estimation, out, format)
        }
        Command::BenchFailprob => {
            let cfg = &mut config.failprob;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.trials {
                cfg.cycles = t;
            }
            let rows = run_failprob_bench(&config.failprob)?;
            emit_failprob(&rows, &config.failprob, out, format)
        }
        Command::BenchPrediction { no_diagnostics } => {
            if let Some(s) = cli.seed {
                config.prediction.seed = s;
                config.diagnostics.seed = s;
            }
            if let Some(t) = cli.trials {
                config.prediction.replications = t;
            }
            let bench = run_prediction_bench(&config.prediction, &tables(&config))?;
            let diagnostics = if *no_diagnostics {
                None
            } else {
                Some(run_diagnostics_bench(&config.diagnostics)?)
            };
            emit_prediction(
                &bench,
                &config.prediction,
                diagnostics.as_ref().map(|d| (d, &config.diagnostics)),
                out,
                format,
            )
        }
        Command::Negotiate => {
            let report = run_negotiation(&config.negotiation)?;
            let hits = calibration_scan(&config.negotiation)?;
            emit_negotiation(&report, &hits, &config.negotiation, out, format)
        }
        Command::TableCache => build_table_cache(&config.tables, out),
    }
}
