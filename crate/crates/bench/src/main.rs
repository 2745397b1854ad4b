use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pmest_bench::config::DatasetKind;
use pmest_bench::output::{emit_table, write_table};
use pmest_bench::{
    log_log_slope, run_consistency, run_sweep, simulate_linear, simulate_logistic, BenchError, ConsistencyConfig,
    ConsistencyRow, ExperimentConfig, Format, Manifest, MetricRecord,
};

const AFTER_HELP: &str = "\
Covariates and responses are min-max scaled into [-1, 1] before fitting. The \
scaling constants are computed from the raw data and treated as public; they \
are not protected by the privacy budget.";

#[derive(Parser)]
#[command(name = "pmest-bench", version, about = "Perturbed M-estimator experiments", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when omitted (no manifest then).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// k-grid sweep over H replications.
    Sweep(Common),
    /// Error of the robust estimator along k_n schedules.
    Consistency(Common),
    /// Writes one synthetic dataset of the config.
    Simulate(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn output<T: serde::Serialize>(
    rows: &[T],
    columns: &[&str],
    common: &Common,
    manifest: &Manifest,
) -> Result<(), BenchError> {
    match &common.out {
        Some(path) => emit_table(rows, columns, path, common.format, manifest),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_table(rows, columns, common.format, &mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    Ok(std::fs::read_to_string(path)?)
}

fn install_jobs(jobs: Option<usize>) {
    if let Some(j) = jobs {
        // only fails if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
}

fn run(command: Command) -> Result<(), BenchError> {
    match command {
        Command::Sweep(c) => {
            let mut cfg = ExperimentConfig::from_toml(&read(&c.config)?)?;
            if let Some(s) = c.seed {
                cfg.master_seed = s;
            }
            let records = run_sweep(&cfg, c.jobs)?;
            let stand_ins = cfg
                .estimators
                .iter()
                .filter(|e| e.norm().is_some())
                .map(|e| e.label().to_owned())
                .collect();
            let manifest = Manifest::new(&cfg.to_toml(), cfg.master_seed, stand_ins);
            output(&records, &MetricRecord::COLUMNS, &c, &manifest)
        }
        Command::Consistency(c) => {
            install_jobs(c.jobs);
            let mut cfg = ConsistencyConfig::from_toml(&read(&c.config)?)?;
            if let Some(s) = c.seed {
                cfg.master_seed = s;
            }
            let rows = run_consistency(&cfg)?;
            for s in &cfg.schedules {
                let label = s.label();
                let sub: Vec<ConsistencyRow> = rows.iter().filter(|r| r.schedule == label).cloned().collect();
                log::info!("{label}: log-log slope {:.3}", log_log_slope(&sub));
            }
            let manifest = Manifest::new(&cfg.to_toml(), cfg.master_seed, vec![]);
            output(&rows, &ConsistencyRow::COLUMNS, &c, &manifest)
        }
        Command::Simulate(c) => {
            let mut cfg = ExperimentConfig::from_toml(&read(&c.config)?)?;
            if let Some(s) = c.seed {
                cfg.master_seed = s;
            }
            let data = match cfg.dataset {
                DatasetKind::SyntheticLinear => simulate_linear(cfg.n, &cfg.linear, cfg.master_seed).0,
                DatasetKind::SyntheticLogistic => simulate_logistic(cfg.n, cfg.master_seed),
                DatasetKind::AttitudeCsv => {
                    return Err(BenchError::Config("simulate needs a synthetic dataset".into()))
                }
            };
            let columns: Vec<String> = (0..data.p()).map(|j| format!("x{j}")).chain(["y".into()]).collect();
            let rows: Vec<Vec<f64>> =
                data.rows().map(|(x, y)| x.iter().copied().chain([y]).collect()).collect();
            let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
            output(&rows, &cols, &c, &Manifest::new(&cfg.to_toml(), cfg.master_seed, vec![]))
        }
    }
}
