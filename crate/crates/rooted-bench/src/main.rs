use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use rooted_bench::config::{
    load_or_default, DiagnoseConfig, GanToyConfig, MlpConfig, RegressConfig, SpiralConfig,
};
use rooted_bench::emit::ResultRow;
use rooted_bench::manifest::{self, Job};

/// Benchmarks for rooted loss functions.
#[derive(Parser)]
#[command(name = "rooted-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated linear benchmark on the bundled datasets
    Regress(RegressArgs),
    /// Fully connected networks on the two-spiral task
    TrainMlp(MlpArgs),
    /// Curvature diagnostics for a trained linear probe
    Diagnose(DiagnoseArgs),
    /// Toy adversarial pair against a 1-D Gaussian
    GanToy(GanArgs),
    /// Emit the two-spiral dataset as a CSV
    SpiralGen(SpiralArgs),
    /// Replay a recorded manifest into a new output directory
    Rerun(RerunArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RegressArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset name or path; repeatable, replaces the configured list
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    fold_seed: Option<u64>,
    /// Root value; repeatable, replaces the configured k grid
    #[arg(long = "k")]
    k_grid: Vec<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Minibatch size (full-batch descent when omitted)
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    add_bias: bool,
    #[arg(long)]
    emit_traces: bool,
}

impl RegressArgs {
    fn into_config(self) -> Result<(RegressConfig, PathBuf)> {
        let mut cfg: RegressConfig = load_or_default(self.common.config.as_deref())?;
        if !self.datasets.is_empty() {
            cfg.datasets = self.datasets;
        }
        if let Some(v) = self.data_dir {
            cfg.data_dir = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
            cfg.iterations_for.clear();
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.fold_seed {
            cfg.fold_seed = v;
        }
        if !self.k_grid.is_empty() {
            cfg.k_grid = self.k_grid;
        }
        if let Some(v) = self.l2 {
            cfg.l2_lambda = v;
        }
        if self.batch.is_some() {
            cfg.batch = self.batch;
        }
        if self.add_bias {
            cfg.add_bias = true;
        }
        if self.emit_traces {
            cfg.emit_traces = true;
        }
        Ok((cfg, self.common.out))
    }
}

#[derive(Args)]
struct MlpArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Init seed; repeatable, replaces the configured list
    #[arg(long = "init-seed")]
    init_seeds: Vec<u64>,
}

impl MlpArgs {
    fn into_config(self) -> Result<(MlpConfig, PathBuf)> {
        let mut cfg: MlpConfig = load_or_default(self.common.config.as_deref())?;
        if let Some(v) = self.data_seed {
            cfg.data_seed = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if !self.init_seeds.is_empty() {
            cfg.init_seeds = self.init_seeds;
        }
        Ok((cfg, self.common.out))
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_dir: Option<String>,
    /// Root value; repeatable, replaces the configured list
    #[arg(long = "k")]
    k_values: Vec<f64>,
    #[arg(long)]
    iterations: Option<u64>,
}

impl DiagnoseArgs {
    fn into_config(self) -> Result<(DiagnoseConfig, PathBuf)> {
        let mut cfg: DiagnoseConfig = load_or_default(self.common.config.as_deref())?;
        if let Some(v) = self.dataset {
            cfg.dataset = v;
        }
        if let Some(v) = self.data_dir {
            cfg.data_dir = v;
        }
        if !self.k_values.is_empty() {
            cfg.k_values = self.k_values;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        Ok((cfg, self.common.out))
    }
}

#[derive(Args)]
struct GanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Replicate seed; repeatable, replaces the configured list
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    eta_disc: Option<f64>,
    #[arg(long)]
    eta_gen: Option<f64>,
    #[arg(long)]
    target_mean: Option<f64>,
}

impl GanArgs {
    fn into_config(self) -> Result<(GanToyConfig, PathBuf)> {
        let mut cfg: GanToyConfig = load_or_default(self.common.config.as_deref())?;
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds;
        }
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.eta_disc {
            cfg.eta_disc = v;
        }
        if let Some(v) = self.eta_gen {
            cfg.eta_gen = v;
        }
        if let Some(v) = self.target_mean {
            cfg.target_mean = v;
        }
        Ok((cfg, self.common.out))
    }
}

#[derive(Args)]
struct SpiralArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SpiralArgs {
    fn into_config(self) -> Result<(SpiralConfig, PathBuf)> {
        let mut cfg: SpiralConfig = load_or_default(self.common.config.as_deref())?;
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.noise {
            cfg.noise = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok((cfg, self.common.out))
    }
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest recorded by a previous run
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for the replay
    #[arg(long, default_value = "bench-rerun")]
    out: PathBuf,
}

fn dispatch(cli: Cli) -> Result<Vec<ResultRow>> {
    let (job, out) = match cli.command {
        Command::Regress(args) => {
            let (cfg, out) = args.into_config()?;
            (Job::Regress(cfg), out)
        }
        Command::TrainMlp(args) => {
            let (cfg, out) = args.into_config()?;
            (Job::TrainMlp(cfg), out)
        }
        Command::Diagnose(args) => {
            let (cfg, out) = args.into_config()?;
            (Job::Diagnose(cfg), out)
        }
        Command::GanToy(args) => {
            let (cfg, out) = args.into_config()?;
            (Job::GanToy(cfg), out)
        }
        Command::SpiralGen(args) => {
            let (cfg, out) = args.into_config()?;
            (Job::SpiralGen(cfg), out)
        }
        Command::Rerun(args) => {
            let manifest = manifest::read(&args.manifest)?;
            (manifest.job, args.out)
        }
    };
    manifest::execute(&job, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(rows) => {
            let diverged: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.status.starts_with("diverged"))
                .collect();
            if diverged.is_empty() {
                ExitCode::SUCCESS
            } else {
                for row in diverged {
                    eprintln!(
                        "diverged: {} {} {} ({})",
                        row.dataset, row.model, row.loss, row.status
                    );
                }
                ExitCode::from(3)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
