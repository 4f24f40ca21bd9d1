//! `fedsim`: generate data, inspect label statistics and partitions, and run
//! single experiments or whole registries.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fedsim_core::data::{
    label_stats, load_dataset, split_common_labels, write_dataset, ImageShape, UcmLike, DEFAULT_COMMON_THRESHOLD,
};
use fedsim_core::experiment::{
    describe_error, read_config, run_experiment_with, run_sweep, write_run_csv, write_summary_csv, ExperimentRow,
    RunOutput, RunSettings,
};
use fedsim_core::federation::{Algorithm, DEFAULT_MU};
use fedsim_core::partition::{make_partition, skew_report, SkewConfig};

#[derive(Parser)]
#[command(name = "fedsim", version, about = "Deterministic federated learning simulator")]
struct Cli {
    /// Log progress at debug level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multilabel dataset directory.
    Synth(SynthArgs),
    /// Write label counts and the label cosine-similarity matrix as CSV.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-client label counts for a partition as CSV.
    Partition(PartitionArgs),
    /// Run one experiment.
    Run(RunArgs),
    /// Run every row of a registry CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    labels_common: usize,
    #[arg(long, default_value_t = 10)]
    labels_rare: usize,
    #[arg(long, default_value_t = 0.4)]
    common_freq: f64,
    #[arg(long, default_value_t = 0.06)]
    rare_freq: f64,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    clients: usize,
    /// Percentage of each monopoly label's samples pinned to its client.
    #[arg(long, default_value_t = 0.0)]
    skewness: f64,
    #[arg(long)]
    small_skew: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write zero wall times so repeated runs produce identical files.
    #[arg(long)]
    no_timing: bool,
    /// Skip doubling the dataset with corrupted copies.
    #[arg(long)]
    no_augment: bool,
}

impl Common {
    fn settings(&self) -> RunSettings {
        RunSettings {
            record_wall_time: !self.no_timing,
            augment: !self.no_augment,
            ..RunSettings::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// linear, mlp, mlp-<h1>-<h2>..., lenet, resnet or alexnet.
    #[arg(long, default_value = "lenet")]
    model: String,
    #[arg(long, default_value = "FedAvg")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    #[arg(long)]
    c_fraction: Option<f64>,
    #[arg(long)]
    skewness: Option<f64>,
    #[arg(long)]
    client_epochs: Option<usize>,
    #[arg(long)]
    small_skew: Option<bool>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    config: PathBuf,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Synth(a) => synth(a)?,
        Command::Stats { data, out } => stats(&data, &out)?,
        Command::Partition(a) => partition(a)?,
        Command::Run(a) => run(a)?,
        Command::Sweep(a) => return sweep(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<()> {
    let gen = UcmLike {
        n_common: a.labels_common,
        n_rare: a.labels_rare,
        common_freq: a.common_freq,
        rare_freq: a.rare_freq,
        ..UcmLike::default()
    };
    let ds = gen.generate(a.n, ImageShape::new(a.size, a.size, 3), a.seed)?;
    write_dataset(&ds, &a.out)?;
    log::info!("wrote {} samples with {} labels to {}", ds.len(), ds.n_labels(), a.out.display());
    Ok(())
}

fn stats(data: &Path, out: &Path) -> Result<()> {
    let ds = load_dataset(data)?;
    let st = label_stats(&ds)?;
    let (common, _) = split_common_labels(&st, ds.len(), DEFAULT_COMMON_THRESHOLD);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut w = csv::Writer::from_path(out.join("label_counts.csv"))?;
    w.write_record(["label", "count", "frequency", "common"])?;
    for (l, name) in ds.label_names().iter().enumerate() {
        let c = st.counts[l];
        w.write_record([
            name.clone(),
            c.to_string(),
            (c as f64 / ds.len() as f64).to_string(),
            common.contains(&l).to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("cosine.csv"))?;
    w.write_record(std::iter::once("label").chain(ds.label_names().iter().map(String::as_str)))?;
    for (name, row) in ds.label_names().iter().zip(&st.cosine) {
        w.write_record(std::iter::once(name.clone()).chain(row.iter().map(f64::to_string)))?;
    }
    w.flush()?;
    Ok(())
}

fn partition(a: PartitionArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let st = label_stats(&ds)?;
    let plan = make_partition(
        &ds,
        &st,
        &SkewConfig {
            n_clients: a.clients,
            skew_pct: a.skewness,
            small_skew: a.small_skew,
            seed: a.seed,
        },
    )?;
    let report = skew_report(&plan, &ds)?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["client", "label", "count", "monopoly"])?;
    for (client, row) in report.iter().enumerate() {
        for (l, count) in row.iter().enumerate() {
            let monopoly = plan.monopoly.get(&client) == Some(&l);
            w.write_record([
                client.to_string(),
                ds.label_names()[l].clone(),
                count.to_string(),
                monopoly.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let ds = load_dataset(&a.common.data)?;
    let row = ExperimentRow {
        model: a.model,
        algorithm: a.algorithm,
        rounds: a.rounds,
        clients: a.clients,
        batch_size: a.batch_size,
        c_fraction: a.c_fraction,
        skewness: a.skewness,
        client_epochs: a.client_epochs,
        small_skew: a.small_skew,
        seed: a.seed,
        mu: a.mu,
    };
    let out = run_experiment_with(&row, &ds, &a.common.settings())?;
    fs::create_dir_all(&a.common.out).with_context(|| format!("creating {}", a.common.out.display()))?;
    let path = save_run(&a.common.out, &out)?;
    println!(
        "{}: final F1 {:.4}, max F1 {:.4}, {} bytes",
        path.display(),
        out.summary.final_f1,
        out.summary.max_f1,
        out.summary.total_bytes
    );
    Ok(())
}

fn save_run(dir: &Path, out: &RunOutput) -> Result<PathBuf> {
    let path = dir.join(format!("run-{}.csv", out.run_id));
    write_run_csv(&path, &out.records)?;
    Ok(path)
}

fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let rows = read_config(&a.config)?;
    if rows.is_empty() {
        bail!("{} has no rows", a.config.display());
    }
    let ds = load_dataset(&a.common.data)?;
    fs::create_dir_all(&a.common.out).with_context(|| format!("creating {}", a.common.out.display()))?;
    log::info!("running {} experiments with {} jobs", rows.len(), a.jobs);
    let results = run_sweep(&rows, &ds, &a.common.settings(), a.jobs)?;

    let mut failures = 0;
    let mut summary = Vec::with_capacity(rows.len());
    for (i, (row, res)) in rows.into_iter().zip(results).enumerate() {
        let res = match res {
            Ok(out) => {
                save_run(&a.common.out, &out)?;
                Ok(out)
            }
            Err(e) => {
                failures += 1;
                let msg = describe_error(&e);
                log::error!("row {}: {msg}", i + 1);
                Err(msg)
            }
        };
        summary.push((row, res));
    }
    write_summary_csv(&a.common.out.join("summary.csv"), &summary)?;
    if failures > 0 {
        eprintln!("{failures} of {} runs failed", summary.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}
