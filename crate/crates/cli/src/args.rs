//! Flag definitions. Every value flag is optional here; defaults and the
//! optional JSON config file are folded in during resolution, with flags
//! winning over the file and the file over built-in defaults.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "streamsel",
    version,
    about = "Online feature selection over sparse streaming feature columns",
    after_help = "Every run writes config.resolved.json next to its outputs; \
                  rerunning with the same resolved config reproduces the outputs byte for byte."
)]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; all randomness derives from it (default: 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for fold-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted synthetic dataset (CSV + ground-truth JSON).
    Synth(SynthArgs),
    /// Mask a fully-known CSV at a given loss rate.
    Mask(MaskArgs),
    /// Run streaming selection over a CSV.
    Select(SelectArgs),
    /// Cross-validate the pipeline on a CSV (optionally with the two-way ablation).
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Instances (default: 500).
    #[arg(long)]
    pub n: Option<usize>,
    /// Features (default: 100).
    #[arg(long)]
    pub d: Option<usize>,
    /// Label-driving features (default: 5).
    #[arg(long)]
    pub relevant: Option<usize>,
    /// Jittered copies of relevant features (default: 0).
    #[arg(long)]
    pub duplicates: Option<usize>,
    /// Label noise spread (default: 0.5).
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Input CSV (labels in the last column).
    #[arg(long)]
    pub input: PathBuf,
    /// Loss rate in [0, 1) (default: 0.1).
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Token marking missing cells (default: NA).
    #[arg(long)]
    pub missing_token: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Input CSV (labels in the last column).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Input CSV (labels in the last column).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Cross-validation folds (default: 5).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Repetitions of the whole cross-validation (default: 10).
    #[arg(long)]
    pub repeats: Option<usize>,
    /// KNN neighbor count (default: 3).
    #[arg(long)]
    pub knn_k: Option<usize>,
    /// Also run the two-way ablation and write paired reports.
    #[arg(long)]
    pub ablation: bool,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

/// Flags shared by `select` and `eval`.
#[derive(Debug, Args)]
pub struct PipelineFlags {
    /// Significance level of the Fisher-Z tests (default: 0.05).
    #[arg(long)]
    pub mu: Option<f64>,
    /// L2 regularization of the completion model (default: 0.01).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// SGD learning rate (default: 0.01).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Latent dimension (default: 10).
    #[arg(long)]
    pub h: Option<usize>,
    /// SGD epoch cap (default: 1000).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// SGD convergence tolerance on RMSE improvement (default: 1e-4).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Buffer length L (default: 5).
    #[arg(long)]
    pub buffer: Option<usize>,
    /// Loss rate injected before selection (default: 0.1).
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Six costs r_pp,r_bp,r_ep,r_pe,r_be,r_ee (default: 0,1,10,10,1,0).
    #[arg(long, value_parser = parse_costs)]
    pub costs: Option<[f64; 6]>,
    /// Annealer initial temperature (default: 1).
    #[arg(long)]
    pub init_t: Option<f64>,
    /// Annealer final temperature (default: 1e-3).
    #[arg(long)]
    pub min_t: Option<f64>,
    /// Annealer cooling factor (default: 0.95).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Annealer Boltzmann scale (default: 1).
    #[arg(long)]
    pub k: Option<f64>,
    /// Annealer proposal spread (default: 0.05).
    #[arg(long)]
    pub step_sigma: Option<f64>,
    /// Largest conditioning-set size in redundancy tests (default: 3).
    #[arg(long)]
    pub max_cond_size: Option<usize>,
    /// Re-anneal once every this many features (default: 1).
    #[arg(long)]
    pub reanneal_every: Option<usize>,
    /// Warm-start each annealing run from the previous thresholds.
    #[arg(long)]
    pub warm_start: bool,
    /// Restrict weak-admission tests to singleton conditioning sets.
    #[arg(long)]
    pub weak_singletons: bool,
    /// Two-way ablation routing (no boundary region).
    #[arg(long)]
    pub two_way: bool,
    /// Pin alpha and skip annealing (requires --fixed-beta).
    #[arg(long, requires = "fixed_beta")]
    pub fixed_alpha: Option<f64>,
    /// Pin beta and skip annealing (requires --fixed-alpha).
    #[arg(long, requires = "fixed_alpha")]
    pub fixed_beta: Option<f64>,
    /// Token marking missing cells (default: NA).
    #[arg(long)]
    pub missing_token: Option<String>,
}

fn parse_costs(raw: &str) -> Result<[f64; 6], String> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 6 {
        return Err(format!("expected 6 comma-separated costs, got {}", parts.len()));
    }
    let mut costs = [0.0; 6];
    for (i, part) in parts.iter().enumerate() {
        costs[i] = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("cost {}: {e}", i + 1))?;
    }
    Ok(costs)
}
