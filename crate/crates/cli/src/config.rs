//! Config resolution: built-in defaults, then the optional JSON config
//! file, then flags — later layers win. Every command serializes its fully
//! resolved parameters to `config.resolved.json`, which is sufficient to
//! reproduce the run bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use streamsel::{
    CostMatrix, Error as CoreError, EvalConfig, LfaConfig, SaParams, SelectionMode,
    SelectorConfig, ThresholdPair,
};

use crate::args::{EvalArgs, MaskArgs, PipelineFlags, SelectArgs, SynthArgs};
use crate::CliError;

/// Optional values loadable from `--config <file.json>`. Unknown keys are
/// rejected so typos surface as usage errors.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub h: Option<usize>,
    pub epochs: Option<usize>,
    pub tol: Option<f64>,
    pub buffer: Option<usize>,
    pub zeta: Option<f64>,
    pub costs: Option<[f64; 6]>,
    pub init_t: Option<f64>,
    pub min_t: Option<f64>,
    pub delta: Option<f64>,
    pub k: Option<f64>,
    pub step_sigma: Option<f64>,
    pub max_cond_size: Option<usize>,
    pub reanneal_every: Option<usize>,
    pub warm_start: Option<bool>,
    pub weak_singletons: Option<bool>,
    pub two_way: Option<bool>,
    pub fixed_alpha: Option<f64>,
    pub fixed_beta: Option<f64>,
    pub folds: Option<usize>,
    pub repeats: Option<usize>,
    pub knn_k: Option<usize>,
    pub missing_token: Option<String>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub relevant: Option<usize>,
    pub duplicates: Option<usize>,
    pub noise_sigma: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(p.to_path_buf(), e))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config file {}: {e}", p.display())))
            }
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Fully resolved pipeline parameters, shared by `select` and `eval`.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedPipeline {
    pub mu: f64,
    pub lambda: f64,
    pub eta: f64,
    pub h: usize,
    pub epochs: usize,
    pub tol: f64,
    pub buffer: usize,
    pub zeta: f64,
    pub costs: [f64; 6],
    pub init_t: f64,
    pub min_t: f64,
    pub delta: f64,
    pub k: f64,
    pub step_sigma: f64,
    pub max_cond_size: usize,
    pub reanneal_every: usize,
    pub warm_start: bool,
    pub weak_singletons: bool,
    pub two_way: bool,
    pub fixed_alpha: Option<f64>,
    pub fixed_beta: Option<f64>,
    pub missing_token: String,
}

impl ResolvedPipeline {
    pub fn resolve(flags: &PipelineFlags, file: &FileConfig) -> Self {
        let lfa = LfaConfig::default();
        let sa = SaParams::default();
        let sel = SelectorConfig::default();
        let costs = CostMatrix::default();
        Self {
            mu: pick(flags.mu, file.mu, sel.mu),
            lambda: pick(flags.lambda, file.lambda, lfa.lambda),
            eta: pick(flags.eta, file.eta, lfa.eta),
            h: pick(flags.h, file.h, lfa.h),
            epochs: pick(flags.epochs, file.epochs, lfa.max_epochs),
            tol: pick(flags.tol, file.tol, lfa.tol),
            buffer: pick(flags.buffer, file.buffer, sel.buffer_len),
            zeta: pick(flags.zeta, file.zeta, 0.1),
            costs: pick(
                flags.costs,
                file.costs,
                [costs.r_pp, costs.r_bp, costs.r_ep, costs.r_pe, costs.r_be, costs.r_ee],
            ),
            init_t: pick(flags.init_t, file.init_t, sa.init_t),
            min_t: pick(flags.min_t, file.min_t, sa.min_t),
            delta: pick(flags.delta, file.delta, sa.delta),
            k: pick(flags.k, file.k, sa.k),
            step_sigma: pick(flags.step_sigma, file.step_sigma, sa.step_sigma),
            max_cond_size: pick(flags.max_cond_size, file.max_cond_size, sel.max_cond_size),
            reanneal_every: pick(flags.reanneal_every, file.reanneal_every, sel.reanneal_every),
            warm_start: flags.warm_start || file.warm_start.unwrap_or(false),
            weak_singletons: flags.weak_singletons || file.weak_singletons.unwrap_or(false),
            two_way: flags.two_way || file.two_way.unwrap_or(false),
            fixed_alpha: flags.fixed_alpha.or(file.fixed_alpha),
            fixed_beta: flags.fixed_beta.or(file.fixed_beta),
            missing_token: pick(
                flags.missing_token.clone(),
                file.missing_token.clone(),
                "NA".to_string(),
            ),
        }
    }

    pub fn selector_config(&self, seed: u64) -> Result<SelectorConfig, CoreError> {
        let fixed_thresholds = match (self.fixed_alpha, self.fixed_beta) {
            (Some(alpha), Some(beta)) => Some(ThresholdPair::new(alpha, beta)?),
            (None, None) => None,
            _ => {
                return Err(CoreError::InvalidConfig(
                    "fixed thresholds need both alpha and beta".into(),
                ))
            }
        };
        let cfg = SelectorConfig {
            mu: self.mu,
            lfa: LfaConfig {
                h: self.h,
                lambda: self.lambda,
                eta: self.eta,
                max_epochs: self.epochs,
                tol: self.tol,
                seed: 0,
            },
            buffer_len: self.buffer,
            costs: CostMatrix::from_array(self.costs)?,
            sa: SaParams {
                init_t: self.init_t,
                min_t: self.min_t,
                delta: self.delta,
                k: self.k,
                step_sigma: self.step_sigma,
                seed: 0,
            },
            max_cond_size: self.max_cond_size,
            seed,
            reanneal_every: self.reanneal_every,
            warm_start: self.warm_start,
            weak_singletons_only: self.weak_singletons,
            mode: if self.two_way { SelectionMode::TwoWay } else { SelectionMode::ThreeWay },
            fixed_thresholds,
        };
        cfg.validate()?;
        // Degenerate cost matrices must fail up front, not mid-stream.
        if cfg.mode == SelectionMode::ThreeWay && cfg.fixed_thresholds.is_none() {
            streamsel::initial_thresholds(&cfg.costs)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
pub struct ResolvedSynth {
    pub command: &'static str,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub relevant: usize,
    pub duplicates: usize,
    pub noise_sigma: f64,
    pub out_dir: PathBuf,
}

impl ResolvedSynth {
    pub fn resolve(args: &SynthArgs, file: &FileConfig, seed: u64) -> Self {
        Self {
            command: "synth",
            seed,
            n: pick(args.n, file.n, 500),
            d: pick(args.d, file.d, 100),
            relevant: pick(args.relevant, file.relevant, 5),
            duplicates: pick(args.duplicates, file.duplicates, 0),
            noise_sigma: pick(args.noise_sigma, file.noise_sigma, 0.5),
            out_dir: args.out_dir.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ResolvedMask {
    pub command: &'static str,
    pub seed: u64,
    pub input: PathBuf,
    pub zeta: f64,
    pub missing_token: String,
    pub out_dir: PathBuf,
}

impl ResolvedMask {
    pub fn resolve(args: &MaskArgs, file: &FileConfig, seed: u64) -> Self {
        Self {
            command: "mask",
            seed,
            input: args.input.clone(),
            zeta: pick(args.zeta, file.zeta, 0.1),
            missing_token: pick(
                args.missing_token.clone(),
                file.missing_token.clone(),
                "NA".to_string(),
            ),
            out_dir: args.out_dir.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ResolvedSelect {
    pub command: &'static str,
    pub seed: u64,
    pub input: PathBuf,
    pub out_dir: PathBuf,
    #[serde(flatten)]
    pub pipeline: ResolvedPipeline,
}

impl ResolvedSelect {
    pub fn resolve(args: &SelectArgs, file: &FileConfig, seed: u64) -> Self {
        Self {
            command: "select",
            seed,
            input: args.input.clone(),
            out_dir: args.out_dir.clone(),
            pipeline: ResolvedPipeline::resolve(&args.pipeline, file),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ResolvedEval {
    pub command: &'static str,
    pub seed: u64,
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub folds: usize,
    pub repeats: usize,
    pub knn_k: usize,
    pub ablation: bool,
    #[serde(flatten)]
    pub pipeline: ResolvedPipeline,
}

impl ResolvedEval {
    pub fn resolve(args: &EvalArgs, file: &FileConfig, seed: u64) -> Self {
        let defaults = EvalConfig::default();
        Self {
            command: "eval",
            seed,
            input: args.input.clone(),
            out_dir: args.out_dir.clone(),
            folds: pick(args.folds, file.folds, defaults.folds),
            repeats: pick(args.repeats, file.repeats, defaults.repeats),
            knn_k: pick(args.knn_k, file.knn_k, defaults.knn_k),
            ablation: args.ablation,
            pipeline: ResolvedPipeline::resolve(&args.pipeline, file),
        }
    }

    pub fn eval_config(&self, seed: u64) -> EvalConfig {
        EvalConfig {
            folds: self.folds,
            repeats: self.repeats,
            knn_k: self.knn_k,
            zeta: self.pipeline.zeta,
            seed,
        }
    }
}
