//! The `cgib` command line: `gen`, `train`, `eval`, `gradcheck`, `ablate`.
//!
//! Every artifact-producing command first writes a `manifest.json` with the
//! fully resolved configuration and input hashes; re-running a command with
//! `--config manifest.json` reproduces the run byte for byte. Exit codes:
//! 0 success, 1 runtime failure, 2 usage error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::datagen::{self, Shift, SplitBundle, SynthSpec};
use crate::error::Error;
use crate::gnn::{GinConfig, Pooling};
use crate::gradcheck;
use crate::graph;
use crate::losses::LossWeights;
use crate::trainer::{self, Ablation, Head, RunRecord, TrainConfig};

#[derive(Parser)]
#[command(
    name = "cgib",
    version,
    about = "Causal/confounding subgraph disentanglement for graph regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic spurious-motif dataset
    Gen(GenArgs),
    /// Train a model on a generated dataset
    Train(TrainArgs),
    /// Evaluate a checkpoint on every split
    Eval(EvalArgs),
    /// Finite-difference checks for every primitive and the composed loss
    Gradcheck(GradcheckArgs),
    /// Train all four ablations across seeds and summarize
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ShiftArg {
    None,
    Covariate,
    Concept,
}

impl From<ShiftArg> for Shift {
    fn from(s: ShiftArg) -> Shift {
        match s {
            ShiftArg::None => Shift::None,
            ShiftArg::Covariate => Shift::Covariate,
            ShiftArg::Concept => Shift::Concept,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum AblationArg {
    #[value(name = "full")]
    Full,
    #[value(name = "no_gib")]
    NoGib,
    #[value(name = "no_ci")]
    NoCi,
    #[value(name = "no_both")]
    NoBoth,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Ablation {
        match a {
            AblationArg::Full => Ablation::Full,
            AblationArg::NoGib => Ablation::NoGib,
            AblationArg::NoCi => Ablation::NoCi,
            AblationArg::NoBoth => Ablation::NoBoth,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum HeadArg {
    Causal,
    Confounding,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    Mean,
    Sum,
}

#[derive(Args)]
pub struct GenArgs {
    /// Output directory for the five split files and stats.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub shift: Option<ShiftArg>,
    /// Spurious correlation strength in [0, 1]
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub num_train: Option<usize>,
    /// Graphs in each evaluation split
    #[arg(long)]
    pub num_eval: Option<usize>,
    /// Smallest base-graph size
    #[arg(long)]
    pub base_lo: Option<usize>,
    /// Largest base-graph size
    #[arg(long)]
    pub base_hi: Option<usize>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub signal_coeff: Option<f64>,
    /// key=value config file (or a manifest.json); flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory produced by `cgib gen`
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for checkpoint, metrics, and manifest
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr_init: Option<f64>,
    #[arg(long)]
    pub lr_min: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Apply the 1/2 factor of the compression bound as-is
    #[arg(long)]
    pub mi_half: Option<bool>,
    /// Include the positive pair in the contrastive denominator
    #[arg(long)]
    pub infonce_standard: Option<bool>,
    /// GIN layers
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden dimension
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub pooling: Option<PoolingArg>,
    #[arg(long)]
    pub ablation: Option<AblationArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model initialization seed (defaults to --seed)
    #[arg(long)]
    pub model_seed: Option<u64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Global gradient-norm ceiling (0 disables)
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Which readout head to report
    #[arg(long)]
    pub head: Option<HeadArg>,
    /// Optional output directory for metrics CSV and manifest
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random instances per primitive check
    #[arg(long)]
    pub instances: Option<usize>,
    /// Random instances for the composed-objective check
    #[arg(long)]
    pub composed_instances: Option<usize>,
    /// Optional output directory for the report and manifest
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated training seeds
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr_init: Option<f64>,
    #[arg(long)]
    pub lr_min: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Worker threads for independent cells (default: rayon's choice)
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Dispatch a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Ablate(args) => cmd_ablate(args),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

// ---------------------------------------------------------------------------
// Config resolution

struct Resolver {
    cfg: BTreeMap<String, String>,
}

impl Resolver {
    fn load(path: Option<&Path>) -> CliResult<Resolver> {
        let mut cfg = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(Error::Io)?;
            if text.trim_start().starts_with('{') {
                let manifest: RunManifest = serde_json::from_str(&text)
                    .map_err(|e| usage(format!("config {}: not a manifest: {e}", path.display())))?;
                cfg = manifest.config;
            } else {
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (k, v) = line
                        .split_once('=')
                        .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
                    cfg.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        Ok(Resolver { cfg })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.cfg.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| usage(format!("config key {key}: cannot parse {s:?}"))),
            None => Ok(default),
        }
    }

    fn get_with<T>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
        parse: impl Fn(&str) -> Option<T>,
    ) -> CliResult<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.cfg.get(key) {
            Some(s) => parse(s).ok_or_else(|| usage(format!("config key {key}: bad value {s:?}"))),
            None => Ok(default),
        }
    }

    fn get_path(&self, key: &str, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        if let Some(p) = flag {
            return Ok(p);
        }
        self.cfg
            .get(key)
            .map(PathBuf::from)
            .ok_or_else(|| usage(format!("--{key} is required")))
    }
}

fn parse_shift(s: &str) -> Option<Shift> {
    match s {
        "none" => Some(Shift::None),
        "covariate" => Some(Shift::Covariate),
        "concept" => Some(Shift::Concept),
        _ => None,
    }
}

fn parse_ablation(s: &str) -> Option<Ablation> {
    match s {
        "full" => Some(Ablation::Full),
        "no_gib" => Some(Ablation::NoGib),
        "no_ci" => Some(Ablation::NoCi),
        "no_both" => Some(Ablation::NoBoth),
        _ => None,
    }
}

fn parse_pooling(s: &str) -> Option<Pooling> {
    match s {
        "mean" => Some(Pooling::Mean),
        "sum" => Some(Pooling::Sum),
        _ => None,
    }
}

fn shift_name(s: Shift) -> &'static str {
    match s {
        Shift::None => "none",
        Shift::Covariate => "covariate",
        Shift::Concept => "concept",
    }
}

fn pooling_name(p: Pooling) -> &'static str {
    match p {
        Pooling::Mean => "mean",
        Pooling::Sum => "sum",
    }
}

// ---------------------------------------------------------------------------
// Manifests

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub seed: u64,
    /// Fully resolved configuration, reusable via `--config manifest.json`.
    pub config: BTreeMap<String, String>,
    /// Input files and their SHA-256 hashes.
    pub inputs: BTreeMap<String, String>,
    /// Files the command will write.
    pub outputs: Vec<String>,
}

fn sha256_hex(path: &Path) -> crate::error::Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> crate::error::Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gen

const SPLIT_FILES: [(&str, &str); 5] = [
    ("train", "train.jsonl"),
    ("id_val", "id_val.jsonl"),
    ("id_test", "id_test.jsonl"),
    ("ood_val", "ood_val.jsonl"),
    ("ood_test", "ood_test.jsonl"),
];

fn cmd_gen(args: GenArgs) -> CliResult<i32> {
    let resolver = Resolver::load(args.config.as_deref())?;
    let out = resolver.get_path("out", args.out)?;
    let shift = resolver.get_with(
        "shift",
        args.shift.map(Into::into),
        Shift::Concept,
        parse_shift,
    )?;
    let defaults = SynthSpec::default();
    let r = resolver.get("r", args.r, defaults.spurious_strength)?;
    let seed = resolver.get("seed", args.seed, 0u64)?;
    let num_train = resolver.get("num_train", args.num_train, defaults.num_train)?;
    let num_eval = resolver.get("num_eval", args.num_eval, defaults.num_id_val)?;
    let base_lo = resolver.get("base_lo", args.base_lo, defaults.base_size_range.0)?;
    let base_hi = resolver.get("base_hi", args.base_hi, defaults.base_size_range.1)?;
    let noise_std = resolver.get("noise_std", args.noise_std, defaults.noise_std)?;
    let signal_coeff = resolver.get("signal_coeff", args.signal_coeff, defaults.signal_coeff)?;

    let spec = SynthSpec {
        num_train,
        num_id_val: num_eval,
        num_id_test: num_eval,
        num_ood_val: num_eval,
        num_ood_test: num_eval,
        base_size_range: (base_lo, base_hi),
        spurious_strength: r,
        shift,
        signal_coeff,
        noise_std,
        seed,
        ..defaults
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;

    let mut config = BTreeMap::new();
    config.insert("out".into(), out.display().to_string());
    config.insert("shift".into(), shift_name(shift).into());
    config.insert("r".into(), r.to_string());
    config.insert("seed".into(), seed.to_string());
    config.insert("num_train".into(), num_train.to_string());
    config.insert("num_eval".into(), num_eval.to_string());
    config.insert("base_lo".into(), base_lo.to_string());
    config.insert("base_hi".into(), base_hi.to_string());
    config.insert("noise_std".into(), noise_std.to_string());
    config.insert("signal_coeff".into(), signal_coeff.to_string());
    let manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        command: "gen".into(),
        seed,
        config,
        inputs: BTreeMap::new(),
        outputs: SPLIT_FILES
            .iter()
            .map(|(_, f)| f.to_string())
            .chain(["stats.json".to_string()])
            .collect(),
    };
    write_manifest(&out, &manifest)?;

    let bundle = datagen::generate(&spec)?;
    for (name, file) in SPLIT_FILES {
        let graphs = match name {
            "train" => &bundle.train,
            "id_val" => &bundle.id_val,
            "id_test" => &bundle.id_test,
            "ood_val" => &bundle.ood_val,
            _ => &bundle.ood_test,
        };
        graph::save_dataset(graphs, out.join(file))?;
    }
    let stats = datagen::split_stats(&bundle);
    std::fs::write(
        out.join("stats.json"),
        serde_json::to_string_pretty(&stats).map_err(Error::Json)? + "\n",
    )
    .map_err(Error::Io)?;

    println!("wrote {} splits to {}", SPLIT_FILES.len(), out.display());
    for (name, summary) in &stats.splits {
        println!(
            "  {name}: {} graphs, correlated-base mass {:.3}, y mean {:.3} std {:.3}",
            summary.count,
            summary.diagonal_mass(),
            summary.y_mean,
            summary.y_std
        );
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// train

fn load_bundle(dir: &Path) -> CliResult<SplitBundle> {
    let read = |file: &str, required: bool| -> CliResult<Vec<graph::Graph>> {
        let path = dir.join(file);
        if !path.exists() {
            if required {
                return Err(CliError::Runtime(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{} not found", path.display()),
                ))));
            }
            return Ok(Vec::new());
        }
        Ok(graph::load_dataset(&path)?)
    };
    Ok(SplitBundle {
        train: read("train.jsonl", true)?,
        id_val: read("id_val.jsonl", false)?,
        id_test: read("id_test.jsonl", false)?,
        ood_val: read("ood_val.jsonl", false)?,
        ood_test: read("ood_test.jsonl", false)?,
    })
}

struct ResolvedTrain {
    config: TrainConfig,
    model_seed: u64,
    config_map: BTreeMap<String, String>,
}

#[allow(clippy::too_many_arguments)]
fn resolve_train_config(
    resolver: &Resolver,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr_init: Option<f64>,
    lr_min: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    lambda: Option<f64>,
    tau: Option<f64>,
    mi_half: Option<bool>,
    infonce_standard: Option<bool>,
    layers: Option<usize>,
    hidden: Option<usize>,
    epsilon: Option<f64>,
    pooling: Option<PoolingArg>,
    ablation: Option<AblationArg>,
    seed: Option<u64>,
    model_seed: Option<u64>,
    eval_every: Option<usize>,
    grad_clip: Option<f64>,
) -> CliResult<ResolvedTrain> {
    let d = TrainConfig::default();
    let dw = LossWeights::default();
    let dg = GinConfig::default();
    let epochs = resolver.get("epochs", epochs, d.epochs)?;
    let batch_size = resolver.get("batch_size", batch_size, d.batch_size)?;
    let lr_init = resolver.get("lr_init", lr_init, d.lr_init)?;
    let lr_min = resolver.get("lr_min", lr_min, d.lr_min)?;
    let alpha = resolver.get("alpha", alpha, dw.alpha)?;
    let beta = resolver.get("beta", beta, dw.beta)?;
    let lambda = resolver.get("lambda", lambda, dw.lambda)?;
    let tau = resolver.get("tau", tau, dw.tau)?;
    let mi_half = resolver.get("mi_half", mi_half, dw.mi_half)?;
    let infonce_standard = resolver.get("infonce_standard", infonce_standard, dw.infonce_standard)?;
    let layers = resolver.get("layers", layers, dg.num_layers)?;
    let hidden = resolver.get("hidden", hidden, dg.hidden_dim)?;
    let epsilon = resolver.get("epsilon", epsilon, dg.epsilon)?;
    let pooling = resolver.get_with(
        "pooling",
        pooling.map(|p| match p {
            PoolingArg::Mean => Pooling::Mean,
            PoolingArg::Sum => Pooling::Sum,
        }),
        dg.pooling,
        parse_pooling,
    )?;
    let ablation = resolver.get_with(
        "ablation",
        ablation.map(Into::into),
        Ablation::Full,
        parse_ablation,
    )?;
    let seed = resolver.get("seed", seed, 0u64)?;
    let model_seed = resolver.get("model_seed", model_seed, seed)?;
    let eval_every = resolver.get("eval_every", eval_every, d.eval_every)?;
    let grad_clip = resolver.get("grad_clip", grad_clip, d.grad_clip)?;

    let config = TrainConfig {
        epochs,
        batch_size,
        lr_init,
        lr_min,
        weights: LossWeights {
            alpha,
            beta,
            lambda,
            tau,
            mi_half,
            infonce_standard,
        },
        seed,
        ablation,
        eval_every,
        grad_clip,
        gin: GinConfig {
            num_layers: layers,
            hidden_dim: hidden,
            epsilon,
            pooling,
        },
        checkpoint_path: None,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let mut map = BTreeMap::new();
    map.insert("epochs".into(), epochs.to_string());
    map.insert("batch_size".into(), batch_size.to_string());
    map.insert("lr_init".into(), lr_init.to_string());
    map.insert("lr_min".into(), lr_min.to_string());
    map.insert("alpha".into(), alpha.to_string());
    map.insert("beta".into(), beta.to_string());
    map.insert("lambda".into(), lambda.to_string());
    map.insert("tau".into(), tau.to_string());
    map.insert("mi_half".into(), mi_half.to_string());
    map.insert("infonce_standard".into(), infonce_standard.to_string());
    map.insert("layers".into(), layers.to_string());
    map.insert("hidden".into(), hidden.to_string());
    map.insert("epsilon".into(), epsilon.to_string());
    map.insert("pooling".into(), pooling_name(pooling).into());
    map.insert("ablation".into(), ablation.name().into());
    map.insert("seed".into(), seed.to_string());
    map.insert("model_seed".into(), model_seed.to_string());
    map.insert("eval_every".into(), eval_every.to_string());
    map.insert("grad_clip".into(), grad_clip.to_string());
    Ok(ResolvedTrain {
        config,
        model_seed,
        config_map: map,
    })
}

fn input_hashes(dir: &Path) -> crate::error::Result<BTreeMap<String, String>> {
    let mut inputs = BTreeMap::new();
    for (_, file) in SPLIT_FILES {
        let path = dir.join(file);
        if path.exists() {
            inputs.insert(path.display().to_string(), sha256_hex(&path)?);
        }
    }
    Ok(inputs)
}

fn write_metrics_csv(record: &RunRecord, path: &Path) -> crate::error::Result<()> {
    let mut s = String::from("epoch,split,mae,rmse,loss_total,loss_cp,loss_sp,loss_reg,loss_ci\n");
    for eval in &record.evals {
        let r = &record.epoch_reports[eval.epoch - 1];
        for (split, _) in SPLIT_FILES {
            if let Some(m) = eval.metrics.get(split) {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    eval.epoch, split, m.mae, m.rmse, r.total, r.l_cp, r.l_sp, r.l_reg, r.l_ci
                )
                .expect("string write");
            }
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult<i32> {
    let resolver = Resolver::load(args.config.as_deref())?;
    let data = resolver.get_path("data", args.data)?;
    let out = resolver.get_path("out", args.out)?;
    let resolved = resolve_train_config(
        &resolver,
        args.epochs,
        args.batch_size,
        args.lr_init,
        args.lr_min,
        args.alpha,
        args.beta,
        args.lambda,
        args.tau,
        args.mi_half,
        args.infonce_standard,
        args.layers,
        args.hidden,
        args.epsilon,
        args.pooling,
        args.ablation,
        args.seed,
        args.model_seed,
        args.eval_every,
        args.grad_clip,
    )?;

    let mut config_map = resolved.config_map;
    config_map.insert("data".into(), data.display().to_string());
    config_map.insert("out".into(), out.display().to_string());

    let manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        command: "train".into(),
        seed: resolved.config.seed,
        config: config_map,
        inputs: input_hashes(&data)?,
        outputs: vec![
            "checkpoint.json".into(),
            "metrics.csv".into(),
            "run_record.json".into(),
        ],
    };
    write_manifest(&out, &manifest)?;

    let bundle = load_bundle(&data)?;
    let mut config = resolved.config;
    config.checkpoint_path = Some(out.join("checkpoint.json").display().to_string());
    let (_model, record) = trainer::train(&config, &bundle, resolved.model_seed)?;

    write_metrics_csv(&record, &out.join("metrics.csv"))?;
    std::fs::write(
        out.join("run_record.json"),
        serde_json::to_string(&record).map_err(Error::Json)? + "\n",
    )
    .map_err(Error::Io)?;

    println!("trained {} epochs ({} ablation)", config.epochs, config.ablation.name());
    for (split, m) in &record.selected_metrics {
        println!("  {split}: mae {:.4} rmse {:.4}", m.mae, m.rmse);
    }
    for (split, q) in &record.mask_quality {
        println!("  mask_quality[{split}] = {q:.4}");
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(args: EvalArgs) -> CliResult<i32> {
    let resolver = Resolver::load(args.config.as_deref())?;
    let checkpoint = resolver.get_path("checkpoint", args.checkpoint)?;
    let data = resolver.get_path("data", args.data)?;
    let head = resolver.get_with(
        "head",
        args.head,
        HeadArg::Both,
        |s| match s {
            "causal" => Some(HeadArg::Causal),
            "confounding" => Some(HeadArg::Confounding),
            "both" => Some(HeadArg::Both),
            _ => None,
        },
    )?;

    let model = trainer::load_checkpoint(&checkpoint)?;
    let bundle = load_bundle(&data)?;

    let heads: Vec<Head> = match head {
        HeadArg::Causal => vec![Head::Causal],
        HeadArg::Confounding => vec![Head::Confounding],
        HeadArg::Both => vec![Head::Causal, Head::Confounding],
    };

    let mut csv = String::from("split,head,mae,rmse,mask_quality\n");
    println!("{:<10} {:<12} {:>10} {:>10} {:>12}", "split", "head", "mae", "rmse", "mask_qual");
    for (name, graphs) in bundle.splits() {
        if graphs.is_empty() {
            continue;
        }
        let quality = if graphs.iter().all(|g| g.meta.contains_key("motif_nodes")) {
            Some(trainer::mask_quality(&model, graphs)?)
        } else {
            None
        };
        let quality_str = quality.map(|q| q.to_string()).unwrap_or_default();
        for h in &heads {
            let m = trainer::evaluate(&model, graphs, *h)?;
            let head_name = match h {
                Head::Causal => "causal",
                Head::Confounding => "confounding",
            };
            println!(
                "{:<10} {:<12} {:>10.4} {:>10.4} {:>12}",
                name,
                head_name,
                m.mae,
                m.rmse,
                quality.map(|q| format!("{q:.4}")).unwrap_or_else(|| "-".into())
            );
            writeln!(csv, "{name},{head_name},{},{},{quality_str}", m.mae, m.rmse)
                .expect("string write");
        }
    }

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(Error::Io)?;
        let mut config = BTreeMap::new();
        config.insert("checkpoint".into(), checkpoint.display().to_string());
        config.insert("data".into(), data.display().to_string());
        config.insert(
            "head".into(),
            match head {
                HeadArg::Causal => "causal",
                HeadArg::Confounding => "confounding",
                HeadArg::Both => "both",
            }
            .into(),
        );
        let mut inputs = input_hashes(&data)?;
        inputs.insert(checkpoint.display().to_string(), sha256_hex(&checkpoint)?);
        let manifest = RunManifest {
            format_version: MANIFEST_VERSION,
            command: "eval".into(),
            seed: 0,
            config,
            inputs,
            outputs: vec!["eval_metrics.csv".into()],
        };
        write_manifest(out, &manifest)?;
        std::fs::write(out.join("eval_metrics.csv"), csv).map_err(Error::Io)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// gradcheck

fn cmd_gradcheck(args: GradcheckArgs) -> CliResult<i32> {
    let resolver = Resolver::load(args.config.as_deref())?;
    let seed = resolver.get("seed", args.seed, 0u64)?;
    let instances = resolver.get("instances", args.instances, 100usize)?;
    let composed = resolver.get("composed_instances", args.composed_instances, 100usize)?;

    let results = gradcheck::full_suite(seed, instances, composed)?;
    let mut all_pass = true;
    let mut report = String::new();
    println!(
        "{:<22} {:>9} {:>14}  {}",
        "check", "instances", "max_rel_err", "status"
    );
    for r in &results {
        let status = if r.passed() { "pass" } else { "FAIL" };
        all_pass &= r.passed();
        println!(
            "{:<22} {:>9} {:>14.3e}  {}",
            r.name, r.instances, r.max_rel_err, status
        );
        writeln!(report, "{},{},{},{}", r.name, r.instances, r.max_rel_err, status)
            .expect("string write");
    }
    println!(
        "gradcheck: {} ({} checks, tolerance {:.0e})",
        if all_pass { "all passed" } else { "FAILURES" },
        results.len(),
        gradcheck::TOLERANCE
    );

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(Error::Io)?;
        let mut config = BTreeMap::new();
        config.insert("seed".into(), seed.to_string());
        config.insert("instances".into(), instances.to_string());
        config.insert("composed_instances".into(), composed.to_string());
        let manifest = RunManifest {
            format_version: MANIFEST_VERSION,
            command: "gradcheck".into(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: vec!["gradcheck.csv".into()],
        };
        write_manifest(out, &manifest)?;
        let header = String::from("check,instances,max_rel_err,status\n");
        std::fs::write(out.join("gradcheck.csv"), header + &report).map_err(Error::Io)?;
    }
    Ok(if all_pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// ablate

fn cmd_ablate(args: AblateArgs) -> CliResult<i32> {
    let resolver = Resolver::load(args.config.as_deref())?;
    let data = resolver.get_path("data", args.data)?;
    let out = resolver.get_path("out", args.out)?;
    let seeds_text = resolver.get("seeds", args.seeds, "1,2,3".to_string())?;
    let seeds: Vec<u64> = seeds_text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("bad seed {t:?} in --seeds")))
        })
        .collect::<CliResult<Vec<u64>>>()?;
    if seeds.is_empty() {
        return Err(usage("--seeds must name at least one seed"));
    }

    let resolved = resolve_train_config(
        &resolver,
        args.epochs,
        args.batch_size,
        args.lr_init,
        args.lr_min,
        args.alpha,
        args.beta,
        args.lambda,
        args.tau,
        None,
        None,
        args.layers,
        args.hidden,
        None,
        None,
        None,
        None,
        None,
        args.eval_every,
        None,
    )?;

    let mut config_map = resolved.config_map;
    config_map.insert("data".into(), data.display().to_string());
    config_map.insert("out".into(), out.display().to_string());
    config_map.insert("seeds".into(), seeds_text.clone());
    config_map.remove("ablation");
    config_map.remove("seed");
    config_map.remove("model_seed");

    let ablations = [
        Ablation::Full,
        Ablation::NoGib,
        Ablation::NoCi,
        Ablation::NoBoth,
    ];
    let cells: Vec<(Ablation, u64)> = ablations
        .iter()
        .flat_map(|a| seeds.iter().map(move |s| (*a, *s)))
        .collect();

    let manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        command: "ablate".into(),
        seed: seeds[0],
        config: config_map,
        inputs: input_hashes(&data)?,
        outputs: std::iter::once("summary.csv".to_string())
            .chain(
                cells
                    .iter()
                    .map(|(a, s)| format!("{}_seed{}_metrics.csv", a.name(), s)),
            )
            .collect(),
    };
    write_manifest(&out, &manifest)?;

    let bundle = load_bundle(&data)?;
    let base = resolved.config;

    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }

    use rayon::prelude::*;
    let results: Vec<crate::error::Result<(Ablation, u64, RunRecord)>> = cells
        .par_iter()
        .map(|(ablation, seed)| {
            let config = TrainConfig {
                ablation: *ablation,
                seed: *seed,
                checkpoint_path: None,
                ..base.clone()
            };
            let (_m, record) = trainer::train(&config, &bundle, *seed)?;
            Ok((*ablation, *seed, record))
        })
        .collect();

    let mut summary = String::from("ablation,seed,ood_test_mae\n");
    let mut by_ablation: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for r in results {
        let (ablation, seed, record) = r?;
        write_metrics_csv(
            &record,
            &out.join(format!("{}_seed{}_metrics.csv", ablation.name(), seed)),
        )?;
        let mae = record
            .selected_metrics
            .get("ood_test")
            .or_else(|| record.selected_metrics.get("id_test"))
            .map(|m| m.mae)
            .unwrap_or(f64::NAN);
        writeln!(summary, "{},{},{}", ablation.name(), seed, mae).expect("string write");
        by_ablation.entry(ablation.name()).or_default().push(mae);
    }
    for ablation in ablations {
        let maes = &by_ablation[ablation.name()];
        let n = maes.len() as f64;
        let mean = maes.iter().sum::<f64>() / n;
        let std = (maes.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n).sqrt();
        writeln!(summary, "{},summary,{mean}±{std}", ablation.name()).expect("string write");
    }
    std::fs::write(out.join("summary.csv"), &summary).map_err(Error::Io)?;
    println!("{summary}");
    Ok(0)
}
