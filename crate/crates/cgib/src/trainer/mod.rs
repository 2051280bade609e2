//! Seeded end-to-end training and evaluation.
//!
//! One `train` call owns its randomness: a single ChaCha stream seeded from
//! the config drives batch shuffling and the per-step mixing permutations,
//! so identical configs reproduce identical runs bit for bit.

mod adam;
mod checkpoint;

pub use adam::{cosine_lr, Adam};
pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, SplitBundle};
use crate::disentangle;
use crate::error::{Error, Result};
use crate::gnn::{self, GinConfig};
use crate::graph::{self, Graph};
use crate::losses::{self, LossParts, LossReport, LossWeights};
use crate::model::{ModelConfig, ModelState};
use crate::tensor::Tensor;

/// Which loss terms are removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Complete objective.
    Full,
    /// Drop the compression and confounding terms (alpha = beta = 0).
    NoGib,
    /// Drop the contrastive intervention term (lambda = 0).
    NoCi,
    /// Causal-head regression only (alpha = beta = lambda = 0).
    NoBoth,
}

impl Ablation {
    pub fn apply(&self, w: &LossWeights) -> LossWeights {
        let mut eff = w.clone();
        match self {
            Ablation::Full => {}
            Ablation::NoGib => {
                eff.alpha = 0.0;
                eff.beta = 0.0;
            }
            Ablation::NoCi => eff.lambda = 0.0,
            Ablation::NoBoth => {
                eff.alpha = 0.0;
                eff.beta = 0.0;
                eff.lambda = 0.0;
            }
        }
        eff
    }

    pub fn name(&self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoGib => "no_gib",
            Ablation::NoCi => "no_ci",
            Ablation::NoBoth => "no_both",
        }
    }
}

/// Prediction head used for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Causal,
    Confounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_init: f64,
    pub lr_min: f64,
    pub weights: LossWeights,
    pub seed: u64,
    pub ablation: Ablation,
    /// Evaluate every this many epochs; the final epoch always evaluates.
    pub eval_every: usize,
    /// Global gradient-norm ceiling applied before each Adam step; 0
    /// disables clipping. Sum aggregation makes early gradients violent
    /// enough to wedge the readout without it.
    pub grad_clip: f64,
    pub gin: GinConfig,
    pub checkpoint_path: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            lr_init: 1e-3,
            lr_min: 1e-8,
            weights: LossWeights::default(),
            seed: 0,
            ablation: Ablation::Full,
            eval_every: 10,
            grad_clip: 1.0,
            gin: GinConfig::default(),
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Contract("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Validation("batch_size must be >= 1".into()));
        }
        if self.eval_every < 1 {
            return Err(Error::Validation("eval_every must be >= 1".into()));
        }
        if self.lr_min > self.lr_init {
            return Err(Error::Validation("lr_min must be <= lr_init".into()));
        }
        if !(self.grad_clip >= 0.0) {
            return Err(Error::Validation("grad_clip must be >= 0".into()));
        }
        self.weights.validate()?;
        self.gin.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochEval {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Causal-head metrics per nonempty split.
    pub metrics: BTreeMap<String, EvalMetrics>,
}

/// Everything recorded during one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub model_init_seed: u64,
    /// Per-epoch loss components averaged over steps.
    pub epoch_reports: Vec<LossReport>,
    pub evals: Vec<EpochEval>,
    pub best_id_val_epoch: Option<usize>,
    pub best_ood_val_epoch: Option<usize>,
    /// ID metrics from the best id_val epoch; train and OOD metrics from the
    /// best ood_val epoch (falling back when a split is absent).
    pub selected_metrics: BTreeMap<String, EvalMetrics>,
    /// Confounding-head metrics of the returned model.
    pub confounding_metrics: BTreeMap<String, EvalMetrics>,
    /// Fraction of node-mask mass on true motif nodes, per eval split.
    pub mask_quality: BTreeMap<String, f64>,
    pub deviations: Vec<String>,
}

/// Shuffled batch index lists for one epoch. A trailing single graph joins
/// the previous batch so contrastive batches keep at least two graphs.
pub fn epoch_batches(rng: &mut ChaCha8Rng, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut out: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect();
    if out.len() >= 2 && out.last().map(Vec::len) == Some(1) {
        let single = out.pop().expect("checked non-empty");
        out.last_mut().expect("checked len >= 2").extend(single);
    }
    out
}

pub(crate) fn metrics_from(preds: &[f64], targets: &[f64]) -> EvalMetrics {
    let n = preds.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        let d = p - t;
        abs += d.abs();
        sq += d * d;
    }
    EvalMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    }
}

/// MAE and RMSE of the requested head over `graphs`.
pub fn evaluate(model: &ModelState, graphs: &[Graph], head: Head) -> Result<EvalMetrics> {
    if graphs.is_empty() {
        return Err(Error::Contract("evaluate on an empty split".into()));
    }
    let m = model.detached();
    let mut preds = Vec::with_capacity(graphs.len());
    let mut targets = Vec::with_capacity(graphs.len());
    for chunk in graphs.chunks(256) {
        let b = graph::batch(chunk)?;
        let p = match head {
            Head::Causal => m.forward_causal_head(&b)?.0,
            Head::Confounding => m.forward(&b)?.mu_s,
        };
        preds.extend_from_slice(p.data());
        targets.extend(chunk.iter().map(|g| g.target));
    }
    Ok(metrics_from(&preds, &targets))
}

/// Mean over graphs of (node-mask mass on motif nodes) / (total mass).
pub fn mask_quality(model: &ModelState, graphs: &[Graph]) -> Result<f64> {
    if graphs.is_empty() {
        return Err(Error::Contract("mask_quality on an empty split".into()));
    }
    let m = model.detached();
    let mut total = 0.0;
    for chunk in graphs.chunks(256) {
        let b = graph::batch(chunk)?;
        let emb = gnn::encode(&b, &m.config.gin, &m.encoder, None, None)?;
        let masks = disentangle::compute_masks(&emb, &b.edges, &m.masks)?;
        for (gi, g) in chunk.iter().enumerate() {
            let ids = datagen::motif_nodes(g)?;
            if ids.iter().any(|&i| i >= g.num_nodes) {
                return Err(Error::Contract(format!(
                    "motif node id out of range in graph of {} nodes",
                    g.num_nodes
                )));
            }
            let (lo, hi) = (b.node_offsets[gi], b.node_offsets[gi + 1]);
            let node_mask = &masks.node.data()[lo..hi];
            let all: f64 = node_mask.iter().sum();
            let motif: f64 = ids.iter().map(|&i| node_mask[i]).sum();
            total += motif / all;
        }
    }
    Ok(total / graphs.len() as f64)
}

fn check_finite(parts: &LossParts, epoch: usize, step: usize) -> Result<()> {
    let named: [(&str, Option<&Tensor>); 4] = [
        ("l_cp", Some(&parts.l_cp)),
        ("l_sp", parts.l_sp.as_ref()),
        ("l_reg", parts.mi.as_ref()),
        ("l_ci", parts.l_ci.as_ref()),
    ];
    for (name, t) in named {
        if let Some(t) = t {
            let v = t.item()?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{name} is {v} at epoch {} step {}",
                    epoch + 1,
                    step + 1
                )));
            }
        }
    }
    Ok(())
}

fn mean_report(reports: &[LossReport]) -> LossReport {
    let n = reports.len().max(1) as f64;
    LossReport {
        total: reports.iter().map(|r| r.total).sum::<f64>() / n,
        l_cp: reports.iter().map(|r| r.l_cp).sum::<f64>() / n,
        l_sp: reports.iter().map(|r| r.l_sp).sum::<f64>() / n,
        l_reg: reports.iter().map(|r| r.l_reg).sum::<f64>() / n,
        l_ci: reports.iter().map(|r| r.l_ci).sum::<f64>() / n,
    }
}

/// Train a model on the bundle's train split. Returns the selected model
/// (best ood_val MAE; best id_val when no OOD split exists; final otherwise)
/// and the full run record. Deterministic given (config, bundle,
/// model_init_seed).
pub fn train(
    config: &TrainConfig,
    bundle: &SplitBundle,
    model_init_seed: u64,
) -> Result<(ModelState, RunRecord)> {
    config.validate()?;
    if bundle.train.is_empty() {
        return Err(Error::Contract("train split is empty".into()));
    }
    let effective = config.ablation.apply(&config.weights);
    let feature_dim = bundle.train[0].feature_dim();
    let mut model = ModelState::init(
        ModelConfig {
            feature_dim,
            gin: config.gin.clone(),
        },
        model_init_seed,
    )?;
    let mut optimizer = Adam::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let needs_full = effective.alpha > 0.0 || effective.beta > 0.0 || effective.lambda > 0.0;

    let mut epoch_reports: Vec<LossReport> = Vec::with_capacity(config.epochs);
    let mut evals: Vec<EpochEval> = Vec::new();
    let mut best_id: Option<(f64, usize, ModelState)> = None;
    let mut best_ood: Option<(f64, usize, ModelState)> = None;

    for epoch in 0..config.epochs {
        let lr = cosine_lr(epoch, config.epochs, config.lr_init, config.lr_min);
        let batches = epoch_batches(&mut rng, bundle.train.len(), config.batch_size);
        let mut step_reports = Vec::with_capacity(batches.len());

        for (step, idxs) in batches.iter().enumerate() {
            let selected: Vec<Graph> = idxs.iter().map(|&i| bundle.train[i].clone()).collect();
            let b = graph::batch(&selected)?;
            let y = b.targets_tensor();

            let parts = if needs_full {
                let out = model.forward(&b)?;
                let l_sp = if effective.beta > 0.0 {
                    Some(losses::l_sp(&out.mu_s, &y)?)
                } else {
                    None
                };
                let mi = if effective.alpha > 0.0 {
                    Some(losses::mi_cg_proxy(&out.h_c)?)
                } else {
                    None
                };
                let l_ci = if effective.lambda > 0.0 {
                    if b.num_graphs < 2 {
                        return Err(Error::Contract(
                            "contrastive loss needs batches of at least two graphs".into(),
                        ));
                    }
                    let pairing = datagen::random_permutation(&mut rng, b.num_graphs);
                    let h_mix = losses::mix(&out.h_c, &out.h_s, &pairing)?;
                    Some(losses::l_ci_with(
                        &out.h_g,
                        &h_mix,
                        effective.tau,
                        effective.infonce_standard,
                    )?)
                } else {
                    None
                };
                LossParts {
                    l_cp: losses::l_cp(&out.mu_c, &y)?,
                    l_sp,
                    mi,
                    l_ci,
                }
            } else {
                let (mu_c, _) = model.forward_causal_head(&b)?;
                LossParts {
                    l_cp: losses::l_cp(&mu_c, &y)?,
                    l_sp: None,
                    mi: None,
                    l_ci: None,
                }
            };
            check_finite(&parts, epoch, step)?;
            let (total, report) = losses::compose_total(&parts, &effective)?;

            let mut grads = {
                let named = model.named();
                let refs: Vec<&Tensor> = named.iter().map(|(_, t)| *t).collect();
                total.backward(&refs)?
            };
            if config.grad_clip > 0.0 {
                let norm = grads.global_norm();
                if norm > config.grad_clip {
                    grads = grads.scaled(config.grad_clip / norm);
                }
            }
            model = optimizer.step(&model, &grads, lr)?;
            step_reports.push(report);
        }
        epoch_reports.push(mean_report(&step_reports));

        if (epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs {
            let mut metrics = BTreeMap::new();
            for (name, graphs) in bundle.splits() {
                if !graphs.is_empty() {
                    metrics.insert(name.to_string(), evaluate(&model, graphs, Head::Causal)?);
                }
            }
            if let Some(m) = metrics.get("id_val") {
                if best_id.as_ref().map_or(true, |(mae, _, _)| m.mae < *mae) {
                    best_id = Some((m.mae, epoch + 1, model.clone()));
                }
            }
            if let Some(m) = metrics.get("ood_val") {
                if best_ood.as_ref().map_or(true, |(mae, _, _)| m.mae < *mae) {
                    best_ood = Some((m.mae, epoch + 1, model.clone()));
                }
            }
            evals.push(EpochEval {
                epoch: epoch + 1,
                metrics,
            });
        }
    }

    let best_id_val_epoch = best_id.as_ref().map(|(_, e, _)| *e);
    let best_ood_val_epoch = best_ood.as_ref().map(|(_, e, _)| *e);
    let returned = match (&best_ood, &best_id) {
        (Some((_, _, m)), _) => m.clone(),
        (None, Some((_, _, m))) => m.clone(),
        (None, None) => model.clone(),
    };

    let metrics_at = |epoch: Option<usize>| -> Option<&BTreeMap<String, EvalMetrics>> {
        epoch
            .and_then(|ep| evals.iter().find(|e| e.epoch == ep))
            .map(|e| &e.metrics)
    };
    let last_metrics = evals.last().map(|e| &e.metrics);
    let id_source = metrics_at(best_id_val_epoch).or(last_metrics);
    let ood_source = metrics_at(best_ood_val_epoch).or(id_source);
    let mut selected_metrics = BTreeMap::new();
    for (split, source) in [
        ("id_val", id_source),
        ("id_test", id_source),
        ("train", ood_source),
        ("ood_val", ood_source),
        ("ood_test", ood_source),
    ] {
        if let Some(m) = source.and_then(|s| s.get(split)) {
            selected_metrics.insert(split.to_string(), *m);
        }
    }

    let mut confounding_metrics = BTreeMap::new();
    for (name, graphs) in bundle.splits() {
        if !graphs.is_empty() {
            confounding_metrics.insert(
                name.to_string(),
                evaluate(&returned, graphs, Head::Confounding)?,
            );
        }
    }

    let mut quality = BTreeMap::new();
    for name in ["id_test", "ood_test"] {
        let graphs = match name {
            "id_test" => &bundle.id_test,
            _ => &bundle.ood_test,
        };
        if !graphs.is_empty() && graphs.iter().all(|g| g.meta.contains_key("motif_nodes")) {
            quality.insert(name.to_string(), mask_quality(&returned, graphs)?);
        }
    }

    let mut deviations = Vec::new();
    if config.ablation == Ablation::NoBoth {
        deviations.push(
            "no_both trains the causal readout with squared error rather than an l1 loss".to_string(),
        );
    }

    if let Some(path) = &config.checkpoint_path {
        save_checkpoint(&returned, path)?;
    }

    let record = RunRecord {
        config: config.clone(),
        model_init_seed,
        epoch_reports,
        evals,
        best_id_val_epoch,
        best_ood_val_epoch,
        selected_metrics,
        confounding_metrics,
        mask_quality: quality,
        deviations,
    };
    Ok((returned, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, Shift, SynthSpec};

    fn tiny_bundle(seed: u64) -> SplitBundle {
        generate(&SynthSpec {
            num_train: 60,
            num_id_val: 20,
            num_id_test: 20,
            num_ood_val: 20,
            num_ood_test: 20,
            shift: Shift::Concept,
            seed,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            epochs: 4,
            batch_size: 16,
            eval_every: 2,
            gin: GinConfig {
                num_layers: 2,
                hidden_dim: 8,
                epsilon: 0.0,
                pooling: gnn::Pooling::Mean,
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_is_a_contract_error() {
        let config = TrainConfig {
            epochs: 0,
            ..tiny_config()
        };
        let bundle = tiny_bundle(1);
        assert!(matches!(
            train(&config, &bundle, 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn metrics_examples() {
        let m = metrics_from(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!((m.mae, m.rmse), (0.0, 0.0));

        // Constant mean predictor on targets [0, 2].
        let m = metrics_from(&[1.0, 1.0], &[0.0, 2.0]);
        assert_eq!((m.mae, m.rmse), (1.0, 1.0));

        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let t: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let m = metrics_from(&p, &t);
            assert!(m.rmse >= m.mae - 1e-15, "power-mean inequality");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let bundle = tiny_bundle(2);
        let config = tiny_config();
        let (m1, r1) = train(&config, &bundle, 7).unwrap();
        let (m2, r2) = train(&config, &bundle, 7).unwrap();
        for ((_, a), (_, b)) in m1.named().iter().zip(m2.named().iter()) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }

    #[test]
    fn no_both_total_equals_causal_prediction_loss_every_epoch() {
        let bundle = tiny_bundle(3);
        let config = TrainConfig {
            ablation: Ablation::NoBoth,
            epochs: 3,
            ..tiny_config()
        };
        let (_, record) = train(&config, &bundle, 5).unwrap();
        for r in &record.epoch_reports {
            assert!((r.total - r.l_cp).abs() < 1e-12);
            assert_eq!(r.l_sp, 0.0);
            assert_eq!(r.l_reg, 0.0);
            assert_eq!(r.l_ci, 0.0);
        }
        assert!(!record.deviations.is_empty());
    }

    #[test]
    fn losses_decrease_on_a_small_run() {
        let bundle = tiny_bundle(4);
        let config = TrainConfig {
            epochs: 30,
            ..tiny_config()
        };
        let (model, record) = train(&config, &bundle, 3).unwrap();
        let first = record.epoch_reports.first().unwrap().l_cp;
        let last = record.epoch_reports.last().unwrap().l_cp;
        assert!(
            last < first,
            "causal loss should drop: {first} -> {last}"
        );
        let m = evaluate(&model, &bundle.id_test, Head::Causal).unwrap();
        assert!(m.mae.is_finite() && m.rmse >= m.mae);
    }

    #[test]
    fn mask_quality_of_neutral_masks_is_the_motif_fraction() {
        let bundle = tiny_bundle(5);
        // Zero-headed mask MLPs straight out of init: every mask is 0.5, so
        // the score reduces to mean(motif_size / n).
        let model = ModelState::init(
            ModelConfig {
                feature_dim: 4,
                gin: tiny_config().gin,
            },
            9,
        )
        .unwrap();
        let got = mask_quality(&model, &bundle.id_test).unwrap();
        let want: f64 = bundle
            .id_test
            .iter()
            .map(|g| 5.0 / g.num_nodes as f64)
            .sum::<f64>()
            / bundle.id_test.len() as f64;
        assert!((got - want).abs() < 1e-12);
        assert!((0.1..=0.9).contains(&got));
    }

    #[test]
    fn mask_quality_requires_motif_annotations() {
        let bundle = tiny_bundle(6);
        let model = ModelState::init(
            ModelConfig {
                feature_dim: 4,
                gin: tiny_config().gin,
            },
            9,
        )
        .unwrap();
        let mut stripped = bundle.id_test.clone();
        for g in &mut stripped {
            g.meta.remove("motif_nodes");
        }
        assert!(matches!(
            mask_quality(&model, &stripped),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip_preserves_evaluation() {
        let bundle = tiny_bundle(7);
        let config = tiny_config();
        let (model, _) = train(&config, &bundle, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let a = evaluate(&model, &bundle.id_test, Head::Causal).unwrap();
        let b = evaluate(&loaded, &bundle.id_test, Head::Causal).unwrap();
        assert!(a.mae.to_bits() == b.mae.to_bits() && a.rmse.to_bits() == b.rmse.to_bits());
    }

    #[test]
    fn trailing_singleton_batches_are_merged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batches = epoch_batches(&mut rng, 65, 16);
        assert_eq!(batches.len(), 4);
        assert_eq!(batches.iter().map(Vec::len).sum::<usize>(), 65);
        assert!(batches.iter().all(|b| b.len() >= 2));

        let single = epoch_batches(&mut rng, 1, 16);
        assert_eq!(single, vec![vec![0]]);
    }
}
