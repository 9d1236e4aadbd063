//! Training orchestration: sensitive-estimator pretraining followed by
//! alternating optimization of the classifier (descending the full objective)
//! and the adversary (ascending the discrimination value), with fairness-gated
//! checkpoint selection and a final test-set report.
//!
//! Determinism: every random draw comes from a ChaCha stream derived from the
//! run seed, with one stream per concern (splitting, each model's
//! initialization, dropout), so ablations that skip a component leave the
//! remaining streams untouched.

use std::path::Path;
use std::rc::Rc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{EdgeStructure, Tape, Var};
use crate::data::normalize_features_masked;
use crate::error::{Error, Result};
use crate::graph::{partition_by_sensitive, split_nodes, BinaryAttr, Graph, Split};
use crate::losses::{
    adversary_losses, assemble_total, covariance_losses, loss_classification, loss_ifg,
    loss_sensitive, GroupLaplacians, LossBundle, LossComponents, LossFlags,
};
use crate::metrics::{
    build_report, group_metrics, individual_metrics, predictive_metrics, FairnessReport,
    ReportMetadata,
};
use crate::models::{
    adversary_forward, classifier_forward, complete_sensitive, normalized_adjacency,
    sensitive_forward, Adversary, ClassifierHyper, ClassifierModel, EstimatorHyper, ForwardMode,
    SensitiveEstimator,
};
use crate::optim::Adam;
use crate::similarity::{build_similarity, SimilarityMatrix, SimilarityMethod};
use crate::sparse::SparseMatrix;

// Independent ChaCha streams per concern.
const STREAM_SPLIT: u64 = 1;
const STREAM_CLASSIFIER_INIT: u64 = 2;
const STREAM_ESTIMATOR_INIT: u64 = 3;
const STREAM_ADVERSARY_INIT: u64 = 4;
const STREAM_DROPOUT: u64 = 5;

pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Full run configuration. Field names double as the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Coefficient of the within-group individual-fairness loss.
    pub alpha: f64,
    /// Coefficient of the adversarial loss.
    pub beta: f64,
    /// Coefficient of the covariance loss.
    pub eta: f64,
    /// Error bound in the within-group Lagrangian.
    pub gamma_bound: f64,
    /// Fixed multipliers, one per sensitive group (unprotected, protected).
    pub lambdas: Vec<f64>,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Number of observed sensitive labels.
    pub sensitive_budget: usize,
    /// Hard-assignment threshold for estimated sensitive attributes.
    pub threshold: f64,
    pub seed: u64,
    pub disable_ifg: bool,
    pub disable_eo_terms: bool,
    pub similarity_method: SimilarityMethod,
    pub similarity_k: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub dropout: f64,
    pub estimator_hidden_dim: usize,
    pub pretrain_epochs: usize,
    pub pretrain_learning_rate: f64,
    pub split_ratios: [f64; 3],
    /// Checkpoint gate: an epoch qualifies when validation ΔSP + ΔEO is below
    /// this many percentage points. Set very large to disable gating.
    pub fairness_gate: f64,
    /// Run the three classifier objectives as separate sequential steps
    /// instead of one combined step.
    pub sequential_updates: bool,
    /// Replace the classifier-side adversarial term with cross-entropy of the
    /// adversary output against 1/2.
    pub uniform_adversary_loss: bool,
    /// Optional ε for the report's individual-fairness bound audit.
    pub epsilon: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.8,
            eta: 6.0,
            gamma_bound: 0.004,
            lambdas: vec![0.5, 1.25],
            learning_rate: 0.001,
            weight_decay: 1e-5,
            epochs: 1000,
            sensitive_budget: 200,
            threshold: 0.5,
            seed: 0,
            disable_ifg: false,
            disable_eo_terms: false,
            similarity_method: SimilarityMethod::Cosine,
            similarity_k: 10,
            hidden_dim: 64,
            heads: 1,
            dropout: 0.5,
            estimator_hidden_dim: 64,
            pretrain_epochs: 300,
            pretrain_learning_rate: 0.01,
            split_ratios: [0.5, 0.25, 0.25],
            fairness_gate: 10.0,
            sequential_updates: false,
            uniform_adversary_loss: false,
            epsilon: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("gamma_bound", self.gamma_bound),
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be >= 0")));
            }
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.lambdas.len() != 2 {
            return Err(Error::Config(format!(
                "lambdas has {} entries, expected one per sensitive group (2)",
                self.lambdas.len()
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold {} must lie in (0, 1)",
                self.threshold
            )));
        }
        if self.similarity_k == 0 {
            return Err(Error::Config("similarity_k must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable hash of the resolved configuration (FNV-1a over canonical JSON).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Everything shared by the per-epoch steps, prepared once per run.
pub struct TrainContext {
    pub graph: Graph,
    pub edges: Rc<EdgeStructure>,
    pub norm_adj: Rc<SparseMatrix>,
    pub similarity: SimilarityMatrix,
    pub split: Split,
    pub train_nodes: Vec<usize>,
    pub estimator: SensitiveEstimator,
    pub s_hard: Vec<bool>,
    pub s_soft: Vec<f64>,
    pub group_laps: GroupLaplacians,
    pub l_sens: f64,
}

/// Mutable optimization state across epochs.
pub struct TrainState {
    pub classifier: ClassifierModel,
    pub adversary: Adversary,
    pub adam_classifier: Adam,
    pub adam_adversary: Adam,
    pub dropout_rng: ChaCha8Rng,
    pub epoch: usize,
    pub history: Vec<LossBundle>,
    best_gated: Option<BestEpoch>,
    best_overall: Option<BestEpoch>,
}

#[derive(Clone)]
struct BestEpoch {
    epoch: usize,
    classifier: ClassifierModel,
    adversary: Adversary,
    val_accuracy: f64,
    val_delta_sp: Option<f64>,
    val_delta_eo: Option<f64>,
}

/// Serialized model snapshot; round-trips bit-exactly through JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub classifier: ClassifierModel,
    pub estimator: SensitiveEstimator,
    pub adversary: Adversary,
    pub seed: u64,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub val_delta_sp: Option<f64>,
    pub val_delta_eo: Option<f64>,
    pub fairness_gate_missed: bool,
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let json = serde_json::to_string(checkpoint).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Per-epoch loss history with the documented column set.
pub fn write_history_csv(history: &[LossBundle], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,L_C,L_A1,L_A2,L_R1,L_R2,L_Ifg,L_total\n");
    for (epoch, b) in history.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            epoch, b.l_c, b.l_a1, b.l_a2, b.l_r1, b.l_r2, b.l_ifg, b.l_total
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Train the sensitive-attribute estimator on the observed sensitive labels
/// for a fixed epoch budget. Deterministic given the seed.
pub fn pretrain_sensitive(
    graph: &Graph,
    split: &Split,
    config: &TrainConfig,
) -> Result<(SensitiveEstimator, f64)> {
    let labeled = split.sensitive_labeled_nodes();
    if labeled.is_empty() {
        return Err(Error::Config(
            "sensitive-estimator pretraining requires a nonempty labeled set".into(),
        ));
    }
    let mut init_rng = seeded_stream(config.seed, STREAM_ESTIMATOR_INIT);
    let mut model = SensitiveEstimator::new(
        EstimatorHyper {
            in_dim: graph.feature_dim(),
            hidden_dim: config.estimator_hidden_dim,
        },
        &mut init_rng,
    );
    let shapes: Vec<(usize, usize)> = model.params().iter().map(|p| p.dim()).collect();
    let mut adam = Adam::new(
        config.pretrain_learning_rate,
        config.weight_decay,
        &shapes,
    );
    let norm_adj = Rc::new(normalized_adjacency(&graph.adjacency));
    let mut last = f64::NAN;
    for _ in 0..config.pretrain_epochs {
        let mut tape = Tape::new();
        let fwd = sensitive_forward(&model, graph, &norm_adj, &mut tape)?;
        let loss = loss_sensitive(&mut tape, fwd.s_prob, &graph.sensitive, &labeled)?;
        last = tape.scalar(loss);
        if !last.is_finite() {
            return Err(Error::Numeric(format!("L_Sens diverged to {last}")));
        }
        let grads = tape.backward(loss);
        let grad_values = fwd.grads(&grads, &model);
        adam.step(&mut model.params_mut(), &grad_values, false);
    }
    Ok((model, last))
}

/// Build the per-run context: split, normalization, similarity, estimator
/// pretraining, and sensitive-attribute completion.
pub fn prepare(graph: &Graph, config: &TrainConfig) -> Result<TrainContext> {
    config.validate()?;
    let split = split_nodes(
        graph,
        (
            config.split_ratios[0],
            config.split_ratios[1],
            config.split_ratios[2],
        ),
        config.sensitive_budget,
        // The split stream is derived but still a plain u64 seed for the
        // documented pure-function contract of split_nodes.
        config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ STREAM_SPLIT,
    )?;
    let train_nodes = split.train_nodes();
    let normalized = normalize_features_masked(&graph.features, &train_nodes)?;
    let graph = graph.clone().with_features(normalized)?;

    let similarity = match config.similarity_method {
        SimilarityMethod::Cosine => {
            build_similarity(&graph.features, SimilarityMethod::Cosine, config.similarity_k)?
        }
        SimilarityMethod::AdjacencyJaccard => {
            let dense = graph.adjacency.to_dense();
            build_similarity(&dense, SimilarityMethod::AdjacencyJaccard, config.similarity_k)?
        }
    };

    let (estimator, l_sens) = pretrain_sensitive(&graph, &split, config)?;
    let norm_adj = Rc::new(normalized_adjacency(&graph.adjacency));
    let mut tape = Tape::new();
    let fwd = sensitive_forward(&estimator, &graph, &norm_adj, &mut tape)?;
    let s_prob: Vec<f64> = tape.value(fwd.s_prob).column(0).to_vec();

    let observed: Vec<BinaryAttr> = (0..graph.n)
        .map(|i| {
            if split.sensitive_labeled_mask[i] {
                graph.sensitive[i]
            } else {
                None
            }
        })
        .collect();
    let (s_hard, s_soft) = complete_sensitive(&observed, &s_prob, config.threshold)?;

    let hard_attrs: Vec<BinaryAttr> = s_hard.iter().map(|&b| Some(b)).collect();
    let partition = partition_by_sensitive(&hard_attrs)?;
    let group_laps = GroupLaplacians::new(&similarity, &partition);

    let edges = Rc::new(EdgeStructure::from_adjacency_with_self_loops(
        &graph.adjacency,
    ));

    Ok(TrainContext {
        graph,
        edges,
        norm_adj,
        similarity,
        split,
        train_nodes,
        estimator,
        s_hard,
        s_soft,
        group_laps,
        l_sens,
    })
}

pub fn init_state(ctx: &TrainContext, config: &TrainConfig) -> Result<TrainState> {
    let mut cls_rng = seeded_stream(config.seed, STREAM_CLASSIFIER_INIT);
    let classifier = ClassifierModel::new(
        ClassifierHyper {
            in_dim: ctx.graph.feature_dim(),
            hidden_dim: config.hidden_dim,
            heads: config.heads,
            dropout: config.dropout,
        },
        &mut cls_rng,
    )?;
    let mut adv_rng = seeded_stream(config.seed, STREAM_ADVERSARY_INIT);
    let adversary = Adversary::new(config.hidden_dim, &mut adv_rng);
    let cls_shapes: Vec<(usize, usize)> = classifier.params().iter().map(|p| p.dim()).collect();
    let adv_shapes: Vec<(usize, usize)> = adversary.params().iter().map(|p| p.dim()).collect();
    Ok(TrainState {
        classifier,
        adversary,
        adam_classifier: Adam::new(config.learning_rate, config.weight_decay, &cls_shapes),
        adam_adversary: Adam::new(config.learning_rate, config.weight_decay, &adv_shapes),
        dropout_rng: seeded_stream(config.seed, STREAM_DROPOUT),
        epoch: 0,
        history: Vec::new(),
        best_gated: None,
        best_overall: None,
    })
}

/// Cross-entropy of the adversary output against the uniform 1/2 target, the
/// optional alternative classifier-side pressure.
fn uniform_confusion(tape: &mut Tape, a_prob: Var, rows: &[usize]) -> Var {
    let p = tape.gather_rows(a_prob, Rc::new(rows.to_vec()));
    let p = tape.clamp(p, crate::losses::PROB_CLIP, 1.0 - crate::losses::PROB_CLIP);
    let ln_p = tape.ln(p);
    let q = tape.one_minus(p);
    let ln_q = tape.ln(q);
    let sum = tape.add(ln_p, ln_q);
    let mean = tape.mean(sum);
    let half = tape.scale(mean, 0.5);
    tape.neg(half)
}

/// One training epoch: a classifier descent step on the combined objective
/// (or three sequential steps), then an adversary ascent step, then
/// bookkeeping. Appends the epoch's [`LossBundle`] to the history.
pub fn train_step(
    state: &mut TrainState,
    ctx: &TrainContext,
    config: &TrainConfig,
) -> Result<()> {
    let bundle = if config.sequential_updates {
        classifier_sequential_steps(state, ctx, config)?
    } else {
        classifier_combined_step(state, ctx, config)?
    };

    if config.beta > 0.0 {
        adversary_ascent_step(state, ctx, config)?;
    }

    if !bundle.l_total.is_finite() {
        return Err(Error::Numeric(format!(
            "L_total diverged to {} at epoch {}",
            bundle.l_total, state.epoch
        )));
    }
    state.history.push(bundle);

    // Validation pass for checkpoint selection (eval mode, deterministic).
    let (val_accuracy, val_sp, val_eo) = validation_metrics(state, ctx)?;
    let candidate = BestEpoch {
        epoch: state.epoch,
        classifier: state.classifier.clone(),
        adversary: state.adversary.clone(),
        val_accuracy,
        val_delta_sp: val_sp,
        val_delta_eo: val_eo,
    };
    let gate_ok = match (val_sp, val_eo) {
        (Some(sp), Some(eo)) => sp + eo < config.fairness_gate,
        _ => false,
    };
    if gate_ok
        && state
            .best_gated
            .as_ref()
            .is_none_or(|b| candidate.val_accuracy > b.val_accuracy)
    {
        state.best_gated = Some(candidate.clone());
    }
    if state
        .best_overall
        .as_ref()
        .is_none_or(|b| candidate.val_accuracy > b.val_accuracy)
    {
        state.best_overall = Some(candidate);
    }
    state.epoch += 1;
    Ok(())
}

struct EpochLosses {
    objective: Option<Var>,
    l_c: Var,
    l_a1: Var,
    l_a2: Var,
    l_r1: Var,
    l_r2: Var,
    l_ifg: Var,
    group_l_p: Vec<Var>,
    flags: LossFlags,
}

/// Build the full loss surface for the current parameters on one tape.
/// `with_objective` controls whether the classifier-facing combination is
/// assembled (terms with zero coefficients are skipped entirely so ablated
/// runs are bit-identical to never constructing the term).
fn epoch_losses(
    state: &mut TrainState,
    ctx: &TrainContext,
    config: &TrainConfig,
    tape: &mut Tape,
) -> Result<(EpochLosses, crate::models::ClassifierForward)> {
    let fwd = classifier_forward(
        &state.classifier,
        &ctx.graph,
        &ctx.edges,
        tape,
        ForwardMode::Train,
        Some(&mut state.dropout_rng),
    )?;
    let adv_fwd = adversary_forward(&state.adversary, fwd.embeddings, tape)?;

    let labels = &ctx.graph.labels;
    let l_c = loss_classification(tape, fwd.y_prob, labels, &ctx.train_nodes)?;
    let adv = adversary_losses(tape, adv_fwd.a_prob, &ctx.s_hard, labels, &ctx.train_nodes);
    let s_soft_leaf = tape.leaf(
        Array2::from_shape_vec((ctx.graph.n, 1), ctx.s_soft.clone()).expect("column"),
    );
    let cov = covariance_losses(tape, s_soft_leaf, fwd.y_prob, labels, &ctx.train_nodes)?;
    let ifg = loss_ifg(
        tape,
        fwd.y_prob,
        &ctx.group_laps,
        &config.lambdas,
        config.gamma_bound,
    )?;

    let mut objective = l_c;
    if config.beta > 0.0 {
        let adv_term = if config.uniform_adversary_loss {
            let overall = uniform_confusion(tape, adv_fwd.a_prob, &ctx.train_nodes);
            if config.disable_eo_terms {
                overall
            } else {
                let positives: Vec<usize> = ctx
                    .train_nodes
                    .iter()
                    .copied()
                    .filter(|&i| labels[i] == Some(true))
                    .collect();
                if positives.is_empty() {
                    overall
                } else {
                    let cond = uniform_confusion(tape, adv_fwd.a_prob, &positives);
                    tape.add(overall, cond)
                }
            }
        } else if config.disable_eo_terms {
            adv.l_a1
        } else {
            adv.l_a
        };
        let scaled = tape.scale(adv_term, config.beta);
        objective = tape.add(objective, scaled);
    }
    if config.eta > 0.0 {
        let cov_term = if config.disable_eo_terms {
            cov.l_r1
        } else {
            cov.l_cov
        };
        let scaled = tape.scale(cov_term, config.eta);
        objective = tape.add(objective, scaled);
    }
    if config.alpha > 0.0 && !config.disable_ifg {
        let scaled = tape.scale(ifg.l_ifg, config.alpha);
        objective = tape.add(objective, scaled);
    }

    let flags = LossFlags {
        empty_adversary_group: adv.empty_group,
        empty_adversary_positive_group: adv.empty_positive_group,
        empty_covariance_positive: cov.empty_positive,
    };
    Ok((
        EpochLosses {
            objective: Some(objective),
            l_c,
            l_a1: adv.l_a1,
            l_a2: adv.l_a2,
            l_r1: cov.l_r1,
            l_r2: cov.l_r2,
            l_ifg: ifg.l_ifg,
            group_l_p: ifg.group_l_p,
            flags,
        },
        fwd,
    ))
}

fn bundle_from(
    tape: &Tape,
    losses: &EpochLosses,
    ctx: &TrainContext,
    config: &TrainConfig,
) -> Result<LossBundle> {
    // With the EO ablation the conditioned terms are recorded as removed.
    let (l_a2, l_r2) = if config.disable_eo_terms {
        (0.0, 0.0)
    } else {
        (tape.scalar(losses.l_a2), tape.scalar(losses.l_r2))
    };
    let l_ifg = if config.disable_ifg {
        0.0
    } else {
        tape.scalar(losses.l_ifg)
    };
    let components = LossComponents {
        l_c: tape.scalar(losses.l_c),
        l_sens: ctx.l_sens,
        l_a1: tape.scalar(losses.l_a1),
        l_a2,
        l_r1: tape.scalar(losses.l_r1),
        l_r2,
        l_ifg,
        group_l_p: losses.group_l_p.iter().map(|&v| tape.scalar(v)).collect(),
        flags: losses.flags,
    };
    assemble_total(&components, config.alpha, config.beta, config.eta)
}

fn classifier_combined_step(
    state: &mut TrainState,
    ctx: &TrainContext,
    config: &TrainConfig,
) -> Result<LossBundle> {
    let mut tape = Tape::new();
    let (losses, fwd) = epoch_losses(state, ctx, config, &mut tape)?;
    let objective = losses.objective.expect("objective assembled");
    let grads = tape.backward(objective);
    let grad_values = fwd.grads(&grads, &state.classifier);
    state
        .adam_classifier
        .step(&mut state.classifier.params_mut(), &grad_values, false);
    bundle_from(&tape, &losses, ctx, config)
}

/// The published objective is the sum; this variant instead applies the three
/// classifier losses one after another, re-evaluating between steps.
fn classifier_sequential_steps(
    state: &mut TrainState,
    ctx: &TrainContext,
    config: &TrainConfig,
) -> Result<LossBundle> {
    // Record the bundle from the state at the start of the epoch.
    let mut tape = Tape::new();
    let (losses, fwd) = epoch_losses(state, ctx, config, &mut tape)?;
    let bundle = bundle_from(&tape, &losses, ctx, config)?;

    // Step 1: prediction loss, using the already-built forward.
    let grads = tape.backward(losses.l_c);
    let grad_values = fwd.grads(&grads, &state.classifier);
    state
        .adam_classifier
        .step(&mut state.classifier.params_mut(), &grad_values, false);

    // Step 2: group-fairness losses.
    if config.beta > 0.0 || config.eta > 0.0 {
        let mut tape = Tape::new();
        let (losses, fwd) = epoch_losses(state, ctx, config, &mut tape)?;
        let mut term: Option<Var> = None;
        if config.beta > 0.0 {
            let a = if config.disable_eo_terms {
                losses.l_a1
            } else {
                tape.add(losses.l_a1, losses.l_a2)
            };
            term = Some(tape.scale(a, config.beta));
        }
        if config.eta > 0.0 {
            let c = if config.disable_eo_terms {
                losses.l_r1
            } else {
                tape.add(losses.l_r1, losses.l_r2)
            };
            let scaled = tape.scale(c, config.eta);
            term = Some(match term {
                Some(t) => tape.add(t, scaled),
                None => scaled,
            });
        }
        if let Some(t) = term {
            let grads = tape.backward(t);
            let grad_values = fwd.grads(&grads, &state.classifier);
            state
                .adam_classifier
                .step(&mut state.classifier.params_mut(), &grad_values, false);
        }
    }

    // Step 3: within-group individual fairness.
    if config.alpha > 0.0 && !config.disable_ifg {
        let mut tape = Tape::new();
        let (losses, fwd) = epoch_losses(state, ctx, config, &mut tape)?;
        let scaled = tape.scale(losses.l_ifg, config.alpha);
        let grads = tape.backward(scaled);
        let grad_values = fwd.grads(&grads, &state.classifier);
        state
            .adam_classifier
            .step(&mut state.classifier.params_mut(), &grad_values, false);
    }

    Ok(bundle)
}

/// Adversary ascent on the discrimination value with the classifier frozen,
/// computed on a deterministic eval-mode forward of the current classifier.
fn adversary_ascent_step(
    state: &mut TrainState,
    ctx: &TrainContext,
    config: &TrainConfig,
) -> Result<()> {
    let mut tape = Tape::new();
    let fwd = classifier_forward(
        &state.classifier,
        &ctx.graph,
        &ctx.edges,
        &mut tape,
        ForwardMode::Eval,
        None,
    )?;
    let adv_fwd = adversary_forward(&state.adversary, fwd.embeddings, &mut tape)?;
    let adv = adversary_losses(
        &mut tape,
        adv_fwd.a_prob,
        &ctx.s_hard,
        &ctx.graph.labels,
        &ctx.train_nodes,
    );
    let target = if config.disable_eo_terms {
        adv.l_a1
    } else {
        adv.l_a
    };
    let grads = tape.backward(target);
    let grad_values = adv_fwd.grads(&grads, &state.adversary);
    state
        .adam_adversary
        .step(&mut state.adversary.params_mut(), &grad_values, true);
    Ok(())
}

/// Deterministic eval-mode probabilities and embeddings for given parameters.
pub fn eval_forward(
    classifier: &ClassifierModel,
    ctx: &TrainContext,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut tape = Tape::new();
    let fwd = classifier_forward(
        classifier,
        &ctx.graph,
        &ctx.edges,
        &mut tape,
        ForwardMode::Eval,
        None,
    )?;
    let h = tape.value(fwd.embeddings).clone();
    let y = tape.value(fwd.y_prob).column(0).to_vec();
    Ok((h, y))
}

fn validation_metrics(
    state: &TrainState,
    ctx: &TrainContext,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let (_, y_prob) = eval_forward(&state.classifier, ctx)?;
    let val_nodes = ctx.split.val_nodes();
    let pred = predictive_metrics(&y_prob, &ctx.graph.labels, &val_nodes)?;
    let y_hard: Vec<bool> = y_prob.iter().map(|&p| p >= 0.5).collect();
    let fair_nodes: Vec<usize> = val_nodes
        .iter()
        .copied()
        .filter(|&i| ctx.graph.sensitive[i].is_some())
        .collect();
    let (sp, eo) = if fair_nodes.is_empty() {
        (None, None)
    } else {
        let gm = group_metrics(&y_hard, &ctx.graph.labels, &ctx.graph.sensitive, &fair_nodes)?;
        (gm.delta_sp, gm.delta_eo)
    };
    Ok((pred.accuracy, sp, eo))
}

/// Outcome of a full training run.
pub struct FitOutput {
    pub checkpoint: Checkpoint,
    pub report: FairnessReport,
    pub history: Vec<LossBundle>,
    pub split: Split,
}

/// Run the full pipeline: prepare, pretrain, alternate for `epochs`, select
/// the gated-best checkpoint, and evaluate on the test mask with ground-truth
/// sensitive labels.
pub fn fit(graph: &Graph, config: &TrainConfig, dataset: &str) -> Result<FitOutput> {
    let ctx = prepare(graph, config)?;
    let mut state = init_state(&ctx, config)?;
    for _ in 0..config.epochs {
        train_step(&mut state, &ctx, config)?;
    }
    finish(state, &ctx, config, dataset)
}

/// Checkpoint selection and final evaluation, exposed separately so callers
/// driving `train_step` manually get the same report path.
pub fn finish(
    state: TrainState,
    ctx: &TrainContext,
    config: &TrainConfig,
    dataset: &str,
) -> Result<FitOutput> {
    let (best, gate_missed) = match (&state.best_gated, &state.best_overall) {
        (Some(g), _) => (g.clone(), false),
        (None, Some(o)) => (o.clone(), true),
        (None, None) => {
            return Err(Error::DegenerateInput(
                "no epochs were run; nothing to checkpoint".into(),
            ))
        }
    };

    let checkpoint = Checkpoint {
        classifier: best.classifier.clone(),
        estimator: ctx.estimator.clone(),
        adversary: best.adversary.clone(),
        seed: config.seed,
        best_epoch: best.epoch,
        val_accuracy: best.val_accuracy,
        val_delta_sp: best.val_delta_sp,
        val_delta_eo: best.val_delta_eo,
        fairness_gate_missed: gate_missed,
    };

    let report = evaluate(&best.classifier, ctx, config, dataset, gate_missed, Some(best.epoch))?;
    Ok(FitOutput {
        checkpoint,
        report,
        history: state.history,
        split: ctx.split.clone(),
    })
}

/// Test-mask evaluation of given classifier parameters under this context.
pub fn evaluate(
    classifier: &ClassifierModel,
    ctx: &TrainContext,
    config: &TrainConfig,
    dataset: &str,
    gate_missed: bool,
    best_epoch: Option<usize>,
) -> Result<FairnessReport> {
    let (_, y_prob) = eval_forward(classifier, ctx)?;
    let test_nodes = ctx.split.test_nodes();
    let pred = predictive_metrics(&y_prob, &ctx.graph.labels, &test_nodes)?;
    let y_hard: Vec<bool> = y_prob.iter().map(|&p| p >= 0.5).collect();
    let fair_nodes: Vec<usize> = test_nodes
        .iter()
        .copied()
        .filter(|&i| ctx.graph.sensitive[i].is_some())
        .collect();
    let group = group_metrics(&y_hard, &ctx.graph.labels, &ctx.graph.sensitive, &fair_nodes)?;
    // Individual metrics run over the whole graph with ground-truth sensitive
    // labels; estimator output fills any unobserved entries for the partition.
    let eval_sensitive: Vec<BinaryAttr> = (0..ctx.graph.n)
        .map(|i| ctx.graph.sensitive[i].or(Some(ctx.s_hard[i])))
        .collect();
    let partition = partition_by_sensitive(&eval_sensitive)?;
    let z = Array2::from_shape_vec((ctx.graph.n, 1), y_prob).expect("column");
    let individual = individual_metrics(&z, &ctx.similarity, &partition)?;

    // build_report checks predictive/group node counts match; group metrics
    // may legitimately cover fewer nodes when sensitive values are missing.
    let group_for_report = crate::metrics::GroupMetrics {
        delta_sp: group.delta_sp,
        delta_eo: group.delta_eo,
        n: pred.n,
    };
    let metadata = ReportMetadata {
        dataset: dataset.to_string(),
        seed: config.seed,
        config_hash: config.hash(),
        disable_ifg: config.disable_ifg,
        disable_eo_terms: config.disable_eo_terms,
        similarity_nnz: ctx.similarity.nnz(),
        node_count: ctx.graph.n,
        fairness_gate_missed: gate_missed,
        best_epoch,
    };
    build_report(
        &pred,
        &group_for_report,
        &individual,
        config.epsilon,
        ctx.similarity.nnz(),
        metadata,
    )
}
