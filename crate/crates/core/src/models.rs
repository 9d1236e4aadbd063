//! The three parametric functions of the training loop: an attention-based
//! message-passing classifier, a convolutional message-passing estimator for
//! the sensitive attribute, and an affine adversary that reads the classifier
//! embeddings.
//!
//! Forwards are expressed on an autograd [`Tape`] so both players can take
//! analytic gradient steps; eval-mode forwards are deterministic and free of
//! side effects.

use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{EdgeStructure, Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{BinaryAttr, Graph};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHyper {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub dropout: f64,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        Self {
            in_dim: 0,
            hidden_dim: 64,
            heads: 1,
            dropout: 0.5,
        }
    }
}

/// One attention-based message-passing layer followed by an affine sigmoid
/// scoring head. The hidden width is split evenly across heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub hyper: ClassifierHyper,
    /// in_dim × hidden_dim feature transform (all heads concatenated).
    pub weight: Array2<f64>,
    /// head_dim × heads attention coefficients for the destination node.
    pub att_dst: Array2<f64>,
    /// head_dim × heads attention coefficients for the source node.
    pub att_src: Array2<f64>,
    /// 1 × hidden_dim layer bias.
    pub bias: Array2<f64>,
    /// hidden_dim × 1 scoring head.
    pub head_weight: Array2<f64>,
    /// 1 × 1 scoring bias.
    pub head_bias: Array2<f64>,
}

const LEAKY_SLOPE: f64 = 0.2;

impl ClassifierModel {
    pub fn new(hyper: ClassifierHyper, rng: &mut ChaCha8Rng) -> Result<Self> {
        if hyper.heads == 0 || hyper.hidden_dim % hyper.heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} must be a positive multiple of heads {}",
                hyper.hidden_dim, hyper.heads
            )));
        }
        if !(0.0..1.0).contains(&hyper.dropout) {
            return Err(Error::Config(format!(
                "dropout {} must lie in [0, 1)",
                hyper.dropout
            )));
        }
        let head_dim = hyper.hidden_dim / hyper.heads;
        Ok(Self {
            weight: glorot(hyper.in_dim, hyper.hidden_dim, rng),
            att_dst: glorot(head_dim, hyper.heads, rng),
            att_src: glorot(head_dim, hyper.heads, rng),
            bias: Array2::zeros((1, hyper.hidden_dim)),
            head_weight: glorot(hyper.hidden_dim, 1, rng),
            head_bias: Array2::zeros((1, 1)),
            hyper,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        vec![
            &self.weight,
            &self.att_dst,
            &self.att_src,
            &self.bias,
            &self.head_weight,
            &self.head_bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.weight,
            &mut self.att_dst,
            &mut self.att_src,
            &mut self.bias,
            &mut self.head_weight,
            &mut self.head_bias,
        ]
    }
}

/// Tape handles for the classifier parameters plus the forward outputs.
pub struct ClassifierForward {
    pub params: Vec<Var>,
    /// n × hidden_dim embeddings (post-activation, pre-dropout).
    pub embeddings: Var,
    /// n × 1 predicted probability of the positive class.
    pub y_prob: Var,
}

impl ClassifierForward {
    pub fn grads(&self, grads: &Gradients, model: &ClassifierModel) -> Vec<Array2<f64>> {
        self.params
            .iter()
            .zip(model.params())
            .map(|(&v, p)| grads.get_or_zeros(v, p.dim()))
            .collect()
    }
}

/// Attention-layer forward pass. `edges` must come from
/// [`EdgeStructure::from_adjacency_with_self_loops`] on the graph adjacency.
pub fn classifier_forward(
    model: &ClassifierModel,
    graph: &Graph,
    edges: &Rc<EdgeStructure>,
    tape: &mut Tape,
    mode: ForwardMode,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<ClassifierForward> {
    if graph.feature_dim() != model.hyper.in_dim {
        return Err(Error::Shape(format!(
            "graph feature dim {} != model in_dim {}",
            graph.feature_dim(),
            model.hyper.in_dim
        )));
    }
    let heads = model.hyper.heads;
    let head_dim = model.hyper.hidden_dim / heads;

    let w = tape.leaf(model.weight.clone());
    let att_dst = tape.leaf(model.att_dst.clone());
    let att_src = tape.leaf(model.att_src.clone());
    let bias = tape.leaf(model.bias.clone());
    let head_w = tape.leaf(model.head_weight.clone());
    let head_b = tape.leaf(model.head_bias.clone());
    let params = vec![w, att_dst, att_src, bias, head_w, head_b];

    let mut rng = dropout_rng;
    let mut x = tape.leaf(graph.features.clone());
    if mode == ForwardMode::Train && model.hyper.dropout > 0.0 {
        let rng = rng
            .as_deref_mut()
            .ok_or_else(|| Error::Config("train-mode forward requires a dropout rng".into()))?;
        let mask = dropout_mask(graph.features.dim(), model.hyper.dropout, rng);
        x = tape.mul_mask(x, Rc::new(mask));
    }

    let h1 = tape.matmul(x, w);

    let src_idx = Rc::new(edges.src.clone());
    let dst_idx = Rc::new(edges.dst.clone());
    let mut per_head = Vec::with_capacity(heads);
    for k in 0..heads {
        let h1_k = if heads == 1 {
            h1
        } else {
            tape.slice_cols(h1, k * head_dim, (k + 1) * head_dim)
        };
        let a_dst_k = tape.slice_cols(att_dst, k, k + 1);
        let a_src_k = tape.slice_cols(att_src, k, k + 1);
        let score_dst = tape.matmul(h1_k, a_dst_k);
        let score_src = tape.matmul(h1_k, a_src_k);
        let e_dst = tape.gather_rows(score_dst, dst_idx.clone());
        let e_src = tape.gather_rows(score_src, src_idx.clone());
        let e_sum = tape.add(e_dst, e_src);
        let e = tape.leaky_relu(e_sum, LEAKY_SLOPE);
        let alpha = tape.segment_softmax(e, edges.clone());
        per_head.push(tape.edge_aggregate(alpha, h1_k, edges.clone()));
    }
    let aggregated = if heads == 1 {
        per_head[0]
    } else {
        tape.concat_cols(&per_head)
    };
    // Residual connection: the transformed node features bypass the softmax
    // so per-node signal survives neighborhood averaging.
    let with_residual = tape.add(aggregated, h1);
    let with_bias = tape.add(with_residual, bias);
    let embeddings = tape.elu(with_bias);

    let mut head_in = embeddings;
    if mode == ForwardMode::Train && model.hyper.dropout > 0.0 {
        let rng = rng
            .as_deref_mut()
            .ok_or_else(|| Error::Config("train-mode forward requires a dropout rng".into()))?;
        let mask = dropout_mask(
            (graph.n, model.hyper.hidden_dim),
            model.hyper.dropout,
            rng,
        );
        head_in = tape.mul_mask(head_in, Rc::new(mask));
    }
    let logits_raw = tape.matmul(head_in, head_w);
    let logits = tape.add(logits_raw, head_b);
    let y_prob = tape.sigmoid(logits);

    Ok(ClassifierForward {
        params,
        embeddings,
        y_prob,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorHyper {
    pub in_dim: usize,
    pub hidden_dim: usize,
}

impl Default for EstimatorHyper {
    fn default() -> Self {
        Self {
            in_dim: 0,
            hidden_dim: 64,
        }
    }
}

/// One convolutional message-passing layer plus an affine sigmoid head,
/// predicting the sensitive attribute for every node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitiveEstimator {
    pub hyper: EstimatorHyper,
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
    pub head_weight: Array2<f64>,
    pub head_bias: Array2<f64>,
}

impl SensitiveEstimator {
    pub fn new(hyper: EstimatorHyper, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: glorot(hyper.in_dim, hyper.hidden_dim, rng),
            bias: Array2::zeros((1, hyper.hidden_dim)),
            head_weight: glorot(hyper.hidden_dim, 1, rng),
            head_bias: Array2::zeros((1, 1)),
            hyper,
        }
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        vec![&self.weight, &self.bias, &self.head_weight, &self.head_bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.weight,
            &mut self.bias,
            &mut self.head_weight,
            &mut self.head_bias,
        ]
    }
}

pub struct EstimatorForward {
    pub params: Vec<Var>,
    /// n × 1 predicted probability that s = 1.
    pub s_prob: Var,
}

impl EstimatorForward {
    pub fn grads(&self, grads: &Gradients, model: &SensitiveEstimator) -> Vec<Array2<f64>> {
        self.params
            .iter()
            .zip(model.params())
            .map(|(&v, p)| grads.get_or_zeros(v, p.dim()))
            .collect()
    }
}

/// Symmetric-normalized adjacency with self-loops for convolutional message
/// passing: `D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn normalized_adjacency(adj: &SparseMatrix) -> SparseMatrix {
    let n = adj.n();
    let mut degree: Vec<f64> = adj.row_sums();
    for d in degree.iter_mut() {
        *d += 1.0; // self-loop
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(adj.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
    }
    for (i, j, v) in adj.iter() {
        triplets.push((i, j, v * inv_sqrt[i] * inv_sqrt[j]));
    }
    SparseMatrix::from_triplets(n, &triplets).expect("normalized adjacency is valid")
}

pub fn sensitive_forward(
    model: &SensitiveEstimator,
    graph: &Graph,
    norm_adj: &Rc<SparseMatrix>,
    tape: &mut Tape,
) -> Result<EstimatorForward> {
    if graph.feature_dim() != model.hyper.in_dim {
        return Err(Error::Shape(format!(
            "graph feature dim {} != estimator in_dim {}",
            graph.feature_dim(),
            model.hyper.in_dim
        )));
    }
    let w = tape.leaf(model.weight.clone());
    let b = tape.leaf(model.bias.clone());
    let head_w = tape.leaf(model.head_weight.clone());
    let head_b = tape.leaf(model.head_bias.clone());
    let params = vec![w, b, head_w, head_b];

    let x = tape.leaf(graph.features.clone());
    let xw = tape.matmul(x, w);
    let propagated = tape.spmm(norm_adj.clone(), xw);
    let pre = tape.add(propagated, b);
    let hidden = tape.relu(pre);
    let logits_raw = tape.matmul(hidden, head_w);
    let logits = tape.add(logits_raw, head_b);
    let s_prob = tape.sigmoid(logits);
    Ok(EstimatorForward { params, s_prob })
}

/// Single affine map from embedding space to a sigmoid probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adversary {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl Adversary {
    pub fn new(in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: glorot(in_dim, 1, rng),
            bias: Array2::zeros((1, 1)),
        }
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub struct AdversaryForward {
    pub params: Vec<Var>,
    /// n × 1 predicted probability that the node is in the protected group.
    pub a_prob: Var,
}

impl AdversaryForward {
    pub fn grads(&self, grads: &Gradients, model: &Adversary) -> Vec<Array2<f64>> {
        self.params
            .iter()
            .zip(model.params())
            .map(|(&v, p)| grads.get_or_zeros(v, p.dim()))
            .collect()
    }
}

/// `a_prob = sigmoid(H·w + b)` on embeddings already present on the tape.
pub fn adversary_forward(
    model: &Adversary,
    embeddings: Var,
    tape: &mut Tape,
) -> Result<AdversaryForward> {
    if tape.value(embeddings).ncols() != model.weight.nrows() {
        return Err(Error::Shape(format!(
            "embedding width {} != adversary in_dim {}",
            tape.value(embeddings).ncols(),
            model.weight.nrows()
        )));
    }
    let w = tape.leaf(model.weight.clone());
    let b = tape.leaf(model.bias.clone());
    let params = vec![w, b];
    let logits_raw = tape.matmul(embeddings, w);
    let logits = tape.add(logits_raw, b);
    let a_prob = tape.sigmoid(logits);
    Ok(AdversaryForward { params, a_prob })
}

/// Fill unobserved sensitive attributes from estimator probabilities.
///
/// Observed entries override the estimator in both outputs; elsewhere the hard
/// value thresholds at `threshold` (>= maps to 1) and the soft value keeps the
/// probability.
pub fn complete_sensitive(
    observed: &[BinaryAttr],
    s_prob: &[f64],
    threshold: f64,
) -> Result<(Vec<bool>, Vec<f64>)> {
    if observed.len() != s_prob.len() {
        return Err(Error::Shape(format!(
            "observed length {} != probability length {}",
            observed.len(),
            s_prob.len()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold {threshold} must lie in (0, 1)"
        )));
    }
    let mut hard = Vec::with_capacity(observed.len());
    let mut soft = Vec::with_capacity(observed.len());
    for (o, &p) in observed.iter().zip(s_prob.iter()) {
        match o {
            Some(v) => {
                hard.push(*v);
                soft.push(if *v { 1.0 } else { 0.0 });
            }
            None => {
                hard.push(p >= threshold);
                soft.push(p);
            }
        }
    }
    Ok((hard, soft))
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 * limit - limit)
}

fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 - rate;
    Array2::from_shape_fn(shape, |_| {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::SeedableRng;

    fn toy_graph(n: usize, d: usize, edges: &[(usize, usize)]) -> Graph {
        let features = Array2::from_shape_fn((n, d), |(i, j)| ((i * 3 + j) % 7) as f64 * 0.3 - 1.0);
        build_graph(features, edges, None, None).unwrap()
    }

    fn forward_eval(model: &ClassifierModel, graph: &Graph) -> (Array2<f64>, Array2<f64>) {
        let edges = Rc::new(EdgeStructure::from_adjacency_with_self_loops(&graph.adjacency));
        let mut tape = Tape::new();
        let fwd = classifier_forward(model, graph, &edges, &mut tape, ForwardMode::Eval, None)
            .unwrap();
        (
            tape.value(fwd.embeddings).clone(),
            tape.value(fwd.y_prob).clone(),
        )
    }

    #[test]
    fn classifier_shapes_and_range() {
        let g = toy_graph(5, 3, &[(0, 1), (1, 2), (3, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = ClassifierModel::new(
            ClassifierHyper {
                in_dim: 3,
                hidden_dim: 8,
                heads: 2,
                dropout: 0.5,
            },
            &mut rng,
        )
        .unwrap();
        let (h, y) = forward_eval(&model, &g);
        assert_eq!(h.dim(), (5, 8));
        assert_eq!(y.dim(), (5, 1));
        assert!(y.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn classifier_eval_deterministic() {
        let g = toy_graph(6, 4, &[(0, 1), (2, 3), (4, 5), (1, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = ClassifierModel::new(
            ClassifierHyper {
                in_dim: 4,
                hidden_dim: 6,
                heads: 1,
                dropout: 0.5,
            },
            &mut rng,
        )
        .unwrap();
        let (h1, y1) = forward_eval(&model, &g);
        let (h2, y2) = forward_eval(&model, &g);
        assert_eq!(h1, h2);
        assert_eq!(y1, y2);
    }

    #[test]
    fn zero_head_gives_half_probability() {
        let g = toy_graph(4, 2, &[(0, 1), (2, 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = ClassifierModel::new(
            ClassifierHyper {
                in_dim: 2,
                hidden_dim: 4,
                heads: 1,
                dropout: 0.0,
            },
            &mut rng,
        )
        .unwrap();
        model.head_weight.fill(0.0);
        model.head_bias.fill(0.0);
        let (_, y) = forward_eval(&model, &g);
        for &p in y.iter() {
            assert_relative_eq!(p, 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn parameter_count_is_function_of_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m1 = ClassifierModel::new(
            ClassifierHyper {
                in_dim: 7,
                hidden_dim: 12,
                heads: 3,
                dropout: 0.1,
            },
            &mut rng,
        )
        .unwrap();
        let m2 = ClassifierModel::new(
            ClassifierHyper {
                in_dim: 7,
                hidden_dim: 12,
                heads: 3,
                dropout: 0.4,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(m1.param_count(), m2.param_count());
        // in*hid + 2*(hid/heads)*heads + hid + hid + 1
        assert_eq!(m1.param_count(), 7 * 12 + 2 * 12 + 12 + 12 + 1);
    }

    #[test]
    fn estimator_zero_head_gives_half() {
        let g = toy_graph(10, 3, &[(0, 1), (1, 2), (8, 9)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = SensitiveEstimator::new(
            EstimatorHyper {
                in_dim: 3,
                hidden_dim: 5,
            },
            &mut rng,
        );
        model.head_weight.fill(0.0);
        model.head_bias.fill(0.0);
        let norm_adj = Rc::new(normalized_adjacency(&g.adjacency));
        let mut tape = Tape::new();
        let fwd = sensitive_forward(&model, &g, &norm_adj, &mut tape).unwrap();
        let s = tape.value(fwd.s_prob);
        assert_eq!(s.dim(), (10, 1));
        for &p in s.iter() {
            assert_relative_eq!(p, 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn adversary_matches_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let adv = Adversary::new(3, &mut rng);
        let h = array![[0.2, -0.4, 1.0], [0.0, 0.0, 0.0], [-1.5, 2.0, 0.3]];
        let mut tape = Tape::new();
        let hv = tape.leaf(h.clone());
        let fwd = adversary_forward(&adv, hv, &mut tape).unwrap();
        let probs = tape.value(fwd.a_prob);
        for i in 0..3 {
            let mut z = adv.bias[[0, 0]];
            for c in 0..3 {
                z += adv.weight[[c, 0]] * h[[i, c]];
            }
            let expected = 1.0 / (1.0 + (-z).exp());
            assert_relative_eq!(probs[[i, 0]], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn adversary_zero_params_give_half_and_single_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut adv = Adversary::new(2, &mut rng);
        adv.weight.fill(0.0);
        let h = array![[3.0, -2.0]];
        let mut tape = Tape::new();
        let hv = tape.leaf(h);
        let fwd = adversary_forward(&adv, hv, &mut tape).unwrap();
        let probs = tape.value(fwd.a_prob);
        assert_eq!(probs.dim(), (1, 1));
        assert_relative_eq!(probs[[0, 0]], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn adversary_shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let adv = Adversary::new(5, &mut rng);
        let mut tape = Tape::new();
        let hv = tape.leaf(Array2::zeros((2, 3)));
        assert!(adversary_forward(&adv, hv, &mut tape).is_err());
    }

    #[test]
    fn complete_sensitive_definition() {
        let (hard, soft) =
            complete_sensitive(&[Some(true), None], &[0.1, 0.8], 0.5).unwrap();
        assert_eq!(hard, vec![true, true]);
        assert_eq!(soft, vec![1.0, 0.8]);
    }

    #[test]
    fn complete_sensitive_observed_overrides() {
        let observed = vec![Some(false), Some(true), Some(false)];
        let (hard, soft) = complete_sensitive(&observed, &[0.99, 0.01, 0.7], 0.5).unwrap();
        assert_eq!(hard, vec![false, true, false]);
        assert_eq!(soft, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn complete_sensitive_boundary_is_one() {
        let (hard, _) = complete_sensitive(&[None], &[0.5], 0.5).unwrap();
        assert_eq!(hard, vec![true]);
    }

    #[test]
    fn permutation_equivariance() {
        let n = 7;
        let edges = [(0usize, 1usize), (1, 2), (2, 3), (3, 4), (5, 6), (0, 6)];
        let g = toy_graph(n, 3, &edges);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = ClassifierModel::new(
            ClassifierHyper {
                in_dim: 3,
                hidden_dim: 4,
                heads: 1,
                dropout: 0.0,
            },
            &mut rng,
        )
        .unwrap();
        let (h, y) = forward_eval(&model, &g);

        // Permute nodes: perm[i] is the new index of old node i.
        let perm: Vec<usize> = vec![3, 0, 5, 1, 6, 2, 4];
        let mut features_p = Array2::zeros((n, 3));
        for i in 0..n {
            for c in 0..3 {
                features_p[[perm[i], c]] = g.features[[i, c]];
            }
        }
        let edges_p: Vec<(usize, usize)> =
            edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let gp = build_graph(features_p, &edges_p, None, None).unwrap();
        let (hp, yp) = forward_eval(&model, &gp);
        for i in 0..n {
            assert_relative_eq!(yp[[perm[i], 0]], y[[i, 0]], max_relative = 1e-10);
            for c in 0..4 {
                assert_relative_eq!(hp[[perm[i], c]], h[[i, c]], max_relative = 1e-10);
            }
        }
    }
}
