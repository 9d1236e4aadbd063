//! Differentiable loss terms of the training objective: classification and
//! sensitive-attribute cross-entropies, the two adversarial terms (overall and
//! conditioned on positive labels), the two covariance penalties, and the
//! within-group individual-fairness penalty with its Lagrangian reweighting.
//!
//! Every loss is built on an autograd [`Tape`] so it can serve either player;
//! plain-value wrappers evaluate on a throwaway tape.

use std::rc::Rc;

use ndarray::Array2;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{BinaryAttr, GroupPartition};
use crate::similarity::SimilarityMatrix;
use crate::sparse::SparseMatrix;

/// Probabilities are clipped into [PROB_CLIP, 1 - PROB_CLIP] before logs.
pub const PROB_CLIP: f64 = 1e-7;

/// Scalar values of every loss term for one epoch, with the composition
/// coefficients applied. The identities `l_a = l_a1 + l_a2`,
/// `l_cov = l_r1 + l_r2`, `l_g = beta·l_a + eta·l_cov` and
/// `l_total = l_c + l_g + alpha·l_ifg` hold exactly as computed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBundle {
    pub l_c: f64,
    pub l_sens: f64,
    pub l_a1: f64,
    pub l_a2: f64,
    pub l_a: f64,
    pub l_r1: f64,
    pub l_r2: f64,
    pub l_cov: f64,
    pub l_g: f64,
    pub l_ifg: f64,
    pub group_l_p: Vec<f64>,
    pub l_total: f64,
    pub flags: LossFlags,
}

/// Empty-subset conditions encountered while assembling the bundle; the
/// affected terms are zeroed rather than failing the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct LossFlags {
    pub empty_adversary_group: bool,
    pub empty_adversary_positive_group: bool,
    pub empty_covariance_positive: bool,
}

impl LossFlags {
    pub fn any(&self) -> bool {
        self.empty_adversary_group
            || self.empty_adversary_positive_group
            || self.empty_covariance_positive
    }
}

fn to_column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column shape")
}

/// Mean binary cross-entropy of `probs` against 0/1 `targets` over `rows`.
pub fn bce_masked(tape: &mut Tape, probs: Var, targets: &[f64], rows: &[usize]) -> Result<Var> {
    if rows.is_empty() {
        return Err(Error::DegenerateInput(
            "cross-entropy over an empty mask".into(),
        ));
    }
    let t: Vec<f64> = rows.iter().map(|&i| targets[i]).collect();
    let t_leaf = tape.leaf(to_column(&t));
    let rows_rc = Rc::new(rows.to_vec());
    let p = tape.gather_rows(probs, rows_rc);
    let p = tape.clamp(p, PROB_CLIP, 1.0 - PROB_CLIP);
    let ln_p = tape.ln(p);
    let one_minus_p = tape.one_minus(p);
    let ln_q = tape.ln(one_minus_p);
    let one_minus_t = tape.one_minus(t_leaf);
    let pos = tape.mul(t_leaf, ln_p);
    let neg = tape.mul(one_minus_t, ln_q);
    let sum = tape.add(pos, neg);
    let mean = tape.mean(sum);
    Ok(tape.neg(mean))
}

/// Classification loss: mean BCE of predicted label probabilities over the
/// masked nodes, all of which must carry a known label.
pub fn loss_classification(
    tape: &mut Tape,
    y_prob: Var,
    labels: &[BinaryAttr],
    mask: &[usize],
) -> Result<Var> {
    let targets = binary_targets(labels, mask, "label")?;
    bce_masked(tape, y_prob, &targets, mask)
}

/// Sensitive-attribute loss, identical contract over the labeled-sensitive
/// nodes.
pub fn loss_sensitive(
    tape: &mut Tape,
    s_prob: Var,
    sensitive: &[BinaryAttr],
    labeled: &[usize],
) -> Result<Var> {
    let targets = binary_targets(sensitive, labeled, "sensitive attribute")?;
    bce_masked(tape, s_prob, &targets, labeled)
}

fn binary_targets(values: &[BinaryAttr], mask: &[usize], what: &str) -> Result<Vec<f64>> {
    let mut out = vec![0.0; values.len()];
    for &i in mask {
        match values[i] {
            Some(v) => out[i] = if v { 1.0 } else { 0.0 },
            None => {
                return Err(Error::Validation(format!(
                    "masked node {i} has unknown {what}"
                )))
            }
        }
    }
    Ok(out)
}

/// Mean of `ln(clip(x))` over `rows` of a probability column.
fn mean_log(tape: &mut Tape, probs: Var, rows: &[usize]) -> Var {
    let p = tape.gather_rows(probs, Rc::new(rows.to_vec()));
    let p = tape.clamp(p, PROB_CLIP, 1.0 - PROB_CLIP);
    let ln = tape.ln(p);
    tape.mean(ln)
}

/// Mean of `ln(1 - clip(x))` over `rows`.
fn mean_log_one_minus(tape: &mut Tape, probs: Var, rows: &[usize]) -> Var {
    let p = tape.gather_rows(probs, Rc::new(rows.to_vec()));
    let p = tape.clamp(p, PROB_CLIP, 1.0 - PROB_CLIP);
    let q = tape.one_minus(p);
    let ln = tape.ln(q);
    tape.mean(ln)
}

pub struct AdversaryLossVars {
    pub l_a1: Var,
    pub l_a2: Var,
    pub l_a: Var,
    pub empty_group: bool,
    pub empty_positive_group: bool,
}

/// Adversarial discrimination value, the quantity the adversary ascends and
/// the classifier descends:
/// `L_A1 = E_{ŝ=1}[ln a] + E_{ŝ=0}[ln(1-a)]`, `L_A2` the same restricted to
/// nodes with a positive ground-truth label, `L_A = L_A1 + L_A2`.
/// A term whose required subsets are empty is zeroed and flagged.
pub fn adversary_losses(
    tape: &mut Tape,
    a_prob: Var,
    s_hard: &[bool],
    labels: &[BinaryAttr],
    mask: &[usize],
) -> AdversaryLossVars {
    let group1: Vec<usize> = mask.iter().copied().filter(|&i| s_hard[i]).collect();
    let group0: Vec<usize> = mask.iter().copied().filter(|&i| !s_hard[i]).collect();
    let (l_a1, empty_group) = if group1.is_empty() || group0.is_empty() {
        (tape.scalar_leaf(0.0), true)
    } else {
        let pos = mean_log(tape, a_prob, &group1);
        let neg = mean_log_one_minus(tape, a_prob, &group0);
        (tape.add(pos, neg), false)
    };

    let pos1: Vec<usize> = group1
        .iter()
        .copied()
        .filter(|&i| labels[i] == Some(true))
        .collect();
    let pos0: Vec<usize> = group0
        .iter()
        .copied()
        .filter(|&i| labels[i] == Some(true))
        .collect();
    let (l_a2, empty_positive_group) = if pos1.is_empty() || pos0.is_empty() {
        (tape.scalar_leaf(0.0), true)
    } else {
        let pos = mean_log(tape, a_prob, &pos1);
        let neg = mean_log_one_minus(tape, a_prob, &pos0);
        (tape.add(pos, neg), false)
    };

    let l_a = tape.add(l_a1, l_a2);
    AdversaryLossVars {
        l_a1,
        l_a2,
        l_a,
        empty_group,
        empty_positive_group,
    }
}

pub struct CovarianceLossVars {
    pub l_r1: Var,
    pub l_r2: Var,
    pub l_cov: Var,
    pub empty_positive: bool,
}

/// Absolute empirical covariance |Cov(s, y)| over `rows`, 1/N normalization.
fn abs_cov(tape: &mut Tape, s: Var, y: Var, rows: &[usize]) -> Var {
    let rows_rc = Rc::new(rows.to_vec());
    let s_m = tape.gather_rows(s, rows_rc.clone());
    let y_m = tape.gather_rows(y, rows_rc);
    let prod = tape.mul(s_m, y_m);
    let mean_prod = tape.mean(prod);
    let mean_s = tape.mean(s_m);
    let mean_y = tape.mean(y_m);
    let mean_mean = tape.mul(mean_s, mean_y);
    let cov = tape.sub(mean_prod, mean_mean);
    tape.abs(cov)
}

/// Covariance penalties: `L_R1 = |Cov(ŝ, ŷ)|` over the mask and
/// `L_R2 = |Cov(ŝ, ŷ | y = 1)|` over its positive-label subset.
pub fn covariance_losses(
    tape: &mut Tape,
    s_soft: Var,
    y_prob: Var,
    labels: &[BinaryAttr],
    mask: &[usize],
) -> Result<CovarianceLossVars> {
    if mask.is_empty() {
        return Err(Error::DegenerateInput(
            "covariance over an empty mask".into(),
        ));
    }
    let l_r1 = abs_cov(tape, s_soft, y_prob, mask);
    let positive: Vec<usize> = mask
        .iter()
        .copied()
        .filter(|&i| labels[i] == Some(true))
        .collect();
    let (l_r2, empty_positive) = if positive.is_empty() {
        (tape.scalar_leaf(0.0), true)
    } else {
        (abs_cov(tape, s_soft, y_prob, &positive), false)
    };
    let l_cov = tape.add(l_r1, l_r2);
    Ok(CovarianceLossVars {
        l_r1,
        l_r2,
        l_cov,
        empty_positive,
    })
}

/// Per-group restricted Laplacians with ordered nonzero pair counts, prepared
/// once so the per-epoch loss is two sparse quadratic forms.
pub struct GroupLaplacians {
    /// (members, local Laplacian, ordered nonzero pair count) per group.
    groups: Vec<(Rc<Vec<usize>>, Rc<SparseMatrix>, usize)>,
}

impl GroupLaplacians {
    pub fn new(m: &SimilarityMatrix, partition: &GroupPartition) -> Self {
        let mut groups = Vec::with_capacity(2);
        for members in &partition.members {
            let (sub, nnz) = m.restrict(members);
            // Local Laplacian of the restricted similarity.
            let n = members.len();
            let degrees = sub.row_sums();
            let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(sub.nnz() + n);
            for i in 0..n {
                triplets.push((i, i, degrees[i]));
            }
            for (i, j, v) in sub.iter() {
                triplets.push((i, j, -v));
            }
            let lap = SparseMatrix::from_triplets_keep_zeros(n, &triplets)
                .expect("group Laplacian triplets valid");
            groups.push((Rc::new(members.clone()), Rc::new(lap), nnz));
        }
        Self { groups }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn pair_count(&self, g: usize) -> usize {
        self.groups[g].2
    }
}

pub struct IfgLossVars {
    pub l_ifg: Var,
    pub group_l_p: Vec<Var>,
}

/// Within-group individual-fairness penalty.
///
/// For each group `p` with `n_p > 0` ordered nonzero-similarity pairs:
/// `L_p = (Σ_{i,j∈p} ||z_i - z_j||² M[i,j]) / n_p = 2·Tr(ZᵀL_pZ)/n_p`.
/// Groups without pairs contribute `L_p = 0`. The total applies the fixed
/// multipliers: `L_Ifg = Σ_p L_p + Σ_p λ_p(L_p - γ)`; the constant
/// `-Σ_p λ_p γ` is kept so the reported value matches the formula while
/// leaving gradients untouched.
pub fn loss_ifg(
    tape: &mut Tape,
    z: Var,
    group_laps: &GroupLaplacians,
    lambdas: &[f64],
    gamma_bound: f64,
) -> Result<IfgLossVars> {
    if lambdas.len() != group_laps.n_groups() {
        return Err(Error::Config(format!(
            "{} lambda values for {} groups",
            lambdas.len(),
            group_laps.n_groups()
        )));
    }
    if gamma_bound < 0.0 {
        return Err(Error::Config(format!(
            "gamma bound {gamma_bound} must be nonnegative"
        )));
    }
    let mut group_l_p = Vec::with_capacity(group_laps.n_groups());
    let mut weighted_sum: Option<Var> = None;
    let mut constant = 0.0;
    for ((members, lap, n_p), &lambda) in group_laps.groups.iter().zip(lambdas.iter()) {
        let l_p = if *n_p == 0 {
            tape.scalar_leaf(0.0)
        } else {
            let z_g = tape.gather_rows(z, members.clone());
            let quad = tape.quad_form(lap.clone(), z_g);
            tape.scale(quad, 2.0 / *n_p as f64)
        };
        group_l_p.push(l_p);
        let weighted = tape.scale(l_p, 1.0 + lambda);
        weighted_sum = Some(match weighted_sum {
            Some(acc) => tape.add(acc, weighted),
            None => weighted,
        });
        constant -= lambda * gamma_bound;
    }
    let base = weighted_sum.expect("at least one group");
    let l_ifg = tape.add_const(base, constant);
    Ok(IfgLossVars { l_ifg, group_l_p })
}

/// Raw component values feeding [`assemble_total`].
#[derive(Debug, Clone)]
pub struct LossComponents {
    pub l_c: f64,
    pub l_sens: f64,
    pub l_a1: f64,
    pub l_a2: f64,
    pub l_r1: f64,
    pub l_r2: f64,
    pub l_ifg: f64,
    pub group_l_p: Vec<f64>,
    pub flags: LossFlags,
}

/// Combine component values into a [`LossBundle`], enforcing finiteness and
/// the composition identities. The classifier-facing total is
/// `L_C + β·L_A + η·L_Cov + α·L_Ifg`.
pub fn assemble_total(
    components: &LossComponents,
    alpha: f64,
    beta: f64,
    eta: f64,
) -> Result<LossBundle> {
    let named = [
        ("L_C", components.l_c),
        ("L_Sens", components.l_sens),
        ("L_A1", components.l_a1),
        ("L_A2", components.l_a2),
        ("L_R1", components.l_r1),
        ("L_R2", components.l_r2),
        ("L_Ifg", components.l_ifg),
    ];
    for (name, v) in named {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{name} is not finite: {v}")));
        }
    }
    let l_a = components.l_a1 + components.l_a2;
    let l_cov = components.l_r1 + components.l_r2;
    let l_g = beta * l_a + eta * l_cov;
    let l_total = components.l_c + l_g + alpha * components.l_ifg;
    Ok(LossBundle {
        l_c: components.l_c,
        l_sens: components.l_sens,
        l_a1: components.l_a1,
        l_a2: components.l_a2,
        l_a,
        l_r1: components.l_r1,
        l_r2: components.l_r2,
        l_cov,
        l_g,
        l_ifg: components.l_ifg,
        group_l_p: components.group_l_p.clone(),
        l_total,
        flags: components.flags,
    })
}

// Plain-value entry points, used by evaluation code and value-level tests.

pub fn loss_classification_value(
    y_prob: &[f64],
    labels: &[BinaryAttr],
    mask: &[usize],
) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.leaf(to_column(y_prob));
    let v = loss_classification(&mut tape, p, labels, mask)?;
    Ok(tape.scalar(v))
}

pub fn loss_sensitive_value(
    s_prob: &[f64],
    sensitive: &[BinaryAttr],
    labeled: &[usize],
) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.leaf(to_column(s_prob));
    let v = loss_sensitive(&mut tape, p, sensitive, labeled)?;
    Ok(tape.scalar(v))
}

pub fn adversary_losses_value(
    a_prob: &[f64],
    s_hard: &[bool],
    labels: &[BinaryAttr],
    mask: &[usize],
) -> (f64, f64, f64) {
    let mut tape = Tape::new();
    let p = tape.leaf(to_column(a_prob));
    let vars = adversary_losses(&mut tape, p, s_hard, labels, mask);
    (
        tape.scalar(vars.l_a1),
        tape.scalar(vars.l_a2),
        tape.scalar(vars.l_a),
    )
}

pub fn covariance_losses_value(
    s_soft: &[f64],
    y_prob: &[f64],
    labels: &[BinaryAttr],
    mask: &[usize],
) -> Result<(f64, f64, f64)> {
    let mut tape = Tape::new();
    let s = tape.leaf(to_column(s_soft));
    let y = tape.leaf(to_column(y_prob));
    let vars = covariance_losses(&mut tape, s, y, labels, mask)?;
    Ok((
        tape.scalar(vars.l_r1),
        tape.scalar(vars.l_r2),
        tape.scalar(vars.l_cov),
    ))
}

pub fn loss_ifg_value(
    z: &Array2<f64>,
    m: &SimilarityMatrix,
    partition: &GroupPartition,
    lambdas: &[f64],
    gamma_bound: f64,
) -> Result<(f64, Vec<f64>)> {
    let group_laps = GroupLaplacians::new(m, partition);
    let mut tape = Tape::new();
    let zv = tape.leaf(z.clone());
    let vars = loss_ifg(&mut tape, zv, &group_laps, lambdas, gamma_bound)?;
    let l_p = vars.group_l_p.iter().map(|&v| tape.scalar(v)).collect();
    Ok((tape.scalar(vars.l_ifg), l_p))
}
