//! Evaluation metrics: statistical parity and equal opportunity gaps,
//! population and within-group individual fairness, accuracy and AUC, and the
//! final report structure.
//!
//! Gap metrics are reported as absolute values in percentage points and always
//! use ground-truth sensitive labels; a conditioning subset that is empty
//! makes the metric undefined (`None`), never zero.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BinaryAttr, GroupPartition};
use crate::similarity::{laplacian, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMetrics {
    /// |P(ŷ=1|s=0) - P(ŷ=1|s=1)| · 100, None if either group is empty.
    pub delta_sp: Option<f64>,
    /// |P(ŷ=1|y=1,s=0) - P(ŷ=1|y=1,s=1)| · 100, None if either positive
    /// subset is empty.
    pub delta_eo: Option<f64>,
    pub n: usize,
}

/// Statistical-parity and equal-opportunity gaps over `mask`, from hard
/// predictions, ground-truth labels, and ground-truth sensitive attributes.
pub fn group_metrics(
    y_hard: &[bool],
    labels: &[BinaryAttr],
    sensitive_true: &[BinaryAttr],
    mask: &[usize],
) -> Result<GroupMetrics> {
    if mask.is_empty() {
        return Err(Error::DegenerateInput("group metrics over empty mask".into()));
    }
    let mut count = [0usize; 2];
    let mut positive = [0usize; 2];
    let mut pos_label = [0usize; 2];
    let mut pos_label_positive = [0usize; 2];
    for &i in mask {
        let s = match sensitive_true[i] {
            Some(v) => usize::from(v),
            None => {
                return Err(Error::Validation(format!(
                    "node {i} has unknown sensitive attribute at evaluation"
                )))
            }
        };
        count[s] += 1;
        if y_hard[i] {
            positive[s] += 1;
        }
        if labels[i] == Some(true) {
            pos_label[s] += 1;
            if y_hard[i] {
                pos_label_positive[s] += 1;
            }
        }
    }
    let delta_sp = if count[0] == 0 || count[1] == 0 {
        None
    } else {
        let p0 = positive[0] as f64 / count[0] as f64;
        let p1 = positive[1] as f64 / count[1] as f64;
        Some((p0 - p1).abs() * 100.0)
    };
    let delta_eo = if pos_label[0] == 0 || pos_label[1] == 0 {
        None
    } else {
        let p0 = pos_label_positive[0] as f64 / pos_label[0] as f64;
        let p1 = pos_label_positive[1] as f64 / pos_label[1] as f64;
        Some((p0 - p1).abs() * 100.0)
    };
    Ok(GroupMetrics {
        delta_sp,
        delta_eo,
        n: mask.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualMetrics {
    /// Population individual bias `Tr(Zᵀ L Z)`.
    pub individual_fairness: f64,
    /// Within-group bias per group (unprotected, protected).
    pub group_if: Vec<f64>,
    /// max over group_if.
    pub max_ig: f64,
    pub n: usize,
}

/// Population and within-group individual-fairness quantities of embeddings
/// `z` under similarity `m`, with groups from ground-truth sensitive labels.
pub fn individual_metrics(
    z: &Array2<f64>,
    m: &SimilarityMatrix,
    partition: &GroupPartition,
) -> Result<IndividualMetrics> {
    if z.nrows() != m.n() {
        return Err(Error::Shape(format!(
            "embedding rows {} != similarity size {}",
            z.nrows(),
            m.n()
        )));
    }
    if partition.group_of.len() != m.n() {
        return Err(Error::Shape(format!(
            "partition size {} != similarity size {}",
            partition.group_of.len(),
            m.n()
        )));
    }
    let individual_fairness = laplacian(m).quad_form(z);
    let (_, group_if) = crate::losses::loss_ifg_value(z, m, partition, &[0.0, 0.0], 0.0)?;
    let max_ig = group_if.iter().cloned().fold(0.0f64, f64::max);
    Ok(IndividualMetrics {
        individual_fairness,
        group_if,
        max_ig,
        n: z.nrows(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveMetrics {
    /// Percent of masked nodes where the thresholded prediction matches.
    pub accuracy: f64,
    /// Mann–Whitney AUC in percent, ties counted 1/2; None for a single-class
    /// mask.
    pub auc: Option<f64>,
    pub n: usize,
}

/// Accuracy and AUC of probability scores against binary labels over `mask`.
pub fn predictive_metrics(
    y_prob: &[f64],
    labels: &[BinaryAttr],
    mask: &[usize],
) -> Result<PredictiveMetrics> {
    if mask.is_empty() {
        return Err(Error::DegenerateInput(
            "predictive metrics over empty mask".into(),
        ));
    }
    let mut correct = 0usize;
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(mask.len());
    for &i in mask {
        let label = labels[i].ok_or_else(|| {
            Error::Validation(format!("node {i} has unknown label at evaluation"))
        })?;
        let pred = y_prob[i] >= 0.5;
        if pred == label {
            correct += 1;
        }
        scored.push((y_prob[i], label));
    }
    let accuracy = correct as f64 / mask.len() as f64 * 100.0;

    let n_pos = scored.iter().filter(|(_, l)| *l).count();
    let n_neg = scored.len() - n_pos;
    let auc = if n_pos == 0 || n_neg == 0 {
        None
    } else {
        // Rank-sum with average ranks for ties; tied pairs count 1/2 exactly.
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
        let mut rank_sum_pos = 0.0;
        let mut i = 0;
        while i < scored.len() {
            let mut j = i;
            while j < scored.len() && scored[j].0 == scored[i].0 {
                j += 1;
            }
            // ranks are 1-based: positions i+1 ..= j averaged.
            let avg_rank = (i + 1 + j) as f64 / 2.0;
            for item in &scored[i..j] {
                if item.1 {
                    rank_sum_pos += avg_rank;
                }
            }
            i = j;
        }
        let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
        Some(u / (n_pos as f64 * n_neg as f64) * 100.0)
    };
    Ok(PredictiveMetrics {
        accuracy,
        auc,
        n: mask.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset: String,
    pub seed: u64,
    pub config_hash: String,
    pub disable_ifg: bool,
    pub disable_eo_terms: bool,
    /// Stored nonzero similarity entries (ordered pairs); allows recovering a
    /// pair-normalized individual-fairness value from the unnormalized one.
    pub similarity_nnz: usize,
    pub node_count: usize,
    pub fairness_gate_missed: bool,
    pub best_epoch: Option<usize>,
}

impl Default for ReportMetadata {
    fn default() -> Self {
        Self {
            dataset: String::new(),
            seed: 0,
            config_hash: String::new(),
            disable_ifg: false,
            disable_eo_terms: false,
            similarity_nnz: 0,
            node_count: 0,
            fairness_gate_missed: false,
            best_epoch: None,
        }
    }
}

/// Final evaluation report. Undefined metrics serialize as JSON null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub delta_sp: Option<f64>,
    pub delta_eo: Option<f64>,
    pub individual_fairness: f64,
    pub group_if: Vec<f64>,
    pub max_ig: f64,
    /// `IF <= m·ε` for a user-supplied ε; None when no ε was configured.
    pub epsilon_bound_check: Option<bool>,
    pub metadata: ReportMetadata,
}

/// Assemble the report from computed metric outputs, validating that they
/// describe consistent node sets.
pub fn build_report(
    predictive: &PredictiveMetrics,
    group: &GroupMetrics,
    individual: &IndividualMetrics,
    epsilon: Option<f64>,
    similarity_nnz: usize,
    metadata: ReportMetadata,
) -> Result<FairnessReport> {
    if predictive.n != group.n {
        return Err(Error::Validation(format!(
            "predictive metrics cover {} nodes but group metrics cover {}",
            predictive.n, group.n
        )));
    }
    if individual.n != metadata.node_count {
        return Err(Error::Validation(format!(
            "individual metrics cover {} nodes but the graph has {}",
            individual.n, metadata.node_count
        )));
    }
    let epsilon_bound_check =
        epsilon.map(|e| individual.individual_fairness <= similarity_nnz as f64 * e);
    Ok(FairnessReport {
        accuracy: predictive.accuracy,
        auc: predictive.auc,
        delta_sp: group.delta_sp,
        delta_eo: group.delta_eo,
        individual_fairness: individual.individual_fairness,
        group_if: individual.group_if.clone(),
        max_ig: individual.max_ig,
        epsilon_bound_check,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::partition_by_sensitive;
    use crate::sparse::SparseMatrix;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn sp_complete_separation() {
        let m = group_metrics(
            &[true, true, false, false],
            &[Some(true); 4],
            &[Some(false), Some(false), Some(true), Some(true)],
            &[0, 1, 2, 3],
        )
        .unwrap();
        assert_eq!(m.delta_sp, Some(100.0));
    }

    #[test]
    fn eo_direct_counting() {
        let m = group_metrics(
            &[true, false, true, true],
            &[Some(true); 4],
            &[Some(false), Some(false), Some(true), Some(true)],
            &[0, 1, 2, 3],
        )
        .unwrap();
        assert_eq!(m.delta_eo, Some(50.0));
    }

    #[test]
    fn sp_zero_for_identical_rates() {
        let m = group_metrics(
            &[true, false, true, false],
            &[Some(true); 4],
            &[Some(false), Some(false), Some(true), Some(true)],
            &[0, 1, 2, 3],
        )
        .unwrap();
        assert_eq!(m.delta_sp, Some(0.0));
    }

    #[test]
    fn undefined_conditioning_subsets() {
        // All nodes in one sensitive group.
        let m = group_metrics(
            &[true, false],
            &[Some(true), Some(false)],
            &[Some(true), Some(true)],
            &[0, 1],
        )
        .unwrap();
        assert_eq!(m.delta_sp, None);
        assert_eq!(m.delta_eo, None);
        // Both groups present but no positive labels in group 0.
        let m = group_metrics(
            &[true, false],
            &[Some(false), Some(true)],
            &[Some(false), Some(true)],
            &[0, 1],
        )
        .unwrap();
        assert!(m.delta_sp.is_some());
        assert_eq!(m.delta_eo, None);
    }

    fn pair_similarity() -> SimilarityMatrix {
        SimilarityMatrix::from_sparse(
            SparseMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn individual_zero_embeddings() {
        let p = partition_by_sensitive(&[Some(false), Some(true)]).unwrap();
        let m = individual_metrics(&Array2::zeros((2, 3)), &pair_similarity(), &p).unwrap();
        assert_eq!(m.individual_fairness, 0.0);
        assert_eq!(m.max_ig, 0.0);
        assert!(m.group_if.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn individual_pairwise_oracle() {
        // Z column (1,0)ᵀ with M = [[0,1],[1,0]]: IF = ½·(1+1) = 1.
        let p = partition_by_sensitive(&[Some(false), Some(false)]).unwrap();
        let z = array![[1.0], [0.0]];
        let m = individual_metrics(&z, &pair_similarity(), &p).unwrap();
        assert_relative_eq!(m.individual_fairness, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn max_ig_is_group_max() {
        let m = SimilarityMatrix::from_sparse(
            SparseMatrix::from_triplets(
                4,
                &[(0, 1, 0.5), (1, 0, 0.5), (2, 3, 0.25), (3, 2, 0.25)],
            )
            .unwrap(),
        )
        .unwrap();
        let p =
            partition_by_sensitive(&[Some(false), Some(false), Some(true), Some(true)]).unwrap();
        let z = array![[0.0], [1.0], [0.0], [0.8f64.sqrt()]];
        let im = individual_metrics(&z, &m, &p).unwrap();
        assert_relative_eq!(im.group_if[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(im.group_if[1], 0.2, max_relative = 1e-12);
        assert_relative_eq!(im.max_ig, 0.5, max_relative = 1e-12);
        assert!(im.group_if.iter().all(|&g| im.max_ig >= g));
    }

    #[test]
    fn predictive_perfect_separation() {
        let labels = [Some(true), Some(true), Some(false), Some(false)];
        let m = predictive_metrics(&[0.9, 0.8, 0.2, 0.1], &labels, &[0, 1, 2, 3]).unwrap();
        assert_eq!(m.accuracy, 100.0);
        assert_eq!(m.auc, Some(100.0));
    }

    #[test]
    fn predictive_constant_scores_auc_half() {
        let labels = [Some(true), Some(false), Some(true)];
        let m = predictive_metrics(&[0.7, 0.7, 0.7], &labels, &[0, 1, 2]).unwrap();
        assert_eq!(m.auc, Some(50.0));
    }

    #[test]
    fn predictive_pair_enumeration_oracle() {
        let labels = [Some(true), Some(false), Some(true)];
        let m = predictive_metrics(&[0.9, 0.6, 0.4], &labels, &[0, 1, 2]).unwrap();
        assert_eq!(m.auc, Some(50.0));
        assert_relative_eq!(m.accuracy, 100.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn auc_single_class_undefined() {
        let labels = [Some(true), Some(true)];
        let m = predictive_metrics(&[0.9, 0.6], &labels, &[0, 1]).unwrap();
        assert_eq!(m.auc, None);
        assert_eq!(m.accuracy, 100.0);
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let labels = [Some(true), Some(false), Some(true), Some(false), Some(true)];
        let scores = [0.9, 0.6, 0.7, 0.2, 0.4];
        let mask = [0, 1, 2, 3, 4];
        let base = predictive_metrics(&scores, &labels, &mask).unwrap().auc;
        let transformed: Vec<f64> = scores.iter().map(|&s| (5.0 * s).exp()).collect();
        let t = predictive_metrics(&transformed, &labels, &mask).unwrap().auc;
        assert_eq!(base, t);
    }

    #[test]
    fn report_assembly_and_mismatch() {
        let predictive = PredictiveMetrics {
            accuracy: 73.13,
            auc: Some(79.28),
            n: 4,
        };
        let group = GroupMetrics {
            delta_sp: Some(0.43),
            delta_eo: Some(0.62),
            n: 4,
        };
        let individual = IndividualMetrics {
            individual_fairness: 0.08,
            group_if: vec![0.12, 0.05],
            max_ig: 0.12,
            n: 8,
        };
        let meta = ReportMetadata {
            node_count: 8,
            ..Default::default()
        };
        let r = build_report(&predictive, &group, &individual, None, 42, meta.clone()).unwrap();
        assert_eq!(r.accuracy, 73.13);
        assert_eq!(r.max_ig, 0.12);
        assert_eq!(r.epsilon_bound_check, None);

        let bad_group = GroupMetrics {
            delta_sp: None,
            delta_eo: None,
            n: 3,
        };
        assert!(build_report(&predictive, &bad_group, &individual, None, 42, meta).is_err());
    }

    #[test]
    fn undefined_metric_serializes_as_null() {
        let r = FairnessReport {
            accuracy: 50.0,
            auc: Some(60.0),
            delta_sp: Some(1.0),
            delta_eo: None,
            individual_fairness: 0.0,
            group_if: vec![0.0, 0.0],
            max_ig: 0.0,
            epsilon_bound_check: None,
            metadata: ReportMetadata::default(),
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"delta_eo\":null"));
    }

    #[test]
    fn epsilon_bound_check() {
        let predictive = PredictiveMetrics {
            accuracy: 60.0,
            auc: None,
            n: 2,
        };
        let group = GroupMetrics {
            delta_sp: None,
            delta_eo: None,
            n: 2,
        };
        let individual = IndividualMetrics {
            individual_fairness: 5.0,
            group_if: vec![0.0, 0.0],
            max_ig: 0.0,
            n: 2,
        };
        let meta = ReportMetadata {
            node_count: 2,
            ..Default::default()
        };
        let r = build_report(&predictive, &group, &individual, Some(1.0), 10, meta.clone())
            .unwrap();
        assert_eq!(r.epsilon_bound_check, Some(true)); // 5 <= 10·1
        let r = build_report(&predictive, &group, &individual, Some(0.1), 10, meta).unwrap();
        assert_eq!(r.epsilon_bound_check, Some(false)); // 5 > 10·0.1
    }
}
