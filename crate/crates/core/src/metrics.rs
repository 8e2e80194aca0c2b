//! Evaluation metrics: detection matching and accuracy, AUROC,
//! permutation-optimal classification accuracy, intra-cluster variance, and
//! Pearson correlation.

use serde::Serialize;

use crate::datagen::GroundTruth;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::pipeline::DetectionResult;

/// Outcome of greedy chronological detection-to-event matching.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub false_neg: usize,
    pub tolerance_ms: f64,
    /// (ground-truth event index, detection index) per matched pair.
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy chronological matching: each detection, in time order, pairs with
/// the nearest still-unmatched ground-truth event within the tolerance.
pub fn match_detections(
    gt: &GroundTruth,
    det: &DetectionResult,
    tolerance_ms: f64,
    fs_hz: f64,
) -> Result<MatchReport> {
    if !(tolerance_ms > 0.0) {
        return Err(Error::invalid("tolerance_ms must be > 0"));
    }
    let tol = (tolerance_ms * fs_hz / 1000.0).round() as i64;
    let gt_times: Vec<i64> = gt.events.iter().map(|e| e.t as i64).collect();
    let mut taken = vec![false; gt_times.len()];
    let mut pairs = Vec::new();
    for (d_idx, &t) in det.times.iter().enumerate() {
        let t = t as i64;
        // Nearest unmatched event within tolerance; ties toward the earlier.
        let start = gt_times.partition_point(|&g| g < t - tol);
        let mut best: Option<(i64, usize)> = None;
        for (g_idx, &g) in gt_times.iter().enumerate().skip(start) {
            if g > t + tol {
                break;
            }
            if taken[g_idx] {
                continue;
            }
            let dist = (g - t).abs();
            if best.map_or(true, |(bd, _)| dist < bd) {
                best = Some((dist, g_idx));
            }
        }
        if let Some((_, g_idx)) = best {
            taken[g_idx] = true;
            pairs.push((g_idx, d_idx));
        }
    }
    let tp = pairs.len();
    Ok(MatchReport {
        tp,
        fp: det.times.len() - tp,
        false_neg: gt_times.len() - tp,
        tolerance_ms,
        pairs,
    })
}

/// Jaccard-style detection accuracy: tp / (tp + fp + fn).
pub fn detection_accuracy(report: &MatchReport) -> Result<f64> {
    let denom = report.tp + report.fp + report.false_neg;
    if denom == 0 {
        return Err(Error::invalid("detection accuracy undefined on an empty report"));
    }
    Ok(report.tp as f64 / denom as f64)
}

/// Probability a random positive outscores a random negative, ties counted
/// half — the Mann-Whitney formulation of the ROC area.
pub fn auroc(positive_scores: &[f64], negative_scores: &[f64]) -> Result<f64> {
    if positive_scores.is_empty() || negative_scores.is_empty() {
        return Err(Error::invalid("auroc needs nonempty score lists"));
    }
    let n_pos = positive_scores.len();
    let n_neg = negative_scores.len();
    let mut all: Vec<(f64, bool)> = positive_scores
        .iter()
        .map(|&s| (s, true))
        .chain(negative_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Mid-ranks over tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_pos += mid_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Classification accuracy maximized over injective label-to-unit
/// assignments of the confusion matrix (exact, bitmask DP).
pub fn classification_accuracy(pred: &[usize], truth: &[u32]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "label lists differ in length: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("cannot score an empty label list"));
    }
    let mut units: Vec<u32> = truth.to_vec();
    units.sort_unstable();
    units.dedup();
    let unit_index = |u: u32| units.binary_search(&u).unwrap();
    let k_pred = pred.iter().max().unwrap() + 1;
    let k = k_pred.max(units.len());
    if k > 16 {
        return Err(Error::invalid("exact assignment supports at most 16 clusters"));
    }

    // Square confusion matrix padded with zeros.
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[p][unit_index(t)] += 1;
    }

    // dp[mask] = best matched count assigning the first popcount(mask)
    // predicted labels to the column set `mask`.
    let full = 1usize << k;
    let mut dp = vec![u64::MAX; full];
    dp[0] = 0;
    for mask in 0..full {
        if dp[mask] == u64::MAX {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == k {
            continue;
        }
        for col in 0..k {
            if mask & (1 << col) != 0 {
                continue;
            }
            let next = mask | (1 << col);
            let cand = dp[mask] + confusion[row][col];
            if dp[next] == u64::MAX || cand > dp[next] {
                dp[next] = cand;
            }
        }
    }
    Ok(dp[full - 1] as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterStat {
    pub cluster: usize,
    pub n: usize,
    /// Mean waveform (or mean feature vector) of the cluster.
    #[serde(skip)]
    pub mean: Vec<f64>,
    pub icv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterStats {
    pub per_cluster: Vec<ClusterStat>,
    /// N_i-weighted mean of the per-cluster values.
    pub aggregate_icv: f64,
}

/// Intra-cluster variance per cluster: mean squared Euclidean deviation of
/// each member row from the cluster mean, computed via the algebraic
/// identity mean(‖v‖²) − ‖μ‖².
pub fn icv(rows: &Mat, labels: &[usize], k: usize) -> Result<ClusterStats> {
    if rows.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "row/label count mismatch: {} vs {}",
            rows.rows(),
            labels.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let d = rows.cols();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0f64; d]; k];
    let mut sq_sums = vec![0.0f64; k];
    for (i, &l) in labels.iter().enumerate() {
        if l >= k {
            return Err(Error::invalid(format!("label {l} out of range for k = {k}")));
        }
        counts[l] += 1;
        let row = rows.row(i);
        sq_sums[l] += row.iter().map(|v| v * v).sum::<f64>();
        for (s, &v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!("cluster {empty} is empty")));
    }

    let mut per_cluster = Vec::with_capacity(k);
    let mut weighted = 0.0;
    for j in 0..k {
        let n = counts[j] as f64;
        let mean: Vec<f64> = sums[j].iter().map(|s| s / n).collect();
        let mean_norm2: f64 = mean.iter().map(|m| m * m).sum();
        let icv_j = (sq_sums[j] / n - mean_norm2).max(0.0);
        weighted += n * icv_j;
        per_cluster.push(ClusterStat {
            cluster: j,
            n: counts[j],
            mean,
            icv: icv_j,
        });
    }
    Ok(ClusterStats {
        per_cluster,
        aggregate_icv: weighted / labels.len() as f64,
    })
}

/// Pearson product-moment correlation.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("pcc needs series of equal length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("pcc needs at least two samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::invalid("pcc undefined for zero-variance series"));
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}
