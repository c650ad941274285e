//! Average precision and ROC-AUC.
//!
//! AP walks the ranking one item at a time (descending score, ties kept in
//! input order) and sums `(R_n − R_{n−1}) · P_n`. AUC is the Mann–Whitney
//! statistic with half credit for tied pairs, which equals the trapezoidal
//! area under the ROC curve.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Metric(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Metric("no scored items".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Metric("NaN score".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Same items in a seeded random order. Applied before evaluation so the
    /// stable tie-break in AP does not depend on how items were collected.
    pub fn shuffled(&self, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            scores: idx.iter().map(|&i| self.scores[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            scores: self.scores.clone(),
            labels: self.labels.iter().map(|l| !l).collect(),
        }
    }
}

fn descending_stable(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

pub fn average_precision(sl: &ScoredLabels) -> Result<f64> {
    let positives = sl.n_positive();
    if positives == 0 {
        return Err(Error::Metric("average precision needs a positive label".into()));
    }
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (rank, &i) in descending_stable(&sl.scores).iter().enumerate() {
        if sl.labels[i] {
            tp += 1;
            ap += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / positives as f64)
}

pub fn roc_auc(sl: &ScoredLabels) -> Result<f64> {
    let positives = sl.n_positive();
    let negatives = sl.labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric("ROC-AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..sl.scores.len()).collect();
    order.sort_by(|&a, &b| sl.scores[a].total_cmp(&sl.scores[b]));
    // midranks (1-based) summed over positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && sl.scores[order[end]] == sl.scores[order[start]] {
            end += 1;
        }
        let mid = (start + 1 + end) as f64 / 2.0;
        let pos_in_run = order[start..end].iter().filter(|&&i| sl.labels[i]).count();
        rank_sum += mid * pos_in_run as f64;
        start = end;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// One-vs-rest AP and AUC per class, macro-averaged over the classes that
/// have both positives and negatives among `labels`.
pub fn macro_ap_auc(class_scores: &[Vec<f64>], labels: &[usize]) -> Result<(f64, f64)> {
    let n_classes = class_scores.first().map_or(0, Vec::len);
    let (mut ap, mut auc, mut used) = (0.0, 0.0, 0usize);
    for c in 0..n_classes {
        let positives = labels.iter().filter(|&&l| l == c).count();
        if positives == 0 || positives == labels.len() {
            continue;
        }
        let sl = ScoredLabels::new(
            class_scores.iter().map(|row| row[c]).collect(),
            labels.iter().map(|&l| l == c).collect(),
        )?;
        ap += average_precision(&sl)?;
        auc += roc_auc(&sl)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Metric("no class has both positives and negatives".into()));
    }
    Ok((ap / used as f64, auc / used as f64))
}

/// AP and AUC for one evaluation scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApAuc {
    pub ap: f64,
    pub auc: f64,
}

impl ApAuc {
    pub fn of(sl: &ScoredLabels) -> Result<Self> {
        Ok(Self {
            ap: average_precision(sl)?,
            auc: roc_auc(sl)?,
        })
    }
}
