use crate::error::{Error, Result};

/// Micro-averaged confusion counts and rates over all device decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    /// `tp / (tp + fn)`; `None` without positives.
    pub recall: Option<f64>,
    /// `fn / (tp + fn)`.
    pub misdetection: Option<f64>,
    /// `tp / (tp + fp)`; `None` without positive decisions.
    pub precision: Option<f64>,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

impl MetricsReport {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Confusion counts of binary `predictions` against `labels` (flattened
/// sample-major arrays of equal length).
pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<MetricsReport> {
    if predictions.len() != labels.len() {
        return Err(Error::mismatch("prediction count", labels.len(), predictions.len()));
    }
    if labels.is_empty() {
        return Err(Error::invalid("no decisions to score"));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p != 0, l != 0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(MetricsReport {
        tp,
        tn,
        fp,
        fn_,
        recall: ratio(tp, tp + fn_),
        misdetection: ratio(fn_, tp + fn_),
        precision: ratio(tp, tp + fp),
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        auc: None,
    })
}

/// Metrics of the thresholded scores plus the AUC of the raw scores.
pub fn compute_metrics_with_scores(scores: &[f64], labels: &[u8]) -> Result<MetricsReport> {
    let pred: Vec<u8> = scores.iter().map(|&p| u8::from(p >= 0.5)).collect();
    let mut m = compute_metrics(&pred, labels)?;
    m.auc = compute_auc(scores, labels).ok();
    Ok(m)
}

/// Rank-based (Mann-Whitney) area under the ROC curve with tied scores
/// given their average rank.
pub fn compute_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::mismatch("score count", labels.len(), scores.len()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            if labels[o] != 0 {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Detected support and sparsity estimate from per-device probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub support: Vec<usize>,
    pub sparsity: usize,
}

/// Devices with probability at least 0.5 (closed threshold).
pub fn detect<F: crate::Scalar>(probabilities: &[F]) -> Detection {
    let half = F::lit(0.5);
    let support: Vec<usize> = probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= half)
        .map(|(i, _)| i)
        .collect();
    Detection {
        sparsity: support.len(),
        support,
    }
}
