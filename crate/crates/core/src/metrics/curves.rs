//! Ranking metrics for binary exit labels.
//!
//! A point is predicted positive when its score is at least the threshold.

use alloc::vec::Vec;

use crate::error::{Error, Result};

fn counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn check(scores: &[f64], labels: &[bool], need_negative: bool) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { field: "labels", expected: scores.len(), found: labels.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("scores contain NaN".into()));
    }
    let (pos, neg) = counts(labels);
    if pos == 0 {
        return Err(Error::UndefinedMetric("no positive labels".into()));
    }
    if need_negative && neg == 0 {
        return Err(Error::UndefinedMetric("no negative labels".into()));
    }
    Ok((pos, neg))
}

/// Points sorted by descending score, grouped into tie blocks of
/// `(positives, negatives)`.
fn tie_blocks(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut blocks: Vec<(f64, usize, usize)> = Vec::new();
    for i in idx {
        let (p, n) = if labels[i] { (1, 0) } else { (0, 1) };
        match blocks.last_mut() {
            Some(last) if last.0 == scores[i] => {
                last.1 += p;
                last.2 += n;
            }
            _ => blocks.push((scores[i], p, n)),
        }
    }
    blocks
}

/// Area under the ROC curve: the share of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels, true)?;
    let mut negatives_below = neg as f64;
    let mut wins = 0.0;
    for (_, p, n) in tie_blocks(scores, labels) {
        negatives_below -= n as f64;
        wins += p as f64 * (negatives_below + 0.5 * n as f64);
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Average precision: `Σ (R_k - R_{k-1}) P_k` over descending distinct
/// thresholds.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check(scores, labels, false)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    for (_, p, n) in tie_blocks(scores, labels) {
        tp += p;
        fp += n;
        if p > 0 {
            area += (p as f64 / pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(area)
}

/// One operating point of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// `None` when nothing is predicted positive.
    pub precision: Option<f64>,
}

/// Operating points for thresholds `+inf` and every distinct score, in
/// descending threshold order.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<OperatingPoint>> {
    let (pos, neg) = check(scores, labels, true)?;
    let mut out = Vec::new();
    out.push(OperatingPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0, precision: None });
    let (mut tp, mut fp) = (0usize, 0usize);
    for (s, p, n) in tie_blocks(scores, labels) {
        tp += p;
        fp += n;
        out.push(OperatingPoint {
            threshold: s,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
            precision: Some(tp as f64 / (tp + fp) as f64),
        });
    }
    Ok(out)
}

/// The admissible operating point (false-positive rate at most `fpr`) with
/// the highest true-positive rate, i.e. the lowest admissible threshold.
pub fn operating_point_at_fpr(scores: &[f64], labels: &[bool], fpr: f64) -> Result<OperatingPoint> {
    if !(0.0..=1.0).contains(&fpr) {
        return Err(Error::Domain("target false-positive rate must lie in [0, 1]".into()));
    }
    let points = roc_points(scores, labels)?;
    // fpr is non-decreasing along the sweep
    Ok(*points.iter().rev().find(|p| p.fpr <= fpr).unwrap_or(&points[0]))
}

/// True-positive rate at the admissible threshold of
/// [`operating_point_at_fpr`]. All-tied scores give 0 for `fpr < 1`.
pub fn hit_rate_at_fpr(scores: &[f64], labels: &[bool], fpr: f64) -> Result<f64> {
    Ok(operating_point_at_fpr(scores, labels, fpr)?.tpr)
}

/// Threshold of [`operating_point_at_fpr`].
pub fn threshold_at_fpr(scores: &[f64], labels: &[bool], fpr: f64) -> Result<f64> {
    Ok(operating_point_at_fpr(scores, labels, fpr)?.threshold)
}
