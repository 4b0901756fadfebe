//! Identification and prediction scores.

use crate::error::{Error, Result};
use crate::inference::fdr_select;

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted ½.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("AUC scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidConfig("AUC needs both classes present".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut end = i;
        while end < idx.len() && scores[idx[end]] == scores[idx[i]] {
            end += 1;
        }
        let mid = (i + end + 1) as f64 / 2.0;
        rank_sum += mid * idx[i..end].iter().filter(|&&j| labels[j]).count() as f64;
        i = end;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of true SNPs selected by [`fdr_select`] at target τ; NaN when
/// there are no true SNPs.
pub fn power_at_fdr(lfdrs: &[f64], truth: &[bool], tau: f64) -> Result<f64> {
    check_len(lfdrs.len(), truth.len())?;
    let n_true = truth.iter().filter(|&&t| t).count();
    if n_true == 0 {
        return Ok(f64::NAN);
    }
    let sel = fdr_select(lfdrs, tau)?;
    let hits = sel.selected.iter().filter(|&&j| truth[j]).count();
    Ok(hits as f64 / n_true as f64)
}

/// Fraction of selected SNPs that are not truly associated; 0 for an empty
/// selection.
pub fn empirical_fdr(selected: &[usize], truth: &[bool]) -> Result<f64> {
    if selected.is_empty() {
        return Ok(0.0);
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= truth.len()) {
        return Err(Error::DimensionMismatch(format!(
            "selected index {j} out of range for {} SNPs",
            truth.len()
        )));
    }
    let false_hits = selected.iter().filter(|&&j| !truth[j]).count();
    Ok(false_hits as f64 / selected.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(Error::Degenerate("correlation of a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("lengths differ: {a} vs {b}")));
    }
    Ok(())
}
