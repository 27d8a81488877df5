//! Macro-averaged classification metrics: accuracy, precision/recall/F1 from
//! the confusion matrix, one-vs-rest AUROC (Mann–Whitney with midrank ties)
//! and AUPRC (step-wise average precision), plus report serialization.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fmt::Write as _;

#[derive(Debug)]
pub enum MetricsError {
    LabelOutOfRange { label: usize, n_classes: usize },
    LengthMismatch { truth: usize, predictions: usize },
    /// No class has both a positive and a negative example.
    AllOneClass,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LabelOutOfRange { label, n_classes } => {
                write!(f, "label {label} outside 0..{n_classes}")
            }
            Self::LengthMismatch { truth, predictions } => {
                write!(f, "{truth} ground-truth labels vs {predictions} predictions")
            }
            Self::AllOneClass => write!(f, "ground truth admits no one-vs-rest split"),
        }
    }
}

impl std::error::Error for MetricsError {}

/// Entry (i, j) counts samples with ground truth i predicted j.
pub fn confusion_matrix(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
) -> Result<Array2<u64>, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch { truth: y_true.len(), predictions: y_pred.len() });
    }
    let mut m = Array2::<u64>::zeros((n_classes, n_classes));
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes {
            return Err(MetricsError::LabelOutOfRange { label: t, n_classes });
        }
        if p >= n_classes {
            return Err(MetricsError::LabelOutOfRange { label: p, n_classes });
        }
        m[[t, p]] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when the class was never predicted, making its precision a
    /// 0-by-convention value.
    pub never_predicted: bool,
}

/// Per-class precision/recall/F1 with 0-by-convention for empty denominators;
/// macro values average over classes present in the ground truth.
pub fn macro_prf(confusion: ArrayView2<u64>) -> (f64, f64, f64, Vec<PerClassPrf>) {
    let k = confusion.nrows();
    let mut per_class = Vec::with_capacity(k);
    let (mut p_acc, mut r_acc, mut f_acc, mut present) = (0.0, 0.0, 0.0, 0usize);
    for c in 0..k {
        let tp = confusion[[c, c]] as f64;
        let row_sum: u64 = confusion.row(c).sum();
        let col_sum: u64 = confusion.column(c).sum();
        let precision = if col_sum == 0 { 0.0 } else { tp / col_sum as f64 };
        let recall = if row_sum == 0 { 0.0 } else { tp / row_sum as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(PerClassPrf { precision, recall, f1, never_predicted: col_sum == 0 });
        if row_sum > 0 {
            p_acc += precision;
            r_acc += recall;
            f_acc += f1;
            present += 1;
        }
    }
    let n = present.max(1) as f64;
    (p_acc / n, r_acc / n, f_acc / n, per_class)
}

pub fn accuracy(confusion: ArrayView2<u64>) -> f64 {
    let total: u64 = confusion.sum();
    if total == 0 {
        return 0.0;
    }
    let trace: u64 = (0..confusion.nrows()).map(|i| confusion[[i, i]]).sum();
    trace as f64 / total as f64
}

/// Midranks of `values` (average rank for ties, 1-based).
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// AUROC of one binary problem via the Mann–Whitney statistic.
fn auroc_binary(labels: &[bool], scores: &[f64]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    debug_assert!(n_pos > 0 && n_neg > 0);
    let ranks = midranks(scores);
    let rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

/// Step-wise average precision of one binary problem, ties grouped at equal
/// thresholds.
fn average_precision_binary(labels: &[bool], scores: &[f64]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count();
    debug_assert!(n_pos > 0);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        // one threshold group of tied scores
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    ap
}

/// Outcome of a one-vs-rest sweep: macro average over admissible classes,
/// plus which classes were skipped for lacking positives or negatives.
#[derive(Debug, Clone)]
pub struct OvrOutcome {
    pub macro_value: f64,
    pub per_class: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
}

fn ovr_sweep(
    y_true: &[usize],
    scores: ArrayView2<f64>,
    f: impl Fn(&[bool], &[f64]) -> f64,
) -> Result<OvrOutcome, MetricsError> {
    if y_true.len() != scores.nrows() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            predictions: scores.nrows(),
        });
    }
    let k = scores.ncols();
    if let Some(&bad) = y_true.iter().find(|&&t| t >= k) {
        return Err(MetricsError::LabelOutOfRange { label: bad, n_classes: k });
    }
    let mut per_class = vec![None; k];
    let mut skipped = Vec::new();
    let (mut acc, mut used) = (0.0, 0usize);
    for c in 0..k {
        let labels: Vec<bool> = y_true.iter().map(|&t| t == c).collect();
        let n_pos = labels.iter().filter(|&&l| l).count();
        if n_pos == 0 || n_pos == labels.len() {
            skipped.push(c);
            continue;
        }
        let col: Vec<f64> = scores.column(c).to_vec();
        let v = f(&labels, &col);
        per_class[c] = Some(v);
        acc += v;
        used += 1;
    }
    if used == 0 {
        return Err(MetricsError::AllOneClass);
    }
    Ok(OvrOutcome { macro_value: acc / used as f64, per_class, skipped })
}

/// Macro one-vs-rest AUROC. `scores` is n×K.
pub fn auroc_ovr(y_true: &[usize], scores: ArrayView2<f64>) -> Result<OvrOutcome, MetricsError> {
    ovr_sweep(y_true, scores, auroc_binary)
}

/// Macro one-vs-rest AUPRC (average precision).
pub fn auprc_ovr(y_true: &[usize], scores: ArrayView2<f64>) -> Result<OvrOutcome, MetricsError> {
    ovr_sweep(y_true, scores, average_precision_binary)
}

/// The full evaluation report. Fractions in `[0,1]` internally; the text
/// rendering multiplies by 100.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_auroc: f64,
    pub macro_auprc: f64,
    pub per_class: Vec<PerClassMetrics>,
    pub confusion: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
    /// Classes skipped by the one-vs-rest sweeps (no positives or negatives).
    pub ovr_skipped_classes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub never_predicted: bool,
}

/// Builds the complete report from ground truth, hard predictions and the
/// n×K score matrix.
pub fn evaluate(
    y_true: &[usize],
    y_pred: &[usize],
    scores: ArrayView2<f64>,
    class_names: &[String],
) -> Result<MetricsReport, MetricsError> {
    let k = class_names.len();
    let confusion = confusion_matrix(y_true, y_pred, k)?;
    let (macro_p, macro_r, macro_f1, prf) = macro_prf(confusion.view());
    let auroc = auroc_ovr(y_true, scores)?;
    let auprc = auprc_ovr(y_true, scores)?;

    let per_class = (0..k)
        .map(|c| PerClassMetrics {
            class: class_names[c].clone(),
            precision: prf[c].precision,
            recall: prf[c].recall,
            f1: prf[c].f1,
            auroc: auroc.per_class[c],
            auprc: auprc.per_class[c],
            never_predicted: prf[c].never_predicted,
        })
        .collect();

    Ok(MetricsReport {
        accuracy: accuracy(confusion.view()),
        macro_precision: macro_p,
        macro_recall: macro_r,
        macro_f1,
        macro_auroc: auroc.macro_value,
        macro_auprc: auprc.macro_value,
        per_class,
        confusion: confusion.rows().into_iter().map(|r| r.to_vec()).collect(),
        class_names: class_names.to_vec(),
        ovr_skipped_classes: auroc.skipped,
    })
}

impl MetricsReport {
    /// Percentages with two decimals, one row of macro metrics plus the
    /// confusion matrix (rows = ground truth).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let pct = |v: f64| format!("{:.2}", v * 100.0);
        writeln!(s, "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8}", "Acc", "Prec", "Rec", "F1", "AUROC", "AUPRC")
            .unwrap();
        writeln!(
            s,
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8}",
            pct(self.accuracy),
            pct(self.macro_precision),
            pct(self.macro_recall),
            pct(self.macro_f1),
            pct(self.macro_auroc),
            pct(self.macro_auprc)
        )
        .unwrap();
        writeln!(s).unwrap();
        writeln!(s, "Per class:").unwrap();
        for pc in &self.per_class {
            let auroc = pc.auroc.map(&pct).unwrap_or_else(|| "--".into());
            let auprc = pc.auprc.map(&pct).unwrap_or_else(|| "--".into());
            let flag = if pc.never_predicted { "  [never predicted]" } else { "" };
            writeln!(
                s,
                "  {:<12} P={:>6} R={:>6} F1={:>6} AUROC={:>6} AUPRC={:>6}{flag}",
                pc.class,
                pct(pc.precision),
                pct(pc.recall),
                pct(pc.f1),
                auroc,
                auprc
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "Confusion (rows = ground truth, columns = predicted):").unwrap();
        let name_w = self.class_names.iter().map(String::len).max().unwrap_or(4).max(4);
        write!(s, "  {:<w$}", "", w = name_w).unwrap();
        for name in &self.class_names {
            write!(s, " {name:>8}").unwrap();
        }
        writeln!(s).unwrap();
        for (i, row) in self.confusion.iter().enumerate() {
            write!(s, "  {:<w$}", self.class_names[i], w = name_w).unwrap();
            for v in row {
                write!(s, " {v:>8}").unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }

    /// Confusion matrix as CSV (header row of predicted class names).
    pub fn confusion_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "truth\\predicted,{}", self.class_names.join(",")).unwrap();
        for (i, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(s, "{},{}", self.class_names[i], cells.join(",")).unwrap();
        }
        s
    }
}
