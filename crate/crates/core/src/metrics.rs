//! Classification and estimation metrics.
//!
//! A metric whose denominator vanishes is reported as 0 and the report's
//! `degenerate` flag is raised. Accuracy is always defined.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            _ => return Err(Error::BadLabel { row: 0, value: format!("({t}, {p})") }),
        }
    }
    Ok(cm)
}

/// Column order of [`MetricReport::csv_fields`].
pub const METRIC_COLUMNS: [&str; 9] =
    ["recall", "precision", "f_beta", "f1", "jaccard", "mcc", "fowlkes_mallows", "accuracy", "beta"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub recall: f64,
    pub precision: f64,
    pub f_beta: f64,
    pub f1: f64,
    pub jaccard: f64,
    pub mcc: f64,
    pub fowlkes_mallows: f64,
    pub accuracy: f64,
    pub beta: f64,
    pub degenerate: bool,
}

impl MetricReport {
    pub fn csv_fields(&self) -> [f64; 9] {
        [
            self.recall,
            self.precision,
            self.f_beta,
            self.f1,
            self.jaccard,
            self.mcc,
            self.fowlkes_mallows,
            self.accuracy,
            self.beta,
        ]
    }

    /// Looks a metric up by its column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_COLUMNS.iter().position(|c| *c == name).map(|i| self.csv_fields()[i])
    }
}

fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den == 0.0 {
        *degenerate = true;
        0.0
    } else {
        num / den
    }
}

fn f_score(p: f64, r: f64, beta: f64, degenerate: &mut bool) -> f64 {
    let b2 = beta * beta;
    ratio((1.0 + b2) * p * r, b2 * p + r, degenerate)
}

pub fn compute_metrics(cm: &ConfusionMatrix, beta: f64) -> Result<MetricReport> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::BadBeta(beta));
    }
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let mut degenerate = false;
    let recall = ratio(tp, tp + fn_, &mut degenerate);
    let precision = ratio(tp, tp + fp, &mut degenerate);
    let f_beta = f_score(precision, recall, beta, &mut degenerate);
    let f1 = f_score(precision, recall, 1.0, &mut degenerate);
    let jaccard = ratio(tp, tp + fp + fn_, &mut degenerate);
    let mcc_den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, mcc_den, &mut degenerate).clamp(-1.0, 1.0);
    let fowlkes_mallows = (precision * recall).sqrt();
    let total = cm.total() as f64;
    let accuracy = if total == 0.0 { 0.0 } else { (tp + tn) / total };
    Ok(MetricReport { recall, precision, f_beta, f1, jaccard, mcc, fowlkes_mallows, accuracy, beta, degenerate })
}

/// Squared Euclidean error `‖β̂ − β‖²`.
pub fn beta_mse(beta_hat: ArrayView1<f64>, beta_true: ArrayView1<f64>) -> Result<f64> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::DimMismatch { expected: beta_true.len(), got: beta_hat.len() });
    }
    Ok(beta_hat.iter().zip(beta_true).map(|(a, b)| (a - b) * (a - b)).sum())
}

fn orthonormality_gap(u: ArrayView2<f64>) -> f64 {
    let g = u.t().dot(&u);
    let mut worst = 0.0f64;
    for ((i, j), v) in g.indexed_iter() {
        let want = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((v - want).abs());
    }
    worst
}

/// Frobenius sin-Θ distance `sqrt(r − ‖UᵀÛ‖_F²)`, clamped at 0.
pub fn sin_theta_distance(u_hat: ArrayView2<f64>, u: ArrayView2<f64>) -> Result<f64> {
    if u_hat.dim() != u.dim() {
        return Err(Error::ShapeMismatch(u_hat.dim(), u.dim()));
    }
    for m in [u_hat, u] {
        let gap = orthonormality_gap(m);
        if gap > 1e-8 {
            return Err(Error::NotOrthonormal(gap));
        }
    }
    let c = u.t().dot(&u_hat);
    let fro2: f64 = c.iter().map(|v| v * v).sum();
    Ok((u.ncols() as f64 - fro2).max(0.0).sqrt())
}
