//! Multi-task estimation of a shared coefficient subspace.
//!
//! Each task is fitted on its own; the slope vectors are stacked into
//! `M̂ (d × K)`, the leading eigenvectors of `M̂M̂ᵀ` give the shared
//! subspace, and the rank is picked by the largest eigenvalue ratio.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::linalg::jacobi_eigh;
use crate::loss::{augment, AugmentOptions, AugmentedTrainSet, Objective};
use crate::model::{fit, LogisticModel, TrainConfig};
use crate::rng::seeded;

/// Tasks sharing a covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCollection {
    pub tasks: Vec<Dataset>,
}

impl TaskCollection {
    pub fn new(tasks: Vec<Dataset>) -> Result<Self> {
        let d = tasks.first().ok_or_else(|| Error::InvalidDataset("no tasks".into()))?.d();
        for t in &tasks {
            if t.d() != d {
                return Err(Error::DimMismatch { expected: d, got: t.d() });
            }
        }
        Ok(TaskCollection { tasks })
    }

    pub fn d(&self) -> usize {
        self.tasks[0].d()
    }

    pub fn k(&self) -> usize {
        self.tasks.len()
    }
}

/// Fits one task; the augmentation uses `seed`, so every objective sees the
/// same synthetic sets for a given seed.
pub fn fit_task(
    data: &Dataset,
    objective: Objective,
    gen: &Generator,
    opts: &AugmentOptions,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LogisticModel> {
    let aug = match objective {
        Objective::Raw => AugmentedTrainSet::raw_only(data.clone()),
        _ => augment(data, gen, opts, &mut seeded(seed))?,
    };
    Ok(fit(objective, &aug, cfg)?.model)
}

/// Stacks per-task slope estimates into `M̂`; column `k` uses `seeds[k]`.
pub fn fit_all_tasks(
    tasks: &TaskCollection,
    objective: Objective,
    gen: &Generator,
    opts: &AugmentOptions,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Array2<f64>> {
    if seeds.len() != tasks.k() {
        return Err(Error::LengthMismatch { left: seeds.len(), right: tasks.k() });
    }
    let cols: Vec<Array1<f64>> = tasks
        .tasks
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(k, (t, &seed))| {
            fit_task(t, objective, gen, opts, cfg, seed).map(|m| m.slopes().to_owned()).map_err(|e| e.in_task(k))
        })
        .collect::<Result<_>>()?;
    let mut m = Array2::zeros((tasks.d(), tasks.k()));
    for (k, c) in cols.iter().enumerate() {
        m.column_mut(k).assign(c);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRecord", into = "SubspaceRecord")]
pub struct SharedSubspace {
    pub u_hat: Array2<f64>,
    pub r_hat: usize,
    /// All eigenvalues of `M̂M̂ᵀ`, descending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubspaceRecord {
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    r_hat: usize,
    eigenvalues: Vec<f64>,
}

impl TryFrom<SubspaceRecord> for SharedSubspace {
    type Error = Error;

    fn try_from(r: SubspaceRecord) -> Result<Self> {
        let d = r.u.len();
        if d == 0 || r.u.iter().any(|row| row.len() != r.r_hat) {
            return Err(Error::InvalidDataset("subspace rows must all have r_hat entries".into()));
        }
        let flat: Vec<f64> = r.u.into_iter().flatten().collect();
        let u_hat = Array2::from_shape_vec((d, r.r_hat), flat).map_err(|e| Error::InvalidDataset(e.to_string()))?;
        Ok(SharedSubspace { u_hat, r_hat: r.r_hat, eigenvalues: r.eigenvalues })
    }
}

impl From<SharedSubspace> for SubspaceRecord {
    fn from(s: SharedSubspace) -> Self {
        SubspaceRecord {
            u: s.u_hat.rows().into_iter().map(|r| r.to_vec()).collect(),
            r_hat: s.r_hat,
            eigenvalues: s.eigenvalues,
        }
    }
}

const TINY: f64 = 1e-300;

/// Picks `argmax_{1 <= r <= d_minus} λ_r / λ_{r+1}` (ties to the smaller r).
/// A vanishing denominator under a nonzero numerator counts as an infinite
/// ratio; `0/0` is skipped.
pub fn select_rank(eigenvalues: &[f64], d_minus: usize) -> Result<usize> {
    if !eigenvalues.first().is_some_and(|&l| l >= TINY) {
        return Err(Error::DegenerateSpectrum);
    }
    let mut best = (1usize, f64::NEG_INFINITY);
    for r in 1..=d_minus {
        let (num, den) = (eigenvalues[r - 1], eigenvalues[r]);
        let ratio = if den < TINY {
            if num < TINY {
                continue;
            }
            f64::INFINITY
        } else {
            num / den
        };
        if ratio > best.1 {
            best = (r, ratio);
        }
    }
    Ok(best.0)
}

pub fn default_d_minus(d: usize, k: usize) -> usize {
    (d.min(k).saturating_sub(1)).max(1)
}

pub fn estimate_subspace(m_hat: ArrayView2<f64>, d_minus: Option<usize>) -> Result<SharedSubspace> {
    let (d, k) = m_hat.dim();
    if m_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let dm = d_minus.unwrap_or_else(|| default_d_minus(d, k));
    if dm < 1 || dm > d.min(k).max(1) || dm >= d {
        return Err(Error::RankCapTooLarge { d_minus: dm, d, k });
    }
    let eig = jacobi_eigh(m_hat.dot(&m_hat.t()).view());
    let eigenvalues: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let r_hat = select_rank(&eigenvalues, dm)?;
    Ok(SharedSubspace { u_hat: eig.vectors.slice(s![.., ..r_hat]).to_owned(), r_hat, eigenvalues })
}

/// Leading `r` eigenvectors of `M̂M̂ᵀ`, regardless of the selected rank.
pub fn leading_subspace(m_hat: ArrayView2<f64>, r: usize) -> Array2<f64> {
    let eig = jacobi_eigh(m_hat.dot(&m_hat.t()).view());
    eig.vectors.slice(s![.., ..r]).to_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFit {
    pub theta: Array1<f64>,
    /// `Ûθ̂`, in the original covariate space.
    pub beta: Array1<f64>,
    /// Predictor on original covariates, with the fitted intercept if any.
    pub model: LogisticModel,
}

/// Fits a new task in the projected coordinates `Ûᵀx` and maps the
/// coefficients back.
pub fn transfer_fit<R: Rng + ?Sized>(
    new_task: &Dataset,
    subspace: &SharedSubspace,
    objective: Objective,
    gen: &Generator,
    opts: &AugmentOptions,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TransferFit> {
    if subspace.u_hat.nrows() != new_task.d() {
        return Err(Error::DimMismatch { expected: new_task.d(), got: subspace.u_hat.nrows() });
    }
    let z = Dataset::new(new_task.x.dot(&subspace.u_hat), new_task.y.clone())?;
    let aug = match objective {
        Objective::Raw => AugmentedTrainSet::raw_only(z),
        _ => augment(&z, gen, opts, rng)?,
    };
    let fitted = fit(objective, &aug, cfg)?.model;
    let theta = fitted.slopes().to_owned();
    let beta = subspace.u_hat.dot(&theta);
    let mut full = beta.to_vec();
    if cfg.intercept {
        full.push(fitted.bias());
    }
    let model = LogisticModel::new(Array1::from(full), cfg.intercept);
    Ok(TransferFit { theta, beta, model })
}

/// Mean of per-task squared errors between columns of two matrices.
pub fn mean_column_sq_error(m_hat: ArrayView2<f64>, m_true: ArrayView2<f64>) -> f64 {
    let diff = &m_hat - &m_true;
    diff.map_axis(Axis(0), |c| c.dot(&c)).mean().unwrap_or(0.0)
}
