//! AIPW estimation of the average treatment effect with a raw, synthetic or
//! bias-corrected propensity model.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::linalg::{cholesky, cholesky_solve};
use crate::loss::{augment, AugmentOptions, AugmentedTrainSet, Objective};
use crate::model::{design, fit, LogisticModel, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CausalDataset {
    pub x: Array2<f64>,
    pub z: Vec<u8>,
    pub y_obs: Vec<f64>,
}

impl CausalDataset {
    pub fn new(x: Array2<f64>, z: Vec<u8>, y_obs: Vec<f64>) -> Result<Self> {
        if x.nrows() != z.len() || z.len() != y_obs.len() {
            return Err(Error::InvalidCausal(format!("lengths differ: x {}, z {}, y {}", x.nrows(), z.len(), y_obs.len())));
        }
        if z.iter().any(|&v| v > 1) {
            return Err(Error::InvalidCausal("treatment must be 0 or 1".into()));
        }
        let n1 = z.iter().filter(|&&v| v == 1).count();
        if n1 == 0 || n1 == z.len() {
            return Err(Error::InvalidCausal("both arms need at least one sample".into()));
        }
        Ok(CausalDataset { x, z, y_obs })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn arm(&self, a: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.z[i] == a).collect()
    }

    /// Covariates with the treatment indicator as label.
    pub fn treatment_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.x.clone(), self.z.clone())
    }
}

/// Per-arm linear outcome models; the intercept is the last coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModels {
    pub beta1: Array1<f64>,
    pub beta0: Array1<f64>,
}

impl OutcomeModels {
    pub fn predict(&self, arm: u8, x: ArrayView2<f64>) -> Array1<f64> {
        let b = if arm == 1 { &self.beta1 } else { &self.beta0 };
        design(x, true).dot(b)
    }
}

/// Least squares with intercept via the normal equations.
pub fn ols(x: ArrayView2<f64>, y: &[f64]) -> Result<Array1<f64>> {
    if x.nrows() < x.ncols() + 1 {
        return Err(Error::SingularDesign);
    }
    let a = design(x, true);
    let ata = a.t().dot(&a);
    let aty = a.t().dot(&Array1::from(y.to_vec()));
    let l = cholesky(ata.view(), 1e-10).ok_or(Error::SingularDesign)?;
    Ok(cholesky_solve(l.view(), aty.view()))
}

pub fn fit_outcome_models(cd: &CausalDataset) -> Result<OutcomeModels> {
    let fit_arm = |a: u8| {
        let idx = cd.arm(a);
        let y: Vec<f64> = idx.iter().map(|&i| cd.y_obs[i]).collect();
        ols(cd.x.select(Axis(0), &idx).view(), &y)
    };
    Ok(OutcomeModels { beta1: fit_arm(1)?, beta0: fit_arm(0)? })
}

/// Propensity model with treatment as the positive label.
///
/// With `recalibrate`, the intercept of a syn/bc fit is shifted by
/// `-ln((n1 + ñ1) / n1)`, mapping the rebalanced odds back to the observed
/// treatment prevalence. Requires `cfg.intercept`.
pub fn fit_propensity<R: Rng + ?Sized>(
    cd: &CausalDataset,
    variant: Objective,
    gen: &Generator,
    opts: &AugmentOptions,
    cfg: &TrainConfig,
    recalibrate: bool,
    rng: &mut R,
) -> Result<LogisticModel> {
    let data = cd.treatment_dataset()?;
    let aug = match variant {
        Objective::Raw => AugmentedTrainSet::raw_only(data),
        _ => augment(&data, gen, opts, rng)?,
    };
    fit_propensity_on(&aug, variant, cfg, recalibrate)
}

/// As [`fit_propensity`] on a prebuilt augmentation.
pub fn fit_propensity_on(aug: &AugmentedTrainSet, variant: Objective, cfg: &TrainConfig, recalibrate: bool) -> Result<LogisticModel> {
    let mut model = fit(variant, aug, cfg)?.model;
    if recalibrate && variant != Objective::Raw && aug.n1_syn() > 0 {
        if !cfg.intercept {
            return Err(Error::Config("propensity recalibration needs an intercept".into()));
        }
        let n1 = aug.raw.n1() as f64;
        let shift = ((n1 + aug.n1_syn() as f64) / n1).ln();
        let last = model.beta.len() - 1;
        model.beta[last] -= shift;
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AipwResult {
    pub tau_hat: f64,
    pub mu1_hat_bar: f64,
    pub mu0_hat_bar: f64,
    pub propensity_variant: Objective,
    pub clip_eta: f64,
}

/// AIPW with propensities clamped to `[clip_eta, 1 - clip_eta]`.
pub fn aipw(
    cd: &CausalDataset,
    mu1: &[f64],
    mu0: &[f64],
    e: &[f64],
    clip_eta: f64,
    variant: Objective,
) -> Result<AipwResult> {
    if !(clip_eta > 0.0 && clip_eta < 0.5) {
        return Err(Error::BadClip(clip_eta));
    }
    let n = cd.n();
    for len in [mu1.len(), mu0.len(), e.len()] {
        if len != n {
            return Err(Error::LengthMismatch { left: len, right: n });
        }
    }
    let (mut s1, mut s0) = (0.0, 0.0);
    for i in 0..n {
        let ei = e[i].clamp(clip_eta, 1.0 - clip_eta);
        let z = cd.z[i] as f64;
        let y = cd.y_obs[i];
        s1 += z * (y - mu1[i]) / ei + mu1[i];
        s0 += (1.0 - z) * (y - mu0[i]) / (1.0 - ei) + mu0[i];
    }
    let mu1_hat_bar = s1 / n as f64;
    let mu0_hat_bar = s0 / n as f64;
    Ok(AipwResult { tau_hat: mu1_hat_bar - mu0_hat_bar, mu1_hat_bar, mu0_hat_bar, propensity_variant: variant, clip_eta })
}

/// Full pipeline: OLS outcome models, propensity fit, AIPW.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ate<R: Rng + ?Sized>(
    cd: &CausalDataset,
    variant: Objective,
    gen: &Generator,
    opts: &AugmentOptions,
    cfg: &TrainConfig,
    clip_eta: f64,
    recalibrate: bool,
    rng: &mut R,
) -> Result<AipwResult> {
    let om = fit_outcome_models(cd)?;
    let e = fit_propensity(cd, variant, gen, opts, cfg, recalibrate, rng)?.predict_batch(cd.x.view())?;
    let mu1 = om.predict(1, cd.x.view());
    let mu0 = om.predict(0, cd.x.view());
    aipw(cd, mu1.as_slice().unwrap(), mu0.as_slice().unwrap(), e.as_slice().unwrap(), clip_eta, variant)
}
