//! Logistic model and a full-batch gradient-descent trainer for the raw,
//! synthetic and bias-corrected objectives.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{bce, AugmentedTrainSet, Objective};
use crate::rng::seeded;

/// Numerically stable logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `σ(xᵀβ)`; with `intercept` the last coefficient multiplies a constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct LogisticModel {
    pub beta: Array1<f64>,
    pub intercept: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    beta: Vec<f64>,
    intercept: bool,
}

impl TryFrom<ModelRecord> for LogisticModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        let min = 1 + usize::from(r.intercept);
        if r.beta.len() < min || r.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidDataset("model record needs finite coefficients for at least one feature".into()));
        }
        Ok(LogisticModel { beta: Array1::from(r.beta), intercept: r.intercept })
    }
}

impl From<LogisticModel> for ModelRecord {
    fn from(m: LogisticModel) -> Self {
        ModelRecord { beta: m.beta.to_vec(), intercept: m.intercept }
    }
}

impl LogisticModel {
    pub fn new(beta: Array1<f64>, intercept: bool) -> Self {
        LogisticModel { beta, intercept }
    }

    /// All-zero coefficients for `d` features.
    pub fn zeros(d: usize, intercept: bool) -> Self {
        LogisticModel { beta: Array1::zeros(d + usize::from(intercept)), intercept }
    }

    pub fn n_features(&self) -> usize {
        self.beta.len() - usize::from(self.intercept)
    }

    pub fn slopes(&self) -> ArrayView1<'_, f64> {
        self.beta.slice(s![..self.n_features()])
    }

    pub fn bias(&self) -> f64 {
        if self.intercept {
            self.beta[self.beta.len() - 1]
        } else {
            0.0
        }
    }

    pub fn linear(&self, x: ArrayView1<f64>) -> Result<f64> {
        let d = self.n_features();
        if x.len() != d {
            return Err(Error::DimMismatch { expected: d, got: x.len() });
        }
        Ok(x.dot(&self.slopes()) + self.bias())
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(sigmoid(self.linear(x)?))
    }

    pub fn linear_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let d = self.n_features();
        if x.ncols() != d {
            return Err(Error::DimMismatch { expected: d, got: x.ncols() });
        }
        Ok(x.dot(&self.slopes()) + self.bias())
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.linear_batch(x)?.mapv(sigmoid))
    }

    /// Appends the constant column when the model has an intercept.
    pub fn design(&self, x: ArrayView2<f64>) -> Array2<f64> {
        design(x, self.intercept)
    }
}

pub(crate) fn design(x: ArrayView2<f64>, intercept: bool) -> Array2<f64> {
    if intercept {
        concatenate![Axis(1), x, Array2::ones((x.nrows(), 1))]
    } else {
        x.to_owned()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::BadThreshold(threshold))
    }
}

/// 1 iff `predict(x) >= threshold`.
pub fn classify(model: &LogisticModel, x: ArrayView1<f64>, threshold: f64) -> Result<u8> {
    check_threshold(threshold)?;
    Ok(u8::from(model.predict(x)? >= threshold))
}

pub fn classify_batch(model: &LogisticModel, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
    check_threshold(threshold)?;
    Ok(model.predict_batch(x)?.iter().map(|&p| u8::from(p >= threshold)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// `N(0, sd²)` entries from a dedicated seed.
    Gaussian { seed: u64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub init: Init,
    pub grad_tol: Option<f64>,
    /// Ridge penalty `l2/2 ‖β‖²` on the slopes.
    pub l2: f64,
    pub intercept: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 100, learning_rate: 0.1, init: Init::Zeros, grad_tol: None, l2: 0.0, intercept: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::BadTrainConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::BadTrainConfig(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::BadTrainConfig(format!("l2 {} is negative", self.l2)));
        }
        Ok(())
    }

    pub fn initial(&self, d: usize) -> LogisticModel {
        let mut m = LogisticModel::zeros(d, self.intercept);
        if let Init::Gaussian { seed, sd } = self.init {
            let mut rng = seeded(seed);
            m.beta.mapv_inplace(|_| sd * rng.sample::<f64, _>(StandardNormal));
        }
        m
    }
}

/// Design matrices of one objective, built once per fit.
struct Problem {
    objective: Objective,
    intercept: bool,
    x: Array2<f64>,
    y: Array1<f64>,
    labels: Vec<u8>,
    s1: Array2<f64>,
    c: Array2<f64>,
    s0: Array2<f64>,
}

impl Problem {
    fn new(objective: Objective, aug: &AugmentedTrainSet, intercept: bool) -> Result<Self> {
        let d = aug.raw.d();
        let empty = || Array2::zeros((0, d + usize::from(intercept)));
        let x = design(aug.raw.x.view(), intercept);
        let y = aug.raw.y.iter().map(|&v| v as f64).collect();
        let (s1, c, s0) = match objective {
            Objective::Raw => (empty(), empty(), empty()),
            Objective::Syn => (design(aug.syn_minority.view(), intercept), empty(), empty()),
            Objective::Bc => {
                if aug.n1_syn() == 0 {
                    (empty(), empty(), empty())
                } else {
                    if aug.partition.correction_idx.is_empty() {
                        return Err(Error::EmptyCorrectionSet);
                    }
                    if aug.n0_syn() == 0 {
                        return Err(Error::EmptySynthetic);
                    }
                    (
                        design(aug.syn_minority.view(), intercept),
                        design(aug.correction_rows().view(), intercept),
                        design(aug.syn_majority.view(), intercept),
                    )
                }
            }
        };
        Ok(Problem { objective, intercept, x, y, labels: aug.raw.y.clone(), s1, c, s0 })
    }

    fn denom(&self) -> f64 {
        (self.x.nrows() + self.s1.nrows()) as f64
    }

    fn value(&self, beta: &Array1<f64>, l2: f64) -> Result<f64> {
        let sum = |x: &Array2<f64>, label: u8| -> Result<f64> {
            x.dot(beta).iter().try_fold(0.0, |acc, &t| Ok(acc + bce(sigmoid(t), label)?))
        };
        let p = self.x.dot(beta);
        let mut raw = 0.0;
        for (&t, &y) in p.iter().zip(&self.labels) {
            raw += bce(sigmoid(t), y)?;
        }
        let mut total = raw + sum(&self.s1, 1)?;
        if self.objective == Objective::Bc && self.s1.nrows() > 0 {
            let n1t = self.s1.nrows() as f64;
            let d0 = sum(&self.c, 0)? / self.c.nrows() as f64 - sum(&self.s0, 0)? / self.s0.nrows() as f64;
            total += n1t * d0;
        }
        Ok(total / self.denom() + 0.5 * l2 * self.penalised(beta).dot(&self.penalised(beta)))
    }

    fn penalised(&self, beta: &Array1<f64>) -> Array1<f64> {
        let mut b = beta.clone();
        if self.intercept {
            let last = b.len() - 1;
            b[last] = 0.0;
        }
        b
    }

    fn gradient(&self, beta: &Array1<f64>, l2: f64) -> Array1<f64> {
        let resid = self.x.dot(beta).mapv(sigmoid) - &self.y;
        let mut g = self.x.t().dot(&resid);
        if self.s1.nrows() > 0 {
            g += &self.s1.t().dot(&(self.s1.dot(beta).mapv(sigmoid) - 1.0));
        }
        if self.objective == Objective::Bc && self.s1.nrows() > 0 {
            let n1t = self.s1.nrows() as f64;
            let gc = self.c.t().dot(&self.c.dot(beta).mapv(sigmoid)) / self.c.nrows() as f64;
            let gs = self.s0.t().dot(&self.s0.dot(beta).mapv(sigmoid)) / self.s0.nrows() as f64;
            g += &((gc - gs) * n1t);
        }
        g / self.denom() + self.penalised(beta) * l2
    }
}

/// Exact gradient of the chosen objective at `model`.
pub fn grad_loss(objective: Objective, model: &LogisticModel, aug: &AugmentedTrainSet) -> Result<Array1<f64>> {
    if model.n_features() != aug.raw.d() {
        return Err(Error::DimMismatch { expected: aug.raw.d(), got: model.n_features() });
    }
    Ok(Problem::new(objective, aug, model.intercept)?.gradient(&model.beta, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: LogisticModel,
    /// Objective value before each step, then after the last one.
    pub losses: Vec<f64>,
    pub epochs_run: usize,
}

pub fn fit(objective: Objective, aug: &AugmentedTrainSet, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    let problem = Problem::new(objective, aug, cfg.intercept)?;
    let mut model = cfg.initial(aug.raw.d());
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs {
        let value = problem.value(&model.beta, cfg.l2)?;
        if !value.is_finite() {
            return Err(Error::DivergedToNonFinite { epoch });
        }
        losses.push(value);
        let g = problem.gradient(&model.beta, cfg.l2);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedToNonFinite { epoch });
        }
        if let Some(tol) = cfg.grad_tol {
            if g.dot(&g).sqrt() < tol {
                break;
            }
        }
        model.beta.scaled_add(-cfg.learning_rate, &g);
        epochs_run += 1;
    }
    let value = problem.value(&model.beta, cfg.l2)?;
    if !value.is_finite() || model.beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::DivergedToNonFinite { epoch: epochs_run });
    }
    losses.push(value);
    Ok(FitResult { model, losses, epochs_run })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::generators::{Generator, SmoteParams};
    use crate::loss::{augment, objective_value, AugmentOptions};
    use approx::assert_relative_eq;
    use ndarray::array;

    fn aug_fixture(seed: u64, intercept: bool) -> (LogisticModel, AugmentedTrainSet) {
        let mut r = seeded(seed);
        let n = 30;
        let x = Array2::from_shape_simple_fn((n, 3), || r.sample::<f64, _>(StandardNormal));
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 4 == 0)).collect();
        let raw = Dataset::new(x, y).unwrap();
        let aug = augment(&raw, &Generator::Smote(SmoteParams { k: 3 }), &AugmentOptions::default(), &mut r).unwrap();
        let mut m = LogisticModel::zeros(3, intercept);
        m.beta.mapv_inplace(|_| 0.7 * r.sample::<f64, _>(StandardNormal));
        (m, aug)
    }

    #[test]
    fn predict_examples() {
        let m = LogisticModel::zeros(2, false);
        assert_eq!(m.predict(array![3.0, -1.0].view()).unwrap(), 0.5);
        let m = LogisticModel::new(array![3f64.ln()], false);
        assert_relative_eq!(m.predict(array![1.0].view()).unwrap(), 0.75, epsilon = 1e-15);
        let m = LogisticModel::new(array![1.0], false);
        let p = m.predict(array![-700.0].view()).unwrap();
        assert!(p > 0.0 && p.is_finite());
        assert_relative_eq!(p, (-700f64).exp(), max_relative = 1e-12);
        assert!(matches!(m.predict(array![1.0, 2.0].view()), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn intercept_is_last() {
        let m = LogisticModel::new(array![2.0, -1.0], true);
        assert_eq!(m.n_features(), 1);
        assert_eq!(m.linear(array![3.0].view()).unwrap(), 5.0);
        assert_eq!(m.design(array![[3.0]].view()), array![[3.0, 1.0]]);
    }

    #[test]
    fn classify_examples() {
        let m = LogisticModel::zeros(1, false);
        assert_eq!(classify(&m, array![5.0].view(), 0.5).unwrap(), 1);
        assert_eq!(classify_batch(&m, array![[1.0], [-4.0]].view(), 0.5).unwrap(), vec![1, 1]);
        assert!(matches!(classify(&m, array![5.0].view(), 1.0 + 1e-9), Err(Error::BadThreshold(_))));
        assert!(classify(&m, array![5.0].view(), -0.1).is_err());
    }

    #[test]
    fn gradient_zero_on_symmetric_fixture() {
        let raw = Dataset::new(array![[1.0], [1.0], [-1.0], [-1.0]], vec![1, 0, 1, 0]).unwrap();
        let aug = AugmentedTrainSet::raw_only(raw);
        let g = grad_loss(Objective::Raw, &LogisticModel::zeros(1, false), &aug).unwrap();
        assert_eq!(g, array![0.0]);
    }

    #[test]
    fn gradient_constant_covariate() {
        let raw = Dataset::new(Array2::ones((4, 3)), vec![1; 4]).unwrap();
        let g = grad_loss(Objective::Raw, &LogisticModel::zeros(3, false), &AugmentedTrainSet::raw_only(raw)).unwrap();
        assert_eq!(g, array![-0.5, -0.5, -0.5]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            for intercept in [false, true] {
                let (m, aug) = aug_fixture(seed, intercept);
                for obj in Objective::ALL {
                    let g = grad_loss(obj, &m, &aug).unwrap();
                    for j in 0..m.beta.len() {
                        let h = 1e-6;
                        let (mut a, mut b) = (m.clone(), m.clone());
                        a.beta[j] += h;
                        b.beta[j] -= h;
                        let fd = (objective_value(obj, &a, &aug).unwrap() - objective_value(obj, &b, &aug).unwrap()) / (2.0 * h);
                        assert_relative_eq!(g[j], fd, max_relative = 1e-5, epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn trainer_value_matches_loss_module() {
        let (_, aug) = aug_fixture(3, true);
        let cfg = TrainConfig { intercept: true, epochs: 7, ..TrainConfig::default() };
        for obj in Objective::ALL {
            let r = fit(obj, &aug, &cfg).unwrap();
            assert_eq!(r.losses.len(), 8);
            assert_relative_eq!(*r.losses.last().unwrap(), objective_value(obj, &r.model, &aug).unwrap(), max_relative = 1e-13);
        }
    }

    #[test]
    fn separable_fixture() {
        let mut xs = Vec::new();
        let mut y = Vec::new();
        for _ in 0..50 {
            xs.extend([-1.0, 1.0]);
            y.extend([0, 1]);
        }
        let raw = Dataset::new(Array2::from_shape_vec((100, 1), xs).unwrap(), y.clone()).unwrap();
        let r = fit(Objective::Raw, &AugmentedTrainSet::raw_only(raw.clone()), &TrainConfig::default()).unwrap();
        assert_eq!(classify_batch(&r.model, raw.x.view(), 0.5).unwrap(), y);
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let (_, aug) = aug_fixture(1, false);
        let cfg = TrainConfig { learning_rate: 0.0, init: Init::Gaussian { seed: 4, sd: 0.01 }, ..TrainConfig::default() };
        let r = fit(Objective::Bc, &aug, &cfg).unwrap();
        assert_eq!(r.model, cfg.initial(3));
        assert_ne!(r.model.beta, Array1::<f64>::zeros(3));
    }

    #[test]
    fn reductions_are_bit_exact() {
        let (_, mut aug) = aug_fixture(2, false);
        let cfg = TrainConfig::default();
        let mut no_syn = aug.clone();
        no_syn.syn_minority = Array2::zeros((0, 3));
        assert_eq!(fit(Objective::Syn, &no_syn, &cfg).unwrap().model, fit(Objective::Raw, &aug, &cfg).unwrap().model);

        aug.syn_majority = aug.correction_rows();
        let syn = fit(Objective::Syn, &aug, &cfg).unwrap().model;
        let bc = fit(Objective::Bc, &aug, &cfg).unwrap().model;
        assert_eq!(syn, bc);
    }

    #[test]
    fn monotone_at_small_rate() {
        let (_, aug) = aug_fixture(9, true);
        let cfg = TrainConfig { learning_rate: 0.01, intercept: true, ..TrainConfig::default() };
        for obj in [Objective::Raw, Objective::Syn] {
            let r = fit(obj, &aug, &cfg).unwrap();
            assert!(r.losses.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn grad_tol_stops_early() {
        let raw = Dataset::new(array![[1.0], [-1.0]], vec![1, 0]).unwrap();
        let cfg = TrainConfig { grad_tol: Some(1e-3), ..TrainConfig::default() };
        let sym = Dataset::new(array![[1.0], [1.0]], vec![1, 0]).unwrap();
        assert_eq!(fit(Objective::Raw, &AugmentedTrainSet::raw_only(sym), &cfg).unwrap().epochs_run, 0);
        assert_eq!(fit(Objective::Raw, &AugmentedTrainSet::raw_only(raw), &cfg).unwrap().epochs_run, 100);
    }

    #[test]
    fn divergence_is_reported() {
        let raw = Dataset::new(array![[1e300], [-1e300]], vec![1, 0]).unwrap();
        let cfg = TrainConfig { learning_rate: 1e10, ..TrainConfig::default() };
        assert!(matches!(fit(Objective::Raw, &AugmentedTrainSet::raw_only(raw), &cfg), Err(Error::DivergedToNonFinite { .. })));
    }

    #[test]
    fn json_roundtrip() {
        let m = LogisticModel::new(array![0.25, -1.5, 3.0], true);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"beta":[0.25,-1.5,3.0],"intercept":true}"#);
        assert_eq!(serde_json::from_str::<LogisticModel>(&s).unwrap(), m);
        assert!(serde_json::from_str::<LogisticModel>(r#"{"beta":[1.0],"intercept":true}"#).is_err());
    }
}
