//! Binary cross-entropy and the empirical objectives built from it.
//!
//! * raw: mean loss over the observed sample;
//! * syn: observed sample plus minority synthetics labelled 1;
//! * bc: syn plus `ñ₁·Δ̂₀`, where `Δ̂₀` compares the majority loss on held-out
//!   real rows (correction set) with the loss on majority synthetics;
//! * balanced oracle and `Δ̂₁`, which need fresh minority draws and exist for
//!   verification only.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{default_n0g, partition_majority, split_by_class, Dataset, MajorityPartition};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::model::LogisticModel;

pub const EPS_CLIP: f64 = 1e-12;

/// Clamped binary cross-entropy.
pub fn bce(p: f64, y: u8) -> Result<f64> {
    if p.is_nan() {
        return Err(Error::NonFinite);
    }
    let p = p.clamp(EPS_CLIP, 1.0 - EPS_CLIP);
    Ok(if y == 1 { -p.ln() } else { -(1.0 - p).ln() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Raw,
    Syn,
    Bc,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Raw, Objective::Syn, Objective::Bc];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Raw => "raw",
            Objective::Syn => "syn",
            Objective::Bc => "bc",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Objective::Raw),
            "syn" => Ok(Objective::Syn),
            "bc" => Ok(Objective::Bc),
            other => Err(Error::Config(format!("unknown method {other:?} (expected raw, syn or bc)"))),
        }
    }
}

/// Observed sample plus the synthetic sets produced for it.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrainSet {
    pub raw: Dataset,
    pub syn_minority: Array2<f64>,
    pub syn_majority: Array2<f64>,
    pub partition: MajorityPartition,
}

impl AugmentedTrainSet {
    pub fn new(
        raw: Dataset,
        syn_minority: Array2<f64>,
        syn_majority: Array2<f64>,
        partition: MajorityPartition,
    ) -> Result<Self> {
        let d = raw.d();
        for m in [&syn_minority, &syn_majority] {
            if m.ncols() != d {
                return Err(Error::DimMismatch { expected: d, got: m.ncols() });
            }
        }
        let mut seen = vec![false; raw.n()];
        for &i in partition.generation_idx.iter().chain(&partition.correction_idx) {
            if i >= raw.n() || seen[i] || raw.y[i] != 0 {
                return Err(Error::InvalidDataset(format!("partition index {i} is out of range, repeated or not a majority row")));
            }
            seen[i] = true;
        }
        Ok(AugmentedTrainSet { raw, syn_minority, syn_majority, partition })
    }

    /// Augmentation-free set, enough for the raw objective.
    pub fn raw_only(raw: Dataset) -> Self {
        let d = raw.d();
        AugmentedTrainSet {
            raw,
            syn_minority: Array2::zeros((0, d)),
            syn_majority: Array2::zeros((0, d)),
            partition: MajorityPartition { generation_idx: vec![], correction_idx: vec![] },
        }
    }

    pub fn n1_syn(&self) -> usize {
        self.syn_minority.nrows()
    }

    pub fn n0_syn(&self) -> usize {
        self.syn_majority.nrows()
    }

    pub fn correction_rows(&self) -> Array2<f64> {
        self.raw.x.select(Axis(0), &self.partition.correction_idx)
    }
}

/// Sizes used when building an [`AugmentedTrainSet`]; `None` picks the default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AugmentOptions {
    /// Generation-set size, default `min(n1, floor(n0/2))`.
    pub n0g: Option<usize>,
    /// Minority synthetics, default `n0 - n1`.
    pub n1_syn: Option<usize>,
    /// Majority synthetics, default equal to the minority count.
    pub n0_syn: Option<usize>,
}

/// Everything before training: partition the majority, then generate
/// minority synthetics from all minority rows and majority synthetics from
/// the generation set.
pub fn augment<R: Rng + ?Sized>(
    raw: &Dataset,
    gen: &Generator,
    opts: &AugmentOptions,
    rng: &mut R,
) -> Result<AugmentedTrainSet> {
    let split = split_by_class(raw)?;
    let (n1, n0) = (split.n1(), split.n0());
    let n0g = opts.n0g.unwrap_or_else(|| default_n0g(n1, n0));
    let partition = partition_majority(&split, n0g, rng)?;
    let n1_syn = opts.n1_syn.unwrap_or(n0.saturating_sub(n1));
    let n0_syn = opts.n0_syn.unwrap_or(n1_syn);
    let minority = raw.x.select(Axis(0), &split.minority_idx);
    let generation = raw.x.select(Axis(0), &partition.generation_idx);
    let syn_minority = gen.generate(minority.view(), n1_syn, rng)?;
    let syn_majority = gen.generate(generation.view(), n0_syn, rng)?;
    Ok(AugmentedTrainSet { raw: raw.clone(), syn_minority, syn_majority, partition })
}

/// Neumaier-compensated sum, so a mean of identical terms comes back exact.
fn compensated_sum(terms: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let t = t?;
        let s = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
    }
    Ok(sum + comp)
}

fn sum_bce(model: &LogisticModel, x: ArrayView2<f64>, y: u8) -> Result<f64> {
    compensated_sum(model.predict_batch(x)?.iter().map(|&p| bce(p, y)))
}

/// Mean taken about the first term, so identical terms give that term exactly.
fn mean_bce(model: &LogisticModel, x: ArrayView2<f64>, y: u8) -> Result<f64> {
    let p = model.predict_batch(x)?;
    let Some(&p0) = p.first() else {
        return Err(Error::EmptySynthetic);
    };
    let l0 = bce(p0, y)?;
    let dev = compensated_sum(p.iter().skip(1).map(|&p| Ok(bce(p, y)? - l0)))?;
    Ok(l0 + dev / p.len() as f64)
}

fn sum_bce_labels(model: &LogisticModel, data: &Dataset) -> Result<f64> {
    let p = model.predict_batch(data.x.view())?;
    compensated_sum(p.iter().zip(&data.y).map(|(&p, &y)| bce(p, y)))
}

pub fn loss_raw(model: &LogisticModel, data: &Dataset) -> Result<f64> {
    Ok(sum_bce_labels(model, data)? / data.n() as f64)
}

/// With no minority synthetics this equals [`loss_raw`].
pub fn loss_syn(model: &LogisticModel, aug: &AugmentedTrainSet) -> Result<f64> {
    let n = aug.raw.n() as f64;
    let n1t = aug.n1_syn() as f64;
    Ok((sum_bce_labels(model, &aug.raw)? + sum_bce(model, aug.syn_minority.view(), 1)?) / (n + n1t))
}

/// `mean_{correction} l(x, 0) - mean_{majority synthetics} l(x, 0)`; signed.
pub fn delta0_hat(model: &LogisticModel, aug: &AugmentedTrainSet) -> Result<f64> {
    if aug.partition.correction_idx.is_empty() {
        return Err(Error::EmptyCorrectionSet);
    }
    if aug.n0_syn() == 0 {
        return Err(Error::EmptySynthetic);
    }
    let c = aug.correction_rows();
    Ok(mean_bce(model, c.view(), 0)? - mean_bce(model, aug.syn_majority.view(), 0)?)
}

/// `(sum_raw l + ñ₁ (mean_syn l(x̃, 1) + Δ̂₀)) / (n + ñ₁)`.
pub fn loss_bc(model: &LogisticModel, aug: &AugmentedTrainSet) -> Result<f64> {
    let n1t = aug.n1_syn();
    if n1t == 0 {
        return loss_raw(model, &aug.raw);
    }
    let n = aug.raw.n() as f64;
    let n1t = n1t as f64;
    let raw = sum_bce_labels(model, &aug.raw)?;
    let syn_mean = mean_bce(model, aug.syn_minority.view(), 1)?;
    let d0 = delta0_hat(model, aug)?;
    Ok((raw + n1t * (syn_mean + d0)) / (n + n1t))
}

pub fn objective_value(objective: Objective, model: &LogisticModel, aug: &AugmentedTrainSet) -> Result<f64> {
    match objective {
        Objective::Raw => loss_raw(model, &aug.raw),
        Objective::Syn => loss_syn(model, aug),
        Objective::Bc => loss_bc(model, aug),
    }
}

/// `mean_{true draws} l(x, 1) - mean_{synthetics} l(x̃, 1)`.
pub fn delta1_hat_oracle(model: &LogisticModel, true_minority: ArrayView2<f64>, syn_minority: ArrayView2<f64>) -> Result<f64> {
    if true_minority.nrows() == 0 || syn_minority.nrows() == 0 {
        return Err(Error::EmptySynthetic);
    }
    Ok(mean_bce(model, true_minority, 1)? - mean_bce(model, syn_minority, 1)?)
}

/// Observed sample plus true minority draws, all labelled as drawn.
pub fn loss_balanced_oracle(model: &LogisticModel, raw: &Dataset, true_minority: ArrayView2<f64>) -> Result<f64> {
    let n = raw.n() as f64;
    let m = true_minority.nrows() as f64;
    Ok((sum_bce_labels(model, raw)? + sum_bce(model, true_minority, 1)?) / (n + m))
}

/// `|Δ̂₁ - Δ̂₀|`.
pub fn gap_delta(model: &LogisticModel, aug: &AugmentedTrainSet, true_minority: ArrayView2<f64>) -> Result<f64> {
    let d1 = delta1_hat_oracle(model, true_minority, aug.syn_minority.view())?;
    let d0 = delta0_hat(model, aug)?;
    Ok((d1 - d0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::SmoteParams;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use ndarray::{array, Array1};
    use rand_distr::StandardNormal;
    use std::f64::consts::LN_2;

    fn half() -> LogisticModel {
        LogisticModel::zeros(2, false)
    }

    fn fixture(seed: u64) -> (LogisticModel, AugmentedTrainSet) {
        let mut r = seeded(seed);
        let n = 20;
        let x = Array2::from_shape_simple_fn((n, 2), || r.sample::<f64, _>(StandardNormal));
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 5 == 0)).collect();
        let raw = Dataset::new(x, y).unwrap();
        let aug = augment(&raw, &Generator::Smote(SmoteParams { k: 2 }), &AugmentOptions::default(), &mut r).unwrap();
        let beta = Array1::from_shape_simple_fn(3, || r.sample::<f64, _>(StandardNormal));
        (LogisticModel::new(beta, true), aug)
    }

    #[test]
    fn bce_examples() {
        assert_relative_eq!(bce(0.5, 1).unwrap(), LN_2, epsilon = 1e-15);
        assert!(bce(1.0, 1).unwrap() <= 1e-11);
        assert_relative_eq!(bce(0.9, 0).unwrap(), -(0.1f64).ln(), epsilon = 1e-12);
        assert!(matches!(bce(f64::NAN, 0), Err(Error::NonFinite)));
        assert!(bce(0.0, 1).unwrap() <= -EPS_CLIP.ln() + 1e-12);
    }

    #[test]
    fn augment_sizes() {
        let (_, aug) = fixture(1);
        assert_eq!(aug.raw.n1(), 4);
        assert_eq!(aug.n1_syn(), 12);
        assert_eq!(aug.n0_syn(), 12);
        assert_eq!(aug.partition.generation_idx.len(), 4);
        assert_eq!(aug.partition.correction_idx.len(), 12);
    }

    #[test]
    fn raw_matches_summation_oracle() {
        let (m, aug) = fixture(2);
        let mut s = 0.0;
        for (row, &y) in aug.raw.x.rows().into_iter().zip(&aug.raw.y) {
            s += bce(m.predict(row).unwrap(), y).unwrap();
        }
        assert_relative_eq!(loss_raw(&m, &aug.raw).unwrap(), s / 20.0, max_relative = 1e-14);
    }

    #[test]
    fn compensated_mean_of_repeats_is_exact() {
        for n in [3usize, 1000, 12_345] {
            let s = compensated_sum((0..n).map(|_| Ok(LN_2))).unwrap();
            assert_eq!(s / n as f64, LN_2);
        }
    }

    #[test]
    fn constant_model_identities() {
        let (_, aug) = fixture(3);
        let m = half();
        for v in [
            loss_raw(&m, &aug.raw).unwrap(),
            loss_syn(&m, &aug).unwrap(),
            loss_bc(&m, &aug).unwrap(),
            loss_balanced_oracle(&m, &aug.raw, aug.syn_minority.view()).unwrap(),
        ] {
            assert_relative_eq!(v, LN_2, epsilon = 1e-15);
        }
        assert_eq!(delta0_hat(&m, &aug).unwrap(), 0.0);
        assert_eq!(delta1_hat_oracle(&m, aug.raw.x.view(), aug.syn_minority.view()).unwrap(), 0.0);
        assert_eq!(loss_bc(&m, &aug).unwrap(), loss_syn(&m, &aug).unwrap());
        assert_eq!(gap_delta(&m, &aug, aug.raw.x.view()).unwrap(), 0.0);
    }

    #[test]
    fn bc_minus_syn_identity() {
        for seed in 0..10 {
            let (m, aug) = fixture(seed);
            let lhs = loss_bc(&m, &aug).unwrap() - loss_syn(&m, &aug).unwrap();
            let n1t = aug.n1_syn() as f64;
            let rhs = n1t / (aug.raw.n() as f64 + n1t) * delta0_hat(&m, &aug).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn delta0_zero_on_copied_correction() {
        let (m, mut aug) = fixture(4);
        let mut c = aug.correction_rows();
        c.invert_axis(Axis(0));
        aug.syn_majority = c;
        assert!(delta0_hat(&m, &aug).unwrap().abs() < 1e-14);
    }

    #[test]
    fn delta0_two_average_oracle() {
        let raw = Dataset::new(array![[0.0], [1.0], [2.0], [3.0], [4.0]], vec![1, 0, 0, 0, 0]).unwrap();
        let part = MajorityPartition { generation_idx: vec![1, 2], correction_idx: vec![3, 4] };
        let aug = AugmentedTrainSet::new(raw, array![[0.5]], array![[1.5], [2.5], [-1.0]], part).unwrap();
        let m = LogisticModel::new(array![0.7, -0.3], true);
        let l0 = |x: f64| -(1.0 - 1.0 / (1.0 + (-(0.7 * x - 0.3)).exp())).ln();
        let want = (l0(3.0) + l0(4.0)) / 2.0 - (l0(1.5) + l0(2.5) + l0(-1.0)) / 3.0;
        assert_relative_eq!(delta0_hat(&m, &aug).unwrap(), want, max_relative = 1e-14);
    }

    #[test]
    fn bc_three_term_hand_computation() {
        let raw = Dataset::new(array![[1.0], [-1.0], [2.0]], vec![1, 0, 0]).unwrap();
        let part = MajorityPartition { generation_idx: vec![1], correction_idx: vec![2] };
        let aug = AugmentedTrainSet::new(raw, array![[0.5]], array![[-0.5]], part).unwrap();
        let m = LogisticModel::new(array![1.0], false);
        let s = |t: f64| 1.0 / (1.0 + (-t).exp());
        let raw_sum = -s(1.0).ln() - (1.0 - s(-1.0)).ln() - (1.0 - s(2.0)).ln();
        let syn = -s(0.5).ln();
        let d0 = -(1.0 - s(2.0)).ln() + (1.0 - s(-0.5)).ln();
        let want = (raw_sum + syn + d0) / 4.0;
        assert_relative_eq!(loss_bc(&m, &aug).unwrap(), want, max_relative = 1e-14);
    }

    #[test]
    fn syn_degenerate_and_duplicate() {
        let (m, aug) = fixture(5);
        let empty = AugmentedTrainSet::raw_only(aug.raw.clone());
        assert_eq!(loss_syn(&m, &empty).unwrap(), loss_raw(&m, &aug.raw).unwrap());
        assert_eq!(loss_bc(&m, &empty).unwrap(), loss_raw(&m, &aug.raw).unwrap());

        let raw = Dataset::new(array![[1.0], [2.0], [-1.0], [0.0]], vec![1, 1, 0, 0]).unwrap();
        let mut aug = AugmentedTrainSet::raw_only(raw.clone());
        aug.syn_minority = array![[1.0], [2.0]];
        let m = LogisticModel::new(array![0.4], false);
        let p = |x: f64| 1.0 / (1.0 + (-0.4 * x).exp());
        let want = (2.0 * (-p(1.0).ln() - p(2.0).ln()) - (1.0 - p(-1.0)).ln() - (1.0 - p(0.0)).ln()) / 6.0;
        assert_relative_eq!(loss_syn(&m, &aug).unwrap(), want, max_relative = 1e-14);
    }

    #[test]
    fn balanced_second_form() {
        let (m, aug) = fixture(6);
        let mut r = seeded(60);
        let truth = Array2::from_shape_simple_fn((aug.n1_syn(), 2), || r.sample::<f64, _>(StandardNormal));
        let bal = loss_balanced_oracle(&m, &aug.raw, truth.view()).unwrap();
        let n1t = aug.n1_syn() as f64;
        let n = aug.raw.n() as f64;
        let syn_mean = sum_bce(&m, aug.syn_minority.view(), 1).unwrap() / n1t;
        let d1 = delta1_hat_oracle(&m, truth.view(), aug.syn_minority.view()).unwrap();
        let second = (sum_bce_labels(&m, &aug.raw).unwrap() + n1t * (syn_mean + d1)) / (n + n1t);
        assert_relative_eq!(bal, second, max_relative = 1e-14);
        let no_draws = Array2::<f64>::zeros((0, 2));
        assert_eq!(loss_balanced_oracle(&m, &aug.raw, no_draws.view()).unwrap(), loss_raw(&m, &aug.raw).unwrap());
    }

    #[test]
    fn delta_errors() {
        let (m, aug) = fixture(7);
        let mut a = aug.clone();
        a.partition.correction_idx.clear();
        assert!(matches!(delta0_hat(&m, &a), Err(Error::EmptyCorrectionSet)));
        let mut b = aug;
        b.syn_majority = Array2::zeros((0, 2));
        assert!(matches!(delta0_hat(&m, &b), Err(Error::EmptySynthetic)));
    }

    #[test]
    fn delta1_copy_is_zero() {
        let (m, aug) = fixture(8);
        assert_eq!(delta1_hat_oracle(&m, aug.syn_minority.view(), aug.syn_minority.view()).unwrap(), 0.0);
    }

    #[test]
    fn objective_names() {
        for o in Objective::ALL {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
        }
        assert!("x".parse::<Objective>().is_err());
    }
}
