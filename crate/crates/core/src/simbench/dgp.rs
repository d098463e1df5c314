//! Data-generating processes for the simulation studies.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dist::Dist;
use crate::ate::CausalDataset;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::mtl::TaskCollection;

fn check_pi1(pi1: f64) -> Result<()> {
    if pi1 > 0.0 && pi1 <= 0.5 {
        Ok(())
    } else {
        Err(Error::Config(format!("pi1 must lie in (0, 0.5], got {pi1}")))
    }
}

fn check_len(name: &str, got: usize, d: usize) -> Result<()> {
    if got == d {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} has {got} entries but d = {d}")))
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} contains non-finite values")))
    }
}

fn check_sizes(n: usize, d: usize) -> Result<()> {
    if n >= 1 && d >= 1 {
        Ok(())
    } else {
        Err(Error::Config(format!("n and d must be >= 1 (n = {n}, d = {d})")))
    }
}

/// `d` values spaced geometrically from `lo` to `hi`.
pub fn geomspace(lo: f64, hi: f64, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (d - 1) as f64;
    (0..d).map(|j| lo * (r * j as f64).exp()).collect()
}

pub fn linspace(lo: f64, hi: f64, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![lo];
    }
    (0..d).map(|j| lo + (hi - lo) * j as f64 / (d - 1) as f64).collect()
}

fn bernoulli_labels<R: Rng + ?Sized>(n: usize, pi1: f64, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.random::<f64>() < pi1)).collect()
}

fn both_classes(y: &[u8]) -> bool {
    y.contains(&0) && y.contains(&1)
}

/// Draws labels, retrying once if a class comes out empty.
fn labels_with_retry<R: Rng + ?Sized>(rng: &mut R, mut draw: impl FnMut(&mut R) -> Vec<u8>) -> Result<Vec<u8>> {
    for _ in 0..2 {
        let y = draw(rng);
        if both_classes(&y) {
            return Ok(y);
        }
    }
    Err(Error::DegenerateDraw)
}

/// Two classes differing by a constant shift: a minority row is a majority
/// draw plus `shift`. Coordinate `j` of the base draw is multiplied by
/// `scales[j]`; with `center` both classes are moved by `-shift/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanShift {
    pub base: Dist,
    pub shift: Vec<f64>,
    pub pi1: f64,
    pub n: usize,
    pub d: usize,
    pub scales: Vec<f64>,
    pub center: bool,
}

impl MeanShift {
    /// Unit scales, no centering.
    pub fn plain(base: Dist, shift: f64, pi1: f64, n: usize, d: usize) -> Self {
        MeanShift { base, shift: vec![shift; d], pi1, n, d, scales: vec![1.0; d], center: false }
    }

    pub fn validate(&self) -> Result<()> {
        check_sizes(self.n, self.d)?;
        check_pi1(self.pi1)?;
        self.base.validate()?;
        check_len("shift", self.shift.len(), self.d)?;
        check_len("scales", self.scales.len(), self.d)?;
        check_finite("shift", &self.shift)?;
        check_finite("scales", &self.scales)
    }

    fn row<R: Rng + ?Sized>(&self, label: u8, rng: &mut R) -> Array1<f64> {
        Array1::from_shape_fn(self.d, |j| {
            let mut v = self.scales[j] * self.base.draw(rng);
            if self.center {
                v -= self.shift[j] / 2.0;
            }
            if label == 1 {
                v += self.shift[j];
            }
            v
        })
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        let y = labels_with_retry(rng, |r| bernoulli_labels(self.n, self.pi1, r))?;
        let mut x = Array2::zeros((self.n, self.d));
        for (i, &label) in y.iter().enumerate() {
            x.row_mut(i).assign(&self.row(label, rng));
        }
        Dataset::new(x, y)
    }

    /// Fresh draws from the minority law.
    pub fn sample_minority<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Array2<f64>> {
        self.validate()?;
        let mut x = Array2::zeros((m, self.d));
        for i in 0..m {
            x.row_mut(i).assign(&self.row(1, rng));
        }
        Ok(x)
    }
}

/// `P(Y=1|x) = σ(xᵀβ + b)` with iid covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidBernoulli {
    pub cov: Dist,
    pub beta_true: Vec<f64>,
    pub intercept: f64,
    pub n: usize,
    pub d: usize,
}

impl SigmoidBernoulli {
    pub fn validate(&self) -> Result<()> {
        check_sizes(self.n, self.d)?;
        self.cov.validate()?;
        check_len("beta_true", self.beta_true.len(), self.d)?;
        check_finite("beta_true", &self.beta_true)?;
        check_finite("intercept", &[self.intercept])
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        let x = Array2::from_shape_simple_fn((self.n, self.d), || self.cov.draw(rng));
        let beta = ArrayView1::from(&self.beta_true);
        let p: Vec<f64> = x.rows().into_iter().map(|r| sigmoid(r.dot(&beta) + self.intercept)).collect();
        let y = labels_with_retry(rng, |r| p.iter().map(|&pi| u8::from(r.random::<f64>() < pi)).collect())?;
        Dataset::new(x, y)
    }
}

/// Two-dimensional geometries with a non-linear class boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scenario {
    /// Minority ring of radius 1 inside a majority ring of radius 2.
    Rings,
    /// Majority `N(0, I)`, minority `N((1.5,1.5), 5I)`.
    Blobs,
    /// Interleaved half-moons.
    Moons,
    /// Majority uniform on the annulus `1 ≤ r ≤ 2`, minority uniform on the disc `r ≤ 1.2`.
    Annulus,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Rings, Scenario::Blobs, Scenario::Moons, Scenario::Annulus];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Rings => "rings",
            Scenario::Blobs => "blobs",
            Scenario::Moons => "moons",
            Scenario::Annulus => "annulus",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Ok(i) = s.parse::<usize>() {
            if (1..=4).contains(&i) {
                return Ok(Scenario::ALL[i - 1]);
            }
        }
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}; expected rings, blobs, moons, annulus or 1-4")))
    }
}

impl TryFrom<String> for Scenario {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scenario> for String {
    fn from(s: Scenario) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonLinear2d {
    pub scenario: Scenario,
    pub n: usize,
    pub pi1: f64,
    /// Sd of the isotropic Gaussian noise added to every point.
    pub noise: f64,
}

impl NonLinear2d {
    pub fn validate(&self) -> Result<()> {
        check_sizes(self.n, 2)?;
        check_pi1(self.pi1)?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }

    fn point<R: Rng + ?Sized>(&self, label: u8, rng: &mut R) -> [f64; 2] {
        let mut normal = || rng.sample::<f64, _>(StandardNormal);
        let polar = |r: f64, a: f64| [r * a.cos(), r * a.sin()];
        let [a, b] = match (self.scenario, label) {
            (Scenario::Rings, _) => {
                let a = TAU * rng.random::<f64>();
                polar(if label == 1 { 1.0 } else { 2.0 }, a)
            }
            (Scenario::Blobs, 0) => [normal(), normal()],
            (Scenario::Blobs, _) => {
                let s = 5f64.sqrt();
                [1.5 + s * normal(), 1.5 + s * normal()]
            }
            (Scenario::Moons, 0) => {
                let t = PI * rng.random::<f64>();
                [t.cos(), t.sin()]
            }
            (Scenario::Moons, _) => {
                let t = PI * rng.random::<f64>();
                [1.0 - t.cos(), 0.5 - t.sin()]
            }
            (Scenario::Annulus, 0) => {
                let r = (1.0 + 3.0 * rng.random::<f64>()).sqrt();
                polar(r, TAU * rng.random::<f64>())
            }
            (Scenario::Annulus, _) => {
                let r = 1.2 * rng.random::<f64>().sqrt();
                polar(r, TAU * rng.random::<f64>())
            }
        };
        [a + self.noise * rng.sample::<f64, _>(StandardNormal), b + self.noise * rng.sample::<f64, _>(StandardNormal)]
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        let y = labels_with_retry(rng, |r| bernoulli_labels(self.n, self.pi1, r))?;
        let mut x = Array2::zeros((self.n, 2));
        for (i, &label) in y.iter().enumerate() {
            let [a, b] = self.point(label, rng);
            x[[i, 0]] = a;
            x[[i, 1]] = b;
        }
        Dataset::new(x, y)
    }
}

/// Degree-two feature map `(x_j, x_j x_k for j ≤ k)`.
pub fn poly2(x: &Array2<f64>) -> Array2<f64> {
    let d = x.ncols();
    let p = d + d * (d + 1) / 2;
    let mut out = Array2::zeros((x.nrows(), p));
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut c = 0;
        for j in 0..d {
            out[[i, c]] = row[j];
            c += 1;
        }
        for j in 0..d {
            for k in j..d {
                out[[i, c]] = row[j] * row[k];
                c += 1;
            }
        }
    }
    out
}

/// Observational data with a logistic propensity and linear-plus-curvature outcomes:
/// `y(a) = xᵀβ_a + a·τ + curvature·‖x‖² + N(0, noise_sd²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDgp {
    pub cov: Dist,
    pub gamma: Vec<f64>,
    pub gamma0: f64,
    pub beta1: Vec<f64>,
    pub beta0: Vec<f64>,
    pub tau_true: f64,
    pub curvature: f64,
    pub noise_sd: f64,
    pub n: usize,
    pub d: usize,
}

/// A causal draw with the true conditional means of both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalSample {
    pub data: CausalDataset,
    pub mu1: Vec<f64>,
    pub mu0: Vec<f64>,
}

impl CausalSample {
    /// Average of `μ1(xᵢ) − μ0(xᵢ)` over the sample.
    pub fn sample_ate(&self) -> f64 {
        self.mu1.iter().zip(&self.mu0).map(|(a, b)| a - b).sum::<f64>() / self.mu1.len() as f64
    }
}

impl CausalDgp {
    pub fn validate(&self) -> Result<()> {
        check_sizes(self.n, self.d)?;
        self.cov.validate()?;
        for (name, v) in [("gamma", &self.gamma), ("beta1", &self.beta1), ("beta0", &self.beta0)] {
            check_len(name, v.len(), self.d)?;
            check_finite(name, v)?;
        }
        check_finite("scalars", &[self.gamma0, self.tau_true, self.curvature])?;
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd must be >= 0, got {}", self.noise_sd)));
        }
        Ok(())
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CausalSample> {
        self.validate()?;
        let x = Array2::from_shape_simple_fn((self.n, self.d), || self.cov.draw(rng));
        let (g, b1, b0) = (ArrayView1::from(&self.gamma), ArrayView1::from(&self.beta1), ArrayView1::from(&self.beta0));
        let e: Vec<f64> = x.rows().into_iter().map(|r| sigmoid(r.dot(&g) + self.gamma0)).collect();
        let z = labels_with_retry(rng, |r| e.iter().map(|&p| u8::from(r.random::<f64>() < p)).collect())?;
        let mut mu1 = Vec::with_capacity(self.n);
        let mut mu0 = Vec::with_capacity(self.n);
        let mut y = Vec::with_capacity(self.n);
        for (r, &zi) in x.rows().into_iter().zip(&z) {
            let curve = self.curvature * r.dot(&r);
            let m1 = r.dot(&b1) + self.tau_true + curve;
            let m0 = r.dot(&b0) + curve;
            let noise = self.noise_sd * rng.sample::<f64, _>(StandardNormal);
            y.push(if zi == 1 { m1 } else { m0 } + noise);
            mu1.push(m1);
            mu0.push(m0);
        }
        Ok(CausalSample { data: CausalDataset::new(x, z, y)?, mu1, mu0 })
    }
}

/// Planted low-rank multi-task model: `β_k = B α_k` with `B` a random
/// orthonormal `d×r` basis and `α_k ~ N(0, alpha_sd² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedMtl {
    pub d: usize,
    pub tasks: usize,
    pub rank: usize,
    pub n_k: usize,
    pub alpha_sd: f64,
    pub intercept: f64,
    pub scales: Vec<f64>,
    pub cov: Dist,
}

#[derive(Debug, Clone)]
pub struct MtlSample {
    pub tasks: TaskCollection,
    pub basis: Array2<f64>,
    pub m_true: Array2<f64>,
}

/// Gram-Schmidt on the columns; `None` if they are numerically dependent.
pub fn orthonormalize(a: &Array2<f64>) -> Option<Array2<f64>> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let p = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-p, &qi);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm < 1e-10 {
            return None;
        }
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Some(q)
}

impl PlantedMtl {
    pub fn validate(&self) -> Result<()> {
        check_sizes(self.n_k, self.d)?;
        if self.tasks < 1 || self.rank < 1 || self.rank > self.d.min(self.tasks) {
            return Err(Error::Config(format!(
                "need 1 <= rank <= min(d, tasks); got rank {} with d {} and {} tasks",
                self.rank, self.d, self.tasks
            )));
        }
        check_len("scales", self.scales.len(), self.d)?;
        check_finite("scales", &self.scales)?;
        if !(self.alpha_sd > 0.0 && self.alpha_sd.is_finite()) {
            return Err(Error::Config(format!("alpha_sd must be positive, got {}", self.alpha_sd)));
        }
        self.cov.validate()
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MtlSample> {
        self.validate()?;
        let g = Array2::from_shape_simple_fn((self.d, self.rank), || rng.sample::<f64, _>(StandardNormal));
        let basis = orthonormalize(&g).ok_or(Error::DegenerateDraw)?;
        let alpha = Array2::from_shape_simple_fn((self.rank, self.tasks), || self.alpha_sd * rng.sample::<f64, _>(StandardNormal));
        let m_true = basis.dot(&alpha);
        let mut tasks = Vec::with_capacity(self.tasks);
        for k in 0..self.tasks {
            tasks.push(self.task_data(m_true.column(k), self.n_k, rng)?);
        }
        Ok(MtlSample { tasks: TaskCollection::new(tasks)?, basis, m_true })
    }

    fn task_data<R: Rng + ?Sized>(&self, beta: ArrayView1<f64>, n: usize, rng: &mut R) -> Result<Dataset> {
        let x = Array2::from_shape_fn((n, self.d), |(_, j)| self.scales[j] * self.cov.draw(rng));
        let p: Vec<f64> = x.rows().into_iter().map(|r| sigmoid(r.dot(&beta) + self.intercept)).collect();
        let y = labels_with_retry(rng, |r| p.iter().map(|&pi| u8::from(r.random::<f64>() < pi)).collect())?;
        Dataset::new(x, y)
    }

    /// One more task on the same basis: `(data, β)` with a fresh `α`.
    pub fn draw_task<R: Rng + ?Sized>(&self, basis: &Array2<f64>, n: usize, rng: &mut R) -> Result<(Dataset, Array1<f64>)> {
        self.validate()?;
        let alpha = Array1::from_shape_simple_fn(self.rank, || self.alpha_sd * rng.sample::<f64, _>(StandardNormal));
        let beta = basis.dot(&alpha);
        Ok((self.task_data(beta.view(), n, rng)?, beta))
    }
}

/// The data-generating processes behind the classification and causal studies.
#[derive(Debug, Clone, PartialEq)]
pub enum Dgp {
    MeanShift(MeanShift),
    SigmoidBernoulli(SigmoidBernoulli),
    NonLinear2d(NonLinear2d),
    Causal(CausalDgp),
}

#[derive(Debug, Clone)]
pub enum Sample {
    Labeled(Dataset),
    Causal(CausalSample),
}

pub fn generate<R: Rng + ?Sized>(dgp: &Dgp, rng: &mut R) -> Result<Sample> {
    Ok(match dgp {
        Dgp::MeanShift(m) => Sample::Labeled(m.generate(rng)?),
        Dgp::SigmoidBernoulli(s) => Sample::Labeled(s.generate(rng)?),
        Dgp::NonLinear2d(nl) => Sample::Labeled(nl.generate(rng)?),
        Dgp::Causal(c) => Sample::Causal(c.generate(rng)?),
    })
}
