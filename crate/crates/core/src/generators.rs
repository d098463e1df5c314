//! Synthetic-sample generators.
//!
//! Every generator maps a class's covariate rows to `m` new rows of the same
//! width. None of them sees labels, so the same generator serves both classes.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::cholesky;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoteParams {
    pub k: usize,
}

impl Default for SmoteParams {
    fn default() -> Self {
        SmoteParams { k: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbParams {
    pub noise_scale: f64,
}

impl Default for PerturbParams {
    fn default() -> Self {
        PerturbParams { noise_scale: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    Smote(SmoteParams),
    BiasedSmote(SmoteParams),
    Gaussian,
    Perturbed(PerturbParams),
    Bootstrap,
}

impl Generator {
    pub fn generate<R: Rng + ?Sized>(&self, source: ArrayView2<f64>, m: usize, rng: &mut R) -> Result<Array2<f64>> {
        match *self {
            Generator::Smote(p) => smote_generate(source, m, p, rng),
            Generator::BiasedSmote(p) => biased_smote_generate(source, m, p, rng),
            Generator::Gaussian => gaussian_generate(source, m, rng),
            Generator::Perturbed(p) => perturbed_generate(source, m, p, rng),
            Generator::Bootstrap => bootstrap_generate(source, m, rng),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Smote(_) => "smote",
            Generator::BiasedSmote(_) => "biased-smote",
            Generator::Gaussian => "gaussian",
            Generator::Perturbed(_) => "perturbed",
            Generator::Bootstrap => "bootstrap",
        }
    }

    /// Builds a generator from its name and the shared sub-options.
    pub fn from_name(name: &str, k: usize, noise_scale: f64) -> Result<Self> {
        let g = match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "smote" => Generator::Smote(SmoteParams { k }),
            "biased-smote" | "biasedsmote" => Generator::BiasedSmote(SmoteParams { k }),
            "gaussian" => Generator::Gaussian,
            "perturbed" => Generator::Perturbed(PerturbParams { noise_scale }),
            "bootstrap" => Generator::Bootstrap,
            _ => return Err(Error::UnknownGenerator(name.to_string())),
        };
        if let Generator::Smote(p) | Generator::BiasedSmote(p) = g {
            if p.k == 0 {
                return Err(Error::BadK { k: 0, n: 0 });
            }
        }
        if let Generator::Perturbed(p) = g {
            if !(p.noise_scale >= 0.0) || !p.noise_scale.is_finite() {
                return Err(Error::Config(format!("noise scale must be >= 0, got {}", p.noise_scale)));
            }
        }
        Ok(g)
    }

    pub const NAMES: [&'static str; 5] = ["smote", "gaussian", "perturbed", "bootstrap", "biased-smote"];
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::from_name(s, SmoteParams::default().k, PerturbParams::default().noise_scale)
    }
}

/// Precomputed K-nearest-neighbour lists (self excluded, ties broken by index).
#[derive(Debug, Clone)]
pub struct Neighbors {
    pub lists: Vec<Vec<usize>>,
}

impl Neighbors {
    pub fn build(source: ArrayView2<f64>, k: usize) -> Result<Self> {
        let n = source.nrows();
        if n < 2 {
            return Err(Error::TooFewSamples { need: 2, got: n });
        }
        if k < 1 || k > n - 1 {
            return Err(Error::BadK { k, n });
        }
        let mut lists = Vec::with_capacity(n);
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for i in 0..n {
            dist.clear();
            let xi = source.row(i);
            for j in (0..n).filter(|&j| j != i) {
                let d2: f64 = xi.iter().zip(source.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                dist.push((d2, j));
            }
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            lists.push(dist[..k].iter().map(|&(_, j)| j).collect());
        }
        Ok(Neighbors { lists })
    }
}

/// `x_t + u * (x_{t(j)} - x_t)` with `j` a zero-based neighbour rank.
pub fn interpolate(source: ArrayView2<f64>, nb: &Neighbors, t: usize, j: usize, u: f64) -> Array1<f64> {
    let a = source.row(t);
    let b = source.row(nb.lists[t][j]);
    &a + &((&b - &a) * u)
}

fn smote_with_range<R: Rng + ?Sized>(
    source: ArrayView2<f64>,
    m: usize,
    params: SmoteParams,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let nb = Neighbors::build(source, params.k)?;
    let n = source.nrows();
    let mut out = Array2::<f64>::zeros((m, source.ncols()));
    for mut row in out.rows_mut() {
        let t = rng.random_range(0..n);
        let j = rng.random_range(0..params.k);
        let u = lo + (hi - lo) * rng.random::<f64>();
        row.assign(&interpolate(source, &nb, t, j, u));
    }
    Ok(out)
}

/// Plain SMOTE: interpolation weight `U ~ Unif(0, 1)`.
pub fn smote_generate<R: Rng + ?Sized>(
    source: ArrayView2<f64>,
    m: usize,
    params: SmoteParams,
    rng: &mut R,
) -> Result<Array2<f64>> {
    smote_with_range(source, m, params, 0.0, 1.0, rng)
}

/// SMOTE with `U ~ Unif(0.5, 1.5)`, which overshoots the neighbour half the time.
pub fn biased_smote_generate<R: Rng + ?Sized>(
    source: ArrayView2<f64>,
    m: usize,
    params: SmoteParams,
    rng: &mut R,
) -> Result<Array2<f64>> {
    smote_with_range(source, m, params, 0.5, 1.5, rng)
}

/// Empirical mean and sample covariance (divisor `n - 1`).
pub fn mean_and_cov(source: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = source.nrows();
    let mu = source.mean_axis(Axis(0)).expect("nonempty source");
    let centered = &source - &mu;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    (mu, cov)
}

/// Factor used by the Gaussian sampler: exact Cholesky when it exists,
/// otherwise Cholesky of `cov + eps I` with `eps = 1e-10 tr/d`, grown
/// geometrically if still needed. A zero covariance yields a zero factor.
pub fn sampling_factor(cov: ArrayView2<f64>) -> Array2<f64> {
    let d = cov.nrows();
    if let Some(l) = cholesky(cov, 0.0) {
        return l;
    }
    let tr: f64 = cov.diag().sum();
    if !(tr > 0.0) {
        return Array2::zeros((d, d));
    }
    let mut eps = 1e-10 * tr / d as f64;
    for _ in 0..12 {
        let jittered = &cov + &(Array2::<f64>::eye(d) * eps);
        if let Some(l) = cholesky(jittered.view(), 0.0) {
            return l;
        }
        eps *= 10.0;
    }
    Array2::from_diag(&cov.diag().mapv(|v| v.max(0.0).sqrt()))
}

pub fn gaussian_generate<R: Rng + ?Sized>(source: ArrayView2<f64>, m: usize, rng: &mut R) -> Result<Array2<f64>> {
    let n = source.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let d = source.ncols();
    let (mu, cov) = mean_and_cov(source);
    let l = sampling_factor(cov.view());
    let z = Array2::from_shape_simple_fn((m, d), || rng.sample::<f64, _>(StandardNormal));
    Ok(z.dot(&l.t()) + &mu)
}

/// Per-feature sample standard deviation; all ones for a single row.
pub fn feature_sd(source: ArrayView2<f64>) -> Array1<f64> {
    let n = source.nrows();
    if n < 2 {
        return Array1::ones(source.ncols());
    }
    source.var_axis(Axis(0), 1.0).mapv(f64::sqrt)
}

/// Bootstrap row plus `N(0, (c s_j)^2)` noise per feature.
pub fn perturbed_generate<R: Rng + ?Sized>(
    source: ArrayView2<f64>,
    m: usize,
    params: PerturbParams,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let n = source.nrows();
    if n < 1 {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let scale = feature_sd(source) * params.noise_scale;
    let mut out = Array2::<f64>::zeros((m, source.ncols()));
    for mut row in out.rows_mut() {
        let t = rng.random_range(0..n);
        row.assign(&source.row(t));
        if params.noise_scale > 0.0 {
            for (v, s) in row.iter_mut().zip(scale.iter()) {
                *v += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(out)
}

pub fn bootstrap_generate<R: Rng + ?Sized>(source: ArrayView2<f64>, m: usize, rng: &mut R) -> Result<Array2<f64>> {
    let n = source.nrows();
    if n < 1 {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
    Ok(source.select(Axis(0), &idx))
}

/// Reweighting counts `(floor(n0 / n1), 1)`. Panics if `n1 == 0`.
pub fn reweight_counts(n1: usize, n0: usize) -> (usize, usize) {
    assert!(n1 >= 1, "reweight_counts needs n1 >= 1");
    (n0 / n1, 1)
}

/// The `w1 - 1` extra copies of every source row that realise weight `w1`.
pub fn reweight_replicate(source: ArrayView2<f64>, w1: usize) -> Array2<f64> {
    let extra = w1.saturating_sub(1);
    let idx: Vec<usize> = (0..source.nrows()).flat_map(|i| std::iter::repeat(i).take(extra)).collect();
    source.select(Axis(0), &idx)
}

/// Squared distance from `p` to the nearest row of `centers`.
pub fn nearest_sq_dist(p: ArrayView1<f64>, centers: ArrayView2<f64>) -> f64 {
    centers
        .rows()
        .into_iter()
        .map(|c| c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn smote_identical_points() {
        let src = array![[1.5, -2.0], [1.5, -2.0]];
        let out = smote_generate(src.view(), 20, SmoteParams { k: 1 }, &mut seeded(0)).unwrap();
        assert!(out.rows().into_iter().all(|r| r == array![1.5, -2.0]));
    }

    #[test]
    fn smote_forced_draws() {
        let src = array![[0.0, 0.0], [1.0, 0.0]];
        let nb = Neighbors::build(src.view(), 1).unwrap();
        assert_eq!(interpolate(src.view(), &nb, 0, 0, 0.5), array![0.5, 0.0]);
        assert_eq!(interpolate(src.view(), &nb, 0, 0, 1.5), array![1.5, 0.0]);
    }

    #[test]
    fn smote_errors() {
        let one = array![[0.0]];
        assert!(matches!(smote_generate(one.view(), 1, SmoteParams { k: 1 }, &mut seeded(0)), Err(Error::TooFewSamples { .. })));
        let two = array![[0.0], [1.0]];
        assert!(matches!(smote_generate(two.view(), 1, SmoteParams { k: 2 }, &mut seeded(0)), Err(Error::BadK { .. })));
        assert!(matches!(smote_generate(two.view(), 1, SmoteParams { k: 0 }, &mut seeded(0)), Err(Error::BadK { .. })));
    }

    #[test]
    fn neighbour_ties_by_index() {
        let src = array![[0.0], [1.0], [-1.0], [2.0]];
        let nb = Neighbors::build(src.view(), 2).unwrap();
        assert_eq!(nb.lists[0], vec![1, 2]);
        assert_eq!(nb.lists[1], vec![0, 3]);
    }

    #[test]
    fn smote_stays_in_unit_disc() {
        let src = Array2::from_shape_fn((50, 2), |(i, j)| {
            let a = i as f64 * std::f64::consts::TAU / 50.0;
            if j == 0 { a.cos() } else { a.sin() }
        });
        let out = smote_generate(src.view(), 1000, SmoteParams { k: 3 }, &mut seeded(9)).unwrap();
        for r in out.rows() {
            assert!(r.dot(&r).sqrt() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn biased_smote_extrapolates_half_the_time() {
        // two points, k=1: the neighbour is always the other point, so the draw leaves [0,1] iff u > 1
        let src = array![[0.0], [1.0]];
        let m = 100_000;
        let plain = smote_generate(src.view(), m, SmoteParams { k: 1 }, &mut seeded(1)).unwrap();
        assert!(plain.iter().all(|v| (0.0..=1.0).contains(v)));
        let biased = biased_smote_generate(src.view(), m, SmoteParams { k: 1 }, &mut seeded(1)).unwrap();
        assert!(biased.iter().all(|v| (-0.5..=1.5).contains(v)));
        let outside = biased.iter().filter(|v| !(0.0..=1.0).contains(*v)).count() as f64 / m as f64;
        assert!((outside - 0.5).abs() < 4.0 * (0.25 / m as f64).sqrt());
    }

    #[test]
    fn biased_smote_matches_formula_on_shared_draws() {
        let mut r = seeded(2);
        let src = Array2::from_shape_fn((12, 3), |_| r.random::<f64>());
        let nb = Neighbors::build(src.view(), 3).unwrap();
        let out = biased_smote_generate(src.view(), 50, SmoteParams { k: 3 }, &mut seeded(5)).unwrap();
        let mut rng = seeded(5);
        for row in out.rows() {
            let t = rng.random_range(0..12);
            let j = rng.random_range(0..3);
            let u = 0.5 + rng.random::<f64>();
            assert_eq!(row, interpolate(src.view(), &nb, t, j, u));
        }
    }

    #[test]
    fn gaussian_degenerate_and_errors() {
        let src = array![[3.0, 1.0], [3.0, 1.0], [3.0, 1.0]];
        let out = gaussian_generate(src.view(), 10, &mut seeded(0)).unwrap();
        assert!(out.rows().into_iter().all(|r| r == array![3.0, 1.0]));
        assert!(matches!(gaussian_generate(array![[1.0]].view(), 3, &mut seeded(0)), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn gaussian_singular_covariance_uses_jitter() {
        let src = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        let out = gaussian_generate(src.view(), 200, &mut seeded(3)).unwrap();
        for r in out.rows() {
            assert!((r[0] - r[1]).abs() < 1e-3);
        }
    }

    #[test]
    fn gaussian_mean_clt() {
        let mut rng = seeded(11);
        let m = 10_000;
        let src = Array2::from_shape_simple_fn((m, 2), || rng.sample::<f64, _>(StandardNormal));
        let out = gaussian_generate(src.view(), m, &mut seeded(12)).unwrap();
        let (mu_src, _) = mean_and_cov(src.view());
        let mu = out.mean_axis(Axis(0)).unwrap();
        for j in 0..2 {
            assert!((mu[j] - mu_src[j]).abs() < 4.0 / (m as f64).sqrt());
        }
    }

    #[test]
    fn gaussian_moments_match() {
        let src = array![[0.0, 1.0], [2.0, 0.5], [1.0, 3.0], [4.0, 2.0], [-1.0, 0.0]];
        let (mu, cov) = mean_and_cov(src.view());
        let out = gaussian_generate(src.view(), 100_000, &mut seeded(8)).unwrap();
        let (mu_o, cov_o) = mean_and_cov(out.view());
        for j in 0..2 {
            assert!((mu_o[j] - mu[j]).abs() < 0.03);
            for k in 0..2 {
                assert!((cov_o[[j, k]] - cov[[j, k]]).abs() < 0.05 * cov[[j, j]].max(cov[[k, k]]));
            }
        }
    }

    #[test]
    fn perturbed_examples() {
        let src = array![[1.0, 2.0], [3.0, 4.0]];
        let out = perturbed_generate(src.view(), 30, PerturbParams { noise_scale: 0.0 }, &mut seeded(0)).unwrap();
        assert!(out.rows().into_iter().all(|r| r == src.row(0) || r == src.row(1)));

        let single = array![[5.0, 5.0]];
        let out = perturbed_generate(single.view(), 5, PerturbParams { noise_scale: 0.0 }, &mut seeded(0)).unwrap();
        assert!(out.rows().into_iter().all(|r| r == array![5.0, 5.0]));
        assert!(perturbed_generate(Array2::zeros((0, 2)).view(), 1, PerturbParams::default(), &mut seeded(0)).is_err());
    }

    #[test]
    fn perturbed_variance_decomposition() {
        let src = array![[0.0], [2.0]];
        let m = 100_000;
        let out = perturbed_generate(src.view(), m, PerturbParams { noise_scale: 1.0 }, &mut seeded(6)).unwrap();
        let var = out.var_axis(Axis(0), 1.0)[0];
        assert!((var - 3.0).abs() < 0.05 * 3.0, "{var}");
    }

    #[test]
    fn bootstrap_examples() {
        let single = array![[7.0, 8.0]];
        let out = bootstrap_generate(single.view(), 4, &mut seeded(0)).unwrap();
        assert!(out.rows().into_iter().all(|r| r == array![7.0, 8.0]));

        let src = array![[0.0], [1.0], [2.0], [3.0]];
        let m = 100_000;
        let out = bootstrap_generate(src.view(), m, &mut seeded(1)).unwrap();
        let mut counts = [0usize; 4];
        for r in out.rows() {
            counts[r[0] as usize] += 1;
        }
        let sd = (m as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - m as f64 / 4.0).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn reweight_examples() {
        assert_eq!(reweight_counts(10, 100), (10, 1));
        assert_eq!(reweight_counts(7, 100), (14, 1));
        assert_eq!(reweight_counts(50, 50), (1, 1));
        let extra = reweight_replicate(array![[1.0], [2.0]].view(), 3);
        assert_eq!(extra, array![[1.0], [1.0], [2.0], [2.0]]);
    }

    #[test]
    fn names_roundtrip() {
        for name in Generator::NAMES {
            let g: Generator = name.parse().unwrap();
            assert_eq!(g.name(), name);
        }
        assert!("nope".parse::<Generator>().is_err());
    }

    #[test]
    fn shape_and_determinism() {
        let mut r = seeded(1);
        let src = Array2::from_shape_fn((15, 4), |_| r.random::<f64>());
        for name in Generator::NAMES {
            let g: Generator = name.parse().unwrap();
            let a = g.generate(src.view(), 33, &mut seeded(3)).unwrap();
            let b = g.generate(src.view(), 33, &mut seeded(3)).unwrap();
            assert_eq!(a.dim(), (33, 4));
            assert!(a.iter().all(|v| v.is_finite()));
            assert_eq!(a, b);
            assert_eq!(g.generate(src.view(), 0, &mut seeded(3)).unwrap().dim(), (0, 4));
        }
    }
}
