//! Study configuration.
//!
//! A config is a TOML document with `[study]`, `[dgp]`, `[generator]`,
//! `[train]` and `[output]` tables. Every field has a default, so an empty
//! document is a valid config for any study. Any field can be overridden with
//! a dotted assignment such as `dgp.n=5000` or `generator.name="biased-smote"`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::dgp::{geomspace, linspace, CausalDgp, MeanShift, NonLinear2d, PlantedMtl, Scenario, SigmoidBernoulli};
use super::dist::Dist;
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::loss::{AugmentOptions, Objective};
use crate::model::{Init, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    MeanShift,
    NonLinear,
    SigmoidBernoulli,
    Ate,
    Mtl,
    Prop2Scaling,
    GapShrinkage,
}

impl Study {
    pub const ALL: [Study; 7] = [
        Study::MeanShift,
        Study::NonLinear,
        Study::SigmoidBernoulli,
        Study::Ate,
        Study::Mtl,
        Study::Prop2Scaling,
        Study::GapShrinkage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::MeanShift => "mean_shift",
            Study::NonLinear => "nonlinear",
            Study::SigmoidBernoulli => "sigmoid_bernoulli",
            Study::Ate => "ate",
            Study::Mtl => "mtl",
            Study::Prop2Scaling => "prop2_scaling",
            Study::GapShrinkage => "gap_shrinkage",
        }
    }

    pub fn valid_names() -> String {
        Study::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
    }

    fn default_generator(self) -> &'static str {
        match self {
            Study::SigmoidBernoulli | Study::Ate => "perturbed",
            Study::Mtl => "biased-smote",
            _ => "smote",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;

    /// Accepts `-` or `_` as separator.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Study::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown study {s:?}; valid studies: {}", Study::valid_names())))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StudySection {
    name: Option<String>,
    replicates: usize,
    threshold: f64,
    f_beta: f64,
    split: [f64; 3],
    clip_eta: f64,
    recalibrate: bool,
    oracle_outcomes: bool,
    n0g: Option<usize>,
    n1_syn: Option<usize>,
    n0_syn: Option<usize>,
    d_minus: Option<usize>,
    transfer_objective: Objective,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            name: None,
            replicates: 100,
            threshold: 0.5,
            f_beta: 1.0,
            split: [0.6, 0.2, 0.2],
            clip_eta: 0.01,
            recalibrate: true,
            oracle_outcomes: false,
            n0g: None,
            n1_syn: None,
            n0_syn: None,
            d_minus: None,
            transfer_objective: Objective::Bc,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GeneratorSection {
    name: Option<String>,
    k: usize,
    noise_scale: f64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection { name: None, k: 5, noise_scale: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSection {
    epochs: usize,
    learning_rate: f64,
    intercept: bool,
    /// `zeros` or `gaussian`.
    init: String,
    init_sd: f64,
    grad_tol: Option<f64>,
    l2: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { epochs: 100, learning_rate: 0.1, intercept: true, init: "zeros".into(), init_sd: 0.01, grad_tol: None, l2: 0.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    timing: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    study: StudySection,
    dgp: toml::Table,
    generator: GeneratorSection,
    train: TrainSection,
    output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanShiftParams {
    pub n: usize,
    pub d: usize,
    pub pi1: f64,
    /// Every coordinate of the shift vector.
    pub shift: f64,
    pub base: Dist,
    /// Per-coordinate scales spaced geometrically over this range, unless `scales` is given.
    pub scale_range: [f64; 2],
    pub scales: Option<Vec<f64>>,
    pub center: bool,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        MeanShiftParams {
            n: 30_000,
            d: 10,
            pi1: 0.05,
            shift: 0.6,
            base: Dist::STANDARD_NORMAL,
            scale_range: [0.2, 5.0],
            scales: None,
            center: true,
        }
    }
}

fn resolve_scales(scales: &Option<Vec<f64>>, range: [f64; 2], d: usize) -> Result<Vec<f64>> {
    match scales {
        Some(s) => Ok(s.clone()),
        None if range[0] > 0.0 && range[1] > 0.0 => Ok(geomspace(range[0], range[1], d)),
        None => Err(Error::Config(format!("scale_range must be positive, got {range:?}"))),
    }
}

impl MeanShiftParams {
    pub fn build(&self) -> Result<MeanShift> {
        let m = MeanShift {
            base: self.base,
            shift: vec![self.shift; self.d],
            pi1: self.pi1,
            n: self.n,
            d: self.d,
            scales: resolve_scales(&self.scales, self.scale_range, self.d)?,
            center: self.center,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMap {
    Linear,
    Poly2,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonLinearParams {
    pub scenario: Scenario,
    pub n: usize,
    pub pi1: f64,
    pub noise: f64,
    pub features: FeatureMap,
}

impl Default for NonLinearParams {
    fn default() -> Self {
        NonLinearParams { scenario: Scenario::Rings, n: 5000, pi1: 0.1, noise: 0.25, features: FeatureMap::Poly2 }
    }
}

impl NonLinearParams {
    pub fn build(&self) -> Result<NonLinear2d> {
        let nl = NonLinear2d { scenario: self.scenario, n: self.n, pi1: self.pi1, noise: self.noise };
        nl.validate()?;
        Ok(nl)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmoidParams {
    pub n: usize,
    pub d: usize,
    pub cov: Dist,
    /// Every slope, unless `beta_true` is given.
    pub beta: f64,
    pub beta_true: Option<Vec<f64>>,
    pub intercept: f64,
}

impl Default for SigmoidParams {
    fn default() -> Self {
        SigmoidParams { n: 1000, d: 10, cov: Dist::Logistic { mu: 0.0, s: 1.0 }, beta: 0.5, beta_true: None, intercept: -3.0 }
    }
}

impl SigmoidParams {
    pub fn build(&self) -> Result<SigmoidBernoulli> {
        let s = SigmoidBernoulli {
            cov: self.cov,
            beta_true: self.beta_true.clone().unwrap_or_else(|| vec![self.beta; self.d]),
            intercept: self.intercept,
            n: self.n,
            d: self.d,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AteParams {
    pub n: usize,
    pub d: usize,
    pub cov: Dist,
    /// Every propensity slope.
    pub gamma: f64,
    pub gamma0: f64,
    /// Treated-arm slopes, default evenly spaced from 1 to -1.
    pub beta1: Option<Vec<f64>>,
    /// Control-arm slopes, default evenly spaced from -0.5 to 0.5.
    pub beta0: Option<Vec<f64>>,
    pub tau: f64,
    pub curvature: f64,
    pub noise_sd: f64,
}

impl Default for AteParams {
    fn default() -> Self {
        AteParams {
            n: 2000,
            d: 5,
            cov: Dist::T { nu: 6.0 },
            gamma: 0.5,
            gamma0: -3.0,
            beta1: None,
            beta0: None,
            tau: 1.0,
            curvature: 0.3,
            noise_sd: 1.0,
        }
    }
}

impl AteParams {
    pub fn build(&self) -> Result<CausalDgp> {
        let c = CausalDgp {
            cov: self.cov,
            gamma: vec![self.gamma; self.d],
            gamma0: self.gamma0,
            beta1: self.beta1.clone().unwrap_or_else(|| linspace(1.0, -1.0, self.d)),
            beta0: self.beta0.clone().unwrap_or_else(|| linspace(-0.5, 0.5, self.d)),
            tau_true: self.tau,
            curvature: self.curvature,
            noise_sd: self.noise_sd,
            n: self.n,
            d: self.d,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtlParams {
    pub d: usize,
    pub tasks: usize,
    pub rank: usize,
    pub n_k: usize,
    pub alpha_sd: f64,
    pub intercept: f64,
    pub cov: Dist,
    pub scale_range: [f64; 2],
    pub scales: Option<Vec<f64>>,
    /// Size of an extra task fitted through each estimated subspace; 0 skips the transfer step.
    pub transfer_n: usize,
}

impl Default for MtlParams {
    fn default() -> Self {
        MtlParams {
            d: 10,
            tasks: 6,
            rank: 2,
            n_k: 5000,
            alpha_sd: 2.0,
            intercept: -3.0,
            cov: Dist::STANDARD_NORMAL,
            scale_range: [0.2, 5.0],
            scales: None,
            transfer_n: 0,
        }
    }
}

impl MtlParams {
    pub fn build(&self) -> Result<PlantedMtl> {
        let p = PlantedMtl {
            d: self.d,
            tasks: self.tasks,
            rank: self.rank,
            n_k: self.n_k,
            alpha_sd: self.alpha_sd,
            intercept: self.intercept,
            scales: resolve_scales(&self.scales, self.scale_range, self.d)?,
            cov: self.cov,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Minority covariates `N(0, I_d)`, fixed model `σ(curvature·Σ x_j² + offset)`.
/// The default puts the loss hinge in the tails, at `|x|² = 4`, where SMOTE
/// cannot place mass beyond the sample's hull.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop2Params {
    pub n1: usize,
    pub d: usize,
    pub ks: Vec<usize>,
    /// Synthetic and true draws per replicate.
    pub m: usize,
    pub curvature: f64,
    pub offset: f64,
}

impl Default for Prop2Params {
    fn default() -> Self {
        Prop2Params { n1: 200, d: 2, ks: vec![2, 10, 50], m: 20_000, curvature: -1.0, offset: 4.0 }
    }
}

impl Prop2Params {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 || self.m < 1 || self.ks.is_empty() {
            return Err(Error::Config("prop2 needs d >= 1, m >= 1 and at least one K".into()));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k < 1 || k >= self.n1) {
            return Err(Error::BadK { k, n: self.n1 });
        }
        Ok(())
    }
}

/// Centred mean-shift draws at several sample sizes, fixed model `σ(xᵀ1)`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapParams {
    pub sizes: Vec<usize>,
    pub d: usize,
    pub pi1: f64,
    pub shift: f64,
    pub base: Dist,
}

impl Default for GapParams {
    fn default() -> Self {
        GapParams { sizes: vec![2000, 8000], d: 5, pi1: 0.1, shift: 1.0, base: Dist::STANDARD_NORMAL }
    }
}

impl GapParams {
    pub fn build(&self, n: usize) -> Result<MeanShift> {
        let mut m = MeanShift::plain(self.base, self.shift, self.pi1, n, self.d);
        m.center = true;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DgpParams {
    MeanShift(MeanShiftParams),
    NonLinear(NonLinearParams),
    SigmoidBernoulli(SigmoidParams),
    Ate(AteParams),
    Mtl(MtlParams),
    Prop2(Prop2Params),
    Gap(GapParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub threshold: f64,
    pub f_beta: f64,
    pub split: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AteOptions {
    pub clip_eta: f64,
    pub recalibrate: bool,
    /// Use the true conditional means as outcome models.
    pub oracle_outcomes: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputOptions {
    pub dir: Option<PathBuf>,
    /// Add a wall-time column; off by default so outputs stay byte-identical.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub study: Study,
    pub replicates: usize,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub dgp: DgpParams,
    pub generator: Generator,
    pub augment: AugmentOptions,
    pub train: TrainConfig,
    pub eval: EvalOptions,
    pub ate: AteOptions,
    pub d_minus: Option<usize>,
    /// Objective for the new task in the multi-task transfer step.
    pub transfer_objective: Objective,
    pub output: OutputOptions,
}

fn section<T: DeserializeOwned>(table: toml::Table, what: &str) -> Result<T> {
    toml::Value::Table(table).try_into().map_err(|e| Error::Config(format!("[{what}]: {e}")))
}

impl StudyConfig {
    /// Defaults for `study`.
    pub fn defaults(study: Study) -> Self {
        Self::from_table(Some(study), toml::Table::new()).expect("defaults are valid")
    }

    /// Builds a config from a parsed document. `study` overrides `[study].name`.
    pub fn from_table(study: Option<Study>, table: toml::Table) -> Result<Self> {
        let raw: RawConfig = section(table, "config")?;
        let study = match (study, &raw.study.name) {
            (Some(s), _) => s,
            (None, Some(name)) => name.parse()?,
            (None, None) => return Err(Error::Config(format!("no study given; valid studies: {}", Study::valid_names()))),
        };
        let dgp = match study {
            Study::MeanShift => DgpParams::MeanShift(section(raw.dgp, "dgp")?),
            Study::NonLinear => DgpParams::NonLinear(section(raw.dgp, "dgp")?),
            Study::SigmoidBernoulli => DgpParams::SigmoidBernoulli(section(raw.dgp, "dgp")?),
            Study::Ate => DgpParams::Ate(section(raw.dgp, "dgp")?),
            Study::Mtl => DgpParams::Mtl(section(raw.dgp, "dgp")?),
            Study::Prop2Scaling => DgpParams::Prop2(section(raw.dgp, "dgp")?),
            Study::GapShrinkage => DgpParams::Gap(section(raw.dgp, "dgp")?),
        };
        let g = &raw.generator;
        let generator = Generator::from_name(g.name.as_deref().unwrap_or(study.default_generator()), g.k, g.noise_scale)?;
        let t = &raw.train;
        let init = match t.init.as_str() {
            "zeros" => Init::Zeros,
            // the seed is replaced per replicate
            "gaussian" => Init::Gaussian { seed: 0, sd: t.init_sd },
            other => return Err(Error::Config(format!("unknown init {other:?}; expected zeros or gaussian"))),
        };
        let train = TrainConfig {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            init,
            grad_tol: t.grad_tol,
            l2: t.l2,
            intercept: t.intercept,
        };
        train.validate()?;
        let s = &raw.study;
        if s.replicates < 1 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        let cfg = StudyConfig {
            study,
            replicates: s.replicates,
            jobs: None,
            dgp,
            generator,
            augment: AugmentOptions { n0g: s.n0g, n1_syn: s.n1_syn, n0_syn: s.n0_syn },
            train,
            eval: EvalOptions { threshold: s.threshold, f_beta: s.f_beta, split: s.split },
            ate: AteOptions { clip_eta: s.clip_eta, recalibrate: s.recalibrate, oracle_outcomes: s.oracle_outcomes },
            d_minus: s.d_minus,
            transfer_objective: s.transfer_objective,
            output: OutputOptions { dir: raw.output.dir.clone(), timing: raw.output.timing },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(study: Option<Study>, text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(study, table)
    }

    /// Checks that the DGP parameters build and the evaluation options are sane.
    pub fn validate(&self) -> Result<()> {
        match &self.dgp {
            DgpParams::MeanShift(p) => p.build().map(drop)?,
            DgpParams::NonLinear(p) => p.build().map(drop)?,
            DgpParams::SigmoidBernoulli(p) => p.build().map(drop)?,
            DgpParams::Ate(p) => p.build().map(drop)?,
            DgpParams::Mtl(p) => p.build().map(drop)?,
            DgpParams::Prop2(p) => p.validate()?,
            DgpParams::Gap(p) => {
                for &n in &p.sizes {
                    p.build(n)?;
                }
            }
        }
        if !(self.eval.threshold >= 0.0 && self.eval.threshold <= 1.0) {
            return Err(Error::BadThreshold(self.eval.threshold));
        }
        if !(self.eval.f_beta > 0.0 && self.eval.f_beta.is_finite()) {
            return Err(Error::BadBeta(self.eval.f_beta));
        }
        let sp = self.eval.split;
        if sp.iter().any(|&p| !(p >= 0.0)) || (sp.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::BadProbabilities(sp));
        }
        if !(self.ate.clip_eta > 0.0 && self.ate.clip_eta < 0.5) {
            return Err(Error::BadClip(self.ate.clip_eta));
        }
        Ok(())
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back to
/// a bare string so `generator.name=smote` works without quotes.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `path.to.key=value` to a config document.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad key path {path:?}")));
    }
    let (last, parents) = keys.split_last().expect("nonempty");
    let mut cur = table;
    for k in parents {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{k:?} in {path:?} is not a table")))?;
    }
    cur.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}
