//! The Monte Carlo runner.
//!
//! Each replicate owns an [`RngStream`]; stage streams are shared by the three
//! methods, so raw, syn and bc see the same data and the same synthetic sets
//! and their results pair by replicate.

use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use super::config::{AteParams, DgpParams, FeatureMap, GapParams, MeanShiftParams, MtlParams, NonLinearParams, Prop2Params, SigmoidParams, Study, StudyConfig};
use super::dgp::poly2;
use super::report::{aggregate, MtlDetail, reports_csv, summary_markdown, sweep_csv, sweep_means, write_file, Summary, TrialReport};
use crate::ate::{aipw, fit_outcome_models, fit_propensity_on};
use crate::dataset::{split_train_val_test, Dataset};
use crate::error::{Error, Result};
use crate::generators::{smote_generate, SmoteParams};
use crate::loss::{augment, delta1_hat_oracle, gap_delta, AugmentedTrainSet, Objective};
use crate::metrics::{beta_mse, compute_metrics, confusion};
use crate::model::{classify_batch, fit, Init, LogisticModel, TrainConfig};
use crate::mtl::{estimate_subspace, fit_all_tasks, leading_subspace, mean_column_sq_error, transfer_fit};
use crate::metrics::sin_theta_distance;
use crate::rng::{RngStream, Stage};

/// Runs every replicate of `cfg.study`; rows are ordered by replicate, then
/// by method (raw, syn, bc) or sweep value.
pub fn run_study(cfg: &StudyConfig, master_seed: u64) -> Result<Vec<TrialReport>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let per_rep: Vec<Vec<TrialReport>> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, master_seed, rep).map_err(|e| e.in_replicate(rep)))
            .collect::<Result<_>>()
    })?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// One replicate of the configured study.
pub fn run_replicate(cfg: &StudyConfig, master_seed: u64, rep: usize) -> Result<Vec<TrialReport>> {
    let rs = RngStream::new(master_seed, rep as u64);
    match &cfg.dgp {
        DgpParams::MeanShift(p) => mean_shift_replicate(cfg, p, &rs, rep),
        DgpParams::NonLinear(p) => nonlinear_replicate(cfg, p, &rs, rep),
        DgpParams::SigmoidBernoulli(p) => sigmoid_replicate(cfg, p, &rs, rep),
        DgpParams::Ate(p) => ate_replicate(cfg, p, &rs, rep),
        DgpParams::Mtl(p) => mtl_replicate(cfg, p, &rs, rep),
        DgpParams::Prop2(p) => prop2_replicate(cfg, p, &rs, rep),
        DgpParams::Gap(p) => gap_replicate(cfg, p, &rs, rep),
    }
}

/// The configured trainer with a per-replicate init seed.
fn train_config(cfg: &StudyConfig, rs: &RngStream) -> TrainConfig {
    let mut t = cfg.train.clone();
    if let Init::Gaussian { sd, .. } = t.init {
        t.init = Init::Gaussian { seed: rs.stage(Stage::Init).random(), sd };
    }
    t
}

fn objective_set<'a>(obj: Objective, raw: &'a AugmentedTrainSet, aug: &'a AugmentedTrainSet) -> &'a AugmentedTrainSet {
    if obj == Objective::Raw {
        raw
    } else {
        aug
    }
}

/// Split, augment the training part, fit the three objectives and score each
/// on the test part.
fn classification_replicate(cfg: &StudyConfig, data: Dataset, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let tvt = split_train_val_test(&data, cfg.eval.split, &mut rs.stage(Stage::Split))?;
    let aug = augment(&tvt.train, &cfg.generator, &cfg.augment, &mut rs.stage(Stage::Generator))?;
    let raw = AugmentedTrainSet::raw_only(tvt.train.clone());
    let train = train_config(cfg, rs);
    let mut out = Vec::with_capacity(3);
    for obj in Objective::ALL {
        let start = Instant::now();
        let model = fit(obj, objective_set(obj, &raw, &aug), &train)?.model;
        let pred = classify_batch(&model, tvt.test.x.view(), cfg.eval.threshold)?;
        let metrics = compute_metrics(&confusion(&tvt.test.y, &pred)?, cfg.eval.f_beta)?;
        out.push(TrialReport {
            metrics: Some(metrics),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..TrialReport::new(rep, obj.name(), cfg.generator.name())
        });
    }
    Ok(out)
}

fn mean_shift_replicate(cfg: &StudyConfig, p: &MeanShiftParams, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let data = p.build()?.generate(&mut rs.stage(Stage::Data))?;
    classification_replicate(cfg, data, rs, rep)
}

fn nonlinear_replicate(cfg: &StudyConfig, p: &NonLinearParams, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let mut data = p.build()?.generate(&mut rs.stage(Stage::Data))?;
    if p.features == FeatureMap::Poly2 {
        data = Dataset::new(poly2(&data.x), data.y)?;
    }
    classification_replicate(cfg, data, rs, rep)
}

/// Coefficient recovery: fit on the full sample, compare slopes to the truth.
fn sigmoid_replicate(cfg: &StudyConfig, p: &SigmoidParams, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let dgp = p.build()?;
    let data = dgp.generate(&mut rs.stage(Stage::Data))?;
    let aug = augment(&data, &cfg.generator, &cfg.augment, &mut rs.stage(Stage::Generator))?;
    let raw = AugmentedTrainSet::raw_only(data);
    let truth = Array1::from(dgp.beta_true.clone());
    let train = train_config(cfg, rs);
    let mut out = Vec::with_capacity(3);
    for obj in Objective::ALL {
        let start = Instant::now();
        let model = fit(obj, objective_set(obj, &raw, &aug), &train)?.model;
        out.push(TrialReport {
            beta_mse: Some(beta_mse(model.slopes(), truth.view())?),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..TrialReport::new(rep, obj.name(), cfg.generator.name())
        });
    }
    Ok(out)
}

/// AIPW with each propensity variant. The error is measured against the
/// sample's conditional effect, the mean of `μ1(x) − μ0(x)`.
fn ate_replicate(cfg: &StudyConfig, p: &AteParams, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let sample = p.build()?.generate(&mut rs.stage(Stage::Data))?;
    let cd = &sample.data;
    let (mu1, mu0) = if cfg.ate.oracle_outcomes {
        (sample.mu1.clone(), sample.mu0.clone())
    } else {
        let om = fit_outcome_models(cd)?;
        (om.predict(1, cd.x.view()).to_vec(), om.predict(0, cd.x.view()).to_vec())
    };
    let treatment = cd.treatment_dataset()?;
    let aug = augment(&treatment, &cfg.generator, &cfg.augment, &mut rs.stage(Stage::Generator))?;
    let raw = AugmentedTrainSet::raw_only(treatment);
    let target = sample.sample_ate();
    let train = train_config(cfg, rs);
    let mut out = Vec::with_capacity(3);
    for obj in Objective::ALL {
        let start = Instant::now();
        let model = fit_propensity_on(objective_set(obj, &raw, &aug), obj, &train, cfg.ate.recalibrate)?;
        let e = model.predict_batch(cd.x.view())?.to_vec();
        let res = aipw(cd, &mu1, &mu0, &e, cfg.ate.clip_eta, obj)?;
        out.push(TrialReport {
            tau_error: Some(res.tau_hat - target),
            value: Some(res.tau_hat),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..TrialReport::new(rep, obj.name(), cfg.generator.name())
        });
    }
    Ok(out)
}

/// Per-task fits stacked into `M̂`; reports the subspace error of the leading
/// `rank` eigenvectors, the selected rank and the mean per-task slope error.
/// With `transfer_n > 0` an extra task is fitted through each method's
/// subspace and its squared slope error goes to `value`.
fn mtl_replicate(cfg: &StudyConfig, p: &MtlParams, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let planted = p.build()?;
    let sample = planted.generate(&mut rs.stage(Stage::Data))?;
    let seeds: Vec<u64> = (0..p.tasks).map(|k| rs.stage(Stage::Custom(k as u64)).random()).collect();
    let extra = match p.transfer_n {
        0 => None,
        n => Some(planted.draw_task(&sample.basis, n, &mut rs.stage(Stage::Oracle))?),
    };
    let train = train_config(cfg, rs);
    let mut out = Vec::with_capacity(3);
    for obj in Objective::ALL {
        let start = Instant::now();
        let m_hat = fit_all_tasks(&sample.tasks, obj, &cfg.generator, &cfg.augment, &train, &seeds)?;
        let subspace = estimate_subspace(m_hat.view(), cfg.d_minus)?;
        let lead = leading_subspace(m_hat.view(), p.rank);
        let diff = &m_hat - &sample.m_true;
        let task_errors: Vec<f64> = diff.columns().into_iter().map(|c| c.dot(&c)).collect();
        let value = match &extra {
            Some((data, beta)) => {
                let mut rng = rs.stage(Stage::Custom(TRANSFER_STREAM));
                let tf = transfer_fit(data, &subspace, cfg.transfer_objective, &cfg.generator, &cfg.augment, &train, &mut rng)?;
                let e = &tf.beta - beta;
                Some(e.dot(&e))
            }
            None => None,
        };
        out.push(TrialReport {
            sin_theta: Some(sin_theta_distance(lead.view(), sample.basis.view())?),
            r_hat: Some(subspace.r_hat),
            beta_mse: Some(mean_column_sq_error(m_hat.view(), sample.m_true.view())),
            value,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            mtl: Some(MtlDetail { task_errors, subspace }),
            ..TrialReport::new(rep, obj.name(), cfg.generator.name())
        });
    }
    Ok(out)
}

const TRANSFER_STREAM: u64 = 1 << 20;

fn squares(x: ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|v| v * v)
}

/// The fixed model of the SMOTE-bias sweep: `σ(curvature·Σ x_j² + offset)`,
/// written as a logistic model on squared features.
pub fn prop2_model(d: usize, curvature: f64, offset: f64) -> LogisticModel {
    let mut beta = vec![curvature; d];
    beta.push(offset);
    LogisticModel::new(Array1::from(beta), true)
}

/// `|Δ̂₁|` of SMOTE for each K, with the true draws shared across K.
fn prop2_replicate(cfg: &StudyConfig, p: &Prop2Params, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let normal = || rand_distr::StandardNormal;
    let mut data_rng = rs.stage(Stage::Data);
    let minority = Array2::from_shape_simple_fn((p.n1, p.d), || data_rng.sample::<f64, _>(normal()));
    let mut oracle_rng = rs.stage(Stage::Oracle);
    let truth = Array2::from_shape_simple_fn((p.m, p.d), || oracle_rng.sample::<f64, _>(normal()));
    let model = prop2_model(p.d, p.curvature, p.offset);
    let truth_sq = squares(truth.view());
    let mut out = Vec::with_capacity(p.ks.len());
    for (i, &k) in p.ks.iter().enumerate() {
        let start = Instant::now();
        let syn = smote_generate(minority.view(), p.m, SmoteParams { k }, &mut rs.stage(Stage::Custom(i as u64)))?;
        let d1 = delta1_hat_oracle(&model, truth_sq.view(), squares(syn.view()).view())?;
        out.push(TrialReport {
            param: Some(k as f64),
            value: Some(d1.abs()),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..TrialReport::new(rep, "syn", "smote")
        });
    }
    let _ = cfg;
    Ok(out)
}

/// `|Δ̂₁ − Δ̂₀|` for each sample size, fixed model `σ(xᵀ1)`.
fn gap_replicate(cfg: &StudyConfig, p: &GapParams, rs: &RngStream, rep: usize) -> Result<Vec<TrialReport>> {
    let model = LogisticModel::new(Array1::ones(p.d), false);
    let mut out = Vec::with_capacity(p.sizes.len());
    for (i, &n) in p.sizes.iter().enumerate() {
        let start = Instant::now();
        let dgp = p.build(n)?;
        let sweep = rs.child(i as u64);
        let data = dgp.generate(&mut sweep.stage(Stage::Data))?;
        let aug = augment(&data, &cfg.generator, &cfg.augment, &mut sweep.stage(Stage::Generator))?;
        let truth = dgp.sample_minority(aug.n1_syn(), &mut sweep.stage(Stage::Oracle))?;
        out.push(TrialReport {
            param: Some(n as f64),
            value: Some(gap_delta(&model, &aug, truth.view())?),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..TrialReport::new(rep, "bc", cfg.generator.name())
        });
    }
    Ok(out)
}

/// What [`write_outputs`] produced.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub summary: Summary,
    pub markdown: String,
    pub files: Vec<String>,
}

/// Writes `reports.csv`, `summary.md` and, for the sweeps, `prop2.csv` or `gap.csv`.
pub fn write_outputs(cfg: &StudyConfig, reports: &[TrialReport], dir: &Path) -> Result<StudyOutput> {
    let summary = aggregate(reports);
    let mut markdown = summary_markdown(&format!("{} ({} replicates, generator {})", cfg.study, cfg.replicates, cfg.generator), &summary);
    let mut files = vec!["reports.csv".to_string(), "summary.md".to_string()];
    write_file(dir, "reports.csv", &reports_csv(reports, cfg.output.timing))?;
    let sweep = match cfg.study {
        Study::Prop2Scaling => Some(("prop2.csv", ("K", "mean_abs_delta1"))),
        Study::GapShrinkage => Some(("gap.csv", ("n", "mean_gap"))),
        _ => None,
    };
    if let Some((name, header)) = sweep {
        let csv = sweep_csv(header, &sweep_means(reports));
        markdown.push_str(&format!("\n## {name}\n\n```\n{csv}```\n"));
        write_file(dir, name, &csv)?;
        files.push(name.to_string());
    }
    write_file(dir, "summary.md", &markdown)?;
    Ok(StudyOutput { summary, markdown, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simbench::config::apply_override;

    fn small(study: Study, overrides: &[&str]) -> StudyConfig {
        let mut t = toml::Table::new();
        for o in overrides {
            apply_override(&mut t, o).unwrap();
        }
        StudyConfig::from_table(Some(study), t).unwrap()
    }

    #[test]
    fn one_replicate_three_rows() {
        let cfg = small(Study::MeanShift, &["study.replicates=1", "dgp.n=2000"]);
        let rows = run_study(&cfg, 3).unwrap();
        assert_eq!(rows.len(), 3);
        let methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(methods, ["raw", "syn", "bc"]);
        assert!(rows.iter().all(|r| r.metrics.is_some() && r.generator == "smote"));
    }

    #[test]
    fn deterministic_and_schedule_free() {
        let mut cfg = small(Study::MeanShift, &["study.replicates=4", "dgp.n=1500"]);
        cfg.jobs = Some(1);
        let a = run_study(&cfg, 11).unwrap();
        cfg.jobs = Some(4);
        let b = run_study(&cfg, 11).unwrap();
        assert_eq!(reports_csv(&a, false), reports_csv(&b, false));
        let c = run_study(&cfg, 12).unwrap();
        assert_ne!(reports_csv(&a, false), reports_csv(&c, false));
        // a replicate computed alone matches its rows in the full run
        let solo = run_replicate(&cfg, 11, 2).unwrap();
        assert_eq!(solo.iter().map(|r| &r.metrics).collect::<Vec<_>>(), a[6..9].iter().map(|r| &r.metrics).collect::<Vec<_>>());
    }

    #[test]
    fn every_study_runs() {
        let cases: [(Study, &[&str]); 7] = [
            (Study::MeanShift, &["dgp.n=1000"]),
            (Study::NonLinear, &["dgp.n=1000", "dgp.scenario=moons"]),
            (Study::SigmoidBernoulli, &["dgp.n=400"]),
            (Study::Ate, &["dgp.n=600"]),
            (Study::Mtl, &["dgp.n_k=400", "dgp.tasks=3"]),
            (Study::Prop2Scaling, &["dgp.m=500"]),
            (Study::GapShrinkage, &["dgp.sizes=[400, 800]"]),
        ];
        for (study, o) in cases {
            let mut all = vec!["study.replicates=2"];
            all.extend_from_slice(o);
            let rows = run_study(&small(study, &all), 5).unwrap();
            let per_rep = match study {
                Study::Prop2Scaling => 3,
                Study::GapShrinkage => 2,
                _ => 3,
            };
            assert_eq!(rows.len(), 2 * per_rep, "{study}");
            let s = aggregate(&rows);
            assert!(!s.groups.is_empty());
        }
    }

    #[test]
    fn ate_oracle_outcomes_are_exact() {
        let cfg = small(Study::Ate, &["study.replicates=3", "study.oracle_outcomes=true", "dgp.noise_sd=0.0"]);
        for r in run_study(&cfg, 1).unwrap() {
            assert!(r.tau_error.unwrap().abs() < 1e-10, "{:?}", r.tau_error);
        }
    }

    #[test]
    fn mtl_single_task() {
        let cfg = small(Study::Mtl, &["study.replicates=1", "dgp.tasks=1", "dgp.rank=1", "dgp.n_k=2000"]);
        let rows = run_study(&cfg, 2).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            let s = r.sin_theta.unwrap();
            assert!((0.0..=1.0).contains(&s));
            assert_eq!(r.r_hat, Some(1));
            let detail = r.mtl.unwrap();
            assert_eq!(detail.task_errors.len(), 1);
            assert_eq!(detail.task_errors[0], r.beta_mse.unwrap());
        }
    }

    #[test]
    fn mtl_transfer_step() {
        let cfg = small(Study::Mtl, &["study.replicates=1", "dgp.tasks=4", "dgp.n_k=1500", "dgp.transfer_n=1500", "study.transfer_objective=\"raw\""]);
        let rows = run_study(&cfg, 4).unwrap();
        assert!(rows.iter().all(|r| r.value.is_some_and(|v| v.is_finite() && v >= 0.0)));
        assert_eq!(cfg.transfer_objective, Objective::Raw);
    }

    #[test]
    fn errors_carry_replicate() {
        // K larger than the minority class of a tiny draw
        let cfg = small(Study::MeanShift, &["study.replicates=2", "dgp.n=60", "generator.k=50"]);
        let err = run_study(&cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Replicate { .. }), "{err}");
    }

    #[test]
    fn sweep_outputs() {
        let cfg = small(Study::Prop2Scaling, &["study.replicates=2", "dgp.m=300"]);
        let rows = run_study(&cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = write_outputs(&cfg, &rows, dir.path()).unwrap();
        assert!(out.files.contains(&"prop2.csv".to_string()));
        let csv = std::fs::read_to_string(dir.path().join("prop2.csv")).unwrap();
        assert!(csv.starts_with("K,mean_abs_delta1\n2,"));
        assert_eq!(csv.lines().count(), 4);
        assert!(dir.path().join("summary.md").exists());
    }
}
