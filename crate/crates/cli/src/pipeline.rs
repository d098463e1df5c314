//! Single-dataset runs: `train`, `mnist` and `evaluate`.

use std::path::Path;

use anyhow::Context;
use biascorr::dataset::{load_csv, mnist_from_parts, parse_idx_images, parse_idx_labels, pool_images, split_train_val_test, subsample_positive};
use biascorr::metrics::METRIC_COLUMNS;
use biascorr::model::classify_batch;
use biascorr::simbench::report::write_file;
use biascorr::{augment, compute_metrics, confusion, fit, AugmentedTrainSet, Dataset, Error, LogisticModel, MetricReport, Objective, RngStream, Stage};
use rand::Rng;

use crate::args::{EvalArgs, EvaluateCmd, GeneratorArgs, MnistCmd, TrainArgs, TrainCmd};

fn metrics_header(lead: &[&str]) -> String {
    let mut cols = lead.to_vec();
    cols.extend(METRIC_COLUMNS);
    cols.push("degenerate");
    cols.join(",")
}

fn metrics_fields(m: &MetricReport) -> String {
    let mut f: Vec<String> = m.csv_fields().iter().map(|v| v.to_string()).collect();
    f.push(u8::from(m.degenerate).to_string());
    f.join(",")
}

fn score(model: &LogisticModel, data: &Dataset, threshold: f64, f_beta: f64) -> biascorr::Result<MetricReport> {
    let pred = classify_batch(model, data.x.view(), threshold)?;
    compute_metrics(&confusion(&data.y, &pred)?, f_beta)
}

/// Split, augment, fit and score; writes `model.json` and `metrics.csv`.
#[allow(clippy::too_many_arguments)]
fn fit_and_report(
    data: &Dataset,
    method: Objective,
    gen: &GeneratorArgs,
    train: &TrainArgs,
    eval: &EvalArgs,
    rs: &RngStream,
    out: &Path,
    quiet: bool,
) -> anyhow::Result<()> {
    let generator = gen.build().context("generator options")?;
    if method != Objective::Raw && generator.is_none() {
        return Err(Error::Config(format!("--method {method} needs --generator (one of: {})", biascorr::Generator::NAMES.join(", "))).into());
    }
    let cfg = train.config(rs.stage(Stage::Init).random());
    cfg.validate().context("training options")?;
    let tvt = split_train_val_test(data, eval.split(), &mut rs.stage(Stage::Split)).context("splitting the data")?;
    let aug = match (&generator, method) {
        (Some(g), Objective::Syn | Objective::Bc) => {
            augment(&tvt.train, g, &gen.augment(), &mut rs.stage(Stage::Generator)).context("generating synthetic samples")?
        }
        _ => AugmentedTrainSet::raw_only(tvt.train.clone()),
    };
    let fitted = fit(method, &aug, &cfg).context("training")?;
    let gen_name = match (&generator, method) {
        (Some(g), Objective::Syn | Objective::Bc) => g.name(),
        _ => "none",
    };
    let mut csv = metrics_header(&["split", "method", "generator"]);
    csv.push('\n');
    for (split, part) in [("val", &tvt.val), ("test", &tvt.test)] {
        let m = score(&fitted.model, part, eval.threshold, eval.f_beta).with_context(|| format!("scoring the {split} split"))?;
        csv.push_str(&format!("{split},{method},{gen_name},{}\n", metrics_fields(&m)));
        if !quiet {
            println!("{split}: f1 {:.4} recall {:.4} precision {:.4} mcc {:.4}", m.f1, m.recall, m.precision, m.mcc);
        }
    }
    let json = serde_json::to_string_pretty(&fitted.model).context("serialising the model")?;
    write_file(out, "model.json", &(json + "\n")).context("writing model.json")?;
    write_file(out, "metrics.csv", &csv).context("writing metrics.csv")?;
    Ok(())
}

pub fn train(cmd: &TrainCmd, seed: u64, out: &Path, quiet: bool) -> anyhow::Result<()> {
    let mut data = load_csv(&cmd.data, &cmd.label_column).with_context(|| format!("loading {}", cmd.data.display()))?;
    if cmd.swap_labels {
        data = data.swap_labels();
    }
    let rs = RngStream::new(seed, 0);
    fit_and_report(&data, cmd.method.into(), &cmd.generator, &cmd.train, &cmd.eval, &rs, out, quiet)
}

pub fn mnist(cmd: &MnistCmd, seed: u64, out: &Path, quiet: bool) -> anyhow::Result<()> {
    if !cmd.digits.contains(&cmd.positive_digit) {
        return Err(Error::Config(format!("--positive-digit {} is not among --digits {:?}", cmd.positive_digit, cmd.digits)).into());
    }
    if !(cmd.ratio > 0.0 && cmd.ratio < 1.0) {
        return Err(Error::Config(format!("--ratio must lie in (0, 1), got {}; the minority would be empty", cmd.ratio)).into());
    }
    let read = |p: &Path| std::fs::read(p).map_err(Error::Io).with_context(|| format!("reading {}", p.display()));
    let images = parse_idx_images(&read(&cmd.images)?).context("parsing the image file")?;
    let labels = parse_idx_labels(&read(&cmd.labels)?).context("parsing the label file")?;
    let images = pool_images(&images, cmd.pool)?;
    let full = mnist_from_parts(&images, &labels, &cmd.digits, cmd.positive_digit).context("selecting digits")?;
    let rs = RngStream::new(seed, 0);
    let data = subsample_positive(&full, cmd.ratio, &mut rs.stage(Stage::Data)).context("subsampling the positive digit")?;
    if !quiet {
        println!("{} images, {} positives (digit {})", data.n(), data.n1(), cmd.positive_digit);
    }
    fit_and_report(&data, cmd.method.into(), &cmd.generator, &cmd.train, &cmd.eval, &rs, out, quiet)
}

pub fn evaluate(cmd: &EvaluateCmd, out: &Path, quiet: bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&cmd.model).map_err(Error::Io).with_context(|| format!("reading {}", cmd.model.display()))?;
    let model: LogisticModel =
        serde_json::from_str(&text).map_err(|e| Error::InvalidDataset(format!("model file: {e}"))).context("parsing the model")?;
    let mut data = load_csv(&cmd.data, &cmd.label_column).with_context(|| format!("loading {}", cmd.data.display()))?;
    if cmd.swap_labels {
        data = data.swap_labels();
    }
    let m = score(&model, &data, cmd.threshold, cmd.f_beta).context("scoring")?;
    let csv = format!("{}\nall,{},{}\n", metrics_header(&["split", "n"]), data.n(), metrics_fields(&m));
    write_file(out, "evaluation.csv", &csv).context("writing evaluation.csv")?;
    if !quiet {
        println!("f1 {:.4} recall {:.4} precision {:.4} mcc {:.4} accuracy {:.4}", m.f1, m.recall, m.precision, m.mcc, m.accuracy);
    }
    Ok(())
}
