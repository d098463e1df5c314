//! Per-trial rows, aggregation and the written artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::metrics::{MetricReport, METRIC_COLUMNS};
use crate::mtl::SharedSubspace;

/// Multi-task extras kept out of the CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MtlDetail {
    /// `‖β̂_k − β_k‖²` per task.
    pub task_errors: Vec<f64>,
    pub subspace: SharedSubspace,
}

/// One row of `reports.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub replicate: usize,
    /// `raw`, `syn` or `bc`.
    pub method: String,
    pub generator: String,
    /// Sweep value (K or n) for the property studies.
    pub param: Option<f64>,
    pub metrics: Option<MetricReport>,
    pub beta_mse: Option<f64>,
    pub tau_error: Option<f64>,
    pub sin_theta: Option<f64>,
    pub r_hat: Option<usize>,
    /// Study-specific scalar, e.g. `|Δ̂₁|`, the gap, `τ̂` or the transfer error.
    pub value: Option<f64>,
    pub wall_ms: f64,
    pub mtl: Option<MtlDetail>,
}

impl TrialReport {
    pub fn new(replicate: usize, method: &str, generator: &str) -> Self {
        TrialReport {
            replicate,
            method: method.to_string(),
            generator: generator.to_string(),
            param: None,
            metrics: None,
            beta_mse: None,
            tau_error: None,
            sin_theta: None,
            r_hat: None,
            value: None,
            wall_ms: 0.0,
            mtl: None,
        }
    }

    /// Any numeric column by name; `abs_tau_error` is derived.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "beta_mse" => self.beta_mse,
            "tau_error" => self.tau_error,
            "abs_tau_error" => self.tau_error.map(f64::abs),
            "sin_theta" => self.sin_theta,
            "r_hat" => self.r_hat.map(|r| r as f64),
            "value" => self.value,
            "wall_ms" => Some(self.wall_ms),
            other => self.metrics.as_ref().and_then(|m| m.get(other)),
        }
    }
}

/// Columns after `replicate,method,generator,param`.
pub const VALUE_COLUMNS: [&str; 6] = ["beta_mse", "tau_error", "sin_theta", "r_hat", "value", "degenerate"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn csv_header(timing: bool) -> String {
    let mut cols = vec!["replicate", "method", "generator", "param"];
    cols.extend(METRIC_COLUMNS);
    cols.extend(VALUE_COLUMNS);
    if timing {
        cols.push("wall_ms");
    }
    cols.join(",")
}

pub fn csv_row(r: &TrialReport, timing: bool) -> String {
    let mut f = vec![r.replicate.to_string(), r.method.clone(), r.generator.clone(), opt(r.param)];
    match &r.metrics {
        Some(m) => f.extend(m.csv_fields().iter().map(|v| v.to_string())),
        None => f.extend(METRIC_COLUMNS.iter().map(|_| String::new())),
    }
    f.extend([opt(r.beta_mse), opt(r.tau_error), opt(r.sin_theta), r.r_hat.map(|v| v.to_string()).unwrap_or_default(), opt(r.value)]);
    f.push(r.metrics.as_ref().map(|m| u8::from(m.degenerate).to_string()).unwrap_or_default());
    if timing {
        f.push(format!("{:.3}", r.wall_ms));
    }
    f.join(",")
}

pub fn reports_csv(reports: &[TrialReport], timing: bool) -> String {
    let mut s = csv_header(timing);
    s.push('\n');
    for r in reports {
        s.push_str(&csv_row(r, timing));
        s.push('\n');
    }
    s
}

/// Mean and sample sd; sd is 0 for a single value.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn rmse(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// One-sided sign test p-value for `wins` out of `wins + losses` (ties dropped).
/// Exact binomial below 100 informative pairs, normal approximation with
/// continuity correction from 100 on.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    if n >= 100 {
        let z = (wins as f64 - 0.5 - n as f64 / 2.0) / ((n as f64).sqrt() / 2.0);
        return 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
    }
    // P(X >= wins), X ~ Bin(n, 1/2)
    let ln_choose = |k: usize| libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
    let half = (n as f64) * std::f64::consts::LN_2;
    (wins..=n).map(|k| (ln_choose(k) - half).exp()).sum::<f64>().min(1.0)
}

/// Which direction counts as better for a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Higher,
    Lower,
}

pub fn direction(metric: &str) -> Better {
    match metric {
        "beta_mse" | "abs_tau_error" | "sin_theta" | "value" | "wall_ms" => Better::Lower,
        _ => Better::Higher,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedStat {
    pub metric: String,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// Wins over all pairs, ties counted as non-wins.
    pub win_rate: f64,
    pub p_value: f64,
}

/// Pairs rows of `a` and `b` by replicate and counts how often `a` is better.
pub fn paired(
    reports: &[TrialReport],
    a: impl Fn(&TrialReport) -> bool,
    b: impl Fn(&TrialReport) -> bool,
    metric: &str,
    better: Better,
) -> PairedStat {
    let pick = |sel: &dyn Fn(&TrialReport) -> bool| -> BTreeMap<usize, f64> {
        reports.iter().filter(|r| sel(r)).filter_map(|r| r.get(metric).map(|v| (r.replicate, v))).collect()
    };
    let (va, vb) = (pick(&a), pick(&b));
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (rep, x) in &va {
        let Some(y) = vb.get(rep) else { continue };
        let diff = match better {
            Better::Higher => x - y,
            Better::Lower => y - x,
        };
        if diff > 0.0 {
            wins += 1;
        } else if diff < 0.0 {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    let total = wins + losses + ties;
    PairedStat {
        metric: metric.to_string(),
        wins,
        losses,
        ties,
        win_rate: if total == 0 { 0.0 } else { wins as f64 / total as f64 },
        p_value: sign_test(wins, losses),
    }
}

/// `method_a` against `method_b` at one sweep value (or none).
pub fn paired_methods(reports: &[TrialReport], method_a: &str, method_b: &str, param: Option<f64>, metric: &str) -> PairedStat {
    paired(
        reports,
        |r| r.method == method_a && r.param == param,
        |r| r.method == method_b && r.param == param,
        metric,
        direction(metric),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricStat {
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub method: String,
    pub param: Option<f64>,
    pub stats: Vec<MetricStat>,
}

impl GroupSummary {
    pub fn stat(&self, metric: &str) -> Option<&MetricStat> {
        self.stats.iter().find(|s| s.metric == metric)
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.stat(metric).map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    /// bc against syn for each column, per sweep value.
    pub bc_vs_syn: Vec<(Option<f64>, PairedStat)>,
    /// RMSE of `tau_error` per group, when present.
    pub tau_rmse: Vec<(String, Option<f64>, f64)>,
}

impl Summary {
    pub fn group(&self, method: &str, param: Option<f64>) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.method == method && g.param == param)
    }
}

/// Columns summarised, in display order.
pub const SUMMARY_COLUMNS: [&str; 13] = [
    "recall",
    "precision",
    "f_beta",
    "f1",
    "jaccard",
    "mcc",
    "fowlkes_mallows",
    "accuracy",
    "beta_mse",
    "tau_error",
    "sin_theta",
    "r_hat",
    "value",
];

fn method_rank(m: &str) -> usize {
    match m {
        "raw" => 0,
        "syn" => 1,
        "bc" => 2,
        _ => 3,
    }
}

/// Replicate, then raw/syn/bc, then sweep value.
pub fn canonical_order(a: &TrialReport, b: &TrialReport) -> std::cmp::Ordering {
    a.replicate
        .cmp(&b.replicate)
        .then(method_rank(&a.method).cmp(&method_rank(&b.method)))
        .then(a.method.cmp(&b.method))
        .then(a.param.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.param.unwrap_or(f64::NEG_INFINITY)))
}

fn group_keys(reports: &[TrialReport]) -> Vec<(String, Option<f64>)> {
    let mut keys: Vec<(String, Option<f64>)> = Vec::new();
    for r in reports {
        let k = (r.method.clone(), r.param);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys
}

/// Per (method, sweep value): mean and sd of every populated column, plus the
/// paired bc-vs-syn comparison. Rows are put in [`canonical_order`] first, so
/// the result depends only on the rows, not on how replicates were scheduled.
pub fn aggregate(reports: &[TrialReport]) -> Summary {
    let mut sorted = reports.to_vec();
    sorted.sort_by(canonical_order);
    let keys = group_keys(&sorted);
    let mut groups = Vec::new();
    let mut tau_rmse = Vec::new();
    for (method, param) in &keys {
        let rows: Vec<&TrialReport> = sorted.iter().filter(|r| &r.method == method && r.param == *param).collect();
        let mut stats = Vec::new();
        for col in SUMMARY_COLUMNS {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(col)).collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, sd) = mean_sd(&vals);
            stats.push(MetricStat { metric: col.to_string(), n: vals.len(), mean, sd });
            if col == "tau_error" {
                tau_rmse.push((method.clone(), *param, rmse(&vals)));
            }
        }
        groups.push(GroupSummary { method: method.clone(), param: *param, stats });
    }
    let mut bc_vs_syn = Vec::new();
    let mut params: Vec<Option<f64>> = Vec::new();
    for (_, p) in &keys {
        if !params.contains(p) {
            params.push(*p);
        }
    }
    for p in params {
        let (Some(bc), Some(_)) = (keys.iter().find(|k| k.0 == "bc" && k.1 == p), keys.iter().find(|k| k.0 == "syn" && k.1 == p)) else {
            continue;
        };
        let g = groups.iter().find(|g| g.method == bc.0 && g.param == p).expect("group exists");
        for s in &g.stats {
            let metric = if s.metric == "tau_error" { "abs_tau_error" } else { s.metric.as_str() };
            if metric == "r_hat" {
                continue;
            }
            bc_vs_syn.push((p, paired_methods(&sorted, "bc", "syn", p, metric)));
        }
    }
    Summary { groups, bc_vs_syn, tau_rmse }
}

fn fmt_param(p: Option<f64>) -> String {
    p.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

/// Markdown: one row per method (and sweep value), mean (sd) per column.
pub fn summary_markdown(title: &str, summary: &Summary) -> String {
    let mut cols: Vec<&str> = Vec::new();
    for c in SUMMARY_COLUMNS {
        if summary.groups.iter().any(|g| g.stat(c).is_some()) {
            cols.push(c);
        }
    }
    let has_param = summary.groups.iter().any(|g| g.param.is_some());
    let mut s = format!("# {title}\n\n");
    let mut head = vec!["method"];
    if has_param {
        head.push("param");
    }
    head.extend(&cols);
    let _ = writeln!(s, "| {} |", head.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(head.len()));
    for g in &summary.groups {
        let mut row = vec![g.method.clone()];
        if has_param {
            row.push(fmt_param(g.param));
        }
        for c in &cols {
            row.push(g.stat(c).map(|st| format!("{:.4} ({:.4})", st.mean, st.sd)).unwrap_or_default());
        }
        let _ = writeln!(s, "| {} |", row.join(" | "));
    }
    if !summary.tau_rmse.is_empty() {
        s.push_str("\n## RMSE of the ATE estimate\n\n| method | rmse |\n|---|---|\n");
        for (m, _, v) in &summary.tau_rmse {
            let _ = writeln!(s, "| {m} | {v:.4} |");
        }
    }
    if !summary.bc_vs_syn.is_empty() {
        s.push_str("\n## bc against syn, paired by replicate\n\n");
        let _ = writeln!(s, "| {}metric | wins | losses | ties | win rate | sign-test p |", if has_param { "param | " } else { "" });
        let _ = writeln!(s, "|{}", "---|".repeat(if has_param { 7 } else { 6 }));
        for (p, st) in &summary.bc_vs_syn {
            let lead = if has_param { format!("{} | ", fmt_param(*p)) } else { String::new() };
            let _ = writeln!(
                s,
                "| {lead}{} | {} | {} | {} | {:.2} | {:.3e} |",
                st.metric, st.wins, st.losses, st.ties, st.win_rate, st.p_value
            );
        }
    }
    s
}

/// Mean of `value` per sweep point, in first-appearance order.
pub fn sweep_means(reports: &[TrialReport]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in reports {
        let (Some(p), Some(v)) = (r.param, r.value) else { continue };
        match out.iter_mut().find(|(q, _)| *q == p) {
            Some((_, vals)) => vals.push(v),
            None => out.push((p, vec![v])),
        }
    }
    out.into_iter().map(|(p, v)| (p, mean_sd(&v).0)).collect()
}

pub fn sweep_csv(header: (&str, &str), means: &[(f64, f64)]) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for (p, m) in means {
        let _ = writeln!(s, "{p},{m}");
    }
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}
