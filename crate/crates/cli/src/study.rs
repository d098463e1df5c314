//! `simulate`, `mtl` and `ate`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use biascorr::simbench::report::write_file;
use biascorr::simbench::{apply_override, run_study, write_outputs, Study, StudyConfig, TrialReport};
use biascorr::Error;
use serde::Serialize;

use crate::args::StudyArgs;

/// Config file (if any) plus `--set` overrides, resolved for `study`.
pub fn build_config(study: Study, file: Option<&Path>, args: &StudyArgs, extra: &[&str], jobs: Option<u16>) -> anyhow::Result<StudyConfig> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(Error::Io).with_context(|| format!("reading {}", p.display()))?;
            text.parse::<toml::Table>().map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let replicates = args.replicates.map(|r| format!("study.replicates={r}"));
    let timing = args.timing.then(|| "output.timing=true".to_string());
    let assignments = args.set.iter().map(String::as_str).chain(extra.iter().copied()).chain(replicates.as_deref()).chain(timing.as_deref());
    for a in assignments {
        apply_override(&mut table, a).with_context(|| format!("override {a:?}"))?;
    }
    let mut cfg = StudyConfig::from_table(Some(study), table).context("study configuration")?;
    cfg.jobs = jobs.map(usize::from);
    Ok(cfg)
}

/// `--out`, else `output.dir`, else the working directory.
pub fn out_dir(cli_out: Option<&Path>, cfg: &StudyConfig) -> PathBuf {
    cli_out.map(Path::to_path_buf).or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn run(cfg: &StudyConfig, seed: u64, out: &Path, quiet: bool) -> anyhow::Result<Vec<TrialReport>> {
    let reports = run_study(cfg, seed).with_context(|| format!("running {}", cfg.study))?;
    let written = write_outputs(cfg, &reports, out).context("writing study outputs")?;
    if !quiet {
        print!("{}", written.markdown);
    }
    Ok(reports)
}

pub struct StudyRun<'a> {
    pub config: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub jobs: Option<u16>,
    pub seed: u64,
    pub quiet: bool,
}

pub fn simulate(name: &str, args: &StudyArgs, ctx: &StudyRun) -> anyhow::Result<()> {
    let study: Study = name.parse()?;
    let cfg = build_config(study, ctx.config, args, &[], ctx.jobs)?;
    run(&cfg, ctx.seed, &out_dir(ctx.out, &cfg), ctx.quiet).map(drop)
}

pub fn ate(args: &StudyArgs, exact_oracle: bool, ctx: &StudyRun) -> anyhow::Result<()> {
    let extra: &[&str] = if exact_oracle { &["study.oracle_outcomes=true", "dgp.noise_sd=0.0"] } else { &[] };
    let cfg = build_config(Study::Ate, ctx.config, args, extra, ctx.jobs)?;
    run(&cfg, ctx.seed, &out_dir(ctx.out, &cfg), ctx.quiet).map(drop)
}

#[derive(Serialize)]
struct SubspaceRow<'a> {
    replicate: usize,
    method: &'a str,
    subspace: &'a biascorr::SharedSubspace,
}

pub fn mtl(args: &StudyArgs, ctx: &StudyRun) -> anyhow::Result<()> {
    let cfg = build_config(Study::Mtl, ctx.config, args, &[], ctx.jobs)?;
    let out = out_dir(ctx.out, &cfg);
    let reports = run(&cfg, ctx.seed, &out, ctx.quiet)?;
    let mut tasks = String::from("replicate,method,task,sq_error\n");
    let mut subspaces = Vec::new();
    for r in &reports {
        let Some(detail) = &r.mtl else { continue };
        for (k, e) in detail.task_errors.iter().enumerate() {
            tasks.push_str(&format!("{},{},{k},{e}\n", r.replicate, r.method));
        }
        subspaces.push(SubspaceRow { replicate: r.replicate, method: &r.method, subspace: &detail.subspace });
    }
    write_file(&out, "tasks.csv", &tasks).context("writing tasks.csv")?;
    let json = serde_json::to_string_pretty(&subspaces).context("serialising subspaces")?;
    write_file(&out, "subspaces.json", &(json + "\n")).context("writing subspaces.json")?;
    Ok(())
}
