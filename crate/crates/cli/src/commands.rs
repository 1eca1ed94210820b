//! Subcommand drivers: run a study and write its artifacts.

use std::path::{Path, PathBuf};

use uplift_core::data::{write_dataset_csv, write_ground_truth_csv};
use uplift_core::eval::write_curve_csv;
use uplift_core::policy::write_allocation_csv;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result, StageExt};
use crate::experiments::{self, mean, std_dev};
use crate::report::{line_chart, num, write_file, Series, Table};

pub const VERSION: &str = concat!("uplift ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GenData,
    Benchmark,
    BiasSweep,
    PropSweep,
    OutcomeAblation,
    Scaling,
    Allocate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Benchmark => "benchmark",
            Command::BiasSweep => "bias-sweep",
            Command::PropSweep => "prop-sweep",
            Command::OutcomeAblation => "outcome-ablation",
            Command::Scaling => "scaling",
            Command::Allocate => "allocate",
        }
    }
}

/// Collects written paths so the caller can list them.
struct Out {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Out {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        write_file(&p, contents)
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.path(name);
        t.write(&p)
    }
}

/// Runs `cmd` and returns the files written, config and version first.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|source| CliError::Write { path: cfg.out.display().to_string(), source })?;
    let mut out = Out { dir: cfg.out.clone(), written: Vec::new() };
    out.text("resolved_config.toml", &cfg.to_toml())?;
    out.text("VERSION", &format!("{VERSION}\n"))?;
    match cmd {
        Command::GenData => gen_data(cfg, &mut out)?,
        Command::Benchmark => benchmark(cfg, &mut out)?,
        Command::BiasSweep => bias_sweep(cfg, &mut out)?,
        Command::PropSweep => prop_sweep(cfg, &mut out)?,
        Command::OutcomeAblation => outcome_ablation(cfg, &mut out)?,
        Command::Scaling => scaling(cfg, &mut out)?,
        Command::Allocate => allocate(cfg, &mut out)?,
    }
    Ok(out.written)
}

fn write_err(path: &Path, e: uplift_core::UpliftError) -> CliError {
    CliError::Write { path: path.display().to_string(), source: std::io::Error::other(e.to_string()) }
}

fn gen_data(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    let (ds, truth) = experiments::generate_with_truth(cfg)?;
    let p = out.path("dataset.csv");
    write_dataset_csv(&ds, &p).map_err(|e| write_err(&p, e))?;
    let p = out.path("ground_truth.csv");
    write_ground_truth_csv(&truth, &p).map_err(|e| write_err(&p, e))?;
    Ok(())
}

fn benchmark(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    let rep = experiments::run_benchmark(cfg)?;
    let mut summary = Table::new(&["method", "metric", "mean", "std", "replicates"]);
    let mut runs = Table::new(&["replicate", "seed", "method", "value", "cate_rmse"]);
    let mut series = Vec::new();
    for (m, rs) in &rep.runs {
        let v: Vec<f64> = rs.iter().map(|r| r.metric).collect();
        summary.push(vec![m.to_string(), rep.metric.into(), num(mean(&v)), num(std_dev(&v)), v.len().to_string()]);
        for (r, run) in rs.iter().enumerate() {
            let rmse = run.rmse.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";");
            runs.push(vec![r.to_string(), rep.seeds[r].to_string(), m.to_string(), num(run.metric), rmse]);
        }
        let p = out.path(&format!("curve_{m}.csv"));
        write_curve_csv(&p, &rs[0].curve).map_err(|e| write_err(&p, e))?;
        series.push(Series { name: m.to_string(), points: rs[0].curve.points.clone() });
    }
    out.table("benchmark.csv", &summary)?;
    out.table("benchmark_runs.csv", &runs)?;
    let (title, xl, yl) = if rep.metric == "aucc" {
        ("Cost curves", "normalized incremental cost", "normalized incremental value")
    } else {
        ("Uplift curves", "fraction targeted", "normalized cumulative gain")
    };
    out.text("curves.svg", &line_chart(title, xl, yl, &series))
}

fn sweep_table(key: &str, metric: &str, rows: &[experiments::SweepRow]) -> Table {
    let mut t = Table::new(&[key, "method", metric, "std", "replicates"]);
    for r in rows {
        t.push(vec![num(r.key), r.method.to_string(), num(mean(&r.values)), num(std_dev(&r.values)), r.values.len().to_string()]);
    }
    t
}

fn sweep_series(rows: &[experiments::SweepRow]) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let name = r.method.to_string();
        let pt = (r.key, mean(&r.values));
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push(pt),
            None => series.push(Series { name, points: vec![pt] }),
        }
    }
    series
}

fn bias_sweep(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    let rep = experiments::run_bias_sweep(cfg)?;
    out.table("bias_sweep.csv", &sweep_table("beta", "auuc", &rep.rows))?;
    let mut checks = Table::new(&["replicate", "seed", "test_checksum_before", "test_checksum_after"]);
    for (r, (a, b)) in rep.test_checksums.iter().enumerate() {
        checks.push(vec![r.to_string(), rep.seeds[r].to_string(), format!("{a:016x}"), format!("{b:016x}")]);
    }
    out.table("bias_sweep_test_checksums.csv", &checks)?;
    out.text(
        "bias_sweep.svg",
        &line_chart("AUUC over outcome model bias", "beta", "AUUC", &sweep_series(&rep.rows)),
    )
}

fn prop_sweep(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    let rep = experiments::run_propensity_sweep(cfg)?;
    let mut t = Table::new(&[
        "nuisance_beta",
        "offset",
        "propensity",
        "auuc",
        "std",
        "relative_degradation",
        "replicates",
    ]);
    let mut series: Vec<Series> = Vec::new();
    for r in &rep.rows {
        let deg = rep.relative_degradation(r.nuisance_beta, r.offset).map(num).unwrap_or_default();
        t.push(vec![
            num(r.nuisance_beta),
            num(r.offset),
            num(mean(&r.propensity)),
            num(mean(&r.values)),
            num(std_dev(&r.values)),
            deg,
            r.values.len().to_string(),
        ]);
        let name = format!("nuisance beta={}", r.nuisance_beta);
        let pt = (r.offset, mean(&r.values));
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push(pt),
            None => series.push(Series { name, points: vec![pt] }),
        }
    }
    out.table("prop_sweep.csv", &t)?;
    out.text("prop_sweep.svg", &line_chart("AUUC over propensity offset", "offset", "AUUC", &series))
}

fn outcome_ablation(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    let rep = experiments::run_outcome_ablation(cfg)?;
    let mut t = Table::new(&["nuisance", "aucc", "std", "replicates"]);
    for (name, v) in &rep.rows {
        t.push(vec![name.clone(), num(mean(v)), num(std_dev(v)), v.len().to_string()]);
    }
    out.table("outcome_ablation.csv", &t)?;
    let mut sizes = Table::new(&["nuisance", "outcome", "bytes"]);
    for (name, mr, me) in &rep.models {
        for (outcome, m) in [(&cfg.data.revenue, mr), (&cfg.data.engagement, me)] {
            let json = m.to_json().stage("serialize")?;
            sizes.push(vec![name.clone(), outcome.clone(), json.len().to_string()]);
            out.text(&format!("model_{name}_{outcome}.json"), &json)?;
        }
    }
    out.table("outcome_ablation_models.csv", &sizes)
}

fn scaling(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    let rep = experiments::run_scaling(cfg)?;
    out.table("scaling.csv", &sweep_table("size", rep.metric, &rep.rows))?;
    let title = format!("{} over training size", rep.metric.to_uppercase());
    out.text("scaling.svg", &line_chart(&title, "training rows", &rep.metric.to_uppercase(), &sweep_series(&rep.rows)))
}

fn allocate(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    let rep = experiments::run_allocate(cfg)?;
    let p = out.path("allocation.csv");
    write_allocation_csv(&p, &rep.scores, &rep.sweep.result, rep.problem.tau_r(), rep.problem.tau_e())
        .map_err(|e| write_err(&p, e))?;
    let mut t = Table::new(&["policy", "lambda", "feasible", "n_selected", "total_value", "total_cost", "budget", "aucc"]);
    t.push(vec![
        "greedy_ratio".into(),
        String::new(),
        "true".into(),
        rep.greedy.n_selected().to_string(),
        num(rep.greedy.total_value),
        num(rep.greedy.total_cost),
        num(rep.problem.budget()),
        String::new(),
    ]);
    t.push(vec![
        "lagrangian".into(),
        rep.sweep.lambda.map(num).unwrap_or_default(),
        rep.sweep.feasible.to_string(),
        rep.sweep.result.n_selected().to_string(),
        num(rep.sweep.result.total_value),
        num(rep.sweep.result.total_cost),
        num(rep.problem.budget()),
        num(rep.aucc),
    ]);
    out.table("allocate_summary.csv", &t)?;
    let mut trace = Table::new(&["lambda", "total_value", "total_cost"]);
    for (l, v, c) in &rep.sweep.trace {
        trace.push(vec![num(*l), num(*v), num(*c)]);
    }
    out.table("lambda_trace.csv", &trace)
}
