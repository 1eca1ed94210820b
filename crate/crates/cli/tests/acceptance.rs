//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers (e.g. `3 4`) as
//! arguments to run a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use uplift_cli::config::{DataSource, ExperimentConfig};
use uplift_cli::experiments::{
    mean, run_benchmark, run_bias_sweep, run_outcome_ablation, run_propensity_sweep, run_scaling, std_dev,
};
use uplift_core::data::{generate_synthetic_rct, BiasInjectionSpec, Outcome, RctDataset};
use uplift_core::drl::{
    compute_pseudo_outcomes, dr_ate, dr_potential_outcomes, fit_nuisance, make_crossfit_plan, NuisancePredictions,
};
use uplift_core::eval::{auuc, cost_curve, rank_order, uplift_curve, GRID_STEPS};
use uplift_core::learners::Method;
use uplift_core::policy::{
    breakpoint_lambda_grid, greedy_ratio_allocate, sweep_lambda_for_budget, AllocationProblem,
};
use uplift_core::regress::{ForestConfig, RegressorSpec};
use uplift_core::rng::stream_rng;
use uplift_core::Matrix;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn forest(n_trees: usize) -> ForestConfig {
    ForestConfig { n_trees, ..ForestConfig::default() }
}

/// Double robustness of the ATE under a wrong nuisance, against the direct
/// estimator built from the same wrong nuisance.
fn c1() -> Verdict {
    const REPS: u64 = 200;
    const N: usize = 50_000;
    // E[tau_revenue] over U(-1,1): tanh is odd and x3 has mean zero.
    const TRUE_ATE: f64 = 0.5;
    let spec: RegressorSpec =
        ForestConfig { n_trees: 10, max_depth: 6, feature_subsample: 1.0, ..ForestConfig::default() }.into();
    let runs: Vec<(f64, f64, f64)> = (0..REPS)
        .into_par_iter()
        .map(|r| {
            let (ds, _) = generate_synthetic_rct(N, 4, 0.5, 3.0, 10_000 + r).unwrap();
            let zero = NuisancePredictions { mu0: vec![0.0; N], mu1: vec![0.0; N] };
            let ipw = dr_ate(&ds, "revenue", &zero, 0.5).unwrap();
            // beta = 1 analogue for a continuous label: every label in the
            // subset x1 < median is replaced by 0
            let w = BiasInjectionSpec::unit_weights(ds.d(), 0);
            let alpha = BiasInjectionSpec::median_alpha(&ds, &w);
            let y = ds.outcome("revenue").unwrap();
            let biased_y: Vec<f64> =
                ds.features().rows().zip(y).map(|(x, &v)| if x[0] < alpha { 0.0 } else { v }).collect();
            let biased = ds.with_outcome_values("revenue", biased_y).unwrap();
            let plan = make_crossfit_plan(N, r).unwrap();
            let preds = fit_nuisance(&biased, "revenue", &plan, &spec.with_seed(r))
                .unwrap()
                .predict_cross_fitted(ds.features(), &plan)
                .unwrap();
            let direct = mean(&preds.direct_effects());
            let dr_biased = dr_ate(&ds, "revenue", &preds, 0.5).unwrap();
            (ipw, direct, dr_biased)
        })
        .collect();
    let se = |v: &[f64]| std_dev(v) / (v.len() as f64).sqrt();
    let ipw: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let direct: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let drb: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let z_ipw = (mean(&ipw) - TRUE_ATE) / se(&ipw);
    let z_direct = (mean(&direct) - TRUE_ATE) / se(&direct);
    let z_drb = (mean(&drb) - TRUE_ATE) / se(&drb);
    verdict(
        z_ipw.abs() <= 4.0 && z_direct.abs() > 10.0 && z_drb.abs() <= 4.0,
        format!(
            "constant-0 nuisance mean {:.4} (z={z_ipw:+.2}); biased-nuisance DR mean {:.4} (z={z_drb:+.2}); direct \
             estimator mean {:.4} (z={z_direct:+.1}); true ATE {TRUE_ATE}",
            mean(&ipw),
            mean(&drb),
            mean(&direct)
        ),
    )
}

/// Potential-outcome form against pseudo-outcome form, row by row.
fn c2() -> Verdict {
    const N: usize = 10_000;
    let mut rng = stream_rng(2, 0);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let p = 0.05 + 0.9 * rng.random::<f64>();
        let w: Vec<u8> = (0..N).map(|_| u8::from(rng.random::<f64>() < p)).collect();
        let y: Vec<f64> = (0..N).map(|_| 10.0 * (rng.random::<f64>() - 0.5)).collect();
        let mu0: Vec<f64> = (0..N).map(|_| 10.0 * (rng.random::<f64>() - 0.5)).collect();
        let mu1: Vec<f64> = (0..N).map(|_| 10.0 * (rng.random::<f64>() - 0.5)).collect();
        let ds =
            RctDataset::new(Matrix::zeros(N, 1), vec!["x".into()], w, vec![Outcome::new("y", y.clone())], p).unwrap();
        let preds = NuisancePredictions { mu0, mu1 };
        let phi = compute_pseudo_outcomes(&ds, "y", &preds, p).unwrap();
        let (y1, y0) = dr_potential_outcomes(&ds, "y", &preds, p).unwrap();
        for i in 0..N {
            let a = phi.values[i];
            let b = y1[i] - y0[i];
            // both sides are sums of the same three terms; rounding is
            // relative to the terms, not to their possibly cancelling sum
            let (m0, m1) = (preds.mu0[i], preds.mu1[i]);
            let resid = if ds.treatment()[i] == 1 { (y[i] - m1) / p } else { (y[i] - m0) / (1.0 - p) };
            let scale = a.abs().max(b.abs()).max(m0.abs() + m1.abs() + resid.abs());
            worst = worst.max((a - b).abs() / scale);
        }
    }
    verdict(worst <= 1e-12, format!("max row difference relative to term magnitude {worst:.3e} over 5 x {N} rows"))
}

fn binary_config(n: usize, replicates: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.source = DataSource::SyntheticBinary;
    cfg.data.n = n;
    cfg.data.propensity = 0.85;
    cfg.replicates = replicates;
    cfg.forest = forest(50);
    // x1 drives the uplift; the bias subset is cut on a baseline feature
    cfg.bias.feature = 1;
    cfg
}

fn c3() -> Verdict {
    let cfg = binary_config(200_000, 2);
    let rep = run_bias_sweep(&cfg).unwrap();
    let get = |m: Method, beta: f64| {
        rep.rows.iter().find(|r| r.method == m && r.key == beta).map(|r| mean(&r.values)).unwrap()
    };
    let drl: Vec<f64> = cfg.bias.betas.iter().map(|&b| get(Method::Drl, b)).collect();
    let spread = drl.iter().cloned().fold(f64::MIN, f64::max) - drl.iter().cloned().fold(f64::MAX, f64::min);
    let (t0, t1) = (get(Method::T, 0.0), get(Method::T, 1.0));
    let clean = rep.test_checksums.iter().all(|(a, b)| a == b);
    verdict(
        spread <= 0.03 && t1 <= t0 - 0.10 && clean,
        format!(
            "DRL AUUC over beta {:?} spread {spread:.4}; T-learner {t0:.4} -> {t1:.4} (drop {:.4}); test labels \
             unchanged: {clean}",
            drl.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            t0 - t1
        ),
    )
}

fn c4() -> Verdict {
    let cfg = binary_config(300_000, 2);
    let rep = run_propensity_sweep(&cfg).unwrap();
    let offsets: Vec<f64> = cfg.propensity_sweep.offsets.iter().cloned().filter(|&o| o != 0.0).collect();
    let du: Vec<f64> = offsets.iter().map(|&o| rep.relative_degradation(0.0, o).unwrap()).collect();
    let db: Vec<f64> = offsets.iter().map(|&o| rep.relative_degradation(1.0, o).unwrap()).collect();
    let worst = du.iter().cloned().fold(f64::MIN, f64::max);
    let ordered = du.iter().zip(&db).all(|(u, b)| b > u);
    verdict(
        worst <= 0.05 && ordered,
        format!(
            "offsets {offsets:?}: degradation unbiased {:?} (max {worst:.4}), beta=1 nuisance {:?}",
            du.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>(),
            db.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>()
        ),
    )
}

fn dual_config(n: usize, replicates: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.n = n;
    cfg.data.noise_scale = 3.0;
    cfg.replicates = replicates;
    cfg.forest = forest(50);
    cfg
}

fn c5() -> Verdict {
    let cfg = dual_config(50_000, 5);
    let rep = run_outcome_ablation(&cfg).unwrap();
    let get = |name: &str| mean(&rep.rows.iter().find(|r| r.0 == name).unwrap().1);
    let (f, c, r) = (get("forest"), get("constant"), get("random_scores"));
    verdict(f > c && c > 0.5, format!("AUCC forest {f:.4}, constant {c:.4}, random scores {r:.4}"))
}

fn c6() -> Verdict {
    let cfg = dual_config(100_000, 10);
    let rep = run_benchmark(&cfg).unwrap();
    let m = |k: Method| mean(&rep.values(k).unwrap());
    let (s, t, x, d) = (m(Method::S), m(Method::T), m(Method::X), m(Method::Drl));
    let best = s.max(t).max(x);
    verdict(
        d > best && d - best >= 0.05,
        format!("AUCC S {s:.4}, T {t:.4}, X {x:.4}, DRL {d:.4}; gap to best baseline {:+.4}", d - best),
    )
}

fn c7() -> Verdict {
    let mut cfg = dual_config(0, 5);
    cfg.scaling.sizes = vec![5_000, 10_000, 20_000, 40_000];
    cfg.scaling.test_size = 20_000;
    let rep = run_scaling(&cfg).unwrap();
    let get = |m: Method, s: usize| {
        rep.rows.iter().find(|r| r.method == m && r.key == s as f64).map(|r| mean(&r.values)).unwrap()
    };
    let curve = |m: Method| cfg.scaling.sizes.iter().map(|&s| format!("{:.4}", get(m, s))).collect::<Vec<_>>();
    let dd = get(Method::Drl, 40_000) - get(Method::Drl, 5_000);
    let dt = get(Method::T, 40_000) - get(Method::T, 5_000);
    verdict(
        dd > dt,
        format!(
            "sizes {:?}: DRL {:?} (delta {dd:+.4}), T {:?} (delta {dt:+.4})",
            cfg.scaling.sizes,
            curve(Method::Drl),
            curve(Method::T)
        ),
    )
}

fn brute_force(p: &AllocationProblem) -> f64 {
    let n = p.n();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let (mut v, mut c) = (0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                v += p.tau_r()[i];
                c += p.cost(i);
            }
        }
        if c <= p.budget() && v > best {
            best = v;
        }
    }
    best
}

fn c8() -> Verdict {
    let results: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = stream_rng(seed, 8);
            let n = 5 + (seed as usize % 14);
            let r: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
            let e: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
            let b = (0.1 + 0.5 * rng.random::<f64>()) * e.iter().sum::<f64>();
            let p = AllocationProblem::new(r, e, b).unwrap();
            let max_r = p.tau_r().iter().cloned().fold(f64::MIN, f64::max);
            let g = greedy_ratio_allocate(&p);
            let s = sweep_lambda_for_budget(&p, &breakpoint_lambda_grid(&p)).unwrap();
            let greedy_ok = g.total_cost <= p.budget() && g.total_value >= brute_force(&p) - max_r;
            let sweep_ok = s.result.total_cost <= p.budget() && (s.result.total_value - g.total_value).abs() <= max_r;
            (greedy_ok, sweep_ok)
        })
        .collect();
    let g = results.iter().filter(|r| r.0).count();
    let s = results.iter().filter(|r| r.1).count();
    verdict(g == 100 && s == 100, format!("greedy bound held {g}/100, Lagrangian sweep within bound {s}/100"))
}

/// Straight-line evaluation of the uplift-curve definition.
fn enumerated_auuc(scores: &[f64], w: &[u8], y: &[f64]) -> f64 {
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut g = Vec::new();
    let mut last = 0.0;
    for k in 0..=GRID_STEPS {
        let count = (k * n + GRID_STEPS - 1) / GRID_STEPS;
        let top = &idx[..count];
        let (mut st, mut nt, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for &i in top {
            if w[i] == 1 {
                st += y[i];
                nt += 1;
            } else {
                sc += y[i];
                nc += 1;
            }
        }
        if nt > 0 && nc > 0 {
            last = st / nt as f64 - sc / nc as f64;
        }
        g.push(last * count as f64);
    }
    let total = g[GRID_STEPS].abs();
    let mut area = 0.0;
    for k in 0..GRID_STEPS {
        let x0 = k as f64 / GRID_STEPS as f64;
        let x1 = (k + 1) as f64 / GRID_STEPS as f64;
        area += (x1 - x0) * (g[k] / total + g[k + 1] / total) / 2.0;
    }
    area.clamp(0.0, 1.0)
}

fn c9() -> Verdict {
    // exact enumeration on n = 10
    let mut exact = 0;
    let mut tried = 0;
    let mut rng = stream_rng(9, 0);
    while tried < 200 {
        let w: Vec<u8> = (0..10).map(|_| u8::from(rng.random::<bool>())).collect();
        let y: Vec<f64> = (0..10).map(|_| f64::from(u8::from(rng.random::<f64>() < 0.4))).collect();
        let ds = RctDataset::new(Matrix::zeros(10, 1), vec!["x".into()], w.clone(), vec![Outcome::new("y", y.clone())], 0.5);
        let Ok(ds) = ds else { continue };
        let scores: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let Ok(a) = auuc(&scores, &ds, "y") else { continue };
        tried += 1;
        if a == enumerated_auuc(&scores, &w, &y) {
            exact += 1;
        }
    }
    // random-score symmetry over 50 seeds
    let (ds, _) = generate_synthetic_rct(20_000, 4, 0.5, 1.0, 99).unwrap();
    let (mut au, mut ac) = (Vec::new(), Vec::new());
    for seed in 0..50 {
        let mut rng = stream_rng(seed, 90);
        let s: Vec<f64> = (0..ds.n()).map(|_| rng.random::<f64>()).collect();
        au.push(auuc(&s, &ds, "revenue").unwrap());
        ac.push(cost_curve(&s, &ds, "revenue", "engagement").unwrap().area);
    }
    let (mu, mc) = (mean(&au), mean(&ac));
    // monotone transforms on tie-free scores
    let mut rng = stream_rng(7, 91);
    let s: Vec<f64> = (0..ds.n()).map(|_| rng.random::<f64>() - 0.5).collect();
    let transforms: [fn(f64) -> f64; 3] = [|v| v.exp(), |v| 3.0 * v + 1.0, |v| v.atan()];
    let base_u = uplift_curve(&s, &ds, "revenue").unwrap().area;
    let base_c = cost_curve(&s, &ds, "revenue", "engagement").unwrap().area;
    let invariant = transforms.iter().all(|f| {
        let t: Vec<f64> = s.iter().map(|&v| f(v)).collect();
        rank_order(&t) == rank_order(&s)
            && uplift_curve(&t, &ds, "revenue").unwrap().area == base_u
            && cost_curve(&t, &ds, "revenue", "engagement").unwrap().area == base_c
    });
    verdict(
        exact == tried && (mu - 0.5).abs() <= 0.03 && (mc - 0.5).abs() <= 0.03 && invariant,
        format!(
            "n=10 enumeration exact {exact}/{tried}; random scores mean AUUC {mu:.4}, AUCC {mc:.4} over 50 seeds; \
             monotone invariance {invariant}"
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        m.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    m
}

fn c10() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dual = "replicates = 2\n[data]\nn = 3000\n[forest]\nn_trees = 8\n[scaling]\nsizes = [500, 1000]\ntest_size = 800\n";
    let binary = "replicates = 2\n[data]\nsource = \"synthetic_binary\"\npropensity = 0.85\nn = 6000\n[forest]\nn_trees = 8\n";
    std::fs::write(tmp.path().join("dual.toml"), dual).unwrap();
    std::fs::write(tmp.path().join("binary.toml"), binary).unwrap();
    let commands = [
        ("gen-data", "dual"),
        ("benchmark", "dual"),
        ("bias-sweep", "binary"),
        ("prop-sweep", "binary"),
        ("outcome-ablation", "dual"),
        ("scaling", "dual"),
        ("allocate", "dual"),
    ];
    let mut failures = Vec::new();
    for (cmd, cfg) in commands {
        let out = tmp.path().join(cmd);
        let mut snaps = Vec::new();
        for threads in ["1", "1", "8"] {
            let _ = std::fs::remove_dir_all(&out);
            let status = Command::new(env!("CARGO_BIN_EXE_uplift"))
                .arg(cmd)
                .arg("--config")
                .arg(tmp.path().join(format!("{cfg}.toml")))
                .arg("--out")
                .arg(&out)
                .arg("--threads")
                .arg(threads)
                .output()
                .unwrap();
            if !status.status.success() {
                failures.push(format!("{cmd} exited with {}", status.status));
                break;
            }
            snaps.push(snapshot(&out));
        }
        if snaps.len() == 3 && !(snaps[0] == snaps[1] && snaps[1] == snaps[2]) {
            failures.push(format!("{cmd} outputs differ"));
        }
        if snaps.first().is_some_and(|s| !s.contains_key("resolved_config.toml") || !s.contains_key("VERSION")) {
            failures.push(format!("{cmd} missing config or version"));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} commands byte-identical across two runs and 1 vs 8 threads", commands.len())
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "double robustness Monte Carlo", c1),
        (2, "potential-outcome / pseudo-outcome identity", c2),
        (3, "bias sweep", c3),
        (4, "propensity sweep", c4),
        (5, "outcome model ablation", c5),
        (6, "benchmark ordering", c6),
        (7, "scaling study", c7),
        (8, "knapsack oracle", c8),
        (9, "metric oracles", c9),
        (10, "determinism", c10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = f();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
