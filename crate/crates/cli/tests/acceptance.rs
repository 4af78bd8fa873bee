//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 1 3`.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::Instant;

use chrono::{NaiveDate, NaiveTime};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use callnet::eval::{
    accuracy_feature_importance, delong_test, emp, fraction_to_cutoff, loan_profit, model_profit, no_model_profit,
    profit_feature_importance, sensitivity_sweep, AccuracyImportanceKind, EmpParams, SweepParameter,
};
use callnet::graph::{CallGraph, EdgeMode, EdgeWeighting, NodeIndex};
use callnet::ingest::CdrRecord;
use callnet::loans::LoanOutcome;
use callnet::models::{ForestModel, ForestParams};
use callnet::money::Money;
use callnet::netstats::{homophily_test, permutation_null};
use callnet::pipeline::{Experiment, ExperimentConfig, Paths};
use callnet::propagation::{personalized_pagerank, spreading_activation_traced, PropagationConfig};
use callnet::synth::{generate, planted_classification, SynthConfig};

type Check = std::result::Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// A random call graph on `n` numbers with random positive weights and no
/// self-calls. Returns the graph and the raw weighted pairs by node id.
fn random_graph(r: &mut ChaCha8Rng, n: usize, mode: EdgeMode) -> (CallGraph, Vec<(usize, usize, u32)>) {
    let ids: Vec<String> = (0..n).map(|i| format!("p{i:04}")).collect();
    let p = r.random_range(0.03..0.3);
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && r.random::<f64>() < p {
                pairs.push((a, b, r.random_range(1..500u32)));
            }
        }
    }
    // keep every node on at least one call so the index covers it
    for a in 0..n {
        let b = (a + 1 + r.random_range(0..n - 1)) % n;
        pairs.push((a, b, r.random_range(1..500u32)));
    }
    let day = NaiveDate::from_ymd_opt(2015, 2, 1).unwrap();
    let calls: Vec<CdrRecord> = pairs
        .iter()
        .map(|&(a, b, w)| CdrRecord {
            start_date: day,
            start_time: NaiveTime::from_hms_opt(12, 0, 0).unwrap(),
            duration: w,
            from_id: ids[a].clone(),
            to_id: ids[b].clone(),
        })
        .collect();
    let index = Arc::new(NodeIndex::from_ids(ids));
    let g = CallGraph::from_calls(index, &calls, mode, EdgeWeighting::Duration);
    (g, pairs)
}

/// Dense weight matrix with `A[i][j]` the weight through which `i` gathers
/// from `j`, from the raw calls: outgoing rows are callers, incoming rows
/// are callees, undirected uses both.
fn dense_weights(g: &CallGraph, pairs: &[(usize, usize, u32)], mode: EdgeMode) -> DMatrix<f64> {
    let n = g.n_nodes();
    let node = |k: usize| g.nodes().get(&format!("p{k:04}")).unwrap() as usize;
    let mut a = DMatrix::zeros(n, n);
    for &(x, y, w) in pairs {
        let (x, y, w) = (node(x), node(y), f64::from(w));
        match mode {
            EdgeMode::Outgoing => a[(x, y)] += w,
            EdgeMode::Incoming => a[(y, x)] += w,
            EdgeMode::Undirected => {
                a[(x, y)] += w;
                a[(y, x)] += w;
            }
        }
    }
    a
}

/// Solves `(I − αW̃ − α·z·dᵀ)ξ = (1−α)z` where `W̃` is `A` with columns
/// scaled to sum 1 and `d` marks empty columns, whose walkers restart.
/// Without empty columns this is `(I − αW̃)ξ = (1−α)z`.
fn ppr_oracle(a: &DMatrix<f64>, z: &DVector<f64>, alpha: f64) -> DVector<f64> {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        let col: f64 = a.column(j).sum();
        for i in 0..n {
            if col > 0.0 {
                m[(i, j)] -= alpha * a[(i, j)] / col;
            } else {
                m[(i, j)] -= alpha * z[i];
            }
        }
    }
    m.lu().solve(&(z * (1.0 - alpha))).expect("non-singular")
}

fn c1_ppr_oracle() -> Check {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    let mut dangling_graphs = 0;
    for k in 0..50 {
        let n = r.random_range(2..=100);
        let mode = [EdgeMode::Undirected, EdgeMode::Outgoing, EdgeMode::Incoming][k % 3];
        let (g, pairs) = random_graph(&mut r, n, mode);
        let a = dense_weights(&g, &pairs, mode);
        if (0..n).any(|j| a.column(j).sum() == 0.0) {
            dangling_graphs += 1;
        }
        let mut z = DVector::zeros(n);
        let n_seeds = r.random_range(1..=n.min(10));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        for &i in &order[..n_seeds] {
            z[i] = 1.0 / n_seeds as f64;
        }
        let alpha = r.random_range(0.5..0.95);
        let cfg = PropagationConfig {
            alpha,
            tolerance: 1e-13,
            max_iterations: 100_000,
            ..Default::default()
        };
        let got = personalized_pagerank(&g, z.as_slice(), &cfg).map_err(|e| e.to_string())?;
        let want = ppr_oracle(&a, &z, alpha);
        for i in 0..n {
            worst = worst.max((got.scores[i] - want[i]).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "max |power - solve| {worst:.2e} over 50 graphs ({dangling_graphs} with empty columns), {secs:.2} s"
    );
    if worst <= 1e-8 && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c2_spa_conservation() -> Check {
    let mut r = rng(202);
    let mut worst: f64 = 0.0;
    let mut rounds = 0;
    for k in 0..50 {
        let n = r.random_range(2..=100);
        let mode = [EdgeMode::Undirected, EdgeMode::Outgoing, EdgeMode::Incoming][k % 3];
        let (g, _) = random_graph(&mut r, n, mode);
        let n_seeds = r.random_range(1..=n.min(10));
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.shuffle(&mut r);
        let seeds: Vec<(u32, f64)> = order[..n_seeds].iter().map(|&i| (i, r.random_range(0.1..5.0))).collect();
        let initial: f64 = seeds.iter().map(|s| s.1).sum();
        let cfg = PropagationConfig {
            d: r.random_range(0.3..0.95),
            tolerance: 1e-9,
            max_iterations: 1000,
            ..Default::default()
        };
        let (ev, totals) = spreading_activation_traced(&g, &seeds, &cfg).map_err(|e| e.to_string())?;
        for t in &totals {
            worst = worst.max((t - initial).abs());
        }
        worst = worst.max((ev.scores.iter().sum::<f64>() - initial).abs());
        rounds += totals.len();
    }
    let detail = format!("max |energy - initial| {worst:.2e} over {rounds} rounds on 50 graphs");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// EMP by brute force: the best threshold at each of `grid` midpoint values
/// of λ in [0, LGD] plus the two point masses.
fn emp_grid_oracle(scores: &[f64], y: &[bool], p: &EmpParams, grid: usize) -> f64 {
    let n0 = y.iter().filter(|&&d| d).count() as f64;
    let n1 = y.len() as f64 - n0;
    let (pi0, pi1) = (n0 / y.len() as f64, n1 / y.len() as f64);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // (F0, F1) when rejecting everything scoring at or above each distinct value
    let mut points = vec![(0.0, 0.0)];
    let (mut c0, mut c1) = (0.0, 0.0);
    for (k, &i) in order.iter().enumerate() {
        if y[i] {
            c0 += 1.0;
        } else {
            c1 += 1.0;
        }
        if k + 1 == order.len() || scores[order[k + 1]] != scores[i] {
            points.push((c0 / n0, c1 / n1));
        }
    }
    let best = |lambda: f64| {
        points
            .iter()
            .map(|&(f0, f1)| lambda * pi0 * f0 - p.roi * pi1 * f1)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let w = (1.0 - p.p0 - p.p1) / grid as f64;
    let mut total = p.p0 * best(0.0) + p.p1 * best(p.lgd);
    for k in 0..grid {
        total += w * best((k as f64 + 0.5) * p.lgd / grid as f64);
    }
    total
}

fn c3_emp_oracle() -> Check {
    let mut r = rng(303);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_perfect: f64 = 0.0;
    for k in 0..20 {
        let y: Vec<bool> = (0..2000).map(|_| r.random::<f64>() < 0.05).collect();
        let shift = r.random_range(0.0..2.5);
        let mut scores: Vec<f64> = y
            .iter()
            .map(|&d| normal.sample(&mut r) + if d { shift } else { 0.0 })
            .collect();
        if k % 2 == 1 {
            // coarse scores with many ties
            for s in &mut scores {
                *s = (*s * 4.0).round() / 4.0;
            }
        }
        let p0 = r.random_range(0.0..0.5);
        let p = EmpParams {
            roi: r.random_range(0.01..0.3),
            lgd: r.random_range(0.2..1.0),
            p0,
            p1: r.random_range(0.0..(1.0 - p0)),
        };
        let hull = emp(&scores, &y, &p).map_err(|e| e.to_string())?.emp;
        worst = worst.max((hull - emp_grid_oracle(&scores, &y, &p, 10_000)).abs());

        let perfect: Vec<f64> = y.iter().map(|&d| if d { 1.0 } else { 0.0 }).collect();
        let pi0 = y.iter().filter(|&&d| d).count() as f64 / y.len() as f64;
        let closed = pi0 * p.lgd * (p.p1 + (1.0 - p.p0 - p.p1) / 2.0);
        let got = emp(&perfect, &y, &p).map_err(|e| e.to_string())?.emp;
        worst_perfect = worst_perfect.max((got - closed).abs());
    }
    let detail = format!(
        "max |hull - grid| {worst:.2e} on 20 datasets, perfect classifier off closed form by {worst_perfect:.2e}"
    );
    if worst <= 1e-3 && worst_perfect <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c4_profit_identities() -> Check {
    let loan = |a: i64, ead: i64, d: bool| LoanOutcome::new(Money(a), Money(ead), d).unwrap();
    let (roi, lgd) = (0.05, 0.8);
    // A = 1000.00, EAD = 400.00
    let cells = [
        (loan(100_000, 0, false), false, Money(5_000)),
        (loan(100_000, 0, false), true, Money(-5_000)),
        (loan(100_000, 40_000, true), false, Money(-32_000)),
        (loan(100_000, 40_000, true), true, Money(0)),
    ];
    for (l, rejected, want) in cells {
        let got = loan_profit(&l, rejected, roi, lgd);
        if got != want {
            return Err(format!("cell default={} rejected={rejected}: {got} != {want}", l.is_defaulter));
        }
    }
    let mut r = rng(404);
    for _ in 0..200 {
        let n = r.random_range(1..300);
        let loans: Vec<LoanOutcome> = (0..n)
            .map(|_| {
                let a = r.random_range(1..1_000_000i64);
                let d = r.random::<f64>() < 0.1;
                loan(a, if d { r.random_range(0..=a) } else { 0 }, d)
            })
            .collect();
        let scores: Vec<f64> = (0..n).map(|_| (r.random_range(0..20) as f64) / 20.0).collect();
        let cut = fraction_to_cutoff(&scores, 0.0).map_err(|e| e.to_string())?;
        let with_model = model_profit(&scores, &loans, roi, lgd, cut.value).map_err(|e| e.to_string())?;
        if cut.n_rejected != 0 || with_model != no_model_profit(&loans, roi, lgd) {
            return Err(format!("reject fraction 0 gives {with_model}, accept-all {}", no_model_profit(&loans, roi, lgd)));
        }
    }
    Ok("four profit cells exact; reject fraction 0 equals accept-all profit on 200 portfolios".into())
}

fn c5_importance_recovery() -> Check {
    let (mut profit_hits, mut accuracy_hits) = (0, 0);
    for seed in 0..20u64 {
        let set = planted_classification(3000, 30, 1.5, 0.5, seed).map_err(|e| e.to_string())?;
        let rows: Vec<usize> = (0..set.data.n_rows()).collect();
        let (train, test) = rows.split_at(2000);
        let fit = set.data.subset(train);
        let held = set.data.subset(test);
        let loans: Vec<LoanOutcome> = test.iter().map(|&i| set.loans[i]).collect();
        let forest = ForestModel::fit(
            &fit,
            &ForestParams {
                n_trees: 500,
                max_depth: Some(2),
                seed: 1000 + seed,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let votes = forest.per_tree_votes(&held);
        let profit = profit_feature_importance(&forest, &votes, &loans, 0.05, 0.8, held.n_cols()).map_err(|e| e.to_string())?;
        let accuracy = accuracy_feature_importance(&forest, &held, AccuracyImportanceKind::Permutation, 1, 2000 + seed)
            .map_err(|e| e.to_string())?;
        profit_hits += usize::from(profit[0].feature == set.informative);
        accuracy_hits += usize::from(accuracy[0].feature == set.informative);
    }
    let detail = format!("planted feature first by profit in {profit_hits}/20 seeds, by accuracy in {accuracy_hits}/20");
    if profit_hits >= 18 && accuracy_hits >= 18 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Undirected graph and default labels of the first timeframe of a small
/// synthetic dataset, through the pipeline's own stages.
fn synth_network(cfg: &SynthConfig, dir: &Path) -> callnet::Result<(CallGraph, Vec<Option<bool>>)> {
    let data = dir.join("data");
    generate(cfg)?.write_to_dir(&data)?;
    let exp_cfg = ExperimentConfig {
        paths: Paths::inputs_in(&data, dir.join("out")),
        ..Default::default()
    };
    let mut exp = Experiment::open(&exp_cfg)?;
    let tf = exp_cfg.timeframes.timeframes().remove(0);
    let g = exp
        .graphs(&tf)?
        .into_iter()
        .find(|g| g.mode() == EdgeMode::Undirected)
        .unwrap();
    let labels = exp.labels(&tf, &g)?;
    Ok((g, labels.default_labels().to_vec()))
}

fn c6_homophily_calibration() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = SynthConfig {
        n_nodes: 4000,
        n_subjects: 1200,
        homophily_strength: 4.0,
        ..Default::default()
    };
    let (g, labels) = synth_network(&SynthConfig { seed: 1, ..base.clone() }, &tmp.path().join("null"))
        .map_err(|e| e.to_string())?;
    let (d, h) = permutation_null(&g, &labels, 1000, 7).map_err(|e| e.to_string())?;
    let mut significant = 0;
    for seed in 0..100u64 {
        let dir = tmp.path().join(format!("s{seed}"));
        let (g, labels) = synth_network(&SynthConfig { seed, ..base.clone() }, &dir).map_err(|e| e.to_string())?;
        let rep = homophily_test(&g, &labels).map_err(|e| e.to_string())?;
        significant += usize::from(rep.p_value < 0.05);
        fs::remove_dir_all(&dir).map_err(|e| e.to_string())?;
    }
    let detail = format!("null mean D {d:.4}, H {h:.4}; strength 4 gives p < 0.05 in {significant}/100 seeds");
    if (0.95..=1.05).contains(&d) && (0.95..=1.05).contains(&h) && significant >= 95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// DeLong variance straight from the pairwise kernel.
fn delong_variance_oracle(a: &[f64], b: &[f64], y: &[bool]) -> f64 {
    let psi = |x: f64, z: f64| {
        if x > z {
            1.0
        } else if x == z {
            0.5
        } else {
            0.0
        }
    };
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let comps = |s: &[f64]| {
        let v10: Vec<f64> = pos.iter().map(|&i| neg.iter().map(|&j| psi(s[i], s[j])).sum::<f64>() / n).collect();
        let v01: Vec<f64> = neg.iter().map(|&j| pos.iter().map(|&i| psi(s[i], s[j])).sum::<f64>() / m).collect();
        (v10, v01)
    };
    let cov = |u: &[f64], v: &[f64]| {
        let (mu, mv) = (u.iter().sum::<f64>() / u.len() as f64, v.iter().sum::<f64>() / v.len() as f64);
        u.iter().zip(v).map(|(x, z)| (x - mu) * (z - mv)).sum::<f64>() / (u.len() as f64 - 1.0)
    };
    let (a10, a01) = comps(a);
    let (b10, b01) = comps(b);
    (cov(&a10, &a10) + cov(&b10, &b10) - 2.0 * cov(&a10, &b10)) / m
        + (cov(&a01, &a01) + cov(&b01, &b01) - 2.0 * cov(&a01, &b01)) / n
}

fn c7_delong() -> Check {
    let mut r = rng(707);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = r.random_range(6..=200);
        let mut y: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.3).collect();
        y[0] = true;
        y[1] = false;
        y[2] = true;
        y[3] = false;
        let coarse = k % 2 == 0;
        let draw = |r: &mut ChaCha8Rng, d: bool, shift: f64| {
            let v = normal.sample(r) + if d { shift } else { 0.0 };
            if coarse {
                (v * 2.0).round()
            } else {
                v
            }
        };
        let a: Vec<f64> = y.iter().map(|&d| draw(&mut r, d, 1.0)).collect();
        let b: Vec<f64> = y.iter().map(|&d| draw(&mut r, d, 0.5)).collect();
        let got = delong_test(&a, &b, &y).map_err(|e| e.to_string())?.variance;
        worst = worst.max((got - delong_variance_oracle(&a, &b, &y)).abs());
    }

    // equal true AUCs: correlated scores with the same signal
    let mut p_values = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let y: Vec<bool> = (0..300).map(|_| r.random::<f64>() < 0.3).collect();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for &d in &y {
            let common = normal.sample(&mut r) + if d { 0.8 } else { 0.0 };
            a.push(common + normal.sample(&mut r));
            b.push(common + normal.sample(&mut r));
        }
        p_values.push(delong_test(&a, &b, &y).map_err(|e| e.to_string())?.p_value);
    }
    p_values.sort_by(f64::total_cmp);
    let k = p_values.len() as f64;
    let ks = p_values
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i as f64 + 1.0) / k - p).max(p - i as f64 / k))
        .fold(0.0, f64::max);
    let critical = 1.628 / k.sqrt();
    let detail = format!(
        "max |variance - oracle| {worst:.2e} on 200 datasets; null p-value KS {ks:.4} vs 1% critical {critical:.4}"
    );
    if worst <= 1e-10 && ks < critical {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Outcome of the full-scale `run`s shared by criteria 8 to 11.
struct ScaleRuns {
    dir: tempfile::TempDir,
    summary: serde_json::Value,
    seconds: f64,
    max_rss_kb: i64,
    calls: usize,
}

fn callnet(args: &[&str], log: &Path) -> std::result::Result<(f64, i64), String> {
    let start = Instant::now();
    let child = Command::new(env!("CARGO_BIN_EXE_callnet"))
        .args(args)
        .stdout(Stdio::null())
        .stderr(Stdio::from(File::create(log).map_err(|e| e.to_string())?))
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut status = 0;
    // SAFETY: a zeroed rusage is a valid out-parameter, and the pid is our
    // own unreaped child.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let pid = unsafe { libc::wait4(child.id() as libc::pid_t, &mut status, 0, &mut usage) };
    let seconds = start.elapsed().as_secs_f64();
    if pid < 0 {
        return Err(format!("wait4: {}", std::io::Error::last_os_error()));
    }
    if !(libc::WIFEXITED(status) && libc::WEXITSTATUS(status) == 0) {
        let tail = fs::read_to_string(log).unwrap_or_default();
        return Err(format!("callnet {} failed ({status}): {}", args.join(" "), tail.trim()));
    }
    Ok((seconds, usage.ru_maxrss))
}

fn scale_runs() -> std::result::Result<ScaleRuns, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let configs = workspace().join("configs");
    let synth_cfg = configs.join("synth-scale.toml").to_string_lossy().into_owned();
    let exp_cfg = configs.join("experiment.toml").to_string_lossy().into_owned();
    callnet(&["synth", "--config", &synth_cfg, "--out", &p("data")], &dir.path().join("synth.log"))?;
    let calls = fs::read_to_string(dir.path().join("data/cdr.csv"))
        .map_err(|e| e.to_string())?
        .lines()
        .count()
        - 1;
    let (seconds, max_rss_kb) = callnet(
        &["run", "--config", &exp_cfg, "--data", &p("data"), "--out", &p("out1")],
        &dir.path().join("run1.log"),
    )?;
    callnet(
        &["run", "--config", &exp_cfg, "--data", &p("data"), "--out", &p("out2")],
        &dir.path().join("run2.log"),
    )?;
    let summary = serde_json::from_str(&fs::read_to_string(dir.path().join("out1/report/summary.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    Ok(ScaleRuns {
        dir,
        summary,
        seconds,
        max_rss_kb,
        calls,
    })
}

fn c8_reproduction(runs: &ScaleRuns) -> Check {
    let s = &runs.summary;
    let primary = s["primary_classifier"].as_str().unwrap_or_default().to_string();
    let auc: HashMap<String, f64> = s["models"]
        .as_array()
        .ok_or("no models in the report")?
        .iter()
        .filter(|m| m["classifier"] == primary.as_str())
        .map(|m| (m["model"].as_str().unwrap().to_string(), m["auc"].as_f64().unwrap()))
        .collect();
    let (auc_h, auc_a) = (auc.get("H").copied().ok_or("no model H")?, auc.get("A").copied().ok_or("no model A")?);
    let mut worst_p: f64 = 0.0;
    let mut h_wins = true;
    for single in ["A", "B", "C", "D", "E"] {
        let row = s["delong"]
            .as_array()
            .ok_or("no DeLong table")?
            .iter()
            .find(|d| {
                d["classifier"] == primary.as_str()
                    && ((d["model_a"] == single && d["model_b"] == "H") || (d["model_a"] == "H" && d["model_b"] == single))
            })
            .ok_or(format!("no DeLong row for {single} vs H"))?;
        let diff = row["result"]["auc_diff"].as_f64().unwrap();
        let h_better = if row["model_a"] == "H" { diff > 0.0 } else { diff < 0.0 };
        h_wins &= h_better;
        worst_p = worst_p.max(row["result"]["p_value"].as_f64().unwrap());
    }
    let rho = s["rank_correlations"]
        .as_array()
        .ok_or("no rank correlations")?
        .iter()
        .find(|r| r["classifier"] == primary.as_str())
        .and_then(|r| r["correlations"]["spearman_rho"].as_f64())
        .ok_or("no EMP/AUC rank correlation")?;
    let detail = format!(
        "{primary}: AUC H {auc_h:.4} vs A {auc_a:.4}; H beats each of A..E with largest DeLong p {worst_p:.2e}; EMP/AUC Spearman {rho:.3}"
    );
    if auc_h > auc_a && h_wins && worst_p < 0.05 && rho > 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_roi_sweep(runs: &ScaleRuns) -> Check {
    let sweep: Vec<(f64, f64)> = runs.summary["sweep_roi"]
        .as_array()
        .ok_or("no ROI sweep in the report")?
        .iter()
        .map(|r| (r["value"].as_f64().unwrap(), r["emp"].as_f64().unwrap()))
        .collect();
    let mut violations = sweep.windows(2).filter(|w| w[1].1 > w[0].1).count();
    let mut r = rng(909);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let grid: Vec<f64> = (1..=40).map(|k| f64::from(k) * 0.0125).collect();
    for _ in 0..20 {
        let y: Vec<bool> = (0..1000).map(|_| r.random::<f64>() < 0.1).collect();
        let scores: Vec<f64> = y.iter().map(|&d| normal.sample(&mut r) + if d { 1.0 } else { 0.0 }).collect();
        let p = EmpParams {
            p0: 0.2,
            p1: 0.3,
            ..Default::default()
        };
        let rows = sensitivity_sweep(&scores, &y, &p, SweepParameter::Roi, &grid).map_err(|e| e.to_string())?;
        violations += rows.windows(2).filter(|w| w[1].emp > w[0].emp).count();
    }
    let detail = format!(
        "pipeline sweep over {} ROI values from {:.4} to {:.4} and 20 random score sets: {violations} increases",
        sweep.len(),
        sweep.first().map_or(f64::NAN, |x| x.1),
        sweep.last().map_or(f64::NAN, |x| x.1)
    );
    if violations == 0 && sweep.len() >= 2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c10_performance(runs: &ScaleRuns) -> Check {
    let rss_mb = runs.max_rss_kb as f64 / 1024.0;
    let nodes = fs::read_to_string(runs.dir.path().join("data/truth.csv"))
        .map(|t| t.lines().count() - 1)
        .unwrap_or(0);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "{} calls, {nodes} numbers: `run` took {:.1} s on {cores} core(s), peak RSS {rss_mb:.0} MB",
        runs.calls, runs.seconds
    );
    if runs.seconds < 300.0 && rss_mb < 1024.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn files_under(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?);
    }
    Ok(out)
}

fn c11_determinism(runs: &ScaleRuns) -> Check {
    let a = files_under(&runs.dir.path().join("out1/report")).map_err(|e| e.to_string())?;
    let b = files_under(&runs.dir.path().join("out2/report")).map_err(|e| e.to_string())?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let bytes: usize = a.values().map(Vec::len).sum();
    let detail = format!("{} report files ({bytes} bytes) from two runs, {} differ", a.len(), differing.len());
    if a.keys().eq(b.keys()) && differing.is_empty() && !a.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {differing:?}"))
    }
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let mut failed = 0;
    let mut report = |n: usize, name: &str, result: Check| {
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {n:>2} {name:<24} {detail}");
    };
    let cheap: [(usize, &str, fn() -> Check); 7] = [
        (1, "ppr-oracle", c1_ppr_oracle),
        (2, "spa-conservation", c2_spa_conservation),
        (3, "emp-oracle", c3_emp_oracle),
        (4, "profit-identities", c4_profit_identities),
        (5, "importance-recovery", c5_importance_recovery),
        (6, "homophily-calibration", c6_homophily_calibration),
        (7, "delong", c7_delong),
    ];
    for (n, name, f) in cheap {
        if wanted(n) {
            report(n, name, f());
        }
    }
    let scale: [(usize, &str, fn(&ScaleRuns) -> Check); 4] = [
        (8, "synthetic-reproduction", c8_reproduction),
        (9, "roi-sensitivity", c9_roi_sweep),
        (10, "performance", c10_performance),
        (11, "determinism", c11_determinism),
    ];
    if scale.iter().any(|(n, _, _)| wanted(*n)) {
        match scale_runs() {
            Ok(runs) => {
                for (n, name, f) in scale {
                    if wanted(n) {
                        report(n, name, f(&runs));
                    }
                }
            }
            Err(e) => {
                for (n, name, _) in scale {
                    if wanted(n) {
                        report(n, name, Err(format!("full-scale runs failed: {e}")));
                    }
                }
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
