//! Acceptance checks. Each criterion prints one PASS/FAIL line with the
//! measured quantity, its tolerance and the runtime against its limit. The
//! process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tailfolio_core::backtest::{
    build_constraints, rolling_optimize, wealth_track, BacktestSpec, ConstraintSet, StrategySpec,
};
use tailfolio_core::cvar::{
    fractional_cvar, solve_min_cvar, trace_cvar_frontier, CvarOptions, ScenarioMatrix,
};
use tailfolio_core::marketdata::{
    align_risk_free, build_eqw_track, compute_returns, load_price_panel, load_yields, PricePanel,
    ReturnKind, ReturnPanel, RiskFreeSeries, Tenor,
};
use tailfolio_core::meanvar::{
    frontier_coefficients, min_variance_portfolio, trace_frontier, PortfolioLabel,
};
use tailfolio_core::riskmetrics::{rachev_ratio, sharpe_ratio, starr_ratio};
use tailfolio_core::solvers::{solve_qp, QuadraticProgram};
use tailfolio_core::synthetic::{generate, SyntheticSpec};
use tailfolio_core::tailrisk::{hill_estimate, wald_band, Tail};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n + 3, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    a.transpose() * &a / (n + 3) as f64 + DMatrix::identity(n, n) * 0.05
}

// ---------------------------------------------------------------- 1

fn closed_form_vs_qp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    let mut failed = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let sigma = random_spd(&mut rng, n) * 1e-4;
        let qp = QuadraticProgram::new(
            sigma.clone(),
            DVector::zeros(n),
            DMatrix::from_element(1, n, 1.0),
            DVector::from_element(1, 1.0),
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
        )
        .expect("valid QP");
        let sol = solve_qp(&qp);
        if !sol.is_optimal() {
            failed += 1;
            continue;
        }
        let inv_e = sigma
            .clone()
            .lu()
            .solve(&DVector::from_element(n, 1.0))
            .expect("nonsingular");
        let oracle = &inv_e / inv_e.sum();
        worst = worst.max((&sol.x - oracle).amax());
    }
    outcome(
        failed == 0 && worst <= 1e-8,
        format!("max |w_qp - w_closed| = {worst:.2e} (tol 1e-8), non-optimal solves {failed}"),
    )
}

// ---------------------------------------------------------------- 2

fn frontier_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0_f64;
    let mut points = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let sigma = random_spd(&mut rng, n) * 1e-4;
        let mu = DVector::from_fn(n, |_, _| rng.random_range(-5e-4..1.5e-3));
        let coeffs = frontier_coefficients(&mu, &sigma).expect("frontier");
        let inv = sigma.clone().try_inverse().expect("invertible");
        let e = DVector::from_element(n, 1.0);
        let a = mu.dot(&(&inv * &mu));
        let b = e.dot(&(&inv * &e));
        let c = mu.dot(&(&inv * &e));
        let delta = a * b - c * c;
        let lo = mu.min() - 5e-4;
        let hi = mu.max() + 5e-4;
        for p in trace_frontier(&coeffs, 50, (lo, hi), 0.0).expect("trace") {
            let r = p.target_return;
            let var = (p.weights.transpose() * &sigma * &p.weights)[(0, 0)];
            let lhs = var * delta;
            let rhs = b * r * r - 2.0 * c * r + a;
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
            points += 1;
        }
    }
    outcome(
        worst <= 1e-10,
        format!("{points} points, max |σ²Δ - (Br² - 2Cr + A)| = {worst:.2e} (tol 1e-10)"),
    )
}

// ---------------------------------------------------------------- 3

/// Best point of the `1/steps` simplex grid; with 20 scenarios at 95% the
/// tail is the single largest loss.
fn grid_min_max_loss(scen: &ScenarioMatrix, steps: usize) -> (f64, DVector<f64>) {
    let mut best = (f64::INFINITY, DVector::zeros(3));
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let w = DVector::from_vec(vec![
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ]);
            let c = scen
                .losses(&w)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if c < best.0 {
                best = (c, w);
            }
        }
    }
    best
}

fn cvar_lp_vs_grid() -> Outcome {
    let step = 0.01;
    let mut worst_w = 0.0_f64;
    let mut worst_obj = 0.0_f64;
    let mut worst_fine = 0.0_f64;
    let mut lp_above_grid = 0;
    let mut misses = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let returns = DMatrix::from_fn(20, 3, |_, j| {
            let z: f64 = rng.sample(StandardNormal);
            0.0002 * j as f64 + 0.01 * (1.0 + 0.3 * j as f64) * z
        });
        let scen = ScenarioMatrix::new(returns).expect("scenarios");
        let lp = solve_min_cvar(
            &scen,
            0.95,
            None,
            &ConstraintSet::long_only(3),
            &CvarOptions::default(),
        )
        .expect("LP solves");
        let coarse = grid_min_max_loss(&scen, 100);
        let fine = grid_min_max_loss(&scen, 1000);
        if lp.cvar > fine.0.min(coarse.0) + 1e-12 {
            lp_above_grid += 1;
        }
        let obj = (coarse.0 - lp.cvar).abs();
        let w = (&coarse.1 - &lp.portfolio.weights).amax();
        if obj > 1e-4 || w > step + 1e-12 {
            misses += 1;
        }
        worst_obj = worst_obj.max(obj);
        worst_w = worst_w.max(w);
        worst_fine = worst_fine.max(fine.0 - lp.cvar);
    }
    outcome(
        misses == 0 && lp_above_grid == 0,
        format!(
            "{misses}/20 instances outside tolerance; max weight gap {worst_w:.4} (tol {step}), max objective gap {worst_obj:.2e} (tol 1e-4); LP above any grid point {lp_above_grid}, 1e-3 grid gap {worst_fine:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 4

fn bundled_returns(kind: ReturnKind) -> ReturnPanel {
    let ds = generate(&SyntheticSpec::bundled(7)).expect("bundled data");
    compute_returns(&ds.prices, kind).expect("returns")
}

fn cvar_monotonicity() -> Outcome {
    let r = bundled_returns(ReturnKind::Log);
    let scen = ScenarioMatrix::new(r.returns().clone()).expect("scenarios");
    let mut violations = 0;
    let mut points = 0;
    let mut min_gap = f64::INFINITY;
    for strategy in StrategySpec::standard() {
        let set = build_constraints(strategy, r.n_assets()).expect("constraints");
        let range = set.frontier_range(&scen.means()).expect("range");
        let f95 = trace_cvar_frontier(&scen, 0.95, 50, range, &set, 0.0).expect("0.95 frontier");
        let f99 = trace_cvar_frontier(&scen, 0.99, 50, range, &set, 0.0).expect("0.99 frontier");
        for p in &f95 {
            let Some(q) = f99.iter().find(|q| q.target_return == p.target_return) else {
                continue;
            };
            points += 1;
            let gap = q.risk - p.risk;
            min_gap = min_gap.min(gap);
            if gap < 0.0 {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0 && points > 0,
        format!("{points} shared targets over 4 strategies, violations {violations}, min CVaR99 - CVaR95 = {min_gap:.3e}"),
    )
}

// ---------------------------------------------------------------- 5

fn log_arith_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (t, n) = (1000, 5);
    let dates = tailfolio_core::synthetic::business_days(
        chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        t + 1,
    );
    let mut prices = DMatrix::zeros(t + 1, n);
    let mut max_move = 0.0_f64;
    for j in 0..n {
        prices[(0, j)] = 100.0;
    }
    for i in 0..t {
        let common: f64 = rng.sample(StandardNormal);
        for j in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let r = (0.0002 * j as f64 + 0.003 * (0.5 * common + z)).clamp(-0.01, 0.01);
            max_move = max_move.max(r.abs());
            prices[(i + 1, j)] = prices[(i, j)] * (1.0 + r);
        }
    }
    let tickers = (0..n).map(|j| format!("A{j}")).collect();
    let panel = PricePanel::new(dates, tickers, prices).expect("panel");
    let mvp = |kind| {
        let r = compute_returns(&panel, kind).expect("returns");
        let (mu, sigma) = tailfolio_core::stats::mean_and_covariance(r.returns());
        min_variance_portfolio(&frontier_coefficients(&mu, &sigma).expect("frontier")).weights
    };
    let gap = (mvp(ReturnKind::Log) - mvp(ReturnKind::Arithmetic)).amax();
    outcome(
        gap <= 1e-3,
        format!("max |w_log - w_arith| = {gap:.2e} (tol 1e-3), largest daily move {max_move:.4}"),
    )
}

// ---------------------------------------------------------------- 6

fn risk_free_for(r: &ReturnPanel) -> RiskFreeSeries {
    RiskFreeSeries::constant(r.dates(), 0.0001, Tenor::ThreeMonth)
}

fn strategy_compliance() -> Outcome {
    let spec = SyntheticSpec {
        n_prices: 1201,
        ..SyntheticSpec::bundled(11)
    };
    let ds = generate(&spec).expect("panel");
    let r = compute_returns(&ds.prices, ReturnKind::Log).expect("returns");
    let rf = risk_free_for(&r);
    let n = r.n_assets();
    let mut rows = 0;
    let mut bad_rows = 0;
    let mut worst = 0.0_f64;
    let mut failures = 0;
    let mut paths = BTreeMap::new();
    for label in PortfolioLabel::OPTIMIZED {
        for strategy in StrategySpec::standard() {
            let path = rolling_optimize(&r, &BacktestSpec::new(label, strategy), &rf)
                .expect("rolling optimization");
            let set = build_constraints(strategy, n).expect("constraints");
            for i in 0..path.len() {
                let v = set.violation(&path.row(i));
                worst = worst.max(v);
                rows += 1;
                if v > 1e-8 {
                    bad_rows += 1;
                }
            }
            failures += path.failures.len();
            paths.insert((label.name(), strategy.slug()), path);
        }
    }

    // in-sample objectives along the leverage ladder
    let ladder: Vec<String> = StrategySpec::standard().iter().map(|s| s.slug()).collect();
    let days = paths[&("MVP", ladder[0].clone())].len();
    let mut nesting_breaks = 0;
    let mut worst_rise = 0.0_f64;
    for i in 0..days {
        let window = r.window(i, i + 1008);
        let (_, cov) = tailfolio_core::stats::mean_and_covariance(&window);
        let objective = |label: &str, slug: &str| -> f64 {
            let w = DVector::from_vec(paths[&(label, slug.to_string())].row(i));
            match label {
                "MVP" => (w.transpose() * &cov * &w)[(0, 0)],
                "M95" | "M99" => {
                    let conf = if label == "M95" { 0.95 } else { 0.99 };
                    let losses: Vec<f64> = (&window * &w).iter().map(|x| -x).collect();
                    fractional_cvar(&losses, conf).expect("cvar")
                }
                _ => unreachable!(),
            }
        };
        for label in ["MVP", "M95", "M99"] {
            for pair in ladder.windows(2) {
                let tighter = objective(label, &pair[0]);
                let looser = objective(label, &pair[1]);
                let rise = (looser - tighter) / tighter.abs();
                worst_rise = worst_rise.max(rise);
                if rise > 1e-9 {
                    nesting_breaks += 1;
                }
            }
        }
    }
    outcome(
        bad_rows == 0 && nesting_breaks == 0,
        format!(
            "{rows} weight rows, {bad_rows} over 1e-8 (max violation {worst:.1e}), carried-forward days {failures}; nesting breaks {nesting_breaks} (max relative rise {worst_rise:.1e})"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn no_lookahead() -> Outcome {
    let ds = generate(&SyntheticSpec::gaussian(3, 161, 17)).expect("panel");
    let r = compute_returns(&ds.prices, ReturnKind::Log).expect("returns");
    let rf = risk_free_for(&r);
    let bump_day = 110;
    let mut bumped = r.returns().clone();
    for j in 0..r.n_assets() {
        bumped[(bump_day, j)] += 0.05 * (j as f64 + 1.0);
    }
    let r2 = ReturnPanel::new(r.dates().to_vec(), r.tickers().to_vec(), bumped, r.kind())
        .expect("bumped panel");
    let bump_date = r.dates()[bump_day];
    let mut compared = 0;
    let mut changed_before = 0;
    let mut changed_after = 0;
    for label in PortfolioLabel::OPTIMIZED {
        for strategy in [
            StrategySpec::LongOnly,
            StrategySpec::long_short(0.3).unwrap(),
        ] {
            let spec = BacktestSpec::new(label, strategy).with_window(60);
            let a = rolling_optimize(&r, &spec, &rf).expect("base path");
            let b = rolling_optimize(&r2, &spec, &rf).expect("bumped path");
            for i in 0..a.len() {
                if a.dates[i] <= bump_date {
                    compared += 1;
                    if a.row(i) != b.row(i) {
                        changed_before += 1;
                    }
                } else if a.row(i) != b.row(i) {
                    changed_after += 1;
                }
            }
        }
    }
    outcome(
        changed_before == 0 && compared > 0,
        format!("{compared} rows dated <= t compared, {changed_before} differ; {changed_after} later rows react to the bump"),
    )
}

// ---------------------------------------------------------------- 8

fn tail_mean(sorted_desc: &[f64], level: f64) -> f64 {
    let k = ((1.0 - level) * sorted_desc.len() as f64 - 1e-9)
        .ceil()
        .max(1.0) as usize;
    sorted_desc[..k].iter().sum::<f64>() / k as f64
}

fn ratio_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = 0.0_f64;
    let mut symmetric_misses = 0;
    let mut scale_misses = 0;
    for _ in 0..1000 {
        let len = rng.random_range(40..400);
        let x: Vec<f64> = (0..len)
            .map(|_| 0.0003 + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mean = x.iter().sum::<f64>() / len as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64).sqrt();
        let mut gains = x.clone();
        gains.sort_by(|a, b| b.total_cmp(a));
        let mut losses: Vec<f64> = x.iter().map(|v| -v).collect();
        losses.sort_by(|a, b| b.total_cmp(a));
        let (alpha, beta) = (0.95, 0.9);
        let etl = tail_mean(&losses, alpha);
        let oracle = [mean / sd, tail_mean(&gains, beta) / etl, mean / etl];
        let got = [
            sharpe_ratio(&x).unwrap(),
            rachev_ratio(&x, alpha, beta).unwrap(),
            starr_ratio(&x, alpha).unwrap(),
        ];
        for (g, o) in got.iter().zip(oracle) {
            worst = worst.max((g - o).abs() / o.abs().max(1.0));
        }

        let mut sym = x.clone();
        sym.extend(x.iter().map(|v| -v));
        for level in [0.9, 0.95, 0.99] {
            if rachev_ratio(&sym, level, level).unwrap() != 1.0 {
                symmetric_misses += 1;
            }
        }
        let base = sharpe_ratio(&x).unwrap();
        for c in [0.25, 2.0, 8.0, 1024.0] {
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            if sharpe_ratio(&scaled).unwrap() != base {
                scale_misses += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12 && symmetric_misses == 0 && scale_misses == 0,
        format!(
            "max deviation from sorted reference {worst:.1e} (tol 1e-12), symmetric Rachev != 1: {symmetric_misses}, Sharpe scale mismatches (c = 2^k): {scale_misses}"
        ),
    )
}

// ---------------------------------------------------------------- 9

fn hill_coverage() -> Outcome {
    let alpha = 2.5;
    let n = 5000;
    let k = (n as f64).sqrt().floor() as usize;
    let reps = 200;
    let mut covered = 0;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + rep as u64);
        let sample: Vec<f64> = (0..n)
            .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha))
            .collect();
        let est = hill_estimate(&sample, k).expect("estimate");
        let (lo, hi) = wald_band(est, k, 0.95);
        if lo <= alpha && alpha <= hi {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;

    // deterministic Pareto quantile grid
    let m = 10_000;
    let grid: Vec<f64> = (1..=m)
        .map(|i| (i as f64 / (m + 1) as f64).powf(-1.0 / alpha))
        .collect();
    let est = hill_estimate(&grid, 50).expect("grid estimate");
    let rel = (est / alpha - 1.0).abs();
    outcome(
        rate >= 0.90 && rel <= 0.05,
        format!("coverage {covered}/{reps} = {rate:.3} (need 0.90) at k = {k}; grid estimate {est:.4}, relative error {rel:.4} (tol 0.05)"),
    )
}

// ---------------------------------------------------------------- 10

fn pipeline_structure() -> Outcome {
    let data = repo_root().join("data");
    let prices = load_price_panel(data.join("prices.csv"), None).expect("bundled prices");
    let est = compute_returns(&prices, ReturnKind::Log).expect("log returns");
    let arith = compute_returns(&prices, ReturnKind::Arithmetic).expect("arith returns");
    let yields = load_yields(data.join("treasury_3m.csv")).expect("bundled yields");
    let rf = align_risk_free(&yields, arith.dates(), Tenor::ThreeMonth).expect("aligned rf");

    let mut strategies_ok = 0;
    let mut lines = Vec::new();
    for strategy in StrategySpec::standard() {
        let eqw_path =
            rolling_optimize(&est, &BacktestSpec::new(PortfolioLabel::Eqw, strategy), &rf)
                .expect("EQW path");
        let eqw = wealth_track(&eqw_path, &arith, &rf, 100.0)
            .expect("EQW wealth")
            .wealth
            .terminal();
        let mut beat = 0;
        for label in PortfolioLabel::OPTIMIZED {
            let path =
                rolling_optimize(&est, &BacktestSpec::new(label, strategy), &rf).expect("path");
            let w = wealth_track(&path, &arith, &rf, 100.0)
                .expect("wealth")
                .wealth
                .terminal();
            if w >= eqw {
                beat += 1;
            }
        }
        if beat * 2 > PortfolioLabel::OPTIMIZED.len() {
            strategies_ok += 1;
        }
        lines.push(format!("{} {beat}/6", strategy.slug()));
    }

    let eqw_returns = build_eqw_track(&arith, 1.0).expect("EQW track").returns();
    let bench = load_price_panel(data.join("benchmark.csv"), None).expect("benchmark");
    let bench_returns = compute_returns(&bench, ReturnKind::Arithmetic)
        .expect("benchmark returns")
        .column(0);
    let k = eqw_returns.len() / 20;
    let a_eqw = hill_estimate(&Tail::Lower.extract(&eqw_returns), k).expect("EQW Hill");
    let a_bench = hill_estimate(&Tail::Lower.extract(&bench_returns), k).expect("benchmark Hill");
    outcome(
        strategies_ok >= 3 && a_eqw < a_bench,
        format!(
            "optimized >= EQW (majority of 6) in {strategies_ok}/4 strategies [{}]; Hill k = {k}: EQW {a_eqw:.3} vs BENCH {a_bench:.3}",
            lines.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 11

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tailfolio"))
        .args(args)
        .output()
        .expect("spawn tailfolio")
}

fn collect_files(dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>, root: &Path) {
    for entry in std::fs::read_dir(dir).expect("read dir") {
        let p = entry.expect("dir entry").path();
        if p.is_dir() {
            collect_files(&p, out, root);
        } else {
            let rel = p.strip_prefix(root).unwrap().to_path_buf();
            out.insert(rel, std::fs::read(&p).expect("read file"));
        }
    }
}

fn csv_problem(bytes: &[u8]) -> Option<String> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let width = match reader.headers() {
        Ok(h) if !h.is_empty() => h.len(),
        _ => return Some("missing header".into()),
    };
    let mut rows = 0;
    for rec in reader.records() {
        match rec {
            Ok(r) if r.len() == width => rows += 1,
            Ok(r) => {
                return Some(format!(
                    "row of width {} under header of width {width}",
                    r.len()
                ))
            }
            Err(e) => return Some(e.to_string()),
        }
    }
    (rows == 0).then(|| "no data rows".into())
}

fn cli_end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let data = tmp.path().join("data");
    let data_s = data.to_str().unwrap().to_string();
    let mut exit_failures = Vec::new();
    let mut trees = Vec::new();
    for run in 0..2 {
        let out = tmp.path().join(format!("out{run}"));
        let out_s = out.to_str().unwrap().to_string();
        let base = [
            "--data",
            data_s.as_str(),
            "--out",
            out_s.as_str(),
            "--seed",
            "7",
        ];
        for cmd in [
            vec!["ingest", "--synthetic"],
            vec!["frontier"],
            vec!["backtest"],
            vec!["metrics"],
            vec!["hill"],
        ] {
            let mut args = cmd.clone();
            args.extend_from_slice(&base);
            let o = run_cli(&args);
            if !o.status.success() {
                exit_failures.push(format!(
                    "run {run} `{}` -> {:?}: {}",
                    cmd.join(" "),
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr).trim()
                ));
            }
        }
        let mut files = BTreeMap::new();
        collect_files(&out, &mut files, &out);
        collect_files(&data, &mut files, tmp.path());
        trees.push(files);
    }

    let mut malformed = Vec::new();
    let (mut n_csv, mut n_svg) = (0, 0);
    for (path, bytes) in &trees[0] {
        let problem = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                n_csv += 1;
                csv_problem(bytes)
            }
            Some("svg") => {
                n_svg += 1;
                let text = String::from_utf8_lossy(bytes);
                match roxmltree::Document::parse(&text) {
                    Ok(doc) if doc.root_element().tag_name().name() == "svg" => None,
                    Ok(_) => Some("root element is not <svg>".into()),
                    Err(e) => Some(e.to_string()),
                }
            }
            _ => None,
        };
        if let Some(p) = problem {
            malformed.push(format!("{}: {p}", path.display()));
        }
    }
    let identical = trees[0] == trees[1];

    let mut bundled_matches = true;
    for name in [
        "prices.csv",
        "treasury_3m.csv",
        "treasury_1y.csv",
        "benchmark.csv",
    ] {
        let generated = std::fs::read(data.join(name)).ok();
        let shipped = std::fs::read(repo_root().join("data").join(name)).ok();
        bundled_matches &= generated.is_some() && generated == shipped;
    }

    let mut detail = format!(
        "{} files ({n_csv} CSV, {n_svg} SVG), exit failures {}, malformed {}, rerun identical {identical}, regenerated data equals data/ {bundled_matches}",
        trees[0].len(),
        exit_failures.len(),
        malformed.len()
    );
    for m in exit_failures.iter().chain(&malformed).take(5) {
        detail.push_str(&format!("\n      {m}"));
    }
    outcome(
        exit_failures.is_empty()
            && malformed.is_empty()
            && identical
            && bundled_matches
            && n_csv > 0
            && n_svg > 0,
        detail,
    )
}

// ----------------------------------------------------------------

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(u32, &str, Duration, Check); 11] = [
        (
            1,
            "closed-form MVP vs QP",
            Duration::from_secs(5),
            closed_form_vs_qp,
        ),
        (
            2,
            "frontier identity",
            Duration::from_secs(1),
            frontier_identity,
        ),
        (
            3,
            "CVaR LP vs grid search",
            Duration::from_secs(30),
            cvar_lp_vs_grid,
        ),
        (
            4,
            "CVaR monotonicity in confidence",
            Duration::from_secs(10),
            cvar_monotonicity,
        ),
        (
            5,
            "log/arithmetic MVP equivalence",
            Duration::from_secs(2),
            log_arith_equivalence,
        ),
        (
            6,
            "strategy compliance and nesting",
            Duration::from_secs(120),
            strategy_compliance,
        ),
        (7, "no lookahead", Duration::from_secs(10), no_lookahead),
        (8, "ratio oracles", Duration::from_secs(5), ratio_oracles),
        (9, "Hill coverage", Duration::from_secs(30), hill_coverage),
        (
            10,
            "pipeline structure",
            Duration::from_secs(120),
            pipeline_structure,
        ),
        (
            11,
            "CLI end to end",
            Duration::from_secs(180),
            cli_end_to_end,
        ),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {} [{:.2} s / limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
