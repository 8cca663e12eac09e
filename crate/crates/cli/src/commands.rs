//! The five subcommands. Each one loads and computes everything in memory
//! and only then writes its files, so a failure leaves no partial output.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use tailfolio_core::backtest::{
    build_constraints, rolling_optimize, wealth_track, BacktestResult, BacktestSpec, StrategySpec,
};
use tailfolio_core::cvar::{
    fractional_cvar, tangent_cvar_portfolio_with, trace_cvar_frontier, CvarOptions, ScenarioMatrix,
};
use tailfolio_core::marketdata::{
    align_risk_free, build_eqw_track, compute_returns, load_price_panel, load_yields, PricePanel,
    ReturnKind, ReturnPanel, RiskFreeSeries, WealthSeries,
};
use tailfolio_core::meanvar::{
    frontier_coefficients, min_variance_portfolio, tangent_portfolio, trace_frontier,
    FrontierPoint, PortfolioLabel,
};
use tailfolio_core::riskmetrics::{rolling_ratio_distribution, write_samples_csv, MetricSpec};
use tailfolio_core::stats;
use tailfolio_core::synthetic::{generate, SyntheticSpec};
use tailfolio_core::tailrisk::hill_curve;

use crate::config::RunConfig;
use crate::svg::{boxplot, date_x, Chart, Series, Style};

/// Files staged in memory until the command has fully succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn add_with(
        &mut self,
        path: PathBuf,
        write: impl FnOnce(&mut Vec<u8>) -> tailfolio_core::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf).with_context(|| format!("formatting {}", path.display()))?;
        self.add(path, buf);
        Ok(())
    }

    fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

struct Market {
    prices: PricePanel,
    /// Returns of the configured kind, used for estimation.
    estimation: ReturnPanel,
    arithmetic: ReturnPanel,
    risk_free: RiskFreeSeries,
}

fn load_market(cfg: &RunConfig) -> Result<Market> {
    let path = cfg.prices_path();
    let prices = load_price_panel(&path, cfg.ticker_filter())
        .with_context(|| format!("loading prices from {}", path.display()))?;
    let estimation = compute_returns(&prices, cfg.returns)?;
    let arithmetic = compute_returns(&prices, ReturnKind::Arithmetic)?;
    let risk_free = load_risk_free(cfg, arithmetic.dates())?;
    Ok(Market {
        prices,
        estimation,
        arithmetic,
        risk_free,
    })
}

fn load_risk_free(cfg: &RunConfig, dates: &[NaiveDate]) -> Result<RiskFreeSeries> {
    let path = cfg.yields_path();
    let yields =
        load_yields(&path).with_context(|| format!("loading yields from {}", path.display()))?;
    align_risk_free(&yields, dates, cfg.tenor)
        .with_context(|| format!("aligning {} yields to the return dates", cfg.tenor.label()))
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut s = fields.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn level_tag(level: f64) -> String {
    let pct = level * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}", pct.round() as i64)
    } else {
        format!("{pct}").replace('.', "_")
    }
}

fn print_written(written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
}

pub fn ingest(cfg: &RunConfig, synthetic: bool) -> Result<()> {
    if synthetic {
        let ds = generate(&SyntheticSpec::bundled(cfg.seed))?;
        ds.write_to(&cfg.data)
            .with_context(|| format!("writing synthetic data to {}", cfg.data.display()))?;
        println!(
            "generated synthetic dataset (seed {}) in {}",
            cfg.seed,
            cfg.data.display()
        );
    }
    let m = load_market(cfg)?;
    let dir = cfg.out.join("ingest");
    let mut out = Outputs::default();

    out.add_with(dir.join("returns.csv"), |w| m.estimation.write_csv(w))?;
    let mut rf = csv_line(["date".into(), "daily_rate".into()]);
    for (d, r) in m.risk_free.dates.iter().zip(&m.risk_free.daily_rate) {
        rf += &csv_line([d.to_string(), r.to_string()]);
    }
    out.add(dir.join("risk_free.csv"), rf.into_bytes());

    let p = m.prices.prices();
    let mut csv =
        csv_line(std::iter::once("date".to_string()).chain(m.prices.tickers().iter().cloned()));
    let mut chart = Chart::new("Indexed prices", "date", "index (first date = 100)").dates();
    let mut lines: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m.prices.n_assets()];
    for (t, d) in m.prices.dates().iter().enumerate() {
        let row: Vec<f64> = (0..m.prices.n_assets())
            .map(|j| 100.0 * p[(t, j)] / p[(0, j)])
            .collect();
        for (j, v) in row.iter().enumerate() {
            lines[j].push((date_x(*d), *v));
        }
        csv += &csv_line(std::iter::once(d.to_string()).chain(row.iter().map(|v| v.to_string())));
    }
    for (ticker, pts) in m.prices.tickers().iter().zip(lines) {
        chart.push(Series::new(ticker.clone(), pts, Style::Line));
    }
    out.add(dir.join("prices_indexed.csv"), csv.into_bytes());
    out.add(dir.join("prices_indexed.svg"), chart.render().into_bytes());

    println!(
        "{} assets, {} price dates ({} to {}), {} {} return rows",
        m.prices.n_assets(),
        m.prices.len(),
        m.prices.dates()[0],
        m.prices.dates()[m.prices.len() - 1],
        m.estimation.len(),
        cfg.returns
    );
    print_written(&out.commit()?);
    Ok(())
}

fn frontier_csv(points: &[FrontierPoint], tickers: &[String], risk_name: &str) -> String {
    let mut s = csv_line(
        [
            "target_return".to_string(),
            risk_name.to_string(),
            "ratio".to_string(),
        ]
        .into_iter()
        .chain(tickers.iter().map(|t| format!("w_{t}"))),
    );
    for p in points {
        s += &csv_line(
            [p.target_return, p.risk, p.sharpe_like]
                .into_iter()
                .chain(p.weights.iter().copied())
                .map(|v| v.to_string()),
        );
    }
    s
}

struct Marker {
    frontier: String,
    kind: &'static str,
    label: String,
    ret: f64,
    risk: f64,
}

fn frontier_chart(
    title: &str,
    risk_name: &str,
    points: &[FrontierPoint],
    markers: &[&Marker],
) -> String {
    let mut chart = Chart::new(
        title,
        format!("{risk_name} (daily)"),
        "expected return (daily)",
    );
    chart.push(Series::new(
        "frontier",
        points.iter().map(|p| (p.risk, p.target_return)).collect(),
        Style::Line,
    ));
    let rf = markers.iter().find(|m| m.kind == "risk_free");
    let tangent = markers.iter().find(|m| m.kind == "tangent");
    if let (Some(rf), Some(t)) = (rf, tangent) {
        let x_max = points.iter().map(|p| p.risk).fold(t.risk, f64::max);
        let slope = (t.ret - rf.ret) / t.risk;
        chart.push(
            Series::new(
                "capital market line",
                vec![(0.0, rf.ret), (x_max, rf.ret + slope * x_max)],
                Style::Dashed,
            )
            .color("#7f7f7f"),
        );
    }
    for m in markers.iter().filter(|m| m.kind == "asset") {
        chart.push(Series::new(
            m.label.clone(),
            vec![(m.risk, m.ret)],
            Style::Markers,
        ));
    }
    for (kind, color) in [
        ("eqw", "#000000"),
        ("mvp", "#555555"),
        ("tangent", "#b8860b"),
    ] {
        for m in markers.iter().filter(|m| m.kind == kind) {
            chart.push(
                Series::new(m.label.clone(), vec![(m.risk, m.ret)], Style::Squares).color(color),
            );
        }
    }
    chart.render()
}

pub fn frontier(cfg: &RunConfig) -> Result<()> {
    let m = load_market(cfg)?;
    let r = m.estimation.returns();
    let tickers = m.estimation.tickers();
    let n = tickers.len();
    let (means, cov) = stats::mean_and_covariance(r);
    let rf = m
        .risk_free
        .mean_over(m.estimation.dates())
        .context("risk-free rate does not cover the return dates")?;
    let eqw = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let dir = cfg.out.join("frontier");
    let mut out = Outputs::default();
    let mut markers: Vec<Marker> = Vec::new();

    // Mean-variance, unconstrained closed form.
    let coeffs = frontier_coefficients(&means, &cov)?;
    let tangent = tangent_portfolio(&coeffs, rf);
    let mut lo = means.min().min(coeffs.mvp_return());
    let mut hi = means.max().max(coeffs.mvp_return());
    if let Ok(t) = &tangent {
        let r = means.dot(&t.weights);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let mv = trace_frontier(&coeffs, cfg.points, (lo, hi), rf)?;
    let sd = |w: &nalgebra::DVector<f64>| w.dot(&(&cov * w)).max(0.0).sqrt();
    let mut mv_markers = vec![Marker {
        frontier: "mv".into(),
        kind: "risk_free",
        label: "risk-free".into(),
        ret: rf,
        risk: 0.0,
    }];
    for (j, t) in tickers.iter().enumerate() {
        mv_markers.push(Marker {
            frontier: "mv".into(),
            kind: "asset",
            label: t.clone(),
            ret: means[j],
            risk: cov[(j, j)].sqrt(),
        });
    }
    mv_markers.push(Marker {
        frontier: "mv".into(),
        kind: "eqw",
        label: "EQW".into(),
        ret: means.dot(&eqw),
        risk: sd(&eqw),
    });
    let mvp = min_variance_portfolio(&coeffs);
    mv_markers.push(Marker {
        frontier: "mv".into(),
        kind: "mvp",
        label: "MVP".into(),
        ret: means.dot(&mvp.weights),
        risk: sd(&mvp.weights),
    });
    match tangent {
        Ok(t) => mv_markers.push(Marker {
            frontier: "mv".into(),
            kind: "tangent",
            label: "TVP".into(),
            ret: means.dot(&t.weights),
            risk: sd(&t.weights),
        }),
        Err(e) => log::warn!("mean-variance tangent portfolio omitted: {e}"),
    }
    out.add(
        dir.join("frontier_mv.csv"),
        frontier_csv(&mv, tickers, "std_dev").into_bytes(),
    );
    out.add(
        dir.join("frontier_mv.svg"),
        frontier_chart(
            "Mean-variance efficient frontier",
            "standard deviation",
            &mv,
            &mv_markers.iter().collect::<Vec<_>>(),
        )
        .into_bytes(),
    );
    markers.extend(mv_markers);

    // CVaR frontiers under the first configured strategy.
    let strategy = cfg.strategies[0];
    let set = build_constraints(strategy, n)?;
    let scen = ScenarioMatrix::new(r.clone())?;
    let range = set.frontier_range(&means)?;
    for &level in &cfg.levels {
        let tag = format!("cvar_{}", level_tag(level));
        let points = trace_cvar_frontier(&scen, level, cfg.points, range, &set, rf)?;
        let cvar_of = |w: &nalgebra::DVector<f64>| fractional_cvar(&scen.losses(w), level);
        let mut mk = vec![Marker {
            frontier: tag.clone(),
            kind: "risk_free",
            label: "risk-free".into(),
            ret: rf,
            risk: 0.0,
        }];
        for (j, t) in tickers.iter().enumerate() {
            let mut e = nalgebra::DVector::zeros(n);
            e[j] = 1.0;
            mk.push(Marker {
                frontier: tag.clone(),
                kind: "asset",
                label: t.clone(),
                ret: means[j],
                risk: cvar_of(&e)?,
            });
        }
        mk.push(Marker {
            frontier: tag.clone(),
            kind: "eqw",
            label: "EQW".into(),
            ret: means.dot(&eqw),
            risk: cvar_of(&eqw)?,
        });
        let opts = CvarOptions {
            grid_points: cfg.grid_points,
            ..CvarOptions::default()
        };
        match tangent_cvar_portfolio_with(&scen, level, rf, &set, &opts) {
            Ok(t) => mk.push(Marker {
                frontier: tag.clone(),
                kind: "tangent",
                label: format!("T{}", level_tag(level)),
                ret: means.dot(&t.weights),
                risk: cvar_of(&t.weights)?,
            }),
            Err(e) => log::warn!("CVaR tangent portfolio at {level} omitted: {e}"),
        }
        out.add(
            dir.join(format!("frontier_{tag}.csv")),
            frontier_csv(&points, tickers, "cvar").into_bytes(),
        );
        out.add(
            dir.join(format!("frontier_{tag}.svg")),
            frontier_chart(
                &format!(
                    "CVaR frontier at {}% ({strategy})",
                    level_tag(level).replace('_', ".")
                ),
                "CVaR",
                &points,
                &mk.iter().collect::<Vec<_>>(),
            )
            .into_bytes(),
        );
        markers.extend(mk);
    }

    let mut csv = csv_line(["frontier", "kind", "label", "return", "risk"].map(String::from));
    for m in &markers {
        csv += &csv_line([
            m.frontier.clone(),
            m.kind.to_string(),
            m.label.clone(),
            m.ret.to_string(),
            m.risk.to_string(),
        ]);
    }
    out.add(dir.join("frontier_markers.csv"), csv.into_bytes());
    print_written(&out.commit()?);
    Ok(())
}

fn strategy_dir(cfg: &RunConfig, command: &str, s: StrategySpec) -> PathBuf {
    cfg.out.join(command).join(s.slug())
}

pub fn backtest(cfg: &RunConfig) -> Result<()> {
    let m = load_market(cfg)?;
    let mut out = Outputs::default();
    let mut summary = csv_line(
        [
            "strategy",
            "portfolio",
            "terminal_wealth",
            "days",
            "failed_days",
        ]
        .map(String::from),
    );
    for &strategy in &cfg.strategies {
        let dir = strategy_dir(cfg, "backtest", strategy);
        let mut chart =
            Chart::new(format!("Cumulative wealth, {strategy}"), "date", "wealth").dates();
        let labels = cfg.labels.iter().copied().chain([PortfolioLabel::Eqw]);
        for label in labels {
            let spec = BacktestSpec::new(label, strategy)
                .with_window(cfg.window)
                .with_grid_points(cfg.grid_points);
            let path = rolling_optimize(&m.estimation, &spec, &m.risk_free)
                .with_context(|| format!("{label} under {strategy}"))?;
            let res: BacktestResult =
                wealth_track(&path, &m.arithmetic, &m.risk_free, cfg.initial_wealth)?;
            if !path.failures.is_empty() {
                eprintln!(
                    "warning: {label} under {strategy}: {} of {} re-optimizations failed and kept the previous weights (first on {})",
                    path.failures.len(),
                    path.len(),
                    path.failures[0]
                );
            }
            summary += &csv_line([
                strategy.slug(),
                label.name().to_string(),
                res.wealth.terminal().to_string(),
                path.len().to_string(),
                path.failures.len().to_string(),
            ]);
            let pts = res
                .wealth
                .dates
                .iter()
                .zip(&res.wealth.wealth)
                .map(|(d, w)| (date_x(*d), *w))
                .collect();
            let series = Series::new(label.name(), pts, Style::Line);
            chart.push(if label == PortfolioLabel::Eqw {
                series.color("#000000")
            } else {
                series
            });
            out.add_with(dir.join(format!("wealth_{}.csv", label.name())), |w| {
                res.wealth.write_csv(w)
            })?;
            out.add_with(dir.join(format!("weights_{}.csv", label.name())), |w| {
                path.write_csv(w)
            })?;
        }
        out.add(dir.join("wealth.svg"), chart.render().into_bytes());
    }
    out.add(
        cfg.out.join("backtest").join("summary.csv"),
        summary.clone().into_bytes(),
    );
    print!("{summary}");
    print_written(&out.commit()?);
    Ok(())
}

fn metric_specs(cfg: &RunConfig) -> Vec<MetricSpec> {
    let mut v = vec![MetricSpec::Sharpe];
    for &l in &cfg.levels {
        v.push(MetricSpec::Rachev { alpha: l, beta: l });
    }
    for &l in &cfg.levels {
        v.push(MetricSpec::Starr { alpha: l });
    }
    v
}

fn read_wealth(path: &Path, initial: f64) -> Result<WealthSeries> {
    let file = std::fs::File::open(path).with_context(|| {
        format!(
            "missing backtest output {}; run the backtest command first",
            path.display()
        )
    })?;
    WealthSeries::read_csv(file, initial).with_context(|| format!("reading {}", path.display()))
}

pub fn metrics(cfg: &RunConfig) -> Result<()> {
    let specs = metric_specs(cfg);
    let mut out = Outputs::default();
    for &strategy in &cfg.strategies {
        let src = strategy_dir(cfg, "backtest", strategy);
        let dir = strategy_dir(cfg, "metrics", strategy);
        let labels: Vec<PortfolioLabel> = cfg
            .labels
            .iter()
            .copied()
            .chain([PortfolioLabel::Eqw])
            .collect();
        let mut excess_by_label = Vec::new();
        for &label in &labels {
            let wealth = read_wealth(
                &src.join(format!("wealth_{}.csv", label.name())),
                cfg.initial_wealth,
            )?;
            let rf = load_risk_free(cfg, &wealth.dates)?;
            let excess: Vec<f64> = wealth
                .returns()
                .iter()
                .zip(&rf.daily_rate)
                .map(|(r, f)| r - f)
                .collect();
            excess_by_label.push((label, wealth.dates, excess));
        }
        for spec in &specs {
            let mut groups = Vec::new();
            for (label, dates, excess) in &excess_by_label {
                let dist =
                    rolling_ratio_distribution(dates, excess, *spec, cfg.sub_window, cfg.step)
                        .with_context(|| format!("{} for {label} under {strategy}", spec.slug()))?;
                if dist.skipped > 0 {
                    eprintln!(
                        "warning: {} for {label} under {strategy}: {} window(s) undefined and skipped",
                        spec.slug(),
                        dist.skipped
                    );
                }
                out.add_with(
                    dir.join(format!("{}_{}.csv", spec.slug(), label.name())),
                    |w| write_samples_csv(&dist.samples, w),
                )?;
                groups.push((
                    label.name().to_string(),
                    dist.samples.iter().map(|s| s.value).collect::<Vec<_>>(),
                ));
            }
            let title = format!(
                "{} over {}-day windows, {strategy}",
                spec.slug(),
                cfg.sub_window
            );
            out.add(
                dir.join(format!("{}.svg", spec.slug())),
                boxplot(&title, &spec.slug(), &groups).into_bytes(),
            );
        }
    }
    print_written(&out.commit()?);
    Ok(())
}

pub fn hill(cfg: &RunConfig) -> Result<()> {
    let m = load_market(cfg)?;
    let mut series: Vec<(String, Vec<f64>)> = m
        .estimation
        .tickers()
        .iter()
        .enumerate()
        .map(|(j, t)| (t.clone(), m.estimation.column(j)))
        .collect();
    let eqw = build_eqw_track(&m.arithmetic, cfg.initial_wealth)?;
    series.push(("EQW".into(), eqw.returns()));
    let bench_path = cfg.benchmark_path();
    if bench_path.exists() {
        let b = load_price_panel(&bench_path, None)
            .with_context(|| format!("loading benchmark from {}", bench_path.display()))?;
        let r = compute_returns(&b, cfg.returns)?;
        for (j, t) in r.tickers().iter().enumerate() {
            series.push((t.clone(), r.column(j)));
        }
    }
    let k_range = cfg.hill_k_min.zip(cfg.hill_k_max);
    let dir = cfg.out.join("hill");
    let mut out = Outputs::default();
    for (name, values) in &series {
        let curve = hill_curve(values, cfg.hill_tail, k_range, cfg.hill_confidence)
            .with_context(|| format!("Hill estimate for {name}"))?;
        out.add_with(dir.join(format!("hill_{name}.csv")), |w| curve.write_csv(w))?;
        let pts = |v: &[f64]| -> Vec<(f64, f64)> {
            curve
                .k_values
                .iter()
                .zip(v)
                .map(|(&k, &a)| (k as f64, a))
                .collect()
        };
        let mut chart = Chart::new(
            format!("Hill plot, {name} ({} tail)", curve.tail.name()),
            "k (order statistics)",
            "tail index",
        );
        chart.push(Series::new("alpha_hat", pts(&curve.alpha_hat), Style::Line).color("#1f77b4"));
        let band = format!("{}% Wald band", (cfg.hill_confidence * 100.0).round());
        chart.push(Series::new(band.clone(), pts(&curve.ci_lower), Style::Dashed).color("#7f7f7f"));
        chart.push(Series::new(band, pts(&curve.ci_upper), Style::Dashed).color("#7f7f7f"));
        out.add(
            dir.join(format!("hill_{name}.svg")),
            chart.render().into_bytes(),
        );
    }
    print_written(&out.commit()?);
    Ok(())
}
