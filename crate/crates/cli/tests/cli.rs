use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use tailfolio_core::marketdata::{write_yields, PricePanel};
use tailfolio_core::synthetic::{business_days, generate, SyntheticSpec};

fn tailfolio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailfolio"))
        .args(args)
        .output()
        .expect("spawn tailfolio")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Gaussian dataset with `n_prices` rows written to `dir/data`.
fn gaussian_data(dir: &Path, n_assets: usize, n_prices: usize) -> PathBuf {
    let data = dir.join("data");
    generate(&SyntheticSpec::gaussian(n_assets, n_prices, 5))
        .unwrap()
        .write_to(&data)
        .unwrap();
    data
}

fn data_rows(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines().count() - 1
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_data_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = tailfolio(&[
        "backtest",
        "--data",
        s(&tmp.path().join("nowhere")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("loading prices"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn metrics_needs_a_backtest() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gaussian_data(tmp.path(), 3, 200);
    let o = tailfolio(&[
        "metrics",
        "--data",
        s(&data),
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run the backtest command first"));
}

#[test]
fn bad_input_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        tailfolio(&["frontier", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(tailfolio(&["optimize"]).status.code(), Some(2));
    assert_eq!(
        tailfolio(&["backtest", "--window", "ten"]).status.code(),
        Some(2)
    );
    assert_eq!(
        tailfolio(&["backtest", "--strategy", "ls150"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tailfolio(&["hill", "--set", "colour=red"]).status.code(),
        Some(2)
    );
    let cfg = tmp.path().join("bad.conf");
    std::fs::write(&cfg, "levels = 0.3\n").unwrap();
    let o = tailfolio(&["hill", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("levels"));
}

#[test]
fn frontier_honours_points() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gaussian_data(tmp.path(), 3, 300);
    let out = tmp.path().join("out");
    let o = tailfolio(&[
        "frontier",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--points",
        "2",
        "--levels",
        "0.9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = out.join("frontier");
    assert_eq!(data_rows(&dir.join("frontier_mv.csv")), 2);
    assert_eq!(data_rows(&dir.join("frontier_cvar_90.csv")), 2);
    assert!(!dir.join("frontier_cvar_95.csv").exists());
}

#[test]
fn backtest_then_metrics_on_a_1200_day_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gaussian_data(tmp.path(), 3, 1201);
    let out = tmp.path().join("out");
    let common = [
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--labels",
        "MVP,M95",
        "--strategy",
        "long-only,ls30",
        "--levels",
        "0.9",
    ];
    let o = tailfolio(&[&["backtest"], &common[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    for slug in ["long-only", "ls30"] {
        let dir = out.join("backtest").join(slug);
        for label in ["MVP", "M95", "EQW"] {
            assert_eq!(data_rows(&dir.join(format!("wealth_{label}.csv"))), 192);
            assert_eq!(data_rows(&dir.join(format!("weights_{label}.csv"))), 192);
        }
        let svg = std::fs::read_to_string(dir.join("wealth.svg")).unwrap();
        assert!(svg.contains(">EQW<"));
        assert!(svg.contains("#000000"));
    }
    assert_eq!(data_rows(&out.join("backtest/summary.csv")), 6);

    let o = tailfolio(&[&["metrics", "--set", "sub_window=63"], &common[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = out.join("metrics/ls30");
    for name in [
        "sharpe_MVP.csv",
        "rachev_90_90_M95.csv",
        "starr_90_EQW.csv",
        "starr_90.svg",
    ] {
        assert!(dir.join(name).exists(), "{name}");
    }
    assert!(!dir.join("starr_95_EQW.csv").exists());
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gaussian_data(tmp.path(), 3, 121);
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.conf");
    std::fs::write(
        &cfg,
        format!(
            "window = 50\nlabels = MVP\nstrategies = ls10\ndata = {}\nout = {}\n",
            s(&data),
            s(&out)
        ),
    )
    .unwrap();
    let o = tailfolio(&["backtest", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&out.join("backtest/ls10/weights_MVP.csv")), 70);
    let o = tailfolio(&["backtest", "--config", s(&cfg), "--window", "60"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&out.join("backtest/ls10/weights_MVP.csv")), 60);
}

#[test]
fn constant_tail_is_reported_and_nothing_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let n = 400;
    let dates = business_days(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), n);
    // FLAT alternates between two prices, so every positive log return is identical
    let prices = DMatrix::from_fn(n, 2, |i, j| match j {
        0 => {
            if i % 2 == 0 {
                100.0
            } else {
                110.0
            }
        }
        _ => 100.0 * (1.0 + 0.01 * ((i * 7919) % 13) as f64),
    });
    PricePanel::new(dates.clone(), vec!["FLAT".into(), "NOISY".into()], prices)
        .unwrap()
        .write_csv(std::fs::File::create(data.join("prices.csv")).unwrap())
        .unwrap();
    let yields: Vec<_> = dates.iter().map(|&d| (d, 0.01)).collect();
    write_yields(
        &yields,
        std::fs::File::create(data.join("treasury_3m.csv")).unwrap(),
    )
    .unwrap();

    let out = tmp.path().join("out");
    let o = tailfolio(&[
        "hill",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--set",
        "hill_tail=upper",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("FLAT") && err.contains("degenerate"), "{err}");
    assert!(!out.exists());
}

#[test]
fn ingest_writes_aligned_series() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gaussian_data(tmp.path(), 2, 50);
    let out = tmp.path().join("out");
    let o = tailfolio(&[
        "ingest",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--tenor",
        "1y",
        "--returns",
        "arith",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&out.join("ingest/returns.csv")), 49);
    assert_eq!(data_rows(&out.join("ingest/risk_free.csv")), 49);
    assert_eq!(data_rows(&out.join("ingest/prices_indexed.csv")), 50);
}
