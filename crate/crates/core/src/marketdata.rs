//! Price ingestion, return computation, risk-free alignment and the equally
//! weighted benchmark.
//!
//! Price files are plain CSV with a `date,<TICKER>,...` header and ISO-8601
//! dates. Whether the supplied prices are total-return or price-only series is
//! up to the caller; no corporate-action adjustment is applied.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::{Error, Result};

/// Trading days per year used for annual-to-daily rate conversion.
pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnKind {
    /// `ln(P_t / P_{t-1})`
    Log,
    /// `P_t / P_{t-1} - 1`
    Arithmetic,
}

impl ReturnKind {
    pub fn name(self) -> &'static str {
        match self {
            ReturnKind::Log => "log",
            ReturnKind::Arithmetic => "arithmetic",
        }
    }
}

impl std::str::FromStr for ReturnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" => Ok(ReturnKind::Log),
            "arith" | "arithmetic" | "simple" => Ok(ReturnKind::Arithmetic),
            other => Err(Error::Parameter(format!("unknown return kind {other:?}"))),
        }
    }
}

impl fmt::Display for ReturnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    /// `T x N`, strictly positive.
    prices: DMatrix<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != tickers.len() {
            return Err(Error::Data(format!(
                "price matrix is {}x{} but there are {} dates and {} tickers",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        check_increasing(&dates)?;
        for (t, date) in dates.iter().enumerate() {
            for (j, ticker) in tickers.iter().enumerate() {
                let p = prices[(t, j)];
                if !(p > 0.0) || !p.is_finite() {
                    return Err(Error::InvalidPrice {
                        ticker: ticker.clone(),
                        date: *date,
                        value: p,
                    });
                }
            }
        }
        Ok(Self {
            dates,
            tickers,
            prices,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// CSV in the same `date,<TICKER>,...` layout the loader reads.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header).map_err(csv_error)?;
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.prices.row(t).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush()
            .map_err(|e| Error::Data(format!("writing prices: {e}")))
    }
}

fn check_increasing(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Data(format!(
                "dates must be strictly increasing: {} follows {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "N/A" | "NaN" | "nan" | "null")
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Parse {
        line,
        message: format!("invalid date {s:?}: {e}"),
    })
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::Io {
            path: "<csv>".into(),
            source: err,
        },
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Loads a price panel, keeping only dates where every requested ticker has a
/// value. `tickers = None` selects every column of the file.
pub fn load_price_panel(path: impl AsRef<Path>, tickers: Option<&[String]>) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    read_price_panel(file, tickers)
}

pub fn read_price_panel<R: Read>(reader: R, tickers: Option<&[String]>) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `date,<ticker>,...`".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let selected: Vec<(usize, String)> = match tickers {
        None => columns.iter().cloned().enumerate().collect(),
        Some(wanted) => wanted
            .iter()
            .map(|t| {
                columns
                    .iter()
                    .position(|c| c == t)
                    .map(|j| (j, t.clone()))
                    .ok_or_else(|| Error::Data(format!("ticker {t} not found in price file")))
            })
            .collect::<Result<_>>()?,
    };
    if selected.is_empty() {
        return Err(Error::Data("no tickers selected".into()));
    }

    let mut rows: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = parse_date(&record[0], line)?;
        let mut values = Vec::with_capacity(selected.len());
        let mut complete = true;
        for (j, ticker) in &selected {
            let cell = record.get(j + 1).unwrap_or("");
            if is_missing(cell) {
                complete = false;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid number {cell:?} for {ticker}"),
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidPrice {
                    ticker: ticker.clone(),
                    date,
                    value: v,
                });
            }
            values.push(v);
        }
        if rows.contains_key(&date) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate date {date}"),
            });
        }
        if complete {
            rows.insert(date, values);
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(
            "no date has prices for every requested ticker".into(),
        ));
    }
    let n = selected.len();
    let dates: Vec<NaiveDate> = rows.keys().copied().collect();
    let prices = DMatrix::from_row_iterator(rows.len(), n, rows.into_values().flatten());
    PricePanel::new(
        dates,
        selected.into_iter().map(|(_, t)| t).collect(),
        prices,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: DMatrix<f64>,
    kind: ReturnKind,
}

impl ReturnPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        returns: DMatrix<f64>,
        kind: ReturnKind,
    ) -> Result<Self> {
        if returns.nrows() != dates.len() || returns.ncols() != tickers.len() {
            return Err(Error::Data(format!(
                "return matrix is {}x{} but there are {} dates and {} tickers",
                returns.nrows(),
                returns.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        check_increasing(&dates)?;
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Data("returns must be finite".into()));
        }
        Ok(Self {
            dates,
            tickers,
            returns,
            kind,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn kind(&self) -> ReturnKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.returns.row(t).iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.returns.column(j).iter().copied().collect()
    }

    /// Rows `[start, end)` of the return matrix.
    pub fn window(&self, start: usize, end: usize) -> DMatrix<f64> {
        self.returns.rows(start, end - start).into_owned()
    }

    /// Rows `[start, end)` as a new panel.
    pub fn sub_panel(&self, start: usize, end: usize) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            tickers: self.tickers.clone(),
            returns: self.window(start, end),
            kind: self.kind,
        }
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header).map_err(csv_error)?;
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.returns.row(t).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush().map_err(|e| io_error(Path::new("<csv>"), e))
    }
}

/// Daily returns; each row is dated by the later price of its pair.
pub fn compute_returns(panel: &PricePanel, kind: ReturnKind) -> Result<ReturnPanel> {
    let t = panel.len();
    if t < 2 {
        return Err(Error::InsufficientData { needed: 2, got: t });
    }
    let p = panel.prices();
    let returns = DMatrix::from_fn(t - 1, panel.n_assets(), |i, j| {
        let ratio = p[(i + 1, j)] / p[(i, j)];
        match kind {
            ReturnKind::Log => ratio.ln(),
            ReturnKind::Arithmetic => ratio - 1.0,
        }
    });
    ReturnPanel::new(
        panel.dates()[1..].to_vec(),
        panel.tickers().to_vec(),
        returns,
        kind,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tenor {
    ThreeMonth,
    OneYear,
}

impl Tenor {
    pub fn label(self) -> &'static str {
        match self {
            Tenor::ThreeMonth => "3m",
            Tenor::OneYear => "1y",
        }
    }
}

impl std::str::FromStr for Tenor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "3m" | "3-month" | "3month" => Ok(Tenor::ThreeMonth),
            "1y" | "1-year" | "1year" | "12m" => Ok(Tenor::OneYear),
            other => Err(Error::Parameter(format!("unknown tenor {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskFreeSeries {
    pub dates: Vec<NaiveDate>,
    /// Simple per-day rate.
    pub daily_rate: Vec<f64>,
    pub source_tenor: Tenor,
}

impl RiskFreeSeries {
    pub fn rate_on(&self, date: NaiveDate) -> Option<f64> {
        self.dates
            .binary_search(&date)
            .ok()
            .map(|i| self.daily_rate[i])
    }

    /// Constant rate over the given dates.
    pub fn constant(dates: &[NaiveDate], daily_rate: f64, tenor: Tenor) -> Self {
        Self {
            dates: dates.to_vec(),
            daily_rate: vec![daily_rate; dates.len()],
            source_tenor: tenor,
        }
    }

    /// Mean daily rate over the given dates; `None` if any date is missing.
    pub fn mean_over(&self, dates: &[NaiveDate]) -> Option<f64> {
        if dates.is_empty() {
            return None;
        }
        let mut sum = 0.0;
        for d in dates {
            sum += self.rate_on(*d)?;
        }
        Some(sum / dates.len() as f64)
    }
}

/// Annual yields as decimal fractions, sorted by date.
pub fn load_yields(path: impl AsRef<Path>) -> Result<Vec<(NaiveDate, f64)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    read_yields(file)
}

pub fn read_yields<R: Read>(reader: R) -> Result<Vec<(NaiveDate, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `date,annual_yield`".into(),
        });
    }
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = parse_date(&record[0], line)?;
        let cell = record.get(1).unwrap_or("");
        if is_missing(cell) {
            continue;
        }
        let y: f64 = cell.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid yield {cell:?}"),
        })?;
        if !y.is_finite() {
            return Err(Error::Parse {
                line,
                message: "yield must be finite".into(),
            });
        }
        if out.insert(date, y).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate date {date}"),
            });
        }
    }
    Ok(out.into_iter().collect())
}

/// Writes `date,annual_yield` rows.
pub fn write_yields<W: Write>(yields: &[(NaiveDate, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "annual_yield"])
        .map_err(csv_error)?;
    for (d, y) in yields {
        w.write_record([d.to_string(), y.to_string()])
            .map_err(csv_error)?;
    }
    w.flush()
        .map_err(|e| Error::Data(format!("writing yields: {e}")))
}

/// Carries the most recent annual yield forward onto each target date and
/// converts it to a daily rate by dividing by 252.
pub fn align_risk_free(
    yields: &[(NaiveDate, f64)],
    dates: &[NaiveDate],
    tenor: Tenor,
) -> Result<RiskFreeSeries> {
    check_increasing(dates)?;
    let mut sorted = yields.to_vec();
    sorted.sort_by_key(|(d, _)| *d);
    let mut daily_rate = Vec::with_capacity(dates.len());
    let mut k = 0;
    let mut current: Option<f64> = None;
    for &d in dates {
        while k < sorted.len() && sorted[k].0 <= d {
            current = Some(sorted[k].1);
            k += 1;
        }
        match current {
            Some(y) => daily_rate.push(y / TRADING_DAYS),
            None => return Err(Error::Coverage(d)),
        }
    }
    Ok(RiskFreeSeries {
        dates: dates.to_vec(),
        daily_rate,
        source_tenor: tenor,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WealthSeries {
    pub dates: Vec<NaiveDate>,
    pub wealth: Vec<f64>,
    pub initial_wealth: f64,
}

impl WealthSeries {
    /// Compounds `initial_wealth` through the per-period returns.
    pub fn compound(dates: Vec<NaiveDate>, returns: &[f64], initial_wealth: f64) -> Self {
        let mut level = initial_wealth;
        let wealth = returns
            .iter()
            .map(|r| {
                level *= 1.0 + r;
                level
            })
            .collect();
        Self {
            dates,
            wealth,
            initial_wealth,
        }
    }

    pub fn terminal(&self) -> f64 {
        self.wealth.last().copied().unwrap_or(self.initial_wealth)
    }

    /// Per-period simple returns implied by the track.
    pub fn returns(&self) -> Vec<f64> {
        let mut prev = self.initial_wealth;
        self.wealth
            .iter()
            .map(|&w| {
                let r = w / prev - 1.0;
                prev = w;
                r
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "wealth"]).map_err(csv_error)?;
        for (d, v) in self.dates.iter().zip(&self.wealth) {
            w.write_record([d.to_string(), v.to_string()])
                .map_err(csv_error)?;
        }
        w.flush().map_err(|e| io_error(Path::new("<csv>"), e))
    }

    pub fn read_csv<R: Read>(reader: R, initial_wealth: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dates = Vec::new();
        let mut wealth = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            dates.push(parse_date(&record[0], line)?);
            let v: f64 = record
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Parse {
                    line,
                    message: "invalid wealth value".into(),
                })?;
            wealth.push(v);
        }
        check_increasing(&dates)?;
        Ok(Self {
            dates,
            wealth,
            initial_wealth,
        })
    }
}

/// Return of a fully invested portfolio, `Σ wᵢ rᵢ`, evaluated as
/// `r₀ + Σ wᵢ (rᵢ - r₀)`. The two agree whenever the weights sum to one; the
/// anchored form reproduces a single asset's return exactly when every asset
/// has that return.
pub fn portfolio_return(weights: &[f64], returns: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), returns.len());
    let anchor = returns[0];
    anchor
        + weights
            .iter()
            .zip(returns)
            .map(|(w, r)| w * (r - anchor))
            .sum::<f64>()
}

/// Equally weighted portfolio rebalanced daily to `1/N`.
pub fn build_eqw_track(panel: &ReturnPanel, initial_wealth: f64) -> Result<WealthSeries> {
    if panel.kind() != ReturnKind::Arithmetic {
        return Err(Error::KindMismatch {
            expected: ReturnKind::Arithmetic.name(),
            got: panel.kind().name(),
        });
    }
    if !(initial_wealth > 0.0) {
        return Err(Error::Parameter("initial wealth must be positive".into()));
    }
    let n = panel.n_assets();
    let weights = vec![1.0 / n as f64; n];
    let returns: Vec<f64> = (0..panel.len())
        .map(|t| portfolio_return(&weights, &panel.row(t)))
        .collect();
    Ok(WealthSeries::compound(
        panel.dates().to_vec(),
        &returns,
        initial_wealth,
    ))
}
