//! Minimal static SVG charts: line/scatter charts and boxplots.

use std::fmt::Write;

use chrono::{Datelike, NaiveDate};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#7f7f7f", "#bcbd22",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
    /// Square markers for highlighted points.
    Squares,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    /// Fixed colour; `None` takes the next palette entry.
    pub color: Option<&'static str>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self {
            name: name.into(),
            points,
            style,
            color: None,
        }
    }

    pub fn color(mut self, color: &'static str) -> Self {
        self.color = Some(color);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Interpret x as days since the common era and label ticks as dates.
    pub date_axis: bool,
}

pub fn date_x(d: NaiveDate) -> f64 {
    d.num_days_from_ce() as f64
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = (hi.abs() * 0.1).max(1e-6);
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64) {
    let step = nice_step(hi - lo, target);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * step {
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    (out, step)
}

fn tick_label(v: f64, step: f64) -> String {
    let a = v.abs().max(step);
    if !(1e-4..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        format!("{v:.decimals$}")
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, x_ticks: &[(f64, String)]) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r##"<rect x="{x0}" y="{y1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
        x1 - x0,
        y0 - y1
    );
    for (v, label) in x_ticks {
        let px = frame.px(*v);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.1}" stroke="#333"/><text x="{px:.2}" y="{:.1}" text-anchor="middle">{}</text>"##,
            y0 + 5.0,
            y0 + 18.0,
            escape(label)
        );
    }
    let (yt, ystep) = ticks(frame.y.0, frame.y.1, 6);
    for v in yt {
        let py = frame.py(v);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(v, ystep)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, &str, Style)]) {
    let x = WIDTH - RIGHT + 14.0;
    let mut shown: Vec<&(String, &str, Style)> = Vec::new();
    for e in entries {
        if !shown.contains(&e) {
            shown.push(e);
        }
    }
    for (i, (name, color, style)) in shown.into_iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        match style {
            Style::Squares => {
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.1}" y="{:.1}" width="9" height="9" fill="{color}"/>"#,
                    x + 5.5,
                    y - 4.5
                );
            }
            Style::Markers => {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.1}" cy="{y:.1}" r="4" fill="{color}"/>"#,
                    x + 10.0
                );
            }
            _ => {
                let dash = if *style == Style::Dashed {
                    r#" stroke-dasharray="5 3""#
                } else {
                    ""
                };
                let _ = writeln!(
                    out,
                    r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
                    x + 20.0
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape(name)
        );
    }
}

impl Chart {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            date_axis: false,
        }
    }

    pub fn dates(mut self) -> Self {
        self.date_axis = true;
        self
    }

    pub fn push(&mut self, series: Series) {
        self.series.push(series);
    }

    pub fn render(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let frame = Frame {
            x: padded_range(all().map(|p| p.0)),
            y: padded_range(all().map(|p| p.1)),
        };
        let mut out = String::new();
        header(&mut out, &self.title);
        let x_ticks: Vec<(f64, String)> = if self.date_axis {
            let (t, _) = ticks(frame.x.0, frame.x.1, 6);
            t.into_iter()
                .map(|v| {
                    let label = NaiveDate::from_num_days_from_ce_opt(v.round() as i32)
                        .map(|d| d.to_string())
                        .unwrap_or_default();
                    (v, label)
                })
                .collect()
        } else {
            let (t, step) = ticks(frame.x.0, frame.x.1, 7);
            t.into_iter().map(|v| (v, tick_label(v, step))).collect()
        };
        axes(&mut out, &frame, &self.x_label, &self.y_label, &x_ticks);

        let mut entries = Vec::new();
        let mut next = 0;
        for s in &self.series {
            let color = s.color.unwrap_or_else(|| {
                let c = PALETTE[next % PALETTE.len()];
                next += 1;
                c
            });
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| (frame.px(x), frame.py(y)))
                .collect();
            match s.style {
                Style::Markers => {
                    for (x, y) in &pts {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#
                        );
                    }
                }
                Style::Squares => {
                    for (x, y) in &pts {
                        let _ = writeln!(
                            out,
                            r#"<rect x="{:.2}" y="{:.2}" width="9" height="9" fill="{color}"/>"#,
                            x - 4.5,
                            y - 4.5
                        );
                    }
                }
                Style::Line | Style::Dashed => {
                    let mut d = String::new();
                    for (x, y) in &pts {
                        let _ = write!(d, "{x:.2},{y:.2} ");
                    }
                    let dash = if s.style == Style::Dashed {
                        r#" stroke-dasharray="5 3""#
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        out,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
                        d.trim_end()
                    );
                }
            }
            entries.push((s.name.clone(), color, s.style));
        }
        legend(&mut out, &entries);
        out.push_str("</svg>\n");
        out
    }
}

/// Type-7 sample quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One box per group; whiskers reach the most extreme values within 1.5 IQR
/// and points beyond are drawn individually.
pub fn boxplot(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> String {
    let frame = Frame {
        x: (0.0, groups.len().max(1) as f64),
        y: padded_range(groups.iter().flat_map(|(_, v)| v.iter().copied())),
    };
    let mut out = String::new();
    header(&mut out, title);
    let x_ticks: Vec<(f64, String)> = groups
        .iter()
        .enumerate()
        .map(|(i, (name, _))| (i as f64 + 0.5, name.clone()))
        .collect();
    axes(&mut out, &frame, "", y_label, &x_ticks);
    let half = 0.3 * (WIDTH - LEFT - RIGHT) / groups.len().max(1) as f64;
    for (i, (_, values)) in groups.iter().enumerate() {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        let color = PALETTE[i % PALETTE.len()];
        let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let lo_w = v
            .iter()
            .copied()
            .find(|&x| x >= q1 - 1.5 * iqr)
            .unwrap_or(q1);
        let hi_w = v
            .iter()
            .rev()
            .copied()
            .find(|&x| x <= q3 + 1.5 * iqr)
            .unwrap_or(q3);
        let cx = frame.px(i as f64 + 0.5);
        let _ = writeln!(
            out,
            r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#333"/>"##,
            frame.py(lo_w),
            frame.py(hi_w)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.5" stroke="#333"/>"##,
            cx - half,
            frame.py(q3),
            2.0 * half,
            (frame.py(q1) - frame.py(q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000" stroke-width="2"/>"##,
            cx - half,
            frame.py(med),
            cx + half,
            frame.py(med)
        );
        for &x in v.iter().filter(|&&x| x < lo_w || x > hi_w) {
            let _ = writeln!(
                out,
                r##"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="#333"/>"##,
                frame.py(x)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
