//! Text tables, summary CSV, pairwise comparisons and the depth chart.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::stats::{compare, Direction, Scalar, Summary};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("chart needs at least 2 depths per config; {config_id} has {found}")]
    TooFewDepths { config_id: String, found: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

/// One labelled column of a table or row of the summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Labelled<T> {
    pub label: String,
    pub summary: Summary<T>,
}

impl<T> Labelled<T> {
    pub fn new(label: impl Into<String>, summary: Summary<T>) -> Self {
        Self {
            label: label.into(),
            summary,
        }
    }
}

const ROW_LABELS: [&str; 5] = ["Mean", "95 %", "Q1", "Median", "Q3"];

/// Aligned table with one column per entry, in input order. Values are µs
/// with four decimals.
pub fn render_table<T: Scalar>(columns: &[Labelled<T>]) -> Result<String, ReportError> {
    if columns.is_empty() {
        return Err(ReportError::Empty);
    }
    let cells: Vec<[String; 5]> = columns
        .iter()
        .map(|c| {
            let s = &c.summary;
            [
                format!("{:.4}", s.mean),
                format!("±{:.4}", s.ci95_half),
                format!("{:.4}", s.q1),
                format!("{:.4}", s.median),
                format!("{:.4}", s.q3),
            ]
        })
        .collect();
    let label_width = ROW_LABELS
        .iter()
        .map(|l| l.chars().count())
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = columns
        .iter()
        .zip(&cells)
        .map(|(c, vals)| {
            vals.iter()
                .map(|v| v.chars().count())
                .chain(std::iter::once(c.label.chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", c.label);
    }
    out.push('\n');
    for (row, name) in ROW_LABELS.iter().enumerate() {
        let _ = write!(out, "{name:label_width$}");
        for (vals, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", vals[row]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub const SUMMARY_CSV_HEADER: [&str; 8] = [
    "config_id",
    "n",
    "mean_us",
    "ci95_us",
    "q1_us",
    "median_us",
    "q3_us",
    "stddev_us",
];

pub fn summary_csv<T: Scalar>(rows: &[Labelled<T>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_CSV_HEADER).expect("in-memory write");
    for r in rows {
        let s = &r.summary;
        w.write_record([
            r.label.clone(),
            s.n.to_string(),
            s.mean.to_string(),
            s.ci95_half.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.stddev.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn write_summary_csv<T: Scalar>(path: &Path, rows: &[Labelled<T>]) -> Result<(), ReportError> {
    std::fs::write(path, summary_csv(rows)).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One line per unordered pair, in input order.
pub fn render_comparisons<T: Scalar>(columns: &[Labelled<T>]) -> String {
    let mut out = String::new();
    for (i, a) in columns.iter().enumerate() {
        for b in &columns[i + 1..] {
            let c = compare(&a.label, &a.summary, &b.label, &b.summary);
            let verdict = match c.direction {
                Direction::AFaster => format!("{} faster", c.config_a),
                Direction::BFaster => format!("{} faster", c.config_b),
                Direction::Indistinguishable => "not significant".to_owned(),
            };
            let _ = writeln!(
                out,
                "{} vs {}: {verdict} (ratio {:.4})",
                c.config_a, c.config_b, c.ratio
            );
        }
    }
    out
}

/// Mean and spread of one configuration at one depth, in µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthPoint<T> {
    pub depth: u32,
    pub mean: T,
    pub stddev: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthSeries<T> {
    pub config_id: String,
    /// Ascending by depth.
    pub points: Vec<DepthPoint<T>>,
}

impl<T: Scalar> DepthSeries<T> {
    pub fn new(config_id: impl Into<String>, mut points: Vec<DepthPoint<T>>) -> Self {
        points.sort_by_key(|p| p.depth);
        Self {
            config_id: config_id.into(),
            points,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Pixel mapping of the chart's plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartLayout {
    pub width: f64,
    pub height: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub depth_min: f64,
    pub depth_max: f64,
    pub value_min: f64,
    pub value_max: f64,
}

impl ChartLayout {
    pub const WIDTH: f64 = 800.0;
    pub const HEIGHT: f64 = 500.0;

    pub fn fit<T: Scalar>(series: &[DepthSeries<T>]) -> Self {
        let points = series.iter().flat_map(|s| s.points.iter());
        let depths: Vec<f64> = points.clone().map(|p| f64::from(p.depth)).collect();
        let lows = points
            .clone()
            .map(|p| (p.mean - p.stddev).to_f64().unwrap_or(0.0));
        let highs = points.map(|p| (p.mean + p.stddev).to_f64().unwrap_or(0.0));
        let depth_min = depths.iter().copied().fold(f64::INFINITY, f64::min);
        let depth_max = depths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let value_min = lows.fold(0.0, f64::min);
        let mut value_max = highs.fold(0.0, f64::max);
        if value_max <= value_min {
            value_max = value_min + 1.0;
        }
        Self {
            width: Self::WIDTH,
            height: Self::HEIGHT,
            left: 80.0,
            right: 600.0,
            top: 40.0,
            bottom: 440.0,
            depth_min,
            depth_max,
            value_min,
            value_max,
        }
    }

    pub fn x(&self, depth: f64) -> f64 {
        self.left
            + (depth - self.depth_min) / (self.depth_max - self.depth_min)
                * (self.right - self.left)
    }

    pub fn y(&self, value: f64) -> f64 {
        self.bottom
            - (value - self.value_min) / (self.value_max - self.value_min)
                * (self.bottom - self.top)
    }

    pub fn depth_at(&self, x: f64) -> f64 {
        self.depth_min
            + (x - self.left) / (self.right - self.left) * (self.depth_max - self.depth_min)
    }

    pub fn value_at(&self, y: f64) -> f64 {
        self.value_min
            + (self.bottom - y) / (self.bottom - self.top) * (self.value_max - self.value_min)
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Mean overhead against call depth: one polyline per config over a
/// translucent µ±σ band, with axes and a legend.
pub fn render_depth_chart<T: Scalar>(series: &[DepthSeries<T>]) -> Result<String, ReportError> {
    if series.is_empty() {
        return Err(ReportError::Empty);
    }
    for s in series {
        let mut depths: Vec<u32> = s.points.iter().map(|p| p.depth).collect();
        depths.dedup();
        if depths.len() < 2 {
            return Err(ReportError::TooFewDepths {
                config_id: s.config_id.clone(),
                found: depths.len(),
            });
        }
    }
    let layout = ChartLayout::fit(series);
    let f = |v: T| v.to_f64().unwrap_or(0.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = layout.width,
        h = layout.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // axes
    let _ = writeln!(
        svg,
        r#"<g id="axes" stroke="black" stroke-width="1"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{b}" x2="{l}" y2="{t}"/></g>"#,
        l = layout.left,
        r = layout.right,
        t = layout.top,
        b = layout.bottom
    );
    let mut depths: Vec<u32> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.depth))
        .collect();
    depths.sort_unstable();
    depths.dedup();
    let _ = writeln!(svg, r#"<g id="x-ticks" text-anchor="middle">"#);
    for d in &depths {
        let x = layout.x(f64::from(*d));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.3}" y1="{b}" x2="{x:.3}" y2="{y2}" stroke="black"/><text x="{x:.3}" y="{ty}">{d}</text>"#,
            b = layout.bottom,
            y2 = layout.bottom + 5.0,
            ty = layout.bottom + 18.0
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g id="y-ticks" text-anchor="end">"#);
    for i in 0..=5 {
        let v = layout.value_min + (layout.value_max - layout.value_min) * f64::from(i) / 5.0;
        let y = layout.y(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x1}" y1="{y:.3}" x2="{l}" y2="{y:.3}" stroke="black"/><text x="{tx}" y="{ty:.3}">{v:.2}</text>"#,
            x1 = layout.left - 5.0,
            l = layout.left,
            tx = layout.left - 8.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text id="x-label" x="{x}" y="{y}" text-anchor="middle">call depth</text>"#,
        x = (layout.left + layout.right) / 2.0,
        y = layout.bottom + 40.0
    );
    let _ = writeln!(
        svg,
        r#"<text id="y-label" x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">mean overhead (µs)</text>"#,
        y = (layout.top + layout.bottom) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let id = escape(&s.config_id);
        let upper = s.points.iter().map(|p| (p.depth, f(p.mean + p.stddev)));
        let lower = s
            .points
            .iter()
            .rev()
            .map(|p| (p.depth, f(p.mean - p.stddev)));
        let band: Vec<String> = upper
            .chain(lower)
            .map(|(d, v)| format!("{:.3},{:.3}", layout.x(f64::from(d)), layout.y(v)))
            .collect();
        let line: Vec<String> = s
            .points
            .iter()
            .map(|p| {
                format!(
                    "{:.3},{:.3}",
                    layout.x(f64::from(p.depth)),
                    layout.y(f(p.mean))
                )
            })
            .collect();
        let _ = writeln!(svg, r#"<g class="series" data-config="{id}">"#);
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r#"<g id="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = layout.top + 10.0 + 20.0 * i as f64;
        let x = layout.right + 20.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{ry}" width="14" height="10" fill="{color}"/><text x="{tx}" y="{ty}">{}</text>"#,
            escape(&s.config_id),
            ry = y - 9.0,
            tx = x + 20.0,
            ty = y
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}
