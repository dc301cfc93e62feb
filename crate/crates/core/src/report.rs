//! Static SVG figures: precision-recall curves, faceted boxplots, the CA
//! biplot and the coefficient plot.
//!
//! Output is hand-written SVG 1.1. Coordinates are printed with two decimals
//! and nothing depends on hash ordering, so identical inputs give identical
//! bytes.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::ca::CAResult;
use crate::indicators::BoxStats;
use crate::metrics::PRCurve;
use crate::panel::FEResult;
use crate::theme::{CountryCode, Theme};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("invalid figure spec: {0}")]
    InvalidSpec(String),
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
    #[error("biplot needs at least 2 dimensions, CA has {dims}; a 1-D display is not supported")]
    TooFewDimensions { dims: usize },
}

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    PrCurve,
    Boxplots,
    Biplot,
    CoefPlot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
    pub left: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub width: f64,
    pub height: f64,
    pub margins: Margins,
    /// Fixed data range for the horizontal axis; `None` picks one from the data.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl FigureSpec {
    pub fn new(kind: FigureKind) -> FigureSpec {
        let (width, height, left) = match kind {
            FigureKind::PrCurve => (640.0, 480.0, 60.0),
            FigureKind::Boxplots => (1000.0, 520.0, 60.0),
            FigureKind::Biplot => (720.0, 640.0, 70.0),
            FigureKind::CoefPlot => (760.0, 0.0, 230.0),
        };
        FigureSpec {
            kind,
            width,
            height,
            margins: Margins {
                top: 40.0,
                right: 30.0,
                bottom: 55.0,
                left,
            },
            x_range: None,
            y_range: None,
        }
    }

    fn validate(&self, kind: FigureKind) -> Result<()> {
        if self.kind != kind {
            return Err(ReportError::InvalidSpec(format!("spec is for {:?}, not {kind:?}", self.kind)));
        }
        let m = &self.margins;
        if !(self.width > 0.0 && self.width.is_finite()) || !(self.height >= 0.0 && self.height.is_finite()) {
            return Err(ReportError::InvalidSpec("dimensions must be positive".into()));
        }
        if [m.top, m.right, m.bottom, m.left].iter().any(|v| !(*v >= 0.0)) || m.left + m.right >= self.width {
            return Err(ReportError::InvalidSpec("margins leave no plotting area".into()));
        }
        for (name, r) in [("x", self.x_range), ("y", self.y_range)] {
            if let Some((lo, hi)) = r {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(ReportError::InvalidSpec(format!("{name} range needs low < high")));
                }
            }
        }
        Ok(())
    }
}

/// Affine map from a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub d0: f64,
    pub d1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl Axis {
    pub fn new(data: (f64, f64), pixels: (f64, f64)) -> Axis {
        Axis {
            d0: data.0,
            d1: data.1,
            p0: pixels.0,
            p1: pixels.1,
        }
    }

    pub fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) * (self.p1 - self.p0) / (self.d1 - self.d0)
    }

    pub fn invert(&self, px: f64) -> f64 {
        self.d0 + (px - self.p0) * (self.d1 - self.d0) / (self.p1 - self.p0)
    }

    /// Data width of one pixel.
    pub fn resolution(&self) -> f64 {
        ((self.d1 - self.d0) / (self.p1 - self.p0)).abs()
    }

    /// Up to ~6 round tick values inside the data range.
    pub fn ticks(&self) -> Vec<f64> {
        let (lo, hi) = (self.d0.min(self.d1), self.d0.max(self.d1));
        let raw = (hi - lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (lo / step - 1e-9).ceil() as i64;
        let last = (hi / step + 1e-9).floor() as i64;
        // k·step can land one ulp off a round value (3·0.2); snap it back.
        let snap = 10f64.powi(12 - mag.log10() as i32);
        (first..=last)
            .map(|k| (k as f64 * step * snap).round() / snap)
            .collect()
    }
}

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
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

/// Three significant digits, switching to exponent form for very large or
/// very small magnitudes.
pub fn format_sig3(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{}", if v == 0.0 { 0.0 } else { v });
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-3..5).contains(&mag) {
        return format!("{v:.2e}");
    }
    let decimals = (2 - mag).max(0) as usize;
    let rounded = format!("{v:.decimals$}");
    // Rounding can carry into a new digit (9.995 -> 10.00); redo at that magnitude.
    let carried = rounded.trim_start_matches('-').split('.').next().map_or(0, str::len);
    if mag >= 0 && carried as i32 > mag + 1 {
        let decimals = (1 - mag).max(0) as usize;
        return format!("{v:.decimals$}");
    }
    rounded
}

const THEME_COLORS: [&str; 4] = ["#1b6ca8", "#d1495b", "#edae49", "#00798c"];
const ROW_COLOR: &str = "#1f4e9c";
const COL_COLOR: &str = "#c0392b";
const NEUTRAL: &str = "#555555";

fn theme_color(t: Theme) -> &'static str {
    THEME_COLORS[t.index()]
}

struct Svg {
    buf: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Svg {
        let mut buf = String::new();
        buf.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        writeln!(
            buf,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">"
        )
        .unwrap();
        writeln!(buf, "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>").unwrap();
        Svg { buf }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64, extra: &str) {
        writeln!(
            self.buf,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width}\"{extra}/>"
        )
        .unwrap();
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        writeln!(
            self.buf,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\" stroke=\"{stroke}\"/>"
        )
        .unwrap();
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, class: &str) {
        writeln!(
            self.buf,
            "<circle class=\"{class}\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r}\" fill=\"{fill}\"/>"
        )
        .unwrap();
    }

    fn ring(&mut self, cx: f64, cy: f64, r: f64, class: &str) {
        writeln!(
            self.buf,
            "<circle class=\"{class}\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r}\" fill=\"none\" stroke=\"black\"/>"
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, content: &str, extra: &str) {
        writeln!(
            self.buf,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\"{extra}>{}</text>",
            xml_escape(content)
        )
        .unwrap();
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, class: &str) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            self.buf,
            "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\"/>",
            coords.join(" ")
        )
        .unwrap();
    }

    fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

fn x_axis(svg: &mut Svg, ax: &Axis, y: f64, label: &str) {
    svg.line(ax.p0, y, ax.p1, y, "black", 1.0, "");
    for t in ax.ticks() {
        let x = ax.map(t);
        svg.line(x, y, x, y + 5.0, "black", 1.0, "");
        svg.text(x, y + 18.0, "middle", &format!("{t}"), "");
    }
    svg.text((ax.p0 + ax.p1) / 2.0, y + 38.0, "middle", label, " class=\"axis-label\"");
}

fn y_axis(svg: &mut Svg, ax: &Axis, x: f64, label: &str) {
    svg.line(x, ax.p0, x, ax.p1, "black", 1.0, "");
    for t in ax.ticks() {
        let y = ax.map(t);
        svg.line(x - 5.0, y, x, y, "black", 1.0, "");
        svg.text(x - 8.0, y + 4.0, "end", &format!("{t}"), "");
    }
    let cy = (ax.p0 + ax.p1) / 2.0;
    svg.text(
        x - 45.0,
        cy,
        "middle",
        label,
        &format!(" class=\"axis-label\" transform=\"rotate(-90 {:.2} {cy:.2})\"", x - 45.0),
    );
}

fn padded(lo: f64, hi: f64, frac: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * frac;
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// One polyline per theme on the unit square, with an AP legend entry.
pub fn render_pr_curves(curves: &[(Theme, PRCurve)], spec: &FigureSpec) -> Result<String> {
    spec.validate(FigureKind::PrCurve)?;
    if curves.is_empty() {
        return Err(ReportError::Empty("no precision-recall curves"));
    }
    let m = spec.margins;
    let xa = Axis::new(spec.x_range.unwrap_or((0.0, 1.0)), (m.left, spec.width - m.right));
    let ya = Axis::new(spec.y_range.unwrap_or((0.0, 1.0)), (spec.height - m.bottom, m.top));
    let mut svg = Svg::new(spec.width, spec.height);
    svg.text(spec.width / 2.0, 22.0, "middle", "Precision-recall by theme", " font-size=\"14\"");
    x_axis(&mut svg, &xa, ya.p0, "Recall");
    y_axis(&mut svg, &ya, xa.p0, "Precision");
    for (i, (theme, curve)) in curves.iter().enumerate() {
        let mut pts = Vec::with_capacity(curve.points.len() + 1);
        if let Some(first) = curve.points.first() {
            pts.push((xa.map(0.0), ya.map(first.precision)));
        }
        pts.extend(curve.points.iter().map(|p| (xa.map(p.recall), ya.map(p.precision))));
        svg.polyline(&pts, theme_color(*theme), &format!("pr {}", theme.slug()));
        let ly = m.top + 16.0 + 18.0 * i as f64;
        let lx = xa.p0 + 14.0;
        svg.line(lx, ly - 4.0, lx + 20.0, ly - 4.0, theme_color(*theme), 2.0, "");
        svg.text(
            lx + 26.0,
            ly,
            "start",
            &format!("{} (AP={:.2})", theme.label(), curve.ap),
            " class=\"legend\"",
        );
    }
    Ok(svg.finish())
}

/// `theme,threshold,precision,recall` for every operating point.
pub fn write_pr_curves_csv<W: Write>(curves: &[(Theme, PRCurve)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theme", "threshold", "precision", "recall", "ap"])?;
    for (theme, c) in curves {
        for p in &c.points {
            w.write_record([
                theme.label().to_string(),
                p.threshold.to_string(),
                p.precision.to_string(),
                p.recall.to_string(),
                c.ap.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One boxplot facet: countries in rank order with their z-score summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFacet {
    pub theme: Theme,
    pub boxes: Vec<(CountryCode, BoxStats)>,
}

/// Facets side by side, countries down the y-axis in rank order, one shared
/// z-score axis.
pub fn render_boxplots(facets: &[BoxFacet], spec: &FigureSpec) -> Result<String> {
    spec.validate(FigureKind::Boxplots)?;
    if facets.is_empty() {
        return Err(ReportError::Empty("no boxplot facets"));
    }
    let range = spec.x_range.unwrap_or_else(|| {
        let vals = facets.iter().flat_map(|f| &f.boxes).flat_map(|(_, b)| {
            [b.lower_whisker, b.upper_whisker]
                .into_iter()
                .chain(b.outliers.iter().copied())
        });
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo.is_finite() {
            padded(lo, hi, 0.05)
        } else {
            (-1.0, 1.0)
        }
    });
    let m = spec.margins;
    let gap = 50.0;
    let n = facets.len() as f64;
    let facet_w = (spec.width - m.left - m.right - gap * (n - 1.0)) / n;
    if facet_w <= 10.0 {
        return Err(ReportError::InvalidSpec("figure too narrow for the facets".into()));
    }
    let mut svg = Svg::new(spec.width, spec.height);
    svg.text(spec.width / 2.0, 22.0, "middle", "Standardized theme counts, top countries", " font-size=\"14\"");
    let plot_top = m.top + 10.0;
    let plot_bottom = spec.height - m.bottom;
    for (fi, facet) in facets.iter().enumerate() {
        let x0 = m.left + fi as f64 * (facet_w + gap);
        let xa = Axis::new(range, (x0, x0 + facet_w));
        let color = theme_color(facet.theme);
        svg.text(x0 + facet_w / 2.0, plot_top - 4.0, "middle", facet.theme.label(), " class=\"facet\"");
        x_axis(&mut svg, &xa, plot_bottom, "z-score");
        if facet.boxes.is_empty() {
            svg.text(x0 + facet_w / 2.0, (plot_top + plot_bottom) / 2.0, "middle", "no data", " class=\"placeholder\"");
            continue;
        }
        let band = (plot_bottom - plot_top) / facet.boxes.len() as f64;
        let half = (band * 0.3).min(12.0);
        for (ri, (country, b)) in facet.boxes.iter().enumerate() {
            let cy = plot_top + band * (ri as f64 + 0.5);
            svg.text(x0 - 6.0, cy + 4.0, "end", country.as_str(), " class=\"country\"");
            let (lw, q1, med, q3, uw) = (
                xa.map(b.lower_whisker),
                xa.map(b.q1),
                xa.map(b.median),
                xa.map(b.q3),
                xa.map(b.upper_whisker),
            );
            svg.line(lw, cy, q1, cy, NEUTRAL, 1.0, "");
            svg.line(q3, cy, uw, cy, NEUTRAL, 1.0, "");
            svg.line(lw, cy - half / 2.0, lw, cy + half / 2.0, NEUTRAL, 1.0, "");
            svg.line(uw, cy - half / 2.0, uw, cy + half / 2.0, NEUTRAL, 1.0, "");
            svg.rect(q1, cy - half, (q3 - q1).max(0.0), 2.0 * half, color, "black");
            svg.line(med, cy - half, med, cy + half, "black", 2.0, " class=\"median\"");
            for o in &b.outliers {
                svg.ring(xa.map(*o), cy, 2.5, "outlier");
            }
        }
    }
    Ok(svg.finish())
}

fn biplot_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((0.0_f64, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    padded(lo, hi, 0.1)
}

/// Axis title for a CA dimension, share to one decimal.
pub fn dimension_label(dim: usize, share: f64) -> String {
    format!("Dim {dim} ({:.1}%)", share * 100.0)
}

/// Symmetric map of the first two dimensions: countries and themes in
/// principal coordinates.
pub fn render_biplot(ca: &CAResult, spec: &FigureSpec) -> Result<String> {
    spec.validate(FigureKind::Biplot)?;
    if ca.dims() < 2 {
        return Err(ReportError::TooFewDimensions { dims: ca.dims() });
    }
    let rows = ca.row_coords.rows();
    let cols = ca.col_coords.rows();
    let pts = || {
        (0..rows)
            .map(|i| (ca.row_coords[(i, 0)], ca.row_coords[(i, 1)]))
            .chain((0..cols).map(|j| (ca.col_coords[(j, 0)], ca.col_coords[(j, 1)])))
    };
    let m = spec.margins;
    let xa = Axis::new(
        spec.x_range.unwrap_or_else(|| biplot_range(pts().map(|p| p.0))),
        (m.left, spec.width - m.right),
    );
    let ya = Axis::new(
        spec.y_range.unwrap_or_else(|| biplot_range(pts().map(|p| p.1))),
        (spec.height - m.bottom, m.top),
    );
    let mut svg = Svg::new(spec.width, spec.height);
    svg.text(spec.width / 2.0, 22.0, "middle", "Correspondence analysis: countries and themes", " font-size=\"14\"");
    x_axis(&mut svg, &xa, ya.p0, &dimension_label(1, ca.shares[0]));
    y_axis(&mut svg, &ya, xa.p0, &dimension_label(2, ca.shares[1]));
    let dash = " stroke-dasharray=\"4 3\"";
    svg.line(xa.map(0.0), ya.p0, xa.map(0.0), ya.p1, "#bbbbbb", 1.0, dash);
    svg.line(xa.p0, ya.map(0.0), xa.p1, ya.map(0.0), "#bbbbbb", 1.0, dash);
    for i in 0..rows {
        let (x, y) = (xa.map(ca.row_coords[(i, 0)]), ya.map(ca.row_coords[(i, 1)]));
        svg.circle(x, y, 3.5, ROW_COLOR, "row");
        svg.text(x + 5.0, y - 5.0, "start", &ca.row_labels[i], &format!(" fill=\"{ROW_COLOR}\""));
    }
    for j in 0..cols {
        let (x, y) = (xa.map(ca.col_coords[(j, 0)]), ya.map(ca.col_coords[(j, 1)]));
        svg.rect(x - 4.5, y - 4.5, 9.0, 9.0, COL_COLOR, COL_COLOR);
        svg.text(
            x + 7.0,
            y - 7.0,
            "start",
            &ca.col_labels[j],
            &format!(" fill=\"{COL_COLOR}\" font-weight=\"bold\""),
        );
    }
    Ok(svg.finish())
}

const COEF_ROW: f64 = 22.0;
const COEF_HEADER: f64 = 24.0;

/// Horizontal axis the coefficient plot uses for these results.
pub fn coef_plot_axis(results: &[FEResult], spec: &FigureSpec) -> Axis {
    let range = spec.x_range.unwrap_or_else(|| {
        let (lo, hi) = results
            .iter()
            .flat_map(|r| &r.coefficients)
            .fold((0.0_f64, 0.0_f64), |(lo, hi), c| (lo.min(c.ci_low), hi.max(c.ci_high)));
        padded(lo, hi, 0.05)
    });
    Axis::new(range, (spec.margins.left, spec.width - spec.margins.right))
}

/// One row per (outcome, regressor): a dot at β and a segment over the
/// confidence interval, grouped by outcome, with a zero reference line. A
/// zero height in the spec sizes the figure to its rows.
pub fn render_coef_plot(results: &[FEResult], spec: &FigureSpec) -> Result<String> {
    spec.validate(FigureKind::CoefPlot)?;
    let n_rows: usize = results.iter().map(|r| r.coefficients.len()).sum();
    if n_rows == 0 {
        return Err(ReportError::Empty("no fitted coefficients"));
    }
    let m = spec.margins;
    let body = results.len() as f64 * COEF_HEADER + n_rows as f64 * COEF_ROW;
    let height = if spec.height > 0.0 {
        spec.height
    } else {
        m.top + body + m.bottom
    };
    let xa = coef_plot_axis(results, spec);
    let mut svg = Svg::new(spec.width, height);
    let title = format!(
        "Fixed-effects estimates with {:.0}% confidence intervals",
        results[0].confidence * 100.0
    );
    svg.text(spec.width / 2.0, 22.0, "middle", &title, " font-size=\"14\"");
    let bottom = height - m.bottom;
    let zx = xa.map(0.0);
    svg.line(zx, m.top, zx, bottom, "#888888", 1.0, " class=\"zero\" stroke-dasharray=\"4 3\"");
    x_axis(&mut svg, &xa, bottom, "Coefficient");
    let mut y = m.top;
    for r in results {
        y += COEF_HEADER;
        svg.text(8.0, y - 6.0, "start", &r.outcome, " font-weight=\"bold\" class=\"outcome\"");
        for c in &r.coefficients {
            let cy = y + COEF_ROW / 2.0;
            svg.text(m.left - 10.0, cy + 4.0, "end", &c.regressor, "");
            let color = if c.significant { ROW_COLOR } else { NEUTRAL };
            svg.line(xa.map(c.ci_low), cy, xa.map(c.ci_high), cy, color, 2.0, " class=\"ci\"");
            svg.circle(xa.map(c.beta), cy, 4.0, color, "beta");
            let label = format!(
                "{} [{}, {}]",
                format_sig3(c.beta),
                format_sig3(c.ci_low),
                format_sig3(c.ci_high)
            );
            svg.text(spec.width - m.right, cy - 5.0, "end", &label, " font-size=\"10\" fill=\"#333333\"");
            y += COEF_ROW;
        }
    }
    Ok(svg.finish())
}
