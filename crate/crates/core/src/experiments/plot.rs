//! Minimal standalone SVG plots of the CSV outputs. Each plot is a pure
//! function of the CSV text.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("CSV has no data rows")]
    Empty,
    /// `row` counts lines of the file, header = 1.
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("missing column {0}")]
    MissingColumn(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    SpaceTime,
    Response,
    Spectrum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
    /// Space-time plots: add `-k * spacing` to column `z_k`, turning
    /// leader-frame deviations into a readable fan of agents.
    pub offset_spacing: Option<f64>,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self { width: 640.0, height: 480.0, title: None, offset_spacing: None }
    }
}

pub struct Table {
    pub header: Vec<String>,
    /// `None` marks an empty field.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, PlotError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| PlotError::Malformed { row: 1, message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(PlotError::Empty);
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| PlotError::Malformed {
                row: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let row = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != header.len() {
                return Err(PlotError::Malformed {
                    row,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            let vals = rec
                .iter()
                .map(|f| {
                    if f.trim().is_empty() {
                        Ok(None)
                    } else {
                        f.trim()
                            .parse::<f64>()
                            .map(Some)
                            .map_err(|_| PlotError::Malformed { row, message: format!("not a number: {f:?}") })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(PlotError::Empty);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, PlotError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| PlotError::MissingColumn(name.into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Range {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Range {
    fn of<'a>(vals: impl Iterator<Item = &'a f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in vals {
            let v = if log { if v > 0.0 { v.log10() } else { continue } } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            (lo, hi) = (lo - 1.0, hi + 1.0);
        }
        Range { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|i| {
                let u = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                let label = if self.log { format!("1e{u:.1}") } else { format_tick(u) };
                (i as f64 / 4.0, label)
            })
            .collect()
    }
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Canvas {
    out: String,
    style: PlotStyle,
    x: Range,
    y: Range,
}

const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Canvas {
    fn new(style: &PlotStyle, x: Range, y: Range, x_label: &str, y_label: &str) -> Self {
        let (w, h) = (style.width, style.height);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let (x0, y0, x1, y1) = (MARGIN, MARGIN / 2.0, w - MARGIN / 2.0, h - MARGIN);
        let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
        let mut c = Canvas { out, style: style.clone(), x, y };
        for (f, label) in c.x.ticks() {
            let px = x0 + f * (x1 - x0);
            let _ = writeln!(c.out, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, y1 + 15.0);
        }
        for (f, label) in c.y.ticks() {
            let py = y1 - f * (y1 - y0);
            let _ = writeln!(c.out, r#"<text x="{:.2}" y="{py:.2}" text-anchor="end">{label}</text>"#, x0 - 4.0);
        }
        let _ = writeln!(c.out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#, (x0 + x1) / 2.0, h - 15.0);
        let _ = writeln!(
            c.out,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{y_label}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0
        );
        if let Some(t) = &c.style.title {
            let _ = writeln!(c.out, r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, escape(t));
        }
        c
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let (w, h) = (self.style.width, self.style.height);
        let (x0, y0, x1, y1) = (MARGIN, MARGIN / 2.0, w - MARGIN / 2.0, h - MARGIN);
        (x0 + self.x.frac(x) * (x1 - x0), y1 - self.y.frac(y) * (y1 - y0))
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64) {
        let mut d = String::new();
        for &(x, y) in pts {
            if (self.x.log && x <= 0.0) || (self.y.log && y <= 0.0) {
                continue;
            }
            let (a, b) = self.px(x, y);
            let _ = write!(d, "{a:.2},{b:.2} ");
        }
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            d.trim_end()
        );
    }

    fn dot(&mut self, x: f64, y: f64, color: &str) {
        let (a, b) = self.px(x, y);
        let _ = writeln!(self.out, r#"<circle cx="{a:.2}" cy="{b:.2}" r="2.5" fill="{color}"/>"#);
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One line per agent, position horizontal and time increasing upward.
/// Reads the `z<k>` columns of a trajectory CSV (or `x<k>` of a planar one).
pub fn plot_space_time(csv_text: &str, style: &PlotStyle) -> Result<String, PlotError> {
    let table = Table::parse(csv_text)?;
    let t_col = table.column("t")?;
    let mut agents = Vec::new();
    for k in 0.. {
        match table.column(&format!("z{k}")).or_else(|_| table.column(&format!("x{k}"))) {
            Ok(c) => agents.push(c),
            Err(_) => break,
        }
    }
    if agents.is_empty() {
        return Err(PlotError::MissingColumn("z0".into()));
    }
    let spacing = style.offset_spacing.unwrap_or(0.0);
    let lines: Vec<Vec<(f64, f64)>> = agents
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            table
                .rows
                .iter()
                .filter_map(|r| Some((r[c]? - k as f64 * spacing, r[t_col]?)))
                .collect()
        })
        .collect();
    let xs: Vec<f64> = lines.iter().flatten().map(|p| p.0).collect();
    let ts: Vec<f64> = lines.iter().flatten().map(|p| p.1).collect();
    let mut canvas = Canvas::new(style, Range::of(xs.iter(), false), Range::of(ts.iter(), false), "position", "time");
    for (k, line) in lines.iter().enumerate() {
        let color = if k == 0 { PALETTE[1] } else { PALETTE[0] };
        canvas.polyline(line, color, if k == 0 { 1.5 } else { 0.7 });
    }
    Ok(canvas.finish())
}

/// Log-log `|a_N(omega)|` from a response CSV (its last column).
pub fn plot_response(csv_text: &str, style: &PlotStyle) -> Result<String, PlotError> {
    let table = Table::parse(csv_text)?;
    let w_col = table.column("omega")?;
    let g_col = table.header.len() - 1;
    if !table.header[g_col].starts_with("gain_a") {
        return Err(PlotError::MissingColumn("gain_aN".into()));
    }
    let pts: Vec<(f64, f64)> = table.rows.iter().filter_map(|r| Some((r[w_col]?, r[g_col]?))).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut canvas = Canvas::new(style, Range::of(xs.iter(), true), Range::of(ys.iter(), true), "omega", "|a_N|");
    canvas.polyline(&pts, PALETTE[0], 1.2);
    Ok(canvas.finish())
}

/// Eigenvalues in the complex plane from a spectrum CSV.
pub fn plot_spectrum(csv_text: &str, style: &PlotStyle) -> Result<String, PlotError> {
    let table = Table::parse(csv_text)?;
    let (re, im) = (table.column("re")?, table.column("im")?);
    let pts: Vec<(f64, f64)> = table.rows.iter().filter_map(|r| Some((r[re]?, r[im]?))).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).chain([0.0]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut canvas = Canvas::new(style, Range::of(xs.iter(), false), Range::of(ys.iter(), false), "Re", "Im");
    let y = canvas.y;
    canvas.polyline(&[(0.0, y.lo), (0.0, y.hi)], "#999999", 0.5);
    for (x, y) in pts {
        canvas.dot(x, y, PALETTE[0]);
    }
    Ok(canvas.finish())
}

pub fn plot(kind: PlotKind, csv_text: &str, style: &PlotStyle) -> Result<String, PlotError> {
    match kind {
        PlotKind::SpaceTime => plot_space_time(csv_text, style),
        PlotKind::Response => plot_response(csv_text, style),
        PlotKind::Spectrum => plot_spectrum(csv_text, style),
    }
}
