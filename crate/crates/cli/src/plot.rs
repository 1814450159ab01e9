//! Self-contained log-log SVG figures.

use std::fmt::Write as _;
use std::path::Path;

use sphlab_core::experiments::fit_loglog_slope;
use thiserror::Error;

use crate::{write_atomic, CliError};

const WIDTH: f64 = 680.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 460.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 420.0;
const REFERENCE_SAMPLES: usize = 32;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
        }
    }
}

/// Dashed trend line through the first point of the first series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// `y ∝ x^p`.
    Power(f64),
    /// `y ∝ x^p ln x`; needs `x > 1` over the whole plot.
    PowerLog(f64),
}

impl Reference {
    fn label(self) -> String {
        match self {
            Reference::Power(p) => format!("x^{p}"),
            Reference::PowerLog(p) => format!("x^{p} log x"),
        }
    }

    fn through(self, (x0, y0): (f64, f64), x: f64) -> f64 {
        match self {
            Reference::Power(p) => y0 * (x / x0).powf(p),
            Reference::PowerLog(p) => y0 * (x / x0).powf(p) * x.ln() / x0.ln(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlotLabels {
    pub title: String,
    pub x: String,
    pub y: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("series {series:?} has a non-positive point ({x}, {y}); log axes need positive data")]
    NonPositive { series: String, x: f64, y: f64 },
    #[error("nothing to plot")]
    Empty,
    #[error("reference {0} needs every x > 1")]
    LogReferenceDomain(String),
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x.log10() - self.x.0) / (self.x.1 - self.x.0) * (RIGHT - LEFT)
    }

    fn py(&self, y: f64) -> f64 {
        BOTTOM - (y.log10() - self.y.0) / (self.y.1 - self.y.0) * (BOTTOM - TOP)
    }
}

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.floor(), hi.ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

fn polyline(axes: &Axes, pts: impl Iterator<Item = (f64, f64)>) -> String {
    pts.map(|(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// SVG text of a log-log plot. Axes span whole decades around the data;
/// reference lines are clipped to the plot area.
pub fn render_loglog_svg(labels: &PlotLabels, series: &[Series], references: &[Reference]) -> Result<String, PlotError> {
    for s in series {
        if let Some(&(x, y)) = s.points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
            return Err(PlotError::NonPositive {
                series: s.name.clone(),
                x,
                y,
            });
        }
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(PlotError::Empty);
    }
    let fold = |f: fn(&(f64, f64)) -> f64| {
        all.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (xmin, xmax) = fold(|p| p.0);
    let (ymin, ymax) = fold(|p| p.1);
    let axes = Axes {
        x: decades(xmin.log10(), xmax.log10()),
        y: decades(ymin.log10(), ymax.log10()),
    };
    let anchor = series.iter().find_map(|s| s.points.first().copied()).ok_or(PlotError::Empty)?;
    for r in references {
        if matches!(r, Reference::PowerLog(_)) && (xmin <= 1.0 || anchor.0 <= 1.0) {
            return Err(PlotError::LogReferenceDomain(r.label()));
        }
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<defs><clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/></clipPath></defs>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        escape(&labels.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    );

    for k in axes.x.0 as i32..=axes.x.1 as i32 {
        let x = axes.px(10f64.powi(k));
        let _ = writeln!(
            svg,
            r##"<line class="tick x" x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{TOP}" stroke="#dddddd"/><text x="{x:.2}" y="{}" text-anchor="middle">10<tspan dy="-6" font-size="9">{k}</tspan></text>"##,
            BOTTOM + 18.0
        );
    }
    for k in axes.y.0 as i32..=axes.y.1 as i32 {
        let y = axes.py(10f64.powi(k));
        let _ = writeln!(
            svg,
            r##"<line class="tick y" x1="{LEFT}" y1="{y:.2}" x2="{RIGHT}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">10<tspan dy="-6" font-size="9">{k}</tspan></text>"##,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 20.0,
        escape(&labels.x)
    );
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (TOP + BOTTOM) / 2.0,
        escape(&labels.y)
    );

    let mut legend: Vec<(String, &str, bool)> = Vec::new();
    for r in references {
        let (l0, l1) = (anchor.0.log10(), xmax.log10());
        let pts = (0..REFERENCE_SAMPLES).map(|i| {
            let x = 10f64.powf(l0 + (l1 - l0) * i as f64 / (REFERENCE_SAMPLES - 1) as f64);
            (x, r.through(anchor, x))
        });
        let pts = match r {
            Reference::Power(_) => polyline(&axes, [anchor, (xmax, r.through(anchor, xmax))].into_iter()),
            Reference::PowerLog(_) => polyline(&axes, pts),
        };
        let _ = writeln!(
            svg,
            r##"<polyline class="reference" clip-path="url(#plot-area)" points="{pts}" fill="none" stroke="#555555" stroke-dasharray="6 4"/>"##
        );
        legend.push((r.label(), "#555555", true));
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-name="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            escape(&s.name),
            polyline(&axes, s.points.iter().copied())
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                axes.px(x),
                axes.py(y)
            );
        }
        let name = match fit_loglog_slope(&s.points) {
            Ok(fit) => format!("{} (slope {:.2})", s.name, fit.slope),
            Err(_) => s.name.clone(),
        };
        legend.push((name, color, false));
    }

    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (i, (text, color, dashed)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}"{dash}/><text x="{}" y="{}">{}</text>"#,
            RIGHT + 12.0,
            RIGHT + 36.0,
            RIGHT + 42.0,
            y + 4.0,
            escape(text)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders and writes the plot atomically to `path`.
pub fn emit_loglog_plot(
    labels: &PlotLabels,
    series: &[Series],
    references: &[Reference],
    path: &Path,
) -> Result<(), CliError> {
    let svg = render_loglog_svg(labels, series, references).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(path, svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_bounds() {
        assert_eq!(decades(1.0, 2.0), (1.0, 2.0));
        assert_eq!(decades(0.3, 0.3), (0.0, 1.0));
        assert_eq!(decades(-3.2, -0.4), (-4.0, 0.0));
    }

    #[test]
    fn reference_passes_through_anchor() {
        for r in [Reference::Power(-1.0), Reference::PowerLog(-1.0)] {
            assert!((r.through((10.0, 2.0), 10.0) - 2.0).abs() < 1e-15);
        }
        assert!((Reference::Power(-2.0).through((10.0, 1.0), 100.0) - 0.01).abs() < 1e-15);
        let e = std::f64::consts::E;
        let v = Reference::PowerLog(-1.0).through((e, 1.0), e * e);
        assert!((v - 2.0 / e).abs() < 1e-14);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\">"), "a&lt;b &amp; &quot;c&quot;&gt;");
    }
}
