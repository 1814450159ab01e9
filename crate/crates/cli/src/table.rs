//! Slope matrices in the layout of the convergence tables: one column per
//! scheme, one row per field derivative.

use std::fmt::Write as _;

use sphlab_core::experiments::write_slopes_csv;
use sphlab_core::{Quantity, SchemeKind, StudyResult, TestField};

/// Printed in place of a quantity the scheme does not estimate.
pub const NOT_COMPUTED: &str = "-----";

const ROW_LABEL_WIDTH: usize = 8;
const COLUMN_WIDTH: usize = 7;

pub struct SlopeTable {
    pub text: String,
    /// Slopes CSV of the same results.
    pub csv: String,
}

fn row_label(field: TestField, q: Quantity) -> String {
    match q {
        Quantity::F => field.name().to_string(),
        _ => format!("{},{}", field.name(), &q.name()[1..]),
    }
}

/// `+0.51`, `-1.76`; a fitted zero prints as `+0.00`.
pub fn format_slope(slope: f64) -> String {
    let s = format!("{slope:+.2}");
    if s == "-0.00" {
        "+0.00".into()
    } else {
        s
    }
}

/// One table per distribution, in order of first appearance. Columns are
/// the schemes present, in canonical order; rows the fields present. A
/// footnote lists ladder rows where more than 1% of particles fell back.
pub fn emit_slope_table(results: &[StudyResult]) -> sphlab_core::Result<SlopeTable> {
    let mut labels: Vec<String> = Vec::new();
    for r in results {
        let l = r.config.distribution.label();
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    let mut text = String::new();
    for (i, label) in labels.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        let group: Vec<&StudyResult> = results.iter().filter(|r| &r.config.distribution.label() == label).collect();
        render_group(&mut text, label, &group);
    }
    let mut csv = Vec::new();
    write_slopes_csv(results, &mut csv)?;
    Ok(SlopeTable {
        text,
        csv: String::from_utf8(csv).expect("CSV writer emits UTF-8"),
    })
}

fn render_group(text: &mut String, label: &str, group: &[&StudyResult]) {
    let schemes: Vec<SchemeKind> = SchemeKind::ALL
        .into_iter()
        .filter(|s| group.iter().any(|r| r.config.scheme == *s))
        .collect();
    let fields: Vec<TestField> = TestField::ALL
        .into_iter()
        .filter(|f| group.iter().any(|r| r.config.field == *f))
        .collect();
    let _ = writeln!(text, "RMSE convergence rates vs N, {label} distribution");
    let _ = write!(text, "{:<ROW_LABEL_WIDTH$}", "");
    for s in &schemes {
        let _ = write!(text, "{:>COLUMN_WIDTH$}", s.label());
    }
    text.push('\n');
    for &field in &fields {
        for q in Quantity::ALL {
            let _ = write!(text, "{:<ROW_LABEL_WIDTH$}", row_label(field, q));
            for &s in &schemes {
                let cell = group
                    .iter()
                    .find(|r| r.config.scheme == s && r.config.field == field)
                    .and_then(|r| r.rmse_slope(q))
                    .map(format_slope)
                    .unwrap_or_else(|| NOT_COMPUTED.to_string());
                let _ = write!(text, "{cell:>COLUMN_WIDTH$}");
            }
            text.push('\n');
        }
    }
    let degraded: Vec<String> = group
        .iter()
        .flat_map(|r| {
            r.degraded_rows().map(move |row| {
                format!(
                    "{} {} N={} ({} fallbacks)",
                    r.config.scheme.label(),
                    r.config.field.name(),
                    row.particles,
                    row.fallbacks
                )
            })
        })
        .collect();
    if !degraded.is_empty() {
        let _ = writeln!(text, "* degraded rows (>1% fallbacks): {}", degraded.join("; "));
    }
}
