//! Plain CSV for study results. Floats are written with 17 significant
//! digits so a write/read cycle reproduces every value bit for bit; empty
//! cells mean "not computed".

use std::io::{BufRead, Write};

use super::study::{StudyResult, StudyRow};
use super::{Distribution, ErrorScope, StudyConfig, TestField};
use crate::error::{Result, SphError};
use crate::schemes::{Quantity, SchemeKind};

pub const RESULTS_HEADER: &str = "scheme,field,distribution,seed,N,h,n_interior,rmse_f,rmse_fx,rmse_fy,rmse_fxx,rmse_fxy,rmse_fyy,std_f,std_fx,std_fy,fallbacks,interior_rmse_f";
pub const SLOPES_HEADER: &str = "scheme,field,distribution,quantity,slope,intercept,r2,points";
pub const DIAGNOSTICS_HEADER: &str = "scheme,field,distribution,seed,N,max_condition,wall_seconds";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn key(c: &StudyConfig) -> String {
    let seed = c.distribution.seed().map(|s| s.to_string()).unwrap_or_default();
    format!("{},{},{},{}", c.scheme.cli_name(), c.field.name(), c.distribution.label(), seed)
}

pub fn write_results_csv<W: Write>(results: &[StudyResult], mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for res in results {
        let k = key(&res.config);
        for r in &res.rows {
            let rmse: Vec<String> = r.rmse.iter().map(|v| opt(*v)).collect();
            let std: Vec<String> = r.std.iter().map(|v| opt(*v)).collect();
            writeln!(
                out,
                "{k},{},{},{},{},{},{},{}",
                r.particles,
                float(r.h),
                opt(r.n_interior),
                rmse.join(","),
                std.join(","),
                r.fallbacks,
                opt(r.interior_rmse_f)
            )?;
        }
    }
    Ok(())
}

/// Worst condition number and wall time per ladder row.
pub fn write_diagnostics_csv<W: Write>(results: &[StudyResult], mut out: W) -> Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for res in results {
        let k = key(&res.config);
        for r in &res.rows {
            writeln!(out, "{k},{},{},{}", r.particles, opt(r.max_condition), float(r.wall_seconds))?;
        }
    }
    Ok(())
}

/// RMSE slopes use the quantity name (`f`, `fx`, ...); error-std slopes
/// against the neighbor count are prefixed `std_`.
pub fn write_slopes_csv<W: Write>(results: &[StudyResult], mut out: W) -> Result<()> {
    writeln!(out, "{SLOPES_HEADER}")?;
    for res in results {
        let c = &res.config;
        let prefix = format!("{},{},{}", c.scheme.cli_name(), c.field.name(), c.distribution.label());
        let rmse = Quantity::ALL.iter().zip(&res.rmse_slopes).map(|(q, s)| (q.name().to_string(), s));
        let std = Quantity::ALL.iter().zip(&res.std_slopes).map(|(q, s)| (format!("std_{}", q.name()), s));
        for (name, fit) in rmse.chain(std) {
            if let Some(f) = fit {
                writeln!(
                    out,
                    "{prefix},{name},{},{},{},{}",
                    float(f.slope),
                    float(f.intercept),
                    float(f.r2),
                    f.points
                )?;
            }
        }
    }
    Ok(())
}

struct Record<'a> {
    line: usize,
    cells: Vec<&'a str>,
}

impl<'a> Record<'a> {
    fn err(&self, message: impl Into<String>) -> SphError {
        SphError::Csv {
            line: self.line,
            message: message.into(),
        }
    }

    fn f64(&self, i: usize) -> Result<f64> {
        self.cells[i]
            .parse()
            .map_err(|_| self.err(format!("column {} is not a number: {:?}", i + 1, self.cells[i])))
    }

    fn opt(&self, i: usize) -> Result<Option<f64>> {
        if self.cells[i].is_empty() {
            Ok(None)
        } else {
            self.f64(i).map(Some)
        }
    }

    fn usize(&self, i: usize) -> Result<usize> {
        self.cells[i]
            .parse()
            .map_err(|_| self.err(format!("column {} is not a count: {:?}", i + 1, self.cells[i])))
    }

    fn config(&self) -> Result<StudyConfig> {
        let scheme = SchemeKind::parse(self.cells[0]).ok_or_else(|| self.err(format!("unknown scheme {:?}", self.cells[0])))?;
        let field = TestField::parse(self.cells[1]).ok_or_else(|| self.err(format!("unknown field {:?}", self.cells[1])))?;
        let seed = if self.cells[3].is_empty() {
            None
        } else {
            Some(self.cells[3].parse::<u64>().map_err(|_| self.err("bad seed"))?)
        };
        let distribution = Distribution::from_label(self.cells[2], seed).map_err(|e| self.err(e.to_string()))?;
        Ok(StudyConfig {
            scheme,
            field,
            distribution,
            ladder: Vec::new(),
            scope: ErrorScope::All,
        })
    }
}

fn read_lines<R: BufRead>(input: R, header: &str) -> Result<Vec<(usize, String)>> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == header => {}
        Some((_, Ok(h))) => {
            return Err(SphError::Csv {
                line: 1,
                message: format!("unexpected header {h:?}"),
            })
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => {
            return Err(SphError::Csv {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn split<'a>(line: usize, text: &'a str, columns: usize) -> Result<Record<'a>> {
    let cells: Vec<&str> = text.trim_end().split(',').collect();
    if cells.len() != columns {
        return Err(SphError::Csv {
            line,
            message: format!("expected {columns} columns, found {}", cells.len()),
        });
    }
    Ok(Record { line, cells })
}

/// Reads a results CSV back into studies, grouped by scheme, field and
/// distribution in order of first appearance. Slopes are refitted from the
/// rows; diagnostics columns stay at zero until merged with
/// [`read_diagnostics_csv`].
pub fn read_results_csv<R: BufRead>(input: R) -> Result<Vec<StudyResult>> {
    let columns = RESULTS_HEADER.split(',').count();
    let mut groups: Vec<(String, StudyConfig, Vec<StudyRow>)> = Vec::new();
    for (line, text) in read_lines(input, RESULTS_HEADER)? {
        let r = split(line, &text, columns)?;
        let k = r.cells[..4].join(",");
        let row = StudyRow {
            particles: r.usize(4)?,
            h: r.f64(5)?,
            n_interior: r.opt(6)?,
            rmse: [r.opt(7)?, r.opt(8)?, r.opt(9)?, r.opt(10)?, r.opt(11)?, r.opt(12)?],
            std: [r.opt(13)?, r.opt(14)?, r.opt(15)?],
            fallbacks: r.usize(16)?,
            interior_rmse_f: r.opt(17)?,
            max_condition: None,
            wall_seconds: 0.0,
        };
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => g.2.push(row),
            None => groups.push((k, r.config()?, vec![row])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(_, mut config, rows)| {
            config.ladder = rows.iter().map(|r| r.particles).collect();
            StudyResult::from_rows(config, rows)
        })
        .collect())
}

/// Fills `max_condition` and `wall_seconds` of matching rows in `results`.
pub fn read_diagnostics_csv<R: BufRead>(input: R, results: &mut [StudyResult]) -> Result<()> {
    let columns = DIAGNOSTICS_HEADER.split(',').count();
    for (line, text) in read_lines(input, DIAGNOSTICS_HEADER)? {
        let r = split(line, &text, columns)?;
        let k = r.cells[..4].join(",");
        let n = r.usize(4)?;
        let row = results
            .iter_mut()
            .filter(|res| key(&res.config) == k)
            .flat_map(|res| res.rows.iter_mut())
            .find(|row| row.particles == n)
            .ok_or_else(|| r.err(format!("no results row for {k} N={n}")))?;
        row.max_condition = r.opt(5)?;
        row.wall_seconds = r.f64(6)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_studies, Distribution};

    fn sample() -> Vec<StudyResult> {
        let ladder = vec![400, 900, 1600, 2500];
        let configs = vec![
            StudyConfig::new(SchemeKind::Msph, TestField::F1, Distribution::irregular(), ladder.clone()).unwrap(),
            StudyConfig::new(SchemeKind::Sph, TestField::F2, Distribution::Regular, ladder.clone()).unwrap(),
            StudyConfig::new(SchemeKind::CspmN, TestField::F1, Distribution::Regular, ladder).unwrap(),
        ];
        run_studies(&configs).unwrap()
    }

    #[test]
    fn results_round_trip_bit_exact() {
        let results = sample();
        let mut buf = Vec::new();
        write_results_csv(&results, &mut buf).unwrap();
        let mut diag = Vec::new();
        write_diagnostics_csv(&results, &mut diag).unwrap();
        let mut back = read_results_csv(buf.as_slice()).unwrap();
        read_diagnostics_csv(diag.as_slice(), &mut back).unwrap();
        assert_eq!(back, results);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(RESULTS_HEADER));
        assert!(text.contains("sph,f2,regular,,400,"));
        assert!(text.contains("msph,f1,irregular:0.45,"));
    }

    #[test]
    fn slopes_csv_lists_only_fitted_quantities() {
        let results = sample();
        let mut buf = Vec::new();
        write_slopes_csv(&results, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SLOPES_HEADER);
        // MSPH: 6 RMSE; SPH: 3 RMSE; CSPMn: 3 RMSE + 3 std.
        assert_eq!(lines.len(), 1 + 6 + 3 + 6);
        assert!(lines.iter().any(|l| l.starts_with("msph,f1,irregular:0.45,fxy,")));
        assert!(!lines.iter().any(|l| l.starts_with("sph,f2,regular,fxx,")));
    }

    #[test]
    fn malformed_input_reports_line() {
        let bad = format!("{RESULTS_HEADER}\nsph,f1,regular,,100,0.1\n");
        assert!(matches!(read_results_csv(bad.as_bytes()), Err(SphError::Csv { line: 2, .. })));
        assert!(matches!(read_results_csv("a,b\n".as_bytes()), Err(SphError::Csv { line: 1, .. })));
        let mut buf = Vec::new();
        write_results_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("sph,f2", "sphx,f2", 1);
        assert!(read_results_csv(text.as_bytes()).is_err());
    }
}
