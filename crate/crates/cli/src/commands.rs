use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::ThreadPool;
use sphlab_core::consistency::m0_convergence_trend;
use sphlab_core::experiments::{
    read_diagnostics_csv, read_results_csv, write_diagnostics_csv, write_results_csv, StudyResult,
};
use sphlab_core::{consistency_report, mean_interior_neighbors, run_studies, Quantity, SchemeKind, TestField};

use crate::config::{CliConfig, Command, Invocation};
use crate::plot::{emit_loglog_plot, PlotLabels, Reference, Series};
use crate::table::emit_slope_table;
use crate::{write_atomic, CliError};

pub const RESULTS_FILE: &str = "results.csv";
pub const CONDITIONING_FILE: &str = "conditioning.csv";
pub const SLOPES_FILE: &str = "slopes.csv";
pub const TABLE_FILE: &str = "table.txt";
pub const SUMMARY_FILE: &str = "consistency_summary.csv";

/// Runs the parsed invocation; human-readable output goes to `stdout`,
/// progress notes to `stderr`.
pub fn execute(inv: &Invocation, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    if inv.print_config {
        stdout.write_all(inv.config.to_config_text().as_bytes())?;
        return Ok(());
    }
    let Some(command) = &inv.command else {
        return Err(CliError::Usage("missing subcommand".into()));
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.config.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))?;
    match command {
        Command::Run => run(&inv.config, &pool, stdout, stderr),
        Command::Diagnose => diagnose(&inv.config, &pool, stdout, stderr),
        Command::Table { inputs } => table(&inv.config, inputs, stdout, stderr),
        Command::Plot { inputs } => plot(&inv.config, inputs, stderr),
    }
}

fn to_vec(f: impl FnOnce(&mut Vec<u8>) -> sphlab_core::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display())))
}

fn emit(path: &Path, bytes: &[u8], stderr: &mut dyn Write) -> Result<(), CliError> {
    write_atomic(path, bytes)?;
    writeln!(stderr, "wrote {}", path.display())?;
    Ok(())
}

fn run(config: &CliConfig, pool: &ThreadPool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let studies = config.studies()?;
    let ladder = config.ladder.resolve()?;
    writeln!(
        stderr,
        "running {} studies over {} ladder rows (N = {} to {})",
        studies.len(),
        ladder.len(),
        ladder[0],
        ladder[ladder.len() - 1]
    )?;
    let results = pool.install(|| run_studies(&studies))?;
    create_out(&config.out)?;
    let table = emit_slope_table(&results)?;
    emit(&config.out.join(RESULTS_FILE), &to_vec(|b| write_results_csv(&results, b))?, stderr)?;
    emit(&config.out.join(CONDITIONING_FILE), &to_vec(|b| write_diagnostics_csv(&results, b))?, stderr)?;
    emit(&config.out.join(SLOPES_FILE), table.csv.as_bytes(), stderr)?;
    emit(&config.out.join(TABLE_FILE), table.text.as_bytes(), stderr)?;
    if config.plots {
        write_plots(&results, &config.out, stderr)?;
    }
    stdout.write_all(table.text.as_bytes())?;
    Ok(())
}

fn read_inputs(config: &CliConfig, inputs: &[PathBuf]) -> Result<Vec<StudyResult>, CliError> {
    let default = [config.out.join(RESULTS_FILE)];
    let paths = if inputs.is_empty() { &default[..] } else { inputs };
    let mut all = Vec::new();
    for path in paths {
        let open = |p: &Path| {
            File::open(p).map(BufReader::new).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", p.display())))
        };
        let mut results = read_results_csv(open(path)?).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let conditioning = path.with_file_name(CONDITIONING_FILE);
        if conditioning.is_file() {
            read_diagnostics_csv(open(&conditioning)?, &mut results)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", conditioning.display())))?;
        }
        all.extend(results);
    }
    Ok(all)
}

fn table(config: &CliConfig, inputs: &[PathBuf], stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let results = read_inputs(config, inputs)?;
    let table = emit_slope_table(&results)?;
    create_out(&config.out)?;
    emit(&config.out.join(SLOPES_FILE), table.csv.as_bytes(), stderr)?;
    emit(&config.out.join(TABLE_FILE), table.text.as_bytes(), stderr)?;
    stdout.write_all(table.text.as_bytes())?;
    Ok(())
}

fn plot(config: &CliConfig, inputs: &[PathBuf], stderr: &mut dyn Write) -> Result<(), CliError> {
    let results = read_inputs(config, inputs)?;
    create_out(&config.out)?;
    write_plots(&results, &config.out, stderr)
}

/// Per distribution and field: RMSE of `f` and `fx` against N for every
/// scheme, and error std of `f` against the interior neighbor count for
/// the scaled-n schemes.
pub fn write_plots(results: &[StudyResult], dir: &Path, stderr: &mut dyn Write) -> Result<(), CliError> {
    let mut groups: Vec<(String, TestField)> = Vec::new();
    for r in results {
        let key = (r.config.distribution.label(), r.config.field);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (label, field) in groups {
        let members: Vec<&StudyResult> = results
            .iter()
            .filter(|r| r.config.distribution.label() == label && r.config.field == field)
            .collect();
        let stem = label.replace(':', "-");
        for q in [Quantity::F, Quantity::Fx] {
            let series: Vec<Series> = members
                .iter()
                .filter_map(|r| {
                    let pts: Vec<(f64, f64)> = r
                        .rows
                        .iter()
                        .filter_map(|row| row.rmse[q.index()].map(|v| (row.particles as f64, v)))
                        .collect();
                    (!pts.is_empty()).then(|| Series::new(r.config.scheme.label(), pts))
                })
                .collect();
            if series.is_empty() {
                continue;
            }
            let labels = PlotLabels {
                title: format!("RMSE of {} for {}, {label}", q.name(), field.name()),
                x: "N".into(),
                y: format!("RMSE({})", q.name()),
            };
            let path = dir.join(format!("rmse_{}_{}_{stem}.svg", field.name(), q.name()));
            emit_loglog_plot(&labels, &series, &[Reference::Power(-1.0), Reference::Power(-2.0)], &path)?;
            writeln!(stderr, "wrote {}", path.display())?;
        }
        let series: Vec<Series> = members
            .iter()
            .filter(|r| r.config.scheme.is_scaled())
            .filter_map(|r| {
                let pts: Vec<(f64, f64)> = r.rows.iter().filter_map(|row| Some((row.n_interior?, row.std[0]?))).collect();
                (!pts.is_empty()).then(|| Series::new(r.config.scheme.label(), pts))
            })
            .collect();
        if series.is_empty() {
            continue;
        }
        let labels = PlotLabels {
            title: format!("Error std of f for {}, {label}", field.name()),
            x: "interior neighbors n".into(),
            y: "std(f error)".into(),
        };
        let path = dir.join(format!("std_{}_{stem}.svg", field.name()));
        emit_loglog_plot(&labels, &series, &[Reference::Power(-1.0), Reference::PowerLog(-1.0)], &path)?;
        writeln!(stderr, "wrote {}", path.display())?;
    }
    Ok(())
}

const SUMMARY_HEADER: &str = "mode,distribution,N,h,n_interior,mean_m0_defect,max_m0_defect,mean_m1,max_m1,mean_gradient_defect,max_gradient_defect,interior_mean_m0_defect,interior_max_m0_defect,interior_mean_sigma2_over_h2";

fn diagnose(config: &CliConfig, pool: &ThreadPool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let ladder = config.ladder.resolve()?;
    let distribution = config.distribution();
    let mut modes = Vec::new();
    if config.schemes.iter().any(|s| !s.is_scaled()) {
        modes.push(("fixed", SchemeKind::Sph));
    }
    if config.schemes.iter().any(|s| s.is_scaled()) {
        modes.push(("scaled", SchemeKind::SphN));
    }
    create_out(&config.out)?;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    for (mode, kind) in modes {
        let cfg = kind.config();
        // (x, interior mean |m0 - 1|) for the trend fit.
        let mut trend = Vec::new();
        for &n in &ladder {
            let particles = distribution.generate(n)?;
            let h = cfg.smoothing_length(n)?;
            let support = cfg.support_radius(h);
            let report = pool.install(|| consistency_report(&particles, cfg.kernel, h))?;
            let dump = to_vec(|b| report.write_csv(&particles, b))?;
            emit(&config.out.join(format!("consistency_{mode}_{n}.csv")), &dump, stderr)?;
            let n_interior = pool.install(|| mean_interior_neighbors(&particles, support)).ok();
            let inner = report.interior_stats;
            let sigma2 = inner.map(|_| {
                let (sum, count) = report
                    .sigma2
                    .iter()
                    .zip(&report.interior)
                    .filter(|(_, &i)| i)
                    .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
                sum / count as f64 / (h * h)
            });
            let opt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let a = report.all;
            summary.push_str(&format!(
                "{mode},{},{n},{h:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}\n",
                distribution.label(),
                opt(n_interior),
                a.mean_m0_defect,
                a.max_m0_defect,
                a.mean_m1,
                a.max_m1,
                a.mean_gradient_defect,
                a.max_gradient_defect,
                opt(inner.map(|s| s.mean_m0_defect)),
                opt(inner.map(|s| s.max_m0_defect)),
                opt(sigma2),
            ));
            let x = if kind.is_scaled() { n_interior } else { Some(n as f64) };
            if let (Some(x), Some(s)) = (x, inner) {
                trend.push((x, s.mean_m0_defect));
            }
        }
        let against = if kind.is_scaled() { "interior neighbors n" } else { "N" };
        match m0_convergence_trend(&trend) {
            Ok(slope) => writeln!(stdout, "{mode}-n: interior mean |m0 - 1| ~ ({against})^{slope:+.3}")?,
            Err(e) => writeln!(stdout, "{mode}-n: no m0 trend ({e})")?,
        }
    }
    emit(&config.out.join(SUMMARY_FILE), summary.as_bytes(), stderr)?;
    Ok(())
}
