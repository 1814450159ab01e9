//! Flag and config-file resolution.
//!
//! Precedence, lowest first: built-in defaults, `SPHLAB_OUT` (output
//! directory only), the `--config` file, command-line flags.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sphlab_core::experiments::{table1_ladder, DEFAULT_JITTER, DEFAULT_SEED, TABLE1};
use sphlab_core::{Distribution, ErrorScope, SchemeKind, StudyConfig, TestField};

use crate::CliError;

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "SPHLAB_OUT";
pub const DEFAULT_OUT: &str = "sphlab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Regular,
    Irregular,
}

impl DistributionKind {
    fn name(self) -> &'static str {
        match self {
            DistributionKind::Regular => "regular",
            DistributionKind::Irregular => "irregular",
        }
    }
}

/// `table1`, `table1:A-B` (1-based, inclusive) or an explicit list of N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LadderSpec {
    Table1 { first: usize, last: usize },
    Explicit(Vec<usize>),
}

impl LadderSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let spec = if s == "table1" {
            LadderSpec::Table1 {
                first: 1,
                last: TABLE1.len(),
            }
        } else if let Some(range) = s.strip_prefix("table1:") {
            let (a, b) = range
                .split_once('-')
                .ok_or_else(|| format!("ladder range {range:?} is not of the form A-B"))?;
            let row = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("ladder row {t:?} is not an integer"));
            LadderSpec::Table1 {
                first: row(a)?,
                last: row(b)?,
            }
        } else {
            let values = s
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| format!("ladder entry {t:?} is not an integer")))
                .collect::<Result<Vec<_>, _>>()?;
            LadderSpec::Explicit(values)
        };
        let ladder = spec.resolve().map_err(|e| e.to_string())?;
        // Same checks a study applies, so bad ladders fail before any work.
        StudyConfig::new(SchemeKind::Sph, TestField::F1, Distribution::Regular, ladder).map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn resolve(&self) -> sphlab_core::Result<Vec<usize>> {
        match self {
            LadderSpec::Table1 { first, last } => table1_ladder(*first, *last),
            LadderSpec::Explicit(v) => Ok(v.clone()),
        }
    }
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec::Table1 { first: 1, last: 10 }
    }
}

impl fmt::Display for LadderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LadderSpec::Table1 { first, last } => write!(f, "table1:{first}-{last}"),
            LadderSpec::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// Fully resolved settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    /// Canonical table order, no duplicates.
    pub schemes: Vec<SchemeKind>,
    pub fields: Vec<TestField>,
    pub distribution: DistributionKind,
    pub jitter: f64,
    pub seed: u64,
    pub ladder: LadderSpec,
    pub out: PathBuf,
    pub plots: bool,
    /// 0 picks the available parallelism.
    pub threads: usize,
    pub interior_only: bool,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            schemes: SchemeKind::ALL.to_vec(),
            fields: TestField::ALL.to_vec(),
            distribution: DistributionKind::Regular,
            jitter: DEFAULT_JITTER,
            seed: DEFAULT_SEED,
            ladder: LadderSpec::default(),
            out: PathBuf::from(DEFAULT_OUT),
            plots: false,
            threads: 0,
            interior_only: false,
        }
    }
}

impl CliConfig {
    pub fn distribution(&self) -> Distribution {
        match self.distribution {
            DistributionKind::Regular => Distribution::Regular,
            DistributionKind::Irregular => Distribution::Jittered {
                amplitude_fraction: self.jitter,
                seed: self.seed,
            },
        }
    }

    pub fn scope(&self) -> ErrorScope {
        if self.interior_only {
            ErrorScope::Interior
        } else {
            ErrorScope::All
        }
    }

    /// One study per selected scheme and field, schemes outermost.
    pub fn studies(&self) -> sphlab_core::Result<Vec<StudyConfig>> {
        let ladder = self.ladder.resolve()?;
        let mut out = Vec::with_capacity(self.schemes.len() * self.fields.len());
        for &scheme in &self.schemes {
            for &field in &self.fields {
                let c = StudyConfig::new(scheme, field, self.distribution(), ladder.clone())?;
                out.push(c.with_scope(self.scope()));
            }
        }
        Ok(out)
    }

    /// Config-file text that parses back to `self`.
    pub fn to_config_text(&self) -> String {
        let names = |v: Vec<&str>| v.join(",");
        format!(
            "scheme = {}\nfield = {}\ndistribution = {}\njitter = {}\nseed = {}\nladder = {}\nout = {}\nplots = {}\nthreads = {}\ninterior_only = {}\n",
            names(self.schemes.iter().map(|s| s.cli_name()).collect()),
            names(self.fields.iter().map(|f| f.name()).collect()),
            self.distribution.name(),
            self.jitter,
            self.seed,
            self.ladder,
            self.out.display(),
            self.plots,
            self.threads,
            self.interior_only,
        )
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::Usage(format!("config line {line_no}: {msg}"));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            self.apply(key, value).map_err(err)?;
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "scheme" => self.schemes = parse_schemes(value)?,
            "field" => self.fields = parse_fields(value)?,
            "distribution" => self.distribution = parse_distribution(value)?,
            "jitter" => self.jitter = parse_jitter(value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "ladder" => self.ladder = LadderSpec::parse(value)?,
            "out" => {
                if value.is_empty() {
                    return Err("empty output directory".into());
                }
                self.out = PathBuf::from(value)
            }
            "plots" => self.plots = parse_bool(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "interior_only" => self.interior_only = parse_bool(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("{key}: {value:?} is not a non-negative integer"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{key}: expected true or false, found {value:?}")),
    }
}

pub fn parse_schemes(value: &str) -> Result<Vec<SchemeKind>, String> {
    let mut picked = Vec::new();
    for token in value.split(',').map(str::trim) {
        if token.eq_ignore_ascii_case("all") {
            picked.extend(SchemeKind::ALL);
        } else if token.eq_ignore_ascii_case("msphn") {
            return Err("scheme \"msphn\": MSPH has no scaled-n variant".into());
        } else {
            picked.push(SchemeKind::parse(token).ok_or_else(|| {
                format!("unknown scheme {token:?} (expected sph, cspm, fpm, msph, sphn, cspmn, fpmn or all)")
            })?);
        }
    }
    picked.sort();
    picked.dedup();
    Ok(picked)
}

pub fn parse_fields(value: &str) -> Result<Vec<TestField>, String> {
    let mut picked = Vec::new();
    for token in value.split(',').map(str::trim) {
        if token.eq_ignore_ascii_case("all") {
            picked.extend(TestField::ALL);
        } else {
            picked.push(TestField::parse(token).ok_or_else(|| format!("unknown field {token:?} (expected f1, f2 or all)"))?);
        }
    }
    picked.sort_by_key(|f| f.name());
    picked.dedup();
    Ok(picked)
}

fn parse_distribution(value: &str) -> Result<DistributionKind, String> {
    match value {
        "regular" => Ok(DistributionKind::Regular),
        "irregular" => Ok(DistributionKind::Irregular),
        _ => Err(format!("unknown distribution {value:?} (expected regular or irregular)")),
    }
}

fn parse_jitter(value: &str) -> Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("jitter {value:?} is not a number"))?;
    if !(0.0..0.5).contains(&v) {
        return Err(format!("jitter {v} outside [0, 0.5)"));
    }
    Ok(v)
}

#[derive(Debug, Parser)]
#[command(name = "sphlab", version, about = "SPH consistency and convergence studies on the unit square")]
struct Cli {
    #[command(subcommand)]
    command: Option<CommandArgs>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Args)]
struct Flags {
    /// Comma-separated schemes: sph, cspm, fpm, msph, sphn, cspmn, fpmn or all.
    #[arg(long, global = true, value_parser = |v: &str| parse_schemes(v).map(SchemeList))]
    scheme: Option<SchemeList>,
    /// Comma-separated test fields: f1, f2 or all.
    #[arg(long, global = true, value_parser = |v: &str| parse_fields(v).map(FieldList))]
    field: Option<FieldList>,
    /// Particle distribution: regular or irregular.
    #[arg(long, global = true, value_parser = parse_distribution)]
    distribution: Option<DistributionKind>,
    /// Jitter amplitude as a fraction of the lattice spacing, in [0, 0.5).
    #[arg(long, global = true, value_parser = parse_jitter)]
    jitter: Option<f64>,
    /// Seed of the irregular distribution.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// table1, table1:A-B or a comma-separated list of particle counts.
    #[arg(long, global = true, value_parser = LadderSpec::parse)]
    ladder: Option<LadderSpec>,
    /// Output directory (default: $SPHLAB_OUT or sphlab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write SVG figures next to the CSV output.
    #[arg(long, global = true)]
    plots: bool,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Restrict RMSE and error std to particles away from the boundary.
    #[arg(long, global = true)]
    interior_only: bool,
    /// `key = value` file with the same keys as the long flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Clone)]
struct SchemeList(Vec<SchemeKind>);

#[derive(Debug, Clone)]
struct FieldList(Vec<TestField>);

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Run convergence studies and write CSV tables.
    Run,
    /// Write per-particle consistency moments for each ladder row.
    Diagnose,
    /// Print the slope table of existing results CSVs.
    Table {
        /// Results CSVs (default: <out>/results.csv).
        inputs: Vec<PathBuf>,
    },
    /// Draw figures from existing results CSVs.
    Plot {
        /// Results CSVs (default: <out>/results.csv).
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run,
    Diagnose,
    Table { inputs: Vec<PathBuf> },
    Plot { inputs: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    /// `None` only together with `print_config`.
    pub command: Option<Command>,
    pub config: CliConfig,
    pub print_config: bool,
}

/// Resolves `argv` (program name first) against the config file named by
/// `--config` and the output-directory environment value.
pub fn parse_config<I, T>(argv: I, env_out: Option<OsString>) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::from_clap)?;
    let mut config = CliConfig::default();
    if let Some(out) = env_out.filter(|v| !v.is_empty()) {
        config.out = PathBuf::from(out);
    }
    let f = cli.flags;
    if let Some(path) = &f.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        config.apply_config_text(&text)?;
    }
    if let Some(SchemeList(v)) = f.scheme {
        config.schemes = v;
    }
    if let Some(FieldList(v)) = f.field {
        config.fields = v;
    }
    if let Some(v) = f.distribution {
        config.distribution = v;
    }
    if let Some(v) = f.jitter {
        config.jitter = v;
    }
    if let Some(v) = f.seed {
        config.seed = v;
    }
    if let Some(v) = f.ladder {
        config.ladder = v;
    }
    if let Some(v) = f.out {
        config.out = v;
    }
    if let Some(v) = f.threads {
        config.threads = v;
    }
    config.plots |= f.plots;
    config.interior_only |= f.interior_only;

    let command = cli.command.map(|c| match c {
        CommandArgs::Run => Command::Run,
        CommandArgs::Diagnose => Command::Diagnose,
        CommandArgs::Table { inputs } => Command::Table { inputs },
        CommandArgs::Plot { inputs } => Command::Plot { inputs },
    });
    if command.is_none() && !f.print_config {
        return Err(CliError::Usage(
            "missing subcommand (run, diagnose, table or plot); see --help".into(),
        ));
    }
    Ok(Invocation {
        command,
        config,
        print_config: f.print_config,
    })
}
