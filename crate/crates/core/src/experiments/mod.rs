//! Resolution-ladder convergence studies.

mod csv;
mod fields;
mod metrics;
mod study;

pub use csv::{
    read_diagnostics_csv, read_results_csv, write_diagnostics_csv, write_results_csv, write_slopes_csv,
    DIAGNOSTICS_HEADER, RESULTS_HEADER, SLOPES_HEADER,
};
pub use fields::{exact_field, TestField};
pub use metrics::{error_std, fit_loglog_slope, rmse, SlopeFit};
pub use study::{
    msph_mse_vs_rmse_demo, run_studies, run_study, StudyResult, StudyRow, ILL_CONDITIONED, MIN_FIT_ROWS,
};

use crate::error::{Result, SphError};
use crate::schemes::SchemeKind;

pub const DEFAULT_JITTER: f64 = 0.45;
pub const DEFAULT_SEED: u64 = 20_240_611;

/// One row of the reference resolution ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRow {
    pub particles: usize,
    /// Reference mean neighbor count at the scaled-n smoothing length.
    pub neighbors: usize,
    /// Scaled-n smoothing length, three decimals.
    pub h: f64,
}

const fn row(particles: usize, neighbors: usize, h: f64) -> LadderRow {
    LadderRow { particles, neighbors, h }
}

pub const TABLE1: [LadderRow; 13] = [
    row(625, 213, 0.342),
    row(2_500, 556, 0.271),
    row(5_625, 973, 0.237),
    row(10_000, 1_436, 0.215),
    row(15_625, 1_933, 0.200),
    row(22_500, 2_472, 0.188),
    row(30_625, 3_041, 0.179),
    row(40_000, 3_648, 0.170),
    row(62_500, 4_880, 0.158),
    row(90_000, 6_288, 0.149),
    row(160_000, 9_216, 0.136),
    row(250_000, 12_416, 0.126),
    row(562_500, 21_328, 0.110),
];

/// Particle counts of reference rows `first..=last` (1-based).
pub fn table1_ladder(first: usize, last: usize) -> Result<Vec<usize>> {
    if first == 0 || first > last || last > TABLE1.len() {
        return Err(SphError::InvalidConfig(format!(
            "ladder rows {first}-{last} outside 1-{}",
            TABLE1.len()
        )));
    }
    Ok(TABLE1[first - 1..last].iter().map(|r| r.particles).collect())
}

/// Ten rows, N = 625 to 90000.
pub fn default_ladder() -> Vec<usize> {
    table1_ladder(1, 10).expect("static range")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Regular,
    /// Lattice jittered by up to `amplitude_fraction` of the spacing.
    Jittered { amplitude_fraction: f64, seed: u64 },
}

impl Distribution {
    pub fn irregular() -> Self {
        Distribution::Jittered {
            amplitude_fraction: DEFAULT_JITTER,
            seed: DEFAULT_SEED,
        }
    }

    /// `regular` or `irregular:<fraction>`.
    pub fn label(&self) -> String {
        match self {
            Distribution::Regular => "regular".into(),
            Distribution::Jittered { amplitude_fraction, .. } => format!("irregular:{amplitude_fraction}"),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Distribution::Regular => None,
            Distribution::Jittered { seed, .. } => Some(*seed),
        }
    }

    /// Inverse of [`label`](Self::label) plus the seed column.
    pub fn from_label(label: &str, seed: Option<u64>) -> Result<Self> {
        if label == "regular" {
            return Ok(Distribution::Regular);
        }
        let frac = label
            .strip_prefix("irregular:")
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| SphError::InvalidConfig(format!("unknown distribution {label:?}")))?;
        let seed = seed.ok_or_else(|| SphError::InvalidConfig("irregular distribution without seed".into()))?;
        Ok(Distribution::Jittered {
            amplitude_fraction: frac,
            seed,
        })
    }

    /// Particle set of `n` particles drawn from this distribution.
    pub fn generate(&self, n: usize) -> Result<crate::particles::ParticleSet> {
        match *self {
            Distribution::Regular => crate::particles::ParticleSet::regular(n),
            Distribution::Jittered {
                amplitude_fraction,
                seed,
            } => crate::particles::ParticleSet::irregular(n, amplitude_fraction, seed),
        }
    }
}

/// Which particles enter the RMSE and error-std columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorScope {
    /// Every particle, boundary-truncated ones included.
    #[default]
    All,
    /// Only particles farther than the kernel support from every edge.
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub scheme: SchemeKind,
    pub field: TestField,
    pub distribution: Distribution,
    /// Strictly increasing perfect squares.
    pub ladder: Vec<usize>,
    pub scope: ErrorScope,
}

impl StudyConfig {
    pub fn new(scheme: SchemeKind, field: TestField, distribution: Distribution, ladder: Vec<usize>) -> Result<Self> {
        let cfg = StudyConfig {
            scheme,
            field,
            distribution,
            ladder,
            scope: ErrorScope::All,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scope(mut self, scope: ErrorScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(SphError::InvalidConfig("empty ladder".into()));
        }
        for &n in &self.ladder {
            let s = (n as f64).sqrt().round() as usize;
            if s * s != n || n < 4 {
                return Err(SphError::NotPerfectSquare(n));
            }
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SphError::InvalidConfig("ladder must be strictly increasing".into()));
        }
        if let Distribution::Jittered { amplitude_fraction, .. } = self.distribution {
            if !(0.0..0.5).contains(&amplitude_fraction) {
                return Err(SphError::InvalidJitter(amplitude_fraction));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::SchemeKind;

    #[test]
    fn scaled_n_reproduces_reference_h() {
        let cfg = SchemeKind::SphN.config();
        for r in TABLE1 {
            let h = cfg.smoothing_length(r.particles).unwrap();
            assert!((h - r.h).abs() <= 1e-3, "{} {h}", r.particles);
        }
    }

    #[test]
    fn ladder_validation() {
        let d = Distribution::Regular;
        assert!(StudyConfig::new(SchemeKind::Sph, TestField::F1, d, vec![625, 2500]).is_ok());
        assert!(StudyConfig::new(SchemeKind::Sph, TestField::F1, d, vec![625, 626]).is_err());
        assert!(StudyConfig::new(SchemeKind::Sph, TestField::F1, d, vec![2500, 625]).is_err());
        assert!(StudyConfig::new(SchemeKind::Sph, TestField::F1, d, vec![]).is_err());
        assert_eq!(table1_ladder(1, 9).unwrap().len(), 9);
        assert_eq!(default_ladder().last(), Some(&90_000));
        assert!(table1_ladder(0, 3).is_err());
        assert!(table1_ladder(5, 14).is_err());
    }

    #[test]
    fn distribution_labels_round_trip() {
        for d in [Distribution::Regular, Distribution::irregular()] {
            assert_eq!(Distribution::from_label(&d.label(), d.seed()).unwrap(), d);
        }
        assert!(Distribution::from_label("irregular:0.3", None).is_err());
        assert!(Distribution::from_label("hexagonal", None).is_err());
    }
}
