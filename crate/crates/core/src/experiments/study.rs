use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;

use super::metrics::{error_std, fit_loglog_slope, rmse, SlopeFit};
use super::{Distribution, ErrorScope, StudyConfig, TestField};
use crate::error::{Result, SphError};
use crate::kernels::SmoothingKernel;
use crate::particles::{CellGrid, ParticleSet};
use crate::schemes::{
    estimate_particle, fill_pairs, smoothing_length_for, NeighborMode, ParticleEstimate, Quantity, SchemeConfig,
    Stencil, Variant,
};

/// Slope fits need at least this many ladder rows.
pub const MIN_FIT_ROWS: usize = 4;

/// Condition numbers above this mark a row's corrective systems as
/// ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e8;

/// One ladder point of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub particles: usize,
    pub h: f64,
    /// Mean neighbor count (self included) over particles farther than the
    /// kernel support from every edge; `None` when there are none.
    pub n_interior: Option<f64>,
    /// Indexed by [`Quantity::index`]; `None` where the scheme does not
    /// estimate the quantity.
    pub rmse: [Option<f64>; 6],
    /// Error standard deviation of `f`, `fx`, `fy`.
    pub std: [Option<f64>; 3],
    pub fallbacks: usize,
    pub interior_rmse_f: Option<f64>,
    /// Worst corrective-system condition number; `None` for standard SPH.
    pub max_condition: Option<f64>,
    /// Wall time of the ladder row, shared by all studies batched with it.
    pub wall_seconds: f64,
}

impl StudyRow {
    /// More than 1% of the particles fell back to a lower-order scheme.
    pub fn is_degraded(&self) -> bool {
        self.fallbacks as f64 > 0.01 * self.particles as f64
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.max_condition.is_some_and(|c| c > ILL_CONDITIONED)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    /// RMSE against N, per quantity.
    pub rmse_slopes: [Option<SlopeFit>; 6],
    /// Error std against the interior neighbor count, for `f`, `fx`, `fy`.
    /// Only scaled-n studies vary the neighbor count, so fixed-n studies
    /// carry `None`.
    pub std_slopes: [Option<SlopeFit>; 3],
}

impl StudyResult {
    pub fn from_rows(config: StudyConfig, rows: Vec<StudyRow>) -> Self {
        let rmse_slopes = std::array::from_fn(|q| {
            let pts: Option<Vec<(f64, f64)>> = rows.iter().map(|r| r.rmse[q].map(|v| (r.particles as f64, v))).collect();
            fit_if_enough(pts)
        });
        let scaled = config.scheme.is_scaled();
        let std_slopes = std::array::from_fn(|q| {
            if !scaled {
                return None;
            }
            let pts: Option<Vec<(f64, f64)>> = rows.iter().map(|r| Some((r.n_interior?, r.std[q]?))).collect();
            fit_if_enough(pts)
        });
        StudyResult {
            config,
            rows,
            rmse_slopes,
            std_slopes,
        }
    }

    pub fn rmse_slope(&self, q: Quantity) -> Option<f64> {
        self.rmse_slopes[q.index()].map(|f| f.slope)
    }

    /// `None` for second-order quantities.
    pub fn std_slope(&self, q: Quantity) -> Option<f64> {
        self.std_slopes.get(q.index()).copied().flatten().map(|f| f.slope)
    }

    /// RMSE-vs-N fit over a subrange of the ladder rows.
    pub fn fit_rmse_rows(&self, q: Quantity, rows: Range<usize>) -> Result<SlopeFit> {
        let slice = self.rows.get(rows.clone()).ok_or_else(|| {
            SphError::InvalidConfig(format!("rows {rows:?} outside a {}-row study", self.rows.len()))
        })?;
        let pts = slice
            .iter()
            .map(|r| {
                r.rmse[q.index()]
                    .map(|v| (r.particles as f64, v))
                    .ok_or_else(|| SphError::InvalidConfig(format!("{} not estimated", q.name())))
            })
            .collect::<Result<Vec<_>>>()?;
        fit_loglog_slope(&pts)
    }

    pub fn degraded_rows(&self) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(|r| r.is_degraded())
    }
}

fn fit_if_enough(points: Option<Vec<(f64, f64)>>) -> Option<SlopeFit> {
    let points = points?;
    if points.len() < MIN_FIT_ROWS {
        return None;
    }
    fit_loglog_slope(&points).ok()
}

/// Slopes of RMSE(f) and RMSE(f)² against N. The second is twice the
/// first, since `log(e²) = 2 log e`.
pub fn msph_mse_vs_rmse_demo(study: &StudyResult) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = study
        .rows
        .iter()
        .filter_map(|r| r.rmse[0].map(|v| (r.particles as f64, v)))
        .collect();
    let squared: Vec<(f64, f64)> = pts.iter().map(|&(n, e)| (n, e * e)).collect();
    Ok((fit_loglog_slope(&pts)?.slope, fit_loglog_slope(&squared)?.slope))
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    Ok(run_studies(std::slice::from_ref(config))?.remove(0))
}

/// Studies sharing a particle distribution, neighbor mode and kernel.
struct Group {
    distribution: Distribution,
    mode: NeighborMode,
    kernel: SmoothingKernel,
    members: Vec<usize>,
}

fn same_mode(a: NeighborMode, b: NeighborMode) -> bool {
    match (a, b) {
        (NeighborMode::ScaledN, NeighborMode::ScaledN) => true,
        (NeighborMode::FixedN { target: x }, NeighborMode::FixedN { target: y }) => x == y,
        _ => false,
    }
}

/// Runs several studies, sharing particle sets and kernel evaluations
/// between those with the same distribution and neighbor mode. Results
/// come back in input order.
pub fn run_studies(configs: &[StudyConfig]) -> Result<Vec<StudyResult>> {
    for c in configs {
        c.validate()?;
    }
    let schemes: Vec<SchemeConfig> = configs.iter().map(|c| c.scheme.config()).collect();
    let mut groups: Vec<Group> = Vec::new();
    for (i, (c, s)) in configs.iter().zip(&schemes).enumerate() {
        match groups
            .iter_mut()
            .find(|g| g.distribution == c.distribution && same_mode(g.mode, s.neighbor_mode) && g.kernel == s.kernel)
        {
            Some(g) => g.members.push(i),
            None => groups.push(Group {
                distribution: c.distribution,
                mode: s.neighbor_mode,
                kernel: s.kernel,
                members: vec![i],
            }),
        }
    }

    let mut rows: Vec<Vec<StudyRow>> = vec![Vec::new(); configs.len()];
    for g in &groups {
        let mut ladder: Vec<usize> = g.members.iter().flat_map(|&i| configs[i].ladder.iter().copied()).collect();
        ladder.sort_unstable();
        ladder.dedup();
        for n in ladder {
            let members: Vec<usize> = g
                .members
                .iter()
                .copied()
                .filter(|&i| configs[i].ladder.contains(&n))
                .collect();
            let batch: Vec<(&StudyConfig, &SchemeConfig)> = members.iter().map(|&i| (&configs[i], &schemes[i])).collect();
            let out = run_row(g, n, &batch).map_err(|e| SphError::Row {
                n,
                source: Box::new(e),
            })?;
            for (i, row) in members.into_iter().zip(out) {
                rows[i].push(row);
            }
        }
    }
    Ok(configs
        .iter()
        .cloned()
        .zip(rows)
        .map(|(c, r)| StudyResult::from_rows(c, r))
        .collect())
}

fn run_row(group: &Group, n: usize, batch: &[(&StudyConfig, &SchemeConfig)]) -> Result<Vec<StudyRow>> {
    let start = Instant::now();
    let particles = group.distribution.generate(n)?;
    let h = smoothing_length_for(n, batch[0].1)?;
    let radius = group.kernel.support_radius(h);
    let grid = CellGrid::new(&particles, radius)?;
    let interior = particles.interior_mask(radius);

    let mut fields: Vec<TestField> = batch.iter().map(|(c, _)| c.field).collect();
    fields.sort_unstable();
    fields.dedup();
    let exact: Vec<Vec<[f64; 6]>> = fields.iter().map(|f| sample_exact(*f, &particles)).collect();
    let samples: Vec<Vec<f64>> = exact.iter().map(|e| e.iter().map(|v| v[0]).collect()).collect();
    let field_of: Vec<usize> = batch
        .iter()
        .map(|(c, _)| fields.iter().position(|f| *f == c.field).expect("field collected above"))
        .collect();

    let second = batch.iter().any(|(_, s)| s.variant == Variant::Msph);
    let unit_volume = particles.volume() / (h * h);
    let m = batch.len();
    let blank = ParticleEstimate {
        values: [0.0; 6],
        fallback: false,
        condition: 0.0,
    };
    let mut estimates = vec![blank; n * m];
    let mut counts = vec![0usize; n];
    estimates
        .par_chunks_mut(m)
        .zip(counts.par_iter_mut())
        .enumerate()
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(neighbors, pairs), (a, (slot, count))| {
                grid.gather(&particles, a, radius, neighbors);
                *count = neighbors.len();
                fill_pairs(group.kernel, &particles, a, neighbors, h, second, pairs);
                let stencil = Stencil {
                    pairs,
                    unit_volume,
                    h,
                };
                for (c, (_, scheme)) in batch.iter().enumerate() {
                    let field = &samples[field_of[c]];
                    slot[c] = estimate_particle(scheme.variant, &stencil, field, field[a], scheme.pivot_tolerance);
                }
            },
        );

    let interior_count = interior.iter().filter(|&&i| i).count();
    let n_interior = (interior_count > 0).then(|| {
        let total: usize = counts.iter().zip(&interior).filter(|(_, &i)| i).map(|(c, _)| c).sum();
        total as f64 / interior_count as f64
    });
    let wall_seconds = start.elapsed().as_secs_f64();

    batch
        .iter()
        .enumerate()
        .map(|(c, (cfg, scheme))| {
            let est = |a: usize| &estimates[a * m + c];
            let truth = &exact[field_of[c]];
            let in_scope = |a: usize| cfg.scope == ErrorScope::All || interior[a];
            if cfg.scope == ErrorScope::Interior && interior_count == 0 {
                return Err(SphError::EmptyInterior { radius });
            }
            let quantities = if scheme.variant == Variant::Msph { 6 } else { 3 };
            let mut rmse_row = [None; 6];
            let mut std_row = [None; 3];
            let mut errors = Vec::with_capacity(n);
            for q in 0..quantities {
                errors.clear();
                errors.extend((0..n).filter(|&a| in_scope(a)).map(|a| est(a).values[q] - truth[a][q]));
                rmse_row[q] = Some(rmse(&errors)?);
                if q < 3 {
                    std_row[q] = Some(error_std(&errors)?);
                }
            }
            let interior_errors: Vec<f64> = (0..n)
                .filter(|&a| interior[a])
                .map(|a| est(a).values[0] - truth[a][0])
                .collect();
            let interior_rmse_f = if interior_errors.is_empty() {
                None
            } else {
                Some(rmse(&interior_errors)?)
            };
            let fallbacks = (0..n).filter(|&a| est(a).fallback).count();
            let max_condition = (scheme.variant != Variant::Standard)
                .then(|| (0..n).map(|a| est(a).condition).fold(0.0f64, f64::max));
            Ok(StudyRow {
                particles: n,
                h,
                n_interior,
                rmse: rmse_row,
                std: std_row,
                fallbacks,
                interior_rmse_f,
                max_condition,
                wall_seconds,
            })
        })
        .collect()
}

fn sample_exact(field: TestField, particles: &ParticleSet) -> Vec<[f64; 6]> {
    particles.positions().iter().map(|&[x, y]| field.eval_all(x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Distribution;
    use crate::particles::NeighborList;
    use crate::schemes::{estimate, SchemeKind};

    fn small(kind: SchemeKind, field: TestField, dist: Distribution) -> StudyConfig {
        StudyConfig::new(kind, field, dist, vec![400, 900, 1600, 2500]).unwrap()
    }

    #[test]
    fn batched_rows_match_single_runs() {
        let dist = Distribution::irregular();
        let configs: Vec<StudyConfig> = [SchemeKind::Sph, SchemeKind::Msph, SchemeKind::Cspm]
            .iter()
            .flat_map(|&k| TestField::ALL.map(|f| small(k, f, dist)))
            .collect();
        let batched = run_studies(&configs).unwrap();
        for (cfg, res) in configs.iter().zip(&batched) {
            let single = run_study(cfg).unwrap();
            for (a, b) in single.rows.iter().zip(&res.rows) {
                assert_eq!(a.rmse, b.rmse);
                assert_eq!(a.std, b.std);
                assert_eq!(a.fallbacks, b.fallbacks);
                assert_eq!(a.n_interior, b.n_interior);
            }
        }
    }

    #[test]
    fn row_matches_neighbor_list_estimate() {
        let cfg = small(SchemeKind::Fpm, TestField::F2, Distribution::Regular);
        let res = run_study(&cfg).unwrap();
        let n = 900;
        let p = ParticleSet::regular(n).unwrap();
        let scheme = SchemeKind::Fpm.config();
        let h = scheme.smoothing_length(n).unwrap();
        let nl = NeighborList::build(&p, scheme.support_radius(h)).unwrap();
        let field: Vec<f64> = p.positions().iter().map(|&[x, y]| TestField::F2.eval(Quantity::F, x, y)).collect();
        let est = estimate(&scheme, &field, &p, &nl, h).unwrap();
        let errs: Vec<f64> = (0..n)
            .map(|a| {
                let [x, y] = p.position(a);
                est.fx[a] - TestField::F2.eval(Quantity::Fx, x, y)
            })
            .collect();
        assert_eq!(res.rows[1].rmse[1], Some(rmse(&errs).unwrap()));
        assert_eq!(res.rows[1].h, h);
    }

    #[test]
    fn rows_respect_metric_invariants() {
        let res = run_study(&small(SchemeKind::Msph, TestField::F1, Distribution::Regular)).unwrap();
        for r in &res.rows {
            assert!(r.rmse.iter().all(|v| v.unwrap() >= 0.0));
            for q in 0..3 {
                assert!(r.std[q].unwrap() <= r.rmse[q].unwrap() * (1.0 + 1e-12));
            }
            // x <-> y symmetry of f1 and the lattice.
            let (fx, fy) = (r.rmse[1].unwrap(), r.rmse[2].unwrap());
            assert!((fx - fy).abs() <= 1e-12 * fx.max(1e-300), "{fx} {fy}");
            assert!(r.max_condition.unwrap().is_finite());
        }
        assert!(res.rmse_slopes.iter().all(|s| s.is_some()));
        assert_eq!(res.rmse_slopes[0].unwrap().points, 4);
    }

    #[test]
    fn standard_sph_reports_no_second_derivatives() {
        let res = run_study(&small(SchemeKind::Sph, TestField::F2, Distribution::Regular)).unwrap();
        for r in &res.rows {
            assert!(r.rmse[3..].iter().all(Option::is_none));
            assert!(r.max_condition.is_none());
            assert_eq!(r.fallbacks, 0);
        }
        assert!(res.rmse_slope(Quantity::Fxx).is_none());
        assert!(res.rmse_slope(Quantity::F).is_some());
        assert!(res.std_slope(Quantity::Fx).is_none());
        let scaled = run_study(&small(SchemeKind::SphN, TestField::F2, Distribution::Regular)).unwrap();
        assert!(scaled.std_slope(Quantity::Fx).is_some());
    }

    #[test]
    fn interior_scope_shrinks_the_error_sample() {
        let base = small(SchemeKind::Sph, TestField::F1, Distribution::Regular);
        let all = run_study(&base).unwrap();
        let inner = run_study(&base.clone().with_scope(ErrorScope::Interior)).unwrap();
        for (a, b) in all.rows.iter().zip(&inner.rows) {
            assert_eq!(b.rmse[0], b.interior_rmse_f);
            assert_eq!(a.interior_rmse_f, b.interior_rmse_f);
            assert!(b.rmse[0].unwrap() < a.rmse[0].unwrap());
        }
    }

    #[test]
    fn too_few_rows_gives_no_slope() {
        let cfg = StudyConfig::new(SchemeKind::Fpm, TestField::F1, Distribution::Regular, vec![400, 900, 1600]).unwrap();
        let res = run_study(&cfg).unwrap();
        assert!(res.rmse_slopes.iter().all(Option::is_none));
        assert!(res.fit_rmse_rows(Quantity::F, 0..3).is_ok());
        assert!(res.fit_rmse_rows(Quantity::F, 0..5).is_err());
    }

    #[test]
    fn row_errors_carry_the_ladder_point() {
        let cfg = StudyConfig {
            scheme: SchemeKind::Sph,
            field: TestField::F1,
            distribution: Distribution::Regular,
            ladder: vec![4, 16],
            scope: ErrorScope::Interior,
        };
        match run_study(&cfg) {
            Err(SphError::Row { n, .. }) => assert_eq!(n, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mse_slope_doubles_rmse_slope() {
        let res = run_study(&small(SchemeKind::Msph, TestField::F1, Distribution::Regular)).unwrap();
        let (r, m) = msph_mse_vs_rmse_demo(&res).unwrap();
        assert!((m - 2.0 * r).abs() < 1e-12);
    }
}
