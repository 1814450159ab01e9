//! Discrete consistency diagnostics.
//!
//! For each particle `a`, with `d_b = x_b - x_a` and `ΔV` the particle volume:
//!
//! * `m0 = Σ W_ab ΔV` (discrete normalization),
//! * `m1 = Σ d_b W_ab ΔV` (first moment about `x_a`),
//! * `G = Σ x_b ⊗ ∇_a W_ab ΔV` (gradient moment; `G_kj = Σ x_b,k ∂_j W`),
//! * `σ² = Σ |d_b|² W_ab ΔV - |m1|²` (intrinsic diffusion about `x_a`).
//!
//! `G` uses absolute positions `x_b`, so the standard SPH gradient of a
//! linear field `v = M x` is exactly `M G`. With `∇_a` acting on the first
//! argument of `W(x_a - x_b)`, `G → I` as the discretization is refined.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Result, SphError};
use crate::experiments::fit_loglog_slope;
use crate::kernels::SmoothingKernel;
use crate::particles::{CellGrid, NeighborList, ParticleSet};

/// Domain-wide statistics over a subset of particles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DefectStats {
    pub count: usize,
    pub mean_m0_defect: f64,
    pub max_m0_defect: f64,
    pub mean_m1: f64,
    pub max_m1: f64,
    pub mean_gradient_defect: f64,
    pub max_gradient_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub m0: Vec<f64>,
    pub m1: Vec<[f64; 2]>,
    /// Row-major `[[G_xx, G_xy], [G_yx, G_yy]]`.
    pub gradient_moment: Vec<[[f64; 2]; 2]>,
    pub sigma2: Vec<f64>,
    /// Particles farther than `k h` from every edge.
    pub interior: Vec<bool>,
    pub all: DefectStats,
    /// `None` when no particle is interior.
    pub interior_stats: Option<DefectStats>,
}

impl ConsistencyReport {
    pub fn len(&self) -> usize {
        self.m0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m0.is_empty()
    }

    /// CSV with header `particle,x,y,m0,m1x,m1y,g11,g12,g21,g22,sigma2`.
    pub fn write_csv<W: Write>(&self, particles: &ParticleSet, mut out: W) -> Result<()> {
        writeln!(out, "particle,x,y,m0,m1x,m1y,g11,g12,g21,g22,sigma2")?;
        for a in 0..self.len() {
            let [x, y] = particles.position(a);
            let g = self.gradient_moment[a];
            writeln!(
                out,
                "{a},{x:.16e},{y:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.m0[a], self.m1[a][0], self.m1[a][1], g[0][0], g[0][1], g[1][0], g[1][1], self.sigma2[a]
            )?;
        }
        Ok(())
    }
}

fn gradient_defect(g: &[[f64; 2]; 2]) -> f64 {
    let d = [g[0][0] - 1.0, g[0][1], g[1][0], g[1][1] - 1.0];
    d.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn stats<'a>(rows: impl Iterator<Item = (f64, [f64; 2], &'a [[f64; 2]; 2])>) -> DefectStats {
    let mut s = DefectStats::default();
    for (m0, m1, g) in rows {
        let d0 = (m0 - 1.0).abs();
        let d1 = m1[0].hypot(m1[1]);
        let dg = gradient_defect(g);
        s.count += 1;
        s.mean_m0_defect += d0;
        s.max_m0_defect = s.max_m0_defect.max(d0);
        s.mean_m1 += d1;
        s.max_m1 = s.max_m1.max(d1);
        s.mean_gradient_defect += dg;
        s.max_gradient_defect = s.max_gradient_defect.max(dg);
    }
    if s.count > 0 {
        let n = s.count as f64;
        s.mean_m0_defect /= n;
        s.mean_m1 /= n;
        s.mean_gradient_defect /= n;
    }
    s
}

type MomentRow = (f64, [f64; 2], [[f64; 2]; 2], f64);

fn moment_row(pos: &[[f64; 2]], a: usize, neighbors: &[u32], kernel: SmoothingKernel, h: f64, dv: f64) -> MomentRow {
    let [xa, ya] = pos[a];
    let (mut m0, mut m1x, mut m1y, mut s2) = (0.0, 0.0, 0.0, 0.0);
    let mut g = [[0.0; 2]; 2];
    for &b in neighbors {
        let [xb, yb] = pos[b as usize];
        let (dx, dy) = (xb - xa, yb - ya);
        let (w, wx, wy) = kernel.gradient_unchecked(-dx, -dy, h);
        m0 += w;
        m1x += dx * w;
        m1y += dy * w;
        s2 += (dx * dx + dy * dy) * w;
        g[0][0] += xb * wx;
        g[0][1] += xb * wy;
        g[1][0] += yb * wx;
        g[1][1] += yb * wy;
    }
    let m1 = [m1x * dv, m1y * dv];
    for row in g.iter_mut() {
        for v in row.iter_mut() {
            *v *= dv;
        }
    }
    let sigma2 = s2 * dv - (m1[0] * m1[0] + m1[1] * m1[1]);
    (m0 * dv, m1, g, sigma2)
}

fn assemble(particles: &ParticleSet, rows: Vec<MomentRow>, support: f64) -> ConsistencyReport {
    let interior = particles.interior_mask(support);
    let mut report = ConsistencyReport {
        m0: Vec::with_capacity(rows.len()),
        m1: Vec::with_capacity(rows.len()),
        gradient_moment: Vec::with_capacity(rows.len()),
        sigma2: Vec::with_capacity(rows.len()),
        interior,
        all: DefectStats::default(),
        interior_stats: None,
    };
    for (m0, m1, g, s2) in rows {
        report.m0.push(m0);
        report.m1.push(m1);
        report.gradient_moment.push(g);
        report.sigma2.push(s2);
    }
    let iter = |only_interior: bool| {
        let r = &report;
        (0..r.len())
            .filter(move |&a| !only_interior || r.interior[a])
            .map(move |a| (r.m0[a], r.m1[a], &r.gradient_moment[a]))
    };
    let all = stats(iter(false));
    let inner = stats(iter(true));
    report.all = all;
    report.interior_stats = (inner.count > 0).then_some(inner);
    report
}

/// Computes all per-particle moments over a neighbor list of radius `≥ k h`.
pub fn discrete_moments(
    particles: &ParticleSet,
    neighbors: &NeighborList,
    kernel: SmoothingKernel,
    h: f64,
) -> Result<ConsistencyReport> {
    if !(h.is_finite() && h > 0.0) {
        return Err(SphError::InvalidSmoothingLength(h));
    }
    if neighbors.len() != particles.len() {
        return Err(SphError::NeighborMismatch {
            expected: particles.len(),
            got: neighbors.len(),
        });
    }
    let support = kernel.support_radius(h);
    if neighbors.radius() < support * (1.0 - 1e-12) {
        return Err(SphError::InvalidConfig(format!(
            "neighbor radius {} is smaller than the kernel support {support}",
            neighbors.radius()
        )));
    }
    let dv = particles.volume();
    let pos = particles.positions();
    let rows: Vec<MomentRow> = (0..particles.len())
        .into_par_iter()
        .map(|a| moment_row(pos, a, neighbors.neighbors(a), kernel, h, dv))
        .collect();
    Ok(assemble(particles, rows, support))
}

/// [`discrete_moments`] without a stored neighbor list: neighbors are
/// gathered per particle from a cell grid, so memory stays O(N) at large
/// neighbor counts. Results are identical.
pub fn consistency_report(particles: &ParticleSet, kernel: SmoothingKernel, h: f64) -> Result<ConsistencyReport> {
    if !(h.is_finite() && h > 0.0) {
        return Err(SphError::InvalidSmoothingLength(h));
    }
    let support = kernel.support_radius(h);
    let grid = CellGrid::new(particles, support)?;
    let dv = particles.volume();
    let pos = particles.positions();
    let rows: Vec<MomentRow> = (0..particles.len())
        .into_par_iter()
        .map_init(Vec::new, |scratch, a| {
            grid.gather(particles, a, support, scratch);
            moment_row(pos, a, scratch, kernel, h, dv)
        })
        .collect();
    Ok(assemble(particles, rows, support))
}

/// Fitted exponent of `|m0 - 1|` against neighbor count over a ladder of
/// `(n, defect)` points; needs at least four.
pub fn m0_convergence_trend(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(SphError::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    Ok(fit_loglog_slope(points)?.slope)
}

/// Shepard normalization `W_b → W_b / Σ W ΔV` of one particle's weights.
pub fn shepard_normalize(weights: &[f64], volume: f64) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum::<f64>() * volume;
    if total == 0.0 || !total.is_finite() {
        return Err(SphError::EmptySupport);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}
