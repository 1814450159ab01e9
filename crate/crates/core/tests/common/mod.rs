//! Helpers shared by the integration tests: an O(N²) brute-force estimator
//! and the exactness checks. Each check returns the worst deviation found.

#![allow(dead_code)]

use sphlab_core::consistency::discrete_moments;
use sphlab_core::schemes::{
    estimate, estimate_cspm, estimate_fpm, estimate_msph, estimate_standard, solve_dense, DEFAULT_PIVOT_TOLERANCE,
};
use sphlab_core::{NeighborList, ParticleSet, SchemeKind, SmoothingKernel, Variant};

/// Per-particle `[f, fx, fy, fxx, fxy, fyy]` and fallback flag.
pub struct BruteForce {
    pub values: Vec<[f64; 6]>,
    pub fallback: Vec<bool>,
}

/// Double loop over every particle pair in index order. Kernel data are
/// taken at unit smoothing length and offsets scaled by `h`, so each sum
/// runs over the same terms in the same order as the library's
/// neighbor-list path; pairs outside the support contribute exact zeros.
pub fn brute_force(variant: Variant, kernel: SmoothingKernel, p: &ParticleSet, field: &[f64], h: f64) -> BruteForce {
    let n = p.len();
    let pos = p.positions();
    let unit_volume = p.volume() / (h * h);
    let radius2 = kernel.support_radius(h).powi(2);
    let mut values = Vec::with_capacity(n);
    let mut fallback = Vec::with_capacity(n);
    for a in 0..n {
        let [xa, ya] = pos[a];
        // (b, xi, eta, [w, wx, wy, wxx, wxy, wyy])
        let mut terms: Vec<(usize, f64, f64, [f64; 6])> = Vec::new();
        for b in 0..n {
            let [xb, yb] = pos[b];
            let (dx, dy) = (xb - xa, yb - ya);
            if dx * dx + dy * dy >= radius2 {
                continue;
            }
            let (xi, eta) = (dx / h, dy / h);
            let d = kernel.derivatives(-xi, -eta, 1.0).unwrap();
            terms.push((b, xi, eta, [d.w, d.wx, d.wy, d.wxx, d.wxy, d.wyy]));
        }
        let standard = || {
            let (mut f, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for (b, _, _, k) in &terms {
                f += field[*b] * k[0];
                gx += field[*b] * k[1];
                gy += field[*b] * k[2];
            }
            [f * unit_volume, gx * unit_volume / h, gy * unit_volume / h, 0.0, 0.0, 0.0]
        };
        let fpm = || -> Option<[f64; 6]> {
            let mut m = [[0.0; 3]; 3];
            let mut rhs = [0.0; 3];
            for (b, xi, eta, k) in &terms {
                let basis = [1.0, *xi, *eta];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] += basis[j] * k[i];
                    }
                    rhs[i] += field[*b] * k[i];
                }
            }
            let y = solve_dense(&m, &rhs, DEFAULT_PIVOT_TOLERANCE).ok()?;
            Some([y[0], y[1] / h, y[2] / h, 0.0, 0.0, 0.0])
        };
        let (v, fell_back) = match variant {
            Variant::Standard => (standard(), false),
            Variant::Cspm => {
                let (mut m0, mut num) = (0.0, 0.0);
                let mut m = [[0.0; 2]; 2];
                let mut rhs = [0.0; 2];
                for (b, xi, eta, k) in &terms {
                    m0 += k[0];
                    num += field[*b] * k[0];
                    let df = field[*b] - field[a];
                    m[0][0] += xi * k[1];
                    m[0][1] += eta * k[1];
                    m[1][0] += xi * k[2];
                    m[1][1] += eta * k[2];
                    rhs[0] += df * k[1];
                    rhs[1] += df * k[2];
                }
                match solve_dense(&m, &rhs, DEFAULT_PIVOT_TOLERANCE) {
                    Ok(g) => ([num / m0, g[0] / h, g[1] / h, 0.0, 0.0, 0.0], false),
                    Err(_) => {
                        let mut s = standard();
                        s[0] = num / m0;
                        (s, true)
                    }
                }
            }
            Variant::Fpm => match fpm() {
                Some(v) => (v, false),
                None => (standard(), true),
            },
            Variant::Msph => {
                let mut m = [[0.0; 6]; 6];
                let mut rhs = [0.0; 6];
                for (b, xi, eta, k) in &terms {
                    let basis = [1.0, *xi, *eta, 0.5 * xi * xi, xi * eta, 0.5 * eta * eta];
                    for i in 0..6 {
                        for j in 0..6 {
                            m[i][j] += basis[j] * k[i];
                        }
                        rhs[i] += field[*b] * k[i];
                    }
                }
                match solve_dense(&m, &rhs, DEFAULT_PIVOT_TOLERANCE) {
                    Ok(y) => {
                        let h2 = h * h;
                        ([y[0], y[1] / h, y[2] / h, y[3] / h2, y[4] / h2, y[5] / h2], false)
                    }
                    Err(_) => (fpm().unwrap_or_else(standard), true),
                }
            }
        };
        values.push(v);
        fallback.push(fell_back);
    }
    BruteForce { values, fallback }
}

pub fn particle_set(n: usize, jitter: Option<(f64, u64)>) -> ParticleSet {
    match jitter {
        Some((a, seed)) => ParticleSet::irregular(n, a, seed).unwrap(),
        None => ParticleSet::regular(n).unwrap(),
    }
}

pub fn sample(p: &ParticleSet, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    p.positions().iter().map(|&[x, y]| f(x, y)).collect()
}

/// Largest relative deviation, `|lib - oracle| / max(1, |oracle|)`, over
/// every scheme and quantity, plus any fallback-flag disagreement.
pub fn oracle_deviation(n: usize, jitter: Option<(f64, u64)>) -> (f64, usize) {
    let p = particle_set(n, jitter);
    let field = sample(&p, |x, y| (3.0 * x).sin() * (2.0 * y).cos() + x * x * y);
    let mut worst = 0.0f64;
    let mut flag_mismatches = 0;
    for kind in SchemeKind::ALL {
        let cfg = kind.config();
        let h = cfg.smoothing_length(n).unwrap();
        let nl = NeighborList::build(&p, cfg.support_radius(h)).unwrap();
        let lib = estimate(&cfg, &field, &p, &nl, h).unwrap();
        let bf = brute_force(cfg.variant, cfg.kernel, &p, &field, h);
        for a in 0..n {
            for q in sphlab_core::Quantity::ALL {
                if let Some(v) = lib.quantity(q) {
                    let o = bf.values[a][q.index()];
                    worst = worst.max((v[a] - o).abs() / o.abs().max(1.0));
                }
            }
            flag_mismatches += (lib.fallback[a] != bf.fallback[a]) as usize;
        }
    }
    (worst, flag_mismatches)
}

/// Seeded jittered sets used by the exactness checks.
pub fn seeded_sets() -> Vec<ParticleSet> {
    (0..20u64)
        .map(|seed| {
            let n = [100, 400, 900][seed as usize % 3];
            ParticleSet::irregular(n, 0.05 + 0.02 * seed as f64, 1000 + seed).unwrap()
        })
        .collect()
}

fn fixed_n(p: &ParticleSet) -> (SmoothingKernel, f64, NeighborList) {
    let cfg = SchemeKind::Sph.config();
    let h = cfg.smoothing_length(p.len()).unwrap();
    let nl = NeighborList::build(p, cfg.support_radius(h)).unwrap();
    (cfg.kernel, h, nl)
}

/// CSPM on a constant field: worst error of `f`, `fx`, `fy`.
pub fn cspm_constant_defect(sets: &[ParticleSet]) -> f64 {
    let mut worst = 0.0f64;
    for p in sets {
        let (k, h, nl) = fixed_n(p);
        let c = 2.75;
        let est = estimate_cspm(k, &vec![c; p.len()], p, &nl, h).unwrap();
        for a in 0..p.len() {
            worst = worst.max((est.f[a] - c).abs()).max(est.fx[a].abs()).max(est.fy[a].abs());
        }
    }
    worst
}

/// FPM on a linear field, every particle included.
pub fn fpm_linear_defect(sets: &[ParticleSet]) -> f64 {
    let mut worst = 0.0f64;
    for p in sets {
        let (k, h, nl) = fixed_n(p);
        let field = sample(p, |x, y| 0.3 - 1.7 * x + 2.2 * y);
        let est = estimate_fpm(k, &field, p, &nl, h).unwrap();
        for a in 0..p.len() {
            worst = worst
                .max((est.f[a] - field[a]).abs())
                .max((est.fx[a] + 1.7).abs())
                .max((est.fy[a] - 2.2).abs());
        }
    }
    worst
}

/// MSPH on a quadratic field, particles farther than the support from
/// every edge.
pub fn msph_quadratic_interior_defect(sets: &[ParticleSet]) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    let quad = |x: f64, y: f64| 1.0 + 0.5 * x - 0.25 * y + 1.5 * x * x - 0.8 * x * y + 0.6 * y * y;
    for p in sets {
        let (k, h, nl) = fixed_n(p);
        let field = sample(p, quad);
        let est = estimate_msph(k, &field, p, &nl, h).unwrap();
        let s = est.second.as_ref().unwrap();
        for a in 0..p.len() {
            if p.edge_distance(a) <= k.support_radius(h) {
                continue;
            }
            let [x, y] = p.position(a);
            let exact = [
                field[a],
                0.5 + 3.0 * x - 0.8 * y,
                -0.25 - 0.8 * x + 1.2 * y,
                3.0,
                -0.8,
                1.2,
            ];
            let got = [est.f[a], est.fx[a], est.fy[a], s.fxx[a], s.fxy[a], s.fyy[a]];
            for (g, e) in got.iter().zip(exact) {
                worst = worst.max((g - e).abs());
            }
            checked += 1;
        }
    }
    (worst, checked)
}

/// Standard SPH of `x + shift` against `estimate(x) + shift * m0`.
pub fn translation_defect(sets: &[ParticleSet]) -> f64 {
    let mut worst = 0.0f64;
    for (i, p) in sets.iter().enumerate() {
        let (k, h, nl) = fixed_n(p);
        let shift = 0.125 + 0.05 * i as f64;
        let x = sample(p, |x, _| x);
        let shifted = sample(p, |x, _| x + shift);
        let base = estimate_standard(k, &x, p, &nl, h).unwrap();
        let moved = estimate_standard(k, &shifted, p, &nl, h).unwrap();
        let m = discrete_moments(p, &nl, k, h).unwrap();
        for a in 0..p.len() {
            worst = worst.max((moved.f[a] - (base.f[a] + shift * m.m0[a])).abs());
            // The error of x itself splits into x_a (m0 - 1) + m1x.
            let [xa, _] = p.position(a);
            worst = worst.max(((base.f[a] - xa) - (xa * (m.m0[a] - 1.0) + m.m1[a][0])).abs());
        }
    }
    worst
}

/// Standard SPH gradient of `v = M x` against `M G` per particle.
pub fn rotation_defect(sets: &[ParticleSet]) -> f64 {
    let mut worst = 0.0f64;
    for (i, p) in sets.iter().enumerate() {
        let (k, h, nl) = fixed_n(p);
        let t = 0.3 * i as f64;
        let m = [[t.cos(), -t.sin()], [t.sin(), t.cos()]];
        let g = discrete_moments(p, &nl, k, h).unwrap().gradient_moment;
        for mrow in &m {
            let v = sample(p, |x, y| mrow[0] * x + mrow[1] * y);
            let est = estimate_standard(k, &v, p, &nl, h).unwrap();
            for a in 0..p.len() {
                let ga = g[a];
                let want_x = mrow[0] * ga[0][0] + mrow[1] * ga[1][0];
                let want_y = mrow[0] * ga[0][1] + mrow[1] * ga[1][1];
                worst = worst.max((est.fx[a] - want_x).abs()).max((est.fy[a] - want_y).abs());
            }
        }
    }
    worst
}
