//! Per-particle field and derivative estimates: standard SPH and the
//! corrective CSPM, FPM and MSPH schemes.
//!
//! Every corrective system is assembled in h-scaled form: offsets
//! `ξ = (x_b - x_a)/h`, test functions are the unit-h kernel and its
//! derivatives evaluated at `(x_a - x_b)/h` (that is `h²W`, `h³∇W`,
//! `h⁴∇∇W`), and the unknowns are `[f, h∇f, h²∇∇f]`. This keeps matrix
//! entries O(1) at every resolution so one relative pivot tolerance works
//! across the whole ladder. Particle volumes are uniform, so `ΔV` cancels
//! from every corrective system and only scales the standard sums.

mod solve;

use rayon::prelude::*;

use crate::error::{Result, SphError};
use crate::kernels::SmoothingKernel;
use crate::particles::{NeighborList, ParticleSet};

pub use solve::{solve_dense, LuFactors, SingularMatrix};

pub const DEFAULT_TARGET_NEIGHBORS: f64 = 13.0;
pub const DEFAULT_PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Standard,
    Cspm,
    Fpm,
    Msph,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborMode {
    /// `h` chosen so an interior particle sees about `target` neighbors.
    FixedN { target: f64 },
    /// `h = N^(-1/6)`, the neighbor count grows with `N`.
    ScaledN,
}

/// The estimated quantities, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    F,
    Fx,
    Fy,
    Fxx,
    Fxy,
    Fyy,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::F,
        Quantity::Fx,
        Quantity::Fy,
        Quantity::Fxx,
        Quantity::Fxy,
        Quantity::Fyy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::F => "f",
            Quantity::Fx => "fx",
            Quantity::Fy => "fy",
            Quantity::Fxx => "fxx",
            Quantity::Fxy => "fxy",
            Quantity::Fyy => "fyy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == s)
    }

    pub fn is_second_order(self) -> bool {
        self.index() >= 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub kernel: SmoothingKernel,
    pub neighbor_mode: NeighborMode,
    pub pivot_tolerance: f64,
}

impl SchemeConfig {
    /// Fixed-n runs default to the cubic spline, scaled-n runs to Wendland C4.
    pub fn new(variant: Variant, neighbor_mode: NeighborMode) -> Result<Self> {
        if variant == Variant::Msph && neighbor_mode == NeighborMode::ScaledN {
            return Err(SphError::InvalidConfig(
                "MSPH is only available with a fixed neighbor count".into(),
            ));
        }
        if let NeighborMode::FixedN { target } = neighbor_mode {
            if !(target.is_finite() && target > 0.0) {
                return Err(SphError::InvalidConfig(format!("target neighbor count {target}")));
            }
        }
        let kernel = match neighbor_mode {
            NeighborMode::FixedN { .. } => SmoothingKernel::CUBIC_SPLINE,
            NeighborMode::ScaledN => SmoothingKernel::WENDLAND_C4,
        };
        Ok(SchemeConfig {
            variant,
            kernel,
            neighbor_mode,
            pivot_tolerance: DEFAULT_PIVOT_TOLERANCE,
        })
    }

    pub fn with_kernel(mut self, kernel: SmoothingKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_pivot_tolerance(mut self, tol: f64) -> Self {
        self.pivot_tolerance = tol;
        self
    }

    pub fn smoothing_length(&self, n: usize) -> Result<f64> {
        smoothing_length_for(n, self)
    }

    pub fn support_radius(&self, h: f64) -> f64 {
        self.kernel.support_radius(h)
    }
}

/// Smoothing length for an `n`-particle run.
///
/// Fixed-n inverts the interior disk count `π (k h)² N = target`.
pub fn smoothing_length_for(n: usize, config: &SchemeConfig) -> Result<f64> {
    if n < 4 {
        return Err(SphError::InvalidConfig(format!("need N >= 4, got {n}")));
    }
    let n = n as f64;
    Ok(match config.neighbor_mode {
        NeighborMode::ScaledN => n.powf(-1.0 / 6.0),
        NeighborMode::FixedN { target } => {
            (target / (std::f64::consts::PI * n)).sqrt() / config.kernel.support_factor()
        }
    })
}

/// The seven scheme columns of the convergence tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Sph,
    Cspm,
    Fpm,
    Msph,
    SphN,
    CspmN,
    FpmN,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::Sph,
        SchemeKind::Cspm,
        SchemeKind::Fpm,
        SchemeKind::Msph,
        SchemeKind::SphN,
        SchemeKind::CspmN,
        SchemeKind::FpmN,
    ];

    /// Table column label, e.g. `CSPMn`.
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Sph => "SPH",
            SchemeKind::Cspm => "CSPM",
            SchemeKind::Fpm => "FPM",
            SchemeKind::Msph => "MSPH",
            SchemeKind::SphN => "SPHn",
            SchemeKind::CspmN => "CSPMn",
            SchemeKind::FpmN => "FPMn",
        }
    }

    /// Lower-case command-line name, e.g. `cspmn`.
    pub fn cli_name(self) -> &'static str {
        match self {
            SchemeKind::Sph => "sph",
            SchemeKind::Cspm => "cspm",
            SchemeKind::Fpm => "fpm",
            SchemeKind::Msph => "msph",
            SchemeKind::SphN => "sphn",
            SchemeKind::CspmN => "cspmn",
            SchemeKind::FpmN => "fpmn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.cli_name() == lower)
    }

    pub fn variant(self) -> Variant {
        match self {
            SchemeKind::Sph | SchemeKind::SphN => Variant::Standard,
            SchemeKind::Cspm | SchemeKind::CspmN => Variant::Cspm,
            SchemeKind::Fpm | SchemeKind::FpmN => Variant::Fpm,
            SchemeKind::Msph => Variant::Msph,
        }
    }

    pub fn is_scaled(self) -> bool {
        matches!(self, SchemeKind::SphN | SchemeKind::CspmN | SchemeKind::FpmN)
    }

    pub fn config(self) -> SchemeConfig {
        let mode = if self.is_scaled() {
            NeighborMode::ScaledN
        } else {
            NeighborMode::FixedN {
                target: DEFAULT_TARGET_NEIGHBORS,
            }
        };
        SchemeConfig::new(self.variant(), mode).expect("built-in scheme configs are valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    pub fxx: Vec<f64>,
    pub fxy: Vec<f64>,
    pub fyy: Vec<f64>,
}

/// Per-particle estimates produced by one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeEstimate {
    pub f: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    /// Present only for MSPH.
    pub second: Option<SecondDerivatives>,
    /// Particles whose corrective system was singular.
    pub fallback: Vec<bool>,
    pub fallback_count: usize,
    /// Largest ∞-norm condition number among the scaled corrective
    /// matrices (infinite when one was singular); `None` for standard SPH.
    pub max_condition: Option<f64>,
}

impl SchemeEstimate {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn quantity(&self, q: Quantity) -> Option<&[f64]> {
        match q {
            Quantity::F => Some(&self.f),
            Quantity::Fx => Some(&self.fx),
            Quantity::Fy => Some(&self.fy),
            Quantity::Fxx => self.second.as_ref().map(|s| s.fxx.as_slice()),
            Quantity::Fxy => self.second.as_ref().map(|s| s.fxy.as_slice()),
            Quantity::Fyy => self.second.as_ref().map(|s| s.fyy.as_slice()),
        }
    }

    pub(crate) fn assemble(variant: Variant, parts: Vec<ParticleEstimate>) -> Self {
        let n = parts.len();
        let mut out = SchemeEstimate {
            f: Vec::with_capacity(n),
            fx: Vec::with_capacity(n),
            fy: Vec::with_capacity(n),
            second: (variant == Variant::Msph).then(|| SecondDerivatives {
                fxx: Vec::with_capacity(n),
                fxy: Vec::with_capacity(n),
                fyy: Vec::with_capacity(n),
            }),
            fallback: Vec::with_capacity(n),
            fallback_count: 0,
            max_condition: (variant != Variant::Standard).then_some(0.0),
        };
        for p in parts {
            out.f.push(p.values[0]);
            out.fx.push(p.values[1]);
            out.fy.push(p.values[2]);
            if let Some(s) = out.second.as_mut() {
                s.fxx.push(p.values[3]);
                s.fxy.push(p.values[4]);
                s.fyy.push(p.values[5]);
            }
            out.fallback.push(p.fallback);
            out.fallback_count += p.fallback as usize;
            if let Some(c) = out.max_condition.as_mut() {
                *c = c.max(p.condition);
            }
        }
        out
    }
}

/// Unit-h kernel data for one neighbor `b` of the particle being estimated.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Pair {
    pub b: u32,
    pub xi: f64,
    pub eta: f64,
    pub w: f64,
    pub wx: f64,
    pub wy: f64,
    pub wxx: f64,
    pub wxy: f64,
    pub wyy: f64,
}

/// Fills `out` with the unit-h kernel data of particle `a`'s neighbors.
/// Second derivatives are computed only when `second` is set.
pub(crate) fn fill_pairs(
    kernel: SmoothingKernel,
    particles: &ParticleSet,
    a: usize,
    neighbors: &[u32],
    h: f64,
    second: bool,
    out: &mut Vec<Pair>,
) {
    out.clear();
    let pos = particles.positions();
    let [xa, ya] = pos[a];
    for &b in neighbors {
        let [xb, yb] = pos[b as usize];
        let xi = (xb - xa) / h;
        let eta = (yb - ya) / h;
        let pair = if second {
            let d = kernel.derivatives_unchecked(-xi, -eta, 1.0);
            Pair {
                b,
                xi,
                eta,
                w: d.w,
                wx: d.wx,
                wy: d.wy,
                wxx: d.wxx,
                wxy: d.wxy,
                wyy: d.wyy,
            }
        } else {
            let (w, wx, wy) = kernel.gradient_unchecked(-xi, -eta, 1.0);
            Pair {
                b,
                xi,
                eta,
                w,
                wx,
                wy,
                ..Pair::default()
            }
        };
        out.push(pair);
    }
}

/// One particle's result: `[f, fx, fy, fxx, fxy, fyy]` plus diagnostics.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParticleEstimate {
    pub values: [f64; 6],
    pub fallback: bool,
    pub condition: f64,
}

/// Geometry shared by all estimates at one particle.
pub(crate) struct Stencil<'a> {
    pub pairs: &'a [Pair],
    /// `ΔV / h²`, the particle volume in unit-h coordinates.
    pub unit_volume: f64,
    pub h: f64,
}

pub(crate) fn estimate_particle(
    variant: Variant,
    stencil: &Stencil<'_>,
    field: &[f64],
    f_a: f64,
    pivot_tolerance: f64,
) -> ParticleEstimate {
    match variant {
        Variant::Standard => standard(stencil, field),
        Variant::Cspm => cspm(stencil, field, f_a, pivot_tolerance),
        Variant::Fpm => fpm(stencil, field, pivot_tolerance),
        Variant::Msph => msph(stencil, field, pivot_tolerance),
    }
}

fn standard(s: &Stencil<'_>, field: &[f64]) -> ParticleEstimate {
    let (mut f, mut gx, mut gy) = (0.0, 0.0, 0.0);
    for p in s.pairs {
        let fb = field[p.b as usize];
        f += fb * p.w;
        gx += fb * p.wx;
        gy += fb * p.wy;
    }
    let v = s.unit_volume;
    ParticleEstimate {
        values: [f * v, gx * v / s.h, gy * v / s.h, 0.0, 0.0, 0.0],
        fallback: false,
        condition: 0.0,
    }
}

fn cspm(s: &Stencil<'_>, field: &[f64], f_a: f64, tol: f64) -> ParticleEstimate {
    let (mut m0, mut num) = (0.0, 0.0);
    let mut a = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for p in s.pairs {
        let fb = field[p.b as usize];
        m0 += p.w;
        num += fb * p.w;
        let df = fb - f_a;
        a[0][0] += p.xi * p.wx;
        a[0][1] += p.eta * p.wx;
        a[1][0] += p.xi * p.wy;
        a[1][1] += p.eta * p.wy;
        rhs[0] += df * p.wx;
        rhs[1] += df * p.wy;
    }
    let f = num / m0;
    match LuFactors::factor(&a, tol) {
        Ok(lu) => {
            let g = lu.solve(&rhs);
            ParticleEstimate {
                values: [f, g[0] / s.h, g[1] / s.h, 0.0, 0.0, 0.0],
                fallback: false,
                condition: lu.condition_inf(),
            }
        }
        Err(_) => {
            let mut est = standard(s, field);
            est.values[0] = f;
            est.fallback = true;
            est.condition = f64::INFINITY;
            est
        }
    }
}

fn fpm(s: &Stencil<'_>, field: &[f64], tol: f64) -> ParticleEstimate {
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for p in s.pairs {
        let fb = field[p.b as usize];
        let phi = [p.w, p.wx, p.wy];
        let basis = [1.0, p.xi, p.eta];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += basis[j] * phi[i];
            }
            rhs[i] += fb * phi[i];
        }
    }
    match LuFactors::factor(&a, tol) {
        Ok(lu) => {
            let y = lu.solve(&rhs);
            ParticleEstimate {
                values: [y[0], y[1] / s.h, y[2] / s.h, 0.0, 0.0, 0.0],
                fallback: false,
                condition: lu.condition_inf(),
            }
        }
        Err(_) => {
            let mut est = standard(s, field);
            est.fallback = true;
            est.condition = f64::INFINITY;
            est
        }
    }
}

fn msph(s: &Stencil<'_>, field: &[f64], tol: f64) -> ParticleEstimate {
    let mut a = [[0.0; 6]; 6];
    let mut rhs = [0.0; 6];
    for p in s.pairs {
        let fb = field[p.b as usize];
        let phi = [p.w, p.wx, p.wy, p.wxx, p.wxy, p.wyy];
        let basis = [
            1.0,
            p.xi,
            p.eta,
            0.5 * p.xi * p.xi,
            p.xi * p.eta,
            0.5 * p.eta * p.eta,
        ];
        for i in 0..6 {
            for j in 0..6 {
                a[i][j] += basis[j] * phi[i];
            }
            rhs[i] += fb * phi[i];
        }
    }
    match LuFactors::factor(&a, tol) {
        Ok(lu) => {
            let y = lu.solve(&rhs);
            let h = s.h;
            let h2 = h * h;
            ParticleEstimate {
                values: [y[0], y[1] / h, y[2] / h, y[3] / h2, y[4] / h2, y[5] / h2],
                fallback: false,
                condition: lu.condition_inf(),
            }
        }
        Err(_) => {
            let mut est = fpm(s, field, tol);
            est.fallback = true;
            est.condition = f64::INFINITY;
            est
        }
    }
}

fn check_inputs(field: &[f64], particles: &ParticleSet, neighbors: &NeighborList, kernel: SmoothingKernel, h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(SphError::InvalidSmoothingLength(h));
    }
    if field.len() != particles.len() {
        return Err(SphError::FieldLength {
            expected: particles.len(),
            got: field.len(),
        });
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
    Ok(())
}

/// Runs `config`'s scheme on a sampled field over a prebuilt neighbor list.
pub fn estimate(
    config: &SchemeConfig,
    field: &[f64],
    particles: &ParticleSet,
    neighbors: &NeighborList,
    h: f64,
) -> Result<SchemeEstimate> {
    check_inputs(field, particles, neighbors, config.kernel, h)?;
    let second = config.variant == Variant::Msph;
    let unit_volume = particles.volume() / (h * h);
    let parts: Vec<ParticleEstimate> = (0..particles.len())
        .into_par_iter()
        .map_init(Vec::new, |pairs, a| {
            fill_pairs(config.kernel, particles, a, neighbors.neighbors(a), h, second, pairs);
            let stencil = Stencil {
                pairs,
                unit_volume,
                h,
            };
            estimate_particle(config.variant, &stencil, field, field[a], config.pivot_tolerance)
        })
        .collect();
    Ok(SchemeEstimate::assemble(config.variant, parts))
}

fn with_variant(variant: Variant, kernel: SmoothingKernel) -> SchemeConfig {
    SchemeConfig {
        variant,
        kernel,
        neighbor_mode: NeighborMode::FixedN {
            target: DEFAULT_TARGET_NEIGHBORS,
        },
        pivot_tolerance: DEFAULT_PIVOT_TOLERANCE,
    }
}

/// `f_a = Σ f_b W_ab ΔV`, `∇f_a = Σ f_b ∇_a W_ab ΔV`.
pub fn estimate_standard(
    kernel: SmoothingKernel,
    field: &[f64],
    particles: &ParticleSet,
    neighbors: &NeighborList,
    h: f64,
) -> Result<SchemeEstimate> {
    estimate(&with_variant(Variant::Standard, kernel), field, particles, neighbors, h)
}

/// Shepard-normalized function plus a coupled 2x2 first-order gradient
/// system built on the sampled value `f_a`.
pub fn estimate_cspm(
    kernel: SmoothingKernel,
    field: &[f64],
    particles: &ParticleSet,
    neighbors: &NeighborList,
    h: f64,
) -> Result<SchemeEstimate> {
    estimate(&with_variant(Variant::Cspm, kernel), field, particles, neighbors, h)
}

/// Simultaneous 3x3 system for `f` and `∇f` with test functions `W, ∇W`.
pub fn estimate_fpm(
    kernel: SmoothingKernel,
    field: &[f64],
    particles: &ParticleSet,
    neighbors: &NeighborList,
    h: f64,
) -> Result<SchemeEstimate> {
    estimate(&with_variant(Variant::Fpm, kernel), field, particles, neighbors, h)
}

/// 6x6 second-order Taylor system with test functions `W, ∇W, ∇∇W`.
/// Singular particles fall back to FPM (second derivatives zero).
pub fn estimate_msph(
    kernel: SmoothingKernel,
    field: &[f64],
    particles: &ParticleSet,
    neighbors: &NeighborList,
    h: f64,
) -> Result<SchemeEstimate> {
    estimate(&with_variant(Variant::Msph, kernel), field, particles, neighbors, h)
}
