//! Two-dimensional SPH smoothing kernels.
//!
//! Both kernels are written in terms of `q = r / h` and a radial shape
//! function `f(q)`, with `W(r, h) = sigma / h^2 * f(r / h)`. Derivatives use
//! the radial chain rule with `g(q) = f'(q) / q`:
//!
//! ```text
//! dW/dx       = sigma / h^4 * g(q) * dx
//! d2W/dx2     = sigma / h^4 * (g(q) + q g'(q) ux^2)
//! d2W/dxdy    = sigma / h^4 * q g'(q) ux uy
//! ```
//!
//! where `(ux, uy)` is the unit separation vector. `g` is a polynomial on
//! each branch, so the r -> 0 limits are exact: the gradient vanishes and the
//! Hessian becomes `sigma g(0) / h^4 * I`.

use std::f64::consts::PI;

use crate::error::{Result, SphError};

/// Number of radial panels used by [`SmoothingKernel::continuous_moment`].
pub const RADIAL_PANELS: usize = 100_000;
/// Number of angular panels used by [`SmoothingKernel::continuous_moment`].
pub const ANGULAR_PANELS: usize = 4_096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// Cubic B-spline, support `2h`.
    CubicSpline,
    /// Wendland C4, support `h`.
    WendlandC4,
}

/// A 2D smoothing kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SmoothingKernel {
    family: KernelFamily,
}

/// Kernel value with its first and second spatial derivatives, all taken
/// with respect to the evaluation point (the separation `x_a - x_b`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelDerivatives {
    pub w: f64,
    pub wx: f64,
    pub wy: f64,
    pub wxx: f64,
    pub wxy: f64,
    pub wyy: f64,
}

/// Radial shape data at one `q`: `f`, `g = f'/q` and `q g'`.
#[derive(Debug, Clone, Copy)]
struct Radial {
    f: f64,
    g: f64,
    qgp: f64,
}

impl SmoothingKernel {
    pub const CUBIC_SPLINE: SmoothingKernel = SmoothingKernel {
        family: KernelFamily::CubicSpline,
    };
    pub const WENDLAND_C4: SmoothingKernel = SmoothingKernel {
        family: KernelFamily::WendlandC4,
    };

    pub const fn new(family: KernelFamily) -> Self {
        SmoothingKernel { family }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            KernelFamily::CubicSpline => "cubic-spline",
            KernelFamily::WendlandC4 => "wendland-c4",
        }
    }

    /// Support radius in units of `h`.
    pub fn support_factor(&self) -> f64 {
        match self.family {
            KernelFamily::CubicSpline => 2.0,
            KernelFamily::WendlandC4 => 1.0,
        }
    }

    pub fn support_radius(&self, h: f64) -> f64 {
        self.support_factor() * h
    }

    /// 2D normalization constant `sigma` (the kernel is `sigma / h^2 f(q)`).
    pub fn normalization(&self) -> f64 {
        match self.family {
            KernelFamily::CubicSpline => 15.0 / (7.0 * PI),
            KernelFamily::WendlandC4 => 9.0 / PI,
        }
    }

    #[inline]
    fn radial(&self, q: f64) -> Radial {
        match self.family {
            KernelFamily::CubicSpline => {
                if q < 1.0 {
                    Radial {
                        f: 2.0 / 3.0 - q * q + 0.5 * q * q * q,
                        g: -2.0 + 1.5 * q,
                        qgp: 1.5 * q,
                    }
                } else if q < 2.0 {
                    let t = 2.0 - q;
                    Radial {
                        f: t * t * t / 6.0,
                        g: -0.5 * t * t / q,
                        qgp: (4.0 - q * q) / (2.0 * q),
                    }
                } else {
                    Radial {
                        f: 0.0,
                        g: 0.0,
                        qgp: 0.0,
                    }
                }
            }
            KernelFamily::WendlandC4 => {
                if q < 1.0 {
                    let t = 1.0 - q;
                    let t2 = t * t;
                    let t4 = t2 * t2;
                    let t5 = t4 * t;
                    Radial {
                        f: t5 * t * (1.0 + 6.0 * q + 35.0 / 3.0 * q * q),
                        g: -56.0 / 3.0 * t5 * (1.0 + 5.0 * q),
                        qgp: 560.0 * q * q * t4,
                    }
                } else {
                    Radial {
                        f: 0.0,
                        g: 0.0,
                        qgp: 0.0,
                    }
                }
            }
        }
    }

    /// Kernel value `W(r, h)`; exactly zero for `r >= k h`.
    pub fn value(&self, r: f64, h: f64) -> Result<f64> {
        check_h(h)?;
        if !r.is_finite() {
            return Err(SphError::NonFinite("r"));
        }
        if r < 0.0 {
            return Err(SphError::NegativeDistance(r));
        }
        Ok(self.value_unchecked(r, h))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, r: f64, h: f64) -> f64 {
        let q = r / h;
        self.normalization() / (h * h) * self.radial(q).f
    }

    /// Value, gradient and Hessian of `W` at separation `(dx, dy) = x_a - x_b`.
    pub fn derivatives(&self, dx: f64, dy: f64, h: f64) -> Result<KernelDerivatives> {
        check_h(h)?;
        if !dx.is_finite() || !dy.is_finite() {
            return Err(SphError::NonFinite("separation"));
        }
        Ok(self.derivatives_unchecked(dx, dy, h))
    }

    #[inline]
    pub(crate) fn derivatives_unchecked(&self, dx: f64, dy: f64, h: f64) -> KernelDerivatives {
        let r = (dx * dx + dy * dy).sqrt();
        let q = r / h;
        if q >= self.support_factor() {
            return KernelDerivatives::default();
        }
        let rad = self.radial(q);
        let h2 = h * h;
        let c2 = self.normalization() / h2;
        let c4 = c2 / h2;
        if r == 0.0 {
            return KernelDerivatives {
                w: c2 * rad.f,
                wx: 0.0,
                wy: 0.0,
                wxx: c4 * rad.g,
                wxy: 0.0,
                wyy: c4 * rad.g,
            };
        }
        let ux = dx / r;
        let uy = dy / r;
        KernelDerivatives {
            w: c2 * rad.f,
            wx: c4 * rad.g * dx,
            wy: c4 * rad.g * dy,
            wxx: c4 * (rad.g + rad.qgp * ux * ux),
            wxy: c4 * rad.qgp * ux * uy,
            wyy: c4 * (rad.g + rad.qgp * uy * uy),
        }
    }

    /// Value and gradient only; the fast path for first-order schemes.
    #[inline]
    pub(crate) fn gradient_unchecked(&self, dx: f64, dy: f64, h: f64) -> (f64, f64, f64) {
        let r = (dx * dx + dy * dy).sqrt();
        let q = r / h;
        if q >= self.support_factor() {
            return (0.0, 0.0, 0.0);
        }
        let rad = self.radial(q);
        let h2 = h * h;
        let c2 = self.normalization() / h2;
        let c4 = c2 / h2;
        (c2 * rad.f, c4 * rad.g * dx, c4 * rad.g * dy)
    }

    /// The x-moment `∫∫ (x - x')^l W(|x - x'|, h) dx' dy'` over the plane.
    ///
    /// Evaluated in polar form as the product of an angular midpoint sum of
    /// `cos^l θ` and a radial midpoint sum of `r^(l+1) W(r)` on `[0, k h]`.
    pub fn continuous_moment(&self, l: u32, h: f64) -> Result<f64> {
        check_h(h)?;
        if l > 4 {
            return Err(SphError::UnsupportedMomentOrder(l));
        }
        let dtheta = 2.0 * PI / ANGULAR_PANELS as f64;
        let angular: f64 = (0..ANGULAR_PANELS)
            .map(|i| {
                let theta = (i as f64 + 0.5) * dtheta;
                // (x - x') = -r cos θ
                (-theta.cos()).powi(l as i32)
            })
            .sum::<f64>()
            * dtheta;
        let support = self.support_radius(h);
        let dr = support / RADIAL_PANELS as f64;
        let radial: f64 = (0..RADIAL_PANELS)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                r.powi(l as i32 + 1) * self.value_unchecked(r, h)
            })
            .sum::<f64>()
            * dr;
        Ok(angular * radial)
    }

    /// The same x-moment computed as a 1D integral over `x' - x` in
    /// `[-k h, k h]` of the kernel's marginal, with the marginal itself
    /// integrated by a nested midpoint rule. `panels` applies to both levels.
    pub fn marginal_moment(&self, l: u32, h: f64, panels: usize) -> Result<f64> {
        check_h(h)?;
        if l > 4 {
            return Err(SphError::UnsupportedMomentOrder(l));
        }
        if panels == 0 {
            return Err(SphError::InvalidConfig("marginal_moment needs panels > 0".into()));
        }
        let support = self.support_radius(h);
        let ds = 2.0 * support / panels as f64;
        let mut total = 0.0;
        for i in 0..panels {
            let s = -support + (i as f64 + 0.5) * ds;
            let half = (support * support - s * s).max(0.0).sqrt();
            if half == 0.0 {
                continue;
            }
            let dt = 2.0 * half / panels as f64;
            let mut marginal = 0.0;
            for j in 0..panels {
                let t = -half + (j as f64 + 0.5) * dt;
                marginal += self.value_unchecked((s * s + t * t).sqrt(), h);
            }
            total += (-s).powi(l as i32) * marginal * dt;
        }
        Ok(total * ds)
    }

    /// `|W(h r, h) - W(r, 1) / h^2|`, the defect of the 2D scaling relation.
    pub fn scaling_defect(&self, r: f64, h: f64) -> Result<f64> {
        let scaled = self.value(h * r, h)?;
        let unit = self.value(r, 1.0)?;
        Ok((scaled - unit / (h * h)).abs())
    }
}

fn check_h(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(SphError::InvalidSmoothingLength(h))
    }
}
