use std::f64::consts::PI;

use crate::error::{Result, SphError};
use crate::schemes::Quantity;

/// Analytic test fields on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestField {
    /// `sin(πx) sin(πy)`
    F1,
    /// `x^(5/2) (20y⁵ + 8xy³ + x²y² + 1)`
    F2,
}

impl TestField {
    pub const ALL: [TestField; 2] = [TestField::F1, TestField::F2];

    pub fn name(self) -> &'static str {
        match self {
            TestField::F1 => "f1",
            TestField::F2 => "f2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Some(TestField::F1),
            "f2" => Some(TestField::F2),
            _ => None,
        }
    }

    /// Exact value of `which` at `(x, y)`; rejects points off the unit square.
    pub fn exact(self, which: Quantity, x: f64, y: f64) -> Result<f64> {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(SphError::OutOfDomain { x, y });
        }
        Ok(self.eval(which, x, y))
    }

    /// All six quantities at once, `[f, fx, fy, fxx, fxy, fyy]`.
    pub fn eval_all(self, x: f64, y: f64) -> [f64; 6] {
        match self {
            TestField::F1 => {
                let (sx, cx) = (PI * x).sin_cos();
                let (sy, cy) = (PI * y).sin_cos();
                let p2 = PI * PI;
                [
                    sx * sy,
                    PI * cx * sy,
                    PI * sx * cy,
                    -p2 * sx * sy,
                    p2 * cx * cy,
                    -p2 * sx * sy,
                ]
            }
            TestField::F2 => {
                let sqx = x.sqrt();
                let x15 = x * sqx;
                let x25 = x * x15;
                let (y2, y3) = (y * y, y * y * y);
                let y4 = y2 * y2;
                let y5 = y4 * y;
                let p = 20.0 * y5 + 8.0 * x * y3 + x * x * y2 + 1.0;
                let px = 8.0 * y3 + 2.0 * x * y2;
                let py = 100.0 * y4 + 24.0 * x * y2 + 2.0 * x * x * y;
                let pxx = 2.0 * y2;
                let pxy = 24.0 * y2 + 4.0 * x * y;
                let pyy = 400.0 * y3 + 48.0 * x * y + 2.0 * x * x;
                [
                    x25 * p,
                    2.5 * x15 * p + x25 * px,
                    x25 * py,
                    3.75 * sqx * p + 5.0 * x15 * px + x25 * pxx,
                    2.5 * x15 * py + x25 * pxy,
                    x25 * pyy,
                ]
            }
        }
    }

    pub fn eval(self, which: Quantity, x: f64, y: f64) -> f64 {
        self.eval_all(x, y)[which.index()]
    }
}

/// Free-function form of [`TestField::exact`].
pub fn exact_field(field: TestField, which: Quantity, x: f64, y: f64) -> Result<f64> {
    field.exact(which, x, y)
}
