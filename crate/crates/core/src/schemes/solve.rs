//! Small dense linear systems by Gaussian elimination with partial pivoting.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("singular system: pivot {pivot:e} in column {column} is below {threshold:e}")]
pub struct SingularMatrix {
    pub column: usize,
    pub pivot: f64,
    pub threshold: f64,
}

/// Row-pivoted LU factors of an `N x N` matrix.
#[derive(Debug, Clone)]
pub struct LuFactors<const N: usize> {
    lu: [[f64; N]; N],
    perm: [usize; N],
    norm_inf: f64,
}

impl<const N: usize> LuFactors<N> {
    /// Factors `a`, rejecting it when any pivot magnitude falls below
    /// `pivot_tolerance * max|a_ij|`.
    pub fn factor(a: &[[f64; N]; N], pivot_tolerance: f64) -> Result<Self, SingularMatrix> {
        let max_abs = a
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let norm_inf = a
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let threshold = pivot_tolerance * max_abs;
        let mut lu = *a;
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let mut best = k;
            let mut best_abs = lu[k][k].abs();
            for i in k + 1..N {
                let v = lu[i][k].abs();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            // `!(x > t)` also catches NaN pivots.
            if !(best_abs > threshold) || best_abs == 0.0 {
                return Err(SingularMatrix {
                    column: k,
                    pivot: best_abs,
                    threshold,
                });
            }
            if best != k {
                lu.swap(best, k);
                perm.swap(best, k);
            }
            let pivot = lu[k][k];
            for i in k + 1..N {
                let m = lu[i][k] / pivot;
                lu[i][k] = m;
                if m != 0.0 {
                    for j in k + 1..N {
                        lu[i][j] -= m * lu[k][j];
                    }
                }
            }
        }
        Ok(LuFactors { lu, perm, norm_inf })
    }

    pub fn solve(&self, b: &[f64; N]) -> [f64; N] {
        let mut x = [0.0; N];
        for i in 0..N {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..N).rev() {
            let mut s = x[i];
            for j in i + 1..N {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s / self.lu[i][i];
        }
        x
    }

    /// `‖A‖∞ ‖A⁻¹‖∞`, with the inverse formed column by column.
    pub fn condition_inf(&self) -> f64 {
        let mut row_sums = [0.0f64; N];
        for j in 0..N {
            let mut e = [0.0; N];
            e[j] = 1.0;
            let col = self.solve(&e);
            for (s, v) in row_sums.iter_mut().zip(col) {
                *s += v.abs();
            }
        }
        let inv_norm = row_sums.iter().fold(0.0f64, |m, &v| m.max(v));
        self.norm_inf * inv_norm
    }
}

/// Solves `a x = b`; see [`LuFactors::factor`] for the singularity rule.
pub fn solve_dense<const N: usize>(
    a: &[[f64; N]; N],
    b: &[f64; N],
    pivot_tolerance: f64,
) -> Result<[f64; N], SingularMatrix> {
    Ok(LuFactors::factor(a, pivot_tolerance)?.solve(b))
}
