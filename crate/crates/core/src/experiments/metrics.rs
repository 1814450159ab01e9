use crate::error::{Result, SphError};

/// `sqrt(Σ e² / N)`.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(SphError::TooFewPoints { needed: 1, got: 0 });
    }
    let ss: f64 = errors.iter().map(|e| e * e).sum();
    Ok((ss / errors.len() as f64).sqrt())
}

/// Population standard deviation of the signed errors.
pub fn error_std(errors: &[f64]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(SphError::TooFewPoints {
            needed: 2,
            got: errors.len(),
        });
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let ss: f64 = errors.iter().map(|e| (e - mean) * (e - mean)).sum();
    Ok((ss / n).sqrt())
}

/// Least-squares line through `(log10 x, log10 y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// `log10 y` at `log10 x = 0`.
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(SphError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(SphError::NonPositive { x, y });
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log10(), y.log10())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SphError::InvalidConfig("log-log fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((rmse(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn std_examples() {
        assert_eq!(error_std(&[2.5, 2.5, 2.5]).unwrap(), 0.0);
        assert_eq!(error_std(&[-1.0, 1.0]).unwrap(), 1.0);
        assert!(error_std(&[1.0]).is_err());
    }

    #[test]
    fn slope_examples() {
        let fit = fit_loglog_slope(&[(10.0, 0.1), (100.0, 0.01)]).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-15);
        let flat = fit_loglog_slope(&[(1.0, 5.0), (10.0, 5.0), (100.0, 5.0)]).unwrap();
        assert_eq!(flat.slope, 0.0);
        let pts: Vec<(f64, f64)> = [625.0, 2500.0, 10000.0, 40000.0, 90000.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powf(-1.76)))
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope + 1.76).abs() < 1e-9);
        assert!((fit.intercept - 3.0f64.log10()).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn std_never_exceeds_rmse(sample in proptest::collection::vec(-1e3f64..1e3, 2..64)) {
            let r = rmse(&sample).unwrap();
            let s = error_std(&sample).unwrap();
            prop_assert!(s <= r * (1.0 + 1e-12) + 1e-300);
        }
    }
}
