//! Ordinary least squares on `(ln rho, ln value)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::invalid("points", "need at least two points"));
    }
    for (i, &(x, y)) in points.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::invalid("points", format!("point {i} has nonpositive abscissa {x}")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::invalid(
                "points",
                format!("point {i} (rho = {x}) has nonpositive value {y}"),
            ));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "abscissae must not all coincide"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    // a constant series is fitted perfectly by slope 0
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.5, 0.9].iter().map(|&r| (r, r * r)).collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series() {
        let pts = [(0.1, 3.0), (0.4, 3.0), (1.0, 3.0)];
        let fit = fit_loglog_slope(&pts).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn errors_name_the_point() {
        let err = fit_loglog_slope(&[(0.1, 1.0), (0.5, 0.0)]).unwrap_err();
        assert!(err.to_string().contains("point 1"), "{err}");
        assert!(fit_loglog_slope(&[(0.1, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(0.5, 1.0), (0.5, 2.0)]).is_err());
    }

    #[test]
    fn noisy_fit_has_r_squared_below_one() {
        let pts = [(0.1, 0.1), (0.2, 0.25), (0.4, 0.35), (0.8, 0.9)];
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!(fit.r_squared < 1.0 && fit.r_squared > 0.9);
    }
}
