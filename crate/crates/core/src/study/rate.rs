//! Log-log least-squares rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};

/// Errors below this are treated as exact and left out of log fits.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Step sizes whose error fell below the noise floor.
    #[serde(default)]
    pub excluded: Vec<f64>,
}

/// Fits `log error = intercept + slope * log eps`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let mut excluded = Vec::new();
    let mut pts = Vec::with_capacity(pairs.len());
    for &(eps, err) in pairs {
        if !(eps > 0.0) {
            return Err(HomogError::Config(format!("rate fit needs positive eps, got {eps}")));
        }
        if err < NOISE_FLOOR {
            excluded.push(eps);
        } else {
            pts.push((eps.ln(), err.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(HomogError::InsufficientPoints { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HomogError::InsufficientPoints { usable: 1 });
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        n_points: pts.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_slopes() {
        let f = fit_rate(&[(0.1, 0.2), (0.05, 0.1)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        let f = fit_rate(&[(0.1, 0.01), (0.01, 0.0001)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn insufficient_points() {
        let err = fit_rate(&[(0.1, 0.2)]).unwrap_err();
        assert!(err.to_string().contains("insufficient points"));
        let err = fit_rate(&[(0.1, 0.0), (0.05, 0.1)]).unwrap_err();
        assert!(matches!(err, HomogError::InsufficientPoints { usable: 1 }));
    }

    #[test]
    fn noise_floor_exclusions_are_recorded() {
        let f = fit_rate(&[(0.2, 0.4), (0.1, 0.2), (0.05, 0.0)]).unwrap();
        assert_eq!(f.excluded, vec![0.05]);
        assert_eq!(f.n_points, 2);
    }
}
