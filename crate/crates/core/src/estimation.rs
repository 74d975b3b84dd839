//! Calibration of the gas-price model from observed series: rescaled-range
//! Hurst estimation and an AR(1) regression for the OU parameters.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fbm::check_hurst;
use crate::fou::FouParams;
use crate::market_data::GasPriceSeries;
use crate::stats::{self, linear_fit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub hurst: f64,
    pub window_sizes: Vec<usize>,
    pub rs_values: Vec<f64>,
    pub r_squared: f64,
}

pub const MIN_HURST_LENGTH: usize = 100;
pub const MIN_WINDOW: usize = 10;

/// Rescaled-range estimate of H for a level series (a path such as a random
/// walk or an fBm sample).
///
/// Each window of `w` consecutive levels contributes `R / S`, with `R` the
/// range of the levels and `S` the sample standard deviation of their
/// increments. Windows run from 10 to `len / 2`, doubling. H is the OLS
/// slope of `ln(R/S)` on `ln(w)`.
pub fn estimate_hurst_rs(values: &[f64]) -> Result<HurstEstimate> {
    if values.len() < MIN_HURST_LENGTH {
        return Err(Error::InsufficientData { needed: MIN_HURST_LENGTH, got: values.len() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(domain("values must be finite"));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Err(Error::DegenerateInput("constant series has zero range".into()));
    }
    let mut window_sizes = Vec::new();
    let mut rs_values = Vec::new();
    let mut w = MIN_WINDOW;
    while w <= values.len() / 2 {
        let rs: Vec<f64> = values
            .chunks_exact(w)
            .filter_map(rescaled_range)
            .collect();
        if !rs.is_empty() {
            window_sizes.push(w);
            rs_values.push(stats::mean(&rs));
        }
        w *= 2;
    }
    if window_sizes.len() < 2 {
        return Err(Error::DegenerateInput("fewer than two usable window sizes".into()));
    }
    let x: Vec<f64> = window_sizes.iter().map(|&w| (w as f64).ln()).collect();
    let y: Vec<f64> = rs_values.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&x, &y).ok_or_else(|| Error::DegenerateInput("window ladder has one size".into()))?;
    check_hurst(fit.slope).map_err(|_| {
        Error::DegenerateInput(format!("rescaled-range slope {} lies outside (0, 1)", fit.slope))
    })?;
    Ok(HurstEstimate { hurst: fit.slope, window_sizes, rs_values, r_squared: fit.r_squared })
}

fn rescaled_range(window: &[f64]) -> Option<f64> {
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let incs: Vec<f64> = window.windows(2).map(|p| p[1] - p[0]).collect();
    let s = stats::sample_variance(&incs).sqrt();
    let r = hi - lo;
    (s > 0.0 && r > 0.0).then(|| r / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReversionRegime {
    MeanReverting,
    /// AR slope at or below 1/2: the half-life is under one step.
    FastReverting,
    /// AR slope at or above 1; kappa is clamped to 0.
    NonMeanReverting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuEstimate {
    /// Per unit time.
    pub kappa: f64,
    /// Long-run level of the regressed series.
    pub mu: f64,
    /// Per-step residual standard deviation.
    pub sigma: f64,
    pub n_obs: usize,
    pub ar_slope: f64,
    pub ar_intercept: f64,
    pub regime: ReversionRegime,
}

/// OLS of `y[i+1]` on `y[i]`: `kappa = (1 - b) / dt`, `mu = a / (1 - b)`,
/// `sigma` the residual standard deviation.
pub fn estimate_ou_ar1(log_values: &[f64], dt: f64) -> Result<OuEstimate> {
    if log_values.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: log_values.len() });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(domain(format!("dt must be positive, got {dt}")));
    }
    if log_values.iter().any(|v| !v.is_finite()) {
        return Err(domain("values must be finite"));
    }
    let x = &log_values[..log_values.len() - 1];
    let y = &log_values[1..];
    let fit = linear_fit(x, y)
        .ok_or_else(|| Error::DegenerateInput("regressor has zero variance".into()))?;
    let b = fit.slope;
    let (kappa, mu, regime) = if b >= 1.0 {
        log::warn!("AR(1) slope {b} >= 1: series is not mean reverting, kappa clamped to 0");
        (0.0, stats::mean(log_values), ReversionRegime::NonMeanReverting)
    } else {
        let regime = if b <= 0.5 {
            ReversionRegime::FastReverting
        } else {
            ReversionRegime::MeanReverting
        };
        ((1.0 - b) / dt, fit.intercept / (1.0 - b), regime)
    };
    Ok(OuEstimate {
        kappa,
        mu,
        sigma: fit.residual_std,
        n_obs: log_values.len(),
        ar_slope: b,
        ar_intercept: fit.intercept,
        regime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Constant-coefficient parameters for the log price. `sigma` is the
    /// per-step residual std divided by `dt^H`, so simulating these
    /// parameters on the same grid reproduces the per-step noise level.
    pub params: FouParams,
    pub hurst: HurstEstimate,
    pub ou: OuEstimate,
}

pub fn calibrate(series: &GasPriceSeries, dt: f64) -> Result<Calibration> {
    calibrate_with(series, dt, None)
}

/// As [`calibrate`], but `fixed_hurst` (when given) replaces the estimated
/// exponent in the assembled parameters.
pub fn calibrate_with(series: &GasPriceSeries, dt: f64, fixed_hurst: Option<f64>) -> Result<Calibration> {
    let prices = series.prices();
    if let Some(p) = prices.iter().find(|&&p| p <= 0.0) {
        return Err(domain(format!("calibration needs positive prices, found {p}")));
    }
    let logs: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
    let ou = estimate_ou_ar1(&logs, dt)?;
    let hurst = estimate_hurst_rs(&logs)?;
    let h = match fixed_hurst {
        Some(h) => {
            check_hurst(h)?;
            h
        }
        None => hurst.hurst,
    };
    let params = FouParams::constant(ou.kappa, ou.mu, ou.sigma / dt.powf(h), h)?;
    Ok(Calibration { params, hurst, ou })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurst_input_errors() {
        assert!(matches!(estimate_hurst_rs(&[1.0; 50]), Err(Error::InsufficientData { .. })));
        assert!(matches!(estimate_hurst_rs(&[1.0; 500]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn hurst_ladder_is_geometric() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 101) as f64).collect();
        let est = estimate_hurst_rs(&v).unwrap();
        assert_eq!(est.window_sizes, vec![10, 20, 40, 80, 160, 320]);
        assert!(est.rs_values.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn ar1_exact_recursion() {
        let mut y = vec![0.0];
        for _ in 1..100 {
            let last = *y.last().unwrap();
            y.push(0.5 + 0.9 * last);
        }
        let est = estimate_ou_ar1(&y, 1.0).unwrap();
        assert!((est.ar_slope - 0.9).abs() < 1e-9);
        assert!((est.kappa - 0.1).abs() < 1e-9);
        assert!((est.mu - 5.0).abs() < 1e-8);
        assert!(est.sigma < 1e-9);
        assert_eq!(est.n_obs, 100);
        assert_eq!(est.regime, ReversionRegime::MeanReverting);
    }

    #[test]
    fn ar1_errors_and_regimes() {
        assert!(matches!(estimate_ou_ar1(&[1.0, 2.0], 1.0), Err(Error::InsufficientData { .. })));
        assert!(matches!(estimate_ou_ar1(&[3.0; 10], 1.0), Err(Error::DegenerateInput(_))));
        assert!(estimate_ou_ar1(&[1.0, 2.0, 3.0], 0.0).is_err());
        let explosive: Vec<f64> = (0..20).map(|i| 1.1f64.powi(i)).collect();
        let est = estimate_ou_ar1(&explosive, 1.0).unwrap();
        assert_eq!(est.regime, ReversionRegime::NonMeanReverting);
        assert_eq!(est.kappa, 0.0);
    }

    #[test]
    fn calibrate_rejects_zero_price() {
        let s = GasPriceSeries::from_values(0, 60, &[1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(calibrate(&s, 1.0), Err(Error::Domain(_))));
    }
}
