//! Degree-day style gas-price options on the FOU underlying.
//!
//! A put pays `int_{T-S}^T (K - X_s)^+ ds` and a call `int (X_s - K)^+ ds`,
//! both discounted by `exp(-delta (T - t))`. The modified put clips the
//! running payoff by `L / S` per unit time before integrating. Prices are
//! discounted expectations under the model measure; there is no
//! risk-neutral adjustment since gas is not a traded asset.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::fou::{fou_mean, fou_variance, FouParams, FouSimulator, SimGrid};
use crate::quad::GaussLegendre;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Put,
    Call,
    ModifiedPut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub kind: OptionKind,
    /// Gwei.
    pub strike_k: f64,
    /// Gwei x time; only used by the modified put.
    #[serde(default)]
    pub strike_l: f64,
    /// Per unit time.
    #[serde(default)]
    pub discount_delta: f64,
    /// Maturity `T`.
    pub maturity: f64,
    /// Averaging window length `S`, `0 < S <= T`.
    pub window: f64,
    /// Valuation time `t <= T - S`.
    #[serde(default)]
    pub valuation_time: f64,
}

impl OptionSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.strike_k, self.strike_l, self.discount_delta, self.maturity, self.window, self.valuation_time];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(domain("option parameters must be finite"));
        }
        if !(self.window > 0.0 && self.window <= self.maturity) {
            return Err(domain(format!(
                "window {} must satisfy 0 < S <= T = {}",
                self.window, self.maturity
            )));
        }
        if self.discount_delta < 0.0 {
            return Err(domain("discount rate must be non-negative"));
        }
        if self.strike_l < 0.0 {
            return Err(domain("strike L must be non-negative"));
        }
        if self.valuation_time < 0.0 || self.valuation_time > self.maturity - self.window + 1e-12 {
            return Err(domain(format!(
                "valuation time {} must lie in [0, T - S]",
                self.valuation_time
            )));
        }
        Ok(())
    }

    pub fn discount(&self) -> f64 {
        (-self.discount_delta * (self.maturity - self.valuation_time)).exp()
    }

    /// Window bounds measured from the valuation time.
    fn window_from_valuation(&self) -> (f64, f64) {
        let end = self.maturity - self.valuation_time;
        ((end - self.window).max(0.0), end)
    }
}

/// The priced process: parameters, its value at the valuation time, and
/// whether `params` drive the log price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Underlying {
    pub params: FouParams,
    pub x0: f64,
    #[serde(default)]
    pub geometric: bool,
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[(X - k)^+]` for `X ~ N(m, v)`.
pub fn gaussian_call_expectation(m: f64, v: f64, k: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(domain(format!("variance must be non-negative, got {v}")));
    }
    if v == 0.0 {
        return Ok((m - k).max(0.0));
    }
    let sd = v.sqrt();
    let d = (m - k) / sd;
    Ok((m - k) * normal_cdf(d) + sd * normal_pdf(d))
}

/// `E[(k - X)^+]` for `X ~ N(m, v)`.
pub fn gaussian_put_expectation(m: f64, v: f64, k: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(domain(format!("variance must be non-negative, got {v}")));
    }
    if v == 0.0 {
        return Ok((k - m).max(0.0));
    }
    let sd = v.sqrt();
    let d = (m - k) / sd;
    Ok((k - m) * normal_cdf(-d) + sd * normal_pdf(d))
}

pub const TIME_NODES: usize = 32;
pub const CHECK_NODES: usize = 64;
pub const PRECISION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub price: f64,
    /// Same integral with [`CHECK_NODES`] nodes.
    pub refined_price: f64,
    pub precision_warning: bool,
}

fn closed_form_window(spec: &OptionSpec, params: &FouParams, x0: f64, nodes: usize) -> Result<f64> {
    let (a, b) = spec.window_from_valuation();
    let gl = GaussLegendre::new(nodes);
    let mut acc = 0.0;
    for (s, w) in gl.mapped(a, b) {
        let m = fou_mean(params, x0, s)?;
        let v = fou_variance(params, s)?;
        let e = match spec.kind {
            OptionKind::Call => gaussian_call_expectation(m, v, spec.strike_k)?,
            OptionKind::Put => gaussian_put_expectation(m, v, spec.strike_k)?,
            OptionKind::ModifiedPut => {
                return Err(Error::ModelMismatch(
                    "the modified put has no closed form here; use Monte Carlo".into(),
                ))
            }
        };
        acc += w * e;
    }
    Ok(spec.discount() * acc)
}

fn closed_form_inputs(spec: &OptionSpec, underlying: &Underlying) -> Result<FouParams> {
    spec.validate()?;
    underlying.params.validate()?;
    if underlying.geometric {
        return Err(Error::ModelMismatch(
            "Gaussian closed form needs the arithmetic model; price geometric underlyings by Monte Carlo".into(),
        ));
    }
    Ok(underlying.params.shifted(spec.valuation_time))
}

/// Closed-form put or call price with Gauss–Legendre time integration
/// ([`TIME_NODES`] nodes) and a [`CHECK_NODES`]-node consistency check.
pub fn price_degree_day_report(spec: &OptionSpec, underlying: &Underlying) -> Result<ClosedFormReport> {
    let params = closed_form_inputs(spec, underlying)?;
    let price = closed_form_window(spec, &params, underlying.x0, TIME_NODES)?;
    let refined_price = closed_form_window(spec, &params, underlying.x0, CHECK_NODES)?;
    let scale = price.abs().max(refined_price.abs());
    let precision_warning = scale > 0.0 && ((price - refined_price).abs() / scale) > PRECISION_TOLERANCE;
    if precision_warning {
        log::warn!(
            "time quadrature disagreement: {price} with {TIME_NODES} nodes, {refined_price} with {CHECK_NODES}"
        );
    }
    Ok(ClosedFormReport { price, refined_price, precision_warning })
}

pub fn price_degree_day(spec: &OptionSpec, underlying: &Underlying) -> Result<f64> {
    let params = closed_form_inputs(spec, underlying)?;
    closed_form_window(spec, &params, underlying.x0, TIME_NODES)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Euler steps inside the averaging window.
    pub steps_per_window: usize,
    pub exec: Execution,
}

impl MonteCarloConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, steps_per_window: 200, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloPrice {
    pub price: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Monte Carlo price for any option kind and either model variant. Path `i`
/// uses stream `i` of the seed; payoffs are reduced in path order, so the
/// result does not depend on the execution strategy.
pub fn price_monte_carlo(
    spec: &OptionSpec,
    underlying: &Underlying,
    config: &MonteCarloConfig,
) -> Result<MonteCarloPrice> {
    spec.validate()?;
    if config.n_paths < 2 {
        return Err(Error::InsufficientSample(format!(
            "need at least 2 paths for a standard error, got {}",
            config.n_paths
        )));
    }
    if config.steps_per_window == 0 {
        return Err(domain("steps_per_window must be at least 1"));
    }
    let params = underlying.params.shifted(spec.valuation_time);
    let (a, b) = spec.window_from_valuation();
    let dt = spec.window / config.steps_per_window as f64;
    let n_steps = ((b / dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = b / n_steps as f64;
    let sim = FouSimulator::new(&params, underlying.x0, SimGrid::new(n_steps, dt)?, underlying.geometric)?;
    let discount = spec.discount();
    let clip = spec.strike_l / spec.window;
    let k = spec.strike_k;
    let payoff = move |x: f64| match spec.kind {
        OptionKind::Call => (x - k).max(0.0),
        OptionKind::Put => (k - x).max(0.0),
        OptionKind::ModifiedPut => ((k - x).max(0.0) - clip).max(0.0),
    };
    let samples: Vec<f64> = config.exec.map_indexed(config.n_paths, |i| {
        let path = sim.path(config.seed, i as u64);
        let integral = window_integral(&path, dt, a, b, payoff);
        discount * integral.max(0.0)
    });
    let (price, std_error) = stats::mean_and_std_error(&samples);
    Ok(MonteCarloPrice { price, std_error, n_paths: config.n_paths })
}

/// Modified put with strike `L` by Monte Carlo.
pub fn price_modified(spec: &OptionSpec, underlying: &Underlying, config: &MonteCarloConfig) -> Result<MonteCarloPrice> {
    if spec.kind != OptionKind::ModifiedPut {
        return Err(domain("price_modified needs kind = modified_put"));
    }
    price_monte_carlo(spec, underlying, config)
}

/// Trapezoid integral of `f(X)` over `[a, b]` for a path on a uniform grid
/// of spacing `dt` from 0, interpolating the path linearly at the ends.
fn window_integral(path: &[f64], dt: f64, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let value_at = |t: f64| {
        let pos = (t / dt).clamp(0.0, (path.len() - 1) as f64);
        let i = (pos.floor() as usize).min(path.len() - 2);
        let frac = pos - i as f64;
        path[i] + (path[i + 1] - path[i]) * frac
    };
    if b <= a {
        return 0.0;
    }
    let first = (a / dt).ceil() as usize;
    let last = ((b / dt).floor() as usize).min(path.len() - 1);
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(last.saturating_sub(first) + 3);
    knots.push((a, value_at(a)));
    for (i, &x) in path.iter().enumerate().take(last + 1).skip(first) {
        let t = i as f64 * dt;
        if t > a && t < b {
            knots.push((t, x));
        }
    }
    knots.push((b, value_at(b)));
    knots
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (f(w[0].1) + f(w[1].1)))
        .sum()
}

/// Closed-form prices on a grid: `surface[i][j]` prices initial value
/// `x0_grid[i]` at maturity `maturity_grid[j]`, other terms from `template`.
pub fn option_surface(
    params: &FouParams,
    x0_grid: &[f64],
    maturity_grid: &[f64],
    template: &OptionSpec,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    for (name, grid) in [("x0", x0_grid), ("maturity", maturity_grid)] {
        if grid.is_empty() {
            return Err(Error::EmptyInput);
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain(format!("{name} grid must be strictly increasing")));
        }
    }
    let cols = maturity_grid.len();
    let cells = exec.try_map_indexed(x0_grid.len() * cols, |idx| {
        let spec = OptionSpec { maturity: maturity_grid[idx % cols], ..*template };
        let underlying = Underlying { params: params.clone(), x0: x0_grid[idx / cols], geometric: false };
        price_degree_day(&spec, &underlying)
    })?;
    Ok(cells.chunks(cols).map(<[f64]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    fn spec(kind: OptionKind) -> OptionSpec {
        OptionSpec {
            kind,
            strike_k: 3.0,
            strike_l: 0.0,
            discount_delta: 0.0,
            maturity: 2.0,
            window: 2.0,
            valuation_time: 0.0,
        }
    }

    #[test]
    fn gaussian_building_blocks() {
        assert_eq!(gaussian_call_expectation(2.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(gaussian_put_expectation(2.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((gaussian_call_expectation(0.0, 1.0, 0.0).unwrap() - INV_SQRT_2PI).abs() < 1e-15);
        assert!((gaussian_put_expectation(0.0, 1.0, 0.0).unwrap() - INV_SQRT_2PI).abs() < 1e-15);
        let parity = gaussian_call_expectation(3.0, 2.0, 1.0).unwrap()
            - gaussian_put_expectation(3.0, 2.0, 1.0).unwrap();
        assert!((parity - 2.0).abs() < 1e-14);
        // Deep in the money: the call part is below phi(10) ~ 7.7e-23.
        assert!((gaussian_put_expectation(0.0, 1.0, 10.0).unwrap() - 10.0).abs() < 1e-8);
        assert!(gaussian_call_expectation(0.0, -1.0, 0.0).is_err());
        assert!(gaussian_put_expectation(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn deterministic_call() {
        let params = FouParams::constant(0.0, 0.0, 0.0, 0.5).unwrap();
        let u = Underlying { params, x0: 5.0, geometric: false };
        let p = price_degree_day(&spec(OptionKind::Call), &u).unwrap();
        assert!((p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_window() {
        let params = FouParams::constant(0.5, 3.0, 1.0, 0.7).unwrap();
        let u = Underlying { params, x0: 3.0, geometric: false };
        let s = OptionSpec { window: 1e-8, ..spec(OptionKind::Put) };
        assert!(price_degree_day(&s, &u).unwrap().abs() < 1e-6);
    }

    #[test]
    fn model_mismatch_and_validation() {
        let params = FouParams::constant(0.5, 1.0, 0.2, 0.5).unwrap();
        let geo = Underlying { params: params.clone(), x0: 0.0, geometric: true };
        assert!(matches!(price_degree_day(&spec(OptionKind::Call), &geo), Err(Error::ModelMismatch(_))));
        let u = Underlying { params, x0: 0.0, geometric: false };
        let bad = OptionSpec { window: 3.0, ..spec(OptionKind::Call) };
        assert!(price_degree_day(&bad, &u).is_err());
        let late = OptionSpec { valuation_time: 1.0, ..spec(OptionKind::Call) };
        assert!(price_degree_day(&late, &u).is_err());
        assert!(matches!(
            price_degree_day(&spec(OptionKind::ModifiedPut), &u),
            Err(Error::ModelMismatch(_))
        ));
        let cfg = MonteCarloConfig::new(1, 0);
        assert!(matches!(
            price_modified(&spec(OptionKind::ModifiedPut), &u, &cfg),
            Err(Error::InsufficientSample(_))
        ));
    }

    #[test]
    fn valuation_time_restarts_the_process() {
        let params = FouParams::constant(0.4, 2.0, 0.3, 0.5).unwrap();
        let u = Underlying { params, x0: 1.0, geometric: false };
        let at0 = OptionSpec { maturity: 3.0, window: 1.0, ..spec(OptionKind::Call) };
        let at1 = OptionSpec { maturity: 4.0, valuation_time: 1.0, ..at0 };
        let a = price_degree_day(&at0, &u).unwrap();
        let b = price_degree_day(&at1, &u).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn discounting_scales_exactly() {
        let params = FouParams::constant(0.4, 2.0, 0.3, 0.7).unwrap();
        let u = Underlying { params, x0: 1.0, geometric: false };
        let s1 = OptionSpec { discount_delta: 0.05, maturity: 3.0, window: 1.0, ..spec(OptionKind::Call) };
        let s2 = OptionSpec { discount_delta: 0.2, ..s1 };
        let ratio = price_degree_day(&s2, &u).unwrap() / price_degree_day(&s1, &u).unwrap();
        assert!((ratio - (-(0.2 - 0.05) * 3.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn window_integral_matches_linear_payoff() {
        // Path x = t on dt = 0.1; integral of x over [0.25, 0.73] is exact.
        let path: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let v = window_integral(&path, 0.1, 0.25, 0.73, |x| x);
        assert!((v - 0.5 * (0.73f64.powi(2) - 0.25f64.powi(2))).abs() < 1e-14);
    }

    #[test]
    fn modified_with_huge_strike_is_worthless() {
        let params = FouParams::constant(0.5, 3.0, 0.5, 0.5).unwrap();
        let u = Underlying { params, x0: 3.0, geometric: false };
        let s = OptionSpec { strike_l: 1e6, maturity: 1.0, window: 1.0, ..spec(OptionKind::ModifiedPut) };
        let p = price_modified(&s, &u, &MonteCarloConfig::new(200, 3)).unwrap();
        assert_eq!(p.price, 0.0);
        assert_eq!(p.std_error, 0.0);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let params = FouParams::constant(0.5, 3.0, 0.5, 0.7).unwrap();
        let u = Underlying { params, x0: 3.0, geometric: false };
        let s = OptionSpec { strike_l: 0.2, maturity: 1.0, window: 0.5, ..spec(OptionKind::ModifiedPut) };
        let mut cfg = MonteCarloConfig::new(300, 11);
        let a = price_modified(&s, &u, &cfg).unwrap();
        let b = price_modified(&s, &u, &cfg).unwrap();
        cfg.exec = Execution::Sequential;
        let c = price_modified(&s, &u, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn surface_cells_match_standalone_prices() {
        let params = FouParams::constant(0.3, 2.0, 0.4, 0.5).unwrap();
        let template = OptionSpec { maturity: 1.0, window: 0.5, ..spec(OptionKind::Call) };
        let surface = option_surface(&params, &[1.0, 2.0], &[1.0, 2.0, 3.0], &template, Execution::Parallel).unwrap();
        assert_eq!(surface.len(), 2);
        assert_eq!(surface[0].len(), 3);
        let u = Underlying { params: params.clone(), x0: 2.0, geometric: false };
        let standalone = price_degree_day(&OptionSpec { maturity: 3.0, ..template }, &u).unwrap();
        assert_eq!(surface[1][2], standalone);
        assert!(option_surface(&params, &[], &[1.0], &template, Execution::Sequential).is_err());
        assert!(option_surface(&params, &[2.0, 1.0], &[1.0], &template, Execution::Sequential).is_err());
    }
}
