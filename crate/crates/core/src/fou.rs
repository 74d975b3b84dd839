//! Fractional Ornstein–Uhlenbeck gas-price process
//! `dX = kappa (theta - X) dt + sigma dW^H` with piecewise-constant
//! coefficients: closed-form moments and Euler–Maruyama simulation.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::fbm::{check_hurst, fgn_autocovariance, FbmMethod, FgnGenerator};
use crate::quad::GaussLegendre;
use crate::stats;

/// Right-continuous step function on `[0, inf)`: `values[0]` on
/// `[0, breaks[0])`, `values[i]` on `[breaks[i-1], breaks[i])`, the last
/// value on `[breaks.last(), inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(value: f64) -> Self {
        Self { breaks: Vec::new(), values: vec![value] }
    }

    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::Shape(format!(
                "{} breakpoints need {} values, got {}",
                breaks.len(),
                breaks.len() + 1,
                values.len()
            )));
        }
        if breaks.first().is_some_and(|&b| b <= 0.0) || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("breakpoints must be positive and strictly increasing"));
        }
        if values.iter().chain(&breaks).any(|v| !v.is_finite()) {
            return Err(domain("coefficients must be finite"));
        }
        Ok(Self { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.breaks.is_empty()
    }

    pub fn at(&self, t: f64) -> f64 {
        self.values[self.breaks.partition_point(|&b| b <= t)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The same function seen from time `t0`: `g(s) = f(t0 + s)`.
    pub fn shifted(&self, t0: f64) -> Self {
        let first = self.breaks.partition_point(|&b| b <= t0);
        Self {
            breaks: self.breaks[first..].iter().map(|b| b - t0).collect(),
            values: self.values[first..].to_vec(),
        }
    }

    /// Breakpoints strictly inside `(a, b)`.
    fn interior_breaks(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.breaks.iter().copied().filter(move |&x| x > a && x < b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FouParams {
    pub kappa: PiecewiseConstant,
    pub theta: PiecewiseConstant,
    pub sigma: PiecewiseConstant,
    pub hurst: f64,
}

impl FouParams {
    pub fn new(
        kappa: PiecewiseConstant,
        theta: PiecewiseConstant,
        sigma: PiecewiseConstant,
        hurst: f64,
    ) -> Result<Self> {
        let p = Self { kappa, theta, sigma, hurst };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(kappa: f64, theta: f64, sigma: f64, hurst: f64) -> Result<Self> {
        Self::new(
            PiecewiseConstant::constant(kappa),
            PiecewiseConstant::constant(theta),
            PiecewiseConstant::constant(sigma),
            hurst,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if self.kappa.min() < 0.0 {
            return Err(domain("kappa must be non-negative"));
        }
        if self.sigma.min() < 0.0 {
            return Err(domain("sigma must be non-negative"));
        }
        Ok(())
    }

    /// Parameters of the process restarted at time `t0`.
    pub fn shifted(&self, t0: f64) -> Self {
        Self {
            kappa: self.kappa.shifted(t0),
            theta: self.theta.shifted(t0),
            sigma: self.sigma.shifted(t0),
            hurst: self.hurst,
        }
    }

    /// Union of all coefficient breakpoints in `(0, t)`, sorted, with the
    /// end points included.
    fn segments(&self, t: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = std::iter::once(0.0)
            .chain(self.kappa.interior_breaks(0.0, t))
            .chain(self.theta.interior_breaks(0.0, t))
            .chain(self.sigma.interior_breaks(0.0, t))
            .chain(std::iter::once(t))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `int_0^t kappa_s ds`.
    fn kappa_integral(&self, t: f64) -> f64 {
        let k = &self.kappa;
        let mut acc = 0.0;
        let mut lo = 0.0;
        for (i, &b) in k.breaks.iter().enumerate() {
            if b >= t {
                return acc + k.values[i] * (t - lo);
            }
            acc += k.values[i] * (b - lo);
            lo = b;
        }
        acc + k.values[k.values.len() - 1] * (t - lo)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("time must be non-negative, got {t}")))
    }
}

/// `K_t = exp(-int_0^t kappa_s ds)`, exact for piecewise-constant kappa.
pub fn integrating_factor(params: &FouParams, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok((-params.kappa_integral(t)).exp())
}

/// `m_t = x0 K_t + K_t int_0^t kappa_s theta_s K_s^{-1} ds`, integrated
/// exactly segment by segment.
pub fn fou_mean(params: &FouParams, x0: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let total = params.kappa_integral(t);
    let mut acc = x0 * (-total).exp();
    let pts = params.segments(t);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if params.kappa.at(mid) == 0.0 {
            continue;
        }
        let theta = params.theta.at(mid);
        // kappa theta int_a^b e^{I(s) - I(t)} ds with I linear on [a, b].
        let ea = (params.kappa_integral(a) - total).exp();
        let eb = (params.kappa_integral(b) - total).exp();
        acc += theta * (eb - ea);
    }
    Ok(acc)
}

/// Default grid size for the covariance quadratic form used when H < 1/2.
pub const ROUGH_VARIANCE_STEPS: usize = 2048;

/// `Var[X_t]`.
///
/// H = 1/2 is integrated exactly per segment. H > 1/2 uses the kernel
/// `H(2H-1)|u-s|^{2H-2}` double integral, folded onto `s < u` and mapped so
/// the diagonal singularity disappears, on Gauss–Legendre panels split at
/// every coefficient breakpoint. H < 1/2 falls back to the fGn covariance
/// quadratic form on a grid of [`ROUGH_VARIANCE_STEPS`] steps.
pub fn fou_variance(params: &FouParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let h = params.hurst;
    if h == 0.5 {
        Ok(variance_brownian(params, t))
    } else if h > 0.5 {
        Ok(variance_kernel(params, t, kernel_rule()))
    } else {
        fou_variance_on_grid(params, t, ROUGH_VARIANCE_STEPS)
    }
}

fn variance_brownian(params: &FouParams, t: f64) -> f64 {
    let total = params.kappa_integral(t);
    let pts = params.segments(t);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let (kappa, sigma) = (params.kappa.at(mid), params.sigma.at(mid));
        let lead = (2.0 * (params.kappa_integral(a) - total)).exp();
        let len = b - a;
        let integral = if kappa == 0.0 {
            len
        } else {
            (2.0 * kappa * len).exp_m1() / (2.0 * kappa)
        };
        acc += sigma * sigma * lead * integral;
    }
    acc
}

/// Composite Gauss–Legendre rule used per smooth piece: 8 panels of 8 nodes,
/// mapped to [0, 1].
struct KernelRule {
    nodes: Vec<(f64, f64)>,
}

impl KernelRule {
    fn new(panels: usize, order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let h = 1.0 / panels as f64;
        let nodes = (0..panels)
            .flat_map(|p| {
                let lo = p as f64 * h;
                gl.mapped(lo, lo + h).collect::<Vec<_>>()
            })
            .collect();
        Self { nodes }
    }

    fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes.iter().map(|&(x, w)| w * len * f(a + len * x)).sum()
    }
}

fn kernel_rule() -> &'static KernelRule {
    static RULE: OnceLock<KernelRule> = OnceLock::new();
    RULE.get_or_init(|| KernelRule::new(8, 8))
}

/// H > 1/2. With `g(s) = sigma_s K_t / K_s` and `a = 2H - 1`,
/// `V = 2H int_0^t g(u) u^a J(u) du`, `J(u) = int_0^1 g(u (1 - w^{1/a})) dw`.
fn variance_kernel(params: &FouParams, t: f64, rule: &KernelRule) -> f64 {
    let h = params.hurst;
    let a = 2.0 * h - 1.0;
    let total = params.kappa_integral(t);
    let g = |s: f64| params.sigma.at(s) * (params.kappa_integral(s) - total).exp();
    let pts = params.segments(t);

    let j = |u: f64| -> f64 {
        // s = u (1 - w^{1/a}) is decreasing in w; split where s crosses a breakpoint.
        let mut ws: Vec<f64> = pts
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < u)
            .map(|b| (1.0 - b / u).powf(a))
            .collect();
        ws.push(0.0);
        ws.push(1.0);
        ws.sort_by(f64::total_cmp);
        ws.windows(2)
            .map(|w| rule.integrate(w[0], w[1], |x| g(u * (1.0 - x.powf(1.0 / a)))))
            .sum()
    };

    // Past every breakpoint the integrand behaves like c0 + c1 (u - lo)^a;
    // u = lo + L v^4 makes both terms smooth in v.
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let (lo, len) = (w[0], w[1] - w[0]);
        acc += rule.integrate(0.0, 1.0, |v| {
            let v3 = v * v * v;
            let u = lo + len * v3 * v;
            4.0 * len * v3 * g(u) * u.powf(a) * j(u)
        });
    }
    2.0 * h * acc
}

/// `Var[X_t]` as the quadratic form `w' Gamma w dt^{2H}` over the fGn
/// covariance on an `n_steps` grid, with weights `sigma K_t / K` taken at
/// step midpoints. Valid for every H; converges as the grid is refined.
pub fn fou_variance_on_grid(params: &FouParams, t: f64, n_steps: usize) -> Result<f64> {
    check_time(t)?;
    if n_steps == 0 {
        return Err(domain("n_steps must be at least 1"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let dt = t / n_steps as f64;
    let total = params.kappa_integral(t);
    let weights: Vec<f64> = (0..n_steps)
        .map(|i| {
            let m = (i as f64 + 0.5) * dt;
            params.sigma.at(m) * (params.kappa_integral(m) - total).exp()
        })
        .collect();
    let gamma: Vec<f64> = (0..n_steps).map(|k| fgn_autocovariance(k, params.hurst)).collect();
    let mut acc = 0.0;
    for i in 0..n_steps {
        let mut row = gamma[0] * weights[i];
        for j in 0..i {
            row += 2.0 * gamma[i - j] * weights[j];
        }
        acc += weights[i] * row;
    }
    Ok(acc * dt.powf(2.0 * params.hurst))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub n_steps: usize,
    pub dt: f64,
}

impl SimGrid {
    pub fn new(n_steps: usize, dt: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(domain("n_steps must be at least 1"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(domain(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { n_steps, dt })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| i as f64 * self.dt).collect()
    }
}

/// Euler–Maruyama stepper with coefficients frozen at the left end of each
/// step. Reusable across paths; path `i` is drawn from stream `i`.
#[derive(Debug)]
pub struct FouSimulator {
    drift_rate: Vec<f64>,
    level: Vec<f64>,
    vol: Vec<f64>,
    dt: f64,
    x0: f64,
    geometric: bool,
    noise: FgnGenerator,
}

impl FouSimulator {
    /// `x0` is the initial state of the driving process; for the geometric
    /// variant that is the initial log price.
    pub fn new(params: &FouParams, x0: f64, grid: SimGrid, geometric: bool) -> Result<Self> {
        params.validate()?;
        SimGrid::new(grid.n_steps, grid.dt)?;
        if !x0.is_finite() {
            return Err(domain("initial value must be finite"));
        }
        let t = |i: usize| i as f64 * grid.dt;
        let noise = FgnGenerator::new(params.hurst, grid.n_steps, grid.dt, FbmMethod::auto(grid.n_steps))?;
        Ok(Self {
            drift_rate: (0..grid.n_steps).map(|i| params.kappa.at(t(i))).collect(),
            level: (0..grid.n_steps).map(|i| params.theta.at(t(i))).collect(),
            vol: (0..grid.n_steps).map(|i| params.sigma.at(t(i))).collect(),
            dt: grid.dt,
            x0,
            geometric,
            noise,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.drift_rate.len()
    }

    pub fn path(&self, seed: u64, stream: u64) -> Vec<f64> {
        let dw = self.noise.increments(seed, stream);
        let mut path = Vec::with_capacity(dw.len() + 1);
        let mut x = self.x0;
        path.push(x);
        for (i, d) in dw.iter().enumerate() {
            x += self.drift_rate[i] * (self.level[i] - x) * self.dt + self.vol[i] * d;
            path.push(x);
        }
        if self.geometric {
            path.iter_mut().for_each(|v| *v = v.exp());
        }
        path
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FouPathSet {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    pub geometric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FouSummary {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl FouPathSet {
    /// Cross-sectional sample mean and (unbiased) variance at every grid time.
    pub fn summary(&self) -> FouSummary {
        let (mean, variance) = (0..self.times.len())
            .map(|i| {
                let col: Vec<f64> = self.paths.iter().map(|p| p[i]).collect();
                (stats::mean(&col), stats::sample_variance(&col))
            })
            .unzip();
        FouSummary { times: self.times.clone(), mean, variance }
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[index]).collect()
    }
}

pub fn simulate_fou(
    params: &FouParams,
    x0: f64,
    grid: SimGrid,
    n_paths: usize,
    seed: u64,
    geometric: bool,
    exec: Execution,
) -> Result<FouPathSet> {
    if n_paths == 0 {
        return Err(domain("n_paths must be at least 1"));
    }
    let sim = FouSimulator::new(params, x0, grid, geometric)?;
    Ok(FouPathSet {
        times: grid.times(),
        paths: exec.map_indexed(n_paths, |i| sim.path(seed, i as u64)),
        geometric,
    })
}
