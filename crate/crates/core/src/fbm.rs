//! Fractional Brownian motion: covariance, exact path sampling and a
//! self-affinity diagnostic.
//!
//! Paths are generated from fractional Gaussian noise (the stationary
//! increments of fBm) either by circulant embedding (Davies–Harte) or by a
//! dense Cholesky factor of the increment covariance. Increments on a grid
//! of spacing `dt` are unit-grid noise scaled by `dt^H`.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::rng::{stream_rng, StreamRng};

/// Negative circulant eigenvalues down to this value are rounding noise.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    DaviesHarte,
    Cholesky,
}

impl FbmMethod {
    /// Davies–Harte for grids of 256 steps or more, Cholesky below.
    pub fn auto(n_steps: usize) -> Self {
        if n_steps >= 256 {
            FbmMethod::DaviesHarte
        } else {
            FbmMethod::Cholesky
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub method: FbmMethod,
    pub seed: u64,
}

impl FbmSpec {
    pub fn new(hurst: f64, n_steps: usize, dt: f64, method: FbmMethod, seed: u64) -> Result<Self> {
        let spec = Self { hurst, n_steps, dt, method, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(domain("n_steps must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("hurst must lie in (0, 1), got {hurst}")))
    }
}

/// `E[W_t W_s] = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(t: f64, s: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(t >= 0.0 && s >= 0.0) {
        return Err(domain(format!("times must be non-negative, got ({t}, {s})")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// Autocovariance of unit-spaced fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

enum Sampler {
    DaviesHarte {
        /// sqrt(lambda_k / 2n) for the 2n circulant eigenvalues.
        scaled_sqrt_eigs: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky {
        /// Row-major packed lower triangle.
        lower: Vec<f64>,
    },
}

/// Precomputed fractional-Gaussian-noise sampler for a fixed `(H, n, dt)`.
/// Reuse one generator to draw many paths.
pub struct FgnGenerator {
    hurst: f64,
    n: usize,
    scale: f64,
    sampler: Sampler,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl FgnGenerator {
    pub fn new(hurst: f64, n_steps: usize, dt: f64, method: FbmMethod) -> Result<Self> {
        FbmSpec { hurst, n_steps, dt, method, seed: 0 }.validate()?;
        let sampler = match method {
            FbmMethod::DaviesHarte => davies_harte_setup(hurst, n_steps)?,
            FbmMethod::Cholesky => cholesky_setup(hurst, n_steps)?,
        };
        Ok(Self { hurst, n: n_steps, scale: dt.powf(hurst), sampler })
    }

    pub fn from_spec(spec: &FbmSpec) -> Result<Self> {
        Self::new(spec.hurst, spec.n_steps, spec.dt, spec.method)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn n_steps(&self) -> usize {
        self.n
    }

    /// The `n_steps` increments of stream `stream`.
    pub fn increments(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, stream);
        self.increments_with(&mut rng)
    }

    pub fn increments_with(&self, rng: &mut StreamRng) -> Vec<f64> {
        let n = self.n;
        match &self.sampler {
            Sampler::DaviesHarte { scaled_sqrt_eigs, fft } => {
                let mut w: Vec<Complex<f64>> = scaled_sqrt_eigs
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut w);
                w[..n].iter().map(|c| c.re * self.scale).collect()
            }
            Sampler::Cholesky { lower } => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let mut out = vec![0.0; n];
                let mut offset = 0;
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &lower[offset..offset + i + 1];
                    *o = row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() * self.scale;
                    offset += i + 1;
                }
                out
            }
        }
    }

    /// Cumulative path of `n_steps + 1` values starting at 0.
    pub fn path(&self, seed: u64, stream: u64) -> Vec<f64> {
        cumulate(&self.increments(seed, stream))
    }
}

fn cumulate(increments: &[f64]) -> Vec<f64> {
    let mut path = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    path.push(acc);
    for &d in increments {
        acc += d;
        path.push(acc);
    }
    path
}

fn davies_harte_setup(hurst: f64, n: usize) -> Result<Sampler> {
    let m = 2 * n;
    // First row of the minimal circulant embedding of the n x n Toeplitz matrix.
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
    for k in 0..=n {
        row.push(Complex::new(fgn_autocovariance(k, hurst), 0.0));
    }
    for k in (1..n).rev() {
        row.push(Complex::new(fgn_autocovariance(k, hurst), 0.0));
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut row);
    let mut scaled_sqrt_eigs = Vec::with_capacity(m);
    for (k, c) in row.iter().enumerate() {
        let mut lambda = c.re;
        if lambda < 0.0 {
            if lambda < -EIGENVALUE_TOLERANCE {
                return Err(Error::MethodFailure(format!(
                    "circulant eigenvalue {k} is {lambda:e}; embedding is not non-negative definite"
                )));
            }
            lambda = 0.0;
        }
        scaled_sqrt_eigs.push((lambda / m as f64).sqrt());
    }
    Ok(Sampler::DaviesHarte { scaled_sqrt_eigs, fft })
}

fn cholesky_setup(hurst: f64, n: usize) -> Result<Sampler> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst)).collect();
    let lower = cholesky_packed(n, |i, j| gamma[i.abs_diff(j)])?;
    Ok(Sampler::Cholesky { lower })
}

/// Dense Cholesky factor of the symmetric matrix `a(i, j)`, packed by rows.
pub(crate) fn cholesky_packed(n: usize, a: impl Fn(usize, usize) -> f64) -> Result<Vec<f64>> {
    let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
    let mut l = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a(i, j);
            let (ri, rj) = (idx(i, 0), idx(j, 0));
            for k in 0..j {
                sum -= l[ri + k] * l[rj + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::MethodFailure(format!(
                        "covariance matrix is not positive definite at row {i}"
                    )));
                }
                l[ri + i] = sum.sqrt();
            } else {
                l[ri + j] = sum / l[rj + j];
            }
        }
    }
    Ok(l)
}

/// One path for `spec`, drawn from stream 0 of `spec.seed`.
pub fn sample_fbm(spec: &FbmSpec) -> Result<Vec<f64>> {
    Ok(FgnGenerator::from_spec(spec)?.path(spec.seed, 0))
}

/// `n_paths` paths; path `i` uses stream `i`.
pub fn sample_fbm_batch(spec: &FbmSpec, n_paths: usize, exec: Execution) -> Result<Vec<Vec<f64>>> {
    let generator = FgnGenerator::from_spec(spec)?;
    Ok(exec.map_indexed(n_paths, |i| generator.path(spec.seed, i as u64)))
}

/// fBm sampled at arbitrary strictly increasing positive `times` via a
/// Cholesky factor of the covariance. Intended for small grids.
pub fn sample_fbm_on_grid(times: &[f64], hurst: f64, seed: u64, stream: u64) -> Result<Vec<f64>> {
    check_hurst(hurst)?;
    if times.is_empty() {
        return Err(Error::EmptyInput);
    }
    if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("grid times must be positive and strictly increasing"));
    }
    let n = times.len();
    let lower = cholesky_packed(n, |i, j| {
        fbm_covariance(times[i], times[j], hurst).expect("validated inputs")
    })?;
    let mut rng = stream_rng(seed, stream);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut offset = 0;
    Ok((0..n)
        .map(|i| {
            let v = lower[offset..offset + i + 1].iter().zip(&z).map(|(a, b)| a * b).sum();
            offset += i + 1;
            v
        })
        .collect())
}

/// Two-sample Kolmogorov–Smirnov statistic between `W_{alpha t}` and
/// `alpha^H W_t` across a batch of paths, with `t` the grid point `index`.
/// `alpha * index` must land on the grid.
pub fn self_affinity_check(paths: &[Vec<f64>], index: usize, alpha: f64, hurst: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    check_hurst(hurst)?;
    if paths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let target = alpha * index as f64;
    let scaled_index = target.round();
    if (target - scaled_index).abs() > 1e-9 {
        return Err(domain(format!("alpha * {index} = {target} is not a grid index")));
    }
    let scaled_index = scaled_index as usize;
    let len = paths.iter().map(Vec::len).min().unwrap_or(0);
    if index >= len || scaled_index >= len {
        return Err(domain("grid index beyond path length"));
    }
    let factor = alpha.powf(hurst);
    let a: Vec<f64> = paths.iter().map(|p| p[scaled_index]).collect();
    let b: Vec<f64> = paths.iter().map(|p| factor * p[index]).collect();
    Ok(ks_statistic(&a, &b))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at significance `level`.
pub fn ks_critical_value(na: usize, nb: usize, level: f64) -> f64 {
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}
