//! Command arguments and their execution.
//!
//! Every flag is optional at the clap level so that a config file can supply
//! it; defaults are applied after merging and echoed into the artifact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use gasfee::builder::{brute_force_select, select_block, SelectionPolicy, BRUTE_FORCE_MAX};
use gasfee::derivatives::{
    option_surface, price_degree_day_report, price_monte_carlo, MonteCarloConfig, OptionKind, OptionSpec, Underlying,
};
use gasfee::estimation::{calibrate_with, ReversionRegime};
use gasfee::fbm::{sample_fbm_batch, FbmMethod, FbmSpec};
use gasfee::feemech::{FeeState, ResourceSchedule};
use gasfee::fou::{simulate_fou, FouParams, PiecewiseConstant, SimGrid};
use gasfee::market_data::{
    lognormal_fit, parse_series, resample_median, summary_stats, write_series, Bucket, ColumnConfig, GasPriceSeries,
    TimeZone,
};
use gasfee::mechanism::{parse_mempool, simulate_mechanism, trace_csv, MechanismConfig, MempoolGenerator};
use gasfee::{stats, Execution};

use crate::config::CliError;
use crate::output::{Artifact, Body};
use crate::Format;

/// A coefficient that is either constant or piecewise constant in time.
/// On the command line: `0.5`, or `0.5,10:0.2,30:0.1` for 0.5 before t = 10,
/// 0.2 on [10, 30) and 0.1 afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Constant(f64),
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl FromStr for Coef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
        let mut parts = s.split(',');
        let first = num(parts.next().unwrap_or_default())?;
        let (mut breaks, mut values) = (Vec::new(), vec![first]);
        for part in parts {
            let (t, v) = part.split_once(':').ok_or_else(|| format!("expected `time:value`, got `{part}`"))?;
            breaks.push(num(t)?);
            values.push(num(v)?);
        }
        Ok(if breaks.is_empty() { Coef::Constant(first) } else { Coef::Piecewise { breaks, values } })
    }
}

impl Coef {
    fn build(&self) -> Result<PiecewiseConstant, CliError> {
        match self {
            Coef::Constant(v) => Ok(PiecewiseConstant::constant(*v)),
            Coef::Piecewise { breaks, values } => Ok(PiecewiseConstant::new(breaks.clone(), values.clone())?),
        }
    }
}

fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| CliError::Usage(format!("missing required parameter --{flag}")))
}

fn format_or(globals: &crate::config::Globals, default: Format, allowed: &[Format]) -> Result<Format, CliError> {
    let f = globals.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::Usage(format!("format {f:?} is not available for this command")))
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("artifact values serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketArg {
    None,
    Hour,
    Day,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TzArg {
    Utc,
    UsEastern,
}

impl From<TzArg> for TimeZone {
    fn from(tz: TzArg) -> Self {
        match tz {
            TzArg::Utc => TimeZone::Utc,
            TzArg::UsEastern => TimeZone::UsEastern,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SeriesArgs {
    /// Input CSV with a timestamp and a price column (prices in Gwei; timestamps
    /// as epoch seconds, RFC 3339 or `YYYY-MM-DD HH:MM:SS[ UTC]`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Name of the timestamp column. [default: timestamp]
    #[arg(long)]
    pub timestamp_col: Option<String>,
    /// Name of the price column. [default: price]
    #[arg(long)]
    pub price_col: Option<String>,
    /// Resample to per-bucket medians before use. [default: none]
    #[arg(long, value_enum)]
    pub bucket: Option<BucketArg>,
    /// Time zone for bucket boundaries. [default: utc]
    #[arg(long, value_enum)]
    pub tz: Option<TzArg>,
}

#[derive(Debug, Clone, Serialize)]
struct SeriesParams {
    input: PathBuf,
    timestamp_col: String,
    price_col: String,
    bucket: BucketArg,
    tz: TzArg,
}

impl SeriesArgs {
    fn resolve(&self) -> Result<SeriesParams, CliError> {
        Ok(SeriesParams {
            input: required(&self.input, "input")?,
            timestamp_col: self.timestamp_col.clone().unwrap_or_else(|| "timestamp".into()),
            price_col: self.price_col.clone().unwrap_or_else(|| "price".into()),
            bucket: self.bucket.unwrap_or(BucketArg::None),
            tz: self.tz.unwrap_or(TzArg::Utc),
        })
    }
}

impl SeriesParams {
    fn columns(&self) -> ColumnConfig {
        ColumnConfig { timestamp: self.timestamp_col.clone(), price: self.price_col.clone() }
    }

    fn load(&self) -> Result<GasPriceSeries, CliError> {
        let series = parse_series(&read_text(&self.input)?, &self.columns())?;
        let bucket = match self.bucket {
            BucketArg::None => return Ok(series),
            BucketArg::Hour => Bucket::Hour,
            BucketArg::Day => Bucket::Day,
        };
        Ok(resample_median(&series, bucket, self.tz.into())?)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
}

pub fn ingest(args: IngestArgs, globals: &crate::config::Globals) -> Result<Artifact, CliError> {
    let p = args.series.resolve()?;
    let format = format_or(globals, Format::Csv, &[Format::Csv, Format::Json])?;
    let series = p.load()?;
    let body = match format {
        Format::Csv => Body::Csv(write_series(&series, &p.columns())),
        Format::Json => {
            let lognormal = match lognormal_fit(&series) {
                Ok(fit) => to_json(&fit),
                Err(e) => {
                    log::warn!("log-normal fit skipped: {e}");
                    Value::Null
                }
            };
            Body::Json(json!({
                "series": series.points(),
                "summary": summary_stats(&series)?,
                "lognormal": lognormal,
            }))
        }
    };
    Ok(Artifact { command: "ingest", seed: globals.seed, params: to_json(&p), body })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    /// Sampling interval between observations [time units]. [default: 1]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fix the Hurst exponent used to scale sigma instead of the R/S estimate.
    #[arg(long)]
    pub hurst: Option<f64>,
}

pub fn estimate(args: EstimateArgs, globals: &crate::config::Globals) -> Result<Artifact, CliError> {
    let series_params = args.series.resolve()?;
    let dt = args.dt.unwrap_or(1.0);
    let format = format_or(globals, Format::Json, &[Format::Csv, Format::Json])?;
    let series = series_params.load()?;
    let cal = calibrate_with(&series, dt, args.hurst)?;
    if cal.ou.regime == ReversionRegime::NonMeanReverting {
        log::warn!("AR(1) slope {} >= 1: no mean reversion detected", cal.ou.ar_slope);
    }
    let sigma = cal.params.sigma.values()[0];
    let params = json!({ "series": series_params, "dt": dt, "hurst": args.hurst });
    let body = match format {
        Format::Json => Body::Json(json!({
            "hurst": cal.hurst.hurst,
            "r_squared": cal.hurst.r_squared,
            "kappa": cal.ou.kappa,
            "mu": cal.ou.mu,
            "sigma": sigma,
            "n_obs": cal.ou.n_obs,
            "regime": cal.ou.regime,
            "sigma_per_step": cal.ou.sigma,
            "ar_slope": cal.ou.ar_slope,
            "ar_intercept": cal.ou.ar_intercept,
            "window_sizes": cal.hurst.window_sizes,
            "rs_values": cal.hurst.rs_values,
            "model_hurst": cal.params.hurst,
        })),
        Format::Csv => Body::Csv(format!(
            "hurst,r_squared,kappa,mu,sigma,n_obs\n{},{},{},{},{},{}\n",
            cal.hurst.hurst, cal.hurst.r_squared, cal.ou.kappa, cal.ou.mu, sigma, cal.ou.n_obs
        )),
    };
    Ok(Artifact { command: "estimate", seed: globals.seed, params, body })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Mean-reversion speed kappa [1/time], >= 0. A number or a piecewise
    /// schedule `v0,t1:v1,...`. [default: 0.007]
    #[arg(long)]
    pub kappa: Option<Coef>,
    /// Long-run level theta [Gwei, or log Gwei for the geometric model].
    /// Number or piecewise schedule. [default: 3.2]
    #[arg(long)]
    pub theta: Option<Coef>,
    /// Volatility sigma [state units per time^H], >= 0. Number or piecewise
    /// schedule. [default: 0.0937]
    #[arg(long)]
    pub sigma: Option<Coef>,
    /// Hurst exponent H, in (0, 1). [default: 0.5]
    #[arg(long)]
    pub hurst: Option<f64>,
}

impl ModelArgs {
    fn resolve(&self) -> ModelArgs {
        ModelArgs {
            kappa: Some(self.kappa.clone().unwrap_or(Coef::Constant(0.007))),
            theta: Some(self.theta.clone().unwrap_or(Coef::Constant(3.2))),
            sigma: Some(self.sigma.clone().unwrap_or(Coef::Constant(0.0937))),
            hurst: Some(self.hurst.unwrap_or(0.5)),
        }
    }

    /// Call on a resolved value.
    fn build(&self) -> Result<FouParams, CliError> {
        let get = |c: &Option<Coef>| c.as_ref().expect("resolved").build();
        Ok(FouParams::new(get(&self.kappa)?, get(&self.theta)?, get(&self.sigma)?, self.hurst.expect("resolved"))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Process {
    Fou,
    Fbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Auto,
    DaviesHarte,
    Cholesky,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Process to simulate. [default: fou]
    #[arg(long, value_enum)]
    pub process: Option<Process>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Initial value X_0 [Gwei, or log Gwei with --geometric]; FOU only. [default: 3.2]
    #[arg(long)]
    pub x0: Option<f64>,
    /// Number of time steps. [default: 1000]
    #[arg(long)]
    pub n_steps: Option<usize>,
    /// Step length [time units]. [default: 1]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of independent paths; path i uses RNG stream i. [default: 1]
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Treat the FOU as the log price and output exp(X). [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub geometric: Option<bool>,
    /// fBm sampler; auto picks Davies-Harte from 256 steps up. [default: auto]
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

pub fn simulate(args: SimulateArgs, globals: &crate::config::Globals) -> Result<Artifact, CliError> {
    let resolved = SimulateArgs {
        process: Some(args.process.unwrap_or(Process::Fou)),
        model: args.model.resolve(),
        x0: Some(args.x0.unwrap_or(3.2)),
        n_steps: Some(args.n_steps.unwrap_or(1000)),
        dt: Some(args.dt.unwrap_or(1.0)),
        n_paths: Some(args.n_paths.unwrap_or(1)),
        geometric: Some(args.geometric.unwrap_or(false)),
        method: Some(args.method.unwrap_or(MethodArg::Auto)),
    };
    let format = format_or(globals, Format::Csv, &[Format::Csv, Format::Json])?;
    let n_steps = resolved.n_steps.expect("resolved");
    let dt = resolved.dt.expect("resolved");
    let n_paths = resolved.n_paths.expect("resolved");
    if n_paths == 0 {
        return Err(CliError::Usage("--n-paths must be at least 1".into()));
    }
    let (times, paths) = match resolved.process.expect("resolved") {
        Process::Fou => {
            let set = simulate_fou(
                &resolved.model.build()?,
                resolved.x0.expect("resolved"),
                SimGrid::new(n_steps, dt)?,
                n_paths,
                globals.seed,
                resolved.geometric.expect("resolved"),
                Execution::Parallel,
            )?;
            (set.times, set.paths)
        }
        Process::Fbm => {
            let method = match resolved.method.expect("resolved") {
                MethodArg::Auto => FbmMethod::auto(n_steps),
                MethodArg::DaviesHarte => FbmMethod::DaviesHarte,
                MethodArg::Cholesky => FbmMethod::Cholesky,
            };
            let spec = FbmSpec::new(resolved.model.hurst.expect("resolved"), n_steps, dt, method, globals.seed)?;
            let times = (0..=n_steps).map(|i| i as f64 * dt).collect();
            (times, sample_fbm_batch(&spec, n_paths, Execution::Parallel)?)
        }
    };
    let body = match format {
        Format::Csv => {
            let mut s = String::from("step,time");
            if n_paths == 1 {
                s.push_str(",value");
            } else {
                (0..n_paths).for_each(|i| write!(s, ",path_{i}").expect("string write"));
            }
            s.push('\n');
            for (step, t) in times.iter().enumerate() {
                write!(s, "{step},{t}").expect("string write");
                paths.iter().for_each(|p| write!(s, ",{}", p[step]).expect("string write"));
                s.push('\n');
            }
            Body::Csv(s)
        }
        Format::Json => {
            let (mean, variance): (Vec<f64>, Vec<f64>) = (0..times.len())
                .map(|i| {
                    let col: Vec<f64> = paths.iter().map(|p| p[i]).collect();
                    let var = if col.len() > 1 { stats::sample_variance(&col) } else { 0.0 };
                    (stats::mean(&col), var)
                })
                .unzip();
            Body::Json(json!({ "n_paths": n_paths, "times": times, "mean": mean, "variance": variance }))
        }
    };
    Ok(Artifact { command: "simulate", seed: globals.seed, params: to_json(&resolved), body })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Call,
    Put,
    ModifiedPut,
}

impl From<KindArg> for OptionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Call => OptionKind::Call,
            KindArg::Put => OptionKind::Put,
            KindArg::ModifiedPut => OptionKind::ModifiedPut,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMethod {
    /// Closed form where available, Monte Carlo otherwise.
    Auto,
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ContractArgs {
    /// Payoff type. [default: call]
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Strike K [Gwei]. Required.
    #[arg(long)]
    pub strike_k: Option<f64>,
    /// Modified-put strike L on the accumulated payoff [Gwei x time]. [default: 0]
    #[arg(long)]
    pub strike_l: Option<f64>,
    /// Continuous discount rate delta [1/time]. [default: 0]
    #[arg(long)]
    pub discount_delta: Option<f64>,
    /// Averaging window S [time units], 0 < S <= T. Required.
    #[arg(long)]
    pub window: Option<f64>,
    /// Valuation time t [time units], 0 <= t <= T - S; x0 is the value at t. [default: 0]
    #[arg(long)]
    pub valuation_time: Option<f64>,
}

impl ContractArgs {
    fn resolve(&self) -> Result<ContractArgs, CliError> {
        Ok(ContractArgs {
            kind: Some(self.kind.unwrap_or(KindArg::Call)),
            strike_k: Some(required(&self.strike_k, "strike-k")?),
            strike_l: Some(self.strike_l.unwrap_or(0.0)),
            discount_delta: Some(self.discount_delta.unwrap_or(0.0)),
            window: Some(required(&self.window, "window")?),
            valuation_time: Some(self.valuation_time.unwrap_or(0.0)),
        })
    }

    fn spec(&self, maturity: f64) -> OptionSpec {
        OptionSpec {
            kind: self.kind.expect("resolved").into(),
            strike_k: self.strike_k.expect("resolved"),
            strike_l: self.strike_l.expect("resolved"),
            discount_delta: self.discount_delta.expect("resolved"),
            maturity,
            window: self.window.expect("resolved"),
            valuation_time: self.valuation_time.expect("resolved"),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PriceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub contract: ContractArgs,
    /// Maturity T [time units]. Required.
    #[arg(long)]
    pub maturity: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Value of the process at the valuation time [Gwei, or log Gwei with --geometric]. [default: 3.2]
    #[arg(long)]
    pub x0: Option<f64>,
    /// The model drives the log price; requires Monte Carlo. [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub geometric: Option<bool>,
    /// Pricing method. [default: auto]
    #[arg(long, value_enum)]
    pub method: Option<PricingMethod>,
    /// Monte Carlo paths. [default: 10000]
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Monte Carlo Euler steps across the averaging window. [default: 200]
    #[arg(long)]
    pub steps_per_window: Option<usize>,
}

pub fn price(args: PriceArgs, globals: &crate::config::Globals) -> Result<Artifact, CliError> {
    let resolved = PriceArgs {
        contract: args.contract.resolve()?,
        maturity: Some(required(&args.maturity, "maturity")?),
        model: args.model.resolve(),
        x0: Some(args.x0.unwrap_or(3.2)),
        geometric: Some(args.geometric.unwrap_or(false)),
        method: Some(args.method.unwrap_or(PricingMethod::Auto)),
        n_paths: Some(args.n_paths.unwrap_or(10_000)),
        steps_per_window: Some(args.steps_per_window.unwrap_or(200)),
    };
    format_or(globals, Format::Json, &[Format::Json])?;
    let spec = resolved.contract.spec(resolved.maturity.expect("resolved"));
    let geometric = resolved.geometric.expect("resolved");
    let underlying = Underlying { params: resolved.model.build()?, x0: resolved.x0.expect("resolved"), geometric };
    let closed_form_ok = !geometric && spec.kind != OptionKind::ModifiedPut;
    let use_closed = match resolved.method.expect("resolved") {
        PricingMethod::Auto => closed_form_ok,
        PricingMethod::ClosedForm => true,
        PricingMethod::MonteCarlo => false,
    };
    let result = if use_closed {
        let report = price_degree_day_report(&spec, &underlying)?;
        json!({
            "method": "closed-form",
            "price": report.price,
            "refined_price": report.refined_price,
            "precision_warning": report.precision_warning,
        })
    } else {
        let mut mc = MonteCarloConfig::new(resolved.n_paths.expect("resolved"), globals.seed);
        mc.steps_per_window = resolved.steps_per_window.expect("resolved");
        let r = price_monte_carlo(&spec, &underlying, &mc)?;
        json!({ "method": "monte-carlo", "price": r.price, "std_error": r.std_error, "n_paths": r.n_paths })
    };
    Ok(Artifact { command: "price", seed: globals.seed, params: to_json(&resolved), body: Body::Json(result) })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SurfaceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub contract: ContractArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Initial values, strictly increasing, comma separated [Gwei]. Required.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub x0_grid: Option<Vec<f64>>,
    /// Maturities, strictly increasing, comma separated [time units]. Required.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub maturities: Option<Vec<f64>>,
}

pub fn surface(args: SurfaceArgs, globals: &crate::config::Globals) -> Result<Artifact, CliError> {
    let resolved = SurfaceArgs {
        contract: args.contract.resolve()?,
        model: args.model.resolve(),
        x0_grid: Some(required(&args.x0_grid, "x0-grid")?),
        maturities: Some(required(&args.maturities, "maturities")?),
    };
    let format = format_or(globals, Format::Csv, &[Format::Csv, Format::Json])?;
    let x0 = resolved.x0_grid.as_deref().expect("resolved");
    let maturities = resolved.maturities.as_deref().expect("resolved");
    let template = resolved.contract.spec(maturities[0]);
    let grid = option_surface(&resolved.model.build()?, x0, maturities, &template, Execution::Parallel)?;
    let body = match format {
        Format::Csv => {
            let mut s = String::from("x0");
            maturities.iter().for_each(|m| write!(s, ",T={m}").expect("string write"));
            s.push('\n');
            for (x, row) in x0.iter().zip(&grid) {
                write!(s, "{x}").expect("string write");
                row.iter().for_each(|p| write!(s, ",{p}").expect("string write"));
                s.push('\n');
            }
            Body::Csv(s)
        }
        Format::Json => Body::Json(json!({ "x0": x0, "maturity": maturities, "price": grid })),
    };
    Ok(Artifact { command: "surface", seed: globals.seed, params: to_json(&resolved), body })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    RayOrder,
    FeeDensity,
}

impl From<PolicyArg> for SelectionPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::RayOrder => SelectionPolicy::RayOrder,
            PolicyArg::FeeDensity => SelectionPolicy::FeeDensity,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct MechanismArgs {
    /// Resource schedule file (JSON or TOML): resource_names, op_names,
    /// static_gas [gas per op], limits [gas per block], update constants. Required.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Mempool generator file (JSON or TOML): arrival_rate [tx per block],
    /// op_count_max, priority_log_mean and priority_log_sd [ln Gwei],
    /// max_fee_headroom, max_mempool [tx]. Required unless --mempool is given.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// Mempool CSV (id, priority_fee, max_fee [Gwei per gas], one count column
    /// per operation): select a single block instead of simulating.
    #[arg(long)]
    pub mempool: Option<PathBuf>,
    /// Blocks to simulate. [default: 100]
    #[arg(long)]
    pub n_blocks: Option<u64>,
    /// Starting base fee B [Gwei per gas]. [default: 10]
    #[arg(long)]
    pub initial_base_fee: Option<f64>,
    /// Builder ranking. [default: ray-order]
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// With --mempool, also run the exhaustive revenue oracle (at most 20 transactions). [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub oracle: Option<bool>,
}

fn load_structured<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn mechanism(args: MechanismArgs, globals: &crate::config::Globals) -> Result<Artifact, CliError> {
    let resolved = MechanismArgs {
        schedule: Some(required(&args.schedule, "schedule")?),
        generator: args.generator.clone(),
        mempool: args.mempool.clone(),
        n_blocks: Some(args.n_blocks.unwrap_or(100)),
        initial_base_fee: Some(args.initial_base_fee.unwrap_or(10.0)),
        policy: Some(args.policy.unwrap_or(PolicyArg::RayOrder)),
        oracle: Some(args.oracle.unwrap_or(false)),
    };
    let schedule: ResourceSchedule = load_structured(resolved.schedule.as_deref().expect("resolved"))?;
    schedule.validate()?;
    let base_fee = resolved.initial_base_fee.expect("resolved");
    let policy: SelectionPolicy = resolved.policy.expect("resolved").into();

    if let Some(path) = &resolved.mempool {
        let format = format_or(globals, Format::Json, &[Format::Csv, Format::Json])?;
        let mempool = parse_mempool(&read_text(path)?, &schedule)?;
        let state = FeeState::initial(&schedule, base_fee);
        let limits = schedule.hard_limits();
        let selection = select_block(&mempool, &schedule, &state, &limits, policy)?;
        let oracle = if resolved.oracle.expect("resolved") {
            if mempool.len() > BRUTE_FORCE_MAX {
                return Err(CliError::Usage(format!("--oracle supports at most {BRUTE_FORCE_MAX} transactions")));
            }
            Some(brute_force_select(&mempool, &schedule, &state, &limits)?)
        } else {
            None
        };
        let params = json!({ "args": resolved, "schedule": schedule });
        let body = match format {
            Format::Json => {
                let ratio = oracle.as_ref().map(|o| if o.revenue > 0.0 { selection.revenue / o.revenue } else { 1.0 });
                Body::Json(json!({ "selection": selection, "oracle": oracle, "revenue_ratio": ratio }))
            }
            Format::Csv => {
                let mut s = String::from("rank,tx_id,distance,fee_per_gas,included\n");
                for (i, r) in selection.ranking.iter().enumerate() {
                    let dist = r.distance.map_or(String::new(), |d| d.to_string());
                    let inc = selection.included.contains(&r.tx_id);
                    writeln!(s, "{i},{},{dist},{},{inc}", r.tx_id, r.fee_per_gas).expect("string write");
                }
                Body::Csv(s)
            }
        };
        return Ok(Artifact { command: "mechanism", seed: globals.seed, params, body });
    }

    let format = format_or(globals, Format::Csv, &[Format::Csv, Format::Json])?;
    let generator_path = resolved
        .generator
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing required parameter --generator (or --mempool)".into()))?;
    let generator: MempoolGenerator = load_structured(generator_path)?;
    let config = MechanismConfig {
        n_blocks: resolved.n_blocks.expect("resolved"),
        initial_base_fee: base_fee,
        seed: globals.seed,
        policy,
    };
    let records = simulate_mechanism(&schedule, &generator, &config)?;
    let params = json!({ "args": resolved, "schedule": schedule, "generator": generator });
    let body = match format {
        Format::Csv => Body::Csv(trace_csv(&records, schedule.n_resources())),
        Format::Json => Body::Json(to_json(&records)),
    };
    Ok(Artifact { command: "mechanism", seed: globals.seed, params, body })
}
