//! Multidimensional gas cost: static gas matrix, per-resource dynamic gas,
//! base-fee updates and the effective-fee refund rule.
//!
//! For a block with dynamic-gas row vector `lambda` (M), static gas `G`
//! (M x O_p), operation counts `Pi` (O_p x N), base fee `B` and priority
//! fees `p` (N), the block cost is `lambda G Pi (B 1 + p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GAS_TARGET: f64 = 15.0e6;
pub const DEFAULT_INTRINSIC_GAS: f64 = 21_000.0;

fn default_quotient() -> f64 {
    0.125
}
fn default_lambda_min() -> f64 {
    1.0 / 16.0
}
fn default_lambda_max() -> f64 {
    16.0
}
fn default_elasticity() -> f64 {
    2.0
}
fn default_gas_target() -> f64 {
    DEFAULT_GAS_TARGET
}
fn default_intrinsic_gas() -> f64 {
    DEFAULT_INTRINSIC_GAS
}

/// Supply-side configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSchedule {
    pub resource_names: Vec<String>,
    pub op_names: Vec<String>,
    /// `static_gas[k][j]`: gas of resource `k` per operation `j`.
    pub static_gas: Vec<Vec<f64>>,
    /// Per-block target of each resource, in gas. Sums to `gas_target`.
    pub limits: Vec<f64>,
    #[serde(default = "default_gas_target")]
    pub gas_target: f64,
    /// Adjustment quotient `d` for the dynamic-gas update.
    #[serde(default = "default_quotient")]
    pub adjustment_quotient: f64,
    #[serde(default = "default_quotient")]
    pub base_fee_quotient: f64,
    #[serde(default)]
    pub min_base_fee: f64,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    /// Hard per-resource cap as a multiple of the target.
    #[serde(default = "default_elasticity")]
    pub elasticity: f64,
    /// Charge a fixed per-transaction gas amount. Off by default: it breaks
    /// the equivalence of one `(k x, k y, z)` transaction and `k` copies of
    /// `(x, y, z)`.
    #[serde(default)]
    pub intrinsic_cost: bool,
    #[serde(default = "default_intrinsic_gas")]
    pub intrinsic_gas: f64,
    /// Resource charged with the intrinsic gas.
    #[serde(default)]
    pub intrinsic_resource: usize,
}

impl ResourceSchedule {
    /// Schedule with default update constants and `gas_target = sum(limits)`.
    pub fn new(
        resource_names: Vec<String>,
        op_names: Vec<String>,
        static_gas: Vec<Vec<f64>>,
        limits: Vec<f64>,
    ) -> Result<Self> {
        let gas_target = limits.iter().sum();
        let s = Self {
            resource_names,
            op_names,
            static_gas,
            limits,
            gas_target,
            adjustment_quotient: default_quotient(),
            base_fee_quotient: default_quotient(),
            min_base_fee: 0.0,
            lambda_min: default_lambda_min(),
            lambda_max: default_lambda_max(),
            elasticity: default_elasticity(),
            intrinsic_cost: false,
            intrinsic_gas: DEFAULT_INTRINSIC_GAS,
            intrinsic_resource: 0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Unnamed schedule, handy for tests.
    pub fn from_matrix(static_gas: Vec<Vec<f64>>, limits: Vec<f64>) -> Result<Self> {
        let m = static_gas.len();
        let ops = static_gas.first().map_or(0, Vec::len);
        Self::new(
            (1..=m).map(|k| format!("r{k}")).collect(),
            (1..=ops).map(|j| format!("op{j}")).collect(),
            static_gas,
            limits,
        )
    }

    pub fn n_resources(&self) -> usize {
        self.static_gas.len()
    }

    pub fn n_ops(&self) -> usize {
        self.op_names.len()
    }

    /// Per-resource hard caps: `elasticity * limits`.
    pub fn hard_limits(&self) -> Vec<f64> {
        self.limits.iter().map(|l| l * self.elasticity).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.static_gas.len();
        if m == 0 {
            return Err(Error::Shape("schedule needs at least one resource".into()));
        }
        if self.resource_names.len() != m || self.limits.len() != m {
            return Err(Error::Shape(format!(
                "{m} static-gas rows but {} resource names and {} limits",
                self.resource_names.len(),
                self.limits.len()
            )));
        }
        let ops = self.op_names.len();
        if ops == 0 || self.static_gas.iter().any(|row| row.len() != ops) {
            return Err(Error::Shape(format!("every static-gas row needs {ops} entries")));
        }
        if self.static_gas.iter().flatten().any(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::Domain("static gas entries must be finite and non-negative".into()));
        }
        if self.limits.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Domain("every resource limit must be positive".into()));
        }
        let total: f64 = self.limits.iter().sum();
        if (total - self.gas_target).abs() > 1e-9 * self.gas_target.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "resource limits sum to {total} but the gas target is {}",
                self.gas_target
            )));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min <= 1.0 && self.lambda_max >= 1.0) {
            return Err(Error::Domain("dynamic-gas clamps need 0 < min <= 1 <= max".into()));
        }
        if !(self.adjustment_quotient > 0.0 && self.base_fee_quotient > 0.0) {
            return Err(Error::Domain("adjustment quotients must be positive".into()));
        }
        if !(self.elasticity >= 1.0) {
            return Err(Error::Domain("elasticity must be at least 1".into()));
        }
        if self.min_base_fee < 0.0 {
            return Err(Error::Domain("minimum base fee must be non-negative".into()));
        }
        if self.intrinsic_cost && (self.intrinsic_resource >= m || self.intrinsic_gas < 0.0) {
            return Err(Error::Domain("intrinsic gas needs a valid resource and non-negative amount".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: String,
    /// Count of each operation: one column of `Pi`.
    pub op_counts: Vec<u64>,
    /// Gwei per gas.
    pub priority_fee: f64,
    /// Gwei per gas.
    pub max_fee: f64,
}

impl Transaction {
    pub fn new(id: impl Into<String>, op_counts: Vec<u64>, priority_fee: f64, max_fee: f64) -> Self {
        Self { id: id.into(), op_counts, priority_fee, max_fee }
    }

    pub fn validate(&self) -> Result<()> {
        if self.op_counts.iter().all(|&c| c == 0) {
            return Err(Error::Precondition(format!("transaction {} performs no operations", self.id)));
        }
        if !(self.priority_fee >= 0.0 && self.max_fee >= self.priority_fee) {
            return Err(Error::Precondition(format!(
                "transaction {} needs 0 <= priority fee <= max fee",
                self.id
            )));
        }
        Ok(())
    }
}

/// Gas of each resource used by `tx`: `G * op_counts`, plus the intrinsic
/// charge when enabled.
pub fn tx_resource_usage(schedule: &ResourceSchedule, tx: &Transaction) -> Result<Vec<f64>> {
    if tx.op_counts.len() != schedule.n_ops() {
        return Err(Error::Shape(format!(
            "transaction {} has {} op counts, schedule has {} operations",
            tx.id,
            tx.op_counts.len(),
            schedule.n_ops()
        )));
    }
    tx.validate()?;
    let mut usage: Vec<f64> = schedule
        .static_gas
        .iter()
        .map(|row| row.iter().zip(&tx.op_counts).map(|(g, &c)| g * c as f64).sum())
        .collect();
    if schedule.intrinsic_cost {
        usage[schedule.intrinsic_resource] += schedule.intrinsic_gas;
    }
    Ok(usage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeState {
    /// Gwei per gas.
    pub base_fee: f64,
    pub dynamic_gas: Vec<f64>,
    pub block_height: u64,
}

impl FeeState {
    /// Dynamic gas starts at one for every resource.
    pub fn initial(schedule: &ResourceSchedule, base_fee: f64) -> Self {
        Self { base_fee, dynamic_gas: vec![1.0; schedule.n_resources()], block_height: 0 }
    }

    /// `sum_k lambda_k usage_k`: the gas a transaction is charged for.
    pub fn charged_gas(&self, usage: &[f64]) -> f64 {
        self.dynamic_gas.iter().zip(usage).map(|(l, u)| l * u).sum()
    }
}

/// `sum_i sum_k sum_j lambda_k g_kj pi_ji (B + p_i)`.
pub fn block_cost(state: &FeeState, schedule: &ResourceSchedule, txs: &[Transaction]) -> Result<f64> {
    if state.dynamic_gas.len() != schedule.n_resources() {
        return Err(Error::Shape("dynamic gas length differs from resource count".into()));
    }
    txs.iter().try_fold(0.0, |acc, tx| {
        let usage = tx_resource_usage(schedule, tx)?;
        Ok(acc + state.charged_gas(&usage) * (state.base_fee + tx.priority_fee))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectivePrice {
    /// Gwei per gas actually paid.
    pub effective: f64,
    /// Part of the requested priority fee cut off by the max fee.
    pub refunded_priority: f64,
    /// Priority fee the builder receives per gas.
    pub priority_paid: f64,
}

/// `effective = min(base + priority, max)`. Fails when the base fee alone
/// exceeds the max fee.
pub fn effective_gas_price(base_fee: f64, priority_fee: f64, max_fee: f64) -> Result<EffectivePrice> {
    if base_fee > max_fee {
        return Err(Error::Ineligible { id: String::new(), base_fee, max_fee });
    }
    let requested = base_fee + priority_fee;
    let effective = requested.min(max_fee);
    Ok(EffectivePrice {
        effective,
        refunded_priority: requested - effective,
        priority_paid: effective - base_fee,
    })
}

pub(crate) fn effective_for(tx: &Transaction, base_fee: f64) -> Result<EffectivePrice> {
    effective_gas_price(base_fee, tx.priority_fee, tx.max_fee).map_err(|e| match e {
        Error::Ineligible { base_fee, max_fee, .. } => Error::Ineligible { id: tx.id.clone(), base_fee, max_fee },
        other => other,
    })
}

/// `lambda'_k = clamp(lambda_k (1 + d (usage_k - l_k) / l_k), min, max)`.
pub fn update_dynamic_gas(state: &FeeState, usage: &[f64], schedule: &ResourceSchedule) -> Result<Vec<f64>> {
    let m = schedule.n_resources();
    if usage.len() != m || state.dynamic_gas.len() != m {
        return Err(Error::Shape(format!("expected {m} resources")));
    }
    if usage.iter().any(|&u| !(u >= 0.0)) {
        return Err(Error::Precondition("resource usage must be non-negative".into()));
    }
    let d = schedule.adjustment_quotient;
    Ok(state
        .dynamic_gas
        .iter()
        .zip(usage.iter().zip(&schedule.limits))
        .map(|(&lambda, (&u, &l))| {
            (lambda * (1.0 + d * (u - l) / l)).clamp(schedule.lambda_min, schedule.lambda_max)
        })
        .collect())
}

/// `B' = max(B (1 + d (used - target) / target), min_base_fee)`.
pub fn update_base_fee(base_fee: f64, total_gas_used: f64, gas_target: f64, quotient: f64, min_base_fee: f64) -> f64 {
    (base_fee * (1.0 + quotient * (total_gas_used - gas_target) / gas_target)).max(min_base_fee)
}

/// Applies both updates for a block with per-resource `usage`. The base fee
/// reacts to total gas against the schedule's gas target; each dynamic-gas
/// coefficient reacts to its own resource.
pub fn advance(state: &FeeState, usage: &[f64], schedule: &ResourceSchedule) -> Result<FeeState> {
    let dynamic_gas = update_dynamic_gas(state, usage, schedule)?;
    let base_fee = update_base_fee(
        state.base_fee,
        usage.iter().sum(),
        schedule.gas_target,
        schedule.base_fee_quotient,
        schedule.min_base_fee,
    );
    Ok(FeeState { base_fee, dynamic_gas, block_height: state.block_height + 1 })
}
