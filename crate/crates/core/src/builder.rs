//! Geometric block building.
//!
//! A transaction using gas `u` per resource and paying `z` per gas is the
//! hyperplane `sum_k u_k r_k = (sum_k u_k) z` in resource space. Dividing by
//! the total gas normalises it, so scaled copies `(c u, z)` give the same
//! plane. Transactions are ranked by where a test ray from the origin
//! crosses their plane; the ray points along the resource limits reflected
//! across the diagonal `(1, ..., 1)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::feemech::{effective_for, tx_resource_usage, FeeState, ResourceSchedule, Transaction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxLine {
    /// Resource weights scaled to unit sum.
    pub normal: Vec<f64>,
    /// Right-hand side after normalisation: the fee per gas.
    pub level: f64,
    pub tx_id: String,
}

impl TxLine {
    /// Intercept on resource axis `k`, `None` when the plane is parallel to it.
    pub fn intercept(&self, k: usize) -> Option<f64> {
        (self.normal[k] > 0.0).then(|| self.level / self.normal[k])
    }
}

pub fn tx_line(usage: &[f64], fee_per_gas: f64, tx_id: impl Into<String>) -> Result<TxLine> {
    if usage.iter().any(|&u| !(u >= 0.0)) || !(fee_per_gas >= 0.0) {
        return Err(domain("usage and fee must be non-negative"));
    }
    let total: f64 = usage.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("transaction uses no gas".into()));
    }
    Ok(TxLine {
        normal: usage.iter().map(|u| u / total).collect(),
        level: fee_per_gas,
        tx_id: tx_id.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVector {
    pub direction: Vec<f64>,
    pub source_limits: Vec<f64>,
}

/// Householder-style reflection across the unit diagonal:
/// `2 (v . e) e - v` with `e = (1, ..., 1) / sqrt(M)`.
pub fn reflect_across_diagonal(v: &[f64]) -> Vec<f64> {
    let m = v.len() as f64;
    let twice_mean = 2.0 * v.iter().sum::<f64>() / m;
    v.iter().map(|x| twice_mean - x).collect()
}

pub fn test_vector(limits: &[f64]) -> Result<TestVector> {
    if limits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if limits.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(domain("limits must be positive"));
    }
    Ok(TestVector { direction: reflect_across_diagonal(limits), source_limits: limits.to_vec() })
}

/// Distance from the origin, along the unit test direction, to the line.
/// `None` when the ray is parallel to or moving away from the plane.
pub fn ray_distance(test: &TestVector, line: &TxLine) -> Option<f64> {
    if line.level == 0.0 {
        return Some(0.0);
    }
    let norm = test.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    let along: f64 = test.direction.iter().zip(&line.normal).map(|(d, n)| d * n).sum::<f64>() / norm;
    (along > 0.0).then(|| line.level / along)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// Ascending ray distance along the reflected limits.
    #[default]
    RayOrder,
    /// Descending priority fee per charged gas.
    FeeDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTx {
    pub tx_id: String,
    pub distance: Option<f64>,
    /// Priority fee per gas the builder receives.
    pub fee_per_gas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSelection {
    pub ranking: Vec<RankedTx>,
    pub included: Vec<String>,
    pub skipped_ineligible: Vec<String>,
    pub usage: Vec<f64>,
    pub residual: Vec<f64>,
    /// Sum over included transactions of charged gas times priority paid.
    pub revenue: f64,
}

struct Candidate<'a> {
    tx: &'a Transaction,
    usage: Vec<f64>,
    fee_per_gas: f64,
    charged_gas: f64,
}

fn candidates<'a>(
    mempool: &'a [Transaction],
    schedule: &ResourceSchedule,
    state: &FeeState,
) -> Result<(Vec<Candidate<'a>>, Vec<String>)> {
    let mut out = Vec::with_capacity(mempool.len());
    let mut ineligible = Vec::new();
    for tx in mempool {
        let usage = tx_resource_usage(schedule, tx)?;
        match effective_for(tx, state.base_fee) {
            Ok(price) => out.push(Candidate {
                tx,
                fee_per_gas: price.priority_paid,
                charged_gas: state.charged_gas(&usage),
                usage,
            }),
            Err(Error::Ineligible { .. }) => ineligible.push(tx.id.clone()),
            Err(e) => return Err(e),
        }
    }
    Ok((out, ineligible))
}

fn check_limits(limits: &[f64], schedule: &ResourceSchedule) -> Result<()> {
    if limits.len() != schedule.n_resources() {
        return Err(Error::Shape(format!(
            "{} limits for {} resources",
            limits.len(),
            schedule.n_resources()
        )));
    }
    if limits.iter().any(|&l| !(l > 0.0)) {
        return Err(domain("limits must be positive"));
    }
    Ok(())
}

fn fits(used: &[f64], extra: &[f64], limits: &[f64]) -> bool {
    used.iter().zip(extra).zip(limits).all(|((u, e), l)| u + e <= *l)
}

/// Ranks eligible transactions by `policy`, then admits them greedily while
/// every resource stays within `limits`. A transaction that does not fit is
/// passed over and the scan continues.
pub fn select_block(
    mempool: &[Transaction],
    schedule: &ResourceSchedule,
    state: &FeeState,
    limits: &[f64],
    policy: SelectionPolicy,
) -> Result<BlockSelection> {
    check_limits(limits, schedule)?;
    let (cands, skipped_ineligible) = candidates(mempool, schedule, state)?;
    let test = test_vector(limits)?;
    let mut ranked: Vec<(RankedTx, &Candidate)> = cands
        .iter()
        .map(|c| {
            let line = tx_line(&c.usage, c.fee_per_gas, c.tx.id.clone())?;
            Ok((
                RankedTx { tx_id: c.tx.id.clone(), distance: ray_distance(&test, &line), fee_per_gas: c.fee_per_gas },
                c,
            ))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|(a, _), (b, _)| {
        let primary = match policy {
            SelectionPolicy::RayOrder => match (a.distance, b.distance) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            },
            SelectionPolicy::FeeDensity => b.fee_per_gas.total_cmp(&a.fee_per_gas),
        };
        primary.then_with(|| a.tx_id.cmp(&b.tx_id))
    });

    let mut usage = vec![0.0; limits.len()];
    let mut included = Vec::new();
    let mut revenue = 0.0;
    for (r, c) in &ranked {
        if fits(&usage, &c.usage, limits) {
            usage.iter_mut().zip(&c.usage).for_each(|(u, e)| *u += e);
            revenue += c.charged_gas * c.fee_per_gas;
            included.push(r.tx_id.clone());
        }
    }
    Ok(BlockSelection {
        residual: limits.iter().zip(&usage).map(|(l, u)| l - u).collect(),
        ranking: ranked.into_iter().map(|(r, _)| r).collect(),
        included,
        skipped_ineligible,
        usage,
        revenue,
    })
}

pub const BRUTE_FORCE_MAX: usize = 20;

/// Exhaustive revenue-maximising subset. Among equal-revenue subsets the
/// larger one wins, then the lexicographically smallest sorted id list.
pub fn brute_force_select(
    mempool: &[Transaction],
    schedule: &ResourceSchedule,
    state: &FeeState,
    limits: &[f64],
) -> Result<BlockSelection> {
    if mempool.len() > BRUTE_FORCE_MAX {
        return Err(Error::SizeLimit { max: BRUTE_FORCE_MAX, got: mempool.len() });
    }
    check_limits(limits, schedule)?;
    let (mut cands, skipped_ineligible) = candidates(mempool, schedule, state)?;
    cands.sort_by(|a, b| a.tx.id.cmp(&b.tx.id));
    let n = cands.len();
    let m = limits.len();
    let revenue_of: Vec<f64> = cands.iter().map(|c| c.charged_gas * c.fee_per_gas).collect();

    let mut best_mask = 0u32;
    let mut best_revenue = 0.0;
    let mut used = vec![0.0; m];
    'masks: for mask in 1u32..(1u32 << n) {
        used.iter_mut().for_each(|u| *u = 0.0);
        let mut revenue = 0.0;
        for (i, c) in cands.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for (u, e) in used.iter_mut().zip(&c.usage) {
                    *u += e;
                }
                revenue += revenue_of[i];
            }
        }
        if used.iter().zip(limits).any(|(u, l)| u > l) {
            continue 'masks;
        }
        if revenue > best_revenue || (revenue == best_revenue && better_tie(mask, best_mask)) {
            best_revenue = revenue;
            best_mask = mask;
        }
    }

    let mut usage = vec![0.0; m];
    let mut included = Vec::new();
    for (i, c) in cands.iter().enumerate() {
        if best_mask & (1 << i) != 0 {
            usage.iter_mut().zip(&c.usage).for_each(|(u, e)| *u += e);
            included.push(c.tx.id.clone());
        }
    }
    Ok(BlockSelection {
        ranking: Vec::new(),
        residual: limits.iter().zip(&usage).map(|(l, u)| l - u).collect(),
        included,
        skipped_ineligible,
        usage,
        revenue: best_revenue,
    })
}

/// Bits index id-sorted candidates, so comparing ascending bit positions
/// compares sorted id lists.
fn better_tie(candidate: u32, incumbent: u32) -> bool {
    let (a, b) = (candidate.count_ones(), incumbent.count_ones());
    if a != b {
        return a > b;
    }
    let bits = |mask: u32| (0..32).filter(move |i| mask & (1 << i) != 0);
    bits(candidate).lt(bits(incumbent))
}
