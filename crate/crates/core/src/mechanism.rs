//! Block-by-block fee-market simulation: random mempool arrivals, block
//! selection, then base-fee and dynamic-gas updates.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::builder::{select_block, SelectionPolicy};
use crate::error::{domain, Error, Result};
use crate::feemech::{advance, tx_resource_usage, FeeState, ResourceSchedule, Transaction};
use crate::rng::stream_rng;

/// Random mempool arrivals per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MempoolGenerator {
    /// Mean number of new transactions per block (Poisson).
    pub arrival_rate: f64,
    /// Each operation count is uniform on `0..=max`; all-zero draws are redrawn.
    pub op_count_max: Vec<u64>,
    /// Log-normal priority fee: `ln p ~ N(priority_log_mean, priority_log_sd^2)`, Gwei.
    pub priority_log_mean: f64,
    pub priority_log_sd: f64,
    /// Max fee is `priority + base_fee * u`, `u` uniform on `[1, max_fee_headroom]`.
    pub max_fee_headroom: f64,
    /// Oldest transactions are dropped beyond this size.
    pub max_mempool: usize,
}

impl MempoolGenerator {
    pub fn validate(&self, schedule: &ResourceSchedule) -> Result<()> {
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return Err(domain("arrival rate must be positive"));
        }
        if self.op_count_max.len() != schedule.n_ops() {
            return Err(Error::Shape(format!(
                "op_count_max has {} entries, schedule has {} operations",
                self.op_count_max.len(),
                schedule.n_ops()
            )));
        }
        if self.op_count_max.iter().all(|&m| m == 0) {
            return Err(domain("at least one operation needs a positive max count"));
        }
        if !(self.priority_log_sd >= 0.0) || !self.priority_log_mean.is_finite() {
            return Err(domain("priority fee distribution is invalid"));
        }
        if !(self.max_fee_headroom >= 1.0) {
            return Err(domain("max fee headroom must be at least 1"));
        }
        if self.max_mempool == 0 {
            return Err(domain("max mempool size must be positive"));
        }
        Ok(())
    }

    fn arrivals(&self, rng: &mut impl Rng, block: u64, base_fee: f64) -> Vec<Transaction> {
        let count = Poisson::new(self.arrival_rate).expect("validated rate").sample(rng) as usize;
        let fee = LogNormal::new(self.priority_log_mean, self.priority_log_sd).expect("validated fee distribution");
        (0..count)
            .map(|i| {
                let op_counts = loop {
                    let c: Vec<u64> = self.op_count_max.iter().map(|&m| rng.random_range(0..=m)).collect();
                    if c.iter().any(|&x| x > 0) {
                        break c;
                    }
                };
                let priority_fee = fee.sample(rng);
                let headroom = rng.random_range(1.0..=self.max_fee_headroom);
                Transaction::new(format!("b{block:06}-{i:04}"), op_counts, priority_fee, priority_fee + base_fee * headroom)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block: u64,
    /// Base fee and dynamic gas in force for this block.
    pub base_fee: f64,
    pub dynamic_gas: Vec<f64>,
    pub usage: Vec<f64>,
    /// Base fee times charged gas of included transactions.
    pub burned: f64,
    /// Priority fees paid to the builder.
    pub revenue: f64,
    pub n_included: usize,
    pub mempool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub n_blocks: u64,
    pub initial_base_fee: f64,
    pub seed: u64,
    #[serde(default)]
    pub policy: SelectionPolicy,
}

/// Runs the fee market for `config.n_blocks` blocks. Blocks are built
/// against the hard limits (`elasticity * limits`); the updates then compare
/// usage with the targets. Block `b` draws its arrivals from stream `b`.
pub fn simulate_mechanism(
    schedule: &ResourceSchedule,
    generator: &MempoolGenerator,
    config: &MechanismConfig,
) -> Result<Vec<BlockRecord>> {
    schedule.validate()?;
    generator.validate(schedule)?;
    if !(config.initial_base_fee >= 0.0) {
        return Err(domain("initial base fee must be non-negative"));
    }
    let hard = schedule.hard_limits();
    let mut state = FeeState::initial(schedule, config.initial_base_fee);
    let mut mempool: Vec<Transaction> = Vec::new();
    let mut records = Vec::with_capacity(config.n_blocks as usize);
    for block in 0..config.n_blocks {
        let mut rng = stream_rng(config.seed, block);
        mempool.extend(generator.arrivals(&mut rng, block, state.base_fee));
        if mempool.len() > generator.max_mempool {
            let excess = mempool.len() - generator.max_mempool;
            mempool.drain(..excess);
        }
        let selection = select_block(&mempool, schedule, &state, &hard, config.policy)?;
        let included: std::collections::HashSet<&str> = selection.included.iter().map(String::as_str).collect();
        let mut burned = 0.0;
        for tx in mempool.iter().filter(|t| included.contains(t.id.as_str())) {
            burned += state.base_fee * state.charged_gas(&tx_resource_usage(schedule, tx)?);
        }
        records.push(BlockRecord {
            block,
            base_fee: state.base_fee,
            dynamic_gas: state.dynamic_gas.clone(),
            usage: selection.usage.clone(),
            burned,
            revenue: selection.revenue,
            n_included: selection.included.len(),
            mempool_size: mempool.len(),
        });
        mempool.retain(|t| !included.contains(t.id.as_str()));
        state = advance(&state, &selection.usage, schedule)?;
    }
    Ok(records)
}

/// CSV trace: `block, base_fee, lambda_1..lambda_M, usage_1..usage_M, burned, revenue`.
pub fn trace_csv(records: &[BlockRecord], n_resources: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["block".to_string(), "base_fee".to_string()];
    header.extend((1..=n_resources).map(|k| format!("lambda_{k}")));
    header.extend((1..=n_resources).map(|k| format!("usage_{k}")));
    header.extend(["burned".to_string(), "revenue".to_string()]);
    w.write_record(&header).expect("in-memory write");
    for r in records {
        let mut row = vec![r.block.to_string(), r.base_fee.to_string()];
        row.extend(r.dynamic_gas.iter().map(f64::to_string));
        row.extend(r.usage.iter().map(f64::to_string));
        row.extend([r.burned.to_string(), r.revenue.to_string()]);
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Mempool fixture: columns `id`, `priority_fee`, `max_fee` and one count
/// column per schedule operation name. `#` lines are comments.
pub fn parse_mempool(csv_text: &str, schedule: &ResourceSchedule) -> Result<Vec<Transaction>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let id_idx = col("id")?;
    let prio_idx = col("priority_fee")?;
    let max_idx = col("max_fee")?;
    let op_idx: Vec<usize> = schedule.op_names.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut txs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| Error::Row { line, message: format!("bad number `{}`", field(i)) })
        };
        let op_counts = op_idx
            .iter()
            .map(|&i| {
                field(i).parse::<u64>().map_err(|_| Error::Row { line, message: format!("bad count `{}`", field(i)) })
            })
            .collect::<Result<Vec<_>>>()?;
        let tx = Transaction::new(field(id_idx), op_counts, num(prio_idx)?, num(max_idx)?);
        tx.validate().map_err(|e| Error::Row { line, message: e.to_string() })?;
        txs.push(tx);
    }
    Ok(txs)
}
