//! Supply side of pure-asset coins: coinbase halving, block arrivals with
//! difficulty retargeting, longest-chain selection and pre-mine release.
//!
//! Coin quantities are integer subunits (`SUBUNITS_PER_COIN` per coin) so a
//! 6.25 reward is exact.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::ledger::{AgentId, InstrumentId, Side, Transaction, World};
use crate::txops::OpError;

pub const SUBUNITS_PER_COIN: i64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplySchedule {
    /// Reward of the first era, in subunits.
    pub initial_reward: i64,
    pub halving_interval: u64,
    /// Seconds.
    pub target_block_time: f64,
}

impl SupplySchedule {
    /// 50 coins per block halving every 210,000 blocks, one block per ten
    /// minutes.
    pub fn bitcoin() -> Self {
        SupplySchedule {
            initial_reward: 50 * SUBUNITS_PER_COIN,
            halving_interval: 210_000,
            target_block_time: 600.0,
        }
    }

    /// Geometric-series limit `2 × initial_reward × halving_interval`.
    pub fn asymptotic_supply(&self) -> Amount {
        Amount(2 * self.initial_reward * self.halving_interval as i64)
    }
}

impl Default for SupplySchedule {
    fn default() -> Self {
        SupplySchedule::bitcoin()
    }
}

/// Reward at `height`: the initial reward shifted right once per completed
/// era, truncating to whole subunits until it reaches zero.
pub fn block_reward(schedule: &SupplySchedule, height: u64) -> Amount {
    let era = height / schedule.halving_interval.max(1);
    if era >= 63 {
        return Amount::ZERO;
    }
    Amount(schedule.initial_reward >> era)
}

/// Sum of rewards of blocks `0..height`.
pub fn cumulative_supply(schedule: &SupplySchedule, height: u64) -> Amount {
    let interval = schedule.halving_interval.max(1);
    let mut total: i64 = 0;
    let mut start = 0u64;
    while start < height {
        let reward = block_reward(schedule, start).value();
        if reward == 0 {
            break;
        }
        let end = (start + interval).min(height);
        total += reward * (end - start) as i64;
        start += interval;
    }
    Amount(total)
}

/// Renders subunits as a decimal coin amount, e.g. `6.25`.
pub fn format_coins(subunits: Amount) -> String {
    let v = subunits.value();
    let sign = if v < 0 { "-" } else { "" };
    let abs = v.unsigned_abs();
    let unit = SUBUNITS_PER_COIN as u64;
    let whole = abs / unit;
    let frac = abs % unit;
    if frac == 0 {
        format!("{sign}{whole}")
    } else {
        let digits = format!("{frac:08}");
        format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremineSchedule {
    pub total: i64,
    /// Coins released per month.
    pub release_rate: i64,
    pub start: i64,
}

impl PremineSchedule {
    /// Month-indexed release: nothing before `start`, then a constant rate
    /// capped at the total.
    pub fn circulating(&self, month: i64) -> i64 {
        let elapsed = (month - self.start).max(0) as i128;
        (self.release_rate as i128 * elapsed).min(self.total as i128) as i64
    }
}

pub fn premined_circulation(schedule: &PremineSchedule, month: i64) -> i64 {
    schedule.circulating(month)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub miner: usize,
    pub reward: Amount,
    pub timestamp: f64,
    pub difficulty: f64,
}

/// A chain branch stored as the number of blocks it shares with the trunk
/// (branch 0) plus its own blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub fork_point: usize,
    pub blocks: Vec<Block>,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.fork_point + self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub branches: Vec<Branch>,
    pub canonical: usize,
}

impl ChainState {
    /// Builds a state from standalone branches (no shared trunk).
    pub fn from_branches(branches: Vec<Vec<Block>>) -> Self {
        let branches = branches
            .into_iter()
            .map(|blocks| Branch { fork_point: 0, blocks })
            .collect();
        ChainState { branches, canonical: 0 }
    }

    fn trunk(&self) -> &[Block] {
        self.branches.first().map(|b| b.blocks.as_slice()).unwrap_or(&[])
    }

    pub fn branch_blocks(&self, idx: usize) -> impl Iterator<Item = &Block> {
        let b = &self.branches[idx];
        let shared = if idx == 0 { &[][..] } else { &self.trunk()[..b.fork_point] };
        shared.iter().chain(b.blocks.iter())
    }

    fn final_timestamp(&self, idx: usize) -> f64 {
        self.branch_blocks(idx).last().map(|b| b.timestamp).unwrap_or(0.0)
    }

    pub fn canonical_blocks(&self) -> impl Iterator<Item = &Block> {
        self.branch_blocks(self.canonical)
    }

    pub fn height(&self) -> usize {
        self.branches.get(self.canonical).map(|b| b.len()).unwrap_or(0)
    }

    /// Rewards on the canonical branch only.
    pub fn canonical_supply(&self) -> Amount {
        self.canonical_blocks().map(|b| b.reward).sum()
    }

    /// Blocks not on the canonical branch.
    pub fn orphaned(&self) -> Vec<&Block> {
        let mut out = Vec::new();
        if self.canonical != 0 {
            let shared = self.branches[self.canonical].fork_point;
            out.extend(self.trunk().iter().skip(shared));
        }
        for (i, b) in self.branches.iter().enumerate().skip(1) {
            if i != self.canonical {
                out.extend(b.blocks.iter());
            }
        }
        out
    }

    /// Blocks won per miner on the canonical branch.
    pub fn wins(&self, n_miners: usize) -> Vec<u64> {
        let mut w = vec![0u64; n_miners];
        for b in self.canonical_blocks() {
            if b.miner < n_miners {
                w[b.miner] += 1;
            }
        }
        w
    }

    /// Inter-block times along the canonical branch, starting from time zero.
    pub fn intervals(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.canonical_blocks()
            .map(|b| {
                let d = b.timestamp - prev;
                prev = b.timestamp;
                d
            })
            .collect()
    }
}

/// Selects the longest branch; equal lengths go to the earliest final
/// timestamp, then the lowest index.
pub fn resolve_fork(state: &ChainState) -> ChainState {
    let mut best = 0;
    for i in 1..state.branches.len() {
        let (li, lb) = (state.branches[i].len(), state.branches[best].len());
        if li > lb || (li == lb && state.final_timestamp(i) < state.final_timestamp(best)) {
            best = i;
        }
    }
    ChainState {
        branches: state.branches.clone(),
        canonical: best,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("invalid hash shares: {0}")]
    InvalidShares(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Blocks between difficulty adjustments.
    pub retarget_interval: u64,
    /// Largest factor a single adjustment may apply.
    pub max_adjustment: f64,
    /// Starting difficulty relative to the one matching the target time.
    pub initial_difficulty_factor: f64,
    /// Multiplicative hash-rate growth per block.
    pub hashrate_growth: f64,
    /// Seconds a new block takes to reach other miners. A competing block
    /// found within this window starts a fork.
    pub propagation_delay: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            retarget_interval: 2_016,
            max_adjustment: 4.0,
            initial_difficulty_factor: 1.0,
            hashrate_growth: 0.0,
            propagation_delay: 0.0,
        }
    }
}

fn validate_shares(shares: &[f64]) -> Result<(), ChainError> {
    if shares.is_empty() {
        return Err(ChainError::InvalidShares("no miners".into()));
    }
    if let Some(s) = shares.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(ChainError::InvalidShares(format!("share {s} is not a non-negative number")));
    }
    let sum: f64 = shares.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ChainError::InvalidShares(format!("shares sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Simulates `n_blocks` blocks. Hash rate starts at 1 (difficulty is in
/// hash-seconds), inter-block times are exponential with rate
/// `hashrate / difficulty`, and each block goes to a miner drawn by hash
/// share. Every `retarget_interval` blocks the difficulty is scaled by the
/// ratio of target to observed window time.
///
/// With a propagation delay, a second block found by another miner at the
/// same height within the delay forks the chain; the next block lands on one
/// of the two tips at random and the other becomes an orphan.
pub fn simulate_chain(
    schedule: &SupplySchedule,
    hash_shares: &[f64],
    n_blocks: u64,
    seed: u64,
    config: &ChainConfig,
) -> Result<ChainState, ChainError> {
    validate_shares(hash_shares)?;
    if config.retarget_interval == 0 || config.max_adjustment < 1.0 || config.initial_difficulty_factor <= 0.0 {
        return Err(ChainError::InvalidShares("invalid chain configuration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(hash_shares).map_err(|e| ChainError::InvalidShares(e.to_string()))?;
    let target = schedule.target_block_time;
    let mut hashrate = 1.0f64;
    let mut difficulty = target * config.initial_difficulty_factor;
    let mut now = 0.0f64;
    let mut window_start = 0.0f64;
    let mut trunk: Vec<Block> = Vec::with_capacity(n_blocks as usize);
    let mut stale: Vec<Branch> = Vec::new();
    let mut pending: Option<Block> = None;

    for height in 0..n_blocks {
        let exp = Exp::new(hashrate / difficulty).expect("positive rate");
        let dt: f64 = exp.sample(&mut rng);
        now += dt;
        let miner = pick.sample(&mut rng);
        let block = Block {
            height,
            miner,
            reward: block_reward(schedule, height),
            timestamp: now,
            difficulty,
        };
        if let Some(rival) = pending.take() {
            // the new block extends one of the two tips at the previous height
            if rng.gen_bool(0.5) {
                let last = trunk.pop().expect("fork has a trunk tip");
                stale.push(Branch { fork_point: trunk.len(), blocks: vec![last] });
                trunk.push(rival);
            } else {
                stale.push(Branch { fork_point: trunk.len() - 1, blocks: vec![rival] });
            }
        }
        trunk.push(block);
        if config.propagation_delay > 0.0 && hash_shares.iter().filter(|s| **s > 0.0).count() > 1 {
            let rival_dt: f64 = exp.sample(&mut rng);
            if rival_dt < config.propagation_delay && height + 1 < n_blocks {
                let mut rival_miner = pick.sample(&mut rng);
                while rival_miner == miner {
                    rival_miner = pick.sample(&mut rng);
                }
                pending = Some(Block {
                    height,
                    miner: rival_miner,
                    reward: block_reward(schedule, height),
                    timestamp: now + rival_dt,
                    difficulty,
                });
            }
        }
        hashrate *= 1.0 + config.hashrate_growth;
        if (height + 1) % config.retarget_interval == 0 {
            let actual = (now - window_start).max(f64::MIN_POSITIVE);
            let expected = target * config.retarget_interval as f64;
            let factor = (expected / actual).clamp(1.0 / config.max_adjustment, config.max_adjustment);
            difficulty *= factor;
            window_start = now;
        }
    }
    let mut branches = vec![Branch { fork_point: 0, blocks: trunk }];
    branches.extend(stale);
    Ok(resolve_fork(&ChainState { branches, canonical: 0 }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub blocks: usize,
    pub orphans: usize,
    pub mean_interval: f64,
    /// Mean inter-block time after the first `warmup` blocks.
    pub mean_interval_after_warmup: f64,
    pub wins: Vec<u64>,
    pub supply: Amount,
}

pub fn chain_stats(state: &ChainState, n_miners: usize, warmup: usize) -> ChainStats {
    let iv = state.intervals();
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let tail = if warmup < iv.len() { &iv[warmup..] } else { &[][..] };
    ChainStats {
        blocks: iv.len(),
        orphans: state.orphaned().len(),
        mean_interval: mean(&iv),
        mean_interval_after_warmup: mean(tail),
        wins: state.wins(n_miners),
        supply: state.canonical_supply(),
    }
}

/// Credits canonical-chain rewards to the miners' ledger agents, one
/// creation-flagged transaction per miner with a non-zero total. Amounts are
/// coin subunits.
pub fn credit_rewards(
    world: &mut World,
    state: &ChainState,
    miners: &[AgentId],
    coin: &InstrumentId,
) -> Result<Vec<u64>, OpError> {
    let mut totals = vec![0i64; miners.len()];
    for b in state.canonical_blocks() {
        let slot = totals
            .get_mut(b.miner)
            .ok_or_else(|| OpError::InvalidArgument(format!("block mined by unknown miner {}", b.miner)))?;
        *slot += b.reward.value();
    }
    let mut seqs = Vec::new();
    for (agent, total) in miners.iter().zip(totals) {
        if total == 0 {
            continue;
        }
        let tx = Transaction::new(format!("coinbase rewards to {agent}"))
            .creation()
            .change(agent, Side::Asset, coin, total);
        seqs.push(world.post(tx)?);
    }
    Ok(seqs)
}
