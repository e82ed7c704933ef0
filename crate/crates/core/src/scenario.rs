//! Scenario documents: declarations, event lists and the runner.
//!
//! A scenario is a JSON object. Instruments and agents are declared first,
//! agents with their opening balance sheets. Events name an operation and
//! carry its arguments; `checkpoint` events take a snapshot. Expectations pin
//! cells of those snapshots to known values.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::{Amount, Scale};
use crate::chainsim::{chain_stats, credit_rewards, simulate_chain, ChainConfig, ChainError, ChainStats, SupplySchedule};
use crate::instruments::{backing_status, BackingRule, BackingStatus, NarrowCover, PriceBook, Rate};
use crate::ledger::{
    verify_global_consistency, Agent, AgentId, ConsistencyFlag, Instrument, InstrumentId, LedgerError, LiabilityClass,
    Sector, Side, World,
};
use crate::sfc::{default_world, BankingMode, BehavioralPolicy, Economy, SfcError, StepRecord};
use crate::txops::{self, DtcConsortium, MiningCost, OpError, VaultConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentDecl {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub class: LiabilityClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub underlying: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backing: Option<BackingRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDecl {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub sector: Sector,
    /// Display scale for this agent's tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub assets: IndexMap<String, i64>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub liabilities: IndexMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDecl {
    #[serde(default)]
    pub time: u64,
    pub op: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub args: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shock {
    pub time: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prices: BTreeMap<String, Rate>,
    /// Fields merged into the running economy's policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSide {
    Asset,
    Liability,
    NetWorth,
}

/// Checkpoint name that expectations may use for the state after the last
/// event, without a snapshot being recorded.
pub const FINAL: &str = "final";

/// A known value of one balance-sheet cell at a checkpoint. `row` matches an
/// instrument id or category; every matching position on that side is summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub checkpoint: String,
    pub agent: String,
    pub side: CellSide,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub row: String,
    pub value: i64,
    /// Set when the recorded value is known to be misprinted; a mismatch is
    /// then reported but not counted as a failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_typo: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyDecl {
    pub mode: BankingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scale: Scale,
    /// Start from the default seven-sector economy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub economy: Option<EconomyDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instruments: Vec<InstrumentDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentDecl>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prices: BTreeMap<String, Rate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shocks: Vec<Shock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerDecl {
    pub agent: String,
    pub share: f64,
}

fn default_true() -> bool {
    true
}

/// Resolved event operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    Checkpoint {
        name: String,
    },
    MinePureAsset {
        miner: String,
        coin: String,
        gross: i64,
        #[serde(default)]
        cost: i64,
        #[serde(default)]
        deposit: Option<String>,
        #[serde(default)]
        payee: Option<String>,
    },
    ExchangeAssets {
        buyer: String,
        seller: String,
        pay: String,
        pay_amount: i64,
        receive: String,
        receive_amount: i64,
    },
    SellCoinToBank {
        seller: String,
        bank: String,
        coin: String,
        amount: i64,
    },
    WithdrawCbdc {
        client: String,
        bank: String,
        central_bank: String,
        amount: i64,
    },
    DepositCbdc {
        client: String,
        bank: String,
        central_bank: String,
        amount: i64,
    },
    SwapReservesForCbdc {
        bank: String,
        central_bank: String,
        amount: i64,
    },
    SwapCbdcForReserves {
        bank: String,
        central_bank: String,
        amount: i64,
    },
    IssueFbsc {
        client: String,
        narrow_bank: String,
        amount: i64,
        #[serde(default)]
        include_cash_and_cbdc: bool,
    },
    RedeemFbsc {
        client: String,
        narrow_bank: String,
        amount: i64,
    },
    IssueCsc {
        client: String,
        client_bank: String,
        custodian: String,
        narrow_bank: String,
        amount: i64,
    },
    RedeemCsc {
        client: String,
        client_bank: String,
        custodian: String,
        narrow_bank: String,
        amount: i64,
    },
    IssueDtc {
        consortium: DtcConsortium,
        buyer: String,
        buyer_bank: String,
        amount: i64,
    },
    RedeemDtc {
        consortium: DtcConsortium,
        holder: String,
        holder_bank: String,
        amount: i64,
    },
    OpenVaultMint {
        vault: VaultConfig,
        borrower: String,
        collateral: i64,
        mint: i64,
        /// Defaults to the price book entry of the collateral.
        #[serde(default)]
        price: Option<Rate>,
    },
    RepayAndRelease {
        vault: VaultConfig,
        borrower: String,
        repay: i64,
        #[serde(default)]
        fee: i64,
    },
    LiquidateVault {
        vault: VaultConfig,
        owner: String,
        #[serde(default)]
        price: Option<Rate>,
    },
    SetPrice {
        instrument: String,
        price: Rate,
    },
    SimulateChain {
        coin: String,
        miners: Vec<MinerDecl>,
        blocks: u64,
        #[serde(default)]
        schedule: Option<SupplySchedule>,
        #[serde(default)]
        config: ChainConfig,
        /// Defaults to the scenario seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        warmup: usize,
        #[serde(default = "default_true")]
        credit: bool,
    },
    SfcRun {
        steps: usize,
        /// Used when the economy is first created; later runs keep the
        /// running policy unless this is given.
        #[serde(default)]
        policy: Option<BehavioralPolicy>,
    },
}

/// Names accepted in the `op` field.
pub const OPERATIONS: &[&str] = &[
    "checkpoint",
    "mine_pure_asset",
    "exchange_assets",
    "sell_coin_to_bank",
    "withdraw_cbdc",
    "deposit_cbdc",
    "swap_reserves_for_cbdc",
    "swap_cbdc_for_reserves",
    "issue_fbsc",
    "redeem_fbsc",
    "issue_csc",
    "redeem_csc",
    "issue_dtc",
    "redeem_dtc",
    "open_vault_mint",
    "repay_and_release",
    "liquidate_vault",
    "set_price",
    "simulate_chain",
    "sfc_run",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    SyntaxError { line: usize, column: usize, message: String },
    #[error("event {index}: unknown operation `{op}`")]
    UnknownOperation { index: usize, op: String },
    #[error("event {index} (`{op}`): invalid arguments: {message}")]
    InvalidArguments { index: usize, op: String, message: String },
    #[error("inconsistent initial state at {location}: {message}")]
    InconsistentInitialState { location: String, message: String },
}

/// A validated scenario and its opening world.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub operations: Vec<(u64, Operation)>,
    pub initial: World,
    pub prices: PriceBook,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.doc.name
    }

    /// Display scale of `agent`, falling back to the scenario scale.
    pub fn scale_of(&self, agent: &AgentId) -> Scale {
        self.doc
            .agents
            .iter()
            .find(|a| a.id == agent.as_str())
            .and_then(|a| a.scale)
            .unwrap_or(self.doc.scale)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::SyntaxError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    compile(doc)
}

/// Pretty JSON form of the document; parsing it again yields the same
/// scenario.
pub fn render_scenario(scenario: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(&scenario.doc).expect("scenario documents serialize");
    s.push('\n');
    s
}

fn resolve(index: usize, ev: &EventDecl) -> Result<Operation, ScenarioError> {
    if !OPERATIONS.contains(&ev.op.as_str()) {
        return Err(ScenarioError::UnknownOperation {
            index,
            op: ev.op.clone(),
        });
    }
    let args = if ev.args.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        ev.args.clone()
    };
    let tagged = serde_json::json!({ "op": ev.op, "args": args });
    serde_json::from_value(tagged).map_err(|e| ScenarioError::InvalidArguments {
        index,
        op: ev.op.clone(),
        message: e.to_string(),
    })
}

fn inconsistent(location: String, e: impl ToString) -> ScenarioError {
    ScenarioError::InconsistentInitialState {
        location,
        message: e.to_string(),
    }
}

pub fn compile(doc: ScenarioDoc) -> Result<Scenario, ScenarioError> {
    let operations = doc
        .events
        .iter()
        .enumerate()
        .map(|(k, ev)| resolve(k, ev).map(|op| (ev.time, op)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut world = match &doc.economy {
        Some(e) => default_world(e.mode),
        None => World::new(),
    };
    // agents first so issuers exist when instruments are checked
    for (k, a) in doc.agents.iter().enumerate() {
        let name = a.name.clone().unwrap_or_else(|| a.id.clone());
        world
            .add_agent(Agent::new(&a.id, &name, a.sector))
            .map_err(|e| inconsistent(format!("agents[{k}]"), e))?;
    }
    // wrapped instruments after the roots they wrap
    let mut decls: Vec<(usize, &InstrumentDecl)> = doc.instruments.iter().enumerate().collect();
    decls.sort_by_key(|(_, d)| d.underlying.is_some());
    for (k, d) in decls {
        let name = d.name.clone().unwrap_or_else(|| d.id.clone());
        let mut inst = match d.class {
            LiabilityClass::Real => Instrument::real(&d.id, &name),
            LiabilityClass::PureAssetCoin => Instrument::coin(&d.id, &name),
            LiabilityClass::IssuedFinancial => {
                let issuer = d
                    .issuer
                    .as_deref()
                    .ok_or_else(|| inconsistent(format!("instruments[{k}]"), "issued instrument needs an issuer"))?;
                Instrument::issued(&d.id, &name, issuer)
            }
        };
        if d.class != LiabilityClass::IssuedFinancial && d.issuer.is_some() {
            return Err(inconsistent(format!("instruments[{k}]"), "only issued instruments have an issuer"));
        }
        if let Some(c) = &d.category {
            inst = inst.with_category(c);
        }
        if let Some(u) = &d.underlying {
            inst = inst.with_underlying(u);
        }
        if let Some(b) = &d.backing {
            inst = inst.with_backing(b.clone());
        }
        world
            .add_instrument(inst)
            .map_err(|e| inconsistent(format!("instruments[{k}]"), e))?;
    }
    for (k, a) in doc.agents.iter().enumerate() {
        let id = AgentId::new(&a.id);
        for (side, map, label) in [(Side::Asset, &a.assets, "assets"), (Side::Liability, &a.liabilities, "liabilities")] {
            for (inst, v) in map {
                world
                    .seed_position(&id, side, &InstrumentId::new(inst), Amount(*v))
                    .map_err(|e| inconsistent(format!("agents[{k}].{label}.{inst}"), e))?;
            }
        }
    }
    let report = verify_global_consistency(&world);
    if let Some(flag) = report.flags.first() {
        return Err(inconsistent("initial state".into(), describe_flag(flag)));
    }
    let mut prices = PriceBook::new();
    for (inst, p) in &doc.prices {
        prices.set(&InstrumentId::new(inst), *p);
    }
    Ok(Scenario {
        doc,
        operations,
        initial: world,
        prices,
    })
}

fn describe_flag(flag: &ConsistencyFlag) -> String {
    serde_json::to_string(flag).unwrap_or_else(|_| format!("{flag:?}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub label: String,
    /// Index of the event after which the snapshot was taken.
    pub event: Option<usize>,
    pub time: u64,
    pub world: World,
    pub backing: Vec<BackingStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Match,
    Mismatch,
    /// Mismatch on a cell recorded as misprinted.
    DocumentedTypo,
    /// The checkpoint or agent does not exist.
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub checkpoint: String,
    pub agent: String,
    pub side: CellSide,
    pub row: String,
    pub expected: i64,
    pub actual: Option<i64>,
    pub status: CheckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunFlag {
    Consistency { event: Option<usize>, detail: ConsistencyFlag },
    Backing { snapshot: String, status: BackingStatus },
    Sfc { step: u64, detail: String },
    Expectation { check: CellCheck },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub event: usize,
    pub miners: Vec<String>,
    pub stats: ChainStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Runs the consistency suite after every event and at every snapshot.
    pub check_invariants: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
    pub checks: Vec<CellCheck>,
    pub flags: Vec<RunFlag>,
    pub chains: Vec<ChainRecord>,
    pub sfc: Vec<StepRecord>,
    pub final_world: World,
}

impl RunReport {
    pub fn snapshot(&self, label: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.label == label)
    }

    pub fn documented_typos(&self) -> impl Iterator<Item = &CellCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::DocumentedTypo)
    }

    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunErrorKind {
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Sfc(#[from] SfcError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("event {index} (`{op}`): {source}")]
pub struct RunError {
    pub index: usize,
    pub op: String,
    #[source]
    pub source: Box<RunErrorKind>,
}

fn a(s: &str) -> AgentId {
    AgentId::new(s)
}

fn i(s: &str) -> InstrumentId {
    InstrumentId::new(s)
}

/// Sum of the positions on `side` whose instrument id or category is `row`.
pub fn cell_value(world: &World, agent: &AgentId, side: CellSide, row: &str) -> Option<i64> {
    let ag = world.agent(agent)?;
    let map = match side {
        CellSide::NetWorth => return Some(ag.net_worth().value()),
        CellSide::Asset => &ag.sheet.assets,
        CellSide::Liability => &ag.sheet.liabilities,
    };
    Some(
        map.iter()
            .filter(|(id, _)| id.as_str() == row || world.instrument(id).map(|x| x.category()) == Some(row))
            .map(|(_, v)| v.value())
            .sum(),
    )
}

fn backing_of(world: &World, prices: &PriceBook) -> Vec<BackingStatus> {
    world
        .instruments()
        .filter(|x| x.backing.is_some())
        .filter_map(|x| backing_status(world, &x.id, prices).ok())
        .collect()
}

struct Runner<'a> {
    scenario: &'a Scenario,
    options: &'a RunOptions,
    seed: u64,
    world: World,
    prices: PriceBook,
    economy: Option<Economy>,
    report: RunReport,
}

impl Runner<'_> {
    fn snapshot(&mut self, label: &str, event: Option<usize>) {
        let backing = backing_of(&self.world, &self.prices);
        if self.options.check_invariants {
            for st in backing.iter().filter(|s| !s.satisfied) {
                self.report.flags.push(RunFlag::Backing {
                    snapshot: label.to_string(),
                    status: st.clone(),
                });
            }
        }
        self.report.snapshots.push(Snapshot {
            label: label.to_string(),
            event,
            time: self.world.clock(),
            world: self.world.without_journal(),
            backing,
        });
    }

    fn apply_shock(&mut self, shock: &Shock) -> Result<(), RunErrorKind> {
        for (inst, p) in &shock.prices {
            self.prices.set(&i(inst), *p);
        }
        if let Some(patch) = &shock.policy {
            if let Some(e) = self.economy.as_mut() {
                let mut v = serde_json::to_value(e.policy()).expect("policies serialize");
                let obj = v.as_object_mut().expect("policy is an object");
                for (k, x) in patch {
                    obj.insert(k.clone(), x.clone());
                }
                let p: BehavioralPolicy = serde_json::from_value(v).map_err(|e| RunErrorKind::Invalid(e.to_string()))?;
                e.set_policy(p)?;
            }
        }
        Ok(())
    }

    fn exec(&mut self, index: usize, op: &Operation) -> Result<(), RunErrorKind> {
        let w = &mut self.world;
        match op {
            Operation::Checkpoint { name } => {
                let name = name.clone();
                self.snapshot(&name, Some(index));
            }
            Operation::MinePureAsset { miner, coin, gross, cost, deposit, payee } => {
                let rail = match (deposit, payee) {
                    (Some(d), Some(p)) => Some(MiningCost {
                        deposit: i(d),
                        payee: a(p),
                    }),
                    (None, None) => None,
                    _ => return Err(RunErrorKind::Invalid("deposit and payee go together".into())),
                };
                txops::mine_pure_asset(w, &a(miner), &i(coin), Amount(*gross), Amount(*cost), rail.as_ref())?;
            }
            Operation::ExchangeAssets { buyer, seller, pay, pay_amount, receive, receive_amount } => {
                txops::exchange_assets(w, &a(buyer), &a(seller), &i(pay), Amount(*pay_amount), &i(receive), Amount(*receive_amount))?;
            }
            Operation::SellCoinToBank { seller, bank, coin, amount } => {
                txops::sell_coin_to_bank(w, &a(seller), &a(bank), &i(coin), Amount(*amount))?;
            }
            Operation::WithdrawCbdc { client, bank, central_bank, amount } => {
                txops::withdraw_cbdc(w, &a(client), &a(bank), &a(central_bank), Amount(*amount))?;
            }
            Operation::DepositCbdc { client, bank, central_bank, amount } => {
                txops::deposit_cbdc(w, &a(client), &a(bank), &a(central_bank), Amount(*amount))?;
            }
            Operation::SwapReservesForCbdc { bank, central_bank, amount } => {
                txops::swap_reserves_for_cbdc(w, &a(bank), &a(central_bank), Amount(*amount))?;
            }
            Operation::SwapCbdcForReserves { bank, central_bank, amount } => {
                txops::swap_cbdc_for_reserves(w, &a(bank), &a(central_bank), Amount(*amount))?;
            }
            Operation::IssueFbsc { client, narrow_bank, amount, include_cash_and_cbdc } => {
                let cover = NarrowCover {
                    include_cash_and_cbdc: *include_cash_and_cbdc,
                };
                txops::issue_fbsc(w, &a(client), &a(narrow_bank), Amount(*amount), cover)?;
            }
            Operation::RedeemFbsc { client, narrow_bank, amount } => {
                txops::redeem_fbsc(w, &a(client), &a(narrow_bank), Amount(*amount))?;
            }
            Operation::IssueCsc { client, client_bank, custodian, narrow_bank, amount } => {
                txops::issue_csc(w, &a(client), &a(client_bank), &a(custodian), &a(narrow_bank), Amount(*amount))?;
            }
            Operation::RedeemCsc { client, client_bank, custodian, narrow_bank, amount } => {
                txops::redeem_csc(w, &a(client), &a(client_bank), &a(custodian), &a(narrow_bank), Amount(*amount))?;
            }
            Operation::IssueDtc { consortium, buyer, buyer_bank, amount } => {
                txops::issue_dtc(w, consortium, &a(buyer), &a(buyer_bank), Amount(*amount))?;
            }
            Operation::RedeemDtc { consortium, holder, holder_bank, amount } => {
                txops::redeem_dtc(w, consortium, &a(holder), &a(holder_bank), Amount(*amount))?;
            }
            Operation::OpenVaultMint { vault, borrower, collateral, mint, price } => {
                let p = price.unwrap_or_else(|| self.prices.price(&vault.collateral));
                txops::open_vault_mint(w, &a(borrower), vault, Amount(*collateral), Amount(*mint), p)?;
            }
            Operation::RepayAndRelease { vault, borrower, repay, fee } => {
                txops::repay_and_release(w, &a(borrower), vault, Amount(*repay), Amount(*fee))?;
            }
            Operation::LiquidateVault { vault, owner, price } => {
                let p = price.unwrap_or_else(|| self.prices.price(&vault.collateral));
                txops::liquidate_vault(w, vault, &a(owner), p)?;
            }
            Operation::SetPrice { instrument, price } => {
                self.prices.set(&i(instrument), *price);
            }
            Operation::SimulateChain { coin, miners, blocks, schedule, config, seed, warmup, credit } => {
                let schedule = schedule.unwrap_or_else(SupplySchedule::bitcoin);
                let shares: Vec<f64> = miners.iter().map(|m| m.share).collect();
                let state = simulate_chain(&schedule, &shares, *blocks, seed.unwrap_or(self.seed), config)?;
                let ids: Vec<AgentId> = miners.iter().map(|m| a(&m.agent)).collect();
                if *credit {
                    credit_rewards(w, &state, &ids, &i(coin))?;
                }
                self.report.chains.push(ChainRecord {
                    event: index,
                    miners: miners.iter().map(|m| m.agent.clone()).collect(),
                    stats: chain_stats(&state, miners.len(), *warmup),
                });
            }
            Operation::SfcRun { steps, policy } => {
                let mut econ = match self.economy.take() {
                    Some(mut e) => {
                        e.set_world(w.clone())?;
                        if let Some(p) = policy {
                            e.set_policy(p.clone())?;
                        }
                        e
                    }
                    None => Economy::new(w.clone(), policy.clone().unwrap_or_default(), self.seed)?,
                };
                let result = econ.run(*steps);
                self.world = econ.world().clone();
                self.economy = Some(econ);
                for rec in result? {
                    if self.options.check_invariants {
                        for f in &rec.sfc.flags {
                            self.report.flags.push(RunFlag::Sfc {
                                step: rec.step,
                                detail: format!("{f:?}"),
                            });
                        }
                        for f in rec.stocks.flags() {
                            self.report.flags.push(RunFlag::Sfc {
                                step: rec.step,
                                detail: format!("{f:?}"),
                            });
                        }
                    }
                    self.report.sfc.push(rec);
                }
            }
        }
        Ok(())
    }
}

pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunReport, RunError> {
    let seed = options.seed.unwrap_or(scenario.doc.seed);
    let mut r = Runner {
        scenario,
        options,
        seed,
        world: scenario.initial.clone(),
        prices: scenario.prices.clone(),
        economy: None,
        report: RunReport {
            scenario: scenario.doc.name.clone(),
            seed,
            snapshots: Vec::new(),
            checks: Vec::new(),
            flags: Vec::new(),
            chains: Vec::new(),
            sfc: Vec::new(),
            final_world: World::new(),
        },
    };
    r.snapshot("initial", None);
    let mut shocks: Vec<&Shock> = scenario.doc.shocks.iter().collect();
    shocks.sort_by_key(|s| s.time);
    let mut next_shock = 0;
    for (index, (time, op)) in scenario.operations.iter().enumerate() {
        let fail = |source: RunErrorKind| RunError {
            index,
            op: scenario.doc.events[index].op.clone(),
            source: Box::new(source),
        };
        if *time > r.world.clock() {
            r.world.set_clock(*time);
        }
        while next_shock < shocks.len() && shocks[next_shock].time <= *time {
            r.apply_shock(shocks[next_shock]).map_err(fail)?;
            next_shock += 1;
        }
        r.exec(index, op).map_err(fail)?;
        if options.check_invariants {
            for f in verify_global_consistency(&r.world).flags {
                r.report.flags.push(RunFlag::Consistency {
                    event: Some(index),
                    detail: f,
                });
            }
        }
    }
    let mut checks = Vec::new();
    for e in &r.scenario.doc.expectations {
        let world = match r.report.snapshot(&e.checkpoint) {
            Some(s) => Some(&s.world),
            None if e.checkpoint == FINAL => Some(&r.world),
            None => None,
        };
        let actual = world.and_then(|w| cell_value(w, &a(&e.agent), e.side, &e.row));
        let status = match actual {
            None => CheckStatus::Missing,
            Some(v) if v == e.value => CheckStatus::Match,
            Some(_) if e.known_typo.is_some() => CheckStatus::DocumentedTypo,
            Some(_) => CheckStatus::Mismatch,
        };
        checks.push(CellCheck {
            checkpoint: e.checkpoint.clone(),
            agent: e.agent.clone(),
            side: e.side,
            row: e.row.clone(),
            expected: e.value,
            actual,
            status,
            note: e.known_typo.clone(),
        });
    }
    for c in &checks {
        if matches!(c.status, CheckStatus::Mismatch | CheckStatus::Missing) {
            r.report.flags.push(RunFlag::Expectation { check: c.clone() });
        }
    }
    r.report.checks = checks;
    r.report.final_world = r.world;
    Ok(r.report)
}

/// Scenarios shipped with the library, by name.
pub const BUILTIN: &[(&str, &str)] = &[
    ("table1", include_str!("../fixtures/table1.json")),
    ("table2", include_str!("../fixtures/table2.json")),
    ("table3", include_str!("../fixtures/table3.json")),
    ("table4", include_str!("../fixtures/table4.json")),
    ("table5", include_str!("../fixtures/table5.json")),
    ("table6", include_str!("../fixtures/table6.json")),
    ("table7", include_str!("../fixtures/table7.json")),
    ("table8", include_str!("../fixtures/table8.json")),
    ("tables-all", include_str!("../fixtures/tables-all.json")),
    ("sfc-demo", include_str!("../fixtures/sfc-demo.json")),
    ("chain-demo", include_str!("../fixtures/chain-demo.json")),
];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_source(name).map(|src| parse_scenario(src).unwrap_or_else(|e| panic!("built-in `{name}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "name": "small",
        "instruments": [
            {"id": "dep", "class": "issued_financial", "issuer": "bank", "category": "deposits"},
            {"id": "bitcoin", "class": "pure_asset_coin"}
        ],
        "agents": [
            {"id": "bank", "sector": "banks", "liabilities": {"dep": 100}},
            {"id": "alice", "sector": "households", "assets": {"dep": 100, "bitcoin": 5}}
        ],
        "events": [
            {"op": "mine_pure_asset", "args": {"miner": "alice", "coin": "bitcoin", "gross": 10}},
            {"op": "checkpoint", "args": {"name": "after"}}
        ],
        "expectations": [
            {"checkpoint": "after", "agent": "alice", "side": "asset", "row": "bitcoin", "value": 15},
            {"checkpoint": "after", "agent": "alice", "side": "net_worth", "value": 116, "known_typo": "off by one"}
        ]
    }"#;

    #[test]
    fn parses_and_runs() {
        let s = parse_scenario(SMALL).unwrap();
        assert_eq!(s.operations.len(), 2);
        let r = run_scenario(&s, &RunOptions { check_invariants: true, ..Default::default() }).unwrap();
        assert_eq!(r.snapshots.len(), 2);
        assert_eq!(r.checks[0].status, CheckStatus::Match);
        assert_eq!(r.checks[1].status, CheckStatus::DocumentedTypo);
        assert!(r.is_clean());
    }

    #[test]
    fn empty_document_is_a_syntax_error() {
        assert!(matches!(parse_scenario(""), Err(ScenarioError::SyntaxError { .. })));
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = parse_scenario("{\n  \"name\": \"x\",\n  \"seed\": }").unwrap_err();
        match err {
            ScenarioError::SyntaxError { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn missing_sector_is_rejected() {
        let text = r#"{"name": "x", "agents": [{"id": "a"}]}"#;
        assert!(matches!(parse_scenario(text), Err(ScenarioError::SyntaxError { .. })));
    }

    #[test]
    fn unknown_operation_names_its_event() {
        let text = r#"{"name": "x", "events": [{"op": "checkpoint", "args": {"name": "a"}}, {"op": "print_money"}]}"#;
        assert_eq!(
            parse_scenario(text).unwrap_err(),
            ScenarioError::UnknownOperation { index: 1, op: "print_money".into() }
        );
    }

    #[test]
    fn bad_arguments_are_reported() {
        let text = r#"{"name": "x", "events": [{"op": "checkpoint", "args": {"label": "a"}}]}"#;
        assert!(matches!(parse_scenario(text), Err(ScenarioError::InvalidArguments { index: 0, .. })));
    }

    #[test]
    fn asymmetric_opening_state_is_rejected() {
        let text = r#"{"name": "x",
            "instruments": [{"id": "dep", "class": "issued_financial", "issuer": "bank"}],
            "agents": [{"id": "bank", "sector": "banks"}, {"id": "a", "sector": "households", "assets": {"dep": 5}}]}"#;
        assert!(matches!(
            parse_scenario(text),
            Err(ScenarioError::InconsistentInitialState { .. })
        ));
    }

    #[test]
    fn zero_events_give_one_snapshot() {
        let s = parse_scenario(r#"{"name": "x"}"#).unwrap();
        let r = run_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(r.snapshots.len(), 1);
        assert_eq!(r.snapshots[0].label, "initial");
    }

    #[test]
    fn operation_errors_carry_the_event_index() {
        let text = SMALL.replace("\"gross\": 10", "\"gross\": 10, \"cost\": 1000, \"deposit\": \"dep\", \"payee\": \"bank\"");
        let s = parse_scenario(&text).unwrap();
        let err = run_scenario(&s, &RunOptions::default()).unwrap_err();
        assert_eq!(err.index, 0);
        assert_eq!(err.op, "mine_pure_asset");
    }

    #[test]
    fn render_round_trips() {
        let s = parse_scenario(SMALL).unwrap();
        let again = parse_scenario(&render_scenario(&s)).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn every_listed_operation_resolves() {
        for op in OPERATIONS {
            let ev = EventDecl { time: 0, op: op.to_string(), args: serde_json::Value::Null };
            // missing arguments are fine here, unknown names are not
            assert!(!matches!(resolve(0, &ev), Err(ScenarioError::UnknownOperation { .. })));
        }
    }
}
