//! Double-entry balance-sheet core.
//!
//! A [`World`] owns every agent's balance sheet, the instrument registry, a
//! period clock and an append-only journal. All mutations go through
//! [`World::post`], which validates a multi-leg [`Transaction`] in full before
//! touching any position, so a rejected transaction leaves the world untouched.
//!
//! Positions are kept as two non-negative maps (assets, liabilities). Net worth
//! is always derived.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::instruments::BackingRule;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(
    /// Identifier of an agent (person, firm, bank, protocol, sector aggregate).
    AgentId
);
string_id!(
    /// Identifier of an instrument (asset class).
    InstrumentId
);

/// Whose liability an instrument is, if anyone's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiabilityClass {
    /// Physical assets: houses, cars, artwork, baskets of goods.
    Real,
    /// Coins that are nobody's liability (bitcoin, ether, XRP).
    PureAssetCoin,
    /// Claims that appear once as an asset and once as a liability of the issuer.
    IssuedFinancial,
}

impl LiabilityClass {
    pub fn is_financial(self) -> bool {
        matches!(self, LiabilityClass::IssuedFinancial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instrument {
    pub id: InstrumentId,
    pub name: String,
    pub class: LiabilityClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer: Option<AgentId>,
    /// Role label used to look up standard rails (`deposits`, `reserves`, ...)
    /// and to group rows in sector matrices. Defaults to the id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// For locked or wrapped forms of a non-financial instrument (a collateral
    /// vault holding ether), the instrument whose units it carries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub underlying: Option<InstrumentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backing: Option<BackingRule>,
}

impl Instrument {
    fn base(id: &str, name: &str, class: LiabilityClass) -> Self {
        Instrument {
            id: InstrumentId::new(id),
            name: name.to_string(),
            class,
            issuer: None,
            category: None,
            underlying: None,
            backing: None,
        }
    }

    pub fn real(id: &str, name: &str) -> Self {
        Self::base(id, name, LiabilityClass::Real)
    }

    pub fn coin(id: &str, name: &str) -> Self {
        Self::base(id, name, LiabilityClass::PureAssetCoin)
    }

    pub fn issued(id: &str, name: &str, issuer: &str) -> Self {
        let mut i = Self::base(id, name, LiabilityClass::IssuedFinancial);
        i.issuer = Some(AgentId::new(issuer));
        i
    }

    pub fn with_category(mut self, category: &str) -> Self {
        self.category = Some(category.to_string());
        self
    }

    pub fn with_underlying(mut self, underlying: &str) -> Self {
        self.underlying = Some(InstrumentId::new(underlying));
        self
    }

    pub fn with_backing(mut self, rule: BackingRule) -> Self {
        self.backing = Some(rule);
        self
    }

    pub fn category(&self) -> &str {
        self.category.as_deref().unwrap_or(self.id.as_str())
    }

    /// The unit this instrument's quantities are conserved in.
    pub fn root(&self) -> &InstrumentId {
        self.underlying.as_ref().unwrap_or(&self.id)
    }
}

/// The seven sectors of the open economy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Households,
    Firms,
    Banks,
    OtherFinancial,
    Treasury,
    CentralBank,
    RestOfWorld,
}

impl Sector {
    pub const ALL: [Sector; 7] = [
        Sector::Households,
        Sector::Firms,
        Sector::Banks,
        Sector::OtherFinancial,
        Sector::Treasury,
        Sector::CentralBank,
        Sector::RestOfWorld,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Sector::Households => "households",
            Sector::Firms => "firms",
            Sector::Banks => "banks",
            Sector::OtherFinancial => "other_financial",
            Sector::Treasury => "treasury",
            Sector::CentralBank => "central_bank",
            Sector::RestOfWorld => "rest_of_world",
        }
    }

    pub fn index(self) -> usize {
        Sector::ALL.iter().position(|s| *s == self).unwrap()
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Asset,
    Liability,
}

/// Per-agent positions. Zero positions are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceSheet {
    #[serde(default)]
    pub assets: BTreeMap<InstrumentId, Amount>,
    #[serde(default)]
    pub liabilities: BTreeMap<InstrumentId, Amount>,
}

impl BalanceSheet {
    pub fn side(&self, side: Side) -> &BTreeMap<InstrumentId, Amount> {
        match side {
            Side::Asset => &self.assets,
            Side::Liability => &self.liabilities,
        }
    }

    pub fn get(&self, side: Side, instrument: &InstrumentId) -> Amount {
        self.side(side).get(instrument).copied().unwrap_or_default()
    }

    pub fn asset(&self, instrument: &InstrumentId) -> Amount {
        self.get(Side::Asset, instrument)
    }

    pub fn liability(&self, instrument: &InstrumentId) -> Amount {
        self.get(Side::Liability, instrument)
    }

    /// Overwrites a position without any validation. Zero removes the entry.
    pub fn set_unchecked(&mut self, side: Side, instrument: &InstrumentId, value: Amount) {
        let map = match side {
            Side::Asset => &mut self.assets,
            Side::Liability => &mut self.liabilities,
        };
        if value.is_zero() {
            map.remove(instrument);
        } else {
            map.insert(instrument.clone(), value);
        }
    }

    pub fn total_assets(&self) -> Amount {
        self.assets.values().copied().sum()
    }

    pub fn total_liabilities(&self) -> Amount {
        self.liabilities.values().copied().sum()
    }

    pub fn net_worth(&self) -> Amount {
        self.total_assets() - self.total_liabilities()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty() && self.liabilities.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub name: String,
    sector: Sector,
    #[serde(default)]
    pub sheet: BalanceSheet,
}

impl Agent {
    pub fn new(id: &str, name: &str, sector: Sector) -> Self {
        Agent {
            id: AgentId::new(id),
            name: name.to_string(),
            sector,
            sheet: BalanceSheet::default(),
        }
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn net_worth(&self) -> Amount {
        net_worth(self)
    }
}

/// Σ assets − Σ liabilities. May be negative.
pub fn net_worth(agent: &Agent) -> Amount {
    agent.sheet.net_worth()
}

/// Which way a leg moves a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostingSide {
    /// Increase an asset.
    AssetDebit,
    /// Decrease an asset.
    AssetCredit,
    /// Decrease a liability.
    LiabilityDebit,
    /// Increase a liability.
    LiabilityCredit,
}

impl PostingSide {
    pub fn side(self) -> Side {
        match self {
            PostingSide::AssetDebit | PostingSide::AssetCredit => Side::Asset,
            PostingSide::LiabilityDebit | PostingSide::LiabilityCredit => Side::Liability,
        }
    }

    fn sign(self) -> i64 {
        match self {
            PostingSide::AssetDebit | PostingSide::LiabilityCredit => 1,
            PostingSide::AssetCredit | PostingSide::LiabilityDebit => -1,
        }
    }

    fn increase(side: Side, up: bool) -> PostingSide {
        match (side, up) {
            (Side::Asset, true) => PostingSide::AssetDebit,
            (Side::Asset, false) => PostingSide::AssetCredit,
            (Side::Liability, true) => PostingSide::LiabilityCredit,
            (Side::Liability, false) => PostingSide::LiabilityDebit,
        }
    }

    pub fn reversed(self) -> PostingSide {
        match self {
            PostingSide::AssetDebit => PostingSide::AssetCredit,
            PostingSide::AssetCredit => PostingSide::AssetDebit,
            PostingSide::LiabilityDebit => PostingSide::LiabilityCredit,
            PostingSide::LiabilityCredit => PostingSide::LiabilityDebit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub agent: AgentId,
    pub side: PostingSide,
    pub instrument: InstrumentId,
    pub amount: Amount,
}

impl Posting {
    /// Signed change this leg makes to its position.
    pub fn delta(&self) -> i64 {
        self.side.sign() * self.amount.value()
    }
}

/// Flow category a transaction belongs to in the sector flow matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowCategory {
    Wages,
    Consumption,
    Investment,
    GovernmentSpending,
    Taxes,
    Interest,
    Dividends,
    Imports,
    Exports,
    CoinIssuance,
    Portfolio,
    OpenMarket,
}

impl FlowCategory {
    pub const ALL: [FlowCategory; 12] = [
        FlowCategory::Wages,
        FlowCategory::Consumption,
        FlowCategory::Investment,
        FlowCategory::GovernmentSpending,
        FlowCategory::Taxes,
        FlowCategory::Interest,
        FlowCategory::Dividends,
        FlowCategory::Imports,
        FlowCategory::Exports,
        FlowCategory::CoinIssuance,
        FlowCategory::Portfolio,
        FlowCategory::OpenMarket,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FlowCategory::Wages => "wages",
            FlowCategory::Consumption => "consumption",
            FlowCategory::Investment => "investment",
            FlowCategory::GovernmentSpending => "government_spending",
            FlowCategory::Taxes => "taxes",
            FlowCategory::Interest => "interest",
            FlowCategory::Dividends => "dividends",
            FlowCategory::Imports => "imports",
            FlowCategory::Exports => "exports",
            FlowCategory::CoinIssuance => "coin_issuance",
            FlowCategory::Portfolio => "portfolio",
            FlowCategory::OpenMarket => "open_market",
        }
    }

    pub fn index(self) -> usize {
        FlowCategory::ALL.iter().position(|c| *c == self).unwrap()
    }
}

/// An atomic set of postings.
///
/// `creation` marks mining, production or revaluation events, the only
/// transactions allowed to change the outstanding quantity of real assets and
/// pure-asset coins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub description: String,
    #[serde(default)]
    pub creation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowCategory>,
    #[serde(default)]
    pub legs: Vec<Posting>,
}

impl Transaction {
    pub fn new(description: impl Into<String>) -> Self {
        Transaction {
            description: description.into(),
            ..Default::default()
        }
    }

    pub fn creation(mut self) -> Self {
        self.creation = true;
        self
    }

    pub fn tagged(mut self, flow: FlowCategory) -> Self {
        self.flow = Some(flow);
        self
    }

    pub fn leg(mut self, agent: &AgentId, side: PostingSide, instrument: &InstrumentId, amount: Amount) -> Self {
        self.legs.push(Posting {
            agent: agent.clone(),
            side,
            instrument: instrument.clone(),
            amount,
        });
        self
    }

    /// Adds a signed change to a position as a single leg. Zero is dropped.
    pub fn change(mut self, agent: &AgentId, side: Side, instrument: &InstrumentId, delta: i64) -> Self {
        if delta != 0 {
            let ps = PostingSide::increase(side, delta > 0);
            self.legs.push(Posting {
                agent: agent.clone(),
                side: ps,
                instrument: instrument.clone(),
                amount: Amount(delta.abs()),
            });
        }
        self
    }

    /// The transaction that undoes this one.
    pub fn inverse(&self) -> Transaction {
        Transaction {
            description: format!("reverse: {}", self.description),
            creation: self.creation,
            flow: self.flow,
            legs: self
                .legs
                .iter()
                .map(|p| Posting {
                    side: p.side.reversed(),
                    ..p.clone()
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    /// Agents touched by at least one leg, in first-appearance order.
    pub fn agents(&self) -> Vec<AgentId> {
        let mut out: Vec<AgentId> = Vec::new();
        for p in &self.legs {
            if !out.contains(&p.agent) {
                out.push(p.agent.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub period: u64,
    pub tx: Transaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(InstrumentId),
    #[error("duplicate agent `{0}`")]
    DuplicateAgent(AgentId),
    #[error("duplicate instrument `{0}`")]
    DuplicateInstrument(InstrumentId),
    #[error("invalid instrument `{id}`: {reason}")]
    InvalidInstrument { id: InstrumentId, reason: String },
    #[error("negative amount {amount} on leg for `{agent}` in `{instrument}`")]
    NegativeAmount {
        agent: AgentId,
        instrument: InstrumentId,
        amount: Amount,
    },
    #[error("unbalanced legs for `{instrument}`: asset change {asset_change}, liability change {liability_change}")]
    UnbalancedFinancialLegs {
        instrument: InstrumentId,
        asset_change: i64,
        liability_change: i64,
    },
    #[error("non-creation transaction changes outstanding `{instrument}` by {net}")]
    UnbalancedRealLegs { instrument: InstrumentId, net: i64 },
    #[error("`{agent}` cannot carry `{instrument}` as a liability")]
    InvalidLiability {
        agent: AgentId,
        instrument: InstrumentId,
    },
    #[error("`{agent}` would hold a negative {side:?} position in `{instrument}` ({value})")]
    NegativePosition {
        agent: AgentId,
        side: Side,
        instrument: InstrumentId,
        value: i128,
    },
}

/// The whole ledger state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    agents: IndexMap<AgentId, Agent>,
    instruments: IndexMap<InstrumentId, Instrument>,
    /// Recorded outstanding quantity of each non-financial root instrument.
    supply: BTreeMap<InstrumentId, Amount>,
    clock: u64,
    journal: Vec<JournalEntry>,
}

impl World {
    pub fn new() -> Self {
        World::default()
    }

    pub fn add_instrument(&mut self, instrument: Instrument) -> Result<(), LedgerError> {
        if self.instruments.contains_key(&instrument.id) {
            return Err(LedgerError::DuplicateInstrument(instrument.id));
        }
        let invalid = |reason: &str| LedgerError::InvalidInstrument {
            id: instrument.id.clone(),
            reason: reason.to_string(),
        };
        match (instrument.class, &instrument.issuer) {
            (LiabilityClass::IssuedFinancial, None) => {
                return Err(invalid("issued financial instruments need an issuer"))
            }
            (LiabilityClass::Real | LiabilityClass::PureAssetCoin, Some(_)) => {
                return Err(invalid("real assets and pure-asset coins have no issuer"))
            }
            _ => {}
        }
        if let Some(issuer) = &instrument.issuer {
            if !self.agents.contains_key(issuer) {
                return Err(LedgerError::UnknownAgent(issuer.clone()));
            }
        }
        if let Some(under) = &instrument.underlying {
            if instrument.class.is_financial() {
                return Err(invalid("financial instruments cannot wrap an underlying"));
            }
            match self.instruments.get(under) {
                None => return Err(LedgerError::UnknownInstrument(under.clone())),
                Some(u) if u.class.is_financial() || u.underlying.is_some() => {
                    return Err(invalid("underlying must be a root non-financial instrument"))
                }
                Some(_) => {}
            }
        }
        if let Some(rule) = &instrument.backing {
            rule.validate().map_err(|r| invalid(&r))?;
        }
        self.instruments.insert(instrument.id.clone(), instrument);
        Ok(())
    }

    pub fn add_agent(&mut self, agent: Agent) -> Result<(), LedgerError> {
        if self.agents.contains_key(&agent.id) {
            return Err(LedgerError::DuplicateAgent(agent.id));
        }
        if !agent.sheet.is_empty() {
            // opening balances go through seed_position so supply stays recorded
            let sheet = agent.sheet.clone();
            let mut bare = agent;
            bare.sheet = BalanceSheet::default();
            let id = bare.id.clone();
            self.agents.insert(id.clone(), bare);
            for (side, map) in [(Side::Asset, &sheet.assets), (Side::Liability, &sheet.liabilities)] {
                for (inst, amt) in map {
                    if let Err(e) = self.seed_position(&id, side, inst, *amt) {
                        self.agents.shift_remove(&id);
                        return Err(e);
                    }
                }
            }
            return Ok(());
        }
        self.agents.insert(agent.id.clone(), agent);
        Ok(())
    }

    /// Sets an opening position outside the journal. Non-financial holdings
    /// are added to the recorded supply. Financial symmetry is not checked
    /// here; run [`verify_global_consistency`] after seeding.
    pub fn seed_position(
        &mut self,
        agent: &AgentId,
        side: Side,
        instrument: &InstrumentId,
        value: Amount,
    ) -> Result<(), LedgerError> {
        let inst = self
            .instruments
            .get(instrument)
            .ok_or_else(|| LedgerError::UnknownInstrument(instrument.clone()))?;
        if !self.agents.contains_key(agent) {
            return Err(LedgerError::UnknownAgent(agent.clone()));
        }
        if value.is_negative() {
            return Err(LedgerError::NegativePosition {
                agent: agent.clone(),
                side,
                instrument: instrument.clone(),
                value: value.value() as i128,
            });
        }
        if side == Side::Liability && !liability_allowed(inst, agent) {
            return Err(LedgerError::InvalidLiability {
                agent: agent.clone(),
                instrument: instrument.clone(),
            });
        }
        let root = inst.root().clone();
        let financial = inst.class.is_financial();
        let sheet = &mut self.agents.get_mut(agent).unwrap().sheet;
        let old = sheet.get(side, instrument);
        sheet.set_unchecked(side, instrument, value);
        if !financial {
            let s = self.supply.entry(root.clone()).or_default();
            *s += value - old;
            if s.is_zero() {
                self.supply.remove(&root);
            }
        }
        Ok(())
    }

    pub fn agent(&self, id: &AgentId) -> Option<&Agent> {
        self.agents.get(id)
    }

    pub fn require_agent(&self, id: &AgentId) -> Result<&Agent, LedgerError> {
        self.agents.get(id).ok_or_else(|| LedgerError::UnknownAgent(id.clone()))
    }

    /// Raw mutable access for fault injection and repair tooling. Bypasses
    /// every ledger check.
    pub fn agent_mut_unchecked(&mut self, id: &AgentId) -> Option<&mut Agent> {
        self.agents.get_mut(id)
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.values()
    }

    pub fn instrument(&self, id: &InstrumentId) -> Option<&Instrument> {
        self.instruments.get(id)
    }

    pub fn require_instrument(&self, id: &InstrumentId) -> Result<&Instrument, LedgerError> {
        self.instruments
            .get(id)
            .ok_or_else(|| LedgerError::UnknownInstrument(id.clone()))
    }

    /// Instruments in declaration order.
    pub fn instruments(&self) -> impl Iterator<Item = &Instrument> {
        self.instruments.values()
    }

    /// The instrument of the given category issued by `issuer`, if any.
    pub fn issued_by(&self, issuer: &AgentId, category: &str) -> Option<&InstrumentId> {
        self.instruments
            .values()
            .find(|i| i.issuer.as_ref() == Some(issuer) && i.category() == category)
            .map(|i| &i.id)
    }

    /// The first instrument with the given category, issued or not.
    pub fn by_category(&self, category: &str) -> Option<&InstrumentId> {
        self.instruments
            .values()
            .find(|i| i.category() == category)
            .map(|i| &i.id)
    }

    pub fn position(&self, agent: &AgentId, side: Side, instrument: &InstrumentId) -> Amount {
        self.agents
            .get(agent)
            .map(|a| a.sheet.get(side, instrument))
            .unwrap_or_default()
    }

    pub fn holding(&self, agent: &AgentId, instrument: &InstrumentId) -> Amount {
        self.position(agent, Side::Asset, instrument)
    }

    pub fn owing(&self, agent: &AgentId, instrument: &InstrumentId) -> Amount {
        self.position(agent, Side::Liability, instrument)
    }

    pub fn net_worth_of(&self, agent: &AgentId) -> Amount {
        self.agents.get(agent).map(net_worth).unwrap_or_default()
    }

    pub fn recorded_supply(&self, root: &InstrumentId) -> Amount {
        self.supply.get(root).copied().unwrap_or_default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn set_clock(&mut self, clock: u64) {
        self.clock = clock;
    }

    pub fn advance_clock(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    /// Same agents, instruments, supply and clock, with an empty journal.
    pub fn without_journal(&self) -> World {
        World {
            agents: self.agents.clone(),
            instruments: self.instruments.clone(),
            supply: self.supply.clone(),
            clock: self.clock,
            journal: Vec::new(),
        }
    }

    /// Validates and applies `tx` atomically, appending it to the journal.
    /// Returns the journal sequence number.
    pub fn post(&mut self, tx: Transaction) -> Result<u64, LedgerError> {
        let updates = self.validate(&tx)?;
        for ((agent, side, inst), value) in updates.positions {
            self.agents
                .get_mut(&agent)
                .unwrap()
                .sheet
                .set_unchecked(side, &inst, Amount(value));
        }
        for (root, delta) in updates.supply {
            let s = self.supply.entry(root.clone()).or_default();
            *s += Amount(delta);
            if s.is_zero() {
                self.supply.remove(&root);
            }
        }
        let seq = self.journal.len() as u64;
        self.journal.push(JournalEntry {
            seq,
            period: self.clock,
            tx,
        });
        Ok(seq)
    }

    /// Checks `tx` against the current state without applying it.
    pub fn check(&self, tx: &Transaction) -> Result<(), LedgerError> {
        self.validate(tx).map(|_| ())
    }

    fn validate(&self, tx: &Transaction) -> Result<Updates, LedgerError> {
        let mut deltas: BTreeMap<(AgentId, Side, InstrumentId), i128> = BTreeMap::new();
        let mut fin: BTreeMap<&InstrumentId, (i128, i128)> = BTreeMap::new();
        let mut real: BTreeMap<&InstrumentId, i128> = BTreeMap::new();
        for leg in &tx.legs {
            self.require_agent(&leg.agent)?;
            let inst = self.require_instrument(&leg.instrument)?;
            if leg.amount.is_negative() {
                return Err(LedgerError::NegativeAmount {
                    agent: leg.agent.clone(),
                    instrument: leg.instrument.clone(),
                    amount: leg.amount,
                });
            }
            let side = leg.side.side();
            if side == Side::Liability && !liability_allowed(inst, &leg.agent) {
                return Err(LedgerError::InvalidLiability {
                    agent: leg.agent.clone(),
                    instrument: leg.instrument.clone(),
                });
            }
            let d = leg.delta() as i128;
            *deltas
                .entry((leg.agent.clone(), side, leg.instrument.clone()))
                .or_default() += d;
            if inst.class.is_financial() {
                let e = fin.entry(&inst.id).or_default();
                match side {
                    Side::Asset => e.0 += d,
                    Side::Liability => e.1 += d,
                }
            } else {
                *real.entry(inst.root()).or_default() += d;
            }
        }
        for (inst, (a, l)) in fin {
            if a != l {
                return Err(LedgerError::UnbalancedFinancialLegs {
                    instrument: inst.clone(),
                    asset_change: a as i64,
                    liability_change: l as i64,
                });
            }
        }
        if !tx.creation {
            if let Some((inst, net)) = real.iter().find(|(_, n)| **n != 0) {
                return Err(LedgerError::UnbalancedRealLegs {
                    instrument: (*inst).clone(),
                    net: *net as i64,
                });
            }
        }
        let mut positions = Vec::with_capacity(deltas.len());
        for ((agent, side, inst), d) in deltas {
            let old = self.position(&agent, side, &inst).value() as i128;
            let new = old + d;
            if new < 0 || new > i64::MAX as i128 {
                return Err(LedgerError::NegativePosition {
                    agent,
                    side,
                    instrument: inst,
                    value: new,
                });
            }
            positions.push(((agent, side, inst), new as i64));
        }
        let supply = real
            .into_iter()
            .filter(|(_, d)| *d != 0)
            .map(|(k, d)| (k.clone(), d as i64))
            .collect();
        Ok(Updates { positions, supply })
    }

    /// Re-applies a journal on top of `initial`. Each entry is posted at the
    /// period it was originally recorded in.
    pub fn replay(initial: &World, journal: &[JournalEntry]) -> Result<World, LedgerError> {
        let mut w = initial.clone();
        for entry in journal {
            w.clock = entry.period;
            w.post(entry.tx.clone())?;
        }
        Ok(w)
    }
}

struct Updates {
    positions: Vec<((AgentId, Side, InstrumentId), i64)>,
    supply: Vec<(InstrumentId, i64)>,
}

fn liability_allowed(inst: &Instrument, agent: &AgentId) -> bool {
    inst.class.is_financial() && inst.issuer.as_ref() == Some(agent)
}

/// Functional form of [`World::post`].
pub fn post_transaction(world: &World, tx: Transaction) -> Result<World, LedgerError> {
    let mut next = world.clone();
    next.post(tx)?;
    Ok(next)
}

/// Totals for one instrument across all agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentTotals {
    pub instrument: InstrumentId,
    pub class: LiabilityClass,
    pub assets: Amount,
    /// Σ liabilities for financial instruments; zero otherwise.
    pub liabilities: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsistencyFlag {
    /// Σ assets ≠ Σ liabilities for an issued instrument.
    Asymmetric {
        instrument: InstrumentId,
        assets: Amount,
        liabilities: Amount,
    },
    /// Holdings of a real asset or coin differ from its recorded supply.
    SupplyMismatch {
        root: InstrumentId,
        holdings: Amount,
        recorded: Amount,
    },
    /// A stored position is negative.
    NegativePosition {
        agent: AgentId,
        instrument: InstrumentId,
        side: Side,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub totals: Vec<InstrumentTotals>,
    pub flags: Vec<ConsistencyFlag>,
}

impl ConsistencyReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Economy-wide check: issued instruments must net to zero, non-financial
/// holdings must match their recorded supply.
pub fn verify_global_consistency(world: &World) -> ConsistencyReport {
    let mut assets: BTreeMap<&InstrumentId, i128> = BTreeMap::new();
    let mut liabs: BTreeMap<&InstrumentId, i128> = BTreeMap::new();
    let mut flags = Vec::new();
    for agent in world.agents.values() {
        for (side, map) in [
            (Side::Asset, &agent.sheet.assets),
            (Side::Liability, &agent.sheet.liabilities),
        ] {
            for (inst, amt) in map {
                if amt.is_negative() {
                    flags.push(ConsistencyFlag::NegativePosition {
                        agent: agent.id.clone(),
                        instrument: inst.clone(),
                        side,
                    });
                }
                let target = match side {
                    Side::Asset => &mut assets,
                    Side::Liability => &mut liabs,
                };
                *target.entry(inst).or_default() += amt.value() as i128;
            }
        }
    }
    let mut totals = Vec::new();
    let mut by_root: BTreeMap<&InstrumentId, i128> = BTreeMap::new();
    for inst in world.instruments.values() {
        let a = assets.get(&inst.id).copied().unwrap_or(0);
        let l = liabs.get(&inst.id).copied().unwrap_or(0);
        if a == 0 && l == 0 {
            continue;
        }
        totals.push(InstrumentTotals {
            instrument: inst.id.clone(),
            class: inst.class,
            assets: Amount(a as i64),
            liabilities: Amount(l as i64),
        });
        if inst.class.is_financial() {
            if a != l {
                flags.push(ConsistencyFlag::Asymmetric {
                    instrument: inst.id.clone(),
                    assets: Amount(a as i64),
                    liabilities: Amount(l as i64),
                });
            }
        } else {
            *by_root.entry(inst.root()).or_default() += a;
            if l != 0 {
                flags.push(ConsistencyFlag::Asymmetric {
                    instrument: inst.id.clone(),
                    assets: Amount(a as i64),
                    liabilities: Amount(l as i64),
                });
            }
        }
    }
    let mut roots: Vec<&InstrumentId> = by_root.keys().copied().collect();
    for r in world.supply.keys() {
        if !by_root.contains_key(r) {
            roots.push(r);
        }
    }
    roots.sort();
    for root in roots {
        let held = by_root.get(root).copied().unwrap_or(0);
        let recorded = world.recorded_supply(root);
        if held != recorded.value() as i128 {
            flags.push(ConsistencyFlag::SupplyMismatch {
                root: root.clone(),
                holdings: Amount(held as i64),
                recorded,
            });
        }
    }
    ConsistencyReport { totals, flags }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> AgentId {
        AgentId::new(s)
    }

    fn inst(s: &str) -> InstrumentId {
        InstrumentId::new(s)
    }

    /// Alice of the first mining example plus her bank and an electricity vendor.
    fn alice_world() -> World {
        let mut w = World::new();
        w.add_agent(Agent::new("bank", "Bank", Sector::Banks)).unwrap();
        w.add_agent(Agent::new("alice", "Alice", Sector::Households)).unwrap();
        w.add_agent(Agent::new("vendor", "Power Co", Sector::Firms)).unwrap();
        w.add_instrument(Instrument::real("house", "house")).unwrap();
        w.add_instrument(Instrument::coin("bitcoin", "bitcoin")).unwrap();
        w.add_instrument(Instrument::issued("deposit", "bank deposit", "bank").with_category("deposits"))
            .unwrap();
        w.add_instrument(Instrument::issued("mortgage", "mortgage", "alice")).unwrap();
        let a = id("alice");
        w.seed_position(&a, Side::Asset, &inst("house"), Amount(750_000)).unwrap();
        w.seed_position(&a, Side::Asset, &inst("deposit"), Amount(10_500)).unwrap();
        w.seed_position(&a, Side::Asset, &inst("bitcoin"), Amount(1_000)).unwrap();
        w.seed_position(&a, Side::Liability, &inst("mortgage"), Amount(500_000)).unwrap();
        w.seed_position(&id("bank"), Side::Liability, &inst("deposit"), Amount(10_500)).unwrap();
        w.seed_position(&id("bank"), Side::Asset, &inst("mortgage"), Amount(500_000)).unwrap();
        w
    }

    fn mining_tx() -> Transaction {
        Transaction::new("mine")
            .creation()
            .change(&id("alice"), Side::Asset, &inst("bitcoin"), 10_000)
            .change(&id("alice"), Side::Asset, &inst("deposit"), -9_000)
            .change(&id("vendor"), Side::Asset, &inst("deposit"), 9_000)
    }

    #[test]
    fn mining_leg_moves_alice_as_printed() {
        let mut w = alice_world();
        let before = w.net_worth_of(&id("alice"));
        w.post(mining_tx()).unwrap();
        assert_eq!(w.holding(&id("alice"), &inst("deposit")), Amount(1_500));
        assert_eq!(w.holding(&id("alice"), &inst("bitcoin")), Amount(11_000));
        assert_eq!(w.net_worth_of(&id("alice")) - before, Amount(1_000));
        assert!(verify_global_consistency(&w).is_clean());
    }

    #[test]
    fn mining_without_creation_flag_is_rejected() {
        let mut w = alice_world();
        let mut tx = mining_tx();
        tx.creation = false;
        let snapshot = w.clone();
        assert!(matches!(w.post(tx), Err(LedgerError::UnbalancedRealLegs { .. })));
        assert_eq!(w, snapshot);
    }

    #[test]
    fn empty_transaction_is_a_journaled_noop() {
        let mut w = alice_world();
        let sheets: Vec<_> = w.agents().cloned().collect();
        w.post(Transaction::new("nothing")).unwrap();
        assert_eq!(w.agents().cloned().collect::<Vec<_>>(), sheets);
        assert_eq!(w.journal().len(), 1);
    }

    #[test]
    fn seven_against_six_is_unbalanced() {
        let mut w = alice_world();
        let tx = Transaction::new("bad")
            .change(&id("alice"), Side::Asset, &inst("deposit"), 7)
            .change(&id("bank"), Side::Liability, &inst("deposit"), 6);
        assert!(matches!(
            w.post(tx),
            Err(LedgerError::UnbalancedFinancialLegs { asset_change: 7, liability_change: 6, .. })
        ));
        assert!(w.journal().is_empty());
    }

    #[test]
    fn unknown_references_and_negative_positions_reject_whole_tx() {
        let mut w = alice_world();
        let snapshot = w.clone();
        let tx = Transaction::new("x").change(&id("nobody"), Side::Asset, &inst("house"), 1);
        assert!(matches!(w.post(tx), Err(LedgerError::UnknownAgent(_))));
        let tx = Transaction::new("x").change(&id("alice"), Side::Asset, &inst("gold"), 1);
        assert!(matches!(w.post(tx), Err(LedgerError::UnknownInstrument(_))));
        let tx = Transaction::new("overdraw")
            .change(&id("alice"), Side::Asset, &inst("deposit"), -20_000)
            .change(&id("vendor"), Side::Asset, &inst("deposit"), 20_000);
        assert!(matches!(w.post(tx), Err(LedgerError::NegativePosition { .. })));
        assert_eq!(w, snapshot);
    }

    #[test]
    fn only_the_issuer_carries_the_liability() {
        let mut w = alice_world();
        let tx = Transaction::new("x")
            .change(&id("alice"), Side::Liability, &inst("deposit"), 5)
            .change(&id("vendor"), Side::Asset, &inst("deposit"), 5);
        assert!(matches!(w.post(tx), Err(LedgerError::InvalidLiability { .. })));
        let tx = Transaction::new("x")
            .change(&id("alice"), Side::Liability, &inst("house"), 5)
            .change(&id("vendor"), Side::Asset, &inst("house"), 5);
        assert!(matches!(w.post(tx), Err(LedgerError::InvalidLiability { .. })));
    }

    #[test]
    fn net_worth_of_empty_sheet_is_zero() {
        let a = Agent::new("x", "X", Sector::Firms);
        assert_eq!(net_worth(&a), Amount::ZERO);
    }

    #[test]
    fn corrupting_one_liability_flags_one_instrument() {
        let mut w = alice_world();
        let bank = w.agent_mut_unchecked(&id("bank")).unwrap();
        let v = bank.sheet.liability(&inst("deposit"));
        bank.sheet.set_unchecked(Side::Liability, &inst("deposit"), v + Amount(1));
        let report = verify_global_consistency(&w);
        assert_eq!(report.flags.len(), 1);
        assert!(matches!(&report.flags[0], ConsistencyFlag::Asymmetric { instrument, .. } if instrument.as_str() == "deposit"));
    }

    #[test]
    fn corrupting_a_coin_holding_flags_supply() {
        let mut w = alice_world();
        let alice = w.agent_mut_unchecked(&id("alice")).unwrap();
        alice.sheet.set_unchecked(Side::Asset, &inst("bitcoin"), Amount(999));
        let report = verify_global_consistency(&w);
        assert_eq!(report.flags.len(), 1);
    }

    #[test]
    fn empty_world_reports_nothing() {
        let r = verify_global_consistency(&World::new());
        assert!(r.totals.is_empty() && r.flags.is_empty());
    }

    #[test]
    fn inverse_restores_positions() {
        let mut w = alice_world();
        let start = w.without_journal();
        let tx = Transaction::new("pay")
            .change(&id("alice"), Side::Asset, &inst("deposit"), -500)
            .change(&id("vendor"), Side::Asset, &inst("deposit"), 500);
        w.post(tx.clone()).unwrap();
        w.post(tx.inverse()).unwrap();
        assert_eq!(w.without_journal(), start);
    }

    #[test]
    fn replay_reproduces_live_world() {
        let mut w = alice_world();
        let initial = w.clone();
        w.post(mining_tx()).unwrap();
        w.advance_clock();
        w.post(
            Transaction::new("pay")
                .change(&id("vendor"), Side::Asset, &inst("deposit"), -100)
                .change(&id("alice"), Side::Asset, &inst("deposit"), 100),
        )
        .unwrap();
        let replayed = World::replay(&initial, w.journal()).unwrap();
        assert_eq!(replayed, w);
    }

    #[test]
    fn issued_instrument_requires_known_issuer() {
        let mut w = World::new();
        let err = w.add_instrument(Instrument::issued("x", "x", "ghost")).unwrap_err();
        assert!(matches!(err, LedgerError::UnknownAgent(_)));
        let mut bad = Instrument::real("y", "y");
        bad.issuer = Some(AgentId::new("ghost"));
        assert!(matches!(w.add_instrument(bad), Err(LedgerError::InvalidInstrument { .. })));
    }
}
