//! Instrument taxonomy and backing-rule checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::ledger::{AgentId, Instrument, InstrumentId, LiabilityClass, World};

/// Standard instrument categories the operations look up by issuer.
pub mod category {
    pub const DEPOSITS: &str = "deposits";
    pub const RESERVES: &str = "reserves";
    pub const CASH: &str = "cash";
    pub const CBDC: &str = "cbdc";
    pub const FBSC: &str = "fbsc";
    pub const CSC: &str = "csc";
    pub const BILLS: &str = "bills";
    pub const LOANS: &str = "loans";
    pub const ADVANCES: &str = "advances";
    pub const TREASURY_DEPOSIT: &str = "treasury_deposit";
}

/// Exact rational used for ratios and prices. Serialized as `"5/3"` or `"0.9"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(Ratio<i128>);

impl Rate {
    pub fn new(numer: i128, denom: i128) -> Self {
        Rate(Ratio::new(numer, denom))
    }

    pub fn integer(n: i128) -> Self {
        Rate(Ratio::from_integer(n))
    }

    pub fn one() -> Self {
        Rate::integer(1)
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `floor(amount × self)`.
    pub fn apply_floor(&self, amount: Amount) -> Amount {
        let v = Ratio::from_integer(amount.value() as i128) * self.0;
        Amount(v.floor().to_integer() as i64)
    }

    /// `amount × self ≤ other`, compared exactly.
    pub fn scaled_le(&self, amount: Amount, other: Amount) -> bool {
        self.numer() * amount.value() as i128 <= other.value() as i128 * self.denom()
    }

    /// `a / b` as an exact rate, `None` when `b` is zero.
    pub fn of(a: Amount, b: Amount) -> Option<Rate> {
        if b.is_zero() {
            None
        } else {
            Some(Rate(Ratio::new(a.value() as i128, b.value() as i128)))
        }
    }

    /// Decimal rendering with up to `places` digits, trailing zeros removed.
    pub fn to_decimal_string(&self, places: u32) -> String {
        let scale = 10i128.pow(places);
        let scaled = (self.0 * Ratio::from_integer(scale)).round().to_integer();
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.abs();
        let whole = abs / scale;
        let frac = abs % scale;
        if frac == 0 {
            format!("{sign}{whole}")
        } else {
            let digits = format!("{frac:0width$}", width = places as usize);
            format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl Default for Rate {
    fn default() -> Self {
        Rate::one()
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Rate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid rate `{s}`");
        if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Rate::new(n, d));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 18 {
            return Err(bad());
        }
        let denom = 10i128.pow(frac.len() as u32);
        let w: i128 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
        let f: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let n = w * denom + f;
        Ok(Rate::new(if neg { -n } else { n }, denom))
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(Rate::integer(i as i128)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackingKind {
    #[default]
    None,
    /// Central-bank reserves held by the issuer (fiat-backed coins).
    ReserveCover,
    /// Deposits at a designated bank held by the issuer (custodial coins).
    DepositCover,
    /// A basket of real or financial assets held by the issuer (trade coins).
    BasketCover,
    /// Crypto collateral locked in borrowers' vaults.
    CryptoOverCollateral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackingRule {
    pub kind: BackingKind,
    #[serde(default)]
    pub cover: BTreeSet<InstrumentId>,
    #[serde(default)]
    pub min_ratio: Rate,
}

impl BackingRule {
    pub fn new(kind: BackingKind, cover: &[&str], min_ratio: Rate) -> Self {
        BackingRule {
            kind,
            cover: cover.iter().map(|c| InstrumentId::new(*c)).collect(),
            min_ratio,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.min_ratio < Rate::one() {
            return Err(format!("min_ratio {} is below 1", self.min_ratio));
        }
        if (self.kind == BackingKind::None) != self.cover.is_empty() {
            return Err("backing kind `none` must come with an empty cover set and vice versa".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackingStatus {
    /// The backed instrument, or the checked bank's deposit instrument for
    /// narrow-bank checks.
    pub instrument: Option<InstrumentId>,
    pub issuer: AgentId,
    pub outstanding: Amount,
    pub cover_value: Amount,
    /// `cover_value / outstanding`; `None` when nothing is outstanding.
    pub ratio: Option<Rate>,
    pub min_ratio: Rate,
    pub satisfied: bool,
}

impl BackingStatus {
    fn compute(
        instrument: Option<InstrumentId>,
        issuer: AgentId,
        outstanding: Amount,
        cover_value: Amount,
        min_ratio: Rate,
    ) -> Self {
        // nothing outstanding: vacuously covered
        let satisfied = outstanding.is_zero() || min_ratio.scaled_le(outstanding, cover_value);
        BackingStatus {
            instrument,
            issuer,
            outstanding,
            cover_value,
            ratio: Rate::of(cover_value, outstanding),
            min_ratio,
            satisfied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackingError {
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(InstrumentId),
    #[error("instrument `{0}` has no backing rule")]
    NoBackingRule(InstrumentId),
}

/// Exogenous unit prices for cover assets; anything unlisted is valued at par.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceBook(BTreeMap<InstrumentId, Rate>);

impl PriceBook {
    pub fn new() -> Self {
        PriceBook::default()
    }

    pub fn set(&mut self, instrument: &InstrumentId, price: Rate) {
        self.0.insert(instrument.clone(), price);
    }

    pub fn price(&self, instrument: &InstrumentId) -> Rate {
        self.0.get(instrument).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InstrumentId, &Rate)> {
        self.0.iter()
    }
}

pub fn classify(instrument: &Instrument) -> LiabilityClass {
    instrument.class
}

fn value_at(prices: &PriceBook, instrument: &InstrumentId, qty: Amount) -> Ratio<i128> {
    let p = prices.price(instrument);
    Ratio::from_integer(qty.value() as i128) * Ratio::new(p.numer(), p.denom())
}

/// Cover versus outstanding for a backed instrument.
///
/// Outstanding is the issuer's liability. Cover is the issuer's holdings of
/// the cover instruments at `prices`, except for over-collateralized coins,
/// where the collateral sits in borrowers' vaults and is summed over every
/// holder.
pub fn backing_status(
    world: &World,
    instrument: &InstrumentId,
    prices: &PriceBook,
) -> Result<BackingStatus, BackingError> {
    let inst = world
        .instrument(instrument)
        .ok_or_else(|| BackingError::UnknownInstrument(instrument.clone()))?;
    let rule = match &inst.backing {
        Some(r) if r.kind != BackingKind::None => r,
        _ => return Err(BackingError::NoBackingRule(instrument.clone())),
    };
    let issuer = inst
        .issuer
        .clone()
        .ok_or_else(|| BackingError::NoBackingRule(instrument.clone()))?;
    let outstanding = world.owing(&issuer, instrument);
    let mut cover = Ratio::<i128>::zero();
    for c in &rule.cover {
        if rule.kind == BackingKind::CryptoOverCollateral {
            for a in world.agents() {
                cover += value_at(prices, c, a.sheet.asset(c));
            }
        } else {
            cover += value_at(prices, c, world.holding(&issuer, c));
        }
    }
    let cover_value = Amount(cover.floor().to_integer() as i64);
    Ok(BackingStatus::compute(
        Some(instrument.clone()),
        issuer,
        outstanding,
        cover_value,
        rule.min_ratio,
    ))
}

/// What counts as cover in the narrow-bank test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrowCover {
    /// Count vault cash and CBDC alongside reserves.
    #[serde(default)]
    pub include_cash_and_cbdc: bool,
}

/// Reserves (optionally plus cash and CBDC) against deposits plus fiat-backed
/// coins outstanding. Equality passes.
pub fn check_narrow_bank(world: &World, bank: &AgentId, cover: NarrowCover) -> BackingStatus {
    let mut outstanding = Amount::ZERO;
    let mut cover_value = Amount::ZERO;
    let mut deposit_instr = None;
    if let Some(agent) = world.agent(bank) {
        for (inst_id, amt) in &agent.sheet.liabilities {
            let cat = world.instrument(inst_id).map(|i| i.category()).unwrap_or("");
            if cat == category::DEPOSITS || cat == category::FBSC {
                outstanding += *amt;
                if cat == category::DEPOSITS && deposit_instr.is_none() {
                    deposit_instr = Some(inst_id.clone());
                }
            }
        }
        for (inst_id, amt) in &agent.sheet.assets {
            let cat = world.instrument(inst_id).map(|i| i.category()).unwrap_or("");
            let counted = cat == category::RESERVES
                || (cover.include_cash_and_cbdc && (cat == category::CASH || cat == category::CBDC));
            if counted {
                cover_value += *amt;
            }
        }
    }
    BackingStatus::compute(deposit_instr, bank.clone(), outstanding, cover_value, Rate::one())
}
