//! Digital trade coins issued by a consortium administrator against a basket
//! supplied by sponsors.

use serde::{Deserialize, Serialize};

use super::{interbank, non_negative, rail, require, OpError};
use crate::amount::Amount;
use crate::instruments::category;
use crate::ledger::{AgentId, InstrumentId, Side, Transaction, World};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtcConsortium {
    pub administrator: AgentId,
    pub sponsors: AgentId,
    /// Bank holding the sponsors' sale proceeds, normally a narrow bank.
    pub affiliated_bank: AgentId,
    pub basket: InstrumentId,
    pub coin: InstrumentId,
}

impl DtcConsortium {
    fn check(&self, world: &World) -> Result<(), OpError> {
        world.require_agent(&self.administrator)?;
        world.require_agent(&self.sponsors)?;
        world.require_agent(&self.affiliated_bank)?;
        world.require_instrument(&self.basket)?;
        let coin = world.require_instrument(&self.coin)?;
        if coin.issuer.as_ref() != Some(&self.administrator) {
            return Err(OpError::InvalidArgument(format!(
                "`{}` is not issued by administrator `{}`",
                self.coin, self.administrator
            )));
        }
        Ok(())
    }
}

/// Legs shared by issue (`v > 0`) and redemption (`v < 0`), without the
/// interbank settlement.
fn dtc_tx(
    world: &World,
    c: &DtcConsortium,
    holder: &AgentId,
    holder_bank: &AgentId,
    v: i64,
) -> Result<Transaction, OpError> {
    let holder_dep = rail(world, holder_bank, category::DEPOSITS)?;
    let sponsor_dep = rail(world, &c.affiliated_bank, category::DEPOSITS)?;
    let verb = if v >= 0 { "buys" } else { "redeems" };
    Ok(Transaction::new(format!(
        "{holder} {verb} {} of {} from {}",
        Amount(v.abs()),
        c.coin,
        c.administrator
    ))
    .change(holder, Side::Asset, &holder_dep, -v)
    .change(holder, Side::Asset, &c.coin, v)
    .change(holder_bank, Side::Liability, &holder_dep, -v)
    .change(&c.sponsors, Side::Asset, &c.basket, -v)
    .change(&c.sponsors, Side::Asset, &sponsor_dep, v)
    .change(&c.affiliated_bank, Side::Liability, &sponsor_dep, v)
    .change(&c.administrator, Side::Asset, &c.basket, v)
    .change(&c.administrator, Side::Liability, &c.coin, v))
}

/// The sponsors hand `amt` of basket assets to the administrator, who issues
/// the same amount of coins to `buyer`. The buyer pays out of deposits at
/// `buyer_bank`; the proceeds land in the sponsors' account at the affiliated
/// bank, with reserves following the deposits.
pub fn issue_dtc(
    world: &mut World,
    consortium: &DtcConsortium,
    buyer: &AgentId,
    buyer_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    consortium.check(world)?;
    require(world, &consortium.sponsors, &consortium.basket, amt, OpError::InsufficientBasket)?;
    let buyer_dep = rail(world, buyer_bank, category::DEPOSITS)?;
    require(world, buyer, &buyer_dep, amt, OpError::InsufficientDeposits)?;
    let tx = dtc_tx(world, consortium, buyer, buyer_bank, amt.value())?;
    let tx = interbank(world, tx, buyer_bank, &consortium.affiliated_bank, amt)?;
    Ok(world.post(tx)?)
}

/// Exact inverse of [`issue_dtc`]: the administrator returns basket assets to
/// the sponsors, who pay the holder out of their deposits at the affiliated
/// bank.
pub fn redeem_dtc(
    world: &mut World,
    consortium: &DtcConsortium,
    holder: &AgentId,
    holder_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    consortium.check(world)?;
    require(world, holder, &consortium.coin, amt, OpError::InsufficientHolding)?;
    require(world, &consortium.administrator, &consortium.basket, amt, OpError::InsufficientBasket)?;
    let sponsor_dep = rail(world, &consortium.affiliated_bank, category::DEPOSITS)?;
    require(world, &consortium.sponsors, &sponsor_dep, amt, OpError::InsufficientDeposits)?;
    let tx = dtc_tx(world, consortium, holder, holder_bank, -amt.value())?;
    let tx = interbank(world, tx, &consortium.affiliated_bank, holder_bank, amt)?;
    Ok(world.post(tx)?)
}
