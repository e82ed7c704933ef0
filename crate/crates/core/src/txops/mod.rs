//! Canonical balance-sheet operations compiled into ledger transactions.
//!
//! Each operation checks its own preconditions, builds one multi-leg
//! [`Transaction`] and posts it. Standard instruments are found by category on
//! their issuer: a bank's deposits are the instrument with category
//! `deposits` issued by that bank, reserves and CBDC are the central bank's
//! `reserves` and `cbdc`, and so on. No fees are charged on any of the
//! exchange operations.

mod dtc;
mod vault;

pub use dtc::{issue_dtc, redeem_dtc, DtcConsortium};
pub use vault::{
    liquidate_vault, open_vault_mint, repay_and_release, vault_of, Liquidation, Vault, VaultConfig,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::instruments::{category, check_narrow_bank, NarrowCover, Rate};
use crate::ledger::{AgentId, InstrumentId, LedgerError, Side, Transaction, World};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub agent: AgentId,
    pub instrument: InstrumentId,
    pub needed: Amount,
    pub available: Amount,
}

impl std::fmt::Display for Shortfall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "`{}` needs {} of `{}` but has {}",
            self.agent, self.needed, self.instrument, self.available
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("insufficient deposits: {0}")]
    InsufficientDeposits(Shortfall),
    #[error("insufficient reserves: {0}")]
    InsufficientReserves(Shortfall),
    #[error("insufficient holding: {0}")]
    InsufficientHolding(Shortfall),
    #[error("insufficient basket assets: {0}")]
    InsufficientBasket(Shortfall),
    #[error("insufficient collateral: {0}")]
    InsufficientCollateral(Shortfall),
    #[error("insufficient coin to repay: {0}")]
    InsufficientDai(Shortfall),
    #[error("`{borrower}` repays {repay} but owes only {debt}")]
    ExcessRepayment {
        borrower: AgentId,
        repay: Amount,
        debt: Amount,
    },
    #[error("collateral worth {collateral_value} cannot back {debt} at ratio {min_ratio}")]
    UndercollateralizedRequest {
        collateral_value: Amount,
        debt: Amount,
        min_ratio: Rate,
    },
    #[error("narrow bank `{bank}` would hold {cover} against {required} of deposits and coins")]
    NarrowBankConstraintViolated {
        bank: AgentId,
        cover: Amount,
        required: Amount,
    },
    #[error("vault of `{owner}` is healthy: collateral worth {collateral_value} against debt {debt}")]
    VaultHealthy {
        owner: AgentId,
        collateral_value: Amount,
        debt: Amount,
    },
    #[error("`{issuer}` issues no `{category}` instrument")]
    MissingRail { issuer: AgentId, category: String },
    #[error("amounts must be non-negative, got {0}")]
    NegativeAmount(Amount),
    #[error("{0}")]
    InvalidArgument(String),
}

pub(crate) fn rail(world: &World, issuer: &AgentId, cat: &str) -> Result<InstrumentId, OpError> {
    world.require_agent(issuer)?;
    world
        .issued_by(issuer, cat)
        .cloned()
        .ok_or_else(|| OpError::MissingRail {
            issuer: issuer.clone(),
            category: cat.to_string(),
        })
}

pub(crate) fn non_negative(amounts: &[Amount]) -> Result<(), OpError> {
    match amounts.iter().find(|a| a.is_negative()) {
        Some(a) => Err(OpError::NegativeAmount(*a)),
        None => Ok(()),
    }
}

/// Fails with `make(shortfall)` unless `agent` holds at least `needed`.
pub(crate) fn require(
    world: &World,
    agent: &AgentId,
    instrument: &InstrumentId,
    needed: Amount,
    make: fn(Shortfall) -> OpError,
) -> Result<(), OpError> {
    world.require_agent(agent)?;
    let available = world.holding(agent, instrument);
    if available < needed {
        return Err(make(Shortfall {
            agent: agent.clone(),
            instrument: instrument.clone(),
            needed,
            available,
        }));
    }
    Ok(())
}

/// Where a miner's operating cost is paid: a deposit transfer to a payee
/// banking at the same bank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningCost {
    pub deposit: InstrumentId,
    pub payee: AgentId,
}

/// Credits `gross` newly mined coins to `miner` and pays `cost` out of the
/// miner's deposits. The only operation besides liquidation that changes net
/// worth: the miner gains `gross − cost`.
pub fn mine_pure_asset(
    world: &mut World,
    miner: &AgentId,
    coin: &InstrumentId,
    gross: Amount,
    cost: Amount,
    rail: Option<&MiningCost>,
) -> Result<u64, OpError> {
    non_negative(&[gross, cost])?;
    world.require_agent(miner)?;
    if world.require_instrument(coin)?.class.is_financial() {
        return Err(OpError::InvalidArgument(format!("`{coin}` is a financial claim and cannot be mined")));
    }
    let mut tx = Transaction::new(format!("{miner} mines {gross} of {coin} at cost {cost}"))
        .creation()
        .change(miner, Side::Asset, coin, gross.value());
    if !cost.is_zero() {
        let rail = rail.ok_or_else(|| {
            OpError::InvalidArgument("a non-zero mining cost needs a deposit rail and payee".into())
        })?;
        require(world, miner, &rail.deposit, cost, OpError::InsufficientDeposits)?;
        world.require_agent(&rail.payee)?;
        tx = tx
            .change(miner, Side::Asset, &rail.deposit, -cost.value())
            .change(&rail.payee, Side::Asset, &rail.deposit, cost.value());
    }
    Ok(world.post(tx)?)
}

/// Swap of two assets between buyer and seller.
pub fn exchange_assets(
    world: &mut World,
    buyer: &AgentId,
    seller: &AgentId,
    pay_instr: &InstrumentId,
    pay_amt: Amount,
    recv_instr: &InstrumentId,
    recv_amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[pay_amt, recv_amt])?;
    world.require_instrument(pay_instr)?;
    world.require_instrument(recv_instr)?;
    require(world, buyer, pay_instr, pay_amt, OpError::InsufficientHolding)?;
    require(world, seller, recv_instr, recv_amt, OpError::InsufficientHolding)?;
    let tx = Transaction::new(format!("{buyer} pays {pay_amt} {pay_instr} to {seller} for {recv_amt} {recv_instr}"))
        .change(buyer, Side::Asset, pay_instr, -pay_amt.value())
        .change(seller, Side::Asset, pay_instr, pay_amt.value())
        .change(seller, Side::Asset, recv_instr, -recv_amt.value())
        .change(buyer, Side::Asset, recv_instr, recv_amt.value());
    Ok(world.post(tx)?)
}

/// The bank buys coins from a client and pays by crediting the client's
/// deposit account.
pub fn sell_coin_to_bank(
    world: &mut World,
    seller: &AgentId,
    bank: &AgentId,
    coin: &InstrumentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let deposits = rail(world, bank, category::DEPOSITS)?;
    world.require_instrument(coin)?;
    require(world, seller, coin, amt, OpError::InsufficientHolding)?;
    let v = amt.value();
    let tx = Transaction::new(format!("{seller} sells {amt} {coin} to {bank}"))
        .change(seller, Side::Asset, coin, -v)
        .change(seller, Side::Asset, &deposits, v)
        .change(bank, Side::Asset, coin, v)
        .change(bank, Side::Liability, &deposits, v);
    Ok(world.post(tx)?)
}

/// A client converts deposits into CBDC; the bank surrenders the same amount
/// of reserves, which the central bank re-issues as CBDC.
pub fn withdraw_cbdc(
    world: &mut World,
    client: &AgentId,
    bank: &AgentId,
    central_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let deposits = rail(world, bank, category::DEPOSITS)?;
    let reserves = rail(world, central_bank, category::RESERVES)?;
    let cbdc = rail(world, central_bank, category::CBDC)?;
    require(world, client, &deposits, amt, OpError::InsufficientDeposits)?;
    require(world, bank, &reserves, amt, OpError::InsufficientReserves)?;
    let v = amt.value();
    let tx = Transaction::new(format!("{client} withdraws {amt} in CBDC through {bank}"))
        .change(client, Side::Asset, &deposits, -v)
        .change(client, Side::Asset, &cbdc, v)
        .change(bank, Side::Liability, &deposits, -v)
        .change(bank, Side::Asset, &reserves, -v)
        .change(central_bank, Side::Liability, &reserves, -v)
        .change(central_bank, Side::Liability, &cbdc, v);
    Ok(world.post(tx)?)
}

/// Inverse of [`withdraw_cbdc`]: the client deposits CBDC back at the bank.
pub fn deposit_cbdc(
    world: &mut World,
    client: &AgentId,
    bank: &AgentId,
    central_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let deposits = rail(world, bank, category::DEPOSITS)?;
    let reserves = rail(world, central_bank, category::RESERVES)?;
    let cbdc = rail(world, central_bank, category::CBDC)?;
    require(world, client, &cbdc, amt, OpError::InsufficientHolding)?;
    let v = amt.value();
    let tx = Transaction::new(format!("{client} deposits {amt} of CBDC at {bank}"))
        .change(client, Side::Asset, &cbdc, -v)
        .change(client, Side::Asset, &deposits, v)
        .change(bank, Side::Liability, &deposits, v)
        .change(bank, Side::Asset, &reserves, v)
        .change(central_bank, Side::Liability, &reserves, v)
        .change(central_bank, Side::Liability, &cbdc, -v);
    Ok(world.post(tx)?)
}

/// A bank converts part of its reserves into CBDC held on its own book.
pub fn swap_reserves_for_cbdc(
    world: &mut World,
    bank: &AgentId,
    central_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let reserves = rail(world, central_bank, category::RESERVES)?;
    let cbdc = rail(world, central_bank, category::CBDC)?;
    require(world, bank, &reserves, amt, OpError::InsufficientReserves)?;
    let v = amt.value();
    let tx = Transaction::new(format!("{bank} swaps {amt} of reserves for CBDC"))
        .change(bank, Side::Asset, &reserves, -v)
        .change(bank, Side::Asset, &cbdc, v)
        .change(central_bank, Side::Liability, &reserves, -v)
        .change(central_bank, Side::Liability, &cbdc, v);
    Ok(world.post(tx)?)
}

/// Inverse of [`swap_reserves_for_cbdc`].
pub fn swap_cbdc_for_reserves(
    world: &mut World,
    bank: &AgentId,
    central_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let reserves = rail(world, central_bank, category::RESERVES)?;
    let cbdc = rail(world, central_bank, category::CBDC)?;
    require(world, bank, &cbdc, amt, OpError::InsufficientHolding)?;
    let v = amt.value();
    let tx = Transaction::new(format!("{bank} swaps {amt} of CBDC for reserves"))
        .change(bank, Side::Asset, &cbdc, -v)
        .change(bank, Side::Asset, &reserves, v)
        .change(central_bank, Side::Liability, &cbdc, -v)
        .change(central_bank, Side::Liability, &reserves, v);
    Ok(world.post(tx)?)
}

fn fbsc_tx(
    world: &World,
    client: &AgentId,
    narrow_bank: &AgentId,
    amt: Amount,
    issue: bool,
) -> Result<Transaction, OpError> {
    let deposits = rail(world, narrow_bank, category::DEPOSITS)?;
    let fbsc = rail(world, narrow_bank, category::FBSC)?;
    let v = if issue { amt.value() } else { -amt.value() };
    let what = if issue { "buys" } else { "redeems" };
    Ok(Transaction::new(format!("{client} {what} {amt} of FBSC at {narrow_bank}"))
        .change(client, Side::Asset, &deposits, -v)
        .change(client, Side::Asset, &fbsc, v)
        .change(narrow_bank, Side::Liability, &deposits, -v)
        .change(narrow_bank, Side::Liability, &fbsc, v))
}

/// A narrow-bank client converts deposits into fiat-backed coins. The bank
/// must still hold reserves covering deposits plus coins afterwards.
pub fn issue_fbsc(
    world: &mut World,
    client: &AgentId,
    narrow_bank: &AgentId,
    amt: Amount,
    cover: NarrowCover,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let tx = fbsc_tx(world, client, narrow_bank, amt, true)?;
    let deposits = rail(world, narrow_bank, category::DEPOSITS)?;
    require(world, client, &deposits, amt, OpError::InsufficientDeposits)?;
    let mut trial = world.without_journal();
    trial.post(tx.clone())?;
    let status = check_narrow_bank(&trial, narrow_bank, cover);
    if !status.satisfied {
        return Err(OpError::NarrowBankConstraintViolated {
            bank: narrow_bank.clone(),
            cover: status.cover_value,
            required: status.outstanding,
        });
    }
    Ok(world.post(tx)?)
}

/// Inverse of [`issue_fbsc`].
pub fn redeem_fbsc(
    world: &mut World,
    client: &AgentId,
    narrow_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let fbsc = rail(world, narrow_bank, category::FBSC)?;
    require(world, client, &fbsc, amt, OpError::InsufficientHolding)?;
    let tx = fbsc_tx(world, client, narrow_bank, amt, false)?;
    Ok(world.post(tx)?)
}

fn csc_tx(
    world: &World,
    client: &AgentId,
    client_bank: &AgentId,
    custodian: &AgentId,
    custodian_bank: &AgentId,
    v: i64,
) -> Result<Transaction, OpError> {
    let client_dep = rail(world, client_bank, category::DEPOSITS)?;
    let cust_dep = rail(world, custodian_bank, category::DEPOSITS)?;
    let csc = rail(world, custodian, category::CSC)?;
    let mut tx = Transaction::new(format!("{client} exchanges {v} of deposits for CSC from {custodian}"))
        .change(client, Side::Asset, &client_dep, -v)
        .change(client, Side::Asset, &csc, v)
        .change(client_bank, Side::Liability, &client_dep, -v)
        .change(custodian_bank, Side::Liability, &cust_dep, v)
        .change(custodian, Side::Asset, &cust_dep, v)
        .change(custodian, Side::Liability, &csc, v);
    if client_bank != custodian_bank {
        let cb = central_bank_of_reserves(world, client_bank)?;
        let reserves = rail(world, &cb, category::RESERVES)?;
        tx = tx
            .change(client_bank, Side::Asset, &reserves, -v)
            .change(custodian_bank, Side::Asset, &reserves, v);
    }
    Ok(tx)
}

/// The issuer of the reserves instrument a bank settles in.
pub(crate) fn central_bank_of_reserves(world: &World, bank: &AgentId) -> Result<AgentId, OpError> {
    let agent = world.require_agent(bank)?;
    let from_holdings = agent.sheet.assets.keys().find_map(|i| {
        world
            .instrument(i)
            .filter(|inst| inst.category() == category::RESERVES)
            .and_then(|inst| inst.issuer.clone())
    });
    from_holdings
        .or_else(|| {
            world
                .instruments()
                .find(|i| i.category() == category::RESERVES)
                .and_then(|i| i.issuer.clone())
        })
        .ok_or_else(|| OpError::MissingRail {
            issuer: bank.clone(),
            category: category::RESERVES.to_string(),
        })
}

/// Settles `v` of reserves from `from_bank` to `to_bank` (no legs when equal),
/// checking the payer's reserves.
pub(crate) fn interbank(
    world: &World,
    tx: Transaction,
    from_bank: &AgentId,
    to_bank: &AgentId,
    amt: Amount,
) -> Result<Transaction, OpError> {
    if from_bank == to_bank {
        return Ok(tx);
    }
    let cb = central_bank_of_reserves(world, from_bank)?;
    let reserves = rail(world, &cb, category::RESERVES)?;
    require(world, from_bank, &reserves, amt, OpError::InsufficientReserves)?;
    Ok(tx
        .change(from_bank, Side::Asset, &reserves, -amt.value())
        .change(to_bank, Side::Asset, &reserves, amt.value()))
}

/// A client of `client_bank` buys custodial coins; the custodian keeps the
/// proceeds on deposit at `narrow_bank`, and reserves move between the banks.
pub fn issue_csc(
    world: &mut World,
    client: &AgentId,
    client_bank: &AgentId,
    custodian: &AgentId,
    narrow_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let client_dep = rail(world, client_bank, category::DEPOSITS)?;
    require(world, client, &client_dep, amt, OpError::InsufficientDeposits)?;
    if client_bank != narrow_bank {
        let cb = central_bank_of_reserves(world, client_bank)?;
        let reserves = rail(world, &cb, category::RESERVES)?;
        require(world, client_bank, &reserves, amt, OpError::InsufficientReserves)?;
    }
    let tx = csc_tx(world, client, client_bank, custodian, narrow_bank, amt.value())?;
    Ok(world.post(tx)?)
}

/// Inverse of [`issue_csc`]: the custodian buys back coins and pays out of
/// its deposits.
pub fn redeem_csc(
    world: &mut World,
    client: &AgentId,
    client_bank: &AgentId,
    custodian: &AgentId,
    narrow_bank: &AgentId,
    amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[amt])?;
    let csc = rail(world, custodian, category::CSC)?;
    let cust_dep = rail(world, narrow_bank, category::DEPOSITS)?;
    require(world, client, &csc, amt, OpError::InsufficientHolding)?;
    require(world, custodian, &cust_dep, amt, OpError::InsufficientDeposits)?;
    if client_bank != narrow_bank {
        let cb = central_bank_of_reserves(world, narrow_bank)?;
        let reserves = rail(world, &cb, category::RESERVES)?;
        require(world, narrow_bank, &reserves, amt, OpError::InsufficientReserves)?;
    }
    let tx = csc_tx(world, client, client_bank, custodian, narrow_bank, -amt.value())?;
    Ok(world.post(tx)?)
}


#[cfg(test)]
mod tests {
    use super::testkit::*;
    use super::*;
    use crate::ledger::{verify_global_consistency, Agent, Instrument, Sector};

    #[test]
    fn sell_coin_to_bank_credits_deposits() {
        let mut w = banking_world();
        sell_coin_to_bank(&mut w, &a("bob"), &a("bank"), &i("bitcoin"), Amount(7_000)).unwrap();
        assert_eq!(w.holding(&a("bob"), &i("dep_cb")), Amount(24_000));
        assert_eq!(w.holding(&a("bob"), &i("bitcoin")), Amount(1_000));
        assert_eq!(w.holding(&a("bank"), &i("bitcoin")), Amount(7_000));
        // selling the rest leaves no position at all
        sell_coin_to_bank(&mut w, &a("bob"), &a("bank"), &i("bitcoin"), Amount(1_000)).unwrap();
        assert!(!w.agent(&a("bob")).unwrap().sheet.assets.contains_key(&i("bitcoin")));
        assert!(matches!(
            sell_coin_to_bank(&mut w, &a("bob"), &a("bank"), &i("bitcoin"), Amount(1)),
            Err(OpError::InsufficientHolding(_))
        ));
    }

    #[test]
    fn cbdc_withdrawal_reserve_boundary() {
        let mut w = banking_world();
        let reserves = w.holding(&a("bank"), &i("reserves"));
        // give bob enough deposits to drain the bank's reserves
        seed(&mut w, "bob", Side::Asset, "dep_cb", reserves.value() + 1);
        seed(&mut w, "public", Side::Asset, "dep_cb", 8_000_007_000 - reserves.value() - 1);
        let mut over = w.clone();
        assert!(matches!(
            withdraw_cbdc(&mut over, &a("bob"), &a("bank"), &a("cb"), reserves + Amount(1)),
            Err(OpError::InsufficientReserves(_))
        ));
        assert_eq!(over, w);
        withdraw_cbdc(&mut w, &a("bob"), &a("bank"), &a("cb"), reserves).unwrap();
        assert_eq!(w.holding(&a("bank"), &i("reserves")), Amount::ZERO);
        assert!(verify_global_consistency(&w).is_clean());
    }

    #[test]
    fn cbdc_withdrawal_needs_deposits() {
        let mut w = banking_world();
        assert!(matches!(
            withdraw_cbdc(&mut w, &a("bob"), &a("bank"), &a("cb"), Amount(17_001)),
            Err(OpError::InsufficientDeposits(_))
        ));
    }

    #[test]
    fn zero_amount_ops_only_touch_the_journal() {
        let mut w = banking_world();
        let start = w.without_journal();
        withdraw_cbdc(&mut w, &a("bob"), &a("bank"), &a("cb"), Amount::ZERO).unwrap();
        swap_reserves_for_cbdc(&mut w, &a("bank"), &a("cb"), Amount::ZERO).unwrap();
        issue_fbsc(&mut w, &a("alice"), &a("nb"), Amount::ZERO, NarrowCover::default()).unwrap();
        issue_csc(&mut w, &a("bob"), &a("bank"), &a("cust"), &a("nb"), Amount::ZERO).unwrap();
        sell_coin_to_bank(&mut w, &a("bob"), &a("bank"), &i("bitcoin"), Amount::ZERO).unwrap();
        exchange_assets(&mut w, &a("bob"), &a("alice"), &i("bitcoin"), Amount::ZERO, &i("dep_nb"), Amount::ZERO)
            .unwrap();
        assert_eq!(w.journal().len(), 6);
        assert_eq!(w.without_journal(), start);
    }

    #[test]
    fn swap_round_trip() {
        let mut w = banking_world();
        let start = w.without_journal();
        swap_reserves_for_cbdc(&mut w, &a("bank"), &a("cb"), Amount(149_994_000)).unwrap();
        assert_eq!(w.holding(&a("bank"), &i("reserves")), Amount(150_006_000));
        swap_cbdc_for_reserves(&mut w, &a("bank"), &a("cb"), Amount(149_994_000)).unwrap();
        assert_eq!(w.without_journal(), start);
        assert!(matches!(
            swap_reserves_for_cbdc(&mut w, &a("bank"), &a("cb"), Amount(300_000_001)),
            Err(OpError::InsufficientReserves(_))
        ));
    }

    #[test]
    fn fbsc_round_trip_and_cover() {
        let mut w = banking_world();
        let start = w.without_journal();
        issue_fbsc(&mut w, &a("alice"), &a("nb"), Amount(1_000), NarrowCover::default()).unwrap();
        assert_eq!(w.holding(&a("alice"), &i("fbsc")), Amount(1_000));
        assert_eq!(w.owing(&a("nb"), &i("fbsc")), Amount(1_000_001_000));
        let st = check_narrow_bank(&w, &a("nb"), NarrowCover::default());
        assert!(st.satisfied);
        assert_eq!(st.cover_value, st.outstanding);
        redeem_fbsc(&mut w, &a("alice"), &a("nb"), Amount(1_000)).unwrap();
        assert_eq!(w.without_journal(), start);
    }

    #[test]
    fn fbsc_rejected_once_reserves_fall_short() {
        let mut w = banking_world();
        // cb still needs a cbdc rail for the swap
        swap_reserves_for_cbdc(&mut w, &a("nb"), &a("cb"), Amount(1_000)).unwrap();
        let before = w.clone();
        let err = issue_fbsc(&mut w, &a("alice"), &a("nb"), Amount(500), NarrowCover::default()).unwrap_err();
        assert!(matches!(err, OpError::NarrowBankConstraintViolated { .. }));
        assert_eq!(w, before);
        // counting CBDC as cover restores the bank's standing
        let wide = NarrowCover { include_cash_and_cbdc: true };
        issue_fbsc(&mut w, &a("alice"), &a("nb"), Amount(500), wide).unwrap();
    }

    #[test]
    fn csc_same_bank_moves_no_reserves() {
        let mut w = banking_world();
        seed(&mut w, "bob", Side::Asset, "dep_nb", 5_000);
        seed(&mut w, "public", Side::Asset, "dep_nb", 10_000_000_000 - 1_500 - 310_000_000 - 5_000);
        let reserves_before = w.holding(&a("nb"), &i("reserves"));
        let deposits_before = w.owing(&a("nb"), &i("dep_nb"));
        issue_csc(&mut w, &a("bob"), &a("nb"), &a("cust"), &a("nb"), Amount(2_000)).unwrap();
        assert_eq!(w.holding(&a("nb"), &i("reserves")), reserves_before);
        assert_eq!(w.owing(&a("nb"), &i("dep_nb")), deposits_before);
        assert_eq!(w.holding(&a("bob"), &i("dep_nb")), Amount(3_000));
        assert!(verify_global_consistency(&w).is_clean());
    }

    #[test]
    fn csc_round_trip() {
        let mut w = banking_world();
        let start = w.without_journal();
        issue_csc(&mut w, &a("bob"), &a("bank"), &a("cust"), &a("nb"), Amount(2_000)).unwrap();
        assert_eq!(w.holding(&a("nb"), &i("reserves")), Amount(11_000_002_000));
        redeem_csc(&mut w, &a("bob"), &a("bank"), &a("cust"), &a("nb"), Amount(2_000)).unwrap();
        assert_eq!(w.without_journal(), start);
    }

    #[test]
    fn mining_with_equal_cost_keeps_net_worth() {
        let mut w = banking_world();
        w.add_agent(Agent::new("power", "Power", Sector::Firms)).unwrap();
        let rail = MiningCost { deposit: i("dep_cb"), payee: a("power") };
        let nw = w.net_worth_of(&a("bob"));
        mine_pure_asset(&mut w, &a("bob"), &i("bitcoin"), Amount(5_000), Amount(5_000), Some(&rail)).unwrap();
        assert_eq!(w.net_worth_of(&a("bob")), nw);
        assert_eq!(w.holding(&a("bob"), &i("bitcoin")), Amount(13_000));
        assert_eq!(w.holding(&a("bob"), &i("dep_cb")), Amount(12_000));
        assert!(verify_global_consistency(&w).is_clean());
        assert!(matches!(
            mine_pure_asset(&mut w, &a("bob"), &i("bitcoin"), Amount(1), Amount(50_000), Some(&rail)),
            Err(OpError::InsufficientDeposits(_))
        ));
    }

    #[test]
    fn zero_mining_is_a_noop() {
        let mut w = banking_world();
        let start = w.without_journal();
        mine_pure_asset(&mut w, &a("bob"), &i("bitcoin"), Amount::ZERO, Amount::ZERO, None).unwrap();
        assert_eq!(w.without_journal(), start);
        assert_eq!(w.journal().len(), 1);
    }

    #[test]
    fn financial_claims_cannot_be_mined() {
        let mut w = banking_world();
        w.add_instrument(Instrument::issued("iou", "iou", "bob")).unwrap();
        assert!(matches!(
            mine_pure_asset(&mut w, &a("bob"), &i("iou"), Amount(1), Amount::ZERO, None),
            Err(OpError::InvalidArgument(_))
        ));
    }

    #[test]
    fn missing_rail_is_reported() {
        let mut w = banking_world();
        assert!(matches!(
            issue_fbsc(&mut w, &a("bob"), &a("bank"), Amount(1), NarrowCover::default()),
            Err(OpError::MissingRail { .. })
        ));
    }
}
