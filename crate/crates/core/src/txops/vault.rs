//! Over-collateralized coin loans: vaults, minting, repayment and
//! liquidation.
//!
//! A vault is the borrower's holding of a wrapped collateral instrument
//! (e.g. `vault_eth`, whose underlying is `ethereum`); the debt is the
//! borrower's liability in their own coin-loan instrument, found by the
//! configured loan category. The protocol holds the loan and owes the coin.

use serde::{Deserialize, Serialize};

use super::{non_negative, rail, require, OpError};
use crate::amount::Amount;
use crate::instruments::Rate;
use crate::ledger::{AgentId, InstrumentId, Side, Transaction, World};

fn default_loan_category() -> String {
    "coin_loan".to_string()
}

fn default_min_ratio() -> Rate {
    Rate::new(5, 3)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaultConfig {
    pub protocol: AgentId,
    pub coin: InstrumentId,
    pub collateral: InstrumentId,
    /// Locked form of `collateral`, held by the vault owner.
    pub vault: InstrumentId,
    #[serde(default = "default_loan_category")]
    pub loan_category: String,
    #[serde(default = "default_min_ratio")]
    pub min_ratio: Rate,
}

impl VaultConfig {
    pub fn new(protocol: &str, coin: &str, collateral: &str, vault: &str, loan_category: &str) -> Self {
        VaultConfig {
            protocol: AgentId::new(protocol),
            coin: InstrumentId::new(coin),
            collateral: InstrumentId::new(collateral),
            vault: InstrumentId::new(vault),
            loan_category: loan_category.to_string(),
            min_ratio: default_min_ratio(),
        }
    }

    fn check(&self, world: &World) -> Result<(), OpError> {
        world.require_agent(&self.protocol)?;
        world.require_instrument(&self.collateral)?;
        let coin = world.require_instrument(&self.coin)?;
        if coin.issuer.as_ref() != Some(&self.protocol) {
            return Err(OpError::InvalidArgument(format!(
                "`{}` is not issued by `{}`",
                self.coin, self.protocol
            )));
        }
        let vault = world.require_instrument(&self.vault)?;
        if vault.underlying.as_ref() != Some(&self.collateral) {
            return Err(OpError::InvalidArgument(format!(
                "`{}` does not wrap `{}`",
                self.vault, self.collateral
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vault {
    pub owner: AgentId,
    pub collateral_instrument: InstrumentId,
    pub locked: Amount,
    pub debt: Amount,
    pub min_ratio: Rate,
}

impl Vault {
    /// `floor(locked × price)`.
    pub fn collateral_value(&self, price: Rate) -> Amount {
        price.apply_floor(self.locked)
    }

    /// `locked × price ≥ min_ratio × debt`, compared exactly.
    pub fn is_healthy(&self, price: Rate) -> bool {
        covers(self.locked, price, self.min_ratio, self.debt)
    }
}

fn covers(locked: Amount, price: Rate, min_ratio: Rate, debt: Amount) -> bool {
    let lhs = locked.value() as i128 * price.numer() * min_ratio.denom();
    let rhs = debt.value() as i128 * min_ratio.numer() * price.denom();
    lhs >= rhs
}

pub fn vault_of(world: &World, cfg: &VaultConfig, owner: &AgentId) -> Result<Vault, OpError> {
    cfg.check(world)?;
    let loan = rail(world, owner, &cfg.loan_category)?;
    Ok(Vault {
        owner: owner.clone(),
        collateral_instrument: cfg.vault.clone(),
        locked: world.holding(owner, &cfg.vault),
        debt: world.owing(owner, &loan),
        min_ratio: cfg.min_ratio,
    })
}

/// Locks `collateral_amt` in the borrower's vault and mints `mint_amt` coins
/// as a loan. The whole vault, valued at `price`, must cover the new debt at
/// the minimum ratio.
pub fn open_vault_mint(
    world: &mut World,
    borrower: &AgentId,
    cfg: &VaultConfig,
    collateral_amt: Amount,
    mint_amt: Amount,
    price: Rate,
) -> Result<u64, OpError> {
    non_negative(&[collateral_amt, mint_amt])?;
    let vault = vault_of(world, cfg, borrower)?;
    require(world, borrower, &cfg.collateral, collateral_amt, OpError::InsufficientCollateral)?;
    let locked = vault.locked + collateral_amt;
    let debt = vault.debt + mint_amt;
    if !mint_amt.is_zero() && !covers(locked, price, cfg.min_ratio, debt) {
        return Err(OpError::UndercollateralizedRequest {
            collateral_value: price.apply_floor(locked),
            debt,
            min_ratio: cfg.min_ratio,
        });
    }
    let loan = rail(world, borrower, &cfg.loan_category)?;
    let (c, m) = (collateral_amt.value(), mint_amt.value());
    let tx = Transaction::new(format!("{borrower} locks {collateral_amt} of {} and mints {mint_amt} {}", cfg.collateral, cfg.coin))
        .change(borrower, Side::Asset, &cfg.collateral, -c)
        .change(borrower, Side::Asset, &cfg.vault, c)
        .change(borrower, Side::Asset, &cfg.coin, m)
        .change(borrower, Side::Liability, &loan, m)
        .change(&cfg.protocol, Side::Asset, &loan, m)
        .change(&cfg.protocol, Side::Liability, &cfg.coin, m);
    Ok(world.post(tx)?)
}

/// Repays `repay_amt` of coin debt plus `fee_amt` stability fee, releasing a
/// proportional share of the locked collateral (all of it when the debt is
/// cleared). The fee is income for the protocol.
pub fn repay_and_release(
    world: &mut World,
    borrower: &AgentId,
    cfg: &VaultConfig,
    repay_amt: Amount,
    fee_amt: Amount,
) -> Result<u64, OpError> {
    non_negative(&[repay_amt, fee_amt])?;
    let vault = vault_of(world, cfg, borrower)?;
    if repay_amt > vault.debt {
        return Err(OpError::ExcessRepayment {
            borrower: borrower.clone(),
            repay: repay_amt,
            debt: vault.debt,
        });
    }
    require(world, borrower, &cfg.coin, repay_amt + fee_amt, OpError::InsufficientDai)?;
    let released = if repay_amt == vault.debt {
        vault.locked
    } else {
        let share = Rate::of(repay_amt, vault.debt).unwrap_or_default();
        share.apply_floor(vault.locked)
    };
    let loan = rail(world, borrower, &cfg.loan_category)?;
    let (r, f, rel) = (repay_amt.value(), fee_amt.value(), released.value());
    let tx = Transaction::new(format!("{borrower} repays {repay_amt} {} with fee {fee_amt}", cfg.coin))
        .change(borrower, Side::Asset, &cfg.coin, -(r + f))
        .change(borrower, Side::Liability, &loan, -r)
        .change(borrower, Side::Asset, &cfg.vault, -rel)
        .change(borrower, Side::Asset, &cfg.collateral, rel)
        .change(&cfg.protocol, Side::Asset, &loan, -r)
        .change(&cfg.protocol, Side::Liability, &cfg.coin, -(r + f));
    Ok(world.post(tx)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Liquidation {
    pub seq: u64,
    pub collateral_value: Amount,
    pub debt_retired: Amount,
    /// Returned to the owner.
    pub surplus: Amount,
    /// Absorbed by the protocol's net worth.
    pub shortfall: Amount,
}

/// Closes an unhealthy vault: the locked collateral is marked to `price`,
/// enough of it to cover the debt goes to the protocol, any surplus returns
/// to the owner and the loan is written off on both sides. The revaluation
/// makes this a creation-flagged transaction.
pub fn liquidate_vault(
    world: &mut World,
    cfg: &VaultConfig,
    owner: &AgentId,
    price: Rate,
) -> Result<Liquidation, OpError> {
    if price.is_negative() {
        return Err(OpError::InvalidArgument(format!("negative price {price}")));
    }
    let vault = vault_of(world, cfg, owner)?;
    let value = vault.collateral_value(price);
    if vault.is_healthy(price) {
        return Err(OpError::VaultHealthy {
            owner: owner.clone(),
            collateral_value: value,
            debt: vault.debt,
        });
    }
    let to_protocol = value.min(vault.debt);
    let surplus = (value - vault.debt).max(Amount::ZERO);
    let shortfall = (vault.debt - value).max(Amount::ZERO);
    let loan = rail(world, owner, &cfg.loan_category)?;
    let d = vault.debt.value();
    let tx = Transaction::new(format!("liquidate vault of {owner} at price {price}"))
        .creation()
        .change(owner, Side::Asset, &cfg.vault, -vault.locked.value())
        .change(owner, Side::Asset, &cfg.collateral, surplus.value())
        .change(owner, Side::Liability, &loan, -d)
        .change(&cfg.protocol, Side::Asset, &loan, -d)
        .change(&cfg.protocol, Side::Asset, &cfg.collateral, to_protocol.value());
    let seq = world.post(tx)?;
    Ok(Liquidation {
        seq,
        collateral_value: value,
        debt_retired: vault.debt,
        surplus,
        shortfall,
    })
}
