//! Double-entry ledger engine and stock-flow consistent simulator for
//! monetary systems that include cryptocurrencies.

pub mod amount;
pub mod chainsim;
pub mod instruments;
pub mod ledger;
pub mod report;
pub mod scenario;
pub mod sfc;
pub mod txops;

pub use amount::{Amount, Scale};
pub use instruments::{BackingKind, BackingRule, BackingStatus, PriceBook, Rate};
pub use ledger::{
    verify_global_consistency, Agent, AgentId, FlowCategory, Instrument, InstrumentId,
    LedgerError, LiabilityClass, Sector, Side, Transaction, World,
};
