//! Seven-sector stock-flow consistent layer: sector aggregation, balance-sheet
//! and flow matrices, consistency checks and a period stepper.

mod economy;
mod matrix;
mod policy;

pub use economy::{default_world, instr, roles, skeleton, EconState, Economy, StepRecord};
pub use matrix::{
    aggregate_sector, build_balance_sheet_matrix, build_flow_matrix, check_sfc, FlowMatrix, MatrixFlag, MatrixRow,
    SectorMatrix, SfcFlag, SfcReport,
};
pub use policy::{BankingMode, BehavioralPolicy, Rates};

use thiserror::Error;

use crate::ledger::LedgerError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfcError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("journal entry {seq} (`{description}`) has no flow category")]
    UntaggedTransaction { seq: u64, description: String },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("economy is missing `{0}`")]
    MissingRole(String),
    #[error("initial state is inconsistent: {0}")]
    InconsistentState(String),
    #[error("step {step}, {stage}: {reason}")]
    PolicyDivergence { step: u64, stage: String, reason: String },
}
