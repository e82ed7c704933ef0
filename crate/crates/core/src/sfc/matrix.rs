//! Sector aggregation, balance-sheet and transaction-flow matrices, and the
//! stock-flow consistency check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ledger::{
    BalanceSheet, FlowCategory, InstrumentId, LiabilityClass, Sector, Side, World,
};

use super::SfcError;

const N: usize = Sector::ALL.len();

/// Instrument-wise sum of every agent in `sector`. With `net_intra`, claims
/// issued and held inside the sector cancel.
pub fn aggregate_sector(world: &World, sector: Sector, net_intra: bool) -> BalanceSheet {
    let mut assets: BTreeMap<InstrumentId, Amount> = BTreeMap::new();
    let mut liabilities: BTreeMap<InstrumentId, Amount> = BTreeMap::new();
    for agent in world.agents().filter(|a| a.sector() == sector) {
        for (i, v) in &agent.sheet.assets {
            *assets.entry(i.clone()).or_default() += *v;
        }
        for (i, v) in &agent.sheet.liabilities {
            *liabilities.entry(i.clone()).or_default() += *v;
        }
    }
    if net_intra {
        for (inst, liab) in liabilities.iter_mut() {
            if let Some(held) = assets.get_mut(inst) {
                let both = (*held).min(*liab);
                *held -= both;
                *liab -= both;
            }
        }
    }
    let mut sheet = BalanceSheet::default();
    for (i, v) in assets {
        sheet.set_unchecked(Side::Asset, &i, v);
    }
    for (i, v) in liabilities {
        sheet.set_unchecked(Side::Liability, &i, v);
    }
    sheet
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub label: String,
    pub class: LiabilityClass,
    /// One cell per sector in [`Sector::ALL`] order: assets positive,
    /// liabilities negative.
    pub cells: [Amount; N],
    /// Recorded outstanding quantity for non-financial rows.
    pub outstanding: Option<Amount>,
}

impl MatrixRow {
    pub fn sum(&self) -> Amount {
        self.cells.iter().copied().sum()
    }
}

/// Rows are instrument categories (`deposits` collects every bank's deposit
/// instrument), columns are sectors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorMatrix {
    pub rows: Vec<MatrixRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixFlag {
    /// A financial row does not net to zero.
    RowImbalance { row: String, sum: Amount },
    /// A real or coin row does not add up to the recorded outstanding total.
    OutstandingMismatch { row: String, sum: Amount, recorded: Amount },
}

impl SectorMatrix {
    pub fn row(&self, label: &str) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn net_worth(&self, sector: Sector) -> Amount {
        self.rows.iter().map(|r| r.cells[sector.index()]).sum()
    }

    pub fn net_worths(&self) -> [Amount; N] {
        let mut out = [Amount::ZERO; N];
        for s in Sector::ALL {
            out[s.index()] = self.net_worth(s);
        }
        out
    }

    /// Financial rows must sum to zero; real and coin rows to their recorded
    /// outstanding quantity.
    pub fn flags(&self) -> Vec<MatrixFlag> {
        let mut flags = Vec::new();
        for r in &self.rows {
            let sum = r.sum();
            if r.class.is_financial() {
                if !sum.is_zero() {
                    flags.push(MatrixFlag::RowImbalance { row: r.label.clone(), sum });
                }
            } else if let Some(recorded) = r.outstanding {
                if sum != recorded {
                    flags.push(MatrixFlag::OutstandingMismatch { row: r.label.clone(), sum, recorded });
                }
            }
        }
        flags
    }
}

/// Row label of an instrument: its category, or its root's category for
/// wrapped instruments so locked collateral stays in the collateral's row.
fn row_label(world: &World, inst: &InstrumentId) -> (String, LiabilityClass) {
    match world.instrument(inst) {
        Some(i) => {
            let root = world.instrument(i.root()).unwrap_or(i);
            (root.category().to_string(), i.class)
        }
        None => (inst.to_string(), LiabilityClass::IssuedFinancial),
    }
}

pub fn build_balance_sheet_matrix(world: &World) -> SectorMatrix {
    let mut rows: Vec<MatrixRow> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    // declaration order fixes row order, whether or not anything is held
    for inst in world.instruments() {
        let (label, class) = row_label(world, &inst.id);
        if !index.contains_key(&label) {
            index.insert(label.clone(), rows.len());
            rows.push(MatrixRow {
                label,
                class,
                cells: [Amount::ZERO; N],
                outstanding: None,
            });
        }
    }
    for agent in world.agents() {
        let col = agent.sector().index();
        for (side, map) in [(Side::Asset, &agent.sheet.assets), (Side::Liability, &agent.sheet.liabilities)] {
            for (inst, v) in map {
                let (label, class) = row_label(world, inst);
                let idx = *index.entry(label.clone()).or_insert_with(|| {
                    rows.push(MatrixRow { label, class, cells: [Amount::ZERO; N], outstanding: None });
                    rows.len() - 1
                });
                match side {
                    Side::Asset => rows[idx].cells[col] += *v,
                    Side::Liability => rows[idx].cells[col] -= *v,
                }
            }
        }
    }
    let mut recorded: BTreeMap<String, Amount> = BTreeMap::new();
    for inst in world.instruments().filter(|i| !i.class.is_financial() && i.underlying.is_none()) {
        let (label, _) = row_label(world, &inst.id);
        *recorded.entry(label).or_default() += world.recorded_supply(&inst.id);
    }
    for r in rows.iter_mut().filter(|r| !r.class.is_financial()) {
        r.outstanding = Some(recorded.get(&r.label).copied().unwrap_or_default());
    }
    SectorMatrix { rows }
}

/// One period of sector flows: cell = change in the sector's net worth caused
/// by transactions of that flow category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub period: u64,
    pub cells: [[Amount; N]; FlowCategory::ALL.len()],
}

impl FlowMatrix {
    pub fn zero(period: u64) -> Self {
        FlowMatrix {
            period,
            cells: [[Amount::ZERO; N]; FlowCategory::ALL.len()],
        }
    }

    pub fn cell(&self, flow: FlowCategory, sector: Sector) -> Amount {
        self.cells[flow.index()][sector.index()]
    }

    pub fn row_sum(&self, flow: FlowCategory) -> Amount {
        self.cells[flow.index()].iter().copied().sum()
    }

    pub fn column_sum(&self, sector: Sector) -> Amount {
        self.cells.iter().map(|r| r[sector.index()]).sum()
    }

    pub fn nonzero_rows(&self) -> Vec<FlowCategory> {
        FlowCategory::ALL
            .into_iter()
            .filter(|f| self.cells[f.index()].iter().any(|c| !c.is_zero()))
            .collect()
    }
}

pub fn build_flow_matrix(world: &World, period: u64) -> Result<FlowMatrix, SfcError> {
    let mut m = FlowMatrix::zero(period);
    for entry in world.journal().iter().filter(|e| e.period == period) {
        let flow = entry.tx.flow.ok_or(SfcError::UntaggedTransaction {
            seq: entry.seq,
            description: entry.tx.description.clone(),
        })?;
        for leg in &entry.tx.legs {
            let agent = world.require_agent(&leg.agent)?;
            let d = match leg.side.side() {
                Side::Asset => leg.delta(),
                Side::Liability => -leg.delta(),
            };
            m.cells[flow.index()][agent.sector().index()] += Amount(d);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SfcFlag {
    FlowRowImbalance { flow: FlowCategory, sum: Amount },
    ColumnMismatch { sector: Sector, flows: Amount, stock_change: Amount },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfcReport {
    pub flags: Vec<SfcFlag>,
}

impl SfcReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Each flow row must sum to zero and each sector's flow column must equal
/// its change in net worth between the two stock matrices.
pub fn check_sfc(stock_before: &SectorMatrix, flow: &FlowMatrix, stock_after: &SectorMatrix) -> SfcReport {
    let mut flags = Vec::new();
    for f in FlowCategory::ALL {
        let sum = flow.row_sum(f);
        if !sum.is_zero() {
            flags.push(SfcFlag::FlowRowImbalance { flow: f, sum });
        }
    }
    for s in Sector::ALL {
        let flows = flow.column_sum(s);
        let stock_change = stock_after.net_worth(s) - stock_before.net_worth(s);
        if flows != stock_change {
            flags.push(SfcFlag::ColumnMismatch { sector: s, flows, stock_change });
        }
    }
    SfcReport { flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Agent, AgentId, Instrument, Transaction};

    fn id(s: &str) -> AgentId {
        AgentId::new(s)
    }

    fn iid(s: &str) -> InstrumentId {
        InstrumentId::new(s)
    }

    fn two_banks() -> World {
        let mut w = World::new();
        w.add_agent(Agent::new("cb", "cb", Sector::CentralBank)).unwrap();
        w.add_agent(Agent::new("bank", "bank", Sector::Banks)).unwrap();
        w.add_agent(Agent::new("nb", "narrow", Sector::Banks)).unwrap();
        w.add_agent(Agent::new("hh", "hh", Sector::Households)).unwrap();
        w.add_agent(Agent::new("firm", "firm", Sector::Firms)).unwrap();
        w.add_instrument(Instrument::issued("reserves", "reserves", "cb").with_category("reserves")).unwrap();
        w.add_instrument(Instrument::issued("dep_b", "deposits", "bank").with_category("deposits")).unwrap();
        w.add_instrument(Instrument::issued("dep_n", "deposits", "nb").with_category("deposits")).unwrap();
        w.add_instrument(Instrument::coin("bitcoin", "bitcoin")).unwrap();
        w.add_instrument(Instrument::coin("vault_btc", "vault").with_underlying("bitcoin")).unwrap();
        let mut seed = |a: &str, s, i: &str, v| w.seed_position(&id(a), s, &iid(i), Amount(v)).unwrap();
        seed("bank", Side::Asset, "reserves", 149_993);
        seed("nb", Side::Asset, "reserves", 11_000_007);
        seed("cb", Side::Liability, "reserves", 11_150_000);
        seed("bank", Side::Liability, "dep_b", 500);
        seed("nb", Side::Liability, "dep_n", 700);
        seed("hh", Side::Asset, "dep_b", 500);
        seed("firm", Side::Asset, "dep_n", 700);
        seed("hh", Side::Asset, "bitcoin", 30);
        seed("firm", Side::Asset, "vault_btc", 12);
        w
    }

    #[test]
    fn bank_sector_sums_reserves() {
        let w = two_banks();
        let banks = aggregate_sector(&w, Sector::Banks, false);
        assert_eq!(banks.asset(&iid("reserves")), Amount(11_150_000));
        let single = aggregate_sector(&w, Sector::Households, false);
        assert_eq!(single, w.agent(&id("hh")).unwrap().sheet);
    }

    #[test]
    fn netting_cancels_intra_sector_claims() {
        let mut w = World::new();
        w.add_agent(Agent::new("f1", "f1", Sector::Firms)).unwrap();
        w.add_agent(Agent::new("f2", "f2", Sector::Firms)).unwrap();
        w.add_instrument(Instrument::issued("iou1", "iou", "f1")).unwrap();
        w.add_instrument(Instrument::issued("iou2", "iou", "f2")).unwrap();
        for (a, s, i) in [("f1", Side::Liability, "iou1"), ("f2", Side::Asset, "iou1"), ("f2", Side::Liability, "iou2"), ("f1", Side::Asset, "iou2")] {
            w.seed_position(&id(a), s, &iid(i), Amount(100)).unwrap();
        }
        assert!(aggregate_sector(&w, Sector::Firms, true).is_empty());
        assert!(!aggregate_sector(&w, Sector::Firms, false).is_empty());
    }

    #[test]
    fn matrix_rows_group_by_category() {
        let w = two_banks();
        let m = build_balance_sheet_matrix(&w);
        let deposits = m.row("deposits").unwrap();
        assert_eq!(deposits.sum(), Amount::ZERO);
        assert_eq!(deposits.cells[Sector::Banks.index()], Amount(-1_200));
        let btc = m.row("bitcoin").unwrap();
        assert_eq!(btc.sum(), Amount(42));
        assert_eq!(btc.outstanding, Some(Amount(42)));
        assert!(m.flags().is_empty());
        assert!(m.row("vault_btc").is_none());
    }

    #[test]
    fn empty_world_gives_zero_matrix() {
        let m = build_balance_sheet_matrix(&World::new());
        assert!(m.rows.is_empty());
        assert_eq!(m.net_worths(), [Amount::ZERO; N]);
    }

    #[test]
    fn corrupted_cell_flags_its_row() {
        let w = two_banks();
        let mut m = build_balance_sheet_matrix(&w);
        m.rows[1].cells[Sector::Households.index()] += Amount(1);
        assert_eq!(m.flags().len(), 1);
    }

    #[test]
    fn single_wage_payment() {
        let mut w = two_banks();
        let before = build_balance_sheet_matrix(&w);
        w.set_clock(3);
        let tx = Transaction::new("wages")
            .tagged(FlowCategory::Wages)
            .change(&id("firm"), Side::Asset, &iid("dep_n"), -100)
            .change(&id("nb"), Side::Liability, &iid("dep_n"), -100)
            .change(&id("nb"), Side::Asset, &iid("reserves"), -100)
            .change(&id("bank"), Side::Asset, &iid("reserves"), 100)
            .change(&id("bank"), Side::Liability, &iid("dep_b"), 100)
            .change(&id("hh"), Side::Asset, &iid("dep_b"), 100);
        w.post(tx).unwrap();
        let f = build_flow_matrix(&w, 3).unwrap();
        assert_eq!(f.nonzero_rows(), vec![FlowCategory::Wages]);
        assert_eq!(f.cell(FlowCategory::Wages, Sector::Households), Amount(100));
        assert_eq!(f.cell(FlowCategory::Wages, Sector::Firms), Amount(-100));
        let after = build_balance_sheet_matrix(&w);
        assert!(check_sfc(&before, &f, &after).is_clean());
        assert_eq!(build_flow_matrix(&w, 4).unwrap(), FlowMatrix::zero(4));
    }

    #[test]
    fn untagged_transactions_are_rejected() {
        let mut w = two_banks();
        w.post(Transaction::new("no tag")).unwrap();
        assert!(matches!(build_flow_matrix(&w, 0), Err(SfcError::UntaggedTransaction { .. })));
    }

    #[test]
    fn perturbed_flow_cell_gives_two_flags() {
        let w = two_banks();
        let m = build_balance_sheet_matrix(&w);
        let mut f = FlowMatrix::zero(0);
        assert!(check_sfc(&m, &f, &m).is_clean());
        f.cells[FlowCategory::Taxes.index()][Sector::Treasury.index()] += Amount(1);
        assert_eq!(check_sfc(&m, &f, &m).flags.len(), 2);
    }
}
