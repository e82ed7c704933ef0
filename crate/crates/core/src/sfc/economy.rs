//! Discrete-time stepper for the seven-sector economy.
//!
//! Every flow of a period is posted as a tagged ledger transaction, so the
//! flow matrix is read straight off the journal. Payments travel along the
//! chain of account providers: households, firms, the other financial
//! institutions and the DTC administrator bank with the commercial bank, the
//! bank and the treasury bank with the central bank, and foreigners hold
//! central-bank cash. A payment goes up from the payer to the first provider
//! shared with the payee and back down, so a household paying a foreigner
//! moves deposits, reserves and cash in one transaction.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{build_balance_sheet_matrix, build_flow_matrix, check_sfc, FlowMatrix, SectorMatrix, SfcReport};
use super::policy::{BankingMode, BehavioralPolicy};
use super::SfcError;
use crate::amount::Amount;
use crate::instruments::{check_narrow_bank, BackingStatus, NarrowCover};
use crate::ledger::{
    verify_global_consistency, Agent, AgentId, FlowCategory, Instrument, InstrumentId, Sector, Side, Transaction, World,
};

/// Agent ids the stepper expects.
pub mod roles {
    pub const HOUSEHOLDS: &str = "households";
    pub const FIRMS: &str = "firms";
    pub const BANK: &str = "bank";
    pub const OFI: &str = "ofi";
    pub const TREASURY: &str = "treasury";
    pub const CENTRAL_BANK: &str = "central_bank";
    pub const REST_OF_WORLD: &str = "rest_of_world";
    pub const DTC_ADMIN: &str = "dtc_admin";
}

/// Instrument ids the stepper expects.
pub mod instr {
    pub const CASH: &str = "cash";
    pub const RESERVES: &str = "reserves";
    pub const CBDC: &str = "cbdc";
    pub const TREASURY_DEPOSIT: &str = "treasury_deposit";
    pub const BILLS: &str = "bills";
    pub const DEPOSITS: &str = "deposits";
    pub const FBSC: &str = "fbsc";
    pub const ADVANCES: &str = "advances";
    pub const LOANS_HOUSEHOLDS: &str = "loans_households";
    pub const LOANS_FIRMS: &str = "loans_firms";
    pub const DTC: &str = "dtc";
    pub const SHARES: &str = "shares";
    pub const BITCOIN: &str = "bitcoin";
}

use instr::*;
use roles::*;

fn a(s: &str) -> AgentId {
    AgentId::new(s)
}

fn i(s: &str) -> InstrumentId {
    InstrumentId::new(s)
}

/// Agents and instruments of the default economy, without balances.
pub fn skeleton() -> World {
    let mut w = World::new();
    for (id, name, sector) in [
        (HOUSEHOLDS, "Households", Sector::Households),
        (FIRMS, "Firms", Sector::Firms),
        (DTC_ADMIN, "DTC administrator", Sector::Firms),
        (BANK, "Bank", Sector::Banks),
        (OFI, "Other financial institutions", Sector::OtherFinancial),
        (TREASURY, "Treasury", Sector::Treasury),
        (CENTRAL_BANK, "Central bank", Sector::CentralBank),
        (REST_OF_WORLD, "Rest of the world", Sector::RestOfWorld),
    ] {
        w.add_agent(Agent::new(id, name, sector)).unwrap();
    }
    let issued = [
        (CASH, "cash", CENTRAL_BANK),
        (RESERVES, "reserves", CENTRAL_BANK),
        (CBDC, "CBDC", CENTRAL_BANK),
        (TREASURY_DEPOSIT, "treasury deposit", CENTRAL_BANK),
        (BILLS, "treasury bills", TREASURY),
        (DEPOSITS, "deposits", BANK),
        (FBSC, "FBSC", BANK),
        (ADVANCES, "advances", BANK),
        (LOANS_HOUSEHOLDS, "household loans", HOUSEHOLDS),
        (LOANS_FIRMS, "firm loans", FIRMS),
        (DTC, "DTC", DTC_ADMIN),
        (SHARES, "shares", OFI),
    ];
    for (id, name, issuer) in issued {
        w.add_instrument(Instrument::issued(id, name, issuer)).unwrap();
    }
    w.add_instrument(Instrument::coin(BITCOIN, "bitcoin")).unwrap();
    w
}

/// Opening stocks for a period output of about 100 million.
pub fn default_world(mode: BankingMode) -> World {
    const K: i64 = 1_000;
    let mut w = skeleton();
    let narrow = mode == BankingMode::Narrow;
    let mut rows: Vec<(&str, Side, &str, i64)> = vec![
        (HOUSEHOLDS, Side::Asset, DEPOSITS, 60_000),
        (HOUSEHOLDS, Side::Asset, BILLS, 20_000),
        (HOUSEHOLDS, Side::Asset, BITCOIN, 1_000),
        (HOUSEHOLDS, Side::Liability, LOANS_HOUSEHOLDS, 10_000),
        (FIRMS, Side::Asset, DEPOSITS, 20_000),
        (FIRMS, Side::Liability, LOANS_FIRMS, 30_000),
        (OFI, Side::Asset, DEPOSITS, 5_000),
        (OFI, Side::Asset, BILLS, 5_000),
        (DTC_ADMIN, Side::Asset, DEPOSITS, 2_000),
        (DTC_ADMIN, Side::Liability, DTC, 2_000),
        (REST_OF_WORLD, Side::Asset, CASH, 10_000),
        (REST_OF_WORLD, Side::Asset, DTC, 2_000),
        (BANK, Side::Liability, DEPOSITS, 87_000),
        (TREASURY, Side::Asset, TREASURY_DEPOSIT, 5_000),
        (CENTRAL_BANK, Side::Liability, CASH, 10_000),
        (CENTRAL_BANK, Side::Liability, TREASURY_DEPOSIT, 5_000),
    ];
    if narrow {
        rows.extend([
            (HOUSEHOLDS, Side::Asset, SHARES, 48_000),
            (OFI, Side::Liability, SHARES, 48_000),
            (OFI, Side::Asset, LOANS_HOUSEHOLDS, 10_000),
            (OFI, Side::Asset, LOANS_FIRMS, 30_000),
            (BANK, Side::Asset, RESERVES, 90_000),
            (CENTRAL_BANK, Side::Asset, BILLS, 110_000),
            (CENTRAL_BANK, Side::Liability, RESERVES, 90_000),
            (TREASURY, Side::Liability, BILLS, 135_000),
        ]);
    } else {
        rows.extend([
            (HOUSEHOLDS, Side::Asset, SHARES, 8_000),
            (OFI, Side::Liability, SHARES, 8_000),
            (BANK, Side::Asset, LOANS_HOUSEHOLDS, 10_000),
            (BANK, Side::Asset, LOANS_FIRMS, 30_000),
            (BANK, Side::Asset, RESERVES, 10_000),
            (BANK, Side::Asset, BILLS, 40_000),
            (CENTRAL_BANK, Side::Asset, BILLS, 30_000),
            (CENTRAL_BANK, Side::Liability, RESERVES, 10_000),
            (TREASURY, Side::Liability, BILLS, 95_000),
        ]);
    }
    for (agent, side, inst, v) in rows {
        w.seed_position(&a(agent), side, &i(inst), Amount(v * K)).unwrap();
    }
    w
}

/// Carried from one period to the next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconState {
    pub step: u64,
    pub sales: i64,
    pub disposable_income: i64,
    /// Household interest and dividend receipts.
    pub nonwage_income: i64,
    pub output: i64,
    /// Central-bank net worth kept back from remittances.
    pub cb_retained: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub output: i64,
    pub consumption: i64,
    pub investment: i64,
    pub government: i64,
    pub exports: i64,
    pub imports: i64,
    pub wages: i64,
    pub taxes: i64,
    pub disposable_income: i64,
    /// Treasury bills outstanding.
    pub debt: i64,
    pub debt_ratio: f64,
    pub flows: FlowMatrix,
    pub stocks: SectorMatrix,
    pub sfc: SfcReport,
    /// Reserve cover of the bank in narrow mode.
    pub narrow: Option<BackingStatus>,
}

fn part(share: f64, x: i64) -> i64 {
    if x <= 0 || share <= 0.0 {
        return 0;
    }
    (share * x as f64).floor() as i64
}

#[derive(Debug, Clone)]
pub struct Economy {
    world: World,
    policy: BehavioralPolicy,
    state: EconState,
    rng: ChaCha8Rng,
}

type Leg = (AgentId, Side, InstrumentId, i64);

impl Economy {
    pub fn new(world: World, policy: BehavioralPolicy, seed: u64) -> Result<Self, SfcError> {
        policy.validate().map_err(SfcError::InvalidPolicy)?;
        for r in [HOUSEHOLDS, FIRMS, BANK, OFI, TREASURY, CENTRAL_BANK, REST_OF_WORLD, DTC_ADMIN] {
            world.require_agent(&a(r)).map_err(|_| SfcError::MissingRole(r.to_string()))?;
        }
        for inst in [
            CASH, RESERVES, CBDC, TREASURY_DEPOSIT, BILLS, DEPOSITS, FBSC, ADVANCES, LOANS_HOUSEHOLDS, LOANS_FIRMS, DTC,
        ] {
            world.require_instrument(&i(inst)).map_err(|_| SfcError::MissingRole(inst.to_string()))?;
        }
        let report = verify_global_consistency(&world);
        if !report.is_clean() {
            return Err(SfcError::InconsistentState(format!("{:?}", report.flags)));
        }
        let trend = policy.trend_output;
        let state = EconState {
            step: 0,
            sales: trend,
            disposable_income: part(policy.wage_share, trend),
            nonwage_income: 0,
            output: trend,
            cb_retained: world.net_worth_of(&a(CENTRAL_BANK)).value(),
        };
        Ok(Economy {
            world,
            policy,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// The default opening stocks for the policy's banking mode.
    pub fn with_defaults(policy: BehavioralPolicy, seed: u64) -> Result<Self, SfcError> {
        let w = default_world(policy.mode);
        Self::new(w, policy, seed)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn policy(&self) -> &BehavioralPolicy {
        &self.policy
    }

    pub fn state(&self) -> &EconState {
        &self.state
    }

    /// Continues from `world`, which must still hold every role and pass the
    /// consistency check.
    pub fn set_world(&mut self, world: World) -> Result<(), SfcError> {
        let fresh = Economy::new(world, self.policy.clone(), 0)?;
        self.world = fresh.world;
        Ok(())
    }

    pub fn set_policy(&mut self, policy: BehavioralPolicy) -> Result<(), SfcError> {
        policy.validate().map_err(SfcError::InvalidPolicy)?;
        self.policy = policy;
        Ok(())
    }

    /// Runs one period. On error the economy is left as it was.
    pub fn step(&mut self) -> Result<StepRecord, SfcError> {
        let mut world = self.world.clone();
        world.advance_clock();
        let before = build_balance_sheet_matrix(&world);
        let mut rng = self.rng.clone();
        let step_no = self.state.step + 1;
        let mut p = Period {
            w: &mut world,
            policy: &self.policy,
            prev: &self.state,
            step: step_no,
            stage: "start",
            hh_nonwage: 0,
        };
        let (rec, next) = p.run(&mut rng)?;
        let flows = build_flow_matrix(&world, world.clock())?;
        let stocks = build_balance_sheet_matrix(&world);
        let sfc = check_sfc(&before, &flows, &stocks);
        let narrow = (self.policy.mode == BankingMode::Narrow)
            .then(|| check_narrow_bank(&world, &a(BANK), NarrowCover { include_cash_and_cbdc: false }));
        if let Some(st) = &narrow {
            if !st.satisfied {
                return Err(SfcError::PolicyDivergence {
                    step: step_no,
                    stage: "narrow bank check".into(),
                    reason: format!("cover {} against {}", st.cover_value, st.outstanding),
                });
            }
        }
        let debt = world.owing(&a(TREASURY), &i(BILLS)).value();
        let record = StepRecord {
            step: step_no,
            debt,
            debt_ratio: if rec.output > 0 { debt as f64 / rec.output as f64 } else { 0.0 },
            flows,
            stocks,
            sfc,
            narrow,
            ..rec
        };
        self.world = world;
        self.rng = rng;
        self.state = next;
        Ok(record)
    }

    pub fn run(&mut self, steps: usize) -> Result<Vec<StepRecord>, SfcError> {
        (0..steps).map(|_| self.step()).collect()
    }
}

struct Period<'a> {
    w: &'a mut World,
    policy: &'a BehavioralPolicy,
    prev: &'a EconState,
    step: u64,
    stage: &'static str,
    hh_nonwage: i64,
}

impl Period<'_> {
    fn diverge(&self, reason: impl ToString) -> SfcError {
        SfcError::PolicyDivergence {
            step: self.step,
            stage: self.stage.to_string(),
            reason: reason.to_string(),
        }
    }

    fn hold(&self, agent: &str, inst: &str) -> i64 {
        self.w.holding(&a(agent), &i(inst)).value()
    }

    fn owe(&self, agent: &str, inst: &str) -> i64 {
        self.w.owing(&a(agent), &i(inst)).value()
    }

    fn nw(&self, agent: &str) -> i64 {
        self.w.net_worth_of(&a(agent)).value()
    }

    fn holders(&self, inst: &str) -> Vec<&'static str> {
        let id = i(inst);
        [HOUSEHOLDS, FIRMS, DTC_ADMIN, BANK, OFI, TREASURY, CENTRAL_BANK, REST_OF_WORLD]
            .into_iter()
            .filter(|ag| self.w.holding(&a(ag), &id).value() > 0)
            .collect()
    }

    /// Account provider and account instrument of `agent`.
    fn account(agent: &str) -> Option<(&'static str, &'static str)> {
        match agent {
            HOUSEHOLDS | FIRMS | OFI | DTC_ADMIN => Some((BANK, DEPOSITS)),
            BANK => Some((CENTRAL_BANK, RESERVES)),
            TREASURY => Some((CENTRAL_BANK, TREASURY_DEPOSIT)),
            REST_OF_WORLD => Some((CENTRAL_BANK, CASH)),
            _ => None,
        }
    }

    fn chain(agent: &'static str) -> Vec<&'static str> {
        let mut out = vec![agent];
        let mut cur = agent;
        while let Some((up, _)) = Self::account(cur) {
            out.push(up);
            cur = up;
        }
        out
    }

    /// Nodes whose own account is debited when `from` pays `to`.
    fn up_path(from: &'static str, to: &'static str) -> (Vec<&'static str>, Vec<&'static str>) {
        let cf = Self::chain(from);
        let ct = Self::chain(to);
        let lca = cf.iter().position(|n| ct.contains(n)).expect("every chain ends at the central bank");
        let meet = cf[lca];
        let down_len = ct.iter().position(|n| *n == meet).unwrap();
        (cf[..lca].to_vec(), ct[..down_len].to_vec())
    }

    fn can_borrow(agent: &str) -> bool {
        agent == BANK
    }

    /// How much `from` can pay `to` without outside financing.
    fn capacity(&self, from: &'static str, to: &'static str) -> i64 {
        let (up, _) = Self::up_path(from, to);
        match up.first() {
            None => i64::MAX,
            Some(n) if Self::can_borrow(n) => i64::MAX,
            Some(n) => self.hold(n, Self::account(n).unwrap().1),
        }
    }

    fn post(&mut self, flow: FlowCategory, description: String, legs: Vec<Leg>) -> Result<(), SfcError> {
        let mut net: BTreeMap<(AgentId, Side, InstrumentId), i64> = BTreeMap::new();
        for (ag, side, inst, d) in legs {
            *net.entry((ag, side, inst)).or_default() += d;
        }
        let mut tx = Transaction::new(description).tagged(flow);
        for ((ag, side, inst), d) in &net {
            tx = tx.change(ag, *side, inst, *d);
        }
        if tx.is_empty() {
            return Ok(());
        }
        self.w.post(tx).map_err(|e| self.diverge(e))?;
        Ok(())
    }

    /// The bank borrows from the central bank so its reserves reach `need`.
    fn ensure_reserves(&mut self, bank: &'static str, need: i64) -> Result<(), SfcError> {
        let have = self.hold(bank, RESERVES);
        if have >= need {
            return Ok(());
        }
        let g = need - have;
        self.post(
            FlowCategory::OpenMarket,
            format!("{bank} takes {g} of advances"),
            vec![
                (a(bank), Side::Liability, i(ADVANCES), g),
                (a(CENTRAL_BANK), Side::Asset, i(ADVANCES), g),
                (a(CENTRAL_BANK), Side::Liability, i(RESERVES), g),
                (a(bank), Side::Asset, i(RESERVES), g),
            ],
        )
    }

    /// Pays up to `v` from `from` to `to`, clamped to what a non-bank payer
    /// holds. `extra` adds the legs of whatever the payment buys. Returns the
    /// amount paid.
    fn pay(
        &mut self,
        flow: FlowCategory,
        from: &'static str,
        to: &'static str,
        v: i64,
        extra: impl Fn(i64) -> Vec<Leg>,
    ) -> Result<i64, SfcError> {
        let v = v.min(self.capacity(from, to));
        if v <= 0 || from == to {
            return Ok(0);
        }
        let (up, down) = Self::up_path(from, to);
        for n in &up {
            if Self::can_borrow(n) {
                self.ensure_reserves(n, v)?;
            }
        }
        let mut legs = Vec::new();
        for n in up {
            let (bk, acct) = Self::account(n).unwrap();
            legs.push((a(n), Side::Asset, i(acct), -v));
            legs.push((a(bk), Side::Liability, i(acct), -v));
        }
        for n in down {
            let (bk, acct) = Self::account(n).unwrap();
            legs.push((a(bk), Side::Liability, i(acct), v));
            legs.push((a(n), Side::Asset, i(acct), v));
        }
        legs.extend(extra(v));
        self.post(flow, format!("{from} pays {v} to {to} ({})", flow.label()), legs)?;
        Ok(v)
    }

    fn transfer(&mut self, flow: FlowCategory, from: &'static str, to: &'static str, inst: &'static str, v: i64) -> Result<i64, SfcError> {
        let v = v.min(self.hold(from, inst));
        if v <= 0 {
            return Ok(0);
        }
        self.post(
            flow,
            format!("{from} transfers {v} of {inst} to {to}"),
            vec![(a(from), Side::Asset, i(inst), -v), (a(to), Side::Asset, i(inst), v)],
        )?;
        Ok(v)
    }

    fn loan_legs(borrower: &'static str, lender: &'static str, loan: &'static str, sign: i64) -> impl Fn(i64) -> Vec<Leg> {
        move |v| {
            vec![
                (a(borrower), Side::Liability, i(loan), sign * v),
                (a(lender), Side::Asset, i(loan), sign * v),
            ]
        }
    }

    /// Issues bills to the central bank until the treasury holds `need`.
    fn fund_treasury(&mut self, need: i64) -> Result<(), SfcError> {
        let have = self.hold(TREASURY, TREASURY_DEPOSIT);
        if have >= need {
            return Ok(());
        }
        let b = need - have;
        self.post(
            FlowCategory::Portfolio,
            format!("treasury issues {b} of bills to the central bank"),
            vec![
                (a(TREASURY), Side::Liability, i(BILLS), b),
                (a(CENTRAL_BANK), Side::Asset, i(BILLS), b),
                (a(CENTRAL_BANK), Side::Liability, i(TREASURY_DEPOSIT), b),
                (a(TREASURY), Side::Asset, i(TREASURY_DEPOSIT), b),
            ],
        )
    }

    fn pay_households(&mut self, flow: FlowCategory, from: &'static str, v: i64) -> Result<i64, SfcError> {
        let paid = self.pay(flow, from, HOUSEHOLDS, v, |_| vec![])?;
        self.hh_nonwage += paid;
        Ok(paid)
    }

    fn run(&mut self, rng: &mut ChaCha8Rng) -> Result<(StepRecord, EconState), SfcError> {
        let p = self.policy;
        let prev = self.prev;
        let payers = [FIRMS, DTC_ADMIN, BANK, OFI];
        let nw_start: Vec<i64> = payers.iter().map(|ag| self.nw(ag)).collect();

        self.stage = "wages";
        let wage_target = part(p.wage_share, prev.sales);
        self.finance_wages(wage_target)?;
        let wages = self.pay(FlowCategory::Wages, FIRMS, HOUSEHOLDS, wage_target, |_| vec![])?;

        self.stage = "consumption";
        let factor = if p.demand_noise > 0.0 {
            1.0 + rng.gen_range(-p.demand_noise..=p.demand_noise)
        } else {
            1.0
        };
        let wealth = self.nw(HOUSEHOLDS).max(0) as f64;
        let desired = ((p.alpha1 * prev.disposable_income.max(0) as f64 + p.alpha2 * wealth) * factor).floor() as i64;
        // the period's tax bill is set aside before spending
        let tax_due = part(p.tax_rate, wages + prev.nonwage_income);
        let consumption = desired.min(self.hold(HOUSEHOLDS, DEPOSITS) - tax_due).max(0);
        let imports = part(p.import_share, consumption);
        let domestic = self.pay(FlowCategory::Consumption, HOUSEHOLDS, FIRMS, consumption - imports, |_| vec![])?;
        let imports = self.pay(FlowCategory::Imports, HOUSEHOLDS, REST_OF_WORLD, imports, |_| vec![])?;
        let export_target = part(p.export_propensity, self.hold(REST_OF_WORLD, CASH) + self.hold(REST_OF_WORLD, DTC));
        let in_dtc = self.transfer(FlowCategory::Exports, REST_OF_WORLD, FIRMS, DTC, part(p.dtc_export_share, export_target))?;
        let in_cash = self.pay(FlowCategory::Exports, REST_OF_WORLD, FIRMS, export_target - in_dtc, |_| vec![])?;
        let exports = in_dtc + in_cash;

        self.stage = "taxes and spending";
        let taxes = self.pay(FlowCategory::Taxes, HOUSEHOLDS, TREASURY, tax_due, |_| vec![])?;
        let g = part(p.spending_ratio, p.trend_output);
        self.fund_treasury(g)?;
        let government = self.pay(FlowCategory::GovernmentSpending, TREASURY, FIRMS, g, |_| vec![])?;

        self.stage = "interest";
        self.interest()?;
        let cb_excess = self.nw(CENTRAL_BANK) - prev.cb_retained;
        if cb_excess > 0 {
            self.pay(FlowCategory::Dividends, CENTRAL_BANK, TREASURY, cb_excess, |_| vec![])?;
        }

        self.stage = "dividends";
        for (ag, start) in payers.iter().zip(nw_start) {
            let profit = self.nw(ag) - start;
            self.pay_households(FlowCategory::Dividends, ag, part(p.dividend_payout, profit))?;
        }

        self.stage = "portfolio";
        self.portfolio()?;

        self.stage = "open market";
        self.open_market(g)?;

        self.stage = "coin issuance";
        self.coins()?;

        let investment = part(p.investment_share, prev.output);
        let output = domestic + investment + government + exports;
        let disposable_income = wages + self.hh_nonwage - taxes;
        let rec = StepRecord {
            step: self.step,
            output,
            consumption: domestic + imports,
            investment,
            government,
            exports,
            imports,
            wages,
            taxes,
            disposable_income,
            debt: 0,
            debt_ratio: 0.0,
            flows: FlowMatrix::zero(0),
            stocks: SectorMatrix::default(),
            sfc: SfcReport::default(),
            narrow: None,
        };
        let next = EconState {
            step: self.step,
            sales: domestic + government + exports,
            disposable_income,
            nonwage_income: self.hh_nonwage,
            output,
            cb_retained: prev.cb_retained,
        };
        Ok((rec, next))
    }

    fn finance_wages(&mut self, wage_bill: i64) -> Result<(), SfcError> {
        let p = self.policy;
        let mut gap = wage_bill - self.hold(FIRMS, DEPOSITS);
        if gap <= 0 {
            return Ok(());
        }
        match p.mode {
            BankingMode::Fractional => {
                self.post(
                    FlowCategory::Portfolio,
                    format!("bank lends {gap} to firms"),
                    vec![
                        (a(FIRMS), Side::Liability, i(LOANS_FIRMS), gap),
                        (a(BANK), Side::Asset, i(LOANS_FIRMS), gap),
                        (a(BANK), Side::Liability, i(DEPOSITS), gap),
                        (a(FIRMS), Side::Asset, i(DEPOSITS), gap),
                    ],
                )?;
                gap = 0;
            }
            BankingMode::Narrow => {
                gap -= self.pay(FlowCategory::Portfolio, OFI, FIRMS, gap, Self::loan_legs(FIRMS, OFI, LOANS_FIRMS, 1))?;
            }
        }
        if p.cb_direct_lending && gap > 0 && gap as f64 > p.credit_gap_trigger * wage_bill as f64 {
            self.pay(FlowCategory::Portfolio, CENTRAL_BANK, FIRMS, gap, Self::loan_legs(FIRMS, CENTRAL_BANK, LOANS_FIRMS, 1))?;
        }
        Ok(())
    }

    fn interest(&mut self) -> Result<(), SfcError> {
        let r = self.policy.rates;
        for holder in self.holders(BILLS) {
            let v = part(r.bills, self.hold(holder, BILLS));
            self.fund_treasury(v)?;
            if holder == HOUSEHOLDS {
                self.pay_households(FlowCategory::Interest, TREASURY, v)?;
            } else {
                self.pay(FlowCategory::Interest, TREASURY, holder, v, |_| vec![])?;
            }
        }
        for (loan, borrower) in [(LOANS_HOUSEHOLDS, HOUSEHOLDS), (LOANS_FIRMS, FIRMS)] {
            for lender in self.holders(loan) {
                let v = part(r.loans, self.hold(lender, loan));
                self.pay(FlowCategory::Interest, borrower, lender, v, |_| vec![])?;
            }
        }
        for holder in self.holders(DEPOSITS) {
            let v = part(r.deposits, self.hold(holder, DEPOSITS));
            if holder == HOUSEHOLDS {
                self.pay_households(FlowCategory::Interest, BANK, v)?;
            } else {
                self.pay(FlowCategory::Interest, BANK, holder, v, |_| vec![])?;
            }
        }
        let v = part(r.reserves, self.hold(BANK, RESERVES));
        self.pay(FlowCategory::Interest, CENTRAL_BANK, BANK, v, |_| vec![])?;
        let v = part(r.advances, self.owe(BANK, ADVANCES));
        self.pay(FlowCategory::Interest, BANK, CENTRAL_BANK, v, |_| vec![])?;
        let held = self.hold(HOUSEHOLDS, CBDC);
        let v = part(r.cbdc.abs(), held);
        if v > 0 {
            let d = if r.cbdc > 0.0 { v } else { -v };
            self.post(
                FlowCategory::Interest,
                format!("interest of {d} on household CBDC"),
                vec![
                    (a(CENTRAL_BANK), Side::Liability, i(CBDC), d),
                    (a(HOUSEHOLDS), Side::Asset, i(CBDC), d),
                ],
            )?;
            self.hh_nonwage += d;
        }
        Ok(())
    }

    fn portfolio(&mut self) -> Result<(), SfcError> {
        let p = self.policy;
        for (loan, borrower) in [(LOANS_HOUSEHOLDS, HOUSEHOLDS), (LOANS_FIRMS, FIRMS)] {
            for lender in self.holders(loan) {
                let v = part(p.loan_repayment, self.hold(lender, loan));
                self.pay(FlowCategory::Portfolio, borrower, lender, v, Self::loan_legs(borrower, lender, loan, -1))?;
            }
        }
        let target = part(p.bills_share, self.nw(HOUSEHOLDS));
        let have = self.hold(HOUSEHOLDS, BILLS);
        let step = part(p.portfolio_adjustment, (target - have).abs());
        if target > have {
            let v = step.min(self.hold(CENTRAL_BANK, BILLS));
            self.pay(FlowCategory::Portfolio, HOUSEHOLDS, CENTRAL_BANK, v, |v| bills_move(CENTRAL_BANK, HOUSEHOLDS, v))?;
        } else {
            self.pay(FlowCategory::Portfolio, CENTRAL_BANK, HOUSEHOLDS, step.min(have), |v| bills_move(HOUSEHOLDS, CENTRAL_BANK, v))?;
        }
        Ok(())
    }

    fn open_market(&mut self, buffer: i64) -> Result<(), SfcError> {
        let p = self.policy;
        let surplus = self.hold(TREASURY, TREASURY_DEPOSIT) - buffer;
        let v = part(p.debt_management, surplus).min(self.hold(CENTRAL_BANK, BILLS));
        self.pay(FlowCategory::OpenMarket, TREASURY, CENTRAL_BANK, v, |v| {
            vec![
                (a(TREASURY), Side::Liability, i(BILLS), -v),
                (a(CENTRAL_BANK), Side::Asset, i(BILLS), -v),
            ]
        })?;

        let reserves = self.hold(BANK, RESERVES);
        let advances = self.owe(BANK, ADVANCES);
        let repay_advances = |v: i64| {
            vec![
                (a(BANK), Side::Liability, i(ADVANCES), -v),
                (a(CENTRAL_BANK), Side::Asset, i(ADVANCES), -v),
            ]
        };
        match p.mode {
            BankingMode::Fractional => {
                let target = part(p.reserve_ratio, self.owe(BANK, DEPOSITS) + self.owe(BANK, FBSC));
                if reserves < target {
                    let sell = (target - reserves).min(self.hold(BANK, BILLS));
                    self.pay(FlowCategory::OpenMarket, CENTRAL_BANK, BANK, sell, |v| bills_move(BANK, CENTRAL_BANK, v))?;
                    self.ensure_reserves(BANK, target)?;
                } else {
                    let mut excess = reserves - target;
                    excess -= self.pay(FlowCategory::OpenMarket, BANK, CENTRAL_BANK, excess.min(advances), repay_advances)?;
                    let buy = part(p.excess_reserve_investment, excess).min(self.hold(CENTRAL_BANK, BILLS));
                    self.pay(FlowCategory::OpenMarket, BANK, CENTRAL_BANK, buy, |v| bills_move(CENTRAL_BANK, BANK, v))?;
                }
            }
            BankingMode::Narrow => {
                let excess = reserves - self.owe(BANK, DEPOSITS) - self.owe(BANK, FBSC);
                self.pay(FlowCategory::OpenMarket, BANK, CENTRAL_BANK, excess.min(advances), repay_advances)?;
            }
        }
        Ok(())
    }

    fn coins(&mut self) -> Result<(), SfcError> {
        let p = self.policy;
        let dep = self.hold(HOUSEHOLDS, DEPOSITS);
        let cbdc = self.hold(HOUSEHOLDS, CBDC);
        let target = part(p.cbdc_share, dep + cbdc);
        let adj = part(p.portfolio_adjustment, (target - cbdc).abs());
        let cbdc_legs = |sign: i64| {
            move |v: i64| {
                vec![
                    (a(CENTRAL_BANK), Side::Liability, i(CBDC), sign * v),
                    (a(HOUSEHOLDS), Side::Asset, i(CBDC), sign * v),
                ]
            }
        };
        if target > cbdc {
            self.pay(FlowCategory::CoinIssuance, HOUSEHOLDS, CENTRAL_BANK, adj, cbdc_legs(1))?;
        } else {
            self.pay(FlowCategory::CoinIssuance, CENTRAL_BANK, HOUSEHOLDS, adj.min(cbdc), cbdc_legs(-1))?;
        }

        if p.mode == BankingMode::Narrow {
            let dep = self.hold(HOUSEHOLDS, DEPOSITS);
            let fbsc = self.hold(HOUSEHOLDS, FBSC);
            let target = part(p.fbsc_share, dep + fbsc);
            let adj = part(p.portfolio_adjustment, (target - fbsc).abs());
            let v = if target > fbsc { adj.min(dep) } else { -adj.min(fbsc) };
            self.post(
                FlowCategory::CoinIssuance,
                format!("households convert {v} of deposits into FBSC"),
                vec![
                    (a(HOUSEHOLDS), Side::Asset, i(DEPOSITS), -v),
                    (a(BANK), Side::Liability, i(DEPOSITS), -v),
                    (a(BANK), Side::Liability, i(FBSC), v),
                    (a(HOUSEHOLDS), Side::Asset, i(FBSC), v),
                ],
            )?;
        }

        let dtc_legs = |holder: &'static str, sign: i64| {
            move |v: i64| {
                vec![
                    (a(DTC_ADMIN), Side::Liability, i(DTC), sign * v),
                    (a(holder), Side::Asset, i(DTC), sign * v),
                ]
            }
        };
        let held = self.hold(FIRMS, DTC);
        self.pay(FlowCategory::CoinIssuance, DTC_ADMIN, FIRMS, held, dtc_legs(FIRMS, -1))?;

        let cash = self.hold(REST_OF_WORLD, CASH);
        let dtc = self.hold(REST_OF_WORLD, DTC);
        let target = part(p.dtc_share, cash + dtc);
        let adj = part(p.portfolio_adjustment, (target - dtc).abs());
        if target > dtc {
            self.pay(FlowCategory::CoinIssuance, REST_OF_WORLD, DTC_ADMIN, adj, dtc_legs(REST_OF_WORLD, 1))?;
        } else {
            self.pay(FlowCategory::CoinIssuance, DTC_ADMIN, REST_OF_WORLD, adj.min(dtc), dtc_legs(REST_OF_WORLD, -1))?;
        }
        Ok(())
    }
}

fn bills_move(from: &'static str, to: &'static str, v: i64) -> Vec<Leg> {
    vec![(a(from), Side::Asset, i(BILLS), -v), (a(to), Side::Asset, i(BILLS), v)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_worlds_are_consistent() {
        for mode in [BankingMode::Fractional, BankingMode::Narrow] {
            let w = default_world(mode);
            assert!(verify_global_consistency(&w).is_clean());
            let m = build_balance_sheet_matrix(&w);
            assert!(m.flags().is_empty());
            assert_eq!(m.row(BITCOIN).unwrap().sum(), Amount(1_000_000));
        }
    }

    #[test]
    fn payment_paths() {
        assert_eq!(Period::up_path(HOUSEHOLDS, FIRMS), (vec![HOUSEHOLDS], vec![FIRMS]));
        assert_eq!(
            Period::up_path(HOUSEHOLDS, REST_OF_WORLD),
            (vec![HOUSEHOLDS, BANK], vec![REST_OF_WORLD])
        );
        assert_eq!(Period::up_path(CENTRAL_BANK, OFI), (vec![], vec![OFI, BANK]));
        assert_eq!(Period::up_path(BANK, HOUSEHOLDS), (vec![], vec![HOUSEHOLDS]));
    }

    #[test]
    fn zero_policy_changes_nothing() {
        let mut e = Economy::with_defaults(BehavioralPolicy::zero(), 1).unwrap();
        let start = e.world().clone();
        let rec = e.step().unwrap();
        assert!(e.world().journal().is_empty());
        assert_eq!(build_balance_sheet_matrix(e.world()), build_balance_sheet_matrix(&start));
        assert!(rec.flows.nonzero_rows().is_empty());
        assert!(rec.sfc.is_clean());
    }

    #[test]
    fn wage_only_policy_has_one_flow_row() {
        let p = BehavioralPolicy {
            wage_share: 0.5,
            trend_output: 10_000_000,
            ..BehavioralPolicy::zero()
        };
        let mut e = Economy::with_defaults(p, 1).unwrap();
        let rec = e.step().unwrap();
        assert_eq!(rec.wages, 5_000_000);
        assert_eq!(rec.flows.nonzero_rows(), vec![FlowCategory::Wages]);
        assert_eq!(rec.flows.cell(FlowCategory::Wages, Sector::Households), Amount(5_000_000));
        assert!(rec.sfc.is_clean());
    }

    #[test]
    fn wage_shortfall_is_financed_by_the_bank() {
        let p = BehavioralPolicy {
            wage_share: 1.0,
            trend_output: 50_000_000,
            ..BehavioralPolicy::zero()
        };
        let mut e = Economy::with_defaults(p, 1).unwrap();
        let loans = e.world().owing(&a(FIRMS), &i(LOANS_FIRMS));
        e.step().unwrap();
        assert_eq!(e.world().owing(&a(FIRMS), &i(LOANS_FIRMS)) - loans, Amount(30_000_000));
    }

    #[test]
    fn default_runs_are_consistent() {
        for policy in [BehavioralPolicy::default(), BehavioralPolicy::narrow()] {
            let mut e = Economy::with_defaults(policy, 7).unwrap();
            for rec in e.run(30).unwrap() {
                assert!(rec.sfc.is_clean(), "step {}: {:?}", rec.step, rec.sfc);
                assert!(rec.stocks.flags().is_empty());
                assert!(rec.narrow.as_ref().is_none_or(|s| s.satisfied));
            }
            assert!(verify_global_consistency(e.world()).is_clean());
        }
    }

    #[test]
    fn same_seed_same_path() {
        let p = BehavioralPolicy {
            demand_noise: 0.2,
            ..BehavioralPolicy::default()
        };
        let run = |seed| {
            let mut e = Economy::with_defaults(p.clone(), seed).unwrap();
            e.run(20).unwrap().iter().map(|r| r.output).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn failed_step_leaves_economy_untouched() {
        let mut w = default_world(BankingMode::Narrow);
        // the bank starts short of cover, so the first narrow check fails
        w.seed_position(&a(BANK), Side::Asset, &i(RESERVES), Amount(80_000_000)).unwrap();
        w.seed_position(&a(CENTRAL_BANK), Side::Liability, &i(RESERVES), Amount(80_000_000)).unwrap();
        w.seed_position(&a(CENTRAL_BANK), Side::Asset, &i(BILLS), Amount(100_000_000)).unwrap();
        w.seed_position(&a(TREASURY), Side::Liability, &i(BILLS), Amount(125_000_000)).unwrap();
        let mut e = Economy::new(w, BehavioralPolicy::narrow(), 1).unwrap();
        let before = e.world().clone();
        assert!(matches!(e.step(), Err(SfcError::PolicyDivergence { .. })));
        assert_eq!(e.world(), &before);
        assert_eq!(e.state().step, 0);
    }
}
