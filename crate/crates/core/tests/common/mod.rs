#![allow(dead_code)]
//! Random worlds and random valid transactions for property tests.

use coinsfc::{Agent, AgentId, Amount, Instrument, InstrumentId, LiabilityClass, Sector, Side, Transaction, World};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn a(s: &str) -> AgentId {
    AgentId::new(s)
}

pub fn i(s: &str) -> InstrumentId {
    InstrumentId::new(s)
}

/// A world of `n_agents` agents holding two real assets, a coin and a few
/// claims issued by random agents. Every position is seeded symmetrically.
pub fn random_world<R: Rng>(rng: &mut R, n_agents: usize, n_claims: usize) -> World {
    let mut w = World::new();
    let ids: Vec<String> = (0..n_agents).map(|k| format!("agent{k}")).collect();
    for id in &ids {
        let sector = *Sector::ALL.choose(rng).unwrap();
        w.add_agent(Agent::new(id, id, sector)).unwrap();
    }
    w.add_instrument(Instrument::real("land", "land")).unwrap();
    w.add_instrument(Instrument::real("gold", "gold")).unwrap();
    w.add_instrument(Instrument::coin("coin", "coin")).unwrap();
    for id in &ids {
        for inst in ["land", "gold", "coin"] {
            if rng.gen_bool(0.6) {
                w.seed_position(&a(id), Side::Asset, &i(inst), Amount(rng.gen_range(1..1_000_000))).unwrap();
            }
        }
    }
    for k in 0..n_claims {
        let issuer = ids.choose(rng).unwrap().clone();
        let name = format!("claim{k}");
        w.add_instrument(Instrument::issued(&name, &name, &issuer)).unwrap();
        let mut total = 0;
        for id in &ids {
            if *id != issuer && rng.gen_bool(0.5) {
                let v = rng.gen_range(1..1_000_000);
                w.seed_position(&a(id), Side::Asset, &i(&name), Amount(v)).unwrap();
                total += v;
            }
        }
        if total > 0 {
            w.seed_position(&a(&issuer), Side::Liability, &i(&name), Amount(total)).unwrap();
        }
    }
    w
}

fn pick_holding<R: Rng>(rng: &mut R, w: &World) -> Option<(AgentId, InstrumentId, i64)> {
    let mut cells = Vec::new();
    for ag in w.agents() {
        for (inst, v) in &ag.sheet.assets {
            cells.push((ag.id.clone(), inst.clone(), v.value()));
        }
    }
    cells.choose(rng).cloned()
}

fn other<R: Rng>(rng: &mut R, w: &World, not: &AgentId) -> AgentId {
    let ids: Vec<&AgentId> = w.agents().map(|x| &x.id).filter(|x| *x != not).collect();
    (*ids.choose(rng).unwrap()).clone()
}

/// A random transaction that `w` accepts.
pub fn random_valid_tx<R: Rng>(rng: &mut R, w: &World) -> Transaction {
    let kind = rng.gen_range(0..5);
    match (kind, pick_holding(rng, w)) {
        // transfer part of a holding
        (0, Some((from, inst, have))) => {
            let to = other(rng, w, &from);
            let v = rng.gen_range(1..=have);
            Transaction::new("transfer")
                .change(&from, Side::Asset, &inst, -v)
                .change(&to, Side::Asset, &inst, v)
        }
        // swap two holdings of different agents
        (1, Some((x, ix, hx))) => match pick_holding(rng, w).filter(|(y, iy, _)| *y != x && *iy != ix) {
            Some((y, iy, hy)) => {
                let (vx, vy) = (rng.gen_range(1..=hx), rng.gen_range(1..=hy));
                Transaction::new("swap")
                    .change(&x, Side::Asset, &ix, -vx)
                    .change(&y, Side::Asset, &ix, vx)
                    .change(&y, Side::Asset, &iy, -vy)
                    .change(&x, Side::Asset, &iy, vy)
            }
            None => Transaction::new("nothing"),
        },
        // issue or redeem a claim
        (2, _) | (3, _) => {
            let claims: Vec<&Instrument> =
                w.instruments().filter(|x| x.class == LiabilityClass::IssuedFinancial).collect();
            let Some(c) = claims.choose(rng) else {
                return Transaction::new("nothing");
            };
            let issuer = c.issuer.clone().unwrap();
            let holders: Vec<(AgentId, i64)> = w
                .agents()
                .filter_map(|x| x.sheet.assets.get(&c.id).map(|v| (x.id.clone(), v.value())))
                .collect();
            match (kind, holders.choose(rng)) {
                (3, Some((h, have))) => {
                    let v = rng.gen_range(1..=*have);
                    Transaction::new("redeem")
                        .change(h, Side::Asset, &c.id, -v)
                        .change(&issuer, Side::Liability, &c.id, -v)
                }
                _ => {
                    let h = other(rng, w, &issuer);
                    let v = rng.gen_range(1..100_000);
                    Transaction::new("issue")
                        .change(&h, Side::Asset, &c.id, v)
                        .change(&issuer, Side::Liability, &c.id, v)
                }
            }
        }
        // mine or produce
        _ => {
            let ids: Vec<AgentId> = w.agents().map(|x| x.id.clone()).collect();
            let who = ids.choose(rng).unwrap();
            let inst = if rng.gen_bool(0.5) { "coin" } else { "gold" };
            Transaction::new("mine")
                .creation()
                .change(who, Side::Asset, &i(inst), rng.gen_range(1..50_000))
        }
    }
}

/// Σ net worth of the agents a transaction touches.
pub fn involved_net_worth(w: &World, tx: &Transaction) -> i64 {
    tx.agents().iter().map(|x| w.net_worth_of(x).value()).sum()
}

/// Adds `delta` to one existing cell, bypassing all checks.
pub fn corrupt_random_cell<R: Rng>(rng: &mut R, w: &mut World, delta: i64) -> (AgentId, Side, InstrumentId) {
    let mut cells = Vec::new();
    for ag in w.agents() {
        for inst in ag.sheet.assets.keys() {
            cells.push((ag.id.clone(), Side::Asset, inst.clone()));
        }
        for inst in ag.sheet.liabilities.keys() {
            cells.push((ag.id.clone(), Side::Liability, inst.clone()));
        }
    }
    let (ag, side, inst) = cells.choose(rng).unwrap().clone();
    let agent = w.agent_mut_unchecked(&ag).unwrap();
    let v = agent.sheet.get(side, &inst);
    agent.sheet.set_unchecked(side, &inst, Amount(v.value() + delta));
    (ag, side, inst)
}

/// A behavioral policy drawn around the defaults, in either banking mode.
pub fn random_policy<R: Rng>(rng: &mut R) -> coinsfc::sfc::BehavioralPolicy {
    use coinsfc::sfc::{BankingMode, BehavioralPolicy};
    let mut p = if rng.gen_bool(0.5) { BehavioralPolicy::default() } else { BehavioralPolicy::narrow() };
    p.alpha1 = rng.gen_range(0.4..0.8);
    p.alpha2 = rng.gen_range(0.05..0.3);
    p.wage_share = rng.gen_range(0.5..0.8);
    p.investment_share = rng.gen_range(0.0..0.2);
    p.import_share = rng.gen_range(0.0..0.2);
    p.export_propensity = rng.gen_range(0.2..0.8);
    p.tax_rate = rng.gen_range(0.1..0.35);
    p.spending_ratio = rng.gen_range(0.1..0.3);
    p.loan_repayment = rng.gen_range(0.0..0.1);
    p.bills_share = rng.gen_range(0.0..0.4);
    p.portfolio_adjustment = rng.gen_range(0.1..1.0);
    p.reserve_ratio = rng.gen_range(0.0..0.2);
    p.excess_reserve_investment = rng.gen_range(0.0..1.0);
    p.debt_management = rng.gen_range(0.0..1.0);
    p.cbdc_share = rng.gen_range(0.0..0.3);
    p.fbsc_share = rng.gen_range(0.0..0.3);
    p.dtc_share = rng.gen_range(0.0..0.4);
    p.dtc_export_share = rng.gen_range(0.0..0.5);
    p.rates.bills = rng.gen_range(0.0..0.05);
    p.rates.loans = rng.gen_range(0.0..0.08);
    p.rates.reserves = rng.gen_range(0.0..0.03);
    p.rates.deposits = rng.gen_range(0.0..0.03);
    p.rates.cbdc = rng.gen_range(-0.01..0.01);
    p.rates.advances = rng.gen_range(0.0..0.05);
    if p.mode == BankingMode::Narrow && p.rates.deposits > p.rates.reserves {
        std::mem::swap(&mut p.rates.deposits, &mut p.rates.reserves);
    }
    p.cb_direct_lending = rng.gen_bool(0.5);
    p.credit_gap_trigger = rng.gen_range(0.0..0.3);
    p.demand_noise = rng.gen_range(0.0..0.05);
    p
}

/// The world after the named checkpoint of the composite balance-sheet
/// scenario (or its opening state for `"initial"`).
pub fn tables_world(checkpoint: &str) -> World {
    use coinsfc::scenario::{builtin, run_scenario, RunOptions};
    let s = builtin("tables-all").unwrap();
    let report = run_scenario(&s, &RunOptions::default()).unwrap();
    report.snapshot(checkpoint).unwrap().world.clone()
}

pub fn dai_vault() -> coinsfc::txops::VaultConfig {
    coinsfc::txops::VaultConfig::new("makerdao", "dai", "ethereum", "vault_eth", "dai_loan")
}

pub fn dtc_consortium() -> coinsfc::txops::DtcConsortium {
    coinsfc::txops::DtcConsortium {
        administrator: a("admin"),
        sponsors: a("sponsors"),
        affiliated_bank: a("nb"),
        basket: i("basket"),
        coin: i("dtc"),
    }
}
