//! Behavioral parameters of the seven-sector economy.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankingMode {
    /// The bank lends by creating deposits.
    Fractional,
    /// The bank holds only reserves against deposits and FBSC; credit comes
    /// from other financial institutions.
    Narrow,
}

/// Per-period rates, applied to the stocks held when interest is paid and
/// floored to whole units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rates {
    pub bills: f64,
    pub loans: f64,
    pub deposits: f64,
    pub reserves: f64,
    /// May be negative.
    pub cbdc: f64,
    pub advances: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            bills: 0.02,
            loans: 0.04,
            deposits: 0.01,
            reserves: 0.01,
            cbdc: 0.0,
            advances: 0.03,
        }
    }
}

impl Rates {
    pub fn zero() -> Self {
        Rates {
            bills: 0.0,
            loans: 0.0,
            deposits: 0.0,
            reserves: 0.0,
            cbdc: 0.0,
            advances: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehavioralPolicy {
    pub mode: BankingMode,
    /// Consumption out of last period's disposable income.
    pub alpha1: f64,
    /// Consumption out of household net worth.
    pub alpha2: f64,
    /// Wage bill as a share of last period's sales.
    pub wage_share: f64,
    /// Investment as a share of last period's output. Recorded in output, not
    /// posted: firms buy capital goods from each other.
    pub investment_share: f64,
    /// Share of consumption spent on imports.
    pub import_share: f64,
    /// Share of foreign money holdings spent on domestic exports each period.
    pub export_propensity: f64,
    pub tax_rate: f64,
    /// Government spending is `spending_ratio * trend_output`, every period.
    pub spending_ratio: f64,
    pub trend_output: i64,
    pub dividend_payout: f64,
    /// Share of each loan repaid per period.
    pub loan_repayment: f64,
    /// Household bill holdings target, as a share of net worth.
    pub bills_share: f64,
    /// Share of the gap to each portfolio target closed per period.
    pub portfolio_adjustment: f64,
    /// Bank reserve target as a share of deposits.
    pub reserve_ratio: f64,
    /// Share of excess reserves the bank invests in bills.
    pub excess_reserve_investment: f64,
    /// Share of the treasury's surplus deposits used to redeem bills held by
    /// the central bank.
    pub debt_management: f64,
    /// Household CBDC target, as a share of its money holdings.
    pub cbdc_share: f64,
    /// Household FBSC target in narrow mode, as a share of deposits plus FBSC.
    pub fbsc_share: f64,
    /// Foreign DTC target, as a share of foreign cash plus DTC.
    pub dtc_share: f64,
    /// Share of exports settled in DTC.
    pub dtc_export_share: f64,
    pub rates: Rates,
    /// Central-bank loans to firms when private credit falls short.
    pub cb_direct_lending: bool,
    /// Direct lending starts once the unfinanced part of the wage bill exceeds
    /// this share of it.
    pub credit_gap_trigger: f64,
    /// Half-width of the uniform multiplicative shock on consumption.
    pub demand_noise: f64,
}

impl Default for BehavioralPolicy {
    fn default() -> Self {
        BehavioralPolicy {
            mode: BankingMode::Fractional,
            alpha1: 0.6,
            alpha2: 0.2,
            wage_share: 0.7,
            investment_share: 0.1,
            import_share: 0.1,
            export_propensity: 0.5,
            tax_rate: 0.2,
            spending_ratio: 0.2,
            trend_output: 100_000_000,
            dividend_payout: 1.0,
            loan_repayment: 0.05,
            bills_share: 0.2,
            portfolio_adjustment: 0.5,
            reserve_ratio: 0.1,
            excess_reserve_investment: 0.5,
            debt_management: 0.5,
            cbdc_share: 0.1,
            fbsc_share: 0.1,
            dtc_share: 0.2,
            dtc_export_share: 0.3,
            rates: Rates::default(),
            cb_direct_lending: false,
            credit_gap_trigger: 0.1,
            demand_noise: 0.0,
        }
    }
}

impl BehavioralPolicy {
    /// No flows of any kind.
    pub fn zero() -> Self {
        BehavioralPolicy {
            mode: BankingMode::Fractional,
            alpha1: 0.0,
            alpha2: 0.0,
            wage_share: 0.0,
            investment_share: 0.0,
            import_share: 0.0,
            export_propensity: 0.0,
            tax_rate: 0.0,
            spending_ratio: 0.0,
            trend_output: 0,
            dividend_payout: 0.0,
            loan_repayment: 0.0,
            bills_share: 0.0,
            portfolio_adjustment: 0.0,
            reserve_ratio: 0.0,
            excess_reserve_investment: 0.0,
            debt_management: 0.0,
            cbdc_share: 0.0,
            fbsc_share: 0.0,
            dtc_share: 0.0,
            dtc_export_share: 0.0,
            rates: Rates::zero(),
            cb_direct_lending: false,
            credit_gap_trigger: 0.0,
            demand_noise: 0.0,
        }
    }

    pub fn narrow() -> Self {
        BehavioralPolicy {
            mode: BankingMode::Narrow,
            ..Self::default()
        }
    }

    fn shares(&self) -> [(&'static str, f64); 22] {
        [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("wage_share", self.wage_share),
            ("investment_share", self.investment_share),
            ("import_share", self.import_share),
            ("export_propensity", self.export_propensity),
            ("tax_rate", self.tax_rate),
            ("spending_ratio", self.spending_ratio),
            ("dividend_payout", self.dividend_payout),
            ("loan_repayment", self.loan_repayment),
            ("bills_share", self.bills_share),
            ("portfolio_adjustment", self.portfolio_adjustment),
            ("reserve_ratio", self.reserve_ratio),
            ("excess_reserve_investment", self.excess_reserve_investment),
            ("debt_management", self.debt_management),
            ("cbdc_share", self.cbdc_share),
            ("fbsc_share", self.fbsc_share),
            ("dtc_share", self.dtc_share),
            ("dtc_export_share", self.dtc_export_share),
            ("credit_gap_trigger", self.credit_gap_trigger),
            ("demand_noise", self.demand_noise),
            ("rates.cbdc magnitude", self.rates.cbdc.abs()),
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in self.shares() {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        let r = &self.rates;
        for (name, v) in [
            ("rates.bills", r.bills),
            ("rates.loans", r.loans),
            ("rates.deposits", r.deposits),
            ("rates.reserves", r.reserves),
            ("rates.advances", r.advances),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.trend_output < 0 {
            return Err("trend_output must not be negative".into());
        }
        if self.mode == BankingMode::Narrow && r.deposits > r.reserves {
            return Err(format!(
                "narrow banking needs rates.deposits ({}) <= rates.reserves ({})",
                r.deposits, r.reserves
            ));
        }
        Ok(())
    }
}
