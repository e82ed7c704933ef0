mod common;

use coinsfc::ledger::FlowCategory;
use coinsfc::sfc::{check_sfc, BankingMode, BehavioralPolicy, Economy};
use coinsfc::{verify_global_consistency, Amount, Sector};
use common::random_policy;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_policies_stay_consistent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_policy(&mut rng);
        let mut eco = Economy::with_defaults(policy.clone(), seed).unwrap();
        let records = eco.run(100).map_err(|e| TestCaseError::fail(format!("{e} under {policy:?}")))?;
        for r in &records {
            prop_assert!(r.sfc.is_clean(), "step {}: {:?}", r.step, r.sfc.flags);
            prop_assert!(r.stocks.flags().is_empty());
            for f in FlowCategory::ALL {
                prop_assert_eq!(r.flows.row_sum(f), Amount::ZERO);
            }
        }
        prop_assert!(verify_global_consistency(eco.world()).is_clean());
    }

    #[test]
    fn any_perturbed_flow_cell_is_flagged(seed in any::<u64>(), f in 0usize..12, s in 0usize..7, d in prop_oneof![-1000i64..0, 1i64..1000]) {
        let mut eco = Economy::with_defaults(BehavioralPolicy::default(), seed).unwrap();
        let before = coinsfc::sfc::build_balance_sheet_matrix(eco.world());
        let r = eco.step().unwrap();
        let mut flows = r.flows.clone();
        flows.cells[f][s] += Amount(d);
        prop_assert!(!check_sfc(&before, &flows, &r.stocks).is_clean());
    }

    #[test]
    fn any_perturbed_stock_cell_is_flagged(seed in any::<u64>(), s in 0usize..7, d in prop_oneof![-1000i64..0, 1i64..1000]) {
        let mut eco = Economy::with_defaults(BehavioralPolicy::default(), seed).unwrap();
        let before = coinsfc::sfc::build_balance_sheet_matrix(eco.world());
        let r = eco.step().unwrap();
        let mut stocks = r.stocks.clone();
        let row = stocks.rows.iter_mut().find(|x| x.label == "deposits").unwrap();
        row.cells[s] += Amount(d);
        prop_assert!(!stocks.flags().is_empty());
        prop_assert!(!check_sfc(&before, &r.flows, &stocks).is_clean());
    }
}

fn debt_ratio_spread(mode: BankingMode) -> f64 {
    let policy = BehavioralPolicy { mode, ..BehavioralPolicy::default() };
    let mut eco = Economy::with_defaults(policy, 1).unwrap();
    let recs = eco.run(100).unwrap();
    let tail: Vec<f64> = recs[50..].iter().map(|r| r.debt_ratio).collect();
    let max = tail.iter().cloned().fold(f64::MIN, f64::max);
    let min = tail.iter().cloned().fold(f64::MAX, f64::min);
    (max - min) / max.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn debt_ratio_settles_in_fractional_mode() {
    let spread = debt_ratio_spread(BankingMode::Fractional);
    assert!(spread < 0.01, "spread {spread}");
}

#[test]
fn debt_ratio_settles_in_narrow_mode() {
    let spread = debt_ratio_spread(BankingMode::Narrow);
    assert!(spread < 0.01, "spread {spread}");
}

#[test]
fn sector_count_matches_matrix_width() {
    let eco = Economy::with_defaults(BehavioralPolicy::default(), 0).unwrap();
    let m = coinsfc::sfc::build_balance_sheet_matrix(eco.world());
    for r in &m.rows {
        assert_eq!(r.cells.len(), Sector::ALL.len());
    }
}
