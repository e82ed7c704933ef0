mod common;

use coinsfc::{verify_global_consistency, LedgerError, Side, Transaction, World};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_sequences_keep_every_invariant(seed in any::<u64>(), n in 2usize..9, claims in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = random_world(&mut rng, n, claims);
        let initial = w.clone();
        prop_assert!(verify_global_consistency(&w).is_clean());
        for _ in 0..60 {
            let tx = random_valid_tx(&mut rng, &w);
            let before = involved_net_worth(&w, &tx);
            let creation = tx.creation;
            w.post(tx.clone()).unwrap();
            prop_assert!(verify_global_consistency(&w).is_clean());
            if !creation {
                prop_assert_eq!(involved_net_worth(&w, &tx), before);
            }
        }
        let replayed = World::replay(&initial, w.journal()).unwrap();
        prop_assert_eq!(replayed, w);
    }

    #[test]
    fn single_cell_corruption_is_flagged(seed in any::<u64>(), up in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = random_world(&mut rng, 5, 3);
        for _ in 0..10 {
            let tx = random_valid_tx(&mut rng, &w);
            w.post(tx).unwrap();
        }
        corrupt_random_cell(&mut rng, &mut w, if up { 1 } else { -1 });
        prop_assert_eq!(verify_global_consistency(&w).flags.len(), 1);
    }

    #[test]
    fn rejected_transactions_change_nothing(seed in any::<u64>(), excess in 1i64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_world(&mut rng, 4, 2);
        let ag = w.agents().find(|x| !x.sheet.assets.is_empty()).cloned();
        prop_assume!(ag.is_some());
        let ag = ag.unwrap();
        let (inst, have) = ag.sheet.assets.iter().next().map(|(k, v)| (k.clone(), v.value())).unwrap();
        let to = w.agents().find(|x| x.id != ag.id).unwrap().id.clone();
        let tx = Transaction::new("overdraw")
            .change(&ag.id, Side::Asset, &inst, -(have + excess))
            .change(&to, Side::Asset, &inst, have + excess);
        let mut trial = w.clone();
        let err = trial.post(tx).unwrap_err();
        let is_negative_position = matches!(err, LedgerError::NegativePosition { .. });
        prop_assert!(is_negative_position);
        prop_assert_eq!(trial, w);
    }
}

#[test]
fn unbalanced_issue_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut w = random_world(&mut rng, 3, 1);
    let issuer = w.instrument(&i("claim0")).unwrap().issuer.clone().unwrap();
    let holder = w.agents().find(|x| x.id != issuer).unwrap().id.clone();
    let before = w.clone();
    let tx = Transaction::new("7 against 6")
        .change(&holder, Side::Asset, &i("claim0"), 7)
        .change(&issuer, Side::Liability, &i("claim0"), 6);
    assert!(matches!(w.post(tx), Err(LedgerError::UnbalancedFinancialLegs { .. })));
    assert_eq!(w, before);
}

#[test]
fn empty_transaction_only_grows_the_journal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut w = random_world(&mut rng, 3, 1);
    let before = w.clone();
    w.post(Transaction::new("nothing")).unwrap();
    assert_eq!(w.journal().len(), before.journal().len() + 1);
    assert_eq!(w.without_journal(), before.without_journal());
}
