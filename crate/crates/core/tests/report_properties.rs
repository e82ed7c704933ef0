use coinsfc::report::export_csv;
use coinsfc::scenario::{builtin, builtin_source, parse_scenario, run_scenario, RunOptions, BUILTIN};
use proptest::prelude::*;
use std::path::Path;

fn column(path: &Path, name: &str) -> Vec<i64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn export(name: &str, seed: Option<u64>) -> Vec<(String, Vec<u8>)> {
    let s = builtin(name).unwrap();
    let report = run_scenario(&s, &RunOptions { seed, check_invariants: true }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = export_csv(&report, dir.path()).unwrap();
    paths
        .iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
        .collect()
}

#[test]
fn one_row_per_snapshot() {
    let s = builtin("tables-all").unwrap();
    let report = run_scenario(&s, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_csv(&report, dir.path()).unwrap();
    let rows = column(&dir.path().join("net_worth.csv"), "time");
    assert_eq!(rows.len(), report.snapshots.len());
    assert_eq!(rows, report.snapshots.iter().map(|s| s.time as i64).collect::<Vec<_>>());
}

#[test]
fn mined_coin_supply_only_grows_at_mining() {
    let s = builtin("tables-all").unwrap();
    let report = run_scenario(&s, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_csv(&report, dir.path()).unwrap();
    let btc = column(&dir.path().join("outstanding.csv"), "bitcoin");
    assert_eq!(btc[1] - btc[0], 10_000);
    assert!(btc[1..].windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn every_builtin_exports_identically_twice() {
    for (name, _) in BUILTIN {
        assert_eq!(export(name, None), export(name, None), "{name}");
    }
}

#[test]
fn seed_override_changes_stochastic_output() {
    assert_ne!(export("chain-demo", Some(1)), export("chain-demo", Some(2)));
}

#[test]
fn csv_lines_end_in_bare_newlines() {
    for (file, bytes) in export("sfc-demo", None) {
        assert!(!bytes.contains(&b'\r'), "{file}");
        assert!(bytes.ends_with(b"\n"), "{file}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rerun_with_any_seed_is_byte_identical(seed in any::<u64>()) {
        prop_assert_eq!(export("sfc-demo", Some(seed)), export("sfc-demo", Some(seed)));
    }

    #[test]
    fn checkpoint_count_sets_row_count(k in 0usize..6) {
        let mut doc: serde_json::Value = serde_json::from_str(builtin_source("table1").unwrap()).unwrap();
        let events = doc["events"].as_array_mut().unwrap();
        for n in 0..k {
            events.push(serde_json::json!({"time": 2 + n, "op": "checkpoint", "args": {"name": format!("c{n}")}}));
        }
        let s = parse_scenario(&doc.to_string()).unwrap();
        let report = run_scenario(&s, &RunOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_csv(&report, dir.path()).unwrap();
        prop_assert_eq!(column(&dir.path().join("net_worth.csv"), "time").len(), report.snapshots.len());
        prop_assert_eq!(report.snapshots.len(), 1 + k);
    }
}
