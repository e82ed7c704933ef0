//! Text balance sheets and CSV series.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use indexmap::{IndexMap, IndexSet};

use crate::amount::{Amount, Scale};
use crate::ledger::{AgentId, BalanceSheet, FlowCategory, InstrumentId, LiabilityClass, Sector, World};
use crate::scenario::{CheckStatus, RunReport, FINAL};

/// Rows of one side. With a world, rows follow instrument declaration order
/// and instruments sharing a category are merged into one row named after
/// the category.
fn rows(world: Option<&World>, side: &BTreeMap<InstrumentId, Amount>) -> Vec<(String, Amount)> {
    let Some(w) = world else {
        return side.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    };
    let order: IndexSet<&InstrumentId> = w.instruments().map(|i| &i.id).collect();
    let mut entries: Vec<(&InstrumentId, Amount)> = side.iter().map(|(k, v)| (k, *v)).collect();
    entries.sort_by_key(|(id, _)| order.get_index_of(id).unwrap_or(usize::MAX));
    let mut groups: IndexMap<String, Vec<(&InstrumentId, Amount)>> = IndexMap::new();
    for (id, v) in entries {
        let key = w.instrument(id).map_or_else(|| id.to_string(), |i| i.category().to_string());
        groups.entry(key).or_default().push((id, v));
    }
    groups
        .into_iter()
        .map(|(cat, members)| {
            let total = members.iter().map(|(_, v)| *v).sum();
            let name = match members.as_slice() {
                [(id, _)] => w.instrument(id).map_or_else(|| id.to_string(), |i| i.name.clone()),
                _ => cat.replace('_', " "),
            };
            (name, total)
        })
        .collect()
}

/// Two-column balance sheet: assets left, liabilities right, net worth as the
/// last liability-side row.
pub fn render_table(title: &str, sheet: &BalanceSheet, scale: Scale, world: Option<&World>) -> String {
    let left: Vec<(String, String)> = rows(world, &sheet.assets)
        .into_iter()
        .map(|(l, v)| (l, v.display_scaled(scale)))
        .collect();
    let mut right: Vec<(String, String)> = rows(world, &sheet.liabilities)
        .into_iter()
        .map(|(l, v)| (l, v.display_scaled(scale)))
        .collect();
    right.push(("net worth".to_string(), sheet.net_worth().display_scaled(scale)));

    let width = |xs: &[(String, String)], f: fn(&(String, String)) -> usize| xs.iter().map(f).max().unwrap_or(0);
    let (ll, lv) = (width(&left, |r| r.0.len()), width(&left, |r| r.1.len()));
    let (rl, rv) = (width(&right, |r| r.0.len()), width(&right, |r| r.1.len()));
    let head_l = format!("Assets {}", scale.header_unit());
    let head_r = format!("Liabilities {}", scale.header_unit());
    let left_w = (ll + 2 + lv).max(head_l.len());
    let right_w = (rl + 2 + rv).max(head_r.len());

    let mut out = String::new();
    if !title.is_empty() {
        out.push_str(title);
        out.push('\n');
    }
    out.push_str(&format!("{head_l:<left_w$} | {head_r}\n"));
    out.push_str(&format!("{}-+-{}\n", "-".repeat(left_w), "-".repeat(right_w)));
    for k in 0..left.len().max(right.len()) {
        let cell = |xs: &[(String, String)], lab: usize, w: usize| match xs.get(k) {
            Some((l, v)) => format!("{l:<lab$}{v:>pad$}", pad = w - lab),
            None => " ".repeat(w),
        };
        let line = format!("{} | {}", cell(&left, ll, left_w), cell(&right, rl, right_w));
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Table of one agent under its display name.
pub fn render_agent(world: &World, agent: &AgentId, scale: Scale, caption: &str) -> Option<String> {
    let a = world.agent(agent)?;
    let title = if caption.is_empty() {
        a.name.clone()
    } else {
        format!("{} ({caption})", a.name)
    };
    Some(render_table(&title, &a.sheet, scale, Some(world)))
}

/// Human-readable report: changed balance sheets at every snapshot, then the
/// expectation summary and flags.
pub fn render_report(report: &RunReport, scale_of: &dyn Fn(&AgentId) -> Scale) -> String {
    let mut out = format!("scenario {} (seed {})\n", report.scenario, report.seed);
    let mut states: Vec<(&str, u64, &World)> =
        report.snapshots.iter().map(|s| (s.label.as_str(), s.time, &s.world)).collect();
    let fin = &report.final_world;
    let moved = |w: &World| fin.agents().ne(w.agents());
    if states.last().is_none_or(|(_, _, w)| moved(w)) {
        states.push((FINAL, fin.clock(), fin));
    }
    let mut prev: Option<&World> = None;
    for (label, time, world) in states {
        out.push_str(&format!("\n== {label} (t = {time}) ==\n"));
        let mut shown = 0;
        for a in world.agents() {
            let changed = prev.is_none_or(|p| p.agent(&a.id).map(|x| &x.sheet) != Some(&a.sheet));
            if changed {
                out.push('\n');
                out.push_str(&render_table(&a.name, &a.sheet, scale_of(&a.id), Some(world)));
                shown += 1;
            }
        }
        if shown == 0 {
            out.push_str("no balance sheet changed\n");
        }
        prev = Some(world);
    }
    if !report.checks.is_empty() {
        let count = |s: CheckStatus| report.checks.iter().filter(|c| c.status == s).count();
        out.push_str(&format!(
            "\nchecked cells: {} match, {} mismatch, {} missing, {} documented misprints\n",
            count(CheckStatus::Match),
            count(CheckStatus::Mismatch),
            count(CheckStatus::Missing),
            count(CheckStatus::DocumentedTypo)
        ));
        for c in report.checks.iter().filter(|c| c.status != CheckStatus::Match) {
            out.push_str(&format!(
                "  {:?} at {}: {} {:?} {} expected {} got {}{}\n",
                c.status,
                c.checkpoint,
                c.agent,
                c.side,
                c.row,
                Amount(c.expected),
                c.actual.map_or("nothing".to_string(), |v| Amount(v).to_string()),
                c.note.as_ref().map_or(String::new(), |n| format!(" ({n})")),
            ));
        }
    }
    if !report.chains.is_empty() {
        out.push('\n');
        for ch in &report.chains {
            out.push_str(&format!(
                "chain at event {}: {} blocks, {} orphans, mean interval {:.1} s ({:.1} s after warm-up), supply {}\n",
                ch.event, ch.stats.blocks, ch.stats.orphans, ch.stats.mean_interval, ch.stats.mean_interval_after_warmup, ch.stats.supply
            ));
            for (m, w) in ch.miners.iter().zip(&ch.stats.wins) {
                out.push_str(&format!("  {m}: {w} blocks\n"));
            }
        }
    }
    if let Some(last) = report.sfc.last() {
        out.push_str(&format!(
            "\n{} simulated periods; last: output {}, consumption {}, debt ratio {:.4}\n",
            report.sfc.len(),
            Amount(last.output),
            Amount(last.consumption),
            last.debt_ratio
        ));
    }
    out.push_str(&format!("\nflags: {}\n", report.flags.len()));
    for f in &report.flags {
        out.push_str(&format!("  {}\n", serde_json::to_string(f).unwrap_or_default()));
    }
    out
}

fn writer(path: &Path) -> io::Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(fs::File::create(path)?))
}

fn f64_cell(x: f64) -> String {
    format!("{x}")
}

fn outstanding(world: &World, id: &InstrumentId) -> i64 {
    match world.instrument(id) {
        Some(inst) if inst.class == LiabilityClass::IssuedFinancial => world
            .agents()
            .map(|a| a.sheet.liabilities.get(id).map_or(0, |v| v.value()))
            .sum(),
        Some(_) => world.recorded_supply(id).value(),
        None => 0,
    }
}

/// Writes every series of `report` into `dir` and returns the paths written.
pub fn export_csv(report: &RunReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut open = |name: &str| -> io::Result<(PathBuf, csv::Writer<fs::File>)> {
        let p = dir.join(name);
        written.push(p.clone());
        Ok((p.clone(), writer(&p)?))
    };

    // net worth by sector and agent
    let mut agents: IndexSet<AgentId> = IndexSet::new();
    for s in &report.snapshots {
        agents.extend(s.world.agents().map(|a| a.id.clone()));
    }
    let (_, mut w) = open("net_worth.csv")?;
    let mut head = vec!["snapshot".to_string(), "time".to_string()];
    head.extend(Sector::ALL.iter().map(|s| format!("sector:{}", s.label())));
    head.extend(agents.iter().map(|a| format!("agent:{a}")));
    w.write_record(&head)?;
    for s in &report.snapshots {
        let mut rec = vec![s.label.clone(), s.time.to_string()];
        for sec in Sector::ALL {
            let nw: i64 = s.world.agents().filter(|a| a.sector() == sec).map(|a| a.net_worth().value()).sum();
            rec.push(nw.to_string());
        }
        for a in &agents {
            rec.push(s.world.agent(a).map_or(String::new(), |x| x.net_worth().value().to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    // outstanding quantity of every root instrument
    let mut roots: IndexSet<InstrumentId> = IndexSet::new();
    for s in &report.snapshots {
        roots.extend(s.world.instruments().filter(|i| i.underlying.is_none()).map(|i| i.id.clone()));
    }
    let (_, mut w) = open("outstanding.csv")?;
    let mut head = vec!["snapshot".to_string(), "time".to_string()];
    head.extend(roots.iter().map(|r| r.to_string()));
    w.write_record(&head)?;
    for s in &report.snapshots {
        let mut rec = vec![s.label.clone(), s.time.to_string()];
        rec.extend(roots.iter().map(|r| outstanding(&s.world, r).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    // backing of every instrument with a backing rule
    let mut backed: IndexSet<InstrumentId> = IndexSet::new();
    for s in &report.snapshots {
        backed.extend(s.backing.iter().filter_map(|b| b.instrument.clone()));
    }
    let (_, mut w) = open("backing.csv")?;
    let mut head = vec!["snapshot".to_string(), "time".to_string()];
    for b in &backed {
        for col in ["outstanding", "cover", "ratio", "satisfied"] {
            head.push(format!("{b}:{col}"));
        }
    }
    w.write_record(&head)?;
    for s in &report.snapshots {
        let mut rec = vec![s.label.clone(), s.time.to_string()];
        for b in &backed {
            match s.backing.iter().find(|x| x.instrument.as_ref() == Some(b)) {
                Some(st) => {
                    rec.push(st.outstanding.value().to_string());
                    rec.push(st.cover_value.value().to_string());
                    rec.push(st.ratio.map_or(String::new(), |r| f64_cell(r.to_f64())));
                    rec.push(st.satisfied.to_string());
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let (_, mut w) = open("chain.csv")?;
    w.write_record([
        "event",
        "miner",
        "wins",
        "blocks",
        "orphans",
        "mean_interval",
        "mean_interval_after_warmup",
        "supply",
    ])?;
    for ch in &report.chains {
        for (m, wins) in ch.miners.iter().zip(&ch.stats.wins) {
            w.write_record([
                ch.event.to_string(),
                m.clone(),
                wins.to_string(),
                ch.stats.blocks.to_string(),
                ch.stats.orphans.to_string(),
                f64_cell(ch.stats.mean_interval),
                f64_cell(ch.stats.mean_interval_after_warmup),
                ch.stats.supply.value().to_string(),
            ])?;
        }
    }
    w.flush()?;

    let (_, mut w) = open("sfc_series.csv")?;
    w.write_record([
        "step",
        "output",
        "consumption",
        "investment",
        "government",
        "exports",
        "imports",
        "wages",
        "taxes",
        "disposable_income",
        "debt",
        "debt_ratio",
        "sfc_flags",
        "narrow_outstanding",
        "narrow_cover",
    ])?;
    for r in &report.sfc {
        let (no, nc) = match &r.narrow {
            Some(st) => (st.outstanding.value().to_string(), st.cover_value.value().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.step.to_string(),
            r.output.to_string(),
            r.consumption.to_string(),
            r.investment.to_string(),
            r.government.to_string(),
            r.exports.to_string(),
            r.imports.to_string(),
            r.wages.to_string(),
            r.taxes.to_string(),
            r.disposable_income.to_string(),
            r.debt.to_string(),
            f64_cell(r.debt_ratio),
            r.sfc.flags.len().to_string(),
            no,
            nc,
        ])?;
    }
    w.flush()?;

    let sector_head = |first: &str| {
        let mut h = vec!["step".to_string(), first.to_string()];
        h.extend(Sector::ALL.iter().map(|s| s.label().to_string()));
        h.push("sum".to_string());
        h
    };

    let (_, mut w) = open("sfc_balance.csv")?;
    w.write_record(sector_head("row"))?;
    for r in &report.sfc {
        for row in &r.stocks.rows {
            let mut rec = vec![r.step.to_string(), row.label.clone()];
            rec.extend(row.cells.iter().map(|c| c.value().to_string()));
            rec.push(row.sum().value().to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    let (_, mut w) = open("sfc_flows.csv")?;
    w.write_record(sector_head("flow"))?;
    for r in &report.sfc {
        for flow in FlowCategory::ALL {
            let mut rec = vec![r.step.to_string(), flow.label().to_string()];
            rec.extend(Sector::ALL.iter().map(|s| r.flows.cell(flow, *s).value().to_string()));
            rec.push(r.flows.row_sum(flow).value().to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    Ok(written)
}
