use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use coinsfc::report::{export_csv, render_report};
use coinsfc::scenario::{builtin_source, parse_scenario, run_scenario, RunOptions, Scenario, BUILTIN};
use coinsfc::Scale;

const OK: u8 = 0;
const OP_ERROR: u8 = 1;
const PARSE_ERROR: u8 = 2;
const FLAGGED: u8 = 3;

#[derive(Parser)]
#[command(name = "coinsfc", version, about = "Balance-sheet scenarios for monetary systems with cryptocurrencies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    Table,
    Csv,
}

#[derive(clap::Args, Clone)]
struct Output {
    /// Report format.
    #[arg(long, value_enum, default_value = "table")]
    report: ReportKind,
    /// Directory for CSV output. Each scenario gets a subdirectory when more
    /// than one is run.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Display divisor for tables (1 or 1000); overrides the scenario.
    #[arg(long, value_parser = parse_scale)]
    scale: Option<Scale>,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files (or built-in scenario names).
    Run {
        #[arg(required = true)]
        files: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Check consistency, backing and stock-flow invariants after every event.
        #[arg(long)]
        check_invariants: bool,
        #[command(flatten)]
        output: Output,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Replay a built-in balance-sheet scenario with all invariant checks.
    Replay {
        name: String,
        #[command(flatten)]
        output: Output,
    },
    /// Parse a scenario and check its opening state without running it.
    Verify { file: String },
}

fn parse_scale(s: &str) -> Result<Scale, String> {
    match s {
        "1" => Ok(Scale::Units),
        "1000" => Ok(Scale::Thousands),
        _ => Err(format!("scale must be 1 or 1000, got {s}")),
    }
}

struct Outcome {
    text: String,
    code: u8,
}

fn load(file: &str) -> Result<Scenario, Outcome> {
    let path = Path::new(file);
    let text = if path.exists() {
        std::fs::read_to_string(path).map_err(|e| Outcome {
            text: format!("{file}: {e}\n"),
            code: PARSE_ERROR,
        })?
    } else if let Some(src) = builtin_source(file) {
        src.to_string()
    } else {
        return Err(Outcome {
            text: format!("{file}: no such file or built-in scenario\n"),
            code: PARSE_ERROR,
        });
    };
    parse_scenario(&text).map_err(|e| Outcome {
        text: format!("{file}: {e}\n"),
        code: PARSE_ERROR,
    })
}

fn execute(file: &str, options: &RunOptions, output: &Output, out_dir: &Path) -> Outcome {
    let scenario = match load(file) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let report = match run_scenario(&scenario, options) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                text: format!("{file}: {e}\n"),
                code: OP_ERROR,
            }
        }
    };
    let text = match output.report {
        ReportKind::Table => {
            let scale_of = |a: &coinsfc::AgentId| output.scale.unwrap_or_else(|| scenario.scale_of(a));
            render_report(&report, &scale_of)
        }
        ReportKind::Csv => match export_csv(&report, out_dir).with_context(|| format!("writing {}", out_dir.display())) {
            Ok(paths) => {
                let mut t = String::new();
                for p in paths {
                    t.push_str(&format!("wrote {}\n", p.display()));
                }
                t.push_str(&format!("flags: {}\n", report.flags.len()));
                t
            }
            Err(e) => {
                return Outcome {
                    text: format!("{file}: {e:#}\n"),
                    code: OP_ERROR,
                }
            }
        },
    };
    let code = if report.is_clean() { OK } else { FLAGGED };
    Outcome { text, code }
}

/// Parse errors outrank operation errors, which outrank flags.
fn combine(codes: impl Iterator<Item = u8>) -> u8 {
    let rank = |c: u8| match c {
        PARSE_ERROR => 3,
        OP_ERROR => 2,
        FLAGGED => 1,
        _ => 0,
    };
    codes.max_by_key(|c| rank(*c)).unwrap_or(OK)
}

fn dir_name(file: &str) -> String {
    Path::new(file)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| file.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(OP_ERROR)
        }
    }
}

fn real_main(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run {
            files,
            seed,
            check_invariants,
            output,
            jobs,
        } => {
            if jobs == 0 {
                bail!("--jobs must be at least 1");
            }
            let options = RunOptions { seed, check_invariants };
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
            let many = files.len() > 1;
            let outcomes: Vec<Outcome> = pool.install(|| {
                files
                    .par_iter()
                    .map(|f| {
                        let dir = if many { output.out.join(dir_name(f)) } else { output.out.clone() };
                        execute(f, &options, &output, &dir)
                    })
                    .collect()
            });
            Ok(report_all(&outcomes))
        }
        Command::Replay { name, output } => {
            if builtin_source(&name).is_none() {
                let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
                eprintln!("unknown built-in scenario `{name}`; available: {}", names.join(", "));
                return Ok(PARSE_ERROR);
            }
            let options = RunOptions {
                seed: None,
                check_invariants: true,
            };
            let outcome = execute(&name, &options, &output, &output.out);
            Ok(report_all(&[outcome]))
        }
        Command::Verify { file } => match load(&file) {
            Ok(s) => {
                println!(
                    "{}: ok ({} agents, {} instruments, {} events)",
                    s.name(),
                    s.initial.agents().count(),
                    s.initial.instruments().count(),
                    s.operations.len()
                );
                Ok(OK)
            }
            Err(o) => {
                eprint!("{}", o.text);
                Ok(o.code)
            }
        },
    }
}

fn report_all(outcomes: &[Outcome]) -> u8 {
    for o in outcomes {
        if o.code == OK || o.code == FLAGGED {
            print!("{}", o.text);
        } else {
            eprint!("{}", o.text);
        }
    }
    combine(outcomes.iter().map(|o| o.code))
}
