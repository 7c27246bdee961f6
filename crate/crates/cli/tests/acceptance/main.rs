//! End-to-end acceptance checks. Each check prints one PASS or FAIL line;
//! the process exits non-zero if any fails.

mod determinism;
mod disasm;
mod effort;
mod fingerprint;
mod matters;
mod metrics;
mod ordering;
mod reach;
mod table;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::Value;

use depscope_cli::{run, Context};
use depscope_core::registry::DenyTransport;
use depscope_testkit::Layout;

pub const NOW: i64 = 1_700_000_000;

static LAST_PANIC: Mutex<String> = Mutex::new(String::new());

/// Runs the CLI in-process with networking denied.
pub fn depscope_at(now: i64, args: &[&str]) -> i32 {
    let deny = Arc::new(DenyTransport::new());
    let ctx = Context {
        transport: Some(deny.clone()),
        now,
    };
    let code = run(std::iter::once("depscope").chain(args.iter().copied()), &ctx);
    assert_eq!(deny.attempts(), 0, "network attempted by {args:?}");
    code
}

pub fn depscope(args: &[&str]) -> i32 {
    depscope_at(NOW, args)
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn fixture_flag(layout: &Layout) -> String {
    format!("fixture:{}", layout.registry.display())
}

pub fn read_json(p: PathBuf) -> Value {
    let text = fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    serde_json::from_str(&text).unwrap()
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

struct Check {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> String,
}

fn main() {
    let checks = [
        Check {
            name: "metric oracle equivalence",
            budget: Some(Duration::from_secs(60)),
            run: metrics::check,
        },
        Check {
            name: "version ordering and classification",
            budget: None,
            run: ordering::check,
        },
        Check {
            name: "reachability soundness",
            budget: Some(Duration::from_secs(30)),
            run: reach::check,
        },
        Check {
            name: "effort skip rule and diff partition",
            budget: None,
            run: effort::check,
        },
        Check {
            name: "alert table row",
            budget: None,
            run: table::check,
        },
        Check {
            name: "update relevance agreement",
            budget: None,
            run: matters::check,
        },
        Check {
            name: "determinism and offline runs",
            budget: None,
            run: determinism::check,
        },
        Check {
            name: "fingerprint stability",
            budget: None,
            run: fingerprint::check,
        },
    ];

    panic::set_hook(Box::new(|info| *LAST_PANIC.lock().unwrap() = info.to_string()));
    let mut failed = 0;
    for (i, c) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run));
        let took = start.elapsed();
        let verdict = match result {
            Ok(_) if c.budget.is_some_and(|b| took > b) => {
                Err(format!("took {took:.1?}, budget {:?}", c.budget.unwrap()))
            }
            Ok(detail) => Ok(detail),
            Err(_) => Err(LAST_PANIC.lock().unwrap().replace('\n', " ")),
        };
        match verdict {
            Ok(detail) => println!("PASS {} {} ({detail}; {took:.2?})", i + 1, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {}: {why}", i + 1, c.name);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
