use std::time::{SystemTime, UNIX_EPOCH};

use depscope_cli::{run, Context};

fn main() {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    let ctx = Context { transport: None, now };
    std::process::exit(run(std::env::args_os(), &ctx));
}
