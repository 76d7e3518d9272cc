//! A small speedup sweep over worker counts with an injected master
//! bottleneck, printed as the bench report table.

use std::time::Duration;

use radiocov::bench::{scaling_sweep, SweepConfig};
use radiocov::synthetic::{hilly_scenario, NetworkSpec};

fn main() -> radiocov::Result<()> {
    let scenario = hilly_scenario(&NetworkSpec::small(16));
    let mut cfg = SweepConfig::new(vec![1, 2, 4], 2);
    cfg.master_delay = Duration::from_millis(10);
    cfg.persist_latency = Duration::from_millis(10);
    let (report, records) = scaling_sweep(&scenario, &cfg)?;
    println!("{} runs", records.len());
    print!("{}", report.to_tsv());
    Ok(())
}
