//! Runs the same network through the result-returning and the
//! store-writing runtimes on in-process workers and compares them with the
//! serial raster.

use std::time::Duration;

use radiocov::engine::predict_serial;
use radiocov::runtime::{pair_audit, run_local, LocalOptions, RunMode};
use radiocov::synthetic::{hilly_scenario, NetworkSpec};
use radiocov::terrain::to_ascii_string;

fn main() -> radiocov::Result<()> {
    let scenario = hilly_scenario(&NetworkSpec::small(12));
    let serial = to_ascii_string(&predict_serial(&scenario)?);

    for mode in [RunMode::Mw, RunMode::Mwd] {
        let mut opts = LocalOptions::new(3, mode);
        opts.link_delay = Duration::from_millis(2);
        opts.persist_latency = Duration::from_millis(5);
        let run = run_local(&scenario, &opts)?;
        let same = to_ascii_string(&run.master.raster) == serial;
        let violations = pair_audit(&run.master.trace);
        println!(
            "{mode}: {:?} wall, assignments per worker {:?}, matches serial: {same}, protocol violations: {}",
            run.master.wall,
            run.master.assignments,
            violations.len()
        );
    }
    Ok(())
}
