//! Writes a synthetic network to disk, loads it back and predicts the
//! best-server coverage on one thread.

use std::time::Instant;

use radiocov::engine::{predict_serial, Scenario};
use radiocov::synthetic::{hilly_scenario, write_scenario, NetworkSpec};
use radiocov::terrain::write_ascii_grid;

fn main() -> radiocov::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let generated = hilly_scenario(&NetworkSpec::small(6));
    let files = write_scenario(&generated, dir.path())?;

    let scenario = Scenario::load(
        &files.dem,
        &files.clutter,
        &files.clutter_losses,
        &files.transmitters,
        &files.diagrams,
        generated.params,
    )?;
    let start = Instant::now();
    let coverage = predict_serial(&scenario)?;
    let elapsed = start.elapsed();

    let covered: Vec<f64> = coverage
        .values()
        .iter()
        .copied()
        .filter(|v| !coverage.is_nodata(*v))
        .collect();
    let best = covered.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = covered.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "{} transmitters, {} of {} cells covered, {worst:.1}..{best:.1} dBm in {elapsed:?}",
        scenario.transmitters.len(),
        covered.len(),
        coverage.header().cell_count()
    );
    let out = dir.path().join("coverage.asc");
    write_ascii_grid(&coverage, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
