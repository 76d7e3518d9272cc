//! Persists per-transmitter loss tables to a directory store and rebuilds
//! the coverage raster from them alone.

use radiocov::engine::{aggregate, predict_transmitter};
use radiocov::store::{scan_max, DirStore, ResultStore};
use radiocov::synthetic::{hilly_scenario, NetworkSpec};

fn main() -> radiocov::Result<()> {
    let scenario = hilly_scenario(&NetworkSpec::small(4));
    let dir = tempfile::tempdir().expect("temp dir");
    let store = DirStore::open(dir.path())?;

    let mut fields = Vec::new();
    for tx in &scenario.transmitters {
        let field = predict_transmitter(
            &scenario.dem,
            &scenario.clutter,
            tx,
            scenario.diagram(&tx.diagram_id)?,
            &scenario.params,
            &scenario.clutter_losses,
        )?;
        store.put_table(&tx.id, &field, scenario.extent())?;
        fields.push((tx.clone(), field));
    }
    for id in store.table_ids()? {
        println!("{id}: {} rows", store.read_table(&id)?.rows.len());
    }
    if let Err(e) = store.put_table(&fields[0].0.id, &fields[0].1, scenario.extent()) {
        println!("second write refused: {e}");
    }

    let scanned = scan_max(&store, &scenario.transmitters, scenario.extent())?;
    let direct = aggregate(&fields, scenario.extent())?;
    println!("scan matches in-memory aggregation: {}", scanned == direct);
    Ok(())
}
