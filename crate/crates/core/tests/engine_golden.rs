mod common;

use std::path::PathBuf;

use radiocov::engine::{aggregate, predict_serial, predict_transmitter, Scenario};
use radiocov::propagation::PropagationParams;
use radiocov::store::{scan_max, DirStore, ResultStore};
use radiocov::synthetic::{flat_scenario, NetworkSpec};
use radiocov::terrain::{load_ascii_grid, to_ascii_string};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn fixture() -> Scenario {
    Scenario::load(
        data("dem.asc"),
        data("clutter.asc"),
        data("clutter_losses.txt"),
        data("transmitters.csv"),
        data("diagrams"),
        PropagationParams::default(),
    )
    .unwrap()
}

#[test]
fn serial_matches_golden_raster() {
    let golden = std::fs::read_to_string(data("golden_coverage.asc")).unwrap();
    let raster = predict_serial(&fixture()).unwrap();
    assert_eq!(to_ascii_string(&raster), golden);
}

#[test]
fn golden_raster_matches_brute_force_reference() {
    let s = fixture();
    let golden = load_ascii_grid(data("golden_coverage.asc")).unwrap();
    let expected = common::oracle_coverage(&s);
    let mut covered = 0;
    for (i, (g, e)) in golden.values().iter().zip(&expected).enumerate() {
        match e {
            None => assert!(golden.is_nodata(*g), "cell {i}: {g} where nothing reaches"),
            Some(e) => {
                covered += 1;
                assert!((g - e).abs() < 2e-6, "cell {i}: golden {g} vs reference {e}");
            }
        }
    }
    assert!(covered > 500);
}

#[test]
fn transmitter_order_does_not_change_coverage() {
    let mut s = fixture();
    let base = predict_serial(&s).unwrap();
    s.transmitters.reverse();
    assert_eq!(predict_serial(&s).unwrap(), base);
    s.transmitters.rotate_left(1);
    assert_eq!(predict_serial(&s).unwrap(), base);
}

#[test]
fn sector_back_lobe_costs_front_to_back_ratio_on_flat_ground() {
    let mut s = flat_scenario(&NetworkSpec::small(1));
    let centre = s.extent().cell_center(30, 30);
    let tx = &mut s.transmitters[0];
    tx.position = centre;
    tx.diagram_id = "sector".into();
    tx.mount.azimuth_deg = 90.0;
    let tx = tx.clone();
    let field = predict_transmitter(
        &s.dem,
        &s.clutter,
        &tx,
        s.diagram("sector").unwrap(),
        &s.params,
        &s.clutter_losses,
    )
    .unwrap();
    let (tr, tc) = field.grid.header().cell_of(tx.position).unwrap();
    let front = field.loss(tr, tc + 6).unwrap();
    let back = field.loss(tr, tc - 6).unwrap();
    assert!((back - front - 25.0).abs() < 1e-9, "front {front} back {back}");
}

#[test]
fn store_scan_equals_in_memory_aggregation() {
    let s = fixture();
    let dir = tempfile::tempdir().unwrap();
    let store = DirStore::open(dir.path()).unwrap();
    let mut fields = Vec::new();
    for tx in &s.transmitters {
        let field = predict_transmitter(
            &s.dem,
            &s.clutter,
            tx,
            s.diagram(&tx.diagram_id).unwrap(),
            &s.params,
            &s.clutter_losses,
        )
        .unwrap();
        store.put_table(&tx.id, &field, s.extent()).unwrap();
        fields.push((tx.clone(), field));
    }
    let scanned = scan_max(&store, &s.transmitters, s.extent()).unwrap();
    assert_eq!(scanned, aggregate(&fields, s.extent()).unwrap());
    assert_eq!(scanned, predict_serial(&s).unwrap());
}
