//! Draws which cells of a hilly sub-grid can see the transmitter antenna.

use radiocov::engine::Scenario;
use radiocov::propagation::line_of_sight;
use radiocov::synthetic::{hilly_scenario, NetworkSpec};

fn main() -> radiocov::Result<()> {
    let spec = NetworkSpec {
        radius_km: 0.5,
        ..NetworkSpec::small(1)
    };
    let scenario: Scenario = hilly_scenario(&spec);
    let tx = &scenario.transmitters[0];
    let (dem, _) = scenario.cut(tx)?;
    let tx_cell = dem.grid.header().cell_of(tx.position).expect("inside");
    let mask = line_of_sight(
        &dem,
        tx_cell,
        tx.height_agl_m,
        scenario.params.rx_height_m,
        tx.frequency_mhz,
        scenario.params.fresnel_clearance,
    )?;

    let mut shadowed = 0;
    for r in 0..mask.nrows() {
        let line: String = (0..mask.ncols())
            .map(|c| {
                if (r, c) == tx_cell {
                    'T'
                } else if mask.is_los(r, c) {
                    '.'
                } else {
                    shadowed += 1;
                    '#'
                }
            })
            .collect();
        println!("{line}");
    }
    println!(
        "{shadowed} of {} cells shadowed from `{}` at {:.0} m above ground",
        mask.nrows() * mask.ncols() - 1,
        tx.id,
        tx.height_agl_m
    );
    Ok(())
}
