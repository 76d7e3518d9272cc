//! Loss budget of a single receiver cell at a few distances, with a clear
//! path and with a growing number of ridges cutting the direct ray.

use radiocov::propagation::{
    cell_path_loss, free_space_loss, knife_edge_loss, los_loss, rooftop_to_street_loss,
    PropagationParams,
};

fn main() -> radiocov::Result<()> {
    let f = 1800.0;
    let params = PropagationParams::default();
    let rts = rooftop_to_street_loss(f, &params)?;
    let edge = knife_edge_loss(1.5);
    println!("rooftop-to-street at {f} MHz: {rts:.2} dB, one edge at nu=1.5: {edge:.2} dB");
    print!("{:>6} {:>8} {:>8} {:>9}", "d_km", "L0", "LOS", "clear");
    for edges in [1, 4, 8] {
        print!(" {:>9}", format!("{edges} edges"));
    }
    println!();
    for d in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0] {
        let l0 = free_space_loss(d, f)?;
        let los = los_loss(d, f)?;
        print!("{d:>6.2} {l0:>8.2} {los:>8.2} {:>9.2}", cell_path_loss(d, f, 6.0, None)?);
        for edges in [1, 4, 8] {
            let nlos = rts + edges as f64 * edge;
            print!(" {:>9.2}", cell_path_loss(d, f, 6.0, Some(nlos))?);
        }
        println!();
    }
    Ok(())
}
