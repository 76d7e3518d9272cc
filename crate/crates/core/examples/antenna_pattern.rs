//! Round-trips a sector panel through the MSI text format and samples its
//! attenuation around the beam.

use radiocov::antenna::{diagram_to_string, parse_diagram};
use radiocov::synthetic::sector_diagram;

fn main() -> radiocov::Result<()> {
    let panel = sector_diagram("panel65");
    let text = diagram_to_string(&panel);
    println!("{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    let parsed = parse_diagram(&text)?;
    assert_eq!(parsed, panel);

    println!("gain {} dBi", parsed.gain_dbi);
    for h in [0.0, 15.0, 32.5, 60.0, 90.0, 180.0, 270.0, 327.5] {
        println!("  H {h:>6.1} deg -> {:>6.2} dB", parsed.horizontal_attenuation(h));
    }
    for v in [0.0, 3.25, 6.5, 10.0, 356.75] {
        println!("  V {v:>6.2} deg -> {:>6.2} dB", parsed.vertical_attenuation(v));
    }
    Ok(())
}
