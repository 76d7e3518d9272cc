//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use radiocov::antenna::AntennaDiagram;
use radiocov::engine::{Scenario, TransmitterConfig};
use radiocov::propagation::{ClutterLossTable, PropagationParams};
use radiocov::terrain::{RasterGrid, SubGrid};

pub const SPEED_OF_LIGHT_MM_PER_US: f64 = 299.792458;

/// Cells whose interior the segment between two cell centers passes
/// through, found by sampling densely and at every interval between
/// consecutive grid-line crossings. Endpoint cells are excluded.
pub fn traversed_cells(from: (usize, usize), to: (usize, usize)) -> BTreeSet<(usize, usize)> {
    let (ax, ay) = (from.1 as f64 + 0.5, from.0 as f64 + 0.5);
    let (bx, by) = (to.1 as f64 + 0.5, to.0 as f64 + 0.5);
    let (dx, dy) = (bx - ax, by - ay);
    let mut params = vec![0.0, 1.0];
    for (a, d) in [(ax, dx), (ay, dy)] {
        if d != 0.0 {
            let (lo, hi) = if d > 0.0 { (a, a + d) } else { (a + d, a) };
            let mut k = lo.ceil();
            while k <= hi {
                params.push((k - a) / d);
                k += 1.0;
            }
        }
    }
    params.sort_by(f64::total_cmp);
    let mut samples: Vec<f64> = params.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let steps = ((dx.abs().max(dy.abs())) * 10.0).ceil() as usize;
    samples.extend((1..steps).map(|j| j as f64 / steps as f64));

    let mut cells = BTreeSet::new();
    for s in samples {
        let (x, y) = (ax + s * dx, ay + s * dy);
        if x.fract() == 0.0 || y.fract() == 0.0 {
            continue;
        }
        let cell = (y.floor() as usize, x.floor() as usize);
        if cell != from && cell != to {
            cells.insert(cell);
        }
    }
    cells
}

/// A terrain cell crossed by the direct ray, with its position along it.
#[derive(Debug, Clone, Copy)]
pub struct Crossing {
    pub cell: (usize, usize),
    pub d1_m: f64,
    pub d2_m: f64,
    pub sight_m: f64,
    pub elevation_m: f64,
}

/// Terrain cells intruding into the first Fresnel zone (scaled by
/// `clearance`) of the ray from antenna tip to receiver point.
#[allow(clippy::too_many_arguments)]
pub fn oracle_obstacles(
    dem: &RasterGrid,
    tx: (usize, usize),
    target: (usize, usize),
    tx_height: f64,
    rx_height: f64,
    f_mhz: f64,
    clearance: f64,
) -> Vec<Crossing> {
    let cs = dem.header().cellsize;
    let z_tx = dem.get(tx.0, tx.1) + tx_height;
    let z_rx = dem.get(target.0, target.1) + rx_height;
    let (vx, vy) = (
        target.1 as f64 - tx.1 as f64,
        target.0 as f64 - tx.0 as f64,
    );
    let len_cells2 = vx * vx + vy * vy;
    let length = len_cells2.sqrt() * cs;
    let lambda = SPEED_OF_LIGHT_MM_PER_US / f_mhz;
    let mut out = Vec::new();
    for cell in traversed_cells(tx, target) {
        let elevation = dem.get(cell.0, cell.1);
        if dem.is_nodata(elevation) {
            continue;
        }
        let (px, py) = (cell.1 as f64 - tx.1 as f64, cell.0 as f64 - tx.0 as f64);
        let t = ((px * vx + py * vy) / len_cells2).clamp(0.0, 1.0);
        let d1 = t * length;
        let d2 = length - d1;
        let r1 = (lambda * d1 * d2 / length).sqrt();
        let sight = z_tx + t * (z_rx - z_tx);
        if elevation > sight - clearance * r1 {
            out.push(Crossing {
                cell,
                d1_m: d1,
                d2_m: d2,
                sight_m: sight,
                elevation_m: elevation,
            });
        }
    }
    out
}

fn log10(x: f64) -> f64 {
    x.ln() / std::f64::consts::LN_10
}

pub fn knife_edge(nu: f64) -> f64 {
    if nu <= -0.7 {
        0.0
    } else {
        6.9 + 20.0 * log10(((nu - 0.1).powi(2) + 1.0).sqrt() + nu - 0.1)
    }
}

/// Bilinear-in-angle lookup into a 360-sample pattern.
pub fn pattern_lookup(samples: &[f64], angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a < 0.0 {
        a += 360.0;
    }
    let i = a.floor();
    let w = a - i;
    let i = i as usize % 360;
    samples[i] * (1.0 - w) + samples[(i + 1) % 360] * w
}

/// Per-cell reference loss for one transmitter over a sub-grid, `None`
/// outside the radius or on nodata.
pub fn oracle_loss_grid(
    dem: &SubGrid,
    clutter: &SubGrid,
    tx: &TransmitterConfig,
    diagram: &AntennaDiagram,
    params: &PropagationParams,
    table: &ClutterLossTable,
) -> Vec<Vec<Option<f64>>> {
    let g = &dem.grid;
    let h = g.header();
    let cs = h.cellsize;
    let tx_col = ((tx.position.easting - h.xll) / cs).floor() as usize;
    let tx_row = h.nrows - 1 - ((tx.position.northing - h.yll) / cs).floor() as usize;
    let f = tx.frequency_mhz;
    let z_tx = g.get(tx_row, tx_col) + tx.height_agl_m;
    let radius = tx.radius_km * 1000.0;

    let l_ori = 4.0 - 0.114 * (90.0 - 55.0);
    let rts = -16.9 - 10.0 * log10(params.street_width_m) + 10.0 * log10(f)
        + 20.0 * log10(params.roof_height_m - params.rx_height_m)
        + l_ori;
    let lambda = SPEED_OF_LIGHT_MM_PER_US / f;

    let mut rows = Vec::new();
    for r in 0..g.nrows() {
        let mut row = Vec::new();
        for c in 0..g.ncols() {
            let ground = g.get(r, c);
            let de = (c as f64 - tx_col as f64) * cs;
            let dn = (tx_row as f64 - r as f64) * cs;
            let horizontal = (de * de + dn * dn).sqrt();
            if g.is_nodata(ground) || horizontal > radius {
                row.push(None);
                continue;
            }
            let z_rx = ground + params.rx_height_m;
            let d_km = (horizontal * horizontal + (z_tx - z_rx).powi(2)).sqrt().max(1.0) / 1000.0;
            let l0 = 32.45 + 20.0 * log10(d_km) + 20.0 * log10(f);
            let los = 42.64 + 26.0 * log10(d_km) + 20.0 * log10(f);

            let branch = if (r, c) == (tx_row, tx_col) {
                los
            } else {
                let obstacles = oracle_obstacles(
                    g,
                    (tx_row, tx_col),
                    (r, c),
                    tx.height_agl_m,
                    params.rx_height_m,
                    f,
                    params.fresnel_clearance,
                );
                if obstacles.is_empty() {
                    los
                } else {
                    let msd: f64 = obstacles
                        .iter()
                        .map(|o| {
                            let h = o.elevation_m - o.sight_m;
                            let nu = h * (2.0 * (o.d1_m + o.d2_m) / (lambda * o.d1_m * o.d2_m)).sqrt();
                            knife_edge(nu)
                        })
                        .sum();
                    let nlos = (rts + msd).max(0.0);
                    if nlos > los {
                        nlos
                    } else {
                        los
                    }
                }
            };

            let code = clutter.grid.get(r, c);
            let clut = if clutter.grid.is_nodata(code) {
                0.0
            } else {
                table.get(code.round() as i64).unwrap_or(0.0)
            };
            let isotropic = l0 + clut + branch;

            let bearing = if horizontal == 0.0 {
                tx.mount.azimuth_deg
            } else {
                de.atan2(dn).to_degrees()
            };
            let depression = (z_tx - z_rx).atan2(horizontal).to_degrees();
            let att = pattern_lookup(&diagram.horizontal, bearing - tx.mount.azimuth_deg)
                + pattern_lookup(
                    &diagram.vertical,
                    depression - tx.mount.mech_tilt_deg - tx.mount.elec_tilt_deg,
                );
            row.push(Some(isotropic - diagram.gain_dbi + att));
        }
        rows.push(row);
    }
    rows
}

/// Best-server power per master cell by exhaustive scan over every
/// (cell, transmitter) pair, from oracle loss grids rounded to 6 decimals.
pub fn oracle_coverage(s: &Scenario) -> Vec<Option<f64>> {
    let h = s.extent();
    let mut best: Vec<Option<f64>> = vec![None; h.cell_count()];
    for tx in &s.transmitters {
        let (dem, clutter) = s.cut(tx).unwrap();
        let diagram = s.diagram(&tx.diagram_id).unwrap();
        let grid = oracle_loss_grid(&dem, &clutter, tx, diagram, &s.params, &s.clutter_losses);
        for (r, row) in grid.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if let Some(loss) = v {
                    let loss: f64 = format!("{loss:.6}").parse().unwrap();
                    let p = tx.power_dbm - loss;
                    let i = (dem.offset.0 + r) * h.ncols + dem.offset.1 + c;
                    best[i] = Some(best[i].map_or(p, |b: f64| b.max(p)));
                }
            }
        }
    }
    best
}
