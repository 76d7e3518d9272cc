//! Seeded synthetic networks for tests, examples and benchmarks.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::antenna::{diagram_to_string, AntennaDiagram, AntennaMount, DiagramSet};
use crate::engine::{transmitters_to_csv, Scenario, TransmitterConfig};
use crate::error::{Error, Result};
use crate::propagation::{ClutterLossTable, PropagationParams};
use crate::terrain::{write_ascii_grid, GridHeader, RasterGrid, DEFAULT_NODATA};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub nrows: usize,
    pub ncols: usize,
    pub cellsize: f64,
    pub transmitters: usize,
    pub radius_km: f64,
    pub seed: u64,
}

impl NetworkSpec {
    /// A 61×61 map at 25 m with a 300 m radius per transmitter.
    pub fn small(transmitters: usize) -> Self {
        Self {
            nrows: 61,
            ncols: 61,
            cellsize: 25.0,
            transmitters,
            radius_km: 0.3,
            seed: 7,
        }
    }

    fn header(&self) -> GridHeader {
        GridHeader {
            ncols: self.ncols,
            nrows: self.nrows,
            xll: 450_000.0,
            yll: 100_000.0,
            cellsize: self.cellsize,
            nodata: DEFAULT_NODATA,
        }
    }
}

/// Three-sector panel: 65° horizontal and 6.5° vertical half-power
/// beamwidths, 25 dB front-to-back, 17 dBi.
pub fn sector_diagram(name: &str) -> AntennaDiagram {
    let signed = |i: usize| if i <= 180 { i as f64 } else { i as f64 - 360.0 };
    let horizontal = (0..360)
        .map(|i| (12.0 * (signed(i) / 65.0).powi(2)).min(25.0))
        .collect();
    let vertical = (0..360)
        .map(|i| (12.0 * (signed(i) / 6.5).powi(2)).min(20.0))
        .collect();
    AntennaDiagram::new(name, 17.0, horizontal, vertical).expect("valid pattern")
}

pub fn default_diagrams() -> DiagramSet {
    let mut set = DiagramSet::new();
    set.insert("iso".into(), AntennaDiagram::isotropic("iso"));
    set.insert("sector".into(), sector_diagram("sector"));
    set
}

pub fn default_clutter_losses() -> ClutterLossTable {
    let mut t = ClutterLossTable::new();
    for (code, loss) in [(1, 0.0), (2, 3.0), (3, 6.5), (4, 10.0), (5, 14.0)] {
        t.insert(code, loss);
    }
    t
}

fn transmitters(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Vec<TransmitterConfig> {
    let h = spec.header();
    (0..spec.transmitters)
        .map(|i| {
            let (row, col) = if i == 0 {
                (spec.nrows / 2, spec.ncols / 2)
            } else {
                (rng.gen_range(0..spec.nrows), rng.gen_range(0..spec.ncols))
            };
            let position = h.cell_center(row, col);
            let (diagram_id, azimuth) = if i == 0 {
                ("iso", 0.0)
            } else {
                ("sector", (rng.gen_range(0..360) as f64))
            };
            TransmitterConfig {
                id: format!("tx{i:04}"),
                position,
                height_agl_m: rng.gen_range(20.0..45.0_f64).round(),
                power_dbm: rng.gen_range(40.0..46.0_f64).round(),
                frequency_mhz: 1843.0,
                radius_km: spec.radius_km,
                mount: AntennaMount {
                    azimuth_deg: azimuth,
                    mech_tilt_deg: rng.gen_range(0..4) as f64,
                    elec_tilt_deg: rng.gen_range(0..6) as f64,
                },
                diagram_id: diagram_id.into(),
            }
        })
        .collect()
}

fn scenario_with_dem(spec: &NetworkSpec, dem: RasterGrid, clutter: RasterGrid) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
    Scenario {
        dem,
        clutter,
        clutter_losses: default_clutter_losses(),
        transmitters: transmitters(spec, &mut rng),
        diagrams: default_diagrams(),
        params: PropagationParams {
            radius_m: spec.radius_km * 1000.0,
            ..PropagationParams::default()
        },
    }
}

/// Flat terrain at 300 m with open-land clutter everywhere.
pub fn flat_scenario(spec: &NetworkSpec) -> Scenario {
    let h = spec.header();
    let dem = RasterGrid::filled(h, 300.0).expect("valid header");
    let clutter = RasterGrid::filled(h, 1.0).expect("valid header");
    scenario_with_dem(spec, dem, clutter)
}

/// Rolling terrain built from random Gaussian hills, with blocky clutter.
pub fn hilly_scenario(spec: &NetworkSpec) -> Scenario {
    let h = spec.header();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = spec.ncols as f64 * spec.cellsize;
    let height = spec.nrows as f64 * spec.cellsize;
    let hills: Vec<(f64, f64, f64, f64)> = (0..(spec.nrows * spec.ncols / 400).clamp(3, 60))
        .map(|_| {
            (
                rng.gen_range(0.0..width),
                rng.gen_range(0.0..height),
                rng.gen_range(15.0..120.0),
                rng.gen_range(3.0..12.0) * spec.cellsize,
            )
        })
        .collect();
    let mut dem = Vec::with_capacity(h.cell_count());
    for r in 0..spec.nrows {
        for c in 0..spec.ncols {
            let x = (c as f64 + 0.5) * spec.cellsize;
            let y = (r as f64 + 0.5) * spec.cellsize;
            let z: f64 = hills
                .iter()
                .map(|(hx, hy, a, s)| a * (-((x - hx).powi(2) + (y - hy).powi(2)) / (2.0 * s * s)).exp())
                .sum();
            dem.push((300.0 + z).round());
        }
    }
    let block = 6;
    let codes: Vec<f64> = (0..((spec.nrows / block + 1) * (spec.ncols / block + 1)))
        .map(|_| rng.gen_range(1..=5) as f64)
        .collect();
    let stride = spec.ncols / block + 1;
    let clutter = (0..spec.nrows)
        .flat_map(|r| (0..spec.ncols).map(move |c| (r, c)))
        .map(|(r, c)| codes[(r / block) * stride + c / block])
        .collect();
    scenario_with_dem(
        spec,
        RasterGrid::new(h, dem).expect("shape"),
        RasterGrid::new(h, clutter).expect("shape"),
    )
}

/// File locations of a scenario written with [`write_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioFiles {
    pub dem: PathBuf,
    pub clutter: PathBuf,
    pub clutter_losses: PathBuf,
    pub transmitters: PathBuf,
    pub diagrams: PathBuf,
}

pub fn write_scenario(scenario: &Scenario, dir: impl AsRef<Path>) -> Result<ScenarioFiles> {
    let dir = dir.as_ref();
    let files = ScenarioFiles {
        dem: dir.join("dem.asc"),
        clutter: dir.join("clutter.asc"),
        clutter_losses: dir.join("clutter_losses.txt"),
        transmitters: dir.join("transmitters.csv"),
        diagrams: dir.join("diagrams"),
    };
    fs::create_dir_all(&files.diagrams).map_err(|e| Error::file(&files.diagrams, e))?;
    write_ascii_grid(&scenario.dem, &files.dem)?;
    write_ascii_grid(&scenario.clutter, &files.clutter)?;
    let mut table = String::from("# code loss_db\n");
    for (code, loss) in scenario.clutter_losses.iter() {
        table.push_str(&format!("{code} {loss}\n"));
    }
    fs::write(&files.clutter_losses, table).map_err(|e| Error::file(&files.clutter_losses, e))?;
    fs::write(&files.transmitters, transmitters_to_csv(&scenario.transmitters))
        .map_err(|e| Error::file(&files.transmitters, e))?;
    for d in scenario.diagrams.values() {
        let path = files.diagrams.join(format!("{}.msi", d.name));
        fs::write(&path, diagram_to_string(d)).map_err(|e| Error::file(&path, e))?;
    }
    Ok(files)
}
