//! The serial prediction pipeline and best-server aggregation.
//!
//! Per transmitter: cut the terrain and clutter around it, compute
//! visibility, compute the isotropic path loss, then apply the antenna
//! diagram. The coverage raster holds, per cell, the strongest received
//! power over all transmitters.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::antenna::{apply_antenna, load_diagram_dir, AntennaDiagram, AntennaMount, DiagramSet};
use crate::error::{Error, Result};
use crate::propagation::{
    check_frequency, line_of_sight, path_loss_field, ClutterLossTable, PathLossField,
    PropagationParams,
};
use crate::terrain::{
    ensure_aligned, extract_subgrid, load_ascii_grid, GeoPoint, GridHeader, RasterGrid, SubGrid,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterConfig {
    pub id: String,
    pub position: GeoPoint,
    pub height_agl_m: f64,
    pub power_dbm: f64,
    pub frequency_mhz: f64,
    pub radius_km: f64,
    pub mount: AntennaMount,
    pub diagram_id: String,
}

impl TransmitterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['/', '\\', '\t', '\n']) {
            return Err(Error::domain(format!("invalid transmitter id `{}`", self.id)));
        }
        if !(self.radius_km > 0.0 && self.radius_km.is_finite()) {
            return Err(Error::domain(format!(
                "transmitter `{}`: radius must be positive",
                self.id
            )));
        }
        if !(self.height_agl_m >= 0.0) || !self.power_dbm.is_finite() {
            return Err(Error::domain(format!(
                "transmitter `{}`: invalid height or power",
                self.id
            )));
        }
        check_frequency(self.frequency_mhz)
            .map_err(|e| Error::domain(format!("transmitter `{}`: {e}", self.id)))?;
        self.mount.validate()
    }
}

#[derive(Debug, Deserialize)]
struct TransmitterRow {
    id: String,
    easting: f64,
    northing: f64,
    height_agl_m: f64,
    power_dbm: f64,
    frequency_mhz: Option<f64>,
    radius_km: Option<f64>,
    azimuth_deg: f64,
    mech_tilt_deg: f64,
    elec_tilt_deg: f64,
    diagram_id: String,
}

pub const TRANSMITTER_CSV_HEADER: &str = "id,easting,northing,height_agl_m,power_dbm,frequency_mhz,radius_km,azimuth_deg,mech_tilt_deg,elec_tilt_deg,diagram_id";

/// Parses the transmitter CSV. Empty `frequency_mhz` / `radius_km` fields
/// take the defaults from `params`.
pub fn parse_transmitters(text: &str, params: &PropagationParams) -> Result<Vec<TransmitterConfig>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<TransmitterRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(format!("transmitter row {}: {e}", i + 1)))?;
        out.push(TransmitterConfig {
            id: row.id,
            position: GeoPoint::new(row.easting, row.northing),
            height_agl_m: row.height_agl_m,
            power_dbm: row.power_dbm,
            frequency_mhz: row.frequency_mhz.unwrap_or(params.frequency_mhz),
            radius_km: row.radius_km.unwrap_or(params.radius_m / 1000.0),
            mount: AntennaMount {
                azimuth_deg: row.azimuth_deg,
                mech_tilt_deg: row.mech_tilt_deg,
                elec_tilt_deg: row.elec_tilt_deg,
            },
            diagram_id: row.diagram_id,
        });
    }
    Ok(out)
}

pub fn load_transmitters(
    path: impl AsRef<Path>,
    params: &PropagationParams,
) -> Result<Vec<TransmitterConfig>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_transmitters(&text, params)
}

pub fn transmitters_to_csv(txs: &[TransmitterConfig]) -> String {
    let mut out = String::from(TRANSMITTER_CSV_HEADER);
    out.push('\n');
    for t in txs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            t.id,
            t.position.easting,
            t.position.northing,
            t.height_agl_m,
            t.power_dbm,
            t.frequency_mhz,
            t.radius_km,
            t.mount.azimuth_deg,
            t.mount.mech_tilt_deg,
            t.mount.elec_tilt_deg,
            t.diagram_id
        );
    }
    out
}

/// Everything a prediction run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dem: RasterGrid,
    pub clutter: RasterGrid,
    pub clutter_losses: ClutterLossTable,
    pub transmitters: Vec<TransmitterConfig>,
    pub diagrams: DiagramSet,
    pub params: PropagationParams,
}

impl Scenario {
    pub fn load(
        dem: impl AsRef<Path>,
        clutter: impl AsRef<Path>,
        clutter_losses: impl AsRef<Path>,
        transmitters: impl AsRef<Path>,
        diagram_dir: impl AsRef<Path>,
        params: PropagationParams,
    ) -> Result<Self> {
        let scenario = Scenario {
            dem: load_ascii_grid(dem)?,
            clutter: load_ascii_grid(clutter)?,
            clutter_losses: ClutterLossTable::load(clutter_losses)?,
            transmitters: load_transmitters(transmitters, &params)?,
            diagrams: load_diagram_dir(diagram_dir)?,
            params,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn extent(&self) -> &GridHeader {
        self.dem.header()
    }

    /// Checks raster alignment, parameter ranges, and that every
    /// transmitter is inside the map, has a unique id, and names a known
    /// diagram.
    pub fn validate(&self) -> Result<()> {
        ensure_aligned(&self.dem, &self.clutter)?;
        self.params.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for tx in &self.transmitters {
            tx.validate()?;
            if !seen.insert(tx.id.as_str()) {
                return Err(Error::domain(format!("duplicate transmitter id `{}`", tx.id)));
            }
            let Some(cell) = self.extent().cell_of(tx.position) else {
                return Err(Error::domain(format!(
                    "transmitter `{}` lies outside the map",
                    tx.id
                )));
            };
            if self.dem.is_nodata(self.dem.get(cell.0, cell.1)) {
                return Err(Error::domain(format!(
                    "transmitter `{}` sits on a cell without terrain data",
                    tx.id
                )));
            }
            self.diagram(&tx.diagram_id)?;
        }
        Ok(())
    }

    pub fn diagram(&self, id: &str) -> Result<&AntennaDiagram> {
        self.diagrams
            .get(id)
            .ok_or_else(|| Error::domain(format!("unknown antenna diagram `{id}`")))
    }

    /// Terrain and clutter windows for one transmitter.
    pub fn cut(&self, tx: &TransmitterConfig) -> Result<(SubGrid, SubGrid)> {
        let radius_m = tx.radius_km * 1000.0;
        let dem = extract_subgrid(&self.dem, tx.position, radius_m)?;
        let clutter = extract_subgrid(&self.clutter, tx.position, radius_m)?;
        Ok((dem, clutter))
    }

    pub fn power_of(&self, tx_id: &str) -> Option<f64> {
        self.transmitters
            .iter()
            .find(|t| t.id == tx_id)
            .map(|t| t.power_dbm)
    }
}

/// Path-loss prediction from pre-cut terrain and clutter windows. This is
/// all a worker needs.
pub fn predict_on_subgrids(
    dem: &SubGrid,
    clutter: &SubGrid,
    tx: &TransmitterConfig,
    diagram: &AntennaDiagram,
    params: &PropagationParams,
    clutter_losses: &ClutterLossTable,
) -> Result<PathLossField> {
    let tx_cell = dem.grid.header().cell_of(tx.position).ok_or_else(|| {
        Error::domain(format!("transmitter `{}` lies outside its sub-grid", tx.id))
    })?;
    let los = line_of_sight(
        dem,
        tx_cell,
        tx.height_agl_m,
        params.rx_height_m,
        tx.frequency_mhz,
        params.fresnel_clearance,
    )?;
    let isotropic = path_loss_field(dem, clutter, &los, tx, params, clutter_losses)?;
    apply_antenna(&isotropic, dem, diagram, tx, params.rx_height_m)
}

pub fn predict_transmitter(
    dem: &RasterGrid,
    clutter: &RasterGrid,
    tx: &TransmitterConfig,
    diagram: &AntennaDiagram,
    params: &PropagationParams,
    clutter_losses: &ClutterLossTable,
) -> Result<PathLossField> {
    ensure_aligned(dem, clutter)?;
    let radius_m = tx.radius_km * 1000.0;
    let dem_sub = extract_subgrid(dem, tx.position, radius_m)?;
    let clutter_sub = extract_subgrid(clutter, tx.position, radius_m)?;
    predict_on_subgrids(&dem_sub, &clutter_sub, tx, diagram, params, clutter_losses)
}

pub fn received_power(power_dbm: f64, loss_db: f64) -> f64 {
    power_dbm - loss_db
}

/// Rounds a loss value to the resolution at which results are persisted
/// (six decimals), so that in-memory and store-backed aggregation see the
/// same numbers.
pub fn quantize_loss(loss_db: f64) -> f64 {
    format!("{loss_db:.6}")
        .parse()
        .expect("formatted float parses")
}

/// Running per-cell maximum of received power.
#[derive(Debug, Clone)]
pub struct Aggregator {
    header: GridHeader,
    best: Vec<f64>,
    covered: Vec<bool>,
}

impl Aggregator {
    pub fn new(extent: GridHeader) -> Self {
        let n = extent.cell_count();
        Self {
            header: extent,
            best: vec![extent.nodata; n],
            covered: vec![false; n],
        }
    }

    pub fn extent(&self) -> &GridHeader {
        &self.header
    }

    /// Offers one cell's loss for a transmitter of the given power.
    pub fn offer(&mut self, row: usize, col: usize, power_dbm: f64, loss_db: f64) {
        let i = row * self.header.ncols + col;
        let value = received_power(power_dbm, quantize_loss(loss_db));
        if !self.covered[i] || value.total_cmp(&self.best[i]) == Ordering::Greater {
            self.best[i] = value;
            self.covered[i] = true;
        }
    }

    pub fn add_field(&mut self, power_dbm: f64, field: &PathLossField) -> Result<()> {
        let (r0, c0) = field.offset;
        let g = &field.grid;
        if r0 + g.nrows() > self.header.nrows || c0 + g.ncols() > self.header.ncols {
            return Err(Error::domain(format!(
                "field {}x{} at ({r0},{c0}) exceeds {}x{} extent",
                g.nrows(),
                g.ncols(),
                self.header.nrows,
                self.header.ncols
            )));
        }
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                let v = g.get(r, c);
                if !g.is_nodata(v) {
                    self.offer(r0 + r, c0 + c, power_dbm, v);
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> RasterGrid {
        RasterGrid::new(self.header, self.best).expect("aggregator shape matches header")
    }
}

/// Best-server received power in dBm over the whole extent.
pub type CoverageRaster = RasterGrid;

pub fn aggregate(
    fields: &[(TransmitterConfig, PathLossField)],
    extent: &GridHeader,
) -> Result<CoverageRaster> {
    let mut agg = Aggregator::new(*extent);
    for (tx, field) in fields {
        agg.add_field(tx.power_dbm, field)?;
    }
    Ok(agg.finish())
}

/// Predicts every transmitter in input order, then aggregates.
pub fn predict_serial(scenario: &Scenario) -> Result<CoverageRaster> {
    scenario.validate()?;
    let mut fields = Vec::with_capacity(scenario.transmitters.len());
    for tx in &scenario.transmitters {
        let diagram = scenario.diagram(&tx.diagram_id)?;
        let field = predict_transmitter(
            &scenario.dem,
            &scenario.clutter,
            tx,
            diagram,
            &scenario.params,
            &scenario.clutter_losses,
        )?;
        fields.push((tx.clone(), field));
    }
    aggregate(&fields, scenario.extent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{flat_scenario, NetworkSpec};

    #[test]
    fn received_power_examples() {
        assert_eq!(received_power(43.0, 100.0), -57.0);
        assert_eq!(received_power(43.0, 0.0), 43.0);
        assert_eq!(received_power(0.0, 75.09), -75.09);
    }

    #[test]
    fn quantize_is_idempotent() {
        for v in [0.0, 75.09, 123.456_789_49, 1e-7, 143.999_999_5] {
            let q = quantize_loss(v);
            assert_eq!(quantize_loss(q), q);
            assert!((q - v).abs() <= 5e-7);
        }
    }

    fn header() -> GridHeader {
        GridHeader {
            ncols: 4,
            nrows: 4,
            xll: 0.0,
            yll: 0.0,
            cellsize: 25.0,
            nodata: -9999.0,
        }
    }

    fn point_field(offset: (usize, usize), loss: f64) -> PathLossField {
        let h = header().window(offset.0, offset.1, 1, 1);
        PathLossField {
            offset,
            grid: RasterGrid::new(h, vec![loss]).unwrap(),
        }
    }

    fn tx(id: &str, power: f64) -> TransmitterConfig {
        TransmitterConfig {
            id: id.into(),
            position: GeoPoint::new(0.0, 0.0),
            height_agl_m: 30.0,
            power_dbm: power,
            frequency_mhz: 1843.0,
            radius_km: 1.0,
            mount: AntennaMount {
                azimuth_deg: 0.0,
                mech_tilt_deg: 0.0,
                elec_tilt_deg: 0.0,
            },
            diagram_id: "iso".into(),
        }
    }

    #[test]
    fn aggregate_takes_max_and_leaves_gaps() {
        let fields = vec![
            (tx("a", 0.0), point_field((1, 1), 70.0)),
            (tx("b", 0.0), point_field((1, 1), 80.0)),
        ];
        let cov = aggregate(&fields, &header()).unwrap();
        assert_eq!(cov.get(1, 1), -70.0);
        assert_eq!(cov.get(0, 0), -9999.0);
    }

    #[test]
    fn aggregate_is_idempotent() {
        let f = (tx("a", 40.0), point_field((2, 3), 91.25));
        let once = aggregate(std::slice::from_ref(&f), &header()).unwrap();
        let twice = aggregate(&[f.clone(), f], &header()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn out_of_bounds_field_is_rejected() {
        let bad = PathLossField {
            offset: (4, 0),
            grid: RasterGrid::new(header().window(0, 0, 1, 1), vec![1.0]).unwrap(),
        };
        assert!(matches!(
            aggregate(&[(tx("a", 0.0), bad)], &header()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn empty_network_is_all_sentinel() {
        let mut s = flat_scenario(&NetworkSpec::small(3));
        s.transmitters.clear();
        let cov = predict_serial(&s).unwrap();
        assert!(cov.values().iter().all(|v| *v == cov.nodata()));
    }

    #[test]
    fn flat_isotropic_field_is_symmetric() {
        let s = flat_scenario(&NetworkSpec::small(1));
        let t = &s.transmitters[0];
        let field = predict_transmitter(
            &s.dem,
            &s.clutter,
            t,
            s.diagram("iso").unwrap(),
            &s.params,
            &s.clutter_losses,
        )
        .unwrap();
        let g = &field.grid;
        let (tr, tc) = g.header().cell_of(t.position).unwrap();
        let n = g.nrows();
        assert_eq!(n, g.ncols());
        assert_eq!((tr, tc), (n / 2, n / 2));
        for r in 0..n {
            for c in 0..n {
                let mirrored = [(n - 1 - r, c), (r, n - 1 - c), (c, r)];
                for (mr, mc) in mirrored {
                    let (a, b) = (g.get(r, c), g.get(mr, mc));
                    assert!(a == b || (a - b).abs() < 1e-9, "({r},{c}) {a} vs ({mr},{mc}) {b}");
                }
            }
        }
    }

    #[test]
    fn single_cell_radius_gives_one_cell() {
        let mut s = flat_scenario(&NetworkSpec::small(1));
        s.transmitters[0].radius_km = 0.01;
        let t = &s.transmitters[0];
        let field = predict_transmitter(
            &s.dem,
            &s.clutter,
            t,
            s.diagram(&t.diagram_id).unwrap(),
            &s.params,
            &s.clutter_losses,
        )
        .unwrap();
        assert_eq!((field.grid.nrows(), field.grid.ncols()), (1, 1));
        assert!(field.loss(0, 0).unwrap() > 0.0);
    }

    #[test]
    fn transmitter_csv_defaults() {
        let params = PropagationParams::default();
        let text = format!(
            "{TRANSMITTER_CSV_HEADER}\na,100,200,30,43,,,90,2,4,sector\nb,1,2,25,40,900,5,0,0,0,iso\n"
        );
        let txs = parse_transmitters(&text, &params).unwrap();
        assert_eq!(txs[0].frequency_mhz, 1843.0);
        assert_eq!(txs[0].radius_km, 20.0);
        assert_eq!(txs[0].mount.elec_tilt_deg, 4.0);
        assert_eq!(txs[1].radius_km, 5.0);
        assert_eq!(parse_transmitters(&transmitters_to_csv(&txs), &params).unwrap(), txs);
    }
}
