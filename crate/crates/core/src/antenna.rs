//! Antenna radiation diagrams and their effect on an isotropic loss field.
//!
//! Diagrams are read from a line-oriented MSI-style text file:
//!
//! ```text
//! NAME <id>
//! GAIN <float> dBi
//! HORIZONTAL 360
//! 0 0.0
//! ...            (360 lines `<deg> <att_db>`)
//! VERTICAL 360
//! ...
//! ```
//!
//! Other keyword lines (FREQUENCY, TILT, COMMENT, ...) are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::engine::TransmitterConfig;
use crate::error::{Error, Result};
use crate::propagation::PathLossField;
use crate::terrain::{GeoPoint, SubGrid};

pub const PATTERN_SAMPLES: usize = 360;

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaDiagram {
    pub name: String,
    pub gain_dbi: f64,
    /// Attenuation in dB per integer degree clockwise from the beam direction.
    pub horizontal: Vec<f64>,
    /// Attenuation in dB per integer degree of depression from the beam axis.
    pub vertical: Vec<f64>,
}

impl AntennaDiagram {
    pub fn isotropic(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            gain_dbi: 0.0,
            horizontal: vec![0.0; PATTERN_SAMPLES],
            vertical: vec![0.0; PATTERN_SAMPLES],
        }
    }

    /// Builds a diagram from raw patterns, shifting each plane so its
    /// minimum attenuation is 0 dB.
    pub fn new(
        name: impl Into<String>,
        gain_dbi: f64,
        horizontal: Vec<f64>,
        vertical: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        for (plane, samples) in [("HORIZONTAL", &horizontal), ("VERTICAL", &vertical)] {
            if samples.len() != PATTERN_SAMPLES {
                return Err(Error::parse(format!(
                    "diagram `{name}`: {plane} block has {} samples, expected {PATTERN_SAMPLES}",
                    samples.len()
                )));
            }
            if samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(format!(
                    "diagram `{name}`: {plane} block has non-finite samples"
                )));
            }
        }
        Ok(Self {
            horizontal: normalize(&name, "horizontal", horizontal),
            vertical: normalize(&name, "vertical", vertical),
            name,
            gain_dbi,
        })
    }

    pub fn horizontal_attenuation(&self, angle_deg: f64) -> f64 {
        interpolate(&self.horizontal, angle_deg)
    }

    pub fn vertical_attenuation(&self, angle_deg: f64) -> f64 {
        interpolate(&self.vertical, angle_deg)
    }

    /// Sum of both plane attenuations at the given angles.
    pub fn attenuation(&self, horiz_deg: f64, vert_deg: f64) -> f64 {
        self.horizontal_attenuation(horiz_deg) + self.vertical_attenuation(vert_deg)
    }
}

fn normalize(name: &str, plane: &str, mut samples: Vec<f64>) -> Vec<f64> {
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    if samples[0] != min {
        log::warn!("diagram `{name}`: {plane} main lobe is not at 0 degrees");
    }
    for v in &mut samples {
        *v -= min;
    }
    samples
}

/// Wraps an angle into `[0, 360)`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Linear interpolation between integer-degree samples, wrapping at 360°.
pub fn interpolate(samples: &[f64], angle_deg: f64) -> f64 {
    let a = wrap_degrees(angle_deg);
    let lo = a.floor();
    let frac = a - lo;
    let i = lo as usize % samples.len();
    let j = (i + 1) % samples.len();
    if frac == 0.0 {
        samples[i]
    } else {
        samples[i] * (1.0 - frac) + samples[j] * frac
    }
}

fn parse_block(
    name: &str,
    label: &str,
    lines: &mut std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'_>>>,
) -> Result<Vec<f64>> {
    let mut samples = Vec::with_capacity(PATTERN_SAMPLES);
    while let Some((lineno, line)) = lines.peek() {
        let mut fields = line.split_whitespace();
        let Some(first) = fields.next() else {
            lines.next();
            continue;
        };
        if first.starts_with(|c: char| c.is_ascii_alphabetic()) || samples.len() == PATTERN_SAMPLES
        {
            break;
        }
        let (deg, att) = match (first.parse::<f64>(), fields.next().map(str::parse::<f64>)) {
            (Ok(d), Some(Ok(a))) => (d, a),
            _ => {
                return Err(Error::parse(format!(
                    "diagram `{name}`: {label} line {}: expected `<deg> <att_db>`",
                    lineno + 1
                )))
            }
        };
        if deg != samples.len() as f64 {
            return Err(Error::parse(format!(
                "diagram `{name}`: {label} line {}: expected degree {}, found {deg}",
                lineno + 1,
                samples.len()
            )));
        }
        samples.push(att);
        lines.next();
    }
    if samples.len() != PATTERN_SAMPLES {
        return Err(Error::parse(format!(
            "diagram `{name}`: {label} block has {} samples, expected {PATTERN_SAMPLES}",
            samples.len()
        )));
    }
    Ok(samples)
}

pub fn parse_diagram(text: &str) -> Result<AntennaDiagram> {
    let mut name: Option<String> = None;
    let mut gain: Option<f64> = None;
    let mut horizontal = None;
    let mut vertical = None;
    let mut lines = text.lines().enumerate().peekable();
    while let Some((lineno, line)) = lines.next() {
        let mut fields = line.split_whitespace();
        let Some(key) = fields.next() else { continue };
        let label = name.as_deref().unwrap_or("?").to_owned();
        match key.to_ascii_uppercase().as_str() {
            "NAME" => {
                let rest: Vec<_> = fields.collect();
                if rest.is_empty() {
                    return Err(Error::parse(format!("line {}: NAME has no value", lineno + 1)));
                }
                name = Some(rest.join(" "));
            }
            "GAIN" => {
                let value: f64 = fields.next().and_then(|v| v.parse().ok()).ok_or_else(|| {
                    Error::parse(format!("line {}: GAIN needs a number", lineno + 1))
                })?;
                let unit = fields.next().unwrap_or("dBi");
                gain = Some(if unit.eq_ignore_ascii_case("dbd") {
                    value + 2.15
                } else {
                    value
                });
            }
            "HORIZONTAL" => horizontal = Some(parse_block(&label, "HORIZONTAL", &mut lines)?),
            "VERTICAL" => vertical = Some(parse_block(&label, "VERTICAL", &mut lines)?),
            _ => {}
        }
    }
    let name = name.ok_or_else(|| Error::parse("diagram has no NAME line"))?;
    let horizontal = horizontal
        .ok_or_else(|| Error::parse(format!("diagram `{name}`: missing HORIZONTAL block")))?;
    let vertical = vertical
        .ok_or_else(|| Error::parse(format!("diagram `{name}`: missing VERTICAL block")))?;
    AntennaDiagram::new(name, gain.unwrap_or(0.0), horizontal, vertical)
}

pub fn load_diagram(path: impl AsRef<Path>) -> Result<AntennaDiagram> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_diagram(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Renders a diagram in the text layout accepted by [`parse_diagram`].
pub fn diagram_to_string(d: &AntennaDiagram) -> String {
    let mut out = format!("NAME {}\nGAIN {} dBi\nHORIZONTAL {PATTERN_SAMPLES}\n", d.name, d.gain_dbi);
    for (i, v) in d.horizontal.iter().enumerate() {
        out.push_str(&format!("{i} {v}\n"));
    }
    out.push_str(&format!("VERTICAL {PATTERN_SAMPLES}\n"));
    for (i, v) in d.vertical.iter().enumerate() {
        out.push_str(&format!("{i} {v}\n"));
    }
    out
}

pub type DiagramSet = BTreeMap<String, AntennaDiagram>;

/// Loads every regular file in `dir` as a diagram, keyed by its NAME.
pub fn load_diagram_dir(dir: impl AsRef<Path>) -> Result<DiagramSet> {
    let dir = dir.as_ref();
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::file(dir, e))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::file(dir, e))?;
    entries.sort_by_key(|e| e.path());
    let mut set = DiagramSet::new();
    for entry in entries {
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let d = load_diagram(&path)?;
        if set.contains_key(&d.name) {
            return Err(Error::parse(format!(
                "{}: duplicate diagram name `{}`",
                path.display(),
                d.name
            )));
        }
        set.insert(d.name.clone(), d);
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaMount {
    /// Beam direction, degrees clockwise from north.
    pub azimuth_deg: f64,
    /// Mechanical tilt, positive down.
    pub mech_tilt_deg: f64,
    /// Electrical tilt, positive down.
    pub elec_tilt_deg: f64,
}

impl AntennaMount {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.azimuth_deg) {
            return Err(Error::domain(format!(
                "azimuth {} outside [0, 360)",
                self.azimuth_deg
            )));
        }
        for (what, t) in [("mechanical", self.mech_tilt_deg), ("electrical", self.elec_tilt_deg)] {
            if !(-90.0..=90.0).contains(&t) {
                return Err(Error::domain(format!("{what} tilt {t} outside [-90, 90]")));
            }
        }
        Ok(())
    }

    pub fn total_tilt_deg(&self) -> f64 {
        self.mech_tilt_deg + self.elec_tilt_deg
    }
}

/// Horizontal and vertical pattern angles, both in `[0, 360)`, without the
/// coincidence check. Coincident points are treated as on-beam horizontally.
fn pattern_angles(
    d_east: f64,
    d_north: f64,
    tx_z: f64,
    rx_z: f64,
    mount: &AntennaMount,
) -> (f64, f64) {
    let horizontal = d_east.hypot(d_north);
    let bearing = if horizontal == 0.0 {
        mount.azimuth_deg
    } else {
        d_east.atan2(d_north).to_degrees()
    };
    let depression = (tx_z - rx_z).atan2(horizontal).to_degrees();
    (
        wrap_degrees(bearing - mount.azimuth_deg),
        wrap_degrees(depression - mount.total_tilt_deg()),
    )
}

/// Pattern angles from the antenna towards a receiver point.
pub fn angles_to(
    tx: GeoPoint,
    tx_total_height_m: f64,
    rx: GeoPoint,
    rx_total_height_m: f64,
    mount: &AntennaMount,
) -> Result<(f64, f64)> {
    let d_east = rx.easting - tx.easting;
    let d_north = rx.northing - tx.northing;
    if d_east == 0.0 && d_north == 0.0 {
        return Err(Error::domain("transmitter and receiver coincide"));
    }
    Ok(pattern_angles(
        d_east,
        d_north,
        tx_total_height_m,
        rx_total_height_m,
        mount,
    ))
}

/// Applies a diagram to an isotropic field: each covered cell becomes
/// `loss − gain + H(horiz) + V(vert)`. The transmitter's own cell is taken
/// as on-beam horizontally.
pub fn apply_antenna(
    field: &PathLossField,
    dem: &SubGrid,
    diagram: &AntennaDiagram,
    tx: &TransmitterConfig,
    rx_height_m: f64,
) -> Result<PathLossField> {
    let grid = &dem.grid;
    if field.offset != dem.offset || !field.grid.header().same_extent(grid.header()) {
        return Err(Error::domain("loss field and terrain must share offset and shape"));
    }
    let h = grid.header();
    let tx_cell = h.cell_of(tx.position).ok_or_else(|| {
        Error::domain(format!("transmitter `{}` lies outside its sub-grid", tx.id))
    })?;
    let tx_center = h.cell_center(tx_cell.0, tx_cell.1);
    let tx_z = grid.get(tx_cell.0, tx_cell.1) + tx.height_agl_m;

    let mut out = field.grid.clone();
    for r in 0..out.nrows() {
        for c in 0..out.ncols() {
            let loss = out.get(r, c);
            if out.is_nodata(loss) {
                continue;
            }
            let p = h.cell_center(r, c);
            let rx_z = grid.get(r, c) + rx_height_m;
            let (ha, va) = pattern_angles(
                p.easting - tx_center.easting,
                p.northing - tx_center.northing,
                tx_z,
                rx_z,
                &tx.mount,
            );
            out.set(r, c, loss - diagram.gain_dbi + diagram.attenuation(ha, va));
        }
    }
    Ok(PathLossField {
        offset: field.offset,
        grid: out,
    })
}
