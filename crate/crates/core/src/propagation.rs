//! Terrain line-of-sight and the Walfisch-Ikegami path-loss model with a
//! clutter correction.
//!
//! Total loss per receiver cell is `L0(d) + L_clut + branch(d)`, where the
//! branch is the line-of-sight loss for visible cells and the rooftop-to-street
//! plus multi-obstacle diffraction loss otherwise. Distances are in
//! kilometers and frequencies in MHz inside the closed forms.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::engine::TransmitterConfig;
use crate::error::{Error, Result};
use crate::terrain::{RasterGrid, SubGrid};

/// Wavelength numerator: c in m·MHz.
const LIGHT_SPEED_M_MHZ: f64 = 299.792_458;

/// Receivers closer than this (3D) are evaluated at this distance.
pub const MIN_DISTANCE_M: f64 = 1.0;

pub fn wavelength_m(f_mhz: f64) -> f64 {
    LIGHT_SPEED_M_MHZ / f_mhz
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    /// Default carrier, used when a transmitter does not set its own.
    pub frequency_mhz: f64,
    pub rx_height_m: f64,
    /// Default transmission radius, used when a transmitter does not set its own.
    pub radius_m: f64,
    pub roof_height_m: f64,
    pub street_width_m: f64,
    pub building_separation_m: f64,
    /// Fraction of the first Fresnel radius that must stay clear (1.0 = full zone).
    pub fresnel_clearance: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            frequency_mhz: 1843.0,
            rx_height_m: 1.5,
            radius_m: 20_000.0,
            roof_height_m: 15.0,
            street_width_m: 25.0,
            building_separation_m: 50.0,
            fresnel_clearance: 1.0,
        }
    }
}

pub const FREQUENCY_RANGE_MHZ: (f64, f64) = (800.0, 2600.0);

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frequency_mhz", self.frequency_mhz),
            ("rx_height_m", self.rx_height_m),
            ("radius_m", self.radius_m),
            ("roof_height_m", self.roof_height_m),
            ("street_width_m", self.street_width_m),
            ("building_separation_m", self.building_separation_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        check_frequency(self.frequency_mhz)?;
        if self.rx_height_m >= self.roof_height_m {
            return Err(Error::domain(format!(
                "receiver height {} m must be below roof height {} m",
                self.rx_height_m, self.roof_height_m
            )));
        }
        if !(self.fresnel_clearance >= 0.0 && self.fresnel_clearance.is_finite()) {
            return Err(Error::domain("fresnel_clearance must be non-negative"));
        }
        Ok(())
    }
}

pub fn check_frequency(f_mhz: f64) -> Result<()> {
    let (lo, hi) = FREQUENCY_RANGE_MHZ;
    if (lo..=hi).contains(&f_mhz) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "frequency {f_mhz} MHz outside the model range [{lo}, {hi}] MHz"
        )))
    }
}

fn check_positive(d_km: f64, f_mhz: f64) -> Result<()> {
    if d_km > 0.0 && f_mhz > 0.0 && d_km.is_finite() && f_mhz.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "distance and frequency must be positive, got d={d_km} km, f={f_mhz} MHz"
        )))
    }
}

/// Free-space attenuation `32.45 + 20·log(d) + 20·log(F)`.
pub fn free_space_loss(d_km: f64, f_mhz: f64) -> Result<f64> {
    check_positive(d_km, f_mhz)?;
    Ok(32.45 + 20.0 * d_km.log10() + 20.0 * f_mhz.log10())
}

/// Line-of-sight loss `42.64 + 26·log(d) + 20·log(F)`.
pub fn los_loss(d_km: f64, f_mhz: f64) -> Result<f64> {
    check_positive(d_km, f_mhz)?;
    Ok(42.64 + 26.0 * d_km.log10() + 20.0 * f_mhz.log10())
}

/// Street-orientation correction evaluated at a street perpendicular to the
/// incidence direction (90°).
const ORIENTATION_LOSS_90_DEG: f64 = 4.0 - 0.114 * (90.0 - 55.0);

/// Rooftop-to-street diffraction and scatter loss.
pub fn rooftop_to_street_loss(f_mhz: f64, params: &PropagationParams) -> Result<f64> {
    let dh_mobile = params.roof_height_m - params.rx_height_m;
    if !(dh_mobile > 0.0) || !(params.street_width_m > 0.0) || !(f_mhz > 0.0) {
        return Err(Error::domain(
            "rooftop-to-street loss needs positive street width, frequency and roof clearance",
        ));
    }
    Ok(-16.9 - 10.0 * params.street_width_m.log10()
        + 10.0 * f_mhz.log10()
        + 20.0 * dh_mobile.log10()
        + ORIENTATION_LOSS_90_DEG)
}

/// Fresnel-Kirchhoff diffraction parameter for an edge `excess_m` above the
/// direct ray at distances `d1_m`, `d2_m` from its ends.
pub fn diffraction_parameter(excess_m: f64, d1_m: f64, d2_m: f64, wavelength_m: f64) -> f64 {
    if d1_m <= 0.0 || d2_m <= 0.0 {
        return 0.0;
    }
    excess_m * (2.0 * (d1_m + d2_m) / (wavelength_m * d1_m * d2_m)).sqrt()
}

/// Single knife-edge loss in dB; zero for `nu <= -0.7`.
pub fn knife_edge_loss(nu: f64) -> f64 {
    if nu <= -0.7 {
        return 0.0;
    }
    let x = nu - 0.1;
    (6.9 + 20.0 * ((x * x + 1.0).sqrt() + x).log10()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    /// Horizontal distance from the transmitter along the ray, meters.
    pub distance_m: f64,
    /// Terrain elevation, meters.
    pub elevation_m: f64,
}

/// Terrain samples between a transmitter antenna and a receiver point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProfile {
    /// Absolute elevation of the antenna tip.
    pub tx_elevation_m: f64,
    /// Absolute elevation of the receiver point.
    pub rx_elevation_m: f64,
    /// Horizontal transmitter-receiver distance.
    pub length_m: f64,
    pub samples: Vec<ProfileSample>,
}

impl PathProfile {
    pub fn sightline_at(&self, distance_m: f64) -> f64 {
        let t = distance_m / self.length_m;
        self.tx_elevation_m + t * (self.rx_elevation_m - self.tx_elevation_m)
    }

    /// Knife-edge loss of the sample at `index` against the direct ray.
    pub fn obstacle_loss(&self, index: usize, f_mhz: f64) -> f64 {
        let s = self.samples[index];
        let excess = s.elevation_m - self.sightline_at(s.distance_m);
        let nu = diffraction_parameter(
            excess,
            s.distance_m,
            self.length_m - s.distance_m,
            wavelength_m(f_mhz),
        );
        knife_edge_loss(nu)
    }
}

/// Non-line-of-sight branch: rooftop-to-street loss plus the sum of
/// per-obstacle knife-edge losses, clamped at zero.
pub fn nlos_loss(
    profile: &PathProfile,
    obstacles: &[usize],
    f_mhz: f64,
    params: &PropagationParams,
) -> Result<f64> {
    if obstacles.is_empty() {
        return Err(Error::domain(
            "non-line-of-sight loss needs at least one obstacle; use los_loss",
        ));
    }
    if !(profile.length_m > 0.0) {
        return Err(Error::domain("profile length must be positive"));
    }
    let mut msd = 0.0;
    for &i in obstacles {
        if i >= profile.samples.len() {
            return Err(Error::domain(format!(
                "obstacle index {i} outside profile of {} samples",
                profile.samples.len()
            )));
        }
        msd += profile.obstacle_loss(i, f_mhz);
    }
    Ok((rooftop_to_street_loss(f_mhz, params)? + msd).max(0.0))
}

/// Combines the terms of one receiver cell. `nlos` carries the NLOS branch
/// value for obstructed cells; that branch is floored at the LOS branch so an
/// obstructed cell never loses less than a visible one at the same distance.
pub fn cell_path_loss(d_km: f64, f_mhz: f64, clutter_db: f64, nlos: Option<f64>) -> Result<f64> {
    let l0 = free_space_loss(d_km, f_mhz)?;
    let los = los_loss(d_km, f_mhz)?;
    let branch = match nlos {
        None => los,
        Some(n) => n.max(los),
    };
    Ok(l0 + clutter_db + branch)
}

/// Iterator over the cells strictly between two cells that the segment
/// joining their centers passes through. Cells the segment only touches at
/// a corner are not visited.
#[derive(Debug, Clone)]
pub struct SupercoverWalk {
    x: i64,
    y: i64,
    sx: i64,
    sy: i64,
    nx: i64,
    ny: i64,
    ix: i64,
    iy: i64,
}

impl SupercoverWalk {
    pub fn new(from: (usize, usize), to: (usize, usize)) -> Self {
        let (fr, fc) = (from.0 as i64, from.1 as i64);
        let (tr, tc) = (to.0 as i64, to.1 as i64);
        Self {
            x: fc,
            y: fr,
            sx: (tc - fc).signum(),
            sy: (tr - fr).signum(),
            nx: (tc - fc).abs(),
            ny: (tr - fr).abs(),
            ix: 0,
            iy: 0,
        }
    }
}

impl Iterator for SupercoverWalk {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.ix >= self.nx && self.iy >= self.ny {
            return None;
        }
        // Compare the parameters of the next vertical and horizontal
        // boundary crossings: (0.5 + ix) / nx vs (0.5 + iy) / ny.
        let decision = (1 + 2 * self.ix) * self.ny - (1 + 2 * self.iy) * self.nx;
        if decision == 0 {
            self.x += self.sx;
            self.y += self.sy;
            self.ix += 1;
            self.iy += 1;
        } else if decision < 0 {
            self.x += self.sx;
            self.ix += 1;
        } else {
            self.y += self.sy;
            self.iy += 1;
        }
        if self.ix >= self.nx && self.iy >= self.ny {
            // Reached the target cell, which is not part of the walk.
            return None;
        }
        Some((self.y as usize, self.x as usize))
    }
}

/// Per-cell visibility from one transmitter over a sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LosMask {
    nrows: usize,
    ncols: usize,
    tx_cell: (usize, usize),
    /// Per cell, walk indices of the obstructing cells in walk order.
    obstacles: Vec<Vec<usize>>,
}

impl LosMask {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn tx_cell(&self) -> (usize, usize) {
        self.tx_cell
    }

    pub fn is_los(&self, row: usize, col: usize) -> bool {
        self.obstacles[row * self.ncols + col].is_empty()
    }

    /// Positions (in the supercover walk from the transmitter) of the
    /// obstructing cells; empty for visible cells.
    pub fn obstacles(&self, row: usize, col: usize) -> &[usize] {
        &self.obstacles[row * self.ncols + col]
    }

    /// Obstructing cells as `(row, col)` in the sub-grid.
    pub fn obstacle_cells(&self, row: usize, col: usize) -> Vec<(usize, usize)> {
        let walk: Vec<_> = SupercoverWalk::new(self.tx_cell, (row, col)).collect();
        self.obstacles(row, col).iter().map(|&i| walk[i]).collect()
    }
}

/// Geometry of the direct ray from the transmitter cell center to a target
/// cell center. Positions along the ray are computed from integer cell
/// offsets so every caller gets bit-identical fractions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ray {
    tx: (i64, i64),
    v: (i64, i64),
    len2: i64,
    len: f64,
    pub(crate) tx_z: f64,
    pub(crate) rx_z: f64,
}

impl Ray {
    pub(crate) fn new(
        tx: (usize, usize),
        target: (usize, usize),
        cellsize: f64,
        tx_z: f64,
        rx_z: f64,
    ) -> Self {
        let tx = (tx.0 as i64, tx.1 as i64);
        let v = (target.0 as i64 - tx.0, target.1 as i64 - tx.1);
        let len2 = v.0 * v.0 + v.1 * v.1;
        Self {
            tx,
            v,
            len2,
            len: (len2 as f64).sqrt() * cellsize,
            tx_z,
            rx_z,
        }
    }

    /// Horizontal length in meters.
    pub(crate) fn length(&self) -> f64 {
        self.len
    }

    fn fraction_of_projection(&self, proj: i64) -> f64 {
        (proj as f64 / self.len2 as f64).clamp(0.0, 1.0)
    }

    /// Fraction of the ray at the projection of a cell center onto it.
    pub(crate) fn fraction(&self, cell: (usize, usize)) -> f64 {
        let p = (cell.0 as i64 - self.tx.0, cell.1 as i64 - self.tx.1);
        self.fraction_of_projection(p.0 * self.v.0 + p.1 * self.v.1)
    }

    /// True when terrain at `elevation` intrudes into the lower part of the
    /// first Fresnel zone at fraction `t`, scaled by `clearance`.
    pub(crate) fn obstructs(&self, t: f64, elevation: f64, wavelength: f64, clearance: f64) -> bool {
        let sight = self.tx_z + t * (self.rx_z - self.tx_z);
        let gap = sight - elevation;
        if gap < 0.0 {
            return true;
        }
        // gap < clearance·r1, with r1² = λ·d1·d2/len = λ·len·t·(1 − t)
        let r1_sq = (wavelength * self.len * t * (1.0 - t)).max(0.0);
        gap * gap < clearance * clearance * r1_sq
    }
}

/// Visibility of every sub-grid cell from the transmitter antenna.
///
/// A cell is obstructed when any terrain cell on the supercover walk towards
/// it rises above the lower boundary of the first Fresnel zone of the ray
/// from the antenna tip to the receiver point. Nodata cells never obstruct.
pub fn line_of_sight(
    dem: &SubGrid,
    tx_cell: (usize, usize),
    tx_height_m: f64,
    rx_height_m: f64,
    f_mhz: f64,
    fresnel_clearance: f64,
) -> Result<LosMask> {
    let grid = &dem.grid;
    let (nrows, ncols) = (grid.nrows(), grid.ncols());
    if tx_cell.0 >= nrows || tx_cell.1 >= ncols {
        return Err(Error::domain(format!(
            "transmitter cell {tx_cell:?} outside {nrows}x{ncols} sub-grid"
        )));
    }
    if !(f_mhz > 0.0) {
        return Err(Error::domain("frequency must be positive"));
    }
    let tx_ground = grid.get(tx_cell.0, tx_cell.1);
    if grid.is_nodata(tx_ground) {
        return Err(Error::domain("transmitter cell has no terrain data"));
    }
    let tx_z = tx_ground + tx_height_m;
    let wavelength = wavelength_m(f_mhz);
    let cellsize = grid.header().cellsize;

    let values = grid.values();
    let nodata = grid.nodata();
    let mut obstacles = vec![Vec::new(); nrows * ncols];
    for r in 0..nrows {
        for c in 0..ncols {
            let ground = values[r * ncols + c];
            if (r, c) == tx_cell || ground == nodata {
                continue;
            }
            let ray = Ray::new(tx_cell, (r, c), cellsize, tx_z, ground + rx_height_m);
            let list = &mut obstacles[r * ncols + c];
            // Supercover walk inlined, tracking the flat index and the
            // integer projection onto the ray incrementally.
            let (vy, vx) = ray.v;
            let (sy, sx) = (vy.signum(), vx.signum());
            let (ny, nx) = (vy.abs(), vx.abs());
            let (dproj_x, dproj_y) = (sx * vx, sy * vy);
            let row_step = sy * ncols as i64;
            let (mut ix, mut iy) = (0i64, 0i64);
            let mut idx = (tx_cell.0 * ncols + tx_cell.1) as i64;
            let mut proj = 0i64;
            let mut step = 0usize;
            loop {
                let decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx;
                if decision <= 0 {
                    idx += sx;
                    proj += dproj_x;
                    ix += 1;
                }
                if decision >= 0 {
                    idx += row_step;
                    proj += dproj_y;
                    iy += 1;
                }
                if ix >= nx && iy >= ny {
                    break;
                }
                let elevation = values[idx as usize];
                if elevation != nodata
                    && ray.obstructs(
                        ray.fraction_of_projection(proj),
                        elevation,
                        wavelength,
                        fresnel_clearance,
                    )
                {
                    list.push(step);
                }
                step += 1;
            }
        }
    }
    Ok(LosMask {
        nrows,
        ncols,
        tx_cell,
        obstacles,
    })
}

/// Builds the terrain profile along the walk from the transmitter to a cell.
pub fn walk_profile(
    dem: &RasterGrid,
    tx_cell: (usize, usize),
    target: (usize, usize),
    tx_height_m: f64,
    rx_height_m: f64,
) -> PathProfile {
    let cellsize = dem.header().cellsize;
    let tx_z = dem.get(tx_cell.0, tx_cell.1) + tx_height_m;
    let rx_z = dem.get(target.0, target.1) + rx_height_m;
    let ray = Ray::new(tx_cell, target, cellsize, tx_z, rx_z);
    let len = ray.length();
    let samples = SupercoverWalk::new(tx_cell, target)
        .map(|cell| ProfileSample {
            distance_m: ray.fraction(cell) * len,
            elevation_m: dem.get(cell.0, cell.1),
        })
        .collect();
    PathProfile {
        tx_elevation_m: tx_z,
        rx_elevation_m: rx_z,
        length_m: len,
        samples,
    }
}

/// Maps clutter category codes to signal loss in dB.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClutterLossTable {
    losses: BTreeMap<i64, f64>,
}

impl ClutterLossTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, code: i64, loss_db: f64) {
        self.losses.insert(code, loss_db);
    }

    pub fn get(&self, code: i64) -> Option<f64> {
        self.losses.get(&code).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.losses.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Parses lines of `code loss_db`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(code), Some(loss), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::parse(format!(
                    "clutter table line {}: expected `code loss_db`",
                    lineno + 1
                )));
            };
            let code: i64 = code.parse().map_err(|_| {
                Error::parse(format!("clutter table line {}: bad code `{code}`", lineno + 1))
            })?;
            let loss: f64 = loss.parse().map_err(|_| {
                Error::parse(format!("clutter table line {}: bad loss `{loss}`", lineno + 1))
            })?;
            table.insert(code, loss);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }
}

/// Path loss of one transmitter over its sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossField {
    /// `(row, col)` of the first cell in the master grid.
    pub offset: (usize, usize),
    /// Loss in dB; cells outside the radius or without terrain hold the
    /// grid's nodata sentinel.
    pub grid: RasterGrid,
}

impl PathLossField {
    pub fn loss(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.grid.get(row, col);
        (!self.grid.is_nodata(v)).then_some(v)
    }

    pub fn covered_cells(&self) -> usize {
        self.grid.values().iter().filter(|v| !self.grid.is_nodata(**v)).count()
    }
}

/// Isotropic path loss of one transmitter over its sub-grid.
///
/// Every cell whose center lies within the transmitter radius gets
/// `L0(d) + L_clut + branch`, with `d` the 3D antenna-to-receiver distance.
/// The transmitter sits at the center of its cell.
pub fn path_loss_field(
    dem: &SubGrid,
    clutter: &SubGrid,
    los: &LosMask,
    tx: &TransmitterConfig,
    params: &PropagationParams,
    clutter_losses: &ClutterLossTable,
) -> Result<PathLossField> {
    let grid = &dem.grid;
    let (nrows, ncols) = (grid.nrows(), grid.ncols());
    if dem.offset != clutter.offset
        || !grid.header().same_extent(clutter.grid.header())
        || (los.nrows, los.ncols) != (nrows, ncols)
    {
        return Err(Error::domain(
            "terrain, clutter and visibility mask must share offset and shape",
        ));
    }
    let f_mhz = tx.frequency_mhz;
    let tx_cell = los.tx_cell;
    let tx_z = grid.get(tx_cell.0, tx_cell.1) + tx.height_agl_m;
    let cellsize = grid.header().cellsize;
    let radius_m = tx.radius_km * 1000.0;
    let nodata = grid.nodata();
    let rts = rooftop_to_street_loss(f_mhz, params)?;
    let wavelength = wavelength_m(f_mhz);

    let mut unknown_codes = BTreeSet::new();
    let mut values = Vec::with_capacity(nrows * ncols);
    for r in 0..nrows {
        for c in 0..ncols {
            let ground = grid.get(r, c);
            let dx = (c as f64 - tx_cell.1 as f64) * cellsize;
            let dy = (r as f64 - tx_cell.0 as f64) * cellsize;
            let horizontal = dx.hypot(dy);
            if horizontal > radius_m || grid.is_nodata(ground) {
                values.push(nodata);
                continue;
            }
            let rx_z = ground + params.rx_height_m;
            let d_km = horizontal.hypot(tx_z - rx_z).max(MIN_DISTANCE_M) / 1000.0;

            let code = clutter.grid.get(r, c);
            let clutter_db = if clutter.grid.is_nodata(code) {
                0.0
            } else {
                let code = code.round() as i64;
                clutter_losses.get(code).unwrap_or_else(|| {
                    unknown_codes.insert(code);
                    0.0
                })
            };

            let obstacles = los.obstacles(r, c);
            let nlos = if obstacles.is_empty() {
                None
            } else {
                let ray = Ray::new(tx_cell, (r, c), cellsize, tx_z, rx_z);
                let len = ray.length();
                let walk: Vec<_> = SupercoverWalk::new(tx_cell, (r, c)).collect();
                let mut msd = 0.0;
                for &i in obstacles {
                    let cell = walk[i];
                    let t = ray.fraction(cell);
                    let sight = tx_z + t * (rx_z - tx_z);
                    let excess = grid.get(cell.0, cell.1) - sight;
                    let d1 = t * len;
                    msd += knife_edge_loss(diffraction_parameter(excess, d1, len - d1, wavelength));
                }
                Some((rts + msd).max(0.0))
            };
            values.push(cell_path_loss(d_km, f_mhz, clutter_db, nlos)?);
        }
    }
    for code in unknown_codes {
        log::warn!("clutter code {code} has no loss entry; using 0 dB");
    }
    Ok(PathLossField {
        offset: dem.offset,
        grid: RasterGrid::new(*grid.header(), values)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{GridHeader, DEFAULT_NODATA};
    use proptest::prelude::*;

    const EPS: f64 = 1e-9;

    #[test]
    fn free_space_examples() {
        assert!((free_space_loss(1.0, 1.0).unwrap() - 32.45).abs() < EPS);
        // 32.45 + 20·log10(2)
        assert!((free_space_loss(2.0, 1.0).unwrap() - 38.470_599_913_279_62).abs() < EPS);
        // 32.45 + 20·log10(1843)
        assert!((free_space_loss(1.0, 1843.0).unwrap() - 97.760_506_704_381_47).abs() < EPS);
    }

    #[test]
    fn los_examples() {
        assert!((los_loss(1.0, 1.0).unwrap() - 42.64).abs() < EPS);
        assert!((los_loss(10.0, 1.0).unwrap() - 68.64).abs() < EPS);
        assert!((los_loss(1.0, 1000.0).unwrap() - 102.64).abs() < EPS);
    }

    #[test]
    fn non_positive_inputs_are_domain_errors() {
        assert!(matches!(free_space_loss(0.0, 900.0), Err(Error::Domain(_))));
        assert!(matches!(los_loss(1.0, -5.0), Err(Error::Domain(_))));
    }

    #[test]
    fn grazing_obstacle_is_six_db() {
        assert!((knife_edge_loss(0.0) - 6.02).abs() < 0.02);
        let profile = PathProfile {
            tx_elevation_m: 100.0,
            rx_elevation_m: 0.0,
            length_m: 1000.0,
            samples: vec![ProfileSample { distance_m: 500.0, elevation_m: 50.0 }],
        };
        assert!((profile.obstacle_loss(0, 1843.0) - knife_edge_loss(0.0)).abs() < EPS);
    }

    #[test]
    fn identical_obstacles_add() {
        let params = PropagationParams::default();
        let profile = PathProfile {
            tx_elevation_m: 100.0,
            rx_elevation_m: 100.0,
            length_m: 1000.0,
            samples: vec![
                ProfileSample { distance_m: 400.0, elevation_m: 103.0 },
                ProfileSample { distance_m: 600.0, elevation_m: 103.0 },
            ],
        };
        let rts = rooftop_to_street_loss(1843.0, &params).unwrap();
        let one = nlos_loss(&profile, &[0], 1843.0, &params).unwrap() - rts;
        let two = nlos_loss(&profile, &[0, 1], 1843.0, &params).unwrap() - rts;
        assert!(one > 0.0);
        assert!((two - 2.0 * one).abs() < EPS);
    }

    #[test]
    fn deep_obstacle_contributes_nothing() {
        let params = PropagationParams::default();
        let profile = PathProfile {
            tx_elevation_m: 100.0,
            rx_elevation_m: 100.0,
            length_m: 1000.0,
            samples: vec![ProfileSample { distance_m: 500.0, elevation_m: 0.0 }],
        };
        assert_eq!(profile.obstacle_loss(0, 1843.0), 0.0);
        let rts = rooftop_to_street_loss(1843.0, &params).unwrap();
        assert!((nlos_loss(&profile, &[0], 1843.0, &params).unwrap() - rts).abs() < EPS);
    }

    #[test]
    fn empty_obstacle_list_is_rejected() {
        let profile = PathProfile {
            tx_elevation_m: 1.0,
            rx_elevation_m: 1.0,
            length_m: 10.0,
            samples: vec![],
        };
        assert!(nlos_loss(&profile, &[], 1843.0, &PropagationParams::default()).is_err());
    }

    #[test]
    fn rooftop_to_street_reference_value() {
        // -16.9 - 10·log10(25) + 10·log10(1843) + 20·log10(13.5) + 0.01
        let expected = -16.9 - 13.979_400_086_720_377 + 32.655_253_352_190_73
            + 22.606_675_369_900_124 + 0.01;
        let got = rooftop_to_street_loss(1843.0, &PropagationParams::default()).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn cell_loss_is_literal_sum() {
        assert!((cell_path_loss(1.0, 1.0, 0.0, None).unwrap() - 75.09).abs() < EPS);
        assert!((cell_path_loss(1.0, 1.0, 6.0, None).unwrap() - 81.09).abs() < EPS);
    }

    #[test]
    fn walk_visits_expected_cells() {
        let w: Vec<_> = SupercoverWalk::new((0, 0), (0, 3)).collect();
        assert_eq!(w, vec![(0, 1), (0, 2)]);
        let w: Vec<_> = SupercoverWalk::new((0, 0), (2, 2)).collect();
        assert_eq!(w, vec![(1, 1)]);
        let w: Vec<_> = SupercoverWalk::new((0, 0), (1, 2)).collect();
        assert_eq!(w, vec![(0, 1), (1, 1)]);
        assert_eq!(SupercoverWalk::new((3, 3), (3, 4)).count(), 0);
        assert_eq!(SupercoverWalk::new((3, 3), (3, 3)).count(), 0);
    }

    fn flat(nrows: usize, ncols: usize, z: f64) -> SubGrid {
        let header = GridHeader {
            ncols,
            nrows,
            xll: 0.0,
            yll: 0.0,
            cellsize: 25.0,
            nodata: DEFAULT_NODATA,
        };
        SubGrid {
            offset: (0, 0),
            grid: RasterGrid::filled(header, z).unwrap(),
        }
    }

    #[test]
    fn flat_terrain_is_visible() {
        let dem = flat(11, 11, 300.0);
        let mask = line_of_sight(&dem, (5, 5), 30.0, 1.5, 1843.0, 1.0).unwrap();
        for r in 0..11 {
            for c in 0..11 {
                assert!(mask.is_los(r, c), "({r},{c})");
            }
        }
    }

    #[test]
    fn ridge_shadows_cells_behind_it() {
        // One row: tx at column 0, ridge at column 5.
        let mut dem = flat(1, 12, 0.0);
        dem.grid.set(0, 5, 130.0);
        let mask = line_of_sight(&dem, (0, 0), 30.0, 1.5, 1843.0, 1.0).unwrap();
        for c in 0..=5 {
            assert!(mask.is_los(0, c), "col {c}");
        }
        for c in 6..12 {
            assert!(!mask.is_los(0, c), "col {c}");
            assert!(mask.obstacle_cells(0, c).contains(&(0, 5)));
        }
    }

    #[test]
    fn tx_outside_is_domain_error() {
        let dem = flat(3, 3, 0.0);
        assert!(matches!(
            line_of_sight(&dem, (3, 0), 30.0, 1.5, 1843.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn clutter_table_parses_comments() {
        let t = ClutterLossTable::parse("# code loss\n1 0\n2 6.5 # forest\n\n3 12\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.get(2), Some(6.5));
        assert!(ClutterLossTable::parse("1 2 3\n").is_err());
    }

    proptest! {
        #[test]
        fn losses_increase_with_distance(a in 1e-3f64..100.0, b in 1e-3f64..100.0, f in 800.0f64..2600.0) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(free_space_loss(lo, f).unwrap() < free_space_loss(hi, f).unwrap());
            prop_assert!(los_loss(lo, f).unwrap() < los_loss(hi, f).unwrap());
        }

        #[test]
        fn nlos_never_below_los(d in 1e-3f64..50.0, f in 800.0f64..2600.0, nlos in 0.0f64..300.0, clut in 0.0f64..30.0) {
            let los = cell_path_loss(d, f, clut, None).unwrap();
            prop_assert!(cell_path_loss(d, f, clut, Some(nlos)).unwrap() >= los);
        }
    }
}
