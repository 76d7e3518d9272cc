//! Georeferenced raster grids and sub-region extraction.
//!
//! Grids are row-major with row 0 the northernmost row. Geolocation is never
//! stored per cell: the center of cell `(r, c)` is
//! `(xll + (c + 0.5)·cellsize, yll + (nrows − r − 0.5)·cellsize)`.
//!
//! On disk, grids use the ESRI ASCII layout (`ncols`, `nrows`, `xllcorner`,
//! `yllcorner`, `cellsize`, `NODATA_value`, then the values).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub easting: f64,
    pub northing: f64,
}

impl GeoPoint {
    pub fn new(easting: f64, northing: f64) -> Self {
        Self { easting, northing }
    }

    pub fn distance_to(&self, other: &GeoPoint) -> f64 {
        (self.easting - other.easting).hypot(self.northing - other.northing)
    }
}

/// Extent, resolution and sentinel of a raster, without its values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

impl GridHeader {
    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::domain(format!(
                "grid must have at least one row and column, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if !(self.cellsize > 0.0 && self.cellsize.is_finite()) {
            return Err(Error::domain(format!(
                "cellsize must be positive, got {}",
                self.cellsize
            )));
        }
        if !self.xll.is_finite() || !self.yll.is_finite() {
            return Err(Error::domain("grid origin must be finite"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn cell_center(&self, row: usize, col: usize) -> GeoPoint {
        GeoPoint {
            easting: self.xll + (col as f64 + 0.5) * self.cellsize,
            northing: self.yll + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize,
        }
    }

    /// Cell containing `p`, or `None` outside the extent. The extent is
    /// half-open on its eastern and northern borders.
    pub fn cell_of(&self, p: GeoPoint) -> Option<(usize, usize)> {
        if !p.easting.is_finite() || !p.northing.is_finite() {
            return None;
        }
        let col = ((p.easting - self.xll) / self.cellsize).floor();
        let top = self.yll + self.nrows as f64 * self.cellsize;
        let row = ((top - p.northing) / self.cellsize).floor();
        if col < 0.0 || row < 0.0 || col >= self.ncols as f64 || row >= self.nrows as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    pub fn same_extent(&self, other: &GridHeader) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.xll == other.xll
            && self.yll == other.yll
            && self.cellsize == other.cellsize
    }

    /// Header of the window starting at `(row0, col0)` with the given shape.
    pub fn window(&self, row0: usize, col0: usize, nrows: usize, ncols: usize) -> GridHeader {
        GridHeader {
            ncols,
            nrows,
            xll: self.xll + col0 as f64 * self.cellsize,
            yll: self.yll + (self.nrows - row0 - nrows) as f64 * self.cellsize,
            cellsize: self.cellsize,
            nodata: self.nodata,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    header: GridHeader,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(header: GridHeader, values: Vec<f64>) -> Result<Self> {
        header.validate()?;
        if values.len() != header.cell_count() {
            return Err(Error::domain(format!(
                "expected {} values, found {}",
                header.cell_count(),
                values.len()
            )));
        }
        Ok(Self { header, values })
    }

    pub fn filled(header: GridHeader, value: f64) -> Result<Self> {
        header.validate()?;
        Ok(Self {
            values: vec![value; header.cell_count()],
            header,
        })
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn nrows(&self) -> usize {
        self.header.nrows
    }

    pub fn ncols(&self) -> usize {
        self.header.ncols
    }

    pub fn nodata(&self) -> f64 {
        self.header.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.header.ncols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let ncols = self.header.ncols;
        self.values[row * ncols + col] = value;
    }

    pub fn is_nodata(&self, value: f64) -> bool {
        value == self.header.nodata || value.is_nan()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A window of a master grid, remembering where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGrid {
    /// `(row, col)` of the window's first cell in the master grid.
    pub offset: (usize, usize),
    pub grid: RasterGrid,
}

impl SubGrid {
    pub fn cut(
        master: &RasterGrid,
        row0: usize,
        col0: usize,
        nrows: usize,
        ncols: usize,
    ) -> Result<Self> {
        let mh = master.header();
        if nrows == 0 || ncols == 0 || row0 + nrows > mh.nrows || col0 + ncols > mh.ncols {
            return Err(Error::domain(format!(
                "window {nrows}x{ncols} at ({row0},{col0}) exceeds {}x{} grid",
                mh.nrows, mh.ncols
            )));
        }
        let mut values = Vec::with_capacity(nrows * ncols);
        for r in row0..row0 + nrows {
            let start = r * mh.ncols + col0;
            values.extend_from_slice(&master.values()[start..start + ncols]);
        }
        let header = mh.window(row0, col0, nrows, ncols);
        Ok(SubGrid {
            offset: (row0, col0),
            grid: RasterGrid { header, values },
        })
    }
}

fn parse_header_value<T: std::str::FromStr>(key: &str, raw: Option<&str>) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::parse(format!("header key `{key}` has no value")))?;
    raw.parse()
        .map_err(|_| Error::parse(format!("header key `{key}` has invalid value `{raw}`")))
}

/// Parses an ESRI ASCII grid from text. Header keys are case-insensitive;
/// `NODATA_value` defaults to -9999 when absent.
pub fn parse_ascii_grid(text: &str) -> Result<RasterGrid> {
    let mut ncols: Option<usize> = None;
    let mut nrows: Option<usize> = None;
    let mut xll: Option<f64> = None;
    let mut yll: Option<f64> = None;
    let mut cellsize: Option<f64> = None;
    let mut nodata: Option<f64> = None;

    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = tokens.next();
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(parse_header_value(key, value)?),
            "nrows" => nrows = Some(parse_header_value(key, value)?),
            "xllcorner" => xll = Some(parse_header_value(key, value)?),
            "yllcorner" => yll = Some(parse_header_value(key, value)?),
            "cellsize" => cellsize = Some(parse_header_value(key, value)?),
            "nodata_value" => nodata = Some(parse_header_value(key, value)?),
            _ => return Err(Error::parse(format!("unknown header key `{key}`"))),
        }
        lines.next();
    }

    let missing = |key: &str| Error::parse(format!("missing header key `{key}`"));
    let header = GridHeader {
        ncols: ncols.ok_or_else(|| missing("ncols"))?,
        nrows: nrows.ok_or_else(|| missing("nrows"))?,
        xll: xll.ok_or_else(|| missing("xllcorner"))?,
        yll: yll.ok_or_else(|| missing("yllcorner"))?,
        cellsize: cellsize.ok_or_else(|| missing("cellsize"))?,
        nodata: nodata.unwrap_or(DEFAULT_NODATA),
    };
    header.validate().map_err(|e| Error::parse(e.to_string()))?;

    let mut values = Vec::with_capacity(header.cell_count());
    for line in lines {
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::parse(format!("invalid cell value `{token}`")))?;
            values.push(v);
        }
    }
    if values.len() != header.cell_count() {
        return Err(Error::parse(format!(
            "expected {} values, found {}",
            header.cell_count(),
            values.len()
        )));
    }
    Ok(RasterGrid { header, values })
}

pub fn load_ascii_grid(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_ascii_grid(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Renders a grid as ESRI ASCII text. Values use the shortest decimal form
/// that parses back to the same `f64`.
pub fn to_ascii_string(grid: &RasterGrid) -> String {
    let h = grid.header();
    let mut out = String::with_capacity(64 + grid.values.len() * 12);
    let _ = writeln!(out, "ncols {}", h.ncols);
    let _ = writeln!(out, "nrows {}", h.nrows);
    let _ = writeln!(out, "xllcorner {}", h.xll);
    let _ = writeln!(out, "yllcorner {}", h.yll);
    let _ = writeln!(out, "cellsize {}", h.cellsize);
    let _ = writeln!(out, "NODATA_value {}", h.nodata);
    for row in grid.values.chunks(h.ncols) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if grid.is_nodata(*v) {
                let _ = write!(out, "{}", h.nodata);
            } else {
                let _ = write!(out, "{v}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_ascii_grid(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    file.write_all(to_ascii_string(grid).as_bytes())
        .map_err(|e| Error::file(path, e))
}

/// Cuts the bounding square of `radius_m` around the cell containing
/// `center`, clamped to the map borders. The square holds every cell whose
/// center lies within `radius_m` of the center cell's center along both axes,
/// so it is never empty.
pub fn extract_subgrid(master: &RasterGrid, center: GeoPoint, radius_m: f64) -> Result<SubGrid> {
    if !(radius_m > 0.0) {
        return Err(Error::domain(format!("radius must be positive, got {radius_m}")));
    }
    let h = master.header();
    let (rc, cc) = h.cell_of(center).ok_or_else(|| {
        Error::domain(format!(
            "point ({}, {}) lies outside the grid extent",
            center.easting, center.northing
        ))
    })?;
    let reach = (radius_m / h.cellsize * (1.0 + 1e-12)).floor();
    let reach = if reach >= h.nrows.max(h.ncols) as f64 {
        h.nrows.max(h.ncols)
    } else {
        reach as usize
    };
    let r0 = rc.saturating_sub(reach);
    let c0 = cc.saturating_sub(reach);
    let r1 = (rc + reach).min(h.nrows - 1);
    let c1 = (cc + reach).min(h.ncols - 1);
    SubGrid::cut(master, r0, c0, r1 - r0 + 1, c1 - c0 + 1)
}

/// Checks that two rasters cover the same area at the same resolution.
pub fn ensure_aligned(a: &RasterGrid, b: &RasterGrid) -> Result<()> {
    if a.header().same_extent(b.header()) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "rasters differ in extent or resolution: {:?} vs {:?}",
            a.header(),
            b.header()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(nrows: usize, ncols: usize) -> GridHeader {
        GridHeader {
            ncols,
            nrows,
            xll: 1000.0,
            yll: 5000.0,
            cellsize: 25.0,
            nodata: DEFAULT_NODATA,
        }
    }

    fn ramp(nrows: usize, ncols: usize) -> RasterGrid {
        let values = (0..nrows * ncols).map(|i| i as f64).collect();
        RasterGrid::new(header(nrows, ncols), values).unwrap()
    }

    #[test]
    fn parses_two_by_two() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 25\nNODATA_value -9999\n1 2\n3 4\n";
        let g = parse_ascii_grid(text).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(1, 1), 4.0);
        assert_eq!(g.header().cellsize, 25.0);
    }

    #[test]
    fn value_count_mismatch_reports_counts() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 25\nNODATA_value -9999\n1 2\n3\n";
        let err = parse_ascii_grid(text).unwrap_err().to_string();
        assert!(err.contains("expected 4 values, found 3"), "{err}");
    }

    #[test]
    fn nodata_passes_through() {
        let text = "NCOLS 2\r\nNROWS 1\r\nXLLCORNER 0\r\nYLLCORNER 0\r\nCELLSIZE 25\r\nnodata_value -9999\r\n5 -9999\r\n";
        let g = parse_ascii_grid(text).unwrap();
        assert_eq!(g.get(0, 1), -9999.0);
        assert!(g.is_nodata(g.get(0, 1)));
    }

    #[test]
    fn malformed_header_names_key() {
        let text = "ncols two\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 25\n1 2\n";
        let err = parse_ascii_grid(text).unwrap_err().to_string();
        assert!(err.contains("ncols"), "{err}");
        let text = "ncols 2\nnrows 1\nxllcorner 0\ncellsize 25\n1 2\n";
        let err = parse_ascii_grid(text).unwrap_err().to_string();
        assert!(err.contains("yllcorner"), "{err}");
    }

    #[test]
    fn single_zero_cell_body() {
        let g = RasterGrid::new(header(1, 1), vec![0.0]).unwrap();
        let text = to_ascii_string(&g);
        assert_eq!(text.lines().last().unwrap(), "0");
    }

    #[test]
    fn writer_prints_sentinel() {
        let mut g = ramp(2, 2);
        g.set(0, 1, DEFAULT_NODATA);
        let text = to_ascii_string(&g);
        assert!(text.lines().nth(6).unwrap().ends_with("-9999"));
    }

    #[test]
    fn write_to_missing_dir_is_io_error() {
        let g = ramp(1, 1);
        let err = write_ascii_grid(&g, "/nonexistent/dir/out.asc").unwrap_err();
        assert!(matches!(err, Error::File { .. }));
    }

    #[test]
    fn tiny_radius_gives_center_cell() {
        let g = ramp(10, 10);
        let center = g.header().cell_center(4, 7);
        let sub = extract_subgrid(&g, center, 10.0).unwrap();
        assert_eq!(sub.offset, (4, 7));
        assert_eq!((sub.grid.nrows(), sub.grid.ncols()), (1, 1));
        assert_eq!(sub.grid.get(0, 0), g.get(4, 7));
    }

    #[test]
    fn corner_radius_is_clamped() {
        let g = ramp(30, 30);
        let center = g.header().cell_center(0, 29);
        let sub = extract_subgrid(&g, center, 250.0).unwrap();
        // Ten cells of reach: rows 0..=10 and cols 19..=29.
        assert_eq!(sub.offset, (0, 19));
        assert_eq!((sub.grid.nrows(), sub.grid.ncols()), (11, 11));
    }

    #[test]
    fn full_map_radius_is_identity() {
        let g = ramp(6, 9);
        let center = g.header().cell_center(3, 4);
        let sub = extract_subgrid(&g, center, 1e6).unwrap();
        assert_eq!(sub.offset, (0, 0));
        assert_eq!(sub.grid, g);
    }

    #[test]
    fn center_outside_is_domain_error() {
        let g = ramp(3, 3);
        let err = extract_subgrid(&g, GeoPoint::new(0.0, 0.0), 100.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn subgrid_geolocation_matches_master() {
        let g = ramp(12, 8);
        let sub = extract_subgrid(&g, g.header().cell_center(5, 2), 60.0).unwrap();
        let (r0, c0) = sub.offset;
        for r in 0..sub.grid.nrows() {
            for c in 0..sub.grid.ncols() {
                assert_eq!(
                    sub.grid.header().cell_center(r, c),
                    g.header().cell_center(r0 + r, c0 + c)
                );
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(nrows in 1usize..8, ncols in 1usize..8, seed in any::<u64>(), nodata_mask in any::<u64>()) {
            let mut state = seed;
            let values: Vec<f64> = (0..nrows * ncols).map(|i| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if nodata_mask >> (i % 64) & 1 == 1 { DEFAULT_NODATA } else { (state >> 11) as f64 / (1u64 << 40) as f64 - 2000.0 }
            }).collect();
            let g = RasterGrid::new(header(nrows, ncols), values).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("g.asc");
            write_ascii_grid(&g, &path).unwrap();
            let back = load_ascii_grid(&path).unwrap();
            prop_assert_eq!(back.header(), g.header());
            for (a, b) in back.values().iter().zip(g.values()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }

        #[test]
        fn geolocation_inverse(nrows in 1usize..40, ncols in 1usize..40, r in 0usize..40, c in 0usize..40) {
            let h = header(nrows, ncols);
            let (r, c) = (r % nrows, c % ncols);
            prop_assert_eq!(h.cell_of(h.cell_center(r, c)), Some((r, c)));
        }

        #[test]
        fn subgrid_consistency(nrows in 1usize..20, ncols in 1usize..20, r in 0usize..20, c in 0usize..20, radius in 1.0f64..400.0) {
            let g = ramp(nrows, ncols);
            let (r, c) = (r % nrows, c % ncols);
            let sub = extract_subgrid(&g, g.header().cell_center(r, c), radius).unwrap();
            let (r0, c0) = sub.offset;
            prop_assert!(r0 + sub.grid.nrows() <= nrows && c0 + sub.grid.ncols() <= ncols);
            for sr in 0..sub.grid.nrows() {
                for sc in 0..sub.grid.ncols() {
                    prop_assert_eq!(sub.grid.get(sr, sc), g.get(r0 + sr, c0 + sc));
                }
            }
        }
    }
}
