//! Per-transmitter result tables.
//!
//! The directory backend keeps one file per transmitter, `<run_dir>/<tx_id>.tsv`,
//! each row `easting \t northing \t loss_db` with six decimals. Tables are
//! written to a temporary file in the same directory and committed with a
//! no-clobber rename, so readers only ever see complete tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Barrier};
use std::thread;

use crate::engine::{Aggregator, CoverageRaster, TransmitterConfig};
use crate::error::{Error, Result};
use crate::propagation::PathLossField;
use crate::terrain::{GeoPoint, GridHeader, RasterGrid};

pub const TABLE_EXTENSION: &str = "tsv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub easting: f64,
    pub northing: f64,
    pub loss_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub tx_id: String,
    pub rows: Vec<ResultRow>,
}

pub trait ResultStore: Send + Sync {
    /// Stores the covered cells of `field`. Fails with [`Error::Conflict`]
    /// when the transmitter already has a table.
    fn put_table(&self, tx_id: &str, field: &PathLossField, extent: &GridHeader) -> Result<()>;

    /// Ids of all committed tables, sorted.
    fn table_ids(&self) -> Result<Vec<String>>;

    fn read_table(&self, tx_id: &str) -> Result<ResultTable>;
}

/// Serializes the covered cells of a field as table text.
pub fn render_rows(field: &PathLossField, extent: &GridHeader) -> String {
    let g = &field.grid;
    let (r0, c0) = field.offset;
    let mut out = String::with_capacity(field.covered_cells() * 40);
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let v = g.get(r, c);
            if g.is_nodata(v) {
                continue;
            }
            let p = extent.cell_center(r0 + r, c0 + c);
            let _ = writeln!(out, "{:.6}\t{:.6}\t{:.6}", p.easting, p.northing, v);
        }
    }
    out
}

pub fn parse_rows(tx_id: &str, text: &str) -> Result<ResultTable> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t').map(str::parse::<f64>);
        match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(Ok(easting)), Some(Ok(northing)), Some(Ok(loss_db)), None) => rows.push(ResultRow {
                easting,
                northing,
                loss_db,
            }),
            _ => {
                return Err(Error::Store(format!(
                    "table `{tx_id}` row {}: malformed `{line}`",
                    i + 1
                )))
            }
        }
    }
    Ok(ResultTable {
        tx_id: tx_id.to_owned(),
        rows,
    })
}

/// Directory-per-run, file-per-table store.
#[derive(Debug, Clone)]
pub struct DirStore {
    run_dir: PathBuf,
}

impl DirStore {
    /// Opens (creating if needed) a run directory.
    pub fn open(run_dir: impl Into<PathBuf>) -> Result<Self> {
        let run_dir = run_dir.into();
        fs::create_dir_all(&run_dir).map_err(|e| Error::file(&run_dir, e))?;
        Ok(Self { run_dir })
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    fn table_path(&self, tx_id: &str) -> PathBuf {
        self.run_dir.join(format!("{tx_id}.{TABLE_EXTENSION}"))
    }
}

impl ResultStore for DirStore {
    fn put_table(&self, tx_id: &str, field: &PathLossField, extent: &GridHeader) -> Result<()> {
        if tx_id.is_empty() || tx_id.contains(['/', '\\']) || tx_id.starts_with('.') {
            return Err(Error::Store(format!("invalid table name `{tx_id}`")));
        }
        let target = self.table_path(tx_id);
        if target.exists() {
            return Err(Error::Conflict(tx_id.to_owned()));
        }
        let body = render_rows(field, extent);
        let mut tmp = tempfile::Builder::new()
            .prefix(".tmp.")
            .suffix(".part")
            .tempfile_in(&self.run_dir)
            .map_err(|e| Error::Store(format!("creating temp table for `{tx_id}`: {e}")))?;
        tmp.write_all(body.as_bytes())
            .and_then(|_| tmp.flush())
            .map_err(|e| Error::Store(format!("writing table `{tx_id}`: {e}")))?;
        tmp.persist_noclobber(&target).map_err(|e| {
            if e.error.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Conflict(tx_id.to_owned())
            } else {
                Error::Store(format!("committing table `{tx_id}`: {}", e.error))
            }
        })?;
        Ok(())
    }

    fn table_ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.run_dir).map_err(|e| Error::file(&self.run_dir, e))? {
            let path = entry.map_err(|e| Error::file(&self.run_dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(TABLE_EXTENSION) {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if !stem.starts_with('.') {
                    ids.push(stem.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn read_table(&self, tx_id: &str) -> Result<ResultTable> {
        let path = self.table_path(tx_id);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        parse_rows(tx_id, &text)
    }
}

/// Best-server aggregation over every committed table.
pub fn scan_max(
    store: &dyn ResultStore,
    transmitters: &[TransmitterConfig],
    extent: &GridHeader,
) -> Result<CoverageRaster> {
    let power: BTreeMap<&str, f64> = transmitters
        .iter()
        .map(|t| (t.id.as_str(), t.power_dbm))
        .collect();
    let mut agg = Aggregator::new(*extent);
    for id in store.table_ids()? {
        let &p = power
            .get(id.as_str())
            .ok_or_else(|| Error::domain(format!("table `{id}` has no transmitter config")))?;
        let table = store.read_table(&id)?;
        for row in &table.rows {
            let (r, c) = extent
                .cell_of(GeoPoint::new(row.easting, row.northing))
                .ok_or_else(|| {
                    Error::domain(format!(
                        "table `{id}` row ({}, {}) lies outside the extent",
                        row.easting, row.northing
                    ))
                })?;
            agg.offer(r, c, p, row.loss_db);
        }
    }
    Ok(agg.finish())
}

/// Outcome of [`concurrent_write_stress`].
#[derive(Debug, Clone, Default)]
pub struct StressReport {
    pub tables: usize,
    /// Reads performed while writers were active.
    pub concurrent_reads: usize,
    pub violations: Vec<String>,
}

/// Runs `workers` concurrent writers, each committing `tables_per_worker`
/// distinct tables of `rows_per_table` rows, while a reader polls the store
/// and checks every visible table is complete.
pub fn concurrent_write_stress(
    run_dir: impl Into<PathBuf>,
    workers: usize,
    tables_per_worker: usize,
    rows_per_table: usize,
) -> Result<StressReport> {
    let store = Arc::new(DirStore::open(run_dir)?);
    let extent = GridHeader {
        ncols: rows_per_table.max(1),
        nrows: 1,
        xll: 0.0,
        yll: 0.0,
        cellsize: 25.0,
        nodata: -9999.0,
    };
    let field = Arc::new(PathLossField {
        offset: (0, 0),
        grid: RasterGrid::new(
            extent,
            (0..extent.ncols).map(|i| 60.0 + i as f64 * 0.125).collect(),
        )?,
    });
    let expected_rows = extent.ncols;
    let total = workers * tables_per_worker;
    let start = Arc::new(Barrier::new(workers + 1));

    let writers: Vec<_> = (0..workers)
        .map(|w| {
            let store = Arc::clone(&store);
            let field = Arc::clone(&field);
            let start = Arc::clone(&start);
            thread::spawn(move || -> Vec<String> {
                start.wait();
                (0..tables_per_worker)
                    .filter_map(|k| {
                        store
                            .put_table(&format!("w{w:03}-t{k:04}"), &field, &extent)
                            .err()
                            .map(|e| e.to_string())
                    })
                    .collect()
            })
        })
        .collect();

    let mut report = StressReport::default();
    start.wait();
    loop {
        let done = writers.iter().all(|h| h.is_finished());
        for id in store.table_ids()? {
            match store.read_table(&id) {
                Ok(t) if t.rows.len() == expected_rows => {}
                Ok(t) => report.violations.push(format!(
                    "partial read of `{id}`: {} of {expected_rows} rows",
                    t.rows.len()
                )),
                Err(e) => report.violations.push(format!("reading `{id}`: {e}")),
            }
            if !done {
                report.concurrent_reads += 1;
            }
        }
        if done {
            break;
        }
    }
    for h in writers {
        match h.join() {
            Ok(errors) => report.violations.extend(errors),
            Err(_) => report.violations.push("writer thread panicked".into()),
        }
    }
    let ids = store.table_ids()?;
    report.tables = ids.len();
    if ids.len() != total {
        report
            .violations
            .push(format!("expected {total} tables, found {}", ids.len()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extent() -> GridHeader {
        GridHeader {
            ncols: 5,
            nrows: 4,
            xll: 1000.0,
            yll: 2000.0,
            cellsize: 25.0,
            nodata: -9999.0,
        }
    }

    fn field(offset: (usize, usize), values: Vec<f64>, nrows: usize, ncols: usize) -> PathLossField {
        PathLossField {
            offset,
            grid: RasterGrid::new(extent().window(offset.0, offset.1, nrows, ncols), values)
                .unwrap(),
        }
    }

    #[test]
    fn empty_field_creates_empty_table() {
        let dir = tempfile::tempdir().unwrap();
        let store = DirStore::open(dir.path()).unwrap();
        store
            .put_table("a", &field((0, 0), vec![-9999.0; 4], 2, 2), &extent())
            .unwrap();
        assert_eq!(store.table_ids().unwrap(), vec!["a"]);
        assert!(store.read_table("a").unwrap().rows.is_empty());
    }

    #[test]
    fn single_cell_row_has_cell_center() {
        let dir = tempfile::tempdir().unwrap();
        let store = DirStore::open(dir.path()).unwrap();
        store
            .put_table("a", &field((1, 2), vec![75.09], 1, 1), &extent())
            .unwrap();
        let text = fs::read_to_string(dir.path().join("a.tsv")).unwrap();
        // Column 2 center: 1000 + 2.5·25; row 1 center: 2000 + (4 − 1.5)·25.
        assert_eq!(text, "1062.500000\t2062.500000\t75.090000\n");
    }

    #[test]
    fn duplicate_is_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let store = DirStore::open(dir.path()).unwrap();
        let f = field((0, 0), vec![1.0], 1, 1);
        store.put_table("a", &f, &extent()).unwrap();
        assert!(matches!(
            store.put_table("a", &f, &extent()),
            Err(Error::Conflict(id)) if id == "a"
        ));
    }

    #[test]
    fn empty_store_scans_to_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let store = DirStore::open(dir.path()).unwrap();
        let cov = scan_max(&store, &[], &extent()).unwrap();
        assert!(cov.values().iter().all(|v| *v == -9999.0));
    }

    #[test]
    fn unknown_table_is_domain_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = DirStore::open(dir.path()).unwrap();
        store
            .put_table("ghost", &field((0, 0), vec![1.0], 1, 1), &extent())
            .unwrap();
        assert!(matches!(scan_max(&store, &[], &extent()), Err(Error::Domain(_))));
    }

    #[test]
    fn malformed_row_is_store_error() {
        assert!(matches!(parse_rows("x", "1\t2\n"), Err(Error::Store(_))));
    }

    #[test]
    fn single_writer_single_table() {
        let dir = tempfile::tempdir().unwrap();
        let report = concurrent_write_stress(dir.path(), 1, 1, 10).unwrap();
        assert_eq!(report.tables, 1);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn racing_duplicate_yields_one_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(DirStore::open(dir.path()).unwrap());
        let f = Arc::new(field((0, 0), vec![5.0; 20], 4, 5));
        let barrier = Arc::new(Barrier::new(2));
        let handles: Vec<_> = (0..2)
            .map(|_| {
                let (store, f, barrier) = (store.clone(), f.clone(), barrier.clone());
                thread::spawn(move || {
                    barrier.wait();
                    store.put_table("dup", &f, &extent())
                })
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
        assert_eq!(
            results
                .iter()
                .filter(|r| matches!(r, Err(Error::Conflict(_))))
                .count(),
            1
        );
        assert_eq!(store.read_table("dup").unwrap().rows.len(), 20);
    }
}
