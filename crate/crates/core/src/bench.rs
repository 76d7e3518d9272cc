//! Wall-clock scaling measurements for the master/worker runtime.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::engine::Scenario;
use crate::error::{Error, Result};
use crate::runtime::{run_local, LocalOptions, RunMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub mode: RunMode,
    /// Number of worker processes, NP.
    pub workers: usize,
    pub tx_count: usize,
    pub wall_clock_s: f64,
}

/// `base.wall_clock_s / run.wall_clock_s`, where `base` is the same run
/// mode and transmitter count on one worker.
pub fn speedup(base: &RunRecord, run: &RunRecord) -> Result<f64> {
    if base.workers != 1 {
        return Err(Error::domain(format!(
            "speedup base must use 1 worker, not {}",
            base.workers
        )));
    }
    if base.mode != run.mode || base.tx_count != run.tx_count {
        return Err(Error::domain(format!(
            "cannot compare {} run with {} transmitters against {} base with {}",
            run.mode, run.tx_count, base.mode, base.tx_count
        )));
    }
    if !(base.wall_clock_s > 0.0 && run.wall_clock_s > 0.0) {
        return Err(Error::domain("wall-clock times must be positive"));
    }
    Ok(base.wall_clock_s / run.wall_clock_s)
}

pub fn efficiency(speedup: f64, np: usize) -> Result<f64> {
    if np == 0 {
        return Err(Error::domain("worker count must be at least 1"));
    }
    Ok(speedup / np as f64)
}

/// Relative advantage of MWD over MW in percent.
pub fn gain_pct(mw_s: f64, mwd_s: f64) -> f64 {
    (mw_s - mwd_s) / mw_s * 100.0
}

pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub modes: Vec<RunMode>,
    pub np_list: Vec<usize>,
    pub repetitions: usize,
    pub master_delay: Duration,
    pub link_delay: Duration,
    pub persist_latency: Duration,
}

impl SweepConfig {
    pub fn new(np_list: Vec<usize>, repetitions: usize) -> Self {
        Self {
            modes: vec![RunMode::Mw, RunMode::Mwd],
            np_list,
            repetitions,
            master_delay: Duration::ZERO,
            link_delay: Duration::ZERO,
            persist_latency: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub mode: RunMode,
    pub np: usize,
    pub tx: usize,
    pub best_s: f64,
    pub median_s: f64,
    pub speedup: f64,
    pub efficiency: f64,
    /// Defined when both modes were measured at this worker count.
    pub gain_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<String>,
}

pub const REPORT_HEADER: &str = "mode\tnp\ttx\tbest_s\tmedian_s\tspeedup\tefficiency\tgain_pct";

impl ScalingReport {
    pub fn row(&self, mode: RunMode, np: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.mode == mode && r.np == np)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let gain = r.gain_pct.map_or_else(|| "NA".to_string(), |g| format!("{g:.3}"));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{gain}",
                r.mode, r.np, r.tx, r.best_s, r.median_s, r.speedup, r.efficiency
            );
        }
        for f in &self.failures {
            let _ = writeln!(out, "# failed: {f}");
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut report = ScalingReport::default();
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(REPORT_HEADER) {
            return Err(Error::parse("report header missing"));
        }
        for (n, line) in lines.enumerate() {
            if let Some(f) = line.strip_prefix("# failed: ") {
                report.failures.push(f.to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::parse(format!("report line {}: `{line}`", n + 2));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 8 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            report.rows.push(ReportRow {
                mode: cols[0].parse().map_err(|_| bad())?,
                np: cols[1].parse().map_err(|_| bad())?,
                tx: cols[2].parse().map_err(|_| bad())?,
                best_s: num(cols[3])?,
                median_s: num(cols[4])?,
                speedup: num(cols[5])?,
                efficiency: num(cols[6])?,
                gain_pct: match cols[7] {
                    "NA" => None,
                    g => Some(num(g)?),
                },
            });
        }
        Ok(report)
    }
}

/// Builds report rows from raw run records: best and median per
/// (mode, np), speedup and efficiency from the best times against the
/// one-worker run of the same mode, and the MW/MWD gain per np.
pub fn summarize(records: &[RunRecord]) -> Result<ScalingReport> {
    let mut groups: BTreeMap<(u8, usize), (RunMode, usize, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if !(r.wall_clock_s > 0.0) {
            return Err(Error::domain("wall-clock times must be positive"));
        }
        let key = (r.mode as u8, r.workers);
        let entry = groups.entry(key).or_insert((r.mode, r.tx_count, Vec::new()));
        if entry.1 != r.tx_count {
            return Err(Error::domain("records mix transmitter counts"));
        }
        entry.2.push(r.wall_clock_s);
    }
    let best = |times: &[f64]| times.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    for (&(_, np), (mode, tx, times)) in &groups {
        let base_times = &groups
            .get(&(*mode as u8, 1))
            .ok_or_else(|| Error::domain(format!("no 1-worker {mode} run to use as base")))?
            .2;
        let base = RunRecord {
            mode: *mode,
            workers: 1,
            tx_count: *tx,
            wall_clock_s: best(base_times),
        };
        let run = RunRecord {
            workers: np,
            wall_clock_s: best(times),
            ..base
        };
        let s = speedup(&base, &run)?;
        rows.push(ReportRow {
            mode: *mode,
            np,
            tx: *tx,
            best_s: run.wall_clock_s,
            median_s: median(times).expect("non-empty group"),
            speedup: s,
            efficiency: efficiency(s, np)?,
            gain_pct: None,
        });
    }
    let best_of = |rows: &[ReportRow], mode, np| {
        rows.iter()
            .find(|r| r.mode == mode && r.np == np)
            .map(|r| r.best_s)
    };
    let gains: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            let mw = best_of(&rows, RunMode::Mw, r.np)?;
            let mwd = best_of(&rows, RunMode::Mwd, r.np)?;
            Some(gain_pct(mw, mwd))
        })
        .collect();
    for (r, g) in rows.iter_mut().zip(gains) {
        r.gain_pct = g;
    }
    Ok(ScalingReport {
        rows,
        failures: Vec::new(),
    })
}

/// Times `repetitions` local runs for every (mode, np) pair. Individual
/// run failures are listed in the report instead of aborting the sweep.
pub fn scaling_sweep(scenario: &Scenario, cfg: &SweepConfig) -> Result<(ScalingReport, Vec<RunRecord>)> {
    if cfg.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    if !cfg.np_list.contains(&1) {
        return Err(Error::Config(
            "worker list must include 1 to provide the speedup base".into(),
        ));
    }
    if cfg.np_list.contains(&0) {
        return Err(Error::Config("worker counts must be at least 1".into()));
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &mode in &cfg.modes {
        for &np in &cfg.np_list {
            for rep in 0..cfg.repetitions {
                let opts = LocalOptions {
                    master_delay: cfg.master_delay,
                    link_delay: cfg.link_delay,
                    persist_latency: cfg.persist_latency,
                    seed: rep as u64,
                    ..LocalOptions::new(np, mode)
                };
                let start = Instant::now();
                match run_local(scenario, &opts) {
                    Ok(_) => records.push(RunRecord {
                        mode,
                        workers: np,
                        tx_count: scenario.transmitters.len(),
                        wall_clock_s: start.elapsed().as_secs_f64(),
                    }),
                    Err(e) => failures.push(format!("{mode} np={np} rep={rep}: {e}")),
                }
                log::info!("{mode} np={np} rep={rep} done");
            }
        }
    }
    let mut report = summarize(&records)?;
    report.failures = failures;
    Ok((report, records))
}
