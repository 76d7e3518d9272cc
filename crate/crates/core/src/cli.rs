//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 connectivity
//! failure, 4 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::bench::{scaling_sweep, SweepConfig};
use crate::engine::{predict_serial, CoverageRaster, Scenario};
use crate::error::{Error, Result};
use crate::propagation::PropagationParams;
use crate::runtime::{
    connect_workers, master_run, run_local, worker_run, Delayed, LocalOptions, MasterOptions,
    RunMode, TcpWorkerLink, WorkerOptions,
};
use crate::store::{DirStore, ResultStore};
use crate::terrain::write_ascii_grid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "radiocov", version, about = "Radio coverage prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict coverage in a single process.
    PredictSerial {
        #[command(flatten)]
        inputs: InputArgs,
        /// Output coverage raster (ESRI ASCII grid).
        #[arg(long)]
        output: PathBuf,
    },
    /// Predict coverage with a master and a pool of workers.
    PredictParallel {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        run: ParallelArgs,
    },
    /// Serve a master over TCP until it sends Stop.
    Worker {
        /// Address to listen on, e.g. 0.0.0.0:7070.
        #[arg(long)]
        listen: String,
        /// Refuse to serve a master running a different mode.
        #[arg(long)]
        mode: Option<RunMode>,
        /// Result store run directory (MWD).
        #[arg(long)]
        store_dir: Option<PathBuf>,
        /// Seconds to wait for the master to connect.
        #[arg(long, default_value_t = 60.0)]
        wait_s: f64,
        #[arg(long, default_value_t = 0)]
        inject_persist_latency_ms: u64,
        #[arg(long, default_value_t = 0)]
        inject_link_delay_ms: u64,
    },
    /// Time local runs over a range of worker counts and write a TSV report.
    Bench {
        #[command(flatten)]
        inputs: InputArgs,
        /// Report path.
        #[arg(long)]
        output: PathBuf,
        /// Worker counts; must include 1.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        np_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, value_delimiter = ',', default_value = "mw,mwd")]
        modes: Vec<RunMode>,
        #[arg(long, default_value_t = 0)]
        inject_master_delay_ms: u64,
        #[arg(long, default_value_t = 0)]
        inject_link_delay_ms: u64,
        #[arg(long, default_value_t = 0)]
        inject_persist_latency_ms: u64,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Terrain heights (ESRI ASCII grid).
    #[arg(long)]
    dem: PathBuf,
    /// Land-usage codes aligned with the DEM.
    #[arg(long)]
    clutter: PathBuf,
    /// Table of `code loss_db` lines.
    #[arg(long)]
    clutter_losses: PathBuf,
    /// Transmitter CSV.
    #[arg(long)]
    transmitters: PathBuf,
    /// Directory of antenna diagram files.
    #[arg(long)]
    diagrams: PathBuf,
    /// Default carrier frequency; a CSV value overrides it.
    #[arg(long, default_value_t = PropagationParams::default().frequency_mhz)]
    frequency_mhz: f64,
    #[arg(long, default_value_t = PropagationParams::default().rx_height_m)]
    rx_height_m: f64,
    /// Default prediction radius; a CSV value overrides it.
    #[arg(long, default_value_t = PropagationParams::default().radius_m / 1000.0)]
    radius_km: f64,
}

#[derive(Debug, Args)]
struct ParallelArgs {
    #[arg(long, default_value = "mw")]
    mode: RunMode,
    /// Remote worker endpoints, host:port[,...].
    #[arg(long, value_delimiter = ',', conflicts_with = "local_workers")]
    workers: Vec<String>,
    /// Spawn N in-process workers instead of dialing remote ones.
    #[arg(long)]
    local_workers: Option<usize>,
    /// Result store run directory; required in MWD mode.
    #[arg(long)]
    store_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    inject_master_delay_ms: u64,
    #[arg(long, default_value_t = 0)]
    inject_link_delay_ms: u64,
    #[arg(long, default_value_t = 0)]
    inject_persist_latency_ms: u64,
    /// Seconds to keep retrying worker endpoints at startup.
    #[arg(long, default_value_t = 10.0)]
    connect_timeout_s: f64,
}

/// Where workers come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkerPool {
    Remote(Vec<String>),
    Local(usize),
}

/// Validated inputs for a prediction run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dem_path: PathBuf,
    pub clutter_path: PathBuf,
    pub clutter_loss_table_path: PathBuf,
    pub tx_csv_path: PathBuf,
    pub diagram_dir: PathBuf,
    pub output_path: PathBuf,
    pub params: PropagationParams,
    pub mode: RunMode,
    pub workers: WorkerPool,
    pub store_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (label, path) in [
            ("DEM", &self.dem_path),
            ("clutter raster", &self.clutter_path),
            ("clutter loss table", &self.clutter_loss_table_path),
            ("transmitter CSV", &self.tx_csv_path),
            ("diagram directory", &self.diagram_dir),
        ] {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{label} not found: {}",
                    path.display()
                )));
            }
        }
        self.params.validate()?;
        if self.mode == RunMode::Mwd && self.store_dir.is_none() {
            return Err(Error::Config("MWD mode requires --store-dir".into()));
        }
        match &self.workers {
            WorkerPool::Local(0) => Err(Error::Config("--local-workers must be at least 1".into())),
            WorkerPool::Remote(eps) if eps.is_empty() => Err(Error::Config(
                "give --workers host:port[,...] or --local-workers N".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn load_scenario(&self) -> Result<Scenario> {
        Scenario::load(
            &self.dem_path,
            &self.clutter_path,
            &self.clutter_loss_table_path,
            &self.tx_csv_path,
            &self.diagram_dir,
            self.params,
        )
    }
}

impl InputArgs {
    fn params(&self) -> PropagationParams {
        PropagationParams {
            frequency_mhz: self.frequency_mhz,
            rx_height_m: self.rx_height_m,
            radius_m: self.radius_km * 1000.0,
            ..PropagationParams::default()
        }
    }

    fn config(&self, output: &Path, mode: RunMode, workers: WorkerPool, store_dir: Option<PathBuf>) -> RunConfig {
        RunConfig {
            dem_path: self.dem.clone(),
            clutter_path: self.clutter.clone(),
            clutter_loss_table_path: self.clutter_losses.clone(),
            tx_csv_path: self.transmitters.clone(),
            diagram_dir: self.diagrams.clone(),
            output_path: output.to_path_buf(),
            params: self.params(),
            mode,
            workers,
            store_dir,
        }
    }
}

fn ms(v: u64) -> Duration {
    Duration::from_millis(v)
}

fn secs(v: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(v).map_err(|_| Error::Config(format!("invalid duration {v} s")))
}

fn write_output(raster: &CoverageRaster, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::File {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    write_ascii_grid(raster, path)
}

pub fn cmd_predict_serial(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let scenario = cfg.load_scenario()?;
    let raster = predict_serial(&scenario)?;
    write_output(&raster, &cfg.output_path)
}

/// Injected delays for parallel runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Injection {
    pub master_delay: Duration,
    pub link_delay: Duration,
    pub persist_latency: Duration,
}

pub fn cmd_predict_parallel(cfg: &RunConfig, inject: Injection, connect_timeout: Duration) -> Result<()> {
    cfg.validate()?;
    let scenario = cfg.load_scenario()?;
    let raster = match &cfg.workers {
        WorkerPool::Local(n) => {
            let opts = LocalOptions {
                master_delay: inject.master_delay,
                link_delay: inject.link_delay,
                persist_latency: inject.persist_latency,
                store_dir: cfg.store_dir.clone(),
                ..LocalOptions::new(*n, cfg.mode)
            };
            run_local(&scenario, &opts)?.master.raster
        }
        WorkerPool::Remote(endpoints) => {
            let store: Option<Arc<dyn ResultStore>> = match &cfg.store_dir {
                Some(d) if cfg.mode == RunMode::Mwd => Some(Arc::new(DirStore::open(d)?)),
                _ => None,
            };
            let hub = connect_workers(endpoints, connect_timeout)?;
            let mut link = Delayed::new(hub, inject.link_delay, Duration::ZERO, 0);
            let opts = MasterOptions {
                mode: cfg.mode,
                result_delay: inject.master_delay,
                store,
            };
            master_run(&scenario, &mut link, &opts)?.raster
        }
    };
    write_output(&raster, &cfg.output_path)
}

pub fn cmd_worker(
    listen: &str,
    mode: Option<RunMode>,
    store_dir: Option<&Path>,
    wait: Duration,
    inject: Injection,
) -> Result<()> {
    let listener =
        TcpListener::bind(listen).map_err(|e| Error::Connect(format!("binding {listen}: {e}")))?;
    println!("listening on {}", listener.local_addr()?);
    let link = TcpWorkerLink::accept(&listener, wait)?;
    let mut link = Delayed::new(link, inject.link_delay, Duration::ZERO, 0);
    let store: Option<Arc<dyn ResultStore>> = match store_dir {
        Some(d) => Some(Arc::new(DirStore::open(d)?)),
        None => None,
    };
    let opts = WorkerOptions {
        worker_id: std::process::id(),
        expect_mode: mode,
        store,
        persist_latency: inject.persist_latency,
    };
    let report = worker_run(&mut link, &opts)?;
    log::info!(
        "worker finished {} assignments in {:.3} s",
        report.timings.len(),
        report.wall.as_secs_f64()
    );
    Ok(())
}

pub fn cmd_bench(cfg: &RunConfig, sweep: &SweepConfig) -> Result<()> {
    RunConfig {
        mode: RunMode::Mw,
        workers: WorkerPool::Local(1),
        ..cfg.clone()
    }
    .validate()?;
    let scenario = cfg.load_scenario()?;
    let (report, _) = scaling_sweep(&scenario, sweep)?;
    let text = report.to_tsv();
    print!("{text}");
    fs::write(&cfg.output_path, text).map_err(|e| Error::File {
        path: cfg.output_path.clone(),
        source: e,
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PredictSerial { inputs, output } => {
            let cfg = inputs.config(&output, RunMode::Mw, WorkerPool::Local(1), None);
            cmd_predict_serial(&cfg)
        }
        Command::PredictParallel {
            inputs,
            output,
            run,
        } => {
            let pool = match run.local_workers {
                Some(n) => WorkerPool::Local(n),
                None => WorkerPool::Remote(run.workers.clone()),
            };
            let cfg = inputs.config(&output, run.mode, pool, run.store_dir.clone());
            let inject = Injection {
                master_delay: ms(run.inject_master_delay_ms),
                link_delay: ms(run.inject_link_delay_ms),
                persist_latency: ms(run.inject_persist_latency_ms),
            };
            cmd_predict_parallel(&cfg, inject, secs(run.connect_timeout_s)?)
        }
        Command::Worker {
            listen,
            mode,
            store_dir,
            wait_s,
            inject_persist_latency_ms,
            inject_link_delay_ms,
        } => cmd_worker(
            &listen,
            mode,
            store_dir.as_deref(),
            secs(wait_s)?,
            Injection {
                persist_latency: ms(inject_persist_latency_ms),
                link_delay: ms(inject_link_delay_ms),
                ..Injection::default()
            },
        ),
        Command::Bench {
            inputs,
            output,
            np_list,
            repetitions,
            modes,
            inject_master_delay_ms,
            inject_link_delay_ms,
            inject_persist_latency_ms,
        } => {
            let cfg = inputs.config(&output, RunMode::Mw, WorkerPool::Local(1), None);
            let sweep = SweepConfig {
                modes,
                np_list,
                repetitions,
                master_delay: ms(inject_master_delay_ms),
                link_delay: ms(inject_link_delay_ms),
                persist_latency: ms(inject_persist_latency_ms),
            };
            cmd_bench(&cfg, &sweep)
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
