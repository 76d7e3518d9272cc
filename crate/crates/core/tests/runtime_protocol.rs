use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use radiocov::engine::{predict_serial, Scenario};
use radiocov::runtime::{
    channel_links, connect_workers, master_run, pair_audit, run_local, worker_run, Direction,
    LocalOptions, MasterLink, MasterOptions, MessageKind, RunMode, TcpWorkerLink, WorkerLink,
    WorkerOptions,
};
use radiocov::store::{DirStore, ResultStore};
use radiocov::synthetic::{hilly_scenario, NetworkSpec};
use radiocov::Error;

fn scenario(n: usize) -> Scenario {
    hilly_scenario(&NetworkSpec::small(n))
}

fn kinds_for(trace: &[radiocov::runtime::TraceEvent], w: usize) -> Vec<(Direction, MessageKind)> {
    trace
        .iter()
        .filter(|e| e.worker == w)
        .map(|e| (e.direction, e.kind))
        .collect()
}

#[test]
fn no_transmitters_stops_every_worker_at_once() {
    let s = scenario(0);
    let run = run_local(&s, &LocalOptions::new(3, RunMode::Mw)).unwrap();
    for w in 0..3 {
        assert_eq!(
            kinds_for(&run.master.trace, w),
            [
                (Direction::ToWorker, MessageKind::Metadata),
                (Direction::FromWorker, MessageKind::Idle),
                (Direction::ToWorker, MessageKind::Stop),
            ]
        );
    }
    let sentinel = run.master.raster.nodata();
    assert!(run.master.raster.values().iter().all(|v| *v == sentinel));
}

#[test]
fn single_worker_sees_the_canonical_sequence() {
    use Direction::*;
    use MessageKind::*;
    let s = scenario(3);
    let run = run_local(&s, &LocalOptions::new(1, RunMode::Mw)).unwrap();
    let mut expected = vec![(ToWorker, Metadata)];
    for i in 0..3 {
        if i > 0 {
            expected.push((FromWorker, Result));
        }
        expected.extend([(FromWorker, Idle), (ToWorker, KeepAlive), (ToWorker, Assignment)]);
    }
    expected.extend([(FromWorker, Result), (FromWorker, Idle), (ToWorker, Stop)]);
    assert_eq!(kinds_for(&run.master.trace, 0), expected);
    let ids: Vec<_> = run.master.trace.iter().filter_map(|e| e.tx_id.clone()).collect();
    assert_eq!(ids.len(), 6);
    assert!(pair_audit(&run.master.trace).is_empty());
}

#[test]
fn mwd_single_assignment_populates_store() {
    let s = scenario(1);
    let dir = tempfile::tempdir().unwrap();
    let mut opts = LocalOptions::new(1, RunMode::Mwd);
    opts.store_dir = Some(dir.path().to_path_buf());
    let run = run_local(&s, &opts).unwrap();
    let store = DirStore::open(dir.path()).unwrap();
    assert_eq!(store.table_ids().unwrap(), vec![s.transmitters[0].id.clone()]);
    assert_eq!(run.master.raster, predict_serial(&s).unwrap());
    assert!(!run
        .master
        .trace
        .iter()
        .any(|e| e.kind == MessageKind::Result));
}

#[test]
fn mwd_persists_while_computing_the_next_transmitter() {
    let s = hilly_scenario(&NetworkSpec {
        nrows: 161,
        ncols: 161,
        radius_km: 1.5,
        ..NetworkSpec::small(3)
    });
    let mut opts = LocalOptions::new(1, RunMode::Mwd);
    opts.persist_latency = Duration::from_millis(150);
    let run = run_local(&s, &opts).unwrap();
    let t = &run.workers[0].timings;
    assert_eq!(t.len(), 3, "{t:#?}");
    assert!(t[0].persist_start.unwrap() < t[1].compute_end, "{t:#?}");
    assert!(t.iter().all(|a| a.persist_end.is_some()));
}

#[test]
fn mwd_refuses_a_non_empty_store() {
    let s = scenario(2);
    let dir = tempfile::tempdir().unwrap();
    let mut opts = LocalOptions::new(1, RunMode::Mwd);
    opts.store_dir = Some(dir.path().to_path_buf());
    run_local(&s, &opts).unwrap();
    let err = run_local(&s, &opts).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn worker_rejects_mode_mismatch() {
    let s = scenario(1);
    let (mut hub, mut links) = channel_links(1);
    let mut link = links.pop().unwrap();
    let h = thread::spawn(move || {
        let mut opts = WorkerOptions::new(0);
        opts.expect_mode = Some(RunMode::Mwd);
        worker_run(&mut link, &opts)
    });
    let master = master_run(&s, &mut hub, &MasterOptions::new(RunMode::Mw));
    assert!(h.join().unwrap().is_err());
    assert!(master.is_err());
}

#[test]
fn vanished_worker_fails_the_run() {
    let s = scenario(2);
    let (mut hub, mut links) = channel_links(1);
    let link = links.pop().unwrap();
    let h = thread::spawn(move || {
        let mut link = link;
        let _ = link.recv();
        link.send(radiocov::runtime::Message::Idle { worker_id: 0 }).unwrap();
        let _ = link.recv();
        let _ = link.recv();
    });
    let err = master_run(&s, &mut hub, &MasterOptions::new(RunMode::Mw)).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, Error::Protocol(_)), "{err}");
    assert_eq!(hub.workers(), 1);
}

#[test]
fn tcp_workers_produce_the_serial_raster() {
    let s = scenario(6);
    for mode in [RunMode::Mw, RunMode::Mwd] {
        let dir = tempfile::tempdir().unwrap();
        let store: Arc<dyn ResultStore> = Arc::new(DirStore::open(dir.path()).unwrap());
        let mut endpoints = Vec::new();
        let mut handles = Vec::new();
        for id in 0..2 {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            endpoints.push(listener.local_addr().unwrap().to_string());
            let store = Arc::clone(&store);
            handles.push(thread::spawn(move || {
                let mut link = TcpWorkerLink::accept(&listener, Duration::from_secs(10))?;
                let mut opts = WorkerOptions::new(id);
                opts.store = Some(store);
                worker_run(&mut link, &opts)
            }));
        }
        let mut hub = connect_workers(&endpoints, Duration::from_secs(5)).unwrap();
        let mut opts = MasterOptions::new(mode);
        opts.store = Some(Arc::clone(&store));
        let report = master_run(&s, &mut hub, &opts).unwrap();
        drop(hub);
        let done: usize = handles
            .into_iter()
            .map(|h| h.join().unwrap().unwrap().timings.len())
            .sum();
        assert_eq!(done, 6);
        assert_eq!(report.raster, predict_serial(&s).unwrap(), "{mode}");
        assert!(pair_audit(&report.trace).is_empty());
    }
}
