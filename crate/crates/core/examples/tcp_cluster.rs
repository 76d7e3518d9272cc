//! Two workers listening on loopback sockets, driven by a master that
//! dials them, all inside one process.

use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use radiocov::runtime::{
    connect_workers, master_run, worker_run, MasterOptions, RunMode, TcpWorkerLink,
    WorkerOptions,
};
use radiocov::synthetic::{hilly_scenario, NetworkSpec};

fn main() -> radiocov::Result<()> {
    let scenario = hilly_scenario(&NetworkSpec::small(5));
    let mut endpoints = Vec::new();
    let mut handles = Vec::new();
    for id in 0..2u32 {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        endpoints.push(listener.local_addr().expect("addr").to_string());
        handles.push(thread::spawn(move || {
            let mut link = TcpWorkerLink::accept(&listener, Duration::from_secs(10))?;
            worker_run(&mut link, &WorkerOptions::new(id))
        }));
    }

    let mut hub = connect_workers(&endpoints, Duration::from_secs(5))?;
    let report = master_run(&scenario, &mut hub, &MasterOptions::new(RunMode::Mw))?;
    drop(hub);
    for h in handles {
        let w = h.join().expect("worker thread")?;
        println!("worker {} computed {} transmitters", w.worker_id, w.timings.len());
    }
    println!(
        "master: {} messages traced, wall {:?}",
        report.trace.len(),
        report.wall
    );
    Ok(())
}
