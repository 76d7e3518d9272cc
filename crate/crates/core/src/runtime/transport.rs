//! Message links between master and workers: in-process channels, TCP
//! frames, and a delay wrapper that emulates a slow network.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::codec::{read_message, write_message};
use super::message::Message;

/// Something the master hears from a worker.
#[derive(Debug)]
pub enum Inbound {
    Message(usize, Message),
    /// The worker's side of the link went away.
    Closed(usize),
}

pub trait MasterLink: Send {
    fn workers(&self) -> usize;
    fn send(&mut self, worker: usize, msg: Message) -> Result<()>;
    /// Blocks until a worker message or disconnect arrives.
    fn recv(&mut self) -> Result<Inbound>;
    fn try_recv(&mut self) -> Result<Option<Inbound>>;
}

pub trait WorkerLink: Send {
    fn send(&mut self, msg: Message) -> Result<()>;
    fn recv(&mut self) -> Result<Message>;
}

impl<L: MasterLink + ?Sized> MasterLink for Box<L> {
    fn workers(&self) -> usize {
        (**self).workers()
    }
    fn send(&mut self, worker: usize, msg: Message) -> Result<()> {
        (**self).send(worker, msg)
    }
    fn recv(&mut self) -> Result<Inbound> {
        (**self).recv()
    }
    fn try_recv(&mut self) -> Result<Option<Inbound>> {
        (**self).try_recv()
    }
}

impl<L: WorkerLink + ?Sized> WorkerLink for Box<L> {
    fn send(&mut self, msg: Message) -> Result<()> {
        (**self).send(msg)
    }
    fn recv(&mut self) -> Result<Message> {
        (**self).recv()
    }
}

enum Outbox {
    Channel(Sender<Message>),
    Tcp(BufWriter<TcpStream>),
}

/// Master end of a set of links, over either transport.
pub struct MasterHub {
    outboxes: Vec<Outbox>,
    inbox: Receiver<Inbound>,
}

impl MasterLink for MasterHub {
    fn workers(&self) -> usize {
        self.outboxes.len()
    }

    fn send(&mut self, worker: usize, msg: Message) -> Result<()> {
        let out = self
            .outboxes
            .get_mut(worker)
            .ok_or_else(|| Error::Protocol(format!("no worker {worker}")))?;
        match out {
            Outbox::Channel(tx) => tx
                .send(msg)
                .map_err(|_| Error::Protocol(format!("worker {worker} disconnected"))),
            Outbox::Tcp(w) => write_message(w, &msg).map_err(|e| {
                Error::Protocol(format!("sending to worker {worker}: {e}"))
            }),
        }
    }

    fn recv(&mut self) -> Result<Inbound> {
        self.inbox
            .recv()
            .map_err(|_| Error::Protocol("all workers disconnected".into()))
    }

    fn try_recv(&mut self) -> Result<Option<Inbound>> {
        match self.inbox.try_recv() {
            Ok(ev) => Ok(Some(ev)),
            Err(TryRecvError::Empty) => Ok(None),
            Err(TryRecvError::Disconnected) => {
                Err(Error::Protocol("all workers disconnected".into()))
            }
        }
    }
}

/// Worker end of an in-process link. Dropping it tells the master the
/// worker is gone.
pub struct ChannelWorker {
    id: usize,
    to_master: Sender<Inbound>,
    from_master: Receiver<Message>,
}

impl WorkerLink for ChannelWorker {
    fn send(&mut self, msg: Message) -> Result<()> {
        self.to_master
            .send(Inbound::Message(self.id, msg))
            .map_err(|_| Error::Protocol("master disconnected".into()))
    }

    fn recv(&mut self) -> Result<Message> {
        self.from_master
            .recv()
            .map_err(|_| Error::Protocol("master disconnected".into()))
    }
}

impl Drop for ChannelWorker {
    fn drop(&mut self) {
        let _ = self.to_master.send(Inbound::Closed(self.id));
    }
}

pub fn channel_links(workers: usize) -> (MasterHub, Vec<ChannelWorker>) {
    let (inbound_tx, inbox) = mpsc::channel();
    let mut outboxes = Vec::with_capacity(workers);
    let mut ends = Vec::with_capacity(workers);
    for id in 0..workers {
        let (tx, rx) = mpsc::channel();
        outboxes.push(Outbox::Channel(tx));
        ends.push(ChannelWorker {
            id,
            to_master: inbound_tx.clone(),
            from_master: rx,
        });
    }
    (MasterHub { outboxes, inbox }, ends)
}

fn resolve(endpoint: &str) -> Result<SocketAddr> {
    endpoint
        .to_socket_addrs()
        .map_err(|e| Error::Connect(format!("{endpoint}: {e}")))?
        .next()
        .ok_or_else(|| Error::Connect(format!("{endpoint}: no address")))
}

/// Dials every worker endpoint, retrying each until `timeout` elapses.
/// Fails listing every endpoint that could not be reached.
pub fn connect_workers(endpoints: &[String], timeout: Duration) -> Result<MasterHub> {
    if endpoints.is_empty() {
        return Err(Error::Config("no worker endpoints given".into()));
    }
    let deadline = Instant::now() + timeout;
    let mut streams = Vec::with_capacity(endpoints.len());
    let mut unreachable = Vec::new();
    for ep in endpoints {
        let addr = resolve(ep)?;
        loop {
            match TcpStream::connect_timeout(&addr, Duration::from_millis(500)) {
                Ok(s) => {
                    streams.push(s);
                    break;
                }
                Err(e) if Instant::now() >= deadline => {
                    unreachable.push(format!("{ep} ({e})"));
                    break;
                }
                Err(_) => thread::sleep(Duration::from_millis(50)),
            }
        }
    }
    if !unreachable.is_empty() {
        return Err(Error::Connect(format!(
            "unreachable workers: {}",
            unreachable.join(", ")
        )));
    }
    let (inbound_tx, inbox) = mpsc::channel();
    let mut outboxes = Vec::with_capacity(streams.len());
    for (id, stream) in streams.into_iter().enumerate() {
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let events = inbound_tx.clone();
        thread::spawn(move || loop {
            match read_message(&mut reader) {
                Ok(Some(msg)) => {
                    if events.send(Inbound::Message(id, msg)).is_err() {
                        return;
                    }
                }
                Ok(None) => {
                    let _ = events.send(Inbound::Closed(id));
                    return;
                }
                Err(e) => {
                    log::warn!("worker {id}: {e}");
                    let _ = events.send(Inbound::Closed(id));
                    return;
                }
            }
        });
        outboxes.push(Outbox::Tcp(BufWriter::new(stream)));
    }
    Ok(MasterHub { outboxes, inbox })
}

pub struct TcpWorkerLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpWorkerLink {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    /// Waits up to `timeout` for the master to connect.
    pub fn accept(listener: &TcpListener, timeout: Duration) -> Result<Self> {
        listener.set_nonblocking(true)?;
        let deadline = Instant::now() + timeout;
        loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    return Self::new(stream);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        let addr = listener
                            .local_addr()
                            .map(|a| a.to_string())
                            .unwrap_or_else(|_| "?".into());
                        return Err(Error::Connect(format!(
                            "no master connected to {addr} within {:.1} s",
                            timeout.as_secs_f64()
                        )));
                    }
                    thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(Error::Connect(e.to_string())),
            }
        }
    }
}

impl WorkerLink for TcpWorkerLink {
    fn send(&mut self, msg: Message) -> Result<()> {
        write_message(&mut self.writer, &msg)
    }

    fn recv(&mut self) -> Result<Message> {
        read_message(&mut self.reader)?
            .ok_or_else(|| Error::Protocol("master closed the connection".into()))
    }
}

/// Adds `fixed + U(0, jitter)` of latency before every send.
pub struct Delayed<L> {
    inner: L,
    fixed: Duration,
    jitter: Duration,
    rng: ChaCha8Rng,
}

impl<L> Delayed<L> {
    pub fn new(inner: L, fixed: Duration, jitter: Duration, seed: u64) -> Self {
        Self {
            inner,
            fixed,
            jitter,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn pause(&mut self) {
        let extra = if self.jitter.is_zero() {
            Duration::ZERO
        } else {
            self.jitter.mul_f64(self.rng.gen::<f64>())
        };
        let d = self.fixed + extra;
        if !d.is_zero() {
            thread::sleep(d);
        }
    }
}

impl<L: MasterLink> MasterLink for Delayed<L> {
    fn workers(&self) -> usize {
        self.inner.workers()
    }
    fn send(&mut self, worker: usize, msg: Message) -> Result<()> {
        self.pause();
        self.inner.send(worker, msg)
    }
    fn recv(&mut self) -> Result<Inbound> {
        self.inner.recv()
    }
    fn try_recv(&mut self) -> Result<Option<Inbound>> {
        self.inner.try_recv()
    }
}

impl<L: WorkerLink> WorkerLink for Delayed<L> {
    fn send(&mut self, msg: Message) -> Result<()> {
        self.pause();
        self.inner.send(msg)
    }
    fn recv(&mut self) -> Result<Message> {
        self.inner.recv()
    }
}
