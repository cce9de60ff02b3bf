//! WebSocket front end and the fixed-rate simulation loop.
//!
//! Clients connect to `/left` or `/right`. The loop owns both simulators;
//! connection tasks talk to it only through ordered channels.

use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use cdpr_core::config::{Config, GeometryFile};
use cdpr_core::kinematics::CdprGeometry;
use cdpr_core::sim::protocol::{ClientMessage, ConfigSnapshot, OperatorInput, ServerMessage};
use cdpr_core::sim::record::{RecordHeader, RecordWriter};
use cdpr_core::sim::{Arm, Simulator};
use futures_util::{SinkExt, StreamExt};
use log::{debug, info, warn};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::handshake::server::{Request, Response};
use tokio_tungstenite::tungstenite::Message;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] cdpr_core::Error),
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// `host:port`; port 0 picks a free port.
    pub addr: String,
    pub config: Config,
    pub geometry: CdprGeometry,
    pub seed: u64,
    pub record: Option<PathBuf>,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

impl ServeOptions {
    pub fn new(config: Config, geometry: CdprGeometry) -> Self {
        Self {
            addr: "127.0.0.1:0".into(),
            config,
            geometry,
            seed: 0,
            record: None,
            max_ticks: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServeSummary {
    pub ticks: u64,
    pub mean_tick_micros: f64,
    pub max_tick_micros: f64,
    pub record: Option<PathBuf>,
}

type Outbox = mpsc::UnboundedSender<Message>;

struct Shared {
    clients: Mutex<[Option<Outbox>; 2]>,
    inputs: [mpsc::UnboundedSender<OperatorInput>; 2],
    snapshots: [ConfigSnapshot; 2],
}

pub struct Server {
    local_addr: SocketAddr,
    stop: watch::Sender<bool>,
    sim: JoinHandle<Result<ServeSummary, ServeError>>,
    accept: JoinHandle<()>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops the loop, flushes the record and returns the run summary.
    pub async fn shutdown(self) -> Result<ServeSummary, ServeError> {
        let _ = self.stop.send(true);
        self.finish().await
    }

    /// Waits for the loop to end on its own (tick limit) or through a
    /// [`Server::stopper`] handle.
    pub async fn wait(self) -> Result<ServeSummary, ServeError> {
        self.finish().await
    }

    /// Handle that can request a stop from elsewhere.
    pub fn stopper(&self) -> watch::Sender<bool> {
        self.stop.clone()
    }

    async fn finish(self) -> Result<ServeSummary, ServeError> {
        self.accept.abort();
        match self.sim.await {
            Ok(r) => r,
            Err(e) => Err(ServeError::Io(std::io::Error::other(e))),
        }
    }
}

fn snapshot(sim: &Simulator, geometry: &CdprGeometry) -> ConfigSnapshot {
    let c = sim.config();
    ConfigSnapshot {
        arm: sim.arm(),
        dt: c.sim.dt,
        broadcast_every: c.sim.broadcast_every,
        geometry: GeometryFile::from_geometry(geometry),
        wall: sim.wall(),
        f_min: c.statics.f_min,
        scale: c.session.scale,
        latency: [c.sim.latency_min, c.sim.latency_max],
        seed: sim.seed(),
    }
}

fn to_text(m: &ServerMessage) -> Message {
    Message::text(serde_json::to_string(m).expect("server messages serialize"))
}

/// Binds the listener and starts the accept and simulation tasks.
pub async fn start(opts: ServeOptions) -> Result<Server, ServeError> {
    let listener = TcpListener::bind(&opts.addr).await.map_err(|source| ServeError::Bind {
        addr: opts.addr.clone(),
        source,
    })?;
    let local_addr = listener.local_addr()?;

    let sims: Vec<Simulator> = Arm::ALL
        .iter()
        .map(|&a| Simulator::new(opts.config.clone(), opts.geometry.clone(), a, opts.seed))
        .collect::<Result<_, _>>()?;
    let writer = match &opts.record {
        Some(p) => {
            let header = RecordHeader::new(
                opts.seed,
                Arm::ALL.to_vec(),
                opts.config.clone(),
                GeometryFile::from_geometry(&opts.geometry),
            );
            Some(RecordWriter::new(BufWriter::new(File::create(p)?), &header)?)
        }
        None => None,
    };

    let (left_tx, left_rx) = mpsc::unbounded_channel();
    let (right_tx, right_rx) = mpsc::unbounded_channel();
    let shared = Arc::new(Shared {
        clients: Mutex::new([None, None]),
        inputs: [left_tx, right_tx],
        snapshots: [snapshot(&sims[0], &opts.geometry), snapshot(&sims[1], &opts.geometry)],
    });
    let (stop, stop_rx) = watch::channel(false);

    info!("serving on ws://{local_addr}/left and /right");
    let accept = tokio::spawn(accept_loop(listener, shared.clone()));
    let sim = tokio::spawn(sim_loop(
        sims,
        [left_rx, right_rx],
        shared,
        writer,
        stop_rx,
        opts.max_ticks,
        opts.record.clone(),
    ));
    Ok(Server {
        local_addr,
        stop,
        sim,
        accept,
    })
}

async fn sim_loop(
    mut sims: Vec<Simulator>,
    mut inputs: [mpsc::UnboundedReceiver<OperatorInput>; 2],
    shared: Arc<Shared>,
    mut writer: Option<RecordWriter<BufWriter<File>>>,
    mut stop: watch::Receiver<bool>,
    max_ticks: Option<u64>,
    record: Option<PathBuf>,
) -> Result<ServeSummary, ServeError> {
    let dt = sims[0].dt();
    let every = u64::from(sims[0].config().sim.broadcast_every.max(1));
    let mut interval = tokio::time::interval(Duration::from_secs_f64(dt));
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut summary = ServeSummary {
        record,
        ..Default::default()
    };
    let mut total = 0.0;

    loop {
        tokio::select! {
            _ = interval.tick() => {}
            _ = stop.changed() => break,
        }
        if *stop.borrow() {
            break;
        }
        let started = Instant::now();
        let mut updates = Vec::new();
        for (k, sim) in sims.iter_mut().enumerate() {
            let input = inputs[k].try_recv().ok();
            let rec = sim.step(input.as_ref());
            if let Some(w) = writer.as_mut() {
                w.write_tick(&rec)?;
            }
            if rec.tick % every == 0 {
                updates.push((k, ServerMessage::StateUpdate(rec)));
            }
        }
        let micros = started.elapsed().as_secs_f64() * 1e6;
        total += micros;
        summary.ticks += 1;
        summary.max_tick_micros = summary.max_tick_micros.max(micros);

        if !updates.is_empty() {
            let clients = shared.clients.lock().expect("client table lock");
            for (k, m) in updates {
                if let Some(out) = &clients[k] {
                    let _ = out.send(to_text(&m));
                }
            }
        }
        if max_ticks.is_some_and(|n| summary.ticks >= n) {
            break;
        }
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    summary.mean_tick_micros = total / summary.ticks.max(1) as f64;
    info!(
        "stopped after {} ticks (mean {:.1} us, max {:.1} us per tick)",
        summary.ticks, summary.mean_tick_micros, summary.max_tick_micros
    );
    Ok(summary)
}

async fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                tokio::spawn(handle_connection(stream, peer, shared.clone()));
            }
            Err(e) => warn!("accept failed: {e}"),
        }
    }
}

async fn handle_connection(stream: TcpStream, peer: SocketAddr, shared: Arc<Shared>) {
    let mut path = String::new();
    let callback = |req: &Request, resp: Response| {
        path = req.uri().path().to_string();
        Ok(resp)
    };
    let ws = match tokio_tungstenite::accept_hdr_async(stream, callback).await {
        Ok(ws) => ws,
        Err(e) => {
            debug!("handshake with {peer} failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();

    let arm = Arm::from_name(path.trim_matches('/'));
    let Some(arm) = arm else {
        let nack = ServerMessage::Nack {
            reason: format!("unknown path {path:?}; use /left or /right"),
        };
        let _ = sink.send(to_text(&nack)).await;
        let _ = sink.close().await;
        return;
    };
    let k = arm.index();

    let (out, mut outbox) = mpsc::unbounded_channel::<Message>();
    let registered = {
        let mut clients = shared.clients.lock().expect("client table lock");
        if clients[k].is_some() {
            false
        } else {
            // Queue the snapshot before any state update can be broadcast.
            let _ = out.send(to_text(&ServerMessage::ConfigSnapshot(shared.snapshots[k].clone())));
            clients[k] = Some(out.clone());
            true
        }
    };
    if !registered {
        let nack = ServerMessage::Nack {
            reason: format!("{arm} arm already has a client"),
        };
        let _ = sink.send(to_text(&nack)).await;
        let _ = sink.close().await;
        return;
    }
    info!("{peer} connected to the {arm} arm");

    let writer = tokio::spawn(async move {
        while let Some(m) = outbox.recv().await {
            if sink.send(m).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    let mut last_timestamp = f64::NEG_INFINITY;
    while let Some(msg) = source.next().await {
        let text = match msg {
            Ok(Message::Text(t)) => t,
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(Message::Binary(_)) => {
                let _ = out.send(to_text(&ServerMessage::Nack {
                    reason: "binary frames are not supported".into(),
                }));
                continue;
            }
            Ok(_) => continue,
        };
        let reply = match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Err(e) => ServerMessage::Nack {
                reason: format!("malformed message: {e}"),
            },
            Ok(ClientMessage::OperatorInput(input)) => match input.validate() {
                Err(reason) => ServerMessage::Nack { reason },
                Ok(()) if input.timestamp <= last_timestamp => ServerMessage::Nack {
                    reason: format!(
                        "timestamp {} is not after the previous {}",
                        input.timestamp, last_timestamp
                    ),
                },
                Ok(()) => {
                    last_timestamp = input.timestamp;
                    let _ = shared.inputs[k].send(input);
                    ServerMessage::Ack {
                        timestamp: input.timestamp,
                    }
                }
            },
        };
        let _ = out.send(to_text(&reply));
    }

    // Leaving releases the handle and the pedal.
    if last_timestamp.is_finite() {
        let _ = shared.inputs[k].send(OperatorInput {
            drag_target: None,
            gimbal_targets: None,
            pedal: false,
            timestamp: last_timestamp,
            mode: None,
        });
    }
    shared.clients.lock().expect("client table lock")[k] = None;
    drop(out);
    let _ = writer.await;
    info!("{peer} left the {arm} arm");
}
