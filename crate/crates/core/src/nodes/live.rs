//! Real-socket backend: every node on its own thread with UDP sockets on
//! loopback, and a [`ShapingProxy`] on each of the four one-way links.
//!
//! Node state sits behind a mutex so the bridge and the harness can read it
//! while the node threads run. Operator input goes to the cloud thread over
//! a channel.

use std::net::{IpAddr, Ipv4Addr, SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::operator::OperatorCommand;
use super::topology::{LinkSet, CLOUD_TO_RCU, EDGE_TO_RCU, RCU_TO_CLOUD, RCU_TO_EDGE};
use super::{CloudNode, EdgeNode, Node, Outbox, Port, RcuNode};
use crate::derive_seed;
use crate::netsim::{LinkProfile, NetError, ProxyStats, ShapingProxy, MAX_DATAGRAM};
use crate::Micros;

/// Local UDP ports for the node sockets. Zero picks a free port.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LivePorts {
    pub cloud: u16,
    pub rcu_up: u16,
    pub rcu_down: u16,
    pub edge: u16,
}

/// Longest a node thread sleeps between socket polls.
const POLL: Duration = Duration::from_millis(1);

struct NodeSocket {
    port: Port,
    socket: UdpSocket,
    /// Where this node's sends on `port` go (the proxy for the outgoing link).
    dest: SocketAddr,
}

pub struct LiveTopology {
    cloud: Arc<Mutex<CloudNode>>,
    rcu: Arc<Mutex<RcuNode>>,
    edge: Arc<Mutex<EdgeNode>>,
    proxies: Vec<ShapingProxy>,
    operator: Sender<OperatorCommand>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    epoch: Instant,
}

fn bind(port: u16) -> Result<UdpSocket, NetError> {
    let s = UdpSocket::bind(SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), port))?;
    s.set_nonblocking(true)?;
    Ok(s)
}

impl LiveTopology {
    /// Binds the sockets, starts the proxies and the three node threads.
    /// Node time is wall-clock microseconds since this call.
    pub fn start(
        cloud: CloudNode,
        rcu: RcuNode,
        edge: EdgeNode,
        links: &LinkSet,
        ports: &LivePorts,
    ) -> Result<Self, NetError> {
        let c = bind(ports.cloud)?;
        let r_up = bind(ports.rcu_up)?;
        let r_down = bind(ports.rcu_down)?;
        let e = bind(ports.edge)?;

        let profile = |i: usize, p: &LinkProfile| LinkProfile { seed: derive_seed(p.seed, i as u64), ..p.clone() };
        let any = SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), 0);
        let mut proxies = Vec::with_capacity(4);
        for (i, target, p) in [
            (CLOUD_TO_RCU, r_up.local_addr()?, &links.cloud_edge),
            (RCU_TO_CLOUD, c.local_addr()?, &links.cloud_edge),
            (RCU_TO_EDGE, e.local_addr()?, &links.rcu_edge),
            (EDGE_TO_RCU, r_down.local_addr()?, &links.rcu_edge),
        ] {
            proxies.push(ShapingProxy::spawn(any, target, profile(i, p))?);
        }
        let via = |i: usize| proxies[i].local_addr();

        let epoch = Instant::now();
        let stop = Arc::new(AtomicBool::new(false));
        let (operator, ops) = mpsc::channel();
        let cloud = Arc::new(Mutex::new(cloud));
        let rcu = Arc::new(Mutex::new(rcu));
        let edge = Arc::new(Mutex::new(edge));

        let threads = vec![
            spawn_node(
                "cloud",
                Arc::clone(&cloud),
                vec![NodeSocket { port: Port::Down, socket: c, dest: via(CLOUD_TO_RCU) }],
                Some(ops),
                epoch,
                Arc::clone(&stop),
            ),
            spawn_node(
                "rcu",
                Arc::clone(&rcu),
                vec![
                    NodeSocket { port: Port::Up, socket: r_up, dest: via(RCU_TO_CLOUD) },
                    NodeSocket { port: Port::Down, socket: r_down, dest: via(RCU_TO_EDGE) },
                ],
                None,
                epoch,
                Arc::clone(&stop),
            ),
            spawn_node(
                "edge",
                Arc::clone(&edge),
                vec![NodeSocket { port: Port::Up, socket: e, dest: via(EDGE_TO_RCU) }],
                None,
                epoch,
                Arc::clone(&stop),
            ),
        ];
        Ok(Self { cloud, rcu, edge, proxies, operator, stop, threads, epoch })
    }

    pub fn now(&self) -> Micros {
        self.epoch.elapsed().as_micros() as Micros
    }

    pub fn send_operator(&self, cmd: OperatorCommand) {
        // The receiver lives as long as the cloud thread, i.e. until shutdown.
        let _ = self.operator.send(cmd);
    }

    pub fn cloud(&self) -> MutexGuard<'_, CloudNode> {
        self.cloud.lock().expect("cloud thread panicked")
    }

    pub fn rcu(&self) -> MutexGuard<'_, RcuNode> {
        self.rcu.lock().expect("rcu thread panicked")
    }

    pub fn edge(&self) -> MutexGuard<'_, EdgeNode> {
        self.edge.lock().expect("edge thread panicked")
    }

    /// Per-link proxy counters, in link index order.
    pub fn proxy_stats(&self) -> [ProxyStats; 4] {
        [0, 1, 2, 3].map(|i| self.proxies[i].stats())
    }

    /// Stops the node threads, then the proxies, and returns the final
    /// proxy counters.
    pub fn shutdown(mut self) -> [ProxyStats; 4] {
        self.stop_threads();
        let stats = self.proxy_stats();
        for p in self.proxies.drain(..) {
            p.shutdown();
        }
        stats
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for LiveTopology {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn spawn_node<N: Node + OperatorSink + Send + 'static>(
    name: &'static str,
    node: Arc<Mutex<N>>,
    sockets: Vec<NodeSocket>,
    operator: Option<Receiver<OperatorCommand>>,
    epoch: Instant,
    stop: Arc<AtomicBool>,
) -> JoinHandle<()> {
    std::thread::Builder::new()
        .name(name.into())
        .spawn(move || {
            let now = || epoch.elapsed().as_micros() as Micros;
            let mut buf = [0u8; MAX_DATAGRAM + 1];
            let mut out = Outbox::default();
            while !stop.load(Ordering::Relaxed) {
                let next = {
                    let mut n = node.lock().expect("node lock");
                    if let Some(rx) = &operator {
                        while let Ok(cmd) = rx.try_recv() {
                            n.operator(cmd, now(), &mut out);
                        }
                    }
                    for s in &sockets {
                        while let Ok((len, _)) = s.socket.recv_from(&mut buf) {
                            n.on_datagram(s.port, &buf[..len], now(), &mut out);
                        }
                    }
                    let t = now();
                    if n.next_timer().is_some_and(|due| due <= t) {
                        n.on_timer(t, &mut out);
                    }
                    n.next_timer()
                };
                for (port, bytes) in out.drain() {
                    if let Some(s) = sockets.iter().find(|s| s.port == port) {
                        if let Err(e) = s.socket.send_to(&bytes, s.dest) {
                            tracing::warn!(node = name, %e, "send failed");
                        }
                    }
                }
                let wait = next.map_or(POLL, |due| Duration::from_micros(due.saturating_sub(now())).min(POLL));
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
        })
        .expect("spawning a node thread")
}

/// Nodes that accept operator input. Only the cloud does anything with it.
pub trait OperatorSink {
    fn operator(&mut self, _cmd: OperatorCommand, _now: Micros, _out: &mut Outbox) {}
}

impl OperatorSink for CloudNode {
    fn operator(&mut self, cmd: OperatorCommand, now: Micros, out: &mut Outbox) {
        self.on_operator(cmd, now, out);
    }
}

impl OperatorSink for RcuNode {}
impl OperatorSink for EdgeNode {}
