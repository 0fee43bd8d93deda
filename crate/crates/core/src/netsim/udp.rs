use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{LinkProfile, LinkShaper, NetError, Verdict, MAX_DATAGRAM};
use crate::Micros;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProxyStats {
    pub received: u64,
    pub forwarded: u64,
    pub dropped: u64,
    pub oversized: u64,
}

#[derive(Default)]
struct Counters {
    received: AtomicU64,
    forwarded: AtomicU64,
    dropped: AtomicU64,
    oversized: AtomicU64,
}

type Queue = BinaryHeap<Reverse<(Micros, u64, Vec<u8>)>>;

struct Shared {
    queue: Mutex<Queue>,
    wake: Condvar,
    stop: AtomicBool,
    counters: Counters,
}

/// One-way UDP shaping proxy on loopback.
///
/// Datagrams sent to [`ShapingProxy::local_addr`] are forwarded to the
/// target after the delay, loss and reordering drawn by a [`LinkShaper`].
/// A receive thread shapes and enqueues; a send thread releases datagrams
/// when their delivery time comes up.
pub struct ShapingProxy {
    local: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl ShapingProxy {
    pub fn spawn(listen: SocketAddr, target: SocketAddr, profile: LinkProfile) -> Result<Self, NetError> {
        let mut shaper = LinkShaper::new(profile)?;
        let rx = UdpSocket::bind(listen)?;
        rx.set_read_timeout(Some(Duration::from_millis(20)))?;
        let local = rx.local_addr()?;
        let tx = UdpSocket::bind(SocketAddr::new(local.ip(), 0))?;
        let shared = Arc::new(Shared {
            queue: Mutex::new(BinaryHeap::new()),
            wake: Condvar::new(),
            stop: AtomicBool::new(false),
            counters: Counters::default(),
        });
        let epoch = Instant::now();
        let now = move || epoch.elapsed().as_micros() as Micros;

        let recv_shared = Arc::clone(&shared);
        let receiver = std::thread::spawn(move || {
            let mut buf = [0u8; MAX_DATAGRAM + 1];
            let mut order = 0u64;
            while !recv_shared.stop.load(Ordering::Relaxed) {
                let n = match rx.recv_from(&mut buf) {
                    Ok((n, _)) => n,
                    Err(_) => continue,
                };
                let c = &recv_shared.counters;
                c.received.fetch_add(1, Ordering::Relaxed);
                match shaper.shape(n, now()) {
                    Err(_) => {
                        c.oversized.fetch_add(1, Ordering::Relaxed);
                    }
                    Ok((_, Verdict::Dropped)) => {
                        c.dropped.fetch_add(1, Ordering::Relaxed);
                    }
                    Ok((_, Verdict::Deliver { at, swapped })) => {
                        let mut q = recv_shared.queue.lock().expect("queue lock");
                        if let Some((_, later)) = swapped {
                            // Retime the latest queued datagram.
                            let mut items: Vec<_> = std::mem::take(&mut *q).into_vec();
                            if let Some(last) = items.iter_mut().max_by_key(|r| r.0 .1) {
                                last.0 .0 = later;
                            }
                            *q = items.into();
                        }
                        q.push(Reverse((at, order, buf[..n].to_vec())));
                        order += 1;
                        recv_shared.wake.notify_one();
                    }
                }
            }
        });

        let send_shared = Arc::clone(&shared);
        let sender = std::thread::spawn(move || {
            let mut q = send_shared.queue.lock().expect("queue lock");
            while !send_shared.stop.load(Ordering::Relaxed) {
                let due = q.peek().map(|r| r.0 .0);
                match due {
                    Some(at) if at <= now() => {
                        let Reverse((_, _, bytes)) = q.pop().expect("peeked");
                        drop(q);
                        if tx.send_to(&bytes, target).is_ok() {
                            send_shared.counters.forwarded.fetch_add(1, Ordering::Relaxed);
                        }
                        q = send_shared.queue.lock().expect("queue lock");
                    }
                    Some(at) => {
                        let wait = Duration::from_micros(at.saturating_sub(now()));
                        q = send_shared.wake.wait_timeout(q, wait).expect("queue lock").0;
                    }
                    None => {
                        q = send_shared.wake.wait_timeout(q, Duration::from_millis(20)).expect("queue lock").0;
                    }
                }
            }
        });

        Ok(Self { local, shared, threads: vec![receiver, sender] })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    pub fn stats(&self) -> ProxyStats {
        let c = &self.shared.counters;
        ProxyStats {
            received: c.received.load(Ordering::Relaxed),
            forwarded: c.forwarded.load(Ordering::Relaxed),
            dropped: c.dropped.load(Ordering::Relaxed),
            oversized: c.oversized.load(Ordering::Relaxed),
        }
    }

    pub fn shutdown(mut self) -> ProxyStats {
        self.stop_threads();
        self.stats()
    }

    fn stop_threads(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        self.shared.wake.notify_all();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for ShapingProxy {
    fn drop(&mut self) {
        self.stop_threads();
    }
}
