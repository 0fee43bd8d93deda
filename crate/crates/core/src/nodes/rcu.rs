//! Gateway between cloud and edge.

use std::collections::VecDeque;

use serde::Serialize;

use super::wire::decode;
use super::{Node, Outbox, Port};
use crate::Micros;

pub const RCU_DELAY: Micros = 2_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DirectionCounters {
    pub forwarded: u64,
    pub decode_errors: u64,
}

/// Forwards valid datagrams unchanged after a fixed processing delay.
/// Datagrams that do not decode are counted and dropped.
#[derive(Debug)]
pub struct RcuNode {
    delay: Micros,
    queue: VecDeque<(Micros, Port, Vec<u8>)>,
    /// Traffic heading to the edge.
    pub downlink: DirectionCounters,
    /// Traffic heading to the cloud.
    pub uplink: DirectionCounters,
}

impl Default for RcuNode {
    fn default() -> Self {
        Self::new(RCU_DELAY)
    }
}

impl RcuNode {
    pub fn new(delay: Micros) -> Self {
        Self { delay, queue: VecDeque::new(), downlink: DirectionCounters::default(), uplink: DirectionCounters::default() }
    }

    pub fn delay(&self) -> Micros {
        self.delay
    }
}

impl Node for RcuNode {
    fn on_datagram(&mut self, port: Port, bytes: &[u8], now: Micros, _out: &mut Outbox) {
        let (counters, to) = match port {
            Port::Up => (&mut self.downlink, Port::Down),
            Port::Down => (&mut self.uplink, Port::Up),
        };
        if let Err(e) = decode(bytes) {
            counters.decode_errors += 1;
            tracing::debug!(%e, ?port, "rcu dropped malformed datagram");
            return;
        }
        counters.forwarded += 1;
        // Constant delay keeps the queue sorted by release time.
        self.queue.push_back((now + self.delay, to, bytes.to_vec()));
    }

    fn on_timer(&mut self, now: Micros, out: &mut Outbox) {
        while let Some((at, _, _)) = self.queue.front() {
            if *at > now {
                break;
            }
            let (_, port, bytes) = self.queue.pop_front().expect("front exists");
            out.push(port, bytes);
        }
    }

    fn next_timer(&self) -> Option<Micros> {
        self.queue.front().map(|(at, _, _)| *at)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodes::wire::{encode, Packet, Payload};

    #[test]
    fn forwards_identical_bytes_after_delay() {
        let mut rcu = RcuNode::default();
        let mut out = Outbox::default();
        let bytes = encode(&Packet { seq: 3, send_ts: 10, payload: Payload::Height { rate: 0.05 } });
        rcu.on_datagram(Port::Up, &bytes, 1_000, &mut out);
        assert!(out.sends.is_empty());
        assert_eq!(rcu.next_timer(), Some(3_000));
        rcu.on_timer(2_999, &mut out);
        assert!(out.sends.is_empty());
        rcu.on_timer(3_000, &mut out);
        assert_eq!(out.sends, vec![(Port::Down, bytes)]);
        assert_eq!(rcu.downlink.forwarded, 1);
        assert_eq!(rcu.next_timer(), None);
    }

    #[test]
    fn malformed_is_counted_not_forwarded() {
        let mut rcu = RcuNode::default();
        let mut out = Outbox::default();
        rcu.on_datagram(Port::Down, &[0x46, 0x52, 9], 0, &mut out);
        assert_eq!(rcu.uplink, DirectionCounters { forwarded: 0, decode_errors: 1 });
        assert_eq!(rcu.next_timer(), None);
    }
}
