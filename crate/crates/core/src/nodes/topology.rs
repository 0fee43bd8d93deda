//! Deterministic driver: all three nodes and four links on one virtual clock.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::operator::OperatorCommand;
use super::{CloudNode, EdgeNode, Node, Outbox, Port, RcuNode};
use crate::netsim::{Datagram, LinkProfile, LinkStats, NetError, SimLink, VirtualClock};
use crate::{derive_seed, Micros};

/// Link profiles for the two hops. Each hop is two independent one-way
/// links sharing a profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSet {
    pub cloud_edge: LinkProfile,
    pub rcu_edge: LinkProfile,
}

/// Link indices.
pub const CLOUD_TO_RCU: usize = 0;
pub const RCU_TO_CLOUD: usize = 1;
pub const RCU_TO_EDGE: usize = 2;
pub const EDGE_TO_RCU: usize = 3;

pub const LINK_NAMES: [&str; 4] = ["cloud_to_rcu", "rcu_to_cloud", "rcu_to_edge", "edge_to_rcu"];

#[derive(Debug)]
pub enum Event {
    Deliver { link: usize, datagram: Datagram },
    Operator(OperatorCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Who {
    Cloud,
    Rcu,
    Edge,
}

pub struct VirtualTopology {
    clock: VirtualClock<Event>,
    links: [SimLink; 4],
    cloud: CloudNode,
    rcu: RcuNode,
    edge: EdgeNode,
    send_errors: u64,
}

impl VirtualTopology {
    pub fn new(cloud: CloudNode, rcu: RcuNode, edge: EdgeNode, links: &LinkSet) -> Result<Self, NetError> {
        let link = |i: usize, p: &LinkProfile| SimLink::new(LinkProfile { seed: derive_seed(p.seed, i as u64), ..p.clone() });
        let mut clock = VirtualClock::new();
        clock.advance_to(edge.world().state().time).expect("fresh clock");
        Ok(Self {
            clock,
            links: [
                link(CLOUD_TO_RCU, &links.cloud_edge)?,
                link(RCU_TO_CLOUD, &links.cloud_edge)?,
                link(RCU_TO_EDGE, &links.rcu_edge)?,
                link(EDGE_TO_RCU, &links.rcu_edge)?,
            ],
            cloud,
            rcu,
            edge,
            send_errors: 0,
        })
    }

    pub fn now(&self) -> Micros {
        self.clock.now()
    }

    pub fn cloud(&self) -> &CloudNode {
        &self.cloud
    }

    pub fn rcu(&self) -> &RcuNode {
        &self.rcu
    }

    pub fn edge(&self) -> &EdgeNode {
        &self.edge
    }

    pub fn edge_mut(&mut self) -> &mut EdgeNode {
        &mut self.edge
    }

    pub fn link(&self, i: usize) -> &SimLink {
        &self.links[i]
    }

    pub fn link_stats(&self) -> [LinkStats; 4] {
        [0, 1, 2, 3].map(|i| self.links[i].stats())
    }

    pub fn send_errors(&self) -> u64 {
        self.send_errors
    }

    /// Queues an operator command for delivery to the cloud at `at`.
    pub fn schedule_operator(&mut self, at: Micros, cmd: OperatorCommand) {
        self.clock.schedule(at, Event::Operator(cmd));
    }

    /// Processes every delivery and timer up to and including `t_end`.
    ///
    /// At equal timestamps, deliveries and operator input go first, then the
    /// RCU, cloud and edge timers.
    pub fn run_until(&mut self, t_end: Micros) {
        loop {
            let t_event = self.clock.peek_time().unwrap_or(Micros::MAX);
            let timers = [
                (Who::Rcu, self.rcu.next_timer()),
                (Who::Cloud, self.cloud.next_timer()),
                (Who::Edge, self.edge.next_timer()),
            ];
            let t_timer = timers.iter().filter_map(|(_, t)| *t).min().unwrap_or(Micros::MAX);
            let t = t_event.min(t_timer);
            if t > t_end {
                break;
            }
            let mut out = Outbox::default();
            if t_event <= t_timer {
                let (at, event) = self.clock.pop_until(t).expect("peeked event is due");
                match event {
                    Event::Operator(cmd) => {
                        self.cloud.on_operator(cmd, at, &mut out);
                        self.route(Who::Cloud, &mut out);
                    }
                    Event::Deliver { link, datagram } => {
                        self.links[link].delivered(&datagram, at);
                        let (who, port) = match link {
                            CLOUD_TO_RCU => (Who::Rcu, Port::Up),
                            RCU_TO_CLOUD => (Who::Cloud, Port::Down),
                            RCU_TO_EDGE => (Who::Edge, Port::Up),
                            _ => (Who::Rcu, Port::Down),
                        };
                        self.node(who).on_datagram(port, &datagram.bytes, at, &mut out);
                        self.route(who, &mut out);
                    }
                }
            } else {
                self.clock.advance_to(t).expect("timers are never in the past");
                for (who, due) in timers {
                    if due == Some(t) {
                        self.node(who).on_timer(t, &mut out);
                        self.route(who, &mut out);
                    }
                }
            }
        }
        if t_end > self.clock.now() {
            self.clock.advance_to(t_end).expect("checked");
        }
    }

    fn node(&mut self, who: Who) -> &mut dyn Node {
        match who {
            Who::Cloud => &mut self.cloud,
            Who::Rcu => &mut self.rcu,
            Who::Edge => &mut self.edge,
        }
    }

    fn route(&mut self, from: Who, out: &mut Outbox) {
        for (port, bytes) in out.drain() {
            let link = match (from, port) {
                (Who::Cloud, _) => CLOUD_TO_RCU,
                (Who::Rcu, Port::Up) => RCU_TO_CLOUD,
                (Who::Rcu, Port::Down) => RCU_TO_EDGE,
                (Who::Edge, _) => EDGE_TO_RCU,
            };
            if let Err(e) = self.links[link].send(&mut self.clock, bytes, |datagram| Event::Deliver { link, datagram }) {
                self.send_errors += 1;
                tracing::warn!(%e, link = LINK_NAMES[link], "send failed");
            }
        }
    }

    pub fn write_delivery_log<W: Write>(&self, link: usize, out: W) -> std::io::Result<()> {
        self.links[link].write_log(out)
    }
}
