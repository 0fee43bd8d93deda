//! The three nodes of the control stack and the drivers that connect them.
//!
//! ```text
//!  operator ──> cloud ──link 0──> rcu ──link 2──> edge
//!                     <──link 1──     <──link 3──
//! ```
//!
//! Nodes are written sans-IO: they consume datagrams and timer callbacks and
//! push outgoing datagrams into an [`Outbox`]. [`topology::VirtualTopology`]
//! drives them under a virtual clock; [`live`] runs them on threads over
//! loopback UDP.

pub mod bridge;
pub mod cloud;
pub mod edge;
pub mod live;
pub mod operator;
pub mod rcu;
pub mod topology;
pub mod wire;

use crate::Micros;

pub use cloud::{CloudConfig, CloudNode};
pub use edge::{EdgeConfig, EdgeNode};
pub use operator::{OperatorCommand, TeleopSegment};
pub use rcu::RcuNode;
pub use topology::{LinkSet, VirtualTopology};

/// Which neighbour a datagram comes from or goes to. `Up` is toward the
/// cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    Up,
    Down,
}

/// Datagrams produced while handling one input.
#[derive(Debug, Default)]
pub struct Outbox {
    pub sends: Vec<(Port, Vec<u8>)>,
}

impl Outbox {
    pub fn push(&mut self, port: Port, bytes: Vec<u8>) {
        self.sends.push((port, bytes));
    }

    pub fn drain(&mut self) -> std::vec::Drain<'_, (Port, Vec<u8>)> {
        self.sends.drain(..)
    }
}

/// A node reacting to datagrams and its own timer.
pub trait Node {
    fn on_datagram(&mut self, port: Port, bytes: &[u8], now: Micros, out: &mut Outbox);
    fn on_timer(&mut self, now: Micros, out: &mut Outbox);
    /// When `on_timer` next wants to run.
    fn next_timer(&self) -> Option<Micros>;
}
