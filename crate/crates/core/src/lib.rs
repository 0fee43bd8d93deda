//! Desk-scale cloud/edge ("fog") control stack for a self-balancing robot.
//!
//! The crate simulates three cooperating nodes connected by lossy datagram
//! links:
//!
//! * a **cloud** controller that relays teleoperation commands, recognises a
//!   fiducial tag in camera frames and runs image-based visual servoing,
//! * an **RCU** gateway that forwards datagrams between cloud and robot,
//! * an **edge** controller that reconstructs a smooth command signal from the
//!   lossy stream (the heartbeat protocol) and closes a 200 Hz balance loop
//!   around an inverted-pendulum robot.
//!
//! Everything runs under a deterministic virtual clock by default, so a
//! scenario plus a seed fully determines every log line. A real-socket
//! backend on loopback is available for live demos.
//!
//! Module map:
//!
//! | module        | contents                                                  |
//! |---------------|-----------------------------------------------------------|
//! | [`dynamics`]  | CoM estimation, lean angle, balance law, integrator       |
//! | [`heartbeat`] | sliding-window command reconstruction with ramps          |
//! | [`netsim`]    | virtual clock, link shaping, UDP shaping proxy            |
//! | [`vision`]    | pinhole camera, tag projection, depth from tag size       |
//! | [`ibvs`]      | interaction matrix, pseudo-inverse, pickup state machine  |
//! | [`world`]     | physical world: robot, target track, grasp script         |
//! | [`nodes`]     | wire format, RCU, cloud and edge nodes, topology drivers  |
//! | [`harness`]   | scenario files, repeated runs, parameter sweeps           |
//! | [`telemetry`] | JSON-Lines record types and schema validation             |

// Config checks are written `!(x >= 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod harness;
pub mod heartbeat;
pub mod ibvs;
pub mod netsim;
pub mod nodes;
pub mod telemetry;
pub mod vision;
pub mod world;

mod seed;

pub use seed::derive_seed;

/// Simulation timestamps and durations, in microseconds.
pub type Micros = u64;

/// Converts seconds to whole microseconds (rounded).
pub fn micros_from_secs(secs: f64) -> Micros {
    (secs * 1e6).round().max(0.0) as Micros
}

/// Converts milliseconds to whole microseconds (rounded).
pub fn micros_from_ms(ms: f64) -> Micros {
    (ms * 1e3).round().max(0.0) as Micros
}

/// Converts microseconds to seconds.
pub fn secs(t: Micros) -> f64 {
    t as f64 * 1e-6
}
