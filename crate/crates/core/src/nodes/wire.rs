//! Datagram framing.
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x46 0x52 ("FR")
//! 2       1     version = 1
//! 3       1     msg_type
//! 4       4     seq, u32 BE
//! 8       8     send_ts, u64 BE, microseconds
//! 16      2     payload_len, u16 BE
//! 18      n     payload
//! ```
//!
//! All multi-byte payload fields are big-endian; floats are IEEE-754 `f32`.

use crate::netsim::MAX_DATAGRAM;
use crate::Micros;

pub const MAGIC: [u8; 2] = [0x46, 0x52];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Velocity = 0x01,
    Height = 0x02,
    Grasp = 0x03,
    Observation = 0x04,
    Mode = 0x05,
    Telemetry = 0x06,
}

impl MsgType {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => Self::Velocity,
            0x02 => Self::Height,
            0x03 => Self::Grasp,
            0x04 => Self::Observation,
            0x05 => Self::Mode,
            0x06 => Self::Telemetry,
            _ => return None,
        })
    }

    pub fn payload_len(self) -> usize {
        match self {
            Self::Velocity => 8,
            Self::Height => 4,
            Self::Grasp => 0,
            Self::Observation => 21,
            Self::Mode => 1,
            Self::Telemetry => 29,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("truncated datagram: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("payload_len says {declared} bytes, datagram carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("message type 0x{msg_type:02x} needs a {expected}-byte payload, got {got}")]
    PayloadSize { msg_type: u8, expected: usize, got: usize },
    #[error("datagram of {0} bytes exceeds the size limit")]
    TooLong(usize),
    #[error("invalid value {value} for field {field}")]
    BadField { field: &'static str, value: u8 },
}

/// Operating mode carried by 0x05.
pub const MODE_TELEOP: u8 = 0;
pub const MODE_AUTO: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationMsg {
    pub visible: bool,
    pub cx: f32,
    pub cy: f32,
    pub side_px: f32,
    pub capture_ts: Micros,
}

/// Status bits in telemetry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TelemetryFlags(pub u8);

impl TelemetryFlags {
    pub const FALLEN: u8 = 1 << 0;
    pub const GRASPING: u8 = 1 << 1;
    pub const SCRIPT_ACTIVE: u8 = 1 << 2;
    pub const SCRIPT_DONE: u8 = 1 << 3;
    pub const AUTO: u8 = 1 << 4;

    pub fn has(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    pub fn with(self, bit: u8, on: bool) -> Self {
        if on {
            Self(self.0 | bit)
        } else {
            Self(self.0 & !bit)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryMsg {
    pub x: f32,
    pub y: f32,
    pub heading: f32,
    pub psi: f32,
    pub psi_dot: f32,
    pub v: f32,
    pub height: f32,
    pub flags: TelemetryFlags,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    /// m/s and rad/s.
    Velocity { forward: f32, yaw: f32 },
    /// m/s.
    Height { rate: f32 },
    Grasp,
    Observation(ObservationMsg),
    Mode(u8),
    Telemetry(TelemetryMsg),
}

impl Payload {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Payload::Velocity { .. } => MsgType::Velocity,
            Payload::Height { .. } => MsgType::Height,
            Payload::Grasp => MsgType::Grasp,
            Payload::Observation(_) => MsgType::Observation,
            Payload::Mode(_) => MsgType::Mode,
            Payload::Telemetry(_) => MsgType::Telemetry,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub seq: u32,
    pub send_ts: Micros,
    pub payload: Payload,
}

pub fn encode(packet: &Packet) -> Vec<u8> {
    let ty = packet.payload.msg_type();
    let mut out = Vec::with_capacity(HEADER_LEN + ty.payload_len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(ty as u8);
    out.extend_from_slice(&packet.seq.to_be_bytes());
    out.extend_from_slice(&packet.send_ts.to_be_bytes());
    out.extend_from_slice(&(ty.payload_len() as u16).to_be_bytes());
    let f = |out: &mut Vec<u8>, v: f32| out.extend_from_slice(&v.to_be_bytes());
    match packet.payload {
        Payload::Velocity { forward, yaw } => {
            f(&mut out, forward);
            f(&mut out, yaw);
        }
        Payload::Height { rate } => f(&mut out, rate),
        Payload::Grasp => {}
        Payload::Observation(o) => {
            out.push(o.visible as u8);
            f(&mut out, o.cx);
            f(&mut out, o.cy);
            f(&mut out, o.side_px);
            out.extend_from_slice(&o.capture_ts.to_be_bytes());
        }
        Payload::Mode(m) => out.push(m),
        Payload::Telemetry(t) => {
            for v in [t.x, t.y, t.heading, t.psi, t.psi_dot, t.v, t.height] {
                f(&mut out, v);
            }
            out.push(t.flags.0);
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[self.at..self.at + N]);
        self.at += N;
        b
    }

    fn f32(&mut self) -> f32 {
        f32::from_be_bytes(self.take())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Packet, WireError> {
    if bytes.len() > MAX_DATAGRAM {
        return Err(WireError::TooLong(bytes.len()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated { needed: HEADER_LEN, got: bytes.len() });
    }
    let mut r = Reader { buf: bytes, at: 0 };
    let magic: [u8; 2] = r.take();
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let [version] = r.take();
    if version != VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let [raw_type] = r.take();
    let ty = MsgType::from_u8(raw_type).ok_or(WireError::UnknownType(raw_type))?;
    let seq = u32::from_be_bytes(r.take());
    let send_ts = u64::from_be_bytes(r.take());
    let declared = u16::from_be_bytes(r.take()) as usize;
    let actual = bytes.len() - HEADER_LEN;
    if declared > actual {
        return Err(WireError::Truncated { needed: HEADER_LEN + declared, got: bytes.len() });
    }
    if declared != actual {
        return Err(WireError::LengthMismatch { declared, actual });
    }
    if declared != ty.payload_len() {
        return Err(WireError::PayloadSize { msg_type: raw_type, expected: ty.payload_len(), got: declared });
    }
    let payload = match ty {
        MsgType::Velocity => Payload::Velocity { forward: r.f32(), yaw: r.f32() },
        MsgType::Height => Payload::Height { rate: r.f32() },
        MsgType::Grasp => Payload::Grasp,
        MsgType::Observation => {
            let [v] = r.take();
            let visible = match v {
                0 => false,
                1 => true,
                value => return Err(WireError::BadField { field: "visible", value }),
            };
            Payload::Observation(ObservationMsg {
                visible,
                cx: r.f32(),
                cy: r.f32(),
                side_px: r.f32(),
                capture_ts: u64::from_be_bytes(r.take()),
            })
        }
        MsgType::Mode => {
            let [m] = r.take();
            Payload::Mode(m)
        }
        MsgType::Telemetry => Payload::Telemetry(TelemetryMsg {
            x: r.f32(),
            y: r.f32(),
            heading: r.f32(),
            psi: r.f32(),
            psi_dot: r.f32(),
            v: r.f32(),
            height: r.f32(),
            flags: TelemetryFlags(r.take::<1>()[0]),
        }),
    };
    Ok(Packet { seq, send_ts, payload })
}
