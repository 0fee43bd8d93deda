//! Operator commands as JSON, and scripted teleoperation.

use serde::{Deserialize, Serialize};

use super::wire::{Payload, MODE_AUTO, MODE_TELEOP};
use crate::{micros_from_secs, Micros};

/// A command from the operator console (or a script standing in for one).
///
/// JSON form: `{"type": "velocity", "forward": 0.3, "yaw": 0.0}`,
/// `{"type": "height", "rate": 0.05}`, `{"type": "grasp"}`,
/// `{"type": "mode", "value": 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorCommand {
    Velocity {
        forward: f64,
        #[serde(default)]
        yaw: f64,
    },
    Height {
        rate: f64,
    },
    Grasp,
    Mode {
        value: u8,
    },
}

impl OperatorCommand {
    pub const AUTO: OperatorCommand = OperatorCommand::Mode { value: MODE_AUTO };
    pub const TELEOP: OperatorCommand = OperatorCommand::Mode { value: MODE_TELEOP };

    pub fn validate(&self) -> Result<(), String> {
        let finite = |name: &str, v: f64| if v.is_finite() { Ok(()) } else { Err(format!("{name} must be finite")) };
        match *self {
            OperatorCommand::Velocity { forward, yaw } => {
                finite("forward", forward)?;
                finite("yaw", yaw)
            }
            OperatorCommand::Height { rate } => finite("rate", rate),
            OperatorCommand::Mode { value } if value > MODE_AUTO => Err(format!("unknown mode {value}")),
            _ => Ok(()),
        }
    }

    /// Held commands repeat while a key is down; the others fire once.
    pub fn is_held(&self) -> bool {
        matches!(self, OperatorCommand::Velocity { .. } | OperatorCommand::Height { .. })
    }

    pub fn to_payload(self) -> Payload {
        match self {
            OperatorCommand::Velocity { forward, yaw } => Payload::Velocity { forward: forward as f32, yaw: yaw as f32 },
            OperatorCommand::Height { rate } => Payload::Height { rate: rate as f32 },
            OperatorCommand::Grasp => Payload::Grasp,
            OperatorCommand::Mode { value } => Payload::Mode(value),
        }
    }
}

/// One held input in a teleoperation script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleopSegment {
    pub start_s: f64,
    #[serde(default)]
    pub duration_s: f64,
    pub command: OperatorCommand,
}

/// Scripted operator input expanded to timed messages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TeleopTrace {
    pub messages: Vec<(Micros, OperatorCommand)>,
    /// Time of the last message of each held segment.
    pub releases: Vec<Micros>,
}

/// Expands segments into the message stream an operator console would send:
/// held commands repeat at `rate_hz` over `[start, start + duration)`,
/// one-shot commands are sent once at `start`.
pub fn expand_script(segments: &[TeleopSegment], rate_hz: f64) -> TeleopTrace {
    let period = micros_from_secs(1.0 / rate_hz).max(1);
    let mut trace = TeleopTrace::default();
    for seg in segments {
        let start = micros_from_secs(seg.start_s);
        if !seg.command.is_held() {
            trace.messages.push((start, seg.command));
            continue;
        }
        let end = start + micros_from_secs(seg.duration_s);
        let mut t = start;
        let mut last = None;
        while t < end {
            trace.messages.push((t, seg.command));
            last = Some(t);
            t += period;
        }
        trace.releases.extend(last);
    }
    trace.messages.sort_by_key(|(t, _)| *t);
    trace.releases.sort_unstable();
    trace
}
