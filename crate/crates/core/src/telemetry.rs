//! JSON-Lines log records and a validator for them.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ibvs::PhaseRecord;
use crate::netsim::DeliveryRecord;

/// Robot state sampled by the edge at the telemetry rate. `t` in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub psi: f64,
    pub psi_dot: f64,
    pub v: f64,
    pub height: f64,
    pub fallen: bool,
    pub grasping: bool,
}

/// Which schema a log file follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    Telemetry,
    Phase,
    Delivery,
}

impl LogKind {
    /// Infers the schema from a file name (`telemetry*`, `phase*`, `delivery*`).
    pub fn from_file_name(name: &str) -> Option<Self> {
        if name.starts_with("telemetry") {
            Some(Self::Telemetry)
        } else if name.starts_with("phase") {
            Some(Self::Phase)
        } else if name.starts_with("delivery") {
            Some(Self::Delivery)
        } else {
            None
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_lines<R: BufRead, T: DeserializeOwned>(
    input: R,
    mut check: impl FnMut(&T) -> Result<(), String>,
) -> Result<usize, LogError> {
    let mut n = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let invalid = |message: String| LogError::Invalid { line: i + 1, message };
        let rec: T = serde_json::from_str(&line).map_err(|e| invalid(e.to_string()))?;
        check(&rec).map_err(invalid)?;
        n += 1;
    }
    Ok(n)
}

/// Checks every line against the schema. Returns the number of records.
pub fn validate_jsonl<R: BufRead>(kind: LogKind, input: R) -> Result<usize, LogError> {
    match kind {
        LogKind::Telemetry => {
            let mut last = f64::NEG_INFINITY;
            parse_lines(input, |r: &TelemetryRecord| {
                let values = [r.t, r.x, r.y, r.heading, r.psi, r.psi_dot, r.v, r.height];
                if values.iter().any(|v| !v.is_finite()) {
                    return Err("non-finite value".into());
                }
                if r.t < last {
                    return Err(format!("time went backwards: {} after {}", r.t, last));
                }
                last = r.t;
                Ok(())
            })
        }
        LogKind::Phase => {
            let mut last = f64::NEG_INFINITY;
            parse_lines(input, |r: &PhaseRecord| {
                if !(r.t.is_finite() && r.e_norm >= 0.0 && r.z.is_finite()) {
                    return Err("invalid phase record values".into());
                }
                if r.t < last {
                    return Err("time went backwards".into());
                }
                last = r.t;
                Ok(())
            })
        }
        LogKind::Delivery => parse_lines(input, |r: &DeliveryRecord| {
            if r.is_well_formed() {
                Ok(())
            } else {
                Err("need exactly one of t_deliver and dropped".into())
            }
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> TelemetryRecord {
        TelemetryRecord { t, x: 0.0, y: 0.0, heading: 0.0, psi: 0.0, psi_dot: 0.0, v: 0.0, height: 0.65, fallen: false, grasping: false }
    }

    #[test]
    fn valid_telemetry_passes() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[rec(0.05), rec(0.1)]).unwrap();
        assert_eq!(validate_jsonl(LogKind::Telemetry, buf.as_slice()).unwrap(), 2);
        assert_eq!(validate_jsonl(LogKind::Telemetry, &b""[..]).unwrap(), 0);
    }

    #[test]
    fn schema_violations_report_line() {
        let text = "{\"t\":0.0,\"x\":0,\"y\":0,\"heading\":0,\"psi\":0,\"psi_dot\":0,\"v\":0,\"height\":0.6,\"fallen\":false,\"grasping\":false}\n{\"t\":1}\n";
        match validate_jsonl(LogKind::Telemetry, text.as_bytes()) {
            Err(LogError::Invalid { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[rec(1.0), rec(0.5)]).unwrap();
        assert!(validate_jsonl(LogKind::Telemetry, buf.as_slice()).is_err());
        let extra = "{\"t_send\":0,\"seq\":0,\"bytes\":3,\"dropped\":true,\"note\":1}";
        assert!(validate_jsonl(LogKind::Delivery, extra.as_bytes()).is_err());
        let both = "{\"t_send\":0,\"t_deliver\":5,\"seq\":0,\"bytes\":3,\"dropped\":true}";
        assert!(validate_jsonl(LogKind::Delivery, both.as_bytes()).is_err());
    }

    #[test]
    fn kind_from_name() {
        assert_eq!(LogKind::from_file_name("telemetry_rep0.jsonl"), Some(LogKind::Telemetry));
        assert_eq!(LogKind::from_file_name("delivery_link2_rep0.jsonl"), Some(LogKind::Delivery));
        assert_eq!(LogKind::from_file_name("metrics.json"), None);
    }
}
