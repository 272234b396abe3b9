//! Status lines pushed by the drone, e.g. `pitch:0;roll:1;yaw:-2;h:30;bat:87;`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TelemetryError {
    #[error("non-ASCII byte at offset {0}")]
    NonAscii(usize),
    #[error("malformed pair {0:?}")]
    Malformed(String),
    #[error("key {key:?}: invalid value {value:?}")]
    Value { key: &'static str, value: String },
    #[error("key {0:?} appears twice")]
    Duplicate(&'static str),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DroneTelemetry {
    pub pitch: Option<i32>,
    pub roll: Option<i32>,
    pub yaw: Option<i32>,
    /// Centimetres.
    pub height: Option<i32>,
    /// Percent, 0 to 100.
    pub battery: Option<u8>,
    /// Pairs with keys the parser does not interpret, in line order.
    pub extra: Vec<(String, String)>,
    pub raw: String,
}

const KNOWN: [&str; 5] = ["pitch", "roll", "yaw", "h", "bat"];

pub fn parse_telemetry(bytes: &[u8]) -> Result<DroneTelemetry, TelemetryError> {
    if let Some(at) = bytes.iter().position(|b| !b.is_ascii()) {
        return Err(TelemetryError::NonAscii(at));
    }
    let raw = std::str::from_utf8(bytes).expect("ASCII is UTF-8");
    let body = raw.trim_end_matches(['\r', '\n']);
    let mut t = DroneTelemetry {
        raw: raw.to_string(),
        ..Default::default()
    };

    for segment in body.split(';').filter(|s| !s.is_empty()) {
        let (key, value) = segment
            .split_once(':')
            .filter(|(k, _)| !k.is_empty())
            .ok_or_else(|| TelemetryError::Malformed(segment.to_string()))?;
        let Some(&known) = KNOWN.iter().find(|&&k| k == key) else {
            t.extra.push((key.to_string(), value.to_string()));
            continue;
        };
        let bad = || TelemetryError::Value {
            key: known,
            value: value.to_string(),
        };
        let n: i32 = value.parse().map_err(|_| bad())?;
        let slot = match known {
            "pitch" => &mut t.pitch,
            "roll" => &mut t.roll,
            "yaw" => &mut t.yaw,
            "h" => &mut t.height,
            _ => {
                if t.battery.is_some() {
                    return Err(TelemetryError::Duplicate(known));
                }
                t.battery = Some(u8::try_from(n).ok().filter(|b| *b <= 100).ok_or_else(bad)?);
                continue;
            }
        };
        if slot.replace(n).is_some() {
            return Err(TelemetryError::Duplicate(known));
        }
    }
    Ok(t)
}

impl fmt::Display for DroneTelemetry {
    /// Re-emits the line in the wire grammar, known keys first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let known = [
            ("pitch", self.pitch),
            ("roll", self.roll),
            ("yaw", self.yaw),
            ("h", self.height),
            ("bat", self.battery.map(i32::from)),
        ];
        for (k, v) in known {
            if let Some(v) = v {
                write!(f, "{k}:{v};")?;
            }
        }
        for (k, v) in &self.extra {
            write!(f, "{k}:{v};")?;
        }
        Ok(())
    }
}
