//! Peripheral packet format for the sensor star network.
//!
//! Every peripheral (seat cushion, armrests, floor mat, Can Band) sends
//! best-effort notifications to the hub. A packet is a fixed 17-byte header
//! followed by a tagged payload. All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       1     peripheral kind   (0 SeatCushion, 1 ArmrestLeft, 2 ArmrestRight, 3 FloorMat, 4 CanBand)
//! 1       1     instance
//! 2       4     seq               u32
//! 6       8     device_time_ms    u64, milliseconds since peripheral boot
//! 14      1     payload tag       (0x01 PressureFrame, 0x02 CanBand, 0x03 Heartbeat)
//! 15      2     payload length    u16, bytes following the header
//! 17      n     payload
//! ```
//!
//! Payloads:
//!
//! | Tag  | Layout |
//! |------|--------|
//! | 0x01 | rows u8, cols u8, rows*cols cells as f32 (row-major) |
//! | 0x02 | grip f32 (N), accel x/y/z f32 (m/s²), lux f32, led_state u8 |
//! | 0x03 | empty |
//!
//! The payload length must match the payload exactly; trailing bytes are
//! rejected as malformed.

mod registry;

pub use registry::{IngestVerdict, PeripheralStatus, Registry, RegistryConfig, RegistryEntry, StatusTransition};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const HEADER_LEN: usize = 17;
pub const TAG_PRESSURE_FRAME: u8 = 0x01;
pub const TAG_CAN_BAND: u8 = 0x02;
pub const TAG_HEARTBEAT: u8 = 0x03;
pub const CAN_BAND_PAYLOAD_LEN: usize = 21;

/// Kind of sensing module attached to the hub.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PeripheralKind {
    SeatCushion,
    ArmrestLeft,
    ArmrestRight,
    FloorMat,
    CanBand,
}

impl PeripheralKind {
    pub const ALL: [PeripheralKind; 5] = [
        PeripheralKind::SeatCushion,
        PeripheralKind::ArmrestLeft,
        PeripheralKind::ArmrestRight,
        PeripheralKind::FloorMat,
        PeripheralKind::CanBand,
    ];

    pub fn code(self) -> u8 {
        match self {
            PeripheralKind::SeatCushion => 0,
            PeripheralKind::ArmrestLeft => 1,
            PeripheralKind::ArmrestRight => 2,
            PeripheralKind::FloorMat => 3,
            PeripheralKind::CanBand => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            PeripheralKind::SeatCushion => "seat",
            PeripheralKind::ArmrestLeft => "armrest-left",
            PeripheralKind::ArmrestRight => "armrest-right",
            PeripheralKind::FloorMat => "mat",
            PeripheralKind::CanBand => "canband",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }
}

/// Identity of one peripheral: `(kind, instance)` is unique per deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeripheralId {
    pub kind: PeripheralKind,
    pub instance: u8,
}

impl PeripheralId {
    pub const fn new(kind: PeripheralKind, instance: u8) -> Self {
        Self { kind, instance }
    }
}

impl fmt::Display for PeripheralId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.label(), self.instance)
    }
}

impl std::str::FromStr for PeripheralId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, instance) = s.split_once(':').unwrap_or((s, "0"));
        let kind = PeripheralKind::from_label(kind).ok_or_else(|| format!("unknown peripheral kind `{kind}`"))?;
        let instance = instance.parse().map_err(|_| format!("bad peripheral instance `{instance}`"))?;
        Ok(Self { kind, instance })
    }
}

/// One sample of a pressure grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureFramePayload {
    pub rows: u8,
    pub cols: u8,
    pub cells: Vec<f32>,
}

impl PressureFramePayload {
    pub fn zeros(rows: u8, cols: u8) -> Self {
        Self { rows, cols, cells: vec![0.0; rows as usize * cols as usize] }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.cells[row * self.cols as usize + col]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().map(|&c| c as f64).sum()
    }
}

/// LED pattern currently shown by the Can Band, echoed back to the hub.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LedState {
    Off,
    Idle,
    Lift,
    Hold,
    Return,
    Complete,
}

impl LedState {
    pub fn code(self) -> u8 {
        match self {
            LedState::Off => 0,
            LedState::Idle => 1,
            LedState::Lift => 2,
            LedState::Hold => 3,
            LedState::Return => 4,
            LedState::Complete => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => LedState::Off,
            1 => LedState::Idle,
            2 => LedState::Lift,
            3 => LedState::Hold,
            4 => LedState::Return,
            5 => LedState::Complete,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanBandPayload {
    /// Grip force in Newtons.
    pub grip: f32,
    /// Acceleration in m/s², z axis vertical (includes gravity).
    pub accel: [f32; 3],
    pub lux: f32,
    pub led_state: LedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    PressureFrame(PressureFramePayload),
    CanBand(CanBandPayload),
    Heartbeat,
}

impl Payload {
    pub fn tag(&self) -> u8 {
        match self {
            Payload::PressureFrame(_) => TAG_PRESSURE_FRAME,
            Payload::CanBand(_) => TAG_CAN_BAND,
            Payload::Heartbeat => TAG_HEARTBEAT,
        }
    }
}

/// The unit of transmission between a peripheral and the hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeripheralPacket {
    pub id: PeripheralId,
    pub seq: u32,
    pub device_time_ms: u64,
    pub payload: Payload,
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("pressure grid {rows}x{cols} exceeds the {max_rows}x{max_cols} limit")]
    Oversized { rows: u8, cols: u8, max_rows: u8, max_cols: u8 },
    #[error("invalid packet: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated packet: needed {needed} bytes, had {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unknown payload tag 0x{0:02x}")]
    UnknownKind(u8),
    #[error("malformed packet: {0}")]
    Malformed(String),
}

/// Encoder/decoder carrying the deployment limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireCodec {
    pub max_rows: u8,
    pub max_cols: u8,
    /// Largest allowed cell value.
    pub saturation: f32,
}

impl Default for WireCodec {
    fn default() -> Self {
        Self { max_rows: 64, max_cols: 64, saturation: 65_535.0 }
    }
}

impl WireCodec {
    pub fn encode(&self, packet: &PeripheralPacket) -> Result<Vec<u8>, EncodeError> {
        let mut body = Vec::new();
        match &packet.payload {
            Payload::PressureFrame(frame) => {
                if frame.rows > self.max_rows || frame.cols > self.max_cols {
                    return Err(EncodeError::Oversized {
                        rows: frame.rows,
                        cols: frame.cols,
                        max_rows: self.max_rows,
                        max_cols: self.max_cols,
                    });
                }
                self.check_frame(frame).map_err(EncodeError::Invalid)?;
                body.reserve(2 + frame.cells.len() * 4);
                body.push(frame.rows);
                body.push(frame.cols);
                for c in &frame.cells {
                    body.extend_from_slice(&c.to_le_bytes());
                }
            }
            Payload::CanBand(cb) => {
                check_can_band(cb).map_err(EncodeError::Invalid)?;
                body.extend_from_slice(&cb.grip.to_le_bytes());
                for a in cb.accel {
                    body.extend_from_slice(&a.to_le_bytes());
                }
                body.extend_from_slice(&cb.lux.to_le_bytes());
                body.push(cb.led_state.code());
            }
            Payload::Heartbeat => {}
        }
        let len = u16::try_from(body.len()).map_err(|_| EncodeError::Invalid("payload too long".into()))?;

        let mut out = Vec::with_capacity(HEADER_LEN + body.len());
        out.push(packet.id.kind.code());
        out.push(packet.id.instance);
        out.extend_from_slice(&packet.seq.to_le_bytes());
        out.extend_from_slice(&packet.device_time_ms.to_le_bytes());
        out.push(packet.payload.tag());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    /// Decodes one packet. Total over arbitrary input: never panics.
    pub fn decode(&self, bytes: &[u8]) -> Result<PeripheralPacket, DecodeError> {
        if bytes.len() < HEADER_LEN {
            return Err(DecodeError::Truncated { needed: HEADER_LEN, available: bytes.len() });
        }
        let kind = PeripheralKind::from_code(bytes[0])
            .ok_or_else(|| DecodeError::Malformed(format!("unknown peripheral kind {}", bytes[0])))?;
        let instance = bytes[1];
        let seq = u32::from_le_bytes(bytes[2..6].try_into().expect("4 bytes"));
        let device_time_ms = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
        let tag = bytes[14];
        let len = u16::from_le_bytes([bytes[15], bytes[16]]) as usize;
        let body = &bytes[HEADER_LEN..];

        if !matches!(tag, TAG_PRESSURE_FRAME | TAG_CAN_BAND | TAG_HEARTBEAT) {
            return Err(DecodeError::UnknownKind(tag));
        }
        if body.len() < len {
            return Err(DecodeError::Truncated { needed: HEADER_LEN + len, available: bytes.len() });
        }
        if body.len() > len {
            return Err(DecodeError::Malformed(format!("{} trailing bytes", body.len() - len)));
        }

        let payload = match tag {
            TAG_PRESSURE_FRAME => Payload::PressureFrame(self.decode_frame(body)?),
            TAG_CAN_BAND => Payload::CanBand(decode_can_band(body)?),
            _ => {
                if len != 0 {
                    return Err(DecodeError::Malformed("heartbeat carries a payload".into()));
                }
                Payload::Heartbeat
            }
        };
        Ok(PeripheralPacket { id: PeripheralId { kind, instance }, seq, device_time_ms, payload })
    }

    fn decode_frame(&self, body: &[u8]) -> Result<PressureFramePayload, DecodeError> {
        if body.len() < 2 {
            return Err(DecodeError::Truncated { needed: HEADER_LEN + 2, available: HEADER_LEN + body.len() });
        }
        let (rows, cols) = (body[0], body[1]);
        if rows > self.max_rows || cols > self.max_cols {
            return Err(DecodeError::Malformed(format!("grid {rows}x{cols} exceeds limit")));
        }
        let n = rows as usize * cols as usize;
        let cells_bytes = &body[2..];
        if cells_bytes.len() != n * 4 {
            return Err(DecodeError::Malformed(format!(
                "grid {rows}x{cols} needs {} cell bytes, payload has {}",
                n * 4,
                cells_bytes.len()
            )));
        }
        let cells = cells_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let frame = PressureFramePayload { rows, cols, cells };
        self.check_frame(&frame).map_err(DecodeError::Malformed)?;
        Ok(frame)
    }

    fn check_frame(&self, frame: &PressureFramePayload) -> Result<(), String> {
        if frame.rows == 0 || frame.cols == 0 {
            return Err("grid dimensions must be positive".into());
        }
        if frame.cells.len() != frame.rows as usize * frame.cols as usize {
            return Err(format!("cells length {} != {}x{}", frame.cells.len(), frame.rows, frame.cols));
        }
        if let Some(bad) = frame.cells.iter().find(|c| !(**c >= 0.0 && **c <= self.saturation)) {
            return Err(format!("cell value {bad} outside [0, {}]", self.saturation));
        }
        Ok(())
    }
}

fn check_can_band(cb: &CanBandPayload) -> Result<(), String> {
    if !(cb.grip >= 0.0 && cb.grip.is_finite()) {
        return Err(format!("grip {} must be finite and non-negative", cb.grip));
    }
    if !(cb.lux >= 0.0 && cb.lux.is_finite()) {
        return Err(format!("lux {} must be finite and non-negative", cb.lux));
    }
    if cb.accel.iter().any(|a| !a.is_finite()) {
        return Err("acceleration must be finite".into());
    }
    Ok(())
}

fn decode_can_band(body: &[u8]) -> Result<CanBandPayload, DecodeError> {
    if body.len() != CAN_BAND_PAYLOAD_LEN {
        return Err(DecodeError::Malformed(format!(
            "can band payload is {} bytes, expected {CAN_BAND_PAYLOAD_LEN}",
            body.len()
        )));
    }
    let f = |i: usize| f32::from_le_bytes(body[i..i + 4].try_into().expect("4 bytes"));
    let led_state = LedState::from_code(body[20])
        .ok_or_else(|| DecodeError::Malformed(format!("unknown led state {}", body[20])))?;
    let cb = CanBandPayload { grip: f(0), accel: [f(4), f(8), f(12)], lux: f(16), led_state };
    check_can_band(&cb).map_err(DecodeError::Malformed)?;
    Ok(cb)
}

/// Encodes with the default codec limits.
pub fn encode_packet(packet: &PeripheralPacket) -> Result<Vec<u8>, EncodeError> {
    WireCodec::default().encode(packet)
}

/// Decodes with the default codec limits.
pub fn decode_packet(bytes: &[u8]) -> Result<PeripheralPacket, DecodeError> {
    WireCodec::default().decode(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn heartbeat(kind: PeripheralKind, seq: u32) -> PeripheralPacket {
        PeripheralPacket { id: PeripheralId::new(kind, 0), seq, device_time_ms: 1234, payload: Payload::Heartbeat }
    }

    #[test]
    fn heartbeat_round_trip() {
        let p = heartbeat(PeripheralKind::SeatCushion, 0);
        let bytes = encode_packet(&p).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(decode_packet(&bytes).unwrap(), p);
    }

    #[test]
    fn zero_frame_round_trip() {
        let p = PeripheralPacket {
            id: PeripheralId::new(PeripheralKind::FloorMat, 2),
            seq: 9,
            device_time_ms: 50,
            payload: Payload::PressureFrame(PressureFramePayload::zeros(4, 4)),
        };
        let decoded = decode_packet(&encode_packet(&p).unwrap()).unwrap();
        match &decoded.payload {
            Payload::PressureFrame(f) => {
                assert_eq!(f.cells.len(), 16);
                assert!(f.cells.iter().all(|&c| c == 0.0));
            }
            other => panic!("unexpected payload {other:?}"),
        }
        assert_eq!(decoded, p);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let p = PeripheralPacket {
            id: PeripheralId::new(PeripheralKind::CanBand, 3),
            seq: 0x0102_0304,
            device_time_ms: 0x1122_3344_5566_7788,
            payload: Payload::Heartbeat,
        };
        let b = encode_packet(&p).unwrap();
        assert_eq!(b[0], 4);
        assert_eq!(b[1], 3);
        assert_eq!(&b[2..6], &[0x04, 0x03, 0x02, 0x01]);
        assert_eq!(&b[6..14], &[0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11]);
        assert_eq!(b[14], TAG_HEARTBEAT);
        assert_eq!(&b[15..17], &[0, 0]);
    }

    #[test]
    fn oversized_grid_rejected() {
        let codec = WireCodec { max_rows: 8, max_cols: 8, ..WireCodec::default() };
        let p = PeripheralPacket {
            id: PeripheralId::new(PeripheralKind::FloorMat, 0),
            seq: 0,
            device_time_ms: 0,
            payload: Payload::PressureFrame(PressureFramePayload::zeros(9, 4)),
        };
        assert!(matches!(codec.encode(&p), Err(EncodeError::Oversized { rows: 9, .. })));
    }

    #[test]
    fn empty_input_is_truncated() {
        assert!(matches!(decode_packet(&[]), Err(DecodeError::Truncated { .. })));
    }

    #[test]
    fn flipped_tag_is_unknown_kind() {
        let mut b = encode_packet(&heartbeat(PeripheralKind::ArmrestLeft, 4)).unwrap();
        b[14] = 0xFF;
        assert_eq!(decode_packet(&b), Err(DecodeError::UnknownKind(0xFF)));
    }

    #[test]
    fn negative_cell_is_malformed() {
        let mut frame = PressureFramePayload::zeros(2, 2);
        frame.cells[1] = 5.0;
        let p = PeripheralPacket {
            id: PeripheralId::new(PeripheralKind::SeatCushion, 0),
            seq: 1,
            device_time_ms: 0,
            payload: Payload::PressureFrame(frame),
        };
        let mut b = encode_packet(&p).unwrap();
        b[HEADER_LEN + 2 + 4..HEADER_LEN + 2 + 8].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(decode_packet(&b), Err(DecodeError::Malformed(_))));
    }

    #[test]
    fn truncated_body_and_trailing_bytes() {
        let cb = PeripheralPacket {
            id: PeripheralId::new(PeripheralKind::CanBand, 0),
            seq: 1,
            device_time_ms: 10,
            payload: Payload::CanBand(CanBandPayload {
                grip: 12.5,
                accel: [0.0, 0.1, 9.81],
                lux: 300.0,
                led_state: LedState::Hold,
            }),
        };
        let b = encode_packet(&cb).unwrap();
        assert!(matches!(decode_packet(&b[..b.len() - 1]), Err(DecodeError::Truncated { .. })));
        let mut longer = b.clone();
        longer.push(0);
        assert!(matches!(decode_packet(&longer), Err(DecodeError::Malformed(_))));
        assert_eq!(decode_packet(&b).unwrap(), cb);
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..128)) {
            let _ = decode_packet(&bytes);
        }

        #[test]
        fn header_mutation_never_panics(idx in 0usize..HEADER_LEN, byte in any::<u8>()) {
            let mut b = encode_packet(&heartbeat(PeripheralKind::FloorMat, 7)).unwrap();
            b[idx] = byte;
            let _ = decode_packet(&b);
        }
    }
}
