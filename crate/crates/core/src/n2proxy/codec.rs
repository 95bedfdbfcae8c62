//! Binary framing for the access-side signalling link.
//!
//! A frame is a fixed 10-byte header followed by a TLV payload:
//!
//! ```text
//! 0x4E 0x32 | version 0x01 | msg type | ue id (4B BE) | payload len (2B BE)
//! ```
//!
//! Information elements are `tag (1B) | length (2B BE) | value`, encoded in
//! strictly ascending tag order with each tag appearing at most once. The
//! decoder is strict: unknown tags, duplicate tags, out-of-order tags,
//! wrong lengths, and trailing bytes are all errors, so any accepted byte
//! string re-encodes to exactly itself.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::procedures::types::Snssai;

pub const MAGIC: [u8; 2] = [0x4E, 0x32];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 10;

/// Information element tags.
pub mod tag {
    pub const SUPI: u8 = 0x01;
    pub const RAND: u8 = 0x02;
    pub const AUTN: u8 = 0x03;
    pub const RES: u8 = 0x04;
    pub const SNSSAI: u8 = 0x05;
    pub const PDU_SESSION_ID: u8 = 0x06;
    pub const DNN: u8 = 0x07;
    pub const CAUSE: u8 = 0x08;
}

/// Reject cause values carried in the cause element.
pub mod cause {
    pub const UNKNOWN_SUBSCRIBER: u8 = 0x0B;
    pub const AUTH_FAILURE: u8 = 0x15;
    pub const SESSION_ERROR: u8 = 0x24;
    pub const SLICE_UNAVAILABLE: u8 = 0x3E;
    pub const OUT_OF_ORDER_NAS: u8 = 0x5A;
    pub const PROTOCOL_ERROR: u8 = 0x6F;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum NasMsgType {
    RegistrationRequest = 0x01,
    AuthenticationRequest = 0x02,
    AuthenticationResponse = 0x03,
    SecurityModeCommand = 0x04,
    SecurityModeComplete = 0x05,
    RegistrationAccept = 0x06,
    RegistrationComplete = 0x07,
    PduEstablishRequest = 0x08,
    PduEstablishAccept = 0x09,
    PduReleaseRequest = 0x0A,
    PduReleaseAccept = 0x0B,
    DeregistrationRequest = 0x0C,
    DeregistrationAccept = 0x0D,
    Reject = 0x0E,
}

impl NasMsgType {
    pub const ALL: [NasMsgType; 14] = [
        NasMsgType::RegistrationRequest,
        NasMsgType::AuthenticationRequest,
        NasMsgType::AuthenticationResponse,
        NasMsgType::SecurityModeCommand,
        NasMsgType::SecurityModeComplete,
        NasMsgType::RegistrationAccept,
        NasMsgType::RegistrationComplete,
        NasMsgType::PduEstablishRequest,
        NasMsgType::PduEstablishAccept,
        NasMsgType::PduReleaseRequest,
        NasMsgType::PduReleaseAccept,
        NasMsgType::DeregistrationRequest,
        NasMsgType::DeregistrationAccept,
        NasMsgType::Reject,
    ];

    pub fn from_u8(raw: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| *t as u8 == raw)
    }

    /// Tags that must be present for this message to be meaningful.
    pub fn mandatory_tags(self) -> &'static [u8] {
        match self {
            NasMsgType::RegistrationRequest => &[tag::SUPI, tag::SNSSAI],
            NasMsgType::AuthenticationRequest => &[tag::RAND, tag::AUTN],
            NasMsgType::AuthenticationResponse => &[tag::RES],
            NasMsgType::PduEstablishRequest => &[tag::PDU_SESSION_ID, tag::SNSSAI, tag::DNN],
            _ => &[],
        }
    }
}

impl std::fmt::Display for NasMsgType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("bad magic {0:02x}{1:02x}")]
    BadMagic(u8, u8),
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("frame truncated: needed {needed} bytes, got {got}")]
    TruncatedFrame { needed: usize, got: usize },
    #[error("unknown message type {0:#04x}")]
    UnknownMsgType(u8),
    #[error("{msg} is missing mandatory element {tag:#04x}")]
    MissingMandatoryIe { msg: NasMsgType, tag: u8 },
    #[error("element {0:#04x} appears more than once")]
    DuplicateIe(u8),
    #[error("elements out of order: {prev:#04x} then {next:#04x}")]
    NonCanonicalIeOrder { prev: u8, next: u8 },
    #[error("unknown element tag {0:#04x}")]
    UnknownIeTag(u8),
    #[error("element {tag:#04x} must be {expected} bytes, got {got}")]
    BadIeLength { tag: u8, expected: usize, got: usize },
    #[error("element {tag:#04x} is invalid: {reason}")]
    BadIeValue { tag: u8, reason: String },
    #[error("{0} bytes of trailing garbage after the payload")]
    TrailingBytes(usize),
    #[error("payload of {0} bytes exceeds the 16-bit length field")]
    PayloadTooLarge(usize),
}

fn expected_len(t: u8) -> Option<usize> {
    match t {
        tag::RAND | tag::AUTN | tag::RES => Some(16),
        tag::SNSSAI => Some(4),
        tag::PDU_SESSION_ID | tag::CAUSE => Some(1),
        tag::SUPI | tag::DNN => None,
        _ => None,
    }
}

fn known_tag(t: u8) -> bool {
    (tag::SUPI..=tag::CAUSE).contains(&t)
}

fn validate_ie(t: u8, value: &[u8]) -> Result<(), CodecError> {
    if !known_tag(t) {
        return Err(CodecError::UnknownIeTag(t));
    }
    if let Some(expected) = expected_len(t) {
        if value.len() != expected {
            return Err(CodecError::BadIeLength {
                tag: t,
                expected,
                got: value.len(),
            });
        }
    }
    if matches!(t, tag::SUPI | tag::DNN) {
        if value.is_empty() {
            return Err(CodecError::BadIeValue {
                tag: t,
                reason: "empty string".to_string(),
            });
        }
        if std::str::from_utf8(value).is_err() {
            return Err(CodecError::BadIeValue {
                tag: t,
                reason: "not valid UTF-8".to_string(),
            });
        }
    }
    Ok(())
}

/// One signalling message: type, addressed UE, and its elements. Elements
/// are kept in a tag-ordered map, so encoding is canonical by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct N2Frame {
    pub msg_type: NasMsgType,
    pub ue_id: u32,
    ies: BTreeMap<u8, Vec<u8>>,
}

impl N2Frame {
    pub fn new(msg_type: NasMsgType, ue_id: u32) -> Self {
        N2Frame {
            msg_type,
            ue_id,
            ies: BTreeMap::new(),
        }
    }

    /// Sets a raw element. The value is validated at encode time.
    pub fn set_ie(&mut self, t: u8, value: Vec<u8>) -> &mut Self {
        self.ies.insert(t, value);
        self
    }

    pub fn with_supi(mut self, supi: &str) -> Self {
        self.ies.insert(tag::SUPI, supi.as_bytes().to_vec());
        self
    }

    pub fn with_rand(mut self, rand: [u8; 16]) -> Self {
        self.ies.insert(tag::RAND, rand.to_vec());
        self
    }

    pub fn with_autn(mut self, autn: [u8; 16]) -> Self {
        self.ies.insert(tag::AUTN, autn.to_vec());
        self
    }

    pub fn with_res(mut self, res: [u8; 16]) -> Self {
        self.ies.insert(tag::RES, res.to_vec());
        self
    }

    pub fn with_snssai(mut self, snssai: Snssai) -> Self {
        let sd = snssai.sd.to_be_bytes();
        self.ies
            .insert(tag::SNSSAI, vec![snssai.sst, sd[1], sd[2], sd[3]]);
        self
    }

    pub fn with_pdu_session_id(mut self, id: u8) -> Self {
        self.ies.insert(tag::PDU_SESSION_ID, vec![id]);
        self
    }

    pub fn with_dnn(mut self, dnn: &str) -> Self {
        self.ies.insert(tag::DNN, dnn.as_bytes().to_vec());
        self
    }

    pub fn with_cause(mut self, cause: u8) -> Self {
        self.ies.insert(tag::CAUSE, vec![cause]);
        self
    }

    pub fn ie(&self, t: u8) -> Option<&[u8]> {
        self.ies.get(&t).map(|v| v.as_slice())
    }

    pub fn tags(&self) -> impl Iterator<Item = u8> + '_ {
        self.ies.keys().copied()
    }

    pub fn supi(&self) -> Option<&str> {
        self.ie(tag::SUPI).and_then(|v| std::str::from_utf8(v).ok())
    }

    pub fn dnn(&self) -> Option<&str> {
        self.ie(tag::DNN).and_then(|v| std::str::from_utf8(v).ok())
    }

    fn fixed16(&self, t: u8) -> Option<[u8; 16]> {
        self.ie(t).and_then(|v| v.try_into().ok())
    }

    pub fn rand(&self) -> Option<[u8; 16]> {
        self.fixed16(tag::RAND)
    }

    pub fn autn(&self) -> Option<[u8; 16]> {
        self.fixed16(tag::AUTN)
    }

    pub fn res(&self) -> Option<[u8; 16]> {
        self.fixed16(tag::RES)
    }

    pub fn snssai(&self) -> Option<Snssai> {
        self.ie(tag::SNSSAI).and_then(|v| {
            if v.len() != 4 {
                return None;
            }
            Some(Snssai {
                sst: v[0],
                sd: u32::from_be_bytes([0, v[1], v[2], v[3]]),
            })
        })
    }

    pub fn pdu_session_id(&self) -> Option<u8> {
        self.ie(tag::PDU_SESSION_ID).map(|v| v[0])
    }

    pub fn cause(&self) -> Option<u8> {
        self.ie(tag::CAUSE).map(|v| v[0])
    }

    fn check_mandatory(&self) -> Result<(), CodecError> {
        for &t in self.msg_type.mandatory_tags() {
            if !self.ies.contains_key(&t) {
                return Err(CodecError::MissingMandatoryIe {
                    msg: self.msg_type,
                    tag: t,
                });
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        self.check_mandatory()?;
        let mut payload = Vec::new();
        for (&t, value) in &self.ies {
            validate_ie(t, value)?;
            if value.len() > u16::MAX as usize {
                return Err(CodecError::PayloadTooLarge(value.len()));
            }
            payload.push(t);
            payload.extend_from_slice(&(value.len() as u16).to_be_bytes());
            payload.extend_from_slice(value);
        }
        if payload.len() > u16::MAX as usize {
            return Err(CodecError::PayloadTooLarge(payload.len()));
        }

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.ue_id.to_be_bytes());
        out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::TruncatedFrame {
                needed: HEADER_LEN,
                got: bytes.len(),
            });
        }
        if bytes[0] != MAGIC[0] || bytes[1] != MAGIC[1] {
            return Err(CodecError::BadMagic(bytes[0], bytes[1]));
        }
        if bytes[2] != VERSION {
            return Err(CodecError::BadVersion(bytes[2]));
        }
        let msg_type =
            NasMsgType::from_u8(bytes[3]).ok_or(CodecError::UnknownMsgType(bytes[3]))?;
        let ue_id = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        let payload_len = u16::from_be_bytes([bytes[8], bytes[9]]) as usize;

        let total = HEADER_LEN + payload_len;
        if bytes.len() < total {
            return Err(CodecError::TruncatedFrame {
                needed: total,
                got: bytes.len(),
            });
        }
        if bytes.len() > total {
            return Err(CodecError::TrailingBytes(bytes.len() - total));
        }

        let mut ies = BTreeMap::new();
        let mut cursor = HEADER_LEN;
        let mut prev_tag: Option<u8> = None;
        while cursor < total {
            if total - cursor < 3 {
                return Err(CodecError::TruncatedFrame {
                    needed: cursor + 3,
                    got: total,
                });
            }
            let t = bytes[cursor];
            let len = u16::from_be_bytes([bytes[cursor + 1], bytes[cursor + 2]]) as usize;
            cursor += 3;
            if total - cursor < len {
                return Err(CodecError::TruncatedFrame {
                    needed: cursor + len,
                    got: total,
                });
            }
            let value = bytes[cursor..cursor + len].to_vec();
            cursor += len;

            if let Some(prev) = prev_tag {
                if t == prev {
                    return Err(CodecError::DuplicateIe(t));
                }
                if t < prev {
                    return Err(CodecError::NonCanonicalIeOrder { prev, next: t });
                }
            }
            validate_ie(t, &value)?;
            prev_tag = Some(t);
            ies.insert(t, value);
        }

        let frame = N2Frame {
            msg_type,
            ue_id,
            ies,
        };
        frame.check_mandatory()?;
        Ok(frame)
    }
}
