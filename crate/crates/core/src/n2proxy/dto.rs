//! Flat, human-editable form of one frame, for JSON tooling surfaces.
//!
//! Binary fields are hex strings and the message type is its name, so a
//! message can be written by hand, piped through the codec, and read back
//! without knowing tag numbers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::procedures::types::Snssai;

use super::codec::{N2Frame, NasMsgType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDto {
    pub msg_type: String,
    pub ue_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snssai: Option<Snssai>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdu_session_id: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dnn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<u8>,
}

#[derive(Debug, Error)]
pub enum FrameDtoError {
    #[error("unknown msg_type {name:?}; expected one of {known}")]
    UnknownMsgType { name: String, known: String },
    #[error("{field} is not valid hex: {source}")]
    BadHex {
        field: &'static str,
        source: hex::FromHexError,
    },
    #[error("{field} must be exactly 16 bytes of hex")]
    WrongLength { field: &'static str },
}

pub fn msg_type_name(t: NasMsgType) -> String {
    format!("{t:?}")
}

pub fn msg_type_from_name(name: &str) -> Result<NasMsgType, FrameDtoError> {
    NasMsgType::ALL
        .into_iter()
        .find(|t| msg_type_name(*t) == name)
        .ok_or_else(|| FrameDtoError::UnknownMsgType {
            name: name.to_string(),
            known: NasMsgType::ALL
                .into_iter()
                .map(msg_type_name)
                .collect::<Vec<_>>()
                .join(", "),
        })
}

fn parse_hex16(field: &'static str, raw: &str) -> Result<[u8; 16], FrameDtoError> {
    let bytes = hex::decode(raw).map_err(|source| FrameDtoError::BadHex { field, source })?;
    bytes
        .try_into()
        .map_err(|_| FrameDtoError::WrongLength { field })
}

pub fn dto_to_frame(dto: &FrameDto) -> Result<N2Frame, FrameDtoError> {
    let mut frame = N2Frame::new(msg_type_from_name(&dto.msg_type)?, dto.ue_id);
    if let Some(supi) = &dto.supi {
        frame = frame.with_supi(supi);
    }
    if let Some(raw) = &dto.rand {
        frame = frame.with_rand(parse_hex16("rand", raw)?);
    }
    if let Some(raw) = &dto.autn {
        frame = frame.with_autn(parse_hex16("autn", raw)?);
    }
    if let Some(raw) = &dto.res {
        frame = frame.with_res(parse_hex16("res", raw)?);
    }
    if let Some(snssai) = dto.snssai {
        frame = frame.with_snssai(snssai);
    }
    if let Some(id) = dto.pdu_session_id {
        frame = frame.with_pdu_session_id(id);
    }
    if let Some(dnn) = &dto.dnn {
        frame = frame.with_dnn(dnn);
    }
    if let Some(cause) = dto.cause {
        frame = frame.with_cause(cause);
    }
    Ok(frame)
}

pub fn frame_to_dto(frame: &N2Frame) -> FrameDto {
    FrameDto {
        msg_type: msg_type_name(frame.msg_type),
        ue_id: frame.ue_id,
        supi: frame.supi().map(str::to_string),
        rand: frame.rand().map(hex::encode),
        autn: frame.autn().map(hex::encode),
        res: frame.res().map(hex::encode),
        snssai: frame.snssai(),
        pdu_session_id: frame.pdu_session_id(),
        dnn: frame.dnn().map(str::to_string),
        cause: frame.cause(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip_through_the_dto() {
        let frame = N2Frame::new(NasMsgType::PduEstablishRequest, 77)
            .with_pdu_session_id(3)
            .with_snssai(Snssai::new(1, 0xABCDEF))
            .with_dnn("internet");
        let dto = frame_to_dto(&frame);
        assert_eq!(dto.msg_type, "PduEstablishRequest");
        assert_eq!(dto.dnn.as_deref(), Some("internet"));
        assert_eq!(dto_to_frame(&dto).unwrap(), frame);
    }

    #[test]
    fn bad_names_and_hex_are_rejected() {
        assert!(matches!(
            msg_type_from_name("Hello"),
            Err(FrameDtoError::UnknownMsgType { .. })
        ));
        let dto = FrameDto {
            msg_type: "AuthenticationResponse".to_string(),
            ue_id: 1,
            supi: None,
            rand: None,
            autn: None,
            res: Some("abc".to_string()),
            snssai: None,
            pdu_session_id: None,
            dnn: None,
            cause: None,
        };
        assert!(matches!(
            dto_to_frame(&dto),
            Err(FrameDtoError::BadHex { field: "res", .. })
        ));
        let dto = FrameDto {
            res: Some("00".repeat(8)),
            ..dto
        };
        assert!(matches!(
            dto_to_frame(&dto),
            Err(FrameDtoError::WrongLength { field: "res" })
        ));
    }
}
