//! Domain records shared by the control-plane handlers.
//!
//! Everything here serializes to JSON with stable field order, because these
//! structs are what lands in the state store and what the debug dumps show.
//! Session-scoped records (PDU sessions, charging sessions, bindings) use a
//! `{supi}/{session_id}` composite id so per-subscriber prefix scans work
//! without a secondary index.

use serde::{Deserialize, Serialize};

/// Hex (de)serialization for 16-byte values: keys, challenges, digests.
pub mod hex16 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 16], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 16], D::Error> {
        let raw = String::deserialize(d)?;
        let bytes = hex::decode(&raw).map_err(serde::de::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("expected 16 bytes of hex"))
    }
}

/// Same as [`hex16`] for optional values.
pub mod hex16_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<[u8; 16]>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bytes) => s.serialize_some(&hex::encode(bytes)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[u8; 16]>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        match raw {
            None => Ok(None),
            Some(text) => {
                let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
                let arr = bytes
                    .try_into()
                    .map_err(|_| serde::de::Error::custom("expected 16 bytes of hex"))?;
                Ok(Some(arr))
            }
        }
    }
}

/// Network slice selector: slice/service type plus a 24-bit slice
/// differentiator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snssai {
    pub sst: u8,
    pub sd: u32,
}

impl Snssai {
    pub fn new(sst: u8, sd: u32) -> Self {
        assert!(sd <= 0xFF_FFFF, "slice differentiator is 24-bit");
        Snssai { sst, sd }
    }

    /// Store key for this slice's admission counters.
    pub fn counters_key(&self) -> String {
        format!("nsacf-counters/{}-{:06x}", self.sst, self.sd)
    }
}

impl std::fmt::Display for Snssai {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{:06x}", self.sst, self.sd)
    }
}

/// Provisioned subscriber entry, the root of everything a UE can do.
/// `sqn` advances by one per issued challenge so a replayed challenge is
/// distinguishable from a fresh one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriberRecord {
    pub supi: String,
    #[serde(with = "hex16")]
    pub k: [u8; 16],
    pub sqn: u64,
    pub allowed_snssai: Vec<Snssai>,
    pub default_dnn: String,
}

/// One authentication challenge and its expected answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthVector {
    #[serde(with = "hex16")]
    pub rand: [u8; 16],
    #[serde(with = "hex16")]
    pub autn: [u8; 16],
    #[serde(with = "hex16")]
    pub xres: [u8; 16],
    #[serde(with = "hex16")]
    pub kseaf: [u8; 16],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegState {
    AuthPending,
    SecurityPending,
    Registered,
}

/// Per-UE registration context. Absence of the record is the deregistered
/// state. `next` session ids are proposed by the UE, so the context only
/// tracks which ones are active.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeContext {
    pub supi: String,
    pub reg_state: RegState,
    pub serving_snssai: Snssai,
    #[serde(with = "hex16_opt", default)]
    pub kseaf: Option<[u8; 16]>,
    pub active_pdu_ids: Vec<u8>,
    #[serde(default)]
    pub serving_gnb_id: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PduState {
    Active,
    Released,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PduSession {
    pub session_id: u8,
    pub supi: String,
    pub dnn: String,
    pub snssai: Snssai,
    pub state: PduState,
    #[serde(default)]
    pub charging_id: Option<String>,
    #[serde(default)]
    pub binding_id: Option<String>,
}

/// Service-registry entry for one network-function instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NfProfile {
    pub nf_type: String,
    pub instance_id: String,
    pub uri: String,
    #[serde(default)]
    pub registered_at_us: u64,
    #[serde(default)]
    pub heartbeat_at_us: u64,
}

/// Per-slice admission book-keeping. `registered_ues` never exceeds
/// `max_ues` and never goes below zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceCounters {
    pub snssai: Snssai,
    pub registered_ues: u64,
    pub max_ues: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChargingState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub id: String,
    pub supi: String,
    pub session_id: u8,
    pub units: u64,
    pub state: ChargingState,
}

/// PCF binding for one PDU session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub id: String,
    pub supi: String,
    pub session_id: u8,
    pub pcf_policy_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcfPolicy {
    pub id: String,
    pub content: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub value: f64,
    pub recorded_at_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsSubscription {
    pub id: String,
    pub event_type: String,
    pub samples: Vec<MetricSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusEvent {
    pub instance_id: String,
    pub status: String,
    pub at_us: u64,
}

/// Registry subscription that accumulates status events for one NF type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NfStatusSubscription {
    pub id: String,
    pub nf_type: String,
    pub events: Vec<StatusEvent>,
}

pub fn ue_key(supi: &str) -> String {
    format!("ue:{supi}")
}

pub fn udr_key(key: &str) -> String {
    format!("udr/{key}")
}

/// Subscribers live in the subscriber-data namespace of the UDR keyspace.
pub fn subscriber_key(supi: &str) -> String {
    udr_key(&format!("subscribers/{supi}"))
}

pub fn auth_key(supi: &str) -> String {
    format!("auth:{supi}")
}

/// Composite id used for everything scoped to one PDU session.
pub fn session_scoped_id(supi: &str, session_id: u8) -> String {
    format!("{supi}/{session_id}")
}

pub fn pdu_key(supi: &str, session_id: u8) -> String {
    format!("pdu:{}", session_scoped_id(supi, session_id))
}

pub fn n4_key(supi: &str, session_id: u8) -> String {
    format!("n4:{}", session_scoped_id(supi, session_id))
}

pub fn charging_key(id: &str) -> String {
    format!("charging-sessions/{id}")
}

pub fn binding_key(id: &str) -> String {
    format!("bsf-bindings/{id}")
}

pub fn policy_key(id: &str) -> String {
    format!("pcf-policies/{id}")
}

pub fn analytics_key(id: &str) -> String {
    format!("nwdaf-subs/{id}")
}

pub fn nrf_key(nf_type: &str, instance_id: &str) -> String {
    format!("nrf/{nf_type}/{instance_id}")
}

pub fn nrf_sub_key(id: &str) -> String {
    format!("nrf-subs/{id}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snssai_counter_key_zero_pads_the_differentiator() {
        assert_eq!(Snssai::new(1, 1).counters_key(), "nsacf-counters/1-000001");
        assert_eq!(
            Snssai::new(2, 0xABCDEF).counters_key(),
            "nsacf-counters/2-abcdef"
        );
    }

    #[test]
    fn subscriber_record_round_trips_with_hex_key() {
        let sub = SubscriberRecord {
            supi: "imsi-000000000000001".to_string(),
            k: [0xA5; 16],
            sqn: 7,
            allowed_snssai: vec![Snssai::new(1, 1)],
            default_dnn: "internet".to_string(),
        };
        let json = serde_json::to_string(&sub).unwrap();
        assert!(json.contains(&"a5".repeat(16)));
        let back: SubscriberRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sub);
    }

    #[test]
    fn ue_context_defaults_cover_absent_fields() {
        let json = r#"{
            "supi": "imsi-000000000000001",
            "reg_state": "AuthPending",
            "serving_snssai": {"sst": 1, "sd": 1},
            "active_pdu_ids": []
        }"#;
        let ctx: UeContext = serde_json::from_str(json).unwrap();
        assert_eq!(ctx.kseaf, None);
        assert_eq!(ctx.serving_gnb_id, None);
    }

    #[test]
    fn session_scoped_keys_compose() {
        assert_eq!(pdu_key("imsi-1", 3), "pdu:imsi-1/3");
        assert_eq!(charging_key(&session_scoped_id("imsi-1", 3)), "charging-sessions/imsi-1/3");
    }
}
