//! Request and response bodies for every deployable function.
//!
//! All bodies are JSON. Requests carry only what the caller knows; ids that
//! derive from the subscriber and session (charging ids, binding ids) are
//! assigned by the handlers. Enum requests are tagged so the JSON spells
//! out which phase or operation is meant.

use serde::{Deserialize, Serialize};

use super::types::{hex16, AuthVector, Snssai};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationRequest {
    pub supi: String,
    pub requested_snssai: Snssai,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationResponse {
    #[serde(with = "hex16")]
    pub rand: [u8; 16],
    #[serde(with = "hex16")]
    pub autn: [u8; 16],
    pub serving_snssai: Snssai,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum AuthInitiateRequest {
    Issue {
        supi: String,
    },
    Verify {
        supi: String,
        #[serde(with = "hex16")]
        res: [u8; 16],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthChallenge {
    #[serde(with = "hex16")]
    pub rand: [u8; 16],
    #[serde(with = "hex16")]
    pub autn: [u8; 16],
}

/// Successful verify phase: the network is ready to run security-mode
/// control with the UE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecurityModeTrigger {
    pub supi: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AuthDataRequest {
    /// Mint a fresh challenge, advancing the subscriber's sequence number.
    Challenge { supi: String },
    /// Recompute the vector for a known nonce without touching state.
    Verify {
        supi: String,
        #[serde(with = "hex16")]
        rand: [u8; 16],
    },
}

pub type AuthDataResponse = AuthVector;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AusfRequest {
    pub supi: String,
    #[serde(with = "hex16")]
    pub res: [u8; 16],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum AusfResponse {
    Success {
        #[serde(with = "hex16")]
        kseaf: [u8; 16],
    },
    Failure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubscriberDataRequest {
    pub supi: String,
    /// When set, completes registration: requires the security exchange to
    /// have finished and moves the UE context to its registered state.
    #[serde(default)]
    pub finalize: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubscriberDataResponse {
    pub supi: String,
    pub allowed_snssai: Vec<Snssai>,
    pub default_dnn: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PduCreateRequest {
    pub supi: String,
    pub session_id: u8,
    pub dnn: String,
    pub snssai: Snssai,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PduUpdateRequest {
    pub supi: String,
    pub session_id: u8,
    #[serde(default)]
    pub dnn: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PduReleaseRequest {
    pub supi: String,
    pub session_id: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct N4SetupRequest {
    pub supi: String,
    pub session_id: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct N4SetupResponse {
    pub tunnel_key: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeregistrationRequest {
    pub supi: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeregistrationResponse {
    pub supi: String,
    pub released_sessions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub supi: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceResponse {
    pub supi: String,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandoverRequest {
    pub supi: String,
    pub target_gnb_id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandoverResponse {
    pub supi: String,
    pub serving_gnb_id: u32,
}

/// Session-management operation relayed through the access side.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RelayOp {
    Update {
        session_id: u8,
        #[serde(default)]
        dnn: Option<String>,
    },
    Release {
        session_id: u8,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelayRequest {
    pub supi: String,
    #[serde(flatten)]
    pub op: RelayOp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NrfRegisterRequest {
    pub nf_type: String,
    pub instance_id: String,
    pub uri: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NrfRegisterResponse {
    pub nf_type: String,
    pub instance_id: String,
    pub instance_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NrfDiscoverRequest {
    pub nf_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NrfStatusNotifyRequest {
    pub instance_id: String,
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NrfStatusNotifyResponse {
    pub notified: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceCheckRequest {
    pub snssai: Snssai,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceCheckResponse {
    pub snssai: Snssai,
    pub admitted: bool,
    pub registered_ues: u64,
    pub max_ues: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterUpdateRequest {
    pub snssai: Snssai,
    pub delta: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargingCreateRequest {
    pub supi: String,
    pub session_id: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargingUpdateRequest {
    pub id: String,
    pub units: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargingReleaseRequest {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BindingRegisterRequest {
    pub supi: String,
    pub session_id: u8,
    pub pcf_policy_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BindingDiscoverRequest {
    pub supi: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BindingDeregisterRequest {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BindingDeregisterResponse {
    pub id: String,
    pub existed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyCreateRequest {
    pub id: String,
    pub content: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyGetRequest {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UdrReadRequest {
    pub key: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UdrReadResponse {
    pub key: String,
    pub value: serde_json::Value,
    pub version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UdrWriteRequest {
    pub key: String,
    pub value: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UdrWriteResponse {
    pub key: String,
    pub version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticsSubscribeRequest {
    pub id: String,
    pub event_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticsCollectRequest {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticsCollectResponse {
    pub id: String,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceSelectRequest {
    pub supi: String,
    pub requested: Vec<Snssai>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceSelectResponse {
    pub supi: String,
    pub selected: Snssai,
}
