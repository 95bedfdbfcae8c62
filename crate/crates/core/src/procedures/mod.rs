//! Control-plane procedures decomposed into independently deployable
//! functions.
//!
//! Registration is a three-step exchange driven by the access side: the
//! initial request triggers challenge generation, the authentication
//! response triggers verification, and the security-mode completion
//! triggers profile finalization. Session establishment, mobility, and the
//! later-generation charging, binding, admission, and analytics procedures
//! each map to their own function. [`dispatch`] is the single routing
//! point from a function name to its handler.
//!
//! State transitions are conservative: a subscriber context only moves
//! forward through authentication, a fresh registration may restart the
//! cycle, and deregistration cascades over every record the subscriber's
//! sessions created.

pub mod auth;
mod handlers;
pub mod msg;
pub mod provision;
pub mod types;

use thiserror::Error;

pub use handlers::insert_status_subscription;

use crate::faasruntime::{Cluster, Correlation};
use crate::simkernel::VirtualTime;

/// Why a procedure refused to run. Validation failures surface before any
/// state changes; failures after a nested call leave earlier effects in
/// place, matching how independently deployed functions actually fail.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcError {
    #[error("no subscriber provisioned for {0}")]
    UnknownSubscriber(String),
    #[error("subscriber {supi} is {actual}, procedure needs {expected}")]
    WrongState {
        supi: String,
        expected: String,
        actual: String,
    },
    #[error("no registration context for {0}")]
    NoContext(String),
    #[error("{0} is not registered")]
    NotRegistered(String),
    #[error("no pending challenge for {0}")]
    NoPendingChallenge(String),
    #[error("authentication failed for {0}")]
    AuthFailed(String),
    #[error("slice {snssai} is at capacity ({registered}/{max})")]
    SliceAdmissionRejected {
        snssai: String,
        registered: u64,
        max: u64,
    },
    #[error("slice {0} counter cannot go below zero")]
    CounterUnderflow(String),
    #[error("session {session_id} already exists for {supi}")]
    DuplicateSession { supi: String, session_id: u8 },
    #[error("no session {session_id} for {supi}")]
    UnknownSession { supi: String, session_id: u8 },
    #[error("session {session_id} for {supi} is already released")]
    SessionReleased { supi: String, session_id: u8 },
    #[error("no charging session {0}")]
    UnknownChargingSession(String),
    #[error("charging session {0} is closed")]
    ChargingSessionClosed(String),
    #[error("no registered instance {0}")]
    UnknownInstance(String),
    #[error("no record at {0}")]
    UnknownKey(String),
    #[error("no analytics subscription {0}")]
    UnknownSubscription(String),
    #[error("no requested slice is allowed for {0} and no fallback exists")]
    NoAllowedSlice(String),
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Routes one invocation to its handler. `at` is when the function's own
/// execution finished; the returned time covers everything it called.
pub fn dispatch(
    cl: &mut Cluster,
    name: &str,
    request: &[u8],
    at: VirtualTime,
    corr: &Correlation,
) -> (VirtualTime, Result<Vec<u8>, ProcError>) {
    macro_rules! route {
        ($handler:path) => {{
            match serde_json::from_slice(request) {
                Ok(req) => {
                    let (t, res) = $handler(cl, at, corr, req);
                    (
                        t,
                        res.map(|resp| serde_json::to_vec(&resp).expect("responses serialize")),
                    )
                }
                Err(e) => (at, Err(ProcError::BadRequest(e.to_string()))),
            }
        }};
    }

    match name {
        "amf-initial-registration" => route!(handlers::amf_initial_registration),
        "amf-auth-initiate" => route!(handlers::amf_auth_initiate),
        "amf-deregistration" => route!(handlers::amf_deregistration),
        "amf-service-request" => route!(handlers::amf_service_request),
        "amf-handover" => route!(handlers::amf_handover),
        "amf-pdu-session-relay" => route!(handlers::amf_pdu_session_relay),
        "smf-pdu-session-create" => route!(handlers::smf_pdu_session_create),
        "smf-pdu-session-update" => route!(handlers::smf_pdu_session_update),
        "smf-pdu-session-release" => route!(handlers::smf_pdu_session_release),
        "smf-n4-setup" => route!(handlers::smf_n4_setup),
        "udm-generate-auth-data" => route!(handlers::udm_generate_auth_data),
        "udm-get-subscriber-data" => route!(handlers::udm_get_subscriber_data),
        "udr-data-read" => route!(handlers::udr_data_read),
        "udr-data-write" => route!(handlers::udr_data_write),
        "ausf-authenticate" => route!(handlers::ausf_authenticate),
        "nrf-register" => route!(handlers::nrf_register),
        "nrf-discover" => route!(handlers::nrf_discover),
        "nrf-status-notify" => route!(handlers::nrf_status_notify),
        "pcf-policy-create" => route!(handlers::pcf_policy_create),
        "pcf-policy-get" => route!(handlers::pcf_policy_get),
        "nssf-slice-select" => route!(handlers::nssf_slice_select),
        "nsacf-slice-availability-check" => route!(handlers::nsacf_slice_availability_check),
        "nsacf-update-counters" => route!(handlers::nsacf_update_counters),
        "chf-charging-create" => route!(handlers::chf_charging_create),
        "chf-charging-update" => route!(handlers::chf_charging_update),
        "chf-charging-release" => route!(handlers::chf_charging_release),
        "bsf-binding-register" => route!(handlers::bsf_binding_register),
        "bsf-binding-discover" => route!(handlers::bsf_binding_discover),
        "bsf-binding-deregister" => route!(handlers::bsf_binding_deregister),
        "nwdaf-analytics-subscribe" => route!(handlers::nwdaf_analytics_subscribe),
        "nwdaf-data-collect" => route!(handlers::nwdaf_data_collect),
        other => (
            at,
            Err(ProcError::Internal(format!("no handler bound for {other}"))),
        ),
    }
}
