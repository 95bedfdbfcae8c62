//! The 31 deployable control-plane procedures.
//!
//! Every handler has the same shape: it receives the cluster, the virtual
//! time at which its own execution finished, the call correlation, and its
//! parsed request. It returns the time at which its whole call tree
//! finished together with its response. Errors carry that time too, since
//! a rejection that followed a nested call still took that long to reach.
//!
//! Handlers read and write the shared store directly for their own NF's
//! data and invoke sibling functions for everything else, so the ledger
//! reflects exactly the cross-NF traffic a procedure generates.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::faasruntime::{Cluster, Correlation};
use crate::simkernel::VirtualTime;
use crate::statestore::{Store, StoreKey, TxnOp, TxnResult};

use super::auth;
use super::msg::*;
use super::types::*;
use super::ProcError;

type Out<T> = (VirtualTime, Result<T, ProcError>);

macro_rules! fail {
    ($at:expr, $err:expr) => {
        return ($at, Err($err))
    };
}

macro_rules! chain {
    ($cl:expr, $at:ident, $corr:expr, $name:expr, $req:expr) => {{
        let (t, res) = $cl.call($name, &$req, $at, $corr);
        $at = t;
        match res {
            Ok(v) => v,
            Err(e) => return ($at, Err(e)),
        }
    }};
}

fn load<T: DeserializeOwned>(store: &Store, key: &str) -> Option<T> {
    store
        .get(key)
        .and_then(|rec| serde_json::from_slice(&rec.value).ok())
}

fn save<T: Serialize>(store: &mut Store, key: &str, value: &T) -> Result<u64, ProcError> {
    let bytes = serde_json::to_vec(value).expect("records serialize");
    store
        .put(key, bytes)
        .map_err(|e| ProcError::BadRequest(e.to_string()))
}

fn state_name(state: RegState) -> &'static str {
    match state {
        RegState::AuthPending => "AuthPending",
        RegState::SecurityPending => "SecurityPending",
        RegState::Registered => "Registered",
    }
}

fn wrong_state(supi: &str, expected: &str, actual: RegState) -> ProcError {
    ProcError::WrongState {
        supi: supi.to_string(),
        expected: expected.to_string(),
        actual: state_name(actual).to_string(),
    }
}

fn registered_context(store: &Store, supi: &str) -> Result<UeContext, ProcError> {
    let ctx: UeContext =
        load(store, &ue_key(supi)).ok_or_else(|| ProcError::NotRegistered(supi.to_string()))?;
    if ctx.reg_state != RegState::Registered {
        return Err(wrong_state(supi, "Registered", ctx.reg_state));
    }
    Ok(ctx)
}

pub fn amf_initial_registration(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: RegistrationRequest,
) -> Out<RegistrationResponse> {
    let Some(sub) = load::<SubscriberRecord>(&cl.store, &subscriber_key(&req.supi)) else {
        fail!(at, ProcError::UnknownSubscriber(req.supi));
    };
    let serving = if sub.allowed_snssai.contains(&req.requested_snssai) {
        req.requested_snssai
    } else {
        match sub.allowed_snssai.first() {
            Some(first) => *first,
            None => fail!(at, ProcError::NoAllowedSlice(req.supi)),
        }
    };

    let previous: Option<UeContext> = load(&cl.store, &ue_key(&req.supi));
    let held_slice = previous.as_ref().map(|c| c.serving_snssai);

    if cl.cfg.r17 && held_slice != Some(serving) {
        let check: SliceCheckResponse = chain!(
            cl,
            at,
            corr,
            "nsacf-slice-availability-check",
            SliceCheckRequest { snssai: serving }
        );
        if !check.admitted {
            fail!(
                at,
                ProcError::SliceAdmissionRejected {
                    snssai: serving.to_string(),
                    registered: check.registered_ues,
                    max: check.max_ues,
                }
            );
        }
        let _: SliceCounters = chain!(
            cl,
            at,
            corr,
            "nsacf-update-counters",
            CounterUpdateRequest {
                snssai: serving,
                delta: 1,
            }
        );
        if let Some(old) = held_slice {
            let _: SliceCounters = chain!(
                cl,
                at,
                corr,
                "nsacf-update-counters",
                CounterUpdateRequest {
                    snssai: old,
                    delta: -1,
                }
            );
        }
    }

    let ctx = UeContext {
        supi: req.supi.clone(),
        reg_state: RegState::AuthPending,
        serving_snssai: serving,
        kseaf: None,
        active_pdu_ids: previous.map(|c| c.active_pdu_ids).unwrap_or_default(),
        serving_gnb_id: None,
    };
    if let Err(e) = save(&mut cl.store, &ue_key(&req.supi), &ctx) {
        fail!(at, e);
    }

    let challenge: AuthChallenge = chain!(
        cl,
        at,
        corr,
        "amf-auth-initiate",
        AuthInitiateRequest::Issue {
            supi: req.supi.clone(),
        }
    );

    (
        at,
        Ok(RegistrationResponse {
            rand: challenge.rand,
            autn: challenge.autn,
            serving_snssai: serving,
        }),
    )
}

pub fn amf_auth_initiate(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: AuthInitiateRequest,
) -> Out<serde_json::Value> {
    match req {
        AuthInitiateRequest::Issue { supi } => {
            let Some(ctx) = load::<UeContext>(&cl.store, &ue_key(&supi)) else {
                fail!(at, ProcError::NoContext(supi));
            };
            if ctx.reg_state != RegState::AuthPending {
                fail!(at, wrong_state(&supi, "AuthPending", ctx.reg_state));
            }
            let vector: AuthDataResponse = chain!(
                cl,
                at,
                corr,
                "udm-generate-auth-data",
                AuthDataRequest::Challenge { supi }
            );
            let challenge = AuthChallenge {
                rand: vector.rand,
                autn: vector.autn,
            };
            (at, Ok(serde_json::to_value(challenge).expect("serializes")))
        }
        AuthInitiateRequest::Verify { supi, res } => {
            let Some(mut ctx) = load::<UeContext>(&cl.store, &ue_key(&supi)) else {
                fail!(at, ProcError::NoContext(supi));
            };
            if ctx.reg_state != RegState::AuthPending {
                fail!(at, wrong_state(&supi, "AuthPending", ctx.reg_state));
            }
            let verdict: AusfResponse = chain!(
                cl,
                at,
                corr,
                "ausf-authenticate",
                AusfRequest {
                    supi: supi.clone(),
                    res,
                }
            );
            match verdict {
                AusfResponse::Success { kseaf } => {
                    ctx.reg_state = RegState::SecurityPending;
                    ctx.kseaf = Some(kseaf);
                    if let Err(e) = save(&mut cl.store, &ue_key(&supi), &ctx) {
                        fail!(at, e);
                    }
                    let trigger = SecurityModeTrigger { supi };
                    (at, Ok(serde_json::to_value(trigger).expect("serializes")))
                }
                AusfResponse::Failure => fail!(at, ProcError::AuthFailed(supi)),
            }
        }
    }
}

pub fn udm_generate_auth_data(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: AuthDataRequest,
) -> Out<AuthDataResponse> {
    match req {
        AuthDataRequest::Challenge { supi } => {
            let Some(mut sub) = load::<SubscriberRecord>(&cl.store, &subscriber_key(&supi)) else {
                fail!(at, ProcError::UnknownSubscriber(supi));
            };
            sub.sqn += 1;
            let mut rand = [0u8; 16];
            cl.auth_rng.fill_bytes(&mut rand);
            let vector = auth::compute_vector(&sub.k, rand, sub.sqn);
            if let Err(e) = save(&mut cl.store, &subscriber_key(&supi), &sub) {
                fail!(at, e);
            }
            if let Err(e) = save(&mut cl.store, &auth_key(&supi), &vector) {
                fail!(at, e);
            }
            (at, Ok(vector))
        }
        AuthDataRequest::Verify { supi, rand } => {
            let Some(sub) = load::<SubscriberRecord>(&cl.store, &subscriber_key(&supi)) else {
                fail!(at, ProcError::UnknownSubscriber(supi));
            };
            (at, Ok(auth::compute_vector(&sub.k, rand, sub.sqn)))
        }
    }
}

pub fn ausf_authenticate(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: AusfRequest,
) -> Out<AusfResponse> {
    let Some(pending) = load::<AuthVector>(&cl.store, &auth_key(&req.supi)) else {
        fail!(at, ProcError::NoPendingChallenge(req.supi));
    };
    let recomputed: AuthDataResponse = chain!(
        cl,
        at,
        corr,
        "udm-generate-auth-data",
        AuthDataRequest::Verify {
            supi: req.supi.clone(),
            rand: pending.rand,
        }
    );
    if req.res == recomputed.xres {
        cl.store.delete(&auth_key(&req.supi));
        (
            at,
            Ok(AusfResponse::Success {
                kseaf: recomputed.kseaf,
            }),
        )
    } else {
        (at, Ok(AusfResponse::Failure))
    }
}

pub fn udm_get_subscriber_data(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: SubscriberDataRequest,
) -> Out<SubscriberDataResponse> {
    let Some(sub) = load::<SubscriberRecord>(&cl.store, &subscriber_key(&req.supi)) else {
        fail!(at, ProcError::UnknownSubscriber(req.supi));
    };
    if req.finalize {
        let Some(mut ctx) = load::<UeContext>(&cl.store, &ue_key(&req.supi)) else {
            fail!(at, ProcError::NoContext(req.supi));
        };
        if ctx.reg_state != RegState::SecurityPending {
            fail!(at, wrong_state(&req.supi, "SecurityPending", ctx.reg_state));
        }
        ctx.reg_state = RegState::Registered;
        if let Err(e) = save(&mut cl.store, &ue_key(&req.supi), &ctx) {
            fail!(at, e);
        }
    }
    (
        at,
        Ok(SubscriberDataResponse {
            supi: sub.supi,
            allowed_snssai: sub.allowed_snssai,
            default_dnn: sub.default_dnn,
        }),
    )
}

pub fn smf_pdu_session_create(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: PduCreateRequest,
) -> Out<PduSession> {
    let mut ctx = match registered_context(&cl.store, &req.supi) {
        Ok(c) => c,
        Err(e) => fail!(at, e),
    };
    if cl.store.get(&pdu_key(&req.supi, req.session_id)).is_some() {
        fail!(
            at,
            ProcError::DuplicateSession {
                supi: req.supi,
                session_id: req.session_id,
            }
        );
    }

    let mut session = PduSession {
        session_id: req.session_id,
        supi: req.supi.clone(),
        dnn: req.dnn,
        snssai: req.snssai,
        state: PduState::Active,
        charging_id: None,
        binding_id: None,
    };

    if cl.cfg.r17 {
        let charging: ChargingSession = chain!(
            cl,
            at,
            corr,
            "chf-charging-create",
            ChargingCreateRequest {
                supi: req.supi.clone(),
                session_id: req.session_id,
            }
        );
        session.charging_id = Some(charging.id);
        let binding: Binding = chain!(
            cl,
            at,
            corr,
            "bsf-binding-register",
            BindingRegisterRequest {
                supi: req.supi.clone(),
                session_id: req.session_id,
                pcf_policy_id: "default".to_string(),
            }
        );
        session.binding_id = Some(binding.id);
    }

    if let Err(e) = save(&mut cl.store, &pdu_key(&req.supi, req.session_id), &session) {
        fail!(at, e);
    }
    ctx.active_pdu_ids.push(req.session_id);
    if let Err(e) = save(&mut cl.store, &ue_key(&req.supi), &ctx) {
        fail!(at, e);
    }

    if cl.cfg.n4_nested {
        let _: N4SetupResponse = chain!(
            cl,
            at,
            corr,
            "smf-n4-setup",
            N4SetupRequest {
                supi: req.supi.clone(),
                session_id: req.session_id,
            }
        );
    }

    (at, Ok(session))
}

pub fn smf_pdu_session_update(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: PduUpdateRequest,
) -> Out<PduSession> {
    let key = pdu_key(&req.supi, req.session_id);
    let Some(mut session) = load::<PduSession>(&cl.store, &key) else {
        fail!(
            at,
            ProcError::UnknownSession {
                supi: req.supi,
                session_id: req.session_id,
            }
        );
    };
    if session.state != PduState::Active {
        fail!(
            at,
            ProcError::SessionReleased {
                supi: req.supi,
                session_id: req.session_id,
            }
        );
    }
    if let Some(dnn) = req.dnn {
        session.dnn = dnn;
    }
    if cl.cfg.r17 {
        if let Some(id) = session.charging_id.clone() {
            let _: ChargingSession = chain!(
                cl,
                at,
                corr,
                "chf-charging-update",
                ChargingUpdateRequest { id, units: 1 }
            );
        }
    }
    if let Err(e) = save(&mut cl.store, &key, &session) {
        fail!(at, e);
    }
    (at, Ok(session))
}

pub fn smf_pdu_session_release(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: PduReleaseRequest,
) -> Out<PduSession> {
    let key = pdu_key(&req.supi, req.session_id);
    let Some(mut session) = load::<PduSession>(&cl.store, &key) else {
        fail!(
            at,
            ProcError::UnknownSession {
                supi: req.supi,
                session_id: req.session_id,
            }
        );
    };
    if session.state != PduState::Active {
        fail!(
            at,
            ProcError::SessionReleased {
                supi: req.supi,
                session_id: req.session_id,
            }
        );
    }
    session.state = PduState::Released;

    if cl.cfg.r17 {
        if let Some(id) = session.charging_id.clone() {
            let _: ChargingSession = chain!(
                cl,
                at,
                corr,
                "chf-charging-release",
                ChargingReleaseRequest { id }
            );
        }
        if let Some(id) = session.binding_id.clone() {
            let _: BindingDeregisterResponse = chain!(
                cl,
                at,
                corr,
                "bsf-binding-deregister",
                BindingDeregisterRequest { id }
            );
        }
    }

    if let Err(e) = save(&mut cl.store, &key, &session) {
        fail!(at, e);
    }
    if let Some(mut ctx) = load::<UeContext>(&cl.store, &ue_key(&req.supi)) {
        ctx.active_pdu_ids.retain(|&id| id != req.session_id);
        if let Err(e) = save(&mut cl.store, &ue_key(&req.supi), &ctx) {
            fail!(at, e);
        }
    }
    (at, Ok(session))
}

pub fn smf_n4_setup(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: N4SetupRequest,
) -> Out<N4SetupResponse> {
    if cl.store.get(&pdu_key(&req.supi, req.session_id)).is_none() {
        fail!(
            at,
            ProcError::UnknownSession {
                supi: req.supi,
                session_id: req.session_id,
            }
        );
    }
    let key = n4_key(&req.supi, req.session_id);
    let stub = serde_json::json!({
        "supi": req.supi,
        "session_id": req.session_id,
    });
    if let Err(e) = save(&mut cl.store, &key, &stub) {
        fail!(at, e);
    }
    (at, Ok(N4SetupResponse { tunnel_key: key }))
}

pub fn amf_deregistration(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: DeregistrationRequest,
) -> Out<DeregistrationResponse> {
    let ctx = match registered_context(&cl.store, &req.supi) {
        Ok(c) => c,
        Err(e) => fail!(at, e),
    };
    let session_ids = ctx.active_pdu_ids.clone();
    for sid in &session_ids {
        let _: PduSession = chain!(
            cl,
            at,
            corr,
            "smf-pdu-session-release",
            PduReleaseRequest {
                supi: req.supi.clone(),
                session_id: *sid,
            }
        );
    }
    for rec in cl.store.scan_prefix(&format!("pdu:{}/", req.supi)) {
        cl.store.delete(&rec.key);
    }
    for rec in cl.store.scan_prefix(&format!("charging-sessions/{}/", req.supi)) {
        cl.store.delete(&rec.key);
    }
    for rec in cl.store.scan_prefix(&format!("bsf-bindings/{}/", req.supi)) {
        cl.store.delete(&rec.key);
    }
    for rec in cl.store.scan_prefix(&format!("n4:{}/", req.supi)) {
        cl.store.delete(&rec.key);
    }
    if cl.cfg.r17 {
        let _: SliceCounters = chain!(
            cl,
            at,
            corr,
            "nsacf-update-counters",
            CounterUpdateRequest {
                snssai: ctx.serving_snssai,
                delta: -1,
            }
        );
    }
    cl.store.delete(&auth_key(&req.supi));
    cl.store.delete(&ue_key(&req.supi));
    (
        at,
        Ok(DeregistrationResponse {
            supi: req.supi,
            released_sessions: session_ids.len(),
        }),
    )
}

pub fn amf_service_request(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: ServiceRequest,
) -> Out<ServiceResponse> {
    if let Err(e) = registered_context(&cl.store, &req.supi) {
        fail!(at, e);
    }
    (
        at,
        Ok(ServiceResponse {
            supi: req.supi,
            accepted: true,
        }),
    )
}

pub fn amf_handover(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: HandoverRequest,
) -> Out<HandoverResponse> {
    let mut ctx = match registered_context(&cl.store, &req.supi) {
        Ok(c) => c,
        Err(e) => fail!(at, e),
    };
    ctx.serving_gnb_id = Some(req.target_gnb_id);
    if let Err(e) = save(&mut cl.store, &ue_key(&req.supi), &ctx) {
        fail!(at, e);
    }
    (
        at,
        Ok(HandoverResponse {
            supi: req.supi,
            serving_gnb_id: req.target_gnb_id,
        }),
    )
}

pub fn amf_pdu_session_relay(
    cl: &mut Cluster,
    mut at: VirtualTime,
    corr: &Correlation,
    req: RelayRequest,
) -> Out<PduSession> {
    if let Err(e) = registered_context(&cl.store, &req.supi) {
        fail!(at, e);
    }
    let session: PduSession = match req.op {
        RelayOp::Update { session_id, dnn } => chain!(
            cl,
            at,
            corr,
            "smf-pdu-session-update",
            PduUpdateRequest {
                supi: req.supi.clone(),
                session_id,
                dnn,
            }
        ),
        RelayOp::Release { session_id } => chain!(
            cl,
            at,
            corr,
            "smf-pdu-session-release",
            PduReleaseRequest {
                supi: req.supi.clone(),
                session_id,
            }
        ),
    };
    (at, Ok(session))
}

pub fn nrf_register(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: NrfRegisterRequest,
) -> Out<NrfRegisterResponse> {
    let key = nrf_key(&req.nf_type, &req.instance_id);
    let registered_at = load::<NfProfile>(&cl.registry, &key)
        .map(|p| p.registered_at_us)
        .unwrap_or(at.as_micros());
    let profile = NfProfile {
        nf_type: req.nf_type.clone(),
        instance_id: req.instance_id.clone(),
        uri: req.uri,
        registered_at_us: registered_at,
        heartbeat_at_us: at.as_micros(),
    };
    if let Err(e) = save(&mut cl.registry, &key, &profile) {
        fail!(at, e);
    }
    let count = cl
        .registry
        .scan_prefix(&format!("nrf/{}/", req.nf_type))
        .len();
    (
        at,
        Ok(NrfRegisterResponse {
            nf_type: req.nf_type,
            instance_id: req.instance_id,
            instance_count: count,
        }),
    )
}

pub fn nrf_discover(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: NrfDiscoverRequest,
) -> Out<Vec<NfProfile>> {
    let profiles = cl
        .registry
        .scan_prefix(&format!("nrf/{}/", req.nf_type))
        .into_iter()
        .filter_map(|rec| serde_json::from_slice(&rec.value).ok())
        .collect();
    (at, Ok(profiles))
}

pub fn nrf_status_notify(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: NrfStatusNotifyRequest,
) -> Out<NrfStatusNotifyResponse> {
    let profile = cl
        .registry
        .scan_prefix("nrf/")
        .into_iter()
        .filter_map(|rec| serde_json::from_slice::<NfProfile>(&rec.value).ok())
        .find(|p| p.instance_id == req.instance_id);
    let Some(profile) = profile else {
        fail!(at, ProcError::UnknownInstance(req.instance_id));
    };

    let subs = cl.registry.scan_prefix("nrf-subs/");
    let mut notified = 0;
    for rec in subs {
        let Ok(mut sub) = serde_json::from_slice::<NfStatusSubscription>(&rec.value) else {
            continue;
        };
        if sub.nf_type != profile.nf_type {
            continue;
        }
        sub.events.push(StatusEvent {
            instance_id: req.instance_id.clone(),
            status: req.status.clone(),
            at_us: at.as_micros(),
        });
        if let Err(e) = save(&mut cl.registry, &rec.key, &sub) {
            fail!(at, e);
        }
        notified += 1;
    }
    (at, Ok(NrfStatusNotifyResponse { notified }))
}

/// Installs a status subscription for one NF type. Not itself a deployed
/// function; callers provision subscriptions out of band.
pub fn insert_status_subscription(registry: &mut Store, id: &str, nf_type: &str) {
    let sub = NfStatusSubscription {
        id: id.to_string(),
        nf_type: nf_type.to_string(),
        events: Vec::new(),
    };
    let bytes = serde_json::to_vec(&sub).expect("serializes");
    registry
        .put(&nrf_sub_key(id), bytes)
        .expect("subscription ids are short");
}

pub fn nsacf_slice_availability_check(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: SliceCheckRequest,
) -> Out<SliceCheckResponse> {
    let counters = load::<SliceCounters>(&cl.store, &req.snssai.counters_key()).unwrap_or(
        SliceCounters {
            snssai: req.snssai,
            registered_ues: 0,
            max_ues: cl.cfg.default_max_ues,
        },
    );
    (
        at,
        Ok(SliceCheckResponse {
            snssai: req.snssai,
            admitted: counters.registered_ues < counters.max_ues,
            registered_ues: counters.registered_ues,
            max_ues: counters.max_ues,
        }),
    )
}

pub fn nsacf_update_counters(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: CounterUpdateRequest,
) -> Out<SliceCounters> {
    let key_str = req.snssai.counters_key();
    let key = match StoreKey::parse(key_str.clone()) {
        Ok(k) => k,
        Err(e) => fail!(at, ProcError::BadRequest(e.to_string())),
    };

    for attempt in 0..2 {
        let existing = cl.store.get(&key_str);
        let (mut counters, version) = match &existing {
            Some(rec) => match serde_json::from_slice::<SliceCounters>(&rec.value) {
                Ok(c) => (c, Some(rec.version)),
                Err(e) => fail!(at, ProcError::Internal(e.to_string())),
            },
            None => (
                SliceCounters {
                    snssai: req.snssai,
                    registered_ues: 0,
                    max_ues: cl.cfg.default_max_ues,
                },
                None,
            ),
        };

        let next = counters.registered_ues as i64 + req.delta;
        if next < 0 {
            fail!(at, ProcError::CounterUnderflow(req.snssai.to_string()));
        }
        if next as u64 > counters.max_ues {
            fail!(
                at,
                ProcError::SliceAdmissionRejected {
                    snssai: req.snssai.to_string(),
                    registered: counters.registered_ues,
                    max: counters.max_ues,
                }
            );
        }
        counters.registered_ues = next as u64;

        let bytes = serde_json::to_vec(&counters).expect("serializes");
        let mut ops = Vec::new();
        if let Some(v) = version {
            ops.push(TxnOp::CheckVersion {
                key: key.clone(),
                expected_version: v,
            });
        }
        ops.push(TxnOp::Put {
            key: key.clone(),
            value: bytes,
        });
        match cl.store.transact(&ops) {
            TxnResult::Committed => return (at, Ok(counters)),
            TxnResult::Conflict { .. } if attempt == 0 => continue,
            TxnResult::Conflict { key } => fail!(
                at,
                ProcError::Internal(format!("counter update conflicted twice on {key}"))
            ),
        }
    }
    (at, Err(ProcError::Internal("unreachable".to_string())))
}

pub fn chf_charging_create(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: ChargingCreateRequest,
) -> Out<ChargingSession> {
    let id = session_scoped_id(&req.supi, req.session_id);
    let session = ChargingSession {
        id: id.clone(),
        supi: req.supi,
        session_id: req.session_id,
        units: 0,
        state: ChargingState::Open,
    };
    if let Err(e) = save(&mut cl.store, &charging_key(&id), &session) {
        fail!(at, e);
    }
    (at, Ok(session))
}

pub fn chf_charging_update(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: ChargingUpdateRequest,
) -> Out<ChargingSession> {
    let Some(mut session) = load::<ChargingSession>(&cl.store, &charging_key(&req.id)) else {
        fail!(at, ProcError::UnknownChargingSession(req.id));
    };
    if session.state != ChargingState::Open {
        fail!(at, ProcError::ChargingSessionClosed(req.id));
    }
    session.units += req.units;
    if let Err(e) = save(&mut cl.store, &charging_key(&req.id), &session) {
        fail!(at, e);
    }
    (at, Ok(session))
}

pub fn chf_charging_release(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: ChargingReleaseRequest,
) -> Out<ChargingSession> {
    let Some(mut session) = load::<ChargingSession>(&cl.store, &charging_key(&req.id)) else {
        fail!(at, ProcError::UnknownChargingSession(req.id));
    };
    if session.state != ChargingState::Open {
        fail!(at, ProcError::ChargingSessionClosed(req.id));
    }
    session.state = ChargingState::Closed;
    if let Err(e) = save(&mut cl.store, &charging_key(&req.id), &session) {
        fail!(at, e);
    }
    (at, Ok(session))
}

pub fn bsf_binding_register(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: BindingRegisterRequest,
) -> Out<Binding> {
    let id = session_scoped_id(&req.supi, req.session_id);
    let binding = Binding {
        id: id.clone(),
        supi: req.supi,
        session_id: req.session_id,
        pcf_policy_id: req.pcf_policy_id,
    };
    if let Err(e) = save(&mut cl.store, &binding_key(&id), &binding) {
        fail!(at, e);
    }
    (at, Ok(binding))
}

pub fn bsf_binding_discover(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: BindingDiscoverRequest,
) -> Out<Option<Binding>> {
    let found = cl
        .store
        .scan_prefix(&format!("bsf-bindings/{}/", req.supi))
        .into_iter()
        .filter_map(|rec| serde_json::from_slice(&rec.value).ok())
        .next();
    (at, Ok(found))
}

pub fn bsf_binding_deregister(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: BindingDeregisterRequest,
) -> Out<BindingDeregisterResponse> {
    let existed = cl.store.delete(&binding_key(&req.id));
    (
        at,
        Ok(BindingDeregisterResponse {
            id: req.id,
            existed,
        }),
    )
}

pub fn pcf_policy_create(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: PolicyCreateRequest,
) -> Out<PcfPolicy> {
    let policy = PcfPolicy {
        id: req.id.clone(),
        content: req.content,
    };
    if let Err(e) = save(&mut cl.store, &policy_key(&req.id), &policy) {
        fail!(at, e);
    }
    (at, Ok(policy))
}

pub fn pcf_policy_get(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: PolicyGetRequest,
) -> Out<PcfPolicy> {
    let Some(policy) = load::<PcfPolicy>(&cl.store, &policy_key(&req.id)) else {
        fail!(at, ProcError::UnknownKey(policy_key(&req.id)));
    };
    (at, Ok(policy))
}

pub fn udr_data_read(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: UdrReadRequest,
) -> Out<UdrReadResponse> {
    let key = udr_key(&req.key);
    let Some(rec) = cl.store.get(&key) else {
        fail!(at, ProcError::UnknownKey(key));
    };
    let value = serde_json::from_slice(&rec.value)
        .unwrap_or_else(|_| serde_json::json!({ "hex": hex::encode(&rec.value) }));
    (
        at,
        Ok(UdrReadResponse {
            key: req.key,
            value,
            version: rec.version,
        }),
    )
}

pub fn udr_data_write(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: UdrWriteRequest,
) -> Out<UdrWriteResponse> {
    let key = udr_key(&req.key);
    let version = match save(&mut cl.store, &key, &req.value) {
        Ok(v) => v,
        Err(e) => fail!(at, e),
    };
    (
        at,
        Ok(UdrWriteResponse {
            key: req.key,
            version,
        }),
    )
}

pub fn nwdaf_analytics_subscribe(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: AnalyticsSubscribeRequest,
) -> Out<AnalyticsSubscription> {
    let sub = AnalyticsSubscription {
        id: req.id.clone(),
        event_type: req.event_type,
        samples: Vec::new(),
    };
    if let Err(e) = save(&mut cl.store, &analytics_key(&req.id), &sub) {
        fail!(at, e);
    }
    (at, Ok(sub))
}

pub fn nwdaf_data_collect(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: AnalyticsCollectRequest,
) -> Out<AnalyticsCollectResponse> {
    let Some(mut sub) = load::<AnalyticsSubscription>(&cl.store, &analytics_key(&req.id)) else {
        fail!(at, ProcError::UnknownSubscription(req.id));
    };
    sub.samples.push(MetricSample {
        value: req.value,
        recorded_at_us: at.as_micros(),
    });
    if let Err(e) = save(&mut cl.store, &analytics_key(&req.id), &sub) {
        fail!(at, e);
    }
    (
        at,
        Ok(AnalyticsCollectResponse {
            id: sub.id,
            samples: sub.samples.len(),
        }),
    )
}

pub fn nssf_slice_select(
    cl: &mut Cluster,
    at: VirtualTime,
    _corr: &Correlation,
    req: SliceSelectRequest,
) -> Out<SliceSelectResponse> {
    let Some(sub) = load::<SubscriberRecord>(&cl.store, &subscriber_key(&req.supi)) else {
        fail!(at, ProcError::UnknownSubscriber(req.supi));
    };
    let selected = req
        .requested
        .iter()
        .find(|s| sub.allowed_snssai.contains(s))
        .copied()
        .or_else(|| sub.allowed_snssai.first().copied());
    match selected {
        Some(selected) => (
            at,
            Ok(SliceSelectResponse {
                supi: req.supi,
                selected,
            }),
        ),
        None => fail!(at, ProcError::NoAllowedSlice(req.supi)),
    }
}
