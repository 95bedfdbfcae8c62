//! Stateful gateway between the access-side signalling link and the
//! function platform.
//!
//! The proxy keeps one session per UE identifier and enforces the NAS
//! exchange order: registration request, authentication response,
//! security-mode completion, registration completion, and only then
//! session management or deregistration. A message that does not fit the
//! session's state is answered with a reject and changes nothing. A
//! message arriving while the previous one is still being served is
//! queued and drained when the session completes.
//!
//! The proxy translates between frames and the platform's JSON bodies; it
//! holds no subscriber state of its own beyond the NAS phase and the
//! subscriber identity learned from the registration request.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::faasruntime::{Cluster, Correlation, InvokeError};
use crate::procedures::msg::{
    AuthInitiateRequest, DeregistrationRequest, PduCreateRequest, PduReleaseRequest,
    RegistrationRequest, RegistrationResponse, SubscriberDataRequest,
};
use crate::procedures::ProcError;
use crate::simkernel::VirtualTime;

use super::codec::{cause, N2Frame, NasMsgType};

/// Where a UE is in its NAS exchange, as seen from the network side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NasState {
    Idle,
    WaitAuthResponse,
    WaitSecurityComplete,
    WaitRegistrationComplete,
    Registered,
}

/// Anything able to run a named function to completion. [`Cluster`] is the
/// in-process implementation; a remote deployment would satisfy the same
/// contract.
pub trait CoreBackend {
    fn invoke(
        &mut self,
        name: &str,
        request: &[u8],
        enqueued_at: VirtualTime,
        corr: &Correlation,
    ) -> (VirtualTime, Result<Vec<u8>, InvokeError>);
}

impl CoreBackend for Cluster {
    fn invoke(
        &mut self,
        name: &str,
        request: &[u8],
        enqueued_at: VirtualTime,
        corr: &Correlation,
    ) -> (VirtualTime, Result<Vec<u8>, InvokeError>) {
        Cluster::invoke(self, name, request, enqueued_at, corr)
    }
}

/// A frame to deliver back to the access side, stamped with the virtual
/// time at which the proxy emits it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Downlink {
    pub frame: N2Frame,
    pub at: VirtualTime,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyStats {
    pub uplinks: u64,
    pub rejects: u64,
    pub queued: u64,
}

#[derive(Debug)]
struct UeSession {
    nas_state: NasState,
    supi: Option<String>,
    busy_until: Option<VirtualTime>,
    queue: VecDeque<(N2Frame, VirtualTime)>,
}

impl UeSession {
    fn new() -> Self {
        UeSession {
            nas_state: NasState::Idle,
            supi: None,
            busy_until: None,
            queue: VecDeque::new(),
        }
    }
}

#[derive(Debug, Default)]
pub struct N2Proxy {
    sessions: BTreeMap<u32, UeSession>,
    pub stats: ProxyStats,
}

/// Maps a platform failure onto the cause byte carried in a reject.
pub fn cause_for(err: &InvokeError) -> u8 {
    match err {
        InvokeError::Handler(ProcError::UnknownSubscriber(_)) => cause::UNKNOWN_SUBSCRIBER,
        InvokeError::Handler(ProcError::AuthFailed(_)) => cause::AUTH_FAILURE,
        InvokeError::Handler(ProcError::SliceAdmissionRejected { .. }) => cause::SLICE_UNAVAILABLE,
        InvokeError::Handler(
            ProcError::DuplicateSession { .. }
            | ProcError::UnknownSession { .. }
            | ProcError::SessionReleased { .. },
        ) => cause::SESSION_ERROR,
        _ => cause::PROTOCOL_ERROR,
    }
}

impl N2Proxy {
    pub fn new() -> Self {
        N2Proxy::default()
    }

    pub fn nas_state(&self, ue_id: u32) -> NasState {
        self.sessions
            .get(&ue_id)
            .map_or(NasState::Idle, |s| s.nas_state)
    }

    /// When the in-flight procedure for this UE completes, if one is
    /// running. Callers use this to schedule [`N2Proxy::complete`].
    pub fn busy_until(&self, ue_id: u32) -> Option<VirtualTime> {
        self.sessions.get(&ue_id).and_then(|s| s.busy_until)
    }

    /// Handles one uplink frame arriving at `at`. Returns the downlinks
    /// this produced; an empty result means the frame was queued behind an
    /// in-flight procedure or needed no reply.
    pub fn on_uplink(
        &mut self,
        backend: &mut dyn CoreBackend,
        frame: N2Frame,
        at: VirtualTime,
    ) -> Vec<Downlink> {
        self.stats.uplinks += 1;
        let session = self.sessions.entry(frame.ue_id).or_insert_with(UeSession::new);
        if let Some(busy) = session.busy_until {
            if at < busy {
                session.queue.push_back((frame, at));
                self.stats.queued += 1;
                return Vec::new();
            }
            session.busy_until = None;
        }
        self.process(backend, frame, at)
    }

    /// Drains the queue of a session whose in-flight procedure has
    /// finished by `now`. Queued frames are served in arrival order, each
    /// starting no earlier than the previous completion.
    pub fn complete(
        &mut self,
        backend: &mut dyn CoreBackend,
        ue_id: u32,
        now: VirtualTime,
    ) -> Vec<Downlink> {
        let mut out = Vec::new();
        loop {
            let (frame, at) = {
                let Some(session) = self.sessions.get_mut(&ue_id) else {
                    return out;
                };
                match session.busy_until {
                    Some(busy) if busy > now => return out,
                    _ => session.busy_until = None,
                }
                match session.queue.pop_front() {
                    Some((frame, queued_at)) => (frame, queued_at.max(now)),
                    None => return out,
                }
            };
            out.extend(self.process(backend, frame, at));
        }
    }

    fn process(
        &mut self,
        backend: &mut dyn CoreBackend,
        frame: N2Frame,
        at: VirtualTime,
    ) -> Vec<Downlink> {
        let ue_id = frame.ue_id;
        let state = self.nas_state(ue_id);

        match (state, frame.msg_type) {
            (NasState::Idle, NasMsgType::RegistrationRequest) => {
                let (Some(supi), Some(snssai)) = (frame.supi(), frame.snssai()) else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let supi = supi.to_string();
                let corr = Correlation::new(&supi, "registration");
                let req = RegistrationRequest {
                    supi: supi.clone(),
                    requested_snssai: snssai,
                };
                let (done, outcome) = backend.invoke(
                    "amf-initial-registration",
                    &serde_json::to_vec(&req).expect("serializes"),
                    at,
                    &corr,
                );
                match outcome {
                    Ok(body) => {
                        let resp: RegistrationResponse =
                            serde_json::from_slice(&body).expect("declared response shape");
                        let session = self.session_mut(ue_id);
                        session.supi = Some(supi);
                        session.nas_state = NasState::WaitAuthResponse;
                        self.emit(
                            ue_id,
                            N2Frame::new(NasMsgType::AuthenticationRequest, ue_id)
                                .with_rand(resp.rand)
                                .with_autn(resp.autn),
                            done,
                        )
                    }
                    Err(e) => self.reject(ue_id, cause_for(&e), done),
                }
            }
            (NasState::WaitAuthResponse, NasMsgType::AuthenticationResponse) => {
                let Some(res) = frame.res() else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let Some(supi) = self.session_supi(ue_id) else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let corr = Correlation::new(&supi, "registration");
                let req = AuthInitiateRequest::Verify {
                    supi: supi.clone(),
                    res,
                };
                let (done, outcome) = backend.invoke(
                    "amf-auth-initiate",
                    &serde_json::to_vec(&req).expect("serializes"),
                    at,
                    &corr,
                );
                match outcome {
                    Ok(_) => {
                        self.session_mut(ue_id).nas_state = NasState::WaitSecurityComplete;
                        self.emit(
                            ue_id,
                            N2Frame::new(NasMsgType::SecurityModeCommand, ue_id),
                            done,
                        )
                    }
                    Err(e) => self.reject(ue_id, cause_for(&e), done),
                }
            }
            (NasState::WaitSecurityComplete, NasMsgType::SecurityModeComplete) => {
                let Some(supi) = self.session_supi(ue_id) else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let corr = Correlation::new(&supi, "registration");
                let req = SubscriberDataRequest {
                    supi: supi.clone(),
                    finalize: true,
                };
                let (done, outcome) = backend.invoke(
                    "udm-get-subscriber-data",
                    &serde_json::to_vec(&req).expect("serializes"),
                    at,
                    &corr,
                );
                match outcome {
                    Ok(_) => {
                        self.session_mut(ue_id).nas_state = NasState::WaitRegistrationComplete;
                        self.emit(
                            ue_id,
                            N2Frame::new(NasMsgType::RegistrationAccept, ue_id),
                            done,
                        )
                    }
                    Err(e) => self.reject(ue_id, cause_for(&e), done),
                }
            }
            (NasState::WaitRegistrationComplete, NasMsgType::RegistrationComplete) => {
                let session = self.session_mut(ue_id);
                session.nas_state = NasState::Registered;
                session.busy_until = None;
                Vec::new()
            }
            (NasState::Registered, NasMsgType::PduEstablishRequest) => {
                let (Some(pdu_id), Some(snssai), Some(dnn)) =
                    (frame.pdu_session_id(), frame.snssai(), frame.dnn())
                else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let Some(supi) = self.session_supi(ue_id) else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let corr = Correlation::new(&supi, "pdu-establish");
                let req = PduCreateRequest {
                    supi: supi.clone(),
                    session_id: pdu_id,
                    dnn: dnn.to_string(),
                    snssai,
                };
                let (done, outcome) = backend.invoke(
                    "smf-pdu-session-create",
                    &serde_json::to_vec(&req).expect("serializes"),
                    at,
                    &corr,
                );
                match outcome {
                    Ok(_) => self.emit(
                        ue_id,
                        N2Frame::new(NasMsgType::PduEstablishAccept, ue_id)
                            .with_pdu_session_id(pdu_id),
                        done,
                    ),
                    Err(e) => self.reject(ue_id, cause_for(&e), done),
                }
            }
            (NasState::Registered, NasMsgType::PduReleaseRequest) => {
                let Some(pdu_id) = frame.pdu_session_id() else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let Some(supi) = self.session_supi(ue_id) else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let corr = Correlation::new(&supi, "pdu-release");
                let req = PduReleaseRequest {
                    supi: supi.clone(),
                    session_id: pdu_id,
                };
                let (done, outcome) = backend.invoke(
                    "smf-pdu-session-release",
                    &serde_json::to_vec(&req).expect("serializes"),
                    at,
                    &corr,
                );
                match outcome {
                    Ok(_) => self.emit(
                        ue_id,
                        N2Frame::new(NasMsgType::PduReleaseAccept, ue_id)
                            .with_pdu_session_id(pdu_id),
                        done,
                    ),
                    Err(e) => self.reject(ue_id, cause_for(&e), done),
                }
            }
            (NasState::Registered, NasMsgType::DeregistrationRequest) => {
                let Some(supi) = self.session_supi(ue_id) else {
                    return self.reject(ue_id, cause::PROTOCOL_ERROR, at);
                };
                let corr = Correlation::new(&supi, "deregistration");
                let req = DeregistrationRequest { supi: supi.clone() };
                let (done, outcome) = backend.invoke(
                    "amf-deregistration",
                    &serde_json::to_vec(&req).expect("serializes"),
                    at,
                    &corr,
                );
                match outcome {
                    Ok(_) => {
                        let session = self.session_mut(ue_id);
                        session.nas_state = NasState::Idle;
                        session.supi = None;
                        self.emit(
                            ue_id,
                            N2Frame::new(NasMsgType::DeregistrationAccept, ue_id),
                            done,
                        )
                    }
                    Err(e) => self.reject(ue_id, cause_for(&e), done),
                }
            }
            _ => self.reject(ue_id, cause::OUT_OF_ORDER_NAS, at),
        }
    }

    fn session_mut(&mut self, ue_id: u32) -> &mut UeSession {
        self.sessions.entry(ue_id).or_insert_with(UeSession::new)
    }

    fn session_supi(&self, ue_id: u32) -> Option<String> {
        self.sessions.get(&ue_id).and_then(|s| s.supi.clone())
    }

    fn emit(&mut self, ue_id: u32, frame: N2Frame, at: VirtualTime) -> Vec<Downlink> {
        self.session_mut(ue_id).busy_until = Some(at);
        vec![Downlink { frame, at }]
    }

    fn reject(&mut self, ue_id: u32, cause_val: u8, at: VirtualTime) -> Vec<Downlink> {
        self.stats.rejects += 1;
        self.session_mut(ue_id).busy_until = Some(at);
        vec![Downlink {
            frame: N2Frame::new(NasMsgType::Reject, ue_id).with_cause(cause_val),
            at,
        }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faasruntime::ClusterConfig;
    use crate::procedures::types::Snssai;
    use crate::procedures::{auth, provision, types};

    fn cluster() -> Cluster {
        let mut cl = Cluster::new(7, ClusterConfig::default());
        cl.deploy_standard(4_000_000, 0.0);
        cl.runtime.prewarm_all(VirtualTime::ZERO, false);
        provision::apply(&mut cl.store, &provision::synthesize(2)).unwrap();
        cl
    }

    fn supi(i: usize) -> String {
        format!("imsi-20893{:010}", i)
    }

    fn subscriber_res(cl: &Cluster, supi: &str, rand: [u8; 16]) -> [u8; 16] {
        let rec = cl.store.get(&types::subscriber_key(supi)).unwrap();
        let sub: types::SubscriberRecord = serde_json::from_slice(&rec.value).unwrap();
        auth::mac16(&sub.k, &[&rand])
    }

    fn register_via_proxy(
        proxy: &mut N2Proxy,
        cl: &mut Cluster,
        ue_id: u32,
        supi: &str,
        start: VirtualTime,
    ) -> VirtualTime {
        let reg = N2Frame::new(NasMsgType::RegistrationRequest, ue_id)
            .with_supi(supi)
            .with_snssai(Snssai::new(1, 1));
        let down = proxy.on_uplink(cl, reg, start);
        assert_eq!(down[0].frame.msg_type, NasMsgType::AuthenticationRequest);
        let rand = down[0].frame.rand().unwrap();
        let t1 = down[0].at;

        let res = subscriber_res(cl, supi, rand);
        let down = proxy.on_uplink(
            cl,
            N2Frame::new(NasMsgType::AuthenticationResponse, ue_id).with_res(res),
            t1,
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::SecurityModeCommand);
        let t2 = down[0].at;

        let down = proxy.on_uplink(
            cl,
            N2Frame::new(NasMsgType::SecurityModeComplete, ue_id),
            t2,
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::RegistrationAccept);
        let t3 = down[0].at;

        let down = proxy.on_uplink(
            cl,
            N2Frame::new(NasMsgType::RegistrationComplete, ue_id),
            t3,
        );
        assert!(down.is_empty(), "registration completion has no reply");
        t3
    }

    #[test]
    fn full_exchange_reaches_registered_and_backend_agrees() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        let s = supi(1);
        register_via_proxy(&mut proxy, &mut cl, 1, &s, VirtualTime::from_secs(1));
        assert_eq!(proxy.nas_state(1), NasState::Registered);

        let ctx: types::UeContext =
            serde_json::from_slice(&cl.store.get(&types::ue_key(&s)).unwrap().value).unwrap();
        assert_eq!(ctx.reg_state, types::RegState::Registered);
        assert_eq!(proxy.stats.rejects, 0);
    }

    #[test]
    fn out_of_order_message_is_rejected_without_backend_traffic() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        let before = cl.runtime.ledger_len();
        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::PduEstablishRequest, 5)
                .with_pdu_session_id(1)
                .with_snssai(Snssai::new(1, 1))
                .with_dnn("internet"),
            VirtualTime::from_secs(1),
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::Reject);
        assert_eq!(down[0].frame.cause(), Some(cause::OUT_OF_ORDER_NAS));
        assert_eq!(cl.runtime.ledger_len(), before);
        assert_eq!(proxy.nas_state(5), NasState::Idle);
        assert_eq!(proxy.stats.rejects, 1);
    }

    #[test]
    fn unknown_subscriber_maps_to_its_cause_and_leaves_idle() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::RegistrationRequest, 9)
                .with_supi("imsi-999999")
                .with_snssai(Snssai::new(1, 1)),
            VirtualTime::from_secs(1),
        );
        assert_eq!(down[0].frame.cause(), Some(cause::UNKNOWN_SUBSCRIBER));
        assert_eq!(proxy.nas_state(9), NasState::Idle);
    }

    #[test]
    fn failed_authentication_rejects_but_allows_retry() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        let s = supi(1);
        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::RegistrationRequest, 1)
                .with_supi(&s)
                .with_snssai(Snssai::new(1, 1)),
            VirtualTime::from_secs(1),
        );
        let rand = down[0].frame.rand().unwrap();
        let t = down[0].at;

        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::AuthenticationResponse, 1).with_res([0; 16]),
            t,
        );
        assert_eq!(down[0].frame.cause(), Some(cause::AUTH_FAILURE));
        assert_eq!(proxy.nas_state(1), NasState::WaitAuthResponse);

        let res = subscriber_res(&cl, &s, rand);
        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::AuthenticationResponse, 1).with_res(res),
            down[0].at,
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::SecurityModeCommand);
    }

    #[test]
    fn pdu_lifecycle_and_deregistration_round_trip() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        let s = supi(1);
        let t = register_via_proxy(&mut proxy, &mut cl, 1, &s, VirtualTime::from_secs(1));

        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::PduEstablishRequest, 1)
                .with_pdu_session_id(1)
                .with_snssai(Snssai::new(1, 1))
                .with_dnn("internet"),
            t,
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::PduEstablishAccept);
        assert_eq!(down[0].frame.pdu_session_id(), Some(1));
        let t = down[0].at;

        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::PduReleaseRequest, 1).with_pdu_session_id(1),
            t,
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::PduReleaseAccept);
        let t = down[0].at;

        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::DeregistrationRequest, 1),
            t,
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::DeregistrationAccept);
        assert_eq!(proxy.nas_state(1), NasState::Idle);
        assert!(cl.store.get(&types::ue_key(&s)).is_none());

        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::PduEstablishRequest, 1)
                .with_pdu_session_id(2)
                .with_snssai(Snssai::new(1, 1))
                .with_dnn("internet"),
            down[0].at,
        );
        assert_eq!(down[0].frame.cause(), Some(cause::OUT_OF_ORDER_NAS));
    }

    #[test]
    fn duplicate_session_rejects_with_session_cause() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        let s = supi(1);
        let t = register_via_proxy(&mut proxy, &mut cl, 1, &s, VirtualTime::from_secs(1));
        let establish = |t| {
            N2Frame::new(NasMsgType::PduEstablishRequest, 1)
                .with_pdu_session_id(t)
                .with_snssai(Snssai::new(1, 1))
                .with_dnn("internet")
        };
        let down = proxy.on_uplink(&mut cl, establish(1), t);
        let down = proxy.on_uplink(&mut cl, establish(1), down[0].at);
        assert_eq!(down[0].frame.cause(), Some(cause::SESSION_ERROR));
    }

    #[test]
    fn frames_arriving_mid_procedure_queue_and_drain_in_order() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        let s = supi(1);
        let t = register_via_proxy(&mut proxy, &mut cl, 1, &s, VirtualTime::from_secs(1));
        let establish = |sid| {
            N2Frame::new(NasMsgType::PduEstablishRequest, 1)
                .with_pdu_session_id(sid)
                .with_snssai(Snssai::new(1, 1))
                .with_dnn("internet")
        };

        let first = proxy.on_uplink(&mut cl, establish(1), t);
        let busy = first[0].at;
        assert_eq!(proxy.busy_until(1), Some(busy));

        let early = t.add_micros(1);
        assert!(early < busy);
        let queued = proxy.on_uplink(&mut cl, establish(2), early);
        assert!(queued.is_empty());
        assert_eq!(proxy.stats.queued, 1);

        let drained = proxy.complete(&mut cl, 1, busy);
        assert_eq!(drained.len(), 1);
        assert_eq!(drained[0].frame.msg_type, NasMsgType::PduEstablishAccept);
        assert_eq!(drained[0].frame.pdu_session_id(), Some(2));
        assert!(drained[0].at > busy, "queued work starts after completion");
    }

    #[test]
    fn sessions_are_isolated_by_ue_id() {
        let mut proxy = N2Proxy::new();
        let mut cl = cluster();
        register_via_proxy(&mut proxy, &mut cl, 1, &supi(1), VirtualTime::from_secs(1));
        assert_eq!(proxy.nas_state(2), NasState::Idle);

        let down = proxy.on_uplink(
            &mut cl,
            N2Frame::new(NasMsgType::RegistrationRequest, 2)
                .with_supi(&supi(2))
                .with_snssai(Snssai::new(1, 1)),
            VirtualTime::from_secs(30),
        );
        assert_eq!(down[0].frame.msg_type, NasMsgType::AuthenticationRequest);
        assert_eq!(proxy.nas_state(1), NasState::Registered);
    }
}
