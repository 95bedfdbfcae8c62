//! Scale-to-zero execution platform for the control-plane functions.
//!
//! Each network-function procedure is deployed as an independently scaled
//! function. A function with zero replicas that receives traffic begins a
//! cold start; requests arriving during the warm-up queue until the replica
//! is ready. Idle replicas are reclaimed by a periodic sweep. Every
//! invocation is appended to a ledger with its queueing, start, and finish
//! times plus a cold-start flag, which is the raw material for the latency
//! and resource accounting downstream.
//!
//! [`Cluster`] bundles the runtime with the shared state store and the
//! registry so a handler can call sibling functions synchronously. Nested
//! calls advance a virtual-time cursor: the caller's own execution finishes
//! first, then each callee runs to completion before control returns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::procedures::{self, ProcError};
use crate::simkernel::{RngStream, VirtualTime};
use crate::statestore::Store;

/// Replica warm-up time when a request lands on a scaled-to-zero function.
pub const DEFAULT_COLD_START_US: u64 = 4_000_000;
/// How long a replica may sit without traffic before the sweep reclaims it.
pub const DEFAULT_IDLE_WINDOW_US: u64 = 60_000_000;
/// Resident memory attributed to one warm replica.
pub const DEFAULT_REPLICA_RSS_MB: f64 = 15.0;
/// Memory reservation attributed to one in-flight invocation.
pub const DEFAULT_INVOCATION_ALLOC_MB: f64 = 128.0;
/// In-flight invocations one replica absorbs before another is added.
pub const DEFAULT_MAX_CONCURRENCY: u32 = 1000;

/// Feature generation a function belongs to. Later-generation functions are
/// deployed but refuse traffic unless the cluster enables that generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureGate {
    R15,
    R17,
}

/// Deployment descriptor for one function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub nf: String,
    pub exec_time_us: u64,
    pub exec_jitter_pct: f64,
    pub replica_rss_mb: f64,
    pub invocation_alloc_mb: f64,
    pub cold_start_us: u64,
    pub feature_gate: FeatureGate,
    pub max_concurrency: u32,
}

impl FunctionSpec {
    fn new(name: &str, nf: &str, exec_time_us: u64, gate: FeatureGate) -> Self {
        FunctionSpec {
            name: name.to_string(),
            nf: nf.to_string(),
            exec_time_us,
            exec_jitter_pct: 0.0,
            replica_rss_mb: DEFAULT_REPLICA_RSS_MB,
            invocation_alloc_mb: DEFAULT_INVOCATION_ALLOC_MB,
            cold_start_us: DEFAULT_COLD_START_US,
            feature_gate: gate,
            max_concurrency: DEFAULT_MAX_CONCURRENCY,
        }
    }
}

/// The full catalog: 31 functions across 12 network functions, 21 in the
/// baseline generation and 10 behind the later-generation gate.
pub fn standard_deployment() -> Vec<FunctionSpec> {
    use FeatureGate::{R15, R17};
    vec![
        FunctionSpec::new("amf-initial-registration", "amf", 7680, R15),
        FunctionSpec::new("amf-auth-initiate", "amf", 2330, R15),
        FunctionSpec::new("amf-deregistration", "amf", 2000, R15),
        FunctionSpec::new("amf-service-request", "amf", 600, R15),
        FunctionSpec::new("amf-handover", "amf", 800, R15),
        FunctionSpec::new("amf-pdu-session-relay", "amf", 700, R15),
        FunctionSpec::new("smf-pdu-session-create", "smf", 930, R15),
        FunctionSpec::new("smf-pdu-session-update", "smf", 800, R15),
        FunctionSpec::new("smf-pdu-session-release", "smf", 850, R15),
        FunctionSpec::new("smf-n4-setup", "smf", 500, R15),
        FunctionSpec::new("udm-generate-auth-data", "udm", 840, R15),
        FunctionSpec::new("udm-get-subscriber-data", "udm", 740, R15),
        FunctionSpec::new("udr-data-read", "udr", 300, R15),
        FunctionSpec::new("udr-data-write", "udr", 350, R15),
        FunctionSpec::new("ausf-authenticate", "ausf", 800, R15),
        FunctionSpec::new("nrf-register", "nrf", 400, R15),
        FunctionSpec::new("nrf-discover", "nrf", 450, R15),
        FunctionSpec::new("nrf-status-notify", "nrf", 400, R15),
        FunctionSpec::new("pcf-policy-create", "pcf", 450, R15),
        FunctionSpec::new("pcf-policy-get", "pcf", 350, R15),
        FunctionSpec::new("nssf-slice-select", "nssf", 400, R15),
        FunctionSpec::new("nsacf-slice-availability-check", "nsacf", 500, R17),
        FunctionSpec::new("nsacf-update-counters", "nsacf", 600, R17),
        FunctionSpec::new("chf-charging-create", "chf", 700, R17),
        FunctionSpec::new("chf-charging-update", "chf", 650, R17),
        FunctionSpec::new("chf-charging-release", "chf", 600, R17),
        FunctionSpec::new("bsf-binding-register", "bsf", 550, R17),
        FunctionSpec::new("bsf-binding-discover", "bsf", 500, R17),
        FunctionSpec::new("bsf-binding-deregister", "bsf", 500, R17),
        FunctionSpec::new("nwdaf-analytics-subscribe", "nwdaf", 400, R17),
        FunctionSpec::new("nwdaf-data-collect", "nwdaf", 450, R17),
    ]
}

/// Who asked for an invocation and as part of which end-to-end procedure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correlation {
    pub supi: String,
    pub procedure: String,
}

impl Correlation {
    pub fn new(supi: &str, procedure: &str) -> Self {
        Correlation {
            supi: supi.to_string(),
            procedure: procedure.to_string(),
        }
    }
}

/// One completed invocation in the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub function: String,
    pub enqueued_at: VirtualTime,
    pub started_at: VirtualTime,
    pub finished_at: VirtualTime,
    pub cold_start: bool,
    pub alloc_mb: f64,
    pub correlation: Correlation,
}

/// Interval during which one replica of a function was resident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaPeriod {
    pub function: String,
    pub from: VirtualTime,
    pub to: Option<VirtualTime>,
}

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("function {0} is already deployed")]
    Duplicate(String),
}

#[derive(Debug, Error)]
pub enum InvokeError {
    #[error("no function named {0} is deployed")]
    UnknownFunction(String),
    #[error("function {0} requires the release-17 feature set")]
    FeatureGateDisabled(String),
    #[error(transparent)]
    Handler(#[from] ProcError),
}

#[derive(Debug)]
struct FunctionState {
    spec: FunctionSpec,
    replicas: u32,
    warming_until: Option<VirtualTime>,
    warm_since: VirtualTime,
    last_invoked_at: VirtualTime,
    /// Finish times of invocations admitted so far; pruned lazily.
    active: Vec<VirtualTime>,
}

#[derive(Debug)]
struct Routing {
    started_at: VirtualTime,
    duration_us: u64,
    cold: bool,
    alloc_mb: f64,
}

/// The function platform: deployment table, per-function scaling state,
/// invocation ledger, and replica residency history.
#[derive(Debug, Default)]
pub struct FaasRuntime {
    functions: BTreeMap<String, FunctionState>,
    ledger: Vec<InvocationRecord>,
    periods: Vec<ReplicaPeriod>,
}

impl FaasRuntime {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn deploy(&mut self, spec: FunctionSpec) -> Result<(), DeployError> {
        if self.functions.contains_key(&spec.name) {
            return Err(DeployError::Duplicate(spec.name));
        }
        let name = spec.name.clone();
        self.functions.insert(
            name,
            FunctionState {
                spec,
                replicas: 0,
                warming_until: None,
                warm_since: VirtualTime::ZERO,
                last_invoked_at: VirtualTime::ZERO,
                active: Vec::new(),
            },
        );
        Ok(())
    }

    pub fn spec(&self, name: &str) -> Option<&FunctionSpec> {
        self.functions.get(name).map(|s| &s.spec)
    }

    pub fn function_names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(|k| k.as_str())
    }

    pub fn replica_count(&self, name: &str) -> u32 {
        self.functions.get(name).map_or(0, |s| s.replicas)
    }

    /// True while any replica is resident or any warm-up is pending, which
    /// is exactly when the idle sweep still has work to do.
    pub fn any_resident(&self) -> bool {
        self.functions
            .values()
            .any(|s| s.replicas > 0 || s.warming_until.is_some())
    }

    /// Decides when an invocation arriving at `enqueued_at` begins
    /// executing and whether it pays a cold start, updating scaling state.
    fn admit(
        &mut self,
        name: &str,
        enqueued_at: VirtualTime,
        r17_enabled: bool,
        jitter_rng: &mut RngStream,
    ) -> Result<Routing, InvokeError> {
        let state = self
            .functions
            .get_mut(name)
            .ok_or_else(|| InvokeError::UnknownFunction(name.to_string()))?;
        if state.spec.feature_gate == FeatureGate::R17 && !r17_enabled {
            return Err(InvokeError::FeatureGateDisabled(name.to_string()));
        }

        let (started_at, cold) = if state.replicas == 0 {
            match state.warming_until {
                None => {
                    let ready = enqueued_at.add_micros(state.spec.cold_start_us);
                    state.warming_until = Some(ready);
                    (ready, true)
                }
                Some(ready) if enqueued_at < ready => (ready, true),
                Some(ready) => {
                    state.replicas = 1;
                    state.warm_since = ready;
                    state.warming_until = None;
                    self.periods.push(ReplicaPeriod {
                        function: name.to_string(),
                        from: ready,
                        to: None,
                    });
                    (enqueued_at, false)
                }
            }
        } else if enqueued_at < state.warm_since {
            (state.warm_since, true)
        } else {
            (enqueued_at, false)
        };

        let state = self.functions.get_mut(name).expect("checked above");
        let duration_us = if state.spec.exec_jitter_pct > 0.0 {
            let j = state.spec.exec_jitter_pct / 100.0;
            let factor = 1.0 + jitter_rng.range_f64(-j, j);
            ((state.spec.exec_time_us as f64 * factor).round() as u64).max(1)
        } else {
            state.spec.exec_time_us
        };

        let finish = started_at.add_micros(duration_us);
        state.active.retain(|&end| end > started_at);
        state.active.push(finish);
        state.last_invoked_at = state.last_invoked_at.max(enqueued_at);
        if state.replicas >= 1
            && state.active.len() as u64 > u64::from(state.replicas) * u64::from(state.spec.max_concurrency)
        {
            state.replicas += 1;
            self.periods.push(ReplicaPeriod {
                function: name.to_string(),
                from: started_at,
                to: None,
            });
        }

        let alloc_mb = self.functions[name].spec.invocation_alloc_mb;
        Ok(Routing {
            started_at,
            duration_us,
            cold,
            alloc_mb,
        })
    }

    fn push_record(&mut self, record: InvocationRecord) {
        self.ledger.push(record);
    }

    /// Gives every gate-enabled function one resident replica, as a
    /// traffic run does before injecting load.
    pub fn prewarm_all(&mut self, now: VirtualTime, r17_enabled: bool) {
        for (name, state) in self.functions.iter_mut() {
            if state.spec.feature_gate == FeatureGate::R17 && !r17_enabled {
                continue;
            }
            if state.replicas == 0 {
                state.replicas = 1;
                state.warm_since = now;
                state.last_invoked_at = now;
                state.warming_until = None;
                self.periods.push(ReplicaPeriod {
                    function: name.clone(),
                    from: now,
                    to: None,
                });
            }
        }
    }

    /// Kills every replica at once and immediately begins recreating each
    /// function's pod, so the whole platform shares one warm-up window.
    pub fn evict_all(&mut self, now: VirtualTime) {
        for (name, state) in self.functions.iter_mut() {
            if state.replicas > 0 {
                close_open_periods(&mut self.periods, name, now);
            }
            state.replicas = 0;
            state.active.clear();
            state.warming_until = Some(now.add_micros(state.spec.cold_start_us));
        }
    }

    /// Periodic reclaim pass: finishes any elapsed warm-ups, then scales
    /// down functions that have been idle for at least `idle_window_us`.
    /// Returns the names scaled to zero by this pass.
    pub fn idle_sweep(&mut self, now: VirtualTime, idle_window_us: u64) -> Vec<String> {
        let mut reclaimed = Vec::new();
        for (name, state) in self.functions.iter_mut() {
            if state.replicas == 0 {
                if let Some(ready) = state.warming_until {
                    if ready <= now {
                        state.replicas = 1;
                        state.warm_since = ready;
                        state.warming_until = None;
                        state.last_invoked_at = state.last_invoked_at.max(ready);
                        self.periods.push(ReplicaPeriod {
                            function: name.clone(),
                            from: ready,
                            to: None,
                        });
                    }
                }
            }
            if state.replicas > 0 {
                state.active.retain(|&end| end > now);
                let idle_us = now.saturating_sub(state.last_invoked_at);
                if state.active.is_empty() && idle_us >= idle_window_us {
                    close_open_periods(&mut self.periods, name, now);
                    state.replicas = 0;
                    reclaimed.push(name.clone());
                }
            }
        }
        reclaimed
    }

    /// Ledger ordered by finish time, ties kept in admission order.
    pub fn sorted_ledger(&self) -> Vec<InvocationRecord> {
        let mut records = self.ledger.clone();
        records.sort_by_key(|r| r.finished_at);
        records
    }

    pub fn ledger_len(&self) -> usize {
        self.ledger.len()
    }

    /// Replica residency intervals; open intervals have `to: None` and
    /// should be clipped to the observation window by the caller.
    pub fn periods(&self) -> &[ReplicaPeriod] {
        &self.periods
    }
}

fn close_open_periods(periods: &mut [ReplicaPeriod], name: &str, at: VirtualTime) {
    for period in periods.iter_mut() {
        if period.function == name && period.to.is_none() {
            period.to = Some(at);
        }
    }
}

/// How the cluster interprets traffic: which feature generation is live,
/// the per-slice admission capacity, and whether session creation invokes
/// the user-plane setup function inline.
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub r17: bool,
    pub default_max_ues: u64,
    pub n4_nested: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            r17: false,
            default_max_ues: 10_000,
            n4_nested: false,
        }
    }
}

/// A complete core deployment: the function platform, the shared state
/// store, the NF service registry, and the entropy streams handlers draw
/// from. All invocation entry points go through [`Cluster::invoke`].
pub struct Cluster {
    pub runtime: FaasRuntime,
    pub store: Store,
    pub registry: Store,
    pub auth_rng: RngStream,
    pub jitter_rng: RngStream,
    pub cfg: ClusterConfig,
}

impl Cluster {
    pub fn new(master_seed: u64, cfg: ClusterConfig) -> Self {
        Cluster {
            runtime: FaasRuntime::new(),
            store: Store::new(),
            registry: Store::new(),
            auth_rng: RngStream::derive(master_seed, "auth"),
            jitter_rng: RngStream::derive(master_seed, "jitter"),
            cfg,
        }
    }

    /// Deploys the standard catalog with the given platform overrides.
    pub fn deploy_standard(&mut self, cold_start_us: u64, exec_jitter_pct: f64) {
        for mut spec in standard_deployment() {
            spec.cold_start_us = cold_start_us;
            spec.exec_jitter_pct = exec_jitter_pct;
            self.runtime
                .deploy(spec)
                .expect("standard catalog has unique names");
        }
    }

    /// Runs one function to completion, including everything it calls.
    ///
    /// The returned time is when the whole call tree finished; the ledger
    /// record for `name` itself covers only its own execution. Timing is
    /// returned even when the handler fails, since a rejection still takes
    /// the time it took to compute.
    pub fn invoke(
        &mut self,
        name: &str,
        request: &[u8],
        enqueued_at: VirtualTime,
        corr: &Correlation,
    ) -> (VirtualTime, Result<Vec<u8>, InvokeError>) {
        let routing = match self
            .runtime
            .admit(name, enqueued_at, self.cfg.r17, &mut self.jitter_rng)
        {
            Ok(r) => r,
            Err(e) => return (enqueued_at, Err(e)),
        };
        let own_finish = routing.started_at.add_micros(routing.duration_us);
        self.runtime.push_record(InvocationRecord {
            function: name.to_string(),
            enqueued_at,
            started_at: routing.started_at,
            finished_at: own_finish,
            cold_start: routing.cold,
            alloc_mb: routing.alloc_mb,
            correlation: corr.clone(),
        });
        let (after, result) = procedures::dispatch(self, name, request, own_finish, corr);
        (after.max(own_finish), result.map_err(InvokeError::Handler))
    }

    /// Typed convenience wrapper over [`Cluster::invoke`] for chain calls.
    pub fn call<Req, Resp>(
        &mut self,
        name: &str,
        request: &Req,
        enqueued_at: VirtualTime,
        corr: &Correlation,
    ) -> (VirtualTime, Result<Resp, ProcError>)
    where
        Req: Serialize,
        Resp: serde::de::DeserializeOwned,
    {
        let body = serde_json::to_vec(request).expect("request bodies serialize");
        let (at, outcome) = self.invoke(name, &body, enqueued_at, corr);
        let mapped = match outcome {
            Ok(bytes) => {
                Ok(serde_json::from_slice(&bytes).expect("handlers produce their declared response"))
            }
            Err(InvokeError::Handler(e)) => Err(e),
            Err(other) => Err(ProcError::Internal(other.to_string())),
        };
        (at, mapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runtime_with(name: &str, exec: u64) -> FaasRuntime {
        let mut rt = FaasRuntime::new();
        rt.deploy(FunctionSpec::new(name, "test", exec, FeatureGate::R15))
            .unwrap();
        rt
    }

    fn rng() -> RngStream {
        RngStream::derive(1, "test-jitter")
    }

    #[test]
    fn catalog_has_31_functions_with_expected_gate_split() {
        let specs = standard_deployment();
        assert_eq!(specs.len(), 31);
        let r15 = specs
            .iter()
            .filter(|s| s.feature_gate == FeatureGate::R15)
            .count();
        assert_eq!(r15, 21);
        assert_eq!(specs.len() - r15, 10);
        let nfs: std::collections::BTreeSet<_> = specs.iter().map(|s| s.nf.as_str()).collect();
        assert_eq!(nfs.len(), 12);
        let names: std::collections::BTreeSet<_> = specs.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names.len(), 31);
    }

    #[test]
    fn first_invocation_on_scaled_to_zero_function_pays_cold_start() {
        let mut rt = runtime_with("f", 1000);
        let r = rt
            .admit("f", VirtualTime::from_micros(500), true, &mut rng())
            .unwrap();
        assert!(r.cold);
        assert_eq!(r.started_at, VirtualTime::from_micros(500 + DEFAULT_COLD_START_US));
    }

    #[test]
    fn requests_during_warmup_queue_until_ready_then_later_ones_run_warm() {
        let mut rt = runtime_with("f", 1000);
        let mut j = rng();
        let first = rt.admit("f", VirtualTime::from_micros(0), true, &mut j).unwrap();
        let queued = rt
            .admit("f", VirtualTime::from_micros(1_000_000), true, &mut j)
            .unwrap();
        assert!(queued.cold);
        assert_eq!(queued.started_at, first.started_at);

        let after = rt
            .admit("f", VirtualTime::from_micros(5_000_000), true, &mut j)
            .unwrap();
        assert!(!after.cold);
        assert_eq!(after.started_at, VirtualTime::from_micros(5_000_000));
        assert_eq!(rt.replica_count("f"), 1);
        let periods = rt.periods();
        assert_eq!(periods.len(), 1);
        assert_eq!(periods[0].from, VirtualTime::from_micros(DEFAULT_COLD_START_US));
    }

    #[test]
    fn feature_gated_function_refuses_traffic_until_enabled() {
        let mut rt = FaasRuntime::new();
        rt.deploy(FunctionSpec::new("g", "chf", 700, FeatureGate::R17))
            .unwrap();
        let err = rt
            .admit("g", VirtualTime::ZERO, false, &mut rng())
            .unwrap_err();
        assert!(matches!(err, InvokeError::FeatureGateDisabled(_)));
        assert!(rt.admit("g", VirtualTime::ZERO, true, &mut rng()).is_ok());
    }

    #[test]
    fn evict_all_restarts_warmup_immediately_and_closes_periods() {
        let mut rt = runtime_with("f", 1000);
        rt.prewarm_all(VirtualTime::ZERO, true);
        assert_eq!(rt.replica_count("f"), 1);

        let evict_at = VirtualTime::from_secs(10);
        rt.evict_all(evict_at);
        assert_eq!(rt.replica_count("f"), 0);
        assert_eq!(rt.periods()[0].to, Some(evict_at));

        let r = rt
            .admit("f", VirtualTime::from_micros(10_000_000 + 1), true, &mut rng())
            .unwrap();
        assert!(r.cold);
        assert_eq!(
            r.started_at,
            evict_at.add_micros(DEFAULT_COLD_START_US),
            "warm-up began at eviction, not at the next request"
        );
    }

    #[test]
    fn idle_sweep_reclaims_only_after_the_idle_window() {
        let mut rt = runtime_with("f", 1000);
        let mut j = rng();
        rt.prewarm_all(VirtualTime::ZERO, true);
        rt.admit("f", VirtualTime::from_secs(5), true, &mut j).unwrap();

        let early = rt.idle_sweep(VirtualTime::from_secs(30), DEFAULT_IDLE_WINDOW_US);
        assert!(early.is_empty());
        assert_eq!(rt.replica_count("f"), 1);

        let late = rt.idle_sweep(VirtualTime::from_secs(65), DEFAULT_IDLE_WINDOW_US);
        assert_eq!(late, vec!["f".to_string()]);
        assert_eq!(rt.replica_count("f"), 0);
        assert_eq!(rt.periods()[0].to, Some(VirtualTime::from_secs(65)));
        assert!(!rt.any_resident());
    }

    #[test]
    fn idle_sweep_completes_elapsed_warmups_before_judging_idleness() {
        let mut rt = runtime_with("f", 1000);
        rt.admit("f", VirtualTime::ZERO, true, &mut rng()).unwrap();

        rt.idle_sweep(VirtualTime::from_secs(5), DEFAULT_IDLE_WINDOW_US);
        assert_eq!(rt.replica_count("f"), 1, "warm-up elapsed, replica resident");

        rt.idle_sweep(VirtualTime::from_secs(70), DEFAULT_IDLE_WINDOW_US);
        assert_eq!(rt.replica_count("f"), 0);
        let p = &rt.periods()[0];
        assert_eq!(p.from, VirtualTime::from_micros(DEFAULT_COLD_START_US));
        assert_eq!(p.to, Some(VirtualTime::from_secs(70)));
    }

    #[test]
    fn saturating_a_replica_adds_another_without_cold_start() {
        let mut rt = FaasRuntime::new();
        let mut spec = FunctionSpec::new("f", "test", 1_000_000, FeatureGate::R15);
        spec.max_concurrency = 2;
        rt.deploy(spec).unwrap();
        rt.prewarm_all(VirtualTime::ZERO, true);

        let mut j = rng();
        let t = VirtualTime::from_secs(1);
        rt.admit("f", t, true, &mut j).unwrap();
        rt.admit("f", t, true, &mut j).unwrap();
        assert_eq!(rt.replica_count("f"), 1);
        let third = rt.admit("f", t, true, &mut j).unwrap();
        assert!(!third.cold);
        assert_eq!(rt.replica_count("f"), 2);
        assert_eq!(rt.periods().len(), 2);

        let open: Vec<_> = rt.periods().iter().filter(|p| p.to.is_none()).collect();
        assert_eq!(open.len(), 2);
    }

    #[test]
    fn jitter_scales_duration_within_the_configured_band() {
        let mut rt = FaasRuntime::new();
        let mut spec = FunctionSpec::new("f", "test", 10_000, FeatureGate::R15);
        spec.exec_jitter_pct = 10.0;
        rt.deploy(spec).unwrap();
        rt.prewarm_all(VirtualTime::ZERO, true);
        let mut j = rng();
        for i in 0..200 {
            let r = rt
                .admit("f", VirtualTime::from_secs(i + 1), true, &mut j)
                .unwrap();
            assert!(r.duration_us >= 9_000 && r.duration_us <= 11_000);
        }
    }

    #[test]
    fn zero_jitter_makes_no_rng_draws() {
        let mut rt = runtime_with("f", 10_000);
        rt.prewarm_all(VirtualTime::ZERO, true);
        let mut a = rng();
        let mut b = rng();
        rt.admit("f", VirtualTime::from_secs(1), true, &mut a).unwrap();
        assert_eq!(a.next_u64(), b.next_u64());
    }
}
