//! Scenario-driven traffic generation against a simulated core.
//!
//! A scenario describes a population of subscribers arriving in batches,
//! each walking the full access-side signalling exchange: registration
//! with authentication and security setup, then a configurable number of
//! session establishments. Devices are event-driven state machines on the
//! simulation kernel; every radio leg costs a one-way trip and every
//! response the device produces costs a fixed processing delay, so
//! end-to-end latency decomposes exactly into transport, device time, and
//! backend execution.
//!
//! Arrivals come in batches of `batch_size` spaced `batch_stagger_s`
//! apart, with members of a batch spread at the per-instance admission
//! cap. A cold-start storm collapses every batch to a single instant and
//! starts the run with all function pods evicted, which is the worst case
//! for a scale-to-zero platform.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faasruntime::{Cluster, ClusterConfig, InvocationRecord, ReplicaPeriod};
use crate::metrics::{
    convergence, function_stats, mean_chain_exec_us, resource_time, LatencySummary,
    ProcedureRecord, RunReport,
};
use crate::n2proxy::{N2Frame, N2Proxy, NasMsgType, ProxyStats};
use crate::procedures::auth;
use crate::procedures::provision::{self, ProvisionEntry, ProvisionError};
use crate::procedures::types::Snssai;
use crate::simkernel::{EventHandle, KernelStats, SimKernel, VirtualTime};

/// Registration guard timer: the device abandons an attempt that has not
/// completed this long after the initial request.
pub const T3510_US: u64 = 15_000_000;

pub const DEFAULT_BATCH_SIZE: u32 = 100;
pub const DEFAULT_BATCH_STAGGER_S: f64 = 30.0;
pub const DEFAULT_PER_INSTANCE_CAP_PER_S: f64 = 50.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown scenario preset {0:?}; expected one of {names}", names = PRESET_NAMES.join(", "))]
    UnknownPreset(String),
    #[error("unknown calibration profile {0:?}")]
    UnknownCalibration(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("subscriber list has {have} entries but the scenario needs {need}")]
    NotEnoughSubscribers { need: usize, have: usize },
    #[error(transparent)]
    Provision(#[from] ProvisionError),
}

/// One traffic scenario. The radio and device timing fields default to
/// the calibrated warm baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub ue_count: u32,
    /// Nominal offered rate; admission spacing is governed by
    /// `per_instance_cap_per_s`.
    pub rate_per_s: f64,
    pub duration_s: u64,
    pub pdu_per_ue: u8,
    #[serde(default = "default_batch_size")]
    pub batch_size: u32,
    #[serde(default = "default_batch_stagger_s")]
    pub batch_stagger_s: f64,
    #[serde(default = "default_cap")]
    pub per_instance_cap_per_s: f64,
    /// Device-side processing before each response it originates.
    #[serde(default = "default_ue_step")]
    pub ue_step_delay_us: u64,
    /// One-way radio trip; every exchange pays it twice.
    #[serde(default = "default_ran_rtt")]
    pub ran_rtt_us: u64,
}

fn default_batch_size() -> u32 {
    DEFAULT_BATCH_SIZE
}

fn default_batch_stagger_s() -> f64 {
    DEFAULT_BATCH_STAGGER_S
}

fn default_cap() -> f64 {
    DEFAULT_PER_INSTANCE_CAP_PER_S
}

fn default_ue_step() -> u64 {
    WARM_BASELINE.ue_step_delay_us
}

fn default_ran_rtt() -> u64 {
    WARM_BASELINE.ran_rtt_us
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(ScenarioError::Invalid("name must not be empty".into()));
        }
        if self.ue_count > 100_000 {
            return Err(ScenarioError::Invalid(format!(
                "ue_count {} exceeds the supported maximum of 100000",
                self.ue_count
            )));
        }
        if self.duration_s == 0 {
            return Err(ScenarioError::Invalid("duration_s must be positive".into()));
        }
        if self.pdu_per_ue > 15 {
            return Err(ScenarioError::Invalid(
                "pdu_per_ue must be at most 15, one per session id".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(ScenarioError::Invalid("batch_size must be positive".into()));
        }
        if !self.batch_stagger_s.is_finite() || self.batch_stagger_s < 0.0 {
            return Err(ScenarioError::Invalid(
                "batch_stagger_s must be finite and non-negative".into(),
            ));
        }
        if !self.per_instance_cap_per_s.is_finite() || self.per_instance_cap_per_s <= 0.0 {
            return Err(ScenarioError::Invalid(
                "per_instance_cap_per_s must be positive".into(),
            ));
        }
        if !self.rate_per_s.is_finite() || self.rate_per_s < 0.0 {
            return Err(ScenarioError::Invalid(
                "rate_per_s must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn apply_calibration(&mut self, cal: &Calibration) {
        self.ran_rtt_us = cal.ran_rtt_us;
        self.ue_step_delay_us = cal.ue_step_delay_us;
    }
}

/// Named pair of radio and device timing constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Calibration {
    pub name: &'static str,
    pub ran_rtt_us: u64,
    pub ue_step_delay_us: u64,
}

/// Timing calibrated so a fully warm registration takes 456,500 µs end to
/// end: three device turns of 2 x 10,000 + 126,980 µs plus 15,560 µs of
/// backend execution.
pub const WARM_BASELINE: Calibration = Calibration {
    name: "warm-baseline",
    ran_rtt_us: 10_000,
    ue_step_delay_us: 126_980,
};

/// A low-latency lab profile for quick runs.
pub const FAST: Calibration = Calibration {
    name: "fast",
    ran_rtt_us: 1_000,
    ue_step_delay_us: 10_000,
};

pub const CALIBRATIONS: [Calibration; 2] = [WARM_BASELINE, FAST];

pub fn calibration(name: &str) -> Option<&'static Calibration> {
    CALIBRATIONS.iter().find(|c| c.name == name)
}

pub const PRESET_NAMES: [&str; 5] = ["idle", "low", "medium", "high", "burst"];

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    let (ue_count, rate_per_s, duration_s, pdu_per_ue, stagger_s) = match name {
        "idle" => (0, 0.0, 600, 0, DEFAULT_BATCH_STAGGER_S),
        "low" => (100, 1.0, 600, 1, DEFAULT_BATCH_STAGGER_S),
        "medium" => (500, 5.0, 600, 2, DEFAULT_BATCH_STAGGER_S),
        "high" => (1000, 20.0, 600, 3, DEFAULT_BATCH_STAGGER_S),
        "burst" => (500, 50.0, 300, 2, 10.0),
        _ => return None,
    };
    Some(ScenarioSpec {
        name: name.to_string(),
        ue_count,
        rate_per_s,
        duration_s,
        pdu_per_ue,
        batch_size: DEFAULT_BATCH_SIZE,
        batch_stagger_s: stagger_s,
        per_instance_cap_per_s: DEFAULT_PER_INSTANCE_CAP_PER_S,
        ue_step_delay_us: default_ue_step(),
        ran_rtt_us: default_ran_rtt(),
    })
}

/// Resolves a preset name or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<ScenarioSpec, ScenarioError> {
    if let Some(spec) = preset(name_or_path) {
        return Ok(spec);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_scenario(path);
    }
    Err(ScenarioError::UnknownPreset(name_or_path.to_string()))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let spec: ScenarioSpec = serde_json::from_str(&text)?;
    spec.validate()?;
    Ok(spec)
}

/// Arrival instants for every device, in device order. Batches of
/// `batch_size` start `batch_stagger_s` apart; within a batch, arrivals
/// are spaced at the per-instance admission cap. A cold-start storm
/// collapses each batch to its start instant.
pub fn arrival_times(spec: &ScenarioSpec, cold_storm: bool) -> Vec<VirtualTime> {
    let stagger_us = (spec.batch_stagger_s * 1e6).round() as u64;
    let spacing_us = (1e6 / spec.per_instance_cap_per_s).round() as u64;
    (0..spec.ue_count)
        .map(|i| {
            let batch = u64::from(i / spec.batch_size);
            let within = u64::from(i % spec.batch_size);
            let offset = if cold_storm { 0 } else { within * spacing_us };
            VirtualTime::from_micros(batch * stagger_us + offset)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub r17: bool,
    pub seed: u64,
    pub cold_storm: bool,
    pub idle_window_s: u64,
    pub cold_start_ms: u64,
    /// Symmetric execution-time jitter in percent; 0 disables it.
    pub jitter_pct: f64,
    pub n4_nested: bool,
    /// Explicit subscriber population; synthesized from the scenario size
    /// when absent.
    pub subscribers: Option<Vec<ProvisionEntry>>,
    /// Attach a dump of the final state store to the result.
    pub capture_state: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            r17: false,
            seed: 42,
            cold_storm: false,
            idle_window_s: crate::faasruntime::DEFAULT_IDLE_WINDOW_US / 1_000_000,
            cold_start_ms: crate::faasruntime::DEFAULT_COLD_START_US / 1_000,
            jitter_pct: 0.0,
            n4_nested: false,
            subscribers: None,
            capture_state: false,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.jitter_pct.is_finite() || !(0.0..=100.0).contains(&self.jitter_pct) {
            return Err(ScenarioError::Invalid(format!(
                "jitter_pct must lie in [0, 100], got {}",
                self.jitter_pct
            )));
        }
        Ok(())
    }
}

/// Everything a finished run produced, serializable as a whole. Two runs
/// of the same scenario, options, and seed serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: ScenarioSpec,
    pub r17: bool,
    pub seed: u64,
    pub cold_storm: bool,
    pub idle_window_s: u64,
    pub cold_start_ms: u64,
    pub jitter_pct: f64,
    pub n4_nested: bool,
    pub window_end: VirtualTime,
    /// Closed-form warm registration latency for these timing constants.
    pub expected_warm_registration_us: u64,
    pub procedures: Vec<ProcedureRecord>,
    pub ledger: Vec<InvocationRecord>,
    pub periods: Vec<ReplicaPeriod>,
    pub final_replicas: BTreeMap<String, u32>,
    pub proxy_stats: ProxyStats,
    pub kernel_stats: KernelStats,
    pub registered: usize,
    pub t3510_expiries: usize,
    pub success_rate: f64,
    /// Final state-store dump, present when the run captured it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<serde_json::Value>,
}

impl ScenarioResult {
    pub fn registration_latencies_us(&self) -> Vec<u64> {
        self.procedures
            .iter()
            .filter(|r| r.procedure == "registration" && r.success)
            .map(|r| r.latency_us())
            .collect()
    }

    pub fn pdu_latencies_us(&self) -> Vec<u64> {
        self.procedures
            .iter()
            .filter(|r| r.procedure == "pdu-establish" && r.success)
            .map(|r| r.latency_us())
            .collect()
    }

    pub fn report(&self, platform_mb: f64) -> RunReport {
        let cold_invocations = self.ledger.iter().filter(|r| r.cold_start).count();
        RunReport {
            scenario: self.scenario.name.clone(),
            seed: self.seed,
            r17: self.r17,
            cold_storm: self.cold_storm,
            ue_count: self.scenario.ue_count,
            window_s: self.window_end.as_secs_f64(),
            success_rate: self.success_rate,
            t3510_expiries: self.t3510_expiries,
            total_invocations: self.ledger.len(),
            cold_invocations,
            registration: LatencySummary::from_samples(&self.registration_latencies_us()),
            pdu: LatencySummary::from_samples(&self.pdu_latencies_us()),
            registration_chain_exec_us: mean_chain_exec_us(&self.ledger, "registration"),
            expected_warm_registration_us: self.expected_warm_registration_us,
            convergence: convergence(&self.procedures, self.expected_warm_registration_us),
            resource: resource_time(
                &self.ledger,
                &self.periods,
                crate::faasruntime::DEFAULT_REPLICA_RSS_MB,
                platform_mb,
                VirtualTime::ZERO,
                self.window_end,
            ),
            per_function: function_stats(&self.ledger),
        }
    }
}

/// Backend execution time of one warm registration chain, summed over the
/// functions it touches in order.
pub fn registration_chain_functions(r17: bool) -> Vec<&'static str> {
    let mut chain = vec!["amf-initial-registration"];
    if r17 {
        chain.push("nsacf-slice-availability-check");
        chain.push("nsacf-update-counters");
    }
    chain.extend([
        "amf-auth-initiate",
        "udm-generate-auth-data",
        "amf-auth-initiate",
        "ausf-authenticate",
        "udm-generate-auth-data",
        "udm-get-subscriber-data",
    ]);
    chain
}

fn expected_warm_registration_us(cluster: &Cluster, spec: &ScenarioSpec, r17: bool) -> u64 {
    let exec: u64 = registration_chain_functions(r17)
        .iter()
        .filter_map(|name| cluster.runtime.spec(name))
        .map(|s| s.exec_time_us)
        .sum();
    3 * (2 * spec.ran_rtt_us + spec.ue_step_delay_us) + exec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UePhase {
    Waiting,
    Registering,
    SessionSetup,
    Done,
    Failed,
}

struct UeAgent {
    supi: String,
    k: [u8; 16],
    snssai: Snssai,
    dnn: String,
    phase: UePhase,
    reg_sent_at: Option<VirtualTime>,
    pdu_sent_at: Option<VirtualTime>,
    t3510: Option<EventHandle>,
    next_sid: u8,
}

struct SimWorld {
    cluster: Cluster,
    proxy: N2Proxy,
    ues: Vec<UeAgent>,
    records: Vec<ProcedureRecord>,
    ran_rtt_us: u64,
    ue_step_us: u64,
    pdu_per_ue: u8,
    idle_window_us: u64,
    t3510_expiries: usize,
}

type Kernel = SimKernel<SimWorld>;

fn send_uplink(kernel: &mut Kernel, world: &mut SimWorld, frame: N2Frame) {
    let arrive = kernel.now().add_micros(world.ran_rtt_us);
    kernel
        .schedule(arrive, move |k, w| uplink_arrived(k, w, frame))
        .expect("uplink arrival is never in the past");
}

fn schedule_uplink_after_step(kernel: &mut Kernel, world: &mut SimWorld, frame: N2Frame) {
    let at = kernel.now().add_micros(world.ue_step_us);
    kernel
        .schedule(at, move |k, w| send_uplink(k, w, frame))
        .expect("device step is never in the past");
}

fn deliver_all(kernel: &mut Kernel, world: &mut SimWorld, downlinks: Vec<crate::n2proxy::Downlink>) {
    for downlink in downlinks {
        let arrive = downlink.at.add_micros(world.ran_rtt_us);
        let frame = downlink.frame;
        kernel
            .schedule(arrive, move |k, w| downlink_arrived(k, w, frame))
            .expect("downlink arrival is never in the past");
    }
}

fn uplink_arrived(kernel: &mut Kernel, world: &mut SimWorld, frame: N2Frame) {
    let now = kernel.now();
    let ue_id = frame.ue_id;
    let queued_before = world.proxy.stats.queued;
    let downlinks = world.proxy.on_uplink(&mut world.cluster, frame, now);
    deliver_all(kernel, world, downlinks);
    if world.proxy.stats.queued > queued_before {
        schedule_drain(kernel, world, ue_id, now);
    }
}

fn schedule_drain(kernel: &mut Kernel, world: &mut SimWorld, ue_id: u32, now: VirtualTime) {
    match world.proxy.busy_until(ue_id) {
        Some(busy) if busy > now => {
            kernel
                .schedule(busy, move |k, w| drain_proxy(k, w, ue_id))
                .expect("drain fires at the in-flight completion");
        }
        _ => {
            let downlinks = world.proxy.complete(&mut world.cluster, ue_id, now);
            deliver_all(kernel, world, downlinks);
        }
    }
}

fn drain_proxy(kernel: &mut Kernel, world: &mut SimWorld, ue_id: u32) {
    let now = kernel.now();
    let downlinks = world.proxy.complete(&mut world.cluster, ue_id, now);
    deliver_all(kernel, world, downlinks);
    if let Some(busy) = world.proxy.busy_until(ue_id) {
        if busy > now {
            kernel
                .schedule(busy, move |k, w| drain_proxy(k, w, ue_id))
                .expect("drain fires at the in-flight completion");
        }
    }
}

fn start_registration(kernel: &mut Kernel, world: &mut SimWorld, ue_id: u32) {
    let now = kernel.now();
    let idx = (ue_id - 1) as usize;
    let frame = {
        let ue = &mut world.ues[idx];
        ue.phase = UePhase::Registering;
        ue.reg_sent_at = Some(now);
        N2Frame::new(NasMsgType::RegistrationRequest, ue_id)
            .with_supi(&ue.supi)
            .with_snssai(ue.snssai)
    };
    let handle = kernel
        .schedule(now.add_micros(T3510_US), move |k, w| {
            t3510_expired(k, w, ue_id)
        })
        .expect("guard timer is in the future");
    world.ues[idx].t3510 = Some(handle);
    send_uplink(kernel, world, frame);
}

fn t3510_expired(kernel: &mut Kernel, world: &mut SimWorld, ue_id: u32) {
    let now = kernel.now();
    let idx = (ue_id - 1) as usize;
    if world.ues[idx].phase != UePhase::Registering {
        return;
    }
    world.ues[idx].t3510 = None;
    world.t3510_expiries += 1;
    fail_registration(kernel, world, ue_id, now, true);
}

fn fail_registration(
    kernel: &mut Kernel,
    world: &mut SimWorld,
    ue_id: u32,
    at: VirtualTime,
    timed_out: bool,
) {
    let idx = (ue_id - 1) as usize;
    if let Some(handle) = world.ues[idx].t3510.take() {
        kernel.cancel(handle);
    }
    let ue = &mut world.ues[idx];
    ue.phase = UePhase::Failed;
    let started_at = ue.reg_sent_at.unwrap_or(at);
    world.records.push(ProcedureRecord {
        ue_id,
        supi: ue.supi.clone(),
        procedure: "registration".to_string(),
        started_at,
        finished_at: at,
        success: false,
        timed_out,
    });
}

fn complete_registration(kernel: &mut Kernel, world: &mut SimWorld, ue_id: u32) {
    let now = kernel.now();
    let idx = (ue_id - 1) as usize;
    if world.ues[idx].phase != UePhase::Registering {
        return;
    }
    if let Some(handle) = world.ues[idx].t3510.take() {
        kernel.cancel(handle);
    }
    {
        let ue = &mut world.ues[idx];
        let started_at = ue.reg_sent_at.unwrap_or(now);
        world.records.push(ProcedureRecord {
            ue_id,
            supi: ue.supi.clone(),
            procedure: "registration".to_string(),
            started_at,
            finished_at: now,
            success: true,
            timed_out: false,
        });
    }
    let frame = N2Frame::new(NasMsgType::RegistrationComplete, ue_id);
    send_uplink(kernel, world, frame);
    if world.pdu_per_ue > 0 {
        world.ues[idx].phase = UePhase::SessionSetup;
        world.ues[idx].next_sid = 1;
        let at = now.add_micros(world.ue_step_us);
        kernel
            .schedule(at, move |k, w| send_pdu_request(k, w, ue_id))
            .expect("device step is never in the past");
    } else {
        world.ues[idx].phase = UePhase::Done;
    }
}

fn send_pdu_request(kernel: &mut Kernel, world: &mut SimWorld, ue_id: u32) {
    let now = kernel.now();
    let idx = (ue_id - 1) as usize;
    let frame = {
        let ue = &mut world.ues[idx];
        if ue.phase != UePhase::SessionSetup {
            return;
        }
        ue.pdu_sent_at = Some(now);
        N2Frame::new(NasMsgType::PduEstablishRequest, ue_id)
            .with_pdu_session_id(ue.next_sid)
            .with_snssai(ue.snssai)
            .with_dnn(&ue.dnn)
    };
    send_uplink(kernel, world, frame);
}

fn finish_pdu(kernel: &mut Kernel, world: &mut SimWorld, ue_id: u32, at: VirtualTime, success: bool) {
    let idx = (ue_id - 1) as usize;
    {
        let ue = &mut world.ues[idx];
        let started_at = ue.pdu_sent_at.take().unwrap_or(at);
        world.records.push(ProcedureRecord {
            ue_id,
            supi: ue.supi.clone(),
            procedure: "pdu-establish".to_string(),
            started_at,
            finished_at: at,
            success,
            timed_out: false,
        });
    }
    let ue = &mut world.ues[idx];
    ue.next_sid += 1;
    if ue.next_sid <= world.pdu_per_ue {
        let send_at = at.add_micros(world.ue_step_us);
        kernel
            .schedule(send_at, move |k, w| send_pdu_request(k, w, ue_id))
            .expect("device step is never in the past");
    } else {
        ue.phase = UePhase::Done;
    }
}

fn downlink_arrived(kernel: &mut Kernel, world: &mut SimWorld, frame: N2Frame) {
    let now = kernel.now();
    let ue_id = frame.ue_id;
    let Some(idx) = (ue_id as usize).checked_sub(1) else {
        return;
    };
    if idx >= world.ues.len() {
        return;
    }
    match (world.ues[idx].phase, frame.msg_type) {
        (UePhase::Registering, NasMsgType::AuthenticationRequest) => {
            let Some(rand) = frame.rand() else {
                return;
            };
            let res = auth::mac16(&world.ues[idx].k, &[&rand]);
            let reply = N2Frame::new(NasMsgType::AuthenticationResponse, ue_id).with_res(res);
            schedule_uplink_after_step(kernel, world, reply);
        }
        (UePhase::Registering, NasMsgType::SecurityModeCommand) => {
            let reply = N2Frame::new(NasMsgType::SecurityModeComplete, ue_id);
            schedule_uplink_after_step(kernel, world, reply);
        }
        (UePhase::Registering, NasMsgType::RegistrationAccept) => {
            let at = now.add_micros(world.ue_step_us);
            kernel
                .schedule(at, move |k, w| complete_registration(k, w, ue_id))
                .expect("device step is never in the past");
        }
        (UePhase::Registering, NasMsgType::Reject) => {
            fail_registration(kernel, world, ue_id, now, false);
        }
        (UePhase::SessionSetup, NasMsgType::PduEstablishAccept) => {
            finish_pdu(kernel, world, ue_id, now, true);
        }
        (UePhase::SessionSetup, NasMsgType::Reject) => {
            finish_pdu(kernel, world, ue_id, now, false);
        }
        _ => {}
    }
}

/// Runs one scenario to its observation window and collects everything
/// the platform and the devices recorded.
pub fn run_scenario(spec: &ScenarioSpec, opts: &RunOptions) -> Result<ScenarioResult, ScenarioError> {
    spec.validate()?;
    opts.validate()?;

    let entries: Vec<ProvisionEntry> = match &opts.subscribers {
        Some(list) => {
            if list.len() < spec.ue_count as usize {
                return Err(ScenarioError::NotEnoughSubscribers {
                    need: spec.ue_count as usize,
                    have: list.len(),
                });
            }
            list[..spec.ue_count as usize].to_vec()
        }
        None => provision::synthesize(spec.ue_count as usize),
    };

    let mut cluster = Cluster::new(
        opts.seed,
        ClusterConfig {
            r17: opts.r17,
            n4_nested: opts.n4_nested,
            ..ClusterConfig::default()
        },
    );
    cluster.deploy_standard(opts.cold_start_ms * 1000, opts.jitter_pct);
    provision::apply(&mut cluster.store, &entries)?;

    if opts.cold_storm {
        cluster.runtime.evict_all(VirtualTime::ZERO);
    } else if spec.ue_count > 0 {
        cluster.runtime.prewarm_all(VirtualTime::ZERO, opts.r17);
    }
    let expected_warm = expected_warm_registration_us(&cluster, spec, opts.r17);

    let ues: Vec<UeAgent> = entries
        .iter()
        .map(|entry| {
            Ok(UeAgent {
                supi: entry.supi.clone(),
                k: entry.key_bytes()?,
                snssai: *entry
                    .allowed_snssai
                    .first()
                    .expect("provision validation requires a slice"),
                dnn: entry.default_dnn.clone(),
                phase: UePhase::Waiting,
                reg_sent_at: None,
                pdu_sent_at: None,
                t3510: None,
                next_sid: 0,
            })
        })
        .collect::<Result<_, ProvisionError>>()?;

    let mut world = SimWorld {
        cluster,
        proxy: N2Proxy::new(),
        ues,
        records: Vec::new(),
        ran_rtt_us: spec.ran_rtt_us,
        ue_step_us: spec.ue_step_delay_us,
        pdu_per_ue: spec.pdu_per_ue,
        idle_window_us: opts.idle_window_s * 1_000_000,
        t3510_expiries: 0,
    };

    let mut kernel: Kernel = SimKernel::new(opts.seed);
    for (i, at) in arrival_times(spec, opts.cold_storm).into_iter().enumerate() {
        let ue_id = (i + 1) as u32;
        kernel
            .schedule(at, move |k, w| start_registration(k, w, ue_id))
            .expect("arrivals start at or after time zero");
    }
    for second in 1..=spec.duration_s {
        kernel
            .schedule(VirtualTime::from_secs(second), |k, w| {
                if w.cluster.runtime.any_resident() {
                    let now = k.now();
                    let window = w.idle_window_us;
                    w.cluster.runtime.idle_sweep(now, window);
                }
            })
            .expect("sweeps lie inside the observation window");
    }

    let window_end = VirtualTime::from_secs(spec.duration_s);
    kernel.run_until(window_end, &mut world);

    for idx in 0..world.ues.len() {
        if world.ues[idx].phase == UePhase::Registering {
            fail_registration(&mut kernel, &mut world, (idx + 1) as u32, window_end, false);
        }
    }

    let registered = world
        .records
        .iter()
        .filter(|r| r.procedure == "registration" && r.success)
        .count();
    let success_rate = if spec.ue_count == 0 {
        1.0
    } else {
        registered as f64 / f64::from(spec.ue_count)
    };
    let final_replicas = world
        .cluster
        .runtime
        .function_names()
        .map(|name| (name.to_string(), world.cluster.runtime.replica_count(name)))
        .collect();
    let final_state = opts.capture_state.then(|| world.cluster.store.dump_json());

    Ok(ScenarioResult {
        scenario: spec.clone(),
        r17: opts.r17,
        seed: opts.seed,
        cold_storm: opts.cold_storm,
        idle_window_s: opts.idle_window_s,
        cold_start_ms: opts.cold_start_ms,
        jitter_pct: opts.jitter_pct,
        n4_nested: opts.n4_nested,
        window_end,
        expected_warm_registration_us: expected_warm,
        procedures: world.records,
        ledger: world.cluster.runtime.sorted_ledger(),
        periods: world.cluster.runtime.periods().to_vec(),
        final_replicas,
        proxy_stats: world.proxy.stats,
        kernel_stats: kernel.stats(),
        registered,
        t3510_expiries: world.t3510_expiries,
        success_rate,
        final_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(ue_count: u32, pdu_per_ue: u8) -> ScenarioSpec {
        ScenarioSpec {
            name: "tiny".to_string(),
            ue_count,
            rate_per_s: 1.0,
            duration_s: 120,
            pdu_per_ue,
            batch_size: DEFAULT_BATCH_SIZE,
            batch_stagger_s: DEFAULT_BATCH_STAGGER_S,
            per_instance_cap_per_s: DEFAULT_PER_INSTANCE_CAP_PER_S,
            ue_step_delay_us: default_ue_step(),
            ran_rtt_us: default_ran_rtt(),
        }
    }

    #[test]
    fn warm_registration_latency_is_exact() {
        let result = run_scenario(&tiny(5, 1), &RunOptions::default()).unwrap();
        assert_eq!(result.expected_warm_registration_us, 456_500);
        let regs = result.registration_latencies_us();
        assert_eq!(regs.len(), 5);
        assert!(regs.iter().all(|&l| l == 456_500), "{regs:?}");
        let pdus = result.pdu_latencies_us();
        assert_eq!(pdus.len(), 5);
        assert!(pdus.iter().all(|&l| l == 20_930), "{pdus:?}");
        assert_eq!(result.success_rate, 1.0);
        assert_eq!(result.t3510_expiries, 0);
    }

    #[test]
    fn each_subscriber_produces_eight_invocations_with_one_session() {
        let result = run_scenario(&tiny(4, 1), &RunOptions::default()).unwrap();
        let mut per_supi: BTreeMap<&str, usize> = BTreeMap::new();
        for rec in &result.ledger {
            *per_supi.entry(&rec.correlation.supi).or_default() += 1;
        }
        assert_eq!(per_supi.len(), 4);
        assert!(per_supi.values().all(|&n| n == 8), "{per_supi:?}");
    }

    #[test]
    fn cold_storm_shifts_every_first_batch_registration_by_the_cold_start() {
        let spec = tiny(5, 0);
        let warm = run_scenario(&spec, &RunOptions::default()).unwrap();
        let cold = run_scenario(
            &spec,
            &RunOptions {
                cold_storm: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        let warm_lat = warm.registration_latencies_us();
        let cold_lat = cold.registration_latencies_us();
        assert!(warm_lat.iter().all(|&l| l == 456_500));
        assert!(cold_lat.iter().all(|&l| l == 4_446_500), "{cold_lat:?}");
        for rec in &cold.ledger {
            if rec.cold_start {
                assert_eq!(rec.function, "amf-initial-registration");
            }
        }
        let cold_roots = cold.ledger.iter().filter(|r| r.cold_start).count();
        assert_eq!(cold_roots, 5);
        assert_eq!(cold.success_rate, 1.0);
        assert_eq!(cold.t3510_expiries, 0);
    }

    #[test]
    fn feature_gated_slice_admission_extends_the_chain() {
        let result = run_scenario(
            &tiny(2, 1),
            &RunOptions {
                r17: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(result.expected_warm_registration_us, 457_600);
        let regs = result.registration_latencies_us();
        assert!(regs.iter().all(|&l| l == 457_600), "{regs:?}");
        let per_supi_count = result.ledger.len() / 2;
        assert_eq!(per_supi_count, 12);
    }

    #[test]
    fn same_seed_runs_serialize_identically() {
        let spec = tiny(8, 1);
        let opts = RunOptions {
            jitter_pct: 5.0,
            ..RunOptions::default()
        };
        let a = run_scenario(&spec, &opts).unwrap();
        let b = run_scenario(&spec, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );

        let other_seed = run_scenario(
            &spec,
            &RunOptions {
                jitter_pct: 5.0,
                seed: 7,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&other_seed).unwrap(),
            "jittered runs depend on the seed"
        );
    }

    #[test]
    fn presets_cover_the_documented_grid() {
        let high = preset("high").unwrap();
        assert_eq!(high.ue_count, 1000);
        assert_eq!(high.pdu_per_ue, 3);
        assert_eq!(high.duration_s, 600);
        let burst = preset("burst").unwrap();
        assert_eq!(burst.batch_stagger_s, 10.0);
        assert_eq!(burst.duration_s, 300);
        let idle = preset("idle").unwrap();
        assert_eq!(idle.ue_count, 0);
        assert!(preset("nope").is_none());
        for name in PRESET_NAMES {
            assert!(preset(name).is_some());
        }
    }

    #[test]
    fn arrivals_space_at_the_admission_cap_and_collapse_under_storm() {
        let spec = preset("high").unwrap();
        let normal = arrival_times(&spec, false);
        assert_eq!(normal.len(), 1000);
        assert_eq!(normal[0], VirtualTime::ZERO);
        assert_eq!(normal[1], VirtualTime::from_micros(20_000));
        assert_eq!(normal[99], VirtualTime::from_micros(1_980_000));
        assert_eq!(normal[100], VirtualTime::from_secs(30));
        assert_eq!(normal[999], VirtualTime::from_micros(270_000_000 + 1_980_000));

        let storm = arrival_times(&spec, true);
        assert_eq!(storm[0], VirtualTime::ZERO);
        assert_eq!(storm[99], VirtualTime::ZERO);
        assert_eq!(storm[100], VirtualTime::from_secs(30));
        assert_eq!(storm[199], VirtualTime::from_secs(30));
    }

    #[test]
    fn idle_scenario_touches_nothing() {
        let result = run_scenario(&preset("idle").unwrap(), &RunOptions::default()).unwrap();
        assert!(result.ledger.is_empty());
        assert!(result.periods.is_empty());
        assert!(result.final_replicas.values().all(|&r| r == 0));
        assert_eq!(result.success_rate, 1.0);
        assert_eq!(result.window_end, VirtualTime::from_secs(600));
    }

    #[test]
    fn guard_timer_abandons_registrations_stuck_behind_a_long_cold_start() {
        let result = run_scenario(
            &tiny(3, 1),
            &RunOptions {
                cold_storm: true,
                cold_start_ms: 20_000,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(result.t3510_expiries, 3);
        assert_eq!(result.success_rate, 0.0);
        for rec in &result.procedures {
            assert_eq!(rec.procedure, "registration");
            assert!(!rec.success);
            assert!(rec.timed_out);
            assert_eq!(rec.latency_us(), T3510_US);
        }
    }

    #[test]
    fn replicas_are_reclaimed_after_the_idle_window() {
        let result = run_scenario(
            &tiny(2, 0),
            &RunOptions {
                idle_window_s: 10,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(result.final_replicas.values().all(|&r| r == 0), "traffic ended early, so every pod should be idle-reclaimed well before the window closes");
        assert!(result
            .periods
            .iter()
            .all(|p| p.to.is_some()));
    }

    #[test]
    fn scenario_files_round_trip_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        let spec = tiny(7, 2);
        std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(loaded, spec);

        std::fs::write(&path, r#"{"name":"bad","ue_count":1,"rate_per_s":1.0,"duration_s":0,"pdu_per_ue":1}"#).unwrap();
        assert!(matches!(
            load_scenario(&path),
            Err(ScenarioError::Invalid(_))
        ));

        std::fs::write(&path, r#"{"name":"bad","unknown_field":3}"#).unwrap();
        assert!(matches!(load_scenario(&path), Err(ScenarioError::Parse(_))));

        assert!(matches!(
            resolve_scenario("no-such-preset"),
            Err(ScenarioError::UnknownPreset(_))
        ));
        assert_eq!(resolve_scenario("low").unwrap(), preset("low").unwrap());
    }

    #[test]
    fn explicit_subscriber_lists_must_cover_the_population() {
        let subs = provision::synthesize(2);
        let err = run_scenario(
            &tiny(3, 0),
            &RunOptions {
                subscribers: Some(subs),
                ..RunOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ScenarioError::NotEnoughSubscribers { need: 3, have: 2 }
        ));
    }

    #[test]
    fn report_composes_run_metrics() {
        let result = run_scenario(&tiny(5, 1), &RunOptions::default()).unwrap();
        let report = result.report(1640.0);
        assert_eq!(report.registration.count, 5);
        assert_eq!(report.registration.p50_us, 456_500);
        assert_eq!(report.pdu.p50_us, 20_930);
        assert_eq!(report.total_invocations, 40);
        assert_eq!(report.cold_invocations, 0);
        assert_eq!(report.registration_chain_exec_us, Some(15_560.0));
        assert!(report.resource.invocation_gb_s > 0.0);
        assert_eq!(report.success_rate, 1.0);
    }
}
