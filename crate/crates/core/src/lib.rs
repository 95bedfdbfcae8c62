//! Deterministic emulator of a serverless 5G core control plane.
//!
//! The control plane is decomposed into 31 single-procedure functions spread
//! over 12 network functions. Functions run on an emulated
//! scale-to-zero FaaS gateway, keep every bit of state in a versioned
//! key-value store, and are driven over an invented compact N2/NAS wire
//! format by a scripted radio-network load generator. Everything executes in
//! virtual time on one logical thread, so a (scenario, seed, flags) triple
//! always reproduces the same ledger, the same latencies and the same report
//! bytes.
//!
//! Module map:
//! - [`simkernel`]: virtual clock, event queue, named RNG streams
//! - [`statestore`]: versioned KV store with optimistic transactions
//! - [`procedures`]: the 31 control-plane function handlers and their types
//! - [`faasruntime`]: cold starts, scale-to-zero, invocation ledger
//! - [`n2proxy`]: N2 frame codec and the per-UE NAS dispatch proxy
//! - [`loadgen`]: scenario presets, batched UE agents, end-to-end runs
//! - [`metrics`]: percentiles, chain stats, GB-s accounting, convergence
//! - [`costmodel`]: memory cost model and break-even analysis

pub mod costmodel;
pub mod faasruntime;
pub mod loadgen;
pub mod metrics;
pub mod n2proxy;
pub mod procedures;
pub mod simkernel;
pub mod statestore;
