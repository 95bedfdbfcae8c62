//! Measurement over invocation ledgers and end-to-end procedure records.
//!
//! Latency percentiles use the nearest-rank method on microsecond samples,
//! so every reported value is one that actually occurred. Resource use is
//! split three ways: per-invocation memory over execution intervals,
//! per-replica resident memory over residency periods, and the fixed
//! platform footprint over the whole observation window. All three clip to
//! the window and report decimal gigabyte-seconds (1 GB = 1000 MB).
//!
//! Settling time after a disturbance is judged from per-subscriber
//! registration latencies: a sample is disturbed when it is individually
//! far above the warm baseline and sits in at least one sliding window
//! whose upper median is also above it. The run has settled once the last
//! disturbed registration finished.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::faasruntime::{InvocationRecord, ReplicaPeriod};
use crate::simkernel::VirtualTime;

/// Nearest-rank percentile: the sample at 1-based rank `ceil(p/100 * n)`.
pub fn percentile_us(samples: &[u64], p: f64) -> u64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    percentile_sorted(&sorted, p)
}

fn percentile_sorted(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let n = sorted.len();
    // Multiply before dividing: p/100 is inexact in binary and inflates
    // integer ranks (7/100*100 rounds above 7), while p*n/100 stays exact
    // for integer p.
    let rank = (p * n as f64 / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub min_us: u64,
    pub p50_us: u64,
    pub p95_us: u64,
    pub p99_us: u64,
    pub max_us: u64,
    pub mean_us: f64,
}

impl LatencySummary {
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return LatencySummary::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let total: u64 = sorted.iter().sum();
        LatencySummary {
            count: sorted.len(),
            min_us: sorted[0],
            p50_us: percentile_sorted(&sorted, 50.0),
            p95_us: percentile_sorted(&sorted, 95.0),
            p99_us: percentile_sorted(&sorted, 99.0),
            max_us: *sorted.last().expect("non-empty"),
            mean_us: total as f64 / sorted.len() as f64,
        }
    }
}

/// One end-to-end procedure as the device experienced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcedureRecord {
    pub ue_id: u32,
    pub supi: String,
    pub procedure: String,
    pub started_at: VirtualTime,
    pub finished_at: VirtualTime,
    pub success: bool,
    pub timed_out: bool,
}

impl ProcedureRecord {
    pub fn latency_us(&self) -> u64 {
        self.finished_at.saturating_sub(self.started_at)
    }
}

/// Per-function aggregate over a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionStats {
    pub function: String,
    pub invocations: usize,
    pub cold_starts: usize,
    pub total_exec_us: u64,
    pub mean_exec_us: f64,
    /// This function's share of all execution time in the ledger.
    pub exec_share: f64,
}

pub fn function_stats(ledger: &[InvocationRecord]) -> Vec<FunctionStats> {
    let mut by_name: BTreeMap<&str, (usize, usize, u64)> = BTreeMap::new();
    let mut grand_total: u64 = 0;
    for rec in ledger {
        let exec = rec.finished_at.saturating_sub(rec.started_at);
        let entry = by_name.entry(&rec.function).or_default();
        entry.0 += 1;
        if rec.cold_start {
            entry.1 += 1;
        }
        entry.2 += exec;
        grand_total += exec;
    }
    by_name
        .into_iter()
        .map(|(name, (count, cold, total))| FunctionStats {
            function: name.to_string(),
            invocations: count,
            cold_starts: cold,
            total_exec_us: total,
            mean_exec_us: total as f64 / count as f64,
            exec_share: if grand_total == 0 {
                0.0
            } else {
                total as f64 / grand_total as f64
            },
        })
        .collect()
}

/// Mean summed execution time of one correlated procedure per subscriber.
/// For the registration exchange this is the end-to-end chain cost with
/// all transport and device time excluded.
pub fn mean_chain_exec_us(ledger: &[InvocationRecord], procedure: &str) -> Option<f64> {
    let mut per_supi: BTreeMap<&str, u64> = BTreeMap::new();
    for rec in ledger {
        if rec.correlation.procedure == procedure {
            *per_supi.entry(&rec.correlation.supi).or_default() +=
                rec.finished_at.saturating_sub(rec.started_at);
        }
    }
    if per_supi.is_empty() {
        return None;
    }
    let total: u64 = per_supi.values().sum();
    Some(total as f64 / per_supi.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceTime {
    pub invocation_gb_s: f64,
    pub replica_gb_s: f64,
    pub platform_gb_s: f64,
    pub total_gb_s: f64,
}

fn overlap_us(from: VirtualTime, to: VirtualTime, lo: VirtualTime, hi: VirtualTime) -> u64 {
    let start = from.max(lo);
    let end = to.min(hi);
    end.saturating_sub(start)
}

/// Memory-time integral over `[window_start, window_end]`.
pub fn resource_time(
    ledger: &[InvocationRecord],
    periods: &[ReplicaPeriod],
    replica_rss_mb: f64,
    platform_mb: f64,
    window_start: VirtualTime,
    window_end: VirtualTime,
) -> ResourceTime {
    let mut invocation_mb_us = 0.0;
    for rec in ledger {
        let us = overlap_us(rec.started_at, rec.finished_at, window_start, window_end);
        invocation_mb_us += rec.alloc_mb * us as f64;
    }

    let mut replica_mb_us = 0.0;
    for period in periods {
        let to = period.to.unwrap_or(window_end);
        let us = overlap_us(period.from, to, window_start, window_end);
        replica_mb_us += replica_rss_mb * us as f64;
    }

    let window_us = window_end.saturating_sub(window_start);
    let platform_mb_us = platform_mb * window_us as f64;

    let to_gb_s = |mb_us: f64| mb_us / 1000.0 / 1_000_000.0;
    let invocation_gb_s = to_gb_s(invocation_mb_us);
    let replica_gb_s = to_gb_s(replica_mb_us);
    let platform_gb_s = to_gb_s(platform_mb_us);
    ResourceTime {
        invocation_gb_s,
        replica_gb_s,
        platform_gb_s,
        total_gb_s: invocation_gb_s + replica_gb_s + platform_gb_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Convergence {
    /// Virtual time by which every disturbed registration had finished.
    Converged { at: VirtualTime },
    /// No successful registration to judge from.
    NoConvergence,
}

/// Settling point of registration latencies after a disturbance, judged
/// against a warm-path median. See the module docs for the definition.
pub fn convergence(records: &[ProcedureRecord], warm_p50_us: u64) -> Convergence {
    let mut samples: Vec<&ProcedureRecord> = records
        .iter()
        .filter(|r| r.procedure == "registration" && r.success)
        .collect();
    if samples.is_empty() {
        return Convergence::NoConvergence;
    }
    samples.sort_by_key(|r| (r.started_at, r.ue_id));

    let band_us = (warm_p50_us as f64 * 1.1) as u64;
    let n = samples.len();
    let w = n.min(20);

    let mut in_bad_window = vec![false; n];
    for start in 0..=(n - w) {
        let mut window: Vec<u64> = samples[start..start + w]
            .iter()
            .map(|r| r.latency_us())
            .collect();
        window.sort_unstable();
        let upper_median = window[w / 2];
        if upper_median > band_us {
            for flag in in_bad_window.iter_mut().skip(start).take(w) {
                *flag = true;
            }
        }
    }

    let mut settled_at: Option<VirtualTime> = None;
    for (i, rec) in samples.iter().enumerate() {
        let disturbed = rec.latency_us() > band_us && in_bad_window[i];
        if disturbed {
            settled_at = Some(settled_at.map_or(rec.finished_at, |t| t.max(rec.finished_at)));
        }
    }
    match settled_at {
        Some(at) => Convergence::Converged { at },
        None => Convergence::Converged {
            at: samples[0].started_at,
        },
    }
}

/// Everything the reporting surface shows for one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub r17: bool,
    pub cold_storm: bool,
    pub ue_count: u32,
    pub window_s: f64,
    pub success_rate: f64,
    pub t3510_expiries: usize,
    pub total_invocations: usize,
    pub cold_invocations: usize,
    pub registration: LatencySummary,
    pub pdu: LatencySummary,
    pub registration_chain_exec_us: Option<f64>,
    pub expected_warm_registration_us: u64,
    pub convergence: Convergence,
    pub resource: ResourceTime,
    pub per_function: Vec<FunctionStats>,
}

impl RunReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "scenario {} (seed {}, {} UEs, {}{}window {:.0} s)\n",
            self.scenario,
            self.seed,
            self.ue_count,
            if self.r17 { "R17, " } else { "R15, " },
            if self.cold_storm { "cold storm, " } else { "" },
            self.window_s
        ));
        out.push_str(&format!(
            "success rate {:.4}, guard-timer expiries {}\n",
            self.success_rate, self.t3510_expiries
        ));
        let lat = |name: &str, s: &LatencySummary| {
            format!(
                "{:<14} n={:<6} p50={:<10} p95={:<10} p99={:<10} mean={:<12.1} max={}\n",
                name, s.count, s.p50_us, s.p95_us, s.p99_us, s.mean_us, s.max_us
            )
        };
        out.push_str(&lat("registration", &self.registration));
        out.push_str(&lat("pdu-establish", &self.pdu));
        if let Some(chain) = self.registration_chain_exec_us {
            out.push_str(&format!(
                "registration chain execution: {:.1} us mean per subscriber (warm closed form {} us end to end)\n",
                chain, self.expected_warm_registration_us
            ));
        }
        match self.convergence {
            Convergence::Converged { at } => {
                out.push_str(&format!("settled at {at}\n"));
            }
            Convergence::NoConvergence => out.push_str("never settled\n"),
        }
        out.push_str(&format!(
            "memory-time GB-s: invocation {:.6}, replica {:.6}, platform {:.3}, total {:.3}\n",
            self.resource.invocation_gb_s,
            self.resource.replica_gb_s,
            self.resource.platform_gb_s,
            self.resource.total_gb_s
        ));
        out.push_str(&format!(
            "invocations: {} total, {} cold\n",
            self.total_invocations, self.cold_invocations
        ));
        out.push_str(&format!(
            "{:<32} {:>8} {:>6} {:>14} {:>10}\n",
            "function", "calls", "cold", "exec total us", "share"
        ));
        for f in &self.per_function {
            out.push_str(&format!(
                "{:<32} {:>8} {:>6} {:>14} {:>9.1}%\n",
                f.function,
                f.invocations,
                f.cold_starts,
                f.total_exec_us,
                f.exec_share * 100.0
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedMetric {
    pub metric: String,
    pub mean: f64,
    pub stddev: f64,
}

/// Mean and population standard deviation of the headline scalars across
/// several runs.
pub fn merge_reports(reports: &[RunReport]) -> Vec<MergedMetric> {
    fn stats(values: Vec<f64>) -> (f64, f64) {
        let n = values.len() as f64;
        if values.is_empty() {
            return (0.0, 0.0);
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
    let rows: [(&str, Box<dyn Fn(&RunReport) -> f64>); 10] = [
        ("registration_p50_us", Box::new(|r| r.registration.p50_us as f64)),
        ("registration_p95_us", Box::new(|r| r.registration.p95_us as f64)),
        ("registration_p99_us", Box::new(|r| r.registration.p99_us as f64)),
        ("registration_mean_us", Box::new(|r| r.registration.mean_us)),
        ("pdu_p50_us", Box::new(|r| r.pdu.p50_us as f64)),
        ("success_rate", Box::new(|r| r.success_rate)),
        ("invocation_gb_s", Box::new(|r| r.resource.invocation_gb_s)),
        ("replica_gb_s", Box::new(|r| r.resource.replica_gb_s)),
        ("total_gb_s", Box::new(|r| r.resource.total_gb_s)),
        ("cold_invocations", Box::new(|r| r.cold_invocations as f64)),
    ];
    rows.iter()
        .map(|(name, extract)| {
            let (mean, stddev) = stats(reports.iter().map(extract).collect());
            MergedMetric {
                metric: name.to_string(),
                mean,
                stddev,
            }
        })
        .collect()
}

pub fn render_merged_table(rows: &[MergedMetric], runs: usize) -> String {
    let mut out = format!("{runs} run(s) merged\n");
    out.push_str(&format!(
        "{:<24} {:>16} {:>16}\n",
        "metric", "mean", "stddev"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<24} {:>16.4} {:>16.4}\n",
            row.metric, row.mean, row.stddev
        ));
    }
    out
}
