//! Memory-time cost comparison across core deployment styles.
//!
//! Four styles are compared over a common horizon, all in decimal
//! gigabyte-seconds (1 GB = 1000 MB):
//!
//! * an always-on monolithic core that keeps its full footprint resident,
//! * a function platform that keeps the shared platform resident and pays
//!   for function replicas only over the busy fraction, plus a
//!   per-invocation allocation charge,
//! * a duty-cycled core that powers the whole stack on and off with the
//!   busy fraction,
//! * a scale-to-zero floor that keeps only a minimal agent resident and
//!   pays per invocation.
//!
//! Break-even formulas come in exact form (solving equal cost directly)
//! and in the simplified form with the per-invocation term dropped; at the
//! exact roots the two compared costs agree to floating-point precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FULL_CORE_MB: f64 = 2105.0;
pub const DEFAULT_PLATFORM_MB: f64 = 1640.0;
pub const DEFAULT_FUNCTIONS_MB: f64 = 465.0;
pub const DEFAULT_ALWAYS_ON_MB: f64 = 1368.0;
pub const DEFAULT_IDLE_FLOOR_MB: f64 = 150.0;
pub const DEFAULT_PER_INVOCATION_GB_S: f64 = 0.002;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("per-tenant function footprint {mf_mb} MB plus invocation load meets or exceeds the always-on footprint {ma_mb} MB, so no tenant count reaches break-even")]
    DegenerateTenancy { ma_mb: f64, mf_mb: f64 },
    #[error("invalid cost parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Resident footprint of the full duty-cycled core, MB.
    pub ms_mb: f64,
    /// Resident footprint of the shared function platform, MB.
    pub mp_mb: f64,
    /// Combined resident footprint of all function replicas, MB.
    pub mf_mb: f64,
    /// Resident footprint of the always-on core, MB.
    pub ma_mb: f64,
    /// Resident floor when scaled to zero, MB.
    pub mi_mb: f64,
    /// Memory-time charged per invocation, GB-s.
    pub g_gb_s: f64,
    /// Sustained invocation rate, per second.
    pub lambda_per_s: f64,
    /// Fraction of the horizon the deployment is busy.
    pub duty: f64,
    /// Deployments sharing one platform.
    pub tenants: u32,
    /// Comparison horizon, seconds.
    pub horizon_s: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            ms_mb: DEFAULT_FULL_CORE_MB,
            mp_mb: DEFAULT_PLATFORM_MB,
            mf_mb: DEFAULT_FUNCTIONS_MB,
            ma_mb: DEFAULT_ALWAYS_ON_MB,
            mi_mb: DEFAULT_IDLE_FLOOR_MB,
            g_gb_s: DEFAULT_PER_INVOCATION_GB_S,
            lambda_per_s: 0.0,
            duty: 0.33,
            tenants: 1,
            horizon_s: 1.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields = [
            ("Ms", self.ms_mb),
            ("Mp", self.mp_mb),
            ("Mf", self.mf_mb),
            ("Ma", self.ma_mb),
            ("Mi", self.mi_mb),
            ("g", self.g_gb_s),
            ("lambda", self.lambda_per_s),
            ("horizon", self.horizon_s),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(CostError::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if !self.duty.is_finite() || !(0.0..=1.0).contains(&self.duty) {
            return Err(CostError::InvalidParameter(format!(
                "duty must lie in [0, 1], got {}",
                self.duty
            )));
        }
        if self.tenants == 0 {
            return Err(CostError::InvalidParameter(
                "tenants must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Function platform with the shared platform always resident, at a
    /// given busy fraction. Covers all tenants.
    pub fn serverless_gb_s_at(&self, duty: f64) -> f64 {
        let k = self.tenants as f64;
        let resident = (self.mp_mb + k * duty * self.mf_mb) / 1000.0;
        let invocations = k * self.lambda_per_s * duty * self.g_gb_s;
        resident * self.horizon_s + invocations * self.horizon_s
    }

    /// Full core powered on only for the busy fraction. Covers all tenants.
    pub fn shutdown_gb_s_at(&self, duty: f64) -> f64 {
        let k = self.tenants as f64;
        k * duty * self.ms_mb / 1000.0 * self.horizon_s
    }

    /// One always-on core per tenant.
    pub fn always_on_gb_s(&self) -> f64 {
        let k = self.tenants as f64;
        k * self.ma_mb / 1000.0 * self.horizon_s
    }

    /// Minimal resident agent per tenant plus per-invocation charges at
    /// the sustained rate.
    pub fn scale_to_zero_gb_s(&self) -> f64 {
        let k = self.tenants as f64;
        k * (self.mi_mb / 1000.0 + self.lambda_per_s * self.g_gb_s) * self.horizon_s
    }

    pub fn serverless_gb_s(&self) -> f64 {
        self.serverless_gb_s_at(self.duty)
    }

    pub fn shutdown_gb_s(&self) -> f64 {
        self.shutdown_gb_s_at(self.duty)
    }

    /// Busy fraction at which the platform-resident style costs the same
    /// as always-on, solved exactly. Negative means the platform alone
    /// already outweighs the always-on core, so always-on wins at any
    /// duty for this tenant count.
    pub fn duty_break_even_platform_on(&self) -> f64 {
        let k = self.tenants as f64;
        let numerator = k * self.ma_mb - self.mp_mb;
        let denominator = k * (self.mf_mb + 1000.0 * self.lambda_per_s * self.g_gb_s);
        numerator / denominator
    }

    /// Simplified platform-on break-even with the per-invocation term
    /// dropped.
    pub fn duty_break_even_platform_on_approx(&self) -> f64 {
        (self.tenants as f64 * self.ma_mb - self.mp_mb) / (self.tenants as f64 * self.mf_mb)
    }

    /// Busy fraction at which duty-cycling the full core costs the same
    /// as always-on.
    pub fn duty_break_even_shutdown(&self) -> f64 {
        self.ma_mb / self.ms_mb
    }

    /// Cost of the duty-cycled core relative to always-on at a given busy
    /// fraction.
    pub fn shutdown_cost_ratio(&self, duty: f64) -> f64 {
        duty * self.ms_mb / self.ma_mb
    }

    /// Smallest tenant count at which sharing one platform at full duty
    /// beats one always-on core per tenant, with the exact real root.
    pub fn tenant_break_even(&self) -> Result<TenantBreakEven, CostError> {
        let margin = self.ma_mb - self.mf_mb - 1000.0 * self.lambda_per_s * self.g_gb_s;
        if margin <= 0.0 {
            return Err(CostError::DegenerateTenancy {
                ma_mb: self.ma_mb,
                mf_mb: self.mf_mb,
            });
        }
        let root = self.mp_mb / margin;
        Ok(TenantBreakEven {
            exact_root: root,
            tenants: root.ceil().max(1.0) as u32,
        })
    }

    /// Sustained invocation rate at which the scale-to-zero floor costs
    /// the same as always-on, per tenant.
    pub fn rate_break_even_per_s(&self) -> f64 {
        (self.ma_mb - self.mi_mb) / 1000.0 / self.g_gb_s
    }

    pub fn summarize(&self) -> Result<CostSummary, CostError> {
        self.validate()?;
        let always_on = self.always_on_gb_s();
        let rows = vec![
            CostRow {
                deployment: "always-on".to_string(),
                gb_s: always_on,
                ratio_to_always_on: 1.0,
            },
            CostRow {
                deployment: "serverless-platform-on".to_string(),
                gb_s: self.serverless_gb_s(),
                ratio_to_always_on: self.serverless_gb_s() / always_on,
            },
            CostRow {
                deployment: "duty-cycled-shutdown".to_string(),
                gb_s: self.shutdown_gb_s(),
                ratio_to_always_on: self.shutdown_gb_s() / always_on,
            },
            CostRow {
                deployment: "scale-to-zero".to_string(),
                gb_s: self.scale_to_zero_gb_s(),
                ratio_to_always_on: self.scale_to_zero_gb_s() / always_on,
            },
        ];
        let cheapest = rows
            .iter()
            .min_by(|a, b| a.gb_s.total_cmp(&b.gb_s))
            .expect("four rows")
            .deployment
            .clone();
        let tenant_break_even = self.tenant_break_even().ok();
        Ok(CostSummary {
            params: *self,
            rows,
            break_evens: BreakEvens {
                duty_platform_on: self.duty_break_even_platform_on(),
                duty_platform_on_approx: self.duty_break_even_platform_on_approx(),
                duty_shutdown: self.duty_break_even_shutdown(),
                tenant_break_even,
                rate_per_s: self.rate_break_even_per_s(),
            },
            shutdown_ratio_at_duty: self.shutdown_cost_ratio(self.duty),
            cheapest,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TenantBreakEven {
    pub exact_root: f64,
    pub tenants: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub deployment: String,
    pub gb_s: f64,
    pub ratio_to_always_on: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakEvens {
    /// Busy fraction where the platform-resident style matches always-on.
    pub duty_platform_on: f64,
    pub duty_platform_on_approx: f64,
    /// Busy fraction where duty-cycling the full core matches always-on.
    pub duty_shutdown: f64,
    /// Tenant count where platform sharing at full duty matches per-tenant
    /// always-on cores; absent when no count reaches break-even.
    pub tenant_break_even: Option<TenantBreakEven>,
    /// Invocation rate where the scale-to-zero floor matches always-on.
    pub rate_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub params: CostParams,
    pub rows: Vec<CostRow>,
    pub break_evens: BreakEvens,
    pub shutdown_ratio_at_duty: f64,
    pub cheapest: String,
}

impl CostSummary {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "memory-time over {:.0} s at duty {:.2}, {} tenant(s), rate {} /s\n",
            self.params.horizon_s, self.params.duty, self.params.tenants, self.params.lambda_per_s
        ));
        out.push_str(&format!(
            "{:<24} {:>14} {:>10}\n",
            "deployment", "GB-s", "ratio"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>14.6} {:>10.4}\n",
                row.deployment, row.gb_s, row.ratio_to_always_on
            ));
        }
        out.push_str(&format!("cheapest: {}\n", self.cheapest));
        out.push_str("break-evens:\n");
        let be = &self.break_evens;
        if be.duty_platform_on >= 0.0 {
            out.push_str(&format!(
                "  duty, platform resident: {:.4} (simplified {:.4})\n",
                be.duty_platform_on, be.duty_platform_on_approx
            ));
        } else {
            out.push_str(&format!(
                "  duty, platform resident: none (root {:.4}; the platform alone outweighs always-on)\n",
                be.duty_platform_on
            ));
        }
        out.push_str(&format!(
            "  duty, full shutdown:     {:.5}\n",
            be.duty_shutdown
        ));
        match &be.tenant_break_even {
            Some(t) => out.push_str(&format!(
                "  tenants sharing platform: {} (exact root {:.4})\n",
                t.tenants, t.exact_root
            )),
            None => out.push_str("  tenants sharing platform: none\n"),
        }
        out.push_str(&format!(
            "  rate for scale-to-zero:  {:.1} /s\n",
            be.rate_per_s
        ));
        out.push_str(&format!(
            "shutdown cost ratio at duty {:.2}: {:.4}\n",
            self.params.duty, self.shutdown_ratio_at_duty
        ));
        out
    }
}
