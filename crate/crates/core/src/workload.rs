//! Workload catalog and arrival plans.

use serde::{Deserialize, Serialize};

use crate::cpu::CpuWork;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    /// Runtime on one full CPU.
    pub runtime_at_1000m: f64,
    pub work: CpuWork,
    /// Share of the runtime that scales with CPU allocation. The rest is a
    /// fixed tail that takes the same time at any rate.
    pub cpu_bound_fraction: f64,
}

impl WorkloadSpec {
    pub fn new(name: impl Into<String>, runtime_at_1000m: f64) -> Result<Self> {
        WorkloadSpec::with_fraction(name, runtime_at_1000m, 1.0)
    }

    pub fn with_fraction(
        name: impl Into<String>,
        runtime_at_1000m: f64,
        cpu_bound_fraction: f64,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::validation("workload.name", "must not be empty"));
        }
        if !(runtime_at_1000m > 0.0) || !runtime_at_1000m.is_finite() {
            return Err(Error::validation(
                "workload.runtime_at_1000m_ms",
                format!("must be positive, got {runtime_at_1000m}"),
            ));
        }
        if !(0.0..=1.0).contains(&cpu_bound_fraction) {
            return Err(Error::validation(
                "workload.cpu_bound_fraction",
                format!("must lie in [0, 1], got {cpu_bound_fraction}"),
            ));
        }
        let work = CpuWork::from_runtime_at_one_cpu(runtime_at_1000m * cpu_bound_fraction)?;
        Ok(WorkloadSpec {
            name,
            runtime_at_1000m,
            work,
            cpu_bound_fraction,
        })
    }

    /// Time spent after the CPU-bound part, independent of allocation.
    pub fn fixed_tail_ms(&self) -> f64 {
        self.runtime_at_1000m * (1.0 - self.cpu_bound_fraction)
    }
}

/// Measured runtimes at 1000m, in ms.
const RUNTIMES: [(&str, f64); 6] = [
    ("helloworld", 5.31),
    ("cpu", 2465.18),
    ("io", 2258.22),
    ("videos-10s", 1659.03),
    ("videos-1m", 13888.03),
    ("videos-10m", 119028.34),
];

/// Latency of each policy relative to the bare function, as measured on the
/// reference platform. Used to derive per-workload platform costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRatios {
    pub cold: f64,
    pub in_place: f64,
    pub warm: f64,
}

const REFERENCE_RATIOS: [(&str, ReferenceRatios); 6] = [
    ("helloworld", ReferenceRatios { cold: 286.99, in_place: 15.81, warm: 3.87 }),
    ("cpu", ReferenceRatios { cold: 2.00, in_place: 1.31, warm: 1.13 }),
    ("io", ReferenceRatios { cold: 1.89, in_place: 1.46, warm: 1.09 }),
    ("videos-10s", ReferenceRatios { cold: 1.88, in_place: 1.24, warm: 1.03 }),
    ("videos-1m", ReferenceRatios { cold: 1.34, in_place: 1.16, warm: 1.08 }),
    ("videos-10m", ReferenceRatios { cold: 1.31, in_place: 1.13, warm: 1.07 }),
];

pub fn catalog() -> Vec<WorkloadSpec> {
    RUNTIMES
        .iter()
        .map(|&(name, runtime)| WorkloadSpec::new(name, runtime).expect("catalog entries are valid"))
        .collect()
}

pub fn lookup(name: &str) -> Result<WorkloadSpec> {
    catalog()
        .into_iter()
        .find(|w| w.name == name)
        .ok_or_else(|| Error::NotFound(format!("workload `{name}`")))
}

pub fn reference_ratios(name: &str) -> Option<ReferenceRatios> {
    REFERENCE_RATIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, r)| *r)
}

/// Per-request platform costs of one workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformCosts {
    /// Routing cost paid by every non-default request.
    pub platform_overhead_ms: f64,
    /// Instance launch time paid by cold starts.
    pub cold_start_ms: f64,
}

impl PlatformCosts {
    /// `overhead = (warm − 1)·runtime`, `cold start = (cold − warm)·runtime`.
    pub fn from_ratios(runtime_ms: f64, ratios: ReferenceRatios) -> Self {
        PlatformCosts {
            platform_overhead_ms: (ratios.warm - 1.0) * runtime_ms,
            cold_start_ms: (ratios.cold - ratios.warm) * runtime_ms,
        }
    }

    pub fn for_workload(name: &str) -> Option<Self> {
        let spec = lookup(name).ok()?;
        reference_ratios(name).map(|r| PlatformCosts::from_ratios(spec.runtime_at_1000m, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArrivalMode {
    /// Each virtual user sends a request, waits for the response, sleeps
    /// `think_ms`, and repeats `iterations` times.
    ClosedLoop {
        vus: u32,
        iterations: u32,
        #[serde(default)]
        think_ms: f64,
    },
    /// Open-loop arrivals at `rate_rps` until `horizon_ms`.
    Poisson { rate_rps: f64, horizon_ms: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalPlan {
    pub mode: ArrivalMode,
    pub workload: String,
}

impl ArrivalPlan {
    pub fn closed_loop(workload: impl Into<String>, vus: u32, iterations: u32, think_ms: f64) -> Self {
        ArrivalPlan {
            mode: ArrivalMode::ClosedLoop {
                vus,
                iterations,
                think_ms,
            },
            workload: workload.into(),
        }
    }

    pub fn poisson(workload: impl Into<String>, rate_rps: f64, horizon_ms: f64) -> Self {
        ArrivalPlan {
            mode: ArrivalMode::Poisson {
                rate_rps,
                horizon_ms,
            },
            workload: workload.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            ArrivalMode::ClosedLoop {
                vus,
                iterations,
                think_ms,
            } => {
                if vus == 0 {
                    return Err(Error::validation("driver.vus", "must be at least 1"));
                }
                if iterations == 0 {
                    return Err(Error::validation("driver.iterations", "must be at least 1"));
                }
                if !(think_ms >= 0.0) || !think_ms.is_finite() {
                    return Err(Error::validation("driver.think_ms", "must be non-negative"));
                }
            }
            ArrivalMode::Poisson {
                rate_rps,
                horizon_ms,
            } => {
                if !(rate_rps > 0.0) || !rate_rps.is_finite() {
                    return Err(Error::validation("driver.rate_rps", "must be positive"));
                }
                if !(horizon_ms > 0.0) || !horizon_ms.is_finite() {
                    return Err(Error::validation("driver.horizon_ms", "must be positive"));
                }
            }
        }
        Ok(())
    }
}
