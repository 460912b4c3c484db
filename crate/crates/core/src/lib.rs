//! Serverless scaling-policy lab: CPU sharing model, resize latency model,
//! cold/warm/in-place policies, a discrete-event simulator and a mock
//! orchestrator for resize measurements.

// `!(x > 0.0)` style checks are how NaN gets rejected along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cpu;
mod error;
pub mod orchestrator;
pub mod plan;
pub mod plot;
pub mod policy;
pub mod report;
pub mod resize;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};

pub use cpu::{cfs_allocate, water_fill, Allocation, CpuWork, MilliCpu, NodeSpec};
pub use plan::{fine_plan, resize_plan, table2_suite, CumulativeDownStart, Pattern, ResizePlan};
pub use policy::{Policy, PolicyConfig, PolicyKind};
pub use report::{build_report, ReportRow, RunSummary};
pub use resize::{default_table, sample_resize_latency, Direction, LatencySampler, LoadState, ResizeLatencyTable};
pub use scenario::{load_scenario, parse_scenario, ScenarioConfig};
pub use sim::{run_scenario, SimRun, SummaryStats, TraceRecord};
pub use workload::{ArrivalMode, ArrivalPlan, WorkloadSpec};
