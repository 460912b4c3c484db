//! Deterministic discrete-event simulation of a single node.

mod engine;
pub mod event;
pub mod stats;
pub mod trace;

pub use engine::{run_scenario, run_with_table, simulate_once, RateSegment, SimNote, SimRun};
pub use event::{EventKind, EventQueue, SimEvent};
pub use stats::{percentile, summarize, summarize_latencies, SummaryStats};
pub use trace::{
    latency_breakdown, read_trace_csv, request_latency, trace_csv_string, write_trace_csv,
    LatencyBreakdown, TraceRecord, TRACE_HEADER,
};
