//! Per-request timing records and their CSV form.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{InstanceId, PolicyConfig, PolicyKind, RequestId};

pub const TRACE_HEADER: [&str; 11] = [
    "request_id",
    "workload",
    "policy",
    "arrival_ms",
    "route_ms",
    "resize_dispatch_ms",
    "resize_applied_ms",
    "exec_start_ms",
    "completion_ms",
    "instance_id",
    "cold_start",
];

/// Timing of one request. `arrival_ms` is when the client sent it; routing
/// happens after the platform overhead, any queueing and any cold start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub request_id: u64,
    pub workload: String,
    pub policy: PolicyKind,
    pub arrival_ms: f64,
    pub route_ms: Option<f64>,
    pub resize_dispatch_ms: Option<f64>,
    pub resize_applied_ms: Option<f64>,
    pub exec_start_ms: Option<f64>,
    pub completion_ms: Option<f64>,
    pub instance_id: Option<u32>,
    pub cold_start: bool,
}

impl TraceRecord {
    pub fn new(id: RequestId, workload: &str, policy: PolicyKind, arrival_ms: f64) -> Self {
        TraceRecord {
            request_id: id.0,
            workload: workload.to_string(),
            policy,
            arrival_ms,
            route_ms: None,
            resize_dispatch_ms: None,
            resize_applied_ms: None,
            exec_start_ms: None,
            completion_ms: None,
            instance_id: None,
            cold_start: false,
        }
    }

    pub fn instance(&self) -> Option<InstanceId> {
        self.instance_id.map(InstanceId)
    }

    pub fn is_complete(&self) -> bool {
        self.completion_ms.is_some()
    }

    /// Checks the ordering of the recorded timestamps.
    pub fn check_order(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Protocol(format!(
                "request {}: {what}",
                self.request_id
            )))
        };
        let chain = [
            Some(self.arrival_ms),
            self.route_ms,
            self.exec_start_ms,
            self.completion_ms,
        ];
        let mut prev = f64::NEG_INFINITY;
        for t in chain.into_iter().flatten() {
            if t < prev {
                return bad("timestamps out of order");
            }
            prev = t;
        }
        if let (Some(d), Some(a)) = (self.resize_dispatch_ms, self.resize_applied_ms) {
            if a < d {
                return bad("resize applied before dispatch");
            }
        }
        Ok(())
    }
}

/// End-to-end latency of a completed request.
pub fn request_latency(record: &TraceRecord) -> Result<f64> {
    record
        .completion_ms
        .map(|c| c - record.arrival_ms)
        .ok_or(Error::NotFinished(record.request_id))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBreakdown {
    pub queue_wait_ms: f64,
    pub cold_start_ms: f64,
    pub platform_overhead_ms: f64,
    /// From execution start to completion, including any time at park rate.
    pub execution_ms: f64,
}

impl LatencyBreakdown {
    pub fn total(&self) -> f64 {
        self.queue_wait_ms + self.cold_start_ms + self.platform_overhead_ms + self.execution_ms
    }
}

/// Splits a completed request's latency into its phases.
pub fn latency_breakdown(record: &TraceRecord, policy: &PolicyConfig) -> Result<LatencyBreakdown> {
    let completion = record
        .completion_ms
        .ok_or(Error::NotFinished(record.request_id))?;
    let route = record
        .route_ms
        .ok_or(Error::NotFinished(record.request_id))?;
    let exec_start = record.exec_start_ms.unwrap_or(route);
    let cold_start_ms = if record.cold_start {
        policy.cold_start_ms
    } else {
        0.0
    };
    let platform_overhead_ms = policy.platform_overhead_ms;
    Ok(LatencyBreakdown {
        queue_wait_ms: (route - record.arrival_ms - cold_start_ms - platform_overhead_ms).max(0.0),
        cold_start_ms,
        platform_overhead_ms,
        execution_ms: completion - exec_start,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records as CSV, preceded by a `#` provenance line.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], provenance: &str, mut out: W) -> Result<()> {
    writeln!(out, "# {provenance}").map_err(|e| Error::io("<trace>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.request_id.to_string(),
            r.workload.clone(),
            r.policy.as_str().to_string(),
            r.arrival_ms.to_string(),
            opt(r.route_ms),
            opt(r.resize_dispatch_ms),
            opt(r.resize_applied_ms),
            opt(r.exec_start_ms),
            opt(r.completion_ms),
            r.instance_id.map(|i| i.to_string()).unwrap_or_default(),
            r.cold_start.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub fn trace_csv_string(records: &[TraceRecord], provenance: &str) -> String {
    let mut buf = Vec::new();
    write_trace_csv(records, provenance, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Reads a trace CSV, skipping `#` comment lines.
pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut text = String::new();
    for line in BufReader::new(input).lines() {
        let line = line.map_err(|e| Error::io("<trace>", e))?;
        if !line.starts_with('#') {
            text.push_str(&line);
            text.push('\n');
        }
    }
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(TRACE_HEADER) {
        return Err(Error::Format {
            line: 1,
            message: format!("expected trace header `{}`", TRACE_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |m: String| Error::Format { line, message: m };
        let f = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i]
                    .parse()
                    .map(Some)
                    .map_err(|_| bad(format!("`{}` is not a number", &rec[i])))
            }
        };
        out.push(TraceRecord {
            request_id: rec[0]
                .parse()
                .map_err(|_| bad(format!("bad request id `{}`", &rec[0])))?,
            workload: rec[1].to_string(),
            policy: rec[2].parse().map_err(|e: Error| bad(e.to_string()))?,
            arrival_ms: f(3)?.ok_or_else(|| bad("missing arrival_ms".into()))?,
            route_ms: f(4)?,
            resize_dispatch_ms: f(5)?,
            resize_applied_ms: f(6)?,
            exec_start_ms: f(7)?,
            completion_ms: f(8)?,
            instance_id: if rec[9].is_empty() {
                None
            } else {
                Some(rec[9].parse().map_err(|_| bad(format!("bad instance id `{}`", &rec[9])))?)
            },
            cold_start: rec[10]
                .parse()
                .map_err(|_| bad(format!("bad cold_start `{}`", &rec[10])))?,
        });
    }
    Ok(out)
}
