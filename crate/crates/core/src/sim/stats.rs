use serde::{Deserialize, Serialize};

use crate::cpu::relative_latency;
use crate::error::{Error, Result};
use crate::sim::trace::{request_latency, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean_ms: f64,
    /// Sample standard deviation (n − 1); zero for a single request.
    pub std_ms: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_to_baseline: Option<f64>,
}

/// Linear interpolation between closest ranks; `sorted` must be ascending.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize_latencies(latencies: &[f64], baseline_mean: Option<f64>) -> Result<SummaryStats> {
    if latencies.is_empty() {
        return Err(Error::EmptyInput("no completed requests to summarize".into()));
    }
    let n = latencies.len() as f64;
    let mean = latencies.iter().sum::<f64>() / n;
    let std = if latencies.len() > 1 {
        (latencies.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = latencies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let relative_to_baseline = baseline_mean.map(|b| relative_latency(mean, b)).transpose()?;
    Ok(SummaryStats {
        count: latencies.len(),
        mean_ms: mean,
        std_ms: std,
        p50: percentile(&sorted, 0.50),
        p95: percentile(&sorted, 0.95),
        p99: percentile(&sorted, 0.99),
        relative_to_baseline,
    })
}

/// Latency statistics over the completed requests of a trace.
pub fn summarize(trace: &[TraceRecord], baseline_mean: Option<f64>) -> Result<SummaryStats> {
    let latencies: Vec<f64> = trace
        .iter()
        .filter(|r| r.is_complete())
        .map(request_latency)
        .collect::<Result<_>>()?;
    summarize_latencies(&latencies, baseline_mean)
}
