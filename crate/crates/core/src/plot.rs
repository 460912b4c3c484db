//! Tidy `(x, y, group)` series for external plotting tools.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orchestrator::Measurement;
use crate::policy::PolicyKind;
use crate::sim::{request_latency, TraceRecord};
use crate::workload::catalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Per-interval mean resize latency for every plan in the input.
    Fig2,
    /// Per-interval means, 100m-step plans only.
    Fig3,
    /// Per-interval means, 1000m-step plans only.
    Fig4,
    /// 5m-step upward sweep.
    Fig5a,
    /// 5m-step downward sweep.
    Fig5b,
    /// Mean request latency per workload and policy.
    Fig6,
    /// Default runtime against in-place relative latency.
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5a,
        Figure::Fig5b,
        Figure::Fig6,
        Figure::Fig7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }

    /// Whether the figure is built from trace CSVs rather than measurement CSVs.
    pub fn uses_traces(self) -> bool {
        matches!(self, Figure::Fig6 | Figure::Fig7)
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown figure `{s}`; valid selectors: {}",
                Figure::ALL.map(Figure::as_str).join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub x: String,
    pub y: f64,
    pub group: String,
}

/// The parts of a plan id such as `100m-incremental-up-1m-1000m`.
struct PlanIdParts<'a> {
    step: &'a str,
    direction: &'a str,
}

fn plan_parts(id: &str) -> Option<PlanIdParts<'_>> {
    let parts: Vec<&str> = id.split('-').collect();
    (parts.len() == 5).then(|| PlanIdParts {
        step: parts[0],
        direction: parts[2],
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean measured duration per `(plan, target)`, in input order of first appearance.
fn interval_means<'a>(rows: impl Iterator<Item = &'a Measurement>) -> Vec<PlotPoint> {
    let mut order: Vec<(String, u32)> = Vec::new();
    let mut acc: BTreeMap<(String, u32), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.plan_id.clone(), r.to_mcpu);
        acc.entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.measured_ms);
    }
    order
        .into_iter()
        .map(|k| {
            let y = mean(&acc[&k]);
            PlotPoint {
                x: k.1.to_string(),
                y,
                group: k.0,
            }
        })
        .collect()
}

pub fn measurement_series(figure: Figure, rows: &[Measurement]) -> Result<Vec<PlotPoint>> {
    let keep = |r: &&Measurement| {
        let Some(p) = plan_parts(&r.plan_id) else {
            return figure == Figure::Fig2;
        };
        match figure {
            Figure::Fig2 => true,
            Figure::Fig3 => p.step == "100m",
            Figure::Fig4 => p.step == "1000m",
            Figure::Fig5a => p.step == "5m" && p.direction == "up",
            Figure::Fig5b => p.step == "5m" && p.direction == "down",
            Figure::Fig6 | Figure::Fig7 => false,
        }
    };
    if figure.uses_traces() {
        return Err(Error::invalid(format!("{figure} is built from traces")));
    }
    let points = interval_means(rows.iter().filter(keep));
    if points.is_empty() {
        return Err(Error::EmptyInput(format!("no measurements for {figure}")));
    }
    Ok(points)
}

fn latencies_by(records: &[TraceRecord]) -> Result<BTreeMap<(String, PolicyKind), Vec<f64>>> {
    let mut acc: BTreeMap<(String, PolicyKind), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_complete()) {
        acc.entry((r.workload.clone(), r.policy))
            .or_default()
            .push(request_latency(r)?);
    }
    Ok(acc)
}

fn workload_rank(name: &str) -> (usize, String) {
    let pos = catalog().iter().position(|w| w.name == name);
    (pos.unwrap_or(usize::MAX), name.to_string())
}

pub fn trace_series(figure: Figure, records: &[TraceRecord]) -> Result<Vec<PlotPoint>> {
    let acc = latencies_by(records)?;
    let mut workloads: Vec<String> = acc.keys().map(|k| k.0.clone()).collect();
    workloads.dedup();
    workloads.sort_by_key(|w| workload_rank(w));
    let mut points = Vec::new();
    match figure {
        Figure::Fig6 => {
            for w in &workloads {
                for kind in PolicyKind::ALL {
                    if let Some(xs) = acc.get(&(w.clone(), kind)) {
                        points.push(PlotPoint {
                            x: w.clone(),
                            y: mean(xs),
                            group: kind.as_str().to_string(),
                        });
                    }
                }
            }
        }
        Figure::Fig7 => {
            for w in &workloads {
                let base = acc.get(&(w.clone(), PolicyKind::Default));
                let inplace = acc.get(&(w.clone(), PolicyKind::InPlace));
                if let (Some(b), Some(i)) = (base, inplace) {
                    let runtime = mean(b);
                    points.push(PlotPoint {
                        x: runtime.to_string(),
                        y: mean(i) / runtime,
                        group: w.clone(),
                    });
                }
            }
        }
        other => return Err(Error::invalid(format!("{other} is built from measurements"))),
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!("no usable traces for {figure}")));
    }
    Ok(points)
}

pub fn write_points<W: Write>(points: &[PlotPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<plot>", e))?;
    Ok(())
}
