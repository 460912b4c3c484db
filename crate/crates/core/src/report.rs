//! Run summaries and policy-relative latency reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::scenario::ScenarioConfig;
use crate::sim::{summarize, SimRun, SummaryStats};
use crate::workload::catalog;

/// Contents of a `summary-<policy>-<workload>.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub policy: PolicyKind,
    pub workload: String,
    pub replications: u32,
    pub cold_starts: usize,
    pub stats: SummaryStats,
}

impl RunSummary {
    pub fn from_run(config: &ScenarioConfig, run: &SimRun) -> Result<Self> {
        Ok(RunSummary {
            seed: config.seed,
            policy: config.policy.kind,
            workload: config.workload.name.clone(),
            replications: config.replications,
            cold_starts: run.cold_starts(),
            stats: summarize(&run.records, None)?,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// One workload's latencies relative to its baseline, with the absolute means
/// they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub workload: String,
    pub cold_ratio: Option<f64>,
    pub inplace_ratio: Option<f64>,
    pub warm_ratio: Option<f64>,
    pub default_ratio: f64,
    pub baseline_mean_ms: f64,
    pub cold_mean_ms: Option<f64>,
    pub inplace_mean_ms: Option<f64>,
    pub warm_mean_ms: Option<f64>,
}

impl ReportRow {
    fn new(workload: &str, baseline_mean_ms: f64) -> Self {
        ReportRow {
            workload: workload.to_string(),
            cold_ratio: None,
            inplace_ratio: None,
            warm_ratio: None,
            default_ratio: 1.0,
            baseline_mean_ms,
            cold_mean_ms: None,
            inplace_mean_ms: None,
            warm_mean_ms: None,
        }
    }

    pub fn ratio(&self, kind: PolicyKind) -> Option<f64> {
        match kind {
            PolicyKind::Cold => self.cold_ratio,
            PolicyKind::InPlace => self.inplace_ratio,
            PolicyKind::Warm => self.warm_ratio,
            PolicyKind::Default => Some(self.default_ratio),
        }
    }
}

/// Normalizes each input's mean latency by the baseline mean of the same
/// workload. Rows follow catalog order, then any other workloads by name.
pub fn build_report(baselines: &[RunSummary], inputs: &[RunSummary]) -> Result<Vec<ReportRow>> {
    if baselines.is_empty() {
        return Err(Error::EmptyInput("no baseline summaries".into()));
    }
    let mut rows: BTreeMap<String, ReportRow> = BTreeMap::new();
    for b in baselines {
        let mean = b.stats.mean_ms;
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::invalid(format!(
                "baseline mean for `{}` must be positive, got {mean}",
                b.workload
            )));
        }
        if rows.insert(b.workload.clone(), ReportRow::new(&b.workload, mean)).is_some() {
            return Err(Error::invalid(format!("two baselines for `{}`", b.workload)));
        }
    }
    for s in inputs {
        let row = rows.get_mut(&s.workload).ok_or_else(|| {
            Error::invalid(format!(
                "workload mismatch: no baseline for `{}` (baselines: {})",
                s.workload,
                baselines.iter().map(|b| b.workload.as_str()).collect::<Vec<_>>().join(", ")
            ))
        })?;
        let mean = s.stats.mean_ms;
        let ratio = Some(mean / row.baseline_mean_ms);
        match s.policy {
            PolicyKind::Cold => (row.cold_ratio, row.cold_mean_ms) = (ratio, Some(mean)),
            PolicyKind::InPlace => (row.inplace_ratio, row.inplace_mean_ms) = (ratio, Some(mean)),
            PolicyKind::Warm => (row.warm_ratio, row.warm_mean_ms) = (ratio, Some(mean)),
            PolicyKind::Default => {}
        }
    }
    let order: Vec<String> = catalog().into_iter().map(|w| w.name).collect();
    let mut out: Vec<ReportRow> = rows.into_values().collect();
    out.sort_by_key(|r| {
        (
            order.iter().position(|n| *n == r.workload).unwrap_or(usize::MAX),
            r.workload.clone(),
        )
    });
    Ok(out)
}

/// Renders rows as an aligned text table.
pub fn render_report(rows: &[ReportRow]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
    let header = ["workload", "cold", "in-place", "warm", "default", "default_ms"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.workload.clone(),
                cell(r.cold_ratio),
                cell(r.inplace_ratio),
                cell(r.warm_ratio),
                cell(Some(r.default_ratio)),
                cell(Some(r.baseline_mean_ms)),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for line in &body {
        for (w, c) in widths.iter_mut().zip(line) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut emit = |cells: &[&str]| {
        for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    emit(&header);
    for line in &body {
        emit(&line.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::summarize_latencies;

    fn summary(policy: PolicyKind, workload: &str, mean: f64) -> RunSummary {
        RunSummary {
            seed: 42,
            policy,
            workload: workload.into(),
            replications: 1,
            cold_starts: 0,
            stats: summarize_latencies(&[mean], None).unwrap(),
        }
    }

    #[test]
    fn helloworld_row() {
        let base = summary(PolicyKind::Default, "helloworld", 5.31);
        let inputs = [
            summary(PolicyKind::Cold, "helloworld", 5.31 * 286.99),
            summary(PolicyKind::Warm, "helloworld", 5.31 * 3.87),
            summary(PolicyKind::InPlace, "helloworld", 5.31 * 14.5),
            base.clone(),
        ];
        let rows = build_report(&[base], &inputs).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!((r.cold_ratio.unwrap() - 286.99).abs() < 1e-9);
        assert!((r.warm_ratio.unwrap() - 3.87).abs() < 1e-9);
        assert!((r.inplace_ratio.unwrap() - 14.5).abs() < 1e-9);
        assert_eq!(r.default_ratio, 1.0);
        assert_eq!(r.baseline_mean_ms, 5.31);
    }

    #[test]
    fn baseline_against_itself() {
        let base = summary(PolicyKind::Warm, "cpu", 2000.0);
        let rows = build_report(std::slice::from_ref(&base), std::slice::from_ref(&base)).unwrap();
        assert_eq!(rows[0].warm_ratio, Some(1.0));
        assert_eq!(rows[0].default_ratio, 1.0);
    }

    #[test]
    fn mismatched_workload_is_rejected() {
        let base = summary(PolicyKind::Default, "cpu", 2465.18);
        let e = build_report(&[base], &[summary(PolicyKind::Cold, "io", 5.0)]).unwrap_err();
        assert!(e.to_string().contains("mismatch"));
    }

    #[test]
    fn non_positive_baseline_is_rejected() {
        let base = summary(PolicyKind::Default, "cpu", 0.0);
        assert!(build_report(&[base], &[]).is_err());
    }

    #[test]
    fn ratios_ignore_time_unit() {
        let make = |scale: f64| {
            let base = summary(PolicyKind::Default, "io", 2258.22 * scale);
            let input = summary(PolicyKind::Cold, "io", 4268.03 * scale);
            build_report(&[base], &[input]).unwrap()[0].cold_ratio.unwrap()
        };
        assert!((make(1.0) - make(1e-3)).abs() < 1e-12);
    }

    #[test]
    fn rows_follow_catalog_order() {
        let bases = [
            summary(PolicyKind::Default, "videos-1m", 1.0),
            summary(PolicyKind::Default, "helloworld", 1.0),
            summary(PolicyKind::Default, "custom", 1.0),
        ];
        let rows = build_report(&bases, &[]).unwrap();
        let names: Vec<_> = rows.iter().map(|r| r.workload.as_str()).collect();
        assert_eq!(names, ["helloworld", "videos-1m", "custom"]);
    }

    #[test]
    fn rendered_table_is_aligned() {
        let base = summary(PolicyKind::Default, "helloworld", 5.31);
        let rows = build_report(&[base], &[summary(PolicyKind::Cold, "helloworld", 1523.9)]).unwrap();
        let text = render_report(&rows);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].len(), lines[1].len());
        assert!(lines[1].contains("286.99"));
    }

    #[test]
    fn summary_json_round_trip() {
        let s = summary(PolicyKind::InPlace, "helloworld", 77.0);
        let text = s.to_json();
        assert!(text.contains("\"policy\": \"in-place\""));
        assert_eq!(RunSummary::from_json(&text).unwrap(), s);
    }
}
