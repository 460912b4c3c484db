//! Scenario documents (TOML).
//!
//! ```toml
//! seed = 42              # default 42
//! replications = 1       # default 1
//! calibration = "default"  # or a path to a calibration CSV
//!
//! [node]
//! capacity_mcpu = 8000
//!
//! [policy]
//! kind = "in-place"      # cold | warm | in-place | default
//! stable_window_ms = 6000
//! min_scale = 1
//! park_cpu_mcpu = 1
//! active_cpu_mcpu = 1000
//! parked_pool = 1
//! scale_up_load = "idle"
//! # cold_start_ms / platform_overhead_ms default to the workload's calibration
//!
//! [workload]
//! name = "helloworld"    # catalog name, or give runtime_at_1000m_ms inline
//!
//! [driver]
//! mode = "closed-loop"   # or "poisson" with rate_rps and horizon_ms
//! vus = 1
//! iterations = 50
//! think_ms = 0
//! ```

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cpu::{MilliCpu, NodeSpec};
use crate::error::{Error, Result};
use crate::policy::{PolicyConfig, PolicyKind};
use crate::resize::{default_table, load_calibration, LoadState, ResizeLatencyTable};
use crate::workload::{lookup, ArrivalMode, ArrivalPlan, PlatformCosts, WorkloadSpec};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_VUS: u32 = 1;
pub const DEFAULT_ITERATIONS: u32 = 50;
/// Think time of the reference grid. Longer than the stable window, so every
/// Cold request launches an instance and every in-place request finds its
/// instance parked again.
pub const REFERENCE_THINK_MS: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CalibrationSource {
    Default,
    Path(PathBuf),
}

impl CalibrationSource {
    pub fn load(&self) -> Result<ResizeLatencyTable> {
        match self {
            CalibrationSource::Default => Ok(default_table()),
            CalibrationSource::Path(p) => {
                let f = File::open(p).map_err(|e| Error::io(p, e))?;
                load_calibration(f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub node: NodeSpec,
    pub policy: PolicyConfig,
    pub workload: WorkloadSpec,
    pub driver: ArrivalPlan,
    pub calibration: CalibrationSource,
    pub seed: u64,
    pub replications: u32,
}

impl ScenarioConfig {
    /// A catalog workload under `kind` with its calibrated platform costs and
    /// the default closed-loop driver.
    pub fn for_catalog(kind: PolicyKind, workload: &str) -> Result<Self> {
        let spec = lookup(workload)?;
        let costs = PlatformCosts::for_workload(workload).unwrap_or(PlatformCosts {
            platform_overhead_ms: 0.0,
            cold_start_ms: 0.0,
        });
        Ok(ScenarioConfig {
            node: NodeSpec::default(),
            policy: PolicyConfig::with_costs(kind, costs),
            driver: ArrivalPlan::closed_loop(workload, DEFAULT_VUS, DEFAULT_ITERATIONS, 0.0),
            workload: spec,
            calibration: CalibrationSource::Default,
            seed: DEFAULT_SEED,
            replications: 1,
        })
    }

    /// One sequential client sending [`DEFAULT_ITERATIONS`] requests spaced by
    /// [`REFERENCE_THINK_MS`].
    pub fn reference(kind: PolicyKind, workload: &str) -> Result<Self> {
        let mut c = Self::for_catalog(kind, workload)?;
        c.driver = ArrivalPlan::closed_loop(workload, 1, DEFAULT_ITERATIONS, REFERENCE_THINK_MS);
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate(&self.node)?;
        self.driver.validate()?;
        if self.driver.workload != self.workload.name {
            return Err(Error::validation(
                "driver.workload",
                format!(
                    "driver targets `{}` but the scenario workload is `{}`",
                    self.driver.workload, self.workload.name
                ),
            ));
        }
        if self.replications == 0 {
            return Err(Error::validation("replications", "must be at least 1"));
        }
        Ok(())
    }

    /// Provenance line for output headers.
    pub fn provenance(&self) -> String {
        format!(
            "seed={} policy={} workload={} replications={}",
            self.seed, self.policy.kind, self.workload.name, self.replications
        )
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_replications() -> u32 {
    1
}

fn default_calibration() -> String {
    "default".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    node: NodeDoc,
    policy: PolicyDoc,
    workload: WorkloadDoc,
    #[serde(default)]
    driver: Option<ArrivalMode>,
    #[serde(default = "default_calibration")]
    calibration: String,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_replications")]
    replications: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    capacity_mcpu: u32,
}

impl Default for NodeDoc {
    fn default() -> Self {
        NodeDoc {
            capacity_mcpu: NodeSpec::default().capacity.get(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDoc {
    kind: PolicyKind,
    stable_window_ms: Option<f64>,
    min_scale: Option<u32>,
    park_cpu_mcpu: Option<u32>,
    active_cpu_mcpu: Option<u32>,
    parked_pool: Option<u32>,
    cold_start_ms: Option<f64>,
    platform_overhead_ms: Option<f64>,
    scale_up_load: Option<LoadState>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadDoc {
    name: String,
    runtime_at_1000m_ms: Option<f64>,
    cpu_bound_fraction: Option<f64>,
}

fn mcpu(field: &str, v: u32) -> Result<MilliCpu> {
    MilliCpu::new(v).map_err(|e| Error::validation(field, e.to_string()))
}

/// Parses and validates a scenario, filling defaults.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| toml_format_error(text, &e))?;
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::validation(path, inner.message().to_string())
    })?;

    let node = NodeSpec::new(mcpu("node.capacity_mcpu", doc.node.capacity_mcpu)?)?;

    let workload = match doc.workload.runtime_at_1000m_ms {
        Some(runtime) => WorkloadSpec::with_fraction(
            doc.workload.name.clone(),
            runtime,
            doc.workload.cpu_bound_fraction.unwrap_or(1.0),
        )?,
        None => {
            let mut spec = lookup(&doc.workload.name)
                .map_err(|e| Error::validation("workload.name", e.to_string()))?;
            if let Some(f) = doc.workload.cpu_bound_fraction {
                spec = WorkloadSpec::with_fraction(spec.name, spec.runtime_at_1000m, f)?;
            }
            spec
        }
    };

    let p = doc.policy;
    let costs = PlatformCosts::for_workload(&workload.name).unwrap_or(PlatformCosts {
        platform_overhead_ms: 0.0,
        cold_start_ms: 0.0,
    });
    let mut policy = PolicyConfig::with_costs(p.kind, costs);
    if let Some(v) = p.stable_window_ms {
        policy.stable_window_ms = v;
    }
    if let Some(v) = p.min_scale {
        policy.min_scale = v;
    }
    if let Some(v) = p.park_cpu_mcpu {
        policy.park_cpu = mcpu("policy.park_cpu_mcpu", v)?;
    }
    if let Some(v) = p.active_cpu_mcpu {
        policy.active_cpu = mcpu("policy.active_cpu_mcpu", v)?;
    }
    if let Some(v) = p.parked_pool {
        policy.parked_pool = v;
    }
    if let Some(v) = p.cold_start_ms {
        policy.cold_start_ms = v;
    }
    if let Some(v) = p.platform_overhead_ms {
        policy.platform_overhead_ms = v;
    }
    if let Some(v) = p.scale_up_load {
        policy.scale_up_load = v;
    }

    let mode = doc.driver.unwrap_or(ArrivalMode::ClosedLoop {
        vus: DEFAULT_VUS,
        iterations: DEFAULT_ITERATIONS,
        think_ms: 0.0,
    });
    let calibration = match doc.calibration.as_str() {
        "default" => CalibrationSource::Default,
        path => CalibrationSource::Path(PathBuf::from(path)),
    };

    let config = ScenarioConfig {
        node,
        policy,
        driver: ArrivalPlan {
            mode,
            workload: workload.name.clone(),
        },
        workload,
        calibration,
        seed: doc.seed,
        replications: doc.replications,
    };
    config.validate()?;
    Ok(config)
}

/// Reads a scenario file. Relative calibration paths resolve against the
/// file's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_scenario(&text)?;
    if let CalibrationSource::Path(p) = &config.calibration {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                config.calibration = CalibrationSource::Path(dir.join(p));
            }
        }
    }
    Ok(config)
}

fn toml_format_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Format {
        line,
        message: e.message().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_warm_document() {
        let c = parse_scenario("[policy]\nkind = \"warm\"\n[workload]\nname = \"helloworld\"\n").unwrap();
        assert_eq!(c.policy.kind, PolicyKind::Warm);
        assert_eq!(c.policy.min_scale, 1);
        assert_eq!(c.policy.stable_window_ms, 6000.0);
        assert_eq!(c.policy.park_cpu.get(), 1);
        assert_eq!(c.policy.active_cpu.get(), 1000);
        assert_eq!((c.seed, c.replications), (42, 1));
        assert!((c.policy.platform_overhead_ms - 2.87 * 5.31).abs() < 1e-9);
        assert_eq!(c.node.capacity.get(), 8000);
        assert_eq!(
            c.driver.mode,
            ArrivalMode::ClosedLoop { vus: 1, iterations: 50, think_ms: 0.0 }
        );
    }

    #[test]
    fn park_not_below_active_is_rejected() {
        let doc = "[policy]\nkind = \"in-place\"\npark_cpu_mcpu = 1000\nactive_cpu_mcpu = 1000\n\
                   [workload]\nname = \"cpu\"\n";
        match parse_scenario(doc) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "policy.park_cpu_mcpu"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn explicit_stable_window_accepted() {
        let doc = "[policy]\nkind = \"cold\"\nstable_window_ms = 6000\n[workload]\nname = \"io\"\n";
        assert_eq!(parse_scenario(doc).unwrap().policy.stable_window_ms, 6000.0);
    }

    #[test]
    fn unknown_key_reports_path() {
        let doc = "[policy]\nkind = \"cold\"\nwindow = 3\n[workload]\nname = \"io\"\n";
        match parse_scenario(doc) {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "policy.window", "{message}");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_workload_rejected() {
        let doc = "[policy]\nkind = \"cold\"\n[workload]\nname = \"nope\"\n";
        assert!(matches!(
            parse_scenario(doc),
            Err(Error::Validation { field, .. }) if field == "workload.name"
        ));
    }

    #[test]
    fn inline_workload_and_poisson_driver() {
        let doc = "seed = 7\n[policy]\nkind = \"cold\"\ncold_start_ms = 500\n\
                   [workload]\nname = \"tiny\"\nruntime_at_1000m_ms = 12.5\n\
                   [driver]\nmode = \"poisson\"\nrate_rps = 3.0\nhorizon_ms = 10000\n";
        let c = parse_scenario(doc).unwrap();
        assert_eq!(c.workload.work.amount(), 12500.0);
        assert_eq!(c.policy.cold_start_ms, 500.0);
        assert_eq!(c.policy.platform_overhead_ms, 0.0);
        assert_eq!(c.driver.mode, ArrivalMode::Poisson { rate_rps: 3.0, horizon_ms: 10000.0 });
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn syntax_error_has_line() {
        let doc = "[policy]\nkind = \"cold\"\n[workload\nname = \"io\"\n";
        assert!(matches!(parse_scenario(doc), Err(Error::Format { line: 3, .. })));
    }

    #[test]
    fn default_policy_has_no_platform_costs() {
        let c = ScenarioConfig::for_catalog(PolicyKind::Default, "cpu").unwrap();
        assert_eq!(c.policy.platform_overhead_ms, 0.0);
        assert_eq!(c.policy.cold_start_ms, 0.0);
    }
}
