//! Fixtures shared by the benchmarks.

use warmslice::policy::PolicyKind;
use warmslice::scenario::ScenarioConfig;
use warmslice::workload::ArrivalPlan;

/// A busy node: `vus` clients hammering `workload` with no think time.
pub fn contended(kind: PolicyKind, workload: &str, vus: u32, iterations: u32) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::for_catalog(kind, workload).expect("catalog workload");
    cfg.policy.parked_pool = vus;
    cfg.policy.min_scale = vus.min(8);
    cfg.driver = ArrivalPlan::closed_loop(workload, vus, iterations, 0.0);
    cfg
}

/// Open-loop arrivals at `rate_rps` for ten simulated minutes.
pub fn poisson(kind: PolicyKind, workload: &str, rate_rps: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::for_catalog(kind, workload).expect("catalog workload");
    cfg.driver = ArrivalPlan::poisson(workload, rate_rps, 600_000.0);
    cfg
}
