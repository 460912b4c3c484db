//! CPU quantities and proportional-share arithmetic.
//!
//! Rates are expressed in milliCPU: an instance running at 1000m completes
//! 1000 mCPU·ms of work per millisecond of virtual time. A workload measured
//! at `r` ms on one full CPU therefore carries `r * 1000` units of work.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer CPU quantity in milliCPU (1000m = one core). Always at least 1m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct MilliCpu(u32);

impl MilliCpu {
    pub const ONE_CPU: MilliCpu = MilliCpu(1000);
    pub const MIN: MilliCpu = MilliCpu(1);

    pub fn new(value: u32) -> Result<Self> {
        if value == 0 {
            return Err(Error::invalid("milliCPU value must be at least 1m"));
        }
        Ok(MilliCpu(value))
    }

    /// Panics on zero; for literals known to be valid.
    pub const fn m(value: u32) -> Self {
        assert!(value > 0, "milliCPU value must be at least 1m");
        MilliCpu(value)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<u32> for MilliCpu {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        MilliCpu::new(value)
    }
}

impl From<MilliCpu> for u32 {
    fn from(value: MilliCpu) -> u32 {
        value.0
    }
}

impl fmt::Display for MilliCpu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}m", self.0)
    }
}

/// CPU work in mCPU·ms.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct CpuWork(f64);

impl CpuWork {
    pub const ZERO: CpuWork = CpuWork(0.0);

    pub fn new(amount: f64) -> Result<Self> {
        if !amount.is_finite() || amount < 0.0 {
            return Err(Error::invalid(format!(
                "cpu work must be finite and non-negative, got {amount}"
            )));
        }
        Ok(CpuWork(amount))
    }

    /// Work needed to run for `runtime_ms` on one full CPU.
    pub fn from_runtime_at_one_cpu(runtime_ms: f64) -> Result<Self> {
        CpuWork::new(runtime_ms * MilliCpu::ONE_CPU.as_f64())
    }

    pub fn amount(self) -> f64 {
        self.0
    }

    pub fn is_done(self) -> bool {
        self.0 == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub capacity: MilliCpu,
}

impl NodeSpec {
    pub fn new(capacity: MilliCpu) -> Result<Self> {
        if capacity < MilliCpu::ONE_CPU {
            return Err(Error::validation(
                "node.capacity_mcpu",
                format!("node capacity must be at least 1000m, got {capacity}"),
            ));
        }
        Ok(NodeSpec { capacity })
    }
}

impl Default for NodeSpec {
    /// The 8-core node used in the reference experiments.
    fn default() -> Self {
        NodeSpec {
            capacity: MilliCpu(8000),
        }
    }
}

/// One claimant in a proportional-share allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claim {
    /// CFS weight (relative share under contention).
    pub weight: f64,
    /// Upper bound on the rate; `None` means the claimant will use whatever it gets.
    pub cap: Option<f64>,
}

/// Effective per-instance rates in milliCPU, index-aligned with the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub rates: Vec<f64>,
}

impl Allocation {
    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Water-filling over weighted, optionally capped claimants.
///
/// Capacity is split in proportion to weight; claimants whose share would
/// exceed their cap are pinned at the cap and the surplus is re-split among
/// the rest until no share exceeds a cap.
pub fn water_fill(claims: &[Claim], capacity: f64) -> Result<Allocation> {
    if claims.is_empty() {
        return Err(Error::invalid("allocation needs at least one claimant"));
    }
    if !(capacity >= 1.0) {
        return Err(Error::invalid(format!(
            "capacity must be at least 1m, got {capacity}"
        )));
    }
    for c in claims {
        if !(c.weight > 0.0) || c.cap.is_some_and(|cap| !(cap >= 0.0)) {
            return Err(Error::invalid(format!("invalid claim {c:?}")));
        }
    }

    let mut rates = vec![0.0; claims.len()];
    let mut pinned = vec![false; claims.len()];
    let mut remaining = capacity;
    loop {
        let weight_sum: f64 = claims
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(c, _)| c.weight)
            .sum();
        if weight_sum == 0.0 {
            break;
        }
        let round_capacity = remaining;
        let mut newly_pinned = false;
        for (i, c) in claims.iter().enumerate() {
            if pinned[i] {
                continue;
            }
            if let Some(cap) = c.cap {
                if round_capacity * c.weight / weight_sum >= cap {
                    rates[i] = cap;
                    pinned[i] = true;
                    remaining -= cap;
                    newly_pinned = true;
                }
            }
        }
        if !newly_pinned {
            for (i, c) in claims.iter().enumerate() {
                if !pinned[i] {
                    rates[i] = remaining * c.weight / weight_sum;
                }
            }
            break;
        }
    }
    Ok(Allocation { rates })
}

/// CFS allocation where each configured limit is both weight and hard cap.
pub fn cfs_allocate(limits: &[MilliCpu], capacity: MilliCpu) -> Result<Allocation> {
    let claims: Vec<Claim> = limits
        .iter()
        .map(|l| Claim {
            weight: l.as_f64(),
            cap: Some(l.as_f64()),
        })
        .collect();
    water_fill(&claims, capacity.as_f64())
}

/// Milliseconds needed to finish `work` at a constant `rate`.
pub fn task_duration_at(work: CpuWork, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::invalid(format!("rate must be positive, got {rate}")));
    }
    Ok(work.amount() / rate)
}

/// Work left after running at `rate` for `dt` ms.
pub fn advance_work(remaining: CpuWork, rate: f64, dt: f64) -> Result<CpuWork> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!(
            "elapsed time must be non-negative, got {dt}"
        )));
    }
    if !(rate >= 0.0) {
        return Err(Error::invalid(format!(
            "rate must be non-negative, got {rate}"
        )));
    }
    Ok(CpuWork((remaining.amount() - rate * dt).max(0.0)))
}

pub fn relative_latency(policy_mean: f64, default_mean: f64) -> Result<f64> {
    if !(default_mean > 0.0) {
        return Err(Error::invalid(format!(
            "baseline mean must be positive, got {default_mean}"
        )));
    }
    Ok(policy_mean / default_mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(v: u32) -> MilliCpu {
        MilliCpu::new(v).unwrap()
    }

    fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn millicpu_rejects_zero() {
        assert!(MilliCpu::new(0).is_err());
        assert_eq!(MilliCpu::new(1).unwrap().get(), 1);
    }

    #[test]
    fn node_capacity_floor() {
        assert!(NodeSpec::new(m(999)).is_err());
        assert_eq!(NodeSpec::default().capacity.get(), 8000);
    }

    #[test]
    fn unbounded_demanders_split_two_to_one() {
        let claims = [
            Claim { weight: 100.0, cap: None },
            Claim { weight: 50.0, cap: None },
        ];
        let a = water_fill(&claims, 3000.0).unwrap();
        assert!(rel_eq(a.rates[0], 2000.0, 1e-12));
        assert!(rel_eq(a.rates[1], 1000.0, 1e-12));
    }

    #[test]
    fn single_limit_below_capacity() {
        let a = cfs_allocate(&[m(1000)], m(8000)).unwrap();
        assert_eq!(a.rates, vec![1000.0]);
    }

    #[test]
    fn equal_limits_oversubscribed_split_equally() {
        let a = cfs_allocate(&[m(1000); 4], m(2000)).unwrap();
        assert_eq!(a.rates, vec![500.0; 4]);
    }

    #[test]
    fn surplus_from_capped_claimant_is_redistributed() {
        // weights 1:1:2 over 900 would give 225/225/450; cap the first at 100
        // and the 125 surplus goes 1:2 to the others.
        let claims = [
            Claim { weight: 1.0, cap: Some(100.0) },
            Claim { weight: 1.0, cap: None },
            Claim { weight: 2.0, cap: None },
        ];
        let a = water_fill(&claims, 900.0).unwrap();
        assert!(rel_eq(a.rates[0], 100.0, 1e-12));
        assert!(rel_eq(a.rates[1], 800.0 / 3.0, 1e-12));
        assert!(rel_eq(a.rates[2], 1600.0 / 3.0, 1e-12));
    }

    #[test]
    fn allocation_errors() {
        assert!(cfs_allocate(&[], m(1000)).is_err());
        let claims = [Claim { weight: 1.0, cap: None }];
        assert!(water_fill(&claims, 0.5).is_err());
    }

    #[test]
    fn duration_examples() {
        let hello = CpuWork::new(5310.0).unwrap();
        assert!(rel_eq(task_duration_at(hello, 1000.0).unwrap(), 5.31, 1e-12));
        assert_eq!(task_duration_at(CpuWork::ZERO, 7.0).unwrap(), 0.0);
        assert!(rel_eq(task_duration_at(hello, 1.0).unwrap(), 5310.0, 1e-12));
        assert!(task_duration_at(hello, 0.0).is_err());
        assert!(task_duration_at(hello, -1.0).is_err());
    }

    #[test]
    fn advance_examples() {
        let hello = CpuWork::new(5310.0).unwrap();
        assert_eq!(advance_work(hello, 1000.0, 5.31).unwrap().amount(), 0.0);
        assert_eq!(advance_work(hello, 0.0, 100.0).unwrap().amount(), 5310.0);
        let left = advance_work(hello, 1.0, 56.44).unwrap().amount();
        assert!(rel_eq(left, 5253.56, 1e-12));
        assert!(advance_work(hello, 1.0, -1.0).is_err());
    }

    #[test]
    fn relative_latency_examples() {
        let cold = relative_latency(286.99 * 5.31, 5.31).unwrap();
        assert!(rel_eq(cold, 286.99, 1e-12));
        assert_eq!(relative_latency(42.0, 42.0).unwrap(), 1.0);
        let warm = relative_latency(1.13 * 2465.18, 2465.18).unwrap();
        assert!(rel_eq(warm, 1.13, 1e-12));
        assert!(relative_latency(1.0, 0.0).is_err());
    }

    fn limits_strategy() -> impl Strategy<Value = Vec<u32>> {
        prop::collection::vec(1u32..5000, 1..12)
    }

    proptest! {
        #[test]
        fn total_is_min_of_demand_and_capacity(limits in limits_strategy(), cap in 1000u32..16000) {
            let limits: Vec<_> = limits.into_iter().map(m).collect();
            let a = cfs_allocate(&limits, m(cap)).unwrap();
            let demand: f64 = limits.iter().map(|l| l.as_f64()).sum();
            let expect = demand.min(f64::from(cap));
            prop_assert!(rel_eq(a.total(), expect, 1e-9));
            for (r, l) in a.rates.iter().zip(&limits) {
                prop_assert!(*r <= l.as_f64() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn permutation_equivariant(limits in limits_strategy(), cap in 1000u32..16000, rot in 0usize..12) {
            let limits: Vec<_> = limits.into_iter().map(m).collect();
            let k = rot % limits.len();
            let mut rotated = limits.clone();
            rotated.rotate_left(k);
            let a = cfs_allocate(&limits, m(cap)).unwrap();
            let b = cfs_allocate(&rotated, m(cap)).unwrap();
            let mut expect = a.rates.clone();
            expect.rotate_left(k);
            for (x, y) in expect.iter().zip(&b.rates) {
                prop_assert!(rel_eq(*x, *y, 1e-9));
            }
        }

        #[test]
        fn oversubscribed_identical_limits_scale_with_capacity(n in 2usize..10, limit in 1000u32..4000, cap in 1000u32..4000) {
            prop_assume!(n as u32 * limit > 2 * cap);
            let limits = vec![m(limit); n];
            let a = cfs_allocate(&limits, m(cap)).unwrap();
            let b = cfs_allocate(&limits, m(2 * cap)).unwrap();
            for (x, y) in a.rates.iter().zip(&b.rates) {
                prop_assert!(rel_eq(2.0 * x, *y, 1e-9));
            }
        }

        #[test]
        fn duration_drains_work(work in 0.0f64..1e9, rate in 1e-3f64..1e4) {
            let w = CpuWork::new(work).unwrap();
            let t = task_duration_at(w, rate).unwrap();
            let left = advance_work(w, rate, t).unwrap().amount();
            prop_assert!(left <= 1e-9 * work.max(1.0));
        }

        #[test]
        fn self_ratio_is_one(x in 1e-6f64..1e9) {
            prop_assert_eq!(relative_latency(x, x).unwrap(), 1.0);
        }
    }
}
