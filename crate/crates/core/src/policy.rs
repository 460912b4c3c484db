//! Cold, Warm, In-place and Default scheduling policies as state machines
//! over a fleet of single-concurrency function instances.
//!
//! Policy methods mutate instance phases directly and return the side effects
//! that need time or randomness (launch delays, resize latencies, timers) as
//! [`Action`]s for the simulator to carry out.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cpu::{MilliCpu, NodeSpec};
use crate::error::{Error, Result};
use crate::resize::LoadState;
use crate::workload::PlatformCosts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequestId(pub u64);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Cold,
    Warm,
    InPlace,
    /// Bare function with an always-ready instance and no platform overhead.
    Default,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Default,
        PolicyKind::Warm,
        PolicyKind::InPlace,
        PolicyKind::Cold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Cold => "cold",
            PolicyKind::Warm => "warm",
            PolicyKind::InPlace => "in-place",
            PolicyKind::Default => "default",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cold" => Ok(PolicyKind::Cold),
            "warm" => Ok(PolicyKind::Warm),
            "in-place" | "inplace" => Ok(PolicyKind::InPlace),
            "default" => Ok(PolicyKind::Default),
            other => Err(Error::invalid(format!("unknown policy `{other}`"))),
        }
    }
}

pub const DEFAULT_STABLE_WINDOW_MS: f64 = 6000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Idle time before a Cold/Warm instance may be scaled to zero.
    pub stable_window_ms: f64,
    /// Always-ready instances (Warm and Default).
    pub min_scale: u32,
    pub park_cpu: MilliCpu,
    pub active_cpu: MilliCpu,
    /// Instances parked at `park_cpu` when an In-place run starts.
    pub parked_pool: u32,
    pub cold_start_ms: f64,
    pub platform_overhead_ms: f64,
    /// Load state used to sample scale-up latency while a request runs.
    pub scale_up_load: LoadState,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig {
            kind,
            stable_window_ms: DEFAULT_STABLE_WINDOW_MS,
            min_scale: 1,
            park_cpu: MilliCpu::MIN,
            active_cpu: MilliCpu::ONE_CPU,
            parked_pool: 1,
            cold_start_ms: 0.0,
            platform_overhead_ms: 0.0,
            scale_up_load: LoadState::Idle,
        }
    }

    /// Defaults plus the workload's platform costs. Default keeps zero costs.
    pub fn with_costs(kind: PolicyKind, costs: PlatformCosts) -> Self {
        let mut cfg = PolicyConfig::new(kind);
        if kind != PolicyKind::Default {
            cfg.cold_start_ms = costs.cold_start_ms;
            cfg.platform_overhead_ms = costs.platform_overhead_ms;
        }
        cfg
    }

    pub fn validate(&self, node: &NodeSpec) -> Result<()> {
        if self.park_cpu >= self.active_cpu {
            return Err(Error::validation(
                "policy.park_cpu_mcpu",
                format!(
                    "park cpu {} must be below active cpu {}",
                    self.park_cpu, self.active_cpu
                ),
            ));
        }
        if self.active_cpu > node.capacity {
            return Err(Error::validation(
                "policy.active_cpu_mcpu",
                format!("{} exceeds node capacity {}", self.active_cpu, node.capacity),
            ));
        }
        if !(self.stable_window_ms > 0.0) || !self.stable_window_ms.is_finite() {
            return Err(Error::validation(
                "policy.stable_window_ms",
                format!("must be positive, got {}", self.stable_window_ms),
            ));
        }
        for (field, v) in [
            ("policy.cold_start_ms", self.cold_start_ms),
            ("policy.platform_overhead_ms", self.platform_overhead_ms),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(field, format!("must be non-negative, got {v}")));
            }
        }
        match self.kind {
            PolicyKind::Warm | PolicyKind::Default => {
                if self.min_scale == 0 {
                    return Err(Error::validation("policy.min_scale", "must be at least 1"));
                }
                if u64::from(self.min_scale) * u64::from(self.active_cpu.get())
                    > u64::from(node.capacity.get())
                {
                    return Err(Error::validation(
                        "policy.min_scale",
                        format!(
                            "{} instances at {} do not fit on a {} node",
                            self.min_scale, self.active_cpu, node.capacity
                        ),
                    ));
                }
            }
            PolicyKind::InPlace => {
                if u64::from(self.parked_pool) * u64::from(self.park_cpu.get())
                    > u64::from(node.capacity.get())
                {
                    return Err(Error::validation(
                        "policy.parked_pool",
                        "parked pool does not fit on the node",
                    ));
                }
            }
            PolicyKind::Cold => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Launching,
    Idle,
    Busy,
    ScalingUp,
    Parked,
    ScalingDown,
    Terminated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceState {
    pub id: InstanceId,
    pub phase: Phase,
    /// Limit currently visible to the container.
    pub current_cpu: MilliCpu,
    pub pending_target: Option<MilliCpu>,
    pub idle_deadline: Option<f64>,
    pub bound_request: Option<RequestId>,
    /// Request waiting for this instance to finish launching.
    pub reserved_for: Option<RequestId>,
}

impl InstanceState {
    fn new(id: InstanceId, phase: Phase, cpu: MilliCpu) -> Self {
        InstanceState {
            id,
            phase,
            current_cpu: cpu,
            pending_target: None,
            idle_deadline: None,
            bound_request: None,
            reserved_for: None,
        }
    }

    pub fn is_live(&self) -> bool {
        self.phase != Phase::Terminated
    }

    /// Checks the per-phase field invariants.
    pub fn check(&self, policy: &PolicyConfig) -> Result<()> {
        let scaling = matches!(self.phase, Phase::ScalingUp | Phase::ScalingDown);
        let serving = matches!(self.phase, Phase::Busy | Phase::ScalingUp);
        let bad = |what: &str| Err(Error::Protocol(format!("{}: {what} ({:?})", self.id, self.phase)));
        if scaling != self.pending_target.is_some() {
            return bad("pending target present iff scaling");
        }
        if serving != self.bound_request.is_some() {
            return bad("bound request present iff busy or scaling up");
        }
        if self.phase == Phase::Parked && self.current_cpu != policy.park_cpu {
            return bad("parked instance not at park cpu");
        }
        if self.phase == Phase::Idle && self.current_cpu != policy.active_cpu {
            return bad("idle instance not at active cpu");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fleet {
    instances: Vec<InstanceState>,
}

impl Fleet {
    pub fn get(&self, id: InstanceId) -> Option<&InstanceState> {
        self.instances.get(id.0 as usize)
    }

    fn slot(&mut self, id: InstanceId) -> Result<&mut InstanceState> {
        self.instances
            .get_mut(id.0 as usize)
            .ok_or_else(|| Error::Protocol(format!("unknown instance {id}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &InstanceState> {
        self.instances.iter()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.instances.iter().filter(|i| i.is_live()).count()
    }

    /// CPU reserved on the node: the larger of current and pending limits.
    pub fn committed_cpu(&self) -> u64 {
        self.instances
            .iter()
            .filter(|i| i.is_live())
            .map(|i| u64::from(i.current_cpu.max(i.pending_target.unwrap_or(i.current_cpu)).get()))
            .sum()
    }

    fn add(&mut self, phase: Phase, cpu: MilliCpu) -> InstanceId {
        let id = InstanceId(self.instances.len() as u32);
        self.instances.push(InstanceState::new(id, phase, cpu));
        id
    }

    fn first_in(&self, phase: Phase) -> Option<InstanceId> {
        self.instances.iter().find(|i| i.phase == phase).map(|i| i.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    LaunchInstance(InstanceId),
    /// Bind a request to an instance. For a launching instance the route takes
    /// effect once it is ready.
    RouteTo {
        instance: InstanceId,
        request: RequestId,
    },
    DispatchResize {
        instance: InstanceId,
        target: MilliCpu,
    },
    ScheduleIdleExpiry {
        instance: InstanceId,
        at: f64,
    },
    Terminate(InstanceId),
    Enqueue(RequestId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyNote {
    CapacityExhausted { request: RequestId },
    StaleEvent { instance: InstanceId, event: &'static str },
    CancelledTimer { instance: InstanceId },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyDecision {
    pub actions: Vec<Action>,
    pub notes: Vec<PolicyNote>,
}

impl PolicyDecision {
    fn of(actions: Vec<Action>) -> Self {
        PolicyDecision {
            actions,
            notes: Vec::new(),
        }
    }

    fn note(note: PolicyNote) -> Self {
        PolicyDecision {
            actions: Vec::new(),
            notes: vec![note],
        }
    }

    pub fn is_enqueue(&self) -> bool {
        self.actions.iter().any(|a| matches!(a, Action::Enqueue(_)))
    }
}

#[derive(Debug, Clone)]
pub struct Policy {
    config: PolicyConfig,
    node: NodeSpec,
}

impl Policy {
    pub fn new(config: PolicyConfig, node: NodeSpec) -> Result<Self> {
        config.validate(&node)?;
        Ok(Policy { config, node })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// Instances present before the first request.
    pub fn initial_fleet(&self) -> Fleet {
        let mut fleet = Fleet::default();
        match self.config.kind {
            PolicyKind::Warm | PolicyKind::Default => {
                for _ in 0..self.config.min_scale {
                    fleet.add(Phase::Idle, self.config.active_cpu);
                }
            }
            PolicyKind::InPlace => {
                for _ in 0..self.config.parked_pool {
                    fleet.add(Phase::Parked, self.config.park_cpu);
                }
            }
            PolicyKind::Cold => {}
        }
        fleet
    }

    fn try_launch(&self, fleet: &mut Fleet, request: RequestId) -> PolicyDecision {
        let needed = u64::from(self.config.active_cpu.get());
        if fleet.committed_cpu() + needed > u64::from(self.node.capacity.get()) {
            return PolicyDecision {
                actions: vec![Action::Enqueue(request)],
                notes: vec![PolicyNote::CapacityExhausted { request }],
            };
        }
        let id = fleet.add(Phase::Launching, self.config.active_cpu);
        fleet.instances[id.0 as usize].reserved_for = Some(request);
        PolicyDecision::of(vec![
            Action::LaunchInstance(id),
            Action::RouteTo {
                instance: id,
                request,
            },
        ])
    }

    pub fn on_arrival(&self, fleet: &mut Fleet, request: RequestId, _now: f64) -> PolicyDecision {
        match self.config.kind {
            PolicyKind::Cold | PolicyKind::Warm | PolicyKind::Default => {
                if let Some(id) = fleet.first_in(Phase::Idle) {
                    let inst = &mut fleet.instances[id.0 as usize];
                    inst.phase = Phase::Busy;
                    inst.bound_request = Some(request);
                    inst.idle_deadline = None;
                    return PolicyDecision::of(vec![Action::RouteTo {
                        instance: id,
                        request,
                    }]);
                }
                if self.config.kind == PolicyKind::Cold {
                    self.try_launch(fleet, request)
                } else {
                    PolicyDecision::of(vec![Action::Enqueue(request)])
                }
            }
            PolicyKind::InPlace => {
                if let Some(id) = fleet.first_in(Phase::Parked) {
                    let target = self.config.active_cpu;
                    let inst = &mut fleet.instances[id.0 as usize];
                    inst.phase = Phase::ScalingUp;
                    inst.pending_target = Some(target);
                    inst.bound_request = Some(request);
                    // Routing does not wait for the resize to land.
                    return PolicyDecision::of(vec![
                        Action::DispatchResize {
                            instance: id,
                            target,
                        },
                        Action::RouteTo {
                            instance: id,
                            request,
                        },
                    ]);
                }
                self.try_launch(fleet, request)
            }
        }
    }

    pub fn on_instance_ready(
        &self,
        fleet: &mut Fleet,
        instance: InstanceId,
        now: f64,
    ) -> Result<PolicyDecision> {
        let inst = fleet.slot(instance)?;
        if inst.phase != Phase::Launching {
            return Err(Error::Protocol(format!(
                "{instance} became ready while {:?}",
                inst.phase
            )));
        }
        match inst.reserved_for.take() {
            Some(request) => {
                inst.phase = Phase::Busy;
                inst.bound_request = Some(request);
                Ok(PolicyDecision::of(vec![Action::RouteTo { instance, request }]))
            }
            None => {
                inst.phase = Phase::Idle;
                let at = now + self.config.stable_window_ms;
                inst.idle_deadline = Some(at);
                Ok(PolicyDecision::of(vec![Action::ScheduleIdleExpiry { instance, at }]))
            }
        }
    }

    pub fn on_resize_applied(
        &self,
        fleet: &mut Fleet,
        instance: InstanceId,
        _now: f64,
    ) -> Result<PolicyDecision> {
        let park = self.config.park_cpu;
        let inst = fleet.slot(instance)?;
        match inst.phase {
            Phase::ScalingUp => {
                inst.current_cpu = inst.pending_target.take().unwrap_or(inst.current_cpu);
                inst.phase = Phase::Busy;
            }
            Phase::ScalingDown => {
                inst.pending_target = None;
                inst.current_cpu = park;
                inst.phase = Phase::Parked;
            }
            _ => {
                return Ok(PolicyDecision::note(PolicyNote::StaleEvent {
                    instance,
                    event: "resize-applied",
                }))
            }
        }
        Ok(PolicyDecision::default())
    }

    pub fn on_exec_complete(
        &self,
        fleet: &mut Fleet,
        instance: InstanceId,
        now: f64,
    ) -> Result<PolicyDecision> {
        let cfg = self.config;
        let inst = fleet.slot(instance)?;
        if !matches!(inst.phase, Phase::Busy | Phase::ScalingUp) || inst.bound_request.is_none() {
            return Err(Error::Protocol(format!(
                "completion on {instance} with no bound request ({:?})",
                inst.phase
            )));
        }
        inst.bound_request = None;
        match cfg.kind {
            PolicyKind::InPlace => {
                // An unfinished scale-up is superseded by the scale-down.
                inst.phase = Phase::ScalingDown;
                inst.pending_target = Some(cfg.park_cpu);
                Ok(PolicyDecision::of(vec![Action::DispatchResize {
                    instance,
                    target: cfg.park_cpu,
                }]))
            }
            PolicyKind::Default => {
                inst.phase = Phase::Idle;
                Ok(PolicyDecision::default())
            }
            PolicyKind::Cold | PolicyKind::Warm => {
                inst.phase = Phase::Idle;
                let at = now + cfg.stable_window_ms;
                inst.idle_deadline = Some(at);
                Ok(PolicyDecision::of(vec![Action::ScheduleIdleExpiry { instance, at }]))
            }
        }
    }

    /// `deadline` is the expiry time the timer was armed with.
    pub fn on_idle_expiry(
        &self,
        fleet: &mut Fleet,
        instance: InstanceId,
        deadline: f64,
    ) -> Result<PolicyDecision> {
        let live = fleet.live_count();
        let cfg = self.config;
        let inst = fleet.slot(instance)?;
        if inst.phase != Phase::Idle || inst.idle_deadline != Some(deadline) {
            return Ok(PolicyDecision::note(PolicyNote::CancelledTimer { instance }));
        }
        inst.idle_deadline = None;
        let retain = match cfg.kind {
            PolicyKind::Cold => false,
            PolicyKind::Warm | PolicyKind::Default => live <= cfg.min_scale as usize,
            PolicyKind::InPlace => true,
        };
        if retain {
            return Ok(PolicyDecision::default());
        }
        inst.phase = Phase::Terminated;
        Ok(PolicyDecision::of(vec![Action::Terminate(instance)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(kind: PolicyKind) -> Policy {
        Policy::new(PolicyConfig::new(kind), NodeSpec::default()).unwrap()
    }

    const R0: RequestId = RequestId(0);
    const R1: RequestId = RequestId(1);

    #[test]
    fn cold_empty_fleet_launches_then_routes() {
        let p = policy(PolicyKind::Cold);
        let mut fleet = p.initial_fleet();
        assert!(fleet.is_empty());
        let d = p.on_arrival(&mut fleet, R0, 0.0);
        let id = InstanceId(0);
        assert_eq!(
            d.actions,
            vec![Action::LaunchInstance(id), Action::RouteTo { instance: id, request: R0 }]
        );
        assert_eq!(fleet.get(id).unwrap().phase, Phase::Launching);
        let ready = p.on_instance_ready(&mut fleet, id, 1500.0).unwrap();
        assert_eq!(ready.actions, vec![Action::RouteTo { instance: id, request: R0 }]);
        assert_eq!(fleet.get(id).unwrap().phase, Phase::Busy);
    }

    #[test]
    fn warm_hit_routes_without_launch() {
        let p = policy(PolicyKind::Warm);
        let mut fleet = p.initial_fleet();
        let d = p.on_arrival(&mut fleet, R0, 0.0);
        assert_eq!(d.actions, vec![Action::RouteTo { instance: InstanceId(0), request: R0 }]);
        // Second concurrent request queues; warm never launches.
        let d = p.on_arrival(&mut fleet, R1, 0.0);
        assert_eq!(d.actions, vec![Action::Enqueue(R1)]);
        assert_eq!(fleet.len(), 1);
    }

    #[test]
    fn in_place_dispatches_resize_and_routes_immediately() {
        let p = policy(PolicyKind::InPlace);
        let mut fleet = p.initial_fleet();
        let id = InstanceId(0);
        assert_eq!(fleet.get(id).unwrap().current_cpu, MilliCpu::MIN);
        let d = p.on_arrival(&mut fleet, R0, 0.0);
        assert_eq!(
            d.actions,
            vec![
                Action::DispatchResize { instance: id, target: MilliCpu::ONE_CPU },
                Action::RouteTo { instance: id, request: R0 },
            ]
        );
        let inst = fleet.get(id).unwrap();
        assert_eq!(inst.phase, Phase::ScalingUp);
        inst.check(p.config()).unwrap();
    }

    #[test]
    fn resize_applied_transitions() {
        let p = policy(PolicyKind::InPlace);
        let mut fleet = p.initial_fleet();
        let id = InstanceId(0);
        p.on_arrival(&mut fleet, R0, 0.0);
        p.on_resize_applied(&mut fleet, id, 56.0).unwrap();
        let inst = fleet.get(id).unwrap();
        assert_eq!((inst.phase, inst.current_cpu), (Phase::Busy, MilliCpu::ONE_CPU));
        inst.check(p.config()).unwrap();

        let d = p.on_exec_complete(&mut fleet, id, 70.0).unwrap();
        assert_eq!(d.actions, vec![Action::DispatchResize { instance: id, target: MilliCpu::MIN }]);
        assert_eq!(fleet.get(id).unwrap().phase, Phase::ScalingDown);
        p.on_resize_applied(&mut fleet, id, 200.0).unwrap();
        let inst = fleet.get(id).unwrap();
        assert_eq!((inst.phase, inst.current_cpu), (Phase::Parked, MilliCpu::MIN));
        inst.check(p.config()).unwrap();
    }

    #[test]
    fn resize_applied_after_terminate_is_stale() {
        let p = policy(PolicyKind::Cold);
        let mut fleet = p.initial_fleet();
        p.on_arrival(&mut fleet, R0, 0.0);
        let id = InstanceId(0);
        p.on_instance_ready(&mut fleet, id, 10.0).unwrap();
        p.on_exec_complete(&mut fleet, id, 20.0).unwrap();
        p.on_idle_expiry(&mut fleet, id, 6020.0).unwrap();
        let before = fleet.clone();
        let d = p.on_resize_applied(&mut fleet, id, 7000.0).unwrap();
        assert_eq!(fleet, before);
        assert_eq!(d.notes, vec![PolicyNote::StaleEvent { instance: id, event: "resize-applied" }]);
    }

    #[test]
    fn cold_completion_arms_stable_window() {
        let p = policy(PolicyKind::Cold);
        let mut fleet = p.initial_fleet();
        let id = InstanceId(0);
        p.on_arrival(&mut fleet, R0, 0.0);
        p.on_instance_ready(&mut fleet, id, 1.0).unwrap();
        let d = p.on_exec_complete(&mut fleet, id, 100.0).unwrap();
        assert_eq!(d.actions, vec![Action::ScheduleIdleExpiry { instance: id, at: 6100.0 }]);
        let d = p.on_idle_expiry(&mut fleet, id, 6100.0).unwrap();
        assert_eq!(d.actions, vec![Action::Terminate(id)]);
        assert_eq!(fleet.get(id).unwrap().phase, Phase::Terminated);
    }

    #[test]
    fn warm_sole_instance_is_retained() {
        let p = policy(PolicyKind::Warm);
        let mut fleet = p.initial_fleet();
        let id = InstanceId(0);
        p.on_arrival(&mut fleet, R0, 0.0);
        p.on_exec_complete(&mut fleet, id, 10.0).unwrap();
        let d = p.on_idle_expiry(&mut fleet, id, 6010.0).unwrap();
        assert!(d.actions.is_empty());
        assert_eq!(fleet.get(id).unwrap().phase, Phase::Idle);
    }

    #[test]
    fn expiry_after_reuse_is_cancelled() {
        let p = policy(PolicyKind::Cold);
        let mut fleet = p.initial_fleet();
        let id = InstanceId(0);
        p.on_arrival(&mut fleet, R0, 0.0);
        p.on_instance_ready(&mut fleet, id, 1.0).unwrap();
        p.on_exec_complete(&mut fleet, id, 10.0).unwrap();
        p.on_arrival(&mut fleet, R1, 20.0);
        assert_eq!(fleet.get(id).unwrap().phase, Phase::Busy);
        let d = p.on_idle_expiry(&mut fleet, id, 6010.0).unwrap();
        assert!(d.actions.is_empty());
        assert_eq!(d.notes, vec![PolicyNote::CancelledTimer { instance: id }]);
        assert_eq!(fleet.get(id).unwrap().phase, Phase::Busy);
    }

    #[test]
    fn completion_without_request_is_protocol_error() {
        let p = policy(PolicyKind::Warm);
        let mut fleet = p.initial_fleet();
        assert!(matches!(
            p.on_exec_complete(&mut fleet, InstanceId(0), 0.0),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn cold_launch_blocked_by_capacity() {
        let node = NodeSpec::new(MilliCpu::m(2000)).unwrap();
        let p = Policy::new(PolicyConfig::new(PolicyKind::Cold), node).unwrap();
        let mut fleet = p.initial_fleet();
        p.on_arrival(&mut fleet, RequestId(0), 0.0);
        p.on_arrival(&mut fleet, RequestId(1), 0.0);
        let d = p.on_arrival(&mut fleet, RequestId(2), 0.0);
        assert!(d.is_enqueue());
        assert_eq!(d.notes, vec![PolicyNote::CapacityExhausted { request: RequestId(2) }]);
        assert_eq!(fleet.len(), 2);
    }

    #[test]
    fn in_place_falls_back_to_cold_launch_when_pool_empty() {
        let p = policy(PolicyKind::InPlace);
        let mut fleet = p.initial_fleet();
        p.on_arrival(&mut fleet, R0, 0.0);
        let d = p.on_arrival(&mut fleet, R1, 0.0);
        assert_eq!(d.actions[0], Action::LaunchInstance(InstanceId(1)));
    }

    #[test]
    fn config_validation() {
        let node = NodeSpec::default();
        let mut c = PolicyConfig::new(PolicyKind::InPlace);
        c.park_cpu = MilliCpu::m(1000);
        assert!(matches!(c.validate(&node), Err(Error::Validation { .. })));
        let mut c = PolicyConfig::new(PolicyKind::Warm);
        c.min_scale = 0;
        assert!(c.validate(&node).is_err());
        let mut c = PolicyConfig::new(PolicyKind::Cold);
        c.stable_window_ms = 0.0;
        assert!(c.validate(&node).is_err());
    }
}
