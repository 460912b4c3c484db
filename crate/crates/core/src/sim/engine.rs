//! Discrete-event engine.
//!
//! CPU progress is integrated exactly: rates are piecewise constant between
//! events, every event first advances all running work to its timestamp, and
//! completion events are re-issued whenever an instance's rate changes.
//! Superseded completion and resize events are recognized by generation
//! counters and dropped when popped.

use std::collections::{HashSet, VecDeque};

use rand_distr::{Distribution, Exp};

use crate::cpu::{advance_work, cfs_allocate, task_duration_at, CpuWork};
use crate::error::{Error, Result};
use crate::policy::{
    Action, Fleet, InstanceId, Phase, Policy, PolicyDecision, PolicyNote, RequestId,
};
use crate::resize::{sample_resize_latency, LatencySampler, LoadState, ResizeLatencyTable};
use crate::rng::{substream, ARRIVAL_STREAM};
use crate::scenario::ScenarioConfig;
use crate::sim::event::{EventKind, EventQueue};
use crate::sim::trace::TraceRecord;
use crate::workload::ArrivalMode;

/// A stretch of constant-rate execution of one request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSegment {
    pub start_ms: f64,
    pub end_ms: f64,
    /// milliCPU
    pub rate: f64,
}

impl RateSegment {
    pub fn work(&self) -> f64 {
        self.rate * (self.end_ms - self.start_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimNote {
    pub at_ms: f64,
    pub note: PolicyNote,
}

/// Everything a run produces. `records[i]` and `segments[i]` describe the same request.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimRun {
    pub records: Vec<TraceRecord>,
    pub segments: Vec<Vec<RateSegment>>,
    pub notes: Vec<SimNote>,
    /// Total allocated rate after every reallocation, as `(time, milliCPU)`.
    pub allocation_log: Vec<(f64, f64)>,
    pub launches: usize,
}

impl SimRun {
    pub fn extend(&mut self, other: SimRun) {
        self.records.extend(other.records);
        self.segments.extend(other.segments);
        self.notes.extend(other.notes);
        self.allocation_log.extend(other.allocation_log);
        self.launches += other.launches;
    }

    pub fn cold_starts(&self) -> usize {
        self.records.iter().filter(|r| r.cold_start).count()
    }
}

#[derive(Debug, Clone, Default)]
struct Runtime {
    /// CPU-bound part in progress.
    executing: bool,
    /// Fixed tail in progress (CPU part done).
    in_tail: bool,
    remaining: CpuWork,
    rate: f64,
    /// `rate` has a matching completion event in the queue.
    scheduled: bool,
    last_update: f64,
    exec_gen: u64,
    resize_gen: u64,
}

struct RequestSlot {
    record: TraceRecord,
    vu: Option<u32>,
    segments: Vec<RateSegment>,
}

struct Engine<'a> {
    config: &'a ScenarioConfig,
    table: &'a ResizeLatencyTable,
    policy: Policy,
    now: f64,
    events: EventQueue,
    fleet: Fleet,
    runtimes: Vec<Runtime>,
    requests: Vec<RequestSlot>,
    id_offset: u64,
    waiting: VecDeque<RequestId>,
    capacity_noted: HashSet<RequestId>,
    sampler: LatencySampler,
    vu_remaining: Vec<u32>,
    think_ms: f64,
    notes: Vec<SimNote>,
    allocation_log: Vec<(f64, f64)>,
    launches: usize,
}

/// Runs every replication of a scenario. Replication `r` uses seed `seed + r`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimRun> {
    config.validate()?;
    let table = config.calibration.load()?;
    run_with_table(config, &table)
}

pub fn run_with_table(config: &ScenarioConfig, table: &ResizeLatencyTable) -> Result<SimRun> {
    config.validate()?;
    let mut all = SimRun::default();
    for r in 0..config.replications {
        let seed = config.seed.wrapping_add(u64::from(r));
        let offset = all.records.len() as u64;
        all.extend(simulate_once(config, table, seed, offset)?);
    }
    Ok(all)
}

/// One replication with an explicit seed; request ids start at `id_offset`.
pub fn simulate_once(
    config: &ScenarioConfig,
    table: &ResizeLatencyTable,
    seed: u64,
    id_offset: u64,
) -> Result<SimRun> {
    let policy = Policy::new(config.policy, config.node)?;
    let fleet = policy.initial_fleet();
    let runtimes = vec![Runtime::default(); fleet.len()];
    let mut engine = Engine {
        config,
        table,
        policy,
        now: 0.0,
        events: EventQueue::default(),
        fleet,
        runtimes,
        requests: Vec::new(),
        id_offset,
        waiting: VecDeque::new(),
        capacity_noted: HashSet::new(),
        sampler: LatencySampler::new(seed),
        vu_remaining: Vec::new(),
        think_ms: 0.0,
        notes: Vec::new(),
        allocation_log: Vec::new(),
        launches: 0,
    };
    engine.start_driver(seed);
    engine.run()
}

impl<'a> Engine<'a> {
    fn start_driver(&mut self, seed: u64) {
        match self.config.driver.mode {
            ArrivalMode::ClosedLoop {
                vus,
                iterations,
                think_ms,
            } => {
                self.think_ms = think_ms;
                self.vu_remaining = vec![iterations; vus as usize];
                for vu in 0..vus {
                    self.send(0.0, Some(vu));
                }
            }
            ArrivalMode::Poisson {
                rate_rps,
                horizon_ms,
            } => {
                let mut rng = substream(seed, ARRIVAL_STREAM);
                let gap = Exp::new(rate_rps / 1000.0).expect("validated positive rate");
                let mut t = 0.0;
                loop {
                    t += gap.sample(&mut rng);
                    if t >= horizon_ms {
                        break;
                    }
                    self.send(t, None);
                }
            }
        }
    }

    /// A client sends a request at `at`; it reaches the scheduler after the
    /// platform overhead.
    fn send(&mut self, at: f64, vu: Option<u32>) {
        if let Some(v) = vu {
            let left = &mut self.vu_remaining[v as usize];
            if *left == 0 {
                return;
            }
            *left -= 1;
        }
        let id = RequestId(self.id_offset + self.requests.len() as u64);
        self.requests.push(RequestSlot {
            record: TraceRecord::new(id, &self.config.workload.name, self.config.policy.kind, at),
            vu,
            segments: Vec::new(),
        });
        self.events
            .push(at + self.config.policy.platform_overhead_ms, EventKind::Arrival(id));
    }

    fn slot(&mut self, id: RequestId) -> &mut RequestSlot {
        &mut self.requests[(id.0 - self.id_offset) as usize]
    }

    fn run(mut self) -> Result<SimRun> {
        while let Some(ev) = self.events.pop() {
            if ev.at < self.now {
                return Err(Error::Protocol(format!(
                    "event at {} precedes clock {}",
                    ev.at, self.now
                )));
            }
            self.advance_all(ev.at)?;
            self.now = ev.at;
            match ev.kind {
                EventKind::Arrival(req) => self.waiting.push_back(req),
                EventKind::InstanceReady(inst) => {
                    let d = self.policy.on_instance_ready(&mut self.fleet, inst, self.now)?;
                    self.apply(d, true)?;
                }
                EventKind::ResizeApplied {
                    instance,
                    generation,
                } => self.on_resize_applied(instance, generation)?,
                EventKind::ExecComplete {
                    instance,
                    generation,
                } => self.on_exec_complete(instance, generation)?,
                EventKind::IdleExpiry { instance, deadline } => {
                    let d = self.policy.on_idle_expiry(&mut self.fleet, instance, deadline)?;
                    self.apply(d, false)?;
                }
            }
            self.drain_waiting()?;
            self.reallocate()?;
        }
        self.finish()
    }

    fn finish(self) -> Result<SimRun> {
        if let Some(open) = self.requests.iter().find(|r| !r.record.is_complete()) {
            return Err(Error::Protocol(format!(
                "request {} never completed",
                open.record.request_id
            )));
        }
        let (records, segments) = self
            .requests
            .into_iter()
            .map(|r| (r.record, r.segments))
            .unzip();
        Ok(SimRun {
            records,
            segments,
            notes: self.notes,
            allocation_log: self.allocation_log,
            launches: self.launches,
        })
    }

    /// Integrates running work up to `t` at the current rates.
    fn advance_all(&mut self, t: f64) -> Result<()> {
        for i in 0..self.runtimes.len() {
            let rt = &self.runtimes[i];
            if !rt.executing || t <= rt.last_update {
                continue;
            }
            let (start, rate) = (rt.last_update, rt.rate);
            let remaining = advance_work(rt.remaining, rate, t - start)?;
            let rt = &mut self.runtimes[i];
            rt.remaining = remaining;
            rt.last_update = t;
            if let Some(req) = self.fleet.get(InstanceId(i as u32)).and_then(|s| s.bound_request) {
                self.slot(req).segments.push(RateSegment {
                    start_ms: start,
                    end_ms: t,
                    rate,
                });
            }
        }
        Ok(())
    }

    /// Recomputes CFS rates over running instances and re-issues completion
    /// events for every instance whose rate changed.
    fn reallocate(&mut self) -> Result<()> {
        let running: Vec<usize> = (0..self.runtimes.len())
            .filter(|&i| self.runtimes[i].executing)
            .collect();
        if running.is_empty() {
            self.allocation_log.push((self.now, 0.0));
            return Ok(());
        }
        let limits: Vec<_> = running
            .iter()
            .map(|&i| self.fleet.get(InstanceId(i as u32)).expect("runtime has instance").current_cpu)
            .collect();
        let alloc = cfs_allocate(&limits, self.config.node.capacity)?;
        for (&i, &rate) in running.iter().zip(&alloc.rates) {
            let rt = &mut self.runtimes[i];
            if rt.scheduled && rt.rate == rate {
                continue;
            }
            rt.rate = rate;
            rt.scheduled = true;
            rt.exec_gen += 1;
            let at = self.now + task_duration_at(rt.remaining, rate)?;
            self.events.push(
                at,
                EventKind::ExecComplete {
                    instance: InstanceId(i as u32),
                    generation: rt.exec_gen,
                },
            );
        }
        self.allocation_log.push((self.now, alloc.total()));
        Ok(())
    }

    fn drain_waiting(&mut self) -> Result<()> {
        while let Some(req) = self.waiting.pop_front() {
            let mut d = self.policy.on_arrival(&mut self.fleet, req, self.now);
            if d.is_enqueue() {
                self.waiting.push_front(req);
                if self.capacity_noted.insert(req) {
                    self.record_notes(&d.notes);
                }
                break;
            }
            self.record_notes(&std::mem::take(&mut d.notes));
            self.apply(d, false)?;
        }
        Ok(())
    }

    fn record_notes(&mut self, notes: &[PolicyNote]) {
        let at_ms = self.now;
        self.notes
            .extend(notes.iter().map(|&note| SimNote { at_ms, note }));
    }

    fn apply(&mut self, decision: PolicyDecision, via_launch: bool) -> Result<()> {
        self.record_notes(&decision.notes);
        for action in decision.actions {
            match action {
                Action::LaunchInstance(id) => {
                    if self.runtimes.len() <= id.0 as usize {
                        self.runtimes.resize(id.0 as usize + 1, Runtime::default());
                    }
                    self.launches += 1;
                    self.events.push(
                        self.now + self.config.policy.cold_start_ms,
                        EventKind::InstanceReady(id),
                    );
                }
                Action::RouteTo { instance, request } => {
                    let phase = self.fleet.get(instance).map(|s| s.phase);
                    if phase != Some(Phase::Launching) {
                        self.start_exec(instance, request, via_launch);
                    }
                }
                Action::DispatchResize { instance, target } => {
                    self.dispatch_resize(instance, target)?
                }
                Action::ScheduleIdleExpiry { instance, at } => {
                    self.events
                        .push(at, EventKind::IdleExpiry { instance, deadline: at });
                }
                Action::Terminate(_) => {}
                Action::Enqueue(req) => self.waiting.push_back(req),
            }
        }
        Ok(())
    }

    fn start_exec(&mut self, instance: InstanceId, request: RequestId, cold: bool) {
        let now = self.now;
        let rec = &mut self.slot(request).record;
        rec.route_ms = Some(now);
        rec.exec_start_ms = Some(now);
        rec.instance_id = Some(instance.0);
        rec.cold_start = cold;
        let rt = &mut self.runtimes[instance.0 as usize];
        rt.executing = true;
        rt.in_tail = false;
        rt.remaining = self.config.workload.work;
        rt.scheduled = false;
        rt.last_update = now;
    }

    fn dispatch_resize(&mut self, instance: InstanceId, target: crate::cpu::MilliCpu) -> Result<()> {
        let inst = self
            .fleet
            .get(instance)
            .ok_or_else(|| Error::Protocol(format!("resize for unknown {instance}")))?;
        let from = inst.current_cpu;
        let bound = inst.bound_request;
        let load = if target > from {
            self.config.policy.scale_up_load
        } else {
            LoadState::Idle
        };
        let sample = sample_resize_latency(self.table, from, target, load, &mut self.sampler)?;
        let rt = &mut self.runtimes[instance.0 as usize];
        rt.resize_gen += 1;
        let generation = rt.resize_gen;
        self.events.push(
            self.now + sample.latency_ms,
            EventKind::ResizeApplied {
                instance,
                generation,
            },
        );
        if let Some(req) = bound {
            let now = self.now;
            self.slot(req).record.resize_dispatch_ms = Some(now);
        }
        Ok(())
    }

    fn on_resize_applied(&mut self, instance: InstanceId, generation: u64) -> Result<()> {
        if self.runtimes[instance.0 as usize].resize_gen != generation {
            self.record_notes(&[PolicyNote::StaleEvent {
                instance,
                event: "resize-applied",
            }]);
            return Ok(());
        }
        let d = self.policy.on_resize_applied(&mut self.fleet, instance, self.now)?;
        let inst = self.fleet.get(instance).expect("known instance");
        if inst.phase == Phase::Busy {
            if let Some(req) = inst.bound_request {
                let now = self.now;
                self.slot(req).record.resize_applied_ms = Some(now);
            }
        }
        self.apply(d, false)
    }

    fn on_exec_complete(&mut self, instance: InstanceId, generation: u64) -> Result<()> {
        let idx = instance.0 as usize;
        let rt = &self.runtimes[idx];
        if rt.exec_gen != generation || !(rt.executing || rt.in_tail) {
            return Ok(());
        }
        let tail = self.config.workload.fixed_tail_ms();
        if rt.executing {
            let rt = &mut self.runtimes[idx];
            rt.remaining = CpuWork::ZERO;
            rt.executing = false;
            rt.scheduled = false;
            if tail > 0.0 {
                rt.in_tail = true;
                rt.exec_gen += 1;
                let generation = rt.exec_gen;
                self.events
                    .push(self.now + tail, EventKind::ExecComplete { instance, generation });
                return Ok(());
            }
        }
        self.runtimes[idx].in_tail = false;

        let req = self
            .fleet
            .get(instance)
            .and_then(|s| s.bound_request)
            .ok_or_else(|| Error::Protocol(format!("completion on unbound {instance}")))?;
        let now = self.now;
        let slot = self.slot(req);
        slot.record.completion_ms = Some(now);
        let vu = slot.vu;

        let d = self.policy.on_exec_complete(&mut self.fleet, instance, now)?;
        self.apply(d, false)?;

        if let Some(v) = vu {
            self.send(now + self.think_ms, Some(v));
        }
        Ok(())
    }
}
