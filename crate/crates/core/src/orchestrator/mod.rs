//! Wall-clock resize measurement harness.
//!
//! A container is a directory holding a CPU limit file. Patching a limit
//! returns immediately and rewrites the file from a background thread after an
//! injected delay; the watcher polls the file and reports how long the change
//! took to become visible.

mod backend;

use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use backend::{parse_limit, FileBackend, LimitBackend, LIMIT_FILE};

use crate::cpu::MilliCpu;
use crate::error::{Error, Result};
use crate::plan::ResizePlan;
use crate::resize::{sample_resize_latency, LatencySampler, LoadState, ResizeLatencyTable};

pub const DEFAULT_POLL_US: u64 = 1000;
pub const DEFAULT_WATCH_TIMEOUT: Duration = Duration::from_secs(30);

pub const MEASUREMENT_HEADER: [&str; 7] = [
    "plan_id",
    "step_index",
    "from_mcpu",
    "to_mcpu",
    "repetition",
    "injected_ms",
    "measured_ms",
];

#[derive(Debug)]
pub struct ContainerHandle {
    pub id: String,
    pub limit_file: PathBuf,
    /// Last limit requested through this handle. The file catches up once the
    /// pending patch applies.
    pub current_limit: MilliCpu,
    pending: Option<JoinHandle<Result<()>>>,
}

impl ContainerHandle {
    /// Blocks until an in-flight patch has been written.
    pub fn wait_applied(&mut self) -> Result<()> {
        match self.pending.take() {
            Some(h) => h
                .join()
                .map_err(|_| Error::Protocol(format!("patch thread for `{}` panicked", self.id)))?,
            None => Ok(()),
        }
    }
}

impl Drop for ContainerHandle {
    fn drop(&mut self) {
        let _ = self.wait_applied();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchRecord {
    /// Nanoseconds since the orchestrator's epoch, on the monotonic clock.
    pub dispatch_ns: u64,
    pub target: MilliCpu,
    pub injected_latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WatchRecord {
    pub detect_ns: u64,
    pub observed: MilliCpu,
    pub poll_interval_us: u64,
}

impl WatchRecord {
    pub fn duration_ms(&self, patch: &PatchRecord) -> f64 {
        (self.detect_ns - patch.dispatch_ns) as f64 / 1e6
    }
}

/// Where injected apply delays come from.
#[derive(Debug, Clone)]
pub enum LatencySource {
    Fixed(f64),
    Sampled {
        table: Arc<ResizeLatencyTable>,
        load: LoadState,
        sampler: LatencySampler,
    },
}

impl LatencySource {
    pub fn sampled(table: ResizeLatencyTable, load: LoadState, seed: u64) -> Self {
        LatencySource::Sampled {
            table: Arc::new(table),
            load,
            sampler: LatencySampler::new(seed),
        }
    }

    pub fn next_ms(&mut self, from: MilliCpu, to: MilliCpu) -> Result<f64> {
        match self {
            LatencySource::Fixed(ms) => Ok(*ms),
            LatencySource::Sampled {
                table,
                load,
                sampler,
            } => Ok(sample_resize_latency(table, from, to, *load, sampler)?.latency_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub plan_id: String,
    pub step_index: usize,
    pub from_mcpu: u32,
    pub to_mcpu: u32,
    pub repetition: u32,
    pub injected_ms: f64,
    pub measured_ms: f64,
}

pub struct MockOrchestrator<B: LimitBackend = FileBackend> {
    backend: Arc<B>,
    epoch: Instant,
    watch_timeout: Duration,
}

impl MockOrchestrator<FileBackend> {
    pub fn in_dir(workdir: impl Into<PathBuf>) -> Result<Self> {
        Ok(Self::new(FileBackend::new(workdir)?))
    }
}

impl<B: LimitBackend> MockOrchestrator<B> {
    pub fn new(backend: B) -> Self {
        MockOrchestrator {
            backend: Arc::new(backend),
            epoch: Instant::now(),
            watch_timeout: DEFAULT_WATCH_TIMEOUT,
        }
    }

    pub fn with_watch_timeout(mut self, timeout: Duration) -> Self {
        self.watch_timeout = timeout;
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    pub fn create_container(&self, id: &str, initial: MilliCpu) -> Result<ContainerHandle> {
        let limit_file = self.backend.create(id, initial)?;
        Ok(ContainerHandle {
            id: id.to_string(),
            limit_file,
            current_limit: initial,
            pending: None,
        })
    }

    pub fn remove_container(&self, mut handle: ContainerHandle) -> Result<()> {
        handle.wait_applied()?;
        self.backend.remove(&handle.id)
    }

    pub fn read_limit(&self, handle: &ContainerHandle) -> Result<MilliCpu> {
        self.backend.read_limit(&handle.id)
    }

    /// Dispatches a limit change that lands after `injected_ms`. Returns as
    /// soon as the change is scheduled; an earlier pending change on the same
    /// container is allowed to land first.
    pub fn patch_cpu_limit(
        &self,
        handle: &mut ContainerHandle,
        to: MilliCpu,
        injected_ms: f64,
    ) -> Result<PatchRecord> {
        if !(injected_ms.is_finite() && injected_ms >= 0.0) {
            return Err(Error::invalid(format!("injected latency {injected_ms} ms")));
        }
        handle.wait_applied()?;
        // fail fast on a missing container rather than in the apply thread
        self.backend.read_limit(&handle.id)?;

        let dispatched = Instant::now();
        let dispatch_ns = dispatched.duration_since(self.epoch).as_nanos() as u64;
        let due = dispatched + Duration::from_secs_f64(injected_ms / 1000.0);
        let backend = Arc::clone(&self.backend);
        let id = handle.id.clone();
        handle.pending = Some(thread::spawn(move || {
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
            backend.write_limit(&id, to)
        }));
        handle.current_limit = to;
        Ok(PatchRecord {
            dispatch_ns,
            target: to,
            injected_latency_ms: injected_ms,
        })
    }

    /// Polls until the limit file shows `expected`.
    pub fn watch(
        &self,
        handle: &ContainerHandle,
        expected: MilliCpu,
        poll_interval_us: u64,
    ) -> Result<WatchRecord> {
        let start = Instant::now();
        let poll = Duration::from_micros(poll_interval_us);
        loop {
            let seen = self.backend.read_limit(&handle.id)?;
            let detect_ns = self.now_ns();
            if seen == expected {
                return Ok(WatchRecord {
                    detect_ns,
                    observed: seen,
                    poll_interval_us,
                });
            }
            if start.elapsed() >= self.watch_timeout {
                return Err(Error::WatchTimeout {
                    expected: expected.get(),
                    waited_ms: start.elapsed().as_millis() as u64,
                    step: None,
                });
            }
            thread::sleep(poll);
        }
    }

    /// Patches the limit and returns the dispatch-to-visible duration in ms.
    pub fn measure_resize(
        &self,
        handle: &mut ContainerHandle,
        to: MilliCpu,
        injected_ms: f64,
        poll_interval_us: u64,
    ) -> Result<f64> {
        handle.wait_applied()?;
        if handle.current_limit == to {
            return Err(Error::invalid(format!(
                "container `{}` is already at {to}",
                handle.id
            )));
        }
        let patch = self.patch_cpu_limit(handle, to, injected_ms)?;
        let watch = self.watch(handle, to, poll_interval_us)?;
        handle.wait_applied()?;
        Ok(watch.duration_ms(&patch))
    }

    /// Sets the limit without measuring and waits until it is visible.
    pub fn reset(&self, handle: &mut ContainerHandle, to: MilliCpu) -> Result<()> {
        if handle.current_limit != to {
            self.patch_cpu_limit(handle, to, 0.0)?;
        }
        handle.wait_applied()
    }

    /// Runs every timed step of `plan` `repetitions` times. Each repetition
    /// starts from the plan's initial value; untimed steps are applied
    /// instantly and not reported.
    pub fn run_plan(
        &self,
        handle: &mut ContainerHandle,
        plan: &ResizePlan,
        latency: &mut LatencySource,
        poll_interval_us: u64,
        repetitions: u32,
    ) -> Result<Vec<Measurement>> {
        let plan_id = plan.id();
        let mut out = Vec::new();
        for rep in 0..repetitions {
            self.reset(handle, plan.initial)?;
            for (i, step) in plan.steps.iter().enumerate() {
                if handle.current_limit != step.from {
                    self.reset(handle, step.from)?;
                }
                if !step.timed {
                    self.reset(handle, step.to)?;
                    continue;
                }
                let injected_ms = latency.next_ms(step.from, step.to)?;
                let measured_ms = self
                    .measure_resize(handle, step.to, injected_ms, poll_interval_us)
                    .map_err(|e| match e {
                        Error::WatchTimeout {
                            expected,
                            waited_ms,
                            ..
                        } => Error::WatchTimeout {
                            expected,
                            waited_ms,
                            step: Some(i),
                        },
                        other => other,
                    })?;
                out.push(Measurement {
                    plan_id: plan_id.clone(),
                    step_index: i,
                    from_mcpu: step.from.get(),
                    to_mcpu: step.to.get(),
                    repetition: rep,
                    injected_ms,
                    measured_ms,
                });
            }
        }
        Ok(out)
    }
}

pub fn write_measurements<W: Write>(rows: &[Measurement], provenance: &str, mut out: W) -> Result<()> {
    writeln!(out, "# {provenance}").map_err(|e| Error::io("<measurements>", e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(MEASUREMENT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<measurements>", e))?;
    Ok(())
}

/// Reads measurement CSV, skipping `#` comment lines.
pub fn read_measurements<R: Read>(input: R) -> Result<Vec<Measurement>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    if r.headers()?.iter().ne(MEASUREMENT_HEADER) {
        return Err(Error::Format {
            line: 1,
            message: format!("expected measurement header `{}`", MEASUREMENT_HEADER.join(",")),
        });
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
