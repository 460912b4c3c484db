//! Calibrated model of in-place resize durations.
//!
//! A resize is attributed to one interval of a milliCPU grid, chosen by its
//! target value: an upward resize to `t` belongs to the interval whose upper
//! end is the first grid point at or above `t`, and a downward resize to `t`
//! belongs to the interval whose lower end is the last grid point at or below
//! `t`. The starting value does not select the bucket; measured up-resize
//! durations showed no dependence on it.
//!
//! Each bucket carries the mean and standard deviation of a normal
//! distribution that is truncated below at the table's floor.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cpu::MilliCpu;
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};

/// Mean and spread of idle up-resizes measured at 5m granularity.
pub const IDLE_UP_MEAN_MS: f64 = 56.44;
pub const IDLE_UP_STD_MS: f64 = 8.53;
/// CPU-stress slowdown for the 1m→100m and 100m→200m up intervals.
pub const STRESS_CPU_UP_FACTOR_FIRST: f64 = 6.06;
pub const STRESS_CPU_UP_FACTOR_SECOND: f64 = 2.88;
/// Longest down-resize observed under CPU stress.
pub const STRESS_CPU_DOWN_PEAK_MS: f64 = 3950.0;

pub const CALIBRATION_HEADER: [&str; 6] =
    ["direction", "load", "from_mcpu", "to_mcpu", "mean_ms", "std_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadState {
    Idle,
    StressCpu,
    StressIo,
}

impl LoadState {
    pub const ALL: [LoadState; 3] = [LoadState::Idle, LoadState::StressCpu, LoadState::StressIo];

    pub fn as_str(self) -> &'static str {
        match self {
            LoadState::Idle => "idle",
            LoadState::StressCpu => "stress-cpu",
            LoadState::StressIo => "stress-io",
        }
    }
}

impl std::str::FromStr for LoadState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idle" => Ok(LoadState::Idle),
            "stress-cpu" => Ok(LoadState::StressCpu),
            "stress-io" => Ok(LoadState::StressIo),
            other => Err(Error::invalid(format!(
                "unknown load state `{other}` (expected idle, stress-cpu or stress-io)"
            ))),
        }
    }
}

impl fmt::Display for LoadState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Up,
    Down,
    /// `from == to`; no resize happens.
    Identity,
}

impl Direction {
    pub fn of(from: MilliCpu, to: MilliCpu) -> Self {
        match to.cmp(&from) {
            std::cmp::Ordering::Greater => Direction::Up,
            std::cmp::Ordering::Less => Direction::Down,
            std::cmp::Ordering::Equal => Direction::Identity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BucketKey {
    pub direction: Direction,
    pub load: LoadState,
    pub from: MilliCpu,
    pub to: MilliCpu,
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} {}→{}",
            self.direction.as_str(),
            self.load,
            self.from,
            self.to
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub mean_ms: f64,
    pub std_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResizeLatencyTable {
    entries: BTreeMap<BucketKey, BucketStats>,
    /// Sorted, deduplicated interval boundaries in milliCPU.
    grid: Vec<u32>,
    floor_ms: f64,
}

impl ResizeLatencyTable {
    /// Builds and validates a table. The grid is the set of all bucket endpoints.
    pub fn new(entries: BTreeMap<BucketKey, BucketStats>, floor_ms: f64) -> Result<Self> {
        if !(floor_ms >= 0.0) || !floor_ms.is_finite() {
            return Err(Error::Calibration(format!(
                "floor must be finite and non-negative, got {floor_ms}"
            )));
        }
        let mut grid: Vec<u32> = entries
            .keys()
            .flat_map(|k| [k.from.get(), k.to.get()])
            .collect();
        grid.sort_unstable();
        grid.dedup();
        if grid.len() < 2 {
            return Err(Error::Calibration(
                "table needs at least one bucket spanning two grid points".into(),
            ));
        }
        let table = ResizeLatencyTable {
            entries,
            grid,
            floor_ms,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        for (key, stats) in &self.entries {
            if !(stats.mean_ms >= 0.0) || !stats.mean_ms.is_finite() {
                return Err(Error::Calibration(format!(
                    "bucket {key}: mean must be non-negative, got {}",
                    stats.mean_ms
                )));
            }
            if !(stats.std_ms >= 0.0) || !stats.std_ms.is_finite() {
                return Err(Error::Calibration(format!(
                    "bucket {key}: std must be non-negative, got {}",
                    stats.std_ms
                )));
            }
            let (lo, hi) = match key.direction {
                Direction::Up if key.from < key.to => (key.from.get(), key.to.get()),
                Direction::Down if key.from > key.to => (key.to.get(), key.from.get()),
                _ => {
                    return Err(Error::Calibration(format!(
                        "bucket {key}: direction does not match endpoints"
                    )))
                }
            };
            let i = self.grid.binary_search(&lo).expect("grid holds endpoints");
            if self.grid.get(i + 1) != Some(&hi) {
                return Err(Error::Calibration(format!(
                    "bucket {key} spans more than one grid interval ({}m lies inside)",
                    self.grid[i + 1]
                )));
            }
        }

        // Lower down-resize targets must not be faster.
        for load in LoadState::ALL {
            let mut prev: Option<(&BucketKey, &BucketStats)> = None;
            for (key, stats) in self
                .entries
                .iter()
                .filter(|(k, _)| k.direction == Direction::Down && k.load == load)
            {
                // BTreeMap order for fixed (direction, load) is ascending `from`,
                // which for down buckets is ascending target too.
                if let Some((pk, ps)) = prev {
                    if stats.mean_ms > ps.mean_ms {
                        return Err(Error::Calibration(format!(
                            "down/{load} means must not increase with target: \
                             {pk} has mean {} ms but {key} has mean {} ms",
                            ps.mean_ms, stats.mean_ms
                        )));
                    }
                }
                prev = Some((key, stats));
            }
        }
        Ok(())
    }

    pub fn floor_ms(&self) -> f64 {
        self.floor_ms
    }

    pub fn grid(&self) -> &[u32] {
        &self.grid
    }

    pub fn get(&self, key: &BucketKey) -> Option<BucketStats> {
        self.entries.get(key).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&BucketKey, &BucketStats)> {
        self.entries.iter()
    }

    /// Stats for the bucket a resize falls into; `None` for identity resizes.
    pub fn stats_for(
        &self,
        from: MilliCpu,
        to: MilliCpu,
        load: LoadState,
    ) -> Result<Option<(BucketKey, BucketStats)>> {
        let key = self.interval_bucket(from, to, load);
        if key.direction == Direction::Identity {
            return Ok(None);
        }
        let stats = self
            .get(&key)
            .ok_or_else(|| Error::Calibration(format!("no calibration for bucket {key}")))?;
        Ok(Some((key, stats)))
    }

    /// Maps a resize onto its bucket. Total over all inputs; targets outside
    /// the grid fall into the nearest end interval.
    pub fn interval_bucket(&self, from: MilliCpu, to: MilliCpu, load: LoadState) -> BucketKey {
        let direction = Direction::of(from, to);
        let g = &self.grid;
        let last = g.len() - 1;
        let t = to.get();
        let (lo, hi) = match direction {
            Direction::Identity => {
                return BucketKey {
                    direction,
                    load,
                    from,
                    to,
                }
            }
            Direction::Up => {
                // first grid point >= t, as the interval's upper end
                let hi = g.partition_point(|&p| p < t).clamp(1, last);
                (hi - 1, hi)
            }
            Direction::Down => {
                // last grid point <= t, as the interval's lower end
                let lo = g.partition_point(|&p| p <= t).saturating_sub(1).min(last - 1);
                (lo, lo + 1)
            }
        };
        let (lo, hi) = (MilliCpu::m(g[lo]), MilliCpu::m(g[hi]));
        match direction {
            Direction::Up => BucketKey {
                direction,
                load,
                from: lo,
                to: hi,
            },
            _ => BucketKey {
                direction,
                load,
                from: hi,
                to: lo,
            },
        }
    }

    /// Serializes to the calibration CSV format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CALIBRATION_HEADER)?;
        for (key, stats) in &self.entries {
            w.write_record([
                key.direction.as_str().to_string(),
                key.load.as_str().to_string(),
                key.from.get().to_string(),
                key.to.get().to_string(),
                stats.mean_ms.to_string(),
                stats.std_ms.to_string(),
            ])?;
        }
        w.write_record(["floor", "", "", "", &self.floor_ms.to_string(), ""])?;
        w.flush().map_err(|e| Error::io("<calibration>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn scaled(mean_ms: f64) -> BucketStats {
    // Derived buckets keep the coefficient of variation of the idle up-resize.
    BucketStats {
        mean_ms,
        std_ms: mean_ms * IDLE_UP_STD_MS / IDLE_UP_MEAN_MS,
    }
}

/// Built-in calibration.
///
/// Grid: 100m steps up to 1000m, then 1000m steps up to 8000m. Up/idle is
/// flat. Up under CPU stress is slower only in the first two intervals.
/// Down buckets slow down as the target approaches 1m; under CPU stress the
/// 1m target is set so that mean + 2·std reaches the 3.95 s peak. I/O stress
/// behaves like idle.
pub fn default_table() -> ResizeLatencyTable {
    let mut grid: Vec<u32> = vec![1];
    grid.extend((1..=10).map(|i| i * 100));
    grid.extend((2..=8).map(|i| i * 1000));

    let idle_up = BucketStats {
        mean_ms: IDLE_UP_MEAN_MS,
        std_ms: IDLE_UP_STD_MS,
    };
    let cv = IDLE_UP_STD_MS / IDLE_UP_MEAN_MS;
    let down_idle = |target: u32| match target {
        1 => scaled(180.0),
        100 => scaled(90.0),
        200 => scaled(75.0),
        t if t < 1000 => scaled(60.0),
        _ => idle_up,
    };
    let down_stress_cpu = |target: u32| match target {
        1 => scaled(STRESS_CPU_DOWN_PEAK_MS / (1.0 + 2.0 * cv)),
        100 => scaled(600.0),
        200 => scaled(300.0),
        t if t < 1000 => scaled(150.0),
        _ => idle_up,
    };

    let mut entries = BTreeMap::new();
    for pair in grid.windows(2) {
        let (lo, hi) = (MilliCpu::m(pair[0]), MilliCpu::m(pair[1]));
        for load in LoadState::ALL {
            let up = match (load, pair[0]) {
                (LoadState::StressCpu, 1) => scaled(IDLE_UP_MEAN_MS * STRESS_CPU_UP_FACTOR_FIRST),
                (LoadState::StressCpu, 100) => {
                    scaled(IDLE_UP_MEAN_MS * STRESS_CPU_UP_FACTOR_SECOND)
                }
                _ => idle_up,
            };
            let down = match load {
                LoadState::StressCpu => down_stress_cpu(pair[0]),
                _ => down_idle(pair[0]),
            };
            entries.insert(
                BucketKey {
                    direction: Direction::Up,
                    load,
                    from: lo,
                    to: hi,
                },
                up,
            );
            entries.insert(
                BucketKey {
                    direction: Direction::Down,
                    load,
                    from: hi,
                    to: lo,
                },
                down,
            );
        }
    }
    ResizeLatencyTable::new(entries, 1.0).expect("built-in calibration is valid")
}

/// Parses a calibration CSV.
pub fn load_calibration<R: Read>(source: R) -> Result<ResizeLatencyTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers().map_err(|e| Error::Format {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(CALIBRATION_HEADER) {
        return Err(Error::Format {
            line: 1,
            message: format!(
                "expected header `{}`, got `{}`",
                CALIBRATION_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut entries = BTreeMap::new();
    let mut floor_ms = 0.0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fmt_err = |message: String| Error::Format { line, message };
        if record.len() != 6 {
            return Err(fmt_err(format!("expected 6 fields, got {}", record.len())));
        }
        let num = |idx: usize, name: &str| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .map_err(|_| fmt_err(format!("{name} `{}` is not a number", &record[idx])))
        };
        let mcpu = |idx: usize, name: &str| -> Result<MilliCpu> {
            let v = record[idx]
                .parse::<u32>()
                .map_err(|_| fmt_err(format!("{name} `{}` is not an integer", &record[idx])))?;
            MilliCpu::new(v).map_err(|e| fmt_err(format!("{name}: {e}")))
        };

        let direction = match &record[0] {
            "floor" => {
                floor_ms = num(4, "floor")?;
                continue;
            }
            "up" => Direction::Up,
            "down" => Direction::Down,
            other => return Err(fmt_err(format!("unknown direction `{other}`"))),
        };
        let load: LoadState = record[1].parse().map_err(|e: Error| fmt_err(e.to_string()))?;
        let key = BucketKey {
            direction,
            load,
            from: mcpu(2, "from_mcpu")?,
            to: mcpu(3, "to_mcpu")?,
        };
        let stats = BucketStats {
            mean_ms: num(4, "mean_ms")?,
            std_ms: num(5, "std_ms")?,
        };
        if entries.insert(key, stats).is_some() {
            return Err(Error::Calibration(format!("duplicate bucket {key}")));
        }
    }
    ResizeLatencyTable::new(entries, floor_ms)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResizeSample {
    pub latency_ms: f64,
    pub bucket: BucketKey,
    /// Index of the draw within the sampler's sequence.
    pub draw_index: u64,
}

/// Deterministic source of resize durations.
///
/// Draw `i` uses its own ChaCha stream, so the value of a draw depends only on
/// the seed and its index, not on how many variates earlier draws consumed.
#[derive(Debug, Clone)]
pub struct LatencySampler {
    seed: u64,
    next_index: u64,
}

impl LatencySampler {
    pub fn new(seed: u64) -> Self {
        LatencySampler {
            seed,
            next_index: 0,
        }
    }

    pub fn draws(&self) -> u64 {
        self.next_index
    }

    fn next_rng(&mut self) -> (u64, SimRng) {
        let i = self.next_index;
        self.next_index += 1;
        (i, substream(self.seed, i))
    }
}

/// Draws one resize duration. Identity resizes take zero time and consume no draw.
pub fn sample_resize_latency(
    table: &ResizeLatencyTable,
    from: MilliCpu,
    to: MilliCpu,
    load: LoadState,
    sampler: &mut LatencySampler,
) -> Result<ResizeSample> {
    let Some((bucket, stats)) = table.stats_for(from, to, load)? else {
        return Ok(ResizeSample {
            latency_ms: 0.0,
            bucket: table.interval_bucket(from, to, load),
            draw_index: sampler.draws(),
        });
    };
    let (draw_index, mut rng) = sampler.next_rng();
    let latency_ms = truncated_normal(&mut rng, stats.mean_ms, stats.std_ms, table.floor_ms());
    Ok(ResizeSample {
        latency_ms,
        bucket,
        draw_index,
    })
}

/// Normal(mean, std) conditioned on being at least `floor`.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64, floor: f64) -> f64 {
    if std == 0.0 {
        return mean.max(floor);
    }
    let alpha = (floor - mean) / std;
    let z = if alpha < 0.5 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= alpha {
                break z;
            }
        }
    } else {
        // Exponential-proposal rejection for deep tails (Robert, 1995).
        let lambda = (alpha + (alpha * alpha + 4.0).sqrt()) / 2.0;
        let exp = Exp::new(lambda).expect("lambda is positive");
        loop {
            let z = alpha + exp.sample(rng);
            let accept = (-(z - lambda).powi(2) / 2.0).exp();
            if rng.random::<f64>() <= accept {
                break z;
            }
        }
    };
    (mean + std * z).max(floor)
}
