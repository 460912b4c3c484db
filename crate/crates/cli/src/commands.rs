use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};

use warmslice::orchestrator::{
    read_measurements, write_measurements, LatencySource, MockOrchestrator, DEFAULT_POLL_US,
};
use warmslice::plan::{fine_plan, table2_suite, CumulativeDownStart, ResizePlan};
use warmslice::plot::{measurement_series, trace_series, write_points, Figure};
use warmslice::policy::PolicyKind;
use warmslice::report::{build_report, render_report, RunSummary};
use warmslice::resize::{default_table, load_calibration, LoadState, ResizeLatencyTable};
use warmslice::scenario::{load_scenario, ScenarioConfig};
use warmslice::sim::{read_trace_csv, run_scenario, write_trace_csv, SimRun};
use warmslice::workload::catalog;

use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file {} does not exist", path.display())))
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes the trace and summary of a finished run; returns the summary.
fn write_run(config: &ScenarioConfig, run: &SimRun, out: &Path) -> Result<RunSummary> {
    let stem = format!("{}-{}", config.policy.kind, config.workload.name);
    let trace_path = out.join(format!("trace-{stem}.csv"));
    let mut w = create_file(&trace_path)?;
    write_trace_csv(&run.records, &config.provenance(), &mut w)?;
    w.flush()?;

    let summary = RunSummary::from_run(config, run)?;
    let summary_path = out.join(format!("summary-{stem}.json"));
    fs::write(&summary_path, summary.to_json() + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;
    Ok(summary)
}

pub fn simulate(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    require_file(scenario)?;
    let mut config = load_scenario(scenario)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let run = run_scenario(&config)?;
    create_out_dir(out)?;
    let summary = write_run(&config, &run, out)?;
    println!(
        "{} {}: {} requests, mean {:.3} ms, p99 {:.3} ms, {} cold starts",
        config.policy.kind,
        config.workload.name,
        summary.stats.count,
        summary.stats.mean_ms,
        summary.stats.p99,
        summary.cold_starts
    );
    Ok(())
}

pub fn grid(seed: u64, out: &Path) -> Result<()> {
    create_out_dir(out)?;
    let mut baselines = Vec::new();
    let mut inputs = Vec::new();
    for w in catalog() {
        for kind in PolicyKind::ALL {
            let mut config = ScenarioConfig::reference(kind, &w.name)?;
            config.seed = seed;
            let run = run_scenario(&config)?;
            let summary = write_run(&config, &run, out)?;
            if kind == PolicyKind::Default {
                baselines.push(summary);
            } else {
                inputs.push(summary);
            }
        }
    }
    write_report(&baselines, &inputs, Some(out))
}

fn write_report(baselines: &[RunSummary], inputs: &[RunSummary], out: Option<&Path>) -> Result<()> {
    let rows = build_report(baselines, inputs)?;
    let text = render_report(&rows);
    print!("{text}");
    if let Some(dir) = out {
        create_out_dir(dir)?;
        let mut seeds: Vec<u64> = baselines.iter().chain(inputs).map(|s| s.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let doc = serde_json::json!({ "seeds": seeds, "rows": rows });
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&doc)? + "\n")
            .context("writing report.json")?;
        fs::write(dir.join("report.txt"), &text).context("writing report.txt")?;
    }
    Ok(())
}

fn read_summaries(paths: &[PathBuf]) -> Result<Vec<RunSummary>> {
    paths
        .iter()
        .map(|p| {
            require_file(p)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunSummary::from_json(&text)
                .map_err(|e| usage(format!("{} is not a run summary: {e}", p.display())))
        })
        .collect()
}

pub fn report(baseline: &[PathBuf], inputs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let baselines = read_summaries(baseline)?;
    let inputs = read_summaries(inputs)?;
    write_report(&baselines, &inputs, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableVariant {
    /// Cumulative 100m down plan starts at 100m
    Figure,
    /// Cumulative 100m down plan starts at 1000m
    Table,
}

#[derive(Args, Debug)]
pub struct ResizeBenchArgs {
    /// table2, fine, or a plan CSV
    #[arg(long)]
    plan: String,
    #[arg(long, default_value_t = DEFAULT_POLL_US)]
    poll_us: u64,
    #[arg(long, default_value_t = 1)]
    reps: u32,
    #[arg(long, env = "WARMSLICE_OUT", default_value = "warmslice-out")]
    out: PathBuf,
    /// Injected delay: "sampled" from the calibration, or a fixed number of ms
    #[arg(long, default_value = "sampled")]
    latency: String,
    /// Load state used when sampling
    #[arg(long, default_value = "idle")]
    load: String,
    /// Calibration CSV; the built-in table when omitted
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = warmslice::scenario::DEFAULT_SEED)]
    seed: u64,
    /// Starting value of the cumulative 100m down plan
    #[arg(long, value_enum, default_value_t = TableVariant::Figure)]
    variant: TableVariant,
}

fn resolve_plans(selector: &str, variant: TableVariant) -> Result<Vec<ResizePlan>> {
    Ok(match selector {
        "table2" => table2_suite(match variant {
            TableVariant::Figure => CumulativeDownStart::Figure,
            TableVariant::Table => CumulativeDownStart::Table,
        }),
        "fine" => {
            let (up, down) = fine_plan();
            vec![up, down]
        }
        path => {
            let path = Path::new(path);
            require_file(path)?;
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            vec![ResizePlan::read_csv(f)?]
        }
    })
}

fn latency_source(args: &ResizeBenchArgs) -> Result<(LatencySource, String)> {
    if args.latency == "sampled" {
        let load: LoadState = args.load.parse()?;
        let table: ResizeLatencyTable = match &args.calibration {
            Some(p) => {
                require_file(p)?;
                load_calibration(File::open(p).with_context(|| format!("opening {}", p.display()))?)?
            }
            None => default_table(),
        };
        let desc = format!("latency=sampled load={load} seed={}", args.seed);
        return Ok((LatencySource::sampled(table, load, args.seed), desc));
    }
    let ms: f64 = args
        .latency
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| usage(format!("--latency must be `sampled` or a non-negative number, got `{}`", args.latency)))?;
    Ok((LatencySource::Fixed(ms), format!("latency=fixed:{ms}ms seed={}", args.seed)))
}

pub fn resize_bench(args: &ResizeBenchArgs) -> Result<()> {
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if args.poll_us == 0 {
        return Err(usage("--poll-us must be positive"));
    }
    let plans = resolve_plans(&args.plan, args.variant)?;
    let (mut latency, desc) = latency_source(args)?;
    create_out_dir(&args.out)?;
    let containers = args.out.join("containers");
    let orch = MockOrchestrator::in_dir(&containers)?;
    let result = (|| -> Result<()> {
        for (i, plan) in plans.iter().enumerate() {
            let id = plan.id();
            let mut c = orch.create_container(&format!("bench-{i}"), plan.initial)?;
            let rows = orch
                .run_plan(&mut c, plan, &mut latency, args.poll_us, args.reps)
                .with_context(|| format!("plan {id}"))?;
            orch.remove_container(c)?;
            let path = args.out.join(format!("resize-{id}.csv"));
            let mut w = create_file(&path)?;
            let provenance = format!("plan={id} {desc} poll_us={} reps={}", args.poll_us, args.reps);
            write_measurements(&rows, &provenance, &mut w)?;
            w.flush()?;
            let mean = rows.iter().map(|r| r.measured_ms).sum::<f64>() / rows.len().max(1) as f64;
            println!("{id}: {} measurements, mean {mean:.3} ms -> {}", rows.len(), path.display());
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&containers);
    result
}

/// `#` lines at the top of a file.
fn provenance_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        match line.strip_prefix('#') {
            Some(rest) => out.push(rest.trim().to_string()),
            None => break,
        }
    }
    Ok(out)
}

pub fn plot_data(figure: &str, inputs: &[PathBuf], out: &Path) -> Result<()> {
    let figure: Figure = figure.parse()?;
    let mut sources = Vec::new();
    for p in inputs {
        require_file(p)?;
        for line in provenance_lines(p)? {
            sources.push(format!("{}: {line}", p.display()));
        }
    }
    let points = if figure.uses_traces() {
        let mut records = Vec::new();
        for p in inputs {
            records.extend(read_trace_csv(File::open(p)?).with_context(|| format!("reading {}", p.display()))?);
        }
        trace_series(figure, &records)?
    } else {
        let mut rows = Vec::new();
        for p in inputs {
            rows.extend(read_measurements(File::open(p)?).with_context(|| format!("reading {}", p.display()))?);
        }
        measurement_series(figure, &rows)?
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_out_dir(dir)?;
    }
    let mut w = create_file(out)?;
    writeln!(w, "# figure={figure}")?;
    for s in &sources {
        writeln!(w, "# {s}")?;
    }
    write_points(&points, &mut w)?;
    w.flush()?;
    println!("{figure}: {} points -> {}", points.len(), out.display());
    Ok(())
}
