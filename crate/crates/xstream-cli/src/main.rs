use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use xstream::aging::{AutoAgePolicy, DEFAULT_MARGIN, DEFAULT_RESERVOIR};
use xstream::dfr::dfr_run;
use xstream::experiments::{self, CellParams, Lead};
use xstream::gen;
use xstream::model::{LabeledEdge, StreamItem, Timestamp};
use xstream::pipelined::PipelinedRing;
use xstream::ring::{MetricsRow, Ring, RingConfig, RingError, Transcript};
use xstream::stream::{parse_reader, parse_stream_file, render};
use xstream::union_find::NamingFn;

#[derive(Parser)]
#[command(name = "xstream", version, about = "Streaming connected components on a simulated processor ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a stream file through the ring and print the transcript.
    Run(RunArgs),
    /// Write a synthetic stream.
    Gen(GenArgs),
    /// Run one of the desk-scale experiments.
    Experiment(ExperimentArgs),
    /// Label components of a stream's edges with the multi-pass reference.
    Dfr(DfrArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Lockstep,
    Pipelined,
}

#[derive(Args, Clone)]
struct RingArgs {
    /// Number of processors in the ring.
    #[arg(long, short = 'p', default_value_t = 10)]
    processors: usize,
    /// Edge slots per processor.
    #[arg(long, short = 's', default_value_t = 1000)]
    capacity: usize,
    /// Slots per bundle, primary included.
    #[arg(long, short = 'k', default_value_t = 4)]
    bundle: usize,
    #[arg(long, value_enum, default_value_t = Engine::Lockstep)]
    engine: Engine,
    /// Audit ring invariants every tick (lockstep only).
    #[arg(long)]
    validate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write one metrics row per tick as CSV (lockstep only).
    #[arg(long, value_name = "OUT.csv")]
    metrics: Option<PathBuf>,
    /// Reservoir size per processor for threshold estimates.
    #[arg(long, default_value_t = DEFAULT_RESERVOIR)]
    reservoir: usize,
    /// Enable automatic aging with this surviving fraction.
    #[arg(long, value_name = "C")]
    auto_age_c: Option<f64>,
    /// Safety multiplier on the free-space trigger.
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    auto_age_margin: f64,
}

impl RingArgs {
    fn config(&self) -> Result<RingConfig> {
        let mut cfg = RingConfig::new(self.processors, self.capacity, self.bundle);
        cfg.validate = self.validate;
        cfg.seed = self.seed;
        cfg.reservoir = self.reservoir;
        cfg.metrics = self.metrics.is_some();
        if let Some(c) = self.auto_age_c {
            if !(0.0..1.0).contains(&c) {
                bail!("--auto-age-c must lie in [0, 1), got {c}");
            }
            cfg.auto_age = Some(AutoAgePolicy { c, margin: self.auto_age_margin });
        }
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    ring: RingArgs,
    /// Stream file; `-` or absent reads standard input.
    input: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Uniform,
    Repeat,
    Rmat,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = Kind::Uniform)]
    kind: Kind,
    /// Number of edges.
    #[arg(long, short = 'n', default_value_t = 10_000)]
    edges: usize,
    /// Target unique fraction (uniform) or 1/m (repeat).
    #[arg(long, short = 'u', default_value_t = 1.0)]
    unique: f64,
    /// Vertex count (uniform, repeat).
    #[arg(long, default_value_t = 100_000)]
    vertices: u64,
    /// log2 of the vertex count (rmat).
    #[arg(long, default_value_t = 12)]
    scale: u32,
    /// Insert a connectivity query after every this many edges; 0 disables.
    #[arg(long, default_value_t = 0)]
    query_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// 1: throughput, 2: single-aging sweep, 3: auto-aging storage series.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    which: u8,
    #[command(flatten)]
    ring: RingArgs,
    /// Stream length (experiments 1 and 3).
    #[arg(long, short = 'n', default_value_t = 100_000)]
    edges: usize,
    /// Surviving fraction.
    #[arg(long, short = 'c', default_value_t = 0.5)]
    c: f64,
    /// Tolerable downtime fraction (experiment 2).
    #[arg(long, short = 'd', default_value_t = 0.5)]
    d: f64,
    /// Unique fraction (experiment 2).
    #[arg(long, short = 'u', default_value_t = 1.0)]
    unique: f64,
    /// Issue aging with this many free slots instead of the sufficient lead (experiment 2).
    #[arg(long)]
    late: Option<u64>,
    /// Use the configured bundle size instead of the smallest sufficient one (experiment 2).
    #[arg(long)]
    fixed_bundle: bool,
    /// Aging events (experiment 2).
    #[arg(long, default_value_t = 3)]
    cycles: usize,
}

#[derive(Args)]
struct DfrArgs {
    /// Vertex capacity per pass.
    #[arg(long, short = 's', default_value_t = 1000)]
    capacity: usize,
    input: Option<PathBuf>,
}

fn read_stream(path: &Option<PathBuf>) -> Result<Vec<StreamItem>> {
    match path {
        Some(p) if p.as_os_str() != "-" => Ok(parse_stream_file(p)?),
        _ => {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text)?;
            Ok(parse_reader(text.as_bytes())?)
        }
    }
}

fn write_metrics(path: &PathBuf, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(MetricsRow::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Print the transcript; a system failure becomes exit code 2.
fn finish(transcript: &Transcript, res: Result<(), RingError>) -> Result<ExitCode> {
    let mut out = io::stdout().lock();
    out.write_all(transcript.render().as_bytes())?;
    out.flush()?;
    match res {
        Ok(()) => Ok(ExitCode::SUCCESS),
        Err(RingError::SystemFailed { tick }) => {
            eprintln!("system failed at tick {tick}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = args.ring.config()?;
    let items = read_stream(&args.input)?;
    match args.ring.engine {
        Engine::Lockstep => {
            let mut ring = Ring::new(cfg)?;
            let res = ring.run(items);
            if let Some(path) = &args.ring.metrics {
                write_metrics(path, ring.metrics())?;
            }
            if !ring.violations().is_empty() {
                for v in ring.violations() {
                    eprintln!("violation at tick {}: {:?} {}", v.tick, v.kind, v.detail);
                }
            }
            let code = finish(ring.transcript(), res)?;
            if code == ExitCode::SUCCESS && !ring.violations().is_empty() {
                return Ok(ExitCode::from(3));
            }
            Ok(code)
        }
        Engine::Pipelined => {
            if args.ring.validate || args.ring.metrics.is_some() {
                eprintln!("note: --validate and --metrics apply to the lockstep engine only");
            }
            let mut ring = PipelinedRing::new(cfg)?;
            let res = ring.run(items);
            let (transcript, _) = ring.shutdown();
            finish(&transcript, res)
        }
    }
}

fn generate(args: GenArgs) -> Result<ExitCode> {
    if !(args.unique > 0.0 && args.unique <= 1.0) {
        bail!("--unique must lie in (0, 1]");
    }
    let edges = match args.kind {
        Kind::Uniform => gen::uniform(args.edges, args.vertices, args.unique, gen::DEFAULT_WINDOW, args.seed),
        Kind::Repeat => {
            let m = (1.0 / args.unique).round().max(1.0) as usize;
            gen::repeat_block(args.edges, args.vertices, m, args.seed)
        }
        Kind::Rmat => gen::rmat(args.edges, args.scale, gen::RMAT_DEFAULT, args.seed),
    };
    let items = if args.query_every > 0 {
        let vertices = match args.kind {
            Kind::Rmat => 1u64 << args.scale,
            _ => args.vertices,
        };
        gen::with_queries(&edges, args.query_every, vertices, args.seed)
    } else {
        gen::as_items(&edges)
    };
    io::stdout().lock().write_all(render(&items).as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let cfg = args.ring.config()?;
    match args.which {
        1 => {
            let edges = gen::uniform(args.edges, (args.edges as u64 * 4).max(64), 1.0, gen::DEFAULT_WINDOW, args.ring.seed);
            let pipelined = matches!(args.ring.engine, Engine::Pipelined);
            let r = experiments::throughput(cfg, &edges, pipelined)?;
            println!(
                "engine={} edges={} ticks={} seconds={:.3} edges_per_sec={:.0}",
                r.engine,
                r.edges,
                r.ticks,
                r.elapsed.as_secs_f64(),
                r.edges_per_sec()
            );
        }
        2 => {
            let mut p = CellParams::new(args.c, args.d, args.unique, cfg.p, cfg.s);
            p.cycles = args.cycles;
            p.seed = args.ring.seed;
            p.validate = cfg.validate;
            if args.fixed_bundle {
                p.k = Some(cfg.k);
            }
            if let Some(n) = args.late {
                p.lead = Lead::Late(n);
            }
            let r = experiments::aging_cell(p);
            println!(
                "c={} d={} u={} p={} s={} k={} k_min={:.3}",
                args.c, args.d, args.unique, cfg.p, cfg.s, r.k, r.k_min
            );
            for e in &r.events {
                println!(
                    "aging issued={} threshold={} finished={} stored_after={} dropped={} extra={}",
                    e.issued, e.threshold, e.finished, e.stored_after, e.dropped, e.extra
                );
            }
            match r.downtime {
                Some(x) => println!("downtime={x:.4}"),
                None => println!("downtime=n/a"),
            }
            println!("violations={}", r.violations);
            if let Some(t) = r.failed_at {
                println!("result=FAIL tick={t}");
                eprintln!("system failed at tick {t}");
                return Ok(ExitCode::from(2));
            }
            println!("result=OK");
        }
        _ => {
            let mut cfg = cfg;
            cfg.metrics = false;
            let r = experiments::auto_age_run(cfg, args.c, args.edges, args.ring.seed);
            if let Some(path) = &args.ring.metrics {
                let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
                w.write_record(["tick", "stored_total"])?;
                for (t, s) in &r.series {
                    w.write_record([t.to_string(), s.to_string()])?;
                }
                w.flush()?;
            }
            for ((t, s), th) in r.after_aging.iter().zip(&r.thresholds) {
                let th = th.map_or("none".to_string(), |Timestamp(x)| x.to_string());
                println!("aged tick={t} threshold={th} stored={s}");
            }
            println!(
                "events={} target={:.0} worst_deviation={:.4} violations={} seconds={:.3}",
                r.after_aging.len(),
                r.c * r.s_total as f64,
                r.worst_deviation(),
                r.violations,
                r.elapsed.as_secs_f64()
            );
            if let Some(t) = r.failed_at {
                eprintln!("system failed at tick {t}");
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn dfr(args: DfrArgs) -> Result<ExitCode> {
    let items = read_stream(&args.input)?;
    let a0: Vec<LabeledEdge> = items
        .iter()
        .enumerate()
        .filter_map(|(t, it)| match it {
            StreamItem::Edge(u, v) => Some(LabeledEdge::fresh(*u, *v, Timestamp(t as u64))),
            _ => None,
        })
        .collect();
    let labels = dfr_run(args.capacity, NamingFn::MIN, &a0);
    let mut out = io::stdout().lock();
    for (v, l) in &labels.labels {
        writeln!(out, "{} {}", v.0, l.0)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Gen(a) => generate(a),
        Command::Experiment(a) => experiment(a),
        Command::Dfr(a) => dfr(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
