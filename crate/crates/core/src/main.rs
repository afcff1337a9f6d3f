//! Command-line front end: formula evaluation, crossing reports,
//! single simulations, injection-rate sweeps, and A/B comparisons.

use std::error::Error;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dsmc::analytic::{
    bank_utilization_dsmc, bank_utilization_flat, crossing_reduction_ratio, crossings_2ary,
    crossings_2ary_speedup, crossings_between_blocks, crossings_flat, expected_slave_utilization,
    ContentionParams,
};
use dsmc::config::RunConfig;
use dsmc::engine;
use dsmc::metrics::{self, RunMeta, SimStats, CSV_HEADER};
use dsmc::svg::{line_plot, Series};
use dsmc::topology::{count_crossings_geometric, flat_crossbar_embedding, TopologyKind};
use dsmc::traffic::{PatternKind, TrafficPattern};

#[derive(Parser)]
#[command(
    name = "dsmc",
    about = "Contention models and a cycle-level simulator for many-ported shared memories",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form utilization formulas over a speed-up sweep.
    Analyze(AnalyzeArgs),
    /// Report wire-crossing counts and the crossing-reduction ratio.
    Crossings(CrossingsArgs),
    /// Run one simulation from a config file.
    Simulate(SimulateArgs),
    /// Sweep injection rates for the configured topology (plus the
    /// matched flat baseline when the topology is the two-block design).
    Sweep(SweepArgs),
    /// Run two configs across all burst patterns and compare metrics.
    Compare(CompareArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Master ports.
    #[arg(long, default_value_t = 16)]
    n: u32,
    /// Slave ports.
    #[arg(long, default_value_t = 16)]
    k: u32,
    /// Per-cycle request probability.
    #[arg(long, default_value_t = 1.0)]
    pa: f64,
    /// Largest speed-up factor to evaluate.
    #[arg(long, default_value_t = 8)]
    r_max: u32,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrossingsArgs {
    /// Ports per building block (power of two, >= 8).
    #[arg(long, default_value_t = 16)]
    n: u32,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration file.
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Run configuration file with a [sweep] rates list.
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a latency-vs-rate SVG plot here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First run configuration (the "A" side).
    config_a: PathBuf,
    /// Second run configuration (the "B" side).
    config_b: PathBuf,
    /// Override both config seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Crossings(args) => cmd_crossings(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write_csv(
    out: Option<&PathBuf>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), Box<dyn Error>> {
    let mut w: csv::Writer<Box<dyn std::io::Write>> = match out {
        Some(path) => csv::Writer::from_writer(Box::new(fs::File::create(path)?)),
        None => csv::Writer::from_writer(Box::new(std::io::stdout().lock())),
    };
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Box<dyn Error>> {
    if args.r_max == 0 {
        return Err("r_max must be at least 1".into());
    }
    let header = [
        "n",
        "k",
        "p_a",
        "r",
        "expected_slave_utilization",
        "port_utilization",
        "bank_util_dsmc",
        "bank_util_flat",
    ];
    let mut rows = Vec::new();
    for r in 1..=args.r_max {
        let p = ContentionParams::new(args.n, args.k, r, args.pa)?;
        let e = expected_slave_utilization(&p)?;
        rows.push(vec![
            args.n.to_string(),
            args.k.to_string(),
            format!("{:.4}", args.pa),
            r.to_string(),
            format!("{e:.6}"),
            format!("{:.6}", e * args.k as f64 / args.n as f64),
            format!("{:.6}", bank_utilization_dsmc(&p)?),
            format!("{:.6}", bank_utilization_flat(&p)),
        ]);
    }
    // Large-n asymptote of the flat-crossbar bank utilization (1 - 1/e).
    let big = ContentionParams::new(1_000_000, 1_000_000, 1, args.pa)?;
    rows.push(vec![
        "1000000".into(),
        "1000000".into(),
        format!("{:.4}", args.pa),
        "1".into(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.6}", bank_utilization_flat(&big)),
    ]);
    write_csv(args.out.as_ref(), &header, &rows)
}

fn cmd_crossings(args: CrossingsArgs) -> Result<(), Box<dyn Error>> {
    let n = args.n;
    if n < 8 || !n.is_power_of_two() {
        return Err(format!("n={n} must be a power of two >= 8").into());
    }
    let flat = crossings_flat(2 * n as u64, 2 * n as u64);
    let plain = crossings_2ary(n)?;
    let speedup = crossings_2ary_speedup(n)?;
    let between = crossings_between_blocks(n)?;
    let ratio = crossing_reduction_ratio(n)?;

    let embedding = flat_crossbar_embedding(2 * n, 2 * n);
    let geometric = count_crossings_geometric(&embedding);

    let mut out = std::io::stdout().lock();
    writeln!(out, "ports per block         n      = {n}")?;
    writeln!(out, "flat crossbar 2n x 2n   flat   = {flat}")?;
    writeln!(out, "  geometric oracle check: {geometric} ({})",
        if geometric == flat { "match" } else { "MISMATCH" })?;
    writeln!(out, "plain 2-ary block       plain  = {plain}")?;
    writeln!(out, "block with speed-up     speedup = {speedup}")?;
    writeln!(out, "between the two blocks  between = {between}")?;
    writeln!(out, "crossing reduction      R      = {ratio:.3}")?;
    writeln!(
        out,
        "note: with ~200 physical wires per port, the flat design carries R x 200^2 = {:.3e} more wire crossings",
        ratio * 200.0 * 200.0
    )?;
    if geometric != flat {
        return Err("geometric oracle disagrees with the closed form".into());
    }
    Ok(())
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<RunConfig, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = RunConfig::parse(&text)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn meta_for(cfg: &RunConfig, pattern: &TrafficPattern, kind: TopologyKind) -> RunMeta {
    RunMeta {
        config_hash: cfg.content_hash(),
        topology_kind: kind.name().to_string(),
        n: cfg.n,
        k: match kind {
            TopologyKind::FlatCrossbar => cfg.k,
            _ => cfg.n,
        },
        r: match kind {
            TopologyKind::DsmcTwoBlock => 2,
            _ => cfg.r,
        },
        pattern: pattern.kind.name().to_string(),
        injection_rate: pattern.injection_rate,
        seed: cfg.seed,
    }
}

fn run_one(cfg: &RunConfig) -> Result<(RunMeta, SimStats), Box<dyn Error>> {
    let topo = cfg.build_topology()?;
    let stats = engine::run(&topo, cfg.policy(), cfg.pattern, cfg.engine)?;
    Ok((meta_for(cfg, &cfg.pattern, topo.kind), stats))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Box<dyn Error>> {
    let cfg = load_config(&args.config, args.seed)?;
    let (meta, stats) = run_one(&cfg)?;
    write_csv(args.out.as_ref(), CSV_HEADER, &[metrics::csv_row(&meta, &stats)])
}

/// The conventional-controller stand-in for a two-block config: a flat
/// crossbar with the same master count and total banks, serving bursts
/// atomically (no beat disassembly), without randomization.
fn matched_flat_baseline(cfg: &RunConfig) -> RunConfig {
    let mut flat = cfg.clone();
    flat.kind = TopologyKind::FlatCrossbar;
    flat.n = 2 * cfg.n;
    flat.k = 2 * cfg.n;
    flat.r = 2;
    flat.speedup_slices = 0;
    flat.directed = false;
    flat.fractal = false;
    flat.engine.burst_atomic = true;
    flat
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Box<dyn Error>> {
    let cfg = load_config(&args.config, args.seed)?;
    if cfg.sweep_rates.is_empty() {
        return Err("sweep requires a non-empty [sweep] rates list".into());
    }
    let mut plans: Vec<RunConfig> = Vec::new();
    for &rate in &cfg.sweep_rates {
        let mut point = cfg.clone();
        point.pattern.injection_rate = rate;
        if cfg.kind == TopologyKind::DsmcTwoBlock {
            plans.push(matched_flat_baseline(&point));
        }
        plans.push(point);
    }
    let results: Vec<Result<(RunMeta, SimStats), String>> = plans
        .par_iter()
        .map(|p| run_one(p).map_err(|e| e.to_string()))
        .collect();

    let mut rows = Vec::new();
    let mut series: Vec<Series> = Vec::new();
    for result in results {
        let (meta, stats) = result?;
        let latency = metrics::average_latency_all(&stats).unwrap_or(f64::NAN);
        let name = meta.topology_kind.clone();
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((meta.injection_rate, latency)),
            None => series.push(Series {
                name,
                points: vec![(meta.injection_rate, latency)],
            }),
        }
        rows.push(metrics::csv_row(&meta, &stats));
    }
    if let Some(svg_path) = &args.svg {
        let svg = line_plot(
            "mean transaction latency vs injection rate",
            "injection rate",
            "latency (cycles)",
            &series,
        );
        fs::write(svg_path, svg)?;
    }
    write_csv(args.out.as_ref(), CSV_HEADER, &rows)
}

fn cmd_compare(args: CompareArgs) -> Result<(), Box<dyn Error>> {
    let cfg_a = load_config(&args.config_a, args.seed)?;
    let cfg_b = load_config(&args.config_b, args.seed)?;
    let patterns = [
        PatternKind::SingleBeat,
        PatternKind::Burst2,
        PatternKind::Burst4,
        PatternKind::Burst8,
        PatternKind::Burst16,
        PatternKind::Mixed,
    ];
    let jobs: Vec<(PatternKind, RunConfig, RunConfig)> = patterns
        .iter()
        .map(|&p| {
            let mut a = cfg_a.clone();
            let mut b = cfg_b.clone();
            a.pattern.kind = p;
            b.pattern.kind = p;
            (p, a, b)
        })
        .collect();
    let results: Vec<Result<(PatternKind, SimStats, SimStats), String>> = jobs
        .par_iter()
        .map(|(p, a, b)| {
            let (_, sa) = run_one(a).map_err(|e| e.to_string())?;
            let (_, sb) = run_one(b).map_err(|e| e.to_string())?;
            Ok((*p, sa, sb))
        })
        .collect();

    let header = ["pattern", "metric", "value_a", "value_b", "relative_delta"];
    let mut rows = Vec::new();
    for result in results {
        let (pattern, sa, sb) = result?;
        let cmp = metrics::compare(&sa, &sb);
        if cmp.config_mismatch {
            eprintln!(
                "warning: {} runs use different measurement shapes; deltas may not be meaningful",
                pattern.name()
            );
        }
        for row in cmp.rows {
            rows.push(vec![
                pattern.name().to_string(),
                row.metric,
                format!("{:.6}", row.value_a),
                format!("{:.6}", row.value_b),
                format!("{:.6}", row.relative_delta),
            ]);
        }
    }
    write_csv(args.out.as_ref(), &header, &rows)
}
