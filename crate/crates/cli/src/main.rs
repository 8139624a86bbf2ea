// SPDX-License-Identifier: Apache-2.0
//! `nandvmm`: design-space exploration, Monte-Carlo simulation, mapping and
//! system estimation from one reproducible configuration.
//!
//! Exit codes: 0 ok, 1 usage, 2 data or format, 3 capacity, 4 numerical.

mod config;
mod output;
mod units;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nandvmm::arch::{cap_sharing_transform, CostCatalog};
use nandvmm::graph::{self, NetworkGraph};
use nandvmm::mapper::ReshapeMode;
use nandvmm::mc::{self, NoiseFreeErrorTable};
use nandvmm::perf::{self, Deviation};
use nandvmm::vmm::VmmDesignPoint;
use nandvmm::{data, pipeline, Error};
use serde::Serialize;

use config::{Format, RunConfig};
use output::{num, Writer};

#[derive(Parser)]
#[command(name = "nandvmm", version, about = "Time-domain 3D-NAND VMM simulator and system estimator")]
struct Cli {
    /// JSON config file, or an output file of an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Reference row to compare an estimate against (e.g. table2-baseline).
    #[arg(long, global = true)]
    reference: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design-space table with error budget and bit precision per column.
    Explore(ExploreArgs),
    /// Monte-Carlo simulation of one random differential VMM.
    Simulate(SimulateArgs),
    /// Pack a graph's kernels into memory layers.
    Map(GraphArgs),
    /// Processing order and peak main-memory use of a graph.
    AnalyzeGraph(GraphArgs),
    /// Energy, latency, area and efficiency of one inference.
    Estimate(GraphArgs),
    /// Estimate a graph and report deviations from reference rows.
    Compare(GraphArgs),
}

#[derive(Args)]
struct ExploreArgs {
    /// Comma list of T_int:I_max pairs, e.g. 16ns:300nA,32ns:100nA.
    #[arg(long)]
    columns: Option<String>,
    /// Comma list of dot-product sizes.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    target_bits: Option<u32>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    t_int: Option<String>,
    #[arg(long)]
    i_max: Option<String>,
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma list of noise, coupling, dibl, variation; or all, none.
    #[arg(long)]
    flags: Option<String>,
}

#[derive(Args)]
struct GraphArgs {
    /// Shipped benchmark name or graph JSON path.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    cap_sharing: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    catalog: Option<String>,
    /// Word-line layer-selection latency, e.g. 25ns.
    #[arg(long)]
    t_ls: Option<String>,
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                Error::Domain(_) | Error::Range(_) | Error::Config(_) | Error::Contract(_) => 1,
                Error::Format(_) | Error::Io(_) | Error::Json(_) => 2,
                Error::Capacity { .. } => 3,
                Error::Numerical(_) => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nandvmm: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(r) = &cli.reference {
        cfg.reference = Some(r.clone());
    }
    let name = match &cli.command {
        Command::Explore(a) => {
            apply_explore(&mut cfg, a)?;
            "explore"
        }
        Command::Simulate(a) => {
            apply_simulate(&mut cfg, a)?;
            "simulate"
        }
        Command::Map(a) | Command::AnalyzeGraph(a) | Command::Estimate(a) | Command::Compare(a) => {
            apply_graph(&mut cfg, a)?;
            match cli.command {
                Command::Map(_) => "map",
                Command::AnalyzeGraph(_) => "analyze-graph",
                Command::Estimate(_) => "estimate",
                _ => "compare",
            }
        }
    };
    cfg.pack.seed = cfg.seed;
    let mut w = Writer::new(&cli.out, name, &cfg)?;
    match name {
        "explore" => cmd_explore(&cfg, &mut w)?,
        "simulate" => cmd_simulate(&cfg, &mut w)?,
        "map" => cmd_map(&cfg, &mut w)?,
        "analyze-graph" => cmd_analyze(&cfg, &mut w)?,
        "estimate" => cmd_estimate(&cfg, &mut w)?,
        _ => cmd_compare(&cfg, &mut w)?,
    }
    Ok(w.written)
}

fn list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().or_else(|_| usage(format!("bad {what} {s:?}"))))
        .collect()
}

fn quantity(text: &str, unit: &str) -> CliResult<f64> {
    units::parse_quantity(text, unit).map_err(CliError::Usage)
}

fn apply_explore(cfg: &mut RunConfig, a: &ExploreArgs) -> CliResult<()> {
    if let Some(c) = &a.columns {
        cfg.explore.columns = units::parse_columns(c).map_err(CliError::Usage)?;
    }
    if let Some(s) = &a.sizes {
        cfg.explore.sizes = list(s, "size")?;
    }
    if let Some(b) = a.target_bits {
        cfg.explore.target_bits = b;
    }
    if cfg.explore.columns.is_empty() {
        return usage("no design-space columns given");
    }
    if cfg.explore.sizes.is_empty() || cfg.explore.sizes.contains(&0) {
        return usage("sizes must be a non-empty list of positive integers");
    }
    Ok(())
}

fn apply_simulate(cfg: &mut RunConfig, a: &SimulateArgs) -> CliResult<()> {
    let s = &mut cfg.simulate;
    if let Some(v) = a.rows {
        s.rows = v;
    }
    if let Some(v) = a.cols {
        s.cols = v;
    }
    if let Some(v) = &a.t_int {
        s.t_int = quantity(v, "s")?;
    }
    if let Some(v) = &a.i_max {
        s.i_max = quantity(v, "A")?;
    }
    if let Some(v) = a.layer {
        s.layer = v;
    }
    if let Some(v) = a.trials {
        s.trials = v;
    }
    if let Some(f) = &a.flags {
        s.set_flags(f).map_err(CliError::Usage)?;
    }
    if s.rows == 0 || s.cols == 0 || s.trials == 0 {
        return usage("rows, cols and trials must be >= 1");
    }
    if s.layer >= s.device.string.layers {
        return usage(format!("layer {} outside a {}-layer string", s.layer, s.device.string.layers));
    }
    Ok(())
}

fn apply_graph(cfg: &mut RunConfig, a: &GraphArgs) -> CliResult<()> {
    if let Some(g) = &a.graph {
        cfg.graph = g.clone();
    }
    if let Some(s) = a.cap_sharing {
        cfg.arch = cap_sharing_transform(&cfg.arch, s)?;
    }
    if let Some(i) = a.iterations {
        cfg.pack.iterations = i;
    }
    if let Some(m) = &a.mode {
        cfg.mode = match m.as_str() {
            "row-first" => ReshapeMode::RowFirst,
            "column-first" => ReshapeMode::ColumnFirst,
            other => return usage(format!("unknown reshape mode {other:?}")),
        };
    }
    if let Some(c) = &a.catalog {
        cfg.catalog = Some(c.clone());
    }
    if let Some(t) = &a.t_ls {
        cfg.arch.t_ls = quantity(t, "s")?;
    }
    if cfg.graph.is_empty() {
        return usage("no graph given");
    }
    Ok(())
}

fn load_graph(cfg: &RunConfig) -> CliResult<NetworkGraph> {
    if data::graph_names().any(|n| n == cfg.graph) {
        return Ok(data::graph(&cfg.graph)?);
    }
    let p = Path::new(&cfg.graph);
    if !p.exists() {
        let known: Vec<&str> = data::graph_names().collect();
        return usage(format!("graph {:?} is neither a file nor one of {}", cfg.graph, known.join(", ")));
    }
    Ok(graph::load_graph(p)?)
}

fn load_catalog(cfg: &RunConfig) -> CliResult<CostCatalog> {
    match &cfg.catalog {
        None => Ok(data::calibrated_catalog()),
        Some(p) => {
            let c = CostCatalog::from_json(&std::fs::read_to_string(p).map_err(Error::from)?)?;
            c.validate()?;
            Ok(c)
        }
    }
}

#[derive(Serialize)]
struct ExploreResult<'a> {
    rows: &'a [mc::DesignSpaceRow],
    colors: Vec<Vec<&'static str>>,
    target_bits: u32,
    /// `(T_int, I_max)` of the cheapest column reaching the target everywhere.
    optimal: Option<(f64, f64)>,
}

fn cmd_explore(cfg: &RunConfig, w: &mut Writer) -> CliResult<()> {
    let e = &cfg.explore;
    let table = e.noise_free.clone().unwrap_or_else(NoiseFreeErrorTable::shipped);
    let rows = mc::explore_design_space(&e.columns, &table, &e.sizes).map_err(|err| match err {
        Error::Config(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    let optimal = mc::optimal_point(&rows, e.target_bits);
    match cfg.format {
        Format::Json => {
            let colors = rows
                .iter()
                .map(|r| r.sizes.iter().map(|s| mc::bit_color(s.bits)).collect())
                .collect();
            w.json(
                "explore",
                &ExploreResult {
                    rows: &rows,
                    colors,
                    target_bits: e.target_bits,
                    optimal,
                },
            )?;
        }
        Format::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .flat_map(|r| {
                    r.sizes.iter().map(move |s| {
                        vec![
                            num(r.t_int),
                            num(r.i_max),
                            num(r.c0),
                            num(r.dv_cp_max),
                            num(r.alpha_cp),
                            num(r.t_out),
                            num(r.snr_cell_db),
                            num(r.e3sigma_cell_pct),
                            num(r.e_nf_pct),
                            s.m.to_string(),
                            num(s.e_final_pct),
                            s.bits.to_string(),
                            mc::bit_color(s.bits).to_owned(),
                            (optimal == Some((r.t_int, r.i_max))).to_string(),
                        ]
                    })
                })
                .collect();
            w.csv(
                "explore",
                &[
                    "t_int_s", "i_max_a", "c0_f", "dv_cp_max_v", "alpha_cp", "t_out_s", "snr_cell_db",
                    "e3sigma_cell_pct", "e_nf_pct", "m", "e_final_pct", "bits", "color", "optimal",
                ],
                &table,
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateResult<'a> {
    summary: &'a mc::SimSummary,
    /// Output bits implied by the worst trial error.
    p0: String,
}

fn cmd_simulate(cfg: &RunConfig, w: &mut Writer) -> CliResult<()> {
    let s = &cfg.simulate;
    let dp = VmmDesignPoint::new(s.t_int, s.i_max)?;
    let (ws, x) = mc::random_instance(s.rows, s.cols, cfg.seed)?;
    let r = mc::simulate_vmm(&ws, &x, &dp, s.layer, &s.flags(cfg.seed), &s.device)?;
    let sum = &r.summary;
    if sum.overflow_warning {
        eprintln!("warning: {:.3}% of outputs clipped at T_out", 100.0 * sum.overflow_rate);
    }
    match cfg.format {
        Format::Json => w.json(
            "simulate",
            &SimulateResult {
                summary: sum,
                p0: sum.bits.to_string(),
            },
        )?,
        Format::Csv => {
            let kv = [
                ("trials", sum.trials.to_string()),
                ("outputs", sum.outputs.to_string()),
                ("max_error", num(sum.max_error)),
                ("mean_max_error", num(sum.mean_max_error)),
                ("error_mean", num(sum.error_mean)),
                ("error_std", num(sum.error_std)),
                ("error_3sigma", num(sum.error_3sigma)),
                ("predicted_noise_3sigma", num(sum.predicted_noise_3sigma)),
                ("overflow_rate", num(sum.overflow_rate)),
                ("p0", sum.bits.to_string()),
            ];
            let rows: Vec<Vec<String>> = kv.into_iter().map(|(k, v)| vec![k.to_owned(), v]).collect();
            w.csv("simulate", &["metric", "value"], &rows)?;
            let h = &sum.max_error_histogram;
            let width = (h.hi - h.lo) / h.counts.len() as f64;
            let rows: Vec<Vec<String>> = h
                .counts
                .iter()
                .enumerate()
                .map(|(i, c)| vec![num(h.lo + i as f64 * width), num(h.lo + (i + 1) as f64 * width), c.to_string()])
                .collect();
            w.csv("simulate_histogram", &["lo", "hi", "count"], &rows)?;
        }
    }
    println!("p0 = {} (max error {:.4})", sum.bits, sum.max_error);
    Ok(())
}

#[derive(Serialize)]
struct MapResult<'a> {
    layers_used: usize,
    layers_available: usize,
    weight_capacity: usize,
    kernels: Vec<KernelSummary<'a>>,
    placement: &'a nandvmm::mapper::Placement,
}

#[derive(Serialize)]
struct KernelSummary<'a> {
    id: &'a str,
    rows_q: usize,
    cols_q: usize,
    tiles: usize,
    pieces: usize,
}

fn cmd_map(cfg: &RunConfig, w: &mut Writer) -> CliResult<()> {
    let g = load_graph(cfg)?;
    let proc = nandvmm::arch::build_processor(cfg.arch)?;
    let mapped = pipeline::map_graph(&g, &proc, cfg.mode, &cfg.pack)?;
    let p = &mapped.placement;
    let kernels: Vec<KernelSummary> = mapped
        .tile_sets
        .iter()
        .map(|t| KernelSummary {
            id: t.id(),
            rows_q: t.rows_q,
            cols_q: t.cols_q,
            tiles: t.tiles(),
            pieces: t.pieces.len(),
        })
        .collect();
    match cfg.format {
        Format::Json => w.json(
            "placement",
            &MapResult {
                layers_used: p.layers_used,
                layers_available: proc.mapping_layers(),
                weight_capacity: proc.weight_capacity(),
                kernels,
                placement: p,
            },
        )?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = p
                .pieces
                .iter()
                .map(|pp| {
                    vec![
                        p.kernel_ids[pp.kernel].clone(),
                        pp.piece.to_string(),
                        pp.layer.to_string(),
                        pp.row.to_string(),
                        pp.col.to_string(),
                        pp.row_tiles.to_string(),
                        pp.col_tiles.to_string(),
                    ]
                })
                .collect();
            w.csv("placement", &["kernel", "piece", "layer", "row", "col", "row_tiles", "col_tiles"], &rows)?;
        }
    }
    for layer in 0..p.layers_used {
        let grid: Vec<Vec<String>> = p
            .occupancy(layer)
            .into_iter()
            .map(|r| r.into_iter().map(|c| c.map_or(String::new(), |k| k.to_string())).collect())
            .collect();
        let header: Vec<String> = (0..p.grid.cols).map(|c| format!("c{c}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        w.csv(&format!("occupancy/layer_{layer:03}"), &header, &grid)?;
    }
    println!("{}: {} of {} layers used", g.name, p.layers_used, proc.mapping_layers());
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeResult {
    name: String,
    nodes: usize,
    edges: usize,
    weights: u64,
    macs: u64,
    kinds: std::collections::BTreeMap<String, usize>,
    peak_bytes: u64,
    mm_bytes: usize,
    fits_mm: bool,
    order: Vec<String>,
    live_bytes: Vec<u64>,
}

fn cmd_analyze(cfg: &RunConfig, w: &mut Writer) -> CliResult<()> {
    let g = load_graph(cfg)?;
    let order = graph::processing_order(&g)?;
    let prof = graph::memory_profile(&g, &order)?;
    let res = AnalyzeResult {
        name: g.name.clone(),
        nodes: g.nodes.len(),
        edges: g.edges.len(),
        weights: g.total_weights(),
        macs: g.total_macs(),
        kinds: graph::kind_histogram(&g),
        peak_bytes: prof.peak,
        mm_bytes: cfg.arch.mm_bytes,
        fits_mm: prof.peak <= cfg.arch.mm_bytes as u64,
        order: order.iter().map(|&i| g.nodes[i].id.clone()).collect(),
        live_bytes: prof.live.clone(),
    };
    match cfg.format {
        Format::Json => w.json("graph_analysis", &res)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = res
                .order
                .iter()
                .zip(&res.live_bytes)
                .enumerate()
                .map(|(i, (id, b))| vec![i.to_string(), id.clone(), b.to_string()])
                .collect();
            w.csv("graph_analysis", &["step", "node", "live_bytes"], &rows)?;
        }
    }
    println!(
        "{}: {} nodes, {} weights, peak {} bytes of {} MM",
        res.name, res.nodes, res.weights, res.peak_bytes, res.mm_bytes
    );
    Ok(())
}

#[derive(Serialize)]
struct EstimateResult<'a> {
    graph: &'a str,
    layers_used: usize,
    report: &'a perf::PerfReport,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    comparisons: &'a [Comparison],
}

#[derive(Serialize)]
struct Comparison {
    reference: String,
    tolerance: f64,
    deviations: Vec<Deviation>,
}

fn comparisons(cfg: &RunConfig, report: &perf::PerfReport, all: bool) -> CliResult<Vec<Comparison>> {
    let table = data::reference_table();
    let names: Vec<String> = match &cfg.reference {
        Some(r) => r.split(',').map(|s| s.trim().to_owned()).collect(),
        None if all => table.rows.iter().map(|r| r.name.clone()).collect(),
        None => Vec::new(),
    };
    names
        .iter()
        .map(|n| {
            let row = table.get(n).map_err(|e| match e {
                Error::Config(m) => CliError::Usage(m),
                other => other.into(),
            })?;
            Ok(Comparison {
                reference: row.name.clone(),
                tolerance: row.tolerance,
                deviations: perf::compare_reference(report, row),
            })
        })
        .collect()
}

fn print_comparisons(cs: &[Comparison]) {
    for c in cs {
        for d in &c.deviations {
            println!(
                "{:<16} {:<16} ref {:>10.4} got {:>10.4} ({:+.1}%) {}",
                c.reference,
                d.metric,
                d.reference,
                d.value,
                100.0 * d.relative,
                if d.within { "ok" } else { "OUT" }
            );
        }
    }
}

fn deviation_rows(cs: &[Comparison]) -> Vec<Vec<String>> {
    cs.iter()
        .flat_map(|c| {
            c.deviations.iter().map(move |d| {
                vec![
                    c.reference.clone(),
                    d.metric.clone(),
                    num(d.reference),
                    num(d.value),
                    num(d.relative),
                    d.within.to_string(),
                ]
            })
        })
        .collect()
}

const DEVIATION_HEADER: [&str; 6] = ["reference", "metric", "reference_value", "value", "relative", "within"];

fn run_estimate(cfg: &RunConfig) -> CliResult<(NetworkGraph, pipeline::Estimate)> {
    let g = load_graph(cfg)?;
    let cat = load_catalog(cfg)?;
    let e = pipeline::estimate_graph(&g, cfg.arch, &cat, cfg.mode, &cfg.pack)?;
    Ok((g, e))
}

fn cmd_estimate(cfg: &RunConfig, w: &mut Writer) -> CliResult<()> {
    let (g, e) = run_estimate(cfg)?;
    let r = &e.report;
    let comps = comparisons(cfg, r, false)?;
    match cfg.format {
        Format::Json => w.json(
            "report",
            &EstimateResult {
                graph: &g.name,
                layers_used: e.mapped.placement.layers_used,
                report: r,
                comparisons: &comps,
            },
        )?,
        Format::Csv => {
            let mut rows = vec![
                vec!["energy_j".into(), num(r.energy_j)],
                vec!["latency_s".into(), num(r.latency_s)],
                vec!["ops".into(), num(r.ops)],
                vec!["throughput_tops".into(), num(r.throughput_tops)],
                vec!["peak_throughput_tops".into(), num(r.peak_throughput_tops)],
                vec!["power_w".into(), num(r.power_w)],
                vec!["area_mm2".into(), num(r.area_mm2)],
                vec!["ee_tops_per_j".into(), num(r.ee_tops_per_j)],
                vec!["se_mb_per_mm2".into(), num(r.se_mb_per_mm2)],
                vec!["ce_tops_per_s_mm2".into(), num(r.ce_tops_per_s_mm2)],
                vec!["layers_used".into(), e.mapped.placement.layers_used.to_string()],
            ];
            rows.extend(r.energy_breakdown_j.iter().map(|(k, v)| vec![format!("energy_j.{k}"), num(*v)]));
            rows.extend(r.area_breakdown_mm2.iter().map(|(k, v)| vec![format!("area_mm2.{k}"), num(*v)]));
            w.csv("report", &["metric", "value"], &rows)?;
            if !comps.is_empty() {
                w.csv("deviations", &DEVIATION_HEADER, &deviation_rows(&comps))?;
            }
        }
    }
    println!(
        "{}: {:.3} mm2, {:.4} W, {:.3} TOps/s, {:.3} MB/mm2, {:.3} TOps/J",
        g.name, r.area_mm2, r.power_w, r.throughput_tops, r.se_mb_per_mm2, r.ee_tops_per_j
    );
    print_comparisons(&comps);
    Ok(())
}

fn cmd_compare(cfg: &RunConfig, w: &mut Writer) -> CliResult<()> {
    let (_, e) = run_estimate(cfg)?;
    let comps = comparisons(cfg, &e.report, true)?;
    match cfg.format {
        Format::Json => w.json("compare", &comps)?,
        Format::Csv => w.csv("compare", &DEVIATION_HEADER, &deviation_rows(&comps))?,
    }
    print_comparisons(&comps);
    Ok(())
}
