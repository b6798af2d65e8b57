//! `runoff`: exact solutions, simulation and verification for runoff on
//! random drainage trees.

mod config;
mod figures;
mod output;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use runoff_core::analytics::{self, json_number, Regime};
use runoff_core::general::{self, example1_phase_grid};
use runoff_core::lattice::{bottom_row_stats, encode_pgm, render_grayscale, simulate_lattice};
use runoff_core::montecarlo::{self, McReport};
use runoff_core::tree::{sample_bgw, sample_diamond_tree, tree_stats};
use runoff_core::{BinaryParams, LatticeParams, RngStream, SampleCaps, XLaw};

use output::{csv_num, write_json, CliResult, Failure, Sink};

#[derive(Debug, Parser, Serialize)]
#[command(name = "runoff", version, about = "Runoff on random drainage trees")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Write the resolved configuration as JSON to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// JSON file whose keys mirror the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Exact solution for two-point X.
    Exact(ExactArgs),
    /// Exact solution at beta = 1/2 for a general law of X.
    ExactGeneral(ExactGeneralArgs),
    /// Simulate the hill-slope lattice.
    Lattice(LatticeArgs),
    /// Sample drainage trees and report their sizes.
    Trees(TreesArgs),
    /// Compare Monte Carlo estimates with the exact solution.
    Verify(VerifyArgs),
    /// Regime of every point of the Example 1 family.
    Phase(PhaseArgs),
    /// Write the data behind figures 1, 3, 4 and 6.
    Figures(FiguresArgs),
}

#[derive(Debug, Args, Serialize)]
struct ExactArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    /// Emit JSON to this path, or stdout when given without a value.
    #[arg(long, num_args = 0..=1, default_missing_value = "-")]
    json: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct ExactGeneralArgs {
    /// Law of X as a JSON object, e.g. '{"-1":0.6,"0":0.3,"1":0.1}'.
    #[arg(long = "x-pmf")]
    x_pmf: String,
    #[arg(long, num_args = 0..=1, default_missing_value = "-")]
    json: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct LatticeArgs {
    /// Rows, counted down the slope.
    #[arg(long)]
    m: usize,
    /// Columns.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    delta: f64,
    /// PGM image of the runoff field.
    #[arg(long, default_value = "-")]
    out: String,
    /// CSV of bottom-row statistics.
    #[arg(long)]
    stats: Option<String>,
    /// Extra realisations for the statistics CSV, with seeds seed, seed + 1, ...
    #[arg(long, default_value_t = 1)]
    replicates: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TreeKind {
    Bgw,
    Diamond,
}

#[derive(Debug, Args, Serialize)]
struct CapsArgs {
    #[arg(long = "max-nodes", default_value_t = SampleCaps::default().max_nodes)]
    max_nodes: u64,
    #[arg(long = "max-height", default_value_t = SampleCaps::default().max_height)]
    max_height: u64,
}

impl CapsArgs {
    fn caps(&self) -> CliResult<SampleCaps> {
        Ok(SampleCaps::new(self.max_nodes, self.max_height)?)
    }
}

#[derive(Debug, Args, Serialize)]
struct TreesArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    count: u64,
    #[arg(long, value_enum, default_value_t = TreeKind::Bgw)]
    kind: TreeKind,
    #[command(flatten)]
    caps: CapsArgs,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 100_000)]
    replicates: u64,
    #[command(flatten)]
    caps: CapsArgs,
    /// Report path, stdout by default.
    #[arg(long, default_value = "-")]
    json: String,
    /// Per-replicate CSV.
    #[arg(long)]
    csv: Option<String>,
    /// Support size for the fixed-point pmf oracle.
    #[arg(long = "n-max", default_value_t = 2000)]
    n_max: usize,
    /// Fixed-point iterations.
    #[arg(long, default_value_t = 500)]
    iters: usize,
}

#[derive(Debug, Args, Serialize)]
struct PhaseArgs {
    #[arg(long, default_value_t = 0.005)]
    step: f64,
    #[arg(long, default_value = "-")]
    out: String,
    /// CSV of points on the critical curve.
    #[arg(long)]
    curve: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct FiguresArgs {
    #[arg(long = "out-dir", default_value = "figures")]
    out_dir: PathBuf,
    /// Grid step for the phase diagram.
    #[arg(long, default_value_t = 0.005)]
    step: f64,
}

fn exact_text(s: &analytics::ExactSolution) -> String {
    let v = s.to_json_value();
    let mut out = String::new();
    for key in [
        "regime",
        "alpha_c",
        "p0",
        "expected_w",
        "t0",
        "tail_exponent",
        "tail_constant",
    ] {
        let shown = match &v[key] {
            Value::String(s) => s.clone(),
            Value::Null => "-".into(),
            other => other.to_string(),
        };
        out.push_str(&format!("{key:<14}{shown}\n"));
    }
    out
}

fn run_exact(a: &ExactArgs) -> CliResult<()> {
    let json = a.json.as_deref().map(Sink::parse);
    if let Some(s) = &json {
        s.check("json")?;
    }
    let p = BinaryParams::new(a.alpha, a.beta)?;
    let s = analytics::solve(&p)?;
    match json {
        Some(sink) => write_json(&sink, &s.to_json_value()),
        None => Sink::Stdout.write_all(exact_text(&s).as_bytes()),
    }
}

fn run_exact_general(a: &ExactGeneralArgs) -> CliResult<()> {
    let json = a.json.as_deref().map(Sink::parse);
    if let Some(s) = &json {
        s.check("json")?;
    }
    let map: BTreeMap<String, f64> =
        serde_json::from_str(&a.x_pmf).map_err(|e| Failure::validation("x-pmf", e))?;
    let law = XLaw::from_string_map(&map)?;
    let s = general::solve_general(&law)?;
    let v = json!({
        "regime": s.regime.as_str(),
        "m": json_number(s.m),
        "var_x": json_number(s.var_x),
        "alpha": json_number(s.alpha),
        "p0": json_number(s.p0),
        "expected_w": json_number(s.expected_w),
        "t0": json_number(s.t0),
        "h_at_t0": json_number(s.h_at_t0),
        "h_at_one": json_number(s.h_at_one),
        "hprime1": json_number(s.hprime1),
        "tail_exponent": s.tail.exponent().map_or(Value::Null, json_number),
        "tail_constant": s.tail.constant().map_or(Value::Null, json_number),
    });
    match json {
        Some(sink) => write_json(&sink, &v),
        None => {
            let mut text = String::new();
            for (k, val) in v.as_object().expect("object") {
                text.push_str(&format!("{k:<14}{}\n", val.as_str().map_or(val.to_string(), String::from)));
            }
            Sink::Stdout.write_all(text.as_bytes())
        }
    }
}

fn run_lattice(a: &LatticeArgs, seed: u64) -> CliResult<()> {
    let out = Sink::parse(&a.out);
    out.check("out")?;
    let stats = a.stats.as_deref().map(Sink::parse);
    if let Some(s) = &stats {
        s.check("stats")?;
    }
    if a.replicates == 0 {
        return Err(Failure::validation("replicates", "need at least one"));
    }
    let params = |s: u64| LatticeParams::new(a.m, a.n, a.rho, a.delta, RngStream::new(s, 0));
    let first = params(seed)?;
    let field = simulate_lattice(&first)?;
    let mut rows = vec![stats_row(seed, &first, &field)];
    for k in 1..a.replicates {
        let p = params(seed.wrapping_add(k))?;
        rows.push(stats_row(p.seed.master_seed, &p, &simulate_lattice(&p)?));
    }
    out.write_all(&encode_pgm(a.n, a.m, &render_grayscale(&field)))?;
    if let Some(s) = stats {
        let mut text = format!("{}\n", figures::stats_header());
        for r in rows {
            text.push_str(&r);
            text.push('\n');
        }
        s.write_all(text.as_bytes())?;
    }
    Ok(())
}

fn stats_row(seed: u64, p: &LatticeParams, f: &runoff_core::LatticeField) -> String {
    let s = bottom_row_stats(f);
    format!(
        "{seed},{},{},{},{},{},{},{}",
        p.m,
        p.n,
        csv_num(p.rho),
        csv_num(p.delta),
        csv_num(s.wet_fraction),
        csv_num(s.mean_runoff),
        csv_num(s.max_runoff)
    )
}

fn run_trees(a: &TreesArgs, seed: u64) -> CliResult<()> {
    let out = Sink::parse(&a.out);
    out.check("out")?;
    let caps = a.caps.caps()?;
    let p = BinaryParams::new(0.0, a.beta)?;
    let rows: Vec<String> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let stream = RngStream::new(seed, i);
            let t = match a.kind {
                TreeKind::Bgw => sample_bgw(&p, stream, caps)?,
                TreeKind::Diamond => sample_diamond_tree(a.beta, stream, caps)?,
            };
            let s = tree_stats(t.get());
            Ok(format!("{i},{},{},{}", s.n_nodes, s.height, t.is_truncated()))
        })
        .collect::<runoff_core::Result<_>>()?;
    let mut w = out.writer()?;
    writeln!(w, "replicate,n_nodes,height,truncated")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

fn verify_json(r: &McReport, oracle: Option<&montecarlo::WPmf>) -> CliResult<Value> {
    let mut v = serde_json::to_value(r)?;
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("exact".into(), r.exact.to_json_value());
    obj.insert(
        "pmf_oracle".into(),
        match oracle {
            Some(pmf) => json!({
                "n_max": pmf.n_max(),
                "iterations": pmf.iterations,
                "p0": json_number(pmf.p0()),
                "mean": json_number(pmf.mean()),
                "deficit": json_number(pmf.deficit),
            }),
            None => Value::Null,
        },
    );
    Ok(v)
}

fn run_verify(a: &VerifyArgs, seed: u64) -> CliResult<()> {
    let json = Sink::parse(&a.json);
    json.check("json")?;
    let csv = a.csv.as_deref().map(Sink::parse);
    if let Some(s) = &csv {
        s.check("csv")?;
    }
    let p = BinaryParams::new(a.alpha, a.beta)?;
    let (report, samples) = montecarlo::estimate(&p, a.replicates, a.caps.caps()?, seed)?;
    let oracle = if report.exact.regime == Regime::Supercritical {
        None
    } else {
        Some(montecarlo::pmf_fixed_point(&p, a.n_max, a.iters)?)
    };
    if let Some(sink) = csv {
        let mut w = sink.writer()?;
        writeln!(w, "replicate,n_nodes,height,w0,contrib_height,truncated")?;
        for (i, s) in samples.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{}",
                s.n_nodes, s.height, s.w0, s.contrib_height, s.truncated
            )?;
        }
        w.flush()?;
    }
    write_json(&json, &verify_json(&report, oracle.as_ref())?)
}

fn run_phase(a: &PhaseArgs) -> CliResult<()> {
    let out = Sink::parse(&a.out);
    out.check("out")?;
    let curve = a.curve.as_deref().map(Sink::parse);
    if let Some(s) = &curve {
        s.check("curve")?;
    }
    let grid = example1_phase_grid(a.step)?;
    let mut text = String::from("a,b,hprime1,regime\n");
    for r in figures::phase_rows(&grid) {
        text.push_str(&r);
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    if let Some(s) = curve {
        let mut text = String::from("a,b\n");
        for r in figures::curve_rows(&grid) {
            text.push_str(&r);
            text.push('\n');
        }
        s.write_all(text.as_bytes())?;
    }
    Ok(())
}

fn run_figures(a: &FiguresArgs, seed: u64) -> CliResult<()> {
    output::check_dir("out-dir", &a.out_dir)?;
    let mut artifacts = figures::fig1(seed)?;
    artifacts.push(figures::fig3()?);
    artifacts.push(figures::fig4()?);
    artifacts.extend(figures::fig6(a.step)?);
    for art in artifacts {
        Sink::File(a.out_dir.join(&art.name)).write_all(&art.bytes)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(path) = &cli.manifest {
        let sink = Sink::File(path.clone());
        sink.check("manifest")?;
        let mut v = serde_json::to_value(cli)?;
        v["version"] = json!(env!("CARGO_PKG_VERSION"));
        write_json(&sink, &v)?;
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::other(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Exact(a) => run_exact(a),
        Command::ExactGeneral(a) => run_exact_general(a),
        Command::Lattice(a) => run_lattice(a, cli.seed),
        Command::Trees(a) => run_trees(a, cli.seed),
        Command::Verify(a) => run_verify(a, cli.seed),
        Command::Phase(a) => run_phase(a),
        Command::Figures(a) => run_figures(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect()) {
        Ok(args) => args,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return ExitCode::from(f.code);
        }
    };
    let cli = Cli::parse_from(args);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
