//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when planning fails or a runtime error
//! occurs, 2 on invalid usage.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fdit::{Environment, PlannerConfig, Snapshot};

use crate::error::{BenchError, Result};
use crate::record::{read_records, RunRecord};
use crate::runner::{run_benchmark, run_with_snapshot};
use crate::scenario::build_environment;
use crate::spec::{parse_planner, BenchmarkSpec, Problem, SPEC_SCHEMA_VERSION};
use crate::stats::{compare, format_table, summarize};
use crate::svg::render_svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fdit",
    version,
    about = "Force-directed informed trees: planning, benchmarking and rendering"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the planner once and print a one-line summary.
    Plan(PlanArgs),
    /// Run a benchmark spec, writing JSON-lines records and a summary table.
    Bench(BenchArgs),
    /// Render a planner snapshot as SVG.
    Render(RenderArgs),
    /// Write the default benchmark environments and specs.
    Envgen(EnvgenArgs),
    /// Summarize a JSON-lines record file.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct PlannerFlags {
    /// Planner variant: fdit or spherical.
    #[arg(long, default_value = "fdit")]
    pub planner: String,
    /// Planner time budget in seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub loop_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Environment: dw, rr, free, or a path to an environment file.
    #[arg(long)]
    pub env: String,
    #[arg(long)]
    pub dim: usize,
    #[command(flatten)]
    pub planner: PlannerFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the random-rectangle world.
    #[arg(long, default_value_t = 0)]
    pub world_seed: u64,
    /// Planner configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write a snapshot of the final planner state here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark spec file.
    #[arg(long)]
    pub config: PathBuf,
    /// Record file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the spec's run count.
    #[arg(long)]
    pub runs: Option<u64>,
    /// Override the spec's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Snapshot file written by `plan --out`.
    pub snapshot: PathBuf,
    #[arg(long)]
    pub env: String,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub world_seed: u64,
    /// Projection axes as `i,j`.
    #[arg(long, value_parser = parse_axes, default_value = "0,1")]
    pub axes: (usize, usize),
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnvgenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    pub records: PathBuf,
    #[arg(long, default_value = "spherical")]
    pub baseline: String,
    #[arg(long, default_value = "fdit")]
    pub variant: String,
}

fn parse_axes(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `i,j`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{}", e.render());
                EXIT_OK
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Plan(a) => plan(a, stdout, stderr),
        Command::Bench(a) => bench(a, stdout),
        Command::Render(a) => render(a),
        Command::Envgen(a) => envgen(&a.out, stdout).map(|_| EXIT_OK),
        Command::Summarize(a) => {
            let file = File::open(&a.records).map_err(|e| BenchError::io(&a.records, e))?;
            let records = read_records(BufReader::new(file))?;
            print_summary(&records, &a.baseline, &a.variant, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

fn planner_config(flags: &PlannerFlags, file: Option<&Path>, seed: u64) -> Result<PlannerConfig> {
    let mut cfg = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
            toml::from_str(&text)
                .map_err(|e| BenchError::Spec(format!("{}: {e}", path.display())))?
        }
        None => PlannerConfig::default(),
    };
    cfg.neighbor_mode = parse_planner(&flags.planner)?;
    cfg.seed = seed;
    if let Some(t) = flags.time_budget {
        cfg.time_budget = t;
    }
    if let Some(b) = flags.batch_size {
        cfg.batch_size = b;
    }
    if let Some(g) = flags.gamma_max {
        cfg.gamma_max = g;
    }
    if let Some(l) = flags.loop_cap {
        cfg.loop_cap = l;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn plan(a: PlanArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let cfg = planner_config(&a.planner, a.config.as_deref(), a.seed)?;
    let env = build_environment(&a.env, a.dim, a.world_seed)?;
    let (outcome, snapshot) = run_with_snapshot(&env, &cfg)?;
    let r = RunRecord::from_outcome(&a.planner.planner, &a.env, a.dim, a.seed, &outcome);
    let fmt = |x: f64| {
        if x.is_finite() {
            format!("{x:.6}")
        } else {
            "inf".into()
        }
    };
    writeln!(
        stdout,
        "planner={} env={} dim={} seed={} success={} t_init={} c_init={} c_final={} solutions={} batches={} samples={} elapsed={:.6}",
        r.planner,
        r.env,
        r.dimension,
        r.seed,
        r.success,
        fmt(r.t_init),
        fmt(r.c_init),
        fmt(r.c_final),
        outcome.solutions.len(),
        outcome.stats.batches,
        outcome.stats.samples_drawn,
        outcome.elapsed,
    )?;
    if let Some(path) = &a.out {
        snapshot.save(path)?;
    }
    if r.success {
        Ok(EXIT_OK)
    } else {
        writeln!(stderr, "no solution found within the time budget")?;
        Ok(EXIT_FAILURE)
    }
}

fn bench(a: BenchArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut spec = BenchmarkSpec::load(&a.config)?;
    if let Some(runs) = a.runs {
        spec.runs = runs;
    }
    if let Some(seed) = a.seed {
        spec.base_seed = seed;
    }
    let prepared = spec.prepare(a.config.parent())?;
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let records = match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
            let mut out = BufWriter::new(file);
            let records = run_benchmark(&prepared, threads, &mut out, |_, _| {})?;
            out.flush()?;
            records
        }
        None => run_benchmark(&prepared, threads, &mut *stdout, |_, _| {})?,
    };
    let (baseline, variant) = ("spherical", "fdit");
    print_summary(&records, baseline, variant, stdout)?;
    Ok(EXIT_OK)
}

fn print_summary(
    records: &[RunRecord],
    baseline: &str,
    variant: &str,
    out: &mut dyn Write,
) -> Result<()> {
    let summaries = summarize(records)?;
    let comparisons = compare(&summaries, baseline, variant);
    write!(out, "{}", format_table(&summaries, &comparisons))?;
    Ok(())
}

fn render(a: RenderArgs) -> Result<i32> {
    let env = build_environment(&a.env, a.dim, a.world_seed)?;
    let snapshot = Snapshot::load(&a.snapshot)?;
    let svg = render_svg(&env, &snapshot, a.axes)?;
    std::fs::write(&a.out, svg).map_err(|e| BenchError::io(&a.out, e))?;
    Ok(EXIT_OK)
}

pub const ENVGEN_DIMENSIONS: [usize; 4] = [2, 4, 8, 16];

/// Files written by `envgen`, as `(file name, contents)`.
pub fn default_files() -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    for dim in ENVGEN_DIMENSIONS {
        for id in ["dw", "rr"] {
            let env: Environment = build_environment(id, dim, 0)?;
            files.push((format!("{id}{dim}.toml"), env.to_toml_string()?));
        }
    }
    for (dim, budget) in [(4, 0.3), (8, 0.6)] {
        files.push((
            format!("dw{dim}.spec.toml"),
            default_spec(dim, budget).to_toml_string(),
        ));
    }
    Ok(files)
}

/// The dividing-wall benchmark: 100 runs of each planner.
pub fn default_spec(dim: usize, time_budget: f64) -> BenchmarkSpec {
    BenchmarkSpec {
        schema_version: SPEC_SCHEMA_VERSION,
        name: format!("dw{dim}"),
        runs: 100,
        base_seed: 0,
        planners: vec!["spherical".into(), "fdit".into()],
        planner: None,
        problems: vec![Problem {
            env: "dw".into(),
            dimension: dim,
            time_budget,
            world_seed: 0,
        }],
    }
}

fn envgen(dir: &Path, stdout: &mut dyn Write) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    for (name, contents) in default_files()? {
        let path = dir.join(&name);
        std::fs::write(&path, contents).map_err(|e| BenchError::io(&path, e))?;
        writeln!(stdout, "{}", path.display())?;
    }
    Ok(())
}
