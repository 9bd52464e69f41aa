//! The `myogrid` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::catalog;
use crate::checker::{check_range, CheckReport, Verdict};
use crate::dsl::{lint_rules, parse_algorithm, render_algorithm, AlgorithmSpec};
use crate::engine::{Engine, SchedulerPolicy, SynchronyModel, Trace, TraceJson};
use crate::error::{Error, Result};
use crate::grid::{Color, ColorBag, Configuration, Grid};

#[derive(Parser, Debug)]
#[command(name = "myogrid", version, about = "Simulate and verify grid exploration by myopic luminous robots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Execute one trace.
    Run(RunArgs),
    /// Exhaustively check one grid or a range of grids.
    Check(CheckArgs),
    /// Draw a trace JSON file as ASCII frames.
    Render(RenderArgs),
    /// Replace one color by a multiset of colors and write the result.
    Transform(TransformArgs),
    /// Summarise the bundled algorithms.
    List(ListArgs),
    /// Report overlapping or unsatisfiable rules.
    Lint(LintArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Ascii,
    Text,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    RoundRobin,
    Random,
    First,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Catalog name or path to an algorithm file.
    #[arg(long)]
    pub algo: String,
    /// Grid size, `MxN`.
    #[arg(long)]
    pub grid: String,
    /// Defaults to the model the algorithm is written for.
    #[arg(long, value_parser = parse_model)]
    pub model: Option<SynchronyModel>,
    #[arg(long, value_enum, default_value = "round-robin")]
    pub scheduler: Policy,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub algo: String,
    /// `MxN` or an inclusive range `MxN..MxN`.
    #[arg(long)]
    pub grid: String,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<SynchronyModel>,
    /// Worker threads for ranges; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Trace JSON as written by `run --format json`.
    pub trace: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long)]
    pub algo: String,
    /// Color to replace.
    #[arg(long)]
    pub from: char,
    /// Replacement multiset, e.g. `GG`.
    #[arg(long)]
    pub into: String,
    /// Name of the derived algorithm.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ListArgs {
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct LintArgs {
    #[arg(long)]
    pub algo: String,
}

fn parse_model(s: &str) -> std::result::Result<SynchronyModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `MxN` into a grid.
pub fn parse_grid(s: &str) -> Result<Grid> {
    let (m, n) = s
        .trim()
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Usage(format!("grid `{s}` is not of the form MxN")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Usage(format!("grid `{s}` is not of the form MxN")))
    };
    Grid::new(num(m)?, num(n)?)
}

/// Parses `MxN` or `MxN..MxN` into inclusive row and column ranges.
pub fn parse_grid_range(s: &str) -> Result<(std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>)> {
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (parse_grid(lo)?, parse_grid(hi)?),
        None => {
            let g = parse_grid(s)?;
            (g, g)
        }
    };
    if lo.rows() > hi.rows() || lo.cols() > hi.cols() {
        return Err(Error::Usage(format!("empty grid range `{s}`")));
    }
    Ok((lo.rows()..=hi.rows(), lo.cols()..=hi.cols()))
}

/// Loads `--algo`: a path if it names an existing file, else a catalog entry.
/// Also returns the model the algorithm is written for.
pub fn load_algorithm(algo: &str) -> Result<(AlgorithmSpec, SynchronyModel)> {
    let path = Path::new(algo);
    if path.is_file() {
        let spec = parse_algorithm(&std::fs::read_to_string(path)?)?;
        let model = if spec.name.starts_with('F') {
            SynchronyModel::Fsync
        } else {
            SynchronyModel::Async
        };
        return Ok((spec, model));
    }
    let entry = catalog::get(algo)?;
    Ok((entry.spec, entry.row.synchrony))
}

/// One frame: `.` for empty nodes, the color for a single robot,
/// `[..]` around nodes holding several.
pub fn render_configuration(g: &Grid, c: &Configuration) -> String {
    let cells: Vec<Vec<String>> = (0..g.rows())
        .map(|i| {
            (0..g.cols())
                .map(|j| match c.get(crate::grid::NodeId { i, j }) {
                    None => ".".to_string(),
                    Some(bag) if bag.len() == 1 => bag.to_string(),
                    Some(bag) => format!("[{bag}]"),
                })
                .collect()
        })
        .collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    let mut out = String::new();
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        out.push_str(line.join(" ").trim_end());
        out.push('\n');
    }
    out
}

fn render_trace_json(t: &TraceJson) -> Result<String> {
    let g = Grid::new(t.grid[0], t.grid[1])?;
    let mut out = format!("{} on {} ({}, {})\n", t.algorithm, g, t.model, t.policy);
    let mut last: Option<Configuration> = None;
    for step in &t.steps {
        let c = Configuration::from_json(&step.state)?;
        if last.as_ref() == Some(&c) {
            continue;
        }
        let rules: Vec<String> = step
            .fired
            .iter()
            .map(|f| format!("{}:{}", f.robot, f.rule))
            .collect();
        out.push_str(&format!("t={} {}\n", step.t, rules.join(" ")));
        out.push_str(&render_configuration(&g, &c));
        out.push('\n');
        last = Some(c);
    }
    out.push_str(&format!("{}\n", serde_json::to_value(t.outcome)?.as_str().unwrap_or("")));
    Ok(out)
}

pub fn render_trace(t: &Trace) -> Result<String> {
    render_trace_json(&t.to_json())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn report_line(r: &CheckReport) -> String {
    let mut line = format!(
        "{:<8} {:>5} {:<6} {:<17} states={} canonical={} ms={}",
        r.algorithm,
        r.grid.to_string(),
        r.model.as_str(),
        r.verdict.to_string(),
        r.stats.states,
        r.stats.canonical,
        r.stats.ms
    );
    if !r.terminal.is_empty() {
        let ts: Vec<String> = r.terminal.iter().map(|c| format!("{c:?}")).collect();
        line.push_str(&format!(" terminal={}", ts.join(" | ")));
    }
    if let Some(msg) = &r.message {
        line.push_str(&format!(" ({msg})"));
    }
    line
}

/// Runs a parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let (algo, native) = load_algorithm(&args.algo)?;
            let g = parse_grid(&args.grid)?;
            let policy = match args.scheduler {
                Policy::RoundRobin => SchedulerPolicy::RoundRobin,
                Policy::First => SchedulerPolicy::First,
                Policy::Random => SchedulerPolicy::Random(
                    args.seed
                        .ok_or_else(|| Error::Usage("--scheduler random needs --seed".into()))?,
                ),
            };
            let engine = Engine::new(&algo, g)?;
            let trace = engine.run(args.model.unwrap_or(native), policy, args.max_steps);
            let text = match args.format {
                Format::Json => serde_json::to_string_pretty(&trace.to_json())? + "\n",
                Format::Ascii | Format::Text => render_trace(&trace)?,
            };
            emit(&args.out, &text)?;
            Ok(0)
        }
        Command::Check(args) => {
            let (algo, native) = load_algorithm(&args.algo)?;
            let (ms, ns) = parse_grid_range(&args.grid)?;
            let reports = check_range(&algo, ms, ns, args.model.unwrap_or(native), args.jobs);
            if reports.is_empty() {
                return Err(Error::Usage(format!(
                    "no grid in {} meets the minimum {}x{}",
                    args.grid, algo.min_m, algo.min_n
                )));
            }
            let text = match args.format {
                Format::Json => {
                    let json: Vec<_> = reports.iter().map(CheckReport::to_json).collect();
                    serde_json::to_string_pretty(&json)? + "\n"
                }
                Format::Text => reports.iter().map(|r| report_line(r) + "\n").collect(),
                Format::Ascii => {
                    let mut s = String::new();
                    for r in &reports {
                        s.push_str(&report_line(r));
                        s.push('\n');
                        if let Some(w) = &r.witness {
                            s.push_str(&render_trace(&w.trace)?);
                        }
                    }
                    s
                }
            };
            emit(&args.out, &text)?;
            Ok(if reports.iter().all(|r| r.verdict == Verdict::Verified) {
                0
            } else {
                1
            })
        }
        Command::Render(args) => {
            let json: TraceJson = serde_json::from_str(&std::fs::read_to_string(&args.trace)?)?;
            emit(&args.out, &render_trace_json(&json)?)?;
            Ok(0)
        }
        Command::Transform(args) => {
            let (algo, _) = load_algorithm(&args.algo)?;
            let from = Color::new(args.from)?;
            let into = ColorBag::parse(&args.into)?;
            let mut derived = catalog::split_color(&algo, from, &into)?;
            if let Some(name) = args.name {
                derived.name = name;
            }
            emit(&args.out, &render_algorithm(&derived))?;
            Ok(0)
        }
        Command::List(args) => {
            let entries = catalog::list()?;
            let text = match args.format {
                Format::Json => {
                    let rows: Vec<_> = entries
                        .iter()
                        .map(|e| {
                            serde_json::json!({
                                "name": e.spec.name,
                                "row": e.row,
                                "provenance": e.provenance,
                                "rules": e.spec.rules.len(),
                            })
                        })
                        .collect();
                    serde_json::to_string_pretty(&rows)? + "\n"
                }
                Format::Text | Format::Ascii => {
                    let mut s = format!(
                        "{:<7} {:<6} {:>3} {:>3} {:<9} {:>3} {:>5}  {}\n",
                        "name", "model", "phi", "l", "chirality", "k", "rules", "source"
                    );
                    for e in &entries {
                        let source = match &e.provenance {
                            catalog::Provenance::Explicit => "explicit".to_string(),
                            catalog::Provenance::DerivedBySplit { base, from, into } => {
                                format!("{base} with {from} -> {into}")
                            }
                        };
                        s.push_str(&format!(
                            "{:<7} {:<6} {:>3} {:>3} {:<9} {:>3} {:>5}  {}\n",
                            e.spec.name,
                            e.row.synchrony.as_str(),
                            e.row.phi,
                            e.row.colors,
                            if e.row.chirality { "yes" } else { "no" },
                            e.row.robots,
                            e.spec.rules.len(),
                            source
                        ));
                    }
                    s
                }
            };
            emit(&None, &text)?;
            Ok(0)
        }
        Command::Lint(args) => {
            let (algo, _) = load_algorithm(&args.algo)?;
            let diags = lint_rules(&algo);
            let mut text = String::new();
            for d in &diags {
                text.push_str(&format!("{d}\n"));
            }
            if diags.is_empty() {
                text.push_str(&format!("{}: no diagnostics\n", algo.name));
            }
            emit(&None, &text)?;
            Ok(if diags.is_empty() { 0 } else { 1 })
        }
    }
}
