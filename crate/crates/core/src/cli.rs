//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{preset, SimConfig, PRESETS};
use crate::control::ControllerKind;
use crate::engine::{
    aggregate_to_csv, batch, run, trace_to_csv, world_hash, BatchResult, MetricsRecord, RunSummary,
};
use crate::error::{Error, Result};
use crate::export::{render_pgm, with_header};
use crate::stigmergy::{entries_to_csv, parse_belief_csv, StigmergyEntry};
use crate::world::CellCoord;

#[derive(Debug, Parser)]
#[command(
    name = "dora",
    version,
    about = "Risk-aware multi-robot exploration simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one seed and write its trace, belief maps and summary.
    Run(RunArgs),
    /// Run consecutive seeds of one controller and aggregate the traces.
    Batch(BatchArgs),
    /// Run the same seeds under several controllers.
    Compare(CompareArgs),
    /// Render a belief CSV as a PGM image.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Built-in starting configuration.
    #[arg(long, default_value = "sim20")]
    pub preset: String,
    /// `key=value` file merged over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub robots: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub steps: Option<i64>,
    #[arg(long)]
    pub controller: Option<ControllerKind>,
    /// Extra `key=value` override, applied last. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, value_delimiter = ',', default_value = "dora,fbe,random")]
    pub controllers: Vec<ControllerKind>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Belief CSV as written by `run`.
    pub belief: PathBuf,
    /// World CSV whose obstacles (black) and sources (white) are drawn on top.
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long, default_value = "belief.pgm")]
    pub out: PathBuf,
}

impl ConfigArgs {
    /// Preset, then config file, then flags.
    pub fn resolve(&self) -> Result<SimConfig> {
        let mut cfg = preset(&self.preset).ok_or_else(|| {
            Error::invalid(
                "preset",
                format!(
                    "unknown preset `{}` (known: {})",
                    self.preset,
                    PRESETS.join(", ")
                ),
            )
        })?;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg = cfg.merge_text(&text)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.robots {
            cfg.n_robots = n;
        }
        if let Some(steps) = self.steps {
            cfg.set("steps", &steps.to_string())?;
        }
        if let Some(c) = self.controller {
            cfg.controller = c;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{kv}` is not key=value")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Mean over ticks of the per-robot byte count.
pub fn mean_bytes(trace: &[MetricsRecord]) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    trace.iter().map(|r| r.bytes_per_robot).sum::<f64>() / trace.len() as f64
}

pub fn cmd_run(args: &RunArgs) -> Result<String> {
    let cfg = args.config.resolve()?;
    ensure_dir(&args.out)?;
    let res = run(&cfg)?;
    let out = &args.out;
    let head = |body: &str| with_header(&cfg, body);

    let belief = res.radiation_belief();
    let visits: Vec<StigmergyEntry> = res.state.visits.merged().into_values().collect();
    write_file(&out.join("trace.csv"), &head(&trace_to_csv(&res.trace)))?;
    write_file(
        &out.join("belief_radiation.csv"),
        &head(&entries_to_csv(&belief)),
    )?;
    write_file(
        &out.join("belief_visits.csv"),
        &head(&entries_to_csv(&visits)),
    )?;
    write_file(&out.join("world.csv"), &head(&res.state.world.to_csv()))?;
    let header = cfg.to_header();
    write_file(
        &out.join("belief.pgm"),
        &render_pgm(&belief, cfg.width, cfg.height, Some(&header)),
    )?;

    let last = res.trace.last().expect("steps >= 1");
    let mut summary = String::new();
    let _ = writeln!(summary, "controller={}", cfg.controller);
    let _ = writeln!(summary, "seed={}", cfg.seed);
    let _ = writeln!(summary, "ticks={}", last.tick);
    let _ = writeln!(summary, "final_active={}", last.active_robots);
    let _ = writeln!(summary, "explored_cells={}", last.explored_cells);
    let _ = writeln!(summary, "mean_bytes_per_robot={}", mean_bytes(&res.trace));
    let _ = writeln!(summary, "world_hash={}", world_hash(&res.state.world));
    write_file(&out.join("summary.txt"), &head(&summary))?;

    Ok(format!(
        "{} seed {}: {} of {} robots active, {} cells explored after {} ticks",
        cfg.controller, cfg.seed, last.active_robots, cfg.n_robots, last.explored_cells, last.tick
    ))
}

fn runs_csv(result: &BatchResult) -> String {
    let mut s = String::from("seed,final_active,explored_cells,mean_bytes_per_robot,world_hash\n");
    for r in &result.runs {
        let last = r.last();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.seed,
            last.active_robots,
            last.explored_cells,
            mean_bytes(&r.trace),
            r.world_hash
        );
    }
    s
}

/// Final-tick means of one batch: survivors, explored cells, bytes/robot/tick.
pub fn final_means(result: &BatchResult) -> (f64, f64, f64) {
    let n = result.runs.len().max(1) as f64;
    let sum = |f: &dyn Fn(&RunSummary) -> f64| result.runs.iter().map(f).sum::<f64>() / n;
    (
        sum(&|r| r.last().active_robots as f64),
        sum(&|r| r.last().explored_cells as f64),
        sum(&|r| mean_bytes(&r.trace)),
    )
}

pub fn cmd_batch(args: &BatchArgs) -> Result<String> {
    let cfg = args.config.resolve()?;
    ensure_dir(&args.out)?;
    let result = batch(&cfg, args.runs, cfg.seed, args.jobs)?;
    write_file(
        &args.out.join("aggregate.csv"),
        &with_header(&cfg, &aggregate_to_csv(&result.aggregate)),
    )?;
    write_file(
        &args.out.join("runs.csv"),
        &with_header(&cfg, &runs_csv(&result)),
    )?;
    let (active, explored, bytes) = final_means(&result);
    Ok(format!(
        "{} x{} runs: mean {active:.2} active, {explored:.1} cells explored, {bytes:.1} bytes/robot/tick",
        cfg.controller, args.runs
    ))
}

pub fn cmd_compare(args: &CompareArgs) -> Result<String> {
    let base = args.config.resolve()?;
    if args.controllers.is_empty() {
        return Err(Error::invalid(
            "controllers",
            "at least one controller is required",
        ));
    }
    ensure_dir(&args.out)?;
    let mut table = String::from(
        "controller,runs,mean_final_active,mean_explored_cells,mean_bytes_per_robot\n",
    );
    let mut hashes: Vec<(ControllerKind, Vec<(u64, String)>)> = Vec::new();
    for &controller in &args.controllers {
        let cfg = SimConfig {
            controller,
            ..base.clone()
        };
        let result = batch(&cfg, args.runs, cfg.seed, args.jobs)?;
        let file = args.out.join(format!("aggregate_{controller}.csv"));
        write_file(
            &file,
            &with_header(&cfg, &aggregate_to_csv(&result.aggregate)),
        )?;
        let (active, explored, bytes) = final_means(&result);
        let _ = writeln!(
            table,
            "{controller},{},{active},{explored},{bytes}",
            args.runs
        );
        hashes.push((
            controller,
            result
                .runs
                .iter()
                .map(|r| (r.seed, r.world_hash.clone()))
                .collect(),
        ));
    }

    let mut worlds = String::from("seed");
    for (c, _) in &hashes {
        let _ = write!(worlds, ",{c}");
    }
    worlds.push_str(",paired\n");
    for i in 0..args.runs {
        let seed = hashes[0].1[i].0;
        let _ = write!(worlds, "{seed}");
        for (_, h) in &hashes {
            let _ = write!(worlds, ",{}", h[i].1);
        }
        let paired = hashes.iter().all(|(_, h)| h[i].1 == hashes[0].1[i].1);
        let _ = writeln!(worlds, ",{paired}");
        if !paired {
            return Err(Error::Invariant(format!(
                "seed {seed} produced different worlds across controllers"
            )));
        }
    }
    write_file(&args.out.join("table.csv"), &with_header(&base, &table))?;
    write_file(&args.out.join("worlds.csv"), &with_header(&base, &worlds))?;
    Ok(table)
}

/// Local maxima of the truth field, i.e. the source cells unless two
/// sources are adjacent.
fn overlay_world(text: &str, entries: &mut Vec<StigmergyEntry>) -> Result<()> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut field = std::collections::BTreeMap::new();
    let mut obstacles = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("bad field {j} in world CSV"),
                })
        };
        let cell = CellCoord::new(num(0)? as i32, num(1)? as i32);
        field.insert(cell, num(2)?);
        if num(3)? != 0.0 {
            obstacles.push(cell);
        }
    }
    let nb = crate::control::Neighborhood::moore();
    for (&cell, &v) in &field {
        let peak = v > 0.0
            && nb
                .cells(cell)
                .all(|n| field.get(&n).is_none_or(|&w| w < v));
        if peak {
            entries.retain(|e| e.key != cell);
            entries.push(StigmergyEntry {
                key: cell,
                value: 1.0,
                lamport: 0,
                writer_id: 0,
            });
        }
    }
    for cell in obstacles {
        entries.retain(|e| e.key != cell);
        entries.push(StigmergyEntry {
            key: cell,
            value: 0.0,
            lamport: 0,
            writer_id: 0,
        });
    }
    Ok(())
}

pub fn cmd_render(args: &RenderArgs) -> Result<String> {
    let text = fs::read_to_string(&args.belief).map_err(|e| Error::io(&args.belief, e))?;
    let mut entries = parse_belief_csv(&text)?;
    let header_cfg = SimConfig::from_header(&text).ok();
    let (mut w, mut h) = header_cfg.as_ref().map_or((0, 0), |c| (c.width, c.height));
    if header_cfg.is_none() {
        for e in &entries {
            w = w.max(e.key.x.max(0) as u32 + 1);
            h = h.max(e.key.y.max(0) as u32 + 1);
        }
    }
    let (w, h) = (args.width.unwrap_or(w), args.height.unwrap_or(h));
    if w == 0 || h == 0 {
        return Err(Error::Config(
            "cannot infer image size; pass --width and --height".into(),
        ));
    }
    if let Some(path) = &args.world {
        let world = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        overlay_world(&world, &mut entries)?;
    }
    let header = header_cfg.map(|c| c.to_header());
    write_file(&args.out, &render_pgm(&entries, w, h, header.as_deref()))?;
    Ok(format!("wrote {}x{} image to {}", w, h, args.out.display()))
}

fn config_of(cmd: &Command) -> Option<&ConfigArgs> {
    match cmd {
        Command::Run(a) => Some(&a.config),
        Command::Batch(a) => Some(&a.config),
        Command::Compare(a) => Some(&a.config),
        Command::Render(_) => None,
    }
}

/// Runs a parsed command. The resolved config is echoed first.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut out = String::new();
    if let Some(c) = config_of(&cli.command) {
        out.push_str(&c.resolve()?.to_header());
    }
    let msg = match &cli.command {
        Command::Run(a) => cmd_run(a)?,
        Command::Batch(a) => cmd_batch(a)?,
        Command::Compare(a) => cmd_compare(a)?,
        Command::Render(a) => cmd_render(a)?,
    };
    out.push_str(&msg);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    Ok(out)
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
