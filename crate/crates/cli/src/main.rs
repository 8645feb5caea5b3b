use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qesynth::algebraic::Algebraic;
use qesynth::model::{self, Model};
use qesynth::optimize::{synthesize, GridLogEntry, GridSpec, PartitionCell, Pipeline, SearchOptions, SynthesisResult};
use qesynth::sim::{self, NoiseModel, SafetyReport};
use qesynth::{parse_formula, point, qe, var, Error, Rat, VarId};

/// Exact synthesis of optimal switching controllers.
#[derive(Parser)]
#[command(name = "qesynth", version)]
struct Cli {
    /// Worker threads; all cores when unset.
    #[arg(long, global = true, env = "QESYNTH_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search the (L, U) grid for the optimal stable interval and controller.
    Synth(SynthArgs),
    /// Eliminate quantifiers from a formula file.
    Qe(QeArgs),
    /// Print the feasible cells and minimizer candidates of a model.
    Kkt(KktArgs),
    /// Simulate a synthesized controller and check safety.
    Simulate(SimulateArgs),
    /// Brute-force grid optimum for a fixed stable interval.
    Oracle(OracleArgs),
    /// CSV series of the controller pieces and the cycle average.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    model: PathBuf,
    /// Spacing of the L and U grid.
    #[arg(long, default_value = "0.1")]
    grid: Rat,
    /// Evaluate this pair first.
    #[arg(long, num_args = 2, value_names = ["L", "U"])]
    start: Option<Vec<Rat>>,
    /// Evaluate every pair instead of pruning by lower bounds.
    #[arg(long)]
    exhaustive: bool,
    /// Result JSON; stdout when unset.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-pair CSV log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct QeArgs {
    file: PathBuf,
    /// Free variables to eliminate existentially as well.
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
}

#[derive(Args)]
struct KktArgs {
    #[arg(long)]
    model: PathBuf,
    /// Also print every candidate's regions.
    #[arg(long)]
    dump: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Result JSON written by `synth`.
    #[arg(long)]
    result: PathBuf,
    #[arg(long, default_value_t = 10)]
    cycles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial volume; midpoint of the stable interval when unset.
    #[arg(long)]
    v0: Option<Rat>,
    /// Disable measurement, timing and consumption noise.
    #[arg(long)]
    noise_free: bool,
    /// Sampling step of the trace CSV.
    #[arg(long, default_value = "0.1")]
    step: Rat,
    #[arg(long, default_value = "trace.csv")]
    trace: PathBuf,
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "L")]
    lower: Rat,
    #[arg(long = "U")]
    upper: Rat,
    #[arg(long, default_value = "1/50")]
    t_step: Rat,
    #[arg(long, default_value = "1/100")]
    v0_step: Rat,
    /// Only minimize for this start volume and print the schedule.
    #[arg(long)]
    v0: Option<Rat>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    result: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "0.01")]
    step: Rat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let run = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Qe(a) => cmd_qe(a),
        Command::Kkt(a) => cmd_kkt(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::PlotData(a) => cmd_plot(a),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for malformed input, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Parse(_) | Error::Nonlinear(_) | Error::Model(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<serde_json::Error>() || cause.is::<qesynth::error::ParseError>() {
            return 2;
        }
    }
    1
}

fn load_model(path: &Path) -> Result<Model> {
    Ok(Model::load(path)?)
}

fn load_result(path: &Path) -> Result<SynthesisResult> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let t0 = Instant::now();
    let p = Pipeline::build(&model)?;
    eprintln!("pipeline: {} cells, {} candidates ({:.1}s)", p.cells.len(), p.candidates.len(), t0.elapsed().as_secs_f64());
    let x = model::vars();
    let grid = GridSpec::covering(&p.admissible, &x.l, &x.u, a.grid)?;
    let opts = SearchOptions { start: a.start.map(|v| (v[0].clone(), v[1].clone())), exhaustive: a.exhaustive };
    let t1 = Instant::now();
    let r = synthesize(&p, &grid, &opts)?;
    eprintln!(
        "optimum {} ({}) on [{}, {}]; {} pairs evaluated, {} pruned ({:.1}s)",
        r.value,
        r.value_decimal,
        r.lower,
        r.upper,
        r.evaluated,
        r.pruned,
        t1.elapsed().as_secs_f64()
    );
    if let Some(path) = &a.log {
        let mut w = create(path)?;
        writeln!(w, "{}", GridLogEntry::CSV_HEADER)?;
        for e in &r.log {
            writeln!(w, "{}", e.csv_row())?;
        }
        w.flush()?;
    }
    write_json(a.out.as_deref(), &r)
}

fn cmd_qe(a: QeArgs) -> Result<()> {
    let text = fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let f = parse_formula(&text)?;
    let mut out = qe::qe(&f)?;
    if !a.vars.is_empty() {
        let vars: Vec<VarId> = a.vars.iter().map(|v| var(v.trim())).collect();
        out = qe::eliminate_exists(&out, &vars)?;
    }
    println!("{}", qe::simplify(&out)?);
    Ok(())
}

fn cmd_kkt(a: KktArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let p = Pipeline::build(&model)?;
    let mut w = BufWriter::new(io::stdout().lock());
    writeln!(w, "admissible: {}", p.admissible)?;
    writeln!(w, "{} feasible cells, {} candidates", p.cells.len(), p.candidates.len())?;
    for (k, c) in p.candidates.candidates.iter().enumerate() {
        let ctl: Vec<String> = c.assignment.iter().map(|(t, e)| format!("{t} = {e}")).collect();
        writeln!(w, "#{k}: {}; cost {}; {} regions", ctl.join(", "), c.cost, c.regions.len())?;
        if a.dump {
            for r in &c.regions {
                writeln!(w, "    {r}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationReport {
    cycles: usize,
    seed: u64,
    noise: NoiseModel,
    v_init: Rat,
    final_volume: Option<Rat>,
    mean_volume: Option<Rat>,
    mean_volume_decimal: Option<String>,
    safety: SafetyReport,
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let result = load_result(&a.result)?;
    let noise = if a.noise_free { NoiseModel { seed: a.seed, ..NoiseModel::none() } } else { NoiseModel::from_model(&model, a.seed) };
    let v_init = a.v0.unwrap_or_else(|| (&result.lower + &result.upper) * Rat::new(1, 2));
    let trace = sim::simulate(&model, &result.pieces, &v_init, a.cycles, &noise)?;
    let mut w = create(&a.trace)?;
    trace.write_csv(&a.step, &mut w)?;
    w.flush()?;
    let safety = sim::check_safety(&trace, &model.safety, (&result.lower, &result.upper), &model.pump.latency);
    let mean = sim::mean_average_volume(&trace);
    eprintln!(
        "{} cycles, safety {}, mean volume {}",
        a.cycles,
        if safety.pass { "pass" } else { "FAIL" },
        mean.as_ref().map_or("-".into(), |m| m.to_decimal(6))
    );
    let report = SimulationReport {
        cycles: a.cycles,
        seed: a.seed,
        noise,
        v_init,
        final_volume: trace.cycles.last().map(|c| c.end_volume().clone()),
        mean_volume_decimal: mean.as_ref().map(|m| m.to_decimal(6)),
        mean_volume: mean,
        safety,
    };
    write_json(Some(&a.report), &report)
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let bound = sim::oracle_resolution(&model, &a.t_step);
    match &a.v0 {
        Some(v0) => {
            let s = sim::oracle_min_at(&model, &a.lower, &a.upper, v0, &a.t_step)?;
            let times: Vec<String> = s.times.iter().map(Rat::to_string).collect();
            println!("value {} ({})", s.value, s.value.to_decimal(6));
            println!("schedule {}", times.join(" "));
        }
        None => {
            let v = sim::brute_force_oracle(&model, &a.lower, &a.upper, &a.t_step, &a.v0_step)?;
            println!("value {} ({})", v, v.to_decimal(6));
        }
    }
    println!("resolution {} ({})", bound, bound.to_decimal(6));
    Ok(())
}

/// Sample points: the step grid plus every rational piece end.
fn plot_points(r: &SynthesisResult, step: &Rat) -> Vec<Rat> {
    let mut pts = Vec::new();
    let mut x = r.lower.clone();
    while x <= r.upper {
        pts.push(x.clone());
        x += step;
    }
    for c in &r.pieces {
        pts.extend([&c.lo, &c.hi].into_iter().filter_map(|e| e.to_rational().cloned()));
    }
    pts.sort();
    pts.dedup();
    pts
}

fn piece_at<'a>(pieces: &'a [PartitionCell], x: &Rat) -> Option<&'a PartitionCell> {
    let at = Algebraic::from(x.clone());
    pieces.iter().find(|c| c.contains(&at))
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let r = load_result(&a.result)?;
    if !a.step.is_positive() {
        anyhow::bail!("step must be positive");
    }
    fs::create_dir_all(&a.out_dir)?;
    let tvars: Vec<VarId> = r.pieces.first().map(|c| c.controller.keys().cloned().collect()).unwrap_or_default();
    let mut ctl = create(&a.out_dir.join("controller.csv"))?;
    let mut avg = create(&a.out_dir.join("average_volume.csv"))?;
    let names: Vec<&str> = tvars.iter().map(VarId::name).collect();
    writeln!(ctl, "v0,{}piece", names.iter().map(|n| format!("{n},")).collect::<String>())?;
    writeln!(avg, "v0,average_volume,piece")?;
    let pts = if r.pieces.is_empty() { Vec::new() } else { plot_points(&r, &a.step) };
    for x in pts {
        let Some(c) = piece_at(&r.pieces, &x) else { continue };
        let k = r.pieces.iter().position(|p| std::ptr::eq(p, c)).expect("piece from list");
        let env = point([("v0", x.clone())]);
        let mut row = x.to_decimal(4);
        for t in &tvars {
            row.push(',');
            row.push_str(&c.controller[t].evaluate(&env)?.to_decimal(6));
        }
        writeln!(ctl, "{row},{k}")?;
        writeln!(avg, "{},{},{k}", x.to_decimal(4), c.cost.evaluate(&env)?.to_decimal(6))?;
    }
    ctl.flush()?;
    avg.flush()?;
    Ok(())
}
