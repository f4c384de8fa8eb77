use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use resilient_optsim::engine::scenario::GraphConfig;
use resilient_optsim::engine::{Metrics, RunOutput};
use resilient_optsim::graph::{laplacian, r_connected, r_isolatable, rs_connected, EdgeSpec, Graph};
use resilient_optsim::reference::{eight_robots, DEFAULT_DT, EXACT_DT};
use resilient_optsim::{Error, Scenario};

const SEED_ENV: &str = "RESILIENT_OPTSIM_SEED";
const PLOT_SCRIPT: &str = include_str!("plot.py");

#[derive(Parser)]
#[command(name = "resilient-optsim", version, about = "Byzantine-resilient distributed optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Simulate(SimulateArgs),
    /// Report connectivity and robustness properties of an edge list.
    GraphCheck(GraphCheckArgs),
    /// Run the bundled eight-robot scenario and emit a plot script.
    PaperExample(PaperExampleArgs),
    /// Parse and validate scenario files without running them.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunFlags {
    /// Overrides the step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the seed (falls back to RESILIENT_OPTSIM_SEED, then the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Uses the fine step size 1e-4.
    #[arg(long, conflicts_with = "dt")]
    paper_exact: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON files.
    #[arg(long, required = true, num_args = 1..)]
    scenario: Vec<PathBuf>,
    /// Output directory. With several scenarios each gets a subdirectory
    /// named after its file.
    #[arg(long)]
    out: PathBuf,
    /// Scenarios run in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct GraphCheckArgs {
    /// Edge list: a JSON file (`[[1, 2], [2, 3, 0.5]]` or
    /// `{"nodes": 3, "edges": [...]}`) or inline text such as `1-2,2-3:0.5`.
    /// Labels are 1-based.
    #[arg(long)]
    edges: String,
    /// Node count when it exceeds the largest label.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    r: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    s: u64,
}

#[derive(Args)]
struct PaperExampleArgs {
    #[arg(long)]
    out: PathBuf,
    /// Drops both attack profiles.
    #[arg(long)]
    no_attack: bool,
    /// Uses the fine step size 1e-4.
    #[arg(long)]
    paper_exact: bool,
    /// Overrides the seed (falls back to RESILIENT_OPTSIM_SEED).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, required = true, num_args = 1..)]
    scenario: Vec<PathBuf>,
}

/// Exit status for an error chain: 1 for unreadable input, 2 for a
/// rejected scenario, 3 for a run that blew up.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!(Error::InvalidParameter(format!("{SEED_ENV}={v:?} is not an unsigned integer")))),
        Err(_) => Ok(None),
    }
}

fn apply_overrides(s: &mut Scenario, dt: Option<f64>, paper_exact: bool, seed: Option<u64>) -> anyhow::Result<()> {
    if paper_exact {
        s.sim.dt = EXACT_DT;
    } else if let Some(dt) = dt {
        s.sim.dt = dt;
    }
    if let Some(seed) = seed.or(env_seed()?) {
        s.sim.seed = seed;
    }
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<Scenario> {
    Scenario::load(path).with_context(|| format!("reading scenario {}", path.display()))
}

fn execute(s: &Scenario, out: &Path) -> anyhow::Result<RunOutput> {
    s.validate().with_context(|| format!("scenario {:?} is invalid", s.name))?;
    let result = resilient_optsim::run(s).with_context(|| format!("running scenario {:?}", s.name))?;
    result
        .write_to(out)
        .with_context(|| format!("writing results to {}", out.display()))?;
    Ok(result)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |t| format!("{t:.3}"))
}

fn print_summary(m: &Metrics, out: &Path) {
    println!("scenario {} (seed {}, dt {}, {} steps)", m.scenario, m.seed, m.dt, m.steps);
    println!(
        "  terminal kkt {:.3e}, consensus {:.3e}, max state norm {:.3}",
        m.terminal_kkt_norm, m.terminal_consensus_norm, m.max_state_norm
    );
    if let Some(opt) = &m.optimum {
        let worst = m.output_errors.iter().map(|e| e.error).fold(0.0, f64::max);
        println!("  normal optimum {opt:?}, max output error {worst:.3e}");
    }
    let triggers: u64 = m.channels.iter().map(|c| c.triggers).sum();
    println!(
        "  {triggers} transmissions, min honest gap {}, min activation {:.4}, {} MEI clamps",
        fmt_opt(m.min_honest_gap),
        m.min_activation,
        m.mei_clamps
    );
    println!("  {} isolations, quarantined {:?}", m.isolations.len(), m.quarantined);
    for b in &m.byzantine {
        println!(
            "  agent {}: onset {:.3}, first detection {} ({}), fully isolated {}",
            b.agent,
            b.onset,
            fmt_opt(b.first_detection),
            b.first_detection_clause.as_deref().unwrap_or("-"),
            fmt_opt(b.fully_isolated_at)
        );
    }
    println!("  wrote {}", out.display());
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let multi = args.scenario.len() > 1;
    let mut jobs = Vec::new();
    for path in &args.scenario {
        let mut s = load(path)?;
        apply_overrides(&mut s, args.run.dt, args.run.paper_exact, args.run.seed)?;
        let out = if multi {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            args.out.join(stem)
        } else {
            args.out.clone()
        };
        jobs.push((s, out));
    }

    let workers = usize::from(args.jobs).min(jobs.len()).max(1);
    let mut results: Vec<Option<anyhow::Result<RunOutput>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let jobs = &jobs;
                scope.spawn(move || {
                    (w..jobs.len())
                        .step_by(workers)
                        .map(|k| (k, execute(&jobs[k].0, &jobs[k].1)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, r) in h.join().expect("worker thread panicked") {
                results[k] = Some(r);
            }
        }
    });

    let mut worst_err = None;
    for ((_, out), r) in jobs.iter().zip(results) {
        match r.expect("every job ran") {
            Ok(res) => print_summary(&res.metrics, out),
            Err(e) => {
                eprintln!("error: {e:#}");
                let worse = worst_err.as_ref().is_none_or(|f| exit_code(&e) > exit_code(f));
                if worse {
                    worst_err = Some(e);
                }
            }
        }
    }
    match worst_err {
        Some(e) => Err(e.context("simulation failed")),
        None => Ok(()),
    }
}

fn parse_inline_edges(text: &str) -> anyhow::Result<Vec<EdgeSpec>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|item| {
            let (pair, weight) = match item.split_once(':') {
                Some((p, w)) => (p, w.trim().parse::<f64>().with_context(|| format!("bad weight in {item:?}"))?),
                None => (item, 1.0),
            };
            let (a, b) = pair.split_once('-').ok_or_else(|| anyhow!("edge {item:?} is not of the form i-j"))?;
            let parse = |s: &str| s.trim().parse::<usize>().with_context(|| format!("bad node label in {item:?}"));
            Ok(EdgeSpec(parse(a)?, parse(b)?, weight))
        })
        .collect()
}

fn read_edges(spec: &str) -> anyhow::Result<(Option<usize>, Vec<EdgeSpec>)> {
    let path = Path::new(spec);
    if !path.exists() {
        if spec.contains('-') {
            return Ok((None, parse_inline_edges(spec)?));
        }
        bail!("{spec} is neither a file nor an inline edge list");
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(g) = serde_json::from_str::<GraphConfig>(&text) {
        return Ok((Some(g.nodes), g.edges));
    }
    let edges = serde_json::from_str::<Vec<EdgeSpec>>(&text)
        .with_context(|| format!("{} is not a JSON edge list", path.display()))?;
    Ok((None, edges))
}

fn graph_check(args: GraphCheckArgs) -> anyhow::Result<()> {
    let (file_nodes, edges) = read_edges(&args.edges)?;
    if edges.is_empty() {
        bail!("edge list is empty");
    }
    let largest = edges.iter().map(|e| e.0.max(e.1)).max().unwrap_or(0);
    let n = args.nodes.or(file_nodes).unwrap_or(largest);
    // Construction errors mean the edge list itself is malformed.
    let g = Graph::from_specs(n, &edges).map_err(|e| anyhow!("malformed edge list: {e}"))?;
    let (r, s) = (args.r as usize, args.s as usize);

    let spec = laplacian(&g);
    let rs = rs_connected(&g, r, s)?;
    let premise = r_connected(&g, r)?;
    let isolatable = if r - 1 < n { Some(r_isolatable(&g, r - 1)?) } else { None };

    println!("nodes {n}, edges {}, max degree {}", g.edges().len(), spec.max_degree);
    println!("lambda2 {:.6}", spec.lambda2);
    println!("connected {}", spec.is_connected);
    println!("({r},{s})-connected {rs}");
    match isolatable {
        Some(v) => println!("{}-isolatable {v}", r - 1),
        None => println!("{}-isolatable n/a (needs fewer than {n} removals)", r - 1),
    }
    let verdict = match (premise, isolatable) {
        (false, _) => "vacuous (premise fails)",
        (true, Some(true)) => "witnessed",
        (true, Some(false)) => "counterexample",
        (true, None) => "not applicable",
    };
    println!("{r}-connected => {}-isolatable: {verdict}", r - 1);
    if premise && isolatable == Some(false) {
        bail!("connectivity does not imply isolatability on this graph");
    }
    Ok(())
}

fn paper_example(args: PaperExampleArgs) -> anyhow::Result<()> {
    let mut s = eight_robots(DEFAULT_DT);
    if args.no_attack {
        s = s.without_attacks();
        s.name.push_str("-no-attack");
    }
    apply_overrides(&mut s, None, args.paper_exact, args.seed)?;
    let result = execute(&s, &args.out)?;
    std::fs::write(args.out.join("scenario.json"), s.to_json() + "\n")?;
    std::fs::write(args.out.join("plot.py"), PLOT_SCRIPT)?;
    print_summary(&result.metrics, &args.out);
    println!("  plots: python {}", args.out.join("plot.py").display());
    Ok(())
}

fn validate(args: ValidateArgs) -> anyhow::Result<()> {
    for path in &args.scenario {
        let s = load(path)?;
        s.validate().with_context(|| format!("{} is invalid", path.display()))?;
        println!("{}: ok ({} agents, horizon {} s)", path.display(), s.agents.len(), s.sim.horizon);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::GraphCheck(a) => graph_check(a),
        Command::PaperExample(a) => paper_example(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
