mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use cyclecast::dissemination::{
    auto_horizon, check_delay_bound, check_freshness_invariant, check_throughput, PhasePolicy, Simulation, StreamConfig,
};
use cyclecast::flowgraph::{bfs_distances, diameter, fgc_construct, reverse};
use cyclecast::overlay::{random_churn_plan, ChurnDriver, ChurnOp, Overlay, PeerId};
use cyclecast::rng::seeded;
use cyclecast::stats::{run_suite, ExperimentReport, Overrides, Profile, Suite};

use config::FileConfig;

/// Largest graph for which `fgc` computes the all-pairs diameter.
const FGC_DIAMETER_LIMIT: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cyclecast::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error("operation {index}: {source}")]
    Operation { index: usize, source: cyclecast::Error },
}

#[derive(Parser)]
#[command(name = "cyclecast", version, about = "Multi-layer cycle overlay simulator and experiment runner")]
struct Cli {
    /// JSON file with flat keys named after the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial count for experiments.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a join/leave history, validating after every step, and dump the overlay.
    Churn(ChurnArgs),
    /// Stream chunks over an overlay and check delivery guarantees.
    Stream(StreamArgs),
    /// Build one flow graph with the sequential construction and export it.
    Fgc(FgcArgs),
    /// Run a statistical test suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ChurnArgs {
    /// Target number of peers.
    #[arg(long)]
    n: Option<usize>,
    /// Number of layers.
    #[arg(long)]
    m: Option<usize>,
    /// Number of join/leave operations (at least N-2).
    #[arg(long)]
    ops: Option<usize>,
    /// Script with one `join` or `leave <id>` per line.
    #[arg(long)]
    script: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Scheduling period K.
    #[arg(long)]
    k: Option<u32>,
    /// Scheduling vector, e.g. `1,1,2`; the last entry must equal M.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// join-slot, zero or random.
    #[arg(long)]
    phase: Option<PhasePolicy>,
    /// Slots to simulate; sized from the flow-graph depths if omitted.
    #[arg(long)]
    horizon: Option<u64>,
    /// Overlay dump to stream over instead of growing a random one.
    #[arg(long)]
    overlay: Option<PathBuf>,
}

#[derive(Args)]
struct FgcArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Probability of a second-set edge per iteration.
    #[arg(long, conflicts_with = "k")]
    q: Option<f64>,
    /// Take q = 1/(K-1).
    #[arg(long)]
    k: Option<u32>,
}

#[derive(Args)]
struct VerifyArgs {
    /// uniformity, fgc-equivalence, expansion, concentration, scaling,
    /// contraction, diameter or all.
    #[arg(value_parser = parse_suite)]
    suite: Suite,
    /// desk (full size) or smoke (fast).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    t_values: Option<Vec<usize>>,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    Suite::from_str(s).map_err(|_| {
        let names: Vec<&str> = Suite::EACH.iter().chain(&[Suite::All]).map(|s| s.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

/// Global settings after merging the config file under the flags.
struct Common {
    seed: u64,
    trials: Option<usize>,
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let common =
        Common { seed: cli.seed.or(file.seed).unwrap_or(0), trials: cli.trials.or(file.trials), out: cli.out.or_else(|| file.out.clone()) };
    match cli.command {
        Command::Churn(a) => churn(a, &file, &common),
        Command::Stream(a) => stream(a, &file, &common),
        Command::Fgc(a) => fgc(a, &file, &common),
        Command::Verify(a) => verify(a, &file, &common),
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn read_in(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn parse_script(text: &str) -> Result<Vec<ChurnOp>, CliError> {
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let words: Vec<&str> = line.split_whitespace().collect();
        let op = match words.as_slice() {
            [] => continue,
            ["join"] => ChurnOp::Join,
            ["leave", id] => {
                ChurnOp::Leave(PeerId(id.parse().map_err(|_| CliError::Config(format!("script line {}: bad peer id `{id}`", i + 1)))?))
            }
            _ => return Err(CliError::Config(format!("script line {}: expected `join` or `leave <id>`", i + 1))),
        };
        ops.push(op);
    }
    Ok(ops)
}

fn churn(a: ChurnArgs, file: &FileConfig, common: &Common) -> Result<bool, CliError> {
    let m = a.m.or(file.m).unwrap_or(2);
    let mut rng = seeded(common.seed);
    let plan = match a.script.or_else(|| file.script.clone()) {
        Some(path) => parse_script(&read_in(&path)?)?,
        None => {
            let n = a.n.or(file.n).ok_or_else(|| CliError::Config("churn needs --n or --script".into()))?;
            let ops = a.ops.or(file.ops).unwrap_or(n.saturating_sub(2));
            random_churn_plan(n, ops, &mut rng)?
        }
    };
    let mut overlay = Overlay::new(m)?;
    let mut driver = ChurnDriver::new();
    for (i, &op) in plan.iter().enumerate() {
        driver.apply(&mut overlay, op, &mut rng).map_err(|source| CliError::Operation { index: i + 1, source })?;
        let report = overlay.validate();
        if !report.passed() {
            eprintln!("validation failed after operation {}: {}", i + 1, report.failures().join("; "));
            return Ok(false);
        }
    }
    eprintln!("churn: {} operations, N={}, M={m}, every layer a Hamiltonian cycle after each step", plan.len(), overlay.len());
    let dump = overlay.to_text();
    match &common.out {
        Some(dir) => write_out(dir, "overlay.txt", &dump)?,
        None => print!("{dump}"),
    }
    Ok(true)
}

fn stream(a: StreamArgs, file: &FileConfig, common: &Common) -> Result<bool, CliError> {
    let mut rng = seeded(common.seed);
    let overlay = match a.overlay.or_else(|| file.overlay.clone()) {
        Some(path) => Overlay::from_text(&read_in(&path)?)?,
        None => {
            let n = a.n.or(file.n).ok_or_else(|| CliError::Config("stream needs --n or --overlay".into()))?;
            Overlay::grown(n, a.m.or(file.m).unwrap_or(2), &mut rng)?
        }
    };
    let m = overlay.m_count();
    if let Some(want) = a.m.or(file.m) {
        if want != m {
            return Err(CliError::Config(format!("--m {want} does not match the overlay's {m} layers")));
        }
    }
    let phase = match (a.phase, &file.phase) {
        (Some(p), _) => p,
        (None, Some(s)) => s.parse()?,
        (None, None) => PhasePolicy::JoinSlot,
    };
    let schedule = a.schedule.or_else(|| file.schedule.clone());
    let k = match (a.k.or(file.k), &schedule) {
        (Some(k), _) => k,
        (None, Some(s)) => s.len() as u32,
        (None, None) => m as u32 + 1,
    };
    let cfg = match schedule {
        Some(s) => StreamConfig::new(m, k, s, phase)?,
        None => StreamConfig::with_default_schedule(m, k, phase)?,
    };
    let schedule_text: Vec<String> = cfg.schedule().iter().map(|l| l.to_string()).collect();
    let q = cfg.q();
    let mut sim = Simulation::new(&overlay, cfg, &mut rng)?;
    let graphs = sim.flow_graphs(&overlay)?;
    let horizon = a.horizon.or(file.horizon).unwrap_or_else(|| auto_horizon(&graphs, k, 20));
    sim.run(horizon);
    let log = sim.log();

    let fresh = check_freshness_invariant(log);
    let delay = check_delay_bound(log, &graphs)?;
    let tp = check_throughput(log, &graphs);
    println!("stream: N={} M={m} K={k} schedule=({}) q={q:.4} phase={phase} horizon={horizon}", overlay.len(), schedule_text.join(","));
    println!("  d_max={} generated={} eligible={} receptions={}", tp.d_max, log.generated().len(), tp.eligible, log.reception_count());
    println!("  freshness violations={} delay violations={} undelivered={}", fresh.len(), delay.len(), tp.violations.len());
    if let Some(dir) = &common.out {
        write_out(dir, "delivery_log.csv", &log.to_csv())?;
        write_out(dir, "generated.csv", &log.generated_csv())?;
        write_out(dir, "overlay.txt", &overlay.to_text())?;
    }
    let first = fresh.first().or(delay.first()).or(tp.violations.first());
    match first {
        Some(v) => {
            eprintln!("first violation: {v}");
            Ok(false)
        }
        None => Ok(true),
    }
}

fn fgc(a: FgcArgs, file: &FileConfig, common: &Common) -> Result<bool, CliError> {
    let n = a.n.or(file.n).ok_or_else(|| CliError::Config("fgc needs --n".into()))?;
    let q = match (a.q, a.k) {
        (Some(q), _) => q,
        (None, Some(k)) if k >= 2 => 1.0 / f64::from(k - 1),
        (None, Some(k)) => return Err(CliError::Config(format!("K must be at least 2, got {k}"))),
        (None, None) => match (file.q, file.k) {
            (Some(_), Some(_)) => return Err(CliError::Config("config sets both q and k".into())),
            (Some(q), None) => q,
            (None, Some(k)) if k >= 2 => 1.0 / f64::from(k - 1),
            (None, Some(k)) => return Err(CliError::Config(format!("K must be at least 2, got {k}"))),
            (None, None) => 0.5,
        },
    };
    let trace = fgc_construct(n, q, &mut seeded(common.seed))?;
    let h = trace.superpose();
    let dist = bfs_distances(&h, PeerId::SOURCE)?;
    let d_rev = bfs_distances(&reverse(&h), PeerId::SOURCE)?.depth();
    let counts_ok = trace.candidate_counts_hold();
    let monotone = trace.distances_monotone(&dist);
    println!("fgc: N={n} q={q} |E1|={} |E2|={}", trace.e1.len(), trace.e2.len());
    println!("  depth={} reverse depth={}", dist.depth(), d_rev);
    if n <= FGC_DIAMETER_LIMIT {
        let dia = diameter(&h).map_or_else(|| "inf".to_string(), |d| d.to_string());
        println!("  diameter={dia}");
    }
    let half = n / 2;
    println!("  z(N/2)={} F(N/2)={:.4}", trace.z[half], trace.contraction(half).unwrap_or(0.0));
    println!("  candidate counts hold={counts_ok} distances monotone={monotone}");
    if let Some(dir) = &common.out {
        write_out(dir, "trace.csv", &trace.to_csv())?;
        write_out(dir, "edges.txt", &h.to_edge_list())?;
    }
    Ok(counts_ok && monotone && dist.all_reachable())
}

fn file_name(report: &ExperimentReport) -> String {
    report.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn verify(a: VerifyArgs, file: &FileConfig, common: &Common) -> Result<bool, CliError> {
    let profile: Profile = a.profile.or_else(|| file.profile.clone()).map(|s| s.parse()).transpose()?.unwrap_or_default();
    let from_file = Overrides {
        trials: file.trials,
        n: file.n,
        n_list: file.n_list.clone(),
        q: file.q,
        psi: file.psi,
        epsilon: file.epsilon,
        t: file.t,
        t_values: file.t_values.clone(),
    };
    let from_flags =
        Overrides { trials: common.trials, n: a.n, n_list: a.n_list, q: a.q, psi: a.psi, epsilon: a.epsilon, t: a.t, t_values: a.t_values };
    let overrides = from_file.merged(from_flags);
    let reports = run_suite(a.suite, profile, common.seed, &overrides)?;
    for r in &reports {
        print!("{}", r.to_text());
    }
    if let Some(dir) = &common.out {
        for r in &reports {
            let base = file_name(r);
            write_out(dir, &format!("{base}.json"), &r.to_json())?;
            write_out(dir, &format!("{base}.txt"), &r.to_text())?;
            if let Some(samples) = &r.samples {
                write_out(dir, &format!("{base}.samples.csv"), &samples.to_csv())?;
            }
        }
    }
    let failed: Vec<String> =
        reports.iter().flat_map(|r| r.failures().into_iter().map(move |c| format!("{}: {}", r.name, c.name))).collect();
    let controls = reports.iter().filter(|r| r.is_control()).count();
    println!("verify {}: {} report(s), {} expected-fail control(s), {} failed check(s)", a.suite, reports.len(), controls, failed.len());
    for f in &failed {
        eprintln!("FAILED {f}");
    }
    Ok(failed.is_empty())
}
