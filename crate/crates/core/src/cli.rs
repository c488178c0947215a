//! Command-line front end. `run` returns the process exit code.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{mode_shares, solve_assignment, AssignmentError, AssignmentProblem, Backend};
use crate::baseline::{compare, run_sensitivity, solve_baseline, BaselineError};
use crate::benders::{
    run_classic, run_enhanced, run_monolith, solve_subproblem, write_trace, BendersConfig, BendersContext,
    BendersError, BendersRun, BendersStatus, SubproblemBackend,
};
use crate::design::{build_design_milp, random_design, DesignConfig, DesignDecision, DesignError};
use crate::kernel::write_model;
use crate::manifest::RunManifest;
use crate::network::{load_network, LinkKind, MultimodalNetwork, NetworkError, NetworkFiles, NodeKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "modtransit", version, about = "Integrated MoD and transit network design")]
pub struct Cli {
    /// TOML or JSON file with `[design]` and `[benders]` tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use the fares in links.csv instead of the configured fare policy.
    #[arg(long, global = true)]
    pub keep_fares: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a network directory and report problems.
    Validate(ValidateArgs),
    /// Assign demand for a fixed design.
    Assign(AssignArgs),
    /// Optimize lines, frequencies and fleet sizes.
    Design(DesignArgs),
    /// Transit-only frequency optimization.
    Baseline(BaselineArgs),
    /// Integrated design against the transit-only baseline.
    Compare(CompareArgs),
    /// Budget sensitivity grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub network: PathBuf,
    /// Random feasible designs whose subproblems are solved as a check.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Directory with nodes.csv, links.csv, lines.csv and demand.csv.
    pub network: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub bus_budget: Option<f64>,
    #[arg(long)]
    pub fleet_budget: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[command(flatten)]
    pub common: Common,
    /// Design file with `kind,id,value` rows.
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Hyperpath)]
    pub backend: BackendArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Hyperpath,
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    #[value(alias = "gurobi-style-monolith")]
    Monolith,
    Classic,
    Enhanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutFlag {
    Disagg,
    CliqueCover,
    Multi,
    Cleanup,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value_t = Method::Enhanced)]
    pub method: Method,
    /// Enhancements for `--method enhanced`; replaces the configured set.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub cuts: Option<Vec<CutFlag>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long)]
    pub pool_gap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Iteration trace CSV; defaults to `<out>/trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the full design MILP in the plain-text model format.
    #[arg(long)]
    pub dump_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Let the optimizer close candidate lines.
    #[arg(long)]
    pub allow_closing: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Integrated design to compare; optimized when omitted.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long)]
    pub allow_closing: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub buses: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub vehicles: Vec<f64>,
}

/// Contents of `--config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub design: DesignConfig,
    pub benders: BendersConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        } else {
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        };
        cfg.map_err(CliError::Data)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Solver(_) => EXIT_LIMIT,
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AssignmentError> for CliError {
    fn from(e: AssignmentError) -> Self {
        match e {
            AssignmentError::Unreachable { .. } => CliError::Data(e.to_string()),
            AssignmentError::Solver { .. } => CliError::Solver(e.to_string()),
        }
    }
}

impl From<BendersError> for CliError {
    fn from(e: BendersError) -> Self {
        match e {
            BendersError::Design(d) => d.into(),
            BendersError::Assignment(a) => a.into(),
            BendersError::Disconnected(_) | BendersError::InfeasibleDesign(_) => CliError::Data(e.to_string()),
            BendersError::Subproblem { .. } => CliError::Solver(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Benders(b) => b.into(),
            BaselineError::Io(_) | BaselineError::Csv(_) => CliError::Data(e.to_string()),
            BaselineError::BudgetTooSmall { .. } | BaselineError::NothingServed => CliError::Data(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command on its own thread pool.
pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Validate(a) => validate(cli, &file, a),
        Command::Assign(a) => assign(cli, &file, a),
        Command::Design(a) => design(cli, &file, a),
        Command::Baseline(a) => baseline(cli, &file, a),
        Command::Compare(a) => compare_cmd(cli, &file, a),
        Command::Sweep(a) => sweep(cli, &file, a),
    }
}

fn design_config(file: &FileConfig, c: Option<&Common>) -> Result<DesignConfig, CliError> {
    let mut cfg = file.design.clone();
    if let Some(c) = c {
        if let Some(b) = c.bus_budget {
            cfg.bus_budget = b;
        }
        if let Some(v) = c.fleet_budget {
            cfg.fleet_budget = v;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn benders_config(file: &FileConfig, s: &SolveArgs) -> Result<BendersConfig, CliError> {
    let mut bc = file.benders.clone();
    if let Some(cuts) = &s.cuts {
        if s.method != Method::Enhanced {
            return Err(CliError::Usage("--cuts only applies to --method enhanced".into()));
        }
        bc.disaggregated = cuts.contains(&CutFlag::Disagg);
        bc.clique_cover = cuts.contains(&CutFlag::CliqueCover);
        bc.cut_cleanup = cuts.contains(&CutFlag::Cleanup);
        if !cuts.contains(&CutFlag::Multi) {
            bc.pool_size = 1;
        } else if bc.pool_size < 2 {
            bc.pool_size = BendersConfig::default().pool_size;
        }
    }
    if let Some(e) = s.epsilon {
        bc.epsilon = e;
    }
    if s.time_limit.is_some() {
        bc.time_limit = s.time_limit;
    }
    if let Some(p) = s.pool_size {
        bc.pool_size = p;
    }
    if let Some(g) = s.pool_gap {
        bc.pool_gap = g;
    }
    if bc.epsilon < 0.0 || bc.pool_gap < 0.0 || bc.time_limit.is_some_and(|t| !(t > 0.0)) {
        return Err(CliError::Usage("epsilon, pool gap and time limit must be nonnegative".into()));
    }
    Ok(bc)
}

fn load(cli: &Cli, dir: &Path, cfg: &DesignConfig) -> Result<MultimodalNetwork, CliError> {
    let net = load_network(&NetworkFiles::in_dir(dir))?.build_walking_links(cfg.walk_distance, cfg.walk_speed_mph, None);
    Ok(if cli.keep_fares { net } else { net.with_fares(&cfg.fares()) })
}

fn inputs<'a>(cli: &'a Cli, dir: &Path, extra: &[&'a Path]) -> Vec<PathBuf> {
    let files = NetworkFiles::in_dir(dir);
    let mut v: Vec<PathBuf> = files.all().iter().map(|p| p.to_path_buf()).collect();
    if let Some(c) = &cli.config {
        v.push(c.clone());
    }
    v.extend(extra.iter().map(|p| p.to_path_buf()));
    v
}

fn start_manifest(
    cli: &Cli,
    name: &str,
    config: serde_json::Value,
    inputs: &[PathBuf],
) -> Result<RunManifest, CliError> {
    let refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let mut config = config;
    if let serde_json::Value::Object(m) = &mut config {
        m.insert("keep_fares".into(), cli.keep_fares.into());
    }
    RunManifest::start(name, cli.seed, config, &refs).map_err(|e| CliError::Data(e.to_string()))
}

fn finish_manifest(mut m: RunManifest, out: &Path) -> Result<(), CliError> {
    m.finish();
    m.write(out).map_err(io_err(out))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let f = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(f, value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn status_code(status: BendersStatus) -> i32 {
    if status == BendersStatus::Optimal {
        EXIT_OK
    } else {
        EXIT_LIMIT
    }
}

fn validate(cli: &Cli, file: &FileConfig, a: &ValidateArgs) -> Result<i32, CliError> {
    let cfg = design_config(file, None)?;
    let net = load(cli, &a.network, &cfg)?;
    let count_nodes = |k: NodeKind| net.nodes.iter().filter(|n| n.kind == k).count();
    println!(
        "nodes: {} (road {}, stops {}, centroids {})",
        net.num_nodes(),
        count_nodes(NodeKind::RoadIntersection),
        count_nodes(NodeKind::TransitStop),
        count_nodes(NodeKind::Centroid)
    );
    let mut kinds = String::new();
    for k in [
        LinkKind::Road,
        LinkKind::Transit,
        LinkKind::AccessWalk,
        LinkKind::EgressWalk,
        LinkKind::TransitTransfer,
        LinkKind::ModeTransfer,
    ] {
        kinds.push_str(&format!(" {} {}", k, net.count_links(k)));
    }
    println!("links: {} ({})", net.num_links(), kinds.trim());
    println!(
        "lines: {} ({} candidates), zones: {}, demand pairs: {}, trips: {}",
        net.lines.len(),
        net.lines.iter().filter(|l| l.candidate).count(),
        net.zones.len(),
        net.demand.len(),
        net.total_demand()
    );
    let bad = net.road_disconnected_pairs();
    if !bad.is_empty() {
        for (o, d) in bad.iter().take(10) {
            eprintln!("not connected by road and walking: {} -> {}", net.nodes[*o].id, net.nodes[*d].id);
        }
        return Err(CliError::Data(format!("{} origin/destination pairs are not connected", bad.len())));
    }
    if a.samples > 0 {
        let ctx = BendersContext::new(&net, &cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        let mut failed = 0usize;
        for _ in 0..a.samples {
            let d = random_design(&net, &cfg, &mut rng);
            if let Err(e) = solve_subproblem(&ctx, &d, SubproblemBackend::Hyperpath) {
                failed += 1;
                eprintln!("design {d}: {e}");
            }
        }
        println!("sampled designs: {}, failed subproblems: {failed}", a.samples);
        if failed > 0 {
            return Err(CliError::Solver(format!("{failed} sampled designs failed")));
        }
    }
    println!("ok");
    Ok(EXIT_OK)
}

fn assign(cli: &Cli, file: &FileConfig, a: &AssignArgs) -> Result<i32, CliError> {
    let cfg = design_config(file, Some(&a.common))?;
    let net = load(cli, &a.common.network, &cfg)?;
    let d = DesignDecision::read_csv(&net, &cfg, &a.design)?;
    let manifest = start_manifest(
        cli,
        "assign",
        serde_json::json!({ "design": cfg, "backend": format!("{:?}", a.backend) }),
        &inputs(cli, &a.common.network, &[&a.design]),
    )?;
    let problem = AssignmentProblem::new(&net, &d.rates(&net, &cfg), cfg.value_of_time);
    let backend = match a.backend {
        BackendArg::Hyperpath => Backend::Hyperpath,
        BackendArg::Lp => Backend::Lp,
    };
    let sol = solve_assignment(&problem, backend)?;
    let out = &a.common.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("link_flows.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["from", "to", "kind", "line", "flow"]).map_err(csv_err(&path))?;
    for (link, flow) in net.links.iter().zip(sol.link_totals()) {
        w.write_record([
            net.nodes[link.tail].id.as_str(),
            net.nodes[link.head].id.as_str(),
            link.kind.as_str(),
            link.line.map_or("", |l| net.lines[l].id.as_str()),
            &format!("{flow:.9}"),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let summary = serde_json::json!({
        "objective": sol.objective,
        "split": sol.split,
        "shares": mode_shares(&net, &sol),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("objective {:.6}", sol.objective);
    finish_manifest(manifest, out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    method: &'a str,
    status: BendersStatus,
    upper_bound: f64,
    lower_bound: f64,
    gap_percent: f64,
    iterations: usize,
    evaluated_designs: usize,
    master_nodes: usize,
    wall_time: f64,
    mccormick_checked: usize,
    mccormick_violations: usize,
}

impl<'a> RunSummary<'a> {
    fn of(run: &'a BendersRun) -> Self {
        RunSummary {
            method: &run.method,
            status: run.status,
            upper_bound: run.upper_bound,
            lower_bound: run.lower_bound,
            gap_percent: run.gap_percent(),
            iterations: run.iterations,
            evaluated_designs: run.evaluated_designs,
            master_nodes: run.master_nodes,
            wall_time: run.wall_time,
            mccormick_checked: run.audit.checked,
            mccormick_violations: run.audit.violations.len(),
        }
    }
}

fn solve_design(ctx: &BendersContext, method: Method, bc: &BendersConfig) -> Result<BendersRun, CliError> {
    Ok(match method {
        Method::Monolith => run_monolith(ctx, bc.time_limit)?.0,
        Method::Classic => run_classic(ctx, bc)?,
        Method::Enhanced => run_enhanced(ctx, bc)?,
    })
}

fn design(cli: &Cli, file: &FileConfig, a: &DesignArgs) -> Result<i32, CliError> {
    let cfg = design_config(file, Some(&a.common))?;
    let bc = benders_config(file, &a.solve)?;
    let net = load(cli, &a.common.network, &cfg)?;
    let manifest = start_manifest(
        cli,
        "design",
        serde_json::json!({ "design": cfg, "benders": bc, "method": format!("{:?}", a.solve.method) }),
        &inputs(cli, &a.common.network, &[]),
    )?;
    let ctx = BendersContext::new(&net, &cfg)?;
    let out = &a.common.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    if let Some(p) = &a.dump_model {
        let milp = build_design_milp(&net, &cfg, &ctx.cost, &ctx.bounds)?;
        let f = File::create(p).map_err(io_err(p))?;
        write_model(&milp.model, std::io::BufWriter::new(f)).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    }
    let run = solve_design(&ctx, a.solve.method, &bc)?;
    let trace = a.trace.clone().unwrap_or_else(|| out.join("trace.csv"));
    let f = File::create(&trace).map_err(io_err(&trace))?;
    write_trace(&run, f).map_err(csv_err(&trace))?;
    run.best_design.write_csv(&net, &cfg, &out.join("design.csv"))?;
    write_json(&out.join("summary.json"), &RunSummary::of(&run))?;
    println!("{} {:?}: cost {:.6}, gap {:.4}%, {} iterations", run.method, run.status, run.upper_bound, run.gap_percent(), run.iterations);
    println!("{}", run.best_design.describe(&net, &cfg));
    finish_manifest(manifest, out)?;
    Ok(status_code(run.status))
}

fn baseline(cli: &Cli, file: &FileConfig, a: &BaselineArgs) -> Result<i32, CliError> {
    let cfg = design_config(file, Some(&a.common))?;
    let bc = benders_config(file, &a.solve)?;
    let net = load(cli, &a.common.network, &cfg)?;
    let manifest = start_manifest(
        cli,
        "baseline",
        serde_json::json!({ "design": cfg, "benders": bc, "allow_closing": a.allow_closing }),
        &inputs(cli, &a.common.network, &[]),
    )?;
    let res = solve_baseline(&net, &cfg, &bc, !a.allow_closing)?;
    let out = &a.common.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("routes.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for r in &res.routes {
        w.serialize(r).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let path = out.join("unsatisfied.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["origin", "destination", "trips"]).map_err(csv_err(&path))?;
    for e in &res.unsatisfied {
        w.write_record([&net.nodes[e.origin].id, &net.nodes[e.destination].id, &e.trips.to_string()])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    write_json(&out.join("baseline.json"), &res.summary)?;
    println!("{:<10}{:>12}{:>8}{:>12}", "route", "frequency", "buses", "mean wait");
    for r in &res.routes {
        println!(
            "{:<10}{:>12}{:>8}{:>12}",
            r.route,
            r.frequency.map_or("closed".into(), |f| format!("{f}/hr")),
            r.buses,
            r.mean_wait.map_or("-".into(), |m| format!("{m:.2}"))
        );
    }
    println!("satisfied demand {:.2}%", res.summary.satisfied_pct);
    finish_manifest(manifest, out)?;
    Ok(status_code(res.run.status))
}

fn compare_cmd(cli: &Cli, file: &FileConfig, a: &CompareArgs) -> Result<i32, CliError> {
    let cfg = design_config(file, Some(&a.common))?;
    let bc = benders_config(file, &a.solve)?;
    let net = load(cli, &a.common.network, &cfg)?;
    let extra: Vec<&Path> = a.design.iter().map(|p| p.as_path()).collect();
    let manifest = start_manifest(
        cli,
        "compare",
        serde_json::json!({ "design": cfg, "benders": bc, "method": format!("{:?}", a.solve.method), "allow_closing": a.allow_closing }),
        &inputs(cli, &a.common.network, &extra),
    )?;
    let mut status = BendersStatus::Optimal;
    let integrated = match &a.design {
        Some(p) => DesignDecision::read_csv(&net, &cfg, p)?,
        None => {
            let ctx = BendersContext::new(&net, &cfg)?;
            let run = solve_design(&ctx, a.solve.method, &bc)?;
            status = run.status;
            run.best_design
        }
    };
    let base = solve_baseline(&net, &cfg, &bc, !a.allow_closing)?;
    if base.run.status != BendersStatus::Optimal {
        status = base.run.status;
    }
    let report = compare(&net, &cfg, &integrated, &base)?;
    let out = &a.common.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    report.write_json(&out.join("comparison.json"))?;
    print!("{report}");
    finish_manifest(manifest, out)?;
    Ok(status_code(status))
}

fn sweep(cli: &Cli, file: &FileConfig, a: &SweepArgs) -> Result<i32, CliError> {
    let cfg = design_config(file, Some(&a.common))?;
    let bc = benders_config(file, &a.solve)?;
    if a.buses.is_empty() || a.vehicles.is_empty() {
        return Err(CliError::Usage("--buses and --vehicles need at least one value".into()));
    }
    let net = load(cli, &a.common.network, &cfg)?;
    let manifest = start_manifest(
        cli,
        "sweep",
        serde_json::json!({ "design": cfg, "benders": bc, "buses": a.buses, "vehicles": a.vehicles }),
        &inputs(cli, &a.common.network, &[]),
    )?;
    let grid = run_sensitivity(&net, &cfg, &bc, &a.buses, &a.vehicles);
    let out = &a.common.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("grid.csv");
    let f = File::create(&path).map_err(io_err(&path))?;
    grid.write_csv(f).map_err(csv_err(&path))?;
    let mut code = EXIT_OK;
    for c in &grid.cells {
        if let Some(e) = &c.error {
            eprintln!("cell buses {} vehicles {}: {e}", c.buses, c.vehicles);
            code = EXIT_LIMIT;
        } else if c.status != Some(BendersStatus::Optimal) {
            code = EXIT_LIMIT;
        }
    }
    finish_manifest(manifest, out)?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuts_flag_sets_toggles() {
        let cli = Cli::try_parse_from([
            "modtransit",
            "design",
            "net",
            "--cuts",
            "disagg,clique-cover",
            "--epsilon",
            "0.5",
        ])
        .unwrap();
        let Command::Design(a) = &cli.command else { panic!() };
        let bc = benders_config(&FileConfig::default(), &a.solve).unwrap();
        assert!(bc.disaggregated && bc.clique_cover && !bc.cut_cleanup);
        assert_eq!(bc.pool_size, 1);
        assert_eq!(bc.epsilon, 0.5);
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let text = "[design]\nbus_budget = 40.0\nfleet_budget = 900.0\n[benders]\nepsilon = 0.1\npool_gap = 0.2\n";
        let file: FileConfig = toml::from_str(text).unwrap();
        let cli = Cli::try_parse_from(["modtransit", "design", "net", "--bus-budget", "55", "--pool-gap", "0.3"]).unwrap();
        let Command::Design(a) = &cli.command else { panic!() };
        let cfg = design_config(&file, Some(&a.common)).unwrap();
        let bc = benders_config(&file, &a.solve).unwrap();
        assert_eq!(cfg.bus_budget, 55.0);
        assert_eq!(cfg.fleet_budget, 900.0);
        assert_eq!(cfg.value_of_time, DesignConfig::default().value_of_time);
        assert_eq!(bc.epsilon, 0.1);
        assert_eq!(bc.pool_gap, 0.3);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[design]\nbus_budgt = 3.0\n").is_err());
    }

    #[test]
    fn method_alias() {
        let cli = Cli::try_parse_from(["modtransit", "design", "net", "--method", "gurobi-style-monolith"]).unwrap();
        let Command::Design(a) = &cli.command else { panic!() };
        assert_eq!(a.solve.method, Method::Monolith);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["modtransit", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["modtransit", "design"]), EXIT_USAGE);
        assert_eq!(run(["modtransit", "--version"]), EXIT_OK);
    }
}
