//! Experiment runner: Green tables, exact small-box checks, contour
//! tools, Monte Carlo estimates and the one-shot verification suite.
//!
//! Reports embed the fully resolved run configuration (seeds included);
//! single-worker runs are bit-reproducible from that alone. Exit status:
//! 0 on success, 1 when a verification fails, 2 on usage errors.

mod config;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use config::{
    resolve_temperatures, worker_cap, FileConfig, RunConfig, Site, UsageError,
    SCHEMA_VERSION,
};
use torus_coulomb::contours::{self, HeightConfig, SeparatingKind};
use torus_coulomb::exact::{self, TruncationSpec};
use torus_coulomb::greens;
use torus_coulomb::mc_cg::{self, ProposalKind};
use torus_coulomb::mc_dg;
use torus_coulomb::verify;

#[derive(Parser)]
#[command(
    name = "torus-coulomb",
    version,
    about = "Pinned integer heights and their dual Coulomb gas on an N x N torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the torus Green function table.
    Greens(GreensArgs),
    /// Exact truncated-sum verification on tiny boxes.
    #[command(subcommand)]
    Exact(ExactCommand),
    /// Contour extraction, exhaustive enumeration and randomized checks.
    #[command(subcommand)]
    Contours(ContourCommand),
    /// Metropolis estimates for the pinned height model.
    Dg(DgArgs),
    /// Dipole Monte Carlo for the neutral charge model.
    Cg(CgArgs),
    /// Run the verification suite and exit 0/1 accordingly.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// Side length of the torus.
    #[arg(long)]
    n: Option<usize>,
    /// Inverse temperature of the height model.
    #[arg(long)]
    beta: Option<f64>,
    /// Inverse temperature of the charge model (1/(4 beta)).
    #[arg(long = "beta-star")]
    beta_star: Option<f64>,
    /// First site, as "x,y".
    #[arg(long)]
    i: Option<Site>,
    /// Second site, as "x,y".
    #[arg(long)]
    j: Option<Site>,
    /// RNG seed; chains use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sweeps: Option<u64>,
    /// Sweeps discarded before measuring (default: max(sweeps/10, 1000)).
    #[arg(long = "burn-in")]
    burn_in: Option<u64>,
    /// Number of independent chains merged into one estimate.
    #[arg(long)]
    chains: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// key=value file mirroring the flags; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lift the enumeration budget guard.
    #[arg(long = "budget-override")]
    budget_override: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (csv or json)")),
        }
    }
}

impl OutputFormat {
    fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Args, Debug)]
struct GreensArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand, Debug)]
enum ExactCommand {
    /// Both sides of the partition-sum duality by full enumeration.
    Duality(ExactArgs),
    /// Residual of the cross-model moment identity.
    CrossIdentity(ExactArgs),
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Height cutoff K_x.
    #[arg(long)]
    kx: Option<u32>,
    /// Charge cutoff K_m.
    #[arg(long)]
    km: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum ContourCommand {
    /// Sample a configuration with x_i > x_j and print its separating
    /// contour.
    Extract(ContourArgs),
    /// Exhaustively count separating loops and winding pairs by length.
    Enumerate(ContourArgs),
    /// Randomized exactness checks (gradient identity, energy drop,
    /// homology, balance).
    Verify(ContourArgs),
}

#[derive(Args, Debug)]
struct ContourArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Longest total contour length enumerated.
    #[arg(long = "max-len")]
    max_len: Option<usize>,
    /// Number of random configurations checked.
    #[arg(long)]
    samples: Option<u64>,
}

#[derive(Args, Debug)]
struct DgArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Deepest tail level reported: P(|gap| >= k) for k = 1..=k_max.
    #[arg(long = "k-max")]
    k_max: Option<usize>,
}

#[derive(Args, Debug)]
struct CgArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dipole proposal: nn (nearest neighbor) or uniform.
    #[arg(long)]
    proposal: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Reduced sample: Green identities to N=8, N=2 duality, 10^3 contour
    /// configurations.
    #[arg(long)]
    quick: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<torus_coulomb::Error> for CliError {
    fn from(e: torus_coulomb::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Greens(args) => run_greens(args),
        Command::Exact(ExactCommand::Duality(args)) => run_duality(args),
        Command::Exact(ExactCommand::CrossIdentity(args)) => run_cross_identity(args),
        Command::Contours(ContourCommand::Extract(args)) => run_contour_extract(args),
        Command::Contours(ContourCommand::Enumerate(args)) => run_contour_enumerate(args),
        Command::Contours(ContourCommand::Verify(args)) => run_contour_verify(args),
        Command::Dg(args) => run_dg(args),
        Command::Cg(args) => run_cg(args),
        Command::Verify(args) => run_verify(args),
    }
}

/// Merge a config file (if any) under the flags of a CommonArgs.
fn merged(common: &CommonArgs) -> Result<(CommonArgs, FileConfig), CliError> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut out = common.clone();
    if out.n.is_none() {
        out.n = file.get("n")?;
    }
    if out.beta.is_none() {
        out.beta = file.get("beta")?;
    }
    if out.beta_star.is_none() {
        out.beta_star = file.get("beta-star")?;
    }
    if out.i.is_none() {
        out.i = file.get("i")?;
    }
    if out.j.is_none() {
        out.j = file.get("j")?;
    }
    if out.seed.is_none() {
        out.seed = file.get("seed")?;
    }
    if out.sweeps.is_none() {
        out.sweeps = file.get("sweeps")?;
    }
    if out.burn_in.is_none() {
        out.burn_in = file.get("burn-in")?;
    }
    if out.chains.is_none() {
        out.chains = file.get("chains")?;
    }
    if out.format.is_none() {
        out.format = file.get("format")?;
    }
    if out.out.is_none() {
        out.out = file.get::<String>("out")?.map(PathBuf::from);
    }
    if !out.budget_override {
        out.budget_override = file.get_flag("budget-override")?;
    }
    Ok((out, file))
}

fn need_n(common: &CommonArgs) -> Result<usize, CliError> {
    common.n.ok_or_else(|| CliError::Usage("--n is required".into()))
}

fn need_sites(common: &CommonArgs, n: usize) -> Result<(usize, usize, Site, Site), CliError> {
    let si = common.i.ok_or_else(|| CliError::Usage("--i x,y is required".into()))?;
    let sj = common.j.ok_or_else(|| CliError::Usage("--j x,y is required".into()))?;
    Ok((si.index(n)?, sj.index(n)?, si, sj))
}

fn mc_params(common: &CommonArgs) -> (u64, u64, u64, usize) {
    let sweeps = common.sweeps.unwrap_or(100_000);
    let burn_in = common.burn_in.unwrap_or_else(|| (sweeps / 10).max(1_000));
    let seed = common.seed.unwrap_or(0);
    let chains = common.chains.unwrap_or(1).max(1);
    (sweeps, burn_in, seed, chains)
}

fn emit(common: &CommonArgs, content: String) -> Result<(), CliError> {
    match &common.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn json_report(config: &RunConfig, results: serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(&json!({
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "results": results,
    }))
    .expect("reports serialize");
    text.push('\n');
    text
}

fn announce(config: &RunConfig) {
    let mut line = format!("run: {} n={}", config.subcommand, config.n);
    if let Some(b) = config.beta {
        write!(line, " beta={b}").ok();
    }
    if let Some(bs) = config.beta_star {
        write!(line, " beta-star={bs}").ok();
    }
    if let (Some(i), Some(j)) = (config.i, config.j) {
        write!(line, " i=({},{}) j=({},{})", i.x, i.y, j.x, j.y).ok();
    }
    if let Some(seed) = config.seed {
        write!(line, " seed={seed}").ok();
    }
    eprintln!("{line}");
}

fn estimate_csv(reports: &[&torus_coulomb::stats::EstimateReport<f64>]) -> String {
    let mut out = String::from("observable,estimate,stderr,sweeps,seed\n");
    for r in reports {
        writeln!(out, "{},{},{},{},{}", r.observable, r.estimate, r.std_error, r.sweeps, r.seed)
            .ok();
    }
    out
}

fn run_greens(args: GreensArgs) -> Result<ExitCode, CliError> {
    let (common, _) = merged(&args.common)?;
    let n = need_n(&common)?;
    let format = common.format.unwrap_or(OutputFormat::Csv);
    let table = greens::compute_green::<f64>(n)?;
    let mut config = RunConfig::new("greens", n);
    config.format = format.name().into();
    announce(&config);
    let content = match format {
        OutputFormat::Csv => {
            let mut out = String::from("dx,dy,g\n");
            for (dx, dy, g) in table.rows() {
                writeln!(out, "{dx},{dy},{g}").ok();
            }
            out
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Row {
                dx: usize,
                dy: usize,
                g: f64,
            }
            #[derive(Serialize)]
            struct Gap {
                distance: usize,
                gap: f64,
            }
            let rows: Vec<Row> =
                table.rows().map(|(dx, dy, g)| Row { dx, dy, g }).collect();
            // Measured growth of the potential gap along an axis.
            let gaps: Vec<Gap> = (1..=n / 2)
                .map(|d| Gap { distance: d, gap: table.potential_diff(0, d) })
                .collect();
            json_report(&config, json!({ "values": rows, "axis_gaps": gaps }))
        }
    };
    emit(&common, content)?;
    Ok(ExitCode::SUCCESS)
}

fn trunc_from(args: &ExactArgs, file: &FileConfig, default_kx: u32, default_km: u32) -> Result<TruncationSpec, CliError> {
    let kx = match args.kx {
        Some(v) => v,
        None => file.get("kx")?.unwrap_or(default_kx),
    };
    let km = match args.km {
        Some(v) => v,
        None => file.get("km")?.unwrap_or(default_km),
    };
    let mut trunc = TruncationSpec::new(kx, km);
    if args.common.budget_override {
        trunc = trunc.with_budget(u128::MAX);
    }
    Ok(trunc)
}

fn run_duality(args: ExactArgs) -> Result<ExitCode, CliError> {
    let (common, file) = merged(&args.common)?;
    let n = need_n(&common)?;
    let (beta, beta_star) = resolve_temperatures(common.beta, common.beta_star)?;
    let trunc = trunc_from(&args, &file, 6, 4)?;
    let report = exact::duality_report(n, beta, &trunc)?;
    let mut config = RunConfig::new("exact duality", n);
    config.beta = Some(beta);
    config.beta_star = Some(beta_star);
    config.height_cutoff = Some(trunc.height_cutoff);
    config.charge_cutoff = Some(trunc.charge_cutoff);
    config.budget_override = common.budget_override;
    announce(&config);
    emit(&common, json_report(&config, serde_json::to_value(&report).expect("serializable")))?;
    Ok(ExitCode::SUCCESS)
}

fn run_cross_identity(args: ExactArgs) -> Result<ExitCode, CliError> {
    let (common, file) = merged(&args.common)?;
    let n = need_n(&common)?;
    let (beta, beta_star) = resolve_temperatures(common.beta, common.beta_star)?;
    let (i, j, si, sj) = need_sites(&common, n)?;
    let trunc = trunc_from(&args, &file, 3, 4)?;
    let report = exact::cross_identity_report(n, beta_star, i, j, &trunc)?;
    let mut config = RunConfig::new("exact cross-identity", n);
    config.beta = Some(beta);
    config.beta_star = Some(beta_star);
    config.i = Some(si);
    config.j = Some(sj);
    config.height_cutoff = Some(trunc.height_cutoff);
    config.charge_cutoff = Some(trunc.charge_cutoff);
    config.budget_override = common.budget_override;
    announce(&config);
    emit(&common, json_report(&config, serde_json::to_value(&report).expect("serializable")))?;
    Ok(ExitCode::SUCCESS)
}

fn run_contour_extract(args: ContourArgs) -> Result<ExitCode, CliError> {
    let (common, _) = merged(&args.common)?;
    let n = need_n(&common)?;
    let (i, j, si, sj) = need_sites(&common, n)?;
    let seed = common.seed.unwrap_or(0);
    let mut config = RunConfig::new("contours extract", n);
    config.i = Some(si);
    config.j = Some(sj);
    config.seed = Some(seed);
    announce(&config);
    let mut rng = rand_seed(seed);
    let mut x = HeightConfig::random(n, 3, &mut rng)?;
    let mut attempts = 0u32;
    while x.get(i) <= x.get(j) {
        x = HeightConfig::random(n, 3, &mut rng)?;
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(CliError::Usage("could not sample a configuration with x_i > x_j".into()));
        }
    }
    let sep = contours::separating_contour(&x, i, j)?;
    #[derive(Serialize)]
    struct EdgeOut {
        tail: (usize, usize),
        head: (usize, usize),
        dir: (i32, i32),
    }
    let contour_json: Vec<serde_json::Value> = sep
        .contours()
        .iter()
        .map(|c| {
            json!({
                "length": c.len(),
                "period": c.period(),
                "edges": c
                    .edges()
                    .iter()
                    .map(|e| EdgeOut { tail: e.tail, head: e.head, dir: e.dir })
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let kind = match sep.kind() {
        SeparatingKind::SingleLoop => "single_loop",
        SeparatingKind::WindingPair => "winding_pair",
    };
    let results = json!({
        "kind": kind,
        "total_length": sep.total_len(),
        "inside_count": sep.inside_count(),
        "heights": x.heights(),
        "contours": contour_json,
    });
    emit(&common, json_report(&config, results))?;
    Ok(ExitCode::SUCCESS)
}

fn rand_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn run_contour_enumerate(args: ContourArgs) -> Result<ExitCode, CliError> {
    let (common, file) = merged(&args.common)?;
    let n = need_n(&common)?;
    let (i, j, si, sj) = need_sites(&common, n)?;
    let max_len = match args.max_len {
        Some(v) => v,
        None => file.get("max-len")?.unwrap_or(8),
    };
    let budget = if common.budget_override { u128::MAX } else { contours::DEFAULT_ENUM_BUDGET };
    let counts = contours::enumerate_separating_contours_with_budget(n, i, j, max_len, budget)?;
    let format = common.format.unwrap_or(OutputFormat::Csv);
    let mut config = RunConfig::new("contours enumerate", n);
    config.i = Some(si);
    config.j = Some(sj);
    config.max_len = Some(max_len);
    config.budget_override = common.budget_override;
    config.format = format.name().into();
    announce(&config);
    let content = match format {
        OutputFormat::Csv => {
            let mut out = String::from("length,count,bound\n");
            for (&len, &c) in &counts {
                let bound = 3.0 * (len as f64).powi(2) * 3f64.powi(len as i32);
                writeln!(out, "{len},{c},{bound}").ok();
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = counts
                .iter()
                .map(|(&len, &c)| {
                    json!({
                        "length": len,
                        "count": c,
                        "bound": 3.0 * (len as f64).powi(2) * 3f64.powi(len as i32),
                    })
                })
                .collect();
            json_report(&config, json!({ "counts": rows }))
        }
    };
    emit(&common, content)?;
    Ok(ExitCode::SUCCESS)
}

fn run_contour_verify(args: ContourArgs) -> Result<ExitCode, CliError> {
    let (common, file) = merged(&args.common)?;
    let n = need_n(&common)?;
    let samples = match args.samples {
        Some(v) => v,
        None => file.get("samples")?.unwrap_or(1_000),
    };
    let seed = common.seed.unwrap_or(0);
    let summary = verify::contour_sample_check(n, samples, seed)?;
    let mut config = RunConfig::new("contours verify", n);
    config.samples = Some(samples);
    config.seed = Some(seed);
    config.beta = common.beta;
    announce(&config);
    // With a temperature on the command line, also report the scalar
    // bounds it implies.
    let bounds = match common.beta {
        Some(beta) => {
            let phi = contours::contour_sum_bound(beta);
            json!({
                "beta": beta,
                "contour_sum_bound": phi,
                "mean_sq_diff_bound": contours::mean_sq_diff_bound(beta).ok(),
            })
        }
        None => serde_json::Value::Null,
    };
    let clean = summary.clean();
    emit(
        &common,
        json_report(&config, json!({ "summary": summary, "bounds": bounds, "passed": clean })),
    )?;
    Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_dg(args: DgArgs) -> Result<ExitCode, CliError> {
    let (common, file) = merged(&args.common)?;
    let n = need_n(&common)?;
    let (beta, beta_star) = resolve_temperatures(common.beta, common.beta_star)?;
    let (i, j, si, sj) = need_sites(&common, n)?;
    let (sweeps, burn_in, seed, chains) = mc_params(&common);
    let k_max = match args.k_max {
        Some(v) => v,
        None => file.get("k-max")?.unwrap_or(mc_dg::DEFAULT_K_MAX),
    };
    let seeds: Vec<u64> = (0..chains as u64).map(|c| seed + c).collect();
    let workers = worker_cap().min(seeds.len());
    let est = mc_dg::dg_estimate_multi::<f64>(n, beta, i, j, sweeps, burn_in, &seeds, workers, k_max)?;
    let format = common.format.unwrap_or(OutputFormat::Csv);
    let mut config = RunConfig::new("dg", n);
    config.beta = Some(beta);
    config.beta_star = Some(beta_star);
    config.i = Some(si);
    config.j = Some(sj);
    config.sweeps = Some(sweeps);
    config.burn_in = Some(burn_in);
    config.seed = Some(seed);
    config.seeds = Some(seeds);
    config.chains = Some(chains);
    config.k_max = Some(k_max);
    config.workers = workers;
    config.format = format.name().into();
    announce(&config);
    let content = match format {
        OutputFormat::Csv => {
            let mut reports = vec![&est.mean_sq_diff];
            reports.extend(est.tail_probabilities.iter());
            estimate_csv(&reports)
        }
        OutputFormat::Json => {
            json_report(&config, serde_json::to_value(&est).expect("serializable"))
        }
    };
    emit(&common, content)?;
    Ok(ExitCode::SUCCESS)
}

fn run_cg(args: CgArgs) -> Result<ExitCode, CliError> {
    let (common, file) = merged(&args.common)?;
    let n = need_n(&common)?;
    let (beta, beta_star) = resolve_temperatures(common.beta, common.beta_star)?;
    let (i, j, si, sj) = need_sites(&common, n)?;
    let (sweeps, burn_in, seed, chains) = mc_params(&common);
    let proposal_name = match &args.proposal {
        Some(p) => p.clone(),
        None => file.get::<String>("proposal")?.unwrap_or_else(|| "nn".into()),
    };
    let proposal = match proposal_name.as_str() {
        "nn" => ProposalKind::NearestNeighbor,
        "uniform" => ProposalKind::UniformPair,
        other => return Err(CliError::Usage(format!("unknown proposal {other:?} (nn or uniform)"))),
    };
    let seeds: Vec<u64> = (0..chains as u64).map(|c| seed + c).collect();
    let workers = worker_cap().min(seeds.len());
    let rep = mc_cg::cg_variance_multi::<f64>(
        n, beta_star, i, j, sweeps, burn_in, &seeds, workers, proposal,
    )?;
    if !rep.bounds_applicable {
        eprintln!(
            "warning: beta-star {beta_star} is above the sandwich threshold 1/12; bounds omitted"
        );
    }
    let format = common.format.unwrap_or(OutputFormat::Csv);
    let mut config = RunConfig::new("cg", n);
    config.beta = Some(beta);
    config.beta_star = Some(beta_star);
    config.i = Some(si);
    config.j = Some(sj);
    config.sweeps = Some(sweeps);
    config.burn_in = Some(burn_in);
    config.seed = Some(seed);
    config.seeds = Some(seeds);
    config.chains = Some(chains);
    config.proposal = Some(proposal_name);
    config.workers = workers;
    config.format = format.name().into();
    announce(&config);
    let content = match format {
        OutputFormat::Csv => estimate_csv(&[&rep.second_moment, &rep.mean_voltage]),
        OutputFormat::Json => {
            json_report(&config, serde_json::to_value(&rep).expect("serializable"))
        }
    };
    emit(&common, content)?;
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    let (common, _) = merged(&args.common)?;
    let results = verify::run_all(args.quick)?;
    for r in &results {
        println!("{}", r.line());
    }
    let passed = verify::all_passed(&results);
    if let Some(path) = &common.out {
        let mut config = RunConfig::new("verify", 0);
        config.samples = Some(results.len() as u64);
        let content = json_report(
            &config,
            json!({ "passed": passed, "criteria": results }),
        );
        std::fs::write(path, content)?;
    }
    println!("verify: {}", if passed { "all criteria passed" } else { "FAILURES present" });
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
