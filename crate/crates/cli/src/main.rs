use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use swd_cli::input::read_measure;
use swd_cli::report::{write_columns, write_json, BracketEntry, BracketReport, DistanceReport, ValueSummary};
use swd_cli::{CliError, CliResult};
use swd_core::brackets::{build_brackets, entropy_integral_bound, EntropyBound};
use swd_core::inference::{concentration_bound, rate_experiment, two_sample_test, Decision, EstimatorConfig, StatisticKind};
use swd_core::limits::{
    empirical_rootn_from_reference, simulate_limit_one_sample, simulate_limit_paired, simulate_limit_vs_nu, CylinderGrid,
    DirectionSource, GridConfig, RootnStatistic,
};
use swd_core::maxsliced::{msw1, MaxSlicedConfig};
use swd_core::measures::{generate, DistributionSpec};
use swd_core::ot1d::{wp_1d, Sorted1D};
use swd_core::projections::{sample_gaussian_dirs, sample_sphere, GaussianScale};
use swd_core::sliced::{estimate_plan_inputs, plan_projections, sw_hat, sw_p, sw_tilde_p_pow, PlanParams, PlanVariant};

const PILOT_DIRECTIONS: usize = 16;

#[derive(Parser)]
#[command(name = "swd", version, about = "Sliced and max-sliced Wasserstein distances, limit laws and two-sample tests")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random choice; required by commands that sample.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two point clouds.
    Distance(DistanceArgs),
    /// Bootstrap two-sample test; exits 3 on rejection.
    Test(TestArgs),
    /// Convergence-rate experiment on synthetic data.
    Rates(RatesArgs),
    /// Draws from a simulated limit law, as CSV.
    Limits(LimitsArgs),
    /// Bracket cover of 1-Lipschitz functions on [0, M].
    Brackets(BracketsArgs),
    /// Number of random projections for an (epsilon, delta) guarantee.
    Plan(PlanArgs),
    /// Concentration and bracketing-entropy bounds.
    Bound(BoundArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistanceKind {
    Sw,
    SwHat,
    SwTilde,
    Msw1,
    W1d,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlanL {
    Conservative,
    Pilot,
}

#[derive(Args)]
struct MaxSlicedArgs {
    /// Optimizer restarts for msw1.
    #[arg(long)]
    restarts: Option<usize>,
    /// Ascent iterations per restart for msw1.
    #[arg(long)]
    max_iters: Option<usize>,
}

impl MaxSlicedArgs {
    fn config(&self, seed: u64, restarts: usize, max_iters: usize) -> MaxSlicedConfig {
        MaxSlicedConfig {
            restarts: self.restarts.unwrap_or(restarts),
            max_iters: self.max_iters.unwrap_or(max_iters),
            seed,
            ..MaxSlicedConfig::default()
        }
    }
}

#[derive(Args)]
struct DistanceArgs {
    x: PathBuf,
    y: PathBuf,
    #[arg(long, value_enum)]
    kind: DistanceKind,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Fixed projection budget.
    #[arg(long, conflicts_with = "plan")]
    projections: Option<usize>,
    /// Let the planner choose the budget, e.g. `epsilon=0.05,delta=0.1`.
    #[arg(long)]
    plan: Option<String>,
    /// Which Lipschitz constant the planner uses.
    #[arg(long, value_enum, default_value = "conservative")]
    plan_l: PlanL,
    #[command(flatten)]
    max_sliced: MaxSlicedArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Statistic {
    Sw1,
    Msw1,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, value_enum)]
    statistic: Statistic,
    /// Directions for sw1 (drawn once from the seed).
    #[arg(long, default_value_t = 100)]
    projections: usize,
    #[command(flatten)]
    max_sliced: MaxSlicedArgs,
}

impl EstimatorArgs {
    fn config(&self, seed: u64) -> EstimatorConfig {
        match self.statistic {
            Statistic::Sw1 => EstimatorConfig::Sw1 { projections: self.projections, direction_seed: seed },
            Statistic::Msw1 => EstimatorConfig::Msw1(self.max_sliced.config(seed, 4, 50)),
        }
    }
}

#[derive(Args)]
struct TestArgs {
    x: PathBuf,
    y: PathBuf,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    boot_reps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dist {
    Gaussian,
    Cube,
    Points,
}

/// Synthetic distribution selector.
#[derive(Args)]
struct DistArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    dist: Dist,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Gaussian mean as comma-separated coordinates (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mean: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Cube side length.
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// CSV of support points for `--dist points`.
    #[arg(long)]
    points: Option<PathBuf>,
}

impl DistArgs {
    fn spec(&self) -> CliResult<DistributionSpec> {
        Ok(match self.dist {
            Dist::Gaussian => {
                let mean = self.mean.clone().unwrap_or_else(|| vec![0.0; self.dim]);
                DistributionSpec::Gaussian { mean, variance: self.variance }
            }
            Dist::Cube => DistributionSpec::UniformCube { dim: self.dim, side: self.side },
            Dist::Points => {
                let path = self.points.as_ref().ok_or_else(|| usage("--dist points needs --points FILE"))?;
                let m = read_measure(path)?;
                DistributionSpec::PointList(m.rows().map(<[f64]>::to_vec).collect())
            }
        })
    }
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, default_value_t = 20_000)]
    reference_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    reps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitChoice {
    /// L1 norm of the Brownian-bridge process of the reference.
    OneSample,
    /// Signed functional against a second measure (`--nu`).
    VsNu,
    /// Signed functional of paired samples (`--nu` holds the partners).
    Paired,
}

#[derive(Args)]
struct LimitsArgs {
    #[arg(long, value_enum, default_value = "one-sample")]
    kind: LimitChoice,
    /// Reference sample standing in for the true measure (otherwise generated).
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long, default_value_t = 20_000)]
    reference_size: usize,
    #[arg(long)]
    nu: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    /// Also simulate √n times the finite-sample statistic at this n.
    #[arg(long)]
    empirical_n: Option<usize>,
    #[arg(long)]
    sphere_resolution: Option<usize>,
    #[arg(long)]
    quantile_nodes: Option<usize>,
    #[arg(long)]
    range_nodes: Option<usize>,
    #[arg(long)]
    range_expansion: Option<f64>,
}

#[derive(Args)]
struct BracketsArgs {
    #[arg(long)]
    m: f64,
    #[arg(long)]
    epsilon: f64,
    /// Include every bracket's node values.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct PlanArgs {
    /// One of sw-pow, sw-root, sw1-marginal, sw-hat, sw-tilde, sw-rescaled.
    #[arg(long)]
    variant: String,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    l_tilde: Option<f64>,
    #[arg(long)]
    delta_mu: Option<f64>,
    #[arg(long)]
    delta_nu: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(subcommand)]
    which: BoundKind,
}

#[derive(Subcommand)]
enum BoundKind {
    /// Tail bound for the deviation of the empirical distance from its mean.
    Concentration {
        #[arg(long, value_enum)]
        statistic: Statistic,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        d: usize,
    },
    /// Bracketing entropy integral from moment bounds.
    Entropy {
        #[arg(long)]
        d: usize,
        /// Moment order excess; `inf` is accepted.
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        m2: f64,
        #[arg(long)]
        m2pd: f64,
    },
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn need_seed(seed: Option<u64>) -> CliResult<u64> {
    seed.ok_or_else(|| usage("--seed is required for this command"))
}

/// Parses `epsilon=..,delta=..`.
fn parse_plan(spec: &str) -> CliResult<(f64, f64)> {
    let (mut eps, mut delta) = (None, None);
    for part in spec.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| usage(format!("bad plan item {part:?}")))?;
        let v: f64 = value.trim().parse().map_err(|_| usage(format!("bad number in plan item {part:?}")))?;
        match key.trim() {
            "epsilon" | "eps" => eps = Some(v),
            "delta" => delta = Some(v),
            other => return Err(usage(format!("unknown plan key {other:?}"))),
        }
    }
    match (eps, delta) {
        (Some(e), Some(d)) => Ok((e, d)),
        _ => Err(usage("--plan needs both epsilon and delta")),
    }
}

fn json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_json(&mut buf, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}

fn cmd_distance(a: &DistanceArgs, seed: Option<u64>) -> CliResult<Vec<u8>> {
    let x = read_measure(&a.x)?;
    let y = read_measure(&a.y)?;
    if x.dim() != y.dim() {
        return Err(usage(format!("dimension mismatch: {} vs {}", x.dim(), y.dim())));
    }
    let d = x.dim();
    let mut report = DistanceReport {
        kind: a.kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
        p: a.p,
        dim: d,
        m: x.len(),
        n: y.len(),
        value: 0.0,
        std_error: None,
        estimand: None,
        directions: None,
        per_projection: None,
        argmax: None,
        plan: None,
        plan_inputs: None,
        seed: None,
    };
    match a.kind {
        DistanceKind::W1d => {
            if d != 1 {
                return Err(usage(format!("w1d needs one-dimensional data, got dimension {d}")));
            }
            if a.plan.is_some() || a.projections.is_some() {
                return Err(usage("w1d takes no projection budget"));
            }
            let sx = Sorted1D::from_samples(x.points(), x.weights())?;
            let sy = Sorted1D::from_samples(y.points(), y.weights())?;
            report.value = wp_1d(&sx, &sy, a.p)?;
        }
        DistanceKind::Msw1 => {
            if a.plan.is_some() || a.projections.is_some() {
                return Err(usage("msw1 takes no projection budget"));
            }
            if a.p != 1.0 {
                return Err(usage("msw1 is defined for p = 1 only"));
            }
            let seed = need_seed(seed)?;
            let r = msw1(&x, &y, &a.max_sliced.config(seed, 8, 100))?;
            report.value = r.value;
            report.argmax = Some(r.argmax);
            report.seed = Some(seed);
        }
        DistanceKind::Sw | DistanceKind::SwHat | DistanceKind::SwTilde => {
            let seed = need_seed(seed)?;
            report.seed = Some(seed);
            let count = match (&a.plan, a.projections) {
                (Some(spec), _) => {
                    let (eps, delta) = parse_plan(spec)?;
                    let pilot = sample_sphere(d, PILOT_DIRECTIONS, seed.wrapping_add(1))?;
                    let inputs = estimate_plan_inputs(&x, &y, a.p, &pilot)?;
                    let params = match a.plan_l {
                        PlanL::Conservative => inputs.conservative_params(),
                        PlanL::Pilot => inputs.pilot_params(),
                    };
                    let variant = match a.kind {
                        DistanceKind::Sw => PlanVariant::SwRoot,
                        DistanceKind::SwHat => PlanVariant::SwHat,
                        _ => PlanVariant::SwTilde,
                    };
                    let plan = plan_projections(variant, eps, delta, params)?;
                    let n = usize::try_from(plan.n_required).map_err(|_| usage("planned budget does not fit in memory"))?;
                    report.plan = Some(plan);
                    report.plan_inputs = Some(inputs);
                    n
                }
                (None, Some(k)) => k,
                (None, None) => return Err(usage("give --projections K or --plan epsilon=..,delta=..")),
            };
            let est = match a.kind {
                DistanceKind::Sw => sw_p(&x, &y, a.p, &sample_sphere(d, count, seed)?)?,
                DistanceKind::SwHat => sw_hat(&x, &y, a.p, &sample_sphere(d, count, seed)?)?,
                _ => sw_tilde_p_pow(&x, &y, a.p, &sample_gaussian_dirs(d, count, GaussianScale::InverseDim, seed)?)?,
            };
            report.value = est.value;
            report.std_error = Some(est.std_error);
            report.estimand = Some(est.estimand);
            report.directions = Some(est.dirs);
            report.per_projection = Some(ValueSummary::of(&est.per_projection));
        }
    }
    json(&report)
}

fn cmd_test(a: &TestArgs, seed: Option<u64>) -> CliResult<(Vec<u8>, bool)> {
    let seed = need_seed(seed)?;
    let x = read_measure(&a.x)?;
    let y = read_measure(&a.y)?;
    let report = two_sample_test(&x, &y, a.alpha, a.boot_reps, &a.estimator.config(seed), seed)?;
    Ok((json(&report)?, report.decision == Decision::Reject))
}

fn cmd_rates(a: &RatesArgs, seed: Option<u64>) -> CliResult<Vec<u8>> {
    let seed = need_seed(seed)?;
    let table = rate_experiment(&a.dist.spec()?, a.reference_size, &a.n_grid, a.reps, &a.estimator.config(seed), seed)?;
    json(&table)
}

fn cmd_limits(a: &LimitsArgs, seed: Option<u64>) -> CliResult<Vec<u8>> {
    let seed = need_seed(seed)?;
    let reference = match &a.reference {
        Some(path) => read_measure(path)?,
        None => generate(&a.dist.spec()?, a.reference_size, seed)?,
    };
    let nu = a.nu.as_deref().map(read_measure).transpose()?;
    let base = GridConfig::for_dim(reference.dim());
    let config = GridConfig {
        sphere_resolution: a.sphere_resolution.unwrap_or(base.sphere_resolution),
        quantile_nodes: a.quantile_nodes.unwrap_or(base.quantile_nodes),
        range_nodes: a.range_nodes.unwrap_or(base.range_nodes),
        range_expansion: a.range_expansion.unwrap_or(base.range_expansion),
    };
    let (limit, grid) = match (a.kind, &nu) {
        (LimitChoice::OneSample, _) => {
            let grid = CylinderGrid::build(&[&reference], &config)?;
            (simulate_limit_one_sample(&reference, &grid, a.reps, seed)?, grid)
        }
        (LimitChoice::VsNu, Some(nu)) => {
            let grid = CylinderGrid::build(&[&reference, nu], &config)?;
            (simulate_limit_vs_nu(&reference, nu, &grid, a.reps, seed)?, grid)
        }
        (LimitChoice::Paired, Some(nu)) => {
            let grid = CylinderGrid::build(&[&reference, nu], &config)?;
            (simulate_limit_paired(&reference, nu, &grid, a.reps, seed)?, grid)
        }
        _ => return Err(usage("this limit kind needs --nu FILE")),
    };
    let empirical = match a.empirical_n {
        None => None,
        Some(n) => {
            let statistic = match (a.kind, &nu) {
                (LimitChoice::OneSample, _) => RootnStatistic::Sw1OneSample,
                (LimitChoice::VsNu, Some(nu)) => RootnStatistic::Sw1VsNu(nu),
                _ => return Err(usage("--empirical-n is available for one-sample and vs-nu only")),
            };
            let dirs = DirectionSource::Fixed(grid.dirs().clone());
            Some(empirical_rootn_from_reference(&reference, statistic, n, a.reps, &dirs, seed.wrapping_add(1))?)
        }
    };
    let mut buf = Vec::new();
    let written = match &empirical {
        Some(e) => write_columns(&mut buf, &["limit", "empirical"], &[&limit.draws, &e.draws]),
        None => write_columns(&mut buf, &["limit"], &[&limit.draws]),
    };
    written.map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}

/// Brackets beyond this many are not gap-audited one by one.
const AUDIT_LIMIT: u64 = 1 << 16;

fn cmd_brackets(a: &BracketsArgs) -> CliResult<Vec<u8>> {
    let set = build_brackets(a.m, a.epsilon)?;
    let audited = set.count().min(AUDIT_LIMIT);
    let (mut max_gap, mut min_gap) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..audited {
        let g = set.bracket(i)?.gap();
        max_gap = max_gap.max(g);
        min_gap = min_gap.min(g);
    }
    let brackets = if a.list {
        let all = set.brackets()?;
        Some(all.into_iter().map(|b| BracketEntry { lower: b.lower, upper: b.upper }).collect())
    } else {
        None
    };
    json(&BracketReport {
        m: a.m,
        epsilon: a.epsilon,
        count: set.count(),
        nodes: set.nodes().to_vec(),
        audited,
        max_gap,
        min_gap,
        gaps_within_epsilon: max_gap <= a.epsilon + 1e-12,
        brackets,
    })
}

fn cmd_plan(a: &PlanArgs) -> CliResult<Vec<u8>> {
    let variant = PlanVariant::from_name(&a.variant).ok_or_else(|| {
        let names: Vec<&str> = PlanVariant::ALL.iter().map(|v| v.name()).collect();
        usage(format!("unknown variant {:?}; expected one of {}", a.variant, names.join(", ")))
    })?;
    let params = PlanParams { l: a.l, l_tilde: a.l_tilde, delta_mu: a.delta_mu, delta_nu: a.delta_nu, p: a.p, d: a.d };
    json(&plan_projections(variant, a.epsilon, a.delta, params)?)
}

#[derive(Serialize)]
struct ConcentrationReport {
    statistic: StatisticKind,
    n: usize,
    t: f64,
    sigma2: f64,
    d: usize,
    bound: f64,
}

#[derive(Serialize)]
struct EntropyReport {
    d: usize,
    delta: f64,
    m2: f64,
    m2pd: f64,
    integral: EntropyBound,
}

fn cmd_bound(a: &BoundArgs) -> CliResult<Vec<u8>> {
    match a.which {
        BoundKind::Concentration { statistic, n, t, sigma2, d } => {
            let kind = match statistic {
                Statistic::Sw1 => StatisticKind::Sw1,
                Statistic::Msw1 => StatisticKind::Msw1,
            };
            let bound = concentration_bound(kind, n, t, sigma2, d)?;
            json(&ConcentrationReport { statistic: kind, n, t, sigma2, d, bound })
        }
        BoundKind::Entropy { d, delta, m2, m2pd } => {
            let integral = entropy_integral_bound(d, delta, m2, m2pd)?;
            json(&EntropyReport { d, delta, m2, m2pd, integral })
        }
    }
}

fn run(cli: &Cli) -> CliResult<(Vec<u8>, bool)> {
    let mut reject = false;
    let bytes = match &cli.command {
        Command::Distance(a) => cmd_distance(a, cli.seed)?,
        Command::Test(a) => {
            let (bytes, r) = cmd_test(a, cli.seed)?;
            reject = r;
            bytes
        }
        Command::Rates(a) => cmd_rates(a, cli.seed)?,
        Command::Limits(a) => cmd_limits(a, cli.seed)?,
        Command::Brackets(a) => cmd_brackets(a)?,
        Command::Plan(a) => cmd_plan(a)?,
        Command::Bound(a) => cmd_bound(a)?,
    };
    Ok((bytes, reject))
}

fn emit(cli: &Cli, bytes: Vec<u8>) -> CliResult<()> {
    let result = match &cli.out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().lock().write_all(&bytes),
    };
    result.map_err(|e| CliError::Runtime(format!("writing output: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("usage error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("runtime error: {e}");
            return ExitCode::from(4);
        }
    }
    let outcome = run(&cli).and_then(|(output, reject)| emit(&cli, output).map(|()| reject));
    match outcome {
        Ok(true) => ExitCode::from(3),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
