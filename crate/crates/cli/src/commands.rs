use std::fmt;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use superhedge_core::decomposition::{
    all_spot_densities, optional_decompose, verify_decomposition, SupermartingaleSurface, SurfaceFile,
};
use superhedge_core::estimation::{estimate_a, EstimationReport, PriceSample, StatisticKind, StatisticSpec};
use superhedge_core::measures::{integral_representation_check, mixture_density_in, verify_martingale};
use superhedge_core::model::{EvolutionModel, DEFAULT_CAP};
use superhedge_core::oracle::{self, CounterRng, ModelShape, OracleBudget};
use superhedge_core::pricing::{self, PathFunctional, Payoff, PriceMethod, SearchConfig, SearchMode};
use superhedge_core::report::to_json;
use superhedge_core::tree::ScenarioTree;
use superhedge_core::Error;

use crate::{ClaimArgs, Command, DecomposeArgs, EstimateArgs, IntervalArgs, Method, OracleCommand, PriceArgs, Statistic, VerifyArgs};

/// Spot measures checked by `verify` and `decompose`.
const SPOT_CAP: u64 = 100_000;

#[derive(Debug)]
pub enum CliError {
    Core { context: String, source: Error },
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core { source, .. } if source.is_budget() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core { context, source } => write!(f, "{context}: {source}"),
            CliError::Failed(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Result<T>;
}

impl<T> Context<T> for superhedge_core::Result<T> {
    fn context(self, what: impl fmt::Display) -> Result<T> {
        self.map_err(|source| CliError::Core { context: what.to_string(), source })
    }
}

fn load_model(path: &Path) -> Result<EvolutionModel> {
    EvolutionModel::from_json_file(path).context(format!("--model {}", path.display()))
}

fn payoff_of(claim: &ClaimArgs) -> Result<Payoff> {
    Payoff::from_name(claim.payoff.name(), claim.strike).context("--strike")
}

fn emit(value: &impl Serialize, out: Option<&Path>, flag: &str) -> Result<()> {
    if let Some(path) = out {
        let text = to_json(value).context("report")?;
        std::fs::write(path, text).map_err(Error::from).context(format!("{flag} {}", path.display()))?;
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || CliError::Failed(format!("--eps-range: expected LO,HI, got '{s}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    Ok([lo, hi])
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Price(a) => price(a),
        Command::Interval(a) => interval(a),
        Command::Estimate(a) => estimate(a),
        Command::Verify(a) => verify(a),
        Command::Decompose(a) => decompose(a),
        Command::Oracle(c) => oracle_cmd(c),
    }
}

fn price(args: PriceArgs) -> Result<()> {
    let payoff = payoff_of(&args.claim)?;
    let mode = match args.method {
        Method::Closed => None,
        Method::Exhaustive => Some(SearchMode::DiscreteExhaustive),
        Method::Grid => Some(SearchMode::Grid),
        Method::Ascent => Some(SearchMode::CoordinateAscent),
    };
    let method = match mode {
        None => PriceMethod::ClosedForm,
        Some(mode) => {
            let cfg = SearchConfig {
                mode,
                eps_range: parse_range(&args.eps_range)?,
                grid_points: args.grid_points,
                cap: args.cap.unwrap_or(DEFAULT_CAP),
                ..SearchConfig::default()
            };
            cfg.validate().context("--eps-range/--grid-points")?;
            PriceMethod::Search(cfg)
        }
    };
    let model = load_model(&args.claim.model)?;
    let report = pricing::price(&model, &payoff, &method).context("price")?;
    println!("{} K={} method={} value={}", report.payoff, args.claim.strike, report.method, report.value);
    if let Some(iv) = report.interval {
        println!("non-arbitrage interval [{}, {}]", iv.lower, iv.upper);
    }
    if let Some(g) = report.gap_bound {
        println!("grid gap bound {g}");
    }
    println!("{}", report.provenance);
    emit(&report, args.out.as_deref(), "--out")
}

fn interval(args: IntervalArgs) -> Result<()> {
    let payoff = payoff_of(&args.claim)?;
    let model = load_model(&args.claim.model)?;
    let (iv, report) = pricing::interval_report(&model, &payoff).context("interval")?;
    let br = |attained: bool, open: char, closed: char| if attained { closed } else { open };
    println!(
        "{} K={}: {}{}, {}{}",
        report.payoff,
        args.claim.strike,
        br(iv.attained_lower, '(', '['),
        iv.lower,
        iv.upper,
        br(iv.attained_upper, ')', ']')
    );
    println!("{}", report.provenance);
    emit(&report, args.out.as_deref(), "--out")
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let kind = match args.statistic {
        Statistic::ConstantOne => StatisticKind::ConstantOne,
        Statistic::CappedRatio => StatisticKind::CappedRatio,
        Statistic::IdentityTail => StatisticKind::IdentityTail {
            k: args.tail_k.ok_or_else(|| CliError::Failed("--tail-k is required for identity_tail".into()))?,
        },
        Statistic::Custom => {
            let text = args.table.as_deref().ok_or_else(|| CliError::Failed("--table is required for custom".into()))?;
            let table = text
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| CliError::Failed(format!("--table: cannot parse '{text}'")))?;
            StatisticKind::Custom { table }
        }
    };
    let spec = StatisticSpec::new(kind, args.tau0).context("--tau0")?;
    let sample = PriceSample::from_csv_file(&args.prices).context(format!("--prices {}", args.prices.display()))?;
    let params = estimate_a(&sample, &spec).context("estimate")?;
    let fmt_list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    println!("order statistics [{}]", fmt_list(&params.order_stats));
    println!("g [{}]", fmt_list(&params.g));
    println!("a [{}]", fmt_list(&params.a));
    if let Some(path) = &args.out {
        let text = to_json(&params.to_model()).context("model")?;
        std::fs::write(path, text).map_err(Error::from).context(format!("--out {}", path.display()))?;
    }
    emit(&EstimationReport::from(&params), args.report.as_deref(), "--report")
}

#[derive(Serialize)]
struct SpotSummary {
    count: usize,
    max_drift_residual: f64,
    all_martingale: bool,
    any_equivalent: bool,
}

#[derive(Serialize)]
struct IntegralRow {
    payoff: String,
    mixture: f64,
    spot_average: f64,
    deviation: f64,
}

fn verify(args: VerifyArgs) -> Result<()> {
    if !(args.tol > 0.0) {
        return Err(CliError::Failed(format!("--tol must be positive, got {}", args.tol)));
    }
    let model = load_model(&args.model)?;
    let tree = ScenarioTree::build(&model, DEFAULT_CAP).context("tree")?;
    let alphas = oracle::random_alpha(&model, args.alphas).context("--alphas")?;
    let density = mixture_density_in(&model, &tree, &alphas).context("mixture density")?;
    let mixture = verify_martingale(&model, &tree, &density, args.tol);

    let spots = all_spot_densities(&model, &tree, SPOT_CAP).context("spot measures")?;
    let mut spot = SpotSummary { count: spots.len(), max_drift_residual: 0.0, all_martingale: true, any_equivalent: false };
    for d in &spots {
        let r = verify_martingale(&model, &tree, d, args.tol);
        spot.max_drift_residual = spot.max_drift_residual.max(r.max_drift_residual);
        spot.all_martingale &= r.martingale;
        spot.any_equivalent |= r.equivalent;
    }

    let s0 = model.s0;
    let one = |_: &[usize], _: &[f64]| 1.0;
    let terminal = |_: &[usize], p: &[f64]| *p.last().expect("nonempty path");
    let call = Payoff::call(s0);
    let put = Payoff::asian_put(s0);
    let payoffs: [(&str, &dyn PathFunctional); 4] =
        [("one", &one), ("terminal", &terminal), ("call_at_s0", &call), ("asian_put_at_s0", &put)];
    let mut integral = Vec::new();
    let mut integral_ok = true;
    for (name, p) in payoffs {
        let c = integral_representation_check(&model, &alphas, p).context("integral representation")?;
        integral_ok &= c.deviation <= args.tol * c.mixture.abs().max(1.0);
        integral.push(IntegralRow {
            payoff: name.into(),
            mixture: c.mixture,
            spot_average: c.spot_average,
            deviation: c.deviation,
        });
    }

    let passed = mixture.martingale && mixture.equivalent && spot.all_martingale && integral_ok;
    println!(
        "mixture density (seed {}): normalization {:e}, drift {:e}, martingale {}, equivalent {}",
        args.alphas,
        mixture.max_normalization_residual,
        mixture.max_drift_residual,
        mixture.martingale,
        mixture.equivalent
    );
    println!(
        "spot measures: {} checked, max drift {:e}, all martingale {}, equivalent {}",
        spot.count, spot.max_drift_residual, spot.all_martingale, spot.any_equivalent
    );
    for r in &integral {
        println!("integral representation [{}]: deviation {:e}", r.payoff, r.deviation);
    }
    for f in mixture.failures.iter().take(10) {
        println!(
            "  failure at step {} history {:?}: normalization {:e}, drift {:e}",
            f.step, f.history, f.normalization, f.drift
        );
    }
    if let Some(path) = &args.density_out {
        emit(&density.records(&tree), Some(path), "--density-out")?;
    }
    let report = json!({
        "model": args.model.display().to_string(),
        "alphas_seed": args.alphas,
        "tol": args.tol,
        "mixture": mixture,
        "spot": spot,
        "integral": integral,
        "passed": passed,
    });
    emit(&report, args.out.as_deref(), "--out")?;
    if passed {
        println!("passed");
        Ok(())
    } else {
        Err(CliError::Failed(format!("verification failed for {} at tol {}", args.model.display(), args.tol)))
    }
}

fn decompose(args: DecomposeArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let tree = ScenarioTree::build(&model, DEFAULT_CAP).context("tree")?;
    let what = format!("--surface {}", args.surface.display());
    let text = std::fs::read_to_string(&args.surface).map_err(Error::from).context(&what)?;
    let file: SurfaceFile = serde_json::from_str(&text).map_err(Error::from).context(&what)?;
    let surface = SupermartingaleSurface::from_file(&tree, &file).context(&what)?;
    let dec = optional_decompose(&model, &tree, &surface).context("decompose")?;

    let mut densities = all_spot_densities(&model, &tree, SPOT_CAP).context("spot measures")?;
    let spot_count = densities.len();
    for k in 0..args.densities {
        let alphas = oracle::random_alpha(&model, args.seed.wrapping_add(k as u64)).context("random alpha")?;
        densities.push(mixture_density_in(&model, &tree, &alphas).context("mixture density")?);
    }
    let report = verify_decomposition(&model, &tree, &surface, &dec, &densities, args.tol).context("verify")?;
    println!("shift {}", dec.shift);
    println!(
        "min g {:e}, reconstruction {:e}, martingale residual {:e} over {} spot and {} mixture densities",
        report.min_g, report.max_reconstruction_residual, report.max_martingale_residual, spot_count, args.densities
    );
    let export = dec.export(&tree);
    let out = json!({
        "shift": export.shift,
        "nodes": export.nodes,
        "verification": report,
    });
    emit(&out, args.out.as_deref(), "--out")?;
    if report.passed {
        println!("passed");
        Ok(())
    } else {
        for f in report.failures.iter().take(10) {
            println!("  {} at step {} history {:?} atom {:?}: {:e}", f.kind, f.step, f.history, f.atom, f.value);
        }
        Err(CliError::Failed("decomposition verification failed".into()))
    }
}

fn oracle_cmd(cmd: OracleCommand) -> Result<()> {
    let budget = OracleBudget::default();
    match cmd {
        OracleCommand::Sup { claim, out } => {
            let payoff = payoff_of(&claim)?;
            let model = load_model(&claim.model)?;
            let (value, sel) = oracle::brute_sup_selections(&model, &payoff, &budget).context("oracle sup")?;
            println!("{} K={} brute-force sup {value} at {:?}", payoff.name(), claim.strike, sel.pairs);
            emit(&json!({ "payoff": payoff.name(), "strike": claim.strike, "value": value, "selection": sel }), out.as_deref(), "--out")
        }
        OracleCommand::Expectation { claim, alphas, out } => {
            let payoff = payoff_of(&claim)?;
            let model = load_model(&claim.model)?;
            let tree = ScenarioTree::build(&model, DEFAULT_CAP).context("tree")?;
            let a = oracle::random_alpha(&model, alphas).context("--alphas")?;
            let d = mixture_density_in(&model, &tree, &a).context("mixture density")?;
            let value = oracle::brute_expectation(&model, &d, &payoff, &budget).context("oracle expectation")?;
            println!("{} K={} brute-force expectation {value}", payoff.name(), claim.strike);
            emit(&json!({ "payoff": payoff.name(), "strike": claim.strike, "alphas_seed": alphas, "value": value }), out.as_deref(), "--out")
        }
        OracleCommand::Alpha { model, seed, out } => {
            let model = load_model(&model)?;
            let a = oracle::random_alpha(&model, seed).context("alpha")?;
            for (i, s) in a.steps.iter().enumerate() {
                println!("step {}: {:?}", i + 1, s.weights);
            }
            emit(&a, out.as_deref(), "--out")
        }
        OracleCommand::RandomModel { seed, max_steps, max_atoms, out } => {
            if max_steps == 0 || max_atoms < 2 {
                return Err(CliError::Failed("--max-steps must be >= 1 and --max-atoms >= 2".into()));
            }
            let mut rng = CounterRng::new(seed);
            let shape = ModelShape { max_steps, max_atoms, ..ModelShape::default() };
            let model = oracle::random_model(&mut rng, &shape);
            let text = to_json(&model).context("model")?;
            match out {
                Some(path) => {
                    std::fs::write(&path, text).map_err(Error::from).context(format!("--out {}", path.display()))?
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}
