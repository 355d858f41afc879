//! Acceptance gate. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use superhedge_core::decomposition::{
    all_spot_densities, optional_decompose, verify_decomposition, SupermartingaleSurface,
};
use superhedge_core::estimation::{estimate_a, estimated_price, order_statistics, PriceSample, StatisticKind, StatisticSpec};
use superhedge_core::measures::{
    integral_representation_check, mixture_density_in, pair_tree_expectation, verify_martingale, Branch,
    PairChoice,
};
use superhedge_core::model::DEFAULT_CAP;
use superhedge_core::oracle::{
    brute_sup_selections, random_alpha, random_chain, random_model, random_prices, CounterRng, ModelShape, OracleBudget,
};
use superhedge_core::pricing::{
    closed_form, closed_form_asian_call, closed_form_asian_put, closed_form_call, closed_form_put, non_arbitrage_interval,
    superhedge_inf, superhedge_sup, SearchConfig, SearchMode,
};
use superhedge_core::tree::ScenarioTree;
use superhedge_core::{EvolutionModel, PathFunctional, Payoff, ShockAtom, StepSpec, VolatilitySpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fail(detail: String) -> Outcome {
    Outcome { pass: false, detail }
}

fn terminal(_: &[usize], p: &[f64]) -> f64 {
    *p.last().unwrap()
}

fn one(_: &[usize], _: &[f64]) -> f64 {
    1.0
}

fn shape(max_steps: usize) -> ModelShape {
    ModelShape { max_steps, ..ModelShape::default() }
}

// 1: mixtures are equivalent martingale measures, spot measures are martingale
fn martingale_family() -> Outcome {
    let mut rng = CounterRng::new(101);
    let (mut worst_mix, mut worst_spot, mut spots) = (0.0f64, 0.0f64, 0usize);
    for i in 0..500 {
        let m = random_model(&mut rng, &shape(4));
        let tree = ScenarioTree::build(&m, DEFAULT_CAP).unwrap();
        let alphas = random_alpha(&m, 1000 + i).unwrap();
        let dens = mixture_density_in(&m, &tree, &alphas).unwrap();
        let r = verify_martingale(&m, &tree, &dens, 1e-9);
        worst_mix = worst_mix.max(r.max_drift_residual).max(r.max_normalization_residual);
        if !(r.passed() && r.equivalent) {
            return fail(format!("model {i}: mixture residuals {r:?}"));
        }
        for d in all_spot_densities(&m, &tree, DEFAULT_CAP).unwrap() {
            let r = verify_martingale(&m, &tree, &d, 1e-10);
            worst_spot = worst_spot.max(r.max_drift_residual);
            spots += 1;
            if !r.passed() {
                return fail(format!("model {i}: spot drift {:e} normalization {:e}", r.max_drift_residual, r.max_normalization_residual));
            }
        }
    }
    outcome(
        true,
        format!("500 models, {spots} spot measures; max mixture residual {worst_mix:.1e} (tol 1e-9), max spot drift/S {worst_spot:.1e} (tol 1e-10)"),
    )
}

// 2: mixture expectation equals the α-average of pair-tree expectations
fn integral_representation() -> Outcome {
    let mut rng = CounterRng::new(202);
    let mut worst = 0.0f64;
    let mut worst_rel = 0.0f64;
    let shape = ModelShape { zero_atoms: true, ..shape(3) };
    for i in 0..200 {
        let m = random_model(&mut rng, &shape);
        let alphas = random_alpha(&m, 2000 + i).unwrap();
        let call = Payoff::call(m.s0);
        let aput = Payoff::asian_put(m.s0);
        let payoffs: [&dyn PathFunctional; 4] = [&one, &terminal, &call, &aput];
        for p in payoffs {
            let c = integral_representation_check(&m, &alphas, p).unwrap();
            worst = worst.max(c.deviation);
            worst_rel = worst_rel.max(c.deviation / c.mixture.abs().max(1.0));
        }
    }
    outcome(worst <= 1e-12, format!("200 models x 4 payoffs; max deviation {worst:.2e} (tol 1e-12), max relative {worst_rel:.2e}"))
}

/// Random model with constant σ in [1, 2], so the grid reaches shocks near
/// the edges of the price range.
fn wide_model(rng: &mut CounterRng, max_steps: usize) -> EvolutionModel {
    let mut m = random_model(rng, &ModelShape { max_steps, garch_share: 0.0, a_range: (0.05, 0.95), ..ModelShape::default() });
    let sigma = rng.uniform(1.0, 2.0);
    for s in &mut m.steps {
        s.vol = VolatilitySpec::Constant { sigma };
    }
    m
}

/// Grid sup never above the closed form and within 1e-3 s0 of it; exhaustive
/// equals the brute-force oracle bit for bit.
fn closed_form_protocol(make: fn(f64) -> Payoff, seed: u64) -> std::result::Result<String, String> {
    let mut rng = CounterRng::new(seed);
    let grid = SearchConfig::with_mode(SearchMode::Grid);
    let exhaustive = SearchConfig::default();
    let (mut max_over, mut max_gap) = (f64::NEG_INFINITY, 0.0f64);
    for i in 0..100 {
        let m = wide_model(&mut rng, 2);
        let k = m.s0 * rng.uniform(0.2, 1.5);
        let payoff = make(k);
        let closed = closed_form(&payoff, m.s0, &m.a_list()).map_err(|e| e.to_string())?;
        let g = superhedge_sup(&m, &payoff, &grid).map_err(|e| e.to_string())?;
        let over = (g.value - closed) / m.s0;
        let gap = (closed - g.value) / m.s0;
        max_over = max_over.max(over);
        max_gap = max_gap.max(gap);
        if over > 1e-12 || gap > 1e-3 {
            return Err(format!("case {i}: grid {} vs closed {closed} (s0 {}, K {k})", g.value, m.s0));
        }

        let m = random_model(&mut rng, &shape(4));
        let payoff = make(m.s0 * rng.uniform(0.5, 1.5));
        let e = superhedge_sup(&m, &payoff, &exhaustive).map_err(|e| e.to_string())?;
        let (b, sel) = brute_sup_selections(&m, &payoff, &OracleBudget::default()).map_err(|e| e.to_string())?;
        if e.value.to_bits() != b.to_bits() || e.atom_selection() != Some(sel) {
            return Err(format!("case {i}: exhaustive {} vs brute {b}", e.value));
        }
    }
    Ok(format!("100 grid cases: max (grid - closed)/s0 {max_over:.1e}, max gap/s0 {max_gap:.1e}; 100 exhaustive == brute"))
}

// 3: call
fn call_closed_form() -> Outcome {
    match closed_form_protocol(Payoff::call, 303) {
        Ok(d) => outcome(true, d),
        Err(d) => fail(d),
    }
}

// 4: put, Asian put, Asian call, and the Asian put-call identity
fn other_closed_forms() -> Outcome {
    let mut details = Vec::new();
    for (name, make, seed) in [
        ("put", Payoff::put as fn(f64) -> Payoff, 404),
        ("asian put", Payoff::asian_put, 405),
        ("asian call", Payoff::asian_call, 406),
    ] {
        match closed_form_protocol(make, seed) {
            Ok(d) => details.push(format!("{name}: {d}")),
            Err(d) => return fail(format!("{name}: {d}")),
        }
    }
    let mut rng = CounterRng::new(407);
    let mut worst = 0.0f64;
    let mut active = 0;
    for _ in 0..1000 {
        let n = rng.int(1, 6);
        let s0 = rng.uniform(50.0, 150.0);
        let a: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 0.99)).collect();
        let k = s0 * rng.uniform(0.2, 1.5);
        let c = closed_form_asian_call(s0, &a, k).unwrap();
        let p = closed_form_asian_put(s0, &a, k).unwrap();
        if p > 0.0 {
            active += 1;
            worst = worst.max((c - p - (s0 - k)).abs());
        }
    }
    details.push(format!("asian identity on {active} active cases, max error {worst:.1e} (tol 1e-12)"));
    outcome(worst <= 1e-12 && active > 0, details.join("; "))
}

fn convex_knots(rng: &mut CounterRng, s0: f64) -> Vec<[f64; 2]> {
    let pieces = rng.int(1, 4);
    let mut x = 0.0;
    let mut y = rng.uniform(0.0, 0.5) * s0;
    let mut slope = rng.uniform(-1.0, 0.0);
    let mut knots = vec![[x, y]];
    for _ in 0..pieces {
        let dx = s0 * rng.uniform(0.2, 0.8);
        let next = (y + slope * dx).max(0.0);
        slope = (next - y) / dx;
        x += dx;
        y = next;
        knots.push([x, y]);
        slope += rng.uniform(0.0, 1.0);
    }
    // the tail keeps a nonnegative slope
    let dx = s0 * rng.uniform(0.2, 0.8);
    knots.push([x + dx, y + slope.max(0.0) * dx]);
    knots
}

// 5: convex payoffs have their price infimum at f(s0), reached as ε→0
fn convex_lower_endpoint() -> Outcome {
    let mut rng = CounterRng::new(505);
    let (mut worst_low, mut worst_edge) = (f64::INFINITY, 0.0f64);
    for case in 0..10 {
        let m = random_model(&mut rng, &shape(3));
        let payoff = Payoff::piecewise_linear(convex_knots(&mut rng, m.s0)).unwrap();
        if !payoff.is_convex() {
            return fail(format!("case {case}: generated payoff is not convex"));
        }
        let f0 = payoff.terminal(m.s0).unwrap();
        let n = m.horizon();
        let mut lowest = f64::INFINITY;
        for _ in 0..10_000 {
            let choices: Vec<PairChoice> = (0..n)
                .map(|_| PairChoice { down: Branch::free(-rng.uniform(1e-4, 4.0)), up: Branch::free(rng.uniform(1e-4, 4.0)) })
                .collect();
            lowest = lowest.min(pair_tree_expectation(&m, &choices, &payoff, DEFAULT_CAP).unwrap());
        }
        worst_low = worst_low.min((lowest - f0) / m.s0);
        let tiny: Vec<PairChoice> =
            (0..n).map(|_| PairChoice { down: Branch::free(-1e-12), up: Branch::free(1e-12) }).collect();
        let edge = pair_tree_expectation(&m, &tiny, &payoff, DEFAULT_CAP).unwrap();
        worst_edge = worst_edge.max((edge - f0).abs() / m.s0);
        let inf = superhedge_inf(&m, &payoff, &SearchConfig::default()).unwrap();
        if inf.value != f0 {
            return fail(format!("case {case}: inf {} != f(s0) {f0}", inf.value));
        }
    }
    outcome(
        worst_low >= -1e-10 && worst_edge <= 1e-9,
        format!("10 payoffs x 10000 spot measures; min (E - f(s0))/s0 {worst_low:.2e} (>= -1e-10), boundary error/s0 {worst_edge:.1e} (<= 1e-9)"),
    )
}

// 6: a unit exposure coefficient collapses the prices
fn unstable_collapse() -> Outcome {
    let mut rng = CounterRng::new(606);
    for i in 0..200 {
        let n = rng.int(1, 6);
        let s0 = rng.uniform(50.0, 150.0);
        let mut a: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 0.99)).collect();
        a[rng.int(0, n - 1)] = 1.0;
        let k = s0 * rng.uniform(0.1, 2.0);
        let c = closed_form_call(s0, &a, k).unwrap();
        let p = closed_form_put(s0, &a, k).unwrap();
        if c != s0 || p != k {
            return fail(format!("case {i}: call {c} (s0 {s0}), put {p} (K {k})"));
        }
        let iv = non_arbitrage_interval(s0, &a, &Payoff::put(k)).unwrap();
        if iv.upper != k {
            return fail(format!("case {i}: put interval upper {} != K {k}", iv.upper));
        }
    }
    // the limit a -> 1 approaches the same values
    let s0 = 100.0;
    let mut prev = 0.0;
    for e in 1..=12 {
        let a = [0.5, 1.0 - 10f64.powi(-e)];
        let c = closed_form_call(s0, &a, 30.0).unwrap();
        if c < prev {
            return fail(format!("call not increasing toward s0 at a = {}", a[1]));
        }
        prev = c;
    }
    outcome((s0 - prev).abs() < 1e-9, format!("200 exact cases; call at a = 1 - 1e-12 is {prev}"))
}

// 7: optional decomposition
fn optional_decomposition() -> Outcome {
    let mut rng = CounterRng::new(707);
    let (mut worst_rec, mut worst_mart, mut worst_g) = (0.0f64, 0.0f64, 0.0f64);
    let mut checked = 0usize;
    for i in 0..200 {
        let m = random_model(&mut rng, &shape(4));
        let tree = ScenarioTree::build(&m, DEFAULT_CAP).unwrap();
        let mut densities = all_spot_densities(&m, &tree, DEFAULT_CAP).unwrap();
        for q in 0..10 {
            densities.push(mixture_density_in(&m, &tree, &random_alpha(&m, 7000 + 10 * i + q).unwrap()).unwrap());
        }
        let c = m.s0 * rng.uniform(0.7, 1.3);
        let lam = rng.uniform(0.0, 1.0);
        let k = m.s0 * rng.uniform(0.1, 2.0);
        let capped = SupermartingaleSurface::from_fn(&tree, 1e-6, |_, p, _| terminal(&[], p).min(c)).unwrap();
        let mart = SupermartingaleSurface::from_fn(&tree, 1e-6, |_, p, _| lam * terminal(&[], p) + (1.0 - lam) * k).unwrap();
        for (name, surface, martingale) in [("min(S, c)", &capped, false), ("martingale mix", &mart, true)] {
            let dec = match optional_decompose(&m, &tree, surface) {
                Ok(d) => d,
                Err(e) => return fail(format!("model {i} {name}: {e}")),
            };
            let r = verify_decomposition(&m, &tree, surface, &dec, &densities, 1e-10).unwrap();
            checked += r.densities_checked;
            worst_rec = worst_rec.max(r.max_reconstruction_residual / m.s0);
            worst_mart = worst_mart.max(r.max_martingale_residual);
            if !r.passed {
                return fail(format!("model {i} {name}: {:?}", r.failures.first()));
            }
            if martingale {
                let g = dec.g.iter().flatten().fold(0.0f64, |a, g| a.max(g.abs()));
                worst_g = worst_g.max(g);
                if g > 1e-10 {
                    return fail(format!("model {i}: martingale surface consumes {g:e}"));
                }
            }
        }
    }
    outcome(
        true,
        format!("200 models x 2 surfaces, {checked} density checks; max martingale residual {worst_mart:.1e}, max reconstruction/s0 {worst_rec:.1e}, max |g| on martingales {worst_g:.1e}"),
    )
}

// 8: estimation identities and minimality of the constant-one statistic
fn estimation_identities() -> Outcome {
    let mut rng = CounterRng::new(808);
    let (mut worst_id, mut worst_capped) = (0.0f64, 0.0f64);
    for i in 0..500 {
        let n = rng.int(1, 8);
        let prices = random_prices(&mut rng, n);
        let sample = PriceSample::new(prices[0], prices[1..].to_vec()).unwrap();
        let os = order_statistics(&sample).unwrap();
        let tau0 = rng.uniform(0.5, 1.0);
        for kind in [StatisticKind::ConstantOne, StatisticKind::CappedRatio, StatisticKind::Custom { table: random_chain(&mut rng, n) }] {
            let spec = StatisticSpec::new(kind, tau0).unwrap();
            let p = estimate_a(&sample, &spec).unwrap();
            let prod: f64 = p.a.iter().map(|a| 1.0 - a).product();
            let lhs = sample.s0 * prod;
            let rhs = tau0 * os[0] * p.g[n - 1];
            worst_id = worst_id.max((lhs - rhs).abs() / rhs.abs());
        }
        let capped = estimate_a(&sample, &StatisticSpec::new(StatisticKind::CappedRatio, 1.0).unwrap()).unwrap();
        let prod: f64 = capped.a.iter().map(|a| 1.0 - a).product();
        worst_capped = worst_capped.max((prod - os[0] / os[n]).abs());

        let k = sample.s0 * rng.uniform(0.3, 1.5);
        let call = Payoff::call(k);
        let base = estimated_price(&sample, &StatisticSpec::new(StatisticKind::ConstantOne, tau0).unwrap(), &call).unwrap().value;
        for _ in 0..50 {
            let spec = StatisticSpec::new(StatisticKind::Custom { table: random_chain(&mut rng, n) }, tau0).unwrap();
            let v = estimated_price(&sample, &spec, &call).unwrap().value;
            if v < base - 1e-12 * sample.s0 {
                return fail(format!("sample {i}: statistic gives call {v} below constant-one {base}"));
            }
        }
    }
    outcome(
        worst_id <= 1e-10 && worst_capped <= 1e-12,
        format!("500 samples; identity rel error {worst_id:.1e} (1e-10), capped product error {worst_capped:.1e} (1e-12), constant-one minimal vs 50 chains each"),
    )
}

/// Two-point model with shocks ±40 and σ = 1: the spot expectations reach
/// the edges of the price range to well below 1e-9.
fn edge_model(a: &[f64]) -> EvolutionModel {
    EvolutionModel {
        s0: 100.0,
        steps: a
            .iter()
            .map(|&a| StepSpec {
                a,
                vol: VolatilitySpec::Constant { sigma: 1.0 },
                shocks: vec![ShockAtom::new(-40.0, 0.5), ShockAtom::new(40.0, 0.5)],
            })
            .collect(),
        pricing_only: false,
    }
}

// 9: worked values, re-derived by the brute-force oracle
fn worked_values() -> Outcome {
    let a = [0.5, 0.5];
    let m = edge_model(&a);
    let cases = [
        (Payoff::call(30.0), 75.0),
        (Payoff::call(20.0), 80.0),
        (Payoff::put(50.0), 25.0),
        (Payoff::put(20.0), 0.0),
        (Payoff::asian_put(60.0), 5.0 / 3.0),
        (Payoff::asian_call(30.0), 70.0),
        (Payoff::asian_call(70.0), 125.0 / 3.0),
    ];
    let mut worst = 0.0f64;
    for (payoff, expected) in &cases {
        let closed = closed_form(payoff, 100.0, &a).unwrap();
        let (oracle, _) = brute_sup_selections(&m, payoff, &OracleBudget::default()).unwrap();
        let err = (closed - expected).abs().max((oracle - expected).abs());
        worst = worst.max(err);
        if err > 1e-9 {
            return fail(format!("{} K={}: closed {closed}, oracle {oracle}, expected {expected}", payoff.name(), payoff.strike().unwrap()));
        }
    }
    // order statistics 80, 90, 100, 120 with s0 = 100
    let sample = PriceSample::new(100.0, vec![80.0, 120.0, 90.0]).unwrap();
    let one = estimate_a(&sample, &StatisticSpec::constant_one()).unwrap();
    let capped = estimate_a(&sample, &StatisticSpec::new(StatisticKind::CappedRatio, 1.0).unwrap()).unwrap();
    let g = [1.0, 1.0 - 10.0 / 160.0, (1.0 - 10.0 / 160.0) * (1.0 - 1.0 / 9.0)];
    let expect_capped = [1.0 - 80.0 / 100.0 * g[0], 1.0 - g[1] / g[0], 1.0 - g[2] / g[1]];
    for (got, want) in one.a.iter().zip([0.2, 0.0, 0.0]).chain(capped.a.iter().zip(expect_capped)) {
        worst = worst.max((got - want).abs());
    }
    let expected_capped = [0.2, 0.0625, 1.0 / 9.0];
    for (got, want) in capped.a.iter().zip(expected_capped) {
        worst = worst.max((got - want).abs());
    }
    outcome(worst <= 1e-9, format!("7 closed-form values and 2 estimates; max error {worst:.1e} (tol 1e-9)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("martingale family", martingale_family),
        ("integral representation", integral_representation),
        ("call closed form", call_closed_form),
        ("put / asian closed forms", other_closed_forms),
        ("convex lower endpoint", convex_lower_endpoint),
        ("unstable-asset collapse", unstable_collapse),
        ("optional decomposition", optional_decomposition),
        ("estimation identities", estimation_identities),
        ("worked values", worked_values),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of 9 criteria passed in {:.1}s", 9 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
