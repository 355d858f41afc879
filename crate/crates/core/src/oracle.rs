//! Brute-force reference implementations and reproducible random corpora.
//!
//! Everything here is single-threaded and recomputes from scratch: no
//! scenario tree, no chunked reductions. The tests compare the main code paths
//! against these.
//!
//! Random corpora come from [`CounterRng`], a SplitMix64 stream: the `i`-th
//! draw (from 1) of a generator seeded with `s` is `mix(s + i * 0x9E3779B97F4A7C15)`
//! with
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! in wrapping 64-bit arithmetic. Uniform reals use the top 53 bits,
//! `(z >> 11) * 2^-53`, so any language can regenerate the same corpora.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{AlphaDensity, AlphaStep, AtomPairSelection, MeasureDensity};
use crate::model::{shock_return, EvolutionModel, ShockAtom, StepSpec, VolatilitySpec};
use crate::pricing::PathFunctional;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 counter-based generator.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// The `i`-th output of the stream for `seed`, independent of state.
    pub fn at(seed: u64, i: u64) -> u64 {
        let mut z = seed.wrapping_add(i.wrapping_mul(GOLDEN));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        Self::at(self.seed, self.counter)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

/// Work limits for the brute-force routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleBudget {
    pub max_paths: u64,
    pub max_selections: u64,
    pub seed: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self { max_paths: 1_000_000, max_selections: 1_000_000, seed: 0 }
    }
}

fn realize(model: &EvolutionModel, atoms: &[usize]) -> (Vec<f64>, f64) {
    let mut prices = vec![model.s0];
    let mut prob = 1.0;
    let mut prev = None;
    for (i, &j) in atoms.iter().enumerate() {
        let step = &model.steps[i];
        let atom = step.shocks[j];
        let sigma = step.vol.next_sigma(prev);
        let s = prices[i] * (1.0 + step.a * ((sigma * atom.eps).exp() - 1.0));
        prices.push(s);
        prob *= atom.prob;
        prev = Some((sigma, atom.eps));
    }
    (prices, prob)
}

/// `sum over full paths of base_prob * prod psi * payoff`, one path at a
/// time in lexicographic order.
pub fn brute_expectation(
    model: &EvolutionModel,
    density: &MeasureDensity,
    payoff: &dyn PathFunctional,
    budget: &OracleBudget,
) -> Result<f64> {
    model.require_atoms()?;
    let n = model.horizon();
    let count = model.path_count(budget.max_paths)?;
    let radix = model.radix();
    let mut atoms = vec![0usize; n];
    let mut total = 0.0;
    for _ in 0..count {
        let (prices, prob) = realize(model, &atoms);
        let mut psi = 1.0;
        let mut node = 0;
        for (i, &j) in atoms.iter().enumerate() {
            node = node * radix[i] + j;
            psi *= density.psi(i + 1, node);
        }
        total += prob * psi * payoff.value(&atoms, &prices);
        for i in (0..n).rev() {
            atoms[i] += 1;
            if atoms[i] < radix[i] {
                break;
            }
            atoms[i] = 0;
        }
    }
    Ok(total)
}

/// Spot-measure expectation by enumerating branch bitmasks (bit set = up,
/// first step in the most significant bit).
fn spot_by_masks(model: &EvolutionModel, pairs: &[(usize, usize)], payoff: &dyn PathFunctional) -> f64 {
    let n = pairs.len();
    let mut acc = 0.0;
    let mut atoms = vec![0usize; n];
    let mut prices = vec![0.0; n + 1];
    for mask in 0u64..(1u64 << n) {
        let mut w = 1.0;
        let mut prev = None;
        prices[0] = model.s0;
        for i in 0..n {
            let step = &model.steps[i];
            let (d, u) = pairs[i];
            let sigma = step.vol.next_sigma(prev);
            let xd = shock_return(sigma, step.shocks[d].eps);
            let xu = shock_return(sigma, step.shocks[u].eps);
            let up = (mask >> (n - 1 - i)) & 1 == 1;
            let (j, x, psi) = if up { (u, xu, -xd / (xu - xd)) } else { (d, xd, xu / (xu - xd)) };
            w *= psi;
            prices[i + 1] = prices[i] * (1.0 + step.a * x);
            atoms[i] = j;
            prev = Some((sigma, step.shocks[j].eps));
        }
        acc += w * payoff.value(&atoms, &prices);
    }
    acc
}

/// Exact maximum of the spot expectation over every atom pair selection;
/// ties keep the lexicographically smallest selection.
pub fn brute_sup_selections(
    model: &EvolutionModel,
    payoff: &dyn PathFunctional,
    budget: &OracleBudget,
) -> Result<(f64, AtomPairSelection)> {
    model.require_atoms()?;
    let per_step: Vec<Vec<(usize, usize)>> = model
        .steps
        .iter()
        .map(|s| {
            let mut v = Vec::new();
            for (d, a) in s.shocks.iter().enumerate() {
                if a.eps < 0.0 {
                    for (u, b) in s.shocks.iter().enumerate() {
                        if b.eps > 0.0 {
                            v.push((d, u));
                        }
                    }
                }
            }
            v
        })
        .collect();
    if let Some(i) = per_step.iter().position(|v| v.is_empty()) {
        return Err(Error::NoFeasibleSelection(format!("step {} has no sign-separated pair", i + 1)));
    }
    let mut count: u128 = 1;
    for v in &per_step {
        count *= v.len() as u128;
    }
    if count > budget.max_selections as u128 {
        return Err(Error::CapExceeded { what: "oracle selection", count, cap: budget.max_selections });
    }
    let n = per_step.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for _ in 0..count {
        let pairs: Vec<(usize, usize)> = idx.iter().enumerate().map(|(i, &k)| per_step[i][k]).collect();
        let v = spot_by_masks(model, &pairs, payoff);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, pairs));
        }
        for i in (0..n).rev() {
            idx[i] += 1;
            if idx[i] < per_step[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
    let (v, pairs) = best.expect("count >= 1");
    Ok((v, AtomPairSelection::new(pairs)))
}

/// α-density with i.i.d. `0.1 + U(0,1)` weights, normalized per step.
pub fn random_alpha(model: &EvolutionModel, seed: u64) -> Result<AlphaDensity> {
    model.require_atoms()?;
    let mut rng = CounterRng::new(seed);
    let mut steps = Vec::with_capacity(model.horizon());
    for s in &model.steps {
        let down = s.down_atoms();
        let up = s.up_atoms();
        let raw: Vec<f64> = (0..down.len() * up.len()).map(|_| 0.1 + rng.next_f64()).collect();
        let mut z = 0.0;
        for (i, &d) in down.iter().enumerate() {
            for (j, &u) in up.iter().enumerate() {
                z += s.shocks[d].prob * s.shocks[u].prob * raw[i * up.len() + j];
            }
        }
        steps.push(AlphaStep::new(s, raw.iter().map(|w| w / z).collect())?);
    }
    AlphaDensity::new(model, steps)
}

/// Shape of randomly generated models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelShape {
    pub min_steps: usize,
    pub max_steps: usize,
    /// Atoms per step, at least 2.
    pub max_atoms: usize,
    pub a_range: (f64, f64),
    pub s0_range: (f64, f64),
    /// Probability that a model uses GARCH(1,1) volatility.
    pub garch_share: f64,
    /// Allow a down atom with `eps = 0`.
    pub zero_atoms: bool,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            min_steps: 1,
            max_steps: 4,
            max_atoms: 4,
            a_range: (0.05, 0.9),
            s0_range: (50.0, 150.0),
            garch_share: 0.5,
            zero_atoms: false,
        }
    }
}

/// A valid random model of the given shape.
pub fn random_model(rng: &mut CounterRng, shape: &ModelShape) -> EvolutionModel {
    let n = rng.int(shape.min_steps, shape.max_steps);
    let s0 = rng.uniform(shape.s0_range.0, shape.s0_range.1);
    let garch = rng.next_f64() < shape.garch_share;
    let vol = if garch {
        VolatilitySpec::Garch11 {
            omega0: rng.uniform(0.01, 0.2),
            alpha1: rng.uniform(0.0, 0.3),
            beta1: rng.uniform(0.0, 0.6),
            floor: 0.05,
        }
    } else {
        VolatilitySpec::Constant { sigma: rng.uniform(0.1, 0.8) }
    };
    let steps = (0..n)
        .map(|_| {
            let m = rng.int(2, shape.max_atoms.max(2));
            let n_down = rng.int(1, m - 1);
            let mut eps: Vec<f64> = Vec::with_capacity(m);
            for k in 0..m {
                let mut e = if k < n_down { -rng.uniform(0.05, 1.5) } else { rng.uniform(0.05, 1.5) };
                if k == 0 && shape.zero_atoms && n_down > 1 && rng.next_f64() < 0.5 {
                    e = 0.0;
                }
                eps.push(e);
            }
            let w: Vec<f64> = (0..m).map(|_| 0.05 + rng.next_f64()).collect();
            let total: f64 = w.iter().sum();
            let shocks = eps.iter().zip(&w).map(|(&e, &p)| ShockAtom::new(e, p / total)).collect();
            let (lo, hi) = shape.a_range;
            let a = if hi > lo { rng.uniform(lo, hi) } else { lo };
            StepSpec { a: if a > 0.0 { a } else { hi }, vol, shocks }
        })
        .collect();
    EvolutionModel { s0, steps, pricing_only: false }
}

/// A positive price path `S_0..S_N`.
pub fn random_prices(rng: &mut CounterRng, n: usize) -> Vec<f64> {
    let s0 = rng.uniform(50.0, 150.0);
    let mut out = vec![s0];
    for _ in 0..n {
        out.push(s0 * rng.uniform(0.5, 1.6));
    }
    out
}

/// A valid nonincreasing statistic chain `1 >= g_1 >= ... >= g_N > 0`.
pub fn random_chain(rng: &mut CounterRng, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n);
    let mut cur = 1.0;
    for _ in 0..n {
        cur *= rng.uniform(0.6, 1.0);
        g.push(cur);
    }
    g
}
