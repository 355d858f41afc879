//! Finite discrete-time asset evolutions.
//!
//! A model fixes `S_0`, and for every step an exposure coefficient `a_n`, a
//! volatility law and a finite set of shock atoms. Prices evolve as
//!
//! ```text
//! S_n = S_{n-1} * (1 + a_n * (exp(sigma_n * eps_n) - 1))
//! ```
//!
//! where `sigma_n` may depend on the realized history through an ARCH(1) or
//! GARCH(1,1) recursion. Atoms with `eps <= 0` form the down set of a step and
//! atoms with `eps > 0` the up set.

use std::fmt;
use std::path::Path as FsPath;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on enumerated paths, tree nodes and search combinations.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// Tolerance for the per-step probability sum.
pub const PROB_TOL: f64 = 1e-12;

/// Probability sums within this distance of one are renormalized on load.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// One atom of a step's shock distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockAtom {
    pub eps: f64,
    pub prob: f64,
}

impl ShockAtom {
    pub fn new(eps: f64, prob: f64) -> Self {
        Self { eps, prob }
    }

    /// Down atoms carry `eps <= 0`; an `eps == 0` atom is down but has no
    /// downward move.
    pub fn is_down(&self) -> bool {
        self.eps <= 0.0
    }
}

/// Volatility law for one step.
///
/// The recursive kinds use the previous step's realized volatility and shock:
///
/// * `arch1`: `sigma_n^2 = omega0 + alpha1 * (sigma_{n-1} eps_{n-1})^2`
/// * `garch11`: `sigma_n^2 = omega0 + alpha1 * (sigma_{n-1} eps_{n-1})^2 + beta1 * sigma_{n-1}^2`
///
/// With no history (first step) both reduce to `sqrt(omega0)`. The result is
/// clamped below by `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilitySpec {
    Constant { sigma: f64 },
    Arch1 { omega0: f64, alpha1: f64, floor: f64 },
    Garch11 { omega0: f64, alpha1: f64, beta1: f64, floor: f64 },
}

impl VolatilitySpec {
    /// Realized volatility given the previous step's `(sigma, eps)`, if any.
    pub fn next_sigma(&self, prev: Option<(f64, f64)>) -> f64 {
        match *self {
            VolatilitySpec::Constant { sigma } => sigma,
            VolatilitySpec::Arch1 { omega0, alpha1, floor } => {
                let var = match prev {
                    Some((s, e)) => omega0 + alpha1 * (s * e) * (s * e),
                    None => omega0,
                };
                var.sqrt().max(floor)
            }
            VolatilitySpec::Garch11 { omega0, alpha1, beta1, floor } => {
                let var = match prev {
                    Some((s, e)) => omega0 + alpha1 * (s * e) * (s * e) + beta1 * s * s,
                    None => omega0,
                };
                var.sqrt().max(floor)
            }
        }
    }

    /// A positive lower bound on every volatility this law can produce.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            VolatilitySpec::Constant { sigma } => sigma,
            VolatilitySpec::Arch1 { omega0, floor, .. } | VolatilitySpec::Garch11 { omega0, floor, .. } => {
                floor.max(omega0.sqrt())
            }
        }
    }

    fn violations(&self, step: usize, out: &mut Vec<Violation>) {
        let mut push = |m: String| out.push(Violation::at(step, m));
        match *self {
            VolatilitySpec::Constant { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    push(format!("sigma must be positive at step {step}"));
                }
            }
            VolatilitySpec::Arch1 { omega0, alpha1, floor } => {
                check_recursive(step, omega0, alpha1, 0.0, floor, &mut push);
            }
            VolatilitySpec::Garch11 { omega0, alpha1, beta1, floor } => {
                check_recursive(step, omega0, alpha1, beta1, floor, &mut push);
            }
        }
    }
}

fn check_recursive(step: usize, omega0: f64, alpha1: f64, beta1: f64, floor: f64, push: &mut impl FnMut(String)) {
    if !(omega0 > 0.0 && omega0.is_finite()) {
        push(format!("omega0 must be positive at step {step}"));
    }
    if !(alpha1 >= 0.0 && alpha1.is_finite()) {
        push(format!("alpha1 must be nonnegative at step {step}"));
    }
    if !(beta1 >= 0.0 && beta1.is_finite()) {
        push(format!("beta1 must be nonnegative at step {step}"));
    }
    if !(floor > 0.0 && floor.is_finite()) {
        push(format!("floor must be positive at step {step}"));
    }
}

/// One time step of the evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub a: f64,
    pub vol: VolatilitySpec,
    pub shocks: Vec<ShockAtom>,
}

impl StepSpec {
    /// Indices of atoms with `eps <= 0`.
    pub fn down_atoms(&self) -> Vec<usize> {
        (0..self.shocks.len()).filter(|&i| self.shocks[i].eps <= 0.0).collect()
    }

    /// Indices of atoms with `eps < 0`.
    pub fn strict_down_atoms(&self) -> Vec<usize> {
        (0..self.shocks.len()).filter(|&i| self.shocks[i].eps < 0.0).collect()
    }

    /// Indices of atoms with `eps > 0`.
    pub fn up_atoms(&self) -> Vec<usize> {
        (0..self.shocks.len()).filter(|&i| self.shocks[i].eps > 0.0).collect()
    }

    /// One-step gross return `1 + a (exp(sigma eps) - 1)`.
    pub fn growth(&self, sigma: f64, eps: f64) -> f64 {
        1.0 + self.a * shock_return(sigma, eps)
    }
}

/// `exp(sigma * eps) - 1`, the relative move of an unlevered step.
#[inline]
pub fn shock_return(sigma: f64, eps: f64) -> f64 {
    (sigma * eps).exp_m1()
}

/// A discrete-time evolution on a finite sample space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionModel {
    pub s0: f64,
    pub steps: Vec<StepSpec>,
    /// Set on models that only carry exposure coefficients (for example the
    /// output of parameter estimation); such models have no shock atoms and
    /// support closed-form pricing only.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pricing_only: bool,
}

/// One failed structural condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub step: Option<usize>,
    pub message: String,
}

impl Violation {
    fn at(step: usize, message: String) -> Self {
        Self { step: Some(step), message }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Check every structural condition; an empty report means the model is valid.
///
/// Step numbers in messages are 1-based.
pub fn validate_model(model: &EvolutionModel) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(model.s0 > 0.0 && model.s0.is_finite()) {
        out.push(Violation { step: None, message: "s0 must be positive".into() });
    }
    if model.steps.is_empty() {
        out.push(Violation { step: None, message: "model needs at least one step".into() });
    }
    for (i, step) in model.steps.iter().enumerate() {
        let n = i + 1;
        if model.pricing_only {
            // estimated exposures may be exactly zero
            if !(step.a >= 0.0 && step.a <= 1.0) {
                out.push(Violation::at(n, format!("a out of [0,1] at step {n}")));
            }
        } else if !(step.a > 0.0 && step.a <= 1.0) {
            out.push(Violation::at(n, format!("a out of (0,1] at step {n}")));
        }
        step.vol.violations(n, &mut out);
        if model.pricing_only {
            continue;
        }
        let mut sum = 0.0;
        for (j, atom) in step.shocks.iter().enumerate() {
            if !atom.eps.is_finite() {
                out.push(Violation::at(n, format!("non-finite eps at step {n}, atom {j}")));
            }
            if !(atom.prob > 0.0 && atom.prob <= 1.0) {
                out.push(Violation::at(n, format!("prob not in (0,1] at step {n}, atom {j}")));
            }
            sum += atom.prob;
        }
        for j in 0..step.shocks.len() {
            for k in 0..j {
                if step.shocks[j].eps == step.shocks[k].eps {
                    out.push(Violation::at(n, format!("duplicate eps at step {n}, atoms {k} and {j}")));
                }
            }
        }
        if (sum - 1.0).abs() > PROB_TOL {
            out.push(Violation::at(n, format!("probabilities sum to {sum} at step {n}")));
        }
        if !step.shocks.iter().any(|s| s.eps < 0.0) {
            out.push(Violation::at(n, format!("no negative shock at step {n}")));
        }
        if !step.shocks.iter().any(|s| s.eps > 0.0) {
            out.push(Violation::at(n, format!("no positive shock at step {n}")));
        }
    }
    out
}

impl EvolutionModel {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn a_list(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.a).collect()
    }

    /// All exposure coefficients strictly below one.
    pub fn is_stable(&self) -> bool {
        self.steps.iter().all(|s| s.a < 1.0)
    }

    /// Some exposure coefficient equals one.
    pub fn is_unstable(&self) -> bool {
        self.steps.iter().any(|s| s.a == 1.0)
    }

    /// Number of atoms at each step.
    pub fn radix(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.shocks.len()).collect()
    }

    /// Validate, returning an error listing all violations.
    pub fn check(&self) -> Result<()> {
        let v = validate_model(self);
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = v.iter().map(|x| x.message.clone()).collect();
            Err(Error::InvalidModel(msgs.join("; ")))
        }
    }

    /// Error unless the model carries shock atoms.
    pub fn require_atoms(&self) -> Result<()> {
        if self.pricing_only {
            return Err(Error::Unsupported("model is pricing-only and has no shock atoms".into()));
        }
        Ok(())
    }

    /// Parse a model document, renormalizing near-unit probability sums, and
    /// validate it.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut model: EvolutionModel = serde_json::from_str(text)?;
        model.renormalize();
        model.check()?;
        Ok(model)
    }

    pub fn from_json_file(path: impl AsRef<FsPath>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    fn renormalize(&mut self) {
        for step in &mut self.steps {
            if step.shocks.is_empty() {
                continue;
            }
            let sum: f64 = step.shocks.iter().map(|s| s.prob).sum();
            // sums that already pass validation are kept, so files round-trip
            if (sum - 1.0).abs() > PROB_TOL && (sum - 1.0).abs() <= RENORMALIZE_TOL {
                for s in &mut step.shocks {
                    s.prob /= sum;
                }
            }
        }
    }

    /// Total number of full paths, or an error above `cap`.
    pub fn path_count(&self, cap: u64) -> Result<u64> {
        let mut count: u128 = 1;
        for step in &self.steps {
            count = count.saturating_mul(step.shocks.len() as u128);
        }
        if count > cap as u128 {
            return Err(Error::CapExceeded { what: "path", count, cap });
        }
        Ok(count as u64)
    }

    /// Minimum over steps of the volatility lower bound.
    pub fn sigma_floor(&self) -> f64 {
        self.steps.iter().map(|s| s.vol.lower_bound()).fold(f64::INFINITY, f64::min)
    }

    /// Price `S_{n-1}` and volatility `sigma_n` after the realized shock
    /// prefix `history` (so `n = history.len() + 1`).
    pub fn replay(&self, history: &[f64]) -> Result<(f64, f64)> {
        let n = history.len() + 1;
        if n > self.horizon() {
            return Err(Error::InvalidArgument(format!(
                "history of length {} leaves no step in a horizon of {}",
                history.len(),
                self.horizon()
            )));
        }
        let mut price = self.s0;
        let mut prev: Option<(f64, f64)> = None;
        for (i, &eps) in history.iter().enumerate() {
            let step = &self.steps[i];
            let sigma = step.vol.next_sigma(prev);
            price *= step.growth(sigma, eps);
            prev = Some((sigma, eps));
        }
        Ok((price, self.steps[n - 1].vol.next_sigma(prev)))
    }
}

/// Volatility `sigma_n` after the realized shock prefix (`n` is 1-based and
/// `history.len()` must equal `n - 1`).
pub fn sigma_at(model: &EvolutionModel, n: usize, history: &[f64]) -> Result<f64> {
    if n == 0 || n > model.horizon() {
        return Err(Error::InvalidArgument(format!("step {n} out of range 1..={}", model.horizon())));
    }
    if history.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "history length {} does not match step {n}",
            history.len()
        )));
    }
    Ok(model.replay(history)?.1)
}

/// Per-step atom indices addressing one point of the sample space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathIndex(pub Vec<usize>);

impl PathIndex {
    pub fn atoms(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Check every index addresses an atom of its step.
    pub fn validate(&self, model: &EvolutionModel) -> Result<()> {
        if self.0.len() > model.horizon() {
            return Err(Error::InvalidArgument(format!(
                "path index of length {} exceeds horizon {}",
                self.0.len(),
                model.horizon()
            )));
        }
        for (i, &j) in self.0.iter().enumerate() {
            if j >= model.steps[i].shocks.len() {
                return Err(Error::InvalidArgument(format!("atom {j} does not exist at step {}", i + 1)));
            }
        }
        Ok(())
    }
}

/// A realized full path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub eps_seq: Vec<f64>,
    pub sigma_seq: Vec<f64>,
    pub price_seq: Vec<f64>,
    pub base_prob: f64,
}

/// Realize the full path addressed by `idx`.
pub fn price_path(model: &EvolutionModel, idx: &PathIndex) -> Result<Path> {
    if idx.len() != model.horizon() {
        return Err(Error::InvalidArgument(format!(
            "path index has length {}, horizon is {}",
            idx.len(),
            model.horizon()
        )));
    }
    idx.validate(model)?;
    Ok(realize(model, idx.atoms()))
}

fn realize(model: &EvolutionModel, atoms: &[usize]) -> Path {
    let n = atoms.len();
    let mut eps_seq = Vec::with_capacity(n);
    let mut sigma_seq = Vec::with_capacity(n);
    let mut price_seq = Vec::with_capacity(n + 1);
    let mut base_prob = 1.0;
    let mut price = model.s0;
    price_seq.push(price);
    let mut prev = None;
    for (i, &j) in atoms.iter().enumerate() {
        let step = &model.steps[i];
        let atom = step.shocks[j];
        let sigma = step.vol.next_sigma(prev);
        price *= step.growth(sigma, atom.eps);
        base_prob *= atom.prob;
        eps_seq.push(atom.eps);
        sigma_seq.push(sigma);
        price_seq.push(price);
        prev = Some((sigma, atom.eps));
    }
    Path { eps_seq, sigma_seq, price_seq, base_prob }
}

/// Signed increment of one step and its sign split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSplit {
    pub delta: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    /// `eps <= 0`, membership in the down set.
    pub is_down: bool,
}

/// Increment `S_{n-1} a_n (exp(sigma_n eps) - 1)` for an atom at step
/// `n = history.len() + 1`.
pub fn delta_split(model: &EvolutionModel, history: &[f64], atom: &ShockAtom) -> Result<DeltaSplit> {
    let (price, sigma) = model.replay(history)?;
    let step = &model.steps[history.len()];
    let delta = price * step.a * shock_return(sigma, atom.eps);
    Ok(DeltaSplit {
        delta,
        delta_minus: (-delta).max(0.0),
        delta_plus: delta.max(0.0),
        is_down: atom.is_down(),
    })
}

/// Iterator over every full path in lexicographic atom order.
pub struct PathIter<'a> {
    model: &'a EvolutionModel,
    next: Option<Vec<usize>>,
}

impl Iterator for PathIter<'_> {
    type Item = (PathIndex, Path);

    fn next(&mut self) -> Option<Self::Item> {
        let current = self.next.take()?;
        let path = realize(self.model, &current);
        let mut succ = current.clone();
        let mut advanced = false;
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.model.steps[i].shocks.len() {
                advanced = true;
                break;
            }
            succ[i] = 0;
        }
        if advanced {
            self.next = Some(succ);
        }
        Some((PathIndex(current), path))
    }
}

/// Stream every full path exactly once (default cap).
pub fn enumerate_paths(model: &EvolutionModel) -> Result<PathIter<'_>> {
    enumerate_paths_capped(model, DEFAULT_CAP)
}

pub fn enumerate_paths_capped(model: &EvolutionModel, cap: u64) -> Result<PathIter<'_>> {
    model.require_atoms()?;
    let count = model.path_count(cap)?;
    let next = if count == 0 { None } else { Some(vec![0; model.horizon()]) };
    Ok(PathIter { model, next })
}

/// Draw `count` independent paths; deterministic for a given seed.
pub fn simulate(model: &EvolutionModel, count: usize, seed: u64) -> Result<Vec<Path>> {
    model.require_atoms()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers = model
        .steps
        .iter()
        .map(|s| WeightedIndex::new(s.shocks.iter().map(|a| a.prob)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidModel(format!("cannot sample shocks: {e}")))?;
    let mut atoms = vec![0usize; model.horizon()];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for (slot, sampler) in atoms.iter_mut().zip(&samplers) {
            *slot = sampler.sample(&mut rng);
        }
        out.push(realize(model, &atoms));
    }
    Ok(out)
}
