//! Martingale measures on the finite sample space.
//!
//! A spot measure picks one down atom and one up atom per step and spreads
//! mass over the resulting binary tree with the weights from [`psi_pair`].
//! Mixture measures average spot measures with an α-density per step and are
//! stored as explicit per-node densities against the base probability.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{shock_return, sigma_at, EvolutionModel, StepSpec, DEFAULT_CAP};
use crate::par;
use crate::pricing::{PathFunctional, FREE_ATOM};
use crate::tree::ScenarioTree;

/// Tolerance for α normalization.
pub const ALPHA_TOL: f64 = 1e-12;

/// Weights of the down and up branch for relative moves `x_down < 0 <= ...`.
///
/// Both weights share the denominator `x_up - x_down`; `x_down` may be zero,
/// in which case all mass sits on the down branch.
pub fn psi_pair(x_down: f64, x_up: f64) -> (f64, f64) {
    let d = x_up - x_down;
    (x_up / d, -x_down / d)
}

/// Spot weights for a sign-separated pair of shocks after the shock prefix
/// `history`.
pub fn psi_weights(model: &EvolutionModel, history: &[f64], eps_down: f64, eps_up: f64) -> Result<(f64, f64)> {
    if !(eps_down < 0.0 && eps_up > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need eps_down < 0 < eps_up, got {eps_down} and {eps_up}"
        )));
    }
    let sigma = sigma_at(model, history.len() + 1, history)?;
    let xd = shock_return(sigma, eps_down);
    let xu = shock_return(sigma, eps_up);
    if !(xu > xd) {
        return Err(Error::DegeneratePair { step: history.len() + 1 });
    }
    Ok(psi_pair(xd, xu))
}

/// One down atom and one up atom per step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AtomPairSelection {
    pub pairs: Vec<(usize, usize)>,
}

impl AtomPairSelection {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn validate(&self, model: &EvolutionModel) -> Result<()> {
        model.require_atoms()?;
        if self.pairs.len() != model.horizon() {
            return Err(Error::InvalidArgument(format!(
                "selection has {} pairs, horizon is {}",
                self.pairs.len(),
                model.horizon()
            )));
        }
        for (i, &(d, u)) in self.pairs.iter().enumerate() {
            let shocks = &model.steps[i].shocks;
            let n = i + 1;
            match shocks.get(d) {
                Some(a) if a.eps < 0.0 => {}
                Some(_) => {
                    return Err(Error::InvalidArgument(format!("down atom {d} at step {n} is not strictly negative")))
                }
                None => return Err(Error::InvalidArgument(format!("atom {d} does not exist at step {n}"))),
            }
            match shocks.get(u) {
                Some(a) if a.eps > 0.0 => {}
                Some(_) => return Err(Error::InvalidArgument(format!("up atom {u} at step {n} is not positive"))),
                None => return Err(Error::InvalidArgument(format!("atom {u} does not exist at step {n}"))),
            }
        }
        Ok(())
    }

    fn choices(&self, model: &EvolutionModel) -> Vec<PairChoice> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, &(d, u))| {
                let s = &model.steps[i].shocks;
                PairChoice {
                    down: Branch { eps: s[d].eps, atom: d },
                    up: Branch { eps: s[u].eps, atom: u },
                }
            })
            .collect()
    }
}

/// A spot measure: a selection bound to its model.
#[derive(Debug, Clone)]
pub struct SpotMeasure<'a> {
    model: &'a EvolutionModel,
    selection: AtomPairSelection,
}

impl<'a> SpotMeasure<'a> {
    pub fn new(model: &'a EvolutionModel, selection: AtomPairSelection) -> Result<Self> {
        selection.validate(model)?;
        Ok(Self { model, selection })
    }

    pub fn selection(&self) -> &AtomPairSelection {
        &self.selection
    }

    pub fn expectation(&self, payoff: &dyn PathFunctional) -> Result<f64> {
        pair_tree_expectation(self.model, &self.selection.choices(self.model), payoff, DEFAULT_CAP)
    }
}

/// A shock value on one branch of a pair tree and the atom it came from
/// ([`FREE_ATOM`] for values off the atom set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub eps: f64,
    pub atom: usize,
}

impl Branch {
    pub fn free(eps: f64) -> Self {
        Self { eps, atom: FREE_ATOM }
    }
}

/// Down and up branch of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairChoice {
    pub down: Branch,
    pub up: Branch,
}

/// Expectation over the binary tree spanned by one pair of shocks per step.
///
/// Requires `down.eps <= 0 < up.eps`. Branches are visited down first and
/// leaf terms are accumulated in that order.
pub fn pair_tree_expectation(
    model: &EvolutionModel,
    choices: &[PairChoice],
    payoff: &dyn PathFunctional,
    cap: u64,
) -> Result<f64> {
    let n = model.horizon();
    if choices.len() != n {
        return Err(Error::InvalidArgument(format!("{} pairs for horizon {n}", choices.len())));
    }
    if payoff.needs_atoms() && choices.iter().any(|c| c.down.atom == FREE_ATOM || c.up.atom == FREE_ATOM) {
        return Err(Error::Unsupported("payoff needs atom indices but shocks are off the atom set".into()));
    }
    for (i, c) in choices.iter().enumerate() {
        if !(c.down.eps <= 0.0 && c.up.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step {}: need eps_down <= 0 < eps_up, got {} and {}",
                i + 1,
                c.down.eps,
                c.up.eps
            )));
        }
    }
    let leaves = 1u128.checked_shl(n as u32).unwrap_or(u128::MAX);
    if n >= 128 || leaves > cap as u128 {
        return Err(Error::CapExceeded { what: "binary branch", count: leaves, cap });
    }
    let mut walk = PairWalk {
        model,
        choices,
        payoff,
        atoms: Vec::with_capacity(n),
        prices: Vec::with_capacity(n + 1),
        acc: 0.0,
    };
    walk.prices.push(model.s0);
    walk.descend(0, model.s0, None, 1.0)?;
    Ok(walk.acc)
}

struct PairWalk<'a> {
    model: &'a EvolutionModel,
    choices: &'a [PairChoice],
    payoff: &'a dyn PathFunctional,
    atoms: Vec<usize>,
    prices: Vec<f64>,
    acc: f64,
}

impl PairWalk<'_> {
    fn descend(&mut self, n: usize, price: f64, prev: Option<(f64, f64)>, weight: f64) -> Result<()> {
        if n == self.choices.len() {
            self.acc += weight * self.payoff.value(&self.atoms, &self.prices);
            return Ok(());
        }
        let step = &self.model.steps[n];
        let sigma = step.vol.next_sigma(prev);
        let c = self.choices[n];
        let xd = shock_return(sigma, c.down.eps);
        let xu = shock_return(sigma, c.up.eps);
        if !(xu > xd) {
            return Err(Error::DegeneratePair { step: n + 1 });
        }
        let (pd, pu) = psi_pair(xd, xu);
        for (b, psi, x) in [(c.down, pd, xd), (c.up, pu, xu)] {
            let next = price * (1.0 + step.a * x);
            self.atoms.push(b.atom);
            self.prices.push(next);
            self.descend(n + 1, next, Some((sigma, b.eps)), weight * psi)?;
            self.atoms.pop();
            self.prices.pop();
        }
        Ok(())
    }
}

/// Expectation of `payoff` under the spot measure of `selection`.
pub fn spot_expectation(
    model: &EvolutionModel,
    selection: &AtomPairSelection,
    payoff: &dyn PathFunctional,
) -> Result<f64> {
    SpotMeasure::new(model, selection.clone())?.expectation(payoff)
}

/// α-density of one step over (down atom, up atom) pairs. Down atoms are
/// those with `eps <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaStep {
    pub down: Vec<usize>,
    pub up: Vec<usize>,
    /// Row-major `weights[i * up.len() + j]` for `(down[i], up[j])`.
    pub weights: Vec<f64>,
}

impl AlphaStep {
    /// Validate strict positivity and normalization against `step`.
    pub fn new(step: &StepSpec, weights: Vec<f64>) -> Result<Self> {
        let down = step.down_atoms();
        let up = step.up_atoms();
        if down.is_empty() || up.is_empty() {
            return Err(Error::InvalidArgument("step needs both down and up atoms".into()));
        }
        if weights.len() != down.len() * up.len() {
            return Err(Error::InvalidArgument(format!(
                "alpha has {} entries, expected {}x{}",
                weights.len(),
                down.len(),
                up.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("alpha must be strictly positive, found {w}")));
        }
        let a = Self { down, up, weights };
        let norm = a.normalization(step);
        if (norm - 1.0).abs() > ALPHA_TOL {
            return Err(Error::InvalidArgument(format!("alpha normalization is {norm}, expected 1")));
        }
        Ok(a)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.up.len() + j]
    }

    /// `sum p_d p_u alpha[d][u]`.
    pub fn normalization(&self, step: &StepSpec) -> f64 {
        let mut s = 0.0;
        for (i, &d) in self.down.iter().enumerate() {
            for (j, &u) in self.up.iter().enumerate() {
                s += step.shocks[d].prob * step.shocks[u].prob * self.weight(i, j);
            }
        }
        s
    }
}

/// One α-density per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaDensity {
    pub steps: Vec<AlphaStep>,
}

impl AlphaDensity {
    pub fn new(model: &EvolutionModel, steps: Vec<AlphaStep>) -> Result<Self> {
        if steps.len() != model.horizon() {
            return Err(Error::InvalidArgument(format!("{} alpha steps for horizon {}", steps.len(), model.horizon())));
        }
        for (i, a) in steps.iter().enumerate() {
            let s = &model.steps[i];
            if a.down != s.down_atoms() || a.up != s.up_atoms() {
                return Err(Error::InvalidArgument(format!("alpha at step {} does not match the atom split", i + 1)));
            }
            AlphaStep::new(s, a.weights.clone())?;
        }
        Ok(Self { steps })
    }

    /// The density `1 / (P(down) P(up))` at every step.
    pub fn uniform(model: &EvolutionModel) -> Result<Self> {
        let steps = model
            .steps
            .iter()
            .map(|s| {
                let pd: f64 = s.down_atoms().iter().map(|&i| s.shocks[i].prob).sum();
                let pu: f64 = s.up_atoms().iter().map(|&i| s.shocks[i].prob).sum();
                let n = s.down_atoms().len() * s.up_atoms().len();
                AlphaStep::new(s, vec![1.0 / (pd * pu); n])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steps })
    }
}

fn block_density(
    step: &StepSpec,
    side: &[usize],
    blocks: &[Vec<usize>],
    weights: &[f64],
    label: &str,
) -> Result<Vec<Vec<f64>>> {
    let prob = |set: &mut dyn Iterator<Item = usize>| set.map(|i| step.shocks[i].prob).sum::<f64>();
    let total = prob(&mut side.iter().copied());
    if blocks.is_empty() {
        return Ok(vec![side.iter().map(|_| 1.0 / total).collect()]);
    }
    if weights.len() != blocks.len() {
        return Err(Error::InvalidArgument(format!("{} {label} weights for {} blocks", weights.len(), blocks.len())));
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (b, &w) in blocks.iter().zip(weights) {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::InvalidArgument(format!("{label} weight {w} not in (0,1)")));
        }
        if let Some(i) = b.iter().find(|i| !side.contains(i)) {
            return Err(Error::InvalidArgument(format!("atom {i} is not on the {label} side")));
        }
        let pb = prob(&mut b.iter().copied());
        let pc = total - pb;
        if !(pb > 0.0) || !(pc > PROB_EPS) {
            return Err(Error::InvalidArgument(format!("{label} block {b:?} or its complement has zero probability")));
        }
        out.push(side.iter().map(|i| if b.contains(i) { (1.0 - w) / pb } else { w / pc }).collect());
    }
    Ok(out)
}

const PROB_EPS: f64 = 1e-15;

/// α-density of one step built from blocks of down and up atoms.
///
/// Each down block `B` with weight `delta` contributes the density
/// `(1 - delta) 1_B / P(B) + delta 1_{A \ B} / P(A \ B)` on the down set `A`
/// (likewise for up blocks with `mus`), and the step density is
/// `sum_{i,s} gammas[i * S + s] * down_i(d) * up_s(u)`. A side without blocks
/// uses `1_A / P(A)`.
pub fn alpha_from_partition(
    step: &StepSpec,
    down_blocks: &[Vec<usize>],
    up_blocks: &[Vec<usize>],
    deltas: &[f64],
    mus: &[f64],
    gammas: &[f64],
) -> Result<AlphaStep> {
    let down = step.down_atoms();
    let up = step.up_atoms();
    if down.is_empty() || up.is_empty() {
        return Err(Error::InvalidArgument("step needs both down and up atoms".into()));
    }
    let dd = block_density(step, &down, down_blocks, deltas, "down")?;
    let ud = block_density(step, &up, up_blocks, mus, "up")?;
    if gammas.len() != dd.len() * ud.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gammas for {}x{} block densities",
            gammas.len(),
            dd.len(),
            ud.len()
        )));
    }
    if gammas.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::InvalidArgument("gammas must be nonnegative".into()));
    }
    let gsum: f64 = gammas.iter().sum();
    if (gsum - 1.0).abs() > ALPHA_TOL {
        return Err(Error::InvalidArgument(format!("gammas sum to {gsum}, expected 1")));
    }
    let mut weights = vec![0.0; down.len() * up.len()];
    for (bi, dv) in dd.iter().enumerate() {
        for (si, uv) in ud.iter().enumerate() {
            let g = gammas[bi * ud.len() + si];
            for (i, &x) in dv.iter().enumerate() {
                for (j, &y) in uv.iter().enumerate() {
                    weights[i * up.len() + j] += g * x * y;
                }
            }
        }
    }
    AlphaStep::new(step, weights)
}

/// Density `psi` of a measure with respect to the base probability, stored
/// per step and level node: `psi(n, node)` for a level-`n` node weights the
/// last atom of that node given its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDensity {
    levels: Vec<Vec<f64>>,
}

impl MeasureDensity {
    /// Wrap explicit per-level values; `levels[n - 1]` has one entry per
    /// level-`n` node.
    pub fn from_levels(tree: &ScenarioTree, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.len() != tree.horizon() {
            return Err(Error::InvalidArgument(format!("{} levels for horizon {}", levels.len(), tree.horizon())));
        }
        for (i, l) in levels.iter().enumerate() {
            if l.len() != tree.level_len(i + 1) {
                return Err(Error::InvalidArgument(format!("level {} has {} entries", i + 1, l.len())));
            }
        }
        Ok(Self { levels })
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    /// `psi_n` at a level-`n` node.
    pub fn psi(&self, n: usize, node: usize) -> f64 {
        self.levels[n - 1][node]
    }

    pub fn psi_mut(&mut self, n: usize, node: usize) -> &mut f64 {
        &mut self.levels[n - 1][node]
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n - 1]
    }

    /// Flat records for export.
    pub fn records(&self, tree: &ScenarioTree) -> Vec<DensityRecord> {
        let mut out = Vec::new();
        for n in 1..=self.horizon() {
            for (node, &psi) in self.levels[n - 1].iter().enumerate() {
                let mut history = tree.history(n, node);
                let atom = history.pop().expect("level n >= 1");
                out.push(DensityRecord { step: n, history, atom, psi });
            }
        }
        out
    }
}

/// One exported density value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRecord {
    pub step: usize,
    pub history: Vec<usize>,
    pub atom: usize,
    pub psi: f64,
}

/// Mixture density of the α-family, building the tree with the default cap.
pub fn mixture_density(model: &EvolutionModel, alphas: &AlphaDensity) -> Result<MeasureDensity> {
    let tree = ScenarioTree::build(model, DEFAULT_CAP)?;
    mixture_density_in(model, &tree, alphas)
}

/// Mixture density on a prebuilt tree.
///
/// For a down atom `d`: `psi = sum_u p_u alpha[d][u] x_u / (x_u - x_d)`; for
/// an up atom `u`: `psi = sum_d p_d alpha[d][u] (-x_d) / (x_u - x_d)`, where
/// `x = exp(sigma eps) - 1` at the parent node.
pub fn mixture_density_in(model: &EvolutionModel, tree: &ScenarioTree, alphas: &AlphaDensity) -> Result<MeasureDensity> {
    if alphas.steps.len() != model.horizon() {
        return Err(Error::InvalidArgument("alpha density does not match the horizon".into()));
    }
    let mut levels = Vec::with_capacity(model.horizon());
    for n in 1..=model.horizon() {
        let step = &model.steps[n - 1];
        let alpha = &alphas.steps[n - 1];
        let m = step.shocks.len();
        let parents = tree.level_len(n - 1);
        let chunks = par::map_chunks(parents, |r| -> Result<Vec<f64>> {
            let mut out = vec![0.0; r.len() * m];
            for (k, h) in r.enumerate() {
                let x = tree.moves(model, n, h);
                let slot = &mut out[k * m..(k + 1) * m];
                for (i, &d) in alpha.down.iter().enumerate() {
                    for (j, &u) in alpha.up.iter().enumerate() {
                        let v = x[u] - x[d];
                        if !(v > 0.0) {
                            return Err(Error::DegeneratePair { step: n });
                        }
                        let w = alpha.weight(i, j);
                        slot[d] += step.shocks[u].prob * w * x[u] / v;
                        slot[u] += step.shocks[d].prob * w * (-x[d]) / v;
                    }
                }
            }
            Ok(out)
        });
        let mut level = Vec::with_capacity(parents * m);
        for c in chunks {
            level.extend(c?);
        }
        levels.push(level);
    }
    Ok(MeasureDensity { levels })
}

/// A spot measure written as a density: `psi / p` on the selected atoms and
/// zero elsewhere.
pub fn spot_density(model: &EvolutionModel, tree: &ScenarioTree, selection: &AtomPairSelection) -> Result<MeasureDensity> {
    selection.validate(model)?;
    let mut levels = Vec::with_capacity(model.horizon());
    for n in 1..=model.horizon() {
        let step = &model.steps[n - 1];
        let (d, u) = selection.pairs[n - 1];
        let m = step.shocks.len();
        let mut level = vec![0.0; tree.level_len(n)];
        for h in 0..tree.level_len(n - 1) {
            let x = tree.moves(model, n, h);
            if !(x[u] > x[d]) {
                return Err(Error::DegeneratePair { step: n });
            }
            let (pd, pu) = psi_pair(x[d], x[u]);
            level[h * m + d] = pd / step.shocks[d].prob;
            level[h * m + u] = pu / step.shocks[u].prob;
        }
        levels.push(level);
    }
    Ok(MeasureDensity { levels })
}

/// `sum over full paths of base_prob * prod psi * payoff`.
pub fn measure_expectation(
    model: &EvolutionModel,
    tree: &ScenarioTree,
    density: &MeasureDensity,
    payoff: &dyn PathFunctional,
) -> Result<f64> {
    let n = model.horizon();
    if density.horizon() != n || tree.horizon() != n {
        return Err(Error::InvalidArgument("density, tree and model horizons differ".into()));
    }
    let leaves = tree.level_len(n);
    let sums = par::map_chunks(leaves, |r| {
        let mut prices = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for leaf in r {
            let atoms = tree.history(n, leaf);
            tree.price_prefix(n, leaf, &mut prices);
            let mut w = 1.0;
            let mut node = 0;
            for (i, &j) in atoms.iter().enumerate() {
                node = node * tree.atoms_at(i + 1) + j;
                w *= model.steps[i].shocks[j].prob * density.psi(i + 1, node);
            }
            acc += w * payoff.value(&atoms, &prices);
        }
        acc
    });
    Ok(sums.into_iter().fold(0.0, |a, s| a + s))
}

/// Residuals at one `(step, history)` node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeResidual {
    pub step: usize,
    pub history: Vec<usize>,
    /// `|sum p psi - 1|`
    pub normalization: f64,
    /// `|sum p psi dS| / S_{n-1}`
    pub drift: f64,
}

/// Worst residuals of one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResidual {
    pub step: usize,
    pub max_normalization: f64,
    pub max_drift: f64,
}

/// Outcome of [`verify_martingale`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub tol: f64,
    pub max_normalization_residual: f64,
    pub max_drift_residual: f64,
    pub per_step: Vec<StepResidual>,
    /// Nodes where either residual exceeds `tol`, in tree order.
    pub failures: Vec<NodeResidual>,
    /// Normalization and drift both within `tol`.
    pub martingale: bool,
    /// Every atom carries strictly positive weight.
    pub equivalent: bool,
    pub zero_atoms: usize,
    pub negative_atoms: usize,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.martingale
    }
}

/// Check normalization and zero conditional drift at every node.
pub fn verify_martingale(model: &EvolutionModel, tree: &ScenarioTree, density: &MeasureDensity, tol: f64) -> MartingaleReport {
    let mut per_step = Vec::new();
    let mut failures = Vec::new();
    let (mut max_norm, mut max_drift) = (0.0f64, 0.0f64);
    let (mut zero_atoms, mut negative_atoms) = (0, 0);
    for n in 1..=model.horizon().min(density.horizon()) {
        let step = &model.steps[n - 1];
        let m = step.shocks.len();
        let (mut sn, mut sd) = (0.0f64, 0.0f64);
        for h in 0..tree.level_len(n - 1) {
            let x = tree.moves(model, n, h);
            let (mut norm, mut drift) = (0.0, 0.0);
            for (j, atom) in step.shocks.iter().enumerate() {
                let psi = density.psi(n, h * m + j);
                if psi == 0.0 {
                    zero_atoms += 1;
                } else if psi < 0.0 || psi.is_nan() {
                    negative_atoms += 1;
                }
                norm += atom.prob * psi;
                drift += atom.prob * psi * step.a * x[j];
            }
            let nr = (norm - 1.0).abs();
            let dr = drift.abs();
            let (nr, dr) = (if nr.is_nan() { f64::INFINITY } else { nr }, if dr.is_nan() { f64::INFINITY } else { dr });
            sn = sn.max(nr);
            sd = sd.max(dr);
            if nr > tol || dr > tol {
                failures.push(NodeResidual { step: n, history: tree.history(n - 1, h), normalization: nr, drift: dr });
            }
        }
        max_norm = max_norm.max(sn);
        max_drift = max_drift.max(sd);
        per_step.push(StepResidual { step: n, max_normalization: sn, max_drift: sd });
    }
    let shape_ok = density.horizon() == model.horizon();
    MartingaleReport {
        tol,
        max_normalization_residual: max_norm,
        max_drift_residual: max_drift,
        per_step,
        martingale: shape_ok && failures.is_empty(),
        failures,
        equivalent: zero_atoms == 0 && negative_atoms == 0,
        zero_atoms,
        negative_atoms,
    }
}

/// Both sides of the representation of a mixture expectation as an
/// α-weighted average of spot expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralCheck {
    pub mixture: f64,
    pub spot_average: f64,
    pub deviation: f64,
}

/// Compare the mixture expectation with the α-weighted sum of pair-tree
/// expectations over every per-step pair selection (down atoms with
/// `eps = 0` included).
pub fn integral_representation_check(
    model: &EvolutionModel,
    alphas: &AlphaDensity,
    payoff: &dyn PathFunctional,
) -> Result<IntegralCheck> {
    let tree = ScenarioTree::build(model, DEFAULT_CAP)?;
    let density = mixture_density_in(model, &tree, alphas)?;
    let mixture = measure_expectation(model, &tree, &density, payoff)?;

    let radix: Vec<usize> = alphas.steps.iter().map(|a| a.down.len() * a.up.len()).collect();
    let mut count: u128 = 1;
    for &r in &radix {
        count = count.saturating_mul(r as u128);
    }
    let tree_leaves = 1u128 << model.horizon().min(127);
    if count.saturating_mul(tree_leaves) > DEFAULT_CAP as u128 {
        return Err(Error::CapExceeded { what: "pair selection", count, cap: DEFAULT_CAP });
    }
    let count = count as usize;
    let terms = par::map_chunks(count, |r| -> Result<f64> {
        let mut acc = 0.0;
        let mut choices = Vec::with_capacity(radix.len());
        for k in r {
            choices.clear();
            let mut rem = k;
            let mut digits = vec![0; radix.len()];
            for i in (0..radix.len()).rev() {
                digits[i] = rem % radix[i];
                rem /= radix[i];
            }
            let mut w = 1.0;
            for (i, &dig) in digits.iter().enumerate() {
                let a = &alphas.steps[i];
                let shocks = &model.steps[i].shocks;
                let (di, uj) = (dig / a.up.len(), dig % a.up.len());
                let (d, u) = (a.down[di], a.up[uj]);
                w *= shocks[d].prob * shocks[u].prob * a.weight(di, uj);
                choices.push(PairChoice {
                    down: Branch { eps: shocks[d].eps, atom: d },
                    up: Branch { eps: shocks[u].eps, atom: u },
                });
            }
            acc += w * pair_tree_expectation(model, &choices, payoff, DEFAULT_CAP)?;
        }
        Ok(acc)
    });
    let mut spot_average = 0.0;
    for t in terms {
        spot_average += t?;
    }
    Ok(IntegralCheck { mixture, spot_average, deviation: (mixture - spot_average).abs() })
}
