//! Optional decomposition of positive supermartingales.
//!
//! For a surface `f` with `f_n / f_{n-1} <= 1 + gamma_{n-1} dS_n` at every
//! node, the process `M_n = f_0 + sum_{i<=n} f_{i-1} gamma_{i-1} dS_i` is a
//! martingale under every measure of the family and `f_n = M_n - sum g_i`
//! with nonnegative consumption `g_n = f_{n-1} (1 + gamma_{n-1} dS_n) - f_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{spot_density, AtomPairSelection, MeasureDensity};
use crate::model::EvolutionModel;
use crate::tree::ScenarioTree;

/// Default tolerance, scaled by `max(1, f_{n-1})`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Surface file: every history prefix with its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub floor: f64,
    pub nodes: Vec<SurfaceNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceNode {
    pub history: Vec<usize>,
    pub value: f64,
}

/// Values `f_n` on every prefix, stored per tree level.
#[derive(Debug, Clone, PartialEq)]
pub struct SupermartingaleSurface {
    floor: f64,
    values: Vec<Vec<f64>>,
}

impl SupermartingaleSurface {
    /// Evaluate `f(n, prices S_0..S_n, history)` on every node.
    pub fn from_fn<F>(tree: &ScenarioTree, floor: f64, f: F) -> Result<Self>
    where
        F: Fn(usize, &[f64], &[usize]) -> f64,
    {
        let mut prices = Vec::new();
        let values = (0..=tree.horizon())
            .map(|n| {
                (0..tree.level_len(n))
                    .map(|node| {
                        tree.price_prefix(n, node, &mut prices);
                        f(n, &prices, &tree.history(n, node))
                    })
                    .collect()
            })
            .collect();
        Self::from_levels(floor, values)
    }

    pub fn from_levels(floor: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::InvalidArgument(format!("surface floor must be positive, got {floor}")));
        }
        for (n, level) in values.iter().enumerate() {
            if let Some(v) = level.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("surface value {v} at step {n}")));
            }
        }
        Ok(Self { floor, values })
    }

    /// Read a surface file; every prefix must be present exactly once.
    pub fn from_file(tree: &ScenarioTree, file: &SurfaceFile) -> Result<Self> {
        let mut values: Vec<Vec<Option<f64>>> = (0..=tree.horizon()).map(|n| vec![None; tree.level_len(n)]).collect();
        for node in &file.nodes {
            let idx = tree.node_index(&node.history)?;
            let slot = &mut values[node.history.len()][idx];
            if slot.is_some() {
                return Err(Error::InvalidArgument(format!("surface lists history {:?} twice", node.history)));
            }
            *slot = Some(node.value);
        }
        let mut out = Vec::with_capacity(values.len());
        for (n, level) in values.into_iter().enumerate() {
            let mut row = Vec::with_capacity(level.len());
            for (i, v) in level.into_iter().enumerate() {
                match v {
                    Some(v) => row.push(v),
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "surface has no value for history {:?}",
                            tree.history(n, i)
                        )))
                    }
                }
            }
            out.push(row);
        }
        Self::from_levels(file.floor, out)
    }

    pub fn to_file(&self, tree: &ScenarioTree) -> SurfaceFile {
        let mut nodes = Vec::new();
        for (n, level) in self.values.iter().enumerate() {
            for (i, &value) in level.iter().enumerate() {
                nodes.push(SurfaceNode { history: tree.history(n, i), value });
            }
        }
        SurfaceFile { floor: self.floor, nodes }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn value(&self, n: usize, node: usize) -> f64 {
        self.values[n][node]
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    fn check_shape(&self, tree: &ScenarioTree) -> Result<()> {
        if self.values.len() != tree.horizon() + 1
            || self.values.iter().enumerate().any(|(n, l)| l.len() != tree.level_len(n))
        {
            return Err(Error::InvalidArgument("surface does not match the model tree".into()));
        }
        Ok(())
    }

    /// Lift the surface above its floor.
    ///
    /// Negative values are rejected. If some value is below the floor the
    /// whole surface is shifted by `a = max(1, |min f|) * 1e-3` and the floor
    /// becomes `min(floor, min f + a)`; the shift is returned so callers can
    /// undo it.
    pub fn lifted(&self) -> Result<(Self, f64)> {
        let min = self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            return Err(Error::Precondition(format!("supermartingale surface must be nonnegative, min is {min}")));
        }
        if min >= self.floor {
            return Ok((self.clone(), 0.0));
        }
        let a = min.abs().max(1.0) * 1e-3;
        let values = self.values.iter().map(|l| l.iter().map(|v| v + a).collect()).collect();
        Ok((Self { floor: self.floor.min(min + a), values }, a))
    }
}

/// Increments `dS_n` of every atom of step `n` at a level-`(n-1)` node.
fn increments(model: &EvolutionModel, tree: &ScenarioTree, n: usize, node: usize) -> Vec<f64> {
    let s = tree.price(n - 1, node);
    let a = model.steps[n - 1].a;
    tree.moves(model, n, node).into_iter().map(|x| s * a * x).collect()
}

/// `min over atoms with dS < 0 of (1 - f_n / f_{n-1}) / |dS_n|` at a
/// level-`(n-1)` node.
pub fn gamma_step(
    model: &EvolutionModel,
    tree: &ScenarioTree,
    surface: &SupermartingaleSurface,
    n: usize,
    node: usize,
) -> Result<f64> {
    if n == 0 || n > tree.horizon() {
        return Err(Error::InvalidArgument(format!("step {n} out of range 1..={}", tree.horizon())));
    }
    let parent = surface.value(n - 1, node);
    let mut best: Option<f64> = None;
    for (j, d) in increments(model, tree, n, node).into_iter().enumerate() {
        if d < 0.0 {
            let r = surface.value(n, tree.child(n - 1, node, j)) / parent;
            let c = (1.0 - r) / (-d);
            best = Some(best.map_or(c, |b: f64| b.min(c)));
        }
    }
    best.ok_or_else(|| {
        Error::Precondition(format!(
            "no atom with a downward move at step {n}, history {:?}",
            tree.history(n - 1, node)
        ))
    })
}

/// A node where the ratio bound fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioFailure {
    pub step: usize,
    pub history: Vec<usize>,
    pub atom: usize,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub tol: f64,
    pub passed: bool,
    /// Largest `(f_n - f_{n-1} (1 + gamma dS)) / max(1, f_{n-1})`.
    pub max_excess: f64,
    pub failures: Vec<RatioFailure>,
}

/// Check `f_n / f_{n-1} <= 1 + gamma_{n-1} dS_n` at every node and atom, in
/// value terms with tolerance `tol * max(1, f_{n-1})`.
pub fn check_ratio_bound(
    model: &EvolutionModel,
    tree: &ScenarioTree,
    surface: &SupermartingaleSurface,
    tol: f64,
) -> Result<RatioReport> {
    surface.check_shape(tree)?;
    let mut failures = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for n in 1..=tree.horizon() {
        for h in 0..tree.level_len(n - 1) {
            let gamma = gamma_step(model, tree, surface, n, h)?;
            let parent = surface.value(n - 1, h);
            for (j, d) in increments(model, tree, n, h).into_iter().enumerate() {
                let child = surface.value(n, tree.child(n - 1, h, j));
                let bound = 1.0 + gamma * d;
                let excess = (child - parent * bound) / parent.max(1.0);
                max_excess = max_excess.max(excess);
                if excess > tol {
                    failures.push(RatioFailure {
                        step: n,
                        history: tree.history(n - 1, h),
                        atom: j,
                        ratio: child / parent,
                        bound,
                    });
                }
            }
        }
    }
    Ok(RatioReport { tol, passed: failures.is_empty(), max_excess, failures })
}

/// Output of [`optional_decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Constant added to the input surface to lift it above its floor.
    pub shift: f64,
    /// The (lifted) surface values, per level.
    pub f: Vec<Vec<f64>>,
    /// `gamma_{n-1}` at each level-`(n-1)` node, `n = 1..=N`.
    pub gamma: Vec<Vec<f64>>,
    /// `xi0_n` and `g_n` at each level-`n` node, `n = 1..=N`.
    pub xi0: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    /// `M_n` at each level-`n` node, `n = 0..=N`.
    pub m: Vec<Vec<f64>>,
}

/// Decompose a surface that satisfies the ratio bound at [`DEFAULT_TOL`].
pub fn optional_decompose(
    model: &EvolutionModel,
    tree: &ScenarioTree,
    surface: &SupermartingaleSurface,
) -> Result<Decomposition> {
    surface.check_shape(tree)?;
    let (surface, shift) = surface.lifted()?;
    let report = check_ratio_bound(model, tree, &surface, DEFAULT_TOL)?;
    if let Some(f) = report.failures.first() {
        return Err(Error::Precondition(format!(
            "ratio bound fails at step {}, history {:?}, atom {}: ratio {} > {} ({} failing nodes; surface is not a supermartingale for the family)",
            f.step,
            f.history,
            f.atom,
            f.ratio,
            f.bound,
            report.failures.len()
        )));
    }
    let n_steps = tree.horizon();
    let mut gamma = Vec::with_capacity(n_steps);
    let mut xi0 = Vec::with_capacity(n_steps);
    let mut g = Vec::with_capacity(n_steps);
    let mut m = Vec::with_capacity(n_steps + 1);
    m.push(vec![surface.value(0, 0)]);
    for n in 1..=n_steps {
        let len = tree.level_len(n);
        let mut lg = Vec::with_capacity(tree.level_len(n - 1));
        let (mut lx, mut lgn, mut lm) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for h in 0..tree.level_len(n - 1) {
            let gm = gamma_step(model, tree, &surface, n, h)?;
            lg.push(gm);
            let parent = surface.value(n - 1, h);
            let m_parent = m[n - 1][h];
            for (j, d) in increments(model, tree, n, h).into_iter().enumerate() {
                let c = tree.child(n - 1, h, j);
                let xi = 1.0 + gm * d;
                lx[c] = xi;
                lgn[c] = parent * xi - surface.value(n, c);
                lm[c] = m_parent + parent * (xi - 1.0);
            }
        }
        gamma.push(lg);
        xi0.push(lx);
        g.push(lgn);
        m.push(lm);
    }
    Ok(Decomposition { shift, f: surface.values, gamma, xi0, g, m })
}

/// Per-atom entry of an exported node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomEntry {
    pub xi0: f64,
    pub g: f64,
}

/// Exported node: `gamma` and atoms are absent at the last level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionNode {
    pub history: Vec<usize>,
    pub gamma: Option<f64>,
    pub atoms: Vec<AtomEntry>,
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionExport {
    pub shift: f64,
    pub nodes: Vec<DecompositionNode>,
}

impl Decomposition {
    pub fn horizon(&self) -> usize {
        self.gamma.len()
    }

    pub fn export(&self, tree: &ScenarioTree) -> DecompositionExport {
        let mut nodes = Vec::new();
        for n in 0..=self.horizon() {
            for (h, &m) in self.m[n].iter().enumerate() {
                let (gamma, atoms) = if n < self.horizon() {
                    let k = tree.atoms_at(n + 1);
                    let atoms = (0..k)
                        .map(|j| {
                            let c = h * k + j;
                            AtomEntry { xi0: self.xi0[n][c], g: self.g[n][c] }
                        })
                        .collect();
                    (Some(self.gamma[n][h]), atoms)
                } else {
                    (None, Vec::new())
                };
                nodes.push(DecompositionNode { history: tree.history(n, h), gamma, atoms, m });
            }
        }
        DecompositionExport { shift: self.shift, nodes }
    }
}

/// One failed decomposition check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionFailure {
    pub kind: &'static str,
    pub step: usize,
    pub history: Vec<usize>,
    pub atom: Option<usize>,
    pub density: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub tol: f64,
    pub passed: bool,
    /// Which measures the martingale property was checked against.
    pub scope: String,
    pub densities_checked: usize,
    pub min_g: f64,
    pub max_reconstruction_residual: f64,
    pub max_martingale_residual: f64,
    pub failures: Vec<DecompositionFailure>,
}

/// Check consumption signs, the reconstruction `f_n = M_n - sum g`, and
/// `E^Q[M_n | history] = M_{n-1}` for every supplied density.
///
/// The surface is lifted exactly as in [`optional_decompose`].
pub fn verify_decomposition(
    model: &EvolutionModel,
    tree: &ScenarioTree,
    surface: &SupermartingaleSurface,
    dec: &Decomposition,
    densities: &[MeasureDensity],
    tol: f64,
) -> Result<DecompositionReport> {
    surface.check_shape(tree)?;
    let (surface, _) = surface.lifted()?;
    if dec.horizon() != tree.horizon() {
        return Err(Error::InvalidArgument("decomposition does not match the model tree".into()));
    }
    let mut failures = Vec::new();
    let mut min_g = f64::INFINITY;
    let mut max_rec = 0.0f64;
    let mut max_mart = 0.0f64;
    let mut consumed: Vec<f64> = vec![0.0];
    for n in 1..=tree.horizon() {
        let k = tree.atoms_at(n);
        let mut next = vec![0.0; tree.level_len(n)];
        for h in 0..tree.level_len(n - 1) {
            let scale = surface.value(n - 1, h).max(1.0);
            for j in 0..k {
                let c = h * k + j;
                let g = dec.g[n - 1][c];
                min_g = min_g.min(g);
                if g < -tol * scale {
                    failures.push(DecompositionFailure {
                        kind: "consumption negativity",
                        step: n,
                        history: tree.history(n - 1, h),
                        atom: Some(j),
                        density: None,
                        value: g,
                    });
                }
                next[c] = consumed[h] + g;
                let f = surface.value(n, c);
                let res = (dec.m[n][c] - next[c] - f).abs();
                max_rec = max_rec.max(res);
                if res > tol * f.abs().max(1.0) {
                    failures.push(DecompositionFailure {
                        kind: "reconstruction",
                        step: n,
                        history: tree.history(n - 1, h),
                        atom: Some(j),
                        density: None,
                        value: res,
                    });
                }
            }
            for (q, dens) in densities.iter().enumerate() {
                let mut e = 0.0;
                for j in 0..k {
                    let c = h * k + j;
                    e += model.steps[n - 1].shocks[j].prob * dens.psi(n, c) * dec.m[n][c];
                }
                let mp = dec.m[n - 1][h];
                let res = (e - mp).abs() / mp.abs().max(1.0);
                max_mart = max_mart.max(res);
                if res > tol {
                    failures.push(DecompositionFailure {
                        kind: "martingale residual",
                        step: n,
                        history: tree.history(n - 1, h),
                        atom: None,
                        density: Some(q),
                        value: res,
                    });
                }
            }
        }
        consumed = next;
    }
    let m0 = (dec.m[0][0] - surface.value(0, 0)).abs();
    if m0 > tol * surface.value(0, 0).abs().max(1.0) {
        failures.push(DecompositionFailure {
            kind: "reconstruction",
            step: 0,
            history: Vec::new(),
            atom: None,
            density: None,
            value: m0,
        });
    }
    Ok(DecompositionReport {
        tol,
        passed: failures.is_empty(),
        scope: format!(
            "martingale property checked against {} supplied densities, not the whole family",
            densities.len()
        ),
        densities_checked: densities.len(),
        min_g,
        max_reconstruction_residual: max_rec,
        max_martingale_residual: max_mart,
        failures,
    })
}

/// Every spot measure of the model as a density, in lexicographic selection
/// order, up to `cap` selections.
pub fn all_spot_densities(model: &EvolutionModel, tree: &ScenarioTree, cap: u64) -> Result<Vec<MeasureDensity>> {
    let per_step: Vec<Vec<(usize, usize)>> = model
        .steps
        .iter()
        .map(|s| {
            s.strict_down_atoms()
                .into_iter()
                .flat_map(|d| s.up_atoms().into_iter().map(move |u| (d, u)))
                .collect()
        })
        .collect();
    let mut count: u128 = 1;
    for p in &per_step {
        count = count.saturating_mul(p.len() as u128);
    }
    if count > cap as u128 {
        return Err(Error::CapExceeded { what: "spot measure", count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    for k in 0..count as usize {
        let mut rem = k;
        let mut pairs = vec![(0, 0); per_step.len()];
        for i in (0..per_step.len()).rev() {
            pairs[i] = per_step[i][rem % per_step[i].len()];
            rem /= per_step[i].len();
        }
        out.push(spot_density(model, tree, &AtomPairSelection::new(pairs))?);
    }
    Ok(out)
}
