//! Searches over spot measures for the super-hedge price.

use serde::{Deserialize, Serialize};

use super::payoff::PathFunctional;
use crate::error::{Error, Result};
use crate::measures::{pair_tree_expectation, AtomPairSelection, Branch, PairChoice};
use crate::model::{EvolutionModel, DEFAULT_CAP};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Every selection of model atoms.
    DiscreteExhaustive,
    /// Every selection from model atoms plus a uniform grid on `eps_range`.
    Grid,
    /// One step at a time over the grid candidates, from the extremes.
    CoordinateAscent,
}

impl SearchMode {
    pub fn name(self) -> &'static str {
        match self {
            SearchMode::DiscreteExhaustive => "discrete_exhaustive",
            SearchMode::Grid => "grid",
            SearchMode::CoordinateAscent => "coordinate_ascent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub eps_range: [f64; 2],
    pub grid_points: usize,
    pub tol: f64,
    pub max_rounds: usize,
    /// Bound on the number of selections evaluated by exhaustive modes.
    pub cap: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mode: SearchMode::DiscreteExhaustive,
            eps_range: [-12.0, 12.0],
            grid_points: 49,
            tol: 1e-12,
            max_rounds: 100,
            cap: DEFAULT_CAP,
        }
    }
}

impl SearchConfig {
    pub fn with_mode(mode: SearchMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.eps_range;
        if !(lo < 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps_range must satisfy lo < 0 < hi, got [{lo}, {hi}]")));
        }
        if self.grid_points < 3 {
            return Err(Error::InvalidArgument(format!("grid_points must be at least 3, got {}", self.grid_points)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// Uniform grid on `eps_range`, zero excluded.
    pub fn grid(&self) -> Vec<f64> {
        let [lo, hi] = self.eps_range;
        let k = self.grid_points - 1;
        (0..=k)
            .map(|i| if i == k { hi } else { lo + (hi - lo) * i as f64 / k as f64 })
            .filter(|&e| e != 0.0)
            .collect()
    }
}

/// Best selection found by a search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub value: f64,
    /// Empty when the value is exact without a search.
    pub choices: Vec<PairChoice>,
    pub evaluated: u64,
    /// Bound on the distance to the unrestricted supremum for grid modes.
    pub gap_bound: Option<f64>,
    pub provenance: String,
}

impl SearchOutcome {
    /// The selection as model atom indices, when every shock is an atom.
    pub fn atom_selection(&self) -> Option<AtomPairSelection> {
        if self.choices.is_empty() {
            return None;
        }
        self.choices
            .iter()
            .map(|c| {
                (c.down.atom != crate::pricing::FREE_ATOM && c.up.atom != crate::pricing::FREE_ATOM)
                    .then_some((c.down.atom, c.up.atom))
            })
            .collect::<Option<Vec<_>>>()
            .map(AtomPairSelection::new)
    }
}

/// Pair candidates per step, in tie-break preference order.
fn candidates(model: &EvolutionModel, config: &SearchConfig) -> Result<Vec<Vec<PairChoice>>> {
    let grid = match config.mode {
        SearchMode::DiscreteExhaustive => Vec::new(),
        _ => config.grid(),
    };
    let mut out = Vec::with_capacity(model.horizon());
    for (i, step) in model.steps.iter().enumerate() {
        let mut values: Vec<Branch> = step.shocks.iter().enumerate().map(|(j, a)| Branch { eps: a.eps, atom: j }).collect();
        for &e in &grid {
            if !values.iter().any(|b| b.eps == e) {
                values.push(Branch::free(e));
            }
        }
        values.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        let downs: Vec<Branch> = values.iter().copied().filter(|b| b.eps < 0.0).collect();
        let ups: Vec<Branch> = values.iter().copied().filter(|b| b.eps > 0.0).collect();
        if downs.is_empty() || ups.is_empty() {
            return Err(Error::NoFeasibleSelection(format!(
                "step {} needs a strictly negative and a positive shock",
                i + 1
            )));
        }
        let mut pairs: Vec<PairChoice> = if config.mode == SearchMode::DiscreteExhaustive {
            // atom order, down index major
            let mut d: Vec<Branch> = downs.clone();
            let mut u: Vec<Branch> = ups.clone();
            d.sort_by_key(|b| b.atom);
            u.sort_by_key(|b| b.atom);
            d.iter().flat_map(|&down| u.iter().map(move |&up| PairChoice { down, up })).collect()
        } else {
            downs.iter().flat_map(|&down| ups.iter().map(move |&up| PairChoice { down, up })).collect()
        };
        if config.mode == SearchMode::CoordinateAscent {
            pairs.sort_by(|a, b| (b.down.eps.abs() + b.up.eps.abs()).total_cmp(&(a.down.eps.abs() + a.up.eps.abs())));
        }
        out.push(pairs);
    }
    Ok(out)
}

fn gap_bound(model: &EvolutionModel, config: &SearchConfig) -> f64 {
    let s = model.sigma_floor();
    let [lo, hi] = config.eps_range;
    model.s0 * model.horizon() as f64 * ((-s * hi).exp() + (s * lo).exp())
}

fn prepare(model: &EvolutionModel, payoff: &dyn PathFunctional, config: &SearchConfig) -> Result<Vec<Vec<PairChoice>>> {
    config.validate()?;
    model.require_atoms()?;
    model.check()?;
    if payoff.needs_atoms() && config.mode != SearchMode::DiscreteExhaustive {
        return Err(Error::Unsupported("payoffs defined on atoms need discrete_exhaustive search".into()));
    }
    candidates(model, config)
}

fn exhaustive(
    model: &EvolutionModel,
    payoff: &dyn PathFunctional,
    cands: &[Vec<PairChoice>],
    cap: u64,
    maximize: bool,
) -> Result<(f64, Vec<PairChoice>, u64)> {
    let mut count: u128 = 1;
    for c in cands {
        count = count.saturating_mul(c.len() as u128);
    }
    if count > cap as u128 {
        return Err(Error::CapExceeded { what: "pair selection", count, cap });
    }
    let decode = |mut k: usize| {
        let mut idx = vec![0; cands.len()];
        for i in (0..cands.len()).rev() {
            idx[i] = k % cands[i].len();
            k /= cands[i].len();
        }
        idx.iter().enumerate().map(|(i, &j)| cands[i][j]).collect::<Vec<_>>()
    };
    let best = par::best_index(
        count as usize,
        |k| pair_tree_expectation(model, &decode(k), payoff, DEFAULT_CAP),
        |a, b| if maximize { a > b } else { a < b },
    )?;
    let (k, v) = best.expect("at least one selection");
    Ok((v, decode(k), count as u64))
}

fn ascent(
    model: &EvolutionModel,
    payoff: &dyn PathFunctional,
    cands: &[Vec<PairChoice>],
    config: &SearchConfig,
    maximize: bool,
) -> Result<(f64, Vec<PairChoice>, u64)> {
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut cur: Vec<PairChoice> = cands.iter().map(|c| c[0]).collect();
    let mut value = pair_tree_expectation(model, &cur, payoff, DEFAULT_CAP)?;
    let mut evaluated = 1u64;
    for _ in 0..config.max_rounds {
        let start = value;
        for n in 0..cands.len() {
            let best = par::best_index(
                cands[n].len(),
                |j| {
                    let mut trial = cur.clone();
                    trial[n] = cands[n][j];
                    pair_tree_expectation(model, &trial, payoff, DEFAULT_CAP)
                },
                better,
            )?;
            evaluated += cands[n].len() as u64;
            if let Some((j, v)) = best {
                if better(v, value) {
                    cur[n] = cands[n][j];
                    value = v;
                }
            }
        }
        if (value - start).abs() < config.tol {
            break;
        }
    }
    Ok((value, cur, evaluated))
}

fn run(model: &EvolutionModel, payoff: &dyn PathFunctional, config: &SearchConfig, maximize: bool) -> Result<SearchOutcome> {
    let cands = prepare(model, payoff, config)?;
    let (value, choices, evaluated) = match config.mode {
        SearchMode::DiscreteExhaustive | SearchMode::Grid => exhaustive(model, payoff, &cands, config.cap, maximize)?,
        SearchMode::CoordinateAscent => ascent(model, payoff, &cands, config, maximize)?,
    };
    let gap = (config.mode != SearchMode::DiscreteExhaustive).then(|| gap_bound(model, config));
    let what = if maximize { "max" } else { "min" };
    let provenance = match config.mode {
        SearchMode::DiscreteExhaustive => format!("{what} over all {evaluated} atom pair selections"),
        SearchMode::Grid => format!(
            "{what} over {evaluated} selections on eps grid [{}, {}] with {} points",
            config.eps_range[0], config.eps_range[1], config.grid_points
        ),
        SearchMode::CoordinateAscent => format!(
            "coordinate ascent {what} on eps grid [{}, {}] with {} points",
            config.eps_range[0], config.eps_range[1], config.grid_points
        ),
    };
    Ok(SearchOutcome { value, choices, evaluated, gap_bound: gap, provenance })
}

/// Super-hedge price as the largest spot-measure expectation in the search
/// set, with the selection attaining it.
pub fn superhedge_sup(model: &EvolutionModel, payoff: &dyn PathFunctional, config: &SearchConfig) -> Result<SearchOutcome> {
    run(model, payoff, config, true)
}

/// Lower end of the price range: exact for convex payoffs, otherwise the
/// smallest spot-measure expectation found, which can only overestimate the
/// infimum.
pub fn superhedge_inf(model: &EvolutionModel, payoff: &dyn PathFunctional, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    model.check()?;
    if let Some(v) = payoff.convex_endpoint(model.s0, model.horizon()) {
        return Ok(SearchOutcome {
            value: v,
            choices: Vec::new(),
            evaluated: 0,
            gap_bound: None,
            provenance: "convex payoff: value on the constant path S_0 (exact inf)".into(),
        });
    }
    let mut out = run(model, payoff, config, false)?;
    out.provenance = format!("upper estimate of inf: {}", out.provenance);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{three_atom, two_point};
    use crate::model::{ShockAtom, StepSpec, VolatilitySpec};
    use crate::pricing::closed::closed_form_call;
    use crate::pricing::Payoff;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn single_selection_call() {
        let m = two_point(100.0, &[1.0], 1.0, LN_2);
        let r = superhedge_sup(&m, &Payoff::call(90.0), &SearchConfig::default()).unwrap();
        assert_abs_diff_eq!(r.value, 110.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.atom_selection().unwrap().pairs, vec![(0, 1)]);
        assert_eq!(r.evaluated, 1);
    }

    #[test]
    fn constant_payoff_every_mode() {
        let m = three_atom(100.0, 2);
        let c = |_: &[usize], _: &[f64]| 2.5;
        for mode in [SearchMode::DiscreteExhaustive, SearchMode::Grid, SearchMode::CoordinateAscent] {
            let cfg = SearchConfig { grid_points: 9, ..SearchConfig::with_mode(mode) };
            assert_abs_diff_eq!(superhedge_sup(&m, &c, &cfg).unwrap().value, 2.5, epsilon = 1e-12);
            assert_abs_diff_eq!(superhedge_inf(&m, &c, &cfg).unwrap().value, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_approaches_call_closed_form() {
        let m = two_point(100.0, &[0.5, 0.5], 1.0, 0.5);
        let cfg = SearchConfig::with_mode(SearchMode::Grid);
        let r = superhedge_sup(&m, &Payoff::call(30.0), &cfg).unwrap();
        assert!(r.value <= 75.0);
        assert!(75.0 - r.value <= 1e-3 * 100.0, "{}", r.value);
        assert!(r.gap_bound.unwrap() < 1e-2);
    }

    #[test]
    fn ascent_matches_grid_for_call() {
        let m = two_point(100.0, &[0.3, 0.6, 0.2], 1.0, 0.5);
        let k = 60.0;
        let cf = closed_form_call(100.0, &m.a_list(), k).unwrap();
        let cfg = SearchConfig::with_mode(SearchMode::CoordinateAscent);
        let r = superhedge_sup(&m, &Payoff::call(k), &cfg).unwrap();
        assert!(r.value <= cf && cf - r.value <= 1e-3 * 100.0, "{} vs {cf}", r.value);
    }

    #[test]
    fn widening_range_is_monotone() {
        let m = three_atom(100.0, 2);
        let p = Payoff::asian_call(90.0);
        let narrow = SearchConfig { eps_range: [-3.0, 3.0], grid_points: 7, ..SearchConfig::with_mode(SearchMode::Grid) };
        let wide = SearchConfig { eps_range: [-6.0, 6.0], grid_points: 13, ..narrow.clone() };
        let a = superhedge_sup(&m, &p, &narrow).unwrap().value;
        let b = superhedge_sup(&m, &p, &wide).unwrap().value;
        let d = superhedge_sup(&m, &p, &SearchConfig::default()).unwrap().value;
        assert!(d <= a && a <= b);
    }

    #[test]
    fn convex_inf_is_constant_path() {
        let m = three_atom(100.0, 2);
        let cfg = SearchConfig::default();
        assert_eq!(superhedge_inf(&m, &Payoff::call(90.0), &cfg).unwrap().value, 10.0);
        assert_eq!(superhedge_inf(&m, &Payoff::put(90.0), &cfg).unwrap().value, 0.0);
        assert_eq!(superhedge_inf(&m, &Payoff::put(120.0), &cfg).unwrap().value, 20.0);
        let concave = Payoff::piecewise_linear(vec![[0.0, 0.0], [100.0, 10.0], [200.0, 12.0]]).unwrap();
        let r = superhedge_inf(&m, &concave, &cfg).unwrap();
        assert!(r.provenance.starts_with("upper estimate of inf"));
        assert!(r.value <= 10.0 + 1e-9);
    }

    #[test]
    fn cap_and_feasibility() {
        let m = three_atom(100.0, 2);
        let cfg = SearchConfig { cap: 3, ..SearchConfig::default() };
        assert!(superhedge_sup(&m, &Payoff::call(90.0), &cfg).unwrap_err().is_budget());
        let mut bad = three_atom(100.0, 1);
        bad.steps[0] = StepSpec {
            a: 0.5,
            vol: VolatilitySpec::Constant { sigma: 1.0 },
            shocks: vec![ShockAtom::new(0.0, 0.5), ShockAtom::new(1.0, 0.5)],
        };
        assert!(superhedge_sup(&bad, &Payoff::call(90.0), &SearchConfig::default()).is_err());
        let bad_cfg = SearchConfig { eps_range: [1.0, 2.0], ..SearchConfig::default() };
        assert!(superhedge_sup(&m, &Payoff::call(90.0), &bad_cfg).is_err());
    }

    #[test]
    fn grid_excludes_zero() {
        let g = SearchConfig::default().grid();
        assert_eq!(g.len(), 48);
        assert_eq!(g[0], -12.0);
        assert_eq!(*g.last().unwrap(), 12.0);
        assert!(!g.contains(&0.0));
    }
}
