use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EvolutionModel;

/// A functional of a realized path.
///
/// `atoms` holds the per-step atom indices (or [`FREE_ATOM`] for shock values
/// that are not model atoms) and `prices` holds `S_0..S_N`.
pub trait PathFunctional: Sync {
    fn value(&self, atoms: &[usize], prices: &[f64]) -> f64;

    /// Whether the value depends on atom identities rather than prices only.
    fn needs_atoms(&self) -> bool {
        false
    }

    /// For functionals convex in the path, the value on the constant path
    /// `S_0 = ... = S_N = s0`, which is the infimum over martingale measures.
    fn convex_endpoint(&self, _s0: f64, _horizon: usize) -> Option<f64> {
        None
    }
}

/// Marker for a shock value chosen outside the model's atom set.
pub const FREE_ATOM: usize = usize::MAX;

impl<F> PathFunctional for F
where
    F: Fn(&[usize], &[f64]) -> f64 + Sync,
{
    fn value(&self, atoms: &[usize], prices: &[f64]) -> f64 {
        self(atoms, prices)
    }
}

/// Value of a path table entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathValue {
    pub path: Vec<usize>,
    pub value: f64,
}

/// Contingent claims supported by the pricing routines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    /// Call on the arithmetic mean of `S_0..S_N`.
    AsianCall { strike: f64 },
    /// Put on the arithmetic mean of `S_0..S_N`.
    AsianPut { strike: f64 },
    /// Piecewise-linear function of `S_N` through `knots` (strictly
    /// increasing `x`); flat left of the first knot, extended with the last
    /// segment's slope to the right of the last knot.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    /// Arbitrary value per full path; entries sorted by path.
    PathTable { entries: Vec<PathValue> },
}

fn mean(prices: &[f64]) -> f64 {
    prices.iter().sum::<f64>() / prices.len() as f64
}

impl Payoff {
    pub fn call(strike: f64) -> Self {
        Payoff::Call { strike }
    }

    pub fn put(strike: f64) -> Self {
        Payoff::Put { strike }
    }

    pub fn asian_call(strike: f64) -> Self {
        Payoff::AsianCall { strike }
    }

    pub fn asian_put(strike: f64) -> Self {
        Payoff::AsianPut { strike }
    }

    /// Build from a kind name as used on the command line.
    pub fn from_name(name: &str, strike: f64) -> Result<Self> {
        let p = match name {
            "call" => Payoff::call(strike),
            "put" => Payoff::put(strike),
            "asian_call" => Payoff::asian_call(strike),
            "asian_put" => Payoff::asian_put(strike),
            other => return Err(Error::InvalidArgument(format!("unknown payoff kind '{other}'"))),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn piecewise_linear(knots: Vec<[f64; 2]>) -> Result<Self> {
        let p = Payoff::PiecewiseLinear { knots };
        p.validate()?;
        Ok(p)
    }

    pub fn path_table(mut entries: Vec<PathValue>) -> Result<Self> {
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let p = Payoff::PathTable { entries };
        p.validate()?;
        Ok(p)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payoff::Call { .. } => "call",
            Payoff::Put { .. } => "put",
            Payoff::AsianCall { .. } => "asian_call",
            Payoff::AsianPut { .. } => "asian_put",
            Payoff::PiecewiseLinear { .. } => "piecewise_linear",
            Payoff::PathTable { .. } => "path_table",
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match *self {
            Payoff::Call { strike }
            | Payoff::Put { strike }
            | Payoff::AsianCall { strike }
            | Payoff::AsianPut { strike } => Some(strike),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Payoff::Call { strike }
            | Payoff::Put { strike }
            | Payoff::AsianCall { strike }
            | Payoff::AsianPut { strike } => {
                if !(*strike > 0.0 && strike.is_finite()) {
                    return Err(Error::InvalidArgument(format!("strike must be positive, got {strike}")));
                }
            }
            Payoff::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidArgument("piecewise-linear payoff needs at least one knot".into()));
                }
                if knots.iter().any(|k| !k[0].is_finite() || !k[1].is_finite()) {
                    return Err(Error::InvalidArgument("piecewise-linear knots must be finite".into()));
                }
                if knots[0][0] < 0.0 {
                    return Err(Error::InvalidArgument("piecewise-linear knots must start at x >= 0".into()));
                }
                if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::InvalidArgument("piecewise-linear knots must be strictly increasing in x".into()));
                }
                if knots.iter().any(|k| k[1] < 0.0) {
                    return Err(Error::InvalidArgument("piecewise-linear values must be nonnegative".into()));
                }
                if self.tail_slope() < 0.0 {
                    return Err(Error::InvalidArgument("piecewise-linear tail slope must be nonnegative".into()));
                }
            }
            Payoff::PathTable { entries } => {
                if entries.windows(2).any(|w| w[0].path >= w[1].path) {
                    return Err(Error::InvalidArgument("path table entries must be unique and sorted".into()));
                }
                if entries.iter().any(|e| !e.value.is_finite()) {
                    return Err(Error::InvalidArgument("path table values must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Check a path table covers every full path of the model.
    pub fn validate_for(&self, model: &EvolutionModel) -> Result<()> {
        self.validate()?;
        if let Payoff::PathTable { entries } = self {
            let count = model.path_count(crate::model::DEFAULT_CAP)?;
            if entries.len() as u64 != count {
                return Err(Error::InvalidArgument(format!(
                    "path table has {} entries, model has {count} paths",
                    entries.len()
                )));
            }
            for e in entries {
                let idx = crate::model::PathIndex(e.path.clone());
                if idx.len() != model.horizon() {
                    return Err(Error::InvalidArgument(format!("path table entry {:?} has wrong length", e.path)));
                }
                idx.validate(model)?;
            }
        }
        Ok(())
    }

    fn tail_slope(&self) -> f64 {
        match self {
            Payoff::PiecewiseLinear { knots } if knots.len() >= 2 => {
                let a = knots[knots.len() - 2];
                let b = knots[knots.len() - 1];
                (b[1] - a[1]) / (b[0] - a[0])
            }
            _ => 0.0,
        }
    }

    /// Slopes of the linear pieces from left to right, including the flat
    /// piece left of the first knot when it starts above zero.
    fn slopes(&self) -> Vec<f64> {
        match self {
            Payoff::PiecewiseLinear { knots } => {
                let mut s = Vec::new();
                if knots[0][0] > 0.0 {
                    s.push(0.0);
                }
                for w in knots.windows(2) {
                    s.push((w[1][1] - w[0][1]) / (w[1][0] - w[0][0]));
                }
                s
            }
            _ => Vec::new(),
        }
    }

    /// Depends on `S_N` alone.
    pub fn terminal_only(&self) -> bool {
        matches!(self, Payoff::Call { .. } | Payoff::Put { .. } | Payoff::PiecewiseLinear { .. })
    }

    /// Value as a function of the terminal price, for terminal-only kinds.
    pub fn terminal(&self, x: f64) -> Option<f64> {
        match self {
            Payoff::Call { strike } => Some((x - strike).max(0.0)),
            Payoff::Put { strike } => Some((strike - x).max(0.0)),
            Payoff::PiecewiseLinear { knots } => Some(eval_knots(knots, x, self.tail_slope())),
            _ => None,
        }
    }

    /// Convex in the path (Asian kinds are convex functions of the path mean).
    pub fn is_convex(&self) -> bool {
        match self {
            Payoff::Call { .. } | Payoff::Put { .. } | Payoff::AsianCall { .. } | Payoff::AsianPut { .. } => true,
            Payoff::PiecewiseLinear { .. } => self.slopes().windows(2).all(|w| w[1] >= w[0]),
            Payoff::PathTable { .. } => false,
        }
    }

    /// Value on the constant path `S_0 = ... = S_N = s0`.
    pub fn constant_path_value(&self, s0: f64, horizon: usize) -> Result<f64> {
        if let Payoff::PathTable { .. } = self {
            return Err(Error::Unsupported("path table payoff has no price-only value".into()));
        }
        let prices = vec![s0; horizon + 1];
        Ok(self.value(&[], &prices))
    }
}

fn eval_knots(knots: &[[f64; 2]], x: f64, tail_slope: f64) -> f64 {
    let first = knots[0];
    if x <= first[0] {
        return first[1];
    }
    for w in knots.windows(2) {
        if x <= w[1][0] {
            let t = (x - w[0][0]) / (w[1][0] - w[0][0]);
            return w[0][1] + t * (w[1][1] - w[0][1]);
        }
    }
    let last = knots[knots.len() - 1];
    last[1] + tail_slope * (x - last[0])
}

impl PathFunctional for Payoff {
    fn value(&self, atoms: &[usize], prices: &[f64]) -> f64 {
        let last = *prices.last().expect("price path is never empty");
        match self {
            Payoff::Call { strike } => (last - strike).max(0.0),
            Payoff::Put { strike } => (strike - last).max(0.0),
            Payoff::AsianCall { strike } => (mean(prices) - strike).max(0.0),
            Payoff::AsianPut { strike } => (strike - mean(prices)).max(0.0),
            Payoff::PiecewiseLinear { knots } => eval_knots(knots, last, self.tail_slope()),
            Payoff::PathTable { entries } => match entries.binary_search_by(|e| e.path.as_slice().cmp(atoms)) {
                Ok(i) => entries[i].value,
                Err(_) => f64::NAN,
            },
        }
    }

    fn needs_atoms(&self) -> bool {
        matches!(self, Payoff::PathTable { .. })
    }

    fn convex_endpoint(&self, s0: f64, horizon: usize) -> Option<f64> {
        if self.is_convex() {
            self.constant_path_value(s0, horizon).ok()
        } else {
            None
        }
    }
}
