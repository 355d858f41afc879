//! Estimating exposure coefficients from one observed price path.
//!
//! With order statistics `S_(0) <= ... <= S_(N)` of `S_0..S_N` and a
//! nonincreasing chain `1 >= g_1 >= ... >= g_N > 0`, the estimates solve
//!
//! ```text
//! s0 * prod_{s<=i} (1 - a_s) = tau0 * S_(0) * g_i,   i = 1..N
//! ```

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EvolutionModel, StepSpec, VolatilitySpec};
use crate::pricing::{closed_form, non_arbitrage_interval, Payoff, PriceInterval};

/// Observed prices `S_0..S_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSample {
    pub s0: f64,
    pub obs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct Row {
    t: usize,
    price: f64,
}

impl PriceSample {
    pub fn new(s0: f64, obs: Vec<f64>) -> Result<Self> {
        let s = Self { s0, obs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs.is_empty() {
            return Err(Error::InvalidArgument("price sample needs at least one observation after t = 0".into()));
        }
        for (t, &p) in std::iter::once(&self.s0).chain(&self.obs).enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidArgument(format!("price at t = {t} must be positive, got {p}")));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.obs.len()
    }

    /// Read CSV with header `t,price` and rows `t = 0..N` in order.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "price"] {
            return Err(Error::InvalidArgument(format!("price file header must be 't,price', got '{}'", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut prices = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.t != i {
                return Err(Error::InvalidArgument(format!("price file row {} has t = {}, expected {i}", i + 1, row.t)));
            }
            prices.push(row.price);
        }
        if prices.is_empty() {
            return Err(Error::InvalidArgument("price file has no rows".into()));
        }
        let s0 = prices.remove(0);
        Self::new(s0, prices)
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }
}

/// Stable ascending sort of `S_0..S_N`.
pub fn order_statistics(sample: &PriceSample) -> Result<Vec<f64>> {
    sample.validate()?;
    let mut v: Vec<f64> = std::iter::once(sample.s0).chain(sample.obs.iter().copied()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticKind {
    ConstantOne,
    /// `g_i = g(S_(N-i) / S_(N))` with `g(x) = (S_0 / S_(0)) x` below
    /// `S_(0) / S_0` and `1` above.
    CappedRatio,
    /// `g_j = S_(N-j) / S_(N)` for `j >= N - k`, `1` otherwise.
    IdentityTail { k: usize },
    Custom { table: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSpec {
    #[serde(flatten)]
    pub kind: StatisticKind,
    pub tau0: f64,
}

impl StatisticSpec {
    pub fn new(kind: StatisticKind, tau0: f64) -> Result<Self> {
        if !(tau0 > 0.0 && tau0 <= 1.0) {
            return Err(Error::InvalidArgument(format!("tau0 must be in (0,1], got {tau0}")));
        }
        Ok(Self { kind, tau0 })
    }

    pub fn constant_one() -> Self {
        Self { kind: StatisticKind::ConstantOne, tau0: 1.0 }
    }
}

/// `g_1..g_N`, validated as a nonincreasing chain in `(0, 1]`.
pub fn statistic_values(spec: &StatisticSpec, s0: f64, order_stats: &[f64]) -> Result<Vec<f64>> {
    if order_stats.len() < 2 {
        return Err(Error::InvalidArgument("need at least two order statistics".into()));
    }
    let n = order_stats.len() - 1;
    let top = order_stats[n];
    let low = order_stats[0];
    let g: Vec<f64> = match &spec.kind {
        StatisticKind::ConstantOne => vec![1.0; n],
        StatisticKind::CappedRatio => {
            let cap = low / s0;
            (1..=n)
                .map(|i| {
                    let x = order_stats[n - i] / top;
                    if x <= cap {
                        // <= 1 exactly; the clamp only removes rounding
                        ((s0 / low) * x).min(1.0)
                    } else {
                        1.0
                    }
                })
                .collect()
        }
        StatisticKind::IdentityTail { k } => {
            (1..=n).map(|j| if j + k >= n { order_stats[n - j] / top } else { 1.0 }).collect()
        }
        StatisticKind::Custom { table } => {
            if table.len() != n {
                return Err(Error::InvalidArgument(format!("statistic table has {} values, sample has N = {n}", table.len())));
            }
            table.clone()
        }
    };
    if let Some(i) = g.iter().position(|v| !(*v > 0.0 && *v <= 1.0)) {
        return Err(Error::InvalidArgument(format!("statistic value g_{} = {} not in (0,1]", i + 1, g[i])));
    }
    if let Some(i) = g.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(format!(
            "statistic chain not monotone: g_{} = {} < g_{} = {}",
            i + 1,
            g[i],
            i + 2,
            g[i + 1]
        )));
    }
    Ok(g)
}

/// Estimated exposures with the data they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedParams {
    pub s0: f64,
    pub a: Vec<f64>,
    pub statistic: StatisticSpec,
    pub order_stats: Vec<f64>,
    pub g: Vec<f64>,
}

impl EstimatedParams {
    /// Pricing-only model carrying the estimates.
    pub fn to_model(&self) -> EvolutionModel {
        EvolutionModel {
            s0: self.s0,
            steps: self
                .a
                .iter()
                .map(|&a| StepSpec { a, vol: VolatilitySpec::Constant { sigma: 1.0 }, shocks: Vec::new() })
                .collect(),
            pricing_only: true,
        }
    }

    /// `tau0 * S_(0)`.
    pub fn scale(&self) -> f64 {
        self.statistic.tau0 * self.order_stats[0]
    }

    /// Relative gap in `s0 prod (1 - a_i) = tau0 S_(0) g_N`.
    pub fn identity_residual(&self) -> f64 {
        let lhs = self.s0 * self.a.iter().fold(1.0, |p, a| p * (1.0 - a));
        let rhs = self.scale() * self.g[self.g.len() - 1];
        (lhs - rhs).abs() / rhs.abs()
    }
}

/// `a_1 = 1 - tau0 (S_(0) / s0) g_1`, `a_i = 1 - g_i / g_{i-1}`.
pub fn estimate_a(sample: &PriceSample, spec: &StatisticSpec) -> Result<EstimatedParams> {
    let spec = StatisticSpec::new(spec.kind.clone(), spec.tau0)?;
    let os = order_statistics(sample)?;
    let g = statistic_values(&spec, sample.s0, &os)?;
    let mut a = Vec::with_capacity(g.len());
    let a1 = 1.0 - spec.tau0 * (os[0] / sample.s0) * g[0];
    if a1 < 0.0 {
        return Err(Error::Precondition(format!("estimated a_1 = {a1} is negative: tau0 S_(0) g_1 exceeds s0")));
    }
    a.push(a1);
    for w in g.windows(2) {
        a.push(1.0 - w[1] / w[0]);
    }
    Ok(EstimatedParams { s0: sample.s0, a, statistic: spec, order_stats: os, g })
}

/// Price under estimated exposures, by composition with the closed forms and
/// directly from the order statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedPrice {
    pub value: f64,
    pub direct: f64,
    pub interval: PriceInterval,
}

/// Price straight from `T = tau0 S_(0)` and the statistic chain.
pub fn direct_price(params: &EstimatedParams, payoff: &Payoff) -> Result<f64> {
    let s0 = params.s0;
    let t = params.scale();
    let gn = params.g[params.g.len() - 1];
    let n = params.g.len() as f64;
    let mean = (s0 + t * params.g.iter().sum::<f64>()) / (n + 1.0);
    Ok(match *payoff {
        Payoff::Call { strike: k } => {
            if t * gn >= k {
                (s0 - k).max(0.0)
            } else {
                s0 - t * gn
            }
        }
        Payoff::Put { strike: k } => (k - t * gn).max(0.0),
        Payoff::AsianPut { strike: k } => (k - mean).max(0.0),
        Payoff::AsianCall { strike: k } => {
            if mean >= k {
                (s0 - k).max(0.0)
            } else {
                s0 - mean
            }
        }
        _ => return Err(Error::Unsupported(format!("no estimated price for {} payoffs", payoff.name()))),
    })
}

pub fn estimated_price(sample: &PriceSample, spec: &StatisticSpec, payoff: &Payoff) -> Result<EstimatedPrice> {
    payoff.validate()?;
    let params = estimate_a(sample, spec)?;
    Ok(EstimatedPrice {
        value: closed_form(payoff, params.s0, &params.a)?,
        direct: direct_price(&params, payoff)?,
        interval: non_arbitrage_interval(params.s0, &params.a, payoff)?,
    })
}

/// Estimation report written next to the estimated model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub s0: f64,
    pub horizon: usize,
    pub order_statistics: Vec<f64>,
    pub statistic: StatisticSpec,
    pub g: Vec<f64>,
    pub a: Vec<f64>,
    pub survival_product: f64,
    pub identity_residual: f64,
}

impl From<&EstimatedParams> for EstimationReport {
    fn from(p: &EstimatedParams) -> Self {
        Self {
            s0: p.s0,
            horizon: p.a.len(),
            order_statistics: p.order_stats.clone(),
            statistic: p.statistic.clone(),
            g: p.g.clone(),
            a: p.a.clone(),
            survival_product: crate::pricing::survival_product(&p.a),
            identity_residual: p.identity_residual(),
        }
    }
}
