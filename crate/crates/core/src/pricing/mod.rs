//! Super-hedge prices: closed forms, searches over spot measures, price
//! bounds and non-arbitrage intervals.

mod closed;
mod payoff;
mod search;

pub use closed::{
    closed_form, closed_form_asian_call, closed_form_asian_put, closed_form_call, closed_form_put, min_mean,
    non_arbitrage_interval, payoff_bounds_bounded, payoff_bounds_sublinear, survival_product, PriceInterval,
};
pub use payoff::{PathFunctional, PathValue, Payoff, FREE_ATOM};
pub use search::{superhedge_inf, superhedge_sup, SearchConfig, SearchMode, SearchOutcome};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::PairChoice;
use crate::model::EvolutionModel;

/// Lower and upper end of a reported range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

/// One step of a reported argmax selection. Atom indices are absent for
/// shock values taken from the search grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedPair {
    pub down_eps: f64,
    pub up_eps: f64,
    pub down_atom: Option<usize>,
    pub up_atom: Option<usize>,
}

impl From<&PairChoice> for SelectedPair {
    fn from(c: &PairChoice) -> Self {
        let atom = |a: usize| (a != FREE_ATOM).then_some(a);
        Self { down_eps: c.down.eps, up_eps: c.up.eps, down_atom: atom(c.down.atom), up_atom: atom(c.up.atom) }
    }
}

/// Machine-readable price result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceReport {
    pub payoff: String,
    pub strike: Option<f64>,
    pub method: String,
    pub value: f64,
    pub interval: Option<Bounds>,
    pub argmax_selection: Option<Vec<SelectedPair>>,
    pub provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_bound: Option<f64>,
}

/// How `price` computes its value.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceMethod {
    ClosedForm,
    Search(SearchConfig),
}

fn constant_a(model: &EvolutionModel) -> Result<Vec<f64>> {
    let a = model.a_list();
    if a.is_empty() {
        return Err(Error::InvalidModel("model has no steps".into()));
    }
    Ok(a)
}

/// Price `payoff` and attach the non-arbitrage interval when one is known.
pub fn price(model: &EvolutionModel, payoff: &Payoff, method: &PriceMethod) -> Result<PriceReport> {
    payoff.validate()?;
    let a = constant_a(model)?;
    let interval = non_arbitrage_interval(model.s0, &a, payoff)
        .ok()
        .map(|iv| Bounds { lower: iv.lower, upper: iv.upper });
    match method {
        PriceMethod::ClosedForm => {
            let value = closed_form(payoff, model.s0, &a)?;
            let provenance = match *payoff {
                Payoff::Call { strike } if model.s0 * survival_product(&a) >= strike => "closed form call, branch s0 P >= K",
                Payoff::Call { .. } => "closed form call, branch s0 P < K",
                Payoff::Put { .. } => "closed form put",
                Payoff::AsianPut { .. } => "closed form asian put",
                Payoff::AsianCall { strike } if min_mean(model.s0, &a) >= strike => {
                    "closed form asian call, branch mean >= K"
                }
                _ => "closed form asian call, branch mean < K",
            };
            Ok(PriceReport {
                payoff: payoff.name().into(),
                strike: payoff.strike(),
                method: "closed".into(),
                value,
                interval,
                argmax_selection: None,
                provenance: provenance.into(),
                gap_bound: None,
            })
        }
        PriceMethod::Search(cfg) => {
            payoff.validate_for(model)?;
            let out = superhedge_sup(model, payoff, cfg)?;
            Ok(PriceReport {
                payoff: payoff.name().into(),
                strike: payoff.strike(),
                method: cfg.mode.name().into(),
                value: out.value,
                interval,
                argmax_selection: Some(out.choices.iter().map(SelectedPair::from).collect()),
                provenance: out.provenance,
                gap_bound: out.gap_bound,
            })
        }
    }
}

/// Non-arbitrage interval report for the four vanilla kinds.
pub fn interval_report(model: &EvolutionModel, payoff: &Payoff) -> Result<(PriceInterval, PriceReport)> {
    let a = constant_a(model)?;
    let iv = non_arbitrage_interval(model.s0, &a, payoff)?;
    let report = PriceReport {
        payoff: payoff.name().into(),
        strike: payoff.strike(),
        method: "interval".into(),
        value: iv.upper,
        interval: Some(Bounds { lower: iv.lower, upper: iv.upper }),
        argmax_selection: None,
        provenance: if iv.provenance_lower == iv.provenance_upper {
            iv.provenance_upper.clone()
        } else {
            format!("lower: {}; upper: {}", iv.provenance_lower, iv.provenance_upper)
        },
        gap_bound: None,
    };
    Ok((iv, report))
}
