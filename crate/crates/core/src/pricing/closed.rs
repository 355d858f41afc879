//! Closed-form super-hedge prices, price bounds and non-arbitrage intervals
//! for models with constant exposure coefficients.

use serde::Serialize;

use super::payoff::Payoff;
use crate::error::{Error, Result};

const PREMISE_TOL: f64 = 1e-12;

fn check_inputs(s0: f64, a_list: &[f64]) -> Result<()> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidArgument(format!("s0 must be positive, got {s0}")));
    }
    if let Some((i, a)) = a_list.iter().enumerate().find(|(_, a)| !(**a >= 0.0 && **a <= 1.0)) {
        return Err(Error::InvalidArgument(format!("a out of [0,1] at step {}: {a}", i + 1)));
    }
    Ok(())
}

fn check_strike(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("strike must be positive, got {k}")));
    }
    Ok(())
}

/// `prod (1 - a_i)` from left to right; exactly zero once some `a_i = 1`.
pub fn survival_product(a_list: &[f64]) -> f64 {
    let mut p = 1.0;
    for &a in a_list {
        if a == 1.0 {
            return 0.0;
        }
        p *= 1.0 - a;
    }
    p
}

/// `s0 * sum_{i=0}^{N} prod_{s<=i} (1 - a_s) / (N + 1)`, the mean of the
/// lowest reachable price path.
pub fn min_mean(s0: f64, a_list: &[f64]) -> f64 {
    let mut p = 1.0;
    let mut sum = 1.0;
    for &a in a_list {
        p = if a == 1.0 { 0.0 } else { p * (1.0 - a) };
        sum += p;
    }
    s0 * sum / (a_list.len() + 1) as f64
}

pub fn closed_form_call(s0: f64, a_list: &[f64], k: f64) -> Result<f64> {
    check_inputs(s0, a_list)?;
    check_strike(k)?;
    let p = survival_product(a_list);
    Ok(if s0 * p >= k { (s0 - k).max(0.0) } else { s0 * (1.0 - p) })
}

pub fn closed_form_put(s0: f64, a_list: &[f64], k: f64) -> Result<f64> {
    check_inputs(s0, a_list)?;
    check_strike(k)?;
    Ok((k - s0 * survival_product(a_list)).max(0.0))
}

pub fn closed_form_asian_put(s0: f64, a_list: &[f64], k: f64) -> Result<f64> {
    check_inputs(s0, a_list)?;
    check_strike(k)?;
    Ok((k - min_mean(s0, a_list)).max(0.0))
}

pub fn closed_form_asian_call(s0: f64, a_list: &[f64], k: f64) -> Result<f64> {
    check_inputs(s0, a_list)?;
    check_strike(k)?;
    let m = min_mean(s0, a_list);
    Ok(if m >= k { (s0 - k).max(0.0) } else { s0 - m })
}

/// Closed form for any of the four vanilla kinds.
pub fn closed_form(payoff: &Payoff, s0: f64, a_list: &[f64]) -> Result<f64> {
    match *payoff {
        Payoff::Call { strike } => closed_form_call(s0, a_list, strike),
        Payoff::Put { strike } => closed_form_put(s0, a_list, strike),
        Payoff::AsianCall { strike } => closed_form_asian_call(s0, a_list, strike),
        Payoff::AsianPut { strike } => closed_form_asian_put(s0, a_list, strike),
        _ => Err(Error::Unsupported(format!("no closed form for {} payoffs", payoff.name()))),
    }
}

/// A range of prices with the origin of each endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceInterval {
    pub lower: f64,
    pub upper: f64,
    pub attained_lower: bool,
    pub attained_upper: bool,
    pub provenance_lower: String,
    pub provenance_upper: String,
}

impl PriceInterval {
    fn point(v: f64, why: &str) -> Self {
        Self {
            lower: v,
            upper: v,
            attained_lower: true,
            attained_upper: true,
            provenance_lower: why.into(),
            provenance_upper: why.into(),
        }
    }

    fn open(lower: f64, upper: f64, why_lower: &str, why_upper: &str) -> Self {
        if lower == upper {
            return Self::point(lower, why_upper);
        }
        Self {
            lower,
            upper,
            attained_lower: false,
            attained_upper: false,
            provenance_lower: why_lower.into(),
            provenance_upper: why_upper.into(),
        }
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn terminal_of(payoff: &Payoff, what: &str) -> Result<()> {
    if !payoff.terminal_only() {
        return Err(Error::Precondition(format!("{what} bounds need a payoff of S_N alone")));
    }
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PREMISE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Bounds on the super-hedge price of `f(S_N)` with `f(0) = 0` and
/// `f(x) <= slope * x`.
pub fn payoff_bounds_sublinear(s0: f64, a_list: &[f64], slope: f64, payoff: &Payoff) -> Result<PriceInterval> {
    check_inputs(s0, a_list)?;
    payoff.validate()?;
    terminal_of(payoff, "sublinear")?;
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(Error::InvalidArgument(format!("slope must be positive, got {slope}")));
    }
    let f = |x: f64| payoff.terminal(x).expect("terminal payoff");
    if f(0.0) != 0.0 {
        return Err(Error::Precondition(format!("sublinear bound needs f(0) = 0, got {}", f(0.0))));
    }
    let dominated = match payoff {
        Payoff::Call { .. } => slope >= 1.0,
        Payoff::PiecewiseLinear { knots } => {
            let tail = knots.windows(2).last().map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).unwrap_or(0.0);
            knots.iter().all(|k| k[1] <= slope * k[0] || close(k[1], slope * k[0])) && tail <= slope
        }
        _ => false,
    };
    if !dominated {
        return Err(Error::Precondition(format!("payoff is not bounded by {slope} * x")));
    }
    let p = survival_product(a_list);
    let lower = f(s0 * p) + slope * s0 * (1.0 - p);
    let upper = slope * s0;
    Ok(PriceInterval {
        lower,
        upper,
        attained_lower: lower == upper,
        attained_upper: lower == upper,
        provenance_lower: "sublinear payoff lower bound f(s0 P) + slope s0 (1 - P)".into(),
        provenance_upper: "sublinear payoff upper bound slope s0".into(),
    })
}

/// Bounds on the super-hedge price of `f(S_N)` with `f(0) = cap` and
/// `f <= cap`.
pub fn payoff_bounds_bounded(s0: f64, a_list: &[f64], cap: f64, payoff: &Payoff) -> Result<PriceInterval> {
    check_inputs(s0, a_list)?;
    payoff.validate()?;
    terminal_of(payoff, "bounded")?;
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidArgument(format!("cap must be positive, got {cap}")));
    }
    let f = |x: f64| payoff.terminal(x).expect("terminal payoff");
    if !close(f(0.0), cap) {
        return Err(Error::Precondition(format!("bounded payoff needs f(0) = cap, got {}", f(0.0))));
    }
    let dominated = match payoff {
        Payoff::Put { strike } => close(*strike, cap),
        Payoff::PiecewiseLinear { knots } => {
            let tail = knots.windows(2).last().map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).unwrap_or(0.0);
            knots.iter().all(|k| k[1] <= cap || close(k[1], cap)) && tail <= 0.0
        }
        _ => false,
    };
    if !dominated {
        return Err(Error::Precondition(format!("payoff exceeds cap {cap}")));
    }
    let p = survival_product(a_list);
    let lower = if p == 0.0 { cap } else { f(s0 * p) };
    Ok(PriceInterval {
        lower,
        upper: cap,
        attained_lower: lower == cap,
        attained_upper: lower == cap,
        provenance_lower: "bounded payoff lower bound f(s0 P)".into(),
        provenance_upper: "bounded payoff upper bound cap".into(),
    })
}

/// Interval of non-arbitrage prices for the four vanilla kinds.
pub fn non_arbitrage_interval(s0: f64, a_list: &[f64], payoff: &Payoff) -> Result<PriceInterval> {
    check_inputs(s0, a_list)?;
    payoff.validate()?;
    let p = survival_product(a_list);
    let iv = match *payoff {
        Payoff::Call { strike: k } => {
            if s0 * p >= k {
                PriceInterval::point((s0 - k).max(0.0), "call: s0 P >= K, single price (s0 - K)^+")
            } else {
                PriceInterval::open((s0 - k).max(0.0), s0 * (1.0 - p), "call: Jensen endpoint (s0 - K)^+", "call: s0 (1 - P)")
            }
        }
        Payoff::Put { strike: k } => {
            PriceInterval::open((k - s0).max(0.0), (k - s0 * p).max(0.0), "put: Jensen endpoint (K - s0)^+", "put: (K - s0 P)^+")
        }
        Payoff::AsianPut { strike: k } => {
            let m = min_mean(s0, a_list);
            if k > m {
                PriceInterval::open((k - s0).max(0.0), k - m, "asian put: Jensen endpoint (K - s0)^+", "asian put: K - mean")
            } else {
                PriceInterval::point(0.0, "asian put: K <= mean, single price 0")
            }
        }
        Payoff::AsianCall { strike: k } => {
            let m = min_mean(s0, a_list);
            if m >= k {
                PriceInterval::point((s0 - k).max(0.0), "asian call: mean >= K, single price (s0 - K)^+")
            } else {
                PriceInterval::open((s0 - k).max(0.0), s0 - m, "asian call: Jensen endpoint (s0 - K)^+", "asian call: s0 - mean")
            }
        }
        _ => return Err(Error::Unsupported(format!("no interval for {} payoffs", payoff.name()))),
    };
    Ok(iv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const A: [f64; 2] = [0.5, 0.5];

    #[test]
    fn call_values() {
        assert_eq!(closed_form_call(100.0, &A, 30.0).unwrap(), 75.0);
        assert_eq!(closed_form_call(100.0, &A, 20.0).unwrap(), 80.0);
        assert_eq!(closed_form_call(100.0, &[0.3, 1.0, 0.2], 5.0).unwrap(), 100.0);
        assert!(closed_form_call(100.0, &[1.2], 5.0).is_err());
        assert!(closed_form_call(0.0, &A, 5.0).is_err());
        assert!(closed_form_call(100.0, &A, -1.0).is_err());
    }

    #[test]
    fn put_values() {
        assert_eq!(closed_form_put(100.0, &A, 50.0).unwrap(), 25.0);
        assert_eq!(closed_form_put(100.0, &A, 20.0).unwrap(), 0.0);
        assert_eq!(closed_form_put(100.0, &[0.4, 1.0], 70.0).unwrap(), 70.0);
    }

    #[test]
    fn asian_values() {
        assert_abs_diff_eq!(min_mean(100.0, &A), 175.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(closed_form_asian_put(100.0, &A, 60.0).unwrap(), 5.0 / 3.0, epsilon = 1e-12);
        assert_eq!(closed_form_asian_put(100.0, &A, 50.0).unwrap(), 0.0);
        assert_eq!(closed_form_asian_call(100.0, &A, 30.0).unwrap(), 70.0);
        assert_abs_diff_eq!(closed_form_asian_call(100.0, &A, 70.0).unwrap(), 125.0 / 3.0, epsilon = 1e-12);
        assert_eq!(closed_form_asian_call(100.0, &A, 1e-9).unwrap(), 100.0 - 1e-9);
        assert_abs_diff_eq!(closed_form_asian_put(100.0, &[1e-12, 1e-12], 120.0).unwrap(), 20.0, epsilon = 1e-8);
    }

    #[test]
    fn asian_parity_on_active_branch() {
        for k in [60.0, 70.0, 90.0, 130.0] {
            let c = closed_form_asian_call(100.0, &A, k).unwrap();
            let p = closed_form_asian_put(100.0, &A, k).unwrap();
            assert_abs_diff_eq!(c - p, 100.0 - k, epsilon = 1e-12);
        }
    }

    #[test]
    fn sublinear_bounds() {
        for k in [20.0, 30.0, 90.0] {
            let b = payoff_bounds_sublinear(100.0, &A, 1.0, &Payoff::call(k)).unwrap();
            assert_eq!(b.lower, closed_form_call(100.0, &A, k).unwrap());
            assert_eq!(b.upper, 100.0);
        }
        let b = payoff_bounds_sublinear(100.0, &[0.5, 1.0], 1.0, &Payoff::call(10.0)).unwrap();
        assert_eq!((b.lower, b.upper), (100.0, 100.0));
        let id = Payoff::piecewise_linear(vec![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let b = payoff_bounds_sublinear(100.0, &A, 1.0, &id).unwrap();
        assert_eq!((b.lower, b.upper), (100.0, 100.0));
        assert!(payoff_bounds_sublinear(100.0, &A, 1.0, &Payoff::put(10.0)).is_err());
        assert!(payoff_bounds_sublinear(100.0, &A, 0.5, &Payoff::call(10.0)).is_err());
        assert!(payoff_bounds_sublinear(100.0, &A, 1.0, &Payoff::asian_call(10.0)).is_err());
    }

    #[test]
    fn bounded_bounds() {
        let b = payoff_bounds_bounded(100.0, &A, 50.0, &Payoff::put(50.0)).unwrap();
        assert_eq!(b.lower, closed_form_put(100.0, &A, 50.0).unwrap());
        assert_eq!(b.upper, 50.0);
        let b = payoff_bounds_bounded(100.0, &[1.0, 0.5], 50.0, &Payoff::put(50.0)).unwrap();
        assert_eq!((b.lower, b.upper), (50.0, 50.0));
        let flat = Payoff::piecewise_linear(vec![[0.0, 7.0]]).unwrap();
        let b = payoff_bounds_bounded(100.0, &A, 7.0, &flat).unwrap();
        assert_eq!((b.lower, b.upper), (7.0, 7.0));
        assert!(payoff_bounds_bounded(100.0, &A, 40.0, &Payoff::put(50.0)).is_err());
        assert!(payoff_bounds_bounded(100.0, &A, 40.0, &Payoff::call(50.0)).is_err());
    }

    #[test]
    fn intervals() {
        let iv = non_arbitrage_interval(100.0, &A, &Payoff::call(20.0)).unwrap();
        assert!(iv.is_point() && iv.lower == 80.0 && iv.attained_lower);
        let iv = non_arbitrage_interval(100.0, &A, &Payoff::put(50.0)).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 25.0));
        assert!(!iv.attained_upper);
        let iv = non_arbitrage_interval(100.0, &A, &Payoff::asian_put(50.0)).unwrap();
        assert!(iv.is_point() && iv.lower == 0.0);
        let iv = non_arbitrage_interval(100.0, &A, &Payoff::call(30.0)).unwrap();
        assert_eq!((iv.lower, iv.upper), (70.0, 75.0));
        let iv = non_arbitrage_interval(100.0, &A, &Payoff::asian_call(70.0)).unwrap();
        assert_eq!(iv.lower, 30.0);
        assert_abs_diff_eq!(iv.upper, 125.0 / 3.0, epsilon = 1e-12);
        assert!(non_arbitrage_interval(100.0, &A, &Payoff::piecewise_linear(vec![[0.0, 1.0]]).unwrap()).is_err());
    }
}
