//! Zero-coupon bond pricing on the rate lattice.
//!
//! Backward induction from `B(N, ·) = 1`:
//!
//! ```text
//! B(n, k) = [p̃·B(n+1, k+1) + (1-p̃)·B(n+1, k)] / (1 + R(n, k)·Δ)
//! ```
//!
//! with the equity-linked risk-neutral upturn probability
//! `p̃ = p - θ·sqrt(p(1-p)Δ)`, `θ = (μ - r)/σ`.

use serde::{Deserialize, Serialize};

use crate::bdt::{NodeRates, RateLattice};
use crate::error::{Error, Result};
use crate::estimation::check_delta;
use crate::marketdata::YieldCurve;

/// Distance from 0 and 1 used when clamping an out-of-range `p̃`.
pub const CLAMP_EPS: f64 = 1e-12;

/// Instantaneous equity-market drift, volatility and natural upturn probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityParams {
    pub mu: f64,
    pub sigma: f64,
    pub p: f64,
}

impl EquityParams {
    pub fn new(mu: f64, sigma: f64, p: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidValue {
                what: "mu".into(),
                value: mu,
            });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidValue {
                what: "sigma".into(),
                value: sigma,
            });
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DegenerateProbability { p });
        }
        Ok(Self { mu, sigma, p })
    }

    /// Market price of risk `(μ - rate)/σ`.
    pub fn theta(&self, rate: f64) -> f64 {
        (self.mu - rate) / self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutOfRangePolicy {
    #[default]
    Error,
    Clamp,
}

/// Which riskless rate enters `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaRate {
    /// The short rate of the node being priced.
    #[default]
    Node,
    /// A single rate for every node.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PricingPolicy {
    pub ptilde_out_of_range: OutOfRangePolicy,
    pub theta_rate_source: ThetaRate,
}

impl PricingPolicy {
    pub fn new(out_of_range: OutOfRangePolicy, theta_rate: ThetaRate) -> Result<Self> {
        if let ThetaRate::Fixed(r) = theta_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidValue {
                    what: "fixed theta rate".into(),
                    value: r,
                });
            }
        }
        Ok(Self {
            ptilde_out_of_range: out_of_range,
            theta_rate_source: theta_rate,
        })
    }

    fn theta_rate(&self, node_rate: f64) -> f64 {
        match self.theta_rate_source {
            ThetaRate::Node => node_rate,
            ThetaRate::Fixed(r) => r,
        }
    }
}

/// `p - θ·sqrt(p(1-p)Δ)` without any range handling.
#[inline]
pub fn ptilde_unchecked(p: f64, theta: f64, delta: f64) -> f64 {
    p - theta * (p * (1.0 - p) * delta).sqrt()
}

/// Applies the out-of-range policy; the flag reports whether clamping happened.
#[inline]
fn admit(
    value: f64,
    policy: OutOfRangePolicy,
    node: Option<(usize, usize)>,
) -> Result<(f64, bool)> {
    if (0.0..=1.0).contains(&value) {
        return Ok((value, false));
    }
    match policy {
        OutOfRangePolicy::Error => Err(Error::ProbabilityRange { value, node }),
        OutOfRangePolicy::Clamp if value < 0.0 => Ok((CLAMP_EPS, true)),
        OutOfRangePolicy::Clamp if value > 1.0 => Ok((1.0 - CLAMP_EPS, true)),
        // NaN
        OutOfRangePolicy::Clamp => Err(Error::ProbabilityRange { value, node }),
    }
}

/// Risk-neutral upturn probability for one step at short rate `rate`.
pub fn risk_neutral_prob(
    equity: &EquityParams,
    rate: f64,
    delta: f64,
    policy: &PricingPolicy,
) -> Result<f64> {
    check_delta(delta)?;
    let theta = equity.theta(policy.theta_rate(rate));
    admit(
        ptilde_unchecked(equity.p, theta, delta),
        policy.ptilde_out_of_range,
        None,
    )
    .map(|(v, _)| v)
}

/// Price plus the number of nodes whose `p̃` had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceOutcome {
    pub price: f64,
    pub clamped_nodes: u64,
}

fn check_maturity(lattice: &RateLattice, steps: usize) -> Result<()> {
    if steps == 0 || steps > lattice.n_steps {
        return Err(Error::InvalidArgument(format!(
            "maturity of {steps} steps outside 1..={}",
            lattice.n_steps
        )));
    }
    Ok(())
}

/// Backward induction over a single rolling buffer of `steps + 1` values.
/// `prob(n, k, rate)` supplies the up-move probability at each node.
#[inline]
fn induct<F>(lattice: &RateLattice, steps: usize, mut prob: F) -> Result<f64>
where
    F: FnMut(usize, usize, f64) -> Result<f64>,
{
    let delta = lattice.delta();
    let rates = NodeRates::new(&lattice.calibration, steps);
    let mut values = vec![1.0f64; steps + 1];
    for n in (0..steps).rev() {
        let slice = rates.slice(n);
        for k in 0..=n {
            let rate = slice.rate(k);
            let q = prob(n, k, rate)?;
            values[k] = (q * values[k + 1] + (1.0 - q) * values[k]) / (1.0 + rate * delta);
        }
    }
    Ok(values[0])
}

/// Prices a zero-coupon bond maturing after `steps` lattice steps, with `p̃`
/// evaluated node by node from the equity parameters.
pub fn price_zcb(
    lattice: &RateLattice,
    equity: &EquityParams,
    steps: usize,
    policy: &PricingPolicy,
) -> Result<PriceOutcome> {
    check_maturity(lattice, steps)?;
    let delta = lattice.delta();
    let spread = (equity.p * (1.0 - equity.p) * delta).sqrt();
    let mut clamped = 0u64;

    if let ThetaRate::Fixed(r) = policy.theta_rate_source {
        let raw = equity.p - equity.theta(r) * spread;
        let (q, was_clamped) = admit(raw, policy.ptilde_out_of_range, Some((0, 0)))?;
        if was_clamped {
            clamped = (steps as u64) * (steps as u64 + 1) / 2;
        }
        let price = induct(lattice, steps, |_, _, _| Ok(q))?;
        return Ok(PriceOutcome {
            price,
            clamped_nodes: clamped,
        });
    }

    let price = induct(lattice, steps, |n, k, rate| {
        let raw = equity.p - (equity.mu - rate) / equity.sigma * spread;
        let (q, was_clamped) = admit(raw, policy.ptilde_out_of_range, Some((n, k)))?;
        clamped += u64::from(was_clamped);
        Ok(q)
    })?;
    Ok(PriceOutcome {
        price,
        clamped_nodes: clamped,
    })
}

const CHUNK: usize = 8;

/// Constant-probability induction. Same recurrence as [`induct`], processed
/// in fixed-size chunks: each chunk reads `values[k..k + CHUNK + 1]` before
/// writing `values[k..k + CHUNK]`, so the in-place update is unchanged.
fn induct_const(lattice: &RateLattice, steps: usize, q: f64) -> f64 {
    let rates = NodeRates::new(&lattice.calibration, steps);
    let Some(up_pow) = rates.up_powers() else {
        return induct(lattice, steps, |_, _, _| Ok(q)).expect("constant probability");
    };
    let delta = lattice.delta();
    let up_delta: Vec<f64> = up_pow.iter().map(|u| u * delta).collect();
    let (q_up, q_down) = (q, 1.0 - q);
    let mut values = vec![1.0f64; steps + 1];
    for n in (0..steps).rev() {
        let base = rates.slice(n).base();
        let width = n + 1;
        let mut k = 0;
        while k + CHUNK <= width {
            let mut window = [0.0f64; CHUNK + 1];
            window.copy_from_slice(&values[k..k + CHUNK + 1]);
            let growth = &up_delta[k..k + CHUNK];
            let mut out = [0.0f64; CHUNK];
            for j in 0..CHUNK {
                out[j] = (q_up * window[j + 1] + q_down * window[j]) / (1.0 + base * growth[j]);
            }
            values[k..k + CHUNK].copy_from_slice(&out);
            k += CHUNK;
        }
        for k in k..width {
            values[k] = (q_up * values[k + 1] + q_down * values[k]) / (1.0 + base * up_delta[k]);
        }
    }
    values[0]
}

/// Prices with one `p̃` at every node.
pub fn price_zcb_const(lattice: &RateLattice, ptilde: f64, steps: usize) -> Result<f64> {
    check_maturity(lattice, steps)?;
    if !(0.0..=1.0).contains(&ptilde) {
        return Err(Error::ProbabilityRange {
            value: ptilde,
            node: None,
        });
    }
    Ok(induct_const(lattice, steps, ptilde))
}

/// Largest maturity the path-enumeration oracle accepts.
pub const ORACLE_MAX_STEPS: usize = 20;

/// Reference price by enumerating all `2^steps` paths: the sum of path
/// probability times the product of per-step discounts along the path.
/// Exponential cost; intended for verification only.
pub fn price_zcb_oracle<F>(lattice: &RateLattice, ptilde_fn: F, steps: usize) -> Result<f64>
where
    F: Fn(usize, usize) -> f64,
{
    if steps > ORACLE_MAX_STEPS {
        return Err(Error::OracleSize(steps));
    }
    check_maturity(lattice, steps)?;
    let delta = lattice.delta();
    let mut total = 0.0;
    for path in 0u32..(1u32 << steps) {
        let (mut weight, mut discount, mut ups) = (1.0f64, 1.0f64, 0usize);
        for n in 0..steps {
            let q = ptilde_fn(n, ups);
            discount /= 1.0 + lattice.rate_at(n, ups)? * delta;
            if path >> n & 1 == 1 {
                weight *= q;
                ups += 1;
            } else {
                weight *= 1.0 - q;
            }
        }
        total += weight * discount;
    }
    Ok(total)
}

/// Market zero-coupon price `exp(-(T - t)·Y)` from a quoted yield curve.
pub fn market_zcb_price(curve: &YieldCurve, t: f64, maturity: f64) -> Result<f64> {
    if !(t >= 0.0 && maturity > t) {
        return Err(Error::InvalidArgument(format!(
            "need maturity > t >= 0, got t={t}, T={maturity}"
        )));
    }
    let tau = maturity - t;
    Ok((-tau * curve.yield_at(tau)?).exp())
}
