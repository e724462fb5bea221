//! Simple returns and binomial moment estimation.
//!
//! A series of returns is modelled as i.i.d. two-point draws: `u·Δ` with
//! probability `p` and `d·Δ` otherwise. Matching mean and variance gives
//!
//! ```text
//! μ   = p·u + (1-p)·d
//! ν_Δ = sqrt(p(1-p))·(u - d)
//! ```
//!
//! where `ν_Δ = σ/√Δ`, so the per-step standard deviation is `ν_Δ·Δ = σ√Δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::ObservationSeries;

/// One business day, in years.
pub const DEFAULT_DELTA: f64 = 1.0 / 252.0;

/// Per-step mean/std, upturn probability and step size of a return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialMoments {
    pub mean_per_step: f64,
    pub std_per_step: f64,
    pub p_up: f64,
    pub delta: f64,
    pub n_obs: usize,
}

impl BinomialMoments {
    pub fn new(
        mean_per_step: f64,
        std_per_step: f64,
        p_up: f64,
        delta: f64,
        n_obs: usize,
    ) -> Result<Self> {
        if !mean_per_step.is_finite() {
            return Err(Error::InvalidValue {
                what: "mean_per_step".into(),
                value: mean_per_step,
            });
        }
        if !(std_per_step.is_finite() && std_per_step >= 0.0) {
            return Err(Error::InvalidValue {
                what: "std_per_step".into(),
                value: std_per_step,
            });
        }
        if !(0.0..=1.0).contains(&p_up) {
            return Err(Error::InvalidValue {
                what: "p_up".into(),
                value: p_up,
            });
        }
        check_delta(delta)?;
        if n_obs == 0 {
            return Err(Error::InsufficientData {
                needed: 1,
                found: 0,
            });
        }
        Ok(Self {
            mean_per_step,
            std_per_step,
            p_up,
            delta,
            n_obs,
        })
    }

    /// Instantaneous (annualized) mean return `μ`.
    pub fn mu(&self) -> f64 {
        self.mean_per_step / self.delta
    }

    /// Instantaneous volatility `σ`, per square-root year.
    pub fn sigma(&self) -> f64 {
        self.std_per_step / self.delta.sqrt()
    }

    /// `ν_Δ = σ/√Δ`; the per-step standard deviation equals `ν_Δ·Δ`.
    pub fn nu_delta(&self) -> f64 {
        self.std_per_step / self.delta
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidValue {
            what: "delta".into(),
            value: delta,
        })
    }
}

/// Annualized up and down return rates of the two-point step distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpDownFactors {
    pub u: f64,
    pub d: f64,
}

/// `r_i = (v_{i+1} - v_i) / v_i` for consecutive observations.
pub fn simple_returns(series: &ObservationSeries) -> Result<Vec<f64>> {
    let entries = series.entries();
    if entries.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: entries.len(),
        });
    }
    entries
        .windows(2)
        .map(|w| {
            let ((date, prev), (_, next)) = (w[0], w[1]);
            if prev == 0.0 {
                Err(Error::DivisionByZero {
                    date: date.to_string(),
                })
            } else {
                Ok((next - prev) / prev)
            }
        })
        .collect()
}

/// Sample moments of `returns`. A return counts as "up" only when strictly
/// positive; flat days are down moves.
pub fn estimate_moments(returns: &[f64], delta: f64) -> Result<BinomialMoments> {
    check_delta(delta)?;
    let n = returns.len();
    if n == 0 {
        return Err(Error::InsufficientData {
            needed: 1,
            found: 0,
        });
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss: f64 = returns.iter().map(|r| (r - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let ups = returns.iter().filter(|&&r| r > 0.0).count();
    BinomialMoments::new(mean, std, ups as f64 / n as f64, delta, n)
}

/// Solves the two moment equations for `(u, d)`:
/// `u = μ + sqrt((1-p)/p)·ν_Δ`, `d = μ - sqrt(p/(1-p))·ν_Δ`.
pub fn solve_up_down(moments: &BinomialMoments) -> Result<UpDownFactors> {
    let mu = moments.mu();
    if moments.std_per_step == 0.0 {
        return Ok(UpDownFactors { u: mu, d: mu });
    }
    let p = moments.p_up;
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::DegenerateProbability { p });
    }
    let nu = moments.nu_delta();
    Ok(UpDownFactors {
        u: mu + ((1.0 - p) / p).sqrt() * nu,
        d: mu - (p / (1.0 - p)).sqrt() * nu,
    })
}
