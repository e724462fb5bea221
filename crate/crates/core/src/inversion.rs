//! Implied equity parameters from zero-coupon bond prices.
//!
//! For each maturity the constant risk-neutral probability `p̃` that makes
//! the lattice price equal the market price is found by bisection. `p̃` is
//! then mapped back through `p̃ = p - θ·sqrt(p(1-p)Δ)` to whichever of
//! `μ`, `σ` or `p` is left free, holding the other two at baseline values.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bdt::{BdtCalibration, RateLattice};
use crate::bondpricer::{market_zcb_price, price_zcb_const, ptilde_unchecked, EquityParams};
use crate::error::{Error, Result};
use crate::estimation::check_delta;
use crate::marketdata::YieldCurve;

pub const MAX_BISECTION_ITERATIONS: u32 = 200;

/// Bracket width on `p̃` below which bisection may stop once the price
/// residual is within tolerance.
pub const PTILDE_WIDTH: f64 = 1e-12;

/// Residual above which a quadratic root is rejected in [`implied_p`].
pub const ROOT_RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PtildeSolution {
    pub ptilde: f64,
    pub iterations: u32,
    /// Lattice price at `ptilde` minus the target.
    pub residual: f64,
}

/// Finds `p̃ ∈ [0, 1]` with `|price_zcb_const(p̃) - target| <= tol`.
pub fn solve_ptilde(
    lattice: &RateLattice,
    target: f64,
    steps: usize,
    tol: f64,
) -> Result<PtildeSolution> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidValue {
            what: "tol".into(),
            value: tol,
        });
    }
    let at_zero = price_zcb_const(lattice, 0.0, steps)?;
    let at_one = price_zcb_const(lattice, 1.0, steps)?;
    if lattice.calibration.c2 == 1.0 || at_zero == at_one {
        return Err(Error::NonIdentifiable);
    }
    let (low, high) = (at_zero.min(at_one), at_zero.max(at_one));
    if !(low..=high).contains(&target) {
        return Err(Error::UnattainablePrice { target, low, high });
    }
    for (edge, price) in [(0.0, at_zero), (1.0, at_one)] {
        if price == target {
            return Ok(PtildeSolution {
                ptilde: edge,
                iterations: 0,
                residual: 0.0,
            });
        }
    }

    let decreasing = at_one < at_zero;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = if (at_zero - target).abs() <= (at_one - target).abs() {
        PtildeSolution {
            ptilde: 0.0,
            iterations: 0,
            residual: at_zero - target,
        }
    } else {
        PtildeSolution {
            ptilde: 1.0,
            iterations: 0,
            residual: at_one - target,
        }
    };

    let mut iterations = 0;
    while iterations < MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let residual = price_zcb_const(lattice, mid, steps)? - target;
        if residual.abs() < best.residual.abs() || residual == 0.0 {
            best = PtildeSolution {
                ptilde: mid,
                iterations,
                residual,
            };
        }
        if residual == 0.0 {
            break;
        }
        // price above target: move toward the side that lowers the price
        if (residual > 0.0) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= PTILDE_WIDTH && best.residual.abs() <= tol {
            break;
        }
    }
    best.iterations = iterations;
    if best.residual.abs() > tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: best.residual,
        });
    }
    Ok(best)
}

fn check_open_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateProbability { p })
    }
}

/// Drift implied by `p̃` with `p` and `σ` held fixed:
/// `μ = σ(p - p̃)/sqrt(p(1-p)Δ) + rate`.
pub fn implied_mu(ptilde: f64, p: f64, sigma: f64, rate: f64, delta: f64) -> Result<f64> {
    check_open_probability(p)?;
    check_delta(delta)?;
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidValue {
            what: "sigma".into(),
            value: sigma,
        });
    }
    Ok(sigma * (p - ptilde) / (p * (1.0 - p) * delta).sqrt() + rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpliedSigma {
    pub value: f64,
    /// False when the value is not strictly positive, i.e. `μ - rate` and
    /// `p - p̃` disagree in sign.
    pub valid: bool,
}

/// Volatility implied by `p̃` with `p` and `μ` held fixed:
/// `σ = (μ - rate)·sqrt(p(1-p)Δ)/(p - p̃)`.
pub fn implied_sigma(ptilde: f64, p: f64, mu: f64, rate: f64, delta: f64) -> Result<ImpliedSigma> {
    check_open_probability(p)?;
    check_delta(delta)?;
    if p == ptilde {
        return Err(Error::IndeterminateSigma);
    }
    let value = (mu - rate) * (p * (1.0 - p) * delta).sqrt() / (p - ptilde);
    Ok(ImpliedSigma {
        value,
        valid: value > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RootBranch {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpliedProbability {
    pub p: f64,
    pub branch: RootBranch,
    pub minus_root: f64,
    pub plus_root: f64,
    /// Whether the plus root also lies strictly inside (0, 1).
    pub plus_in_unit_interval: bool,
    /// `p - θ·sqrt(p(1-p)Δ) - p̃` at the returned root.
    pub residual: f64,
}

/// `p - θ·sqrt(p(1-p)Δ) - p̃`, or infinity outside [0, 1].
pub fn ptilde_residual(p: f64, ptilde: f64, theta: f64, delta: f64) -> f64 {
    if (0.0..=1.0).contains(&p) {
        ptilde_unchecked(p, theta, delta) - ptilde
    } else {
        f64::INFINITY
    }
}

/// Natural upturn probability implied by `p̃` and `θ`. Both roots of
///
/// ```text
/// (1 + Δθ²)p² - (2p̃ + Δθ²)p + p̃² = 0
/// ```
///
/// are computed. The minus root is preferred; the plus root is used only when
/// the minus root does not reproduce `p̃`.
pub fn implied_p(ptilde: f64, theta: f64, delta: f64) -> Result<ImpliedProbability> {
    if !(0.0..=1.0).contains(&ptilde) {
        return Err(Error::ProbabilityRange {
            value: ptilde,
            node: None,
        });
    }
    check_delta(delta)?;
    let a = delta * theta * theta;
    let mut disc = a * (a + 4.0 * ptilde * (1.0 - ptilde));
    if disc < 0.0 {
        if disc > -1e-15 {
            disc = 0.0;
        } else {
            return Err(Error::NumericDomain(disc));
        }
    }
    let s = disc.sqrt();
    let plus_root = (2.0 * ptilde + a + s) / (2.0 * (1.0 + a));
    // product of roots is p̃²/(1 + a); avoids cancellation when p̃ is small
    let minus_root = if plus_root > 0.0 {
        ptilde * ptilde / ((1.0 + a) * plus_root)
    } else {
        (2.0 * ptilde + a - s) / (2.0 * (1.0 + a))
    };

    let plus_in_unit_interval = plus_root > 0.0 && plus_root < 1.0;
    let minus_res = ptilde_residual(minus_root, ptilde, theta, delta);
    let plus_res = ptilde_residual(plus_root, ptilde, theta, delta);
    let (p, branch, residual) = if minus_res.abs() <= ROOT_RESIDUAL_LIMIT {
        (minus_root, RootBranch::Minus, minus_res)
    } else if plus_res.abs() <= ROOT_RESIDUAL_LIMIT {
        (plus_root, RootBranch::Plus, plus_res)
    } else {
        return Err(Error::WrongBranch {
            minus: minus_root,
            plus: plus_root,
        });
    };
    Ok(ImpliedProbability {
        p,
        branch,
        minus_root,
        plus_root,
        plus_in_unit_interval,
        residual,
    })
}

/// Per-point conditions recorded during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    MarketPriceError,
    UnattainablePrice,
    NonIdentifiable,
    NoConvergence,
    SolverError,
    MuError,
    SigmaIndeterminate,
    SigmaNonPositive,
    SigmaError,
    PError,
    PlusRootInUnit,
    PlusBranch,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::MarketPriceError => "market_price_error",
            PointFlag::UnattainablePrice => "unattainable_price",
            PointFlag::NonIdentifiable => "non_identifiable",
            PointFlag::NoConvergence => "no_convergence",
            PointFlag::SolverError => "solver_error",
            PointFlag::MuError => "mu_error",
            PointFlag::SigmaIndeterminate => "sigma_indeterminate",
            PointFlag::SigmaNonPositive => "sigma_non_positive",
            PointFlag::SigmaError => "sigma_error",
            PointFlag::PError => "p_error",
            PointFlag::PlusRootInUnit => "plus_root_in_unit",
            PointFlag::PlusBranch => "plus_branch",
        }
    }
}

impl fmt::Display for PointFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub iterations: u32,
    pub residual: Option<f64>,
    pub flags: Vec<PointFlag>,
    /// Messages of errors swallowed while processing the point.
    pub errors: Vec<String>,
}

/// Implied parameters at one maturity. Fields are `None` when the step that
/// produces them failed; the reason is in `diagnostics`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpliedPoint {
    pub maturity: f64,
    pub n_steps: usize,
    pub market_price: Option<f64>,
    pub ptilde: Option<f64>,
    pub implied_mu: Option<f64>,
    pub implied_sigma: Option<f64>,
    pub implied_p: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// `max(1, round(T/Δ))`.
pub fn maturity_steps(maturity: f64, delta: f64) -> usize {
    ((maturity / delta).round() as usize).max(1)
}

fn imply_point(
    lattice: &RateLattice,
    curve: &YieldCurve,
    baseline: &EquityParams,
    rate: f64,
    maturity: f64,
    tol: f64,
) -> ImpliedPoint {
    let delta = lattice.delta();
    let n_steps = maturity_steps(maturity, delta);
    let mut point = ImpliedPoint {
        maturity,
        n_steps,
        market_price: None,
        ptilde: None,
        implied_mu: None,
        implied_sigma: None,
        implied_p: None,
        diagnostics: Diagnostics::default(),
    };
    let diag = &mut point.diagnostics;

    let market = match market_zcb_price(curve, 0.0, maturity) {
        Ok(v) => v,
        Err(e) => {
            diag.flags.push(PointFlag::MarketPriceError);
            diag.errors.push(e.to_string());
            return point;
        }
    };
    point.market_price = Some(market);

    let solution = match solve_ptilde(lattice, market, n_steps, tol) {
        Ok(s) => s,
        Err(e) => {
            diag.flags.push(match e {
                Error::UnattainablePrice { .. } => PointFlag::UnattainablePrice,
                Error::NonIdentifiable => PointFlag::NonIdentifiable,
                Error::NoConvergence { .. } => PointFlag::NoConvergence,
                _ => PointFlag::SolverError,
            });
            diag.errors.push(e.to_string());
            return point;
        }
    };
    let ptilde = solution.ptilde;
    point.ptilde = Some(ptilde);
    diag.iterations = solution.iterations;
    diag.residual = Some(solution.residual);

    match implied_mu(ptilde, baseline.p, baseline.sigma, rate, delta) {
        Ok(mu) => point.implied_mu = Some(mu),
        Err(e) => {
            diag.flags.push(PointFlag::MuError);
            diag.errors.push(e.to_string());
        }
    }

    match implied_sigma(ptilde, baseline.p, baseline.mu, rate, delta) {
        Ok(sigma) => {
            point.implied_sigma = Some(sigma.value);
            if !sigma.valid {
                diag.flags.push(PointFlag::SigmaNonPositive);
            }
        }
        Err(Error::IndeterminateSigma) => diag.flags.push(PointFlag::SigmaIndeterminate),
        Err(e) => {
            diag.flags.push(PointFlag::SigmaError);
            diag.errors.push(e.to_string());
        }
    }

    match implied_p(ptilde, baseline.theta(rate), delta) {
        Ok(ip) => {
            point.implied_p = Some(ip.p);
            if ip.plus_in_unit_interval {
                diag.flags.push(PointFlag::PlusRootInUnit);
            }
            if ip.branch == RootBranch::Plus {
                diag.flags.push(PointFlag::PlusBranch);
            }
        }
        Err(e) => {
            diag.flags.push(PointFlag::PError);
            diag.errors.push(e.to_string());
        }
    }
    point
}

/// Sweeps `grid` (maturities in years) and returns one [`ImpliedPoint`] per
/// maturity in grid order. Maturities are solved in parallel; per-point
/// failures are recorded rather than aborting the sweep.
pub fn build_implied_curves(
    curve: &YieldCurve,
    calibration: &BdtCalibration,
    baseline: &EquityParams,
    rate_for_theta: f64,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<ImpliedPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty maturity grid".into()));
    }
    if let Some(bad) = grid.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::InvalidArgument(format!("maturity {bad} is not positive")));
    }
    let max_steps = grid
        .iter()
        .map(|&m| maturity_steps(m, calibration.delta))
        .max()
        .unwrap_or(1);
    let lattice = calibration.lattice(max_steps)?;
    Ok(grid
        .par_iter()
        .map(|&m| imply_point(&lattice, curve, baseline, rate_for_theta, m, tol))
        .collect())
}

pub const CSV_HEADER: [&str; 9] = [
    "maturity_years",
    "n_steps",
    "market_price",
    "ptilde",
    "implied_mu",
    "implied_sigma",
    "implied_p",
    "residual",
    "flags",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Writes points as CSV with [`CSV_HEADER`] columns; flags are `;`-joined.
pub fn write_points_csv<W: Write>(points: &[ImpliedPoint], out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for p in points {
        let flags = p
            .diagnostics
            .flags
            .iter()
            .map(|f| f.as_str())
            .collect::<Vec<_>>()
            .join(";");
        writer.write_record([
            format!("{:?}", p.maturity),
            p.n_steps.to_string(),
            opt(p.market_price),
            opt(p.ptilde),
            opt(p.implied_mu),
            opt(p.implied_sigma),
            opt(p.implied_p),
            opt(p.diagnostics.residual),
            flags,
        ])?;
    }
    writer.flush()
}

/// JSON array of points.
pub fn points_to_json(points: &[ImpliedPoint]) -> String {
    serde_json::to_string_pretty(points).expect("points serialize")
}
