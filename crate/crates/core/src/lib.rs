//! Black-Derman-Toy short-rate lattice calibrated from historical yields,
//! zero-coupon bond pricing with equity-linked risk-neutral probabilities,
//! and inversion of market bond prices into implied equity parameters.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! - [`marketdata`]: CSV ingestion of rate/price series and yield curves.
//! - [`estimation`]: simple returns and binomial moments `(μ, σ, p)`.
//! - [`bdt`]: `(c1, c2)` calibration and the closed-form lattice.
//! - [`bondpricer`]: backward-induction bond prices and a path-enumeration oracle.
//! - [`inversion`]: implied `p̃` per maturity and the implied `μ`, `σ`, `p` curves.

pub mod bdt;
pub mod bondpricer;
pub mod error;
pub mod estimation;
pub mod inversion;
pub mod marketdata;

#[cfg(test)]
mod pipeline_tests;

pub use bdt::{
    calibrate_bdt, fitted_series, rate_at, simulate_path, BdtCalibration, FittedPoint, RateLattice,
};
pub use bondpricer::{
    market_zcb_price, price_zcb, price_zcb_const, price_zcb_oracle, risk_neutral_prob,
    EquityParams, OutOfRangePolicy, PriceOutcome, PricingPolicy, ThetaRate,
};
pub use error::{Error, Result};
pub use estimation::{
    estimate_moments, simple_returns, solve_up_down, BinomialMoments, UpDownFactors,
    DEFAULT_DELTA,
};
pub use inversion::{
    build_implied_curves, implied_mu, implied_p, implied_sigma, solve_ptilde, ImpliedPoint,
    ImpliedProbability, ImpliedSigma, PtildeSolution,
};
pub use marketdata::{
    parse_equity_prices, parse_series, parse_treasury_curve, parse_yield_curve, yield_at,
    CurvePoint, CurveSchema, ObservationSeries, ParsedSeries, PriceField, SeriesKind,
    SeriesSchema, YieldCurve,
};
