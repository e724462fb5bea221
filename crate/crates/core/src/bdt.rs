//! Discrete Black-Derman-Toy short-rate lattice.
//!
//! The rate after `n` steps with `k` up-moves is
//!
//! ```text
//! R(n, k) = r0 · c1^(-n) · c2^k
//! ```
//!
//! where `1/c1 = 1 + d·Δ` and `c2/c1 = 1 + u·Δ` come from the binomial
//! moments of the historical rate series. Nodes are evaluated on demand from
//! this closed form; nothing quadratic in the number of steps is stored.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{check_delta, simple_returns, solve_up_down, BinomialMoments};
use crate::marketdata::ObservationSeries;

/// Calibrated lattice coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BdtCalibration {
    pub r0: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
    /// Rate-side moments the coefficients were derived from; `None` when the
    /// coefficients were supplied directly.
    pub rate_moments: Option<BinomialMoments>,
}

impl BdtCalibration {
    /// Builds a calibration from known coefficients, e.g. published values.
    pub fn from_coefficients(r0: f64, c1: f64, c2: f64, delta: f64) -> Result<Self> {
        for (what, v) in [("r0", r0), ("c1", c1), ("c2", c2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidValue {
                    what: what.into(),
                    value: v,
                });
            }
        }
        check_delta(delta)?;
        Ok(Self {
            r0,
            c1,
            c2,
            delta,
            rate_moments: None,
        })
    }

    /// Recovers the instantaneous rate drift `μ` and `ν_Δ` implied by the
    /// coefficients for a given rate-side upturn probability.
    pub fn implied_rate_moments(&self, p: f64) -> Result<(f64, f64)> {
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::DegenerateProbability { p });
        }
        let u = (self.c2 / self.c1 - 1.0) / self.delta;
        let d = (1.0 / self.c1 - 1.0) / self.delta;
        let mu = p * u + (1.0 - p) * d;
        let nu = (p * (1.0 - p)).sqrt() * (u - d);
        Ok((mu, nu))
    }

    /// Multiplicative rate change on an up step, `c2/c1`.
    pub fn up_ratio(&self) -> f64 {
        self.c2 / self.c1
    }

    /// Multiplicative rate change on a down step, `1/c1`.
    pub fn down_ratio(&self) -> f64 {
        1.0 / self.c1
    }

    pub fn lattice(&self, n_steps: usize) -> Result<RateLattice> {
        RateLattice::new(*self, n_steps)
    }

    #[inline]
    fn log_rate(&self, n: usize, k: usize) -> f64 {
        self.r0.ln() - n as f64 * self.c1.ln() + k as f64 * self.c2.ln()
    }
}

/// Derives `(c1, c2)` from rate-side moments and anchors the lattice at `r0`.
pub fn calibrate_bdt(rate_moments: &BinomialMoments, r0: f64) -> Result<BdtCalibration> {
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::InvalidValue {
            what: "r0".into(),
            value: r0,
        });
    }
    let factors = solve_up_down(rate_moments)?;
    let delta = rate_moments.delta;
    let down = 1.0 + factors.d * delta;
    if down <= 0.0 {
        return Err(Error::CalibrationInfeasible { down_factor: down });
    }
    let up = 1.0 + factors.u * delta;
    Ok(BdtCalibration {
        r0,
        c1: 1.0 / down,
        c2: up / down,
        delta,
        rate_moments: Some(*rate_moments),
    })
}

/// A recombining lattice of `n_steps` steps over a calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateLattice {
    pub calibration: BdtCalibration,
    pub n_steps: usize,
}

impl RateLattice {
    pub fn new(calibration: BdtCalibration, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidArgument("lattice needs at least one step".into()));
        }
        Ok(Self {
            calibration,
            n_steps,
        })
    }

    pub fn delta(&self) -> f64 {
        self.calibration.delta
    }

    /// Annualized short rate at node `(n, k)`, evaluated in log space.
    pub fn rate_at(&self, n: usize, k: usize) -> Result<f64> {
        if k > n || n > self.n_steps {
            return Err(Error::Index {
                n,
                k,
                n_steps: self.n_steps,
            });
        }
        Ok(self.calibration.log_rate(n, k).exp())
    }
}

/// Free-function form of [`RateLattice::rate_at`].
pub fn rate_at(lattice: &RateLattice, n: usize, k: usize) -> Result<f64> {
    lattice.rate_at(n, k)
}

/// Node-rate evaluator for pricing loops. Splits `exp(ln r0 - n ln c1 + k ln c2)`
/// into a per-slice factor and a per-`k` table when both stay inside the
/// double range, and falls back to the single exponential otherwise.
pub(crate) struct NodeRates {
    ln_r0: f64,
    ln_c1: f64,
    ln_c2: f64,
    up_pow: Vec<f64>,
}

const SAFE_EXPONENT: f64 = 600.0;

impl NodeRates {
    pub(crate) fn new(calibration: &BdtCalibration, max_steps: usize) -> Self {
        let ln_r0 = calibration.r0.ln();
        let ln_c1 = calibration.c1.ln();
        let ln_c2 = calibration.c2.ln();
        let n = max_steps as f64;
        let table_ok =
            ln_r0.abs() + n * ln_c1.abs() < SAFE_EXPONENT && n * ln_c2.abs() < SAFE_EXPONENT;
        let up_pow = if table_ok {
            (0..=max_steps).map(|k| (k as f64 * ln_c2).exp()).collect()
        } else {
            Vec::new()
        };
        Self {
            ln_r0,
            ln_c1,
            ln_c2,
            up_pow,
        }
    }

    /// `c2^k` for `k = 0..=max_steps`, when the split form is safe.
    pub(crate) fn up_powers(&self) -> Option<&[f64]> {
        (!self.up_pow.is_empty()).then_some(self.up_pow.as_slice())
    }

    #[inline]
    pub(crate) fn slice(&self, n: usize) -> SliceRates<'_> {
        SliceRates {
            rates: self,
            n,
            base: (self.ln_r0 - n as f64 * self.ln_c1).exp(),
        }
    }
}

pub(crate) struct SliceRates<'a> {
    rates: &'a NodeRates,
    n: usize,
    base: f64,
}

impl SliceRates<'_> {
    /// `r0 · c1^(-n)`.
    #[inline]
    pub(crate) fn base(&self) -> f64 {
        self.base
    }

    #[inline]
    pub(crate) fn rate(&self, k: usize) -> f64 {
        match self.rates.up_pow.get(k) {
            Some(pow) => self.base * pow,
            None => {
                let r = self.rates;
                (r.ln_r0 - self.n as f64 * r.ln_c1 + k as f64 * r.ln_c2).exp()
            }
        }
    }
}

/// Observed and model rate for one historical day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedPoint {
    pub step: usize,
    pub date: NaiveDate,
    pub market: f64,
    pub model: f64,
}

/// Replays the historical window through the lattice: the model rate on day
/// `n` is `R_start · c1^(-n) · c2^(H_n)`, where `H_n` counts strictly positive
/// daily returns up to day `n` and `R_start` is the first observation.
pub fn fitted_series(
    calibration: &BdtCalibration,
    historical: &ObservationSeries,
) -> Result<Vec<FittedPoint>> {
    let returns = simple_returns(historical)?;
    let ln_start = historical.first_value().ln();
    let (ln_c1, ln_c2) = (calibration.c1.ln(), calibration.c2.ln());
    let mut ups = 0usize;
    let mut out = Vec::with_capacity(historical.len());
    for (n, &(date, market)) in historical.entries().iter().enumerate() {
        if n > 0 && returns[n - 1] > 0.0 {
            ups += 1;
        }
        let model = if n == 0 {
            market
        } else {
            (ln_start - n as f64 * ln_c1 + ups as f64 * ln_c2).exp()
        };
        out.push(FittedPoint {
            step: n,
            date,
            market,
            model,
        });
    }
    Ok(out)
}

/// Draws one rate path of `n_steps` moves; an up move (probability `p_up`)
/// multiplies the rate by `c2/c1`, a down move by `1/c1`.
pub fn simulate_path(
    calibration: &BdtCalibration,
    n_steps: usize,
    p_up: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p_up) {
        return Err(Error::InvalidValue {
            what: "p_up".into(),
            value: p_up,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(calibration.r0);
    let mut ups = 0usize;
    for n in 1..=n_steps {
        if rng.gen::<f64>() < p_up {
            ups += 1;
        }
        path.push(calibration.log_rate(n, ups).exp());
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::DEFAULT_DELTA;
    use crate::marketdata::SeriesKind;

    fn published() -> BdtCalibration {
        BdtCalibration::from_coefficients(0.0377, 1.0236, 1.0464, DEFAULT_DELTA).unwrap()
    }

    #[test]
    fn hand_calibration() {
        let m = BinomialMoments::new(0.001, 0.02, 0.5, DEFAULT_DELTA, 251).unwrap();
        let cal = calibrate_bdt(&m, 0.0377).unwrap();
        assert!((cal.c1 - 1.0 / 0.981).abs() < 1e-12);
        assert!((cal.c2 - 1.021 / 0.981).abs() < 1e-12);
        assert!((cal.c1 - 1.019_368_0).abs() < 1e-7);
        assert!((cal.c2 - 1.040_774_7).abs() < 1e-7);
    }

    #[test]
    fn zero_volatility_lattice_is_flat() {
        let m = BinomialMoments::new(0.0, 0.0, 0.0, DEFAULT_DELTA, 251).unwrap();
        let cal = calibrate_bdt(&m, 0.0377).unwrap();
        assert_eq!((cal.c1, cal.c2), (1.0, 1.0));
        let lat = cal.lattice(50).unwrap();
        for (n, k) in [(0, 0), (10, 3), (50, 50)] {
            assert!((lat.rate_at(n, k).unwrap() - 0.0377).abs() < 1e-17);
        }
    }

    #[test]
    fn infeasible_and_degenerate() {
        // std so large the down factor goes negative
        let m = BinomialMoments::new(0.0, 2.0, 0.5, DEFAULT_DELTA, 251).unwrap();
        assert!(matches!(
            calibrate_bdt(&m, 0.03),
            Err(Error::CalibrationInfeasible { .. })
        ));
        let m = BinomialMoments::new(0.0, 0.02, 0.0, DEFAULT_DELTA, 251).unwrap();
        assert!(matches!(
            calibrate_bdt(&m, 0.03),
            Err(Error::DegenerateProbability { .. })
        ));
    }

    #[test]
    fn rate_at_values() {
        let lat = published().lattice(10).unwrap();
        assert!((lat.rate_at(0, 0).unwrap() - 0.0377).abs() < 1e-17);
        let expected = 0.0377 * 1.0464 / (1.0236f64 * 1.0236);
        assert!((lat.rate_at(2, 1).unwrap() - expected).abs() < 1e-16);
        assert!((expected - 0.037_651_2).abs() < 1e-7);
        assert!(matches!(lat.rate_at(2, 3), Err(Error::Index { .. })));
        assert!(matches!(lat.rate_at(11, 0), Err(Error::Index { .. })));
    }

    #[test]
    fn rate_at_deep_lattice_is_finite() {
        let lat = published().lattice(20_000).unwrap();
        for k in [0, 10_000, 20_000] {
            let r = lat.rate_at(20_000, k).unwrap();
            assert!(r.is_finite() && r > 0.0, "k={k} r={r}");
        }
    }

    #[test]
    fn node_rates_match_closed_form() {
        let cal = published();
        let lat = cal.lattice(7560).unwrap();
        let table = NodeRates::new(&cal, 7560);
        assert!(!table.up_pow.is_empty());
        for n in [0, 1, 500, 3000, 7560] {
            let slice = table.slice(n);
            for k in [0, n / 3, n] {
                let a = slice.rate(k);
                let b = lat.rate_at(n, k).unwrap();
                assert!((a - b).abs() <= 1e-13 * b, "n={n} k={k}");
            }
        }
        // beyond the table range the slice falls back to the direct exponential
        let wide = NodeRates::new(&cal, 40_000);
        assert!(wide.up_pow.is_empty());
        let b = cal.lattice(40_000).unwrap().rate_at(40_000, 20_000).unwrap();
        assert!(b.is_finite() && b > 0.0);
        assert!((wide.slice(40_000).rate(20_000) - b).abs() <= 1e-13 * b);
    }

    #[test]
    fn calibration_inverse() {
        let m = BinomialMoments::new(-3.1e-4, 0.0231, 0.47, DEFAULT_DELTA, 251).unwrap();
        let cal = calibrate_bdt(&m, 0.0377).unwrap();
        let (mu, nu) = cal.implied_rate_moments(m.p_up).unwrap();
        assert!((mu - m.mu()).abs() <= 1e-12 * m.mu().abs().max(m.nu_delta()));
        assert!((nu - m.nu_delta()).abs() <= 1e-12 * m.nu_delta());
    }

    #[test]
    fn path_independence_exhaustive() {
        let cal = published();
        let lat = cal.lattice(20).unwrap();
        for n in 0..=20usize {
            for bits in 0u32..(1 << n) {
                let mut r = cal.r0;
                for i in 0..n {
                    r *= if bits >> i & 1 == 1 {
                        cal.up_ratio()
                    } else {
                        cal.down_ratio()
                    };
                }
                let closed = lat.rate_at(n, bits.count_ones() as usize).unwrap();
                assert!((r - closed).abs() <= 1e-12 * closed);
            }
        }
    }

    #[test]
    fn monotone_in_k() {
        let lat = published().lattice(100).unwrap();
        for k in 0..100 {
            assert!(lat.rate_at(100, k + 1).unwrap() > lat.rate_at(100, k).unwrap());
        }
        let flat = BdtCalibration::from_coefficients(0.03, 1.01, 0.99, DEFAULT_DELTA)
            .unwrap()
            .lattice(10)
            .unwrap();
        assert!(flat.rate_at(10, 5).unwrap() < flat.rate_at(10, 4).unwrap());
    }

    fn rates(values: &[f64]) -> ObservationSeries {
        let start = NaiveDate::from_ymd_opt(2022, 6, 15).unwrap();
        ObservationSeries::new(
            values
                .iter()
                .enumerate()
                .map(|(i, v)| (start + chrono::Days::new(i as u64), *v))
                .collect(),
            SeriesKind::Rate,
        )
        .unwrap()
    }

    #[test]
    fn fitted_series_anchor_and_constant() {
        let cal = published();
        let fit = fitted_series(&cal, &rates(&[0.03, 0.03, 0.03, 0.03])).unwrap();
        assert_eq!(fit[0].model, fit[0].market);
        for p in &fit {
            let expected = 0.03 * cal.c1.powi(-(p.step as i32));
            assert!((p.model - expected).abs() < 1e-15);
        }
        let fit = fitted_series(&cal, &rates(&[0.03, 0.031, 0.030, 0.032])).unwrap();
        let expected = 0.03 * cal.c1.powi(-3) * cal.c2.powi(2);
        assert!((fit[3].model - expected).abs() < 1e-15);
    }

    #[test]
    fn simulate_is_deterministic_and_all_up() {
        let cal = published();
        let a = simulate_path(&cal, 252, 0.4821, 7).unwrap();
        let b = simulate_path(&cal, 252, 0.4821, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 253);
        assert_eq!(a[0], cal.r0);
        let up = simulate_path(&cal, 30, 1.0, 1).unwrap();
        for (n, r) in up.iter().enumerate() {
            let expected = cal.r0 * cal.up_ratio().powi(n as i32);
            assert!((r - expected).abs() <= 1e-13 * expected);
        }
        assert!(simulate_path(&cal, 0, 0.5, 1).is_err());
    }

    #[test]
    fn simulated_mean_return_matches_drift() {
        let m = BinomialMoments::new(-3.0e-4, 0.0231, 0.4821, DEFAULT_DELTA, 251).unwrap();
        let cal = calibrate_bdt(&m, 0.0377).unwrap();
        let (paths, steps) = (100_000usize, 252usize);
        let (mut sum, mut sum_sq, mut count) = (0.0f64, 0.0f64, 0usize);
        for seed in 0..paths as u64 {
            let path = simulate_path(&cal, steps, m.p_up, seed).unwrap();
            for w in path.windows(2) {
                let r = (w[1] - w[0]) / w[0];
                sum += r;
                sum_sq += r * r;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        let se = (var / count as f64).sqrt();
        assert!(
            (mean - m.mean_per_step).abs() < 3.0 * se,
            "mean {mean} vs {} (se {se})",
            m.mean_per_step
        );
    }
}
