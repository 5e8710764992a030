//! One-step load forecasts from the history of per-cycle estimates.

mod arima;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::round_count;
use crate::traffic::{sample_beta_arrivals, BetaBurstSpec};

pub use arima::{
    aic, css_residuals, difference, dw, fit_arma, fit_ma, forecast_one, gaussian_log_likelihood, invertible_ma, ma_to_unconstrained, ols_ar,
    select_model, FitOptions, ModelSelection,
};

/// Append-only series of per-cycle loads. Negative inputs are stored as 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryPool {
    series: Vec<f64>,
}

impl HistoryPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut pool = Self::new();
        for v in values {
            pool.push(v);
        }
        pool
    }

    pub fn push(&mut self, value: f64) {
        self.series.push(if value.is_nan() { 0.0 } else { value.max(0.0) });
    }

    pub fn values(&self) -> &[f64] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// ARIMA(p, d, q) with intercept `c`:
/// `y_t = c + Σ ar_i y_{t-i} + Σ ma_j ε_{t-j} + ε_t` on the `d`-times
/// differenced series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub c: f64,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub sigma2: f64,
    /// Residuals the variance was computed from.
    pub n_obs: usize,
}

impl ArimaSpec {
    /// A model with all coefficients zero.
    pub fn zero(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            c: 0.0,
            ar_coeffs: vec![0.0; p],
            ma_coeffs: vec![0.0; q],
            sigma2: 0.0,
            n_obs: 0,
        }
    }

    /// Fitted parameters including the intercept.
    pub fn n_params(&self) -> usize {
        self.p + self.q + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub value: f64,
    pub value_rounded: u32,
}

impl Forecast {
    /// Clamps at zero and rounds half-up.
    pub fn new(raw: f64) -> Self {
        let value = if raw.is_nan() { 0.0 } else { raw.max(0.0) };
        Self {
            value,
            value_rounded: round_count(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub p: usize,
    pub q: usize,
    pub aic: f64,
    /// `None` when every residual is zero.
    pub dw: Option<f64>,
    pub log_likelihood: f64,
}

/// Mean of the last `w` values.
pub fn masw(pool: &HistoryPool, w: usize) -> Result<Forecast> {
    if w == 0 {
        return Err(Error::InvalidConfig("MASW window must be at least 1".into()));
    }
    let v = pool.values();
    if v.len() < w {
        return Err(Error::InsufficientHistory {
            needed: w,
            available: v.len(),
        });
    }
    Ok(Forecast::new(v[v.len() - w..].iter().sum::<f64>() / w as f64))
}

/// `|predicted - actual| / max(actual, 1)`.
pub fn relative_error(predicted: f64, actual: f64) -> f64 {
    (predicted - actual).abs() / actual.max(1.0)
}

/// How training series are generated: `bursts` independent realizations of
/// `burst`, concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSpec {
    pub burst: BetaBurstSpec,
    pub bursts: usize,
}

impl Default for TrainingSpec {
    /// Ten `B(100, 20 ms)` bursts at 1.25 ms per cycle.
    fn default() -> Self {
        Self {
            burst: BetaBurstSpec::standard(100, 20.0, 1.25),
            bursts: 10,
        }
    }
}

pub fn training_series(spec: &TrainingSpec, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..spec.bursts {
        let trace = sample_beta_arrivals(&spec.burst, &mut rng)?;
        out.extend(trace.per_cycle_counts.iter().map(|&c| f64::from(c)));
    }
    Ok(out)
}

/// Fits ARIMA(p, d, q) on a training series, keeping the best iterate if
/// the optimizer runs out of iterations.
pub fn fit_training(training: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaSpec> {
    let y = difference(training, d)?;
    match fit_arma(&y, p, d, q, &FitOptions::default()) {
        Err(Error::NonConvergence { best, .. }) => Ok(*best),
        other => other,
    }
}

/// A forecaster used inside the simulation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    Arima(ArimaSpec),
    Masw { window: usize },
}

impl Predictor {
    /// Forecast of the next value. With too little history the last value
    /// is repeated (zero for an empty pool).
    pub fn predict(&self, pool: &HistoryPool) -> Forecast {
        let model = match self {
            Predictor::Arima(spec) => forecast_one(spec, pool),
            Predictor::Masw { window } => masw(pool, *window),
        };
        model.unwrap_or_else(|_| Forecast::new(pool.values().last().copied().unwrap_or(0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masw_examples() {
        assert_eq!(masw(&HistoryPool::from_values([3.0, 3.0, 3.0]), 3).unwrap().value, 3.0);
        assert_eq!(masw(&HistoryPool::from_values([0.0, 10.0]), 2).unwrap().value, 5.0);
        assert!(matches!(
            masw(&HistoryPool::from_values([1.0]), 3),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn pool_clamps_negatives() {
        let pool = HistoryPool::from_values([-2.0, 1.0]);
        assert_eq!(pool.values(), &[0.0, 1.0]);
    }

    #[test]
    fn forecast_rounding() {
        assert_eq!(Forecast::new(-0.3).value_rounded, 0);
        assert_eq!(Forecast::new(2.5).value_rounded, 3);
    }

    #[test]
    fn short_history_repeats_last_value() {
        let p = Predictor::Masw { window: 3 };
        assert_eq!(p.predict(&HistoryPool::new()).value, 0.0);
        assert_eq!(p.predict(&HistoryPool::from_values([4.0])).value, 4.0);
        let a = Predictor::Arima(ArimaSpec::zero(0, 2, 3));
        assert_eq!(a.predict(&HistoryPool::from_values([1.0, 7.0])).value, 7.0);
    }

    #[test]
    fn training_series_is_seeded() {
        let spec = TrainingSpec::default();
        let a = training_series(&spec, 1).unwrap();
        assert_eq!(a.len(), 160);
        assert_eq!(a, training_series(&spec, 1).unwrap());
        assert_ne!(a, training_series(&spec, 2).unwrap());
        let fit = fit_training(&a, 0, 2, 3).unwrap();
        assert_eq!(fit.ma_coeffs.len(), 3);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 0.0), 1.0);
        assert_eq!(relative_error(9.0, 10.0), 0.1);
    }
}
