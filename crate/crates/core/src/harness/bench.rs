//! Stand-alone benchmarks for each tier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    Contracts, DiagnosticsBenchConfig, EstimationBenchConfig, FailprobBenchConfig, NegotiationConfig,
    PredictionBenchConfig,
};
use super::metrics::{mean, std_dev};
use crate::allocation::{fail_prob, negotiate_delta, NegotiationPoint};
use crate::error::{Error, Result};
use crate::estimation::{estimate, Scheme, TableStore};
use crate::prediction::{
    fit_training, masw, relative_error, select_model, training_series, ArimaSpec, HistoryPool, Predictor,
};
use crate::sim::{derive_seed, CycleEngine, GfConfig, Occupation};
use crate::traffic::{beta_arrivals, uniform_arrivals};

/// Mean and standard error of `a_i - b_i` over pairs where both are finite.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| d.is_finite())
        .collect();
    (mean(&d), std_dev(&d) / (d.len() as f64).sqrt())
}

/// One-sided 95 % normal quantile.
pub const Z95: f64 = 1.6448536269514722;

/// True when `mean(a) < mean(b)` is supported at 95 % by a paired test.
pub fn paired_less(a: &[f64], b: &[f64]) -> bool {
    let (d, se) = paired_difference(a, b);
    d + Z95 * se < 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRow {
    pub n: u32,
    pub scheme: Scheme,
    pub trials: usize,
    pub mean: f64,
    pub bias: f64,
    pub mae: f64,
    pub mae_se: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationBench {
    pub rows: Vec<EstimationRow>,
    /// `abs_errors[i]` holds the per-trial absolute errors behind `rows[i]`,
    /// NaN where the estimator failed.
    pub abs_errors: Vec<Vec<f64>>,
}

impl EstimationBench {
    /// Absolute errors of `scheme` pooled over every `N`, aligned by trial
    /// across schemes.
    pub fn pooled_errors(&self, scheme: Scheme) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.abs_errors)
            .filter(|(r, _)| r.scheme == scheme)
            .flat_map(|(_, e)| e.iter().copied())
            .collect()
    }
}

fn occupation_for(scheme: Scheme) -> Occupation {
    match scheme {
        Scheme::MsMld => Occupation::Arbitrary,
        _ => Occupation::Adjacent,
    }
}

pub fn run_estimation_bench(cfg: &EstimationBenchConfig, tables: &TableStore) -> Result<EstimationBench> {
    let base = GfConfig {
        w: cfg.w,
        t_slots: cfg.t_slots,
        k: cfg.k,
        ..GfConfig::reference()
    };
    base.validate()?;
    if cfg.n_min > cfg.n_max || cfg.trials == 0 {
        return Err(Error::InvalidConfig("estimation bench needs n_min <= n_max and trials >= 1".into()));
    }
    let mut rows = Vec::new();
    let mut abs_errors = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        for &scheme in &cfg.schemes {
            let gf = base.with_occupation(occupation_for(scheme));
            let estimates: Vec<Option<f64>> = (0..cfg.trials)
                .into_par_iter()
                .map_init(CycleEngine::new, |engine, trial| {
                    engine.run(&gf, n, derive_seed(cfg.seed, u64::from(n), trial as u64));
                    match estimate(scheme, &engine.observation(), &gf, tables) {
                        Ok(r) => Ok(Some(f64::from(r.n_hat))),
                        Err(Error::InconsistentObservation(_) | Error::Undefined(_)) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
            let errs: Vec<f64> = ok.iter().map(|e| (e - f64::from(n)).abs()).collect();
            let aligned = estimates
                .iter()
                .map(|e| e.map_or(f64::NAN, |e| (e - f64::from(n)).abs()))
                .collect();
            let m = mean(&ok);
            rows.push(EstimationRow {
                n,
                scheme,
                trials: cfg.trials,
                mean: m,
                bias: m - f64::from(n),
                mae: mean(&errs),
                mae_se: std_dev(&errs) / (errs.len().max(1) as f64).sqrt(),
                failures: cfg.trials - ok.len(),
            });
            abs_errors.push(aligned);
        }
    }
    Ok(EstimationBench { rows, abs_errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailprobRow {
    pub variant: Occupation,
    pub k: u32,
    pub w: u32,
    pub analytic: f64,
    pub empirical: f64,
    pub abs_error: f64,
}

/// Analytical failure probability next to the fraction of users that
/// failed over `cfg.cycles` simulated cycles.
pub fn run_failprob_bench(cfg: &FailprobBenchConfig) -> Result<Vec<FailprobRow>> {
    let mut grid = Vec::new();
    for &variant in &cfg.variants {
        for &k in &cfg.ks {
            for w in cfg.w_min..=cfg.w_max {
                grid.push((variant, k, w));
            }
        }
    }
    grid.into_iter()
        .enumerate()
        .map(|(i, (variant, k, w))| {
            let gf = GfConfig {
                w,
                t_slots: cfg.t_slots,
                k,
                occupation: variant,
                ..GfConfig::reference()
            };
            gf.validate()?;
            let analytic = fail_prob(w, cfg.n, k, cfg.t_slots, variant)?;
            let point_seed = derive_seed(cfg.seed, 0xfa11, i as u64);
            let failed: usize = (0..cfg.cycles)
                .into_par_iter()
                .map_init(CycleEngine::new, |engine, c| {
                    engine.run(&gf, cfg.n, derive_seed(point_seed, 0, c as u64));
                    engine.n_failed()
                })
                .sum();
            let users = cfg.cycles as f64 * f64::from(cfg.n);
            let empirical = if users > 0.0 { failed as f64 / users } else { 0.0 };
            Ok(FailprobRow {
                variant,
                k,
                w,
                analytic,
                empirical,
                abs_error: (analytic - empirical).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionTracePoint {
    pub cycle: usize,
    pub truth: u32,
    pub estimate: f64,
    /// Forecasts for this cycle made one cycle earlier.
    pub arima: Option<f64>,
    pub masw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBench {
    pub arima: ArimaSpec,
    /// Mean relative error of each replication.
    pub arima_errors: Vec<f64>,
    pub masw_errors: Vec<f64>,
    /// Replication 0, cycle by cycle.
    pub trace: Vec<PredictionTracePoint>,
}

/// Estimates the per-cycle load of a uniform event plus one burst and
/// scores one-step ARIMA and MASW forecasts against the true load.
///
/// Both are scored on the cycles where the MASW window is full; ARIMA
/// repeats the last estimate while its own history is too short.
pub fn run_prediction_bench(cfg: &PredictionBenchConfig, tables: &TableStore) -> Result<PredictionBench> {
    cfg.gf.validate()?;
    let cycle_ms = cfg.gf.scheduling_cycle_ms();
    let n_cycles = (cfg.horizon_ms / cycle_ms + 1e-9).floor() as usize;
    let start = (cfg.burst_start_ms / cycle_ms).round() as usize;
    let burst = beta_arrivals(&cfg.burst)?.delayed(start);
    let uniform = uniform_arrivals(&cfg.uniform, n_cycles);
    let loads: Vec<u32> = (0..n_cycles).map(|c| uniform.at(c) + burst.at(c)).collect();

    let series = training_series(&cfg.arima.training, cfg.arima.training_seed)?;
    let spec = fit_training(&series, cfg.arima.p, cfg.arima.d, cfg.arima.q)?;
    let arima = Predictor::Arima(spec.clone());

    let reps: Vec<(f64, f64, Vec<PredictionTracePoint>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut engine = CycleEngine::new();
            let mut pool = HistoryPool::new();
            let mut trace = Vec::with_capacity(n_cycles);
            let (mut e_arima, mut e_masw) = (Vec::new(), Vec::new());
            let (mut next_arima, mut next_masw) = (None, None);
            for (c, &n) in loads.iter().enumerate() {
                engine.run(&cfg.gf, n, derive_seed(cfg.seed, rep as u64, c as u64));
                let est = match estimate(cfg.estimator, &engine.observation(), &cfg.gf, tables) {
                    Ok(r) => r.n_hat_real,
                    Err(Error::InconsistentObservation(_) | Error::Undefined(_)) => {
                        pool.values().last().copied().unwrap_or(0.0)
                    }
                    Err(e) => return Err(e),
                };
                let truth = f64::from(n);
                if let (Some(a), Some(m)) = (next_arima, next_masw) {
                    e_arima.push(relative_error(a, truth));
                    e_masw.push(relative_error(m, truth));
                }
                trace.push(PredictionTracePoint {
                    cycle: c,
                    truth: n,
                    estimate: est,
                    arima: next_arima,
                    masw: next_masw,
                });
                pool.push(est);
                next_arima = Some(arima.predict(&pool).value);
                next_masw = masw(&pool, cfg.masw_window).ok().map(|f| f.value);
            }
            Ok((mean(&e_arima), mean(&e_masw), trace))
        })
        .collect::<Result<_>>()?;

    let mut out = PredictionBench {
        arima: spec,
        arima_errors: Vec::with_capacity(reps.len()),
        masw_errors: Vec::with_capacity(reps.len()),
        trace: Vec::new(),
    };
    for (i, (a, m, trace)) in reps.into_iter().enumerate() {
        out.arima_errors.push(a);
        out.masw_errors.push(m);
        if i == 0 {
            out.trace = trace;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub regeneration: usize,
    pub p: usize,
    pub q: usize,
    pub aic: f64,
    pub dw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBench {
    pub grid: Vec<DiagnosticsRow>,
    /// Lowest-AIC `(p, q)` of each regeneration, ignoring the DW gate.
    pub aic_best: Vec<(usize, usize)>,
    /// What `select_model` picked, DW gate included.
    pub selected: Vec<(usize, usize)>,
}

impl DiagnosticsBench {
    pub fn dw_of(&self, p: usize, q: usize) -> Vec<Option<f64>> {
        self.grid.iter().filter(|r| (r.p, r.q) == (p, q)).map(|r| r.dw).collect()
    }
}

/// Model selection on independently regenerated training series.
pub fn run_diagnostics_bench(cfg: &DiagnosticsBenchConfig) -> Result<DiagnosticsBench> {
    let runs: Vec<_> = (0..cfg.regenerations)
        .into_par_iter()
        .map(|i| {
            let series = training_series(&cfg.training, derive_seed(cfg.seed, 0xd1a6, i as u64))?;
            select_model(&series, cfg.p_max, cfg.q_max, cfg.d)
        })
        .collect::<Result<_>>()?;
    let mut out = DiagnosticsBench {
        grid: Vec::new(),
        aic_best: Vec::new(),
        selected: Vec::new(),
    };
    for (i, sel) in runs.into_iter().enumerate() {
        let best = sel
            .grid
            .iter()
            .min_by(|a, b| a.aic.total_cmp(&b.aic))
            .map(|r| (r.p, r.q))
            .unwrap_or_default();
        out.aic_best.push(best);
        out.selected.push(sel.chosen);
        out.grid.extend(sel.grid.iter().map(|r| DiagnosticsRow {
            regeneration: i,
            p: r.p,
            q: r.q,
            aic: r.aic,
            dw: r.dw,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationReport {
    pub curve: Vec<NegotiationPoint>,
    pub delta: Option<f64>,
    /// Result under `strict_contracts`.
    pub strict_delta: Option<f64>,
}

fn pair(c: &Contracts) -> (crate::allocation::QosContract, crate::allocation::QosContract) {
    (c.a, c.b)
}

pub fn run_negotiation(cfg: &NegotiationConfig) -> Result<NegotiationReport> {
    cfg.gf.validate_shape()?;
    let lenient = negotiate_delta(cfg.w_a, cfg.w_b, cfg.pred_a, cfg.pred_b, &pair(&cfg.contracts), &cfg.gf)?;
    let strict = negotiate_delta(cfg.w_a, cfg.w_b, cfg.pred_a, cfg.pred_b, &pair(&cfg.strict_contracts), &cfg.gf)?;
    Ok(NegotiationReport {
        curve: lenient.curve,
        delta: lenient.delta,
        strict_delta: strict.delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationHit {
    pub w_a: u32,
    pub w_b: u32,
    pub pred_a: u32,
    pub pred_b: u32,
    pub delta: f64,
}

/// Scenarios over a `w_a + w_b = scan_w_all` budget and user counts
/// `1..=scan_n_max` where the lenient floors give `target_delta` and the
/// strict floors are an outage. Scan order is `w_a`, then `pred_a`, then
/// `pred_b`.
pub fn calibration_scan(cfg: &NegotiationConfig) -> Result<Vec<CalibrationHit>> {
    let (w_all, n_max, target_delta) = (cfg.scan_w_all, cfg.scan_n_max, cfg.target_delta);
    let mut hits = Vec::new();
    for w_a in 1..w_all {
        let w_b = w_all - w_a;
        for pred_a in 1..=n_max {
            for pred_b in 1..=n_max {
                let (pa, pb) = (f64::from(pred_a), f64::from(pred_b));
                let lenient = negotiate_delta(w_a, w_b, pa, pb, &pair(&cfg.contracts), &cfg.gf)?;
                let Some(delta) = lenient.delta else { continue };
                if (delta - target_delta).abs() > 1e-9 {
                    continue;
                }
                let strict = negotiate_delta(w_a, w_b, pa, pb, &pair(&cfg.strict_contracts), &cfg.gf)?;
                if strict.is_outage() {
                    hits.push(CalibrationHit {
                        w_a,
                        w_b,
                        pred_a,
                        pred_b,
                        delta,
                    });
                }
            }
        }
    }
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_test_direction() {
        let a = [1.0, 1.1, 0.9, 1.0];
        let b = [2.0, 2.2, 1.9, 2.1];
        assert!(paired_less(&a, &b));
        assert!(!paired_less(&b, &a));
    }

    #[test]
    fn single_trial_estimation_is_reproducible() {
        let cfg = EstimationBenchConfig {
            trials: 1,
            n_min: 3,
            n_max: 3,
            w: 4,
            t_slots: 2,
            k: 2,
            schemes: vec![Scheme::SsMlLs, Scheme::Msem],
            seed: 7,
        };
        let tables = TableStore::in_memory();
        let a = run_estimation_bench(&cfg, &tables).unwrap();
        assert_eq!(a, run_estimation_bench(&cfg, &tables).unwrap());
        assert_eq!(a.rows.len(), 2);
    }

    #[test]
    fn failprob_full_length_rows_agree() {
        let cfg = FailprobBenchConfig {
            ks: vec![8],
            w_min: 20,
            w_max: 20,
            cycles: 2000,
            ..FailprobBenchConfig::default()
        };
        let rows = run_failprob_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].analytic - rows[1].analytic).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.abs_error < 0.01));
    }
}
