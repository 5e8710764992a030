//! The integrated loop: simulate, estimate, predict, allocate, repeat.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AllocScheme, PredictorKind, ScenarioConfig, TrafficSpec};
use super::metrics::{ccdf, mean, reliability_within, CcdfPoint};
use super::SCHEMA_VERSION;
use crate::allocation::{Allocator, Condition};
use crate::error::{Error, Result};
use crate::estimation::{estimate, TableStore};
use crate::math::round_count;
use crate::prediction::{fit_training, relative_error, training_series, ArimaSpec, HistoryPool, Predictor};
use crate::sim::{derive_seed, AccessChannel};
use crate::traffic::{beta_arrivals, uniform_arrivals, ArrivalTrace};

const TAG_TRIAL: u64 = 0x7472_6961_6c00;
const TAG_A: u64 = 1;
const TAG_B: u64 = 2;

/// One scheduling cycle of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub trial: usize,
    pub cycle: usize,
    pub active_a: u32,
    pub active_b: u32,
    pub est_a: f64,
    pub est_b: f64,
    /// Forecasts this cycle's split was based on; `None` on cycle 0.
    pub pred_a: Option<f64>,
    pub pred_b: Option<f64>,
    pub w_a: u32,
    pub w_b: u32,
    /// Adaptive scheme only.
    pub condition: Option<Condition>,
    pub hard_outage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub name: String,
    pub scheme: AllocScheme,
    pub estimator: crate::estimation::Scheme,
    pub predictor: PredictorKind,
    pub trials: usize,
    pub users_a: usize,
    pub users_b: usize,
    pub unserved_a: usize,
    pub unserved_b: usize,
    pub reliability_a_1ms: f64,
    pub reliability_a_1375us: f64,
    pub reliability_b_1ms: f64,
    pub reliability_b_1375us: f64,
    /// Mean |estimate - active users| over cycles with RBs.
    pub estimation_mae_a: f64,
    pub estimation_mae_b: f64,
    /// Mean relative one-step forecast error from cycle 1 on.
    pub prediction_error_a: f64,
    pub prediction_error_b: f64,
    pub estimation_failures: usize,
    pub conditions: BTreeMap<String, usize>,
    pub hard_outages: usize,
    pub arima: Option<ArimaSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub summary: RunSummary,
    pub records: Vec<CycleRecord>,
    pub delays_a: Vec<Option<f64>>,
    pub delays_b: Vec<Option<f64>>,
    pub ccdf_a: Vec<CcdfPoint>,
    pub ccdf_b: Vec<CcdfPoint>,
}

struct TrialOutput {
    records: Vec<CycleRecord>,
    delays_a: Vec<Option<f64>>,
    delays_b: Vec<Option<f64>>,
    estimation_failures: usize,
}

/// Builds the configured predictor, fitting ARIMA on a fresh training series.
pub fn build_predictor(cfg: &ScenarioConfig) -> Result<Predictor> {
    Ok(match cfg.predictor {
        PredictorKind::Masw => Predictor::Masw {
            window: cfg.masw_window,
        },
        PredictorKind::Arima => {
            let a = &cfg.arima;
            let series = training_series(&a.training, a.training_seed)?;
            Predictor::Arima(fit_training(&series, a.p, a.d, a.q)?)
        }
    })
}

struct Shared<'a> {
    cfg: &'a ScenarioConfig,
    arrivals_a: ArrivalTrace,
    arrivals_b: ArrivalTrace,
    allocator: Allocator,
    predictor: Predictor,
    tables: &'a TableStore,
}

pub fn run_scenario(cfg: &ScenarioConfig, tables: &TableStore) -> Result<RunReport> {
    cfg.validate()?;
    let arrivals_a = match &cfg.traffic_a {
        TrafficSpec::Beta(spec) => beta_arrivals(spec)?.delayed(cfg.burst_start_cycle),
        TrafficSpec::Uniform(spec) => uniform_arrivals(spec, cfg.cycles),
    };
    let shared = Shared {
        cfg,
        arrivals_a,
        arrivals_b: uniform_arrivals(&cfg.traffic_b, cfg.cycles),
        allocator: Allocator::new(cfg.gf, cfg.w_all).with_idle_floor(cfg.idle_floor),
        predictor: build_predictor(cfg)?,
        tables,
    };
    let outputs: Vec<TrialOutput> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(&shared, i))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let (mut delays_a, mut delays_b) = (Vec::new(), Vec::new());
    let mut estimation_failures = 0;
    for out in outputs {
        records.extend(out.records);
        delays_a.extend(out.delays_a);
        delays_b.extend(out.delays_b);
        estimation_failures += out.estimation_failures;
    }
    let summary = summarize(cfg, &shared.predictor, &records, &delays_a, &delays_b, estimation_failures);
    Ok(RunReport {
        ccdf_a: ccdf(&delays_a, cfg.ccdf_max_ms, cfg.ccdf_step_ms),
        ccdf_b: ccdf(&delays_b, cfg.ccdf_max_ms, cfg.ccdf_step_ms),
        summary,
        records,
        delays_a,
        delays_b,
    })
}

fn split(shared: &Shared, pred: Option<(f64, f64)>) -> Result<(u32, u32, Option<Condition>, bool)> {
    let cfg = shared.cfg;
    let w_all = cfg.w_all;
    let Some((pa, pb)) = pred else {
        return Ok((w_all / 2, w_all - w_all / 2, None, false));
    };
    let alloc = &shared.allocator;
    // Baselines keep the same reserve for A as the adaptive scheme.
    let from_b = |w_b: u32| {
        let w_b = w_b.min(w_all.saturating_sub(cfg.idle_floor));
        (w_all - w_b, w_b)
    };
    Ok(match cfg.scheme {
        AllocScheme::Fap => {
            let (w_a, w_b) = if pa + pb <= 0.0 {
                (w_all / 2, w_all - w_all / 2)
            } else {
                from_b(round_count(f64::from(w_all) * pb / (pa + pb)))
            };
            (w_a, w_b, None, false)
        }
        AllocScheme::FipMin => {
            let (w_a, w_b) = from_b(alloc.required(cfg.contracts.b.reliability_min, round_count(pb))?);
            (w_a, w_b, None, false)
        }
        AllocScheme::FipIde => {
            let (w_a, w_b) = from_b(alloc.required(cfg.contracts.b.ideal(), round_count(pb))?);
            (w_a, w_b, None, false)
        }
        AllocScheme::Adaptive => match alloc.allocate(pa, pb, &(cfg.contracts.a, cfg.contracts.b)) {
            Ok(d) => (d.w1, d.w2, Some(d.condition), false),
            Err(Error::Outage(_)) => {
                let w_a = cfg.idle_floor.min(w_all);
                (w_a, w_all - w_a, Some(Condition::Cond3Outage), true)
            }
            Err(e) => return Err(e),
        },
    })
}

fn run_trial(shared: &Shared, trial: usize) -> Result<TrialOutput> {
    let cfg = shared.cfg;
    let seed = derive_seed(cfg.seed, TAG_TRIAL, trial as u64);
    let mut chan_a = AccessChannel::new(cfg.gf, cfg.delay_truncation_ms)?;
    let mut chan_b = AccessChannel::new(cfg.gf, cfg.delay_truncation_ms)?;
    let (mut pool_a, mut pool_b) = (HistoryPool::new(), HistoryPool::new());
    let mut out = TrialOutput {
        records: Vec::new(),
        delays_a: Vec::new(),
        delays_b: Vec::new(),
        estimation_failures: 0,
    };
    let traffic_end = shared.arrivals_a.len().max(shared.arrivals_b.len());
    let cycle_ms = cfg.gf.scheduling_cycle_ms();
    // Past this every pending user has hit the truncation horizon.
    let hard_stop = traffic_end + (cfg.delay_truncation_ms / cycle_ms).ceil() as usize + 2;
    let mut pred: Option<(f64, f64)> = None;
    let mut predictors = [shared.predictor.clone(), shared.predictor.clone()];

    for cycle in 0..hard_stop {
        if cycle >= traffic_end && chan_a.backlog() == 0 && chan_b.backlog() == 0 {
            break;
        }
        let (w_a, w_b, condition, hard_outage) = split(shared, pred)?;
        let c = cycle as u64;
        let step_a = chan_a.step(cycle, shared.arrivals_a.at(cycle), w_a, derive_seed(seed, TAG_A, c));
        let step_b = chan_b.step(cycle, shared.arrivals_b.at(cycle), w_b, derive_seed(seed, TAG_B, c));

        let mut observe = |pool: &mut HistoryPool, obs, w: u32| {
            let last = pool.values().last().copied().unwrap_or(0.0);
            let value = if w == 0 {
                last
            } else {
                match estimate(cfg.estimator, obs, &cfg.gf.with_w(w), shared.tables) {
                    Ok(r) => r.n_hat_real,
                    Err(Error::InconsistentObservation(_) | Error::Undefined(_)) => {
                        out.estimation_failures += 1;
                        last
                    }
                    Err(e) => return Err(e),
                }
            };
            pool.push(value);
            Ok(value)
        };
        let est_a = observe(&mut pool_a, &step_a.result.observation, w_a)?;
        let est_b = observe(&mut pool_b, &step_b.result.observation, w_b)?;

        out.records.push(CycleRecord {
            trial,
            cycle,
            active_a: step_a.result.n_active,
            active_b: step_b.result.n_active,
            est_a,
            est_b,
            pred_a: pred.map(|p| p.0),
            pred_b: pred.map(|p| p.1),
            w_a,
            w_b,
            condition,
            hard_outage,
        });
        out.delays_a.extend(step_a.finished.iter().map(|r| r.delay_ms));
        out.delays_b.extend(step_b.finished.iter().map(|r| r.delay_ms));
        if let Some(r) = cfg.refit_every {
            if (cycle + 1) % r == 0 {
                refit(&mut predictors[0], &pool_a, cfg);
                refit(&mut predictors[1], &pool_b, cfg);
            }
        }
        pred = Some((predictors[0].predict(&pool_a).value, predictors[1].predict(&pool_b).value));
    }
    Ok(out)
}

/// Replaces ARIMA coefficients with a fit on `pool`; keeps the old ones
/// when the history is too short or flat.
fn refit(predictor: &mut Predictor, pool: &HistoryPool, cfg: &ScenarioConfig) {
    if let Predictor::Arima(_) = predictor {
        let a = &cfg.arima;
        if let Ok(spec) = fit_training(pool.values(), a.p, a.d, a.q) {
            if spec.sigma2.is_finite() && spec.sigma2 > 0.0 {
                *predictor = Predictor::Arima(spec);
            }
        }
    }
}

fn summarize(
    cfg: &ScenarioConfig,
    predictor: &Predictor,
    records: &[CycleRecord],
    delays_a: &[Option<f64>],
    delays_b: &[Option<f64>],
    estimation_failures: usize,
) -> RunSummary {
    let est_err = |pick: fn(&CycleRecord) -> (f64, u32, u32)| {
        let errs: Vec<f64> = records
            .iter()
            .map(pick)
            .filter(|&(_, _, w)| w > 0)
            .map(|(e, n, _)| (e - f64::from(n)).abs())
            .collect();
        mean(&errs)
    };
    let pred_err = |pick: fn(&CycleRecord) -> (Option<f64>, u32)| {
        let errs: Vec<f64> = records
            .iter()
            .map(pick)
            .filter_map(|(p, n)| p.map(|p| relative_error(p, f64::from(n))))
            .collect();
        mean(&errs)
    };
    let mut conditions = BTreeMap::new();
    for r in records {
        if let Some(c) = r.condition {
            let key = serde_json::to_value(c)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            *conditions.entry(key).or_insert(0) += 1;
        }
    }
    RunSummary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        scheme: cfg.scheme,
        estimator: cfg.estimator,
        predictor: cfg.predictor,
        trials: cfg.trials,
        users_a: delays_a.len(),
        users_b: delays_b.len(),
        unserved_a: delays_a.iter().filter(|d| d.is_none()).count(),
        unserved_b: delays_b.iter().filter(|d| d.is_none()).count(),
        reliability_a_1ms: reliability_within(delays_a, 1.0),
        reliability_a_1375us: reliability_within(delays_a, 1.375),
        reliability_b_1ms: reliability_within(delays_b, 1.0),
        reliability_b_1375us: reliability_within(delays_b, 1.375),
        estimation_mae_a: est_err(|r| (r.est_a, r.active_a, r.w_a)),
        estimation_mae_b: est_err(|r| (r.est_b, r.active_b, r.w_b)),
        prediction_error_a: pred_err(|r| (r.pred_a, r.active_a)),
        prediction_error_b: pred_err(|r| (r.pred_b, r.active_b)),
        estimation_failures,
        conditions,
        hard_outages: records.iter().filter(|r| r.hard_outage).count(),
        arima: match predictor {
            Predictor::Arima(spec) => Some(spec.clone()),
            Predictor::Masw { .. } => None,
        },
    }
}
