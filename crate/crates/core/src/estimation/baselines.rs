//! Moment-matching (MSEM) and idle-count (ISCE) baselines.

use serde::{Deserialize, Serialize};

use super::{default_upper, EstimateReport, Scheme};
use crate::error::{Error, Result};
use crate::math::round_count;
use crate::sim::{CycleObservation, GfConfig, Occupation, SlotObservation};

/// One MSEM window: `len` consecutive slots from `start` (0-based) and the
/// user count `theta` fitted to their summed observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsemWindow {
    pub start: u32,
    pub len: u32,
    pub theta: u32,
}

/// Expected `(A, B, C)` when `n` users each pick one of `rbs` RBs.
pub fn msem_means(n: u32, rbs: f64) -> (f64, f64, f64) {
    if n == 0 {
        return (0.0, 0.0, rbs);
    }
    let q = 1.0 - 1.0 / rbs;
    let a = f64::from(n) * q.powi(n as i32 - 1);
    let c = rbs * q.powi(n as i32);
    (a, rbs - a - c, c)
}

/// `argmin_N` of the squared distance between `obs` and the means over
/// `rbs` RBs, scanning `0..=hi`. Ties go to the smaller `N`.
pub fn msem_fit(obs: SlotObservation, rbs: u32, hi: u32) -> u32 {
    let rbs = f64::from(rbs);
    let (a, b, c) = (f64::from(obs.a), f64::from(obs.b), f64::from(obs.c));
    let mut best = (0, f64::INFINITY);
    for n in 0..=hi {
        let (ma, mb, mc) = msem_means(n, rbs);
        let d = (a - ma).powi(2) + (b - mb).powi(2) + (c - mc).powi(2);
        if d < best.1 {
            best = (n, d);
        }
    }
    best.0
}

/// The `(start, len)` windows: leading partial windows from slot 0, every
/// full `K`-window, then trailing partial windows ending at the last slot.
pub fn msem_windows(t_slots: u32, k: u32) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = (1..k).map(|e| (0, e)).collect();
    out.extend((0..=t_slots - k).map(|r| (r, k)));
    out.extend((t_slots - k + 1..t_slots).map(|r| (r, t_slots - r)));
    out
}

pub fn msem(obs: &CycleObservation, cfg: &GfConfig) -> Result<EstimateReport> {
    if cfg.occupation != Occupation::Adjacent {
        return Err(Error::InvalidConfig("MSEM requires adjacent occupation".into()));
    }
    obs.check_against(cfg)?;
    let windows: Vec<MsemWindow> = msem_windows(cfg.t_slots, cfg.k)
        .into_iter()
        .map(|(start, len)| {
            let summed = obs.slots[start as usize..(start + len) as usize]
                .iter()
                .fold(SlotObservation::new(0, 0, 0), |acc, s| {
                    SlotObservation::new(acc.a + s.a, acc.b + s.b, acc.c + s.c)
                });
            let rbs = len * cfg.w;
            let theta = msem_fit(summed, rbs, default_upper(rbs, summed.min_users()));
            MsemWindow { start, len, theta }
        })
        .collect();
    let total = windows.iter().map(|w| f64::from(w.theta)).sum::<f64>() / f64::from(cfg.k * cfg.k);
    Ok(EstimateReport {
        scheme: Scheme::Msem,
        n_hat: round_count(total),
        n_hat_real: total,
        per_slot: None,
        start_vector: None,
        windows,
        log_likelihood: None,
    })
}

/// ISCE with the default saturation bound for slots with no idle RB.
pub fn isce(obs: &CycleObservation, cfg: &GfConfig) -> Result<EstimateReport> {
    isce_with_cap(obs, cfg, None)
}

/// `n_t = ln(C_t/W) / ln((W-1)/W)`, and `N = round(Σ n_t / K)`.
///
/// A slot with `C_t = 0` is assigned `n_max`, or `max(3W, 2(A_t+2B_t))`
/// when none is given.
pub fn isce_with_cap(obs: &CycleObservation, cfg: &GfConfig, n_max: Option<u32>) -> Result<EstimateReport> {
    if cfg.w < 2 {
        return Err(Error::Undefined("ISCE needs W >= 2".into()));
    }
    obs.check_against(cfg)?;
    let w = f64::from(cfg.w);
    let denom = ((w - 1.0) / w).ln();
    let per_slot: Vec<f64> = obs
        .slots
        .iter()
        .map(|s| match s.c {
            0 => f64::from(n_max.unwrap_or_else(|| default_upper(cfg.w, s.min_users()))),
            c if c == cfg.w => 0.0,
            c => (f64::from(c) / w).ln() / denom,
        })
        .collect();
    let total = per_slot.iter().sum::<f64>() / f64::from(cfg.k);
    Ok(EstimateReport {
        scheme: Scheme::Isce,
        n_hat: round_count(total),
        n_hat_real: total,
        per_slot: Some(per_slot),
        start_vector: None,
        windows: Vec::new(),
        log_likelihood: None,
    })
}
