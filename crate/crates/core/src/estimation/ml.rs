//! Maximum-likelihood load estimators built on the Markov step tables.

use super::markov::{ModelVariant, StepProbTable};
use super::starts::{composition_count, solve_starts, DEFAULT_ENUMERATION_CAP};
use super::{default_upper, EstimateReport, Scheme};
use crate::error::{Error, Result};
use crate::math::{round_count, LnFactorials};
use crate::sim::{CycleObservation, GfConfig, Occupation, SlotObservation};

/// Maximizer of a likelihood over a user-count range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlPoint {
    pub n: u32,
    pub likelihood: f64,
}

/// Scans `lo..=hi`, keeping the first (smallest) maximizer.
fn argmax(lo: u32, hi: u32, mut likelihood: impl FnMut(u32) -> f64) -> Option<MlPoint> {
    let mut best: Option<MlPoint> = None;
    for n in lo..=hi {
        let l = likelihood(n);
        if l > best.map_or(0.0, |b| b.likelihood) {
            best = Some(MlPoint { n, likelihood: l });
        }
    }
    best
}

fn search_upper(w: u32, lo: u32, n_max: Option<u32>, table: &StepProbTable) -> Result<u32> {
    let hi = n_max.unwrap_or_else(|| default_upper(w, lo)).min(table.n_max);
    if lo > hi {
        return Err(Error::InconsistentObservation(format!(
            "observation needs at least {lo} users but the search stops at {hi}"
        )));
    }
    Ok(hi)
}

fn expect_single_slot(table: &StepProbTable, w: u32) -> Result<()> {
    match table.variant {
        ModelVariant::SingleSlot { w: tw } if tw == w => Ok(()),
        other => Err(Error::InvalidConfig(format!(
            "need a single-slot table for W={w}, got {other:?}"
        ))),
    }
}

fn expect_occupation(cfg: &GfConfig, occupation: Occupation, scheme: Scheme) -> Result<()> {
    if cfg.occupation == occupation {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{scheme:?} requires {occupation:?} occupation"
        )))
    }
}

/// Most likely number of users in one slot given its `(A, B, C)`.
///
/// The scan starts at `A + 2B`, the fewest users consistent with the
/// observation.
pub fn ml_slot_count(obs: SlotObservation, table: &StepProbTable) -> Result<MlPoint> {
    ml_slot_count_upto(obs, table, None)
}

pub fn ml_slot_count_upto(
    obs: SlotObservation,
    table: &StepProbTable,
    n_max: Option<u32>,
) -> Result<MlPoint> {
    let w = obs.w();
    expect_single_slot(table, w)?;
    let lo = obs.min_users();
    let hi = search_upper(w, lo, n_max, table)?;
    argmax(lo, hi, |n| table.prob(n, obs)).ok_or_else(|| {
        Error::InconsistentObservation(format!("{obs:?} is unreachable for N in {lo}..={hi}"))
    })
}

/// SS-ML-LS: per-slot ML counts, then the least-squares start vector.
pub fn ss_ml_ls(obs: &CycleObservation, cfg: &GfConfig, table: &StepProbTable) -> Result<EstimateReport> {
    expect_occupation(cfg, Occupation::Adjacent, Scheme::SsMlLs)?;
    obs.check_against(cfg)?;
    let mut log_likelihood = 0.0;
    let per_slot = obs
        .slots
        .iter()
        .map(|&s| {
            let p = ml_slot_count(s, table)?;
            log_likelihood += p.likelihood.ln();
            Ok(f64::from(p.n))
        })
        .collect::<Result<Vec<f64>>>()?;
    let phi: Vec<f64> = solve_starts(&per_slot, cfg.t_slots, cfg.k)
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    let total: f64 = phi.iter().sum();
    Ok(EstimateReport {
        scheme: Scheme::SsMlLs,
        n_hat: round_count(total),
        n_hat_real: total,
        per_slot: Some(per_slot),
        start_vector: Some(phi),
        windows: Vec::new(),
        log_likelihood: Some(log_likelihood),
    })
}

/// MS-MLI: joint likelihood of all slots, summed over every start vector.
pub fn ms_mli(
    obs: &CycleObservation,
    cfg: &GfConfig,
    table: &StepProbTable,
    n_max: Option<u32>,
) -> Result<EstimateReport> {
    ms_mli_with_cap(obs, cfg, table, n_max, DEFAULT_ENUMERATION_CAP)
}

pub fn ms_mli_with_cap(
    obs: &CycleObservation,
    cfg: &GfConfig,
    table: &StepProbTable,
    n_max: Option<u32>,
    cap: u64,
) -> Result<EstimateReport> {
    expect_occupation(cfg, Occupation::Adjacent, Scheme::MsMli)?;
    obs.check_against(cfg)?;
    expect_single_slot(table, cfg.w)?;
    let t = cfg.t_slots as usize;
    let k = cfg.k as usize;
    let s = cfg.n_starts();

    // Each user is active in exactly K slots, so Σ n_t = K·N.
    let per_slot_lo: Vec<u32> = obs.slots.iter().map(SlotObservation::min_users).collect();
    let lo = per_slot_lo
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(per_slot_lo.iter().sum::<u32>().div_ceil(cfg.k));
    let hi = search_upper(cfg.w, lo, n_max, table)?;

    let count: u128 = (lo..=hi).map(|n| composition_count(n, s as u32)).sum();
    if count > u128::from(cap) {
        return Err(Error::EnumerationCap { count, cap });
    }

    // factors[t][n] = P((A_t, B_t, C_t) | n users in slot t)
    let factors: Vec<Vec<f64>> = obs
        .slots
        .iter()
        .map(|&o| (0..=hi).map(|n| table.prob(n, o)).collect())
        .collect();
    let lf = LnFactorials::new(hi as usize);
    let mut search = StartSearch {
        factors: &factors,
        lf: &lf,
        t,
        k,
        s,
        phi: vec![0; s],
    };

    let best = argmax(lo, hi, |n| search.likelihood(n)).ok_or_else(|| {
        Error::InconsistentObservation(format!("no start vector explains the cycle for N in {lo}..={hi}"))
    })?;
    Ok(EstimateReport {
        scheme: Scheme::MsMli,
        n_hat: best.n,
        n_hat_real: f64::from(best.n),
        per_slot: None,
        start_vector: None,
        windows: Vec::new(),
        log_likelihood: Some(best.likelihood.ln()),
    })
}

/// Depth-first walk over start vectors. Slot `t`'s load is fixed once the
/// start `min(t, S-1)` is assigned, so its factor is applied there and
/// zero-probability branches are cut early.
struct StartSearch<'a> {
    factors: &'a [Vec<f64>],
    lf: &'a LnFactorials,
    t: usize,
    k: usize,
    s: usize,
    phi: Vec<u32>,
}

impl StartSearch<'_> {
    fn likelihood(&mut self, n: u32) -> f64 {
        // Σ_φ Π_t P(obs_t | n_t(φ)) · n!/Πφ_r! / S^n
        let scale = self.lf.get(n as usize) - f64::from(n) * (self.s as f64).ln();
        self.descend(0, n, 1.0) * scale.exp()
    }

    fn slot_load(&self, slot: usize) -> usize {
        let first = (slot + 1).saturating_sub(self.k);
        let last = slot.min(self.s - 1);
        self.phi[first..=last].iter().map(|&x| x as usize).sum()
    }

    fn descend(&mut self, r: usize, remaining: u32, acc: f64) -> f64 {
        let choices = if r + 1 == self.s { remaining..=remaining } else { 0..=remaining };
        let mut total = 0.0;
        for x in choices {
            self.phi[r] = x;
            let mut p = acc * (-self.lf.get(x as usize)).exp();
            let finalized = if r + 1 == self.s { r..self.t } else { r..r + 1 };
            for slot in finalized {
                p *= self.factors[slot][self.slot_load(slot)];
                if p == 0.0 {
                    break;
                }
            }
            if p == 0.0 {
                continue;
            }
            total += if r + 1 == self.s {
                p
            } else {
                self.descend(r + 1, remaining - x, p)
            };
        }
        total
    }
}

/// MS-MLD: ML on the whole-cycle totals `(ΣA, ΣB, ΣC)`.
pub fn ms_mld(
    obs: &CycleObservation,
    cfg: &GfConfig,
    table: &StepProbTable,
    n_max: Option<u32>,
) -> Result<EstimateReport> {
    expect_occupation(cfg, Occupation::Arbitrary, Scheme::MsMld)?;
    obs.check_against(cfg)?;
    match table.variant {
        ModelVariant::WholeCycle { w, t, k } if w == cfg.w && t == cfg.t_slots && k == cfg.k => {}
        other => {
            return Err(Error::InvalidConfig(format!(
                "need a whole-cycle table for W={} T={} K={}, got {other:?}",
                cfg.w, cfg.t_slots, cfg.k
            )))
        }
    }
    let totals = obs.totals();
    let lo = totals.min_users().div_ceil(cfg.k);
    let hi = search_upper(cfg.w, lo, n_max, table)?;
    let best = argmax(lo, hi, |n| table.prob(n, totals)).ok_or_else(|| {
        Error::InconsistentObservation(format!("{totals:?} is unreachable for N in {lo}..={hi}"))
    })?;
    Ok(EstimateReport {
        scheme: Scheme::MsMld,
        n_hat: best.n,
        n_hat_real: f64::from(best.n),
        per_slot: None,
        start_vector: None,
        windows: Vec::new(),
        log_likelihood: Some(best.likelihood.ln()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::markov::{build_single_slot_model, build_whole_cycle_model};

    fn cfg(w: u32, t: u32, k: u32, occupation: Occupation) -> GfConfig {
        GfConfig {
            w,
            t_slots: t,
            k,
            occupation,
            slot_ms: 0.125,
            gap_slots: 2,
        }
    }

    #[test]
    fn slot_ml_examples() {
        let (_, table) = build_single_slot_model(2, 8).unwrap();
        assert_eq!(ml_slot_count(SlotObservation::idle(2), &table).unwrap().n, 0);
        let p = ml_slot_count(SlotObservation::new(2, 0, 0), &table).unwrap();
        assert_eq!((p.n, p.likelihood), (2, 0.5));
        let p = ml_slot_count(SlotObservation::new(0, 1, 1), &table).unwrap();
        assert_eq!((p.n, p.likelihood), (2, 0.5));
        assert_eq!(table.prob(3, SlotObservation::new(0, 1, 1)), 0.25);
    }

    #[test]
    fn slot_ml_rejects_wrong_table() {
        let (_, table) = build_single_slot_model(3, 8).unwrap();
        assert!(ml_slot_count(SlotObservation::new(2, 0, 0), &table).is_err());
    }

    #[test]
    fn slot_ml_range_too_small() {
        let (_, table) = build_single_slot_model(4, 3).unwrap();
        // Needs 6 users, table stops at 3.
        assert!(matches!(
            ml_slot_count(SlotObservation::new(0, 3, 1), &table),
            Err(Error::InconsistentObservation(_))
        ));
    }

    #[test]
    fn ss_ml_ls_idle_cycle() {
        let c = cfg(4, 4, 2, Occupation::Adjacent);
        let (_, table) = build_single_slot_model(4, 16).unwrap();
        let r = ss_ml_ls(&CycleObservation::idle(4, 4), &c, &table).unwrap();
        assert_eq!(r.n_hat, 0);
        assert!(r.start_vector.unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ss_ml_ls_rejects_arbitrary() {
        let c = cfg(4, 4, 2, Occupation::Arbitrary);
        let (_, table) = build_single_slot_model(4, 16).unwrap();
        assert!(ss_ml_ls(&CycleObservation::idle(4, 4), &c, &table).is_err());
    }

    #[test]
    fn ms_mli_idle_cycle() {
        let c = cfg(3, 4, 2, Occupation::Adjacent);
        let (_, table) = build_single_slot_model(3, 12).unwrap();
        assert_eq!(ms_mli(&CycleObservation::idle(3, 4), &c, &table, None).unwrap().n_hat, 0);
    }

    #[test]
    fn ms_mli_two_rbs_two_slots() {
        let c = cfg(2, 2, 1, Occupation::Adjacent);
        let (_, table) = build_single_slot_model(2, 8).unwrap();
        let obs = CycleObservation {
            slots: vec![SlotObservation::new(2, 0, 0), SlotObservation::idle(2)],
        };
        let r = ms_mli(&obs, &c, &table, None).unwrap();
        assert_eq!(r.n_hat, 2);
        assert!((r.log_likelihood.unwrap() - 0.125f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ms_mli_k_equals_t_is_joint_slot_ml() {
        let c = cfg(4, 3, 3, Occupation::Adjacent);
        let (_, table) = build_single_slot_model(4, 16).unwrap();
        let obs = CycleObservation {
            slots: vec![
                SlotObservation::new(2, 1, 1),
                SlotObservation::new(0, 2, 2),
                SlotObservation::new(1, 1, 2),
            ],
        };
        let r = ms_mli(&obs, &c, &table, None).unwrap();
        let joint = |n| obs.slots.iter().map(|&o| table.prob(n, o)).product::<f64>();
        let best = (0..=12).fold(0, |b, n| if joint(n) > joint(b) { n } else { b });
        assert_eq!(r.n_hat, best);
    }

    #[test]
    fn ms_mli_cap() {
        let c = cfg(20, 8, 2, Occupation::Adjacent);
        let (_, table) = build_single_slot_model(20, 80).unwrap();
        let obs = CycleObservation {
            slots: vec![SlotObservation::new(6, 3, 11); 8],
        };
        assert!(matches!(
            ms_mli(&obs, &c, &table, None),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn ms_mld_examples() {
        let c = cfg(1, 2, 2, Occupation::Arbitrary);
        let (_, table) = build_whole_cycle_model(1, 2, 2, 8).unwrap();
        let obs = |a, b, cc| CycleObservation {
            slots: vec![SlotObservation::new(a, b, cc), SlotObservation::idle(1)],
        };
        // Totals only matter; split them across two W=1 slots.
        assert_eq!(ms_mld(&CycleObservation::idle(1, 2), &c, &table, None).unwrap().n_hat, 0);
        let two_collisions = CycleObservation {
            slots: vec![SlotObservation::new(0, 1, 0); 2],
        };
        assert_eq!(ms_mld(&two_collisions, &c, &table, None).unwrap().n_hat, 2);
        let two_success = CycleObservation {
            slots: vec![SlotObservation::new(1, 0, 0); 2],
        };
        assert_eq!(ms_mld(&two_success, &c, &table, None).unwrap().n_hat, 1);
        // A lone success with an idle RB cannot happen with K=2 picks of 2 RBs.
        assert!(ms_mld(&obs(1, 0, 0), &c, &table, None).is_err());
    }
}
