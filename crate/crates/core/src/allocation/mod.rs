//! Splitting a cycle's RBs between a bursty event A and a uniform event B.

mod failprob;

use serde::{Deserialize, Serialize};

pub use failprob::{
    fail_prob, fail_prob_adjacent, fail_prob_adjacent_with_cap, fail_prob_arbitrary, required_rbs,
    FailProbCache, RbRequirement,
};

use crate::error::{Error, Result};
use crate::math::round_count;
use crate::sim::GfConfig;

/// RBs kept for event A when no A users are predicted.
pub const DEFAULT_IDLE_FLOOR: u32 = 2;

/// Step of the δ grid.
pub const DELTA_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosContract {
    pub reliability_min: f64,
    pub reliability_ideal: Option<f64>,
    /// Lower rank wins.
    pub priority: u32,
}

impl QosContract {
    pub fn new(reliability_min: f64) -> Self {
        Self {
            reliability_min,
            reliability_ideal: None,
            priority: 0,
        }
    }

    pub fn with_ideal(mut self, ideal: f64) -> Self {
        self.reliability_ideal = Some(ideal);
        self
    }

    pub fn with_priority(mut self, priority: u32) -> Self {
        self.priority = priority;
        self
    }

    pub fn ideal(&self) -> f64 {
        self.reliability_ideal.unwrap_or(self.reliability_min)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_min = self.reliability_min > 0.0 && self.reliability_min < 1.0;
        let ok_ideal = self
            .reliability_ideal
            .is_none_or(|i| i >= self.reliability_min && i < 1.0);
        if ok_min && ok_ideal {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "contract needs 0 < min <= ideal < 1, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Cond1,
    Cond2,
    Cond3Outage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub w1: u32,
    pub w2: u32,
    pub condition: Condition,
    /// Reliabilities `1 - fail_prob` at `(w1, n_a)` and `(w2, n_b)`.
    pub expected_qos: (f64, f64),
    pub delta: Option<f64>,
    pub w_req: u32,
    pub w_q2_ideal: u32,
    pub w_q2_min: u32,
}

/// Allocation state for one GF configuration: the RB budget, the idle
/// floor and a failure-probability cache reused across cycles.
#[derive(Debug)]
pub struct Allocator {
    pub cfg: GfConfig,
    pub w_all: u32,
    pub idle_floor: u32,
    cache: FailProbCache,
}

impl Allocator {
    pub fn new(cfg: GfConfig, w_all: u32) -> Self {
        Self {
            cfg,
            w_all,
            idle_floor: DEFAULT_IDLE_FLOOR,
            cache: FailProbCache::new(),
        }
    }

    pub fn with_idle_floor(mut self, floor: u32) -> Self {
        self.idle_floor = floor;
        self
    }

    pub fn fail_prob(&self, w: u32, n: u32) -> Result<f64> {
        self.cache.get(w, n, self.cfg.k, self.cfg.t_slots, self.cfg.occupation)
    }

    /// Smallest `W <= w_all + 1` meeting `reliability`; `w_all + 1` means
    /// the budget cannot meet it.
    pub fn required(&self, reliability: f64, n: u32) -> Result<u32> {
        let r = required_rbs(
            reliability,
            n,
            self.cfg.k,
            self.cfg.t_slots,
            self.cfg.occupation,
            self.w_all + 1,
            &self.cache,
        )?;
        Ok(r.w)
    }

    fn reliability(&self, w: u32, n: u32) -> Result<f64> {
        Ok(1.0 - self.fail_prob(w, n)?)
    }

    /// Three-case split for predicted loads `pred_a`, `pred_b` (rounded
    /// half-up to user counts).
    pub fn allocate(&self, pred_a: f64, pred_b: f64, contracts: &(QosContract, QosContract)) -> Result<AllocationDecision> {
        let (qa, qb) = contracts;
        qa.validate()?;
        qb.validate()?;
        let (n_a, n_b) = (round_count(pred_a), round_count(pred_b));
        let w_q2_ideal = self.required(qb.ideal(), n_b)?;
        let w_q2_min = self.required(qb.reliability_min, n_b)?;
        if self.w_all < w_q2_min + self.idle_floor {
            return Err(Error::Outage(format!(
                "{} RBs cannot cover event B's minimum ({w_q2_min}) plus the reserve of {}",
                self.w_all, self.idle_floor
            )));
        }
        // The floor also covers a single predicted user, who needs only 1 RB.
        let w_req = if n_a == 0 {
            self.idle_floor
        } else {
            self.required(qa.reliability_min, n_a)?.max(self.idle_floor)
        };
        let w_neg_max = w_q2_ideal - w_q2_min;
        let room = i64::from(self.w_all) - i64::from(w_q2_ideal);
        let req = i64::from(w_req);
        let (w1, w2, condition) = if req <= room {
            (w_req, w_q2_ideal, Condition::Cond1)
        } else if req <= room + i64::from(w_neg_max) {
            (w_req, self.w_all - w_req, Condition::Cond2)
        } else {
            (self.w_all - w_q2_min, w_q2_min, Condition::Cond3Outage)
        };
        Ok(AllocationDecision {
            w1,
            w2,
            condition,
            expected_qos: (self.reliability(w1, n_a)?, self.reliability(w2, n_b)?),
            delta: None,
            w_req,
            w_q2_ideal,
            w_q2_min,
        })
    }
}

/// One-shot [`Allocator::allocate`] with the default idle floor.
pub fn allocate(
    pred_a: f64,
    pred_b: f64,
    contracts: &(QosContract, QosContract),
    w_all: u32,
    cfg: &GfConfig,
) -> Result<AllocationDecision> {
    Allocator::new(*cfg, w_all).allocate(pred_a, pred_b, contracts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegotiationPoint {
    pub delta: f64,
    pub w_a: u32,
    pub w_b: u32,
    pub fail_a: f64,
    pub fail_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Negotiation {
    pub curve: Vec<NegotiationPoint>,
    /// Smallest δ meeting both minimum reliabilities; `None` is an outage.
    pub delta: Option<f64>,
}

impl Negotiation {
    pub fn is_outage(&self) -> bool {
        self.delta.is_none()
    }
}

/// Moves `round(w_a·δ)` RBs from A to B for `δ = 0, 0.05, …, 1`.
///
/// A keeps `w_a - round(w_a·δ)` so the total never exceeds `w_a + w_b`.
pub fn negotiate_delta(
    w_a: u32,
    w_b: u32,
    pred_a: f64,
    pred_b: f64,
    contracts: &(QosContract, QosContract),
    cfg: &GfConfig,
) -> Result<Negotiation> {
    let (n_a, n_b) = (round_count(pred_a), round_count(pred_b));
    let cache = FailProbCache::new();
    let fp = |w, n| cache.get(w, n, cfg.k, cfg.t_slots, cfg.occupation);
    let steps = (1.0 / DELTA_STEP).round() as u32;
    let mut curve = Vec::with_capacity(steps as usize + 1);
    for i in 0..=steps {
        let delta = f64::from(i) / f64::from(steps);
        let moved = round_count(f64::from(w_a) * delta).min(w_a);
        let (wa, wb) = (w_a - moved, w_b + moved);
        curve.push(NegotiationPoint {
            delta,
            w_a: wa,
            w_b: wb,
            fail_a: fp(wa, n_a)?,
            fail_b: fp(wb, n_b)?,
        });
    }
    let (qa, qb) = contracts;
    let delta = curve
        .iter()
        .find(|p| p.fail_a <= 1.0 - qa.reliability_min && p.fail_b <= 1.0 - qb.reliability_min)
        .map(|p| p.delta);
    Ok(Negotiation { curve, delta })
}
