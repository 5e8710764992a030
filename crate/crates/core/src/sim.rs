//! One access cycle of K-repetition grant-free access, and the retry chain
//! that strings cycles together.
//!
//! Slots and RBs are indexed from 0. A user's replica succeeds when it is the
//! only one on its RB in that slot; the user succeeds when any replica does.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::ArrivalTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupation {
    /// K consecutive slots starting anywhere in the first `T - K + 1`.
    Adjacent,
    /// Any K distinct slots of the cycle.
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfConfig {
    /// RBs per slot.
    pub w: u32,
    /// Slots per access cycle.
    pub t_slots: u32,
    /// Repetitions per user.
    pub k: u32,
    pub occupation: Occupation,
    pub slot_ms: f64,
    /// Broadcast slots between two access cycles.
    pub gap_slots: u32,
}

impl GfConfig {
    /// 48 RBs, 8 slots of 0.125 ms, 8 repetitions, 2 broadcast slots.
    pub fn reference() -> Self {
        Self {
            w: 48,
            t_slots: 8,
            k: 8,
            occupation: Occupation::Adjacent,
            slot_ms: 0.125,
            gap_slots: 2,
        }
    }

    pub fn with_w(mut self, w: u32) -> Self {
        self.w = w;
        self
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn with_occupation(mut self, occupation: Occupation) -> Self {
        self.occupation = occupation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.w == 0 {
            return Err(Error::InvalidConfig("w must be at least 1".into()));
        }
        self.validate_shape()
    }

    /// Everything except `w`, which the allocator may set to zero.
    pub(crate) fn validate_shape(&self) -> Result<()> {
        if self.k == 0 || self.k > self.t_slots {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k <= t_slots, got k={} t_slots={}",
                self.k, self.t_slots
            )));
        }
        if !(self.slot_ms.is_finite() && self.slot_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "slot_ms must be positive, got {}",
                self.slot_ms
            )));
        }
        Ok(())
    }

    /// Number of admissible start slots, `T - K + 1`.
    pub fn n_starts(&self) -> usize {
        (self.t_slots - self.k + 1) as usize
    }

    pub fn scheduling_cycle_ms(&self) -> f64 {
        f64::from(self.t_slots + self.gap_slots) * self.slot_ms
    }
}

/// Counts of success, collision and idle RBs in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SlotObservation {
    pub a: u32,
    pub b: u32,
    pub c: u32,
}

impl SlotObservation {
    pub fn new(a: u32, b: u32, c: u32) -> Self {
        Self { a, b, c }
    }

    pub fn idle(w: u32) -> Self {
        Self { a: 0, b: 0, c: w }
    }

    pub fn w(&self) -> u32 {
        self.a + self.b + self.c
    }

    /// Fewest users that can produce this slot: one per success RB, two per
    /// collision RB.
    pub fn min_users(&self) -> u32 {
        self.a + 2 * self.b
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CycleObservation {
    pub slots: Vec<SlotObservation>,
}

impl CycleObservation {
    pub fn idle(w: u32, t_slots: u32) -> Self {
        Self {
            slots: vec![SlotObservation::idle(w); t_slots as usize],
        }
    }

    /// Whole-cycle totals `(ΣA_t, ΣB_t, ΣC_t)`.
    pub fn totals(&self) -> SlotObservation {
        self.slots.iter().fold(SlotObservation::default(), |acc, s| {
            SlotObservation::new(acc.a + s.a, acc.b + s.b, acc.c + s.c)
        })
    }

    pub fn check_against(&self, cfg: &GfConfig) -> Result<()> {
        if self.slots.len() != cfg.t_slots as usize {
            return Err(Error::InconsistentObservation(format!(
                "expected {} slots, got {}",
                cfg.t_slots,
                self.slots.len()
            )));
        }
        if let Some(s) = self.slots.iter().find(|s| s.w() != cfg.w) {
            return Err(Error::InconsistentObservation(format!(
                "slot {s:?} does not add up to W={}",
                cfg.w
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotChoice {
    Adjacent { start: u32 },
    Arbitrary { slots: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub user_id: u64,
    pub choice: SlotChoice,
    pub succeeded: bool,
    pub first_success_slot: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleResult {
    pub observation: CycleObservation,
    pub outcomes: Vec<UserOutcome>,
    /// Ground-truth number of active users.
    pub n_active: u32,
    /// Population size, informational only.
    pub n_total_pop: u32,
}

/// Mixes a base seed with a tag and an index (SplitMix64 finalizer).
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reusable buffers for simulating cycles without per-cycle allocation.
///
/// Every user draws from its own ChaCha8 stream (`stream = user index`)
/// under the cycle seed, so a user's choices do not depend on how many other
/// users are active.
#[derive(Debug, Default)]
pub struct CycleEngine {
    occupancy: Vec<u16>,
    /// `n * K` chosen slots, user-major, ascending within a user.
    slots: Vec<u32>,
    /// `n * K` chosen RBs, aligned with `slots`.
    rbs: Vec<u32>,
    first_success: Vec<Option<u32>>,
    n: usize,
    k: usize,
    w: usize,
    t: usize,
}

impl CycleEngine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Draws every user's replicas and resolves collisions.
    pub fn run(&mut self, cfg: &GfConfig, n_active: u32, seed: u64) {
        let (n, k, w, t) = (
            n_active as usize,
            cfg.k as usize,
            cfg.w as usize,
            cfg.t_slots as usize,
        );
        self.n = n;
        self.k = k;
        self.w = w;
        self.t = t;
        self.occupancy.clear();
        self.occupancy.resize(t * w, 0);
        self.slots.clear();
        self.rbs.clear();
        self.first_success.clear();
        if w == 0 {
            self.first_success.resize(n, None);
            return;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts = cfg.n_starts() as u32;
        for user in 0..n {
            rng.set_stream(user as u64);
            rng.set_word_pos(0);
            let base = self.slots.len();
            match cfg.occupation {
                Occupation::Adjacent => {
                    let start = if starts == 1 {
                        0
                    } else {
                        rng.random_range(0..starts)
                    };
                    self.slots.extend(start..start + cfg.k);
                }
                Occupation::Arbitrary => {
                    if k == t {
                        self.slots.extend(0..cfg.t_slots);
                    } else {
                        let mut picked: Vec<u32> = index::sample(&mut rng, t, k)
                            .into_iter()
                            .map(|s| s as u32)
                            .collect();
                        picked.sort_unstable();
                        self.slots.extend(picked);
                    }
                }
            }
            for i in base..base + k {
                let rb = rng.random_range(0..cfg.w);
                self.rbs.push(rb);
                let slot = self.slots[i] as usize;
                self.occupancy[slot * w + rb as usize] += 1;
            }
        }

        for user in 0..n {
            let base = user * k;
            let hit = (base..base + k).find(|&i| {
                self.occupancy[self.slots[i] as usize * w + self.rbs[i] as usize] == 1
            });
            self.first_success.push(hit.map(|i| self.slots[i]));
        }
    }

    pub fn n_failed(&self) -> usize {
        self.first_success.iter().filter(|s| s.is_none()).count()
    }

    pub fn first_success(&self) -> &[Option<u32>] {
        &self.first_success
    }

    pub fn observation(&self) -> CycleObservation {
        let slots = (0..self.t)
            .map(|slot| {
                let row = &self.occupancy[slot * self.w..(slot + 1) * self.w];
                let mut obs = SlotObservation::default();
                for &m in row {
                    match m {
                        0 => obs.c += 1,
                        1 => obs.a += 1,
                        _ => obs.b += 1,
                    }
                }
                obs
            })
            .collect();
        CycleObservation { slots }
    }

    /// Slots used by user `i` (ascending).
    pub fn user_slots(&self, i: usize) -> &[u32] {
        if self.w == 0 {
            return &[];
        }
        &self.slots[i * self.k..(i + 1) * self.k]
    }

    /// RBs used by user `i`, aligned with [`Self::user_slots`].
    pub fn user_rbs(&self, i: usize) -> &[u32] {
        if self.w == 0 {
            return &[];
        }
        &self.rbs[i * self.k..(i + 1) * self.k]
    }

    fn outcomes(&self, cfg: &GfConfig, ids: impl Iterator<Item = u64>) -> Vec<UserOutcome> {
        ids.take(self.n)
            .enumerate()
            .map(|(i, user_id)| {
                let slots = self.user_slots(i);
                let choice = match cfg.occupation {
                    Occupation::Adjacent => SlotChoice::Adjacent {
                        start: slots.first().copied().unwrap_or(0),
                    },
                    Occupation::Arbitrary => SlotChoice::Arbitrary {
                        slots: slots.to_vec(),
                    },
                };
                UserOutcome {
                    user_id,
                    choice,
                    succeeded: self.first_success[i].is_some(),
                    first_success_slot: self.first_success[i],
                }
            })
            .collect()
    }
}

/// Simulates one access cycle with `n_active` users. Deterministic in
/// `(cfg, n_active, seed)`.
pub fn simulate_cycle(cfg: &GfConfig, n_active: u32, seed: u64) -> Result<CycleResult> {
    cfg.validate()?;
    let mut engine = CycleEngine::new();
    engine.run(cfg, n_active, seed);
    Ok(CycleResult {
        observation: engine.observation(),
        outcomes: engine.outcomes(cfg, 0..u64::from(n_active)),
        n_active,
        n_total_pop: n_active,
    })
}

/// Delay of one user from arrival to first successful replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayRecord {
    pub user_id: u64,
    pub arrival_cycle: usize,
    /// `None` when the user was still unserved at the truncation horizon.
    pub delay_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct PendingUser {
    id: u64,
    arrival_cycle: usize,
}

/// What one cycle of an [`AccessChannel`] produced.
#[derive(Debug, Clone)]
pub struct ChannelStep {
    pub result: CycleResult,
    /// Users served this cycle and users dropped at the truncation horizon.
    pub finished: Vec<DelayRecord>,
}

/// A population of users on a shared RB pool. Failed users retry in the next
/// cycle with fresh draws, indistinguishable from new arrivals.
#[derive(Debug)]
pub struct AccessChannel {
    cfg: GfConfig,
    truncation_ms: f64,
    pending: Vec<PendingUser>,
    next_id: u64,
    engine: CycleEngine,
}

impl AccessChannel {
    /// `cfg.w` is ignored; each step supplies its own RB count.
    pub fn new(cfg: GfConfig, truncation_ms: f64) -> Result<Self> {
        cfg.validate_shape()?;
        if !(truncation_ms.is_finite() && truncation_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delay truncation must be positive, got {truncation_ms}"
            )));
        }
        Ok(Self {
            cfg,
            truncation_ms,
            pending: Vec::new(),
            next_id: 0,
            engine: CycleEngine::new(),
        })
    }

    pub fn backlog(&self) -> usize {
        self.pending.len()
    }

    /// Runs cycle `cycle` with `arrivals` new users on `w` RBs.
    pub fn step(&mut self, cycle: usize, arrivals: u32, w: u32, seed: u64) -> ChannelStep {
        for _ in 0..arrivals {
            self.pending.push(PendingUser {
                id: self.next_id,
                arrival_cycle: cycle,
            });
            self.next_id += 1;
        }
        let cfg = self.cfg.with_w(w);
        let active = std::mem::take(&mut self.pending);
        self.engine.run(&cfg, active.len() as u32, seed);

        let cycle_ms = cfg.scheduling_cycle_ms();
        let mut finished = Vec::new();
        for (user, hit) in active.iter().zip(self.engine.first_success()) {
            let waited = (cycle - user.arrival_cycle) as f64 * cycle_ms;
            match hit {
                Some(slot) => finished.push(DelayRecord {
                    user_id: user.id,
                    arrival_cycle: user.arrival_cycle,
                    delay_ms: Some(waited + f64::from(slot + 1) * cfg.slot_ms),
                }),
                None if waited + cycle_ms > self.truncation_ms => finished.push(DelayRecord {
                    user_id: user.id,
                    arrival_cycle: user.arrival_cycle,
                    delay_ms: None,
                }),
                None => self.pending.push(*user),
            }
        }
        let result = CycleResult {
            observation: if w == 0 {
                CycleObservation::idle(0, cfg.t_slots)
            } else {
                self.engine.observation()
            },
            outcomes: self.engine.outcomes(&cfg, active.iter().map(|u| u.id)),
            n_active: active.len() as u32,
            n_total_pop: self.next_id as u32,
        };
        ChannelStep { result, finished }
    }
}

/// Feeds `arrivals` through a fixed-size channel until every user is served
/// or truncated, returning one record per user in id order.
pub fn simulate_retry_chain(
    cfg: &GfConfig,
    arrivals: &ArrivalTrace,
    seed: u64,
    truncation_ms: f64,
) -> Result<Vec<DelayRecord>> {
    cfg.validate()?;
    let mut channel = AccessChannel::new(*cfg, truncation_ms)?;
    let mut records = Vec::with_capacity(arrivals.total() as usize);
    let mut cycle = 0;
    while cycle < arrivals.len() || channel.backlog() > 0 {
        let step = channel.step(cycle, arrivals.at(cycle), cfg.w, derive_seed(seed, 0, cycle as u64));
        records.extend(step.finished);
        cycle += 1;
    }
    records.sort_by_key(|r| r.user_id);
    Ok(records)
}
