//! Markov models of RB states under successive user arrivals.
//!
//! Each step adds one user. In the single-slot model the user takes one of
//! `W` RBs; in the whole-cycle model it takes `K` distinct RBs out of the
//! `W·T` RBs of the cycle. A state is the triple `(a, b, c)` of success,
//! collision and idle RBs, and `N` steps from the all-idle state give the
//! distribution of what the base station observes with `N` users.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Binomials;
use crate::sim::SlotObservation;

/// A Markov state is the same triple the base station observes.
pub type RbState = SlotObservation;

/// Default cap on the number of stored `(N, state)` entries of a table.
pub const DEFAULT_STATE_BOUND: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    SingleSlot { w: u32 },
    WholeCycle { w: u32, t: u32, k: u32 },
}

impl ModelVariant {
    /// Total RBs the state counts: `W` or `W·T`.
    pub fn pool(&self) -> u32 {
        match *self {
            ModelVariant::SingleSlot { w } => w,
            ModelVariant::WholeCycle { w, t, .. } => w * t,
        }
    }

    /// RBs taken per step: 1 or `K`.
    pub fn picks(&self) -> u32 {
        match *self {
            ModelVariant::SingleSlot { .. } => 1,
            ModelVariant::WholeCycle { k, .. } => k,
        }
    }

    /// RBs per slot.
    pub fn w(&self) -> u32 {
        match *self {
            ModelVariant::SingleSlot { w } | ModelVariant::WholeCycle { w, .. } => w,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarkovModel {
    variant: ModelVariant,
    binom: Binomials,
}

impl MarkovModel {
    pub fn new(variant: ModelVariant) -> Result<Self> {
        match variant {
            ModelVariant::SingleSlot { w: 0 } => {
                Err(Error::InvalidConfig("single-slot model needs w >= 1".into()))
            }
            ModelVariant::WholeCycle { w, t, k } if w == 0 || k == 0 || k > t => Err(
                Error::InvalidConfig(format!("whole-cycle model needs w >= 1 and 1 <= k <= t, got w={w} t={t} k={k}")),
            ),
            _ => Ok(Self {
                variant,
                binom: Binomials::new(variant.pool() as usize),
            }),
        }
    }

    pub fn single_slot(w: u32) -> Result<Self> {
        Self::new(ModelVariant::SingleSlot { w })
    }

    pub fn whole_cycle(w: u32, t: u32, k: u32) -> Result<Self> {
        Self::new(ModelVariant::WholeCycle { w, t, k })
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn initial(&self) -> RbState {
        RbState::idle(self.variant.pool())
    }

    /// Every triple with `a + b + c` equal to the pool size.
    pub fn state_space(&self) -> impl Iterator<Item = RbState> + '_ {
        let pool = self.variant.pool();
        (0..=pool).flat_map(move |a| (0..=pool - a).map(move |b| RbState::new(a, b, pool - a - b)))
    }

    /// Nonzero one-step moves out of `s`.
    ///
    /// The user puts `x` of its picks on success RBs (turning them into
    /// collisions), `y` on idle RBs (new successes) and `z` on RBs that
    /// already collide, with probability `C(A,x) C(C,y) C(B,z) / C(pool, picks)`.
    /// With a single pick this is the stay / `C/W` / `A/W` kernel.
    pub fn transitions(&self, s: RbState) -> Vec<(RbState, f64)> {
        let k = self.variant.picks();
        let total = self.binom.get(self.variant.pool() as usize, k as usize);
        let mut out = Vec::new();
        for x in 0..=k.min(s.a) {
            for y in 0..=(k - x).min(s.c) {
                let z = k - x - y;
                if z > s.b {
                    continue;
                }
                let p = self.binom.get(s.a as usize, x as usize)
                    * self.binom.get(s.c as usize, y as usize)
                    * self.binom.get(s.b as usize, z as usize)
                    / total;
                if p > 0.0 {
                    out.push((RbState::new(s.a - x + y, s.b + x, s.c - y), p));
                }
            }
        }
        out
    }

    /// Builds the `N`-step distributions for `N = 0..=n_max`.
    pub fn step_table(&self, n_max: u32, state_bound: usize) -> Result<StepProbTable> {
        let pool = self.variant.pool() as usize;
        let side = pool + 1;
        let mut scratch = vec![0.0f64; side * side];
        let mut touched: Vec<usize> = Vec::new();
        let init = self.initial();
        let mut steps = vec![vec![(pack(init), 1.0)]];
        let mut stored = 1usize;
        for _ in 0..n_max {
            let prev = steps.last().expect("table starts with N = 0");
            for &(key, p) in prev {
                for (next, q) in self.transitions(unpack(key, pool as u32)) {
                    let idx = next.a as usize * side + next.b as usize;
                    if scratch[idx] == 0.0 {
                        touched.push(idx);
                    }
                    scratch[idx] += p * q;
                }
            }
            touched.sort_unstable();
            let row: Vec<(u64, f64)> = touched
                .iter()
                .map(|&idx| {
                    let v = std::mem::take(&mut scratch[idx]);
                    (pack_ab((idx / side) as u32, (idx % side) as u32), v)
                })
                .filter(|&(_, v)| v > 0.0)
                .collect();
            touched.clear();
            stored += row.len();
            if stored > state_bound {
                return Err(Error::StateSpaceTooLarge {
                    states: stored,
                    bound: state_bound,
                });
            }
            steps.push(row);
        }
        Ok(StepProbTable {
            variant: self.variant,
            n_max,
            steps,
        })
    }
}

fn pack(s: RbState) -> u64 {
    pack_ab(s.a, s.b)
}

fn pack_ab(a: u32, b: u32) -> u64 {
    (u64::from(a) << 32) | u64::from(b)
}

fn unpack(key: u64, pool: u32) -> RbState {
    let a = (key >> 32) as u32;
    let b = key as u32;
    RbState::new(a, b, pool - a - b)
}

/// Probability of each reachable state after `N` steps from all-idle, for
/// every `N` up to `n_max`. Rows are sorted by `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProbTable {
    pub variant: ModelVariant,
    pub n_max: u32,
    pub(crate) steps: Vec<Vec<(u64, f64)>>,
}

impl StepProbTable {
    pub fn prob(&self, n: u32, s: RbState) -> f64 {
        let pool = self.variant.pool();
        if n > self.n_max || s.a + s.b + s.c != pool {
            return 0.0;
        }
        let row = &self.steps[n as usize];
        let key = pack(s);
        match row.binary_search_by_key(&key, |&(k, _)| k) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    /// The `N`-step distribution as `(state, probability)` pairs.
    pub fn distribution(&self, n: u32) -> impl Iterator<Item = (RbState, f64)> + '_ {
        let pool = self.variant.pool();
        self.steps[n as usize]
            .iter()
            .map(move |&(key, p)| (unpack(key, pool), p))
    }

    /// Number of stored `(N, state)` entries.
    pub fn len(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Single-slot model and its table, built from `(0, 0, W)`.
pub fn build_single_slot_model(w: u32, n_max: u32) -> Result<(MarkovModel, StepProbTable)> {
    let model = MarkovModel::single_slot(w)?;
    let table = model.step_table(n_max, DEFAULT_STATE_BOUND)?;
    Ok((model, table))
}

/// Whole-cycle model and its table, built from `(0, 0, W·T)`.
pub fn build_whole_cycle_model(
    w: u32,
    t: u32,
    k: u32,
    n_max: u32,
) -> Result<(MarkovModel, StepProbTable)> {
    let model = MarkovModel::whole_cycle(w, t, k)?;
    let table = model.step_table(n_max, DEFAULT_STATE_BOUND)?;
    Ok((model, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moves(model: &MarkovModel, s: RbState) -> Vec<(RbState, f64)> {
        let mut m = model.transitions(s);
        m.sort_by_key(|(s, _)| (s.a, s.b));
        m
    }

    #[test]
    fn first_user_always_lands_idle() {
        let (_, table) = build_single_slot_model(5, 3).unwrap();
        assert_eq!(table.prob(0, RbState::idle(5)), 1.0);
        assert_eq!(table.prob(1, RbState::new(1, 0, 4)), 1.0);
    }

    #[test]
    fn two_rbs_two_users() {
        let (_, table) = build_single_slot_model(2, 4).unwrap();
        assert_eq!(table.prob(2, RbState::new(2, 0, 0)), 0.5);
        assert_eq!(table.prob(2, RbState::new(0, 1, 1)), 0.5);
        assert_eq!(table.distribution(2).count(), 2);
    }

    #[test]
    fn single_slot_kernel_moves() {
        let model = MarkovModel::single_slot(2).unwrap();
        assert_eq!(
            moves(&model, RbState::new(1, 0, 1)),
            vec![(RbState::new(0, 1, 1), 0.5), (RbState::new(2, 0, 0), 0.5)]
        );
        // Stay probability is B/W.
        let m = moves(&MarkovModel::single_slot(4).unwrap(), RbState::new(1, 2, 1));
        assert!(m.contains(&(RbState::new(1, 2, 1), 0.5)));
        assert!(m.contains(&(RbState::new(2, 2, 0), 0.25)));
        assert!(m.contains(&(RbState::new(0, 3, 1), 0.25)));
    }

    #[test]
    fn whole_cycle_forced_moves() {
        let model = MarkovModel::whole_cycle(1, 2, 2).unwrap();
        assert_eq!(moves(&model, RbState::new(0, 0, 2)), vec![(RbState::new(2, 0, 0), 1.0)]);
        assert_eq!(moves(&model, RbState::new(2, 0, 0)), vec![(RbState::new(0, 2, 0), 1.0)]);
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        // Vandermonde: sum over x+y+z=K of C(A,x) C(C,y) C(B,z) = C(WT, K).
        for w in 1..=3 {
            for t in 1..=4 {
                for k in 1..=t {
                    let model = MarkovModel::whole_cycle(w, t, k).unwrap();
                    for s in model.state_space() {
                        let sum: f64 = model.transitions(s).iter().map(|(_, p)| p).sum();
                        assert!((sum - 1.0).abs() < 1e-12, "w={w} t={t} k={k} {s:?}: {sum}");
                        assert!(model.transitions(s).iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
                    }
                }
            }
        }
    }

    #[test]
    fn table_rows_are_distributions() {
        let (_, table) = build_whole_cycle_model(3, 4, 2, 12).unwrap();
        for n in 0..=12 {
            let s: f64 = table.distribution(n).map(|(_, p)| p).sum();
            assert!((s - 1.0).abs() < 1e-9);
            for (st, _) in table.distribution(n) {
                assert_eq!(st.a + st.b + st.c, 12);
            }
        }
    }

    #[test]
    fn memory_bound_is_enforced() {
        let model = MarkovModel::whole_cycle(10, 8, 4).unwrap();
        assert!(matches!(
            model.step_table(40, 1_000),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn rejects_degenerate_models() {
        assert!(MarkovModel::single_slot(0).is_err());
        assert!(MarkovModel::whole_cycle(2, 3, 4).is_err());
    }
}
