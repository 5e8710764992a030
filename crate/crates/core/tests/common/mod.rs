//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

/// Exact state distribution as integer tuple counts over a known total,
/// indexed by `(a, b)` on a grid of `cells` RBs.
pub struct Tally {
    pub cells: u32,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Tally {
    pub fn new(cells: u32) -> Self {
        let side = cells as usize + 1;
        Self { cells, counts: vec![0; side * side], total: 0 }
    }

    fn idx(&self, a: u32, b: u32) -> usize {
        a as usize * (self.cells as usize + 1) + b as usize
    }

    pub fn add(&mut self, a: u32, b: u32, weight: u64) {
        let i = self.idx(a, b);
        self.counts[i] += weight;
    }

    pub fn prob(&self, s: (u32, u32, u32)) -> f64 {
        if s.0 + s.1 + s.2 != self.cells {
            return 0.0;
        }
        self.counts[self.idx(s.0, s.1)] as f64 / self.total as f64
    }

    pub fn states(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        let side = self.cells + 1;
        (0..self.counts.len() as u32)
            .filter(|&i| self.counts[i as usize] > 0)
            .map(move |i| (i / side, i % side, self.cells - i / side - i % side))
    }
}

/// Occupancy grid with running success/collision/idle counts.
struct Grid {
    occ: Vec<u8>,
    a: u32,
    b: u32,
    c: u32,
}

impl Grid {
    fn new(cells: usize) -> Self {
        Self { occ: vec![0; cells], a: 0, b: 0, c: cells as u32 }
    }

    fn add(&mut self, i: usize) {
        match self.occ[i] {
            0 => {
                self.c -= 1;
                self.a += 1;
            }
            1 => {
                self.a -= 1;
                self.b += 1;
            }
            _ => {}
        }
        self.occ[i] += 1;
    }

    fn remove(&mut self, i: usize) {
        self.occ[i] -= 1;
        match self.occ[i] {
            0 => {
                self.a -= 1;
                self.c += 1;
            }
            1 => {
                self.b -= 1;
                self.a += 1;
            }
            _ => {}
        }
    }

    /// Users, successes and collisions in one slot.
    fn slot_state(&self, slot: usize, w: usize) -> (u32, u32, u32) {
        let (mut m, mut a, mut b) = (0, 0, 0);
        for &x in &self.occ[slot * w..(slot + 1) * w] {
            m += u32::from(x);
            a += u32::from(x == 1);
            b += u32::from(x >= 2);
        }
        (m, a, b)
    }
}

/// All `k`-subsets of `0..n`, ascending.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Every way to put one RB in each of `slots`, as grid cell indices.
fn rb_assignments(slots: &[usize], w: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in slots {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..w).map(move |r| {
                    let mut v = prefix.clone();
                    v.push(s * w + r);
                    v
                })
            })
            .collect();
    }
    out
}

/// One user's choice set: the grid cells of its replicas, one entry per
/// equally likely choice.
pub fn adjacent_choices(w: usize, t: usize, k: usize) -> Vec<Vec<usize>> {
    (0..=t - k)
        .flat_map(|start| rb_assignments(&(start..start + k).collect::<Vec<_>>(), w))
        .collect()
}

pub fn arbitrary_choices(w: usize, t: usize, k: usize) -> Vec<Vec<usize>> {
    subsets(t, k).iter().flat_map(|slots| rb_assignments(slots, w)).collect()
}

/// Runs `leaf` on every tuple of `n` choices (one per user).
fn for_each_tuple(grid: &mut Grid, choices: &[Vec<usize>], n: usize, leaf: &mut impl FnMut(&Grid)) {
    if n == 0 {
        leaf(grid);
        return;
    }
    for choice in choices {
        for &i in choice {
            grid.add(i);
        }
        for_each_tuple(grid, choices, n - 1, leaf);
        for &i in choice {
            grid.remove(i);
        }
    }
}

/// Whole-cycle `(A, B, C)` totals over all tuples of `n` users.
pub fn enumerate_totals(w: usize, t: usize, choices: &[Vec<usize>], n: usize) -> Tally {
    let mut grid = Grid::new(w * t);
    let mut tally = Tally::new((w * t) as u32);
    for_each_tuple(&mut grid, choices, n, &mut |g| tally.add(g.a, g.b, 1));
    tally.total = (choices.len() as u64).pow(n as u32);
    tally
}

/// Per-slot state conditioned on the number of users in that slot, pooled
/// over slots: `result[m]` is the distribution of a slot that holds `m`
/// users, for `m = 0..=n` (empty tallies for counts that never occur).
pub fn enumerate_slot_conditional(w: usize, t: usize, k: usize, n: usize) -> Vec<Tally> {
    let choices = adjacent_choices(w, t, k);
    let mut grid = Grid::new(w * t);
    let mut out: Vec<Tally> = (0..=n).map(|_| Tally::new(w as u32)).collect();
    for_each_tuple(&mut grid, &choices, n, &mut |g| {
        for slot in 0..t {
            let (m, a, b) = g.slot_state(slot, w);
            let tally = &mut out[m as usize];
            tally.add(a, b, 1);
            tally.total += 1;
        }
    });
    out
}

/// Distribution when each user takes a uniform `k`-subset of all `w·t`
/// cells. Tuples are grouped by their occupancy grid between users, coded
/// base 3 with 2 standing for "two or more".
pub fn enumerate_pool_subsets(w: usize, t: usize, k: usize, n: usize) -> Tally {
    let cells = w * t;
    let choices = subsets(cells, k);
    let pow3: Vec<usize> = (0..cells).map(|i| 3usize.pow(i as u32)).collect();
    let size = 3usize.pow(cells as u32);
    let mut layer = vec![0u64; size];
    layer[0] = 1;
    for _ in 0..n {
        let mut next = vec![0u64; size];
        for (code, &weight) in layer.iter().enumerate() {
            if weight == 0 {
                continue;
            }
            for choice in &choices {
                let mut to = code;
                for &i in choice {
                    if (code / pow3[i]) % 3 < 2 {
                        to += pow3[i];
                    }
                }
                next[to] += weight;
            }
        }
        layer = next;
    }
    let mut tally = Tally::new(cells as u32);
    for (code, &weight) in layer.iter().enumerate() {
        if weight == 0 {
            continue;
        }
        let (mut a, mut b) = (0, 0);
        for &p in &pow3 {
            match (code / p) % 3 {
                1 => a += 1,
                2 => b += 1,
                _ => {}
            }
        }
        tally.add(a, b, weight);
    }
    tally.total = (choices.len() as u64).pow(n as u32);
    tally
}

/// Largest absolute difference between a table row and a tally.
pub fn max_gap(table: impl Iterator<Item = ((u32, u32, u32), f64)>, tally: &Tally) -> f64 {
    let mut gap: f64 = 0.0;
    let mut seen = std::collections::HashSet::new();
    for (s, p) in table {
        seen.insert(s);
        gap = gap.max((p - tally.prob(s)).abs());
    }
    for s in tally.states() {
        if !seen.contains(&s) {
            gap = gap.max(tally.prob(s));
        }
    }
    gap
}

/// Worst gap per check over the criterion grid `W <= 3, T <= 4, K <= T,
/// N <= 4`: (single slot against adjacent tuples, whole cycle against
/// arbitrary tuples, whole cycle against uniform cell subsets).
pub fn oracle_gaps() -> (f64, f64, f64) {
    use gfra::estimation::{MarkovModel, StepProbTable};
    let row = |table: &StepProbTable, n: u32| {
        table.distribution(n).map(|(s, p)| ((s.a, s.b, s.c), p)).collect::<Vec<_>>()
    };
    let (mut single, mut physical, mut pool) = (0.0f64, 0.0f64, 0.0f64);
    for w in 1..=3usize {
        let slot_table = MarkovModel::single_slot(w as u32).unwrap().step_table(16, usize::MAX).unwrap();
        for t in 1..=4usize {
            for k in 1..=t {
                let model = MarkovModel::whole_cycle(w as u32, t as u32, k as u32).unwrap();
                let cycle_table = model.step_table(4, usize::MAX).unwrap();
                let arb = arbitrary_choices(w, t, k);
                for n in 0..=4usize {
                    for (m, tally) in enumerate_slot_conditional(w, t, k, n).iter().enumerate() {
                        if tally.total > 0 {
                            single = single.max(max_gap(row(&slot_table, m as u32).into_iter(), tally));
                        }
                    }
                    let r = row(&cycle_table, n as u32);
                    physical = physical.max(max_gap(r.clone().into_iter(), &enumerate_totals(w, t, &arb, n)));
                    pool = pool.max(max_gap(r.into_iter(), &enumerate_pool_subsets(w, t, k, n)));
                }
            }
        }
    }
    (single, physical, pool)
}
