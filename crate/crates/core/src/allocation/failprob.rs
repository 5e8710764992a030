//! Access-failure probability within one access cycle.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::estimation::starts::{composition_count, enumerate_start_vectors, DEFAULT_ENUMERATION_CAP};
use crate::math::LnFactorials;
use crate::sim::Occupation;

/// Probability that a given replica collides in a slot shared by `n` users
/// (itself included) over `w` RBs: `1 - ((W-1)/W)^(n-1)`.
fn collide(w: u32, n: f64) -> f64 {
    let q = f64::from(w - 1) / f64::from(w);
    (1.0 - q.powf(n - 1.0)).clamp(0.0, 1.0)
}

fn check_shape(w: u32, k: u32, t: u32) -> Result<()> {
    if k == 0 || k > t {
        return Err(Error::InvalidConfig(format!("need 1 <= K <= T, got K={k} T={t}")));
    }
    let _ = w;
    Ok(())
}

/// Adjacent occupation, summed exactly over start vectors.
///
/// Every replica of a user starting at `r` fails independently given the
/// slot loads, so the user fails with `Π_{t=r}^{r+K-1} collide(n_t)`.
pub fn fail_prob_adjacent(w: u32, n: u32, k: u32, t: u32) -> Result<f64> {
    fail_prob_adjacent_with_cap(w, n, k, t, DEFAULT_ENUMERATION_CAP)
}

pub fn fail_prob_adjacent_with_cap(w: u32, n: u32, k: u32, t: u32, cap: u64) -> Result<f64> {
    check_shape(w, k, t)?;
    if n == 0 {
        return Ok(0.0);
    }
    if w == 0 {
        return Ok(1.0);
    }
    let s = t - k + 1;
    let count = composition_count(n, s);
    if count > u128::from(cap) {
        return Err(Error::EnumerationCap { count, cap });
    }
    let lf = LnFactorials::new(n as usize);
    let ln_scale = lf.get(n as usize) - f64::from(n) * f64::from(s).ln();
    let per_slot: Vec<f64> = (0..=n).map(|x| collide(w, f64::from(x))).collect();
    // Pr{tar} depends only on the K loads of the window.
    let mut memo: HashMap<Vec<u32>, f64> = HashMap::new();
    let (t, k, s) = (t as usize, k as usize, s as usize);
    let mut loads = vec![0u32; t];
    let mut total = 0.0;
    for phi in enumerate_start_vectors(n, s as u32, cap)? {
        let phi = phi.0;
        let ln_pmf = ln_scale - phi.iter().map(|&x| lf.get(x as usize)).sum::<f64>();
        for (slot, load) in loads.iter_mut().enumerate() {
            let first = (slot + 1).saturating_sub(k);
            *load = phi[first..=slot.min(s - 1)].iter().sum();
        }
        let mut inner = 0.0;
        for (r, &x) in phi.iter().enumerate() {
            if x == 0 {
                continue;
            }
            let window = &loads[r..r + k];
            let tar = match memo.get(window) {
                Some(&v) => v,
                None => {
                    let v: f64 = window.iter().map(|&m| per_slot[m as usize]).product();
                    memo.insert(window.to_vec(), v);
                    v
                }
            };
            inner += f64::from(x) / f64::from(n) * tar;
        }
        total += ln_pmf.exp() * inner;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Arbitrary occupation, mean-field: each slot carries `e = NK/T` users
/// on average and the `K` replicas fail independently.
pub fn fail_prob_arbitrary(w: u32, n: u32, k: u32, t: u32) -> f64 {
    if n == 0 || k == 0 || t == 0 {
        return 0.0;
    }
    if w == 0 {
        return 1.0;
    }
    let e = f64::from(n) * f64::from(k) / f64::from(t);
    let single = if w == 1 {
        // 0^(e-1): certain collision once e > 1.
        if e > 1.0 { 1.0 } else { 0.0 }
    } else {
        collide(w, e)
    };
    single.powi(k as i32)
}

pub fn fail_prob(w: u32, n: u32, k: u32, t: u32, occupation: Occupation) -> Result<f64> {
    match occupation {
        Occupation::Adjacent => fail_prob_adjacent(w, n, k, t),
        Occupation::Arbitrary => {
            check_shape(w, k, t)?;
            Ok(fail_prob_arbitrary(w, n, k, t))
        }
    }
}

type FailProbKey = (Occupation, u32, u32, u32, u32);

/// Memoized failure probabilities, shared across threads.
#[derive(Debug, Default)]
pub struct FailProbCache {
    values: RwLock<HashMap<FailProbKey, f64>>,
}

impl FailProbCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, w: u32, n: u32, k: u32, t: u32, occupation: Occupation) -> Result<f64> {
        let key = (occupation, w, n, k, t);
        if let Some(&v) = self.values.read().expect("fail-prob cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = fail_prob(w, n, k, t, occupation)?;
        self.values.write().expect("fail-prob cache poisoned").insert(key, v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.values.read().expect("fail-prob cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Smallest `W` meeting a reliability target, or the cap when none does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RbRequirement {
    pub w: u32,
    pub overflow: bool,
}

/// Scans `W = 1..=w_cap` for `fail_prob <= 1 - reliability`. Zero users
/// need zero RBs.
#[allow(clippy::too_many_arguments)]
pub fn required_rbs(
    reliability: f64,
    n: u32,
    k: u32,
    t: u32,
    occupation: Occupation,
    w_cap: u32,
    cache: &FailProbCache,
) -> Result<RbRequirement> {
    if !(0.0..1.0).contains(&reliability) {
        return Err(Error::InvalidConfig(format!("reliability must be in [0, 1), got {reliability}")));
    }
    if n == 0 {
        return Ok(RbRequirement { w: 0, overflow: false });
    }
    let budget = 1.0 - reliability;
    for w in 1..=w_cap {
        if cache.get(w, n, k, t, occupation)? <= budget {
            return Ok(RbRequirement { w, overflow: false });
        }
    }
    Ok(RbRequirement {
        w: w_cap,
        overflow: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_examples() {
        assert_eq!(fail_prob_adjacent(5, 1, 2, 4).unwrap(), 0.0);
        assert!((fail_prob_adjacent(2, 2, 1, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn arbitrary_examples() {
        assert_eq!(fail_prob_arbitrary(7, 4, 2, 8), 0.0);
        assert_eq!(fail_prob_arbitrary(1, 2, 1, 1), 1.0);
    }

    #[test]
    fn frozen_values() {
        // (W, K, adjacent, arbitrary) at N = 10, T = 8.
        let rows = [
            (7, 2, 0.092428, 0.042617),
            (7, 8, 0.100397, 0.100397),
            (10, 4, 0.031065, 0.013987),
            (20, 2, 0.014041, 0.005484),
            (33, 4, 0.000529, 0.00018),
        ];
        for (w, k, adj, arb) in rows {
            assert!((fail_prob_adjacent(w, 10, k, 8).unwrap() - adj).abs() < 1e-6, "{w} {k}");
            assert!((fail_prob_arbitrary(w, 10, k, 8) - arb).abs() < 1e-6, "{w} {k}");
        }
    }

    #[test]
    fn required_rbs_crossing() {
        let cache = FailProbCache::new();
        let r = required_rbs(0.99999, 10, 8, 8, Occupation::Arbitrary, 64, &cache).unwrap();
        assert_eq!(r, RbRequirement { w: 34, overflow: false });
        let r = required_rbs(0.9, 1, 8, 8, Occupation::Adjacent, 64, &cache).unwrap();
        assert_eq!(r.w, 1);
        let r = required_rbs(0.99999, 40, 8, 8, Occupation::Arbitrary, 10, &cache).unwrap();
        assert!(r.overflow);
    }
}
