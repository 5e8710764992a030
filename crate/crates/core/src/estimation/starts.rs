//! Start vectors and the slot/start relation of adjacent occupation.
//!
//! `φ_r` users begin in slot `r` (there are `T - K + 1` admissible starts);
//! a user starting at `r` is active in slots `r..r+K`. The per-slot load is
//! therefore a sliding-window sum of `φ`, written `n = Ω φ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{binomial_u128, LnFactorials};

/// Default cap on enumerated start vectors.
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StartVector(pub Vec<u32>);

impl StartVector {
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&x| u64::from(x)).sum()
    }
}

/// Users active in each slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoadVector(pub Vec<u32>);

/// Columns `max(0, t-K+1) ..= min(t, T-K)` of row `t` (0-based).
fn contributing_starts(t: usize, t_slots: usize, k: usize) -> std::ops::RangeInclusive<usize> {
    let last_start = t_slots - k;
    (t + 1).saturating_sub(k)..=t.min(last_start)
}

/// The `T × (T-K+1)` 0/1 matrix `Ω` with `Ω φ = n`.
pub fn design_matrix(t_slots: u32, k: u32) -> DMatrix<f64> {
    let (t, k) = (t_slots as usize, k as usize);
    let s = t - k + 1;
    DMatrix::from_fn(t, s, |row, col| {
        if contributing_starts(row, t, k).contains(&col) {
            1.0
        } else {
            0.0
        }
    })
}

/// Per-slot loads implied by a start vector.
pub fn load_from_starts(phi: &StartVector, t_slots: u32, k: u32) -> LoadVector {
    let (t, k) = (t_slots as usize, k as usize);
    debug_assert_eq!(phi.0.len(), t - k + 1);
    LoadVector(
        (0..t)
            .map(|row| contributing_starts(row, t, k).map(|c| phi.0[c]).sum())
            .collect(),
    )
}

/// Least-squares start vector `(ΩᵀΩ)⁻¹ Ωᵀ n`, unclamped.
pub fn solve_starts(loads: &[f64], t_slots: u32, k: u32) -> Vec<f64> {
    let omega = design_matrix(t_slots, k);
    let n = DVector::from_column_slice(loads);
    let gram = omega.transpose() * &omega;
    let rhs = omega.transpose() * n;
    // Row t < K of Ω has its last one in column t, so Ω has full column rank
    // for every 1 <= K <= T and the Gram matrix is positive definite.
    let chol = gram
        .cholesky()
        .expect("Gram matrix of the slot/start design is positive definite");
    chol.solve(&rhs).iter().copied().collect()
}

/// All compositions of `n` into `slots` non-negative parts, in descending
/// lexicographic order starting from `(n, 0, …, 0)`.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<u32>>,
}

impl Iterator for Compositions {
    type Item = StartVector;

    fn next(&mut self) -> Option<StartVector> {
        let out = self.current.clone()?;
        let v = self.current.as_mut().expect("checked above");
        let s = v.len();
        match (0..s.saturating_sub(1)).rev().find(|&j| v[j] > 0) {
            Some(j) => {
                let tail: u32 = v[j + 1..].iter().sum();
                v[j] -= 1;
                v[j + 1] = tail + 1;
                for x in &mut v[j + 2..] {
                    *x = 0;
                }
            }
            None => self.current = None,
        }
        Some(StartVector(out))
    }
}

/// `C(n + slots - 1, slots - 1)`.
pub fn composition_count(n: u32, slots: u32) -> u128 {
    if slots == 0 {
        return u128::from(n == 0);
    }
    binomial_u128(u64::from(n) + u64::from(slots) - 1, u64::from(slots) - 1)
}

/// Every start vector of `n` users over `slots` starts, each exactly once.
pub fn enumerate_start_vectors(n: u32, slots: u32, cap: u64) -> Result<Compositions> {
    if slots == 0 {
        return Err(Error::InvalidConfig("need at least one start slot".into()));
    }
    let count = composition_count(n, slots);
    if count > u128::from(cap) {
        return Err(Error::EnumerationCap { count, cap });
    }
    let mut first = vec![0; slots as usize];
    first[0] = n;
    Ok(Compositions {
        current: Some(first),
    })
}

/// Probability of start vector `φ` when each of `n` users picks its start
/// uniformly from `φ.len()` slots:
/// `(1/S)^n · Π_r C(n - Σ_{j<r} φ_j, φ_r)`.
pub fn start_vector_pmf(phi: &StartVector, n: u32) -> Result<f64> {
    let sum = phi.total();
    if sum != u64::from(n) {
        return Err(Error::StartVectorSum {
            sum,
            expected: u64::from(n),
        });
    }
    let lf = LnFactorials::new(n as usize);
    Ok(ln_start_vector_pmf(&phi.0, n, &lf).exp())
}

pub(crate) fn ln_start_vector_pmf(phi: &[u32], n: u32, lf: &LnFactorials) -> f64 {
    let mut remaining = n as usize;
    let mut ln_p = -(f64::from(n)) * (phi.len() as f64).ln();
    for &x in phi {
        ln_p += lf.ln_binomial(remaining, x as usize);
        remaining -= x as usize;
    }
    ln_p
}
