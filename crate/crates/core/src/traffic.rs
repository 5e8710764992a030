//! Per-cycle arrival counts for the two URLLC traffic classes.
//!
//! Uniform traffic (motion control) arrives with a constant intensity every
//! scheduling cycle. Bursty traffic (discrete automation) activates `N`
//! devices over a window of `T` ms whose activation density is a Beta(α, β)
//! curve stretched over `[0, T]`:
//!
//! ```text
//!          t^(α-1) (T - t)^(β-1)
//! p(t) = -------------------------
//!         T^(α+β-1) · B(α, β)
//! ```
//!
//! and cycle `i` receives `N · ∫ p(t) dt` over `[t_{i-1}, t_i]`. The counts
//! are the deterministic expectation, rounded so that the total is exactly
//! `N`.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance of every quadrature in this module.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// A Beta-shaped burst `B(N, T)` sliced into scheduling cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBurstSpec {
    pub n_total: u32,
    pub duration_ms: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Length of one scheduling cycle (access cycle plus broadcast slots).
    pub cycle_len_ms: f64,
}

impl BetaBurstSpec {
    /// `B(N, T)` with the usual shapes α = 3, β = 4.
    pub fn standard(n_total: u32, duration_ms: f64, cycle_len_ms: f64) -> Self {
        Self {
            n_total,
            duration_ms,
            alpha: 3.0,
            beta: 4.0,
            cycle_len_ms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.duration_ms, "duration_ms")?;
        positive(self.alpha, "alpha")?;
        positive(self.beta, "beta")?;
        positive(self.cycle_len_ms, "cycle_len_ms")
    }

    /// `floor(duration / cycle_len)`, with a small guard for values such as
    /// `12.5 / 1.25` that are integral up to floating-point noise.
    pub fn n_cycles(&self) -> usize {
        (self.duration_ms / self.cycle_len_ms + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformSpec {
    pub users_per_cycle: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArrivalTrace {
    pub per_cycle_counts: Vec<u32>,
}

impl ArrivalTrace {
    pub fn len(&self) -> usize {
        self.per_cycle_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_cycle_counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.per_cycle_counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Count for cycle `i`, zero past the end of the trace.
    pub fn at(&self, i: usize) -> u32 {
        self.per_cycle_counts.get(i).copied().unwrap_or(0)
    }

    /// Shift the trace so that it starts at cycle `offset` (zeros before).
    pub fn delayed(&self, offset: usize) -> ArrivalTrace {
        let mut counts = vec![0; offset];
        counts.extend_from_slice(&self.per_cycle_counts);
        ArrivalTrace {
            per_cycle_counts: counts,
        }
    }
}

/// The Beta function `B(α, β) = ∫₀¹ u^(α-1) (1-u)^(β-1) du`, by quadrature.
pub fn beta_function(alpha: f64, beta: f64) -> f64 {
    quadrature::double_exponential::integrate(
        |u| u.powf(alpha - 1.0) * (1.0 - u).powf(beta - 1.0),
        0.0,
        1.0,
        QUADRATURE_TOL,
    )
    .integral
}

/// Activation density of the burst at time `t` ms (zero outside `[0, T]`).
pub fn beta_density(spec: &BetaBurstSpec, t: f64) -> f64 {
    beta_density_with_norm(spec, t, beta_function(spec.alpha, spec.beta))
}

fn beta_density_with_norm(spec: &BetaBurstSpec, t: f64, norm: f64) -> f64 {
    let big_t = spec.duration_ms;
    if !(0.0..=big_t).contains(&t) {
        return 0.0;
    }
    t.powf(spec.alpha - 1.0) * (big_t - t).powf(spec.beta - 1.0)
        / (big_t.powf(spec.alpha + spec.beta - 1.0) * norm)
}

/// Expected (unrounded) number of users activating in each cycle.
pub fn beta_expected_counts(spec: &BetaBurstSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let norm = beta_function(spec.alpha, spec.beta);
    let n = f64::from(spec.n_total);
    Ok((0..spec.n_cycles())
        .map(|i| {
            let lo = i as f64 * spec.cycle_len_ms;
            let hi = ((i + 1) as f64 * spec.cycle_len_ms).min(spec.duration_ms);
            let mass = quadrature::double_exponential::integrate(
                |t| beta_density_with_norm(spec, t, norm),
                lo,
                hi,
                QUADRATURE_TOL,
            )
            .integral;
            n * mass
        })
        .collect())
}

/// Deterministic per-cycle arrivals of a Beta burst.
///
/// Each cycle is rounded half-up; the residual against `n_total` is then
/// folded into the peak cycle so the trace sums to exactly `n_total`.
pub fn beta_arrivals(spec: &BetaBurstSpec) -> Result<ArrivalTrace> {
    let expected = beta_expected_counts(spec)?;
    if expected.is_empty() {
        return Ok(ArrivalTrace::default());
    }
    let mut counts: Vec<i64> = expected.iter().map(|x| (x + 0.5).floor() as i64).collect();
    let residual = i64::from(spec.n_total) - counts.iter().sum::<i64>();
    let peak = expected
        .iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > expected[best] { i } else { best });
    counts[peak] += residual;
    if counts[peak] < 0 {
        // Only reachable for tiny N with many half-up ties: take the excess
        // back from the cycles that were rounded up the most.
        let mut deficit = -counts[peak];
        counts[peak] = 0;
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ea = counts[a] as f64 - expected[a];
            let eb = counts[b] as f64 - expected[b];
            eb.total_cmp(&ea)
        });
        for i in order {
            while deficit > 0 && counts[i] > 0 {
                counts[i] -= 1;
                deficit -= 1;
            }
        }
    }
    Ok(ArrivalTrace {
        per_cycle_counts: counts.into_iter().map(|c| c as u32).collect(),
    })
}

/// One random realization of a burst: every user draws its activation time
/// from the Beta density independently.
pub fn sample_beta_arrivals(spec: &BetaBurstSpec, rng: &mut impl Rng) -> Result<ArrivalTrace> {
    spec.validate()?;
    let n_cycles = spec.n_cycles();
    let mut counts = vec![0u32; n_cycles];
    if n_cycles == 0 {
        return Ok(ArrivalTrace::default());
    }
    let dist = Beta::new(spec.alpha, spec.beta)
        .map_err(|e| Error::InvalidConfig(format!("beta shapes: {e}")))?;
    for _ in 0..spec.n_total {
        let t = dist.sample(rng) * spec.duration_ms;
        let i = ((t / spec.cycle_len_ms) as usize).min(n_cycles - 1);
        counts[i] += 1;
    }
    Ok(ArrivalTrace {
        per_cycle_counts: counts,
    })
}

pub fn uniform_arrivals(spec: &UniformSpec, n_cycles: usize) -> ArrivalTrace {
    ArrivalTrace {
        per_cycle_counts: vec![spec.users_per_cycle; n_cycles],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_100_over_12_5ms_spans_ten_cycles() {
        let trace = beta_arrivals(&BetaBurstSpec::standard(100, 12.5, 1.25)).unwrap();
        assert_eq!(trace.len(), 10);
        assert_eq!(trace.total(), 100);
    }

    #[test]
    fn zero_users_gives_zero_trace() {
        let trace = beta_arrivals(&BetaBurstSpec::standard(0, 12.5, 1.25)).unwrap();
        assert_eq!(trace.per_cycle_counts, vec![0; 10]);
    }

    #[test]
    fn beta_80_over_15ms_matches_quadrature_oracle() {
        // Frozen from an independent regularized-incomplete-Beta evaluation.
        let trace = beta_arrivals(&BetaBurstSpec::standard(80, 15.0, 1.5)).unwrap();
        assert_eq!(trace.per_cycle_counts, vec![1, 7, 13, 16, 16, 13, 9, 4, 1, 0]);
        let expected = beta_expected_counts(&BetaBurstSpec::standard(80, 15.0, 1.5)).unwrap();
        let oracle = [
            1.268, 6.6424, 12.5448, 15.9992, 16.0456, 13.164, 8.6984, 4.2808, 1.2552, 0.1016,
        ];
        for (got, want) in expected.iter().zip(oracle) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn reference_setups() {
        let s1 = beta_arrivals(&BetaBurstSpec::standard(50, 12.5, 1.25)).unwrap();
        assert_eq!(s1.per_cycle_counts, vec![1, 4, 8, 10, 10, 8, 5, 3, 1, 0]);
        let s2 = beta_arrivals(&BetaBurstSpec::standard(25, 12.5, 1.25)).unwrap();
        assert_eq!(s2.total(), 25);
    }

    #[test]
    fn residual_lands_on_peak() {
        // Half-up rounding of B(100, 20) sums to 98; the peak cycle absorbs 2.
        let trace = beta_arrivals(&BetaBurstSpec::standard(100, 20.0, 1.25)).unwrap();
        assert_eq!(
            trace.per_cycle_counts,
            vec![0, 2, 5, 9, 11, 12, 15, 12, 11, 9, 7, 4, 2, 1, 0, 0]
        );
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut spec = BetaBurstSpec::standard(10, 12.5, 1.25);
        spec.alpha = 0.0;
        assert!(beta_arrivals(&spec).is_err());
        spec.alpha = 3.0;
        spec.duration_ms = -1.0;
        assert!(beta_arrivals(&spec).is_err());
        spec.duration_ms = 12.5;
        spec.cycle_len_ms = 0.0;
        assert!(beta_arrivals(&spec).is_err());
    }

    #[test]
    fn tiny_population_never_goes_negative() {
        let spec = BetaBurstSpec {
            n_total: 2,
            duration_ms: 4.0,
            alpha: 1.0,
            beta: 1.0,
            cycle_len_ms: 1.0,
        };
        // Flat density: 0.5 per cycle, all rounded up to 1.
        let trace = beta_arrivals(&spec).unwrap();
        assert_eq!(trace.total(), 2);
    }

    #[test]
    fn sampled_burst_keeps_every_user() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let spec = BetaBurstSpec::standard(100, 20.0, 1.25);
        let a = sample_beta_arrivals(&spec, &mut rng).unwrap();
        let b = sample_beta_arrivals(&spec, &mut rng).unwrap();
        assert_eq!((a.len(), a.total(), b.total()), (16, 100, 100));
        assert_ne!(a, b);
    }

    #[test]
    fn uniform_patterns() {
        let t = uniform_arrivals(&UniformSpec { users_per_cycle: 10 }, 5);
        assert_eq!(t.per_cycle_counts, vec![10; 5]);
        let t = uniform_arrivals(&UniformSpec { users_per_cycle: 0 }, 3);
        assert_eq!(t.per_cycle_counts, vec![0; 3]);
        let t = uniform_arrivals(&UniformSpec { users_per_cycle: 18 }, 10);
        assert_eq!(t.per_cycle_counts, vec![18; 10]);
    }
}
