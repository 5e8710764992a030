//! Binomial coefficients and log-factorials shared by the estimators and the
//! failure-probability formulas.

/// Pascal's triangle in `f64`, rows `0..=n_max`.
#[derive(Debug, Clone)]
pub(crate) struct Binomials {
    rows: Vec<Vec<f64>>,
}

impl Binomials {
    pub(crate) fn new(n_max: usize) -> Self {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        Self { rows }
    }

    pub(crate) fn get(&self, n: usize, k: usize) -> f64 {
        if k > n {
            0.0
        } else {
            self.rows[n][k]
        }
    }
}

/// `ln(k!)` for `k = 0..=n_max`.
#[derive(Debug, Clone)]
pub(crate) struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub(crate) fn new(n_max: usize) -> Self {
        let mut v = Vec::with_capacity(n_max + 1);
        let mut acc = 0.0;
        v.push(0.0);
        for k in 1..=n_max {
            acc += (k as f64).ln();
            v.push(acc);
        }
        Self(v)
    }

    pub(crate) fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub(crate) fn ln_binomial(&self, n: usize, k: usize) -> f64 {
        if k > n {
            f64::NEG_INFINITY
        } else {
            self.0[n] - self.0[k] - self.0[n - k]
        }
    }
}

/// Exact binomial coefficient as `u128`; saturates instead of overflowing.
pub(crate) fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul(u128::from(n - i)) {
            Some(v) => v / u128::from(i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Round half-up to a non-negative count.
pub(crate) fn round_count(x: f64) -> u32 {
    if x.is_nan() || x <= 0.0 {
        0
    } else {
        (x + 0.5).floor().min(f64::from(u32::MAX)) as u32
    }
}
