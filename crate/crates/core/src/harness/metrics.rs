//! Delay statistics.

use serde::{Deserialize, Serialize};

/// Slack for comparing delays that are sums of slot lengths.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub delay_ms: f64,
    pub ccdf: f64,
}

/// `P(delay > x)` on `x = 0, step, …, max`. `None` delays (users never
/// served) count as larger than every grid point.
pub fn ccdf(delays: &[Option<f64>], max_ms: f64, step_ms: f64) -> Vec<CcdfPoint> {
    let mut finite: Vec<f64> = delays.iter().flatten().copied().collect();
    finite.sort_by(f64::total_cmp);
    let n = delays.len();
    let steps = (max_ms / step_ms + EPS).floor() as usize;
    (0..=steps)
        .map(|i| {
            let x = i as f64 * step_ms;
            let at_most = finite.partition_point(|&d| d <= x + EPS);
            CcdfPoint {
                delay_ms: x,
                ccdf: if n == 0 { 0.0 } else { (n - at_most) as f64 / n as f64 },
            }
        })
        .collect()
}

/// Fraction of users served within `latency_ms`. One for an empty set.
pub fn reliability_within(delays: &[Option<f64>], latency_ms: f64) -> f64 {
    if delays.is_empty() {
        return 1.0;
    }
    let ok = delays.iter().flatten().filter(|&&d| d <= latency_ms + EPS).count();
    ok as f64 / delays.len() as f64
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sample standard deviation (n - 1 denominator); zero below two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}
