use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ArimaSpec, DiagnosticReport, Forecast, HistoryPool};
use crate::error::{Error, Result};
use crate::math::Binomials;

/// Applies the difference operator `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if d > 0 && series.len() <= d {
        return Err(Error::InsufficientHistory {
            needed: d + 1,
            available: series.len(),
        });
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Conditional residuals, zero before `start`.
///
/// `start` must be at least `ar.len()`.
pub fn css_residuals(y: &[f64], start: usize, c: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    debug_assert!(start >= ar.len());
    let mut e = vec![0.0; y.len()];
    for t in start..y.len() {
        let mut pred = c;
        for (i, a) in ar.iter().enumerate() {
            pred += a * y[t - 1 - i];
        }
        for (j, m) in ma.iter().enumerate() {
            if let Some(prev) = t.checked_sub(j + 1) {
                pred += m * e[prev];
            }
        }
        e[t] = y[t] - pred;
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative change in the sum of squares that counts as converged.
    pub tol: f64,
    /// First residual index entering the objective; defaults to `p`.
    pub start: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            start: None,
        }
    }
}

/// Least-squares fit of `y_t = c + Σ a_i y_{t-i}` over `t >= start`.
pub fn ols_ar(y: &[f64], p: usize, start: usize) -> (f64, Vec<f64>) {
    let start = start.max(p);
    let rows = y.len().saturating_sub(start);
    if rows == 0 {
        return (0.0, vec![0.0; p]);
    }
    let x = DMatrix::from_fn(rows, p + 1, |r, col| if col == 0 { 1.0 } else { y[start + r - col] });
    let target = DVector::from_iterator(rows, y[start..].iter().copied());
    let beta = x
        .svd(true, true)
        .solve(&target, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(p + 1));
    (beta[0], beta.iter().skip(1).copied().collect())
}

/// Maps unconstrained values to an invertible MA polynomial: `tanh` gives
/// partial autocorrelations in (-1, 1), the Durbin-Levinson recursion turns
/// them into the coefficients of a stable lag polynomial.
pub fn invertible_ma(u: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(u.len());
    for (k, &x) in u.iter().enumerate() {
        let r = x.tanh();
        let prev = a.clone();
        for j in 0..k {
            a[j] = prev[j] - r * prev[k - 1 - j];
        }
        a.push(r);
    }
    // 1 - Σ a_i B^i is stable, so 1 + Σ θ_i B^i with θ = -a is invertible.
    a.into_iter().map(|x| -x).collect()
}

/// Inverse of [`invertible_ma`] for an invertible polynomial.
pub fn ma_to_unconstrained(theta: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = theta.iter().map(|x| -x).collect();
    let mut u = vec![0.0; a.len()];
    for k in (0..a.len()).rev() {
        let r = a[k].clamp(-0.999_999, 0.999_999);
        u[k] = r.atanh();
        let prev = a.clone();
        for j in 0..k {
            a[j] = (prev[j] + r * prev[k - 1 - j]) / (1.0 - r * r);
        }
    }
    u
}

struct Problem<'a> {
    y: &'a [f64],
    start: usize,
    p: usize,
}

impl Problem<'_> {
    /// Internal parameters `[c, ar.., u..]` to model coefficients.
    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        let ma = invertible_ma(&params[1 + self.p..]);
        let e = css_residuals(self.y, self.start, params[0], &params[1..1 + self.p], &ma);
        e[self.start..].to_vec()
    }

    /// Central-difference Jacobian of the residuals.
    fn jacobian(&self, params: &[f64]) -> DMatrix<f64> {
        let n = self.y.len() - self.start;
        let mut jac = DMatrix::zeros(n, params.len());
        let mut x = params.to_vec();
        for col in 0..params.len() {
            let h = 1e-6 * params[col].abs().max(1.0);
            x[col] = params[col] + h;
            let up = self.residuals(&x);
            x[col] = params[col] - h;
            let down = self.residuals(&x);
            x[col] = params[col];
            for row in 0..n {
                jac[(row, col)] = (up[row] - down[row]) / (2.0 * h);
            }
        }
        jac
    }
}

/// Conditional-sum-of-squares fit by Levenberg-Marquardt, starting from
/// the least-squares AR fit and zero MA coefficients. MA coefficients are
/// kept in the invertible region.
pub fn fit_arma(y: &[f64], p: usize, d: usize, q: usize, opts: &FitOptions) -> Result<ArimaSpec> {
    let start = opts.start.unwrap_or(p).max(p);
    let needed = start + q + 5;
    if y.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: y.len(),
        });
    }
    let problem = Problem { y, start, p };
    let (c0, ar0) = ols_ar(y, p, start);
    let mut params: Vec<f64> = std::iter::once(c0).chain(ar0).chain(vec![0.0; q]).collect();
    let n_obs = y.len() - start;
    let build = |params: &[f64], s: f64| ArimaSpec {
        p,
        d,
        q,
        c: params[0],
        ar_coeffs: params[1..1 + p].to_vec(),
        ma_coeffs: invertible_ma(&params[1 + p..]),
        sigma2: s / n_obs as f64,
        n_obs,
    };
    let sse = |e: &[f64]| e.iter().map(|x| x * x).sum::<f64>();

    let mut e = problem.residuals(&params);
    let mut obj = sse(&e);
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iter {
        if obj == 0.0 {
            return Ok(build(&params, obj));
        }
        let jac = problem.jacobian(&params);
        let jt = jac.transpose();
        let h = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&e);
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = h.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * h[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            let te = problem.residuals(&trial);
            let tobj = sse(&te);
            if tobj.is_finite() && tobj < obj {
                let rel = (obj - tobj) / obj;
                params = trial;
                obj = tobj;
                e = te;
                lambda = (lambda / 10.0).max(1e-12);
                if rel < opts.tol {
                    return Ok(build(&params, obj));
                }
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left at any damping: a local minimum.
            return Ok(build(&params, obj));
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        best_objective: obj,
        best: Box::new(build(&params, obj)),
    })
}

/// Pure MA(q) fit on an already differenced series, labelled `d = 2`.
pub fn fit_ma(series_diff: &[f64], q: usize) -> Result<ArimaSpec> {
    fit_arma(series_diff, 0, 2, q, &FitOptions::default())
}

/// Next value of the undifferenced series, clamped at zero.
pub fn forecast_one(spec: &ArimaSpec, pool: &HistoryPool) -> Result<Forecast> {
    let x = pool.values();
    let needed = spec.d + spec.p.max(spec.q);
    if x.len() < needed || x.len() < spec.d {
        return Err(Error::InsufficientHistory {
            needed,
            available: x.len(),
        });
    }
    let y = if x.len() > spec.d {
        difference(x, spec.d)?
    } else {
        Vec::new()
    };
    let e = css_residuals(&y, spec.p, spec.c, &spec.ar_coeffs, &spec.ma_coeffs);
    let n = y.len();
    let mut next = spec.c;
    for (i, a) in spec.ar_coeffs.iter().enumerate() {
        if let Some(idx) = n.checked_sub(i + 1) {
            next += a * y[idx];
        }
    }
    for (j, m) in spec.ma_coeffs.iter().enumerate() {
        if let Some(idx) = n.checked_sub(j + 1) {
            next += m * e[idx];
        }
    }
    // Undo the differencing: x_{n+1} = Δ^d x_{n+1} - Σ_k (-1)^k C(d,k) x_{n+1-k}.
    let binom = Binomials::new(spec.d);
    let len = x.len();
    for k in 1..=spec.d {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        next += sign * binom.get(spec.d, k) * x[len - k];
    }
    Ok(Forecast::new(next))
}

/// Gaussian log-likelihood at the CSS variance estimate.
pub fn gaussian_log_likelihood(sigma2: f64, n: usize) -> f64 {
    -(n as f64) / 2.0 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

/// `2k - 2 ln L`.
pub fn aic(k: usize, log_likelihood: f64) -> f64 {
    2.0 * k as f64 - 2.0 * log_likelihood
}

/// Durbin-Watson statistic.
pub fn dw(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: residuals.len(),
        });
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(Error::Undefined("Durbin-Watson of all-zero residuals".into()));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub chosen: (usize, usize),
    pub spec: ArimaSpec,
    pub grid: Vec<DiagnosticReport>,
    /// False when no model had `|DW - 2| <= 0.3` and the AIC-best was taken.
    pub gate_passed: bool,
}

pub const DW_GATE: f64 = 0.3;

/// Fits every `(p, q)` up to the limits with difference order `d` and picks
/// the lowest AIC among models passing the DW gate. All fits share the
/// residual window starting at `p_max`.
pub fn select_model(training: &[f64], p_max: usize, q_max: usize, d: usize) -> Result<ModelSelection> {
    let y = difference(training, d)?;
    let opts = FitOptions {
        start: Some(p_max),
        ..FitOptions::default()
    };
    let mut fits = Vec::new();
    for p in 0..=p_max {
        for q in 0..=q_max {
            let spec = match fit_arma(&y, p, d, q, &opts) {
                Ok(s) => s,
                Err(Error::NonConvergence { best, .. }) => *best,
                Err(e) => return Err(e),
            };
            let e = css_residuals(&y, p_max, spec.c, &spec.ar_coeffs, &spec.ma_coeffs);
            let lnl = gaussian_log_likelihood(spec.sigma2, spec.n_obs);
            let report = DiagnosticReport {
                p,
                q,
                aic: aic(spec.n_params(), lnl),
                dw: dw(&e[p_max..]).ok(),
                log_likelihood: lnl,
            };
            fits.push((report, spec));
        }
    }
    let pick = |gated: bool| {
        fits.iter()
            .filter(|(r, _)| !r.aic.is_nan())
            .filter(|(r, _)| !gated || r.dw.is_some_and(|v| (v - 2.0).abs() <= DW_GATE))
            .fold(None::<&(DiagnosticReport, ArimaSpec)>, |best, cur| match best {
                Some(b) if b.0.aic <= cur.0.aic => Some(b),
                _ => Some(cur),
            })
    };
    let (chosen, gate_passed) = match pick(true) {
        Some(f) => (f, true),
        None => (
            pick(false).ok_or_else(|| Error::Undefined("no model could be scored".into()))?,
            false,
        ),
    };
    Ok(ModelSelection {
        chosen: (chosen.0.p, chosen.0.q),
        spec: chosen.1.clone(),
        grid: fits.iter().map(|(r, _)| *r).collect(),
        gate_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal(rng: &mut impl Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    #[test]
    fn ma_transform_round_trip() {
        let theta = [0.4, 0.3, 0.2];
        let back = invertible_ma(&ma_to_unconstrained(&theta));
        for (a, b) in back.iter().zip(theta) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(invertible_ma(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(difference(&[0.0, 1.0, 4.0, 9.0, 16.0], 2).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(difference(&[5.0, 1.0], 0).unwrap(), vec![5.0, 1.0]);
        assert!(difference(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn dw_examples() {
        assert_eq!(dw(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 3.0);
        assert!(matches!(dw(&[0.0, 0.0]), Err(Error::Undefined(_))));
    }

    #[test]
    fn aic_formula() {
        assert_eq!(aic(3, -10.0), 26.0);
    }

    #[test]
    fn zero_series_fit() {
        let s = fit_ma(&[0.0; 20], 3).unwrap();
        assert_eq!((s.c, s.sigma2), (0.0, 0.0));
        assert!(s.ma_coeffs.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn constant_series_fit() {
        let s = fit_ma(&[2.5; 30], 2).unwrap();
        assert!((s.c - 2.5).abs() < 1e-9);
        assert!(s.ma_coeffs.iter().all(|t| t.abs() < 1e-6));
    }

    #[test]
    fn recovers_ma3() {
        let theta = [0.4, 0.3, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eps: Vec<f64> = (0..2003).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (3..2003)
            .map(|t| eps[t] + theta[0] * eps[t - 1] + theta[1] * eps[t - 2] + theta[2] * eps[t - 3])
            .collect();
        let s = fit_ma(&y, 3).unwrap();
        for (got, want) in s.ma_coeffs.iter().zip(theta) {
            assert!((got - want).abs() < 0.08, "{:?}", s.ma_coeffs);
        }
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut y = vec![0.0];
        for t in 1..500 {
            y.push(0.5 + 0.6 * y[t - 1] + normal(&mut rng));
        }
        let (c, a) = ols_ar(&y, 1, 1);
        // Closed form for simple regression.
        let xs = &y[..499];
        let ys = &y[1..];
        let (mx, my) = (xs.iter().sum::<f64>() / 499.0, ys.iter().sum::<f64>() / 499.0);
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((a[0] - slope).abs() < 1e-9);
        assert!((c - (my - slope * mx)).abs() < 1e-9);
    }

    #[test]
    fn forecast_extends_lines() {
        let spec = ArimaSpec::zero(0, 2, 3);
        let f = forecast_one(&spec, &HistoryPool::from_values([2.0, 4.0, 6.0, 8.0, 10.0])).unwrap();
        assert!((f.value - 12.0).abs() < 1e-12);
        let f = forecast_one(&spec, &HistoryPool::from_values([5.0; 6])).unwrap();
        assert!((f.value - 5.0).abs() < 1e-12);
        let f = forecast_one(&spec, &HistoryPool::from_values([12.0, 9.0, 6.0, 3.0, 0.0])).unwrap();
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn forecast_needs_history() {
        let spec = ArimaSpec::zero(0, 2, 3);
        assert!(forecast_one(&spec, &HistoryPool::from_values([1.0, 2.0])).is_err());
    }

    #[test]
    fn constant_training_fails_gate() {
        let sel = select_model(&[4.0; 40], 3, 3, 2).unwrap();
        assert!(!sel.gate_passed);
        assert_eq!(sel.grid.len(), 16);
    }
}
