//! Small numerical helpers shared across modules.

use crate::error::Result;

/// `ln Σ exp(xᵢ)`, stable for large spreads. Returns `-∞` for an empty or
/// all-`-∞` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    // ln_1p keeps precision when one term dominates
    let rest: f64 = values.iter().map(|&v| (v - max).exp()).sum::<f64>() - 1.0;
    max + rest.ln_1p()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `xtol`. Returns the best point
/// seen and its value. Endpoints are not evaluated.
pub fn golden_min<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iter = 0;
    while (b - a) > xtol && iter < 500 {
        // ties go left, so a flat objective drifts toward the smaller argument
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        iter += 1;
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Golden-section search for a maximum; see [`golden_min`].
pub fn golden_max<F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (x, v) = golden_min(|x| f(x).map(|y| -y), a, b, xtol)?;
    Ok((x, -v))
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Delete-one jackknife estimate of a statistic and its standard error.
///
/// `stat` receives the index left out (`None` for the full sample).
pub fn jackknife<F>(n: usize, mut stat: F) -> (f64, f64)
where
    F: FnMut(Option<usize>) -> f64,
{
    let full = stat(None);
    if n < 2 {
        return (full, f64::INFINITY);
    }
    let loo: Vec<f64> = (0..n).map(|i| stat(Some(i))).collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (full, var.sqrt())
}

/// `n` points covering `[0, upper]`: zero, a log-spaced run from
/// `upper * log_floor` up to `upper * split`, then a uniform run up to `upper`.
/// Sorted, deduplicated, always containing both endpoints.
pub fn mixed_grid(upper: f64, n: usize, log_floor: f64, split: f64) -> Vec<f64> {
    assert!(n >= 4, "mixed grid needs at least 4 nodes");
    let n_log = (n - 1) / 2;
    let n_lin = n - 1 - n_log;
    let mut grid = Vec::with_capacity(n);
    grid.push(0.0);
    let (lo, hi) = (log_floor.ln(), split.ln());
    for k in 0..n_log {
        let t = k as f64 / n_log as f64;
        grid.push(upper * (lo + t * (hi - lo)).exp());
    }
    for k in 0..n_lin {
        let t = (k + 1) as f64 / n_lin as f64;
        grid.push(upper * (split + t * (1.0 - split)));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    *grid.last_mut().expect("non-empty grid") = upper;
    grid
}
