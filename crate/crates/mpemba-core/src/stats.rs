use crate::prelude::*;
use rand::Rng;

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Leave-one-out jackknife of a statistic of column means.
///
/// `columns[k]` holds the per-sample values of the k-th input; `f` maps the
/// vector of column means to the estimate. Returns the bias-corrected
/// estimate and its jackknife standard error.
pub fn jackknife<F>(columns: &[&[f64]], f: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let m = columns.first().map_or(0, |c| c.len());
    let sums: Vec<f64> = columns.iter().map(|c| c.iter().sum()).collect();
    let full: Vec<f64> = sums.iter().map(|s| s / m as f64).collect();
    let theta = f(&full);
    if m < 2 {
        return (theta, f64::NAN);
    }
    let mut loo = Vec::with_capacity(m);
    let mut buf = vec![0.0; columns.len()];
    for i in 0..m {
        for (k, c) in columns.iter().enumerate() {
            buf[k] = (sums[k] - c[i]) / (m - 1) as f64;
        }
        loo.push(f(&buf));
    }
    let bar = loo.iter().sum::<f64>() / m as f64;
    let var = loo.iter().map(|x| (x - bar) * (x - bar)).sum::<f64>() * (m - 1) as f64 / m as f64;
    let corrected = m as f64 * theta - (m - 1) as f64 * bar;
    (corrected, var.sqrt())
}

/// Bootstrap standard deviation of `f` over resampled index sets.
pub fn bootstrap_sd<R, F>(n: usize, resamples: usize, rng: &mut R, mut f: F) -> f64
where
    R: Rng + ?Sized,
    F: FnMut(&[usize]) -> f64,
{
    let mut idx = vec![0usize; n];
    let mut vals = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        let v = f(&idx);
        if v.is_finite() {
            vals.push(v);
        }
    }
    let (_, se) = mean_se(&vals);
    se * (vals.len() as f64).sqrt()
}
