//! Summation helpers shared by the iteration code and the lemma checks.
//!
//! Index ranges follow the convention that an empty sum is `0` and an empty
//! product is `1`: `sum_range(t + 1, t, f) == 0.0` and
//! `product_range(t + 1, t, f) == 1.0`.

/// Neumaier (improved Kahan) compensated summation.
pub fn compensated_sum<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut sum = 0.0_f64;
    let mut compensation = 0.0_f64;
    for value in values {
        let next = sum + value;
        if sum.abs() >= value.abs() {
            compensation += (sum - next) + value;
        } else {
            compensation += (value - next) + sum;
        }
        sum = next;
    }
    sum + compensation
}

/// `Σ_{k=lo}^{hi} f(k)`, zero when `lo > hi`.
pub fn sum_range<F>(lo: usize, hi: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    if lo > hi {
        return 0.0;
    }
    compensated_sum((lo..=hi).map(f))
}

/// `Π_{k=lo}^{hi} f(k)`, one when `lo > hi`.
pub fn product_range<F>(lo: usize, hi: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    (lo..=hi).fold(1.0, |acc, k| acc * f(k))
}

/// Plain dot product. Every inner product in the crate goes through this
/// function so that runs which perform the same arithmetic agree bit for bit.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean of squared differences `(1/n) Σ (a_i - b_i)^2`.
pub fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    compensated_sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y))) / a.len() as f64
}

/// Mean and standard error of the mean (unbiased variance, `n - 1` divisor).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ceiling of a real power with a small downward guard so that values such as
/// `100^1.5 = 1000.0000000000002` round to `1000` rather than `1001`.
pub fn guarded_ceil(x: f64) -> usize {
    let c = (x - 1e-9).ceil();
    if c < 1.0 {
        1
    } else {
        c as usize
    }
}
