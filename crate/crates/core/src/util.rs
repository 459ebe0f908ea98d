//! Small numeric helpers used throughout the crate.

/// Relative tolerance for exact-identity checks.
pub const REL_TOL: f64 = 1e-10;
/// Absolute floor below which relative errors are meaningless.
pub const ABS_FLOOR: f64 = 1e-14;

/// Relative error |a - b| / max(|a|, |b|, floor). The floor makes the error
/// fall back to a scaled absolute difference near zero; its default value
/// ABS_FLOOR / REL_TOL turns the check `rel_err <= REL_TOL` into
/// `|a - b| <= ABS_FLOOR` when both values vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    rel_err_floor(a, b, ABS_FLOOR / REL_TOL)
}

/// Relative error with an explicit scale floor.
pub fn rel_err_floor(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// n! as f64, exact for n <= 20.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Binomial coefficient as f64.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Sum of a slice by pairwise (tree) reduction. The result depends only on
/// the order of the slice, never on thread count, and accumulates less
/// rounding than a left fold on long inputs.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Mean and standard error of a sample by pairwise reduction.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2, "need at least two samples");
    let mean = pairwise_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
