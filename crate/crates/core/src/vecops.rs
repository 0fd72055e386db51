//! Dense vector helpers over `&[f64]`.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Lowest index whose value is within `tol` of the minimum.
pub(crate) fn argmin_lowest(v: &[f64], tol: f64) -> usize {
    let (lo, _) = min_max(v);
    v.iter().position(|&x| x <= lo + tol).unwrap_or(0)
}

/// Lowest index whose value is within `tol` of the maximum.
pub(crate) fn argmax_lowest(v: &[f64], tol: f64) -> usize {
    let (_, hi) = min_max(v);
    v.iter().position(|&x| x >= hi - tol).unwrap_or(0)
}
