//! Scalar helpers on top of `libm` so the crate stays `no_std`.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Logistic function `g(a) = e^a / (1 + e^a)`.
#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + exp(-a))
    } else {
        let e = exp(a);
        e / (1.0 + e)
    }
}

/// `log g(a)` without cancellation for large `|a|`.
#[inline]
pub fn log_sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        -ln_1p(exp(-a))
    } else {
        a - ln_1p(exp(a))
    }
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| exp(v - max)).sum();
    max + ln(sum)
}

/// Standard normal upper tail doubled: `P(|Z| > |z|)`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    libm::erfc(z.abs() / core::f64::consts::SQRT_2)
}

/// Mean of `values` computed as `values[0] + mean(values - values[0])`.
///
/// A constant sequence returns its value bitwise.
pub fn anchored_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(anchor) = it.next() else {
        return 0.0;
    };
    anchor + shifted_mean(values, anchor)
}

/// `mean(values - anchor)`, zero when the iterator is empty.
pub fn shifted_mean(values: impl Iterator<Item = f64>, anchor: f64) -> f64 {
    let mut count = 0usize;
    let mut sum = 0.0;
    for v in values {
        sum += v - anchor;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Population (1/n) variance around the sample mean.
pub fn centered_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Sample standard deviation with the `n - 1` denominator; `None` below two values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some(sqrt(ss / (n - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_in_both_tails() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(800.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0).abs() < 1e-15);
    }

    #[test]
    fn logsumexp_handles_neg_infinity() {
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = [1000.0, 1000.0];
        assert!((logsumexp(&v) - (1000.0 + ln(2.0))).abs() < 1e-12);
    }

    #[test]
    fn anchored_mean_of_constant_is_exact() {
        let c = 0.1 + 0.2;
        let xs = [c; 37];
        assert_eq!(anchored_mean(xs.iter().copied()), c);
    }

    #[test]
    fn normal_p_values() {
        assert!((two_sided_normal_p(0.0) - 1.0).abs() < 1e-15);
        assert!((two_sided_normal_p(1.959_963_985) - 0.05).abs() < 1e-8);
        assert!((two_sided_normal_p(-3.290_526_731) - 0.001).abs() < 1e-8);
    }
}
