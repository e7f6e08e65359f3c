//! Log-space arithmetic helpers.

pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Replaces logits by their log-softmax.
pub fn log_softmax_in_place(logits: &mut [f64]) {
    let z = log_sum_exp(logits);
    for v in logits.iter_mut() {
        *v -= z;
    }
}

/// `ln(p)` with `ln(0) = -inf` and no warnings on tiny inputs.
#[inline]
pub fn safe_ln(p: f64) -> f64 {
    if p <= 0.0 {
        LOG_ZERO
    } else {
        p.ln()
    }
}
