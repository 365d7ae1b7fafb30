//! Small numeric helpers that `core` does not provide.

pub use core::f64::consts::PI;

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

const I0_SWITCH: f64 = 30.0;

/// Modified Bessel function of the first kind, order zero.
///
/// Power series below 30, the Hankel asymptotic expansion above. Both branches
/// are accurate to better than 1e-13 relative in their range.
pub fn bessel_i0(x: f64) -> f64 {
    let ax = libm::fabs(x);
    if ax < I0_SWITCH {
        let q = ax * ax / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        libm::exp(ax) * scaled_i0_asymptotic(ax)
    }
}

/// `exp(-x) * I0(x)` for `x >= 0`, without overflow for large `x`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let ax = libm::fabs(x);
    if ax < I0_SWITCH {
        libm::exp(-ax) * bessel_i0(ax)
    } else {
        scaled_i0_asymptotic(ax)
    }
}

// e^{-x} I0(x) ~ 1/sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
fn scaled_i0_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (kf * 8.0 * x);
        if libm::fabs(next) >= libm::fabs(term) {
            break;
        }
        term = next;
        sum += term;
        if libm::fabs(term) < 1e-17 * sum {
            break;
        }
    }
    sum / libm::sqrt(2.0 * PI * x)
}

/// Median of a slice (average of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = alloc::vec::Vec::from(values);
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Piecewise-linear interpolation on a sorted axis, clamped at the ends.
/// Returns the bracketing index and the weight of the upper point.
pub(crate) fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    debug_assert!(!axis.is_empty());
    if axis.len() == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    let last = axis.len() - 1;
    if x >= axis[last] {
        return (last - 1, 1.0);
    }
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    let w = (x - axis[lo]) / (axis[hi] - axis[lo]);
    (lo, w)
}
