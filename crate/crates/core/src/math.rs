//! Scalar helpers that `core` does not provide without `std`.

/// log₂(e), the derivative constant of `x·log₂x`.
pub const LOG2_E: f64 = core::f64::consts::LOG2_E;

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn exp2(x: f64) -> f64 {
    libm::exp2(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// `-x·log₂x` with the `0·log 0 = 0` convention.
#[inline]
pub fn neg_xlogx(x: f64) -> f64 {
    if x > 0.0 {
        -x * log2(x)
    } else {
        0.0
    }
}

/// Binary entropy in bits for an argument already known to lie in `[0, 1]`.
#[inline]
pub(crate) fn hb(eps: f64) -> f64 {
    neg_xlogx(eps) + neg_xlogx(1.0 - eps)
}
