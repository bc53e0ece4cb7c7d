//! Float helpers routed through `libm` so the crate builds without `std`.

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

pub(crate) fn powf(base: f64, exp: f64) -> f64 {
    libm::pow(base, exp)
}

pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

pub(crate) fn hypot_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `max(0, log2(x))`, the rate clamp used by every rate formula.
pub(crate) fn log2_plus(x: f64) -> f64 {
    if x <= 1.0 {
        0.0
    } else {
        log2(x)
    }
}
