//! The shift function λ(x) = −ln(1−x)/ln(1+x) and its inverse.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShiftError {
    #[error("shift is defined on (0,1), got {0}")]
    OutsideUnitInterval(f64),
    #[error("shift_inverse needs c > 1, got {0}")]
    NotAboveOne(f64),
}

/// λ(x), which satisfies (1−x) = (1+x)^{−λ(x)}.
pub fn shift(x: f64) -> Result<f64, ShiftError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(ShiftError::OutsideUnitInterval(x));
    }
    Ok(-(-x).ln_1p() / x.ln_1p())
}

/// The α ∈ (0,1) with λ(α) = c, by bisection (λ is increasing).
pub fn shift_inverse(c: f64) -> Result<f64, ShiftError> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(ShiftError::NotAboveOne(c));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if -(-mid).ln_1p() / mid.ln_1p() < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
