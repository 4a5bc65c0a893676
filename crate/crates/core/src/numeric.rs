//! Tolerant comparisons used for every threshold test.
//!
//! Stakes and profits are monetary magnitudes, so comparisons are relative
//! (1e-9) with an absolute floor (1e-12) near zero.

pub const REL_TOL: f64 = 1e-9;
pub const ABS_TOL: f64 = 1e-12;

#[inline]
pub fn tol(a: f64, b: f64) -> f64 {
    (REL_TOL * a.abs().max(b.abs())).max(ABS_TOL)
}

/// `a ≥ b` up to tolerance.
#[inline]
pub fn ge(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a >= b;
    }
    a >= b - tol(a, b)
}

/// `a ≤ b` up to tolerance.
#[inline]
pub fn le(a: f64, b: f64) -> bool {
    ge(b, a)
}

/// `a > b` by more than the tolerance.
#[inline]
pub fn gt(a: f64, b: f64) -> bool {
    !le(a, b)
}

/// `a < b` by more than the tolerance.
#[inline]
pub fn lt(a: f64, b: f64) -> bool {
    !ge(a, b)
}

#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    ge(a, b) && ge(b, a)
}
