//! Smooth cutoff functions for the far-field/core split.
//!
//! `chi_minus` equals 1 for `x <= -3` and 0 for `x >= -2`, with a quintic
//! smoothstep in between; `chi_plus(x) = chi_minus(-x)`.

fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

pub fn chi_minus(x: f64) -> f64 {
    1.0 - smoothstep(x + 3.0)
}

pub fn chi_plus(x: f64) -> f64 {
    chi_minus(-x)
}
