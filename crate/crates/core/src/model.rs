//! Model parameters, the dispersion relation of the leading edge, the
//! linear spreading speed and essential-spectrum curves.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Default bound on `d1 + 1/d1`.
pub const DEFAULT_D1_CAP: f64 = 20.0;

/// Absolute tolerance for dispersion roots.
pub const TOL_ROOT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Rescaled diffusivity `d1 = 1/chi`.
    pub d1: f64,
    /// Singular parameter, `delta^2 = sigma/chi`.
    pub delta: f64,
    /// Frame speed.
    pub c: f64,
}

impl ModelParams {
    pub fn new(d1: f64, delta: f64, c: f64) -> Result<Self> {
        Self::with_cap(d1, delta, c, DEFAULT_D1_CAP)
    }

    pub fn with_cap(d1: f64, delta: f64, c: f64, cap: f64) -> Result<Self> {
        if !(d1.is_finite() && d1 > 0.0) {
            return Err(Error::InvalidParams(format!("d1 must be positive and finite, got {d1}")));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidParams(format!("delta must be nonnegative and finite, got {delta}")));
        }
        if !c.is_finite() {
            return Err(Error::InvalidParams(format!("c must be finite, got {c}")));
        }
        if d1 + 1.0 / d1 > cap {
            return Err(Error::InvalidParams(format!("d1 + 1/d1 = {} exceeds the cap {cap}", d1 + 1.0 / d1)));
        }
        Ok(ModelParams { d1, delta, c })
    }

    /// Parameters in the frame of the linear spreading speed.
    pub fn at_linear_speed(d1: f64, delta: f64) -> Result<Self> {
        Self::new(d1, delta, 2.0 * d1.sqrt())
    }

    pub fn delta2(&self) -> f64 {
        self.delta * self.delta
    }

    /// Chemotactic sensitivity `chi = 1/d1`.
    pub fn chi(&self) -> f64 {
        1.0 / self.d1
    }

    /// `sigma = delta^2 chi`.
    pub fn sigma(&self) -> f64 {
        self.delta2() / self.d1
    }

    pub fn eta_lin(&self) -> f64 {
        1.0 / self.d1.sqrt()
    }

    pub fn nu_lin(&self) -> f64 {
        -self.eta_lin()
    }

    pub fn c_lin(&self) -> f64 {
        2.0 * self.d1.sqrt()
    }
}

/// First factor `d1 nu^2 + c nu + 1 - lambda` (the u-block at the origin).
pub fn leading_factor(lambda: Complex64, nu: Complex64, p: &ModelParams) -> Complex64 {
    p.d1 * nu * nu + p.c * nu + 1.0 - lambda
}

/// Second factor `delta^2 nu^2 - 1` (the v-block).
pub fn chemical_factor(nu: Complex64, p: &ModelParams) -> Complex64 {
    p.delta2() * nu * nu - 1.0
}

/// Dispersion relation `d_c(lambda, nu)` of the linearization at `u = v = 0`.
pub fn dispersion(lambda: Complex64, nu: Complex64, p: &ModelParams) -> Complex64 {
    leading_factor(lambda, nu, p) * chemical_factor(nu, p)
}

/// `partial_nu d_c(lambda, nu)`.
pub fn dispersion_dnu(lambda: Complex64, nu: Complex64, p: &ModelParams) -> Complex64 {
    (2.0 * p.d1 * nu + p.c) * chemical_factor(nu, p)
        + leading_factor(lambda, nu, p) * (2.0 * p.delta2() * nu)
}

/// Dispersion relation of the linearization at `u = v = 1`, including the
/// chemotactic coupling `v_xx` in the u-row.
pub fn wake_dispersion(lambda: Complex64, nu: Complex64, p: &ModelParams) -> Complex64 {
    let a = p.d1 * nu * nu + p.c * nu - 1.0 - lambda;
    a * chemical_factor(nu, p) - nu * nu
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRoot {
    pub lambda: Complex64,
    pub nu: Complex64,
    pub is_double: bool,
    pub is_pinched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpreading {
    pub c_lin: f64,
    pub root: DispersionRoot,
    /// Coefficient of `-lambda` in the expansion at the double root.
    pub d10: f64,
    /// Coefficient of `nu^2` in the expansion at the double root.
    pub d02: f64,
    pub newton_iterations: usize,
}

/// Linear spreading speed and its pinched double root.
pub fn linear_spreading_speed(d1: f64, delta: f64) -> Result<LinearSpreading> {
    ModelParams::new(d1, delta, 0.0)?;
    pinched_double_root_from(d1, delta, -1.0 / d1.sqrt(), 2.0 * d1.sqrt())
}

/// Newton solve of `d_c(0, nu) = partial_nu d_c(0, nu) = 0` in `(nu, c)`
/// from an arbitrary starting point.
pub fn pinched_double_root_from(d1: f64, delta: f64, nu0: f64, c0: f64) -> Result<LinearSpreading> {
    let d2 = delta * delta;
    let (mut nu, mut c) = (nu0, c0);
    let mut last = f64::INFINITY;
    for it in 0..50 {
        let f1 = (d1 * nu * nu + c * nu + 1.0) * (d2 * nu * nu - 1.0);
        let f2 = (2.0 * d1 * nu + c) * (d2 * nu * nu - 1.0) + (d1 * nu * nu + c * nu + 1.0) * 2.0 * d2 * nu;
        let res = f1.abs().max(f2.abs());
        last = res;
        if res <= TOL_ROOT && it > 0 {
            return finish(d1, delta, nu, c, it);
        }
        let j11 = f2;
        let j12 = nu * (d2 * nu * nu - 1.0);
        let j21 = 2.0 * d1 * (d2 * nu * nu - 1.0)
            + 2.0 * (2.0 * d1 * nu + c) * 2.0 * d2 * nu
            + (d1 * nu * nu + c * nu + 1.0) * 2.0 * d2;
        let j22 = (d2 * nu * nu - 1.0) + nu * 2.0 * d2 * nu;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            if res <= TOL_ROOT {
                return finish(d1, delta, nu, c, it);
            }
            return Err(Error::NewtonDiverged { iterations: it, residual: res });
        }
        nu -= (j22 * f1 - j12 * f2) / det;
        c -= (-j21 * f1 + j11 * f2) / det;
    }
    Err(Error::NewtonDiverged { iterations: 50, residual: last })
}

fn finish(d1: f64, delta: f64, nu: f64, c: f64, iterations: usize) -> Result<LinearSpreading> {
    let p = ModelParams { d1, delta, c };
    let z = Complex64::new(0.0, 0.0);
    let nuc = Complex64::new(nu, 0.0);
    let is_double = dispersion(z, nuc, &p).norm() <= TOL_ROOT && dispersion_dnu(z, nuc, &p).norm() <= TOL_ROOT;
    let d10 = 1.0 - delta * delta * nu * nu;
    Ok(LinearSpreading {
        c_lin: c,
        root: DispersionRoot { lambda: z, nu: nuc, is_double, is_pinched: is_pinched(d1, c, nu) },
        d10,
        d02: d1 * d10,
        newton_iterations: iterations,
    })
}

/// Tracks the two nu-roots of the leading factor emanating from the double
/// root `nu_star` as `lambda` increases along the positive real axis, and
/// checks that they end up in opposite half planes.
pub fn is_pinched(d1: f64, c: f64, nu_star: f64) -> bool {
    let roots = |lambda: f64| -> [Complex64; 2] {
        let disc = Complex64::new(c * c - 4.0 * d1 * (1.0 - lambda), 0.0).sqrt();
        [(-c + disc) / (2.0 * d1), (-c - disc) / (2.0 * d1)]
    };
    let mut cur = [Complex64::new(nu_star, 0.0); 2];
    // split the double root along its local expansion nu = nu* +- sqrt(lambda/d1)
    let l0 = 1e-10;
    let r = roots(l0);
    let s = (l0 / d1).sqrt();
    let guess = [Complex64::new(nu_star + s, 0.0), Complex64::new(nu_star - s, 0.0)];
    if (r[0] - guess[0]).norm() + (r[1] - guess[1]).norm() <= (r[1] - guess[0]).norm() + (r[0] - guess[1]).norm() {
        cur = r;
    } else {
        cur[0] = r[1];
        cur[1] = r[0];
    }
    let mut lambda = l0;
    while lambda < 1e8 {
        lambda *= 1.5;
        let r = roots(lambda);
        if (r[0] - cur[0]).norm() + (r[1] - cur[1]).norm() <= (r[1] - cur[0]).norm() + (r[0] - cur[1]).norm() {
            cur = r;
        } else {
            cur = [r[1], r[0]];
        }
    }
    cur[0].re * cur[1].re < 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeState {
    LeadingEdge,
    Wake,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub eta: f64,
    pub samples: Vec<(f64, Complex64)>,
}

impl SpectrumCurve {
    /// Sample with the largest real part: `(k, Re lambda)`.
    pub fn max_real(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::NAN, f64::NEG_INFINITY), |acc, (k, l)| if l.re > acc.1 { (*k, l.re) } else { acc })
    }
}

/// Essential-spectrum curves `lambda(k)` at `nu = i k - eta`.
///
/// The leading edge uses the first factor of the dispersion relation; the
/// wake uses the linearization at `u = v = 1`. Both are linear in `lambda`,
/// so each returns one curve.
pub fn essential_spectrum(
    p: &ModelParams,
    state: EdgeState,
    eta: f64,
    k_range: (f64, f64),
    n_samples: usize,
) -> Result<Vec<SpectrumCurve>> {
    if n_samples < 2 {
        return Err(Error::InvalidParams("need at least two k samples".into()));
    }
    if !(k_range.1 > k_range.0) {
        return Err(Error::InvalidParams(format!("empty k range {k_range:?}")));
    }
    if p.delta > 0.0 && (eta.abs() - 1.0 / p.delta).abs() < 1e-6 {
        return Err(Error::Domain(format!("weight eta = {eta} sits on the chemical root 1/delta")));
    }
    let samples = (0..n_samples)
        .map(|i| {
            let k = k_range.0 + (k_range.1 - k_range.0) * i as f64 / (n_samples - 1) as f64;
            let nu = Complex64::new(-eta, k);
            let lambda = match state {
                EdgeState::LeadingEdge => p.d1 * nu * nu + p.c * nu + 1.0,
                EdgeState::Wake => p.d1 * nu * nu + p.c * nu - 1.0 - nu * nu / chemical_factor(nu, p),
            };
            (k, lambda)
        })
        .collect();
    Ok(vec![SpectrumCurve { eta, samples }])
}
