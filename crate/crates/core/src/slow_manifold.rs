//! Along-trajectory expansions of the slow manifold and the reduced
//! traveling-wave flow at `delta = 0`.

use crate::error::{Error, Result};
use crate::numerics::ode::{hermite, Dopri5};
use crate::numerics::stencil::Stencils;
use crate::pme::X0;

/// `delta = 0` planar vector field `U' = W, W' = -(cW + W^2 + U(1-U))/(d1+U)`.
pub fn reduced_rhs(u: f64, w: f64, c: f64, d1: f64) -> Result<(f64, f64)> {
    if u <= -d1 {
        return Err(Error::Domain(format!("U = {u} <= -d1 = {}", -d1)));
    }
    Ok((w, -(c * w + w * w + u * (1.0 - u)) / (d1 + u)))
}

/// Coefficients of `psi_H = psi_H0 + delta psi_H1 + delta^2 psi_H2 + ...`
/// and `psi_Z = delta psi_Z1 + ...` evaluated along a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiExpansion {
    pub psi_h0: f64,
    /// Identically zero along `delta = 0` trajectories.
    pub psi_h1: f64,
    pub psi_z1: f64,
    pub psi_h2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowManifoldExpansion {
    pub d1: f64,
}

impl SlowManifoldExpansion {
    /// From `(u, u', u'', u''', u'''')` at one point.
    pub fn eval(&self, derivs: [f64; 5]) -> Result<PsiExpansion> {
        eval_psi_expansions(derivs, self.d1)
    }

    /// `psi_H` truncated at second order.
    pub fn psi_h(&self, derivs: [f64; 5], delta: f64) -> Result<f64> {
        let e = self.eval(derivs)?;
        Ok(e.psi_h0 + delta * e.psi_h1 + delta * delta * e.psi_h2)
    }

    /// `psi_Z` truncated at first order.
    pub fn psi_z(&self, derivs: [f64; 5], delta: f64) -> Result<f64> {
        Ok(delta * self.eval(derivs)?.psi_z1)
    }
}

pub fn eval_psi_expansions(derivs: [f64; 5], d1: f64) -> Result<PsiExpansion> {
    let [u, u1, u2, u3, u4] = derivs;
    if u <= -d1 {
        return Err(Error::Domain(format!("u = {u} <= -d1 = {}", -d1)));
    }
    Ok(PsiExpansion {
        psi_h0: u2,
        psi_h1: 0.0,
        psi_z1: u3,
        psi_h2: (u4 - u1 * u3 / d1) / (1.0 + u / d1),
    })
}

/// Expansions on grid data, derivatives from the shared fourth-order stencils.
pub fn psi_expansions_on_grid(u: &[f64], dx: f64, d1: f64) -> Result<Vec<PsiExpansion>> {
    let st = Stencils::new(u.len(), dx);
    let d: Vec<Vec<f64>> = (1..=4).map(|k| st.get(k).apply(u)).collect();
    (0..u.len())
        .map(|j| eval_psi_expansions([u[j], d[0][j], d[1][j], d[2][j], d[3][j]], d1))
        .collect()
}

/// `V = U + delta^2 U''` on a uniform grid.
pub fn reconstruct_v(u: &[f64], dx: f64, delta: f64) -> Vec<f64> {
    if delta == 0.0 {
        return u.to_vec();
    }
    let st = Stencils::new(u.len(), dx);
    let u2 = st.d2.apply(u);
    u.iter().zip(&u2).map(|(a, b)| a + delta * delta * b).collect()
}

/// Trajectory of the reduced flow leaving `(1, 0)` along its unstable
/// direction, translated so that `U(x0) = 1/2`. Returns samples `(x, U, W)`
/// up to `x_end`.
pub fn reduced_front(d1: f64, c: f64, x_end: f64) -> Result<Vec<(f64, f64, f64)>> {
    let k = 1.0 + d1;
    let mu = 0.5 * (-c / k + (c * c / (k * k) + 4.0 / k).sqrt());
    let eps = 1e-9;
    let y0 = [1.0 - eps, -eps * mu];
    let ode = Dopri5 { rtol: 1e-13, atol: 1e-16, h0: 1e-3, h_max: 0.05, max_steps: 2_000_000 };
    let mut out: Vec<(f64, f64, f64, f64)> = vec![];
    let mut half: Option<usize> = None;
    let mut fail = None;
    ode.integrate(
        |_, y, dy| match reduced_rhs(y[0], y[1], c, d1) {
            Ok((a, b)) => {
                dy[0] = a;
                dy[1] = b;
            }
            Err(e) => {
                fail = Some(e);
                dy[0] = 0.0;
                dy[1] = 0.0;
            }
        },
        0.0,
        &y0,
        1e4,
        |t, y, dy| {
            out.push((t, y[0], y[1], dy[1]));
            if half.is_none() && y[0] < 0.5 {
                half = Some(out.len() - 1);
            }
            match half {
                Some(i) => t - out[i].0 < x_end - X0 + 1.0,
                None => true,
            }
        },
    )?;
    if let Some(e) = fail {
        return Err(e);
    }
    let i = half.ok_or_else(|| Error::Convergence("reduced orbit never reached U = 1/2".into()))?;
    let (a, b) = (&out[i - 1], &out[i]);
    let (mut lo, mut hi) = (a.0, b.0);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if hermite(m, a.0, a.1, a.2, b.0, b.1, b.2) > 0.5 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let shift = X0 - 0.5 * (lo + hi);
    Ok(out
        .into_iter()
        .map(|(t, u, w, _)| (t + shift, u, w))
        .filter(|(x, _, _)| *x <= x_end)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pme::{c_pm, derivs_in_u, explicit_profile};

    #[test]
    fn equilibria() {
        assert_eq!(reduced_rhs(0.0, 0.0, 1.3, 0.4).unwrap(), (0.0, 0.0));
        assert_eq!(reduced_rhs(1.0, 0.0, 1.3, 0.4).unwrap(), (0.0, 0.0));
        assert!(reduced_rhs(-0.5, 0.0, 1.0, 0.4).is_err());
    }

    #[test]
    fn rhs_matches_explicit_second_derivative() {
        let d1 = 0.5;
        let [u1, u2, _, _] = derivs_in_u(0.5, d1);
        assert!((u1 + 0.17678).abs() < 1e-5);
        let (_, wp) = reduced_rhs(0.5, u1, c_pm(d1), d1).unwrap();
        assert!((wp - u2).abs() < 1e-14);
    }

    #[test]
    fn psi_at_equilibria() {
        for d1 in [0.1, 0.3, 0.5, 1.0, 3.0] {
            for u in [0.0, 1.0] {
                let e = eval_psi_expansions([u, 0.0, 0.0, 0.0, 0.0], d1).unwrap();
                assert_eq!((e.psi_h0, e.psi_z1, e.psi_h2), (0.0, 0.0, 0.0));
                assert_eq!(e.psi_h1, 0.0);
            }
        }
        assert!(eval_psi_expansions([-1.0, 0.0, 0.0, 0.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn psi_along_explicit_front() {
        let d1 = 0.25;
        let [u1, u2, u3, u4] = derivs_in_u(0.5, d1);
        let e = eval_psi_expansions([0.5, u1, u2, u3, u4], d1).unwrap();
        assert_eq!(e.psi_h0, u2);
        assert_eq!(e.psi_z1, u3);
        let direct = (u4 - u1 * u3 / d1) / (1.0 + 0.5 / d1);
        assert!((e.psi_h2 - direct).abs() < 1e-15);
        let sm = SlowManifoldExpansion { d1 };
        let d = 0.1;
        assert!((sm.psi_h([0.5, u1, u2, u3, u4], d).unwrap() - (u2 + d * d * direct)).abs() < 1e-15);
        assert!((sm.psi_z([0.5, u1, u2, u3, u4], d).unwrap() - d * u3).abs() < 1e-15);
    }

    #[test]
    fn grid_expansions_converge() {
        let d1 = 0.3;
        let mut errs = vec![];
        for dx in [0.1, 0.05] {
            let n = (20.0 / dx) as usize + 1;
            let xs: Vec<f64> = (0..n).map(|j| -10.0 + j as f64 * dx).collect();
            let u: Vec<f64> = xs.iter().map(|x| explicit_profile(*x, d1).unwrap()).collect();
            let g = psi_expansions_on_grid(&u, dx, d1).unwrap();
            let err = u
                .iter()
                .zip(&g)
                .map(|(uu, e)| {
                    let [u1, u2, u3, u4] = derivs_in_u(*uu, d1);
                    let ex = eval_psi_expansions([*uu, u1, u2, u3, u4], d1).unwrap();
                    (ex.psi_h2 - e.psi_h2).abs().max((ex.psi_h0 - e.psi_h0).abs())
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn reconstruct_examples() {
        let u = vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        assert_eq!(reconstruct_v(&u, 0.1, 0.0), u);
        let ones = vec![1.0; 12];
        for v in reconstruct_v(&ones, 0.1, 0.3) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_flow_reproduces_explicit_front() {
        for d1 in [0.2, 0.4] {
            let traj = reduced_front(d1, c_pm(d1), 10.0).unwrap();
            let mut err = 0.0f64;
            for (x, u, _) in traj.iter().filter(|s| s.0 >= -10.0) {
                err = err.max((u - explicit_profile(*x, d1).unwrap()).abs());
            }
            assert!(err < 1e-8, "d1={d1}: {err}");
        }
    }
}
