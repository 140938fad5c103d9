//! Far-field/core Newton continuation of traveling fronts.
//!
//! A front is written as
//!
//! ```text
//!     u = chi_-(x) + w_u(x) + chi_+(x) T_u(x)
//!     v = chi_-(x) + w_v(x) + chi_+(x) T_v(x)
//! ```
//!
//! with an explicit tail `T_u = (a x + b) e^{nu x}` for pulled fronts
//! (`nu = nu_lin`, `c = c_lin` pinned) or `T_u = b e^{-eta x}` for pushed
//! fronts (`eta` and `c` free, tied by the dispersion relation). The v tail
//! carries the closure factor `1/s`, `s = 1 - delta^2 nu^2`.
//!
//! Derivatives at a node are differences (sixth order by default, fourth
//! order on request) of the sampled `u` itself, corrected by the exact tail derivatives wherever `chi_+` is
//! active. The cutoff therefore never enters the truncation error, and the
//! tail is an exact discrete solution of the linearized far field.
//!
//! The core unknowns are scaled by `exp(eta_w max(x, 0))` with
//! `eta_w = 1.1 eta`, which realizes the weighted space of the core without
//! the `e^{eta L}` ill-conditioning of the raw grid values. Each node carries
//! its own copy of the tail parameters (tied by equality rows) and a running
//! phase integral, so the Jacobian stays banded.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::banded::{BandLu, BandMatrix};
use crate::numerics::cutoff::{chi_minus, chi_plus};
use crate::numerics::stencil::{Stencil, Stencils};
use crate::pme::{self, FrontKind, PmeProfile};
use nalgebra::{DMatrix, DVector};

/// Newton tolerance on the 2-norm of the scaled residual.
pub const NEWTON_TOL: f64 = 1e-10;

/// Below this `delta^2` the chemotactic term is kept as `u v_xx` instead of
/// `u (v - u)/delta^2`, which would amplify round-off.
const DIRECT_FORM_BELOW: f64 = 1e-3;

/// Default accuracy order of the difference stencils.
pub const DEFAULT_ACCURACY: usize = 6;

/// Step in `delta^2` when continuing up from the porous-medium front.
const DELTA2_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    /// Half-width.
    pub l: f64,
    pub dx: f64,
    pub n: usize,
    /// Accuracy order of the difference stencils (4 or 6).
    pub accuracy: usize,
}

impl Grid {
    pub fn new(l: f64, dx: f64) -> Result<Grid> {
        Self::with_accuracy(l, dx, DEFAULT_ACCURACY)
    }

    pub fn with_accuracy(l: f64, dx: f64, accuracy: usize) -> Result<Grid> {
        if !(accuracy == 4 || accuracy == 6) {
            return Err(Error::InvalidParams(format!("stencil accuracy must be 4 or 6, got {accuracy}")));
        }
        if !(l.is_finite() && dx.is_finite() && l > 0.0 && dx > 0.0) {
            return Err(Error::InvalidParams(format!("grid needs L > 0 and dx > 0, got L = {l}, dx = {dx}")));
        }
        let cells = 2.0 * l / dx;
        let nc = cells.round();
        if (cells - nc).abs() > 1e-9 * cells {
            return Err(Error::InvalidParams(format!("2L/dx = {cells} is not an integer")));
        }
        let n = nc as usize + 1;
        if n < 41 {
            return Err(Error::InvalidParams(format!("grid has {n} nodes, need at least 41")));
        }
        Ok(Grid { l, dx: 2.0 * l / nc, n, accuracy })
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -self.l + j as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::new(20.0, 0.1).unwrap()
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Condition estimate above which a converged solve is flagged as resonant.
    pub cond_max: f64,
    /// Closure factors `|s|` below this are treated as resonant.
    pub s_min: f64,
    /// Core weight excess, `eta_w = (1 + core_weight) eta`.
    pub core_weight: f64,
    /// Shift of the porous-medium reference profile in the phase condition
    /// (fresh solves only).
    pub phase_shift: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { newton_tol: NEWTON_TOL, max_iter: 25, cond_max: 1e12, s_min: 0.02, core_weight: 0.1, phase_shift: 0.0 }
    }
}

/// Converged front on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSolution {
    pub grid: Grid,
    pub kind: FrontKind,
    /// `d1`, `delta` and the speed `c`.
    pub params: ModelParams,
    /// Core corrections on the grid (unscaled).
    pub w_u: Vec<f64>,
    pub w_v: Vec<f64>,
    /// Far-field coefficients in the solver's gauge; zero `a` for pushed fronts.
    pub a: f64,
    pub b: f64,
    pub nu_farfield: f64,
    pub c: f64,
    pub eta_ps: Option<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// `||J||_1 ||J^{-1}||_1` estimate at the solution.
    pub condition: f64,
    /// Far-field closure factor `1 - delta^2 nu^2`.
    pub closure: f64,
}

/// `(p0 + p1 x) e^{nu x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ExpPoly {
    nu: f64,
    p0: f64,
    p1: f64,
}

impl ExpPoly {
    fn deriv(&self, x: f64, m: usize) -> f64 {
        if self.p0 == 0.0 && self.p1 == 0.0 {
            return 0.0;
        }
        let e = (self.nu * x).exp();
        if m == 0 {
            return (self.p0 + self.p1 * x) * e;
        }
        let nm = self.nu.powi(m as i32);
        let nm1 = self.nu.powi(m as i32 - 1);
        (nm * (self.p0 + self.p1 * x) + m as f64 * nm1 * self.p1) * e
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Parameters `[a, b]`.
    Pulled { c: f64, nu: f64 },
    /// Parameters `[b, eta, c]`.
    Pushed,
}

impl Mode {
    fn nparams(&self) -> usize {
        match self {
            Mode::Pulled { .. } => 2,
            Mode::Pushed => 3,
        }
    }
}

/// Tails of u and v and their parameter derivatives.
struct Tails {
    u: ExpPoly,
    v: ExpPoly,
    du: Vec<ExpPoly>,
    dv: Vec<ExpPoly>,
    c: f64,
    /// index of `c` among the parameters, if free
    c_index: Option<usize>,
}

fn tails(mode: Mode, delta2: f64, p: &[f64]) -> Tails {
    let z = |nu| ExpPoly { nu, p0: 0.0, p1: 0.0 };
    match mode {
        Mode::Pulled { c, nu } => {
            let (a, b) = (p[0], p[1]);
            let s = 1.0 - delta2 * nu * nu;
            let k = 2.0 * delta2 * nu / (s * s);
            Tails {
                u: ExpPoly { nu, p0: b, p1: a },
                v: ExpPoly { nu, p0: b / s + k * a, p1: a / s },
                du: vec![ExpPoly { nu, p0: 0.0, p1: 1.0 }, ExpPoly { nu, p0: 1.0, p1: 0.0 }],
                dv: vec![ExpPoly { nu, p0: k, p1: 1.0 / s }, ExpPoly { nu, p0: 1.0 / s, p1: 0.0 }],
                c,
                c_index: None,
            }
        }
        Mode::Pushed => {
            let (b, eta, c) = (p[0], p[1], p[2]);
            let nu = -eta;
            let s = 1.0 - delta2 * eta * eta;
            Tails {
                u: ExpPoly { nu, p0: b, p1: 0.0 },
                v: ExpPoly { nu, p0: b / s, p1: 0.0 },
                du: vec![ExpPoly { nu, p0: 1.0, p1: 0.0 }, ExpPoly { nu, p0: 0.0, p1: -b }, z(nu)],
                dv: vec![
                    ExpPoly { nu, p0: 1.0 / s, p1: 0.0 },
                    ExpPoly { nu, p0: 2.0 * delta2 * eta * b / (s * s), p1: -b / s },
                    z(nu),
                ],
                c,
                c_index: Some(2),
            }
        }
    }
}

/// Discretized far-field/core problem at fixed parameters.
struct Problem {
    grid: Grid,
    d1: f64,
    delta2: f64,
    mode: Mode,
    k: usize,
    m: usize,
    xs: Vec<f64>,
    chim: Vec<f64>,
    chip: Vec<f64>,
    /// Core scalings of the u and v components.
    omega: [Vec<f64>; 2],
    st: Stencils,
    uref: Vec<f64>,
    duref: Vec<f64>,
    tw: Vec<f64>,
    direct: bool,
}

/// Values `[f, f', f'']` at a node and their sensitivity to the scaled core unknowns.
struct NodeField {
    val: [f64; 3],
}

impl Problem {
    fn new(grid: Grid, d1: f64, delta2: f64, mode: Mode, eta_w: f64, uref: Vec<f64>, duref: Vec<f64>) -> Problem {
        let xs = grid.xs();
        let eta_w = eta_w.min(300.0 / grid.l);
        // past eta = 1/delta the v core carries the slower e^{-x/delta} mode
        let eta_wv = if delta2 > 0.0 { eta_w.min(0.9 / delta2.sqrt()) } else { eta_w };
        let scale = |rate: f64| xs.iter().map(|x| (rate * x.max(0.0)).exp()).collect::<Vec<f64>>();
        let k = mode.nparams();
        let mut tw = vec![grid.dx; grid.n];
        tw[0] *= 0.5;
        tw[grid.n - 1] *= 0.5;
        Problem {
            grid,
            d1,
            delta2,
            mode,
            k,
            m: 3 + k,
            chim: xs.iter().map(|x| chi_minus(*x)).collect(),
            chip: xs.iter().map(|x| chi_plus(*x)).collect(),
            omega: [scale(eta_w), scale(eta_wv)],
            xs,
            st: Stencils::with_accuracy(grid.n, grid.dx, grid.accuracy),
            uref,
            duref,
            tw,
            direct: delta2 < DIRECT_FORM_BELOW,
        }
    }

    #[inline]
    fn var(&self, j: usize, slot: usize) -> usize {
        j * self.m + slot
    }

    fn size(&self) -> usize {
        self.grid.n * self.m
    }

    fn stencil(&self, order: usize) -> &Stencil {
        self.st.get(order)
    }

    /// `E^m_j(f)`: exact tail derivative where `chi_+` is flat, differences
    /// of `chi_+ f` corrected by the exact derivative otherwise.
    fn tail_op(&self, f: &ExpPoly, j: usize, m: usize) -> f64 {
        let cj = self.chip[j];
        if m == 0 {
            return if cj == 0.0 { 0.0 } else { cj * f.deriv(self.xs[j], 0) };
        }
        let mut acc = if cj == 0.0 { 0.0 } else { cj * f.deriv(self.xs[j], m) };
        let (s, w) = self.stencil(m).at(j);
        for (i, wk) in w.iter().enumerate() {
            let dc = self.chip[s + i] - cj;
            if dc != 0.0 {
                acc += wk * dc * f.deriv(self.xs[s + i], 0);
            }
        }
        acc
    }

    /// `[f, f', f'']` of `chi_- + what/omega + chi_+ T` at node j, for
    /// component `comp` (0 for u, 1 for v).
    fn field(&self, what: &[f64], t: &ExpPoly, j: usize, comp: usize) -> NodeField {
        let om = &self.omega[comp];
        let mut val = [0.0; 3];
        val[0] = self.chim[j] + what[j] / om[j] + self.tail_op(t, j, 0);
        for m in 1..=2 {
            let (s, w) = self.stencil(m).at(j);
            let mut acc = 0.0;
            for (i, wk) in w.iter().enumerate() {
                let kk = s + i;
                acc += wk * (self.chim[kk] + what[kk] / om[kk]);
            }
            val[m] = acc + self.tail_op(t, j, m);
        }
        NodeField { val }
    }

    fn params_at<'a>(&self, z: &'a [f64], j: usize) -> &'a [f64] {
        &z[self.var(j, 2)..self.var(j, 2) + self.k]
    }

    /// Residual `(R_u, R_v)` and their partials with respect to
    /// `(U0, U1, U2)`, `(V0, V1, V2)` and `c`.
    fn local(&self, u: &[f64; 3], v: &[f64; 3], c: f64) -> ([f64; 2], [[f64; 3]; 2], [[f64; 3]; 2], [f64; 2]) {
        let (d1, d2) = (self.d1, self.delta2);
        let [u0, u1, u2] = *u;
        let [v0, v1, v2] = *v;
        let logistic = u0 - u0 * u0;
        let (ru, du, dv) = if self.direct {
            (
                d1 * u2 + c * u1 + u1 * v1 + u0 * v2 + logistic,
                [v2 + 1.0 - 2.0 * u0, c + v1, d1],
                [0.0, u1, u0],
            )
        } else {
            (
                d1 * u2 + c * u1 + u1 * v1 + u0 * (v0 - u0) / d2 + logistic,
                [(v0 - 2.0 * u0) / d2 + 1.0 - 2.0 * u0, c + v1, d1],
                [u0 / d2, u1, 0.0],
            )
        };
        let rv = d2 * v2 + u0 - v0;
        ([ru, rv], [du, [1.0, 0.0, 0.0]], [dv, [-1.0, 0.0, d2]], [u1, 0.0])
    }

    /// Residual and (optionally) Jacobian triplets.
    fn assemble(&self, z: &[f64], want_jac: bool) -> (Vec<f64>, Vec<(usize, usize, f64)>) {
        let n = self.grid.n;
        let (m, k) = (self.m, self.k);
        let islot = 2 + k;
        let wu: Vec<f64> = (0..n).map(|j| z[self.var(j, 0)]).collect();
        let wv: Vec<f64> = (0..n).map(|j| z[self.var(j, 1)]).collect();
        let mut f = vec![0.0; self.size()];
        let mut jac = Vec::with_capacity(if want_jac { self.size() * 40 } else { 0 });
        f[0] = z[self.var(0, islot)];
        if want_jac {
            jac.push((0, self.var(0, islot), 1.0));
        }
        for j in 0..n {
            let p = self.params_at(z, j);
            let t = tails(self.mode, self.delta2, p);
            let uf = self.field(&wu, &t.u, j, 0);
            let last = j == n - 1;
            let base = 1 + j * m;
            // phase increment
            let pw = self.tw[j] * self.duref[j];
            let q = pw * (uf.val[0] - self.uref[j]);
            if j == 0 || last {
                f[base] = wu[j];
                if want_jac {
                    jac.push((base, self.var(j, 0), 1.0));
                }
                if last && self.delta2 > 0.0 {
                    // w_v' + w_v/delta = 0: admits the decaying chemical mode
                    let om = &self.omega[1];
                    let rate = 1.0 / self.delta2.sqrt();
                    let (s, w) = self.stencil(1).at(j);
                    let h = self.grid.dx * om[j];
                    f[base + 1] = h * (w.iter().enumerate().map(|(i, wk)| wk * wv[s + i] / om[s + i]).sum::<f64>() + rate * wv[j] / om[j]);
                    if want_jac {
                        for (i, wk) in w.iter().enumerate() {
                            jac.push((base + 1, self.var(s + i, 1), h * wk / om[s + i]));
                        }
                        jac.push((base + 1, self.var(j, 1), h * rate / om[j]));
                    }
                } else {
                    f[base + 1] = wv[j];
                    if want_jac {
                        jac.push((base + 1, self.var(j, 1), 1.0));
                    }
                }
            } else {
                let vf = self.field(&wv, &t.v, j, 1);
                let (r, du, dv, dc) = self.local(&uf.val, &vf.val, t.c);
                f[base] = self.omega[0][j] * r[0];
                f[base + 1] = self.omega[1][j] * r[1];
                if want_jac {
                    for e in 0..2 {
                        let row = base + e;
                        let om = self.omega[e][j];
                        // core unknowns
                        for (slot, dd) in [(0usize, &du[e]), (1usize, &dv[e])] {
                            if dd[0] != 0.0 {
                                jac.push((row, self.var(j, slot), om * dd[0] / self.omega[slot][j]));
                            }
                            for ord in 1..=2 {
                                if dd[ord] == 0.0 {
                                    continue;
                                }
                                let (s, w) = self.stencil(ord).at(j);
                                for (i, wk) in w.iter().enumerate() {
                                    jac.push((row, self.var(s + i, slot), om * dd[ord] * wk / self.omega[slot][s + i]));
                                }
                            }
                        }
                        // tail parameters
                        for pi in 0..k {
                            let mut g = 0.0;
                            for ord in 0..3 {
                                if du[e][ord] != 0.0 {
                                    g += du[e][ord] * self.tail_op(&t.du[pi], j, ord);
                                }
                                if dv[e][ord] != 0.0 {
                                    g += dv[e][ord] * self.tail_op(&t.dv[pi], j, ord);
                                }
                            }
                            if t.c_index == Some(pi) {
                                g += dc[e];
                            }
                            if g != 0.0 {
                                jac.push((row, self.var(j, 2 + pi), om * g));
                            }
                        }
                    }
                }
            }
            if !last {
                let pn = self.params_at(z, j + 1);
                for pi in 0..k {
                    f[base + 2 + pi] = pn[pi] - p[pi];
                    if want_jac {
                        jac.push((base + 2 + pi, self.var(j + 1, 2 + pi), 1.0));
                        jac.push((base + 2 + pi, self.var(j, 2 + pi), -1.0));
                    }
                }
                let row = base + 2 + k;
                f[row] = z[self.var(j + 1, islot)] - z[self.var(j, islot)] - q;
                if want_jac {
                    jac.push((row, self.var(j + 1, islot), 1.0));
                    jac.push((row, self.var(j, islot), -1.0));
                    self.push_phase_jac(&mut jac, row, j, &t, -pw);
                }
            } else {
                // Neumann on the scaled core at the right end
                let (s, w) = self.stencil(1).at(j);
                f[base + 2] = w.iter().enumerate().map(|(i, wk)| wk * wu[s + i]).sum::<f64>() * self.grid.dx;
                if want_jac {
                    for (i, wk) in w.iter().enumerate() {
                        jac.push((base + 2, self.var(s + i, 0), wk * self.grid.dx));
                    }
                }
                f[base + 3] = z[self.var(j, islot)] + q;
                if want_jac {
                    jac.push((base + 3, self.var(j, islot), 1.0));
                    self.push_phase_jac(&mut jac, base + 3, j, &t, pw);
                }
                if let Mode::Pushed = self.mode {
                    let (eta, c) = (p[1], p[2]);
                    f[base + 4] = c - self.d1 * eta - 1.0 / eta;
                    if want_jac {
                        jac.push((base + 4, self.var(j, 3), -self.d1 + 1.0 / (eta * eta)));
                        jac.push((base + 4, self.var(j, 4), 1.0));
                    }
                }
            }
        }
        (f, jac)
    }

    fn push_phase_jac(&self, jac: &mut Vec<(usize, usize, f64)>, row: usize, j: usize, t: &Tails, coef: f64) {
        jac.push((row, self.var(j, 0), coef / self.omega[0][j]));
        for pi in 0..self.k {
            let g = self.tail_op(&t.du[pi], j, 0);
            if g != 0.0 {
                jac.push((row, self.var(j, 2 + pi), coef * g));
            }
        }
    }

    fn jacobian(&self, trip: &[(usize, usize, f64)]) -> BandMatrix<f64> {
        let (mut kl, mut ku) = (0, 0);
        for &(i, j, _) in trip {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let mut a = BandMatrix::zeros(self.size(), kl, ku);
        for &(i, j, v) in trip {
            a.add(i, j, v);
        }
        a
    }

    fn norm(f: &[f64]) -> f64 {
        f.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Packs a solution-like state into the unknown vector, with the phase
    /// integral accumulated so that its rows hold exactly.
    fn pack(&self, w_u: &[f64], w_v: &[f64], p: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let mut z = vec![0.0; self.size()];
        for j in 0..n {
            z[self.var(j, 0)] = w_u[j] * self.omega[0][j];
            z[self.var(j, 1)] = w_v[j] * self.omega[1][j];
            for (pi, pv) in p.iter().enumerate() {
                z[self.var(j, 2 + pi)] = *pv;
            }
        }
        let t = tails(self.mode, self.delta2, p);
        let wu: Vec<f64> = (0..n).map(|j| z[self.var(j, 0)]).collect();
        let mut acc = 0.0;
        for j in 0..n {
            z[self.var(j, 2 + self.k)] = acc;
            let u = self.field(&wu, &t.u, j, 0).val[0];
            acc += self.tw[j] * self.duref[j] * (u - self.uref[j]);
        }
        z
    }

    fn unpack(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.grid.n;
        let wu = (0..n).map(|j| z[self.var(j, 0)] / self.omega[0][j]).collect();
        let wv = (0..n).map(|j| z[self.var(j, 1)] / self.omega[1][j]).collect();
        (wu, wv, self.params_at(z, 0).to_vec())
    }

    /// Damped Newton. Returns the solution vector, residual norm, iteration
    /// count and the factorization at the solution.
    fn newton(&self, mut z: Vec<f64>, opts: &SolverOptions) -> Result<(Vec<f64>, f64, usize, BandLu<f64>, f64)> {
        let (mut f, mut trip) = self.assemble(&z, true);
        let mut norm = Self::norm(&f);
        let mut it = 0;
        let mut polished = false;
        loop {
            let jac = self.jacobian(&trip);
            let jnorm = jac.norm_one();
            let lu = jac.lu()?;
            let converged = norm <= opts.newton_tol;
            if (converged && polished) || (converged && it >= opts.max_iter) {
                return Ok((z, norm, it, lu, jnorm));
            }
            if it >= opts.max_iter || !norm.is_finite() {
                return Err(Error::NewtonDiverged { iterations: it, residual: norm });
            }
            let mut dz: Vec<f64> = f.iter().map(|v| -v).collect();
            lu.solve_in_place(&mut dz);
            let mut t = 1.0;
            let (znew, fnew, nnew) = loop {
                let zt: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + t * b).collect();
                let (ft, _) = self.assemble(&zt, false);
                let nt = Self::norm(&ft);
                if nt.is_finite() && (nt <= (1.0 - 1e-4 * t) * norm || converged) {
                    break (zt, ft, nt);
                }
                t *= 0.5;
                if t < 1.0 / 256.0 {
                    if converged {
                        break (z.clone(), f.clone(), norm);
                    }
                    return Err(Error::NewtonDiverged { iterations: it, residual: norm });
                }
            };
            if converged {
                polished = true;
                if nnew > norm {
                    // the polishing step did not help; keep the current iterate
                    continue;
                }
            }
            z = znew;
            f = fnew;
            norm = nnew;
            it += 1;
            trip = self.assemble(&z, true).1;
        }
    }
}

// ---------------------------------------------------------------------------
// Solutions

impl FrontSolution {
    fn mode(&self) -> Mode {
        match self.eta_ps {
            Some(_) => Mode::Pushed,
            None => Mode::Pulled { c: self.c, nu: self.nu_farfield },
        }
    }

    fn param_vec(&self) -> Vec<f64> {
        match self.eta_ps {
            Some(eta) => vec![self.b, eta, self.c],
            None => vec![self.a, self.b],
        }
    }

    fn eta(&self) -> f64 {
        -self.nu_farfield
    }

    fn tails(&self) -> Tails {
        tails(self.mode(), self.params.delta2(), &self.param_vec())
    }

    /// Reconstructed `u` at the grid nodes.
    pub fn u(&self) -> Vec<f64> {
        self.derivs().0.into_iter().map(|d| d[0]).collect()
    }

    /// Reconstructed `v` at the grid nodes.
    pub fn v(&self) -> Vec<f64> {
        self.derivs().1.into_iter().map(|d| d[0]).collect()
    }

    /// `[f, f', f'']` of u and v at every node, with the exact tail
    /// derivatives in the far field.
    pub fn derivs(&self) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
        let p = self.scratch_problem(vec![0.0; self.grid.n], vec![0.0; self.grid.n]);
        let t = self.tails();
        let wu: Vec<f64> = self.w_u.iter().zip(&p.omega[0]).map(|(a, b)| a * b).collect();
        let wv: Vec<f64> = self.w_v.iter().zip(&p.omega[1]).map(|(a, b)| a * b).collect();
        let du = (0..self.grid.n).map(|j| p.field(&wu, &t.u, j, 0).val).collect();
        let dv = (0..self.grid.n).map(|j| p.field(&wv, &t.v, j, 1).val).collect();
        (du, dv)
    }

    fn scratch_problem(&self, uref: Vec<f64>, duref: Vec<f64>) -> Problem {
        let eta_w = 1.1 * self.eta();
        Problem::new(self.grid, self.params.d1, self.params.delta2(), self.mode(), eta_w, uref, duref)
    }

    /// Point where `u = 1/2`, by 8-point Lagrange interpolation.
    pub fn x_half(&self) -> f64 {
        x_half(&self.grid.xs(), &self.u())
    }

    /// Tail coefficients re-expressed in the gauge where `u(x0) = 1/2`,
    /// `x0 = -sqrt2 log 2`. Independent of the phase condition.
    pub fn canonical_tail(&self) -> (f64, f64) {
        let d = self.x_half() - pme::X0;
        let e = (self.nu_farfield * d).exp();
        (self.a * e, (self.a * d + self.b) * e)
    }

    /// Smallest reconstructed value of u and v on the grid.
    pub fn min_values(&self) -> (f64, f64) {
        let (du, dv) = self.derivs();
        let mu = du.iter().map(|d| d[0]).fold(f64::INFINITY, f64::min);
        let mv = dv.iter().map(|d| d[0]).fold(f64::INFINITY, f64::min);
        (mu, mv)
    }

    pub fn is_positive(&self) -> bool {
        let (a, b) = self.min_values();
        a > 0.0 && b > 0.0
    }

    /// Exact porous-medium pushed front (`delta = 0`, `d1 <= 1/2`) sampled
    /// onto the ansatz with `b = 1`, `eta = 1/(sqrt2 d1)`.
    pub fn from_pme(d1: f64, grid: Grid) -> Result<FrontSolution> {
        if !(d1 > 0.0 && d1 <= 0.5) {
            return Err(Error::Domain(format!("explicit front needs 0 < d1 <= 1/2, got {d1}")));
        }
        let eta = pme::eta_ps(d1);
        let c = pme::c_pm(d1);
        let t = ExpPoly { nu: -eta, p0: 1.0, p1: 0.0 };
        let xs = grid.xs();
        let w: Vec<f64> = xs
            .iter()
            .map(|x| pme::explicit_profile(*x, d1).map(|u| u - chi_minus(*x) - chi_plus(*x) * t.deriv(*x, 0)))
            .collect::<Result<_>>()?;
        let mut sol = FrontSolution {
            grid,
            kind: FrontKind::Pushed,
            params: ModelParams::new(d1, 0.0, c)?,
            w_u: w.clone(),
            w_v: w,
            a: 0.0,
            b: 1.0,
            nu_farfield: -eta,
            c,
            eta_ps: Some(eta),
            residual_norm: f64::NAN,
            iterations: 0,
            condition: f64::NAN,
            closure: 1.0,
        };
        sol.residual_norm = discretization_residual(&sol);
        Ok(sol)
    }
}

fn x_half(xs: &[f64], u: &[f64]) -> f64 {
    let n = xs.len();
    let j = match (0..n - 1).find(|&j| u[j] >= 0.5 && u[j + 1] < 0.5) {
        Some(j) => j,
        None => return f64::NAN,
    };
    let lo = j.saturating_sub(3).min(n - 8);
    let nodes: Vec<usize> = (lo..lo + 8).collect();
    let interp = |x: f64| -> f64 {
        nodes
            .iter()
            .map(|&i| {
                let l: f64 = nodes.iter().filter(|&&k| k != i).map(|&k| (x - xs[k]) / (xs[i] - xs[k])).product();
                l * u[i]
            })
            .sum()
    };
    let (mut a, mut b) = (xs[j], xs[j + 1]);
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if interp(mid) >= 0.5 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Scaled residual vector of the discretized problem at a solution, with the
/// solution itself as phase reference.
pub fn build_residual(sol: &FrontSolution) -> Vec<f64> {
    let (du, _) = sol.derivs();
    let uref = du.iter().map(|d| d[0]).collect();
    let duref = du.iter().map(|d| d[1]).collect();
    let p = sol.scratch_problem(uref, duref);
    let z = p.pack(&sol.w_u, &sol.w_v, &sol.param_vec());
    p.assemble(&z, false).0
}

/// Largest unscaled residual of the two field equations over interior nodes.
pub fn discretization_residual(sol: &FrontSolution) -> f64 {
    let (du, dv) = sol.derivs();
    let p = sol.scratch_problem(vec![0.0; sol.grid.n], vec![0.0; sol.grid.n]);
    (1..sol.grid.n - 1)
        .map(|j| {
            let (r, ..) = p.local(&du[j], &dv[j], sol.c);
            r[0].abs().max(r[1].abs())
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Solves

fn reference_from_solution(sol: &FrontSolution) -> (Vec<f64>, Vec<f64>) {
    let (du, _) = sol.derivs();
    (du.iter().map(|d| d[0]).collect(), du.iter().map(|d| d[1]).collect())
}

fn solve_at(
    d1: f64,
    delta: f64,
    mode: Mode,
    init: &FrontSolution,
    reference: (Vec<f64>, Vec<f64>),
    opts: &SolverOptions,
) -> Result<FrontSolution> {
    let grid = init.grid;
    let delta2 = delta * delta;
    let eta_init = match mode {
        Mode::Pulled { nu, .. } => -nu,
        Mode::Pushed => init.eta(),
    };
    let s0 = 1.0 - delta2 * eta_init * eta_init;
    if s0.abs() < opts.s_min {
        return Err(Error::ResonanceDetected { closure: s0, condition: f64::INFINITY });
    }
    let eta_w = (1.0 + opts.core_weight) * eta_init;
    let p = Problem::new(grid, d1, delta2, mode, eta_w, reference.0, reference.1);
    let params = match mode {
        Mode::Pulled { .. } => match init.eta_ps {
            None => vec![init.a, init.b],
            Some(_) => vec![0.0, init.b],
        },
        Mode::Pushed => match init.eta_ps {
            Some(eta) => vec![init.b, eta, init.c],
            None => vec![init.b, init.eta(), init.c],
        },
    };
    let z0 = p.pack(&init.w_u, &init.w_v, &params);
    let (z, norm, it, lu, jnorm) = match p.newton(z0, opts) {
        Ok(r) => r,
        Err(e) if s0.abs() < 5.0 * opts.s_min => {
            let _ = e;
            return Err(Error::ResonanceDetected { closure: s0, condition: f64::NAN });
        }
        Err(e) => return Err(e),
    };
    let cond = jnorm * lu.inverse_norm_one_estimate();
    let (w_u, w_v, pv) = p.unpack(&z);
    let (kind, a, b, nu, c, eta_ps) = match mode {
        Mode::Pulled { c, nu } => (FrontKind::Pulled, pv[0], pv[1], nu, c, None),
        Mode::Pushed => (FrontKind::Pushed, 0.0, pv[0], -pv[1], pv[2], Some(pv[1])),
    };
    let s = 1.0 - delta2 * nu * nu;
    if cond > opts.cond_max || s.abs() < opts.s_min {
        return Err(Error::ResonanceDetected { closure: s, condition: cond });
    }
    if let Some(eta) = eta_ps {
        let eta_lin = 1.0 / d1.sqrt();
        if eta < eta_lin - 1e-4 {
            return Err(Error::DegenerateDecay { eta, eta_lin });
        }
    }
    Ok(FrontSolution {
        grid,
        kind,
        params: ModelParams::new(d1, delta, c)?,
        w_u,
        w_v,
        a,
        b,
        nu_farfield: nu,
        c,
        eta_ps,
        residual_norm: norm,
        iterations: it,
        condition: cond,
        closure: s,
    })
}

/// Porous-medium initial state for a fresh solve and its phase reference.
fn pme_start(d1: f64, grid: Grid, pushed: bool, opts: &SolverOptions) -> Result<(FrontSolution, (Vec<f64>, Vec<f64>))> {
    let prof = if pushed || d1 <= 0.5 { PmeProfile::explicit(d1)? } else { PmeProfile::new(d1)? };
    let xs = grid.xs();
    let (nu, a, b, eta_ps, c) = if pushed {
        let eta = pme::eta_ps(d1);
        (-eta, 0.0, 1.0, Some(eta), d1 * eta + 1.0 / eta)
    } else {
        let eta = 1.0 / d1.sqrt();
        let (a, b) = if d1 == 0.5 {
            (0.0, 1.0)
        } else {
            let window = if d1 < 0.5 { (3.0, 8.0) } else { (6.0, 12.0) };
            let m = 120;
            let samples: Vec<(f64, f64)> = (0..=m)
                .map(|i| {
                    let x = window.0 + (window.1 - window.0) * i as f64 / m as f64;
                    prof.eval(x).map(|(u, _)| (x, u))
                })
                .collect::<Result<_>>()?;
            pme::fit_tail(&samples, eta)?
        };
        (-eta, a, b, None, 2.0 * d1.sqrt())
    };
    let t = ExpPoly { nu, p0: b, p1: a };
    let mut w = Vec::with_capacity(grid.n);
    let mut uref = Vec::with_capacity(grid.n);
    let mut duref = Vec::with_capacity(grid.n);
    for x in &xs {
        let (u, du) = prof.eval(x - opts.phase_shift)?;
        // fade out any tail mismatch before the right boundary
        let fade = chi_minus(x - grid.l + 4.0);
        w.push((u - chi_minus(*x) - chi_plus(*x) * t.deriv(*x, 0)) * fade);
        uref.push(u);
        duref.push(du);
    }
    let sol = FrontSolution {
        grid,
        kind: if pushed { FrontKind::Pushed } else { FrontKind::Pulled },
        params: ModelParams::new(d1, 0.0, c)?,
        w_u: w.clone(),
        w_v: w,
        a,
        b,
        nu_farfield: nu,
        c,
        eta_ps,
        residual_norm: f64::NAN,
        iterations: 0,
        condition: f64::NAN,
        closure: 1.0,
    };
    Ok((sol, (uref, duref)))
}

fn pulled_mode(d1: f64) -> Mode {
    Mode::Pulled { c: 2.0 * d1.sqrt(), nu: -1.0 / d1.sqrt() }
}

/// Solves from the porous-medium front at `delta = 0` and continues up in
/// `delta^2`, halving the step on failure.
fn solve_fresh(d1: f64, delta: f64, grid: Grid, pushed: bool, opts: &SolverOptions) -> Result<FrontSolution> {
    ModelParams::new(d1, delta, 0.0)?;
    if pushed && d1 > PUSHED_START_MAX {
        // the explicit front with d1 > 1/2 decays slower than eta_lin, so it
        // would lead onto the wrong root; come up in d1 from the pushed side
        return continue_pushed_in_d1(d1, delta, grid, opts);
    }
    let mode = if pushed { Mode::Pushed } else { pulled_mode(d1) };
    let (start, reference) = pme_start(d1, grid, pushed, opts)?;
    let mut sol = solve_at(d1, 0.0, mode, &start, reference, opts)?;
    let target = delta * delta;
    let mut d2 = 0.0;
    let mut step = DELTA2_STEP;
    while d2 < target {
        let mut next = (d2 + step).min(target);
        // step over the band where the v closure 1/s is singular
        let eta = sol.eta();
        let s_of = |t: f64| 1.0 - t * eta * eta;
        if s_of(d2) > 0.0 && s_of(next) < 3.0 * opts.s_min {
            next = next.max((1.0 + 3.0 * opts.s_min) / (eta * eta)).min(target);
        }
        match solve_at(d1, next.sqrt(), mode, &sol, reference_from_solution(&sol), opts) {
            Ok(s) => {
                sol = s;
                d2 = next;
            }
            Err(e @ Error::ResonanceDetected { .. }) => return Err(e),
            Err(e) => {
                step *= 0.5;
                if step < DELTA2_STEP / 32.0 {
                    return Err(e);
                }
            }
        }
    }
    Ok(sol)
}

/// Largest `d1` at which a fresh pushed solve starts from the explicit front.
const PUSHED_START_MAX: f64 = 0.48;

/// Step in `d1` when continuing pushed fronts towards the transition.
const D1_STEP: f64 = 0.005;

fn continue_pushed_in_d1(d1: f64, delta: f64, grid: Grid, opts: &SolverOptions) -> Result<FrontSolution> {
    let mut sol = solve_fresh(PUSHED_START_MAX, delta, grid, true, opts)?;
    let mut at = PUSHED_START_MAX;
    let mut step = D1_STEP;
    while at < d1 {
        let next = (at + step).min(d1);
        match solve_at(next, delta, Mode::Pushed, &sol, reference_from_solution(&sol), opts) {
            Ok(s) => {
                sol = s;
                at = next;
            }
            Err(e @ (Error::ResonanceDetected { .. } | Error::DegenerateDecay { .. })) => return Err(e),
            Err(e) => {
                step *= 0.5;
                if step < D1_STEP / 64.0 {
                    return Err(e);
                }
            }
        }
    }
    Ok(sol)
}

fn check_init(init: &FrontSolution, grid: &Grid) -> Result<()> {
    if init.grid != *grid {
        return Err(Error::InvalidParams("initial guess lives on a different grid".into()));
    }
    Ok(())
}

/// Pulled front at `c = 2 sqrt(d1)`. Without `init` the porous-medium front
/// is continued in `delta^2`.
pub fn solve_pulled(d1: f64, delta: f64, grid: &Grid, init: Option<&FrontSolution>) -> Result<FrontSolution> {
    solve_pulled_with(d1, delta, grid, init, &SolverOptions::default())
}

pub fn solve_pulled_with(
    d1: f64,
    delta: f64,
    grid: &Grid,
    init: Option<&FrontSolution>,
    opts: &SolverOptions,
) -> Result<FrontSolution> {
    match init {
        None => solve_fresh(d1, delta, *grid, false, opts),
        Some(init) => {
            check_init(init, grid)?;
            ModelParams::new(d1, delta, 0.0)?;
            solve_at(d1, delta, pulled_mode(d1), init, reference_from_solution(init), opts)
        }
    }
}

/// Pushed front with free speed and decay rate.
pub fn solve_pushed(d1: f64, delta: f64, grid: &Grid, init: Option<&FrontSolution>) -> Result<FrontSolution> {
    solve_pushed_with(d1, delta, grid, init, &SolverOptions::default())
}

pub fn solve_pushed_with(
    d1: f64,
    delta: f64,
    grid: &Grid,
    init: Option<&FrontSolution>,
    opts: &SolverOptions,
) -> Result<FrontSolution> {
    match init {
        None => solve_fresh(d1, delta, *grid, true, opts),
        Some(init) => {
            check_init(init, grid)?;
            ModelParams::new(d1, delta, 0.0)?;
            solve_at(d1, delta, Mode::Pushed, init, reference_from_solution(init), opts)
        }
    }
}

// ---------------------------------------------------------------------------
// Transition

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionPoint {
    pub delta2: f64,
    pub d1_star: f64,
    /// `d a / d d1` of the canonical-gauge coefficient at the root.
    pub a_slope: f64,
    /// Canonical `a` at the returned root.
    pub a_residual: f64,
    pub evaluations: usize,
}

/// Root of `d1 -> a(d1, delta)` inside `bracket`.
pub fn find_transition(delta: f64, grid: &Grid, bracket: (f64, f64)) -> Result<TransitionPoint> {
    find_transition_with(delta, grid, bracket, None, &SolverOptions::default()).map(|r| r.0)
}

/// As [`find_transition`], warm-starting from `init` when given; also
/// returns the pulled front at the root.
pub fn find_transition_with(
    delta: f64,
    grid: &Grid,
    bracket: (f64, f64),
    init: Option<&FrontSolution>,
    opts: &SolverOptions,
) -> Result<(TransitionPoint, FrontSolution)> {
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    let mut evals = 0;
    let mut last: Option<FrontSolution> = init.cloned();
    let mut eval = |d1: f64, last: &mut Option<FrontSolution>| -> Result<(f64, FrontSolution)> {
        evals += 1;
        let sol = solve_pulled_with(d1, delta, grid, last.as_ref(), opts)?;
        *last = Some(sol.clone());
        Ok((sol.canonical_tail().0, sol))
    };
    // start at the end nearest to the warm start
    let (mut flo, slo) = eval(lo, &mut last)?;
    let (mut fhi, shi) = eval(hi, &mut last)?;
    let (mut lo, mut hi) = (lo, hi);
    if flo == 0.0 {
        last = Some(slo);
        hi = lo;
    } else if fhi == 0.0 {
        lo = hi;
    } else if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket { lo, hi, a_lo: flo, a_hi: fhi });
    }
    let _ = shi;
    let mut best = if flo.abs() < fhi.abs() { (lo, flo) } else { (hi, fhi) };
    let mut side = 0i32;
    let mut root_sol = last.clone();
    for _ in 0..60 {
        if best.1.abs() <= 1e-9 || hi - lo < 1e-13 {
            break;
        }
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let (fx, sx) = eval(x, &mut last)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
            root_sol = Some(sx);
        }
        if fx == 0.0 {
            break;
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    let (d1_star, a_star) = best;
    let mut root = match root_sol {
        Some(s) if s.params.d1 == d1_star => s,
        _ => solve_pulled_with(d1_star, delta, grid, last.as_ref(), opts)?,
    };
    root.kind = FrontKind::Transition;
    let h = 1e-4;
    let ap = solve_pulled_with(d1_star + h, delta, grid, Some(&root), opts)?.canonical_tail().0;
    let am = solve_pulled_with(d1_star - h, delta, grid, Some(&root), opts)?.canonical_tail().0;
    let tp = TransitionPoint {
        delta2: delta * delta,
        d1_star,
        a_slope: (ap - am) / (2.0 * h),
        a_residual: a_star,
        evaluations: evals + 2,
    };
    Ok((tp, root))
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    D1,
    Delta2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSolve {
    Pushed,
    Pulled,
    Transition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub vary: SweepVar,
    pub start: f64,
    pub end: f64,
    pub step: f64,
    /// Value of the parameter that is not varied (ignored by transition sweeps,
    /// which always vary `delta^2`).
    pub fixed: f64,
    pub solve: SweepSolve,
    pub grid: Grid,
    /// Half-width of the `d1` bracket around the predicted transition.
    pub bracket_halfwidth: f64,
}

impl SweepPlan {
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.end < self.start {
            return vec![];
        }
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub d1: f64,
    pub delta2: f64,
    pub c: f64,
    /// Canonical-gauge `a` (pulled and transition rows).
    pub a: f64,
    pub eta_ps: f64,
    pub d1_star: f64,
    pub a_slope: f64,
    pub residual: f64,
    /// Error code for gap rows.
    pub status: Option<&'static str>,
}

impl SweepRecord {
    fn gap(d1: f64, delta2: f64, e: &Error) -> SweepRecord {
        SweepRecord {
            d1,
            delta2,
            c: f64::NAN,
            a: f64::NAN,
            eta_ps: f64::NAN,
            d1_star: f64::NAN,
            a_slope: f64::NAN,
            residual: f64::NAN,
            status: Some(e.code()),
        }
    }

    pub fn is_gap(&self) -> bool {
        self.status.is_some()
    }
}

/// Natural-parameter continuation. Errors become gap rows; the next row
/// warm-starts from the last good solution, jumping over the gap, and falls
/// back to a fresh solve if that fails. A fresh solve still reports a
/// resonant target, so gaps stay where the closure factor vanishes.
pub fn sweep(plan: &SweepPlan) -> Vec<SweepRecord> {
    let opts = SolverOptions::default();
    let mut out = vec![];
    let mut last: Option<FrontSolution> = None;
    let mut last_tp: Option<TransitionPoint> = None;
    let mut prev_tp: Option<TransitionPoint> = None;
    for val in plan.values() {
        let (d1, delta2) = match (plan.solve, plan.vary) {
            (SweepSolve::Transition, _) => (f64::NAN, val),
            (_, SweepVar::D1) => (val, plan.fixed),
            (_, SweepVar::Delta2) => (plan.fixed, val),
        };
        let delta = delta2.max(0.0).sqrt();
        let rec = match plan.solve {
            SweepSolve::Pushed | SweepSolve::Pulled => {
                let pushed = plan.solve == SweepSolve::Pushed;
                let run = |init: Option<&FrontSolution>| {
                    if pushed {
                        solve_pushed_with(d1, delta, &plan.grid, init, &opts)
                    } else {
                        solve_pulled_with(d1, delta, &plan.grid, init, &opts)
                    }
                };
                let res = match last.as_ref() {
                    Some(init) => run(Some(init)).or_else(|_| run(None)),
                    None => run(None),
                };
                match res {
                    Ok(sol) => {
                        let rec = SweepRecord {
                            d1,
                            delta2,
                            c: sol.c,
                            a: if pushed { 0.0 } else { sol.canonical_tail().0 },
                            eta_ps: sol.eta_ps.unwrap_or(f64::NAN),
                            d1_star: f64::NAN,
                            a_slope: f64::NAN,
                            residual: sol.residual_norm,
                            status: None,
                        };
                        last = Some(sol);
                        rec
                    }
                    Err(e) => SweepRecord::gap(d1, delta2, &e),
                }
            }
            SweepSolve::Transition => {
                let pred = match (prev_tp, last_tp) {
                    (Some(p), Some(q)) if q.delta2 > p.delta2 => {
                        q.d1_star + (q.d1_star - p.d1_star) / (q.delta2 - p.delta2) * (delta2 - q.delta2)
                    }
                    (_, Some(q)) => q.d1_star + pme::d12() * (delta2 - q.delta2),
                    _ => pme::transition_expansion(delta),
                };
                let hw = plan.bracket_halfwidth;
                let attempt = |init: Option<&FrontSolution>| -> Result<(TransitionPoint, FrontSolution)> {
                    let mut w = hw;
                    let mut err = None;
                    for _ in 0..3 {
                        match find_transition_with(delta, &plan.grid, (pred - w, pred + w), init, &opts) {
                            Ok(r) => return Ok(r),
                            Err(e @ Error::NoBracket { .. }) => {
                                err = Some(e);
                                w *= 3.0;
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    Err(err.unwrap())
                };
                let res = match last.as_ref() {
                    Some(init) => attempt(Some(init)).or_else(|_| attempt(None)),
                    None => attempt(None),
                };
                match res {
                    Ok((tp, sol)) => {
                        let rec = SweepRecord {
                            d1: tp.d1_star,
                            delta2,
                            c: sol.c,
                            a: tp.a_residual,
                            eta_ps: f64::NAN,
                            d1_star: tp.d1_star,
                            a_slope: tp.a_slope,
                            residual: sol.residual_norm,
                            status: None,
                        };
                        prev_tp = last_tp;
                        last_tp = Some(tp);
                        last = Some(sol);
                        rec
                    }
                    Err(e) => SweepRecord::gap(pred, delta2, &e),
                }
            }
        };
        out.push(rec);
    }
    out
}

// ---------------------------------------------------------------------------
// Quadratic fit

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
}

/// Least squares of `d1_star` against `(1, delta^2, delta^4)`.
pub fn quadratic_fit(points: &[(f64, f64)]) -> Result<QuadraticFit> {
    if points.len() < 5 {
        return Err(Error::IllConditioned(format!("{} points, need at least 5", points.len())));
    }
    let n = points.len();
    let a = DMatrix::from_fn(n, 3, |i, k| points[i].0.powi(k as i32));
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::IllConditioned(format!("design matrix singular values {smax:.3e} / {smin:.3e}")));
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let r = &a * &coef - &y;
    Ok(QuadraticFit { c0: coef[0], c1: coef[1], c2: coef[2], rms: (r.norm_squared() / n as f64).sqrt(), condition: smax / smin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_grid() -> Grid {
        Grid::new(10.0, 0.2).unwrap()
    }

    #[test]
    fn grid_validation() {
        let g = Grid::default();
        assert_eq!(g.n, 401);
        assert!((g.dx * (g.n - 1) as f64 - 2.0 * g.l).abs() < 1e-12);
        assert!(Grid::new(1.0, 0.1).is_err());
        assert!(Grid::new(20.0, 0.3).is_err());
        assert!(Grid::new(-1.0, 0.1).is_err());
        assert!(Grid::with_accuracy(20.0, 0.1, 5).is_err());
    }

    #[test]
    fn exp_poly_derivatives() {
        let f = ExpPoly { nu: -1.3, p0: 0.7, p1: -0.4 };
        let h = 1e-4;
        for x in [-1.0, 0.5, 3.0] {
            for m in 1..=2 {
                let fd = (f.deriv(x + h, m - 1) - f.deriv(x - h, m - 1)) / (2.0 * h);
                assert!((fd - f.deriv(x, m)).abs() < 1e-7, "m={m} x={x}");
            }
        }
    }

    fn fd_jacobian_check(mode: Mode, delta2: f64, params: &[f64]) {
        let grid = small_grid();
        let n = grid.n;
        let xs = grid.xs();
        let uref: Vec<f64> = xs.iter().map(|x| 0.5 * (1.0 - (x / 2.0).tanh())).collect();
        let duref: Vec<f64> = xs.iter().map(|x| -0.25 / (x / 2.0).cosh().powi(2)).collect();
        let p = Problem::new(grid, 0.45, delta2, mode, 1.6, uref.clone(), duref);
        let wu: Vec<f64> = xs.iter().map(|x| 0.1 * (-x * x / 4.0).exp()).collect();
        let wv: Vec<f64> = xs.iter().map(|x| 0.05 * (-x * x / 3.0).exp() * (1.0 + 0.3 * x)).collect();
        let mut z = p.pack(&wu, &wv, params);
        for (i, v) in z.iter_mut().enumerate() {
            // break the per-node parameter copies slightly
            *v += 1e-3 * ((i as f64) * 0.37).sin();
        }
        let (_, trip) = p.assemble(&z, true);
        let jac = p.jacobian(&trip);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for col in (0..p.size()).step_by(7).chain([p.var(n / 2, 2), p.var(n - 1, 3)]) {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[col] += h;
            zm[col] -= h;
            let fp = p.assemble(&zp, false).0;
            let fm = p.assemble(&zm, false).0;
            for row in 0..p.size() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let an = jac.get(row, col);
                worst = worst.max((fd - an).abs() / (1.0 + an.abs()));
            }
        }
        assert!(worst < 1e-6, "jacobian mismatch {worst:.3e}");
    }

    #[test]
    fn jacobian_matches_differences_pulled() {
        let d1: f64 = 0.45;
        let mode = Mode::Pulled { c: 2.0 * d1.sqrt(), nu: -1.0 / d1.sqrt() };
        fd_jacobian_check(mode, 0.1, &[0.2, 0.9]);
        fd_jacobian_check(mode, 0.0, &[0.2, 0.9]);
        fd_jacobian_check(mode, 5e-4, &[0.2, 0.9]);
    }

    #[test]
    fn jacobian_matches_differences_pushed() {
        fd_jacobian_check(Mode::Pushed, 0.1, &[1.1, 1.5, 1.34]);
        fd_jacobian_check(Mode::Pushed, 0.0, &[1.1, 1.5, 1.34]);
    }

    #[test]
    fn exact_front_residual_floor_and_order() {
        for (acc, lo, hi) in [(4, 12.0, 20.0), (6, 48.0, 80.0)] {
            let r = |dx| FrontSolution::from_pme(0.4, Grid::with_accuracy(20.0, dx, acc).unwrap()).unwrap().residual_norm;
            let (r1, r2) = (r(0.1), r(0.05));
            assert!(r1 < 1e-3, "floor {r1:.3e}");
            let ratio = r1 / r2;
            assert!(ratio > lo && ratio < hi, "accuracy {acc}: refinement ratio {ratio}");
        }
    }

    #[test]
    fn cutoff_alone_is_not_a_solution() {
        let grid = Grid::default();
        let mut sol = FrontSolution::from_pme(0.4, grid).unwrap();
        sol.w_u = vec![0.0; grid.n];
        sol.w_v = vec![0.0; grid.n];
        sol.b = 0.0;
        let r = discretization_residual(&sol);
        assert!(r > 1e-2);
    }

    #[test]
    fn pushed_porous_medium_speed() {
        let sol = solve_pushed(0.4, 0.0, &Grid::default(), None).unwrap();
        assert!(sol.residual_norm <= NEWTON_TOL);
        assert!((sol.c - pme::c_pm(0.4)).abs() < 1e-5, "c = {}", sol.c);
        assert!((sol.eta_ps.unwrap() - pme::eta_ps(0.4)).abs() < 1e-4);
        assert!(sol.is_positive());
    }

    #[test]
    fn pulled_porous_medium_signs() {
        let g = Grid::default();
        let s1 = solve_pulled(1.0, 0.0, &g, None).unwrap();
        assert!(s1.canonical_tail().0 > 0.0);
        let s05 = solve_pulled(0.5, 0.0, &g, None).unwrap();
        assert!(s05.canonical_tail().0.abs() < 1e-6, "a = {}", s05.canonical_tail().0);
    }

    #[test]
    fn quadratic_fit_recovers_planted() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| {
            let t = 0.01 * i as f64;
            (t, 0.5 + 0.0648 * t + 0.0078 * t * t)
        }).collect();
        let f = quadratic_fit(&pts).unwrap();
        assert!((f.c0 - 0.5).abs() < 1e-12);
        assert!((f.c1 - 0.0648).abs() < 1e-12);
        assert!((f.c2 - 0.0078).abs() < 1e-10);
        assert!(quadratic_fit(&pts[..4]).is_err());
        let flat: Vec<(f64, f64)> = (0..6).map(|_| (0.1, 0.5)).collect();
        assert!(matches!(quadratic_fit(&flat), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn empty_sweep() {
        let plan = SweepPlan {
            vary: SweepVar::D1,
            start: 0.5,
            end: 0.4,
            step: 0.01,
            fixed: 0.1,
            solve: SweepSolve::Pushed,
            grid: Grid::default(),
            bracket_halfwidth: 0.01,
        };
        assert!(sweep(&plan).is_empty());
    }

    #[test]
    fn x_half_of_logistic() {
        let xs: Vec<f64> = (0..101).map(|i| -5.0 + 0.1 * i as f64).collect();
        let u: Vec<f64> = xs.iter().map(|x| 1.0 / (1.0 + (x - 0.123f64).exp())).collect();
        assert!((x_half(&xs, &u) - 0.123).abs() < 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sweep_values_are_monotone(start in 0.0f64..1.0, len in 0.0f64..1.0, step in 0.01f64..0.2) {
            let plan = SweepPlan {
                vary: SweepVar::Delta2, start, end: start + len, step, fixed: 0.5,
                solve: SweepSolve::Pulled, grid: Grid::default(), bracket_halfwidth: 0.01,
            };
            let v = plan.values();
            prop_assert!(!v.is_empty());
            prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(*v.last().unwrap() <= start + len + 1e-9);
        }
    }
}
