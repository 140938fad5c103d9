//! Weighted linearizations and point spectrum.
//!
//! The linearization about a front `(U, V)` in the comoving frame acts on
//! `(p, q)` as
//!
//! ```text
//!     d1 p'' + (c + V') p' + (V'' + 1 - 2U) p + U q'' + U' q' = lambda p
//!                                      delta^2 q'' + p - q    = 0
//! ```
//!
//! so the eigenproblem is the pencil `A - lambda K` with `K` selecting the
//! u-block. Perturbations are measured in the weight `e^{g(x)}`, where
//! `g' = kappa` moves smoothly from `eta_minus` behind the front to
//! `eta_plus` ahead of it; the weighted operator is obtained by replacing
//! `d/dx` with `d/dx - kappa`.
//!
//! Finite eigenvalues come from shift-invert about `lambda = 1`. Since `K`
//! vanishes on the v-block and on the Dirichlet rows, only the interior
//! u-block of `(A - K)^{-1}` matters and the reduced dense matrix has no
//! infinite eigenvalues left to discard.

use crate::continuation::{self, FrontSolution, Grid, SolverOptions};
use crate::error::{Error, Result};
use crate::numerics::banded::BandMatrix;
use crate::numerics::stencil::Stencil;
use crate::pme::FrontKind;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::Write;

/// Candidates moving by more than this between `L` and `1.25 L` are
/// essential-spectrum artifacts.
pub const DRIFT_TOL: f64 = 1e-4;

/// Default cap on `|lambda|` for window scans.
pub const DEFAULT_LAMBDA_MAX: f64 = 10.0;

/// Shift used for the shift-invert transform.
const SHIFT: f64 = 1.0;

/// The state the operator is linearized about.
#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    Front(FrontSolution),
    /// Constant state `(u0, v0)` at speed `c`.
    Constant { grid: Grid, d1: f64, delta: f64, c: f64, u0: f64, v0: f64 },
}

impl Base {
    pub fn grid(&self) -> Grid {
        match self {
            Base::Front(f) => f.grid,
            Base::Constant { grid, .. } => *grid,
        }
    }

    /// `(d1, delta, c)`.
    pub fn params(&self) -> (f64, f64, f64) {
        match self {
            Base::Front(f) => (f.params.d1, f.params.delta, f.c),
            Base::Constant { d1, delta, c, .. } => (*d1, *delta, *c),
        }
    }

    fn fields(&self) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
        match self {
            Base::Front(f) => f.derivs(),
            Base::Constant { grid, u0, v0, .. } => (vec![[*u0, 0.0, 0.0]; grid.n], vec![[*v0, 0.0, 0.0]; grid.n]),
        }
    }

    /// The same base on a wider grid with the same spacing.
    fn widened(&self, factor: f64) -> Result<Base> {
        let g = self.grid();
        let cells = (factor * 2.0 * g.l / g.dx).ceil();
        let grid = Grid::with_accuracy(0.5 * cells * g.dx, g.dx, g.accuracy)?;
        Ok(match self {
            Base::Front(f) => {
                let (d1, delta) = (f.params.d1, f.params.delta);
                // the condition estimate grows with L; resonance is still caught
                // by the closure factor
                let opts = SolverOptions { cond_max: f64::INFINITY, ..SolverOptions::default() };
                let wide = match f.kind {
                    FrontKind::Pushed => continuation::solve_pushed_with(d1, delta, &grid, None, &opts)?,
                    FrontKind::Pulled | FrontKind::Transition => {
                        continuation::solve_pulled_with(d1, delta, &grid, None, &opts)?
                    }
                };
                Base::Front(wide)
            }
            Base::Constant { d1, delta, c, u0, v0, .. } => {
                Base::Constant { grid, d1: *d1, delta: *delta, c: *c, u0: *u0, v0: *v0 }
            }
        })
    }
}

/// Coefficients of one operator row on `[p, p', p'', q, q', q'']`.
pub type Row = [f64; 6];

#[derive(Debug, Clone)]
pub struct WeightedLinearization {
    pub base: Base,
    pub eta_minus: f64,
    pub eta_plus: f64,
    /// Interleaved `(p_j, q_j)` unknowns, Dirichlet rows at both ends.
    pub a: BandMatrix<f64>,
    /// Diagonal of `K`: one on interior u-rows, zero elsewhere.
    pub k: Vec<f64>,
    rows: Vec<[Row; 2]>,
    kappa: Vec<f64>,
}

/// Weight exponent slope: `eta_minus` for `x << 0`, `eta_plus` for `x >> 0`.
pub fn weight_slope(x: f64, eta_minus: f64, eta_plus: f64) -> (f64, f64) {
    let t = x.tanh();
    let k = eta_minus + 0.5 * (eta_plus - eta_minus) * (1.0 + t);
    let dk = 0.5 * (eta_plus - eta_minus) * (1.0 - t * t);
    (k, dk)
}

/// Weight exponent `g` with `g' = kappa`, `g(0) = 0`.
pub fn weight_exponent(x: f64, eta_minus: f64, eta_plus: f64) -> f64 {
    // integral of tanh is log cosh, written to avoid overflow
    let log_cosh = x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2;
    0.5 * (eta_minus + eta_plus) * x + 0.5 * (eta_plus - eta_minus) * log_cosh
}

/// Unweighted coefficients at a point of the base state.
pub fn raw_rows(d1: f64, delta: f64, c: f64, u: [f64; 3], v: [f64; 3]) -> [Row; 2] {
    [
        [v[2] + 1.0 - 2.0 * u[0], c + v[1], d1, 0.0, u[1], u[0]],
        [1.0, 0.0, 0.0, -1.0, 0.0, delta * delta],
    ]
}

/// Conjugates a row by `e^{g}`: `d/dx -> d/dx - kappa`.
pub fn conjugate(row: Row, kappa: f64, dkappa: f64) -> Row {
    let mut out = row;
    for b in [0, 3] {
        let (a0, a1, a2) = (row[b], row[b + 1], row[b + 2]);
        out[b] = a0 - kappa * a1 + (kappa * kappa - dkappa) * a2;
        out[b + 1] = a1 - 2.0 * kappa * a2;
        out[b + 2] = a2;
    }
    out
}

impl WeightedLinearization {
    pub fn assemble(front: &FrontSolution, eta_minus: f64, eta_plus: f64) -> WeightedLinearization {
        Self::assemble_base(Base::Front(front.clone()), eta_minus, eta_plus)
    }

    pub fn assemble_base(base: Base, eta_minus: f64, eta_plus: f64) -> WeightedLinearization {
        let grid = base.grid();
        let (d1, delta, c) = base.params();
        let (fu, fv) = base.fields();
        let n = grid.n;
        let s1 = Stencil::with_accuracy(n, grid.dx, 1, grid.accuracy);
        let s2 = Stencil::with_accuracy(n, grid.dx, 2, grid.accuracy);
        let reach = s1.reach().max(s2.reach());
        let bw = 2 * reach + 1;
        let mut a = BandMatrix::zeros(2 * n, bw, bw);
        let mut k = vec![0.0; 2 * n];
        let mut rows = Vec::with_capacity(n);
        let mut kappa = Vec::with_capacity(n);
        for j in 0..n {
            let (kp, dkp) = weight_slope(grid.x(j), eta_minus, eta_plus);
            let raw = raw_rows(d1, delta, c, fu[j], fv[j]);
            let w = [conjugate(raw[0], kp, dkp), conjugate(raw[1], kp, dkp)];
            rows.push(w);
            kappa.push(kp);
            if j == 0 || j == n - 1 {
                a.set(2 * j, 2 * j, 1.0);
                a.set(2 * j + 1, 2 * j + 1, 1.0);
                continue;
            }
            k[2 * j] = 1.0;
            for (r, coef) in w.iter().enumerate() {
                let i = 2 * j + r;
                for comp in 0..2 {
                    let off = 3 * comp;
                    a.add(i, 2 * j + comp, coef[off]);
                    for (st, cf) in [(&s1, coef[off + 1]), (&s2, coef[off + 2])] {
                        if cf == 0.0 {
                            continue;
                        }
                        let (start, wts) = st.at(j);
                        for (m, wt) in wts.iter().enumerate() {
                            a.add(i, 2 * (start + m) + comp, cf * wt);
                        }
                    }
                }
            }
        }
        WeightedLinearization { base, eta_minus, eta_plus, a, k, rows, kappa }
    }

    pub fn grid(&self) -> Grid {
        self.base.grid()
    }

    /// Weighted coefficients of the u- and v-rows at node `j`.
    pub fn rows_at(&self, j: usize) -> [Row; 2] {
        self.rows[j]
    }

    /// Largest coefficient mismatch at the two end nodes against the
    /// weighted constant-coefficient operators about `(1, 1)` and `(0, 0)`.
    pub fn edge_mismatch(&self) -> (f64, f64) {
        let (d1, delta, c) = self.base.params();
        let n = self.grid().n;
        let cmp = |j: usize, s: f64| {
            let (kp, dkp) = (self.kappa[j], 0.0);
            let lim = raw_rows(d1, delta, c, [s, 0.0, 0.0], [s, 0.0, 0.0]);
            let lim = [conjugate(lim[0], kp, dkp), conjugate(lim[1], kp, dkp)];
            let mut m: f64 = 0.0;
            for r in 0..2 {
                for i in 0..6 {
                    m = m.max((lim[r][i] - self.rows[j][r][i]).abs());
                }
            }
            m
        };
        (cmp(0, 1.0), cmp(n - 1, 0.0))
    }

    /// Weighted translation mode `e^{g} (U', V')`, interleaved.
    pub fn translation_mode(&self) -> Vec<f64> {
        let (fu, fv) = self.base.fields();
        let grid = self.grid();
        let mut m = vec![0.0; 2 * grid.n];
        for j in 0..grid.n {
            let w = weight_exponent(grid.x(j), self.eta_minus, self.eta_plus).exp();
            m[2 * j] = w * fu[j][1];
            m[2 * j + 1] = w * fv[j][1];
        }
        m
    }

    /// `max |A m|` relative to `max |m|` for the weighted translation mode
    /// `m`, over rows with centered stencils. The mode does not vanish at
    /// `x = -L`, so the one-sided rows there only measure the truncation.
    pub fn zero_mode_residual(&self) -> f64 {
        let m = self.translation_mode();
        let r = self.a.mul_vec(&m);
        let n = self.grid().n;
        let edge = self.grid().accuracy / 2 + 1;
        let res = r[2 * edge..2 * (n - edge)].iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let nm = m.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        res / nm
    }

    /// All finite eigenvalues of the pencil `(A, K)`.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let n = self.grid().n;
        let ni = n - 2;
        let mut shifted = self.a.clone();
        for (i, k) in self.k.iter().enumerate() {
            if *k != 0.0 {
                shifted.add(i, i, -SHIFT * k);
            }
        }
        let lu = shifted.lu().map_err(|e| Error::EigSolverFailure(format!("shifted pencil is singular: {e}")))?;
        let mut m = DMatrix::<f64>::zeros(ni, ni);
        let mut rhs = vec![0.0; 2 * n];
        for col in 0..ni {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            rhs[2 * (col + 1)] = 1.0;
            lu.solve_in_place(&mut rhs);
            for row in 0..ni {
                m[(row, col)] = rhs[2 * (row + 1)];
            }
        }
        let mu = m.complex_eigenvalues();
        if mu.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::EigSolverFailure("non-finite eigenvalue of the shift-inverted pencil".into()));
        }
        let scale = mu.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        Ok(mu.iter().filter(|z| z.norm() > 1e-14 * scale.max(1.0)).map(|z| SHIFT + 1.0 / z).collect())
    }

    /// Eigenvector for an eigenvalue estimate by inverse iteration.
    pub fn eigenvector(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        let n2 = self.a.n();
        let (kl, ku) = self.a.bandwidths();
        // nudge off the eigenvalue so the factorization stays regular
        let shift = lambda + Complex64::new(1e-9 * (1.0 + lambda.norm()), 1e-9);
        let mut b = BandMatrix::<Complex64>::zeros(n2, kl, ku);
        for i in 0..n2 {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n2) {
                let v = self.a.get(i, j);
                if v != 0.0 {
                    b.set(i, j, Complex64::new(v, 0.0));
                }
            }
            if self.k[i] != 0.0 {
                b.add(i, i, -shift * self.k[i]);
            }
        }
        let lu = b.lu().map_err(|e| Error::EigSolverFailure(format!("inverse iteration: {e}")))?;
        let mut x: Vec<Complex64> = (0..n2).map(|i| Complex64::new(self.k[i], 0.0)).collect();
        for _ in 0..4 {
            let mut y: Vec<Complex64> = x.iter().zip(&self.k).map(|(v, k)| v * k).collect();
            lu.solve_in_place(&mut y);
            let nrm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::EigSolverFailure("inverse iteration broke down".into()));
            }
            x = y.into_iter().map(|v| v / nrm).collect();
        }
        Ok(x)
    }
}

/// Scan window `Re lambda >= -margin`, `|lambda| <= lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub margin: f64,
    pub lambda_max: f64,
}

impl SpectralWindow {
    pub fn new(margin: f64) -> Self {
        SpectralWindow { margin, lambda_max: DEFAULT_LAMBDA_MAX }
    }

    pub fn contains(&self, l: Complex64) -> bool {
        l.re >= -self.margin && l.norm() <= self.lambda_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Stable under `L -> 1.25 L`.
    Point,
    /// Moves with the domain: a discretized piece of essential spectrum.
    Essential,
}

impl Class {
    pub fn as_str(&self) -> &'static str {
        match self {
            Class::Point => "point",
            Class::Essential => "essential",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub lambda: Complex64,
    pub class: Class,
    /// Distance to the nearest eigenvalue on the widened domain.
    pub drift: f64,
    /// Interleaved `(p, q)` on the original grid, unit 2-norm.
    pub eigenvector: Vec<Complex64>,
}

/// Eigenvalues inside `window`, classified by their drift under
/// `L -> 1.25 L`.
pub fn point_spectrum_window(lin: &WeightedLinearization, window: SpectralWindow) -> Result<Vec<Candidate>> {
    if !(window.lambda_max.is_finite() && window.lambda_max > 0.0 && window.margin.is_finite()) {
        return Err(Error::InvalidParams(format!("unbounded spectral window {window:?}")));
    }
    let mut inside: Vec<Complex64> = lin.eigenvalues()?.into_iter().filter(|l| window.contains(*l)).collect();
    inside.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    if inside.is_empty() {
        return Ok(Vec::new());
    }
    let wide_base = lin.base.widened(1.25).map_err(|e| Error::EigSolverFailure(format!("widened base: {e}")))?;
    let wide = WeightedLinearization::assemble_base(wide_base, lin.eta_minus, lin.eta_plus);
    let reference = wide.eigenvalues()?;
    inside
        .into_iter()
        .map(|lambda| {
            let drift = reference.iter().map(|r| (r - lambda).norm()).fold(f64::INFINITY, f64::min);
            let class = if drift <= DRIFT_TOL { Class::Point } else { Class::Essential };
            Ok(Candidate { lambda, class, drift, eigenvector: lin.eigenvector(lambda)? })
        })
        .collect()
}

/// `|<e, m>| / (|e| |m|)` against the weighted translation mode.
pub fn translation_correlation(lin: &WeightedLinearization, eigenvector: &[Complex64]) -> f64 {
    let m = lin.translation_mode();
    let dot: Complex64 = eigenvector.iter().zip(&m).map(|(e, m)| e.conj() * m).sum();
    let ne = eigenvector.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let nm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot.norm() / (ne * nm)
}

/// Weight for a pushed front: a tenth of the way from the linear rate to
/// the smaller of the front's decay rate and the chemical rate `1/delta`.
/// Staying near `eta_lin` keeps the weighted translation mode localized.
pub fn pushed_weight(front: &FrontSolution) -> f64 {
    let eta_lin = front.params.eta_lin();
    let eta = front.eta_ps.unwrap_or(eta_lin);
    let cap = if front.params.delta > 0.0 { eta.min(1.0 / front.params.delta) } else { eta };
    eta_lin + 0.1 * (cap - eta_lin)
}

/// Writes `d1,delta2,re_lambda,im_lambda,class` rows.
pub fn write_csv<W: Write>(out: &mut W, d1: f64, delta2: f64, cands: &[Candidate]) -> std::io::Result<()> {
    for c in cands {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{}", d1, delta2, c.lambda.re, c.lambda.im, c.class.as_str())?;
    }
    Ok(())
}

pub const CSV_HEADER: &str = "d1,delta2,re_lambda,im_lambda,class";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn conjugation_round_trips(row in prop::array::uniform6(-5.0f64..5.0), k in -4.0f64..4.0, dk in -2.0f64..2.0) {
            let back = conjugate(conjugate(row, k, dk), -k, -dk);
            for (a, b) in back.iter().zip(&row) {
                prop_assert!((a - b).abs() < 1e-10 * (1.0 + k * k) * 10.0);
            }
        }
    }

    fn constant(d1: f64, delta: f64, c: f64, s: f64, grid: Grid) -> Base {
        Base::Constant { grid, d1, delta, c, u0: s, v0: s }
    }

    #[test]
    fn conjugation_with_zero_weight_is_identity() {
        let f = FrontSolution::from_pme(0.4, Grid::new(10.0, 0.1).unwrap()).unwrap();
        let lin = WeightedLinearization::assemble(&f, 0.0, 0.0);
        let (fu, fv) = f.derivs();
        for j in [3, 50, 150] {
            assert_eq!(lin.rows_at(j), raw_rows(0.4, 0.0, f.c, fu[j], fv[j]));
        }
    }

    #[test]
    fn weight_exponent_integrates_slope() {
        for x in [-30.0, -2.0, 0.3, 5.0, 40.0] {
            let h = 1e-5;
            let d = (weight_exponent(x + h, 0.2, 1.7) - weight_exponent(x - h, 0.2, 1.7)) / (2.0 * h);
            assert!((d - weight_slope(x, 0.2, 1.7).0).abs() < 1e-8, "{x}");
        }
        assert_eq!(weight_exponent(0.0, 0.2, 1.7), 0.0);
    }

    #[test]
    fn leading_edge_modes_follow_the_dispersion_curve() {
        let d1 = 0.8;
        let p = ModelParams::at_linear_speed(d1, 0.0).unwrap();
        let grid = Grid::default();
        let lin = WeightedLinearization::assemble_base(constant(d1, 0.0, p.c, 0.0, grid), p.eta_lin(), p.eta_lin());
        let mut ev: Vec<f64> = lin.eigenvalues().unwrap().into_iter().map(|l| l.re).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (m, l) in ev.iter().take(10).enumerate() {
            let k = (m + 1) as f64 * std::f64::consts::PI / (2.0 * grid.l);
            let expect = -d1 * k * k;
            assert!((l - expect).abs() < 1e-8, "mode {m}: {l} vs {expect}");
        }
    }

    #[test]
    fn edge_rows_match_constant_limits_ahead() {
        let f = continuation::solve_pushed(0.4, 0.0, &Grid::default(), None).unwrap();
        let eta = pushed_weight(&f);
        let lin = WeightedLinearization::assemble(&f, 0.0, eta);
        let (_, right) = lin.edge_mismatch();
        assert!(right < 1e-10, "{right}");
    }
}
