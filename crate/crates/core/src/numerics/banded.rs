//! Banded matrices and LU factorization with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl`
//! superdiagonals hold the fill-in produced by row interchanges. Multipliers
//! are kept in place and row swaps only touch the trailing columns, so the
//! factorization is the usual sequence of Gauss transforms `L_k P_k`.

use crate::error::{Error, Result};
use nalgebra::ComplexField;

#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![T::zero(); n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.kl + self.ku || j >= self.n {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    /// Whether `(i, j)` lies inside the declared band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku && j < self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j).unwrap();
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j).unwrap();
        self.data[s] = v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = T::zero();
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                s += self.get(i, j) * *xj;
            }
            *yi = s;
        }
        y
    }

    /// Max-abs-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).modulus()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Max-abs-column-sum norm.
    pub fn norm_one(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for (j, c) in col.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *c += self.get(i, j).modulus();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }

    /// Factorizes in place. Fails with `SingularJacobian` on an exactly
    /// zero pivot.
    pub fn lu(mut self) -> Result<BandLu<T>> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let mut piv = vec![0usize; n];
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).modulus();
            for i in k + 1..=last {
                let v = self.get(i, k).modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 || best < 1e-300 * scale {
                return Err(Error::SingularJacobian { pivot: k });
            }
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    if let Some(s) = self.slot(k, j) {
                        self.data[s] = b;
                    }
                    if let Some(s) = self.slot(p, j) {
                        self.data[s] = a;
                    }
                }
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let si = self.slot(i, k).unwrap();
                let l = self.data[si] / d;
                self.data[si] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=jmax {
                    let ukj = self.data[self.slot(k, j).unwrap()];
                    let s = self.slot(i, j).unwrap();
                    self.data[s] -= l * ukj;
                }
            }
        }
        Ok(BandLu { a: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu<T> {
    a: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: ComplexField<RealField = f64> + Copy> BandLu<T> {
    pub fn n(&self) -> usize {
        self.a.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let a = &self.a;
        let n = a.n;
        let kl = a.kl;
        let reach = kl + a.ku;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                let l = a.data[a.slot(i, k).unwrap()];
                b[i] -= l * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= a.data[a.slot(k, j).unwrap()] * b[j];
            }
            b[k] = s / a.data[a.slot(k, k).unwrap()];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `A^T x = b` (plain transpose, no conjugation) in place.
    pub fn solve_transpose_in_place(&self, b: &mut [T]) {
        let a = &self.a;
        let n = a.n;
        let kl = a.kl;
        let reach = kl + a.ku;
        for k in 0..n {
            let mut s = b[k];
            for i in k.saturating_sub(reach)..k {
                s -= a.data[a.slot(i, k).unwrap()] * b[i];
            }
            b[k] = s / a.data[a.slot(k, k).unwrap()];
        }
        for k in (0..n).rev() {
            let mut s = T::zero();
            for i in k + 1..=(k + kl).min(n - 1) {
                s += a.data[a.slot(i, k).unwrap()] * b[i];
            }
            b[k] -= s;
            b.swap(k, self.piv[k]);
        }
    }
}

impl BandLu<f64> {
    /// Hager–Higham estimate of `||A^{-1}||_1`.
    pub fn inverse_norm_one_estimate(&self) -> f64 {
        let n = self.n();
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            let new_est: f64 = y.iter().map(|v| v.abs()).sum();
            let mut z: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_transpose_in_place(&mut z);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if new_est <= est || zmax <= zx {
                est = est.max(new_est);
                break;
            }
            est = new_est;
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        est
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> (BandMatrix<f64>, DMatrix<f64>) {
        let mut state = seed;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut b = BandMatrix::zeros(n, kl, ku);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal so that pivoting is exercised
                let v = rnd() + if i == j { 0.01 } else { 0.0 };
                b.set(i, j, v);
                d[(i, j)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn solve_matches_dense() {
        for (n, kl, ku) in [(30, 3, 2), (57, 7, 11), (10, 0, 0), (12, 11, 11)] {
            let (b, d) = random_band(n, kl, ku, n as u64);
            let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let lu = b.clone().lu().unwrap();
            let x = lu.solve(&rhs);
            let r = b.mul_vec(&x);
            for i in 0..n {
                assert!((r[i] - rhs[i]).abs() < 1e-9, "n={n} row {i}");
            }
            let mut xt = rhs.clone();
            lu.solve_transpose_in_place(&mut xt);
            let r = d.transpose() * nalgebra::DVector::from_vec(xt);
            for i in 0..n {
                assert!((r[i] - rhs[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn condition_estimate_is_close() {
        let (b, d) = random_band(40, 4, 5, 3);
        let lu = b.lu().unwrap();
        let est = lu.inverse_norm_one_estimate();
        let inv = d.try_inverse().unwrap();
        let exact = (0..40).map(|j| inv.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        assert!(est <= exact * (1.0 + 1e-10) && est >= 0.3 * exact, "{est} vs {exact}");
    }

    #[test]
    fn complex_solve() {
        let n = 20;
        let mut b = BandMatrix::<Complex64>::zeros(n, 2, 2);
        for i in 0..n {
            b.set(i, i, Complex64::new(4.0, 1.0));
            if i > 0 {
                b.set(i, i - 1, Complex64::new(1.0, -0.5));
            }
            if i + 2 < n {
                b.set(i, i + 2, Complex64::new(0.0, 2.0));
            }
        }
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = b.clone().lu().unwrap().solve(&rhs);
        let r = b.mul_vec(&x);
        for i in 0..n {
            assert!((r[i] - rhs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let b = BandMatrix::<f64>::zeros(5, 1, 1);
        assert!(matches!(b.lu(), Err(Error::SingularJacobian { pivot: 0 })));
    }
}
