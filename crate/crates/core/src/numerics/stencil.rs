//! Fourth-order finite-difference stencils on uniform grids.
//!
//! Interior nodes use centered stencils (5 points for first and second
//! derivatives, 7 points for third and fourth); nodes too close to an end
//! use a one-sided window of `order + 4` points, which keeps the truncation
//! error at fourth order everywhere.

/// Fornberg's algorithm: weights for derivatives `0..=max_order` at `x0`
/// from nodes `xs`. Returns `w[m][j]`.
pub fn fornberg(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative stencil of a fixed order at every node of a uniform grid.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub order: usize,
    /// For node `j`: first node index of the window and its weights.
    rows: Vec<(usize, Vec<f64>)>,
}

impl Stencil {
    /// Fourth-order accurate stencil.
    pub fn new(n: usize, dx: f64, order: usize) -> Self {
        Self::with_accuracy(n, dx, order, 4)
    }

    /// Stencil of accuracy `acc` (even): centered where the window fits,
    /// one-sided windows of `order + acc` points near the ends.
    pub fn with_accuracy(n: usize, dx: f64, order: usize, acc: usize) -> Self {
        assert!((1..=4).contains(&order));
        assert!(acc >= 2 && acc % 2 == 0);
        let centered = 2 * ((order + 1) / 2) - 1 + acc;
        let half = centered / 2;
        let one_sided = order + acc;
        assert!(n >= one_sided.max(centered), "grid too small for stencil");
        let scale = dx.powi(order as i32);
        let mut cache: std::collections::HashMap<(usize, isize), Vec<f64>> = Default::default();
        let mut rows = Vec::with_capacity(n);
        for j in 0..n {
            let (start, len) = if j >= half && j + half < n {
                (j - half, centered)
            } else if j < half {
                (0, one_sided)
            } else {
                (n - one_sided, one_sided)
            };
            let rel = j as isize - start as isize;
            let w = cache
                .entry((len, rel))
                .or_insert_with(|| {
                    let xs: Vec<f64> = (0..len).map(|k| k as f64).collect();
                    let all = fornberg(rel as f64, &xs, order);
                    all[order].iter().map(|v| v / scale).collect()
                })
                .clone();
            rows.push((start, w));
        }
        Stencil { order, rows }
    }

    /// Window start and weights at node `j`.
    #[inline]
    pub fn at(&self, j: usize) -> (usize, &[f64]) {
        let (s, w) = &self.rows[j];
        (*s, w)
    }

    pub fn apply_at(&self, f: &[f64], j: usize) -> f64 {
        let (s, w) = self.at(j);
        w.iter().zip(&f[s..s + w.len()]).map(|(a, b)| a * b).sum()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.rows.len()).map(|j| self.apply_at(f, j)).collect()
    }

    /// Largest distance (in nodes) between a node and any point of its window.
    pub fn reach(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(j, (s, w))| j.abs_diff(*s).max((s + w.len() - 1).abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

/// The four stencils used throughout the crate.
#[derive(Debug, Clone)]
pub struct Stencils {
    pub d1: Stencil,
    pub d2: Stencil,
    pub d3: Stencil,
    pub d4: Stencil,
}

impl Stencils {
    pub fn new(n: usize, dx: f64) -> Self {
        Self::with_accuracy(n, dx, 4)
    }

    pub fn with_accuracy(n: usize, dx: f64, acc: usize) -> Self {
        Stencils {
            d1: Stencil::with_accuracy(n, dx, 1, acc),
            d2: Stencil::with_accuracy(n, dx, 2, acc),
            d3: Stencil::with_accuracy(n, dx, 3, acc),
            d4: Stencil::with_accuracy(n, dx, 4, acc),
        }
    }

    pub fn get(&self, order: usize) -> &Stencil {
        match order {
            1 => &self.d1,
            2 => &self.d2,
            3 => &self.d3,
            4 => &self.d4,
            _ => panic!("unsupported derivative order {order}"),
        }
    }
}
