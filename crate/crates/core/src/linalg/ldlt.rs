//! Dense symmetric-indefinite `P A Pᵀ = L D Lᵀ` factorization.
//!
//! Bunch–Kaufman 1×1 / 2×2 pivoting, preceded at every step by a symmetric
//! swap that brings the largest remaining diagonal entry to the front. The
//! diagonal pre-pivot makes the factorization behave like pivoted Cholesky on
//! semidefinite blocks, so the number of near-zero pivots tracks the nullity.
//!
//! Pivots whose magnitude falls below `pivot_tol * max|a_ij|` are counted as
//! zero pivots and replaced by that threshold (static pivoting), so the
//! factorization always completes and the caller decides what a zero pivot
//! means.

use nalgebra::{DMatrix, DVector};

/// Pivot census of a factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PivotStats {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    pub two_by_two: usize,
    pub min_abs_pivot: f64,
    pub max_abs_pivot: f64,
}

#[derive(Clone, Debug)]
pub struct DenseLdlt {
    n: usize,
    // lower triangle: unit L strictly below the pivot blocks, D on the blocks
    a: Vec<f64>,
    perm: Vec<usize>,
    // 1 or 2 at the first index of each pivot block, 0 on the second row of a 2×2
    block: Vec<u8>,
    stats: PivotStats,
}

const BK_ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

impl DenseLdlt {
    pub fn factor(matrix: &DMatrix<f64>, pivot_tol: f64) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "LDLT needs a square matrix");
        let n = matrix.nrows();
        let mut a = vec![0.0; n * n];
        let mut scale = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                a[i * n + j] = v;
                scale = scale.max(v.abs());
            }
        }
        let thr = if scale > 0.0 {
            pivot_tol * scale
        } else {
            pivot_tol
        };
        let mut f = DenseLdlt {
            n,
            a,
            perm: (0..n).collect(),
            block: vec![1; n],
            stats: PivotStats {
                min_abs_pivot: f64::INFINITY,
                ..Default::default()
            },
        };
        f.run(thr);
        if n == 0 {
            f.stats.min_abs_pivot = 0.0;
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn stats(&self) -> PivotStats {
        self.stats
    }

    pub fn zero_pivots(&self) -> usize {
        self.stats.zero
    }

    #[inline]
    fn lo(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.a[i * self.n + j]
        } else {
            self.a[j * self.n + i]
        }
    }

    #[inline]
    fn lo_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let n = self.n;
        if i >= j {
            &mut self.a[i * n + j]
        } else {
            &mut self.a[j * n + i]
        }
    }

    /// Symmetric interchange of indices `p < q` in the active block starting
    /// at `k`, carrying the already computed rows of L along.
    fn swap(&mut self, k: usize, p: usize, q: usize) {
        if p == q {
            return;
        }
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        debug_assert!(p >= k);
        let n = self.n;
        self.a.swap(p * n + p, q * n + q);
        for j in 0..p {
            self.a.swap(p * n + j, q * n + j);
        }
        for i in p + 1..q {
            self.a.swap(i * n + p, q * n + i);
        }
        for i in q + 1..n {
            self.a.swap(i * n + p, i * n + q);
        }
        self.perm.swap(p, q);
    }

    fn record(&mut self, d: f64) {
        let s = &mut self.stats;
        if d > 0.0 {
            s.positive += 1;
        } else {
            s.negative += 1;
        }
        s.min_abs_pivot = s.min_abs_pivot.min(d.abs());
        s.max_abs_pivot = s.max_abs_pivot.max(d.abs());
    }

    fn clamp_pivot(&mut self, d: f64, thr: f64) -> f64 {
        if d.abs() < thr || !d.is_finite() {
            self.stats.zero += 1;
            if d < 0.0 {
                -thr
            } else {
                thr
            }
        } else {
            d
        }
    }

    fn run(&mut self, thr: f64) {
        let n = self.n;
        let mut k = 0;
        while k < n {
            // diagonal pre-pivot
            let mut r = k;
            for i in k + 1..n {
                if self.lo(i, i).abs() > self.lo(r, r).abs() {
                    r = i;
                }
            }
            self.swap(k, k, r);

            let akk = self.lo(k, k).abs();
            let (mut imax, mut colmax) = (k, 0.0_f64);
            for i in k + 1..n {
                let v = self.lo(i, k).abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }

            let two = if colmax == 0.0 || akk >= BK_ALPHA * colmax {
                false
            } else {
                let rowmax = (k..n)
                    .filter(|&j| j != imax)
                    .map(|j| self.lo(imax, j).abs())
                    .fold(0.0, f64::max);
                if akk * rowmax >= BK_ALPHA * colmax * colmax {
                    false
                } else if self.lo(imax, imax).abs() >= BK_ALPHA * rowmax {
                    self.swap(k, k, imax);
                    false
                } else {
                    self.swap(k, k + 1, imax);
                    true
                }
            };

            if !two {
                self.eliminate_1x1(k, thr);
                k += 1;
            } else {
                self.eliminate_2x2(k, thr);
                k += 2;
            }
        }
    }

    fn eliminate_1x1(&mut self, k: usize, thr: f64) {
        let n = self.n;
        let d = self.clamp_pivot(self.lo(k, k), thr);
        *self.lo_mut(k, k) = d;
        self.record(d);
        self.block[k] = 1;
        let w: Vec<f64> = (k + 1..n).map(|i| self.a[i * n + k]).collect();
        for (ii, i) in (k + 1..n).enumerate() {
            let li = w[ii] / d;
            if li != 0.0 {
                let row = &mut self.a[i * n..i * n + i + 1];
                for (jj, j) in (k + 1..=i).enumerate() {
                    row[j] -= li * w[jj];
                }
            }
            self.a[i * n + k] = li;
        }
    }

    fn eliminate_2x2(&mut self, k: usize, thr: f64) {
        let n = self.n;
        let (mut d11, mut d21, mut d22) = (self.lo(k, k), self.lo(k + 1, k), self.lo(k + 1, k + 1));

        // eigen-decomposition of the 2×2 pivot for the census and static pivoting
        let mean = 0.5 * (d11 + d22);
        let rad = (0.25 * (d11 - d22).powi(2) + d21 * d21).sqrt();
        let (mut e1, mut e2) = (mean + rad, mean - rad);
        let zero_before = self.stats.zero;
        e1 = self.clamp_pivot(e1, thr);
        e2 = self.clamp_pivot(e2, thr);
        if self.stats.zero != zero_before {
            // rebuild D = Q diag(e1, e2) Qᵀ with the clamped eigenvalues
            let (c, s) = if d21 == 0.0 {
                if d11 >= d22 {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            } else {
                let vx = e1 - d22;
                let nrm = (vx * vx + d21 * d21).sqrt();
                (vx / nrm, d21 / nrm)
            };
            d11 = c * c * e1 + s * s * e2;
            d21 = c * s * (e1 - e2);
            d22 = s * s * e1 + c * c * e2;
        }
        self.record(e1);
        self.record(e2);
        self.stats.two_by_two += 1;
        *self.lo_mut(k, k) = d11;
        *self.lo_mut(k + 1, k) = d21;
        *self.lo_mut(k + 1, k + 1) = d22;
        self.block[k] = 2;
        self.block[k + 1] = 0;

        let det = d11 * d22 - d21 * d21;
        let (i11, i21, i22) = (d22 / det, -d21 / det, d11 / det);
        let m = n - (k + 2);
        let w0: Vec<f64> = (k + 2..n).map(|i| self.a[i * n + k]).collect();
        let w1: Vec<f64> = (k + 2..n).map(|i| self.a[i * n + k + 1]).collect();
        let mut l0 = vec![0.0; m];
        let mut l1 = vec![0.0; m];
        for t in 0..m {
            l0[t] = w0[t] * i11 + w1[t] * i21;
            l1[t] = w0[t] * i21 + w1[t] * i22;
        }
        for (ii, i) in (k + 2..n).enumerate() {
            let (a0, a1) = (l0[ii], l1[ii]);
            if a0 != 0.0 || a1 != 0.0 {
                let row = &mut self.a[i * n..i * n + i + 1];
                for (jj, j) in (k + 2..=i).enumerate() {
                    row[j] -= a0 * w0[jj] + a1 * w1[jj];
                }
            }
            self.a[i * n + k] = a0;
            self.a[i * n + k + 1] = a1;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();

        let mut k = 0;
        while k < n {
            if self.block[k] == 1 {
                let yk = y[k];
                for i in k + 1..n {
                    y[i] -= self.a[i * n + k] * yk;
                }
                k += 1;
            } else {
                let (y0, y1) = (y[k], y[k + 1]);
                for i in k + 2..n {
                    y[i] -= self.a[i * n + k] * y0 + self.a[i * n + k + 1] * y1;
                }
                k += 2;
            }
        }

        let mut k = 0;
        while k < n {
            if self.block[k] == 1 {
                y[k] /= self.a[k * n + k];
                k += 1;
            } else {
                let (d11, d21, d22) = (self.lo(k, k), self.lo(k + 1, k), self.lo(k + 1, k + 1));
                let det = d11 * d22 - d21 * d21;
                let (y0, y1) = (y[k], y[k + 1]);
                y[k] = (d22 * y0 - d21 * y1) / det;
                y[k + 1] = (d11 * y1 - d21 * y0) / det;
                k += 2;
            }
        }

        let mut k = n;
        while k > 0 {
            k -= 1;
            if self.block[k] == 0 {
                // second row of a 2×2 block; handled together with its first row
                let s0 = k - 1;
                let (mut t0, mut t1) = (0.0, 0.0);
                for i in k + 1..n {
                    t0 += self.a[i * n + s0] * y[i];
                    t1 += self.a[i * n + k] * y[i];
                }
                y[s0] -= t0;
                y[k] -= t1;
                k = s0;
            } else {
                let mut t = 0.0;
                for i in k + 1..n {
                    t += self.a[i * n + k] * y[i];
                }
                y[k] -= t;
            }
        }

        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    pub fn solve_dvec(&self, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.solve(b.as_slice()))
    }
}
