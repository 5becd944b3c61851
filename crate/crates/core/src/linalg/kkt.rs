//! Direct solvers for symmetric systems and for the saddle-point matrix
//! `[[K, Bᵀ], [B, 0]]` with a short constraint block `B`.
//!
//! Below `dense_limit` unknowns the whole matrix goes through the dense
//! Bunch–Kaufman factorization. Above it the KKT system is solved through the
//! augmented stiffness `K + ρ BᵀB` (a sparse skyline factorization, exact for
//! any ρ > 0 because `Bx = g` is enforced) and the small dense Schur complement
//! `B (K + ρBᵀB)⁻¹ Bᵀ`. Zero pivots of either factor signal singularity.

use super::ldlt::{DenseLdlt, PivotStats};
use super::skyline::{rcm_ordering, SkylineLdlt};
use super::sparse::{CsrMatrix, TripletBuilder};
use nalgebra::DMatrix;

/// Systems up to this many unknowns use dense factorizations.
pub const DENSE_LIMIT: usize = 3000;
/// Static pivoting threshold, relative to the largest matrix entry.
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Dense,
    Sparse,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dense => "dense-ldlt",
            Method::Sparse => "sparse-ldlt",
        }
    }
}

/// Symmetric (possibly indefinite) solver picking dense or skyline storage.
#[derive(Clone, Debug)]
pub enum SymmetricSolver {
    Dense(DenseLdlt),
    Skyline(SkylineLdlt),
}

impl SymmetricSolver {
    pub fn new(a: &CsrMatrix, dense_limit: usize) -> Self {
        if a.nrows() <= dense_limit {
            SymmetricSolver::Dense(DenseLdlt::factor(&a.to_dense(), PIVOT_TOL))
        } else {
            let perm = rcm_ordering(a, &[]);
            SymmetricSolver::Skyline(SkylineLdlt::factor(a, &perm, PIVOT_TOL))
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            SymmetricSolver::Dense(f) => f.solve(b),
            SymmetricSolver::Skyline(f) => f.solve(b),
        }
    }

    pub fn stats(&self) -> PivotStats {
        match self {
            SymmetricSolver::Dense(f) => f.stats(),
            SymmetricSolver::Skyline(f) => f.stats(),
        }
    }
}

#[derive(Clone, Debug)]
struct Augmented {
    rho: f64,
    factor: SkylineLdlt,
    schur: DenseLdlt,
}

#[derive(Clone, Debug)]
enum Inner {
    Dense(DenseLdlt),
    Augmented(Augmented),
}

/// Factorized saddle-point matrix.
#[derive(Clone, Debug)]
pub struct KktSolver {
    k: CsrMatrix,
    b: DMatrix<f64>,
    inner: Inner,
}

/// Dense `[[K, Bᵀ], [B, 0]]`.
pub fn kkt_dense(k: &CsrMatrix, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let m = b.nrows();
    let mut a = DMatrix::zeros(n + m, n + m);
    for (i, j, v) in k.iter() {
        a[(i, j)] += v;
    }
    for r in 0..m {
        for j in 0..n {
            a[(n + r, j)] = b[(r, j)];
            a[(j, n + r)] = b[(r, j)];
        }
    }
    a
}

/// Sparse `[[K, Bᵀ], [B, 0]]`.
pub fn kkt_sparse(k: &CsrMatrix, b: &DMatrix<f64>) -> CsrMatrix {
    let n = k.nrows();
    let m = b.nrows();
    let mut t = TripletBuilder::new(n + m, n + m);
    for (i, j, v) in k.iter() {
        t.push(i, j, v);
    }
    for r in 0..m {
        for j in 0..n {
            let v = b[(r, j)];
            if v != 0.0 {
                t.push(n + r, j, v);
                t.push(j, n + r, v);
            }
        }
    }
    t.build()
}

impl KktSolver {
    pub fn new(k: &CsrMatrix, b: &DMatrix<f64>, dense_limit: usize) -> Self {
        assert_eq!(k.ncols(), b.ncols());
        let n = k.nrows();
        let inner = if n + b.nrows() <= dense_limit {
            Inner::Dense(DenseLdlt::factor(&kkt_dense(k, b), PIVOT_TOL))
        } else {
            Inner::Augmented(Self::augmented(k, b))
        };
        KktSolver {
            k: k.clone(),
            b: b.clone(),
            inner,
        }
    }

    fn augmented(k: &CsrMatrix, b: &DMatrix<f64>) -> Augmented {
        let n = k.nrows();
        let m = b.nrows();
        let coupled: Vec<usize> = (0..n)
            .filter(|&j| (0..m).any(|r| b[(r, j)] != 0.0))
            .collect();

        let kmax = k.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let bmax = coupled
            .iter()
            .map(|&j| (0..m).map(|r| b[(r, j)].powi(2)).sum::<f64>())
            .fold(0.0_f64, f64::max);
        let rho = if bmax > 0.0 {
            kmax.max(1.0e-300) / bmax
        } else {
            0.0
        };

        let mut t = TripletBuilder::new(n, n);
        for (i, j, v) in k.iter() {
            t.push(i, j, v);
        }
        for &i in &coupled {
            for &j in &coupled {
                let v: f64 = (0..m).map(|r| b[(r, i)] * b[(r, j)]).sum();
                if v != 0.0 {
                    t.push(i, j, rho * v);
                }
            }
        }
        let k_rho = t.build();
        let perm = rcm_ordering(&k_rho, &coupled);
        let factor = SkylineLdlt::factor(&k_rho, &perm, PIVOT_TOL);

        let mut s = DMatrix::zeros(m, m);
        for r in 0..m {
            let col: Vec<f64> = (0..n).map(|j| b[(r, j)]).collect();
            let y = factor.solve(&col);
            for q in 0..m {
                s[(q, r)] = (0..n).map(|j| b[(q, j)] * y[j]).sum();
            }
        }
        let schur = DenseLdlt::factor(&s, PIVOT_TOL);
        Augmented { rho, factor, schur }
    }

    pub fn method(&self) -> Method {
        match self.inner {
            Inner::Dense(_) => Method::Dense,
            Inner::Augmented(_) => Method::Sparse,
        }
    }

    pub fn zero_pivots(&self) -> usize {
        match &self.inner {
            Inner::Dense(f) => f.zero_pivots(),
            Inner::Augmented(a) => a.factor.stats().zero + a.schur.zero_pivots(),
        }
    }

    pub fn stats(&self) -> PivotStats {
        match &self.inner {
            Inner::Dense(f) => f.stats(),
            Inner::Augmented(a) => {
                let (s1, s2) = (a.factor.stats(), a.schur.stats());
                // K + ρBᵀB is positive; the Schur complement enters the KKT
                // inertia with flipped sign
                PivotStats {
                    positive: s1.positive + s2.negative,
                    negative: s1.negative + s2.positive,
                    zero: s1.zero + s2.zero,
                    two_by_two: s2.two_by_two,
                    min_abs_pivot: s1.min_abs_pivot.min(s2.min_abs_pivot),
                    max_abs_pivot: s1.max_abs_pivot.max(s2.max_abs_pivot),
                }
            }
        }
    }

    fn solve_once(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.k.nrows();
        let m = self.b.nrows();
        match &self.inner {
            Inner::Dense(fac) => {
                let mut rhs = f.to_vec();
                rhs.extend_from_slice(g);
                let sol = fac.solve(&rhs);
                (sol[..n].to_vec(), sol[n..].to_vec())
            }
            Inner::Augmented(a) => {
                // (K + ρBᵀB) x + Bᵀ q = f + ρ Bᵀ g,  B x = g
                let mut rhs = f.to_vec();
                for j in 0..n {
                    rhs[j] += a.rho * (0..m).map(|r| self.b[(r, j)] * g[r]).sum::<f64>();
                }
                let y = a.factor.solve(&rhs);
                let by: Vec<f64> = (0..m)
                    .map(|r| (0..n).map(|j| self.b[(r, j)] * y[j]).sum::<f64>() - g[r])
                    .collect();
                let q = a.schur.solve(&by);
                let mut rhs2 = rhs;
                for j in 0..n {
                    rhs2[j] -= (0..m).map(|r| self.b[(r, j)] * q[r]).sum::<f64>();
                }
                (a.factor.solve(&rhs2), q)
            }
        }
    }

    /// Residual of the full saddle-point system.
    pub fn residual(&self, x: &[f64], q: &[f64], f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.k.nrows();
        let m = self.b.nrows();
        let kx = self.k.mul_vec(x);
        let r1 = (0..n)
            .map(|j| f[j] - kx[j] - (0..m).map(|r| self.b[(r, j)] * q[r]).sum::<f64>())
            .collect();
        let r2 = (0..m)
            .map(|r| g[r] - (0..n).map(|j| self.b[(r, j)] * x[j]).sum::<f64>())
            .collect();
        (r1, r2)
    }

    /// Solve with two steps of iterative refinement on the unmodified system.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut x, mut q) = self.solve_once(f, g);
        for _ in 0..2 {
            let (r1, r2) = self.residual(&x, &q, f, g);
            let (dx, dq) = self.solve_once(&r1, &r2);
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            q.iter_mut().zip(&dq).for_each(|(a, b)| *a += b);
        }
        (x, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spring_chain(n: usize) -> CsrMatrix {
        // free-free chain of unit springs: one rigid mode
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n - 1 {
            t.push(i, i, 1.0);
            t.push(i + 1, i + 1, 1.0);
            t.push(i, i + 1, -1.0);
            t.push(i + 1, i, -1.0);
        }
        t.build()
    }

    #[test]
    fn dense_and_augmented_paths_agree() {
        let n = 30;
        let k = spring_chain(n);
        let mut b = DMatrix::zeros(1, n);
        b[(0, 0)] = 1.0;
        b[(0, n - 1)] = 1.0;
        let f: Vec<f64> = (0..n).map(|i| if i == n / 2 { 1.0 } else { 0.0 }).collect();
        let g = [0.25];

        let dense = KktSolver::new(&k, &b, usize::MAX);
        let sparse = KktSolver::new(&k, &b, 0);
        assert_eq!(dense.method(), Method::Dense);
        assert_eq!(sparse.method(), Method::Sparse);
        assert_eq!(dense.zero_pivots(), 0);
        assert_eq!(sparse.zero_pivots(), 0);
        assert_eq!(dense.stats().negative, 1);
        assert_eq!(sparse.stats().negative, 1);

        let (x1, q1) = dense.solve(&f, &g);
        let (x2, q2) = sparse.solve(&f, &g);
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        assert!((q1[0] - q2[0]).abs() < 1e-9);
        let (r1, r2) = dense.residual(&x1, &q1, &f, &g);
        assert!(r1.iter().chain(&r2).all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn missing_constraint_leaves_zero_pivot() {
        let n = 10;
        let k = spring_chain(n);
        let b = DMatrix::zeros(1, n);
        assert!(KktSolver::new(&k, &b, usize::MAX).zero_pivots() >= 1);
        assert!(KktSolver::new(&k, &b, 0).zero_pivots() >= 1);
    }
}
