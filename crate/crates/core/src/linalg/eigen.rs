//! Dense symmetric and generalized symmetric eigenvalue helpers, plus the
//! orthonormal complement of a short-and-wide matrix's row space.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = symmetrize(a);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Number of eigenvalues with `|λ| < tol · max|λ|`.
pub fn count_near_zero(eigenvalues: &[f64], tol: f64) -> usize {
    let scale = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    eigenvalues.iter().filter(|v| v.abs() < tol * scale).count()
}

/// Eigenvalues `λ` of `A v = λ G v` with `G` symmetric positive definite, ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let c = reduce_generalized(a, g)?;
    Ok(symmetric_eigenvalues(&c))
}

/// `L⁻¹ A L⁻ᵀ` where `G = L Lᵀ`.
fn reduce_generalized(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != g.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            found: a.nrows(),
        });
    }
    let chol = Cholesky::new(symmetrize(g)).ok_or(Error::NotPositiveDefinite("Gram matrix"))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&symmetrize(a))
        .ok_or(Error::NotPositiveDefinite("Gram matrix"))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or(Error::NotPositiveDefinite("Gram matrix"))?;
    Ok(symmetrize(&c))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Orthonormal basis of `ker C` for a `m × n` matrix `C` with `m ≪ n`,
/// represented by the Householder reflectors of a QR factorization of `Cᵀ`.
/// Columns `m..n` of `Q` span the kernel when `C` has full row rank.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    n: usize,
    rank: usize,
    // (v, tau) with H = I - tau v vᵀ, v[..k] = 0, v[k] = 1
    reflectors: Vec<(DVector<f64>, f64)>,
}

impl KernelBasis {
    pub fn new(c: &DMatrix<f64>) -> Self {
        let m = c.nrows();
        let n = c.ncols();
        let mut a = c.transpose();
        let mut reflectors = Vec::with_capacity(m);
        for k in 0..m.min(n) {
            let x: Vec<f64> = (k..n).map(|i| a[(i, k)]).collect();
            let alpha = x[0];
            let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
            let mut v = DVector::zeros(n);
            v[k] = 1.0;
            let tau;
            if sigma == 0.0 {
                tau = 0.0;
            } else {
                let mu = (alpha * alpha + sigma).sqrt();
                let v0 = if alpha <= 0.0 {
                    alpha - mu
                } else {
                    -sigma / (alpha + mu)
                };
                tau = 2.0 * v0 * v0 / (sigma + v0 * v0);
                for i in k + 1..n {
                    v[i] = a[(i, k)] / v0;
                }
            }
            // apply H to the remaining columns of Cᵀ
            for j in k..m {
                let s: f64 = (k..n).map(|i| v[i] * a[(i, j)]).sum::<f64>() * tau;
                for i in k..n {
                    a[(i, j)] -= s * v[i];
                }
            }
            reflectors.push((v, tau));
        }
        KernelBasis {
            n,
            rank: m.min(n),
            reflectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.n - self.rank
    }

    /// `Qᵀ A Q` restricted to the kernel block, i.e. `Zᵀ A Z`.
    pub fn project(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.n);
        let mut m = a.clone();
        for (v, tau) in &self.reflectors {
            if *tau == 0.0 {
                continue;
            }
            // M <- H M H
            let mv = &m * v;
            let vmv = v.dot(&mv);
            let w = mv * *tau - v * (0.5 * tau * tau * vmv);
            m -= v * w.transpose() + &w * v.transpose();
        }
        m.view((self.rank, self.rank), (self.dim(), self.dim()))
            .into_owned()
    }

    /// Explicit `n × (n - rank)` orthonormal kernel basis.
    pub fn basis(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n, self.dim());
        for j in 0..self.dim() {
            z[(self.rank + j, j)] = 1.0;
        }
        // Q = H_1 H_2 ... H_m, applied right-to-left
        for (v, tau) in self.reflectors.iter().rev() {
            if *tau == 0.0 {
                continue;
            }
            let s = z.transpose() * v * *tau;
            z -= v * s.transpose();
        }
        z
    }
}
