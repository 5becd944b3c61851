//! Stability diagnostics of the coupled system: kernel ellipticity `α`,
//! inf-sup constant `β`, rigid-mode census, the volumetric inertia `M` and
//! the explicit inf-sup witness field.

use crate::coupling::MultiplierState;
use crate::error::{Error, Result};
use crate::geometry::{hex_quadrature, Mat3, Mesh, Vec3};
use crate::linalg::{
    count_near_zero, generalized_eigenvalues, symmetric_eigenvalues, CsrMatrix, KernelBasis,
    KktSolver, SymmetricSolver, DENSE_LIMIT,
};
use crate::saddle::SaddleSystem;
use crate::solid::rigid_motion;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use std::io::Write as _;
use std::path::Path;

/// Relative eigenvalue threshold for counting zero-energy modes.
pub const CENSUS_TOL: f64 = 1e-8;
pub const CENSUS_DENSE_LIMIT: usize = 1200;

#[derive(Clone, Copy, Debug)]
pub struct StabilityOptions {
    /// Largest system handled by dense eigen-decompositions.
    pub dense_limit: usize,
    /// Largest KKT system whose rigid-mode census uses a dense eigen count;
    /// above it the zero pivots of the factorization are reported.
    pub census_dense_limit: usize,
    /// Relative convergence tolerance of the iterative eigen solver.
    pub tolerance: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            dense_limit: DENSE_LIMIT,
            census_dense_limit: CENSUS_DENSE_LIMIT,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub level: usize,
    /// Number of primal unknowns.
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rigid_unconstrained: usize,
    pub rigid_constrained: usize,
}

pub const CSV_HEADER: &str = "level,N,alpha,beta,rigid_unconstrained,rigid_constrained";

impl StabilityReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{:e},{},{}",
            self.level,
            self.n,
            self.alpha,
            self.beta,
            self.rigid_unconstrained,
            self.rigid_constrained
        )
    }

    pub fn is_valid(&self) -> bool {
        self.alpha.is_finite()
            && self.beta.is_finite()
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.rigid_constrained == 0
    }
}

/// Append rows to a CSV file, writing the header when the file is new or empty.
pub fn append_csv(path: &Path, reports: &[StabilityReport]) -> Result<()> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(file, "{CSV_HEADER}")?;
    }
    for r in reports {
        writeln!(file, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Number of eigenvalues with `|λ| < tolerance · max|λ|`.
pub fn rigid_mode_census(k: &DMatrix<f64>, tolerance: f64) -> usize {
    count_near_zero(&symmetric_eigenvalues(k), tolerance)
}

/// Near-zero count of the pencil `(A, G)`: generalized eigenvalues with
/// `|λ| < tolerance · max|λ|`. With `G` the norm Gram the threshold does not
/// drift with mesh size the way the Euclidean spectrum does.
pub fn rigid_mode_census_in(a: &DMatrix<f64>, g: &DMatrix<f64>, tolerance: f64) -> Result<usize> {
    Ok(count_near_zero(&generalized_eigenvalues(a, g)?, tolerance))
}

fn check_rank(b: &DMatrix<f64>) -> Result<()> {
    if b.nrows() == 0 {
        return Ok(());
    }
    let sv = b.clone().singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|s| **s > 1e-12 * smax).count();
    if rank < b.nrows() {
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        return Err(Error::RankDeficient {
            rank,
            singular_values: s,
            deficient_rows: vec![],
        });
    }
    Ok(())
}

/// `λ_min(Zᵀ K Z, Zᵀ G Z)` over `ker B`; `B` may have zero rows.
pub fn kernel_ellipticity_of(
    k: &CsrMatrix,
    g: &CsrMatrix,
    b: &DMatrix<f64>,
    options: &StabilityOptions,
) -> Result<f64> {
    check_rank(b)?;
    if k.nrows() <= options.dense_limit {
        let (kd, gd) = (k.to_dense(), g.to_dense());
        let (kz, gz) = if b.nrows() == 0 {
            (kd, gd)
        } else {
            let z = KernelBasis::new(b);
            (z.project(&kd), z.project(&gd))
        };
        Ok(generalized_eigenvalues(&kz, &gz)?[0])
    } else {
        let solver = KktSolver::new(k, b, 0);
        if solver.zero_pivots() > 0 {
            // K is singular on ker B
            return Ok(0.0);
        }
        let m = b.nrows();
        smallest_generalized_iterative(
            k,
            g,
            |rhs| solver.solve(rhs, &vec![0.0; m]).0,
            options.tolerance,
        )
    }
}

/// Smallest eigenvalue of `K v = λ G v` on the range of `apply_inverse`
/// (a solve with `K`, possibly constrained), by block inverse iteration with
/// Rayleigh–Ritz acceleration.
pub fn smallest_generalized_iterative<F>(
    k: &CsrMatrix,
    g: &CsrMatrix,
    apply_inverse: F,
    tolerance: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = k.nrows();
    let p = 8.min(n);
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let mut previous = f64::INFINITY;
    for _ in 0..500 {
        let mut y = DMatrix::zeros(n, p);
        for c in 0..p {
            let gx = g.mul_dvec(&x.column(c).into_owned());
            y.set_column(c, &DVector::from_vec(apply_inverse(gx.as_slice())));
        }
        let ky = DMatrix::from_columns(
            &(0..p)
                .map(|c| k.mul_dvec(&y.column(c).into_owned()))
                .collect::<Vec<_>>(),
        );
        let gy = DMatrix::from_columns(
            &(0..p)
                .map(|c| g.mul_dvec(&y.column(c).into_owned()))
                .collect::<Vec<_>>(),
        );
        let a_r = y.transpose() * ky;
        let g_r = y.transpose() * gy;
        let chol = Cholesky::new((&g_r + g_r.transpose()) * 0.5)
            .ok_or(Error::NotPositiveDefinite("Ritz Gram matrix"))?;
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite("Ritz Gram matrix"))?;
        let c = &linv * a_r * linv.transpose();
        let eig = ((&c + c.transpose()) * 0.5).symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vecs = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        let theta = eig.eigenvalues[order[0]];
        x = y * linv.transpose() * vecs;
        if (theta - previous).abs() <= tolerance * theta.abs() {
            return Ok(theta);
        }
        previous = theta;
    }
    Err(Error::NoConvergence(format!(
        "block inverse iteration, last estimate {previous:e}"
    )))
}

/// Kernel ellipticity constant `α` of the coupled system.
pub fn kernel_ellipticity(system: &SaddleSystem, options: &StabilityOptions) -> Result<f64> {
    kernel_ellipticity_of(&system.k, &system.g_v, system.b(), options)
}

/// `S = B G_V⁻¹ Bᵀ` together with `G_Q`: gives `β` and the exact supremum
/// `sup_v b(q, v) / ‖v‖_V = sqrt(qᵀ S q)` for any multiplier `q`.
#[derive(Clone, Debug)]
pub struct InfSupOperator {
    pub s: DMatrix<f64>,
    pub g_q: DMatrix<f64>,
}

impl InfSupOperator {
    pub fn new(
        b: &DMatrix<f64>,
        g_v: &CsrMatrix,
        g_q: &DMatrix<f64>,
        dense_limit: usize,
    ) -> Result<Self> {
        let solver = SymmetricSolver::new(g_v, dense_limit);
        let st = solver.stats();
        if st.zero > 0 || st.negative > 0 {
            return Err(Error::NotPositiveDefinite("V-norm Gram matrix"));
        }
        let m = b.nrows();
        let mut s = DMatrix::zeros(m, m);
        for r in 0..m {
            let y = solver.solve(b.row(r).transpose().as_slice());
            for q in 0..m {
                s[(q, r)] = b.row(q).iter().zip(&y).map(|(a, b)| a * b).sum();
            }
        }
        Ok(InfSupOperator {
            s: (&s + s.transpose()) * 0.5,
            g_q: g_q.clone(),
        })
    }

    pub fn for_system(system: &SaddleSystem, dense_limit: usize) -> Result<Self> {
        let gq = DMatrix::from_fn(6, 6, |i, j| system.g_q[(i, j)]);
        Self::new(system.b(), &system.g_v, &gq, dense_limit)
    }

    /// `sqrt(λ_min(S, G_Q))`
    pub fn beta(&self) -> Result<f64> {
        let ev = generalized_eigenvalues(&self.s, &self.g_q)?;
        Ok(ev[0].max(0.0).sqrt())
    }

    pub fn sup(&self, q: &[f64]) -> f64 {
        let q = DVector::from_column_slice(q);
        q.dot(&(&self.s * &q)).max(0.0).sqrt()
    }

    pub fn q_norm(&self, q: &[f64]) -> f64 {
        let q = DVector::from_column_slice(q);
        q.dot(&(&self.g_q * &q)).sqrt()
    }
}

/// Inf-sup constant `β` of the coupled system.
pub fn inf_sup_constant(system: &SaddleSystem, options: &StabilityOptions) -> Result<f64> {
    InfSupOperator::for_system(system, options.dense_limit)?.beta()
}

/// `M = ∫_B (|x − x_G|² I − (x − x_G) ⊗ (x − x_G)) dV`
pub fn compute_m(mesh: &Mesh, x_g: &Vec3) -> Result<Mat3> {
    let mut m = Mat3::zeros();
    for e in 0..mesh.num_elements() {
        for q in hex_quadrature(&mesh.element_coords(e), e)? {
            let r = q.point - x_g;
            m += (Mat3::identity() * r.norm_squared() - r * r.transpose()) * q.dv;
        }
    }
    Ok((m + m.transpose()) * 0.5)
}

/// The witness `u = μ + λ × (x − x_G)`, `(w, θ) = 0` as a primal vector.
pub fn witness_field(system: &SaddleSystem, q: &MultiplierState) -> Vec<f64> {
    let mut x = rigid_motion(
        &system.model.mesh,
        &q.mu,
        &q.lambda,
        &system.model.surface.centroid,
    );
    x.resize(system.n(), 0.0);
    x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessBound {
    /// `b(λ, μ; witness)`
    pub numerator: f64,
    /// `λ · J λ + |μ|² |Σ|`
    pub predicted: f64,
    /// `‖witness‖_V`
    pub norm: f64,
    /// `numerator / norm`, a lower bound of `sup_v b(q, v) / ‖v‖_V`.
    pub ratio: f64,
}

pub fn witness_infsup_bound(system: &SaddleSystem, q: &MultiplierState) -> WitnessBound {
    let x = witness_field(system, q);
    let bx = system.constraints.apply(&x);
    let numerator: f64 = q.to_array().iter().zip(&bx).map(|(a, b)| a * b).sum();
    let s = &system.model.surface;
    let predicted = q.lambda.dot(&(s.j * q.lambda)) + q.mu.norm_squared() * s.area;
    let norm = system.g_v.quad_form(&x, &x).sqrt();
    WitnessBound {
        numerator,
        predicted,
        norm,
        ratio: if norm > 0.0 { numerator / norm } else { 0.0 },
    }
}

/// Full stability census of one refinement level.
pub fn stability_report(
    system: &SaddleSystem,
    level: usize,
    options: &StabilityOptions,
) -> Result<StabilityReport> {
    let n = system.n();
    let (rigid_unconstrained, rigid_constrained) = if n + 6 <= options.census_dense_limit {
        (
            rigid_mode_census_in(&system.k.to_dense(), &system.g_v.to_dense(), CENSUS_TOL)?,
            rigid_mode_census_in(&system.kkt_dense(), &system.kkt_gram_dense(), CENSUS_TOL)?,
        )
    } else {
        // zero pivots of the sparse factorizations stand in for the eigenvalue count
        (
            SymmetricSolver::new(&system.k, options.dense_limit)
                .stats()
                .zero,
            system.solver(options.dense_limit).zero_pivots(),
        )
    };
    Ok(StabilityReport {
        level,
        n,
        alpha: kernel_ellipticity(system, options)?,
        beta: inf_sup_constant(system, options)?,
        rigid_unconstrained,
        rigid_constrained,
    })
}
