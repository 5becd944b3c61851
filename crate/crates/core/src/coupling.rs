//! Interface constraints tying the solid surface Σ to the beam tip.
//!
//! Rows 0..3 of the constraint block carry the rotation constraint
//! `∫_Σ T^α × u_{,α} dA − J θ_* = 0` (multiplier `λ`), rows 3..6 the
//! displacement constraint `∫_Σ u dA − |Σ| w_* = 0` (multiplier `μ`). Both are
//! kept in integrated form, so the rows scale with the interface area.

use crate::error::{invalid, Error, Result};
use crate::geometry::{InterfaceSurface, Mat3, Vec3};
use nalgebra::{DMatrix, Matrix6};

/// Ordering of the primal unknowns: solid nodal displacements, then the
/// clamp-reduced beam nodal `[w θ]` blocks, then the six multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub solid_nodes: usize,
    pub beam_elements: usize,
}

impl DofLayout {
    pub fn new(solid_nodes: usize, beam_elements: usize) -> Self {
        DofLayout {
            solid_nodes,
            beam_elements,
        }
    }

    pub fn n_solid(&self) -> usize {
        3 * self.solid_nodes
    }

    pub fn n_beam(&self) -> usize {
        6 * self.beam_elements
    }

    /// Number of primal unknowns `N`.
    pub fn n_primal(&self) -> usize {
        self.n_solid() + self.n_beam()
    }

    /// `N + 6`
    pub fn n_total(&self) -> usize {
        self.n_primal() + 6
    }

    pub fn beam_offset(&self) -> usize {
        self.n_solid()
    }

    /// First DOF of the tip displacement `w_*`.
    pub fn tip_w(&self) -> usize {
        self.n_primal() - 6
    }

    /// First DOF of the tip rotation `θ_*`.
    pub fn tip_theta(&self) -> usize {
        self.n_primal() - 3
    }

    pub fn multipliers(&self) -> usize {
        self.n_primal()
    }
}

/// The constraint block `B` with its singular values.
#[derive(Clone, Debug)]
pub struct ConstraintBlock {
    pub b: DMatrix<f64>,
    pub layout: DofLayout,
    /// Singular values of `B`, descending.
    pub singular_values: Vec<f64>,
}

impl ConstraintBlock {
    pub fn rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }

    /// `B x`
    pub fn apply(&self, x: &[f64]) -> [f64; 6] {
        std::array::from_fn(|r| self.b.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// `Bᵀ q`
    pub fn apply_transpose(&self, q: &[f64]) -> Vec<f64> {
        (0..self.b.ncols())
            .map(|j| (0..6).map(|r| self.b[(r, j)] * q[r]).sum())
            .collect()
    }
}

/// Lagrange multipliers: `λ` pairs with the rotation rows, `μ` with the displacement rows.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MultiplierState {
    pub lambda: Vec3,
    pub mu: Vec3,
}

impl MultiplierState {
    pub fn from_slice(q: &[f64]) -> Self {
        MultiplierState {
            lambda: Vec3::new(q[0], q[1], q[2]),
            mu: Vec3::new(q[3], q[4], q[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.lambda.x,
            self.lambda.y,
            self.lambda.z,
            self.mu.x,
            self.mu.y,
            self.mu.z,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

const RANK_TOL: f64 = 1e-12;

fn numerical_rank(sv: &[f64]) -> usize {
    let smax = sv.iter().fold(0.0_f64, |a, b| a.max(*b));
    sv.iter().filter(|s| **s > RANK_TOL * smax).count()
}

fn skew(v: &Vec3) -> Mat3 {
    v.cross_matrix()
}

fn check_columns(layout: &DofLayout, surface: &InterfaceSurface) -> Result<()> {
    if layout.beam_elements == 0 {
        return Err(invalid(
            "beam_elements",
            "the coupled beam needs at least one element",
        ));
    }
    if let Some(&n) = surface.nodes.last() {
        if n >= layout.solid_nodes {
            return Err(Error::DimensionMismatch {
                expected: layout.solid_nodes,
                found: n + 1,
            });
        }
    }
    Ok(())
}

/// Rows of `∫_Σ u dA − |Σ| w_*`.
pub fn displacement_constraint_rows(
    surface: &InterfaceSurface,
    layout: &DofLayout,
) -> Result<DMatrix<f64>> {
    check_columns(layout, surface)?;
    let mut rows = DMatrix::zeros(3, layout.n_primal());
    for (face, p) in surface.points() {
        for a in 0..4 {
            let w = p.shape[a] * p.da;
            for i in 0..3 {
                rows[(i, 3 * face.nodes[a] + i)] += w;
            }
        }
    }
    for i in 0..3 {
        rows[(i, layout.tip_w() + i)] = -surface.area;
    }
    Ok(rows)
}

/// Rows of `∫_Σ T^α × u_{,α} dA − J θ_*`.
pub fn rotation_constraint_rows(
    surface: &InterfaceSurface,
    layout: &DofLayout,
) -> Result<DMatrix<f64>> {
    check_columns(layout, surface)?;
    let mut rows = DMatrix::zeros(3, layout.n_primal());
    for (face, p) in surface.points() {
        let dual = [skew(&p.duals[0]), skew(&p.duals[1])];
        for a in 0..4 {
            let block = (dual[0] * p.dshape[a][0] + dual[1] * p.dshape[a][1]) * p.da;
            let c = 3 * face.nodes[a];
            for i in 0..3 {
                for j in 0..3 {
                    rows[(i, c + j)] += block[(i, j)];
                }
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            rows[(i, layout.tip_theta() + j)] = -surface.j[(i, j)];
        }
    }
    Ok(rows)
}

/// Stack rotation rows over displacement rows and check full row rank.
pub fn assemble_b(surface: &InterfaceSurface, layout: &DofLayout) -> Result<ConstraintBlock> {
    let rot = rotation_constraint_rows(surface, layout)?;
    let disp = displacement_constraint_rows(surface, layout)?;
    let mut b = DMatrix::zeros(6, layout.n_primal());
    b.rows_mut(0, 3).copy_from(&rot);
    b.rows_mut(3, 3).copy_from(&disp);
    let block = constraint_block(b, *layout);
    let rank = block.rank();
    if rank < 6 {
        let svd = block.b.clone().svd(true, false);
        let smax = svd.singular_values.max();
        let u = svd.u.expect("left singular vectors");
        let deficient_rows = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] <= RANK_TOL * smax)
            .map(|k| std::array::from_fn(|r| u[(r, k)]))
            .collect();
        return Err(Error::RankDeficient {
            rank,
            singular_values: block.singular_values,
            deficient_rows,
        });
    }
    Ok(block)
}

/// Wrap a constraint matrix (possibly with rows removed) without a rank check.
pub fn constraint_block(b: DMatrix<f64>, layout: DofLayout) -> ConstraintBlock {
    let mut singular_values: Vec<f64> = b.clone().singular_values().iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    ConstraintBlock {
        b,
        layout,
        singular_values,
    }
}

/// `diag(L⁻² I₃, I₃)`
pub fn q_norm_gram(length_scale: f64) -> Result<Matrix6<f64>> {
    if !(length_scale > 0.0) || !length_scale.is_finite() {
        return Err(invalid(
            "characteristic_length",
            format!("must be positive, got {length_scale}"),
        ));
    }
    let s = length_scale.powi(-2);
    Ok(Matrix6::from_diagonal(&nalgebra::Vector6::new(
        s, s, s, 1.0, 1.0, 1.0,
    )))
}

fn nodal(u: &[f64], n: usize) -> Vec3 {
    Vec3::new(u[3 * n], u[3 * n + 1], u[3 * n + 2])
}

/// `∫_Σ T^α × u_{,α} dA` for a solid nodal displacement vector.
pub fn integrated_surface_rotation(surface: &InterfaceSurface, u: &[f64]) -> Vec3 {
    let mut acc = Vec3::zeros();
    for (face, p) in surface.points() {
        for alpha in 0..2 {
            let du: Vec3 = (0..4)
                .map(|a| nodal(u, face.nodes[a]) * p.dshape[a][alpha])
                .sum();
            acc += p.duals[alpha].cross(&du) * p.da;
        }
    }
    acc
}

/// Average surface rotation `θ̂(u) = J⁻¹ ∫_Σ T^α × u_{,α} dA`.
pub fn rotation_average(surface: &InterfaceSurface, u: &[f64]) -> Result<Vec3> {
    let jinv = surface
        .j
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("interface tensor J"))?;
    Ok(jinv * integrated_surface_rotation(surface, u))
}

/// Average surface displacement `|Σ|⁻¹ ∫_Σ u dA`.
pub fn displacement_average(surface: &InterfaceSurface, u: &[f64]) -> Vec3 {
    let mut acc = Vec3::zeros();
    for (face, p) in surface.points() {
        for a in 0..4 {
            acc += nodal(u, face.nodes[a]) * (p.shape[a] * p.da);
        }
    }
    acc / surface.area
}

fn axial(w: &Mat3) -> Vec3 {
    Vec3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)])
}

fn skew_part(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

/// `‖axial(∫_Σ skew[∇u] dA − ∫_Σ skew[θ_* × I_Σ] dA)‖` with the surface
/// gradient `∇u = u_{,α} ⊗ T^α` and `I_Σ = T_β ⊗ T^β`.
///
/// Vanishes exactly when `θ_*` satisfies the rotation constraint.
pub fn skew_average_check(surface: &InterfaceSurface, u: &[f64], theta: &Vec3) -> Result<f64> {
    if !surface.is_planar {
        return Err(Error::Unsupported(format!(
            "skew-average check requires a planar interface, `{}` is curved",
            surface.name
        )));
    }
    let mut lhs = Mat3::zeros();
    let mut rhs = Mat3::zeros();
    for (face, p) in surface.points() {
        let mut grad = Mat3::zeros();
        let mut i_sigma = Mat3::zeros();
        for alpha in 0..2 {
            let du: Vec3 = (0..4)
                .map(|a| nodal(u, face.nodes[a]) * p.dshape[a][alpha])
                .sum();
            grad += du * p.duals[alpha].transpose();
            i_sigma += p.tangents[alpha] * p.duals[alpha].transpose();
        }
        lhs += skew_part(&grad) * p.da;
        rhs += skew_part(&(skew(theta) * i_sigma)) * p.da;
    }
    Ok(axial(&(lhs - rhs)).norm())
}
