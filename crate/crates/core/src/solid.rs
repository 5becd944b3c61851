//! Linear isotropic elasticity on hex8 meshes: element stiffness, assembly,
//! consistent loads and the `U`-norm Gram matrix.
//!
//! Solid unknowns are nodal displacements, node `n` owning DOFs `3n..3n+3`.

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    hex_quadrature, interface_from_faces, FaceRef, InterfaceSurface, Mat3, Mesh, Vec3,
};
use crate::linalg::{CsrMatrix, TripletBuilder};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Lamé parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidMaterial {
    pub lambda: f64,
    pub mu: f64,
}

impl SolidMaterial {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let m = SolidMaterial { lambda, mu };
        m.validate()?;
        Ok(m)
    }

    /// From Young's modulus and Poisson's ratio.
    pub fn from_young_poisson(young_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(young_modulus > 0.0) || !young_modulus.is_finite() {
            return Err(invalid(
                "young_modulus",
                format!("must be positive, got {young_modulus}"),
            ));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(invalid(
                "poisson_ratio",
                format!("must lie in (-1, 0.5), got {poisson_ratio}"),
            ));
        }
        let (e, nu) = (young_modulus, poisson_ratio);
        Self::new(
            e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            e / (2.0 * (1.0 + nu)),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.lambda + 2.0 * self.mu / 3.0 > 0.0) || !self.lambda.is_finite() {
            return Err(invalid(
                "lambda",
                "bulk modulus lambda + 2 mu / 3 must be positive",
            ));
        }
        Ok(())
    }

    /// `σ = 2μ ε + λ tr(ε) I`
    pub fn stress(&self, strain: &Mat3) -> Mat3 {
        strain * (2.0 * self.mu) + Mat3::identity() * (self.lambda * strain.trace())
    }
}

/// Constant traction on a boundary face set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Traction {
    pub face_set: String,
    pub traction: [f64; 3],
}

/// Body force per unit volume and boundary tractions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolidLoads {
    pub body_force: [f64; 3],
    pub tractions: Vec<Traction>,
}

/// `½ (G + Gᵀ)`
pub fn small_strain(grad: &Mat3) -> Mat3 {
    (grad + grad.transpose()) * 0.5
}

/// 24 × 24 stiffness of one hexahedron, DOFs ordered `[node][component]`.
pub fn solid_element_stiffness(
    coords: &[Vec3; 8],
    element: usize,
    material: &SolidMaterial,
) -> Result<DMatrix<f64>> {
    let (lam, mu) = (material.lambda, material.mu);
    let mut k = DMatrix::zeros(24, 24);
    for q in hex_quadrature(coords, element)? {
        for a in 0..8 {
            let ga = q.grad[a];
            for b in 0..8 {
                let gb = q.grad[b];
                let dot = ga.dot(&gb);
                for i in 0..3 {
                    for j in 0..3 {
                        let mut v = mu * gb[i] * ga[j] + lam * ga[i] * gb[j];
                        if i == j {
                            v += mu * dot;
                        }
                        k[(3 * a + i, 3 * b + j)] += v * q.dv;
                    }
                }
            }
        }
    }
    Ok(k)
}

fn element_dofs(conn: &[usize; 8]) -> [usize; 24] {
    std::array::from_fn(|i| 3 * conn[i / 3] + i % 3)
}

/// Assemble an element-wise matrix kernel; element matrices are computed
/// in parallel when requested and always summed in element order.
fn assemble_with<F>(mesh: &Mesh, parallel: bool, kernel: F) -> Result<CsrMatrix>
where
    F: Fn(usize) -> Result<DMatrix<f64>> + Sync,
{
    let ne = mesh.num_elements();
    let blocks: Vec<DMatrix<f64>> = if parallel {
        (0..ne)
            .into_par_iter()
            .map(&kernel)
            .collect::<Result<_>>()?
    } else {
        (0..ne).map(&kernel).collect::<Result<_>>()?
    };
    let n = 3 * mesh.num_nodes();
    let mut t = TripletBuilder::new(n, n);
    for (e, ke) in blocks.iter().enumerate() {
        t.add_block(&element_dofs(&mesh.elements[e]), ke);
    }
    Ok(t.build())
}

/// Free-free stiffness `K_B` of the whole mesh.
pub fn assemble_solid(mesh: &Mesh, material: &SolidMaterial) -> Result<CsrMatrix> {
    assemble_solid_with(mesh, material, false)
}

pub fn assemble_solid_with(
    mesh: &Mesh,
    material: &SolidMaterial,
    parallel: bool,
) -> Result<CsrMatrix> {
    material.validate()?;
    assemble_with(mesh, parallel, |e| {
        solid_element_stiffness(&mesh.element_coords(e), e, material)
    })
}

/// Consistent nodal loads. Fails when a traction face set shares a face with `interface`.
pub fn solid_load_vector(
    mesh: &Mesh,
    loads: &SolidLoads,
    interface: Option<&InterfaceSurface>,
) -> Result<Vec<f64>> {
    let mut f = vec![0.0; 3 * mesh.num_nodes()];
    let body = Vec3::from(loads.body_force);
    if body != Vec3::zeros() {
        for (e, conn) in mesh.elements.iter().enumerate() {
            for q in hex_quadrature(&mesh.element_coords(e), e)? {
                for a in 0..8 {
                    for i in 0..3 {
                        f[3 * conn[a] + i] += q.shape[a] * body[i] * q.dv;
                    }
                }
            }
        }
    }
    let coupled: BTreeSet<FaceRef> = interface
        .map(|s| s.faces.iter().map(|f| f.face).collect())
        .unwrap_or_default();
    for tr in &loads.tractions {
        let faces = mesh.face_set(&tr.face_set)?;
        if faces.iter().any(|f| coupled.contains(f)) {
            return Err(Error::InvalidConfiguration(format!(
                "traction on face set `{}` overlaps the coupled interface",
                tr.face_set
            )));
        }
        let t = Vec3::from(tr.traction);
        let surf = interface_from_faces(mesh, &tr.face_set, faces)?;
        for (face, p) in surf.points() {
            for a in 0..4 {
                for i in 0..3 {
                    f[3 * face.nodes[a] + i] += p.shape[a] * t[i] * p.da;
                }
            }
        }
    }
    Ok(f)
}

/// `L²` mass Gram matrix: `vᵀ M v = ∫ |v|² dV`.
pub fn mass_gram(mesh: &Mesh) -> Result<CsrMatrix> {
    gram(mesh, 1.0, 0.0)
}

/// `vᵀ G_U v = ‖v‖²_{L²} + L² ‖∇v‖²_{L²}`.
pub fn u_norm_gram(mesh: &Mesh, length_scale: f64) -> Result<CsrMatrix> {
    if !(length_scale > 0.0) || !length_scale.is_finite() {
        return Err(invalid(
            "characteristic_length",
            format!("must be positive, got {length_scale}"),
        ));
    }
    gram(mesh, 1.0, length_scale * length_scale)
}

fn gram(mesh: &Mesh, mass: f64, stiff: f64) -> Result<CsrMatrix> {
    assemble_with(mesh, false, |e| {
        let mut g = DMatrix::zeros(24, 24);
        for q in hex_quadrature(&mesh.element_coords(e), e)? {
            for a in 0..8 {
                for b in 0..8 {
                    let v =
                        (mass * q.shape[a] * q.shape[b] + stiff * q.grad[a].dot(&q.grad[b])) * q.dv;
                    for i in 0..3 {
                        g[(3 * a + i, 3 * b + i)] += v;
                    }
                }
            }
        }
        Ok(g)
    })
}

/// Nodal vector of the rigid motion `c + ω × (x − center)`.
pub fn rigid_motion(mesh: &Mesh, c: &Vec3, omega: &Vec3, center: &Vec3) -> Vec<f64> {
    mesh.nodes
        .iter()
        .flat_map(|x| {
            let u = c + omega.cross(&(x - center));
            [u.x, u.y, u.z]
        })
        .collect()
}

/// Nodal interpolant of a vector field.
pub fn interpolate<F: Fn(&Vec3) -> Vec3>(mesh: &Mesh, field: F) -> Vec<f64> {
    mesh.nodes
        .iter()
        .flat_map(|x| {
            let u = field(x);
            [u.x, u.y, u.z]
        })
        .collect()
}

/// Small strain at every quadrature point of every element.
pub fn strains(mesh: &Mesh, u: &[f64]) -> Result<Vec<Mat3>> {
    let mut out = Vec::with_capacity(8 * mesh.num_elements());
    for (e, conn) in mesh.elements.iter().enumerate() {
        for q in hex_quadrature(&mesh.element_coords(e), e)? {
            let mut g = Mat3::zeros();
            for a in 0..8 {
                let ua = Vec3::new(u[3 * conn[a]], u[3 * conn[a] + 1], u[3 * conn[a] + 2]);
                g += ua * q.grad[a].transpose();
            }
            out.push(small_strain(&g));
        }
    }
    Ok(out)
}
